use crate::grasp_image::PlanarGrasp;
use crate::render::DepthImage;

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    /// Binary PGM encoding.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Depth image scaled to 8 bits (near is bright) with the jaw axis drawn black and the jaw
/// positions white, `width_px` pixels apart.
pub fn grasp_overlay(image: &DepthImage, grasp: &PlanarGrasp, width_px: f64) -> GrayImage {
    let (lo, hi) = image
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    let span = (hi - lo).max(1e-9);
    let mut pixels: Vec<u8> = image.data().iter().map(|&d| (255.0 * (hi - d) / span).round() as u8).collect();
    let (w, h) = (image.width(), image.height());
    let mut put = |r: f64, c: f64, v: u8| {
        let (r, c) = (r.round(), c.round());
        if r >= 0.0 && c >= 0.0 && (r as usize) < h && (c as usize) < w {
            pixels[r as usize * w + c as usize] = v;
        }
    };
    let (dc, dr) = grasp.direction();
    let half = width_px / 2.0;
    let steps = (2.0 * half).ceil() as usize * 2 + 1;
    for i in 0..=steps {
        let t = -half + 2.0 * half * i as f64 / steps as f64;
        put(grasp.row + dr * t, grasp.col + dc * t, 0);
    }
    for s in [-1.0, 1.0] {
        for k in -3..=3 {
            let k = k as f64;
            put(grasp.row + dr * s * half + dc * k, grasp.col + dc * s * half - dr * k, 255);
        }
    }
    GrayImage { width: w, height: h, pixels }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_marks_axis_and_jaws() {
        let img = DepthImage::new(20, 30, (0..600).map(|i| 0.6 + (i % 30) as f32 * 0.001).collect()).unwrap();
        let g = PlanarGrasp::new(10.0, 15.0, 0.0, 0.6).unwrap();
        let o = grasp_overlay(&img, &g, 10.0);
        assert_eq!(o.pixels[10 * 30 + 15], 0);
        assert_eq!(o.pixels[10 * 30 + 10], 255);
        assert_eq!(o.pixels[7 * 30 + 20], 255);
        assert_eq!(o.pixels[0], 255);
        assert_eq!(o.pixels[29], 0);
        assert!(o.to_pgm().starts_with(b"P5\n30 20\n255\n"));
    }
}
