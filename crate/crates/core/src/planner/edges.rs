use crate::render::DepthImage;

/// A depth-discontinuity pixel with its in-image surface normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePixel {
    pub row: usize,
    pub col: usize,
    /// Unit `(d_col, d_row)` direction of the negative depth gradient.
    pub normal: (f64, f64),
}

/// Central-difference gradient `(d/dcol, d/drow)` with clamped borders.
pub fn depth_gradient(image: &DepthImage, row: usize, col: usize) -> (f64, f64) {
    let (r, c) = (row as isize, col as isize);
    let gx = (image.get_clamped(r, c + 1) as f64 - image.get_clamped(r, c - 1) as f64) / 2.0;
    let gy = (image.get_clamped(r + 1, c) as f64 - image.get_clamped(r - 1, c) as f64) / 2.0;
    (gx, gy)
}

/// Pixels whose gradient magnitude exceeds `threshold` (meters per pixel), in row-major order.
pub fn detect_depth_edges(image: &DepthImage, threshold: f64) -> Vec<EdgePixel> {
    let mut out = Vec::new();
    for row in 0..image.height() {
        for col in 0..image.width() {
            let (gx, gy) = depth_gradient(image, row, col);
            let m = gx.hypot(gy);
            if m > threshold {
                out.push(EdgePixel {
                    row,
                    col,
                    normal: (-gx / m, -gy / m),
                });
            }
        }
    }
    out
}

/// The line from `u` to `v` lies within `atan(friction)` of the normal at `u` and of the
/// negated normal at `v`.
pub fn antipodal_pixels(u: &EdgePixel, v: &EdgePixel, friction: f64) -> bool {
    let d = (v.col as f64 - u.col as f64, v.row as f64 - u.row as f64);
    let len = d.0.hypot(d.1);
    if len == 0.0 {
        return false;
    }
    let cos_max = friction.atan().cos();
    let a = (d.0 * u.normal.0 + d.1 * u.normal.1) / len;
    let b = -(d.0 * v.normal.0 + d.1 * v.normal.1) / len;
    a >= cos_max - 1e-12 && b >= cos_max - 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(w: usize, h: usize, at: usize, lo: f32, hi: f32) -> DepthImage {
        let data = (0..h).flat_map(|_| (0..w).map(move |c| if c < at { lo } else { hi })).collect();
        DepthImage::new(h, w, data).unwrap()
    }

    #[test]
    fn constant_image_has_no_edges() {
        let img = DepthImage::new(10, 12, vec![0.7; 120]).unwrap();
        assert!(detect_depth_edges(&img, 0.0025).is_empty());
    }

    #[test]
    fn step_marks_the_two_adjacent_columns() {
        let img = step(20, 6, 9, 0.6, 0.7);
        let edges = detect_depth_edges(&img, 0.0025);
        assert_eq!(edges.len(), 12);
        assert!(edges.iter().all(|e| e.col == 8 || e.col == 9));
        // the normal points toward the nearer surface
        assert!(edges.iter().all(|e| (e.normal.0 + 1.0).abs() < 1e-12 && e.normal.1 == 0.0));
        let g = depth_gradient(&img, 3, 8);
        assert!((g.0 - 0.05).abs() < 1e-6 && g.1 == 0.0);
    }

    #[test]
    fn antipodal_predicate_cone() {
        let e = |col, n: (f64, f64)| EdgePixel { row: 0, col, normal: n };
        let u = e(0, (1.0, 0.0));
        let v = e(10, (-1.0, 0.0));
        assert!(antipodal_pixels(&u, &v, 0.1));
        assert!(antipodal_pixels(&v, &u, 0.1));
        assert!(!antipodal_pixels(&e(0, (-1.0, 0.0)), &e(10, (1.0, 0.0)), 0.9));
        let t = 0.5f64;
        let tilted = e(10, (-t.cos(), t.sin()));
        assert!(antipodal_pixels(&u, &tilted, t.tan() + 1e-6));
        assert!(!antipodal_pixels(&u, &tilted, t.tan() - 1e-3));
        assert!(!antipodal_pixels(&u, &u, 1.0));
    }
}
