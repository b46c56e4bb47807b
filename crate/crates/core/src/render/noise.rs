use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use super::DepthImage;
use crate::rng::Rng;
use crate::{Error, Result};

const MIN_DEPTH: f32 = 1e-6;

/// Multiplicative Gamma depth scaling plus an additive, spatially correlated Gaussian field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Pixel standard deviation of the additive field, meters.
    pub sigma: f64,
    /// Spacing of the coarse noise grid, pixels.
    pub length_scale: f64,
    pub gamma_shape: f64,
    /// A non-positive scale freezes the multiplicative factor at 1.
    pub gamma_scale: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma: 0.005,
            length_scale: std::f64::consts::SQRT_2,
            gamma_shape: 1000.0,
            gamma_scale: 0.001,
        }
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            sigma: 0.0,
            gamma_scale: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.length_scale > 0.0 && self.gamma_shape > 0.0 && self.gamma_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid noise model {self:?}")));
        }
        Ok(())
    }
}

pub fn sample_alpha(model: &NoiseModel, rng: &mut Rng) -> f64 {
    if model.gamma_scale <= 0.0 {
        return 1.0;
    }
    Gamma::new(model.gamma_shape, model.gamma_scale)
        .expect("validated gamma parameters")
        .sample(rng)
}

/// Zero-mean field on an `height x width` image: a `ceil(H/l) x ceil(W/l)` grid of
/// `N(0, sigma^2)` values bilinearly upsampled, renormalised so every pixel has std `sigma`.
pub fn gp_noise_field(height: usize, width: usize, sigma: f64, length_scale: f64, rng: &mut Rng) -> Vec<f64> {
    if sigma == 0.0 || height == 0 || width == 0 {
        return vec![0.0; height * width];
    }
    let gh = ((height as f64 / length_scale).ceil() as usize).max(1);
    let gw = ((width as f64 / length_scale).ceil() as usize).max(1);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let grid: Vec<f64> = (0..gh * gw).map(|_| normal.sample(rng)).collect();
    let rows: Vec<(usize, usize, f64)> = (0..height).map(|r| coarse(r, height, gh)).collect();
    let cols: Vec<(usize, usize, f64)> = (0..width).map(|c| coarse(c, width, gw)).collect();
    let mut out = Vec::with_capacity(height * width);
    for &(r0, r1, fr) in &rows {
        for &(c0, c1, fc) in &cols {
            let w = [(1.0 - fr) * (1.0 - fc), (1.0 - fr) * fc, fr * (1.0 - fc), fr * fc];
            let g = [grid[r0 * gw + c0], grid[r0 * gw + c1], grid[r1 * gw + c0], grid[r1 * gw + c1]];
            let num: f64 = w.iter().zip(&g).map(|(a, b)| a * b).sum();
            let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            out.push(num / norm);
        }
    }
    out
}

fn coarse(i: usize, n: usize, g: usize) -> (usize, usize, f64) {
    if n <= 1 || g <= 1 {
        return (0, 0, 0.0);
    }
    let x = i as f64 * (g - 1) as f64 / (n - 1) as f64;
    let i0 = (x.floor() as usize).min(g - 2);
    (i0, i0 + 1, x - i0 as f64)
}

/// `y = alpha * y_hat + eps`, clamped to stay positive.
pub fn corrupt_image(image: &DepthImage, model: &NoiseModel, rng: &mut Rng) -> DepthImage {
    let alpha = sample_alpha(model, rng);
    let field = gp_noise_field(image.height(), image.width(), model.sigma, model.length_scale, rng);
    let data = image
        .data()
        .iter()
        .zip(&field)
        .map(|(&d, &e)| ((alpha * d as f64 + e) as f32).max(MIN_DEPTH))
        .collect();
    DepthImage::new(image.height(), image.width(), data).expect("clamped depths are positive")
}
