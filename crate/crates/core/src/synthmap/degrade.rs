use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{to_u8, RgbImage};

/// Sensor noise and lossy-compression settings applied to rendered views.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationConfig {
    pub gaussian_sigma: f64,
    pub dct_quality: u8,
    pub seed: u64,
}

impl Default for DegradationConfig {
    fn default() -> Self {
        Self {
            gaussian_sigma: 2.0,
            dct_quality: 95,
            seed: 0,
        }
    }
}

impl DegradationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_sigma >= 0.0 && self.gaussian_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "gaussian_sigma must be >= 0, got {}",
                self.gaussian_sigma
            )));
        }
        if !(1..=100).contains(&self.dct_quality) {
            return Err(Error::Config(format!(
                "dct_quality must be in 1..=100, got {}",
                self.dct_quality
            )));
        }
        Ok(())
    }
}

const LUMINANCE_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Luminance quantization table scaled by the usual quality-factor rule.
pub fn quantization_table(quality: u8) -> [f64; 64] {
    let q = quality.clamp(1, 100) as f64;
    let scale = if q < 50.0 { 5000.0 / q } else { 200.0 - 2.0 * q };
    let mut table = [0.0; 64];
    for (t, &base) in table.iter_mut().zip(LUMINANCE_TABLE.iter()) {
        *t = (base as f64 * scale / 100.0).round().max(1.0);
    }
    table
}

/// Zero-mean Gaussian noise per channel sample, clamped to `[0, 255]`.
pub fn add_gaussian_noise(image: &RgbImage, sigma: f64, seed: u64) -> Vec<f64> {
    let raw = image.as_raw();
    if sigma == 0.0 {
        return raw.iter().map(|&v| v as f64).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    raw.iter()
        .map(|&v| (v as f64 + normal.sample(&mut rng)).clamp(0.0, 255.0))
        .collect()
}

/// Gaussian noise followed by per-channel 8×8 block-DCT quantization.
pub fn degrade(image: &RgbImage, cfg: &DegradationConfig) -> Result<RgbImage> {
    cfg.validate()?;
    let noisy = add_gaussian_noise(image, cfg.gaussian_sigma, cfg.seed);
    let table = quantization_table(cfg.dct_quality);
    let basis = dct_basis();
    let (w, h) = image.dims();
    let mut out = vec![0u8; noisy.len()];
    let mut block = [0.0f64; 64];
    let mut coef = [0.0f64; 64];
    for c in 0..3 {
        for by in (0..h).step_by(8) {
            for bx in (0..w).step_by(8) {
                // Partial blocks replicate the last row/column.
                for v in 0..8 {
                    let y = (by + v).min(h - 1);
                    for u in 0..8 {
                        let x = (bx + u).min(w - 1);
                        block[v * 8 + u] = noisy[(y * w + x) * 3 + c] - 128.0;
                    }
                }
                forward_dct(&block, &mut coef, &basis);
                for (k, q) in coef.iter_mut().zip(table.iter()) {
                    *k = (*k / q).round() * q;
                }
                inverse_dct(&coef, &mut block, &basis);
                for v in 0..8.min(h - by) {
                    for u in 0..8.min(w - bx) {
                        out[((by + v) * w + bx + u) * 3 + c] = to_u8(block[v * 8 + u] + 128.0);
                    }
                }
            }
        }
    }
    RgbImage::from_raw(w, h, out)
}

/// Orthonormal 1-D DCT-II basis: `basis[k][n]`.
fn dct_basis() -> [[f64; 8]; 8] {
    let mut b = [[0.0; 8]; 8];
    for (k, row) in b.iter_mut().enumerate() {
        let alpha = if k == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
        for (n, v) in row.iter_mut().enumerate() {
            *v = alpha * ((std::f64::consts::PI * (2 * n + 1) as f64 * k as f64) / 16.0).cos();
        }
    }
    b
}

fn forward_dct(block: &[f64; 64], out: &mut [f64; 64], basis: &[[f64; 8]; 8]) {
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for k in 0..8 {
            tmp[y * 8 + k] = (0..8).map(|x| basis[k][x] * block[y * 8 + x]).sum();
        }
    }
    for l in 0..8 {
        for k in 0..8 {
            out[l * 8 + k] = (0..8).map(|y| basis[l][y] * tmp[y * 8 + k]).sum();
        }
    }
}

fn inverse_dct(coef: &[f64; 64], out: &mut [f64; 64], basis: &[[f64; 8]; 8]) {
    let mut tmp = [0.0; 64];
    for l in 0..8 {
        for x in 0..8 {
            tmp[l * 8 + x] = (0..8).map(|k| basis[k][x] * coef[l * 8 + k]).sum();
        }
    }
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|l| basis[l][y] * tmp[l * 8 + x]).sum();
        }
    }
}
