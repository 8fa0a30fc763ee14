use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::image::RgbImage;

/// Log-compressed, DC-centered magnitude spectrum of each RGB channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqImage {
    pub width: usize,
    pub height: usize,
    /// `L_R, L_G, L_B`, each row-major `height × width`.
    pub channels: [Vec<f64>; 3],
    pub log_base: f64,
}

impl FreqImage {
    /// Row/column of the zero-frequency bin.
    pub fn dc_position(&self) -> (usize, usize) {
        (self.height / 2, self.width / 2)
    }

    /// Channel-mean spectrum.
    pub fn mean_plane(&self) -> Vec<f64> {
        let [r, g, b] = &self.channels;
        r.iter()
            .zip(g)
            .zip(b)
            .map(|((r, g), b)| (r + g + b) / 3.0)
            .collect()
    }

    /// Rescales the channel-mean spectrum to an 8-bit gray image for display.
    pub fn to_display(&self) -> RgbImage {
        let plane = self.mean_plane();
        let max = plane.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
        RgbImage::from_fn(self.width, self.height, |x, y| {
            let v = crate::image::to_u8(255.0 * plane[y * self.width + x] / max);
            [v, v, v]
        })
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

/// Unnormalized forward 2-D DFT of a row-major `height × width` buffer, in place.
pub fn fft2d(width: usize, height: usize, buf: &mut [Complex<f64>]) {
    debug_assert_eq!(buf.len(), width * height);
    let rows = plan(width);
    let mut scratch = vec![Complex::default(); rows.get_inplace_scratch_len()];
    rows.process_with_scratch(buf, &mut scratch);

    let mut transposed = vec![Complex::default(); buf.len()];
    transpose(width, height, buf, &mut transposed);
    let cols = plan(height);
    scratch.resize(cols.get_inplace_scratch_len(), Complex::default());
    cols.process_with_scratch(&mut transposed, &mut scratch);
    transpose(height, width, &transposed, buf);
}

fn transpose(width: usize, height: usize, src: &[Complex<f64>], dst: &mut [Complex<f64>]) {
    for y in 0..height {
        for x in 0..width {
            dst[x * height + y] = src[y * width + x];
        }
    }
}

/// Centered magnitude spectrum `|F((−1)^(x+y) · plane)|` of one real plane.
pub fn centered_magnitude(width: usize, height: usize, plane: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = plane
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (x, y) = (i % width, i / width);
            let sign = if (x + y) % 2 == 0 { 1.0 } else { -1.0 };
            Complex::new(sign * v, 0.0)
        })
        .collect();
    fft2d(width, height, &mut buf);
    buf.iter().map(|c| c.norm_sqr().sqrt()).collect()
}

/// Spatial-to-frequency transform: centering shift, 2-D DFT, magnitude and
/// `log_b(1 + ·)` per channel.
///
/// The shift places DC exactly at `(⌊H/2⌋, ⌊W/2⌋)` for even dimensions.
pub fn spat2freq(image: &RgbImage, log_base: f64) -> Result<FreqImage> {
    if !(log_base > 1.0 && log_base.is_finite()) {
        return Err(Error::Config(format!("log base must be > 1, got {log_base}")));
    }
    let (w, h) = image.dims();
    if w == 0 || h == 0 {
        return Err(Error::shape("non-empty image", "0 pixels"));
    }
    let ln_b = log_base.ln();
    let channel = |c: usize| -> Vec<f64> {
        centered_magnitude(w, h, &image.channel(c))
            .into_iter()
            .map(|m| m.ln_1p() / ln_b)
            .collect()
    };
    Ok(FreqImage {
        width: w,
        height: h,
        channels: [channel(0), channel(1), channel(2)],
        log_base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct O(N²) DFT, the reference the FFT path is checked against.
    fn brute_dft(width: usize, height: usize, plane: &[f64]) -> Vec<Complex<f64>> {
        let mut out = vec![Complex::default(); width * height];
        for v in 0..height {
            for u in 0..width {
                let mut acc = Complex::default();
                for y in 0..height {
                    for x in 0..width {
                        let phase = -std::f64::consts::TAU
                            * (u as f64 * x as f64 / width as f64 + v as f64 * y as f64 / height as f64);
                        acc += Complex::from_polar(plane[y * width + x], phase);
                    }
                }
                out[v * width + u] = acc;
            }
        }
        out
    }

    fn shifted(width: usize, plane: &[f64]) -> Vec<f64> {
        plane
            .iter()
            .enumerate()
            .map(|(i, &v)| if (i % width + i / width).is_multiple_of(2) { v } else { -v })
            .collect()
    }

    #[test]
    fn fft_matches_brute_force_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (w, h) in [(8, 8), (6, 10), (12, 4)] {
            let plane: Vec<f64> = (0..w * h).map(|_| rng.random_range(0.0..255.0)).collect();
            let fast = centered_magnitude(w, h, &plane);
            let slow = brute_dft(w, h, &shifted(w, &plane));
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b.norm()).abs() < 1e-8 * (1.0 + a));
            }
        }
    }

    #[test]
    fn constant_image_has_only_dc() {
        let c = 37u8;
        let (w, h) = (16, 12);
        let img = RgbImage::filled(w, h, [c, c, c]);
        let f = spat2freq(&img, 1.5).unwrap();
        let (dr, dc) = f.dc_position();
        let expect = (1.0 + c as f64 * (w * h) as f64).ln() / 1.5f64.ln();
        for plane in &f.channels {
            for (i, &v) in plane.iter().enumerate() {
                if i == dr * w + dc {
                    assert!((v - expect).abs() < 1e-9, "{v} vs {expect}");
                } else {
                    assert!(v.abs() < 1e-9, "bin {i} = {v}");
                }
            }
        }
    }

    #[test]
    fn unit_impulse_has_flat_spectrum() {
        let mut img = RgbImage::new(8, 8);
        img.put(3, 5, [1, 0, 0]);
        let f = spat2freq(&img, 1.5).unwrap();
        let flat = 2f64.ln() / 1.5f64.ln();
        assert!(f.channels[0].iter().all(|v| (v - flat).abs() < 1e-12));
        assert!(f.channels[1].iter().all(|v| v.abs() < 1e-12));
        // The brute-force DFT of the same impulse agrees.
        let plane = img.channel(0);
        let slow = brute_dft(8, 8, &shifted(8, &plane));
        assert!(slow.iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn circular_shift_leaves_magnitude_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (w, h, dx, dy) in [(8, 8, 3, 1), (16, 16, 5, 11), (12, 8, 2, 3)] {
            let img = RgbImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()]);
            let moved = RgbImage::from_fn(w, h, |x, y| img.get((x + dx) % w, (y + dy) % h));
            let a = spat2freq(&img, 1.5).unwrap();
            let b = spat2freq(&moved, 1.5).unwrap();
            for c in 0..3 {
                for (p, q) in a.channels[c].iter().zip(&b.channels[c]) {
                    assert!((p - q).abs() <= 1e-6, "{p} vs {q}");
                }
            }
        }
    }

    #[test]
    fn parseval_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [8usize, 16] {
            let plane: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..255.0)).collect();
            let m = centered_magnitude(n, n, &plane);
            let lhs: f64 = m.iter().map(|v| v * v).sum();
            let rhs = (n * n) as f64 * shifted(n, &plane).iter().map(|v| v * v).sum::<f64>();
            assert!((lhs - rhs).abs() <= 1e-6 * rhs, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn rejects_bad_log_base() {
        let img = RgbImage::new(4, 4);
        assert!(spat2freq(&img, 1.0).is_err());
        assert!(spat2freq(&img, 0.5).is_err());
    }

    proptest::proptest! {
        #[test]
        fn output_is_finite_and_non_negative(seed in 0u64..1000, w in 1usize..12, h in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = RgbImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()]);
            let f = spat2freq(&img, 1.5).unwrap();
            for plane in &f.channels {
                proptest::prop_assert!(plane.iter().all(|v| v.is_finite() && *v >= 0.0));
            }
        }
    }
}
