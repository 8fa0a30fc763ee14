use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::RgbImage;

/// 4-neighbor Laplacian `[[0,1,0],[1,-4,1],[0,1,0]]` with replicated borders.
pub fn laplacian(gray: &[f64], width: usize, height: usize) -> Vec<f64> {
    let at = |x: isize, y: isize| {
        let xc = x.clamp(0, width as isize - 1) as usize;
        let yc = y.clamp(0, height as isize - 1) as usize;
        gray[yc * width + xc]
    };
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height as isize {
        for x in 0..width as isize {
            out.push(at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1) - 4.0 * at(x, y));
        }
    }
    out
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Laplacian variance of the channel-mean grayscale image.
pub fn sharpness(image: &RgbImage) -> f64 {
    if image.width() == 0 || image.height() == 0 {
        return 0.0;
    }
    variance(&laplacian(&image.gray(), image.width(), image.height()))
}

/// Streaming mean/variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).sqrt()
        }
    }

    /// Clipped z-score mapped into `[0, 1]`: `(clip(z, −2, 2) + 2) / 4`.
    pub fn normalize(&self, x: f64) -> Result<f64> {
        if self.count < 2 {
            return Err(Error::Config(format!(
                "quality statistics hold {} sample(s); warm up on at least 2 before normalizing",
                self.count
            )));
        }
        let std = self.std();
        let z = if std > 0.0 { (x - self.mean) / std } else { 0.0 };
        Ok((z.clamp(-2.0, 2.0) + 2.0) / 4.0)
    }
}

/// Running statistics for the two quality signals.
///
/// Updates take `&mut self` and reads take `&self`, so sharing one across
/// threads behind a lock gives a single writer and consistent snapshots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityStats {
    pub norm: RunningStats,
    pub sharp: RunningStats,
}

impl QualityStats {
    pub fn observe(&mut self, q_norm: f64, q_sharp: f64) {
        self.norm.push(q_norm);
        self.sharp.push(q_sharp);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualitySignals {
    pub q_norm: f64,
    pub q_sharp: f64,
    pub q_norm_hat: f64,
    pub q_sharp_hat: f64,
    pub alpha: f64,
    pub q: f64,
}

/// Composite quality `α · Q̂_norm + (1 − α) · Q̂_sharp`, both signals
/// normalized against `stats`.
pub fn composite_quality(q_norm: f64, q_sharp: f64, alpha: f64, stats: &QualityStats) -> Result<QualitySignals> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let q_norm_hat = stats.norm.normalize(q_norm)?;
    let q_sharp_hat = stats.sharp.normalize(q_sharp)?;
    Ok(QualitySignals {
        q_norm,
        q_sharp,
        q_norm_hat,
        q_sharp_hat,
        alpha,
        q: alpha * q_norm_hat + (1.0 - alpha) * q_sharp_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RgbImage::from_fn(24, 20, |_, _| {
            let v = rng.random_range(20..100);
            [v, v + rng.random_range(0..10), v]
        })
    }

    #[test]
    fn flat_image_has_zero_sharpness() {
        assert_eq!(sharpness(&RgbImage::filled(10, 10, [50, 80, 200])), 0.0);
    }

    #[test]
    fn checkerboard_interior_variance_is_16() {
        let (w, h) = (12, 10);
        let gray: Vec<f64> = (0..w * h).map(|i| ((i % w + i / w) % 2) as f64).collect();
        let lap = laplacian(&gray, w, h);
        let interior: Vec<f64> = (1..h - 1)
            .flat_map(|y| (1..w - 1).map(move |x| (x, y)))
            .map(|(x, y)| lap[y * w + x])
            .collect();
        assert!(interior.iter().all(|v| v.abs() == 4.0));
        assert!((variance(&interior) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn offset_invariance_and_quadratic_scaling() {
        let img = random_image(1);
        let shifted = RgbImage::from_fn(24, 20, |x, y| img.get(x, y).map(|v| v + 30));
        assert!((sharpness(&img) - sharpness(&shifted)).abs() < 1e-9);
        let doubled = RgbImage::from_fn(24, 20, |x, y| img.get(x, y).map(|v| v * 2));
        let k2 = sharpness(&doubled) / sharpness(&img);
        assert!((k2 - 4.0).abs() < 1e-6 * 4.0, "{k2}");
    }

    #[test]
    fn composite_boundaries() {
        let mut stats = QualityStats::default();
        for (n, s) in [(1.0, 10.0), (2.0, 20.0), (3.0, 30.0), (4.0, 40.0)] {
            stats.observe(n, s);
        }
        let a1 = composite_quality(3.5, 12.0, 1.0, &stats).unwrap();
        assert_eq!(a1.q, stats.norm.normalize(3.5).unwrap());
        let a0 = composite_quality(3.5, 12.0, 0.0, &stats).unwrap();
        assert_eq!(a0.q, stats.sharp.normalize(12.0).unwrap());
        assert!((0.0..=1.0).contains(&a1.q) && (0.0..=1.0).contains(&a0.q));
    }

    #[test]
    fn composite_is_the_convex_mix() {
        // Signals chosen so the normalized values are exactly 0.2 and 0.6:
        // (clip(z)+2)/4 = 0.2 → z = −1.2 and 0.6 → z = 0.4.
        let mut stats = QualityStats::default();
        stats.observe(-1.0, -1.0);
        stats.observe(1.0, 1.0);
        let sd = stats.norm.std();
        let q = composite_quality(-1.2 * sd, 0.4 * sd, 0.5, &stats).unwrap();
        assert!((q.q_norm_hat - 0.2).abs() < 1e-12);
        assert!((q.q_sharp_hat - 0.6).abs() < 1e-12);
        assert!((q.q - 0.4).abs() < 1e-12);
    }

    #[test]
    fn cold_stats_are_an_error() {
        let mut stats = QualityStats::default();
        assert!(composite_quality(1.0, 1.0, 0.5, &stats).is_err());
        stats.observe(1.0, 1.0);
        let err = composite_quality(1.0, 1.0, 0.5, &stats).unwrap_err();
        assert!(err.to_string().contains("at least 2"), "{err}");
        assert!(composite_quality(1.0, 1.0, 1.5, &stats).is_err());
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [3.0, 7.5, -2.0, 11.0, 4.25];
        let mut s = RunningStats::default();
        xs.iter().for_each(|&x| s.push(x));
        let m = xs.iter().sum::<f64>() / 5.0;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        assert!((s.mean() - m).abs() < 1e-12);
        assert!((s.std() - v.sqrt()).abs() < 1e-12);
    }
}
