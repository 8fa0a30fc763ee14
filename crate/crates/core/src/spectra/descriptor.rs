use serde::{Deserialize, Serialize};

use super::freq::{spat2freq, FreqImage};
use crate::error::{Error, Result};
use crate::image::RgbImage;

/// Layout and weighting of the hand-crafted global descriptor.
///
/// The descriptor concatenates
/// * `rings × sectors` means of the log-magnitude spectrum over a radial
///   (linear in frequency) by angular (over `[0, π)`) grid, and
/// * `2 · spatial_grid²` block means and standard deviations of the gray
///   intensity over a square spatial grid.
///
/// Each part is centered on its own mean before weighting, so descriptors
/// encode the shape of the spectrum and the contrast pattern of the scene
/// rather than absolute brightness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptorConfig {
    pub rings: usize,
    pub sectors: usize,
    pub spatial_grid: usize,
    pub log_base: f64,
    pub spectral_weight: f64,
    /// Applied to intensities expressed in 8-bit levels.
    pub spatial_weight: f64,
}

impl DescriptorConfig {
    /// Place-recognition layout: 4 rings × 64 sectors, spectrum only, d = 256.
    ///
    /// Fine angular resolution separates parcels by their row orientation,
    /// and the magnitude spectrum ignores the sub-stride offset between a
    /// query and its nearest reference tile, which a spatial grid does not.
    pub fn place() -> Self {
        Self {
            rings: 4,
            sectors: 64,
            spatial_grid: 0,
            log_base: 1.5,
            spectral_weight: 1.0,
            spatial_weight: 0.0,
        }
    }

    /// Altitude-estimation layout: spectrum only, 64 rings × 4 sectors, d = 256.
    pub fn altitude() -> Self {
        Self {
            rings: 64,
            sectors: 4,
            spatial_grid: 0,
            log_base: 1.5,
            spectral_weight: 1.0,
            spatial_weight: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.spectral_dim() + self.spatial_dim()
    }

    fn spectral_dim(&self) -> usize {
        self.rings * self.sectors
    }

    fn spatial_dim(&self) -> usize {
        2 * self.spatial_grid * self.spatial_grid
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::Config("descriptor has no components".into()));
        }
        if (self.rings == 0) != (self.sectors == 0) {
            return Err(Error::Config("rings and sectors must both be zero or both positive".into()));
        }
        if !(self.log_base > 1.0) {
            return Err(Error::Config(format!("log base must be > 1, got {}", self.log_base)));
        }
        if !(self.spectral_weight >= 0.0 && self.spatial_weight >= 0.0) {
            return Err(Error::Config("descriptor weights must be >= 0".into()));
        }
        Ok(())
    }
}

impl DescriptorConfig {
    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        use crate::codec::PutLe;
        out.put_u32(self.rings as u32);
        out.put_u32(self.sectors as u32);
        out.put_u32(self.spatial_grid as u32);
        out.put_f64(self.log_base);
        out.put_f64(self.spectral_weight);
        out.put_f64(self.spatial_weight);
    }

    pub(crate) fn decode(r: &mut crate::codec::Reader) -> Result<Self> {
        let cfg = Self {
            rings: r.u32()? as usize,
            sectors: r.u32()? as usize,
            spatial_grid: r.u32()? as usize,
            log_base: r.f64()?,
            spectral_weight: r.f64()?,
            spatial_weight: r.f64()?,
        };
        cfg.validate().map_err(|e| r.error(e.to_string()))?;
        Ok(cfg)
    }
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self::place()
    }
}

/// An L2-normalized global feature with the norm it had before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f64>,
    pub raw_norm: f64,
}

impl Descriptor {
    /// Normalizes `raw`, remembering its norm. A zero vector stays zero.
    pub fn from_raw(mut raw: Vec<f64>) -> Self {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            raw.iter_mut().for_each(|v| *v /= norm);
        }
        Self {
            values: raw,
            raw_norm: norm,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Precomputed spectral cell map for one input size.
#[derive(Debug, Clone)]
pub struct Describer {
    cfg: DescriptorConfig,
    width: usize,
    height: usize,
    /// Spectral cell of each frequency bin, `None` for DC and bins past the
    /// radial cutoff.
    cell_of_bin: Vec<Option<u32>>,
    cell_counts: Vec<u32>,
}

impl Describer {
    pub fn new(cfg: DescriptorConfig, width: usize, height: usize) -> Result<Self> {
        cfg.validate()?;
        if width < 2 || height < 2 || width < cfg.spatial_grid || height < cfg.spatial_grid {
            return Err(Error::Config(format!(
                "descriptor input {width}x{height} too small for a {}-block grid",
                cfg.spatial_grid
            )));
        }
        let mut cell_of_bin = vec![None; width * height];
        let mut cell_counts = vec![0u32; cfg.spectral_dim()];
        if cfg.rings > 0 {
            let (cy, cx) = (height / 2, width / 2);
            for v in 0..height {
                for u in 0..width {
                    let fy = (v as f64 - cy as f64) / height as f64;
                    let fx = (u as f64 - cx as f64) / width as f64;
                    let r = fx.hypot(fy);
                    if r == 0.0 || r >= 0.5 {
                        continue;
                    }
                    let ring = ((r / 0.5) * cfg.rings as f64) as usize;
                    let angle = fy.atan2(fx).rem_euclid(std::f64::consts::PI);
                    let sector = ((angle / std::f64::consts::PI) * cfg.sectors as f64) as usize;
                    let cell = ring.min(cfg.rings - 1) * cfg.sectors + sector.min(cfg.sectors - 1);
                    cell_of_bin[v * width + u] = Some(cell as u32);
                    cell_counts[cell] += 1;
                }
            }
        }
        Ok(Self {
            cfg,
            width,
            height,
            cell_of_bin,
            cell_counts,
        })
    }

    pub fn config(&self) -> &DescriptorConfig {
        &self.cfg
    }

    pub fn input_size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn dim(&self) -> usize {
        self.cfg.dim()
    }

    pub fn describe(&self, image: &RgbImage) -> Result<Descriptor> {
        self.check_size(image)?;
        let mut raw = Vec::with_capacity(self.dim());
        if self.cfg.rings > 0 {
            let freq = spat2freq(image, self.cfg.log_base)?;
            raw.extend(self.spectral_part(&freq));
        }
        if self.cfg.spatial_grid > 0 {
            raw.extend(self.spatial_part(&image.gray()));
        }
        Ok(Descriptor::from_raw(raw))
    }

    /// Descriptor of an already transformed image; only valid for spectrum-only
    /// layouts.
    pub fn describe_freq(&self, freq: &FreqImage) -> Result<Descriptor> {
        if self.cfg.spatial_grid > 0 {
            return Err(Error::Config("layout has a spatial part; describe the image instead".into()));
        }
        if (freq.width, freq.height) != (self.width, self.height) {
            return Err(Error::shape(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", freq.width, freq.height),
            ));
        }
        Ok(Descriptor::from_raw(self.spectral_part(freq)))
    }

    fn check_size(&self, image: &RgbImage) -> Result<()> {
        if image.dims() != (self.width, self.height) {
            return Err(Error::shape(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", image.width(), image.height()),
            ));
        }
        Ok(())
    }

    fn spectral_part(&self, freq: &FreqImage) -> Vec<f64> {
        let n = self.cfg.spectral_dim();
        let mut sums = vec![0.0; n];
        let [r, g, b] = &freq.channels;
        for (i, cell) in self.cell_of_bin.iter().enumerate() {
            if let Some(cell) = cell {
                sums[*cell as usize] += r[i] + g[i] + b[i];
            }
        }
        let mut means: Vec<Option<f64>> = sums
            .iter()
            .zip(&self.cell_counts)
            .map(|(s, &c)| (c > 0).then(|| s / (3.0 * c as f64)))
            .collect();
        // Empty cells (tiny rings at low frequency) take their ring's mean.
        for ring in 0..self.cfg.rings {
            let cells = &mut means[ring * self.cfg.sectors..(ring + 1) * self.cfg.sectors];
            let present: Vec<f64> = cells.iter().flatten().copied().collect();
            if present.len() < cells.len() && !present.is_empty() {
                let fill = present.iter().sum::<f64>() / present.len() as f64;
                cells.iter_mut().filter(|c| c.is_none()).for_each(|c| *c = Some(fill));
            }
        }
        let known: Vec<f64> = means.iter().flatten().copied().collect();
        let overall = if known.is_empty() { 0.0 } else { known.iter().sum::<f64>() / known.len() as f64 };
        let w = self.cfg.spectral_weight;
        means.into_iter().map(|m| w * (m.unwrap_or(overall) - overall)).collect()
    }

    fn spatial_part(&self, gray: &[f64]) -> Vec<f64> {
        let g = self.cfg.spatial_grid;
        let (w, h) = (self.width, self.height);
        let mut mean = vec![0.0; g * g];
        let mut std = vec![0.0; g * g];
        for by in 0..g {
            let (y0, y1) = (by * h / g, (by + 1) * h / g);
            for bx in 0..g {
                let (x0, x1) = (bx * w / g, (bx + 1) * w / g);
                let n = ((y1 - y0) * (x1 - x0)) as f64;
                let (mut s, mut s2) = (0.0, 0.0);
                for y in y0..y1 {
                    for &v in &gray[y * w + x0..y * w + x1] {
                        s += v;
                        s2 += v * v;
                    }
                }
                let m = s / n;
                mean[by * g + bx] = m;
                std[by * g + bx] = (s2 / n - m * m).max(0.0).sqrt();
            }
        }
        let center = |v: &mut Vec<f64>| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter_mut().for_each(|x| *x -= m);
        };
        center(&mut mean);
        center(&mut std);
        let w = self.cfg.spatial_weight;
        mean.into_iter().chain(std).map(|v| w * v).collect()
    }
}

/// One-shot descriptor of `image` under `cfg`.
pub fn describe(image: &RgbImage, cfg: &DescriptorConfig) -> Result<Descriptor> {
    Describer::new(*cfg, image.width(), image.height())?.describe(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_image(w: usize, h: usize, seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RgbImage::from_fn(w, h, |x, y| {
            let base = ((x / 7 + y / 5) % 3) as u8 * 60;
            [base + rng.random_range(0..40), base, rng.random_range(0..255)]
        })
    }

    #[test]
    fn layouts_have_256_dims() {
        assert_eq!(DescriptorConfig::place().dim(), 256);
        assert_eq!(DescriptorConfig::altitude().dim(), 256);
    }

    #[test]
    fn descriptor_is_unit_norm_and_deterministic() {
        let img = noise_image(64, 48, 1);
        let cfg = DescriptorConfig::place();
        let a = describe(&img, &cfg).unwrap();
        let b = describe(&img, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), 256);
        let n: f64 = a.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9);
        assert!(a.raw_norm > 0.0);
    }

    #[test]
    fn wrong_size_is_a_shape_error() {
        let d = Describer::new(DescriptorConfig::place(), 32, 32).unwrap();
        let err = d.describe(&noise_image(31, 32, 0)).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn spectral_cells_are_populated() {
        let d = Describer::new(DescriptorConfig::altitude(), 448, 336).unwrap();
        assert!(d.cell_counts.iter().all(|&c| c > 0));
        let d = Describer::new(DescriptorConfig::place(), 224, 224).unwrap();
        assert!(d.cell_counts.iter().all(|&c| c > 0));
    }

    #[test]
    fn freq_path_matches_image_path() {
        let img = noise_image(40, 30, 4);
        let d = Describer::new(DescriptorConfig::altitude(), 40, 30).unwrap();
        let a = d.describe(&img).unwrap();
        let b = d.describe_freq(&spat2freq(&img, 1.5).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flat_image_gives_zero_vector() {
        let img = RgbImage::filled(32, 32, [90, 90, 90]);
        let d = describe(&img, &DescriptorConfig::place()).unwrap();
        assert_eq!(d.raw_norm, 0.0);
        assert!(d.values.iter().all(|v| *v == 0.0));
    }
}
