use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::Utm;
use crate::error::{Error, Result};
use crate::image::RgbImage;

/// A north-up geo-referenced RGB raster.
///
/// `origin` is the UTM position of the center of pixel `(0, 0)`. Easting grows
/// with the column index and northing shrinks with the row index, so
/// `utm_of(x, y) = (origin_e + x·res, origin_n − y·res)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoRaster {
    pixels: RgbImage,
    origin: Utm,
    resolution: f64,
}

impl GeoRaster {
    pub fn new(pixels: RgbImage, origin: Utm, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::Config(format!(
                "raster resolution must be > 0 m/px, got {resolution}"
            )));
        }
        if pixels.width() == 0 || pixels.height() == 0 {
            return Err(Error::Config("raster must have at least one pixel".into()));
        }
        if !(origin.easting.is_finite() && origin.northing.is_finite()) {
            return Err(Error::Config("raster origin must be finite".into()));
        }
        Ok(Self {
            pixels,
            origin,
            resolution,
        })
    }

    pub fn pixels(&self) -> &RgbImage {
        &self.pixels
    }

    pub fn origin(&self) -> Utm {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    pub fn utm_of(&self, x: f64, y: f64) -> Utm {
        Utm::new(
            self.origin.easting + x * self.resolution,
            self.origin.northing - y * self.resolution,
        )
    }

    /// Continuous pixel coordinates of a UTM position.
    pub fn pixel_of(&self, utm: Utm) -> (f64, f64) {
        (
            (utm.easting - self.origin.easting) / self.resolution,
            (self.origin.northing - utm.northing) / self.resolution,
        )
    }

    /// Ground extent covered by the pixel areas: `(west, east, south, north)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let half = self.resolution / 2.0;
        let west = self.origin.easting - half;
        let north = self.origin.northing + half;
        (
            west,
            west + self.width() as f64 * self.resolution,
            north - self.height() as f64 * self.resolution,
            north,
        )
    }

    pub fn extent_m(&self) -> (f64, f64) {
        (
            self.width() as f64 * self.resolution,
            self.height() as f64 * self.resolution,
        )
    }

    pub fn center(&self) -> Utm {
        let (w, e, s, n) = self.bounds();
        Utm::new((w + e) / 2.0, (s + n) / 2.0)
    }

    /// Path of the `.geo` sidecar that accompanies an image path.
    pub fn sidecar_path(image: &Path) -> PathBuf {
        image.with_extension("geo")
    }

    /// Loads a PPM/PGM raster and its `<name>.geo` sidecar.
    pub fn load(image: impl AsRef<Path>) -> Result<Self> {
        let image = image.as_ref();
        let pixels = RgbImage::read_pnm(image)?;
        let geo = Self::sidecar_path(image);
        let text = fs::read_to_string(&geo).map_err(|e| Error::io(&geo, e))?;
        let (mut e, mut n, mut res) = (None, None, None);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format(&geo, format!("line {}: expected key=value", lineno + 1)))?;
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::format(&geo, format!("line {}: {:?} is not a number", lineno + 1, value.trim()))
            })?;
            match key.trim() {
                "origin_e" => e = Some(value),
                "origin_n" => n = Some(value),
                "res" => res = Some(value),
                other => return Err(Error::format(&geo, format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::format(&geo, format!("missing key {k}"));
        let origin = Utm::new(e.ok_or_else(|| missing("origin_e"))?, n.ok_or_else(|| missing("origin_n"))?);
        Self::new(pixels, origin, res.ok_or_else(|| missing("res"))?)
    }

    /// Writes the raster as PPM plus its `.geo` sidecar.
    pub fn save(&self, image: impl AsRef<Path>) -> Result<()> {
        let image = image.as_ref();
        self.pixels.write_ppm(image)?;
        let mut text = String::new();
        writeln!(text, "origin_e={}", self.origin.easting).unwrap();
        writeln!(text, "origin_n={}", self.origin.northing).unwrap();
        writeln!(text, "res={}", self.resolution).unwrap();
        let geo = Self::sidecar_path(image);
        fs::write(&geo, text).map_err(|e| Error::io(&geo, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster() -> GeoRaster {
        let px = RgbImage::from_fn(8, 6, |x, y| [x as u8, y as u8, 0]);
        GeoRaster::new(px, Utm::new(500_000.0, 4_400_000.0), 2.0).unwrap()
    }

    #[test]
    fn utm_mapping_is_monotone_and_invertible() {
        let r = raster();
        let a = r.utm_of(0.0, 0.0);
        let b = r.utm_of(1.0, 1.0);
        assert!(b.easting > a.easting);
        assert!(b.northing < a.northing);
        let (x, y) = r.pixel_of(r.utm_of(3.25, 4.5));
        assert!((x - 3.25).abs() < 1e-9 && (y - 4.5).abs() < 1e-9);
        let (w, e, s, n) = r.bounds();
        assert_eq!((w, e), (499_999.0, 500_015.0));
        assert_eq!((s, n), (4_399_989.0, 4_400_001.0));
    }

    #[test]
    fn rejects_bad_resolution() {
        let px = RgbImage::new(2, 2);
        assert!(GeoRaster::new(px.clone(), Utm::default(), 0.0).is_err());
        assert!(GeoRaster::new(px, Utm::default(), -1.0).is_err());
    }

    #[test]
    fn save_and_load() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("map.ppm");
        let r = raster();
        r.save(&path).unwrap();
        assert_eq!(GeoRaster::load(&path).unwrap(), r);

        fs::write(tmp.path().join("map.geo"), "origin_e=1\nres=2\n").unwrap();
        let err = GeoRaster::load(&path).unwrap_err();
        assert!(err.to_string().contains("origin_n"), "{err}");
    }
}
