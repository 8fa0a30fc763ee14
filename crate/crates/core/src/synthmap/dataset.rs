use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    degrade, footprint, footprint_fits, render_view, CameraIntrinsics, DegradationConfig, GeoRaster,
    Utm,
};
use crate::error::{Error, Result};
use crate::image::RgbImage;

const MAX_ATTEMPTS: usize = 1000;
pub(crate) const MANIFEST_HEADER: &str = "id,easting,northing,altitude_m,path";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub id: u32,
    pub center: Utm,
    pub altitude_m: f64,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<DatasetRecord>,
    pub intrinsics: CameraIntrinsics,
    pub altitude_range: (f64, f64),
    pub sample_interval: f64,
}

/// Altitudes `h_min + k·δH` that fall inside `[h_min, h_max)`.
pub fn altitude_lattice(h_min: f64, h_max: f64, delta_h: f64) -> Result<Vec<f64>> {
    if !(h_min.is_finite() && h_max.is_finite() && h_min >= 0.0 && h_max > h_min) {
        return Err(Error::Config(format!("invalid altitude range [{h_min}, {h_max})")));
    }
    if !(delta_h > 0.0 && delta_h.is_finite()) {
        return Err(Error::Config(format!("sample interval must be > 0, got {delta_h}")));
    }
    Ok((0..)
        .map(|k| h_min + k as f64 * delta_h)
        .take_while(|&h| h < h_max)
        .collect())
}

/// Independent RNG stream for record `index`, so records can be generated in
/// any order.
pub(crate) fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Samples `count` (center, altitude) pairs whose footprints lie inside the
/// raster. Altitudes come from the `δH` lattice; centers are drawn uniformly
/// over the raster and rejected until the footprint fits.
pub fn sample_dataset(
    raster: &GeoRaster,
    intrinsics: &CameraIntrinsics,
    altitude_range: (f64, f64),
    delta_h: f64,
    count: usize,
    seed: u64,
) -> Result<DatasetManifest> {
    if count == 0 {
        return Err(Error::Config("dataset count must be >= 1".into()));
    }
    let lattice = altitude_lattice(altitude_range.0, altitude_range.1, delta_h)?;
    let highest = *lattice.last().expect("non-empty lattice");
    let fp = footprint(intrinsics, highest)?;
    let (ext_w, ext_h) = raster.extent_m();
    if fp.width_m > ext_w || fp.height_m > ext_h {
        return Err(Error::Unsatisfiable(format!(
            "a {:.1} m × {:.1} m footprint at {highest} m does not fit a {ext_w:.1} m × {ext_h:.1} m raster",
            fp.width_m, fp.height_m
        )));
    }
    let (west, east, south, north) = raster.bounds();
    let mut records = Vec::with_capacity(count);
    for index in 0..count {
        let mut rng = record_rng(seed, index as u64);
        let altitude = lattice[rng.random_range(0..lattice.len())];
        let fp = footprint(intrinsics, altitude)?;
        let mut center = None;
        for _ in 0..MAX_ATTEMPTS {
            let c = Utm::new(rng.random_range(west..east), rng.random_range(south..north));
            if footprint_fits(raster, c, &fp).is_ok() {
                center = Some(c);
                break;
            }
        }
        let center = center.ok_or_else(|| {
            Error::Unsatisfiable(format!(
                "record {index}: no valid center at {altitude} m after {MAX_ATTEMPTS} attempts"
            ))
        })?;
        records.push(DatasetRecord {
            id: index as u32,
            center,
            altitude_m: altitude,
            path: format!("images/{index:05}.ppm"),
        });
    }
    Ok(DatasetManifest {
        records,
        intrinsics: *intrinsics,
        altitude_range,
        sample_interval: delta_h,
    })
}

impl DatasetManifest {
    /// Renders (and optionally degrades) one record's view. The degradation
    /// seed is mixed with the record id so every view gets its own noise.
    pub fn render(
        &self,
        raster: &GeoRaster,
        record: &DatasetRecord,
        out_size: (usize, usize),
        degradation: Option<&DegradationConfig>,
    ) -> Result<RgbImage> {
        let view = render_view(
            raster,
            record.center,
            record.altitude_m,
            &self.intrinsics,
            out_size.0,
            out_size.1,
        )?;
        match degradation {
            Some(cfg) => {
                let cfg = DegradationConfig {
                    seed: mix_seed(cfg.seed, record.id as u64),
                    ..*cfg
                };
                degrade(&view, &cfg)
            }
            None => Ok(view),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.id, r.center.easting, r.center.northing, r.altitude_m, r.path
            )
            .unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Parses a manifest CSV; the camera and altitude metadata are supplied by
    /// the caller since the file only lists records.
    pub fn read_csv(
        path: impl AsRef<Path>,
        intrinsics: CameraIntrinsics,
        altitude_range: (f64, f64),
        sample_interval: f64,
    ) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MANIFEST_HEADER) {
            return Err(Error::format(path, format!("expected header {MANIFEST_HEADER:?}")));
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| Error::format(path, format!("row {}: {what}", i + 1));
            let fields: Vec<&str> = line.splitn(5, ',').collect();
            if fields.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}")));
            records.push(DatasetRecord {
                id: fields[0].trim().parse().map_err(|_| bad("bad id"))?,
                center: Utm::new(num(fields[1])?, num(fields[2])?),
                altitude_m: num(fields[3])?,
                path: fields[4].trim().to_string(),
            });
        }
        Ok(Self {
            records,
            intrinsics,
            altitude_range,
            sample_interval,
        })
    }
}

fn mix_seed(seed: u64, id: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ id.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster(side: usize) -> GeoRaster {
        let px = RgbImage::from_fn(side, side, |x, y| [(x % 256) as u8, (y % 256) as u8, 7]);
        GeoRaster::new(px, Utm::new(300_000.0, 4_000_000.0), 1.0).unwrap()
    }

    #[test]
    fn lattice_is_half_open() {
        let l = altitude_lattice(100.0, 700.0, 5.0).unwrap();
        assert_eq!(l.len(), 120);
        assert_eq!(l[0], 100.0);
        assert_eq!(*l.last().unwrap(), 695.0);
        assert_eq!(altitude_lattice(125.0, 130.0, 5.0).unwrap(), vec![125.0]);
        assert!(altitude_lattice(100.0, 100.0, 5.0).is_err());
    }

    #[test]
    fn samples_stay_on_lattice_and_inside_raster() {
        let r = raster(1400);
        let cam = CameraIntrinsics::nominal();
        let m = sample_dataset(&r, &cam, (100.0, 700.0), 5.0, 500, 7).unwrap();
        assert_eq!(m.records.len(), 500);
        for rec in &m.records {
            let k = (rec.altitude_m - 100.0) / 5.0;
            assert!(rec.altitude_m >= 100.0 && rec.altitude_m < 700.0);
            assert_eq!(k, k.round(), "{} off lattice", rec.altitude_m);
            let fp = footprint(&cam, rec.altitude_m).unwrap();
            footprint_fits(&r, rec.center, &fp).unwrap();
        }
    }

    #[test]
    fn degenerate_range_gives_single_altitude() {
        let r = raster(400);
        let m = sample_dataset(&r, &CameraIntrinsics::nominal(), (125.0, 130.0), 5.0, 1, 1).unwrap();
        assert_eq!(m.records[0].altitude_m, 125.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let r = raster(900);
        let cam = CameraIntrinsics::nominal();
        let a = sample_dataset(&r, &cam, (100.0, 400.0), 5.0, 40, 3).unwrap();
        let b = sample_dataset(&r, &cam, (100.0, 400.0), 5.0, 40, 3).unwrap();
        assert_eq!(a, b);
        let c = sample_dataset(&r, &cam, (100.0, 400.0), 5.0, 40, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_small_raster_is_unsatisfiable() {
        let r = raster(300);
        let err = sample_dataset(&r, &CameraIntrinsics::nominal(), (100.0, 700.0), 5.0, 1, 0).unwrap_err();
        assert!(matches!(err, Error::Unsatisfiable(_)), "{err}");
    }

    #[test]
    fn csv_roundtrip() {
        let r = raster(600);
        let cam = CameraIntrinsics::nominal();
        let m = sample_dataset(&r, &cam, (100.0, 300.0), 5.0, 5, 9).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("manifest.csv");
        m.write_csv(&p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("id,easting,northing,altitude_m,path\n"));
        let back = DatasetManifest::read_csv(&p, cam, (100.0, 300.0), 5.0).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn per_record_degradation_differs() {
        let r = raster(600);
        let cam = CameraIntrinsics::nominal();
        let m = sample_dataset(&r, &cam, (100.0, 105.0), 5.0, 2, 9).unwrap();
        let cfg = DegradationConfig::default();
        let a = m.render(&r, &m.records[0], (64, 48), Some(&cfg)).unwrap();
        let a2 = m.render(&r, &m.records[0], (64, 48), Some(&cfg)).unwrap();
        assert_eq!(a, a2);
        let clean = m.render(&r, &m.records[0], (64, 48), None).unwrap();
        assert_ne!(a, clean);
    }
}
