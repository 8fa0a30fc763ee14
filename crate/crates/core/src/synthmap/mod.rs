//! Geo-referenced raster world model, nadir pinhole geometry, view rendering,
//! sensor degradation and synthetic dataset sampling.

mod dataset;
mod degrade;
mod raster;
mod render;
pub mod terrain;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{altitude_lattice, sample_dataset, DatasetManifest, DatasetRecord};
pub use degrade::{add_gaussian_noise, degrade, quantization_table, DegradationConfig};
pub use raster::GeoRaster;
pub use render::{footprint_fits, render_view};

/// A UTM position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Utm {
    pub easting: f64,
    pub northing: f64,
}

impl Utm {
    pub const fn new(easting: f64, northing: f64) -> Self {
        Self { easting, northing }
    }

    pub fn distance(&self, other: &Utm) -> f64 {
        (self.easting - other.easting).hypot(self.northing - other.northing)
    }
}

/// Pinhole intrinsics of a nadir camera, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub res_w: f64,
    pub res_h: f64,
    pub f_x: f64,
    pub f_y: f64,
}

impl CameraIntrinsics {
    pub fn new(res_w: f64, res_h: f64, f_x: f64, f_y: f64) -> Result<Self> {
        let all = [res_w, res_h, f_x, f_y];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!(
                "camera intrinsics must be strictly positive, got res {res_w}x{res_h}, f ({f_x}, {f_y})"
            )));
        }
        Ok(Self { res_w, res_h, f_x, f_y })
    }

    /// The nominal synthetic camera: 2048×1536 sensor, f = 1200 px.
    pub fn nominal() -> Self {
        Self {
            res_w: 2048.0,
            res_h: 1536.0,
            f_x: 1200.0,
            f_y: 1200.0,
        }
    }
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Ground rectangle imaged by a nadir camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundFootprint {
    pub width_m: f64,
    pub height_m: f64,
}

/// Ground footprint at `altitude`: `res / f · H` per axis.
pub fn footprint(intrinsics: &CameraIntrinsics, altitude: f64) -> Result<GroundFootprint> {
    if !(altitude >= 0.0) || !altitude.is_finite() {
        return Err(Error::Domain(format!(
            "altitude must be a finite non-negative number, got {altitude}"
        )));
    }
    Ok(GroundFootprint {
        width_m: intrinsics.res_w / intrinsics.f_x * altitude,
        height_m: intrinsics.res_h / intrinsics.f_y * altitude,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn footprint_of_nominal_camera() {
        let cam = CameraIntrinsics::nominal();
        let fp = footprint(&cam, 125.0).unwrap();
        assert!((fp.width_m - 213.333_333_333).abs() < 1e-6);
        assert!((fp.height_m - 160.0).abs() < 1e-9);

        let zero = footprint(&cam, 0.0).unwrap();
        assert_eq!((zero.width_m, zero.height_m), (0.0, 0.0));

        let double = footprint(&cam, 250.0).unwrap();
        assert_eq!(double.width_m, 2.0 * fp.width_m);
        assert_eq!(double.height_m, 2.0 * fp.height_m);
    }

    #[test]
    fn footprint_rejects_negative_altitude() {
        let err = footprint(&CameraIntrinsics::nominal(), -1.0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        assert!(footprint(&CameraIntrinsics::nominal(), f64::NAN).is_err());
    }

    #[test]
    fn intrinsics_must_be_positive() {
        assert!(CameraIntrinsics::new(2048.0, 1536.0, 0.0, 1200.0).is_err());
        assert!(CameraIntrinsics::new(2048.0, 1536.0, 1200.0, 1200.0).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn footprint_is_linear_in_altitude(h in 0.0f64..2000.0, k in 0.0f64..10.0,
                                           fx in 100.0f64..5000.0, fy in 100.0f64..5000.0) {
            let cam = CameraIntrinsics::new(2048.0, 1536.0, fx, fy).unwrap();
            let a = footprint(&cam, h).unwrap();
            let b = footprint(&cam, k * h).unwrap();
            proptest::prop_assert!((b.width_m - k * a.width_m).abs() <= 1e-9 * (1.0 + b.width_m));
            proptest::prop_assert!((b.height_m - k * a.height_m).abs() <= 1e-9 * (1.0 + b.height_m));
            if h > 0.0 {
                let ratio = a.width_m / a.height_m;
                let expect = (cam.res_w * cam.f_y) / (cam.res_h * cam.f_x);
                proptest::prop_assert!((ratio - expect).abs() < 1e-9 * expect);
            }
        }
    }
}
