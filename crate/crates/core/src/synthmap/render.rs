use super::{footprint, CameraIntrinsics, GeoRaster, GroundFootprint, Utm};
use crate::error::{Edge, Error, Result};
use crate::image::RgbImage;

const EDGE_TOLERANCE_M: f64 = 1e-9;

/// Checks that a footprint centered at `center` lies inside the raster and
/// names the first violated edge otherwise.
pub fn footprint_fits(raster: &GeoRaster, center: Utm, fp: &GroundFootprint) -> Result<()> {
    let (west, east, south, north) = raster.bounds();
    let tol = EDGE_TOLERANCE_M * (1.0 + west.abs().max(north.abs()));
    let checks = [
        (Edge::West, west - (center.easting - fp.width_m / 2.0)),
        (Edge::East, (center.easting + fp.width_m / 2.0) - east),
        (Edge::North, (center.northing + fp.height_m / 2.0) - north),
        (Edge::South, south - (center.northing - fp.height_m / 2.0)),
    ];
    for (edge, overshoot) in checks {
        if overshoot > tol || overshoot.is_nan() {
            return Err(Error::OutOfBounds {
                edge,
                overshoot_m: overshoot,
            });
        }
    }
    Ok(())
}

/// Renders the nadir view seen from `altitude` above `center`, resampled to
/// `out_w × out_h` with bilinear interpolation.
pub fn render_view(
    raster: &GeoRaster,
    center: Utm,
    altitude: f64,
    intrinsics: &CameraIntrinsics,
    out_w: usize,
    out_h: usize,
) -> Result<RgbImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Config(format!("output size must be non-empty, got {out_w}x{out_h}")));
    }
    let fp = footprint(intrinsics, altitude)?;
    footprint_fits(raster, center, &fp)?;
    let (cx, cy) = raster.pixel_of(center);
    let res = raster.resolution();
    let step_x = fp.width_m / out_w as f64 / res;
    let step_y = fp.height_m / out_h as f64 / res;
    let xs: Vec<f64> = (0..out_w)
        .map(|i| cx + (i as f64 + 0.5 - out_w as f64 / 2.0) * step_x)
        .collect();
    let ys: Vec<f64> = (0..out_h)
        .map(|j| cy + (j as f64 + 0.5 - out_h as f64 / 2.0) * step_y)
        .collect();
    Ok(raster.pixels().sample_grid(&xs, &ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthmap::terrain::{generate, TerrainConfig};

    fn smooth_raster() -> GeoRaster {
        let px = RgbImage::from_fn(400, 300, |x, y| {
            let v = 128.0 + 60.0 * ((x as f64) / 23.0).sin() * ((y as f64) / 31.0).cos();
            [v as u8, (255 - v as u8), ((x + y) / 3 % 256) as u8]
        });
        GeoRaster::new(px, Utm::new(1000.0, 2000.0), 1.0).unwrap()
    }

    // A camera whose footprint is `k` meters per meter of altitude on both axes.
    fn square_camera(k: f64) -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 100.0 / k, 100.0 / k).unwrap()
    }

    #[test]
    fn full_extent_view_is_a_resample_of_the_raster() {
        let r = smooth_raster();
        // 400 m × 300 m footprint at H = 100 with res/f = 4 and 3.
        let cam = CameraIntrinsics::new(400.0, 300.0, 100.0, 100.0).unwrap();
        let view = render_view(&r, r.center(), 100.0, &cam, 400, 300).unwrap();
        assert_eq!(&view, r.pixels());
        let small = render_view(&r, r.center(), 100.0, &cam, 200, 150).unwrap();
        assert_eq!(small, r.pixels().resize(200, 150));
    }

    #[test]
    fn rendering_is_deterministic() {
        let r = smooth_raster();
        let cam = square_camera(1.0);
        let c = Utm::new(1150.0, 1880.0);
        let a = render_view(&r, c, 80.0, &cam, 64, 64).unwrap();
        let b = render_view(&r, c, 80.0, &cam, 64, 64).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_bounds_names_the_edge() {
        let r = smooth_raster();
        let cam = square_camera(1.0);
        let err = render_view(&r, Utm::new(1010.0, 1850.0), 50.0, &cam, 8, 8).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { edge: Edge::West, .. }), "{err}");
        let err = render_view(&r, Utm::new(1390.0, 1850.0), 50.0, &cam, 8, 8).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { edge: Edge::East, .. }), "{err}");
        let err = render_view(&r, Utm::new(1200.0, 1995.0), 50.0, &cam, 8, 8).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { edge: Edge::North, .. }), "{err}");
        let err = render_view(&r, Utm::new(1200.0, 1705.0), 50.0, &cam, 8, 8).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { edge: Edge::South, .. }), "{err}");
    }

    #[test]
    fn half_altitude_view_is_the_central_crop_of_the_double_altitude_view() {
        let raster = generate(&TerrainConfig {
            width_px: 600,
            height_px: 600,
            seed: 11,
            ..TerrainConfig::default()
        });
        let cam = CameraIntrinsics::nominal();
        let center = raster.center();
        let (w, h) = (448, 336);
        let low = render_view(&raster, center, 100.0, &cam, w, h).unwrap();

        // Matched sampling: twice the pixels at twice the altitude puts the
        // central w×h block on exactly the same ground points.
        let high = render_view(&raster, center, 200.0, &cam, 2 * w, 2 * h).unwrap();
        assert_eq!(high.crop(w / 2, h / 2, w, h), low);

        // Resampled: the central half of a w×h high view, upsampled ×2.
        let high = render_view(&raster, center, 200.0, &cam, w, h).unwrap();
        let up = high.crop(w / 4, h / 4, w / 2, h / 2).resize(w, h);
        let mad = mean_abs_diff(&up, &low);
        assert!(mad <= 2.0, "mean |Δ| = {mad}");
    }

    #[test]
    fn view_center_is_geo_consistent() {
        // Red and green encode the raster column and row.
        let px = RgbImage::from_fn(256, 256, |x, y| [x as u8, y as u8, 0]);
        let r = GeoRaster::new(px, Utm::new(0.0, 0.0), 1.0).unwrap();
        let cam = square_camera(1.0);
        for (w, h, cx, cy) in [(41, 41, 100.0, 120.0), (40, 30, 77.0, 150.0), (33, 64, 128.3, 90.8)] {
            let center = r.utm_of(cx, cy);
            let view = render_view(&r, center, 60.0, &cam, w, h).unwrap();
            let [sx, sy, _] = view.get(w / 2, h / 2);
            let half_px = 60.0 / w.min(h) as f64 / 2.0;
            // Allow half an output pixel plus the 8-bit rounding of the probe.
            assert!((sx as f64 - cx).abs() <= half_px + 0.5, "{sx} vs {cx}");
            assert!((sy as f64 - cy).abs() <= half_px + 0.5, "{sy} vs {cy}");
        }
    }

    fn mean_abs_diff(a: &RgbImage, b: &RgbImage) -> f64 {
        let n = a.as_raw().len() as f64;
        a.as_raw()
            .iter()
            .zip(b.as_raw())
            .map(|(&x, &y)| (x as f64 - y as f64).abs())
            .sum::<f64>()
            / n
    }
}
