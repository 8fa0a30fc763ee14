use crate::error::{Error, Result};
use crate::image::{to_rgb8, RgbImage};

/// Scale-normalizes a view taken at `h_hat` to the canonical altitude `h_db`:
/// enlarge by `h_hat / h_db`, center-crop back to the original pixel size,
/// then resize to `out_size`.
///
/// The enlarge-and-crop step is sampled in one pass (bilinear in the source),
/// which equals resizing the whole image and cropping its center.
pub fn crop_normalize(image: &RgbImage, h_hat: f64, h_db: f64, out_size: (usize, usize)) -> Result<RgbImage> {
    if !(h_db > 0.0 && h_db.is_finite()) {
        return Err(Error::Config(format!("canonical altitude must be > 0, got {h_db}")));
    }
    if !(h_hat >= h_db) {
        return Err(Error::Contract(format!(
            "estimated altitude {h_hat} m is below the canonical altitude {h_db} m; the crop would need pixels outside the image"
        )));
    }
    if out_size.0 == 0 || out_size.1 == 0 {
        return Err(Error::Config("output size must be non-empty".into()));
    }
    let (w, h) = image.dims();
    let k = h_hat / h_db;
    let primitive = if k == 1.0 {
        image.clone()
    } else {
        // Output pixel i of the crop sits at enlarged coordinate i + (k·w − w)/2.
        let map = |i: usize, n: usize| ((i as f64 + 0.5) - n as f64 / 2.0) / k + n as f64 / 2.0 - 0.5;
        let xs: Vec<f64> = (0..w).map(|i| map(i, w)).collect();
        RgbImage::from_fn(w, h, |i, j| to_rgb8(image.sample(xs[i], map(j, h))))
    };
    Ok(primitive.resize(out_size.0, out_size.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthmap::{render_view, terrain, CameraIntrinsics};

    fn mean_abs_diff(a: &RgbImage, b: &RgbImage) -> f64 {
        let n = a.as_raw().len() as f64;
        a.as_raw().iter().zip(b.as_raw()).map(|(x, y)| (*x as f64 - *y as f64).abs()).sum::<f64>() / n
    }

    #[test]
    fn unit_ratio_is_a_plain_resize() {
        let img = RgbImage::from_fn(40, 30, |x, y| [(x * 5) as u8, (y * 7) as u8, 9]);
        assert_eq!(crop_normalize(&img, 125.0, 125.0, (20, 20)).unwrap(), img.resize(20, 20));
    }

    #[test]
    fn below_canonical_is_a_contract_error() {
        let img = RgbImage::new(8, 8);
        assert!(matches!(crop_normalize(&img, 124.0, 125.0, (4, 4)), Err(Error::Contract(_))));
    }

    #[test]
    fn enlarge_and_crop_equals_two_step_oracle() {
        // Integer factor 2: the enlarged image is computable exactly with `sample`.
        let img = RgbImage::from_fn(16, 12, |x, y| [(x * 13) as u8, (y * 17) as u8, ((x * y) % 256) as u8]);
        let got = crop_normalize(&img, 250.0, 125.0, (16, 12)).unwrap();
        let big = RgbImage::from_fn(32, 24, |i, j| to_rgb8(img.sample((i as f64 + 0.5) / 2.0 - 0.5, (j as f64 + 0.5) / 2.0 - 0.5)));
        assert_eq!(got, big.crop(8, 6, 16, 12));
    }

    #[test]
    fn matches_a_direct_canonical_render() {
        let raster = terrain::generate(&terrain::TerrainConfig {
            width_px: 900,
            height_px: 900,
            ..Default::default()
        });
        let cam = CameraIntrinsics::nominal();
        let c = raster.center();
        let reference = render_view(&raster, c, 125.0, &cam, 1024, 768).unwrap().resize(224, 224);
        for h in [250.0, 400.0] {
            let view = render_view(&raster, c, h, &cam, 1024, 768).unwrap();
            let q = crop_normalize(&view, h, 125.0, (224, 224)).unwrap();
            let d = mean_abs_diff(&q, &reference);
            assert!(d <= 3.0, "H={h}: mean |Δ| = {d}");
        }
    }
}
