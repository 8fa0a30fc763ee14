use altiloc::spectra::{Describer, DescriptorConfig};
use altiloc::synthmap::terrain::{generate, TerrainConfig};
use altiloc::synthmap::{degrade, render_view, CameraIntrinsics, DegradationConfig, GeoRaster, Utm};
use altiloc::RgbImage;

fn raster() -> GeoRaster {
    generate(&TerrainConfig {
        width_px: 1024,
        height_px: 1024,
        seed: 3,
        ..TerrainConfig::default()
    })
}

fn tiles(raster: &GeoRaster) -> Vec<RgbImage> {
    let cam = CameraIntrinsics::nominal();
    let o = raster.origin();
    [(200.0, -200.0), (800.0, -200.0), (200.0, -800.0), (800.0, -800.0), (500.0, -500.0)]
        .iter()
        .map(|&(de, dn)| render_view(raster, Utm::new(o.easting + de, o.northing + dn), 125.0, &cam, 224, 224).unwrap())
        .collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// The altitude layout averages over orientation on purpose, so only the
// place layout has to tell locations apart.
#[test]
fn distinct_tiles_are_not_collapsed() {
    let raster = raster();
    let d = Describer::new(DescriptorConfig::place(), 224, 224).unwrap();
    let descs: Vec<_> = tiles(&raster).iter().map(|t| d.describe(t).unwrap()).collect();
    for i in 0..descs.len() {
        for j in i + 1..descs.len() {
            let c = cosine(&descs[i].values, &descs[j].values);
            assert!(c < 0.99, "tiles {i} and {j} have cosine {c}");
        }
    }
}

#[test]
fn sensor_noise_moves_descriptors_a_bounded_amount() {
    let raster = raster();
    let d = Describer::new(DescriptorConfig::place(), 224, 224).unwrap();
    for (k, tile) in tiles(&raster).iter().enumerate() {
        let noisy = degrade(
            tile,
            &DegradationConfig {
                gaussian_sigma: 2.0,
                dct_quality: 100,
                seed: k as u64,
            },
        )
        .unwrap();
        let (a, b) = (d.describe(tile).unwrap(), d.describe(&noisy).unwrap());
        let moved = a.distance(&b.values);
        assert!(moved <= 0.5, "tile {k} moved {moved}");
    }
}

#[test]
fn altitude_descriptor_responds_to_scale() {
    let raster = raster();
    let cam = CameraIntrinsics::nominal();
    let c = raster.center();
    let d = Describer::new(DescriptorConfig::altitude(), 448, 336).unwrap();
    let low = d.describe(&render_view(&raster, c, 150.0, &cam, 448, 336).unwrap()).unwrap();
    let low2 = d.describe(&render_view(&raster, c, 160.0, &cam, 448, 336).unwrap()).unwrap();
    let high = d.describe(&render_view(&raster, c, 500.0, &cam, 448, 336).unwrap()).unwrap();
    assert!(low.distance(&low2.values) < low.distance(&high.values));
}
