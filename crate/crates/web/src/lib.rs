//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Images cross the boundary as RGBA byte buffers ready for `ImageData`.

use wasm_bindgen::prelude::*;

use altiloc::altbins::AltitudeBinning;
use altiloc::pipeline::crop_normalize;
use altiloc::spectra::spat2freq;
use altiloc::synthmap::terrain::{generate, TerrainConfig};
use altiloc::synthmap::{render_view, CameraIntrinsics, GeoRaster, Utm};
use altiloc::RgbImage;

const CANONICAL_M: f64 = 125.0;

fn js_err(e: altiloc::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn rgba(image: &RgbImage) -> Vec<u8> {
    image
        .as_raw()
        .chunks_exact(3)
        .flat_map(|p| [p[0], p[1], p[2], 255])
        .collect()
}

/// A small synthetic map plus the nominal camera and altitude classes.
#[wasm_bindgen]
pub struct Demo {
    raster: GeoRaster,
    camera: CameraIntrinsics,
    binning: AltitudeBinning,
    view: Option<RgbImage>,
}

#[wasm_bindgen]
impl Demo {
    /// Builds a `size × size` map at 1 m per pixel.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, size: usize) -> Result<Demo, JsError> {
        let raster = generate(&TerrainConfig {
            width_px: size,
            height_px: size,
            seed: seed as u64,
            ..TerrainConfig::default()
        });
        Ok(Demo {
            raster,
            camera: CameraIntrinsics::nominal(),
            binning: AltitudeBinning::fixed(100.0, 700.0, 50.0).map_err(js_err)?,
            view: None,
        })
    }

    /// Largest altitude whose footprint still fits the map.
    pub fn max_altitude(&self) -> f64 {
        let (w, h) = self.raster.extent_m();
        (w * self.camera.f_x / self.camera.res_w).min(h * self.camera.f_y / self.camera.res_h)
    }

    /// Renders the nadir view at `altitude` above the map point at fractions
    /// `(fx, fy)` of the extent, clamped so the footprint fits; returns RGBA.
    pub fn render(&mut self, fx: f64, fy: f64, altitude: f64, width: usize, height: usize) -> Result<Vec<u8>, JsError> {
        let fp = altiloc::synthmap::footprint(&self.camera, altitude).map_err(js_err)?;
        let (west, east, south, north) = self.raster.bounds();
        let clamp = |v: f64, lo: f64, hi: f64| if lo > hi { (lo + hi) / 2.0 } else { v.clamp(lo, hi) };
        let e = clamp(west + fx * (east - west), west + fp.width_m / 2.0, east - fp.width_m / 2.0);
        let n = clamp(north - fy * (north - south), south + fp.height_m / 2.0, north - fp.height_m / 2.0);
        let view = render_view(&self.raster, Utm::new(e, n), altitude, &self.camera, width, height).map_err(js_err)?;
        let out = rgba(&view);
        self.view = Some(view);
        Ok(out)
    }

    /// Centered log-magnitude spectrum of the last view, one color channel
    /// per image channel, scaled so the brightest bin is 255.
    pub fn spectrum(&self) -> Result<Vec<u8>, JsError> {
        let view = self.view.as_ref().ok_or_else(|| JsError::new("render a view first"))?;
        let freq = spat2freq(view, 1.5).map_err(js_err)?;
        let peak = freq.channels.iter().flatten().cloned().fold(0.0, f64::max).max(1e-12);
        let level = |v: f64| (255.0 * v / peak).round().clamp(0.0, 255.0) as u8;
        let [r, g, b] = &freq.channels;
        Ok((0..r.len()).flat_map(|i| [level(r[i]), level(g[i]), level(b[i]), 255]).collect())
    }

    /// Crops and enlarges the last view from `assumed_altitude` to the
    /// canonical 125 m scale, at the view's own size; returns RGBA.
    pub fn normalize(&self, assumed_altitude: f64) -> Result<Vec<u8>, JsError> {
        let view = self.view.as_ref().ok_or_else(|| JsError::new("render a view first"))?;
        let out = crop_normalize(view, assumed_altitude.max(CANONICAL_M), CANONICAL_M, view.dims()).map_err(js_err)?;
        Ok(rgba(&out))
    }

    /// Altitude class (0-based) and its center for `altitude`.
    pub fn altitude_class(&self, altitude: f64) -> Result<Vec<f64>, JsError> {
        let bin = self.binning.bin_of(altitude).map_err(js_err)?;
        Ok(vec![bin as f64, self.binning.center(bin).map_err(js_err)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_operations_produce_rgba_buffers() {
        let mut demo = Demo::new(3, 600).unwrap();
        assert!(demo.max_altitude() > 300.0);
        let view = demo.render(0.5, 0.5, 300.0, 64, 48).unwrap();
        assert_eq!(view.len(), 64 * 48 * 4);
        assert_eq!(demo.spectrum().unwrap().len(), view.len());
        assert_eq!(demo.normalize(300.0).unwrap().len(), view.len());
        // At the canonical altitude normalization is the identity.
        demo.render(0.2, 0.7, CANONICAL_M, 64, 48).unwrap();
        assert_eq!(demo.normalize(CANONICAL_M).unwrap(), rgba(demo.view.as_ref().unwrap()));
        assert_eq!(demo.altitude_class(330.0).unwrap(), vec![4.0, 325.0]);
    }
}
