//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Keys are unique; unknown keys and
//! unparsable values are configuration errors. Lists are comma separated.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::altbins::AltitudeBinning;
use crate::error::{Error, Result};
use crate::geoindex::GridSpec;
use crate::marginlearn::{MarginMode, MarginParams, TrainSchedule};
use crate::pipeline::PipelineConfig;
use crate::spectra::DescriptorConfig;
use crate::synthmap::terrain::TerrainConfig;
use crate::synthmap::{CameraIntrinsics, DegradationConfig, Utm};

/// Comma-separated list value.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T> {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<T>().map_err(|_| format!("bad list item {t:?}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(List)
    }
}

impl<T: std::fmt::Display> std::fmt::Display for List<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let items: Vec<String> = self.0.iter().map(T::to_string).collect();
        f.write_str(&items.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinChoice {
    Fixed,
    Variable,
}

impl FromStr for BinChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "variable" => Ok(Self::Variable),
            _ => Err(format!("expected fixed or variable, got {s:?}")),
        }
    }
}

impl std::fmt::Display for BinChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fixed => "fixed",
            Self::Variable => "variable",
        })
    }
}

impl FromStr for MarginMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "adaptive" => Ok(Self::Adaptive),
            "fixed" => Ok(Self::Fixed),
            "none" => Ok(Self::None),
            _ => Err(format!("expected adaptive, fixed or none, got {s:?}")),
        }
    }
}

impl std::fmt::Display for MarginMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Adaptive => "adaptive",
            Self::Fixed => "fixed",
            Self::None => "none",
        })
    }
}

/// Help line for one configuration key.
#[derive(Debug, Clone, Copy)]
pub struct KeyDoc {
    pub key: &'static str,
    pub kind: &'static str,
    pub help: &'static str,
}

macro_rules! run_config {
    ($($key:ident: $ty:ty = $default:expr, $kind:literal, $help:literal;)*) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $(#[doc = $help] pub $key: $ty,)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $($key: $default,)* }
            }
        }

        impl RunConfig {
            pub const KEYS: &'static [KeyDoc] = &[
                $(KeyDoc { key: stringify!($key), kind: $kind, help: $help },)*
            ];

            /// Sets one key from its text form.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                let value = value.trim();
                match key {
                    $(stringify!($key) => {
                        self.$key = value
                            .parse::<$ty>()
                            .map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))?;
                    })*
                    _ => return Err(Error::Config(format!("unknown key {key:?}"))),
                }
                Ok(())
            }

            /// Every key in declaration order, one `key = value` line each.
            pub fn to_text(&self) -> String {
                let mut out = String::new();
                $(
                    out.push_str(stringify!($key));
                    out.push_str(" = ");
                    out.push_str(&display_value(&self.$key));
                    out.push('\n');
                )*
                out
            }
        }
    };
}

fn display_value<T: std::fmt::Debug + 'static>(v: &T) -> String {
    let any = v as &dyn std::any::Any;
    if let Some(p) = any.downcast_ref::<PathBuf>() {
        return p.display().to_string();
    }
    if let Some(l) = any.downcast_ref::<List<f64>>() {
        return l.to_string();
    }
    if let Some(l) = any.downcast_ref::<List<u32>>() {
        return l.to_string();
    }
    if let Some(l) = any.downcast_ref::<List<usize>>() {
        return l.to_string();
    }
    if let Some(b) = any.downcast_ref::<BinChoice>() {
        return b.to_string();
    }
    if let Some(m) = any.downcast_ref::<MarginMode>() {
        return m.to_string();
    }
    format!("{v:?}")
}

run_config! {
    seed: u64 = 0, "u64", "Master seed; ALTILOC_SEED overrides it.";
    raster: PathBuf = PathBuf::from("raster.ppm"), "path", "Geo-referenced raster (PPM/PGM plus .geo sidecar).";
    manifest: PathBuf = PathBuf::from("manifest.csv"), "path", "Dataset manifest CSV.";
    rae_model: PathBuf = PathBuf::from("rae.algm"), "path", "Altitude model file.";
    vpr_model: PathBuf = PathBuf::from("vpr.algm"), "path", "Place model file.";
    index: PathBuf = PathBuf::from("index.algx"), "path", "Reference index file (a .toc is written next to it).";
    out_dir: PathBuf = PathBuf::from("out"), "path", "Directory for reports and tables.";

    terrain_width_px: usize = 4096, "usize", "Generated raster width in pixels.";
    terrain_height_px: usize = 4096, "usize", "Generated raster height in pixels.";
    terrain_resolution_m: f64 = 1.0, "f64", "Generated raster meters per pixel.";
    terrain_origin_e: f64 = 432_000.0, "f64", "UTM easting of the top-left pixel center.";
    terrain_origin_n: f64 = 4_402_000.0, "f64", "UTM northing of the top-left pixel center.";
    parcel_spacing_m: f64 = 70.0, "f64", "Mean parcel spacing of the synthetic terrain.";
    stripe_period_m: f64 = 10.0, "f64", "Crop-row stripe period of the synthetic terrain.";

    camera_res_w: f64 = 2048.0, "f64", "Sensor width in pixels.";
    camera_res_h: f64 = 1536.0, "f64", "Sensor height in pixels.";
    camera_f: f64 = 1200.0, "f64", "Focal length in pixels (both axes).";
    view_w: usize = 1024, "usize", "Width views and tiles are rendered at.";
    view_h: usize = 768, "usize", "Height views and tiles are rendered at.";

    h_min: f64 = 100.0, "f64", "Lowest dataset altitude (m).";
    h_max: f64 = 700.0, "f64", "Dataset altitudes lie below this (m).";
    delta_h: f64 = 5.0, "f64", "Altitude lattice step (m).";
    count: usize = 500, "usize", "Number of dataset records to generate.";
    degrade: bool = false, "bool", "Apply sensor noise and block-DCT compression to views.";
    noise_sigma: f64 = 2.0, "f64", "Gaussian noise standard deviation (intensity levels).";
    jpeg_quality: u8 = 95, "u8", "Block-DCT quality factor 1..=100.";

    bin_kind: BinChoice = BinChoice::Fixed, "fixed|variable", "Altitude binning kind.";
    bin_width: f64 = 50.0, "f64", "Fixed bin width (m) over [h_min, h_max).";
    var_h0: f64 = 100.0, "f64", "Variable binning first edge (m).";
    var_delta0: f64 = 20.0, "f64", "Variable binning first width (m).";
    var_ratio: f64 = 1.1, "f64", "Variable binning growth ratio.";
    rae_input_w: usize = 448, "usize", "Altitude model input width.";
    rae_input_h: usize = 336, "usize", "Altitude model input height.";
    vpr_input: usize = 224, "usize", "Place model input edge (square).";

    margin: f64 = 0.2, "f64", "Angular margin m.";
    scale: f64 = 100.0, "f64", "Logit scale s.";
    margin_mode: MarginMode = MarginMode::Adaptive, "adaptive|fixed|none", "Margin variant used in training.";
    quality_alpha: f64 = 0.5, "f64", "Weight of the descriptor-norm signal in the quality mix.";
    batch_size: usize = 64, "usize", "Training batch size.";
    lr: f64 = 1e-2, "f64", "Initial Adam learning rate.";
    patience: usize = 10, "usize", "Stale epochs before the learning rate halves.";
    lr_floor: f64 = 1e-6, "f64", "Training stops once the learning rate falls below this.";
    max_epochs: usize = 500, "usize", "Hard epoch limit.";

    cell_size_m: f64 = 100.0, "f64", "Grid cell edge M (m).";
    group_modulus: u16 = 2, "u16", "Group modulus N.";
    rotations: List<f64> = List((0..12).map(|i| 30.0 * i as f64).collect()), "list<f64>", "Training-tile rotations in degrees.";
    tiles_per_axis: usize = 2, "usize", "Jittered extra training tiles per cell axis.";
    h_db: f64 = 125.0, "f64", "Canonical database altitude (m).";
    stride_m: f64 = 65.0, "f64", "Reference tile stride (m).";

    n_class: usize = 3, "usize", "Cells kept by classification.";
    n_retrieve: usize = 10, "usize", "Tiles retrieved per query.";
    epsilon: f64 = 1e-8, "f64", "Refinement weight stabilizer.";
    nu: f64 = 0.3, "f64", "One-class outlier fraction bound.";
    use_wce: bool = true, "bool", "Refine the fix by weighted averaging.";
    altitude_normalization: bool = true, "bool", "Rescale queries to the canonical altitude.";
    focal_ratio: f64 = 1.0, "f64", "f_actual / f_nominal applied to altitude estimates.";

    success_radius_m: f64 = 100.0, "f64", "Localization and recall success radius (m).";
    thresholds: List<u32> = List(vec![25, 50, 100]), "list<u32>", "Altitude error thresholds (m).";
    recall_n: List<usize> = List(vec![1, 5, 10]), "list<usize>", "Recall ranks.";
    bench_repetitions: usize = 3, "usize", "Passes over the queries when benchmarking.";
    bench_queries: usize = 20, "usize", "Queries timed when benchmarking.";
}

/// Splits `key = value` lines.
pub fn parse_pairs(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{}:{}: expected `key = value`", origin.display(), i + 1)))?;
        let k = k.trim().to_string();
        if !seen.insert(k.clone()) {
            return Err(Error::Config(format!("{}:{}: duplicate key {k:?}", origin.display(), i + 1)));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in parse_pairs(text, origin)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::new(self.camera_res_w, self.camera_res_h, self.camera_f, self.camera_f)
    }

    pub fn terrain(&self) -> TerrainConfig {
        TerrainConfig {
            width_px: self.terrain_width_px,
            height_px: self.terrain_height_px,
            resolution: self.terrain_resolution_m,
            origin: Utm::new(self.terrain_origin_e, self.terrain_origin_n),
            seed: self.seed,
            parcel_spacing_m: self.parcel_spacing_m,
            stripe_period_m: self.stripe_period_m,
        }
    }

    pub fn degradation(&self) -> Result<Option<DegradationConfig>> {
        if !self.degrade {
            return Ok(None);
        }
        let d = DegradationConfig {
            gaussian_sigma: self.noise_sigma,
            dct_quality: self.jpeg_quality,
            seed: self.seed,
        };
        d.validate()?;
        Ok(Some(d))
    }

    pub fn binning(&self) -> Result<AltitudeBinning> {
        match self.bin_kind {
            BinChoice::Fixed => AltitudeBinning::fixed(self.h_min, self.h_max, self.bin_width),
            BinChoice::Variable => AltitudeBinning::variable(self.var_h0, self.var_delta0, self.var_ratio, self.h_max),
        }
    }

    pub fn margin_params(&self) -> Result<MarginParams> {
        let p = MarginParams {
            m: self.margin,
            s: self.scale,
            mode: self.margin_mode,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn schedule(&self) -> Result<TrainSchedule> {
        let s = TrainSchedule {
            batch_size: self.batch_size,
            lr: self.lr,
            patience: self.patience,
            lr_floor: self.lr_floor,
            max_epochs: self.max_epochs,
            seed: self.seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.cell_size_m, self.group_modulus, self.rotations.0.clone())
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let p = PipelineConfig {
            h_db: self.h_db,
            n_class: self.n_class,
            n_retrieve: self.n_retrieve,
            epsilon: self.epsilon,
            nu: self.nu,
            use_wce: self.use_wce,
            altitude_normalization: self.altitude_normalization,
            focal_ratio: self.focal_ratio,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn rae_descriptor(&self) -> DescriptorConfig {
        DescriptorConfig::altitude()
    }

    pub fn vpr_descriptor(&self) -> DescriptorConfig {
        DescriptorConfig::place()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.success_radius_m > 0.0) {
            return Err(Error::Config(format!("success_radius_m must be > 0, got {}", self.success_radius_m)));
        }
        if self.view_w == 0 || self.view_h == 0 || self.vpr_input == 0 || self.rae_input_w == 0 || self.rae_input_h == 0 {
            return Err(Error::Config("image sizes must be >= 1".into()));
        }
        if !(self.stride_m > 0.0) {
            return Err(Error::Config(format!("stride_m must be > 0, got {}", self.stride_m)));
        }
        self.intrinsics()?;
        self.binning()?;
        self.margin_params()?;
        self.schedule()?;
        self.grid()?;
        self.pipeline()?;
        self.degradation()?;
        Ok(())
    }
}
