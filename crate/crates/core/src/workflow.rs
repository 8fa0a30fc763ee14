//! End-to-end steps shared by the command line and the benchmark harness:
//! terrain synthesis, index construction, training and evaluation, all driven
//! by one [`RunConfig`].

use crate::config::RunConfig;
use crate::error::Result;
use crate::eval::{run_queries, EvalReport, EvalSettings, QueryOutcome};
use crate::geoindex::{GeoIndex, IndexBuild};
use crate::image::RgbImage;
use crate::marginlearn::{ModelFile, TrainReport};
use crate::pipeline::{
    train_place_heads, train_rae, AltitudeModel, Localizer, PlaceModel, PlaceTrainConfig, RaeTrainConfig,
};
use crate::spectra::Describer;
use crate::synthmap::terrain::generate;
use crate::synthmap::{sample_dataset, DatasetManifest, GeoRaster};

pub fn generate_raster(cfg: &RunConfig) -> GeoRaster {
    generate(&cfg.terrain())
}

/// Samples `count` labelled views on the configured altitude lattice.
pub fn sample_views(raster: &GeoRaster, cfg: &RunConfig, count: usize, seed: u64) -> Result<DatasetManifest> {
    sample_dataset(raster, &cfg.intrinsics()?, (cfg.h_min, cfg.h_max), cfg.delta_h, count, seed)
}

fn vpr_size(cfg: &RunConfig) -> (usize, usize) {
    (cfg.vpr_input, cfg.vpr_input)
}

/// Tiles are rendered straight at the descriptor input size.
pub fn build_index(raster: &GeoRaster, cfg: &RunConfig) -> Result<GeoIndex> {
    let grid = cfg.grid()?;
    let cam = cfg.intrinsics()?;
    let describer = Describer::new(cfg.vpr_descriptor(), cfg.vpr_input, cfg.vpr_input)?;
    let spec = IndexBuild {
        raster,
        grid: &grid,
        h_db: cfg.h_db,
        stride_m: cfg.stride_m,
        intrinsics: &cam,
        render_size: vpr_size(cfg),
        descriptor: cfg.vpr_descriptor(),
        input_size: vpr_size(cfg),
    };
    GeoIndex::build(&spec, |tile| describer.describe(tile))
}

pub fn train_vpr(raster: &GeoRaster, index: &GeoIndex, cfg: &RunConfig) -> Result<(ModelFile, Vec<TrainReport>)> {
    let tc = PlaceTrainConfig {
        grid: cfg.grid()?,
        h_db: cfg.h_db,
        render_size: vpr_size(cfg),
        descriptor: cfg.vpr_descriptor(),
        input_size: vpr_size(cfg),
        tiles_per_axis: cfg.tiles_per_axis,
        margin: cfg.margin_params()?,
        schedule: cfg.schedule()?,
        alpha: cfg.quality_alpha,
    };
    train_place_heads(raster, index, &cfg.intrinsics()?, &tc)
}

/// Trains the altitude head on the views of `manifest`, rendered from the
/// raster at the configured view size (degraded when configured).
pub fn train_rae_on(raster: &GeoRaster, manifest: &DatasetManifest, cfg: &RunConfig) -> Result<(ModelFile, TrainReport)> {
    let tc = RaeTrainConfig {
        binning: cfg.binning()?,
        descriptor: cfg.rae_descriptor(),
        input_size: (cfg.rae_input_w, cfg.rae_input_h),
        margin: cfg.margin_params()?,
        schedule: cfg.schedule()?,
        alpha: cfg.quality_alpha,
    };
    let degradation = cfg.degradation()?;
    let size = (cfg.view_w, cfg.view_h);
    let views = manifest
        .records
        .iter()
        .map(|r| Ok((manifest.render(raster, r, size, degradation.as_ref())?, r.altitude_m)));
    train_rae(views, &tc)
}

/// Models and index loaded for inference.
pub struct Models {
    pub altitude: AltitudeModel,
    pub place: PlaceModel,
    pub index: GeoIndex,
}

impl Models {
    pub fn new(rae: &ModelFile, vpr: &ModelFile, index: GeoIndex) -> Result<Self> {
        Ok(Self {
            altitude: AltitudeModel::from_model(rae)?,
            place: PlaceModel::from_model(vpr)?,
            index,
        })
    }

    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let rae = ModelFile::load(&cfg.rae_model)?;
        let vpr = ModelFile::load(&cfg.vpr_model)?;
        Self::new(&rae, &vpr, GeoIndex::load(&cfg.index)?)
    }

    pub fn localizer(&self, cfg: &RunConfig) -> Result<Localizer<'_>> {
        Localizer::new(&self.altitude, &self.place, &self.index, cfg.pipeline()?)
    }
}

pub fn eval_settings(cfg: &RunConfig) -> EvalSettings {
    EvalSettings {
        thresholds: cfg.thresholds.0.clone(),
        recall_n: cfg.recall_n.0.clone(),
        success_radius_m: cfg.success_radius_m,
    }
}

/// Renders every manifest record and runs it through the pipeline.
pub fn evaluate_rendered(
    raster: &GeoRaster,
    manifest: &DatasetManifest,
    loc: &Localizer<'_>,
    cfg: &RunConfig,
) -> Result<(EvalReport, Vec<QueryOutcome>)> {
    let degradation = cfg.degradation()?;
    let size = (cfg.view_w, cfg.view_h);
    let queries = manifest.records.iter().map(|r| {
        let image: RgbImage = manifest.render(raster, r, size, degradation.as_ref())?;
        Ok((r.id.to_string(), image, r.center, r.altitude_m))
    });
    let outcomes = run_queries(loc, queries)?;
    Ok((EvalReport::from_outcomes(&outcomes, &eval_settings(cfg))?, outcomes))
}
