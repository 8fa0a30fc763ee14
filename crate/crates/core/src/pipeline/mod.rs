//! Online inference: altitude estimate, scale normalization, classify-then-
//! retrieve and weighted coordinate refinement.

mod classify;
mod crop;
mod ocsvm;
mod train;
mod wce;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use classify::{classify_cells, CellScore};
pub use crop::crop_normalize;
pub use ocsvm::{oc_filter, rbf_gamma, OneClassSvm, MIN_FIT_POINTS};
pub use train::{
    assign_quality, place_training_centers, train_place_heads, train_rae, PlaceTrainConfig, QualityInput, RaeTrainConfig,
};
pub use wce::{wce, wce_from_features, wce_weights};

use crate::altbins::{scale_for_intrinsics, AltitudeBinning, AltitudeEstimate};
use crate::error::{Error, Result};
use crate::geoindex::{CellId, GeoIndex, RetrievalResult};
use crate::image::RgbImage;
use crate::marginlearn::{ModelFile, PlaceHeadRef, PrototypeMatrix};
use crate::spectra::Describer;
use crate::synthmap::Utm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub h_db: f64,
    pub n_class: usize,
    pub n_retrieve: usize,
    pub epsilon: f64,
    pub nu: f64,
    pub use_wce: bool,
    /// When false the query is only resized, never scale-normalized.
    pub altitude_normalization: bool,
    /// `f_actual / f_nominal` applied to the altitude estimate.
    pub focal_ratio: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            h_db: 125.0,
            n_class: 3,
            n_retrieve: 10,
            epsilon: 1e-8,
            nu: 0.3,
            use_wce: true,
            altitude_normalization: true,
            focal_ratio: 1.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_db > 0.0) {
            return Err(Error::Config(format!("h_db must be > 0, got {}", self.h_db)));
        }
        if self.n_class == 0 || self.n_retrieve == 0 {
            return Err(Error::Config("n_class and n_retrieve must be >= 1".into()));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::Config(format!("nu must lie in (0, 1), got {}", self.nu)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.focal_ratio > 0.0 && self.focal_ratio.is_finite()) {
            return Err(Error::Config(format!("focal ratio must be > 0, got {}", self.focal_ratio)));
        }
        Ok(())
    }
}

/// Altitude head ready for inference.
#[derive(Debug, Clone)]
pub struct AltitudeModel {
    pub describer: Describer,
    pub prototypes: PrototypeMatrix,
    pub binning: AltitudeBinning,
    pub scale: f64,
}

impl AltitudeModel {
    pub fn from_model(model: &ModelFile) -> Result<Self> {
        let (prototypes, binning) = model.altitude_head()?;
        Ok(Self {
            describer: Describer::new(model.descriptor, model.input_size.0, model.input_size.1)?,
            prototypes: prototypes.clone(),
            binning: binning.clone(),
            scale: model.scale,
        })
    }

    /// Resizes to the model input, describes the spectrum and classifies it.
    pub fn estimate(&self, image: &RgbImage) -> Result<AltitudeEstimate> {
        let (w, h) = self.describer.input_size();
        let d = self.describer.describe(&image.resize(w, h))?;
        let probs = self.prototypes.predict(&d.values, self.scale)?;
        self.binning.alt_classify(&probs)
    }
}

/// Group heads ready for inference.
#[derive(Debug, Clone)]
pub struct PlaceModel {
    pub describer: Describer,
    pub heads: Vec<(PrototypeMatrix, PlaceHeadRef)>,
    pub scale: f64,
}

impl PlaceModel {
    pub fn from_model(model: &ModelFile) -> Result<Self> {
        let heads = model
            .place_heads()?
            .into_iter()
            .map(|(p, r)| (p.clone(), r.clone()))
            .collect();
        Ok(Self {
            describer: Describer::new(model.descriptor, model.input_size.0, model.input_size.1)?,
            heads,
            scale: model.scale,
        })
    }

    pub fn head_refs(&self) -> Vec<(&PrototypeMatrix, &PlaceHeadRef)> {
        self.heads.iter().map(|(p, r)| (p, r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub altitude: AltitudeEstimate,
    /// Altitude used for normalization, after focal-ratio scaling.
    pub h_hat: f64,
    pub selected_cells: Vec<CellId>,
    pub retrieval: RetrievalResult,
    /// Ranks (0-based) into `retrieval` that survived outlier filtering.
    pub retained: Vec<usize>,
    pub utm_star: Utm,
    pub top1_utm: Utm,
}

/// Wall-clock milliseconds per stage of one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub rae_ms: f64,
    pub crop_ms: f64,
    pub classify_ms: f64,
    pub retrieve_ms: f64,
}

impl StageTimings {
    pub fn total_ms(&self) -> f64 {
        self.rae_ms + self.crop_ms + self.classify_ms + self.retrieve_ms
    }
}

/// One JSON-lines record per query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub h_hat: f64,
    pub cells: Vec<[i64; 2]>,
    pub top1_e: f64,
    pub top1_n: f64,
    pub star_e: f64,
    pub star_n: f64,
    pub retained: Vec<usize>,
    pub distances: Vec<f64>,
}

impl QueryRecord {
    pub fn new(id: impl Into<String>, r: &LocalizationResult) -> Self {
        Self {
            id: id.into(),
            h_hat: r.h_hat,
            cells: r.selected_cells.iter().map(|c| [c.e, c.n]).collect(),
            top1_e: r.top1_utm.easting,
            top1_n: r.top1_utm.northing,
            star_e: r.utm_star.easting,
            star_n: r.utm_star.northing,
            retained: r.retained.clone(),
            distances: r.retrieval.distances.clone(),
        }
    }
}

/// The assembled pipeline over shared, immutable models and index.
pub struct Localizer<'a> {
    pub altitude: &'a AltitudeModel,
    pub place: &'a PlaceModel,
    pub index: &'a GeoIndex,
    pub cfg: PipelineConfig,
}

impl<'a> Localizer<'a> {
    /// Checks that models, index and configuration agree.
    pub fn new(altitude: &'a AltitudeModel, place: &'a PlaceModel, index: &'a GeoIndex, cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let min_center = altitude.binning.centers().iter().cloned().fold(f64::INFINITY, f64::min);
        if cfg.h_db > min_center {
            return Err(Error::Config(format!(
                "h_db = {} m exceeds the lowest altitude bin center {min_center} m",
                cfg.h_db
            )));
        }
        if (cfg.h_db - index.h_db()).abs() > 1e-9 {
            return Err(Error::Mismatch(format!(
                "pipeline h_db {} m differs from the index's {} m",
                cfg.h_db,
                index.h_db()
            )));
        }
        if place.describer.config() != index.descriptor_config() || place.describer.input_size() != index.input_size() {
            return Err(Error::Mismatch("place model and index use different descriptor layouts".into()));
        }
        if let Some((_, r)) = place.heads.iter().find(|(_, r)| r.cell_size_m != index.cell_size_m()) {
            return Err(Error::Mismatch(format!(
                "place head cell size {} m differs from the index's {} m",
                r.cell_size_m,
                index.cell_size_m()
            )));
        }
        Ok(Self {
            altitude,
            place,
            index,
            cfg,
        })
    }

    pub fn estimate_altitude(&self, image: &RgbImage) -> Result<(AltitudeEstimate, f64)> {
        let est = self.altitude.estimate(image)?;
        let h = scale_for_intrinsics(est.center_altitude_m, self.cfg.focal_ratio, 1.0)?;
        Ok((est, h))
    }

    pub fn localize(&self, image: &RgbImage) -> Result<LocalizationResult> {
        self.localize_timed(image).map(|(r, _)| r)
    }

    pub fn localize_timed(&self, image: &RgbImage) -> Result<(LocalizationResult, StageTimings)> {
        let mut t = StageTimings::default();
        let clock = Instant::now();
        let (altitude, h_hat) = self.estimate_altitude(image)?;
        t.rae_ms = ms(clock);

        let clock = Instant::now();
        let size = self.place.describer.input_size();
        let primitive = if self.cfg.altitude_normalization {
            // A focal ratio below 1 can push the estimate under h_db; the crop
            // cannot zoom out, so it saturates at the canonical scale.
            crop_normalize(image, h_hat.max(self.cfg.h_db), self.cfg.h_db, size)?
        } else {
            image.resize(size.0, size.1)
        };
        t.crop_ms = ms(clock);

        let clock = Instant::now();
        let query = self.place.describer.describe(&primitive)?;
        let top = classify_cells(&query.values, &self.place.head_refs(), self.place.scale, self.cfg.n_class)?;
        let cells: Vec<CellId> = top.iter().map(|s| s.cell).collect();
        t.classify_ms = ms(clock);

        let clock = Instant::now();
        let candidates = self.index.subdb_union(&cells);
        if candidates.is_empty() {
            return Err(Error::Retrieval(format!("selected cells {cells:?} hold no reference tiles")));
        }
        let retrieval = self.index.search(&query.values, &candidates, self.cfg.n_retrieve)?;
        let top1 = retrieval.coords[0];
        let (retained, star) = if self.cfg.use_wce {
            let mut kept = oc_filter(&retrieval.coords, self.cfg.nu);
            if kept.is_empty() {
                kept = vec![0];
            }
            let star = wce(&retrieval.distances, &retrieval.coords, &kept, self.cfg.epsilon)?;
            (kept, star)
        } else {
            (vec![0], top1)
        };
        t.retrieve_ms = ms(clock);

        Ok((
            LocalizationResult {
                altitude,
                h_hat,
                selected_cells: cells,
                retrieval,
                retained,
                utm_star: star,
                top1_utm: top1,
            },
            t,
        ))
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}
