use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::altbins::AltitudeBinning;
use crate::error::{Error, Result};
use crate::geoindex::{CellId, GeoIndex, GridSpec};
use crate::image::RgbImage;
use crate::marginlearn::{
    train_prototypes, Head, HeadMeta, MarginParams, ModelFile, PlaceHeadRef, Sample, TrainReport, TrainSchedule,
};
use crate::spectra::{composite_quality, sharpness, Describer, Descriptor, DescriptorConfig, QualityStats};
use crate::synthmap::{footprint, footprint_fits, render_view, CameraIntrinsics, GeoRaster, Utm};

/// A described training view before its quality is known.
#[derive(Debug, Clone)]
pub struct QualityInput {
    pub descriptor: Descriptor,
    pub sharpness: f64,
    pub label: usize,
}

impl QualityInput {
    pub fn from_image(describer: &Describer, image: &RgbImage, label: usize) -> Result<Self> {
        Ok(Self {
            descriptor: describer.describe(image)?,
            sharpness: sharpness(image),
            label,
        })
    }
}

/// Normalizes both quality signals against statistics of the whole set and
/// mixes them with weight `alpha` on the descriptor norm. With fewer than two
/// inputs every quality is neutral (0.5).
pub fn assign_quality(inputs: &[QualityInput], alpha: f64) -> Result<(Vec<Sample>, QualityStats)> {
    let mut stats = QualityStats::default();
    for i in inputs {
        stats.observe(i.descriptor.raw_norm, i.sharpness);
    }
    let samples = inputs
        .iter()
        .map(|i| {
            let q = if inputs.len() < 2 {
                0.5
            } else {
                composite_quality(i.descriptor.raw_norm, i.sharpness, alpha, &stats)?.q
            };
            Ok(Sample {
                descriptor: i.descriptor.values.clone(),
                label: i.label,
                quality: q,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((samples, stats))
}

#[derive(Debug, Clone)]
pub struct RaeTrainConfig {
    pub binning: AltitudeBinning,
    pub descriptor: DescriptorConfig,
    pub input_size: (usize, usize),
    pub margin: MarginParams,
    pub schedule: TrainSchedule,
    pub alpha: f64,
}

/// Trains the altitude head on `(view, true altitude)` pairs. Views are
/// resized to the model input and consumed one at a time.
pub fn train_rae(
    views: impl IntoIterator<Item = Result<(RgbImage, f64)>>,
    cfg: &RaeTrainConfig,
) -> Result<(ModelFile, TrainReport)> {
    let describer = Describer::new(cfg.descriptor, cfg.input_size.0, cfg.input_size.1)?;
    let mut inputs = Vec::new();
    for view in views {
        let (image, altitude) = view?;
        let small = image.resize(cfg.input_size.0, cfg.input_size.1);
        let label = cfg.binning.bin_of(altitude)?;
        inputs.push(QualityInput::from_image(&describer, &small, label)?);
    }
    let (samples, _) = assign_quality(&inputs, cfg.alpha)?;
    let (w, report) = train_prototypes(&samples, cfg.binning.n_bins(), &cfg.margin, &cfg.schedule)?;
    let head = Head::new(w, HeadMeta::Altitude(cfg.binning.clone()))?;
    let model = ModelFile::new(vec![head], cfg.descriptor, cfg.input_size, cfg.margin.s)?;
    Ok((model, report))
}

#[derive(Debug, Clone)]
pub struct PlaceTrainConfig {
    pub grid: GridSpec,
    pub h_db: f64,
    /// Pixel size tiles are rendered at before resizing to `input_size`.
    pub render_size: (usize, usize),
    pub descriptor: DescriptorConfig,
    pub input_size: (usize, usize),
    /// Jittered `k × k` extra centers per cell, on top of the index tiles.
    pub tiles_per_axis: usize,
    pub margin: MarginParams,
    pub schedule: TrainSchedule,
    pub alpha: f64,
}

/// Training centers per indexed cell: the cell's reference tiles plus a
/// jittered `k × k` lattice inside the cell, keeping only footprints that
/// fit the raster.
pub fn place_training_centers(
    raster: &GeoRaster,
    index: &GeoIndex,
    intrinsics: &CameraIntrinsics,
    cfg: &PlaceTrainConfig,
) -> Result<BTreeMap<CellId, Vec<Utm>>> {
    let fp = footprint(intrinsics, cfg.h_db)?;
    let m = cfg.grid.cell_size_m;
    let k = cfg.tiles_per_axis;
    let mut out = BTreeMap::new();
    for (ci, (cell, entries)) in index.cell_directory().iter().enumerate() {
        let mut centers: Vec<Utm> = entries.iter().map(|&i| index.entries()[i].utm).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.schedule.seed);
        rng.set_stream(ci as u64);
        for j in 0..k {
            for i in 0..k {
                let jitter = 0.4 * m / k as f64;
                let c = Utm::new(
                    (cell.e as f64 + (i as f64 + 0.5) / k as f64) * m + rng.random_range(-jitter..=jitter),
                    (cell.n as f64 + (j as f64 + 0.5) / k as f64) * m + rng.random_range(-jitter..=jitter),
                );
                if cfg.grid.cell_of(c) == *cell && footprint_fits(raster, c, &fp).is_ok() {
                    centers.push(c);
                }
            }
        }
        out.insert(*cell, centers);
    }
    Ok(out)
}

/// Trains one head per populated group over canonical-altitude tiles (each
/// rendered under every rotation of the grid's set) and packs them into a
/// place model.
pub fn train_place_heads(
    raster: &GeoRaster,
    index: &GeoIndex,
    intrinsics: &CameraIntrinsics,
    cfg: &PlaceTrainConfig,
) -> Result<(ModelFile, Vec<TrainReport>)> {
    cfg.grid.validate()?;
    if cfg.grid.cell_size_m != index.cell_size_m() || cfg.grid.group_modulus != index.group_modulus() {
        return Err(Error::Mismatch("training grid differs from the index grid".into()));
    }
    let describer = Describer::new(cfg.descriptor, cfg.input_size.0, cfg.input_size.1)?;
    let centers = place_training_centers(raster, index, intrinsics, cfg)?;
    let cell_ids: Vec<CellId> = centers.keys().copied().collect();
    let mut inputs = Vec::new();
    for (label, cell) in cell_ids.iter().enumerate() {
        for &c in &centers[cell] {
            let tile = render_view(raster, c, cfg.h_db, intrinsics, cfg.render_size.0, cfg.render_size.1)?;
            for &deg in &cfg.grid.rotations {
                let view = tile.rotate(deg).resize(cfg.input_size.0, cfg.input_size.1);
                inputs.push(QualityInput::from_image(&describer, &view, label)?);
            }
        }
    }
    let (samples, _) = assign_quality(&inputs, cfg.alpha)?;

    let mut heads = Vec::new();
    let mut reports = Vec::new();
    for (gi, (group, cells)) in index.group_directory().iter().enumerate() {
        let local: BTreeMap<usize, usize> = cells
            .iter()
            .enumerate()
            .map(|(li, c)| (cell_ids.binary_search(c).expect("cell from the index"), li))
            .collect();
        let group_samples: Vec<Sample> = samples
            .iter()
            .filter_map(|s| {
                local.get(&s.label).map(|&li| Sample {
                    label: li,
                    ..s.clone()
                })
            })
            .collect();
        let schedule = TrainSchedule {
            seed: cfg.schedule.seed.wrapping_add(gi as u64 + 1),
            ..cfg.schedule
        };
        let (w, report) = train_prototypes(&group_samples, cells.len(), &cfg.margin, &schedule)?;
        heads.push(Head::new(
            w,
            HeadMeta::Place(PlaceHeadRef {
                cell_size_m: cfg.grid.cell_size_m,
                group_modulus: cfg.grid.group_modulus,
                group: (group.u, group.v),
                cells: cells.iter().map(|c| (c.e, c.n)).collect(),
            }),
        )?);
        reports.push(report);
    }
    let model = ModelFile::new(heads, cfg.descriptor, cfg.input_size, cfg.margin.s)?;
    Ok((model, reports))
}
