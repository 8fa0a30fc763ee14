//! Benchmark metrics, per-query tables, the JSON report and stage timing.

mod metrics;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use metrics::{altitude_metrics, localization_metrics, recall_at_n, LocalizationMetrics, D_AVG_CAP_M};

use crate::error::{Error, Result};
use crate::geoindex::RetrievalResult;
use crate::image::RgbImage;
use crate::pipeline::{LocalizationResult, Localizer, StageTimings};
use crate::synthmap::Utm;

/// What the pipeline produced for one labelled query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub id: String,
    pub truth: Utm,
    pub h_true: f64,
    pub result: LocalizationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixSummary {
    pub d_avg: f64,
    pub d_avg_capped_1km: f64,
    pub s_loc: f64,
    pub n_success: usize,
}

impl From<LocalizationMetrics> for FixSummary {
    fn from(m: LocalizationMetrics) -> Self {
        Self {
            d_avg: m.d_avg,
            d_avg_capped_1km: m.d_avg_capped,
            s_loc: m.s_loc,
            n_success: m.n_success,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLatency {
    pub stage: String,
    pub mean_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub queries: usize,
    pub repetitions: usize,
    pub stages: Vec<StageLatency>,
    pub mean_total_ms: f64,
    pub throughput_fps: f64,
}

/// Summary of one evaluation run. Timings are `null` unless a bench section
/// is attached, which keeps plain evaluation reports reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_total: usize,
    pub success_radius_m: f64,
    pub e_avg: f64,
    pub p_within: BTreeMap<u32, f64>,
    pub recall_at: BTreeMap<usize, f64>,
    /// Refined fixes (the top-1 fix when refinement is disabled).
    pub d_avg: f64,
    pub d_avg_capped_1km: f64,
    pub s_loc: f64,
    pub n_success: usize,
    /// Unrefined top-1 fixes on the same queries.
    pub top1: FixSummary,
    /// Queries with at least two retained candidates more than 10 m apart.
    pub n_disagreeing: usize,
    pub throughput_fps: Option<f64>,
    pub latency_ms: Option<Vec<StageLatency>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub thresholds: Vec<u32>,
    pub recall_n: Vec<usize>,
    pub success_radius_m: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            thresholds: vec![25, 50, 100],
            recall_n: vec![1, 5, 10],
            success_radius_m: 100.0,
        }
    }
}

const DISAGREEMENT_M: f64 = 10.0;

fn disagrees(r: &LocalizationResult) -> bool {
    let pts: Vec<Utm> = r.retained.iter().map(|&i| r.retrieval.coords[i]).collect();
    pts.iter()
        .enumerate()
        .any(|(i, a)| pts[i + 1..].iter().any(|b| a.distance(b) > DISAGREEMENT_M))
}

impl EvalReport {
    pub fn from_outcomes(outcomes: &[QueryOutcome], settings: &EvalSettings) -> Result<Self> {
        let pairs: Vec<(f64, f64)> = outcomes.iter().map(|o| (o.result.h_hat, o.h_true)).collect();
        let (e_avg, p_within) = altitude_metrics(&pairs, &settings.thresholds)?;
        let truths: Vec<Utm> = outcomes.iter().map(|o| o.truth).collect();
        let retrievals: Vec<RetrievalResult> = outcomes.iter().map(|o| o.result.retrieval.clone()).collect();
        let recall_at = recall_at_n(&retrievals, &truths, &settings.recall_n, settings.success_radius_m)?;
        let stars: Vec<Utm> = outcomes.iter().map(|o| o.result.utm_star).collect();
        let tops: Vec<Utm> = outcomes.iter().map(|o| o.result.top1_utm).collect();
        let star = localization_metrics(&stars, &truths, settings.success_radius_m)?;
        let top1 = localization_metrics(&tops, &truths, settings.success_radius_m)?;
        Ok(Self {
            n_total: outcomes.len(),
            success_radius_m: settings.success_radius_m,
            e_avg,
            p_within,
            recall_at,
            d_avg: star.d_avg,
            d_avg_capped_1km: star.d_avg_capped,
            s_loc: star.s_loc,
            n_success: star.n_success,
            top1: top1.into(),
            n_disagreeing: outcomes.iter().filter(|o| disagrees(&o.result)).count(),
            throughput_fps: None,
            latency_ms: None,
        })
    }

    pub fn attach_bench(&mut self, bench: &BenchReport) {
        self.throughput_fps = Some(bench.throughput_fps);
        self.latency_ms = Some(bench.stages.clone());
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Per-query CSV, one row per outcome; doubles as the altitude scatter table.
pub fn outcomes_csv(outcomes: &[QueryOutcome]) -> String {
    let mut out =
        String::from("id,h_true,h_hat,true_e,true_n,top1_e,top1_n,star_e,star_n,err_top1_m,err_star_m,retained\n");
    for o in outcomes {
        let r = &o.result;
        let retained: Vec<String> = r.retained.iter().map(usize::to_string).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:.3},{:.3},{}",
            o.id,
            o.h_true,
            r.h_hat,
            o.truth.easting,
            o.truth.northing,
            r.top1_utm.easting,
            r.top1_utm.northing,
            r.utm_star.easting,
            r.utm_star.northing,
            r.top1_utm.distance(&o.truth),
            r.utm_star.distance(&o.truth),
            retained.join(" ")
        )
        .unwrap();
    }
    out
}

/// Runs each query through the pipeline in order.
pub fn run_queries<I>(loc: &Localizer<'_>, queries: I) -> Result<Vec<QueryOutcome>>
where
    I: IntoIterator<Item = Result<(String, RgbImage, Utm, f64)>>,
{
    queries
        .into_iter()
        .map(|q| {
            let (id, image, truth, h_true) = q?;
            Ok(QueryOutcome {
                result: loc.localize(&image)?,
                id,
                truth,
                h_true,
            })
        })
        .collect()
}

const STAGES: [&str; 4] = ["rae", "crop", "vpr_classification", "vpr_retrieval"];

fn stage_values(t: &StageTimings) -> [f64; 4] {
    [t.rae_ms, t.crop_ms, t.classify_ms, t.retrieve_ms]
}

/// Times every stage over `repetitions` passes of `queries` after one
/// untimed warm-up query. Single-threaded so stage attribution stays honest.
pub fn bench(loc: &Localizer<'_>, queries: &[RgbImage], repetitions: usize) -> Result<BenchReport> {
    if queries.is_empty() || repetitions == 0 {
        return Err(Error::Config("bench needs at least one query and one repetition".into()));
    }
    loc.localize(&queries[0])?;
    let mut sums = [0.0; 4];
    let mut maxes = [0.0f64; 4];
    let mut total = 0.0;
    let runs = queries.len() * repetitions;
    for _ in 0..repetitions {
        for q in queries {
            let (_, t) = loc.localize_timed(q)?;
            for (i, v) in stage_values(&t).into_iter().enumerate() {
                sums[i] += v;
                maxes[i] = maxes[i].max(v);
            }
            total += t.total_ms();
        }
    }
    let mean_total_ms = total / runs as f64;
    Ok(BenchReport {
        queries: queries.len(),
        repetitions,
        stages: STAGES
            .iter()
            .enumerate()
            .map(|(i, name)| StageLatency {
                stage: name.to_string(),
                mean_ms: sums[i] / runs as f64,
                max_ms: maxes[i],
            })
            .collect(),
        mean_total_ms,
        throughput_fps: if mean_total_ms > 0.0 { 1e3 / mean_total_ms } else { f64::INFINITY },
    })
}
