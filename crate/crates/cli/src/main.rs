//! `altiloc` command line.
//!
//! Configuration is layered: defaults, then `--config FILE`, then
//! `ALTILOC_SEED`, then one `--<key> VALUE` flag per configuration key.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Arg, ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};

use altiloc::config::RunConfig;
use altiloc::eval::{bench, outcomes_csv, run_queries, EvalReport};
use altiloc::pipeline::QueryRecord;
use altiloc::synthmap::{DatasetManifest, GeoRaster, Utm};
use altiloc::workflow::{self, Models};
use altiloc::{Error, RgbImage};

const SEED_ENV: &str = "ALTILOC_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "altiloc",
    version,
    about = "Altitude-adaptive aerial geo-localization on synthetic geo-referenced rasters",
    after_help = "Every configuration key listed above can also be set in the --config file as `key = value`.\n\
                  Exit codes: 0 success, 2 configuration error, 3 data error, 4 model/index mismatch."
)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize the raster (with .geo sidecar), the manifest and its views.
    Generate {
        /// Write only the raster and manifest, not the view images.
        #[arg(long)]
        no_images: bool,
    },
    /// Train the altitude head on views sampled from the raster.
    TrainRae {
        /// Number of training views.
        #[arg(long, default_value_t = 2000)]
        views: usize,
    },
    /// Render, describe and file the reference tiles at h_db.
    BuildIndex,
    /// Train the group-wise place heads against an existing index.
    TrainVpr,
    /// Localize images; one JSON line per image on stdout.
    Query {
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Evaluate the manifest; writes report.json and queries.csv to out_dir.
    Eval {
        /// Render views from the raster instead of reading the image files.
        #[arg(long)]
        render: bool,
    },
    /// Time each pipeline stage over the first manifest views; writes bench.json.
    Bench {
        #[arg(long)]
        render: bool,
    },
}

fn with_key_flags(mut cmd: clap::Command) -> clap::Command {
    for doc in RunConfig::KEYS {
        cmd = cmd.arg(
            Arg::new(doc.key)
                .long(doc.key)
                .global(true)
                .value_name(doc.kind)
                .help(doc.help)
                .help_heading("Configuration keys"),
        );
    }
    cmd
}

fn resolve_config(cli: &Cli, matches: &ArgMatches) -> altiloc::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Ok(seed) = std::env::var(SEED_ENV) {
        cfg.set("seed", &seed)
            .map_err(|e| Error::Config(format!("{SEED_ENV}: {e}")))?;
    }
    // Flags are global, so they may sit on the subcommand's matches.
    let sub = matches.subcommand().map(|(_, m)| m);
    for doc in RunConfig::KEYS {
        let value = sub
            .and_then(|m| m.get_one::<String>(doc.key))
            .or_else(|| matches.get_one::<String>(doc.key));
        if let Some(v) = value {
            cfg.set(doc.key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Config(_)) => 2,
        Some(Error::Mismatch(_)) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let matches = with_key_flags(Cli::command()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = resolve_config(&cli, &matches)
        .map_err(anyhow::Error::from)
        .and_then(|cfg| run(&cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: &Command, cfg: &RunConfig) -> Result<()> {
    match command {
        Command::Generate { no_images } => generate(cfg, !no_images),
        Command::TrainRae { views } => train_rae(cfg, *views),
        Command::BuildIndex => build_index(cfg),
        Command::TrainVpr => train_vpr(cfg),
        Command::Query { images } => query(cfg, images),
        Command::Eval { render } => eval(cfg, *render),
        Command::Bench { render } => bench_cmd(cfg, *render),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn load_raster(cfg: &RunConfig) -> Result<GeoRaster> {
    Ok(GeoRaster::load(&cfg.raster)?)
}

fn load_manifest(cfg: &RunConfig) -> Result<DatasetManifest> {
    Ok(DatasetManifest::read_csv(
        &cfg.manifest,
        cfg.intrinsics()?,
        (cfg.h_min, cfg.h_max),
        cfg.delta_h,
    )?)
}

fn manifest_dir(cfg: &RunConfig) -> PathBuf {
    cfg.manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn generate(cfg: &RunConfig, images: bool) -> Result<()> {
    let raster = workflow::generate_raster(cfg);
    ensure_parent(&cfg.raster)?;
    raster.save(&cfg.raster)?;
    let manifest = workflow::sample_views(&raster, cfg, cfg.count, cfg.seed)?;
    ensure_parent(&cfg.manifest)?;
    manifest.write_csv(&cfg.manifest)?;
    if images {
        let dir = manifest_dir(cfg);
        let degradation = cfg.degradation()?;
        for r in &manifest.records {
            let path = dir.join(&r.path);
            ensure_parent(&path)?;
            manifest
                .render(&raster, r, (cfg.view_w, cfg.view_h), degradation.as_ref())?
                .write_ppm(&path)?;
        }
    }
    eprintln!(
        "wrote {} ({}x{} px) and {} records to {}",
        cfg.raster.display(),
        raster.width(),
        raster.height(),
        manifest.records.len(),
        cfg.manifest.display()
    );
    Ok(())
}

fn train_rae(cfg: &RunConfig, views: usize) -> Result<()> {
    let raster = load_raster(cfg)?;
    // A separate stream from the evaluation manifest drawn under `seed`.
    let manifest = workflow::sample_views(&raster, cfg, views, cfg.seed.wrapping_add(1))?;
    let (model, report) = workflow::train_rae_on(&raster, &manifest, cfg)?;
    ensure_parent(&cfg.rae_model)?;
    model.save(&cfg.rae_model)?;
    eprintln!(
        "trained altitude head on {views} views in {} epochs; wrote {}",
        report.epochs,
        cfg.rae_model.display()
    );
    Ok(())
}

fn build_index(cfg: &RunConfig) -> Result<()> {
    let raster = load_raster(cfg)?;
    let index = workflow::build_index(&raster, cfg)?;
    ensure_parent(&cfg.index)?;
    index.save(&cfg.index)?;
    eprintln!(
        "indexed {} tiles in {} cells; wrote {}",
        index.len(),
        index.cell_directory().len(),
        cfg.index.display()
    );
    Ok(())
}

fn train_vpr(cfg: &RunConfig) -> Result<()> {
    let raster = load_raster(cfg)?;
    let index = altiloc::geoindex::GeoIndex::load(&cfg.index)?;
    let (model, reports) = workflow::train_vpr(&raster, &index, cfg)?;
    ensure_parent(&cfg.vpr_model)?;
    model.save(&cfg.vpr_model)?;
    eprintln!("trained {} place heads; wrote {}", reports.len(), cfg.vpr_model.display());
    Ok(())
}

fn query(cfg: &RunConfig, images: &[PathBuf]) -> Result<()> {
    let models = Models::load(cfg)?;
    let loc = models.localizer(cfg)?;
    let mut out = std::io::stdout().lock();
    for path in images {
        let image = RgbImage::read_pnm(path)?;
        let result = loc.localize(&image)?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        serde_json::to_writer(&mut out, &QueryRecord::new(id, &result))?;
        writeln!(out)?;
    }
    Ok(())
}

/// Views of the manifest records, read from disk or rendered on demand.
fn manifest_views<'a>(
    cfg: &'a RunConfig,
    manifest: &'a DatasetManifest,
    raster: Option<&'a GeoRaster>,
    limit: usize,
) -> Result<impl Iterator<Item = altiloc::Result<(String, RgbImage, Utm, f64)>> + 'a> {
    let dir = manifest_dir(cfg);
    let degradation = cfg.degradation()?;
    Ok(manifest.records.iter().take(limit).map(move |r| {
        let image = match raster {
            Some(raster) => manifest.render(raster, r, (cfg.view_w, cfg.view_h), degradation.as_ref())?,
            None => RgbImage::read_pnm(dir.join(&r.path))?,
        };
        Ok((r.id.to_string(), image, r.center, r.altitude_m))
    }))
}

fn eval(cfg: &RunConfig, render: bool) -> Result<()> {
    let models = Models::load(cfg)?;
    let loc = models.localizer(cfg)?;
    let manifest = load_manifest(cfg)?;
    let raster = if render { Some(load_raster(cfg)?) } else { None };
    let outcomes = run_queries(&loc, manifest_views(cfg, &manifest, raster.as_ref(), usize::MAX)?)?;
    let report = EvalReport::from_outcomes(&outcomes, &workflow::eval_settings(cfg))?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let report_path = cfg.out_dir.join("report.json");
    fs::write(&report_path, report.to_json()).with_context(|| format!("writing {}", report_path.display()))?;
    let table = cfg.out_dir.join("queries.csv");
    fs::write(&table, outcomes_csv(&outcomes)).with_context(|| format!("writing {}", table.display()))?;
    print!("{}", report.to_json());
    Ok(())
}

fn bench_cmd(cfg: &RunConfig, render: bool) -> Result<()> {
    let models = Models::load(cfg)?;
    let loc = models.localizer(cfg)?;
    let manifest = load_manifest(cfg)?;
    let raster = if render { Some(load_raster(cfg)?) } else { None };
    let images = manifest_views(cfg, &manifest, raster.as_ref(), cfg.bench_queries)?
        .map(|v| v.map(|(_, image, _, _)| image))
        .collect::<altiloc::Result<Vec<_>>>()?;
    let report = bench(&loc, &images, cfg.bench_repetitions)?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let path = cfg.out_dir.join("bench.json");
    let text = serde_json::to_string_pretty(&report)? + "\n";
    fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    print!("{text}");
    Ok(())
}
