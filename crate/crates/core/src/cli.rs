//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::dataset::{Dataset, GroundTruth, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::pipeline::{angular_error_map, demo_sphere, mean_angular_error, metrics_table, render_sphere, run_pipeline};
use crate::pipeline::{PipelineInput, PipelineSettings};
use crate::tables::{save_tables, Tables};
use crate::{pfm, preview};

#[derive(Debug, Parser)]
#[command(name = "scatterstereo", version, about = "Photometric stereo in scattering media")]
pub struct Cli {
    /// Run configuration (TOML); built-in sphere preset when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (or table file for make-tables).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write intermediate stacks and maps as PFM under <out>/stages.
    #[arg(long, global = true)]
    pub dump_stages: bool,
    /// Lookup-table file; built and saved there if missing.
    #[arg(long, global = true)]
    pub tables: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the noise seed from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the scattering lookup tables and save them.
    MakeTables,
    /// Render the configured synthetic sphere to PFM stacks and a manifest.
    Render,
    /// Reconstruct normals and depth from a rendered or captured stack.
    Reconstruct {
        /// Manifest to read; falls back to io.manifest in the config.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Mean angular error between two normal maps (3-channel PFM).
    Evaluate {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Mask PFM; defaults to pixels where both maps are non-zero.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Render, reconstruct from a plane and report per-iteration errors.
    DemoSphere,
}

/// Process exit code for each error category.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 3,
        Error::Io { .. } => 4,
        Error::Pfm(_) | Error::TableFormat(_) | Error::TableVersion { .. } => 5,
        Error::InvalidParameter(_) | Error::Domain(_) | Error::Dimension(_) => 6,
        Error::Geometry(_) | Error::Solve { .. } | Error::Singular { .. } | Error::TableConstruction { .. } => 7,
    }
}

fn category(err: &Error) -> &'static str {
    match exit_code(err) {
        3 => "configuration error",
        4 => "i/o error",
        5 => "file format error",
        6 => "invalid input",
        _ => "numerical failure",
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error ({}): {e}", category(&e));
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("--threads must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.render.seed = seed;
    }
    match &cli.command {
        Command::MakeTables => make_tables(cli, &cfg),
        Command::Render => render(cli, &cfg),
        Command::Reconstruct { manifest } => reconstruct(cli, &cfg, manifest.as_deref()),
        Command::Evaluate {
            estimate,
            reference,
            mask,
        } => evaluate(estimate, reference, mask.as_deref()),
        Command::DemoSphere => demo(cli, &cfg),
    }
}

fn table_path(cli: &Cli, cfg: &RunConfig) -> Option<PathBuf> {
    cli.tables.clone().or_else(|| cfg.io.tables.clone())
}

fn load_tables(cli: &Cli, cfg: &RunConfig) -> Result<Tables> {
    match table_path(cli, cfg) {
        Some(path) => Tables::load_or_build(&path),
        None => {
            log::info!("building lookup tables in memory (pass --tables to cache them)");
            Tables::build_default()
        }
    }
}

fn out_dir(cli: &Cli) -> Result<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn timing_table(timings: &[f64]) -> String {
    let mut out = String::from("iteration\twall_seconds\n");
    for (i, t) in timings.iter().enumerate() {
        out.push_str(&format!("{}\t{t:.3}\n", i + 1));
    }
    out
}

fn make_tables(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let path = match (table_path(cli, cfg), &cli.out) {
        (Some(p), _) => p,
        (None, Some(out)) => out.clone(),
        (None, None) => PathBuf::from("tables.bin"),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tables = Tables::build_default()?;
    save_tables(&path, &tables)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn render(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let tables = load_tables(cli, cfg)?;
    let dir = out_dir(cli)?;
    let (truth, camera, rendered) = render_sphere(cfg, &tables)?;
    let dataset = Dataset {
        observed: rendered.observed,
        no_object: rendered.no_object,
        camera,
        medium: cfg.medium,
        d_max: cfg.render.d_max,
        ground_truth: Some(GroundTruth {
            normals: truth.normals.clone(),
            depth: truth.depth.clone(),
        }),
    };
    let manifest = dataset.save(&dir)?;
    for (k, img) in dataset.observed.images.iter().enumerate() {
        preview::write_radiance(&dir.join(format!("observed_{k:02}.png")), img, &truth.mask)?;
    }
    preview::write_normals(&dir.join("gt_normals.png"), &truth.normals, &truth.mask)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn reconstruct(cli: &Cli, cfg: &RunConfig, manifest: Option<&Path>) -> Result<()> {
    let manifest = manifest
        .map(Path::to_path_buf)
        .or_else(|| cfg.io.manifest.clone())
        .ok_or_else(|| Error::Config(format!("no manifest given (use --manifest or io.manifest; render writes {MANIFEST_FILE})")))?;
    let data = Dataset::load(&manifest)?;
    let tables = load_tables(cli, cfg)?;
    let dir = out_dir(cli)?;
    let input = PipelineInput {
        observed: &data.observed,
        no_object: &data.no_object,
        camera: &data.camera,
        medium: &data.medium,
        tables: &tables,
        ground_truth: data.ground_truth.as_ref().map(|g| &g.normals),
    };
    let settings = PipelineSettings::from_config(cfg);
    let stages = cli.dump_stages.then(|| dir.join("stages"));
    let out = run_pipeline(&input, &settings, stages.as_deref())?;
    let mask = &data.observed.mask;
    pfm::write_normals(&dir.join("normals.pfm"), &out.normals)?;
    pfm::write_scalar(&dir.join("depth.pfm"), &out.depth)?;
    pfm::write_scalar(&dir.join("albedo.pfm"), &out.albedo)?;
    preview::write_normals(&dir.join("normals.png"), &out.normals, mask)?;
    let mut table = metrics_table(&out.metrics);
    table.push_str(&format!("# converged\t{}\n", out.converged));
    write_text(&dir.join("metrics.tsv"), &table)?;
    write_text(&dir.join("timing.tsv"), &timing_table(&out.timings))?;
    print!("{table}");
    if let Some(gt) = &data.ground_truth {
        let map = angular_error_map(&out.normals, &gt.normals, mask)?;
        pfm::write_scalar(&dir.join("error_map.pfm"), &map)?;
        preview::write_error_map(&dir.join("error_map.png"), &map, 10.0)?;
    }
    Ok(())
}

fn evaluate(estimate: &Path, reference: &Path, mask: Option<&Path>) -> Result<()> {
    let est = pfm::read_normals(estimate)?;
    let reference = pfm::read_normals(reference)?;
    if est.dims() != reference.dims() {
        return Err(Error::Dimension("normal maps differ in size".into()));
    }
    let mask: Mask = match mask {
        Some(path) => pfm::read_mask(path)?,
        None => {
            let (w, h) = est.dims();
            Mask::from_fn(w, h, |x, y| est.get(x, y).norm() > 0.0 && reference.get(x, y).norm() > 0.0)
        }
    };
    let normalize = |g: &crate::grid::Grid<crate::scene::Vec3>| {
        g.map(|n| if n.norm() > 0.0 { n.normalize() } else { *n })
    };
    let err = mean_angular_error(&normalize(&est), &normalize(&reference), &mask)?;
    println!("mean angular error: {err:.2}°");
    Ok(())
}

fn demo(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let tables = load_tables(cli, cfg)?;
    let dir = out_dir(cli)?;
    let stages = cli.dump_stages.then(|| dir.join("stages"));
    let result = demo_sphere(cfg, &tables, stages.as_deref())?;
    let mask = &result.truth.mask;
    let table = result.metrics_table();
    write_text(&dir.join("metrics.tsv"), &table)?;
    write_text(&dir.join("timing.tsv"), &timing_table(&result.pipeline.timings))?;
    pfm::write_normals(&dir.join("normals.pfm"), &result.pipeline.normals)?;
    pfm::write_normals(&dir.join("gt_normals.pfm"), &result.truth.normals)?;
    pfm::write_scalar(&dir.join("depth.pfm"), &result.pipeline.depth)?;
    let map = angular_error_map(&result.pipeline.normals, &result.truth.normals, mask)?;
    pfm::write_scalar(&dir.join("error_map.pfm"), &map)?;
    preview::write_error_map(&dir.join("error_map.png"), &map, 10.0)?;
    let oracle_map = angular_error_map(&result.gt_oracle_normals, &result.truth.normals, mask)?;
    pfm::write_scalar(&dir.join("gt_oracle_error_map.pfm"), &oracle_map)?;
    preview::write_error_map(&dir.join("gt_oracle_error_map.png"), &oracle_map, 10.0)?;
    preview::write_normals(&dir.join("normals.png"), &result.pipeline.normals, mask)?;
    print!("{table}");
    Ok(())
}
