//! `affectmorph`: plan, generate, audit and validate circumplex face datasets.
//!
//! Exit codes: 0 success, 1 configuration or validation error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use affectmorph::audit::{stats, validate_manifest, ValidationTarget};
use affectmorph::dataset_io::{
    discover_subjects, generate, plan_dataset, read_manifest, GenerateOptions, PlanReport,
    SubjectSource, MANIFEST_FILE,
};
use affectmorph::{Error, PipelineConfig, Settings};
use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::warn;

#[derive(Parser, Debug)]
#[command(name = "affectmorph", version, about = "Expand expression sets into balanced valence-arousal datasets")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Pipeline configuration file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the input root.
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Override the output root.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Angular step of the template grid, in degrees.
    #[arg(long, global = true)]
    grid_angle_step: Option<f64>,

    /// Radial step of the template grid.
    #[arg(long, global = true)]
    grid_radial_step: Option<f64>,

    /// Add a horizontally mirrored copy of every output.
    #[arg(long, global = true)]
    mirror: bool,

    /// Only subjects whose id matches this glob.
    #[arg(long, global = true)]
    subjects: Option<String>,

    /// Worker threads; defaults to the available hardware concurrency.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print per-subject job counts and the augmentation factor without touching pixels.
    Plan,
    /// Synthesize all images and write the manifest.
    Generate {
        /// Plan only.
        #[arg(long)]
        dry_run: bool,
        /// Regenerate in memory and compare byte-for-byte with the existing output.
        #[arg(long)]
        check_determinism: bool,
    },
    /// Histogram of manifest records per grid cell and per subject.
    Stats {
        /// Manifest path; defaults to the output root's manifest.
        manifest: Option<PathBuf>,
    },
    /// Check every manifest record for consistency, grid membership and file presence.
    Validate {
        manifest: Option<PathBuf>,
        /// Directory file paths are relative to; defaults to the manifest's directory.
        #[arg(long)]
        image_root: Option<PathBuf>,
    },
}

/// Failure classes that map onto exit codes.
enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. }
            | Error::Parse { .. }
            | Error::Domain(_)
            | Error::Planning(_)
            | Error::MissingSidecar(_)
            | Error::Manifest(_) => Failure::Invalid(e.into()),
            _ => Failure::Runtime(e.into()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let settings = settings(&cli.common)?;
    let threads = match cli.common.jobs {
        Some(0) => return Err(Failure::Invalid(anyhow::anyhow!("--jobs must be at least 1"))),
        Some(n) => n,
        None => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("starting worker pool")
        .map_err(Failure::Runtime)?;
    pool.install(|| match cli.command {
        Command::Plan => plan(&settings, &cli.common),
        Command::Generate { dry_run: true, .. } => plan(&settings, &cli.common),
        Command::Generate {
            check_determinism, ..
        } => run_generate(&settings, &cli.common, check_determinism),
        Command::Stats { manifest } => run_stats(&manifest_path(&settings, manifest)),
        Command::Validate { manifest, image_root } => {
            let manifest = manifest_path(&settings, manifest);
            let root = image_root
                .or_else(|| manifest.parent().map(Path::to_path_buf))
                .unwrap_or_default();
            run_validate(&settings, &manifest, &root)
        }
    })
}

/// Config file (or defaults) with command-line overrides, validated as one.
fn settings(common: &Common) -> Result<Settings, Failure> {
    let mut config = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(p) = &common.input {
        config.input_root = p.clone();
    }
    if let Some(p) = &common.output {
        config.output_root = p.clone();
    }
    if let Some(step) = common.grid_angle_step {
        config.grid.angle_step_deg = step;
    }
    if let Some(step) = common.grid_radial_step {
        config.grid.radial_step = step;
    }
    config.mirror |= common.mirror;
    Ok(config.validate()?)
}

fn manifest_path(settings: &Settings, given: Option<PathBuf>) -> PathBuf {
    given.unwrap_or_else(|| settings.output_root.join(MANIFEST_FILE))
}

fn discover(settings: &Settings, common: &Common) -> Result<Vec<SubjectSource>, Failure> {
    let pattern = common
        .subjects
        .as_deref()
        .map(glob::Pattern::new)
        .transpose()
        .context("--subjects")
        .map_err(Failure::Invalid)?;
    let found = discover_subjects(settings, |id| pattern.as_ref().is_none_or(|p| p.matches(id)))?;
    if found.subjects.is_empty() {
        match &common.subjects {
            Some(p) => warn!("no subjects match `{p}`"),
            None => warn!("no subjects under {}", settings.input_root.display()),
        }
    }
    Ok(found.subjects)
}

fn print_plan(report: &PlanReport) {
    for s in &report.subjects {
        println!(
            "{}: {} outputs ({} synthesized, {} pass-through, {} grid points skipped)",
            s.subject_id,
            s.plan.jobs.len(),
            s.plan.synthesized_count(),
            s.plan.pass_through_count(),
            s.plan.skipped.len(),
        );
    }
    let n = report.subjects.len();
    match report.augmentation_factor() {
        Some(f) => println!("{n} subjects, {} outputs, factor {f:.1}x", report.total_outputs()),
        None => println!("{n} subjects, 0 outputs"),
    }
}

fn plan(settings: &Settings, common: &Common) -> Outcome {
    let subjects = discover(settings, common)?;
    let report = plan_dataset(settings, &subjects)?;
    print_plan(&report);
    Ok(())
}

fn run_generate(settings: &Settings, common: &Common, check: bool) -> Outcome {
    let started = Instant::now();
    let subjects = discover(settings, common)?;
    // surface planning errors before any pixel work
    plan_dataset(settings, &subjects)?;
    let report = generate(settings, &subjects, GenerateOptions { check_only: check })?;
    let elapsed = started.elapsed().as_secs_f64();

    if report.degenerate_triangles > 0 {
        warn!("{} degenerate triangles skipped", report.degenerate_triangles);
    }
    for f in &report.failures {
        eprintln!("subject {} failed: {}", f.subject_id, f.error);
    }
    if check {
        for path in &report.mismatches {
            eprintln!("differs: {}", path.display());
        }
        println!(
            "determinism check: {} images, {} mismatches",
            report.images,
            report.mismatches.len()
        );
    } else {
        println!(
            "{} subjects, {} images, {} degenerate triangles, {elapsed:.2}s",
            report.subjects_done, report.images, report.degenerate_triangles
        );
    }
    if !report.failures.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!("{} subjects failed", report.failures.len())));
    }
    if !report.mismatches.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!("output differs from a fresh run")));
    }
    Ok(())
}

fn run_stats(manifest: &Path) -> Outcome {
    let records = read_manifest(manifest)?;
    let s = stats(&records);
    println!("angle_deg ratio mirrored count");
    for (cell, count) in &s.cells {
        let flag = if s.short_cells.contains(cell) { " short" } else { "" };
        println!(
            "{:.3} {:.3} {} {count}{flag}",
            cell.angle_deg(),
            cell.ratio(),
            u8::from(cell.mirrored)
        );
    }
    for (mirrored, count) in &s.neutral {
        println!("neutral {} {count}", u8::from(*mirrored));
    }
    println!("subject totals:");
    for (id, count) in &s.per_subject {
        println!("{id} {count}");
    }
    println!(
        "{} cells, {} subjects, {} short cells",
        s.cells.len(),
        s.subject_count(),
        s.short_cells.len()
    );
    Ok(())
}

fn run_validate(settings: &Settings, manifest: &Path, root: &Path) -> Outcome {
    let records = read_manifest(manifest)?;
    let target = ValidationTarget {
        image_root: root,
        grid: &settings.grid,
        mode: settings.plan.mode,
        canvas: (settings.frame.width, settings.frame.height),
    };
    let violations = validate_manifest(&records, &target);
    for v in &violations {
        println!("{v}");
    }
    println!("{} records, {} violations", records.len(), violations.len());
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invalid(anyhow::anyhow!("{} violations", violations.len())))
    }
}
