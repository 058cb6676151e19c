//! `bmsymp`: run manifest-described pipelines and print reports.
//!
//! Exit status is 0 when every check passes, 1 on a failed check or a
//! pipeline error, 2 on malformed input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bmsymp_cli::manifest::{self, RunSection};
use bmsymp_cli::{pipelines, report, CliError, Settings};

#[derive(Parser)]
#[command(name = "bmsymp", version, about = "b^m-symplectic chart computations from TOML manifests")]
struct Cli {
    /// Tolerance for numeric checks.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Points per axis of sample grids.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Taylor order of Laurent remainders.
    #[arg(long, global = true)]
    taylor_order: Option<i64>,
    /// Seed for the randomized property suites.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Target {
    manifest: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the command named in the manifest's [run] section.
    Run(Target),
    /// Laurent decomposition and modular weights.
    Laurent(Target),
    /// Desingularize and report convergence (even m) or folds (odd m).
    Desingularize {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        /// Write the convergence CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Moment maps, their split and the modular weights.
    MomentMap(Target),
    /// CSV of moment values along the defining coordinate.
    EmitMomentImage {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        clip: Option<f64>,
    },
    /// Marsden-Weinstein reduction.
    Reduce {
        #[command(flatten)]
        target: Target,
        /// Also reduce in the other order and compare.
        #[arg(long)]
        stages: bool,
        /// Slice levels such as `1=1/2`.
        #[arg(long, value_delimiter = ',')]
        level: Option<Vec<String>>,
    },
    /// Compare reduction before and after desingularization.
    CheckCommutation {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
    },
    /// Fusion product of the manifest's quasi-Hamiltonian factors.
    Fuse(Target),
    /// Reduce a quasi-Hamiltonian space at one factor.
    QuasiReduce {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        factor: Option<usize>,
        /// `boundary` or a rational angle.
        #[arg(long)]
        level: Option<String>,
    },
    /// Atiyah-Bott forms in holonomy coordinates.
    AbForm {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        genus: Option<usize>,
        #[arg(long)]
        mark: Option<String>,
        #[arg(long)]
        b2_limit: bool,
    },
    /// Every manifest in a directory plus the engine property suites.
    VerifyAll {
        #[arg(long, default_value = "manifests")]
        dir: PathBuf,
    },
}

/// Subcommand flags applied on top of the manifest's `[run]` section.
type Edit = Box<dyn FnOnce(&mut RunSection)>;

fn load(path: &Path, command: Option<&str>) -> Result<(manifest::Manifest, RunSection), CliError> {
    let m = manifest::load(path)?;
    let mut run = m.run.clone();
    if let Some(c) = command {
        run.command = c.to_string();
    }
    Ok((m, run))
}

fn execute(cli: Cli) -> Result<report::Report, CliError> {
    let settings = Settings { tolerance: cli.tolerance, grid: cli.grid, taylor_order: cli.taylor_order, seed: cli.seed };
    let (path, command, edit): (PathBuf, Option<&str>, Edit) = match cli.command {
        Command::VerifyAll { dir } => return pipelines::verify_all(&dir, &settings),
        Command::Run(t) => (t.manifest, None, Box::new(|_| {})),
        Command::Laurent(t) => (t.manifest, Some("laurent"), Box::new(|_| {})),
        Command::Desingularize { target, epsilons, out } => (
            target.manifest,
            Some("desingularize"),
            Box::new(move |r| {
                if let Some(e) = epsilons {
                    r.epsilons = e;
                }
                if let Some(o) = out {
                    r.output = Some(o.display().to_string());
                }
            }),
        ),
        Command::MomentMap(t) => (t.manifest, Some("moment-map"), Box::new(|_| {})),
        Command::EmitMomentImage { target, out, clip } => (
            target.manifest,
            Some("emit-moment-image"),
            Box::new(move |r| {
                if let Some(o) = out {
                    r.output = Some(o.display().to_string());
                }
                if clip.is_some() {
                    r.clip = clip;
                }
            }),
        ),
        Command::Reduce { target, stages, level } => (
            target.manifest,
            Some("reduce"),
            Box::new(move |r| {
                r.stages |= stages;
                if let Some(l) = level {
                    r.levels = l;
                }
            }),
        ),
        Command::CheckCommutation { target, epsilons } => (
            target.manifest,
            Some("check-commutation"),
            Box::new(move |r| {
                if let Some(e) = epsilons {
                    r.epsilons = e;
                }
            }),
        ),
        Command::Fuse(t) => (t.manifest, Some("fuse"), Box::new(|_| {})),
        Command::QuasiReduce { target, factor, level } => (
            target.manifest,
            Some("quasi-reduce"),
            Box::new(move |r| {
                if factor.is_some() {
                    r.factor = factor;
                }
                if level.is_some() {
                    r.level = level;
                }
            }),
        ),
        Command::AbForm { target, genus, mark, b2_limit } => (
            target.manifest,
            Some("ab-form"),
            Box::new(move |r| {
                if genus.is_some() {
                    r.genus = genus;
                }
                if mark.is_some() {
                    r.mark = mark;
                }
                r.b2_limit |= b2_limit;
            }),
        ),
    };
    let (m, mut run) = load(&path, command)?;
    edit(&mut run);
    pipelines::dispatch(&m, &run, &settings)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(report) => {
            print!("{report}");
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("bmsymp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
