use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use moduli_core::certify::{run_certify, CertificateReport, Suite};
use moduli_core::density::{run_density, DensityExperiment};
use moduli_core::io::{self, SpaceFile};
use moduli_core::manifold::{ManifoldSidecar, ManifoldSpec};
use moduli_core::smooth::{sl_bound_with, SlOptions};
use moduli_core::{
    eps_bound, eps_exact, gh_bound, gh_exact, lip_bound, lip_exact, FiniteMetricSpace, Tolerance,
};

#[derive(Parser)]
#[command(
    name = "moduli",
    version,
    about = "Distances between metrics on finite and sampled spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a space file holds a valid metric.
    Validate {
        path: PathBuf,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Sample a manifold description into a space file plus a parameter sidecar.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `<out>.sidecar.json`.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Overrides the seed in the description.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute or bound a distance.
    #[command(subcommand)]
    Dist(Dist),
    /// Run a seeded experiment.
    #[command(subcommand)]
    Experiment(Experiment),
    /// Check the comparison inequalities on seeded random instances.
    Certify {
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..))]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol_abs: f64,
        #[arg(long, default_value_t = 0.0)]
        tol_rel: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TolArgs {
    #[arg(long, default_value_t = 0.0)]
    tol_abs: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol_rel: f64,
}

impl TolArgs {
    fn tolerance(&self) -> Result<Tolerance> {
        Ok(Tolerance::new(self.tol_abs, self.tol_rel)?)
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Exact,
    Anneal,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    #[arg(long, default_value_t = 20_000)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Subcommand)]
enum Dist {
    /// Gromov-Hausdorff distance.
    Gh(PairArgs),
    /// ε-isometry distance.
    Eps(PairArgs),
    /// Lipschitz distance.
    Lip(PairArgs),
    /// Smooth-Lipschitz distance between two sampled manifolds.
    Sl {
        #[arg(long)]
        manifold_x: PathBuf,
        #[arg(long)]
        manifold_y: PathBuf,
        #[arg(long, default_value_t = 1)]
        degree: usize,
        #[arg(long, default_value_t = 2000)]
        budget: u64,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Experiment {
    /// Pull a base metric toward a target within its conformal class.
    ConformalDensity {
        #[arg(long)]
        config: PathBuf,
        /// History CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON report with the best metric found.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct DistRecord<R: Serialize> {
    distance: &'static str,
    x: String,
    y: String,
    seed: u64,
    budget: u64,
    wall_ms: u64,
    #[serde(flatten)]
    result: R,
}

/// Outcome of a command that ran to completion.
enum Status {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<Status> {
    match command {
        Command::Validate { path, tol } => {
            let x = load_space(&path, tol.tolerance()?)?;
            println!(
                "{}: valid metric on {} points, diameter {:?}",
                path.display(),
                x.len(),
                x.diameter()
            );
            Ok(Status::Pass)
        }
        Command::Gen {
            spec,
            out,
            sidecar,
            seed,
        } => {
            let mut spec: ManifoldSpec = load_json(&spec)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let m = spec.build()?;
            io::save_space(&out, m.space())?;
            let sidecar = sidecar.unwrap_or_else(|| out.with_extension("sidecar.json"));
            io::save_json(&sidecar, &ManifoldSidecar::new(&m))?;
            eprintln!("wrote {} and {}", out.display(), sidecar.display());
            Ok(Status::Pass)
        }
        Command::Dist(d) => dist(d),
        Command::Experiment(Experiment::ConformalDensity {
            config,
            out,
            report,
        }) => {
            let exp: DensityExperiment = load_json(&config)?;
            let rep = run_density(&exp)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            rep.write_csv(BufWriter::new(file))
                .with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = report {
                io::save_json(&path, &rep)?;
            }
            eprintln!(
                "seed {}: gh upper {:?} -> {:?} (lower {:?}), {}",
                exp.seed,
                rep.initial_upper,
                rep.final_upper,
                rep.final_lower,
                if rep.passed { "passed" } else { "FAILED" }
            );
            Ok(if rep.passed {
                Status::Pass
            } else {
                Status::Fail
            })
        }
        Command::Certify {
            suite,
            trials,
            seed,
            tol_abs,
            tol_rel,
            out,
        } => {
            let tol = Tolerance::new(tol_abs, tol_rel)?;
            let rep = run_certify(suite, trials, seed, tol);
            print_report(&rep);
            let json = io::to_json(&rep);
            match out {
                Some(path) => io::write_text(&path, &json)?,
                None => print!("{json}"),
            }
            Ok(if rep.pass { Status::Pass } else { Status::Fail })
        }
    }
}

fn dist(d: Dist) -> Result<Status> {
    match d {
        Dist::Gh(a) => pair(a, "gh", |x, y, m, budget, seed| {
            Ok(match m {
                MethodArg::Exact => gh_exact(x, y)?,
                MethodArg::Anneal => gh_bound(x, y, budget, seed),
            })
        }),
        Dist::Eps(a) => pair(a, "eps", |x, y, m, budget, seed| {
            Ok(match m {
                MethodArg::Exact => eps_exact(x, y)?,
                MethodArg::Anneal => eps_bound(x, y, budget, seed),
            })
        }),
        Dist::Lip(a) => pair(a, "lip", |x, y, m, budget, seed| {
            Ok(match m {
                MethodArg::Exact => lip_exact(x, y)?,
                MethodArg::Anneal => lip_bound(x, y, budget, seed),
            })
        }),
        Dist::Sl {
            manifold_x,
            manifold_y,
            degree,
            budget,
            restarts,
            seed,
            out,
        } => {
            if restarts == 0 {
                bail!("--restarts must be at least 1");
            }
            let mx: ManifoldSpec = load_json(&manifold_x)?;
            let my: ManifoldSpec = load_json(&manifold_y)?;
            let (a, b) = (mx.build()?, my.build()?);
            let start = Instant::now();
            let opts = SlOptions {
                degree,
                budget,
                restarts,
            };
            let result = sl_bound_with(&a, &b, &opts, seed)?;
            #[derive(Serialize)]
            struct SlRecord<R> {
                degree: usize,
                restarts: usize,
                #[serde(flatten)]
                result: R,
            }
            let record = DistRecord {
                distance: "sl",
                x: manifold_x.display().to_string(),
                y: manifold_y.display().to_string(),
                seed,
                budget,
                wall_ms: start.elapsed().as_millis() as u64,
                result: SlRecord {
                    degree,
                    restarts,
                    result,
                },
            };
            emit(&record, out.as_deref())?;
            Ok(Status::Pass)
        }
    }
}

fn pair<R, F>(a: PairArgs, distance: &'static str, compute: F) -> Result<Status>
where
    R: Serialize,
    F: FnOnce(&FiniteMetricSpace, &FiniteMetricSpace, MethodArg, u64, u64) -> Result<R>,
{
    let tol = a.tol.tolerance()?;
    let x = load_space(&a.x, tol)?;
    let y = load_space(&a.y, tol)?;
    let start = Instant::now();
    let result = compute(&x, &y, a.method, a.budget, a.seed)?;
    let record = DistRecord {
        distance,
        x: a.x.display().to_string(),
        y: a.y.display().to_string(),
        seed: a.seed,
        budget: a.budget,
        wall_ms: start.elapsed().as_millis() as u64,
        result,
    };
    emit(&record, a.out.as_deref())?;
    Ok(Status::Pass)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let json = io::to_json(value);
    match out {
        Some(path) => io::write_text(path, &json)?,
        None => print!("{json}"),
    }
    Ok(())
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    io::load_json(path).with_context(|| format!("reading {}", path.display()))
}

fn load_space(path: &Path, tol: Tolerance) -> Result<FiniteMetricSpace> {
    let file: SpaceFile = load_json(path)?;
    file.into_space(tol)
        .with_context(|| format!("validating {}", path.display()))
}

fn print_report(rep: &CertificateReport) {
    let width = rep.entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
    for e in &rep.entries {
        eprintln!(
            "{:<width$}  {:>6}  {:<24}  {}",
            e.name,
            e.instances,
            format!("{:?}", e.max_violation),
            if e.pass { "pass" } else { "FAIL" }
        );
    }
    eprintln!(
        "suite {} seed {} trials {}: {}",
        rep.suite,
        rep.seed,
        rep.trials,
        if rep.pass { "pass" } else { "FAIL" }
    );
}
