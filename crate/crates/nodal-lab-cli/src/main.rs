use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

mod commands;
mod config;

use commands::{AsymptArgs, Output, QuadArgs};
use config::Resolver;

/// Report format identifier; bump when fields change meaning.
const SCHEMA: &str = "nodal-lab/report/v1";

#[derive(Debug, Parser)]
#[command(
    name = "nodal-lab",
    version,
    about = "Chaos, variance and Kac-Rice numerics for nodal volumes on spheres"
)]
struct Cli {
    /// Run file of `key = value` lines; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, env = "NODAL_LAB_THREADS")]
    threads: Option<usize>,
    /// Output stem; writes <stem>.json and <stem>.csv (defaults to the subcommand name)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact identity certificates for the chaos polynomials
    VerifyIdentities {
        #[arg(long)]
        qmax: Option<u32>,
        #[arg(long)]
        dmax: Option<u32>,
    },
    /// Chaos-by-chaos nodal variance
    Variance {
        #[arg(long)]
        d: Option<u32>,
        #[arg(long)]
        ells: Option<String>,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Log-log slope of the total variance in ℓ
    Scaling {
        #[arg(long)]
        d: Option<u32>,
        #[arg(long)]
        ells: Option<String>,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Nodal variance against the second chaos of a nonzero level
    Berry {
        #[arg(long)]
        d: Option<u32>,
        #[arg(long)]
        u: Option<f64>,
        #[arg(long)]
        ells: Option<String>,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Nodal lengths of simulated spherical harmonics on S²
    Simulate {
        #[arg(long)]
        d: Option<u32>,
        #[arg(long)]
        ell: Option<u32>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Grid points per great circle (at least 8ℓ)
        #[arg(long)]
        resolution: Option<u32>,
    },
    /// One-point Monte Carlo estimate of the mean nodal volume
    MeanCheck {
        #[arg(long)]
        d: Option<u32>,
        #[arg(long)]
        ell: Option<u32>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Residual decay of the Gegenbauer asymptotics and related bounds
    Asympt(AsymptArgs),
    /// Chaos-sum variance against the integrated two-point function
    KacriceCrosscheck {
        #[arg(long)]
        d: Option<u32>,
        #[arg(long)]
        ells: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        quad: QuadArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyIdentities { .. } => "verify-identities",
            Command::Variance { .. } => "variance",
            Command::Scaling { .. } => "scaling",
            Command::Berry { .. } => "berry",
            Command::Simulate { .. } => "simulate",
            Command::MeanCheck { .. } => "mean-check",
            Command::Asympt(_) => "asympt",
            Command::KacriceCrosscheck { .. } => "kacrice-crosscheck",
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    schema: &'static str,
    command: &'a str,
    library_version: &'static str,
    rng: &'static str,
    config: &'a BTreeMap<String, String>,
    pass: bool,
    results: &'a serde_json::Value,
}

/// Rendered outputs of one run.
struct Rendered {
    pass: bool,
    json: String,
    csv: Vec<u8>,
    stem: PathBuf,
}

fn dispatch(cmd: &Command, r: &mut Resolver) -> Result<Output> {
    match cmd {
        Command::VerifyIdentities { qmax, dmax } => commands::verify_identities(r, *qmax, *dmax),
        Command::Variance { d, ells, quad } => commands::variance(r, *d, ells.clone(), quad),
        Command::Scaling { d, ells, quad } => commands::scaling(r, *d, ells.clone(), quad),
        Command::Berry { d, u, ells, quad } => commands::berry(r, *d, *u, ells.clone(), quad),
        Command::Simulate {
            d,
            ell,
            draws,
            seed,
            resolution,
        } => commands::simulate(r, *d, *ell, *draws, *seed, *resolution),
        Command::MeanCheck {
            d,
            ell,
            eps,
            samples,
            seed,
        } => commands::mean_check(r, *d, *ell, *eps, *samples, *seed),
        Command::Asympt(a) => commands::asympt(r, a),
        Command::KacriceCrosscheck { d, ells, tol, quad } => {
            commands::kacrice_crosscheck(r, *d, ells.clone(), *tol, quad)
        }
    }
}

fn load_file(cli: &Cli) -> Result<BTreeMap<String, String>> {
    match &cli.config {
        Some(p) => config::load(p),
        None => Ok(BTreeMap::new()),
    }
}

/// Thread count: flag or environment, then the run file, then all cores.
fn thread_count(cli: &Cli, file: &BTreeMap<String, String>) -> Result<usize> {
    Resolver::new(file.clone()).value("threads", cli.threads, 0usize)
}

/// Resolves settings and runs the subcommand on the current rayon pool.
fn render(cli: &Cli, file: BTreeMap<String, String>) -> Result<Rendered> {
    let mut r = Resolver::new(file);
    // consumed here so the run file may carry it; the pool is set up by the caller
    let _ = r.value("threads", cli.threads, 0usize)?;
    let stem = r.value(
        "out",
        cli.out.as_ref().map(|p| p.display().to_string()),
        cli.cmd.name().to_string(),
    )?;
    let out = dispatch(&cli.cmd, &mut r)?;
    let mut echo = r.finish()?;
    // the thread count never changes results, so keep it out of the report
    echo.remove("threads");
    let report = Report {
        schema: SCHEMA,
        command: cli.cmd.name(),
        library_version: nodal_lab::VERSION,
        rng: nodal_lab::mc::RNG_NAME,
        config: &echo,
        pass: out.pass,
        results: &out.results,
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    Ok(Rendered {
        pass: out.pass,
        json,
        csv: out.csv,
        stem: PathBuf::from(stem),
    })
}

fn write_outputs(out: &Rendered) -> Result<(PathBuf, PathBuf)> {
    let json_path = out.stem.with_extension("json");
    let csv_path = out.stem.with_extension("csv");
    if let Some(dir) = json_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(&json_path, &out.json).with_context(|| format!("writing {}", json_path.display()))?;
    std::fs::write(&csv_path, &out.csv).with_context(|| format!("writing {}", csv_path.display()))?;
    Ok((json_path, csv_path))
}

fn run(cli: &Cli) -> Result<(Rendered, PathBuf, PathBuf)> {
    let file = load_file(cli)?;
    let n = thread_count(cli, &file)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("starting worker pool")?;
    let out = render(cli, file)?;
    let (j, c) = write_outputs(&out)?;
    Ok((out, j, c))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    match run(&cli) {
        Ok((out, j, c)) => {
            println!(
                "{} {}: wrote {} and {}",
                if out.pass { "PASS" } else { "FAIL" },
                cli.cmd.name(),
                j.display(),
                c.display()
            );
            eprintln!(
                "{} threads, {:.2}s",
                rayon::current_num_threads(),
                start.elapsed().as_secs_f64()
            );
            if out.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("nodal-lab").chain(args.iter().copied())).unwrap()
    }

    fn in_pool(n: usize, c: &Cli) -> Rendered {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| render(c, BTreeMap::new()).unwrap())
    }

    #[test]
    fn reports_do_not_depend_on_threads() {
        let c = cli(&[
            "mean-check",
            "--d",
            "3",
            "--ell",
            "5",
            "--samples",
            "200000",
            "--seed",
            "3",
        ]);
        let (a, b) = (in_pool(1, &c), in_pool(3, &c));
        assert_eq!(a.csv, b.csv);
        assert_eq!(a.json, b.json);
    }

    #[test]
    fn report_echoes_resolved_config() {
        let c = cli(&["verify-identities", "--qmax", "2", "--out", "runs/ids"]);
        let file = config::parse("dmax = 3").unwrap();
        let out = render(&c, file).unwrap();
        assert!(out.pass);
        let v: serde_json::Value = serde_json::from_str(&out.json).unwrap();
        assert_eq!(v["config"]["qmax"], "2");
        assert_eq!(v["config"]["dmax"], "3");
        assert_eq!(v["schema"], SCHEMA);
        assert_eq!(out.stem.with_extension("csv"), PathBuf::from("runs/ids.csv"));
        assert!(String::from_utf8(out.csv)
            .unwrap()
            .starts_with("identity,params,passed,monomials\n"));
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(render(&cli(&["variance", "--ells", ""]), BTreeMap::new()).is_err());
        assert!(render(&cli(&["simulate", "--d", "3"]), BTreeMap::new()).is_err());
        assert!(render(&cli(&["asympt", "--check", "nope"]), BTreeMap::new()).is_err());
        assert!(render(&cli(&["variance"]), config::parse("colour = red").unwrap()).is_err());
    }
}
