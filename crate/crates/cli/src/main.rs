use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mikado_forge::field::snapshot;
use mikado_forge::geom::{build_decomposition, frobenius, DirectionSet, Mat3};
use mikado_forge::harness::config::{RunConfig, Suite};
use mikado_forge::harness::io::{read_tuple, write_tuple};
use mikado_forge::harness::suites::{family_for, mikado_identities, run_suite, step_params};
use mikado_forge::harness::sweep::{estimate_sweep, SweepAxis, SweepSpec};
use mikado_forge::mikado::{build_family, MikadoOptions};
use mikado_forge::params::check_inequalities;
use mikado_forge::scheme::{step, ReynoldsTuple, TupleNorms};

/// Verification engine for a spectral convex-integration step on the 3-torus.
#[derive(Parser)]
#[command(name = "mikado-forge", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; MIKADO_FORGE_THREADS caps this.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact check of the exponent inequalities, one JSON object per line.
    ParamsCheck,
    /// Field operator and antidivergence identities as a JSON report.
    CheckOperators {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Γ_k² of a symmetric matrix near the identity.
    Decompose {
        /// Nine comma-separated entries, row major.
        #[arg(long, allow_hyphen_values = true)]
        matrix: String,
    },
    /// Write the Mikado fields W_k and Ω_k with a manifest.
    BuildMikado {
        #[arg(long)]
        mu: u64,
        #[arg(long)]
        sigma: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        resolution_factor: Option<f64>,
    },
    /// One iteration step; reads a tuple directory (or starts from zero).
    Step {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Step parameters; defaults to the global --config.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Re-certify the residual of a stored tuple.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Norms of the perturbation and new stress along a parameter ladder.
    Sweep {
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated ladder (1/l for the ell axis).
        #[arg(long, value_delimiter = ',')]
        values: Vec<u64>,
        #[arg(long)]
        perturbation_only: bool,
        #[arg(long)]
        zero_seed: bool,
    },
    /// Every suite in order, with diagnostics and snapshots under --out.
    RunAll,
}

fn load_config(g: &Global, path: Option<&Path>) -> Result<RunConfig> {
    let mut c = match path.or(g.config.as_deref()) {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(o) = &g.out {
        c.out = o.clone();
    }
    if let Some(j) = g.jobs {
        c.jobs = Some(j);
    }
    if let Some(s) = g.seed {
        c.seed = s;
    }
    Ok(c)
}

fn thread_count(jobs: Option<usize>) -> Option<usize> {
    let cap = std::env::var("MIKADO_FORGE_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|n| *n > 0);
    match (jobs, cap) {
        (Some(j), Some(c)) => Some(j.min(c)),
        (j, c) => j.or(c),
    }
}

fn println_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string(v).expect("JSON values serialise"));
}

fn parse_matrix(s: &str) -> Result<Mat3> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad matrix entry {x:?}")))
        .collect::<Result<_>>()?;
    if v.len() != 9 {
        bail!("--matrix needs 9 entries, got {}", v.len());
    }
    Ok([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
}

/// Ok(true) when every check passed.
fn run(cli: Cli) -> Result<bool> {
    let g = &cli.global;
    let params_path = match &cli.command {
        Command::Step { params, .. } => params.clone(),
        _ => None,
    };
    let mut cfg = load_config(g, params_path.as_deref())?;
    if let Some(t) = thread_count(cfg.jobs) {
        cfg.jobs = Some(t);
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring the thread pool")?;
    }

    match cli.command {
        Command::ParamsCheck => {
            let reps = check_inequalities(&cfg.iteration_params(), &cfg.r)?;
            for r in &reps {
                println_json(&r.to_json_line());
            }
            Ok(reps.iter().all(|r| r.holds))
        }
        Command::CheckOperators { n } => {
            if let Some(n) = n {
                cfg.n = n;
            }
            cfg.suites = vec![Suite::Operators, Suite::Antidiv];
            let out = run_suite(&cfg)?;
            println_json(&json!({
                "pass": out.failures == 0,
                "failures": out.failures,
                "records": out.records,
            }));
            Ok(out.failures == 0)
        }
        Command::Decompose { matrix } => {
            let m = parse_matrix(&matrix)?;
            let d = build_decomposition(&DirectionSet::default())?;
            let g2 = d.gamma_sq(&m)?;
            let mut e = d.reconstruct(&g2);
            for (i, row) in e.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v -= m[i][j];
                }
            }
            println_json(&json!({ "gamma_sq": g2, "reconstruction_residual": frobenius(&e), "r0": d.r0 }));
            Ok(true)
        }
        Command::BuildMikado {
            mu,
            sigma,
            n,
            resolution_factor,
        } => {
            let opts = MikadoOptions {
                resolution_factor: resolution_factor.unwrap_or(cfg.resolution_factor),
                ..MikadoOptions::default()
            };
            let dirs = DirectionSet::default();
            let fam = build_family(&dirs, mu, sigma, n, opts)?;
            std::fs::create_dir_all(&cfg.out)?;
            let mut fields = Vec::new();
            for k in 0..fam.len() {
                let (w, om) = (fam.w(k), fam.omega(k));
                let (wn, on) = (format!("w_{k}.mkf"), format!("omega_{k}.mkf"));
                snapshot::write(&w, &cfg.out.join(&wn))?;
                snapshot::write(&om, &cfg.out.join(&on))?;
                fields.push(json!({
                    "direction": dirs.directions[k],
                    "base_point": dirs.base_points[k],
                    "w_file": wn,
                    "omega_file": on,
                    "w_l2": w.l2_norm(),
                    "omega_l2": om.l2_norm(),
                }));
            }
            let checks = mikado_identities(&fam)?;
            let pass = checks.potential <= cfg.tol.mikado
                && checks.mean_ww <= cfg.tol.mikado_mean
                && checks.stationarity <= cfg.tol.mikado;
            let manifest = json!({
                "mu": mu, "sigma": sigma, "n": n, "options": opts,
                "fields": fields, "checks": checks, "pass": pass,
            });
            std::fs::write(cfg.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
            println_json(&json!({ "out": cfg.out, "checks": checks, "pass": pass }));
            Ok(pass)
        }
        Command::Step { input, .. } => {
            cfg.validate()?;
            let tuple = match &input {
                Some(dir) => read_tuple(dir).with_context(|| format!("reading tuple {}", dir.display()))?,
                None => ReynoldsTuple::zero(mikado_forge::field::Grid3::new(cfg.n)?),
            };
            if tuple.grid().n() != cfg.n {
                cfg.n = tuple.grid().n();
                cfg.validate()?;
            }
            let decomp = build_decomposition(&DirectionSet::default())?;
            let fam = family_for(&cfg)?;
            let (next, rep) = step(tuple, &step_params(&cfg), &decomp, &fam)?;
            let manifest = write_tuple(&cfg.out, &next)?;
            std::fs::write(cfg.out.join("report.json"), serde_json::to_string_pretty(&rep)? + "\n")?;
            println_json(&json!({ "out": cfg.out, "stage": manifest.stage, "norms": manifest.norms, "report": rep }));
            Ok(true)
        }
        Command::Verify { input } => {
            let t = read_tuple(&input).with_context(|| format!("reading tuple {}", input.display()))?;
            let norms = TupleNorms::of(&t)?;
            let res = t.certify();
            println_json(&json!({
                "stage": t.stage,
                "residual": norms.residual_l2,
                "residual_tol": t.residual_tol,
                "norms": norms,
                "pass": res.is_ok(),
                "error": res.as_ref().err().map(|e| e.to_string()),
            }));
            Ok(res.is_ok())
        }
        Command::Sweep {
            axis,
            values,
            perturbation_only,
            zero_seed,
        } => {
            let spec = SweepSpec {
                axis,
                values,
                perturbation_only,
                zero_seed,
            };
            let r = estimate_sweep(&cfg, &spec)?;
            std::fs::create_dir_all(&cfg.out)?;
            r.write_csv(&cfg.out.join("sweep.csv"))?;
            r.write_jsonl(&cfg.out.join("sweep.jsonl"))?;
            for (name, t) in &r.slopes {
                println_json(&json!({ "quantity": name, "slope": t.slope, "points": t.points }));
            }
            Ok(true)
        }
        Command::RunAll => {
            let out = run_suite(&cfg)?;
            for r in &out.records {
                let status = if r.pass { "PASS" } else { "FAIL" };
                eprintln!("{status} {}/{}", r.suite, r.check);
            }
            println_json(&json!({
                "records": out.records.len(),
                "failures": out.failures,
                "diagnostics": cfg.out.join("diagnostics.jsonl"),
            }));
            Ok(out.failures == 0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
