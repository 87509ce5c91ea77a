//! The verification suites behind `run-all`.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::antidiv::{antidiv, antidiv_scaling_study, bilinear_antidiv, contract};
use crate::error::{Error, Result};
use crate::field::norms::sobolev_norm;
use crate::field::ops::{curl, div, grad, inv_laplacian, laplacian, leray};
use crate::field::product::mul;
use crate::field::studies::{commutator_study, improved_holder_study};
use crate::field::{mollify, Grid3, Rank, SpectralField};
use crate::geom::{build_decomposition, frobenius, identity3, DirectionSet, GeometricDecomposition, Mat3};
use crate::mikado::{build_family, overlap_study, scaling_study, MikadoFamily, MikadoOptions};
use crate::params::{check_inequalities, fmt_q, q_to_f64};
use crate::scheme::{compatible_tuple, step, weak_check, ReynoldsTuple, StepParams, StepReport};

use super::config::{RunConfig, Suite};
use super::diagnostics::{Diagnostics, DiagnosticsRecord};
use super::golden::Golden;
use super::io::write_tuple;

/// What `run_suite` hands back; `failures > 0` maps to a nonzero exit status.
#[derive(Debug)]
pub struct SuiteOutcome {
    pub records: Vec<DiagnosticsRecord>,
    pub failures: usize,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    diag: &'a mut Diagnostics,
    golden: &'a Golden,
}

impl Ctx<'_> {
    fn emit(&mut self, suite: Suite, check: &str, values: Value, threshold: Option<f64>, pass: bool, t0: Instant) -> Result<()> {
        self.diag.push(DiagnosticsRecord {
            suite: suite.name().into(),
            check: check.into(),
            values,
            threshold,
            pass,
            wall_seconds: t0.elapsed().as_secs_f64(),
        })
    }

    /// `measured ≤ threshold`.
    fn below(&mut self, suite: Suite, check: &str, measured: f64, threshold: f64, t0: Instant) -> Result<()> {
        let pass = measured <= threshold;
        self.emit(suite, check, json!({ "measured": measured }), Some(threshold), pass, t0)
    }

    fn golden(&mut self, suite: Suite, key: &str, measured: f64) -> Result<()> {
        let t0 = Instant::now();
        let band = self.cfg.tol.golden_band;
        match self.golden.check(key, measured, band, &self.cfg.scheme_fingerprint()) {
            Some(g) => self.emit(
                suite,
                &format!("golden:{key}"),
                json!({ "measured": g.measured, "golden": g.golden, "relative_error": g.relative_error }),
                Some(band),
                g.pass,
                t0,
            ),
            None => Ok(()),
        }
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
    }
}

/// Validate `cfg`, then run the selected suites in a fixed order, writing
/// `config.txt`, `diagnostics.jsonl` and tuple snapshots under `cfg.out`.
pub fn run_suite(cfg: &RunConfig) -> Result<SuiteOutcome> {
    cfg.validate()?;
    let golden = match &cfg.golden {
        Some(p) => Golden::load(p)?,
        None => Golden::builtin(),
    };
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(cfg.out.join("config.txt"), cfg.to_text())?;
    let mut diag = Diagnostics::to_file(&cfg.out.join("diagnostics.jsonl"))?;
    let mut ctx = Ctx {
        cfg,
        diag: &mut diag,
        golden: &golden,
    };
    for suite in Suite::ALL {
        if !cfg.wants(suite) {
            continue;
        }
        let r = match suite {
            Suite::Params => params_suite(&mut ctx),
            Suite::Operators => operators_suite(&mut ctx),
            Suite::Geom => geom_suite(&mut ctx),
            Suite::Mikado => mikado_suite(&mut ctx),
            Suite::Antidiv => antidiv_suite(&mut ctx),
            Suite::Scheme => scheme_suite(&mut ctx),
        };
        if let Err(e) = r {
            // A suite that cannot finish is itself a failed check.
            let t0 = Instant::now();
            ctx.emit(suite, "completed", json!({ "error": e.to_string() }), None, false, t0)?;
        }
    }
    let failures = diag.failures();
    Ok(SuiteOutcome {
        records: diag.records,
        failures,
    })
}

fn params_suite(ctx: &mut Ctx) -> Result<()> {
    let s = Suite::Params;
    let t0 = Instant::now();
    let p = ctx.cfg.iteration_params();
    let g = p.gamma();
    ctx.emit(s, "gamma", json!({ "exact": fmt_q(&g), "float": q_to_f64(&g) }), None, true, t0)?;
    for rep in check_inequalities(&p, &ctx.cfg.r)? {
        let t0 = Instant::now();
        ctx.emit(s, &rep.name, rep.to_json_line(), Some(0.0), rep.holds, t0)?;
    }
    Ok(())
}

fn rel(a: &SpectralField, b: &SpectralField) -> Result<f64> {
    Ok(a.sub(b)?.l2_norm() / (b.l2_norm() + 1e-300))
}

fn operators_suite(ctx: &mut Ctx) -> Result<()> {
    let s = Suite::Operators;
    let tol = ctx.cfg.tol.operator;
    let g = Grid3::new(ctx.cfg.n)?;
    let mut rng = ctx.rng(1);
    let kmax = (g.kmax() / 2).max(1);
    let v = SpectralField::random(g, Rank::Vector, kmax, &mut rng);
    let f = SpectralField::random(g, Rank::Scalar, kmax, &mut rng);
    let h1 = sobolev_norm(&v, 1.0, false)?;

    let t0 = Instant::now();
    let m = div(&curl(&v)?)?.l2_norm() / (sobolev_norm(&v, 1.0, true)? * h1 + 1e-300);
    ctx.below(s, "div_curl", m, tol, t0)?;

    let t0 = Instant::now();
    let m = curl(&grad(&f)?)?.l2_norm() / (sobolev_norm(&f, 1.0, false)? + 1e-300);
    ctx.below(s, "curl_grad", m, tol, t0)?;

    let t0 = Instant::now();
    let m = div(&leray(&v)?)?.l2_norm() / (h1 + 1e-300);
    ctx.below(s, "leray_divergence_free", m, tol, t0)?;

    let t0 = Instant::now();
    let m = rel(&laplacian(&inv_laplacian(&f.clone().sub_mean())?), &f.clone().sub_mean())?;
    ctx.below(s, "laplacian_inverse", m, tol, t0)?;

    // Dealiased products: truncation commutes with derivatives.
    let t0 = Instant::now();
    let lhs = div(&mul(&f, &v)?)?;
    let mut rhs = mul(&f, &div(&v)?)?;
    let gf = grad(&f)?;
    for i in 0..3 {
        rhs.axpy(1.0, &mul(&gf.component(i), &v.component(i))?)?;
    }
    ctx.below(s, "product_rule", rel(&lhs, &rhs)?, tol, t0)?;

    let t0 = Instant::now();
    let c = SpectralField::constant(g, Rank::Scalar, &[1.7])?;
    ctx.below(s, "mollify_constant", rel(&mollify(&c, 0.2)?, &c)?, tol, t0)?;

    let g32 = Grid3::new(32)?;
    let sine = SpectralField::from_fn(g32, Rank::Scalar, |x, o| o[0] = (std::f64::consts::TAU * x[0]).sin());
    let t0 = Instant::now();
    let t = commutator_study(&sine, &sine, &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], 0, 2.0)?;
    let bound = ctx.cfg.tol.commutator_slope;
    ctx.emit(s, "commutator_slope", json!({ "slope": t.slope, "points": t.points }), Some(bound), t.slope_at_least(bound), t0)?;

    let t0 = Instant::now();
    let r = 2.0;
    let smooth = SpectralField::from_fn(g32, Rank::Scalar, |x, o| {
        o[0] = 1.0 / (1.6 + (std::f64::consts::TAU * (x[0] - 0.1)).cos())
    });
    let pos = SpectralField::from_fn(g32, Rank::Scalar, |x, o| o[0] = 2.0 + (std::f64::consts::TAU * x[0]).sin());
    let t = improved_holder_study(&smooth, &pos, &[2, 4, 8], r, 4)?;
    let bound = -1.0 / r + ctx.cfg.tol.holder_slack;
    ctx.emit(s, "improved_holder_slope", json!({ "slope": t.slope, "points": t.points }), Some(bound), t.slope_at_most(bound), t0)?;
    Ok(())
}

/// Random symmetric S with ‖S‖_F = radius.
fn random_symmetric<R: Rng>(rng: &mut R, radius: f64) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v: f64 = rng.gen_range(-1.0..1.0);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    let n = frobenius(&m);
    m.map(|row| row.map(|v| v * radius / n))
}

fn geom_suite(ctx: &mut Ctx) -> Result<()> {
    let s = Suite::Geom;
    let t0 = Instant::now();
    let d = build_decomposition(&DirectionSet::default())?;
    ctx.emit(
        s,
        "certified_radius",
        json!({ "r0": d.r0, "c": d.c }),
        Some(0.0),
        d.r0 > 0.0 && d.c.iter().all(|c| *c > 0.0),
        t0,
    )?;
    ctx.golden(s, "r0", d.r0)?;

    let t0 = Instant::now();
    let mut rng = ctx.rng(2);
    let (mut worst, mut min_ratio) = (0.0f64, f64::INFINITY);
    for _ in 0..ctx.cfg.geom_samples {
        let radius = d.r0 * rng.gen_range(0.0f64..1.0).cbrt();
        let sm = random_symmetric(&mut rng, radius);
        let mut r = identity3();
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] += sm[i][j];
            }
        }
        let g2 = d.gamma_sq(&r)?;
        min_ratio = min_ratio.min(g2.iter().cloned().fold(f64::INFINITY, f64::min) / d.c_min());
        let back = d.reconstruct(&g2);
        let mut e = back;
        for i in 0..3 {
            for j in 0..3 {
                e[i][j] -= r[i][j];
            }
        }
        worst = worst.max(frobenius(&e));
    }
    ctx.below(s, "reconstruction", worst, ctx.cfg.tol.geom, t0)?;
    let t0 = Instant::now();
    ctx.emit(s, "gamma_lower_bound", json!({ "min_gamma_sq_over_cmin": min_ratio }), Some(0.5), min_ratio >= 0.5, t0)?;
    Ok(())
}

pub fn family_for(cfg: &RunConfig) -> Result<MikadoFamily> {
    let opts = MikadoOptions {
        resolution_factor: cfg.resolution_factor,
        ..MikadoOptions::default()
    };
    build_family(&DirectionSet::default(), cfg.mu, cfg.sigma, cfg.n, opts)
}

/// Worst-case defects over all directions of a family, at base scale.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MikadoIdentities {
    /// ‖div Ω_k − W_k‖ / ‖W_k‖.
    pub potential: f64,
    /// max entry of |∮W_k⊗W_k − e_k⊗e_k|.
    pub mean_ww: f64,
    /// ‖div(W_k⊗W_k)‖ / (‖W_k‖ ‖W_k‖_{Ḣ¹}).
    pub stationarity: f64,
}

pub fn mikado_identities(fam: &MikadoFamily) -> Result<MikadoIdentities> {
    let (mut pot, mut mean_err, mut stat) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..fam.len() {
        let w = fam.w_base(k);
        let scale = w.l2_norm();
        pot = pot.max(rel(&div(&fam.omega_base(k))?, &w)?);
        let ww = fam.ww_base(k)?;
        let e = fam.unit(k);
        for (c, m) in ww.mean().iter().enumerate() {
            mean_err = mean_err.max((m - e[c / 3] * e[c % 3]).abs());
        }
        stat = stat.max(div(&ww)?.l2_norm() / (scale * sobolev_norm(&w, 1.0, true)? + 1e-300));
    }
    Ok(MikadoIdentities {
        potential: pot,
        mean_ww: mean_err,
        stationarity: stat,
    })
}

fn mikado_suite(ctx: &mut Ctx) -> Result<()> {
    let s = Suite::Mikado;
    let t0 = Instant::now();
    let fam = family_for(ctx.cfg)?;
    let MikadoIdentities {
        potential: pot,
        mean_ww: mean_err,
        stationarity: stat,
    } = mikado_identities(&fam)?;
    let tol = ctx.cfg.tol.clone();
    ctx.below(s, "potential_identity", pot, tol.mikado, t0)?;
    ctx.below(s, "mean_ww", mean_err, tol.mikado_mean, t0)?;
    ctx.below(s, "stationarity", stat, tol.mikado, t0)?;

    let t0 = Instant::now();
    let opts = MikadoOptions {
        resolution_factor: ctx.cfg.resolution_factor,
        ..MikadoOptions::default()
    };
    let ps = [1.0, 2.0, 4.0];
    let study = scaling_study(&DirectionSet::default(), &ctx.cfg.mikado_mu, &ps, opts)?;
    let tol = ctx.cfg.tol.slope;
    for (label, tables, expected) in [
        ("w_lp_slopes", &study.w, (|p: f64| 1.0 - 2.0 / p) as fn(f64) -> f64),
        ("omega_lp_slopes", &study.omega, |p: f64| -2.0 / p),
    ] {
        let mut worst = 0.0f64;
        let mut fitted = Vec::new();
        for (ip, p) in ps.iter().enumerate() {
            let row: Vec<f64> = tables.iter().map(|t| t[ip].slope.unwrap_or(f64::NAN)).collect();
            for sl in &row {
                let d = (sl - expected(*p)).abs();
                worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
            }
            fitted.push(json!({ "p": p, "expected": expected(*p), "slopes": row }));
        }
        let pass = worst <= tol;
        ctx.emit(s, label, json!({ "worst_deviation": worst, "fits": fitted }), Some(tol), pass, t0)?;
    }

    let t0 = Instant::now();
    let p = 2.0;
    let ov = overlap_study(&DirectionSet::default(), (0, 5), &ctx.cfg.mikado_mu, p, opts)?;
    let bound = 2.0 - 3.0 / p + ctx.cfg.tol.overlap_slope;
    ctx.emit(
        s,
        "overlap_slope",
        json!({ "pair": [0, 5], "slope": ov.table.slope, "points": ov.table.points }),
        Some(bound),
        ov.table.slope_at_most(bound),
        t0,
    )?;
    Ok(())
}

fn antidiv_suite(ctx: &mut Ctx) -> Result<()> {
    let s = Suite::Antidiv;
    let g = Grid3::new(ctx.cfg.n)?;
    let mut rng = ctx.rng(3);
    let kmax = (g.kmax() / 2).max(1);
    let t0 = Instant::now();
    let (mut lin, mut bil) = (0.0f64, 0.0f64);
    for _ in 0..ctx.cfg.antidiv_samples {
        let v = SpectralField::random(g, Rank::Vector, kmax, &mut rng);
        lin = lin.max(rel(&div(&antidiv(&v)?)?, &v.clone().sub_mean())?);
        let u = SpectralField::random(g, Rank::Vector, kmax / 2 + 1, &mut rng);
        let h = SpectralField::random(g, Rank::Tensor, kmax / 2 + 1, &mut rng).sub_mean();
        let uh = contract(&u, &h)?;
        bil = bil.max(div(&bilinear_antidiv(&u, &h)?)?.sub(&uh.clone().sub_mean())?.l2_norm() / (uh.l2_norm() + 1e-300));
    }
    ctx.below(s, "right_inverse", lin, ctx.cfg.tol.antidiv, t0)?;
    let t0 = Instant::now();
    ctx.below(s, "bilinear_right_inverse", bil, ctx.cfg.tol.bilinear, t0)?;

    let t0 = Instant::now();
    let g64 = Grid3::new(64)?;
    let u = SpectralField::from_fn(g64, Rank::Vector, |x, o| {
        o[0] = (std::f64::consts::TAU * x[0]).sin();
        o[1] = 0.0;
        o[2] = 0.0;
    });
    let t = antidiv_scaling_study(&u, &[2, 4, 8, 16], 1.5, 2)?;
    let bound = ctx.cfg.tol.antidiv_slope;
    ctx.emit(s, "sigma_gain", json!({ "slope": t.slope, "points": t.points }), Some(bound), t.slope_at_most(bound), t0)?;
    Ok(())
}

/// Divergence-free seed of L² size `amplitude` with modes |k_i| ≤ `kmax`,
/// drawn on a small grid so the same seed embeds into every resolution.
pub fn seed_field(grid: Grid3, amplitude: f64, kmax: i64, seed: u64) -> Result<SpectralField> {
    let small = Grid3::new((2 * kmax as usize + 2).max(4))?;
    if grid.kmax() < kmax {
        return Err(Error::Resolution(format!("grid {} cannot carry seed modes up to {kmax}", grid.n())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let b = leray(&SpectralField::random(small, Rank::Vector, kmax, &mut rng).sub_mean())?;
    let norm = b.l2_norm();
    let scale = if norm > 0.0 { amplitude / norm } else { 0.0 };
    Ok(b.scale(scale).resample(grid))
}

pub fn seeded_tuple(cfg: &RunConfig, grid: Grid3) -> Result<ReynoldsTuple> {
    let b = seed_field(grid, cfg.seed_amplitude, cfg.seed_kmax, cfg.seed)?;
    let scale = 1.0 + sobolev_norm(&b, 1.0, false)?.powi(2);
    compatible_tuple(b, 0, cfg.tol.residual * scale)
}

pub fn step_params(cfg: &RunConfig) -> StepParams {
    StepParams {
        residual_factor: cfg.tol.residual,
        ..StepParams::new(cfg.sigma, cfg.mu, cfg.ell(), cfg.delta_value())
    }
}

fn step_checks(ctx: &mut Ctx, label: &str, next: &ReynoldsTuple, rep: &StepReport, t0: Instant) -> Result<()> {
    let s = Suite::Scheme;
    let tol = ctx.cfg.tol.clone();
    // Timing lives in the record's own field so the values stay reproducible.
    let mut values = serde_json::to_value(rep)?;
    if let Some(o) = values.as_object_mut() {
        o.remove("wall_seconds");
    }
    ctx.emit(s, &format!("{label}:report"), values, None, rep.all_finite(), t0)?;
    let t = Instant::now();
    ctx.emit(
        s,
        &format!("{label}:amplitude_bound_ratio"),
        json!({ "measured": rep.amplitude_bound_ratio }),
        None,
        rep.amplitude_bound_ratio.is_finite(),
        t,
    )?;
    ctx.below(s, &format!("{label}:residual"), rep.residual_final / rep.residual_scale, tol.residual, t)?;
    ctx.below(s, &format!("{label}:divergence"), rep.residual_divergence, tol.divergence, t)?;
    ctx.below(s, &format!("{label}:amplitude_identity"), rep.residual_amplitude_identity, tol.amplitude_identity, t)?;
    ctx.below(s, &format!("{label}:potential_identity"), rep.residual_potential_identity, tol.potential_identity, t)?;
    let t = Instant::now();
    let mut rng = ctx.rng(4);
    let weak = weak_check(next, ctx.cfg.weak_tests, &mut rng)?;
    ctx.below(s, &format!("{label}:weak_pairing"), weak, tol.weak, t)?;
    Ok(())
}

fn scheme_suite(ctx: &mut Ctx) -> Result<()> {
    let decomp: GeometricDecomposition = build_decomposition(&DirectionSet::default())?;
    let fam = family_for(ctx.cfg)?;
    let params = step_params(ctx.cfg);
    let snapshots = ctx.cfg.out.join("snapshots");

    let t0 = Instant::now();
    let (next, rep) = step(ReynoldsTuple::zero(fam.grid()), &params, &decomp, &fam)?;
    step_checks(ctx, "zero_seed", &next, &rep, t0)?;
    write_tuple(&snapshots.join("zero_seed"), &next)?;
    drop(next);

    let t0 = Instant::now();
    let seed = seeded_tuple(ctx.cfg, fam.grid())?;
    let (next, rep) = step(seed, &params, &decomp, &fam)?;
    step_checks(ctx, "perturbed_seed", &next, &rep, t0)?;
    write_tuple(&snapshots.join("perturbed_seed"), &next)?;
    ctx.golden(Suite::Scheme, "scheme.corrector_ratio", rep.corrector_ratio)?;
    ctx.golden(Suite::Scheme, "scheme.principal_l2", rep.principal_l2)?;
    Ok(())
}

/// Paths of the snapshot directories a full run writes.
pub fn snapshot_dirs(out: &Path) -> [std::path::PathBuf; 2] {
    [out.join("snapshots/zero_seed"), out.join("snapshots/perturbed_seed")]
}
