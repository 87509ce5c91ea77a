use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::norms::{cn_norm, sobolev_norm};
use crate::field::ops::{curl, leray};
use crate::field::{lp_norm, Grid3, Rank, SpectralField};
use crate::geom::GeometricDecomposition;
use crate::mikado::MikadoFamily;

use super::cutoff::{build_amplitudes, build_cutoff, cutoff_constant};
use super::perturbation::{build_perturbation, divergence_defect, potential_identity_residual};
use super::stress::{build_new_stress_with, StressPart};
use super::tuple::{mollify_tuple, residual, ReynoldsTuple};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepParams {
    pub sigma: u64,
    pub mu: u64,
    /// Mollification length l.
    pub ell: f64,
    /// δ_{n+1}.
    pub delta: f64,
    /// Amplitudes are low-passed to |k| ≤ band; `None` keeps them unfiltered.
    pub amplitude_band: Option<f64>,
    /// Exponent r of the L^r stress norms.
    pub stress_exponent: f64,
    /// Sobolev index s of the reported increment norm.
    pub increment_sobolev: f64,
    /// New residual must stay below this times 1 + ‖B_{n+1}‖²_{H¹}.
    pub residual_factor: f64,
}

impl StepParams {
    pub fn new(sigma: u64, mu: u64, ell: f64, delta: f64) -> Self {
        Self {
            sigma,
            mu,
            ell,
            delta,
            amplitude_band: Some(sigma as f64 / 2.0),
            stress_exponent: 1.0 + 1.0 / 64.0,
            increment_sobolev: 1.0 / 250.0,
            residual_factor: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StressNorms {
    pub part: StressPart,
    pub lr: f64,
    pub l1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    pub params: StepParams,
    pub stage: u32,
    pub r0: f64,
    pub c0: f64,
    pub cutoff_l1: f64,
    pub r_l1_before: f64,
    pub r_bar_l1: f64,
    pub b_l2_before: f64,
    pub b_h1_before: f64,
    pub r_l1_after: f64,
    pub b_l2_after: f64,
    pub b_h1_after: f64,
    pub increment_l2: f64,
    pub increment_hs: f64,
    pub principal_l1: f64,
    pub principal_l2: f64,
    pub corrector_l2: f64,
    pub corrector_ratio: f64,
    pub perturbation_l2: f64,
    pub amplitude_l2_max: f64,
    /// max_k ‖a_k‖_{L²} / (‖R̄‖_{L¹}^{1/2} + δ^{1/2}).
    pub amplitude_bound_ratio: f64,
    pub stress: Vec<StressNorms>,
    pub residual_mollified: f64,
    /// Pointwise amplitude identity, relative to ‖ρ‖_∞ + ‖R̄‖_∞.
    pub residual_amplitude_identity: f64,
    /// ‖w − σ⁻¹ div Σ a_k Ω_k(σ·)‖ / ‖w‖.
    pub residual_potential_identity: f64,
    /// ‖div w‖ / ‖w‖_{H¹}.
    pub residual_divergence: f64,
    pub residual_final: f64,
    pub residual_scale: f64,
    pub wall_seconds: f64,
}

impl StepReport {
    pub fn all_finite(&self) -> bool {
        let v = serde_json::to_value(self).unwrap_or(serde_json::Value::Null);
        fn walk(v: &serde_json::Value) -> bool {
            match v {
                serde_json::Value::Null => false,
                serde_json::Value::Array(a) => a.iter().all(walk),
                serde_json::Value::Object(o) => o.iter().all(|(k, x)| k == "amplitude_band" || walk(x)),
                _ => true,
            }
        }
        walk(&v)
    }
}

fn check_consistency(t: &ReynoldsTuple, params: &StepParams, family: &MikadoFamily) -> Result<()> {
    if family.sigma != params.sigma || family.mu != params.mu {
        return Err(Error::Precondition(format!(
            "family built for (σ, μ) = ({}, {}) but parameters ask for ({}, {})",
            family.sigma, family.mu, params.sigma, params.mu
        )));
    }
    if family.n != t.grid().n() {
        return Err(Error::GridMismatch(family.n, t.grid().n()));
    }
    Ok(())
}

/// One iteration (B_n, p_n, R_n) → (B_{n+1}, p_{n+1}, R_{n+1}).
pub fn step(
    tuple: ReynoldsTuple,
    params: &StepParams,
    decomp: &GeometricDecomposition,
    family: &MikadoFamily,
) -> Result<(ReynoldsTuple, StepReport)> {
    let clock = Instant::now();
    check_consistency(&tuple, params, family)?;
    tuple.certify().map_err(|e| e.at("certify_input"))?;
    let r_l1_before = lp_norm(&tuple.r, 1.0)?;
    let b_l2_before = tuple.b.l2_norm();
    let b_h1_before = sobolev_norm(&tuple.b, 1.0, true)?;
    let stage = tuple.stage;

    let mollified = mollify_tuple(&tuple, params.ell).map_err(|e| e.at("mollify"))?;
    let ReynoldsTuple { b: b_old, .. } = tuple;
    let residual_mollified = mollified.residual_norm()?;
    let r_bar_l1 = lp_norm(&mollified.r, 1.0)?;
    let ReynoldsTuple { b: bbar, p: pbar, r: rbar, .. } = mollified;

    let c0 = cutoff_constant(decomp.r0);
    let (rho, chi) = build_cutoff(&rbar, params.delta, c0).map_err(|e| e.at("cutoff"))?;
    let amps = build_amplitudes(&rho, &rbar, decomp, params.amplitude_band).map_err(|e| e.at("amplitudes"))?;
    let residual_amplitude_identity = amps.identity_residual / (amps.identity_scale + 1e-300);
    let amplitude_l2_max = amps.fields.iter().map(|a| a.l2_norm()).fold(0.0, f64::max);

    let pert = build_perturbation(&amps.fields, family).map_err(|e| e.at("perturbation"))?;
    let residual_potential_identity = potential_identity_residual(&pert, &amps.fields, family)?;
    let principal_l1 = lp_norm(&pert.principal, 1.0)?;
    let principal_l2 = pert.principal.l2_norm();
    let corrector_l2 = pert.corrector.l2_norm();
    let (residual_divergence, perturbation_l2, increment_l2, increment_hs) = {
        let w = pert.total()?;
        let mut increment = bbar.sub(&b_old)?;
        drop(b_old);
        increment.axpy(1.0, &w)?;
        (
            divergence_defect(&w)?,
            w.l2_norm(),
            increment.l2_norm(),
            sobolev_norm(&increment, params.increment_sobolev, false)?,
        )
    };

    let mut r_new = SpectralField::zeros(bbar.grid(), Rank::Tensor);
    let mut stress = Vec::new();
    let pi = build_new_stress_with(&bbar, rbar, &rho, &amps.fields, &pert, family, &mut |part, f| {
        stress.push(StressNorms {
            part,
            lr: lp_norm(&f, params.stress_exponent)?,
            l1: lp_norm(&f, 1.0)?,
        });
        r_new.axpy(1.0, &f)
    })
    .map_err(|e| e.at("new_stress"))?;
    drop(amps);

    let mut b_new = bbar;
    b_new.axpy(1.0, &pert.principal)?;
    b_new.axpy(1.0, &pert.corrector)?;
    drop(pert);
    let mut p_new = pbar;
    p_new.axpy(-1.0, &rho)?;
    p_new.axpy(1.0, &pi)?;
    drop(rho);

    let mut next = ReynoldsTuple {
        b: b_new.with_flags(crate::field::FieldFlags::REAL | crate::field::FieldFlags::DIVERGENCE_FREE),
        p: p_new.sub_mean(),
        r: r_new.with_flags(
            crate::field::FieldFlags::REAL | crate::field::FieldFlags::SYMMETRIC | crate::field::FieldFlags::TRACELESS,
        ),
        stage: stage + 1,
        residual_tol: 0.0,
    };
    let residual_scale = next.scale()?;
    next.residual_tol = params.residual_factor * residual_scale;
    let residual_final = next.certify().map_err(|e| e.at("assemble"))?;

    let report = StepReport {
        params: *params,
        stage: next.stage,
        r0: decomp.r0,
        c0,
        cutoff_l1: chi.l1,
        r_l1_before,
        r_bar_l1,
        b_l2_before,
        b_h1_before,
        r_l1_after: lp_norm(&next.r, 1.0)?,
        b_l2_after: next.b.l2_norm(),
        b_h1_after: sobolev_norm(&next.b, 1.0, true)?,
        increment_l2,
        increment_hs,
        principal_l1,
        principal_l2,
        corrector_l2,
        corrector_ratio: corrector_l2 / (principal_l2 + 1e-300),
        perturbation_l2,
        amplitude_l2_max,
        amplitude_bound_ratio: amplitude_l2_max / (r_bar_l1.sqrt() + params.delta.sqrt()),
        stress,
        residual_mollified,
        residual_amplitude_identity,
        residual_potential_identity,
        residual_divergence,
        residual_final,
        residual_scale,
        wall_seconds: clock.elapsed().as_secs_f64(),
    };
    Ok((next, report))
}

/// One weak-formulation test: |∫ (curl φ)·res| against ‖φ‖_{C²}.
#[derive(Debug, Clone, Serialize)]
pub struct WeakPairing {
    pub pairing: f64,
    pub c2_norm: f64,
}

/// Random divergence-free test fields with modes |k_i| ≤ `kmax`, generated on
/// a `test_n`³ grid (where ‖φ‖_{C²} is evaluated) and embedded spectrally into
/// the residual's grid.
pub fn weak_pairings<R: Rng>(
    res: &SpectralField,
    count: usize,
    kmax: i64,
    test_n: usize,
    rng: &mut R,
) -> Result<Vec<WeakPairing>> {
    res.check_rank(Rank::Vector, "weak_pairings")?;
    let small = Grid3::new(test_n)?;
    if small.kmax() < kmax {
        return Err(Error::Resolution(format!("test grid {test_n} cannot carry modes up to {kmax}")));
    }
    (0..count)
        .map(|_| {
            let phi = leray(&SpectralField::random(small, Rank::Vector, kmax, rng).sub_mean())?;
            let c2 = cn_norm(&phi, 2)?;
            let cphi = curl(&phi.resample(res.grid()))?;
            Ok(WeakPairing {
                pairing: cphi.inner(res)?,
                c2_norm: c2,
            })
        })
        .collect()
}

/// Residual of `t` paired against `count` random test fields; returns the
/// largest |pairing| / (‖φ‖_{C²} · scale).
pub fn weak_check<R: Rng>(t: &ReynoldsTuple, count: usize, rng: &mut R) -> Result<f64> {
    let res = residual(t)?;
    let scale = t.scale()?;
    Ok(weak_pairings(&res, count, 3, 16, rng)?
        .iter()
        .map(|w| w.pairing.abs() / (w.c2_norm * scale))
        .fold(0.0, f64::max))
}
