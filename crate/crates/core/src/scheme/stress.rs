use serde::Serialize;

use crate::antidiv::{antidiv, bilinear_antidiv_rank_one};
use crate::error::{Error, Result};
use crate::field::ops::{curl, div, grad};
use crate::field::product::{bilinear_into, mul, outer_terms};
use crate::field::{FieldFlags, Rank, SpectralField};
use crate::mikado::MikadoFamily;

use super::perturbation::Perturbation;
use super::tuple::ReynoldsTuple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StressPart {
    Oscillation,
    Interference,
    Corrector,
    Linear,
    AmplitudeDefect,
}

impl StressPart {
    pub const ALL: [StressPart; 5] = [
        StressPart::Oscillation,
        StressPart::Interference,
        StressPart::Corrector,
        StressPart::Linear,
        StressPart::AmplitudeDefect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StressPart::Oscillation => "oscillation",
            StressPart::Interference => "interference",
            StressPart::Corrector => "corrector",
            StressPart::Linear => "linear",
            StressPart::AmplitudeDefect => "amplitude_defect",
        }
    }
}

/// All parts of R_{n+1}, plus the scalar π added to the pressure.
#[derive(Debug, Clone)]
pub struct NewStress {
    pub oscillation: SpectralField,
    pub interference: SpectralField,
    pub corrector: SpectralField,
    pub linear: SpectralField,
    pub amplitude_defect: SpectralField,
    pub pressure_correction: SpectralField,
}

impl NewStress {
    pub fn part(&self, p: StressPart) -> &SpectralField {
        match p {
            StressPart::Oscillation => &self.oscillation,
            StressPart::Interference => &self.interference,
            StressPart::Corrector => &self.corrector,
            StressPart::Linear => &self.linear,
            StressPart::AmplitudeDefect => &self.amplitude_defect,
        }
    }

    pub fn total(&self) -> Result<SpectralField> {
        let mut t = self.oscillation.clone();
        for p in &StressPart::ALL[1..] {
            t.axpy(1.0, self.part(*p))?;
        }
        Ok(t.with_flags(FieldFlags::REAL | FieldFlags::SYMMETRIC | FieldFlags::TRACELESS))
    }
}

/// A − ⅓ tr(A) Id, and tr(A).
fn remove_trace(mut a: SpectralField) -> Result<(SpectralField, SpectralField)> {
    let tr = a.trace()?;
    for i in 0..3 {
        a.axpy_component(4 * i, -1.0 / 3.0, tr.comp(0));
    }
    Ok((a, tr))
}

/// `reference` bounds the size of the inputs, so a part that is pure round-off
/// is not held to a relative tolerance against its own tiny norm.
fn check_part(part: StressPart, t: &SpectralField, reference: f64) -> Result<()> {
    let norm = t.l2_norm();
    let asym = t.asymmetry()? * norm;
    let tr = t.trace_defect()? * norm;
    let tol = 1e-8 * norm + 1e-14 * reference + 1e-300;
    if asym > tol || tr > tol {
        return Err(Error::Identity {
            name: format!("{} stress symmetric traceless", part.name()),
            residual: asym.max(tr),
            tol,
        }
        .at("new_stress"));
    }
    Ok(())
}

fn ee(e: [f64; 3]) -> impl Iterator<Item = (usize, f64)> {
    (0..9).map(move |c| (c, e[c / 3] * e[c % 3]))
}

/// Streams R_A, R_osc, R_F, R_C and R_L into `sink`, one at a time, and
/// returns the pressure correction π. R̄ is taken by value and released once
/// R_A is built.
///
/// With A_k = a_k², ψ_k = φ_k²(σ·) − 1 and E = Σ A_k e_k⊗e_k − ρ Id + R̄:
/// - R_A = traceless part of E
/// - R_osc = Σ 𝒯(∇A_k, ψ_k e_k⊗e_k)
/// - R_F = traceless part of w_p⊗w_p − Σ A_k (1 + ψ_k) e_k⊗e_k
/// - R_C = ℛ div(w_c⊗w + w_p⊗w_c)
/// - R_L = ℛ(curl w + div(B̄⊗w + w⊗B̄))
///
/// and π = −⅓(tr R_F^raw + tr E), so that with p_{n+1} = p̄ − ρ + π the
/// residual of (B̄ + w, p_{n+1}, Σ parts) equals that of the mollified tuple.
#[allow(clippy::too_many_arguments)]
pub fn build_new_stress_with(
    bbar: &SpectralField,
    rbar: SpectralField,
    rho: &SpectralField,
    amps: &[SpectralField],
    pert: &Perturbation,
    family: &MikadoFamily,
    sink: &mut dyn FnMut(StressPart, SpectralField) -> Result<()>,
) -> Result<SpectralField> {
    let grid = bbar.grid();
    bbar.check_same_grid(&rbar)?;
    let asq = |k: usize| mul(&amps[k], &amps[k]);
    let mut pressure = SpectralField::zeros(grid, Rank::Scalar);
    let reference = pert.principal.l2_norm().powi(2) + pert.corrector.l2_norm().powi(2) + rbar.l2_norm() + rho.l2_norm();

    // Amplitude defect.
    let mut e = rbar;
    for k in 0..amps.len() {
        let a2 = asq(k)?;
        for (c, v) in ee(family.unit(k)) {
            e.axpy_component(c, v, a2.comp(0));
        }
    }
    for i in 0..3 {
        e.axpy_component(4 * i, -1.0, rho.comp(0));
    }
    let (ra, tr_e) = remove_trace(e)?;
    pressure.axpy(-1.0 / 3.0, &tr_e)?;
    drop(tr_e);
    check_part(StressPart::AmplitudeDefect, &ra, reference)?;
    sink(StressPart::AmplitudeDefect, ra)?;

    // Oscillation.
    let mut osc = SpectralField::zeros(grid, Rank::Tensor);
    for k in 0..amps.len() {
        let u = grad(&asq(k)?)?;
        if u.is_zero() {
            continue;
        }
        let psi = family.psi(k)?;
        osc.axpy(1.0, &bilinear_antidiv_rank_one(&u, &psi, family.unit(k))?)?;
    }
    check_part(StressPart::Oscillation, &osc, reference)?;
    sink(StressPart::Oscillation, osc)?;

    // Interference.
    let mut raw = SpectralField::zeros(grid, Rank::Tensor);
    bilinear_into(&pert.principal, &pert.principal, &outer_terms(), 1.0, &mut raw)?;
    for k in 0..amps.len() {
        let a2 = asq(k)?;
        let mut s = mul(&a2, &family.psi(k)?)?;
        s.axpy(1.0, &a2)?;
        for (c, v) in ee(family.unit(k)) {
            raw.axpy_component(c, -v, s.comp(0));
        }
    }
    let (rf, tr_f) = remove_trace(raw)?;
    pressure.axpy(-1.0 / 3.0, &tr_f)?;
    drop(tr_f);
    check_part(StressPart::Interference, &rf, reference)?;
    sink(StressPart::Interference, rf)?;

    // Corrector.
    let w = pert.total()?;
    let mut q = SpectralField::zeros(grid, Rank::Tensor);
    bilinear_into(&pert.corrector, &w, &outer_terms(), 1.0, &mut q)?;
    bilinear_into(&pert.principal, &pert.corrector, &outer_terms(), 1.0, &mut q)?;
    let rc = if q.is_zero() { q } else { antidiv(&div(&q)?)? };
    check_part(StressPart::Corrector, &rc, reference)?;
    sink(StressPart::Corrector, rc)?;

    // Linear.
    let mut q = SpectralField::zeros(grid, Rank::Tensor);
    bilinear_into(bbar, &w, &outer_terms(), 1.0, &mut q)?;
    bilinear_into(&w, bbar, &outer_terms(), 1.0, &mut q)?;
    let mut v = curl(&w)?;
    drop(w);
    v.axpy(1.0, &div(&q)?)?;
    drop(q);
    let rl = antidiv(&v)?;
    check_part(StressPart::Linear, &rl, reference)?;
    sink(StressPart::Linear, rl)?;

    Ok(pressure)
}

/// Materialises every part; see [`build_new_stress_with`].
pub fn build_new_stress(
    mollified: &ReynoldsTuple,
    rho: &SpectralField,
    amps: &[SpectralField],
    pert: &Perturbation,
    family: &MikadoFamily,
) -> Result<NewStress> {
    let mut parts: Vec<Option<SpectralField>> = vec![None; 5];
    let pressure = build_new_stress_with(&mollified.b, mollified.r.clone(), rho, amps, pert, family, &mut |p, f| {
        parts[p as usize] = Some(f);
        Ok(())
    })?;
    let mut it = parts.into_iter().map(|p| p.expect("every part emitted"));
    Ok(NewStress {
        oscillation: it.next().expect("five parts"),
        interference: it.next().expect("five parts"),
        corrector: it.next().expect("five parts"),
        linear: it.next().expect("five parts"),
        amplitude_defect: it.next().expect("five parts"),
        pressure_correction: pressure,
    })
}
