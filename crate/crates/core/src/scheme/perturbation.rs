use crate::error::{Error, Result};
use crate::field::norms::sobolev_norm;
use crate::field::ops::{dilate, div, grad};
use crate::field::product::{dot, mul};
use crate::field::{FieldFlags, Rank, SpectralField};
use crate::mikado::MikadoFamily;

#[derive(Debug, Clone)]
pub struct Perturbation {
    /// Σ a_k W_k(σ·).
    pub principal: SpectralField,
    /// σ⁻¹ Σ Ω_k(σ·)∇a_k.
    pub corrector: SpectralField,
}

impl Perturbation {
    pub fn total(&self) -> Result<SpectralField> {
        Ok(self
            .principal
            .add(&self.corrector)?
            .with_flags(FieldFlags::REAL | FieldFlags::DIVERGENCE_FREE))
    }
}

fn check_grid(amps: &[SpectralField], family: &MikadoFamily) -> Result<()> {
    if amps.len() != family.len() {
        return Err(Error::Construction(format!(
            "{} amplitudes for {} directions",
            amps.len(),
            family.len()
        )));
    }
    for a in amps {
        a.check_rank(Rank::Scalar, "amplitude")?;
        if a.grid().n() != family.n {
            return Err(Error::Resolution(format!(
                "amplitudes on N = {} but the family is sampled at N = {}",
                a.grid().n(),
                family.n
            )));
        }
    }
    Ok(())
}

fn rescaled(family: &MikadoFamily, f: SpectralField) -> Result<SpectralField> {
    if family.sigma == 1 {
        Ok(f)
    } else {
        dilate(&f, family.sigma as usize)
    }
}

/// w_p = Σ a_k W_k(σ·) and w_c = σ⁻¹ Σ Ω_k(σ·)∇a_k, with
/// Ω∇a = e (∇Φ·∇a) − ∇Φ (e·∇a) evaluated with (∇Φ)(σ·).
pub fn build_perturbation(amps: &[SpectralField], family: &MikadoFamily) -> Result<Perturbation> {
    check_grid(amps, family)?;
    let grid = family.grid();
    let mut wp = SpectralField::zeros(grid, Rank::Vector);
    let mut wc = SpectralField::zeros(grid, Rank::Vector);
    let sigma = family.sigma as f64;
    for (k, a) in amps.iter().enumerate() {
        let e = family.unit(k);
        let phi = family.phi(k);
        let s = mul(a, &phi)?;
        drop(phi);
        for (i, ei) in e.iter().enumerate() {
            wp.axpy_component(i, *ei, s.comp(0));
        }
        drop(s);
        let ga = grad(a)?;
        if ga.is_zero() {
            continue;
        }
        let g = rescaled(family, family.grad_potential_base(k))?;
        let gdot = dot(&g, &ga)?;
        let mut eda = SpectralField::zeros(grid, Rank::Scalar);
        for (j, ej) in e.iter().enumerate() {
            eda.axpy_component(0, *ej, ga.comp(j));
        }
        for (i, ei) in e.iter().enumerate() {
            wc.axpy_component(i, ei / sigma, gdot.comp(0));
        }
        wc.axpy(-1.0 / sigma, &mul(&eda, &g)?)?;
    }
    Ok(Perturbation {
        principal: wp.with_flags(FieldFlags::REAL),
        corrector: wc.with_flags(FieldFlags::REAL),
    })
}

/// ‖w − σ⁻¹ div(Σ a_k Ω_k(σ·))‖_{L²} relative to ‖w‖_{L²}. Materialises one
/// tensor per direction, so it is meant for moderate grids.
pub fn potential_identity_residual(
    pert: &Perturbation,
    amps: &[SpectralField],
    family: &MikadoFamily,
) -> Result<f64> {
    check_grid(amps, family)?;
    let grid = family.grid();
    let mut pot = SpectralField::zeros(grid, Rank::Tensor);
    for (k, a) in amps.iter().enumerate() {
        pot.axpy(1.0, &mul(a, &family.omega(k))?)?;
    }
    let w = pert.total()?;
    let d = div(&pot)?.scale(1.0 / family.sigma as f64);
    Ok(d.sub(&w)?.l2_norm() / (w.l2_norm() + 1e-300))
}

/// ‖div w‖_{L²} / ‖w‖_{H¹}.
pub fn divergence_defect(w: &SpectralField) -> Result<f64> {
    Ok(div(w)?.l2_norm() / (sobolev_norm(w, 1.0, false)? + 1e-300))
}
