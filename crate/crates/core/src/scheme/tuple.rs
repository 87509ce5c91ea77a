use serde::{Deserialize, Serialize};

use crate::antidiv::antidiv;
use crate::error::{Error, Result};
use crate::field::mollify;
use crate::field::norms::sobolev_norm;
use crate::field::ops::{curl, div, grad, inv_laplacian};
use crate::field::product::{bilinear, norm_sq, outer_terms, traceless_terms};
use crate::field::{FieldFlags, Grid3, Rank, SpectralField};

/// A solution (B, p, R) of curl B + div(B⊗B) + ∇p = div R at stage n.
#[derive(Debug, Clone, PartialEq)]
pub struct ReynoldsTuple {
    pub b: SpectralField,
    pub p: SpectralField,
    pub r: SpectralField,
    pub stage: u32,
    /// Absolute L² bound the residual is certified against.
    pub residual_tol: f64,
}

impl ReynoldsTuple {
    pub fn zero(grid: Grid3) -> Self {
        Self {
            b: SpectralField::zeros(grid, Rank::Vector).with_flags(FieldFlags::REAL | FieldFlags::DIVERGENCE_FREE),
            p: SpectralField::zeros(grid, Rank::Scalar),
            r: SpectralField::zeros(grid, Rank::Tensor)
                .with_flags(FieldFlags::REAL | FieldFlags::SYMMETRIC | FieldFlags::TRACELESS),
            stage: 0,
            residual_tol: 1e-12,
        }
    }

    pub fn grid(&self) -> Grid3 {
        self.b.grid()
    }

    pub fn residual_norm(&self) -> Result<f64> {
        Ok(residual(self)?.l2_norm())
    }

    /// 1 + ‖B‖²_{H¹}, the scale residual tolerances are measured against.
    pub fn scale(&self) -> Result<f64> {
        Ok(1.0 + sobolev_norm(&self.b, 1.0, false)?.powi(2))
    }

    /// Checks the field invariants and the residual bound; returns the residual norm.
    pub fn certify(&self) -> Result<f64> {
        self.check_invariants()?;
        let res = self.residual_norm()?;
        if !(res <= self.residual_tol) {
            return Err(Error::Identity {
                name: "tuple residual".into(),
                residual: res,
                tol: self.residual_tol,
            });
        }
        Ok(res)
    }

    pub fn check_invariants(&self) -> Result<()> {
        self.b.check_rank(Rank::Vector, "B")?;
        self.p.check_rank(Rank::Scalar, "p")?;
        self.r.check_rank(Rank::Tensor, "R")?;
        self.b.check_same_grid(&self.p)?;
        self.b.check_same_grid(&self.r)?;
        check_div_free(&self.b)?;
        let pm = self.p.mean()[0];
        if pm.abs() > 1e-12 * (1.0 + self.p.l2_norm()) {
            return Err(Error::Precondition(format!("pressure mean {pm:e} is not zero")));
        }
        let rs = self.r.l2_norm();
        let asym = self.r.asymmetry()?;
        let tr = self.r.trace_defect()?;
        if asym > 1e-12 * (1.0 + rs) || tr > 1e-12 * (1.0 + rs) {
            return Err(Error::Precondition(format!(
                "stress not symmetric traceless: asymmetry {asym:e}, trace {tr:e}"
            )));
        }
        Ok(())
    }
}

fn check_div_free(b: &SpectralField) -> Result<()> {
    let d = div(b)?.l2_norm();
    let s = sobolev_norm(b, 1.0, true)?;
    if d > 1e-10 * s + 1e-300 {
        return Err(Error::Precondition(format!("B is not divergence-free: ‖div B‖ = {d:e}")));
    }
    Ok(())
}

/// curl B + div(B⊗B) + ∇p − div R.
pub fn residual(t: &ReynoldsTuple) -> Result<SpectralField> {
    t.b.check_same_grid(&t.p)?;
    t.b.check_same_grid(&t.r)?;
    let mut out = curl(&t.b)?;
    out.axpy(1.0, &div(&bilinear(&t.b, &t.b, Rank::Tensor, &outer_terms())?)?)?;
    out.axpy(1.0, &grad(&t.p)?)?;
    out.axpy(-1.0, &div(&t.r)?)?;
    Ok(out)
}

/// p = ½|B|² + Δ⁻¹ div div(B⊗B) with zero mean.
///
/// p − ½|B|² is the potential of the gradient part of div(B⊗B). The pressure
/// that balances curl B + div(B⊗B) + ∇p is ½|B|² − p, see [`system_pressure`].
pub fn solve_pressure(b: &SpectralField) -> Result<SpectralField> {
    b.check_rank(Rank::Vector, "solve_pressure")?;
    check_div_free(b)?;
    let bb = bilinear(b, b, Rank::Tensor, &outer_terms())?;
    let dd = div(&div(&bb)?)?;
    let mut p = inv_laplacian(&dd)?;
    p.axpy(0.5, &norm_sq(b)?)?;
    Ok(p.sub_mean())
}

/// −Δ⁻¹ div div(B⊗B): the zero-mean pressure making curl B + div(B⊗B) + ∇p
/// divergence-free.
pub fn system_pressure(b: &SpectralField) -> Result<SpectralField> {
    let p = solve_pressure(b)?;
    let mut q = norm_sq(b)?.scale(0.5);
    q.axpy(-1.0, &p)?;
    Ok(q.sub_mean())
}

/// A compatible (p, R) for a given B: p from [`system_pressure`] and
/// R = ℛ(curl B + div(B⊗B) + ∇p), so that the residual vanishes.
pub fn solve_compatible(b: &SpectralField) -> Result<(SpectralField, SpectralField)> {
    let p = system_pressure(b)?;
    let mut f = curl(b)?;
    f.axpy(1.0, &div(&bilinear(b, b, Rank::Tensor, &outer_terms())?)?)?;
    f.axpy(1.0, &grad(&p)?)?;
    let r = antidiv(&f)?;
    Ok((p, r))
}

/// Tuple built from B with [`solve_compatible`], certified to `tol`.
pub fn compatible_tuple(b: SpectralField, stage: u32, tol: f64) -> Result<ReynoldsTuple> {
    let (p, r) = solve_compatible(&b)?;
    let t = ReynoldsTuple {
        b,
        p,
        r,
        stage,
        residual_tol: tol,
    };
    t.certify()?;
    Ok(t)
}

/// Mollified tuple:
/// B̄ = B∗η, p̄ = p∗η − ⅓(|B̄|² − |B|²∗η), R̄ = R∗η + B̄∘̊B̄ − (B∘̊B)∗η.
/// Its residual is exactly the mollified residual of the input.
pub fn mollify_tuple(t: &ReynoldsTuple, l: f64) -> Result<ReynoldsTuple> {
    let bbar = mollify(&t.b, l)?;
    let mut pbar = mollify(&t.p, l)?;
    pbar.axpy(-1.0 / 3.0, &norm_sq(&bbar)?)?;
    pbar.axpy(1.0 / 3.0, &mollify(&norm_sq(&t.b)?, l)?)?;
    let mut rbar = mollify(&t.r, l)?;
    rbar.axpy(1.0, &bilinear(&bbar, &bbar, Rank::Tensor, &traceless_terms())?)?;
    rbar.axpy(-1.0, &mollify(&bilinear(&t.b, &t.b, Rank::Tensor, &traceless_terms())?, l)?)?;
    Ok(ReynoldsTuple {
        b: bbar.with_flags(FieldFlags::REAL | FieldFlags::DIVERGENCE_FREE),
        p: pbar.sub_mean(),
        r: rbar.with_flags(FieldFlags::REAL | FieldFlags::SYMMETRIC | FieldFlags::TRACELESS),
        stage: t.stage,
        residual_tol: t.residual_tol,
    })
}

/// Norm summary of a tuple.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TupleNorms {
    pub b_l2: f64,
    pub b_h1_homogeneous: f64,
    pub r_l1: f64,
    pub residual_l2: f64,
}

impl TupleNorms {
    pub fn of(t: &ReynoldsTuple) -> Result<Self> {
        Ok(Self {
            b_l2: t.b.l2_norm(),
            b_h1_homogeneous: sobolev_norm(&t.b, 1.0, true)?,
            r_l1: crate::field::lp_norm(&t.r, 1.0)?,
            residual_l2: t.residual_norm()?,
        })
    }
}
