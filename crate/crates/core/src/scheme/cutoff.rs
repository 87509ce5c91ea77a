use ndarray::Array3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::lp_norm;
use crate::field::ops::low_pass;
use crate::field::{Rank, SpectralField};
use crate::geom::{outer3, GeometricDecomposition};

/// Cutoff constant c₀ = max(4, 2/r0).
pub fn cutoff_constant(r0: f64) -> f64 {
    (2.0 / r0).max(4.0)
}

/// C∞ step: 0 for s ≤ 0, 1 for s ≥ 1, monotone in between.
pub fn smooth_step(s: f64) -> f64 {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        f(s) / (f(s) + f(1.0 - s))
    }
}

/// χ(t) with plateau level M = L + δ, where L = ‖R̄‖_{L¹}:
/// c₀M for t ≤ M, c₀t for t ≥ 2M, and a smooth monotone blend between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi {
    pub c0: f64,
    pub l1: f64,
    pub delta: f64,
}

impl Chi {
    pub fn plateau(&self) -> f64 {
        self.l1 + self.delta
    }

    pub fn eval(&self, t: f64) -> f64 {
        let m = self.plateau();
        if t <= m {
            return self.c0 * m;
        }
        if t >= 2.0 * m {
            return self.c0 * t;
        }
        let h = smooth_step((t - m) / m);
        self.c0 * ((1.0 - h) * m + h * t)
    }
}

/// Pointwise Frobenius norm of a tensor field at grid points.
pub fn frobenius_field(r: &SpectralField) -> Result<Array3<f64>> {
    r.check_rank(Rank::Tensor, "frobenius_field")?;
    let mut acc = Array3::<f64>::zeros(r.grid().physical_shape());
    for c in 0..9 {
        let p = r.component_physical(c);
        acc.as_slice_mut()
            .expect("standard layout")
            .par_iter_mut()
            .zip(p.as_slice().expect("standard layout").par_iter())
            .for_each(|(a, v)| *a += v * v);
    }
    acc.mapv_inplace(f64::sqrt);
    Ok(acc)
}

/// ρ = χ(‖R̄(x)‖_F) as a spectral field, with the χ used.
pub fn build_cutoff(rbar: &SpectralField, delta: f64, c0: f64) -> Result<(SpectralField, Chi)> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("δ must be positive, got {delta}")));
    }
    let chi = Chi {
        c0,
        l1: lp_norm(rbar, 1.0)?,
        delta,
    };
    let mut vals = frobenius_field(rbar)?;
    vals.mapv_inplace(|t| chi.eval(t));
    let rho = SpectralField::from_physical(rbar.grid(), Rank::Scalar, &[vals])?;
    Ok((rho, chi))
}

#[derive(Debug, Clone)]
pub struct Amplitudes {
    /// a_k after the low-pass filter.
    pub fields: Vec<SpectralField>,
    /// max |Σ a_k² e_k⊗e_k − (ρ Id − R̄)| over grid points, before filtering.
    pub identity_residual: f64,
    /// ‖ρ‖_∞ + ‖R̄‖_∞, the scale for `identity_residual`.
    pub identity_scale: f64,
    pub band: Option<f64>,
}

/// a_k = ρ^{1/2} Γ_k(Id − R̄/ρ), optionally low-passed to |k| ≤ band.
pub fn build_amplitudes(
    rho: &SpectralField,
    rbar: &SpectralField,
    decomp: &GeometricDecomposition,
    band: Option<f64>,
) -> Result<Amplitudes> {
    let gammas = decomp.gamma_field_physical(rbar, rho)?;
    let rho_p = rho.component_physical(0);
    if let Some(m) = rho_p.iter().cloned().reduce(f64::min).filter(|m| !(*m > 0.0)) {
        return Err(Error::Precondition(format!("cutoff ρ is not positive (min {m:e})")));
    }
    let sq = rho_p.mapv(f64::sqrt);
    let amps: Vec<Array3<f64>> = gammas.into_iter().map(|g| g * &sq).collect();

    // Pointwise identity on the grid values.
    let rp = rbar.to_physical();
    let rs: Vec<&[f64]> = rp.iter().map(|x| x.as_slice().expect("standard layout")).collect();
    let asl: Vec<&[f64]> = amps.iter().map(|x| x.as_slice().expect("standard layout")).collect();
    let rho_s = rho_p.as_slice().expect("standard layout");
    let outers: Vec<_> = (0..decomp.c.len()).map(|k| outer3(decomp.directions.unit(k))).collect();
    let (worst, rinf) = (0..rho_s.len())
        .into_par_iter()
        .map(|i| {
            let (mut w, mut r) = (0.0f64, 0.0f64);
            for a in 0..3 {
                for b in 0..3 {
                    let rab = rs[3 * a + b][i];
                    r = r.max(rab.abs());
                    let lhs: f64 = asl.iter().zip(&outers).map(|(ak, o)| ak[i] * ak[i] * o[a][b]).sum();
                    let rhs = if a == b { rho_s[i] } else { 0.0 } - rab;
                    w = w.max((lhs - rhs).abs());
                }
            }
            (w, r)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0.max(y.0), x.1.max(y.1)));
    drop(rp);
    let rho_inf = rho_p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let grid = rho.grid();
    let fields = amps
        .into_iter()
        .map(|a| {
            let f = SpectralField::from_physical(grid, Rank::Scalar, &[a])?;
            Ok(match band {
                Some(k) => low_pass(&f, k),
                None => f,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Amplitudes {
        fields,
        identity_residual: worst,
        identity_scale: rho_inf + rinf,
        band,
    })
}
