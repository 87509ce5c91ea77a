//! Antidivergence ℛ (vector → symmetric traceless tensor) and the bilinear
//! antidivergence 𝒯 as Fourier multipliers. Zero modes map to zero.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::norms::lp_norm;
use crate::field::ops::{dilate_within, fill_modes, grad, TWO_PI};
use crate::field::product::{matvec, mul};
use crate::field::studies::ScalingTable;
use crate::field::{FieldFlags, Grid3, Rank, SpectralField};

/// ℛ on a fixed grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AntidivOperator {
    pub grid: Grid3,
}

impl AntidivOperator {
    pub fn new(grid: Grid3) -> Self {
        Self { grid }
    }

    /// Symbol M_ijk(k) with (ℛv)^_ij = M_ijk v̂_k:
    /// `i[ ξ_iξ_jξ_k/(2|ξ|⁴) + δ_ij ξ_k/(2|ξ|²) − δ_jk ξ_i/|ξ|² − δ_ik ξ_j/|ξ|² ]`, ξ = 2πk.
    pub fn symbol(k: [i64; 3]) -> [[[Complex64; 3]; 3]; 3] {
        let xi = k.map(|v| TWO_PI * v as f64);
        let x2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        let mut m = [[[Complex64::new(0.0, 0.0); 3]; 3]; 3];
        if x2 == 0.0 {
            return m;
        }
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    let v = 0.5 * xi[i] * xi[j] * xi[l] / (x2 * x2) + 0.5 * d(i, j) * xi[l] / x2
                        - d(j, l) * xi[i] / x2
                        - d(i, l) * xi[j] / x2;
                    m[i][j][l] = Complex64::new(0.0, v);
                }
            }
        }
        m
    }

    pub fn apply(&self, v: &SpectralField) -> Result<SpectralField> {
        if v.grid() != self.grid {
            return Err(Error::GridMismatch(self.grid.n(), v.grid().n()));
        }
        antidiv(v)
    }
}

/// ℛv: symmetric, traceless, with div ℛv = v − mean(v).
pub fn antidiv(v: &SpectralField) -> Result<SpectralField> {
    v.check_rank(Rank::Vector, "antidiv")?;
    let g = v.grid();
    let s: Vec<&[Complex64]> = v.comps().iter().map(|c| c.as_slice().expect("standard layout")).collect();
    let mut comps: Vec<Option<ndarray::Array3<Complex64>>> = vec![None; 9];
    for i in 0..3 {
        for j in i..3 {
            let a = fill_modes(g, |k, idx| {
                let xi = k.map(|x| TWO_PI * x as f64);
                let x2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
                if x2 == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let vv = [s[0][idx], s[1][idx], s[2][idx]];
                let dv = vv[0] * xi[0] + vv[1] * xi[1] + vv[2] * xi[2];
                let mut t = dv * (0.5 * xi[i] * xi[j] / (x2 * x2));
                if i == j {
                    t += dv * (0.5 / x2);
                }
                t -= (vv[j] * xi[i] + vv[i] * xi[j]) / x2;
                Complex64::new(0.0, 1.0) * t
            });
            if i != j {
                comps[3 * j + i] = Some(a.clone());
            }
            comps[3 * i + j] = Some(a);
        }
    }
    let comps = comps.into_iter().map(|c| c.expect("all components filled")).collect();
    Ok(SpectralField::from_parts_unchecked(
        g,
        Rank::Tensor,
        comps,
        FieldFlags::REAL | FieldFlags::SYMMETRIC | FieldFlags::TRACELESS,
    ))
}

fn check_zero_mean(h: &SpectralField, what: &str) -> Result<()> {
    let norm = h.l2_norm();
    for m in h.mean() {
        if m.abs() > 1e-12 * norm {
            return Err(Error::Precondition(format!("{what} must have zero mean, found {m:e}")));
        }
    }
    Ok(())
}

/// 𝒯(u, H) = u_l ℛ(H_l) − ℛ(v), with H_l the l-th row of H and
/// v_i = (ℛH_l)_ij ∂_j u_l, so that div 𝒯 = uH − mean(uH) where (uH)_i = u_l H_li.
pub fn bilinear_antidiv(u: &SpectralField, h: &SpectralField) -> Result<SpectralField> {
    u.check_rank(Rank::Vector, "bilinear_antidiv")?;
    h.check_rank(Rank::Tensor, "bilinear_antidiv")?;
    u.check_same_grid(h)?;
    check_zero_mean(h, "H")?;
    let g = u.grid();
    let gu = grad(u)?;
    let mut first = SpectralField::zeros(g, Rank::Tensor);
    let mut v = SpectralField::zeros(g, Rank::Vector);
    for l in 0..3 {
        let row = SpectralField::from_scalars(
            Rank::Vector,
            vec![h.component(3 * l), h.component(3 * l + 1), h.component(3 * l + 2)],
        )?;
        let a = antidiv(&row)?;
        first.axpy(1.0, &mul(&u.component(l), &a)?)?;
        let grad_ul = SpectralField::from_scalars(
            Rank::Vector,
            vec![gu.component(3 * l), gu.component(3 * l + 1), gu.component(3 * l + 2)],
        )?;
        v.axpy(1.0, &matvec(&a, &grad_ul)?)?;
    }
    first.axpy(-1.0, &antidiv(&v)?)?;
    Ok(first.with_flags(FieldFlags::REAL))
}

/// 𝒯(u, ψ e⊗e) = s ℛV − ℛ(ℛV ∇s) with s = u·e and V = ψ e.
pub fn bilinear_antidiv_rank_one(u: &SpectralField, psi: &SpectralField, e: [f64; 3]) -> Result<SpectralField> {
    u.check_rank(Rank::Vector, "bilinear_antidiv_rank_one")?;
    psi.check_rank(Rank::Scalar, "bilinear_antidiv_rank_one")?;
    u.check_same_grid(psi)?;
    check_zero_mean(psi, "ψ")?;
    let g = u.grid();
    let mut s = SpectralField::zeros(g, Rank::Scalar);
    for (l, el) in e.iter().enumerate() {
        s.axpy(*el, &u.component(l))?;
    }
    let vfield = SpectralField::from_scalars(Rank::Vector, e.iter().map(|ei| psi.clone().scale(*ei)).collect())?;
    let rv = antidiv(&vfield)?;
    let mut out = mul(&s, &rv)?;
    let inner = matvec(&rv, &grad(&s)?)?;
    drop(rv);
    out.axpy(-1.0, &antidiv(&inner)?)?;
    Ok(out.with_flags(FieldFlags::REAL))
}

/// (uH)_i = u_l H_li.
pub fn contract(u: &SpectralField, h: &SpectralField) -> Result<SpectralField> {
    u.check_rank(Rank::Vector, "contract")?;
    h.check_rank(Rank::Tensor, "contract")?;
    matvec(&h.transpose()?, u)
}

/// ‖ℛ(u(σ·))‖_{L^r} over a ladder of σ, with the fitted slope.
pub fn antidiv_scaling_study(
    u: &SpectralField,
    sigma_list: &[usize],
    r: f64,
    oversample: usize,
) -> Result<ScalingTable> {
    if sigma_list.len() < 3 {
        return Err(Error::Domain("antidivergence study needs at least 3 ladder points".into()));
    }
    u.check_rank(Rank::Vector, "antidiv_scaling_study")?;
    check_zero_mean(u, "u")?;
    if oversample == 0 {
        return Err(Error::Domain("oversampling factor must be positive".into()));
    }
    let quad = Grid3::new(u.grid().n() * oversample)?;
    let mut points = Vec::with_capacity(sigma_list.len());
    for &s in sigma_list {
        let t = antidiv(&dilate_within(u, s)?)?;
        points.push((s as f64, lp_norm(&t.resample(quad), r)?));
    }
    let scale = lp_norm(u, r.max(1.0))?;
    ScalingTable::fit(points, 1e-13 * (scale + 1e-300))
}
