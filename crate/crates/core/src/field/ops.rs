//! Fourier-multiplier calculus. Derivatives act as `2πi k_j`; the gradient of a
//! vector is `(∇V)_ij = ∂_j V_i` and the divergence of a tensor contracts the
//! second index, `(div T)_i = ∂_j T_ij`.

use ndarray::Array3;
use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::Grid3;
use super::spectral::{FieldFlags, Rank, SpectralField, C0};
use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Build a spectral array mode by mode. `f` receives the signed wavevector and
/// the flat index into the half spectrum; out-of-band modes stay zero.
pub(crate) fn fill_modes<F>(grid: Grid3, f: F) -> Array3<Complex64>
where
    F: Fn([i64; 3], usize) -> Complex64 + Sync,
{
    let n = grid.n();
    let nzh = grid.nzh();
    let fr = grid.freqs();
    let mut out = Array3::from_elem(grid.spectral_shape(), C0);
    out.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(n * nzh)
        .enumerate()
        .for_each(|(ix, slab)| {
            let kx = fr[ix];
            for iy in 0..n {
                let ky = fr[iy];
                for iz in 0..nzh {
                    let k = [kx, ky, iz as i64];
                    if grid.in_band(k) {
                        slab[iy * nzh + iz] = f(k, (ix * n + iy) * nzh + iz);
                    }
                }
            }
        });
    out
}

/// Multiply every component by a real multiplier `m(k)`.
pub fn apply_real_multiplier<M>(f: &SpectralField, m: M) -> SpectralField
where
    M: Fn([i64; 3]) -> f64 + Sync,
{
    let g = f.grid();
    let comps = f
        .comps()
        .iter()
        .map(|c| {
            let s = c.as_slice().expect("standard layout");
            fill_modes(g, |k, i| s[i] * m(k))
        })
        .collect();
    SpectralField::from_parts_unchecked(g, f.rank(), comps, f.flags())
}

#[inline]
fn d(k: [i64; 3], j: usize) -> Complex64 {
    Complex64::new(0.0, TWO_PI * k[j] as f64)
}

#[inline]
fn xi2(k: [i64; 3]) -> f64 {
    TWO_PI * TWO_PI * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64
}

fn slices(f: &SpectralField) -> Vec<&[Complex64]> {
    f.comps()
        .iter()
        .map(|c| c.as_slice().expect("standard layout"))
        .collect()
}

pub fn grad(f: &SpectralField) -> Result<SpectralField> {
    let rank = f
        .rank()
        .up()
        .ok_or_else(|| Error::Rank("grad of a tensor field".into()))?;
    let g = f.grid();
    let s = slices(f);
    let mut comps = Vec::with_capacity(rank.ncomp());
    for a in &s {
        for j in 0..3 {
            comps.push(fill_modes(g, |k, i| d(k, j) * a[i]));
        }
    }
    Ok(SpectralField::from_parts_unchecked(g, rank, comps, FieldFlags::REAL))
}

/// Directional derivative `(e·∇) f` for a constant vector `e`.
pub fn directional(f: &SpectralField, e: [f64; 3]) -> SpectralField {
    apply_complex_multiplier(f, |k| {
        Complex64::new(0.0, TWO_PI * (e[0] * k[0] as f64 + e[1] * k[1] as f64 + e[2] * k[2] as f64))
    })
}

pub fn apply_complex_multiplier<M>(f: &SpectralField, m: M) -> SpectralField
where
    M: Fn([i64; 3]) -> Complex64 + Sync,
{
    let g = f.grid();
    let comps = f
        .comps()
        .iter()
        .map(|c| {
            let s = c.as_slice().expect("standard layout");
            fill_modes(g, |k, i| s[i] * m(k))
        })
        .collect();
    SpectralField::from_parts_unchecked(g, f.rank(), comps, FieldFlags::REAL)
}

pub fn div(f: &SpectralField) -> Result<SpectralField> {
    let rank = f
        .rank()
        .down()
        .ok_or_else(|| Error::Rank("div of a scalar field".into()))?;
    let g = f.grid();
    let s = slices(f);
    let comps = match f.rank() {
        Rank::Vector => vec![fill_modes(g, |k, i| {
            d(k, 0) * s[0][i] + d(k, 1) * s[1][i] + d(k, 2) * s[2][i]
        })],
        Rank::Tensor => (0..3)
            .map(|r| {
                fill_modes(g, |k, i| {
                    d(k, 0) * s[3 * r][i] + d(k, 1) * s[3 * r + 1][i] + d(k, 2) * s[3 * r + 2][i]
                })
            })
            .collect(),
        Rank::Scalar => unreachable!(),
    };
    Ok(SpectralField::from_parts_unchecked(g, rank, comps, FieldFlags::REAL))
}

pub fn curl(v: &SpectralField) -> Result<SpectralField> {
    v.check_rank(Rank::Vector, "curl")?;
    let g = v.grid();
    let s = slices(v);
    let comps = vec![
        fill_modes(g, |k, i| d(k, 1) * s[2][i] - d(k, 2) * s[1][i]),
        fill_modes(g, |k, i| d(k, 2) * s[0][i] - d(k, 0) * s[2][i]),
        fill_modes(g, |k, i| d(k, 0) * s[1][i] - d(k, 1) * s[0][i]),
    ];
    Ok(SpectralField::from_parts_unchecked(
        g,
        Rank::Vector,
        comps,
        FieldFlags::REAL | FieldFlags::DIVERGENCE_FREE,
    ))
}

pub fn laplacian(f: &SpectralField) -> SpectralField {
    apply_real_multiplier(f, |k| -xi2(k))
}

pub fn inv_laplacian(f: &SpectralField) -> Result<SpectralField> {
    let norm = f.l2_norm();
    for m in f.mean() {
        if m.abs() > 1e-12 * norm {
            return Err(Error::NonzeroMean { mean: m });
        }
    }
    Ok(apply_real_multiplier(f, |k| {
        let x = xi2(k);
        if x == 0.0 {
            0.0
        } else {
            -1.0 / x
        }
    }))
}

/// Gradient part of a vector field, `∇Δ⁻¹ div V`.
pub fn gradient_projection(v: &SpectralField) -> Result<SpectralField> {
    v.check_rank(Rank::Vector, "gradient_projection")?;
    let g = v.grid();
    let s = slices(v);
    let comps = (0..3)
        .map(|r| {
            fill_modes(g, |k, i| {
                let kk = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
                if kk == 0.0 {
                    return C0;
                }
                let kv = s[0][i] * k[0] as f64 + s[1][i] * k[1] as f64 + s[2][i] * k[2] as f64;
                kv * (k[r] as f64 / kk)
            })
        })
        .collect();
    Ok(SpectralField::from_parts_unchecked(g, Rank::Vector, comps, FieldFlags::REAL))
}

/// Divergence-free part of a vector field (mean kept).
pub fn leray(v: &SpectralField) -> Result<SpectralField> {
    let gp = gradient_projection(v)?;
    Ok(v.sub(&gp)?.with_flags(FieldFlags::REAL | FieldFlags::DIVERGENCE_FREE))
}

/// Index dilation `f(σ·)`: mode k moves to σk on a grid σ times finer.
pub fn dilate(f: &SpectralField, sigma: usize) -> Result<SpectralField> {
    if sigma == 0 {
        return Err(Error::Domain("dilation factor must be positive".into()));
    }
    let src = f.grid();
    let dst = Grid3::new(src.n() * sigma)?;
    let m = src.kmax();
    let s = sigma as i64;
    let comps = f
        .comps()
        .iter()
        .map(|c| {
            let mut out = Array3::from_elem(dst.spectral_shape(), C0);
            for kx in -m..=m {
                for ky in -m..=m {
                    for kz in 0..=m {
                        out[[dst.index(s * kx), dst.index(s * ky), (s * kz) as usize]] =
                            c[[src.index(kx), src.index(ky), kz as usize]];
                    }
                }
            }
            out
        })
        .collect();
    Ok(SpectralField::from_parts_unchecked(dst, f.rank(), comps, f.flags()))
}

/// `f(σ·)` on the same grid; fails if some active mode would leave the band.
/// Modes below `1e-13` of the component's largest coefficient count as
/// round-off and are dropped.
pub fn dilate_within(f: &SpectralField, sigma: usize) -> Result<SpectralField> {
    if sigma == 0 {
        return Err(Error::Domain("dilation factor must be positive".into()));
    }
    let g = f.grid();
    let m = g.kmax();
    let s = sigma as i64;
    let mut comps = Vec::with_capacity(f.ncomp());
    for c in f.comps() {
        let cut = 1e-13 * c.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut out = Array3::from_elem(g.spectral_shape(), C0);
        for kx in -m..=m {
            for ky in -m..=m {
                for kz in 0..=m {
                    let z = c[[g.index(kx), g.index(ky), kz as usize]];
                    if z.norm() <= cut {
                        continue;
                    }
                    let t = [s * kx, s * ky, s * kz];
                    if !g.in_band(t) {
                        return Err(Error::Resolution(format!(
                            "mode {:?} dilated by {} leaves the band of N={}",
                            [kx, ky, kz],
                            sigma,
                            g.n()
                        )));
                    }
                    out[[g.index(t[0]), g.index(t[1]), t[2] as usize]] = z;
                }
            }
        }
        comps.push(out);
    }
    Ok(SpectralField::from_parts_unchecked(g, f.rank(), comps, f.flags()))
}

/// Keep only modes with Euclidean |k| <= kmax.
pub fn low_pass(f: &SpectralField, kmax: f64) -> SpectralField {
    let k2 = kmax * kmax;
    apply_real_multiplier(f, |k| {
        if ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64) <= k2 {
            1.0
        } else {
            0.0
        }
    })
}

/// Exponential filter `exp(-α (|k| / (N/2))^(2·order))`.
pub fn exponential_filter(f: &SpectralField, alpha: f64, order: u32) -> SpectralField {
    let kn = (f.grid().n() / 2) as f64;
    apply_real_multiplier(f, |k| {
        let r2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64 / (kn * kn);
        (-alpha * r2.powi(order as i32)).exp()
    })
}
