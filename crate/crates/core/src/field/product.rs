//! Dealiased pointwise products. Factors are lifted to a finer grid, multiplied
//! there and truncated back, which is exact for inputs in the retained band.
//! The finer grid is the 3/2 grid, or a smaller alias-free one when both
//! factors occupy a narrow band.

use std::collections::BTreeMap;

use ndarray::Array3;
use rayon::prelude::*;

use super::grid::Grid3;
use super::spectral::{forward_array, inverse_array, resample_array, FieldFlags, Rank, SpectralField};
use crate::error::{Error, Result};

/// Output component `o` is `Σ coeff · a[p] · b[q]` over `terms[o]`.
pub type Terms = Vec<Vec<(usize, usize, f64)>>;

/// Largest |k_i| over modes with a nonzero coefficient in any component.
pub fn spectral_band(f: &SpectralField) -> i64 {
    let g = f.grid();
    f.comps()
        .iter()
        .map(|c| {
            let mut band = -1i64;
            for ((ix, iy, iz), v) in c.indexed_iter() {
                if v.re != 0.0 || v.im != 0.0 {
                    band = band.max(g.freq(ix).abs().max(g.freq(iy).abs()).max(iz as i64));
                }
            }
            band
        })
        .max()
        .unwrap_or(-1)
}

fn is_smooth_size(mut m: usize) -> bool {
    for p in [2, 3, 5] {
        while m.is_multiple_of(p) {
            m /= p;
        }
    }
    m == 1
}

/// Grid on which the product of factors with bands `ka`, `kb` is alias-free
/// for every mode `grid` retains: M ≥ ka + kb + min(kmax, ka + kb) + 1.
pub fn product_grid(grid: Grid3, ka: i64, kb: i64) -> Grid3 {
    let fine = grid.fine();
    let kout = grid.kmax().min(ka + kb);
    let need = (ka + kb + kout + 1).max(4) as usize;
    let mut m = need + need % 2;
    while !is_smooth_size(m) {
        m += 2;
    }
    if m >= fine.n() {
        fine
    } else {
        Grid3::new(m).expect("even size >= 4")
    }
}

fn lift(grid: Grid3, fine: Grid3, f: &SpectralField, c: usize) -> Array3<f64> {
    inverse_array(fine, &resample_array(grid, fine, f.comp(c)))
}

/// `out += scale · B(a, b)` for the bilinear form described by `terms`.
pub fn bilinear_into(
    a: &SpectralField,
    b: &SpectralField,
    terms: &Terms,
    scale: f64,
    out: &mut SpectralField,
) -> Result<()> {
    a.check_same_grid(b)?;
    a.check_same_grid(out)?;
    if terms.len() != out.ncomp() {
        return Err(Error::Rank("bilinear: term table does not match output rank".into()));
    }
    let grid = a.grid();
    if a.is_zero() || b.is_zero() {
        return Ok(());
    }
    if a.is_constant() || b.is_constant() {
        let (cst, var, const_is_a) = if a.is_constant() { (a, b, true) } else { (b, a, false) };
        let m = cst.mean();
        for (o, ts) in terms.iter().enumerate() {
            for &(p, q, c) in ts {
                let (ci, vi) = if const_is_a { (p, q) } else { (q, p) };
                if m[ci] != 0.0 {
                    out.axpy_component(o, scale * c * m[ci], var.comp(vi));
                }
            }
        }
        return Ok(());
    }

    // Factor components are lifted to the fine grid on first use and released
    // after the last term that reads them, so at most the components shared
    // across outputs are resident at once.
    let same = std::ptr::eq(a, b);
    let ka = spectral_band(a);
    let fine = product_grid(grid, ka, if same { ka } else { spectral_band(b) });
    let key_a = |p: usize| (0u8, p);
    let key_b = |q: usize| if same { (0u8, q) } else { (1u8, q) };
    let mut uses: BTreeMap<(u8, usize), usize> = BTreeMap::new();
    for &(p, q, _) in terms.iter().flatten() {
        *uses.entry(key_a(p)).or_default() += 1;
        *uses.entry(key_b(q)).or_default() += 1;
    }
    let mut cache: BTreeMap<(u8, usize), Array3<f64>> = BTreeMap::new();
    let mut acc = Array3::<f64>::zeros(fine.physical_shape());
    for (o, ts) in terms.iter().enumerate() {
        if ts.is_empty() {
            continue;
        }
        acc.as_slice_mut().expect("standard layout").par_iter_mut().for_each(|v| *v = 0.0);
        for &(p, q, c) in ts {
            for key in [key_a(p), key_b(q)] {
                cache.entry(key).or_insert_with(|| {
                    let src = if key.0 == 0 { a } else { b };
                    lift(grid, fine, src, key.1)
                });
            }
            {
                let x = cache[&key_a(p)].as_slice().expect("standard layout");
                let y = cache[&key_b(q)].as_slice().expect("standard layout");
                acc.as_slice_mut()
                    .expect("standard layout")
                    .par_iter_mut()
                    .zip(x.par_iter().zip(y.par_iter()))
                    .for_each(|(s, (u, v))| *s += c * u * v);
            }
            for key in [key_a(p), key_b(q)] {
                let n = uses.get_mut(&key).expect("counted");
                *n -= 1;
                if *n == 0 {
                    cache.remove(&key);
                }
            }
        }
        let spec = forward_array(fine, &acc);
        let back = resample_array(fine, grid, &spec);
        out.axpy_component(o, scale, &back);
    }
    Ok(())
}

pub fn bilinear(a: &SpectralField, b: &SpectralField, rank: Rank, terms: &Terms) -> Result<SpectralField> {
    let mut out = SpectralField::zeros(a.grid(), rank);
    bilinear_into(a, b, terms, 1.0, &mut out)?;
    Ok(out)
}

pub fn mul_terms(rank: Rank) -> Terms {
    (0..rank.ncomp()).map(|o| vec![(0, o, 1.0)]).collect()
}

pub fn outer_terms() -> Terms {
    (0..9).map(|o| vec![(o / 3, o % 3, 1.0)]).collect()
}

/// `u⊗v + v⊗u` as a single bilinear form in (u, v).
pub fn sym_outer_terms() -> Terms {
    (0..9).map(|o| vec![(o / 3, o % 3, 1.0), (o % 3, o / 3, 1.0)]).collect()
}

pub fn traceless_terms() -> Terms {
    (0..9)
        .map(|o| {
            let (i, j) = (o / 3, o % 3);
            let mut t = vec![(i, j, 1.0)];
            if i == j {
                t.extend((0..3).map(|l| (l, l, -1.0 / 3.0)));
            }
            t
        })
        .collect()
}

/// Scalar times a field of any rank.
pub fn mul(s: &SpectralField, f: &SpectralField) -> Result<SpectralField> {
    s.check_rank(Rank::Scalar, "mul")?;
    bilinear(s, f, f.rank(), &mul_terms(f.rank()))
}

/// Product for any rank pairing: scalar·field, field·scalar, vector⊗vector,
/// tensor:tensor (full contraction).
pub fn product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    match (f.rank(), g.rank()) {
        (Rank::Scalar, _) => mul(f, g),
        (_, Rank::Scalar) => mul(g, f),
        (Rank::Vector, Rank::Vector) => outer(f, g),
        (Rank::Tensor, Rank::Tensor) => double_dot(f, g),
        (Rank::Tensor, Rank::Vector) => matvec(f, g),
        (Rank::Vector, Rank::Tensor) => Err(Error::Rank(
            "vector·tensor is ambiguous; use matvec on the transpose".into(),
        )),
    }
}

pub fn outer(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.check_rank(Rank::Vector, "outer")?;
    v.check_rank(Rank::Vector, "outer")?;
    let mut out = bilinear(u, v, Rank::Tensor, &outer_terms())?;
    if std::ptr::eq(u, v) {
        out.set_flags(FieldFlags::REAL | FieldFlags::SYMMETRIC);
    }
    Ok(out)
}

pub fn sym_outer(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.check_rank(Rank::Vector, "sym_outer")?;
    v.check_rank(Rank::Vector, "sym_outer")?;
    Ok(bilinear(u, v, Rank::Tensor, &sym_outer_terms())?
        .with_flags(FieldFlags::REAL | FieldFlags::SYMMETRIC))
}

pub fn dot(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.check_rank(Rank::Vector, "dot")?;
    v.check_rank(Rank::Vector, "dot")?;
    bilinear(u, v, Rank::Scalar, &vec![(0..3).map(|i| (i, i, 1.0)).collect()])
}

pub fn double_dot(a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    a.check_rank(Rank::Tensor, "double_dot")?;
    b.check_rank(Rank::Tensor, "double_dot")?;
    bilinear(a, b, Rank::Scalar, &vec![(0..9).map(|i| (i, i, 1.0)).collect()])
}

/// `(A v)_i = A_ij v_j`.
pub fn matvec(a: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    a.check_rank(Rank::Tensor, "matvec")?;
    v.check_rank(Rank::Vector, "matvec")?;
    let terms = (0..3).map(|i| (0..3).map(|j| (3 * i + j, j, 1.0)).collect()).collect();
    bilinear(a, v, Rank::Vector, &terms)
}

pub fn cross(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.check_rank(Rank::Vector, "cross")?;
    v.check_rank(Rank::Vector, "cross")?;
    let terms = vec![
        vec![(1, 2, 1.0), (2, 1, -1.0)],
        vec![(2, 0, 1.0), (0, 2, -1.0)],
        vec![(0, 1, 1.0), (1, 0, -1.0)],
    ];
    bilinear(u, v, Rank::Vector, &terms)
}

/// `(u∘̊v)_ij = u_i v_j − δ_ij (u·v)/3`.
pub fn traceless_tensor_product(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.check_rank(Rank::Vector, "traceless_tensor_product")?;
    v.check_rank(Rank::Vector, "traceless_tensor_product")?;
    let mut out = bilinear(u, v, Rank::Tensor, &traceless_terms())?;
    let mut flags = FieldFlags::REAL | FieldFlags::TRACELESS;
    if std::ptr::eq(u, v) {
        flags |= FieldFlags::SYMMETRIC;
    }
    out.set_flags(flags);
    Ok(out)
}

/// `|u|²` for a vector field.
pub fn norm_sq(u: &SpectralField) -> Result<SpectralField> {
    dot(u, u)
}
