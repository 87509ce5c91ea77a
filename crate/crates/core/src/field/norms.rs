use ndarray::Array3;
use rayon::prelude::*;

use super::ops::TWO_PI;
use super::spectral::{half_weight, inverse_array, SpectralField};
use crate::error::{Error, Result};

/// Pointwise squared magnitude (Euclidean for vectors, Frobenius for tensors).
pub fn magnitude_sq(f: &SpectralField) -> Array3<f64> {
    let g = f.grid();
    let mut acc = Array3::<f64>::zeros(g.physical_shape());
    for c in f.comps() {
        let p = inverse_array(g, c);
        acc.as_slice_mut()
            .expect("standard layout")
            .par_iter_mut()
            .zip(p.as_slice().expect("standard layout").par_iter())
            .for_each(|(a, v)| *a += v * v);
    }
    acc
}

/// L^p norm (p = ∞ allowed) of a nonnegative pointwise magnitude given as its square.
pub fn lp_from_magnitude_sq(m2: &Array3<f64>, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("L^p needs p >= 1, got {p}")));
    }
    let s = m2.as_slice().expect("standard layout");
    if p.is_infinite() {
        return Ok(s.par_iter().cloned().reduce(|| 0.0, f64::max).sqrt());
    }
    let half = p / 2.0;
    let sum: f64 = s
        .par_chunks(4096)
        .map(|ch| ch.iter().map(|v| v.powf(half)).sum::<f64>())
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok((sum / s.len() as f64).powf(1.0 / p))
}

/// L^p norm by grid quadrature over the unit torus.
pub fn lp_norm(f: &SpectralField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("L^p needs p >= 1, got {p}")));
    }
    lp_from_magnitude_sq(&magnitude_sq(f), p)
}

/// H^s norm through the multiplier `w(k)^s`, with `w = |2πk|` (homogeneous)
/// or `(1 + |2πk|²)^{1/2}`.
pub fn sobolev_norm(f: &SpectralField, s: f64, homogeneous: bool) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("Sobolev index must lie in [0,1], got {s}")));
    }
    let g = f.grid();
    let n = g.n();
    let nzh = g.nzh();
    let fr = g.freqs();
    let mut total = 0.0;
    for c in f.comps() {
        let a = c.as_slice().expect("standard layout");
        total += a
            .par_chunks(n * nzh)
            .enumerate()
            .map(|(ix, slab)| {
                let mut acc = 0.0;
                for iy in 0..n {
                    for iz in 0..nzh {
                        let z = slab[iy * nzh + iz];
                        if z.re == 0.0 && z.im == 0.0 {
                            continue;
                        }
                        let k2 = (fr[ix] * fr[ix] + fr[iy] * fr[iy] + (iz * iz) as i64) as f64;
                        let x2 = TWO_PI * TWO_PI * k2;
                        let w2s = if s == 0.0 {
                            1.0
                        } else if homogeneous {
                            x2.powf(s)
                        } else {
                            (1.0 + x2).powf(s)
                        };
                        acc += half_weight(iz, nzh) * w2s * z.norm_sqr();
                    }
                }
                acc
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum::<f64>();
    }
    Ok(total.sqrt())
}

/// Σ_{j ≤ order} max over the grid of |∇^j f| (all partial derivatives of
/// order j, Frobenius magnitude).
pub fn cn_norm(f: &SpectralField, order: u32) -> Result<f64> {
    let g = f.grid();
    let mut total = 0.0;
    for j in 0..=order {
        let mut acc = Array3::<f64>::zeros(g.physical_shape());
        let nmulti = 3usize.pow(j);
        for c in f.comps() {
            let s = c.as_slice().expect("standard layout");
            for m in 0..nmulti {
                // counts of each axis in the multi-index
                let mut cnt = [0u32; 3];
                let mut r = m;
                for _ in 0..j {
                    cnt[r % 3] += 1;
                    r /= 3;
                }
                let spec = super::ops::fill_modes(g, |k, i| {
                    let mut z = s[i];
                    for ax in 0..3 {
                        for _ in 0..cnt[ax] {
                            z *= num_complex::Complex64::new(0.0, TWO_PI * k[ax] as f64);
                        }
                    }
                    z
                });
                let p = inverse_array(g, &spec);
                acc.as_slice_mut()
                    .expect("standard layout")
                    .par_iter_mut()
                    .zip(p.as_slice().expect("standard layout").par_iter())
                    .for_each(|(a, v)| *a += v * v);
            }
        }
        total += lp_from_magnitude_sq(&acc, f64::INFINITY)?;
    }
    Ok(total)
}
