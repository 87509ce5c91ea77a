//! Geometric decomposition of symmetric matrices near the identity into positive
//! combinations of lattice rank-one tensors `e_k ⊗ e_k`, with affine weights.

use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Rank, SpectralField};

pub type Mat3 = [[f64; 3]; 3];

/// Default base points, multiples of 1/32. Pairs (0,5), (1,6) and (4,5) of the
/// default lines meet; every other pair is at least 1/16 apart on the torus.
pub const DEFAULT_BASE_POINTS_32: [[i64; 3]; 9] = [
    [30, 3, 9],
    [0, 31, 26],
    [2, 15, 7],
    [24, 1, 19],
    [0, 1, 15],
    [24, 17, 23],
    [0, 13, 27],
    [13, 28, 3],
    [8, 17, 2],
];

pub const DEFAULT_DIRECTIONS: [[i64; 3]; 9] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 1, 0],
    [1, -1, 0],
    [0, 1, 1],
    [0, 1, -1],
    [1, 0, 1],
    [1, 0, -1],
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionSet {
    pub directions: Vec<[i64; 3]>,
    /// Base points p_k in [0,1)³.
    pub base_points: Vec<[f64; 3]>,
}

impl Default for DirectionSet {
    fn default() -> Self {
        Self {
            directions: DEFAULT_DIRECTIONS.to_vec(),
            base_points: DEFAULT_BASE_POINTS_32
                .iter()
                .map(|p| p.map(|v| v as f64 / 32.0))
                .collect(),
        }
    }
}

impl DirectionSet {
    pub fn new(directions: Vec<[i64; 3]>, base_points: Vec<[f64; 3]>) -> Result<Self> {
        if directions.len() != base_points.len() {
            return Err(Error::Construction("one base point per direction required".into()));
        }
        if let Some(k) = directions.iter().find(|k| **k == [0, 0, 0]) {
            return Err(Error::Construction(format!("zero direction {k:?}")));
        }
        Ok(Self { directions, base_points })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn unit(&self, i: usize) -> [f64; 3] {
        unit(self.directions[i])
    }

    /// Rank of the span of {e_k ⊗ e_k} inside the 6-dimensional symmetric matrices.
    pub fn span_rank(&self) -> usize {
        direction_matrix(self).rank(1e-10)
    }
}

pub fn unit(k: [i64; 3]) -> [f64; 3] {
    let n = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
    [k[0] as f64 / n, k[1] as f64 / n, k[2] as f64 / n]
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Orthonormal coordinates on symmetric matrices (Frobenius isometry).
pub fn mandel(m: &Mat3) -> [f64; 6] {
    [
        m[0][0],
        m[1][1],
        m[2][2],
        SQRT2 * m[0][1],
        SQRT2 * m[1][2],
        SQRT2 * m[0][2],
    ]
}

pub fn outer3(e: [f64; 3]) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = e[i] * e[j];
        }
    }
    m
}

pub fn identity3() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

pub fn frobenius(m: &Mat3) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

fn direction_matrix(d: &DirectionSet) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(6, d.len());
    for (col, k) in d.directions.iter().enumerate() {
        let v = mandel(&outer3(unit(*k)));
        for (row, x) in v.iter().enumerate() {
            m[(row, col)] = *x;
        }
    }
    m
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometricDecomposition {
    pub directions: DirectionSet,
    /// Base weights with Σ c_k e_k⊗e_k = Id.
    pub c: Vec<f64>,
    /// Rows of the right inverse in Mandel coordinates: L_k(S) = l_k · mandel(S).
    pub l: Vec<[f64; 6]>,
    /// Radius of the Frobenius ball around Id on which every Γ_k² ≥ c_min/2.
    pub r0: f64,
}

pub fn build_decomposition(directions: &DirectionSet) -> Result<GeometricDecomposition> {
    let m = direction_matrix(directions);
    let rank = m.rank(1e-10);
    if rank < 6 {
        return Err(Error::Construction(format!(
            "directions span a {rank}-dimensional subspace of symmetric matrices, need 6"
        )));
    }
    let gram = &m * m.transpose();
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Construction("singular direction Gram matrix".into()))?;
    let pinv = m.transpose() * inv;
    let id = DVector::from_row_slice(&mandel(&identity3()));
    let c: Vec<f64> = (&pinv * id).iter().cloned().collect();
    if let Some((i, v)) = c.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::Construction(format!(
            "base weight for direction {:?} is {v}, not positive",
            directions.directions[i]
        )));
    }
    let l: Vec<[f64; 6]> = (0..directions.len())
        .map(|k| std::array::from_fn(|j| pinv[(k, j)]))
        .collect();
    let cmin = c.iter().cloned().fold(f64::INFINITY, f64::min);
    let r0 = c
        .iter()
        .zip(&l)
        .map(|(ck, lk)| (ck - cmin / 2.0) / lk.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min);
    Ok(GeometricDecomposition {
        directions: directions.clone(),
        c,
        l,
        r0,
    })
}

impl GeometricDecomposition {
    pub fn c_min(&self) -> f64 {
        self.c.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Γ_k² = c_k + L_k(S) for S = R − Id, without the ball check.
    pub fn gamma_sq_unchecked(&self, s: &[f64; 6]) -> Vec<f64> {
        self.c
            .iter()
            .zip(&self.l)
            .map(|(c, l)| c + l.iter().zip(s).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    pub fn gamma_sq(&self, r: &Mat3) -> Result<Vec<f64>> {
        let mut s = *r;
        for (i, row) in s.iter_mut().enumerate() {
            row[i] -= 1.0;
        }
        let dist = frobenius(&s);
        if dist > self.r0 {
            return Err(Error::Domain(format!(
                "‖R − Id‖_F = {dist} exceeds the positivity radius {}",
                self.r0
            )));
        }
        Ok(self.gamma_sq_unchecked(&mandel(&s)))
    }

    /// Γ_k(R) for R within the certified ball.
    pub fn gamma(&self, r: &Mat3) -> Result<Vec<f64>> {
        Ok(self.gamma_sq(r)?.into_iter().map(f64::sqrt).collect())
    }

    /// Σ w_k e_k⊗e_k.
    pub fn reconstruct(&self, w: &[f64]) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for (k, wk) in w.iter().enumerate() {
            let e = self.directions.unit(k);
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] += wk * e[i] * e[j];
                }
            }
        }
        m
    }

    /// Per-direction fields Γ_k(Id − R̄/ρ) as spectral fields. Transforming drops
    /// the Nyquist modes, so grid values match [`Self::gamma_field_physical`]
    /// only up to that content.
    pub fn gamma_field(&self, rbar: &SpectralField, rho: &SpectralField) -> Result<Vec<SpectralField>> {
        let grid = rbar.grid();
        self.gamma_field_physical(rbar, rho)?
            .into_iter()
            .map(|a| SpectralField::from_physical(grid, Rank::Scalar, &[a]))
            .collect()
    }

    /// Γ_k(Id − R̄/ρ) at every grid point, exactly as evaluated.
    pub fn gamma_field_physical(&self, rbar: &SpectralField, rho: &SpectralField) -> Result<Vec<Array3<f64>>> {
        rbar.check_rank(Rank::Tensor, "gamma_field")?;
        rho.check_rank(Rank::Scalar, "gamma_field")?;
        rbar.check_same_grid(rho)?;
        let grid = rbar.grid();
        let rp = rbar.to_physical();
        let pp = rho.component_physical(0);
        let ps = pp.as_slice().expect("standard layout");
        let rs: Vec<&[f64]> = rp.iter().map(|a| a.as_slice().expect("standard layout")).collect();
        let npts = ps.len();
        let nk = self.c.len();
        // Worst ball violation: (ratio, flat index).
        let worst = (0..npts)
            .into_par_iter()
            .map(|i| {
                let m: Mat3 = std::array::from_fn(|a| std::array::from_fn(|b| rs[3 * a + b][i] / ps[i]));
                (frobenius(&m), i)
            })
            .reduce(|| (0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
        if !(worst.0 <= self.r0) {
            let n = grid.n();
            let (ix, iy, iz) = (worst.1 / (n * n), (worst.1 / n) % n, worst.1 % n);
            return Err(Error::Domain(format!(
                "‖R̄/ρ‖_F = {} exceeds r0 = {} at grid point ({ix}, {iy}, {iz})",
                worst.0, self.r0
            )));
        }
        let mut out = Vec::with_capacity(nk);
        for k in 0..nk {
            let (ck, lk) = (self.c[k], self.l[k]);
            let mut a = Array3::<f64>::zeros(grid.physical_shape());
            a.as_slice_mut()
                .expect("standard layout")
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, v)| {
                    let s: Mat3 = std::array::from_fn(|x| std::array::from_fn(|y| -rs[3 * x + y][i] / ps[i]));
                    let g = ck + lk.iter().zip(mandel(&s)).map(|(p, q)| p * q).sum::<f64>();
                    *v = g.max(0.0).sqrt();
                });
            out.push(a);
        }
        Ok(out)
    }
}
