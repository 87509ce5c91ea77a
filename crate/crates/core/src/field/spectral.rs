use bitflags::bitflags;
use ndarray::Array3;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::grid::Grid3;
use super::transform;
use crate::error::{Error, Result};

pub const C0: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rank {
    Scalar,
    Vector,
    Tensor,
}

impl Rank {
    pub fn ncomp(self) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => 3,
            Rank::Tensor => 9,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Rank::Scalar => 0,
            Rank::Vector => 1,
            Rank::Tensor => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Rank> {
        match c {
            0 => Some(Rank::Scalar),
            1 => Some(Rank::Vector),
            2 => Some(Rank::Tensor),
            _ => None,
        }
    }

    pub fn up(self) -> Option<Rank> {
        match self {
            Rank::Scalar => Some(Rank::Vector),
            Rank::Vector => Some(Rank::Tensor),
            Rank::Tensor => None,
        }
    }

    pub fn down(self) -> Option<Rank> {
        match self {
            Rank::Scalar => None,
            Rank::Vector => Some(Rank::Scalar),
            Rank::Tensor => Some(Rank::Vector),
        }
    }
}

bitflags! {
    /// Properties asserted on a field. Bit values match the snapshot format.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct FieldFlags: u8 {
        const REAL = 1;
        const DIVERGENCE_FREE = 2;
        const SYMMETRIC = 4;
        const TRACELESS = 8;
    }
}

/// Scalar, vector or tensor field on the unit torus, stored as the half
/// spectrum of each real component. Tensor component `(i, j)` lives at `3i + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid3,
    rank: Rank,
    comps: Vec<Array3<Complex64>>,
    flags: FieldFlags,
}

/// Weight of a half-spectrum entry in full-spectrum sums.
#[inline]
pub(crate) fn half_weight(iz: usize, nzh: usize) -> f64 {
    if iz == 0 || iz == nzh - 1 {
        1.0
    } else {
        2.0
    }
}

impl SpectralField {
    pub fn zeros(grid: Grid3, rank: Rank) -> Self {
        let comps = (0..rank.ncomp())
            .map(|_| Array3::from_elem(grid.spectral_shape(), C0))
            .collect();
        Self {
            grid,
            rank,
            comps,
            flags: FieldFlags::REAL,
        }
    }

    pub fn from_components(grid: Grid3, rank: Rank, comps: Vec<Array3<Complex64>>) -> Result<Self> {
        if comps.len() != rank.ncomp() {
            return Err(Error::Rank(format!(
                "{} components given for rank {:?}",
                comps.len(),
                rank
            )));
        }
        for c in &comps {
            if c.dim() != grid.spectral_shape() {
                return Err(Error::Domain("component shape does not match grid".into()));
            }
        }
        let mut f = Self {
            grid,
            rank,
            comps,
            flags: FieldFlags::REAL,
        };
        f.clear_nyquist();
        Ok(f)
    }

    /// Constant field with the given per-component values.
    pub fn constant(grid: Grid3, rank: Rank, values: &[f64]) -> Result<Self> {
        if values.len() != rank.ncomp() {
            return Err(Error::Rank("constant: wrong number of values".into()));
        }
        let mut f = Self::zeros(grid, rank);
        for (c, v) in f.comps.iter_mut().zip(values) {
            c[[0, 0, 0]] = Complex64::new(*v, 0.0);
        }
        Ok(f)
    }

    /// Band-limited projection of physical samples.
    pub fn from_physical(grid: Grid3, rank: Rank, phys: &[Array3<f64>]) -> Result<Self> {
        if phys.len() != rank.ncomp() {
            return Err(Error::Rank("from_physical: wrong component count".into()));
        }
        let comps = phys
            .iter()
            .map(|p| {
                if p.dim() != grid.physical_shape() {
                    return Err(Error::Domain("physical shape does not match grid".into()));
                }
                // Mixed-radix transforms leave round-off in the non-mean modes of
                // a constant array; keep constants exact.
                let s = p.as_slice_memory_order();
                if let Some(v) = s.and_then(|s| s.first().filter(|v| s.par_iter().all(|x| x == *v))) {
                    let mut a = Array3::from_elem(grid.spectral_shape(), C0);
                    a[[0, 0, 0]] = Complex64::new(*v, 0.0);
                    return Ok(a);
                }
                Ok(forward_array(grid, p))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_components(grid, rank, comps)
    }

    /// Sample `f(x, out)` at every grid point `x = (i, j, k)/n`.
    pub fn from_fn<F>(grid: Grid3, rank: Rank, f: F) -> Self
    where
        F: Fn([f64; 3], &mut [f64]) + Sync,
    {
        let n = grid.n();
        let nc = rank.ncomp();
        let h = grid.spacing();
        let mut phys: Vec<Array3<f64>> = (0..nc).map(|_| Array3::zeros((n, n, n))).collect();
        {
            let mut per_comp: Vec<std::slice::ChunksMut<'_, f64>> = phys
                .iter_mut()
                .map(|p| p.as_slice_mut().expect("standard layout").chunks_mut(n * n))
                .collect();
            let slabs: Vec<Vec<&mut [f64]>> = (0..n)
                .map(|_| per_comp.iter_mut().map(|it| it.next().expect("slab")).collect())
                .collect();
            slabs.into_par_iter().enumerate().for_each(|(i, mut slab)| {
                let mut out = vec![0.0; nc];
                for j in 0..n {
                    for k in 0..n {
                        f([i as f64 * h, j as f64 * h, k as f64 * h], &mut out);
                        for (c, v) in out.iter().enumerate() {
                            slab[c][j * n + k] = *v;
                        }
                    }
                }
            });
        }
        Self::from_physical(grid, rank, &phys).expect("shapes consistent")
    }

    /// Random real field with modes |k_j| <= kmax and coefficients decaying like 1/(1+|k|^2).
    pub fn random<R: Rng>(grid: Grid3, rank: Rank, kmax: i64, rng: &mut R) -> Self {
        let mut f = Self::zeros(grid, rank);
        let kmax = kmax.min(grid.kmax());
        for c in f.comps.iter_mut() {
            for kx in -kmax..=kmax {
                for ky in -kmax..=kmax {
                    for kz in 0..=kmax {
                        let amp = 1.0 / (1.0 + (kx * kx + ky * ky + kz * kz) as f64);
                        let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                        c[[grid.index(kx), grid.index(ky), kz as usize]] = z * amp;
                    }
                }
            }
        }
        f.enforce_hermitian();
        f
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn flags(&self) -> FieldFlags {
        self.flags
    }

    pub fn set_flags(&mut self, flags: FieldFlags) {
        self.flags = flags;
    }

    pub fn with_flags(mut self, flags: FieldFlags) -> Self {
        self.flags = flags;
        self
    }

    pub fn comp(&self, c: usize) -> &Array3<Complex64> {
        &self.comps[c]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut Array3<Complex64> {
        &mut self.comps[c]
    }

    pub fn comps(&self) -> &[Array3<Complex64>] {
        &self.comps
    }

    pub fn into_comps(self) -> Vec<Array3<Complex64>> {
        self.comps
    }

    /// Scalar field holding component `c`.
    pub fn component(&self, c: usize) -> SpectralField {
        SpectralField {
            grid: self.grid,
            rank: Rank::Scalar,
            comps: vec![self.comps[c].clone()],
            flags: FieldFlags::REAL,
        }
    }

    /// Assemble a field of `rank` from scalar fields.
    pub fn from_scalars(rank: Rank, parts: Vec<SpectralField>) -> Result<Self> {
        let grid = parts
            .first()
            .ok_or_else(|| Error::Rank("no components".into()))?
            .grid;
        let mut comps = Vec::with_capacity(parts.len());
        for p in parts {
            if p.grid != grid {
                return Err(Error::GridMismatch(p.grid.n(), grid.n()));
            }
            if p.rank != Rank::Scalar {
                return Err(Error::Rank("from_scalars expects scalar parts".into()));
            }
            comps.extend(p.comps);
        }
        Self::from_components(grid, rank, comps)
    }

    pub fn check_same_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(self.grid.n(), other.grid.n()));
        }
        Ok(())
    }

    pub fn check_rank(&self, rank: Rank, what: &str) -> Result<()> {
        if self.rank != rank {
            return Err(Error::Rank(format!("{what}: expected {rank:?}, got {:?}", self.rank)));
        }
        Ok(())
    }

    /// Physical samples of component `c`.
    pub fn component_physical(&self, c: usize) -> Array3<f64> {
        inverse_array(self.grid, &self.comps[c])
    }

    pub fn to_physical(&self) -> Vec<Array3<f64>> {
        (0..self.ncomp()).map(|c| self.component_physical(c)).collect()
    }

    /// Per-component means.
    pub fn mean(&self) -> Vec<f64> {
        self.comps.iter().map(|c| c[[0, 0, 0]].re).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.comps
            .iter()
            .all(|c| c.as_slice().expect("standard layout").iter().all(|z| *z == C0))
    }

    /// True when every non-mean coefficient is exactly zero.
    pub fn is_constant(&self) -> bool {
        self.comps.iter().all(|c| {
            c.as_slice()
                .expect("standard layout")
                .iter()
                .skip(1)
                .all(|z| *z == C0)
        })
    }

    pub fn sub_mean(mut self) -> Self {
        for c in self.comps.iter_mut() {
            c[[0, 0, 0]] = C0;
        }
        self
    }

    pub fn scale(mut self, s: f64) -> Self {
        self.scale_in_place(s);
        self
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for c in self.comps.iter_mut() {
            c.as_slice_mut().expect("standard layout").par_iter_mut().for_each(|z| *z *= s);
        }
    }

    /// self += s * other
    pub fn axpy(&mut self, s: f64, other: &SpectralField) -> Result<()> {
        self.check_same_grid(other)?;
        if self.rank != other.rank {
            return Err(Error::Rank("axpy rank mismatch".into()));
        }
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            let a = a.as_slice_mut().expect("standard layout");
            let b = b.as_slice().expect("standard layout");
            a.par_iter_mut().zip(b.par_iter()).for_each(|(x, y)| *x += *y * s);
        }
        self.flags &= other.flags;
        Ok(())
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Add `s * other` into component `c`.
    pub fn axpy_component(&mut self, c: usize, s: f64, other: &Array3<Complex64>) {
        let a = self.comps[c].as_slice_mut().expect("standard layout");
        let b = other.as_slice().expect("standard layout");
        a.par_iter_mut().zip(b.par_iter()).for_each(|(x, y)| *x += *y * s);
    }

    /// L2 norm over the unit torus via Parseval (pointwise Euclidean/Frobenius magnitude).
    pub fn l2_norm(&self) -> f64 {
        self.comps.iter().map(|c| l2_sq_array(self.grid, c)).sum::<f64>().sqrt()
    }

    /// Spectral inner product `∫ f·g`.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.check_same_grid(other)?;
        if self.rank != other.rank {
            return Err(Error::Rank("inner rank mismatch".into()));
        }
        let nzh = self.grid.nzh();
        let mut s = 0.0;
        for (a, b) in self.comps.iter().zip(&other.comps) {
            let a = a.as_slice().expect("standard layout");
            let b = b.as_slice().expect("standard layout");
            for (idx, (x, y)) in a.iter().zip(b).enumerate() {
                s += half_weight(idx % nzh, nzh) * (x * y.conj()).re;
            }
        }
        Ok(s)
    }

    /// Zero all coefficients outside the retained band.
    pub fn clear_nyquist(&mut self) {
        let n = self.grid.n();
        let h = n / 2;
        for c in self.comps.iter_mut() {
            for ix in 0..n {
                for iy in 0..n {
                    for iz in 0..self.grid.nzh() {
                        if ix == h || iy == h || iz == h {
                            c[[ix, iy, iz]] = C0;
                        }
                    }
                }
            }
        }
    }

    /// Impose c(-k) = conj c(k) on the kz = 0 plane.
    pub fn enforce_hermitian(&mut self) {
        let g = self.grid;
        let n = g.n();
        for c in self.comps.iter_mut() {
            for ix in 0..n {
                for iy in 0..n {
                    let jx = (n - ix) % n;
                    let jy = (n - iy) % n;
                    if (jx, jy) < (ix, iy) {
                        continue;
                    }
                    let a = c[[ix, iy, 0]];
                    let b = c[[jx, jy, 0]];
                    let m = (a + b.conj()) * 0.5;
                    c[[ix, iy, 0]] = m;
                    c[[jx, jy, 0]] = m.conj();
                }
            }
        }
        self.clear_nyquist();
    }

    /// Largest violation of Hermitian symmetry on the kz = 0 plane, relative to the L2 norm.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n();
        let mut worst: f64 = 0.0;
        for c in &self.comps {
            for ix in 0..n {
                for iy in 0..n {
                    let d = c[[ix, iy, 0]] - c[[(n - ix) % n, (n - iy) % n, 0]].conj();
                    worst = worst.max(d.norm());
                }
            }
        }
        worst / (self.l2_norm() + 1e-300)
    }

    /// Transpose of a tensor field.
    pub fn transpose(&self) -> Result<SpectralField> {
        self.check_rank(Rank::Tensor, "transpose")?;
        let mut comps = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                comps.push(self.comps[3 * j + i].clone());
            }
        }
        Ok(SpectralField {
            grid: self.grid,
            rank: Rank::Tensor,
            comps,
            flags: self.flags,
        })
    }

    /// Trace of a tensor field.
    pub fn trace(&self) -> Result<SpectralField> {
        self.check_rank(Rank::Tensor, "trace")?;
        let mut t = self.component(0);
        t.axpy_component(0, 1.0, &self.comps[4]);
        t.axpy_component(0, 1.0, &self.comps[8]);
        Ok(t)
    }

    /// (A + A^T)/2 with the trace removed.
    pub fn symmetric_traceless_part(&self) -> Result<SpectralField> {
        self.check_rank(Rank::Tensor, "symmetric_traceless_part")?;
        let mut out = SpectralField::zeros(self.grid, Rank::Tensor);
        for i in 0..3 {
            for j in 0..3 {
                out.axpy_component(3 * i + j, 0.5, &self.comps[3 * i + j]);
                out.axpy_component(3 * i + j, 0.5, &self.comps[3 * j + i]);
            }
        }
        let tr = self.trace()?;
        for i in 0..3 {
            out.axpy_component(4 * i, -1.0 / 3.0, &tr.comps[0]);
        }
        out.flags = FieldFlags::REAL | FieldFlags::SYMMETRIC | FieldFlags::TRACELESS;
        Ok(out)
    }

    /// `s * Id` for a scalar field `s`.
    pub fn times_identity(&self) -> Result<SpectralField> {
        self.check_rank(Rank::Scalar, "times_identity")?;
        let mut out = SpectralField::zeros(self.grid, Rank::Tensor);
        for i in 0..3 {
            out.comps[4 * i] = self.comps[0].clone();
        }
        out.flags = FieldFlags::REAL | FieldFlags::SYMMETRIC;
        Ok(out)
    }

    /// Asymmetry ‖A − Aᵀ‖ / ‖A‖ for tensors.
    pub fn asymmetry(&self) -> Result<f64> {
        self.check_rank(Rank::Tensor, "asymmetry")?;
        let mut sq = 0.0;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let d = &self.comps[3 * i + j] - &self.comps[3 * j + i];
            sq += 2.0 * l2_sq_array(self.grid, &d);
        }
        Ok(sq.sqrt() / (self.l2_norm() + 1e-300))
    }

    /// ‖tr A‖ / ‖A‖ for tensors.
    pub fn trace_defect(&self) -> Result<f64> {
        Ok(self.trace()?.l2_norm() / (self.l2_norm() + 1e-300))
    }

    /// Embed into a finer grid (zero padding) or truncate to a coarser one.
    pub fn resample(&self, target: Grid3) -> SpectralField {
        let comps = self
            .comps
            .iter()
            .map(|c| resample_array(self.grid, target, c))
            .collect();
        SpectralField {
            grid: target,
            rank: self.rank,
            comps,
            flags: self.flags,
        }
    }

    pub(crate) fn from_parts_unchecked(
        grid: Grid3,
        rank: Rank,
        comps: Vec<Array3<Complex64>>,
        flags: FieldFlags,
    ) -> Self {
        Self {
            grid,
            rank,
            comps,
            flags,
        }
    }
}

pub(crate) fn l2_sq_array(grid: Grid3, c: &Array3<Complex64>) -> f64 {
    let nzh = grid.nzh();
    c.as_slice()
        .expect("standard layout")
        .par_chunks(nzh)
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(iz, z)| half_weight(iz, nzh) * z.norm_sqr())
                .sum::<f64>()
        })
        // Fixed-order accumulation keeps norms identical across thread counts.
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

pub(crate) fn forward_array(grid: Grid3, p: &Array3<f64>) -> Array3<Complex64> {
    let mut out = Array3::from_elem(grid.spectral_shape(), C0);
    let src = p.as_standard_layout();
    transform::forward(
        grid.n(),
        src.as_slice().expect("standard layout"),
        out.as_slice_mut().expect("standard layout"),
    );
    out
}

pub(crate) fn inverse_array(grid: Grid3, c: &Array3<Complex64>) -> Array3<f64> {
    let n = grid.n();
    let mut out = Array3::zeros((n, n, n));
    transform::inverse(
        n,
        c.as_slice().expect("standard layout"),
        out.as_slice_mut().expect("standard layout"),
    );
    out
}

/// Copy retained modes between grids; modes absent from the target are dropped.
pub(crate) fn resample_array(src: Grid3, dst: Grid3, c: &Array3<Complex64>) -> Array3<Complex64> {
    let mut out = Array3::from_elem(dst.spectral_shape(), C0);
    let m = src.kmax().min(dst.kmax());
    for kx in -m..=m {
        for ky in -m..=m {
            for kz in 0..=m {
                out[[dst.index(kx), dst.index(ky), kz as usize]] =
                    c[[src.index(kx), src.index(ky), kz as usize]];
            }
        }
    }
    out
}
