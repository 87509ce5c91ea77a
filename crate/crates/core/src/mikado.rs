//! Stationary Mikado pipe flows. Each potential Φ_k = μ⁻¹Φ(μ dist(x, m_k)) is
//! built directly from its Fourier coefficients, which live on the lattice
//! plane {m : m·k = 0}:
//!
//! Φ̂_k(m) = |k| μ⁻³ F̃(2π|m|/μ) e^{−2πi m·p_k},
//!
//! where F̃ is the planar radial transform of the base bump. W_k = φ_k e_k with
//! φ_k = ΔΦ_k, and Ω_k = e_k⊗∇Φ_k − ∇Φ_k⊗e_k. The σ-rescaled fields are index
//! dilations of fields built on the base grid N/σ.

use std::collections::BTreeMap;

use ndarray::Array3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::mollifier::composite_rule;
use crate::field::norms::lp_from_magnitude_sq;
use crate::field::ops::{dilate, fill_modes, TWO_PI};
use crate::field::product::mul;
use crate::field::spectral::inverse_array;
use crate::field::studies::{loglog_slope, ScalingTable};
use crate::field::{FieldFlags, Grid3, Rank, SpectralField};
use crate::geom::{unit, DirectionSet};

/// Distance on the torus from `x` to the periodic line through `p` along `k`.
pub fn dist_to_line(x: [f64; 3], k: [i64; 3], p: [f64; 3]) -> Result<f64> {
    if k == [0, 0, 0] {
        return Err(Error::Domain("line direction must be nonzero".into()));
    }
    let e = unit(k);
    let box_r = k.iter().map(|v| v.abs()).max().unwrap_or(0) + 1;
    let mut best = f64::INFINITY;
    for jx in -box_r..=box_r {
        for jy in -box_r..=box_r {
            for jz in -box_r..=box_r {
                let d = [
                    x[0] - p[0] + jx as f64,
                    x[1] - p[1] + jy as f64,
                    x[2] - p[2] + jz as f64,
                ];
                let t = d[0] * e[0] + d[1] * e[1] + d[2] * e[2];
                let q = [d[0] - t * e[0], d[1] - t * e[1], d[2] - t * e[2]];
                best = best.min((q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt());
            }
        }
    }
    Ok(best)
}

/// t(s) = (s − ½)(1 − s) on (½, 1).
fn bump_arg(s: f64) -> Option<(f64, f64)> {
    if s > 0.5 && s < 1.0 {
        Some(((s - 0.5) * (1.0 - s), 1.5 - 2.0 * s))
    } else {
        None
    }
}

/// Base potential Φ(s) = exp(−1/((s−½)(1−s))) on (½, 1), zero elsewhere.
pub fn base_potential(s: f64) -> f64 {
    bump_arg(s).map_or(0.0, |(t, _)| (-1.0 / t).exp())
}

pub fn base_potential_d1(s: f64) -> f64 {
    bump_arg(s).map_or(0.0, |(t, tp)| (-1.0 / t).exp() * tp / (t * t))
}

pub fn base_potential_d2(s: f64) -> f64 {
    bump_arg(s).map_or(0.0, |(t, tp)| {
        let t2 = t * t;
        (-1.0 / t).exp() * (tp * tp / (t2 * t2) - 2.0 / t2 - 2.0 * tp * tp / (t2 * t))
    })
}

/// φ = Φ'' + Φ'/s, the planar radial Laplacian of the base potential.
pub fn base_profile(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    base_potential_d2(s) + base_potential_d1(s) / s
}

/// Radial profile pair for a given μ and line length |k|.
#[derive(Debug, Clone, Serialize)]
pub struct PipeProfile {
    pub mu: u64,
    pub line_length: f64,
    /// Continuum constant making ∫_{𝕋³} φ_k² = 1 for the unfiltered profile.
    pub norm_const: f64,
}

impl PipeProfile {
    /// Φ_k as a function of the distance to the line.
    pub fn potential(&self, d: f64) -> f64 {
        self.norm_const * base_potential(self.mu as f64 * d) / self.mu as f64
    }

    /// φ_k = ΔΦ_k as a function of the distance to the line.
    pub fn profile(&self, d: f64) -> f64 {
        self.norm_const * self.mu as f64 * base_profile(self.mu as f64 * d)
    }
}

/// ∫ φ(s)² s ds over the support.
fn profile_second_moment() -> f64 {
    let (x, w) = composite_rule(0.5, 1.0, 64, 16);
    x.iter().zip(&w).map(|(s, w)| w * base_profile(*s).powi(2) * s).sum()
}

pub fn build_profile(mu: u64, line_length: f64) -> Result<PipeProfile> {
    if mu < 2 {
        return Err(Error::Domain(format!("concentration μ must be >= 2, got {mu}")));
    }
    let m2 = line_length * TWO_PI * profile_second_moment();
    if !(m2 > 1e-30) {
        return Err(Error::Construction("degenerate pipe profile".into()));
    }
    Ok(PipeProfile {
        mu,
        line_length,
        norm_const: 1.0 / m2.sqrt(),
    })
}

/// F̃(ρ) = ∫_{ℝ²} Φ(|z|) e^{−iρ z₁} dz, via the Abel projection of Φ.
pub struct PlanarTransform {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl PlanarTransform {
    pub fn new() -> Self {
        let (xs, wx) = composite_rule(0.0, 1.0, 48, 16);
        let (ys, wy) = composite_rule(0.0, 1.0, 32, 16);
        // A(x) = 2∫ Φ(√(x²+y²)) dy over the y-range where the radius lies in (½, 1).
        let weights = xs
            .par_iter()
            .zip(wx.par_iter())
            .map(|(&x, &w)| {
                let lo = (0.25 - x * x).max(0.0).sqrt();
                let hi = (1.0 - x * x).max(0.0).sqrt();
                if hi <= lo {
                    return 0.0;
                }
                let a: f64 = ys
                    .iter()
                    .zip(&wy)
                    .map(|(t, v)| {
                        let y = lo + (hi - lo) * t;
                        v * base_potential((x * x + y * y).sqrt())
                    })
                    .sum::<f64>()
                    * (hi - lo);
                // Even in x: integrate over [0,1] and double.
                2.0 * w * 2.0 * a
            })
            .collect();
        Self { nodes: xs, weights }
    }

    pub fn eval(&self, rho: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * (rho * x).cos())
            .sum()
    }

    pub fn global() -> &'static PlanarTransform {
        static T: std::sync::OnceLock<PlanarTransform> = std::sync::OnceLock::new();
        T.get_or_init(PlanarTransform::new)
    }
}

impl Default for PlanarTransform {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MikadoOptions {
    /// Required N / (σμ).
    pub resolution_factor: f64,
    /// Exponential filter `exp(−α (|m|/(N_b/2))^(2·order))` on the base grid.
    pub filter_alpha: f64,
    pub filter_order: u32,
}

impl Default for MikadoOptions {
    fn default() -> Self {
        Self {
            resolution_factor: 8.0,
            filter_alpha: 36.0,
            filter_order: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MikadoFamily {
    pub directions: DirectionSet,
    pub mu: u64,
    pub sigma: u64,
    pub n: usize,
    pub options: MikadoOptions,
    pub profiles: Vec<PipeProfile>,
    /// Factor applied on top of the continuum constant so that the filtered,
    /// band-limited φ_k has unit L² norm.
    pub discrete_norm: Vec<f64>,
    #[serde(skip)]
    coeffs: Vec<BTreeMap<[i64; 3], Complex64>>,
    #[serde(skip)]
    base: Grid3,
}

pub fn build_family(
    directions: &DirectionSet,
    mu: u64,
    sigma: u64,
    n: usize,
    options: MikadoOptions,
) -> Result<MikadoFamily> {
    if mu == 0 || sigma == 0 {
        return Err(Error::Domain("σ and μ must be positive integers".into()));
    }
    let need = options.resolution_factor * (sigma * mu) as f64;
    if (n as f64) < need {
        return Err(Error::Resolution(format!(
            "N = {n} below {} σμ = {need}",
            options.resolution_factor
        )));
    }
    if !n.is_multiple_of(sigma as usize) {
        return Err(Error::Resolution(format!("σ = {sigma} must divide N = {n}")));
    }
    let base = Grid3::new(n / sigma as usize)?;
    let tr = PlanarTransform::global();
    let kmax = base.kmax();
    let nyq = (base.n() / 2) as f64;
    let mut profiles = Vec::with_capacity(directions.len());
    let mut discrete_norm = Vec::with_capacity(directions.len());
    let mut coeffs = Vec::with_capacity(directions.len());
    for (idx, k) in directions.directions.iter().enumerate() {
        let len = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
        let prof = build_profile(mu, len)?;
        let p = directions.base_points[idx];
        let muf = mu as f64;
        let mut map = BTreeMap::new();
        let mut table: BTreeMap<i64, f64> = BTreeMap::new();
        for mx in -kmax..=kmax {
            for my in -kmax..=kmax {
                // Solve m·k = 0 for mz where possible, otherwise scan.
                for mz in -kmax..=kmax {
                    if mx * k[0] + my * k[1] + mz * k[2] != 0 {
                        continue;
                    }
                    let m2 = mx * mx + my * my + mz * mz;
                    let ft = *table
                        .entry(m2)
                        .or_insert_with(|| tr.eval(TWO_PI * (m2 as f64).sqrt() / muf));
                    let r = (m2 as f64).sqrt() / nyq;
                    let filt = (-options.filter_alpha * r.powi(2 * options.filter_order as i32)).exp();
                    let phase = -TWO_PI * (mx as f64 * p[0] + my as f64 * p[1] + mz as f64 * p[2]);
                    let amp = prof.norm_const * len * ft * filt / (muf * muf * muf);
                    map.insert([mx, my, mz], Complex64::from_polar(amp, phase));
                }
            }
        }
        // Parseval for φ̂ = −|2πm|² Φ̂.
        let l2: f64 = map
            .iter()
            .map(|(m, c)| {
                let x2 = TWO_PI * TWO_PI * (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64;
                (x2 * c.norm()).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        if !(l2 > 1e-30) {
            return Err(Error::Construction(format!("direction {k:?}: profile vanishes on the grid")));
        }
        for c in map.values_mut() {
            *c /= l2;
        }
        profiles.push(prof);
        discrete_norm.push(1.0 / l2);
        coeffs.push(map);
    }
    Ok(MikadoFamily {
        directions: directions.clone(),
        mu,
        sigma,
        n,
        options,
        profiles,
        discrete_norm,
        coeffs,
        base,
    })
}

impl MikadoFamily {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn grid(&self) -> Grid3 {
        Grid3::new(self.n).expect("validated at construction")
    }

    pub fn base_grid(&self) -> Grid3 {
        self.base
    }

    pub fn unit(&self, k: usize) -> [f64; 3] {
        self.directions.unit(k)
    }

    fn base_scalar(&self, k: usize, mult: impl Fn([i64; 3]) -> Complex64 + Sync) -> SpectralField {
        let map = &self.coeffs[k];
        let a = fill_modes(self.base, |m, _| match map.get(&m) {
            Some(c) => c * mult(m),
            None => Complex64::new(0.0, 0.0),
        });
        SpectralField::from_parts_unchecked(self.base, Rank::Scalar, vec![a], FieldFlags::REAL)
    }

    fn rescale(&self, f: SpectralField) -> SpectralField {
        if self.sigma == 1 {
            f
        } else {
            dilate(&f, self.sigma as usize).expect("σ validated")
        }
    }

    /// Φ_k on the base grid.
    pub fn potential_base(&self, k: usize) -> SpectralField {
        self.base_scalar(k, |_| Complex64::new(1.0, 0.0))
    }

    /// φ_k on the base grid.
    pub fn phi_base(&self, k: usize) -> SpectralField {
        self.base_scalar(k, |m| {
            Complex64::new(-TWO_PI * TWO_PI * (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64, 0.0)
        })
    }

    /// (∇Φ_k) on the base grid.
    pub fn grad_potential_base(&self, k: usize) -> SpectralField {
        let parts = (0..3)
            .map(|j| self.base_scalar(k, move |m| Complex64::new(0.0, TWO_PI * m[j] as f64)))
            .collect();
        SpectralField::from_scalars(Rank::Vector, parts).expect("three scalars")
    }

    pub fn w_base(&self, k: usize) -> SpectralField {
        let phi = self.phi_base(k);
        let e = self.unit(k);
        SpectralField::from_scalars(Rank::Vector, e.iter().map(|ei| phi.clone().scale(*ei)).collect())
            .expect("three scalars")
            .with_flags(FieldFlags::REAL | FieldFlags::DIVERGENCE_FREE)
    }

    pub fn omega_base(&self, k: usize) -> SpectralField {
        let g = self.grad_potential_base(k);
        let e = self.unit(k);
        let mut t = SpectralField::zeros(self.base, Rank::Tensor);
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                // e_i ∂_jΦ − ∂_iΦ e_j
                t.axpy_component(3 * i + j, e[i], g.comp(j));
                t.axpy_component(3 * i + j, -e[j], g.comp(i));
            }
        }
        t.with_flags(FieldFlags::REAL)
    }

    /// φ_k² − 1 on the base grid (dealiased square).
    pub fn psi_base(&self, k: usize) -> Result<SpectralField> {
        let phi = self.phi_base(k);
        let sq = mul(&phi, &phi)?;
        Ok(sq.sub_mean())
    }

    /// W_k(σ·) on the target grid.
    pub fn w(&self, k: usize) -> SpectralField {
        self.rescale(self.w_base(k))
    }

    /// Ω_k(σ·) on the target grid.
    pub fn omega(&self, k: usize) -> SpectralField {
        self.rescale(self.omega_base(k))
    }

    /// φ_k(σ·) on the target grid.
    pub fn phi(&self, k: usize) -> SpectralField {
        self.rescale(self.phi_base(k))
    }

    /// φ_k²(σ·) − 1 on the target grid.
    pub fn psi(&self, k: usize) -> Result<SpectralField> {
        Ok(self.rescale(self.psi_base(k)?))
    }

    /// W_k⊗W_k = φ_k² e_k⊗e_k on the base grid.
    pub fn ww_base(&self, k: usize) -> Result<SpectralField> {
        let phi = self.phi_base(k);
        let sq = mul(&phi, &phi)?;
        let e = self.unit(k);
        let ee: Vec<f64> = (0..9).map(|c| e[c / 3] * e[c % 3]).collect();
        let cst = SpectralField::constant(self.base, Rank::Tensor, &ee)?;
        mul(&sq, &cst)
    }

    /// Number of spectral modes carried by direction k.
    pub fn mode_count(&self, k: usize) -> usize {
        self.coeffs[k].len()
    }

    /// |Ω_k|² at base grid points, assembled pointwise from ∇Φ_k.
    pub fn omega_magnitude_sq_base(&self, k: usize) -> Array3<f64> {
        let g = self.grad_potential_base(k);
        let e = self.unit(k);
        let p: Vec<Array3<f64>> = (0..3).map(|j| inverse_array(self.base, g.comp(j))).collect();
        let s: Vec<&[f64]> = p.iter().map(|a| a.as_slice().expect("standard layout")).collect();
        let mut out = Array3::<f64>::zeros(self.base.physical_shape());
        out.as_slice_mut()
            .expect("standard layout")
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| {
                let gv = [s[0][i], s[1][i], s[2][i]];
                let mut acc = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        let v = e[a] * gv[b] - gv[a] * e[b];
                        acc += v * v;
                    }
                }
                *o = acc;
            });
        out
    }

    /// φ_k at base grid points.
    pub fn phi_physical_base(&self, k: usize) -> Array3<f64> {
        inverse_array(self.base, self.phi_base(k).comp(0))
    }
}

/// L^p norms of W_k and Ω_k over a μ ladder at σ = 1, with fitted slopes.
#[derive(Debug, Clone, Serialize)]
pub struct MikadoScaling {
    pub mu_list: Vec<u64>,
    pub p_list: Vec<f64>,
    /// [direction][p] → table of (μ, ‖W_k‖_p).
    pub w: Vec<Vec<ScalingTable>>,
    pub omega: Vec<Vec<ScalingTable>>,
}

pub fn scaling_study(
    directions: &DirectionSet,
    mu_list: &[u64],
    p_list: &[f64],
    options: MikadoOptions,
) -> Result<MikadoScaling> {
    if mu_list.len() < 3 {
        return Err(Error::Domain("Mikado scaling study needs at least 3 ladder points".into()));
    }
    let nd = directions.len();
    let mut wpts = vec![vec![Vec::new(); p_list.len()]; nd];
    let mut opts = vec![vec![Vec::new(); p_list.len()]; nd];
    for &mu in mu_list {
        let n = resolution_for(mu, 1, options.resolution_factor);
        let fam = build_family(directions, mu, 1, n, options)?;
        for k in 0..nd {
            let phi = fam.phi_physical_base(k);
            let m2w = phi.mapv(|v| v * v);
            drop(phi);
            for (ip, &p) in p_list.iter().enumerate() {
                wpts[k][ip].push((mu as f64, lp_from_magnitude_sq(&m2w, p)?));
            }
            drop(m2w);
            let m2o = fam.omega_magnitude_sq_base(k);
            for (ip, &p) in p_list.iter().enumerate() {
                opts[k][ip].push((mu as f64, lp_from_magnitude_sq(&m2o, p)?));
            }
        }
    }
    let fit = |pts: Vec<Vec<Vec<(f64, f64)>>>| -> Result<Vec<Vec<ScalingTable>>> {
        pts.into_iter()
            .map(|row| row.into_iter().map(|p| ScalingTable::fit(p, 0.0)).collect())
            .collect()
    };
    Ok(MikadoScaling {
        mu_list: mu_list.to_vec(),
        p_list: p_list.to_vec(),
        w: fit(wpts)?,
        omega: fit(opts)?,
    })
}

/// Smallest even N ≥ factor·σμ divisible by σ.
pub fn resolution_for(mu: u64, sigma: u64, factor: f64) -> usize {
    let need = (factor * (sigma * mu) as f64).ceil() as usize;
    let step = 2 * sigma as usize;
    need.div_ceil(step) * step
}

/// ‖W_k ⊗ W_k'‖_{L^p} over a μ ladder at σ = 1.
#[derive(Debug, Clone, Serialize)]
pub struct OverlapTable {
    pub pair: (usize, usize),
    pub p: f64,
    pub table: ScalingTable,
}

pub fn overlap_study(
    directions: &DirectionSet,
    pair: (usize, usize),
    mu_list: &[u64],
    p: f64,
    options: MikadoOptions,
) -> Result<OverlapTable> {
    if mu_list.len() < 3 {
        return Err(Error::Domain("overlap study needs at least 3 ladder points".into()));
    }
    let (a, b) = pair;
    if a >= directions.len() || b >= directions.len() {
        return Err(Error::Domain(format!("direction index out of range in {pair:?}")));
    }
    let sub = DirectionSet::new(
        vec![directions.directions[a], directions.directions[b]],
        vec![directions.base_points[a], directions.base_points[b]],
    )?;
    let mut points = Vec::with_capacity(mu_list.len());
    for &mu in mu_list {
        let n = resolution_for(mu, 1, options.resolution_factor);
        let fam = build_family(&sub, mu, 1, n, options)?;
        let fa = fam.phi_physical_base(0);
        let fb = fam.phi_physical_base(1);
        // |W_a ⊗ W_b| = |φ_a||φ_b| since the directions are unit vectors.
        let m2 = ndarray::Zip::from(&fa).and(&fb).map_collect(|x, y| (x * y) * (x * y));
        points.push((mu as f64, lp_from_magnitude_sq(&m2, p)?));
    }
    let floor = 1e-12 * points.iter().map(|q| q.1).fold(0.0, f64::max);
    Ok(OverlapTable {
        pair,
        p,
        table: ScalingTable::fit(points, floor)?,
    })
}

/// Slope of a set of (x, y) pairs, as used for quick reports.
pub fn fitted_slope(points: &[(f64, f64)]) -> Result<f64> {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    loglog_slope(&xs, &ys)
}
