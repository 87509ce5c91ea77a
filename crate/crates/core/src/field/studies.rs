//! Scaling studies: fitted log-log slopes of commutator and improved-Hölder errors.

use serde::Serialize;

use super::grid::Grid3;
use super::mollifier::mollify;
use super::norms::{lp_from_magnitude_sq, lp_norm};
use super::ops::{dilate_within, grad};
use super::product::mul;
use super::spectral::{Rank, SpectralField};
use crate::error::{Error, Result};

/// Least-squares slope of log y against log x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Domain("slope fit needs at least two points".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingTable {
    /// (parameter, measured value) pairs.
    pub points: Vec<(f64, f64)>,
    /// Fitted slope over points above the round-off floor; `None` when fewer
    /// than two such points remain (the quantity vanished to round-off).
    pub slope: Option<f64>,
    pub floor: f64,
}

impl ScalingTable {
    pub fn fit(points: Vec<(f64, f64)>, floor: f64) -> Result<Self> {
        let kept: Vec<(f64, f64)> = points.iter().cloned().filter(|p| p.1 > floor).collect();
        let slope = if kept.len() >= 2 {
            let xs: Vec<f64> = kept.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = kept.iter().map(|p| p.1).collect();
            Some(loglog_slope(&xs, &ys)?)
        } else {
            None
        };
        Ok(Self { points, slope, floor })
    }

    /// Upper-bound check on the slope; a quantity at round-off satisfies any bound.
    pub fn slope_at_most(&self, bound: f64) -> bool {
        self.slope.is_none_or(|s| s <= bound)
    }

    pub fn slope_at_least(&self, bound: f64) -> bool {
        self.slope.is_some_and(|s| s >= bound)
    }
}

/// ‖∇^m((fg)∗η_l − (f∗η_l)(g∗η_l))‖_{L^r} over a ladder of l.
pub fn commutator_study(
    f: &SpectralField,
    g: &SpectralField,
    l_list: &[f64],
    m: u32,
    r: f64,
) -> Result<ScalingTable> {
    if l_list.len() < 3 {
        return Err(Error::Domain("commutator study needs at least 3 ladder points".into()));
    }
    if m > 1 {
        return Err(Error::Domain("commutator study supports m in {0, 1}".into()));
    }
    f.check_rank(Rank::Scalar, "commutator_study")?;
    g.check_rank(Rank::Scalar, "commutator_study")?;
    let fg = mul(f, g)?;
    let scale = lp_norm(f, r)? * lp_norm(g, r)?;
    let mut points = Vec::with_capacity(l_list.len());
    for &l in l_list {
        let mut c = mollify(&fg, l)?;
        let prod = mul(&mollify(f, l)?, &mollify(g, l)?)?;
        c.axpy(-1.0, &prod)?;
        let v = if m == 0 { lp_norm(&c, r)? } else { lp_norm(&grad(&c)?, r)? };
        points.push((l, v));
    }
    ScalingTable::fit(points, 1e-13 * (scale + 1e-300))
}

/// |‖f·g(σ·)‖_r − ‖f‖_r ‖g‖_r| over a ladder of integer σ.
///
/// `|·|^r` is not band-limited, so the L^r integrals are taken on a grid
/// `oversample` times finer than the fields' own (spectral interpolation).
pub fn improved_holder_study(
    f: &SpectralField,
    g: &SpectralField,
    sigma_list: &[usize],
    r: f64,
    oversample: usize,
) -> Result<ScalingTable> {
    if sigma_list.len() < 3 {
        return Err(Error::Domain("Hölder study needs at least 3 ladder points".into()));
    }
    f.check_rank(Rank::Scalar, "improved_holder_study")?;
    g.check_rank(Rank::Scalar, "improved_holder_study")?;
    f.check_same_grid(g)?;
    if oversample == 0 {
        return Err(Error::Domain("oversampling factor must be positive".into()));
    }
    let quad = Grid3::new(f.grid().n() * oversample)?;
    let fp = f.resample(quad).component_physical(0);
    let nf = lp_norm(&f.resample(quad), r)?;
    let ng = lp_norm(&g.resample(quad), r)?;
    let mut points = Vec::with_capacity(sigma_list.len());
    for &s in sigma_list {
        let gs = dilate_within(g, s)?.resample(quad).component_physical(0);
        let prod = ndarray::Zip::from(&fp).and(&gs).map_collect(|a, b| (a * b) * (a * b));
        let v = lp_from_magnitude_sq(&prod, r)?;
        points.push((s as f64, (v - nf * ng).abs()));
    }
    ScalingTable::fit(points, 1e-12 * (nf * ng + 1e-300))
}
