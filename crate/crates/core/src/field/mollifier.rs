//! Radial bump mollifier `η(x) = c·exp(−1/(1−|x|²))` on the unit ball and its
//! Fourier transform, tabulated by quadrature.

use std::sync::OnceLock;

use super::ops::{apply_real_multiplier, TWO_PI};
use super::spectral::SpectralField;
use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite Gauss–Legendre rule on [a, b].
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(lo + 0.5 * h * (x + 1.0));
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Unnormalized radial profile.
pub fn bump(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

pub struct Mollifier {
    /// Normalization making ∫η = 1 over R³.
    pub c: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Mollifier {
    pub fn new() -> Self {
        let (nodes, weights) = composite_rule(0.0, 1.0, 96, 16);
        let mass: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(r, w)| w * 4.0 * std::f64::consts::PI * r * r * bump(*r))
            .sum();
        // Pre-multiply the weights by the radial measure and normalization.
        let c = 1.0 / mass;
        let weights = nodes
            .iter()
            .zip(&weights)
            .map(|(r, w)| w * 4.0 * std::f64::consts::PI * r * r * bump(*r) * c)
            .collect();
        Self { c, nodes, weights }
    }

    pub fn global() -> &'static Mollifier {
        static M: OnceLock<Mollifier> = OnceLock::new();
        M.get_or_init(Mollifier::new)
    }

    /// η̂(ξ) = ∫ η(x) e^{−iξ·x} dx for |ξ| = xi.
    pub fn hat(&self, xi: f64) -> f64 {
        if xi == 0.0 {
            return 1.0;
        }
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(r, w)| {
                let t = xi * r;
                w * t.sin() / t
            })
            .sum()
    }

    /// Value of the normalized kernel at radius r.
    pub fn eta(&self, r: f64) -> f64 {
        self.c * bump(r)
    }
}

impl Default for Mollifier {
    fn default() -> Self {
        Self::new()
    }
}

/// Convolution with η_l, applied as multiplication by η̂(2π l |k|).
pub fn mollify(f: &SpectralField, l: f64) -> Result<SpectralField> {
    if !(l > 0.0 && l <= 0.25) {
        return Err(Error::Domain(format!("mollification length must lie in (0, 1/4], got {l}")));
    }
    let g = f.grid();
    let m = g.kmax();
    let max_k2 = (3 * m * m) as usize;
    let mol = Mollifier::global();
    let table: Vec<f64> = (0..=max_k2)
        .map(|k2| mol.hat(TWO_PI * l * (k2 as f64).sqrt()))
        .collect();
    let mut out = apply_real_multiplier(f, |k| table[(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as usize]);
    out.set_flags(f.flags());
    Ok(out)
}
