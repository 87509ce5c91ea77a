use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform grid on the unit torus `[0,1)^3` with `n` points per axis.
///
/// Spectral data is stored as the half spectrum of a real field, shape
/// `(n, n, n/2 + 1)`. Modes on the Nyquist planes are kept at zero so that
/// every Fourier multiplier acts exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Grid3 {
    n: usize,
}

impl Grid3 {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::Domain(format!("grid size must be even and >= 4, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Length of the last (half) spectral axis.
    pub fn nzh(&self) -> usize {
        self.n / 2 + 1
    }

    pub fn spectral_shape(&self) -> (usize, usize, usize) {
        (self.n, self.n, self.nzh())
    }

    pub fn physical_shape(&self) -> (usize, usize, usize) {
        (self.n, self.n, self.n)
    }

    pub fn spectral_len(&self) -> usize {
        self.n * self.n * self.nzh()
    }

    pub fn points(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Grid used for dealiased quadratic products: ceil(3n/2), rounded up to even.
    pub fn fine(&self) -> Grid3 {
        let m = (3 * self.n).div_ceil(2);
        Grid3 { n: m + (m % 2) }
    }

    /// Signed frequency of FFT index `i` along a full axis.
    pub fn freq(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// FFT index of signed frequency `k` along a full axis.
    pub fn index(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Largest retained frequency per axis.
    pub fn kmax(&self) -> i64 {
        self.n as i64 / 2 - 1
    }

    pub fn in_band(&self, k: [i64; 3]) -> bool {
        let m = self.kmax();
        k[0].abs() <= m && k[1].abs() <= m && k[2].abs() <= m
    }

    pub fn freqs(&self) -> Vec<i64> {
        (0..self.n).map(|i| self.freq(i)).collect()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }
}
