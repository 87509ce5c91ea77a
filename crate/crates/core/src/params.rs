//! Exact-rational parameter ledger for the iteration.
//!
//! Every exponent is kept as a [`BigRational`]; nothing here touches floating
//! point except the `value_float` convenience fields of reports.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

pub type Q = BigRational;

/// Shorthand for an exact rational `n/d`.
pub fn q(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Render a rational as `"p/q"` (or `"p"` when integral).
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn q_to_f64(x: &Q) -> f64 {
    // Scale down huge numerators/denominators together before converting.
    let n = x.numer();
    let d = x.denom();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    let shift = (nb.max(db) - 1000).max(0) as usize;
    let n = (n >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (d >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

/// Desk-scale overrides for the analytic ladder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Surrogate {
    pub lambda_n: u64,
    pub lambda_np1: u64,
    pub sigma: u64,
    pub mu: u64,
    /// Inverse mollification length 1/l.
    pub ell_inv: u64,
}

impl Surrogate {
    pub fn validate(&self) -> Result<()> {
        if self.sigma == 0 || self.mu == 0 || self.ell_inv == 0 || self.lambda_n == 0 {
            return Err(Error::Config("surrogate entries must be positive".into()));
        }
        if self.sigma * self.mu != self.lambda_np1 {
            return Err(Error::Config(format!(
                "surrogate requires sigma*mu = lambda_np1, got {}*{} != {}",
                self.sigma, self.mu, self.lambda_np1
            )));
        }
        if self.ell_inv < 4 {
            return Err(Error::Config("surrogate ell_inv must be >= 4 (l <= 1/4)".into()));
        }
        Ok(())
    }

    /// Check that sigma and mu divide the grid resolution used downstream.
    pub fn check_grid(&self, n: usize) -> Result<()> {
        let n = n as u64;
        if !n.is_multiple_of(self.sigma) || !n.is_multiple_of(self.mu) {
            return Err(Error::Config(format!(
                "sigma={} and mu={} must both divide N={}",
                self.sigma, self.mu, n
            )));
        }
        Ok(())
    }

    pub fn ell(&self) -> f64 {
        1.0 / self.ell_inv as f64
    }

    /// Surrogate delta_{n+1} = lambda_{n+1}^{-2 beta}, evaluated in floating point.
    pub fn delta_np1(&self, beta: &Q) -> f64 {
        (self.lambda_np1 as f64).powf(-2.0 * q_to_f64(beta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationParams {
    #[serde(serialize_with = "ser_q")]
    pub a: Q,
    pub b: u32,
    #[serde(serialize_with = "ser_q")]
    pub beta: Q,
    #[serde(serialize_with = "ser_q")]
    pub alpha: Q,
    pub stage: u32,
    pub surrogate: Option<Surrogate>,
}

fn ser_q<S: serde::Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_q(x))
}

impl IterationParams {
    /// a = 5, b = 32, beta = 1/250, alpha = 16/25.
    pub fn paper() -> Self {
        Self {
            a: q(5, 1),
            b: 32,
            beta: q(1, 250),
            alpha: q(16, 25),
            stage: 1,
            surrogate: None,
        }
    }

    pub fn with_surrogate(mut self, s: Surrogate) -> Self {
        self.surrogate = Some(s);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.a <= Q::one() {
            return Err(Error::Config("a must exceed 1".into()));
        }
        if self.b < 2 {
            return Err(Error::Config("b must exceed 1".into()));
        }
        let unit = |x: &Q| x.is_positive() && *x < Q::one();
        if !unit(&self.beta) {
            return Err(Error::Config("beta must lie in (0,1)".into()));
        }
        if !unit(&self.alpha) {
            return Err(Error::Config("alpha must lie in (0,1)".into()));
        }
        if self.stage == 0 {
            return Err(Error::Config("stage must be positive".into()));
        }
        if let Some(s) = &self.surrogate {
            s.validate()?;
        }
        Ok(())
    }

    pub fn gamma(&self) -> Q {
        derive_gamma(self)
    }
}

/// gamma = (1 - beta)/b + beta.
pub fn derive_gamma(p: &IterationParams) -> Q {
    gamma_of(&p.beta, p.b)
}

pub fn gamma_of(beta: &Q, b: u32) -> Q {
    (Q::one() - beta) / Q::from_integer(BigInt::from(b)) + beta
}

/// lambda_k, either materialized or kept as `base^exponent`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Lambda {
    Exact(#[serde(serialize_with = "ser_display")] BigInt),
    Symbolic {
        #[serde(serialize_with = "ser_q")]
        base: Q,
        #[serde(serialize_with = "ser_display")]
        exponent: BigUint,
        /// Estimated decimal digits of the ceiling.
        digits: f64,
    },
}

fn ser_display<T: std::fmt::Display, S: serde::Serializer>(
    x: &T,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderEntry {
    pub k: u32,
    pub lambda: Lambda,
    /// delta_k = lambda_k ^ delta_exponent, with delta_exponent = -2 beta.
    #[serde(serialize_with = "ser_q")]
    pub delta_exponent: Q,
}

impl LadderEntry {
    pub fn is_symbolic(&self) -> bool {
        matches!(self.lambda, Lambda::Symbolic { .. })
    }
}

pub const DEFAULT_DIGIT_CAP: u64 = 10_000;

/// lambda_k = ceil(a^(b^k)), materialized only below `digit_cap` decimal digits.
pub fn ladder(p: &IterationParams, k: u32, digit_cap: u64) -> Result<LadderEntry> {
    p.validate()?;
    let exponent = BigUint::from(p.b).pow(k);
    let delta_exponent = -(q(2, 1) * &p.beta);
    let log10_a = q_to_f64(&p.a).log10();
    let digits = exponent.to_f64().unwrap_or(f64::INFINITY) * log10_a;
    if !digits.is_finite() || digits > digit_cap as f64 {
        return Ok(LadderEntry {
            k,
            lambda: Lambda::Symbolic {
                base: p.a.clone(),
                exponent,
                digits,
            },
            delta_exponent,
        });
    }
    let e = exponent
        .to_u32()
        .ok_or_else(|| Error::Domain("ladder exponent exceeds u32".into()))?;
    let num = num_traits::pow::pow(p.a.numer().clone(), e as usize);
    let den = num_traits::pow::pow(p.a.denom().clone(), e as usize);
    let (quot, rem) = num.div_rem(&den);
    let lam = if rem.is_zero() { quot } else { quot + 1 };
    Ok(LadderEntry {
        k,
        lambda: Lambda::Exact(lam),
        delta_exponent,
    })
}

/// An exponent that is affine in 1/r: `constant + coeff_inv_r / r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineInvR {
    #[serde(serialize_with = "ser_q")]
    pub constant: Q,
    #[serde(serialize_with = "ser_q")]
    pub coeff_inv_r: Q,
}

impl AffineInvR {
    pub fn eval(&self, r: &Q) -> Q {
        &self.constant + &self.coeff_inv_r / r
    }

    pub fn limit_r1(&self) -> Q {
        &self.constant + &self.coeff_inv_r
    }

    pub fn closed_form(&self) -> String {
        format!("{} + ({})/r", fmt_q(&self.constant), fmt_q(&self.coeff_inv_r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub name: String,
    /// r -> 1 limit of the exponent.
    #[serde(serialize_with = "ser_q")]
    pub value_at_r1: Q,
    /// Value at the requested r.
    #[serde(serialize_with = "ser_q")]
    pub value_at_r: Q,
    pub margin_fn: AffineInvR,
    pub holds: bool,
}

impl InequalityReport {
    /// One JSON object for the `params-check` CLI stream.
    pub fn to_json_line(&self) -> serde_json::Value {
        serde_json::json!({
            "name": self.name,
            "value_exact": fmt_q(&self.value_at_r1),
            "value_float": q_to_f64(&self.value_at_r1),
            "value_at_r_exact": fmt_q(&self.value_at_r),
            "margin_fn": self.margin_fn.closed_form(),
            "holds": self.holds,
        })
    }
}

/// The five exponent expressions, as affine functions of 1/r.
pub fn exponent_expressions(p: &IterationParams) -> Vec<(&'static str, AffineInvR)> {
    let one = Q::one();
    let b = Q::from_integer(BigInt::from(p.b));
    let beta = &p.beta;
    let alpha = &p.alpha;
    let g = derive_gamma(p);
    let two = q(2, 1);
    let bb = &two * beta * (&b - &one); // 2 beta (b-1)
    let oma = &one - alpha;
    vec![
        (
            "perturbation",
            AffineInvR {
                constant: -(alpha / &two) + q(9, 1) * &g,
                coeff_inv_r: Q::zero(),
            },
        ),
        (
            "linear_error",
            AffineInvR {
                constant: &two * beta * &b + &two * (&one - beta) / &b + &oma,
                coeff_inv_r: -(&two * &oma),
            },
        ),
        (
            "corrector_error",
            AffineInvR {
                constant: &bb + q(9, 1) * &g - &one + q(3, 1),
                coeff_inv_r: q(-3, 1),
            },
        ),
        (
            "oscillation_error",
            AffineInvR {
                constant: &bb + q(10, 1) * &g - alpha + &two * &oma,
                coeff_inv_r: -(&two * &oma),
            },
        ),
        (
            "interference_error",
            AffineInvR {
                constant: &bb + q(9, 1) * &g - alpha + &two * &oma,
                coeff_inv_r: -(q(3, 1) * &oma),
            },
        ),
    ]
}

pub fn default_r() -> Q {
    q(1025, 1024)
}

/// Evaluate all five exponent inequalities at `r` and at the r -> 1 limit.
pub fn check_inequalities(p: &IterationParams, r: &Q) -> Result<Vec<InequalityReport>> {
    if *r <= Q::one() || *r >= q(2, 1) {
        return Err(Error::Domain(format!("r = {} outside (1,2)", fmt_q(r))));
    }
    Ok(exponent_expressions(p)
        .into_iter()
        .map(|(name, f)| {
            let v1 = f.limit_r1();
            // The sigma^{-1/2} l^{-9} budget only needs to be bounded, not decaying.
            let holds = if name == "perturbation" {
                !v1.is_positive()
            } else {
                v1.is_negative()
            };
            InequalityReport {
                name: name.to_string(),
                holds,
                value_at_r: f.eval(r),
                value_at_r1: v1,
                margin_fn: f,
            }
        })
        .collect())
}
