//! Flat `key = value` run configuration. Lines starting with `#` (or the tail
//! of a line after `#`) are comments.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{fmt_q, q, IterationParams, Surrogate, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Params,
    Operators,
    Geom,
    Mikado,
    Antidiv,
    Scheme,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Params,
        Suite::Operators,
        Suite::Geom,
        Suite::Mikado,
        Suite::Antidiv,
        Suite::Scheme,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Params => "params",
            Suite::Operators => "operators",
            Suite::Geom => "geom",
            Suite::Mikado => "mikado",
            Suite::Antidiv => "antidiv",
            Suite::Scheme => "scheme",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

/// Thresholds used by the suites. Every check reads its bound from here.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    /// Field operator identities, relative.
    pub operator: f64,
    /// ‖div ℛv − (v − mean v)‖ / ‖v‖.
    pub antidiv: f64,
    /// ‖div 𝒯(u,H) − (uH − mean)‖ / ‖uH‖.
    pub bilinear: f64,
    /// Geometric reconstruction, absolute.
    pub geom: f64,
    /// Mikado differential identities, relative.
    pub mikado: f64,
    /// Entrywise |mean W⊗W − e⊗e|.
    pub mikado_mean: f64,
    /// Allowed deviation of fitted Mikado slopes.
    pub slope: f64,
    /// Slack on the cross-product overlap slope bound.
    pub overlap_slope: f64,
    pub commutator_slope: f64,
    pub holder_slack: f64,
    pub antidiv_slope: f64,
    pub residual: f64,
    pub divergence: f64,
    pub amplitude_identity: f64,
    pub potential_identity: f64,
    pub weak: f64,
    /// Relative band for golden comparisons.
    pub golden_band: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            operator: 1e-10,
            antidiv: 1e-10,
            bilinear: 1e-9,
            geom: 1e-12,
            mikado: 1e-8,
            mikado_mean: 1e-6,
            slope: 0.1,
            overlap_slope: 0.15,
            commutator_slope: 1.8,
            holder_slack: 0.2,
            antidiv_slope: -0.85,
            residual: 1e-7,
            divergence: 1e-9,
            amplitude_identity: 1e-8,
            potential_identity: 1e-9,
            weak: 1e-7,
            golden_band: 0.2,
        }
    }
}

impl Tolerances {
    fn fields_mut(&mut self) -> [(&'static str, &mut f64); 17] {
        [
            ("operator", &mut self.operator),
            ("antidiv", &mut self.antidiv),
            ("bilinear", &mut self.bilinear),
            ("geom", &mut self.geom),
            ("mikado", &mut self.mikado),
            ("mikado_mean", &mut self.mikado_mean),
            ("slope", &mut self.slope),
            ("overlap_slope", &mut self.overlap_slope),
            ("commutator_slope", &mut self.commutator_slope),
            ("holder_slack", &mut self.holder_slack),
            ("antidiv_slope", &mut self.antidiv_slope),
            ("residual", &mut self.residual),
            ("divergence", &mut self.divergence),
            ("amplitude_identity", &mut self.amplitude_identity),
            ("potential_identity", &mut self.potential_identity),
            ("weak", &mut self.weak),
            ("golden_band", &mut self.golden_band),
        ]
    }

    fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut c = self.clone();
        c.fields_mut().into_iter().map(|(k, v)| (k, *v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n: usize,
    pub lambda_n: u64,
    pub lambda_np1: u64,
    pub sigma: u64,
    pub mu: u64,
    /// 1/l.
    pub ell_inv: u64,
    #[serde(serialize_with = "ser_q")]
    pub a: Q,
    pub b: u32,
    #[serde(serialize_with = "ser_q")]
    pub beta: Q,
    #[serde(serialize_with = "ser_q")]
    pub alpha: Q,
    /// Exponent r of the L^r stress estimates.
    #[serde(serialize_with = "ser_q")]
    pub r: Q,
    /// δ_{n+1}; `None` uses λ_{n+1}^{−2β}.
    pub delta: Option<f64>,
    pub resolution_factor: f64,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out: PathBuf,
    pub suites: Vec<Suite>,
    pub golden: Option<PathBuf>,
    /// L² size of the divergence-free seed field.
    pub seed_amplitude: f64,
    pub seed_kmax: i64,
    pub weak_tests: usize,
    pub antidiv_samples: usize,
    pub geom_samples: usize,
    /// μ ladder for the Mikado scaling study (σ = 1).
    pub mikado_mu: Vec<u64>,
    pub tol: Tolerances,
}

fn ser_q<S: serde::Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_q(x))
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = IterationParams::paper();
        Self {
            n: 32,
            lambda_n: 2,
            lambda_np1: 4,
            sigma: 2,
            mu: 2,
            ell_inv: 4,
            a: p.a,
            b: p.b,
            beta: p.beta,
            alpha: p.alpha,
            r: q(1025, 1024),
            delta: None,
            resolution_factor: 8.0,
            seed: 0,
            jobs: None,
            out: PathBuf::from("mikado-forge-out"),
            suites: Suite::ALL.to_vec(),
            golden: None,
            seed_amplitude: 0.4,
            seed_kmax: 2,
            weak_tests: 10,
            antidiv_samples: 8,
            geom_samples: 1000,
            mikado_mu: vec![4, 8, 16],
            tol: Tolerances::default(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_q(key: &str, v: &str) -> Result<Q> {
    Q::from_str(v).map_err(|_| Error::Config(format!("`{key}`: `{v}` is not a rational p/q")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            c.set(k.trim(), v.trim())?;
        }
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Apply one `key = value` override.
    pub fn set(&mut self, k: &str, v: &str) -> Result<()> {
        match k {
            "n" => self.n = parse_num(k, v)?,
            "lambda_n" => self.lambda_n = parse_num(k, v)?,
            "lambda_np1" => self.lambda_np1 = parse_num(k, v)?,
            "sigma" => self.sigma = parse_num(k, v)?,
            "mu" => self.mu = parse_num(k, v)?,
            "ell_inv" => self.ell_inv = parse_num(k, v)?,
            "a" => self.a = parse_q(k, v)?,
            "b" => self.b = parse_num(k, v)?,
            "beta" => self.beta = parse_q(k, v)?,
            "alpha" => self.alpha = parse_q(k, v)?,
            "r" => self.r = parse_q(k, v)?,
            "delta" => self.delta = if v == "auto" { None } else { Some(parse_num(k, v)?) },
            "resolution_factor" => self.resolution_factor = parse_num(k, v)?,
            "seed" => self.seed = parse_num(k, v)?,
            "jobs" => self.jobs = if v == "auto" { None } else { Some(parse_num(k, v)?) },
            "out" => self.out = PathBuf::from(v),
            "suites" => {
                self.suites = if v == "all" {
                    Suite::ALL.to_vec()
                } else {
                    parse_list(k, v)?
                }
            }
            "golden" => self.golden = if v == "none" { None } else { Some(PathBuf::from(v)) },
            "seed_amplitude" => self.seed_amplitude = parse_num(k, v)?,
            "seed_kmax" => self.seed_kmax = parse_num(k, v)?,
            "weak_tests" => self.weak_tests = parse_num(k, v)?,
            "antidiv_samples" => self.antidiv_samples = parse_num(k, v)?,
            "geom_samples" => self.geom_samples = parse_num(k, v)?,
            "mikado_mu" => self.mikado_mu = parse_list(k, v)?,
            _ => {
                let name = k
                    .strip_prefix("tol.")
                    .ok_or_else(|| Error::Config(format!("unknown key `{k}`")))?;
                let slot = self
                    .tol
                    .fields_mut()
                    .into_iter()
                    .find(|(n, _)| *n == name)
                    .ok_or_else(|| Error::Config(format!("unknown tolerance `{name}`")))?;
                *slot.1 = parse_num(k, v)?;
            }
        }
        Ok(())
    }

    pub fn surrogate(&self) -> Surrogate {
        Surrogate {
            lambda_n: self.lambda_n,
            lambda_np1: self.lambda_np1,
            sigma: self.sigma,
            mu: self.mu,
            ell_inv: self.ell_inv,
        }
    }

    pub fn iteration_params(&self) -> IterationParams {
        IterationParams {
            a: self.a.clone(),
            b: self.b,
            beta: self.beta.clone(),
            alpha: self.alpha.clone(),
            stage: 1,
            surrogate: Some(self.surrogate()),
        }
    }

    pub fn ell(&self) -> f64 {
        1.0 / self.ell_inv as f64
    }

    pub fn delta_value(&self) -> f64 {
        self.delta.unwrap_or_else(|| self.surrogate().delta_np1(&self.beta))
    }

    pub fn wants(&self, s: Suite) -> bool {
        self.suites.contains(&s)
    }

    /// True when nothing beyond exact-rational checks is requested.
    pub fn params_only(&self) -> bool {
        self.suites.iter().all(|s| *s == Suite::Params)
    }

    pub fn validate(&self) -> Result<()> {
        self.iteration_params().validate()?;
        if self.n < 4 || !self.n.is_multiple_of(2) {
            return Err(Error::Config(format!("N = {} must be even and at least 4", self.n)));
        }
        if !(self.resolution_factor > 0.0) {
            return Err(Error::Config("resolution_factor must be positive".into()));
        }
        let need = self.resolution_factor * (self.sigma * self.mu) as f64;
        if (self.n as f64) < need {
            return Err(Error::Config(format!(
                "N = {} is below {}·σμ = {need}",
                self.n, self.resolution_factor
            )));
        }
        if !(self.n as u64).is_multiple_of(self.sigma) {
            return Err(Error::Config(format!("σ = {} must divide N = {}", self.sigma, self.n)));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(Error::Config("delta must be positive".into()));
            }
        }
        if !(self.seed_amplitude >= 0.0) || self.seed_kmax < 1 {
            return Err(Error::Config("seed_amplitude must be >= 0 and seed_kmax >= 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        if self.suites.is_empty() {
            return Err(Error::Config("no suites selected".into()));
        }
        if self.mikado_mu.len() < 3 {
            return Err(Error::Config("mikado_mu needs at least 3 entries".into()));
        }
        for (k, v) in self.tol.entries() {
            // The ℛ slope bound is a (negative) exponent, not a tolerance.
            if k != "antidiv_slope" && !(v > 0.0) {
                return Err(Error::Config(format!("tolerance `{k}` must be positive")));
            }
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("n", self.n.to_string());
        kv("lambda_n", self.lambda_n.to_string());
        kv("lambda_np1", self.lambda_np1.to_string());
        kv("sigma", self.sigma.to_string());
        kv("mu", self.mu.to_string());
        kv("ell_inv", self.ell_inv.to_string());
        kv("a", fmt_q(&self.a));
        kv("b", self.b.to_string());
        kv("beta", fmt_q(&self.beta));
        kv("alpha", fmt_q(&self.alpha));
        kv("r", fmt_q(&self.r));
        kv("delta", self.delta.map_or("auto".into(), |d| format!("{d:e}")));
        kv("resolution_factor", self.resolution_factor.to_string());
        kv("seed", self.seed.to_string());
        kv("jobs", self.jobs.map_or("auto".into(), |j| j.to_string()));
        kv("out", self.out.display().to_string());
        kv("suites", self.suites.iter().map(|s| s.name()).collect::<Vec<_>>().join(","));
        kv("golden", self.golden.as_ref().map_or("none".into(), |p| p.display().to_string()));
        kv("seed_amplitude", self.seed_amplitude.to_string());
        kv("seed_kmax", self.seed_kmax.to_string());
        kv("weak_tests", self.weak_tests.to_string());
        kv("antidiv_samples", self.antidiv_samples.to_string());
        kv("geom_samples", self.geom_samples.to_string());
        kv("mikado_mu", join(&self.mikado_mu));
        for (k, v) in self.tol.entries() {
            kv(&format!("tol.{k}"), format!("{v:e}"));
        }
        s
    }

    /// The settings a scheme golden value depends on.
    pub fn scheme_fingerprint(&self) -> String {
        format!(
            "n={};sigma={};mu={};ell_inv={};delta={:e};seed={};seed_amplitude={};seed_kmax={};resolution_factor={}",
            self.n,
            self.sigma,
            self.mu,
            self.ell_inv,
            self.delta_value(),
            self.seed,
            self.seed_amplitude,
            self.seed_kmax,
            self.resolution_factor
        )
    }
}
