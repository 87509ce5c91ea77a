//! Golden values: measured constants frozen after a certified run and
//! compared within a relative band afterwards.
//!
//! File format is flat `key = value`. A `fingerprint` line names the scheme
//! settings the `scheme.*` values were measured with; those values are only
//! compared when the current run matches it.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_GOLDEN: &str = include_str!("../../golden/default.txt");

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Golden {
    pub fingerprint: Option<String>,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenCheck {
    pub golden: f64,
    pub measured: f64,
    pub relative_error: f64,
    pub pass: bool,
}

impl Golden {
    pub fn parse(text: &str) -> Result<Self> {
        let mut g = Golden::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("golden line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "fingerprint" {
                g.fingerprint = Some(v.to_string());
            } else {
                let x = v
                    .parse()
                    .map_err(|_| Error::Config(format!("golden `{k}`: `{v}` is not a number")))?;
                g.values.insert(k.to_string(), x);
            }
        }
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_GOLDEN).expect("bundled golden file parses")
    }

    /// Compare against the stored value; `None` when the key is absent or, for
    /// `scheme.*` keys, when `fingerprint` does not match.
    pub fn check(&self, key: &str, measured: f64, band: f64, fingerprint: &str) -> Option<GoldenCheck> {
        if key.starts_with("scheme.") && self.fingerprint.as_deref() != Some(fingerprint) {
            return None;
        }
        let golden = *self.values.get(key)?;
        let relative_error = ((measured - golden) / golden).abs();
        Some(GoldenCheck {
            golden,
            measured,
            relative_error,
            pass: relative_error <= band,
        })
    }
}
