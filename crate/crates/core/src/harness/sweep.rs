//! Parameter sweeps of the step's estimates, with fitted log-log slopes.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::product::traceless_tensor_product;
use crate::field::studies::ScalingTable;
use crate::field::{lp_norm, mollify, Grid3};
use crate::geom::{build_decomposition, DirectionSet};
use crate::mikado::{build_family, resolution_for, MikadoOptions};
use crate::scheme::{ReynoldsTuple, build_amplitudes, build_cutoff, build_perturbation, cutoff_constant, mollify_tuple, step, StepParams};

use super::config::RunConfig;
use super::suites::{seed_field, seeded_tuple, step_params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Mu,
    Sigma,
    Ell,
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu" => Ok(SweepAxis::Mu),
            "sigma" => Ok(SweepAxis::Sigma),
            "ell" => Ok(SweepAxis::Ell),
            _ => Err(Error::Config(format!("unknown sweep axis {s:?} (mu, sigma, ell)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    /// μ or σ values, or 1/l for the ell axis.
    pub values: Vec<u64>,
    /// Skip the new stress; report only the perturbation norms.
    pub perturbation_only: bool,
    /// Start from the zero tuple instead of the seeded one.
    pub zero_seed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub n: usize,
    /// Named measurements at this ladder point.
    pub norms: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    /// Per measurement name, the fitted table over the ladder.
    pub slopes: Vec<(String, ScalingTable)>,
}

impl SweepResult {
    pub fn slope(&self, name: &str) -> Option<f64> {
        self.slopes.iter().find(|(n, _)| n == name).and_then(|(_, t)| t.slope)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let names: Vec<&str> = self.rows.first().map(|r| r.norms.iter().map(|(n, _)| n.as_str()).collect()).unwrap_or_default();
        writeln!(f, "value,n,{}", names.join(","))?;
        for r in &self.rows {
            let vals: Vec<String> = r.norms.iter().map(|(_, v)| format!("{v:.17e}")).collect();
            writeln!(f, "{},{},{}", r.value, r.n, vals.join(","))?;
        }
        Ok(())
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in &self.rows {
            serde_json::to_writer(&mut f, r)?;
            f.write_all(b"\n")?;
        }
        for (name, t) in &self.slopes {
            serde_json::to_writer(&mut f, &serde_json::json!({ "slope": name, "table": t }))?;
            f.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn fit(axis: SweepAxis, rows: Vec<SweepRow>) -> Result<SweepResult> {
    let names: Vec<String> = rows.first().map(|r| r.norms.iter().map(|(n, _)| n.clone()).collect()).unwrap_or_default();
    let slopes = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.value, r.norms[i].1)).collect();
            let floor = 1e-13 * pts.iter().map(|p| p.1).fold(0.0, f64::max);
            Ok((name.clone(), ScalingTable::fit(pts, floor)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { axis, rows, slopes })
}

/// Runs one step per ladder point and records the perturbation and stress norms.
///
/// Along μ and σ the grid is the smallest admissible one for the point (or the
/// configured N if larger). Along ell the value is 1/l and only the
/// mollification commutator B̄∘̊B̄ − (B∘̊B)∗η_l of the seed is measured.
pub fn estimate_sweep(cfg: &RunConfig, spec: &SweepSpec) -> Result<SweepResult> {
    if spec.values.len() < 3 {
        return Err(Error::Config("a sweep needs at least 3 ladder points".into()));
    }
    if spec.values.contains(&0) {
        return Err(Error::Config("sweep values must be positive".into()));
    }
    if spec.axis == SweepAxis::Ell {
        return ell_sweep(cfg, &spec.values);
    }
    let decomp = build_decomposition(&DirectionSet::default())?;
    let opts = MikadoOptions {
        resolution_factor: cfg.resolution_factor,
        ..MikadoOptions::default()
    };
    let mut rows = Vec::with_capacity(spec.values.len());
    for &v in &spec.values {
        let (sigma, mu) = match spec.axis {
            SweepAxis::Mu => (cfg.sigma, v),
            _ => (v, cfg.mu),
        };
        let n = resolution_for(mu, sigma, cfg.resolution_factor).max(cfg.n - cfg.n % (2 * sigma as usize));
        let fam = build_family(&DirectionSet::default(), mu, sigma, n, opts)?;
        let grid = fam.grid();
        let params = StepParams {
            sigma,
            mu,
            ..step_params(cfg)
        };
        let norms = if spec.perturbation_only {
            // Amplitudes are low-passed to |k| ≤ σ/2, so they are built on the
            // configured grid and resampled; no full-resolution tensor is formed.
            let coarse = Grid3::new(cfg.n)?;
            if (coarse.kmax() as f64) < params.amplitude_band.unwrap_or(f64::INFINITY) {
                return Err(Error::Resolution(format!("N = {} cannot carry the amplitude band", cfg.n)));
            }
            let tuple = start_tuple(cfg, coarse, spec.zero_seed)?;
            let m = mollify_tuple(&tuple, params.ell)?;
            drop(tuple);
            let (rho, _) = build_cutoff(&m.r, params.delta, cutoff_constant(decomp.r0))?;
            let amps = build_amplitudes(&rho, &m.r, &decomp, params.amplitude_band)?;
            drop(m);
            let fine: Vec<_> = amps.fields.iter().map(|a| a.resample(grid)).collect();
            drop(amps);
            let pert = build_perturbation(&fine, &fam)?;
            vec![
                ("principal_l1".to_string(), lp_norm(&pert.principal, 1.0)?),
                ("principal_l2".to_string(), pert.principal.l2_norm()),
                ("corrector_l2".to_string(), pert.corrector.l2_norm()),
            ]
        } else {
            let tuple = start_tuple(cfg, grid, spec.zero_seed)?;
            let (_, rep) = step(tuple, &params, &decomp, &fam)?;
            let mut v = vec![
                ("principal_l1".to_string(), rep.principal_l1),
                ("principal_l2".to_string(), rep.principal_l2),
                ("corrector_l2".to_string(), rep.corrector_l2),
            ];
            for s in &rep.stress {
                v.push((format!("{}_lr", s.part.name()), s.lr));
            }
            v
        };
        rows.push(SweepRow { value: v as f64, n, norms });
    }
    fit(spec.axis, rows)
}

fn start_tuple(cfg: &RunConfig, grid: Grid3, zero: bool) -> Result<ReynoldsTuple> {
    if zero {
        Ok(ReynoldsTuple::zero(grid))
    } else {
        seeded_tuple(cfg, grid)
    }
}

fn ell_sweep(cfg: &RunConfig, inv: &[u64]) -> Result<SweepResult> {
    let grid = Grid3::new(cfg.n)?;
    let b = seed_field(grid, cfg.seed_amplitude, cfg.seed_kmax, cfg.seed)?;
    let bb = traceless_tensor_product(&b, &b)?;
    let mut rows = Vec::with_capacity(inv.len());
    for &k in inv {
        let l = 1.0 / k as f64;
        let bbar = mollify(&b, l)?;
        let mut c = traceless_tensor_product(&bbar, &bbar)?;
        c.axpy(-1.0, &mollify(&bb, l)?)?;
        rows.push(SweepRow {
            value: k as f64,
            n: cfg.n,
            norms: vec![("commutator_l1".into(), lp_norm(&c, 1.0)?), ("commutator_l2".into(), c.l2_norm())],
        });
    }
    fit(SweepAxis::Ell, rows)
}
