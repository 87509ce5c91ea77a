//! Tuple snapshots: `b.mkf`, `p.mkf`, `r.mkf` plus `manifest.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::snapshot;
use crate::scheme::{ReynoldsTuple, TupleNorms};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleManifest {
    pub n: usize,
    pub stage: u32,
    pub residual_tol: f64,
    pub norms: TupleNorms,
    /// (file name, SHA-256 of its bytes) for B, p and R.
    pub files: Vec<(String, String)>,
}

const NAMES: [&str; 3] = ["b.mkf", "p.mkf", "r.mkf"];

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_tuple(dir: &Path, t: &ReynoldsTuple) -> Result<TupleManifest> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(3);
    for (name, f) in NAMES.iter().zip([&t.b, &t.p, &t.r]) {
        let bytes = snapshot::to_bytes(f);
        std::fs::write(dir.join(name), &bytes)?;
        files.push((name.to_string(), sha256_hex(&bytes)));
    }
    let manifest = TupleManifest {
        n: t.grid().n(),
        stage: t.stage,
        residual_tol: t.residual_tol,
        norms: TupleNorms::of(t)?,
        files,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// Load a tuple, verifying every file against the manifest digest.
pub fn read_tuple(dir: &Path) -> Result<ReynoldsTuple> {
    let manifest: TupleManifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    let mut fields = Vec::with_capacity(3);
    for (name, digest) in &manifest.files {
        let bytes = std::fs::read(dir.join(name))?;
        if sha256_hex(&bytes) != *digest {
            return Err(Error::Format(format!("{name}: digest does not match the manifest")));
        }
        let f = snapshot::from_bytes(&bytes)?;
        if f.grid().n() != manifest.n {
            return Err(Error::GridMismatch(manifest.n, f.grid().n()));
        }
        fields.push(f);
    }
    let [b, p, r]: [_; 3] = fields
        .try_into()
        .map_err(|_| Error::Format("manifest must list exactly three fields".into()))?;
    Ok(ReynoldsTuple {
        b,
        p,
        r,
        stage: manifest.stage,
        residual_tol: manifest.residual_tol,
    })
}
