//! Bit-exact binary snapshot of a field.
//!
//! Layout: `"MKF1"`, version (u32 LE), N (u32 LE), rank (u8), flags (u8), then
//! for each component the full `N×N×N` complex coefficient block as LE f64
//! (re, im) pairs in FFT index order with kz varying fastest.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::grid::Grid3;
use super::spectral::{FieldFlags, Rank, SpectralField, C0};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MKF1";
pub const VERSION: u32 = 1;

pub fn to_bytes(f: &SpectralField) -> Vec<u8> {
    let g = f.grid();
    let n = g.n();
    let nzh = g.nzh();
    let mut out = Vec::with_capacity(14 + f.ncomp() * n * n * n * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.push(f.rank().code());
    out.push(f.flags().bits());
    for c in f.comps() {
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let z = if iz < nzh {
                        c[[ix, iy, iz]]
                    } else {
                        c[[(n - ix) % n, (n - iy) % n, n - iz]].conj()
                    };
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<SpectralField> {
    if bytes.len() < 14 || &bytes[0..4] != MAGIC {
        return Err(Error::Format("missing MKF1 header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = u32_at(8) as usize;
    let grid = Grid3::new(n)?;
    let rank = Rank::from_code(bytes[12]).ok_or_else(|| Error::Format("bad rank code".into()))?;
    let flags = FieldFlags::from_bits(bytes[13]).ok_or_else(|| Error::Format("bad flags".into()))?;
    let block = n * n * n * 16;
    if bytes.len() != 14 + rank.ncomp() * block {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            rank.ncomp() * block,
            bytes.len() - 14
        )));
    }
    let nzh = grid.nzh();
    let mut comps = Vec::with_capacity(rank.ncomp());
    for c in 0..rank.ncomp() {
        let mut a = ndarray::Array3::from_elem(grid.spectral_shape(), C0);
        let base = 14 + c * block;
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..nzh {
                    let o = base + ((ix * n + iy) * n + iz) * 16;
                    let re = f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
                    let im = f64::from_le_bytes(bytes[o + 8..o + 16].try_into().expect("8 bytes"));
                    a[[ix, iy, iz]] = Complex64::new(re, im);
                }
            }
        }
        comps.push(a);
    }
    Ok(SpectralField::from_components(grid, rank, comps)?.with_flags(flags))
}

pub fn write(f: &SpectralField, path: &Path) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(&to_bytes(f))?;
    file.flush()?;
    Ok(())
}

pub fn read(path: &Path) -> Result<SpectralField> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    from_bytes(&buf)
}
