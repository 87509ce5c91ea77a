//! Real 3-D FFT built on complex 1-D transforms.
//!
//! The z axis is done as a real transform by packing two real lines into one
//! complex line; x and y are plain complex passes over the half spectrum.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

type Plan = Arc<dyn Fft<f64>>;

fn plan(n: usize, inverse: bool) -> Plan {
    static PLANS: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>> =
        OnceLock::new();
    let cell = PLANS.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cell.lock().expect("fft plan cache poisoned");
    let (planner, cache) = &mut *guard;
    cache
        .entry((n, inverse))
        .or_insert_with(|| {
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

struct Work {
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Work {
    fn new(len: usize, fft: &Plan) -> Self {
        Self {
            buf: vec![Complex64::new(0.0, 0.0); len],
            scratch: vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
        }
    }
}

/// Forward transform of `phys` (row-major x,y,z) into the half spectrum,
/// normalized so that coefficient 0 is the mean.
pub fn forward(n: usize, phys: &[f64], spec: &mut [Complex64]) {
    let nz = n / 2 + 1;
    assert_eq!(phys.len(), n * n * n);
    assert_eq!(spec.len(), n * n * nz);
    let fft = plan(n, false);

    // z: real lines, two at a time.
    phys.par_chunks(n * n)
        .zip(spec.par_chunks_mut(n * nz))
        .for_each_init(
            || Work::new(n, &fft),
            |w, (src, dst)| {
                for pair in 0..n / 2 {
                    let a = &src[2 * pair * n..(2 * pair + 1) * n];
                    let b = &src[(2 * pair + 1) * n..(2 * pair + 2) * n];
                    for j in 0..n {
                        w.buf[j] = Complex64::new(a[j], b[j]);
                    }
                    fft.process_with_scratch(&mut w.buf, &mut w.scratch);
                    let (oa, ob) = dst[2 * pair * nz..(2 * pair + 2) * nz].split_at_mut(nz);
                    for k in 0..nz {
                        let zk = w.buf[k];
                        let zc = w.buf[(n - k) % n].conj();
                        oa[k] = (zk + zc) * 0.5;
                        ob[k] = (zk - zc) * Complex64::new(0.0, -0.5);
                    }
                }
            },
        );

    y_pass(n, spec, &fft);
    x_pass(n, spec, &fft);

    let scale = 1.0 / (n * n * n) as f64;
    spec.par_iter_mut().for_each(|c| *c *= scale);
}

/// Inverse transform of a half spectrum (unnormalized synthesis).
pub fn inverse(n: usize, spec: &[Complex64], phys: &mut [f64]) {
    let nz = n / 2 + 1;
    assert_eq!(phys.len(), n * n * n);
    assert_eq!(spec.len(), n * n * nz);
    let ifft = plan(n, true);
    let mut work = spec.to_vec();
    x_pass(n, &mut work, &ifft);
    y_pass(n, &mut work, &ifft);

    work.par_chunks(n * nz)
        .zip(phys.par_chunks_mut(n * n))
        .for_each_init(
            || Work::new(n, &ifft),
            |w, (src, dst)| {
                for pair in 0..n / 2 {
                    let a = &src[2 * pair * nz..(2 * pair + 1) * nz];
                    let b = &src[(2 * pair + 1) * nz..(2 * pair + 2) * nz];
                    for k in 0..n {
                        let (ak, bk) = if k == 0 || k == n / 2 {
                            (Complex64::new(a[k].re, 0.0), Complex64::new(b[k].re, 0.0))
                        } else if k < n / 2 {
                            (a[k], b[k])
                        } else {
                            (a[n - k].conj(), b[n - k].conj())
                        };
                        w.buf[k] = ak + Complex64::new(-bk.im, bk.re);
                    }
                    ifft.process_with_scratch(&mut w.buf, &mut w.scratch);
                    let (oa, ob) = dst[2 * pair * n..(2 * pair + 2) * n].split_at_mut(n);
                    for j in 0..n {
                        oa[j] = w.buf[j].re;
                        ob[j] = w.buf[j].im;
                    }
                }
            },
        );
}

/// Transform along y within each x slab.
fn y_pass(n: usize, data: &mut [Complex64], fft: &Plan) {
    let nz = n / 2 + 1;
    data.par_chunks_mut(n * nz).for_each_init(
        || Work::new(n * nz, fft),
        |w, slab| {
            for y in 0..n {
                for kz in 0..nz {
                    w.buf[kz * n + y] = slab[y * nz + kz];
                }
            }
            fft.process_with_scratch(&mut w.buf, &mut w.scratch);
            for y in 0..n {
                for kz in 0..nz {
                    slab[y * nz + kz] = w.buf[kz * n + y];
                }
            }
        },
    );
}

/// Transform along x through a transposed copy laid out as (y, kz, x).
fn x_pass(n: usize, data: &mut [Complex64], fft: &Plan) {
    let nz = n / 2 + 1;
    let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
    {
        let src: &[Complex64] = data;
        t.par_chunks_mut(nz * n).enumerate().for_each(|(y, block)| {
            for kz in 0..nz {
                for x in 0..n {
                    block[kz * n + x] = src[(x * n + y) * nz + kz];
                }
            }
        });
    }
    t.par_chunks_mut(nz * n).for_each_init(
        || vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
        |scratch, block| fft.process_with_scratch(block, scratch),
    );
    let t = &t;
    data.par_chunks_mut(n * nz).enumerate().for_each(|(x, slab)| {
        for y in 0..n {
            for kz in 0..nz {
                slab[y * nz + kz] = t[(y * nz + kz) * n + x];
            }
        }
    });
}
