use mikado_forge::field::norms::{cn_norm, lp_norm, sobolev_norm};
use mikado_forge::field::ops::{curl, dilate, dilate_within, div, grad, inv_laplacian, laplacian, leray};
use mikado_forge::field::product::{
    cross, dot, matvec, mul, outer, product_grid, spectral_band, traceless_tensor_product,
};
use mikado_forge::field::studies::{commutator_study, improved_holder_study};
use mikado_forge::field::{mollify, snapshot, FieldFlags, Grid3, Rank, SpectralField};
use mikado_forge::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn grid(n: usize) -> Grid3 {
    Grid3::new(n).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn scalar(g: Grid3, f: impl Fn([f64; 3]) -> f64 + Sync) -> SpectralField {
    SpectralField::from_fn(g, Rank::Scalar, move |x, o| o[0] = f(x))
}

fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
    a.sub(b).unwrap().l2_norm() / b.l2_norm().max(1e-300)
}

#[test]
fn grid_rejects_odd_and_tiny_sizes() {
    assert!(Grid3::new(5).is_err());
    assert!(Grid3::new(2).is_err());
    assert_eq!(grid(192).fine().n(), 288);
    assert_eq!(grid(6).fine().n(), 10);
}

#[test]
fn forward_transform_matches_direct_dft() {
    let g = grid(6);
    let f = SpectralField::from_fn(g, Rank::Scalar, |x, o| {
        o[0] = (x[0] * 3.1).sin() + x[1] * x[1] - 0.7 * x[2] * x[0]
    });
    let p = f.component_physical(0);
    // Direct DFT of the band-limited samples.
    let n = 6;
    for kx in -2i64..=2 {
        for ky in -2i64..=2 {
            for kz in 0i64..=2 {
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let ph = -2.0 * PI * (kx * i as i64 + ky * j as i64 + kz * k as i64) as f64 / n as f64;
                            s += p[[i, j, k]] * Complex64::new(ph.cos(), ph.sin());
                        }
                    }
                }
                s /= (n * n * n) as f64;
                let c = f.comp(0)[[g.index(kx), g.index(ky), kz as usize]];
                assert!((c - s).norm() < 1e-13, "mode {kx},{ky},{kz}: {c} vs {s}");
            }
        }
    }
}

#[test]
fn sine_has_expected_coefficients() {
    let g = grid(8);
    let f = scalar(g, |x| (2.0 * PI * x[0]).sin());
    let c = f.comp(0)[[1, 0, 0]];
    assert!((c - Complex64::new(0.0, -0.5)).norm() < 1e-15);
    assert!((f.comp(0)[[7, 0, 0]] - Complex64::new(0.0, 0.5)).norm() < 1e-15);
}

#[test]
fn spectral_physical_round_trip() {
    let g = grid(16);
    let f = SpectralField::random(g, Rank::Vector, 7, &mut rng(1));
    let back = SpectralField::from_physical(g, Rank::Vector, &f.to_physical()).unwrap();
    assert!(rel(&back, &f) < 1e-13);
}

#[test]
fn curl_of_shear_matches_hand_derivative() {
    let g = grid(16);
    let v = SpectralField::from_fn(g, Rank::Vector, |x, o| {
        o[0] = (2.0 * PI * x[1]).sin();
        o[1] = 0.0;
        o[2] = 0.0;
    });
    let expected = SpectralField::from_fn(g, Rank::Vector, |x, o| {
        o[0] = 0.0;
        o[1] = 0.0;
        o[2] = -2.0 * PI * (2.0 * PI * x[1]).cos();
    });
    assert!(rel(&curl(&v).unwrap(), &expected) < 1e-13);
}

#[test]
fn gradient_of_constant_vanishes() {
    let g = grid(8);
    let c = SpectralField::constant(g, Rank::Scalar, &[3.5]).unwrap();
    assert_eq!(grad(&c).unwrap().l2_norm(), 0.0);
}

#[test]
fn inverse_laplacian_round_trip_and_mean_error() {
    let g = grid(16);
    let f = scalar(g, |x| (2.0 * PI * x[0]).sin());
    let back = inv_laplacian(&laplacian(&f)).unwrap();
    assert!(rel(&back, &f) < 1e-12);
    let shifted = scalar(g, |x| 1.0 + (2.0 * PI * x[0]).sin());
    match inv_laplacian(&shifted) {
        Err(Error::NonzeroMean { mean }) => assert!((mean - 1.0).abs() < 1e-14),
        other => panic!("expected NonzeroMean, got {other:?}"),
    }
}

#[test]
fn cosine_squared_has_modes_zero_and_two() {
    let g = grid(16);
    let f = scalar(g, |x| (2.0 * PI * x[0]).cos());
    let p = mul(&f, &f).unwrap();
    assert!((p.mean()[0] - 0.5).abs() < 1e-15);
    for (idx, z) in p.comp(0).indexed_iter() {
        let kx = g.freq(idx.0);
        let allowed = idx.1 == 0 && idx.2 == 0 && (kx == 0 || kx.abs() == 2);
        if !allowed {
            assert!(z.norm() < 1e-15, "stray mode {idx:?}");
        }
    }
    assert!((p.comp(0)[[2, 0, 0]].re - 0.25).abs() < 1e-15);
}

#[test]
fn product_with_one_is_identity() {
    let g = grid(12);
    let f = SpectralField::random(g, Rank::Tensor, 5, &mut rng(2));
    let one = scalar(g, |_| 1.0);
    assert!(rel(&mul(&one, &f).unwrap(), &f) < 1e-15);
}

#[test]
fn dealiased_product_matches_direct_convolution() {
    let g = grid(8);
    let a = SpectralField::random(g, Rank::Scalar, 2, &mut rng(3));
    let b = SpectralField::random(g, Rank::Scalar, 2, &mut rng(4));
    // Also exercise the full lifted path with non-band-limited ends.
    let p = mul(&a, &b).unwrap();
    let coef = |f: &SpectralField, k: [i64; 3]| -> Complex64 {
        if !g.in_band(k) {
            return Complex64::new(0.0, 0.0);
        }
        if k[2] >= 0 {
            f.comp(0)[[g.index(k[0]), g.index(k[1]), k[2] as usize]]
        } else {
            f.comp(0)[[g.index(-k[0]), g.index(-k[1]), (-k[2]) as usize]].conj()
        }
    };
    let m = g.kmax();
    for kx in -m..=m {
        for ky in -m..=m {
            for kz in 0..=m {
                let mut s = Complex64::new(0.0, 0.0);
                for px in -m..=m {
                    for py in -m..=m {
                        for pz in -m..=m {
                            s += coef(&a, [px, py, pz]) * coef(&b, [kx - px, ky - py, kz - pz]);
                        }
                    }
                }
                let got = coef(&p, [kx, ky, kz]);
                assert!((got - s).norm() < 1e-12 * (1.0 + s.norm()), "{kx},{ky},{kz}");
            }
        }
    }
}

#[test]
fn narrow_band_product_grid_is_small_and_alias_free() {
    let g = grid(24);
    assert_eq!(product_grid(g, 11, 11).n(), 36);
    assert_eq!(product_grid(g, 3, 3).n(), 16);
    assert_eq!(product_grid(g, 0, 0).n(), 4);
    for (ka, kb) in [(1, 2), (3, 5), (6, 6), (11, 1), (9, 10)] {
        let m = product_grid(g, ka, kb).n() as i64;
        assert!(m > ka + kb + g.kmax().min(ka + kb) || m == 36, "{ka},{kb}");
    }

    let kb = 3;
    let a = SpectralField::random(g, Rank::Scalar, kb, &mut rng(5));
    let b = SpectralField::random(g, Rank::Scalar, kb, &mut rng(6));
    assert_eq!(spectral_band(&a), kb);
    let p = mul(&a, &b).unwrap();
    // Round-off from the transform reaches every mode of the result.
    let tail = p.comp(0).indexed_iter().filter(|((ix, iy, iz), _)| {
        g.freq(*ix).abs().max(g.freq(*iy).abs()).max(*iz as i64) > 2 * kb
    });
    assert!(tail.map(|(_, v)| v.norm()).fold(0.0, f64::max) < 1e-14);
    let coef = |f: &SpectralField, k: [i64; 3]| -> Complex64 {
        if k.iter().any(|c| c.abs() > kb) {
            return Complex64::new(0.0, 0.0);
        }
        if k[2] >= 0 {
            f.comp(0)[[g.index(k[0]), g.index(k[1]), k[2] as usize]]
        } else {
            f.comp(0)[[g.index(-k[0]), g.index(-k[1]), (-k[2]) as usize]].conj()
        }
    };
    let m = 2 * kb;
    for kx in -m..=m {
        for ky in -m..=m {
            for kz in 0..=m {
                let mut s = Complex64::new(0.0, 0.0);
                for px in -kb..=kb {
                    for py in -kb..=kb {
                        for pz in -kb..=kb {
                            s += coef(&a, [px, py, pz]) * coef(&b, [kx - px, ky - py, kz - pz]);
                        }
                    }
                }
                let got = p.comp(0)[[g.index(kx), g.index(ky), kz as usize]];
                assert!((got - s).norm() < 1e-12 * (1.0 + s.norm()), "{kx},{ky},{kz}");
            }
        }
    }
}

#[test]
fn traceless_product_of_unit_vector() {
    let g = grid(8);
    let u = SpectralField::constant(g, Rank::Vector, &[1.0, 0.0, 0.0]).unwrap();
    let t = traceless_tensor_product(&u, &u).unwrap();
    let m = t.mean();
    let expected = [2.0 / 3.0, 0.0, 0.0, 0.0, -1.0 / 3.0, 0.0, 0.0, 0.0, -1.0 / 3.0];
    for (a, b) in m.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn traceless_product_of_orthogonal_constants_keeps_zero_trace() {
    let g = grid(8);
    let u = SpectralField::constant(g, Rank::Vector, &[1.0, 0.0, 0.0]).unwrap();
    let v = SpectralField::constant(g, Rank::Vector, &[0.0, 2.0, 0.0]).unwrap();
    let t = traceless_tensor_product(&u, &v).unwrap();
    let plain = outer(&u, &v).unwrap();
    assert_eq!(t, plain.with_flags(t.flags()));
}

#[test]
fn traceless_product_of_random_fields_is_traceless() {
    let g = grid(12);
    let u = SpectralField::random(g, Rank::Vector, 5, &mut rng(5));
    let v = SpectralField::random(g, Rank::Vector, 5, &mut rng(6));
    let t = traceless_tensor_product(&u, &v).unwrap();
    assert!(t.trace_defect().unwrap() < 1e-14);
    assert!(t.flags().contains(FieldFlags::TRACELESS));
}

#[test]
fn norms_of_simple_fields() {
    let g = grid(16);
    let s = scalar(g, |x| (2.0 * PI * x[0]).sin());
    assert!((lp_norm(&s, 2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
    assert!((sobolev_norm(&s, 1.0, true).unwrap() - 2.0 * PI * 0.5f64.sqrt()).abs() < 1e-12);
    let c = scalar(g, |_| -1.75);
    for p in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
        assert!((lp_norm(&c, p).unwrap() - 1.75).abs() < 1e-13);
    }
    assert!(matches!(lp_norm(&c, 0.5), Err(Error::Domain(_))));
    // C^1 of sin: max|f| + max|f'| on a grid containing x = 1/4 and x = 0.
    assert!((cn_norm(&s, 1).unwrap() - (1.0 + 2.0 * PI)).abs() < 1e-12);
}

#[test]
fn mollifier_preserves_constants() {
    let g = grid(8);
    let c = scalar(g, |_| 2.5);
    assert_eq!(mollify(&c, 0.25).unwrap(), c);
    assert!(mollify(&c, 0.3).is_err());
    assert!(mollify(&c, 0.0).is_err());
}

/// η̂ along one axis from the marginal m(t) = ∫∫ η(t, y, z) dy dz, by nested Simpson.
fn eta_hat_oracle(xi: f64) -> f64 {
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        s * h / 3.0
    }
    let bump = |u: f64| if u >= 1.0 { 0.0 } else { (-1.0 / (1.0 - u)).exp() };
    // m(t) ∝ ∫_{t²}^1 bump(u) du with u = ρ².
    let marginal = |t: f64| simpson(bump, t * t, 1.0, 4000);
    let num = simpson(|t| marginal(t) * (xi * t).cos(), 0.0, 1.0, 4000);
    let den = simpson(marginal, 0.0, 1.0, 4000);
    num / den
}

#[test]
fn mollified_sine_amplitude_matches_quadrature_oracle() {
    let g = grid(16);
    for (m, l) in [(1usize, 0.25), (3, 0.1), (5, 0.05)] {
        let f = scalar(g, |x| (2.0 * PI * m as f64 * x[0]).sin());
        let out = mollify(&f, l).unwrap();
        let ratio = out.comp(0)[[m, 0, 0]].im / f.comp(0)[[m, 0, 0]].im;
        let oracle = eta_hat_oracle(2.0 * PI * m as f64 * l);
        assert!((ratio - oracle).abs() < 1e-8, "m={m} l={l}: {ratio} vs {oracle}");
    }
}

#[test]
fn mollification_error_decreases_with_l() {
    let g = grid(16);
    let f = SpectralField::random(g, Rank::Scalar, 6, &mut rng(7));
    let mut last = f64::INFINITY;
    for l in [0.25, 0.125, 0.0625, 0.03125] {
        let e = mollify(&f, l).unwrap().sub(&f).unwrap().l2_norm();
        assert!(e < last);
        last = e;
    }
}

#[test]
fn vector_identities_on_random_fields() {
    let g = grid(16);
    let v = leray(&SpectralField::random(g, Rank::Vector, 7, &mut rng(8))).unwrap();
    // div(V⊗V) = (V·∇)V for divergence-free V.
    let lhs = div(&outer(&v, &v).unwrap()).unwrap();
    let adv = matvec(&grad(&v).unwrap(), &v).unwrap();
    assert!(rel(&lhs, &adv) < 1e-10);
    // curl(V)×V + ½∇|V|² = (V·∇)V.
    let mut rhs = cross(&curl(&v).unwrap(), &v).unwrap();
    rhs.axpy(0.5, &grad(&dot(&v, &v).unwrap()).unwrap()).unwrap();
    assert!(rel(&rhs, &adv) < 1e-10);
}

#[test]
fn index_dilation_matches_physical_composition() {
    let g = grid(8);
    let f = SpectralField::random(g, Rank::Scalar, 3, &mut rng(9));
    let d = dilate(&f, 3).unwrap();
    let fp = f.component_physical(0);
    let dp = d.component_physical(0);
    let n = 8;
    for i in 0..3 * n {
        for j in 0..3 * n {
            for k in 0..3 * n {
                // x = i/(3n), so f(3x) is the coarse sample i mod n.
                assert!((dp[[i, j, k]] - fp[[i % n, j % n, k % n]]).abs() < 1e-12);
            }
        }
    }
    let w = dilate_within(&SpectralField::random(grid(16), Rank::Scalar, 3, &mut rng(10)), 2).unwrap();
    assert_eq!(w.grid().n(), 16);
    assert!(dilate_within(&SpectralField::random(grid(16), Rank::Scalar, 5, &mut rng(11)), 2).is_err());
}

#[test]
fn commutator_slope_for_sine_pair() {
    let g = grid(32);
    let f = scalar(g, |x| (2.0 * PI * x[0]).sin());
    let ls = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let t = commutator_study(&f, &f, &ls, 0, 2.0).unwrap();
    let s = t.slope.unwrap();
    assert!((s - 2.0).abs() < 0.2, "slope {s}");
    let c = scalar(g, |_| 1.3);
    let t0 = commutator_study(&c, &f, &ls, 0, 2.0).unwrap();
    assert!(t0.points.iter().all(|p| p.1 < 1e-14));
    assert!(commutator_study(&f, &f, &ls[..2], 0, 2.0).is_err());
}

#[test]
fn commutator_gradient_slope_on_random_pair() {
    let g = grid(24);
    let f = SpectralField::random(g, Rank::Scalar, 3, &mut rng(12));
    let h = SpectralField::random(g, Rank::Scalar, 3, &mut rng(13));
    let ls = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let t = commutator_study(&f, &h, &ls, 1, 2.0).unwrap();
    assert!(t.slope_at_least(0.8), "{:?}", t.slope);
}

#[test]
fn improved_holder_error_bound() {
    let g = grid(32);
    let sig = [2usize, 4, 8];
    let c = scalar(g, |_| 1.0);
    let s1 = scalar(g, |x| (2.0 * PI * x[0]).sin());
    let t = improved_holder_study(&c, &s1, &sig, 2.0, 4).unwrap();
    assert!(t.points.iter().all(|p| p.1 < 1e-13));
    // For smooth positive f and g the error decays at least like σ^{-1/r};
    // positivity keeps |f·g(σ·)|^r smooth so grid quadrature is accurate.
    let f = scalar(g, |x| 1.0 / (1.6 + (2.0 * PI * (x[0] - 0.1)).cos()));
    let pos = scalar(g, |x| 2.0 + (2.0 * PI * x[0]).sin());
    for r in [1.0, 1.5, 2.0] {
        let t = improved_holder_study(&f, &pos, &sig, r, 4).unwrap();
        assert!(t.points[0].1 > 1e-6, "r={r} {:?}", t);
        assert!(t.slope_at_most(-1.0 / r + 0.2), "r={r} {:?}", t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prop_round_trip_is_identity(seed in any::<u64>(), half in 2usize..7) {
        let g = grid(2 * half);
        let f = SpectralField::random(g, Rank::Tensor, half as i64, &mut rng(seed));
        let back = SpectralField::from_physical(g, Rank::Tensor, &f.to_physical()).unwrap();
        prop_assert!(rel(&back, &f) < 1e-13);
        prop_assert!(f.hermitian_defect() < 1e-13);
    }

    #[test]
    fn prop_div_curl_and_curl_grad_vanish(seed in any::<u64>()) {
        let g = grid(12);
        let v = SpectralField::random(g, Rank::Vector, 5, &mut rng(seed));
        let s = SpectralField::random(g, Rank::Scalar, 5, &mut rng(seed ^ 1));
        let dc = div(&curl(&v).unwrap()).unwrap().l2_norm();
        let cg = curl(&grad(&s).unwrap()).unwrap().l2_norm();
        prop_assert!(dc <= 1e-12 * grad(&v).unwrap().l2_norm());
        prop_assert!(cg <= 1e-12 * grad(&s).unwrap().l2_norm());
    }

    #[test]
    fn prop_parseval(seed in any::<u64>()) {
        let g = grid(10);
        let f = SpectralField::random(g, Rank::Vector, 4, &mut rng(seed));
        let q = lp_norm(&f, 2.0).unwrap();
        prop_assert!((q - f.l2_norm()).abs() <= 1e-12 * q);
    }
}

#[test]
fn snapshot_round_trip_is_bit_exact() {
    let g = Grid3::new(12).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let f = SpectralField::random(g, Rank::Tensor, 5, &mut rng).with_flags(FieldFlags::REAL | FieldFlags::SYMMETRIC);
    let bytes = snapshot::to_bytes(&f);
    let back = snapshot::from_bytes(&bytes).unwrap();
    assert_eq!(back.rank(), Rank::Tensor);
    assert_eq!(back.flags(), f.flags());
    assert_eq!(snapshot::to_bytes(&back), bytes);
    assert_eq!(back.sub(&f).unwrap().l2_norm(), 0.0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.mkf");
    snapshot::write(&f, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(snapshot::to_bytes(&snapshot::read(&path).unwrap()), bytes);

    assert!(snapshot::from_bytes(&bytes[..20]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(snapshot::from_bytes(&bad).is_err());
}

#[test]
fn constant_samples_give_an_exact_constant_field() {
    for n in [12, 24, 48] {
        let g = Grid3::new(n).unwrap();
        let a = ndarray::Array3::from_elem(g.physical_shape(), 0.7);
        let f = SpectralField::from_physical(g, Rank::Scalar, &[a]).unwrap();
        assert!(f.is_constant());
        assert_eq!(f.mean()[0], 0.7);
    }
}
