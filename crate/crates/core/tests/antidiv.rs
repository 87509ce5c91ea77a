use mikado_forge::antidiv::{
    antidiv, antidiv_scaling_study, bilinear_antidiv, bilinear_antidiv_rank_one, contract, AntidivOperator,
};
use mikado_forge::field::norms::{cn_norm, lp_norm};
use mikado_forge::field::ops::{dilate_within, div, grad, inv_laplacian, leray};
use mikado_forge::field::product::{mul, outer};
use mikado_forge::field::{Grid3, Rank, SpectralField};
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

fn zero_mean(f: SpectralField) -> SpectralField {
    f.sub_mean()
}

/// ℛ assembled from differential operators:
/// −½∂_i∂_jΔ⁻²(div v) − ½δ_ij Δ⁻¹ div v + ∂_iΔ⁻¹v_j + ∂_jΔ⁻¹v_i.
fn antidiv_oracle(v: &SpectralField) -> SpectralField {
    let dv = div(v).unwrap();
    let w = inv_laplacian(&inv_laplacian(&dv).unwrap()).unwrap();
    let hess = grad(&grad(&w).unwrap()).unwrap();
    let lv = inv_laplacian(&v.clone().sub_mean()).unwrap();
    let glv = grad(&lv).unwrap(); // (∇Δ⁻¹v)_ij = ∂_j Δ⁻¹ v_i
    let mut t = hess.scale(-0.5);
    t.axpy(1.0, &glv).unwrap();
    t.axpy(1.0, &glv.transpose().unwrap()).unwrap();
    let id = inv_laplacian(&dv).unwrap();
    let g = v.grid();
    let mut diag = SpectralField::zeros(g, Rank::Tensor);
    for i in 0..3 {
        diag.axpy_component(3 * i + i, -0.5, id.comp(0));
    }
    t.axpy(1.0, &diag).unwrap();
    t
}

fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
    a.sub(b).unwrap().l2_norm() / b.l2_norm().max(1e-300)
}

#[test]
fn constant_input_maps_to_zero() {
    let v = SpectralField::constant(grid(8), Rank::Vector, &[1.0, -2.0, 0.5]).unwrap();
    let t = antidiv(&v).unwrap();
    assert_eq!(t.l2_norm(), 0.0);
    assert_eq!(div(&t).unwrap().l2_norm(), 0.0);
}

#[test]
fn shear_input_is_inverted() {
    let g = grid(16);
    let v = SpectralField::from_fn(g, Rank::Vector, |x, o| {
        o[0] = (2.0 * PI * x[2]).sin();
        o[1] = 0.0;
        o[2] = 0.0;
    });
    let t = antidiv(&v).unwrap();
    assert!(div(&t).unwrap().sub(&v).unwrap().l2_norm() <= 1e-10);
}

#[test]
fn multiplier_matches_differential_form() {
    for (n, seed) in [(4usize, 1u64), (8, 2), (12, 3)] {
        let v = SpectralField::random(grid(n), Rank::Vector, (n / 2 - 1) as i64, &mut rng(seed));
        let t = antidiv(&v).unwrap();
        assert!(rel(&t, &antidiv_oracle(&v)) < 1e-13, "N={n}");
    }
    // The symbol table agrees with the applied operator on a single mode.
    let g = grid(8);
    let k = [1i64, -2, 3];
    let m = AntidivOperator::symbol(k);
    let v = SpectralField::from_fn(g, Rank::Vector, move |x, o| {
        let ph = 2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2]);
        o[0] = ph.cos();
        o[1] = 0.0;
        o[2] = 0.0;
    });
    let t = AntidivOperator::new(g).apply(&v).unwrap();
    let idx = [g.index(k[0]), g.index(k[1]), k[2] as usize];
    for i in 0..3 {
        for j in 0..3 {
            let want = m[i][j][0] * 0.5; // cos carries ½ on each of ±k
            assert!((t.comp(3 * i + j)[idx] - want).norm() < 1e-14);
        }
    }
    assert!(AntidivOperator::new(grid(4)).apply(&v).is_err());
}

#[test]
fn random_output_is_symmetric_traceless_and_inverts_div() {
    let g = grid(16);
    for seed in 0..20 {
        let v = SpectralField::random(g, Rank::Vector, 7, &mut rng(100 + seed));
        let t = antidiv(&v).unwrap();
        assert!(t.asymmetry().unwrap() <= 1e-12 * t.l2_norm());
        assert!(t.trace_defect().unwrap() <= 1e-12);
        let d = div(&t).unwrap();
        assert!(d.sub(&v.clone().sub_mean()).unwrap().l2_norm() <= 1e-10 * v.l2_norm());
    }
}

#[test]
fn bilinear_with_constant_u_reduces_to_antidiv() {
    let g = grid(12);
    let u = SpectralField::constant(g, Rank::Vector, &[0.3, -1.0, 2.0]).unwrap();
    let h = zero_mean(SpectralField::random(g, Rank::Tensor, 5, &mut rng(7)));
    let t = bilinear_antidiv(&u, &h).unwrap();
    let uh = contract(&u, &h).unwrap();
    assert!(rel(&t, &antidiv(&uh).unwrap()) < 1e-12);
    let d = div(&t).unwrap();
    assert!(d.sub(&uh.clone().sub_mean()).unwrap().l2_norm() <= 1e-9 * uh.l2_norm());
}

#[test]
fn bilinear_divergence_identity_on_random_pairs() {
    let g = grid(16);
    for seed in 0..6 {
        let u = SpectralField::random(g, Rank::Vector, 5, &mut rng(200 + seed));
        let h = zero_mean(SpectralField::random(g, Rank::Tensor, 5, &mut rng(300 + seed)));
        let t = bilinear_antidiv(&u, &h).unwrap();
        let uh = contract(&u, &h).unwrap();
        let d = div(&t).unwrap();
        assert!(d.sub(&uh.clone().sub_mean()).unwrap().l2_norm() <= 1e-9 * uh.l2_norm());
    }
}

#[test]
fn bilinear_requires_zero_mean_h() {
    let g = grid(8);
    let u = SpectralField::random(g, Rank::Vector, 3, &mut rng(1));
    let h = SpectralField::constant(g, Rank::Tensor, &[1.0; 9]).unwrap();
    assert!(bilinear_antidiv(&u, &h).is_err());
}

#[test]
fn contraction_convention_by_components() {
    // (uH)_i = u_l H_li: u = e_x, H with only H_xy = f gives (uH) = (0, f, 0).
    let g = grid(8);
    let f = SpectralField::from_fn(g, Rank::Scalar, |x, o| o[0] = (2.0 * PI * x[2]).cos());
    let u = SpectralField::constant(g, Rank::Vector, &[1.0, 0.0, 0.0]).unwrap();
    let mut h = SpectralField::zeros(g, Rank::Tensor);
    h.axpy_component(1, 1.0, f.comp(0));
    let uh = contract(&u, &h).unwrap();
    assert_eq!(uh.component(0).l2_norm(), 0.0);
    assert!(rel(&uh.component(1), &f) < 1e-15);
    assert_eq!(uh.component(2).l2_norm(), 0.0);
    // 𝒯(u, H) then equals ℛ applied to the row vector (0, f, 0).
    let t = bilinear_antidiv(&u, &h).unwrap();
    assert!(rel(&t, &antidiv(&uh).unwrap()) < 1e-13);
}

#[test]
fn rank_one_form_matches_general_form() {
    let g = grid(16);
    let u = SpectralField::random(g, Rank::Vector, 4, &mut rng(8));
    let psi = zero_mean(SpectralField::random(g, Rank::Scalar, 6, &mut rng(9)));
    let e = [1.0 / 2f64.sqrt(), 0.0, 1.0 / 2f64.sqrt()];
    let ee = SpectralField::constant(g, Rank::Vector, &e).unwrap();
    let h = mul(&psi, &outer(&ee, &ee).unwrap()).unwrap();
    let a = bilinear_antidiv(&u, &h).unwrap();
    let b = bilinear_antidiv_rank_one(&u, &psi, e).unwrap();
    assert!(rel(&b, &a) < 1e-12);
}

#[test]
fn bilinear_is_linear_in_u() {
    let g = grid(12);
    let u1 = SpectralField::random(g, Rank::Vector, 4, &mut rng(10));
    let u2 = SpectralField::random(g, Rank::Vector, 4, &mut rng(11));
    let h = zero_mean(SpectralField::random(g, Rank::Tensor, 4, &mut rng(12)));
    let mut comb = u1.clone().scale(2.5);
    comb.axpy(1.0, &u2).unwrap();
    let lhs = bilinear_antidiv(&comb, &h).unwrap();
    let mut rhs = bilinear_antidiv(&u1, &h).unwrap().scale(2.5);
    rhs.axpy(1.0, &bilinear_antidiv(&u2, &h).unwrap()).unwrap();
    assert!(rel(&lhs, &rhs) < 1e-13);
}

#[test]
fn antidiv_gains_one_power_of_sigma() {
    let g = grid(64);
    let u = SpectralField::from_fn(g, Rank::Vector, |x, o| {
        o[0] = (2.0 * PI * x[0]).sin();
        o[1] = 0.0;
        o[2] = 0.0;
    });
    let sig = [2usize, 4, 8, 16];
    let t = antidiv_scaling_study(&u, &sig, 2.0, 1).unwrap();
    let c0 = t.points[0].1 * t.points[0].0;
    for (s, v) in &t.points {
        assert!((v * s / c0 - 1.0).abs() < 0.15);
    }
    for r in [1.0, 1.5] {
        let t = antidiv_scaling_study(&u, &sig, r, 2).unwrap();
        assert!(t.slope_at_most(-1.0 + 0.15), "r={r} {:?}", t.slope);
    }
    let z = SpectralField::zeros(g, Rank::Vector);
    let t0 = antidiv_scaling_study(&z, &sig, 2.0, 1).unwrap();
    assert!(t0.points.iter().all(|p| p.1 == 0.0));
    let nz = SpectralField::constant(g, Rank::Vector, &[1.0, 0.0, 0.0]).unwrap();
    assert!(antidiv_scaling_study(&nz, &sig, 2.0, 1).is_err());
}

#[test]
fn bilinear_gains_one_power_of_sigma() {
    let g = grid(64);
    let u = SpectralField::random(Grid3::new(8).unwrap(), Rank::Vector, 2, &mut rng(13)).resample(g);
    let h0 = zero_mean(SpectralField::random(Grid3::new(8).unwrap(), Rank::Tensor, 2, &mut rng(14)).resample(g));
    let c1 = cn_norm(&u, 1).unwrap();
    let mut pts = Vec::new();
    for s in [2usize, 4, 8] {
        let hs = dilate_within(&h0, s).unwrap();
        let t = bilinear_antidiv(&u, &hs).unwrap();
        let ratio = lp_norm(&t, 2.0).unwrap() * s as f64 / (c1 * lp_norm(&hs, 2.0).unwrap());
        pts.push(ratio);
    }
    let (lo, hi) = pts.iter().fold((f64::MAX, 0.0f64), |a, v| (a.0.min(*v), a.1.max(*v)));
    assert!(hi / lo < 1.5, "{pts:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn prop_div_antidiv_is_identity_minus_mean(seed in any::<u64>()) {
        let g = grid(12);
        let v = SpectralField::random(g, Rank::Vector, 5, &mut rng(seed));
        let t = antidiv(&v).unwrap();
        prop_assert!(div(&t).unwrap().sub(&v.clone().sub_mean()).unwrap().l2_norm() <= 1e-10 * v.l2_norm());
        prop_assert!(t.trace_defect().unwrap() <= 1e-12);
    }

    #[test]
    fn prop_bilinear_divergence(seed in any::<u64>()) {
        let g = grid(10);
        let u = leray(&SpectralField::random(g, Rank::Vector, 4, &mut rng(seed))).unwrap();
        let h = zero_mean(SpectralField::random(g, Rank::Tensor, 4, &mut rng(seed ^ 0xabc)));
        let t = bilinear_antidiv(&u, &h).unwrap();
        let uh = contract(&u, &h).unwrap();
        prop_assert!(div(&t).unwrap().sub(&uh.clone().sub_mean()).unwrap().l2_norm() <= 1e-9 * uh.l2_norm());
    }
}
