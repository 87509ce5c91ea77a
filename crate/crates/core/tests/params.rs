use mikado_forge::params::{
    check_inequalities, default_r, derive_gamma, fmt_q, gamma_of, ladder, q, IterationParams, Lambda,
    Surrogate, Q, DEFAULT_DIGIT_CAP,
};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

/// The five exponents written out literally, evaluated at rational r.
fn oracle(p: &IterationParams, r: &Q) -> [Q; 5] {
    let one = Q::one();
    let b = Q::from_integer(BigInt::from(p.b));
    let (be, al) = (&p.beta, &p.alpha);
    let g = (&one - be) / &b + be;
    let n = |x: i64| Q::from_integer(BigInt::from(x));
    [
        -(al / n(2)) + n(9) * &g,
        n(2) * be * &b + n(2) * (&one - be) / &b + (&one - al) * (&one - n(2) / r),
        n(2) * be * (&b - &one) + n(9) * &g - &one + n(3) * (&one - &one / r),
        n(2) * be * (&b - &one) + n(10) * &g - al + n(2) * (&one - al) * (&one - &one / r),
        n(2) * be * (&b - &one) + n(9) * &g - al + (&one - al) * (n(2) - n(3) / r),
    ]
}

fn pow_by_squaring(mut base: BigInt, mut e: u64) -> BigInt {
    let mut acc = BigInt::one();
    while e > 0 {
        if e & 1 == 1 {
            acc *= &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    acc
}

fn exact(l: &Lambda) -> &BigInt {
    match l {
        Lambda::Exact(x) => x,
        other => panic!("expected exact lambda, got {other:?}"),
    }
}

#[test]
fn gamma_examples() {
    assert_eq!(derive_gamma(&IterationParams::paper()), q(281, 8000));
    assert_eq!(gamma_of(&Q::zero(), 2), q(1, 2));
    assert_eq!(gamma_of(&q(1, 2), 4), q(5, 8));
}

#[test]
fn ladder_examples() {
    let p = IterationParams::paper();
    let l0 = ladder(&p, 0, DEFAULT_DIGIT_CAP).unwrap();
    assert_eq!(*exact(&l0.lambda), BigInt::from(5));
    assert_eq!(l0.delta_exponent, q(-1, 125));
    let l1 = ladder(&p, 1, DEFAULT_DIGIT_CAP).unwrap();
    assert_eq!(exact(&l1.lambda).to_string(), "23283064365386962890625");
    assert_eq!(*exact(&l1.lambda), pow_by_squaring(BigInt::from(5), 32));
    let l2 = ladder(&p, 2, DEFAULT_DIGIT_CAP).unwrap();
    assert_eq!(*exact(&l2.lambda), pow_by_squaring(BigInt::from(5), 1024));
    let l3 = ladder(&p, 3, DEFAULT_DIGIT_CAP).unwrap();
    assert!(l3.is_symbolic());
    let small = IterationParams { a: q(2, 1), b: 2, ..IterationParams::paper() };
    assert_eq!(*exact(&ladder(&small, 2, DEFAULT_DIGIT_CAP).unwrap().lambda), BigInt::from(16));
}

#[test]
fn ladder_ceiling_for_rational_base() {
    // (3/2)^4 = 81/16 = 5.0625, ceiling 6.
    let p = IterationParams { a: q(3, 2), b: 2, ..IterationParams::paper() };
    assert_eq!(*exact(&ladder(&p, 2, DEFAULT_DIGIT_CAP).unwrap().lambda), BigInt::from(6));
}

#[test]
fn paper_inequalities_at_r_limit() {
    let p = IterationParams::paper();
    let reps = check_inequalities(&p, &default_r()).unwrap();
    let want = [q(-31, 8000), q(-167, 4000), q(-3487, 8000), q(-163, 4000), q(-3487, 8000)];
    // Independent check of the frozen values against the literal formulas at r -> 1.
    let lim = oracle(&p, &Q::one());
    for ((rep, w), o) in reps.iter().zip(&want).zip(&lim) {
        assert_eq!(&rep.value_at_r1, w, "{}", rep.name);
        assert_eq!(&rep.value_at_r1, o, "{}", rep.name);
        assert!(rep.holds, "{}", rep.name);
    }
    // Printed approximations: -0.43 for (iii)/(v), and a negative value for (iv).
    assert!((mikado_forge::params::q_to_f64(&reps[2].value_at_r1) + 0.43).abs() < 0.01);
    assert!(reps[3].value_at_r1 < Q::zero());
}

#[test]
fn report_json_shape() {
    let reps = check_inequalities(&IterationParams::paper(), &default_r()).unwrap();
    let j = reps[0].to_json_line();
    assert_eq!(j["name"], "perturbation");
    assert_eq!(j["value_exact"], "-31/8000");
    assert_eq!(j["holds"], true);
    assert!((j["value_float"].as_f64().unwrap() + 31.0 / 8000.0).abs() < 1e-15);
    assert_eq!(fmt_q(&q(4, 1)), "4");
}

#[test]
fn r_outside_interval_is_rejected() {
    let p = IterationParams::paper();
    assert!(check_inequalities(&p, &Q::one()).is_err());
    assert!(check_inequalities(&p, &q(2, 1)).is_err());
    assert!(check_inequalities(&p, &q(1, 2)).is_err());
}

#[test]
fn surrogate_validation() {
    let s = Surrogate { lambda_n: 4, lambda_np1: 64, sigma: 4, mu: 16, ell_inv: 8 };
    s.validate().unwrap();
    s.check_grid(192).unwrap();
    assert!(s.check_grid(200).is_err());
    let bad = Surrogate { lambda_np1: 63, ..s.clone() };
    assert!(bad.validate().is_err());
    let wide = Surrogate { ell_inv: 2, ..s };
    assert!(wide.validate().is_err());
}

proptest! {
    #[test]
    fn prop_gamma_exponent_identity(bn in 0i64..1000, bd in 1001i64..5000, b in 2u32..100) {
        let beta = q(bn, bd);
        let g = gamma_of(&beta, b);
        prop_assert_eq!(g, &beta + (Q::one() - &beta) / Q::from_integer(BigInt::from(b)));
    }

    #[test]
    fn prop_reports_match_literal_formulas(num in 1i64..1023) {
        let p = IterationParams::paper();
        let r = q(1024 + num, 1024);
        let reps = check_inequalities(&p, &r).unwrap();
        let o = oracle(&p, &r);
        for (rep, v) in reps.iter().zip(&o) {
            prop_assert_eq!(&rep.value_at_r, v);
        }
    }

    #[test]
    fn prop_near_one_agrees_in_sign_with_limit(_x in 0u8..1) {
        let p = IterationParams::paper();
        let r = q(1_000_001, 1_000_000);
        for rep in check_inequalities(&p, &r).unwrap() {
            prop_assert_eq!(rep.value_at_r.is_negative(), rep.value_at_r1.is_negative());
        }
    }

    #[test]
    fn prop_expressions_monotone_in_r(a in 1i64..500, d in 1i64..500) {
        let p = IterationParams::paper();
        let r1 = q(1000 + a, 1000);
        let r2 = q(1000 + a + d, 1000);
        let e1 = check_inequalities(&p, &r1).unwrap();
        let e2 = check_inequalities(&p, &r2).unwrap();
        for (x, y) in e1.iter().zip(&e2) {
            // Each is affine in 1/r, hence monotone: the sign of the change is fixed.
            let c = &x.margin_fn.coeff_inv_r;
            let dv = &y.value_at_r - &x.value_at_r;
            prop_assert!(c.is_zero() && dv.is_zero() || (c.is_negative() == dv.is_positive()));
        }
    }

    #[test]
    fn prop_ladder_matches_squaring_oracle(a in 2i64..20, b in 2u32..6, k in 0u32..4) {
        let p = IterationParams { a: q(a, 1), b, ..IterationParams::paper() };
        let e = ladder(&p, k, DEFAULT_DIGIT_CAP).unwrap();
        if !e.is_symbolic() {
            prop_assert_eq!(exact(&e.lambda), &pow_by_squaring(BigInt::from(a), (b as u64).pow(k)));
        }
    }
}
