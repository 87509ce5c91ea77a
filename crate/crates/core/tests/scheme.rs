use mikado_forge::antidiv::antidiv;
use mikado_forge::field::ops::{div, grad, gradient_projection, leray};
use mikado_forge::field::product::norm_sq;
use mikado_forge::field::{curl, lp_norm, mollify, outer, Grid3, Rank, SpectralField};
use mikado_forge::geom::{build_decomposition, DirectionSet, GeometricDecomposition};
use mikado_forge::mikado::{build_family, MikadoFamily, MikadoOptions};
use mikado_forge::scheme::cutoff::{frobenius_field, smooth_step};
use mikado_forge::scheme::perturbation::{divergence_defect, potential_identity_residual};
use mikado_forge::scheme::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn decomp() -> GeometricDecomposition {
    build_decomposition(&DirectionSet::default()).unwrap()
}

fn family(sigma: u64, mu: u64, n: usize) -> MikadoFamily {
    build_family(&DirectionSet::default(), mu, sigma, n, MikadoOptions::default()).unwrap()
}

fn random_div_free(g: Grid3, kmax: i64, amp: f64, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = leray(&SpectralField::random(g, Rank::Vector, kmax, &mut rng).sub_mean()).unwrap();
    let s = amp / b.l2_norm();
    b.scale(s)
}

#[test]
fn residual_of_trivial_and_mikado_tuples() {
    let g = Grid3::new(32).unwrap();
    assert_eq!(ReynoldsTuple::zero(g).residual_norm().unwrap(), 0.0);
    let fam = family(1, 4, 32);
    for k in [0, 4] {
        let w = fam.w_base(k);
        let t = ReynoldsTuple {
            r: antidiv(&curl(&w).unwrap()).unwrap(),
            b: w,
            p: SpectralField::zeros(g, Rank::Scalar),
            stage: 0,
            residual_tol: 1.0,
        };
        assert!(t.residual_norm().unwrap() <= 1e-9, "{}", t.residual_norm().unwrap());
    }
}

#[test]
fn compatible_tuples_have_vanishing_residual() {
    let g = Grid3::new(16).unwrap();
    for seed in 0..4 {
        let b = random_div_free(g, 3, 0.3, seed);
        let t = compatible_tuple(b, 0, 1e-9).unwrap();
        assert!(t.residual_norm().unwrap() <= 1e-9);
        t.check_invariants().unwrap();
    }
}

#[test]
fn pressure_examples_and_projection_oracle() {
    let g = Grid3::new(16).unwrap();
    let c = SpectralField::constant(g, Rank::Vector, &[0.3, -1.0, 2.0]).unwrap();
    assert!(solve_pressure(&c).unwrap().l2_norm() < 1e-15);

    let fam = family(1, 4, 32);
    let w = fam.w_base(3);
    let p = solve_pressure(&w).unwrap();
    let half = norm_sq(&w).unwrap().scale(0.5).sub_mean();
    assert!(p.sub(&half).unwrap().l2_norm() < 1e-9 * half.l2_norm());

    for seed in 0..3 {
        let b = random_div_free(g, 4, 1.0, 10 + seed);
        let p = solve_pressure(&b).unwrap();
        // div(B⊗B) − ∇(p − ½|B|²) carries no gradient part.
        let mut q = p.clone();
        q.axpy(-0.5, &norm_sq(&b).unwrap()).unwrap();
        let mut v = div(&outer(&b, &b).unwrap()).unwrap();
        v.axpy(-1.0, &grad(&q).unwrap()).unwrap();
        assert!(gradient_projection(&v).unwrap().l2_norm() <= 1e-10 * v.l2_norm().max(1.0));
        // The system pressure balances the equation up to a divergence-free field.
        let ps = system_pressure(&b).unwrap();
        let mut f = curl(&b).unwrap();
        f.axpy(1.0, &div(&outer(&b, &b).unwrap()).unwrap()).unwrap();
        f.axpy(1.0, &grad(&ps).unwrap()).unwrap();
        assert!(div(&f).unwrap().l2_norm() < 1e-10 * f.l2_norm());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let not_free = SpectralField::random(g, Rank::Vector, 3, &mut rng);
    assert!(solve_pressure(&not_free).is_err());
}

#[test]
fn mollified_tuple_keeps_the_identity() {
    let g = Grid3::new(16).unwrap();
    let t = compatible_tuple(random_div_free(g, 3, 0.5, 7), 2, 1e-9).unwrap();
    for l in [1.0 / 16.0, 0.1, 0.25] {
        let m = mollify_tuple(&t, l).unwrap();
        assert!(m.residual_norm().unwrap() <= 1e-9, "{}", m.residual_norm().unwrap());
        m.check_invariants().unwrap();
        assert_eq!(m.stage, 2);
    }
    // Perturb the residual: the mollified residual is the mollified original.
    let mut bad = t.clone();
    bad.p = random_div_free(g, 2, 0.1, 8).component(0).sub_mean();
    let m = mollify_tuple(&bad, 0.1).unwrap();
    let expect = mollify(&residual(&bad).unwrap(), 0.1).unwrap();
    assert!(residual(&m).unwrap().sub(&expect).unwrap().l2_norm() < 1e-12);
    assert!(mollify_tuple(&t, 0.3).is_err());
    assert!(mollify_tuple(&t, 0.0).is_err());
}

#[test]
fn mollification_error_is_at_least_linear_in_l() {
    let g = Grid3::new(32).unwrap();
    let b = random_div_free(g, 6, 1.0, 21);
    let grad_norm = grad(&b).unwrap().l2_norm();
    let ls = [1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0];
    let errs: Vec<f64> = ls.iter().map(|l| mollify(&b, *l).unwrap().sub(&b).unwrap().l2_norm()).collect();
    for (l, e) in ls.iter().zip(&errs) {
        assert!(*e <= l * grad_norm);
    }
    let slope = mikado_forge::field::studies::loglog_slope(&ls, &errs).unwrap();
    assert!(slope >= 0.9, "{slope}");
}

#[test]
fn cutoff_branches_and_monotonicity() {
    let chi = Chi { c0: 9.0, l1: 0.2, delta: 0.05 };
    let m = chi.plateau();
    assert_eq!(chi.eval(0.0), 9.0 * m);
    assert_eq!(chi.eval(0.2), 9.0 * m);
    assert_eq!(chi.eval(2.0 * m), 9.0 * 2.0 * m);
    assert_eq!(chi.eval(3.0), 27.0);
    let mut prev = 0.0;
    for i in 0..=2000 {
        let t = 0.6 * i as f64 / 2000.0;
        let v = chi.eval(t);
        assert!(v >= prev && v >= chi.c0 * chi.delta);
        assert!(t / v <= 2.0 / chi.c0 + 1e-15);
        prev = v;
    }
    assert_eq!(smooth_step(-1.0), 0.0);
    assert_eq!(smooth_step(2.0), 1.0);
    assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);

    let d = decomp();
    let c0 = cutoff_constant(d.r0);
    assert!((c0 - 2.0 / d.r0).abs() < 1e-15);
    let g = Grid3::new(16).unwrap();
    let (rho, _) = build_cutoff(&SpectralField::zeros(g, Rank::Tensor), 0.3, c0).unwrap();
    assert!(rho.is_constant() && (rho.mean()[0] - 0.3 * c0).abs() < 1e-13);

    let t = compatible_tuple(random_div_free(g, 3, 2.0, 4), 0, 1e-8).unwrap();
    let (rho, chi) = build_cutoff(&t.r, 0.01, c0).unwrap();
    let fr = frobenius_field(&t.r).unwrap();
    let rp = rho.component_physical(0);
    let mut upper = 0;
    for (f, r) in fr.iter().zip(rp.iter()) {
        // ρ passes through a spectral round trip that drops Nyquist content,
        // so grid values match χ(|R̄|) only to about ten percent near kinks.
        let nominal = f / chi.eval(*f);
        assert!(nominal <= 2.0 / c0 + 1e-15);
        assert!(f / r <= nominal * 1.15 && f / r < d.r0, "{} at t = {f}", f / r / d.r0);
        if *f >= 2.0 * chi.plateau() {
            upper += 1;
            assert_eq!(chi.eval(*f), c0 * f);
            assert!((r - c0 * f).abs() < 0.15 * r, "{r} vs {}", c0 * f);
        }
    }
    println!("{upper} grid points on the upper branch");
    assert!(build_cutoff(&t.r, 0.0, c0).is_err());
}

#[test]
fn amplitudes_reproduce_the_stress() {
    let d = decomp();
    let c0 = cutoff_constant(d.r0);
    let g = Grid3::new(16).unwrap();
    let (rho, _) = build_cutoff(&SpectralField::zeros(g, Rank::Tensor), 0.5, c0).unwrap();
    let a = build_amplitudes(&rho, &SpectralField::zeros(g, Rank::Tensor), &d, Some(1.0)).unwrap();
    for (ak, ck) in a.fields.iter().zip(&d.c) {
        assert!(ak.is_constant());
        assert!((ak.mean()[0] - (c0 * 0.5 * ck).sqrt()).abs() < 1e-13);
    }
    let t = compatible_tuple(random_div_free(g, 3, 0.8, 5), 0, 1e-8).unwrap();
    for scale in [1.0, 4.0] {
        let r = t.r.clone().scale(scale);
        let (rho, _) = build_cutoff(&r, 0.05, c0).unwrap();
        let a = build_amplitudes(&rho, &r, &d, None).unwrap();
        assert!(a.identity_residual <= 1e-8 * a.identity_scale, "{}", a.identity_residual);
    }
}

#[test]
fn perturbation_is_divergence_free_through_its_potential() {
    let d = decomp();
    let fam = family(2, 2, 32);
    let g = fam.grid();
    let b = random_div_free(g, 2, 0.6, 9);
    let t = compatible_tuple(b, 0, 1e-8).unwrap();
    let m = mollify_tuple(&t, 0.25).unwrap();
    let (rho, _) = build_cutoff(&m.r, 0.05, cutoff_constant(d.r0)).unwrap();
    let amps = build_amplitudes(&rho, &m.r, &d, Some(1.0)).unwrap();
    let p = build_perturbation(&amps.fields, &fam).unwrap();
    assert!(!p.corrector.is_zero());
    assert!(potential_identity_residual(&p, &amps.fields, &fam).unwrap() <= 1e-9);
    assert!(divergence_defect(&p.total().unwrap()).unwrap() <= 1e-9);

    // Constant amplitudes: no corrector.
    let consts: Vec<_> = d.c.iter().map(|c| SpectralField::constant(g, Rank::Scalar, &[c.sqrt()]).unwrap()).collect();
    let p = build_perturbation(&consts, &fam).unwrap();
    assert!(p.corrector.is_zero());
    assert!(divergence_defect(&p.principal).unwrap() <= 1e-9);
    assert!(build_perturbation(&consts[..3], &fam).is_err());
}

#[test]
fn new_stress_trivial_cases() {
    let fam = family(2, 2, 32);
    let g = fam.grid();
    let zero_t = ReynoldsTuple::zero(g);
    let zeros: Vec<_> = (0..9).map(|_| SpectralField::zeros(g, Rank::Scalar)).collect();
    let p = build_perturbation(&zeros, &fam).unwrap();
    let s = build_new_stress(&zero_t, &SpectralField::zeros(g, Rank::Scalar), &zeros, &p, &fam).unwrap();
    for part in StressPart::ALL {
        assert!(s.part(part).is_zero(), "{part:?}");
    }

    let one = DirectionSet::new(vec![[0, 1, 1]], vec![[0.25, 0.5, 0.125]]).unwrap();
    let fam1 = build_family(&one, 2, 2, 32, MikadoOptions::default()).unwrap();
    let a = vec![SpectralField::constant(g, Rank::Scalar, &[1.5]).unwrap()];
    let p = build_perturbation(&a, &fam1).unwrap();
    let s = build_new_stress(&zero_t, &SpectralField::zeros(g, Rank::Scalar), &a, &p, &fam1).unwrap();
    assert!(s.oscillation.is_zero());
    let wp = p.principal.l2_norm().powi(2);
    assert!(s.interference.l2_norm() < 1e-12 * wp, "{}", s.interference.l2_norm());
}

#[test]
fn new_stress_closes_the_identity() {
    let d = decomp();
    let fam = family(2, 2, 32);
    let g = fam.grid();
    let t = compatible_tuple(random_div_free(g, 2, 0.6, 31), 0, 1e-8).unwrap();
    let m = mollify_tuple(&t, 0.25).unwrap();
    let (rho, _) = build_cutoff(&m.r, 0.05, cutoff_constant(d.r0)).unwrap();
    let amps = build_amplitudes(&rho, &m.r, &d, Some(1.0)).unwrap();
    let p = build_perturbation(&amps.fields, &fam).unwrap();
    let s = build_new_stress(&m, &rho, &amps.fields, &p, &fam).unwrap();
    for part in StressPart::ALL {
        let f = s.part(part);
        assert!(f.asymmetry().unwrap() <= 1e-12 * (1.0 + f.l2_norm()));
        assert!(f.trace_defect().unwrap() <= 1e-12 * (1.0 + f.l2_norm()));
    }
    // div(R_osc + R_F + R_A) = div(w_p⊗w_p) − ∇ρ + div R̄ + ∇π.
    let mut lhs = s.oscillation.clone();
    lhs.axpy(1.0, &s.interference).unwrap();
    lhs.axpy(1.0, &s.amplitude_defect).unwrap();
    let lhs = div(&lhs).unwrap();
    let mut rhs = div(&outer(&p.principal, &p.principal).unwrap()).unwrap();
    rhs.axpy(-1.0, &grad(&rho).unwrap()).unwrap();
    rhs.axpy(1.0, &div(&m.r).unwrap()).unwrap();
    rhs.axpy(1.0, &grad(&s.pressure_correction).unwrap()).unwrap();
    let err = lhs.sub(&rhs).unwrap().l2_norm();
    assert!(err <= 1e-8 * rhs.l2_norm(), "{err} vs {}", rhs.l2_norm());
    assert!(!s.oscillation.is_zero() && !s.corrector.is_zero());
}

#[test]
fn step_from_zero() {
    let d = decomp();
    let fam = family(2, 2, 32);
    let params = StepParams::new(2, 2, 0.25, 0.5);
    let (next, report) = step(ReynoldsTuple::zero(fam.grid()), &params, &d, &fam).unwrap();
    assert_eq!(next.stage, 1);
    assert!(next.b.l2_norm() > 0.0);
    assert!(report.all_finite());
    assert!(report.residual_final <= 1e-7 * report.residual_scale);
    assert!(report.residual_divergence <= 1e-9);
    assert!(report.residual_amplitude_identity <= 1e-8);
    assert!(report.corrector_l2 == 0.0);
    next.certify().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(weak_check(&next, 10, &mut rng).unwrap() <= 1e-7);

    // Constants in the pressure do not change the residual.
    let mut shifted = next.clone();
    shifted.p.axpy(1.0, &SpectralField::constant(fam.grid(), Rank::Scalar, &[3.0]).unwrap()).unwrap();
    assert_eq!(residual(&shifted).unwrap(), residual(&next).unwrap());
    assert!(next.p.mean()[0].abs() < 1e-14);

    // Parameters must match the family.
    let bad = StepParams::new(2, 4, 0.25, 0.5);
    assert!(step(ReynoldsTuple::zero(fam.grid()), &bad, &d, &fam).is_err());
}

#[test]
fn step_from_a_perturbed_seed() {
    let d = decomp();
    let fam = family(2, 2, 32);
    let t = compatible_tuple(random_div_free(fam.grid(), 2, 0.4, 77), 3, 1e-8).unwrap();
    let params = StepParams::new(2, 2, 0.25, 0.2);
    let (next, report) = step(t, &params, &d, &fam).unwrap();
    assert_eq!(next.stage, 4);
    assert!(report.all_finite());
    assert!(report.residual_final <= 1e-7 * report.residual_scale);
    assert!(report.residual_potential_identity <= 1e-9);
    assert!(report.corrector_l2 > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    assert!(weak_check(&next, 10, &mut rng).unwrap() <= 1e-7);
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}

#[test]
fn new_stress_shrinks_as_mu_grows() {
    let d = decomp();
    let mut prev = f64::INFINITY;
    for mu in [4u64, 8, 16] {
        let n = (4 * mu as usize).max(32);
        let opts = MikadoOptions { resolution_factor: 4.0, ..MikadoOptions::default() };
        let fam = build_family(&DirectionSet::default(), mu, 1, n, opts).unwrap();
        let params = StepParams::new(1, mu, 0.25, 0.5);
        let (next, _) = step(ReynoldsTuple::zero(fam.grid()), &params, &d, &fam).unwrap();
        let r1 = lp_norm(&next.r, 1.0).unwrap();
        println!("μ = {mu}: ‖R₁‖_L¹ = {r1:e}");
        assert!(r1 < prev);
        prev = r1;
    }
}
