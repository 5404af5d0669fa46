//! Structural invariants of the driver flow, the cocycle and the semiflow on
//! randomised instances.

use proptest::prelude::*;

use pullback_core::attractor::{cone_membership, random_positive, Cone};
use pullback_core::cocycle::lyapunov_estimate;
use pullback_core::driving::{log_cocycle, BasePoint, Driver, Term, WindowForm};
use pullback_core::dynamics::{evolve, g_eval, linear_propagate, Nonlinearity, ProblemSpec};
use pullback_core::spatial::{Basis, State};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DT: f64 = 1e-2;

fn term() -> impl Strategy<Value = Term> {
    (-1.0..1.0f64, 0.1..3.0f64, 0.0..6.3f64).prop_map(|(a, w, ph)| Term::new(a, w, ph))
}

fn trig_driver() -> impl Strategy<Value = Driver> {
    prop::collection::vec(term(), 1..4).prop_map(Driver::trig_poly)
}

fn any_driver() -> impl Strategy<Value = Driver> {
    prop_oneof![
        trig_driver(),
        (1u32..8).prop_map(Driver::geometric),
        (0.2..0.9f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(b, p, f)| Driver::power(b, p, f)),
        (0.0..50.0f64, 0.5..6.0f64, 5.0..40.0f64).prop_map(|(l, d, per)| Driver::window(WindowForm::PlateauDips {
            plateau: l,
            depth: d,
            period: per,
            shoulder: 0.05,
            ramp: 2.0
        })),
    ]
}

/// Offsets and spans on the step lattice, so that split runs share step times.
fn lattice(lo: i64, hi: i64) -> impl Strategy<Value = f64> {
    (lo..hi).prop_map(|k| k as f64 * DT)
}

fn nonneg_state(basis: &Basis, seed: u64, amp: f64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = random_positive(basis, &mut rng);
    let s = basis.sup_norm(&z);
    z.scaled(amp / s)
}

fn signed_state(n: usize, coeffs: &[f64]) -> State {
    let mut z = State::zeros(n);
    z.coeffs[..coeffs.len()].copy_from_slice(coeffs);
    z
}

fn grid_excess(basis: &Basis, a: &State, b: &State) -> f64 {
    // max_x (a - b)
    let (ga, gb) = (basis.to_grid(a), basis.to_grid(b));
    ga.iter().zip(&gb).fold(f64::NEG_INFINITY, |m, (x, y)| m.max(x - y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn translations_compose(s in -1e3..1e3f64, a in -1e3..1e3f64, b in -1e3..1e3f64) {
        let p = BasePoint::new(s);
        let lhs = p.translate(a).translate(b).offset;
        let rhs = p.translate(a + b).offset;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + s.abs() + a.abs() + b.abs()));
        prop_assert_eq!(p.translate(0.0), p);
    }

    #[test]
    fn log_cocycle_is_additive(d in any_driver(), s in -100.0..100.0f64, t in -50.0..50.0f64, u in -50.0..50.0f64) {
        let p = BasePoint::new(s);
        let lhs = log_cocycle(&d, p, t + u);
        let rhs = log_cocycle(&d, p, t) + log_cocycle(&d, p.translate(t), u);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        prop_assert_eq!(log_cocycle(&d, p, 0.0), 0.0);
    }

    #[test]
    fn semiflow_splits(d in trig_driver(), s in lattice(-2000, 2000), t in lattice(50, 500), u in lattice(50, 500), amp in 0.1..6.0f64) {
        let spec = ProblemSpec::desk(d).unwrap();
        let z = spec.e0().scaled(amp).add(&State::mode(spec.n(), 1, 0.3 * amp));
        let p = BasePoint::new(s);
        let whole = evolve(&spec, p, &z, t + u).unwrap();
        let mid = evolve(&spec, p, &z, t).unwrap();
        let split = evolve(&spec, p.translate(t), &mid, u).unwrap();
        prop_assert!(spec.basis.sup_dist(&whole, &split) <= 1e-8);
    }

    #[test]
    fn flow_is_odd(d in trig_driver(), s in -20.0..20.0f64, t in 0.5..10.0f64, c in prop::collection::vec(-3.0..3.0f64, 6)) {
        let spec = ProblemSpec::desk(d).unwrap();
        let z = signed_state(spec.n(), &c);
        let p = BasePoint::new(s);
        let a = evolve(&spec, p, &z, t).unwrap();
        let b = evolve(&spec, p, &z.scaled(-1.0), t).unwrap();
        prop_assert!(spec.basis.sup_norm(&a.add(&b)) <= 1e-12);
    }

    #[test]
    fn flow_is_monotone(d in trig_driver(), s in -20.0..20.0f64, t in 0.5..10.0f64, seed in any::<u64>(), a1 in 0.0..4.0f64, a2 in 0.0..4.0f64) {
        let spec = ProblemSpec::desk(d).unwrap();
        let base = nonneg_state(&spec.basis, seed, a1);
        let lower = base.scaled(-0.5);
        let upper = base.add(&nonneg_state(&spec.basis, seed ^ 0x9e37, a2));
        let p = BasePoint::new(s);
        let ul = evolve(&spec, p, &lower, t).unwrap();
        let uu = evolve(&spec, p, &upper, t).unwrap();
        prop_assert!(grid_excess(&spec.basis, &ul, &uu) <= 1e-8);
    }

    #[test]
    fn linear_flow_dominates(d in trig_driver(), s in -20.0..20.0f64, t in 0.5..10.0f64, seed in any::<u64>(), amp in 0.0..6.0f64) {
        let spec = ProblemSpec::desk(d).unwrap();
        let z = nonneg_state(&spec.basis, seed, amp);
        let p = BasePoint::new(s);
        let u = evolve(&spec, p, &z, t).unwrap();
        let l = linear_propagate(&spec, p, &z, t).unwrap();
        prop_assert!(grid_excess(&spec.basis, &u, &l) <= 1e-8);
        prop_assert!(grid_excess(&spec.basis, &State::zeros(spec.n()), &u) <= 1e-8);
    }

    #[test]
    fn flow_is_sublinear(d in trig_driver(), s in -20.0..20.0f64, t in 0.5..10.0f64, seed in any::<u64>(), amp in 0.0..4.0f64, lambda in 1.0..4.0f64) {
        let spec = ProblemSpec::desk(d).unwrap();
        let z = nonneg_state(&spec.basis, seed, amp);
        let p = BasePoint::new(s);
        let big = evolve(&spec, p, &z.scaled(lambda), t).unwrap();
        let small = evolve(&spec, p, &z, t).unwrap().scaled(lambda);
        prop_assert!(grid_excess(&spec.basis, &big, &small) <= 1e-8);
    }

    #[test]
    fn linear_propagation_is_the_closed_form(d in any_driver(), s in -50.0..50.0f64, t in 0.0..100.0f64, c in prop::collection::vec(-2.0..2.0f64, 8)) {
        let spec = ProblemSpec::desk(d.clone()).unwrap();
        let z = signed_state(spec.n(), &c);
        let p = BasePoint::new(s);
        let u = linear_propagate(&spec, p, &z, t).unwrap();
        let di = d.primitive(s + t) - d.primitive(s);
        for (k, ck) in c.iter().enumerate() {
            // Dirichlet: mode k is sin((k+1)x), rate 1 - (k+1)²
            let m = (k + 1) as f64;
            let want = ck * ((1.0 - m * m) * t + di).exp();
            prop_assert!((u.coeffs[k] - want).abs() <= 1e-10 * want.abs().max(1e-300), "mode {k}: {} vs {want}", u.coeffs[k]);
        }
    }

    #[test]
    fn bounded_primitive_has_null_exponent(d in trig_driver(), s in -100.0..100.0f64) {
        let spec = ProblemSpec::desk(d.clone()).unwrap();
        // sup |I| over the orbit, from the term-wise bound |I_j| ≤ 2|a_j|/ω_j
        let sup_i: f64 = d.terms.iter().map(|t| 2.0 * t.amplitude.abs() / t.frequency).sum();
        let l = lyapunov_estimate(&spec, BasePoint::new(s), 1000.0).unwrap();
        prop_assert!(l.abs() <= 2.0 * sup_i / 1000.0);
    }

    #[test]
    fn nonlinearity_conditions(r0 in 0.1..3.0f64, kappa in 0.1..3.0f64, y in -10.0..10.0f64, lambda in 1.0001..5.0f64) {
        let nl = Nonlinearity::new(r0, kappa);
        let gy = g_eval(&nl, y);
        prop_assert!(y * gy <= 0.0);
        prop_assert_eq!(g_eval(&nl, -y), -gy);
        prop_assert_eq!(gy == 0.0, y.abs() <= r0);
        if y > r0 {
            prop_assert!(g_eval(&nl, lambda * y) < lambda * gy);
        }
        if y.abs() > 2.0 * r0 {
            prop_assert!(gy / y <= -kappa * (y.abs() - r0).powi(2) / y.abs() + 1e-12);
        }
    }

    #[test]
    fn positive_profiles_are_in_the_cone(seed in any::<u64>(), amp in 1e-3..10.0f64) {
        let spec = ProblemSpec::desk(Driver::zero()).unwrap();
        let z = nonneg_state(&spec.basis, seed, amp);
        prop_assert_eq!(cone_membership(&spec.basis, &z, 1e-9), Cone::StrictlyPositive);
        prop_assert_eq!(cone_membership(&spec.basis, &z.scaled(-1.0), 1e-9), Cone::StrictlyNegative);
    }
}

#[test]
fn nonlinearity_derivative_vanishes_at_zero() {
    let nl = Nonlinearity::new(1.0, 1.0);
    assert_eq!(g_eval(&nl, 0.0), 0.0);
    let h = 1e-6;
    assert_eq!((g_eval(&nl, h) - g_eval(&nl, -h)) / (2.0 * h), 0.0);
}
