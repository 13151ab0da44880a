use proptest::prelude::*;

use finsler_core::ad::jet2;
use finsler_core::causality::{finsler_distance, DistanceMethod, GridSpec};
use finsler_core::fermat::{
    classify_causal, h_alpha_jet, legendre_invert, legendre_map, optical_metrics, CausalKind, Orientation,
};
use finsler_core::geodesics::{fermat_geodesic_ivp, spacetime_geodesic_ivp, Branch, ShootOptions};
use finsler_core::killing::{isometry_flow_check, killing_residual, lie_derivative_components, VectorField};
use finsler_core::linalg::sym_eigen;
use finsler_core::tensor::{fundamental_tensor_at, signature_of};
use finsler_core::zoo::{catalog, load_default, load_zoo, params};
use finsler_core::{ConeKind, ConeSpec, Expr, OdeOptions, Sample, SamplingPlan, SpacetimeLagrangian};

fn entry(i: usize) -> SpacetimeLagrangian {
    let cat = catalog();
    load_default(cat[i % cat.len()].name).unwrap()
}

fn sample(l: &SpacetimeLagrangian, seed: u64) -> Sample {
    SamplingPlan::new(seed, 1).draw(l).pop().expect("admissible sample")
}

fn splitting_entry(i: usize) -> SpacetimeLagrangian {
    let names = ["flat_randers", "standard_stationary", "kerr_perturbation", "rutz", "randers_type", "static_warped", "twisted_oneform"];
    load_default(names[i % names.len()]).unwrap()
}

fn cone_kind() -> impl Strategy<Value = ConeKind> {
    prop_oneof![Just(ConeKind::UpperHalf), Just(ConeKind::LowerHalf), Just(ConeKind::FullSlit)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn jet2_hessian_is_symmetric(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0) {
        let j = jet2(|u| {
            let e = u[0].clone() * u[1].clone() * u[2].clone() + u[0].clone() * u[0].clone() * u[2].clone();
            Ok(e)
        }, &[a, b, c]).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                prop_assert_eq!(j.hessian(i, k), j.hessian(k, i));
            }
        }
    }

    #[test]
    fn in_cone_is_scale_free(kind in cone_kind(), w in prop::collection::vec(-3.0f64..3.0, 3), lam in 1e-3f64..1e3) {
        let cone = ConeSpec::new(kind);
        let scaled: Vec<f64> = w.iter().map(|c| lam * c).collect();
        prop_assert_eq!(cone.contains(&w), cone.contains(&scaled));
    }

    #[test]
    fn lagrangian_is_two_homogeneous(i in 0usize..10, seed in any::<u64>(), lam in 1e-3f64..10.0) {
        let l = entry(i);
        let s = sample(&l, seed);
        let lw: Vec<f64> = s.w.iter().map(|c| lam * c).collect();
        let a = l.eval_f64(&s.z, &s.w).unwrap();
        let b = l.eval_f64(&s.z, &lw).unwrap();
        prop_assert!((b - lam * lam * a).abs() <= 1e-9 * (1.0 + (lam * lam * a).abs()));
    }

    #[test]
    fn continuity_across_time_axis(i in 0usize..7, seed in any::<u64>(), tau in 0.2f64..3.0) {
        let l = splitting_entry(i);
        let s = sample(&l, seed);
        let lam = l.lambda_at(&s.z).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
            let mut w = vec![tau * l.y_field_sign];
            w.extend(s.w[1..].iter().map(|c| eps * c));
            let gap = (l.eval_f64(&s.z, &w).unwrap() + lam * tau * tau).abs();
            prop_assert!(gap <= prev + 1e-12);
            prev = gap;
        }
        prop_assert!(prev <= 1e-6 * (1.0 + lam * tau * tau));
    }

    #[test]
    fn reference_field_is_timelike(i in 0usize..10, seed in any::<u64>()) {
        let l = entry(i);
        let s = sample(&l, seed);
        let mut w = vec![0.0; l.n + 1];
        w[0] = l.y_field_sign;
        let val = l.eval_f64(&s.z, &w).unwrap();
        prop_assert!(val < 0.0);
        prop_assert!((val + l.lambda_at(&s.z).unwrap()).abs() <= 1e-12 * val.abs().max(1.0));
    }

    #[test]
    fn fundamental_tensor_is_zero_homogeneous_and_reconstructs_l(i in 0usize..10, seed in any::<u64>(), lam in 1e-2f64..10.0) {
        let l = entry(i);
        let s = sample(&l, seed);
        let g = fundamental_tensor_at(&l, &s.z, &s.w).unwrap();
        let lw: Vec<f64> = s.w.iter().map(|c| lam * c).collect();
        let gl = fundamental_tensor_at(&l, &s.z, &lw).unwrap();
        prop_assert!(g.max_abs_diff(&gl) <= 1e-9 * g.max_abs().max(1.0));
        let lv = l.eval_f64(&s.z, &s.w).unwrap();
        prop_assert!((g.apply(&s.w, &s.w) - lv).abs() <= 1e-8 * (1.0 + lv.abs()));
    }

    #[test]
    fn contraction_identity(i in 0usize..10, seed in any::<u64>(), a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let l = entry(i);
        let s = sample(&l, seed);
        let comps: Vec<String> = (0..=l.n).map(|k| format!("{a} * x1 + {b} * t + {}", 0.1 * k as f64)).collect();
        let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
        let k = VectorField::parse("k", &refs).unwrap();
        let lie = lie_derivative_components(&k, &l, &s.z, &s.w).unwrap();
        let lift = finsler_core::killing::complete_lift_apply(&k, &l, &s.z, &s.w).unwrap();
        prop_assert!((lie.apply(&s.w, &s.w) - lift).abs() <= 1e-8 * l.scale(&s.z, &s.w));
    }

    #[test]
    fn optical_identities(i in 0usize..7, seed in any::<u64>()) {
        let l = splitting_entry(i);
        let pair = optical_metrics(&l).unwrap();
        for (z, v) in SamplingPlan::new(seed, 4).draw_space(&l) {
            let x = &z[1..];
            prop_assert!(pair.pair_identity_residual(x, &v).unwrap() <= 1e-10);
            prop_assert!(pair.lightlike_residual(x, &v).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn f_b_triangle_inequality(i in 0usize..7, seed in any::<u64>(), u in prop::collection::vec(-2.0f64..2.0, 3), v in prop::collection::vec(-2.0f64..2.0, 3)) {
        let l = splitting_entry(i);
        let n = l.n;
        let (u, v) = (&u[..n], &v[..n]);
        let s = sample(&l, seed);
        let x = &s.z[1..];
        let pair = optical_metrics(&l).unwrap();
        let sum: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + b).collect();
        let plan = SamplingPlan::new(0, 1);
        prop_assume!(plan.fiber_ok(&l, &s.z, u) && plan.fiber_ok(&l, &s.z, v) && plan.fiber_ok(&l, &s.z, &sum));
        let f = |w: &[f64]| pair.f_b.at(x, w).unwrap();
        prop_assert!(f(&sum) <= f(u) + f(v) + 1e-9);
    }

    #[test]
    fn upper_half_orientation(seed in any::<u64>(), w in prop::collection::vec(-2.0f64..2.0, 3)) {
        let l = load_default("randers_type").unwrap();
        let pair = optical_metrics(&l).unwrap();
        let s = sample(&l, seed);
        let c = classify_causal(&pair, &s.z, &w).unwrap();
        prop_assert!(c.orientation != Orientation::Past);
    }

    #[test]
    fn legendre_roundtrip(seed in any::<u64>(), alpha in -2.0f64..0.0, v in prop::collection::vec(-2.0f64..2.0, 2)) {
        let l = load_default("randers_type").unwrap();
        let s = sample(&l, seed);
        prop_assume!(v.iter().map(|c| c * c).sum::<f64>() > 1e-4);
        let x = &s.z[1..];
        let p = legendre_map(&l, alpha, x, &v).unwrap();
        let inv = legendre_invert(&l, alpha, x, &p).unwrap();
        let err: f64 = inv.v.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-9 * v.iter().map(|c| c.abs()).fold(0.0, f64::max));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn causal_character_persists(tau in 0.5f64..3.0, v1 in -1.0f64..1.0, v2 in -1.0f64..1.0) {
        prop_assume!(v1 * v1 + v2 * v2 > 0.05);
        let l = load_default("standard_stationary").unwrap();
        let t = spacetime_geodesic_ivp(&l, &[0.0, 0.1, 0.2], &[tau, v1, v2], 10.0, &[], &OdeOptions::default()).unwrap();
        let e0 = t.energy_trace[0];
        prop_assume!(e0.abs() > 1e-6);
        prop_assert!(t.energy_trace.iter().all(|e| e.signum() == e0.signum()));
    }

    #[test]
    fn affine_reparametrization(lam in 0.3f64..3.0) {
        let l = load_default("randers_type").unwrap();
        let w0 = [1.5, 0.5, 0.3];
        let s_end = 6.0;
        let checks: Vec<f64> = (1..=6).map(|k| k as f64).collect();
        let base = spacetime_geodesic_ivp(&l, &[0.0, 0.2, 0.1], &w0, s_end, &checks, &OdeOptions::default()).unwrap();
        let scaled_w: Vec<f64> = w0.iter().map(|c| lam * c).collect();
        let scaled_checks: Vec<f64> = checks.iter().map(|s| s / lam).collect();
        let scaled = spacetime_geodesic_ivp(&l, &[0.0, 0.2, 0.1], &scaled_w, s_end / lam, &scaled_checks, &OdeOptions::default()).unwrap();
        for (s, sl) in checks.iter().zip(&scaled_checks) {
            let a = &base.z[base.index_of(*s).unwrap()];
            let b = &scaled.z[scaled.index_of(*sl).unwrap()];
            let gap = a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            prop_assert!(gap <= 1e-8, "gap {gap}");
        }
    }

    #[test]
    fn fermat_hessian_stays_positive(v1 in -1.0f64..1.0, v2 in -1.0f64..1.0) {
        prop_assume!(v1 * v1 + v2 * v2 > 0.05);
        let l = load_default("randers_type").unwrap();
        let c = -1.0;
        let t = fermat_geodesic_ivp(&l, c, Branch::Future, &[0.2, 0.1], &[v1, v2], 0.0, 5.0, &[], &OdeOptions::default()).unwrap();
        for (x, v) in t.x.iter().zip(&t.v) {
            let h = h_alpha_jet(&l, c, x, v).unwrap().hessian_matrix();
            prop_assert!(sym_eigen(&h).0[0] > 0.0);
        }
    }

    #[test]
    fn asymmetric_triangle_inequality(
        a in prop::collection::vec(-0.8f64..0.8, 2),
        b in prop::collection::vec(-0.8f64..0.8, 2),
        c in prop::collection::vec(-0.8f64..0.8, 2),
    ) {
        let pair = optical_metrics(&load_default("randers_type").unwrap()).unwrap();
        let grid = DistanceMethod::Grid(GridSpec::new(vec![(-1.0, 1.0), (-1.0, 1.0)], 61));
        let shoot = DistanceMethod::Shooting(ShootOptions::default());
        for (m, tol) in [(&grid, 1e-9), (&shoot, 1e-6)] {
            let d = |p: &[f64], q: &[f64]| finsler_distance(&pair.f_b, p, q, m).unwrap();
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + tol);
        }
    }

    #[test]
    fn slice_points_are_causally_future(t in 0.1f64..2.0, x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let l = load_default("flat_randers").unwrap();
        let pair = optical_metrics(&l).unwrap();
        let inside = pair.f_b.at(&[0.0, 0.0], &[x, y]).unwrap() < t - 1e-9;
        prop_assume!(inside && x * x + y * y > 1e-6);
        let c = classify_causal(&pair, &[0.0, 0.0, 0.0], &[t, x, y]).unwrap();
        prop_assert_eq!(c.kind, CausalKind::Timelike);
        prop_assert_eq!(c.orientation, Orientation::Future);
    }
}

#[test]
fn bogoslovsky_degenerates_at_u() {
    let l = load_default("bogoslovsky").unwrap();
    match fundamental_tensor_at(&l, &[0.0; 3], &[1.0, 1.0, 0.0]) {
        Ok(g) => assert!(signature_of(&g, 1e-8).n_zero >= 1),
        Err(_) => {}
    }
}

#[test]
fn killing_verdict_matches_lie_derivative() {
    let mut entries: Vec<SpacetimeLagrangian> = catalog().iter().map(|e| load_default(e.name).unwrap()).collect();
    let cone = ConeSpec::new(ConeKind::FullSlit);
    let (t, tau, y1, y2) = (Expr::t(), Expr::tau(), Expr::y(0), Expr::y(1));
    let flat = -tau.clone().square() + tau.clone() * y1.clone() + y1.clone().square() + y2.clone().square();
    entries.push(SpacetimeLagrangian::general("b_drift", 2, flat.clone() + 0.2 * t.clone() * tau.clone() * y2.clone(), cone));
    entries.push(SpacetimeLagrangian::general("f_drift", 2, flat.clone() + 0.1 * t.clone().sin() * y2.clone().square(), cone));
    entries.push(SpacetimeLagrangian::general("lambda_drift", 2, flat - 0.3 * t.exp() * tau.square(), cone));
    for l in &entries {
        let k = VectorField::dt(l.n);
        let plan = SamplingPlan::new(5, 60);
        let verdict = killing_residual(&k, l, &plan).unwrap().killing;
        let lie_zero = plan.draw(l).iter().all(|s| {
            let lie = lie_derivative_components(&k, l, &s.z, &s.w).unwrap();
            lie.max_abs() <= 1e-10 * l.scale(&s.z, &s.w)
        });
        assert_eq!(verdict, lie_zero, "{}", l.name);
    }
}

#[test]
fn killing_flow_has_no_secular_drift() {
    let opts = OdeOptions::default();
    for (name, z, w) in [
        ("flat_randers", vec![0.0, 0.1, 0.2], vec![1.0, 1.0, 0.3]),
        ("standard_stationary", vec![0.0, 0.3, -0.2], vec![2.0, 0.5, 0.1]),
        ("kerr_perturbation", vec![0.0, 5.0, 1.2, 0.4], vec![1.0, 0.3, -0.2, 0.1]),
    ] {
        let l = load_default(name).unwrap();
        let rep = isometry_flow_check(&VectorField::dt(l.n), &l, &z, &w, 20.0, 10, &opts).unwrap();
        assert!(rep.max_deviation <= 10.0 * opts.rtol, "{name}: {}", rep.max_deviation);
    }
}

/// At a corner of a broken extremal the covectors `∂_yH` on both sides agree;
/// inverting the Legendre map on each side must then return the same velocity.
#[test]
fn broken_extremal_corner_forces_smoothness() {
    let l = load_zoo("flat_randers", &params(&[("n", 3.0)])).unwrap();
    let cases = [(-0.7, [0.4, -0.3, 0.8]), (-1.5, [1.0, 0.2, -0.1])];
    for (alpha, v_minus) in cases {
        let x = [0.1, 0.2, -0.3];
        let p_minus = legendre_map(&l, alpha, &x, &v_minus).unwrap();
        let v_plus = legendre_invert(&l, alpha, &x, &p_minus).unwrap();
        assert!(v_plus.global_bijectivity);
        for (a, b) in v_plus.v.iter().zip(&v_minus) {
            assert!((a - b).abs() < 1e-12);
        }
        // A genuine corner gives distinct covectors.
        let kinked = [v_minus[0] + 0.2, v_minus[1], v_minus[2] - 0.1];
        let p_plus = legendre_map(&l, alpha, &x, &kinked).unwrap();
        let gap = p_plus.iter().zip(&p_minus).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap > 1e-3);
    }
    let l = load_default("randers_type").unwrap();
    let geo = fermat_geodesic_ivp(&l, -1.0, Branch::Future, &[0.2, 0.1], &[0.6, 0.3], 0.0, 3.0, &[1.5], &OdeOptions::default()).unwrap();
    let i = geo.index_of(1.5).unwrap();
    let p = legendre_map(&l, -1.0, &geo.x[i], &geo.v[i]).unwrap();
    let back = legendre_invert(&l, -1.0, &geo.x[i], &p).unwrap();
    for (a, b) in back.v.iter().zip(&geo.v[i]) {
        assert!((a - b).abs() < 1e-9);
    }
}
