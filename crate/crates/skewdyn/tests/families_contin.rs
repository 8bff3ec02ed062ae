use proptest::prelude::*;
use skewdyn::contin::*;
use skewdyn::critpost::{critical_locus, find_saddles, SaddleOrbit};
use skewdyn::engine::{default_escape, escape_over_points, TAIL_LEN};
use skewdyn::families::*;
use skewdyn::poly::{c, parse_poly1, Poly1, C64};
use skewdyn::sets::{augment_with_cycles, sample_base_julia};

fn cplx(r: f64) -> impl Strategy<Value = C64> {
    (-r..r, -r..r).prop_map(|(a, b)| c(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fa_maps_curves_to_curves(a in cplx(2.5), t in 0.0..std::f64::consts::TAU, x in cplx(2.0)) {
        let f = make_fa(a);
        let u = C64::from_polar(1.0, t);
        let (z1, w1) = f.eval(u * u, x * u);
        let gx = g_a(a).eval(x);
        prop_assert!((z1 - u.powu(4)).norm() < 1e-12);
        prop_assert!((w1 - gx * u * u).norm() < 1e-12 * (1.0 + gx.norm()));
    }

    #[test]
    fn fa_vertical_derivative_matches_g(a in cplx(2.5), t in 0.0..std::f64::consts::TAU, x in cplx(2.0)) {
        let f = make_fa(a);
        let u = C64::from_polar(1.0, t);
        let dq = f.fiber_poly(u * u).derivative().eval(x * u);
        let dg = g_a(a).derivative().eval(x);
        prop_assert!((dq.norm() - dg.norm()).abs() < 1e-12 * (1.0 + dg.norm()));
    }

    #[test]
    fn phi_semiconjugates_h_to_f(a in cplx(2.0), z in cplx(1.5), w in cplx(1.5)) {
        let (hz, hw) = make_ha(a).eval(z, w);
        let lhs = phi(hz, hw);
        let (pz, pw) = phi(z, w);
        let rhs = make_fa(a).eval(pz, pw);
        prop_assert!((lhs.0 - rhs.0).norm() < 1e-12 * (1.0 + rhs.0.norm()));
        prop_assert!((lhs.1 - rhs.1).norm() < 1e-12 * (1.0 + rhs.1.norm()));
    }
}

#[test]
fn superattracting_parameters_descend_toward_minus_two() {
    let cs: Vec<f64> = (2..=7).map(|n| solve_superattracting_param(n).unwrap()).collect();
    for w in cs.windows(2) {
        assert!(w[1] < w[0], "{cs:?}");
    }
    assert!(cs.iter().all(|&x| x > -2.0));
    // critical point has exact period n
    for (k, &cc) in cs.iter().enumerate() {
        let n = k + 2;
        let mut x = 0.0f64;
        for m in 1..=n {
            x = x * x + cc;
            assert_eq!(x.abs() < 1e-8, m == n, "n={n} m={m}");
        }
    }
    assert!(solve_superattracting_param(1).is_err());
}

#[test]
fn airplane_locus_has_a_mixed_component() {
    let f = make_airplane_skew(3).unwrap();
    // the fixed point beta carries an escaping critical orbit, so include the cycles
    let base = augment_with_cycles(&f.p, &sample_base_julia(&f.p, 300, 7).unwrap(), 1, 40).unwrap();
    let params = escape_over_points(&f, &base.firsts());
    let locus = critical_locus(&f, &base, None, &params, TAIL_LEN);
    assert_eq!(locus.component_count(), 1);
    assert_eq!(locus.mixed_components(), vec![0]);
    let g = make_fa(c(-1.0, 0.0));
    let base = sample_base_julia(&g.p, 300, 7).unwrap();
    let locus = critical_locus(&g, &base, None, &default_escape(&g), TAIL_LEN);
    assert!(locus.mixed_components().is_empty());
}

#[test]
fn s1s2_escape_ring_by_sampling() {
    let (f, k) = build_s1s2(&parse_poly1("w^2").unwrap(), &parse_poly1("w^2-1").unwrap(), 1, 1, 7).unwrap();
    assert!(f.check_regular().regular);
    let jp = sample_base_julia(&f.p, 400, 7).unwrap();
    for z in jp.firsts() {
        for j in 0..64 {
            let w = C64::from_polar(3.0 * k.m, std::f64::consts::TAU * j as f64 / 64.0);
            assert!(f.q.eval(z, w).norm() > 2.0 * w.norm());
        }
    }
}

#[test]
fn product_requires_matching_degrees() {
    let p = Poly1::from_real(&[0.0, 0.0, 1.0]);
    assert!(make_product(&p, &Poly1::from_real(&[0.0, 0.0, 0.0, 1.0])).is_err());
    assert!(make_product(&p, &Poly1::from_real(&[-1.0, 0.0, 1.0])).is_ok());
}

fn fa_two_cycle_saddle(a: C64) -> SaddleOrbit {
    let f = make_fa(a);
    find_saddles(&f, 2, 1e-10)
        .saddles
        .into_iter()
        .filter(|s| s.base_period == 2)
        .min_by(|x, y| x.vertical_multiplier.norm().total_cmp(&y.vertical_multiplier.norm()))
        .unwrap()
}

#[test]
fn constant_path_stays_put() {
    let start = fa_two_cycle_saddle(c(-1.0, 0.0));
    let tr = continue_orbit(&ParamPath::constant(PathFamily::Fa, c(-1.0, 0.0), 5), &start, 1e-10).unwrap();
    assert_eq!(tr.outcome, Outcome::Completed);
    for s in &tr.steps {
        assert!((s.base_point - start.base_point).norm() < 1e-10);
        assert!((s.fiber_point - start.fiber_point).norm() < 1e-10);
    }
}

#[test]
fn subdivision_stable() {
    let start = fa_two_cycle_saddle(c(-1.0, 0.0));
    let run = |steps| {
        let tr = continue_orbit(&ParamPath::linear(PathFamily::Fa, c(-1.0, 0.0), c(-0.95, 0.02), steps), &start, 1e-12).unwrap();
        assert_eq!(tr.outcome, Outcome::Completed);
        *tr.last().unwrap()
    };
    let (a, b) = (run(20), run(40));
    assert!((a.base_point - b.base_point).norm() < 1e-8);
    assert!((a.fiber_point - b.fiber_point).norm() < 1e-8);
}

#[test]
fn completed_trace_matches_fresh_solve_in_product_family() {
    let p = Poly1::from_real(&[0.0, 0.0, 1.0]);
    let q = Poly1::from_real(&[0.0, 0.0, 1.0]);
    let fam = PathFamily::ProductShift { p: p.clone(), q: q.clone() };
    let f0 = fam.map_at(c(-0.1, 0.0)).unwrap();
    let start = find_saddles(&f0, 1, 1e-10).saddles.into_iter().next().unwrap();
    let target = c(-0.2, 0.1);
    let tr = continue_orbit(&ParamPath::linear(fam.clone(), c(-0.1, 0.0), target, 30), &start, 1e-12).unwrap();
    assert_eq!(tr.outcome, Outcome::Completed);
    let last = tr.last().unwrap();
    let fresh = find_saddles(&fam.map_at(target).unwrap(), 1, 1e-10);
    let best = fresh
        .saddles
        .iter()
        .map(|s| (s.base_point - last.base_point).norm().max((s.fiber_point - last.fiber_point).norm()))
        .fold(f64::INFINITY, f64::min);
    assert!(best < 1e-6, "{best}");
}

#[test]
fn trace_csv_has_one_row_per_sample() {
    let start = fa_two_cycle_saddle(c(-1.0, 0.0));
    let tr = continue_orbit(&ParamPath::linear(PathFamily::Fa, c(-1.0, 0.0), c(-1.02, 0.0), 7), &start, 1e-10).unwrap();
    let csv = tr.to_csv();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 1 + 8);
    assert!(rows[1..].iter().all(|r| r.split(',').count() == 9));
    let j = tr.to_json();
    assert_eq!(j["outcome"]["status"], "Completed");
    assert_eq!(j["records"].as_u64(), Some(8));
}

#[test]
fn crossing_into_neutral_multiplier_is_lost() {
    let start = fa_two_cycle_saddle(c(-1.0, 0.0));
    let tr = continue_orbit(&ParamPath::linear(PathFamily::Fa, c(-1.0, 0.0), c(-2.0, 0.0), 40), &start, 1e-10).unwrap();
    match tr.outcome {
        Outcome::Lost { reason, lambda, .. } => {
            assert_eq!(reason, LostReason::MultiplierCrossing);
            assert!((lambda.re + 1.25).abs() < 0.03 && lambda.im.abs() < 1e-12, "{lambda}");
        }
        Outcome::Completed => panic!("expected loss"),
    }
    let v = tr.last().unwrap().vertical_multiplier.norm();
    assert!(v < 1.0);
}

#[test]
fn monodromy_needs_a_power_base() {
    let f = make_airplane_skew(3).unwrap();
    assert!(monodromy_degree(&f, 2, 1).is_err());
}
