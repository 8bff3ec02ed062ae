use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skewdyn::engine::*;
use skewdyn::families::{g_a, make_fa, make_product};
use skewdyn::poly::{c, Poly1, C64};
use skewdyn::sets::*;

fn cplx(r: f64) -> impl Strategy<Value = C64> {
    (-r..r, -r..r).prop_map(|(a, b)| c(a, b))
}

fn cloud(n: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec((cplx(2.0), cplx(2.0)), 1..n).prop_map(|v| PointCloud::new2(v.into_iter().map(|(a, b)| [a, b]).collect(), Tag::Custom("t".into())))
}

#[test]
fn escape_radius_doubles_on_the_circle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for a in [c(-1.0, 0.0), c(0.1, 0.0), c(2.0, 0.0), c(0.0, 1.0)] {
        let f = make_fa(a);
        let params = default_escape(&f);
        let win = params.base_window;
        for _ in 0..100_000 {
            let z = c(rng.gen_range(win.re_min..win.re_max), rng.gen_range(win.im_min..win.im_max));
            let w = C64::from_polar(params.radius, rng.gen::<f64>() * std::f64::consts::TAU);
            let img = f.q.eval(z, w);
            assert!(img.norm() >= 2.0 * w.norm(), "a={a} z={z} w={w}");
        }
    }
}

#[test]
fn chordal_triangle_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pick = |rng: &mut ChaCha8Rng| {
        let r = 10f64.powf(rng.gen_range(-3.0..3.0));
        if rng.gen::<f64>() < 0.02 {
            Sphere::Infinity
        } else {
            Sphere::Finite(C64::from_polar(r, rng.gen::<f64>() * std::f64::consts::TAU))
        }
    };
    for _ in 0..10_000 {
        let (a, b, x) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let ab = chordal_distance(a, b);
        assert!(ab <= chordal_distance(a, x) + chordal_distance(x, b) + 1e-12);
        assert!((ab - chordal_distance(b, a)).abs() < 1e-15);
        assert!((0.0..=2.0 + 1e-15).contains(&ab));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn classification_ignores_tail_length(a in cplx(1.2), z in cplx(1.0), w in cplx(2.0), t1 in 0usize..100, t2 in 0usize..100) {
        let f = make_fa(a);
        let params = default_escape(&f).with_max_iter(300);
        let r1 = classify_orbit(&f, [z, w], &params, t1);
        let r2 = classify_orbit(&f, [z, w], &params, t2);
        prop_assert_eq!(r1.status, r2.status);
        let again = classify_orbit(&f, [z, w], &params, t1);
        prop_assert_eq!(r1, again);
    }

    #[test]
    fn hausdorff_symmetric_and_triangular(a in cloud(40), b in cloud(40), x in cloud(40)) {
        let ab = hausdorff_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, hausdorff_distance(&b, &a).unwrap());
        let via = hausdorff_distance(&a, &x).unwrap() + hausdorff_distance(&x, &b).unwrap();
        prop_assert!(ab <= via + 1e-12);
        prop_assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        prop_assert!(directed_hausdorff(&a, &b).unwrap() <= ab);
    }

    #[test]
    fn chordal_is_a_metric_on_pairs(a in cplx(50.0), b in cplx(50.0)) {
        let d = chordal(a, b);
        prop_assert!((0.0..=2.0).contains(&d));
        prop_assert!((d - chordal(b, a)).abs() < 1e-15);
        prop_assert_eq!(chordal(a, a), 0.0);
        // inversion is a chordal isometry
        prop_assume!(a.norm() > 1e-3 && b.norm() > 1e-3);
        prop_assert!((d - chordal(a.inv(), b.inv())).abs() < 1e-12);
    }
}

#[test]
fn contraction_slopes_are_negative() {
    // fiber over the fixed base point 1 is w^2 - 0.9, with an attracting 2-cycle
    let f = make_fa(c(-0.9, 0.0));
    let julia = sample_base_julia(&g_a(c(-0.9, 0.0)), 800, 3).unwrap().firsts();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut slopes = Vec::new();
    while slopes.len() < 24 {
        let w0 = c(rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15));
        let w1 = w0 + C64::from_polar(0.05, rng.gen::<f64>() * std::f64::consts::TAU);
        let Ok(d) = contraction_probe(&f, c(1.0, 0.0), (w0, w1), 30, &julia, 0.05) else { continue };
        slopes.push(fit_log_decay(&d).unwrap().1);
    }
    let n = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / n;
    let sd = (slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    // one-sided 95% bound, t(23) = 1.714
    assert!(mean + 1.714 * sd / n.sqrt() < 0.0, "mean slope {mean}, sd {sd}");
}

#[test]
fn probe_rejects_segments_touching_julia() {
    let f = make_fa(c(-1.0, 0.0));
    let julia = sample_base_julia(&g_a(c(-1.0, 0.0)), 200, 3).unwrap().firsts();
    let j = julia[0];
    assert!(contraction_probe(&f, c(1.0, 0.0), (j, j + 0.01), 5, &julia, 0.05).is_err());
}

#[test]
fn slices_stable_under_doubled_iterations() {
    for (f, z) in [(make_fa(c(-1.0, 0.0)), c(1.0, 0.0)), (make_fa(c(0.1, 0.0)), c(0.0, 1.0)), (make_fa(c(-1.0, 0.0)), c(-1.0, 0.0))] {
        let params = default_escape(&f);
        let win = engine_window(&params);
        let a = fiber_slice(&f, z, &win, (160, 160), &params);
        let b = fiber_slice(&f, z, &win, (160, 160), &params.with_max_iter(2 * MAX_ITER_GRID));
        let flips = a.bounded.iter().zip(&b.bounded).filter(|(x, y)| x != y).count();
        assert!((flips as f64) < 1e-3 * a.bounded.len() as f64, "{flips} flips over {z}");
    }
}

fn engine_window(p: &EscapeParams) -> Rect {
    Rect::square(c(0.0, 0.0), 1.2 * p.radius)
}

#[test]
fn escaping_critical_points_leave_no_interior() {
    // over z = 1 the fiber of F_2 is w^2 + 2: its critical orbit escapes and K is a Cantor set
    let f = make_fa(c(2.0, 0.0));
    let params = default_escape(&f);
    let s = fiber_slice(&f, c(1.0, 0.0), &engine_window(&params), (256, 256), &params);
    assert_eq!(s.interior_count(), 0);
    let prod = make_product(&Poly1::from_real(&[0.0, 0.0, 1.0]), &Poly1::from_real(&[1.0, 0.0, 1.0])).unwrap();
    let params = default_escape(&prod);
    let s = fiber_slice(&prod, c(0.3, 0.0), &engine_window(&params), (256, 256), &params);
    assert_eq!(s.interior_count(), 0);
}

#[test]
fn j2_samples_lie_over_the_base_sample() {
    let f = make_fa(c(-1.0, 0.0));
    let base = sample_base_julia(&f.p, 50, 5).unwrap();
    let j2 = assemble_j2(&f, &base, 16, 20, 10.0, 5).unwrap();
    assert_eq!(j2.len(), 50 * 16);
    for p in &j2.points {
        assert!((p[0].norm() - 1.0).abs() < 1e-9);
        // J_z of F_{-1} over |z| = 1 sits inside |w| <= 2
        assert!(p[1].norm() < 2.0);
    }
    let again = assemble_j2(&f, &base, 16, 20, 10.0, 5).unwrap();
    assert_eq!(j2.points, again.points);
}

#[test]
fn csv_round_trip_of_a_j2_cloud() {
    let f = make_fa(c(0.1, 0.0));
    let base = sample_base_julia(&f.p, 10, 6).unwrap();
    let j2 = assemble_j2(&f, &base, 4, 10, 10.0, 6).unwrap();
    let back = PointCloud::from_csv(&j2.to_csv(), Tag::J2).unwrap();
    assert_eq!(back.points, j2.points);
}
