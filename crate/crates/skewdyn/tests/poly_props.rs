use proptest::prelude::*;
use skewdyn::poly::*;

fn cplx(r: f64) -> impl Strategy<Value = C64> {
    (-r..r, -r..r).prop_map(|(a, b)| c(a, b))
}

/// Roots at least `sep` apart inside the square of half-side 2.
fn separated_roots(max: usize, sep: f64) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(cplx(2.0), 2..=max).prop_map(move |rs| {
        let mut kept: Vec<C64> = Vec::new();
        for r in rs {
            if kept.iter().all(|k| (k - r).norm() >= sep) {
                kept.push(r);
            }
        }
        kept
    })
}

/// Regular degree-2 skew product with random lower-order terms.
fn regular_quadratic() -> impl Strategy<Value = SkewProduct> {
    (cplx(1.0), cplx(1.0), cplx(1.0), cplx(1.0), cplx(1.0), (0.5f64..2.0)).prop_map(|(p0, q10, q01, q11, q20, lead)| {
        let p = Poly1::new(vec![p0, c(0.0, 0.0), c(1.0, 0.0)]);
        let q = Poly2::from_terms(&[(0, 2, c(lead, 0.0)), (1, 0, q10), (0, 1, q01), (1, 1, q11), (2, 0, q20)]);
        SkewProduct::from_parts(p, q)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roots_recover_their_polynomial(rs in separated_roots(8, 0.2), lead in cplx(2.0)) {
        prop_assume!(rs.len() >= 2 && lead.norm() > 0.1);
        let p = Poly1::from_roots(&rs).scale(lead);
        let found = roots(&p, ROOT_TOL).unwrap();
        prop_assert_eq!(found.len(), rs.len());
        for r in &rs {
            let best = found.iter().map(|f| (f - r).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-8, "root {} missed by {}", r, best);
        }
        let rebuilt = Poly1::from_roots(&found).scale(lead);
        prop_assert!(rebuilt.dist_max(&p) < 1e-8 * (1.0 + p.norm_max()));
    }

    #[test]
    fn aberth_and_companion_agree(rs in separated_roots(7, 0.2)) {
        prop_assume!(rs.len() >= 2);
        let p = Poly1::from_roots(&rs);
        let a = roots(&p, ROOT_TOL).unwrap();
        let b = roots_companion(&p).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for x in &a {
            let best = b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-6);
        }
    }

    #[test]
    fn composed_fiber_matches_pointwise(f in regular_quadratic(), z in cplx(1.0), w in cplx(1.0), n in 1usize..5) {
        let qn = f.compose_fiber(z, n, COMPOSE_CAP).unwrap();
        prop_assert_eq!(qn.degree(), 1 << n);
        let (_, wn, dn) = fiber_iterate_d(&f, z, w, n);
        let (v, dv) = qn.eval_d(w);
        let scale = 1.0 + wn.norm();
        prop_assert!((v - wn).norm() < 1e-9 * scale, "{} vs {}", v, wn);
        prop_assert!((dv - dn).norm() < 1e-8 * (1.0 + dn.norm()));
    }

    #[test]
    fn compose_is_evaluation_of_composite(a in prop::collection::vec(cplx(1.0), 2..5), b in prop::collection::vec(cplx(1.0), 2..5), x in cplx(1.5)) {
        let (pa, pb) = (Poly1::new(a), Poly1::new(b));
        let lhs = pa.compose(&pb).eval(x);
        let rhs = pa.eval(pb.eval(x));
        prop_assert!((lhs - rhs).norm() < 1e-9 * (1.0 + rhs.norm()));
    }

    #[test]
    fn regularity_survives_rescaling_and_lower_terms(f in regular_quadratic(), s in 0.2f64..5.0, extra in cplx(1.0)) {
        prop_assert!(f.check_regular().regular);
        // scaling q and adding lower-order mixed terms keeps the w^2 coefficient constant
        let q = Poly2::from_terms(&f.q.terms().map(|(i, j, v)| (i, j, v * s)).chain([(1, 1, extra)]).collect::<Vec<_>>());
        let g = SkewProduct::from_parts(f.p.clone(), q);
        prop_assert!(g.check_regular().regular);
        // a z w^2 term makes the top coefficient depend on z
        let q = Poly2::from_terms(&f.q.terms().chain([(1, 2, c(1.0, 0.0))]).collect::<Vec<_>>());
        let bad = SkewProduct::from_parts(f.p.clone(), q);
        prop_assert!(!bad.check_regular().regular);
    }

    #[test]
    fn map_text_round_trips(f in regular_quadratic()) {
        let back = SkewProduct::from_text(&f.to_text()).unwrap();
        prop_assert_eq!(back.degree, f.degree);
        for (z, w) in [(c(0.3, -0.2), c(0.1, 0.7)), (c(-1.0, 0.5), c(1.2, 0.0))] {
            let (a, b) = (f.eval(z, w), back.eval(z, w));
            prop_assert!((a.0 - b.0).norm() < 1e-12 && (a.1 - b.1).norm() < 1e-12);
        }
    }

    #[test]
    fn iterate_derivative_matches_difference_quotient(a in cplx(1.0), z in cplx(1.0), n in 1usize..4) {
        let p = Poly1::new(vec![a, c(0.0, 0.0), c(1.0, 0.0)]);
        let h = 1e-6;
        let (v, d) = iterate_d(&p, z, n);
        let (vh, _) = iterate_d(&p, z + h, n);
        prop_assert!(((vh - v) / h - d).norm() < 1e-3 * (1.0 + d.norm()));
    }
}

#[test]
fn compose_cap_is_enforced() {
    let f = SkewProduct::from_parts(Poly1::from_real(&[0.0, 0.0, 1.0]), Poly2::from_terms(&[(0, 2, c(1.0, 0.0))]));
    assert!(f.compose_fiber(c(0.5, 0.0), 12, COMPOSE_CAP).is_ok());
    assert!(f.compose_fiber(c(0.5, 0.0), 13, COMPOSE_CAP).is_err());
    assert!(f.compose_fiber(c(0.5, 0.0), 0, COMPOSE_CAP).is_err());
}

#[test]
fn irregular_maps_are_rejected() {
    let p = Poly1::from_real(&[0.0, 0.0, 1.0]);
    let cubic_fiber = Poly2::from_terms(&[(0, 3, c(1.0, 0.0))]);
    assert!(SkewProduct::new(p.clone(), cubic_fiber).is_err());
    let linear = Poly1::from_real(&[0.0, 1.0]);
    assert!(SkewProduct::new(linear, Poly2::from_terms(&[(0, 1, c(1.0, 0.0))])).is_err());
    assert!(SkewProduct::new(p, Poly2::from_terms(&[(0, 2, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))])).is_ok());
}

#[test]
fn garbage_text_is_a_parse_error() {
    assert!(parse_poly1("z^^2").is_err());
    assert!(SkewProduct::from_text("nonsense").is_err());
}
