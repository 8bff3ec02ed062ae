//! Constructors for the example families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::critpost::{hyperbolicity_1d, CritFate, DEFAULT_MARGIN};
use crate::engine::chordal;
use crate::error::{Error, Result};
use crate::poly::{c, parse_poly1, preimages, roots, Poly1, Poly2, SkewProduct, C64, ROOT_TOL};

/// `(p(z), q(w))`.
pub fn make_product(p: &Poly1, q: &Poly1) -> Result<SkewProduct> {
    if p.degree() < 2 || q.degree() < 2 {
        return Err(Error::Precondition("both factors need degree >= 2".into()));
    }
    if p.degree() != q.degree() {
        return Err(Error::Precondition(format!("degree mismatch: {} vs {}", p.degree(), q.degree())));
    }
    SkewProduct::new(p.clone(), Poly2::from_w(q))
}

/// `(z^2, w^2 + a z)`.
pub fn make_fa(a: C64) -> SkewProduct {
    SkewProduct::from_parts(Poly1::from_real(&[0.0, 0.0, 1.0]), Poly2::from_terms(&[(0, 2, c(1.0, 0.0)), (1, 0, a)]))
}

/// The one-variable polynomial `w^2 + a` governing `make_fa(a)`.
pub fn g_a(a: C64) -> Poly1 {
    Poly1::new(vec![a, c(0.0, 0.0), c(1.0, 0.0)])
}

/// `(z^2, w^2 + a)`.
pub fn make_ha(a: C64) -> SkewProduct {
    SkewProduct::from_parts(Poly1::from_real(&[0.0, 0.0, 1.0]), Poly2::from_w(&g_a(a)))
}

/// `(z, w) -> (z^2, z w)`.
pub fn phi(z: C64, w: C64) -> (C64, C64) {
    (z * z, z * w)
}

fn orbit_of_zero(cc: f64, n: usize) -> (f64, f64) {
    let (mut x, mut dx) = (cc, 1.0);
    for _ in 1..n {
        dx = 2.0 * x * dx + 1.0;
        x = x * x + cc;
    }
    (x, dx)
}

fn least_period_of_zero(cc: f64, n: usize) -> usize {
    let mut x = 0.0f64;
    for k in 1..=n {
        x = x * x + cc;
        if x.abs() < 1e-8 {
            return k;
        }
    }
    0
}

/// Real parameter `c` closest to `-2` whose critical point `0` has exact period `n`
/// under `w^2 + c`.
pub fn solve_superattracting_param(n: usize) -> Result<f64> {
    if !(2..=12).contains(&n) {
        return Err(Error::Precondition("period must lie in 2..=12".into()));
    }
    const SCAN: usize = 20_000;
    let (lo, hi) = (1e-12f64.ln(), 2.25f64.ln());
    let at = |k: usize| -2.0 + (lo + (hi - lo) * k as f64 / SCAN as f64).exp();
    let mut prev = (at(0), orbit_of_zero(at(0), n).0);
    for k in 1..=SCAN {
        let s = at(k);
        let v = orbit_of_zero(s, n).0;
        if prev.1 == 0.0 || prev.1.signum() != v.signum() {
            let (mut a, mut b) = (prev.0, s);
            let fa = prev.1;
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if orbit_of_zero(m, n).0.signum() == fa.signum() {
                    a = m;
                } else {
                    b = m;
                }
                if b - a < 1e-15 {
                    break;
                }
            }
            let mut x = 0.5 * (a + b);
            for _ in 0..20 {
                let (v, dv) = orbit_of_zero(x, n);
                if dv == 0.0 {
                    break;
                }
                let st = v / dv;
                if (x - st - x).abs() > (b - a).max(1e-12) {
                    break;
                }
                x -= st;
                if st.abs() < 1e-16 {
                    break;
                }
            }
            if least_period_of_zero(x, n) == n {
                return Ok(x);
            }
        }
        prev = (s, v);
    }
    Err(Error::Numerical(format!("no superattracting parameter of period {n} found")))
}

/// `(z^2 + c_n, w^2 + 2(2 - z))`.
pub fn make_airplane_skew(n: usize) -> Result<SkewProduct> {
    let cn = solve_superattracting_param(n)?;
    Ok(SkewProduct::from_parts(
        Poly1::from_real(&[cn, 0.0, 1.0]),
        Poly2::from_terms(&[(0, 2, c(1.0, 0.0)), (0, 0, c(4.0, 0.0)), (1, 0, c(-2.0, 0.0))]),
    ))
}

/// Repelling fixed point `beta` of the base polynomial `z^2 + c`, `c` real.
pub fn beta_of(p: &Poly1) -> C64 {
    let cc = p.coeff(0);
    (1.0 + (1.0 - 4.0 * cc).sqrt()) * 0.5
}

/// `(z^2 - 20, w^2 + z^2 - 0.9 z - 20.5)`.
pub fn make_fig3() -> SkewProduct {
    SkewProduct::from_parts(
        Poly1::from_real(&[-20.0, 0.0, 1.0]),
        Poly2::from_terms(&[(0, 2, c(1.0, 0.0)), (2, 0, c(1.0, 0.0)), (1, 0, c(-0.9, 0.0)), (0, 0, c(-20.5, 0.0))]),
    )
}

/// Constants found by [`build_s1s2`].
#[derive(Clone, Debug, PartialEq)]
pub struct S1S2Constants {
    pub m: f64,
    pub r: f64,
    pub big_r: f64,
    pub a: C64,
    pub xi: Vec<C64>,
    pub k1: usize,
    pub k2: usize,
    pub d: usize,
}

impl S1S2Constants {
    pub fn to_json(&self) -> Value {
        json!({
            "M": self.m,
            "r": self.r,
            "R": self.big_r,
            "a": [self.a.re, self.a.im],
            "xi": self.xi.iter().map(|x| [x.re, x.im]).collect::<Vec<_>>(),
            "k1": self.k1,
            "k2": self.k2,
            "d": self.d,
        })
    }

    /// Radius of the disks `D(+-R, .)` holding the zeros of the base polynomial.
    pub fn disk_radius(&self) -> f64 {
        self.r / 2.0
    }
}

pub const M_CAP: f64 = 1e6;
pub const R_FLOOR: f64 = 1e-6;
pub const A_CAP: f64 = 1e30;
const PULLBACK_GENERATIONS: usize = 8;
const CIRCLE_SAMPLES: usize = 256;
const ANNULUS_SEPARATION: f64 = 0.05;
const PERTURBATION_DRAWS: usize = 100;

/// Clause (ii) by coefficient bounds: `|t(w)| >= |w|^d / 2` for `|w| > M`
/// and every `t` within `1/8` of `s` (`2r <= 1/8`).
fn clause_ii(s: &Poly1, m: f64) -> bool {
    let d = s.degree();
    (0..d).map(|j| (s.coeff(j).norm() + 0.125) * m.powi(j as i32 - d as i32)).sum::<f64>() <= 0.375
}

/// Clause (iii) by coefficient bounds.
fn clause_iii(s: &Poly1, m: f64) -> bool {
    let d = s.degree();
    (0..=d).map(|j| s.coeff(j).norm() * m.powi(j as i32)).sum::<f64>() <= 1.5 * m.powi(d as i32)
}

/// Clause (iv): critical orbits of `s` avoid the annulus `M <= |w| <= 3M` and
/// stay away from pulled-back copies of its boundary circles.
pub fn annulus_clause(s: &Poly1, m: f64) -> Result<(bool, f64)> {
    let mut orbit_pts = Vec::new();
    for cp in roots(&s.derivative(), ROOT_TOL)? {
        let mut w = cp;
        for _ in 0..=8 {
            let a = w.norm();
            if a > 3.0 * m {
                break;
            }
            if a >= m {
                return Ok((false, 0.0));
            }
            orbit_pts.push(w);
            w = s.eval(w);
        }
    }
    let mut best = f64::INFINITY;
    for rad in [m, 2.0 * m, 3.0 * m] {
        let mut gen: Vec<C64> = (0..CIRCLE_SAMPLES).map(|k| C64::from_polar(rad, std::f64::consts::TAU * k as f64 / CIRCLE_SAMPLES as f64)).collect();
        for _ in 0..PULLBACK_GENERATIONS {
            let mut next = Vec::with_capacity(gen.len() * s.degree());
            for y in &gen {
                next.extend(preimages(s, *y)?);
            }
            for o in &orbit_pts {
                for y in &next {
                    best = best.min(chordal(*o, *y));
                }
            }
            gen = next;
        }
    }
    Ok((best >= ANNULUS_SEPARATION, best))
}

fn random_in_disk(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    let t: f64 = rng.gen::<f64>();
    let u: f64 = rng.gen::<f64>();
    C64::from_polar(radius * u.sqrt() * (1.0 - 1e-12), std::f64::consts::TAU * t)
}

/// Perturbations of size `< 2r` keep the hyperbolicity margin at least half.
fn robust_at(s: &Poly1, r: f64, base_margin: f64, rng: &mut ChaCha8Rng) -> Result<bool> {
    let d = s.degree();
    for _ in 0..PERTURBATION_DRAWS {
        let mut cs = s.coeffs().to_vec();
        for cj in cs.iter_mut().take(d) {
            *cj += random_in_disk(rng, 2.0 * r);
        }
        let h = hyperbolicity_1d(&Poly1::new(cs), DEFAULT_MARGIN)?;
        if !(h.margin >= 0.5 * base_margin) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Builds the two-piece skew product over a Cantor base joining `s1` and `s2`.
pub fn build_s1s2(s1: &Poly1, s2: &Poly1, k1: usize, k2: usize, seed: u64) -> Result<(SkewProduct, S1S2Constants)> {
    let d = k1 + k2;
    if k1 == 0 || k2 == 0 {
        return Err(Error::Precondition("k1 and k2 must be positive".into()));
    }
    for (name, s) in [("s1", s1), ("s2", s2)] {
        if s.degree() != d {
            return Err(Error::Precondition(format!("{name} has degree {}, expected k1 + k2 = {d}", s.degree())));
        }
        if (s.lead() - c(1.0, 0.0)).norm() > 1e-14 {
            return Err(Error::Precondition(format!("{name} is not monic")));
        }
        let h = hyperbolicity_1d(s, DEFAULT_MARGIN)?;
        if !h.pass {
            return Err(Error::Precondition(format!("{name} fails the hyperbolicity test (margin {:.3e})", h.margin)));
        }
    }
    let dd = d as i32;

    // M
    let mut m = 2.0f64;
    loop {
        let mut ok = m.powi(dd) / 18.0 > 2.0 * m;
        for s in [s1, s2] {
            ok = ok && clause_ii(s, m) && clause_iii(s, m);
            if ok {
                ok = annulus_clause(s, m)?.0;
            }
        }
        if ok {
            break;
        }
        m *= 2.0;
        if m > M_CAP {
            return Err(Error::Numerical("constant search: M exceeded its cap (clause on M)".into()));
        }
    }

    // r
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margins = [hyperbolicity_1d(s1, DEFAULT_MARGIN)?.margin, hyperbolicity_1d(s2, DEFAULT_MARGIN)?.margin];
    let mut r = 1.0 / 16.0;
    loop {
        if robust_at(s1, r, margins[0], &mut rng)? && robust_at(s2, r, margins[1], &mut rng)? {
            break;
        }
        r *= 0.5;
        if r < R_FLOOR {
            return Err(Error::Numerical("constant search: r fell below its floor (robustness clause)".into()));
        }
    }

    let big_r = 2.0 * m.powi(dd) - r;
    let mut xi = Vec::with_capacity(d);
    for j in 0..k1 {
        xi.push(c(big_r, 0.0) + C64::from_polar(r / 4.0, std::f64::consts::TAU * j as f64 / k1 as f64));
    }
    for j in 0..k2 {
        xi.push(c(-big_r, 0.0) + C64::from_polar(r / 4.0, std::f64::consts::TAU * j as f64 / k2 as f64));
    }
    let p0 = Poly1::from_roots(&xi);

    // a
    let mut a = 1.0f64;
    loop {
        let mut min_abs = f64::INFINITY;
        for centre in [big_r, -big_r] {
            for rad in [r / 2.0, r] {
                for k in 0..1000 {
                    let z = c(centre, 0.0) + C64::from_polar(rad, std::f64::consts::TAU * k as f64 / 1000.0);
                    min_abs = min_abs.min(a * p0.eval(z).norm());
                }
            }
        }
        if min_abs > 2.0 * big_r {
            break;
        }
        a *= 2.0;
        if a > A_CAP {
            return Err(Error::Numerical("constant search: a exceeded its cap (disk covering clause)".into()));
        }
    }
    let p = p0.scale(c(a, 0.0));

    let mut terms: Vec<(usize, usize, C64)> = vec![(0, d, c(1.0, 0.0))];
    for j in 0..d {
        let (t1, t2) = (s1.coeff(j), s2.coeff(j));
        terms.push((0, j, (t1 + t2) * 0.5));
        terms.push((1, j, (t1 - t2) / (2.0 * big_r)));
    }
    for (i, &pi) in p.coeffs().iter().enumerate() {
        terms.push((i, 0, pi));
    }
    terms.push((1, 0, c(-1.0, 0.0)));
    let f = SkewProduct::new(p, Poly2::from_terms(&terms))?;
    Ok((f, S1S2Constants { m, r, big_r, a: c(a, 0.0), xi, k1, k2, d }))
}

/// Whether a one-variable polynomial has an attracting cycle reached by a critical orbit.
pub fn has_attracting_cycle(s: &Poly1) -> Result<bool> {
    Ok(hyperbolicity_1d(s, DEFAULT_MARGIN)?.fates.iter().any(|f| matches!(f, CritFate::Attracted { .. })))
}

/// A named family with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilySpec {
    Fa { a: C64 },
    Airplane { n: usize },
    S1S2 { s1: String, s2: String, k1: usize, k2: usize, seed: u64 },
    Fig3,
    Product { p: String, q: String },
}

impl FamilySpec {
    pub fn build(&self) -> Result<SkewProduct> {
        Ok(match self {
            FamilySpec::Fa { a } => make_fa(*a),
            FamilySpec::Airplane { n } => make_airplane_skew(*n)?,
            FamilySpec::S1S2 { s1, s2, k1, k2, seed } => build_s1s2(&parse_poly1(s1)?, &parse_poly1(s2)?, *k1, *k2, *seed)?.0,
            FamilySpec::Fig3 => make_fig3(),
            FamilySpec::Product { p, q } => make_product(&parse_poly1(p)?, &parse_poly1(q)?)?,
        })
    }

    pub fn to_json(&self) -> Value {
        match self {
            FamilySpec::Fa { a } => json!({"family": "Fa", "a": [a.re, a.im]}),
            FamilySpec::Airplane { n } => json!({"family": "airplane", "n": n}),
            FamilySpec::S1S2 { s1, s2, k1, k2, seed } => json!({"family": "s1s2", "s1": s1, "s2": s2, "k1": k1, "k2": k2, "seed": seed}),
            FamilySpec::Fig3 => json!({"family": "fig3"}),
            FamilySpec::Product { p, q } => json!({"family": "product", "p": p, "q": q}),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn superattracting_small_periods() {
        assert!((solve_superattracting_param(2).unwrap() + 1.0).abs() < 1e-12);
        assert!((solve_superattracting_param(3).unwrap() + 1.754877666).abs() < 1e-8);
        let c4 = solve_superattracting_param(4).unwrap();
        assert!(c4 > -2.0 && c4 < -1.9);
    }

    #[test]
    fn fig3_fibers() {
        let f = make_fig3();
        assert!(f.fiber_poly(c(5.0, 0.0)).dist_max(&Poly1::from_real(&[0.0, 0.0, 1.0])) < 1e-12);
        assert!(f.fiber_poly(c(-4.0, 0.0)).dist_max(&Poly1::from_real(&[-0.9, 0.0, 1.0])) < 1e-12);
    }

    #[test]
    fn product_degree_mismatch() {
        assert!(make_product(&Poly1::from_real(&[0.0, 0.0, 1.0]), &Poly1::from_real(&[0.0, 0.0, 0.0, 1.0])).is_err());
    }
}
