//! Orbit iteration, escape radii, escape-time classification and the chordal metric.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::poly::{c, Poly1, SkewProduct, C64};

/// Default iteration cap for single-orbit classification.
pub const MAX_ITER_CLASSIFY: usize = 2000;
/// Default iteration cap for escape-time grids.
pub const MAX_ITER_GRID: usize = 200;
/// Default number of retained tail iterates.
pub const TAIL_LEN: usize = 64;

/// Points of `C^2` as `[z, w]`.
pub type Pt2 = [C64; 2];

/// Axis-aligned rectangle in `C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Rect { re_min, re_max, im_min, im_max }
    }

    /// Square of half-side `half` around `center`.
    pub fn square(center: C64, half: f64) -> Self {
        Rect::new(center.re - half, center.re + half, center.im - half, center.im + half)
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn is_valid(&self) -> bool {
        self.width() > 0.0 && self.height() > 0.0 && [self.re_min, self.re_max, self.im_min, self.im_max].iter().all(|x| x.is_finite())
    }

    pub fn contains(&self, x: C64) -> bool {
        x.re >= self.re_min && x.re <= self.re_max && x.im >= self.im_min && x.im <= self.im_max
    }

    pub fn corners(&self) -> [C64; 4] {
        [
            c(self.re_min, self.im_min),
            c(self.re_max, self.im_min),
            c(self.re_min, self.im_max),
            c(self.re_max, self.im_max),
        ]
    }

    /// Largest modulus attained on the rectangle.
    pub fn max_modulus(&self) -> f64 {
        self.corners().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `n x n` lattice including the edges.
    pub fn lattice(&self, n: usize) -> Vec<C64> {
        let n = n.max(2);
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let t = i as f64 / (n - 1) as f64;
                let s = j as f64 / (n - 1) as f64;
                out.push(c(self.re_min + t * self.width(), self.im_min + s * self.height()));
            }
        }
        out
    }
}

/// Per-coordinate escape radii and iteration cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeParams {
    /// Fiber radius: `|w| > radius` means escape while `z` stays in `base_window`.
    pub radius: f64,
    /// Base radius: `|z| > base_radius` means escape.
    pub base_radius: f64,
    pub max_iter: usize,
    pub base_window: Rect,
}

impl EscapeParams {
    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter.max(1);
        self
    }
}

fn leading_bound(lead: f64, rest: f64, d: usize) -> f64 {
    let a = (4.0 / lead).powf(1.0 / (d as f64 - 1.0));
    let b = 2.0 / lead * (1.0 + rest);
    2.0f64.max(a).max(b)
}

fn circle(n: usize, r: f64) -> impl Iterator<Item = C64> {
    (0..n).map(move |k| C64::from_polar(r, std::f64::consts::TAU * k as f64 / n as f64))
}

/// Radius beyond which `|p(z)| >= 2|z|`.
pub fn base_escape_radius(p: &Poly1) -> f64 {
    let d = p.degree();
    let lead = p.lead().norm();
    let rest: f64 = p.coeffs()[..d].iter().map(|a| a.norm()).sum();
    let mut r = leading_bound(lead, rest, d);
    for _ in 0..64 {
        if circle(1000, r).all(|z| p.eval(z).norm() >= 2.0 * z.norm()) {
            break;
        }
        r *= 2.0;
    }
    r
}

/// Escape radii valid over `base_window`, verified by sampling.
pub fn derive_escape_radius(f: &SkewProduct, base_window: &Rect) -> EscapeParams {
    let d = f.degree;
    let base_radius = base_escape_radius(&f.p);
    let m = base_window.max_modulus();
    let lead = f.fiber_lead().norm();
    let mut rest = 0.0;
    for j in 0..d {
        let bj = f.q.w_coeff(j);
        let mut acc = 0.0;
        for a in bj.coeffs().iter().rev() {
            acc = acc * m + a.norm();
        }
        rest += acc;
    }
    let mut r = leading_bound(lead, rest, d);
    let zs = base_window.lattice(10);
    for _ in 0..64 {
        let ok = zs.iter().all(|&z| {
            let fib = f.fiber_poly(z);
            circle(1000, r).all(|w| fib.eval(w).norm() >= 2.0 * w.norm())
        });
        if ok {
            break;
        }
        r *= 2.0;
    }
    EscapeParams { radius: r, base_radius, max_iter: MAX_ITER_CLASSIFY, base_window: *base_window }
}

/// Escape radius for fibers over the given base points (typically a sample
/// of the base Julia set): `|w| > radius` forces `|q_z(w)| > 2|w|`.
/// Coefficient bounds are doubled to cover unsampled points between samples.
pub fn escape_over_points(f: &SkewProduct, zs: &[C64]) -> EscapeParams {
    let d = f.degree;
    let base_radius = base_escape_radius(&f.p);
    if zs.is_empty() {
        return default_escape(f);
    }
    let lead = f.fiber_lead().norm();
    let mut rest = vec![0.0f64; d];
    for &z in zs {
        for (j, rj) in rest.iter_mut().enumerate() {
            *rj = rj.max(2.0 * f.q.w_coeff(j).eval(z).norm());
        }
    }
    // lead - sum rest_j r^(j-d) - 2 r^(1-d) is increasing in r; its zero is the radius
    let g = |r: f64| lead - rest.iter().enumerate().map(|(j, b)| b * r.powi(j as i32 - d as i32)).sum::<f64>() - 2.0 * r.powi(1 - d as i32);
    let mut hi = 2.0f64;
    while g(hi) < 0.0 && hi < 1e300 {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let r = hi.max(2.0);
    let (mut lo, mut hi) = (zs[0], zs[0]);
    for z in zs {
        lo = c(lo.re.min(z.re), lo.im.min(z.im));
        hi = c(hi.re.max(z.re), hi.im.max(z.im));
    }
    EscapeParams { radius: r, base_radius, max_iter: MAX_ITER_CLASSIFY, base_window: Rect::new(lo.re, hi.re, lo.im, hi.im) }
}

/// Escape radii over the square of half-side equal to the base escape radius.
pub fn default_escape(f: &SkewProduct) -> EscapeParams {
    let rb = base_escape_radius(&f.p);
    derive_escape_radius(f, &Rect::square(c(0.0, 0.0), rb))
}

/// Orbit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitStatus {
    Escaped(usize),
    Bounded,
}

impl OrbitStatus {
    pub fn is_bounded(&self) -> bool {
        matches!(self, OrbitStatus::Bounded)
    }
}

/// Classification of one orbit together with its tail.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitRecord {
    pub start: Pt2,
    pub status: OrbitStatus,
    pub tail: Vec<Pt2>,
    pub params: EscapeParams,
}

impl OrbitRecord {
    pub fn to_json(&self) -> Value {
        let (status, it) = match self.status {
            OrbitStatus::Escaped(n) => ("escaped", Value::from(n)),
            OrbitStatus::Bounded => ("bounded", Value::Null),
        };
        json!({
            "status": status,
            "escape_iter": it,
            "tail": self.tail.iter().map(|p| vec![p[0].re, p[0].im, p[1].re, p[1].im]).collect::<Vec<_>>(),
        })
    }
}

#[inline]
pub fn escaped(p: &EscapeParams, z: C64, w: C64) -> bool {
    !(z.is_finite() && w.is_finite()) || z.norm_sqr() > p.base_radius * p.base_radius || w.norm_sqr() > p.radius * p.radius
}

/// Classifies the orbit of `x` under free iteration.
pub fn classify_orbit(f: &SkewProduct, x: Pt2, params: &EscapeParams, tail_len: usize) -> OrbitRecord {
    classify_orbit_with(f, x, params, tail_len, |_, z| f.p.eval(z))
}

/// Classifies the orbit of `x`, taking the base orbit from `next_base(k, z_k)`.
///
/// Lets callers substitute an exactly known base orbit (a stored backward
/// chain or a periodic cycle) for floating-point forward iteration.
pub fn classify_orbit_with<F>(f: &SkewProduct, x: Pt2, params: &EscapeParams, tail_len: usize, mut next_base: F) -> OrbitRecord
where
    F: FnMut(usize, C64) -> C64,
{
    let n = params.max_iter;
    let keep = tail_len.min(n - n / 10);
    let mut ring: Vec<Pt2> = Vec::with_capacity(keep);
    let (mut z, mut w) = (x[0], x[1]);
    if escaped(params, z, w) {
        return OrbitRecord { start: x, status: OrbitStatus::Escaped(0), tail: vec![], params: *params };
    }
    for k in 1..=n {
        let nw = f.q.eval(z, w);
        z = next_base(k - 1, z);
        w = nw;
        if escaped(params, z, w) {
            return OrbitRecord { start: x, status: OrbitStatus::Escaped(k), tail: vec![], params: *params };
        }
        if keep > 0 && k + keep > n {
            ring.push([z, w]);
        }
    }
    OrbitRecord { start: x, status: OrbitStatus::Bounded, tail: ring, params: *params }
}

/// Point of the Riemann sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sphere {
    Finite(C64),
    Infinity,
}

impl From<C64> for Sphere {
    fn from(z: C64) -> Self {
        if z.is_finite() {
            Sphere::Finite(z)
        } else {
            Sphere::Infinity
        }
    }
}

/// Chordal distance on the Riemann sphere; values in `[0, 2]`.
pub fn chordal_distance(a: Sphere, b: Sphere) -> f64 {
    match (a, b) {
        (Sphere::Infinity, Sphere::Infinity) => 0.0,
        (Sphere::Finite(x), Sphere::Infinity) | (Sphere::Infinity, Sphere::Finite(x)) => 2.0 / 1f64.hypot(x.norm()),
        (Sphere::Finite(x), Sphere::Finite(y)) => chordal(x, y),
    }
}

/// Chordal distance between finite points.
#[inline]
pub fn chordal(a: C64, b: C64) -> f64 {
    let na = 1f64.hypot(a.norm());
    let nb = 1f64.hypot(b.norm());
    let d = (a - b).norm();
    if !d.is_finite() || !na.is_finite() || !nb.is_finite() {
        // compare through the reciprocal chart
        let (ia, ib) = (a.inv(), b.inv());
        return 2.0 * (ia - ib).norm() / (1f64.hypot(ia.norm()) * 1f64.hypot(ib.norm()));
    }
    (2.0 * d / na / nb).min(2.0)
}

/// Product chordal metric on `C^2`: max of the coordinate distances.
#[inline]
pub fn chordal2(a: &Pt2, b: &Pt2) -> f64 {
    chordal(a[0], b[0]).max(chordal(a[1], b[1]))
}

/// Chordal diameters of forward images of a sampled fiber segment.
///
/// `julia` is a sample of `J_z`; each of the 64 segment samples must keep
/// chordal distance at least `delta` from it.
pub fn contraction_probe(
    f: &SkewProduct,
    z: C64,
    segment: (C64, C64),
    m_max: usize,
    julia: &[C64],
    delta: f64,
) -> Result<Vec<f64>> {
    const N: usize = 64;
    let mut ws: Vec<Sphere> = (0..N)
        .map(|k| Sphere::Finite(segment.0 + (segment.1 - segment.0) * (k as f64 / (N - 1) as f64)))
        .collect();
    for s in &ws {
        if let Sphere::Finite(w) = s {
            let dmin = julia.iter().map(|&j| chordal(*w, j)).fold(f64::INFINITY, f64::min);
            if dmin < delta {
                return Err(Error::Precondition(format!(
                    "segment point {w} within chordal {dmin:.3e} of the Julia sample (delta {delta})"
                )));
            }
        }
    }
    let diam = |ws: &[Sphere]| {
        let mut m: f64 = 0.0;
        for i in 0..ws.len() {
            for j in i + 1..ws.len() {
                m = m.max(chordal_distance(ws[i], ws[j]));
            }
        }
        m
    };
    let mut out = Vec::with_capacity(m_max + 1);
    out.push(diam(&ws));
    let mut zk = z;
    for _ in 0..m_max {
        let fib = f.fiber_poly(zk);
        for s in ws.iter_mut() {
            if let Sphere::Finite(w) = *s {
                let v = fib.eval(w);
                *s = if v.is_finite() && v.norm() < 1e150 { Sphere::Finite(v) } else { Sphere::Infinity };
            }
        }
        zk = f.p.eval(zk);
        out.push(diam(&ws));
    }
    Ok(out)
}

/// Least-squares fit `log d_m = a + m b` over positive entries; returns `(a, b)`.
pub fn fit_log_decay(diams: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = diams
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 1e-300)
        .map(|(m, d)| (m as f64, d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly2;

    fn product(qc: f64) -> SkewProduct {
        SkewProduct::new(
            Poly1::from_real(&[0.0, 0.0, 1.0]),
            Poly2::from_w(&Poly1::from_real(&[qc, 0.0, 1.0])),
        )
        .unwrap()
    }

    #[test]
    fn w_squared_radius_is_four() {
        let f = product(0.0);
        let e = derive_escape_radius(&f, &Rect::square(c(0.0, 0.0), 2.0));
        assert_eq!(e.radius, 4.0);
        assert_eq!(e.base_radius, 4.0);
    }

    #[test]
    fn chordal_basics() {
        assert!((chordal_distance(Sphere::Finite(c(0.0, 0.0)), Sphere::Infinity) - 2.0).abs() < 1e-15);
        assert_eq!(chordal(c(0.3, 0.1), c(0.3, 0.1)), 0.0);
        assert!((chordal(c(1.0, 0.0), c(-1.0, 0.0)) - 2.0).abs() < 1e-15);
        assert!(chordal(c(1e200, 0.0), c(-1e200, 0.0)) < 1e-150);
    }

    #[test]
    fn product_escapes_quickly() {
        let f = product(0.0);
        let e = default_escape(&f);
        let r = classify_orbit(&f, [c(1.0, 0.0), c(2.0, 0.0)], &e, TAIL_LEN);
        assert!(matches!(r.status, OrbitStatus::Escaped(n) if n <= 3));
        assert!(r.tail.is_empty());
    }

    #[test]
    fn degenerate_segment_has_zero_diameter() {
        let f = product(-1.0);
        let d = contraction_probe(&f, c(1.0, 0.0), (c(0.1, 0.0), c(0.1, 0.0)), 10, &[], 0.0).unwrap();
        assert!(d.iter().all(|&x| x == 0.0));
    }
}
