//! Dense complex polynomials in one and two variables, skew products,
//! root finding and fiber composition.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Default cap on the degree `d^n` of an expanded fiber composition.
pub const COMPOSE_CAP: usize = 4096;

/// Default relative residual accepted by [`roots`].
pub const ROOT_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// One-variable polynomial; `coeffs[j]` multiplies `x^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly1 {
    coeffs: Vec<C64>,
}

impl Poly1 {
    /// Builds a polynomial, trimming trailing zero coefficients.
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == C64::new(0.0, 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(C64::new(0.0, 0.0));
        }
        Poly1 { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&x| c(x, 0.0)).collect())
    }

    pub fn constant(v: C64) -> Self {
        Self::new(vec![v])
    }

    pub fn zero() -> Self {
        Self::new(vec![])
    }

    /// `v * x^k`
    pub fn monomial(k: usize, v: C64) -> Self {
        let mut cs = vec![C64::new(0.0, 0.0); k + 1];
        cs[k] = v;
        Self::new(cs)
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[C64]) -> Self {
        let mut p = Poly1::constant(c(1.0, 0.0));
        for &r in roots {
            p = p.mul(&Poly1::new(vec![-r, c(1.0, 0.0)]));
        }
        p
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == C64::new(0.0, 0.0)
    }

    pub fn lead(&self) -> C64 {
        *self.coeffs.last().unwrap()
    }

    pub fn coeff(&self, j: usize) -> C64 {
        self.coeffs.get(j).copied().unwrap_or_default()
    }

    /// Horner evaluation.
    #[inline]
    pub fn eval(&self, x: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &a in self.coeffs.iter().rev() {
            acc = acc * x + a;
        }
        acc
    }

    /// Value and first derivative in one pass.
    #[inline]
    pub fn eval_d(&self, x: C64) -> (C64, C64) {
        let mut v = C64::new(0.0, 0.0);
        let mut dv = C64::new(0.0, 0.0);
        for &a in self.coeffs.iter().rev() {
            dv = dv * x + v;
            v = v * x + a;
        }
        (v, dv)
    }

    /// Sum of `|a_j| |x|^j`, the scale used for backward error.
    pub fn abs_scale(&self, x: C64) -> f64 {
        let r = x.norm();
        let mut acc = 0.0;
        for a in self.coeffs.iter().rev() {
            acc = acc * r + a.norm();
        }
        acc
    }

    pub fn derivative(&self) -> Poly1 {
        if self.coeffs.len() <= 1 {
            return Poly1::zero();
        }
        Poly1::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, a)| a * j as f64)
                .collect(),
        )
    }

    pub fn add(&self, o: &Poly1) -> Poly1 {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly1::new((0..n).map(|j| self.coeff(j) + o.coeff(j)).collect())
    }

    pub fn sub(&self, o: &Poly1) -> Poly1 {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly1::new((0..n).map(|j| self.coeff(j) - o.coeff(j)).collect())
    }

    pub fn scale(&self, s: C64) -> Poly1 {
        Poly1::new(self.coeffs.iter().map(|a| a * s).collect())
    }

    pub fn mul(&self, o: &Poly1) -> Poly1 {
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == C64::new(0.0, 0.0) {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly1::new(out)
    }

    /// `self(inner(x))`
    pub fn compose(&self, inner: &Poly1) -> Poly1 {
        let mut acc = Poly1::zero();
        for &a in self.coeffs.iter().rev() {
            acc = acc.mul(inner).add(&Poly1::constant(a));
        }
        acc
    }

    /// `self(x) - y`
    pub fn shifted(&self, y: C64) -> Poly1 {
        let mut cs = self.coeffs.clone();
        cs[0] -= y;
        Poly1::new(cs)
    }

    /// Max-coefficient norm.
    pub fn norm_max(&self) -> f64 {
        self.coeffs.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Distance in the max-coefficient norm.
    pub fn dist_max(&self, o: &Poly1) -> f64 {
        self.sub(o).norm_max()
    }

    /// Text form: one `j re im` line per nonzero coefficient.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (j, a) in self.coeffs.iter().enumerate() {
            if *a != C64::new(0.0, 0.0) {
                let _ = writeln!(s, "{} {:.16e} {:.16e}", j, a.re, a.im);
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Poly1> {
        let mut cs: Vec<C64> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("expected `j re im`, got `{line}`")));
            }
            let j: usize = f[0].parse().map_err(|_| Error::Parse(format!("bad index `{}`", f[0])))?;
            let re = parse_f64(f[1])?;
            let im = parse_f64(f[2])?;
            if cs.len() <= j {
                cs.resize(j + 1, C64::new(0.0, 0.0));
            }
            cs[j] += c(re, im);
        }
        Ok(Poly1::new(cs))
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`")))
}

/// Bivariate polynomial; `coeffs[i][j]` multiplies `z^i w^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly2 {
    coeffs: Vec<Vec<C64>>,
}

impl Poly2 {
    pub fn new(coeffs: Vec<Vec<C64>>) -> Self {
        let mut p = Poly2 { coeffs };
        p.normalize();
        p
    }

    /// From `(i, j, value)` triples; repeated entries add.
    pub fn from_terms(terms: &[(usize, usize, C64)]) -> Self {
        let ni = terms.iter().map(|t| t.0).max().unwrap_or(0) + 1;
        let nj = terms.iter().map(|t| t.1).max().unwrap_or(0) + 1;
        let mut g = vec![vec![C64::new(0.0, 0.0); nj]; ni];
        for &(i, j, v) in terms {
            g[i][j] += v;
        }
        Poly2::new(g)
    }

    /// Embeds a polynomial in `w` alone.
    pub fn from_w(q: &Poly1) -> Self {
        Poly2::new(vec![q.coeffs().to_vec()])
    }

    /// Embeds a polynomial in `z` alone.
    pub fn from_z(p: &Poly1) -> Self {
        Poly2::new(p.coeffs().iter().map(|&a| vec![a]).collect())
    }

    fn normalize(&mut self) {
        let nj = self.coeffs.iter().map(|r| r.len()).max().unwrap_or(1).max(1);
        for r in self.coeffs.iter_mut() {
            r.resize(nj, C64::new(0.0, 0.0));
        }
        while self.coeffs.len() > 1
            && self.coeffs.last().unwrap().iter().all(|a| *a == C64::new(0.0, 0.0))
        {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(vec![C64::new(0.0, 0.0)]);
        }
        let mut nj = self.coeffs[0].len();
        while nj > 1 && self.coeffs.iter().all(|r| r[nj - 1] == C64::new(0.0, 0.0)) {
            nj -= 1;
        }
        for r in self.coeffs.iter_mut() {
            r.truncate(nj);
        }
    }

    pub fn coeff(&self, i: usize, j: usize) -> C64 {
        self.coeffs.get(i).and_then(|r| r.get(j)).copied().unwrap_or_default()
    }

    /// Highest power of `z` present (rows).
    pub fn z_len(&self) -> usize {
        self.coeffs.len()
    }

    /// Highest power of `w` present plus one.
    pub fn w_len(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.coeffs.iter().enumerate().flat_map(|(i, r)| {
            r.iter()
                .enumerate()
                .filter(|(_, a)| **a != C64::new(0.0, 0.0))
                .map(move |(j, a)| (i, j, *a))
        })
    }

    pub fn total_degree(&self) -> usize {
        self.terms().map(|(i, j, _)| i + j).max().unwrap_or(0)
    }

    /// Coefficient of `w^j` as a polynomial in `z`.
    pub fn w_coeff(&self, j: usize) -> Poly1 {
        Poly1::new(self.coeffs.iter().map(|r| r.get(j).copied().unwrap_or_default()).collect())
    }

    #[inline]
    pub fn eval(&self, z: C64, w: C64) -> C64 {
        let nj = self.w_len();
        let mut acc = C64::new(0.0, 0.0);
        for j in (0..nj).rev() {
            let mut b = C64::new(0.0, 0.0);
            for r in self.coeffs.iter().rev() {
                b = b * z + r[j];
            }
            acc = acc * w + b;
        }
        acc
    }

    /// `w -> q(z, w)`
    pub fn fiber(&self, z: C64) -> Poly1 {
        let nj = self.w_len();
        let mut out = Vec::with_capacity(nj);
        for j in 0..nj {
            let mut b = C64::new(0.0, 0.0);
            for r in self.coeffs.iter().rev() {
                b = b * z + r[j];
            }
            out.push(b);
        }
        Poly1::new(out)
    }

    /// Partial derivative in `w`.
    pub fn d_w(&self) -> Poly2 {
        let g = self
            .coeffs
            .iter()
            .map(|r| r.iter().enumerate().skip(1).map(|(j, a)| a * j as f64).collect::<Vec<_>>())
            .collect::<Vec<_>>();
        Poly2::new(g.into_iter().map(|r| if r.is_empty() { vec![C64::new(0.0, 0.0)] } else { r }).collect())
    }

    /// Degree-`d` homogeneous part evaluated at `(1, zeta)`, as a polynomial in `zeta`.
    pub fn top_part_at_one(&self, d: usize) -> Poly1 {
        let mut cs = vec![C64::new(0.0, 0.0); d + 1];
        for (i, j, a) in self.terms() {
            if i + j == d {
                cs[j] += a;
            }
        }
        Poly1::new(cs)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, j, a) in self.terms() {
            let _ = writeln!(s, "{} {} {:.16e} {:.16e}", i, j, a.re, a.im);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Poly2> {
        let mut terms = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("expected `i j re im`, got `{line}`")));
            }
            let i: usize = f[0].parse().map_err(|_| Error::Parse(format!("bad index `{}`", f[0])))?;
            let j: usize = f[1].parse().map_err(|_| Error::Parse(format!("bad index `{}`", f[1])))?;
            terms.push((i, j, c(parse_f64(f[2])?, parse_f64(f[3])?)));
        }
        Ok(Poly2::from_terms(&terms))
    }
}

/// Why a pair `(p, q)` is not a regular skew product.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Irregular {
    DegreeTooSmall(usize),
    BaseDegree { p: usize, d: usize },
    FiberDegree { q: usize, d: usize },
    LeadingZero,
    LeadingDependsOnZ,
}

impl std::fmt::Display for Irregular {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Irregular::DegreeTooSmall(d) => write!(f, "degree {d} < 2"),
            Irregular::BaseDegree { p, d } => write!(f, "deg p = {p} differs from d = {d}"),
            Irregular::FiberDegree { q, d } => write!(f, "total degree of q = {q} differs from d = {d}"),
            Irregular::LeadingZero => write!(f, "coefficient of w^d in q is zero"),
            Irregular::LeadingDependsOnZ => write!(f, "coefficient of w^d in q depends on z"),
        }
    }
}

/// Outcome of [`SkewProduct::check_regular`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Regularity {
    pub regular: bool,
    pub violation: Option<Irregular>,
}

/// `f(z, w) = (p(z), q(z, w))`.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewProduct {
    pub p: Poly1,
    pub q: Poly2,
    pub degree: usize,
}

impl SkewProduct {
    /// Unchecked constructor; `degree` is taken from `p`.
    pub fn from_parts(p: Poly1, q: Poly2) -> Self {
        let degree = p.degree();
        SkewProduct { p, q, degree }
    }

    /// Checked constructor.
    pub fn new(p: Poly1, q: Poly2) -> Result<Self> {
        let f = Self::from_parts(p, q);
        match f.check_regular().violation {
            None => Ok(f),
            Some(v) => Err(Error::Precondition(format!("not a regular skew product: {v}"))),
        }
    }

    pub fn check_regular(&self) -> Regularity {
        let v = self.violation();
        Regularity { regular: v.is_none(), violation: v }
    }

    fn violation(&self) -> Option<Irregular> {
        let d = self.degree;
        if d < 2 {
            return Some(Irregular::DegreeTooSmall(d));
        }
        if self.p.degree() != d {
            return Some(Irregular::BaseDegree { p: self.p.degree(), d });
        }
        let td = self.q.total_degree();
        if td != d {
            return Some(Irregular::FiberDegree { q: td, d });
        }
        let lead = self.q.w_coeff(d);
        if lead.is_zero() {
            return Some(Irregular::LeadingZero);
        }
        if lead.degree() > 0 {
            return Some(Irregular::LeadingDependsOnZ);
        }
        None
    }

    /// Coefficient of `w^d` in `q`.
    pub fn fiber_lead(&self) -> C64 {
        self.q.coeff(0, self.degree)
    }

    #[inline]
    pub fn eval(&self, z: C64, w: C64) -> (C64, C64) {
        (self.p.eval(z), self.q.eval(z, w))
    }

    pub fn fiber_poly(&self, z: C64) -> Poly1 {
        self.q.fiber(z)
    }

    /// Critical-point polynomial `w -> dq/dw (z, w)`.
    pub fn fiber_crit_poly(&self, z: C64) -> Poly1 {
        self.q.fiber(z).derivative()
    }

    /// Expanded `Q_z^n`; fails once `d^n` exceeds `cap`.
    pub fn compose_fiber(&self, z: C64, n: usize, cap: usize) -> Result<Poly1> {
        if n == 0 {
            return Err(Error::Precondition("compose_fiber needs n >= 1".into()));
        }
        let mut deg: usize = 1;
        for _ in 0..n {
            deg = deg.saturating_mul(self.degree);
            if deg > cap {
                return Err(Error::Precondition(format!(
                    "degree {}^{} exceeds cap {}; evaluate pointwise instead",
                    self.degree, n, cap
                )));
            }
        }
        let mut qn = self.fiber_poly(z);
        let mut zk = z;
        for _ in 1..n {
            zk = self.p.eval(zk);
            qn = self.fiber_poly(zk).compose(&qn);
        }
        Ok(qn)
    }

    /// Degree-`d` map induced on the line at infinity, normalised by `lead(p)`.
    pub fn map_at_infinity(&self) -> Poly1 {
        self.q.top_part_at_one(self.degree).scale(self.p.lead().inv())
    }

    pub fn to_text(&self) -> String {
        format!("[p]\n{}[q]\n{}", self.p.to_text(), self.q.to_text())
    }

    pub fn from_text(text: &str) -> Result<SkewProduct> {
        let (mut ps, mut qs) = (String::new(), String::new());
        let mut section = 0;
        for line in text.lines() {
            match line.trim() {
                "[p]" => section = 1,
                "[q]" => section = 2,
                l => match section {
                    1 => {
                        ps.push_str(l);
                        ps.push('\n');
                    }
                    2 => {
                        qs.push_str(l);
                        qs.push('\n');
                    }
                    _ if l.is_empty() || l.starts_with('#') => {}
                    _ => return Err(Error::Parse("expected `[p]` section first".into())),
                },
            }
        }
        SkewProduct::new(Poly1::from_text(&ps)?, Poly2::from_text(&qs)?)
    }
}

/// Pointwise value and derivative of `p^n` at `z`.
pub fn iterate_d(p: &Poly1, z: C64, n: usize) -> (C64, C64) {
    let mut x = z;
    let mut d = c(1.0, 0.0);
    for _ in 0..n {
        let (v, dv) = p.eval_d(x);
        d *= dv;
        x = v;
    }
    (x, d)
}

/// Pointwise value and `w`-derivative of `Q_z^n` at `w`; also returns `p^n(z)`.
pub fn fiber_iterate_d(f: &SkewProduct, z: C64, w: C64, n: usize) -> (C64, C64, C64) {
    let (mut zk, mut wk) = (z, w);
    let mut d = c(1.0, 0.0);
    for _ in 0..n {
        let fib = f.q.fiber(zk);
        let (v, dv) = fib.eval_d(wk);
        d *= dv;
        wk = v;
        zk = f.p.eval(zk);
    }
    (zk, wk, d)
}

fn rel_residual(p: &Poly1, x: C64) -> f64 {
    let s = p.abs_scale(x);
    if s == 0.0 {
        return 0.0;
    }
    p.eval(x).norm() / s
}

fn newton_polish(p: &Poly1, dp: &Poly1, mut x: C64, steps: usize) -> C64 {
    let mut best = (rel_residual(p, x), x);
    for _ in 0..steps {
        let v = p.eval(x);
        let dv = dp.eval(x);
        if dv.norm() == 0.0 || !v.is_finite() {
            break;
        }
        let nx = x - v / dv;
        if !nx.is_finite() {
            break;
        }
        let r = rel_residual(p, nx);
        x = nx;
        if r < best.0 {
            best = (r, nx);
        }
        if r == 0.0 {
            break;
        }
    }
    best.1
}

fn quadratic_roots(a: C64, b: C64, cc: C64) -> [C64; 2] {
    let disc = (b * b - a * cc * 4.0).sqrt();
    let s = if (b.conj() * disc).re >= 0.0 { -b - disc } else { -b + disc };
    if s.norm() == 0.0 {
        let r = -b / (a * 2.0);
        return [r, r];
    }
    let r1 = s / (a * 2.0);
    let r2 = (cc * 2.0) / s;
    [r1, r2]
}

/// Simultaneous Aberth-Ehrlich iteration; returns roots and whether it converged.
fn aberth(p: &Poly1, seed: u64) -> (Vec<C64>, bool) {
    let n = p.degree();
    let dp = p.derivative();
    let a = p.coeffs();
    let lead = p.lead();
    // ring centred at the root mean, radius from the geometric mean of roots
    let center = -a[n - 1] / (lead * n as f64);
    let shifted = p.compose(&Poly1::new(vec![center, c(1.0, 0.0)]));
    let mut radius = (shifted.coeff(0) / lead).norm().powf(1.0 / n as f64);
    if !(radius.is_finite() && radius > 0.0) {
        radius = 1.0 + a[..n].iter().map(|x| (x / lead).norm()).fold(0.0, f64::max);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let mut z: Vec<C64> = (0..n)
        .map(|k| {
            let jitter = 1.0 + 0.1 * (rng.gen::<f64>() - 0.5);
            let th = phase + std::f64::consts::TAU * k as f64 / n as f64 + 0.4;
            center + C64::from_polar(radius * jitter, th)
        })
        .collect();
    let mut done = vec![false; n];
    for _ in 0..2000 {
        let mut all = true;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let (v, dv) = (p.eval(z[i]), dp.eval(z[i]));
            if rel_residual(p, z[i]) < 1e-15 {
                done[i] = true;
                continue;
            }
            let ratio = v / dv;
            let mut s = C64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    let diff = z[i] - z[j];
                    if diff.norm() > 0.0 {
                        s += diff.inv();
                    }
                }
            }
            let corr = ratio / (C64::new(1.0, 0.0) - ratio * s);
            if !corr.is_finite() {
                // nudge off a degenerate configuration
                let bump = C64::from_polar(1e-8 * (1.0 + z[i].norm()), i as f64);
                z[i] += bump;
                all = false;
                continue;
            }
            z[i] -= corr;
            if corr.norm() <= 1e-15 * (1.0 + z[i].norm()) {
                done[i] = true;
            } else {
                all = false;
            }
        }
        if all {
            return (z, true);
        }
    }
    (z, false)
}

/// Eigenvalues of the companion matrix.
fn companion_roots(p: &Poly1) -> Option<Vec<C64>> {
    let n = p.degree();
    let lead = p.lead();
    let m = DMatrix::<C64>::from_fn(n, n, |i, j| {
        if i == 0 {
            -p.coeff(n - 1 - j) / lead
        } else if i == j + 1 {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let schur = nalgebra::linalg::Schur::try_new(m, 1e-15, 10_000)?;
    let ev = schur.eigenvalues()?;
    Some(ev.iter().copied().collect())
}

/// All roots with multiplicity.
///
/// Each returned root has relative residual `|p(r)| / sum |a_j||r|^j <= tol`.
pub fn roots(poly: &Poly1, tol: f64) -> Result<Vec<C64>> {
    let n = poly.degree();
    if n == 0 {
        return Err(Error::Precondition("roots of a constant polynomial".into()));
    }
    if poly.coeffs().iter().any(|a| !a.is_finite()) {
        return Err(Error::Numerical("non-finite coefficient".into()));
    }
    let a = poly.coeffs();
    let dp = poly.derivative();
    if n == 1 {
        return Ok(vec![-a[0] / a[1]]);
    }
    if n == 2 {
        let r = quadratic_roots(a[2], a[1], a[0]);
        return Ok(r.iter().map(|&x| newton_polish(poly, &dp, x, 2)).collect());
    }
    // exact zero roots are peeled off first
    let nz = a.iter().take_while(|x| **x == C64::new(0.0, 0.0)).count();
    if nz > 0 {
        let rest = Poly1::new(a[nz..].to_vec());
        let mut out = vec![C64::new(0.0, 0.0); nz];
        if rest.degree() > 0 {
            out.extend(roots(&rest, tol)?);
        }
        return Ok(out);
    }
    let check = |rs: &[C64]| rs.iter().map(|&r| rel_residual(poly, r)).fold(0.0, f64::max);
    let (z, _) = aberth(poly, 0x5eed_0000 + n as u64);
    let z: Vec<C64> = z.into_iter().map(|x| newton_polish(poly, &dp, x, 3)).collect();
    let worst = check(&z);
    if worst <= tol && z.iter().all(|x| x.is_finite()) {
        return Ok(z);
    }
    if let Some(ev) = companion_roots(poly) {
        let ev: Vec<C64> = ev.into_iter().map(|x| newton_polish(poly, &dp, x, 3)).collect();
        let w2 = check(&ev);
        if w2 <= tol && ev.iter().all(|x| x.is_finite()) {
            return Ok(ev);
        }
        return Err(Error::Numerical(format!(
            "root finder did not converge (best relative residuals: aberth {worst:.3e}, companion {w2:.3e})"
        )));
    }
    Err(Error::Numerical(format!(
        "root finder did not converge (best relative residual {worst:.3e})"
    )))
}

/// Eigenvalue-based roots, exposed as an independent cross-check.
pub fn roots_companion(poly: &Poly1) -> Result<Vec<C64>> {
    if poly.degree() == 0 {
        return Err(Error::Precondition("roots of a constant polynomial".into()));
    }
    companion_roots(poly).ok_or_else(|| Error::Numerical("Schur iteration failed".into()))
}

/// Preimages of `y` under `p`.
pub fn preimages(p: &Poly1, y: C64) -> Result<Vec<C64>> {
    roots(&p.shifted(y), ROOT_TOL)
}

/// Parses a one-variable polynomial expression such as `w^2 - 1` or `(z+1)*(z-0.5i)`.
///
/// Accepts `+ - * ^`, parentheses, real literals, `i`, and a single variable
/// letter (`w`, `z` or `x`).
pub fn parse_poly1(expr: &str) -> Result<Poly1> {
    let toks: Vec<char> = expr.chars().filter(|ch| !ch.is_whitespace()).collect();
    let mut pr = ExprParser { t: toks, k: 0 };
    let p = pr.sum()?;
    if pr.k != pr.t.len() {
        return Err(Error::Parse(format!("unexpected `{}` in `{expr}`", pr.t[pr.k])));
    }
    Ok(p)
}

struct ExprParser {
    t: Vec<char>,
    k: usize,
}

impl ExprParser {
    fn peek(&self) -> Option<char> {
        self.t.get(self.k).copied()
    }

    fn sum(&mut self) -> Result<Poly1> {
        let mut neg = false;
        if let Some(ch @ ('+' | '-')) = self.peek() {
            neg = ch == '-';
            self.k += 1;
        }
        let mut acc = self.product()?;
        if neg {
            acc = acc.scale(c(-1.0, 0.0));
        }
        while let Some(ch @ ('+' | '-')) = self.peek() {
            self.k += 1;
            let rhs = self.product()?;
            acc = if ch == '+' { acc.add(&rhs) } else { acc.sub(&rhs) };
        }
        Ok(acc)
    }

    fn product(&mut self) -> Result<Poly1> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.k += 1;
                    acc = acc.mul(&self.power()?);
                }
                // implicit multiplication: `2w`, `3(w+1)`
                Some(ch) if ch == '(' || ch.is_ascii_alphabetic() => acc = acc.mul(&self.power()?),
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<Poly1> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.k += 1;
            let st = self.k;
            while matches!(self.peek(), Some(ch) if ch.is_ascii_digit()) {
                self.k += 1;
            }
            let e: usize = self.t[st..self.k]
                .iter()
                .collect::<String>()
                .parse()
                .map_err(|_| Error::Parse("exponent must be a non-negative integer".into()))?;
            let mut r = Poly1::constant(c(1.0, 0.0));
            for _ in 0..e {
                r = r.mul(&base);
            }
            return Ok(r);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Poly1> {
        match self.peek() {
            Some('(') => {
                self.k += 1;
                let v = self.sum()?;
                if self.peek() != Some(')') {
                    return Err(Error::Parse("missing `)`".into()));
                }
                self.k += 1;
                Ok(v)
            }
            Some('i') => {
                self.k += 1;
                Ok(Poly1::constant(c(0.0, 1.0)))
            }
            Some('w' | 'z' | 'x') => {
                self.k += 1;
                Ok(Poly1::monomial(1, c(1.0, 0.0)))
            }
            Some(ch) if ch.is_ascii_digit() || ch == '.' => {
                let st = self.k;
                while let Some(ch) = self.peek() {
                    let exp_sign = (ch == '+' || ch == '-') && matches!(self.t.get(self.k.wrapping_sub(1)), Some('e' | 'E'));
                    if ch.is_ascii_digit() || ch == '.' || ch == 'e' || ch == 'E' || exp_sign {
                        self.k += 1;
                    } else {
                        break;
                    }
                }
                let s: String = self.t[st..self.k].iter().collect();
                let v: f64 = s.parse().map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
                if self.peek() == Some('i') {
                    self.k += 1;
                    return Ok(Poly1::constant(c(0.0, v)));
                }
                Ok(Poly1::constant(c(v, 0.0)))
            }
            Some(ch) => Err(Error::Parse(format!("unexpected `{ch}`"))),
            None => Err(Error::Parse("unexpected end of expression".into())),
        }
    }
}

#[cfg(test)]
mod tests {

    #[test]
    fn parses_expressions() {
        assert_eq!(parse_poly1("w^2-1").unwrap(), Poly1::from_real(&[-1.0, 0.0, 1.0]));
        assert_eq!(parse_poly1("-(z+1)*(z-1)").unwrap(), Poly1::from_real(&[1.0, 0.0, -1.0]));
        assert_eq!(parse_poly1("2w^2+0.5i").unwrap(), Poly1::new(vec![c(0.0, 0.5), c(0.0, 0.0), c(2.0, 0.0)]));
        assert_eq!(parse_poly1("1e-1w").unwrap(), Poly1::from_real(&[0.0, 0.1]));
        assert!(parse_poly1("w^").is_err());
    }
    use super::*;

    fn fa(a: C64) -> SkewProduct {
        SkewProduct::new(
            Poly1::from_real(&[0.0, 0.0, 1.0]),
            Poly2::from_terms(&[(0, 2, c(1.0, 0.0)), (1, 0, a)]),
        )
        .unwrap()
    }

    #[test]
    fn horner_matches_naive() {
        let p = Poly1::new(vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 1.0), c(2.0, 0.0)]);
        let x = c(0.3, -1.2);
        let naive: C64 = p.coeffs().iter().enumerate().map(|(j, a)| a * x.powu(j as u32)).sum();
        assert!((p.eval(x) - naive).norm() < 1e-12);
        let (v, d) = p.eval_d(x);
        assert!((v - naive).norm() < 1e-12);
        assert!((d - p.derivative().eval(x)).norm() < 1e-12);
    }

    #[test]
    fn fa_two_cycle() {
        let f = fa(c(-1.0, 0.0));
        assert_eq!(f.eval(c(1.0, 0.0), c(0.0, 0.0)), (c(1.0, 0.0), c(-1.0, 0.0)));
        assert_eq!(f.eval(c(1.0, 0.0), c(-1.0, 0.0)), (c(1.0, 0.0), c(0.0, 0.0)));
    }

    #[test]
    fn regularity_rejects_missing_top_term() {
        let f = SkewProduct::from_parts(
            Poly1::from_real(&[0.0, 0.0, 1.0]),
            Poly2::from_terms(&[(1, 1, c(1.0, 0.0)), (2, 0, c(1.0, 0.0))]),
        );
        let r = f.check_regular();
        assert!(!r.regular);
        assert_eq!(r.violation, Some(Irregular::LeadingZero));
        let g = SkewProduct::from_parts(
            Poly1::from_real(&[0.0, 0.0, 1.0]),
            Poly2::from_terms(&[(0, 2, c(1.0, 0.0)), (1, 2, c(1.0, 0.0))]),
        );
        assert!(!g.check_regular().regular);
    }

    #[test]
    fn simple_roots() {
        let mut r = roots(&Poly1::from_real(&[1.0, 0.0, 1.0]), ROOT_TOL).unwrap();
        r.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-14);
        assert!((r[1] - c(0.0, 1.0)).norm() < 1e-14);
        let r = roots(&Poly1::from_real(&[0.0, 2.0]), ROOT_TOL).unwrap();
        assert_eq!(r, vec![c(0.0, 0.0)]);
    }

    #[test]
    fn aberth_agrees_with_companion() {
        let p = Poly1::from_roots(&[c(1.0, 0.0), c(-0.5, 0.5), c(0.25, -2.0), c(3.0, 1.0), c(-2.0, 0.0)]);
        let a = roots(&p, ROOT_TOL).unwrap();
        let b = roots_companion(&p).unwrap();
        for x in &a {
            let d = b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-9, "{x} not matched ({d})");
        }
    }

    #[test]
    fn text_round_trip() {
        let f = fa(c(0.1, -0.3));
        let g = SkewProduct::from_text(&f.to_text()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn compose_identity_case() {
        let f = fa(c(-1.0, 0.0));
        let z = c(0.3, 0.4);
        assert_eq!(f.compose_fiber(z, 1, COMPOSE_CAP).unwrap(), f.fiber_poly(z));
        assert!(f.compose_fiber(z, 13, COMPOSE_CAP).is_err());
    }
}
