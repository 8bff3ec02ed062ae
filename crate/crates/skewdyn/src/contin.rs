//! Continuation of saddle cycles along parameter paths, and monodromy of
//! fiber Julia sets over a circle base.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::critpost::SaddleOrbit;
use crate::error::{Error, Result};
use crate::families::{make_fa, make_product};
use crate::engine::default_escape;
use crate::poly::{c, iterate_d, roots, Poly1, SkewProduct, C64, ROOT_TOL};

/// One-parameter families that paths run through.
#[derive(Clone, Debug, PartialEq)]
pub enum PathFamily {
    /// `(z^2, w^2 + lambda z)`.
    Fa,
    /// `(p(z), q(w) + lambda)`.
    ProductShift { p: Poly1, q: Poly1 },
}

impl PathFamily {
    pub fn map_at(&self, lambda: C64) -> Result<SkewProduct> {
        match self {
            PathFamily::Fa => Ok(make_fa(lambda)),
            PathFamily::ProductShift { p, q } => make_product(p, &q.add(&Poly1::constant(lambda))),
        }
    }

    pub fn parameter(&self) -> &'static str {
        match self {
            PathFamily::Fa => "a",
            PathFamily::ProductShift { .. } => "c",
        }
    }
}

/// Parameter samples `lambda_0 .. lambda_K` in a family.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamPath {
    pub family: PathFamily,
    pub samples: Vec<C64>,
}

impl ParamPath {
    /// `steps` equal steps from `from` to `to`.
    pub fn linear(family: PathFamily, from: C64, to: C64, steps: usize) -> Self {
        let steps = steps.max(1);
        let samples = (0..=steps).map(|k| from + (to - from) * (k as f64 / steps as f64)).collect();
        ParamPath { family, samples }
    }

    pub fn constant(family: PathFamily, at: C64, steps: usize) -> Self {
        ParamPath { family, samples: vec![at; steps.max(1) + 1] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceStep {
    pub lambda: C64,
    pub base_point: C64,
    pub fiber_point: C64,
    pub base_multiplier: C64,
    pub vertical_multiplier: C64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LostReason {
    Divergence,
    MultiplierCrossing,
}

impl std::fmt::Display for LostReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LostReason::Divergence => write!(f, "divergence"),
            LostReason::MultiplierCrossing => write!(f, "multiplier-crossing"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Outcome {
    Completed,
    /// Index of the path segment, the reason and the offending parameter.
    Lost { step: usize, reason: LostReason, lambda: C64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationTrace {
    pub steps: Vec<TraceStep>,
    pub outcome: Outcome,
    pub period: usize,
}

impl ContinuationTrace {
    pub fn last(&self) -> Option<&TraceStep> {
        self.steps.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda_re,lambda_im,z_re,z_im,w_re,w_im,mu_base_abs,mu_vert_abs,residual\n");
        for t in &self.steps {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                t.lambda.re,
                t.lambda.im,
                t.base_point.re,
                t.base_point.im,
                t.fiber_point.re,
                t.fiber_point.im,
                t.base_multiplier.norm(),
                t.vertical_multiplier.norm(),
                t.residual
            ));
        }
        s
    }

    pub fn to_json(&self) -> Value {
        let outcome = match self.outcome {
            Outcome::Completed => json!({"status": "Completed"}),
            Outcome::Lost { step, reason, lambda } => json!({
                "status": "Lost",
                "step": step,
                "reason": reason.to_string(),
                "lambda": [lambda.re, lambda.im],
            }),
        };
        let last = self.last().map(|t| {
            json!({
                "lambda": [t.lambda.re, t.lambda.im],
                "base_point": [t.base_point.re, t.base_point.im],
                "fiber_point": [t.fiber_point.re, t.fiber_point.im],
                "mu_base_abs": t.base_multiplier.norm(),
                "mu_vert_abs": t.vertical_multiplier.norm(),
            })
        });
        json!({ "outcome": outcome, "period": self.period, "records": self.steps.len(), "last": last })
    }
}

/// Bisection depth on Newton failure or multiplier crossing.
pub const MAX_BISECTIONS: usize = 12;
/// Multipliers within this distance of the unit circle count as crossings.
pub const MULTIPLIER_BAND: f64 = 1e-3;
/// Newton steps larger than this fraction of `1 + |x|` count as a branch jump.
const MAX_JUMP: f64 = 0.25;

fn newton<F>(x0: C64, tol: f64, mut g: F) -> Option<(C64, f64)>
where
    F: FnMut(C64) -> (C64, C64),
{
    let mut x = x0;
    for _ in 0..50 {
        let (v, dv) = g(x);
        let den = dv - c(1.0, 0.0);
        if !v.is_finite() || den.norm() == 0.0 {
            return None;
        }
        let st = (v - x) / den;
        x -= st;
        if (x - x0).norm() > MAX_JUMP * (1.0 + x0.norm()) {
            return None;
        }
        if st.norm() <= 1e-3 * tol * (1.0 + x.norm()) {
            break;
        }
    }
    let (v, _) = g(x);
    let res = (v - x).norm();
    (res <= tol * (1.0 + x.norm())).then_some((x, res))
}

fn fiber_along(f: &SkewProduct, z: C64, n: usize, w: C64) -> (C64, C64) {
    let (mut zk, mut w, mut d) = (z, w, c(1.0, 0.0));
    for _ in 0..n {
        let (v, dv) = f.fiber_poly(zk).eval_d(w);
        d *= dv;
        w = v;
        zk = f.p.eval(zk);
    }
    (w, d)
}

enum StepResult {
    Ok(TraceStep),
    Diverged,
    Crossed,
}

fn solve_at(family: &PathFamily, lambda: C64, n: usize, z0: C64, w0: C64, tol: f64) -> Result<StepResult> {
    let f = family.map_at(lambda)?;
    let Some((z, rz)) = newton(z0, tol, |z| iterate_d(&f.p, z, n)) else { return Ok(StepResult::Diverged) };
    let Some((w, rw)) = newton(w0, tol, |w| fiber_along(&f, z, n, w)) else { return Ok(StepResult::Diverged) };
    let mu_b = iterate_d(&f.p, z, n).1;
    let mu_v = fiber_along(&f, z, n, w).1;
    if mu_b.norm() < 1.0 + MULTIPLIER_BAND || mu_v.norm() > 1.0 - MULTIPLIER_BAND {
        return Ok(StepResult::Crossed);
    }
    Ok(StepResult::Ok(TraceStep { lambda, base_point: z, fiber_point: w, base_multiplier: mu_b, vertical_multiplier: mu_v, residual: rz.max(rw) }))
}

/// Continues `start` (valid at `path.samples[0]`) along the path: base point
/// first, then the fiber point over it.
pub fn continue_orbit(path: &ParamPath, start: &SaddleOrbit, tol: f64) -> Result<ContinuationTrace> {
    if path.samples.len() < 2 {
        return Err(Error::Precondition("a path needs at least two samples".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }
    let n = start.base_period;
    let first = match solve_at(&path.family, path.samples[0], n, start.base_point, start.fiber_point, tol)? {
        StepResult::Ok(s) => s,
        _ => return Err(Error::Precondition("start orbit is not a saddle cycle at the first parameter".into())),
    };
    let mut steps = vec![first];
    for k in 1..path.samples.len() {
        let (from, target) = (path.samples[k - 1], path.samples[k]);
        let mut cur = *steps.last().unwrap();
        let (mut t, mut h, mut level) = (0.0f64, 1.0f64, 0usize);
        while t < 1.0 {
            let tn = (t + h).min(1.0);
            let lam = from + (target - from) * tn;
            match solve_at(&path.family, lam, n, cur.base_point, cur.fiber_point, tol)? {
                StepResult::Ok(s) => {
                    cur = s;
                    t = tn;
                }
                failure => {
                    level += 1;
                    if level > MAX_BISECTIONS {
                        let reason = if matches!(failure, StepResult::Crossed) { LostReason::MultiplierCrossing } else { LostReason::Divergence };
                        return Ok(ContinuationTrace { steps, outcome: Outcome::Lost { step: k, reason, lambda: lam }, period: n });
                    }
                    h *= 0.5;
                }
            }
        }
        steps.push(cur);
    }
    Ok(ContinuationTrace { steps, outcome: Outcome::Completed, period: n })
}

/// Monodromy degree of a fiber Julia marker transported once or twice around
/// the unit circle.
#[derive(Clone, Debug, PartialEq)]
pub struct MonodromyReport {
    /// `Some(1)` or `Some(2)`; `None` when tracking was ambiguous or never closed.
    pub degree: Option<usize>,
    pub markers: usize,
    pub return_distance: [f64; 2],
    pub ambiguous_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationReport {
    pub a: MonodromyReport,
    pub b: MonodromyReport,
    /// Degrees differ, which separates the two maps' hyperbolic components.
    pub separated: Option<bool>,
}

impl MonodromyReport {
    pub fn to_json(&self) -> Value {
        json!({
            "degree": self.degree,
            "markers": self.markers,
            "return_distance": self.return_distance,
            "ambiguous_steps": self.ambiguous_steps,
        })
    }
}

impl SeparationReport {
    pub fn to_json(&self) -> Value {
        json!({ "a": self.a.to_json(), "b": self.b.to_json(), "separated": self.separated })
    }
}

/// Steps per loop of the base circle.
pub const LOOP_STEPS: usize = 720;
const BRANCHES: usize = 48;
const MARKER_DEPTH: usize = 24;
const RETURN_TOL: f64 = 0.05;
const DISTINCT: f64 = 1e-4;
/// The matched marker must be this many times closer than any other one.
const MATCH_RATIO: f64 = 4.0;

/// Limits of fiber critical orbits arriving over `e^{i theta}` along fixed
/// backward branches of the base: one marker per attracting Fatou component.
fn attractor_markers(f: &SkewProduct, theta: f64, branches: &[Vec<usize>], radius: f64) -> Result<Vec<C64>> {
    let d = f.p.degree() as f64;
    let mut out: Vec<C64> = Vec::new();
    for seq in branches {
        let mut t = theta;
        let mut angles = vec![t];
        for &m in seq {
            t = (t + std::f64::consts::TAU * m as f64) / d;
            angles.push(t);
        }
        let z_far = C64::from_polar(1.0, *angles.last().unwrap());
        for cp in roots(&f.fiber_crit_poly(z_far), ROOT_TOL)? {
            let mut w = cp;
            for k in (1..angles.len()).rev() {
                w = f.fiber_poly(C64::from_polar(1.0, angles[k])).eval(w);
                if !(w.norm() <= radius) {
                    break;
                }
            }
            if w.norm() <= radius && out.iter().all(|o| (o - w).norm() > DISTINCT) {
                out.push(w);
            }
        }
    }
    Ok(out)
}

/// Follows attracting-component markers of the fibers once and twice around
/// the unit circle; the degree is the number of loops after which they return.
pub fn monodromy_degree(f: &SkewProduct, probes: usize, seed: u64) -> Result<MonodromyReport> {
    let d = f.p.degree();
    let circle_base = f.p.dist_max(&Poly1::monomial(d, c(1.0, 0.0))) < 1e-14 && d >= 2;
    if !circle_base {
        return Err(Error::Precondition("monodromy needs the base z^d".into()));
    }
    let radius = default_escape(f).radius;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // varied depths reach every phase of an attracting cycle
    let branches: Vec<Vec<usize>> = (0..BRANCHES).map(|i| (0..MARKER_DEPTH + i % 6).map(|_| rng.gen_range(0..d)).collect()).collect();
    let init: Vec<C64> = attractor_markers(f, 0.0, &branches, radius)?.into_iter().take(probes.max(1)).collect();
    if init.is_empty() {
        return Ok(MonodromyReport { degree: None, markers: 0, return_distance: [f64::INFINITY; 2], ambiguous_steps: 0 });
    }
    let mut markers = init.clone();
    let dtheta = std::f64::consts::TAU / LOOP_STEPS as f64;
    let mut ambiguous = 0;
    let mut ret = [f64::INFINITY; 2];
    for lap in 0..2 {
        for k in 1..=LOOP_STEPS {
            let cloud = attractor_markers(f, dtheta * k as f64, &branches, radius)?;
            for m in markers.iter_mut() {
                let mut ds: Vec<(f64, C64)> = cloud.iter().map(|&w| ((w - *m).norm(), w)).collect();
                ds.sort_by(|a, b| a.0.total_cmp(&b.0));
                match ds.first() {
                    Some(&(d1, w1)) => {
                        if ds.iter().skip(1).any(|&(dd, w)| (w - w1).norm() > DISTINCT && dd < MATCH_RATIO * d1) {
                            ambiguous += 1;
                        }
                        *m = w1;
                    }
                    None => ambiguous += 1,
                }
            }
        }
        ret[lap] = markers.iter().zip(&init).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    }
    let degree = if ambiguous > 0 {
        None
    } else if ret[0] <= RETURN_TOL {
        Some(1)
    } else if ret[1] <= RETURN_TOL {
        Some(2)
    } else {
        None
    };
    Ok(MonodromyReport { degree, markers: init.len(), return_distance: ret, ambiguous_steps: ambiguous })
}

/// Compares the monodromy degrees of two maps over the unit circle.
pub fn separation_evidence(fa: &SkewProduct, fb: &SkewProduct, probes: usize) -> Result<SeparationReport> {
    let a = monodromy_degree(fa, probes, 11)?;
    let b = monodromy_degree(fb, probes, 11)?;
    let separated = match (a.degree, b.degree) {
        (Some(x), Some(y)) => Some(x != y),
        _ => None,
    };
    Ok(SeparationReport { a, b, separated })
}
