//! Critical locus over the base Julia set, postcritical and accumulation clouds,
//! saddle orbits, trapping checks and the Axiom A certifier.

use std::collections::HashMap;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::engine::{base_escape_radius, chordal, chordal2, classify_orbit_with, default_escape, escape_over_points, escaped, EscapeParams, OrbitStatus, Pt2};
use crate::error::{Error, Result};
use crate::poly::{c, iterate_d, preimages, roots, Poly1, SkewProduct, C64, COMPOSE_CAP, ROOT_TOL};
use crate::sets::{augment_with_cycles, directed_hausdorff, exact_cycles, fiber_tolerance, sample_base_julia, PointCloud, Tag};

/// Iterations used for postcritical clouds.
pub const PC_ITER: usize = 40;
/// Horizon and tail fraction of accumulation clouds.
pub const ACC_ITER: usize = 20;
pub const ACC_TAIL_FRAC: f64 = 0.5;
/// Tail self-distance that counts as a detected cycle.
pub const CYCLE_TOL: f64 = 1e-6;
pub const MAX_CYCLE_PERIOD: usize = 64;
/// Fewer postcritical samples than this gives an inconclusive verdict.
pub const MIN_PC_SAMPLES: usize = 1000;
pub const DEFAULT_MARGIN: f64 = 1e-2;

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

// ---------------------------------------------------------------------------
// one-dimensional hyperbolicity

/// Where a critical orbit goes.
#[derive(Clone, Debug, PartialEq)]
pub enum CritFate {
    Escaped(usize),
    /// Converges to a cycle of `period` steps with |multiplier| < 1.
    Attracted { period: usize, multiplier: C64, cycle: Vec<C64> },
    /// No attracting cycle found; carries the multiplier of a detected non-attracting cycle.
    Undetermined { multiplier: Option<C64> },
}

impl CritFate {
    /// 1 for escaping orbits, `1 - |multiplier|` otherwise.
    pub fn margin(&self) -> f64 {
        match self {
            CritFate::Escaped(_) => 1.0,
            CritFate::Attracted { multiplier, .. } => 1.0 - multiplier.norm(),
            CritFate::Undetermined { multiplier } => multiplier.map(|m| (1.0 - m.norm()).min(0.0)).unwrap_or(0.0),
        }
    }

    pub fn passes(&self, margin: f64) -> bool {
        match self {
            CritFate::Escaped(_) => true,
            CritFate::Attracted { multiplier, .. } => multiplier.norm() < 1.0 - margin,
            CritFate::Undetermined { .. } => false,
        }
    }
}

/// Follows `x0` under `step(k, x) -> (x_{k+1}, derivative at x_k)`.
///
/// Cycle periods tried are multiples of `unit` (the period of the driving
/// sequence) up to `MAX_CYCLE_PERIOD * unit`.
pub fn follow_orbit<S>(x0: C64, unit: usize, radius: f64, max_iter: usize, mut step: S) -> CritFate
where
    S: FnMut(usize, C64) -> (C64, C64),
{
    let cap = (2 * MAX_CYCLE_PERIOD * unit + 1).min(max_iter);
    let mut pts: Vec<C64> = Vec::with_capacity(cap + 1);
    let mut ders: Vec<C64> = Vec::with_capacity(cap + 1);
    let mut x = x0;
    for k in 0..max_iter {
        let (nx, dx) = step(k, x);
        if !nx.is_finite() || nx.norm() > radius {
            return CritFate::Escaped(k + 1);
        }
        if k + cap >= max_iter {
            pts.push(x);
            ders.push(dx);
        }
        x = nx;
    }
    let l = pts.len();
    for m in 1..=MAX_CYCLE_PERIOD {
        let per = m * unit;
        if 2 * per > l {
            break;
        }
        if (0..per).all(|j| (pts[l - 1 - j] - pts[l - 1 - j - per]).norm() < CYCLE_TOL) {
            let mult = ders[l - per..].iter().fold(c(1.0, 0.0), |a, b| a * b);
            if mult.norm() < 1.0 {
                return CritFate::Attracted { period: per, multiplier: mult, cycle: pts[l - per..].to_vec() };
            }
            return CritFate::Undetermined { multiplier: Some(mult) };
        }
    }
    CritFate::Undetermined { multiplier: None }
}

/// Critical-orbit hyperbolicity test for a one-variable polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyp1D {
    pub pass: bool,
    pub margin: f64,
    pub fates: Vec<CritFate>,
}

impl Hyp1D {
    /// Distinct attracting cycles reached by critical orbits.
    pub fn attracting_cycles(&self) -> Vec<Vec<C64>> {
        let mut out: Vec<Vec<C64>> = Vec::new();
        for f in &self.fates {
            if let CritFate::Attracted { cycle, .. } = f {
                if !out.iter().any(|cy| cy.iter().any(|y| (y - cycle[0]).norm() < 1e3 * CYCLE_TOL)) {
                    out.push(cycle.clone());
                }
            }
        }
        out
    }
}

/// Every critical orbit of `g` escapes or is attracted to a cycle with
/// multiplier below `1 - margin`.
pub fn hyperbolicity_1d(g: &Poly1, margin: f64) -> Result<Hyp1D> {
    if g.degree() < 2 {
        return Err(Error::Precondition("degree must be >= 2".into()));
    }
    let radius = base_escape_radius(g);
    let crits = roots(&g.derivative(), ROOT_TOL)?;
    let fates: Vec<CritFate> = crits
        .iter()
        .map(|&cp| follow_orbit(cp, 1, radius, crate::engine::MAX_ITER_CLASSIFY, |_, x| g.eval_d(x)))
        .collect();
    let m = fates.iter().map(|f| f.margin()).fold(f64::INFINITY, f64::min);
    Ok(Hyp1D { pass: fates.iter().all(|f| f.passes(margin)), margin: m, fates })
}

// ---------------------------------------------------------------------------
// critical locus and clouds

/// One fiber critical point over a base sample.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalSample {
    pub base_index: usize,
    pub z: C64,
    pub c: C64,
    pub component_id: usize,
    pub status: OrbitStatus,
    pub omega_tail: Vec<Pt2>,
}

/// The sampled critical locus together with its base sample.
#[derive(Clone, Debug)]
pub struct CriticalLocus {
    pub base: PointCloud,
    pub samples: Vec<CriticalSample>,
    pub eps: f64,
    pub params: EscapeParams,
    pub failures: Vec<String>,
}

impl CriticalLocus {
    pub fn component_count(&self) -> usize {
        let mut ids: Vec<usize> = self.samples.iter().map(|s| s.component_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// Component ids whose members are neither all escaping nor all bounded.
    pub fn mixed_components(&self) -> Vec<usize> {
        let mut st: HashMap<usize, (bool, bool)> = HashMap::new();
        for s in &self.samples {
            let e = st.entry(s.component_id).or_default();
            if s.status.is_bounded() {
                e.0 = true;
            } else {
                e.1 = true;
            }
        }
        let mut v: Vec<usize> = st.into_iter().filter(|(_, (b, e))| *b && *e).map(|(k, _)| k).collect();
        v.sort_unstable();
        v
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut i = i;
        while self.0[i] != r {
            let n = self.0[i];
            self.0[i] = r;
            i = n;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Single-linkage labels of points in `C^2` at threshold `eps`.
pub fn single_linkage(points: &[Pt2], eps: f64) -> Vec<usize> {
    let n = points.len();
    let mut uf = UnionFind((0..n).collect());
    if eps > 0.0 && eps.is_finite() {
        let lo: [f64; 4] = [0, 1, 2, 3].map(|a| points.iter().map(|p| coord(p, a)).fold(f64::INFINITY, f64::min));
        let key = |p: &Pt2| -> [i64; 4] { [0, 1, 2, 3].map(|a| ((coord(p, a) - lo[a]) / eps).floor().clamp(-9e15, 9e15) as i64) };
        let mut grid: HashMap<[i64; 4], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            grid.entry(key(p)).or_default().push(i);
        }
        for (i, p) in points.iter().enumerate() {
            let k = key(p);
            for off in 0..81 {
                let mut kk = k;
                let mut t = off;
                for v in kk.iter_mut() {
                    *v += (t % 3) as i64 - 1;
                    t /= 3;
                }
                if let Some(v) = grid.get(&kk) {
                    for &j in v {
                        if j > i && dist4(p, &points[j]) <= eps {
                            uf.union(i, j);
                        }
                    }
                }
            }
        }
    } else {
        let mut seen: HashMap<[u64; 4], usize> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            let k = [p[0].re.to_bits(), p[0].im.to_bits(), p[1].re.to_bits(), p[1].im.to_bits()];
            if let Some(&j) = seen.get(&k) {
                uf.union(i, j);
            } else {
                seen.insert(k, i);
            }
        }
    }
    // relabel roots densely in order of first appearance
    let mut label: HashMap<usize, usize> = HashMap::new();
    (0..n)
        .map(|i| {
            let r = uf.find(i);
            let next = label.len();
            *label.entry(r).or_insert(next)
        })
        .collect()
}

fn coord(p: &Pt2, a: usize) -> f64 {
    match a {
        0 => p[0].re,
        1 => p[0].im,
        2 => p[1].re,
        _ => p[1].im,
    }
}

fn dist4(a: &Pt2, b: &Pt2) -> f64 {
    ((a[0] - b[0]).norm_sqr() + (a[1] - b[1]).norm_sqr()).sqrt()
}

/// Fiber critical points over every base sample, classified and clustered.
///
/// `eps_cluster` defaults to [`fiber_tolerance`] of the base sample.
pub fn critical_locus(f: &SkewProduct, base: &PointCloud, eps_cluster: Option<f64>, params: &EscapeParams, tail_len: usize) -> CriticalLocus {
    let n_iter = params.max_iter;
    let per: Vec<std::result::Result<Vec<CriticalSample>, String>> = (0..base.len())
        .into_par_iter()
        .map(|i| {
            let z = base.points[i][0];
            let cps = roots(&f.fiber_crit_poly(z), ROOT_TOL).map_err(|e| format!("sample {i}: {e}"))?;
            let orbit = base.forward_orbit(&f.p, i, n_iter + 1);
            Ok(cps
                .into_iter()
                .map(|cp| {
                    let rec = classify_orbit_with(f, [z, cp], params, tail_len, |k, _| orbit[k + 1]);
                    CriticalSample { base_index: i, z, c: cp, component_id: 0, status: rec.status, omega_tail: rec.tail }
                })
                .collect())
        })
        .collect();
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for r in per {
        match r {
            Ok(v) => samples.extend(v),
            Err(e) => failures.push(e),
        }
    }
    let cantor = eps_cluster.is_none() && base_is_cantor(&f.p);
    let eps = if cantor { 0.0 } else { eps_cluster.unwrap_or_else(|| fiber_tolerance(base)) };
    if cantor {
        // components of a Cantor base are points, so every sample is its own component
        for (i, s) in samples.iter_mut().enumerate() {
            s.component_id = i;
        }
    } else {
        let pts: Vec<Pt2> = samples.iter().map(|s| [s.z, s.c]).collect();
        for (s, l) in samples.iter_mut().zip(single_linkage(&pts, eps)) {
            s.component_id = l;
        }
    }
    CriticalLocus { base: base.clone(), samples, eps, params: *params, failures }
}

/// Every critical orbit of `p` escapes, so its Julia set is totally disconnected.
pub fn base_is_cantor(p: &Poly1) -> bool {
    hyperbolicity_1d(p, DEFAULT_MARGIN).is_ok_and(|h| h.fates.iter().all(|f| matches!(f, CritFate::Escaped(_))))
}

/// Forward images `f^k(z, c)` for `k` in `from..=n_iter`, stopping at escape.
fn images(f: &SkewProduct, locus: &CriticalLocus, s: &CriticalSample, n_iter: usize, from: usize) -> Vec<Pt2> {
    let orbit = locus.base.forward_orbit(&f.p, s.base_index, n_iter + 1);
    let mut w = s.c;
    let mut out = Vec::new();
    for k in 1..=n_iter {
        w = f.q.eval(orbit[k - 1], w);
        let z = orbit[k];
        if escaped(&locus.params, z, w) {
            break;
        }
        if k >= from {
            out.push([z, w]);
        }
    }
    out
}

/// Union of forward images of the critical locus, pruned at escape.
pub fn postcritical_cloud(f: &SkewProduct, locus: &CriticalLocus, n_iter: usize) -> PointCloud {
    let parts: Vec<Vec<Pt2>> = locus.samples.par_iter().map(|s| images(f, locus, s, n_iter, 1)).collect();
    PointCloud::new2(parts.concat(), Tag::PostCritical)
}

/// Union of the tails of bounded critical orbits.
pub fn apt_cloud(locus: &CriticalLocus) -> PointCloud {
    let pts: Vec<Pt2> = locus.samples.iter().filter(|s| s.status.is_bounded()).flat_map(|s| s.omega_tail.iter().copied()).collect();
    PointCloud::new2(pts, Tag::Apt)
}

/// Per component, forward images of all members over `n_iter` steps, keeping
/// the last `tail_frac` of the iterations. Components without a bounded
/// member escape uniformly and contribute nothing.
pub fn acc_cloud(f: &SkewProduct, locus: &CriticalLocus, n_iter: usize, tail_frac: f64) -> PointCloud {
    let keep = ((tail_frac.clamp(0.0, 1.0) * n_iter as f64).round() as usize).max(1);
    let from = n_iter + 1 - keep.min(n_iter);
    let live: std::collections::HashSet<usize> = locus.samples.iter().filter(|s| s.status.is_bounded()).map(|s| s.component_id).collect();
    let mut order: Vec<usize> = (0..locus.samples.len()).filter(|&i| live.contains(&locus.samples[i].component_id)).collect();
    order.sort_by_key(|&i| (locus.samples[i].component_id, i));
    let parts: Vec<Vec<Pt2>> = order.par_iter().map(|&i| images(f, locus, &locus.samples[i], n_iter, from)).collect();
    PointCloud::new2(parts.concat(), Tag::Acc)
}

/// Preimage selection for backward base orbits.
#[derive(Clone, Debug, PartialEq)]
pub enum BranchPolicy {
    /// Always the preimage nearest to the anchor.
    Toward(C64),
    /// Preimages sorted by (re, im); the k-th step takes index `symbols[k % len]`.
    Symbols(Vec<u8>),
}

/// Backward orbit `z_0 = target, z_1, .., z_depth` with `p(z_{k+1}) = z_k`.
pub fn backward_orbit(p: &Poly1, target: C64, policy: &BranchPolicy, depth: usize, limit: f64) -> Result<Vec<C64>> {
    let mut out = vec![target];
    let mut y = target;
    for k in 0..depth {
        let mut pre = preimages(p, y)?;
        let z = match policy {
            BranchPolicy::Toward(a) => *pre.iter().min_by(|x, y| (*x - a).norm().total_cmp(&(*y - a).norm())).unwrap(),
            BranchPolicy::Symbols(s) => {
                if s.is_empty() {
                    return Err(Error::Precondition("empty symbol sequence".into()));
                }
                pre.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
                let ix = s[k % s.len()] as usize;
                *pre.get(ix).ok_or_else(|| Error::Precondition(format!("branch {ix} out of range")))?
            }
        };
        if !(z.norm() <= limit) {
            return Err(Error::Precondition(format!("backward branch left the base region at step {}", k + 1)));
        }
        out.push(z);
        y = z;
    }
    Ok(out)
}

/// Points `f^k(z_{-k}, c_k)` in the fiber of `z_target` for `depth/2 <= k <= depth`,
/// where `c_k` is the critical point of `q_{z_{-k}}` nearest `c_source.c`.
pub fn acc_full_probe(f: &SkewProduct, z_target: C64, policy: &BranchPolicy, c_source: &CriticalSample, depth: usize, params: &EscapeParams) -> Result<PointCloud> {
    if depth == 0 {
        return Err(Error::Precondition("depth must be >= 1".into()));
    }
    let back = backward_orbit(&f.p, z_target, policy, depth, params.base_radius)?;
    let mut pts = Vec::new();
    for k in depth.div_ceil(2).max(1)..=depth {
        let cps = roots(&f.fiber_crit_poly(back[k]), ROOT_TOL)?;
        let cp = *cps.iter().min_by(|a, b| (*a - c_source.c).norm().total_cmp(&(*b - c_source.c).norm())).unwrap();
        let mut w = cp;
        let mut alive = true;
        for j in (1..=k).rev() {
            w = f.q.eval(back[j], w);
            if escaped(params, back[j - 1], w) {
                alive = false;
                break;
            }
        }
        if alive {
            pts.push([z_target, w]);
        }
    }
    Ok(PointCloud::new2(pts, Tag::Probe))
}

// ---------------------------------------------------------------------------
// saddles

/// A saddle cycle: base repelling, fiber attracting.
#[derive(Clone, Debug, PartialEq)]
pub struct SaddleOrbit {
    pub base_period: usize,
    pub base_point: C64,
    pub fiber_point: C64,
    pub base_multiplier: C64,
    pub vertical_multiplier: C64,
    pub base_residual: f64,
    pub fiber_residual: f64,
}

impl SaddleOrbit {
    /// The `base_period` points of the cycle in `C^2`.
    pub fn cycle_points(&self, f: &SkewProduct) -> Vec<Pt2> {
        let (mut z, mut w) = (self.base_point, self.fiber_point);
        let mut out = Vec::with_capacity(self.base_period);
        for _ in 0..self.base_period {
            out.push([z, w]);
            let (nz, nw) = f.eval(z, w);
            z = nz;
            w = nw;
        }
        out
    }

    /// Least period of the base point.
    pub fn exact_base_period(&self, f: &SkewProduct) -> usize {
        let mut z = self.base_point;
        for m in 1..=self.base_period {
            z = f.p.eval(z);
            if self.base_period % m == 0 && (z - self.base_point).norm() <= 1e-7 * (1.0 + z.norm()) {
                return m;
            }
        }
        self.base_period
    }
}

/// Result of [`find_saddles`]; diagnostics record periods where root finding failed.
#[derive(Clone, Debug, Default)]
pub struct SaddleSearch {
    pub saddles: Vec<SaddleOrbit>,
    pub diagnostics: Vec<String>,
}

/// Composition of the fiber maps along the given base points.
fn compose_along(f: &SkewProduct, zs: &[C64]) -> Poly1 {
    let mut acc = Poly1::monomial(1, c(1.0, 0.0));
    for &z in zs {
        acc = f.fiber_poly(z).compose(&acc);
    }
    acc
}

fn fiber_along_d(f: &SkewProduct, zs: &[C64], w: C64) -> (C64, C64) {
    let mut w = w;
    let mut d = c(1.0, 0.0);
    for &z in zs {
        let (v, dv) = f.fiber_poly(z).eval_d(w);
        d *= dv;
        w = v;
    }
    (w, d)
}

/// Saddle cycles over repelling base cycles of period up to `max_base_period`.
pub fn find_saddles(f: &SkewProduct, max_base_period: usize, tol: f64) -> SaddleSearch {
    let mut out = SaddleSearch::default();
    let d = f.degree;
    let radius = default_escape(f).radius;
    let mut cycles_pts: Vec<Pt2> = Vec::new();
    for n in 1..=max_base_period {
        if (d as f64).powi(n as i32) > COMPOSE_CAP as f64 {
            out.diagnostics.push(format!("period {n}: degree exceeds the composition cap"));
            break;
        }
        for m in (1..=n).filter(|m| n % m == 0) {
            let cycles = match exact_cycles(&f.p, m) {
                Ok(c) => c,
                Err(e) => {
                    out.diagnostics.push(format!("base period {m}: {e}"));
                    continue;
                }
            };
            for cy in cycles {
                let z0 = cy[0];
                let (bz, bmul) = iterate_d(&f.p, z0, n);
                if bmul.norm() <= 1.0 + tol {
                    continue;
                }
                // base orbit over n steps, taken from the cycle
                let zs: Vec<C64> = (0..n).map(|k| cy[k % m]).collect();
                // no bounded fiber critical orbit along the cycle means no attracting cycle
                let any_bounded = zs.iter().enumerate().any(|(k0, &zk)| {
                    roots(&f.fiber_crit_poly(zk), ROOT_TOL).map(|cps| {
                        cps.iter().any(|&cp| {
                            let mut w = cp;
                            for j in 0..400 * n {
                                w = f.fiber_poly(zs[(k0 + j) % n]).eval(w);
                                if !(w.norm() <= radius) {
                                    return false;
                                }
                            }
                            true
                        })
                    })
                    .unwrap_or(true)
                });
                if !any_bounded {
                    continue;
                }
                let qn = compose_along(f, &zs);
                let g = qn.sub(&Poly1::monomial(1, c(1.0, 0.0)));
                let ws = match roots(&g, 1e-8) {
                    Ok(w) => w,
                    Err(e) => {
                        out.diagnostics.push(format!("period {n} over {z0}: {e}"));
                        continue;
                    }
                };
                for w0 in ws {
                    let mut w = w0;
                    for _ in 0..30 {
                        let (v, dv) = fiber_along_d(f, &zs, w);
                        let den = dv - c(1.0, 0.0);
                        if den.norm() == 0.0 {
                            break;
                        }
                        let st = (v - w) / den;
                        w -= st;
                        if st.norm() <= 1e-15 * (1.0 + w.norm()) {
                            break;
                        }
                    }
                    let (v, dv) = fiber_along_d(f, &zs, w);
                    if dv.norm() >= 1.0 - tol {
                        continue;
                    }
                    if cycles_pts.iter().any(|p| (p[0] - z0).norm() < 1e-7 * (1.0 + z0.norm()) && (p[1] - w).norm() < 1e-7 * (1.0 + w.norm())) {
                        continue;
                    }
                    let s = SaddleOrbit {
                        base_period: n,
                        base_point: z0,
                        fiber_point: w,
                        base_multiplier: bmul,
                        vertical_multiplier: dv,
                        base_residual: (bz - z0).norm(),
                        fiber_residual: (v - w).norm(),
                    };
                    // record the whole cycle for de-duplication
                    let mut ww = w;
                    for k in 0..n {
                        cycles_pts.push([zs[k], ww]);
                        ww = f.fiber_poly(zs[k]).eval(ww);
                    }
                    out.saddles.push(s);
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// certification

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClauseResult {
    pub pass: bool,
    pub margin: f64,
}

impl ClauseResult {
    fn to_json(self) -> Value {
        json!({ "pass": self.pass, "margin": finite_or_null(self.margin) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clause {
    I,
    II,
    III,
    IV,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    CertifiedC2,
    CertifiedP2,
    Failed(Clause),
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::CertifiedC2 => write!(f, "Certified-C2"),
            Verdict::CertifiedP2 => write!(f, "Certified-P2"),
            Verdict::Failed(c) => write!(
                f,
                "Failed({})",
                match c {
                    Clause::I => "i",
                    Clause::II => "ii",
                    Clause::III => "iii",
                    Clause::IV => "iv",
                }
            ),
            Verdict::Inconclusive => write!(f, "Inconclusive"),
        }
    }
}

impl Verdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::CertifiedC2 | Verdict::CertifiedP2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificationReport {
    pub base_hyperbolic: ClauseResult,
    pub vexp_jp: ClauseResult,
    pub vexp_ap: ClauseResult,
    pub infinity_hyperbolic: ClauseResult,
    pub verdict: Verdict,
    pub base_samples: usize,
    pub j2_samples: usize,
    pub postcritical_samples: usize,
    pub base_seed: Option<u64>,
    pub j2_seed: Option<u64>,
}

impl CertificationReport {
    pub fn to_json(&self) -> Value {
        json!({
            "clauses": {
                "i": self.base_hyperbolic.to_json(),
                "ii": self.vexp_jp.to_json(),
                "iii": self.vexp_ap.to_json(),
                "iv": self.infinity_hyperbolic.to_json(),
            },
            "verdict": self.verdict.to_string(),
            "sample_counts": {
                "base": self.base_samples,
                "j2": self.j2_samples,
                "postcritical": self.postcritical_samples,
            },
            "seeds": { "base": self.base_seed, "j2": self.j2_seed },
        })
    }
}

/// Distance on `C x P^1` used for fiber comparisons: Euclidean in the base,
/// chordal in the fiber.
pub fn fibered_distance(a: &Pt2, b: &Pt2) -> f64 {
    (a[0] - b[0]).norm().hypot(chordal(a[1], b[1]))
}

/// Smallest [`fibered_distance`] from a point of `from` to a point of `to`.
/// `window` is the first base search radius; it widens when nothing closer is found.
pub fn min_fibered_distance(from: &PointCloud, to: &PointCloud, window: f64) -> f64 {
    if from.is_empty() || to.is_empty() {
        return f64::INFINITY;
    }
    let mut sorted: Vec<Pt2> = to.points.clone();
    sorted.sort_by(|a, b| a[0].re.total_cmp(&b[0].re));
    let res: Vec<f64> = sorted.iter().map(|p| p[0].re).collect();
    let scan = |p: &Pt2, w: f64| -> f64 {
        let lo = res.partition_point(|&x| x < p[0].re - w);
        let mut best = f64::INFINITY;
        for q in &sorted[lo..] {
            if q[0].re > p[0].re + w.min(best) {
                break;
            }
            best = best.min(fibered_distance(p, q));
        }
        best
    };
    let w0 = if window > 0.0 && window.is_finite() { window } else { 1.0 };
    from.points
        .par_iter()
        .map(|p| {
            let mut w = w0;
            loop {
                let b = scan(p, w);
                // every point outside the window is farther than `w`
                if b <= w || w > 1e300 {
                    return b;
                }
                w = if b.is_finite() { b } else { w * 16.0 };
            }
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Four-clause Axiom A test.
pub fn certify_axiom_a(f: &SkewProduct, base: &PointCloud, j2: &PointCloud, margin: f64) -> Result<CertificationReport> {
    if !(margin > 0.0) {
        return Err(Error::Precondition("margin must be positive".into()));
    }
    if base.is_empty() || j2.is_empty() {
        return Err(Error::Precondition("empty base or J2 sample".into()));
    }
    // (i) base polynomial
    let hp = hyperbolicity_1d(&f.p, margin)?;
    let c1 = ClauseResult { pass: hp.pass, margin: hp.margin };

    // (ii) postcritical set over J_p versus J_2
    let params = escape_over_points(f, &base.firsts());
    let locus = critical_locus(f, base, None, &params, crate::engine::TAIL_LEN);
    let pc = postcritical_cloud(f, &locus, PC_ITER);
    let pc_count = locus.samples.len() * PC_ITER;
    let tau = fiber_tolerance(base);
    let dist = min_fibered_distance(&pc, j2, tau);
    let c2 = ClauseResult { pass: dist > margin, margin: dist };

    // (iii) fibers over attracting base cycles, which lie off the base Julia set
    let wide = default_escape(f);
    let mut m3 = f64::INFINITY;
    let mut pass3 = true;
    for cy in hp.attracting_cycles() {
        let per = cy.len();
        let fibs: Vec<Poly1> = cy.iter().map(|&z| f.fiber_poly(z)).collect();
        for k0 in 0..per {
            let cps = roots(&f.fiber_crit_poly(cy[k0]), ROOT_TOL)?;
            for cp in cps {
                let fate = follow_orbit(cp, per, wide.radius, crate::engine::MAX_ITER_CLASSIFY, |k, w| fibs[(k0 + k) % per].eval_d(w));
                m3 = m3.min(fate.margin());
                pass3 &= fate.passes(margin);
            }
        }
    }
    let c3 = ClauseResult { pass: pass3, margin: m3 };

    // (iv) the map on the line at infinity
    let hi = hyperbolicity_1d(&f.map_at_infinity(), margin)?;
    let c4 = ClauseResult { pass: hi.pass, margin: hi.margin };

    let verdict = if pc_count < MIN_PC_SAMPLES {
        Verdict::Inconclusive
    } else if !c1.pass {
        Verdict::Failed(Clause::I)
    } else if !c2.pass {
        Verdict::Failed(Clause::II)
    } else if !c3.pass {
        Verdict::Failed(Clause::III)
    } else if c4.pass {
        Verdict::CertifiedP2
    } else {
        Verdict::CertifiedC2
    };
    Ok(CertificationReport {
        base_hyperbolic: c1,
        vexp_jp: c2,
        vexp_ap: c3,
        infinity_hyperbolic: c4,
        verdict,
        base_samples: base.len(),
        j2_samples: j2.len(),
        postcritical_samples: pc_count,
        base_seed: base.seed,
        j2_seed: j2.seed,
    })
}

// ---------------------------------------------------------------------------
// trapping

#[derive(Clone, Debug, PartialEq)]
pub struct TrappingReport {
    pub pass: bool,
    /// Smallest iterate that maps the neighbourhood into half its radius.
    pub m: Option<usize>,
    pub worst_ratio: f64,
    pub distance_to_j2: f64,
    pub r: f64,
    pub samples: usize,
}

impl TrappingReport {
    pub fn to_json(&self) -> Value {
        json!({
            "pass": self.pass,
            "m": self.m,
            "worst_ratio": finite_or_null(self.worst_ratio),
            "distance_to_j2": finite_or_null(self.distance_to_j2),
            "r": self.r,
            "samples": self.samples,
        })
    }
}

/// Point at chordal distance `r` from `w` in direction `theta`.
fn chordal_circle_point(w: C64, r: f64, theta: f64) -> C64 {
    let dir = C64::from_polar(1.0, theta);
    let mut hi = 1e-6 * (1.0 + w.norm());
    while chordal(w, w + dir * hi) < r {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if chordal(w, w + dir * mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    w + dir * (0.5 * (lo + hi))
}

/// Base tolerance used to match image fibers.
pub const TRAP_BASE_TOL: f64 = 1e-8;

/// Checks that some `f^m`, `m <= m_max`, maps the chordal `r`-neighbourhood of
/// `t_cloud` (in each fiber) into its `r/2`-neighbourhood.
pub fn verify_trapping(f: &SkewProduct, t_cloud: &PointCloud, j2: &PointCloud, r: f64, m_max: usize) -> Result<TrappingReport> {
    if t_cloud.is_empty() || j2.is_empty() {
        return Err(Error::Precondition("empty cloud".into()));
    }
    let dist = t_cloud
        .points
        .par_iter()
        .map(|a| j2.points.iter().map(|b| chordal2(a, b)).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min);
    if dist <= r {
        return Err(Error::Precondition(format!("cloud is within chordal distance {dist:.3e} <= r of J2")));
    }
    // fibers of the cloud, keyed on a coarse base grid
    let key = |z: C64| ((z.re / 1e-6).floor() as i64, (z.im / 1e-6).floor() as i64);
    let mut fibers: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in t_cloud.points.iter().enumerate() {
        fibers.entry(key(p[0])).or_default().push(i);
    }
    let nearest_in_fiber = |z: C64, w: C64| -> f64 {
        let (a, b) = key(z);
        let mut best = f64::INFINITY;
        for da in -1..=1 {
            for db in -1..=1 {
                if let Some(v) = fibers.get(&(a + da, b + db)) {
                    for &i in v {
                        let p = t_cloud.points[i];
                        if (p[0] - z).norm() <= TRAP_BASE_TOL * (1.0 + z.norm()) {
                            best = best.min(chordal(p[1], w));
                        }
                    }
                }
            }
        }
        best
    };
    let params = default_escape(f);
    const SAMPLES: usize = 32;
    let orbits: Vec<Vec<C64>> = t_cloud.points.par_iter().map(|p| crate::sets::base_orbit(&f.p, p[0], m_max + 1)).collect();
    let mut cur: Vec<(usize, Pt2)> = t_cloud
        .points
        .iter()
        .enumerate()
        .flat_map(|(i, p)| (0..SAMPLES).map(move |k| (i, [p[0], chordal_circle_point(p[1], r, std::f64::consts::TAU * k as f64 / SAMPLES as f64)])))
        .collect();
    let total = cur.len();
    // images of the cloud points themselves belong to the invariant set
    let mut t_img: Vec<C64> = t_cloud.points.iter().map(|p| p[1]).collect();
    let mut best = f64::INFINITY;
    for m in 1..=m_max {
        t_img.par_iter_mut().enumerate().for_each(|(i, w)| *w = f.q.eval(orbits[i][m - 1], *w));
        cur.par_iter_mut().for_each(|(i, x)| {
            let w = f.q.eval(orbits[*i][m - 1], x[1]);
            *x = [orbits[*i][m], w];
        });
        let worst = cur
            .par_iter()
            .map(|(i, x)| {
                if escaped(&params, x[0], x[1]) {
                    f64::INFINITY
                } else {
                    nearest_in_fiber(x[0], x[1]).min(chordal(t_img[*i], x[1])) / r
                }
            })
            .reduce(|| 0.0, f64::max);
        best = best.min(worst);
        if worst < 0.5 {
            return Ok(TrappingReport { pass: true, m: Some(m), worst_ratio: worst, distance_to_j2: dist, r, samples: total });
        }
    }
    Ok(TrappingReport { pass: false, m: None, worst_ratio: best, distance_to_j2: dist, r, samples: total })
}

// ---------------------------------------------------------------------------
// accumulation chain

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    AllEmpty,
    AllEqualNonempty,
    AptNeqAcc,
    AccNeqA,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::AllEmpty => "AllEmpty",
            Regime::AllEqualNonempty => "AllEqualNonempty",
            Regime::AptNeqAcc => "AptNeqAcc",
            Regime::AccNeqA => "AccNeqA",
        };
        write!(f, "{s}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    pub n_base: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tail_len: usize,
    pub acc_iter: usize,
    pub acc_tail_frac: f64,
    pub probe_depth: usize,
    pub n_targets: usize,
    pub max_cycle_period: usize,
    pub approach_depth: usize,
    /// Distances above this separate two clouds.
    pub eq_tol: f64,
    pub asym_factor: f64,
    pub asym_floor: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_base: 3000,
            seed: 7,
            max_iter: crate::engine::MAX_ITER_CLASSIFY,
            tail_len: crate::engine::TAIL_LEN,
            acc_iter: ACC_ITER,
            acc_tail_frac: ACC_TAIL_FRAC,
            probe_depth: 40,
            n_targets: 8,
            max_cycle_period: 3,
            approach_depth: 40,
            eq_tol: 0.1,
            asym_factor: 10.0,
            asym_floor: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSummary {
    pub target: C64,
    pub anchor: C64,
    pub points: usize,
    /// Largest distance from a probe point to the accumulation cloud in the
    /// same fiber; `None` if the probe produced no bounded points.
    pub gap: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ChainReport {
    pub regime: Regime,
    pub apt: PointCloud,
    pub acc: PointCloud,
    pub probe: PointCloud,
    pub d_apt_to_acc: Option<f64>,
    pub d_acc_to_apt: Option<f64>,
    pub max_probe_gap: Option<f64>,
    pub fiber_tolerance: f64,
    pub probes: Vec<ProbeSummary>,
    pub config: ChainConfig,
}

fn opt_json(x: Option<f64>) -> Value {
    x.map(finite_or_null).unwrap_or(Value::Null)
}

impl ChainReport {
    pub fn to_json(&self) -> Value {
        json!({
            "regime": self.regime.to_string(),
            "counts": { "apt": self.apt.len(), "acc": self.acc.len(), "probe": self.probe.len() },
            "distances": {
                "apt_to_acc": opt_json(self.d_apt_to_acc),
                "acc_to_apt": opt_json(self.d_acc_to_apt),
                "max_probe_gap": opt_json(self.max_probe_gap),
                "fiber_tolerance": self.fiber_tolerance,
            },
            "thresholds": {
                "eq_tol": self.config.eq_tol,
                "asym_factor": self.config.asym_factor,
                "asym_floor": self.config.asym_floor,
            },
            "probes": self.probes.iter().map(|p| json!({
                "target": [p.target.re, p.target.im],
                "anchor": [p.anchor.re, p.anchor.im],
                "points": p.points,
                "gap": opt_json(p.gap),
            })).collect::<Vec<_>>(),
            "seed": self.config.seed,
            "n_base": self.config.n_base,
        })
    }
}

/// Largest fiber gap between `probe` points (all over `target`) and `acc`
/// points whose base lies within `tau` of `target`.
pub fn probe_gap(probe: &PointCloud, acc: &PointCloud, target: C64, tau: f64) -> Option<f64> {
    if probe.is_empty() {
        return None;
    }
    let tau = tau.max(1e-12 * (1.0 + target.norm()));
    let fiber: Vec<C64> = acc.points.iter().filter(|p| (p[0] - target).norm() <= tau).map(|p| p[1]).collect();
    Some(
        probe
            .points
            .iter()
            .map(|p| fiber.iter().map(|w| (w - p[1]).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max),
    )
}

/// Samples the accumulation clouds and classifies the chain of inclusions.
pub fn chain_analysis(f: &SkewProduct, cfg: &ChainConfig) -> Result<ChainReport> {
    let base0 = sample_base_julia(&f.p, cfg.n_base, cfg.seed)?;
    let base = augment_with_cycles(&f.p, &base0, cfg.max_cycle_period, cfg.approach_depth)?;
    let params = escape_over_points(f, &base.firsts()).with_max_iter(cfg.max_iter);
    let locus = critical_locus(f, &base, None, &params, cfg.tail_len);
    let apt = apt_cloud(&locus);
    let acc = acc_cloud(f, &locus, cfg.acc_iter, cfg.acc_tail_frac);
    let tau = fiber_tolerance(&base);

    // anchors: repelling fixed points carrying a bounded critical orbit
    let mut anchors: Vec<(C64, CriticalSample)> = Vec::new();
    for cy in exact_cycles(&f.p, 1)? {
        let z = cy[0];
        if f.p.derivative().eval(z).norm() <= 1.0 {
            continue;
        }
        if let Some(s) = locus.samples.iter().find(|s| s.status.is_bounded() && (s.z - z).norm() <= 1e-12 * (1.0 + z.norm())) {
            anchors.push((z, s.clone()));
        }
    }
    let mut probes = Vec::new();
    let mut probe_pts = Vec::new();
    // targets at evenly spaced chain positions, keeping distinct fibers
    let nb = base0.len();
    let mut targets: Vec<C64> = Vec::new();
    let slots = 8 * cfg.n_targets;
    for t in 0..slots {
        if targets.len() >= cfg.n_targets {
            break;
        }
        let z = base0.points[(t * 7 % slots + 1) * nb / (slots + 1)][0];
        if targets.iter().all(|&y| (y - z).norm() > tau.max(1e-12 * (1.0 + z.norm()))) {
            targets.push(z);
        }
    }
    for &target in &targets {
        for (anchor, src) in &anchors {
            let pc = acc_full_probe(f, target, &BranchPolicy::Toward(*anchor), src, cfg.probe_depth, &params)?;
            let gap = probe_gap(&pc, &acc, target, tau);
            probes.push(ProbeSummary { target, anchor: *anchor, points: pc.len(), gap });
            probe_pts.extend(pc.points);
        }
    }
    let probe = PointCloud::new2(probe_pts, Tag::Probe);

    let (d_pa, d_ap) = match (apt.is_empty(), acc.is_empty()) {
        (false, false) => (Some(directed_hausdorff(&apt, &acc)?), Some(directed_hausdorff(&acc, &apt)?)),
        (true, false) => (None, Some(f64::INFINITY)),
        (false, true) => (Some(f64::INFINITY), None),
        (true, true) => (None, None),
    };
    let max_gap = probes.iter().filter_map(|p| p.gap).fold(None, |a: Option<f64>, g| Some(a.map_or(g, |x| x.max(g))));
    let regime = if apt.is_empty() && acc.is_empty() && probe.is_empty() {
        Regime::AllEmpty
    } else if let Some(dap) = d_ap.filter(|&dap| dap > cfg.eq_tol && dap > cfg.asym_factor * d_pa.unwrap_or(0.0).max(cfg.asym_floor)) {
        let _ = dap;
        Regime::AptNeqAcc
    } else if max_gap.is_some_and(|g| g > cfg.eq_tol) {
        Regime::AccNeqA
    } else {
        Regime::AllEqualNonempty
    };
    Ok(ChainReport {
        regime,
        apt,
        acc,
        probe,
        d_apt_to_acc: d_pa,
        d_acc_to_apt: d_ap,
        max_probe_gap: max_gap,
        fiber_tolerance: tau,
        probes,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly2;

    fn fa(a: f64) -> SkewProduct {
        SkewProduct::new(Poly1::from_real(&[0.0, 0.0, 1.0]), Poly2::from_terms(&[(0, 2, c(1.0, 0.0)), (1, 0, c(a, 0.0))])).unwrap()
    }

    #[test]
    fn basilica_is_hyperbolic_parabolic_is_not() {
        let h = hyperbolicity_1d(&Poly1::from_real(&[-1.0, 0.0, 1.0]), 0.01).unwrap();
        assert!(h.pass);
        assert!((h.margin - 1.0).abs() < 1e-12);
        let h = hyperbolicity_1d(&Poly1::from_real(&[0.25, 0.0, 1.0]), 0.01).unwrap();
        assert!(!h.pass);
        let h = hyperbolicity_1d(&Poly1::from_real(&[2.0, 0.0, 1.0]), 0.01).unwrap();
        assert!(h.pass && matches!(h.fates[0], CritFate::Escaped(_)));
    }

    #[test]
    fn fa_saddle_two_cycle() {
        let s = find_saddles(&fa(-1.0), 2, 1e-9);
        let hit = s.saddles.iter().find(|s| (s.base_point - c(1.0, 0.0)).norm() < 1e-9).expect("saddle over z = 1");
        assert_eq!(hit.base_period, 2);
        assert!(hit.vertical_multiplier.norm() < 1e-9);
        let pts = hit.cycle_points(&fa(-1.0));
        assert!(pts.iter().any(|p| p[1].norm() < 1e-9) && pts.iter().any(|p| (p[1] + 1.0).norm() < 1e-9));
    }

    #[test]
    fn linkage_groups_close_points() {
        let pts = vec![[c(0.0, 0.0), c(0.0, 0.0)], [c(0.05, 0.0), c(0.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        assert_eq!(single_linkage(&pts, 0.1), vec![0, 0, 1]);
        assert_eq!(single_linkage(&pts, 0.0), vec![0, 1, 2]);
    }
}
