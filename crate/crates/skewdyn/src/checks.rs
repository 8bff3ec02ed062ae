//! Numerical checks of the estimates behind the airplane and two-piece
//! constructions, and of the trapping property.

use serde_json::{json, Value};

use crate::critpost::{critical_locus, find_saddles, postcritical_cloud, verify_trapping, PC_ITER};
use crate::engine::{escape_over_points, TAIL_LEN};
use crate::error::{Error, Result};
use crate::families::{annulus_clause, beta_of, build_s1s2, make_airplane_skew, make_fa};
use crate::poly::{c, parse_poly1, Poly1, SkewProduct, C64};
use crate::sets::{assemble_j2, fiber_julia_pullback, sample_base_julia, PointCloud, Tag};

/// Names accepted by [`run_check`].
pub const CHECKS: [&str; 9] = [
    "box-bound",
    "escape-ring",
    "return-time",
    "strip-escape",
    "box-self-map",
    "box-avoidance",
    "s1s2-constants",
    "s1s2-bounds",
    "trapping",
];

/// Half-width of the square around `2` excluded from the return-time checks.
pub const NEAR_TWO: f64 = 1.0 / 16.0;
/// Height of the invariant box `[-1/4, 1/4] x [-h, h]`.
pub const BOX_HEIGHT: f64 = 0.2;
pub const BOX_HALF_WIDTH: f64 = 0.25;
/// Radius of the fiber escape ring in the airplane family.
pub const RING: f64 = 3.5;
const RETURN_CAP: usize = 500;

#[derive(Clone, Debug)]
pub struct CheckOptions {
    /// Period of the airplane base.
    pub n: usize,
    /// Sample count for fiber-level sampling.
    pub samples: usize,
    /// Base sample count for orbit-level checks.
    pub base_samples: usize,
    pub seed: u64,
    pub s1: String,
    pub s2: String,
    pub k1: usize,
    pub k2: usize,
    /// Trapping: neighbourhood radius, iterate cap and which cloud.
    pub trap_r: f64,
    pub trap_m_max: usize,
    pub trap_cloud: TrapCloud,
    pub trap_a: C64,
    /// Height of the box in the self-map and avoidance checks.
    pub box_height: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrapCloud {
    Saddles,
    Postcritical,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            n: 6,
            samples: 10_000,
            base_samples: 1000,
            seed: 7,
            s1: "w^2".into(),
            s2: "w^2-1".into(),
            k1: 1,
            k2: 1,
            trap_r: 0.1,
            trap_m_max: 50,
            trap_cloud: TrapCloud::Saddles,
            trap_a: c(-1.0, 0.0),
            box_height: BOX_HEIGHT,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    /// Positive when the check passes with room to spare.
    pub margin: f64,
    pub details: Value,
}

impl CheckReport {
    pub fn to_json(&self) -> Value {
        json!({
            "check": self.name,
            "pass": self.pass,
            "margin": if self.margin.is_finite() { json!(self.margin) } else { Value::Null },
            "details": self.details,
        })
    }
}

fn report(name: &str, margin: f64, details: Value) -> CheckReport {
    CheckReport { name: name.into(), pass: margin > 0.0, margin, details }
}

pub fn run_check(name: &str, opts: &CheckOptions) -> Result<CheckReport> {
    match name {
        "box-bound" => box_bound(opts),
        "escape-ring" => escape_ring(opts),
        "return-time" => return_time(opts).map(|(r, _)| r),
        "strip-escape" => strip_escape(opts),
        "box-self-map" => box_self_map(opts),
        "box-avoidance" => box_avoidance(opts),
        "s1s2-constants" => s1s2_constants(opts),
        "s1s2-bounds" => s1s2_bounds(opts),
        "trapping" => trapping(opts),
        other => Err(Error::Parse(format!("unknown check '{other}'; expected one of {}", CHECKS.join(", ")))),
    }
}

fn airplane(opts: &CheckOptions) -> Result<SkewProduct> {
    make_airplane_skew(opts.n)
}

fn near_two(z: C64) -> bool {
    (z.re - 2.0).abs() <= NEAR_TWO && z.im.abs() <= NEAR_TWO
}

/// `K_p` lies in `[-2, 2] x [-eps, eps]` with `eps < 1/4`.
pub fn box_bound(opts: &CheckOptions) -> Result<CheckReport> {
    let f = airplane(opts)?;
    let base = sample_base_julia(&f.p, opts.samples, opts.seed)?;
    let zs = base.firsts();
    let eps = zs.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let re_max = zs.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let margin = (0.25 - eps).min(2.0 + 1e-9 - re_max);
    Ok(report("box-bound", margin, json!({"n": opts.n, "eps": eps, "re_max": re_max, "samples": zs.len()})))
}

/// `|w| >= 3.5` gives `|q_z(w)| >= 3.75` and `|q_z(w)| >= 15|w|/14` over `K_p`.
pub fn escape_ring(opts: &CheckOptions) -> Result<CheckReport> {
    let f = airplane(opts)?;
    let base = sample_base_julia(&f.p, opts.samples, opts.seed)?;
    const ANGLES: usize = 64;
    let (mut min_abs, mut min_ratio) = (f64::INFINITY, f64::INFINITY);
    for z in base.firsts() {
        let q = f.fiber_poly(z);
        for rad in [RING, 1.5 * RING, 2.0 * RING, 8.0 * RING] {
            for k in 0..ANGLES {
                let w = C64::from_polar(rad, std::f64::consts::TAU * k as f64 / ANGLES as f64);
                let v = q.eval(w).norm();
                if rad == RING {
                    min_abs = min_abs.min(v);
                }
                min_ratio = min_ratio.min(v / rad);
            }
        }
    }
    let margin = (min_abs - 3.75).min(min_ratio - 15.0 / 14.0);
    Ok(report("escape-ring", margin, json!({"n": opts.n, "min_image_abs": min_abs, "min_ratio": min_ratio, "samples": base.len()})))
}

/// Least `j` with `Re p^j(z) <= 0` for base samples outside the square near `2`.
pub fn return_time(opts: &CheckOptions) -> Result<(CheckReport, Vec<(usize, usize)>)> {
    let f = airplane(opts)?;
    let base = sample_base_julia(&f.p, opts.base_samples, opts.seed)?;
    let mut times = Vec::new();
    let mut worst = 0usize;
    let mut missing = 0usize;
    for i in 0..base.len() {
        if near_two(base.points[i][0]) {
            continue;
        }
        let orbit = base.forward_orbit(&f.p, i, RETURN_CAP + 1);
        match orbit.iter().position(|z| z.re <= 0.0) {
            Some(j) => {
                worst = worst.max(j);
                times.push((i, j));
            }
            None => missing += 1,
        }
    }
    let margin = if missing == 0 && !times.is_empty() { (RETURN_CAP - worst) as f64 } else { -1.0 };
    let r = report("return-time", margin, json!({"n": opts.n, "N": worst, "checked": times.len(), "missing": missing, "cap": RETURN_CAP}));
    Ok((r, times))
}

/// Thin horizontal strips over base points outside the square near `2` leave
/// `D(0, 3.5)` within `N + 1` fiber iterates, `N` from [`return_time`].
pub fn strip_escape(opts: &CheckOptions) -> Result<CheckReport> {
    let f = airplane(opts)?;
    let (rt, times) = return_time(opts)?;
    if !rt.pass {
        return Ok(report("strip-escape", -1.0, json!({"reason": "return time not established"})));
    }
    let n_steps = rt.details["N"].as_u64().unwrap_or(0) as usize + 1;
    let base = sample_base_julia(&f.p, opts.base_samples, opts.seed)?;
    let re_grid: Vec<f64> = (0..=70).map(|k| -RING + 2.0 * RING * k as f64 / 70.0).collect();
    let strip_margin = |delta: f64| -> f64 {
        let mut worst = f64::INFINITY;
        for &(i, _) in &times {
            let orbit = base.forward_orbit(&f.p, i, n_steps + 1);
            for &x in &re_grid {
                for t in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                    let mut w = c(x, t * delta);
                    for z in orbit.iter().take(n_steps) {
                        w = f.fiber_poly(*z).eval(w);
                    }
                    worst = worst.min(w.norm() - RING);
                }
            }
        }
        worst
    };
    let mut delta = 0.1;
    let mut margin = strip_margin(delta);
    while margin <= 0.0 && delta > 1e-4 {
        delta *= 0.5;
        margin = strip_margin(delta);
    }
    Ok(report("strip-escape", margin, json!({"n": opts.n, "delta": delta, "N": n_steps, "checked": times.len()})))
}

fn box_grid(h: f64) -> Vec<C64> {
    let mut out = Vec::new();
    for i in 0..=20 {
        for j in 0..=20 {
            out.push(c(-BOX_HALF_WIDTH + 2.0 * BOX_HALF_WIDTH * i as f64 / 20.0, -h + 2.0 * h * j as f64 / 20.0));
        }
    }
    out
}

/// `q_z` maps the box into its interior for base points in the square near `2`.
pub fn box_self_map(opts: &CheckOptions) -> Result<CheckReport> {
    let f = airplane(opts)?;
    let base = sample_base_julia(&f.p, opts.samples, opts.seed)?;
    let mut zs: Vec<C64> = base.firsts().into_iter().filter(|&z| near_two(z)).collect();
    zs.push(beta_of(&f.p));
    let h = opts.box_height;
    let grid = box_grid(h);
    let mut margin = f64::INFINITY;
    for &z in &zs {
        let q = f.fiber_poly(z);
        for &w in &grid {
            let v = q.eval(w);
            margin = margin.min(BOX_HALF_WIDTH - v.re.abs()).min(h - v.im.abs());
        }
    }
    Ok(report("box-self-map", margin, json!({"n": opts.n, "height": h, "fibers": zs.len()})))
}

/// The box keeps distance more than `0.05` from the fiber Julia set over `beta`.
pub fn box_avoidance(opts: &CheckOptions) -> Result<CheckReport> {
    let f = airplane(opts)?;
    let beta = beta_of(&f.p);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(opts.seed);
    let jb = fiber_julia_pullback(&f, &vec![beta; 41], opts.samples.min(4000), 10.0, &mut rng)?;
    let dist = jb
        .iter()
        .map(|w| (w.re.abs() - BOX_HALF_WIDTH).max(0.0).hypot((w.im.abs() - opts.box_height).max(0.0)))
        .fold(f64::INFINITY, f64::min);
    Ok(report("box-avoidance", dist - 0.05, json!({"n": opts.n, "distance": dist, "height": opts.box_height, "samples": jb.len()})))
}

fn s1s2_parts(opts: &CheckOptions) -> Result<(Poly1, Poly1)> {
    Ok((parse_poly1(&opts.s1)?, parse_poly1(&opts.s2)?))
}

/// Re-verifies every inequality behind the constants found for the two-piece map.
pub fn s1s2_constants(opts: &CheckOptions) -> Result<CheckReport> {
    let (s1, s2) = s1s2_parts(opts)?;
    let (f, k) = build_s1s2(&s1, &s2, opts.k1, opts.k2, opts.seed)?;
    let d = k.d as i32;
    let m = k.m;
    let mut margins = Vec::new();
    margins.push(("growth", m.powi(d) / 18.0 - 2.0 * m));
    for (tag, s) in [("s1", &s1), ("s2", &s2)] {
        // perturbations within 2r keep |t(w)| >= |w|^d / 2 past M
        let tail: f64 = (0..k.d).map(|j| (s.coeff(j).norm() + 2.0 * k.r) * m.powi(j as i32 - d)).sum();
        margins.push((if tag == "s1" { "outer_s1" } else { "outer_s2" }, 0.5 - tail));
        let sup: f64 = (0..=k.d).map(|j| s.coeff(j).norm() * m.powi(j as i32)).sum();
        margins.push((if tag == "s1" { "inner_s1" } else { "inner_s2" }, 1.5 * m.powi(d) - sup));
        let (ok, sep) = annulus_clause(s, m)?;
        margins.push((if tag == "s1" { "annulus_s1" } else { "annulus_s2" }, if ok { sep - 0.05 } else { -1.0 }));
    }
    // base zeros: the disks of radius r around +-R cover p^{-1}(D(0, 2R))
    let mut min_abs = f64::INFINITY;
    for centre in [k.big_r, -k.big_r] {
        for k_ in 0..1000 {
            let z = c(centre, 0.0) + C64::from_polar(k.r, std::f64::consts::TAU * k_ as f64 / 1000.0);
            min_abs = min_abs.min(f.p.eval(z).norm());
        }
    }
    margins.push(("disk_cover", min_abs / (2.0 * k.big_r) - 1.0));
    let margin = margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let by_name: serde_json::Map<String, Value> = margins.iter().map(|(n, v)| (n.to_string(), json!(v))).collect();
    Ok(report("s1s2-constants", margin, json!({"constants": k.to_json(), "margins": by_name})))
}

/// Fiber bounds over the Cantor base: the circle `|w| = 3M` is pushed outward,
/// and over fibers that switch disks `D(0, M)` lands outside `D(0, 3M)`.
pub fn s1s2_bounds(opts: &CheckOptions) -> Result<CheckReport> {
    let (s1, s2) = s1s2_parts(opts)?;
    let (f, k) = build_s1s2(&s1, &s2, opts.k1, opts.k2, opts.seed)?;
    let base = sample_base_julia(&f.p, opts.base_samples, opts.seed)?;
    const ANGLES: usize = 64;
    let (mut ring_ratio, mut cross_min) = (f64::INFINITY, f64::INFINITY);
    let mut crossing = 0usize;
    for z in base.firsts() {
        let q = f.fiber_poly(z);
        for a in 0..ANGLES {
            let w = C64::from_polar(3.0 * k.m, std::f64::consts::TAU * a as f64 / ANGLES as f64);
            ring_ratio = ring_ratio.min(q.eval(w).norm() / w.norm());
        }
        let pz = f.p.eval(z);
        if z.re.signum() != pz.re.signum() {
            crossing += 1;
            for rad in [0.0, 0.25 * k.m, 0.5 * k.m, k.m] {
                for a in 0..ANGLES {
                    let w = C64::from_polar(rad, std::f64::consts::TAU * a as f64 / ANGLES as f64);
                    cross_min = cross_min.min(q.eval(w).norm());
                }
            }
        }
    }
    let cross_margin = if crossing == 0 { -1.0 } else { cross_min / (3.0 * k.m) - 1.0 };
    let margin = (ring_ratio - 1.0).min(cross_margin);
    Ok(report(
        "s1s2-bounds",
        margin,
        json!({"M": k.m, "ring_ratio": ring_ratio, "crossing_fibers": crossing, "crossing_min_abs": cross_min, "samples": base.len()}),
    ))
}

/// Trapping for a saddle or postcritical cloud of `F_a`.
pub fn trapping(opts: &CheckOptions) -> Result<CheckReport> {
    let f = make_fa(opts.trap_a);
    let base0 = sample_base_julia(&f.p, 200, opts.seed)?;
    let j2 = assemble_j2(&f, &base0, 32, 30, 10.0, opts.seed)?;
    let cloud = trap_cloud(&f, opts)?;
    let r = verify_trapping(&f, &cloud, &j2, opts.trap_r, opts.trap_m_max)?;
    let which = match opts.trap_cloud {
        TrapCloud::Saddles => "saddles",
        TrapCloud::Postcritical => "postcritical",
    };
    let margin = if r.pass { 0.5 - r.worst_ratio } else { -1.0 };
    Ok(report("trapping", margin, json!({"cloud": which, "points": cloud.len(), "report": r.to_json()})))
}

/// The cloud `T` handed to the trapping check.
pub fn trap_cloud(f: &SkewProduct, opts: &CheckOptions) -> Result<PointCloud> {
    match opts.trap_cloud {
        TrapCloud::Saddles => {
            let s = find_saddles(f, 2, 1e-9);
            let pts: Vec<_> = s.saddles.iter().flat_map(|o| o.cycle_points(f)).collect();
            Ok(PointCloud::new2(pts, Tag::Custom("saddles".into())))
        }
        TrapCloud::Postcritical => {
            let base = sample_base_julia(&f.p, 100, opts.seed)?;
            let params = escape_over_points(f, &base.firsts()).with_max_iter(PC_ITER);
            let locus = critical_locus(f, &base, None, &params, TAIL_LEN);
            Ok(postcritical_cloud(f, &locus, PC_ITER))
        }
    }
}
