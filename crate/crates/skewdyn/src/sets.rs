//! Samples of dynamical sets: base Julia sets, fiber slices, `J_2`, Hausdorff distances.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::{EscapeParams, Pt2, Rect};
use crate::error::{Error, Result};
use crate::poly::{c, iterate_d, preimages, roots, Poly1, SkewProduct, C64, ROOT_TOL};

/// Burn-in discarded by inverse iteration.
pub const BURN_IN: usize = 100;

/// Backward sequences built toward each cycle point by [`augment_with_cycles`].
pub const APPROACH_STARTS: usize = 4;

/// What a cloud samples.
#[derive(Clone, Debug, PartialEq)]
pub enum Tag {
    Jp,
    Jz(C64),
    J2,
    Lambda,
    PostCritical,
    Apt,
    Acc,
    Probe,
    Custom(String),
}

impl std::fmt::Display for Tag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tag::Jp => write!(f, "Jp"),
            Tag::Jz(z) => write!(f, "Jz({},{})", z.re, z.im),
            Tag::J2 => write!(f, "J2"),
            Tag::Lambda => write!(f, "Lambda"),
            Tag::PostCritical => write!(f, "PostCritical"),
            Tag::Apt => write!(f, "Apt"),
            Tag::Acc => write!(f, "Acc"),
            Tag::Probe => write!(f, "Probe"),
            Tag::Custom(s) => write!(f, "{s}"),
        }
    }
}

/// Forward links of a base sample: `next[i]` indexes `points ++ hidden` and
/// holds the image of entry `i` under `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseLinks {
    pub hidden: Vec<C64>,
    pub next: Vec<u32>,
}

/// Finite sample of a set in `C` (slot 0 of each point) or `C^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub points: Vec<Pt2>,
    pub tag: Tag,
    pub seed: Option<u64>,
    pub links: Option<BaseLinks>,
}

impl PointCloud {
    pub fn new1(points: Vec<C64>, tag: Tag) -> Self {
        PointCloud {
            dim: 1,
            points: points.into_iter().map(|z| [z, C64::new(0.0, 0.0)]).collect(),
            tag,
            seed: None,
            links: None,
        }
    }

    pub fn new2(points: Vec<Pt2>, tag: Tag) -> Self {
        PointCloud { dim: 2, points, tag, seed: None, links: None }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// First coordinates.
    pub fn firsts(&self) -> Vec<C64> {
        self.points.iter().map(|p| p[0]).collect()
    }

    /// Value at link index `k` (a point or a hidden entry).
    fn linked_value(&self, k: usize) -> C64 {
        let n = self.points.len();
        if k < n {
            self.points[k][0]
        } else {
            self.links.as_ref().unwrap().hidden[k - n]
        }
    }

    /// Forward base orbit of entry `i`: `len` values starting at the point itself.
    ///
    /// Follows stored links while they exist, then falls back to [`base_orbit`].
    pub fn forward_orbit(&self, p: &Poly1, i: usize, len: usize) -> Vec<C64> {
        let mut out = Vec::with_capacity(len);
        let mut k = Some(i);
        let mut z = self.points[i][0];
        while out.len() < len {
            out.push(z);
            match (k, &self.links) {
                (Some(ix), Some(l)) => {
                    let nx = l.next[ix];
                    if nx == u32::MAX {
                        let rest = base_orbit(p, z, len - out.len() + 1);
                        out.extend_from_slice(&rest[1..]);
                        break;
                    }
                    k = Some(nx as usize);
                    z = self.linked_value(nx as usize);
                }
                _ => {
                    let rest = base_orbit(p, z, len - out.len() + 1);
                    out.extend_from_slice(&rest[1..]);
                    break;
                }
            }
        }
        out.truncate(len);
        out
    }

    /// CSV with header `re_z,im_z[,re_w,im_w]`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        if self.dim == 1 {
            s.push_str("re_z,im_z\n");
            for p in &self.points {
                let _ = writeln!(s, "{:.16e},{:.16e}", p[0].re, p[0].im);
            }
        } else {
            s.push_str("re_z,im_z,re_w,im_w\n");
            for p in &self.points {
                let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", p[0].re, p[0].im, p[1].re, p[1].im);
            }
        }
        s
    }

    pub fn from_csv(text: &str, tag: Tag) -> Result<PointCloud> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?.trim();
        let dim = match header {
            "re_z,im_z" => 1,
            "re_z,im_z,re_w,im_w" => 2,
            h => return Err(Error::Parse(format!("unknown CSV header `{h}`"))),
        };
        let mut pts = Vec::new();
        for l in lines {
            if l.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = l
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number in `{l}`"))))
                .collect::<Result<_>>()?;
            if v.len() != 2 * dim {
                return Err(Error::Parse(format!("expected {} columns in `{l}`", 2 * dim)));
            }
            let w = if dim == 2 { c(v[2], v[3]) } else { C64::new(0.0, 0.0) };
            pts.push([c(v[0], v[1]), w]);
        }
        Ok(PointCloud { dim, points: pts, tag, seed: None, links: None })
    }
}

/// Forward base orbit of `z` of length `len` (including `z`).
///
/// For the monomial `z^d` on the unit circle the orbit is advanced in angle
/// so it stays on the circle; points that are periodic to 1e-12 repeat their
/// computed cycle; everything else is iterated directly.
pub fn base_orbit(p: &Poly1, z: C64, len: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    let d = p.degree();
    let monomial = p.coeffs()[..d].iter().all(|a| *a == C64::new(0.0, 0.0)) && p.lead() == c(1.0, 0.0);
    if monomial && (z.norm() - 1.0).abs() < 1e-12 {
        let mut t = z.arg() / std::f64::consts::TAU;
        t -= t.floor();
        for _ in 0..len {
            out.push(C64::from_polar(1.0, std::f64::consts::TAU * t));
            t *= d as f64;
            t -= t.floor();
        }
        return out;
    }
    let mut x = z;
    let mut cyc: Vec<C64> = vec![z];
    for m in 1..=12usize {
        x = p.eval(x);
        if (x - z).norm() <= 1e-12 * (1.0 + z.norm()) {
            for k in 0..len {
                out.push(cyc[k % m]);
            }
            return out;
        }
        cyc.push(x);
    }
    let mut x = z;
    for _ in 0..len {
        out.push(x);
        x = p.eval(x);
    }
    out
}

/// Repelling fixed point with the largest multiplier.
pub fn repelling_fixed_point(p: &Poly1) -> Result<C64> {
    let fp = roots(&p.sub(&Poly1::from_real(&[0.0, 1.0])), ROOT_TOL)?;
    fp.into_iter()
        .map(|z| (p.derivative().eval(z).norm(), z))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|x| x.1)
        .ok_or_else(|| Error::Numerical("no fixed point".into()))
}

/// Inverse-iteration sample of `J_p` with stored forward links.
///
/// Entry `i + 1` is a preimage of entry `i`, so the forward orbit of every
/// sample is known exactly up to rounding; it ends at the starting fixed point.
pub fn sample_base_julia(p: &Poly1, n_points: usize, seed: u64) -> Result<PointCloud> {
    if p.degree() < 2 {
        return Err(Error::Precondition("base degree must be >= 2".into()));
    }
    let zeta = repelling_fixed_point(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chain = Vec::with_capacity(BURN_IN + n_points + 1);
    chain.push(zeta);
    let mut x = zeta;
    for _ in 0..BURN_IN + n_points {
        let pre = preimages(p, x)?;
        x = pre[rng.gen_range(0..pre.len())];
        chain.push(x);
    }
    let points: Vec<C64> = chain[BURN_IN + 1..].to_vec();
    let hidden: Vec<C64> = chain[..=BURN_IN].iter().rev().copied().collect();
    let n = points.len();
    let mut next = Vec::with_capacity(n + hidden.len());
    for i in 0..n {
        next.push(if i == 0 { n as u32 } else { (i - 1) as u32 });
    }
    for k in 0..hidden.len() {
        next.push(if k + 1 < hidden.len() { (n + k + 1) as u32 } else { (n + k) as u32 });
    }
    let mut cl = PointCloud::new1(points, Tag::Jp).with_seed(seed);
    cl.links = Some(BaseLinks { hidden, next });
    Ok(cl)
}

/// Cycles of `p` of exact period `n`, each listed in orbit order.
pub fn exact_cycles(p: &Poly1, n: usize) -> Result<Vec<Vec<C64>>> {
    let mut pn = p.clone();
    for _ in 1..n {
        pn = p.compose(&pn);
    }
    let g = pn.sub(&Poly1::from_real(&[0.0, 1.0]));
    let rs = roots(&g, 1e-8)?;
    let mut cycles: Vec<Vec<C64>> = Vec::new();
    let same = |a: C64, b: C64| (a - b).norm() <= 1e-9 * (1.0 + a.norm());
    for r0 in rs {
        let Some(z) = polish_periodic(p, r0, n) else { continue };
        // a point of smaller period is a fixed point of Newton for that period
        let lower = (1..n).filter(|m| n % m == 0).any(|m| polish_periodic(p, z, m).is_some_and(|y| same(y, z)));
        if lower || cycles.iter().any(|cy| cy.iter().any(|&y| same(y, z))) {
            continue;
        }
        let mut cy = vec![z];
        for k in 1..n {
            let guess = p.eval(cy[k - 1]);
            cy.push(polish_periodic(p, guess, n).unwrap_or(guess));
        }
        cycles.push(cy);
    }
    Ok(cycles)
}

/// Newton on `p^n(z) - z`; `None` unless the final step is below `1e-10 (1 + |z|)`.
pub fn polish_periodic(p: &Poly1, z0: C64, n: usize) -> Option<C64> {
    let mut z = z0;
    for _ in 0..40 {
        let (v, dv) = iterate_d(p, z, n);
        let den = dv - c(1.0, 0.0);
        if den.norm() == 0.0 || !v.is_finite() {
            return None;
        }
        let step = (v - z) / den;
        z -= step;
        if step.norm() <= 1e-10 * (1.0 + z.norm()) {
            return z.is_finite().then_some(z);
        }
    }
    None
}

/// Adds repelling cycles of period up to `max_period` (with cyclic links) and,
/// for each cycle point, a backward sequence of length `approach_depth` that
/// converges to it from a sample point.
pub fn augment_with_cycles(p: &Poly1, cloud: &PointCloud, max_period: usize, approach_depth: usize) -> Result<PointCloud> {
    let mut pts: Vec<C64> = cloud.firsts();
    let n0 = pts.len();
    let (hidden, mut next) = match &cloud.links {
        Some(l) => (l.hidden.clone(), l.next.clone()),
        None => (Vec::new(), vec![u32::MAX; n0]),
    };
    // new entries go between the old points and the hidden block
    let mut added: Vec<(C64, Option<usize>)> = Vec::new(); // (value, link to new-entry index or old index)
    enum Link {
        Old(usize),
        New(usize),
    }
    let mut links: Vec<Link> = Vec::new();
    for n in 1..=max_period {
        for cy in exact_cycles(p, n)? {
            let (_, mult) = iterate_d(p, cy[0], n);
            if mult.norm() <= 1.0 + 1e-9 {
                continue;
            }
            let base = added.len();
            for (k, &z) in cy.iter().enumerate() {
                added.push((z, None));
                links.push(Link::New(base + (k + 1) % n));
            }
            if approach_depth == 0 || n0 == 0 {
                continue;
            }
            for k in 0..n {
                for s in 0..APPROACH_STARTS {
                    let start = (n0 / 2 + 7 * (base + k) + s * (n0 / APPROACH_STARTS).max(1)) % n0;
                    let mut y = pts[start];
                    let mut prev = Link::Old(start);
                    for step in 1..=approach_depth {
                        // the preimage closest to the cycle point that maps onto the current one
                        let want = cy[(k + n * approach_depth - step) % n];
                        let pre = preimages(p, y)?;
                        let z = pre.into_iter().min_by(|a, b| (a - want).norm().total_cmp(&(b - want).norm())).unwrap();
                        // stop before the sequence collapses onto the cycle in floating point
                        if (z - want).norm() <= 1e-9 * (1.0 + want.norm()) {
                            break;
                        }
                        added.push((z, None));
                        links.push(prev);
                        prev = Link::New(added.len() - 1);
                        y = z;
                    }
                }
            }
        }
    }
    let na = added.len();
    let shift = |ix: u32| -> u32 {
        if ix == u32::MAX || (ix as usize) < n0 {
            ix
        } else {
            ix + na as u32
        }
    };
    let mut new_next: Vec<u32> = next[..n0].iter().map(|&x| shift(x)).collect();
    for l in &links {
        new_next.push(match l {
            Link::Old(i) => *i as u32,
            Link::New(j) => (n0 + j) as u32,
        });
    }
    new_next.extend(next.drain(n0..).map(shift));
    pts.extend(added.iter().map(|a| a.0));
    let mut out = PointCloud::new1(pts, cloud.tag.clone());
    out.seed = cloud.seed;
    out.links = Some(BaseLinks { hidden, next: new_next });
    Ok(out)
}

/// Escape-time grid over one fiber.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberSlice {
    pub z: C64,
    pub window: Rect,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, row 0 at the top (`im_max`).
    pub bounded: Vec<bool>,
    /// Escape iteration per cell; `max_iter` for bounded cells.
    pub escape_iters: Vec<u32>,
    pub max_iter: usize,
}

impl FiberSlice {
    pub fn cell_width(&self) -> f64 {
        (self.window.width() / self.nx as f64).max(self.window.height() / self.ny as f64)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> C64 {
        let dx = self.window.width() / self.nx as f64;
        let dy = self.window.height() / self.ny as f64;
        c(self.window.re_min + (i as f64 + 0.5) * dx, self.window.im_max - (j as f64 + 0.5) * dy)
    }

    pub fn bounded_count(&self) -> usize {
        self.bounded.iter().filter(|b| **b).count()
    }

    /// Bounded cells with all four neighbours bounded.
    pub fn interior_count(&self) -> usize {
        let mut n = 0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                if self.is_bounded(i as isize, j as isize)
                    && self.is_bounded(i as isize - 1, j as isize)
                    && self.is_bounded(i as isize + 1, j as isize)
                    && self.is_bounded(i as isize, j as isize - 1)
                    && self.is_bounded(i as isize, j as isize + 1)
                {
                    n += 1;
                }
            }
        }
        n
    }

    fn is_bounded(&self, i: isize, j: isize) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.nx && (j as usize) < self.ny && self.bounded[j as usize * self.nx + i as usize]
    }

    /// Centers of bounded cells.
    pub fn bounded_cloud(&self) -> PointCloud {
        let mut pts = Vec::new();
        for j in 0..self.ny {
            for i in 0..self.nx {
                if self.bounded[j * self.nx + i] {
                    pts.push(self.cell_center(i, j));
                }
            }
        }
        PointCloud::new1(pts, Tag::Custom(format!("K({},{})", self.z.re, self.z.im)))
    }

    /// Binary PGM of escape iterations (bounded cells are 0).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.nx, self.ny).into_bytes();
        for (b, &it) in self.bounded.iter().zip(&self.escape_iters) {
            out.push(if *b { 0 } else { 1 + (it % 255) as u8 });
        }
        out
    }

    /// Binary PPM: black for bounded, gray ramp by escape iteration mod 256.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.nx, self.ny).into_bytes();
        for (b, &it) in self.bounded.iter().zip(&self.escape_iters) {
            let v = if *b { 0 } else { palette(it) };
            out.extend_from_slice(&[v, v, v]);
        }
        out
    }
}

/// Fixed gray ramp; index 0 is reserved for bounded cells.
pub fn palette(iter: u32) -> u8 {
    (1 + (iter * 8) % 255) as u8
}

/// Escape-time classification of each cell center in the fiber over `z`.
pub fn fiber_slice(f: &SkewProduct, z: C64, window: &Rect, resolution: (usize, usize), params: &EscapeParams) -> FiberSlice {
    let orbit = base_orbit(&f.p, z, params.max_iter + 1);
    fiber_slice_along(f, &orbit, window, resolution, params)
}

/// As [`fiber_slice`] with an explicit base orbit `orbit[0] = z`.
pub fn fiber_slice_along(f: &SkewProduct, orbit: &[C64], window: &Rect, resolution: (usize, usize), params: &EscapeParams) -> FiberSlice {
    let (nx, ny) = resolution;
    let n = params.max_iter;
    // fiber maps along the base orbit until the base leaves its disk
    let mut fibs: Vec<Poly1> = Vec::with_capacity(n);
    let mut base_escape = n + 1;
    let mut zk = orbit[0];
    for k in 0..n {
        zk = orbit.get(k).copied().unwrap_or_else(|| f.p.eval(zk));
        if !zk.is_finite() || zk.norm() > params.base_radius {
            base_escape = k;
            break;
        }
        fibs.push(f.fiber_poly(zk));
    }
    let r2 = params.radius * params.radius;
    let proto = FiberSlice {
        z: orbit[0],
        window: *window,
        nx,
        ny,
        bounded: vec![],
        escape_iters: vec![],
        max_iter: n,
    };
    let rows: Vec<Vec<(bool, u32)>> = (0..ny)
        .into_par_iter()
        .map(|j| {
            (0..nx)
                .map(|i| {
                    let mut w = proto.cell_center(i, j);
                    if w.norm_sqr() > r2 || base_escape == 0 {
                        return (false, 0);
                    }
                    for (k, fib) in fibs.iter().enumerate() {
                        w = fib.eval(w);
                        if !(w.norm_sqr() <= r2) || k + 1 == base_escape {
                            return (false, (k + 1) as u32);
                        }
                    }
                    (true, n as u32)
                })
                .collect()
        })
        .collect();
    let mut bounded = Vec::with_capacity(nx * ny);
    let mut escape_iters = Vec::with_capacity(nx * ny);
    for row in rows {
        for (b, it) in row {
            bounded.push(b);
            escape_iters.push(it);
        }
    }
    FiberSlice { bounded, escape_iters, ..proto }
}

/// Centers of bounded cells having an escaped 4-neighbour (outside counts as escaped).
pub fn boundary_extract(slice: &FiberSlice) -> PointCloud {
    let mut pts = Vec::new();
    for j in 0..slice.ny {
        for i in 0..slice.nx {
            let (ii, jj) = (i as isize, j as isize);
            if slice.is_bounded(ii, jj)
                && !(slice.is_bounded(ii - 1, jj) && slice.is_bounded(ii + 1, jj) && slice.is_bounded(ii, jj - 1) && slice.is_bounded(ii, jj + 1))
            {
                pts.push(slice.cell_center(i, j));
            }
        }
    }
    PointCloud::new1(pts, Tag::Jz(slice.z))
}

/// Backward pullback sample of the fiber Julia set along a base orbit.
///
/// `orbit[0]` is the target fiber; `orbit.len() - 1` pullback steps are taken
/// from points on the circle `|w| = start_radius` in the last fiber.
pub fn fiber_julia_pullback(f: &SkewProduct, orbit: &[C64], count: usize, start_radius: f64, rng: &mut ChaCha8Rng) -> Result<Vec<C64>> {
    let depth = orbit.len() - 1;
    let fibs: Vec<Poly1> = orbit[..depth].iter().map(|&z| f.fiber_poly(z)).collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut w = C64::from_polar(start_radius, rng.gen::<f64>() * std::f64::consts::TAU);
        for k in (0..depth).rev() {
            let pre = roots(&fibs[k].shifted(w), ROOT_TOL)?;
            w = pre[rng.gen_range(0..pre.len())];
        }
        out.push(w);
    }
    Ok(out)
}

/// Sample of `J_2` by fiber pullbacks over each base sample.
pub fn assemble_j2(f: &SkewProduct, base: &PointCloud, per_fiber_budget: usize, depth: usize, start_radius: f64, seed: u64) -> Result<PointCloud> {
    if base.is_empty() {
        return Err(Error::Precondition("empty base sample".into()));
    }
    let chunks: Vec<Result<Vec<Pt2>>> = (0..base.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let orbit = base.forward_orbit(&f.p, i, depth + 1);
            let ws = fiber_julia_pullback(f, &orbit, per_fiber_budget, start_radius, &mut rng)?;
            Ok(ws.into_iter().map(|w| [orbit[0], w]).collect())
        })
        .collect();
    let mut pts = Vec::new();
    for ch in chunks {
        pts.extend(ch?);
    }
    Ok(PointCloud::new2(pts, Tag::J2).with_seed(seed))
}

/// Uniform-grid nearest-neighbour index over `R^2` or `R^4`.
pub struct SpatialIndex {
    k: usize,
    h: f64,
    lo: [f64; 4],
    cells: HashMap<[i64; 4], Vec<u32>>,
    coords: Vec<[f64; 4]>,
}

fn coords_of(p: &Pt2, dim: usize) -> [f64; 4] {
    if dim == 1 {
        [p[0].re, p[0].im, 0.0, 0.0]
    } else {
        [p[0].re, p[0].im, p[1].re, p[1].im]
    }
}

impl SpatialIndex {
    pub fn new(cloud: &PointCloud) -> Self {
        let k = 2 * cloud.dim;
        let coords: Vec<[f64; 4]> = cloud.points.iter().map(|p| coords_of(p, cloud.dim)).collect();
        let mut lo = [f64::INFINITY; 4];
        let mut hi = [f64::NEG_INFINITY; 4];
        for x in &coords {
            for a in 0..k {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
        }
        let n = coords.len().max(1) as f64;
        let mut vol = 1.0;
        let mut ext_max: f64 = 0.0;
        for a in 0..k {
            let e = (hi[a] - lo[a]).max(0.0);
            ext_max = ext_max.max(e);
            vol *= e.max(1e-12);
        }
        // roughly a few points per occupied cell
        let mut h = (vol / n).powf(1.0 / k as f64) * 2.0;
        if !(h.is_finite() && h > 0.0) {
            h = 1.0;
        }
        h = h.max(ext_max * 1e-6).max(1e-12);
        let mut cells: HashMap<[i64; 4], Vec<u32>> = HashMap::new();
        for (i, x) in coords.iter().enumerate() {
            cells.entry(Self::key_of(x, &lo, h, k)).or_default().push(i as u32);
        }
        SpatialIndex { k, h, lo, cells, coords }
    }

    fn key_of(x: &[f64; 4], lo: &[f64; 4], h: f64, k: usize) -> [i64; 4] {
        let mut key = [0i64; 4];
        for a in 0..k {
            key[a] = ((x[a] - lo[a]) / h).floor() as i64;
        }
        key
    }

    fn dist2(&self, x: &[f64; 4], i: u32) -> f64 {
        let y = &self.coords[i as usize];
        (0..self.k).map(|a| (x[a] - y[a]).powi(2)).sum()
    }

    /// Euclidean distance to the nearest indexed point.
    pub fn nearest(&self, p: &Pt2, dim: usize) -> f64 {
        self.nearest_index(p, dim).map(|x| x.1).unwrap_or(f64::INFINITY)
    }

    /// Index and distance of the nearest indexed point.
    pub fn nearest_index(&self, p: &Pt2, dim: usize) -> Option<(usize, f64)> {
        self.nearest_skipping(p, dim, u32::MAX)
    }

    /// Nearest indexed point other than entry `skip`.
    pub fn nearest_other(&self, i: usize) -> Option<(usize, f64)> {
        let x = self.coords[i];
        let p = [c(x[0], x[1]), c(x[2], x[3])];
        self.nearest_skipping(&p, self.k / 2, i as u32)
    }

    fn nearest_skipping(&self, p: &Pt2, dim: usize, skip: u32) -> Option<(usize, f64)> {
        if self.coords.len() <= usize::from(skip != u32::MAX) {
            return None;
        }
        let x = coords_of(p, dim);
        let key = Self::key_of(&x, &self.lo, self.h, self.k);
        let mut best = (u32::MAX, f64::INFINITY);
        let mut visited = 0usize;
        let mut r: i64 = 0;
        loop {
            let found = self.visit_shell(&key, r, &x, &mut best, &mut visited, skip);
            let _ = found;
            // any point in a shell beyond r is at least r*h away
            if best.0 != u32::MAX && best.1.sqrt() <= r as f64 * self.h {
                break;
            }
            if visited > self.coords.len() || shell_size(self.k, r + 1) > self.coords.len() * 4 {
                for i in 0..self.coords.len() as u32 {
                    if i == skip {
                        continue;
                    }
                    let d = self.dist2(&x, i);
                    if d < best.1 {
                        best = (i, d);
                    }
                }
                break;
            }
            r += 1;
        }
        Some((best.0 as usize, best.1.sqrt()))
    }

    fn visit_shell(&self, key: &[i64; 4], r: i64, x: &[f64; 4], best: &mut (u32, f64), visited: &mut usize, skip: u32) -> bool {
        let k = self.k;
        let mut any = false;
        let span = 2 * r + 1;
        let total = span.pow(k as u32);
        for idx in 0..total {
            let mut off = [0i64; 4];
            let mut t = idx;
            let mut on_shell = false;
            for o in off.iter_mut().take(k) {
                *o = t % span - r;
                t /= span;
                if o.abs() == r {
                    on_shell = true;
                }
            }
            if !on_shell {
                continue;
            }
            let mut kk = *key;
            for a in 0..k {
                kk[a] += off[a];
            }
            if let Some(v) = self.cells.get(&kk) {
                any = true;
                for &i in v {
                    *visited += 1;
                    if i == skip {
                        continue;
                    }
                    let d = self.dist2(x, i);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
        }
        any
    }
}

fn shell_size(k: usize, r: i64) -> usize {
    let span = (2 * r + 1) as usize;
    span.pow(k as u32)
}

/// Nearest-neighbour distance of every point to the rest of its cloud.
pub fn nn_distances(cloud: &PointCloud) -> Vec<f64> {
    let idx = SpatialIndex::new(cloud);
    (0..cloud.len()).into_par_iter().map(|i| idx.nearest_other(i).map(|x| x.1).unwrap_or(0.0)).collect()
}

/// Base distance below which two samples are treated as the same fiber:
/// three times the largest nearest-neighbour spacing of the base sample.
pub fn fiber_tolerance(base: &PointCloud) -> f64 {
    let b = PointCloud::new1(base.firsts(), Tag::Jp);
    3.0 * nn_distances(&b).into_iter().fold(0.0, f64::max)
}

/// `sup_{a in A} dist(a, B)`.
pub fn directed_hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Precondition("Hausdorff distance of an empty cloud".into()));
    }
    if a.dim != b.dim {
        return Err(Error::Precondition("clouds of different dimension".into()));
    }
    let idx = SpatialIndex::new(b);
    Ok(a.points.par_iter().map(|p| idx.nearest(p, a.dim)).reduce(|| 0.0, f64::max))
}

/// Symmetric Hausdorff distance between finite clouds.
pub fn hausdorff_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}

/// Which sets [`continuity_scan`] compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanMode {
    J,
    K,
}

/// One row of a continuity scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub radius: f64,
    pub fibers: usize,
    /// `None` when no base sample lies within the radius.
    pub max_deviation: Option<f64>,
    /// Mode K only: smallest bounded-area ratio against the center fiber.
    pub min_area_ratio: Option<f64>,
}

/// Hausdorff deviation of nearby fibers from the fiber over `z0`.
///
/// Uses up to `per_radius` base samples from `base` inside each radius.
#[allow(clippy::too_many_arguments)]
pub fn continuity_scan(
    f: &SkewProduct,
    z0: C64,
    radii: &[f64],
    mode: ScanMode,
    base: &PointCloud,
    window: &Rect,
    resolution: (usize, usize),
    params: &EscapeParams,
    per_radius: usize,
) -> Vec<ScanRow> {
    let center = fiber_slice(f, z0, window, resolution, params);
    let cloud_of = |s: &FiberSlice| match mode {
        ScanMode::J => boundary_extract(s),
        ScanMode::K => s.bounded_cloud(),
    };
    let c0 = cloud_of(&center);
    let a0 = center.bounded_count().max(1) as f64;
    let mut rows = Vec::new();
    for &r in radii {
        let mut near: Vec<(f64, usize)> = base
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p[0] - z0).norm(), i))
            .filter(|(d, _)| *d <= r && *d > 0.0)
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        near.truncate(per_radius);
        if near.is_empty() {
            rows.push(ScanRow { radius: r, fibers: 0, max_deviation: None, min_area_ratio: None });
            continue;
        }
        let mut dev: f64 = 0.0;
        let mut ratio = f64::INFINITY;
        for &(_, i) in &near {
            let orbit = base.forward_orbit(&f.p, i, params.max_iter + 1);
            let s = fiber_slice_along(f, &orbit, window, resolution, params);
            let cl = cloud_of(&s);
            let d = if cl.is_empty() || c0.is_empty() {
                if cl.is_empty() && c0.is_empty() {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                hausdorff_distance(&cl, &c0).unwrap_or(f64::INFINITY)
            };
            dev = dev.max(d);
            ratio = ratio.min(s.bounded_count() as f64 / a0);
        }
        rows.push(ScanRow {
            radius: r,
            fibers: near.len(),
            max_deviation: Some(dev),
            min_area_ratio: if mode == ScanMode::K { Some(ratio) } else { None },
        });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_orbit_stays_on_circle() {
        let p = Poly1::from_real(&[0.0, 0.0, 1.0]);
        let o = base_orbit(&p, C64::from_polar(1.0, 0.7), 500);
        assert!(o.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert!((o[1] - C64::from_polar(1.0, 1.4)).norm() < 1e-12);
    }

    #[test]
    fn links_give_forward_orbit() {
        let p = Poly1::from_real(&[-1.0, 0.0, 1.0]);
        let cl = sample_base_julia(&p, 50, 3).unwrap();
        for i in [0usize, 10, 49] {
            let o = cl.forward_orbit(&p, i, 200);
            for k in 0..40 {
                assert!((p.eval(o[k]) - o[k + 1]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let cl = PointCloud::new2(vec![[c(1.0, 2.0), c(-0.5, 1e-17)]], Tag::J2);
        let back = PointCloud::from_csv(&cl.to_csv(), Tag::J2).unwrap();
        assert_eq!(back.points, cl.points);
    }

    #[test]
    fn identical_clouds_are_at_distance_zero() {
        let cl = PointCloud::new1((0..100).map(|k| C64::from_polar(1.0, k as f64 * 0.1)).collect(), Tag::Jp);
        assert_eq!(hausdorff_distance(&cl, &cl).unwrap(), 0.0);
    }
}
