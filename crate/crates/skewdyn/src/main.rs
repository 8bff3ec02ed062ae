use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use skewdyn::checks::{run_check, CheckOptions, TrapCloud, CHECKS};
use skewdyn::contin::{continue_orbit, separation_evidence, ParamPath, PathFamily};
use skewdyn::critpost::{certify_axiom_a, chain_analysis, find_saddles, ChainConfig, DEFAULT_MARGIN};
use skewdyn::engine::{default_escape, Rect, MAX_ITER_GRID};
use skewdyn::error::{Error, Result};
use skewdyn::families::{beta_of, build_s1s2, make_fa, make_product, FamilySpec};
use skewdyn::poly::{c, parse_poly1, Poly1, Poly2, SkewProduct, C64};
use skewdyn::sets::{assemble_j2, augment_with_cycles, fiber_julia_pullback, fiber_slice, hausdorff_distance, directed_hausdorff, sample_base_julia, PointCloud, Tag};

#[derive(Parser, Debug)]
#[command(name = "skewdyn", version, about = "Polynomial skew products of C^2", args_override_self = true)]
struct Cli {
    /// File of `key = value` lines; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exit with code 4 when a verdict or check is negative.
    #[arg(long, global = true)]
    strict: bool,
    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct FamilyArgs {
    /// Fa, airplane, s1s2, fig3, product or file.
    #[arg(long)]
    family: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    s1: Option<String>,
    #[arg(long)]
    s2: Option<String>,
    #[arg(long)]
    k1: Option<usize>,
    #[arg(long)]
    k2: Option<usize>,
    /// Base polynomial for `product`.
    #[arg(long)]
    p: Option<String>,
    /// Fiber polynomial for `product`.
    #[arg(long)]
    q: Option<String>,
    /// Map file with `[p]` and `[q]` sections.
    #[arg(long)]
    map_file: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Escape-time images of the base and of fibers.
    Render {
        #[command(flatten)]
        fam: FamilyArgs,
        /// Number of fibers on the circle through the base Julia set.
        #[arg(long)]
        fibers: Option<usize>,
        /// Single fiber: a complex number or `beta`.
        #[arg(long, allow_hyphen_values = true)]
        fiber_at: Option<String>,
        #[arg(long, default_value_t = 512)]
        resolution: usize,
        /// `re_min,re_max,im_min,im_max` for fiber images.
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        base_window: Option<String>,
        #[arg(long, default_value_t = MAX_ITER_GRID)]
        max_iter: usize,
    },
    /// Axiom A certification report.
    Certify {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, default_value_t = 400)]
        base_samples: usize,
        #[arg(long, default_value_t = 32)]
        j2_per_fiber: usize,
        #[arg(long, default_value_t = 30)]
        depth: usize,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
    },
    /// Accumulation-chain regime.
    Chain {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, default_value_t = 3000)]
        n_base: usize,
        #[arg(long, default_value_t = 8)]
        n_targets: usize,
        /// Also write apt/acc/probe clouds as CSV to the output directory.
        #[arg(long)]
        clouds: bool,
    },
    /// Saddle cycles over repelling base cycles.
    Saddles {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, default_value_t = 3)]
        max_period: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Named numerical check.
    VerifyLemma {
        /// One of: box-bound, escape-ring, return-time, strip-escape, box-self-map,
        /// box-avoidance, s1s2-constants, s1s2-bounds, trapping.
        check: String,
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        base_samples: Option<usize>,
        /// Trapping cloud: saddles or postcritical.
        #[arg(long, default_value = "saddles")]
        tcloud: String,
        #[arg(long, default_value_t = 0.1)]
        r: f64,
        #[arg(long, default_value_t = 50)]
        m_max: usize,
    },
    /// Continue a saddle cycle along a parameter path.
    Continue {
        /// Fa (parameter a) or product (parameter c added to --q).
        #[arg(long, default_value = "Fa")]
        family: String,
        #[arg(long, allow_hyphen_values = true, default_value = "-1")]
        from: String,
        #[arg(long, allow_hyphen_values = true, default_value = "-0.95")]
        to: String,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 2)]
        period: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value = "z^2")]
        p: String,
        #[arg(long, default_value = "w^2")]
        q: String,
    },
    /// Monodromy degrees of F_a and a product over the unit circle.
    Separate {
        #[arg(long, allow_hyphen_values = true, default_value = "-1")]
        a: String,
        #[arg(long, default_value = "w^2-1")]
        q: String,
        #[arg(long, default_value_t = 4)]
        probes: usize,
    },
    /// Hausdorff distance between two CSV clouds.
    Hausdorff {
        first: PathBuf,
        second: PathBuf,
        /// Only the distance from the first cloud to the second.
        #[arg(long)]
        directed: bool,
    },
    /// Describe a family member.
    Family {
        name: String,
        #[command(flatten)]
        fam: FamilyArgs,
    },
}

fn parse_complex(s: &str) -> Result<C64> {
    let t: String = s.chars().filter(|ch| !ch.is_whitespace()).collect();
    if t.is_empty() {
        return Err(Error::Parse("empty complex number".into()));
    }
    if !t.ends_with('i') {
        return t.parse::<f64>().map(|x| c(x, 0.0)).map_err(|_| Error::Parse(format!("bad number `{s}`")));
    }
    let body = &t[..t.len() - 1];
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    let coef = |x: &str| -> Result<f64> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => x.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`"))),
        }
    };
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
            Ok(c(re, coef(&body[k..])?))
        }
        None => Ok(c(0.0, coef(body)?)),
    }
}

fn parse_rect(s: &str) -> Result<Rect> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Precondition(format!("bad window `{s}`"))))
        .collect::<Result<_>>()?;
    if v.len() != 4 {
        return Err(Error::Precondition(format!("window needs four numbers, got `{s}`")));
    }
    let r = Rect::new(v[0], v[1], v[2], v[3]);
    if !r.is_valid() {
        return Err(Error::Precondition(format!("empty or non-finite window `{s}`")));
    }
    Ok(r)
}

fn family_spec(name: &str, fam: &FamilyArgs, seed: u64, default_n: usize) -> Result<FamilySpec> {
    Ok(match name.to_ascii_lowercase().as_str() {
        "fa" => FamilySpec::Fa { a: parse_complex(fam.a.as_deref().unwrap_or("-1"))? },
        "airplane" => FamilySpec::Airplane { n: fam.n.unwrap_or(default_n) },
        "s1s2" => FamilySpec::S1S2 {
            s1: fam.s1.clone().unwrap_or_else(|| "w^2".into()),
            s2: fam.s2.clone().unwrap_or_else(|| "w^2-1".into()),
            k1: fam.k1.unwrap_or(1),
            k2: fam.k2.unwrap_or(1),
            seed,
        },
        "fig3" => FamilySpec::Fig3,
        "product" => FamilySpec::Product {
            p: fam.p.clone().unwrap_or_else(|| "z^2".into()),
            q: fam.q.clone().unwrap_or_else(|| "w^2-1".into()),
        },
        other => return Err(Error::Precondition(format!("unknown family `{other}`"))),
    })
}

/// The map and a JSON description of where it came from.
fn build_map(fam: &FamilyArgs, seed: u64, default_n: usize) -> Result<(SkewProduct, Value)> {
    if let Some(path) = &fam.map_file {
        let f = SkewProduct::from_text(&std::fs::read_to_string(path)?)?;
        return Ok((f, json!({"family": "file", "path": path.display().to_string()})));
    }
    let name = fam.family.as_deref().unwrap_or("Fa");
    let spec = family_spec(name, fam, seed, default_n)?;
    Ok((spec.build()?, spec.to_json()))
}

struct Output {
    dir: Option<PathBuf>,
    artifacts: Vec<Value>,
}

impl Output {
    fn write(&mut self, name: &str, kind: &str, bytes: &[u8], extra: Value) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), bytes)?;
        let mut entry = json!({"file": name, "kind": kind, "sha256": hex(&Sha256::digest(bytes))});
        if let (Some(e), Value::Object(extra)) = (entry.as_object_mut(), extra) {
            e.extend(extra);
        }
        self.artifacts.push(entry);
        Ok(())
    }

    fn finish(&mut self, command: &str, family: Value) -> Result<()> {
        let Some(dir) = self.dir.clone() else { return Ok(()) };
        let manifest = json!({"command": command, "family": family, "artifacts": self.artifacts});
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn rect_json(r: &Rect) -> Value {
    json!([r.re_min, r.re_max, r.im_min, r.im_max])
}

/// Square window around a sample with 15% padding.
fn fit_window(pts: &[C64]) -> Rect {
    if pts.is_empty() {
        return Rect::square(c(0.0, 0.0), 2.0);
    }
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for z in pts {
        lo = c(lo.re.min(z.re), lo.im.min(z.im));
        hi = c(hi.re.max(z.re), hi.im.max(z.im));
    }
    let center = (lo + hi) * 0.5;
    let half = ((hi.re - lo.re).max(hi.im - lo.im) * 0.5 * 1.15).max(1e-3);
    Rect::square(center, half)
}

fn fiber_window(f: &SkewProduct, z: C64, seed: u64) -> Result<Rect> {
    let orbit = skewdyn::sets::base_orbit(&f.p, z, 31);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(fit_window(&fiber_julia_pullback(f, &orbit, 2000, 10.0, &mut rng)?))
}

fn emit(v: &Value) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// Inserts `--key=value` for config keys the subcommand understands, ahead of
/// the user's own flags so those take precedence.
fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let pos = args.iter().position(|a| a == "--config" || a.starts_with("--config="));
    let Some(pos) = pos else { return Ok(args) };
    let path = if let Some(v) = args[pos].strip_prefix("--config=") {
        v.to_string()
    } else {
        args.get(pos + 1).cloned().ok_or_else(|| Error::Precondition("--config needs a path".into()))?
    };
    let text = std::fs::read_to_string(&path)?;
    let cmd = Cli::command();
    let sub_idx = args.iter().enumerate().skip(1).find(|(_, a)| cmd.find_subcommand(a.as_str()).is_some()).map(|(i, _)| i);
    let Some(sub_idx) = sub_idx else { return Ok(args) };
    let sub = cmd.find_subcommand(&args[sub_idx]).unwrap();
    let known: Vec<String> = sub.get_arguments().chain(cmd.get_arguments()).filter_map(|a| a.get_long().map(str::to_string)).collect();
    let mut extra = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse(format!("{path}:{}: expected `key = value`", lineno + 1)))?;
        let key = k.trim().replace('_', "-");
        if key == "config" || !known.contains(&key) {
            continue;
        }
        let v = v.trim();
        if v == "true" {
            extra.push(format!("--{key}"));
        } else if v != "false" {
            extra.push(format!("--{key}={v}"));
        }
    }
    let mut out = args[..=sub_idx].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[sub_idx + 1..]);
    Ok(out)
}

fn run(cli: Cli) -> Result<i32> {
    let seed = cli.seed;
    let mut out = Output { dir: cli.out.clone(), artifacts: Vec::new() };
    let negative = |pass: bool| if cli.strict && !pass { 4 } else { 0 };
    match &cli.cmd {
        Cmd::Render { fam, fibers, fiber_at, resolution, window, base_window, max_iter } => {
            if *resolution == 0 {
                return Err(Error::Precondition("resolution must be positive".into()));
            }
            let (f, desc) = build_map(fam, seed, 3)?;
            let res = (*resolution, *resolution);
            let params = default_escape(&f).with_max_iter(*max_iter);
            let fixed_window = window.as_deref().map(parse_rect).transpose()?;
            // base image: the base polynomial as the fiber map over a fixed point
            let d = f.p.degree();
            let base_as_fiber = SkewProduct::from_parts(Poly1::monomial(d, c(1.0, 0.0)), Poly2::from_w(&f.p));
            let jp = sample_base_julia(&f.p, 2000, seed)?;
            let bwin = match base_window {
                Some(s) => parse_rect(s)?,
                None => fit_window(&jp.firsts()),
            };
            let bparams = default_escape(&base_as_fiber).with_max_iter(*max_iter);
            let base_img = fiber_slice(&base_as_fiber, c(0.0, 0.0), &bwin, res, &bparams);
            out.write("base.ppm", "base", &base_img.to_ppm(), json!({"window": rect_json(&bwin)}))?;
            let mut zs: Vec<C64> = Vec::new();
            if let Some(s) = fiber_at {
                zs.push(if s.eq_ignore_ascii_case("beta") { beta_of(&f.p) } else { parse_complex(s)? });
            }
            if let Some(k) = fibers {
                // points of the base Julia sample spread by argument
                let mut by_arg = jp.firsts();
                by_arg.sort_by(|a, b| a.arg().total_cmp(&b.arg()).then(a.norm().total_cmp(&b.norm())));
                for j in 0..*k {
                    let target = -std::f64::consts::PI + std::f64::consts::TAU * (j as f64 + 0.5) / *k as f64;
                    let z = by_arg.iter().min_by(|a, b| (a.arg() - target).abs().total_cmp(&(b.arg() - target).abs())).copied();
                    zs.extend(z);
                }
            }
            let mut listed = Vec::new();
            for (k, &z) in zs.iter().enumerate() {
                let win = match fixed_window {
                    Some(w) => w,
                    None => fiber_window(&f, z, seed)?,
                };
                let slice = fiber_slice(&f, z, &win, res, &params);
                let name = format!("fiber_{k:02}.ppm");
                out.write(&name, "fiber", &slice.to_ppm(), json!({"z": [z.re, z.im], "window": rect_json(&win), "bounded_cells": slice.bounded_count()}))?;
                listed.push(json!({"file": name, "z": [z.re, z.im], "window": rect_json(&win), "bounded_cells": slice.bounded_count()}));
            }
            out.finish("render", desc.clone())?;
            emit(&json!({"family": desc, "base_window": rect_json(&bwin), "resolution": resolution, "fibers": listed}))?;
            Ok(0)
        }
        Cmd::Certify { fam, base_samples, j2_per_fiber, depth, margin } => {
            let (f, desc) = build_map(fam, seed, 3)?;
            let base0 = sample_base_julia(&f.p, *base_samples, seed)?;
            let base = augment_with_cycles(&f.p, &base0, 3, 20)?;
            let j2 = assemble_j2(&f, &base0, *j2_per_fiber, *depth, 10.0, seed)?;
            let rep = certify_axiom_a(&f, &base, &j2, *margin)?;
            let mut v = rep.to_json();
            v["family"] = desc.clone();
            out.write("certify.json", "report", (serde_json::to_string_pretty(&v)? + "\n").as_bytes(), json!({}))?;
            out.finish("certify", desc)?;
            emit(&v)?;
            Ok(negative(rep.verdict.is_certified()))
        }
        Cmd::Chain { fam, n_base, n_targets, clouds } => {
            let (f, desc) = build_map(fam, seed, 3)?;
            let cfg = ChainConfig { n_base: *n_base, n_targets: *n_targets, seed, ..ChainConfig::default() };
            let rep = chain_analysis(&f, &cfg)?;
            let mut v = rep.to_json();
            v["family"] = desc.clone();
            if *clouds {
                out.write("apt.csv", "cloud", rep.apt.to_csv().as_bytes(), json!({}))?;
                out.write("acc.csv", "cloud", rep.acc.to_csv().as_bytes(), json!({}))?;
                out.write("probe.csv", "cloud", rep.probe.to_csv().as_bytes(), json!({}))?;
            }
            out.write("chain.json", "report", (serde_json::to_string_pretty(&v)? + "\n").as_bytes(), json!({}))?;
            out.finish("chain", desc)?;
            emit(&v)?;
            Ok(0)
        }
        Cmd::Saddles { fam, max_period, tol } => {
            let (f, desc) = build_map(fam, seed, 3)?;
            let s = find_saddles(&f, *max_period, *tol);
            let list: Vec<Value> = s
                .saddles
                .iter()
                .map(|o| {
                    json!({
                        "base_period": o.base_period,
                        "exact_base_period": o.exact_base_period(&f),
                        "base_point": [o.base_point.re, o.base_point.im],
                        "fiber_point": [o.fiber_point.re, o.fiber_point.im],
                        "base_multiplier_abs": o.base_multiplier.norm(),
                        "vertical_multiplier_abs": o.vertical_multiplier.norm(),
                        "residual": o.base_residual.max(o.fiber_residual),
                    })
                })
                .collect();
            let v = json!({"family": desc, "saddles": list, "diagnostics": s.diagnostics});
            out.write("saddles.json", "report", (serde_json::to_string_pretty(&v)? + "\n").as_bytes(), json!({}))?;
            out.finish("saddles", desc)?;
            emit(&v)?;
            Ok(0)
        }
        Cmd::VerifyLemma { check, fam, delta, samples, base_samples, tcloud, r, m_max } => {
            if !CHECKS.contains(&check.as_str()) {
                return Err(Error::Precondition(format!("unknown check `{check}`; expected one of {}", CHECKS.join(", "))));
            }
            let mut o = CheckOptions { seed, trap_r: *r, trap_m_max: *m_max, ..CheckOptions::default() };
            if let Some(n) = fam.n {
                o.n = n;
            }
            if let Some(s) = samples {
                o.samples = *s;
            }
            if let Some(s) = base_samples {
                o.base_samples = *s;
            }
            if let Some(d) = delta {
                o.box_height = *d;
            }
            if let Some(s) = &fam.s1 {
                o.s1 = s.clone();
            }
            if let Some(s) = &fam.s2 {
                o.s2 = s.clone();
            }
            o.k1 = fam.k1.unwrap_or(o.k1);
            o.k2 = fam.k2.unwrap_or(o.k2);
            if let Some(a) = &fam.a {
                o.trap_a = parse_complex(a)?;
            }
            o.trap_cloud = match tcloud.as_str() {
                "saddles" => TrapCloud::Saddles,
                "postcritical" => TrapCloud::Postcritical,
                other => return Err(Error::Precondition(format!("unknown trapping cloud `{other}`"))),
            };
            let rep = run_check(check, &o)?;
            let v = rep.to_json();
            out.write("check.json", "report", (serde_json::to_string_pretty(&v)? + "\n").as_bytes(), json!({}))?;
            out.finish("verify-lemma", json!({"check": check}))?;
            emit(&v)?;
            Ok(negative(rep.pass))
        }
        Cmd::Continue { family, from, to, steps, period, tol, p, q } => {
            let pf = match family.to_ascii_lowercase().as_str() {
                "fa" => PathFamily::Fa,
                "product" => PathFamily::ProductShift { p: parse_poly1(p)?, q: parse_poly1(q)? },
                other => return Err(Error::Precondition(format!("unknown path family `{other}`"))),
            };
            let (l0, l1) = (parse_complex(from)?, parse_complex(to)?);
            let f0 = pf.map_at(l0)?;
            let start = find_saddles(&f0, *period, *tol)
                .saddles
                .into_iter()
                .filter(|s| s.base_period == *period)
                .min_by(|a, b| a.vertical_multiplier.norm().total_cmp(&b.vertical_multiplier.norm()))
                .ok_or_else(|| Error::Precondition(format!("no saddle cycle of base period {period} at the start parameter")))?;
            let path = ParamPath::linear(pf.clone(), l0, l1, *steps);
            let trace = continue_orbit(&path, &start, *tol)?;
            let mut v = trace.to_json();
            v["parameter"] = json!(pf.parameter());
            v["from"] = json!([l0.re, l0.im]);
            v["to"] = json!([l1.re, l1.im]);
            out.write("trace.csv", "trace", trace.to_csv().as_bytes(), json!({}))?;
            out.write("continue.json", "report", (serde_json::to_string_pretty(&v)? + "\n").as_bytes(), json!({}))?;
            out.finish("continue", json!({"family": family}))?;
            emit(&v)?;
            Ok(0)
        }
        Cmd::Separate { a, q, probes } => {
            let fa = make_fa(parse_complex(a)?);
            let fb = make_product(&Poly1::from_real(&[0.0, 0.0, 1.0]), &parse_poly1(q)?)?;
            let rep = separation_evidence(&fa, &fb, *probes)?;
            let v = rep.to_json();
            out.write("separate.json", "report", (serde_json::to_string_pretty(&v)? + "\n").as_bytes(), json!({}))?;
            out.finish("separate", json!({"a": a, "q": q}))?;
            emit(&v)?;
            Ok(0)
        }
        Cmd::Hausdorff { first, second, directed } => {
            let load = |p: &Path| -> Result<PointCloud> { PointCloud::from_csv(&std::fs::read_to_string(p)?, Tag::Custom(p.display().to_string())) };
            let (a, b) = (load(first)?, load(second)?);
            let d = if *directed { directed_hausdorff(&a, &b)? } else { hausdorff_distance(&a, &b)? };
            let v = json!({"distance": d, "directed": directed, "sizes": [a.len(), b.len()]});
            emit(&v)?;
            Ok(0)
        }
        Cmd::Family { name, fam } => {
            let spec = family_spec(name, fam, seed, 3)?;
            let mut v = spec.to_json();
            let f = match &spec {
                FamilySpec::S1S2 { s1, s2, k1, k2, seed } => {
                    let (f, k) = build_s1s2(&parse_poly1(s1)?, &parse_poly1(s2)?, *k1, *k2, *seed)?;
                    v["constants"] = k.to_json();
                    f
                }
                other => other.build()?,
            };
            v["map"] = json!(f.to_text());
            v["degree"] = json!(f.degree);
            emit(&v)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 || rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            eprintln!("error: invalid thread count");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        assert_eq!(parse_complex("-1").unwrap(), c(-1.0, 0.0));
        assert_eq!(parse_complex("i").unwrap(), c(0.0, 1.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("0.1+0.2i").unwrap(), c(0.1, 0.2));
        assert_eq!(parse_complex("1e-3-2i").unwrap(), c(1e-3, -2.0));
        assert_eq!(parse_complex("2.5i").unwrap(), c(0.0, 2.5));
        assert!(parse_complex("x").is_err());
    }

    #[test]
    fn windows() {
        assert!(parse_rect("-1,1,-1,1").is_ok());
        assert!(parse_rect("1,-1,0,1").is_err());
        assert!(parse_rect("1,2,3").is_err());
    }
}
