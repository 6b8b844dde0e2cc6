//! End-to-end acceptance checks. Prints one `criterion N: PASS|FAIL` line per
//! criterion and exits non-zero when any fails.
//!
//! Run alone with `cargo test --release -p oft-cli --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oft_core::geometry::{epipolar_residual, rigid_reproject, rotation_angle_between};
use oft_core::io;
use oft_core::losses::{adaptive_photometric, flow_photometric, gradient_suite, random_problem, rigid_photometric};
use oft_core::metrics::{ate, depth_metrics, flow_epe, snippet_ate};
use oft_core::refine::{oft_refine, OutputState, ProximalPrior, ProximalWeights, RefineConfig, RefineOutcome, VariableMask};
use oft_core::synth::{perturb, render, NoiseSpec, RenderedPair, SceneSpec};
use oft_core::{total_loss, DepthMap, Error, FlowField, Image, Intrinsics, LossConfig, PixelCoord, RigidMotion};

const SCENES: u64 = 10;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn failed(e: impl std::fmt::Display) -> Verdict {
    verdict(false, format!("error: {e}"))
}

fn norm(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| a[i] - b[i])
}

// 1: epipolar identity on exact correspondences

fn epipolar_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut worst_static = 0.0f64;
    let mut n = 0;
    while n < 10_000 {
        let (w, h) = (rng.random_range(32..1280), rng.random_range(32..1280));
        let k = Intrinsics::new(rng.random_range(50.0..1000.0), rng.random_range(50.0..1000.0), w, h).unwrap();
        let euler = std::array::from_fn(|_| rng.random_range(-0.3..0.3));
        let t: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        if norm(t) < 1e-2 {
            continue;
        }
        let m = RigidMotion::new(euler, t);
        let p = PixelCoord::new(rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
        let depth = rng.random_range(0.5..100.0);
        let Ok(q) = rigid_reproject(p, depth, &k, &m) else {
            continue;
        };
        worst = worst.max(epipolar_residual(p, q, &k, &m).abs());
        let still = RigidMotion::new(euler, [0.0; 3]);
        if let Ok(q) = rigid_reproject(p, depth, &k, &still) {
            worst_static = worst_static.max(epipolar_residual(p, q, &k, &still).abs());
        }
        n += 1;
    }
    verdict(
        worst < 1e-9 && worst_static == 0.0,
        format!("max |r| = {worst:.2e} over {n} pairs, t = 0 max |r| = {worst_static:e}"),
    )
}

// 2: gradient suite, library and binary

fn gradient_checks() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;
    for seed in 0..5 {
        match gradient_suite(16, 16, seed) {
            Ok(reports) => {
                let bad: Vec<String> = reports.iter().filter(|r| !r.passed()).map(|r| r.to_string()).collect();
                let reprobed: usize = reports.iter().map(|r| r.reprobed.len()).sum();
                pass &= bad.is_empty();
                notes.push(if bad.is_empty() {
                    format!("seed {seed} ok ({reprobed} reprobed)")
                } else {
                    format!("seed {seed} FAILED {}", bad.join("; "))
                });
            }
            Err(e) => {
                pass = false;
                notes.push(format!("seed {seed} error {e}"));
            }
        }
    }
    let bin = env!("CARGO_BIN_EXE_oft");
    for (size, seed) in [("16x16", "0"), ("8x8", "1")] {
        let status = Command::new(bin).args(["gradcheck", "--size", size, "--seed", seed]).output();
        let code = status.map(|o| o.status.code().unwrap_or(-1)).unwrap_or(-1);
        pass &= code == 0;
        notes.push(format!("`oft gradcheck --size {size} --seed {seed}` exit {code}"));
    }
    verdict(pass, notes.join(", "))
}

// 3: ground truth of the default scene is a zero of the geometric terms

fn zero_configuration() -> Verdict {
    let t = Instant::now();
    let run = || -> Result<_, Error> {
        let pair = render(&SceneSpec::default_scene())?;
        total_loss(&pair.ground_truth(), &pair.snippet(), &LossConfig::default())
    };
    match run() {
        Ok(r) => {
            let secs = t.elapsed().as_secs_f64();
            let c = r.components;
            verdict(
                c.apc < 1e-6 && c.mvs < 1e-6 && c.epipolar < 1e-6 && secs < 5.0,
                format!("apc {:.2e}, mvs {:.2e}, epipolar {:.2e}, {secs:.2} s", c.apc, c.mvs, c.epipolar),
            )
        }
        Err(e) => failed(e),
    }
}

// 4: the adaptive loss never exceeds either branch

fn per_pixel_min() -> Verdict {
    let r = LossConfig::default().similarity_r;
    let mut worst_pixel = f64::NEG_INFINITY;
    let mut worst_mean = f64::NEG_INFINITY;
    let mut same_support = 0;
    for seed in 0..100 {
        let Ok((s, snip)) = random_problem(24, 16, 1000 + seed) else {
            return failed(format!("random problem {seed}"));
        };
        let (k, m) = (&s.intrinsics, &s.motion);
        let res = (
            adaptive_photometric(&snip.center, &snip.next, &s.depth, k, m, &s.flow_fwd, r),
            rigid_photometric(&snip.center, &snip.next, &s.depth, k, m, r),
            flow_photometric(&snip.center, &snip.next, &s.flow_fwd, r),
        );
        let (Ok(apc), Ok(rigid), Ok(flow)) = res else {
            return failed(format!("seed {seed}: a photometric branch has no support"));
        };
        // per pixel, and as means over the pixels where both branches exist
        let (mut sa, mut sr, mut sf, mut n) = (0.0, 0.0, 0.0, 0usize);
        for i in 0..apc.per_pixel.len() {
            let (a, x, y) = (apc.per_pixel[i], rigid.per_pixel[i], flow.per_pixel[i]);
            if x.is_nan() || y.is_nan() {
                continue;
            }
            worst_pixel = worst_pixel.max(a - x.min(y));
            sa += a;
            sr += x;
            sf += y;
            n += 1;
        }
        if n > 0 {
            let n = n as f64;
            worst_mean = worst_mean.max(sa / n - (sr / n).min(sf / n));
        }
        if apc.valid == rigid.valid && rigid.valid == flow.valid {
            same_support += 1;
            worst_mean = worst_mean.max(apc.loss - rigid.loss.min(flow.loss));
        }
    }
    verdict(
        worst_pixel <= 1e-12 && worst_mean <= 1e-12,
        format!(
            "max apc - min(rigid, flow): per pixel {worst_pixel:.2e}, mean {worst_mean:.2e} \
             (100 states, {same_support} with identical supports)"
        ),
    )
}

// 5 to 8: recovery on textured scenes

struct Scene {
    seed: u64,
    pair: RenderedPair,
}

fn scenes() -> Result<Vec<Scene>, Error> {
    (0..SCENES)
        .map(|seed| {
            Ok(Scene {
                seed,
                pair: render(&SceneSpec::random_textured(seed))?,
            })
        })
        .collect()
}

/// The recovery runs weight the epipolar term at 1; at the default weight it
/// contributes almost nothing to the pose gradient.
fn recovery_config(lr: f64, iterations: usize, variables: VariableMask) -> RefineConfig {
    let mut cfg = RefineConfig {
        iterations,
        variables,
        ..RefineConfig::default()
    };
    cfg.adam.learning_rate = lr;
    cfg.loss.weights.w_e = 1.0;
    cfg
}

fn refine(scene: &Scene, noise: &NoiseSpec, cfg: &RefineConfig) -> Result<(OutputState, RefineOutcome), Error> {
    let prior = perturb(&scene.pair, noise)?;
    let anchor = ProximalPrior {
        anchor: prior.clone(),
        weights: ProximalWeights::default(),
    };
    let out = oft_refine(&scene.pair.snippet(), &anchor, cfg)?;
    Ok((prior, out))
}

/// Final vs initial total of every recovery run, for criterion 8.
#[derive(Default)]
struct Descent {
    runs: usize,
    worst: Option<(String, f64, f64)>,
}

impl Descent {
    fn record(&mut self, what: String, out: &RefineOutcome) {
        self.runs += 1;
        let (a, b) = (out.initial().total, out.last().total);
        let excess = b - a;
        if self.worst.as_ref().is_none_or(|w| excess > w.2 - w.1) {
            self.worst = Some((what, a, b));
        }
    }
}

fn pose_recovery(scenes: &[Scene], descent: &mut Descent) -> Verdict {
    let cfg = recovery_config(1e-3, 200, VariableMask { intrinsics: false, ..VariableMask::all() });
    let noise = NoiseSpec {
        euler_offset: [1f64.to_radians(); 3],
        translation_scale: 1.05,
        ..NoiseSpec::default()
    };
    let mut worst_rot = 0.0f64;
    let mut worst_tr = 0.0f64;
    let mut worst_dir = 0.0f64;
    for s in scenes {
        let (prior, out) = match refine(s, &noise, &cfg) {
            Ok(r) => r,
            Err(e) => return failed(format!("scene {}: {e}", s.seed)),
        };
        descent.record(format!("pose scene {}", s.seed), &out);
        let gt = &s.pair.ego_motion;
        let rot = |m: &RigidMotion| rotation_angle_between(&m.rotation(), &gt.rotation());
        let tr = |m: &RigidMotion| norm(sub(m.translation, gt.translation));
        let dir = |m: &RigidMotion| {
            let (a, b) = (m.translation, gt.translation);
            let c = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (norm(a) * norm(b));
            c.clamp(-1.0, 1.0).acos()
        };
        worst_rot = worst_rot.max(rot(&out.state.motion) / rot(&prior.motion));
        worst_tr = worst_tr.max(tr(&out.state.motion) / tr(&prior.motion));
        worst_dir = worst_dir.max(dir(&out.state.motion).to_degrees());
    }
    verdict(
        worst_rot <= 0.2 && worst_tr <= 0.2,
        format!(
            "worst remaining fraction: rotation {:.1}%, translation error vector {:.1}% \
             (final direction error <= {worst_dir:.2} deg)",
            100.0 * worst_rot,
            100.0 * worst_tr
        ),
    )
}

fn intrinsics_recovery(scenes: &[Scene], descent: &mut Descent) -> Verdict {
    let cfg = recovery_config(3e-3, 200, VariableMask { flow: false, ..VariableMask::all() });
    let noise = NoiseSpec {
        focal_scale: [1.1, 1.0],
        ..NoiseSpec::default()
    };
    let mut worst = 0.0f64;
    let mut worst_fy = 0.0f64;
    for s in scenes {
        let (_, out) = match refine(s, &noise, &cfg) {
            Ok(r) => r,
            Err(e) => return failed(format!("scene {}: {e}", s.seed)),
        };
        descent.record(format!("focal scene {}", s.seed), &out);
        let (k, gt) = (out.state.intrinsics, s.pair.intrinsics);
        worst = worst.max((k.fx - gt.fx).abs() / gt.fx);
        worst_fy = worst_fy.max((k.fy - gt.fy).abs() / gt.fy);
    }
    verdict(
        worst <= 0.01,
        format!("fx +10% -> worst |fx - fx_gt| / fx_gt = {:.2}% (fy {:.2}%)", 100.0 * worst, 100.0 * worst_fy),
    )
}

fn depth_refinement(scenes: &[Scene], descent: &mut Descent) -> Verdict {
    let cfg = recovery_config(2e-3, 100, VariableMask::all());
    let mut worst = 0.0f64;
    let mut mean_before = 0.0;
    for s in scenes {
        let noise = NoiseSpec {
            depth_log_sigma: 0.1,
            seed: s.seed,
            ..NoiseSpec::default()
        };
        let (prior, out) = match refine(s, &noise, &cfg) {
            Ok(r) => r,
            Err(e) => return failed(format!("scene {}: {e}", s.seed)),
        };
        descent.record(format!("depth scene {}", s.seed), &out);
        let gt = &s.pair.depth_source;
        let abs_rel = |d: &DepthMap| depth_metrics(d, gt, None, false, 80.0).map(|m| m.abs_rel);
        match (abs_rel(&prior.depth), abs_rel(&out.state.depth)) {
            (Ok(a), Ok(b)) => {
                worst = worst.max(b / a);
                mean_before += a / SCENES as f64;
            }
            (Err(e), _) | (_, Err(e)) => return failed(e),
        }
    }
    verdict(
        worst <= 0.5,
        format!(
            "abs rel {mean_before:.4} -> at most {:.1}% of initial",
            100.0 * worst
        ),
    )
}

fn endpoint_descent(scenes: &[Scene], descent: &Descent) -> Verdict {
    let (what, a, b) = descent.worst.clone().unwrap_or_default();
    let mut pass = b <= a && descent.runs > 0;
    let mut detail = format!("{} runs, least descent {what}: {a:.4e} -> {b:.4e}", descent.runs);

    // a very strong proximal pull keeps every block at the prior
    let pinned = || -> Result<f64, Error> {
        let noise = NoiseSpec {
            depth_log_sigma: 0.1,
            flow_sigma: 0.2,
            euler_offset: [1f64.to_radians(); 3],
            translation_scale: 1.05,
            focal_scale: [1.1, 1.1],
            ..NoiseSpec::default()
        };
        let p = perturb(&scenes[0].pair, &noise)?;
        let prior = ProximalPrior {
            anchor: p.clone(),
            weights: ProximalWeights::uniform(1e6),
        };
        let cfg = RefineConfig {
            iterations: 100,
            ..RefineConfig::default()
        };
        let out = oft_refine(&scenes[0].pair.snippet(), &prior, &cfg)?;
        let s = &out.state;
        let md = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        Ok([
            md(s.depth.data(), p.depth.data()),
            md(s.flow_fwd.data(), p.flow_fwd.data()),
            md(s.flow_bwd.data(), p.flow_bwd.data()),
            md(&s.motion.euler, &p.motion.euler),
            md(&s.motion.translation, &p.motion.translation),
            md(&[s.intrinsics.fx, s.intrinsics.fy], &[p.intrinsics.fx, p.intrinsics.fy]),
        ]
        .into_iter()
        .fold(0.0, f64::max))
    };
    match pinned() {
        Ok(dev) => {
            pass &= dev <= 1e-3;
            detail.push_str(&format!("; weight 1e6 max deviation {dev:.2e}"));
        }
        Err(e) => {
            pass = false;
            detail.push_str(&format!("; pinning run failed: {e}"));
        }
    }
    verdict(pass, detail)
}

// 9: metric oracles

fn metric_oracles() -> Verdict {
    let mut bad = Vec::new();
    let mut checks = 0;
    let mut close = |name: &str, got: f64, want: f64| {
        checks += 1;
        if (got - want).abs() > 1e-12 || got.is_nan() {
            bad.push(format!("{name}: {got} vs {want}"));
        }
    };
    let dm = |v: &[f64]| DepthMap::new(v.len(), 1, v.to_vec()).unwrap();

    let gt = dm(&[1.0, 2.0, 5.0, 10.0, 40.0]);
    let same = depth_metrics(&gt, &gt, None, false, 80.0).unwrap().as_array();
    for (i, want) in [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0].into_iter().enumerate() {
        close(&format!("depth identity [{i}]"), same[i], want);
    }
    let doubled = dm(&gt.data().iter().map(|d| 2.0 * d).collect::<Vec<_>>());
    let scaled = depth_metrics(&doubled, &gt, None, true, 80.0).unwrap().as_array();
    let exact_invariance = scaled == [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
    let m = depth_metrics(&dm(&[1.1, 1.8]), &dm(&[1.0, 2.0]), None, false, 80.0).unwrap();
    close("abs_rel [1.1, 1.8]", m.abs_rel, 0.1);
    close("sq_rel [1.1, 1.8]", m.sq_rel, 0.015);
    close("a1 [1.1, 1.8]", m.a1, 1.0);

    let fgt = FlowField::from_fn(6, 4, |x, y| [0.5 * x as f64, -(y as f64)]);
    close("epe identity", flow_epe(&fgt, &fgt, None, None).unwrap().epe_all, 0.0);
    let shifted = FlowField::from_fn(6, 4, |x, y| [0.5 * x as f64 + 3.0, 4.0 - y as f64]);
    close("epe (3, 4)", flow_epe(&shifted, &fgt, None, None).unwrap().epe_all, 5.0);
    let half = FlowField::from_fn(6, 4, |x, y| [0.5 * x as f64 + (x % 2) as f64, -(y as f64)]);
    close("epe half offset", flow_epe(&half, &fgt, None, None).unwrap().epe_all, 0.5);

    let traj: Vec<[f64; 3]> = (0..7).map(|i| [0.1 * i as f64, 0.02 * (i * i) as f64, i as f64]).collect();
    let m = ate(&traj, &traj, 5).unwrap();
    close("ate identity mean", m.ate_mean, 0.0);
    close("ate identity std", m.ate_std, 0.0);
    let tripled: Vec<[f64; 3]> = traj.iter().map(|p| p.map(|v| 3.0 * v)).collect();
    let m = ate(&tripled, &traj, 5).unwrap();
    close("ate scale x3 mean", m.ate_mean, 0.0);
    close("ate scale x3 std", m.ate_std, 0.0);
    let g5 = &traj[..5];
    let mut off = g5.to_vec();
    off[3][1] += 0.1;
    // brute force: least-squares scale of positions relative to the first
    let (mut num, mut den) = (0.0, 0.0);
    for (p, g) in off.iter().zip(g5) {
        for c in 0..3 {
            num += (g[c] - g5[0][c]) * (p[c] - off[0][c]);
            den += (p[c] - off[0][c]).powi(2);
        }
    }
    let scale = num / den;
    let mut sq = 0.0;
    for (p, g) in off.iter().zip(g5) {
        for c in 0..3 {
            sq += (scale * (p[c] - off[0][c]) - (g[c] - g5[0][c])).powi(2);
        }
    }
    close("ate one offset", ate(&off, g5, 5).unwrap().ate_mean, sq.sqrt() / 5.0);
    close("snippet ate one offset", snippet_ate(&off, g5), sq.sqrt() / 5.0);

    let n = checks;
    if !exact_invariance {
        bad.push(format!("median scaling of 2*gt gave {scaled:?}"));
    }
    verdict(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{n} hand-computed values within 1e-12, median scaling exact")
        } else {
            bad.join("; ")
        },
    )
}

// 10: file formats

fn round_trips() -> Verdict {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return failed(e),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut bad = Vec::new();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    for i in 0..100 {
        let (w, h) = (rng.random_range(1..40), rng.random_range(1..30));
        let channels = if rng.random_bool(0.5) { 1 } else { 3 };
        let maxval: u16 = match i % 3 {
            0 => 255,
            1 => 65535,
            _ => rng.random_range(1..=65535),
        };
        let data = (0..w * h * channels)
            .map(|_| rng.random_range(0..=maxval) as f64 / maxval as f64)
            .collect();
        let img = Image::new(w, h, channels, data).unwrap();
        let path = dir.path().join(format!("img{i}.pnm"));
        let back = io::write_image(&path, &img, maxval).and_then(|_| io::read_image(&path));
        match back {
            Ok(b) if (b.width(), b.height(), b.channels()) == (w, h, channels) && bits(b.data()) == bits(img.data()) => {}
            other => bad.push(format!("image {i} (maxval {maxval}): {:?}", other.err())),
        }

        let f32s = |rng: &mut ChaCha8Rng, n: usize, lo: f32, hi: f32| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(lo..hi) as f64).collect()
        };
        let flow = FlowField::new(w, h, f32s(&mut rng, 2 * w * h, -500.0, 500.0)).unwrap();
        let path = dir.path().join(format!("flow{i}.flo"));
        match io::write_flo(&path, &flow).and_then(|_| io::read_flo(&path)) {
            Ok(b) if (b.width(), b.height()) == (w, h) && bits(b.data()) == bits(flow.data()) => {}
            other => bad.push(format!("flow {i}: {:?}", other.err())),
        }

        let depth = DepthMap::new(w, h, f32s(&mut rng, w * h, 1e-3, 1e4)).unwrap();
        let path = dir.path().join(format!("depth{i}.pfm"));
        match io::write_depth(&path, &depth).and_then(|_| io::read_depth(&path, true)) {
            Ok(b) if (b.width(), b.height()) == (w, h) && bits(b.data()) == bits(depth.data()) => {}
            other => bad.push(format!("depth {i}: {:?}", other.err())),
        }
    }

    // hand-assembled fixtures
    match io::decode_pnm(b"P5\n2 1\n255\n\x00\xff") {
        Ok(img) if img.data() == [0.0, 1.0] => {}
        other => bad.push(format!("P5 fixture: {other:?}")),
    }
    match io::decode_pnm(b"P9\n2 1\n255\n\x00\xff") {
        Err(e) if e.to_string().contains("P9") => {}
        other => bad.push(format!("P9 fixture should name the magic: {other:?}")),
    }
    let flo: Vec<u8> = [
        &b"PIEH"[..],
        &1u32.to_le_bytes(),
        &1u32.to_le_bytes(),
        &1.5f32.to_le_bytes(),
        &(-2.0f32).to_le_bytes(),
    ]
    .concat();
    match io::decode_flo(&flo) {
        Ok(f) if f.data() == [1.5, -2.0] => {}
        other => bad.push(format!("flo fixture: {other:?}")),
    }
    if io::encode_flo(&FlowField::constant(1, 1, [1.5, -2.0])) != flo {
        bad.push("flo fixture bytes differ from the encoder".into());
    }
    match io::decode_flo(&flo[..16]) {
        Err(e) if e.to_string().contains("16") => {}
        other => bad.push(format!("truncated flo: {other:?}")),
    }
    let mut pfm = b"Pf\n2 2\n-1.0\n".to_vec();
    for _ in 0..4 {
        pfm.extend_from_slice(&2.0f32.to_le_bytes());
    }
    match io::decode_pfm(&pfm, true) {
        Ok(d) if d.data() == [2.0; 4] => {}
        other => bad.push(format!("pfm fixture: {other:?}")),
    }
    let mut negative = b"Pf\n1 1\n-1.0\n".to_vec();
    negative.extend_from_slice(&(-2.0f32).to_le_bytes());
    if io::decode_pfm(&negative, true).is_ok() {
        bad.push("strict read accepted a negative depth".into());
    }

    verdict(
        bad.is_empty(),
        if bad.is_empty() {
            "100 image, flow and depth files bit-exact; 7 fixtures as stated".to_string()
        } else {
            bad.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |n: usize, f: &dyn Fn() -> Verdict| {
        let t = Instant::now();
        let v = f();
        all &= v.pass;
        println!(
            "criterion {n}: {} {} [{:.1} s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
    };
    report(1, &epipolar_identity);
    report(2, &gradient_checks);
    report(3, &zero_configuration);
    report(4, &per_pixel_min);

    let scenes = match scenes() {
        Ok(s) => s,
        Err(e) => {
            for n in 5..=8 {
                println!("criterion {n}: FAIL cannot render scenes: {e}");
            }
            return ExitCode::FAILURE;
        }
    };
    let descent = std::cell::RefCell::new(Descent::default());
    report(5, &|| pose_recovery(&scenes, &mut descent.borrow_mut()));
    report(6, &|| intrinsics_recovery(&scenes, &mut descent.borrow_mut()));
    report(7, &|| depth_refinement(&scenes, &mut descent.borrow_mut()));
    report(8, &|| endpoint_descent(&scenes, &descent.borrow()));
    report(9, &metric_oracles);
    report(10, &round_trips);

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
