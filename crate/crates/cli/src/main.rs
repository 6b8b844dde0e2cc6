//! `oft`: render synthetic scenes, refine predictions, evaluate them and
//! inspect losses and gradients.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use oft_core::io::{self, RunConfig};
use oft_core::metrics::{self, DepthMetrics, FlowMetrics, PoseMetrics};
use oft_core::refine::{oft_refine, OutputState, ProximalPrior};
use oft_core::synth::{self, NoiseSpec, SceneSpec};
use oft_core::{total_loss, Error, Image, RigidMotion, Snippet};

const EXIT_USAGE: u8 = 2;
const EXIT_FORMAT: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "oft", version, about = "Dense test-time refinement of depth, pose, intrinsics and flow")]
struct Cli {
    /// Worker threads for the inner loops (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic snippet with exact ground truth.
    Synth(SynthArgs),
    /// Refine a prior state against a snippet of frames.
    Refine(RefineArgs),
    /// Compare a predicted state with ground truth and write a metrics CSV.
    Eval(EvalArgs),
    /// Print the per-component loss of a state.
    Losses(LossesArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// `default`, `random` (seeded by --seed) or a scene TOML file.
    #[arg(long)]
    scene: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write a perturbed prior to `<out>/prior`: log-normal depth sigma.
    #[arg(long)]
    depth_noise: Option<f64>,
    /// Prior rotation offset added to every Euler angle, degrees.
    #[arg(long)]
    euler_offset_deg: Option<f64>,
    /// Prior translation scale factor.
    #[arg(long)]
    translation_scale: Option<f64>,
    /// Prior focal length scale factor (both axes).
    #[arg(long)]
    focal_scale: Option<f64>,
}

#[derive(Debug, Args)]
struct RefineArgs {
    /// Previous, center and next frames; the previous one may be omitted.
    #[arg(long, num_args = 2..=3, required = true)]
    frames: Vec<PathBuf>,
    #[arg(long)]
    prior: PathBuf,
    /// Known intrinsics. Without it the focal lengths are refined too.
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Task {
    Depth,
    Flow,
    Pose,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_enum)]
    task: Task,
    /// Output CSV; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scale depth predictions by the ratio of medians before scoring.
    #[arg(long)]
    median_scale: bool,
    #[arg(long, default_value_t = metrics::DEFAULT_DEPTH_CAP)]
    cap: f64,
    /// Poses per ATE window.
    #[arg(long, default_value_t = metrics::DEFAULT_ATE_SNIPPET)]
    snippet: usize,
}

#[derive(Debug, Args)]
struct LossesArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long, num_args = 2..=3, required = true)]
    frames: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Problem size as HxW.
    #[arg(long, default_value = "16x16", value_parser = parse_size)]
    size: (usize, usize),
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let dim = |v: &str| match v.trim().parse::<usize>() {
        Ok(n) if n >= 4 => Ok(n),
        _ => Err(format!("dimension {v:?} must be an integer >= 4")),
    };
    Ok((dim(h)?, dim(w)?))
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_FORMAT };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("oft: cannot set up {n} threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match cli.command {
        Command::Synth(a) => synth_cmd(a),
        Command::Refine(a) => refine_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Losses(a) => losses_cmd(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("oft: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn synth_cmd(a: SynthArgs) -> CliResult {
    let spec = match a.scene.as_str() {
        "default" => SceneSpec::default_scene(),
        "random" => SceneSpec::random_textured(a.seed),
        path => io::load_scene(Path::new(path))?,
    };
    let pair = synth::render(&spec)?;
    let files = vec![
        ("prev.pgm", io::encode_pnm(&pair.previous, u16::MAX)?),
        ("center.pgm", io::encode_pnm(&pair.source, u16::MAX)?),
        ("next.pgm", io::encode_pnm(&pair.target, u16::MAX)?),
        ("prev_depth.pfm", io::encode_pfm(&pair.depth_previous)),
        ("next_depth.pfm", io::encode_pfm(&pair.depth_target)),
        ("valid.pgm", io::encode_pnm(&mask_image(&pair.valid_mask, &pair.source), 255)?),
        ("calib.txt", io::format_intrinsics(&pair.intrinsics).into_bytes()),
    ];
    let noisy = a.depth_noise.is_some()
        || a.euler_offset_deg.is_some()
        || a.translation_scale.is_some()
        || a.focal_scale.is_some();
    let prior = if noisy {
        let f = a.focal_scale.unwrap_or(1.0);
        let noise = NoiseSpec {
            depth_log_sigma: a.depth_noise.unwrap_or(0.0),
            euler_offset: [a.euler_offset_deg.unwrap_or(0.0).to_radians(); 3],
            translation_scale: a.translation_scale.unwrap_or(1.0),
            focal_scale: [f, f],
            seed: a.seed,
            ..NoiseSpec::default()
        };
        Some(synth::perturb(&pair, &noise)?)
    } else {
        None
    };
    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    io::write_state(&a.out.join("gt"), &pair.ground_truth())?;
    if let Some(p) = prior {
        io::write_state(&a.out.join("prior"), &p)?;
    }
    // the frames last: a directory with frames is complete
    write_files(&a.out, &files)
}

fn mask_image(mask: &[bool], like: &Image) -> Image {
    Image::from_fn(like.width(), like.height(), |x, y| f64::from(u8::from(mask[y * like.width() + x])))
}

fn write_files(dir: &Path, files: &[(&str, Vec<u8>)]) -> CliResult {
    io::write_dir_atomic(dir, files)?;
    Ok(())
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    let cfg = match path {
        Some(p) => io::load_run_config(p)?,
        None => RunConfig::default(),
    };
    Ok(cfg)
}

/// Loads the frames and the neighbour depths named in the config; relative
/// depth paths are resolved against the config file's directory.
fn load_snippet(frames: &[PathBuf], cfg: &RunConfig, cfg_path: Option<&Path>) -> CliResult<Snippet> {
    let imgs = frames.iter().map(|p| io::read_image(p)).collect::<Result<Vec<_>, _>>()?;
    let mut it = imgs.into_iter();
    let prev = if frames.len() == 3 { it.next() } else { None };
    let center = it.next().ok_or_else(|| fail(EXIT_USAGE, "missing center frame"))?;
    let next = it.next().ok_or_else(|| fail(EXIT_USAGE, "missing next frame"))?;
    let base = cfg_path.and_then(Path::parent).unwrap_or(Path::new("."));
    let depth = |p: &Option<PathBuf>| -> CliResult<_> {
        match p {
            Some(p) => Ok(Some(io::read_depth(&base.join(p), true)?)),
            None => Ok(None),
        }
    };
    Ok(Snippet {
        prev,
        center,
        next,
        prev_depth: depth(&cfg.prev_depth)?,
        next_depth: depth(&cfg.next_depth)?,
    })
}

fn refine_cmd(a: RefineArgs) -> CliResult {
    let cfg = load_config(a.config.as_deref())?;
    let snippet = load_snippet(&a.frames, &cfg, a.config.as_deref())?;
    let mut anchor = io::read_state(&a.prior)?;
    let mut rc = cfg.refine_config();
    match &a.calib {
        Some(p) => {
            let k = io::read_calibration(p)?;
            if (k.width, k.height) != (anchor.width(), anchor.height()) {
                return Err(fail(
                    EXIT_FORMAT,
                    format!("calibration is {}x{}, prior is {}x{}", k.width, k.height, anchor.width(), anchor.height()),
                ));
            }
            anchor.intrinsics = k;
            rc.variables.intrinsics = false;
        }
        None => log::info!("no calibration given; refining the focal lengths"),
    }
    let prior = ProximalPrior {
        anchor,
        weights: cfg.proximal_weights(),
    };
    let outcome = oft_refine(&snippet, &prior, &rc)?;
    let (first, last) = (outcome.initial(), outcome.last());
    eprintln!(
        "loss {:.6e} -> {:.6e} over {} iterations",
        first.total,
        last.total,
        outcome.trace.len() - 1
    );
    write_files(&a.out, &state_files(&outcome.state, Some(io::trace_csv(&outcome.trace))))
}

fn state_files(s: &OutputState, trace: Option<String>) -> Vec<(&'static str, Vec<u8>)> {
    let mut files = vec![
        (io::DEPTH_FILE, io::encode_pfm(&s.depth)),
        (io::FLOW_FWD_FILE, io::encode_flo(&s.flow_fwd)),
        (io::FLOW_BWD_FILE, io::encode_flo(&s.flow_bwd)),
        (io::POSE_FILE, io::format_pose(&s.motion).into_bytes()),
        (io::INTRINSICS_FILE, io::format_intrinsics(&s.intrinsics).into_bytes()),
    ];
    if let Some(t) = trace {
        files.push(("trace.csv", t.into_bytes()));
    }
    files
}

/// Camera positions of the previous, center and next frames in the center
/// frame, assuming constant velocity.
fn snippet_trajectory(m: &RigidMotion) -> Vec<[f64; 3]> {
    vec![m.translation, [0.0; 3], m.inverse().translation]
}

fn read_trajectory(path: &Path) -> CliResult<Vec<[f64; 3]>> {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line.split_whitespace().filter_map(|t| t.parse().ok()).collect();
        if v.len() != 3 || line.split_whitespace().count() != 3 {
            return Err(fail(EXIT_FORMAT, format!("{}:{}: expected three numbers", path.display(), n + 1)));
        }
        out.push([v[0], v[1], v[2]]);
    }
    Ok(out)
}

fn trajectory(dir: &Path) -> CliResult<Vec<[f64; 3]>> {
    let file = dir.join("trajectory.txt");
    if file.exists() {
        return read_trajectory(&file);
    }
    let motion = io::parse_pose(&std::fs::read_to_string(dir.join(io::POSE_FILE)).map_err(Error::from)?)?;
    Ok(snippet_trajectory(&motion))
}

fn eval_cmd(a: EvalArgs) -> CliResult {
    let csv = match a.task {
        Task::Depth => {
            let pred = io::read_depth(&a.pred.join(io::DEPTH_FILE), true)?;
            let gt = io::read_depth(&a.gt.join(io::DEPTH_FILE), false)?;
            let m = metrics::depth_metrics(&pred, &gt, None, a.median_scale, a.cap)?;
            io::metrics_csv(&DepthMetrics::COLUMNS, &m.as_array())?
        }
        Task::Flow => {
            let pred = io::read_flo(&a.pred.join(io::FLOW_FWD_FILE))?;
            let gt = io::read_flo(&a.gt.join(io::FLOW_FWD_FILE))?;
            let m = metrics::flow_epe(&pred, &gt, None, None)?;
            io::metrics_csv(&FlowMetrics::COLUMNS, &m.as_array())?
        }
        Task::Pose => {
            let m = metrics::ate(&trajectory(&a.pred)?, &trajectory(&a.gt)?, a.snippet)?;
            io::metrics_csv(&PoseMetrics::COLUMNS, &m.as_array())?
        }
    };
    match &a.out {
        Some(p) => io::write_atomic(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn losses_cmd(a: LossesArgs) -> CliResult {
    let cfg = load_config(a.config.as_deref())?;
    let snippet = load_snippet(&a.frames, &cfg, a.config.as_deref())?;
    let state = io::read_state(&a.state)?;
    let loss = cfg.refine_config().loss;
    let report = total_loss(&state, &snippet, &loss)?;
    let weights = loss.weights.as_array();
    println!("{:<18} {:>14} {:>10} {:>14}", "component", "value", "weight", "weighted");
    for ((name, v), w) in oft_core::losses::Components::NAMES
        .iter()
        .zip(report.components.as_array())
        .zip(weights)
    {
        println!("{name:<18} {v:>14.6e} {w:>10} {:>14.6e}", v * w);
    }
    println!("{:<18} {:>14.6e}", "total", report.total);
    Ok(())
}

fn gradcheck_cmd(a: GradcheckArgs) -> CliResult {
    let (h, w) = a.size;
    let reports = oft_core::losses::gradient_suite(w, h, a.seed)?;
    let mut ok = true;
    for r in &reports {
        println!("{r}");
        ok &= r.passed();
    }
    if ok {
        println!("gradcheck {h}x{w} seed {}: all {} blocks pass", a.seed, reports.len());
        Ok(())
    } else {
        Err(fail(EXIT_NUMERICAL, "gradient check failed"))
    }
}
