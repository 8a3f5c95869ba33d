use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use raytrack::pipeline::{
    cmd_ablate, cmd_bench, cmd_eval, cmd_generate, cmd_track, write_outputs, AblationAxis, Config,
    EvalPaths, DEFAULT_FPS_TARGET, STATUS_FILE,
};
use raytrack::sim::{generate, Dataset, SceneConfig, SceneKind};
use raytrack::{Error, Result};

#[derive(Parser)]
#[command(name = "raytrack", version, about = "Stereo 6DoF tracking of fast-moving objects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic stereo dataset.
    Generate(GenerateArgs),
    /// Track a dataset and write trace.txt, status.csv and timing.csv.
    Track(RunArgs),
    /// Score a trace against a dataset's ground truth.
    Eval(EvalArgs),
    /// Run one tracking pass per setting of an ablation axis.
    Ablate(AblateArgs),
    /// Time the full pipeline and check the frame rate target.
    Bench(BenchArgs),
}

#[derive(Args)]
struct Common {
    /// Flat `section.key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    /// a (spin), b (pendulum) or c (degraded pendulum).
    #[arg(long)]
    scene: Option<String>,
    /// Seconds of footage.
    #[arg(long)]
    duration: Option<f64>,
    /// Dataset directory to create.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// rgb, event or mixed.
    #[arg(long)]
    modality: Option<String>,
    /// Write per-frame cluster labels, hypotheses and queue contents.
    #[arg(long)]
    dump_debug: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Pose trace, one 3×4 row-major pose per line.
    #[arg(long)]
    trace: PathBuf,
    /// Per-frame status; defaults to status.csv beside the trace.
    #[arg(long)]
    status: Option<PathBuf>,
    /// Timing log; adds the measured frame rate to the report.
    #[arg(long)]
    timing: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// amq_n or distribution.
    #[arg(long)]
    axis: String,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Frames per second required to pass.
    #[arg(long, default_value_t = DEFAULT_FPS_TARGET)]
    target: f64,
    /// Without --dataset, seconds of in-memory scene b to time.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
}

fn load(common: &Common) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
        cfg.scene.seed = seed;
    }
    Ok(cfg)
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn run_config(args: &RunArgs) -> Result<Config> {
    let mut cfg = load(&args.common)?;
    if let Some(d) = &args.dataset {
        cfg.set("run.dataset", &path_str(d))?;
    }
    if let Some(o) = &args.out {
        cfg.set("run.out", &path_str(o))?;
    }
    if let Some(m) = &args.modality {
        cfg.set("run.modality", m)?;
    }
    if args.dump_debug {
        cfg.run.dump_debug = true;
    }
    cfg.run.validate()?;
    Ok(cfg)
}

fn generate_cmd(args: &GenerateArgs) -> Result<()> {
    let mut cfg = load(&args.common)?;
    if let Some(kind) = &args.scene {
        let duration = cfg.scene.duration;
        cfg.scene = SceneConfig::preset(kind.parse()?, cfg.scene.seed);
        cfg.scene.duration = duration;
    }
    if let Some(d) = args.duration {
        cfg.scene.duration = d;
    }
    cfg.scene.validate()?;
    let manifest = cmd_generate(&cfg.scene, &args.out)?;
    println!("wrote {} frames to {}", manifest.len(), args.out.display());
    Ok(())
}

fn track_cmd(args: &RunArgs) -> Result<()> {
    let cfg = run_config(args)?;
    let out = cmd_track(&cfg.run)?;
    let lost = out.lost_flags().iter().filter(|&&l| l).count();
    println!(
        "tracked {} frames ({} lost) at {:.1} fps into {}",
        out.frames.len(),
        lost,
        out.fps(),
        cfg.run.out.display()
    );
    Ok(())
}

fn eval_cmd(args: &EvalArgs) -> Result<()> {
    let sibling = args.trace.with_file_name(STATUS_FILE);
    let status = args
        .status
        .clone()
        .or_else(|| sibling.exists().then_some(sibling));
    let report = cmd_eval(&EvalPaths {
        dataset: args.dataset.clone(),
        trace: args.trace.clone(),
        status,
        timing: args.timing.clone(),
        out: args.out.clone(),
    })?;
    let o = &report.overall;
    println!(
        "frames {} lost {} ADD {:.3} ADD-S {:.3} e_p {:.3} cm e_r {:.2} deg switch {}",
        o.frames, o.lost_frames, o.add_recall_01d, o.adds_recall_01d, o.e_p.mean, o.e_r.mean, o.switch_count
    );
    Ok(())
}

fn ablate_cmd(args: &AblateArgs) -> Result<()> {
    let cfg = run_config(&args.run)?;
    let axis: AblationAxis = args.axis.parse()?;
    let rows = cmd_ablate(&cfg.run, axis)?;
    for r in &rows {
        println!(
            "{:>10} ADD {:.3} ADD-S {:.3} e_r {:.2} switch {}",
            r.setting, r.metrics.add_recall_01d, r.metrics.adds_recall_01d, r.metrics.e_r.mean, r.metrics.switch_count
        );
    }
    Ok(())
}

fn bench_cmd(args: &BenchArgs) -> Result<bool> {
    let cfg = run_config(&args.run)?;
    let (out, report) = if args.run.dataset.is_some() {
        let ds = Dataset::open(&cfg.run.dataset)?;
        cmd_bench(&cfg.run, &ds, &ds.rig, &ds.model, args.target)?
    } else {
        let mut scene = SceneConfig::preset(SceneKind::Pendulum, cfg.run.seed);
        scene.duration = args.duration;
        let (frames, _) = generate(&scene)?;
        cmd_bench(&cfg.run, frames.as_slice(), &scene.rig, &scene.model, args.target)?
    };
    if args.run.out.is_some() {
        std::fs::create_dir_all(&cfg.run.out).map_err(|source| Error::Io {
            path: cfg.run.out.clone(),
            source,
        })?;
        write_outputs(&cfg.run.out, &out)?;
    }
    print!("{}", report.to_text());
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate_cmd(a).map(|_| true),
        Command::Track(a) => track_cmd(a).map(|_| true),
        Command::Eval(a) => eval_cmd(a).map(|_| true),
        Command::Ablate(a) => ablate_cmd(a).map(|_| true),
        Command::Bench(a) => bench_cmd(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
