//! `qxlab`: command-line front end of the exploration laboratory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qxlab::agents::{AgentConfig, Method};
use qxlab::envs::{BASE_ENV_IDS, WRAPPER_SYNTAX};
use qxlab::harness::{
    emit_plots, run_experiment, run_sweep, summarize, ExperimentConfig, SweepGrid, AGGREGATE_CSV, RESOLVED_CONFIG,
};
use qxlab::nn::{zero_fit_demo, ZeroFitConfig};
use qxlab::parallel::with_threads;
use qxlab::rng::lab_rng;
use qxlab::LabError;

const THREADS_VAR: &str = "QXLAB_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "qxlab",
    version,
    about = "TD-error exploration laboratory",
    after_help = "Flags in [brackets] name the config field they set. Precedence: defaults < --config file < \
                  --paper-scale < flags.\nQXLAB_THREADS caps the worker pool."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one method on one environment over several seeds.
    Train(TrainCmd),
    /// Run a preloaded hyperparameter grid.
    Sweep(SweepCmd),
    /// Run one ablation variant.
    Ablate(AblateCmd),
    /// Fit small nets to f(x) = 0 on a bounded support and probe them outside it.
    DemoZerofit(ZeroFitCmd),
    /// Summarize a finished experiment directory.
    Eval(EvalCmd),
    /// Render SVG charts from one or more experiment directories.
    Plot(PlotCmd),
    /// Print registered methods, environments and grids.
    List,
}

#[derive(Args, Debug)]
struct TrainCmd {
    /// Method id [method]
    #[arg(long)]
    method: Option<String>,
    /// Environment id, optionally with wrappers, e.g. `sparse-loco+noisytv(1)` [env]
    #[arg(long, required_unless_present = "config")]
    env: Option<String>,
    #[command(flatten)]
    exp: ExpArgs,
}

#[derive(Args, Debug)]
struct SweepCmd {
    /// Grid name: lr, ratio or rnd
    #[arg(long)]
    grid: String,
    /// Method id; defaults to rnd for the rnd grid, qxplore otherwise [method]
    #[arg(long)]
    method: Option<String>,
    /// Environment id [env]
    #[arg(long)]
    env: Option<String>,
    #[command(flatten)]
    exp: ExpArgs,
}

#[derive(Args, Debug)]
struct AblateCmd {
    /// Variant: 1step, value, qxrnd or signed [method]
    #[arg(long)]
    which: String,
    /// Environment id [env]
    #[arg(long)]
    env: Option<String>,
    #[command(flatten)]
    exp: ExpArgs,
}

/// Experiment and agent overrides shared by training commands.
#[derive(Args, Debug)]
struct ExpArgs {
    /// Experiment config file (TOML)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// 3 x 256 networks and benchmark-length episode budgets [agent.hidden, episodes]
    #[arg(long)]
    paper_scale: bool,
    /// Number of seeds [n_seeds]
    #[arg(long)]
    seeds: Option<usize>,
    /// First seed [base_seed]
    #[arg(long)]
    base_seed: Option<u64>,
    /// Training episodes per seed [episodes]
    #[arg(long)]
    episodes: Option<usize>,
    /// Evaluate every N episodes, 0 = never [eval_every]
    #[arg(long)]
    eval_every: Option<usize>,
    /// Episodes per evaluation [eval_episodes]
    #[arg(long)]
    eval_episodes: Option<usize>,
    /// Gaussian smoothing width in episodes [smoothing_sigma]
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated return milestones [milestones]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    milestones: Option<Vec<f64>>,
    /// Output directory [out_dir]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Learning rate of Q [agent.q_lr]
    #[arg(long)]
    q_lr: Option<f64>,
    /// Learning rate of Q_x [agent.qx_lr]
    #[arg(long)]
    qx_lr: Option<f64>,
    /// Minibatch size [agent.batch_size]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Discount [agent.gamma]
    #[arg(long)]
    gamma: Option<f64>,
    /// Polyak rate [agent.tau]
    #[arg(long)]
    tau: Option<f64>,
    /// Self-data fraction of Q's batches [agent.ratio_q]
    #[arg(long)]
    ratio_q: Option<f64>,
    /// Self-data fraction of Q_x's batches [agent.ratio_qx]
    #[arg(long)]
    ratio_qx: Option<f64>,
    /// Initial output bias of Q [agent.beta_q]
    #[arg(long, allow_hyphen_values = true)]
    beta_q: Option<f64>,
    /// Comma-separated hidden widths [agent.hidden]
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Extrinsic weight of the value ablation [agent.alpha]
    #[arg(long)]
    alpha: Option<f64>,
    /// Exploration rate of epsilon-greedy [agent.epsilon]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Uniform-random steps before training [agent.warmup_steps]
    #[arg(long)]
    warmup: Option<usize>,
    /// Steps per episode [agent.episode_len]
    #[arg(long)]
    episode_len: Option<usize>,
    /// RND predictor learning rate [agent.rnd.predictor_lr]
    #[arg(long)]
    rnd_lr: Option<f64>,
    /// RND extrinsic reward weight [agent.rnd.extrinsic_weight]
    #[arg(long)]
    rnd_rw: Option<f64>,
    /// DORA bonus scale [agent.dora.beta]
    #[arg(long)]
    dora_beta: Option<f64>,
}

#[derive(Args, Debug)]
struct ZeroFitCmd {
    /// Number of nets
    #[arg(long, default_value_t = 10)]
    nets: usize,
    /// Comma-separated hidden widths
    #[arg(long, value_delimiter = ',', default_value = "256,256,256")]
    hidden: Vec<usize>,
    /// Adam learning rate
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Step budget per net
    #[arg(long, default_value_t = 200_000)]
    max_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the curve CSVs
    #[arg(long, default_value = "runs/zerofit")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalCmd {
    /// Experiment directory
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args, Debug)]
struct PlotCmd {
    /// Experiment directories to overlay
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    /// Where the SVGs go; defaults to `<first input>/plots`
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure kinds mapped to exit codes.
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type CliResult = Result<(), Failure>;

fn paper_episodes(env: &str) -> usize {
    if env.starts_with("goal-push") {
        50_000
    } else {
        5_000
    }
}

/// Resolves the experiment config: defaults, file, profile, then flags.
fn resolve(method: Option<Method>, env: Option<&str>, a: &ExpArgs) -> Result<ExperimentConfig, LabError> {
    let mut c = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| LabError::Config(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str::<ExperimentConfig>(&text).map_err(|e| LabError::Config(e.to_string()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(m) = method {
        c.method = m;
    }
    if let Some(e) = env {
        c.env = e.to_string();
    }
    if a.paper_scale {
        c.agent.hidden = AgentConfig::paper_scale().hidden;
        c.episodes = paper_episodes(&c.env);
    }
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = a.$flag.clone() { c.$($field).+ = v; })*
        };
    }
    set!(
        seeds => n_seeds,
        base_seed => base_seed,
        episodes => episodes,
        eval_every => eval_every,
        eval_episodes => eval_episodes,
        sigma => smoothing_sigma,
        milestones => milestones,
        out => out_dir,
        q_lr => agent.q_lr,
        qx_lr => agent.qx_lr,
        batch_size => agent.batch_size,
        gamma => agent.gamma,
        tau => agent.tau,
        ratio_q => agent.ratio_q,
        ratio_qx => agent.ratio_qx,
        beta_q => agent.beta_q,
        hidden => agent.hidden,
        alpha => agent.alpha,
        epsilon => agent.epsilon,
        warmup => agent.warmup_steps,
        episode_len => agent.episode_len,
        rnd_lr => agent.rnd.predictor_lr,
        rnd_rw => agent.rnd.extrinsic_weight,
        dora_beta => agent.dora.beta,
    );
    c.validate()?;
    Ok(c)
}

fn parse_method(s: &str) -> Result<Method, LabError> {
    Method::parse(s)
}

fn experiment(cfg: &ExperimentConfig) -> CliResult {
    log::info!(
        "{} on {}: {} seeds x {} episodes -> {}",
        cfg.method,
        cfg.env,
        cfg.n_seeds,
        cfg.episodes,
        cfg.out_dir.display()
    );
    let rep = run_experiment(cfg)?;
    if !rep.runs.is_empty() {
        let label = format!("{} / {}", cfg.method, cfg.env);
        if let Some(agg) = &rep.aggregate {
            emit_plots(&[(label, agg.clone())], &cfg.out_dir.join("plots"))?;
        }
    }
    if !rep.is_complete() {
        let failed: Vec<String> = rep.failures.iter().map(|(s, e)| format!("seed {s}: {e}")).collect();
        return Err(Failure::Runtime(format!("some seeds failed:\n  {}", failed.join("\n  "))));
    }
    print!("{}", summarize(&cfg.out_dir)?.to_table());
    Ok(())
}

fn train(cmd: &TrainCmd) -> CliResult {
    let method = cmd.method.as_deref().map(parse_method).transpose()?;
    let cfg = resolve(method, cmd.env.as_deref(), &cmd.exp)?;
    experiment(&cfg)
}

fn sweep(cmd: &SweepCmd) -> CliResult {
    let grids = SweepGrid::preset(&cmd.grid)?;
    let default_method = if cmd.grid == "rnd" { Method::Rnd } else { Method::Qxplore };
    let method = match &cmd.method {
        Some(m) => parse_method(m)?,
        None if cmd.exp.config.is_some() => resolve(None, None, &cmd.exp)?.method,
        None => default_method,
    };
    let cfg = resolve(Some(method), cmd.env.as_deref(), &cmd.exp)?;
    let cells: usize = grids.iter().map(SweepGrid::size).sum();
    log::info!("sweep `{}`: {cells} cells of {} seeds", cmd.grid, cfg.n_seeds);
    let rep = run_sweep(&cfg, &grids)?;
    println!("{:<5} {:<8} {:<40} {:>12} {:>8}", "rank", "grid", "cell", "return", "success");
    for (i, c) in rep.cells.iter().enumerate() {
        let f = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}", prec = p));
        println!(
            "{:<5} {:<8} {:<40} {:>12} {:>8}",
            i + 1,
            c.cell.grid,
            c.cell.label(),
            f(c.final_return, 2),
            f(c.final_success, 3)
        );
    }
    println!("leaderboard: {}", rep.leaderboard.display());
    let failed: Vec<String> = rep
        .cells
        .iter()
        .filter(|c| c.error.is_some() || c.failed_seeds > 0)
        .map(|c| c.cell.label())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("cells with failures: {}", failed.join(", "))))
    }
}

fn ablation_method(which: &str) -> Result<Method, LabError> {
    match which {
        "1step" => Ok(Method::QxploreOneStep),
        "value" => Ok(Method::QxploreValue),
        "qxrnd" => Ok(Method::QxploreRnd),
        "signed" => Ok(Method::QxploreSigned),
        other => Err(LabError::Config(format!(
            "unknown ablation `{other}` (expected 1step, value, qxrnd or signed)"
        ))),
    }
}

fn ablate(cmd: &AblateCmd) -> CliResult {
    let cfg = resolve(Some(ablation_method(&cmd.which)?), cmd.env.as_deref(), &cmd.exp)?;
    experiment(&cfg)
}

fn demo_zerofit(cmd: &ZeroFitCmd) -> CliResult {
    let cfg = ZeroFitConfig {
        hidden_dims: cmd.hidden.clone(),
        n_nets: cmd.nets,
        learning_rate: cmd.lr,
        max_steps: cmd.max_steps,
        ..ZeroFitConfig::default()
    };
    let report = zero_fit_demo(&cfg, &mut lab_rng(cmd.seed))?;
    std::fs::create_dir_all(&cmd.out).map_err(LabError::from)?;
    report.write_csv(&cmd.out)?;
    println!(
        "{} nets fit (MSE < {:e}), {} excluded",
        report.curves.len(),
        cfg.mse_threshold,
        report.excluded.len()
    );
    println!("mean |f| on support:          {:.3e}", report.mean_inside());
    println!("mean max |f| for |x| >= {:.1}: {:.3e}", cfg.outside_from, report.mean_outside_max());
    println!("ratio:                        {:.1}", report.extrapolation_ratio());
    println!("curves: {}", cmd.out.display());
    Ok(())
}

fn eval(cmd: &EvalCmd) -> CliResult {
    print!("{}", summarize(&cmd.input)?.to_table());
    Ok(())
}

fn series_label(dir: &Path) -> String {
    let fallback = || dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into());
    std::fs::read_to_string(dir.join(RESOLVED_CONFIG))
        .ok()
        .and_then(|t| toml::from_str::<ExperimentConfig>(&t).ok())
        .map_or_else(fallback, |c| format!("{} / {}", c.method, c.env))
}

fn plot(cmd: &PlotCmd) -> CliResult {
    let inputs: Vec<(String, PathBuf)> = cmd
        .inputs
        .iter()
        .map(|d| (series_label(d), d.join(AGGREGATE_CSV)))
        .collect();
    let out = cmd.out.clone().unwrap_or_else(|| cmd.inputs[0].join("plots"));
    for p in emit_plots(&inputs, &out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn list() -> CliResult {
    println!("methods:");
    for m in Method::ALL {
        println!("  {m}");
    }
    println!("environments:");
    for e in BASE_ENV_IDS {
        println!("  {e}");
    }
    println!("wrappers (append to an environment id):");
    for w in WRAPPER_SYNTAX {
        println!("  {w}");
    }
    println!("sweep grids:");
    for g in SweepGrid::preset_names() {
        let cells: usize = SweepGrid::preset(g).map(|v| v.iter().map(SweepGrid::size).sum()).unwrap_or(0);
        println!("  {g} ({cells} cells)");
    }
    Ok(())
}

fn threads() -> Result<usize, LabError> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| LabError::Config(format!("{THREADS_VAR} must be a non-negative integer, got `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn dispatch(cli: &Cli) -> CliResult {
    let n = threads()?;
    with_threads(n, || match &cli.command {
        Command::Train(c) => train(c),
        Command::Sweep(c) => sweep(c),
        Command::Ablate(c) => ablate(c),
        Command::DemoZerofit(c) => demo_zerofit(c),
        Command::Eval(c) => eval(c),
        Command::Plot(c) => plot(c),
        Command::List => list(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
