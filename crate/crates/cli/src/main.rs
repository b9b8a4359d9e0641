//! `resq` command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! runtime failures.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rand::Rng;

use resq_core::assignment::{brute_force_assign, cost_matrix, hungarian_assign};
use resq_core::geo::{
    normalize_scenario, parse_scenario_csv, parse_scenario_json, GeoBounds, GridDims,
};
use resq_core::harness::{
    emit_report, run_experiment, stream_rng, train_learner, ExperimentConfig, HarnessError,
    RunOptions, RunSummary,
};
use resq_core::learner::greedy_match;
use resq_core::{Cell, GridConfig, WorldState};

const ORACLE_MAX_SIZE: usize = 7;

#[derive(Debug, Parser)]
#[command(name = "resq", version, about = "Volunteer rescue scheduling on a grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a CSV or JSON scenario into canonical scenario JSON.
    Convert(ConvertArgs),
    /// Run every configured policy and write a comparison report.
    Compare(CompareArgs),
    /// Train one learner and save its Q-table and learning curve.
    Train(TrainArgs),
    /// Cross-check the Hungarian solver against brute force.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["csv", "json"])))]
struct ConvertArgs {
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Clamp points outside the region onto its edge instead of failing.
    #[arg(long)]
    clamp: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Report directory.
    #[arg(long, value_name = "DIR", default_value = "report")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Learner {
    Resq,
    Rl,
}

impl Learner {
    fn name(self) -> &'static str {
        match self {
            Learner::Resq => "resq",
            Learner::Rl => "rl",
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_enum)]
    policy: Learner,
    /// Q-table JSON output.
    #[arg(long, value_name = "QTABLE_PATH")]
    out: PathBuf,
    /// Learning curve CSV; defaults to the Q-table path with a `.curve.csv` extension.
    #[arg(long, value_name = "PATH")]
    curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Volunteers and victims per instance.
    #[arg(long)]
    size: usize,
    #[arg(long)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("RESQ_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "RESQ_THREADS must be a positive integer, got {v:?}"
            ))),
        },
    }
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn convert(args: &ConvertArgs) -> Result<(), CliError> {
    let (path, is_csv) = match (&args.csv, &args.json) {
        (Some(p), _) => (p, true),
        (None, Some(p)) => (p, false),
        (None, None) => return Err(CliError::Usage("one of --csv or --json is required".into())),
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))?;
    let scenario = if is_csv {
        parse_scenario_csv(&text, GeoBounds::default(), GridDims::default())
    } else {
        parse_scenario_json(&text)
    }
    .map_err(runtime)?;
    let scenario = normalize_scenario(&scenario, args.clamp).map_err(runtime)?;
    let mut json = scenario.to_json();
    json.push('\n');
    write_text(&args.out, &json)?;
    for (i, snap) in scenario.snapshots.iter().enumerate() {
        println!(
            "snapshot {}: {} volunteers, {} victims",
            i + 1,
            snap.volunteers.len(),
            snap.victims.len()
        );
    }
    Ok(())
}

fn format_table(summaries: &[RunSummary]) -> String {
    let mut rows: Vec<&RunSummary> = summaries.iter().collect();
    rows.sort_by(|a, b| b.reward_rate.total_cmp(&a.reward_rate));
    let mut out = format!(
        "{:<8} {:>8} {:>10} {:>11} {:>12} {:>14}\n",
        "policy", "episodes", "avg_time", "avg_reward", "reward_rate", "rescuing_cost"
    );
    for s in rows {
        let cost = s
            .rescuing_cost
            .map(|c| format!("{c:.4}"))
            .unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            out,
            "{:<8} {:>8} {:>10.2} {:>11.2} {:>12.4} {:>14}",
            s.policy, s.episodes, s.avg_time, s.avg_reward, s.reward_rate, cost
        );
    }
    out
}

fn compare(args: &CompareArgs) -> Result<(), CliError> {
    let threads = threads_from_env()?;
    let cfg = ExperimentConfig::load(&args.config)?;
    let options = RunOptions {
        threads,
        base_dir: config_dir(&args.config),
    };
    let summaries = run_experiment(&cfg, &options)?;
    emit_report(&summaries, &args.out)?;
    print!("{}", format_table(&summaries));
    println!("report written to {}", args.out.display());
    Ok(())
}

fn train(args: &TrainArgs) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let (_, run) = train_learner(&cfg, args.policy.name(), &config_dir(&args.config))?;
    let curve_path = args
        .curve
        .clone()
        .unwrap_or_else(|| args.out.with_extension("curve.csv"));
    let mut curve = String::from("episode,reward,steps\n");
    for p in &run.curve {
        let _ = writeln!(curve, "{},{},{}", p.episode, p.reward, p.steps);
    }
    write_text(&args.out, &run.table.to_json())?;
    write_text(&curve_path, &curve)?;
    let last = run.curve.last().expect("at least one episode");
    println!(
        "trained {} for {} episodes; last episode reward {} in {} steps",
        args.policy.name(),
        run.curve.len(),
        last.reward,
        last.steps
    );
    println!("q-table: {}", args.out.display());
    println!("curve: {}", curve_path.display());
    Ok(())
}

fn oracle_check(args: &OracleArgs) -> Result<(), CliError> {
    if args.size == 0 || args.size > ORACLE_MAX_SIZE {
        return Err(CliError::Usage(format!(
            "--size must be between 1 and {ORACLE_MAX_SIZE} for the brute-force arm"
        )));
    }
    if args.instances == 0 {
        return Err(CliError::Usage("--instances must be at least 1".into()));
    }
    let grid = GridConfig::default();
    let mut rng = stream_rng(args.seed, 0, 0);
    let mut random_cells = |n: usize| -> Vec<Cell> {
        (0..n)
            .map(|_| Cell::new(rng.gen_range(0..grid.rows), rng.gen_range(0..grid.cols)))
            .collect()
    };
    let (mut agree, mut bounded, mut max_gap) = (0usize, 0usize, 0.0f64);
    for _ in 0..args.instances {
        let agents = random_cells(args.size);
        let victims = random_cells(args.size);
        let world = WorldState::new(&grid, &agents, &victims).map_err(runtime)?;
        let costs = cost_matrix(&world).map_err(runtime)?;
        let exact = brute_force_assign(&costs).map_err(runtime)?;
        let fast = hungarian_assign(&costs);
        if exact.total_cost == fast.total_cost {
            agree += 1;
        }
        let greedy = greedy_match(&agents, &victims).map_err(runtime)?;
        let gap = greedy.total_distance as f64 - exact.total_cost;
        if gap >= 0.0 {
            bounded += 1;
        }
        max_gap = max_gap.max(gap);
    }
    println!("hungarian==bruteforce: {agree}/{}", args.instances);
    println!("greedy>=optimum: {bounded}/{}", args.instances);
    println!("max greedy-match optimality gap: {max_gap}");
    if agree != args.instances || bounded != args.instances {
        return Err(CliError::Runtime("oracle disagreement".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Convert(a) => convert(a),
        Command::Compare(a) => compare(a),
        Command::Train(a) => train(a),
        Command::OracleCheck(a) => oracle_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) | CliError::Runtime(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(e.code())
        }
    }
}
