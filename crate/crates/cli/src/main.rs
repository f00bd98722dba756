//! `ddql` — solver, parameter derivation, seeded experiment runs, sweeps,
//! and report rendering for the tabular RL library.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ddql::harness::{
    aggregate, emit_table, parse_per_run_csv, per_run_csv, run_config, ExperimentConfig,
    OutputFormat,
};
use ddql::mdp::{make_chain, ChainSpec, FiniteMdp};
use ddql::params::{
    derive_params, known_set_bound, rho_meets_optimism_bound, rho_optimism_lower_bound,
    HyperParams, UpdateBounds,
};
use ddql::solver::{value_iteration, SolveResult};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "ddql",
    about = "Tabular RL: directed delayed Q-learning, exact solving, and chain benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the full hyperparameter set from the primitive inputs and
    /// print it as JSON for audit.
    Params(ParamsArgs),
    /// Run value iteration on a chain or a serialized MDP.
    Solve(SolveArgs),
    /// Execute one experiment config file.
    Run(RunArgs),
    /// Expand a list of exploration discounts into a full benchmark table.
    Sweep(SweepArgs),
    /// Re-aggregate a stored per-run CSV into a summary table.
    Report(ReportArgs),
}

#[derive(Args)]
struct ParamsArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long = "gamma-e", default_value_t = 0.99)]
    gamma_e: f64,
    #[arg(long)]
    states: usize,
    #[arg(long)]
    actions: usize,
    #[arg(long = "r-max", default_value_t = 1.0)]
    r_max: f64,
}

#[derive(Args)]
struct ChainArgs {
    /// Chain length (number of states).
    #[arg(long)]
    chain: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    slip: f64,
    #[arg(long = "small-reward", default_value_t = 0.001)]
    small_reward: f64,
    #[arg(long = "large-reward", default_value_t = 1.0)]
    large_reward: f64,
}

impl ChainArgs {
    fn spec(&self, length: usize, discount: f64) -> ChainSpec {
        ChainSpec {
            length,
            slip_prob: self.slip,
            small_reward: self.small_reward,
            large_reward: self.large_reward,
            discount,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Serialized MDP document (JSON); alternative to --chain.
    #[arg(long)]
    mdp: Option<PathBuf>,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 1_000_000)]
    max_iter: usize,
    #[arg(long, default_value = "json", value_parser = parse_solve_format)]
    format: SolveFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy)]
enum SolveFormat {
    Csv,
    Json,
}

fn parse_solve_format(s: &str) -> Result<SolveFormat, String> {
    match s {
        "csv" => Ok(SolveFormat::Csv),
        "json" => Ok(SolveFormat::Json),
        other => Err(format!("unknown format `{other}` (expected csv or json)")),
    }
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (JSON).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: RunOverrides,
}

#[derive(Args)]
struct RunOverrides {
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    /// Worker thread cap (results are identical for any value).
    #[arg(long)]
    threads: Option<usize>,
    /// Summary format: csv or table.
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Write the summary here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one CSV row per run here.
    #[arg(long = "per-run")]
    per_run: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    /// Comma-separated exploration discounts for the directed methods.
    #[arg(
        long = "gamma-e",
        value_delimiter = ',',
        default_values_t = [0.99, 0.9, 0.75, 0.5, 0.25]
    )]
    gamma_e: Vec<f64>,
    #[command(flatten)]
    overrides: RunOverrides,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-run CSV produced by `run`/`sweep` with --per-run.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "table")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ParamsAudit {
    params: HyperParams,
    update_bounds: UpdateBounds,
    rho_optimism_lower_bound: f64,
    rho_meets_optimism_bound: bool,
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("cannot write output to {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_params(args: &ParamsArgs) -> Result<()> {
    let params = derive_params(
        args.epsilon,
        args.delta,
        args.gamma,
        args.gamma_e,
        args.states,
        args.actions,
        args.r_max,
    )?;
    let audit = ParamsAudit {
        update_bounds: known_set_bound(&params, args.states, args.actions),
        rho_optimism_lower_bound: rho_optimism_lower_bound(&params, args.states, args.actions),
        rho_meets_optimism_bound: rho_meets_optimism_bound(&params, args.states, args.actions),
        params,
    };
    println!("{}", serde_json::to_string_pretty(&audit)?);
    Ok(())
}

fn solve_csv(result: &SolveResult, num_actions: usize) -> String {
    let mut out = String::new();
    writeln!(out, "residual,{}", result.residual).unwrap();
    writeln!(out, "iterations,{}", result.iterations).unwrap();
    let mut header = String::from("state,v_star");
    for a in 0..num_actions {
        write!(header, ",q_star_{a}").unwrap();
    }
    out.push_str(&header);
    out.push('\n');
    for (s, v) in result.v_star.iter().enumerate() {
        write!(out, "{s},{v}").unwrap();
        for a in 0..num_actions {
            write!(out, ",{}", result.q(s, a, num_actions)).unwrap();
        }
        out.push('\n');
    }
    out
}

fn solve_json(result: &SolveResult, num_actions: usize) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a> {
        v_star: &'a [f64],
        q_star: Vec<&'a [f64]>,
        residual: f64,
        iterations: usize,
    }
    let doc = Doc {
        v_star: &result.v_star,
        q_star: result.q_star.chunks(num_actions).collect(),
        residual: result.residual,
        iterations: result.iterations,
    };
    Ok(format!("{}\n", serde_json::to_string_pretty(&doc)?))
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let mdp: FiniteMdp = match (&args.mdp, args.chain.chain) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read MDP file {}", path.display()))?;
            FiniteMdp::from_json(&text)?
        }
        (None, Some(length)) => make_chain(&args.chain.spec(length, args.gamma))?,
        (Some(_), Some(_)) => bail!("--mdp and --chain are mutually exclusive"),
        (None, None) => bail!("one of --mdp or --chain is required"),
    };
    let result = value_iteration(&mdp, args.tol, args.max_iter)?;
    let text = match args.format {
        SolveFormat::Csv => solve_csv(&result, mdp.num_actions()),
        SolveFormat::Json => solve_json(&result, mdp.num_actions())?,
    };
    write_or_print(&args.out, &text)
}

fn apply_overrides(cfg: &mut ExperimentConfig, overrides: &RunOverrides) {
    if let Some(seed) = overrides.seed {
        cfg.base_seed = seed;
    }
    if let Some(horizon) = overrides.horizon {
        cfg.horizon = horizon;
    }
    if let Some(runs) = overrides.runs {
        cfg.num_runs = runs;
    }
    if let Some(format) = overrides.format {
        cfg.output.format = format;
    }
    if let Some(out) = &overrides.out {
        cfg.output.summary_path = Some(out.clone());
    }
    if let Some(per_run) = &overrides.per_run {
        cfg.output.per_run_path = Some(per_run.clone());
    }
}

fn execute(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<()> {
    cfg.validate()?;
    let records = run_config(cfg, threads)?;
    if let Some(path) = &cfg.output.per_run_path {
        fs::write(path, per_run_csv(&records))
            .with_context(|| format!("cannot write per-run CSV to {}", path.display()))?;
    }
    let summary = aggregate(&records);
    let rendered = emit_table(&summary, cfg.output.format);
    write_or_print(&cfg.output.summary_path.clone(), &rendered)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read config file {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    apply_overrides(&mut cfg, &args.overrides);
    execute(&cfg, args.overrides.threads)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let length = args
        .chain
        .chain
        .context("--chain <LENGTH> is required for sweep")?;
    // Route through the config parser so the method defaults come from one
    // place.
    let methods: Vec<serde_json::Value> = args
        .gamma_e
        .iter()
        .map(|&g| serde_json::json!({"type": "directed", "gamma_e": g}))
        .chain([
            serde_json::json!({"type": "delayed"}),
            serde_json::json!({"type": "eps_greedy"}),
        ])
        .collect();
    let doc = serde_json::json!({
        "mdp": {
            "type": "chain",
            "length": length,
            "slip_prob": args.chain.slip,
            "small_reward": args.chain.small_reward,
            "large_reward": args.chain.large_reward,
            "discount": args.gamma,
        },
        "methods": methods,
    });
    let mut cfg = ExperimentConfig::from_json(&doc.to_string())?;
    apply_overrides(&mut cfg, &args.overrides);
    execute(&cfg, args.overrides.threads)
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("cannot read per-run CSV {}", args.input.display()))?;
    let records = parse_per_run_csv(&text)?;
    let summary = aggregate(&records);
    write_or_print(&args.out, &emit_table(&summary, args.format))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Params(args) => cmd_params(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Report(args) => cmd_report(args),
    }
}
