use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polyconsensus::filter::{factor_steps, memory_slot_rate, AMode, QuadFilter};
use polyconsensus::graph::{edge_count_for_density, enumerate_connected_graphs, Graph};
use polyconsensus::io::{GraphJson, WeightedGraphJson};
use polyconsensus::precondition::{
    metropolis_weights, optimize_fssc, optimize_p2, OptimizeOptions, PreconditionResult,
};
use polyconsensus::sim::{run_memory_slot, run_p2, run_standard, Schedule, SimTrace, Verdict};
use polyconsensus::spectral::{center, spectrum, WeightMatrix};
use polyconsensus_cli::args::{capped, parse_a_mode, parse_failure, parse_initial_state, Cap};
use polyconsensus_cli::figures::{generate, Figure, FigureConfig};
use polyconsensus_cli::output::{fmt_float, Table};
use polyconsensus_cli::sweep::{diameter_partition, partition_table, sweep, sweep_table, SweepConfig};
use polyconsensus_cli::{CliError, CliResult};
use serde_json::json;

const SWEEP_HELP: &str = "\
CSV columns:
  kind                trial | median (one median row per density)
  seed                trial seed: --seed + 1000 * density_index + trial
  n, edge_count       graph size
  density             edge_count / (n (n - 1) / 2)
  diameter            graph diameter (median rows: median)
  mu_fssc             SLEM of the fastest single-step weights
  mu_fssc_sq          its square, the rate of two plain steps
  mu2_at_fssc         optimal two-step rate at those weights
  mu2_preconditioned  two-step rate after preconditioning
  lower_bound         SLEM of the fastest single-step weights on the square graph
  ratio               mu2_preconditioned / mu2_at_fssc
  time_*_s            wall time per phase, only with --timings
Floats carry 10 significant digits.";

const PARTITION_HELP: &str = "\
CSV columns:
  kind                trial | diameter (one summary row per diameter)
  diameter, seed, edge_count
  mu2_at_fssc, mu2_preconditioned, lower_bound   as in `sweep`
  ratio               mu2_preconditioned / mu2_at_fssc (summary rows: median)
  at_bound            1 if mu2_preconditioned <= lower_bound + 1e-4 (summary rows: count)
  count, ratio_min, ratio_max                     summary rows only
Floats carry 10 significant digits.";

const SIMULATE_HELP: &str = "\
CSV columns: step, deviation (norm of x - average), mean_drift (|mean(x) - mean(x0)|).
Floats carry 10 significant digits.";

#[derive(Parser)]
#[command(name = "polyconsensus", version, about = "Two-step polynomial acceleration of average consensus")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (figures: output directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// No progress or summary lines on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    /// Omit the `# generated_unix=` line above CSV output.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph, optionally with weights.
    Gen(GenArgs),
    /// Spectrum of a weighted graph.
    Analyze(InputArgs),
    /// Optimal two-step filter and step factorization for a weighted graph.
    Design(DesignArgs),
    /// Optimize edge weights of a graph.
    Precondition(PreconditionArgs),
    /// Simulate consensus on a weighted graph.
    #[command(after_help = SIMULATE_HELP)]
    Simulate(SimulateArgs),
    /// Erdős–Rényi density sweep.
    #[command(after_help = SWEEP_HELP)]
    Sweep(SweepArgs),
    /// Erdős–Rényi trials at one density, grouped by diameter.
    #[command(after_help = PARTITION_HELP)]
    DiameterPartition(PartitionArgs),
    /// Plot data for one figure, written into the --out directory.
    Figures(FigureArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Er,
    Complete,
    Star,
    Bipartite,
    Cycle,
    Path,
    /// All connected graphs on --n nodes up to isomorphism.
    Enumerate,
    /// Weighted five-node graph sensitive to link failures.
    FiveNode,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    family: Family,
    /// Node count (star: leaves; bipartite: left part).
    #[arg(long)]
    n: Option<usize>,
    /// Right part size of a bipartite graph.
    #[arg(long)]
    m: Option<usize>,
    /// Edge count of an Erdős–Rényi graph.
    #[arg(long, conflicts_with = "density")]
    edges: Option<usize>,
    /// Density of an Erdős–Rényi graph.
    #[arg(long)]
    density: Option<f64>,
    /// Uniform edge weight.
    #[arg(long, conflicts_with = "metropolis")]
    weight: Option<f64>,
    /// Metropolis weights 1 / (1 + max degree).
    #[arg(long)]
    metropolis: bool,
}

#[derive(Args)]
struct InputArgs {
    /// JSON input file; stdin when absent or `-`.
    input: Option<PathBuf>,
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Cap the filter root for robustness to link failures.
    #[arg(long, default_value = "none")]
    cap: Cap,
    /// Gain split between the two steps: unit, balanced or a number.
    #[arg(long, default_value = "unit", value_parser = parse_a_mode)]
    a: AMode,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Objective {
    Fssc,
    P2,
}

#[derive(Args)]
struct OptimizerArgs {
    /// Keep all edge weights nonnegative.
    #[arg(long)]
    nonneg: bool,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

impl OptimizerArgs {
    fn options(&self, seed: u64) -> OptimizeOptions {
        OptimizeOptions {
            max_iters: self.max_iters,
            tol: self.tol,
            restarts: self.restarts,
            seed,
            nonneg: self.nonneg,
            ..OptimizeOptions::default()
        }
    }
}

#[derive(Args)]
struct PreconditionArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "p2")]
    objective: Objective,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scheme {
    Standard,
    Memslot,
    P2,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "p2")]
    scheme: Scheme,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Gain split of the two-step scheme: unit, balanced or a number.
    #[arg(long, default_value = "unit", value_parser = parse_a_mode)]
    a: AMode,
    #[arg(long, default_value = "none")]
    cap: Cap,
    /// Step pattern of the two-step scheme, e.g. minus,plus,skip.
    #[arg(long)]
    skip_pattern: Option<String>,
    /// Link failure, e.g. "edges=0-1,2-3 mode=permanent|resonant|random:0.1".
    #[arg(long)]
    fail: Option<String>,
    /// Initial state: e1, random:<seed> or comma-separated values.
    #[arg(long, default_value = "e1")]
    x0: String,
    /// Memory-slot weight on the current step (default: tuned for the SLEM).
    #[arg(long, requires = "w2")]
    w1: Option<f64>,
    /// Memory-slot weight on the previous state.
    #[arg(long, requires = "w1")]
    w2: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    densities: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Add per-phase wall times (makes output run-dependent).
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

#[derive(Args)]
struct FigureArgs {
    /// fig1, fig3, fig4 or fig5.
    which: Figure,
    /// Trials per density of the fig4 sweep.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Node count of the fig4 sweep.
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    densities: Vec<f64>,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

struct Ctx {
    seed: u64,
    out: Option<PathBuf>,
    format: Option<Format>,
    quiet: bool,
    timestamp: bool,
}

impl Ctx {
    fn note(&self, msg: impl std::fmt::Display) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn emit(&self, text: &str) -> CliResult<()> {
        match &self.out {
            Some(path) => std::fs::write(path, text)?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }

    fn emit_json(&self, value: &serde_json::Value) -> CliResult<()> {
        self.emit(&(serde_json::to_string_pretty(value)? + "\n"))
    }

    fn emit_table(&self, t: &Table) -> CliResult<()> {
        self.emit(&t.to_csv(self.timestamp)?)
    }
}

fn read_input(input: &InputArgs) -> CliResult<String> {
    match input.input.as_deref() {
        Some(p) if p != Path::new("-") => Ok(std::fs::read_to_string(p)?),
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

/// Weighted graph, or an unweighted one given Metropolis weights.
fn read_weighted(input: &InputArgs) -> CliResult<WeightMatrix> {
    let text = read_input(input)?;
    if let Ok(w) = serde_json::from_str::<WeightedGraphJson>(&text) {
        return Ok(w.try_into()?);
    }
    let g: Graph = serde_json::from_str::<GraphJson>(&text)?.try_into()?;
    let w = metropolis_weights(&g);
    Ok(WeightMatrix::new(g, w)?)
}

fn read_graph(input: &InputArgs) -> CliResult<Graph> {
    let text = read_input(input)?;
    if let Ok(g) = serde_json::from_str::<GraphJson>(&text) {
        return Ok(g.try_into()?);
    }
    let w: WeightMatrix = serde_json::from_str::<WeightedGraphJson>(&text)?.try_into()?;
    Ok(w.graph().clone())
}

fn need(v: Option<usize>, flag: &str) -> CliResult<usize> {
    v.ok_or_else(|| CliError::Usage(format!("this family needs --{flag}")))
}

fn cmd_gen(ctx: &Ctx, a: &GenArgs) -> CliResult<()> {
    let g = match a.family {
        Family::Er => {
            let n = need(a.n, "n")?;
            let m = match (a.edges, a.density) {
                (Some(m), _) => m,
                (None, Some(d)) => edge_count_for_density(n, d)?,
                (None, None) => return Err(CliError::Usage("er needs --edges or --density".into())),
            };
            Graph::erdos_renyi(n, m, ctx.seed)?
        }
        Family::Complete => Graph::complete(need(a.n, "n")?),
        Family::Star => Graph::star(need(a.n, "n")?),
        Family::Bipartite => Graph::complete_bipartite(need(a.n, "n")?, need(a.m, "m")?),
        Family::Cycle => Graph::cycle(need(a.n, "n")?)?,
        Family::Path => Graph::path(need(a.n, "n")?)?,
        Family::Enumerate => {
            let all = enumerate_connected_graphs(need(a.n, "n")?)?;
            ctx.note(format!("{} connected graphs", all.len()));
            return if ctx.format_or(Format::Json) == Format::Csv {
                let mut t = Table::new(["graph", "i", "j"]);
                for (k, g) in all.iter().enumerate() {
                    for &(i, j) in g.edges() {
                        t.push(vec![k.to_string(), i.to_string(), j.to_string()]);
                    }
                }
                ctx.emit_table(&t)
            } else {
                let list: Vec<GraphJson> = all.iter().map(GraphJson::from).collect();
                ctx.emit_json(&serde_json::to_value(list)?)
            };
        }
        Family::FiveNode => {
            let p = polyconsensus::catalog::failure_sensitive_five_node();
            return emit_weighted(ctx, &p);
        }
    };
    let weights = match (a.weight, a.metropolis) {
        (Some(w), _) => Some(vec![w; g.edge_count()]),
        (None, true) => Some(metropolis_weights(&g)),
        (None, false) => None,
    };
    match weights {
        Some(w) => emit_weighted(ctx, &WeightMatrix::new(g, w)?),
        None if ctx.format_or(Format::Json) == Format::Csv => {
            let mut t = Table::new(["i", "j"]);
            for &(i, j) in g.edges() {
                t.push(vec![i.to_string(), j.to_string()]);
            }
            ctx.emit_table(&t)
        }
        None => ctx.emit_json(&serde_json::to_value(GraphJson::from(&g))?),
    }
}

fn emit_weighted(ctx: &Ctx, p: &WeightMatrix) -> CliResult<()> {
    if ctx.format_or(Format::Json) == Format::Csv {
        let mut t = Table::new(["i", "j", "weight"]);
        for (&(i, j), &w) in p.graph().edges().iter().zip(p.weights()) {
            t.push(vec![i.to_string(), j.to_string(), fmt_float(w)]);
        }
        ctx.emit_table(&t)
    } else {
        ctx.emit_json(&serde_json::to_value(WeightedGraphJson::from(p))?)
    }
}

fn cmd_analyze(ctx: &Ctx, a: &InputArgs) -> CliResult<()> {
    let p = read_weighted(a)?;
    let s = spectrum(&p)?;
    if ctx.format_or(Format::Json) == Format::Csv {
        let mut t = Table::new(["quantity", "value"]);
        t.push(vec!["mu".into(), fmt_float(s.mu)]);
        t.push(vec!["sigma".into(), fmt_float(s.sigma)]);
        t.push(vec!["centered".into(), s.centered.to_string()]);
        for &l in &s.lambdas {
            t.push(vec!["lambda".into(), fmt_float(l)]);
        }
        ctx.emit_table(&t)
    } else {
        ctx.emit_json(&json!({"mu": s.mu, "sigma": s.sigma, "centered": s.centered, "lambdas": s.lambdas}))
    }
}

fn design_filter(p: &WeightMatrix, cap: Cap) -> CliResult<(WeightMatrix, QuadFilter)> {
    let pc = center(p)?;
    let s = spectrum(&pc)?;
    let f = capped(&QuadFilter::optimal(s.mu, s.sigma)?, cap, s.mu)?;
    Ok((pc, f))
}

fn cmd_design(ctx: &Ctx, a: &DesignArgs) -> CliResult<()> {
    let p = read_weighted(&a.input)?;
    let (_, f) = design_filter(&p, a.cap)?;
    let pair = factor_steps(&f, a.a)?;
    let v = json!({
        "z": f.z(),
        "a": pair.a,
        "mu": f.mu,
        "sigma": f.sigma,
        "mu2": f.mu2,
        "capped": f.capped,
    });
    if ctx.format_or(Format::Json) == Format::Csv {
        let mut t = Table::new(["z", "a", "mu", "sigma", "mu2", "capped"]);
        t.push(vec![
            fmt_float(f.z()),
            fmt_float(pair.a),
            fmt_float(f.mu),
            fmt_float(f.sigma),
            fmt_float(f.mu2),
            f.capped.to_string(),
        ]);
        ctx.emit_table(&t)
    } else {
        ctx.emit_json(&v)
    }
}

fn result_json(r: &PreconditionResult) -> serde_json::Value {
    json!({
        "mu": r.mu,
        "sigma": r.sigma,
        "mu2": r.mu2,
        "lower_bound": r.lower_bound,
        "iters": r.iterations,
        "restart_index": r.restart_index,
    })
}

fn cmd_precondition(ctx: &Ctx, a: &PreconditionArgs) -> CliResult<()> {
    let g = read_graph(&a.input)?;
    let opts = a.optimizer.options(ctx.seed);
    let r = match a.objective {
        Objective::Fssc => optimize_fssc(&g, &opts)?,
        Objective::P2 => optimize_p2(&g, &opts)?,
    };
    ctx.note(format!("mu = {}, mu2 = {}, lower bound = {}", r.mu, r.mu2, r.lower_bound));
    let weighted = serde_json::to_value(WeightedGraphJson::from(&r.matrix))?;
    match &ctx.out {
        // weights to the file, summary to stdout
        Some(path) => {
            std::fs::write(path, serde_json::to_string_pretty(&weighted)? + "\n")?;
            let text = serde_json::to_string_pretty(&result_json(&r))? + "\n";
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
        None => ctx.emit_json(&json!({"graph": weighted, "result": result_json(&r)})),
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Converged => "converged",
        Verdict::Diverged => "diverged",
        Verdict::Undecided => "undecided",
    }
}

fn cmd_simulate(ctx: &Ctx, a: &SimulateArgs) -> CliResult<()> {
    let p = read_weighted(&a.input)?;
    let x0 = parse_initial_state(&a.x0, p.n())?;
    let trace: SimTrace = match a.scheme {
        Scheme::Standard => run_standard(&p, &x0, a.steps)?,
        Scheme::Memslot => {
            let (w1, w2) = match (a.w1, a.w2) {
                (Some(w1), Some(w2)) => (w1, w2),
                _ => {
                    // heavy ball tuned for a spectrum inside [-mu, mu]
                    let r = memory_slot_rate(spectrum(&p)?.mu)?;
                    (1.0 + r * r, -(r * r))
                }
            };
            run_memory_slot(&p, w1, w2, &x0, a.steps)?
        }
        Scheme::P2 => {
            let (_, f) = design_filter(&p, a.cap)?;
            let mut schedule = match &a.skip_pattern {
                Some(s) => Schedule::new(Schedule::parse_pattern(s)?)?,
                None => Schedule::alternating(),
            };
            if let Some(spec) = &a.fail {
                schedule = schedule.with_failure(parse_failure(spec, ctx.seed).map_err(CliError::Usage)?);
            }
            run_p2(&p, &f, a.a, &schedule, &x0, a.steps)?
        }
    };
    ctx.note(format!(
        "verdict = {}, per-step rate = {}",
        verdict_name(trace.verdict),
        trace.rate_estimate.map_or("n/a".into(), |r| r.to_string())
    ));
    if ctx.format_or(Format::Csv) == Format::Json {
        ctx.emit_json(&json!({
            "steps": trace.steps,
            "verdict": verdict_name(trace.verdict),
            "rate_estimate": trace.rate_estimate,
            "deviations": trace.deviations,
            "mean_drift": trace.consensus_value_drift,
        }))
    } else {
        let mut t = Table::new(["step", "deviation", "mean_drift"]);
        for (k, (d, m)) in trace.deviations.iter().zip(&trace.consensus_value_drift).enumerate() {
            t.push(vec![k.to_string(), fmt_float(*d), fmt_float(*m)]);
        }
        ctx.emit_table(&t)
    }
}

fn cmd_sweep(ctx: &Ctx, a: &SweepArgs) -> CliResult<()> {
    let cfg = SweepConfig {
        n: a.n,
        densities: a.densities.clone(),
        trials: a.trials,
        seed: ctx.seed,
        opts: a.optimizer.options(ctx.seed),
    };
    ctx.note(format!("{} trials on n = {}", cfg.densities.len() * cfg.trials, cfg.n));
    let groups = sweep(&cfg)?;
    if ctx.format_or(Format::Csv) == Format::Json {
        let aggregates: Vec<_> = groups.iter().map(|g| polyconsensus_cli::sweep::aggregate(g)).collect();
        ctx.emit_json(&json!({"records": groups.concat(), "medians": aggregates}))
    } else {
        ctx.emit_table(&sweep_table(&groups, a.timings))
    }
}

fn cmd_partition(ctx: &Ctx, a: &PartitionArgs) -> CliResult<()> {
    let opts = a.optimizer.options(ctx.seed);
    let p = diameter_partition(a.n, a.density, a.trials, ctx.seed, &opts)?;
    for g in &p.groups {
        ctx.note(format!(
            "diameter {}: {} trials, median ratio {}, {} at the lower bound",
            g.diameter,
            g.count,
            fmt_float(g.ratio_median),
            g.at_bound
        ));
    }
    if ctx.format_or(Format::Csv) == Format::Json {
        ctx.emit_json(&json!({"records": p.records, "groups": p.groups}))
    } else {
        ctx.emit_table(&partition_table(&p))
    }
}

fn cmd_figures(ctx: &Ctx, a: &FigureArgs) -> CliResult<()> {
    let cfg = FigureConfig {
        seed: ctx.seed,
        opts: a.optimizer.options(ctx.seed),
        n: a.n,
        densities: a.densities.clone(),
        trials: a.trials,
    };
    let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    for art in generate(a.which, &cfg)? {
        let path = dir.join(art.name());
        std::fs::write(&path, art.render(ctx.timestamp)?)?;
        ctx.note(format!("wrote {}", path.display()));
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let ctx = Ctx {
        seed: cli.seed,
        out: cli.out,
        format: cli.format,
        quiet: cli.quiet,
        timestamp: !cli.no_timestamp,
    };
    match &cli.command {
        Command::Gen(a) => cmd_gen(&ctx, a),
        Command::Analyze(a) => cmd_analyze(&ctx, a),
        Command::Design(a) => cmd_design(&ctx, a),
        Command::Precondition(a) => cmd_precondition(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Sweep(a) => cmd_sweep(&ctx, a),
        Command::DiameterPartition(a) => cmd_partition(&ctx, a),
        Command::Figures(a) => cmd_figures(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
