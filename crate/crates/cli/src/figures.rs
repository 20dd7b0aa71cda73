//! Plot data for the figures: spectra, filter curves sampled on `[-1, 1]`,
//! sweep aggregates and the five-node failure scan. Data only, no plotting.

use polyconsensus::catalog::failure_sensitive_five_node;
use polyconsensus::filter::{robustness_caps, AMode, QuadFilter};
use polyconsensus::graph::Graph;
use polyconsensus::io::weighted_to_json;
use polyconsensus::precondition::{
    lower_bound_square, optimize_fssc_with_bound, optimize_p2_from, OptimizeOptions,
};
use polyconsensus::sim::{single_edge_failure_scan, Verdict};
use polyconsensus::spectral::{center, spectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::args::{capped, Cap};
use crate::output::{fmt_float, Table};
use crate::sweep::{aggregate_table, sweep, SweepConfig};
use crate::CliResult;

/// Number of points of every sampled curve.
pub const CURVE_POINTS: usize = 401;

/// Nodes and edges of the dense example graph.
pub const DENSE_EXAMPLE: (usize, usize) = (20, 96);

/// Simulation length of the failure scan.
pub const SCAN_STEPS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig3,
    Fig4,
    Fig5,
}

impl std::str::FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Figure, String> {
        match s {
            "fig1" => Ok(Figure::Fig1),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            "fig5" => Ok(Figure::Fig5),
            other => Err(format!("unknown figure '{other}', expected fig1, fig3, fig4 or fig5")),
        }
    }
}

/// Output of one figure.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Csv { name: String, table: Table },
    Json { name: String, value: serde_json::Value },
}

impl Artifact {
    pub fn name(&self) -> &str {
        match self {
            Artifact::Csv { name, .. } | Artifact::Json { name, .. } => name,
        }
    }

    /// File contents; `timestamp` adds the header line to CSV files.
    pub fn render(&self, timestamp: bool) -> CliResult<String> {
        match self {
            Artifact::Csv { table, .. } => table.to_csv(timestamp),
            Artifact::Json { value, .. } => Ok(serde_json::to_string_pretty(value)? + "\n"),
        }
    }
}

fn csv(name: &str, table: Table) -> Artifact {
    Artifact::Csv {
        name: name.into(),
        table,
    }
}

fn json(name: &str, value: serde_json::Value) -> Artifact {
    Artifact::Json {
        name: name.into(),
        value,
    }
}

pub fn curve_grid() -> impl Iterator<Item = f64> {
    (0..CURVE_POINTS).map(|k| -1.0 + 2.0 * k as f64 / (CURVE_POINTS - 1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureConfig {
    pub seed: u64,
    pub opts: OptimizeOptions,
    /// Sweep size behind the density figure.
    pub n: usize,
    pub densities: Vec<f64>,
    pub trials: usize,
}

impl Default for FigureConfig {
    fn default() -> Self {
        FigureConfig {
            seed: 0,
            opts: OptimizeOptions::default(),
            n: 20,
            densities: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            trials: 20,
        }
    }
}

pub fn generate(which: Figure, cfg: &FigureConfig) -> CliResult<Vec<Artifact>> {
    match which {
        Figure::Fig1 => fig1(cfg.seed),
        Figure::Fig3 => fig3(cfg.seed, &cfg.opts),
        Figure::Fig4 => fig4(cfg),
        Figure::Fig5 => fig5(cfg.seed),
    }
}

/// Seeded centered spectrum: `±mu` plus interior values.
pub fn random_centered_spectrum(seed: u64, size: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu: f64 = rng.gen_range(0.6..0.95);
    let mut v: Vec<f64> = (0..size.saturating_sub(2))
        .map(|_| rng.gen_range(-mu..mu))
        .collect();
    v.extend([mu, -mu]);
    v.sort_by(f64::total_cmp);
    v
}

/// Two plain steps against the optimal two-step filter.
fn fig1(seed: u64) -> CliResult<Vec<Artifact>> {
    let lambdas = random_centered_spectrum(seed, 12);
    let mu = lambdas.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let sigma = lambdas.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()));
    let f = QuadFilter::optimal(mu, sigma)?;

    let mut curves = Table::new(["lambda", "two_plain_steps", "p2"]);
    for l in curve_grid() {
        curves.push(vec![fmt_float(l), fmt_float(l * l), fmt_float(f.eval(l))]);
    }
    let mut spec = Table::new(["lambda", "two_plain_steps", "p2"]);
    for &l in &lambdas {
        spec.push(vec![fmt_float(l), fmt_float(l * l), fmt_float(f.eval(l))]);
    }
    Ok(vec![
        csv("fig1_curves.csv", curves),
        csv("fig1_spectrum.csv", spec),
        json(
            "fig1_summary.json",
            json!({"seed": seed, "mu": mu, "sigma": sigma, "mu_sq": mu * mu, "z": f.z(), "mu2": f.mu2}),
        ),
    ])
}

/// Dense ER graph of diameter 2, before and after preconditioning. The
/// first seed from `seed` on whose graph has diameter 2 is used.
fn fig3(seed: u64, opts: &OptimizeOptions) -> CliResult<Vec<Artifact>> {
    let (n, m) = DENSE_EXAMPLE;
    let (g, used) = (seed..)
        .take(1000)
        .map(|s| Graph::erdos_renyi(n, m, s).map(|g| (g, s)))
        .find(|r| r.as_ref().map_or(true, |(g, _)| g.diameter() == Some(2)))
        .expect("dense graphs of diameter 2 are common")?;
    let opts = OptimizeOptions { seed: used, ..*opts };
    let lb = lower_bound_square(&g, &opts)?;
    let fssc = optimize_fssc_with_bound(&g, lb, &opts)?;
    let pre = optimize_p2_from(&fssc.matrix, lb, &opts)?;

    let fssc_c = spectrum(&center(&fssc.matrix)?)?;
    let pre_c = spectrum(&pre.matrix)?;
    let f_fssc = QuadFilter::optimal(fssc_c.mu, fssc_c.sigma)?;
    let f_pre = QuadFilter::optimal(pre_c.mu, pre_c.sigma)?;

    let mut spectra = Table::new(["weights", "lambda", "p2"]);
    for (kind, s, f) in [("fssc", &fssc_c, &f_fssc), ("preconditioned", &pre_c, &f_pre)] {
        for &l in &s.lambdas {
            spectra.push(vec![kind.into(), fmt_float(l), fmt_float(f.eval(l))]);
        }
    }
    let mut curves = Table::new(["lambda", "p2_fssc", "p2_preconditioned"]);
    for l in curve_grid() {
        curves.push(vec![fmt_float(l), fmt_float(f_fssc.eval(l)), fmt_float(f_pre.eval(l))]);
    }
    let fssc_weights: serde_json::Value = serde_json::from_str(&weighted_to_json(&fssc.matrix))?;
    let pre_weights: serde_json::Value = serde_json::from_str(&weighted_to_json(&pre.matrix))?;
    Ok(vec![
        csv("fig3_spectra.csv", spectra),
        csv("fig3_curves.csv", curves),
        json(
            "fig3_summary.json",
            json!({
                "seed": used,
                "n": n,
                "edge_count": m,
                "diameter": 2,
                "mu_fssc": fssc.mu,
                "mu2_at_fssc": fssc.mu2,
                "mu2_preconditioned": pre.mu2,
                "lower_bound": lb,
                "negative_weights": pre.matrix.weights().iter().filter(|&&w| w < 0.0).count(),
            }),
        ),
        json("fig3_fssc_weights.json", fssc_weights),
        json("fig3_preconditioned_weights.json", pre_weights),
    ])
}

/// Per-density medians of the sweep.
fn fig4(cfg: &FigureConfig) -> CliResult<Vec<Artifact>> {
    let groups = sweep(&SweepConfig {
        n: cfg.n,
        densities: cfg.densities.clone(),
        trials: cfg.trials,
        seed: cfg.seed,
        opts: cfg.opts,
    })?;
    Ok(vec![csv("fig4_sweep.csv", aggregate_table(&groups))])
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Converged => "converged",
        Verdict::Diverged => "diverged",
        Verdict::Undecided => "undecided",
    }
}

/// Five-node failure example: spectrum, optimal and capped filters, and the
/// single-edge failure scan with and without caps.
fn fig5(seed: u64) -> CliResult<Vec<Artifact>> {
    let p = failure_sensitive_five_node();
    let s = spectrum(&center(&p)?)?;
    let f = QuadFilter::optimal(s.mu, s.sigma)?;
    let perm = capped(&f, Cap::Permanent, s.mu)?;
    let res = capped(&f, Cap::Resonant, s.mu)?;
    let caps = robustness_caps(s.mu)?;

    let mut spec = Table::new(["lambda", "p2"]);
    for &l in &s.lambdas {
        spec.push(vec![fmt_float(l), fmt_float(f.eval(l))]);
    }
    let mut curves = Table::new(["lambda", "p2", "p2_permanent_cap", "p2_resonant_cap"]);
    for l in curve_grid() {
        curves.push(vec![
            fmt_float(l),
            fmt_float(f.eval(l)),
            fmt_float(perm.eval(l)),
            fmt_float(res.eval(l)),
        ]);
    }

    let plain = single_edge_failure_scan(&p, &f, AMode::Unit, SCAN_STEPS, seed)?;
    let perm_scan = single_edge_failure_scan(&p, &perm, AMode::Unit, SCAN_STEPS, seed)?;
    let res_scan = single_edge_failure_scan(&p, &res, AMode::Unit, SCAN_STEPS, seed)?;
    let mut scan = Table::new([
        "i",
        "j",
        "weight",
        "permanent",
        "resonant",
        "permanent_capped",
        "resonant_capped",
    ]);
    for ((a, b), c) in plain.iter().zip(&perm_scan).zip(&res_scan) {
        scan.push(vec![
            a.edge.0.to_string(),
            a.edge.1.to_string(),
            fmt_float(a.weight),
            verdict_name(a.permanent).into(),
            verdict_name(a.resonant).into(),
            verdict_name(b.permanent).into(),
            verdict_name(c.resonant).into(),
        ]);
    }
    let weights: serde_json::Value = serde_json::from_str(&weighted_to_json(&p))?;
    Ok(vec![
        csv("fig5_spectrum.csv", spec),
        csv("fig5_curves.csv", curves),
        csv("fig5_failures.csv", scan),
        json(
            "fig5_summary.json",
            json!({
                "weights": weights,
                "mu": s.mu,
                "sigma": s.sigma,
                "z": f.z(),
                "mu2": f.mu2,
                "max_abs_p2": f.max_abs_on_unit_interval(),
                "z_permanent_cap": caps.z_permanent,
                "z_resonant_cap": caps.z_resonant,
            }),
        ),
    ])
}
