//! Erdős–Rényi density sweeps and the diameter breakdown.
//!
//! Every trial draws a connected `G(n, M)` graph, computes the fastest
//! single-step weights, the square-graph lower bound and the two-step
//! preconditioned weights, and records the four rates.

use std::time::Instant;

use polyconsensus::graph::{edge_count_for_density, max_edges, Graph};
use polyconsensus::precondition::{
    lower_bound_square, optimize_fssc_with_bound, optimize_p2_from, OptimizeOptions,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{fmt_float, Table};
use crate::{CliError, CliResult};

/// Slack for `lower_bound <= mu2_preconditioned`.
pub const BOUND_SLACK: f64 = 1e-6;
/// Slack for the two rate orderings.
pub const ORDER_SLACK: f64 = 1e-9;
/// A trial counts as reaching the lower bound within this margin.
pub const AT_BOUND_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub seed: u64,
    pub n: usize,
    pub edge_count: usize,
    pub density: f64,
    pub diameter: usize,
    pub mu_fssc: f64,
    pub mu_fssc_sq: f64,
    pub mu2_at_fssc: f64,
    pub mu2_preconditioned: f64,
    pub lower_bound: f64,
    pub time_bound_s: f64,
    pub time_fssc_s: f64,
    pub time_p2_s: f64,
}

impl SweepRecord {
    /// `mu2_preconditioned / mu2_at_fssc`, taken as 1 when the single-step
    /// weights already reach a zero two-step rate.
    pub fn ratio(&self) -> f64 {
        if self.mu2_at_fssc <= 1e-12 {
            1.0
        } else {
            self.mu2_preconditioned / self.mu2_at_fssc
        }
    }

    pub fn at_bound(&self) -> bool {
        self.mu2_preconditioned <= self.lower_bound + AT_BOUND_MARGIN
    }

    pub fn check(&self) -> CliResult<()> {
        let fail = |what: &str| {
            Err(CliError::Invariant(format!(
                "seed {}: {what} (mu_fssc_sq {}, mu2_at_fssc {}, mu2_preconditioned {}, lower_bound {})",
                self.seed, self.mu_fssc_sq, self.mu2_at_fssc, self.mu2_preconditioned, self.lower_bound
            )))
        };
        if !(self.lower_bound <= self.mu2_preconditioned + BOUND_SLACK) {
            return fail("preconditioned rate below the square-graph bound");
        }
        if !(self.mu2_preconditioned <= self.mu2_at_fssc + ORDER_SLACK) {
            return fail("preconditioning made the two-step rate worse");
        }
        if !(self.mu2_at_fssc <= self.mu_fssc_sq + ORDER_SLACK) {
            return fail("two-step rate exceeds two plain steps");
        }
        Ok(())
    }
}

/// Seed of trial `trial` at the `density_index`-th density.
pub fn trial_seed(base: u64, density_index: usize, trial: usize) -> u64 {
    base.wrapping_add(density_index as u64 * 1000 + trial as u64)
}

/// One trial on `G(n, edge_count)` drawn with `seed`; the optimizers also
/// use `seed`.
pub fn run_trial(n: usize, edge_count: usize, seed: u64, opts: &OptimizeOptions) -> CliResult<SweepRecord> {
    let opts = OptimizeOptions { seed, ..*opts };
    let g = Graph::erdos_renyi(n, edge_count, seed)?;
    let diameter = g.diameter().ok_or(polyconsensus::Error::Disconnected)?;

    let t0 = Instant::now();
    let lower_bound = lower_bound_square(&g, &opts)?;
    let t1 = Instant::now();
    let fssc = optimize_fssc_with_bound(&g, lower_bound, &opts)?;
    let t2 = Instant::now();
    let p2 = optimize_p2_from(&fssc.matrix, lower_bound, &opts)?;
    let t3 = Instant::now();

    let record = SweepRecord {
        seed,
        n,
        edge_count,
        density: edge_count as f64 / max_edges(n) as f64,
        diameter,
        mu_fssc: fssc.mu,
        mu_fssc_sq: fssc.mu * fssc.mu,
        mu2_at_fssc: fssc.mu2,
        mu2_preconditioned: p2.mu2,
        lower_bound,
        time_bound_s: (t1 - t0).as_secs_f64(),
        time_fssc_s: (t2 - t1).as_secs_f64(),
        time_p2_s: (t3 - t2).as_secs_f64(),
    };
    record.check()?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n: usize,
    pub densities: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub opts: OptimizeOptions,
}

/// Records grouped by density, in input order, trials in seed order.
/// Trials run in parallel; the result does not depend on scheduling.
pub fn sweep(cfg: &SweepConfig) -> CliResult<Vec<Vec<SweepRecord>>> {
    if cfg.trials == 0 {
        return Err(CliError::Usage("at least one trial per density is needed".into()));
    }
    let counts: Vec<usize> = cfg
        .densities
        .iter()
        .map(|&d| edge_count_for_density(cfg.n, d))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..counts.len())
        .flat_map(|d| (0..cfg.trials).map(move |t| (d, t)))
        .collect();
    let mut records = jobs
        .par_iter()
        .map(|&(d, t)| run_trial(cfg.n, counts[d], trial_seed(cfg.seed, d, t), &cfg.opts))
        .collect::<CliResult<Vec<_>>>()?
        .into_iter();
    Ok(counts
        .iter()
        .map(|_| records.by_ref().take(cfg.trials).collect())
        .collect())
}

pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

/// Per-density medians of every rate column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAggregate {
    pub n: usize,
    pub edge_count: usize,
    pub density: f64,
    pub trials: usize,
    pub diameter: f64,
    pub mu_fssc: f64,
    pub mu_fssc_sq: f64,
    pub mu2_at_fssc: f64,
    pub mu2_preconditioned: f64,
    pub lower_bound: f64,
    pub ratio: f64,
}

pub fn aggregate(group: &[SweepRecord]) -> SweepAggregate {
    let col = |f: fn(&SweepRecord) -> f64| median(group.iter().map(f));
    SweepAggregate {
        n: group.first().map_or(0, |r| r.n),
        edge_count: group.first().map_or(0, |r| r.edge_count),
        density: group.first().map_or(f64::NAN, |r| r.density),
        trials: group.len(),
        diameter: col(|r| r.diameter as f64),
        mu_fssc: col(|r| r.mu_fssc),
        mu_fssc_sq: col(|r| r.mu_fssc_sq),
        mu2_at_fssc: col(|r| r.mu2_at_fssc),
        mu2_preconditioned: col(|r| r.mu2_preconditioned),
        lower_bound: col(|r| r.lower_bound),
        ratio: col(SweepRecord::ratio),
    }
}

pub const SWEEP_COLUMNS: [&str; 12] = [
    "kind",
    "seed",
    "n",
    "edge_count",
    "density",
    "diameter",
    "mu_fssc",
    "mu_fssc_sq",
    "mu2_at_fssc",
    "mu2_preconditioned",
    "lower_bound",
    "ratio",
];

pub const TIMING_COLUMNS: [&str; 3] = ["time_bound_s", "time_fssc_s", "time_p2_s"];

fn aggregate_row(a: &SweepAggregate, timings: bool) -> Vec<String> {
    let mut row = vec![
        "median".to_string(),
        String::new(),
        a.n.to_string(),
        a.edge_count.to_string(),
        fmt_float(a.density),
        fmt_float(a.diameter),
        fmt_float(a.mu_fssc),
        fmt_float(a.mu_fssc_sq),
        fmt_float(a.mu2_at_fssc),
        fmt_float(a.mu2_preconditioned),
        fmt_float(a.lower_bound),
        fmt_float(a.ratio),
    ];
    if timings {
        row.extend(std::iter::repeat_n(String::new(), TIMING_COLUMNS.len()));
    }
    row
}

fn sweep_header(timings: bool) -> Table {
    let mut cols: Vec<&str> = SWEEP_COLUMNS.to_vec();
    if timings {
        cols.extend(TIMING_COLUMNS);
    }
    Table::new(cols)
}

/// Trial rows followed by one median row per density. Wall times are
/// only written when `timings` is set, so default output is reproducible
/// byte for byte.
pub fn sweep_table(groups: &[Vec<SweepRecord>], timings: bool) -> Table {
    let mut t = sweep_header(timings);
    for r in groups.iter().flatten() {
        let mut row = vec![
            "trial".to_string(),
            r.seed.to_string(),
            r.n.to_string(),
            r.edge_count.to_string(),
            fmt_float(r.density),
            r.diameter.to_string(),
            fmt_float(r.mu_fssc),
            fmt_float(r.mu_fssc_sq),
            fmt_float(r.mu2_at_fssc),
            fmt_float(r.mu2_preconditioned),
            fmt_float(r.lower_bound),
            fmt_float(r.ratio()),
        ];
        if timings {
            row.extend([r.time_bound_s, r.time_fssc_s, r.time_p2_s].map(fmt_float));
        }
        t.push(row);
    }
    for g in groups {
        t.push(aggregate_row(&aggregate(g), timings));
    }
    t
}

/// Median rows only, one per density.
pub fn aggregate_table(groups: &[Vec<SweepRecord>]) -> Table {
    let mut t = sweep_header(false);
    for g in groups {
        t.push(aggregate_row(&aggregate(g), false));
    }
    t
}

/// Acceleration ratios of all trials sharing one diameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiameterGroup {
    pub diameter: usize,
    pub count: usize,
    pub ratio_median: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Trials whose preconditioned rate sits at the lower bound.
    pub at_bound: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiameterPartition {
    /// Sorted by diameter, then seed.
    pub records: Vec<SweepRecord>,
    pub groups: Vec<DiameterGroup>,
}

pub fn diameter_partition(
    n: usize,
    density: f64,
    trials: usize,
    seed: u64,
    opts: &OptimizeOptions,
) -> CliResult<DiameterPartition> {
    let cfg = SweepConfig {
        n,
        densities: vec![density],
        trials,
        seed,
        opts: *opts,
    };
    let mut records = sweep(&cfg)?.concat();
    records.sort_by_key(|r| (r.diameter, r.seed));
    let groups = records
        .chunk_by(|a, b| a.diameter == b.diameter)
        .map(|chunk| {
            let ratios = chunk.iter().map(SweepRecord::ratio);
            DiameterGroup {
                diameter: chunk[0].diameter,
                count: chunk.len(),
                ratio_median: median(ratios.clone()),
                ratio_min: ratios.clone().fold(f64::INFINITY, f64::min),
                ratio_max: ratios.fold(f64::NEG_INFINITY, f64::max),
                at_bound: chunk.iter().filter(|r| r.at_bound()).count(),
            }
        })
        .collect();
    Ok(DiameterPartition { records, groups })
}

pub const PARTITION_COLUMNS: [&str; 12] = [
    "kind",
    "diameter",
    "seed",
    "edge_count",
    "mu2_at_fssc",
    "mu2_preconditioned",
    "lower_bound",
    "ratio",
    "at_bound",
    "count",
    "ratio_min",
    "ratio_max",
];

/// Trial rows grouped by diameter, then one summary row per diameter. In
/// summary rows `ratio` is the median and `at_bound` the number of flagged
/// trials.
pub fn partition_table(p: &DiameterPartition) -> Table {
    let mut t = Table::new(PARTITION_COLUMNS);
    for r in &p.records {
        t.push(vec![
            "trial".into(),
            r.diameter.to_string(),
            r.seed.to_string(),
            r.edge_count.to_string(),
            fmt_float(r.mu2_at_fssc),
            fmt_float(r.mu2_preconditioned),
            fmt_float(r.lower_bound),
            fmt_float(r.ratio()),
            u8::from(r.at_bound()).to_string(),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    for g in &p.groups {
        t.push(vec![
            "diameter".into(),
            g.diameter.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            fmt_float(g.ratio_median),
            g.at_bound.to_string(),
            g.count.to_string(),
            fmt_float(g.ratio_min),
            fmt_float(g.ratio_max),
        ]);
    }
    t
}
