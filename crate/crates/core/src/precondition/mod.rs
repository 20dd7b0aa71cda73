//! Edge-weight design: fastest single-step weights (minimum SLEM), weights
//! minimizing the optimal two-step rate, and related constructions.
//!
//! Both optimizers minimize a log-sum-exp smoothing of a `max |·|` over the
//! non-consensus spectrum, tightening the smoothing in stages and solving
//! each stage with L-BFGS. The exact (non-smooth) objective is evaluated at
//! every point visited and the best point is reported.

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::{center, spectrum, WeightMatrix};

mod k2m;
mod lbfgs;
pub mod objective;
mod witness;

pub use k2m::{k2m_symmetry_breaking, k2m_weight_matrix, K2mWeights};
pub use witness::{
    nonconvexity_witness, nonconvexity_witness_with, witness_best_fit_residual, WitnessEntry,
    WitnessReport,
};

use objective::{mu2_of_values, slem_of_values, soft_max_abs, Reducer};

/// Consecutive small-change steps required before a stage stops.
pub const PATIENCE: usize = 25;
/// Relative size of the random perturbation applied to odd restarts.
pub const RESTART_PERTURBATION: f64 = 0.2;
/// Even restarts `2, 4, ...` draw `u_i` uniform in `±WIDE_PERTURBATION`
/// per node and scale edge `(i, j)` by `exp(u_i + u_j)`, which breaks
/// symmetric local minima between nodes of different roles.
pub const WIDE_PERTURBATION: f64 = 1.0;

const FSSC_BETAS: [f64; 8] = [1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8];

fn p2_betas() -> impl Iterator<Item = f64> {
    (2..=16).map(|k| 10f64.powf(f64::from(k) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    /// Iteration budget per restart, shared by all smoothing stages.
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Keep every edge weight nonnegative.
    pub nonneg: bool,
    /// Length of the first trial step of each stage.
    pub step_init: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            max_iters: 5000,
            tol: 1e-9,
            restarts: 8,
            seed: 0,
            nonneg: false,
            step_init: 0.1,
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.step_init > 0.0) {
            return Err(Error::InvalidArgument("step_init must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionResult {
    /// Optimized matrix. Two-step designs are returned centered.
    pub matrix: WeightMatrix,
    pub mu2: f64,
    pub mu: f64,
    pub sigma: f64,
    /// SLEM of the fastest single-step weights on the square graph, a lower
    /// bound on any two-step rate achievable on the graph.
    pub lower_bound: f64,
    /// `(iteration, best objective so far)` of the winning run.
    pub history: Vec<(usize, f64)>,
    pub restart_index: usize,
    pub iterations: usize,
}

/// Weights `1 / (1 + max(d_i, d_j))`.
pub fn metropolis_weights(g: &Graph) -> Vec<f64> {
    let deg = g.degrees();
    g.edges()
        .iter()
        .map(|&(i, j)| 1.0 / (1.0 + deg[i].max(deg[j]) as f64))
        .collect()
}

fn check_connected(g: &Graph) -> Result<()> {
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    Ok(())
}

struct Tracker {
    best: f64,
    best_x: Vec<f64>,
    history: Vec<(usize, f64)>,
    iters: usize,
}

impl Tracker {
    fn new(x: &[f64]) -> Tracker {
        Tracker {
            best: f64::INFINITY,
            best_x: x.to_vec(),
            history: Vec::new(),
            iters: 0,
        }
    }

    fn offer(&mut self, value: f64, x: &[f64]) {
        if value < self.best {
            self.best = value;
            self.best_x.copy_from_slice(x);
        }
    }

    fn step(&mut self) {
        self.iters += 1;
        self.history.push((self.iters, self.best));
    }
}

/// Run the smoothing stages. `eval(beta, x, grad)` returns the smoothed value
/// and the exact objective at `x`.
fn continuation<F>(
    betas: impl Iterator<Item = f64>,
    x0: Vec<f64>,
    bounded: &[bool],
    opts: &OptimizeOptions,
    eval: F,
) -> Tracker
where
    F: Fn(f64, &[f64], &mut [f64]) -> Option<(f64, f64)>,
{
    let tracker = RefCell::new(Tracker::new(&x0));
    let mut x = x0;
    for beta in betas {
        let used = tracker.borrow().iters;
        if used >= opts.max_iters {
            break;
        }
        let settings = lbfgs::Settings {
            max_iters: opts.max_iters - used,
            tol: opts.tol,
            patience: PATIENCE,
            step_init: opts.step_init,
        };
        let out = lbfgs::minimize(
            |x, grad| match eval(beta, x, grad) {
                Some((smooth, exact)) => {
                    tracker.borrow_mut().offer(exact, x);
                    smooth
                }
                None => f64::INFINITY,
            },
            x,
            bounded,
            &settings,
            || tracker.borrow_mut().step(),
        );
        x = out.x;
    }
    tracker.into_inner()
}

/// Minimum-SLEM weights as a raw weight vector plus run statistics.
fn solve_fssc(g: &Graph, opts: &OptimizeOptions, nonneg: bool) -> Tracker {
    let reducer = Reducer::new(g.n());
    let m = g.edge_count();
    let eval = |beta: f64, w: &[f64], grad: &mut [f64]| {
        let spec = reducer.decompose(g, w).ok()?;
        let mut dp = vec![0.0; spec.values.len()];
        let smooth = soft_max_abs(&spec.values, beta, &mut dp);
        for (e, &(a, b)) in g.edges().iter().enumerate() {
            grad[e] = -dp
                .iter()
                .enumerate()
                .map(|(i, d)| d * (spec.vectors[(a, i)] - spec.vectors[(b, i)]).powi(2))
                .sum::<f64>();
        }
        Some((smooth, slem_of_values(&spec.values)))
    };
    let x0 = metropolis_weights(g);
    let mut t = continuation(FSSC_BETAS.into_iter(), x0.clone(), &vec![nonneg; m], opts, eval);
    if !t.best.is_finite() {
        t.best_x = x0;
    }
    t
}

fn summarize(
    matrix: WeightMatrix,
    lower_bound: f64,
    t: Tracker,
    restart_index: usize,
) -> Result<PreconditionResult> {
    let spec = spectrum(&matrix)?;
    let mu2 = mu2_of_values(&spec.lambdas);
    Ok(PreconditionResult {
        mu: spec.mu,
        sigma: spec.sigma,
        mu2,
        matrix,
        lower_bound,
        history: t.history,
        restart_index,
        iterations: t.iters,
    })
}

/// Weights minimizing the SLEM `mu` of `P`. The problem is convex, so a
/// single run from Metropolis weights is used and `restarts` is ignored.
pub fn optimize_fssc(g: &Graph, opts: &OptimizeOptions) -> Result<PreconditionResult> {
    opts.validate()?;
    check_connected(g)?;
    let lower_bound = lower_bound_square(g, opts)?;
    optimize_fssc_with_bound(g, lower_bound, opts)
}

/// [`optimize_fssc`] with a precomputed lower bound.
pub fn optimize_fssc_with_bound(
    g: &Graph,
    lower_bound: f64,
    opts: &OptimizeOptions,
) -> Result<PreconditionResult> {
    opts.validate()?;
    check_connected(g)?;
    let t = solve_fssc(g, opts, opts.nonneg);
    let matrix = WeightMatrix::new(g.clone(), t.best_x.clone())?;
    summarize(matrix, lower_bound, t, 0)
}

/// SLEM of the fastest single-step weights on the square graph, with signed
/// weights allowed. Zero when the diameter is at most 2.
pub fn lower_bound_square(g: &Graph, opts: &OptimizeOptions) -> Result<f64> {
    opts.validate()?;
    match g.diameter() {
        None => Err(Error::Disconnected),
        Some(d) if d <= 2 => Ok(0.0),
        Some(_) => {
            let sq = g.square();
            Ok(solve_fssc(&sq, opts, false).best)
        }
    }
}

/// Weights minimizing the optimal two-step rate of the centered matrix,
/// best over `restarts` runs. Restart 0 starts at the fastest single-step
/// weights, the others at seeded perturbations of them, alternating between
/// small and wide perturbations.
pub fn optimize_p2(g: &Graph, opts: &OptimizeOptions) -> Result<PreconditionResult> {
    opts.validate()?;
    check_connected(g)?;
    let start = solve_fssc(g, opts, opts.nonneg);
    let start = WeightMatrix::new(g.clone(), start.best_x)?;
    let lower_bound = lower_bound_square(g, opts)?;
    optimize_p2_from(&start, lower_bound, opts)
}

/// [`optimize_p2`] from given start weights and a precomputed lower bound.
pub fn optimize_p2_from(
    start: &WeightMatrix,
    lower_bound: f64,
    opts: &OptimizeOptions,
) -> Result<PreconditionResult> {
    opts.validate()?;
    let g = start.graph();
    check_connected(g)?;
    let runs: Vec<(usize, Tracker)> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| (r, p2_run(g, start.weights(), r, opts)))
        .collect();
    let (index, best) = runs
        .into_iter()
        .min_by(|(ia, a), (ib, b)| a.best.total_cmp(&b.best).then(ia.cmp(ib)))
        .expect("at least one restart");
    if !best.best.is_finite() {
        return Err(Error::Numerical("no restart reached a connected weighting".into()));
    }
    let matrix = center(&WeightMatrix::new(g.clone(), best.best_x[..g.edge_count()].to_vec())?)?;
    summarize(matrix, lower_bound, best, index)
}

fn p2_run(g: &Graph, w0: &[f64], restart: usize, opts: &OptimizeOptions) -> Tracker {
    let m = g.edge_count();
    let mut w = w0.to_vec();
    if restart > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(restart as u64));
        if restart % 2 == 1 {
            for x in &mut w {
                *x *= 1.0 + RESTART_PERTURBATION * rng.gen_range(-1.0..=1.0);
            }
        } else {
            let node: Vec<f64> = (0..g.n())
                .map(|_| WIDE_PERTURBATION * rng.gen_range(-1.0..=1.0))
                .collect();
            for (x, &(i, j)) in w.iter_mut().zip(g.edges()) {
                *x *= (node[i] + node[j]).exp();
            }
        }
    }
    let reducer = Reducer::new(g.n());
    let (b, c) = match reducer.decompose(g, &w) {
        Ok(spec) => filter_coefficients(&spec.values),
        Err(_) => (1.0, 0.0),
    };
    let mut x0 = w;
    x0.extend([b, c]);

    // p(λ) = 1 + b (λ - 1) + c (λ² - 1)
    let eval = |beta: f64, x: &[f64], grad: &mut [f64]| {
        let (w, b, c) = (&x[..m], x[m], x[m + 1]);
        let spec = reducer.decompose(g, w).ok()?;
        let p: Vec<f64> = spec
            .values
            .iter()
            .map(|l| 1.0 + b * (l - 1.0) + c * (l * l - 1.0))
            .collect();
        let mut dp = vec![0.0; p.len()];
        let smooth = soft_max_abs(&p, beta, &mut dp);
        for (e, &(ea, eb)) in g.edges().iter().enumerate() {
            grad[e] = -dp
                .iter()
                .zip(&spec.values)
                .enumerate()
                .map(|(i, (d, l))| {
                    d * (b + 2.0 * c * l) * (spec.vectors[(ea, i)] - spec.vectors[(eb, i)]).powi(2)
                })
                .sum::<f64>();
        }
        grad[m] = dp.iter().zip(&spec.values).map(|(d, l)| d * (l - 1.0)).sum();
        grad[m + 1] = dp.iter().zip(&spec.values).map(|(d, l)| d * (l * l - 1.0)).sum();
        Some((smooth, mu2_of_values(&spec.values)))
    };
    let mut bounded = vec![opts.nonneg; m];
    bounded.extend([false, false]);
    continuation(p2_betas(), x0, &bounded, opts, eval)
}

/// Coefficients `(b, c)` of the optimal two-step filter for the given
/// non-consensus eigenvalues, written as `1 + b (λ - 1) + c (λ² - 1)`.
fn filter_coefficients(values: &[f64]) -> (f64, f64) {
    let (Some(&lo), Some(&hi)) = (values.first(), values.last()) else {
        return (1.0, 0.0);
    };
    let s = 0.5 * (lo + hi);
    let d = 1.0 - s;
    let mu = (hi - lo) / (2.0 * d);
    let sigma = values.iter().fold(f64::INFINITY, |a, l| a.min((l - s).abs())) / d;
    let z_sq = 0.5 * (mu * mu + sigma * sigma);
    if !(d > 0.0) || !(z_sq < 1.0) {
        return (1.0, 0.0);
    }
    let c = 1.0 / (d * d * (1.0 - z_sq));
    (-2.0 * s * c, c)
}
