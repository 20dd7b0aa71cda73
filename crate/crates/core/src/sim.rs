//! Consensus dynamics: standard steps, memory slots, alternating filter
//! steps with optional skips and link failures, and empirical rates.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::filter::{factor_steps, AMode, QuadFilter, StepPair};
use crate::graph::Edge;
use crate::spectral::{center, WeightMatrix};

/// Final deviation below this fraction of the initial one means converged.
pub const CONVERGED_RATIO: f64 = 1e-10;
/// Final deviation above this multiple of the initial one means diverged.
pub const DIVERGED_RATIO: f64 = 1e6;
/// Deviations below this fraction of `‖x(0)‖` are treated as round-off
/// when fitting rates.
pub const RATE_FLOOR: f64 = 1e-12;
/// Minimum trace length accepted by [`estimate_rate`].
pub const MIN_RATE_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    Diverged,
    Undecided,
}

/// Recorded run. Index `k` of each series is the state after `k` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    /// `‖x(k) - avg(x(0)) 1‖`.
    pub deviations: Vec<f64>,
    /// `|mean(x(k)) - mean(x(0))|`.
    pub consensus_value_drift: Vec<f64>,
    /// Steps actually applied; runs stop early once diverged.
    pub steps: usize,
    pub verdict: Verdict,
    /// Per-step decay over the last half of the run, when long enough.
    pub rate_estimate: Option<f64>,
    /// Deviation level treated as round-off by [`estimate_rate`].
    pub noise_floor: f64,
}

impl SimTrace {
    /// Trace from a bare deviation series (drift taken as zero, noise floor
    /// relative to the first deviation).
    pub fn from_deviations(deviations: Vec<f64>) -> SimTrace {
        let drift = vec![0.0; deviations.len()];
        let floor = RATE_FLOOR * deviations.first().copied().unwrap_or(0.0);
        SimTrace::finish(deviations, drift, floor)
    }

    fn finish(deviations: Vec<f64>, consensus_value_drift: Vec<f64>, noise_floor: f64) -> SimTrace {
        let steps = deviations.len().saturating_sub(1);
        let d0 = deviations.first().copied().unwrap_or(0.0);
        let last = deviations.last().copied().unwrap_or(0.0);
        let verdict = if !last.is_finite() || last > DIVERGED_RATIO * d0 {
            Verdict::Diverged
        } else if d0 == 0.0 || last < CONVERGED_RATIO * d0 {
            Verdict::Converged
        } else {
            Verdict::Undecided
        };
        let mut trace = SimTrace {
            deviations,
            consensus_value_drift,
            steps,
            verdict,
            rate_estimate: None,
            noise_floor,
        };
        trace.rate_estimate = estimate_rate(&trace).ok().map(|r| r.per_step);
        trace
    }

    pub fn initial_deviation(&self) -> f64 {
        self.deviations[0]
    }

    pub fn final_deviation(&self) -> f64 {
        *self.deviations.last().expect("trace holds the initial state")
    }

    /// `step,deviation,mean_drift` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,deviation,mean_drift\n");
        for (k, (d, m)) in self
            .deviations
            .iter()
            .zip(&self.consensus_value_drift)
            .enumerate()
        {
            out.push_str(&format!("{k},{d:.9e},{m:.9e}\n"));
        }
        out
    }
}

struct Recorder {
    target: f64,
    d0: f64,
    floor: f64,
    deviations: Vec<f64>,
    drift: Vec<f64>,
}

impl Recorder {
    fn new(x0: &DVector<f64>) -> Recorder {
        let target = x0.mean();
        let d0 = x0.map(|v| v - target).norm();
        Recorder {
            target,
            d0,
            floor: RATE_FLOOR * x0.norm(),
            deviations: vec![d0],
            drift: vec![0.0],
        }
    }

    /// Record a state; false once the run has diverged.
    fn record(&mut self, x: &DVector<f64>) -> bool {
        let d = x.map(|v| v - self.target).norm();
        self.deviations.push(d);
        self.drift.push((x.mean() - self.target).abs());
        d.is_finite() && d <= DIVERGED_RATIO * self.d0
    }

    fn finish(self) -> SimTrace {
        SimTrace::finish(self.deviations, self.drift, self.floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    /// Geometric-mean per-step ratio.
    pub per_step: f64,
    /// Ratio over two consecutive steps, fitted on even indices.
    pub two_step: f64,
}

/// Geometric decay of the deviations over the last half of the trace.
///
/// The fit window stops before the deviation first reaches the trace's
/// noise floor; a trace that hits the floor within a few steps reports a
/// zero rate.
pub fn estimate_rate(trace: &SimTrace) -> Result<RateEstimate> {
    if trace.steps < MIN_RATE_STEPS {
        return Err(Error::InvalidArgument(format!(
            "rate estimate needs at least {MIN_RATE_STEPS} steps, got {}",
            trace.steps
        )));
    }
    let d = &trace.deviations;
    let floor = trace.noise_floor;
    let end = match d.iter().position(|&v| v <= floor) {
        Some(k) => k.saturating_sub(1),
        None => d.len() - 1,
    };
    if end < 4 {
        return Ok(RateEstimate {
            per_step: 0.0,
            two_step: 0.0,
        });
    }
    let mid = end / 2;
    let per_step = (d[end] / d[mid]).powf(1.0 / (end - mid) as f64);
    let (e_end, e_mid) = (end - end % 2, mid - mid % 2);
    let two_step = if e_end > e_mid {
        (d[e_end] / d[e_mid]).powf(2.0 / (e_end - e_mid) as f64)
    } else {
        per_step * per_step
    };
    Ok(RateEstimate { per_step, two_step })
}

fn check_dim(p: &WeightMatrix, x0: &[f64]) -> Result<()> {
    if x0.len() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            got: x0.len(),
        });
    }
    Ok(())
}

/// `x(k+1) = P x(k)`.
pub fn run_standard(p: &WeightMatrix, x0: &[f64], steps: usize) -> Result<SimTrace> {
    check_dim(p, x0)?;
    if !p.active_support().is_connected() {
        return Err(Error::Disconnected);
    }
    let m = p.matrix();
    let mut x = DVector::from_column_slice(x0);
    let mut rec = Recorder::new(&x);
    for _ in 0..steps {
        x = &m * x;
        if !rec.record(&x) {
            break;
        }
    }
    Ok(rec.finish())
}

/// `x(k+1) = (I - w1 L) x(k) + w2 (x(k-1) - x(k))` with `L = I - P` and
/// `x(-1) = x(0)`.
pub fn run_memory_slot(
    p: &WeightMatrix,
    w1: f64,
    w2: f64,
    x0: &[f64],
    steps: usize,
) -> Result<SimTrace> {
    check_dim(p, x0)?;
    let n = p.n();
    let lap = DMatrix::identity(n, n) - p.matrix();
    let step = DMatrix::identity(n, n) - lap * w1;
    let mut prev = DVector::from_column_slice(x0);
    let mut x = prev.clone();
    let mut rec = Recorder::new(&x);
    for _ in 0..steps {
        let next = &step * &x + (&prev - &x) * w2;
        prev = std::mem::replace(&mut x, next);
        if !rec.record(&x) {
            break;
        }
    }
    Ok(rec.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    /// `P- = a (P - z) / (1 - z)`.
    Minus,
    /// `P+ = (P + z) / (a (1 + z))`.
    Plus,
    /// Plain step with the (centered) `P`.
    Standard,
    /// No update.
    Skip,
}

impl std::str::FromStr for StepAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<StepAction> {
        match s.trim() {
            "minus" | "-" => Ok(StepAction::Minus),
            "plus" | "+" => Ok(StepAction::Plus),
            "standard" | "p" => Ok(StepAction::Standard),
            "skip" | "0" => Ok(StepAction::Skip),
            other => Err(Error::InvalidArgument(format!("unknown step action '{other}'"))),
        }
    }
}

/// Which filter step a resonant failure hits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonantPhase {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FailureMode {
    /// Listed edges are down at every step.
    Permanent,
    /// Listed edges are down on every step of one kind, i.e. every second
    /// step of the alternating pattern.
    Resonant(ResonantPhase),
    /// Each listed edge is independently down with probability `prob` at
    /// each step.
    Random { prob: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkFailure {
    pub mode: FailureMode,
    pub edges: Vec<Edge>,
}

/// Cyclic step pattern with an optional failure scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub pattern: Vec<StepAction>,
    pub failure: Option<LinkFailure>,
}

impl Schedule {
    pub fn new(pattern: Vec<StepAction>) -> Result<Schedule> {
        if pattern.is_empty() {
            return Err(Error::InvalidArgument("step pattern is empty".into()));
        }
        Ok(Schedule {
            pattern,
            failure: None,
        })
    }

    /// `P-, P+, P-, P+, ...`
    pub fn alternating() -> Schedule {
        Schedule {
            pattern: vec![StepAction::Minus, StepAction::Plus],
            failure: None,
        }
    }

    pub fn with_failure(mut self, failure: LinkFailure) -> Schedule {
        self.failure = Some(failure);
        self
    }

    /// Comma-separated actions, e.g. `minus,plus,skip`.
    pub fn parse_pattern(s: &str) -> Result<Vec<StepAction>> {
        s.split(',').map(str::parse).collect()
    }
}

/// Drop the given links: each failed weight moves onto the two diagonal
/// entries, so the matrix stays symmetric with unit row sums.
pub fn apply_link_failure(p: &WeightMatrix, edges: &[Edge]) -> Result<WeightMatrix> {
    let mut weights = p.weights().to_vec();
    for &(i, j) in edges {
        let k = p.graph().edge_index(i, j).ok_or(Error::EdgeNotInGraph((i, j)))?;
        weights[k] = 0.0;
    }
    p.with_weights(weights)
}

struct StepMatrices {
    minus: DMatrix<f64>,
    plus: DMatrix<f64>,
    standard: DMatrix<f64>,
}

impl StepMatrices {
    fn new(p: &WeightMatrix, pair: &StepPair) -> StepMatrices {
        let standard = p.matrix();
        StepMatrices {
            minus: pair.minus_matrix(&standard),
            plus: pair.plus_matrix(&standard),
            standard,
        }
    }

    fn get(&self, action: StepAction) -> Option<&DMatrix<f64>> {
        match action {
            StepAction::Minus => Some(&self.minus),
            StepAction::Plus => Some(&self.plus),
            StepAction::Standard => Some(&self.standard),
            StepAction::Skip => None,
        }
    }
}

/// Alternating filter steps on the centered image of `p`.
///
/// `f` must be designed for that centered spectrum (possibly capped).
/// Failures are applied to the centered matrix before the step map.
pub fn run_p2(
    p: &WeightMatrix,
    f: &QuadFilter,
    a_mode: AMode,
    schedule: &Schedule,
    x0: &[f64],
    steps: usize,
) -> Result<SimTrace> {
    check_dim(p, x0)?;
    if schedule.pattern.is_empty() {
        return Err(Error::InvalidArgument("step pattern is empty".into()));
    }
    let pc = center(p)?;
    let pair = factor_steps(f, a_mode)?;
    let intact = StepMatrices::new(&pc, &pair);

    let failed = match &schedule.failure {
        Some(fail) => {
            let pf = apply_link_failure(&pc, &fail.edges)?;
            if let FailureMode::Random { prob, .. } = fail.mode {
                if !(0.0..=1.0).contains(&prob) {
                    return Err(Error::InvalidArgument(format!(
                        "failure probability {prob} outside [0, 1]"
                    )));
                }
            }
            Some(StepMatrices::new(&pf, &pair))
        }
        None => None,
    };
    let mut rng = match schedule.failure.as_ref().map(|f| f.mode) {
        Some(FailureMode::Random { seed, .. }) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };

    let mut x = DVector::from_column_slice(x0);
    let mut rec = Recorder::new(&x);
    for k in 0..steps {
        let action = schedule.pattern[k % schedule.pattern.len()];
        let matrix = match (&schedule.failure, &failed) {
            (Some(fail), Some(down)) => match fail.mode {
                FailureMode::Permanent => down.get(action).cloned(),
                FailureMode::Resonant(phase) => {
                    let hit = matches!(
                        (phase, action),
                        (ResonantPhase::Plus, StepAction::Plus)
                            | (ResonantPhase::Minus, StepAction::Minus)
                    );
                    if hit { down } else { &intact }.get(action).cloned()
                }
                FailureMode::Random { prob, .. } => {
                    let rng = rng.as_mut().expect("seeded for random failures");
                    let now: Vec<Edge> = fail
                        .edges
                        .iter()
                        .copied()
                        .filter(|_| rng.gen_bool(prob))
                        .collect();
                    if action == StepAction::Skip {
                        None
                    } else if now.is_empty() {
                        intact.get(action).cloned()
                    } else {
                        let pf = apply_link_failure(&pc, &now)?;
                        StepMatrices::new(&pf, &pair).get(action).cloned()
                    }
                }
            },
            _ => intact.get(action).cloned(),
        };
        if let Some(m) = matrix {
            x = m * x;
        }
        if !rec.record(&x) {
            break;
        }
    }
    Ok(rec.finish())
}

/// Initial states used by experiments: `e1` and a seeded uniform vector.
pub fn default_initial_states(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = (0..n).map(|_| rng.gen::<f64>()).collect();
    vec![e1, random]
}

/// Worst verdict over several runs: diverged beats undecided beats converged.
pub fn worst_verdict(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    verdicts.into_iter().fold(Verdict::Converged, |acc, v| match (acc, v) {
        (Verdict::Diverged, _) | (_, Verdict::Diverged) => Verdict::Diverged,
        (Verdict::Undecided, _) | (_, Verdict::Undecided) => Verdict::Undecided,
        _ => Verdict::Converged,
    })
}

/// Outcome of failing one edge under both failure modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureScanRow {
    pub edge: Edge,
    pub weight: f64,
    pub permanent: Verdict,
    pub resonant: Verdict,
}

/// Fail each edge alone, permanently and resonantly (on `P+` steps), and
/// record the worst verdict over [`default_initial_states`].
pub fn single_edge_failure_scan(
    p: &WeightMatrix,
    f: &QuadFilter,
    a_mode: AMode,
    steps: usize,
    seed: u64,
) -> Result<Vec<FailureScanRow>> {
    let x0s = default_initial_states(p.n(), seed);
    let run = |edge: Edge, mode: FailureMode| -> Result<Verdict> {
        let schedule = Schedule::alternating().with_failure(LinkFailure {
            mode,
            edges: vec![edge],
        });
        let mut verdicts = Vec::new();
        for x0 in &x0s {
            verdicts.push(run_p2(p, f, a_mode, &schedule, x0, steps)?.verdict);
        }
        Ok(worst_verdict(verdicts))
    };
    p.graph()
        .edges()
        .iter()
        .zip(p.weights())
        .map(|(&edge, &weight)| {
            Ok(FailureScanRow {
                edge,
                weight,
                permanent: run(edge, FailureMode::Permanent)?,
                resonant: run(edge, FailureMode::Resonant(ResonantPhase::Plus))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::spectral::spectrum;

    fn centered_star() -> WeightMatrix {
        WeightMatrix::uniform(Graph::star(4), 1.0 / 3.0)
    }

    #[test]
    fn complete_graph_converges_in_one_step() {
        let p = WeightMatrix::uniform(Graph::complete(5), 0.2);
        let t = run_standard(&p, &[1.0, 2.0, 0.0, -4.0, 7.0], 20).unwrap();
        assert!(t.deviations[1] < 1e-14);
        assert_eq!(t.verdict, Verdict::Converged);
        assert_eq!(t.rate_estimate, Some(0.0));
    }

    #[test]
    fn star_standard_rate_is_slem() {
        let t = run_standard(&centered_star(), &[1.0, 0.0, 0.0, 0.0, 0.0], 200).unwrap();
        let r = estimate_rate(&t).unwrap();
        assert!((r.per_step - 2.0 / 3.0).abs() < 1e-3, "{r:?}");
        assert!(t.consensus_value_drift.iter().all(|&d| d < 1e-12));
    }

    #[test]
    fn standard_rejects_bad_input() {
        let id = WeightMatrix::uniform(Graph::complete(3), 0.0);
        assert!(matches!(run_standard(&id, &[1.0, 0.0, 0.0], 5), Err(Error::Disconnected)));
        assert!(matches!(
            run_standard(&centered_star(), &[1.0], 5),
            Err(Error::DimensionMismatch { expected: 5, got: 1 })
        ));
    }

    #[test]
    fn memory_slot_reductions() {
        let p = WeightMatrix::uniform(Graph::cycle(6).unwrap(), 0.3);
        let x0 = [1.0, -2.0, 0.5, 0.0, 3.0, 1.0];
        let a = run_standard(&p, &x0, 40).unwrap();
        let b = run_memory_slot(&p, 1.0, 0.0, &x0, 40).unwrap();
        for (u, v) in a.deviations.iter().zip(&b.deviations) {
            assert!((u - v).abs() <= 1e-14 * (1.0 + u));
        }
        let frozen = run_memory_slot(&p, 0.0, 1.0, &x0, 100).unwrap();
        assert_eq!(frozen.verdict, Verdict::Undecided);
    }

    #[test]
    fn deadbeat_star_two_steps() {
        let p = centered_star();
        let f = QuadFilter::for_spectrum(&spectrum(&p).unwrap()).unwrap();
        let t = run_p2(&p, &f, AMode::Unit, &Schedule::alternating(), &[1.0, 0.0, 0.0, 0.0, 0.0], 20)
            .unwrap();
        assert!(t.deviations[2] < 1e-10);
        assert_eq!(t.verdict, Verdict::Converged);
        assert_eq!(estimate_rate(&t).unwrap().per_step, 0.0);
    }

    #[test]
    fn balanced_gain_moves_mean_on_odd_steps() {
        let p = WeightMatrix::uniform(Graph::cycle(7).unwrap(), 0.3);
        let f = QuadFilter::for_spectrum(&spectrum(&p).unwrap()).unwrap();
        let x0 = [1.0, 0.0, 2.0, 0.0, 0.0, 5.0, 0.0];
        let mean = x0.iter().sum::<f64>() / 7.0;
        let unit = run_p2(&p, &f, AMode::Unit, &Schedule::alternating(), &x0, 30).unwrap();
        assert!(unit.consensus_value_drift.iter().all(|&d| d < 1e-12));
        let bal = run_p2(&p, &f, AMode::Balanced, &Schedule::alternating(), &x0, 30).unwrap();
        let a = AMode::Balanced.gain(f.z()).unwrap();
        for (k, d) in bal.consensus_value_drift.iter().enumerate() {
            let expect = if k % 2 == 1 { (a - 1.0).abs() * mean } else { 0.0 };
            assert!((d - expect).abs() < 1e-12, "step {k}: {d} vs {expect}");
        }
    }

    #[test]
    fn link_failure_matrix() {
        let p = WeightMatrix::uniform(Graph::complete(4), 0.25);
        let all: Vec<Edge> = p.graph().edges().to_vec();
        let id = apply_link_failure(&p, &all).unwrap();
        assert_eq!(id.matrix(), DMatrix::identity(4, 4));
        assert_eq!(apply_link_failure(&p, &[]).unwrap(), p);
        assert!(matches!(
            apply_link_failure(&WeightMatrix::uniform(Graph::star(3), 0.2), &[(1, 2)]),
            Err(Error::EdgeNotInGraph((1, 2)))
        ));
    }

    #[test]
    fn failure_pushes_eigenvalues_up() {
        let p = WeightMatrix::uniform(Graph::complete(5), 0.2);
        let before = p.eigenvalues().unwrap();
        let after = apply_link_failure(&p, &[(0, 1)]).unwrap().eigenvalues().unwrap();
        for (b, a) in before.iter().zip(&after) {
            assert!(*a >= b - 1e-12);
        }
        assert!(after.iter().zip(&before).any(|(a, b)| a > &(b + 1e-3)));
        let m = apply_link_failure(&p, &[(0, 1)]).unwrap().matrix();
        for i in 0..5 {
            assert!((m.row(i).sum() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn geometric_sequence_rate() {
        let t = SimTrace::from_deviations((0..60).map(|k| 0.5f64.powi(k)).collect());
        let r = estimate_rate(&t).unwrap();
        assert!((r.per_step - 0.5).abs() < 1e-12);
        assert!((r.two_step - 0.25).abs() < 1e-12);
        assert!(estimate_rate(&SimTrace::from_deviations(vec![1.0; 5])).is_err());
    }

    #[test]
    fn pattern_parsing() {
        assert_eq!(
            Schedule::parse_pattern("minus,plus,skip,standard").unwrap(),
            vec![StepAction::Minus, StepAction::Plus, StepAction::Skip, StepAction::Standard]
        );
        assert!(Schedule::parse_pattern("minus,bogus").is_err());
        assert!(Schedule::new(vec![]).is_err());
    }

    #[test]
    fn worst_verdict_ordering() {
        use Verdict::*;
        assert_eq!(worst_verdict([Converged, Undecided]), Undecided);
        assert_eq!(worst_verdict([Undecided, Diverged, Converged]), Diverged);
        assert_eq!(worst_verdict([]), Converged);
    }
}
