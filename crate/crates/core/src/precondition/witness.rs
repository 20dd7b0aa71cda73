//! A convex combination of two filtered star matrices that no single
//! filtered star matrix can produce, showing that the set of achievable
//! two-step matrices is not convex.
//!
//! On the star `K(1, 4)` (hub 0) any `p(P) = αI + βP + γP²` has leaf-pair
//! entries `γ w_i w_j`. `P'` uses only edges (0,1),(0,2) and `P''` only
//! (0,3),(0,4); with `p(λ) = λ²` the average of `P'^2` and `P''^2` is
//! nonzero at leaf pairs (1,2),(3,4) and zero at the four cross pairs, but
//! `γ w1 w2 ≠ 0` and `γ w3 w4 ≠ 0` force every `γ w_i w_j ≠ 0`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::spectral::WeightMatrix;

use super::lbfgs;

pub const DEFAULT_WITNESS_WEIGHT: f64 = 0.4;
const ZERO: f64 = 1e-12;
const INSIDE: [Edge; 2] = [(1, 2), (3, 4)];
const CROSS: [Edge; 4] = [(1, 3), (1, 4), (2, 3), (2, 4)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessEntry {
    pub pair: Edge,
    pub value: f64,
    /// Whether the entry must be nonzero for the combination to be a
    /// filtered star matrix, given the nonzero inside pairs.
    pub required_nonzero: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub weight: f64,
    pub combination: DMatrix<f64>,
    /// Leaf-pair entries of the combination.
    pub entries: Vec<WitnessEntry>,
    pub confirmed: bool,
    /// All products vanish, so nothing is shown.
    pub vacuous: bool,
    pub violated_implication: Option<String>,
}

fn half_star(weight: f64, leaves: [usize; 2]) -> Result<DMatrix<f64>> {
    let g = Graph::star(4);
    let weights = g
        .edges()
        .iter()
        .map(|&(_, leaf)| if leaves.contains(&leaf) { weight } else { 0.0 })
        .collect();
    let p = WeightMatrix::new(g, weights)?.matrix();
    Ok(&p * &p)
}

pub fn nonconvexity_witness() -> WitnessReport {
    nonconvexity_witness_with(DEFAULT_WITNESS_WEIGHT).expect("default weight is valid")
}

pub fn nonconvexity_witness_with(weight: f64) -> Result<WitnessReport> {
    if !weight.is_finite() {
        return Err(Error::InvalidArgument(format!("weight {weight} is not finite")));
    }
    let combination = (half_star(weight, [1, 2])? + half_star(weight, [3, 4])?) * 0.5;
    let entries: Vec<WitnessEntry> = INSIDE
        .iter()
        .chain(&CROSS)
        .map(|&(i, j)| WitnessEntry {
            pair: (i, j),
            value: combination[(i, j)],
            required_nonzero: true,
        })
        .collect();
    let inside_nonzero = INSIDE.iter().all(|&(i, j)| combination[(i, j)].abs() > ZERO);
    let cross_zero: Vec<Edge> = CROSS
        .iter()
        .copied()
        .filter(|&(i, j)| combination[(i, j)].abs() <= ZERO)
        .collect();
    let confirmed = inside_nonzero && !cross_zero.is_empty();
    let violated_implication = confirmed.then(|| {
        format!(
            "entries (1,2) and (3,4) nonzero imply gamma w1 w2 != 0 and gamma w3 w4 != 0, \
             hence every cross entry gamma w_i w_j != 0; but {cross_zero:?} are zero"
        )
    });
    Ok(WitnessReport {
        weight,
        combination,
        entries,
        confirmed,
        vacuous: !inside_nonzero,
        violated_implication,
    })
}

/// Smallest Frobenius distance from `target` to `I + b (P - I) + c (P² - I)`
/// over star weights `w` and real `b`, `c`, minimized from `restarts`
/// seeded random starts.
pub fn witness_best_fit_residual(target: &DMatrix<f64>, restarts: usize, seed: u64) -> Result<f64> {
    let g = Graph::star(4);
    if target.shape() != (g.n(), g.n()) {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: target.nrows(),
        });
    }
    let n = g.n();
    let id = DMatrix::<f64>::identity(n, n);
    let f = |x: &[f64], grad: &mut [f64]| {
        let p = WeightMatrix::new(g.clone(), x[..4].to_vec())
            .expect("four weights")
            .matrix();
        let (b, c) = (x[4], x[5]);
        let p2 = &p * &p;
        let r = &id + (&p - &id) * b + (&p2 - &id) * c - target;
        let gm = &r * b + (&r * &p + &p * &r) * c;
        for (e, &(i, j)) in g.edges().iter().enumerate() {
            grad[e] = 2.0 * (gm[(i, j)] + gm[(j, i)] - gm[(i, i)] - gm[(j, j)]);
        }
        grad[4] = 2.0 * r.dot(&(&p - &id));
        grad[5] = 2.0 * r.dot(&(&p2 - &id));
        r.norm_squared()
    };
    let settings = lbfgs::Settings {
        max_iters: 5000,
        tol: 1e-14,
        patience: 25,
        step_init: 0.1,
    };
    let mut best = f64::INFINITY;
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let mut x: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
        x.extend([rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
        let out = lbfgs::minimize(f, x, &[false; 6], &settings, || {});
        best = best.min(out.f);
    }
    Ok(best.max(0.0).sqrt())
}
