//! Consensus weight matrices and their non-consensus spectrum.
//!
//! A weight matrix is `P = I - L(w)` where `L(w)` is the Laplacian of the
//! edge weights `w`. Rows sum to one by construction, so the all-ones vector
//! is always an eigenvector with eigenvalue 1; every quantity here is taken
//! over the remaining `n - 1` eigenvalues.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};

/// Minimum |cos| between an eigenvector and the all-ones direction for it to
/// be taken as the consensus eigenvector.
pub const CONSENSUS_ALIGNMENT: f64 = 0.999;
/// Allowed distance of the consensus eigenvalue from 1.
pub const CONSENSUS_EIGENVALUE_TOL: f64 = 1e-9;
/// Eigenpair residual bound, relative to the Frobenius norm of the matrix.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Non-consensus eigenvalues below this modulus make `sigma` exactly zero.
pub const SIGMA_ZERO: f64 = 1e-12;

/// Symmetric consensus matrix supported on a graph.
///
/// Stored as one weight per edge (aligned with [`Graph::edges`]); the dense
/// matrix is derived on demand, so symmetry and unit row sums hold exactly.
/// Zero weights are allowed and denote inactive links.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    graph: Graph,
    weights: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(graph: Graph, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != graph.edge_count() {
            return Err(Error::DimensionMismatch {
                expected: graph.edge_count(),
                got: weights.len(),
            });
        }
        if let Some(k) = weights.iter().position(|w| !w.is_finite()) {
            let (i, j) = graph.edges()[k];
            return Err(Error::InvalidArgument(format!("weight on ({i}, {j}) is not finite")));
        }
        Ok(WeightMatrix { graph, weights })
    }

    pub fn uniform(graph: Graph, weight: f64) -> Self {
        let weights = vec![weight; graph.edge_count()];
        WeightMatrix { graph, weights }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Edge weights in [`Graph::edges`] order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.graph.edge_index(i, j).map(|k| self.weights[k])
    }

    pub fn weight_map(&self) -> BTreeMap<Edge, f64> {
        self.graph
            .edges()
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
            .collect()
    }

    /// Diagonal entry `1 - sum of incident weights`.
    pub fn diagonal(&self, i: usize) -> f64 {
        1.0 - self
            .graph
            .edges()
            .iter()
            .zip(&self.weights)
            .filter(|((a, b), _)| *a == i || *b == i)
            .map(|(_, w)| w)
            .sum::<f64>()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut p = DMatrix::identity(n, n);
        for (&(i, j), &w) in self.graph.edges().iter().zip(&self.weights) {
            p[(i, j)] += w;
            p[(j, i)] += w;
            p[(i, i)] -= w;
            p[(j, j)] -= w;
        }
        p
    }

    /// Same support with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> WeightMatrix {
        WeightMatrix {
            graph: self.graph.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<WeightMatrix> {
        WeightMatrix::new(self.graph.clone(), weights)
    }

    /// Graph of the edges carrying a nonzero weight.
    pub fn active_support(&self) -> Graph {
        let active = self
            .graph
            .edges()
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w != 0.0)
            .map(|(&e, _)| e);
        Graph::new(self.n(), active).expect("subgraph of a valid graph")
    }

    /// All `n` eigenvalues of `P`, ascending, including the consensus one.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let dec = Decomposition::of(&self.matrix())?;
        Ok(dec.values)
    }
}

/// Build `P = I - L` from explicit edge weights, which must cover exactly
/// the edges of `g`.
pub fn weight_matrix(g: &Graph, weights: &BTreeMap<Edge, f64>) -> Result<WeightMatrix> {
    for &(i, j) in weights.keys() {
        if !g.has_edge(i, j) {
            return Err(Error::EdgeNotInGraph((i, j)));
        }
    }
    let mut per_edge = Vec::with_capacity(g.edge_count());
    for &(i, j) in g.edges() {
        let w = weights
            .get(&(i, j))
            .or_else(|| weights.get(&(j, i)))
            .ok_or(Error::MissingWeight((i, j)))?;
        per_edge.push(*w);
    }
    WeightMatrix::new(g.clone(), per_edge)
}

/// Non-consensus eigenvalues of a weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Ascending, consensus eigenvalue removed.
    pub lambdas: Vec<f64>,
    /// Second largest eigenvalue modulus, `max |λ|`.
    pub mu: f64,
    /// Smallest eigenvalue modulus, `min |λ|`.
    pub sigma: f64,
    /// Whether `max λ = -min λ` up to `1e-9 (1 + mu)`.
    pub centered: bool,
}

impl Spectrum {
    pub fn from_lambdas(mut lambdas: Vec<f64>) -> Spectrum {
        lambdas.sort_by(f64::total_cmp);
        let mu = lambdas.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
        let sigma = if lambdas.is_empty() || lambdas.iter().any(|l| l.abs() < SIGMA_ZERO) {
            0.0
        } else {
            lambdas.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()))
        };
        let centered = match (lambdas.first(), lambdas.last()) {
            (Some(lo), Some(hi)) => (hi + lo).abs() <= 1e-9 * (1.0 + mu),
            _ => true,
        };
        Spectrum {
            lambdas,
            mu,
            sigma,
            centered,
        }
    }

    pub fn max(&self) -> f64 {
        self.lambdas.last().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.lambdas.first().copied().unwrap_or(0.0)
    }

    /// Midpoint `s` of the extreme non-consensus eigenvalues.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.max() + self.min())
    }

    /// Spectrum of the centered matrix `(P - sI) / (1 - s)`.
    pub fn centered_image(&self) -> Result<Spectrum> {
        let s = self.midpoint();
        if s >= 1.0 {
            return Err(Error::Numerical(format!(
                "spectral midpoint {s} >= 1 cannot be centered"
            )));
        }
        let mut image = Spectrum::from_lambdas(
            self.lambdas.iter().map(|l| (l - s) / (1.0 - s)).collect(),
        );
        // the affine map makes the extremes symmetric up to rounding
        image.centered = true;
        Ok(image)
    }
}

/// Eigendecomposition of `P` with the consensus eigenvector identified.
pub fn spectrum(p: &WeightMatrix) -> Result<Spectrum> {
    if !p.active_support().is_connected() {
        return Err(Error::Disconnected);
    }
    let dec = Decomposition::of(&p.matrix())?;
    let c = dec.consensus_index()?;
    let lambdas: Vec<f64> = dec
        .values
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != c)
        .map(|(_, &l)| l)
        .collect();
    if lambdas
        .iter()
        .any(|l| (l - 1.0).abs() <= CONSENSUS_EIGENVALUE_TOL)
    {
        return Err(Error::Disconnected);
    }
    Ok(Spectrum::from_lambdas(lambdas))
}

/// Affine rescaling `(P - sI) / (1 - s)` that makes the non-consensus
/// spectrum symmetric about zero.
///
/// Since `P - sI = (1 - s) I - L`, this is `I - L / (1 - s)`: the same
/// support with every weight divided by `1 - s`.
pub fn center(p: &WeightMatrix) -> Result<WeightMatrix> {
    let s = spectrum(p)?.midpoint();
    if s >= 1.0 {
        return Err(Error::Numerical(format!(
            "spectral midpoint {s} >= 1 on a connected support"
        )));
    }
    Ok(p.scaled(1.0 / (1.0 - s)))
}

/// Whether the centered spectrum has only the two values `±mu`, so that one
/// optimal two-step filter application reaches exact consensus.
pub fn is_deadbeat_2step(s: &Spectrum, tol: f64) -> bool {
    match s.centered_image() {
        Ok(c) => c.mu - c.sigma <= tol,
        Err(_) => false,
    }
}

/// Ascending eigenpairs of a symmetric matrix with a residual check.
#[derive(Debug, Clone)]
pub(crate) struct Decomposition {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl Decomposition {
    pub fn of(m: &DMatrix<f64>) -> Result<Decomposition> {
        let n = m.nrows();
        let eig = SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);

        let bound = RESIDUAL_TOL * m.norm().max(f64::MIN_POSITIVE);
        for (k, &lambda) in values.iter().enumerate() {
            let v = vectors.column(k);
            let residual = (m * v - v * lambda).norm();
            if !(residual <= bound) {
                return Err(Error::Numerical(format!(
                    "eigenpair {k} residual {residual:e} exceeds {bound:e}"
                )));
            }
        }
        Ok(Decomposition { values, vectors })
    }

    /// Index of the eigenvector best aligned with the all-ones direction.
    pub fn consensus_index(&self) -> Result<usize> {
        let n = self.values.len();
        let scale = 1.0 / (n as f64).sqrt();
        let (k, cos) = (0..n)
            .map(|k| (k, (self.vectors.column(k).sum() * scale).abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::Numerical("empty matrix".into()))?;
        if cos <= CONSENSUS_ALIGNMENT {
            return Err(Error::Numerical(format!(
                "no eigenvector aligned with the consensus direction (best |cos| = {cos})"
            )));
        }
        if (self.values[k] - 1.0).abs() > CONSENSUS_EIGENVALUE_TOL {
            return Err(Error::Numerical(format!(
                "consensus eigenvalue {} differs from 1",
                self.values[k]
            )));
        }
        Ok(k)
    }
}
