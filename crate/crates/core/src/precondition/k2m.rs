//! Deadbeat weights on `K(2, m)` by giving the two hub nodes different
//! edge weights.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::{Decomposition, WeightMatrix};

/// Relative tolerance for grouping Laplacian eigenvalues into distinct values.
const DISTINCT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K2mWeights {
    pub q_plus: f64,
    pub q_minus: f64,
}

/// Weights `q` for the edges of the second hub such that, with weight `p` on
/// the edges of the first hub, the Laplacian of `K(2, m)` has exactly two
/// distinct nonzero eigenvalues, `p + q` and `m (p + q)`.
pub fn k2m_symmetry_breaking(m: usize, p: f64) -> Result<K2mWeights> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need m >= 2, got {m}")));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    let mf = m as f64;
    let root = (mf * mf - 4.0).sqrt();
    let out = K2mWeights {
        q_plus: 0.5 * (mf + root) * p,
        q_minus: 0.5 * (mf - root) * p,
    };
    for q in [out.q_plus, out.q_minus] {
        let distinct = distinct_nonzero_laplacian_eigenvalues(m, p, q)?;
        if distinct.len() != 2 {
            return Err(Error::Numerical(format!(
                "q = {q} leaves {} distinct nonzero eigenvalues",
                distinct.len()
            )));
        }
    }
    Ok(out)
}

/// Laplacian of `K(2, m)` with weight `p` on edges at node 0 and `q` on
/// edges at node 1.
fn laplacian(m: usize, p: f64, q: f64) -> DMatrix<f64> {
    let n = m + 2;
    let mut l = DMatrix::zeros(n, n);
    for (hub, w) in [(0, p), (1, q)] {
        for leaf in 2..n {
            l[(hub, leaf)] -= w;
            l[(leaf, hub)] -= w;
            l[(hub, hub)] += w;
            l[(leaf, leaf)] += w;
        }
    }
    l
}

/// Distinct nonzero Laplacian eigenvalues, ascending.
pub(crate) fn distinct_nonzero_laplacian_eigenvalues(m: usize, p: f64, q: f64) -> Result<Vec<f64>> {
    let dec = Decomposition::of(&laplacian(m, p, q))?;
    let scale = dec.values.last().copied().unwrap_or(1.0).abs().max(f64::MIN_POSITIVE);
    let mut out: Vec<f64> = Vec::new();
    for &v in &dec.values[1..] {
        match out.last() {
            Some(&last) if (v - last).abs() <= DISTINCT_TOL * scale => {}
            _ => out.push(v),
        }
    }
    Ok(out)
}

/// `P = I - t L` on `K(2, m)` with hub weights `p`, `q` and `t` chosen so
/// that the two nonzero Laplacian eigenvalues map to `±(m - 1)/(m + 1)`.
pub fn k2m_weight_matrix(m: usize, p: f64, q: f64) -> Result<WeightMatrix> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need m >= 2, got {m}")));
    }
    let t = 2.0 / ((m as f64 + 1.0) * (p + q));
    let g = Graph::complete_bipartite(2, m);
    let weights = g
        .edges()
        .iter()
        .map(|&(hub, _)| t * if hub == 0 { p } else { q })
        .collect();
    WeightMatrix::new(g, weights)
}
