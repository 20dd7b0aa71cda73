//! Spectral objectives as functions of raw edge weights.
//!
//! Eigenvalues are taken of `Q^T P Q`, where the columns of `Q` span the
//! complement of the all-ones vector. This yields exactly the `n - 1`
//! non-consensus eigenvalues without having to pick the consensus
//! eigenvector out of a possibly degenerate spectrum, so the functions here
//! stay defined for any real weights, including disconnected supports.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::Decomposition;

/// Eigenvalues closer than this are treated as one eigenspace when
/// differentiating.
pub const CLUSTER_TOL: f64 = 1e-7;

/// Non-consensus eigenpairs of `P(w)`, eigenvectors lifted back to `R^n`.
#[derive(Debug, Clone)]
pub struct ReducedSpectrum {
    /// Ascending.
    pub values: Vec<f64>,
    /// `n × (n - 1)`, column `k` belongs to `values[k]`.
    pub vectors: DMatrix<f64>,
}

/// Orthonormal basis of the complement of the all-ones vector: the first
/// `n - 1` columns of the Householder reflection taking `e_n` to `1/√n`.
pub(crate) fn complement_basis(n: usize) -> DMatrix<f64> {
    if n < 2 {
        return DMatrix::zeros(n, 0);
    }
    let mut v = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
    v[n - 1] -= 1.0;
    let h = DMatrix::identity(n, n) - &v * v.transpose() * (2.0 / v.norm_squared());
    h.columns(0, n - 1).into_owned()
}

pub(crate) fn weight_matrix_dense(g: &Graph, w: &[f64]) -> Result<DMatrix<f64>> {
    if w.len() != g.edge_count() {
        return Err(Error::DimensionMismatch {
            expected: g.edge_count(),
            got: w.len(),
        });
    }
    let n = g.n();
    let mut p = DMatrix::identity(n, n);
    for (&(i, j), &x) in g.edges().iter().zip(w) {
        p[(i, j)] += x;
        p[(j, i)] += x;
        p[(i, i)] -= x;
        p[(j, j)] -= x;
    }
    Ok(p)
}

/// Reusable projector for one graph size.
#[derive(Debug, Clone)]
pub(crate) struct Reducer {
    basis: DMatrix<f64>,
}

impl Reducer {
    pub fn new(n: usize) -> Reducer {
        Reducer {
            basis: complement_basis(n),
        }
    }

    pub fn decompose(&self, g: &Graph, w: &[f64]) -> Result<ReducedSpectrum> {
        let p = weight_matrix_dense(g, w)?;
        if !w.iter().all(|x| x.is_finite()) {
            return Err(Error::Numerical("non-finite weight".into()));
        }
        let q = &self.basis;
        let reduced = q.transpose() * (p * q);
        let reduced = (&reduced + reduced.transpose()) * 0.5;
        let dec = Decomposition::of(&reduced)?;
        Ok(ReducedSpectrum {
            values: dec.values,
            vectors: q * dec.vectors,
        })
    }
}

pub fn reduced_spectrum(g: &Graph, w: &[f64]) -> Result<ReducedSpectrum> {
    Reducer::new(g.n()).decompose(g, w)
}

/// `max |λ|` over the non-consensus eigenvalues.
pub fn slem_of_values(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m: f64, l| m.max(l.abs()))
}

/// Optimal two-step rate of the centered image of the given non-consensus
/// eigenvalues; infinite when the largest one reaches 1.
pub fn mu2_of_values(values: &[f64]) -> f64 {
    let (Some(&b), Some(&a)) = (values.first(), values.last()) else {
        return 0.0;
    };
    if a >= 1.0 - 1e-12 {
        return f64::INFINITY;
    }
    let s = 0.5 * (a + b);
    let d = 1.0 - s;
    let m = (a - b) / (2.0 * d);
    let sig = values
        .iter()
        .fold(f64::INFINITY, |acc, l| acc.min((l - s).abs()))
        / d;
    (m * m - sig * sig) / (2.0 - m * m - sig * sig)
}

/// SLEM of `P(w)` (no connectivity requirement).
pub fn slem(g: &Graph, w: &[f64]) -> Result<f64> {
    Ok(slem_of_values(&reduced_spectrum(g, w)?.values))
}

/// Optimal two-step rate of `P(w)` after centering.
pub fn mu2(g: &Graph, w: &[f64]) -> Result<f64> {
    Ok(mu2_of_values(&reduced_spectrum(g, w)?.values))
}

/// `∂λ/∂w_e` averaged over the eigenspace of the eigenvalues within
/// [`CLUSTER_TOL`] of `values[k]`.
fn eigenvalue_gradient(g: &Graph, spec: &ReducedSpectrum, k: usize) -> Vec<f64> {
    let center = spec.values[k];
    let members: Vec<usize> = (0..spec.values.len())
        .filter(|&i| (spec.values[i] - center).abs() <= CLUSTER_TOL)
        .collect();
    let scale = 1.0 / members.len() as f64;
    g.edges()
        .iter()
        .map(|&(a, b)| {
            -scale
                * members
                    .iter()
                    .map(|&i| (spec.vectors[(a, i)] - spec.vectors[(b, i)]).powi(2))
                    .sum::<f64>()
        })
        .collect()
}

/// Analytic gradient of [`mu2`] with respect to the edge weights.
///
/// Uses the eigenvalues that define the centered rate: the extremes (which
/// set the centering point and `mu`) and the one closest to the midpoint
/// (which sets `sigma`). Degenerate eigenvalues contribute the eigenspace
/// average of their derivatives.
pub fn mu2_gradient(g: &Graph, w: &[f64]) -> Result<Vec<f64>> {
    let spec = reduced_spectrum(g, w)?;
    let k = spec.values.len();
    if k < 2 {
        return Ok(vec![0.0; g.edge_count()]);
    }
    let (a, b) = (spec.values[k - 1], spec.values[0]);
    if a >= 1.0 - 1e-12 {
        return Err(Error::Numerical("largest non-consensus eigenvalue reaches 1".into()));
    }
    let s = 0.5 * (a + b);
    let d = 1.0 - s;
    let ic = (0..k)
        .min_by(|&x, &y| (spec.values[x] - s).abs().total_cmp(&(spec.values[y] - s).abs()))
        .expect("nonempty");
    let c = spec.values[ic];
    let sign = if c >= s { 1.0 } else { -1.0 };

    let m = (a - b) / (2.0 * d);
    let sig = sign * (c - s) / d;
    let den = 2.0 - m * m - sig * sig;
    let d_m = 4.0 * m * (1.0 - sig * sig) / (den * den);
    let d_s = -4.0 * sig * (1.0 - m * m) / (den * den);

    // m = (a - b) / (2 - a - b); sig = sign (c - s) / (1 - s), s = (a + b) / 2
    let den_m = (2.0 - a - b) * (2.0 - a - b);
    let dm_da = (2.0 - 2.0 * b) / den_m;
    let dm_db = (2.0 * a - 2.0) / den_m;
    let dsig_dc = sign / d;
    let dsig_ds = sign * (c - 1.0) / (d * d);

    let coef_a = d_m * dm_da + d_s * dsig_ds * 0.5;
    let coef_b = d_m * dm_db + d_s * dsig_ds * 0.5;
    let coef_c = d_s * dsig_dc;

    let ga = eigenvalue_gradient(g, &spec, k - 1);
    let gb = eigenvalue_gradient(g, &spec, 0);
    let gc = eigenvalue_gradient(g, &spec, ic);
    Ok((0..g.edge_count())
        .map(|e| coef_a * ga[e] + coef_b * gb[e] + coef_c * gc[e])
        .collect())
}

/// Smooth upper bound `(1/β) ln Σ (e^{β p_i} + e^{-β p_i})` on `max |p_i|`,
/// with its partial derivatives written into `dp`.
pub(crate) fn soft_max_abs(p: &[f64], beta: f64, dp: &mut [f64]) -> f64 {
    let top = beta * slem_of_values(p);
    let mut z = 0.0;
    for (d, &x) in dp.iter_mut().zip(p) {
        let (u, v) = ((beta * x - top).exp(), (-beta * x - top).exp());
        z += u + v;
        *d = u - v;
    }
    for d in dp.iter_mut() {
        *d /= z;
    }
    (top + z.ln()) / beta
}
