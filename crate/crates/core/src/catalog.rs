//! Fixed weighted instances used by tests, experiments and figure data.

use crate::graph::Graph;
use crate::spectral::WeightMatrix;

/// Five-node graph whose two-step-optimized weights make the optimal filter
/// exceed 1 in modulus inside `[-1, 1]`, so that some single-link failures
/// destabilize the alternating scheme.
///
/// Nodes are 0-based: a triangle 0-1-3 with weights 0.628, 0.628, 0.605,
/// node 2 attached to 0 and 3 with weight 0.045 each, and a pendant node 4
/// on node 2 with weight 0.926.
pub fn failure_sensitive_five_node() -> WeightMatrix {
    let edges = [
        ((0, 1), 0.628),
        ((0, 2), 0.045),
        ((0, 3), 0.605),
        ((1, 3), 0.628),
        ((2, 3), 0.045),
        ((2, 4), 0.926),
    ];
    let g = Graph::new(5, edges.iter().map(|&(e, _)| e)).expect("valid edge list");
    let weights = edges.iter().map(|&(_, w)| w).collect();
    WeightMatrix::new(g, weights).expect("weights match edges")
}
