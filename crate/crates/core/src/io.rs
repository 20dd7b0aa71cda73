//! JSON wire formats.
//!
//! Graph: `{"n": 4, "edges": [[0, 1], [1, 2]]}`; weighted graph:
//! `{"n": 4, "edges": [[0, 1, 0.5], [1, 2, 0.25]]}`. Indices are 0-based,
//! edges are written with `i < j` in lexicographic order.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::Graph;
use crate::spectral::WeightMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraphJson {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl From<&Graph> for GraphJson {
    fn from(g: &Graph) -> Self {
        GraphJson {
            n: g.n(),
            edges: g.edges().to_vec(),
        }
    }
}

impl TryFrom<GraphJson> for Graph {
    type Error = crate::Error;

    fn try_from(j: GraphJson) -> Result<Graph> {
        Graph::new(j.n, j.edges)
    }
}

impl From<&WeightMatrix> for WeightedGraphJson {
    fn from(p: &WeightMatrix) -> Self {
        WeightedGraphJson {
            n: p.n(),
            edges: p
                .graph()
                .edges()
                .iter()
                .zip(p.weights())
                .map(|(&(i, j), &w)| (i, j, w))
                .collect(),
        }
    }
}

impl TryFrom<WeightedGraphJson> for WeightMatrix {
    type Error = crate::Error;

    fn try_from(j: WeightedGraphJson) -> Result<WeightMatrix> {
        let g = Graph::new(j.n, j.edges.iter().map(|&(i, k, _)| (i, k)))?;
        let mut weights = vec![0.0; g.edge_count()];
        for &(i, k, w) in &j.edges {
            let idx = g.edge_index(i, k).expect("edge was just inserted");
            weights[idx] = w;
        }
        WeightMatrix::new(g, weights)
    }
}

pub fn graph_to_json(g: &Graph) -> String {
    serde_json::to_string(&GraphJson::from(g)).expect("plain data serializes")
}

pub fn graph_from_json(s: &str) -> Result<Graph> {
    serde_json::from_str::<GraphJson>(s)?.try_into()
}

pub fn weighted_to_json(p: &WeightMatrix) -> String {
    serde_json::to_string(&WeightedGraphJson::from(p)).expect("plain data serializes")
}

pub fn weighted_from_json(s: &str) -> Result<WeightMatrix> {
    serde_json::from_str::<WeightedGraphJson>(s)?.try_into()
}
