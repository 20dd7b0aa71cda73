use nalgebra::DMatrix;
use polyconsensus::graph::Graph;
use polyconsensus::spectral::{center, spectrum, WeightMatrix};
use proptest::prelude::*;

/// Connected random graph on `n` nodes: a random spanning path plus extra
/// edges from a seeded G(n, M).
fn connected_graph(n: usize, extra: usize, seed: u64) -> Graph {
    let max = n * (n - 1) / 2;
    let m = (n - 1 + extra).min(max);
    let g = Graph::erdos_renyi(n, m, seed).unwrap();
    if g.is_connected() {
        return g;
    }
    let mut edges: Vec<_> = g.edges().to_vec();
    for i in 1..n {
        if !g.has_edge(i - 1, i) {
            edges.push((i - 1, i));
        }
    }
    Graph::new(n, edges).unwrap()
}

fn weights(seed: u64, count: usize, lo: f64, hi: f64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Characteristic polynomial coefficients (monic, highest degree first) by
/// the Faddeev-LeVerrier recursion.
fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![1.0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    let id = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        m = a * &m + &id * coeffs[k - 1];
        let c = -(a * &m).trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().fold(0.0, |acc, &v| acc * x + v)
}

/// Real roots by sign changes on a fine grid and bisection.
fn real_roots(c: &[f64], bound: f64) -> Vec<f64> {
    let steps = 200_000;
    let h = 2.0 * bound / steps as f64;
    let mut roots = Vec::new();
    let mut x0 = -bound;
    let mut f0 = horner(c, x0);
    for k in 1..=steps {
        let x1 = -bound + h * k as f64;
        let f1 = horner(c, x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            let (mut lo, mut hi) = (x0, x1);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if horner(c, lo) * horner(c, mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rows_sum_to_one_and_symmetric(n in 2usize..9, extra in 0usize..10, seed in 0u64..1000) {
        let g = connected_graph(n, extra, seed);
        let p = WeightMatrix::new(g.clone(), weights(seed, g.edge_count(), -0.7, 0.7)).unwrap();
        let m = p.matrix();
        for i in 0..n {
            prop_assert!((m.row(i).sum() - 1.0).abs() <= 1e-12);
            for j in 0..n {
                prop_assert_eq!(m[(i, j)], m[(j, i)]);
                if i != j && !g.has_edge(i, j) {
                    prop_assert_eq!(m[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn eigenvalues_match_characteristic_roots(n in 2usize..6, extra in 0usize..6, seed in 0u64..1000) {
        let g = connected_graph(n, extra, seed);
        let p = WeightMatrix::new(g.clone(), weights(seed, g.edge_count(), 0.05, 0.6)).unwrap();
        let m = p.matrix();
        let bound = 1.0 + m.iter().map(|v| v.abs()).sum::<f64>();
        let roots = real_roots(&char_poly(&m), bound);
        // clustered roots cannot be separated by sign changes
        prop_assume!(roots.len() == n);
        let eig = p.eigenvalues().unwrap();
        for (r, e) in roots.iter().zip(&eig) {
            prop_assert!((r - e).abs() <= 1e-8, "root {} vs eigenvalue {}", r, e);
        }
    }

    #[test]
    fn centering_is_affine_and_idempotent(n in 3usize..9, extra in 0usize..10, seed in 0u64..1000) {
        let g = connected_graph(n, extra, seed);
        let p = WeightMatrix::new(g.clone(), weights(seed, g.edge_count(), 0.05, 0.5)).unwrap();
        let s = spectrum(&p).unwrap();
        let mid = 0.5 * (s.max() + s.min());
        let c = center(&p).unwrap();
        let sc = spectrum(&c).unwrap();
        prop_assert!(sc.centered);
        for (a, b) in s.lambdas.iter().zip(&sc.lambdas) {
            prop_assert!(((a - mid) / (1.0 - mid) - b).abs() <= 1e-10);
        }
        let cc = center(&c).unwrap();
        for (a, b) in c.weights().iter().zip(cc.weights()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn doubly_stochastic_spectrum_in_unit_interval(n in 2usize..9, extra in 0usize..12, seed in 0u64..1000) {
        let g = connected_graph(n, extra, seed);
        let deg = g.degrees();
        let raw = weights(seed, g.edge_count(), 0.0, 1.0);
        // scale each weight so every node's incident sum stays <= 1
        let w: Vec<f64> = g.edges().iter().zip(&raw)
            .map(|(&(i, j), &x)| x / deg[i].max(deg[j]) as f64)
            .collect();
        let p = WeightMatrix::new(g, w).unwrap();
        for l in p.eigenvalues().unwrap() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&l));
        }
    }

    #[test]
    fn square_contains_graph(n in 2usize..10, extra in 0usize..12, seed in 0u64..1000) {
        let g = connected_graph(n, extra, seed);
        let sq = g.square();
        for &(i, j) in g.edges() {
            prop_assert!(sq.has_edge(i, j));
        }
        for &(i, j) in sq.edges() {
            let d = g.distances_from(i)[j].unwrap();
            prop_assert!(d == 1 || d == 2);
        }
    }

    #[test]
    fn erdos_renyi_is_deterministic(n in 2usize..15, seed in 0u64..10_000) {
        let m = n - 1 + (n * (n - 1) / 2 - (n - 1)) / 2;
        let a = Graph::erdos_renyi(n, m, seed).unwrap();
        let b = Graph::erdos_renyi(n, m, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.edge_count(), m);
        prop_assert!(a.is_connected());
    }
}

#[test]
fn star_centering_matches_optimal_uniform() {
    let quarter = center(&WeightMatrix::uniform(Graph::star(4), 0.25)).unwrap();
    for &w in quarter.weights() {
        assert!((w - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn five_cycle_two_fifths_is_centered() {
    let p = WeightMatrix::uniform(Graph::cycle(5).unwrap(), 0.4);
    let s = spectrum(&p).unwrap();
    assert!(s.centered);
    let expect = 1.0 - 0.4 * (2.0 - 2.0 * (2.0 * std::f64::consts::PI / 5.0).cos());
    assert!((s.max() - expect).abs() < 1e-12);
    assert!((s.mu - s.sigma).abs() < 1e-12);
}
