//! Direct min-max search over the two filter roots.
//!
//! Minimizes `max_i |(λ_i - z1)(λ_i - z2) / ((1 - z1)(1 - z2))|` over
//! `(z1, z2) ∈ [-1, 1]²` with no use of the closed-form optimum: a dense
//! 2001 × 2001 grid, then a shrinking local grid and a Nelder–Mead polish
//! around the best cells. Intended accuracy is 1e-6 on the optimal value.

const GRID: usize = 2001;
const CANDIDATES: usize = 4;

/// Brute-force optimal two-step rate for the given non-consensus eigenvalues.
pub fn brute_force_mu2(lambdas: &[f64]) -> f64 {
    if lambdas.is_empty() {
        return 0.0;
    }
    let step = 2.0 / (GRID - 1) as f64;
    let coord = |k: usize| -1.0 + step * k as f64;

    // keep the best few cells, well separated, as polish seeds
    let mut seeds: Vec<(f64, f64, f64)> = Vec::with_capacity(CANDIDATES);
    let mut cutoff = f64::INFINITY;
    for a in 0..GRID {
        let z1 = coord(a);
        for b in a..GRID {
            let z2 = coord(b);
            let v = objective_bounded(lambdas, z1, z2, cutoff);
            if v < cutoff {
                insert_seed(&mut seeds, (v, z1, z2), 10.0 * step);
                if seeds.len() == CANDIDATES {
                    cutoff = seeds[CANDIDATES - 1].0;
                }
            }
        }
    }

    seeds
        .iter()
        .map(|&(v, z1, z2)| {
            let (v, z1, z2) = zoom(lambdas, (v, z1, z2), 2.0 * step);
            nelder_mead(lambdas, [z1, z2], 1e-3 * step).min(v)
        })
        .fold(f64::INFINITY, f64::min)
}

fn objective(lambdas: &[f64], z1: f64, z2: f64) -> f64 {
    objective_bounded(lambdas, z1, z2, f64::INFINITY)
}

/// Objective value, or any value `>= cutoff` once it is known to exceed it.
fn objective_bounded(lambdas: &[f64], z1: f64, z2: f64, cutoff: f64) -> f64 {
    let den = ((1.0 - z1) * (1.0 - z2)).abs();
    if den == 0.0 {
        return f64::INFINITY;
    }
    let limit = cutoff * den;
    let mut worst = 0.0_f64;
    for &l in lambdas {
        let v = ((l - z1) * (l - z2)).abs();
        if v >= limit {
            return f64::INFINITY;
        }
        worst = worst.max(v);
    }
    worst / den
}

fn insert_seed(seeds: &mut Vec<(f64, f64, f64)>, cand: (f64, f64, f64), radius: f64) {
    if let Some(k) = seeds
        .iter()
        .position(|s| (s.1 - cand.1).abs() <= radius && (s.2 - cand.2).abs() <= radius)
    {
        if cand.0 < seeds[k].0 {
            seeds[k] = cand;
        } else {
            return;
        }
    } else {
        seeds.push(cand);
    }
    seeds.sort_by(|x, y| x.0.total_cmp(&y.0));
    seeds.truncate(CANDIDATES);
}

/// Local 21 × 21 grid around the incumbent, halving the box whenever the
/// incumbent survives a pass.
fn zoom(lambdas: &[f64], start: (f64, f64, f64), mut half: f64) -> (f64, f64, f64) {
    const K: i32 = 10;
    let (mut best, mut c1, mut c2) = start;
    while half > 1e-14 {
        let h = half / f64::from(K);
        let (mut nb, mut n1, mut n2) = (best, c1, c2);
        for i in -K..=K {
            for j in -K..=K {
                let (z1, z2) = (c1 + h * f64::from(i), c2 + h * f64::from(j));
                let v = objective_bounded(lambdas, z1, z2, nb);
                if v < nb {
                    (nb, n1, n2) = (v, z1, z2);
                }
            }
        }
        if n1 == c1 && n2 == c2 {
            half *= 0.5;
        }
        (best, c1, c2) = (nb, n1, n2);
    }
    (best, c1, c2)
}

fn nelder_mead(lambdas: &[f64], x0: [f64; 2], scale: f64) -> f64 {
    let f = |p: [f64; 2]| objective(lambdas, p[0], p[1]);
    let mut simplex = [
        x0,
        [x0[0] + scale, x0[1]],
        [x0[0], x0[1] + scale],
    ];
    let mut vals = simplex.map(f);
    for _ in 0..2000 {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let [lo, mid, hi] = idx;
        if (vals[hi] - vals[lo]).abs() <= 1e-16 * (1.0 + vals[lo].abs())
            && dist(simplex[hi], simplex[lo]) < 1e-15
        {
            break;
        }
        let centroid = [
            0.5 * (simplex[lo][0] + simplex[mid][0]),
            0.5 * (simplex[lo][1] + simplex[mid][1]),
        ];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[hi][0] - centroid[0]),
                centroid[1] + t * (simplex[hi][1] - centroid[1]),
            ]
        };
        let xr = along(-1.0);
        let fr = f(xr);
        if fr < vals[lo] {
            let xe = along(-2.0);
            let fe = f(xe);
            (simplex[hi], vals[hi]) = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < vals[mid] {
            (simplex[hi], vals[hi]) = (xr, fr);
        } else {
            let xc = if fr < vals[hi] { along(-0.5) } else { along(0.5) };
            let fc = f(xc);
            if fc < vals[hi].min(fr) {
                (simplex[hi], vals[hi]) = (xc, fc);
            } else {
                for k in [mid, hi] {
                    simplex[k] = [
                        0.5 * (simplex[k][0] + simplex[lo][0]),
                        0.5 * (simplex[k][1] + simplex[lo][1]),
                    ];
                    vals[k] = f(simplex[k]);
                }
            }
        }
    }
    vals.into_iter().fold(f64::INFINITY, f64::min)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
