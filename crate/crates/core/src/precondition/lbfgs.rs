//! Limited-memory BFGS with Armijo backtracking and optional `x >= 0`
//! bounds (projected steps, bound-active variables frozen per iteration).

use std::collections::VecDeque;

const MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub max_iters: usize,
    /// Stop after `patience` consecutive steps changing the objective by
    /// less than `tol · max(1, |f|)`.
    pub tol: f64,
    pub patience: usize,
    /// Length of the first (steepest-descent) trial step.
    pub step_init: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimize `f`, which returns the value and writes the gradient. Non-finite
/// values are treated as infeasible trial points. `on_step` runs after every
/// accepted step.
pub(crate) fn minimize<F, O>(
    mut f: F,
    x0: Vec<f64>,
    bounded: &[bool],
    settings: &Settings,
    mut on_step: O,
) -> Outcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    O: FnMut(),
{
    let n = x0.len();
    let mut x = x0;
    for (xi, &b) in x.iter_mut().zip(bounded) {
        if b && *xi < 0.0 {
            *xi = 0.0;
        }
    }
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() {
        return Outcome { x, f: fx };
    }
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut quiet = 0;
    let mut iters = 0;
    let mut trial = vec![0.0; n];
    let mut gt = vec![0.0; n];

    while iters < settings.max_iters {
        let free: Vec<bool> = (0..n)
            .map(|i| !(bounded[i] && x[i] <= 0.0 && g[i] > 0.0))
            .collect();
        let gm: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        if norm(&gm) == 0.0 {
            break;
        }
        let mut d = two_loop(&mem, &gm);
        for i in 0..n {
            d[i] = if free[i] { -d[i] } else { 0.0 };
        }
        if !(dot(&g, &d) < 0.0) {
            mem.clear();
            d = gm.iter().map(|v| -v).collect();
        }
        let mut alpha = if mem.is_empty() {
            settings.step_init / norm(&d)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                let v = x[i] + alpha * d[i];
                trial[i] = if bounded[i] { v.max(0.0) } else { v };
            }
            let step: Vec<f64> = trial.iter().zip(&x).map(|(t, v)| t - v).collect();
            let pred = dot(&g, &step);
            if !(pred < 0.0) {
                break;
            }
            let ft = f(&trial, &mut gt);
            if ft.is_finite() && ft <= fx + ARMIJO * pred {
                accepted = Some((ft, step));
                break;
            }
            alpha *= 0.5;
        }
        let Some((ft, step)) = accepted else {
            if mem.is_empty() {
                break;
            }
            mem.clear();
            continue;
        };

        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&step, &y);
        if sy > 1e-12 * norm(&step) * norm(&y) && sy > 0.0 {
            mem.push_back((step, y, 1.0 / sy));
            if mem.len() > MEMORY {
                mem.pop_front();
            }
        }
        iters += 1;
        let change = (fx - ft).abs();
        x.copy_from_slice(&trial);
        g.copy_from_slice(&gt);
        fx = ft;
        on_step();
        if change < settings.tol * fx.abs().max(1.0) {
            quiet += 1;
            if quiet >= settings.patience {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Outcome { x, f: fx }
}

/// Inverse-Hessian approximation applied to `g`.
fn two_loop(mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q
}
