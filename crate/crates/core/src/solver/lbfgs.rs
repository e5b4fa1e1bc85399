//! Limited-memory BFGS over flat vectors with backtracking Armijo line search.
//! Inner products are averages over entries, matching the field pairing.

use std::collections::VecDeque;

pub(crate) const MEMORY: usize = 10;
pub(crate) const ARMIJO: f64 = 1e-4;
pub(crate) const MAX_BACKTRACKS: usize = 40;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len().max(1) as f64
}

pub(crate) struct Options {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Step scale for the first iteration, before any curvature pair exists.
    pub initial_scale: f64,
}

#[derive(Debug, PartialEq, Eq, Clone, Copy)]
pub(crate) enum Stop {
    Gradient,
    Iterations,
    LineSearch,
}

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: Stop,
    /// Objective at every accepted iterate, starting point included.
    pub history: Vec<f64>,
}

/// `eval` returns `None` for points outside the domain (treated as an infinite value).
pub(crate) fn minimize<F>(x0: Vec<f64>, opts: &Options, mut eval: F) -> Option<Outcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let (mut f, mut g) = eval(&x0)?;
    let mut x = x0;
    let mut evaluations = 1;
    let mut history = vec![f];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut iterations = 0;
    let stop = loop {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < opts.gradient_tolerance {
            break Stop::Gradient;
        }
        if iterations >= opts.max_iterations {
            break Stop::Iterations;
        }
        let mut dir = direction(&g, &pairs, opts.initial_scale);
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // lost descent: restart from the scaled gradient
            pairs.clear();
            dir = g.iter().map(|v| -opts.initial_scale * v).collect();
            slope = dot(&g, &dir);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            evaluations += 1;
            if let Some((ft, gt)) = eval(&trial) {
                if ft.is_finite() && ft <= f + ARMIJO * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            break Stop::LineSearch;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if pairs.len() == MEMORY {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        f = fnew;
        g = gn;
        history.push(f);
        iterations += 1;
    };
    Some(Outcome {
        gradient_norm: dot(&g, &g).sqrt(),
        x,
        value: f,
        iterations,
        evaluations,
        stop,
        history,
    })
}

/// Two-loop recursion for `-H g`.
fn direction(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, initial_scale: f64) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    let gamma = match pairs.back() {
        Some((s, y, _)) => dot(s, y) / dot(y, y),
        None => initial_scale,
    };
    q.iter_mut().for_each(|v| *v *= gamma);
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
