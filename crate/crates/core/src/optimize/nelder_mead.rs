//! Box-bounded Nelder–Mead on the unit cube.
//!
//! Candidates are clamped to [0, 1] in every coordinate; the caller maps
//! the cube onto physical parameter boxes.

use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { initial_step: 0.05, f_tol: 1e-9, x_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
}

fn clamp01(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Counts evaluations against a hard budget.
pub struct Budgeted<'a, F: Fn(&[f64]) -> f64 + Sync> {
    f: &'a F,
    pub used: usize,
    pub budget: usize,
}

impl<'a, F: Fn(&[f64]) -> f64 + Sync> Budgeted<'a, F> {
    pub fn new(f: &'a F, budget: usize) -> Self {
        Self { f, used: 0, budget }
    }

    pub fn left(&self) -> usize {
        self.budget.saturating_sub(self.used)
    }

    pub fn eval(&mut self, x: &[f64]) -> f64 {
        self.used += 1;
        (self.f)(x)
    }

    /// Evaluate independent points concurrently, in input order.
    pub fn eval_many(&mut self, xs: &[Vec<f64>]) -> Vec<f64> {
        self.used += xs.len();
        let f = self.f;
        xs.par_iter().map(|x| f(x)).collect()
    }
}

/// Simplex with vertex 0 at `x0` and one vertex offset along each axis by `steps[i]`.
pub fn axis_simplex(x0: &[f64], steps: &[f64]) -> Vec<Vec<f64>> {
    let mut s = vec![x0.to_vec()];
    for (i, h) in steps.iter().enumerate() {
        let mut v = x0.to_vec();
        v[i] = if v[i] + h <= 1.0 { v[i] + h } else { v[i] - h };
        clamp01(&mut v);
        s.push(v);
    }
    s
}

pub fn minimize<F: Fn(&[f64]) -> f64 + Sync>(
    f: &mut Budgeted<'_, F>,
    simplex: Vec<Vec<f64>>,
    opts: &NelderMeadOptions,
) -> Minimum {
    let n = simplex.len() - 1;
    let mut pts = simplex;
    let mut vals = f.eval_many(&pts);
    let mut iterations = 0;
    let mut converged = false;

    let order = |pts: &mut Vec<Vec<f64>>, vals: &mut Vec<f64>| {
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        *pts = idx.iter().map(|&i| pts[i].clone()).collect();
        *vals = idx.iter().map(|&i| vals[i]).collect();
    };

    loop {
        order(&mut pts, &mut vals);
        let spread = (vals[n] - vals[0]).abs();
        let size = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= opts.f_tol * (1.0 + vals[0].abs()) && size <= opts.x_tol {
            converged = true;
            break;
        }
        if f.left() < n + 2 {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (c - w)).collect();
            clamp01(&mut v);
            v
        };

        let xr = along(1.0);
        let fr = f.eval(&xr);
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = f.eval(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let x = along(0.5);
            let v = f.eval(&x);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = f.eval(&x);
            (x, v)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        let best = pts[0].clone();
        let shrunk: Vec<Vec<f64>> =
            pts[1..].iter().map(|p| p.iter().zip(&best).map(|(a, b)| b + 0.5 * (a - b)).collect()).collect();
        let fs = f.eval_many(&shrunk);
        for (k, (p, v)) in shrunk.into_iter().zip(fs).enumerate() {
            pts[k + 1] = p;
            vals[k + 1] = v;
        }
    }
    order(&mut pts, &mut vals);
    Minimum { x: pts[0].clone(), fx: vals[0], evaluations: f.used, iterations, converged }
}

/// Coordinate descent with step halving; improves `x` in place.
pub fn coordinate_polish<F: Fn(&[f64]) -> f64 + Sync>(
    f: &mut Budgeted<'_, F>,
    x: &mut Vec<f64>,
    fx: &mut f64,
    start_step: f64,
    min_step: f64,
) -> usize {
    let mut step = start_step;
    let mut sweeps = 0;
    while step >= min_step && f.left() >= 2 {
        let mut improved = false;
        for i in 0..x.len() {
            if f.left() < 2 {
                break;
            }
            let cands: Vec<Vec<f64>> = [step, -step]
                .iter()
                .map(|h| {
                    let mut v = x.clone();
                    v[i] = (v[i] + h).clamp(0.0, 1.0);
                    v
                })
                .collect();
            let vals = f.eval_many(&cands);
            let (k, best) = if vals[0] <= vals[1] { (0, vals[0]) } else { (1, vals[1]) };
            if best < *fx {
                *x = cands[k].clone();
                *fx = best;
                improved = true;
            }
        }
        sweeps += 1;
        if !improved {
            step *= 0.5;
        }
    }
    sweeps
}
