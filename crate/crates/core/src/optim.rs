//! Spectral projected gradient: Barzilai–Borwein steps, or a variable metric
//! supplied by the objective, safeguarded by Armijo backtracking.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::fields::cell_gradient;
use crate::geometry::{Grid, NONE};

pub trait Objective {
    /// Value at `x`, gradient written to `grad`.
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64;
    fn project(&self, x: &mut [f64]);
    /// Convex objectives may certify sufficient decrease through the
    /// directional derivative at the trial point, which stays meaningful
    /// after function differences drop below rounding.
    fn is_convex(&self) -> bool {
        false
    }
    /// Variable metric: write an approximation of M(x)^{-1} g to `out` for a
    /// positive definite M(x). Returning false keeps the Euclidean metric with
    /// Barzilai–Borwein steps.
    fn precondition(&mut self, _x: &[f64], _g: &[f64], _out: &mut [f64]) -> bool {
        false
    }
    /// Trial step length along the preconditioned direction.
    fn metric_step(&self) -> f64 {
        1.0
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SpgParams {
    /// Length of the nonmonotone reference window.
    pub memory: usize,
    pub armijo: f64,
    pub step_min: f64,
    pub step_max: f64,
    /// Backtracking gives up below this fraction of the trial step.
    pub min_fraction: f64,
}

impl Default for SpgParams {
    fn default() -> Self {
        SpgParams {
            memory: 10,
            armijo: 1e-4,
            step_min: 1e-30,
            step_max: 1e30,
            min_fraction: 1e-14,
        }
    }
}

pub struct Spg<O: Objective> {
    obj: O,
    params: SpgParams,
    x: Vec<f64>,
    g: Vec<f64>,
    f: f64,
    step: f64,
    history: VecDeque<f64>,
    iterations: usize,
    evaluations: usize,
    trial: Vec<f64>,
    trial_grad: Vec<f64>,
    dir: Vec<f64>,
    pre: Vec<f64>,
}

impl<O: Objective> Spg<O> {
    pub fn new(mut obj: O, mut x0: Vec<f64>, params: SpgParams) -> Self {
        obj.project(&mut x0);
        let mut g = vec![0.0; x0.len()];
        let f = obj.eval(&x0, &mut g);
        let n = x0.len();
        let mut spg = Spg {
            obj,
            params,
            x: x0,
            g,
            f,
            step: 1.0,
            history: VecDeque::from([f]),
            iterations: 0,
            evaluations: 1,
            trial: vec![0.0; n],
            trial_grad: vec![0.0; n],
            dir: vec![0.0; n],
            pre: vec![0.0; n],
        };
        let pg = spg.projected_gradient_norm();
        spg.step = if pg > 0.0 {
            (1.0 / pg).clamp(params.step_min, params.step_max)
        } else {
            1.0
        };
        spg
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn gradient(&self) -> &[f64] {
        &self.g
    }

    pub fn value(&self) -> f64 {
        self.f
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn into_parts(self) -> (O, Vec<f64>) {
        (self.obj, self.x)
    }

    /// sup |P(x - g) - x|
    pub fn projected_gradient_norm(&mut self) -> f64 {
        for ((t, x), g) in self.trial.iter_mut().zip(&self.x).zip(&self.g) {
            *t = x - g;
        }
        self.obj.project(&mut self.trial);
        self.trial
            .iter()
            .zip(&self.x)
            .fold(0.0, |m, (t, x)| f64::max(m, (t - x).abs()))
    }

    /// dir = P(x - alpha·v) - x with v the preconditioned or plain gradient;
    /// returns the slope ⟨g, dir⟩.
    fn direction(&mut self, alpha: f64, preconditioned: bool) -> f64 {
        let v = if preconditioned { &self.pre } else { &self.g };
        for ((d, x), v) in self.dir.iter_mut().zip(&self.x).zip(v) {
            *d = x - alpha * v;
        }
        self.obj.project(&mut self.dir);
        let mut slope = 0.0;
        for ((d, x), g) in self.dir.iter_mut().zip(&self.x).zip(&self.g) {
            *d -= x;
            slope += g * *d;
        }
        slope
    }

    /// One outer iteration.
    pub fn step(&mut self) -> Result<()> {
        let n = self.x.len();
        let metric = self.obj.precondition(&self.x, &self.g, &mut self.pre);
        let mut slope = if metric {
            let alpha = self.obj.metric_step();
            self.direction(alpha, true)
        } else {
            0.0
        };
        if slope >= 0.0 {
            slope = self.direction(self.step, false);
        }
        if slope >= 0.0 {
            // stationary up to rounding, or a non-descent projected direction
            self.iterations += 1;
            self.step = (self.step * 0.5).max(self.params.step_min);
            return Ok(());
        }
        // preconditioned steps are close to Newton-like; the nonmonotone
        // window only pays off for the erratic Barzilai–Borwein steps
        let reference = if metric {
            self.f
        } else {
            self.history.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        };
        let mut lambda = 1.0;
        loop {
            for i in 0..n {
                self.trial[i] = self.x[i] + lambda * self.dir[i];
            }
            let f_new = self.obj.eval(&self.trial, &mut self.trial_grad);
            self.evaluations += 1;
            let accept = f_new.is_finite()
                && (f_new <= reference + self.params.armijo * lambda * slope
                    || (self.obj.is_convex() && {
                        // f(x+λd) - f(x) ≤ λ⟨∇f(x+λd), d⟩ for convex f
                        let s_new: f64 =
                            self.trial_grad.iter().zip(&self.dir).map(|(g, d)| g * d).sum();
                        s_new <= self.params.armijo * slope
                    }));
            if accept {
                let mut sty = 0.0;
                let mut sts = 0.0;
                for i in 0..n {
                    let s = self.trial[i] - self.x[i];
                    let y = self.trial_grad[i] - self.g[i];
                    sty += s * y;
                    sts += s * s;
                }
                std::mem::swap(&mut self.x, &mut self.trial);
                std::mem::swap(&mut self.g, &mut self.trial_grad);
                self.f = f_new;
                self.step = if sty > 0.0 {
                    (sts / sty).clamp(self.params.step_min, self.params.step_max)
                } else {
                    self.params.step_max.min(self.step * 1e3)
                };
                self.history.push_back(f_new);
                if self.history.len() > self.params.memory {
                    self.history.pop_front();
                }
                self.iterations += 1;
                return Ok(());
            }
            // safeguarded quadratic interpolation along the segment
            let curv = f_new - self.f - lambda * slope;
            let mut next = if curv > 0.0 && f_new.is_finite() {
                -0.5 * lambda * lambda * slope / curv
            } else {
                0.5 * lambda
            };
            if !(next >= 0.1 * lambda && next <= 0.9 * lambda) {
                next = 0.5 * lambda;
            }
            lambda = next;
            if lambda < self.params.min_fraction {
                return Err(Error::LineSearch {
                    iteration: self.iterations,
                    step: self.step,
                });
            }
        }
    }
}

/// M = ∂²/∂u² of ½ Σ_c a_c |∇u|_c^2 h^N: a graph Laplacian with per-cell
/// weights, symmetric positive definite on the interior nodes.
pub struct WeightedLaplacian<'a> {
    grid: &'a Grid,
    weights: Vec<f64>,
    diag: Vec<f64>,
}

impl<'a> WeightedLaplacian<'a> {
    pub fn new(grid: &'a Grid, weights: Vec<f64>) -> Self {
        let dim = grid.dim();
        let scale = grid.cell_volume() / (grid.spacing() * grid.spacing());
        let mut diag = vec![0.0; grid.num_nodes()];
        for (cell, a) in grid.cells().iter().zip(&weights) {
            let t = a * scale;
            for k in 0..dim {
                if cell[1 << k] != NONE {
                    diag[cell[1 << k] as usize] += t;
                }
                if cell[0] != NONE {
                    diag[cell[0] as usize] += t;
                }
            }
        }
        WeightedLaplacian { grid, weights, diag }
    }

    /// Weights (|∇u|^2 + ε^2)^{(p-2)/2} with ε relative to the largest cell
    /// gradient, so that M tracks the Hessian of Σ|∇u|^p/p up to a factor
    /// between min(1, p-1) and max(1, p-1).
    pub fn for_energy(grid: &'a Grid, u: &[f64], p: f64, rel_eps: f64) -> Self {
        let dim = grid.dim();
        let sq: Vec<f64> = (0..grid.num_cells())
            .map(|c| cell_gradient(grid, u, c)[..dim].iter().map(|g| g * g).sum())
            .collect();
        let top = sq.iter().cloned().fold(0.0, f64::max);
        let eps2 = if top > 0.0 { top * rel_eps * rel_eps } else { 1.0 };
        let e = (p - 2.0) / 2.0;
        let weights = sq.iter().map(|s| (s + eps2).powf(e)).collect();
        Self::new(grid, weights)
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let dim = self.grid.dim();
        let vol = self.grid.cell_volume();
        let h = self.grid.spacing();
        for (c, (cell, a)) in self.grid.cells().iter().zip(&self.weights).enumerate() {
            let g = cell_gradient(self.grid, u, c);
            let coef = a * vol / h;
            for k in 0..dim {
                let t = coef * g[k];
                if cell[1 << k] != NONE {
                    out[cell[1 << k] as usize] += t;
                }
                if cell[0] != NONE {
                    out[cell[0] as usize] -= t;
                }
            }
        }
    }

    /// Jacobi-preconditioned conjugate gradients from a zero start; stops at
    /// relative residual `rel_tol` in the Euclidean norm. Returns iterations.
    pub fn solve(&self, rhs: &[f64], out: &mut [f64], rel_tol: f64, max_iter: usize) -> usize {
        let n = rhs.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut r = rhs.to_vec();
        let r0: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r0 == 0.0 {
            return 0;
        }
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(r, d)| r / d).collect();
        let mut d = z.clone();
        let mut ad = vec![0.0; n];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        for it in 0..max_iter {
            self.apply(&d, &mut ad);
            let dad: f64 = d.iter().zip(&ad).map(|(a, b)| a * b).sum();
            if dad <= 0.0 {
                return it;
            }
            let alpha = rz / dad;
            let mut rr = 0.0;
            for i in 0..n {
                out[i] += alpha * d[i];
                r[i] -= alpha * ad[i];
                rr += r[i] * r[i];
            }
            if rr.sqrt() <= rel_tol * r0 {
                return it + 1;
            }
            for i in 0..n {
                z[i] = r[i] / self.diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                d[i] = z[i] + beta * d[i];
            }
        }
        max_iter
    }
}

pub fn project_nonnegative(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Box-constrained quadratic with a known solution.
    struct Quad {
        diag: Vec<f64>,
        target: Vec<f64>,
    }

    impl Objective for Quad {
        fn eval(&mut self, x: &[f64], g: &mut [f64]) -> f64 {
            let mut f = 0.0;
            for i in 0..x.len() {
                let d = x[i] - self.target[i];
                f += 0.5 * self.diag[i] * d * d;
                g[i] = self.diag[i] * d;
            }
            f
        }
        fn project(&self, x: &mut [f64]) {
            project_nonnegative(x)
        }
    }

    #[test]
    fn solves_bound_constrained_quadratic() {
        let n = 50;
        let q = Quad {
            diag: (0..n).map(|i| 1.0 + i as f64 * 10.0).collect(),
            target: (0..n).map(|i| if i % 3 == 0 { -1.0 } else { i as f64 }).collect(),
        };
        let expect: Vec<f64> = q.target.iter().map(|t| t.max(0.0)).collect();
        let mut spg = Spg::new(q, vec![0.0; n], SpgParams::default());
        while spg.projected_gradient_norm() > 1e-10 {
            spg.step().unwrap();
            assert!(spg.iterations() < 10_000);
        }
        for (a, b) in spg.x().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    /// Rosenbrock in the positive quadrant, minimum at (1,1).
    struct Rosen;

    impl Objective for Rosen {
        fn eval(&mut self, x: &[f64], g: &mut [f64]) -> f64 {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        }
        fn project(&self, x: &mut [f64]) {
            project_nonnegative(x)
        }
    }

    #[test]
    fn nonmonotone_search_handles_curved_valleys() {
        let mut spg = Spg::new(Rosen, vec![0.0, 2.0], SpgParams::default());
        while spg.projected_gradient_norm() > 1e-9 {
            spg.step().unwrap();
            assert!(spg.iterations() < 100_000);
        }
        assert!((spg.x()[0] - 1.0).abs() < 1e-6);
        assert!((spg.x()[1] - 1.0).abs() < 1e-6);
    }
}
