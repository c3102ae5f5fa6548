//! Poincaré constants λ_{p,q}: minimization of the discrete Rayleigh quotient
//! over nonnegative fields with unit L^q norm.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{check_p, energy_with_gradient, ScalarField};
use crate::geometry::Grid;
use crate::optim::{Objective, Spg, SpgParams, WeightedLaplacian};
use crate::torsion::{metric_eps, solve_torsion, SolverOptions, METRIC_MAX_CG, METRIC_RTOL};

/// Components carrying less L^q mass than this are reported as empty.
pub const COMPONENT_MASS_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PoincareOptions {
    /// Stop when λ changes by less than rel_tol·λ over `window` iterations.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub window: usize,
    /// Options for the torsion solve that seeds the iteration.
    pub torsion: SolverOptions,
}

impl Default for PoincareOptions {
    fn default() -> Self {
        PoincareOptions {
            rel_tol: 1e-8,
            max_iter: 50_000,
            window: 10,
            torsion: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PoincareResult {
    pub lambda: f64,
    pub minimizer: ScalarField,
    pub iterations: usize,
    /// Relative change of λ over the last window.
    pub residual: f64,
    /// Share of the L^q mass per face-connected component.
    pub component_masses: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PoincareSummary {
    pub lambda: f64,
    pub iterations: usize,
    pub residual: f64,
    pub component_masses: Vec<f64>,
    pub active_components: Vec<usize>,
}

impl PoincareResult {
    /// Components carrying at least [`COMPONENT_MASS_FLOOR`] of the mass.
    pub fn active_components(&self) -> Vec<usize> {
        self.component_masses
            .iter()
            .enumerate()
            .filter(|(_, m)| **m >= COMPONENT_MASS_FLOOR)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn summary(&self) -> PoincareSummary {
        PoincareSummary {
            lambda: self.lambda,
            iterations: self.iterations,
            residual: self.residual,
            component_masses: self.component_masses.clone(),
            active_components: self.active_components(),
        }
    }
}

/// Σ|∇u|^p h^N / ‖u‖_q^p
pub fn rayleigh_quotient(u: &ScalarField, p: f64, q: f64) -> Result<f64> {
    check_p(p)?;
    check_q(p, q)?;
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    Ok(u.dirichlet_energy(p) / u.lp_norm(q).powf(p))
}

fn check_q(p: f64, q: f64) -> Result<()> {
    if q >= 1.0 && q <= p {
        Ok(())
    } else {
        Err(Error::InvalidExponent(format!("q must lie in [1, p], got q={q}, p={p}")))
    }
}

struct Rayleigh {
    grid: Arc<Grid>,
    p: f64,
    q: f64,
    grad_e: Vec<f64>,
}

impl Objective for Rayleigh {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        let vol = self.grid.cell_volume();
        let e = energy_with_gradient(&self.grid, x, self.p, &mut self.grad_e);
        let s: f64 = x.iter().map(|v| v.abs().powf(self.q)).sum::<f64>() * vol;
        if s <= 0.0 {
            return f64::INFINITY;
        }
        let denom = s.powf(self.p / self.q);
        // ∇(S^{p/q}) = p S^{p/q-1} u^{q-1} h^N, taking u^0 = 1 at q = 1
        let c = e * self.p * s.powf(self.p / self.q - 1.0) * vol / (denom * denom);
        let qm1 = self.q - 1.0;
        for ((g, ge), u) in grad.iter_mut().zip(&self.grad_e).zip(x) {
            let uq = if qm1 == 0.0 { 1.0 } else { u.max(0.0).powf(qm1) };
            *g = ge / denom - c * uq;
        }
        e / denom
    }

    fn project(&self, x: &mut [f64]) {
        let mut s = 0.0;
        for v in x.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
            s += v.powf(self.q);
        }
        let norm = (s * self.grid.cell_volume()).powf(1.0 / self.q);
        if norm > 0.0 {
            x.iter_mut().for_each(|v| *v /= norm);
        }
    }

    fn precondition(&mut self, x: &[f64], g: &[f64], out: &mut [f64]) -> bool {
        let m = WeightedLaplacian::for_energy(&self.grid, x, self.p, metric_eps(self.p));
        m.solve(g, out, METRIC_RTOL, METRIC_MAX_CG);
        true
    }

    fn metric_step(&self) -> f64 {
        // with this step the update is a linearized inverse power iteration
        1.0 / self.p
    }
}

/// λ_{p,q} of the masked grid, seeded with the normalized torsion function.
pub fn poincare_constant(grid: &Arc<Grid>, p: f64, q: f64, opts: &PoincareOptions) -> Result<PoincareResult> {
    check_p(p)?;
    check_q(p, q)?;
    let seed = solve_torsion(grid, p, &opts.torsion)?;
    poincare_from(grid, p, q, seed.w.values().to_vec(), opts)
}

/// As [`poincare_constant`] but from a caller-supplied nonnegative start.
pub fn poincare_from(
    grid: &Arc<Grid>,
    p: f64,
    q: f64,
    start: Vec<f64>,
    opts: &PoincareOptions,
) -> Result<PoincareResult> {
    check_p(p)?;
    check_q(p, q)?;
    if start.len() != grid.num_nodes() {
        return Err(Error::GridMismatch("start vector length differs from node count".into()));
    }
    if start.iter().all(|&v| v <= 0.0) {
        return Err(Error::ZeroField);
    }
    let obj = Rayleigh {
        grid: grid.clone(),
        p,
        q,
        grad_e: vec![0.0; grid.num_nodes()],
    };
    let mut spg = Spg::new(obj, start, SpgParams::default());
    let window = opts.window.max(1);
    let mut history = vec![spg.value()];
    let residual = loop {
        if history.len() > window {
            let now = history[history.len() - 1];
            let then = history[history.len() - 1 - window];
            let change = (then - now).abs() / now.abs().max(f64::MIN_POSITIVE);
            if change <= opts.rel_tol {
                break change;
            }
            if spg.iterations() >= opts.max_iter {
                return Err(Error::NotConverged {
                    iterations: spg.iterations(),
                    residual: change,
                });
            }
        }
        spg.step()?;
        history.push(spg.value());
    };
    let iterations = spg.iterations();
    let (obj, mut u) = spg.into_parts();
    obj.project(&mut u);
    let minimizer = ScalarField::from_raw(grid.clone(), u);
    let lambda = minimizer.dirichlet_energy(p) / minimizer.lp_norm(q).powf(p);
    let component_masses = component_masses(&minimizer, q);
    Ok(PoincareResult {
        lambda,
        minimizer,
        iterations,
        residual,
        component_masses,
    })
}

/// Share of Σ|u|^q per face-connected component, in component order.
pub fn component_masses(u: &ScalarField, q: f64) -> Vec<f64> {
    let (labels, count) = u.grid().components();
    let mut mass = vec![0.0; count];
    for (v, &l) in u.values().iter().zip(&labels) {
        mass[l] += v.abs().powf(q);
    }
    let total: f64 = mass.iter().sum();
    if total > 0.0 {
        mass.iter_mut().for_each(|m| *m /= total);
    }
    mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, Domain};
    use std::f64::consts::PI;

    fn grid(d: &Domain, h: f64) -> Arc<Grid> {
        Arc::new(discretize(d, h).unwrap())
    }

    #[test]
    fn quotient_scale_invariant() {
        let g = grid(&Domain::ball(vec![0.0, 0.0], 1.0).unwrap(), 1.0 / 16.0);
        let u = ScalarField::from_fn(g, |x| 1.0 - x[0] * x[0] - x[1] * x[1]);
        let a = rayleigh_quotient(&u, 3.0, 2.0).unwrap();
        for alpha in [-3.0, 1e-3, 7.5] {
            let b = rayleigh_quotient(&u.scale(alpha), 3.0, 2.0).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
        }
        assert!(rayleigh_quotient(&u.scale(0.0), 2.0, 2.0).is_err());
    }

    #[test]
    fn sine_half_wave_quotient() {
        let g = grid(&Domain::interval(0.0, 1.0).unwrap(), 1.0 / 256.0);
        let u = ScalarField::from_fn(g, |x| (PI * x[0]).sin());
        let r = rayleigh_quotient(&u, 2.0, 2.0).unwrap();
        assert!((r / (PI * PI) - 1.0).abs() < 0.02);
    }

    #[test]
    fn torsion_quotient_bounds_lambda_21() {
        let g = grid(&Domain::ball(vec![0.0, 0.0], 1.0).unwrap(), 1.0 / 64.0);
        let w = solve_torsion(&g, 2.0, &SolverOptions::default()).unwrap();
        let r = rayleigh_quotient(&w.w, 2.0, 1.0).unwrap();
        let lam = poincare_constant(&g, 2.0, 1.0, &PoincareOptions::default()).unwrap();
        // the torsion function is the discrete minimizer at q = 1
        assert!(r >= lam.lambda * (1.0 - 1e-7));
        assert!((r / (8.0 / PI) - 1.0).abs() < 0.03);
    }

    #[test]
    fn interval_eigenvalue() {
        let g = grid(&Domain::interval(0.0, 1.0).unwrap(), 1.0 / 128.0);
        let r = poincare_constant(&g, 2.0, 2.0, &PoincareOptions::default()).unwrap();
        println!("interval λ_2,2 = {} ({} iterations)", r.lambda, r.iterations);
        assert!((r.lambda / (PI * PI) - 1.0).abs() < 0.02);
        assert!(r.minimizer.values().iter().all(|&v| v >= 0.0));
        assert!((r.minimizer.lp_norm(2.0) - 1.0).abs() < 1e-12);
        assert!((r.minimizer.dirichlet_energy(2.0) - r.lambda).abs() <= 1e-12 * r.lambda);
    }

    #[test]
    fn disk_eigenvalues() {
        let g = grid(&Domain::ball(vec![0.0, 0.0], 1.0).unwrap(), 1.0 / 64.0);
        let opts = PoincareOptions::default();
        let l22 = poincare_constant(&g, 2.0, 2.0, &opts).unwrap();
        let l21 = poincare_constant(&g, 2.0, 1.0, &opts).unwrap();
        println!("disk λ_2,2 = {}, λ_2,1 = {}", l22.lambda, l21.lambda);
        // first zero of J_0 squared
        assert!((l22.lambda / 5.783186 - 1.0).abs() < 0.02);
        assert!((l21.lambda / (8.0 / PI) - 1.0).abs() < 0.02);
        assert_eq!(l22.active_components(), vec![0]);
    }

    #[test]
    fn monotone_under_inclusion() {
        let h = 1.0 / 32.0;
        let small = grid(&Domain::cuboid(vec![0.125, 0.125], vec![0.875, 0.75]).unwrap(), h);
        let big = grid(&Domain::unit_cube(2).unwrap(), h);
        assert!(small.is_submask_of(&big));
        let o = PoincareOptions::default();
        for (p, q) in [(2.0, 2.0), (3.0, 2.0), (2.0, 1.5)] {
            let a = poincare_constant(&small, p, q, &o).unwrap().lambda;
            let b = poincare_constant(&big, p, q, &o).unwrap().lambda;
            assert!(a >= b * (1.0 - 1e-6), "p={p} q={q}: {a} < {b}");
        }
    }

    #[test]
    fn ball_dilation_law() {
        // λ_{p,q}(B_2) = 2^{N - p - Np/q} λ_{p,q}(B_1)
        let o = PoincareOptions::default();
        for (p, q) in [(2.0, 2.0), (2.0, 1.0), (3.0, 2.0)] {
            let a = poincare_constant(&grid(&Domain::ball(vec![0.0, 0.0], 1.0).unwrap(), 1.0 / 32.0), p, q, &o)
                .unwrap()
                .lambda;
            let b = poincare_constant(&grid(&Domain::ball(vec![0.0, 0.0], 2.0).unwrap(), 1.0 / 16.0), p, q, &o)
                .unwrap()
                .lambda;
            let expect = 2f64.powf(2.0 - p - 2.0 * p / q);
            println!("dilation p={p} q={q}: ratio {} expected {expect}", b / a);
            assert!((b / a / expect - 1.0).abs() < 0.03);
        }
    }

    #[test]
    fn disconnected_mask_reports_components() {
        // two tangent disks of radii 1/2 and 1/4: the larger one has the lower eigenvalue
        let g = grid(&Domain::ball_chain(vec![0.5, 0.25], 2).unwrap(), 1.0 / 64.0);
        let r = poincare_constant(&g, 2.0, 2.0, &PoincareOptions::default()).unwrap();
        assert_eq!(r.component_masses.len(), 2);
        assert_eq!(r.active_components(), vec![0]);
        // sublinear case spreads mass over both
        let s = poincare_constant(&g, 2.0, 1.0, &PoincareOptions::default()).unwrap();
        assert_eq!(s.active_components(), vec![0, 1]);
    }

    #[test]
    fn rejects_bad_exponents() {
        let g = grid(&Domain::unit_cube(2).unwrap(), 0.25);
        assert!(poincare_constant(&g, 2.0, 3.0, &PoincareOptions::default()).is_err());
        assert!(poincare_constant(&g, 2.0, 0.5, &PoincareOptions::default()).is_err());
    }
}
