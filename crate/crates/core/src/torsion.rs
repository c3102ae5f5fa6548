//! The p-torsion function: closed form on balls, the discrete variational
//! solver, exhaustion by Ω ∩ B_R, and the L∞–L¹ and composition checks.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{check_p, conjugate, energy_with_gradient, ScalarField};
use crate::geometry::{discretize, discretize_cut, Domain, Grid};
use crate::inequalities::InequalityReport;
use crate::optim::{project_nonnegative, Objective, Spg, SpgParams, WeightedLaplacian};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolverOptions {
    /// Stop when sup |P(u - ∇J) - u| ≤ tol·h^N.
    pub tol: f64,
    pub max_iter: usize,
    /// Per-refinement energy growth that marks a composition probe divergent.
    pub growth: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 200_000,
            growth: 1.15,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TorsionResult {
    pub w: ScalarField,
    pub p: f64,
    /// (∫w)^{p-1}
    pub rigidity: f64,
    pub integral: f64,
    pub energy: f64,
    pub sup_norm: f64,
    pub iterations: usize,
    /// Projected-gradient sup-norm divided by h^N at termination.
    pub final_gradient_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TorsionSummary {
    pub p: f64,
    pub spacing: f64,
    pub nodes: usize,
    pub rigidity: f64,
    pub integral: f64,
    pub energy: f64,
    pub sup_norm: f64,
    pub iterations: usize,
    pub final_gradient_norm: f64,
}

impl TorsionResult {
    fn from_field(w: ScalarField, p: f64, iterations: usize, residual: f64) -> Self {
        let integral = w.integral();
        TorsionResult {
            p,
            rigidity: integral.powf(p - 1.0),
            integral,
            energy: w.dirichlet_energy(p),
            sup_norm: w.lp_norm(f64::INFINITY),
            iterations,
            final_gradient_norm: residual,
            w,
        }
    }

    /// ∫ w^s
    pub fn moment(&self, s: f64) -> f64 {
        self.w.lp_norm(s).powf(s)
    }

    pub fn summary(&self) -> TorsionSummary {
        TorsionSummary {
            p: self.p,
            spacing: self.w.grid().spacing(),
            nodes: self.w.grid().num_nodes(),
            rigidity: self.rigidity,
            integral: self.integral,
            energy: self.energy,
            sup_norm: self.sup_norm,
            iterations: self.iterations,
            final_gradient_norm: self.final_gradient_norm,
        }
    }
}

/// A_{N,p} = p/(p-1) N^{1/(p-1)}
pub fn ball_constant(dim: usize, p: f64) -> f64 {
    p / (p - 1.0) * (dim as f64).powf(1.0 / (p - 1.0))
}

/// (R^{p'} - |x - c|^{p'})_+ / A_{N,p}
pub fn ball_profile(center: &[f64], radius: f64, p: f64, x: &[f64]) -> f64 {
    let pc = conjugate(p);
    let r: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    (radius.powf(pc) - r.powf(pc)).max(0.0) / ball_constant(center.len(), p)
}

/// Closed-form torsion of B_R(0) sampled on a grid that discretizes it.
pub fn exact_ball_torsion(radius: f64, dim: usize, p: f64, grid: &Arc<Grid>) -> Result<ScalarField> {
    check_p(p)?;
    if grid.dim() != dim {
        return Err(Error::GridMismatch(format!(
            "grid has dimension {}, ball has {dim}",
            grid.dim()
        )));
    }
    let center = vec![0.0; dim];
    for i in 0..grid.num_nodes() {
        let x = grid.coords(i);
        let r2: f64 = x[..dim].iter().map(|v| v * v).sum();
        if r2 >= radius * radius {
            return Err(Error::GridMismatch(format!(
                "node {i} lies outside the ball of radius {radius}"
            )));
        }
    }
    Ok(ScalarField::from_fn(grid.clone(), |x| ball_profile(&center, radius, p, x)))
}

struct TorsionEnergy {
    grid: Arc<Grid>,
    p: f64,
}

impl Objective for TorsionEnergy {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        let vol = self.grid.cell_volume();
        let e = energy_with_gradient(&self.grid, x, self.p, grad);
        let inv_p = 1.0 / self.p;
        let mut lin = 0.0;
        for (g, u) in grad.iter_mut().zip(x) {
            *g = *g * inv_p - vol;
            lin += u;
        }
        e * inv_p - lin * vol
    }

    fn project(&self, x: &mut [f64]) {
        project_nonnegative(x)
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn precondition(&mut self, x: &[f64], g: &[f64], out: &mut [f64]) -> bool {
        let m = WeightedLaplacian::for_energy(&self.grid, x, self.p, metric_eps(self.p));
        m.solve(g, out, METRIC_RTOL, METRIC_MAX_CG);
        true
    }

    fn metric_step(&self) -> f64 {
        // balances the Hessian/metric ratios 1 and p-1
        2.0 / self.p
    }
}

/// Regularization of the metric weights relative to the steepest cell. For
/// p < 2 the weights blow up where the gradient vanishes, and a cap above the
/// solution's smallest gradients makes the metric underestimate the curvature
/// there. For p > 2 they vanish instead and only need a floor that keeps the
/// inner solves well conditioned.
pub(crate) fn metric_eps(p: f64) -> f64 {
    if p < 2.0 {
        1e-9
    } else {
        1e-2
    }
}
/// Relative accuracy of each inner metric solve.
pub(crate) const METRIC_RTOL: f64 = 1e-3;
pub(crate) const METRIC_MAX_CG: usize = 10_000;

/// Minimize (1/p)Σ|∇u|^p h^N - Σu h^N over u ≥ 0, starting from u ≡ 0.
pub fn solve_torsion(grid: &Arc<Grid>, p: f64, opts: &SolverOptions) -> Result<TorsionResult> {
    check_p(p)?;
    if grid.num_nodes() == 0 {
        return Err(Error::EmptyMask {
            spacing: grid.spacing(),
            reason: "grid has no interior nodes".into(),
        });
    }
    if p == 2.0 {
        return solve_linear(grid, opts);
    }
    let vol = grid.cell_volume();
    let target = opts.tol * vol;
    let obj = TorsionEnergy {
        grid: grid.clone(),
        p,
    };
    let mut spg = Spg::new(obj, vec![0.0; grid.num_nodes()], SpgParams::default());
    loop {
        let pg = spg.projected_gradient_norm();
        if pg <= target {
            break;
        }
        if spg.iterations() >= opts.max_iter {
            return Err(Error::NotConverged {
                iterations: spg.iterations(),
                residual: pg / vol,
            });
        }
        spg.step()?;
    }
    let residual = spg.projected_gradient_norm() / vol;
    let iterations = spg.iterations();
    let (_, u) = spg.into_parts();
    Ok(TorsionResult::from_field(
        ScalarField::from_raw(grid.clone(), u),
        p,
        iterations,
        residual,
    ))
}

/// At p = 2 the objective is quadratic with a symmetric positive definite
/// M-matrix, so its unconstrained minimizer is already nonnegative and
/// conjugate gradients reach it directly.
fn solve_linear(grid: &Arc<Grid>, opts: &SolverOptions) -> Result<TorsionResult> {
    let n = grid.num_nodes();
    let vol = grid.cell_volume();
    let target = opts.tol * vol;
    let mut obj = TorsionEnergy {
        grid: grid.clone(),
        p: 2.0,
    };
    let apply = |v: &[f64], out: &mut [f64]| {
        energy_with_gradient(grid, v, 2.0, out);
        out.iter_mut().for_each(|o| *o *= 0.5);
    };
    let mut x = vec![0.0; n];
    let mut r = vec![vol; n];
    let mut d = r.clone();
    let mut ad = vec![0.0; n];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let mut it = 0;
    while r.iter().fold(0.0, |m: f64, v| m.max(v.abs())) > target * 0.5 {
        if it >= opts.max_iter {
            let res = r.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            return Err(Error::NotConverged {
                iterations: it,
                residual: res / vol,
            });
        }
        apply(&d, &mut ad);
        let dad: f64 = d.iter().zip(&ad).map(|(a, b)| a * b).sum();
        let alpha = rr / dad;
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            d[i] = r[i] + beta * d[i];
        }
        it += 1;
        // refresh the recursive residual now and then against drift
        if it % 200 == 0 {
            apply(&x, &mut ad);
            for i in 0..n {
                r[i] = vol - ad[i];
            }
            rr = r.iter().map(|v| v * v).sum();
        }
    }
    project_nonnegative(&mut x);
    let mut g = vec![0.0; n];
    obj.eval(&x, &mut g);
    let residual = x
        .iter()
        .zip(&g)
        .fold(0.0, |m: f64, (xi, gi)| m.max(((xi - gi).max(0.0) - xi).abs()));
    if residual > target {
        return Err(Error::NotConverged {
            iterations: it,
            residual: residual / vol,
        });
    }
    Ok(TorsionResult::from_field(
        ScalarField::from_raw(grid.clone(), x),
        2.0,
        it,
        residual / vol,
    ))
}

/// Torsion of Ω ∩ B_R(0) for each cut radius, all expressed on the grid of
/// the largest radius.
pub fn exhaustion_sequence(
    domain: &Domain,
    p: f64,
    radii: &[f64],
    h: f64,
    opts: &SolverOptions,
) -> Result<Vec<TorsionResult>> {
    check_p(p)?;
    if radii.is_empty() {
        return Err(Error::InvalidDomain("exhaustion needs at least one radius".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidDomain("exhaustion radii must increase strictly".into()));
    }
    let grids: Vec<Arc<Grid>> = radii
        .iter()
        .map(|&r| discretize_cut(domain, h, Some(r)).map(Arc::new))
        .collect::<Result<_>>()?;
    let last = grids.last().unwrap().clone();
    grids
        .iter()
        .map(|g| {
            let mut t = solve_torsion(g, p, opts)?;
            t.w = t.w.extend_to(&last)?;
            Ok(t)
        })
        .collect()
}

/// ‖w‖_∞ ≤ C (∫w)^{p'/(N+p')} with C = ((N+p')/p') S^{N/(N(p-1)+p)}, for 1 < p < N.
pub fn linfty_l1_check(
    w: &TorsionResult,
    p: f64,
    dim: usize,
    sobolev_const: f64,
    tol: f64,
) -> Result<InequalityReport> {
    check_p(p)?;
    let n = dim as f64;
    if p >= n {
        return Err(Error::NotApplicable(format!(
            "the L-infinity/L1 bound is stated for 1 < p < N, got p={p}, N={dim}"
        )));
    }
    if !(sobolev_const > 0.0 && sobolev_const.is_finite()) {
        return Err(Error::InvalidExponent(format!(
            "Sobolev constant must be positive, got {sobolev_const}"
        )));
    }
    let pc = conjugate(p);
    let c = (n + pc) / pc * sobolev_const.powf(n / (n * (p - 1.0) + p));
    let rhs = c * w.integral.max(0.0).powf(pc / (n + pc));
    Ok(InequalityReport::relative("linfty_l1", w.sup_norm, rhs, tol).with_p(p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVerdict {
    Divergent,
    Convergent,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompositionProbe {
    pub beta: f64,
    pub p: f64,
    pub spacings: Vec<f64>,
    /// Σ|∇(w_h^β)|^p h^N per spacing.
    pub energies: Vec<f64>,
    /// Ratio of consecutive energies.
    pub growth: Vec<f64>,
    pub verdict: ProbeVerdict,
}

/// Tracks the energy of w^β under refinement to classify w^β ∈ W^{1,p}_0.
pub fn composition_probe(
    domain: &Domain,
    p: f64,
    beta: f64,
    h_list: &[f64],
    opts: &SolverOptions,
) -> Result<CompositionProbe> {
    check_p(p)?;
    if !(beta > 0.0) {
        return Err(Error::InvalidExponent(format!("beta must be positive, got {beta}")));
    }
    if h_list.len() < 4 {
        return Err(Error::InvalidDomain(format!(
            "composition probe needs at least 4 spacings, got {}",
            h_list.len()
        )));
    }
    if h_list.windows(2).any(|w| (w[1] * 2.0 / w[0] - 1.0).abs() > 1e-12) {
        return Err(Error::InvalidDomain("each spacing must halve the previous one".into()));
    }
    let mut energies = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let grid = Arc::new(discretize(domain, h)?);
        let w = solve_torsion(&grid, p, opts)?;
        energies.push(w.w.power(beta)?.dirichlet_energy(p));
    }
    let growth: Vec<f64> = energies.windows(2).map(|e| e[1] / e[0]).collect();
    let verdict = if growth.iter().all(|&g| g >= opts.growth) {
        ProbeVerdict::Divergent
    } else if (growth.last().unwrap() - 1.0).abs() <= 0.02 {
        ProbeVerdict::Convergent
    } else {
        ProbeVerdict::Inconclusive
    };
    Ok(CompositionProbe {
        beta,
        p,
        spacings: h_list.to_vec(),
        energies,
        growth,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn disk(h: f64) -> Arc<Grid> {
        Arc::new(discretize(&Domain::ball(vec![0.0, 0.0], 1.0).unwrap(), h).unwrap())
    }

    #[test]
    fn ball_center_values() {
        for dim in 1..=3 {
            for p in [1.5, 2.0, 3.0, 4.5] {
                let c = ball_profile(&vec![0.0; dim], 1.0, p, &vec![0.0; dim]);
                let expect = (p - 1.0) / p * (dim as f64).powf(-1.0 / (p - 1.0));
                assert!((c - expect).abs() < 1e-15);
            }
        }
        assert_eq!(ball_profile(&[0.0, 0.0], 1.0, 2.0, &[0.6, 0.8]), 0.0);
        let w = exact_ball_torsion(1.0, 2, 2.0, &disk(0.25)).unwrap();
        assert!(w.values().iter().all(|&v| v > 0.0 && v <= 0.25));
    }

    #[test]
    fn exact_profile_rejects_foreign_grid() {
        let g = Arc::new(discretize(&Domain::unit_cube(2).unwrap(), 0.125).unwrap());
        assert!(exact_ball_torsion(0.5, 2, 2.0, &g).is_err());
        assert!(exact_ball_torsion(1.0, 3, 2.0, &disk(0.25)).is_err());
    }

    #[test]
    fn square_center_value() {
        // −Δw = 1 on the unit square: w(1/2,1/2) from the double sine series
        let mut oracle = 0.0;
        let pi = std::f64::consts::PI;
        for m in (1..400).step_by(2) {
            for n in (1..400).step_by(2) {
                let (mf, nf) = (m as f64, n as f64);
                let sign = if ((m + n) / 2 - 1) % 2 == 0 { 1.0 } else { -1.0 };
                oracle += sign * 16.0 / (pi.powi(4) * mf * nf * (mf * mf + nf * nf));
            }
        }
        let g = Arc::new(discretize(&Domain::unit_cube(2).unwrap(), 1.0 / 128.0).unwrap());
        let t = solve_torsion(&g, 2.0, &SolverOptions::default()).unwrap();
        let c = t.w.values()[g.node_at([64, 64, 0]).unwrap()];
        println!("square center {c}, series {oracle}");
        assert!((oracle - 0.07367).abs() < 1e-4);
        assert!((c / oracle - 1.0).abs() < 0.02);
    }

    #[test]
    fn solver_matches_ball_profile() {
        for p in [1.5, 2.0, 3.0] {
            let g = disk(1.0 / 32.0);
            let t = solve_torsion(&g, p, &SolverOptions::default()).unwrap();
            let e = exact_ball_torsion(1.0, 2, p, &g).unwrap();
            let err = t
                .w
                .values()
                .iter()
                .zip(e.values())
                .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
            let rel = err / e.lp_norm(f64::INFINITY);
            println!("p={p}: sup error {rel:.4}, {} iterations", t.iterations);
            assert!(rel < 0.05);
            assert!(t.w.values().iter().all(|&v| v >= 0.0));
            assert!(t.final_gradient_norm <= 1e-8);
            assert!((t.energy - t.integral).abs() <= 2e-8 * t.integral);
            assert_eq!(t.rigidity, t.integral.powf(p - 1.0));
        }
    }

    #[test]
    fn weak_equation_residual() {
        let g = disk(1.0 / 16.0);
        for p in [1.5, 3.0] {
            let t = solve_torsion(&g, p, &SolverOptions::default()).unwrap();
            let mut grad = vec![0.0; g.num_nodes()];
            energy_with_gradient(&g, t.w.values(), p, &mut grad);
            let vol = g.cell_volume();
            // ⟨|∇w|^{p-2}∇w, ∇e_i⟩ = ∫e_i for each coordinate test vector
            for gi in grad {
                assert!((gi / p - vol).abs() <= 1e-8 * vol);
            }
        }
    }

    #[test]
    fn domain_monotonicity() {
        let small = Domain::cuboid(vec![0.25, 0.25], vec![0.75, 0.875]).unwrap();
        let big = Domain::unit_cube(2).unwrap();
        let h = 1.0 / 32.0;
        let gs = Arc::new(discretize(&small, h).unwrap());
        let gb = Arc::new(discretize(&big, h).unwrap());
        assert!(gs.is_submask_of(&gb));
        let opts = SolverOptions::default();
        for p in [1.5, 2.0, 3.0] {
            let ws = solve_torsion(&gs, p, &opts).unwrap().w.extend_to(&gb).unwrap();
            let wb = solve_torsion(&gb, p, &opts).unwrap().w;
            for (a, b) in ws.values().iter().zip(wb.values()) {
                assert!(*a <= b + 2.0 * opts.tol);
            }
        }
    }

    #[test]
    fn exhaustion_of_a_ball_stabilizes() {
        let d = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let seq = exhaustion_sequence(&d, 2.0, &[2.0, 3.0], 1.0 / 32.0, &SolverOptions::default()).unwrap();
        assert_eq!(seq[0].w.values(), seq[1].w.values());
        assert!(exhaustion_sequence(&d, 2.0, &[3.0, 2.0], 0.1, &SolverOptions::default()).is_err());
    }

    #[test]
    fn linfty_bound_on_exact_ball() {
        let pi = std::f64::consts::PI;
        let s32 = (4.0 / pi.sqrt()).powf(2.0 / 3.0) / (3.0 * pi);
        let g = Arc::new(discretize(&Domain::ball(vec![0.0; 3], 1.0).unwrap(), 1.0 / 32.0).unwrap());
        let w = exact_ball_torsion(1.0, 3, 2.0, &g).unwrap();
        let mut t = TorsionResult::from_field(w, 2.0, 0, 0.0);
        // evaluate at the closed-form values ∫w = 4π/45, sup = 1/6
        t.integral = 4.0 * pi / 45.0;
        t.sup_norm = 1.0 / 6.0;
        let r = linfty_l1_check(&t, 2.0, 3, s32, 1e-8).unwrap();
        println!("L-infinity/L1: {} <= {}", r.lhs, r.rhs);
        assert!(r.passed());
        assert!((r.rhs - 2.5 * s32.powf(0.6) * (4.0 * pi / 45.0).powf(0.4)).abs() < 1e-14);
        assert!(linfty_l1_check(&t, 3.0, 3, s32, 0.0).is_err());

        let zero = TorsionResult::from_field(ScalarField::zeros(g), 2.0, 0, 0.0);
        assert!(linfty_l1_check(&zero, 2.0, 3, s32, 0.0).unwrap().passed());
    }

    #[test]
    fn linfty_bound_scale_covariance() {
        let p = 2.0;
        let s = 0.2;
        let mk = |r: f64, h: f64| {
            let g = Arc::new(discretize(&Domain::ball(vec![0.0; 3], r).unwrap(), h).unwrap());
            TorsionResult::from_field(exact_ball_torsion(r, 3, p, &g).unwrap(), p, 0, 0.0)
        };
        let a = linfty_l1_check(&mk(1.0, 0.125), p, 3, s, 0.0).unwrap();
        let b = linfty_l1_check(&mk(2.0, 0.25), p, 3, s, 0.0).unwrap();
        let f = 2f64.powf(conjugate(p));
        assert!((b.lhs / a.lhs - f).abs() < 1e-12);
        assert!((b.rhs / a.rhs - f).abs() < 1e-12);
    }

    #[test]
    fn probe_input_validation() {
        let d = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let o = SolverOptions::default();
        assert!(composition_probe(&d, 2.0, 1.0, &[0.25, 0.125, 0.0625], &o).is_err());
        assert!(composition_probe(&d, 2.0, 1.0, &[0.25, 0.125, 0.0625, 0.02], &o).is_err());
        assert!(composition_probe(&d, 2.0, 0.0, &[0.25, 0.125, 0.0625, 0.03125], &o).is_err());
    }

    #[test]
    fn solver_rejects_bad_exponent() {
        let e = solve_torsion(&disk(0.25), 1.0, &SolverOptions::default()).unwrap_err();
        assert!(e.to_string().contains("p must exceed 1"));
    }

    proptest! {
        #[test]
        fn ball_scaling_law(r in 0.1f64..3.0, p in 1.2f64..5.0, x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let pt = [x * r * 0.7, y * r * 0.7];
            let a = ball_profile(&[0.0, 0.0], r, p, &pt);
            let b = ball_profile(&[0.0, 0.0], 2.0 * r, p, &[2.0 * pt[0], 2.0 * pt[1]]);
            prop_assert!((b - 2f64.powf(conjugate(p)) * a).abs() <= 1e-12 * b.abs().max(1e-300));
        }
    }
}
