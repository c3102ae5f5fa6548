//! Two-sided bounds tying Poincaré constants to the torsion function.

use std::sync::Arc;

use serde::Serialize;

use super::InequalityReport;
use crate::error::{Error, Result};
use crate::fields::{check_p, gamma};
use crate::geometry::Grid;
use crate::spectral::{poincare_from, PoincareOptions, PoincareResult};
use crate::torsion::{solve_torsion, TorsionResult};

/// A normalized quantity `value` with its lower and upper checks.
#[derive(Clone, Debug, Serialize)]
pub struct Sandwich {
    pub value: f64,
    pub lambda: f64,
    /// The torsion factor multiplying λ.
    pub torsion_factor: f64,
    pub lower: InequalityReport,
    pub upper: InequalityReport,
}

impl Sandwich {
    pub fn reports(&self) -> [&InequalityReport; 2] {
        [&self.lower, &self.upper]
    }

    pub fn passed(&self) -> bool {
        !self.lower.failed() && !self.upper.failed()
    }
}

/// `(1/q)((p-1)/(p-q))^{p-1}`
pub fn main_upper_bound(p: f64, q: f64) -> f64 {
    ((p - 1.0) / (p - q)).powf(p - 1.0) / q
}

/// `4 + 3N log 2`
pub fn pp_upper_bound(dim: usize) -> f64 {
    4.0 + 3.0 * dim as f64 * std::f64::consts::LN_2
}

fn check_q_below_p(p: f64, q: f64) -> Result<()> {
    if !(q >= 1.0 && q < p) {
        return Err(Error::InvalidExponent(format!("q must satisfy 1 <= q < p, got q={q} with p={p}")));
    }
    Ok(())
}

/// `1 ≤ λ_{p,q} (∫w^γ)^{(p-q)/q} ≤ (1/q)((p-1)/(p-q))^{p-1}` with γ = q(p-1)/(p-q).
pub fn theorem_main_sandwich(
    grid: &Arc<Grid>,
    p: f64,
    q: f64,
    opts: &PoincareOptions,
    tol: f64,
) -> Result<Sandwich> {
    check_p(p)?;
    check_q_below_p(p, q)?;
    let torsion = solve_torsion(grid, p, &opts.torsion)?;
    let lambda = poincare_from(grid, p, q, torsion.w.values().to_vec(), opts)?;
    main_sandwich_from(&torsion, &lambda, q, tol)
}

/// [`theorem_main_sandwich`] from already solved fields.
pub fn main_sandwich_from(torsion: &TorsionResult, lambda: &PoincareResult, q: f64, tol: f64) -> Result<Sandwich> {
    let p = torsion.p;
    check_q_below_p(p, q)?;
    let g = gamma(p, q).expect("q < p");
    let factor = torsion.moment(g).powf((p - q) / q);
    let value = lambda.lambda * factor;
    let bound = main_upper_bound(p, q);
    Ok(Sandwich {
        value,
        lambda: lambda.lambda,
        torsion_factor: factor,
        lower: InequalityReport::relative("main_sandwich_lower", 1.0, value, tol)
            .with_p(p)
            .with_q(q),
        upper: InequalityReport::relative("main_sandwich_upper", value, bound, tol)
            .with_p(p)
            .with_q(q),
    })
}

/// `1 ≤ λ_{p,p} ‖w‖_∞^{p-1} ≤ D_{N,p}`. The upper constant is explicit only
/// at p = 2; elsewhere the upper report is unchecked.
pub fn theorem_pp_sandwich(grid: &Arc<Grid>, p: f64, opts: &PoincareOptions, tol: f64) -> Result<Sandwich> {
    check_p(p)?;
    let torsion = solve_torsion(grid, p, &opts.torsion)?;
    let lambda = poincare_from(grid, p, p, torsion.w.values().to_vec(), opts)?;
    pp_sandwich_from(&torsion, &lambda, tol)
}

/// [`theorem_pp_sandwich`] from already solved fields.
pub fn pp_sandwich_from(torsion: &TorsionResult, lambda: &PoincareResult, tol: f64) -> Result<Sandwich> {
    let p = torsion.p;
    let dim = torsion.w.grid().dim();
    let factor = torsion.sup_norm.powf(p - 1.0);
    let value = lambda.lambda * factor;
    let upper = if p == 2.0 {
        InequalityReport::relative("pp_sandwich_upper", value, pp_upper_bound(dim), tol)
    } else {
        InequalityReport::unchecked("pp_sandwich_upper", "constant not explicit for p != 2")
    };
    Ok(Sandwich {
        value,
        lambda: lambda.lambda,
        torsion_factor: factor,
        lower: InequalityReport::relative("pp_sandwich_lower", 1.0, value, tol)
            .with_p(p)
            .with_q(p),
        upper: upper.with_p(p).with_q(p),
    })
}
