//! Torsional Hardy inequalities with weights built from the torsion function:
//! `A = |∇w/w|^p` on cells and `B = w^{1-p}` on nodes.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::InequalityReport;
use crate::error::{Error, Result};
use crate::fields::{check_p, critical_delta, ScalarField};
use crate::geometry::{Grid, MAX_DIM, NONE};

/// Nodes with `w` below this fraction of `sup w` carry no weight.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// Per-cell and per-node Hardy weights of a torsion field.
#[derive(Clone, Debug)]
pub struct HardyWeights {
    w: ScalarField,
    p: f64,
    /// `B_i = w_i^{1-p}`; zero on excluded nodes.
    node_weight: Vec<f64>,
    node_excluded: Vec<bool>,
    /// `∇w/w̄` per cell, with `w̄` the corner average.
    log_gradient: Vec<[f64; MAX_DIM]>,
    /// `A_c = |∇w/w̄|^p`; zero on excluded cells.
    cell_weight: Vec<f64>,
    cell_excluded: Vec<bool>,
}

/// `Σ_c A_c |ū_c|^p h^N` and `Σ_i B_i |u_i|^p h^N` for one field.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HardyMoments {
    pub gradient_term: f64,
    pub potential_term: f64,
}

impl HardyWeights {
    pub fn new(w: &ScalarField, p: f64) -> Result<Self> {
        check_p(p)?;
        if let Some((node, &value)) = w.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeValue { node, value });
        }
        let sup = w.max();
        if sup <= 0.0 {
            return Err(Error::ZeroField);
        }
        let floor = POSITIVITY_FLOOR * sup;
        let grid = w.grid().clone();
        let dim = grid.dim();

        let node_excluded: Vec<bool> = w.values().iter().map(|&v| v < floor).collect();
        let node_weight = w
            .values()
            .iter()
            .zip(&node_excluded)
            .map(|(&v, &ex)| if ex { 0.0 } else { v.powf(1.0 - p) })
            .collect();

        let n_cells = grid.num_cells();
        let mut log_gradient = vec![[0.0; MAX_DIM]; n_cells];
        let mut cell_weight = vec![0.0; n_cells];
        let mut cell_excluded = vec![false; n_cells];
        for c in 0..n_cells {
            let mean = w.cell_average(c);
            if mean < floor {
                cell_excluded[c] = true;
                continue;
            }
            let g = w.cell_gradient(c);
            let mut r = [0.0; MAX_DIM];
            for k in 0..dim {
                r[k] = g[k] / mean;
            }
            let s: f64 = r[..dim].iter().map(|v| v * v).sum();
            log_gradient[c] = r;
            cell_weight[c] = s.powf(p / 2.0);
        }
        Ok(HardyWeights {
            w: w.clone(),
            p,
            node_weight,
            node_excluded,
            log_gradient,
            cell_weight,
            cell_excluded,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn torsion(&self) -> &ScalarField {
        &self.w
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.w.grid()
    }

    pub fn node_weights(&self) -> &[f64] {
        &self.node_weight
    }

    pub fn cell_weights(&self) -> &[f64] {
        &self.cell_weight
    }

    pub fn excluded_nodes(&self) -> usize {
        self.node_excluded.iter().filter(|&&e| e).count()
    }

    pub fn excluded_cells(&self) -> usize {
        self.cell_excluded.iter().filter(|&&e| e).count()
    }

    fn check_grid(&self, u: &ScalarField) -> Result<()> {
        let (a, b) = (u.grid(), self.w.grid());
        if Arc::ptr_eq(a, b)
            || (a.num_nodes() == b.num_nodes() && a.spacing() == b.spacing() && a.origin() == b.origin())
        {
            Ok(())
        } else {
            Err(Error::GridMismatch("test field and torsion live on different grids".into()))
        }
    }

    /// Both weighted moments of `|u|^p`. Mass on excluded nodes or cells is an error.
    pub fn moments(&self, u: &ScalarField) -> Result<HardyMoments> {
        self.check_grid(u)?;
        let p = self.p;
        let vol = self.grid().cell_volume();
        let mut excluded = 0;
        let mut excluded_mass = 0.0;

        let mut potential = 0.0;
        for (i, &v) in u.values().iter().enumerate() {
            let m = v.abs().powf(p);
            if self.node_excluded[i] {
                if v != 0.0 {
                    excluded += 1;
                    excluded_mass += m * vol;
                }
            } else {
                potential += self.node_weight[i] * m;
            }
        }
        let mut gradient = 0.0;
        for c in 0..self.grid().num_cells() {
            let m = u.cell_average(c).abs().powf(p);
            if self.cell_excluded[c] {
                if m != 0.0 {
                    excluded += 1;
                    excluded_mass += m * vol;
                }
            } else {
                gradient += self.cell_weight[c] * m;
            }
        }
        if excluded > 0 {
            return Err(Error::ExcludedMass {
                nodes: excluded,
                mass: excluded_mass,
            });
        }
        Ok(HardyMoments {
            gradient_term: gradient * vol,
            potential_term: potential * vol,
        })
    }
}

fn nonzero(u: &ScalarField) -> Result<()> {
    if u.is_zero() {
        Err(Error::ZeroField)
    } else {
        Ok(())
    }
}

/// `∫|u|^p / w^{p-1} ≤ ∫|∇u|^p`
pub fn hardy_simple(u: &ScalarField, weights: &HardyWeights, tol: f64) -> Result<InequalityReport> {
    nonzero(u)?;
    let m = weights.moments(u)?;
    let p = weights.p;
    Ok(InequalityReport::relative("hardy_simple", m.potential_term, u.dirichlet_energy(p), tol).with_p(p))
}

fn delta_lhs(m: &HardyMoments, p: f64, delta: f64) -> f64 {
    let a_coef = 1.0 - delta.powf(-1.0 / (p - 1.0));
    (p - 1.0) / delta * (a_coef * m.gradient_term + m.potential_term / (p - 1.0))
}

/// `(p-1)/δ ∫[(1-δ^{-1/(p-1)}) A + B/(p-1)] |u|^p ≤ ∫|∇u|^p`
pub fn hardy_delta(u: &ScalarField, weights: &HardyWeights, delta: f64, tol: f64) -> Result<InequalityReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidExponent(format!("delta must be positive, got {delta}")));
    }
    nonzero(u)?;
    let m = weights.moments(u)?;
    let p = weights.p;
    Ok(
        InequalityReport::relative("hardy_delta", delta_lhs(&m, p, delta), u.dirichlet_energy(p), tol)
            .with_p(p)
            .with_delta(delta),
    )
}

/// `((p-1)/p)^p ∫[A + p B/(p-1)] |u|^p ≤ ∫|∇u|^p`, evaluated directly rather
/// than through [`hardy_delta`] at the critical δ.
pub fn hardy_suboptimal(u: &ScalarField, weights: &HardyWeights, tol: f64) -> Result<InequalityReport> {
    nonzero(u)?;
    let m = weights.moments(u)?;
    let p = weights.p;
    let lhs = ((p - 1.0) / p).powf(p) * (m.gradient_term + p / (p - 1.0) * m.potential_term);
    Ok(InequalityReport::relative("hardy_suboptimal", lhs, u.dirichlet_energy(p), tol)
        .with_p(p)
        .with_delta(critical_delta(p)))
}

/// The supremum over δ of the left side of [`hardy_delta`]:
/// `((p-1)/p)^p (∫[A + B/(p-1)]|u|^p)^p / (∫A|u|^p)^{p-1}`.
pub fn hardy_optimized(u: &ScalarField, weights: &HardyWeights, tol: f64) -> Result<InequalityReport> {
    nonzero(u)?;
    let m = weights.moments(u)?;
    let p = weights.p;
    if !(m.gradient_term > 0.0) {
        return Err(Error::VanishingDenominator("weighted gradient moment"));
    }
    let s = m.gradient_term + m.potential_term / (p - 1.0);
    let lhs = ((p - 1.0) / p).powf(p) * s.powf(p) / m.gradient_term.powf(p - 1.0);
    Ok(InequalityReport::relative("hardy_optimized", lhs, u.dirichlet_energy(p), tol).with_p(p))
}

/// `c·w^{δ^{-1/(p-1)}}`
pub fn extremal_field(w: &ScalarField, p: f64, delta: f64, c: f64) -> Result<ScalarField> {
    check_p(p)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidExponent(format!("delta must be positive, got {delta}")));
    }
    Ok(w.power(delta.powf(-1.0 / (p - 1.0)))?.scale(c))
}

/// Cellwise remainder of the quantitative Young inequality, with `u` paired
/// through its cell average. Vanishes exactly on the extremal ray.
pub fn hardy_remainder(u: &ScalarField, weights: &HardyWeights, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidExponent(format!("delta must be positive, got {delta}")));
    }
    weights.check_grid(u)?;
    let p = weights.p;
    let dim = weights.grid().dim();
    let cu = delta.powf(1.0 / p);
    let cw = delta.powf(-1.0 / (p * (p - 1.0)));
    let mut sum = 0.0;
    for c in 0..weights.grid().num_cells() {
        let g = u.cell_gradient(c);
        let mean = u.cell_average(c);
        if weights.cell_excluded[c] {
            if mean != 0.0 || g.iter().any(|&v| v != 0.0) {
                return Err(Error::ExcludedMass {
                    nodes: 1,
                    mass: mean.abs().powf(p) * weights.grid().cell_volume(),
                });
            }
            continue;
        }
        let r = &weights.log_gradient[c];
        let (mut diff, mut a2, mut b2) = (0.0, 0.0, 0.0);
        for k in 0..dim {
            let a = cu * g[k];
            let b = cw * mean * r[k];
            diff += (a - b) * (a - b);
            a2 += a * a;
            b2 += b * b;
        }
        if diff == 0.0 {
            continue;
        }
        sum += if p >= 2.0 {
            diff.powf(p / 2.0)
        } else {
            (a2 + b2).powf((p - 2.0) / 2.0) * diff
        };
    }
    Ok(sum * weights.grid().cell_volume())
}

/// `u_n = w^{(p-1)/p + 1/n}` and the quotient `∫|∇u_n|^p / ∫[A + pB/(p-1)]|u_n|^p`,
/// which tends to `((p-1)/p)^p`.
pub fn sharpness_sequence(weights: &HardyWeights, n: u32) -> Result<(ScalarField, f64)> {
    if n == 0 {
        return Err(Error::InvalidExponent("sharpness index n must be at least 1".into()));
    }
    let p = weights.p;
    let u = weights.w.power((p - 1.0) / p + 1.0 / n as f64)?;
    let m = weights.moments(&u)?;
    let denom = m.gradient_term + p / (p - 1.0) * m.potential_term;
    if !(denom > 0.0) {
        return Err(Error::VanishingDenominator("sharpness denominator"));
    }
    let quotient = u.dirichlet_energy(p) / denom;
    Ok((u, quotient))
}

/// Parameters of the randomized admissible test fields.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TestFieldSpec {
    pub count: usize,
    pub seed: u64,
    /// Fields vanish on nodes within this many lattice steps of the boundary.
    pub margin: u32,
    /// Range of the torsion power multiplying each bump.
    pub min_power: f64,
    pub max_power: f64,
}

impl Default for TestFieldSpec {
    fn default() -> Self {
        TestFieldSpec {
            count: 100,
            seed: 0,
            margin: 2,
            min_power: 0.75,
            max_power: 2.0,
        }
    }
}

/// Products of coordinate bump polynomials, an oscillating factor and a
/// power of `w`, cut off smoothly away from the boundary. Deterministic in
/// the seed.
pub fn random_test_fields(w: &ScalarField, params: &TestFieldSpec) -> Result<Vec<ScalarField>> {
    if !(params.min_power > 0.0 && params.min_power <= params.max_power) {
        return Err(Error::InvalidExponent(format!(
            "test field powers need 0 < min_power <= max_power, got {} and {}",
            params.min_power, params.max_power
        )));
    }
    let grid = w.grid().clone();
    let dim = grid.dim();
    let n = grid.num_nodes();
    const RAMP: f64 = 3.0;
    let cutoff: Vec<f64> = grid
        .boundary_distance()
        .iter()
        .map(|&d| ((d as f64 - params.margin as f64) / RAMP).clamp(0.0, 1.0))
        .collect();
    if cutoff.iter().all(|&c| c == 0.0) {
        return Err(Error::EmptyMask {
            spacing: grid.spacing(),
            reason: format!("no node lies more than {} steps inside the boundary", params.margin),
        });
    }
    let coords: Vec<[f64; MAX_DIM]> = (0..n).map(|i| grid.coords(i)).collect();
    let mut lo = [f64::INFINITY; MAX_DIM];
    let mut hi = [f64::NEG_INFINITY; MAX_DIM];
    for x in &coords {
        for k in 0..dim {
            lo[k] = lo[k].min(x[k]);
            hi[k] = hi[k].max(x[k]);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut fields = Vec::with_capacity(params.count);
    while fields.len() < params.count {
        let power = rng.gen_range(params.min_power..=params.max_power);
        let mut centre = [0.0; MAX_DIM];
        let mut width = [1.0; MAX_DIM];
        let mut freq = [0.0; MAX_DIM];
        for k in 0..dim {
            let span = (hi[k] - lo[k]).max(grid.spacing());
            centre[k] = rng.gen_range(lo[k]..=hi[k]);
            width[k] = rng.gen_range(0.4..=1.2) * span;
            freq[k] = rng.gen_range(0.0..=3.0) / span;
        }
        let amplitude = rng.gen_range(0.0..=1.5);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);

        let mut values = vec![0.0; n];
        for i in 0..n {
            if cutoff[i] == 0.0 {
                continue;
            }
            let x = &coords[i];
            let mut v = cutoff[i] * w.values()[i].powf(power);
            let mut arg = phase;
            for k in 0..dim {
                let t = (x[k] - centre[k]) / width[k];
                v *= (1.0 - t * t).max(0.0).powi(2);
                arg += std::f64::consts::TAU * freq[k] * (x[k] - centre[k]);
            }
            values[i] = v * (1.0 + amplitude * arg.cos());
        }
        let u = ScalarField::new(grid.clone(), values)?;
        if !u.is_zero() {
            fields.push(u);
        }
    }
    Ok(fields)
}

/// True when some cell touching `u`'s support reaches outside the mask.
pub fn touches_boundary(u: &ScalarField) -> bool {
    let grid = u.grid();
    let corners = 1usize << grid.dim();
    grid.cells().iter().any(|cell| {
        let live = cell[..corners].iter().any(|&s| s != NONE && u.values()[s as usize] != 0.0);
        live && cell[..corners].contains(&NONE)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, Domain};
    use crate::torsion::{solve_torsion, SolverOptions};
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn disk_torsion(p: f64) -> ScalarField {
        let grid = Arc::new(discretize(&Domain::ball(vec![0.0, 0.0], 1.0).unwrap(), 1.0 / 24.0).unwrap());
        solve_torsion(&grid, p, &SolverOptions::default()).unwrap().w
    }

    fn disk2() -> &'static (ScalarField, HardyWeights) {
        static CELL: OnceLock<(ScalarField, HardyWeights)> = OnceLock::new();
        CELL.get_or_init(|| {
            let w = disk_torsion(2.0);
            let hw = HardyWeights::new(&w, 2.0).unwrap();
            (w, hw)
        })
    }

    fn disk3() -> &'static (ScalarField, HardyWeights) {
        static CELL: OnceLock<(ScalarField, HardyWeights)> = OnceLock::new();
        CELL.get_or_init(|| {
            let w = disk_torsion(3.0);
            let hw = HardyWeights::new(&w, 3.0).unwrap();
            (w, hw)
        })
    }

    fn suite(w: &ScalarField, count: usize) -> Vec<ScalarField> {
        random_test_fields(
            w,
            &TestFieldSpec {
                count,
                seed: 7,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn torsion_itself_is_an_equality_case() {
        // u = w: Σ w^p / w^{p-1} = ∫w = ∫|∇w|^p at the discrete minimizer
        for (w, hw) in [disk2(), disk3()] {
            let r = hardy_simple(w, hw, 0.02).unwrap();
            assert!((r.ratio.unwrap() - 1.0).abs() < 1e-6, "{:?}", r.ratio);
            let d = hardy_delta(w, hw, 1.0, 0.02).unwrap();
            assert_eq!(d.lhs, r.lhs);
        }
    }

    #[test]
    fn delta_one_matches_simple_form() {
        let (w, hw) = disk3();
        for u in suite(w, 5) {
            let a = hardy_simple(&u, hw, 0.02).unwrap();
            let b = hardy_delta(&u, hw, 1.0, 0.02).unwrap();
            assert!((a.lhs - b.lhs).abs() <= 1e-14 * a.lhs);
        }
    }

    #[test]
    fn critical_delta_matches_dedicated_path() {
        for (w, hw) in [disk2(), disk3()] {
            let p = hw.p();
            for u in suite(w, 5) {
                let a = hardy_delta(&u, hw, critical_delta(p), 0.02).unwrap();
                let b = hardy_suboptimal(&u, hw, 0.02).unwrap();
                assert!((a.lhs - b.lhs).abs() <= 1e-12 * b.lhs, "{} {}", a.lhs, b.lhs);
            }
        }
    }

    #[test]
    fn optimized_form_dominates_sampled_deltas() {
        for (w, hw) in [disk2(), disk3()] {
            let p = hw.p();
            for u in suite(w, 10) {
                let opt = hardy_optimized(&u, hw, 0.02).unwrap().lhs;
                for delta in [0.5, 1.0, 2.0, critical_delta(p)] {
                    let d = hardy_delta(&u, hw, delta, 0.02).unwrap().lhs;
                    assert!(opt >= d - 1e-10 * opt.abs().max(1.0), "δ={delta}: {opt} < {d}");
                }
            }
        }
    }

    #[test]
    fn random_suite_passes() {
        for (w, hw) in [disk2(), disk3()] {
            let p = hw.p();
            for u in suite(w, 20) {
                assert!(!touches_boundary(&u));
                assert!(hardy_simple(&u, hw, 0.02).unwrap().passed());
                assert!(hardy_optimized(&u, hw, 0.02).unwrap().passed());
                for delta in [0.5, 1.0, 2.0, critical_delta(p)] {
                    assert!(hardy_delta(&u, hw, delta, 0.02).unwrap().passed());
                }
            }
        }
    }

    #[test]
    fn extremal_near_equality_at_p2() {
        let (w, hw) = disk2();
        let u = extremal_field(w, 2.0, 0.81, 1.0).unwrap();
        let r = hardy_delta(&u, hw, 0.81, 0.02).unwrap();
        assert!((r.ratio.unwrap() - 1.0).abs() < 0.02, "{:?}", r.ratio);
        let rem = hardy_remainder(&u, hw, 0.81).unwrap();
        assert!(rem <= 0.02 * u.dirichlet_energy(2.0), "{rem}");
    }

    #[test]
    fn extremal_field_special_cases() {
        let (w, _) = disk3();
        let e = extremal_field(w, 3.0, 1.0, 2.5).unwrap();
        for (a, b) in e.values().iter().zip(w.values()) {
            assert!((a - 2.5 * b).abs() <= 1e-15 * a.abs().max(1e-300));
        }
        assert!(extremal_field(w, 3.0, 0.7, 0.0).unwrap().is_zero());
        let q = extremal_field(w, 2.0, 4.0, 1.0).unwrap();
        let i = w.values().iter().position(|&v| v > 0.0).unwrap();
        assert!((q.values()[i] - w.values()[i].powf(0.25)).abs() < 1e-15);
    }

    #[test]
    fn remainder_positive_off_the_extremal_ray_and_homogeneous() {
        let (w, hw) = disk3();
        for u in suite(w, 5) {
            let r = hardy_remainder(&u, hw, 1.0).unwrap();
            assert!(r > 0.0);
            let r2 = hardy_remainder(&u.scale(2.0), hw, 1.0).unwrap();
            assert!((r2 / r - 8.0).abs() < 1e-12);
        }
        let (w, _) = disk2();
        let hw = HardyWeights::new(w, 1.5).unwrap();
        let u = &suite(w, 1)[0];
        let r = hardy_remainder(u, &hw, 0.8).unwrap();
        let r2 = hardy_remainder(&u.scale(2.0), &hw, 0.8).unwrap();
        assert!(r > 0.0 && (r2 / r - 2f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn sharpness_quotient_in_proof_bracket() {
        let (_, hw) = disk2();
        let mut last = f64::INFINITY;
        for n in [2, 4, 8] {
            let (_, q) = sharpness_sequence(hw, n).unwrap();
            assert!(q >= 0.25 * 0.98 && q <= (0.5 + 1.0 / n as f64).powi(2) * 1.02, "n={n}: {q}");
            assert!(q < last * 1.02);
            last = q;
        }
        assert!(sharpness_sequence(hw, 0).is_err());
    }

    #[test]
    fn mass_on_excluded_nodes_is_reported() {
        let (w, _) = disk2();
        let mut v = w.values().to_vec();
        let centre = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        v[centre - 1] = 0.0;
        let wz = ScalarField::new(w.grid().clone(), v).unwrap();
        let hw = HardyWeights::new(&wz, 2.0).unwrap();
        assert_eq!(hw.excluded_nodes(), 1);
        match hardy_simple(w, &hw, 0.02) {
            Err(Error::ExcludedMass { nodes, mass }) => assert!(nodes >= 1 && mass > 0.0),
            other => panic!("expected excluded mass, got {other:?}"),
        }
    }

    #[test]
    fn suite_is_deterministic_and_vanishes_near_boundary() {
        let (w, _) = disk2();
        let a = suite(w, 3);
        let b = suite(w, 3);
        let dist = w.grid().boundary_distance();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values(), y.values());
            for (v, d) in x.values().iter().zip(&dist) {
                if *d <= 2 {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn ratios_are_scale_invariant(alpha in prop_oneof![-50.0..-0.01f64, 0.01..50.0f64], k in 0usize..4) {
            let (w, hw) = disk3();
            let u = &suite(w, 4)[k];
            let v = u.scale(alpha);
            for (a, b) in [
                (hardy_simple(u, hw, 0.02).unwrap(), hardy_simple(&v, hw, 0.02).unwrap()),
                (hardy_delta(u, hw, 0.5, 0.02).unwrap(), hardy_delta(&v, hw, 0.5, 0.02).unwrap()),
                (hardy_optimized(u, hw, 0.02).unwrap(), hardy_optimized(&v, hw, 0.02).unwrap()),
            ] {
                prop_assert!((a.ratio.unwrap() - b.ratio.unwrap()).abs() <= 1e-12 * a.ratio.unwrap().abs());
            }
        }
    }
}
