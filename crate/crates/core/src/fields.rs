//! Nodal fields on masked grids, extended by zero outside the mask, and the
//! discrete calculus built on forward differences.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Grid, MAX_DIM, NONE};

#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} interior nodes",
                values.len(),
                grid.num_nodes()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("non-finite value at node {i}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.num_nodes();
        ScalarField {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Sample a function of the node coordinates.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.num_nodes())
            .map(|i| f(&grid.coords(i)[..dim]))
            .collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.num_nodes());
        ScalarField { grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> ScalarField {
        self.map(|v| alpha * v)
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.same_grid(other)?;
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.same_grid(other)?;
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Value at cell corner `s` (zero off the mask).
    #[inline]
    pub(crate) fn at(&self, s: u32) -> f64 {
        if s == NONE {
            0.0
        } else {
            self.values[s as usize]
        }
    }

    /// Forward-difference gradient of cell `c`.
    #[inline]
    pub fn cell_gradient(&self, c: usize) -> [f64; MAX_DIM] {
        cell_gradient(&self.grid, &self.values, c)
    }

    /// Average of the 2^N corner values of cell `c`.
    pub fn cell_average(&self, c: usize) -> f64 {
        let corners = 1usize << self.grid.dim();
        let cell = &self.grid.cells()[c];
        cell[..corners].iter().map(|&s| self.at(s)).sum::<f64>() / corners as f64
    }

    pub fn gradient_sq(&self) -> Vec<f64> {
        (0..self.grid.num_cells())
            .map(|c| self.cell_gradient(c).iter().map(|g| g * g).sum())
            .collect()
    }

    /// Σ_cells |∇u|^p h^N
    pub fn dirichlet_energy(&self, p: f64) -> f64 {
        let half = p / 2.0;
        let s: f64 = self.gradient_sq().iter().map(|g| g.powf(half)).sum();
        s * self.grid.cell_volume()
    }

    /// (Σ |u|^s h^N)^{1/s}; s = ∞ gives the maximum modulus.
    pub fn lp_norm(&self, s: f64) -> f64 {
        if s == f64::INFINITY {
            return self.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()));
        }
        let sum: f64 = self.values.iter().map(|v| v.abs().powf(s)).sum();
        (sum * self.grid.cell_volume()).powf(1.0 / s)
    }

    /// Σ u_i h^N in node order.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Nodewise u^β for a nonnegative field.
    pub fn power(&self, beta: f64) -> Result<ScalarField> {
        if !(beta > 0.0) {
            return Err(Error::InvalidExponent(format!("power needs beta > 0, got {beta}")));
        }
        if let Some((node, &value)) = self.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeValue { node, value });
        }
        Ok(self.map(|v| v.powf(beta)))
    }

    /// Zero extension onto a grid of equal spacing whose mask contains this one.
    pub fn extend_to(&self, target: &Arc<Grid>) -> Result<ScalarField> {
        if target.dim() != self.grid.dim() || target.spacing() != self.grid.spacing() {
            return Err(Error::GridMismatch("extension needs equal dimension and spacing".into()));
        }
        let mut values = vec![0.0; target.num_nodes()];
        for (i, &v) in self.values.iter().enumerate() {
            match target.node_at(self.grid.lattice_index(i)) {
                Some(j) => values[j] = v,
                None if v == 0.0 => {}
                None => {
                    return Err(Error::GridMismatch(format!(
                        "node {i} carries a value but is not interior in the target grid"
                    )))
                }
            }
        }
        Ok(ScalarField {
            grid: target.clone(),
            values,
        })
    }

    /// CSV with a metadata comment block, then `i0[,i1[,i2]],value` rows in
    /// node order. `extra` lines are emitted as further `#` comments.
    pub fn to_csv(&self, extra: &[String]) -> String {
        let dim = self.grid.dim();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# field dim={dim} spacing={} nodes={}",
            self.grid.spacing(),
            self.grid.num_nodes()
        );
        for e in extra {
            let _ = writeln!(s, "# {e}");
        }
        let head: Vec<String> = (0..dim).map(|k| format!("i{k}")).collect();
        let _ = writeln!(s, "{},value", head.join(","));
        for (i, v) in self.values.iter().enumerate() {
            let l = self.grid.lattice_index(i);
            for idx in &l[..dim] {
                let _ = write!(s, "{idx},");
            }
            let _ = writeln!(s, "{v}");
        }
        s
    }

    /// Inverse of [`ScalarField::to_csv`]; the grid is rebuilt from the listed nodes.
    pub fn from_csv(text: &str) -> Result<ScalarField> {
        let mut dim = None;
        let mut spacing = None;
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for tok in meta.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("dim=") {
                        dim = Some(v.parse::<usize>().map_err(|e| Error::Parse(format!("dim: {e}")))?);
                    } else if let Some(v) = tok.strip_prefix("spacing=") {
                        spacing = Some(v.parse::<f64>().map_err(|e| Error::Parse(format!("spacing: {e}")))?);
                    }
                }
                continue;
            }
            if !header_seen {
                header_seen = true;
                continue;
            }
            let d = dim.ok_or_else(|| Error::Parse("missing dim metadata".into()))?;
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != d + 1 {
                return Err(Error::Parse(format!("line {}: expected {} columns", ln + 1, d + 1)));
            }
            let mut l = [0i64; MAX_DIM];
            for k in 0..d {
                l[k] = parts[k]
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
            }
            let v: f64 = parts[d]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
            rows.push((l, v));
        }
        let dim = dim.ok_or_else(|| Error::Parse("missing dim metadata".into()))?;
        let spacing = spacing.ok_or_else(|| Error::Parse("missing spacing metadata".into()))?;
        let nodes: Vec<[i64; MAX_DIM]> = rows.iter().map(|r| r.0).collect();
        let grid = Arc::new(Grid::from_lattice_nodes(dim, spacing, &nodes)?);
        let mut values = vec![0.0; grid.num_nodes()];
        for (l, v) in rows {
            let id = grid.node_at(l).expect("node listed in csv");
            values[id] = v;
        }
        ScalarField::new(grid, values)
    }

    /// 8-bit PGM heatmap (N=2) plus the sidecar text recording the linear
    /// map from gray level back to field value.
    pub fn to_pgm(&self) -> Result<(String, String)> {
        let g = &self.grid;
        if g.dim() != 2 {
            return Err(Error::NotApplicable("PGM export needs N=2".into()));
        }
        let lo = self.values.iter().cloned().fold(0.0, f64::min);
        let hi = self.values.iter().cloned().fold(0.0, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let [nx, ny, _] = g.shape();
        let mut s = format!("P2\n{nx} {ny}\n255\n");
        for j in (0..ny).rev() {
            let row: Vec<String> = (0..nx)
                .map(|i| {
                    let v = self.at(g.box_slot([i, j, 0]));
                    (((v - lo) / span * 255.0).round() as u8).to_string()
                })
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        let sidecar = format!(
            "scaling=linear\nmin={lo}\nmax={hi}\nvalue=min+level*(max-min)/255\norigin_index={},{}\nspacing={}\n",
            g.origin()[0],
            g.origin()[1],
            g.spacing()
        );
        Ok((s, sidecar))
    }
}

#[inline]
pub(crate) fn cell_gradient(grid: &Grid, u: &[f64], c: usize) -> [f64; MAX_DIM] {
    let cell = &grid.cells()[c];
    let at = |s: u32| if s == NONE { 0.0 } else { u[s as usize] };
    let base = at(cell[0]);
    let inv_h = 1.0 / grid.spacing();
    let mut g = [0.0; MAX_DIM];
    for (k, gk) in g.iter_mut().enumerate().take(grid.dim()) {
        *gk = (at(cell[1 << k]) - base) * inv_h;
    }
    g
}

/// Σ_cells |∇u|^p h^N, with its gradient in the nodal values written to `grad`.
pub(crate) fn energy_with_gradient(grid: &Grid, u: &[f64], p: f64, grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let dim = grid.dim();
    let vol = grid.cell_volume();
    let h = grid.spacing();
    let half = p / 2.0;
    let mut energy = 0.0;
    for (c, cell) in grid.cells().iter().enumerate() {
        let g = cell_gradient(grid, u, c);
        let s: f64 = g[..dim].iter().map(|v| v * v).sum();
        if s == 0.0 {
            continue;
        }
        let sp = s.powf(half);
        energy += sp;
        // d|g|^p/dg_k = p |g|^{p-2} g_k, and dg_k/du = ±1/h
        let coef = p * sp / s * vol / h;
        for k in 0..dim {
            let t = coef * g[k];
            if cell[1 << k] != NONE {
                grad[cell[1 << k] as usize] += t;
            }
            if cell[0] != NONE {
                grad[cell[0] as usize] -= t;
            }
        }
    }
    energy * vol
}

/// Exponent bookkeeping shared by the inequality checks.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExponentSet {
    pub p: f64,
    pub q: f64,
    pub delta: f64,
    pub beta: f64,
}

impl ExponentSet {
    pub fn new(p: f64, q: f64, delta: f64, beta: f64) -> Result<Self> {
        check_p(p)?;
        if !(q >= 1.0 && q <= p) {
            return Err(Error::InvalidExponent(format!("q must lie in [1, p], got q={q}, p={p}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidExponent(format!("delta must be positive, got {delta}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidExponent(format!("beta must be nonnegative, got {beta}")));
        }
        Ok(ExponentSet { p, q, delta, beta })
    }

    /// q(p-1)/(p-q), defined for q < p.
    pub fn gamma(&self) -> Option<f64> {
        gamma(self.p, self.q)
    }

    pub fn conjugate(&self) -> f64 {
        conjugate(self.p)
    }

    /// (p/(p-1))^{p-1}
    pub fn critical_delta(&self) -> f64 {
        critical_delta(self.p)
    }

    /// (p-1)/p
    pub fn critical_beta(&self) -> f64 {
        (self.p - 1.0) / self.p
    }
}

pub fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(format!("p must exceed 1, got {p}")))
    }
}

pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

pub fn gamma(p: f64, q: f64) -> Option<f64> {
    (q < p).then(|| q * (p - 1.0) / (p - q))
}

pub fn critical_delta(p: f64) -> f64 {
    (p / (p - 1.0)).powf(p - 1.0)
}

/// Interpolation exponent for the non-conformal Gagliardo–Nirenberg family.
pub fn gn_theta(p: f64, q: f64, r: f64, dim: usize) -> f64 {
    let n = dim as f64;
    (1.0 - q / r) * n * p / (n * p + p * q - n * q)
}

/// ‖u‖_r over the Gagliardo–Nirenberg right-hand side without its constant.
/// For p ≠ N the bound is ‖u‖_q^{1-ϑ}‖∇u‖_p^ϑ; for p = N it is
/// (∫|∇u|^N)^{(r-q)/(Nr)} (∫|u|^q)^{1/r}.
pub fn gn_ratio(u: &ScalarField, p: f64, q: f64, r: f64, dim: usize) -> Result<f64> {
    check_p(p)?;
    if dim != u.grid().dim() {
        return Err(Error::GridMismatch("dimension differs from the field's grid".into()));
    }
    if !(q >= 1.0 && q <= p) {
        return Err(Error::InvalidExponent(format!("q must lie in [1, p], got {q}")));
    }
    let n = dim as f64;
    if p == n {
        if !(r > q && r.is_finite()) {
            return Err(Error::InvalidExponent(format!(
                "conformal case needs q < r < infinity, got q={q}, r={r}"
            )));
        }
    } else {
        let p_star = if p < n { n * p / (n - p) } else { f64::INFINITY };
        if !(r > q && r <= p_star) {
            return Err(Error::InvalidExponent(format!(
                "need q < r <= p* = {p_star}, got q={q}, r={r}"
            )));
        }
    }
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    let lhs = u.lp_norm(r);
    let e = u.dirichlet_energy(p);
    let rhs = if p == n {
        e.powf((r - q) / (n * r)) * u.lp_norm(q).powf(q / r)
    } else {
        let theta = gn_theta(p, q, r, dim);
        u.lp_norm(q).powf(1.0 - theta) * e.powf(theta / p)
    };
    if rhs <= 0.0 {
        return Err(Error::VanishingDenominator("gn_ratio"));
    }
    Ok(lhs / rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, Domain};
    use proptest::prelude::*;

    fn grid(d: &Domain, h: f64) -> Arc<Grid> {
        Arc::new(discretize(d, h).unwrap())
    }

    fn disk(h: f64) -> Arc<Grid> {
        grid(&Domain::ball(vec![0.0, 0.0], 1.0).unwrap(), h)
    }

    fn bump(x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (1.0 - r2).max(0.0).powi(2)
    }

    #[test]
    fn zero_field_calculus() {
        let u = ScalarField::zeros(disk(0.125));
        assert!(u.gradient_sq().iter().all(|&g| g == 0.0));
        assert_eq!(u.dirichlet_energy(2.0), 0.0);
        assert_eq!(u.integral(), 0.0);
    }

    #[test]
    fn linear_1d_gradient() {
        let g = grid(&Domain::interval(0.0, 1.0).unwrap(), 1.0 / 64.0);
        let u = ScalarField::from_fn(g.clone(), |x| x[0]);
        let gs = u.gradient_sq();
        let mut interior = 0;
        let mut e3 = 0.0;
        for (c, cell) in g.cells().iter().enumerate() {
            if cell[0] != NONE && cell[1] != NONE {
                assert!((gs[c] - 1.0).abs() < 1e-10);
                e3 += gs[c].powf(1.5) * g.cell_volume();
                interior += 1;
            }
        }
        assert_eq!(interior, g.num_nodes() - 1);
        // energy over cells away from the jump to zero at x = 1
        assert!((e3 - 1.0).abs() < 3.0 / 64.0);
    }

    #[test]
    fn affine_2d_gradient() {
        let g = grid(&Domain::unit_cube(2).unwrap(), 1.0 / 16.0);
        let u = ScalarField::from_fn(g.clone(), |x| x[0] + 2.0 * x[1]);
        let gs = u.gradient_sq();
        for (c, cell) in g.cells().iter().enumerate() {
            if cell[..4].iter().all(|&s| s != NONE) {
                assert!((gs[c] - 5.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ball_profile_energy_and_integral() {
        let g = disk(1.0 / 64.0);
        let w = ScalarField::from_fn(g, |x| (1.0 - x[0] * x[0] - x[1] * x[1]) / 4.0);
        let oracle = radial_integral(|r| (1.0 - r * r) / 4.0);
        assert!((oracle - std::f64::consts::PI / 8.0).abs() < 1e-12);
        let e = w.dirichlet_energy(2.0);
        let i = w.integral();
        println!("energy {e}, integral {i}, oracle {oracle}");
        assert!((i / oracle - 1.0).abs() < 0.03);
        assert!((e / oracle - 1.0).abs() < 0.03);
        assert_eq!(w.lp_norm(f64::INFINITY), 0.25);
    }

    // Composite Simpson on ∫_0^1 f(r) 2πr dr.
    fn radial_integral(f: impl Fn(f64) -> f64) -> f64 {
        let n = 2000;
        let h = 1.0 / n as f64;
        let g = |r: f64| f(r) * 2.0 * std::f64::consts::PI * r;
        let mut s = g(0.0) + g(1.0);
        for k in 1..n {
            s += g(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn counting_norm() {
        let g = grid(&Domain::unit_cube(2).unwrap(), 0.25);
        let u = ScalarField::new(g.clone(), vec![2.0; g.num_nodes()]).unwrap();
        assert_eq!(u.lp_norm(1.0), 2.0 * 9.0 * 0.0625);
        let v = ScalarField::new(g.clone(), (0..9).map(|i| i as f64 - 4.5).collect()).unwrap();
        assert_eq!(v.lp_norm(f64::INFINITY), 4.5);
    }

    #[test]
    fn negation_cancels() {
        let u = ScalarField::from_fn(disk(0.05), bump);
        assert_eq!(u.add(&u.scale(-1.0)).unwrap().integral(), 0.0);
    }

    #[test]
    fn power_laws() {
        let g = disk(0.1);
        let u = ScalarField::from_fn(g.clone(), bump);
        assert_eq!(u.power(1.0).unwrap().values(), u.values());
        let four = ScalarField::new(g.clone(), vec![4.0; g.num_nodes()]).unwrap();
        assert!(four.power(0.5).unwrap().values().iter().all(|&v| v == 2.0));
        let ab = u.power(0.7).unwrap().mul(&u.power(1.6).unwrap()).unwrap();
        let c = u.power(2.3).unwrap();
        for (x, y) in ab.values().iter().zip(c.values()) {
            assert!((x - y).abs() <= 1e-14 * y.max(1e-300));
        }
        assert!(matches!(u.scale(-1.0).power(0.5), Err(Error::NegativeValue { .. })));
    }

    #[test]
    fn gn_ratio_dilation() {
        // u(x) = bump(2x) lives on B_{1/2}; compare with bump on B_1 at matched resolution
        let big = ScalarField::from_fn(disk(1.0 / 128.0), bump);
        let small = ScalarField::from_fn(
            grid(&Domain::ball(vec![0.0, 0.0], 0.5).unwrap(), 1.0 / 256.0),
            |x| bump(&[2.0 * x[0], 2.0 * x[1]]),
        );
        for (p, q, r) in [(2.0, 1.0, 2.0), (3.0, 2.0, 4.0), (1.5, 1.0, 3.0)] {
            let a = gn_ratio(&big, p, q, r, 2).unwrap();
            let b = gn_ratio(&small, p, q, r, 2).unwrap();
            println!("gn ratio p={p} q={q} r={r}: {a} vs {b}");
            assert!((a / b - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn gn_admissibility() {
        let u = ScalarField::from_fn(disk(0.1), bump);
        assert!(gn_ratio(&u, 1.5, 1.0, 7.0, 2).is_err()); // r > p* = 6
        assert!(gn_ratio(&u, 2.0, 1.0, f64::INFINITY, 2).is_err());
        assert!(gn_ratio(&u, 2.0, 2.0, 2.0, 2).is_err());
        assert!(gn_ratio(&ScalarField::zeros(disk(0.1)), 2.0, 1.0, 2.0, 2).is_err());
        let r = gn_ratio(&u, 2.0, 1.0, 2.0, 2).unwrap();
        println!("empirical lower bound for the conformal constant: {r}");
        assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn csv_roundtrip() {
        let u = ScalarField::from_fn(disk(0.125), bump);
        let text = u.to_csv(&["config_hash=abc".into()]);
        let v = ScalarField::from_csv(&text).unwrap();
        assert_eq!(u.values(), v.values());
        assert_eq!(**u.grid(), **v.grid());
    }

    #[test]
    fn pgm_sidecar() {
        let u = ScalarField::from_fn(disk(0.25), bump);
        let (pgm, side) = u.to_pgm().unwrap();
        assert!(pgm.starts_with("P2\n"));
        assert!(pgm.contains("255"));
        assert!(side.contains("max=1\n"));
    }

    #[test]
    fn extension_preserves_sums() {
        let d = Domain::ball_chain(vec![0.5, 0.25], 2).unwrap();
        let full = Arc::new(discretize(&d, 1.0 / 32.0).unwrap());
        let cut = Arc::new(crate::geometry::discretize_cut(&d, 1.0 / 32.0, Some(0.6)).unwrap());
        let u = ScalarField::from_fn(cut, bump);
        let v = u.extend_to(&full).unwrap();
        assert_eq!(u.integral(), v.integral());
        assert!((u.dirichlet_energy(2.0) - v.dirichlet_energy(2.0)).abs() < 1e-12);
    }

    #[test]
    fn exponent_set_thresholds() {
        let e = ExponentSet::new(3.0, 2.0, 1.0, 0.5).unwrap();
        assert_eq!(e.gamma(), Some(4.0));
        assert_eq!(e.conjugate(), 1.5);
        assert_eq!(e.critical_delta(), 2.25);
        assert!((e.critical_beta() - 2.0 / 3.0).abs() < 1e-15);
        assert!(ExponentSet::new(1.0, 1.0, 1.0, 0.0).unwrap_err().to_string().contains("p must exceed 1"));
        assert!(ExponentSet::new(2.0, 3.0, 1.0, 0.0).is_err());
        assert_eq!(ExponentSet::new(2.0, 2.0, 1.0, 0.0).unwrap().gamma(), None);
    }

    fn random_field(seed: &[f64]) -> ScalarField {
        let g = disk(0.1);
        let n = g.num_nodes();
        ScalarField::new(g, (0..n).map(|i| seed[i % seed.len()] * ((i * 7 % 13) as f64 - 6.0)).collect())
            .unwrap()
    }

    proptest! {
        #[test]
        fn energy_homogeneity(alpha in -5.0f64..5.0, p in 1.1f64..4.0) {
            let u = ScalarField::from_fn(disk(0.1), bump);
            let a = u.scale(alpha).dirichlet_energy(p);
            let b = alpha.abs().powf(p) * u.dirichlet_energy(p);
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }

        #[test]
        fn triangle_inequality(s in 1.0f64..6.0, a in prop::collection::vec(-3.0f64..3.0, 5), b in prop::collection::vec(-3.0f64..3.0, 7)) {
            let u = random_field(&a);
            let v = random_field(&b);
            let lhs = u.add(&v).unwrap().lp_norm(s);
            prop_assert!(lhs <= (u.lp_norm(s) + v.lp_norm(s)) * (1.0 + 1e-12));
        }

        #[test]
        fn integral_linear(a in prop::collection::vec(-3.0f64..3.0, 5), b in prop::collection::vec(-3.0f64..3.0, 7)) {
            let u = random_field(&a);
            let v = random_field(&b);
            let sum = u.add(&v).unwrap().integral();
            let parts = u.integral() + v.integral();
            let scale = u.lp_norm(1.0) + v.lp_norm(1.0);
            prop_assert!((sum - parts).abs() <= 1e-12 * scale.max(1e-300));
        }

        #[test]
        fn gn_ratio_scale_invariant(alpha in 0.01f64..100.0) {
            let u = ScalarField::from_fn(disk(0.1), bump);
            let a = gn_ratio(&u, 3.0, 2.0, 4.0, 2).unwrap();
            let b = gn_ratio(&u.scale(alpha), 3.0, 2.0, 4.0, 2).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }
    }
}
