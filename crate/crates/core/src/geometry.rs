//! Domain descriptors, ball chains, and conservative rasterization onto
//! origin-anchored Cartesian lattices.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Marker for "no interior node here" in index tables.
pub const NONE: u32 = u32::MAX;

/// Rasterization is implemented for these dimensions only.
pub const MAX_DIM: usize = 3;

#[derive(Clone, Debug)]
enum Shape {
    Interval { a: f64, b: f64 },
    Cuboid { low: Vec<f64>, high: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    BallChain { radii: Vec<f64> },
    Masked(Arc<Grid>),
}

/// A bounded open set in R^N.
#[derive(Clone, Debug)]
pub struct Domain {
    shape: Shape,
    dim: usize,
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidDomain(format!(
                "interval needs finite a < b, got ({a}, {b})"
            )));
        }
        Ok(Domain {
            shape: Shape::Interval { a, b },
            dim: 1,
        })
    }

    pub fn cuboid(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.is_empty() || low.len() != high.len() {
            return Err(Error::InvalidDomain(
                "box corners must be non-empty and of equal length".into(),
            ));
        }
        for (k, (l, h)) in low.iter().zip(&high).enumerate() {
            if !(l.is_finite() && h.is_finite() && h > l) {
                return Err(Error::InvalidDomain(format!(
                    "box extent along axis {k} must be positive, got [{l}, {h}]"
                )));
            }
        }
        let dim = low.len();
        Ok(Domain {
            shape: Shape::Cuboid { low, high },
            dim,
        })
    }

    pub fn unit_cube(dim: usize) -> Result<Self> {
        Self::cuboid(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidDomain("ball center needs a coordinate".into()));
        }
        if !(radius.is_finite() && radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        let dim = center.len();
        Ok(Domain {
            shape: Shape::Ball { center, radius },
            dim,
        })
    }

    /// Tangent chain of balls along the first axis; centers are derived.
    pub fn ball_chain(radii: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDomain("dimension must be positive".into()));
        }
        if radii.is_empty() {
            return Err(Error::InvalidDomain("ball chain needs at least one radius".into()));
        }
        if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::InvalidDomain(format!(
                "ball chain radii must be positive, got {r}"
            )));
        }
        Ok(Domain {
            shape: Shape::BallChain { radii },
            dim,
        })
    }

    /// Wrap an explicit mask as a domain (union of the closed node cells).
    pub fn masked(grid: Arc<Grid>) -> Self {
        let dim = grid.dim();
        Domain {
            shape: Shape::Masked(grid),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &'static str {
        match self.shape {
            Shape::Interval { .. } => "interval",
            Shape::Cuboid { .. } => "box",
            Shape::Ball { .. } => "ball",
            Shape::BallChain { .. } => "ball_chain",
            Shape::Masked(_) => "masked_grid",
        }
    }

    pub fn chain_radii(&self) -> Option<&[f64]> {
        match &self.shape {
            Shape::BallChain { radii } => Some(radii),
            _ => None,
        }
    }

    /// Ball center and radius, if this is a single ball.
    pub fn as_ball(&self) -> Option<(&[f64], f64)> {
        match &self.shape {
            Shape::Ball { center, radius } => Some((center, *radius)),
            _ => None,
        }
    }

    /// Centers of a ball chain: x_0 = 0, x_{k+1} = x_k + (r_k + r_{k+1}) e_1.
    pub fn chain_centers(&self) -> Vec<Vec<f64>> {
        let Shape::BallChain { radii } = &self.shape else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(radii.len());
        let mut x = 0.0;
        for (k, r) in radii.iter().enumerate() {
            if k > 0 {
                x += radii[k - 1] + r;
            }
            let mut c = vec![0.0; self.dim];
            c[0] = x;
            out.push(c);
        }
        out
    }

    /// Lebesgue measure of the continuous domain.
    pub fn measure(&self) -> f64 {
        match &self.shape {
            Shape::Interval { a, b } => b - a,
            Shape::Cuboid { low, high } => low.iter().zip(high).map(|(l, h)| h - l).product(),
            Shape::Ball { radius, .. } => unit_ball_volume(self.dim) * radius.powi(self.dim as i32),
            Shape::BallChain { radii } => {
                let v = unit_ball_volume(self.dim);
                radii.iter().map(|r| v * r.powi(self.dim as i32)).sum()
            }
            Shape::Masked(g) => g.num_nodes() as f64 * g.cell_volume(),
        }
    }

    /// Elementary convex pieces whose disjoint union is the domain.
    fn pieces(&self) -> Vec<Piece> {
        match &self.shape {
            Shape::Interval { a, b } => vec![Piece::Cuboid {
                low: vec![*a],
                high: vec![*b],
            }],
            Shape::Cuboid { low, high } => vec![Piece::Cuboid {
                low: low.clone(),
                high: high.clone(),
            }],
            Shape::Ball { center, radius } => vec![Piece::Ball {
                center: center.clone(),
                radius: *radius,
            }],
            Shape::BallChain { radii } => self
                .chain_centers()
                .into_iter()
                .zip(radii)
                .map(|(center, r)| Piece::Ball { center, radius: *r })
                .collect(),
            Shape::Masked(_) => Vec::new(),
        }
    }

    /// Spacing below which the mask is guaranteed non-empty.
    pub fn resolution_threshold(&self) -> f64 {
        let n = self.dim as f64;
        match &self.shape {
            Shape::Interval { a, b } => (b - a) / 2.0,
            Shape::Cuboid { low, high } => {
                low.iter().zip(high).map(|(l, h)| (h - l) / 2.0).fold(f64::INFINITY, f64::min)
            }
            Shape::Ball { radius, .. } => radius / n.sqrt(),
            Shape::BallChain { radii } => {
                radii.iter().cloned().fold(0.0, f64::max) / n.sqrt()
            }
            Shape::Masked(g) => g.spacing(),
        }
    }
}

fn unit_ball_volume(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        0 => 1.0,
        1 => 2.0,
        n => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

#[derive(Clone, Debug)]
enum Piece {
    Cuboid { low: Vec<f64>, high: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Piece {
    /// Whether the closed cube of half-width `half` around `x` lies in the open piece.
    fn contains_cube(&self, x: &[f64], half: f64) -> bool {
        match self {
            Piece::Cuboid { low, high } => x
                .iter()
                .zip(low.iter().zip(high))
                .all(|(&xi, (&l, &h))| xi - half > l && xi + half < h),
            Piece::Ball { center, radius } => {
                let far: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(xi, ci)| {
                        let d = (xi - ci).abs() + half;
                        d * d
                    })
                    .sum();
                far < radius * radius
            }
        }
    }

    /// Lattice index range that can possibly host interior nodes.
    fn index_range(&self, h: f64) -> Vec<(i64, i64)> {
        let (lo, hi): (Vec<f64>, Vec<f64>) = match self {
            Piece::Cuboid { low, high } => (low.clone(), high.clone()),
            Piece::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        };
        lo.iter()
            .zip(&hi)
            .map(|(l, u)| ((l / h).floor() as i64, (u / h).ceil() as i64))
            .collect()
    }
}

/// Uniform lattice with an interior mask. Lattice coordinates are integer
/// multiples of the spacing, so grids of equal spacing are aligned.
///
/// The stored box covers the interior nodes plus one padding layer on each
/// side; padding nodes are never interior.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    spacing: f64,
    origin: [i64; MAX_DIM],
    shape: [usize; MAX_DIM],
    slot: Vec<u32>,
    nodes: Vec<u32>,
    cells: Vec<[u32; 8]>,
}

impl Grid {
    /// Build a grid from a set of interior lattice indices.
    pub fn from_lattice_nodes(dim: usize, spacing: f64, nodes: &[[i64; MAX_DIM]]) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidDomain(format!(
                "rasterization supports N in 1..=3, got {dim}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidDomain(format!("spacing must be positive, got {spacing}")));
        }
        if nodes.is_empty() {
            return Err(Error::EmptyMask {
                spacing,
                reason: "no interior nodes given".into(),
            });
        }
        let mut origin = [0i64; MAX_DIM];
        let mut shape = [1usize; MAX_DIM];
        for k in 0..dim {
            let lo = nodes.iter().map(|n| n[k]).min().unwrap();
            let hi = nodes.iter().map(|n| n[k]).max().unwrap();
            origin[k] = lo - 1;
            shape[k] = (hi - lo + 3) as usize;
        }
        let total: usize = shape.iter().product();
        if total >= NONE as usize {
            return Err(Error::InvalidDomain(format!(
                "lattice box of {total} nodes is too large"
            )));
        }
        let mut flags = vec![false; total];
        for n in nodes {
            if n[dim..].iter().any(|&v| v != 0) {
                return Err(Error::InvalidDomain("lattice index beyond grid dimension".into()));
            }
            let mut rel = [0usize; MAX_DIM];
            for k in 0..dim {
                rel[k] = (n[k] - origin[k]) as usize;
            }
            flags[linear(&shape, rel)] = true;
        }
        let mut slot = vec![NONE; total];
        let mut ids = Vec::new();
        for (b, f) in flags.iter().enumerate() {
            if *f {
                slot[b] = ids.len() as u32;
                ids.push(b as u32);
            }
        }
        let mut grid = Grid {
            dim,
            spacing,
            origin,
            shape,
            slot,
            nodes: ids,
            cells: Vec::new(),
        };
        grid.build_cells();
        Ok(grid)
    }

    /// A cell is the lattice cube with lower corner `base`; every cube touching
    /// an interior node is kept. Corners beyond the box or non-interior get NONE.
    fn build_cells(&mut self) {
        let total = self.slot.len();
        let mut is_base = vec![false; total];
        let corners = 1usize << self.dim;
        for &b in &self.nodes {
            let rel = self.unlinear(b as usize);
            for mask in 0..corners {
                let mut r = rel;
                let mut ok = true;
                for k in 0..self.dim {
                    if mask >> k & 1 == 1 {
                        if r[k] == 0 {
                            ok = false;
                        } else {
                            r[k] -= 1;
                        }
                    }
                }
                if ok {
                    is_base[linear(&self.shape, r)] = true;
                }
            }
        }
        let mut cells = Vec::new();
        for (b, f) in is_base.iter().enumerate() {
            if !*f {
                continue;
            }
            let rel = self.unlinear(b);
            let mut c = [NONE; 8];
            for (mask, slot) in c.iter_mut().enumerate().take(corners) {
                let mut r = rel;
                let mut inside = true;
                for k in 0..self.dim {
                    if mask >> k & 1 == 1 {
                        r[k] += 1;
                        if r[k] >= self.shape[k] {
                            inside = false;
                        }
                    }
                }
                if inside {
                    *slot = self.slot[linear(&self.shape, r)];
                }
            }
            cells.push(c);
        }
        self.cells = cells;
    }

    fn unlinear(&self, mut b: usize) -> [usize; MAX_DIM] {
        let mut r = [0usize; MAX_DIM];
        for k in (0..MAX_DIM).rev() {
            r[k] = b % self.shape[k];
            b /= self.shape[k];
        }
        r
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// h^N
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Lattice index of the first box node (padding included).
    pub fn origin(&self) -> [i64; MAX_DIM] {
        self.origin
    }

    /// Box extents per axis (padding included); unused axes have extent 1.
    pub fn shape(&self) -> [usize; MAX_DIM] {
        self.shape
    }

    /// Corner node ids of each cell; corner bit k set means +1 along axis k.
    pub fn cells(&self) -> &[[u32; 8]] {
        &self.cells
    }

    /// Lattice index of interior node `id`.
    pub fn lattice_index(&self, id: usize) -> [i64; MAX_DIM] {
        let rel = self.unlinear(self.nodes[id] as usize);
        let mut out = [0i64; MAX_DIM];
        for k in 0..self.dim {
            out[k] = self.origin[k] + rel[k] as i64;
        }
        out
    }

    pub fn coords(&self, id: usize) -> [f64; MAX_DIM] {
        let l = self.lattice_index(id);
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.dim {
            x[k] = l[k] as f64 * self.spacing;
        }
        x
    }

    /// Interior node id at a lattice index, if any.
    pub fn node_at(&self, lattice: [i64; MAX_DIM]) -> Option<usize> {
        let mut rel = [0usize; MAX_DIM];
        for k in 0..MAX_DIM {
            let r = lattice[k] - if k < self.dim { self.origin[k] } else { 0 };
            if r < 0 || r as usize >= self.shape[k] {
                return None;
            }
            rel[k] = r as usize;
        }
        match self.slot[linear(&self.shape, rel)] {
            NONE => None,
            s => Some(s as usize),
        }
    }

    /// Interior node ids of the lattice neighbours of `id` (face adjacency).
    pub fn neighbours(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        let base = self.lattice_index(id);
        (0..self.dim).flat_map(move |k| {
            [-1i64, 1].into_iter().filter_map(move |d| {
                let mut l = base;
                l[k] += d;
                self.node_at(l)
            })
        })
    }

    /// True if every interior node of `self` is an interior node of `other`.
    pub fn is_submask_of(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.spacing == other.spacing
            && (0..self.num_nodes()).all(|i| other.node_at(self.lattice_index(i)).is_some())
    }

    /// Graph distance (in lattice steps, face adjacency) from each interior
    /// node to the nearest non-interior node.
    pub fn boundary_distance(&self) -> Vec<u32> {
        let n = self.num_nodes();
        let mut dist = vec![u32::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        for (i, d) in dist.iter_mut().enumerate() {
            let interior_nbrs = self.neighbours(i).count();
            if interior_nbrs < 2 * self.dim {
                *d = 1;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            let di = dist[i];
            let nb: Vec<usize> = self.neighbours(i).collect();
            for j in nb {
                if dist[j] > di + 1 {
                    dist[j] = di + 1;
                    queue.push_back(j);
                }
            }
        }
        dist
    }

    /// Face-connected components; returns a label per node and the count.
    /// Labels follow the order of first appearance in row-major order.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let n = self.num_nodes();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let nb: Vec<usize> = self.neighbours(i).collect();
                for j in nb {
                    if label[j] == usize::MAX {
                        label[j] = count;
                        stack.push(j);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// Mask as a PGM (P2, 8-bit) image for N=2; interior nodes are white.
    /// Rows run along the second axis, top row = largest coordinate.
    pub fn mask_pgm(&self) -> Result<String> {
        if self.dim != 2 {
            return Err(Error::NotApplicable("PGM export needs N=2".into()));
        }
        let (nx, ny) = (self.shape[0], self.shape[1]);
        let mut s = format!("P2\n{nx} {ny}\n255\n");
        for j in (0..ny).rev() {
            let row: Vec<&str> = (0..nx)
                .map(|i| {
                    if self.slot[linear(&self.shape, [i, j, 0])] != NONE {
                        "255"
                    } else {
                        "0"
                    }
                })
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        Ok(s)
    }

    pub(crate) fn box_slot(&self, rel: [usize; MAX_DIM]) -> u32 {
        self.slot[linear(&self.shape, rel)]
    }
}

fn linear(shape: &[usize; MAX_DIM], rel: [usize; MAX_DIM]) -> usize {
    (rel[0] * shape[1] + rel[1]) * shape[2] + rel[2]
}

/// Conservative rasterization of a domain at spacing `h`.
pub fn discretize(domain: &Domain, h: f64) -> Result<Grid> {
    discretize_cut(domain, h, None)
}

/// Rasterize Ω ∩ B_R(0) when `cut` is given, else Ω.
pub fn discretize_cut(domain: &Domain, h: f64, cut: Option<f64>) -> Result<Grid> {
    let dim = domain.dim();
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(Error::InvalidDomain(format!(
            "rasterization supports N in 1..=3, got {dim}"
        )));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidDomain(format!("spacing must be positive, got {h}")));
    }
    if let Some(r) = cut {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidDomain(format!("cut radius must be positive, got {r}")));
        }
    }
    let cut_piece = cut.map(|r| Piece::Ball {
        center: vec![0.0; dim],
        radius: r,
    });
    let half = h / 2.0;
    let mut found: BTreeSet<[i64; MAX_DIM]> = BTreeSet::new();

    if let Shape::Masked(g) = &domain.shape {
        if g.spacing() != h {
            return Err(Error::GridMismatch(format!(
                "masked domain has spacing {}, requested {h}",
                g.spacing()
            )));
        }
        for i in 0..g.num_nodes() {
            let l = g.lattice_index(i);
            let x = lattice_coords(&l, dim, h);
            if cut_piece.as_ref().is_none_or(|c| c.contains_cube(&x, half)) {
                found.insert(l);
            }
        }
    } else {
        for piece in domain.pieces() {
            let range = piece.index_range(h);
            let mut idx = [0i64; MAX_DIM];
            scan(&range, 0, &mut idx, &mut |l| {
                let x = lattice_coords(l, dim, h);
                if piece.contains_cube(&x, half)
                    && cut_piece.as_ref().is_none_or(|c| c.contains_cube(&x, half))
                {
                    found.insert(*l);
                }
            });
        }
    }

    if found.is_empty() {
        let reason = match cut {
            Some(r) => format!(
                "no node cell fits inside the domain intersected with B_{r}; refine h or enlarge the cut radius"
            ),
            None => format!(
                "no node cell fits inside the {} domain; h must be below {:.6}",
                domain.kind(),
                domain.resolution_threshold()
            ),
        };
        return Err(Error::EmptyMask { spacing: h, reason });
    }
    let nodes: Vec<[i64; MAX_DIM]> = found.into_iter().collect();
    Grid::from_lattice_nodes(dim, h, &nodes)
}

fn lattice_coords(l: &[i64; MAX_DIM], dim: usize, h: f64) -> Vec<f64> {
    l[..dim].iter().map(|&i| i as f64 * h).collect()
}

fn scan(range: &[(i64, i64)], k: usize, idx: &mut [i64; MAX_DIM], f: &mut dyn FnMut(&[i64; MAX_DIM])) {
    if k == range.len() {
        f(idx);
        return;
    }
    for i in range[k].0..=range[k].1 {
        idx[k] = i;
        scan(range, k + 1, idx, f);
    }
    idx[k] = 0;
}

/// Radii r_i = i^{-1/(2s+N)}, i = 1..count.
pub fn chain_radii(s: f64, count: usize, dim: usize) -> Result<Vec<f64>> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidExponent(format!("s must lie in (0,1), got {s}")));
    }
    if count == 0 {
        return Err(Error::InvalidDomain("count must be at least 1".into()));
    }
    let e = -1.0 / (2.0 * s + dim as f64);
    Ok((1..=count).map(|i| (i as f64).powf(e)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summability {
    /// Power applied to each radius.
    pub exponent: f64,
    pub partial_sum: f64,
    /// Fitted slope of log(term) against log(i) over the tail half.
    pub tail_slope: f64,
    pub verdict: Verdict,
}

/// Margin around the critical slope -1 for the tail fit.
pub const SLOPE_MARGIN: f64 = 0.1;

/// Summability of Σ r_i^{2q/(2-q)+N}, which decides whether the p=2 torsion
/// function of the chain lies in L^{q/(2-q)}.
pub fn chain_summability(radii: &[f64], q: f64, dim: usize) -> Result<Summability> {
    if !(1.0..2.0).contains(&q) {
        return Err(Error::InvalidExponent(format!("q must lie in [1,2), got {q}")));
    }
    let t = q / (2.0 - q);
    chain_integrability(radii, t, dim)
}

/// Summability of Σ r_i^{2t+N}: the p=2 chain torsion lies in L^t iff it converges.
pub fn chain_integrability(radii: &[f64], t: f64, dim: usize) -> Result<Summability> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidExponent(format!("integrability exponent must be positive, got {t}")));
    }
    if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::InvalidDomain(format!("radii must be positive, got {r}")));
    }
    let exponent = 2.0 * t + dim as f64;
    let terms: Vec<f64> = radii.iter().map(|r| r.powf(exponent)).collect();
    let partial_sum = terms.iter().sum();
    let tail_slope = tail_slope(&terms);
    let verdict = if !tail_slope.is_finite() {
        Verdict::Inconclusive
    } else if tail_slope < -1.0 - SLOPE_MARGIN {
        Verdict::Converges
    } else if tail_slope > -1.0 + SLOPE_MARGIN {
        Verdict::Diverges
    } else {
        Verdict::Inconclusive
    };
    Ok(Summability {
        exponent,
        partial_sum,
        tail_slope,
        verdict,
    })
}

/// Least-squares slope of ln(term_i) vs ln(i) over the last half of the terms.
fn tail_slope(terms: &[f64]) -> f64 {
    let n = terms.len();
    if n < 4 {
        return f64::NAN;
    }
    let start = n / 2;
    let pts: Vec<(f64, f64)> = (start..n)
        .map(|k| (((k + 1) as f64).ln(), terms[k].ln()))
        .collect();
    if pts.iter().any(|(_, y)| !y.is_finite()) {
        // underflowed terms: faster than any power
        return f64::NEG_INFINITY;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
