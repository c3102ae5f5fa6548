//! Uniform convexity of `|z|^p` and Young's inequality with a remainder,
//! plus sampled estimates of their unspecified constants.

use serde::Serialize;

use super::InequalityReport;
use crate::error::{Error, Result};
use crate::fields::{check_p, conjugate};

/// Absolute slack allowed in both checks.
pub const CHECK_SLACK: f64 = 1e-12;

const BASES: [u64; 4] = [2, 3, 5, 7];
const BOX: f64 = 2.0;

/// Radical inverse of `index` in `base`.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// The `i`-th pair of planar vectors from a 4-D Halton sequence on `[-2, 2]^4`.
pub fn sample_pair(i: u64) -> ([f64; 2], [f64; 2]) {
    let x: Vec<f64> = BASES.iter().map(|&b| BOX * (2.0 * halton(i + 1, b) - 1.0)).collect();
    ([x[0], x[1]], [x[2], x[3]])
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn same_length(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::GridMismatch("vectors must share a nonzero length".into()));
    }
    Ok(())
}

/// Young's gap `|z|^p/p + |ξ|^{p'}/p' - ⟨ξ,z⟩` and the remainder factor
/// `(2/p)(|z|² + |ξ|^{2/(p-1)})^{(p-2)/2} |z - |ξ|^{p'-2}ξ|²`.
fn young_parts(z: &[f64], xi: &[f64], p: f64) -> Result<(f64, f64, f64)> {
    let pc = conjugate(p);
    let (nz, nx) = (norm_sq(z).sqrt(), norm_sq(xi).sqrt());
    if p < 2.0 && nz == 0.0 && nx == 0.0 {
        return Err(Error::DegeneratePair);
    }
    let lhs = dot(xi, z);
    let base = nz.powf(p) / p + nx.powf(pc) / pc;
    let scale = if nx > 0.0 { nx.powf(pc - 2.0) } else { 0.0 };
    let diff: f64 = z.iter().zip(xi).map(|(a, b)| (a - scale * b).powi(2)).sum();
    let weight = (nz * nz + nx.powf(2.0 / (p - 1.0))).powf((p - 2.0) / 2.0);
    let factor = if diff == 0.0 { 0.0 } else { 2.0 / p * weight * diff };
    Ok((lhs, base, factor))
}

/// `⟨ξ,z⟩ ≤ |z|^p/p + |ξ|^{p'}/p' - (2/p) C (|z|² + |ξ|^{2/(p-1)})^{(p-2)/2} |z - |ξ|^{p'-2}ξ|²`
pub fn young_check(z: &[f64], xi: &[f64], p: f64, c: f64) -> Result<InequalityReport> {
    check_p(p)?;
    same_length(z, xi)?;
    let (lhs, base, factor) = young_parts(z, xi, p)?;
    Ok(InequalityReport::absolute("young", lhs, base - c * factor, CHECK_SLACK).with_p(p))
}

/// Midpoint gap `½|z|^p + ½|v|^p - |(z+v)/2|^p` and the factor `(|z|²+|v|²)^{(p-2)/2}|z-v|²`.
fn convexity_parts(z: &[f64], v: &[f64], p: f64) -> Result<(f64, f64, f64)> {
    let (z2, v2) = (norm_sq(z), norm_sq(v));
    if p < 2.0 && z2 == 0.0 && v2 == 0.0 {
        return Err(Error::DegeneratePair);
    }
    let mid: Vec<f64> = z.iter().zip(v).map(|(a, b)| 0.5 * (a + b)).collect();
    let lhs = norm_sq(&mid).powf(p / 2.0);
    let base = 0.5 * z2.powf(p / 2.0) + 0.5 * v2.powf(p / 2.0);
    let diff: f64 = z.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
    let factor = if diff == 0.0 { 0.0 } else { (z2 + v2).powf((p - 2.0) / 2.0) * diff };
    Ok((lhs, base, factor))
}

/// `|(z+v)/2|^p + C (|z|²+|v|²)^{(p-2)/2} |z-v|² ≤ ½|z|^p + ½|v|^p`
pub fn convexity_check(z: &[f64], v: &[f64], p: f64, c: f64) -> Result<InequalityReport> {
    check_p(p)?;
    same_length(z, v)?;
    let (lhs, base, factor) = convexity_parts(z, v, p)?;
    Ok(InequalityReport::absolute("convexity", lhs + c * factor, base, CHECK_SLACK).with_p(p))
}

/// Smallest `gap / factor` over the first `count` sample pairs, skipping pairs
/// whose factor is negligible against the size of the terms.
fn sampled_infimum(count: usize, parts: impl Fn(&[f64], &[f64]) -> Result<(f64, f64, f64)>) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..count as u64 {
        let (z, x) = sample_pair(i);
        let Ok((lhs, base, factor)) = parts(&z, &x) else {
            continue;
        };
        if factor <= 1e-13 * base {
            continue;
        }
        best = best.min((base - lhs) / factor);
    }
    best
}

/// Largest C for which [`young_check`] holds on the first `count` sample pairs.
pub fn estimate_young_constant(p: f64, count: usize) -> Result<f64> {
    check_p(p)?;
    Ok(sampled_infimum(count, |z, x| young_parts(z, x, p)))
}

/// Largest C for which [`convexity_check`] holds on the first `count` sample pairs.
pub fn estimate_convexity_constant(p: f64, count: usize) -> Result<f64> {
    check_p(p)?;
    Ok(sampled_infimum(count, |z, v| convexity_parts(z, v, p)))
}

/// Both checks over the first `count` sample pairs, each at `safety` times
/// its own estimated constant.
#[derive(Clone, Debug, Serialize)]
pub struct SampledCheck {
    pub p: f64,
    pub samples: usize,
    pub young_constant: f64,
    pub convexity_constant: f64,
    /// Largest `lhs - rhs` seen; the check passes while this stays below the slack.
    pub young_worst_excess: f64,
    pub convexity_worst_excess: f64,
    pub young_failures: usize,
    pub convexity_failures: usize,
    pub degenerate: usize,
}

pub fn sampled_check(p: f64, count: usize, safety: f64) -> Result<SampledCheck> {
    let cy = safety * estimate_young_constant(p, count)?;
    let cc = safety * estimate_convexity_constant(p, count)?;
    let mut out = SampledCheck {
        p,
        samples: count,
        young_constant: cy,
        convexity_constant: cc,
        young_worst_excess: f64::NEG_INFINITY,
        convexity_worst_excess: f64::NEG_INFINITY,
        young_failures: 0,
        convexity_failures: 0,
        degenerate: 0,
    };
    for i in 0..count as u64 {
        let (z, x) = sample_pair(i);
        let (y, c) = match (young_check(&z, &x, p, cy), convexity_check(&z, &x, p, cc)) {
            (Ok(y), Ok(c)) => (y, c),
            (Err(Error::DegeneratePair), _) | (_, Err(Error::DegeneratePair)) => {
                out.degenerate += 1;
                continue;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        out.young_worst_excess = out.young_worst_excess.max(y.lhs - y.rhs);
        out.convexity_worst_excess = out.convexity_worst_excess.max(c.lhs - c.rhs);
        out.young_failures += y.failed() as usize;
        out.convexity_failures += c.failed() as usize;
    }
    Ok(out)
}

/// Largest `|lhs - rhs|` of both identities at p = 2 (C = 1/2 and 1/4).
pub fn p2_identity_defect(count: usize) -> f64 {
    (0..count as u64)
        .map(|i| {
            let (z, x) = sample_pair(i);
            let y = young_check(&z, &x, 2.0, 0.5).expect("p = 2 never degenerates");
            let c = convexity_check(&z, &x, 2.0, 0.25).expect("p = 2 never degenerates");
            (y.lhs - y.rhs).abs().max((c.lhs - c.rhs).abs())
        })
        .fold(0.0, f64::max)
}
