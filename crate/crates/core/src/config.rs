//! Run configuration: flat `key = value` lines grouped under `[section]`
//! headers. Grammar:
//!
//! ```text
//! file    := { blank | comment | header | entry }
//! comment := '#' text
//! header  := '[' name ']'          ; [domain] may repeat, others appear once
//! entry   := key '=' value
//! value   := item { ',' item }     ; lists are comma separated
//! item    := number | number '/' number | word
//! ```
//!
//! See the README for the keys accepted in each section.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{check_p, ExponentSet, ScalarField};
use crate::geometry::{chain_radii, Domain};
use crate::spectral::PoincareOptions;
use crate::torsion::SolverOptions;

/// How a chain's radii were specified; kept for closed-form verdicts.
#[derive(Clone, Debug, PartialEq)]
pub enum RadiusLaw {
    Listed,
    /// r_i = 2^{-i}, i = 1..count
    Dyadic,
    /// r_i = i^{-1/(2s+N)}
    Power { s: f64 },
    Constant { radius: f64 },
}

#[derive(Clone, Debug)]
pub struct DomainSpec {
    pub id: String,
    pub domain: Domain,
    pub radius_law: Option<RadiusLaw>,
    /// Increasing cut radii for exhaustion runs.
    pub cuts: Vec<f64>,
    pub line: usize,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub sobolev_const: Option<f64>,
    pub seed: u64,
    pub fields: usize,
    pub tolerance: f64,
    /// Multiply the solved torsion by `1 + corrupt_w` before the checks.
    pub corrupt_w: Option<f64>,
    pub sharpness_n: Vec<u32>,
    pub extremal_delta: Vec<f64>,
    pub young_samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            sobolev_const: None,
            seed: 0,
            fields: 100,
            tolerance: 0.02,
            corrupt_w: None,
            sharpness_n: vec![2, 4, 8],
            extremal_delta: vec![0.81, 1.0],
            young_samples: 100_000,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ChainOptions {
    /// Integrability exponents t tested for w ∈ L^t.
    pub moments: Vec<f64>,
    /// Numbers of leading balls solved numerically.
    pub truncations: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub domains: Vec<DomainSpec>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub delta: Vec<f64>,
    pub beta: Vec<f64>,
    pub spacings: Vec<f64>,
    pub solver: SolverOptions,
    pub poincare: PoincareOptions,
    pub verify: VerifyOptions,
    pub chain: ChainOptions,
    pub output: Option<PathBuf>,
    source: String,
    overrides: Vec<String>,
}

struct Entry {
    value: String,
    line: usize,
}

type Section = BTreeMap<String, Entry>;

fn parse_number(s: &str, line: usize, key: &str) -> Result<f64> {
    let s = s.trim();
    let v = if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| Error::config(line, format!("{key}: cannot parse '{s}'")))?;
        let b: f64 = b.trim().parse().map_err(|_| Error::config(line, format!("{key}: cannot parse '{s}'")))?;
        a / b
    } else {
        s.parse().map_err(|_| Error::config(line, format!("{key}: cannot parse '{s}'")))?
    };
    if !v.is_finite() {
        return Err(Error::config(line, format!("{key}: value must be finite, got '{s}'")));
    }
    Ok(v)
}

/// A number in config syntax (`0.25` or `1/4`), for command-line overrides.
pub fn parse_value(s: &str) -> Result<f64> {
    parse_number(s, 0, "value")
}

fn parse_list(e: &Entry, key: &str) -> Result<Vec<f64>> {
    e.value.split(',').map(|t| parse_number(t, e.line, key)).collect()
}

fn parse_integer<T: std::str::FromStr>(e: &Entry, key: &str) -> Result<T> {
    e.value
        .trim()
        .parse()
        .map_err(|_| Error::config(e.line, format!("{key}: expected a nonnegative integer, got '{}'", e.value)))
}

fn parse_integer_list<T: std::str::FromStr>(e: &Entry, key: &str) -> Result<Vec<T>> {
    e.value
        .split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::config(e.line, format!("{key}: expected integers, got '{}'", e.value)))
        })
        .collect()
}

fn scalar(e: &Entry, key: &str) -> Result<f64> {
    let v = parse_list(e, key)?;
    if v.len() != 1 {
        return Err(Error::config(e.line, format!("{key} takes a single value")));
    }
    Ok(v[0])
}

/// Removes `key` from the section, failing with the section's header line if absent.
fn take(sec: &mut Section, key: &str, header: usize, name: &str) -> Result<Entry> {
    sec.remove(key)
        .ok_or_else(|| Error::config(header, format!("[{name}] requires '{key}'")))
}

fn reject_leftovers(sec: &Section, name: &str) -> Result<()> {
    if let Some((k, e)) = sec.iter().next() {
        return Err(Error::config(e.line, format!("unknown key '{k}' in [{name}]")));
    }
    Ok(())
}

/// Rewraps validation errors from the library as config errors at `line`.
fn at(line: usize, r: Result<Domain>) -> Result<Domain> {
    r.map_err(|e| match e {
        Error::InvalidDomain(m) | Error::InvalidExponent(m) => Error::config(line, m),
        other => other,
    })
}

fn parse_domain(mut sec: Section, header: usize, index: usize, base: &Path) -> Result<DomainSpec> {
    let id = sec
        .remove("id")
        .map(|e| e.value.trim().to_string())
        .unwrap_or_else(|| format!("domain{index}"));
    if id.is_empty() || id.contains(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-')) {
        return Err(Error::config(header, format!("domain id must be alphanumeric, '_' or '-', got '{id}'")));
    }
    let kind = take(&mut sec, "kind", header, "domain")?;
    let mut law = None;
    let domain = match kind.value.trim() {
        "interval" => {
            let lo = scalar(&take(&mut sec, "low", header, "domain")?, "low")?;
            let hi = scalar(&take(&mut sec, "high", header, "domain")?, "high")?;
            at(header, Domain::interval(lo, hi))?
        }
        "box" => {
            let lo = parse_list(&take(&mut sec, "low", header, "domain")?, "low")?;
            let hi = parse_list(&take(&mut sec, "high", header, "domain")?, "high")?;
            at(header, Domain::cuboid(lo, hi))?
        }
        "ball" => {
            let c = parse_list(&take(&mut sec, "center", header, "domain")?, "center")?;
            let r = scalar(&take(&mut sec, "radius", header, "domain")?, "radius")?;
            at(header, Domain::ball(c, r))?
        }
        "ball_chain" => {
            let dim_e = take(&mut sec, "dim", header, "domain")?;
            let dim: usize = parse_integer(&dim_e, "dim")?;
            let (radii, l) = if let Some(e) = sec.remove("radii") {
                (parse_list(&e, "radii")?, RadiusLaw::Listed)
            } else {
                let law_e = take(&mut sec, "radii_law", header, "domain")?;
                let count: usize = parse_integer(&take(&mut sec, "count", header, "domain")?, "count")?;
                if count == 0 {
                    return Err(Error::config(law_e.line, "count must be at least 1"));
                }
                match law_e.value.trim() {
                    "dyadic" => ((1..=count).map(|i| 0.5f64.powi(i as i32)).collect(), RadiusLaw::Dyadic),
                    "constant" => {
                        let r = scalar(&take(&mut sec, "radius", header, "domain")?, "radius")?;
                        (vec![r; count], RadiusLaw::Constant { radius: r })
                    }
                    "power" => {
                        let se = take(&mut sec, "s", header, "domain")?;
                        let s = scalar(&se, "s")?;
                        let radii = chain_radii(s, count, dim).map_err(|e| Error::config(se.line, e.to_string()))?;
                        (radii, RadiusLaw::Power { s })
                    }
                    other => {
                        return Err(Error::config(
                            law_e.line,
                            format!("radii_law must be dyadic, constant or power, got '{other}'"),
                        ))
                    }
                }
            };
            law = Some(l);
            at(dim_e.line, Domain::ball_chain(radii, dim))?
        }
        "masked_grid" => {
            let e = take(&mut sec, "mask", header, "domain")?;
            let path = base.join(e.value.trim());
            let text = std::fs::read_to_string(&path)
                .map_err(|err| Error::config(e.line, format!("cannot read mask {}: {err}", path.display())))?;
            let field = ScalarField::from_csv(&text).map_err(|err| Error::config(e.line, err.to_string()))?;
            Domain::masked(Arc::clone(field.grid()))
        }
        other => {
            return Err(Error::config(
                kind.line,
                format!("kind must be interval, box, ball, ball_chain or masked_grid, got '{other}'"),
            ))
        }
    };
    let cuts = match sec.remove("cuts") {
        Some(e) => {
            let c = parse_list(&e, "cuts")?;
            if c.iter().any(|&r| r <= 0.0) || c.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config(e.line, "cuts must be positive and increasing"));
            }
            c
        }
        None => Vec::new(),
    };
    reject_leftovers(&sec, "domain")?;
    Ok(DomainSpec {
        id,
        domain,
        radius_law: law,
        cuts,
        line: header,
    })
}

fn positive(v: f64, e: &Entry, key: &str) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(e.line, format!("{key} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut domains: Vec<(usize, Section)> = Vec::new();
        let mut sections: BTreeMap<String, (usize, Section)> = BTreeMap::new();
        // (name, index into domains when the section is a domain)
        let mut current: Option<(String, Option<usize>)> = None;

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            if let Some(rest) = l.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(line, "section header must end with ']'"))?
                    .trim()
                    .to_string();
                match name.as_str() {
                    "domain" => {
                        domains.push((line, Section::new()));
                        current = Some((name, Some(domains.len() - 1)));
                    }
                    "exponents" | "mesh" | "solver" | "verify" | "chain" | "output" => {
                        if sections.contains_key(&name) {
                            return Err(Error::config(line, format!("section [{name}] appears twice")));
                        }
                        sections.insert(name.clone(), (line, Section::new()));
                        current = Some((name, None));
                    }
                    _ => return Err(Error::config(line, format!("unknown section [{name}]"))),
                }
                continue;
            }
            let (key, value) = l
                .split_once('=')
                .ok_or_else(|| Error::config(line, "expected 'key = value'"))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(Error::config(line, "expected 'key = value'"));
            }
            let sec = match &current {
                None => return Err(Error::config(line, "entry before any section header")),
                Some((_, Some(d))) => &mut domains[*d].1,
                Some((name, None)) => &mut sections.get_mut(name).expect("section registered").1,
            };
            if sec.contains_key(&key) {
                return Err(Error::config(line, format!("duplicate key '{key}'")));
            }
            sec.insert(key, Entry { value, line });
        }

        if domains.is_empty() {
            return Err(Error::config(0, "at least one [domain] section is required"));
        }
        let domains = domains
            .into_iter()
            .enumerate()
            .map(|(k, (h, s))| parse_domain(s, h, k, base))
            .collect::<Result<Vec<_>>>()?;
        let mut ids: Vec<&str> = domains.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config(0, format!("domain id '{}' is used twice", w[0])));
        }

        let mut section = |name: &str| sections.remove(name).unwrap_or((0, Section::new()));

        let (eh, mut ex) = section("exponents");
        let pe = take(&mut ex, "p", eh, "exponents")?;
        let p = parse_list(&pe, "p")?;
        for &v in &p {
            check_p(v).map_err(|e| Error::config(pe.line, e.to_string()))?;
        }
        let list_or = |ex: &mut Section, key: &str, default: Vec<f64>| -> Result<(Vec<f64>, usize)> {
            match ex.remove(key) {
                Some(e) => Ok((parse_list(&e, key)?, e.line)),
                None => Ok((default, pe.line)),
            }
        };
        let (q, ql) = list_or(&mut ex, "q", Vec::new())?;
        let (delta, dl) = list_or(&mut ex, "delta", vec![0.5, 1.0, 2.0])?;
        let (beta, bl) = list_or(&mut ex, "beta", Vec::new())?;
        reject_leftovers(&ex, "exponents")?;
        for &pv in &p {
            for &qv in q.iter().chain(std::iter::once(&pv)) {
                ExponentSet::new(pv, qv, 1.0, 1.0).map_err(|e| Error::config(ql, e.to_string()))?;
            }
            for &d in &delta {
                ExponentSet::new(pv, pv, d, 1.0).map_err(|e| Error::config(dl, e.to_string()))?;
            }
            for &b in &beta {
                if !(b > 0.0) {
                    return Err(Error::config(bl, format!("beta must be positive, got {b}")));
                }
            }
        }

        let (mh, mut mesh) = section("mesh");
        let he = take(&mut mesh, "h", mh, "mesh")?;
        let spacings = parse_list(&he, "h")?;
        for &h in &spacings {
            positive(h, &he, "h")?;
        }
        reject_leftovers(&mesh, "mesh")?;

        let (_, mut sv) = section("solver");
        let mut solver = SolverOptions::default();
        let mut poincare = PoincareOptions::default();
        if let Some(e) = sv.remove("tol") {
            solver.tol = positive(scalar(&e, "tol")?, &e, "tol")?;
        }
        if let Some(e) = sv.remove("max_iter") {
            solver.max_iter = parse_integer(&e, "max_iter")?;
        }
        if let Some(e) = sv.remove("growth") {
            let g = scalar(&e, "growth")?;
            if !(g > 1.0) {
                return Err(Error::config(e.line, format!("growth must exceed 1, got {g}")));
            }
            solver.growth = g;
        }
        if let Some(e) = sv.remove("eigen_rel_tol") {
            poincare.rel_tol = positive(scalar(&e, "eigen_rel_tol")?, &e, "eigen_rel_tol")?;
        }
        if let Some(e) = sv.remove("eigen_max_iter") {
            poincare.max_iter = parse_integer(&e, "eigen_max_iter")?;
        }
        if let Some(e) = sv.remove("eigen_window") {
            poincare.window = parse_integer(&e, "eigen_window")?;
        }
        reject_leftovers(&sv, "solver")?;
        poincare.torsion = solver;

        let (_, mut vs) = section("verify");
        let mut verify = VerifyOptions::default();
        if let Some(e) = vs.remove("sobolev_const") {
            verify.sobolev_const = Some(positive(scalar(&e, "sobolev_const")?, &e, "sobolev_const")?);
        }
        if let Some(e) = vs.remove("seed") {
            verify.seed = parse_integer(&e, "seed")?;
        }
        if let Some(e) = vs.remove("fields") {
            verify.fields = parse_integer(&e, "fields")?;
        }
        if let Some(e) = vs.remove("tolerance") {
            verify.tolerance = positive(scalar(&e, "tolerance")?, &e, "tolerance")?;
        }
        if let Some(e) = vs.remove("corrupt_w") {
            let c = scalar(&e, "corrupt_w")?;
            if c <= -1.0 {
                return Err(Error::config(e.line, format!("corrupt_w must exceed -1, got {c}")));
            }
            verify.corrupt_w = Some(c);
        }
        if let Some(e) = vs.remove("sharpness_n") {
            verify.sharpness_n = parse_integer_list(&e, "sharpness_n")?;
            if verify.sharpness_n.contains(&0) {
                return Err(Error::config(e.line, "sharpness_n entries must be at least 1"));
            }
        }
        if let Some(e) = vs.remove("extremal_delta") {
            verify.extremal_delta = parse_list(&e, "extremal_delta")?;
            for &d in &verify.extremal_delta {
                positive(d, &e, "extremal_delta")?;
            }
        }
        if let Some(e) = vs.remove("young_samples") {
            verify.young_samples = parse_integer(&e, "young_samples")?;
        }
        reject_leftovers(&vs, "verify")?;

        let (_, mut cs) = section("chain");
        let mut chain = ChainOptions::default();
        if let Some(e) = cs.remove("moments") {
            chain.moments = parse_list(&e, "moments")?;
            for &t in &chain.moments {
                positive(t, &e, "moments")?;
            }
        }
        if let Some(e) = cs.remove("truncations") {
            chain.truncations = parse_integer_list(&e, "truncations")?;
            if chain.truncations.contains(&0) {
                return Err(Error::config(e.line, "truncations must be at least 1"));
            }
        }
        reject_leftovers(&cs, "chain")?;

        let (_, mut os) = section("output");
        let output = os.remove("dir").map(|e| base.join(e.value.trim()));
        reject_leftovers(&os, "output")?;

        Ok(RunConfig {
            domains,
            p,
            q,
            delta,
            beta,
            spacings,
            solver,
            poincare,
            verify,
            chain,
            output,
            source: text.to_string(),
            overrides: Vec::new(),
        })
    }

    /// Replaces the spacing list with a single spacing.
    pub fn override_spacing(&mut self, h: f64) -> Result<()> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::config(0, format!("h must be positive, got {h}")));
        }
        self.spacings = vec![h];
        self.overrides.push(format!("h={h}"));
        Ok(())
    }

    /// SHA-256 of the config text and any command-line overrides, hex encoded.
    pub fn hash(&self) -> String {
        let mut d = Sha256::new();
        d.update(self.source.as_bytes());
        for o in &self.overrides {
            d.update(b"\n#override ");
            d.update(o.as_bytes());
        }
        hex::encode(d.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "
# ball and square
[domain]
id = disk
kind = ball
center = 0, 0
radius = 1

[domain]
kind = box
low = 0, 0
high = 1, 1

[exponents]
p = 2, 3
q = 1, 1.5
delta = 0.5, 1, 2

[mesh]
h = 1/32, 0.015625

[verify]
sobolev_const = 0.18255
seed = 11
";

    fn parse(s: &str) -> Result<RunConfig> {
        RunConfig::parse(s, Path::new("."))
    }

    fn message(s: &str) -> String {
        match parse(s) {
            Err(Error::Config { message, .. }) => message,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_basic_config() {
        let c = parse(BASIC).unwrap();
        assert_eq!(c.domains.len(), 2);
        assert_eq!(c.domains[0].id, "disk");
        assert_eq!(c.domains[1].id, "domain1");
        assert_eq!(c.domains[1].domain.kind(), "box");
        assert_eq!(c.p, vec![2.0, 3.0]);
        assert_eq!(c.spacings, vec![1.0 / 32.0, 1.0 / 64.0]);
        assert_eq!(c.verify.sobolev_const, Some(0.18255));
        assert_eq!(c.verify.seed, 11);
        assert_eq!(c.verify.fields, 100);
    }

    #[test]
    fn p_at_most_one_is_rejected_by_name() {
        let s = BASIC.replace("p = 2, 3", "p = 1");
        assert!(message(&s).contains("p must exceed 1"));
    }

    #[test]
    fn exponent_constraints_are_named() {
        assert!(message(&BASIC.replace("q = 1, 1.5", "q = 0.5")).contains("q must lie in [1, p]"));
        assert!(message(&BASIC.replace("delta = 0.5, 1, 2", "delta = -1")).contains("delta must be positive"));
    }

    #[test]
    fn structural_errors_carry_line_numbers() {
        match parse(&BASIC.replace("radius = 1", "radius = 1\ncolour = red")) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 8);
                assert!(message.contains("unknown key 'colour'"));
            }
            other => panic!("{other:?}"),
        }
        assert!(message(&BASIC.replace("[mesh]", "[mesh]\n[mesh]")).contains("twice"));
        assert!(message("[domain]\nkind = ball\n").contains("requires 'center'"));
        assert!(message(&BASIC.replace("h = 1/32, 0.015625", "h = 1/0")).contains("finite"));
    }

    #[test]
    fn chain_laws() {
        let s = "[domain]\nkind = ball_chain\ndim = 2\nradii_law = dyadic\ncount = 5\ncuts = 0.75, 1, 1.25\n\
                 [exponents]\np = 2\n[mesh]\nh = 1/64\n";
        let c = parse(s).unwrap();
        assert_eq!(c.domains[0].domain.chain_radii().unwrap(), &[0.5, 0.25, 0.125, 0.0625, 0.03125]);
        assert_eq!(c.domains[0].cuts, vec![0.75, 1.0, 1.25]);
        let c = parse(&s.replace("dyadic", "power\ns = 0.5")).unwrap();
        assert_eq!(c.domains[0].radius_law, Some(RadiusLaw::Power { s: 0.5 }));
        assert!(message(&s.replace("1, 1.25", "0.5, 1.25")).contains("increasing"));
    }

    #[test]
    fn hash_tracks_text_and_overrides() {
        let a = parse(BASIC).unwrap();
        let b = parse(BASIC).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut c = parse(BASIC).unwrap();
        c.override_spacing(0.1).unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(c.spacings, vec![0.1]);
        assert_ne!(a.hash(), parse(&BASIC.replace("seed = 11", "seed = 12")).unwrap().hash());
    }
}
