//! Both sides of the torsional Hardy inequalities, the eigenvalue sandwiches,
//! and the elementary vector inequalities behind them.

use std::fmt::Write as _;

use serde::Serialize;

pub mod convexity;
pub mod hardy;
pub mod sandwich;

pub use convexity::{
    convexity_check, estimate_convexity_constant, estimate_young_constant, halton, p2_identity_defect, sample_pair,
    sampled_check, young_check, SampledCheck,
};
pub use hardy::{
    extremal_field, hardy_delta, hardy_optimized, hardy_remainder, hardy_simple, hardy_suboptimal,
    random_test_fields, sharpness_sequence, HardyMoments, HardyWeights, TestFieldSpec,
};
pub use sandwich::{
    main_sandwich_from, main_upper_bound, pp_sandwich_from, pp_upper_bound, theorem_main_sandwich,
    theorem_pp_sandwich, Sandwich,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Unchecked,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    /// lhs ≤ rhs·(1 + tol)
    Relative,
    /// lhs ≤ rhs + tol
    Absolute,
    /// |lhs - rhs| ≤ tol·|rhs|
    Equality,
}

/// Outcome of evaluating one inequality `lhs ≤ rhs`.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
    pub tol: f64,
    pub tolerance: Tolerance,
    pub status: Status,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub delta: Option<f64>,
    pub domain: Option<String>,
    pub note: Option<String>,
}

impl InequalityReport {
    pub fn relative(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let pass = lhs <= rhs * (1.0 + tol);
        Self::build(name.into(), lhs, rhs, tol, Tolerance::Relative, pass)
    }

    pub fn absolute(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let pass = lhs <= rhs + tol;
        Self::build(name.into(), lhs, rhs, tol, Tolerance::Absolute, pass)
    }

    pub fn equality(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let pass = (lhs - rhs).abs() <= tol * rhs.abs();
        Self::build(name.into(), lhs, rhs, tol, Tolerance::Equality, pass)
    }

    pub fn unchecked(name: impl Into<String>, note: impl Into<String>) -> Self {
        InequalityReport {
            name: name.into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            ratio: None,
            tol: 0.0,
            tolerance: Tolerance::Relative,
            status: Status::Unchecked,
            p: None,
            q: None,
            delta: None,
            domain: None,
            note: Some(note.into()),
        }
    }

    fn build(name: String, lhs: f64, rhs: f64, tol: f64, tolerance: Tolerance, pass: bool) -> Self {
        let ratio = (rhs > 0.0).then(|| lhs / rhs);
        InequalityReport {
            name,
            lhs,
            rhs,
            ratio,
            tol,
            tolerance,
            status: if pass && lhs.is_finite() && rhs.is_finite() {
                Status::Pass
            } else {
                Status::Fail
            },
            p: None,
            q: None,
            delta: None,
            domain: None,
            note: None,
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = Some(q);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = Some(domain.into());
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

/// Flat CSV, one row per report.
pub fn reports_csv(reports: &[InequalityReport], header: &[String]) -> String {
    let mut s = String::new();
    for h in header {
        let _ = writeln!(s, "# {h}");
    }
    s.push_str("name,domain,p,q,delta,lhs,rhs,ratio,status\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&r.name),
            csv_field(r.domain.as_deref().unwrap_or("")),
            opt(r.p),
            opt(r.q),
            opt(r.delta),
            if r.lhs.is_nan() { String::new() } else { r.lhs.to_string() },
            if r.rhs.is_nan() { String::new() } else { r.rhs.to_string() },
            opt(r.ratio),
            match r.status {
                Status::Pass => "pass",
                Status::Fail => "fail",
                Status::Unchecked => "unchecked",
            }
        );
    }
    s
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_follows_tolerance() {
        assert!(InequalityReport::relative("a", 1.01, 1.0, 0.02).passed());
        assert!(InequalityReport::relative("a", 1.03, 1.0, 0.02).failed());
        assert!(InequalityReport::absolute("a", 1.0 + 1e-13, 1.0, 1e-12).passed());
        assert!(InequalityReport::relative("a", f64::NAN, 1.0, 0.02).failed());
        assert!(InequalityReport::equality("a", 0.99, 1.0, 0.02).passed());
        assert!(InequalityReport::equality("a", 0.97, 1.0, 0.02).failed());
        assert_eq!(InequalityReport::relative("a", 0.0, 0.0, 0.0).ratio, None);
        assert_eq!(InequalityReport::unchecked("a", "why").status, Status::Unchecked);
    }

    #[test]
    fn csv_quotes_awkward_names() {
        let r = InequalityReport::relative("x, \"y\"", 1.0, 2.0, 0.0).with_p(2.0);
        let csv = reports_csv(&[r], &["hash=1".into()]);
        assert!(csv.contains("\"x, \"\"y\"\"\""));
        assert!(csv.starts_with("# hash=1\n"));
        assert!(csv.trim_end().ends_with("0.5,pass"));
    }
}
