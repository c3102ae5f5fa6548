//! Subcommand pipelines behind the `ptorsion` binary. Each command returns an
//! [`Outcome`]: the JSON document, the exit code and any file artifacts.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{DomainSpec, RadiusLaw, RunConfig};
use crate::error::{Error, Result};
use crate::fields::critical_delta;
use crate::geometry::{chain_integrability, chain_summability, discretize, Domain, Grid, Verdict};
use crate::inequalities::{
    extremal_field, hardy_delta, hardy_optimized, hardy_remainder, hardy_simple, main_sandwich_from,
    p2_identity_defect, pp_sandwich_from, random_test_fields, reports_csv, sampled_check, sharpness_sequence,
    HardyWeights, InequalityReport, TestFieldSpec,
};
use crate::spectral::{poincare_from, PoincareResult};
use crate::torsion::{
    composition_probe, exact_ball_torsion, exhaustion_sequence, linfty_l1_check, solve_torsion, TorsionResult,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_INEQUALITY: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

/// Safety factor applied to the sampled convexity constants.
pub const CONSTANT_SAFETY: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Torsion,
    Poincare,
    Verify,
    Chain,
    Young,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Torsion => "torsion",
            Command::Poincare => "poincare",
            Command::Verify => "verify",
            Command::Chain => "chain",
            Command::Young => "young",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: i32,
    /// Pretty-printed JSON with sorted keys.
    pub json: String,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    /// Writes `<command>.json` and, unless `json_only`, every artifact into `dir`.
    pub fn write(&self, command: Command, dir: &Path, json_only: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.json", command.name())), &self.json)?;
        if !json_only {
            for a in &self.artifacts {
                std::fs::write(dir.join(&a.name), &a.contents)?;
            }
        }
        Ok(())
    }
}

/// Collected output of one command.
#[derive(Default)]
struct Run {
    results: Vec<Value>,
    reports: Vec<InequalityReport>,
    artifacts: Vec<Artifact>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

/// Exit code for an error raised while a command runs.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidExponent(_) | Error::InvalidDomain(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

/// Machine-readable error document.
pub fn error_json(command: Option<Command>, config_hash: Option<&str>, e: &Error) -> String {
    let code = exit_code_for(e);
    render(&json!({
        "command": command.map(Command::name),
        "config_hash": config_hash,
        "exit_code": code,
        "status": "error",
        "error": { "kind": e.kind(), "message": e.to_string() },
    }))
}

pub fn run(command: Command, config: &RunConfig) -> Outcome {
    let hash = config.hash();
    let result = match command {
        Command::Torsion => torsion_pipeline(config),
        Command::Poincare => poincare_pipeline(config),
        Command::Verify => verify_pipeline(config),
        Command::Chain => chain_pipeline(config),
        Command::Young => young_pipeline(config),
    };
    match result {
        Ok(run) => {
            let failed = run.reports.iter().filter(|r| r.failed()).count();
            let unchecked = run.reports.iter().filter(|r| r.status == crate::inequalities::Status::Unchecked).count();
            let exit_code = if failed > 0 { EXIT_INEQUALITY } else { EXIT_PASS };
            let doc = json!({
                "command": command.name(),
                "config_hash": hash,
                "exit_code": exit_code,
                "status": if failed > 0 { "fail" } else { "pass" },
                "counts": {
                    "reports": run.reports.len(),
                    "failed": failed,
                    "unchecked": unchecked,
                },
                "results": run.results,
                "reports": to_value(&run.reports),
            });
            let mut artifacts = run.artifacts;
            if !run.reports.is_empty() {
                artifacts.push(Artifact {
                    name: format!("{}.csv", command.name()),
                    contents: reports_csv(&run.reports, &[format!("config_hash={hash}")]),
                });
            }
            Outcome {
                exit_code,
                json: render(&doc),
                artifacts,
            }
        }
        Err(e) => Outcome {
            exit_code: exit_code_for(&e),
            json: error_json(Some(command), Some(&hash), &e),
            artifacts: Vec::new(),
        },
    }
}

pub fn cmd_torsion(config: &RunConfig) -> Outcome {
    run(Command::Torsion, config)
}

pub fn cmd_poincare(config: &RunConfig) -> Outcome {
    run(Command::Poincare, config)
}

pub fn cmd_verify(config: &RunConfig) -> Outcome {
    run(Command::Verify, config)
}

pub fn cmd_chain(config: &RunConfig) -> Outcome {
    run(Command::Chain, config)
}

pub fn cmd_young(config: &RunConfig) -> Outcome {
    run(Command::Young, config)
}

fn grid_for(entry: &DomainSpec, h: f64) -> Result<Arc<Grid>> {
    Ok(Arc::new(discretize(&entry.domain, h)?))
}

fn stem(entry: &DomainSpec, p: f64, k: usize) -> String {
    format!("{}_p{p}_h{k}", entry.id)
}

/// |∫|∇w|^p - ∫w| ≤ 2·tol·∫w at the discrete minimizer.
fn energy_identity(t: &TorsionResult, tol: f64) -> InequalityReport {
    InequalityReport::equality("energy_identity", t.energy, t.integral, 2.0 * tol).with_p(t.p)
}

fn field_artifacts(run: &mut Run, t: &TorsionResult, name: &str, hash: &str) -> Result<()> {
    let header = vec![format!("config_hash={hash}")];
    run.artifacts.push(Artifact {
        name: format!("{name}.csv"),
        contents: t.w.to_csv(&header),
    });
    if t.w.grid().dim() == 2 {
        let (pgm, sidecar) = t.w.to_pgm()?;
        let pgm = pgm.replacen('\n', &format!("\n# config_hash={hash}\n"), 1);
        run.artifacts.push(Artifact {
            name: format!("{name}.pgm"),
            contents: pgm,
        });
        run.artifacts.push(Artifact {
            name: format!("{name}.pgm.txt"),
            contents: format!("config_hash={hash}\n{sidecar}"),
        });
    }
    Ok(())
}

/// Relative sup-norm distance to the closed-form profile, for balls only.
fn ball_error(entry: &DomainSpec, t: &TorsionResult) -> Result<Option<f64>> {
    let Some((centre, radius)) = entry.domain.as_ball() else {
        return Ok(None);
    };
    if centre.iter().any(|&c| c != 0.0) {
        return Ok(None);
    }
    let grid = t.w.grid();
    let exact = exact_ball_torsion(radius, grid.dim(), t.p, grid)?;
    let err = t
        .w
        .values()
        .iter()
        .zip(exact.values())
        .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
    Ok(Some(err / exact.lp_norm(f64::INFINITY)))
}

fn torsion_pipeline(config: &RunConfig) -> Result<Run> {
    let hash = config.hash();
    let mut run = Run::default();
    for entry in &config.domains {
        for &p in &config.p {
            for (k, &h) in config.spacings.iter().enumerate() {
                let grid = grid_for(entry, h)?;
                let t = solve_torsion(&grid, p, &config.solver)?;
                let identity = energy_identity(&t, config.solver.tol).with_domain(&entry.id);
                run.results.push(json!({
                    "type": "torsion",
                    "domain": entry.id,
                    "kind": entry.domain.kind(),
                    "p": p,
                    "h": h,
                    "torsion": to_value(&t.summary()),
                    "exact_ball_error": ball_error(entry, &t)?,
                }));
                run.reports.push(identity);
                field_artifacts(&mut run, &t, &format!("torsion_{}", stem(entry, p, k)), &hash)?;
            }
            if !entry.cuts.is_empty() {
                let h = *config.spacings.last().expect("mesh has spacings");
                let seq = exhaustion_sequence(&entry.domain, p, &entry.cuts, h, &config.solver)?;
                let scale = seq.last().expect("cuts nonempty").sup_norm;
                for (k, pair) in seq.windows(2).enumerate() {
                    let drop = pair[0]
                        .w
                        .values()
                        .iter()
                        .zip(pair[1].w.values())
                        .fold(0.0, |m: f64, (a, b)| m.max(a - b));
                    run.reports.push(
                        InequalityReport::absolute("exhaustion_monotone", drop, 0.0, 2.0 * config.solver.tol * scale)
                            .with_p(p)
                            .with_domain(&entry.id)
                            .with_note(format!("cut {} to {}", entry.cuts[k], entry.cuts[k + 1])),
                    );
                }
                run.results.push(json!({
                    "type": "exhaustion",
                    "domain": entry.id,
                    "p": p,
                    "h": h,
                    "cuts": entry.cuts,
                    "integrals": seq.iter().map(|t| t.integral).collect::<Vec<_>>(),
                    "sup_norms": seq.iter().map(|t| t.sup_norm).collect::<Vec<_>>(),
                }));
            }
            if !config.beta.is_empty() && config.spacings.len() >= 4 {
                for &beta in &config.beta {
                    let probe = composition_probe(&entry.domain, p, beta, &config.spacings, &config.solver)?;
                    let mut v = to_value(&probe);
                    v["type"] = json!("composition_probe");
                    v["domain"] = json!(entry.id);
                    run.results.push(v);
                }
            }
        }
    }
    Ok(run)
}

fn q_list(config: &RunConfig, p: f64) -> Vec<f64> {
    if config.q.is_empty() {
        vec![p]
    } else {
        config.q.clone()
    }
}

fn poincare_pipeline(config: &RunConfig) -> Result<Run> {
    let mut run = Run::default();
    for entry in &config.domains {
        for &p in &config.p {
            for &h in &config.spacings {
                let grid = grid_for(entry, h)?;
                let t = solve_torsion(&grid, p, &config.solver)?;
                for q in q_list(config, p) {
                    let lam = poincare_from(&grid, p, q, t.w.values().to_vec(), &config.poincare)?;
                    run.results.push(json!({
                        "type": "poincare",
                        "domain": entry.id,
                        "kind": entry.domain.kind(),
                        "p": p,
                        "q": q,
                        "h": h,
                        "poincare": to_value(&lam.summary()),
                    }));
                }
            }
        }
    }
    Ok(run)
}

fn tag(r: InequalityReport, entry: &DomainSpec, p: f64) -> InequalityReport {
    r.with_domain(&entry.id).with_p(p)
}

/// Hardy suite, sharpness sequence and sandwiches for one solved domain.
fn verify_one(config: &RunConfig, entry: &DomainSpec, t: &TorsionResult, run: &mut Run) -> Result<()> {
    let v = &config.verify;
    let tol = v.tolerance;
    let p = t.p;
    let grid = t.w.grid().clone();
    let h = grid.spacing();
    let dim = grid.dim();
    let first = run.reports.len();

    run.reports.push(tag(energy_identity(t, config.solver.tol), entry, p));

    let w = match v.corrupt_w {
        Some(c) => t.w.scale(1.0 + c),
        None => t.w.clone(),
    };
    let weights = HardyWeights::new(&w, p)?;
    let suite = random_test_fields(
        &w,
        &TestFieldSpec {
            count: v.fields,
            seed: v.seed,
            ..Default::default()
        },
    )?;
    let mut deltas = config.delta.clone();
    let dstar = critical_delta(p);
    if !deltas.iter().any(|&d| (d - dstar).abs() <= 1e-12 * dstar) {
        deltas.push(dstar);
    }
    for (k, u) in suite.iter().enumerate() {
        let note = format!("field {k}");
        run.reports.push(tag(hardy_simple(u, &weights, tol)?, entry, p).with_note(&note));
        for &d in &deltas {
            run.reports.push(tag(hardy_delta(u, &weights, d, tol)?, entry, p).with_note(&note));
        }
        run.reports.push(tag(hardy_optimized(u, &weights, tol)?, entry, p).with_note(&note));
    }

    for &d in &v.extremal_delta {
        if d >= dstar {
            continue;
        }
        let u = extremal_field(&w, p, d, 1.0)?;
        let energy = u.dirichlet_energy(p);
        let r = hardy_delta(&u, &weights, d, tol)?;
        run.reports.push(tag(
            InequalityReport::equality("hardy_extremal", r.lhs, r.rhs, tol).with_delta(d),
            entry,
            p,
        ));
        let rem = hardy_remainder(&u, &weights, d)?;
        run.reports.push(tag(
            InequalityReport::relative("hardy_remainder_extremal", rem, tol * energy, 0.0).with_delta(d),
            entry,
            p,
        ));
    }

    let floor = ((p - 1.0) / p).powf(p);
    let mut previous: Option<f64> = None;
    let mut quotients = Vec::new();
    for &n in &v.sharpness_n {
        let (_, q) = sharpness_sequence(&weights, n)?;
        let note = format!("n={n}");
        run.reports.push(tag(InequalityReport::relative("sharpness_lower", floor, q, tol), entry, p).with_note(&note));
        let ceiling = ((p - 1.0) / p + 1.0 / n as f64).powf(p);
        run.reports.push(tag(InequalityReport::relative("sharpness_upper", q, ceiling, tol), entry, p).with_note(&note));
        if let Some(prev) = previous {
            run.reports.push(tag(InequalityReport::relative("sharpness_monotone", q, prev, tol), entry, p).with_note(&note));
        }
        previous = Some(q);
        quotients.push(json!({"n": n, "quotient": q}));
    }

    let mut sandwiches = Vec::new();
    for q in config.q.iter().copied().filter(|&q| q < p) {
        let lam = poincare_from(&grid, p, q, t.w.values().to_vec(), &config.poincare)?;
        let s = main_sandwich_from(t, &lam, q, tol)?;
        run.reports.push(s.lower.clone().with_domain(&entry.id));
        run.reports.push(s.upper.clone().with_domain(&entry.id));
        sandwiches.push(to_value(&s));
    }
    let lam: PoincareResult = poincare_from(&grid, p, p, t.w.values().to_vec(), &config.poincare)?;
    let s = pp_sandwich_from(t, &lam, tol)?;
    run.reports.push(s.lower.clone().with_domain(&entry.id));
    run.reports.push(s.upper.clone().with_domain(&entry.id));
    sandwiches.push(to_value(&s));

    if p < dim as f64 {
        let r = match v.sobolev_const {
            Some(sc) => linfty_l1_check(t, p, dim, sc, tol)?,
            None => InequalityReport::unchecked("linfty_l1", "sobolev_const not configured"),
        };
        run.reports.push(tag(r, entry, p));
    }

    let mine = &run.reports[first..];
    let failed: Vec<&str> = mine.iter().filter(|r| r.failed()).map(|r| r.name.as_str()).collect();
    let worst_hardy = mine
        .iter()
        .filter(|r| r.name.starts_with("hardy_") && r.name != "hardy_extremal" && r.name != "hardy_remainder_extremal")
        .filter_map(|r| r.ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    run.results.push(json!({
        "type": "verify",
        "domain": entry.id,
        "kind": entry.domain.kind(),
        "p": p,
        "h": h,
        "seed": v.seed,
        "fields": suite.len(),
        "corrupt_w": v.corrupt_w,
        "torsion": to_value(&t.summary()),
        "excluded_nodes": weights.excluded_nodes(),
        "worst_hardy_ratio": worst_hardy,
        "sharpness": quotients,
        "sandwiches": sandwiches,
        "reports": mine.len(),
        "failed": failed,
    }));
    Ok(())
}

fn young_reports(p: f64, samples: usize, run: &mut Run) -> Result<()> {
    let s = sampled_check(p, samples, CONSTANT_SAFETY)?;
    let note = format!("{} pairs, C = {} x sampled infimum", s.samples, CONSTANT_SAFETY);
    run.reports.push(
        InequalityReport::absolute("young_sampled", s.young_worst_excess, 0.0, crate::inequalities::convexity::CHECK_SLACK)
            .with_p(p)
            .with_note(&note),
    );
    run.reports.push(
        InequalityReport::absolute(
            "convexity_sampled",
            s.convexity_worst_excess,
            0.0,
            crate::inequalities::convexity::CHECK_SLACK,
        )
        .with_p(p)
        .with_note(&note),
    );
    if p == 2.0 {
        let defect = p2_identity_defect(samples);
        run.reports.push(
            InequalityReport::absolute("p2_identity", defect, 0.0, crate::inequalities::convexity::CHECK_SLACK)
                .with_p(p)
                .with_note("young with C=1/2 and convexity with C=1/4 hold with equality"),
        );
    }
    let mut v = to_value(&s);
    v["type"] = json!("young");
    run.results.push(v);
    Ok(())
}

fn verify_pipeline(config: &RunConfig) -> Result<Run> {
    let mut run = Run::default();
    for entry in &config.domains {
        for &p in &config.p {
            for &h in &config.spacings {
                let grid = grid_for(entry, h)?;
                let t = solve_torsion(&grid, p, &config.solver)?;
                verify_one(config, entry, &t, &mut run)?;
            }
        }
    }
    for &p in &config.p {
        young_reports(p, config.verify.young_samples, &mut run)?;
    }
    Ok(run)
}

fn young_pipeline(config: &RunConfig) -> Result<Run> {
    let mut run = Run::default();
    for &p in &config.p {
        young_reports(p, config.verify.young_samples, &mut run)?;
    }
    Ok(run)
}

/// Verdict for `Σ r_i^{2t+N}` implied by the radius law, when it has a closed form.
fn closed_form(law: &RadiusLaw, t: f64) -> Option<Verdict> {
    match law {
        RadiusLaw::Dyadic => Some(Verdict::Converges),
        RadiusLaw::Constant { .. } => Some(Verdict::Diverges),
        // terms i^{-(2t+N)/(2s+N)}: a p-series converging iff t > s
        RadiusLaw::Power { s } => Some(if t > *s { Verdict::Converges } else { Verdict::Diverges }),
        RadiusLaw::Listed => None,
    }
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Converges => "yes",
        Verdict::Diverges => "no",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn chain_pipeline(config: &RunConfig) -> Result<Run> {
    let mut run = Run::default();
    if let Some(&p) = config.p.iter().find(|&&p| p != 2.0) {
        return Err(Error::config(
            0,
            format!("the chain summability criterion is stated only for p=2, got p={p}"),
        ));
    }
    let p = 2.0;
    let h = *config.spacings.first().expect("mesh has spacings");
    for entry in &config.domains {
        let (Some(radii), Some(law)) = (entry.domain.chain_radii(), entry.radius_law.as_ref()) else {
            return Err(Error::config(entry.line, format!("chain needs ball_chain domains, '{}' is not", entry.id)));
        };
        let dim = entry.domain.dim();
        let qs = if config.q.is_empty() { vec![1.0] } else { config.q.clone() };
        for q in qs {
            let (analytic, embedding) = if q < 2.0 {
                let s = chain_summability(radii, q, dim)?;
                let verdict = closed_form(law, q / (2.0 - q)).unwrap_or(s.verdict);
                let label = match verdict {
                    Verdict::Converges => "compact",
                    Verdict::Diverges => "not_continuous",
                    Verdict::Inconclusive => "undetermined",
                };
                (to_value(&s), label)
            } else {
                // q = p: continuity needs bounded radii, compactness needs them to vanish
                let label = match law {
                    RadiusLaw::Dyadic | RadiusLaw::Power { .. } => "compact",
                    RadiusLaw::Constant { .. } => "continuous_not_compact",
                    RadiusLaw::Listed => "undetermined",
                };
                let sup = radii.iter().cloned().fold(0.0, f64::max);
                (json!({ "sup_radius": sup, "w_bounded": true }), label)
            };
            let mut numeric = Vec::new();
            let mut lambdas = Vec::new();
            for &k in &config.chain.truncations {
                if k > radii.len() {
                    return Err(Error::config(entry.line, format!("truncation {k} exceeds the {} balls", radii.len())));
                }
                let sub = Domain::ball_chain(radii[..k].to_vec(), dim)?;
                let grid = Arc::new(discretize(&sub, h)?);
                let t = solve_torsion(&grid, p, &config.solver)?;
                let lam = poincare_from(&grid, p, q, t.w.values().to_vec(), &config.poincare)?;
                let s = if q < p {
                    main_sandwich_from(&t, &lam, q, config.verify.tolerance)?
                } else {
                    pp_sandwich_from(&t, &lam, config.verify.tolerance)?
                };
                run.reports.push(s.lower.clone().with_domain(&entry.id).with_note(format!("{k} balls")));
                run.reports.push(s.upper.clone().with_domain(&entry.id).with_note(format!("{k} balls")));
                lambdas.push(lam.lambda);
                numeric.push(json!({
                    "balls": k,
                    "lambda": lam.lambda,
                    "normalized": s.value,
                    "active_components": lam.active_components(),
                }));
            }
            let decreasing = lambdas.windows(2).all(|w| w[1] <= w[0] * (1.0 + config.verify.tolerance));
            run.results.push(json!({
                "type": "chain",
                "domain": entry.id,
                "p": p,
                "q": q,
                "h": h,
                "radii": radii,
                "analytic": analytic,
                "embedding": embedding,
                "truncations": numeric,
                "lambda_non_increasing": decreasing,
            }));
        }
        for &t in &config.chain.moments {
            let s = chain_integrability(radii, t, dim)?;
            let closed = closed_form(law, t);
            run.results.push(json!({
                "type": "chain_moment",
                "domain": entry.id,
                "t": t,
                "fit": to_value(&s),
                "fit_verdict": verdict_label(s.verdict),
                "closed_form_verdict": closed.map(verdict_label),
                "w_in_lt": verdict_label(closed.unwrap_or(s.verdict)),
            }));
        }
    }
    Ok(run)
}
