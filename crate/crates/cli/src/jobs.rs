//! One pipeline per command. Each returns a JSON result and the exit status.

use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use freeshift::constructor::{
    assemble_augmented_cover, build_family_with_factors, freeness_patterns, orbit_escape_check, period_check,
    AugmentationPlan, ConstructorError,
};
use freeshift::covers::CoverError;
use freeshift::lll::{canonical_witness, check_correctness, counting_bound_unchecked, LllError, WindowInstance};
use freeshift::sampler::{brute_force_count, folner_entropy_estimate, sample, verify_avoidance, SamplerConfig, SamplerError};
use freeshift::scalar::log2_alphabet;
use freeshift::sofic::{
    approx_coloring_count, cyclic_approximation, permutation_approximation, proper_set, set_power, symmetric_closure,
    transfer_patterns, vertex_lll_count_bound, window_restriction_set, PseudoAction, SoficError,
};
use freeshift::{CylinderFamily, GroupDescriptor, GroupElement, PatternError, Side, Window};

use crate::io::{element_repr, family_from, pattern_repr, JobFile, PseudoActionRepr};

/// Largest window (in cells) any command will build.
pub const MAX_WINDOW_CELLS: u128 = 1 << 16;
/// Largest pseudo-action table (elements × vertices).
pub const MAX_TABLE_ENTRIES: u128 = 1 << 26;
/// Materialization limit for in-window intersection families.
pub const MAX_WINDOW_MEMBERS: u128 = 1 << 16;

#[derive(Debug, Error)]
pub enum JobError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("scale limit exceeded: {0}")]
    Scale(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("resampling budget exhausted: {0}")]
    Budget(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl JobError {
    pub fn validation(e: impl std::fmt::Display) -> Self {
        JobError::Validation(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            JobError::Io(_) => 1,
            JobError::Validation(_) => 2,
            JobError::Scale(_) => 3,
            JobError::Certification(_) => 4,
            JobError::Budget(_) => 5,
        }
    }
}

impl From<CoverError> for JobError {
    fn from(e: CoverError) -> Self {
        match e {
            CoverError::ScaleExceeded { .. } | CoverError::TooManyMembers(_) => JobError::Scale(e.to_string()),
            _ => JobError::validation(e),
        }
    }
}

impl From<PatternError> for JobError {
    fn from(e: PatternError) -> Self {
        JobError::validation(e)
    }
}

impl From<LllError> for JobError {
    fn from(e: LllError) -> Self {
        match e {
            LllError::NotCorrect { .. } => JobError::Certification(e.to_string()),
            LllError::Cover(c) => c.into(),
            _ => JobError::validation(e),
        }
    }
}

impl From<SamplerError> for JobError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::BudgetExhausted { .. } => JobError::Budget(e.to_string()),
            SamplerError::ScaleExceeded { .. } => JobError::Scale(e.to_string()),
            SamplerError::Lll(l) => l.into(),
            _ => JobError::validation(e),
        }
    }
}

impl From<ConstructorError> for JobError {
    fn from(e: ConstructorError) -> Self {
        match e {
            ConstructorError::WidthNotBelowH { .. }
            | ConstructorError::NoSlack { .. }
            | ConstructorError::SigmaAboveEpsilon { .. }
            | ConstructorError::BudgetViolation { .. }
            | ConstructorError::NoFactorCount => JobError::Certification(e.to_string()),
            ConstructorError::Cover(c) => c.into(),
            _ => JobError::validation(e),
        }
    }
}

impl From<SoficError> for JobError {
    fn from(e: SoficError) -> Self {
        match e {
            SoficError::ScaleExceeded { .. } => JobError::Scale(e.to_string()),
            SoficError::WitnessFailed { .. } | SoficError::NoSlack { .. } => JobError::Certification(e.to_string()),
            SoficError::Lll(l) => l.into(),
            SoficError::Sampler(s) => s.into(),
            _ => JobError::validation(e),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Width,
    Breadth,
    Certify,
    Sample,
    Count,
    ConstructFree,
    SoficBound,
    FolnerEntropy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Width => "width",
            Command::Breadth => "breadth",
            Command::Certify => "certify",
            Command::Sample => "sample",
            Command::Count => "count",
            Command::ConstructFree => "construct-free",
            Command::SoficBound => "sofic-bound",
            Command::FolnerEntropy => "folner-entropy",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Options {
    pub seed: Option<u64>,
    pub tol: f64,
    pub grid: usize,
    pub max_resamples: u64,
    pub window_radius: Option<usize>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            seed: None,
            tol: freeshift::covers::DEFAULT_TOLERANCE,
            grid: freeshift::covers::DEFAULT_BREADTH_GRID,
            max_resamples: 1_000_000,
            window_radius: None,
        }
    }
}

/// A finished job: the report and the exit status to use.
pub struct Outcome {
    pub report: Value,
    pub status: i32,
}

struct Ctx<'a> {
    job: &'a JobFile,
    opts: &'a Options,
    seed: u64,
}

impl Ctx<'_> {
    fn h(&self) -> Result<f64, JobError> {
        self.job.h.ok_or_else(|| JobError::Validation("this command needs \"h\"".into()))
    }

    fn window(&self) -> Result<Arc<Window>, JobError> {
        let r = self
            .opts
            .window_radius
            .or(self.job.window_radius)
            .ok_or_else(|| JobError::Validation("this command needs \"window_radius\"".into()))?;
        window_ball(self.job.group, r)
    }

    fn instance(&self, family: CylinderFamily) -> Result<WindowInstance, JobError> {
        Ok(WindowInstance::new(self.window()?, family)?)
    }
}

fn window_ball(group: GroupDescriptor, r: usize) -> Result<Arc<Window>, JobError> {
    let cells = group.ball_size(r);
    if cells > MAX_WINDOW_CELLS {
        return Err(JobError::Scale(format!("ball of radius {r} has {cells} cells, limit {MAX_WINDOW_CELLS}")));
    }
    Ok(Arc::new(Window::ball(group, r)))
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("inf")
    } else if x < 0.0 {
        json!("-inf")
    } else {
        json!("nan")
    }
}

fn size_record(family: &CylinderFamily, h: f64) -> Value {
    let log2k: f64 = log2_alphabet(family.alphabet());
    let sigma = family.sigma(h);
    json!({
        "h": finite(h),
        "rho": finite(family.rho(h)),
        "sigma": finite(sigma),
        "slack": finite(log2k - h - sigma),
    })
}

pub fn run(command: Command, job: &JobFile, opts: &Options) -> Result<Outcome, JobError> {
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(JobError::Validation(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let seed = opts.seed.or(job.seed).unwrap_or(0);
    let ctx = Ctx { job, opts, seed };
    let (result, status) = match command {
        Command::Width => (width(&ctx)?, 0),
        Command::Breadth => (breadth(&ctx)?, 0),
        Command::Certify => certify(&ctx)?,
        Command::Sample => (sample_job(&ctx)?, 0),
        Command::Count => (count(&ctx)?, 0),
        Command::ConstructFree => construct_free(&ctx)?,
        Command::SoficBound => (sofic_bound(&ctx)?, 0),
        Command::FolnerEntropy => (folner(&ctx)?, 0),
    };
    let report = json!({
        "tool": "freeshift",
        "version": env!("CARGO_PKG_VERSION"),
        "schema_version": crate::io::SCHEMA_VERSION,
        "command": command.name(),
        "seed": seed,
        "tolerance": opts.tol,
        "grid": opts.grid,
        "max_resamples": opts.max_resamples,
        "result": result,
    });
    Ok(Outcome { report, status })
}

fn width(ctx: &Ctx) -> Result<Value, JobError> {
    let family = ctx.job.family()?;
    Ok(size_record(&family, family.width(ctx.opts.tol)))
}

fn breadth(ctx: &Ctx) -> Result<Value, JobError> {
    let family = ctx.job.family()?;
    if ctx.opts.grid == 0 {
        return Err(JobError::Validation("grid must be positive".into()));
    }
    Ok(size_record(&family, family.breadth(ctx.opts.grid, ctx.opts.tol)))
}

fn certify(ctx: &Ctx) -> Result<(Value, i32), JobError> {
    let h = ctx.h()?;
    let inst = ctx.instance(ctx.job.family()?)?;
    let w = canonical_witness(&inst, h);
    let report = check_correctness(&inst, &w)?;
    let rows: Vec<Value> = inst
        .constraints()
        .iter()
        .zip(&report.slacks)
        .map(|(c, &s)| json!({"pattern": pattern_repr(c.pattern()), "slack": finite(s)}))
        .collect();
    let bound = counting_bound_unchecked(&inst, &w)?;
    let result = json!({
        "h": h,
        "cells": inst.window().len(),
        "constraints": inst.len(),
        "certified": report.ok,
        "worst_slack": finite(report.worst_slack),
        "log2_count_bound": if report.ok { finite(bound) } else { Value::Null },
        "slacks": rows,
    });
    Ok((result, if report.ok { 0 } else { 4 }))
}

fn sample_job(ctx: &Ctx) -> Result<Value, JobError> {
    let inst = ctx.instance(ctx.job.family()?)?;
    let cfg = SamplerConfig::new(ctx.seed, ctx.opts.max_resamples)?;
    let out = sample(&inst, &cfg)?;
    let valid = verify_avoidance(&out.configuration, &inst)?;
    Ok(json!({
        "cells": inst.window().elements().iter().map(element_repr).collect::<Vec<_>>(),
        "configuration": out.configuration.values(),
        "resamples": out.resamples,
        "attestation": {"avoids_all_constraints": valid, "constraints": inst.len()},
    }))
}

fn count(ctx: &Ctx) -> Result<Value, JobError> {
    let inst = ctx.instance(ctx.job.family()?)?;
    let n = brute_force_count(&inst)?;
    let lll = match ctx.job.h {
        Some(h) => {
            let w = canonical_witness(&inst, h);
            let report = check_correctness(&inst, &w)?;
            json!({
                "h": h,
                "certified": report.ok,
                "log2_bound": if report.ok { finite(counting_bound_unchecked(&inst, &w)?) } else { Value::Null },
            })
        }
        None => Value::Null,
    };
    Ok(json!({
        "cells": inst.window().len(),
        "constraints": inst.len(),
        "count": n,
        "log2_count": finite((n as f64).log2()),
        "lll": lll,
    }))
}

fn construct_free(ctx: &Ctx) -> Result<(Value, i32), JobError> {
    let job = ctx.job;
    let (group, k) = (job.group, job.k);
    let (base, h, mut bads) = match &job.plan {
        Some(plan) => {
            if !plan.auto_epsilon {
                return Err(JobError::Validation("only the automatic ε schedule is supported".into()));
            }
            let base = family_from(group, k, &plan.base_cover)?;
            let bads = plan
                .bad_families
                .iter()
                .map(|f| family_from(group, k, f))
                .collect::<Result<Vec<_>, _>>()?;
            (base, plan.h, bads)
        }
        None => (CylinderFamily::empty(k), ctx.h()?, Vec::new()),
    };
    let gammas: Vec<GroupElement> = match job.freeness_radius {
        Some(r) => {
            if group.ball_size(r) > MAX_WINDOW_CELLS {
                return Err(JobError::Scale(format!("freeness ball of radius {r} is too large")));
            }
            group.ball(r).into_iter().filter(|g| !g.is_identity()).collect()
        }
        None => Vec::new(),
    };
    for g in &gammas {
        bads.push(freeness_patterns(g, k)?);
    }
    if bads.is_empty() {
        return Err(JobError::Validation("construct-free needs bad families or a freeness radius".into()));
    }
    let plan = AugmentationPlan::new(base.clone(), h, bads.clone())?;
    let cover = assemble_augmented_cover(&plan)?;
    let cert = cover.certificate;
    let families: Vec<Value> = cover
        .left
        .iter()
        .zip(&cover.right)
        .zip(plan.epsilons())
        .enumerate()
        .map(|(i, ((l, r), &eps))| {
            json!({
                "index": i,
                "epsilon": eps,
                "factors": l.factors(),
                "sigma_left": finite(l.sigma),
                "sigma_right": finite(r.sigma),
            })
        })
        .collect();

    // window stand-in: few factors, both sides, so that members fit
    let factors = job.window_factors.unwrap_or(3);
    let mut members = base.members().to_vec();
    for f in &bads {
        for side in [Side::Left, Side::Right] {
            let v = build_family_with_factors(f, side, h, factors)?.to_family(MAX_WINDOW_MEMBERS)?;
            members.extend(v.members().iter().cloned());
        }
    }
    let window_family = CylinderFamily::new(members, k)?;
    let inst = ctx.instance(window_family)?;
    let cfg = SamplerConfig::new(ctx.seed, ctx.opts.max_resamples)?;
    let out = match sample(&inst, &cfg) {
        Ok(out) => out,
        Err(SamplerError::BudgetExhausted { .. }) => {
            return Err(JobError::Budget(format!("no configuration after {} resamples", ctx.opts.max_resamples)));
        }
        Err(e) => return Err(e.into()),
    };
    let x = &out.configuration;
    let valid = verify_avoidance(x, &inst)?;
    let periods: Vec<Value> = gammas
        .iter()
        .map(|g| json!({"gamma": element_repr(g), "period_check": period_check(x, g)}))
        .collect();
    let mut escapes = Vec::new();
    for (i, f) in bads.iter().enumerate() {
        for side in [Side::Left, Side::Right] {
            let escaped = match orbit_escape_check(x, f, side) {
                Ok(b) => json!(b),
                Err(ConstructorError::WindowTooSmall) => Value::Null,
                Err(e) => return Err(e.into()),
            };
            escapes.push(json!({"family": i, "side": side, "orbit_escape": escaped}));
        }
    }
    let result = json!({
        "certificate": {
            "h": cert.h,
            "log2_k": cert.log2_k,
            "sigma": cert.sigma,
            "slack": cert.slack,
        },
        "initial_slack": cover.initial_slack,
        "realized_sigma": cover.realized_sigma,
        "budget": cover.budget,
        "families": families,
        "window_factors": factors,
        "sample": {
            "cells": inst.window().elements().iter().map(element_repr).collect::<Vec<_>>(),
            "configuration": x.values(),
            "resamples": out.resamples,
            "avoids_all_constraints": valid,
        },
        "period_rows": periods,
        "escape_rows": escapes,
    });
    Ok((result, 0))
}

fn pseudo_action(group: GroupDescriptor, repr: &PseudoActionRepr, radius: usize) -> Result<PseudoAction, JobError> {
    let size = match *repr {
        PseudoActionRepr::Cyclic { n } => n,
        PseudoActionRepr::Perm { v, .. } => v,
    };
    let entries = group.ball_size(radius).saturating_mul(size as u128);
    if entries > MAX_TABLE_ENTRIES {
        return Err(JobError::Scale(format!("pseudo-action table needs {entries} entries, limit {MAX_TABLE_ENTRIES}")));
    }
    Ok(match (*repr, group) {
        (PseudoActionRepr::Cyclic { n }, GroupDescriptor::FreeAbelian { d: 1 }) => cyclic_approximation(n, radius)?,
        (PseudoActionRepr::Perm { v, seed }, GroupDescriptor::Free { rank }) => permutation_approximation(rank, v, seed, radius)?,
        _ => {
            return Err(JobError::Validation(format!(
                "pseudo-action {repr:?} does not fit group {group}; use cyclic with Z^1 or perm with a free group"
            )))
        }
    })
}

fn sofic_bound(ctx: &Ctx) -> Result<Value, JobError> {
    let job = ctx.job;
    let family = job.family()?;
    let repr = job
        .pseudo_action
        .as_ref()
        .ok_or_else(|| JobError::Validation("sofic-bound needs \"pseudo_action\"".into()))?;
    let r = job
        .s_radius
        .unwrap_or_else(|| family.iter().flat_map(|p| p.support()).map(|g| g.length()).max().unwrap_or(1));
    let alpha = pseudo_action(job.group, repr, 4 * r)?;
    let s = symmetric_closure(job.group, &job.group.ball(r));
    let s3 = proper_set(&alpha, &set_power(&s, 3))?;
    let s4 = proper_set(&alpha, &set_power(&s, 4))?;
    let transfer = transfer_patterns(&family, &alpha, &s)?;
    let bound = match job.h {
        Some(h) => {
            let b = vertex_lll_count_bound(&transfer, &family, h)?;
            json!({
                "h": h,
                "log2_bound": finite(b.log2_bound),
                "per_vertex": finite(b.per_vertex),
                "chain_floor": finite(b.chain_floor),
            })
        }
        None => Value::Null,
    };
    let epsilon = job.epsilon.unwrap_or(s4.epsilon_achieved);
    let size = alpha.size();
    let enumerable = (job.k as u128)
        .checked_pow(size as u32)
        .is_some_and(|t| t <= freeshift::sampler::MAX_ENUMERATION);
    let coloring = if enumerable {
        let x_f = window_restriction_set(job.group, &family, &s, None)?;
        let c = approx_coloring_count::<f64>(&alpha, job.k, &x_f, &s, epsilon, Some(&transfer))?;
        json!({
            "epsilon": epsilon,
            "col": c.col,
            "h_eps_f": finite(c.h_eps_f),
            "forb": c.forb,
            "forb_outside_col": c.forb_outside_col,
        })
    } else {
        Value::Null
    };
    Ok(json!({
        "vertices": size,
        "s_radius": r,
        "prop_s3": s3.proper.len(),
        "prop_s4": s4.proper.len(),
        "epsilon_achieved": s4.epsilon_achieved,
        "transferred_patterns": transfer.instance.len(),
        "bound": bound,
        "coloring": coloring,
    }))
}

fn folner(ctx: &Ctx) -> Result<Value, JobError> {
    let family = ctx.job.family()?;
    let n = ctx.job.n.ok_or_else(|| JobError::Validation("folner-entropy needs \"n\"".into()))?;
    let est: f64 = folner_entropy_estimate(ctx.job.group, &family, n, ctx.job.padding)?;
    Ok(json!({"n": n, "padding": ctx.job.padding, "entropy": finite(est)}))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(text: &str) -> JobFile {
        JobFile::parse(text).unwrap()
    }

    #[test]
    fn breadth_of_full_shift() {
        for k in 2..=5u8 {
            let j = job(&format!(r#"{{"schema_version": 1, "group": {{"kind": "zd", "d": 1}}, "k": {k}}}"#));
            let out = run(Command::Breadth, &j, &Options::default()).unwrap();
            let h = out.report["result"]["h"].as_f64().unwrap();
            assert!((h - (k as f64).log2()).abs() < 1e-6);
        }
    }

    #[test]
    fn error_classes() {
        let j = job(
            r#"{"schema_version": 1, "group": {"kind": "zd", "d": 1}, "k": 2,
                "family": [{"support": [[0]], "values": [0]}, {"support": [[0]], "values": [1]}],
                "window_radius": 3}"#,
        );
        let e = run(Command::Sample, &j, &Options { max_resamples: 50, ..Options::default() }).err().unwrap();
        assert_eq!(e.exit_code(), 5);
        let e = run(Command::Certify, &j, &Options::default()).err().unwrap();
        assert_eq!(e.exit_code(), 2);
        let j = job(r#"{"schema_version": 1, "group": {"kind": "zd", "d": 1}, "k": 2, "window_radius": 100}"#);
        assert_eq!(run(Command::Count, &j, &Options::default()).err().unwrap().exit_code(), 3);
    }

    #[test]
    fn certify_reports_failure_status() {
        let j = job(
            r#"{"schema_version": 1, "group": {"kind": "zd", "d": 1}, "k": 2, "h": 0.9,
                "family": [{"support": [[0],[1],[2]], "values": [0,0,0]}], "window_radius": 4}"#,
        );
        let out = run(Command::Certify, &j, &Options::default()).unwrap();
        assert_eq!(out.status, 4);
        assert_eq!(out.report["result"]["certified"], json!(false));
    }
}
