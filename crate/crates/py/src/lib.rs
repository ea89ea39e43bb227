//! Python bindings for the audit harness.
//!
//! The module mirrors the pipeline stages: parse and validate plans, run
//! audits against the simulated platform, evaluate logs, and verify them
//! by replay. Structured values cross the boundary as JSON text so the
//! Python side can use plain dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use dsa_audit_core::evaluator::{evaluate_case, windowed_analysis};
use dsa_audit_core::executor::{
    read_explog, replay_verify as core_replay_verify, run_audit as core_run_audit, write_explog,
    SimPlatformAdapter, TOOL_VERSION,
};
use dsa_audit_core::hashing;
use dsa_audit_core::platform::parse_platform_config;
use dsa_audit_core::reporter::{build_report, render_report, ReportFormat};
use dsa_audit_core::scenario::{self, generate_cohorts, parse_plan_lenient};
use dsa_audit_core::stats::{self, Tail};

fn value_error<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_tail(tail: &str) -> PyResult<Tail> {
    match tail {
        "lower" => Ok(Tail::Lower),
        "upper" => Ok(Tail::Upper),
        "two_sided" => Ok(Tail::TwoSided),
        other => Err(PyValueError::new_err(format!(
            "tail must be 'lower', 'upper', or 'two_sided', got '{other}'"
        ))),
    }
}

/// Parse a plan and return it as JSON, or raise ValueError.
#[pyfunction]
fn parse_plan(text: &str) -> PyResult<String> {
    let plan = scenario::parse_plan(text).map_err(value_error)?;
    serde_json::to_string(&plan).map_err(value_error)
}

/// Validate a plan; returns the validation report as JSON.
#[pyfunction]
fn validate_plan(text: &str) -> PyResult<String> {
    let plan = parse_plan_lenient(text).map_err(value_error)?;
    let report = scenario::validate_plan(&plan);
    serde_json::to_string(&report).map_err(value_error)
}

/// Parse a platform configuration and return it as JSON.
#[pyfunction]
fn parse_platform(text: &str) -> PyResult<String> {
    let config = parse_platform_config(text).map_err(value_error)?;
    serde_json::to_string(&config).map_err(value_error)
}

/// Run a full audit. Returns (structured report JSON, explog text).
#[pyfunction]
#[pyo3(signature = (plan_text, platform_text, seed=None, window_days=5))]
fn run_audit(
    plan_text: &str,
    platform_text: &str,
    seed: Option<u64>,
    window_days: u32,
) -> PyResult<(String, String)> {
    let plan = scenario::parse_plan(plan_text).map_err(value_error)?;
    let config = parse_platform_config(platform_text).map_err(value_error)?;
    let seed = seed.unwrap_or(plan.seed);
    let mut adapter = SimPlatformAdapter::new(config).map_err(value_error)?;
    let log = core_run_audit(&plan, &mut adapter, seed).map_err(value_error)?;
    let mut seeded = plan.clone();
    seeded.seed = seed;
    let profiles = generate_cohorts(&seeded);
    let mut verdict =
        evaluate_case(plan.case, &log, &profiles, &plan.decision_rule).map_err(value_error)?;
    let window = window_days.min(plan.duration_days).max(1);
    if let Ok(windows) = windowed_analysis(&log, &profiles, window, plan.case, &plan.decision_rule)
    {
        verdict.windows = Some(windows);
    }
    let report = build_report(
        &log.header.plan_hash,
        &log.header.platform_hash,
        seed,
        TOOL_VERSION,
        vec![verdict],
    )
    .map_err(value_error)?;
    let mut explog = Vec::new();
    write_explog(&log, &mut explog).map_err(value_error)?;
    Ok((
        render_report(&report, ReportFormat::Structured),
        String::from_utf8(explog).expect("explog is utf-8"),
    ))
}

/// Re-execute a logged run and compare. Returns (matches, first_divergence).
#[pyfunction]
fn replay_verify(
    explog_text: &str,
    plan_text: &str,
    platform_text: &str,
) -> PyResult<(bool, Option<u64>)> {
    let log = read_explog(explog_text.as_bytes()).map_err(value_error)?;
    let plan = scenario::parse_plan(plan_text).map_err(value_error)?;
    let config = parse_platform_config(platform_text).map_err(value_error)?;
    let outcome = core_replay_verify(&log, &plan, &config).map_err(value_error)?;
    Ok((outcome.matches, outcome.first_divergence))
}

/// Monte Carlo permutation test. Returns (statistic, p_value).
#[pyfunction]
fn permutation_test(
    xs: Vec<f64>,
    ys: Vec<f64>,
    n_resamples: u32,
    seed: u64,
    tail: &str,
) -> PyResult<(f64, f64)> {
    let r = stats::permutation_test(&xs, &ys, n_resamples, seed, parse_tail(tail)?)
        .map_err(value_error)?;
    Ok((r.statistic, r.p_value))
}

/// Exact permutation test over all label assignments.
#[pyfunction]
fn exact_permutation_test(xs: Vec<f64>, ys: Vec<f64>, tail: &str) -> PyResult<(f64, f64)> {
    let r = stats::exact_permutation_test(&xs, &ys, parse_tail(tail)?).map_err(value_error)?;
    Ok((r.statistic, r.p_value))
}

/// Pooled two-proportion z-test on impression counts.
#[pyfunction]
fn two_proportion_test(k1: u64, n1: u64, k2: u64, n2: u64, tail: &str) -> PyResult<(f64, f64)> {
    let r = stats::two_proportion_test(k1, n1, k2, n2, parse_tail(tail)?).map_err(value_error)?;
    Ok((r.statistic, r.p_value))
}

/// Paired sign-flip test on per-user differences.
#[pyfunction]
fn sign_flip_test(diffs: Vec<f64>, n_resamples: u32, seed: u64, tail: &str) -> PyResult<(f64, f64)> {
    let r = stats::sign_flip_test(&diffs, n_resamples, seed, parse_tail(tail)?)
        .map_err(value_error)?;
    Ok((r.statistic, r.p_value))
}

/// Canonical SHA-256 digest of arbitrary bytes.
#[pyfunction]
fn config_hash(data: &[u8]) -> String {
    hashing::config_hash(data)
}

#[pyfunction]
fn tool_version() -> &'static str {
    TOOL_VERSION
}

#[pymodule]
fn dsa_audit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse_plan, m)?)?;
    m.add_function(wrap_pyfunction!(validate_plan, m)?)?;
    m.add_function(wrap_pyfunction!(parse_platform, m)?)?;
    m.add_function(wrap_pyfunction!(run_audit, m)?)?;
    m.add_function(wrap_pyfunction!(replay_verify, m)?)?;
    m.add_function(wrap_pyfunction!(permutation_test, m)?)?;
    m.add_function(wrap_pyfunction!(exact_permutation_test, m)?)?;
    m.add_function(wrap_pyfunction!(two_proportion_test, m)?)?;
    m.add_function(wrap_pyfunction!(sign_flip_test, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_function(wrap_pyfunction!(tool_version, m)?)?;
    Ok(())
}
