//! Render audit results into reproducible documents.
//!
//! The structured format is JSON whose bytes are fully determined by the
//! inputs, except for the generation timestamp, which is kept on a line
//! of its own so tools can compare reports while skipping it. The
//! human-readable format is a plain-text document with verdict tables,
//! per-window trends, and remediation guidance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{CaseVerdict, Verdict, WindowResult};
use crate::hashing::hash_of;
use crate::scenario::CaseSelector;

pub use crate::hashing::config_hash;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub report_id: String,
    pub plan_hash: String,
    pub platform_hash: String,
    pub seed: u64,
    pub tool_version: String,
    /// Unix seconds at generation time. Excluded from reproducibility
    /// comparisons.
    pub generated_at: u64,
    pub verdicts: Vec<CaseVerdict>,
    pub summary: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Structured,
    HumanReadable,
}

#[derive(Debug, Error)]
pub enum ReporterError {
    #[error("no verdicts to report")]
    NoVerdicts,
    #[error("reports cover different cases and cannot be compared")]
    IncompatibleCases,
}

fn case_name(case: CaseSelector) -> &'static str {
    match case {
        CaseSelector::MinorsProfiling => "minors_profiling",
        CaseSelector::ControlEffectiveness => "control_effectiveness",
        CaseSelector::SensitiveTargeting => "sensitive_targeting",
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Compliant => "compliant",
        Verdict::NonCompliant => "non_compliant",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn article_for(case: CaseSelector) -> &'static str {
    match case {
        CaseSelector::MinorsProfiling => "Art. 28(2)",
        CaseSelector::ControlEffectiveness => "Art. 27(3)/38",
        CaseSelector::SensitiveTargeting => "Art. 26(3)",
    }
}

/// Static remediation guidance per (case, verdict).
pub fn remediation_text(case: CaseSelector, verdict: Verdict) -> Option<&'static str> {
    match (case, verdict) {
        (CaseSelector::MinorsProfiling, Verdict::NonCompliant) => Some(
            "Remediation (Art. 28(2)): exclude accounts declared or inferred to be minors \
             from profiling-based ad selection; serve minors contextual ads only and \
             re-audit after the change is deployed.",
        ),
        (CaseSelector::ControlEffectiveness, Verdict::NonCompliant) => Some(
            "Remediation (Art. 27(3)/38): wire the non-profiling option to the ranking \
             pipeline so that selecting it fully removes interest-profile terms from \
             recommendation and ad scoring, not merely reduces their weight.",
        ),
        (CaseSelector::SensitiveTargeting, Verdict::NonCompliant) => Some(
            "Remediation (Art. 26(3)): remove sensitive-category signals (health, \
             political affiliation, and similar) from ad-targeting features and purge \
             any derived audiences built on them.",
        ),
        (_, Verdict::Inconclusive) => Some(
            "The run did not reach the impression floor; extend the audit duration or \
             cohort size and re-run before drawing conclusions.",
        ),
        _ => None,
    }
}

/// Assemble a report from verdicts and run metadata.
pub fn build_report(
    plan_hash: &str,
    platform_hash: &str,
    seed: u64,
    tool_version: &str,
    verdicts: Vec<CaseVerdict>,
) -> Result<AuditReport, ReporterError> {
    if verdicts.is_empty() {
        return Err(ReporterError::NoVerdicts);
    }
    let summary = verdicts
        .iter()
        .map(|v| {
            let extra = v
                .annotation
                .as_deref()
                .map(|a| format!(" ({a})"))
                .unwrap_or_default();
            format!(
                "{} [{}]: {}{} (p={:.6}, effect={:.6})",
                case_name(v.case),
                article_for(v.case),
                verdict_name(v.verdict),
                extra,
                v.test.p_value,
                v.test.effect_size,
            )
        })
        .collect();
    let report_id = format!(
        "report-{}",
        &hash_of(&(plan_hash, platform_hash, seed, tool_version, &verdicts))[..16]
    );
    let generated_at = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(AuditReport {
        report_id,
        plan_hash: plan_hash.to_string(),
        platform_hash: platform_hash.to_string(),
        seed,
        tool_version: tool_version.to_string(),
        generated_at,
        verdicts,
        summary,
    })
}

/// Render the report. The structured form is pretty-printed JSON, which
/// guarantees `generated_at` occupies its own line.
pub fn render_report(report: &AuditReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Structured => {
            let mut text =
                serde_json::to_string_pretty(report).expect("report is serializable");
            text.push('\n');
            text
        }
        ReportFormat::HumanReadable => render_human(report),
    }
}

/// Compare two structured report documents, ignoring the timestamp line.
pub fn reports_equivalent(a: &str, b: &str) -> bool {
    let strip = |text: &str| {
        text.lines()
            .filter(|l| !l.trim_start().starts_with("\"generated_at\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    strip(a) == strip(b)
}

fn window_table(windows: &[WindowResult]) -> String {
    let mut out = String::new();
    out.push_str("  window  days        p-value   effect      verdict\n");
    for w in windows {
        out.push_str(&format!(
            "  {:>6}  {:>2}-{:<2}  {:>12.6}  {:>8.4}  {}\n",
            w.window_index,
            w.day_start,
            w.day_end,
            w.test.p_value,
            w.test.effect_size,
            verdict_name(w.verdict)
        ));
    }
    out
}

fn render_human(report: &AuditReport) -> String {
    let mut out = String::new();
    out.push_str("ALGORITHMIC AUDIT REPORT\n");
    out.push_str("========================\n\n");
    out.push_str(&format!("report id      : {}\n", report.report_id));
    out.push_str(&format!("plan hash      : {}\n", report.plan_hash));
    out.push_str(&format!("platform hash  : {}\n", report.platform_hash));
    out.push_str(&format!("seed           : {}\n", report.seed));
    out.push_str(&format!("tool version   : {}\n", report.tool_version));
    out.push_str(&format!("generated at   : {} (unix)\n\n", report.generated_at));

    for v in &report.verdicts {
        out.push_str(&format!(
            "CASE {} [{}]\n",
            case_name(v.case),
            article_for(v.case)
        ));
        let extra = v
            .annotation
            .as_deref()
            .map(|a| format!(" ({a})"))
            .unwrap_or_default();
        out.push_str(&format!(
            "  verdict: {}{}\n",
            verdict_name(v.verdict),
            extra
        ));
        out.push_str(&format!(
            "  primary test: {} p={:.6} statistic={:.6} effect={:.6} alpha={}\n",
            v.test.method, v.test.p_value, v.test.statistic, v.test.effect_size, v.alpha
        ));
        for (name, t) in &v.co_tests {
            out.push_str(&format!(
                "  co-metric {}: {} p={:.6} effect={:.6}\n",
                name, t.method, t.p_value, t.effect_size
            ));
        }
        out.push_str(&format!("  decision rule: {}\n", v.rule_applied));
        out.push_str("  group statistics:\n");
        out.push_str(
            "    cohort                 users      ads  matched  ad-rate  content-match\n",
        );
        for g in &v.group_stats {
            let rate = if g.n_ad_impressions > 0 {
                g.n_matched_ad_impressions as f64 / g.n_ad_impressions as f64
            } else {
                0.0
            };
            out.push_str(&format!(
                "    {:<22} {:>5} {:>8} {:>8}  {:>7.4}  {:>13.4}\n",
                g.cohort_label,
                g.n_users,
                g.n_ad_impressions,
                g.n_matched_ad_impressions,
                rate,
                g.content_matched_rate
            ));
        }
        if let Some(windows) = &v.windows {
            out.push_str("  per-window trend:\n");
            out.push_str(&window_table(windows));
        }
        if let Some(text) = remediation_text(v.case, v.verdict) {
            out.push_str(&format!("  {text}\n"));
        }
        out.push('\n');
    }
    out.push_str("SUMMARY\n");
    for line in &report.summary {
        out.push_str(&format!("  {line}\n"));
    }
    out
}

/// True when the primary metric and the co-reported impression-level
/// metric imply different significance calls.
pub fn metric_disagreement(v: &CaseVerdict) -> bool {
    v.co_tests.values().any(|co| {
        if co.method == v.test.method {
            return false;
        }
        (v.test.p_value < v.alpha) != (co.p_value < v.alpha)
    })
}

/// Side-by-side comparison of two reports covering the same case.
pub fn compare_reports(a: &AuditReport, b: &AuditReport) -> Result<String, ReporterError> {
    let cases_a: Vec<CaseSelector> = a.verdicts.iter().map(|v| v.case).collect();
    let cases_b: Vec<CaseSelector> = b.verdicts.iter().map(|v| v.case).collect();
    if cases_a != cases_b {
        return Err(ReporterError::IncompatibleCases);
    }
    let mut out = String::new();
    out.push_str("REPORT COMPARISON\n");
    out.push_str(&format!("  A: {} (platform {})\n", a.report_id, a.platform_hash));
    out.push_str(&format!("  B: {} (platform {})\n\n", b.report_id, b.platform_hash));
    out.push_str("  case                    verdict A        verdict B        p A        p B       effect A   effect B\n");
    let mut differences = 0;
    for (va, vb) in a.verdicts.iter().zip(&b.verdicts) {
        if va.verdict != vb.verdict {
            differences += 1;
        }
        out.push_str(&format!(
            "  {:<22}  {:<15}  {:<15}  {:>9.6}  {:>9.6}  {:>9.4}  {:>9.4}\n",
            case_name(va.case),
            verdict_name(va.verdict),
            verdict_name(vb.verdict),
            va.test.p_value,
            vb.test.p_value,
            va.test.effect_size,
            vb.test.effect_size
        ));
        for (tag, v) in [("A", va), ("B", vb)] {
            if metric_disagreement(v) {
                out.push_str(&format!(
                    "    metric-dependency warning [{}]: the per-user {} test and the \
                     impression-level co-metric disagree at alpha={}\n",
                    tag, v.test.method, v.alpha
                ));
            }
        }
    }
    out.push_str(&format!("\n  differing verdicts: {differences}\n"));
    Ok(out)
}
