//! Turn exposure logs into per-provision verdicts.
//!
//! Three case evaluators cover the audited provisions: profiling-based
//! ads shown to minors, effectiveness of the non-profiling option, and ad
//! targeting from sensitive categories. The primary instrument is a
//! permutation test on per-user rates; an impression-level two-proportion
//! z-test is co-reported on every verdict so that metric disagreements
//! are visible rather than silent.
//!
//! The minors decision rule is deliberately asymmetric: absence of a
//! statistically significant reduction for minors is treated as evidence
//! that profiling is applied to them. A non-inferiority margin can be
//! configured to tighten that rule.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{run_audit, ExposureLog, Impression, SimPlatformAdapter};
use crate::platform::{HonorMode, PlatformConfig, SlotKind};
use crate::scenario::{AuditPlan, CaseSelector, DecisionRuleConfig, TestMethod, UserProfile};
use crate::seeding::derive_seed;
use crate::stats::{
    exact_permutation_test, permutation_test, sign_flip_test, two_proportion_test, StatsError,
    Tail, TestResult,
};

/// A toggled run counts as fully effective when the post-toggle matched
/// content rate sits within this distance of the no-profiling base rate.
pub const PLATEAU_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Compliant,
    NonCompliant,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub cohort_label: String,
    pub n_users: u32,
    pub n_ad_impressions: u64,
    pub n_matched_ad_impressions: u64,
    /// Matched-ad fraction per user, for users with at least one ad
    /// impression, in user-id order.
    pub per_user_rates: Vec<f64>,
    pub content_matched_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub window_index: u32,
    pub day_start: u32,
    pub day_end: u32,
    pub test: TestResult,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseVerdict {
    pub case: CaseSelector,
    pub verdict: Verdict,
    pub test: TestResult,
    /// Alternative metrics computed on the same log, keyed by metric name.
    pub co_tests: BTreeMap<String, TestResult>,
    pub group_stats: Vec<GroupStats>,
    pub windows: Option<Vec<WindowResult>>,
    pub rule_applied: String,
    pub annotation: Option<String>,
    /// Significance level the verdict was decided at.
    pub alpha: f64,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("exposure log is empty")]
    EmptyLog,
    #[error("log references user '{0}' absent from the supplied profiles")]
    UnknownUser(String),
    #[error("cohort structure unusable for this case: {0}")]
    CohortStructure(String),
    #[error("log carries no toggle day; the control-effectiveness case needs a two-phase run")]
    MissingPhaseMarker,
    #[error("window of {window} days does not fit a {duration}-day log")]
    WindowBound { window: u32, duration: u32 },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("simulation failed during sweep: {0}")]
    Sweep(String),
}

struct UserCounts {
    ads: u64,
    matched_ads: u64,
    content: u64,
    matched_content: u64,
    target_tagged_ads: u64,
}

fn count_per_user<'a, I>(records: I, target_category: Option<&str>) -> BTreeMap<String, UserCounts>
where
    I: IntoIterator<Item = &'a Impression>,
{
    let mut counts: BTreeMap<String, UserCounts> = BTreeMap::new();
    for r in records {
        let c = counts.entry(r.user_id.clone()).or_insert(UserCounts {
            ads: 0,
            matched_ads: 0,
            content: 0,
            matched_content: 0,
            target_tagged_ads: 0,
        });
        match r.kind {
            SlotKind::Ad => {
                c.ads += 1;
                if r.matched_interest {
                    c.matched_ads += 1;
                }
                if let Some(cat) = target_category {
                    if r.sensitive_tags.iter().any(|t| t == cat) {
                        c.target_tagged_ads += 1;
                    }
                }
            }
            SlotKind::Content => {
                c.content += 1;
                if r.matched_interest {
                    c.matched_content += 1;
                }
            }
        }
    }
    counts
}

fn cohorts_of(profiles: &[UserProfile]) -> BTreeMap<String, Vec<&UserProfile>> {
    let mut map: BTreeMap<String, Vec<&UserProfile>> = BTreeMap::new();
    for p in profiles {
        map.entry(p.cohort_label.clone()).or_default().push(p);
    }
    map
}

fn group_stats_for(
    label: &str,
    members: &[&UserProfile],
    counts: &BTreeMap<String, UserCounts>,
) -> GroupStats {
    let mut n_ads = 0u64;
    let mut n_matched = 0u64;
    let mut content = 0u64;
    let mut matched_content = 0u64;
    let mut per_user_rates = Vec::new();
    for p in members {
        if let Some(c) = counts.get(&p.user_id) {
            n_ads += c.ads;
            n_matched += c.matched_ads;
            content += c.content;
            matched_content += c.matched_content;
            if c.ads > 0 {
                per_user_rates.push(c.matched_ads as f64 / c.ads as f64);
            }
        }
    }
    GroupStats {
        cohort_label: label.to_string(),
        n_users: members.len() as u32,
        n_ad_impressions: n_ads,
        n_matched_ad_impressions: n_matched,
        per_user_rates,
        content_matched_rate: if content > 0 {
            matched_content as f64 / content as f64
        } else {
            0.0
        },
    }
}

fn check_log(log: &ExposureLog, profiles: &[UserProfile]) -> Result<(), EvalError> {
    if log.records.is_empty() {
        return Err(EvalError::EmptyLog);
    }
    let known: BTreeSet<&str> = profiles.iter().map(|p| p.user_id.as_str()).collect();
    for r in &log.records {
        if !known.contains(r.user_id.as_str()) {
            return Err(EvalError::UnknownUser(r.user_id.clone()));
        }
    }
    Ok(())
}

/// Per-cohort exposure statistics, in cohort-label order.
pub fn personalization_rate(
    log: &ExposureLog,
    profiles: &[UserProfile],
) -> Result<Vec<GroupStats>, EvalError> {
    check_log(log, profiles)?;
    let counts = count_per_user(&log.records, None);
    Ok(cohorts_of(profiles)
        .iter()
        .map(|(label, members)| group_stats_for(label, members, &counts))
        .collect())
}

fn two_sample_test(
    rule: &DecisionRuleConfig,
    xs: &[f64],
    ys: &[f64],
    counts: (u64, u64, u64, u64),
    tail: Tail,
    seed: u64,
) -> Result<TestResult, EvalError> {
    Ok(match rule.test_method {
        TestMethod::Permutation => permutation_test(xs, ys, rule.n_resamples, seed, tail)?,
        TestMethod::ExactPermutation => exact_permutation_test(xs, ys, tail)?,
        TestMethod::TwoProportion => {
            let (k1, n1, k2, n2) = counts;
            two_proportion_test(k1, n1, k2, n2, tail)?
        }
    })
}

fn below_floor(rule: &DecisionRuleConfig, groups: &[&GroupStats]) -> bool {
    groups
        .iter()
        .any(|g| g.n_ad_impressions < u64::from(rule.min_impressions_per_group))
}

fn identify_minors_adults<'a>(
    cohorts: &'a BTreeMap<String, Vec<&'a UserProfile>>,
) -> Result<(&'a str, &'a str), EvalError> {
    if cohorts.len() != 2 {
        return Err(EvalError::CohortStructure(format!(
            "expected exactly two cohorts, found {}",
            cohorts.len()
        )));
    }
    let mut minors = None;
    let mut adults = None;
    for (label, members) in cohorts {
        if members.iter().all(|p| p.declared_age < 18) {
            minors = Some(label.as_str());
        } else if members.iter().all(|p| p.declared_age >= 18) {
            adults = Some(label.as_str());
        }
    }
    match (minors, adults) {
        (Some(m), Some(a)) => Ok((m, a)),
        _ => Err(EvalError::CohortStructure(
            "could not identify one all-minor and one all-adult cohort by declared age".into(),
        )),
    }
}

/// Minors-profiling case. H1: minors' matched-ad rate is lower than
/// adults'. Following the audited decision rule, a significant reduction
/// means minors are exempt from ad profiling (compliant); anything short
/// of significance is treated as profiling (non-compliant).
pub fn evaluate_minors_case(
    log: &ExposureLog,
    profiles: &[UserProfile],
    rule: &DecisionRuleConfig,
) -> Result<CaseVerdict, EvalError> {
    check_log(log, profiles)?;
    let cohorts = cohorts_of(profiles);
    let (minors_label, adults_label) = identify_minors_adults(&cohorts)?;
    let counts = count_per_user(&log.records, None);
    let minors = group_stats_for(minors_label, &cohorts[minors_label], &counts);
    let adults = group_stats_for(adults_label, &cohorts[adults_label], &counts);
    let seed = derive_seed(log.header.seed, "evaluate-minors", 0);

    // optional non-inferiority margin: require minors lower by more than
    // the margin, not merely lower
    let margin = rule.noninferiority_margin.unwrap_or(0.0);
    let shifted: Vec<f64> = minors.per_user_rates.iter().map(|r| r + margin).collect();
    let test = two_sample_test(
        rule,
        &shifted,
        &adults.per_user_rates,
        (
            minors.n_matched_ad_impressions,
            minors.n_ad_impressions.max(1),
            adults.n_matched_ad_impressions,
            adults.n_ad_impressions.max(1),
        ),
        Tail::Lower,
        seed,
    )?;

    let mut co_tests = BTreeMap::new();
    if !minors.per_user_rates.is_empty() && !adults.per_user_rates.is_empty() {
        co_tests.insert(
            "permutation_per_user_rates".to_string(),
            permutation_test(
                &minors.per_user_rates,
                &adults.per_user_rates,
                rule.n_resamples,
                seed,
                Tail::Lower,
            )?,
        );
    }
    if minors.n_ad_impressions > 0 && adults.n_ad_impressions > 0 {
        co_tests.insert(
            "two_proportion_impressions".to_string(),
            two_proportion_test(
                minors.n_matched_ad_impressions,
                minors.n_ad_impressions,
                adults.n_matched_ad_impressions,
                adults.n_ad_impressions,
                Tail::Lower,
            )?,
        );
    }

    let verdict = if below_floor(rule, &[&minors, &adults]) {
        Verdict::Inconclusive
    } else if test.p_value < rule.alpha {
        Verdict::Compliant
    } else {
        Verdict::NonCompliant
    };
    let rule_applied = format!(
        "Art. 28(2): one-sided test (minors < adults) on per-user matched-ad rates at \
         alpha={}; absence of a significantly lower rate for minors is read as profiling \
         of minors; impression floor {} per group; margin {}",
        rule.alpha, rule.min_impressions_per_group, margin
    );
    Ok(CaseVerdict {
        case: CaseSelector::MinorsProfiling,
        verdict,
        test,
        co_tests,
        group_stats: vec![minors, adults],
        windows: None,
        rule_applied,
        annotation: None,
        alpha: rule.alpha,
    })
}

/// Base matched-content rate expected without any profiling, estimated
/// from the declared profiles alone: mean share of the observed topic
/// universe that each user is interested in.
fn base_match_rate(profiles: &[UserProfile]) -> f64 {
    let universe: BTreeSet<&str> = profiles
        .iter()
        .flat_map(|p| p.interests.iter().map(|s| s.as_str()))
        .collect();
    if universe.is_empty() || profiles.is_empty() {
        return 0.0;
    }
    profiles
        .iter()
        .map(|p| p.interests.len() as f64 / universe.len() as f64)
        .sum::<f64>()
        / profiles.len() as f64
}

/// Control-effectiveness case for the non-profiling option. Paired
/// contrast of each user's matched-content rate after minus before the
/// toggle; H1: the rate drops. A significant drop that lands near the
/// no-profiling base rate is a working control; a significant drop that
/// plateaus above it is a partial effect and still non-compliant.
pub fn evaluate_toggle_case(
    log: &ExposureLog,
    profiles: &[UserProfile],
    rule: &DecisionRuleConfig,
) -> Result<CaseVerdict, EvalError> {
    check_log(log, profiles)?;
    let toggle_day = log.header.toggle_day.ok_or(EvalError::MissingPhaseMarker)?;
    let phase1: Vec<&Impression> = log.records.iter().filter(|r| r.day < toggle_day).collect();
    let phase2: Vec<&Impression> = log.records.iter().filter(|r| r.day >= toggle_day).collect();
    let counts1 = count_per_user(phase1.iter().copied(), None);
    let counts2 = count_per_user(phase2.iter().copied(), None);

    let mut diffs = Vec::new();
    let mut phase2_rates = Vec::new();
    for p in profiles {
        let (Some(c1), Some(c2)) = (counts1.get(&p.user_id), counts2.get(&p.user_id)) else {
            continue;
        };
        if c1.content == 0 || c2.content == 0 {
            continue;
        }
        let r1 = c1.matched_content as f64 / c1.content as f64;
        let r2 = c2.matched_content as f64 / c2.content as f64;
        diffs.push(r2 - r1);
        phase2_rates.push(r2);
    }
    if diffs.is_empty() {
        return Err(EvalError::EmptyLog);
    }

    let cohorts = cohorts_of(profiles);
    let mut group_stats = Vec::new();
    for (label, members) in &cohorts {
        group_stats.push(group_stats_for(
            &format!("{label}@phase1"),
            members,
            &counts1,
        ));
        group_stats.push(group_stats_for(
            &format!("{label}@phase2"),
            members,
            &counts2,
        ));
    }

    let seed = derive_seed(log.header.seed, "evaluate-toggle", 0);
    let test = sign_flip_test(&diffs, rule.n_resamples, seed, Tail::Lower)?;
    let mut co_tests = BTreeMap::new();
    let (mc1, c1): (u64, u64) = counts1.values().map(|c| (c.matched_content, c.content)).fold(
        (0, 0),
        |acc, x| (acc.0 + x.0, acc.1 + x.1),
    );
    let (mc2, c2): (u64, u64) = counts2.values().map(|c| (c.matched_content, c.content)).fold(
        (0, 0),
        |acc, x| (acc.0 + x.0, acc.1 + x.1),
    );
    if c1 > 0 && c2 > 0 {
        co_tests.insert(
            "two_proportion_impressions".to_string(),
            two_proportion_test(mc2, c2, mc1, c1, Tail::Lower)?,
        );
    }

    let base = base_match_rate(profiles);
    let phase2_mean = phase2_rates.iter().sum::<f64>() / phase2_rates.len() as f64;
    let significant_drop = test.p_value < rule.alpha;
    let reaches_base = phase2_mean <= base + PLATEAU_TOLERANCE;

    let groups: Vec<&GroupStats> = group_stats.iter().collect();
    let (verdict, annotation) = if below_floor(rule, &groups) {
        (Verdict::Inconclusive, None)
    } else if significant_drop && reaches_base {
        (Verdict::Compliant, None)
    } else if significant_drop {
        (Verdict::NonCompliant, Some("partial effect".to_string()))
    } else {
        (Verdict::NonCompliant, None)
    };
    let rule_applied = format!(
        "Art. 27(3)/38: paired sign-flip test (post-toggle matched-content rate < \
         pre-toggle) at alpha={}; effective control must also return the rate to within \
         {} of the no-profiling base rate {:.3}; impression floor {} per group",
        rule.alpha, PLATEAU_TOLERANCE, base, rule.min_impressions_per_group
    );
    Ok(CaseVerdict {
        case: CaseSelector::ControlEffectiveness,
        verdict,
        test,
        co_tests,
        group_stats,
        windows: None,
        rule_applied,
        annotation,
        alpha: rule.alpha,
    })
}

fn identify_sensitive_pair<'a>(
    cohorts: &'a BTreeMap<String, Vec<&'a UserProfile>>,
) -> Result<(&'a str, &'a str, String), EvalError> {
    if cohorts.len() != 2 {
        return Err(EvalError::CohortStructure(format!(
            "expected a sensitive cohort and a control cohort, found {} cohorts",
            cohorts.len()
        )));
    }
    let mut sensitive = None;
    let mut control = None;
    for (label, members) in cohorts {
        let categories: BTreeSet<&str> = members
            .iter()
            .filter_map(|p| p.sensitive_interest.as_deref())
            .collect();
        if categories.len() == 1 && members.iter().all(|p| p.sensitive_interest.is_some()) {
            sensitive = Some((label.as_str(), categories.iter().next().unwrap().to_string()));
        } else if categories.is_empty() {
            control = Some(label.as_str());
        }
    }
    match (sensitive, control) {
        (Some((s, cat)), Some(c)) => Ok((s, c, cat)),
        _ => Err(EvalError::CohortStructure(
            "need one cohort with a uniform declared sensitive interest and one without".into(),
        )),
    }
}

/// Sensitive-targeting case. Both cohorts' rate of ads tagged with the
/// sensitive cohort's declared category is compared; H1: the sensitive
/// cohort sees more of them. Significant elevation means the declared
/// category leaks into ad selection.
pub fn evaluate_sensitive_case(
    log: &ExposureLog,
    profiles: &[UserProfile],
    rule: &DecisionRuleConfig,
) -> Result<CaseVerdict, EvalError> {
    check_log(log, profiles)?;
    let cohorts = cohorts_of(profiles);
    let (sens_label, ctrl_label, category) = identify_sensitive_pair(&cohorts)?;
    let counts = count_per_user(&log.records, Some(&category));

    let rate_vec = |label: &str| -> (Vec<f64>, u64, u64) {
        let mut rates = Vec::new();
        let mut tagged = 0;
        let mut ads = 0;
        for p in &cohorts[label] {
            if let Some(c) = counts.get(&p.user_id) {
                if c.ads > 0 {
                    rates.push(c.target_tagged_ads as f64 / c.ads as f64);
                }
                tagged += c.target_tagged_ads;
                ads += c.ads;
            }
        }
        (rates, tagged, ads)
    };
    let (sens_rates, sens_tagged, sens_ads) = rate_vec(sens_label);
    let (ctrl_rates, ctrl_tagged, ctrl_ads) = rate_vec(ctrl_label);
    let seed = derive_seed(log.header.seed, "evaluate-sensitive", 0);
    let test = two_sample_test(
        rule,
        &sens_rates,
        &ctrl_rates,
        (sens_tagged, sens_ads.max(1), ctrl_tagged, ctrl_ads.max(1)),
        Tail::Upper,
        seed,
    )?;
    let mut co_tests = BTreeMap::new();
    if sens_ads > 0 && ctrl_ads > 0 {
        co_tests.insert(
            "two_proportion_impressions".to_string(),
            two_proportion_test(sens_tagged, sens_ads, ctrl_tagged, ctrl_ads, Tail::Upper)?,
        );
    }

    let sens_stats = group_stats_for(sens_label, &cohorts[sens_label], &counts);
    let ctrl_stats = group_stats_for(ctrl_label, &cohorts[ctrl_label], &counts);
    let verdict = if below_floor(rule, &[&sens_stats, &ctrl_stats]) {
        Verdict::Inconclusive
    } else if test.p_value < rule.alpha {
        Verdict::NonCompliant
    } else {
        Verdict::Compliant
    };
    let rule_applied = format!(
        "Art. 26(3): one-sided test (sensitive cohort > control) on per-user rates of ads \
         tagged '{category}' at alpha={}; significant elevation means the declared \
         sensitive characteristic is used for ad targeting; impression floor {} per group",
        rule.alpha, rule.min_impressions_per_group
    );
    Ok(CaseVerdict {
        case: CaseSelector::SensitiveTargeting,
        verdict,
        test,
        co_tests,
        group_stats: vec![sens_stats, ctrl_stats],
        windows: None,
        rule_applied,
        annotation: None,
        alpha: rule.alpha,
    })
}

/// Dispatch on the plan's case selector.
pub fn evaluate_case(
    case: CaseSelector,
    log: &ExposureLog,
    profiles: &[UserProfile],
    rule: &DecisionRuleConfig,
) -> Result<CaseVerdict, EvalError> {
    match case {
        CaseSelector::MinorsProfiling => evaluate_minors_case(log, profiles, rule),
        CaseSelector::ControlEffectiveness => evaluate_toggle_case(log, profiles, rule),
        CaseSelector::SensitiveTargeting => evaluate_sensitive_case(log, profiles, rule),
    }
}

/// Recompute the case's test on non-overlapping day windows, localizing
/// behaviour changes that a single end-of-run test averages away.
///
/// For the two-cohort cases each window is evaluated like a miniature
/// run. For the toggle case each later window is paired against the
/// first window, so a mid-run behaviour change shows up as a drop
/// relative to the opening window.
pub fn windowed_analysis(
    log: &ExposureLog,
    profiles: &[UserProfile],
    window_days: u32,
    case: CaseSelector,
    rule: &DecisionRuleConfig,
) -> Result<Vec<WindowResult>, EvalError> {
    check_log(log, profiles)?;
    let duration = log.records.iter().map(|r| r.day).max().unwrap_or(0);
    if window_days == 0 || window_days > duration {
        return Err(EvalError::WindowBound {
            window: window_days,
            duration,
        });
    }
    let mut results = Vec::new();
    let mut start = 1u32;
    let mut index = 0u32;
    // per-user rates in the first window, for the paired toggle contrast
    let first_window_counts = count_per_user(
        log.records
            .iter()
            .filter(|r| r.day >= 1 && r.day < 1 + window_days),
        None,
    );
    while start <= duration {
        let end = (start + window_days - 1).min(duration);
        let slice: Vec<Impression> = log
            .records
            .iter()
            .filter(|r| r.day >= start && r.day <= end)
            .cloned()
            .collect();
        if slice.is_empty() {
            start = end + 1;
            index += 1;
            continue;
        }
        let sub = ExposureLog {
            header: log.header.clone(),
            records: slice,
        };
        let (test, verdict) = match case {
            CaseSelector::MinorsProfiling => {
                let v = evaluate_minors_case(&sub, profiles, rule)?;
                (v.test, v.verdict)
            }
            CaseSelector::SensitiveTargeting => {
                let v = evaluate_sensitive_case(&sub, profiles, rule)?;
                (v.test, v.verdict)
            }
            CaseSelector::ControlEffectiveness => {
                let window_counts = count_per_user(sub.records.iter(), None);
                let mut diffs = Vec::new();
                for p in profiles {
                    let (Some(c1), Some(cw)) = (
                        first_window_counts.get(&p.user_id),
                        window_counts.get(&p.user_id),
                    ) else {
                        continue;
                    };
                    if c1.content == 0 || cw.content == 0 {
                        continue;
                    }
                    diffs.push(
                        cw.matched_content as f64 / cw.content as f64
                            - c1.matched_content as f64 / c1.content as f64,
                    );
                }
                if diffs.is_empty() {
                    return Err(EvalError::EmptyLog);
                }
                let seed = derive_seed(log.header.seed, "evaluate-toggle-window", index.into());
                let test = sign_flip_test(&diffs, rule.n_resamples, seed, Tail::Lower)?;
                let verdict = if test.p_value < rule.alpha {
                    Verdict::Compliant
                } else {
                    Verdict::NonCompliant
                };
                (test, verdict)
            }
        };
        results.push(WindowResult {
            window_index: index,
            day_start: start,
            day_end: end,
            test,
            verdict,
        });
        start = end + 1;
        index += 1;
    }
    Ok(results)
}

/// Grid axes for `power_sweep`, loadable from a small configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub w_match: Vec<f64>,
    pub cohort_size: Vec<u32>,
    pub duration_days: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub w_match: f64,
    pub cohort_size: u32,
    pub duration_days: u32,
    pub runs: u32,
    /// Fraction of runs on the effect-bearing platform where the case's
    /// primary test is significant.
    pub power: f64,
    pub power_se: f64,
    /// Same fraction on the matched null platform.
    pub false_positive_rate: f64,
    pub false_positive_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub cells: Vec<PowerCell>,
}

/// The platform pair a case discriminates between: the arm whose contrast
/// the primary test should detect, and the matched null arm.
fn arm_configs(case: CaseSelector, base: &PlatformConfig, w: f64) -> (PlatformConfig, PlatformConfig) {
    let mut effect = base.clone();
    let mut null = base.clone();
    effect.profiling_weight = w;
    null.profiling_weight = w;
    match case {
        CaseSelector::MinorsProfiling => {
            effect.minor_ad_profiling = false;
            null.minor_ad_profiling = true;
        }
        CaseSelector::ControlEffectiveness => {
            effect.honor_nonprofiling_option = HonorMode::Full;
            null.honor_nonprofiling_option = HonorMode::None;
        }
        CaseSelector::SensitiveTargeting => {
            effect.sensitive_targeting_enabled = true;
            null.sensitive_targeting_enabled = false;
        }
    }
    (effect, null)
}

/// Estimate the harness's detection power and false-positive rate over a
/// grid of effect sizes and scenario scales. Power here is the rate at
/// which the case's primary test comes out significant; for the minors
/// case the verdict itself inverts significance, so the significance rate
/// is the quantity that actually varies with effect size.
pub fn power_sweep(
    plan: &AuditPlan,
    base_config: &PlatformConfig,
    grid: &SweepGrid,
    runs_per_cell: u32,
    seed: u64,
) -> Result<PowerCurve, EvalError> {
    let mut jobs = Vec::new();
    let mut cell_keys = Vec::new();
    for &w in &grid.w_match {
        for &size in &grid.cohort_size {
            for &days in &grid.duration_days {
                let cell = cell_keys.len();
                cell_keys.push((w, size, days));
                for run in 0..runs_per_cell {
                    jobs.push((cell, run, true));
                    jobs.push((cell, run, false));
                }
            }
        }
    }

    let outcomes: Result<Vec<(usize, bool, bool)>, EvalError> = jobs
        .par_iter()
        .map(|&(cell, run, effect_arm)| {
            let (w, size, days) = cell_keys[cell];
            let mut cell_plan = plan.clone();
            cell_plan.duration_days = days;
            for cohort in &mut cell_plan.cohorts {
                cohort.size = size;
            }
            let (effect, null) = arm_configs(plan.case, base_config, w);
            let config = if effect_arm { effect } else { null };
            let arm_tag = if effect_arm { 1 } else { 0 };
            let run_seed = derive_seed(
                seed,
                "sweep-run",
                ((cell as u64) << 24) | (u64::from(run) << 1) | arm_tag,
            );
            let mut adapter = SimPlatformAdapter::new(config)
                .map_err(|e| EvalError::Sweep(e.to_string()))?;
            let log = run_audit(&cell_plan, &mut adapter, run_seed)
                .map_err(|e| EvalError::Sweep(e.to_string()))?;
            cell_plan.seed = run_seed;
            let profiles = crate::scenario::generate_cohorts(&cell_plan);
            let verdict = evaluate_case(plan.case, &log, &profiles, &plan.decision_rule)?;
            Ok((cell, effect_arm, verdict.test.p_value < plan.decision_rule.alpha))
        })
        .collect();
    let outcomes = outcomes?;

    let mut hits = vec![(0u32, 0u32); cell_keys.len()]; // (effect hits, null hits)
    for (cell, effect_arm, significant) in outcomes {
        if significant {
            if effect_arm {
                hits[cell].0 += 1;
            } else {
                hits[cell].1 += 1;
            }
        }
    }
    let se = |p: f64| (p * (1.0 - p) / f64::from(runs_per_cell)).sqrt();
    let cells = cell_keys
        .iter()
        .zip(hits)
        .map(|(&(w, size, days), (eh, nh))| {
            let power = f64::from(eh) / f64::from(runs_per_cell);
            let fp = f64::from(nh) / f64::from(runs_per_cell);
            PowerCell {
                w_match: w,
                cohort_size: size,
                duration_days: days,
                runs: runs_per_cell,
                power,
                power_se: se(power),
                false_positive_rate: fp,
                false_positive_se: se(fp),
            }
        })
        .collect();
    Ok(PowerCurve { cells })
}

/// Delimiter-separated export for plotting.
pub fn power_curve_csv(curve: &PowerCurve) -> String {
    let mut out = String::from(
        "w_match,cohort_size,duration_days,runs,power,power_se,false_positive_rate,false_positive_se\n",
    );
    for c in &curve.cells {
        out.push_str(&format!(
            "{},{},{},{},{:.4},{:.4},{:.4},{:.4}\n",
            c.w_match,
            c.cohort_size,
            c.duration_days,
            c.runs,
            c.power,
            c.power_se,
            c.false_positive_rate,
            c.false_positive_se
        ));
    }
    out
}
