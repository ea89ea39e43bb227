//! Audit scenario handling: plan files, validation, and deterministic
//! materialization of synthetic user cohorts and session schedules.
//!
//! A plan file is TOML with scalar keys first and repeated `[[cohort]]`
//! blocks:
//!
//! ```toml
//! plan_id = "minors-profiling-example"
//! seed = 42
//! duration_days = 20
//! sessions_per_day = 1
//! session_budget = 40
//! bootstrap_interactions = 10
//! topics = ["beauty", "gaming", "fitness"]
//! case = "minors_profiling"
//!
//! [decision_rule]
//! test_method = "permutation"
//! alpha = 0.05
//! sidedness = "one_sided_lower"
//! n_resamples = 10000
//! min_impressions_per_group = 100
//!
//! [[cohort]]
//! label = "minors"
//! size = 30
//! age_range = [14, 17]
//! genders = ["female", "male", "unspecified"]
//! locations = ["SK", "DE", "FR"]
//! topics = ["beauty", "gaming", "fitness"]
//! ```
//!
//! Omitted optional keys take documented defaults (see `defaults`).
//! Materialization is a pure function of the plan: identical plans yield
//! byte-identical cohorts and schedules.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::{derive_rng, derive_seed, hash_label};

/// Documented defaults for optional plan keys.
pub mod defaults {
    pub const SESSIONS_PER_DAY: u32 = 1;
    pub const SESSION_BUDGET: u32 = 40;
    pub const BOOTSTRAP_INTERACTIONS: u32 = 10;
    pub const ENGAGE_PROBABILITY: f64 = 0.8;
    pub const ALPHA: f64 = 0.05;
    pub const N_RESAMPLES: u32 = 10_000;
    pub const MIN_IMPRESSIONS_PER_GROUP: u32 = 100;
    pub const SEED: u64 = 0;
    /// Cohorts below this size are flagged as statistically underpowered.
    /// At the reference effect the sweep in `evaluator::power_sweep` drops
    /// below 0.5 detection power well before size 10.
    pub const UNDERPOWERED_COHORT_SIZE: u32 = 10;
}

/// ISO-3166 alpha-2 codes of EU member states.
pub const EU_COUNTRY_CODES: [&str; 27] = [
    "AT", "BE", "BG", "HR", "CY", "CZ", "DK", "EE", "FI", "FR", "DE", "GR", "HU", "IE", "IT",
    "LV", "LT", "LU", "MT", "NL", "PL", "PT", "RO", "SK", "SI", "ES", "SE",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Unspecified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseSelector {
    MinorsProfiling,
    ControlEffectiveness,
    SensitiveTargeting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Permutation,
    ExactPermutation,
    TwoProportion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    OneSidedLower,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRuleConfig {
    pub test_method: TestMethod,
    pub alpha: f64,
    pub sidedness: Sidedness,
    pub n_resamples: u32,
    pub min_impressions_per_group: u32,
    /// Optional non-inferiority margin on the rate difference. When set,
    /// the minors case tests H1: minors < adults - margin instead of the
    /// plain "significantly lower" rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noninferiority_margin: Option<f64>,
}

impl Default for DecisionRuleConfig {
    fn default() -> Self {
        DecisionRuleConfig {
            test_method: TestMethod::Permutation,
            alpha: defaults::ALPHA,
            sidedness: Sidedness::OneSidedLower,
            n_resamples: defaults::N_RESAMPLES,
            min_impressions_per_group: defaults::MIN_IMPRESSIONS_PER_GROUP,
            noninferiority_margin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub label: String,
    pub size: u32,
    pub age_range: (u32, u32),
    pub genders: Vec<Gender>,
    pub locations: Vec<String>,
    pub topics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitive_interest: Option<String>,
    pub engage_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditPlan {
    pub plan_id: String,
    pub seed: u64,
    pub duration_days: u32,
    pub sessions_per_day: u32,
    pub session_budget: u32,
    pub bootstrap_interactions: u32,
    pub topics: Vec<String>,
    pub case: CaseSelector,
    pub decision_rule: DecisionRuleConfig,
    #[serde(rename = "cohort")]
    pub cohorts: Vec<CohortSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub cohort_label: String,
    pub declared_age: u32,
    pub gender: Gender,
    pub location: String,
    pub interests: BTreeSet<String>,
    pub engage_probability: f64,
    pub sensitive_interest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub day: u32,
    pub session_index: u32,
    pub budget: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSchedule {
    pub user_id: String,
    pub entries: Vec<SessionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub invariant: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("plan syntax error: {0}")]
    Syntax(String),
    #[error("unknown key in plan: {0}")]
    UnknownKey(String),
    #[error("plan constraint violation [{invariant}]: {message}")]
    Constraint { invariant: String, message: String },
    #[error("plan serialization failed: {0}")]
    Serialize(String),
}

// Raw on-disk shapes: all optionals open, converted to AuditPlan with
// defaults filled in.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecisionRule {
    test_method: Option<TestMethod>,
    alpha: Option<f64>,
    sidedness: Option<Sidedness>,
    n_resamples: Option<u32>,
    min_impressions_per_group: Option<u32>,
    noninferiority_margin: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCohort {
    label: String,
    size: u32,
    age_range: (u32, u32),
    genders: Vec<Gender>,
    locations: Vec<String>,
    topics: Vec<String>,
    sensitive_interest: Option<String>,
    engage_probability: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    plan_id: String,
    seed: Option<u64>,
    duration_days: u32,
    sessions_per_day: Option<u32>,
    session_budget: Option<u32>,
    bootstrap_interactions: Option<u32>,
    topics: Vec<String>,
    case: CaseSelector,
    decision_rule: Option<RawDecisionRule>,
    #[serde(default, rename = "cohort")]
    cohorts: Vec<RawCohort>,
}

/// Parse plan text without enforcing invariants. Used by `cmd_validate`,
/// which wants to report every violation instead of failing on the first.
pub fn parse_plan_lenient(text: &str) -> Result<AuditPlan, PlanError> {
    let raw: RawPlan = toml::from_str(text).map_err(classify_toml_error)?;
    let rule = match raw.decision_rule {
        Some(r) => DecisionRuleConfig {
            test_method: r.test_method.unwrap_or(TestMethod::Permutation),
            alpha: r.alpha.unwrap_or(defaults::ALPHA),
            sidedness: r.sidedness.unwrap_or(Sidedness::OneSidedLower),
            n_resamples: r.n_resamples.unwrap_or(defaults::N_RESAMPLES),
            min_impressions_per_group: r
                .min_impressions_per_group
                .unwrap_or(defaults::MIN_IMPRESSIONS_PER_GROUP),
            noninferiority_margin: r.noninferiority_margin,
        },
        None => DecisionRuleConfig::default(),
    };
    Ok(AuditPlan {
        plan_id: raw.plan_id,
        seed: raw.seed.unwrap_or(defaults::SEED),
        duration_days: raw.duration_days,
        sessions_per_day: raw.sessions_per_day.unwrap_or(defaults::SESSIONS_PER_DAY),
        session_budget: raw.session_budget.unwrap_or(defaults::SESSION_BUDGET),
        bootstrap_interactions: raw
            .bootstrap_interactions
            .unwrap_or(defaults::BOOTSTRAP_INTERACTIONS),
        topics: raw.topics,
        case: raw.case,
        decision_rule: rule,
        cohorts: raw
            .cohorts
            .into_iter()
            .map(|c| CohortSpec {
                label: c.label,
                size: c.size,
                age_range: c.age_range,
                genders: c.genders,
                locations: c.locations,
                topics: c.topics,
                sensitive_interest: c.sensitive_interest,
                engage_probability: c.engage_probability.unwrap_or(defaults::ENGAGE_PROBABILITY),
            })
            .collect(),
    })
}

/// Parse plan text and enforce all plan invariants.
pub fn parse_plan(text: &str) -> Result<AuditPlan, PlanError> {
    let plan = parse_plan_lenient(text)?;
    let report = validate_plan(&plan);
    if let Some(v) = report.violations.first() {
        return Err(PlanError::Constraint {
            invariant: v.invariant.clone(),
            message: v.message.clone(),
        });
    }
    Ok(plan)
}

/// Whether the plan text explicitly sets a seed (used for CLI seed
/// precedence: flag > plan file > environment).
pub fn plan_declares_seed(text: &str) -> bool {
    toml::from_str::<toml::Value>(text)
        .map(|v| v.get("seed").is_some())
        .unwrap_or(false)
}

/// Serialize a plan back to the on-disk format. Reparsing the output
/// yields an equal plan.
pub fn plan_to_text(plan: &AuditPlan) -> Result<String, PlanError> {
    toml::to_string(plan).map_err(|e| PlanError::Serialize(e.to_string()))
}

fn classify_toml_error(e: toml::de::Error) -> PlanError {
    let msg = e.to_string();
    if msg.contains("unknown field") {
        PlanError::UnknownKey(msg)
    } else {
        PlanError::Syntax(msg)
    }
}

/// Check every plan and cohort invariant; violations are data, not errors.
pub fn validate_plan(plan: &AuditPlan) -> ValidationReport {
    let mut report = ValidationReport::default();
    let add = |list: &mut Vec<Violation>, invariant: &str, message: String| {
        list.push(Violation {
            invariant: invariant.to_string(),
            message,
        });
    };

    if plan.cohorts.is_empty() {
        add(
            &mut report.violations,
            "cohorts_nonempty",
            "plan must declare at least one cohort".into(),
        );
    }
    if plan.duration_days < 1 {
        add(
            &mut report.violations,
            "duration_days_positive",
            "duration_days must be >= 1".into(),
        );
    }
    if plan.sessions_per_day < 1 {
        add(
            &mut report.violations,
            "sessions_per_day_positive",
            "sessions_per_day must be >= 1".into(),
        );
    }
    if plan.session_budget < 1 {
        add(
            &mut report.violations,
            "session_budget_positive",
            "session_budget must be >= 1".into(),
        );
    }

    let rule = &plan.decision_rule;
    if !(rule.alpha > 0.0 && rule.alpha < 1.0) {
        add(
            &mut report.violations,
            "alpha_range",
            format!("alpha must lie in (0,1), got {}", rule.alpha),
        );
    }
    if rule.test_method == TestMethod::Permutation && rule.n_resamples < 1000 {
        add(
            &mut report.violations,
            "n_resamples_floor",
            format!(
                "n_resamples must be >= 1000 for the permutation method, got {}",
                rule.n_resamples
            ),
        );
    }
    if rule.min_impressions_per_group < 1 {
        add(
            &mut report.violations,
            "min_impressions_positive",
            "min_impressions_per_group must be >= 1".into(),
        );
    }

    let plan_topics: BTreeSet<&str> = plan.topics.iter().map(String::as_str).collect();
    for cohort in &plan.cohorts {
        let c = cohort.label.as_str();
        if cohort.size < 1 {
            add(
                &mut report.violations,
                "cohort_size_positive",
                format!("cohort '{c}' has size 0"),
            );
        }
        if cohort.age_range.0 > cohort.age_range.1 {
            add(
                &mut report.violations,
                "age_range_order",
                format!(
                    "cohort '{c}' age range {:?} has low > high",
                    cohort.age_range
                ),
            );
        }
        if cohort.genders.is_empty() {
            add(
                &mut report.violations,
                "genders_nonempty",
                format!("cohort '{c}' lists no genders"),
            );
        }
        if cohort.locations.is_empty() {
            add(
                &mut report.violations,
                "locations_nonempty",
                format!("cohort '{c}' lists no locations"),
            );
        }
        for loc in &cohort.locations {
            if !EU_COUNTRY_CODES.contains(&loc.as_str()) {
                add(
                    &mut report.violations,
                    "locations_eu",
                    format!("cohort '{c}' location '{loc}' is not an EU country code"),
                );
            }
        }
        if cohort.topics.is_empty() {
            add(
                &mut report.violations,
                "cohort_topics_nonempty",
                format!("cohort '{c}' lists no topics"),
            );
        }
        for t in &cohort.topics {
            if !plan_topics.contains(t.as_str()) {
                add(
                    &mut report.violations,
                    "cohort_topics_subset",
                    format!("cohort '{c}' topic '{t}' is not in the plan topic list"),
                );
            }
        }
        if !(0.0..=1.0).contains(&cohort.engage_probability) {
            add(
                &mut report.violations,
                "engage_probability_range",
                format!(
                    "cohort '{c}' engage_probability {} outside [0,1]",
                    cohort.engage_probability
                ),
            );
        }
        if cohort.size < defaults::UNDERPOWERED_COHORT_SIZE {
            add(
                &mut report.warnings,
                "underpowered_cohort",
                format!(
                    "cohort '{c}' size {} is below {}; detection power at the reference \
                     effect falls under 0.5",
                    cohort.size,
                    defaults::UNDERPOWERED_COHORT_SIZE
                ),
            );
        }
    }

    match plan.case {
        CaseSelector::MinorsProfiling => {
            if plan.cohorts.len() != 2 {
                add(
                    &mut report.violations,
                    "minors_two_cohorts",
                    format!(
                        "minors_profiling requires exactly two cohorts, got {}",
                        plan.cohorts.len()
                    ),
                );
            } else {
                let a = &plan.cohorts[0];
                let b = &plan.cohorts[1];
                let overlap = a.age_range.0 <= b.age_range.1 && b.age_range.0 <= a.age_range.1;
                if overlap {
                    add(
                        &mut report.violations,
                        "minors_age_ranges_disjoint",
                        "cohort age ranges overlap".into(),
                    );
                }
                let minors = plan.cohorts.iter().filter(|c| c.age_range.1 < 18).count();
                let adults = plan.cohorts.iter().filter(|c| c.age_range.0 >= 18).count();
                if minors != 1 || adults != 1 {
                    add(
                        &mut report.violations,
                        "minors_cohort_identifiable",
                        "minors_profiling requires one all-minor cohort (ages < 18) and one \
                         all-adult cohort (ages >= 18)"
                            .into(),
                    );
                }
            }
        }
        CaseSelector::SensitiveTargeting => {
            let tagged = plan
                .cohorts
                .iter()
                .filter(|c| c.sensitive_interest.is_some())
                .count();
            let neutral = plan.cohorts.len() - tagged;
            if tagged != 1 || neutral == 0 {
                add(
                    &mut report.violations,
                    "sensitive_cohort_pair",
                    "sensitive_targeting requires exactly one cohort with a \
                     sensitive_interest and at least one neutral control cohort"
                        .into(),
                );
            }
        }
        CaseSelector::ControlEffectiveness => {}
    }

    // Floor reachability: budget counts watches, and each session issues at
    // most `session_budget` feed requests, so total ad exposure per group is
    // bounded. Warn when the floor cannot be met even in the best case.
    for cohort in &plan.cohorts {
        let max_interactions = u64::from(cohort.size)
            * u64::from(plan.duration_days)
            * u64::from(plan.sessions_per_day)
            * u64::from(plan.session_budget);
        if u64::from(plan.decision_rule.min_impressions_per_group) > max_interactions {
            add(
                &mut report.warnings,
                "impression_floor_unreachable",
                format!(
                    "cohort '{}' can log at most {} interactions but the inconclusiveness \
                     floor is {}",
                    cohort.label, max_interactions, plan.decision_rule.min_impressions_per_group
                ),
            );
        }
    }

    report
}

/// Deterministic user id: a function of plan seed, cohort label, and index,
/// so distinct run seeds produce distinct platform-side identities.
fn user_id_for(seed: u64, label: &str, index: u32) -> String {
    let tag = derive_seed(seed, label, u64::from(index)) & 0xffff_ffff;
    format!("{label}-{index:03}-{tag:08x}")
}

/// Repeat values round-robin to exact balance, then order by a seeded
/// shuffle. Every value appears either floor(n/v) or ceil(n/v) times.
fn balanced_assignment<T: Clone>(values: &[T], n: usize, rng: &mut impl Rng) -> Vec<T> {
    let mut out: Vec<T> = (0..n).map(|i| values[i % values.len()].clone()).collect();
    out.shuffle(rng);
    out
}

/// Materialize every cohort of a valid plan into concrete user profiles.
pub fn generate_cohorts(plan: &AuditPlan) -> Vec<UserProfile> {
    let mut profiles = Vec::new();
    for cohort in &plan.cohorts {
        let n = cohort.size as usize;
        let mut rng = derive_rng(plan.seed, "cohort", hash_label(&cohort.label));
        let topics = balanced_assignment(&cohort.topics, n, &mut rng);
        let genders = balanced_assignment(&cohort.genders, n, &mut rng);
        let locations = balanced_assignment(&cohort.locations, n, &mut rng);
        let ages: Vec<u32> = (0..n)
            .map(|_| rng.random_range(cohort.age_range.0..=cohort.age_range.1))
            .collect();
        for i in 0..n {
            profiles.push(UserProfile {
                user_id: user_id_for(plan.seed, &cohort.label, i as u32),
                cohort_label: cohort.label.clone(),
                declared_age: ages[i],
                gender: genders[i],
                location: locations[i].clone(),
                interests: BTreeSet::from([topics[i].clone()]),
                engage_probability: cohort.engage_probability,
                sensitive_interest: cohort.sensitive_interest.clone(),
            });
        }
    }
    profiles
}

/// Build per-user session schedules. Budgets are drawn uniformly from
/// [ceil(b/2), b], the "up to" reading of the per-session interaction cap.
pub fn build_schedules(plan: &AuditPlan, profiles: &[UserProfile]) -> Vec<SessionSchedule> {
    profiles
        .iter()
        .map(|p| {
            let mut rng = derive_rng(plan.seed, "schedule", hash_label(&p.user_id));
            let low = plan.session_budget.div_ceil(2);
            let mut entries = Vec::with_capacity(
                plan.duration_days as usize * plan.sessions_per_day as usize,
            );
            for day in 1..=plan.duration_days {
                for session_index in 1..=plan.sessions_per_day {
                    entries.push(SessionEntry {
                        day,
                        session_index,
                        budget: rng.random_range(low..=plan.session_budget),
                    });
                }
            }
            SessionSchedule {
                user_id: p.user_id.clone(),
                entries,
            }
        })
        .collect()
}
