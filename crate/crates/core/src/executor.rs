//! Drive bot cohorts through their schedules against a platform adapter,
//! producing a complete, replayable exposure log.
//!
//! Deterministic mode runs a single logical driver with a fixed
//! round-robin over users inside each day; every bot owns an independent
//! generator stream derived from (run seed, user id), so each user's
//! impression subsequence equals a solo run of that user.
//!
//! On disk a log is line-delimited JSON: the header on line 1, then one
//! record per line in global sequence order (`.explog`).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing::hash_of;
use crate::platform::{
    ContentItem, DeclaredProfile, Platform, PlatformConfig, PlatformError, ServedSlot, SlotKind,
};
use crate::scenario::{
    build_schedules, generate_cohorts, validate_plan, AuditPlan, CaseSelector, SessionEntry,
    UserProfile,
};
use crate::seeding::{derive_rng, hash_label};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdapterCapabilities {
    pub supports_deterministic_replay: bool,
    pub supports_day_advance: bool,
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("platform error: {0}")]
    Platform(#[from] PlatformError),
    #[error("adapter failure: {0}")]
    Other(String),
}

/// Behavioural contract a platform must satisfy to be audited.
pub trait PlatformAdapter {
    fn capabilities(&self) -> AdapterCapabilities;
    /// Stable identity string bound into log headers (for the simulator,
    /// the canonical hash of its config).
    fn identity(&self) -> String;
    fn feed_size(&self) -> u32;
    fn register_user(&mut self, declared: &DeclaredProfile) -> Result<(), AdapterError>;
    fn search(&mut self, user_id: &str, topic: &str) -> Result<Vec<ContentItem>, AdapterError>;
    fn watch(&mut self, user_id: &str, item_id: &str) -> Result<(), AdapterError>;
    fn next_feed(&mut self, user_id: &str, k: u32) -> Result<Vec<ServedSlot>, AdapterError>;
    fn set_recommender_option(
        &mut self,
        user_id: &str,
        nonprofiling: bool,
    ) -> Result<(), AdapterError>;
    fn advance_day(&mut self) -> Result<u32, AdapterError>;
}

/// In-process adapter over the simulated platform.
pub struct SimPlatformAdapter {
    platform: Platform,
    identity: String,
}

impl SimPlatformAdapter {
    pub fn new(config: PlatformConfig) -> Result<Self, PlatformError> {
        let identity = hash_of(&config);
        Ok(SimPlatformAdapter {
            platform: Platform::create(config)?,
            identity,
        })
    }

    pub fn platform(&self) -> &Platform {
        &self.platform
    }
}

impl PlatformAdapter for SimPlatformAdapter {
    fn capabilities(&self) -> AdapterCapabilities {
        AdapterCapabilities {
            supports_deterministic_replay: true,
            supports_day_advance: true,
        }
    }

    fn identity(&self) -> String {
        self.identity.clone()
    }

    fn feed_size(&self) -> u32 {
        self.platform.config().feed_size
    }

    fn register_user(&mut self, declared: &DeclaredProfile) -> Result<(), AdapterError> {
        Ok(self.platform.register_user(declared)?)
    }

    fn search(&mut self, user_id: &str, topic: &str) -> Result<Vec<ContentItem>, AdapterError> {
        Ok(self.platform.search(user_id, topic)?)
    }

    fn watch(&mut self, user_id: &str, item_id: &str) -> Result<(), AdapterError> {
        Ok(self.platform.watch(user_id, item_id)?)
    }

    fn next_feed(&mut self, user_id: &str, k: u32) -> Result<Vec<ServedSlot>, AdapterError> {
        Ok(self.platform.next_feed(user_id, k)?)
    }

    fn set_recommender_option(
        &mut self,
        user_id: &str,
        nonprofiling: bool,
    ) -> Result<(), AdapterError> {
        Ok(self.platform.set_recommender_option(user_id, nonprofiling)?)
    }

    fn advance_day(&mut self) -> Result<u32, AdapterError> {
        Ok(self.platform.advance_day()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Impression {
    pub seq: u64,
    pub run_id: String,
    pub user_id: String,
    pub cohort_label: String,
    pub day: u32,
    pub session_index: u32,
    pub slot_index: u32,
    pub kind: SlotKind,
    pub item_id: String,
    pub item_topics: Vec<String>,
    pub sensitive_tags: Vec<String>,
    pub matched_interest: bool,
    pub matched_sensitive: bool,
    pub timestamp_logical: (u32, u32, u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub run_id: String,
    pub plan_hash: String,
    pub platform_hash: String,
    pub seed: u64,
    pub tool_version: String,
    /// Day on which the non-profiling option was toggled on, for
    /// two-phase plans.
    pub toggle_day: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExposureLog {
    pub header: LogHeader,
    pub records: Vec<Impression>,
}

#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error("plan failed validation: {0}")]
    InvalidPlan(String),
    #[error("adapter lacks required capability: {0}")]
    CapabilityMismatch(String),
    #[error("adapter failed for user '{user_id}' day {day} session {session_index}: {source}")]
    Adapter {
        user_id: String,
        day: u32,
        session_index: u32,
        source: AdapterError,
    },
    #[error("log header does not match supplied inputs: {0}")]
    HashMismatch(String),
    #[error("log io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed log: {0}")]
    Malformed(String),
}

/// Per-user bot state: profile, private generator stream, and the day the
/// non-profiling option flips for two-phase plans.
pub struct BotState {
    pub profile: UserProfile,
    rng: ChaCha12Rng,
}

impl BotState {
    pub fn new(seed: u64, profile: UserProfile) -> Self {
        let rng = derive_rng(seed, "bot", hash_label(&profile.user_id));
        BotState { profile, rng }
    }
}

/// Toggle day for two-phase control-effectiveness plans: equal-length
/// phases, flip at ceil(d/2) + 1.
pub fn toggle_day_for(plan: &AuditPlan) -> Option<u32> {
    match plan.case {
        CaseSelector::ControlEffectiveness => Some(plan.duration_days.div_ceil(2) + 1),
        _ => None,
    }
}

fn run_id_for(plan_hash: &str, platform_hash: &str, seed: u64) -> String {
    let digest = hash_of(&(plan_hash, platform_hash, seed));
    format!("run-{}", &digest[..16])
}

/// Execute a full audit: registration, bootstrap, then every scheduled
/// session in (day, session, user) round-robin order.
pub fn run_audit(
    plan: &AuditPlan,
    adapter: &mut dyn PlatformAdapter,
    seed: u64,
) -> Result<ExposureLog, ExecutorError> {
    let mut plan = plan.clone();
    plan.seed = seed;
    let report = validate_plan(&plan);
    if !report.is_valid() {
        return Err(ExecutorError::InvalidPlan(
            report
                .violations
                .iter()
                .map(|v| v.invariant.clone())
                .collect::<Vec<_>>()
                .join(", "),
        ));
    }
    let profiles = generate_cohorts(&plan);
    run_audit_with_profiles(&plan, &profiles, adapter)
}

/// Executor core, split out so tests can drive hand-picked profile sets.
pub fn run_audit_with_profiles(
    plan: &AuditPlan,
    profiles: &[UserProfile],
    adapter: &mut dyn PlatformAdapter,
) -> Result<ExposureLog, ExecutorError> {
    let capabilities = adapter.capabilities();
    if plan.duration_days > 1 && !capabilities.supports_day_advance {
        return Err(ExecutorError::CapabilityMismatch(
            "plan spans multiple days but the adapter cannot advance days".into(),
        ));
    }

    let schedules = build_schedules(plan, profiles);
    let schedule_by_user: BTreeMap<&str, &[SessionEntry]> = schedules
        .iter()
        .map(|s| (s.user_id.as_str(), s.entries.as_slice()))
        .collect();

    let plan_hash = hash_of(plan);
    let platform_hash = adapter.identity();
    let run_id = run_id_for(&plan_hash, &platform_hash, plan.seed);
    let toggle_day = toggle_day_for(plan);
    let k = adapter.feed_size();

    let mut bots: Vec<BotState> = profiles
        .iter()
        .map(|p| BotState::new(plan.seed, p.clone()))
        .collect();

    fn ctx(
        user_id: &str,
        day: u32,
        session_index: u32,
    ) -> impl FnOnce(AdapterError) -> ExecutorError {
        let user_id = user_id.to_string();
        move |source| ExecutorError::Adapter {
            user_id,
            day,
            session_index,
            source,
        }
    }

    // Registration and bootstrap, in profile order.
    for bot in &mut bots {
        let p = &bot.profile;
        let declared = DeclaredProfile {
            user_id: p.user_id.clone(),
            declared_age: p.declared_age,
            gender: format!("{:?}", p.gender).to_lowercase(),
            location: p.location.clone(),
            sensitive_interest: p.sensitive_interest.clone(),
        };
        adapter
            .register_user(&declared)
            .map_err(ctx(&p.user_id, 0, 0))?;
        // warm-up: search own interest topics and watch the results
        let interests: Vec<String> = p.interests.iter().cloned().collect();
        let mut found: Vec<String> = Vec::new();
        for topic in &interests {
            let hits = adapter.search(&p.user_id, topic).map_err(ctx(&p.user_id, 0, 0))?;
            found.extend(hits.into_iter().map(|i| i.item_id));
        }
        for j in 0..plan.bootstrap_interactions as usize {
            if found.is_empty() {
                break;
            }
            let item_id = &found[j % found.len()];
            adapter.watch(&p.user_id, item_id).map_err(ctx(&p.user_id, 0, 0))?;
        }
    }

    let mut records: Vec<Impression> = Vec::new();
    let mut seq: u64 = 0;
    for day in 1..=plan.duration_days {
        if day > 1 {
            adapter.advance_day().map_err(ctx("-", day, 0))?;
        }
        if toggle_day == Some(day) {
            for bot in &bots {
                adapter
                    .set_recommender_option(&bot.profile.user_id, true)
                    .map_err(ctx(&bot.profile.user_id, day, 0))?;
            }
        }
        for session_index in 1..=plan.sessions_per_day {
            for bot in &mut bots {
                let entries = schedule_by_user
                    .get(bot.profile.user_id.as_str())
                    .expect("schedule built for every profile");
                let entry = entries
                    .iter()
                    .find(|e| e.day == day && e.session_index == session_index)
                    .expect("schedule covers every (day, session)");
                let impressions = run_session(adapter, bot, entry, k).map_err(ctx(
                    &bot.profile.user_id,
                    day,
                    session_index,
                ))?;
                for served in impressions {
                    records.push(materialize_impression(
                        seq, &run_id, &bot.profile, entry, served,
                    ));
                    seq += 1;
                }
            }
        }
    }

    Ok(ExposureLog {
        header: LogHeader {
            run_id,
            plan_hash,
            platform_hash,
            seed: plan.seed,
            tool_version: TOOL_VERSION.to_string(),
            toggle_day,
        },
        records,
    })
}

fn materialize_impression(
    seq: u64,
    run_id: &str,
    profile: &UserProfile,
    entry: &SessionEntry,
    served: ServedSlot,
) -> Impression {
    let matched_interest = served
        .topics
        .iter()
        .any(|t| profile.interests.contains(t));
    let matched_sensitive = match &profile.sensitive_interest {
        Some(cat) => served.sensitive_tags.iter().any(|c| c == cat),
        None => false,
    };
    Impression {
        seq,
        run_id: run_id.to_string(),
        user_id: profile.user_id.clone(),
        cohort_label: profile.cohort_label.clone(),
        day: entry.day,
        session_index: entry.session_index,
        slot_index: served.slot_index,
        kind: served.kind,
        item_id: served.item_id,
        item_topics: served.topics,
        sensitive_tags: served.sensitive_tags,
        matched_interest,
        matched_sensitive,
        timestamp_logical: (entry.day, entry.session_index, served.slot_index),
    }
}

/// One bot session: request feeds, log every slot, watch matched content
/// with the bot's engage probability until the interaction budget is
/// spent. Ads are never clicked. Feed requests are capped at the budget so
/// unengaged bots still terminate.
pub fn run_session(
    adapter: &mut dyn PlatformAdapter,
    bot: &mut BotState,
    entry: &SessionEntry,
    k: u32,
) -> Result<Vec<ServedSlot>, AdapterError> {
    let mut impressions = Vec::new();
    let mut watches: u32 = 0;
    let mut feeds: u32 = 0;
    while watches < entry.budget && feeds < entry.budget {
        let feed = adapter.next_feed(&bot.profile.user_id, k)?;
        feeds += 1;
        for slot in &feed {
            let matched = slot.kind == SlotKind::Content
                && slot.topics.iter().any(|t| bot.profile.interests.contains(t));
            if matched && watches < entry.budget {
                let engage = bot.profile.engage_probability > 0.0
                    && bot.rng.random::<f64>() < bot.profile.engage_probability;
                if engage {
                    adapter.watch(&bot.profile.user_id, &slot.item_id)?;
                    watches += 1;
                }
            }
        }
        impressions.extend(feed);
    }
    Ok(impressions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub matches: bool,
    pub first_divergence: Option<u64>,
}

/// Re-execute a log's run from its bound inputs and compare record by
/// record.
pub fn replay_verify(
    log: &ExposureLog,
    plan: &AuditPlan,
    config: &PlatformConfig,
) -> Result<ReplayOutcome, ExecutorError> {
    let mut plan = plan.clone();
    plan.seed = log.header.seed;
    let plan_hash = hash_of(&plan);
    if plan_hash != log.header.plan_hash {
        return Err(ExecutorError::HashMismatch(format!(
            "plan hash {} != header {}",
            plan_hash, log.header.plan_hash
        )));
    }
    let platform_hash = hash_of(config);
    if platform_hash != log.header.platform_hash {
        return Err(ExecutorError::HashMismatch(format!(
            "platform hash {} != header {}",
            platform_hash, log.header.platform_hash
        )));
    }
    let mut adapter = SimPlatformAdapter::new(config.clone())
        .map_err(|e| ExecutorError::InvalidPlan(e.to_string()))?;
    let replayed = run_audit(&plan, &mut adapter, log.header.seed)?;
    for (i, (a, b)) in log.records.iter().zip(replayed.records.iter()).enumerate() {
        if a != b {
            return Ok(ReplayOutcome {
                matches: false,
                first_divergence: Some(i as u64),
            });
        }
    }
    if log.records.len() != replayed.records.len() {
        let cut = log.records.len().min(replayed.records.len()) as u64;
        return Ok(ReplayOutcome {
            matches: false,
            first_divergence: Some(cut),
        });
    }
    Ok(ReplayOutcome {
        matches: true,
        first_divergence: None,
    })
}

/// Write a log in the line-delimited `.explog` format.
pub fn write_explog<W: Write>(log: &ExposureLog, mut out: W) -> Result<(), ExecutorError> {
    let header = serde_json::to_string(&log.header).expect("serializable header");
    writeln!(out, "{header}")?;
    for record in &log.records {
        let line = serde_json::to_string(record).expect("serializable record");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Read a `.explog` stream back.
pub fn read_explog<R: BufRead>(input: R) -> Result<ExposureLog, ExecutorError> {
    let mut lines = input.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| ExecutorError::Malformed("empty log file".into()))??;
    let header: LogHeader = serde_json::from_str(&header_line)
        .map_err(|e| ExecutorError::Malformed(format!("bad header: {e}")))?;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Impression = serde_json::from_str(&line)
            .map_err(|e| ExecutorError::Malformed(format!("bad record at line {}: {e}", i + 2)))?;
        records.push(record);
    }
    Ok(ExposureLog { header, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{
        CohortSpec, DecisionRuleConfig, Gender, Sidedness, TestMethod,
    };

    fn test_platform_config() -> PlatformConfig {
        PlatformConfig {
            catalog_size: 90,
            ad_inventory_size: 30,
            taxonomy: vec!["beauty".into(), "gaming".into(), "fitness".into()],
            sensitive_categories: vec!["health_condition".into()],
            sensitive_ad_fraction: 0.3,
            ad_slot_rate: 0.3,
            interest_learning_rate: 0.2,
            profiling_weight: 3.0,
            minor_ad_profiling: false,
            honor_nonprofiling_option: crate::platform::HonorMode::Full,
            sensitive_targeting_enabled: false,
            age_inference_enabled: false,
            minor_skewed_topic: Some("gaming".into()),
            feed_size: 5,
            seed: 7,
            drift_events: vec![],
        }
    }

    fn rule() -> DecisionRuleConfig {
        DecisionRuleConfig {
            test_method: TestMethod::Permutation,
            alpha: 0.05,
            sidedness: Sidedness::OneSidedLower,
            n_resamples: 1000,
            min_impressions_per_group: 1,
            noninferiority_margin: None,
        }
    }

    fn cohort(label: &str, size: u32, ages: (u32, u32), engage: f64) -> CohortSpec {
        CohortSpec {
            label: label.into(),
            size,
            age_range: ages,
            genders: vec![Gender::Female, Gender::Male],
            locations: vec!["SK".into(), "DE".into()],
            topics: vec!["beauty".into(), "gaming".into(), "fitness".into()],
            sensitive_interest: None,
            engage_probability: engage,
        }
    }

    fn toggle_plan(engage: f64) -> AuditPlan {
        AuditPlan {
            plan_id: "exec-test".into(),
            seed: 5,
            duration_days: 3,
            sessions_per_day: 2,
            session_budget: 1,
            bootstrap_interactions: 3,
            topics: vec!["beauty".into(), "gaming".into(), "fitness".into()],
            case: CaseSelector::ControlEffectiveness,
            decision_rule: rule(),
            cohorts: vec![cohort("toggled", 2, (18, 25), engage)],
        }
    }

    fn minors_plan() -> AuditPlan {
        let mut plan = toggle_plan(0.8);
        plan.case = CaseSelector::MinorsProfiling;
        plan.cohorts = vec![
            cohort("minors", 2, (14, 17), 0.8),
            cohort("adults", 2, (18, 25), 0.8),
        ];
        plan
    }

    struct CountingAdapter {
        inner: SimPlatformAdapter,
        watch_calls: u32,
    }

    impl PlatformAdapter for CountingAdapter {
        fn capabilities(&self) -> AdapterCapabilities {
            self.inner.capabilities()
        }
        fn identity(&self) -> String {
            self.inner.identity()
        }
        fn feed_size(&self) -> u32 {
            self.inner.feed_size()
        }
        fn register_user(&mut self, declared: &DeclaredProfile) -> Result<(), AdapterError> {
            self.inner.register_user(declared)
        }
        fn search(&mut self, user_id: &str, topic: &str) -> Result<Vec<ContentItem>, AdapterError> {
            self.inner.search(user_id, topic)
        }
        fn watch(&mut self, user_id: &str, item_id: &str) -> Result<(), AdapterError> {
            self.watch_calls += 1;
            self.inner.watch(user_id, item_id)
        }
        fn next_feed(&mut self, user_id: &str, k: u32) -> Result<Vec<ServedSlot>, AdapterError> {
            self.inner.next_feed(user_id, k)
        }
        fn set_recommender_option(
            &mut self,
            user_id: &str,
            nonprofiling: bool,
        ) -> Result<(), AdapterError> {
            self.inner.set_recommender_option(user_id, nonprofiling)
        }
        fn advance_day(&mut self) -> Result<u32, AdapterError> {
            self.inner.advance_day()
        }
    }

    #[test]
    fn engage_zero_unit_budget_logs_exact_slot_count() {
        // budget interval [ceil(1/2), 1] collapses to one feed per session,
        // and an unengaged bot never shortens a session
        let plan = toggle_plan(0.0);
        let mut adapter = SimPlatformAdapter::new(test_platform_config()).unwrap();
        let log = run_audit(&plan, &mut adapter, 5).unwrap();
        let expected = 2 * 3 * 2 * 5; // users x days x sessions x feed_size
        assert_eq!(log.records.len(), expected);
        for (i, r) in log.records.iter().enumerate() {
            assert_eq!(r.seq, i as u64);
        }
    }

    #[test]
    fn engage_zero_watches_only_during_bootstrap() {
        let plan = toggle_plan(0.0);
        let mut adapter = CountingAdapter {
            inner: SimPlatformAdapter::new(test_platform_config()).unwrap(),
            watch_calls: 0,
        };
        run_audit(&plan, &mut adapter, 5).unwrap();
        assert_eq!(
            adapter.watch_calls,
            2 * plan.bootstrap_interactions,
            "two bots, bootstrap watches only"
        );
    }

    #[test]
    fn header_binds_inputs_and_toggle_day() {
        let config = test_platform_config();
        let mut plan = minors_plan();
        let mut adapter = SimPlatformAdapter::new(config.clone()).unwrap();
        let log = run_audit(&plan, &mut adapter, 99).unwrap();
        plan.seed = 99;
        assert_eq!(log.header.plan_hash, hash_of(&plan));
        assert_eq!(log.header.platform_hash, hash_of(&config));
        assert_eq!(log.header.seed, 99);
        assert_eq!(log.header.toggle_day, None);
        assert!(log.header.run_id.starts_with("run-"));

        let mut plan = toggle_plan(0.8);
        plan.duration_days = 20;
        assert_eq!(toggle_day_for(&plan), Some(11));
        plan.duration_days = 5;
        assert_eq!(toggle_day_for(&plan), Some(4));
    }

    #[test]
    fn repeated_runs_are_byte_identical() {
        let plan = minors_plan();
        let mut bytes = Vec::new();
        for _ in 0..2 {
            let mut adapter = SimPlatformAdapter::new(test_platform_config()).unwrap();
            let log = run_audit(&plan, &mut adapter, 17).unwrap();
            let mut buf = Vec::new();
            write_explog(&log, &mut buf).unwrap();
            bytes.push(buf);
        }
        assert_eq!(bytes[0], bytes[1]);
    }

    #[test]
    fn explog_round_trips() {
        let plan = toggle_plan(0.7);
        let mut adapter = SimPlatformAdapter::new(test_platform_config()).unwrap();
        let log = run_audit(&plan, &mut adapter, 3).unwrap();
        let mut buf = Vec::new();
        write_explog(&log, &mut buf).unwrap();
        let restored = read_explog(&buf[..]).unwrap();
        assert_eq!(log, restored);
    }

    #[test]
    fn replay_verifies_own_log() {
        let plan = minors_plan();
        let config = test_platform_config();
        let mut adapter = SimPlatformAdapter::new(config.clone()).unwrap();
        let log = run_audit(&plan, &mut adapter, 12).unwrap();
        let outcome = replay_verify(&log, &plan, &config).unwrap();
        assert!(outcome.matches);
        assert_eq!(outcome.first_divergence, None);
    }

    #[test]
    fn replay_locates_a_tampered_record() {
        let plan = minors_plan();
        let config = test_platform_config();
        let mut adapter = SimPlatformAdapter::new(config.clone()).unwrap();
        let mut log = run_audit(&plan, &mut adapter, 12).unwrap();
        log.records[5].matched_interest = !log.records[5].matched_interest;
        let outcome = replay_verify(&log, &plan, &config).unwrap();
        assert!(!outcome.matches);
        assert_eq!(outcome.first_divergence, Some(5));
    }

    #[test]
    fn replay_locates_truncation() {
        let plan = minors_plan();
        let config = test_platform_config();
        let mut adapter = SimPlatformAdapter::new(config.clone()).unwrap();
        let mut log = run_audit(&plan, &mut adapter, 12).unwrap();
        let full = log.records.len();
        log.records.truncate(full - 3);
        let outcome = replay_verify(&log, &plan, &config).unwrap();
        assert!(!outcome.matches);
        assert_eq!(outcome.first_divergence, Some((full - 3) as u64));
    }

    #[test]
    fn replay_rejects_mismatched_inputs() {
        let plan = minors_plan();
        let config = test_platform_config();
        let mut adapter = SimPlatformAdapter::new(config.clone()).unwrap();
        let log = run_audit(&plan, &mut adapter, 12).unwrap();

        let mut other_plan = plan.clone();
        other_plan.session_budget = 2;
        assert!(matches!(
            replay_verify(&log, &other_plan, &config),
            Err(ExecutorError::HashMismatch(_))
        ));
        let mut other_config = config.clone();
        other_config.seed = 8;
        assert!(matches!(
            replay_verify(&log, &plan, &other_config),
            Err(ExecutorError::HashMismatch(_))
        ));
    }

    #[test]
    fn invalid_plan_is_refused() {
        let mut plan = toggle_plan(0.5);
        plan.cohorts.clear();
        let mut adapter = SimPlatformAdapter::new(test_platform_config()).unwrap();
        assert!(matches!(
            run_audit(&plan, &mut adapter, 1),
            Err(ExecutorError::InvalidPlan(_))
        ));
    }

    #[test]
    fn user_trace_is_independent_of_cohort_peers() {
        let mut plan = minors_plan();
        plan.seed = 21;
        let profiles = generate_cohorts(&plan);
        let mut full_adapter = SimPlatformAdapter::new(test_platform_config()).unwrap();
        let full = run_audit_with_profiles(&plan, &profiles, &mut full_adapter).unwrap();

        let solo_profiles = vec![profiles[1].clone()];
        let target = solo_profiles[0].user_id.clone();
        let mut solo_adapter = SimPlatformAdapter::new(test_platform_config()).unwrap();
        let solo = run_audit_with_profiles(&plan, &solo_profiles, &mut solo_adapter).unwrap();

        let full_trace: Vec<&Impression> = full
            .records
            .iter()
            .filter(|r| r.user_id == target)
            .collect();
        assert_eq!(full_trace.len(), solo.records.len());
        for (a, b) in full_trace.iter().zip(solo.records.iter()) {
            assert_eq!(a.item_id, b.item_id);
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.timestamp_logical, b.timestamp_logical);
            assert_eq!(a.matched_interest, b.matched_interest);
        }
    }

    #[test]
    fn matched_flags_recompute_from_profiles() {
        let mut plan = minors_plan();
        plan.seed = 4;
        plan.cohorts[0].sensitive_interest = None;
        let profiles = generate_cohorts(&plan);
        let mut adapter = SimPlatformAdapter::new(test_platform_config()).unwrap();
        let log = run_audit_with_profiles(&plan, &profiles, &mut adapter).unwrap();
        let by_id: BTreeMap<&str, &UserProfile> =
            profiles.iter().map(|p| (p.user_id.as_str(), p)).collect();
        assert!(!log.records.is_empty());
        for r in &log.records {
            let p = by_id[r.user_id.as_str()];
            let want = r.item_topics.iter().any(|t| p.interests.contains(t));
            assert_eq!(r.matched_interest, want);
            assert!(!r.matched_sensitive);
        }
    }

    #[test]
    fn multi_day_plan_requires_day_advance_capability() {
        struct StuckAdapter(SimPlatformAdapter);
        impl PlatformAdapter for StuckAdapter {
            fn capabilities(&self) -> AdapterCapabilities {
                AdapterCapabilities {
                    supports_deterministic_replay: true,
                    supports_day_advance: false,
                }
            }
            fn identity(&self) -> String {
                self.0.identity()
            }
            fn feed_size(&self) -> u32 {
                self.0.feed_size()
            }
            fn register_user(&mut self, d: &DeclaredProfile) -> Result<(), AdapterError> {
                self.0.register_user(d)
            }
            fn search(&mut self, u: &str, t: &str) -> Result<Vec<ContentItem>, AdapterError> {
                self.0.search(u, t)
            }
            fn watch(&mut self, u: &str, i: &str) -> Result<(), AdapterError> {
                self.0.watch(u, i)
            }
            fn next_feed(&mut self, u: &str, k: u32) -> Result<Vec<ServedSlot>, AdapterError> {
                self.0.next_feed(u, k)
            }
            fn set_recommender_option(&mut self, u: &str, n: bool) -> Result<(), AdapterError> {
                self.0.set_recommender_option(u, n)
            }
            fn advance_day(&mut self) -> Result<u32, AdapterError> {
                Err(AdapterError::Other("no day advance".into()))
            }
        }
        let plan = toggle_plan(0.5);
        let mut adapter = StuckAdapter(SimPlatformAdapter::new(test_platform_config()).unwrap());
        assert!(matches!(
            run_audit(&plan, &mut adapter, 1),
            Err(ExecutorError::CapabilityMismatch(_))
        ));
    }
}
