//! Deterministic simulated platform: content catalog, interest-profiling
//! recommender, ad delivery, and ground-truth compliance knobs.
//!
//! The simulator doubles as the default audit target and as the oracle for
//! measuring the harness's own detection power: every compliance property
//! under test is a configuration switch whose truth is known by
//! construction.
//!
//! Config file format (`.platform`, TOML): scalar keys mirroring
//! [`PlatformConfig`], plus optional repeated `[[drift]]` blocks scheduling
//! a config mutation at the start of a given logical day.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::{derive_rng, derive_seed, hash_label};

/// How many recent watch topics feed the behavioural age-inference rule.
const AGE_INFERENCE_WINDOW: usize = 50;
/// Watch share of the minor-skewed topic above which a user is classified
/// as a minor when behavioural age inference is enabled.
const AGE_INFERENCE_SHARE: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum HonorMode {
    /// Selecting the non-profiling option zeroes the profiling weight.
    Full,
    /// The profiling weight is scaled by `rho` instead of zeroed.
    Partial { rho: f64 },
    /// The option is stored but has no effect on feed assembly.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEvent {
    pub day: u32,
    pub field: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlatformConfig {
    pub catalog_size: u32,
    pub ad_inventory_size: u32,
    pub taxonomy: Vec<String>,
    pub sensitive_categories: Vec<String>,
    /// Fraction of the ad inventory carrying a sensitive-category tag;
    /// assignment is deterministic, so the realized fraction is exact.
    pub sensitive_ad_fraction: f64,
    pub ad_slot_rate: f64,
    pub interest_learning_rate: f64,
    pub profiling_weight: f64,
    pub minor_ad_profiling: bool,
    pub honor_nonprofiling_option: HonorMode,
    pub sensitive_targeting_enabled: bool,
    pub age_inference_enabled: bool,
    /// Topic whose dominance in recent watches marks a user as a minor
    /// under behavioural age inference.
    pub minor_skewed_topic: Option<String>,
    pub feed_size: u32,
    pub seed: u64,
    pub drift_events: Vec<DriftEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContentItem {
    pub item_id: String,
    pub topics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdItem {
    pub item_id: String,
    pub topics: Vec<String>,
    pub sensitive_tags: Vec<String>,
}

/// Demographics a bot discloses at account creation. Interests are never
/// declared; the platform has to learn them from behaviour.
#[derive(Debug, Clone, PartialEq)]
pub struct DeclaredProfile {
    pub user_id: String,
    pub declared_age: u32,
    pub gender: String,
    pub location: String,
    pub sensitive_interest: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PlatformUserState {
    pub user_id: String,
    pub declared_age: u32,
    pub inferred_minor: bool,
    pub interest_vector: BTreeMap<String, f64>,
    pub sensitive_vector: BTreeMap<String, f64>,
    pub nonprofiling_selected: bool,
    pub interaction_count: u64,
    feed_requests: u64,
    recent_topics: VecDeque<String>,
}

impl PlatformUserState {
    pub fn is_minor(&self) -> bool {
        self.declared_age < 18 || self.inferred_minor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Content,
    Ad,
}

/// One served feed slot, with enough item metadata for exposure logging.
#[derive(Debug, Clone, PartialEq)]
pub struct ServedSlot {
    pub slot_index: u32,
    pub kind: SlotKind,
    pub item_id: String,
    pub topics: Vec<String>,
    pub sensitive_tags: Vec<String>,
}

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error("invalid platform config: {0}")]
    InvalidConfig(String),
    #[error("platform config syntax error: {0}")]
    Syntax(String),
    #[error("unknown user '{0}'")]
    UnknownUser(String),
    #[error("user '{0}' already registered")]
    DuplicateUser(String),
    #[error("unknown item '{0}'")]
    UnknownItem(String),
    #[error("unknown topic '{0}'")]
    UnknownTopic(String),
    #[error("unknown sensitive category '{0}'")]
    UnknownSensitiveCategory(String),
    #[error("drift event error: {0}")]
    Drift(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlatformConfig {
    catalog_size: u32,
    ad_inventory_size: u32,
    taxonomy: Vec<String>,
    sensitive_categories: Vec<String>,
    sensitive_ad_fraction: Option<f64>,
    ad_slot_rate: f64,
    interest_learning_rate: f64,
    profiling_weight: f64,
    minor_ad_profiling: bool,
    honor_nonprofiling_option: String,
    nonprofiling_partial_rho: Option<f64>,
    sensitive_targeting_enabled: bool,
    age_inference_enabled: bool,
    minor_skewed_topic: Option<String>,
    feed_size: u32,
    seed: u64,
    #[serde(default, rename = "drift")]
    drift_events: Vec<DriftEvent>,
}

/// Parse and validate a `.platform` config file.
pub fn parse_platform_config(text: &str) -> Result<PlatformConfig, PlatformError> {
    let raw: RawPlatformConfig =
        toml::from_str(text).map_err(|e| PlatformError::Syntax(e.to_string()))?;
    let honor = match raw.honor_nonprofiling_option.as_str() {
        "full" => HonorMode::Full,
        "none" => HonorMode::None,
        "partial" => {
            let rho = raw.nonprofiling_partial_rho.ok_or_else(|| {
                PlatformError::InvalidConfig(
                    "honor_nonprofiling_option = \"partial\" requires nonprofiling_partial_rho"
                        .into(),
                )
            })?;
            HonorMode::Partial { rho }
        }
        other => {
            return Err(PlatformError::InvalidConfig(format!(
                "honor_nonprofiling_option must be full|partial|none, got '{other}'"
            )))
        }
    };
    let config = PlatformConfig {
        catalog_size: raw.catalog_size,
        ad_inventory_size: raw.ad_inventory_size,
        taxonomy: raw.taxonomy,
        sensitive_categories: raw.sensitive_categories,
        sensitive_ad_fraction: raw.sensitive_ad_fraction.unwrap_or(0.3),
        ad_slot_rate: raw.ad_slot_rate,
        interest_learning_rate: raw.interest_learning_rate,
        profiling_weight: raw.profiling_weight,
        minor_ad_profiling: raw.minor_ad_profiling,
        honor_nonprofiling_option: honor,
        sensitive_targeting_enabled: raw.sensitive_targeting_enabled,
        age_inference_enabled: raw.age_inference_enabled,
        minor_skewed_topic: raw.minor_skewed_topic,
        feed_size: raw.feed_size,
        seed: raw.seed,
        drift_events: raw.drift_events,
    };
    validate_config(&config)?;
    Ok(config)
}

fn validate_config(config: &PlatformConfig) -> Result<(), PlatformError> {
    let fail = |msg: String| Err(PlatformError::InvalidConfig(msg));
    if config.catalog_size == 0 || config.ad_inventory_size == 0 {
        return fail("catalog_size and ad_inventory_size must be positive".into());
    }
    if config.taxonomy.len() < 3 {
        return fail(format!(
            "taxonomy must list at least 3 topics, got {}",
            config.taxonomy.len()
        ));
    }
    let taxonomy: BTreeSet<&str> = config.taxonomy.iter().map(String::as_str).collect();
    for cat in &config.sensitive_categories {
        if taxonomy.contains(cat.as_str()) {
            return fail(format!(
                "sensitive category '{cat}' collides with the topic taxonomy"
            ));
        }
    }
    if !(config.ad_slot_rate > 0.0 && config.ad_slot_rate < 1.0) {
        return fail(format!("ad_slot_rate must lie in (0,1), got {}", config.ad_slot_rate));
    }
    if !(config.interest_learning_rate > 0.0 && config.interest_learning_rate <= 1.0) {
        return fail(format!(
            "interest_learning_rate must lie in (0,1], got {}",
            config.interest_learning_rate
        ));
    }
    if config.profiling_weight < 0.0 {
        return fail("profiling_weight must be non-negative".into());
    }
    if !(0.0..=1.0).contains(&config.sensitive_ad_fraction) {
        return fail("sensitive_ad_fraction must lie in [0,1]".into());
    }
    if let HonorMode::Partial { rho } = config.honor_nonprofiling_option {
        if !(rho > 0.0 && rho < 1.0) {
            return fail(format!("partial honor rho must lie in (0,1), got {rho}"));
        }
    }
    if config.feed_size == 0 {
        return fail("feed_size must be positive".into());
    }
    if config.age_inference_enabled {
        match &config.minor_skewed_topic {
            Some(t) if taxonomy.contains(t.as_str()) => {}
            Some(t) => return fail(format!("minor_skewed_topic '{t}' not in taxonomy")),
            None => {
                return fail("age_inference_enabled requires minor_skewed_topic".into());
            }
        }
    }
    for event in &config.drift_events {
        if event.day < 1 {
            return fail(format!("drift event day must be >= 1, got {}", event.day));
        }
        parse_drift_mutation(&event.field, &event.value)?;
    }
    Ok(())
}

enum DriftMutation {
    MinorAdProfiling(bool),
    SensitiveTargeting(bool),
    AgeInference(bool),
    ProfilingWeight(f64),
    AdSlotRate(f64),
    InterestLearningRate(f64),
    Honor(HonorMode),
}

fn parse_drift_mutation(field: &str, value: &str) -> Result<DriftMutation, PlatformError> {
    let bool_value = || {
        value
            .parse::<bool>()
            .map_err(|_| PlatformError::Drift(format!("'{value}' is not a boolean")))
    };
    let f64_value = || {
        value
            .parse::<f64>()
            .map_err(|_| PlatformError::Drift(format!("'{value}' is not a number")))
    };
    match field {
        "minor_ad_profiling" => Ok(DriftMutation::MinorAdProfiling(bool_value()?)),
        "sensitive_targeting_enabled" => Ok(DriftMutation::SensitiveTargeting(bool_value()?)),
        "age_inference_enabled" => Ok(DriftMutation::AgeInference(bool_value()?)),
        "profiling_weight" => Ok(DriftMutation::ProfilingWeight(f64_value()?)),
        "ad_slot_rate" => Ok(DriftMutation::AdSlotRate(f64_value()?)),
        "interest_learning_rate" => Ok(DriftMutation::InterestLearningRate(f64_value()?)),
        "honor_nonprofiling_option" => {
            let mode = if value == "full" {
                HonorMode::Full
            } else if value == "none" {
                HonorMode::None
            } else if let Some(rho) = value.strip_prefix("partial:") {
                HonorMode::Partial {
                    rho: rho
                        .parse()
                        .map_err(|_| PlatformError::Drift(format!("bad rho in '{value}'")))?,
                }
            } else {
                return Err(PlatformError::Drift(format!(
                    "honor value must be full|none|partial:<rho>, got '{value}'"
                )));
            };
            Ok(DriftMutation::Honor(mode))
        }
        other => Err(PlatformError::Drift(format!(
            "field '{other}' cannot be mutated by a drift event"
        ))),
    }
}

/// The simulated platform: a single logically serialized state machine.
pub struct Platform {
    config: PlatformConfig,
    catalog: Vec<ContentItem>,
    /// Coarse relevance grade per catalog item, used by search ranking.
    /// Quantized so that ties exist and tie-breaking is exercised.
    relevance: Vec<u8>,
    ads: Vec<AdItem>,
    users: BTreeMap<String, PlatformUserState>,
    day: u32,
}

impl Platform {
    /// Build catalog and ad inventory deterministically from the config.
    pub fn create(config: PlatformConfig) -> Result<Platform, PlatformError> {
        validate_config(&config)?;
        let topics = &config.taxonomy;
        let catalog: Vec<ContentItem> = (0..config.catalog_size)
            .map(|i| ContentItem {
                item_id: format!("c{i:05}"),
                topics: vec![topics[i as usize % topics.len()].clone()],
            })
            .collect();
        let mut rng = derive_rng(config.seed, "catalog", 0);
        let relevance: Vec<u8> = (0..config.catalog_size).map(|_| rng.random_range(0..16)).collect();

        let n_ads = config.ad_inventory_size as usize;
        let mut ads: Vec<AdItem> = (0..n_ads)
            .map(|i| AdItem {
                item_id: format!("a{i:05}"),
                topics: vec![topics[i % topics.len()].clone()],
                sensitive_tags: Vec::new(),
            })
            .collect();
        // Exact deterministic sensitive tagging: round(fraction * n) ads,
        // chosen by seeded shuffle, tags cycling through the categories.
        let n_tagged = (config.sensitive_ad_fraction * n_ads as f64).round() as usize;
        if n_tagged > 0 && !config.sensitive_categories.is_empty() {
            let mut indices: Vec<usize> = (0..n_ads).collect();
            let mut tag_rng = derive_rng(config.seed, "ad-tags", 0);
            indices.shuffle(&mut tag_rng);
            for (j, idx) in indices.into_iter().take(n_tagged).enumerate() {
                let cat = &config.sensitive_categories[j % config.sensitive_categories.len()];
                ads[idx].sensitive_tags.push(cat.clone());
            }
        }

        let mut platform = Platform {
            config,
            catalog,
            relevance,
            ads,
            users: BTreeMap::new(),
            day: 1,
        };
        platform.apply_drift_for_day(1)?;
        Ok(platform)
    }

    pub fn config(&self) -> &PlatformConfig {
        &self.config
    }

    pub fn current_day(&self) -> u32 {
        self.day
    }

    pub fn catalog(&self) -> &[ContentItem] {
        &self.catalog
    }

    pub fn ads(&self) -> &[AdItem] {
        &self.ads
    }

    pub fn user_state(&self, user_id: &str) -> Option<&PlatformUserState> {
        self.users.get(user_id)
    }

    pub fn register_user(&mut self, declared: &DeclaredProfile) -> Result<(), PlatformError> {
        if self.users.contains_key(&declared.user_id) {
            return Err(PlatformError::DuplicateUser(declared.user_id.clone()));
        }
        let mut sensitive_vector: BTreeMap<String, f64> = self
            .config
            .sensitive_categories
            .iter()
            .map(|c| (c.clone(), 0.0))
            .collect();
        if let Some(cat) = &declared.sensitive_interest {
            match sensitive_vector.get_mut(cat) {
                Some(v) => *v = 1.0,
                None => return Err(PlatformError::UnknownSensitiveCategory(cat.clone())),
            }
        }
        let state = PlatformUserState {
            user_id: declared.user_id.clone(),
            declared_age: declared.declared_age,
            inferred_minor: declared.declared_age < 18,
            interest_vector: self
                .config
                .taxonomy
                .iter()
                .map(|t| (t.clone(), 0.0))
                .collect(),
            sensitive_vector,
            nonprofiling_selected: false,
            interaction_count: 0,
            feed_requests: 0,
            recent_topics: VecDeque::with_capacity(AGE_INFERENCE_WINDOW),
        };
        self.users.insert(declared.user_id.clone(), state);
        Ok(())
    }

    /// Top-k items for a topic, ranked by relevance grade, ties broken by
    /// ascending item id.
    pub fn search(&self, user_id: &str, topic: &str) -> Result<Vec<ContentItem>, PlatformError> {
        if !self.users.contains_key(user_id) {
            return Err(PlatformError::UnknownUser(user_id.to_string()));
        }
        if !self.config.taxonomy.iter().any(|t| t == topic) {
            return Err(PlatformError::UnknownTopic(topic.to_string()));
        }
        let mut hits: Vec<(usize, &ContentItem)> = self
            .catalog
            .iter()
            .enumerate()
            .filter(|(_, item)| item.topics.iter().any(|t| t == topic))
            .collect();
        hits.sort_by(|(i, a), (j, b)| {
            self.relevance[*j]
                .cmp(&self.relevance[*i])
                .then_with(|| a.item_id.cmp(&b.item_id))
        });
        Ok(hits
            .into_iter()
            .take(self.config.feed_size as usize)
            .map(|(_, item)| item.clone())
            .collect())
    }

    /// Record a content watch: exponential-moving-average interest update,
    /// plus the behavioural age-inference bookkeeping.
    pub fn watch(&mut self, user_id: &str, item_id: &str) -> Result<(), PlatformError> {
        let item = self
            .catalog
            .iter()
            .find(|i| i.item_id == item_id)
            .cloned()
            .ok_or_else(|| PlatformError::UnknownItem(item_id.to_string()))?;
        let lambda = self.config.interest_learning_rate;
        let age_inference = self.config.age_inference_enabled;
        let skew_topic = self.config.minor_skewed_topic.clone();
        let user = self
            .users
            .get_mut(user_id)
            .ok_or_else(|| PlatformError::UnknownUser(user_id.to_string()))?;

        let share = 1.0 / item.topics.len() as f64;
        for value in user.interest_vector.values_mut() {
            *value *= 1.0 - lambda;
        }
        for topic in &item.topics {
            if let Some(value) = user.interest_vector.get_mut(topic) {
                *value += lambda * share;
            }
        }
        // Content items carry no sensitive tags, so this mirrors the
        // interest update only when a tagged item is ever watchable.
        user.interaction_count += 1;
        for topic in &item.topics {
            if user.recent_topics.len() == AGE_INFERENCE_WINDOW {
                user.recent_topics.pop_front();
            }
            user.recent_topics.push_back(topic.clone());
        }
        if age_inference && !user.inferred_minor && user.recent_topics.len() == AGE_INFERENCE_WINDOW
        {
            if let Some(skew) = &skew_topic {
                let hits = user.recent_topics.iter().filter(|t| *t == skew).count();
                if hits as f64 / AGE_INFERENCE_WINDOW as f64 > AGE_INFERENCE_SHARE {
                    user.inferred_minor = true;
                }
            }
        }
        Ok(())
    }

    pub fn set_recommender_option(
        &mut self,
        user_id: &str,
        nonprofiling: bool,
    ) -> Result<(), PlatformError> {
        let user = self
            .users
            .get_mut(user_id)
            .ok_or_else(|| PlatformError::UnknownUser(user_id.to_string()))?;
        user.nonprofiling_selected = nonprofiling;
        Ok(())
    }

    /// Serve `k` feed slots for a user. Each slot is an ad with probability
    /// `ad_slot_rate`, otherwise content; items are softmax-sampled over
    /// linear interest scores, subject to the ground-truth knobs.
    pub fn next_feed(&mut self, user_id: &str, k: u32) -> Result<Vec<ServedSlot>, PlatformError> {
        let user = self
            .users
            .get_mut(user_id)
            .ok_or_else(|| PlatformError::UnknownUser(user_id.to_string()))?;
        let request_index = user.feed_requests;
        user.feed_requests += 1;

        let user = self.users.get(user_id).expect("checked above");
        let config = &self.config;

        // Effective profiling weights for this user and call.
        let mut content_weight = config.profiling_weight;
        let mut ad_weight = config.profiling_weight;
        if user.nonprofiling_selected {
            match config.honor_nonprofiling_option {
                HonorMode::Full => {
                    content_weight = 0.0;
                    ad_weight = 0.0;
                }
                HonorMode::Partial { rho } => {
                    content_weight *= rho;
                    ad_weight *= rho;
                }
                HonorMode::None => {}
            }
        }
        if user.is_minor() && !config.minor_ad_profiling {
            // Minor shield: ad selection for minors takes the exact
            // zero-weight code path while content stays personalized.
            ad_weight = 0.0;
        }

        let content_scores: Vec<f64> = self
            .catalog
            .iter()
            .map(|item| {
                let dot: f64 = item
                    .topics
                    .iter()
                    .map(|t| user.interest_vector.get(t).copied().unwrap_or(0.0))
                    .sum();
                1.0 + content_weight * dot
            })
            .collect();
        let ad_scores: Vec<f64> = self
            .ads
            .iter()
            .map(|ad| {
                let dot: f64 = ad
                    .topics
                    .iter()
                    .map(|t| user.interest_vector.get(t).copied().unwrap_or(0.0))
                    .sum();
                let mut score = 1.0 + ad_weight * dot;
                if config.sensitive_targeting_enabled {
                    let sdot: f64 = ad
                        .sensitive_tags
                        .iter()
                        .map(|c| user.sensitive_vector.get(c).copied().unwrap_or(0.0))
                        .sum();
                    score += ad_weight * sdot;
                }
                score
            })
            .collect();
        let content_cdf = softmax_cdf(&content_scores);
        let ad_cdf = softmax_cdf(&ad_scores);

        let stream_seed = derive_seed(config.seed, "feed-user", hash_label(user_id));
        let mut rng = derive_rng(stream_seed, "feed-call", request_index);

        let mut slots = Vec::with_capacity(k as usize);
        for slot_index in 0..k {
            let is_ad = rng.random::<f64>() < config.ad_slot_rate;
            let draw = rng.random::<f64>();
            if is_ad {
                let idx = sample_cdf(&ad_cdf, draw);
                let ad = &self.ads[idx];
                slots.push(ServedSlot {
                    slot_index,
                    kind: SlotKind::Ad,
                    item_id: ad.item_id.clone(),
                    topics: ad.topics.clone(),
                    sensitive_tags: ad.sensitive_tags.clone(),
                });
            } else {
                let idx = sample_cdf(&content_cdf, draw);
                let item = &self.catalog[idx];
                slots.push(ServedSlot {
                    slot_index,
                    kind: SlotKind::Content,
                    item_id: item.item_id.clone(),
                    topics: item.topics.clone(),
                    sensitive_tags: Vec::new(),
                });
            }
        }
        Ok(slots)
    }

    /// Advance the logical clock one day, applying any drift events
    /// scheduled for the new day in listed order.
    pub fn advance_day(&mut self) -> Result<u32, PlatformError> {
        self.day += 1;
        self.apply_drift_for_day(self.day)?;
        Ok(self.day)
    }

    fn apply_drift_for_day(&mut self, day: u32) -> Result<(), PlatformError> {
        let events: Vec<DriftEvent> = self
            .config
            .drift_events
            .iter()
            .filter(|e| e.day == day)
            .cloned()
            .collect();
        for event in events {
            match parse_drift_mutation(&event.field, &event.value)? {
                DriftMutation::MinorAdProfiling(v) => self.config.minor_ad_profiling = v,
                DriftMutation::SensitiveTargeting(v) => self.config.sensitive_targeting_enabled = v,
                DriftMutation::AgeInference(v) => self.config.age_inference_enabled = v,
                DriftMutation::ProfilingWeight(v) => self.config.profiling_weight = v,
                DriftMutation::AdSlotRate(v) => self.config.ad_slot_rate = v,
                DriftMutation::InterestLearningRate(v) => self.config.interest_learning_rate = v,
                DriftMutation::Honor(mode) => self.config.honor_nonprofiling_option = mode,
            }
        }
        Ok(())
    }

    /// Softmax sampling probabilities for the current content scores of a
    /// user; exposed for the normalization invariant check.
    pub fn content_probabilities(&self, user_id: &str) -> Result<Vec<f64>, PlatformError> {
        let user = self
            .users
            .get(user_id)
            .ok_or_else(|| PlatformError::UnknownUser(user_id.to_string()))?;
        let scores: Vec<f64> = self
            .catalog
            .iter()
            .map(|item| {
                let dot: f64 = item
                    .topics
                    .iter()
                    .map(|t| user.interest_vector.get(t).copied().unwrap_or(0.0))
                    .sum();
                1.0 + self.config.profiling_weight * dot
            })
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        Ok(weights.into_iter().map(|w| w / total).collect())
    }
}

/// Cumulative softmax weights; sampling uses a single uniform draw.
fn softmax_cdf(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut cdf = Vec::with_capacity(scores.len());
    let mut acc = 0.0;
    for s in scores {
        acc += (s - max).exp();
        cdf.push(acc);
    }
    cdf
}

fn sample_cdf(cdf: &[f64], draw: f64) -> usize {
    let target = draw * cdf.last().copied().unwrap_or(1.0);
    match cdf.binary_search_by(|probe| probe.partial_cmp(&target).unwrap()) {
        Ok(i) => (i + 1).min(cdf.len() - 1),
        Err(i) => i.min(cdf.len() - 1),
    }
}
