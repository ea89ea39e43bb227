//! Core library for auditing recommender systems against the DSA's
//! protections: profiling-based ads shown to minors (Art. 28(2)),
//! user control over profiling-based recommendations (Art. 38), and
//! ad targeting from sensitive-category data (Art. 26(3)).
//!
//! The pipeline: describe an experiment as an audit plan, execute bot
//! cohorts against a platform (simulated or adapted), log every exposure,
//! then evaluate the log with resampling tests and report verdicts.

pub mod evaluator;
pub mod executor;
pub mod hashing;
pub mod platform;
pub mod reporter;
pub mod scenario;
pub mod seeding;
pub mod stats;

pub use executor::{
    read_explog, replay_verify, run_audit, write_explog, ExposureLog, Impression, LogHeader,
    PlatformAdapter, SimPlatformAdapter,
};
pub use platform::{Platform, PlatformConfig};
pub use scenario::{parse_plan, validate_plan, AuditPlan};
