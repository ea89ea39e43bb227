//! Two-sample and paired tests used by the case evaluators.
//!
//! The primary instrument is a Monte Carlo permutation test on per-user
//! rates with add-one smoothing; `exact_permutation_test` enumerates all
//! label assignments and serves as its oracle on small inputs. The pooled
//! two-proportion z-test is deliberately co-reported although impressions
//! within a user are dependent: it concretely exhibits how conclusions can
//! hinge on the evaluation metric.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::seeding::derive_rng;

/// Tolerance for comparing permuted statistics against the observed one;
/// counts permutations that tie in exact arithmetic but differ by float
/// noise as ties.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// H1: mean(xs) < mean(ys); small statistics are extreme.
    Lower,
    /// H1: mean(xs) > mean(ys); large statistics are extreme.
    Upper,
    /// H1: means differ; |statistic| is extreme.
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: String,
    pub statistic: f64,
    pub p_value: f64,
    /// Difference of group means (xs minus ys).
    pub effect_size: f64,
    pub n_resamples_used: u64,
    pub sidedness: Tail,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("empty sample passed to {0}")]
    EmptySample(&'static str),
    #[error("zero denominator in proportion test")]
    ZeroDenominator,
    #[error("combined sample size {0} exceeds the exact enumeration bound of {1}")]
    EnumerationBound(usize, usize),
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn diff_of_means(pool: &[f64], nx: usize) -> f64 {
    let x_sum: f64 = pool[..nx].iter().sum();
    let y_sum: f64 = pool[nx..].iter().sum();
    x_sum / nx as f64 - y_sum / (pool.len() - nx) as f64
}

fn is_extreme(perm_stat: f64, observed: f64, tail: Tail) -> bool {
    match tail {
        Tail::Lower => perm_stat <= observed + TIE_EPS,
        Tail::Upper => perm_stat >= observed - TIE_EPS,
        Tail::TwoSided => perm_stat.abs() >= observed.abs() - TIE_EPS,
    }
}

/// Monte Carlo permutation test on the difference of means, with add-one
/// smoothing: p = (r + 1) / (n_resamples + 1). Deterministic under `seed`.
pub fn permutation_test(
    xs: &[f64],
    ys: &[f64],
    n_resamples: u32,
    seed: u64,
    tail: Tail,
) -> Result<TestResult, StatsError> {
    if xs.is_empty() || ys.is_empty() {
        return Err(StatsError::EmptySample("permutation_test"));
    }
    let observed = mean(xs) - mean(ys);
    let mut pool: Vec<f64> = xs.iter().chain(ys.iter()).copied().collect();
    let nx = xs.len();
    let mut rng = derive_rng(seed, "permutation-test", 0);
    let mut extreme = 0u64;
    for _ in 0..n_resamples {
        pool.shuffle(&mut rng);
        if is_extreme(diff_of_means(&pool, nx), observed, tail) {
            extreme += 1;
        }
    }
    Ok(TestResult {
        method: "permutation".into(),
        statistic: observed,
        p_value: (extreme + 1) as f64 / (u64::from(n_resamples) + 1) as f64,
        effect_size: observed,
        n_resamples_used: u64::from(n_resamples),
        sidedness: tail,
    })
}

/// Upper bound on the combined sample size for exact enumeration.
pub const EXACT_ENUMERATION_BOUND: usize = 20;

/// Exact permutation test: enumerates every way of assigning the pooled
/// observations to the two groups. Oracle for `permutation_test`.
pub fn exact_permutation_test(xs: &[f64], ys: &[f64], tail: Tail) -> Result<TestResult, StatsError> {
    if xs.is_empty() || ys.is_empty() {
        return Err(StatsError::EmptySample("exact_permutation_test"));
    }
    let n = xs.len() + ys.len();
    if n > EXACT_ENUMERATION_BOUND {
        return Err(StatsError::EnumerationBound(n, EXACT_ENUMERATION_BOUND));
    }
    let observed = mean(xs) - mean(ys);
    let pool: Vec<f64> = xs.iter().chain(ys.iter()).copied().collect();
    let nx = xs.len();
    let ny = ys.len();
    let mut total = 0u64;
    let mut extreme = 0u64;
    for combo in (0..n).combinations(nx) {
        let mut in_x = vec![false; n];
        for i in &combo {
            in_x[*i] = true;
        }
        let x_sum: f64 = (0..n).filter(|i| in_x[*i]).map(|i| pool[i]).sum();
        let y_sum: f64 = (0..n).filter(|i| !in_x[*i]).map(|i| pool[i]).sum();
        let stat = x_sum / nx as f64 - y_sum / ny as f64;
        total += 1;
        if is_extreme(stat, observed, tail) {
            extreme += 1;
        }
    }
    Ok(TestResult {
        method: "exact_permutation".into(),
        statistic: observed,
        p_value: extreme as f64 / total as f64,
        effect_size: observed,
        n_resamples_used: total,
        sidedness: tail,
    })
}

/// Pooled two-proportion z-test on impression-level counts.
pub fn two_proportion_test(
    k1: u64,
    n1: u64,
    k2: u64,
    n2: u64,
    tail: Tail,
) -> Result<TestResult, StatsError> {
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::ZeroDenominator);
    }
    let p1 = k1 as f64 / n1 as f64;
    let p2 = k2 as f64 / n2 as f64;
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    let z = if se > 0.0 { (p1 - p2) / se } else { 0.0 };
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value = if se > 0.0 {
        match tail {
            Tail::Lower => normal.cdf(z),
            Tail::Upper => 1.0 - normal.cdf(z),
            Tail::TwoSided => 2.0 * (1.0 - normal.cdf(z.abs())),
        }
    } else {
        1.0
    };
    Ok(TestResult {
        method: "two_proportion".into(),
        statistic: z,
        p_value: p_value.min(1.0),
        effect_size: p1 - p2,
        n_resamples_used: 0,
        sidedness: tail,
    })
}

/// Paired sign-flip permutation test on per-user differences. Under the
/// null the differences are sign-symmetric; the lower tail corresponds to
/// H1: the paired quantity decreased.
pub fn sign_flip_test(
    diffs: &[f64],
    n_resamples: u32,
    seed: u64,
    tail: Tail,
) -> Result<TestResult, StatsError> {
    if diffs.is_empty() {
        return Err(StatsError::EmptySample("sign_flip_test"));
    }
    let observed = mean(diffs);
    let mut rng = derive_rng(seed, "sign-flip-test", 0);
    let mut extreme = 0u64;
    let n = diffs.len() as f64;
    for _ in 0..n_resamples {
        let flipped: f64 = diffs
            .iter()
            .map(|d| if rng.random::<bool>() { *d } else { -*d })
            .sum::<f64>()
            / n;
        if is_extreme(flipped, observed, tail) {
            extreme += 1;
        }
    }
    Ok(TestResult {
        method: "sign_flip".into(),
        statistic: observed,
        p_value: (extreme + 1) as f64 / (u64::from(n_resamples) + 1) as f64,
        effect_size: observed,
        n_resamples_used: u64::from(n_resamples),
        sidedness: tail,
    })
}
