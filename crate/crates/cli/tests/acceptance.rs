//! Acceptance suite: end-to-end statistical validation of the harness.
//!
//! Each test covers one acceptance criterion and prints a single
//! `ACCEPTANCE Cn ... PASS` line on success (assertions fail the test
//! otherwise). The criteria are statistical: several thresholds sit at
//! the alpha boundary by construction (a valid test flags an
//! exchangeable null ~5% of the time), so each criterion runs over a
//! frozen seed range to keep the suite deterministic. The observed
//! rates at neighbouring seed ranges are recorded in the repository
//! notes; all hover around their expected values.
//!
//! Expected runtime: a few minutes on one core (the suite simulates
//! several hundred full audit runs).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::Rng;

use dsa_audit_core::evaluator::{
    evaluate_minors_case, evaluate_sensitive_case, evaluate_toggle_case, power_sweep,
    windowed_analysis, SweepGrid, Verdict,
};
use dsa_audit_core::executor::{run_audit, ExposureLog, SimPlatformAdapter, TOOL_VERSION};
use dsa_audit_core::platform::{parse_platform_config, PlatformConfig};
use dsa_audit_core::reporter::{build_report, compare_reports, metric_disagreement};
use dsa_audit_core::scenario::{generate_cohorts, parse_plan, AuditPlan, CaseSelector, UserProfile};
use dsa_audit_core::seeding::derive_rng;
use dsa_audit_core::stats::{exact_permutation_test, permutation_test, Tail};

fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn load_plan(name: &str) -> AuditPlan {
    parse_plan(&fs::read_to_string(presets_dir().join(name)).unwrap()).unwrap()
}

fn load_platform(name: &str) -> PlatformConfig {
    parse_platform_config(&fs::read_to_string(presets_dir().join(name)).unwrap()).unwrap()
}

/// Run one full audit and return the log plus the seeded cohort roster.
fn run(plan: &AuditPlan, cfg: &PlatformConfig, seed: u64) -> (ExposureLog, Vec<UserProfile>) {
    let mut adapter = SimPlatformAdapter::new(cfg.clone()).unwrap();
    let log = run_audit(plan, &mut adapter, seed).unwrap();
    let mut seeded = plan.clone();
    seeded.seed = seed;
    (log, generate_cohorts(&seeded))
}

/// Criterion 1: a platform that profiles minors like adults must be
/// flagged non-compliant in at least 95 of 100 seeded runs.
#[test]
fn c01_noncompliant_minors_detected() {
    let plan = load_plan("minors_profiling.plan");
    let cfg = load_platform("noncompliant_minors.platform");
    let mut flagged = 0;
    for seed in 100..200u64 {
        let (log, profiles) = run(&plan, &cfg, seed);
        let v = evaluate_minors_case(&log, &profiles, &plan.decision_rule).unwrap();
        if v.verdict == Verdict::NonCompliant {
            flagged += 1;
        }
    }
    assert!(flagged >= 95, "non_compliant in {flagged}/100 runs, need >= 95");
    println!("ACCEPTANCE C1 minors ground truth: non_compliant {flagged}/100 PASS");
}

/// Criterion 2: the same plan against a compliant platform must stay
/// below an 8% false-flag rate (alpha plus binomial margin).
#[test]
fn c02_compliant_platform_false_positive_rate() {
    let plan = load_plan("minors_profiling.plan");
    let cfg = load_platform("compliant.platform");
    let mut flagged = 0;
    for seed in 100..200u64 {
        let (log, profiles) = run(&plan, &cfg, seed);
        let v = evaluate_minors_case(&log, &profiles, &plan.decision_rule).unwrap();
        if v.verdict == Verdict::NonCompliant {
            flagged += 1;
        }
    }
    assert!(flagged <= 8, "non_compliant in {flagged}/100 runs, need <= 8");
    println!("ACCEPTANCE C2 false-positive control: non_compliant {flagged}/100 PASS");
}

/// Criterion 3: Monte Carlo permutation p-values agree with exact
/// enumeration within 3 binomial standard errors on small instances,
/// and the canonical [1,1,1] vs [0,0,0] case gives two-sided p = 0.1.
#[test]
fn c03_permutation_matches_exact_enumeration() {
    let (_, p) = {
        let r = exact_permutation_test(&[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0], Tail::TwoSided).unwrap();
        (r.statistic, r.p_value)
    };
    assert!((p - 0.1).abs() < 1e-12, "canonical case p = {p}");

    let mut rng = derive_rng(20260823, "acceptance-oracle", 0);
    let tails = [Tail::Lower, Tail::Upper, Tail::TwoSided];
    let mut worst = 0.0f64;
    for i in 0..50u32 {
        let nx = rng.random_range(3..=8usize);
        let ny = rng.random_range(3..=8usize);
        // small integer values so ties are exercised
        let xs: Vec<f64> = (0..nx).map(|_| rng.random_range(0..4) as f64).collect();
        let ys: Vec<f64> = (0..ny).map(|_| rng.random_range(0..4) as f64).collect();
        let tail = tails[i as usize % 3];
        let exact = exact_permutation_test(&xs, &ys, tail).unwrap();
        let mc = permutation_test(&xs, &ys, 10_000, u64::from(i) + 1, tail).unwrap();
        let p = exact.p_value;
        // 3 sigma of the Monte Carlo estimator, plus the add-one
        // smoothing offset of (r+1)/(B+1)
        let tol = 3.0 * (p * (1.0 - p) / 10_000.0).sqrt() + 2.0 / 10_001.0;
        let err = (mc.p_value - p).abs();
        worst = worst.max(err - tol);
        assert!(
            err <= tol,
            "instance {i}: mc {} vs exact {} (tol {tol})",
            mc.p_value,
            exact.p_value
        );
    }
    println!("ACCEPTANCE C3 permutation oracle: 50/50 within 3-sigma (worst slack {worst:.5}) PASS");
}

/// Criterion 4: under exchangeable null data the test is calibrated —
/// the fraction of p <= 0.05 over 1,000 replications lies in [0.03, 0.07].
#[test]
fn c04_null_uniformity() {
    let mut rng = derive_rng(20260823, "acceptance-null", 0);
    let mut hits = 0;
    for rep in 0..1000u32 {
        let pool: Vec<f64> = (0..24).map(|_| rng.random::<f64>()).collect();
        let (xs, ys) = pool.split_at(12);
        let r = permutation_test(xs, ys, 2000, u64::from(rep), Tail::TwoSided).unwrap();
        if r.p_value <= 0.05 {
            hits += 1;
        }
    }
    let frac = f64::from(hits) / 1000.0;
    assert!(
        (0.03..=0.07).contains(&frac),
        "fraction of p <= 0.05 was {frac}, need within [0.03, 0.07]"
    );
    println!("ACCEPTANCE C4 null uniformity: fraction {frac:.3} in [0.03, 0.07] PASS");
}

/// Criterion 5: the opt-out toggle case separates full, absent, and
/// partial honoring, each in at least 90 of 100 seeded runs.
#[test]
fn c05_toggle_discrimination() {
    let plan = load_plan("control_effectiveness.plan");
    let arms: [(&str, &dyn Fn(&dsa_audit_core::evaluator::CaseVerdict) -> bool, &str); 3] = [
        ("compliant.platform", &|v| v.verdict == Verdict::Compliant, "compliant"),
        ("noncompliant_toggle.platform", &|v| v.verdict == Verdict::NonCompliant, "non_compliant"),
        (
            "partial_toggle.platform",
            &|v| {
                v.verdict == Verdict::NonCompliant
                    && v.annotation.as_deref().is_some_and(|a| a.contains("partial effect"))
            },
            "non_compliant partial effect",
        ),
    ];
    for (name, want, label) in arms {
        let cfg = load_platform(name);
        let mut hit = 0;
        for seed in 0..100u64 {
            let (log, profiles) = run(&plan, &cfg, seed);
            let v = evaluate_toggle_case(&log, &profiles, &plan.decision_rule).unwrap();
            if want(&v) {
                hit += 1;
            }
        }
        assert!(hit >= 90, "{name}: expected '{label}' in >= 90/100, got {hit}");
        println!("ACCEPTANCE C5 toggle {name}: {label} {hit}/100 PASS");
    }
}

/// Criterion 6: sensitive-category targeting is detected when enabled
/// (>= 95/100) and not falsely flagged when disabled (<= 8/100).
#[test]
fn c06_sensitive_targeting_detection() {
    let plan = load_plan("sensitive_targeting.plan");
    for (name, min, max) in [
        ("sensitive_targeting.platform", 95, 100),
        ("compliant.platform", 0, 8),
    ] {
        let cfg = load_platform(name);
        let mut flagged = 0;
        for seed in 0..100u64 {
            let (log, profiles) = run(&plan, &cfg, seed);
            let v = evaluate_sensitive_case(&log, &profiles, &plan.decision_rule).unwrap();
            if v.verdict == Verdict::NonCompliant {
                flagged += 1;
            }
        }
        assert!(
            (min..=max).contains(&flagged),
            "{name}: non_compliant {flagged}/100, need in [{min}, {max}]"
        );
        println!("ACCEPTANCE C6 sensitive {name}: non_compliant {flagged}/100 PASS");
    }
}

/// Criterion 7: with mid-run drift, 5-day windows localize the change
/// (clean before, flagged after) in >= 90/100 runs, while the single
/// global test disagrees with at least one window in >= 50/100 runs.
#[test]
fn c07_drift_windows_localize_change() {
    let plan = load_plan("minors_profiling.plan");
    let cfg = load_platform("drift_day10.platform");
    let mut pattern_ok = 0;
    let mut global_disagrees = 0;
    for seed in 100..200u64 {
        let (log, profiles) = run(&plan, &cfg, seed);
        let global = evaluate_minors_case(&log, &profiles, &plan.decision_rule).unwrap();
        let windows = windowed_analysis(
            &log,
            &profiles,
            5,
            CaseSelector::MinorsProfiling,
            &plan.decision_rule,
        )
        .unwrap();
        assert_eq!(windows.len(), 4);
        let verdicts: Vec<Verdict> = windows.iter().map(|w| w.verdict).collect();
        if verdicts
            == [
                Verdict::Compliant,
                Verdict::Compliant,
                Verdict::NonCompliant,
                Verdict::NonCompliant,
            ]
        {
            pattern_ok += 1;
        }
        if windows.iter().any(|w| w.verdict != global.verdict) {
            global_disagrees += 1;
        }
    }
    assert!(pattern_ok >= 90, "window pattern correct in {pattern_ok}/100, need >= 90");
    assert!(
        global_disagrees >= 50,
        "global test disagreed with a window in {global_disagrees}/100, need >= 50"
    );
    println!(
        "ACCEPTANCE C7 drift windows: pattern {pattern_ok}/100, global-vs-window disagreement \
         {global_disagrees}/100 PASS"
    );
}

/// Criterion 8: repeated runs with a fixed seed are byte-identical
/// (reports compared with the timestamp excluded), and replay of the
/// produced log exits 0.
#[test]
fn c08_determinism_and_replay() {
    let bin = env!("CARGO_BIN_EXE_dsa-audit");
    let dir = tempfile::tempdir().unwrap();
    let plan = presets_dir().join("control_effectiveness.plan");
    let platform = presets_dir().join("compliant.platform");
    let strip = |s: &str| {
        s.lines()
            .filter(|l| !l.trim_start().starts_with("\"generated_at\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut logs: Vec<Vec<u8>> = Vec::new();
    let mut reports: Vec<String> = Vec::new();
    for i in 0..10 {
        let out_dir = dir.path().join(format!("run{i}"));
        let out = Command::new(bin)
            .arg("run")
            .arg(&plan)
            .arg(&platform)
            .args(["--seed", "7", "--out"])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        logs.push(fs::read(out_dir.join("audit.explog")).unwrap());
        reports.push(strip(&fs::read_to_string(out_dir.join("report.json")).unwrap()));
    }
    assert!(logs.iter().all(|l| l == &logs[0]), "explogs must be byte-identical");
    assert!(reports.iter().all(|r| r == &reports[0]), "reports must match modulo timestamp");

    let out = Command::new(bin)
        .arg("replay")
        .arg(dir.path().join("run0/audit.explog"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    println!("ACCEPTANCE C8 determinism: 10/10 identical logs and reports, replay exit 0 PASS");
}

/// Criterion 9: the committed weak-effect platform produces at least
/// one run where the per-user permutation test and the
/// impression-level proportion test reach different verdicts, and the
/// report comparison flags the metric dependency.
#[test]
fn c09_metric_dependency_exhibit() {
    let plan = load_plan("minors_profiling.plan");
    let cfg = load_platform("metric_dependency.platform");
    let alpha = plan.decision_rule.alpha;
    let mut found = None;
    for seed in 0..50u64 {
        let (log, profiles) = run(&plan, &cfg, seed);
        let v = evaluate_minors_case(&log, &profiles, &plan.decision_rule).unwrap();
        let z = &v.co_tests["two_proportion_impressions"];
        if (v.test.p_value < alpha) != (z.p_value < alpha) {
            found = Some((seed, log, v));
            break;
        }
    }
    let (seed, log, verdict) =
        found.expect("no permutation/proportion disagreement within 50 seeds");
    assert!(metric_disagreement(&verdict), "verdict must self-report the disagreement");
    let report = build_report(
        &log.header.plan_hash,
        &log.header.platform_hash,
        seed,
        TOOL_VERSION,
        vec![verdict],
    )
    .unwrap();
    let comparison = compare_reports(&report, &report).unwrap();
    assert!(
        comparison.contains("metric-dependency warning"),
        "comparison output missing the warning:\n{comparison}"
    );
    println!("ACCEPTANCE C9 metric dependency: disagreement at seed {seed}, flagged PASS");
}

/// Criterion 10: estimated detection power is non-decreasing in the
/// profiling weight across {0, 1, 2, 3}, within Monte Carlo error.
#[test]
fn c10_power_monotone_in_effect_size() {
    let plan = load_plan("minors_profiling.plan");
    let cfg = load_platform("compliant.platform");
    let grid = SweepGrid {
        w_match: vec![0.0, 1.0, 2.0, 3.0],
        cohort_size: vec![12],
        duration_days: vec![8],
    };
    let curve = power_sweep(&plan, &cfg, &grid, 50, 424242).unwrap();
    assert_eq!(curve.cells.len(), 4);
    let mut cells = curve.cells.clone();
    cells.sort_by(|a, b| a.w_match.partial_cmp(&b.w_match).unwrap());
    for pair in cells.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        let slack = 2.0 * (lo.power_se + hi.power_se);
        assert!(
            hi.power >= lo.power - slack,
            "power dropped: w={} power={} vs w={} power={} (slack {slack})",
            lo.w_match,
            lo.power,
            hi.w_match,
            hi.power
        );
    }
    let powers: Vec<f64> = cells.iter().map(|c| c.power).collect();
    println!("ACCEPTANCE C10 power monotonicity: {powers:?} non-decreasing PASS");
}
