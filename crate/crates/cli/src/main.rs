//! Operator entry point: validate plans, execute audits, sweep detection
//! power, and verify logs by replay.
//!
//! Exit codes are a stable contract:
//!   0 success, 1 validation failure, 2 non-compliance (with
//!   --fail-on-noncompliant), 3 IO failure, 4 adapter failure,
//!   5 replay mismatch.
//!
//! Seed precedence: --seed flag, then a seed declared in the plan file,
//! then the DSA_AUDIT_SEED environment variable.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dsa_audit_core::evaluator::{
    evaluate_case, power_sweep, power_curve_csv, windowed_analysis, SweepGrid, Verdict,
};
use dsa_audit_core::executor::{
    read_explog, replay_verify, run_audit, write_explog, SimPlatformAdapter, TOOL_VERSION,
};
use dsa_audit_core::hashing::hash_of;
use dsa_audit_core::platform::parse_platform_config;
use dsa_audit_core::reporter::{build_report, render_report, ReportFormat};
use dsa_audit_core::scenario::{
    generate_cohorts, parse_plan_lenient, plan_declares_seed, validate_plan,
};

const EXIT_OK: u8 = 0;
const EXIT_VALIDATION: u8 = 1;
const EXIT_NONCOMPLIANT: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_ADAPTER: u8 = 4;
const EXIT_REPLAY: u8 = 5;

const SEED_ENV_VAR: &str = "DSA_AUDIT_SEED";

#[derive(Parser)]
#[command(
    name = "dsa-audit",
    version,
    about = "Audit recommender systems against DSA provisions with simulated user cohorts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a plan file against all structural invariants.
    Validate { plan: PathBuf },
    /// Run a full audit and write a run directory.
    Run {
        plan: PathBuf,
        platform: PathBuf,
        /// Run seed; overrides the plan file and the environment.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: run-<run id> in the working directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 2 when any verdict is non-compliant.
        #[arg(long)]
        fail_on_noncompliant: bool,
        /// Day-window width for the longitudinal trend analysis.
        #[arg(long, default_value_t = 5)]
        window_days: u32,
    },
    /// Estimate detection power over a grid of effect sizes and scales.
    Sweep {
        plan: PathBuf,
        platform: PathBuf,
        grid: PathBuf,
        #[arg(long, default_value_t = 50)]
        runs: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-execute a logged run from its bound inputs and compare.
    Replay {
        explog: PathBuf,
        /// Plan file (default: audit.plan next to the log).
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Platform config (default: platform.platform next to the log).
        #[arg(long)]
        platform: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, u8> {
    fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_IO
    })
}

fn write(path: &Path, contents: &str) -> Result<(), u8> {
    fs::write(path, contents).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        EXIT_IO
    })
}

fn cmd_validate(plan_path: &Path) -> Result<u8, u8> {
    let text = read(plan_path)?;
    let plan = match parse_plan_lenient(&text) {
        Ok(p) => p,
        Err(e) => {
            println!("violation [parse]: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let report = validate_plan(&plan);
    for v in &report.violations {
        println!("violation [{}]: {}", v.invariant, v.message);
    }
    for w in &report.warnings {
        println!("warning [{}]: {}", w.invariant, w.message);
    }
    if report.is_valid() {
        println!("plan '{}' is valid", plan.plan_id);
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_VALIDATION)
    }
}

fn resolve_seed(flag: Option<u64>, plan_text: &str, plan_seed: u64) -> u64 {
    if let Some(s) = flag {
        return s;
    }
    if plan_declares_seed(plan_text) {
        return plan_seed;
    }
    if let Ok(value) = std::env::var(SEED_ENV_VAR) {
        if let Ok(s) = value.parse::<u64>() {
            return s;
        }
        eprintln!("warning: ignoring non-numeric {SEED_ENV_VAR}");
    }
    plan_seed
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    plan_path: &Path,
    platform_path: &Path,
    seed_flag: Option<u64>,
    out: Option<PathBuf>,
    fail_on_noncompliant: bool,
    window_days: u32,
) -> Result<u8, u8> {
    let plan_text = read(plan_path)?;
    let plan = match parse_plan_lenient(&plan_text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: invalid plan: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let report = validate_plan(&plan);
    if !report.is_valid() {
        for v in &report.violations {
            eprintln!("violation [{}]: {}", v.invariant, v.message);
        }
        return Ok(EXIT_VALIDATION);
    }
    let platform_text = read(platform_path)?;
    let config = match parse_platform_config(&platform_text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid platform config: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };

    let seed = resolve_seed(seed_flag, &plan_text, plan.seed);
    let mut adapter = match SimPlatformAdapter::new(config) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: platform rejected configuration: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let log = match run_audit(&plan, &mut adapter, seed) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: audit execution failed: {e}");
            return Ok(EXIT_ADAPTER);
        }
    };

    let mut seeded_plan = plan.clone();
    seeded_plan.seed = seed;
    let profiles = generate_cohorts(&seeded_plan);
    let mut verdict = match evaluate_case(plan.case, &log, &profiles, &plan.decision_rule) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: evaluation failed: {e}");
            return Ok(EXIT_ADAPTER);
        }
    };
    let effective_window = window_days.min(plan.duration_days).max(1);
    match windowed_analysis(&log, &profiles, effective_window, plan.case, &plan.decision_rule) {
        Ok(windows) => verdict.windows = Some(windows),
        Err(e) => eprintln!("warning: windowed analysis skipped: {e}"),
    }

    let audit_report = build_report(
        &log.header.plan_hash,
        &log.header.platform_hash,
        seed,
        TOOL_VERSION,
        vec![verdict],
    )
    .expect("one verdict present");

    let dir = out.unwrap_or_else(|| PathBuf::from(format!("run-{}", &log.header.run_id[4..])));
    fs::create_dir_all(&dir).map_err(|e| {
        eprintln!("error: cannot create {}: {e}", dir.display());
        EXIT_IO
    })?;
    write(&dir.join("audit.plan"), &plan_text)?;
    write(&dir.join("platform.platform"), &platform_text)?;
    let mut explog_bytes = Vec::new();
    write_explog(&log, &mut explog_bytes).map_err(|e| {
        eprintln!("error: cannot serialize log: {e}");
        EXIT_IO
    })?;
    fs::write(dir.join("audit.explog"), &explog_bytes).map_err(|e| {
        eprintln!("error: cannot write log: {e}");
        EXIT_IO
    })?;
    write(
        &dir.join("report.json"),
        &render_report(&audit_report, ReportFormat::Structured),
    )?;
    write(
        &dir.join("report.txt"),
        &render_report(&audit_report, ReportFormat::HumanReadable),
    )?;

    for line in &audit_report.summary {
        println!("{line}");
    }
    println!("run directory: {}", dir.display());

    let any_noncompliant = audit_report
        .verdicts
        .iter()
        .any(|v| v.verdict == Verdict::NonCompliant);
    if fail_on_noncompliant && any_noncompliant {
        return Ok(EXIT_NONCOMPLIANT);
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(
    plan_path: &Path,
    platform_path: &Path,
    grid_path: &Path,
    runs: u32,
    out: Option<PathBuf>,
    seed_flag: Option<u64>,
) -> Result<u8, u8> {
    let plan_text = read(plan_path)?;
    let plan = match parse_plan_lenient(&plan_text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: invalid plan: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    if !validate_plan(&plan).is_valid() {
        eprintln!("error: plan fails validation; run `dsa-audit validate` for details");
        return Ok(EXIT_VALIDATION);
    }
    let config = match parse_platform_config(&read(platform_path)?) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid platform config: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let grid: SweepGrid = match toml::from_str(&read(grid_path)?) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: invalid sweep grid: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let seed = resolve_seed(seed_flag, &plan_text, plan.seed);
    let curve = match power_sweep(&plan, &config, &grid, runs, seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: sweep failed: {e}");
            return Ok(EXIT_ADAPTER);
        }
    };

    let dir = out.unwrap_or_else(|| PathBuf::from("sweep-out"));
    fs::create_dir_all(&dir).map_err(|e| {
        eprintln!("error: cannot create {}: {e}", dir.display());
        EXIT_IO
    })?;
    write(&dir.join("power_curve.csv"), &power_curve_csv(&curve))?;

    let mut summary = String::from("POWER SWEEP SUMMARY\n\n");
    summary.push_str("  w_match  cohort  days    power (se)        false-pos (se)\n");
    for c in &curve.cells {
        let bar_len = (c.power * 30.0).round() as usize;
        summary.push_str(&format!(
            "  {:>7}  {:>6}  {:>4}  {:.3} ({:.3})  {:<30}  {:.3} ({:.3})\n",
            c.w_match,
            c.cohort_size,
            c.duration_days,
            c.power,
            c.power_se,
            "#".repeat(bar_len),
            c.false_positive_rate,
            c.false_positive_se
        ));
    }
    write(&dir.join("sweep_summary.txt"), &summary)?;
    print!("{summary}");
    println!("sweep outputs in {}", dir.display());
    Ok(EXIT_OK)
}

fn cmd_replay(
    explog_path: &Path,
    plan_override: Option<PathBuf>,
    platform_override: Option<PathBuf>,
) -> Result<u8, u8> {
    let file = fs::File::open(explog_path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", explog_path.display());
        EXIT_IO
    })?;
    let log = match read_explog(std::io::BufReader::new(file)) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: malformed log: {e}");
            return Ok(EXIT_IO);
        }
    };
    let base = explog_path.parent().unwrap_or(Path::new("."));
    let plan_path = plan_override.unwrap_or_else(|| base.join("audit.plan"));
    let platform_path = platform_override.unwrap_or_else(|| base.join("platform.platform"));
    let plan = match parse_plan_lenient(&read(&plan_path)?) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: invalid plan: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let config = match parse_platform_config(&read(&platform_path)?) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid platform config: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    match replay_verify(&log, &plan, &config) {
        Ok(outcome) if outcome.matches => {
            println!(
                "replay ok: {} records match (run {})",
                log.records.len(),
                log.header.run_id
            );
            Ok(EXIT_OK)
        }
        Ok(outcome) => {
            eprintln!(
                "replay mismatch at sequence {}",
                outcome.first_divergence.unwrap_or(0)
            );
            Ok(EXIT_REPLAY)
        }
        Err(e) => {
            eprintln!("replay rejected: {e}");
            eprintln!("input hashes (plan {}): header binds plan {}", hash_of(&plan), log.header.plan_hash);
            Ok(EXIT_REPLAY)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { plan } => cmd_validate(&plan),
        Command::Run {
            plan,
            platform,
            seed,
            out,
            fail_on_noncompliant,
            window_days,
        } => cmd_run(&plan, &platform, seed, out, fail_on_noncompliant, window_days),
        Command::Sweep {
            plan,
            platform,
            grid,
            runs,
            out,
            seed,
        } => cmd_sweep(&plan, &platform, &grid, runs, out, seed),
        Command::Replay {
            explog,
            plan,
            platform,
        } => cmd_replay(&explog, plan, platform),
    };
    match result {
        Ok(code) | Err(code) => ExitCode::from(code),
    }
}
