//! `hjlab` — experiment driver for the Hamilton-Jacobi laboratory.
//!
//! Subcommands consume a strict JSON config and emit deterministic data
//! files plus a manifest with content hashes. Exit codes: 0 when all checks
//! pass, 2 when checks fail (reports are still written), 1 on I/O or
//! configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use hjlab_core::config::{parse_config, ExperimentConfig};
use hjlab_core::critical_value::{
    check_cr_stability, default_velocity_window, estimate_c_infmax, estimate_c_longtime,
    CriticalValueEstimate, InfMaxOptions, RStabilityReport,
};
use hjlab_core::grid::TorusGrid;
use hjlab_core::hamiltonian::{build_modified, verify_claims, AlphaBounds, SamplingSpec};
use hjlab_core::io::{
    write_json, write_lip_series_csv, write_orbit_csv, write_trace_csv, TraceSidecar,
};
use hjlab_core::lax_oleinik::{evolve, reconstruct_orbit};
use hjlab_core::legendre::LagrangianEvaluator;
use hjlab_core::regularity::run_family_experiment;
use hjlab_core::HamiltonianModel;

#[derive(Parser)]
#[command(name = "hjlab", version, about = "Hamilton-Jacobi laboratory on the flat torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the modified Hamiltonian for each scheduled cutoff and verify
    /// its smoothness, convexity and superlinearity by sampling.
    VerifyHr(RunArgs),
    /// Estimate the critical value by the long-time and inf-max routes and
    /// check stability across the cutoff schedule.
    CriticalValue(RunArgs),
    /// Evolve the first configured initial datum, exporting the full trace
    /// and one reconstructed orbit.
    Evolve(RunArgs),
    /// Run the multi-initial-data asymptotic regularity experiment.
    RegularityExperiment(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (falls back to HJLAB_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::VerifyHr(a) => ("verify-hr", a),
        Command::CriticalValue(a) => ("critical-value", a),
        Command::Evolve(a) => ("evolve", a),
        Command::RegularityExperiment(a) => ("regularity-experiment", a),
    };
    if let Some(threads) = args.threads.or_else(env_threads) {
        // a failure here only means a pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(name, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn env_threads() -> Option<usize> {
    std::env::var("HJLAB_THREADS").ok()?.parse().ok()
}

fn run(name: &str, args: &RunArgs) -> Result<bool> {
    let cfg = parse_config(&args.config)?;
    let base = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("hjlab_out"));
    let mut emitter = Emitter::new(base.join(name))?;
    let pass = match name {
        "verify-hr" => cmd_verify_hr(&cfg, &mut emitter)?,
        "critical-value" => cmd_critical_value(&cfg, &mut emitter)?,
        "evolve" => cmd_evolve(&cfg, &mut emitter)?,
        "regularity-experiment" => cmd_regularity(&cfg, &mut emitter)?,
        _ => unreachable!(),
    };
    emitter.finish(name, &args.config)?;
    println!("{name}: {}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

/// Collects emitted data files and writes the hash manifest plus the
/// timestamped metadata sidecar (the only file carrying a timestamp, and
/// deliberately absent from the manifest).
struct Emitter {
    dir: PathBuf,
    files: Vec<ManifestEntry>,
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
    bytes: u64,
}

impl Emitter {
    fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Emitter { dir, files: Vec::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) -> Result<()> {
        let data = std::fs::read(self.path(name))?;
        let mut hasher = Sha256::new();
        hasher.update(&data);
        self.files.push(ManifestEntry {
            path: name.to_string(),
            sha256: hex::encode(hasher.finalize()),
            bytes: data.len() as u64,
        });
        Ok(())
    }

    fn finish(self, subcommand: &str, config_path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            files: &'a [ManifestEntry],
        }
        write_json(&self.dir.join("manifest.json"), &Manifest { files: &self.files })?;
        #[derive(Serialize)]
        struct RunMetadata<'a> {
            subcommand: &'a str,
            config: String,
            version: &'a str,
            unix_timestamp_secs: u64,
        }
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        write_json(
            &self.dir.join("run_metadata.json"),
            &RunMetadata {
                subcommand,
                config: config_path.display().to_string(),
                version: env!("CARGO_PKG_VERSION"),
                unix_timestamp_secs: ts,
            },
        )?;
        Ok(())
    }
}

#[derive(Serialize)]
struct VerifyEntry {
    r_cut: f64,
    mu: Option<f64>,
    gamma: Option<f64>,
    alpha_bounds: Option<AlphaBounds>,
    report: Option<hjlab_core::ClaimsReport>,
    error: Option<String>,
    ok: bool,
}

fn cmd_verify_hr(cfg: &ExperimentConfig, emitter: &mut Emitter) -> Result<bool> {
    let model = HamiltonianModel::new(cfg.preset, cfg.potential, cfg.dim)?;
    let sampling = SamplingSpec::default();
    let mut entries = Vec::new();
    for &r in &cfg.r_schedule {
        let entry = match build_modified(model, r) {
            Ok(hr) => {
                let report = verify_claims(&hr, &sampling);
                let ok = report.all_ok();
                VerifyEntry {
                    r_cut: r,
                    mu: Some(hr.mu),
                    gamma: Some(hr.gamma),
                    alpha_bounds: Some(hr.alpha_bounds),
                    report: Some(report),
                    error: None,
                    ok,
                }
            }
            Err(e) => VerifyEntry {
                r_cut: r,
                mu: None,
                gamma: None,
                alpha_bounds: None,
                report: None,
                error: Some(e.to_string()),
                ok: false,
            },
        };
        println!(
            "verify-hr R={r}: {} (min eig {})",
            if entry.ok { "ok" } else { "FAILED" },
            entry
                .report
                .as_ref()
                .map(|c| format!("{:.3e}", c.min_hessian_eig))
                .unwrap_or_else(|| "n/a".to_string())
        );
        entries.push(entry);
    }
    let pass = entries.iter().all(|e| e.ok);
    write_json(&emitter.path("hr_verification.json"), &entries)?;
    emitter.record("hr_verification.json")?;
    Ok(pass)
}

#[derive(Serialize)]
struct CriticalValueRecord {
    preset: hjlab_core::Preset,
    potential: hjlab_core::PotentialKind,
    estimates: Vec<CriticalValueEstimate>,
    cross_method_gap: f64,
    cross_method_tol: f64,
    cross_ok: bool,
    stability: RStabilityReport,
}

fn cmd_critical_value(cfg: &ExperimentConfig, emitter: &mut Emitter) -> Result<bool> {
    let model = HamiltonianModel::new(cfg.preset, cfg.potential, cfg.dim)?;
    let grid = TorusGrid::new(cfg.dim, cfg.n)?;
    let hr = build_modified(model, cfg.largest_r())?;
    let infmax = estimate_c_infmax(&hr, &grid, &InfMaxOptions::default());
    let le = LagrangianEvaluator::new(hr);
    let v_max = cfg
        .v_max_override
        .or_else(|| Some(default_velocity_window(&model, infmax.c_est)));
    let longtime = estimate_c_longtime(&le, &grid, cfg.tau, cfg.t_final, v_max)?;
    let gap = (longtime.c_est - infmax.c_est).abs();
    let cross_ok = gap <= cfg.tolerances.c_cross_method && !longtime.diagnostics.boundary_flagged;
    let stability = check_cr_stability(model, &cfg.r_schedule, &grid, cfg.tolerances.c_r_stability)?;
    println!(
        "critical-value: longtime {:.6} / infmax {:.6} (gap {:.2e}), stability {}",
        longtime.c_est,
        infmax.c_est,
        gap,
        if stability.pass { "ok" } else { "FAILED" }
    );
    let pass = cross_ok && stability.pass;
    let record = CriticalValueRecord {
        preset: cfg.preset,
        potential: cfg.potential,
        estimates: vec![longtime, infmax],
        cross_method_gap: gap,
        cross_method_tol: cfg.tolerances.c_cross_method,
        cross_ok,
        stability,
    };
    write_json(&emitter.path("critical_value.json"), &record)?;
    emitter.record("critical_value.json")?;
    Ok(pass)
}

fn cmd_evolve(cfg: &ExperimentConfig, emitter: &mut Emitter) -> Result<bool> {
    let model = HamiltonianModel::new(cfg.preset, cfg.potential, cfg.dim)?;
    let grid = TorusGrid::new(cfg.dim, cfg.n)?;
    let hr = build_modified(model, cfg.largest_r())?;
    let c_est = estimate_c_infmax(&hr, &grid, &InfMaxOptions::default()).c_est;
    let v_max = cfg
        .v_max_override
        .unwrap_or_else(|| default_velocity_window(&model, c_est));
    let le = LagrangianEvaluator::new(hr);
    let phi = cfg.initial_data[0].sample(grid)?;
    let trace = evolve(&phi, &le, cfg.tau, cfg.t_final, v_max)?;

    write_trace_csv(&emitter.path("evolve_trace.csv"), &trace)?;
    emitter.record("evolve_trace.csv")?;
    write_json(&emitter.path("evolve_trace_meta.json"), &TraceSidecar::of(&trace))?;
    emitter.record("evolve_trace_meta.json")?;
    if trace.steps() > 0 {
        let orbit = reconstruct_orbit(&trace, 0, trace.final_snapshot().time)?;
        write_orbit_csv(&emitter.path("orbit.csv"), &orbit)?;
        emitter.record("orbit.csv")?;
    }

    let burn_in = (cfg.tolerances.burn_in_fraction * trace.steps() as f64).round() as usize;
    let late_hit = trace.boundary_hit_after(burn_in);
    println!(
        "evolve: {} steps, window boundary after burn-in: {}",
        trace.steps(),
        if late_hit { "HIT" } else { "clear" }
    );
    Ok(!late_hit)
}

fn cmd_regularity(cfg: &ExperimentConfig, emitter: &mut Emitter) -> Result<bool> {
    let outcome = run_family_experiment(cfg, false)?;
    let report = &outcome.report;
    write_json(&emitter.path("regularity_report.json"), report)?;
    emitter.record("regularity_report.json")?;
    write_lip_series_csv(&emitter.path("lip_series.csv"), &outcome.series_rows)?;
    emitter.record("lip_series.csv")?;

    let tol = &cfg.tolerances;
    let no_late_hits = report
        .per_datum
        .iter()
        .all(|d| !d.boundary_hit_after_burn_in);
    let factor_ok = report
        .family_agreement_factor
        .map(|f| f <= tol.family_agreement_factor)
        .unwrap_or(false);
    let r_gap_ok = report
        .r_agreement_gap
        .map(|g| g <= tol.r_agreement)
        .unwrap_or(false);
    for d in &report.per_datum {
        println!(
            "regularity {}: t0 {:?}, iota {:?}, late boundary hit {}",
            d.id, d.t0, d.iota, d.boundary_hit_after_burn_in
        );
    }
    println!(
        "regularity family: detected {} t0* {:?} iota* {:?} factor {:?} r-gap {:?}",
        report.all_detected,
        report.common_t0,
        report.common_iota,
        report.family_agreement_factor,
        report.r_agreement_gap
    );
    Ok(report.all_detected && factor_ok && r_gap_ok && no_late_hits)
}
