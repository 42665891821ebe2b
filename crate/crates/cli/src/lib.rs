//! Command implementations behind the `flashtco` binary.
//!
//! Every subcommand reads its inputs, computes, then writes all outputs plus
//! a `manifest.json` describing the run; nothing is written on failure, and
//! reruns from the same inputs produce byte-identical outputs (no clocks, no
//! unseeded randomness, stable field order).
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
//! invariant violation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use flashtco::allocator::PolicySpec;
use flashtco::offline::{offline_plan, OfflineConfig, OfflinePlan};
use flashtco::raid::{raid_pseudo_disk, RaidMode};
use flashtco::sim::{compare_reports, run_simulation, SimConfig, SimulationReport};
use flashtco::tco::{DiskSpec, WorkloadProfile};
use flashtco::trace::{parse_trace, profile_workload, TraceFormat};
use flashtco::waf::{self, WafModel};

/// Failure classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2: flags or configuration files are wrong.
    Config(String),
    /// Exit 3: input data is missing or malformed.
    Data(String),
    /// Exit 4: an internal invariant broke.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Copy of the run parameters written next to every output set.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| CliError::Internal(format!("manifest serialization: {e}")))?;
    write_output(&out_dir.join("manifest.json"), text.as_bytes())
}

// ---------------------------------------------------------------------------
// Input file schemas
// ---------------------------------------------------------------------------

/// One row of the workload CSV
/// (`id,arrival_days,seq_ratio,write_rate_gb_day,peak_iops,write_ratio,working_set_gb`).
#[derive(Debug, Serialize, Deserialize)]
struct WorkloadRow {
    id: String,
    arrival_days: f64,
    seq_ratio: f64,
    write_rate_gb_day: f64,
    peak_iops: f64,
    write_ratio: f64,
    working_set_gb: f64,
}

impl From<WorkloadRow> for WorkloadProfile {
    fn from(r: WorkloadRow) -> Self {
        WorkloadProfile {
            id: r.id,
            arrival: r.arrival_days,
            seq_ratio: r.seq_ratio,
            write_rate: r.write_rate_gb_day,
            peak_iops: r.peak_iops,
            write_ratio: r.write_ratio,
            working_set: r.working_set_gb,
        }
    }
}

impl From<&WorkloadProfile> for WorkloadRow {
    fn from(w: &WorkloadProfile) -> Self {
        WorkloadRow {
            id: w.id.clone(),
            arrival_days: w.arrival,
            seq_ratio: w.seq_ratio,
            write_rate_gb_day: w.write_rate,
            peak_iops: w.peak_iops,
            write_ratio: w.write_ratio,
            working_set_gb: w.working_set,
        }
    }
}

pub fn read_workloads_csv(path: &Path) -> Result<Vec<WorkloadProfile>> {
    let text = read_to_string(path)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in rdr.deserialize::<WorkloadRow>() {
        let row = row.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let w: WorkloadProfile = row.into();
        w.validate().map_err(CliError::Data)?;
        out.push(w);
    }
    Ok(out)
}

fn workloads_to_csv(workloads: &[WorkloadProfile]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for w in workloads {
        wtr.serialize(WorkloadRow::from(w))
            .map_err(|e| CliError::Internal(format!("workload csv: {e}")))?;
    }
    wtr.into_inner().map_err(|e| CliError::Internal(format!("workload csv: {e}")))
}

/// Per-entry RAID stanza in the pool file.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RaidStanza {
    pub mode: RaidMode,
    pub n: u32,
}

/// One pool entry: a disk spec whose WAF model may come from `--waf-model`,
/// optionally collapsed from a RAID set.
#[derive(Debug, Deserialize)]
struct PoolEntry {
    id: String,
    cost_purchase: f64,
    cost_setup: f64,
    rate_power: f64,
    rate_labor: f64,
    write_limit: f64,
    capacity_space: f64,
    capacity_iops: f64,
    #[serde(default)]
    waf_model: Option<WafModel>,
    #[serde(default)]
    raid: Option<RaidStanza>,
}

/// Loads the pool file, filling missing WAF models from `default_waf` and
/// expanding RAID stanzas (per-entry, or the uniform `--raid` override for
/// entries without one) into pseudo-disks.
pub fn load_pool(
    path: &Path,
    default_waf: Option<&WafModel>,
    uniform_raid: Option<RaidStanza>,
) -> Result<Vec<DiskSpec>> {
    let text = read_to_string(path)?;
    let entries: Vec<PoolEntry> = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut pool = Vec::with_capacity(entries.len());
    for entry in entries {
        let waf_model = match (entry.waf_model, default_waf) {
            (Some(m), _) => m,
            (None, Some(m)) => m.clone(),
            (None, None) => {
                return Err(CliError::Config(format!(
                    "disk {} has no waf_model and no --waf-model was given",
                    entry.id
                )))
            }
        };
        let spec = DiskSpec {
            id: entry.id,
            cost_purchase: entry.cost_purchase,
            cost_setup: entry.cost_setup,
            rate_power: entry.rate_power,
            rate_labor: entry.rate_labor,
            write_limit: entry.write_limit,
            capacity_space: entry.capacity_space,
            capacity_iops: entry.capacity_iops,
            waf_model,
            lambda_mult: 1.0,
            write_penalty: 1.0,
        };
        let spec = match entry.raid.or(uniform_raid) {
            Some(r) => raid_pseudo_disk(&spec, r.n, r.mode)
                .map_err(|e| CliError::Config(e.to_string()))?
                .derived,
            None => spec,
        };
        spec.validate().map_err(CliError::Config)?;
        pool.push(spec);
    }
    Ok(pool)
}

pub fn parse_raid_flag(text: &str) -> Result<RaidStanza> {
    let (mode, n) = text
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("--raid wants mode:n, got {text:?}")))?;
    let mode = match mode.to_ascii_lowercase().as_str() {
        "raid0" | "0" | "strip" => RaidMode::Raid0,
        "raid1" | "1" | "mirror" => RaidMode::Raid1,
        "raid5" | "5" | "pair" => RaidMode::Raid5,
        other => return Err(CliError::Config(format!("unknown RAID mode {other:?}"))),
    };
    let n: u32 = n
        .parse()
        .map_err(|_| CliError::Config(format!("--raid member count {n:?} is not a number")))?;
    Ok(RaidStanza { mode, n })
}

fn load_waf_model(path: &Path) -> Result<WafModel> {
    let text = read_to_string(path)?;
    let model: WafModel = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    model.validate().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(model)
}

fn manifest_inputs(pairs: &[(&str, &Path)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, p)| (k.to_string(), p.display().to_string()))
        .collect()
}

// ---------------------------------------------------------------------------
// fit-waf
// ---------------------------------------------------------------------------

pub fn cmd_fit_waf(samples: &Path, grid: Option<&str>, out_dir: &Path) -> Result<()> {
    let text = read_to_string(samples)?;
    let points = waf::read_samples_csv(text.as_bytes())
        .map_err(|e| CliError::Data(format!("{}: {e}", samples.display())))?;
    let candidates = match grid {
        Some(g) => g
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Config(format!("bad grid value {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?,
        None => waf::default_turning_grid(),
    };
    let outcome = waf::fit(&points, &candidates)
        .map_err(|e| CliError::Data(format!("fit failed: {e}")))?;

    println!("turning point: {}", outcome.model.turning_point);
    println!("total squared residual: {:.6e}", outcome.residual);
    for c in &outcome.candidates {
        match c.residual {
            Some(r) => println!("  candidate {:.4}: residual {r:.6e}", c.turning_point),
            None => println!("  candidate {:.4}: infeasible", c.turning_point),
        }
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w:?}");
    }

    let model_json = serde_json::to_string_pretty(&outcome.model)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    write_output(&out_dir.join("model.json"), model_json.as_bytes())?;
    write_manifest(
        out_dir,
        &RunManifest {
            subcommand: "fit-waf".into(),
            inputs: manifest_inputs(&[("samples", samples)]),
            outputs: vec!["model.json".into()],
            seed: None,
            config: Some(serde_json::json!({ "grid": candidates })),
        },
    )
}

// ---------------------------------------------------------------------------
// profile
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn cmd_profile(
    trace: &Path,
    layout: TraceFormat,
    id: Option<&str>,
    arrival: f64,
    window_secs: f64,
    out_dir: &Path,
) -> Result<()> {
    let events =
        parse_trace(trace, layout).map_err(|e| CliError::Data(format!("{e}")))?;
    let fallback = trace
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "workload".to_string());
    let id = id.unwrap_or(&fallback);
    let profile = profile_workload(id, arrival, &events, window_secs)
        .map_err(|e| CliError::Data(format!("{e}")))?;
    println!(
        "{}: S={:.4} rate={:.4} GB/day peak={:.2} IOPS writes={:.4} ws={:.4} GB",
        profile.id, profile.seq_ratio, profile.write_rate, profile.peak_iops,
        profile.write_ratio, profile.working_set
    );
    let csv_bytes = workloads_to_csv(std::slice::from_ref(&profile))?;
    write_output(&out_dir.join("workloads.csv"), &csv_bytes)?;
    write_manifest(
        out_dir,
        &RunManifest {
            subcommand: "profile".into(),
            inputs: manifest_inputs(&[("trace", trace)]),
            outputs: vec!["workloads.csv".into()],
            seed: None,
            config: Some(serde_json::json!({
                "layout": layout,
                "window_secs": window_secs,
                "arrival": arrival,
            })),
        },
    )
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn series_csv(report: &SimulationReport) -> String {
    let mut out = String::from("time,tco_rate,util_space,util_iops,cv_space,cv_iops\n");
    for p in &report.series {
        let rate = p.tco_rate.map(|r| r.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.time, rate, p.util_space, p.util_iops, p.cv_space, p.cv_iops
        );
    }
    out
}

fn decisions_csv(report: &SimulationReport) -> String {
    let mut out = String::from("time,workload,disk,score,rejected\n");
    for d in &report.decisions {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            d.time,
            d.workload,
            d.disk.clone().unwrap_or_default(),
            d.score.map(|s| s.to_string()).unwrap_or_default(),
            d.rejected
        );
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    workloads: &Path,
    pool: &Path,
    policy: &Path,
    seed: Option<u64>,
    waf_model: Option<&Path>,
    raid: Option<&str>,
    out_dir: &Path,
) -> Result<()> {
    let ws = read_workloads_csv(workloads)?;
    let default_waf = waf_model.map(load_waf_model).transpose()?;
    let uniform_raid = raid.map(parse_raid_flag).transpose()?;
    let specs = load_pool(pool, default_waf.as_ref(), uniform_raid)?;
    let policy_text = read_to_string(policy)?;
    let mut cfg: SimConfig = serde_json::from_str(&policy_text)
        .map_err(|e| CliError::Config(format!("{}: {e}", policy.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let report = run_simulation(&cfg, &ws, &specs)
        .map_err(|e| CliError::Data(format!("simulation failed: {e}")))?;

    match report.final_tco_rate {
        Some(r) => println!(
            "{}: final rate {:.4} $/GB, {} rejections",
            report.policy,
            r,
            report.rejections.len()
        ),
        None => println!("{}: final rate undefined (pool never warmed)", report.policy),
    }

    let report_json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    write_output(&out_dir.join("report.json"), report_json.as_bytes())?;
    write_output(&out_dir.join("series.csv"), series_csv(&report).as_bytes())?;
    write_output(&out_dir.join("decisions.csv"), decisions_csv(&report).as_bytes())?;
    write_manifest(
        out_dir,
        &RunManifest {
            subcommand: "simulate".into(),
            inputs: manifest_inputs(&[
                ("workloads", workloads),
                ("pool", pool),
                ("policy", policy),
            ]),
            outputs: vec!["report.json".into(), "series.csv".into(), "decisions.csv".into()],
            seed: Some(cfg.seed),
            config: serde_json::to_value(&cfg).ok(),
        },
    )
}

// ---------------------------------------------------------------------------
// offline-plan
// ---------------------------------------------------------------------------

fn assignments_csv(plan: &OfflinePlan, workloads: &[WorkloadProfile]) -> String {
    let mut out = String::from("disk,zone,workload,seq_ratio,write_rate\n");
    for zone in &plan.zones {
        for disk in &zone.disks {
            for wid in &disk.workload_ids {
                let w = workloads.iter().find(|w| &w.id == wid);
                let (seq, rate) = w.map(|w| (w.seq_ratio, w.write_rate)).unwrap_or((0.0, 0.0));
                let _ = writeln!(out, "{},{},{},{},{}", disk.id, zone.label, wid, seq, rate);
            }
        }
    }
    out
}

pub fn cmd_offline_plan(workloads: &Path, config: &Path, out_dir: &Path) -> Result<()> {
    let ws = read_workloads_csv(workloads)?;
    let cfg_text = read_to_string(config)?;
    let cfg: OfflineConfig = serde_json::from_str(&cfg_text)
        .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
    let plan = offline_plan(&ws, &cfg).map_err(|e| CliError::Data(e.to_string()))?;

    println!(
        "approach {:?}: disks {}, rate {}, rejections {}",
        plan.approach,
        plan.disk_count,
        plan.tco_rate.map(|r| format!("{r:.4} $/GB")).unwrap_or_else(|| "n/a".into()),
        plan.rejections.len()
    );

    let plan_json =
        serde_json::to_string_pretty(&plan).map_err(|e| CliError::Internal(e.to_string()))?;
    write_output(&out_dir.join("plan.json"), plan_json.as_bytes())?;
    write_output(&out_dir.join("assignments.csv"), assignments_csv(&plan, &ws).as_bytes())?;
    write_manifest(
        out_dir,
        &RunManifest {
            subcommand: "offline-plan".into(),
            inputs: manifest_inputs(&[("workloads", workloads), ("offline_config", config)]),
            outputs: vec!["plan.json".into(), "assignments.csv".into()],
            seed: None,
            config: serde_json::to_value(&cfg).ok(),
        },
    )
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

pub fn cmd_compare(reports: &[PathBuf], out_dir: &Path) -> Result<()> {
    if reports.len() < 2 {
        return Err(CliError::Config("compare needs at least two --reports".into()));
    }
    let mut parsed = Vec::with_capacity(reports.len());
    for path in reports {
        let text = read_to_string(path)?;
        let report: SimulationReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        parsed.push(report);
    }
    let rows = compare_reports(&parsed).map_err(|e| CliError::Data(e.to_string()))?;

    let mut out = String::from(
        "policy,final_tco_rate,realized_tco_rate,util_space_mean,util_iops_mean,\
         cv_space,cv_iops,cv_workload_count,util_space_avg,util_iops_avg,\
         cv_space_avg,cv_iops_avg,rejections,delta_vs_best\n",
    );
    for r in &rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.policy,
            r.final_tco_rate.map(|x| x.to_string()).unwrap_or_default(),
            r.realized_tco_rate.map(|x| x.to_string()).unwrap_or_default(),
            r.util_space_mean,
            r.util_iops_mean,
            r.cv_space,
            r.cv_iops,
            r.cv_workload_count,
            r.util_space_avg,
            r.util_iops_avg,
            r.cv_space_avg,
            r.cv_iops_avg,
            r.rejections,
            r.delta_vs_best.map(|x| x.to_string()).unwrap_or_default(),
        );
    }
    print!("{out}");
    write_output(&out_dir.join("table.csv"), out.as_bytes())?;
    write_manifest(
        out_dir,
        &RunManifest {
            subcommand: "compare".into(),
            inputs: reports
                .iter()
                .enumerate()
                .map(|(i, p)| (format!("report{i}"), p.display().to_string()))
                .collect(),
            outputs: vec!["table.csv".into()],
            seed: None,
            config: None,
        },
    )
}

// Re-exported for integration tests that need to build policy files.
pub use flashtco::allocator::{PerfWeights, PolicyKind};

/// Convenience used by tests and docs: a ready-to-serialize simulate config.
pub fn sim_config(policy: PolicySpec, horizon: f64, seed: u64) -> SimConfig {
    SimConfig { policy, horizon, seed }
}
