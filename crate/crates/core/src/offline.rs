//! Offline provisioning and placement for a homogeneous disk pool.
//!
//! With the full workload set known up front, the planner first splits it at
//! a sequential-ratio threshold into high and low groups. If the groups'
//! total write rates are close (normalized difference below the switching
//! threshold), workloads are *grouped*: each group is sorted by descending
//! sequential ratio and distributed into its own disk zone, which keeps
//! disk-level sequential ratios pure and WAF low. Otherwise the planner falls
//! back to a *greedy* pass over the whole set in input order. Either way,
//! distribution balances per-disk write rates: each workload goes to the
//! feasible disk that minimizes the zone's write-rate CV, and a new disk is
//! provisioned only when no existing disk fits.
//!
//! [`diff_tco_grouping_vs_greedy`] is the closed-form cost difference between
//! the two approaches for a two-zone pool; for balanced group rates its sign
//! is pinned by concavity of the WAF curve (the mixed ratio's WAF dominates
//! the harmonic mean of the groups' WAFs), so grouping never loses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{run_pinned, SimError};
use crate::tco::{combined_seq_ratio, combined_write_rate, DiskSpec, WorkloadProfile};
use crate::waf::{WafError, WafModel};

/// Default sequential-ratio threshold between the high and low groups.
pub const DEFAULT_SEQ_THRESHOLD: f64 = 0.6;

/// Default approach-switching threshold on the normalized write-rate
/// difference between the two groups.
pub const DEFAULT_SWITCH_DELTA: f64 = 0.1346;

#[derive(Debug, Error)]
pub enum OfflineError {
    #[error("bad offline configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Waf(#[from] WafError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OfflineConfig {
    /// Zone boundaries, strictly decreasing, each in (0, 1). One threshold
    /// makes two zones.
    #[serde(default = "default_thresholds")]
    pub seq_thresholds: Vec<f64>,
    /// Normalized write-rate difference at which the planner abandons
    /// grouping for greedy.
    #[serde(default = "default_delta")]
    pub switch_delta: f64,
    /// The homogeneous disk model to provision.
    pub disk_spec: DiskSpec,
}

fn default_thresholds() -> Vec<f64> {
    vec![DEFAULT_SEQ_THRESHOLD]
}

fn default_delta() -> f64 {
    DEFAULT_SWITCH_DELTA
}

impl OfflineConfig {
    pub fn validate(&self) -> Result<(), OfflineError> {
        if self.seq_thresholds.is_empty() {
            return Err(OfflineError::BadConfig("need at least one threshold".into()));
        }
        for w in self.seq_thresholds.windows(2) {
            if w[1] >= w[0] {
                return Err(OfflineError::BadConfig(
                    "thresholds must be strictly decreasing".into(),
                ));
            }
        }
        for &t in &self.seq_thresholds {
            if !(t > 0.0 && t < 1.0) {
                return Err(OfflineError::BadConfig(format!("threshold {t} outside (0, 1)")));
            }
        }
        if !(0.0..=1.0).contains(&self.switch_delta) {
            return Err(OfflineError::BadConfig(format!(
                "switch delta {} outside [0, 1]",
                self.switch_delta
            )));
        }
        self.disk_spec.validate().map_err(OfflineError::BadConfig)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Grouping,
    Greedy,
}

/// One provisioned disk inside a zone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannedDisk {
    pub id: String,
    pub workload_ids: Vec<String>,
    pub write_rate: f64,
    pub seq_ratio: Option<f64>,
    pub used_space: f64,
    pub used_iops: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZonePlan {
    pub label: String,
    /// Sequential-ratio interval `[lower, upper)` served by the zone
    /// (the top zone is closed at 1).
    pub lower: f64,
    pub upper: f64,
    pub disks: Vec<PlannedDisk>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OfflinePlan {
    pub approach: Approach,
    pub zones: Vec<ZonePlan>,
    pub disk_count: usize,
    /// Expectation-based $/GB of the final allocation with all arrivals at
    /// t = 0; `None` when nothing was assigned.
    pub tco_rate: Option<f64>,
    /// Workloads no empty disk could hold.
    pub rejections: Vec<String>,
}

/// Partitions workloads by sequential ratio. Thresholds are strictly
/// decreasing; a workload joins the highest group whose threshold it meets
/// (boundary values go up). Groups are returned highest-first and partition
/// the input.
pub fn split_by_seq(
    workloads: &[WorkloadProfile],
    thresholds: &[f64],
) -> Vec<Vec<WorkloadProfile>> {
    let mut groups: Vec<Vec<WorkloadProfile>> = vec![Vec::new(); thresholds.len() + 1];
    for w in workloads {
        let g = thresholds
            .iter()
            .position(|&t| w.seq_ratio >= t)
            .unwrap_or(thresholds.len());
        groups[g].push(w.clone());
    }
    groups
}

/// Mutable disk being filled during distribution.
#[derive(Debug, Clone)]
pub struct DistDisk {
    pub assigned: Vec<WorkloadProfile>,
    pub write_rate: f64,
    pub used_space: f64,
    pub used_iops: f64,
}

impl DistDisk {
    fn new() -> Self {
        DistDisk { assigned: Vec::new(), write_rate: 0.0, used_space: 0.0, used_iops: 0.0 }
    }

    fn add(&mut self, w: &WorkloadProfile, spec: &DiskSpec) {
        self.write_rate += w.write_rate;
        self.used_space += w.working_set;
        self.used_iops += spec.effective_iops(w);
        self.assigned.push(w.clone());
    }

    fn fits(&self, w: &WorkloadProfile, spec: &DiskSpec) -> bool {
        spec.capacity_space - self.used_space >= w.working_set
            && spec.capacity_iops - self.used_iops >= spec.effective_iops(w)
    }
}

/// One step of the distribution trace: where the workload went, and whether
/// that disk was provisioned for it.
#[derive(Debug, Clone, Serialize)]
pub struct DistStep {
    pub workload: String,
    pub disk: Option<usize>,
    pub provisioned: bool,
}

/// Fills a zone with workloads, in the given order. Each workload goes to
/// the feasible disk minimizing the zone's write-rate CV after the addition
/// (ties to the lowest index); a new disk is provisioned when none fits, and
/// a workload even an empty disk cannot hold is rejected.
pub fn distribute(
    workloads: &[WorkloadProfile],
    spec: &DiskSpec,
    zone: &mut Vec<DistDisk>,
) -> Vec<DistStep> {
    let mut steps = Vec::with_capacity(workloads.len());
    for w in workloads {
        if spec.capacity_space < w.working_set || spec.capacity_iops < spec.effective_iops(w) {
            steps.push(DistStep { workload: w.id.clone(), disk: None, provisioned: false });
            continue;
        }
        let choice = best_existing_disk(zone, w, spec);
        match choice {
            Some(d) => {
                zone[d].add(w, spec);
                steps.push(DistStep { workload: w.id.clone(), disk: Some(d), provisioned: false });
            }
            None => {
                let mut disk = DistDisk::new();
                disk.add(w, spec);
                zone.push(disk);
                steps.push(DistStep {
                    workload: w.id.clone(),
                    disk: Some(zone.len() - 1),
                    provisioned: true,
                });
            }
        }
    }
    steps
}

fn best_existing_disk(zone: &[DistDisk], w: &WorkloadProfile, spec: &DiskSpec) -> Option<usize> {
    let rates: Vec<f64> = zone.iter().map(|d| d.write_rate).collect();
    let mut best: Option<(usize, f64)> = None;
    for (d, disk) in zone.iter().enumerate() {
        if !disk.fits(w, spec) {
            continue;
        }
        let mut hypothetical = rates.clone();
        hypothetical[d] += w.write_rate;
        let cv = crate::population_cv(&hypothetical);
        if best.is_none_or(|(_, b)| cv.total_cmp(&b).is_lt()) {
            best = Some((d, cv));
        }
    }
    best.map(|(d, _)| d)
}

/// Builds the full offline plan and evaluates its cost rate by replaying the
/// final allocation through the simulation engine with all arrivals at t = 0.
pub fn offline_plan(
    workloads: &[WorkloadProfile],
    cfg: &OfflineConfig,
) -> Result<OfflinePlan, OfflineError> {
    cfg.validate()?;
    // The switch predicate always looks at the two-group split by the first
    // threshold, regardless of how many zones are configured.
    let primary = split_by_seq(workloads, &cfg.seq_thresholds[..1]);
    let rate_high = combined_write_rate(&primary[0]);
    let rate_low = combined_write_rate(&primary[1]);
    let total = rate_high + rate_low;
    let norm_diff = if total > 0.0 { ((rate_high - rate_low) / total).abs() } else { 0.0 };

    let approach =
        if norm_diff >= cfg.switch_delta { Approach::Greedy } else { Approach::Grouping };

    let mut zones = Vec::new();
    let mut rejections = Vec::new();
    match approach {
        Approach::Greedy => {
            let mut zone = Vec::new();
            let steps = distribute(workloads, &cfg.disk_spec, &mut zone);
            rejections
                .extend(steps.iter().filter(|s| s.disk.is_none()).map(|s| s.workload.clone()));
            zones.push(build_zone("all", 0.0, 1.0, &zone, &cfg.disk_spec));
        }
        Approach::Grouping => {
            let groups = split_by_seq(workloads, &cfg.seq_thresholds);
            for (g, group) in groups.iter().enumerate() {
                let mut sorted = group.clone();
                sorted.sort_by(|a, b| b.seq_ratio.total_cmp(&a.seq_ratio));
                let mut zone = Vec::new();
                let steps = distribute(&sorted, &cfg.disk_spec, &mut zone);
                rejections.extend(
                    steps.iter().filter(|s| s.disk.is_none()).map(|s| s.workload.clone()),
                );
                let upper = if g == 0 { 1.0 } else { cfg.seq_thresholds[g - 1] };
                let lower = cfg.seq_thresholds.get(g).copied().unwrap_or(0.0);
                zones.push(build_zone(&format!("z{g}"), lower, upper, &zone, &cfg.disk_spec));
            }
        }
    }

    let disk_count = zones.iter().map(|z| z.disks.len()).sum();
    let tco_rate = evaluate_plan(&zones, workloads, &cfg.disk_spec)?;
    Ok(OfflinePlan { approach, zones, disk_count, tco_rate, rejections })
}

fn build_zone(
    label: &str,
    lower: f64,
    upper: f64,
    disks: &[DistDisk],
    spec: &DiskSpec,
) -> ZonePlan {
    ZonePlan {
        label: label.to_string(),
        lower,
        upper,
        disks: disks
            .iter()
            .enumerate()
            .map(|(i, d)| PlannedDisk {
                id: format!("{}-{}-{i}", spec.id, label),
                workload_ids: d.assigned.iter().map(|w| w.id.clone()).collect(),
                write_rate: d.write_rate,
                seq_ratio: combined_seq_ratio(&d.assigned).ok(),
                used_space: d.used_space,
                used_iops: d.used_iops,
            })
            .collect(),
    }
}

/// Simulated $/GB of the final allocation: every assigned workload arrives
/// at t = 0 on its planned disk.
fn evaluate_plan(
    zones: &[ZonePlan],
    workloads: &[WorkloadProfile],
    spec: &DiskSpec,
) -> Result<Option<f64>, OfflineError> {
    let mut specs = Vec::new();
    let mut assignments = Vec::new();
    for zone in zones {
        for disk in &zone.disks {
            let mut s = spec.clone();
            s.id = disk.id.clone();
            let index = specs.len();
            specs.push(s);
            for wid in &disk.workload_ids {
                let w = workloads
                    .iter()
                    .find(|w| &w.id == wid)
                    .expect("planned workload exists in input");
                assignments.push((WorkloadProfile { arrival: 0.0, ..w.clone() }, index));
            }
        }
    }
    if specs.is_empty() {
        return Ok(None);
    }
    let report = run_pinned(&specs, &assignments, 0.0)?;
    Ok(report.final_tco_rate)
}

/// Closed-form cost-rate difference, greedy minus grouping, $/GB, for one
/// homogeneous two-zone pool. `k` is the rate split (low-group rate over
/// high-group rate); positive result means grouping wins.
#[allow(clippy::too_many_arguments)]
pub fn diff_tco_grouping_vs_greedy(
    cost_init: f64,
    rate_maint: f64,
    write_limit: f64,
    waf: &WafModel,
    s_high: f64,
    s_low: f64,
    lambda_total: f64,
    k: f64,
) -> Result<f64, WafError> {
    assert!(k > 0.0, "rate split k must be positive");
    let a_high = waf.eval(s_high)?;
    let a_low = waf.eval(s_low)?;
    // Mixed ratio of the merged stream.
    let s_mixed = s_high / (k + 1.0) + k * s_low / (k + 1.0);
    let a_mixed = waf.eval(s_mixed)?;
    let capex = (2.0 * cost_init / write_limit)
        * (a_mixed / 2.0 - 1.0 / (1.0 / a_high + 1.0 / a_low));
    let opex = rate_maint * (k - 1.0) * (a_high - k * a_low)
        / (lambda_total * k * (a_high + a_low));
    Ok(capex + opex)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tco::tests::{spec_with_waf, workload};
    use rand::{Rng, SeedableRng};

    fn plain_spec() -> DiskSpec {
        let mut spec =
            spec_with_waf("disk", WafModel::flat_then_quadratic(3.0, 0.5, 1.0));
        spec.write_limit = 36_500.0;
        spec
    }

    fn cfg() -> OfflineConfig {
        OfflineConfig {
            seq_thresholds: vec![DEFAULT_SEQ_THRESHOLD],
            switch_delta: DEFAULT_SWITCH_DELTA,
            disk_spec: plain_spec(),
        }
    }

    #[test]
    fn default_config_values() {
        let c = cfg();
        assert_eq!(c.seq_thresholds, vec![0.6]);
        assert_eq!(c.switch_delta, 0.1346);
        c.validate().unwrap();
    }

    #[test]
    fn split_examples() {
        let groups =
            split_by_seq(&[workload("a", 1.0, 0.7), workload("b", 1.0, 0.3)], &[0.6]);
        assert_eq!(groups[0].len(), 1);
        assert_eq!(groups[0][0].id, "a");
        assert_eq!(groups[1][0].id, "b");

        // Boundary value joins the higher group.
        let groups = split_by_seq(&[workload("edge", 1.0, 0.6)], &[0.6]);
        assert_eq!(groups[0].len(), 1);
        assert!(groups[1].is_empty());

        let groups = split_by_seq(
            &[workload("a", 1.0, 0.9), workload("b", 1.0, 0.6), workload("c", 1.0, 0.1)],
            &[0.8, 0.4],
        );
        assert_eq!(
            groups.iter().map(|g| g.len()).collect::<Vec<_>>(),
            vec![1, 1, 1]
        );
    }

    #[test]
    fn symmetric_distribution_balances_perfectly() {
        let mut spec = plain_spec();
        spec.capacity_space = 25.0; // fits two 10 GB working sets
        let ws: Vec<WorkloadProfile> = (0..4)
            .map(|i| workload(&format!("w{i}"), 20.0, 0.5))
            .collect();
        let mut zone = Vec::new();
        let steps = distribute(&ws, &spec, &mut zone);
        assert_eq!(zone.len(), 2);
        assert!(steps.iter().all(|s| s.disk.is_some()));
        assert_eq!(zone[0].assigned.len(), 2);
        assert_eq!(zone[1].assigned.len(), 2);
        let rates: Vec<f64> = zone.iter().map(|d| d.write_rate).collect();
        assert_eq!(crate::population_cv(&rates), 0.0);
    }

    #[test]
    fn oversized_workload_rejected_even_on_empty_disk() {
        let spec = plain_spec();
        let w = WorkloadProfile { working_set: 1e6, ..workload("big", 5.0, 0.5) };
        let mut zone = Vec::new();
        let steps = distribute(&[w], &spec, &mut zone);
        assert_eq!(steps[0].disk, None);
        assert!(zone.is_empty());
    }

    #[test]
    fn distribution_matches_stepwise_cv_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let mut spec = plain_spec();
            spec.capacity_space = 45.0;
            let ws: Vec<WorkloadProfile> = (0..10)
                .map(|i| {
                    workload(&format!("w{i}"), rng.gen_range(1.0..40.0), rng.gen_range(0.0..1.0))
                })
                .collect();
            let mut zone = Vec::new();
            let steps = distribute(&ws, &spec, &mut zone);
            for d in &zone {
                assert!(d.used_space <= spec.capacity_space + 1e-9);
                assert!(d.used_iops <= spec.capacity_iops + 1e-9);
            }

            // Replay with an independent argmin over feasible disks.
            let mut shadow: Vec<DistDisk> = Vec::new();
            for (w, step) in ws.iter().zip(&steps) {
                let mut best: Option<(usize, f64)> = None;
                for (d, disk) in shadow.iter().enumerate() {
                    if !disk.fits(w, &spec) {
                        continue;
                    }
                    let mut rates: Vec<f64> = shadow.iter().map(|x| x.write_rate).collect();
                    rates[d] += w.write_rate;
                    let cv = crate::population_cv(&rates);
                    if best.is_none_or(|(_, b)| cv < b) {
                        best = Some((d, cv));
                    }
                }
                let expected = match best {
                    Some((d, _)) => Some(d),
                    None if spec.capacity_space >= w.working_set => Some(shadow.len()),
                    None => None,
                };
                assert_eq!(step.disk, expected, "workload {}", w.id);
                if let Some(d) = expected {
                    if d == shadow.len() {
                        shadow.push(DistDisk::new());
                    }
                    shadow[d].add(w, &spec);
                }
            }
        }
    }

    #[test]
    fn provisioning_is_lazy() {
        // A new disk appears only when no existing disk fits.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let mut spec = plain_spec();
        spec.capacity_space = 30.0;
        let ws: Vec<WorkloadProfile> = (0..20)
            .map(|i| {
                let mut w = workload(&format!("w{i}"), rng.gen_range(1.0..20.0), 0.5);
                w.working_set = rng.gen_range(5.0..15.0);
                w
            })
            .collect();
        let mut zone = Vec::new();
        let steps = distribute(&ws, &spec, &mut zone);
        let mut shadow: Vec<DistDisk> = Vec::new();
        for (w, step) in ws.iter().zip(&steps) {
            if step.provisioned {
                assert!(
                    shadow.iter().all(|d| !d.fits(w, &spec)),
                    "disk provisioned for {} while another fit",
                    w.id
                );
            }
            if let Some(d) = step.disk {
                if d == shadow.len() {
                    shadow.push(DistDisk::new());
                }
                shadow[d].add(w, &spec);
            }
        }
    }

    #[test]
    fn balanced_rates_choose_grouping() {
        let ws = vec![
            workload("h1", 50.0, 0.9),
            workload("h2", 50.0, 0.8),
            workload("l1", 50.0, 0.2),
            workload("l2", 50.0, 0.1),
        ];
        let plan = offline_plan(&ws, &cfg()).unwrap();
        assert_eq!(plan.approach, Approach::Grouping);
        assert_eq!(plan.zones.len(), 2);
        assert!(plan.tco_rate.is_some());
    }

    #[test]
    fn skewed_rates_choose_greedy() {
        // |1 - k| / (1 + k) with rates 100 vs 10 is about 0.818 >= 0.1346.
        let ws = vec![workload("h", 100.0, 0.9), workload("l", 10.0, 0.1)];
        let plan = offline_plan(&ws, &cfg()).unwrap();
        assert_eq!(plan.approach, Approach::Greedy);
        assert_eq!(plan.zones.len(), 1);
    }

    #[test]
    fn zone_seq_ratios_monotone_across_zones() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let ws: Vec<WorkloadProfile> = (0..40)
            .map(|i| {
                workload(&format!("w{i}"), rng.gen_range(5.0..20.0), rng.gen_range(0.0..1.0))
            })
            .collect();
        let mut c = cfg();
        c.seq_thresholds = vec![0.7, 0.4];
        c.switch_delta = 1.0; // force grouping
        let plan = offline_plan(&ws, &c).unwrap();
        assert_eq!(plan.approach, Approach::Grouping);
        let mut last_min = f64::INFINITY;
        for zone in &plan.zones {
            let ratios: Vec<f64> = zone.disks.iter().filter_map(|d| d.seq_ratio).collect();
            if ratios.is_empty() {
                continue;
            }
            let zmax = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let zmin = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(zmax <= last_min + 1e-12, "zone order violates monotonicity");
            last_min = zmin;
        }
    }

    #[test]
    fn diff_is_zero_for_identical_groups() {
        let waf = WafModel::flat_then_quadratic(3.0, 0.5, 1.0);
        let d =
            diff_tco_grouping_vs_greedy(1000.0, 2.0, 36_500.0, &waf, 0.7, 0.7, 100.0, 1.0)
                .unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn diff_positive_for_spread_groups() {
        let waf = WafModel::flat_then_quadratic(3.0, 0.5, 1.0);
        let d =
            diff_tco_grouping_vs_greedy(1000.0, 2.0, 36_500.0, &waf, 0.9, 0.1, 100.0, 1.0)
                .unwrap();
        assert!(d > 0.0, "diff {d}");
    }

    #[test]
    fn diff_matches_hand_simplified_balanced_form() {
        // With k = 1 the maintenance term cancels and the difference is
        // (2 C_I / W) * [A(mid) / 2 - 1 / (1/A_H + 1/A_L)].
        let waf = WafModel::flat_then_quadratic(3.0, 0.5, 1.0);
        for (s_h, s_l) in [(0.9, 0.1), (0.8, 0.55), (1.0, 0.0), (0.65, 0.6)] {
            let d = diff_tco_grouping_vs_greedy(
                1000.0, 2.0, 36_500.0, &waf, s_h, s_l, 100.0, 1.0,
            )
            .unwrap();
            let a_h = waf.eval(s_h).unwrap();
            let a_l = waf.eval(s_l).unwrap();
            let a_m = waf.eval((s_h + s_l) / 2.0).unwrap();
            let hand =
                (2.0 * 1000.0 / 36_500.0) * (a_m / 2.0 - 1.0 / (1.0 / a_h + 1.0 / a_l));
            assert!((d - hand).abs() < 1e-9, "{d} vs {hand}");
        }
    }

    #[test]
    fn balanced_sign_property_sampled() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(53);
        for _ in 0..500 {
            let beta = rng.gen_range(1.5..6.0);
            let eps = rng.gen_range(0.3..0.7);
            let end = rng.gen_range(1.0..beta);
            let waf = WafModel::flat_then_quadratic(beta, eps, end);
            // Strict concavity only holds past the turning point, so the
            // high group is drawn there.
            let s_h = rng.gen_range(eps.min(0.99) + 1e-6..1.0);
            let s_l = rng.gen_range(0.0..s_h);
            let d = diff_tco_grouping_vs_greedy(
                rng.gen_range(100.0..3000.0),
                rng.gen_range(0.0..5.0),
                rng.gen_range(1000.0..80_000.0),
                &waf,
                s_h,
                s_l,
                rng.gen_range(10.0..500.0),
                1.0,
            )
            .unwrap();
            assert!(d >= -1e-12, "diff {d} for s_h {s_h}, s_l {s_l}");
        }
    }
}
