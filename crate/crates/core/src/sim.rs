//! Deterministic discrete-event simulation of workload arrivals on a disk pool.
//!
//! Between events a disk's workload set does not change, so its physical
//! write rate is constant and wear advances analytically; death times are
//! closed-form roots of `wornout + rate * dt = write_limit` and are detected
//! lazily before each event. A disk's wear ledger gains one epoch per event
//! that touches it (own arrival, death, horizon).
//!
//! Two $/GB rates are reported and labeled: the expectation-based rate that
//! the allocator optimizes (costs over expected lifetimes, data over expected
//! residences) and the realized rate at the horizon (costs over actual
//! operating days, data actually served).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::{allocate_online, fits, PolicySpec};
use crate::tco::{DiskSpec, DiskState, EpochRecord, TcoError, WorkloadProfile};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation needs a non-empty disk pool")]
    EmptyPool,
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("pinned assignment places {workload} on {disk}, which cannot hold it")]
    PinnedInfeasible { workload: String, disk: String },
    #[error(transparent)]
    Tco(#[from] TcoError),
}

fn default_horizon() -> f64 {
    525.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub policy: PolicySpec,
    /// Simulation end, days.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Drives synthetic arrival sampling only; the engine itself is
    /// deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon.is_nan() || self.horizon <= 0.0 {
            return Err(SimError::BadConfig(format!("horizon {} must be > 0", self.horizon)));
        }
        self.policy.validate().map_err(SimError::BadConfig)
    }
}

/// One sampled point of the event-time series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub time: f64,
    /// Expectation-based $/GB; absent until every disk is warm.
    pub tco_rate: Option<f64>,
    pub util_space: f64,
    pub util_iops: f64,
    pub cv_space: f64,
    pub cv_iops: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rejection {
    pub time: f64,
    pub workload: String,
    pub reason: String,
}

/// One row of the decision log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionRow {
    pub time: f64,
    pub workload: String,
    pub disk: Option<String>,
    pub score: Option<f64>,
    pub rejected: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiskLedger {
    pub disk_id: String,
    pub init_time: Option<f64>,
    pub death_time: Option<f64>,
    pub wornout: f64,
    /// Expected lifetime from the final state; `None` for never-warmed disks.
    pub expected_lifetime: Option<f64>,
    pub assigned: Vec<String>,
    pub epochs: Vec<EpochRecord>,
    /// Job-side logical GB actually served through the horizon.
    pub served_logical_gb: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub policy: String,
    pub horizon: f64,
    /// Accepted-or-rejected workload ids, in processing order.
    pub workload_ids: Vec<String>,
    pub series: Vec<SeriesPoint>,
    /// Expectation-based $/GB from the final pool state.
    pub final_tco_rate: Option<f64>,
    /// Realized $/GB at the horizon: actual costs over actually served GB.
    pub realized_tco_rate: Option<f64>,
    /// Expected logical GB over all resident workloads' lifetimes.
    pub total_logical_gb: f64,
    pub realized_logical_gb: f64,
    /// Final-state metrics at the horizon.
    pub util_space_mean: f64,
    pub util_iops_mean: f64,
    pub cv_space: f64,
    pub cv_iops: f64,
    pub cv_workload_count: f64,
    /// Time-averaged over [0, horizon], sampled piecewise between events and
    /// deaths. Dead disks count as zero utilization; CVs cover live disks.
    pub util_space_avg: f64,
    pub util_iops_avg: f64,
    pub cv_space_avg: f64,
    pub cv_iops_avg: f64,
    pub rejections: Vec<Rejection>,
    pub decisions: Vec<DecisionRow>,
    pub disk_ledgers: Vec<DiskLedger>,
}

struct EngineDisk {
    state: DiskState,
    served_gb: f64,
}

impl EngineDisk {
    /// Closes the open epoch at `t`, folding its brick into the wear count.
    fn close_epoch(&mut self, t: f64) -> Result<(), TcoError> {
        if !self.state.is_warm() || t <= self.state.last_arrival {
            return Ok(());
        }
        let rate = self.state.device_write_rate();
        let duration = t - self.state.last_arrival;
        if rate > 0.0 {
            let seq = crate::tco::combined_seq_ratio(&self.state.assigned)?;
            let waf = self.state.spec.waf_model.eval(seq)?;
            self.state.epochs.push(EpochRecord {
                t_start: self.state.last_arrival,
                t_end: t,
                logical_rate: rate,
                seq_ratio: seq,
                waf,
            });
            self.state.wornout =
                (self.state.wornout + rate * waf * duration).min(self.state.spec.write_limit);
        }
        self.served_gb += self.state.job_write_rate() * duration;
        self.state.last_arrival = t;
        Ok(())
    }

    /// Absolute time the disk will exhaust its endurance under the current
    /// set, if it ever does.
    fn projected_death(&self) -> Result<Option<f64>, TcoError> {
        if !self.state.is_warm() || !self.state.is_alive() {
            return Ok(None);
        }
        let remaining = self.state.spec.write_limit - self.state.wornout;
        let rate = self.state.physical_rate()?;
        if rate <= 0.0 {
            return Ok(None);
        }
        Ok(Some(self.state.last_arrival + remaining / rate))
    }

    fn kill_at(&mut self, t: f64) -> Result<(), TcoError> {
        self.close_epoch(t)?;
        self.state.wornout = self.state.spec.write_limit;
        self.state.dead_time = Some(t);
        Ok(())
    }

    fn accept(&mut self, w: WorkloadProfile, t: f64) -> Result<(), TcoError> {
        if self.state.init_time.is_none() {
            self.state.init_time = Some(t);
            self.state.last_arrival = t;
        } else {
            self.close_epoch(t)?;
        }
        self.state.assigned.push(w);
        self.state.last_arrival = t;
        Ok(())
    }
}

/// Piecewise-constant utilization integrals accumulated over the run.
struct UtilClock {
    integrals: [f64; 4],
    current: (f64, f64, f64, f64),
    last_t: f64,
}

impl UtilClock {
    fn new() -> Self {
        UtilClock { integrals: [0.0; 4], current: (0.0, 0.0, 0.0, 0.0), last_t: 0.0 }
    }

    fn accumulate(&mut self, t: f64) {
        let dt = (t - self.last_t).max(0.0);
        self.integrals[0] += self.current.0 * dt;
        self.integrals[1] += self.current.1 * dt;
        self.integrals[2] += self.current.2 * dt;
        self.integrals[3] += self.current.3 * dt;
        self.last_t = self.last_t.max(t);
    }

    fn resample(&mut self, disks: &[EngineDisk]) {
        self.current = utilization_snapshot(disks);
    }

    fn averages(&self, horizon: f64) -> [f64; 4] {
        if horizon > 0.0 {
            self.integrals.map(|x| x / horizon)
        } else {
            [self.current.0, self.current.1, self.current.2, self.current.3]
        }
    }
}

/// Advances the clock to `t`: settles every endurance death before `t` at
/// its exact instant (resampling the utilization integrand around each),
/// then integrates the final stretch.
fn advance_time(
    disks: &mut [EngineDisk],
    clock: &mut UtilClock,
    t: f64,
) -> Result<(), TcoError> {
    loop {
        let mut next: Option<f64> = None;
        for d in disks.iter() {
            if let Some(death) = d.projected_death()? {
                if death <= t {
                    next = Some(next.map_or(death, |x: f64| x.min(death)));
                }
            }
        }
        let Some(td) = next else { break };
        clock.accumulate(td);
        for d in disks.iter_mut() {
            if let Some(death) = d.projected_death()? {
                if death <= td + 1e-12 {
                    d.kill_at(death)?;
                }
            }
        }
        clock.resample(disks);
    }
    clock.accumulate(t);
    Ok(())
}

/// Expectation-based pool rate and total expected data; `None` until every
/// alive disk is warm and some data is expected.
fn pool_expectation(disks: &[EngineDisk]) -> Option<(f64, f64)> {
    let mut cost = 0.0;
    let mut data = 0.0;
    let mut any = false;
    for d in disks {
        if d.state.is_alive() && !d.state.is_warm() {
            return None;
        }
        if d.state.init_time.is_none() {
            continue; // never warmed: excluded from lifetime math
        }
        any = true;
        let lifetime = crate::tco::expected_lifetime(&d.state).ok()?;
        cost += d.state.spec.cost_init() + d.state.spec.rate_maint() * lifetime;
        data += d.state.expected_data().ok()?;
    }
    if !any || data <= 0.0 || !cost.is_finite() {
        return None;
    }
    Some((cost / data, data))
}

/// Mean utilizations count dead disks as zero (their resources are lost to
/// the pool); CVs measure balance among the disks still operating.
fn utilization_snapshot(disks: &[EngineDisk]) -> (f64, f64, f64, f64) {
    let mut us_all = Vec::with_capacity(disks.len());
    let mut up_all = Vec::with_capacity(disks.len());
    let mut us_alive = Vec::new();
    let mut up_alive = Vec::new();
    for d in disks {
        if d.state.is_alive() {
            let us = d.state.used_space() / d.state.spec.capacity_space;
            let up = d.state.used_iops() / d.state.spec.capacity_iops;
            us_all.push(us);
            up_all.push(up);
            us_alive.push(us);
            up_alive.push(up);
        } else {
            us_all.push(0.0);
            up_all.push(0.0);
        }
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    (
        mean(&us_all),
        mean(&up_all),
        crate::population_cv(&us_alive),
        crate::population_cv(&up_alive),
    )
}

enum Placement {
    Policy(PolicySpec),
    Pinned(Vec<usize>),
}

/// Runs the online simulation: arrivals in time order (ties in input order),
/// the policy picks a disk or rejects, wear and death evolve between events.
pub fn run_simulation(
    cfg: &SimConfig,
    workloads: &[WorkloadProfile],
    pool: &[DiskSpec],
) -> Result<SimulationReport, SimError> {
    cfg.validate()?;
    run_engine(
        Placement::Policy(cfg.policy.clone()),
        cfg.policy.kind.name(),
        workloads,
        pool,
        cfg.horizon,
    )
}

/// Replays a predetermined assignment (workload -> pool index) through the
/// same engine; used to evaluate offline plans.
pub fn run_pinned(
    pool: &[DiskSpec],
    assignments: &[(WorkloadProfile, usize)],
    horizon: f64,
) -> Result<SimulationReport, SimError> {
    let workloads: Vec<WorkloadProfile> = assignments.iter().map(|(w, _)| w.clone()).collect();
    let targets: Vec<usize> = assignments.iter().map(|(_, k)| *k).collect();
    run_engine(Placement::Pinned(targets), "pinned", &workloads, pool, horizon)
}

fn run_engine(
    placement: Placement,
    policy_name: &str,
    workloads: &[WorkloadProfile],
    pool: &[DiskSpec],
    horizon: f64,
) -> Result<SimulationReport, SimError> {
    if pool.is_empty() {
        return Err(SimError::EmptyPool);
    }
    for spec in pool {
        spec.validate().map_err(SimError::BadConfig)?;
    }
    for w in workloads {
        w.validate().map_err(SimError::BadConfig)?;
    }

    let mut disks: Vec<EngineDisk> = pool
        .iter()
        .map(|s| EngineDisk { state: DiskState::new(s.clone()), served_gb: 0.0 })
        .collect();

    // Stable sort: simultaneous arrivals keep input order.
    let mut order: Vec<usize> = (0..workloads.len()).collect();
    order.sort_by(|&a, &b| workloads[a].arrival.total_cmp(&workloads[b].arrival));

    let mut series = Vec::new();
    let mut rejections = Vec::new();
    let mut decisions = Vec::new();
    let mut ids = Vec::new();
    let mut clock = UtilClock::new();

    for &wi in &order {
        let w = &workloads[wi];
        let t = w.arrival;
        if t > horizon || t < 0.0 {
            continue;
        }
        ids.push(w.id.clone());
        advance_time(&mut disks, &mut clock, t)?;

        let states: Vec<DiskState> = disks.iter().map(|d| d.state.clone()).collect();
        let (target, score) = match &placement {
            Placement::Policy(policy) => {
                let decision = allocate_online(policy, &states, w, t)?;
                (decision.disk_index, decision.score)
            }
            Placement::Pinned(targets) => {
                let k = targets[wi];
                if k >= disks.len() || !fits(&states[k], w) {
                    return Err(SimError::PinnedInfeasible {
                        workload: w.id.clone(),
                        disk: states
                            .get(k)
                            .map(|d| d.spec.id.clone())
                            .unwrap_or_else(|| format!("#{k}")),
                    });
                }
                (Some(k), None)
            }
        };

        match target {
            Some(k) => {
                disks[k].accept(w.clone(), t)?;
                decisions.push(DecisionRow {
                    time: t,
                    workload: w.id.clone(),
                    disk: Some(disks[k].state.spec.id.clone()),
                    score,
                    rejected: false,
                });
            }
            None => {
                let reason = if states.iter().any(|d| fits(d, w)) {
                    "all candidates infeasible under policy thresholds"
                } else {
                    "insufficient capacity on every disk"
                };
                rejections.push(Rejection {
                    time: t,
                    workload: w.id.clone(),
                    reason: reason.to_string(),
                });
                decisions.push(DecisionRow {
                    time: t,
                    workload: w.id.clone(),
                    disk: None,
                    score: None,
                    rejected: true,
                });
            }
        }

        clock.resample(&disks);
        let (us, up, cvs, cvp) = clock.current;
        let rate = pool_expectation(&disks).map(|(r, _)| r);
        series.push(SeriesPoint {
            time: t,
            tco_rate: rate,
            util_space: us,
            util_iops: up,
            cv_space: cvs,
            cv_iops: cvp,
        });
    }

    // Horizon: settle remaining deaths, then close every open epoch.
    advance_time(&mut disks, &mut clock, horizon)?;
    for d in disks.iter_mut() {
        if d.state.is_alive() {
            d.close_epoch(horizon)?;
        }
    }
    let [us_avg, up_avg, cvs_avg, cvp_avg] = clock.averages(horizon);

    let expectation = pool_expectation(&disks);
    let (final_rate, total_logical) = match expectation {
        Some((r, d)) => (Some(r), d),
        None => (None, 0.0),
    };

    let mut realized_cost = 0.0;
    let mut realized_gb = 0.0;
    for d in &disks {
        if let Some(init) = d.state.init_time {
            let end = d.state.dead_time.unwrap_or(horizon).min(horizon);
            realized_cost +=
                d.state.spec.cost_init() + d.state.spec.rate_maint() * (end - init).max(0.0);
            realized_gb += d.served_gb;
        }
    }
    let realized_rate = if realized_gb > 0.0 { Some(realized_cost / realized_gb) } else { None };

    let (us, up, cvs, cvp) = utilization_snapshot(&disks);
    let counts: Vec<f64> = disks
        .iter()
        .filter(|d| d.state.is_alive())
        .map(|d| d.state.assigned.len() as f64)
        .collect();

    let disk_ledgers = disks
        .iter()
        .map(|d| DiskLedger {
            disk_id: d.state.spec.id.clone(),
            init_time: d.state.init_time,
            death_time: d.state.dead_time,
            wornout: d.state.wornout,
            expected_lifetime: crate::tco::expected_lifetime(&d.state)
                .ok()
                .filter(|l| l.is_finite()),
            assigned: d.state.assigned.iter().map(|w| w.id.clone()).collect(),
            epochs: d.state.epochs.clone(),
            served_logical_gb: d.served_gb,
        })
        .collect();

    Ok(SimulationReport {
        policy: policy_name.to_string(),
        horizon,
        workload_ids: ids,
        series,
        final_tco_rate: final_rate,
        realized_tco_rate: realized_rate,
        total_logical_gb: total_logical,
        realized_logical_gb: realized_gb,
        util_space_mean: us,
        util_iops_mean: up,
        cv_space: cvs,
        cv_iops: cvp,
        cv_workload_count: crate::population_cv(&counts),
        util_space_avg: us_avg,
        util_iops_avg: up_avg,
        cv_space_avg: cvs_avg,
        cv_iops_avg: cvp_avg,
        rejections,
        decisions,
        disk_ledgers,
    })
}

/// Deterministic exponential arrival times with the given mean spacing, days.
pub fn synth_arrivals(count: usize, mean_interarrival: f64, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    assert!(mean_interarrival > 0.0, "mean inter-arrival must be positive");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let u: f64 = rng.gen::<f64>();
        t += -mean_interarrival * (1.0 - u).ln();
        out.push(t);
    }
    out
}

/// Headline metrics of one report.
pub fn metrics_summary(report: &SimulationReport) -> std::collections::BTreeMap<String, f64> {
    let mut m = std::collections::BTreeMap::new();
    if let Some(r) = report.final_tco_rate {
        m.insert("final_tco_rate".to_string(), r);
    }
    if let Some(r) = report.realized_tco_rate {
        m.insert("realized_tco_rate".to_string(), r);
    }
    m.insert("total_logical_gb".to_string(), report.total_logical_gb);
    m.insert("util_space_mean".to_string(), report.util_space_mean);
    m.insert("util_iops_mean".to_string(), report.util_iops_mean);
    m.insert("cv_space".to_string(), report.cv_space);
    m.insert("cv_iops".to_string(), report.cv_iops);
    m.insert("cv_workload_count".to_string(), report.cv_workload_count);
    m.insert("util_space_avg".to_string(), report.util_space_avg);
    m.insert("util_iops_avg".to_string(), report.util_iops_avg);
    m.insert("cv_space_avg".to_string(), report.cv_space_avg);
    m.insert("cv_iops_avg".to_string(), report.cv_iops_avg);
    m.insert("rejections".to_string(), report.rejections.len() as f64);
    m
}

/// One comparison row across policies over the same workload set.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub final_tco_rate: Option<f64>,
    pub realized_tco_rate: Option<f64>,
    pub util_space_mean: f64,
    pub util_iops_mean: f64,
    pub cv_space: f64,
    pub cv_iops: f64,
    pub cv_workload_count: f64,
    pub util_space_avg: f64,
    pub util_iops_avg: f64,
    pub cv_space_avg: f64,
    pub cv_iops_avg: f64,
    pub rejections: usize,
    /// Final rate minus the best final rate across the compared reports.
    pub delta_vs_best: Option<f64>,
}

/// Builds comparison rows sorted by final rate (missing rates sort last).
/// Errors unless every report covers the identical workload set.
pub fn compare_reports(reports: &[SimulationReport]) -> Result<Vec<ComparisonRow>, SimError> {
    if reports.len() < 2 {
        return Err(SimError::BadConfig("compare needs at least two reports".into()));
    }
    let mut reference: Vec<&str> = reports[0].workload_ids.iter().map(|s| s.as_str()).collect();
    reference.sort_unstable();
    for r in &reports[1..] {
        let mut ids: Vec<&str> = r.workload_ids.iter().map(|s| s.as_str()).collect();
        ids.sort_unstable();
        if ids != reference {
            return Err(SimError::BadConfig(format!(
                "workload sets differ between reports ({} vs {})",
                reports[0].policy, r.policy
            )));
        }
    }
    let best = reports
        .iter()
        .filter_map(|r| r.final_tco_rate)
        .fold(f64::INFINITY, f64::min);
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| ComparisonRow {
            policy: r.policy.clone(),
            final_tco_rate: r.final_tco_rate,
            realized_tco_rate: r.realized_tco_rate,
            util_space_mean: r.util_space_mean,
            util_iops_mean: r.util_iops_mean,
            cv_space: r.cv_space,
            cv_iops: r.cv_iops,
            cv_workload_count: r.cv_workload_count,
            util_space_avg: r.util_space_avg,
            util_iops_avg: r.util_iops_avg,
            cv_space_avg: r.cv_space_avg,
            cv_iops_avg: r.cv_iops_avg,
            rejections: r.rejections.len(),
            delta_vs_best: r.final_tco_rate.map(|x| x - best),
        })
        .collect();
    rows.sort_by(|a, b| {
        match (a.final_tco_rate, b.final_tco_rate) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then_with(|| a.policy.cmp(&b.policy))
    });
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::PolicyKind;
    use crate::tco::tests::{spec_with_waf, workload};
    use crate::waf::WafModel;

    fn const_waf(v: f64) -> WafModel {
        WafModel { alpha: 0.0, beta: v, eta: 0.0, mu: 0.0, gamma: v, turning_point: 0.5 }
    }

    fn cfg(kind: PolicyKind, horizon: f64) -> SimConfig {
        SimConfig { policy: PolicySpec::new(kind), horizon, seed: 0 }
    }

    #[test]
    fn single_workload_single_epoch() {
        let pool = [spec_with_waf("d0", const_waf(2.0))];
        let w = WorkloadProfile { arrival: 3.0, ..workload("a", 5.0, 0.5) };
        // Death would come at 3 + 1000/10 = 103 days; horizon first.
        let report =
            run_simulation(&cfg(PolicyKind::MinTcoV3, 50.0), &[w], &pool).unwrap();
        let ledger = &report.disk_ledgers[0];
        assert_eq!(ledger.epochs.len(), 1);
        let e = &ledger.epochs[0];
        assert_eq!((e.t_start, e.t_end), (3.0, 50.0));
        let expect = 5.0 * 2.0 * 47.0;
        assert!((ledger.wornout - expect).abs() < 1e-9);
        assert!(ledger.death_time.is_none());
    }

    #[test]
    fn endurance_crossing_is_solved_exactly() {
        let mut spec = spec_with_waf("d0", const_waf(2.0));
        spec.write_limit = 100.0;
        let w = workload("a", 5.0, 0.5); // physical 10 GB/day
        let report =
            run_simulation(&cfg(PolicyKind::MinTcoV3, 525.0), &[w], &[spec]).unwrap();
        let ledger = &report.disk_ledgers[0];
        assert_eq!(ledger.death_time, Some(10.0));
        assert!((ledger.wornout - 100.0).abs() < 1e-12);
        assert_eq!(ledger.epochs.last().unwrap().t_end, 10.0);
    }

    #[test]
    fn zero_workloads_is_a_vacuous_run() {
        let pool = [spec_with_waf("d0", const_waf(2.0))];
        let report = run_simulation(&cfg(PolicyKind::MinTcoV3, 10.0), &[], &pool).unwrap();
        assert!(report.final_tco_rate.is_none());
        assert!(report.series.is_empty());
        assert!(report.rejections.is_empty());
    }

    #[test]
    fn determinism_byte_identical_reports() {
        let pool = [
            spec_with_waf("d0", WafModel::flat_then_quadratic(3.0, 0.5, 1.0)),
            spec_with_waf("d1", WafModel::flat_then_quadratic(2.5, 0.4, 1.1)),
        ];
        let times = synth_arrivals(12, 2.0, 9);
        let ws: Vec<WorkloadProfile> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| WorkloadProfile {
                arrival: t,
                ..workload(&format!("w{i}"), 3.0 + i as f64, (i as f64 * 0.09) % 1.0)
            })
            .collect();
        let a = run_simulation(&cfg(PolicyKind::MinTcoV3, 100.0), &ws, &pool).unwrap();
        let b = run_simulation(&cfg(PolicyKind::MinTcoV3, 100.0), &ws, &pool).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    }

    #[test]
    fn conservation_wornout_equals_brick_sum() {
        let pool = [
            spec_with_waf("d0", WafModel::flat_then_quadratic(3.0, 0.5, 1.0)),
            spec_with_waf("d1", WafModel::flat_then_quadratic(3.0, 0.5, 1.0)),
        ];
        let ws: Vec<WorkloadProfile> = (0..10)
            .map(|i| WorkloadProfile {
                arrival: i as f64 * 3.0,
                ..workload(&format!("w{i}"), 4.0 + i as f64, (0.1 * i as f64) % 1.0)
            })
            .collect();
        let report =
            run_simulation(&cfg(PolicyKind::MinTcoV3, 200.0), &ws, &pool).unwrap();
        for ledger in &report.disk_ledgers {
            let sum = crate::tco::accumulate_wornout(&ledger.epochs).unwrap();
            assert!(
                (sum - ledger.wornout).abs() <= 1e-9 * sum.max(1.0),
                "{}: {} vs {}",
                ledger.disk_id,
                sum,
                ledger.wornout
            );
            for e in &ledger.epochs {
                let phys = e.logical_rate * e.waf * e.duration();
                assert!((phys - e.physical_volume()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn total_logical_matches_tco_accounting() {
        let pool = [
            spec_with_waf("d0", const_waf(2.0)),
            spec_with_waf("d1", const_waf(2.0)),
        ];
        let ws: Vec<WorkloadProfile> = (0..3)
            .map(|i| WorkloadProfile {
                arrival: i as f64,
                ..workload(&format!("w{i}"), 10.0, 0.5)
            })
            .collect();
        let report =
            run_simulation(&cfg(PolicyKind::MinTcoV3, 100.0), &ws, &pool).unwrap();
        // Death map: every accepted workload dies with its host disk.
        let mut deaths = std::collections::BTreeMap::new();
        for ledger in &report.disk_ledgers {
            let death = ledger
                .death_time
                .or_else(|| ledger.init_time.map(|i| i + ledger.expected_lifetime.unwrap()));
            for id in &ledger.assigned {
                deaths.insert(id.clone(), death.unwrap());
            }
        }
        let accepted: Vec<WorkloadProfile> =
            ws.iter().filter(|w| deaths.contains_key(&w.id)).cloned().collect();
        let total = crate::tco::total_logical_writes(&accepted, &deaths).unwrap();
        assert!((total - report.total_logical_gb).abs() <= 1e-9 * total.max(1.0));
    }

    #[test]
    fn capacity_never_exceeded() {
        let mut spec0 = spec_with_waf("d0", const_waf(2.0));
        spec0.capacity_space = 25.0;
        let mut spec1 = spec_with_waf("d1", const_waf(2.0));
        spec1.capacity_space = 25.0;
        let ws: Vec<WorkloadProfile> = (0..8)
            .map(|i| WorkloadProfile {
                arrival: i as f64,
                working_set: 10.0,
                ..workload(&format!("w{i}"), 1.0, 0.5)
            })
            .collect();
        let report =
            run_simulation(&cfg(PolicyKind::MinTcoV3, 100.0), &ws, &[spec0, spec1]).unwrap();
        // 2 disks x 2 workloads fit; the rest must be rejected.
        assert_eq!(report.rejections.len(), 4);
        for ledger in &report.disk_ledgers {
            assert!(ledger.assigned.len() <= 2);
        }
    }

    #[test]
    fn committed_assignments_respect_both_capacities() {
        let mut spec0 = spec_with_waf("d0", const_waf(2.0));
        spec0.capacity_space = 60.0;
        spec0.capacity_iops = 300.0;
        let mut spec1 = spec0.clone();
        spec1.id = "d1".into();
        let pool = [spec0.clone(), spec1];
        let ws: Vec<WorkloadProfile> = (0..12)
            .map(|i| {
                let mut w = workload(&format!("w{i}"), 1.0, 0.4);
                w.arrival = i as f64;
                w.working_set = 10.0 + (i % 3) as f64 * 5.0;
                w.peak_iops = 60.0 + (i % 4) as f64 * 20.0;
                w.write_ratio = 0.5;
                w
            })
            .collect();
        let report =
            run_simulation(&cfg(PolicyKind::MinRate, 100.0), &ws, &pool).unwrap();
        for ledger in &report.disk_ledgers {
            let assigned: Vec<&WorkloadProfile> =
                ws.iter().filter(|w| ledger.assigned.contains(&w.id)).collect();
            let space: f64 = assigned.iter().map(|w| w.working_set).sum();
            let iops: f64 = assigned.iter().map(|w| spec0.effective_iops(w)).sum();
            assert!(space <= spec0.capacity_space + 1e-9, "{}: space {space}", ledger.disk_id);
            assert!(iops <= spec0.capacity_iops + 1e-9, "{}: iops {iops}", ledger.disk_id);
        }
        assert!(!report.rejections.is_empty());
    }

    #[test]
    fn order_preserving_time_perturbation_keeps_assignments() {
        let pool = [
            spec_with_waf("d0", WafModel::flat_then_quadratic(3.0, 0.5, 1.0)),
            spec_with_waf("d1", WafModel::flat_then_quadratic(3.0, 0.5, 1.0)),
            spec_with_waf("d2", WafModel::flat_then_quadratic(3.0, 0.5, 1.0)),
        ];
        let ws: Vec<WorkloadProfile> = (0..9)
            .map(|i| WorkloadProfile {
                arrival: 1.0 + i as f64 * 2.0,
                ..workload(&format!("w{i}"), 3.0 + 1.7 * i as f64, (0.13 * i as f64) % 1.0)
            })
            .collect();
        let base = run_simulation(&cfg(PolicyKind::MinTcoV3, 100.0), &ws, &pool).unwrap();
        let nudged: Vec<WorkloadProfile> = ws
            .iter()
            .map(|w| WorkloadProfile { arrival: w.arrival + 1e-7, ..w.clone() })
            .collect();
        let moved = run_simulation(&cfg(PolicyKind::MinTcoV3, 100.0), &nudged, &pool).unwrap();
        let seq = |r: &SimulationReport| {
            r.decisions.iter().map(|d| d.disk.clone()).collect::<Vec<_>>()
        };
        assert_eq!(seq(&base), seq(&moved));
    }

    #[test]
    fn arrivals_are_deterministic_and_sorted() {
        assert!(synth_arrivals(0, 1.0, 1).is_empty());
        let a = synth_arrivals(100, 1.0, 42);
        let b = synth_arrivals(100, 1.0, 42);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn arrival_sample_mean_near_target() {
        let times = synth_arrivals(10_000, 1.0, 7);
        let mean = times.last().unwrap() / 10_000.0;
        assert!((0.9..=1.1).contains(&mean), "mean {mean}");
    }

    #[test]
    fn comparison_rows_on_identical_reports_have_zero_delta() {
        let pool = [spec_with_waf("d0", const_waf(2.0))];
        let w = workload("a", 5.0, 0.5);
        let r1 = run_simulation(&cfg(PolicyKind::MinTcoV3, 50.0), std::slice::from_ref(&w), &pool).unwrap();
        let r2 = run_simulation(&cfg(PolicyKind::MinTcoV3, 50.0), &[w], &pool).unwrap();
        let rows = compare_reports(&[r1, r2]).unwrap();
        assert_eq!(rows.len(), 2);
        for row in rows {
            assert_eq!(row.delta_vs_best, Some(0.0));
        }
    }

    #[test]
    fn comparison_rejects_mismatched_workload_sets() {
        let pool = [spec_with_waf("d0", const_waf(2.0))];
        let r1 = run_simulation(
            &cfg(PolicyKind::MinTcoV3, 50.0),
            &[workload("a", 5.0, 0.5)],
            &pool,
        )
        .unwrap();
        let r2 = run_simulation(
            &cfg(PolicyKind::MinTcoV3, 50.0),
            &[workload("b", 5.0, 0.5)],
            &pool,
        )
        .unwrap();
        assert!(compare_reports(&[r1, r2]).is_err());
    }

    #[test]
    fn pinned_replay_matches_policy_replay() {
        let pool = [
            spec_with_waf("d0", const_waf(2.0)),
            spec_with_waf("d1", const_waf(2.0)),
        ];
        let ws: Vec<WorkloadProfile> = (0..4)
            .map(|i| WorkloadProfile {
                arrival: i as f64,
                ..workload(&format!("w{i}"), 5.0 + i as f64, 0.3)
            })
            .collect();
        let by_policy =
            run_simulation(&cfg(PolicyKind::MinTcoV3, 100.0), &ws, &pool).unwrap();
        let assignment: Vec<(WorkloadProfile, usize)> = by_policy
            .decisions
            .iter()
            .map(|d| {
                let w = ws.iter().find(|w| w.id == d.workload).unwrap().clone();
                let k = pool.iter().position(|s| Some(&s.id) == d.disk.as_ref()).unwrap();
                (w, k)
            })
            .collect();
        let pinned = run_pinned(&pool, &assignment, 100.0).unwrap();
        assert_eq!(pinned.final_tco_rate, by_policy.final_tco_rate);
        assert_eq!(pinned.total_logical_gb, by_policy.total_logical_gb);
    }
}
