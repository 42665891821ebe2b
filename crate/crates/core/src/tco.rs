//! Ownership-cost model for a pool of flash disks.
//!
//! Costs split into a one-time part (purchase + setup) and a daily rate
//! (power + labor). The daily part accrues over a disk's *expected lifetime*:
//! the time already worked plus the remaining endurance divided by the
//! current physical write rate, where the physical rate is the combined
//! logical rate of the resident workloads times the disk's WAF at their
//! rate-weighted sequential ratio.
//!
//! The headline metric is the data-averaged rate: pool cost over expected
//! lifetimes divided by the total logical data served, in $/GB.
//!
//! Units throughout: days, GB (2^30 bytes), IOPS, dollars.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::waf::{WafError, WafModel};

#[derive(Debug, Error)]
pub enum TcoError {
    #[error("disk {0} has no workloads; lifetime math requires a warmed-up disk")]
    WarmUpViolation(String),
    #[error("combined sequential ratio undefined: no workloads with positive write rate")]
    UndefinedRatio,
    #[error("malformed epoch history: {0}")]
    MalformedHistory(String),
    #[error("workload {0} has no recorded death time")]
    MissingDeathTime(String),
    #[error("workload {0} dies before it arrives")]
    DeathBeforeArrival(String),
    #[error("data-averaged rate undefined: no logical data served")]
    UndefinedRate,
    #[error(transparent)]
    Waf(#[from] WafError),
}

/// Long-term profile of one application I/O stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadProfile {
    pub id: String,
    /// Arrival time at the dispatcher, days.
    pub arrival: f64,
    /// Write sequential ratio in [0, 1].
    pub seq_ratio: f64,
    /// Logical write rate, GB/day.
    pub write_rate: f64,
    /// Peak throughput demand, IOPS.
    pub peak_iops: f64,
    /// Write I/Os over total I/Os, in [0, 1].
    pub write_ratio: f64,
    /// Working-set size (spatial demand), GB.
    pub working_set: f64,
}

impl WorkloadProfile {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("seq_ratio", self.seq_ratio), ("write_ratio", self.write_ratio)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("workload {}: {name} {v} outside [0, 1]", self.id));
            }
        }
        for (name, v) in [
            ("write_rate", self.write_rate),
            ("working_set", self.working_set),
            ("peak_iops", self.peak_iops),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(format!("workload {}: {name} {v} invalid", self.id));
            }
        }
        Ok(())
    }
}

/// Immutable cost/capacity/endurance parameters of one allocatable disk
/// (a single SSD, or a RAID set collapsed to a pseudo-disk).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskSpec {
    pub id: String,
    /// One-time purchase cost, $.
    pub cost_purchase: f64,
    /// One-time setup cost, $.
    pub cost_setup: f64,
    /// Power cost rate, $/day.
    pub rate_power: f64,
    /// Labor cost rate, $/day.
    pub rate_labor: f64,
    /// Total physical write endurance, GB.
    pub write_limit: f64,
    /// Spatial capacity, GB.
    pub capacity_space: f64,
    /// Throughput capacity, IOPS.
    pub capacity_iops: f64,
    pub waf_model: WafModel,
    /// Device-side multiplier on each workload's logical write rate
    /// (mirroring/parity overhead of a pseudo-disk; 1 for a plain disk).
    #[serde(default = "one")]
    pub lambda_mult: f64,
    /// Per-write IOPS penalty of a pseudo-disk; 1 for a plain disk.
    #[serde(default = "one")]
    pub write_penalty: f64,
}

fn one() -> f64 {
    1.0
}

impl DiskSpec {
    /// One-time cost: purchase plus setup.
    pub fn cost_init(&self) -> f64 {
        self.cost_purchase + self.cost_setup
    }

    /// Daily operating cost: power plus labor.
    pub fn rate_maint(&self) -> f64 {
        self.rate_power + self.rate_labor
    }

    /// The logical rate this device sees for a workload, GB/day.
    pub fn effective_write_rate(&self, w: &WorkloadProfile) -> f64 {
        w.write_rate * self.lambda_mult
    }

    /// Penalized throughput demand of a workload on this disk, IOPS:
    /// writes are multiplied by the write penalty, reads pass through.
    pub fn effective_iops(&self, w: &WorkloadProfile) -> f64 {
        w.peak_iops * w.write_ratio * self.write_penalty
            + w.peak_iops * (1.0 - w.write_ratio)
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("cost_purchase", self.cost_purchase),
            ("cost_setup", self.cost_setup),
            ("rate_power", self.rate_power),
            ("rate_labor", self.rate_labor),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(format!("disk {}: {name} {v} invalid", self.id));
            }
        }
        for (name, v) in [
            ("write_limit", self.write_limit),
            ("capacity_space", self.capacity_space),
            ("capacity_iops", self.capacity_iops),
            ("lambda_mult", self.lambda_mult),
            ("write_penalty", self.write_penalty),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(format!("disk {}: {name} {v} must be positive", self.id));
            }
        }
        self.waf_model
            .validate()
            .map_err(|e| format!("disk {}: {e}", self.id))
    }
}

/// One wear epoch: an interval over which the disk's workload set, and hence
/// its rate, sequential ratio and WAF, were constant. Its physical write
/// volume ("brick") is `logical_rate * waf * (t_end - t_start)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub t_start: f64,
    pub t_end: f64,
    /// Device-side logical rate over the epoch, GB/day.
    pub logical_rate: f64,
    /// Rate-weighted sequential ratio over the epoch.
    pub seq_ratio: f64,
    /// WAF applied over the epoch.
    pub waf: f64,
}

impl EpochRecord {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Physical write volume of this brick, GB.
    pub fn physical_volume(&self) -> f64 {
        self.logical_rate * self.waf * self.duration()
    }
}

/// Mutable runtime state of a disk: resident workloads, wear ledger, death.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiskState {
    pub spec: DiskSpec,
    /// Time the disk accepted its first workload; `None` until warmed up.
    pub init_time: Option<f64>,
    /// Arrival time of the most recent workload (start of the open epoch).
    pub last_arrival: f64,
    pub assigned: Vec<WorkloadProfile>,
    /// Closed epochs; the epoch since `last_arrival` is implicit until the
    /// next event closes it.
    pub epochs: Vec<EpochRecord>,
    /// Physical writes accumulated through `last_arrival`, GB.
    pub wornout: f64,
    /// Set once endurance is exhausted.
    pub dead_time: Option<f64>,
}

impl DiskState {
    pub fn new(spec: DiskSpec) -> Self {
        DiskState {
            spec,
            init_time: None,
            last_arrival: 0.0,
            assigned: Vec::new(),
            epochs: Vec::new(),
            wornout: 0.0,
            dead_time: None,
        }
    }

    pub fn is_warm(&self) -> bool {
        self.init_time.is_some() && !self.assigned.is_empty()
    }

    pub fn is_alive(&self) -> bool {
        self.dead_time.is_none()
    }

    /// Device-side logical write rate: sum of resident rates times the
    /// pseudo-disk multiplier, GB/day.
    pub fn device_write_rate(&self) -> f64 {
        self.assigned.iter().map(|w| self.spec.effective_write_rate(w)).sum()
    }

    /// Job-side logical write rate (what the applications wrote), GB/day.
    pub fn job_write_rate(&self) -> f64 {
        combined_write_rate(&self.assigned)
    }

    pub fn used_space(&self) -> f64 {
        self.assigned.iter().map(|w| w.working_set).sum()
    }

    pub fn used_iops(&self) -> f64 {
        self.assigned.iter().map(|w| self.spec.effective_iops(w)).sum()
    }

    pub fn remaining_space(&self) -> f64 {
        self.spec.capacity_space - self.used_space()
    }

    pub fn remaining_iops(&self) -> f64 {
        self.spec.capacity_iops - self.used_iops()
    }

    /// WAF at the current combined sequential ratio.
    pub fn current_waf(&self) -> Result<f64, TcoError> {
        let s = combined_seq_ratio(&self.assigned)?;
        Ok(self.spec.waf_model.eval(s)?)
    }

    /// Current physical write rate, GB/day.
    pub fn physical_rate(&self) -> Result<f64, TcoError> {
        let rate = self.device_write_rate();
        if rate == 0.0 {
            return Ok(0.0);
        }
        Ok(rate * self.current_waf()?)
    }

    /// Physical writes accumulated by absolute time `t >= last_arrival`,
    /// extrapolating the open epoch.
    pub fn wornout_at(&self, t: f64) -> Result<f64, TcoError> {
        if !self.is_warm() {
            return Ok(self.wornout);
        }
        if let Some(d) = self.dead_time {
            if t >= d {
                return Ok(self.spec.write_limit);
            }
        }
        let accrued = self.physical_rate()? * (t - self.last_arrival).max(0.0);
        Ok((self.wornout + accrued).min(self.spec.write_limit))
    }

    /// Absolute death time implied by the current workload set, or the
    /// realized one for a dead disk. Infinite when nothing is writing.
    pub fn expected_death(&self) -> Result<f64, TcoError> {
        if let Some(d) = self.dead_time {
            return Ok(d);
        }
        let init = self
            .init_time
            .ok_or_else(|| TcoError::WarmUpViolation(self.spec.id.clone()))?;
        Ok(init + expected_lifetime(self)?)
    }

    /// Expected logical data served over the disk's lifetime, GB:
    /// each resident workload writes at its raw rate from its arrival to the
    /// disk's (expected or realized) death.
    pub fn expected_data(&self) -> Result<f64, TcoError> {
        let death = self.expected_death()?;
        Ok(self
            .assigned
            .iter()
            .map(|w| w.write_rate * (death - w.arrival).max(0.0))
            .sum())
    }
}

/// Sum of logical write rates over a workload set, GB/day. Empty set sums to 0.
pub fn combined_write_rate(workloads: &[WorkloadProfile]) -> f64 {
    workloads.iter().map(|w| w.write_rate).sum()
}

/// Rate-weighted sequential ratio of a workload set.
///
/// Each stream's ratio is weighted by its logical write rate; the result is
/// clamped to [0, 1] to absorb rounding. Errors when the set is empty or no
/// stream writes.
pub fn combined_seq_ratio(workloads: &[WorkloadProfile]) -> Result<f64, TcoError> {
    let total: f64 = workloads.iter().map(|w| w.write_rate).sum();
    if total <= 0.0 {
        return Err(TcoError::UndefinedRatio);
    }
    let weighted: f64 = workloads.iter().map(|w| w.write_rate * w.seq_ratio).sum();
    Ok((weighted / total).clamp(0.0, 1.0))
}

/// Total physical write volume of an epoch ledger: the sum of brick volumes.
///
/// Epochs must be in time order and non-overlapping; gaps are allowed, so the
/// sum is additive over concatenated ledgers.
pub fn accumulate_wornout(epochs: &[EpochRecord]) -> Result<f64, TcoError> {
    let mut total = 0.0;
    for (i, e) in epochs.iter().enumerate() {
        if e.t_end <= e.t_start {
            return Err(TcoError::MalformedHistory(format!(
                "epoch {i} has non-positive duration [{}, {})",
                e.t_start, e.t_end
            )));
        }
        if e.logical_rate < 0.0 || e.waf < 1.0 {
            return Err(TcoError::MalformedHistory(format!(
                "epoch {i} has rate {} / waf {}",
                e.logical_rate, e.waf
            )));
        }
        if i > 0 && e.t_start < epochs[i - 1].t_end - 1e-12 {
            return Err(TcoError::MalformedHistory(format!(
                "epoch {i} starts at {} before previous ends at {}",
                e.t_start,
                epochs[i - 1].t_end
            )));
        }
        total += e.physical_volume();
    }
    Ok(total)
}

/// Expected lifetime of a disk, days: time worked plus remaining endurance
/// divided by the current physical write rate.
///
/// The worked phase runs from the first to the most recent workload arrival;
/// the expected phase divides the remaining endurance (`write_limit` minus
/// the wornout accumulated through the most recent arrival) by the combined
/// rate times the WAF at the combined sequential ratio. The split point is
/// immaterial: any anchor with a consistently-accrued wornout gives the same
/// total. Dead disks report their realized lifetime.
pub fn expected_lifetime(disk: &DiskState) -> Result<f64, TcoError> {
    let init = disk
        .init_time
        .ok_or_else(|| TcoError::WarmUpViolation(disk.spec.id.clone()))?;
    if let Some(d) = disk.dead_time {
        return Ok(d - init);
    }
    if disk.assigned.is_empty() {
        return Err(TcoError::WarmUpViolation(disk.spec.id.clone()));
    }
    let worked = disk.last_arrival - init;
    let remaining = (disk.spec.write_limit - disk.wornout).max(0.0);
    if remaining == 0.0 {
        return Ok(worked);
    }
    let physical = disk.physical_rate()?;
    if physical == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(worked + remaining / physical)
}

/// Total logical data written by a workload set, GB: each workload writes at
/// its rate from arrival until its host disk's death.
pub fn total_logical_writes(
    workloads: &[WorkloadProfile],
    death_times: &BTreeMap<String, f64>,
) -> Result<f64, TcoError> {
    let mut total = 0.0;
    for w in workloads {
        let death = *death_times
            .get(&w.id)
            .ok_or_else(|| TcoError::MissingDeathTime(w.id.clone()))?;
        if death < w.arrival {
            return Err(TcoError::DeathBeforeArrival(w.id.clone()));
        }
        total += w.write_rate * (death - w.arrival);
    }
    Ok(total)
}

/// Pool cost over expected lifetimes, $: sum over disks of the one-time cost
/// plus the daily rate times the expected lifetime.
pub fn tco_lifetime(pool: &[DiskState]) -> Result<f64, TcoError> {
    let mut total = 0.0;
    for d in pool {
        total += d.spec.cost_init() + d.spec.rate_maint() * expected_lifetime(d)?;
    }
    Ok(total)
}

/// Pool cost per day, $/day: lifetime cost normalized by summed lifetimes.
pub fn tco_per_day(pool: &[DiskState]) -> Result<f64, TcoError> {
    let mut lifetimes = 0.0;
    for d in pool {
        lifetimes += expected_lifetime(d)?;
    }
    if lifetimes <= 0.0 {
        return Err(TcoError::UndefinedRate);
    }
    Ok(tco_lifetime(pool)? / lifetimes)
}

/// Data-averaged pool cost, $/GB: lifetime cost over total logical data served.
pub fn data_avg_tco_rate(pool: &[DiskState], total_logical: f64) -> Result<f64, TcoError> {
    if total_logical <= 0.0 {
        return Err(TcoError::UndefinedRate);
    }
    Ok(tco_lifetime(pool)? / total_logical)
}
