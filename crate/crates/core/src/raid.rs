//! RAID sets as single allocatable pseudo-disks.
//!
//! A homogeneous RAID set collapses into one pseudo-disk through a fixed
//! conversion: one-time cost, daily cost, and write endurance scale by the
//! member count; spatial capacity scales by the mode's usable fraction;
//! the WAF function is unchanged (striping preserves per-disk locality, and
//! mirroring duplicates whole streams); and the demand side picks up a
//! per-mode logical write multiplier and an IOPS write penalty.
//!
//! | mode   | C_I | C'_M | W | A | lambda | space | penalty |
//! |--------|-----|------|---|---|--------|-------|---------|
//! | 0 strip| N   | N    | N | 1 | 1      | N     | 1       |
//! | 1 mirror| N  | N    | N | 1 | 2      | N/2   | 2       |
//! | 5 pair | N   | N    | N | 1 | N/(N-1)| N-1   | 4       |
//!
//! IOPS capacity of the set is N times the member capacity for every mode;
//! the write penalty applies to workload demand, not capacity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tco::{DiskSpec, WorkloadProfile};

#[derive(Debug, Error)]
pub enum RaidError {
    #[error("{mode:?} does not admit {n} member disks")]
    InvalidDiskCount { mode: RaidMode, n: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RaidMode {
    /// Striping.
    Raid0,
    /// Mirroring across two equal striped groups; member count must be even.
    Raid1,
    /// Striping with one parity write per logical write; needs at least 3 disks.
    Raid5,
}

impl RaidMode {
    pub fn validate_n(self, n: u32) -> Result<(), RaidError> {
        let ok = match self {
            RaidMode::Raid0 => n >= 1,
            RaidMode::Raid1 => n >= 2 && n.is_multiple_of(2),
            RaidMode::Raid5 => n >= 3,
        };
        if ok {
            Ok(())
        } else {
            Err(RaidError::InvalidDiskCount { mode: self, n })
        }
    }

    /// Per-write IOPS penalty.
    pub fn write_penalty(self) -> f64 {
        match self {
            RaidMode::Raid0 => 1.0,
            RaidMode::Raid1 => 2.0,
            RaidMode::Raid5 => 4.0,
        }
    }

    /// Device-side multiplier on a workload's logical write rate.
    pub fn lambda_mult(self, n: u32) -> f64 {
        match self {
            RaidMode::Raid0 => 1.0,
            RaidMode::Raid1 => 2.0,
            RaidMode::Raid5 => n as f64 / (n as f64 - 1.0),
        }
    }

    /// Usable space of the set, in member-disk units.
    pub fn space_factor(self, n: u32) -> f64 {
        match self {
            RaidMode::Raid0 => n as f64,
            RaidMode::Raid1 => n as f64 / 2.0,
            RaidMode::Raid5 => n as f64 - 1.0,
        }
    }
}

/// A homogeneous RAID set collapsed to one allocatable unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoDisk {
    pub member_spec: DiskSpec,
    pub n: u32,
    pub mode: RaidMode,
    /// Converted parameters, shaped like an ordinary disk spec so the
    /// allocator and simulator treat the set transparently.
    pub derived: DiskSpec,
}

/// Builds the pseudo-disk for `n` identical members under `mode`.
pub fn raid_pseudo_disk(spec: &DiskSpec, n: u32, mode: RaidMode) -> Result<PseudoDisk, RaidError> {
    mode.validate_n(n)?;
    let nf = n as f64;
    let derived = DiskSpec {
        id: spec.id.clone(),
        cost_purchase: spec.cost_purchase * nf,
        cost_setup: spec.cost_setup * nf,
        rate_power: spec.rate_power * nf,
        rate_labor: spec.rate_labor * nf,
        write_limit: spec.write_limit * nf,
        capacity_space: spec.capacity_space * mode.space_factor(n),
        capacity_iops: spec.capacity_iops * nf,
        waf_model: spec.waf_model.clone(),
        lambda_mult: mode.lambda_mult(n),
        write_penalty: mode.write_penalty(),
    };
    Ok(PseudoDisk { member_spec: spec.clone(), n, mode, derived })
}

/// Penalized throughput demand of a workload under a RAID mode, IOPS:
/// each write costs `penalty` member I/Os, reads pass through.
pub fn raid_effective_iops(w: &WorkloadProfile, mode: RaidMode) -> f64 {
    let rho = mode.write_penalty();
    w.peak_iops * w.write_ratio * rho + w.peak_iops * (1.0 - w.write_ratio)
}

/// Device-side logical write rate of a workload on a pseudo-disk, GB/day.
pub fn raid_effective_write_rate(w: &WorkloadProfile, pd: &PseudoDisk) -> f64 {
    w.write_rate * pd.derived.lambda_mult
}
