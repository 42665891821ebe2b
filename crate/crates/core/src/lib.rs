//! Trace-driven cost modeling and workload placement for all-flash storage pools.
//!
//! The crate models an SSD pool in which every disk amplifies its logical
//! write stream by a workload-dependent write amplification factor (WAF).
//! On top of that model it provides:
//!
//! - [`waf`]: the piecewise WAF curve (flat linear stage, then a decaying
//!   quadratic stage past a turning point) and a constrained least-squares
//!   fitter for it.
//! - [`tco`]: disk / workload domain types plus the ownership-cost formulas:
//!   lifetime cost, cost per day, and the data-averaged $/GB rate.
//! - [`detector`]: an online sequential-stream detector that estimates the
//!   write sequential ratio of a raw block I/O stream.
//! - [`trace`]: block-trace parsing, workload profiling, and a synthetic
//!   trace generator used as a test oracle.
//! - [`raid`]: conversion of homogeneous RAID sets into single allocatable
//!   pseudo-disks, including the per-mode write penalty.
//! - [`allocator`]: online placement policies (cost-minimizing family,
//!   performance-enhanced scoring, and four classical baselines).
//! - [`sim`]: the deterministic event loop that replays workload arrivals,
//!   tracks per-disk wear epochs, and detects disk death.
//! - [`offline`]: the offline planner that provisions a homogeneous pool and
//!   assigns a fully known workload set, switching between a
//!   sequentiality-grouping approach and a rate-balancing greedy approach.
//!
//! Units are fixed throughout: days for time, GB (2^30 bytes) for data
//! volume, IOPS for throughput, and US dollars for cost. Block addresses are
//! counted in 4 KiB pages.

pub mod allocator;
pub mod detector;
pub mod offline;
pub mod raid;
pub mod sim;
pub mod tco;
pub mod trace;
pub mod waf;

/// 4 KiB pages per GB (GB is 2^30 bytes throughout the crate).
pub const PAGES_PER_GB: u64 = (1 << 30) / PAGE_BYTES;

/// Page size used for all LBN arithmetic.
pub const PAGE_BYTES: u64 = 4096;

/// Population coefficient of variation: stddev over mean, 0 when the mean is 0.
///
/// The zero-mean convention avoids a division hazard for completely empty
/// pools; every caller ranks candidates, and a constant cannot change a
/// ranking among equally-empty states.
pub fn population_cv(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt() / mean
}
