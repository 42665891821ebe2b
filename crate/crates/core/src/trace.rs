//! Block-trace ingestion, workload profiling, and synthetic trace generation.
//!
//! Two input layouts are supported:
//!
//! - `msr`: `timestamp,hostname,disknum,type,offset_bytes,size_bytes,latency`
//!   with timestamps in 100 ns ticks (converted to seconds since trace
//!   start). Byte offsets convert to 4 KiB page LBNs by integer division;
//!   partial-page sizes round up to whole pages.
//! - `simple`: `time_s,op,lbn_4k,size_4k`, already in page units.
//!
//! Profiling turns an event stream into a [`WorkloadProfile`]: sequential
//! ratio from the stream detector, daily write rate extrapolated linearly
//! from the trace span, peak IOPS over aligned (tumbling) statistical
//! windows, write ratio by I/O count, and working-set size as deduplicated
//! page coverage over the full trace.

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{Detector, DetectorConfig, IoEvent, IoOp};
use crate::tco::WorkloadProfile;
use crate::PAGES_PER_GB;

/// Seconds in the default peak-throughput analysis window (5 minutes).
pub const DEFAULT_PEAK_WINDOW_SECS: f64 = 300.0;

/// Fraction of malformed lines tolerated before a parse aborts.
pub const MALFORMED_LINE_LIMIT: f64 = 0.01;

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot read trace: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown trace layout {0:?}")]
    UnknownLayout(String),
    #[error("{malformed} of {total} lines malformed, over the {limit:.0}% limit")]
    TooManyMalformed { malformed: usize, total: usize, limit: f64 },
    #[error("trace has no time span; cannot extrapolate rates")]
    DegenerateTrace,
    #[error("trace is empty")]
    EmptyTrace,
}

/// Supported on-disk trace layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Msr,
    Simple,
}

impl FromStr for TraceFormat {
    type Err = TraceError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "msr" | "msr-csv" => Ok(TraceFormat::Msr),
            "simple" | "simple-csv" => Ok(TraceFormat::Simple),
            other => Err(TraceError::UnknownLayout(other.to_string())),
        }
    }
}

/// Parses a trace file into events, in file order.
///
/// Malformed lines are counted and skipped; the parse aborts once they
/// exceed [`MALFORMED_LINE_LIMIT`] of all lines.
pub fn parse_trace(path: &Path, layout: TraceFormat) -> Result<Vec<IoEvent>, TraceError> {
    let file = std::fs::File::open(path)?;
    parse_trace_reader(std::io::BufReader::new(file), layout)
}

pub fn parse_trace_reader<R: BufRead>(
    reader: R,
    layout: TraceFormat,
) -> Result<Vec<IoEvent>, TraceError> {
    let mut events = Vec::new();
    let mut malformed = 0usize;
    let mut total = 0usize;
    let mut first_ticks: Option<u64> = None;
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        total += 1;
        let parsed = match layout {
            TraceFormat::Msr => parse_msr_line(trimmed, &mut first_ticks),
            TraceFormat::Simple => parse_simple_line(trimmed),
        };
        match parsed {
            Some(ev) => events.push(ev),
            None => {
                // A single header line is tolerated silently.
                if total == 1 && looks_like_header(trimmed) {
                    total -= 1;
                } else {
                    malformed += 1;
                }
            }
        }
    }
    if total > 0 && malformed as f64 > MALFORMED_LINE_LIMIT * total as f64 {
        return Err(TraceError::TooManyMalformed {
            malformed,
            total,
            limit: MALFORMED_LINE_LIMIT * 100.0,
        });
    }
    Ok(events)
}

fn looks_like_header(line: &str) -> bool {
    let lower = line.to_ascii_lowercase();
    lower.contains("time") || lower.contains("offset") || lower.contains("lbn")
}

fn parse_op(s: &str) -> Option<IoOp> {
    match s.trim().to_ascii_lowercase().as_str() {
        "read" | "r" => Some(IoOp::Read),
        "write" | "w" => Some(IoOp::Write),
        _ => None,
    }
}

fn parse_msr_line(line: &str, first_ticks: &mut Option<u64>) -> Option<IoEvent> {
    let mut fields = line.split(',');
    let ticks: u64 = fields.next()?.trim().parse().ok()?;
    let _hostname = fields.next()?;
    let _disknum = fields.next()?;
    let op = parse_op(fields.next()?)?;
    let offset: u64 = fields.next()?.trim().parse().ok()?;
    let size: u64 = fields.next()?.trim().parse().ok()?;
    if size == 0 {
        return None;
    }
    let base = *first_ticks.get_or_insert(ticks);
    let time = ticks.saturating_sub(base) as f64 * 1e-7;
    let lbn = offset / crate::PAGE_BYTES;
    // Round partial pages up so no byte loses its volume.
    let end = (offset + size).div_ceil(crate::PAGE_BYTES);
    Some(IoEvent { time, lbn, size: end - lbn, op })
}

fn parse_simple_line(line: &str) -> Option<IoEvent> {
    let mut fields = line.split(',');
    let time: f64 = fields.next()?.trim().parse().ok()?;
    let op = parse_op(fields.next()?)?;
    let lbn: u64 = fields.next()?.trim().parse().ok()?;
    let size: u64 = fields.next()?.trim().parse().ok()?;
    if size == 0 || !time.is_finite() || time < 0.0 {
        return None;
    }
    Some(IoEvent { time, lbn, size, op })
}

/// Profiles an event stream into workload statistics.
///
/// `window_secs` is the tumbling peak-throughput window (5 minutes by
/// default); windows are aligned to multiples of the window length.
pub fn profile_workload(
    id: &str,
    arrival: f64,
    events: &[IoEvent],
    window_secs: f64,
) -> Result<WorkloadProfile, TraceError> {
    if events.is_empty() {
        return Err(TraceError::EmptyTrace);
    }
    let t_first = events.iter().map(|e| e.time).fold(f64::INFINITY, f64::min);
    let t_last = events.iter().map(|e| e.time).fold(f64::NEG_INFINITY, f64::max);
    let span_secs = t_last - t_first;
    if span_secs <= 0.0 {
        return Err(TraceError::DegenerateTrace);
    }

    let mut detector = Detector::new(DetectorConfig::default());
    let mut write_pages = 0u64;
    let mut write_ios = 0usize;
    let mut coverage: HashSet<u64> = HashSet::new();
    let mut window_counts: std::collections::HashMap<i64, u64> =
        std::collections::HashMap::new();
    for ev in events {
        if ev.op == IoOp::Write {
            detector.ingest(ev);
            write_pages += ev.size;
            write_ios += 1;
        }
        for p in ev.lbn..ev.lbn + ev.size {
            coverage.insert(p);
        }
        let w = (ev.time / window_secs).floor() as i64;
        *window_counts.entry(w).or_insert(0) += 1;
    }

    let seq_ratio = detector.seq_ratio().unwrap_or(0.0);
    let span_days = span_secs / SECONDS_PER_DAY;
    let write_rate = write_pages as f64 / PAGES_PER_GB as f64 / span_days;
    let peak_count = window_counts.values().copied().max().unwrap_or(0);
    let peak_iops = peak_count as f64 / window_secs;
    let write_ratio = write_ios as f64 / events.len() as f64;
    let working_set = coverage.len() as f64 / PAGES_PER_GB as f64;

    Ok(WorkloadProfile {
        id: id.to_string(),
        arrival,
        seq_ratio,
        write_rate,
        peak_iops,
        write_ratio,
        working_set,
    })
}

/// Parameters for the synthetic trace generator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Target fraction of write volume in qualifying sequential runs.
    pub seq_fraction: f64,
    /// Target fraction of I/Os that are writes.
    pub write_fraction: f64,
    /// Target logical write rate, GB/day.
    pub rate_gb_day: f64,
    /// Trace duration, days.
    pub duration_days: f64,
    pub seed: u64,
    /// Optional working-set target, GB; default leaves every address unique.
    pub working_set_gb: Option<f64>,
}

/// What the generator actually emitted, used as the profiling oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthTruth {
    pub seq_fraction: f64,
    pub write_fraction: f64,
    pub rate_gb_day: f64,
    pub peak_iops: f64,
    pub working_set_gb: f64,
}

/// Length of one generated sequential run, pages (2 MiB).
const RUN_PAGES: u64 = 512;
/// I/Os per run.
const RUN_IOS: u64 = 32;
/// Spacing between scattered singleton slots, pages (beyond the 32-page gap).
const SINGLE_STRIDE: u64 = 40;
const SINGLE_BASE: u64 = 1 << 40;
const READ_SIZE: u64 = 8;

/// Generates a deterministic synthetic block trace whose profile recovers the
/// requested parameters.
///
/// Sequential volume is emitted as contiguous 2 MiB runs (each run is a burst
/// of consecutive events, so it cannot be evicted mid-run); random volume as
/// 4 KiB singletons spaced farther apart than the detector gap. Runs and
/// singletons draw addresses from disjoint regions sized to the working-set
/// target; reads land on already-written pages.
pub fn synth_trace(spec: &SynthSpec) -> (Vec<IoEvent>, SynthTruth) {
    assert!((0.0..=1.0).contains(&spec.seq_fraction), "seq_fraction in [0,1]");
    assert!(spec.write_fraction > 0.0 && spec.write_fraction <= 1.0);
    assert!(spec.duration_days > 0.0 && spec.rate_gb_day >= 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let total_pages =
        (spec.rate_gb_day * spec.duration_days * PAGES_PER_GB as f64).round() as u64;
    let n_runs = (spec.seq_fraction * total_pages as f64 / RUN_PAGES as f64).round() as u64;
    let n_singles = total_pages.saturating_sub(n_runs * RUN_PAGES);

    // Address plan: runs cycle over run-aligned slots, singletons over
    // stride-spaced slots; both regions shrink to meet the footprint target.
    let written_seq = n_runs * RUN_PAGES;
    let ws_pages = spec
        .working_set_gb
        .map(|g| (g * PAGES_PER_GB as f64).round() as u64)
        .unwrap_or(written_seq + n_singles);
    let seq_share = if written_seq + n_singles == 0 {
        0.0
    } else {
        written_seq as f64 / (written_seq + n_singles) as f64
    };
    let seq_region = ((ws_pages as f64 * seq_share / RUN_PAGES as f64).round() as u64)
        .clamp(1, n_runs.max(1))
        * RUN_PAGES;
    let single_slots = ws_pages
        .saturating_sub(seq_region.min(written_seq))
        .max(1)
        .min(n_singles.max(1));

    let write_ios = n_runs * RUN_IOS + n_singles;
    let n_reads = if spec.write_fraction >= 1.0 {
        0
    } else {
        (write_ios as f64 * (1.0 - spec.write_fraction) / spec.write_fraction).round() as u64
    };

    // Burst schedule: a run is emitted atomically; singles and reads are
    // standalone bursts. Shuffled deterministically, then spread uniformly.
    #[derive(Clone, Copy)]
    enum Burst {
        Run(u64),
        Single(u64),
        Read,
    }
    let mut bursts: Vec<Burst> = Vec::new();
    for i in 0..n_runs {
        bursts.push(Burst::Run(i));
    }
    for i in 0..n_singles {
        bursts.push(Burst::Single(i));
    }
    for _ in 0..n_reads {
        bursts.push(Burst::Read);
    }
    bursts.shuffle(&mut rng);

    let total_events = (n_runs * RUN_IOS + n_singles + n_reads).max(1);
    let duration_secs = spec.duration_days * SECONDS_PER_DAY;
    let dt = duration_secs / total_events as f64;

    let mut events = Vec::with_capacity(total_events as usize);
    let mut tick = 0u64;
    let next_time = |tick: &mut u64| {
        let t = *tick as f64 * dt;
        *tick += 1;
        t
    };
    let run_slots = seq_region / RUN_PAGES;
    for burst in bursts {
        match burst {
            Burst::Run(i) => {
                let start = (i % run_slots) * RUN_PAGES;
                let io_pages = RUN_PAGES / RUN_IOS;
                for k in 0..RUN_IOS {
                    events.push(IoEvent {
                        time: next_time(&mut tick),
                        lbn: start + k * io_pages,
                        size: io_pages,
                        op: IoOp::Write,
                    });
                }
            }
            Burst::Single(i) => {
                events.push(IoEvent {
                    time: next_time(&mut tick),
                    lbn: SINGLE_BASE + (i % single_slots) * SINGLE_STRIDE,
                    size: 1,
                    op: IoOp::Write,
                });
            }
            Burst::Read => {
                let lbn = if seq_region > READ_SIZE && rng.gen_bool(0.5) {
                    rng.gen_range(0..seq_region - READ_SIZE)
                } else {
                    SINGLE_BASE + rng.gen_range(0..single_slots) * SINGLE_STRIDE
                };
                let size = if lbn >= SINGLE_BASE { 1 } else { READ_SIZE };
                events.push(IoEvent { time: next_time(&mut tick), lbn, size, op: IoOp::Read });
            }
        }
    }

    let footprint = if n_runs == 0 {
        n_singles.min(single_slots)
    } else {
        seq_region.min(written_seq) + n_singles.min(single_slots)
    };
    let truth = SynthTruth {
        seq_fraction: if total_pages == 0 {
            0.0
        } else {
            (n_runs * RUN_PAGES) as f64 / total_pages as f64
        },
        write_fraction: write_ios as f64 / total_events as f64,
        rate_gb_day: total_pages as f64 / PAGES_PER_GB as f64 / spec.duration_days,
        peak_iops: total_events as f64 / duration_secs,
        working_set_gb: footprint as f64 / PAGES_PER_GB as f64,
    };
    (events, truth)
}
