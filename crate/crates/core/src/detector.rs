//! Online sequential-stream detection over a block write stream.
//!
//! The detector keeps an LRU chain of stream nodes. An incoming write joins
//! the most recently used node whose last I/O it continues, where continuity
//! admits three scenarios against the node's last I/O `[lastLBN, lastEnd)`:
//!
//! 1. overlap: the write starts inside `[lastLBN, lastEnd)`;
//! 2. perfect: the write starts exactly at `lastEnd`;
//! 3. gapped: the write starts in `(lastEnd, lastEnd + seqGap]`.
//!
//! Otherwise a new node is created, evicting the LRU node when the chain is
//! full. A stream qualifies as sequential once its deduplicated coverage
//! reaches `seqStreamSize`; the sequential ratio is the write volume owned by
//! qualifying streams over the total write volume. Bytes of an evicted node
//! keep the classification they had at eviction, which keeps the estimator
//! single-pass.
//!
//! All sizes and addresses are in 4 KiB pages. Reads are ignored: the ratio
//! feeds a write amplification model, and only writes amplify.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("sequential ratio undefined: no write events ingested")]
    NoWrites,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IoOp {
    Read,
    Write,
}

/// One block I/O event. `lbn` and `size` are in 4 KiB pages; `time` is
/// seconds since trace start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IoEvent {
    pub time: f64,
    pub lbn: u64,
    pub size: u64,
    pub op: IoOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Capacity of the recency chain, in stream nodes.
    pub queue_count: usize,
    /// Continuity slack past the last I/O's end, pages.
    pub seq_gap: u64,
    /// Coverage threshold for a stream to qualify as sequential, pages.
    pub seq_stream_size: u64,
}

impl Default for DetectorConfig {
    /// 32 nodes, 128 KiB gap, 1 MiB qualification threshold.
    fn default() -> Self {
        DetectorConfig { queue_count: 32, seq_gap: 32, seq_stream_size: 256 }
    }
}

/// Bookkeeping for one detected stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamNode {
    /// Start of the most recent I/O in the stream.
    pub last_lbn: u64,
    /// Size of the most recent I/O, pages.
    pub last_size: u64,
    /// Exclusive end of the highest page the stream ever wrote. The region
    /// `[last_lbn, max_end)` is always fully covered, which makes exact
    /// deduplicated coverage cheap to maintain.
    max_end: u64,
    /// Deduplicated pages written by the stream.
    pub coverage: u64,
    /// Total pages attributed to the stream (overwrites included).
    pub total_pages: u64,
}

impl StreamNode {
    fn accepts(&self, lbn: u64, seq_gap: u64) -> bool {
        let end = self.last_lbn + self.last_size;
        lbn >= self.last_lbn && lbn <= end + seq_gap
    }

    fn absorb(&mut self, lbn: u64, size: u64) {
        let end = lbn + size;
        // Pages below max(lbn, max_end) are either already covered or an
        // unreachable skipped hole; neither adds coverage.
        self.coverage += end.saturating_sub(lbn.max(self.max_end));
        self.total_pages += size;
        self.last_lbn = lbn;
        self.last_size = size;
        self.max_end = self.max_end.max(end);
    }
}

/// Point-in-time view of the detector for profilers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorSnapshot {
    pub seq_ratio: Option<f64>,
    pub stream_count: usize,
    pub qualified_pages: u64,
    pub total_pages: u64,
    pub evictions: u64,
}

#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    /// Recency chain, most recently used first.
    queue: VecDeque<StreamNode>,
    total_write_pages: u64,
    evicted_qualified: u64,
    evicted_unqualified: u64,
    evictions: u64,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Self {
        Detector {
            config,
            queue: VecDeque::with_capacity(config.queue_count),
            total_write_pages: 0,
            evicted_qualified: 0,
            evicted_unqualified: 0,
            evictions: 0,
        }
    }

    pub fn with_defaults() -> Self {
        Detector::new(DetectorConfig::default())
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    /// Feeds one event. Reads and zero-sized events are ignored.
    pub fn ingest(&mut self, ev: &IoEvent) {
        if ev.op != IoOp::Write || ev.size == 0 {
            return;
        }
        self.total_write_pages += ev.size;
        if let Some(idx) =
            self.queue.iter().position(|n| n.accepts(ev.lbn, self.config.seq_gap))
        {
            let mut node = self.queue.remove(idx).expect("index from position");
            node.absorb(ev.lbn, ev.size);
            self.queue.push_front(node);
            return;
        }
        if self.queue.len() == self.config.queue_count {
            if let Some(old) = self.queue.pop_back() {
                if old.coverage >= self.config.seq_stream_size {
                    self.evicted_qualified += old.total_pages;
                } else {
                    self.evicted_unqualified += old.total_pages;
                }
                self.evictions += 1;
            }
        }
        self.queue.push_front(StreamNode {
            last_lbn: ev.lbn,
            last_size: ev.size,
            max_end: ev.lbn + ev.size,
            coverage: ev.size,
            total_pages: ev.size,
        });
    }

    /// Pages currently classified as sequential: live qualifying streams plus
    /// streams that qualified by eviction time.
    pub fn qualified_pages(&self) -> u64 {
        let live: u64 = self
            .queue
            .iter()
            .filter(|n| n.coverage >= self.config.seq_stream_size)
            .map(|n| n.total_pages)
            .sum();
        live + self.evicted_qualified
    }

    pub fn total_pages(&self) -> u64 {
        self.total_write_pages
    }

    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    /// Write volume in qualifying streams over total write volume.
    pub fn seq_ratio(&self) -> Result<f64, DetectorError> {
        if self.total_write_pages == 0 {
            return Err(DetectorError::NoWrites);
        }
        Ok(self.qualified_pages() as f64 / self.total_write_pages as f64)
    }

    pub fn snapshot(&self) -> DetectorSnapshot {
        DetectorSnapshot {
            seq_ratio: self.seq_ratio().ok(),
            stream_count: self.queue.len(),
            qualified_pages: self.qualified_pages(),
            total_pages: self.total_write_pages,
            evictions: self.evictions,
        }
    }

    /// Pages not classified as sequential (live non-qualifying plus evicted
    /// non-qualifying). Together with [`Self::qualified_pages`] this accounts
    /// for every ingested write page.
    pub fn unqualified_pages(&self) -> u64 {
        let live: u64 = self
            .queue
            .iter()
            .filter(|n| n.coverage < self.config.seq_stream_size)
            .map(|n| n.total_pages)
            .sum();
        live + self.evicted_unqualified
    }
}
