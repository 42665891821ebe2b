//! Online workload-to-disk placement policies.
//!
//! Every policy scores each feasible disk under the hypothesis "the new
//! workload lands here" and commits to the minimum score, breaking ties by
//! pool position. The cost family scores the whole pool:
//!
//! - v1: pool cost over expected lifetimes, $;
//! - v2: that cost per summed lifetime day, $/day;
//! - v3: that cost per expected logical GB served, $/GB (the headline rate);
//! - perf: v3 blended with utilization rewards and load-balancing penalties
//!   under per-disk feasibility thresholds.
//!
//! Baselines: most remaining endurance, lowest post-add WAF, lowest combined
//! write rate, fewest resident workloads.
//!
//! Scoring is pure: hypotheses never touch pool state. When the hypothesis
//! disk is the candidate, its worked phase is anchored at the new arrival
//! and the new workload contributes its rate over the disk's remaining
//! expected life; other disks keep their current anchor at their own most
//! recent arrival.
//!
//! Before lifetime-based scoring is possible every disk must hold at least
//! one workload, so empty disks are filled first (lowest position wins).

use serde::{Deserialize, Serialize};

use crate::tco::{combined_seq_ratio, DiskState, TcoError, WorkloadProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "minTCO_v1")]
    MinTcoV1,
    #[serde(rename = "minTCO_v2")]
    MinTcoV2,
    #[serde(rename = "minTCO_v3")]
    MinTcoV3,
    #[serde(rename = "minTCO_Perf")]
    MinTcoPerf,
    #[serde(rename = "maxRemCycle")]
    MaxRemCycle,
    #[serde(rename = "minWAF")]
    MinWaf,
    #[serde(rename = "minRate")]
    MinRate,
    #[serde(rename = "minWorkloadNum")]
    MinWorkloadNum,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        PolicyKind::MinTcoV1,
        PolicyKind::MinTcoV2,
        PolicyKind::MinTcoV3,
        PolicyKind::MinTcoPerf,
        PolicyKind::MaxRemCycle,
        PolicyKind::MinWaf,
        PolicyKind::MinRate,
        PolicyKind::MinWorkloadNum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::MinTcoV1 => "minTCO_v1",
            PolicyKind::MinTcoV2 => "minTCO_v2",
            PolicyKind::MinTcoV3 => "minTCO_v3",
            PolicyKind::MinTcoPerf => "minTCO_Perf",
            PolicyKind::MaxRemCycle => "maxRemCycle",
            PolicyKind::MinWaf => "minWAF",
            PolicyKind::MinRate => "minRate",
            PolicyKind::MinWorkloadNum => "minWorkloadNum",
        }
    }
}

/// Affine weight function of an I/O ratio: `base + slope * ratio`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightFn {
    pub base: f64,
    #[serde(default)]
    pub slope: f64,
}

impl WeightFn {
    pub fn constant(base: f64) -> Self {
        WeightFn { base, slope: 0.0 }
    }

    pub fn eval(&self, ratio: f64) -> f64 {
        self.base + self.slope * ratio
    }
}

/// Weight functions of the performance-enhanced objective, in the order
/// (cost, space reward, iops reward, space balance, iops balance).
/// The cost weight takes the workload's write ratio; the rest take its read
/// ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfWeights {
    pub f: WeightFn,
    pub g_space: WeightFn,
    pub g_iops: WeightFn,
    pub h_space: WeightFn,
    pub h_iops: WeightFn,
}

impl PerfWeights {
    /// Constant weights from a `[f, g_s, g_p, h_s, h_p]` profile such as
    /// `[5, 1, 1, 3, 3]`.
    pub fn from_profile(profile: [f64; 5]) -> Self {
        PerfWeights {
            f: WeightFn::constant(profile[0]),
            g_space: WeightFn::constant(profile[1]),
            g_iops: WeightFn::constant(profile[2]),
            h_space: WeightFn::constant(profile[3]),
            h_iops: WeightFn::constant(profile[4]),
        }
    }
}

/// Upper bounds marking a candidate infeasible for the perf policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Per-disk cost-rate bound, $/GB.
    #[serde(default = "inf")]
    pub cost: f64,
    /// Space utilization bound.
    #[serde(default = "one")]
    pub space: f64,
    /// Throughput utilization bound.
    #[serde(default = "one")]
    pub iops: f64,
}

fn inf() -> f64 {
    f64::INFINITY
}

fn one() -> f64 {
    1.0
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { cost: f64::INFINITY, space: 1.0, iops: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<PerfWeights>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        PolicySpec { kind, weights: None, thresholds: Thresholds::default() }
    }

    pub fn perf(weights: PerfWeights) -> Self {
        PolicySpec {
            kind: PolicyKind::MinTcoPerf,
            weights: Some(weights),
            thresholds: Thresholds::default(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if (self.kind == PolicyKind::MinTcoPerf) != self.weights.is_some() {
            return Err("weights are required exactly when kind is minTCO_Perf".into());
        }
        let bad_bound = |v: f64| v.is_nan() || v <= 0.0;
        if bad_bound(self.thresholds.cost)
            || bad_bound(self.thresholds.space)
            || bad_bound(self.thresholds.iops)
            || self.thresholds.space > 1.0
            || self.thresholds.iops > 1.0
        {
            return Err("thresholds must be positive (utilization bounds in (0, 1])".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resource {
    Space,
    Iops,
}

/// Outcome of one placement: the chosen disk (absent on rejection), its
/// score, and the full audit trail of candidate scores in pool order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocationDecision {
    pub workload: String,
    pub disk: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disk_index: Option<usize>,
    pub score: Option<f64>,
    pub candidate_scores: Vec<(String, f64)>,
    /// True when the placement came from the warm-up rule, not a score.
    #[serde(default)]
    pub warm_up: bool,
}

impl AllocationDecision {
    pub fn rejected(&self) -> bool {
        self.disk.is_none()
    }
}

/// Per-disk figures under the hypothesis "workload lands on disk `k`".
struct DiskFigures {
    cost_init: f64,
    rate_maint: f64,
    lifetime: f64,
    /// Expected logical data served by the disk's workloads, GB.
    data: f64,
}

fn figures_for(
    pool: &[DiskState],
    k: usize,
    w: &WorkloadProfile,
    now: f64,
) -> Result<Vec<DiskFigures>, TcoError> {
    let mut out = Vec::with_capacity(pool.len());
    for (i, disk) in pool.iter().enumerate() {
        let fig = if i == k {
            hypothetical_candidate(disk, w, now)?
        } else {
            if disk.is_alive() && !disk.is_warm() {
                return Err(TcoError::WarmUpViolation(disk.spec.id.clone()));
            }
            let lifetime = crate::tco::expected_lifetime(disk)?;
            DiskFigures {
                cost_init: disk.spec.cost_init(),
                rate_maint: disk.spec.rate_maint(),
                lifetime,
                data: disk.expected_data()?,
            }
        };
        out.push(fig);
    }
    Ok(out)
}

fn hypothetical_candidate(
    disk: &DiskState,
    w: &WorkloadProfile,
    now: f64,
) -> Result<DiskFigures, TcoError> {
    let init = disk.init_time.unwrap_or(now);
    let worked = now - init;
    let worn_now = disk.wornout_at(now)?;

    let mut set: Vec<WorkloadProfile> = disk.assigned.clone();
    set.push(w.clone());
    let device_rate: f64 = set.iter().map(|j| disk.spec.effective_write_rate(j)).sum();
    let remaining = (disk.spec.write_limit - worn_now).max(0.0);
    let expected = if remaining == 0.0 {
        0.0
    } else if device_rate == 0.0 {
        f64::INFINITY
    } else {
        let waf = disk.spec.waf_model.eval(combined_seq_ratio(&set)?)?;
        remaining / (device_rate * waf)
    };
    let death = now + expected;
    // Residents write from their arrivals; the new workload from `now`.
    let data = disk
        .assigned
        .iter()
        .map(|j| j.write_rate * (death - j.arrival).max(0.0))
        .sum::<f64>()
        + w.write_rate * expected;
    Ok(DiskFigures {
        cost_init: disk.spec.cost_init(),
        rate_maint: disk.spec.rate_maint(),
        lifetime: worked + expected,
        data,
    })
}

fn pool_cost(figs: &[DiskFigures]) -> f64 {
    figs.iter().map(|f| f.cost_init + f.rate_maint * f.lifetime).sum()
}

/// Pool-wide data-averaged cost rate, $/GB, under the hypothesis that `w`
/// is placed on disk `k` at time `now`. Pure: the pool is not modified.
pub fn tco_assign(
    pool: &[DiskState],
    k: usize,
    w: &WorkloadProfile,
    now: f64,
) -> Result<f64, TcoError> {
    let figs = figures_for(pool, k, w, now)?;
    let data: f64 = figs.iter().map(|f| f.data).sum();
    if data <= 0.0 {
        return Err(TcoError::UndefinedRate);
    }
    Ok(pool_cost(&figs) / data)
}

/// Resource utilization of disk `i` when disk `k` is hypothesized to take
/// the workload: used over total, plus the workload's demand when `i == k`.
pub fn utilization(
    pool: &[DiskState],
    i: usize,
    k: usize,
    w: &WorkloadProfile,
    resource: Resource,
) -> f64 {
    let disk = &pool[i];
    let (used, cap, demand) = match resource {
        Resource::Space => {
            (disk.used_space(), disk.spec.capacity_space, w.working_set)
        }
        Resource::Iops => {
            (disk.used_iops(), disk.spec.capacity_iops, disk.spec.effective_iops(w))
        }
    };
    if i == k {
        (used + demand) / cap
    } else {
        used / cap
    }
}

fn utilization_vector(
    pool: &[DiskState],
    k: usize,
    w: &WorkloadProfile,
    resource: Resource,
) -> Vec<f64> {
    pool.iter()
        .enumerate()
        .filter(|(_, d)| d.is_alive())
        .map(|(i, _)| utilization(pool, i, k, w, resource))
        .collect()
}

/// Mean utilization over the (alive) pool for candidate `k`.
pub fn utilization_mean(
    pool: &[DiskState],
    k: usize,
    w: &WorkloadProfile,
    resource: Resource,
) -> f64 {
    let v = utilization_vector(pool, k, w, resource);
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Coefficient of variation of utilizations for candidate `k`; smaller means
/// better balanced.
pub fn utilization_cv(
    pool: &[DiskState],
    k: usize,
    w: &WorkloadProfile,
    resource: Resource,
) -> f64 {
    crate::population_cv(&utilization_vector(pool, k, w, resource))
}

/// The performance-enhanced objective for candidate `k`: cost term minus
/// utilization rewards plus balance penalties. `Ok(None)` marks the
/// candidate infeasible under the thresholds.
pub fn enhanced_cost(
    pool: &[DiskState],
    k: usize,
    w: &WorkloadProfile,
    weights: &PerfWeights,
    thresholds: &Thresholds,
    now: f64,
) -> Result<Option<f64>, TcoError> {
    let figs = figures_for(pool, k, w, now)?;
    let total_data: f64 = figs.iter().map(|f| f.data).sum();
    if total_data <= 0.0 {
        return Err(TcoError::UndefinedRate);
    }
    // Per-disk feasibility under the hypothesis.
    for (i, f) in figs.iter().enumerate() {
        if !pool[i].is_alive() {
            continue;
        }
        let disk_rate = if f.data > 0.0 {
            (f.cost_init + f.rate_maint * f.lifetime) / f.data
        } else {
            f64::INFINITY
        };
        if disk_rate > thresholds.cost
            || utilization(pool, i, k, w, Resource::Space) > thresholds.space
            || utilization(pool, i, k, w, Resource::Iops) > thresholds.iops
        {
            return Ok(None);
        }
    }
    let tco_rate = pool_cost(&figs) / total_data;
    let read_ratio = 1.0 - w.write_ratio;
    let score = weights.f.eval(w.write_ratio) * tco_rate
        - weights.g_space.eval(read_ratio) * utilization_mean(pool, k, w, Resource::Space)
        + weights.h_space.eval(read_ratio) * utilization_cv(pool, k, w, Resource::Space)
        - weights.g_iops.eval(read_ratio) * utilization_mean(pool, k, w, Resource::Iops)
        + weights.h_iops.eval(read_ratio) * utilization_cv(pool, k, w, Resource::Iops);
    Ok(Some(score))
}

/// Scores candidate disk `k` for the policy. `Ok(None)` marks a candidate
/// rejected by the perf thresholds.
pub fn score_candidate(
    policy: &PolicySpec,
    pool: &[DiskState],
    k: usize,
    w: &WorkloadProfile,
    now: f64,
) -> Result<Option<f64>, TcoError> {
    let disk = &pool[k];
    let score = match policy.kind {
        PolicyKind::MinTcoV1 => {
            let figs = figures_for(pool, k, w, now)?;
            Some(pool_cost(&figs))
        }
        PolicyKind::MinTcoV2 => {
            let figs = figures_for(pool, k, w, now)?;
            let lifetimes: f64 = figs.iter().map(|f| f.lifetime).sum();
            Some(pool_cost(&figs) / lifetimes)
        }
        PolicyKind::MinTcoV3 => Some(tco_assign(pool, k, w, now)?),
        PolicyKind::MinTcoPerf => {
            let weights =
                policy.weights.as_ref().expect("validated: perf policy carries weights");
            enhanced_cost(pool, k, w, weights, &policy.thresholds, now)?
        }
        PolicyKind::MaxRemCycle => {
            Some(-(disk.spec.write_limit - disk.wornout_at(now)?))
        }
        PolicyKind::MinWaf => {
            let mut set = disk.assigned.clone();
            set.push(w.clone());
            Some(disk.spec.waf_model.eval(combined_seq_ratio(&set)?)?)
        }
        PolicyKind::MinRate => {
            let mut set = disk.assigned.clone();
            set.push(w.clone());
            Some(set.iter().map(|j| disk.spec.effective_write_rate(j)).sum())
        }
        PolicyKind::MinWorkloadNum => Some((disk.assigned.len() + 1) as f64),
    };
    Ok(score)
}

/// True when disk `i` can physically hold the workload.
pub fn fits(disk: &DiskState, w: &WorkloadProfile) -> bool {
    disk.is_alive()
        && disk.remaining_space() >= w.working_set
        && disk.remaining_iops() >= disk.spec.effective_iops(w)
}

/// Places one workload: warm-up routing first, then policy scoring over all
/// feasible disks, minimum score wins, ties broken by pool position.
/// A workload no disk can hold is rejected, which is a decision, not an error.
pub fn allocate_online(
    policy: &PolicySpec,
    pool: &[DiskState],
    w: &WorkloadProfile,
    now: f64,
) -> Result<AllocationDecision, TcoError> {
    // Warm-up: every disk must host a workload before lifetime scoring is
    // meaningful; route to the first empty disk that fits.
    let has_empty = pool.iter().any(|d| d.is_alive() && d.assigned.is_empty());
    if has_empty {
        if let Some((i, d)) = pool
            .iter()
            .enumerate()
            .find(|(_, d)| d.is_alive() && d.assigned.is_empty() && fits(d, w))
        {
            return Ok(AllocationDecision {
                workload: w.id.clone(),
                disk: Some(d.spec.id.clone()),
                disk_index: Some(i),
                score: None,
                candidate_scores: Vec::new(),
                warm_up: true,
            });
        }
    }

    let mut candidate_scores = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in pool.iter().enumerate() {
        if !fits(d, w) {
            continue;
        }
        let Some(score) = score_candidate(policy, pool, i, w, now)? else {
            continue;
        };
        candidate_scores.push((d.spec.id.clone(), score));
        let better = match best {
            None => true,
            Some((_, s)) => score.total_cmp(&s).is_lt(),
        };
        if better {
            best = Some((i, score));
        }
    }

    Ok(match best {
        Some((i, score)) => AllocationDecision {
            workload: w.id.clone(),
            disk: Some(pool[i].spec.id.clone()),
            disk_index: Some(i),
            score: Some(score),
            candidate_scores,
            warm_up: false,
        },
        None => AllocationDecision {
            workload: w.id.clone(),
            disk: None,
            disk_index: None,
            score: None,
            candidate_scores,
            warm_up: false,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tco::tests::{spec_with_waf, workload};
    use crate::tco::DiskSpec;
    use crate::waf::WafModel;
    use rand::{Rng, SeedableRng};

    fn const_waf(v: f64) -> WafModel {
        WafModel { alpha: 0.0, beta: v, eta: 0.0, mu: 0.0, gamma: v, turning_point: 0.5 }
    }

    fn warm(spec: DiskSpec, ws: Vec<WorkloadProfile>) -> DiskState {
        let first = ws.iter().map(|w| w.arrival).fold(f64::INFINITY, f64::min);
        let last = ws.iter().map(|w| w.arrival).fold(0.0_f64, f64::max);
        DiskState {
            spec,
            init_time: Some(first),
            last_arrival: last,
            assigned: ws,
            epochs: Vec::new(),
            wornout: 0.0,
            dead_time: None,
        }
    }

    fn symmetric_pool() -> Vec<DiskState> {
        vec![
            warm(spec_with_waf("d0", const_waf(2.0)), vec![workload("a", 10.0, 0.5)]),
            warm(spec_with_waf("d1", const_waf(2.0)), vec![workload("b", 10.0, 0.5)]),
        ]
    }

    #[test]
    fn symmetric_candidates_score_equally() {
        let pool = symmetric_pool();
        let w = workload("c", 5.0, 0.7);
        let s0 = tco_assign(&pool, 0, &w, 1.0).unwrap();
        let s1 = tco_assign(&pool, 1, &w, 1.0).unwrap();
        assert!((s0 - s1).abs() < 1e-12);
    }

    #[test]
    fn single_disk_score_matches_hand_formula() {
        let pool =
            vec![warm(spec_with_waf("d0", const_waf(2.0)), vec![workload("a", 10.0, 0.5)])];
        let w = workload("b", 10.0, 0.5);
        let now = 5.0;
        let score = tco_assign(&pool, 0, &w, now).unwrap();

        // Worked 5 days at physical 20 GB/day: wornout 100. Combined rate 20,
        // WAF 2 -> expected phase (1000 - 100) / 40 = 22.5 days.
        let expected_phase = (1000.0 - 100.0) / 40.0;
        let lifetime = now + expected_phase;
        let cost = 1000.0 + 2.0 * lifetime;
        let death = now + expected_phase;
        let data = 10.0 * death + 10.0 * expected_phase;
        assert!((score - cost / data).abs() < 1e-12, "{score} vs {}", cost / data);
    }

    #[test]
    fn fresh_disk_beats_worn_disk_for_heavy_random_writer() {
        let mut worn = warm(spec_with_waf("d0", const_waf(2.0)), vec![workload("a", 1.0, 0.5)]);
        worn.wornout = 900.0;
        let fresh = warm(spec_with_waf("d1", const_waf(2.0)), vec![workload("b", 1.0, 0.5)]);
        let pool = vec![worn, fresh];
        let w = workload("hog", 50.0, 0.0);
        let s_worn = tco_assign(&pool, 0, &w, 1.0).unwrap();
        let s_fresh = tco_assign(&pool, 1, &w, 1.0).unwrap();
        assert!(s_fresh < s_worn, "fresh {s_fresh} vs worn {s_worn}");
    }

    #[test]
    fn utilization_branches() {
        let mut pool = symmetric_pool();
        pool[0].assigned[0].working_set = 600.0; // capacity 1600
        let w = WorkloadProfile { working_set: 200.0, ..workload("c", 5.0, 0.5) };
        assert!((utilization(&pool, 0, 1, &w, Resource::Space) - 0.375).abs() < 1e-12);
        assert!((utilization(&pool, 0, 0, &w, Resource::Space) - 0.5).abs() < 1e-12);
        let empty = DiskState::new(spec_with_waf("e", const_waf(2.0)));
        let pool2 = vec![empty];
        assert_eq!(utilization(&pool2, 0, 1, &w, Resource::Space), 0.0);
    }

    #[test]
    fn utilization_cv_examples() {
        // Equal utilization on both disks, candidate demand zero: CV = 0.
        let pool = symmetric_pool();
        let free = WorkloadProfile { working_set: 0.0, ..workload("c", 5.0, 0.5) };
        assert_eq!(utilization_cv(&pool, 0, &free, Resource::Space), 0.0);

        // Utilizations {0.2, 0.4} -> population CV = (0.1 / 0.3).
        let mut pool = symmetric_pool();
        pool[0].assigned[0].working_set = 0.2 * 1600.0;
        pool[1].assigned[0].working_set = 0.4 * 1600.0;
        let cv = utilization_cv(&pool, 0, &free, Resource::Space);
        assert!((cv - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn filling_least_utilized_disk_balances_no_worse() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let mut pool = symmetric_pool();
            pool[0].assigned[0].working_set = rng.gen_range(0.0..1200.0);
            pool[1].assigned[0].working_set = rng.gen_range(0.0..1200.0);
            let w = WorkloadProfile {
                working_set: rng.gen_range(1.0..300.0),
                ..workload("c", 5.0, 0.5)
            };
            let (lo, hi) = if pool[0].used_space() <= pool[1].used_space() {
                (0, 1)
            } else {
                (1, 0)
            };
            let cv_lo = utilization_cv(&pool, lo, &w, Resource::Space);
            let cv_hi = utilization_cv(&pool, hi, &w, Resource::Space);
            assert!(cv_lo <= cv_hi + 1e-12);
        }
    }

    fn random_pool(rng: &mut impl Rng, disks: usize, workloads: usize) -> Vec<DiskState> {
        let mut pool = Vec::new();
        for d in 0..disks {
            let mut spec = spec_with_waf(
                &format!("d{d}"),
                WafModel::flat_then_quadratic(
                    rng.gen_range(1.5..4.0),
                    rng.gen_range(0.35..0.65),
                    rng.gen_range(1.0..1.4),
                ),
            );
            spec.write_limit = rng.gen_range(500.0..20_000.0);
            spec.cost_purchase = rng.gen_range(300.0..2000.0);
            spec.rate_power = rng.gen_range(0.1..2.0);
            pool.push(warm(spec, Vec::new()));
        }
        for j in 0..workloads {
            let w = WorkloadProfile {
                arrival: 0.0,
                working_set: rng.gen_range(1.0..120.0),
                peak_iops: rng.gen_range(10.0..400.0),
                write_ratio: rng.gen_range(0.05..1.0),
                ..workload(&format!("w{j}"), rng.gen_range(0.5..80.0), rng.gen_range(0.0..=1.0))
            };
            let d = rng.gen_range(0..disks);
            pool[d].assigned.push(w);
        }
        for d in pool.iter_mut() {
            d.init_time = Some(0.0);
            d.last_arrival = 0.0;
            d.wornout = rng.gen_range(0.0..0.5) * d.spec.write_limit;
            if d.assigned.is_empty() {
                // Keep every disk warm for scoring-path tests.
                d.assigned.push(workload("filler", 1.0, 0.5));
            }
        }
        pool
    }

    fn random_policy(rng: &mut impl Rng, kind: PolicyKind) -> PolicySpec {
        if kind == PolicyKind::MinTcoPerf {
            PolicySpec::perf(PerfWeights {
                f: WeightFn { base: rng.gen_range(0.5..6.0), slope: rng.gen_range(-0.5..0.5) },
                g_space: WeightFn { base: rng.gen_range(0.0..2.0), slope: 0.0 },
                g_iops: WeightFn { base: rng.gen_range(0.0..2.0), slope: 0.0 },
                h_space: WeightFn { base: rng.gen_range(0.0..4.0), slope: 0.0 },
                h_iops: WeightFn { base: rng.gen_range(0.0..4.0), slope: 0.0 },
            })
        } else {
            PolicySpec::new(kind)
        }
    }

    /// Independent argmin: enumerate every disk, re-check feasibility,
    /// re-score, and take the first minimum in pool order.
    fn brute_force(
        policy: &PolicySpec,
        pool: &[DiskState],
        w: &WorkloadProfile,
        now: f64,
    ) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..pool.len() {
            if !fits(&pool[i], w) {
                continue;
            }
            match score_candidate(policy, pool, i, w, now).unwrap() {
                Some(s) => {
                    if best.is_none_or(|(_, b)| s.total_cmp(&b).is_lt()) {
                        best = Some((i, s));
                    }
                }
                None => continue,
            }
        }
        best.map(|(i, _)| i)
    }

    #[test]
    fn decision_matches_brute_force_argmin() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        for trial in 0..40 {
            let disks = rng.gen_range(2..=8);
            let workloads = rng.gen_range(disks..=20);
            let pool = random_pool(&mut rng, disks, workloads);
            let w = WorkloadProfile {
                working_set: rng.gen_range(1.0..400.0),
                ..workload("new", rng.gen_range(0.5..60.0), rng.gen_range(0.0..=1.0))
            };
            for kind in PolicyKind::ALL {
                let policy = random_policy(&mut rng, kind);
                let decision = allocate_online(&policy, &pool, &w, 1.0).unwrap();
                let oracle = brute_force(&policy, &pool, &w, 1.0);
                assert_eq!(
                    decision.disk_index, oracle,
                    "trial {trial} policy {kind:?} disagrees"
                );
            }
        }
    }

    #[test]
    fn warm_up_routes_to_first_empty_disk() {
        let pool = vec![
            DiskState::new(spec_with_waf("d0", const_waf(2.0))),
            DiskState::new(spec_with_waf("d1", const_waf(2.0))),
        ];
        let policy = PolicySpec::new(PolicyKind::MinTcoV3);
        let d = allocate_online(&policy, &pool, &workload("a", 10.0, 0.5), 0.0).unwrap();
        assert_eq!(d.disk.as_deref(), Some("d0"));
        assert!(d.warm_up);
    }

    #[test]
    fn oversized_workload_is_rejected() {
        let pool = symmetric_pool();
        let w = WorkloadProfile { working_set: 5000.0, ..workload("big", 10.0, 0.5) };
        let policy = PolicySpec::new(PolicyKind::MinTcoV3);
        let d = allocate_online(&policy, &pool, &w, 1.0).unwrap();
        assert!(d.rejected());
        assert!(d.candidate_scores.is_empty());
    }

    #[test]
    fn scoring_does_not_mutate_pool() {
        let pool = symmetric_pool();
        let snapshot = format!("{pool:?}");
        let policy = PolicySpec::new(PolicyKind::MinTcoV3);
        let _ = allocate_online(&policy, &pool, &workload("c", 5.0, 0.5), 1.0).unwrap();
        assert_eq!(format!("{pool:?}"), snapshot);
    }

    #[test]
    fn degenerate_perf_weights_reduce_to_cost_ranking() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(55);
        for _ in 0..20 {
            let pool = random_pool(&mut rng, 4, 8);
            let w = workload("new", 12.0, 0.6);
            let perf = PolicySpec::perf(PerfWeights::from_profile([1.0, 0.0, 0.0, 0.0, 0.0]));
            let mut by_perf: Vec<(usize, f64)> = Vec::new();
            let mut by_cost: Vec<(usize, f64)> = Vec::new();
            for i in 0..pool.len() {
                if !fits(&pool[i], &w) {
                    continue;
                }
                by_perf.push((i, score_candidate(&perf, &pool, i, &w, 1.0).unwrap().unwrap()));
                by_cost.push((i, tco_assign(&pool, i, &w, 1.0).unwrap()));
            }
            by_perf.sort_by(|a, b| a.1.total_cmp(&b.1));
            by_cost.sort_by(|a, b| a.1.total_cmp(&b.1));
            let order_perf: Vec<usize> = by_perf.iter().map(|x| x.0).collect();
            let order_cost: Vec<usize> = by_cost.iter().map(|x| x.0).collect();
            assert_eq!(order_perf, order_cost);
        }
    }

    #[test]
    fn space_only_weights_pick_highest_mean_utilization() {
        let mut pool = symmetric_pool();
        pool[1].spec.capacity_space = 400.0; // smaller disk: bigger mean bump
        let w = WorkloadProfile { working_set: 100.0, ..workload("c", 5.0, 0.5) };
        let perf = PolicySpec::perf(PerfWeights::from_profile([0.0, 1.0, 0.0, 0.0, 0.0]));
        let d = allocate_online(&perf, &pool, &w, 1.0).unwrap();
        assert_eq!(d.disk.as_deref(), Some("d1"));
    }

    #[test]
    fn scaling_perf_weights_preserves_ranking() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let pool = random_pool(&mut rng, 5, 10);
            let w = workload("new", 8.0, 0.4);
            let profile = [
                rng.gen_range(0.2..5.0),
                rng.gen_range(0.2..5.0),
                rng.gen_range(0.2..5.0),
                rng.gen_range(0.2..5.0),
                rng.gen_range(0.2..5.0),
            ];
            let scale = rng.gen_range(0.1..20.0);
            let scaled = profile.map(|x| x * scale);
            let base = PolicySpec::perf(PerfWeights::from_profile(profile));
            let times = PolicySpec::perf(PerfWeights::from_profile(scaled));
            let a = allocate_online(&base, &pool, &w, 1.0).unwrap();
            let b = allocate_online(&times, &pool, &w, 1.0).unwrap();
            assert_eq!(a.disk_index, b.disk_index);
            let rank = |d: &AllocationDecision| {
                let mut v = d.candidate_scores.clone();
                v.sort_by(|x, y| x.1.total_cmp(&y.1));
                v.into_iter().map(|x| x.0).collect::<Vec<_>>()
            };
            assert_eq!(rank(&a), rank(&b));
        }
    }

    #[test]
    fn perf_thresholds_mark_candidates_infeasible() {
        let pool = symmetric_pool();
        let w = workload("c", 5.0, 0.7);
        let mut policy = PolicySpec::perf(PerfWeights::from_profile([1.0, 0.0, 0.0, 0.0, 0.0]));
        // An absurdly tight cost bound rejects every candidate.
        policy.thresholds.cost = 1e-12;
        let d = allocate_online(&policy, &pool, &w, 1.0).unwrap();
        assert!(d.rejected());
        assert!(d.candidate_scores.is_empty());

        // A generous bound admits them again.
        policy.thresholds.cost = f64::INFINITY;
        let d = allocate_online(&policy, &pool, &w, 1.0).unwrap();
        assert!(!d.rejected());
        assert_eq!(d.candidate_scores.len(), 2);
    }

    #[test]
    fn policy_spec_validation() {
        assert!(PolicySpec::new(PolicyKind::MinTcoV3).validate().is_ok());
        let mut bad = PolicySpec::new(PolicyKind::MinTcoPerf);
        assert!(bad.validate().is_err());
        bad.weights = Some(PerfWeights::from_profile([5.0, 1.0, 1.0, 3.0, 3.0]));
        assert!(bad.validate().is_ok());
    }
}
