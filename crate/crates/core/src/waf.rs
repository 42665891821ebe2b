//! Write amplification factor (WAF) model.
//!
//! A disk's WAF is modeled as a piecewise function of the write sequential
//! ratio `S`: a flat linear stage `alpha*S + beta` up to a turning point,
//! then a decaying quadratic stage `eta*S^2 + mu*S + gamma`. The two stages
//! must agree at the turning point, and the curve must stay at or above 1
//! everywhere (a device cannot write less than the host asked for).
//!
//! Models are stored and evaluated in raw WAF units (>= 1); dividing by the
//! curve maximum for plotting is a presentation concern, see
//! [`WafModel::eval_normalized`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for the continuity constraint at the turning point.
pub const CONTINUITY_TOL: f64 = 1e-9;

/// Slack below 1.0 tolerated when checking "WAF >= 1", to absorb rounding.
const UNITY_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum WafError {
    #[error("sequential ratio {0} outside [0, 1]")]
    Domain(f64),
    #[error("model evaluates to {value} < 1 at S = {s}; ill-formed model")]
    BelowUnity { s: f64, value: f64 },
    #[error("branches disagree by {0} at the turning point")]
    Discontinuous(f64),
    #[error("model amplifies fully sequential traffic more than fully random")]
    SequentialExceedsRandom,
    #[error("turning candidate {0} must lie strictly inside (0, 1)")]
    BadCandidate(f64),
    #[error(
        "not enough samples around any turning candidate: best split had {linear} at/below \
         and {quadratic} above (need 2 and 3)"
    )]
    InsufficientData { linear: usize, quadratic: usize },
    #[error("every turning candidate produced a WAF below 1 somewhere")]
    InfeasibleFit,
    #[error("quadratic branch is not monotone decreasing past the turning point")]
    NonMonotoneTail,
    #[error("sample has {0}: outside valid range")]
    BadSample(String),
}

/// Piecewise WAF curve: linear up to `turning_point`, quadratic after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WafModel {
    /// Slope of the linear stage.
    pub alpha: f64,
    /// Intercept of the linear stage (raw WAF at S = 0).
    pub beta: f64,
    /// Quadratic coefficient of the decay stage.
    pub eta: f64,
    /// Linear coefficient of the decay stage.
    pub mu: f64,
    /// Intercept of the decay stage.
    pub gamma: f64,
    /// Boundary between the two stages, in (0, 1).
    pub turning_point: f64,
}

impl WafModel {
    /// Builds the flat-then-quadratic family used throughout the tests and
    /// synthetic pool configurations: WAF is a constant `beta` up to
    /// `turning_point`, then decays smoothly (zero slope at the junction) to
    /// `end_value` at S = 1. Concave whenever `end_value < beta`.
    pub fn flat_then_quadratic(beta: f64, turning_point: f64, end_value: f64) -> Self {
        let e = turning_point;
        let eta = (end_value - beta) / ((1.0 - e) * (1.0 - e));
        let mu = -2.0 * eta * e;
        let gamma = beta + eta * e * e;
        WafModel { alpha: 0.0, beta, eta, mu, gamma, turning_point: e }
    }

    /// Raw piecewise arithmetic, no domain or range checks.
    pub fn raw_value(&self, s: f64) -> f64 {
        if s <= self.turning_point {
            self.alpha * s + self.beta
        } else {
            self.eta * s * s + self.mu * s + self.gamma
        }
    }

    /// Evaluates the WAF at sequential ratio `s`.
    ///
    /// Rejects `s` outside [0, 1], and rejects results below 1, which signal
    /// an ill-formed model rather than a bad argument.
    pub fn eval(&self, s: f64) -> Result<f64, WafError> {
        if !(0.0..=1.0).contains(&s) || s.is_nan() {
            return Err(WafError::Domain(s));
        }
        let value = self.raw_value(s);
        if value < 1.0 - UNITY_SLACK {
            return Err(WafError::BelowUnity { s, value });
        }
        Ok(value)
    }

    /// Value divided by the curve maximum, for plotting in [0, 1].
    pub fn eval_normalized(&self, s: f64) -> Result<f64, WafError> {
        Ok(self.eval(s)? / self.max_value())
    }

    /// Exact minimum of the curve over [0, 1] (piecewise extrema are closed form).
    pub fn min_value(&self) -> f64 {
        self.extrema().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Exact maximum of the curve over [0, 1].
    pub fn max_value(&self) -> f64 {
        self.extrema().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    fn extrema(&self) -> Vec<f64> {
        let e = self.turning_point;
        let mut values = vec![
            self.raw_value(0.0),
            self.raw_value(e),
            self.raw_value(1.0),
            // Quadratic value approached from the right of the junction.
            self.eta * e * e + self.mu * e + self.gamma,
        ];
        if self.eta != 0.0 {
            let vertex = -self.mu / (2.0 * self.eta);
            if vertex > e && vertex < 1.0 {
                values.push(self.raw_value(vertex));
            }
        }
        values
    }

    /// Checks the structural invariants: continuity at the turning point,
    /// WAF >= 1 everywhere, and no extra amplification for sequential traffic.
    pub fn validate(&self) -> Result<(), WafError> {
        let e = self.turning_point;
        let left = self.alpha * e + self.beta;
        let right = self.eta * e * e + self.mu * e + self.gamma;
        let gap = (left - right).abs();
        if gap > CONTINUITY_TOL {
            return Err(WafError::Discontinuous(gap));
        }
        if self.min_value() < 1.0 - UNITY_SLACK {
            return Err(WafError::BelowUnity { s: f64::NAN, value: self.min_value() });
        }
        if self.raw_value(1.0) > self.raw_value(0.0) + UNITY_SLACK {
            return Err(WafError::SequentialExceedsRandom);
        }
        Ok(())
    }

    /// True when the quadratic branch never increases on (turning_point, 1].
    pub fn tail_is_monotone_decreasing(&self) -> bool {
        // Derivative 2*eta*s + mu is linear in s: checking both ends suffices.
        let slack = 1e-9;
        2.0 * self.eta * self.turning_point + self.mu <= slack
            && 2.0 * self.eta + self.mu <= slack
    }
}

/// One measured (sequential ratio, raw WAF) point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WafSample {
    pub seq_ratio: f64,
    pub waf: f64,
}

impl WafSample {
    pub fn new(seq_ratio: f64, waf: f64) -> Result<Self, WafError> {
        if !(0.0..=1.0).contains(&seq_ratio) {
            return Err(WafError::BadSample(format!("seq_ratio {seq_ratio}")));
        }
        if waf < 1.0 {
            return Err(WafError::BadSample(format!("waf {waf} < 1")));
        }
        Ok(WafSample { seq_ratio, waf })
    }
}

/// Fit diagnostics for one turning-point candidate.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateFit {
    pub turning_point: f64,
    /// Total squared residual; `None` when the candidate was infeasible.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitWarning {
    /// The unconstrained intercept dipped below 1 and was clamped.
    BetaClamped,
    /// The fitted quadratic branch is not monotone decreasing.
    NonMonotoneTail,
}

/// Result of [`fit`]: the winning model plus per-candidate diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct FitOutcome {
    pub model: WafModel,
    pub residual: f64,
    pub candidates: Vec<CandidateFit>,
    pub warnings: Vec<FitWarning>,
}

/// Default turning-point search grid: 0.30, 0.35, ..., 0.70.
pub fn default_turning_grid() -> Vec<f64> {
    (0..=8).map(|i| 0.30 + 0.05 * i as f64).collect()
}

/// Fits the piecewise model to measured samples by grid search over turning
/// candidates. For each candidate the continuity constraint is imposed by
/// substitution: `gamma` is eliminated, leaving an ordinary least-squares
/// problem in (alpha, beta, eta, mu). The candidate with the smallest total
/// squared residual wins.
pub fn fit(samples: &[WafSample], candidates: &[f64]) -> Result<FitOutcome, WafError> {
    fit_inner(samples, candidates, false)
}

/// As [`fit`], but a non-monotone quadratic branch rejects the model instead
/// of producing a warning.
pub fn fit_strict(samples: &[WafSample], candidates: &[f64]) -> Result<FitOutcome, WafError> {
    fit_inner(samples, candidates, true)
}

fn fit_inner(
    samples: &[WafSample],
    candidates: &[f64],
    strict: bool,
) -> Result<FitOutcome, WafError> {
    for &c in candidates {
        if !(c > 0.0 && c < 1.0) {
            return Err(WafError::BadCandidate(c));
        }
    }
    let mut best: Option<(FitOutcome, f64)> = None;
    let mut diagnostics = Vec::with_capacity(candidates.len());
    let mut best_split = (0usize, 0usize);
    let mut any_enough_data = false;

    for &eps in candidates {
        let linear: Vec<&WafSample> = samples.iter().filter(|p| p.seq_ratio <= eps).collect();
        let quad: Vec<&WafSample> = samples.iter().filter(|p| p.seq_ratio > eps).collect();
        let (nl, nq) = (distinct_ratios(&linear), distinct_ratios(&quad));
        if nl + nq > best_split.0 + best_split.1 {
            best_split = (nl, nq);
        }
        // Free parameters per side: 2 on the linear side, 3 on the quadratic.
        if nl < 2 || nq < 3 {
            diagnostics.push(CandidateFit { turning_point: eps, residual: None });
            continue;
        }
        any_enough_data = true;

        let (model, mut warnings) = match solve_candidate(samples, eps) {
            Some(m) => m,
            None => {
                diagnostics.push(CandidateFit { turning_point: eps, residual: None });
                continue;
            }
        };
        if model.validate().is_err() {
            diagnostics.push(CandidateFit { turning_point: eps, residual: None });
            continue;
        }
        if !model.tail_is_monotone_decreasing() {
            if strict {
                diagnostics.push(CandidateFit { turning_point: eps, residual: None });
                continue;
            }
            warnings.push(FitWarning::NonMonotoneTail);
        }
        let residual: f64 = samples
            .iter()
            .map(|p| {
                let r = model.raw_value(p.seq_ratio) - p.waf;
                r * r
            })
            .sum();
        diagnostics.push(CandidateFit { turning_point: eps, residual: Some(residual) });
        let better = match &best {
            None => true,
            Some((_, r)) => residual < *r,
        };
        if better {
            best = Some((
                FitOutcome { model, residual, candidates: Vec::new(), warnings },
                residual,
            ));
        }
    }

    match best {
        Some((mut outcome, _)) => {
            outcome.candidates = diagnostics;
            Ok(outcome)
        }
        None if !any_enough_data => Err(WafError::InsufficientData {
            linear: best_split.0,
            quadratic: best_split.1,
        }),
        None if strict => Err(WafError::NonMonotoneTail),
        None => Err(WafError::InfeasibleFit),
    }
}

fn distinct_ratios(points: &[&WafSample]) -> usize {
    let mut seen: Vec<f64> = Vec::new();
    for p in points {
        if !seen.iter().any(|s| (s - p.seq_ratio).abs() < 1e-12) {
            seen.push(p.seq_ratio);
        }
    }
    seen.len()
}

/// Solves the continuity-constrained least squares for one candidate.
///
/// With gamma eliminated via gamma = alpha*e + beta - eta*e^2 - mu*e, the
/// quadratic branch becomes alpha*e + beta + eta*(s^2 - e^2) + mu*(s - e),
/// so both branches are linear in (alpha, beta, eta, mu).
fn solve_candidate(samples: &[WafSample], eps: f64) -> Option<(WafModel, Vec<FitWarning>)> {
    let n = samples.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, 4);
    let mut b = nalgebra::DVector::<f64>::zeros(n);
    for (i, p) in samples.iter().enumerate() {
        let s = p.seq_ratio;
        if s <= eps {
            a[(i, 0)] = s;
            a[(i, 1)] = 1.0;
        } else {
            a[(i, 0)] = eps;
            a[(i, 1)] = 1.0;
            a[(i, 2)] = s * s - eps * eps;
            a[(i, 3)] = s - eps;
        }
        b[i] = p.waf;
    }
    let svd = a.svd(true, true);
    let x = svd.solve(&b, 1e-12).ok()?;
    let (alpha, mut beta, eta, mu) = (x[0], x[1], x[2], x[3]);
    let mut warnings = Vec::new();
    if beta < 1.0 {
        beta = 1.0;
        warnings.push(FitWarning::BetaClamped);
    }
    let gamma = alpha * eps + beta - eta * eps * eps - mu * eps;
    Some((WafModel { alpha, beta, eta, mu, gamma, turning_point: eps }, warnings))
}

/// Reads a `seq_ratio,waf` CSV sample file.
pub fn read_samples_csv<R: std::io::Read>(reader: R) -> Result<Vec<WafSample>, WafError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = Vec::new();
    for record in rdr.deserialize::<WafSample>() {
        let rec = record.map_err(|e| WafError::BadSample(e.to_string()))?;
        out.push(WafSample::new(rec.seq_ratio, rec.waf)?);
    }
    Ok(out)
}
