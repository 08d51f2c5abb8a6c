//! Add-constant predictors for batch prediction.
//!
//! Every predictor is a pure function of the training sufficient counts and
//! the test batch. Whole-batch probabilities are returned as natural-log
//! values.

use crate::sources::SufficientCounts;
use crate::special::lgamma;
use serde::Serialize;
use thiserror::Error;

/// Krichevsky's constant: the optimal add-constant for next-symbol (ell = 1)
/// prediction, to the published precision.
pub const BETA_0: f64 = 0.50922;

#[derive(Debug, Error, PartialEq)]
pub enum PredictorError {
    #[error("beta must lie in [0.5, 1] (use with_override for exploration), got {0}")]
    BetaOutOfRange(f64),
    #[error("beta must be positive and finite, got {0}")]
    BetaInvalid(f64),
    #[error("{0}")]
    Precondition(&'static str),
}

/// The add-constant parameter. The validity window [1/2, 1] matches the
/// range studied for these predictors; values outside it require an
/// explicit override.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaParam(f64);

impl BetaParam {
    pub fn new(beta: f64) -> Result<Self, PredictorError> {
        if !(0.5..=1.0).contains(&beta) {
            return Err(PredictorError::BetaOutOfRange(beta));
        }
        Ok(BetaParam(beta))
    }

    /// Accept any positive beta, bypassing the [1/2, 1] window.
    pub fn with_override(beta: f64) -> Result<Self, PredictorError> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(PredictorError::BetaInvalid(beta));
        }
        Ok(BetaParam(beta))
    }

    pub const fn half() -> Self {
        BetaParam(0.5)
    }

    pub fn krichevsky() -> Self {
        BetaParam(BETA_0)
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Estimator for the initial (first-symbol) distribution of a Markov
/// predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialEstimator {
    /// Add-beta rule on the first coordinate of each training batch.
    FirstCoordinate,
    /// Average of the per-coordinate inversions of
    /// Pr(X_j = 1) = (p1 - pi1)(1-p-q)^{j-1} + pi1.
    LeakageAveraged,
}

impl std::fmt::Display for InitialEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialEstimator::FirstCoordinate => write!(f, "first-coordinate"),
            InitialEstimator::LeakageAveraged => write!(f, "leakage-averaged"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorFamily {
    AddBetaBatch,
    NaiveIgnorePast,
    NaiveTrainOnly,
    MarkovComposite,
    MarkovTransitionOnly,
}

impl std::fmt::Display for PredictorFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PredictorFamily::AddBetaBatch => "add-beta-batch",
            PredictorFamily::NaiveIgnorePast => "naive-ignore-past",
            PredictorFamily::NaiveTrainOnly => "naive-train-only",
            PredictorFamily::MarkovComposite => "markov-composite",
            PredictorFamily::MarkovTransitionOnly => "markov-transition-only",
        };
        write!(f, "{s}")
    }
}

/// An enumerable predictor description, so evaluators can be generic over
/// predictors. Markov families carry an initial estimator; memoryless
/// families must not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictorSpec {
    family: PredictorFamily,
    beta: BetaParam,
    initial_estimator: Option<InitialEstimator>,
}

impl PredictorSpec {
    pub fn memoryless(family: PredictorFamily, beta: BetaParam) -> Result<Self, PredictorError> {
        match family {
            PredictorFamily::AddBetaBatch
            | PredictorFamily::NaiveIgnorePast
            | PredictorFamily::NaiveTrainOnly => Ok(PredictorSpec {
                family,
                beta,
                initial_estimator: None,
            }),
            _ => Err(PredictorError::Precondition(
                "memoryless spec requires a memoryless family",
            )),
        }
    }

    pub fn markov(
        family: PredictorFamily,
        beta: BetaParam,
        initial_estimator: InitialEstimator,
    ) -> Result<Self, PredictorError> {
        match family {
            PredictorFamily::MarkovComposite | PredictorFamily::MarkovTransitionOnly => {
                Ok(PredictorSpec {
                    family,
                    beta,
                    initial_estimator: Some(initial_estimator),
                })
            }
            _ => Err(PredictorError::Precondition(
                "markov spec requires a markov family",
            )),
        }
    }

    pub fn add_beta_batch(beta: BetaParam) -> Self {
        PredictorSpec::memoryless(PredictorFamily::AddBetaBatch, beta).unwrap()
    }

    pub fn family(&self) -> PredictorFamily {
        self.family
    }

    pub fn beta(&self) -> BetaParam {
        self.beta
    }

    pub fn initial_estimator(&self) -> Option<InitialEstimator> {
        self.initial_estimator
    }
}

fn ones(y: &[u8]) -> u64 {
    y.iter().map(|&b| b as u64).sum()
}

/// Next-symbol add-beta rule on raw counts:
/// (t1 + prefix_ones + beta) / (t + prefix_len + 2 beta).
pub fn add_beta_next_raw(
    t1: u64,
    t: u64,
    prefix_ones: u64,
    prefix_len: u64,
    beta: BetaParam,
) -> f64 {
    debug_assert!(prefix_ones <= prefix_len && t1 <= t);
    let b = beta.value();
    (t1 as f64 + prefix_ones as f64 + b) / (t as f64 + prefix_len as f64 + 2.0 * b)
}

/// Probability that the next test symbol is 1, given training counts and a
/// test prefix summarized by its length and number of ones.
pub fn add_beta_next(
    counts: &SufficientCounts,
    prefix_ones: u64,
    prefix_len: u64,
    beta: BetaParam,
) -> f64 {
    add_beta_next_raw(counts.t1, counts.t(), prefix_ones, prefix_len, beta)
}

/// Closed-form log-probability of a test batch with l1 ones and l0 zeros
/// under the add-beta batch predictor, given training counts (t1, t0):
///
/// ln Gamma(t1+l1+b) + ln Gamma(t0+l0+b) + ln Gamma(t+2b)
///   - ln Gamma(t1+b) - ln Gamma(t0+b) - ln Gamma(t+l+2b)
pub fn add_beta_logprob_counts(t1: u64, t0: u64, l1: u64, l0: u64, beta: BetaParam) -> f64 {
    let b = beta.value();
    let (t1, t0, l1, l0) = (t1 as f64, t0 as f64, l1 as f64, l0 as f64);
    let t = t1 + t0;
    let l = l1 + l0;
    lgamma(t1 + l1 + b) + lgamma(t0 + l0 + b) + lgamma(t + 2.0 * b)
        - lgamma(t1 + b)
        - lgamma(t0 + b)
        - lgamma(t + l + 2.0 * b)
}

/// Log-probability of the test batch `y` under the add-beta batch
/// predictor (the add-constant updated as test symbols are revealed).
/// Depends on `y` only through its number of ones.
pub fn add_beta_batch_logprob(counts: &SufficientCounts, y: &[u8], beta: BetaParam) -> f64 {
    let l1 = ones(y);
    let l0 = y.len() as u64 - l1;
    add_beta_logprob_counts(counts.t1, counts.t0, l1, l0, beta)
}

/// First naive predictor: add-beta on the test batch alone, ignoring the
/// training set.
pub fn naive_ignore_past_logprob(y: &[u8], beta: BetaParam) -> f64 {
    let l1 = ones(y);
    let l0 = y.len() as u64 - l1;
    add_beta_logprob_counts(0, 0, l1, l0, beta)
}

/// Second naive predictor on raw counts: the training-only product measure
/// ((t1+b)/(t+2b))^{l1} ((t0+b)/(t+2b))^{l0}, in log form.
pub fn naive_train_only_logprob_counts(t1: u64, t0: u64, l1: u64, l0: u64, beta: BetaParam) -> f64 {
    let b = beta.value();
    let t = (t1 + t0) as f64;
    let p1 = (t1 as f64 + b) / (t + 2.0 * b);
    let p0 = (t0 as f64 + b) / (t + 2.0 * b);
    l1 as f64 * p1.ln() + l0 as f64 * p0.ln()
}

/// Second naive predictor: uses only the training counts, never the
/// revealed test symbols.
pub fn naive_train_only_logprob(counts: &SufficientCounts, y: &[u8], beta: BetaParam) -> f64 {
    let l1 = ones(y);
    let l0 = y.len() as u64 - l1;
    naive_train_only_logprob_counts(counts.t1, counts.t0, l1, l0, beta)
}

// Leakage inversion is dropped for a coordinate when |1-p-q|^{j-1} falls
// below this threshold.
const LEAKAGE_CONDITION_MIN: f64 = 1e-3;
const INITIAL_PROB_CLAMP: f64 = 1e-6;

/// Estimated probability that the first test symbol is 1.
///
/// `FirstCoordinate` applies the add-beta rule to the first symbols of the
/// training batches. `LeakageAveraged` additionally inverts the coordinate
/// marginal Pr(X_j=1) = (p1 - pi1)(1-p-q)^{j-1} + pi1 at every coordinate,
/// with p and q estimated by add-1/2 on the transition counts, and averages
/// the per-coordinate estimates uniformly; coordinates where the geometric
/// factor is below 1e-3 are dropped, and the result is clamped to
/// [1e-6, 1 - 1e-6].
pub fn markov_initial_prob(
    counts: &SufficientCounts,
    beta: BetaParam,
    estimator: InitialEstimator,
) -> Result<f64, PredictorError> {
    if counts.n == 0 {
        return Err(PredictorError::Precondition(
            "initial estimator requires n >= 1",
        ));
    }
    let b = beta.value();
    let n = counts.n as f64;
    let first_coord = (counts.first_coord_ones as f64 + b) / (n + 2.0 * b);
    match estimator {
        InitialEstimator::FirstCoordinate => Ok(first_coord),
        InitialEstimator::LeakageAveraged => {
            if counts.ell < 2 {
                return Err(PredictorError::Precondition(
                    "leakage-averaged estimator requires ell >= 2",
                ));
            }
            let p_hat = (counts.t_hk[0][1] as f64 + 0.5) / (counts.t_h[0] as f64 + 1.0);
            let q_hat = (counts.t_hk[1][0] as f64 + 0.5) / (counts.t_h[1] as f64 + 1.0);
            let pi_hat = p_hat / (p_hat + q_hat);
            let r_hat = 1.0 - p_hat - q_hat;
            let mut sum = 0.0;
            let mut used = 0u64;
            for (idx, &c) in counts.coord_ones.iter().enumerate() {
                let factor = r_hat.powi(idx as i32);
                if factor.abs() < LEAKAGE_CONDITION_MIN {
                    continue;
                }
                let marginal = (c as f64 + b) / (n + 2.0 * b);
                sum += (marginal - pi_hat) / factor + pi_hat;
                used += 1;
            }
            if used == 0 {
                // Inversion ill-conditioned at every coordinate.
                return Ok(first_coord);
            }
            Ok((sum / used as f64).clamp(INITIAL_PROB_CLAMP, 1.0 - INITIAL_PROB_CLAMP))
        }
    }
}

/// Log-probability of `y` under the composite Markov predictor: the initial
/// estimator for y_1, then add-beta transition estimators updated as test
/// symbols are revealed.
pub fn markov_composite_logprob(
    counts: &SufficientCounts,
    y: &[u8],
    spec: &PredictorSpec,
) -> Result<f64, PredictorError> {
    let estimator = spec.initial_estimator.ok_or(PredictorError::Precondition(
        "composite predictor requires an initial estimator",
    ))?;
    if y.is_empty() {
        return Err(PredictorError::Precondition("test batch must be nonempty"));
    }
    let p1_hat = markov_initial_prob(counts, spec.beta, estimator)?;
    let mut lp = if y[0] == 1 { p1_hat.ln() } else { (1.0 - p1_hat).ln() };
    lp += markov_transitions_seq_logprob(counts, y, spec.beta);
    Ok(lp)
}

/// Log-probability of y_2..y_ell given y_1 under the within-test-updated
/// transition estimators (the transition part of the composite predictor).
pub fn markov_transitions_seq_logprob(
    counts: &SufficientCounts,
    y: &[u8],
    beta: BetaParam,
) -> f64 {
    let b = beta.value();
    let mut l_hk = [[0u64; 2]; 2];
    let mut l_h = [0u64; 2];
    let mut lp = 0.0;
    for w in y.windows(2) {
        let (h, k) = (w[0] as usize, w[1] as usize);
        let num = counts.t_hk[h][k] as f64 + l_hk[h][k] as f64 + b;
        let den = counts.t_h[h] as f64 + l_h[h] as f64 + 2.0 * b;
        lp += (num / den).ln();
        l_hk[h][k] += 1;
        l_h[h] += 1;
    }
    lp
}

/// Log-probability of y_2..y_ell given y_1 under the transition-only
/// predictor: a fixed product measure over the test transition counts with
/// no within-test updating,
/// prod_{hk} ((t_hk + b) / (t_h + 2b))^{l_hk}.
pub fn markov_transition_only_logprob(
    counts: &SufficientCounts,
    y: &[u8],
    beta: BetaParam,
) -> Result<f64, PredictorError> {
    if y.len() < 2 {
        return Err(PredictorError::Precondition(
            "transition-only predictor requires ell >= 2",
        ));
    }
    let b = beta.value();
    let mut lp = 0.0;
    for w in y.windows(2) {
        let (h, k) = (w[0] as usize, w[1] as usize);
        let num = counts.t_hk[h][k] as f64 + b;
        let den = counts.t_h[h] as f64 + 2.0 * b;
        lp += (num / den).ln();
    }
    Ok(lp)
}
