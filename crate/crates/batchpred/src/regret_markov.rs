//! Batch regret for first-order Markov sources.
//!
//! The regret of a chain-rule predictor p1_hat(y_1) * phat(y_2..ell | y_1)
//! splits exactly into an initial-distribution term R1 and a transition
//! term RT. Small instances are evaluated by full enumeration; larger ones
//! by Monte Carlo over training sets, with the inner expectation over the
//! test batch taken exactly whenever feasible.

use crate::predictors::{
    markov_initial_prob, markov_transition_only_logprob, markov_transitions_seq_logprob,
    BetaParam, InitialEstimator, PredictorFamily, PredictorSpec,
};
use crate::regret_memoryless::{RegretError, RegretEstimate, RegretMethod};
use crate::rng::{derive_seed, CounterRng};
use crate::sources::{
    coordinate_marginal, extract_counts, sample_markov, ExperimentShape, MarkovParam,
    SufficientCounts, TrainingSet,
};
use rayon::prelude::*;
use serde::Serialize;

/// Enumeration budget for the Markov brute-force oracle: n*ell + ell bits.
pub const MARKOV_BRUTE_FORCE_BUDGET: u64 = 20;
/// Largest ell for which the inner expectation over the test batch is
/// computed by full 2^ell enumeration.
pub const EXACT_INNER_MAX_ELL: u64 = 16;
/// Test-batch samples per replica when ell is beyond the enumeration limit.
const NESTED_INNER_SAMPLES: u64 = 256;

/// Markov batch regret split into its initial and transition components.
/// Under exact evaluation, total = initial + transition identically.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecomposedRegret {
    pub total: RegretEstimate,
    pub initial: RegretEstimate,
    pub transition: RegretEstimate,
}

fn markov_spec_parts(
    spec: &PredictorSpec,
) -> Result<(PredictorFamily, BetaParam, InitialEstimator), RegretError> {
    match spec.family() {
        PredictorFamily::MarkovComposite | PredictorFamily::MarkovTransitionOnly => Ok((
            spec.family(),
            spec.beta(),
            spec.initial_estimator().expect("markov spec carries an estimator"),
        )),
        other => Err(RegretError::UnsupportedPredictor(other)),
    }
}

/// ln p_theta(batch) under the Markov source.
fn markov_batch_logprob(param: &MarkovParam, batch: &[u8]) -> f64 {
    let mut lp = if batch[0] == 1 { param.p1().ln() } else { (1.0 - param.p1()).ln() };
    for w in batch.windows(2) {
        let p_one = param.next_prob_one(w[0]);
        lp += if w[1] == 1 { p_one.ln() } else { (1.0 - p_one).ln() };
    }
    lp
}

fn bits_to_batch(bits: u64, ell: u64) -> Vec<u8> {
    (0..ell).map(|i| ((bits >> i) & 1) as u8).collect()
}

/// Exact initial-distribution regret contribution for a fixed training set:
/// sum_{y1} p1(y1) ln(p1(y1) / p1_hat(y1)), with 0 ln 0 = 0.
fn initial_regret_given_counts(
    param: &MarkovParam,
    counts: &SufficientCounts,
    beta: BetaParam,
    estimator: InitialEstimator,
) -> Result<f64, RegretError> {
    let p1_hat = markov_initial_prob(counts, beta, estimator)
        .map_err(|e| RegretError::Precondition(e.to_string()))?;
    let p1 = param.p1();
    let mut r = 0.0;
    if p1 > 0.0 {
        r += p1 * (p1 / p1_hat).ln();
    }
    if p1 < 1.0 {
        r += (1.0 - p1) * ((1.0 - p1) / (1.0 - p1_hat)).ln();
    }
    Ok(r)
}

/// ln phat(y_2..ell | y_1) for the chosen family, given training counts.
fn transition_logprob(
    family: PredictorFamily,
    counts: &SufficientCounts,
    y: &[u8],
    beta: BetaParam,
) -> f64 {
    match family {
        PredictorFamily::MarkovComposite => markov_transitions_seq_logprob(counts, y, beta),
        PredictorFamily::MarkovTransitionOnly => {
            if y.len() < 2 {
                0.0
            } else {
                markov_transition_only_logprob(counts, y, beta).expect("ell >= 2")
            }
        }
        _ => unreachable!(),
    }
}

/// Exact transition regret for a fixed training set, by enumeration over
/// all test batches:
/// sum_y p(y) ln( p(y_2..ell | y_1) / phat(y_2..ell | x, y_1) ).
fn transition_regret_enumerated(
    param: &MarkovParam,
    counts: &SufficientCounts,
    ell: u64,
    family: PredictorFamily,
    beta: BetaParam,
) -> f64 {
    let mut r = 0.0;
    for bits in 0..(1u64 << ell) {
        let y = bits_to_batch(bits, ell);
        let lpy = markov_batch_logprob(param, &y);
        if lpy == f64::NEG_INFINITY {
            continue;
        }
        let lp1 = if y[0] == 1 { param.p1().ln() } else { (1.0 - param.p1()).ln() };
        let true_trans = lpy - lp1;
        r += lpy.exp() * (true_trans - transition_logprob(family, counts, &y, beta));
    }
    r
}

/// Exact transition regret of the transition-only predictor for a fixed
/// training set, via linearity of the log-loss in the test transition
/// counts: RT(x) = sum_{hk} E[L_hk] ln( p(k|h) / phat_hk ), where
/// E[L_hk] = sum_j Pr(Y_j = h) p(k|h) from the coordinate marginals.
/// Exact for any ell, in O(ell) time.
pub fn transition_only_regret_given_counts(
    param: &MarkovParam,
    counts: &SufficientCounts,
    ell: u64,
    beta: BetaParam,
) -> Result<f64, RegretError> {
    let b = beta.value();
    // Expected number of test transitions leaving each state.
    let mut e_h = [0.0f64; 2];
    for j in 1..ell {
        let m = coordinate_marginal(param, j)
            .map_err(|e| RegretError::Precondition(e.to_string()))?;
        e_h[1] += m;
        e_h[0] += 1.0 - m;
    }
    let trans = [[1.0 - param.p(), param.p()], [param.q(), 1.0 - param.q()]];
    let mut r = 0.0;
    for h in 0..2 {
        for k in 0..2 {
            let pk = trans[h][k];
            if pk == 0.0 {
                continue;
            }
            let phat = (counts.t_hk[h][k] as f64 + b) / (counts.t_h[h] as f64 + 2.0 * b);
            r += e_h[h] * pk * (pk / phat).ln();
        }
    }
    Ok(r)
}

/// Exact Markov batch regret by full enumeration over training sets and
/// test batches, decomposed into R1 + RT via the chain rule.
pub fn markov_regret_brute_force(
    param: &MarkovParam,
    shape: &ExperimentShape,
    spec: &PredictorSpec,
) -> Result<DecomposedRegret, RegretError> {
    let (family, beta, estimator) = markov_spec_parts(spec)?;
    let (n, ell, t) = (shape.n(), shape.ell(), shape.t());
    if t + ell > MARKOV_BRUTE_FORCE_BUDGET {
        return Err(RegretError::SummandBudget {
            required: t + ell,
            budget: MARKOV_BRUTE_FORCE_BUDGET,
        });
    }
    let mut r1_total = 0.0;
    let mut rt_total = 0.0;
    for xbits in 0..(1u64 << t) {
        let batches: Vec<Vec<u8>> =
            (0..n).map(|i| bits_to_batch(xbits >> (i * ell), ell)).collect();
        let lpx: f64 = batches.iter().map(|b| markov_batch_logprob(param, b)).sum();
        if lpx == f64::NEG_INFINITY {
            continue;
        }
        let px = lpx.exp();
        let ts = TrainingSet::new(batches, ell).expect("uniform batch lengths");
        let counts = extract_counts(&ts);
        r1_total += px * initial_regret_given_counts(param, &counts, beta, estimator)?;
        rt_total += px * transition_regret_enumerated(param, &counts, ell, family, beta);
    }
    Ok(DecomposedRegret {
        total: RegretEstimate::exact(r1_total + rt_total, RegretMethod::BruteForce),
        initial: RegretEstimate::exact(r1_total, RegretMethod::BruteForce),
        transition: RegretEstimate::exact(rt_total, RegretMethod::BruteForce),
    })
}

struct ReplicaOutcome {
    r1: f64,
    rt: f64,
}

fn mc_replica(
    param: &MarkovParam,
    shape: &ExperimentShape,
    family: PredictorFamily,
    beta: BetaParam,
    estimator: InitialEstimator,
    replica_seed: u64,
) -> Result<ReplicaOutcome, RegretError> {
    let ts = sample_markov(param, shape, replica_seed);
    let counts = extract_counts(&ts);
    let r1 = initial_regret_given_counts(param, &counts, beta, estimator)?;
    let ell = shape.ell();
    let rt = if ell <= EXACT_INNER_MAX_ELL {
        transition_regret_enumerated(param, &counts, ell, family, beta)
    } else {
        // Nested sampling of the test batch.
        let mut rng = CounterRng::new(derive_seed(replica_seed, u64::MAX));
        let mut acc = 0.0;
        for _ in 0..NESTED_INNER_SAMPLES {
            let y = crate::sources::sample_markov_batch(param, ell, &mut rng);
            let lpy = markov_batch_logprob(param, &y);
            let lp1 = if y[0] == 1 { param.p1().ln() } else { (1.0 - param.p1()).ln() };
            acc += (lpy - lp1) - transition_logprob(family, &counts, &y, beta);
        }
        acc / NESTED_INNER_SAMPLES as f64
    };
    Ok(ReplicaOutcome { r1, rt })
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo Markov regret: one training-set sample per replica, with the
/// inner expectation over the test batch exact for ell <= 16 and sampled
/// otherwise. Deterministic given the seed and independent of the
/// parallelism degree (per-replica substreams).
pub fn markov_regret_mc(
    param: &MarkovParam,
    shape: &ExperimentShape,
    spec: &PredictorSpec,
    replicas: u64,
    seed: u64,
) -> Result<DecomposedRegret, RegretError> {
    let (family, beta, estimator) = markov_spec_parts(spec)?;
    if replicas < 100 {
        return Err(RegretError::Precondition("replicas must be >= 100".into()));
    }
    let outcomes: Vec<ReplicaOutcome> = (0..replicas)
        .into_par_iter()
        .map(|i| mc_replica(param, shape, family, beta, estimator, derive_seed(seed, i)))
        .collect::<Result<_, _>>()?;
    let r1: Vec<f64> = outcomes.iter().map(|o| o.r1).collect();
    let rt: Vec<f64> = outcomes.iter().map(|o| o.rt).collect();
    let tot: Vec<f64> = outcomes.iter().map(|o| o.r1 + o.rt).collect();
    let (m1, s1) = mean_se(&r1);
    let (mt, st) = mean_se(&rt);
    let (mtot, stot) = mean_se(&tot);
    let est = |value, std_error| RegretEstimate {
        value,
        method: RegretMethod::MonteCarlo,
        std_error,
    };
    Ok(DecomposedRegret {
        total: est(mtot, stot),
        initial: est(m1, s1),
        transition: est(mt, st),
    })
}

/// One row of the initial-distribution regret sweep.
#[derive(Debug, Clone, Serialize)]
pub struct Theorem3Row {
    pub n: u64,
    pub ell: u64,
    pub estimator: InitialEstimator,
    /// Parameter attaining the max.
    pub argmax_p1: f64,
    pub max_r1: f64,
    pub n_times_r1: f64,
    pub std_error: f64,
}

/// Monte Carlo sweep of the initial-distribution regret R1, maximized over
/// a parameter grid. Only the first test symbol matters for R1, so the
/// inner expectation is exact by construction.
pub fn theorem3_initial_sweep(
    param_grid: &[MarkovParam],
    n_values: &[u64],
    ell_rule: EllRuleRef<'_>,
    estimator: InitialEstimator,
    beta: BetaParam,
    replicas: u64,
    seed: u64,
) -> Result<Vec<Theorem3Row>, RegretError> {
    if param_grid.is_empty() {
        return Err(RegretError::Precondition("parameter grid must be nonempty".into()));
    }
    if replicas < 100 {
        return Err(RegretError::Precondition("replicas must be >= 100".into()));
    }
    let mut rows = Vec::new();
    for (ni, &n) in n_values.iter().enumerate() {
        let ell = ell_rule.0.ell_of(n);
        let shape = ExperimentShape::new(n, ell)
            .map_err(|e| RegretError::Precondition(e.to_string()))?;
        let mut best: Option<(f64, f64, f64)> = None; // (r1, se, p1)
        for (pi, param) in param_grid.iter().enumerate() {
            let point_seed = derive_seed(seed, (ni as u64) << 32 | pi as u64);
            let values: Vec<f64> = (0..replicas)
                .into_par_iter()
                .map(|rep| {
                    let ts = sample_markov(param, &shape, derive_seed(point_seed, rep));
                    let counts = extract_counts(&ts);
                    initial_regret_given_counts(param, &counts, beta, estimator)
                })
                .collect::<Result<_, _>>()?;
            let (mean, se) = mean_se(&values);
            if best.map(|(b, _, _)| mean > b).unwrap_or(true) {
                best = Some((mean, se, param.p1()));
            }
        }
        let (max_r1, se, argmax_p1) = best.expect("nonempty grid");
        rows.push(Theorem3Row {
            n,
            ell,
            estimator,
            argmax_p1,
            max_r1,
            n_times_r1: n as f64 * max_r1,
            std_error: se,
        });
    }
    Ok(rows)
}

/// Newtype so the sweep signatures read as taking an ell(n) mapping.
pub struct EllRuleRef<'a>(pub &'a crate::sources::EllRule);

/// One row of the transition regret sweep.
#[derive(Debug, Clone, Serialize)]
pub struct Theorem5Row {
    pub n: u64,
    pub ell: u64,
    pub delta: f64,
    pub argmax_p: f64,
    pub argmax_q: f64,
    pub max_rt: f64,
    pub n_times_rt: f64,
    pub std_error: f64,
}

/// Grid step over (p, q) in [delta, 1-delta]^2.
const PQ_GRID_STEP: f64 = 0.05;

/// Monte Carlo sweep of the transition regret RT for the transition-only
/// predictor, maximized over the (p, q) grid at fixed p1 = 1/2. The inner
/// expectation over the test batch is exact (linearity in the test
/// transition counts), so the only Monte Carlo noise is over training sets.
pub fn theorem5_transition_sweep(
    delta: f64,
    n_values: &[u64],
    ell_rule: EllRuleRef<'_>,
    beta: BetaParam,
    replicas: u64,
    seed: u64,
) -> Result<Vec<Theorem5Row>, RegretError> {
    if !(0.0 < delta && delta < 0.5) {
        return Err(RegretError::Precondition("delta must lie in (0, 1/2)".into()));
    }
    if replicas < 100 {
        return Err(RegretError::Precondition("replicas must be >= 100".into()));
    }
    let steps = ((1.0 - 2.0 * delta) / PQ_GRID_STEP).round() as usize;
    let grid: Vec<(f64, f64)> = (0..=steps)
        .flat_map(|i| {
            (0..=steps).map(move |j| {
                (delta + i as f64 * PQ_GRID_STEP, delta + j as f64 * PQ_GRID_STEP)
            })
        })
        .collect();
    let mut rows = Vec::new();
    for (ni, &n) in n_values.iter().enumerate() {
        let ell = ell_rule.0.ell_of(n);
        let shape = ExperimentShape::new(n, ell)
            .map_err(|e| RegretError::Precondition(e.to_string()))?;
        let point_results: Vec<(f64, f64, f64, f64)> = grid
            .par_iter()
            .enumerate()
            .map(|(gi, &(p, q))| {
                let param = MarkovParam::new(0.5, p, q)
                    .map_err(|e| RegretError::Precondition(e.to_string()))?;
                let point_seed = derive_seed(seed, (ni as u64) << 32 | gi as u64);
                let mut values = Vec::with_capacity(replicas as usize);
                for rep in 0..replicas {
                    let ts = sample_markov(&param, &shape, derive_seed(point_seed, rep));
                    let counts = extract_counts(&ts);
                    values.push(transition_only_regret_given_counts(
                        &param, &counts, ell, beta,
                    )?);
                }
                let (mean, se) = mean_se(&values);
                Ok((mean, se, p, q))
            })
            .collect::<Result<_, RegretError>>()?;
        let &(max_rt, se, p, q) = point_results
            .iter()
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .expect("nonempty grid");
        rows.push(Theorem5Row {
            n,
            ell,
            delta,
            argmax_p: p,
            argmax_q: q,
            max_rt,
            n_times_rt: n as f64 * max_rt,
            std_error: se,
        });
    }
    Ok(rows)
}
