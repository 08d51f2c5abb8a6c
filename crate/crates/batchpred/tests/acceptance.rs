//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line.
//!
//! Criteria 3, 5 and 6 are trend/band checks anchored to the leading
//! constants of the asymptotic theory; exact o(.) remainders are not
//! assertable at desk scale.

use batchpred::predictors::{
    add_beta_logprob_counts, add_beta_next_raw, markov_composite_logprob, BetaParam,
    InitialEstimator, PredictorFamily, PredictorSpec, BETA_0,
};
use batchpred::regret_markov::{markov_regret_brute_force, theorem3_initial_sweep,
    theorem5_transition_sweep, EllRuleRef,
};
use batchpred::regret_memoryless::{
    regret_brute_force, regret_exact_double_sum, regret_exact_single_sum,
    theorem1_residual_sweep, theorem2_boundary_check,
};
use batchpred::sources::{
    extract_counts, EllRule, ExperimentShape, MarkovParam, MemorylessParam, ThetaRange,
    TrainingSet,
};
use batchpred::special::{log_binomial, log_gamma, log_gamma_ratio, stirling_correction};

fn report(criterion: u32, what: &str, pass: bool) {
    println!(
        "criterion {criterion} [{}]: {what}",
        if pass { "PASS" } else { "FAIL" }
    );
}

/// Criterion 1: brute-force, double-sum and single-sum evaluations of the
/// add-beta batch regret agree within 1e-8 on every instance with
/// n*ell + ell <= 14, theta in {0, 0.25, 0.5, 0.9, 1}, beta in
/// {1/2, beta0, 1}.
#[test]
fn criterion_1_oracle_equivalence_memoryless() {
    let betas = [
        BetaParam::half(),
        BetaParam::krichevsky(),
        BetaParam::new(1.0).unwrap(),
    ];
    let thetas = [0.0, 0.25, 0.5, 0.9, 1.0];
    let mut worst: f64 = 0.0;
    let mut instances = 0u32;
    for ell in 1..=14u64 {
        for n in 0.. {
            if n * ell + ell > 14 {
                break;
            }
            let shape = ExperimentShape::new(n, ell).unwrap();
            for beta in betas {
                let spec = PredictorSpec::add_beta_batch(beta);
                for theta in thetas {
                    let param = MemorylessParam::new(theta).unwrap();
                    let bf = regret_brute_force(&param, &shape, &spec).unwrap().value;
                    let ds = regret_exact_double_sum(&param, &shape, &spec).unwrap().value;
                    let ss = regret_exact_single_sum(&param, &shape, beta).unwrap().value;
                    worst = worst.max((bf - ds).abs()).max((bf - ss).abs()).max((ds - ss).abs());
                    instances += 1;
                }
            }
        }
    }
    let pass = worst <= 1e-8;
    report(1, &format!("{instances} instances, max spread {worst:.2e}"), pass);
    assert!(pass, "max spread {worst:.2e} exceeds 1e-8");
}

/// Criterion 2: the exact boundary regret lies inside the sandwich bounds
/// for every t in 1..=1000, ell in {1, 8, 64}, beta in {1/2, 3/4, 1}.
#[test]
fn criterion_2_boundary_sandwich() {
    let mut violations = 0u64;
    let mut cases = 0u64;
    for beta in [0.5, 0.75, 1.0] {
        let b = BetaParam::new(beta).unwrap();
        for ell in [1u64, 8, 64] {
            for t in 1..=1000u64 {
                let chk = theorem2_boundary_check(t, ell, b).unwrap();
                cases += 1;
                if !chk.within_bounds() {
                    violations += 1;
                }
            }
        }
    }
    let pass = violations == 0;
    report(2, &format!("{cases} cases, {violations} violations"), pass);
    assert!(pass);
}

/// Criterion 3: at delta = 0.1, beta = 1/2, ell = n, the scaled residual
/// t * |max_regret - (1/2) ln(1 + 1/n)| strictly decreases over the last
/// three doublings n in {16, 32, 64}.
#[test]
fn criterion_3_interior_trend() {
    let range = ThetaRange::new(0.1).unwrap();
    let rows = theorem1_residual_sweep(
        &range,
        BetaParam::half(),
        &[8, 16, 32, 64],
        EllRule::EqualN,
    )
    .unwrap();
    let r: Vec<f64> = rows.iter().map(|x| x.scaled_residual).collect();
    let pass = r[1] > r[2] && r[2] > r[3];
    report(
        3,
        &format!("scaled residuals {:.4} > {:.4} > {:.4}", r[1], r[2], r[3]),
        pass,
    );
    assert!(pass, "scaled residuals not strictly decreasing: {r:?}");
}

/// Criterion 4: normalization (sum over test batches of exp(logprob) = 1)
/// for add-beta-batch and markov-composite at ell <= 12; the n = 0
/// reduction equals the classic mixture closed form; the ell = 1 reduction
/// equals the next-symbol add-beta rule.
#[test]
fn criterion_4_normalization_and_reductions() {
    let b = BetaParam::half();
    let mut pass = true;

    // add-beta-batch normalization via binomial multiplicities.
    for (t1, t0) in [(0u64, 0u64), (3, 2), (7, 9)] {
        for ell in [1u64, 5, 12] {
            let total: f64 = (0..=ell)
                .map(|l1| {
                    (log_binomial(ell, l1).unwrap()
                        + add_beta_logprob_counts(t1, t0, l1, ell - l1, b))
                    .exp()
                })
                .sum();
            pass &= (total - 1.0).abs() <= 1e-9;
        }
    }

    // markov-composite normalization by full enumeration at ell = 12.
    let ts = TrainingSet::new(vec![vec![0, 1, 1, 0], vec![1, 1, 0, 0]], 4).unwrap();
    let counts = extract_counts(&ts);
    for estimator in [InitialEstimator::FirstCoordinate, InitialEstimator::LeakageAveraged] {
        let spec =
            PredictorSpec::markov(PredictorFamily::MarkovComposite, b, estimator).unwrap();
        let ell = 12u64;
        let total: f64 = (0..(1u64 << ell))
            .map(|bits| {
                let y: Vec<u8> = (0..ell).map(|i| ((bits >> i) & 1) as u8).collect();
                markov_composite_logprob(&counts, &y, &spec).unwrap().exp()
            })
            .sum();
        pass &= (total - 1.0).abs() <= 1e-9;
    }

    // n = 0 reduction: the batch predictor with empty training is the
    // classic mixture, ln[ G(l1+b) G(l0+b) G(2b) / (G(b)^2 G(ell+2b)) ].
    for (l1, l0) in [(0u64, 4u64), (3, 3), (8, 1)] {
        let got = add_beta_logprob_counts(0, 0, l1, l0, b);
        let bb = b.value();
        let want = log_gamma(l1 as f64 + bb).unwrap() + log_gamma(l0 as f64 + bb).unwrap()
            + log_gamma(2.0 * bb).unwrap()
            - 2.0 * log_gamma(bb).unwrap()
            - log_gamma((l1 + l0) as f64 + 2.0 * bb).unwrap();
        pass &= (got - want).abs() <= 1e-10;
    }

    // ell = 1 reduction: batch log-probability of a single symbol equals
    // the next-symbol rule.
    for (t1, t0) in [(0u64, 0u64), (5, 2)] {
        let p_one = add_beta_next_raw(t1, t1 + t0, 0, 0, b);
        pass &= (add_beta_logprob_counts(t1, t0, 1, 0, b) - p_one.ln()).abs() <= 1e-12;
        pass &= (add_beta_logprob_counts(t1, t0, 0, 1, b) - (1.0 - p_one).ln()).abs() <= 1e-12;
    }

    report(4, "normalization and reductions", pass);
    assert!(pass);
}

/// Criterion 5: first-coordinate add-beta0 initial estimator, p1 grid
/// {0.1..0.9}, n = 256, ell = 16, 10^4 replicas with exact inner
/// expectation: n * max R1 lands in [0.4, 0.62].
#[test]
fn criterion_5_initial_regret_band() {
    let grid: Vec<MarkovParam> = (1..=9)
        .map(|i| MarkovParam::new(i as f64 / 10.0, 0.3, 0.3).unwrap())
        .collect();
    let rule = EllRule::Const(16);
    let rows = theorem3_initial_sweep(
        &grid,
        &[256],
        EllRuleRef(&rule),
        InitialEstimator::FirstCoordinate,
        BetaParam::krichevsky(),
        10_000,
        42,
    )
    .unwrap();
    let scaled = rows[0].n_times_r1;
    let pass = (0.4..=0.62).contains(&scaled);
    report(
        5,
        &format!("n*max_R1 = {scaled:.4} (se {:.1e}), band [0.4, 0.62]", rows[0].std_error),
        pass,
    );
    assert!(pass, "n*max_R1 = {scaled} outside [0.4, 0.62]");
}

/// Criterion 6: transition-only predictor, delta = 0.1, ell = n,
/// n in {32, 64, 128}: n * max R_T within [0.35, 0.7] at the two largest n.
#[test]
fn criterion_6_transition_regret_band() {
    let rule = EllRule::EqualN;
    let rows = theorem5_transition_sweep(
        0.1,
        &[32, 64, 128],
        EllRuleRef(&rule),
        BetaParam::half(),
        1000,
        42,
    )
    .unwrap();
    let scaled: Vec<f64> = rows.iter().map(|r| r.n_times_rt).collect();
    let pass = rows
        .iter()
        .rev()
        .take(2)
        .all(|r| (0.35..=0.7).contains(&r.n_times_rt));
    report(
        6,
        &format!("n*max_RT = {scaled:.4?} at n = [32, 64, 128], band [0.35, 0.7]"),
        pass,
    );
    assert!(
        pass,
        "n*max_RT = {scaled:?} outside [0.35, 0.7] at the two largest n"
    );
}

/// Criterion 7: the Stirling correction lies in [0, 1/(12x)] and the
/// Gamma-ratio double inequality ln[x / (x+s)^(1-s)] <= lnG(x+s) - lnG(x)
/// <= s ln x holds on the full test grids with zero violations.
#[test]
fn criterion_7_special_function_bounds() {
    let mut violations = 0u64;
    let mut cases = 0u64;

    let mut x = 0.5f64;
    while x <= 1e7 {
        let s = stirling_correction(x).unwrap();
        cases += 1;
        if !(0.0 <= s && s <= 1.0 / (12.0 * x)) {
            violations += 1;
        }
        x *= 1.07;
    }

    let mut x = 1.0f64;
    while x <= 1e6 {
        for s in [0.01, 0.25, 0.5, 0.509_22, 0.75, 0.99] {
            let d = log_gamma_ratio(x, s).unwrap();
            let lower = (x / (x + s).powf(1.0 - s)).ln();
            let upper = s * x.ln();
            cases += 1;
            if !(lower <= d + 1e-12 && d <= upper + 1e-12) {
                violations += 1;
            }
        }
        x *= 1.11;
    }

    let pass = violations == 0;
    report(7, &format!("{cases} cases, {violations} violations"), pass);
    assert!(pass);
}

/// Criterion 8: under brute-force evaluation, the Markov regret satisfies
/// total = initial + transition to 1e-10 on a fixed instance list with
/// n*ell + ell <= 20.
#[test]
fn criterion_8_decomposition_identity() {
    let instances = [
        // (n, ell, p1, p, q)
        (1u64, 2u64, 0.5, 0.5, 0.5),
        (2, 3, 0.4, 0.3, 0.6),
        (3, 4, 0.2, 0.8, 0.1),
        (4, 4, 0.7, 0.45, 0.55),
        (8, 2, 0.1, 0.9, 0.2),
        (5, 3, 0.5, 0.1, 0.1),
        (2, 2, 1.0, 0.0, 0.0),
        (6, 2, 0.35, 0.6, 0.25),
    ];
    let mut worst: f64 = 0.0;
    for estimator in [InitialEstimator::FirstCoordinate, InitialEstimator::LeakageAveraged] {
        for family in [
            PredictorFamily::MarkovComposite,
            PredictorFamily::MarkovTransitionOnly,
        ] {
            let spec = PredictorSpec::markov(family, BetaParam::half(), estimator).unwrap();
            for &(n, ell, p1, p, q) in &instances {
                if estimator == InitialEstimator::LeakageAveraged && ell < 2 {
                    continue;
                }
                let shape = ExperimentShape::new(n, ell).unwrap();
                assert!(shape.t() + ell <= 20);
                let param = MarkovParam::new(p1, p, q).unwrap();
                let d = markov_regret_brute_force(&param, &shape, &spec).unwrap();
                worst = worst
                    .max((d.total.value - d.initial.value - d.transition.value).abs());
            }
        }
    }
    let pass = worst <= 1e-10;
    report(8, &format!("max decomposition defect {worst:.2e}"), pass);
    assert!(pass, "decomposition defect {worst:.2e} exceeds 1e-10");
}
