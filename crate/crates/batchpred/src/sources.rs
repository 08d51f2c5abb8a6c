//! Binary sources, batch sampling, and sufficient-statistic extraction.

use crate::rng::CounterRng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SourceError {
    #[error("batch length ell must be >= 1")]
    ZeroBatchLength,
    #[error("probability out of range: {name} = {value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("delta must lie in (0, 0.5), got {0}")]
    InvalidDelta(f64),
    #[error("degenerate chain: p + q = 0 has no stationary distribution")]
    DegenerateChain,
    #[error("coordinate index must be >= 1")]
    ZeroCoordinate,
    #[error("batch {index} has length {got}, expected {expected}")]
    RaggedBatch { index: usize, got: usize, expected: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn check_prob(name: &'static str, value: f64) -> Result<f64, SourceError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(SourceError::InvalidProbability { name, value })
    }
}

/// The (n, ell) batch geometry. `t = n*ell` and `z = t + ell` are always
/// derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExperimentShape {
    n: u64,
    ell: u64,
}

impl ExperimentShape {
    /// `n = 0` (full-sequence reduction) and `ell = 1` (next-symbol
    /// reduction) are both legal.
    pub fn new(n: u64, ell: u64) -> Result<Self, SourceError> {
        if ell == 0 {
            return Err(SourceError::ZeroBatchLength);
        }
        Ok(ExperimentShape { n, ell })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    /// Training length t = n * ell.
    pub fn t(&self) -> u64 {
        self.n * self.ell
    }

    /// z = t + ell.
    pub fn z(&self) -> u64 {
        self.t() + self.ell
    }
}

/// Bernoulli(theta) source parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemorylessParam {
    theta: f64,
}

impl MemorylessParam {
    /// Boundary values 0 and 1 are explicitly supported.
    pub fn new(theta: f64) -> Result<Self, SourceError> {
        Ok(MemorylessParam { theta: check_prob("theta", theta)? })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// The closed interval Theta = [delta, 1 - delta].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaRange {
    delta: f64,
}

impl ThetaRange {
    pub fn new(delta: f64) -> Result<Self, SourceError> {
        if delta > 0.0 && delta < 0.5 {
            Ok(ThetaRange { delta })
        } else {
            Err(SourceError::InvalidDelta(delta))
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lo(&self) -> f64 {
        self.delta
    }

    pub fn hi(&self) -> f64 {
        1.0 - self.delta
    }
}

/// First-order binary Markov source: initial probability of a one `p1`,
/// transition probabilities `p = p(1|0)` and `q = p(0|1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovParam {
    p1: f64,
    p: f64,
    q: f64,
}

impl MarkovParam {
    pub fn new(p1: f64, p: f64, q: f64) -> Result<Self, SourceError> {
        Ok(MarkovParam {
            p1: check_prob("p1", p1)?,
            p: check_prob("p", p)?,
            q: check_prob("q", q)?,
        })
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Stationary probability of a one, pi_1 = p / (p + q).
    pub fn pi1(&self) -> Result<f64, SourceError> {
        if self.p + self.q > 0.0 {
            Ok(self.p / (self.p + self.q))
        } else {
            Err(SourceError::DegenerateChain)
        }
    }

    /// Probability of the next symbol being 1 given the previous symbol.
    pub fn next_prob_one(&self, prev: u8) -> f64 {
        if prev == 0 {
            self.p
        } else {
            1.0 - self.q
        }
    }
}

/// Exact marginal Pr(X_j = 1) = (p1 - pi1)(1 - p - q)^{j-1} + pi1 for a
/// coordinate j >= 1 within a batch.
pub fn coordinate_marginal(param: &MarkovParam, j: u64) -> Result<f64, SourceError> {
    if j == 0 {
        return Err(SourceError::ZeroCoordinate);
    }
    let pi1 = param.pi1()?;
    let r = 1.0 - param.p - param.q;
    Ok((param.p1 - pi1) * r.powi((j - 1) as i32) + pi1)
}

/// An ordered collection of n training batches, all of length ell.
/// Bits are stored as 0/1 bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSet {
    batches: Vec<Vec<u8>>,
    ell: u64,
}

impl TrainingSet {
    /// `batches` may be empty (n = 0 is the full-sequence reduction).
    pub fn new(batches: Vec<Vec<u8>>, ell: u64) -> Result<Self, SourceError> {
        if ell == 0 {
            return Err(SourceError::ZeroBatchLength);
        }
        for (index, b) in batches.iter().enumerate() {
            if b.len() as u64 != ell {
                return Err(SourceError::RaggedBatch {
                    index,
                    got: b.len(),
                    expected: ell as usize,
                });
            }
            debug_assert!(b.iter().all(|&x| x <= 1));
        }
        Ok(TrainingSet { batches, ell })
    }

    pub fn n(&self) -> u64 {
        self.batches.len() as u64
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn batches(&self) -> &[Vec<u8>] {
        &self.batches
    }

    /// Plain text serialization: one batch per line, bits as '0'/'1'.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for b in &self.batches {
            for &bit in b {
                out.push(if bit == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

/// Parse the training-set text format. Lines hold '0'/'1' characters; an
/// optional final line prefixed `test:` carries a test batch. Blank lines
/// are rejected. Returns the training batches and the optional test batch.
pub fn parse_training_text(text: &str) -> Result<(Vec<Vec<u8>>, Option<Vec<u8>>), SourceError> {
    let mut batches = Vec::new();
    let mut test: Option<Vec<u8>> = None;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        if test.is_some() {
            return Err(SourceError::Parse {
                line: lineno,
                msg: "content after the test: line".into(),
            });
        }
        let (is_test, body) = match raw.strip_prefix("test:") {
            Some(rest) => (true, rest),
            None => (false, raw),
        };
        let mut bits = Vec::with_capacity(body.len());
        for ch in body.chars() {
            match ch {
                '0' => bits.push(0),
                '1' => bits.push(1),
                other => {
                    return Err(SourceError::Parse {
                        line: lineno,
                        msg: format!("invalid character {other:?}, expected '0' or '1'"),
                    })
                }
            }
        }
        if bits.is_empty() {
            return Err(SourceError::Parse {
                line: lineno,
                msg: "empty line".into(),
            });
        }
        if is_test {
            test = Some(bits);
        } else {
            if let Some(first) = batches.first() {
                let expected: &Vec<u8> = first;
                if bits.len() != expected.len() {
                    return Err(SourceError::Parse {
                        line: lineno,
                        msg: format!(
                            "ragged batch length {} (expected {})",
                            bits.len(),
                            expected.len()
                        ),
                    });
                }
            }
            batches.push(bits);
        }
    }
    Ok((batches, test))
}

/// Sample n batches of ell i.i.d. Bernoulli(theta) bits. Deterministic
/// given the seed.
pub fn sample_memoryless(
    param: &MemorylessParam,
    shape: &ExperimentShape,
    seed: u64,
) -> TrainingSet {
    let mut rng = CounterRng::new(seed);
    let batches = (0..shape.n())
        .map(|_| {
            (0..shape.ell())
                .map(|_| u8::from(rng.bernoulli(param.theta)))
                .collect()
        })
        .collect();
    TrainingSet { batches, ell: shape.ell() }
}

/// Sample n independent Markov batches: each batch starts fresh from p1
/// and evolves by (p, q). Deterministic given the seed.
pub fn sample_markov(param: &MarkovParam, shape: &ExperimentShape, seed: u64) -> TrainingSet {
    let mut rng = CounterRng::new(seed);
    let batches = (0..shape.n())
        .map(|_| sample_markov_batch(param, shape.ell(), &mut rng))
        .collect();
    TrainingSet { batches, ell: shape.ell() }
}

/// Sample a single Markov batch from an existing generator.
pub fn sample_markov_batch(param: &MarkovParam, ell: u64, rng: &mut CounterRng) -> Vec<u8> {
    let mut batch = Vec::with_capacity(ell as usize);
    let mut prev = u8::from(rng.bernoulli(param.p1));
    batch.push(prev);
    for _ in 1..ell {
        prev = u8::from(rng.bernoulli(param.next_prob_one(prev)));
        batch.push(prev);
    }
    batch
}

/// Symbol and transition counts over a training set. These fully determine
/// every predictor in scope.
///
/// Transitions never straddle batch boundaries; `t_h[h]` counts h in each
/// batch excluding the batch's last symbol, so `t_h[h] = t_hk[h][0] +
/// t_hk[h][1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SufficientCounts {
    pub n: u64,
    pub ell: u64,
    /// ones over the whole training set
    pub t1: u64,
    /// zeros over the whole training set
    pub t0: u64,
    /// t_hk[h][k]: consecutive hk pairs summed over batches
    pub t_hk: [[u64; 2]; 2],
    /// t_h[h]: occurrences of h excluding each batch's last symbol
    pub t_h: [u64; 2],
    /// ones among the first symbols of the batches
    pub first_coord_ones: u64,
    /// coord_ones[j]: ones at within-batch coordinate j+1 across batches
    pub coord_ones: Vec<u64>,
}

impl SufficientCounts {
    /// All-zero counts for an empty (n = 0) training set.
    pub fn empty(ell: u64) -> Self {
        SufficientCounts {
            n: 0,
            ell,
            t1: 0,
            t0: 0,
            t_hk: [[0; 2]; 2],
            t_h: [0; 2],
            first_coord_ones: 0,
            coord_ones: vec![0; ell as usize],
        }
    }

    /// Synthetic counts carrying only the memoryless sufficient statistic
    /// (t1, t0); used by the exact regret sums, which iterate over count
    /// values rather than training sets.
    pub fn from_symbol_counts(t1: u64, t0: u64) -> Self {
        SufficientCounts {
            n: 0,
            ell: 0,
            t1,
            t0,
            t_hk: [[0; 2]; 2],
            t_h: [0; 2],
            first_coord_ones: 0,
            coord_ones: Vec::new(),
        }
    }

    /// Total training length t = t1 + t0.
    pub fn t(&self) -> u64 {
        self.t1 + self.t0
    }
}

/// Compute sufficient counts from a training set. An empty training set
/// yields all-zero counts.
pub fn extract_counts(ts: &TrainingSet) -> SufficientCounts {
    let ell = ts.ell() as usize;
    let mut c = SufficientCounts::empty(ts.ell());
    c.n = ts.n();
    for batch in ts.batches() {
        for (j, &bit) in batch.iter().enumerate() {
            if bit == 1 {
                c.t1 += 1;
                c.coord_ones[j] += 1;
            } else {
                c.t0 += 1;
            }
        }
        if batch[0] == 1 {
            c.first_coord_ones += 1;
        }
        for w in batch.windows(2) {
            let (h, k) = (w[0] as usize, w[1] as usize);
            c.t_hk[h][k] += 1;
            c.t_h[h] += 1;
        }
    }
    debug_assert_eq!(c.t1 + c.t0, ts.n() * ts.ell());
    debug_assert_eq!(
        c.t_hk.iter().flatten().sum::<u64>(),
        ts.n() * (ts.ell() - 1)
    );
    c.coord_ones.truncate(ell);
    c
}

/// Rule mapping n to a batch length ell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EllRule {
    /// ell = n
    EqualN,
    /// ell fixed
    Const(u64),
    /// ell = round(sqrt(n)), at least 1
    SqrtN,
}

impl EllRule {
    pub fn ell_of(&self, n: u64) -> u64 {
        match self {
            EllRule::EqualN => n.max(1),
            EllRule::Const(k) => *k,
            EllRule::SqrtN => ((n as f64).sqrt().round() as u64).max(1),
        }
    }

    /// Parse "n", "const:<k>", or "sqrt".
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "n" => Ok(EllRule::EqualN),
            "sqrt" => Ok(EllRule::SqrtN),
            other => match other.strip_prefix("const:") {
                Some(k) => k
                    .parse::<u64>()
                    .ok()
                    .filter(|&k| k >= 1)
                    .map(EllRule::Const)
                    .ok_or_else(|| format!("invalid ell rule {other:?}")),
                None => Err(format!(
                    "invalid ell rule {other:?}; expected \"n\", \"const:<k>\" or \"sqrt\""
                )),
            },
        }
    }
}

impl std::fmt::Display for EllRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EllRule::EqualN => write!(f, "n"),
            EllRule::Const(k) => write!(f, "const:{k}"),
            EllRule::SqrtN => write!(f, "sqrt"),
        }
    }
}
