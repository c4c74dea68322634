//! Generative model for the monitored phenomenon and its reporting network.
//!
//! The phenomenon is a binary Markov chain `s_1..s_m` with a uniform initial
//! state and persistence probability `rho` (probability that consecutive
//! states are equal; `rho = 0.5` makes the states independent). Each of the
//! `n` nodes is independently Byzantine with probability `alpha`. At every
//! step each node forms a local decision that is wrong with probability
//! `epsilon`; Byzantine nodes then flip their decision with probability
//! `pmal` before reporting it. From the fusion center's point of view a
//! Byzantine report is therefore wrong with probability
//! `eta = epsilon * (1 - pmal) + (1 - epsilon) * pmal`.
//!
//! Two copies of `pmal` are carried: `pmal_true` drives report generation,
//! `pmal_fc` is the value the fusion center assumes during inference. Keeping
//! them separate makes mismatched-knowledge studies possible; they are equal
//! in the usual matched setting.

use rand::Rng;
use std::fmt;
use thiserror::Error;

/// Validation and parsing failures for model inputs.
#[derive(Debug, Error)]
pub enum ModelError {
    /// A scalar parameter is outside its documented domain.
    #[error("parameter {name} = {value} must satisfy {requirement}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    /// A sequence or matrix entry is not a binary digit.
    #[error("bit value {0} is not 0 or 1")]
    InvalidBit(u8),
    /// A report matrix could not be parsed from text.
    #[error("report matrix line {line}: {reason}")]
    Parse { line: usize, reason: String },
    /// A container was built with inconsistent dimensions.
    #[error("expected {expected} entries, got {actual}")]
    BadLength { expected: usize, actual: usize },
}

/// A probability validated to be finite and within `[0, 1]`.
///
/// Construction checks the range; `get` hands back the raw `f64` so that
/// arithmetic stays on plain floats.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    /// Validates `value` and wraps it.
    pub fn new(value: f64) -> Result<Self, ModelError> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(ModelError::InvalidParameter {
                name: "probability",
                value,
                requirement: "0 <= p <= 1",
            })
        }
    }

    /// Returns the wrapped value.
    pub const fn get(self) -> f64 {
        self.0
    }

    /// Wraps a value already known to be a probability.
    pub(crate) fn from_valid(value: f64) -> Self {
        debug_assert!(value.is_finite() && (0.0..=1.0).contains(&value));
        Self(value)
    }
}

impl TryFrom<f64> for Probability {
    type Error = ModelError;

    fn try_from(value: f64) -> Result<Self, ModelError> {
        Self::new(value)
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Full parameterization of one network instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Number of reporting nodes.
    pub n: usize,
    /// Number of observed time steps.
    pub m: usize,
    /// Local decision error probability, `0 <= epsilon < 0.5`.
    pub epsilon: f64,
    /// State persistence probability, `0 < rho < 1`.
    pub rho: f64,
    /// Prior probability that a node is Byzantine, `0 <= alpha <= 0.5`.
    pub alpha: f64,
    /// Flip probability used when generating Byzantine reports.
    pub pmal_true: f64,
    /// Flip probability the fusion center assumes during inference.
    pub pmal_fc: f64,
}

impl ModelParams {
    /// Checks every field against its documented domain.
    pub fn validate(&self) -> Result<(), ModelError> {
        fn check(
            name: &'static str,
            value: f64,
            ok: bool,
            requirement: &'static str,
        ) -> Result<(), ModelError> {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter {
                    name,
                    value,
                    requirement,
                })
            }
        }

        check("n", self.n as f64, self.n >= 1, "n >= 1")?;
        check("m", self.m as f64, self.m >= 1, "m >= 1")?;
        check(
            "epsilon",
            self.epsilon,
            (0.0..0.5).contains(&self.epsilon),
            "0 <= epsilon < 0.5",
        )?;
        check("rho", self.rho, 0.0 < self.rho && self.rho < 1.0, "0 < rho < 1")?;
        check(
            "alpha",
            self.alpha,
            (0.0..=0.5).contains(&self.alpha),
            "0 <= alpha <= 0.5",
        )?;
        check(
            "pmal_true",
            self.pmal_true,
            (0.0..=1.0).contains(&self.pmal_true),
            "0 <= pmal <= 1",
        )?;
        check(
            "pmal_fc",
            self.pmal_fc,
            (0.0..=1.0).contains(&self.pmal_fc),
            "0 <= pmal_fc <= 1",
        )?;
        Ok(())
    }

    /// Effective flip probability of a Byzantine report during generation.
    pub fn eta_true(&self) -> f64 {
        byzantine_flip_prob(
            Probability::from_valid(self.epsilon),
            Probability::from_valid(self.pmal_true),
        )
        .get()
    }

    /// Effective Byzantine flip probability assumed by the fusion center.
    pub fn eta_fc(&self) -> f64 {
        byzantine_flip_prob(
            Probability::from_valid(self.epsilon),
            Probability::from_valid(self.pmal_fc),
        )
        .get()
    }
}

/// Honesty status of a single node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeStatus {
    /// The node flips its local decision with probability `pmal_true`.
    Byzantine,
    /// The node reports its local decision unchanged.
    Honest,
}

impl NodeStatus {
    /// True for honest nodes.
    pub fn is_honest(self) -> bool {
        matches!(self, NodeStatus::Honest)
    }
}

/// Binary state sequence `s_1..s_m`, stored as `0`/`1` entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSequence(Vec<u8>);

impl StateSequence {
    /// Validates that every entry is a binary digit.
    pub fn new(bits: Vec<u8>) -> Result<Self, ModelError> {
        if let Some(&bad) = bits.iter().find(|&&b| b > 1) {
            return Err(ModelError::InvalidBit(bad));
        }
        Ok(Self(bits))
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True when the sequence has no entries.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The raw bits.
    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    /// Entry at step `i` (0-based).
    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    /// The sequence with every bit flipped.
    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|b| 1 - b).collect())
    }
}

impl fmt::Display for StateSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Honesty statuses for all `n` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeStatusVector(Vec<NodeStatus>);

impl NodeStatusVector {
    /// Wraps a status per node.
    pub fn new(statuses: Vec<NodeStatus>) -> Self {
        Self(statuses)
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True when there are no nodes.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The raw statuses.
    pub fn statuses(&self) -> &[NodeStatus] {
        &self.0
    }

    /// Status of node `j` (0-based).
    pub fn get(&self, j: usize) -> NodeStatus {
        self.0[j]
    }

    /// How many nodes are Byzantine.
    pub fn count_byzantine(&self) -> usize {
        self.0.iter().filter(|s| !s.is_honest()).count()
    }
}

/// The `m x n` matrix of reports received by the fusion center.
///
/// Row `i` holds the reports of all nodes at step `i`; column `j` is the
/// trajectory of node `j`. The text form is one row per line with
/// space-separated `0`/`1` digits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportMatrix {
    m: usize,
    n: usize,
    bits: Vec<u8>,
}

impl ReportMatrix {
    /// Builds a matrix from row-major bits.
    pub fn new(m: usize, n: usize, bits: Vec<u8>) -> Result<Self, ModelError> {
        if bits.len() != m * n {
            return Err(ModelError::BadLength {
                expected: m * n,
                actual: bits.len(),
            });
        }
        if let Some(&bad) = bits.iter().find(|&&b| b > 1) {
            return Err(ModelError::InvalidBit(bad));
        }
        Ok(Self { m, n, bits })
    }

    /// Builds a matrix from per-step rows, which must all have equal length.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, ModelError> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut bits = Vec::with_capacity(m * n);
        for row in rows {
            if row.len() != n {
                return Err(ModelError::BadLength {
                    expected: n,
                    actual: row.len(),
                });
            }
            bits.extend_from_slice(row);
        }
        Self::new(m, n, bits)
    }

    /// Number of time steps (rows).
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of nodes (columns).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Report of node `j` at step `i`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.bits[i * self.n + j]
    }

    /// All reports at step `i`.
    pub fn row(&self, i: usize) -> &[u8] {
        &self.bits[i * self.n..(i + 1) * self.n]
    }

    /// The matrix with every report flipped.
    pub fn complement(&self) -> Self {
        Self {
            m: self.m,
            n: self.n,
            bits: self.bits.iter().map(|b| 1 - b).collect(),
        }
    }

    /// Parses the text form: one row per line, space-separated `0`/`1`
    /// digits, blank lines ignored, all rows of equal length.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut rows: Vec<Vec<u8>> = Vec::new();
        let mut width: Option<usize> = None;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut row = Vec::new();
            for token in line.split_whitespace() {
                match token {
                    "0" => row.push(0),
                    "1" => row.push(1),
                    other => {
                        return Err(ModelError::Parse {
                            line: line_no,
                            reason: format!("expected 0 or 1, found {other:?}"),
                        })
                    }
                }
            }
            if let Some(w) = width {
                if row.len() != w {
                    return Err(ModelError::Parse {
                        line: line_no,
                        reason: format!("row has {} entries, previous rows have {w}", row.len()),
                    });
                }
            } else {
                width = Some(row.len());
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(ModelError::Parse {
                line: 1,
                reason: "no rows found".to_string(),
            });
        }
        Self::from_rows(&rows)
    }
}

impl fmt::Display for ReportMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.m {
            if i > 0 {
                f.write_str("\n")?;
            }
            for (j, b) in self.row(i).iter().enumerate() {
                if j > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{b}")?;
            }
        }
        Ok(())
    }
}

/// Probability that a Byzantine node's report disagrees with the true state:
/// `epsilon * (1 - pmal) + (1 - epsilon) * pmal`.
pub fn byzantine_flip_prob(epsilon: Probability, pmal: Probability) -> Probability {
    let e = epsilon.get();
    let p = pmal.get();
    Probability::from_valid(e * (1.0 - p) + (1.0 - e) * p)
}

/// Report kernel `p(report | state, status)`.
///
/// Honest nodes miss with probability `epsilon`; Byzantine nodes miss with
/// the effective flip probability built from `pmal_fc` when `fc_view` is set
/// and from `pmal_true` otherwise.
pub fn report_likelihood(
    report: u8,
    state: u8,
    status: NodeStatus,
    params: &ModelParams,
    fc_view: bool,
) -> Probability {
    debug_assert!(report <= 1 && state <= 1);
    let miss = match status {
        NodeStatus::Honest => params.epsilon,
        NodeStatus::Byzantine => {
            if fc_view {
                params.eta_fc()
            } else {
                params.eta_true()
            }
        }
    };
    Probability::from_valid(if report == state { 1.0 - miss } else { miss })
}

/// Markov transition kernel `p(s_cur | s_prev)`: `rho` when the states agree,
/// `1 - rho` otherwise.
pub fn transition_prob(s_prev: u8, s_cur: u8, rho: Probability) -> Probability {
    debug_assert!(s_prev <= 1 && s_cur <= 1);
    let r = rho.get();
    Probability::from_valid(if s_prev == s_cur { r } else { 1.0 - r })
}

/// Draws a state sequence: uniform initial state, then persistence `rho`.
pub fn sample_states(params: &ModelParams, rng: &mut impl Rng) -> StateSequence {
    let mut bits = Vec::with_capacity(params.m);
    let mut prev: u8 = rng.gen_bool(0.5).into();
    bits.push(prev);
    for _ in 1..params.m {
        let cur = if rng.gen_bool(params.rho) { prev } else { 1 - prev };
        bits.push(cur);
        prev = cur;
    }
    StateSequence(bits)
}

/// Draws each node's honesty status independently: Byzantine with
/// probability `alpha`.
pub fn sample_node_statuses(params: &ModelParams, rng: &mut impl Rng) -> NodeStatusVector {
    NodeStatusVector(
        (0..params.n)
            .map(|_| {
                if rng.gen_bool(params.alpha) {
                    NodeStatus::Byzantine
                } else {
                    NodeStatus::Honest
                }
            })
            .collect(),
    )
}

/// Draws the report matrix given states and statuses. Honest reports flip
/// the true state with probability `epsilon`, Byzantine reports with
/// probability `eta_true`. Cells are drawn row by row.
pub fn sample_reports(
    states: &StateSequence,
    statuses: &NodeStatusVector,
    params: &ModelParams,
    rng: &mut impl Rng,
) -> ReportMatrix {
    debug_assert_eq!(states.len(), params.m);
    debug_assert_eq!(statuses.len(), params.n);
    let eta = params.eta_true();
    let mut bits = Vec::with_capacity(params.m * params.n);
    for i in 0..params.m {
        let s = states.get(i);
        for j in 0..params.n {
            let flip_prob = if statuses.get(j).is_honest() {
                params.epsilon
            } else {
                eta
            };
            let flipped: u8 = rng.gen_bool(flip_prob).into();
            bits.push(s ^ flipped);
        }
    }
    ReportMatrix {
        m: params.m,
        n: params.n,
        bits,
    }
}
