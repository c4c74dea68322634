//! Loopy message passing on the report factor graph.
//!
//! The graph has a variable for every chain state `s_i` and every node
//! honesty `h_j`, a report factor tying each `(s_i, h_j)` pair through the
//! observed report, transition factors along the chain, and prior factors on
//! `s_1` and on each `h_j`. All messages are over binary variables and kept
//! normalized, so each one is a single scalar.
//!
//! Internally a message is stored as log odds `l = ln(msg(0) / msg(1))`
//! (for honesty messages value 0 means Byzantine). Log odds make products of
//! messages plain sums, keep clamping symmetric, and give the engine an
//! exact mirror property: complementing every report negates every state
//! message and fixes every honesty message, so state marginals map to their
//! complements with no drift. Public accessors and results expose ordinary
//! probabilities of value 0.
//!
//! One [`MessageState::iterate`] call performs, in order:
//!
//! 1. report-to-state messages `nu_up` from the current honesty-to-report
//!    messages `lambda_up`,
//! 2. a rightward chain sweep computing `phi_right`/`tau_right` for
//!    `i = 1..m`,
//! 3. a leftward sweep computing `tau_left`/`phi_left` for `i = m..1`,
//! 4. state-to-report messages `nu_down` (leave-one-out products, computed
//!    as a precomputed log sum minus one term),
//! 5. report-to-honesty messages `lambda_down`,
//! 6. honesty-to-report messages `lambda_up` and the honesty belief products
//!    `omega_down`.
//!
//! The chain sweeps propagate information across the whole window once per
//! iteration, so a single iteration already performs exact forward-backward
//! smoothing for fixed honesty beliefs; further iterations refine the
//! state/honesty coupling. Every stored probability is clamped away from 0
//! and 1 by [`MESSAGE_CLAMP_LO`], which keeps all logs finite for any input,
//! including degenerate kernels from `epsilon = 0` or extreme `pmal`.

use crate::model::{ModelError, ModelParams, ReportMatrix, StateSequence};
use crate::num::sigmoid;
use rand::{Rng, RngCore};
use thiserror::Error;

/// Stored message probabilities are clamped to
/// `[MESSAGE_CLAMP_LO, 1 - MESSAGE_CLAMP_LO]`.
pub const MESSAGE_CLAMP_LO: f64 = 1e-12;

/// Default iteration budget for [`fuse_mp`].
pub const DEFAULT_MAX_ITERS: usize = 5;

/// Default convergence tolerance (max-norm over stored message
/// probabilities) for [`fuse_mp`].
pub const DEFAULT_TOL: f64 = 1e-6;

/// Failures of the message-passing fuser.
#[derive(Debug, Error)]
pub enum MpError {
    /// The report matrix does not match the parameter dimensions.
    #[error("report matrix is {actual_m}x{actual_n}, parameters describe {m}x{n}")]
    DimensionMismatch {
        m: usize,
        n: usize,
        actual_m: usize,
        actual_n: usize,
    },
    /// A control argument is outside its domain.
    #[error("{what} must satisfy {requirement}")]
    InvalidArgument {
        what: &'static str,
        requirement: &'static str,
    },
    /// A message update produced a non-finite value.
    #[error("message update produced a non-finite value")]
    NumericFailure,
    /// The parameters themselves are invalid.
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Report kernel tables `p(r | s, status)` under the fusion center's view,
/// indexed `[r][s]`.
#[derive(Debug, Clone, Copy)]
struct Kernels {
    byz: [[f64; 2]; 2],
    hon: [[f64; 2]; 2],
}

impl Kernels {
    fn fc_view(params: &ModelParams) -> Self {
        let eps = params.epsilon;
        let eta = params.eta_fc();
        Self {
            byz: [[1.0 - eta, eta], [eta, 1.0 - eta]],
            hon: [[1.0 - eps, eps], [eps, 1.0 - eps]],
        }
    }
}

/// All messages of the factor graph for one report matrix.
///
/// Array families (all exposed as probabilities of value 0 by accessors;
/// honesty-side value 0 means Byzantine):
///
/// - `tau_right[i]`, `tau_left[i]`: state `s_i` to its right/left transition
///   factor (`m` entries each),
/// - `phi_right[i]`: incoming at `s_i` from the left (`phi_right[0]` is the
///   fixed uniform prior on `s_1`),
/// - `phi_left[i]`: incoming at `s_i` from the right (`m - 1` entries, `s_m`
///   has none),
/// - `nu_up[i][j]` / `nu_down[i][j]`: report factor to state and back,
/// - `lambda_down[i][j]` / `lambda_up[i][j]`: report factor to honesty and
///   back,
/// - `omega_up[j]`: honesty prior (constant), `omega_down[j]`: product of
///   report evidence about `h_j`.
#[derive(Debug, Clone)]
pub struct MessageState {
    m: usize,
    n: usize,
    /// Log-odds magnitude bound equivalent to the probability clamp.
    cap: f64,
    /// Unclamped prior log odds of Byzantine, for posterior extraction.
    prior_byz: f64,

    // Log odds per family.
    tau_r: Vec<f64>,
    tau_l: Vec<f64>,
    phi_r: Vec<f64>,
    phi_l: Vec<f64>,
    nu_u: Vec<f64>,
    nu_d: Vec<f64>,
    lambda_d: Vec<f64>,
    lambda_u: Vec<f64>,
    omega_u: Vec<f64>,
    omega_d: Vec<f64>,

    // Probability-of-zero caches, maintained for convergence deltas and
    // accessors. `lambda_u_p1` is the complementary half needed to fold the
    // honesty prior into the next report-to-state update without drift.
    tau_r_p: Vec<f64>,
    tau_l_p: Vec<f64>,
    phi_r_p: Vec<f64>,
    phi_l_p: Vec<f64>,
    nu_u_p: Vec<f64>,
    nu_d_p: Vec<f64>,
    lambda_d_p: Vec<f64>,
    lambda_u_p: Vec<f64>,
    lambda_u_p1: Vec<f64>,
    omega_d_p: Vec<f64>,

    /// Per-step log-odds sum of `nu_up[i][*]`, refreshed each iteration.
    state_evidence: Vec<f64>,
    /// Per-node log-odds sum of `lambda_down[*][j]`, refreshed each
    /// iteration.
    node_evidence: Vec<f64>,
}

impl MessageState {
    /// Builds the initial message set for one report matrix: honesty
    /// messages start at the prior, everything else at the uninformative
    /// value 0.5.
    pub fn init(reports: &ReportMatrix, params: &ModelParams) -> Result<Self, MpError> {
        params.validate()?;
        if reports.m() != params.m || reports.n() != params.n {
            return Err(MpError::DimensionMismatch {
                m: params.m,
                n: params.n,
                actual_m: reports.m(),
                actual_n: reports.n(),
            });
        }
        let (m, n) = (params.m, params.n);
        let cap = ((1.0 - MESSAGE_CLAMP_LO) / MESSAGE_CLAMP_LO).ln();
        let prior_byz = params.alpha.ln() - (1.0 - params.alpha).ln();
        let prior_clamped = prior_byz.clamp(-cap, cap);
        let prior_p0 = sigmoid(prior_clamped);
        let prior_p1 = sigmoid(-prior_clamped);

        Ok(Self {
            m,
            n,
            cap,
            prior_byz,
            tau_r: vec![0.0; m],
            tau_l: vec![0.0; m],
            phi_r: vec![0.0; m],
            phi_l: vec![0.0; m.saturating_sub(1)],
            nu_u: vec![0.0; m * n],
            nu_d: vec![0.0; m * n],
            lambda_d: vec![0.0; m * n],
            lambda_u: vec![prior_clamped; m * n],
            omega_u: vec![prior_clamped; n],
            omega_d: vec![0.0; n],
            tau_r_p: vec![0.5; m],
            tau_l_p: vec![0.5; m],
            phi_r_p: vec![0.5; m],
            phi_l_p: vec![0.5; m.saturating_sub(1)],
            nu_u_p: vec![0.5; m * n],
            nu_d_p: vec![0.5; m * n],
            lambda_d_p: vec![0.5; m * n],
            lambda_u_p: vec![prior_p0; m * n],
            lambda_u_p1: vec![prior_p1; m * n],
            omega_d_p: vec![0.5; n],
            state_evidence: vec![0.0; m],
            node_evidence: vec![0.0; n],
        })
    }

    /// Number of time steps.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Runs one full update schedule and returns the maximum absolute change
    /// over all stored message probabilities.
    pub fn iterate(
        &mut self,
        reports: &ReportMatrix,
        params: &ModelParams,
    ) -> Result<f64, MpError> {
        debug_assert_eq!(reports.m(), self.m);
        debug_assert_eq!(reports.n(), self.n);
        let (m, n) = (self.m, self.n);
        let kernels = Kernels::fc_view(params);
        let rho = params.rho;
        let cap = self.cap;
        let mut delta = 0.0f64;

        // Transition factor: log odds of the message that comes out when a
        // neighbor sends log odds `l` through the persistence kernel.
        let through_chain = |l: f64| -> f64 {
            let p0 = sigmoid(l);
            let p1 = sigmoid(-l);
            let to0 = (rho * p0 + (1.0 - rho) * p1).ln();
            let to1 = ((1.0 - rho) * p0 + rho * p1).ln();
            (to0 - to1).clamp(-cap, cap)
        };

        // 1. Report factor to state, folding in the honesty message. The
        // per-step products are accumulated as log-odds sums.
        for i in 0..m {
            let mut evidence = 0.0;
            let row = reports.row(i);
            for j in 0..n {
                let idx = i * n + j;
                let r = row[j] as usize;
                let lam0 = self.lambda_u_p[idx];
                let lam1 = self.lambda_u_p1[idx];
                let to0 = (kernels.byz[r][0] * lam0 + kernels.hon[r][0] * lam1).ln();
                let to1 = (kernels.byz[r][1] * lam0 + kernels.hon[r][1] * lam1).ln();
                let l = (to0 - to1).clamp(-cap, cap);
                self.nu_u[idx] = l;
                let p = sigmoid(l);
                delta = delta.max((p - self.nu_u_p[idx]).abs());
                self.nu_u_p[idx] = p;
                evidence += l;
            }
            self.state_evidence[i] = evidence;
        }

        // 2. Rightward sweep. phi_right[0] stays at the uniform prior.
        for i in 0..m {
            if i > 0 {
                let l = through_chain(self.tau_r[i - 1]);
                self.phi_r[i] = l;
                let p = sigmoid(l);
                delta = delta.max((p - self.phi_r_p[i]).abs());
                self.phi_r_p[i] = p;
            }
            let l = (self.phi_r[i] + self.state_evidence[i]).clamp(-cap, cap);
            self.tau_r[i] = l;
            let p = sigmoid(l);
            delta = delta.max((p - self.tau_r_p[i]).abs());
            self.tau_r_p[i] = p;
        }

        // 3. Leftward sweep, mirroring step 2.
        for i in (0..m).rev() {
            let incoming = if i + 1 < m {
                let l = through_chain(self.tau_l[i + 1]);
                self.phi_l[i] = l;
                let p = sigmoid(l);
                delta = delta.max((p - self.phi_l_p[i]).abs());
                self.phi_l_p[i] = p;
                l
            } else {
                0.0
            };
            let l = (incoming + self.state_evidence[i]).clamp(-cap, cap);
            self.tau_l[i] = l;
            let p = sigmoid(l);
            delta = delta.max((p - self.tau_l_p[i]).abs());
            self.tau_l_p[i] = p;
        }

        // 4 + 5. State to report factor (leave-one-out) and report factor to
        // honesty, fused per cell. Node evidence sums build up per column.
        for ev in self.node_evidence.iter_mut() {
            *ev = 0.0;
        }
        for i in 0..m {
            let side = if i + 1 < m { self.phi_l[i] } else { 0.0 };
            let base = self.phi_r[i] + side + self.state_evidence[i];
            let row = reports.row(i);
            for j in 0..n {
                let idx = i * n + j;
                let l = (base - self.nu_u[idx]).clamp(-cap, cap);
                self.nu_d[idx] = l;
                let nu0 = sigmoid(l);
                let nu1 = sigmoid(-l);
                delta = delta.max((nu0 - self.nu_d_p[idx]).abs());
                self.nu_d_p[idx] = nu0;

                let r = row[j] as usize;
                let to_byz = (kernels.byz[r][0] * nu0 + kernels.byz[r][1] * nu1).ln();
                let to_hon = (kernels.hon[r][0] * nu0 + kernels.hon[r][1] * nu1).ln();
                let l = (to_byz - to_hon).clamp(-cap, cap);
                self.lambda_d[idx] = l;
                let p = sigmoid(l);
                delta = delta.max((p - self.lambda_d_p[idx]).abs());
                self.lambda_d_p[idx] = p;
                self.node_evidence[j] += l;
            }
        }

        // 6. Honesty to report factor (leave-one-out around the prior) and
        // the honesty belief product.
        for j in 0..n {
            let evidence = self.node_evidence[j];
            let l = evidence.clamp(-cap, cap);
            self.omega_d[j] = l;
            let p = sigmoid(l);
            delta = delta.max((p - self.omega_d_p[j]).abs());
            self.omega_d_p[j] = p;

            let with_prior = self.omega_u[j] + evidence;
            for i in 0..m {
                let idx = i * n + j;
                let l = (with_prior - self.lambda_d[idx]).clamp(-cap, cap);
                self.lambda_u[idx] = l;
                let p = sigmoid(l);
                delta = delta.max((p - self.lambda_u_p[idx]).abs());
                self.lambda_u_p[idx] = p;
                self.lambda_u_p1[idx] = sigmoid(-l);
            }
        }

        if !delta.is_finite() || !self.all_finite() {
            return Err(MpError::NumericFailure);
        }
        Ok(delta)
    }

    fn all_finite(&self) -> bool {
        let big = [&self.nu_u, &self.nu_d, &self.lambda_d, &self.lambda_u];
        let small = [
            &self.tau_r,
            &self.tau_l,
            &self.phi_r,
            &self.phi_l,
            &self.omega_d,
        ];
        big.iter()
            .chain(small.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Current belief `p(s_i = 0 | R)` per step, from the chain messages and
    /// the report evidence at `s_i`.
    pub fn state_marginals(&self) -> Vec<f64> {
        (0..self.m)
            .map(|i| {
                let side = if i + 1 < self.m { self.phi_l[i] } else { 0.0 };
                sigmoid(self.phi_r[i] + side + self.state_evidence[i])
            })
            .collect()
    }

    /// Current belief `p(h_j = Byzantine | R)` per node: the report evidence
    /// about `h_j` combined with the unclamped prior.
    pub fn honesty_posteriors(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| sigmoid(self.prior_byz + self.node_evidence[j]))
            .collect()
    }

    /// Probability view of `tau_right` (state to right transition factor).
    pub fn tau_right(&self) -> &[f64] {
        &self.tau_r_p
    }

    /// Probability view of `tau_left` (state to left transition factor).
    pub fn tau_left(&self) -> &[f64] {
        &self.tau_l_p
    }

    /// Probability view of `phi_right`; entry 0 is the fixed uniform prior
    /// on the first state.
    pub fn phi_right(&self) -> &[f64] {
        &self.phi_r_p
    }

    /// Probability view of `phi_left` (`m - 1` entries).
    pub fn phi_left(&self) -> &[f64] {
        &self.phi_l_p
    }

    /// Probability view of `nu_up`, row-major `m x n`.
    pub fn nu_up(&self) -> &[f64] {
        &self.nu_u_p
    }

    /// Probability view of `nu_down`, row-major `m x n`.
    pub fn nu_down(&self) -> &[f64] {
        &self.nu_d_p
    }

    /// Probability view of `lambda_down` (probability of Byzantine),
    /// row-major `m x n`.
    pub fn lambda_down(&self) -> &[f64] {
        &self.lambda_d_p
    }

    /// Probability view of `lambda_up` (probability of Byzantine), row-major
    /// `m x n`.
    pub fn lambda_up(&self) -> &[f64] {
        &self.lambda_u_p
    }

    /// Probability view of the constant honesty priors `omega_up`.
    pub fn omega_up(&self) -> Vec<f64> {
        self.omega_u.iter().map(|&l| sigmoid(l)).collect()
    }

    /// Probability view of the honesty belief products `omega_down`.
    pub fn omega_down(&self) -> &[f64] {
        &self.omega_d_p
    }
}

/// Result of a fusion pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    /// Hard per-step decisions.
    pub decisions: StateSequence,
    /// Belief `p(s_i = 0 | R)` per step.
    pub state_posteriors: Vec<f64>,
    /// Belief `p(h_j = Byzantine | R)` per node.
    pub honesty_posteriors: Vec<f64>,
    /// Iterations actually executed.
    pub iterations_used: usize,
    /// Whether the message change fell below the tolerance before the
    /// iteration budget ran out.
    pub converged: bool,
}

/// Runs message passing until the maximum message change falls below `tol`
/// or `max_iters` iterations have run, then extracts beliefs and decisions.
///
/// Ties (posterior exactly 0.5) break toward state 0; callers embedding this
/// in a randomized trial can re-decide from the posteriors with
/// [`decide_states`] and a coin stream.
pub fn fuse_mp(
    reports: &ReportMatrix,
    params: &ModelParams,
    max_iters: usize,
    tol: f64,
) -> Result<FusionResult, MpError> {
    if max_iters < 1 {
        return Err(MpError::InvalidArgument {
            what: "max_iters",
            requirement: "max_iters >= 1",
        });
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(MpError::InvalidArgument {
            what: "tol",
            requirement: "0 < tol < inf",
        });
    }
    let mut state = MessageState::init(reports, params)?;
    let mut iterations_used = 0;
    let mut converged = false;
    while iterations_used < max_iters {
        let delta = state.iterate(reports, params)?;
        iterations_used += 1;
        if delta < tol {
            converged = true;
            break;
        }
    }
    let state_posteriors = state.state_marginals();
    let honesty_posteriors = state.honesty_posteriors();
    let decisions = decide_states(&state_posteriors, None);
    Ok(FusionResult {
        decisions,
        state_posteriors,
        honesty_posteriors,
        iterations_used,
        converged,
    })
}

/// Turns per-step posteriors `p(s_i = 0 | R)` into hard decisions.
///
/// `decisions[i]` is 0 exactly when the posterior exceeds one half. An exact
/// tie at 0.5 is broken by a fair coin from `tie_rng` when one is provided
/// and deterministically toward 0 otherwise.
pub fn decide_states(
    posteriors_zero: &[f64],
    mut tie_rng: Option<&mut dyn RngCore>,
) -> StateSequence {
    let bits = posteriors_zero
        .iter()
        .map(|&p0| {
            debug_assert!(!p0.is_nan());
            if p0 > 0.5 {
                0u8
            } else if p0 < 0.5 {
                1u8
            } else {
                match tie_rng.as_deref_mut() {
                    Some(rng) => u8::from(rng.gen_bool(0.5)),
                    None => 0u8,
                }
            }
        })
        .collect();
    StateSequence::new(bits).expect("bits are binary by construction")
}
