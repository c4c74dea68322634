//! Binary decision fusion for multi-sensor networks that contain Byzantine
//! nodes.
//!
//! A fusion center watches `n` reporting nodes over a window of `m` time
//! steps. The phenomenon being sensed is a binary Markov chain. Honest nodes
//! report their (noisy) local decision; Byzantine nodes flip theirs with some
//! probability. The fusion center sees only the `m x n` report matrix and
//! must recover the state sequence, ideally while also rating each node's
//! trustworthiness.
//!
//! The crate provides:
//!
//! - [`model`]: the generative model (parameters, report kernels, samplers).
//! - [`mp`]: the loopy message-passing fuser, linear in `m * n` per sweep.
//! - [`exact`]: brute-force reference fusers for small instances.
//! - [`baselines`]: majority voting and two isolation schemes.
//! - [`experiment`]: reproducible Monte Carlo error-rate estimation.
//! - [`cli`]: the `fusion-lab` command-line front end.
//!
//! # Example
//!
//! ```
//! use fusion_lab::model::{sample_node_statuses, sample_reports, sample_states, ModelParams};
//! use fusion_lab::mp::fuse_mp;
//! use rand::SeedableRng;
//!
//! let params = ModelParams {
//!     n: 8,
//!     m: 4,
//!     epsilon: 0.15,
//!     rho: 0.8,
//!     alpha: 0.2,
//!     pmal_true: 1.0,
//!     pmal_fc: 1.0,
//! };
//! params.validate().unwrap();
//!
//! let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
//! let states = sample_states(&params, &mut rng);
//! let statuses = sample_node_statuses(&params, &mut rng);
//! let reports = sample_reports(&states, &statuses, &params, &mut rng);
//!
//! let result = fuse_mp(&reports, &params, 5, 1e-6).unwrap();
//! assert_eq!(result.decisions.len(), 4);
//! ```

pub mod baselines;
pub mod cli;
pub mod exact;
pub mod experiment;
pub mod model;
pub mod mp;
mod num;
