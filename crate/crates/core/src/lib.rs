//! Numerics for the Yule-Lambda nested coalescent.
//!
//! The model couples two levels of mergers: species labels die at rate `c`
//! (merging their lineages into a surviving label), while the lineages within
//! a label follow a multiple-merger coalescent driven by a probability
//! measure `Lambda` on (0, 1]. The crate makes the associated distributional
//! fixed-point theory computable:
//!
//! * [`measure`]: the measure `Lambda`, its merger rates, moments, and the
//!   threshold exponent `alpha_c`;
//! * [`kernel`]: the exact law of the block count surviving to an
//!   independent Exp(c) time, for every starting count plus the symbolic
//!   infinite row;
//! * [`dist`]: truncated distributions on `{1..N} + {inf}` with explicit
//!   tail accounting and stochastic-order utilities;
//! * [`rde`]: the one-branchpoint update `G_c` (convolve, then kill at an
//!   exponential time), its fixed points from `delta_1` and `delta_inf`, and
//!   the identities those fixed points must satisfy;
//! * [`sibuya`]: generalized binomial coefficients and the constructive
//!   heavy-tailed sub/super-solutions bracketing an infinite-mean fixed
//!   point;
//! * [`sim`]: a Gillespie simulator of the full nested process for
//!   validating the convergence claims at desk scale.

pub mod dist;
pub mod error;
pub mod kernel;
pub mod measure;
pub mod quad;
pub mod rde;
pub mod sibuya;
pub mod sim;
pub mod special;

pub use dist::{ExtDist, TailPolicy};
pub use error::{Error, Result};
pub use kernel::{LyKernel, Transitions};
pub use measure::{LambdaMeasure, RateTable};
