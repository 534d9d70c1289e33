//! Simulation and analysis of simultaneous-message-passing protocols over
//! finite sources of imperfect shared randomness.
//!
//! The crate is organized around five modules:
//!
//! * [`source`] - finite bipartite distributions, the standard named sources,
//!   tensor products, and deterministic sampling.
//! * [`measures`] - maximum correlation, L_p norms, the conditional
//!   expectation channel, hypercontractivity and Hoelder checks, entropy.
//! * [`protocol`] - agreement and collision protocols: constructions,
//!   exact/Monte Carlo evaluation, the conversions between the two kinds,
//!   amplification, domain scaling, symmetrization, and a bilinear
//!   alternating optimizer.
//! * [`smp`] - SMP protocol simulation: the equality protocol over any
//!   non-product source, gap-inner-product problems, simulation of
//!   public-coin protocols through collision protocols, randomness
//!   reduction, and influence-set extraction.
//! * [`bounds`] - certified lower-bound formulas, the sigma-source
//!   correlation checks, a brute-force oracle for small instances, and
//!   scaling-exponent experiments.
//!
//! All randomness is counter-based and seeded (see [`rng`]); rerunning any
//! computation with the same seed reproduces it exactly.

pub mod bounds;
pub mod error;
pub mod measures;
pub mod protocol;
pub mod report;
pub mod rng;
pub mod smp;
pub mod source;

pub use error::{Error, Result};
pub use report::{EstimateReport, EvalKind};
pub use source::{BipartiteSource, SampleBatch, SigmaSource, SourceSpec, StandardSource};
