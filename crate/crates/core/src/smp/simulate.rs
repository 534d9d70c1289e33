//! Simulation of public-coin SMP protocols over an arbitrary source.
//!
//! The players run a symmetrized collision protocol over the domain of the
//! base protocol's 2^R random strings. Alice sends every string r in her set
//! together with the base message alpha(x, r); Bob does the same. The
//! referee picks a uniform element of the intersection (uniform on the whole
//! domain by the symmetrization guarantee) and evaluates the base referee on
//! the attached messages; an empty intersection yields an arbitrary fixed
//! answer. With the empty-intersection parameter s = (1-2 eps)/(4-4 eps) the
//! single-run success is at least (1-s)(1-eps) > 1/2, and a majority over
//! three independent runs pushes the error below 1/3.

use crate::error::{Error, Result};
use crate::protocol::{
    draw_shared_samples, intersect_sorted, mc_accumulate, symmetrize, CollisionProtocol,
};
use crate::report::EstimateReport;
use crate::rng::{derive_seed, SplitMix64};
use crate::source::BipartiteSource;

use super::PublicCoinSmp;

/// Budget on the base protocol's public randomness (the collision domain is
/// 2^R).
pub const MAX_BASE_RAND_BITS: u32 = 20;

/// A base public-coin protocol wrapped to run over a shared source.
#[derive(Debug, Clone)]
pub struct SimulatedSmp {
    pub base: PublicCoinSmp,
    pub collision: CollisionProtocol,
    pub source: BipartiteSource,
    pub eps: f64,
    /// Empty-intersection parameter (1 - 2 eps) / (4 - 4 eps).
    pub s_param: f64,
    /// Outer majority repetitions.
    pub majority_reps: usize,
    /// Worst-case bits one player sends per repetition:
    /// max_out * (R + base message cost).
    pub cost_bits_per_rep: u64,
    /// Shared samples consumed per repetition.
    pub rho_samples_per_rep: u64,
}

/// Wrap `base` (error probability at most `eps` < 1/2 on its promise) into a
/// protocol using only samples of `s`.
pub fn simulate_with_collision(
    s: &BipartiteSource,
    base: &PublicCoinSmp,
    eps: f64,
) -> Result<SimulatedSmp> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "base error must lie in (0, 1/2), got {eps}"
        )));
    }
    if base.rand_bits > MAX_BASE_RAND_BITS {
        return Err(Error::Capacity {
            what: format!("collision domain for '{}'", base.name),
            required: base.rand_bits as u128,
            budget: MAX_BASE_RAND_BITS as u128,
            unit: "public randomness bits",
        });
    }
    let s_param = (1.0 - 2.0 * eps) / (4.0 - 4.0 * eps);
    let domain = 1usize << base.rand_bits;
    let collision = symmetrize(s, domain, s_param)?;
    let cost_bits_per_rep =
        collision.max_out as u64 * (base.rand_bits as u64 + base.cost_bits() as u64);
    let rho_samples_per_rep = collision.ell as u64;
    Ok(SimulatedSmp {
        base: base.clone(),
        collision,
        source: s.clone(),
        eps,
        s_param,
        majority_reps: 3,
        cost_bits_per_rep,
        rho_samples_per_rep,
    })
}

impl SimulatedSmp {
    /// One full execution (majority over the repetitions).
    pub fn answer(&self, x: &[u64], y: &[u64], trial_seed: u64) -> u8 {
        let mut votes = 0usize;
        for rep in 0..self.majority_reps {
            let master = derive_seed(trial_seed, rep as u64);
            if self.answer_once(x, y, master) == 1 {
                votes += 1;
            }
        }
        (votes * 2 > self.majority_reps) as u8
    }

    /// A single repetition: collision protocol, then the base referee on a
    /// uniform common string.
    pub fn answer_once(&self, x: &[u64], y: &[u64], master: u64) -> u8 {
        let (us, vs) = draw_shared_samples(&self.source, self.collision.ell, derive_seed(master, 0));
        let (a, b) = self.collision.run(&us, &vs, derive_seed(master, 1));
        let common = intersect_sorted(&a, &b);
        if common.is_empty() {
            return 0;
        }
        let mut referee_rng = SplitMix64::new(derive_seed(master, 2));
        let r = common[referee_rng.next_below(common.len() as u64) as usize] as u64;
        self.base
            .referee(self.base.message_a(x, r), self.base.message_b(y, r))
    }
}

/// Success probability of the simulated protocol on a fixed input pair.
pub fn run_simulated(
    sim: &SimulatedSmp,
    x: &[u64],
    y: &[u64],
    truth: u8,
    trials: u64,
    seed: u64,
) -> EstimateReport {
    let parts = mc_accumulate(
        trials,
        || 0u64,
        |hits, t| {
            if sim.answer(x, y, derive_seed(seed, t)) == truth {
                *hits += 1;
            }
        },
    );
    EstimateReport::bernoulli(parts.into_iter().sum(), trials, seed)
}

/// Single-repetition success probability (for checking the
/// (1-s)(1-eps) > 1/2 pre-amplification floor).
pub fn run_single_repetition(
    sim: &SimulatedSmp,
    x: &[u64],
    y: &[u64],
    truth: u8,
    trials: u64,
    seed: u64,
) -> EstimateReport {
    let parts = mc_accumulate(
        trials,
        || 0u64,
        |hits, t| {
            if sim.answer_once(x, y, derive_seed(seed, t)) == truth {
                *hits += 1;
            }
        },
    );
    EstimateReport::bernoulli(parts.into_iter().sum(), trials, seed)
}
