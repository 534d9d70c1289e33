//! Equality over an arbitrary non-product source.
//!
//! Any non-product rho admits witness sets Lambda_a, Lambda_b with
//! gamma = Pr[u in Lambda_a, v in Lambda_b] different from the product of the
//! marginal probabilities gamma'. The players conceptually share 2^n i.i.d.
//! register pairs, one per input string; Alice reads the register of her
//! input x and reports whether its U-half lies in Lambda_a, Bob likewise for
//! y. Equal inputs read the same register (accept rate gamma); distinct
//! inputs read independent registers (accept rate gamma'). Repeating t =
//! ceil(4 ln(1/delta) / (gamma - gamma')^2) rounds and thresholding the joint
//! accept count at the midpoint drives the error below delta by Hoeffding.
//!
//! Registers are realized lazily: register (round, x) is generated by a keyed
//! deterministic generator applied to (master seed, round, x), so both
//! players read consistent registers without materializing 2^n pairs.

use crate::error::{Error, Result};
use crate::protocol::mc_accumulate;
use crate::report::EstimateReport;
use crate::rng::{derive_seed, SplitMix64};
use crate::source::BipartiteSource;

/// Subsets of U and V witnessing non-productness, with the exact joint and
/// product probabilities.
#[derive(Debug, Clone)]
pub struct WitnessSets {
    pub lambda_a: Vec<bool>,
    pub lambda_b: Vec<bool>,
    pub gamma: f64,
    pub gamma_prime: f64,
}

impl WitnessSets {
    pub fn advantage(&self) -> f64 {
        (self.gamma - self.gamma_prime).abs()
    }
}

const EXHAUSTIVE_LIMIT: usize = 12;

/// Find witness sets maximizing |gamma - gamma'|. Exhaustive over one side
/// when an alphabet has at most 12 symbols (the other side's optimum is then
/// determined by a sign rule, so this is globally optimal); otherwise greedy
/// alternating thresholding.
pub fn find_witness_sets(s: &BipartiteSource) -> Result<WitnessSets> {
    if s.is_product(1e-12) {
        return Err(Error::ProductSource);
    }
    let (nu, nv) = (s.u_size(), s.v_size());
    // deviation matrix D = rho - rho_U (x) rho_V
    let (mu, mv) = s.marginals();
    let dev = |u: usize, v: usize| s.prob(u, v) - mu[u] * mv[v];

    let best = if nu <= EXHAUSTIVE_LIMIT {
        exhaustive_over_u(s, &dev, nu, nv)
    } else if nv <= EXHAUSTIVE_LIMIT {
        let t = exhaustive_over_u(&transpose(s)?, &|v, u| dev(u, v), nv, nu);
        (t.1, t.0, t.2)
    } else {
        greedy_witness(&dev, nu, nv)
    };
    let (lambda_a, lambda_b, _) = best;

    let gamma: f64 = (0..nu)
        .flat_map(|u| (0..nv).map(move |v| (u, v)))
        .filter(|&(u, v)| lambda_a[u] && lambda_b[v])
        .map(|(u, v)| s.prob(u, v))
        .sum();
    let pa: f64 = (0..nu).filter(|&u| lambda_a[u]).map(|u| mu[u]).sum();
    let pb: f64 = (0..nv).filter(|&v| lambda_b[v]).map(|v| mv[v]).sum();
    Ok(WitnessSets {
        lambda_a,
        lambda_b,
        gamma,
        gamma_prime: pa * pb,
    })
}

fn transpose(s: &BipartiteSource) -> Result<BipartiteSource> {
    let mut probs = vec![0.0; s.u_size() * s.v_size()];
    for u in 0..s.u_size() {
        for v in 0..s.v_size() {
            probs[v * s.u_size() + u] = s.prob(u, v);
        }
    }
    BipartiteSource::new(format!("{}^T", s.label()), s.v_size(), s.u_size(), probs)
}

fn exhaustive_over_u(
    _s: &BipartiteSource,
    dev: &dyn Fn(usize, usize) -> f64,
    nu: usize,
    nv: usize,
) -> (Vec<bool>, Vec<bool>, f64) {
    let mut best = (vec![false; nu], vec![false; nv], -1.0);
    for mask in 1u32..(1 << nu) {
        let lambda_a: Vec<bool> = (0..nu).map(|u| mask & (1 << u) != 0).collect();
        let col: Vec<f64> = (0..nv)
            .map(|v| (0..nu).filter(|&u| lambda_a[u]).map(|u| dev(u, v)).sum())
            .collect();
        let pos: f64 = col.iter().filter(|&&x| x > 0.0).sum();
        let neg: f64 = col.iter().filter(|&&x| x < 0.0).sum();
        for (delta, keep_positive) in [(pos, true), (-neg, false)] {
            if delta > best.2 {
                let lambda_b: Vec<bool> = col
                    .iter()
                    .map(|&x| if keep_positive { x > 0.0 } else { x < 0.0 })
                    .collect();
                best = (lambda_a.clone(), lambda_b, delta);
            }
        }
    }
    best
}

fn greedy_witness(
    dev: &dyn Fn(usize, usize) -> f64,
    nu: usize,
    nv: usize,
) -> (Vec<bool>, Vec<bool>, f64) {
    let mut best = (vec![false; nu], vec![false; nv], -1.0);
    // start from each single column, alternate the sign rule on both sides
    for v0 in 0..nv {
        for positive in [true, false] {
            let mut lb = vec![false; nv];
            lb[v0] = true;
            let mut la = vec![false; nu];
            for _ in 0..16 {
                for (u, slot) in la.iter_mut().enumerate() {
                    let row: f64 = (0..nv).filter(|&v| lb[v]).map(|v| dev(u, v)).sum();
                    *slot = if positive { row > 0.0 } else { row < 0.0 };
                }
                for (v, slot) in lb.iter_mut().enumerate() {
                    let col: f64 = (0..nu).filter(|&u| la[u]).map(|u| dev(u, v)).sum();
                    *slot = if positive { col > 0.0 } else { col < 0.0 };
                }
            }
            let delta: f64 = (0..nu)
                .flat_map(|u| (0..nv).map(move |v| (u, v)))
                .filter(|&(u, v)| la[u] && lb[v])
                .map(|(u, v)| dev(u, v))
                .sum();
            if delta.abs() > best.2 {
                best = (la, lb, delta.abs());
            }
        }
    }
    best
}

/// The equality protocol of a non-product source for n-bit inputs.
#[derive(Debug, Clone)]
pub struct EqualityProtocol {
    source: BipartiteSource,
    pub n: usize,
    pub witness: WitnessSets,
    /// Number of repeated rounds (= message bits per player).
    pub rounds: usize,
    /// Referee threshold on the joint-accept count: t (gamma + gamma') / 2.
    pub threshold: f64,
    pub error_target: f64,
}

/// Build the equality protocol: rounds = ceil(4 ln(1/error_target) / Delta^2)
/// where Delta = |gamma - gamma'|.
pub fn equality_protocol(
    s: &BipartiteSource,
    n: usize,
    error_target: f64,
) -> Result<EqualityProtocol> {
    if n == 0 || n > 30 {
        return Err(Error::InvalidParameter(format!(
            "input length must lie in 1..=30, got {n}"
        )));
    }
    if !(error_target > 0.0 && error_target < 1.0) {
        return Err(Error::InvalidParameter(
            "error target must lie in (0,1)".into(),
        ));
    }
    let witness = find_witness_sets(s)?;
    let delta = witness.advantage();
    let rounds = (4.0 * (1.0 / error_target).ln() / (delta * delta)).ceil() as usize;
    let threshold = rounds as f64 * (witness.gamma + witness.gamma_prime) / 2.0;
    Ok(EqualityProtocol {
        source: s.clone(),
        n,
        witness,
        rounds,
        threshold,
        error_target,
    })
}

impl EqualityProtocol {
    /// Register (round, x): a fresh joint sample, read consistently by both
    /// players through the keyed generator.
    fn register(&self, master_seed: u64, round: usize, x: u64) -> (usize, usize) {
        let seed = derive_seed(derive_seed(master_seed, round as u64), x);
        self.source.sample_pair(&mut SplitMix64::new(seed))
    }

    /// Alice's bit for one round.
    pub fn alice_bit(&self, master_seed: u64, round: usize, x: u64) -> bool {
        let (u, _) = self.register(master_seed, round, x);
        self.witness.lambda_a[u]
    }

    /// Bob's bit for one round.
    pub fn bob_bit(&self, master_seed: u64, round: usize, y: u64) -> bool {
        let (_, v) = self.register(master_seed, round, y);
        self.witness.lambda_b[v]
    }

    /// Referee decision for one execution: count rounds with alpha = beta = 1
    /// and compare against the midpoint threshold (ties count as "equal").
    pub fn decide(&self, x: u64, y: u64, master_seed: u64) -> bool {
        assert!(x < (1u64 << self.n) && y < (1u64 << self.n));
        let mut joint = 0usize;
        for r in 0..self.rounds {
            if self.alice_bit(master_seed, r, x) && self.bob_bit(master_seed, r, y) {
                joint += 1;
            }
        }
        joint as f64 >= self.threshold
    }

    /// Message bits per player.
    pub fn cost_bits_per_player(&self) -> usize {
        self.rounds
    }

    /// Formal shared-sample consumption: t rounds times 2^n registers.
    pub fn rho_samples(&self) -> u128 {
        (self.rounds as u128) << self.n
    }
}

/// Probability that the protocol answers "x = y?" correctly, over fresh
/// shared randomness.
pub fn measure_equality_error(
    pr: &EqualityProtocol,
    x: u64,
    y: u64,
    trials: u64,
    seed: u64,
) -> EstimateReport {
    let truth = x == y;
    let parts = mc_accumulate(
        trials,
        || 0u64,
        |hits, t| {
            if pr.decide(x, y, derive_seed(seed, t)) == truth {
                *hits += 1;
            }
        },
    );
    EstimateReport::bernoulli(parts.into_iter().sum(), trials, seed)
}

/// Single-round joint-accept rate; compare with gamma (x = y) or gamma'.
pub fn round_accept_rate(
    pr: &EqualityProtocol,
    x: u64,
    y: u64,
    trials: u64,
    seed: u64,
) -> EstimateReport {
    let parts = mc_accumulate(
        trials,
        || 0u64,
        |hits, t| {
            let master = derive_seed(seed, t);
            if pr.alice_bit(master, 0, x) && pr.bob_bit(master, 0, y) {
                *hits += 1;
            }
        },
    );
    EstimateReport::bernoulli(parts.into_iter().sum(), trials, seed)
}
