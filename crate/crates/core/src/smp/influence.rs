//! Influence sets of pseudo-SMP protocols.
//!
//! For a protocol on uniform n-bit inputs, the influence set L_A collects the
//! coordinates i whose conditional entropy H(X_i | R_A = r_a, M_A = m_a)
//! drops below 1/2 - the coordinates the referee (who in the pseudo-SMP
//! model sees both the randomness and the message) knows a lot about. The
//! conditional entropies are computed exactly by enumerating every input
//! consistent with the observed (randomness, message) pair; uniform inputs
//! make the conditional distribution uniform over that set.
//!
//! Rounding the per-run (L_A, L_B) pairs yields the collision-protocol
//! statistics reported in the summary.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::protocol::{draw_shared_samples, mc_accumulate};
use crate::rng::{derive_seed, SplitMix64};
use crate::source::BipartiteSource;

/// Largest input length for which the 2^n enumeration is allowed.
pub const MAX_INFLUENCE_BITS: usize = 12;

/// A small protocol in the pseudo-SMP model (the referee may see the shared
/// randomness, which is exactly what the influence analysis exploits).
/// Message maps take the player's input word and their `ell` sample halves.
/// Boxed message map of a toy protocol: (input word, sample halves).
pub type ToyMsgFn = Arc<dyn Fn(u64, &[usize]) -> u64 + Send + Sync>;

#[derive(Clone)]
pub struct PseudoSmpToy {
    pub name: String,
    pub n_bits: usize,
    pub ell: usize,
    pub msg_bits: (u32, u32),
    pub(crate) msg_a: ToyMsgFn,
    pub(crate) msg_b: ToyMsgFn,
}

impl std::fmt::Debug for PseudoSmpToy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PseudoSmpToy")
            .field("name", &self.name)
            .field("n_bits", &self.n_bits)
            .field("ell", &self.ell)
            .finish()
    }
}

/// Both players forward input bit `i` verbatim.
pub fn toy_verbatim_bit(n_bits: usize, i: usize) -> PseudoSmpToy {
    assert!(i < n_bits);
    let pick = move |x: u64, _r: &[usize]| (x >> i) & 1;
    PseudoSmpToy {
        name: format!("verbatim(bit {i})"),
        n_bits,
        ell: 0,
        msg_bits: (1, 1),
        msg_a: Arc::new(pick),
        msg_b: Arc::new(pick),
    }
}

/// Both players send a constant message.
pub fn toy_constant(n_bits: usize) -> PseudoSmpToy {
    PseudoSmpToy {
        name: "constant".into(),
        n_bits,
        ell: 0,
        msg_bits: (1, 1),
        msg_a: Arc::new(|_, _| 0),
        msg_b: Arc::new(|_, _| 0),
    }
}

/// Both players send the parity of input bits `i` and `j`.
pub fn toy_parity(n_bits: usize, i: usize, j: usize) -> PseudoSmpToy {
    assert!(i < n_bits && j < n_bits && i != j);
    let parity = move |x: u64, _r: &[usize]| ((x >> i) ^ (x >> j)) & 1;
    PseudoSmpToy {
        name: format!("parity(bits {i},{j})"),
        n_bits,
        ell: 0,
        msg_bits: (1, 1),
        msg_a: Arc::new(parity),
        msg_b: Arc::new(parity),
    }
}

#[derive(Debug, Clone)]
pub struct InfluenceSummary {
    pub trials: u64,
    /// Size threshold T = 2 * (message bits) + 4 ceil(log2 n) used for the
    /// large-set probability.
    pub threshold: usize,
    /// Pr[|L_A| >= T].
    pub pr_la_large: f64,
    /// Per-coordinate Pr[i in L_A].
    pub pr_in_la: Vec<f64>,
    /// Per-coordinate Pr[i in L_B].
    pub pr_in_lb: Vec<f64>,
    /// Per-coordinate Pr[i in L_A and i in L_B] - the extracted
    /// collision-protocol statistics.
    pub pr_in_both: Vec<f64>,
    /// The first few (L_A, L_B) runs, for inspection.
    pub sample_runs: Vec<(Vec<usize>, Vec<usize>)>,
}

fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// The influence set of one observed (randomness, message) pair, by
/// exhaustive enumeration of consistent inputs.
fn influence_set(
    msg: &ToyMsgFn,
    observed: u64,
    halves: &[usize],
    n_bits: usize,
) -> Vec<usize> {
    let mut total = 0u64;
    let mut ones = vec![0u64; n_bits];
    for x in 0u64..(1 << n_bits) {
        if msg(x, halves) == observed {
            total += 1;
            for (i, slot) in ones.iter_mut().enumerate() {
                *slot += (x >> i) & 1;
            }
        }
    }
    debug_assert!(total > 0, "the observed message must be consistent with itself");
    (0..n_bits)
        .filter(|&i| binary_entropy(ones[i] as f64 / total as f64) < 0.5)
        .collect()
}

/// Run the protocol `trials` times on uniform inputs and fresh shared
/// randomness, extracting (L_A, L_B) exactly per run.
pub fn influence_sets(
    s: &BipartiteSource,
    toy: &PseudoSmpToy,
    trials: u64,
    seed: u64,
) -> Result<InfluenceSummary> {
    if toy.n_bits == 0 || toy.n_bits > MAX_INFLUENCE_BITS {
        return Err(Error::Capacity {
            what: format!("influence enumeration for '{}'", toy.name),
            required: toy.n_bits as u128,
            budget: MAX_INFLUENCE_BITS as u128,
            unit: "input bits",
        });
    }
    let n = toy.n_bits;
    struct Acc {
        la_large: u64,
        in_la: Vec<u64>,
        in_lb: Vec<u64>,
        in_both: Vec<u64>,
        runs: Vec<(Vec<usize>, Vec<usize>)>,
    }
    let log_n = (usize::BITS - (n - 1).leading_zeros()).max(1) as usize;
    let threshold = 2 * (toy.msg_bits.0 + toy.msg_bits.1) as usize + 4 * log_n;
    let parts = mc_accumulate(
        trials,
        || Acc {
            la_large: 0,
            in_la: vec![0; n],
            in_lb: vec![0; n],
            in_both: vec![0; n],
            runs: Vec::new(),
        },
        |acc, t| {
            let master = derive_seed(seed, t);
            let (us, vs) = draw_shared_samples(s, toy.ell, derive_seed(master, 0));
            let mut rng = SplitMix64::new(derive_seed(master, 1));
            let x = rng.next_u64() & ((1u64 << n) - 1);
            let y = rng.next_u64() & ((1u64 << n) - 1);
            let ma = (toy.msg_a)(x, &us);
            let mb = (toy.msg_b)(y, &vs);
            let la = influence_set(&toy.msg_a, ma, &us, n);
            let lb = influence_set(&toy.msg_b, mb, &vs, n);
            if la.len() >= threshold {
                acc.la_large += 1;
            }
            for &i in &la {
                acc.in_la[i] += 1;
            }
            for &i in &lb {
                acc.in_lb[i] += 1;
            }
            for i in 0..n {
                if la.contains(&i) && lb.contains(&i) {
                    acc.in_both[i] += 1;
                }
            }
            if acc.runs.len() < 4 {
                acc.runs.push((la, lb));
            }
            let _ = y;
        },
    );
    let mut la_large = 0u64;
    let mut in_la = vec![0u64; n];
    let mut in_lb = vec![0u64; n];
    let mut in_both = vec![0u64; n];
    let mut sample_runs = Vec::new();
    for p in parts {
        la_large += p.la_large;
        for i in 0..n {
            in_la[i] += p.in_la[i];
            in_lb[i] += p.in_lb[i];
            in_both[i] += p.in_both[i];
        }
        if sample_runs.len() < 4 {
            sample_runs.extend(p.runs);
            sample_runs.truncate(4);
        }
    }
    let frac = |v: Vec<u64>| -> Vec<f64> {
        v.into_iter().map(|h| h as f64 / trials as f64).collect()
    };
    Ok(InfluenceSummary {
        trials,
        threshold,
        pr_la_large: la_large as f64 / trials as f64,
        pr_in_la: frac(in_la),
        pr_in_lb: frac(in_lb),
        pr_in_both: frac(in_both),
        sample_runs,
    })
}
