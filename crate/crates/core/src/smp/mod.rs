//! Simultaneous message passing.
//!
//! Alice and Bob each see one input half and their half of the shared
//! randomness, and each sends a single message to a referee who outputs the
//! answer. In the standard model the referee's output is structurally a
//! function of the two messages alone (the closure receives nothing else);
//! the pseudo-SMP variant used for influence analysis additionally exposes
//! the shared randomness to the referee and lives in
//! [`influence::PseudoSmpToy`].

mod equality;
mod gapip;
mod influence;
mod simulate;

pub use equality::{
    equality_protocol, find_witness_sets, measure_equality_error, round_accept_rate,
    EqualityProtocol, WitnessSets,
};
pub use gapip::{
    gapip_eval, gapip_naive_protocol, measure_gapip_naive, sample_gapip_instance, GapipInstance,
    GapipValue,
};
pub use influence::{
    influence_sets, toy_constant, toy_parity, toy_verbatim_bit, InfluenceSummary, PseudoSmpToy,
};
pub use simulate::{run_simulated, run_single_repetition, simulate_with_collision, SimulatedSmp};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::protocol::mc_accumulate;
use crate::report::EstimateReport;
use crate::rng::{derive_seed, SplitMix64};

/// Boxed message map of a public-coin protocol: (input words, randomness).
pub type PublicMsgFn = Arc<dyn Fn(&[u64], u64) -> u64 + Send + Sync>;
/// Boxed referee: a pure function of the two messages.
pub type RefereeFn = Arc<dyn Fn(u64, u64) -> u8 + Send + Sync>;

/// An SMP protocol whose shared randomness is R perfect public bits. Inputs
/// are slices of 64-bit words; messages are at most 64 bits. The referee is a
/// pure function of the two messages.
#[derive(Clone)]
pub struct PublicCoinSmp {
    pub name: String,
    pub input_words: usize,
    pub rand_bits: u32,
    pub msg_bits: (u32, u32),
    pub(crate) msg_a: PublicMsgFn,
    pub(crate) msg_b: PublicMsgFn,
    pub(crate) referee: RefereeFn,
}

impl std::fmt::Debug for PublicCoinSmp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PublicCoinSmp")
            .field("name", &self.name)
            .field("rand_bits", &self.rand_bits)
            .field("msg_bits", &self.msg_bits)
            .finish()
    }
}

impl PublicCoinSmp {
    pub fn message_a(&self, x: &[u64], r: u64) -> u64 {
        (self.msg_a)(x, r)
    }

    pub fn message_b(&self, y: &[u64], r: u64) -> u64 {
        (self.msg_b)(y, r)
    }

    pub fn referee(&self, ma: u64, mb: u64) -> u8 {
        (self.referee)(ma, mb)
    }

    /// Total message bits (both players).
    pub fn cost_bits(&self) -> u32 {
        self.msg_bits.0 + self.msg_bits.1
    }

    pub fn answer(&self, x: &[u64], y: &[u64], r: u64) -> u8 {
        self.referee((self.msg_a)(x, r), (self.msg_b)(y, r))
    }
}

pub(crate) fn bit_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Map an R-bit random word to an index below `n` with at most one part in
/// 2^(R - log2 n) non-uniformity (multiply-shift).
pub(crate) fn index_below(r: u64, n: usize, rand_bits: u32) -> usize {
    ((r as u128 * n as u128) >> rand_bits) as usize
}

/// Success probability of a public-coin protocol on a fixed input pair with
/// known truth, over fresh public randomness.
pub fn run_public_coin(
    pr: &PublicCoinSmp,
    x: &[u64],
    y: &[u64],
    truth: u8,
    trials: u64,
    seed: u64,
) -> EstimateReport {
    let mask = bit_mask(pr.rand_bits);
    let parts = mc_accumulate(
        trials,
        || 0u64,
        |hits, t| {
            let mut rng = SplitMix64::new(derive_seed(seed, t));
            let r = rng.next_u64() & mask;
            if pr.answer(x, y, r) == truth {
                *hits += 1;
            }
        },
    );
    EstimateReport::bernoulli(parts.into_iter().sum(), trials, seed)
}

/// Equality on n-bit strings by public random inner-product hashes: the
/// public string is `reps` fresh n-bit vectors, each player sends the GF(2)
/// inner products of their input with every vector, and the referee accepts
/// iff the hash words agree. Worst-case error 2^-reps on unequal inputs.
pub fn eq_inner_product_hash(n: usize, reps: usize) -> Result<PublicCoinSmp> {
    if n == 0 || reps == 0 {
        return Err(Error::InvalidParameter("need n >= 1 and reps >= 1".into()));
    }
    let total_bits = n
        .checked_mul(reps)
        .filter(|&b| b <= 64)
        .ok_or_else(|| Error::Capacity {
            what: "inner-product hash randomness".into(),
            required: (n * reps) as u128,
            budget: 64,
            unit: "public bits",
        })?;
    let hash = move |x: &[u64], r: u64| -> u64 {
        let mut out = 0u64;
        for j in 0..reps {
            let rj = (r >> (j * n)) & bit_mask(n as u32);
            out |= (((x[0] & rj).count_ones() & 1) as u64) << j;
        }
        out
    };
    Ok(PublicCoinSmp {
        name: format!("eq-hash(n={n}, reps={reps})"),
        input_words: 1,
        rand_bits: total_bits as u32,
        msg_bits: (reps as u32, reps as u32),
        msg_a: Arc::new(hash),
        msg_b: Arc::new(hash),
        referee: Arc::new(|ma, mb| (ma == mb) as u8),
    })
}

/// Newman-style randomness reduction: pre-sample `table_size` public strings
/// at build time; the new protocol draws only an index (ceil(log2 T) bits).
/// The measured error can grow by the statistical deficiency of the sampled
/// table; that is reported by measurement, not proven.
pub fn reduce_randomness(
    base: &PublicCoinSmp,
    table_size: usize,
    seed: u64,
) -> Result<PublicCoinSmp> {
    if table_size == 0 {
        return Err(Error::InvalidParameter("table must be non-empty".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let mask = bit_mask(base.rand_bits);
    let table: Arc<Vec<u64>> = Arc::new((0..table_size).map(|_| rng.next_u64() & mask).collect());
    let new_bits = (usize::BITS - (table_size - 1).leading_zeros()).max(1);
    let (ta, tb) = (table.clone(), table);
    let (ma, mb) = (base.msg_a.clone(), base.msg_b.clone());
    Ok(PublicCoinSmp {
        name: format!("{}[table {}]", base.name, table_size),
        input_words: base.input_words,
        rand_bits: new_bits,
        msg_bits: base.msg_bits,
        msg_a: Arc::new(move |x: &[u64], r: u64| {
            ma(x, ta[index_below(r, ta.len(), new_bits)])
        }),
        msg_b: Arc::new(move |y: &[u64], r: u64| {
            mb(y, tb[index_below(r, tb.len(), new_bits)])
        }),
        referee: base.referee.clone(),
    })
}
