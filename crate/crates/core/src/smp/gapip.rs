//! Gap inner product.
//!
//! GAPIP_{n,m} receives n blocks of m-bit vectors on each side and promises
//! that at least 2n/3 of the per-block GF(2) inner products share a value;
//! the answer is that value, with non-promise inputs mapped to bottom. The
//! naive protocol picks a common random block index, each player forwards
//! their block, and the referee outputs the block inner product; on promise
//! inputs a single block errs with probability at most 1/3.

use crate::error::{Error, Result};
use crate::protocol::mc_accumulate;
use crate::report::EstimateReport;
use crate::rng::{derive_seed, SplitMix64};
use crate::source::SigmaSource;

use super::{bit_mask, index_below, PublicCoinSmp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapipValue {
    Zero,
    One,
    Bot,
}

/// GF(2) inner product of two packed bit vectors.
#[inline]
pub fn inner_product_bit(x: u64, y: u64) -> u8 {
    ((x & y).count_ones() & 1) as u8
}

/// Evaluate the promise function with exact threshold arithmetic
/// (3 * count >= 2n, no floating point).
pub fn gapip_eval(xs: &[u64], ys: &[u64]) -> GapipValue {
    assert_eq!(xs.len(), ys.len(), "input vectors must have equal length");
    let n = xs.len();
    let ones: usize = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| inner_product_bit(x, y) as usize)
        .sum();
    let zeros = n - ones;
    if 3 * zeros >= 2 * n {
        GapipValue::Zero
    } else if 3 * ones >= 2 * n {
        GapipValue::One
    } else {
        GapipValue::Bot
    }
}

/// A sampled instance together with its recomputed truth value.
#[derive(Debug, Clone)]
pub struct GapipInstance {
    pub n: usize,
    pub m: u32,
    pub xs: Vec<u64>,
    pub ys: Vec<u64>,
    pub truth: GapipValue,
}

/// Sample a promise instance with answer `b`: ceil(2n/3) random coordinates
/// receive sigma_{m,b} pairs (inner product exactly b) and the rest are
/// uniform. The truth field is recomputed through [`gapip_eval`]; the forced
/// coordinates already meet the threshold, so the rare resample loop guards
/// against nothing but miscounting.
pub fn sample_gapip_instance(n: usize, m: u32, b: u8, seed: u64) -> Result<GapipInstance> {
    if n == 0 {
        return Err(Error::InvalidParameter("need n >= 1".into()));
    }
    let sigma = SigmaSource::new(m, b)?;
    let want = if b == 0 { GapipValue::Zero } else { GapipValue::One };
    let forced = (2 * n).div_ceil(3);
    for attempt in 0..100u64 {
        let mut rng = SplitMix64::new(derive_seed(seed, attempt));
        let chosen = rng.subset(n, forced);
        let mut xs = vec![0u64; n];
        let mut ys = vec![0u64; n];
        let mut is_forced = vec![false; n];
        for &i in &chosen {
            is_forced[i as usize] = true;
        }
        for i in 0..n {
            if is_forced[i] {
                let (x, y) = sigma.sample_pair(&mut rng);
                xs[i] = x;
                ys[i] = y;
            } else {
                xs[i] = rng.next_u64() & bit_mask(m);
                ys[i] = rng.next_u64() & bit_mask(m);
            }
        }
        let truth = gapip_eval(&xs, &ys);
        if truth == want {
            return Ok(GapipInstance { n, m, xs, ys, truth });
        }
    }
    Err(Error::Numeric(
        "gap-inner-product sampler failed to hit the promise".into(),
    ))
}

/// The naive public-coin protocol: a shared random index i (log n plus six
/// slack bits to keep the index near-uniform), messages x_i and y_i, referee
/// answers their inner product. Cost 2m message bits.
pub fn gapip_naive_protocol(n: usize, m: u32) -> Result<PublicCoinSmp> {
    if n == 0 {
        return Err(Error::InvalidParameter("need n >= 1".into()));
    }
    if m == 0 || m > 60 {
        return Err(Error::InvalidParameter(format!(
            "block width must lie in 1..=60, got {m}"
        )));
    }
    let rand_bits = (usize::BITS - (n - 1).leading_zeros()).max(1) + 6;
    let pick = move |z: &[u64], r: u64| z[index_below(r, n, rand_bits)];
    Ok(PublicCoinSmp {
        name: format!("gapip-naive(n={n}, m={m})"),
        input_words: n,
        rand_bits,
        msg_bits: (m, m),
        msg_a: std::sync::Arc::new(pick),
        msg_b: std::sync::Arc::new(pick),
        referee: std::sync::Arc::new(inner_product_bit),
    })
}

/// Success rate of the naive protocol over freshly sampled promise instances
/// (answer bit alternates with the trial index).
pub fn measure_gapip_naive(n: usize, m: u32, trials: u64, seed: u64) -> Result<EstimateReport> {
    let pr = gapip_naive_protocol(n, m)?;
    let parts = mc_accumulate(
        trials,
        || 0u64,
        |hits, t| {
            let b = (t & 1) as u8;
            let inst = sample_gapip_instance(n, m, b, derive_seed(seed, t))
                .expect("promise sampler cannot fail for valid (n, m)");
            let mut rng = SplitMix64::new(derive_seed(seed.wrapping_add(0x5151), t));
            let r = rng.next_u64() & bit_mask(pr.rand_bits);
            if pr.answer(&inst.xs, &inst.ys, r) == b {
                *hits += 1;
            }
        },
    );
    Ok(EstimateReport::bernoulli(
        parts.into_iter().sum(),
        trials,
        seed,
    ))
}
