//! Finite bipartite sources of shared randomness.
//!
//! A source is a joint distribution rho on U x V; Alice sees the U-half and
//! Bob the V-half of each i.i.d. sample. Alphabets are indexed 0..|U|-1 and
//! 0..|V|-1, and the support is enumerated row-major (u first, then v); all
//! downstream protocols are index-based, so this order is part of the
//! contract.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::kahan_sum;
use crate::rng::SplitMix64;

/// Maximum number of dense matrix entries a source may hold.
pub const DENSE_BUDGET: usize = 1 << 22;

/// Tolerance for the "entries sum to one" invariant.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// The named sources used throughout: perfect and private randomness, shared
/// disjointness, the binary symmetric channel, and the inner-product source
/// sigma_{m,b} (uniform over pairs of m-bit vectors with u.v = b mod 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardSource {
    Perf,
    Priv,
    Disj,
    Bsc(f64),
    Sigma { m: u32, b: u8 },
}

impl StandardSource {
    /// Parse a compact command-line name: `perf`, `priv`, `disj`, `bsc:0.2`,
    /// `sigma:8:0`.
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "perf" => Some(Self::Perf),
            "priv" => Some(Self::Priv),
            "disj" => Some(Self::Disj),
            _ => {
                let mut parts = name.split(':');
                match parts.next()? {
                    "bsc" => {
                        let p: f64 = parts.next()?.parse().ok()?;
                        parts.next().is_none().then_some(Self::Bsc(p))
                    }
                    "sigma" => {
                        let m: u32 = parts.next()?.parse().ok()?;
                        let b: u8 = parts.next()?.parse().ok()?;
                        parts.next().is_none().then_some(Self::Sigma { m, b })
                    }
                    _ => None,
                }
            }
        }
    }
}

/// A source-definition file: either `{"standard": ...}` or an explicit matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceSpec {
    Standard {
        standard: StandardSource,
    },
    Explicit {
        label: String,
        u_size: usize,
        v_size: usize,
        probs: Vec<Vec<f64>>,
    },
}

impl SourceSpec {
    pub fn build(&self) -> Result<BipartiteSource> {
        match self {
            SourceSpec::Standard { standard } => BipartiteSource::standard(standard),
            SourceSpec::Explicit {
                label,
                u_size,
                v_size,
                probs,
            } => {
                if probs.len() != *u_size || probs.iter().any(|row| row.len() != *v_size) {
                    return Err(Error::InvalidSource(format!(
                        "probs must be a {u_size} x {v_size} matrix"
                    )));
                }
                let flat: Vec<f64> = probs.iter().flatten().copied().collect();
                BipartiteSource::new(label.clone(), *u_size, *v_size, flat)
            }
        }
    }
}

/// Dense finite joint distribution on U x V.
#[derive(Debug, Clone)]
pub struct BipartiteSource {
    label: String,
    u_size: usize,
    v_size: usize,
    probs: Vec<f64>, // row-major, len u_size * v_size
    support: Vec<(u32, u32)>,
    cumulative: Vec<f64>, // cumulative mass over `support`
    marginal_u: Vec<f64>,
    marginal_v: Vec<f64>,
}

impl BipartiteSource {
    /// Validate and build a source from a row-major probability matrix.
    pub fn new(
        label: impl Into<String>,
        u_size: usize,
        v_size: usize,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let label = label.into();
        if u_size == 0 || v_size == 0 {
            return Err(Error::InvalidSource("alphabets must be non-empty".into()));
        }
        let entries = u_size
            .checked_mul(v_size)
            .ok_or_else(|| Error::InvalidSource("matrix size overflow".into()))?;
        if entries > DENSE_BUDGET {
            return Err(Error::Capacity {
                what: format!("dense source '{label}'"),
                required: entries as u128,
                budget: DENSE_BUDGET as u128,
                unit: "matrix entries",
            });
        }
        if probs.len() != entries {
            return Err(Error::InvalidSource(format!(
                "expected {entries} entries, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidSource(
                "entries must be finite and non-negative".into(),
            ));
        }
        let total = kahan_sum(probs.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidSource(format!(
                "normalization: entries sum to {total}, not 1 (tolerance {NORMALIZATION_TOL})"
            )));
        }

        let mut marginal_u = vec![0.0; u_size];
        let mut marginal_v = vec![0.0; v_size];
        let mut support = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for u in 0..u_size {
            marginal_u[u] = kahan_sum(probs[u * v_size..(u + 1) * v_size].iter().copied());
            for v in 0..v_size {
                let p = probs[u * v_size + v];
                marginal_v[v] += p;
                if p > 0.0 {
                    acc += p;
                    support.push((u as u32, v as u32));
                    cumulative.push(acc);
                }
            }
        }
        Ok(Self {
            label,
            u_size,
            v_size,
            probs,
            support,
            cumulative,
            marginal_u,
            marginal_v,
        })
    }

    pub fn standard(spec: &StandardSource) -> Result<Self> {
        match spec {
            StandardSource::Perf => Self::perf(),
            StandardSource::Priv => Self::private(),
            StandardSource::Disj => Self::disj(),
            StandardSource::Bsc(p) => Self::bsc(*p),
            StandardSource::Sigma { m, b } => SigmaSource::new(*m, *b)?.to_dense(),
        }
    }

    /// rho_perf: uniform on {00, 11}.
    pub fn perf() -> Result<Self> {
        Self::new("perf", 2, 2, vec![0.5, 0.0, 0.0, 0.5])
    }

    /// rho_priv: uniform on {0,1}^2 (independent fair bits).
    pub fn private() -> Result<Self> {
        Self::new("priv", 2, 2, vec![0.25, 0.25, 0.25, 0.25])
    }

    /// rho_disj: uniform on {00, 01, 10}.
    pub fn disj() -> Result<Self> {
        let t = 1.0 / 3.0;
        Self::new("disj", 2, 2, vec![t, t, t, 0.0])
    }

    /// rho_BSC_p: matched bits flipped independently with probability p, i.e.
    /// mass (1-p)/2 on each of 00, 11 and p/2 on each of 01, 10.
    pub fn bsc(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "bsc flip probability must lie in [0,1], got {p}"
            )));
        }
        let same = (1.0 - p) / 2.0;
        let diff = p / 2.0;
        Self::new(format!("bsc({p})"), 2, 2, vec![same, diff, diff, same])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn u_size(&self) -> usize {
        self.u_size
    }

    pub fn v_size(&self) -> usize {
        self.v_size
    }

    #[inline]
    pub fn prob(&self, u: usize, v: usize) -> f64 {
        self.probs[u * self.v_size + v]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn marginal_u(&self) -> &[f64] {
        &self.marginal_u
    }

    pub fn marginal_v(&self) -> &[f64] {
        &self.marginal_v
    }

    /// Row and column sums (rho_U, rho_V).
    pub fn marginals(&self) -> (&[f64], &[f64]) {
        (&self.marginal_u, &self.marginal_v)
    }

    /// Support pairs in row-major order, positive mass only.
    pub fn support(&self) -> &[(u32, u32)] {
        &self.support
    }

    /// True iff rho equals the product of its marginals entry-wise within `tol`.
    pub fn is_product(&self, tol: f64) -> bool {
        assert!(tol >= 0.0);
        for u in 0..self.u_size {
            for v in 0..self.v_size {
                let diff = self.prob(u, v) - self.marginal_u[u] * self.marginal_v[v];
                if diff.abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// True iff either marginal is a point mass (the source is deterministic
    /// from one player's point of view).
    pub fn is_degenerate(&self) -> bool {
        let supp_u = self.marginal_u.iter().filter(|&&p| p > 0.0).count();
        let supp_v = self.marginal_v.iter().filter(|&&p| p > 0.0).count();
        supp_u <= 1 || supp_v <= 1
    }

    /// The product source with the same marginals.
    pub fn product_of_marginals(&self) -> Result<Self> {
        let mut probs = Vec::with_capacity(self.u_size * self.v_size);
        for u in 0..self.u_size {
            for v in 0..self.v_size {
                probs.push(self.marginal_u[u] * self.marginal_v[v]);
            }
        }
        Self::new(
            format!("product_of_marginals({})", self.label),
            self.u_size,
            self.v_size,
            probs,
        )
    }

    /// Tensor product: domain (U1 x U2) x (V1 x V2) with the row-major index
    /// pairing u = u1 * |U2| + u2 (and likewise for v), and
    /// (rho1 (x) rho2)((u1,u2),(v1,v2)) = rho1(u1,v1) * rho2(u2,v2).
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let u_size = self.u_size * other.u_size;
        let v_size = self.v_size * other.v_size;
        let entries = u_size
            .checked_mul(v_size)
            .ok_or_else(|| Error::InvalidSource("tensor size overflow".into()))?;
        if entries > DENSE_BUDGET {
            return Err(Error::Capacity {
                what: format!("tensor({}, {})", self.label, other.label),
                required: entries as u128,
                budget: DENSE_BUDGET as u128,
                unit: "matrix entries",
            });
        }
        let mut probs = vec![0.0; entries];
        for u1 in 0..self.u_size {
            for u2 in 0..other.u_size {
                let u = u1 * other.u_size + u2;
                for v1 in 0..self.v_size {
                    let p1 = self.prob(u1, v1);
                    if p1 == 0.0 {
                        continue;
                    }
                    for v2 in 0..other.v_size {
                        let v = v1 * other.v_size + v2;
                        probs[u * v_size + v] = p1 * other.prob(u2, v2);
                    }
                }
            }
        }
        Self::new(
            format!("{}(x){}", self.label, other.label),
            u_size,
            v_size,
            probs,
        )
    }

    /// One draw via inverse CDF over the row-major support enumeration.
    #[inline]
    pub fn sample_pair(&self, rng: &mut SplitMix64) -> (usize, usize) {
        let total = *self.cumulative.last().expect("non-empty support");
        let r = rng.next_f64() * total;
        let idx = self.cumulative.partition_point(|&c| c <= r);
        let idx = idx.min(self.support.len() - 1);
        let (u, v) = self.support[idx];
        (u as usize, v as usize)
    }

    /// `count` i.i.d. draws; identical (seed, count) gives an identical batch.
    pub fn sample(&self, count: usize, seed: u64) -> SampleBatch {
        let mut rng = SplitMix64::new(seed);
        let mut u_values = Vec::with_capacity(count);
        let mut v_values = Vec::with_capacity(count);
        for _ in 0..count {
            let (u, v) = self.sample_pair(&mut rng);
            u_values.push(u as u32);
            v_values.push(v as u32);
        }
        SampleBatch {
            count,
            u_values,
            v_values,
            seed,
        }
    }

    /// True if the two sources have the same shape and entry-wise equal
    /// matrices within `tol`. Used to recognize the named constructions.
    pub fn matrix_eq(&self, other: &Self, tol: f64) -> bool {
        self.u_size == other.u_size
            && self.v_size == other.v_size
            && self
                .probs
                .iter()
                .zip(&other.probs)
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// Materialized i.i.d. draws from a source.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleBatch {
    pub count: usize,
    pub u_values: Vec<u32>,
    pub v_values: Vec<u32>,
    pub seed: u64,
}

/// sigma_{m,b} with a closed-form sampler, usable far beyond the dense
/// budget (the dense matrix needs 2^{2m} entries; sampling does not).
///
/// The joint distribution is uniform over {(u,v) in F_2^m x F_2^m : u.v = b}.
/// For b = 0 the point u = 0 has marginal mass 2/(2^m + 1) and every other u
/// has 1/(2^m + 1); for b = 1 the marginal is uniform over nonzero vectors
/// (0 is not in the support). Given u, v is uniform over the affine solution
/// set of u.v = b.
#[derive(Debug, Clone, Copy)]
pub struct SigmaSource {
    m: u32,
    b: u8,
}

impl SigmaSource {
    pub fn new(m: u32, b: u8) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter(format!(
                "sigma requires m >= 2, got {m}"
            )));
        }
        if m > 60 {
            return Err(Error::Capacity {
                what: format!("sigma({m},{b}) sampler"),
                required: m as u128,
                budget: 60,
                unit: "bits per side",
            });
        }
        if b > 1 {
            return Err(Error::InvalidParameter(format!("b must be 0 or 1, got {b}")));
        }
        Ok(Self { m, b })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn b(&self) -> u8 {
        self.b
    }

    /// One exact draw from sigma_{m,b}.
    pub fn sample_pair(&self, rng: &mut SplitMix64) -> (u64, u64) {
        let m = self.m;
        let size = 1u64 << m;
        let u = if self.b == 0 {
            // P[u = 0] = 2 / (2^m + 1), the rest uniform over nonzero.
            if rng.next_f64() < 2.0 / (size as f64 + 1.0) {
                0
            } else {
                1 + rng.next_below(size - 1)
            }
        } else {
            1 + rng.next_below(size - 1)
        };
        if u == 0 {
            // 0.v = 0 for every v, so v is uniform over all of F_2^m.
            return (0, rng.next_below(size));
        }
        // v uniform over {v : u.v = b}: free bits everywhere except a pivot
        // coordinate of u, which is then solved for.
        let pivot = u.trailing_zeros();
        let free = rng.next_below(1u64 << (m - 1));
        let low_mask = (1u64 << pivot) - 1;
        let mut v = (free & low_mask) | ((free & !low_mask) << 1);
        let parity_rest = ((u & v).count_ones() & 1) as u8;
        if parity_rest != self.b {
            v |= 1u64 << pivot;
        }
        (u, v)
    }

    /// Dense matrix; only feasible while 2^{2m} fits the dense budget (m <= 11).
    pub fn to_dense(&self) -> Result<BipartiteSource> {
        let m = self.m;
        let entries = 1u128 << (2 * m);
        if entries > DENSE_BUDGET as u128 {
            return Err(Error::Capacity {
                what: format!("dense sigma({m},{})", self.b),
                required: entries,
                budget: DENSE_BUDGET as u128,
                unit: "matrix entries",
            });
        }
        let size = 1usize << m;
        // |support| = 2^{2m-1} + 2^{m-1} for b=0 and 2^{2m-1} - 2^{m-1} for b=1.
        let half = 1u64 << (2 * m - 1);
        let shift = 1u64 << (m - 1);
        let count = if self.b == 0 { half + shift } else { half - shift };
        let weight = 1.0 / count as f64;
        let mut probs = vec![0.0; size * size];
        for u in 0..size {
            for v in 0..size {
                let parity = ((u & v).count_ones() & 1) as u8;
                if parity == self.b {
                    probs[u * size + v] = weight;
                }
            }
        }
        BipartiteSource::new(format!("sigma({m},{})", self.b), size, size, probs)
    }
}
