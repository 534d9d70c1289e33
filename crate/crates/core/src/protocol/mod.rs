//! Agreement and collision protocols.
//!
//! An agreement protocol (ell, f, g) has each player output one bit, with
//! probabilities f(u_1..u_ell) and g(v_1..v_ell) of outputting 1; its cost is
//! E[f + g] and its success probability E[f g] under rho^{(x) ell}. A
//! collision protocol has each player output a subset of {0..n-1}; it achieves
//! collision probability p if every coordinate lands in both outputs with
//! probability at least p, and its complexity is the maximum output size.
//!
//! Exact evaluation enumerates support tuples with product weights up to a
//! budget of weighted terms; beyond that, Monte Carlo with Wilson-score
//! intervals. Randomized player maps draw auxiliary randomness from derived
//! seed streams, never from the shared samples (any non-degenerate source
//! could emulate those coins from extra samples; seeded coins are the
//! efficient equivalent).

mod convert;
mod optimize;

pub use convert::{
    agreement_from_collision, amplify_collision, best_agreement, collision_from_agreement,
    collision_from_agreement_auto, lift_first_coordinate, sample_common_elements, scale_domain,
    symmetrize, symmetrize_repetitions, symmetrize_with, CommonElementDraws,
};
pub use optimize::optimize_agreement;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::EstimateReport;
use crate::rng::{derive_seed, SplitMix64};
use crate::source::BipartiteSource;

/// Budget on weighted terms for exact evaluation.
pub const EXACT_BUDGET: u128 = 10_000_000;
/// Budget on table entries for materialized player functions.
pub const TABLE_BUDGET: usize = 1 << 20;
/// Default Monte Carlo trial count.
pub const DEFAULT_TRIALS: u64 = 100_000;

const MC_BLOCK: u64 = 4096;

#[derive(Debug, Clone, Copy)]
pub enum EvalMode {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
}

/// Shared type of boxed player functions.
pub type PlayerCallable = Arc<dyn Fn(&[usize]) -> f64 + Send + Sync>;

/// A player's \[0,1\]-valued function of their ell sample halves.
#[derive(Clone)]
pub enum PlayerFn {
    /// Dense table over tuples in row-major order (first sample most
    /// significant).
    Table(Arc<Vec<f64>>),
    Callable(PlayerCallable),
}

impl PlayerFn {
    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidParameter(
                "player table values must lie in [0,1]".into(),
            ));
        }
        Ok(PlayerFn::Table(Arc::new(values)))
    }

    pub fn callable(f: impl Fn(&[usize]) -> f64 + Send + Sync + 'static) -> Self {
        PlayerFn::Callable(Arc::new(f))
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidParameter("constant must lie in [0,1]".into()));
        }
        Ok(PlayerFn::callable(move |_| value))
    }

    /// Evaluate on a tuple; `base` is the per-sample alphabet size (used for
    /// table indexing).
    #[inline]
    pub fn eval(&self, tuple: &[usize], base: usize) -> f64 {
        let v = match self {
            PlayerFn::Table(t) => t[tuple_index(tuple, base)],
            PlayerFn::Callable(f) => f(tuple),
        };
        assert!((0.0..=1.0).contains(&v), "player value {v} outside [0,1]");
        v
    }
}

impl std::fmt::Debug for PlayerFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlayerFn::Table(t) => write!(f, "Table(len {})", t.len()),
            PlayerFn::Callable(_) => write!(f, "Callable"),
        }
    }
}

/// Row-major index of a tuple over an alphabet of size `base`.
#[inline]
pub fn tuple_index(tuple: &[usize], base: usize) -> usize {
    tuple.iter().fold(0, |acc, &x| acc * base + x)
}

/// Agreement protocol (ell, f, g).
#[derive(Clone, Debug)]
pub struct AgreementProtocol {
    pub ell: usize,
    pub u_size: usize,
    pub v_size: usize,
    pub f: PlayerFn,
    pub g: PlayerFn,
    pub label: String,
}

impl AgreementProtocol {
    /// The trivial ell = 0 protocol: both players always output 1
    /// (cost 2, success 1).
    pub fn trivial(u_size: usize, v_size: usize) -> Self {
        Self {
            ell: 0,
            u_size,
            v_size,
            f: PlayerFn::constant(1.0).unwrap(),
            g: PlayerFn::constant(1.0).unwrap(),
            label: "trivial".into(),
        }
    }

    /// Convert callable player functions into dense tables (needed for
    /// serialization); fails if the tables would exceed the budget.
    pub fn materialize(&self) -> Result<Self> {
        let f = materialize_table(&self.f, self.u_size, self.ell)?;
        let g = materialize_table(&self.g, self.v_size, self.ell)?;
        Ok(Self {
            f: PlayerFn::Table(Arc::new(f)),
            g: PlayerFn::Table(Arc::new(g)),
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<ProtocolJson> {
        let m = self.materialize()?;
        let (f, g) = match (&m.f, &m.g) {
            (PlayerFn::Table(f), PlayerFn::Table(g)) => (f.as_ref().clone(), g.as_ref().clone()),
            _ => unreachable!("materialize returns tables"),
        };
        Ok(ProtocolJson::Agreement {
            ell: self.ell,
            u_size: self.u_size,
            v_size: self.v_size,
            tables: AgreementTables { f, g },
        })
    }
}

fn materialize_table(f: &PlayerFn, base: usize, ell: usize) -> Result<Vec<f64>> {
    let size = checked_pow(base, ell, TABLE_BUDGET as u128)?;
    let mut out = Vec::with_capacity(size);
    let mut tuple = vec![0usize; ell];
    loop {
        out.push(f.eval(&tuple, base));
        if !odometer(&mut tuple, base) {
            break;
        }
    }
    Ok(out)
}

/// Serialized protocol (table mode). Constructions are referenced by name and
/// parameters in experiment configs instead of being serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolJson {
    Agreement {
        ell: usize,
        u_size: usize,
        v_size: usize,
        tables: AgreementTables,
    },
    Collision {
        ell: usize,
        n: usize,
        u_size: usize,
        v_size: usize,
        max_out: usize,
        tables: CollisionTables,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgreementTables {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollisionTables {
    pub alice: Vec<Vec<u32>>,
    pub bob: Vec<Vec<u32>>,
}

impl ProtocolJson {
    pub fn to_agreement(&self) -> Result<AgreementProtocol> {
        match self {
            ProtocolJson::Agreement {
                ell,
                u_size,
                v_size,
                tables,
            } => Ok(AgreementProtocol {
                ell: *ell,
                u_size: *u_size,
                v_size: *v_size,
                f: PlayerFn::table(tables.f.clone())?,
                g: PlayerFn::table(tables.g.clone())?,
                label: "deserialized".into(),
            }),
            _ => Err(Error::InvalidParameter("not an agreement protocol".into())),
        }
    }

    pub fn to_collision(&self) -> Result<CollisionProtocol> {
        match self {
            ProtocolJson::Collision {
                ell,
                n,
                u_size,
                v_size,
                max_out,
                tables,
            } => CollisionProtocol::from_tables(
                *n,
                *ell,
                *u_size,
                *v_size,
                *max_out,
                tables.alice.clone(),
                tables.bob.clone(),
            ),
            _ => Err(Error::InvalidParameter("not a collision protocol".into())),
        }
    }
}

pub(crate) type SubsetFn = Arc<dyn Fn(&[usize], &mut SplitMix64) -> Vec<u32> + Send + Sync>;
pub(crate) type MembershipFn = Arc<dyn Fn(u32, &[usize]) -> f64 + Send + Sync>;

/// Collision protocol with domain {0..n-1}. Player maps may be randomized;
/// `membership` is the analytic probability Pr[i in output | samples] when it
/// has a closed form, enabling exact evaluation.
#[derive(Clone)]
pub struct CollisionProtocol {
    pub n: usize,
    /// Shared samples consumed per execution.
    pub ell: usize,
    pub max_out: usize,
    pub deterministic: bool,
    pub label: String,
    /// Salt folded into the auxiliary-randomness seed stream.
    pub salt: u64,
    pub(crate) alice: SubsetFn,
    pub(crate) bob: SubsetFn,
    pub(crate) alice_membership: Option<MembershipFn>,
    pub(crate) bob_membership: Option<MembershipFn>,
}

impl std::fmt::Debug for CollisionProtocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CollisionProtocol")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("ell", &self.ell)
            .field("max_out", &self.max_out)
            .field("deterministic", &self.deterministic)
            .finish()
    }
}

impl CollisionProtocol {
    /// Deterministic protocol from per-tuple subset tables (row-major tuple
    /// indexing over the given alphabet sizes).
    pub fn from_tables(
        n: usize,
        ell: usize,
        u_size: usize,
        v_size: usize,
        max_out: usize,
        alice_table: Vec<Vec<u32>>,
        bob_table: Vec<Vec<u32>>,
    ) -> Result<Self> {
        let ut = checked_pow(u_size, ell, TABLE_BUDGET as u128)?;
        let vt = checked_pow(v_size, ell, TABLE_BUDGET as u128)?;
        if alice_table.len() != ut || bob_table.len() != vt {
            return Err(Error::InvalidParameter(
                "subset table size does not match alphabet^ell".into(),
            ));
        }
        for set in alice_table.iter().chain(bob_table.iter()) {
            if set.len() > max_out || set.iter().any(|&i| i as usize >= n) {
                return Err(Error::InvalidParameter(
                    "subset exceeds max_out or domain".into(),
                ));
            }
        }
        let mut alice_sorted = alice_table;
        let mut bob_sorted = bob_table;
        for set in alice_sorted.iter_mut().chain(bob_sorted.iter_mut()) {
            set.sort_unstable();
        }
        let a = Arc::new(alice_sorted);
        let b = Arc::new(bob_sorted);
        let (am, bm) = (a.clone(), b.clone());
        Ok(Self {
            n,
            ell,
            max_out,
            deterministic: true,
            label: format!("table(n={n}, ell={ell})"),
            salt: 0,
            alice: Arc::new(move |u: &[usize], _rng: &mut SplitMix64| {
                a[tuple_index(u, u_size)].clone()
            }),
            bob: Arc::new(move |v: &[usize], _rng: &mut SplitMix64| {
                b[tuple_index(v, v_size)].clone()
            }),
            alice_membership: Some(Arc::new(move |i, u| {
                am[tuple_index(u, u_size)].binary_search(&i).is_ok() as u8 as f64
            })),
            bob_membership: Some(Arc::new(move |i, v| {
                bm[tuple_index(v, v_size)].binary_search(&i).is_ok() as u8 as f64
            })),
        })
    }

    /// Execute once on the given sample halves; the auxiliary randomness is a
    /// fixed function of (trial_seed, salt). Panics if a player ever emits a
    /// set larger than `max_out` or outside the domain.
    pub fn run(&self, u_halves: &[usize], v_halves: &[usize], trial_seed: u64) -> (Vec<u32>, Vec<u32>) {
        assert_eq!(u_halves.len(), self.ell, "wrong number of sample halves");
        assert_eq!(v_halves.len(), self.ell, "wrong number of sample halves");
        let base = derive_seed(trial_seed, self.salt);
        let mut rng_a = SplitMix64::new(derive_seed(base, 0xA11C));
        let mut rng_b = SplitMix64::new(derive_seed(base, 0xB0B0));
        let a = (self.alice)(u_halves, &mut rng_a);
        let b = (self.bob)(v_halves, &mut rng_b);
        for (who, set) in [("Alice", &a), ("Bob", &b)] {
            assert!(
                set.len() <= self.max_out,
                "{who} emitted {} > max_out {}",
                set.len(),
                self.max_out
            );
            assert!(
                set.iter().all(|&i| (i as usize) < self.n),
                "{who} emitted an element outside the domain"
            );
        }
        (a, b)
    }

    pub fn has_membership(&self) -> bool {
        self.alice_membership.is_some() && self.bob_membership.is_some()
    }
}

/// Sorted-set intersection.
pub fn intersect_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

pub(crate) fn checked_pow(base: usize, exp: usize, budget: u128) -> Result<usize> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
        if acc > budget {
            return Err(Error::ExactBudget {
                terms: acc,
                budget,
            });
        }
    }
    Ok(acc as usize)
}

/// Advance a row-major tuple odometer; returns false after wrapping to zero.
pub(crate) fn odometer(tuple: &mut [usize], base: usize) -> bool {
    for slot in tuple.iter_mut().rev() {
        *slot += 1;
        if *slot < base {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Draw `ell` shared samples; returns (Alice halves, Bob halves).
pub fn draw_shared_samples(s: &BipartiteSource, ell: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = SplitMix64::new(seed);
    let mut us = Vec::with_capacity(ell);
    let mut vs = Vec::with_capacity(ell);
    for _ in 0..ell {
        let (u, v) = s.sample_pair(&mut rng);
        us.push(u);
        vs.push(v);
    }
    (us, vs)
}

/// Deterministic parallel Monte Carlo: per-trial work on derived seeds,
/// accumulated block-wise and folded in block order, so the result does not
/// depend on the number of worker threads.
pub(crate) fn mc_accumulate<T: Send>(
    trials: u64,
    init: impl Fn() -> T + Sync,
    per_trial: impl Fn(&mut T, u64) + Sync,
) -> Vec<T> {
    let blocks = trials.div_ceil(MC_BLOCK).max(1);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            let lo = b * MC_BLOCK;
            let hi = ((b + 1) * MC_BLOCK).min(trials);
            for t in lo..hi {
                per_trial(&mut acc, t);
            }
            acc
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AgreementEval {
    pub cost: EstimateReport,
    pub success: EstimateReport,
}

/// Evaluate an agreement protocol: cost = E\[f\] + E\[g\], success = E\[f g\].
pub fn eval_agreement(
    s: &BipartiteSource,
    pr: &AgreementProtocol,
    mode: EvalMode,
) -> Result<AgreementEval> {
    if pr.u_size != s.u_size() || pr.v_size != s.v_size() {
        return Err(Error::InvalidParameter(
            "protocol alphabet does not match the source".into(),
        ));
    }
    match mode {
        EvalMode::Exact => {
            let ef = expect_marginal(s.marginal_u(), &pr.f, pr.u_size, pr.ell)?;
            let eg = expect_marginal(s.marginal_v(), &pr.g, pr.v_size, pr.ell)?;
            let success = expect_joint(s, pr)?;
            Ok(AgreementEval {
                cost: EstimateReport::exact(ef + eg),
                success: EstimateReport::exact(success),
            })
        }
        EvalMode::MonteCarlo { trials, seed } => {
            #[derive(Clone, Copy, Default)]
            struct Acc {
                cost: f64,
                cost_sq: f64,
                succ: f64,
                succ_sq: f64,
            }
            let parts = mc_accumulate(
                trials,
                Acc::default,
                |acc, t| {
                    let (us, vs) = draw_shared_samples(s, pr.ell, derive_seed(seed, t));
                    let fv = pr.f.eval(&us, pr.u_size);
                    let gv = pr.g.eval(&vs, pr.v_size);
                    let c = fv + gv;
                    acc.cost += c;
                    acc.cost_sq += c * c;
                    let sc = fv * gv;
                    acc.succ += sc;
                    acc.succ_sq += sc * sc;
                },
            );
            let mut total = Acc::default();
            for p in parts {
                total.cost += p.cost;
                total.cost_sq += p.cost_sq;
                total.succ += p.succ;
                total.succ_sq += p.succ_sq;
            }
            // cost lives in [0,2]; halve for the bounded-mean interval, then rescale
            let half = EstimateReport::bounded_mean(total.cost / 2.0, total.cost_sq / 4.0, trials, seed);
            let cost = EstimateReport {
                value: half.value * 2.0,
                ci_low: half.ci_low * 2.0,
                ci_high: half.ci_high * 2.0,
                ..half
            };
            Ok(AgreementEval {
                cost,
                success: EstimateReport::bounded_mean(total.succ, total.succ_sq, trials, seed),
            })
        }
    }
}

/// E\[f\] over mu^{(x) ell}, enumerating support tuples exactly.
fn expect_marginal(mu: &[f64], f: &PlayerFn, base: usize, ell: usize) -> Result<f64> {
    let support: Vec<usize> = (0..mu.len()).filter(|&x| mu[x] > 0.0).collect();
    checked_pow(support.len(), ell, EXACT_BUDGET)?;
    let mut total = 0.0;
    let mut idx = vec![0usize; ell];
    let mut tuple = vec![0usize; ell];
    loop {
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            tuple[k] = support[i];
            w *= mu[support[i]];
        }
        total += w * f.eval(&tuple, base);
        if !odometer(&mut idx, support.len()) {
            break;
        }
    }
    Ok(total)
}

/// E\[f g\] over rho^{(x) ell}, enumerating joint-support tuples exactly.
fn expect_joint(s: &BipartiteSource, pr: &AgreementProtocol) -> Result<f64> {
    let support = s.support();
    checked_pow(support.len(), pr.ell, EXACT_BUDGET)?;
    let mut total = 0.0;
    let mut idx = vec![0usize; pr.ell];
    let mut ut = vec![0usize; pr.ell];
    let mut vt = vec![0usize; pr.ell];
    loop {
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            let (u, v) = support[i];
            ut[k] = u as usize;
            vt[k] = v as usize;
            w *= s.prob(u as usize, v as usize);
        }
        total += w * pr.f.eval(&ut, pr.u_size) * pr.g.eval(&vt, pr.v_size);
        if !odometer(&mut idx, support.len()) {
            break;
        }
    }
    Ok(total)
}

/// Per-coordinate statistics of a collision protocol.
#[derive(Debug, Clone)]
pub struct CollisionEval {
    /// Pr\[i in A and i in B\] per coordinate.
    pub per_coord: Vec<EstimateReport>,
    /// Minimum of the per-coordinate point estimates: the certified p.
    pub min_prob: f64,
    /// Largest output size observed (exact mode: over the enumerated support).
    pub max_out_seen: usize,
    /// Pr\[i in A\] per coordinate.
    pub alice_rate: Vec<f64>,
    /// Pr\[i in B\] per coordinate.
    pub bob_rate: Vec<f64>,
}

/// Evaluate per-coordinate collision probabilities. Exact mode requires
/// analytic membership probabilities (Alice's and Bob's auxiliary coins are
/// independent given the samples, so Pr[i in A and B | samples] factorizes).
pub fn eval_collision(
    s: &BipartiteSource,
    pr: &CollisionProtocol,
    mode: EvalMode,
) -> Result<CollisionEval> {
    match mode {
        EvalMode::Exact => {
            let (qa, qb) = match (&pr.alice_membership, &pr.bob_membership) {
                (Some(a), Some(b)) => (a.clone(), b.clone()),
                _ => {
                    return Err(Error::Infeasible(
                        "exact collision evaluation needs analytic membership probabilities; use Monte Carlo"
                            .into(),
                    ))
                }
            };
            let support = s.support();
            checked_pow(support.len(), pr.ell, EXACT_BUDGET)?;
            let n = pr.n;
            let mut joint = vec![0.0; n];
            let mut a_rate = vec![0.0; n];
            let mut b_rate = vec![0.0; n];
            let mut max_seen = 0usize;
            let mut idx = vec![0usize; pr.ell];
            let mut ut = vec![0usize; pr.ell];
            let mut vt = vec![0usize; pr.ell];
            loop {
                let mut w = 1.0;
                for (k, &i) in idx.iter().enumerate() {
                    let (u, v) = support[i];
                    ut[k] = u as usize;
                    vt[k] = v as usize;
                    w *= s.prob(u as usize, v as usize);
                }
                for i in 0..n {
                    let pa = qa(i as u32, &ut);
                    let pb = qb(i as u32, &vt);
                    joint[i] += w * pa * pb;
                    a_rate[i] += w * pa;
                    b_rate[i] += w * pb;
                }
                if pr.deterministic {
                    let (a, b) = pr.run(&ut, &vt, 0);
                    max_seen = max_seen.max(a.len()).max(b.len());
                }
                if !odometer(&mut idx, support.len()) {
                    break;
                }
            }
            if !pr.deterministic {
                max_seen = pr.max_out;
            }
            let min_prob = joint.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(CollisionEval {
                per_coord: joint.iter().map(|&p| EstimateReport::exact(p)).collect(),
                min_prob,
                max_out_seen: max_seen,
                alice_rate: a_rate,
                bob_rate: b_rate,
            })
        }
        EvalMode::MonteCarlo { trials, seed } => {
            struct Acc {
                joint: Vec<u64>,
                a_hits: Vec<u64>,
                b_hits: Vec<u64>,
                max_seen: usize,
            }
            let n = pr.n;
            let parts = mc_accumulate(
                trials,
                || Acc {
                    joint: vec![0; n],
                    a_hits: vec![0; n],
                    b_hits: vec![0; n],
                    max_seen: 0,
                },
                |acc, t| {
                    let master = derive_seed(seed, t);
                    let (us, vs) = draw_shared_samples(s, pr.ell, derive_seed(master, 0));
                    let (a, b) = pr.run(&us, &vs, derive_seed(master, 1));
                    acc.max_seen = acc.max_seen.max(a.len()).max(b.len());
                    for &i in &a {
                        acc.a_hits[i as usize] += 1;
                    }
                    for &i in &b {
                        acc.b_hits[i as usize] += 1;
                    }
                    for i in intersect_sorted(&a, &b) {
                        acc.joint[i as usize] += 1;
                    }
                },
            );
            let mut joint = vec![0u64; n];
            let mut a_hits = vec![0u64; n];
            let mut b_hits = vec![0u64; n];
            let mut max_seen = 0usize;
            for p in parts {
                for i in 0..n {
                    joint[i] += p.joint[i];
                    a_hits[i] += p.a_hits[i];
                    b_hits[i] += p.b_hits[i];
                }
                max_seen = max_seen.max(p.max_seen);
            }
            let per_coord: Vec<EstimateReport> = joint
                .iter()
                .map(|&h| EstimateReport::bernoulli(h, trials, seed))
                .collect();
            let min_prob = per_coord
                .iter()
                .map(|r| r.value)
                .fold(f64::INFINITY, f64::min);
            Ok(CollisionEval {
                per_coord,
                min_prob,
                max_out_seen: max_seen,
                alice_rate: a_hits.iter().map(|&h| h as f64 / trials as f64).collect(),
                bob_rate: b_hits.iter().map(|&h| h as f64 / trials as f64).collect(),
            })
        }
    }
}

/// The shared-disjointness agreement construction: ell = floor(log_6(1/p)),
/// f = [all ones], g = 2^{-ell} [all zeros]. Exact success 6^{-ell} >= p and
/// exact cost 2 * 3^{-ell} < 6 p^{log_6 3}.
pub fn disj_agreement(p: f64) -> Result<AgreementProtocol> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < p < 1, got {p}"
        )));
    }
    let ell = floor_log_base(p, 6.0);
    let weight = 0.5f64.powi(ell as i32);
    Ok(AgreementProtocol {
        ell,
        u_size: 2,
        v_size: 2,
        f: PlayerFn::callable(|u: &[usize]| u.iter().all(|&x| x == 1) as u8 as f64),
        g: PlayerFn::callable(move |v: &[usize]| {
            if v.iter().all(|&y| y == 0) {
                weight
            } else {
                0.0
            }
        }),
        label: format!("disj_agreement(ell={ell})"),
    })
}

/// Baseline for perfect shared randomness: ell = floor(log_2(1/p)) shared
/// perfect bits, both players answer 1 exactly on the all-zero string.
/// Success 2^{-ell} >= p, cost 2^{1-ell} <= 4p.
pub fn perf_agreement(p: f64) -> Result<AgreementProtocol> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < p <= 1, got {p}"
        )));
    }
    let ell = floor_log_base(p, 2.0);
    let all_zero = |t: &[usize]| t.iter().all(|&x| x == 0) as u8 as f64;
    Ok(AgreementProtocol {
        ell,
        u_size: 2,
        v_size: 2,
        f: PlayerFn::callable(all_zero),
        g: PlayerFn::callable(all_zero),
        label: format!("perf_agreement(ell={ell})"),
    })
}

/// Largest ell with base^ell <= 1/p, robust to p being a rounded reciprocal
/// of an exact power.
fn floor_log_base(p: f64, base: f64) -> usize {
    let mut ell = 0usize;
    let mut pow = 1.0f64;
    while ell < 64 {
        pow *= base;
        if p * pow <= 1.0 + 1e-9 {
            ell += 1;
        } else {
            break;
        }
    }
    ell
}

/// Birthday-paradox collision protocol: each player outputs an independent
/// uniform k-subset of {0..n-1} from private coins; per-coordinate collision
/// probability is exactly (k/n)^2. Requires a non-degenerate source (the
/// private coins stand in for randomness distilled from rho).
pub fn birthday_collision(
    s: &BipartiteSource,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<CollisionProtocol> {
    if s.is_degenerate() {
        return Err(Error::Degenerate(
            "birthday protocol needs private randomness, which a degenerate source cannot supply"
                .into(),
        ));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    let ratio = k as f64 / n as f64;
    Ok(CollisionProtocol {
        n,
        ell: 0,
        max_out: k,
        deterministic: false,
        label: format!("birthday(n={n}, k={k})"),
        salt: seed,
        alice: Arc::new(move |_u: &[usize], rng: &mut SplitMix64| rng.subset(n, k)),
        bob: Arc::new(move |_v: &[usize], rng: &mut SplitMix64| rng.subset(n, k)),
        alice_membership: Some(Arc::new(move |_i, _u| ratio)),
        bob_membership: Some(Arc::new(move |_i, _v| ratio)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mc(trials: u64, seed: u64) -> EvalMode {
        EvalMode::MonteCarlo { trials, seed }
    }

    #[test]
    fn trivial_protocol_cost_and_success() {
        let s = BipartiteSource::disj().unwrap();
        let pr = AgreementProtocol::trivial(2, 2);
        let e = eval_agreement(&s, &pr, EvalMode::Exact).unwrap();
        assert_eq!(e.cost.value, 2.0);
        assert_eq!(e.success.value, 1.0);
    }

    #[test]
    fn disj_agreement_exact_closed_forms() {
        let s = BipartiteSource::disj().unwrap();
        for (p, want_ell) in [(1.0 / 6.0, 1usize), (1.0 / 36.0, 2), (0.9, 0)] {
            let pr = disj_agreement(p).unwrap();
            assert_eq!(pr.ell, want_ell, "p={p}");
            let e = eval_agreement(&s, &pr, EvalMode::Exact).unwrap();
            let ell = want_ell as i32;
            assert!((e.cost.value - 2.0 / 3.0f64.powi(ell)).abs() < 1e-12);
            assert!((e.success.value - 1.0 / 6.0f64.powi(ell)).abs() < 1e-12);
            assert!(e.success.value >= p - 1e-12);
        }
    }

    #[test]
    fn perf_agreement_examples() {
        let s = BipartiteSource::perf().unwrap();
        // p = 1/8: ell = 3, success 1/8, cost 1/4
        let pr = perf_agreement(0.125).unwrap();
        assert_eq!(pr.ell, 3);
        let e = eval_agreement(&s, &pr, EvalMode::Exact).unwrap();
        assert!((e.success.value - 0.125).abs() < 1e-12);
        assert!((e.cost.value - 0.25).abs() < 1e-12);
        // p = 1/5: ell = 2, success 1/4 >= 1/5, cost 1/2
        let pr = perf_agreement(0.2).unwrap();
        assert_eq!(pr.ell, 2);
        let e = eval_agreement(&s, &pr, EvalMode::Exact).unwrap();
        assert!((e.success.value - 0.25).abs() < 1e-12);
        assert!((e.cost.value - 0.5).abs() < 1e-12);
        // p = 1: trivial
        let pr = perf_agreement(1.0).unwrap();
        assert_eq!(pr.ell, 0);
        let e = eval_agreement(&s, &pr, EvalMode::Exact).unwrap();
        assert_eq!(e.cost.value, 2.0);
    }

    #[test]
    fn perf_indicator_pair_example() {
        // f = g = indicator{all 2 coords = 0} on perf: success 1/4, cost 1/2
        let s = BipartiteSource::perf().unwrap();
        let all_zero = |t: &[usize]| t.iter().all(|&x| x == 0) as u8 as f64;
        let pr = AgreementProtocol {
            ell: 2,
            u_size: 2,
            v_size: 2,
            f: PlayerFn::callable(all_zero),
            g: PlayerFn::callable(all_zero),
            label: "ind".into(),
        };
        let e = eval_agreement(&s, &pr, EvalMode::Exact).unwrap();
        assert!((e.success.value - 0.25).abs() < 1e-12);
        assert!((e.cost.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_budget_enforced() {
        let s = BipartiteSource::private().unwrap();
        let pr = AgreementProtocol {
            ell: 64,
            ..AgreementProtocol::trivial(2, 2)
        };
        assert!(matches!(
            eval_agreement(&s, &pr, EvalMode::Exact),
            Err(Error::ExactBudget { .. })
        ));
    }

    #[test]
    fn mc_agrees_with_exact_on_disj_construction() {
        let s = BipartiteSource::disj().unwrap();
        let pr = disj_agreement(1.0 / 6.0).unwrap();
        let e = eval_agreement(&s, &pr, mc(200_000, 7)).unwrap();
        assert!((e.cost.value - 2.0 / 3.0).abs() < 0.01, "{}", e.cost.value);
        assert!(e.success.ci_low <= 1.0 / 6.0 && 1.0 / 6.0 <= e.success.ci_high);
    }

    #[test]
    fn constant_collision_protocols() {
        let s = BipartiteSource::disj().unwrap();
        // both always output {0} on a domain of size 1
        let pr = CollisionProtocol::from_tables(
            1,
            0,
            2,
            2,
            1,
            vec![vec![0]],
            vec![vec![0]],
        )
        .unwrap();
        let e = eval_collision(&s, &pr, EvalMode::Exact).unwrap();
        assert_eq!(e.per_coord[0].value, 1.0);
        assert_eq!(e.max_out_seen, 1);
        // both always output the empty set
        let pr =
            CollisionProtocol::from_tables(2, 0, 2, 2, 0, vec![vec![]], vec![vec![]]).unwrap();
        let e = eval_collision(&s, &pr, EvalMode::Exact).unwrap();
        assert!(e.per_coord.iter().all(|r| r.value == 0.0));
    }

    #[test]
    fn identity_map_on_perf() {
        // A(u) = B(u) = {u}: per-coordinate collision probability 1/2 on perf
        let s = BipartiteSource::perf().unwrap();
        let pr = CollisionProtocol::from_tables(
            2,
            1,
            2,
            2,
            1,
            vec![vec![0], vec![1]],
            vec![vec![0], vec![1]],
        )
        .unwrap();
        let e = eval_collision(&s, &pr, EvalMode::Exact).unwrap();
        assert!((e.per_coord[0].value - 0.5).abs() < 1e-12);
        assert!((e.per_coord[1].value - 0.5).abs() < 1e-12);
        assert!((e.min_prob - 0.5).abs() < 1e-12);
        let emc = eval_collision(&s, &pr, mc(100_000, 3)).unwrap();
        assert!((emc.per_coord[0].value - 0.5).abs() < 0.01);
    }

    #[test]
    fn birthday_exact_and_mc() {
        let s = BipartiteSource::private().unwrap();
        let pr = birthday_collision(&s, 64, 8, 5).unwrap();
        let e = eval_collision(&s, &pr, EvalMode::Exact).unwrap();
        for r in &e.per_coord {
            assert!((r.value - (8.0f64 / 64.0).powi(2)).abs() < 1e-12);
        }
        let emc = eval_collision(&s, &pr, mc(100_000, 11)).unwrap();
        // (k/n)^2 = 1/64 per coordinate; 64 simultaneous CI checks would fail
        // by design ~5% of the time each, so allow a fixed ~4 sigma margin
        for r in &emc.per_coord {
            assert!((r.value - 1.0 / 64.0).abs() < 2e-3, "per-i {}", r.value);
        }
        assert_eq!(emc.max_out_seen, 8);
        // k = n: both output everything
        let full = birthday_collision(&s, 4, 4, 0).unwrap();
        let e = eval_collision(&s, &full, EvalMode::Exact).unwrap();
        assert!(e.per_coord.iter().all(|r| (r.value - 1.0).abs() < 1e-12));
        // k = 1, n = 2: per-coordinate probability 1/4
        let one = birthday_collision(&s, 2, 1, 0).unwrap();
        let e = eval_collision(&s, &one, EvalMode::Exact).unwrap();
        assert!(e.per_coord.iter().all(|r| (r.value - 0.25).abs() < 1e-12));
    }

    #[test]
    fn birthday_rejects_degenerate_source() {
        let s = BipartiteSource::new("pt", 1, 2, vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            birthday_collision(&s, 4, 2, 0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn collision_runs_are_reproducible() {
        let s = BipartiteSource::private().unwrap();
        let pr = birthday_collision(&s, 16, 4, 9).unwrap();
        let (a1, b1) = pr.run(&[], &[], 123);
        let (a2, b2) = pr.run(&[], &[], 123);
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        let (a3, _) = pr.run(&[], &[], 124);
        assert!(a1 != a3 || b1 != pr.run(&[], &[], 124).1);
    }

    #[test]
    fn protocol_json_round_trip() {
        let pr = disj_agreement(1.0 / 36.0).unwrap();
        let js = pr.to_json().unwrap();
        let text = serde_json::to_string(&js).unwrap();
        assert!(text.contains("\"kind\":\"agreement\""));
        let back: ProtocolJson = serde_json::from_str(&text).unwrap();
        let pr2 = back.to_agreement().unwrap();
        let s = BipartiteSource::disj().unwrap();
        let e1 = eval_agreement(&s, &pr, EvalMode::Exact).unwrap();
        let e2 = eval_agreement(&s, &pr2, EvalMode::Exact).unwrap();
        assert_eq!(e1.cost.value, e2.cost.value);
        assert_eq!(e1.success.value, e2.success.value);
    }

    #[test]
    fn intersect_sorted_basic() {
        assert_eq!(intersect_sorted(&[1, 3, 5], &[2, 3, 5, 7]), vec![3, 5]);
        assert!(intersect_sorted(&[], &[1]).is_empty());
    }

    #[test]
    fn collision_json_round_trip() {
        let s = BipartiteSource::perf().unwrap();
        let pr = CollisionProtocol::from_tables(
            2,
            1,
            2,
            2,
            1,
            vec![vec![0], vec![1]],
            vec![vec![0], vec![1]],
        )
        .unwrap();
        let js = ProtocolJson::Collision {
            ell: pr.ell,
            n: pr.n,
            u_size: 2,
            v_size: 2,
            max_out: pr.max_out,
            tables: CollisionTables {
                alice: vec![vec![0], vec![1]],
                bob: vec![vec![0], vec![1]],
            },
        };
        let text = serde_json::to_string(&js).unwrap();
        assert!(text.contains("\"kind\":\"collision\""));
        let back: ProtocolJson = serde_json::from_str(&text).unwrap();
        let pr2 = back.to_collision().unwrap();
        let e1 = eval_collision(&s, &pr, EvalMode::Exact).unwrap();
        let e2 = eval_collision(&s, &pr2, EvalMode::Exact).unwrap();
        for (a, b) in e1.per_coord.iter().zip(&e2.per_coord) {
            assert_eq!(a.value, b.value);
        }
    }
}
