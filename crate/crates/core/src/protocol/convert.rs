//! Conversions between collision and agreement protocols, amplification,
//! domain scaling, and the symmetrized construction.
//!
//! The collision-from-agreement direction repeats the agreement protocol n
//! times in parallel: coordinate i joins Alice's tentative set with
//! probability f applied to her i-th sample block, and the whole set is
//! replaced by the empty set if it grew beyond T = ceil(3 n K) + 16 (K any
//! bound strictly above the agreement cost). A Chernoff bound keeps the
//! truncation loss below half, so every coordinate collides with probability
//! greater than p/2. The reverse direction picks the coordinate i* whose
//! membership indicators are cheapest and uses them as the agreement pair.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, mix64, SplitMix64};
use crate::source::BipartiteSource;

use super::{
    disj_agreement, draw_shared_samples, eval_agreement, eval_collision, intersect_sorted,
    mc_accumulate, perf_agreement, AgreementProtocol, CollisionProtocol, EvalMode, PlayerFn,
};

/// Repeat an agreement protocol across n coordinates to build a collision
/// protocol with output cap ceil(3 n K) + 16. `cost_bound` must be strictly
/// above the agreement protocol's cost for the retention analysis to apply.
pub fn collision_from_agreement(
    ag: &AgreementProtocol,
    n: usize,
    cost_bound: f64,
) -> Result<CollisionProtocol> {
    if n == 0 {
        return Err(Error::InvalidParameter("domain must be non-empty".into()));
    }
    if cost_bound <= 0.0 {
        return Err(Error::InvalidParameter(
            "cost bound must be positive".into(),
        ));
    }
    let cap = (3.0 * n as f64 * cost_bound).ceil() as usize + 16;
    let ell = ag.ell;
    let u_size = ag.u_size;
    let v_size = ag.v_size;
    let f = ag.f.clone();
    let g = ag.g.clone();
    let bernoulli_blocks = move |samples: &[usize],
                                 rng: &mut SplitMix64,
                                 player: &PlayerFn,
                                 base: usize|
          -> Vec<u32> {
        let mut tentative = Vec::new();
        for i in 0..n {
            let block = &samples[i * ell..(i + 1) * ell];
            if rng.bernoulli(player.eval(block, base)) {
                tentative.push(i as u32);
            }
        }
        if tentative.len() > cap {
            Vec::new()
        } else {
            tentative
        }
    };
    let fa = f.clone();
    let gb = g.clone();
    let bb = bernoulli_blocks;
    Ok(CollisionProtocol {
        n,
        ell: n * ell,
        max_out: cap,
        deterministic: false,
        label: format!("from_agreement({}, n={n})", ag.label),
        salt: 0,
        alice: Arc::new(move |u: &[usize], rng: &mut SplitMix64| {
            bernoulli_blocks(u, rng, &fa, u_size)
        }),
        bob: Arc::new(move |v: &[usize], rng: &mut SplitMix64| bb(v, rng, &gb, v_size)),
        // truncation couples the coordinates, so no analytic membership
        alice_membership: None,
        bob_membership: None,
    })
}

/// Same, with the cost bound taken just above the exactly evaluated cost.
pub fn collision_from_agreement_auto(
    s: &BipartiteSource,
    ag: &AgreementProtocol,
    n: usize,
) -> Result<CollisionProtocol> {
    let cost = eval_agreement(s, ag, EvalMode::Exact)?.cost.value;
    let bound = cost * (1.0 + 1e-9) + 1e-12;
    collision_from_agreement(ag, n, bound)
}

/// Extract an agreement protocol from a collision protocol: evaluate the
/// per-coordinate membership indicators and keep the coordinate i* of
/// smallest cost E\[f_i\] + E\[g_i\] among those with collision probability at
/// least `success_floor`.
///
/// The wrapped player functions are the exact membership probabilities when
/// the protocol carries them; otherwise each value is a deterministic inner
/// Monte Carlo average over the auxiliary coins (the shared-sample
/// distribution is untouched, so the evaluation stays unbiased).
pub fn agreement_from_collision(
    s: &BipartiteSource,
    pr: &CollisionProtocol,
    mode: EvalMode,
    success_floor: f64,
) -> Result<(usize, AgreementProtocol)> {
    let eval = eval_collision(s, pr, mode)?;
    let mut best: Option<(usize, f64)> = None;
    let mut best_success = f64::NEG_INFINITY;
    for i in 0..pr.n {
        let success = eval.per_coord[i].value;
        best_success = best_success.max(success);
        if success + 1e-12 < success_floor {
            continue;
        }
        let cost = eval.alice_rate[i] + eval.bob_rate[i];
        if best.is_none_or(|(_, c)| cost < c) {
            best = Some((i, cost));
        }
    }
    let (i_star, _) = best.ok_or(Error::NoCoordinate {
        floor: success_floor,
        best: best_success,
    })?;

    let f = membership_player(pr, i_star as u32, true);
    let g = membership_player(pr, i_star as u32, false);
    Ok((
        i_star,
        AgreementProtocol {
            ell: pr.ell,
            u_size: s.u_size(),
            v_size: s.v_size(),
            f,
            g,
            label: format!("membership(i={i_star}, {})", pr.label),
        },
    ))
}

const INNER_MEMBERSHIP_TRIALS: u64 = 256;

fn membership_player(pr: &CollisionProtocol, coord: u32, alice_side: bool) -> PlayerFn {
    if let Some(q) = if alice_side {
        pr.alice_membership.clone()
    } else {
        pr.bob_membership.clone()
    } {
        return PlayerFn::callable(move |t: &[usize]| q(coord, t));
    }
    let map = if alice_side {
        pr.alice.clone()
    } else {
        pr.bob.clone()
    };
    let tag = if alice_side { 0xF00Du64 } else { 0xBEEFu64 };
    let salt = pr.salt;
    PlayerFn::callable(move |t: &[usize]| {
        let mut key = mix64(salt ^ tag ^ coord as u64);
        for &x in t {
            key = mix64(key ^ (x as u64).wrapping_add(0x9E37_79B9_7F4A_7C15));
        }
        let mut hits = 0u64;
        for trial in 0..INNER_MEMBERSHIP_TRIALS {
            let mut rng = SplitMix64::new(derive_seed(key, trial));
            if map(t, &mut rng).contains(&coord) {
                hits += 1;
            }
        }
        hits as f64 / INNER_MEMBERSHIP_TRIALS as f64
    })
}

/// Run the protocol m times on fresh samples and output the union: collision
/// probability rises from p to 1 - (1-p)^m, output size grows by a factor m.
pub fn amplify_collision(pr: &CollisionProtocol, m: usize) -> CollisionProtocol {
    assert!(m >= 1);
    let ell = pr.ell;
    let union_of = move |samples: &[usize], rng: &mut SplitMix64, map: &super::SubsetFn| {
        let mut out = Vec::new();
        for rep in 0..m {
            let mut rep_rng = SplitMix64::new(rng.next_u64());
            out.extend(map(&samples[rep * ell..(rep + 1) * ell], &mut rep_rng));
        }
        out.sort_unstable();
        out.dedup();
        out
    };
    let (a, b) = (pr.alice.clone(), pr.bob.clone());
    let u2 = union_of;
    let membership = |q: &Option<super::MembershipFn>| {
        q.as_ref().map(|q| {
            let q = q.clone();
            Arc::new(move |i: u32, samples: &[usize]| {
                let mut miss = 1.0;
                for rep in 0..m {
                    miss *= 1.0 - q(i, &samples[rep * ell..(rep + 1) * ell]);
                }
                1.0 - miss
            }) as super::MembershipFn
        })
    };
    CollisionProtocol {
        n: pr.n,
        ell: m * pr.ell,
        max_out: m * pr.max_out,
        deterministic: pr.deterministic,
        label: format!("amplify({}, m={m})", pr.label),
        salt: pr.salt,
        alice: Arc::new(move |u: &[usize], rng: &mut SplitMix64| union_of(u, rng, &a)),
        bob: Arc::new(move |v: &[usize], rng: &mut SplitMix64| u2(v, rng, &b)),
        alice_membership: membership(&pr.alice_membership),
        bob_membership: membership(&pr.bob_membership),
    }
}

/// Block construction for a domain of size m*n: repetition r covers the
/// coordinates {r n, .., r n + n - 1}, preserving the per-coordinate
/// collision probability at output size m times larger.
pub fn scale_domain(pr: &CollisionProtocol, m: usize) -> CollisionProtocol {
    assert!(m >= 1);
    let ell = pr.ell;
    let n = pr.n;
    let blocks = move |samples: &[usize], rng: &mut SplitMix64, map: &super::SubsetFn| {
        let mut out = Vec::new();
        for rep in 0..m {
            let mut rep_rng = SplitMix64::new(rng.next_u64());
            out.extend(
                map(&samples[rep * ell..(rep + 1) * ell], &mut rep_rng)
                    .into_iter()
                    .map(|i| (rep * n) as u32 + i),
            );
        }
        out
    };
    let (a, b) = (pr.alice.clone(), pr.bob.clone());
    let b2 = blocks;
    let membership = |q: &Option<super::MembershipFn>| {
        q.as_ref().map(|q| {
            let q = q.clone();
            Arc::new(move |i: u32, samples: &[usize]| {
                let rep = i as usize / n;
                q((i as usize % n) as u32, &samples[rep * ell..(rep + 1) * ell])
            }) as super::MembershipFn
        })
    };
    CollisionProtocol {
        n: m * n,
        ell: m * pr.ell,
        max_out: m * pr.max_out,
        deterministic: pr.deterministic,
        label: format!("scale_domain({}, m={m})", pr.label),
        salt: pr.salt,
        alice: Arc::new(move |u: &[usize], rng: &mut SplitMix64| blocks(u, rng, &a)),
        bob: Arc::new(move |v: &[usize], rng: &mut SplitMix64| b2(v, rng, &b)),
        alice_membership: membership(&pr.alice_membership),
        bob_membership: membership(&pr.bob_membership),
    }
}

/// Run a protocol built for rho on a tensor source rho (x) sigma by reading
/// only the first (rho) coordinate of every sample. `u_div` and `v_div` are
/// the sigma alphabet sizes under the row-major index pairing.
pub fn lift_first_coordinate(
    pr: &CollisionProtocol,
    u_div: usize,
    v_div: usize,
) -> CollisionProtocol {
    assert!(u_div >= 1 && v_div >= 1);
    let (a, b) = (pr.alice.clone(), pr.bob.clone());
    let project = |div: usize| move |t: &[usize]| -> Vec<usize> { t.iter().map(|&x| x / div).collect() };
    let pu = project(u_div);
    let pv = project(v_div);
    let (pu2, pv2) = (pu, pv);
    fn lift_membership(
        q: &Option<super::MembershipFn>,
        proj: impl Fn(&[usize]) -> Vec<usize> + Send + Sync + 'static,
    ) -> Option<super::MembershipFn> {
        q.as_ref().map(|q| {
            let q = q.clone();
            Arc::new(move |i: u32, samples: &[usize]| q(i, &proj(samples))) as super::MembershipFn
        })
    }
    CollisionProtocol {
        n: pr.n,
        ell: pr.ell,
        max_out: pr.max_out,
        deterministic: pr.deterministic,
        label: format!("lift_first({})", pr.label),
        salt: pr.salt,
        alice: Arc::new(move |u: &[usize], rng: &mut SplitMix64| a(&pu2(u), rng)),
        bob: Arc::new(move |v: &[usize], rng: &mut SplitMix64| b(&pv2(v), rng)),
        alice_membership: lift_membership(&pr.alice_membership, project(u_div)),
        bob_membership: lift_membership(&pr.bob_membership, project(v_div)),
    }
}

/// Repetitions needed so that the per-round empty-intersection rate
/// (below 1/e + 1/2) compounds down to at most s.
pub fn symmetrize_repetitions(s_param: f64) -> usize {
    assert!(s_param > 0.0 && s_param < 1.0);
    let per_round: f64 = 1.0 / std::f64::consts::E + 0.5;
    ((s_param.ln() / per_round.ln()).ceil() as usize).max(1)
}

/// Symmetrized collision protocol for domain size n: every coordinate has
/// identical collision probability, a uniformly random element of a
/// non-empty intersection is uniform on the domain, and the intersection is
/// empty with probability at most `s_param`.
pub fn symmetrize(s: &BipartiteSource, n: usize, s_param: f64) -> Result<CollisionProtocol> {
    let ag = best_agreement(s, 1.0 / n as f64)?;
    symmetrize_with(s, &ag, n, s_param)
}

/// Symmetrize with a caller-supplied agreement protocol whose success
/// probability is at least 1/n.
pub fn symmetrize_with(
    s: &BipartiteSource,
    ag: &AgreementProtocol,
    n: usize,
    s_param: f64,
) -> Result<CollisionProtocol> {
    if !(s_param > 0.0 && s_param < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "failure parameter must lie in (0,1), got {s_param}"
        )));
    }
    let eval = eval_agreement(s, ag, EvalMode::Exact)?;
    if eval.success.value < 1.0 / n as f64 - 1e-12 {
        return Err(Error::Infeasible(format!(
            "agreement success {} is below 1/n = {}",
            eval.success.value,
            1.0 / n as f64
        )));
    }
    let base = collision_from_agreement(ag, n, eval.cost.value * (1.0 + 1e-9) + 1e-12)?;
    let reps = symmetrize_repetitions(s_param);
    let mut pr = amplify_collision(&base, reps);
    pr.label = format!("symmetrize({}, n={n}, s={s_param})", s.label());
    Ok(pr)
}

/// Pick the best available agreement protocol for the source at success
/// probability p: the closed-form constructions when the source is
/// (a relabeling-free copy of) perf or disj, otherwise the alternating
/// optimizer over increasing sample counts, with the trivial protocol as a
/// fallback.
pub fn best_agreement(s: &BipartiteSource, p: f64) -> Result<AgreementProtocol> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "success probability must lie in (0,1], got {p}"
        )));
    }
    if let Ok(perf) = BipartiteSource::perf() {
        if s.matrix_eq(&perf, 1e-12) {
            return perf_agreement(p);
        }
    }
    if let Ok(disj) = BipartiteSource::disj() {
        if s.matrix_eq(&disj, 1e-12) && p < 1.0 {
            return disj_agreement(p);
        }
    }
    let mut best = AgreementProtocol::trivial(s.u_size(), s.v_size());
    let mut best_cost = 2.0;
    for ell in 1..=12usize {
        if super::checked_pow(s.u_size(), ell, 4096).is_err()
            || super::checked_pow(s.v_size(), ell, 4096).is_err()
        {
            break;
        }
        let Ok(cand) = super::optimize_agreement(s, ell, p, 60, 0xC0FFEE) else {
            continue;
        };
        let Ok(eval) = eval_agreement(s, &cand, EvalMode::Exact) else {
            continue;
        };
        if eval.success.value >= p - 1e-9 && eval.cost.value < best_cost {
            best_cost = eval.cost.value;
            best = cand;
        }
    }
    Ok(best)
}

/// Histogram of "pick a uniform element of A intersect B" draws, plus the
/// empty-intersection count; this is the referee-side selection rule of the
/// symmetrized protocol.
#[derive(Debug, Clone)]
pub struct CommonElementDraws {
    pub counts: Vec<u64>,
    pub empty: u64,
    pub trials: u64,
    pub seed: u64,
}

pub fn sample_common_elements(
    s: &BipartiteSource,
    pr: &CollisionProtocol,
    trials: u64,
    seed: u64,
) -> CommonElementDraws {
    struct Acc {
        counts: Vec<u64>,
        empty: u64,
    }
    let n = pr.n;
    let parts = mc_accumulate(
        trials,
        || Acc {
            counts: vec![0; n],
            empty: 0,
        },
        |acc, t| {
            let master = derive_seed(seed, t);
            let (us, vs) = draw_shared_samples(s, pr.ell, derive_seed(master, 0));
            let (a, b) = pr.run(&us, &vs, derive_seed(master, 1));
            let common = intersect_sorted(&a, &b);
            if common.is_empty() {
                acc.empty += 1;
            } else {
                let mut referee = SplitMix64::new(derive_seed(master, 2));
                let pick = common[referee.next_below(common.len() as u64) as usize];
                acc.counts[pick as usize] += 1;
            }
        },
    );
    let mut counts = vec![0u64; n];
    let mut empty = 0u64;
    for p in parts {
        for (total, c) in counts.iter_mut().zip(&p.counts) {
            *total += c;
        }
        empty += p.empty;
    }
    CommonElementDraws {
        counts,
        empty,
        trials,
        seed,
    }
}
