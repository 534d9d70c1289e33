//! Certified lower-bound formulas, consistency checks for the inner-product
//! sources, a brute-force oracle for tiny instances, and scaling-exponent
//! experiments.
//!
//! A q-to-p hypercontractive source obeys
//! agr(z) >= (p^{1/p} q'^{1/q'} z)^c / c with 1/q + 1/q' = 1 and
//! 1/c = 1/p + 1/q', which translates to a collision floor of order n^{1-c}.
//! The maximum-correlation route gives agr(z) >= sqrt(z - Cor), useful only
//! while z stays above Cor. Both are data ("certificates"), not proofs: only
//! the shared-disjointness source carries an analytic hypercontractivity
//! certificate (the closed-form gap in [`crate::measures::disj_hc_gap`]);
//! everything else records the numeric search report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{check_hypercontractive, max_correlation, HcParams, HcSearch};
use crate::protocol::{
    best_agreement, birthday_collision, collision_from_agreement_auto, eval_agreement,
    CollisionProtocol, EvalMode,
};
use crate::report::loglog_fit;
use crate::source::{BipartiteSource, SigmaSource};

/// Search-space budget for the brute-force oracle (pairs of player maps).
pub const ORACLE_BUDGET: u128 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Hypercontractive,
    Correlation,
    Oracle,
}

/// A recorded lower bound: `value` bounds the agreement cost of
/// `source_label` at success `z` from below (or the collision size after
/// translation).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub kind: CertificateKind,
    pub source_label: String,
    /// Target quantity, e.g. "agr at z" or "col at (n, p)".
    pub target: String,
    pub value: f64,
    /// Parameters behind the bound ((q, p, c), or Cor, or the search space).
    pub params: Vec<(String, f64)>,
}

/// agr(z) >= (p^{1/p} q'^{1/q'} z)^c / c for a q-to-p hypercontractive
/// source. The q' = infinity limit (q = 1) uses q'^{1/q'} -> 1.
pub fn hyp_lower_bound(p: f64, q: f64, z: f64) -> Result<f64> {
    let params = HcParams::new(q, p)?;
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::InvalidParameter(format!(
            "success probability must lie in [0,1], got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let qp_term = if params.q_prime.is_infinite() {
        1.0
    } else {
        params.q_prime.powf(1.0 / params.q_prime)
    };
    let base = p.powf(1.0 / p) * qp_term * z;
    Ok(base.powf(params.c) / params.c)
}

/// agr(z) >= sqrt(z - Cor(rho)), clamped to zero once z <= Cor (where the
/// bound stops being informative).
///
/// This is the literal form of the correlation-route floor. A variant with
/// an extra factor of 2 inside the square root can be derived from the
/// general correlation bound E\[fg\] <= Ef Eg + Cor sqrt(Var f Var g); the
/// weaker printed form is used here, unmodified.
pub fn cor_lower_bound(z: f64, cor: f64) -> f64 {
    assert!((0.0..=1.0).contains(&cor), "correlation must lie in [0,1]");
    (z - cor).max(0.0).sqrt()
}

/// Translate an agreement floor to a collision floor:
/// n agr(p) <= 2 col(n, p).
pub fn col_floor_from_agr(n: usize, agr_floor: f64) -> f64 {
    n as f64 * agr_floor / 2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaCorReport {
    pub m: u32,
    pub b: u8,
    pub measured: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Check Cor(sigma_{m,b}) <= 2^{1 - m/2} by dense SVD (m <= 11).
pub fn verify_sigma_cor(m: u32, b: u8) -> Result<SigmaCorReport> {
    if !(2..=11).contains(&m) {
        return Err(Error::Capacity {
            what: format!("dense SVD for sigma({m},{b})"),
            required: m as u128,
            budget: 11,
            unit: "bits per side",
        });
    }
    let dense = SigmaSource::new(m, b)?.to_dense()?;
    let measured = max_correlation(&dense)?.value;
    let bound = 2.0f64.powf(1.0 - m as f64 / 2.0);
    Ok(SigmaCorReport {
        m,
        b,
        measured,
        bound,
        ok: measured <= bound + 1e-9,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftReport {
    pub z: f64,
    pub cor_sigma: f64,
    pub shifted_z: f64,
    /// Best certified floor for rho at the shifted success probability.
    pub floor: f64,
    /// Cheapest agreement cost achieved on rho (x) sigma at success z.
    pub achieved: f64,
    pub uninformative: bool,
    pub ok: bool,
}

/// Check the tensoring direction agr_{rho (x) sigma}(z) >= agr_rho(z - Cor(sigma))
/// on constructed protocols: the best achieved cost on the tensor source must
/// respect every certified floor for rho at the shifted success probability.
pub fn verify_cor_to_agr_shift(
    rho: &BipartiteSource,
    sigma: &BipartiteSource,
    z: f64,
) -> Result<ShiftReport> {
    let cor_sigma = max_correlation(sigma)?.value;
    let shifted = z - cor_sigma;
    let tensor = rho.tensor(sigma)?;
    let ag = best_agreement(&tensor, z)?;
    let achieved = eval_agreement(&tensor, &ag, EvalMode::Exact)?.cost.value;
    if shifted <= 0.0 {
        return Ok(ShiftReport {
            z,
            cor_sigma,
            shifted_z: shifted,
            floor: 0.0,
            achieved,
            uninformative: true,
            ok: true,
        });
    }
    let floor = certified_agreement_floors(rho, shifted)?
        .into_iter()
        .map(|c| c.value)
        .fold(0.0, f64::max);
    Ok(ShiftReport {
        z,
        cor_sigma,
        shifted_z: shifted,
        floor,
        achieved,
        uninformative: false,
        ok: achieved >= floor - 1e-9,
    })
}

/// Every certified agreement-cost floor available for this source at success
/// probability `z`. The correlation route applies to any source; the
/// hypercontractive route is attached only where a certificate exists
/// (analytic for shared disjointness, numeric search elsewhere is recorded
/// but not emitted as a floor).
pub fn certified_agreement_floors(s: &BipartiteSource, z: f64) -> Result<Vec<BoundCertificate>> {
    let mut out = Vec::new();
    let cor = max_correlation(s)?.value;
    out.push(BoundCertificate {
        kind: CertificateKind::Correlation,
        source_label: s.label().to_string(),
        target: format!("agr at z={z}"),
        value: cor_lower_bound(z, cor),
        params: vec![("cor".into(), cor)],
    });
    if s.matrix_eq(&BipartiteSource::disj()?, 1e-12) {
        let value = hyp_lower_bound(1.5, 3.0, z)?;
        out.push(BoundCertificate {
            kind: CertificateKind::Hypercontractive,
            source_label: s.label().to_string(),
            target: format!("agr at z={z}"),
            value,
            params: vec![("q".into(), 3.0), ("p".into(), 1.5), ("c".into(), 0.75)],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BruteForceResult {
    /// Smallest worst-case output size achieving the collision condition in
    /// the restricted class (deterministic maps of `ell` samples, outputs of
    /// size at most k_max), or None if even k_max fails.
    pub best_size: Option<usize>,
    pub protocol: Option<CollisionProtocol>,
    /// Number of (A, B) map pairs examined.
    pub searched: u128,
}

/// Exhaustive minimum of the worst-case output size over deterministic
/// protocols meeting Pr[i in A and B] >= p exactly, for every i. Subsets are
/// enumerated in colex order (= ascending bitmask value); ties resolve to the
/// first assignment found. The result is an upper bound on the true
/// collision complexity and exact within the restricted class.
#[allow(clippy::needless_range_loop)] // per-coordinate masses index several tables at once
pub fn brute_force_col(
    s: &BipartiteSource,
    n: usize,
    p: f64,
    ell: usize,
    k_max: usize,
) -> Result<BruteForceResult> {
    if n == 0 || n > 16 {
        return Err(Error::InvalidParameter(format!(
            "oracle domain must lie in 1..=16, got {n}"
        )));
    }
    let (mu, mv) = s.marginals();
    let u_support: Vec<usize> = (0..s.u_size()).filter(|&u| mu[u] > 0.0).collect();
    let v_support: Vec<usize> = (0..s.v_size()).filter(|&v| mv[v] > 0.0).collect();
    let u_tuples = enumerate_tuples(&u_support, ell);
    let v_tuples = enumerate_tuples(&v_support, ell);

    // joint weight of (u-tuple, v-tuple) under rho^{(x) ell}
    let weight = |ut: &[usize], vt: &[usize]| -> f64 {
        ut.iter()
            .zip(vt)
            .map(|(&u, &v)| s.prob(u, v))
            .product::<f64>()
    };
    let w: Vec<Vec<f64>> = u_tuples
        .iter()
        .map(|ut| v_tuples.iter().map(|vt| weight(ut, vt)).collect())
        .collect();

    let mut searched: u128 = 0;
    for k in 0..=k_max {
        // subsets of {0..n-1} with at most k elements, colex order
        let masks: Vec<u32> = (0u32..(1 << n))
            .filter(|m| m.count_ones() as usize <= k)
            .collect();
        let a_count = (masks.len() as u128).pow(u_tuples.len() as u32);
        let b_count = (masks.len() as u128).pow(v_tuples.len() as u32);
        let space = a_count.saturating_mul(b_count);
        if space > ORACLE_BUDGET {
            return Err(Error::Capacity {
                what: format!("oracle search at k={k}"),
                required: space,
                budget: ORACLE_BUDGET,
                unit: "map pairs",
            });
        }
        searched += space;

        let found: Option<(u64, u64)> = (0..a_count as u64)
            .into_par_iter()
            .filter_map(|a_idx| {
                let a_assign = decode_assignment(a_idx, masks.len(), u_tuples.len());
                // per-coordinate mass collectible from each v-tuple given A
                let mut coord_mass = vec![vec![0.0f64; v_tuples.len()]; n];
                for (ai, &mask_idx) in a_assign.iter().enumerate() {
                    let mask = masks[mask_idx];
                    for i in 0..n {
                        if mask & (1 << i) != 0 {
                            for bi in 0..v_tuples.len() {
                                coord_mass[i][bi] += w[ai][bi];
                            }
                        }
                    }
                }
                // quick reject: even B = everything cannot reach p somewhere
                for i in 0..n {
                    let reach: f64 = coord_mass[i].iter().sum();
                    if reach < p - 1e-12 {
                        return None;
                    }
                }
                (0..b_count as u64).find_map(|b_idx| {
                    let b_assign = decode_assignment(b_idx, masks.len(), v_tuples.len());
                    for i in 0..n {
                        let mut got = 0.0;
                        for (bi, &mask_idx) in b_assign.iter().enumerate() {
                            if masks[mask_idx] & (1 << i) != 0 {
                                got += coord_mass[i][bi];
                            }
                        }
                        if got < p - 1e-12 {
                            return None;
                        }
                    }
                    Some((a_idx, b_idx))
                })
            })
            .min();

        if let Some((a_idx, b_idx)) = found {
            let a_assign = decode_assignment(a_idx, masks.len(), u_tuples.len());
            let b_assign = decode_assignment(b_idx, masks.len(), v_tuples.len());
            let to_sets = |assign: &[usize]| -> Vec<Vec<u32>> {
                assign
                    .iter()
                    .map(|&mi| (0..n as u32).filter(|&i| masks[mi] & (1 << i) != 0).collect())
                    .collect()
            };
            // tables are indexed over the full alphabet; off-support tuples
            // get the empty set
            let full_tables = |sets: Vec<Vec<u32>>,
                               tuples: &[Vec<usize>],
                               alphabet: usize|
             -> Vec<Vec<u32>> {
                let size = alphabet.pow(ell as u32);
                let mut full = vec![Vec::new(); size];
                for (t, set) in tuples.iter().zip(sets) {
                    full[crate::protocol::tuple_index(t, alphabet)] = set;
                }
                full
            };
            let protocol = CollisionProtocol::from_tables(
                n,
                ell,
                s.u_size(),
                s.v_size(),
                k.max(1),
                full_tables(to_sets(&a_assign), &u_tuples, s.u_size()),
                full_tables(to_sets(&b_assign), &v_tuples, s.v_size()),
            )?;
            return Ok(BruteForceResult {
                best_size: Some(k),
                protocol: Some(protocol),
                searched,
            });
        }
    }
    Ok(BruteForceResult {
        best_size: None,
        protocol: None,
        searched,
    })
}

fn enumerate_tuples(support: &[usize], ell: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..ell {
        let mut next = Vec::with_capacity(out.len() * support.len());
        for t in &out {
            for &x in support {
                let mut t2 = t.clone();
                t2.push(x);
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

fn decode_assignment(mut idx: u64, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0usize; len];
    for slot in out.iter_mut().rev() {
        *slot = (idx % base as u64) as usize;
        idx /= base as u64;
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub p: f64,
    pub achieved_max_out: usize,
    /// n^{1-c} when a hypercontractivity certificate exists for the source.
    pub hyp_floor: Option<f64>,
    /// Collision floor from the maximum-correlation route.
    pub cor_floor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingResult {
    pub source_label: String,
    pub rows: Vec<ScalingRow>,
    pub fitted_exponent: f64,
    pub r_squared: f64,
    pub fit_reliable: bool,
}

/// Build collision protocols at p = 1/n for each n (birthday construction on
/// product sources, parallel-repetition over the best agreement protocol
/// otherwise), log the worst-case output size, and fit the log-log growth
/// exponent by least squares. Fits over fewer than 5 sizes or with r^2 below
/// 0.9 are flagged unreliable.
pub fn scaling_experiment(
    s: &BipartiteSource,
    n_values: &[usize],
    seed: u64,
) -> Result<ScalingResult> {
    if n_values.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two domain sizes".into(),
        ));
    }
    let cor = max_correlation(s)?.value;
    let is_product = s.is_product(1e-12);
    let is_disj = s.matrix_eq(&BipartiteSource::disj()?, 1e-12);
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        if n < 2 {
            return Err(Error::InvalidParameter("domain sizes must be >= 2".into()));
        }
        let p = 1.0 / n as f64;
        let achieved = if is_product {
            let k = (n as f64).sqrt().ceil() as usize;
            let pr = birthday_collision(s, n, k, seed)?;
            pr.max_out
        } else {
            let ag = best_agreement(s, p)?;
            let pr = collision_from_agreement_auto(s, &ag, n)?;
            pr.max_out
        };
        let hyp_floor = if is_disj {
            // 3-to-3/2 certificate: c = 3/4
            Some((n as f64).powf(0.25))
        } else {
            None
        };
        rows.push(ScalingRow {
            n,
            p,
            achieved_max_out: achieved,
            hyp_floor,
            cor_floor: col_floor_from_agr(n, cor_lower_bound(p, cor)),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.achieved_max_out as f64).collect();
    let (slope, _, r2) = loglog_fit(&xs, &ys);
    Ok(ScalingResult {
        source_label: s.label().to_string(),
        rows,
        fitted_exponent: slope,
        r_squared: r2,
        fit_reliable: n_values.len() >= 5 && r2 >= 0.9,
    })
}

/// Numeric hypercontractivity certificate for a source: runs the random
/// search and packages a passing report. This is evidence, not proof.
pub fn numeric_hc_certificate(
    s: &BipartiteSource,
    q: f64,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<Option<BoundCertificate>> {
    let report = check_hypercontractive(s, q, p, HcSearch::Random { trials, seed })?;
    if !report.holds {
        return Ok(None);
    }
    let params = HcParams::new(q, p)?;
    Ok(Some(BoundCertificate {
        kind: CertificateKind::Hypercontractive,
        source_label: s.label().to_string(),
        target: "agr floors via col-hyp".into(),
        value: report.worst_gap,
        params: vec![
            ("q".into(), q),
            ("p".into(), p),
            ("c".into(), params.c),
            ("candidates".into(), report.candidates as f64),
        ],
    }))
}
