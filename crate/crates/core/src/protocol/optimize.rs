//! Numerical search for cheap agreement protocols.
//!
//! With one side fixed, minimizing the cost subject to the bilinear success
//! constraint E[f g] >= p is a continuous knapsack: minimize <w, f> subject
//! to <a, f> >= p with 0 <= f <= 1, where w is the marginal weight vector
//! and a(u) = sum_v rho^{(x)ell}(u,v) g(v). The greedy ratio rule solves it
//! exactly, so the alternation keeps the iterate feasible while the cost is
//! non-increasing. Multi-start over seeded random initializations; the
//! contract is feasibility, not global optimality.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};
use crate::source::BipartiteSource;

use super::{checked_pow, AgreementProtocol, PlayerFn, TABLE_BUDGET};

/// Tensor-power marginal weights: w(t) = prod_i mu(t_i), row-major.
fn kron_weights(mu: &[f64], ell: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..ell {
        let mut next = Vec::with_capacity(out.len() * mu.len());
        for &w in &out {
            for &m in mu {
                next.push(w * m);
            }
        }
        out = next;
    }
    out
}

/// a(u-tuple) = sum over v-tuples of rho^{(x)ell}(u,v) g(v), computed by
/// contracting one axis at a time against the joint matrix.
fn kron_apply(s: &BipartiteSource, g: &[f64], ell: usize, transpose: bool) -> Vec<f64> {
    let (rows, cols) = if transpose {
        (s.v_size(), s.u_size())
    } else {
        (s.u_size(), s.v_size())
    };
    let entry = |r: usize, c: usize| {
        if transpose {
            s.prob(c, r)
        } else {
            s.prob(r, c)
        }
    };
    let mut t = g.to_vec();
    let mut dims = vec![cols; ell];
    for axis in 0..ell {
        let prefix: usize = dims[..axis].iter().product();
        let suffix: usize = dims[axis + 1..].iter().product();
        let mut out = vec![0.0; prefix * rows * suffix];
        for pre in 0..prefix {
            for r in 0..rows {
                let dst = (pre * rows + r) * suffix;
                for c in 0..cols {
                    let w = entry(r, c);
                    if w == 0.0 {
                        continue;
                    }
                    let src = (pre * cols + c) * suffix;
                    for k in 0..suffix {
                        out[dst + k] += w * t[src + k];
                    }
                }
            }
        }
        t = out;
        dims[axis] = rows;
    }
    t
}

/// Exact solution of: minimize <w, f> s.t. <a, f> >= target, 0 <= f <= 1.
/// The target is clamped to sum(a) (the most any f can reach); feasibility
/// against the caller's success floor is checked on the final iterate, so a
/// one-ulp shortfall at the boundary cannot abort the alternation.
fn knapsack_min_cost(w: &[f64], a: &[f64], target: f64) -> Vec<f64> {
    let total: f64 = a.iter().sum();
    let target = target.min(total);
    let mut f = vec![0.0; w.len()];
    if target <= 0.0 {
        return f;
    }
    let mut order: Vec<usize> = (0..w.len()).filter(|&i| a[i] > 0.0).collect();
    order.sort_by(|&i, &j| {
        let ri = if w[i] <= 0.0 { f64::INFINITY } else { a[i] / w[i] };
        let rj = if w[j] <= 0.0 { f64::INFINITY } else { a[j] / w[j] };
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    let mut need = target;
    for &i in &order {
        if a[i] >= need {
            f[i] = (need / a[i]).min(1.0);
            break;
        }
        f[i] = 1.0;
        need -= a[i];
    }
    f
}

/// Alternating optimization of an agreement protocol at sample count `ell`
/// and success floor `p`. The returned protocol is feasible (success >= p up
/// to roundoff); its cost can never undercut a genuine lower bound because
/// the search space is exactly the definition's.
pub fn optimize_agreement(
    s: &BipartiteSource,
    ell: usize,
    p: f64,
    iters: usize,
    seed: u64,
) -> Result<AgreementProtocol> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "success floor must lie in (0,1], got {p}"
        )));
    }
    let u_tab = checked_pow(s.u_size(), ell, TABLE_BUDGET as u128)?;
    let v_tab = checked_pow(s.v_size(), ell, TABLE_BUDGET as u128)?;
    let w_u = kron_weights(s.marginal_u(), ell);
    let w_v = kron_weights(s.marginal_v(), ell);
    debug_assert_eq!(w_u.len(), u_tab);
    debug_assert_eq!(w_v.len(), v_tab);

    let target = p;

    let cost_of = |f: &[f64], g: &[f64]| -> f64 {
        let cf: f64 = f.iter().zip(&w_u).map(|(x, w)| x * w).sum();
        let cg: f64 = g.iter().zip(&w_v).map(|(x, w)| x * w).sum();
        cf + cg
    };

    // Success is invariant under (f, g) -> (t f, g / t); move to the scale
    // split minimizing t Ef + Eg / t, clamped so both tables stay in [0,1].
    // The greedy steps saturate the constraint on one side at a time, so
    // without this the iterate can stall with all the scale on one player.
    let rebalance = |f: &mut [f64], g: &mut [f64]| {
        let ef: f64 = f.iter().zip(&w_u).map(|(x, w)| x * w).sum();
        let eg: f64 = g.iter().zip(&w_v).map(|(x, w)| x * w).sum();
        let max_f = f.iter().copied().fold(0.0, f64::max);
        let max_g = g.iter().copied().fold(0.0, f64::max);
        if ef <= 0.0 || eg <= 0.0 || max_f <= 0.0 || max_g <= 0.0 {
            return;
        }
        let t = (eg / ef).sqrt().clamp(max_g, 1.0 / max_f);
        if !(t.is_finite() && t > 0.0) {
            return;
        }
        for x in f.iter_mut() {
            *x = (*x * t).min(1.0);
        }
        for y in g.iter_mut() {
            *y = (*y / t).min(1.0);
        }
    };

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let starts = 4;
    for start in 0..starts {
        let mut g: Vec<f64> = if start == 0 {
            vec![1.0; v_tab]
        } else {
            let mut rng = SplitMix64::new(derive_seed(seed, start as u64));
            (0..v_tab).map(|_| rng.next_f64()).collect()
        };
        // a start must be feasible for the f-step: scale g up if needed
        {
            let a = kron_apply(s, &g, ell, false);
            let reach: f64 = a.iter().sum();
            if reach < target {
                // E[g] with f = 1; g = all-ones reaches 1 >= target
                for x in g.iter_mut() {
                    *x = 1.0;
                }
            }
        }
        let mut f = vec![1.0; u_tab];
        let mut last_cost = f64::INFINITY;
        for _ in 0..iters.max(1) {
            let a = kron_apply(s, &g, ell, false);
            f = knapsack_min_cost(&w_u, &a, target);
            let a = kron_apply(s, &f, ell, true);
            g = knapsack_min_cost(&w_v, &a, target);
            rebalance(&mut f, &mut g);
            let c = cost_of(&f, &g);
            if last_cost - c < 1e-14 {
                break;
            }
            last_cost = c;
        }
        let c = cost_of(&f, &g);
        // keep only feasible iterates
        let a = kron_apply(s, &g, ell, false);
        let success: f64 = a.iter().zip(&f).map(|(x, y)| x * y).sum();
        if success >= p - 1e-12 && best.as_ref().is_none_or(|(bc, _, _)| c < *bc) {
            best = Some((c, f.clone(), g.clone()));
        }
    }

    let (_, f, g) = best.ok_or_else(|| {
        Error::Infeasible(format!(
            "no feasible protocol found at ell={ell} for success {p}"
        ))
    })?;
    Ok(AgreementProtocol {
        ell,
        u_size: s.u_size(),
        v_size: s.v_size(),
        f: PlayerFn::Table(Arc::new(f)),
        g: PlayerFn::Table(Arc::new(g)),
        label: format!("optimized(ell={ell}, p={p})"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{eval_agreement, EvalMode};

    #[test]
    fn kron_weights_are_products() {
        let w = kron_weights(&[0.25, 0.75], 2);
        assert_eq!(w.len(), 4);
        assert!((w[0] - 0.0625).abs() < 1e-15);
        assert!((w[1] - 0.1875).abs() < 1e-15);
        assert!((w[3] - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn kron_apply_matches_direct_sum() {
        let s = BipartiteSource::disj().unwrap();
        let g = [0.2, 0.9, 0.4, 0.7];
        let a = kron_apply(&s, &g, 2, false);
        // direct computation of a(u1,u2) = sum_{v1,v2} rho(u1,v1) rho(u2,v2) g(v1,v2)
        for u1 in 0..2 {
            for u2 in 0..2 {
                let mut want = 0.0;
                for v1 in 0..2 {
                    for v2 in 0..2 {
                        want += s.prob(u1, v1) * s.prob(u2, v2) * g[v1 * 2 + v2];
                    }
                }
                assert!((a[u1 * 2 + u2] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn knapsack_prefers_high_ratio_items() {
        let w = [0.5, 0.5];
        let a = [0.5, 0.1];
        let f = knapsack_min_cost(&w, &a, 0.5);
        assert_eq!(f, vec![1.0, 0.0]);
        let f = knapsack_min_cost(&w, &a, 0.55);
        assert_eq!(f[0], 1.0);
        assert!((f[1] - 0.5).abs() < 1e-12);
        // unreachable targets clamp to everything-on
        let f = knapsack_min_cost(&w, &a, 0.7);
        assert!((f[0] - 1.0).abs() < 1e-12 && (f[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn optimizer_finds_perf_indicator() {
        let s = BipartiteSource::perf().unwrap();
        let pr = optimize_agreement(&s, 1, 0.5, 50, 1).unwrap();
        let e = eval_agreement(&s, &pr, EvalMode::Exact).unwrap();
        assert!(e.success.value >= 0.5 - 1e-12);
        assert!(e.cost.value <= 1.0 + 1e-9, "cost {}", e.cost.value);
    }

    #[test]
    fn product_source_obeys_am_gm_floor() {
        // on a product source success = Ef Eg, so cost = Ef + Eg >= 2 sqrt(p)
        let s = BipartiteSource::private().unwrap();
        for p in [0.5, 0.25, 0.1, 0.03] {
            let pr = optimize_agreement(&s, 2, p, 50, 3).unwrap();
            let e = eval_agreement(&s, &pr, EvalMode::Exact).unwrap();
            assert!(e.success.value >= p - 1e-12);
            assert!(
                e.cost.value >= 2.0 * p.sqrt() - 1e-9,
                "p={p}: cost {} below 2 sqrt(p)",
                e.cost.value
            );
        }
    }

    #[test]
    fn optimizer_not_worse_than_disj_construction() {
        let s = BipartiteSource::disj().unwrap();
        let p = 1.0 / 36.0;
        let pr = optimize_agreement(&s, 2, p, 80, 7).unwrap();
        let e = eval_agreement(&s, &pr, EvalMode::Exact).unwrap();
        assert!(e.success.value >= p - 1e-12);
        assert!(
            e.cost.value <= 2.0 / 9.0 + 1e-9,
            "cost {} exceeds the closed-form construction",
            e.cost.value
        );
    }
}
