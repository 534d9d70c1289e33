//! Quality-of-correlation measures.
//!
//! Maximum correlation is the second-largest singular value of the matrix
//! A(u,v) = rho(u,v) / sqrt(rho_U(u) rho_V(v)) restricted to the marginal
//! supports. The conditional-expectation operator (T f)(v) =
//! sum_u rho(u,v)/rho_V(v) f(u) drives the hypercontractivity and
//! generalized Hoelder checks; norms are L_p with respect to the marginals.
//! Entropy is base 2 throughout, with the 0 log(1/0) = 0 convention.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};
use crate::source::BipartiteSource;

/// Budget for the grid search in [`check_hypercontractive`].
pub const HC_GRID_BUDGET: u128 = 10_000_000;

/// Normalized joint matrix restricted to rows/columns of positive marginal
/// mass. Its largest singular value is 1.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub matrix: DMatrix<f64>,
    /// Original u indices kept (positive rho_U).
    pub u_index: Vec<usize>,
    /// Original v indices kept (positive rho_V).
    pub v_index: Vec<usize>,
}

pub fn correlation_matrix(s: &BipartiteSource) -> CorrelationMatrix {
    let (mu, mv) = s.marginals();
    let u_index: Vec<usize> = (0..s.u_size()).filter(|&u| mu[u] > 0.0).collect();
    let v_index: Vec<usize> = (0..s.v_size()).filter(|&v| mv[v] > 0.0).collect();
    let matrix = DMatrix::from_fn(u_index.len(), v_index.len(), |i, j| {
        let (u, v) = (u_index[i], v_index[j]);
        s.prob(u, v) / (mu[u] * mv[v]).sqrt()
    });
    CorrelationMatrix {
        matrix,
        u_index,
        v_index,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MaxCorrelation {
    /// Second-largest singular value, clamped to \[0,1\].
    pub value: f64,
    /// Set when a marginal has singleton support; the value is then 0 by fiat.
    pub degenerate: bool,
    /// Numerical residual |sigma_1 - 1| of the top singular value.
    pub top_residual: f64,
}

/// Maximum correlation Cor(rho): supremum of E\[f(u) g(v)\] over mean-zero,
/// unit-variance f, g.
pub fn max_correlation(s: &BipartiteSource) -> Result<MaxCorrelation> {
    if s.is_degenerate() {
        return Ok(MaxCorrelation {
            value: 0.0,
            degenerate: true,
            top_residual: 0.0,
        });
    }
    let cm = correlation_matrix(s);
    let svd = cm
        .matrix
        .clone()
        .try_svd(false, false, 1e-12, 100_000)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let top_residual = (sv[0] - 1.0).abs();
    if top_residual > 1e-9 {
        return Err(Error::Numeric(format!(
            "top singular value {} deviates from 1 by {top_residual}",
            sv[0]
        )));
    }
    let value = sv.get(1).copied().unwrap_or(0.0).clamp(0.0, 1.0);
    Ok(MaxCorrelation {
        value,
        degenerate: false,
        top_residual,
    })
}

/// Slack in E\[f g\] <= Ef Eg + Cor(rho) sqrt(Var f Var g) for tables
/// f: U -> \[0,1\], g: V -> \[0,1\]. Non-negative up to numeric dust.
pub fn correlation_bound_gap(s: &BipartiteSource, f: &[f64], g: &[f64]) -> Result<f64> {
    if f.len() != s.u_size() || g.len() != s.v_size() {
        return Err(Error::InvalidParameter(
            "tables must be sized to the alphabets".into(),
        ));
    }
    let cor = max_correlation(s)?.value;
    let (mu, mv) = s.marginals();
    let ef: f64 = f.iter().zip(mu).map(|(x, w)| x * w).sum();
    let eg: f64 = g.iter().zip(mv).map(|(x, w)| x * w).sum();
    let var_f: f64 = f.iter().zip(mu).map(|(x, w)| w * (x - ef) * (x - ef)).sum();
    let var_g: f64 = g.iter().zip(mv).map(|(x, w)| w * (x - eg) * (x - eg)).sum();
    let mut e_joint = 0.0;
    for &(u, v) in s.support() {
        e_joint += s.prob(u as usize, v as usize) * f[u as usize] * g[v as usize];
    }
    Ok(ef * eg + cor * (var_f * var_g).sqrt() - e_joint)
}

/// L_p norm of f with respect to mu; p may be `f64::INFINITY`.
pub fn lp_norm(f: &[Complex64], mu: &[f64], p: f64) -> f64 {
    assert_eq!(f.len(), mu.len());
    assert!(p >= 1.0, "lp_norm requires p >= 1");
    if p.is_infinite() {
        return f
            .iter()
            .zip(mu)
            .filter(|(_, &w)| w > 0.0)
            .map(|(x, _)| x.norm())
            .fold(0.0, f64::max);
    }
    let s: f64 = f
        .iter()
        .zip(mu)
        .map(|(x, &w)| w * x.norm().powf(p))
        .sum();
    s.powf(1.0 / p)
}

pub fn lp_norm_real(f: &[f64], mu: &[f64], p: f64) -> f64 {
    assert_eq!(f.len(), mu.len());
    assert!(p >= 1.0, "lp_norm requires p >= 1");
    if p.is_infinite() {
        return f
            .iter()
            .zip(mu)
            .filter(|(_, &w)| w > 0.0)
            .map(|(x, _)| x.abs())
            .fold(0.0, f64::max);
    }
    let s: f64 = f.iter().zip(mu).map(|(x, &w)| w * x.abs().powf(p)).sum();
    s.powf(1.0 / p)
}

/// Conditional-expectation operator (T f)(v) = sum_u rho(u,v)/rho_V(v) f(u).
/// Outputs for v with rho_V(v) = 0 are reported as 0; they carry no mass
/// under any L_p(rho_V) norm.
pub fn apply_channel(s: &BipartiteSource, f: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(f.len(), s.u_size());
    let mv = s.marginal_v();
    let mut out = vec![Complex64::new(0.0, 0.0); s.v_size()];
    for v in 0..s.v_size() {
        if mv[v] <= 0.0 {
            continue;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (u, fu) in f.iter().enumerate() {
            acc += fu * s.prob(u, v);
        }
        out[v] = acc / mv[v];
    }
    out
}

pub fn apply_channel_real(s: &BipartiteSource, f: &[f64]) -> Vec<f64> {
    assert_eq!(f.len(), s.u_size());
    let mv = s.marginal_v();
    let mut out = vec![0.0; s.v_size()];
    for v in 0..s.v_size() {
        if mv[v] <= 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for (u, fu) in f.iter().enumerate() {
            acc += fu * s.prob(u, v);
        }
        out[v] = acc / mv[v];
    }
    out
}

/// Exponent bookkeeping for q-to-p hypercontractivity: 1/q + 1/q' = 1 and
/// 1/c = 1/p + 1/q'. Always c >= 1/2.
#[derive(Debug, Clone, Copy)]
pub struct HcParams {
    pub q: f64,
    pub p: f64,
    pub q_prime: f64,
    pub c: f64,
}

impl HcParams {
    pub fn new(q: f64, p: f64) -> Result<Self> {
        if !(1.0..).contains(&p) || p > q {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= p <= q, got p={p}, q={q}"
            )));
        }
        let q_prime = if q == 1.0 { f64::INFINITY } else { q / (q - 1.0) };
        let inv_c = 1.0 / p + if q_prime.is_infinite() { 0.0 } else { 1.0 / q_prime };
        let c = 1.0 / inv_c;
        Ok(Self { q, p, q_prime, c })
    }
}

#[derive(Debug, Clone, Copy)]
pub enum HcSearch {
    /// Enumerate f over a uniform grid on \[0,1\]^|U| with `resolution` steps
    /// per axis (then scale-normalize).
    Grid { resolution: usize },
    /// `trials` random candidates with i.i.d. Exp(1) entries.
    Random { trials: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct HcReport {
    pub q: f64,
    pub p: f64,
    pub holds: bool,
    /// min over searched f of ||f||_p - ||T f||_q at ||f||_p = 1.
    pub worst_gap: f64,
    /// The minimizing candidate, normalized to ||f||_p = 1.
    pub witness: Vec<f64>,
    pub candidates: u64,
}

/// Numerically search non-negative f for violations of
/// ||T_rho f||_{L_q(rho_V)} <= ||f||_{L_p(rho_U)}. Norms depend only on |f|,
/// so the restriction to non-negative candidates loses nothing for the
/// witness search along rays; this is a falsifier, not a proof.
pub fn check_hypercontractive(
    s: &BipartiteSource,
    q: f64,
    p: f64,
    search: HcSearch,
) -> Result<HcReport> {
    HcParams::new(q, p)?;
    let mu = s.marginal_u();
    let dims = s.u_size();

    let gap_of = |f: &[f64]| -> Option<(f64, Vec<f64>)> {
        let norm_p = lp_norm_real(f, mu, p);
        if norm_p <= 0.0 || !norm_p.is_finite() {
            return None;
        }
        let scaled: Vec<f64> = f.iter().map(|x| x / norm_p).collect();
        let tf = apply_channel_real(s, &scaled);
        let norm_q = lp_norm_real(&tf, s.marginal_v(), q);
        Some((1.0 - norm_q, scaled))
    };

    let mut best_gap = f64::INFINITY;
    let mut witness = vec![0.0; dims];
    let mut candidates = 0u64;

    match search {
        HcSearch::Grid { resolution } => {
            if resolution == 0 {
                return Err(Error::InvalidParameter("grid resolution must be >= 1".into()));
            }
            let total = (resolution as u128 + 1).pow(dims as u32);
            if total > HC_GRID_BUDGET {
                return Err(Error::Capacity {
                    what: "hypercontractivity grid search".into(),
                    required: total,
                    budget: HC_GRID_BUDGET,
                    unit: "grid points",
                });
            }
            let mut f = vec![0.0; dims];
            let mut idx = vec![0usize; dims];
            loop {
                for (slot, &i) in f.iter_mut().zip(idx.iter()) {
                    *slot = i as f64 / resolution as f64;
                }
                if let Some((gap, scaled)) = gap_of(&f) {
                    candidates += 1;
                    if gap < best_gap {
                        best_gap = gap;
                        witness = scaled;
                    }
                }
                // odometer
                let mut k = 0;
                loop {
                    if k == dims {
                        break;
                    }
                    idx[k] += 1;
                    if idx[k] <= resolution {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == dims {
                    break;
                }
            }
        }
        HcSearch::Random { trials, seed } => {
            for t in 0..trials {
                let mut rng = SplitMix64::new(derive_seed(seed, t as u64));
                let f: Vec<f64> = (0..dims).map(|_| rng.exponential()).collect();
                if let Some((gap, scaled)) = gap_of(&f) {
                    candidates += 1;
                    if gap < best_gap {
                        best_gap = gap;
                        witness = scaled;
                    }
                }
            }
        }
    }

    if candidates == 0 {
        return Err(Error::Numeric("no valid candidate evaluated".into()));
    }
    Ok(HcReport {
        q,
        p,
        holds: best_gap >= -1e-10,
        worst_gap: best_gap,
        witness,
        candidates,
    })
}

/// Closed form of ||f||_{3/2}^3 - ||T f||_3^3 for the shared-disjointness
/// source with |f(0)| = alpha, |f(1)| = beta:
/// (sqrt(alpha) - sqrt(beta))^4 (alpha + 4 sqrt(alpha beta) + beta) / 36.
pub fn disj_hc_gap(alpha: f64, beta: f64) -> f64 {
    assert!(alpha >= 0.0 && beta >= 0.0);
    let d = alpha.sqrt() - beta.sqrt();
    let d2 = d * d;
    d2 * d2 * (alpha + 4.0 * (alpha * beta).sqrt() + beta) / 36.0
}

/// Same quantity computed through the norm and channel operators.
pub fn disj_hc_gap_by_norms(alpha: f64, beta: f64) -> Result<f64> {
    let s = BipartiteSource::disj()?;
    let f = [alpha, beta];
    let n32 = lp_norm_real(&f, s.marginal_u(), 1.5);
    let tf = apply_channel_real(&s, &f);
    let n3 = lp_norm_real(&tf, s.marginal_v(), 3.0);
    Ok(n32.powi(3) - n3.powi(3))
}

/// Gap of the generalized (p, q') Hoelder inequality:
/// ||f||_{L_p(rho_U)} ||g||_{L_{q'}(rho_V)} - |E_rho\[f g\]|.
pub fn check_hoelder(
    s: &BipartiteSource,
    p: f64,
    q_prime: f64,
    f: &[Complex64],
    g: &[Complex64],
) -> f64 {
    assert_eq!(f.len(), s.u_size());
    assert_eq!(g.len(), s.v_size());
    let mut e = Complex64::new(0.0, 0.0);
    for &(u, v) in s.support() {
        e += f[u as usize] * g[v as usize] * s.prob(u as usize, v as usize);
    }
    lp_norm(f, s.marginal_u(), p) * lp_norm(g, s.marginal_v(), q_prime) - e.norm()
}

/// Shannon entropy in bits.
pub fn entropy(dist: &[f64]) -> f64 {
    dist.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Entropy of the joint distribution rho(U, V).
pub fn joint_entropy(s: &BipartiteSource) -> f64 {
    entropy(s.probs())
}

/// H(U | V) = H(UV) - H(V).
pub fn cond_entropy(s: &BipartiteSource) -> f64 {
    joint_entropy(s) - entropy(s.marginal_v())
}

/// I(U; V) = H(U) + H(V) - H(UV).
pub fn mutual_info(s: &BipartiteSource) -> f64 {
    entropy(s.marginal_u()) + entropy(s.marginal_v()) - joint_entropy(s)
}

/// Lower bound on the entropy of a uniform variable conditioned on an event:
/// H(X | P) >= log2(domain) - log2(1 / Pr\[P\]). The bound fails for
/// non-uniform X, hence the explicit domain size.
pub fn entropy_given_event(domain_size: usize, event_prob: f64) -> Result<f64> {
    if domain_size == 0 {
        return Err(Error::InvalidParameter("empty domain".into()));
    }
    if !(event_prob > 0.0 && event_prob <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "event probability must lie in (0,1], got {event_prob}"
        )));
    }
    Ok((domain_size as f64).log2() + event_prob.log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::SigmaSource;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn correlation_of_standard_sources() {
        assert!((max_correlation(&BipartiteSource::perf().unwrap()).unwrap().value - 1.0).abs() < 1e-9);
        assert!(max_correlation(&BipartiteSource::private().unwrap()).unwrap().value < 1e-9);
        // eigenvalues of [[1/2, 1/sqrt2], [1/sqrt2, 0]] are 1 and -1/2
        assert!((max_correlation(&BipartiteSource::disj().unwrap()).unwrap().value - 0.5).abs() < 1e-9);
        for p in [0.1, 0.25, 0.4, 0.5, 0.9] {
            let got = max_correlation(&BipartiteSource::bsc(p).unwrap()).unwrap().value;
            assert!((got - (1.0 - 2.0 * p).abs()).abs() < 1e-9, "bsc({p})");
        }
    }

    #[test]
    fn degenerate_source_flagged() {
        let s = BipartiteSource::new("pt", 1, 2, vec![0.5, 0.5]).unwrap();
        let r = max_correlation(&s).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn correlation_matrix_drops_zero_marginals() {
        // v = 2 never occurs
        let s = BipartiteSource::new("z", 2, 3, vec![0.5, 0.0, 0.0, 0.0, 0.5, 0.0]).unwrap();
        let cm = correlation_matrix(&s);
        assert_eq!(cm.v_index, vec![0, 1]);
        assert_eq!(cm.matrix.ncols(), 2);
        assert!((max_correlation(&s).unwrap().value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bound_gap_examples() {
        let disj = BipartiteSource::disj().unwrap();
        // constants: both sides equal 1
        let gap = correlation_bound_gap(&disj, &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!(gap.abs() < 1e-12);
        // indicator{0} on both sides: 4/9 + (1/2)(2/9) - 1/3 = 2/9
        let gap = correlation_bound_gap(&disj, &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((gap - 2.0 / 9.0).abs() < 1e-12);
        // product source: E[fg] = Ef Eg so the gap is the slack term
        let pr = BipartiteSource::private().unwrap();
        let gap = correlation_bound_gap(&pr, &[0.9, 0.1], &[0.3, 0.7]).unwrap();
        assert!(gap >= -1e-9);
    }

    #[test]
    fn lp_norm_examples() {
        let mu = [0.5, 0.5];
        assert!((lp_norm(&[c(1.0), c(1.0)], &mu, 1.0) - 1.0).abs() < 1e-15);
        assert!((lp_norm(&[c(1.0), c(1.0)], &mu, 7.3) - 1.0).abs() < 1e-15);
        assert!((lp_norm(&[c(2.0), c(0.0)], &mu, 2.0) - 2.0f64.sqrt()).abs() < 1e-15);
        assert!((lp_norm(&[c(2.0), c(0.0)], &mu, f64::INFINITY) - 2.0).abs() < 1e-15);
        // p = 1 is the plain expectation of |f|
        assert!((lp_norm(&[c(-3.0), c(1.0)], &mu, 1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn channel_on_disj_matches_closed_form() {
        let s = BipartiteSource::disj().unwrap();
        let f = [c(5.0), c(-1.0)];
        let tf = apply_channel(&s, &f);
        assert!((tf[0] - c(2.0)).norm() < 1e-15); // (f0+f1)/2
        assert!((tf[1] - c(5.0)).norm() < 1e-15); // f0
        // constants are fixed points
        let tf = apply_channel_real(&s, &[0.7, 0.7]);
        assert!((tf[0] - 0.7).abs() < 1e-15 && (tf[1] - 0.7).abs() < 1e-15);
        // perf acts as the identity
        let perf = BipartiteSource::perf().unwrap();
        let tf = apply_channel_real(&perf, &[0.3, 0.9]);
        assert_eq!(tf, vec![0.3, 0.9]);
    }

    #[test]
    fn hc_params_and_limits() {
        let h = HcParams::new(3.0, 1.5).unwrap();
        assert!((h.q_prime - 1.5).abs() < 1e-12);
        assert!((h.c - 0.75).abs() < 1e-12);
        assert!((1.0 / h.q + 1.0 / h.q_prime - 1.0).abs() < 1e-12);
        let h = HcParams::new(1.0, 1.0).unwrap();
        assert!(h.q_prime.is_infinite());
        assert!((h.c - 1.0).abs() < 1e-12);
        assert!(HcParams::new(1.5, 3.0).is_err());
    }

    #[test]
    fn disj_is_3_to_32_hypercontractive() {
        let s = BipartiteSource::disj().unwrap();
        let rep = check_hypercontractive(&s, 3.0, 1.5, HcSearch::Grid { resolution: 60 }).unwrap();
        assert!(rep.holds, "worst gap {}", rep.worst_gap);
        let rep =
            check_hypercontractive(&s, 3.0, 1.5, HcSearch::Random { trials: 3000, seed: 5 })
                .unwrap();
        assert!(rep.holds);
    }

    #[test]
    fn perf_violates_3_to_32() {
        let s = BipartiteSource::perf().unwrap();
        let rep = check_hypercontractive(&s, 3.0, 1.5, HcSearch::Grid { resolution: 40 }).unwrap();
        assert!(!rep.holds, "worst gap {}", rep.worst_gap);
        // the indicator witness: ||T f||_3 = ||f||_3 > ||f||_{3/2}
        let f = [1.0, 0.0];
        let n32 = lp_norm_real(&f, s.marginal_u(), 1.5);
        let tf = apply_channel_real(&s, &f);
        let n3 = lp_norm_real(&tf, s.marginal_v(), 3.0);
        assert!(n3 > n32 + 1e-3);
    }

    #[test]
    fn q_equals_p_always_holds() {
        for src in [
            BipartiteSource::perf().unwrap(),
            BipartiteSource::disj().unwrap(),
            BipartiteSource::bsc(0.3).unwrap(),
            SigmaSource::new(3, 1).unwrap().to_dense().unwrap(),
        ] {
            let rep = check_hypercontractive(&src, 2.0, 2.0, HcSearch::Random { trials: 500, seed: 9 })
                .unwrap();
            assert!(rep.holds, "{}: {}", src.label(), rep.worst_gap);
        }
    }

    #[test]
    fn disj_gap_closed_form_values() {
        assert_eq!(disj_hc_gap(1.3, 1.3), 0.0);
        assert!((disj_hc_gap(1.0, 0.0) - 1.0 / 36.0).abs() < 1e-15);
        assert!((disj_hc_gap(4.0, 1.0) - 13.0 / 36.0).abs() < 1e-15);
        for (a, b) in [(0.3, 0.7), (2.0, 9.5), (0.0, 4.0)] {
            let by_norms = disj_hc_gap_by_norms(a, b).unwrap();
            assert!((disj_hc_gap(a, b) - by_norms).abs() < 1e-12, "({a},{b})");
        }
    }

    #[test]
    fn hoelder_examples() {
        let disj = BipartiteSource::disj().unwrap();
        // p = q' = 2 is Cauchy-Schwarz
        let g = check_hoelder(&disj, 2.0, 2.0, &[c(0.4), c(-1.2)], &[c(0.3), c(2.0)]);
        assert!(g >= -1e-12);
        // constants: equality
        let g = check_hoelder(&disj, 1.5, 3.0, &[c(1.0), c(1.0)], &[c(1.0), c(1.0)]);
        assert!(g.abs() < 1e-12);
        // the (3/2, 3/2) pair certified by 3-to-3/2 hypercontractivity
        let g = check_hoelder(&disj, 1.5, 1.5, &[c(1.0), c(0.0)], &[c(1.0), c(0.0)]);
        assert!(g >= -1e-10);
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&[0.25; 4]) - 2.0).abs() < 1e-12);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
        let perf = BipartiteSource::perf().unwrap();
        assert!((mutual_info(&perf) - 1.0).abs() < 1e-12);
        let pr = BipartiteSource::private().unwrap();
        assert!(mutual_info(&pr).abs() < 1e-12);
        assert!((cond_entropy(&perf) - 0.0).abs() < 1e-12);
        assert!((cond_entropy(&pr) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_event_bound() {
        // event of probability 1: bound equals H(X)
        assert!((entropy_given_event(8, 1.0).unwrap() - 3.0).abs() < 1e-12);
        // uniform on 8, event = half the domain: H(X|P) = 2 = 3 - 1, tight
        let bound = entropy_given_event(8, 0.5).unwrap();
        assert!((bound - 2.0).abs() < 1e-12);
        let cond = entropy(&[0.25, 0.25, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0]);
        assert!(cond >= bound - 1e-12);
        // concentrated event: H(X|P) = 0 >= 2 - 2 = 0, tight
        let bound = entropy_given_event(4, 0.25).unwrap();
        assert!(bound.abs() < 1e-12);
    }

    #[test]
    fn grid_budget_enforced() {
        let s = SigmaSource::new(3, 0).unwrap().to_dense().unwrap();
        let err = check_hypercontractive(&s, 3.0, 1.5, HcSearch::Grid { resolution: 100 });
        assert!(matches!(err, Err(Error::Capacity { .. })));
    }
}
