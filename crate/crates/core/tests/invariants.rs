//! Cross-module invariants: properties that must hold for every source or
//! protocol, checked on random instances and on the standard family.

use proptest::prelude::*;

use corrsim_core::bounds::{col_floor_from_agr, hyp_lower_bound};
use corrsim_core::measures::{
    correlation_bound_gap, entropy, lp_norm_real, max_correlation, HcParams,
};
use corrsim_core::protocol::{
    agreement_from_collision, best_agreement, birthday_collision, collision_from_agreement_auto,
    eval_agreement, eval_collision, lift_first_coordinate, EvalMode,
};
use corrsim_core::rng::SplitMix64;
use corrsim_core::smp::{equality_protocol, round_accept_rate};
use corrsim_core::source::{BipartiteSource, SigmaSource};

fn normalized_source(label: &str, rows: usize, cols: usize, raw: &[f64]) -> BipartiteSource {
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|&x| x / total).collect();
    BipartiteSource::new(label, rows, cols, probs).expect("normalized matrix is valid")
}

fn standard_set() -> Vec<BipartiteSource> {
    vec![
        BipartiteSource::perf().unwrap(),
        BipartiteSource::private().unwrap(),
        BipartiteSource::disj().unwrap(),
        BipartiteSource::bsc(0.2).unwrap(),
        BipartiteSource::bsc(0.4).unwrap(),
        SigmaSource::new(4, 0).unwrap().to_dense().unwrap(),
    ]
}

proptest! {
    #[test]
    fn product_of_marginals_is_product(
        rows in 1usize..4,
        cols in 1usize..4,
        raw in proptest::collection::vec(0.01f64..1.0, 16),
    ) {
        let s = normalized_source("random", rows, cols, &raw[..rows * cols]);
        let prod = s.product_of_marginals().unwrap();
        prop_assert!(prod.is_product(1e-12));
        // any product source has zero maximum correlation
        let cor = max_correlation(&prod).unwrap();
        prop_assert!(cor.value <= 1e-9 || cor.degenerate);
    }

    #[test]
    fn max_correlation_in_unit_interval(
        rows in 2usize..5,
        cols in 2usize..5,
        raw in proptest::collection::vec(0.01f64..1.0, 25),
    ) {
        let s = normalized_source("random", rows, cols, &raw[..rows * cols]);
        let cor = max_correlation(&s).unwrap();
        prop_assert!((0.0..=1.0).contains(&cor.value));
    }

    #[test]
    fn lp_norm_nondecreasing_in_p(
        f in proptest::collection::vec(0.0f64..5.0, 3),
        w in proptest::collection::vec(0.01f64..1.0, 3),
    ) {
        let total: f64 = w.iter().sum();
        let mu: Vec<f64> = w.iter().map(|x| x / total).collect();
        let mut last = 0.0;
        for p in [1.0, 1.5, 2.0, 3.0, 10.0] {
            let v = lp_norm_real(&f, &mu, p);
            prop_assert!(v >= last - 1e-9, "p={p}: {v} < {last}");
            last = v;
        }
        prop_assert!(lp_norm_real(&f, &mu, f64::INFINITY) >= last - 1e-9);
    }

    #[test]
    fn hc_exponent_at_least_half(p_raw in 1.0f64..8.0, q_add in 0.0f64..8.0) {
        let params = HcParams::new(p_raw + q_add, p_raw).unwrap();
        prop_assert!(params.c >= 0.5 - 1e-12);
        // and the floors it produces are monotone in z
        let lo = hyp_lower_bound(p_raw, p_raw + q_add, 0.25).unwrap();
        let hi = hyp_lower_bound(p_raw, p_raw + q_add, 0.75).unwrap();
        prop_assert!(hi >= lo - 1e-12);
    }
}

#[test]
fn correlation_bound_gap_nonnegative_on_random_tables() {
    // 10^4 random (f, g) pairs per standard source
    for (k, s) in standard_set().iter().enumerate() {
        let mut rng = SplitMix64::new(0x6A9_5EED ^ k as u64);
        for _ in 0..10_000 {
            let f: Vec<f64> = (0..s.u_size()).map(|_| rng.next_f64()).collect();
            let g: Vec<f64> = (0..s.v_size()).map(|_| rng.next_f64()).collect();
            let gap = correlation_bound_gap(s, &f, &g).unwrap();
            assert!(gap >= -1e-9, "{}: gap {gap}", s.label());
        }
    }
}

#[test]
fn mutual_information_identities() {
    let mut rng = SplitMix64::new(314);
    for _ in 0..200 {
        let (nx, ny, nz) = (2usize, 3usize, 2usize);
        let raw: Vec<f64> = (0..nx * ny * nz).map(|_| 0.01 + rng.next_f64()).collect();
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let idx = |x: usize, y: usize, z: usize| (x * ny + y) * nz + z;

        // entropies of all the marginals involved
        let h = |dist: &[f64]| entropy(dist);
        let mut pxyz = vec![0.0; nx * ny * nz];
        pxyz.copy_from_slice(&p);
        let mut px = vec![0.0; nx];
        let mut py = vec![0.0; ny];
        let mut pxy = vec![0.0; nx * ny];
        let mut pyz = vec![0.0; ny * nz];
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    let v = p[idx(x, y, z)];
                    px[x] += v;
                    py[y] += v;
                    pxy[x * ny + y] += v;
                    pyz[y * nz + z] += v;
                }
            }
        }
        // chain rule: I(X; YZ) = I(X; Y) + I(X; Z | Y)
        let i_x_yz = h(&px) + h(&pyz) - h(&pxyz);
        let i_x_y = h(&px) + h(&py) - h(&pxy);
        let i_x_z_given_y = h(&pxy) + h(&pyz) - h(&py) - h(&pxyz);
        assert!(
            (i_x_yz - (i_x_y + i_x_z_given_y)).abs() <= 1e-10,
            "chain rule violated: {i_x_yz} vs {}",
            i_x_y + i_x_z_given_y
        );
        assert!(i_x_yz >= -1e-12);
    }
}

#[test]
fn col_agr_sandwich_on_standard_sources() {
    // both testable directions of col(n, p) = Theta(max(1, n agr(p))), as
    // inequalities on constructed objects
    for s in [
        BipartiteSource::perf().unwrap(),
        BipartiteSource::disj().unwrap(),
        BipartiteSource::bsc(0.2).unwrap(),
    ] {
        for n in [8usize, 16, 32] {
            let p = 1.0 / n as f64;
            let ag = best_agreement(&s, p).unwrap();
            let eval = eval_agreement(&s, &ag, EvalMode::Exact).unwrap();
            assert!(eval.success.value >= p - 1e-12);
            let col = collision_from_agreement_auto(&s, &ag, n).unwrap();
            assert!(
                col.max_out as f64 <= 3.0 * n as f64 * eval.cost.value + 17.0,
                "{} n={n}: forward direction",
                s.label()
            );

            // reverse: the extracted coordinate's membership rates obey the
            // averaging bound E[f_i*] + E[g_i*] <= 2 max_out / n
            let mc = EvalMode::MonteCarlo { trials: 30_000, seed: 7 + n as u64 };
            let stats = eval_collision(&s, &col, mc).unwrap();
            let (i_star, extracted) =
                agreement_from_collision(&s, &col, mc, p / 2.0 * 0.8).unwrap();
            let rate_cost = stats.alice_rate[i_star] + stats.bob_rate[i_star];
            assert!(
                rate_cost <= 2.0 * col.max_out as f64 / n as f64 + 0.02,
                "{} n={n}: extracted cost {} vs 2 max_out / n = {}",
                s.label(),
                rate_cost,
                2.0 * col.max_out as f64 / n as f64
            );
            // the wrapped player functions are genuine [0,1] probabilities
            let (us, vs) =
                corrsim_core::protocol::draw_shared_samples(&s, extracted.ell, 99);
            let fv = extracted.f.eval(&us, extracted.u_size);
            let gv = extracted.g.eval(&vs, extracted.v_size);
            assert!((0.0..=1.0).contains(&fv) && (0.0..=1.0).contains(&gv));
        }
    }
}

#[test]
fn tensoring_never_hurts_collision_bounds() {
    // a protocol for rho lifted to rho (x) sigma achieves identical per-i
    // statistics, so measured upper bounds never increase under tensoring
    let perf = BipartiteSource::perf().unwrap();
    let pr = birthday_collision(&perf, 8, 3, 5).unwrap();
    let base = eval_collision(&perf, &pr, EvalMode::Exact).unwrap();
    for sigma in [BipartiteSource::disj().unwrap(), BipartiteSource::bsc(0.3).unwrap()] {
        let tensor = perf.tensor(&sigma).unwrap();
        let lifted = lift_first_coordinate(&pr, sigma.u_size(), sigma.v_size());
        let lifted_eval = eval_collision(&tensor, &lifted, EvalMode::Exact).unwrap();
        for (a, b) in base.per_coord.iter().zip(&lifted_eval.per_coord) {
            assert!((a.value - b.value).abs() <= 1e-12);
        }
        assert_eq!(lifted.max_out, pr.max_out);
    }
}

#[test]
#[should_panic(expected = "max_out")]
fn output_cap_is_a_hard_assertion() {
    // a protocol whose map emits more than max_out must abort at run time
    let pr = corrsim_core::protocol::CollisionProtocol::from_tables(
        4,
        0,
        2,
        2,
        2,
        vec![vec![0, 1]],
        vec![vec![0, 1]],
    )
    .unwrap();
    // shrink the cap after the fact to force the violation
    let mut bad = pr;
    bad.max_out = 1;
    bad.run(&[], &[], 0);
}

#[test]
fn equality_round_rates_for_all_nonproduct_standards() {
    // round-level accept probabilities match gamma and gamma' for every
    // non-product standard source
    for s in [
        BipartiteSource::perf().unwrap(),
        BipartiteSource::disj().unwrap(),
        BipartiteSource::bsc(0.1).unwrap(),
        SigmaSource::new(4, 0).unwrap().to_dense().unwrap(),
    ] {
        let pr = equality_protocol(&s, 6, 0.3).unwrap();
        let trials = 20_000u64;
        let same = round_accept_rate(&pr, 3, 3, trials, 11);
        assert!(
            (same.value - pr.witness.gamma).abs() < 0.02,
            "{}: x=y rate {} vs gamma {}",
            s.label(),
            same.value,
            pr.witness.gamma
        );
        let diff = round_accept_rate(&pr, 3, 4, trials, 12);
        assert!(
            (diff.value - pr.witness.gamma_prime).abs() < 0.02,
            "{}: x!=y rate {} vs gamma' {}",
            s.label(),
            diff.value,
            pr.witness.gamma_prime
        );
    }
}

#[test]
fn simulation_over_perf_costs_a_constant() {
    // perfect shared randomness simulates itself at constant overhead: its
    // symmetrized protocol is far smaller than a weaker source's
    let base = corrsim_core::smp::eq_inner_product_hash(4, 2).unwrap(); // R = 8
    let perf = BipartiteSource::perf().unwrap();
    let disj = BipartiteSource::disj().unwrap();
    let over_perf =
        corrsim_core::smp::simulate_with_collision(&perf, &base, 1.0 / 3.0).unwrap();
    let over_disj =
        corrsim_core::smp::simulate_with_collision(&disj, &base, 1.0 / 3.0).unwrap();
    assert!(over_perf.collision.max_out < over_disj.collision.max_out);
    // for perf the per-repetition set size is ceil(3 * 2^R * 2/2^R) + 16 = 23
    let reps = corrsim_core::protocol::symmetrize_repetitions(over_perf.s_param);
    assert_eq!(over_perf.collision.max_out, reps * 23);
}

#[test]
fn tensor_shift_check_with_sigma8() {
    // achieved cost on disj (x) sigma(8,0) at z = 1/4 must respect the
    // hypercontractive floor for disj at z - Cor(sigma)
    let disj = BipartiteSource::disj().unwrap();
    let sigma = SigmaSource::new(8, 0).unwrap().to_dense().unwrap();
    let rep = corrsim_core::bounds::verify_cor_to_agr_shift(&disj, &sigma, 0.25).unwrap();
    assert!(!rep.uninformative);
    assert!(rep.cor_sigma <= 0.125 + 1e-9); // Claim bound at m = 8
    assert!(rep.shifted_z >= 0.25 - 0.125 - 1e-9);
    assert!(rep.ok, "achieved {} vs floor {}", rep.achieved, rep.floor);
    assert!(rep.floor > 0.0);
}

#[test]
fn achieved_costs_respect_all_certified_floors() {
    // soundness ordering on the agreement side: achieved cost >= max floor
    let disj = BipartiteSource::disj().unwrap();
    for k in 1..=8u32 {
        let z = 0.5f64.powi(k as i32);
        let ag = best_agreement(&disj, z).unwrap();
        let cost = eval_agreement(&disj, &ag, EvalMode::Exact).unwrap().cost.value;
        let hyp = hyp_lower_bound(1.5, 3.0, z).unwrap();
        let cor = corrsim_core::bounds::cor_lower_bound(z, 0.5);
        assert!(cost >= hyp.max(cor) - 1e-9, "z=2^-{k}: {cost} vs {}", hyp.max(cor));
    }
    // and the translated collision floors stay below constructed sizes
    let n = 32usize;
    let ag = best_agreement(&disj, 1.0 / n as f64).unwrap();
    let col = collision_from_agreement_auto(&disj, &ag, n).unwrap();
    let floor = col_floor_from_agr(n, hyp_lower_bound(1.5, 3.0, 1.0 / n as f64).unwrap());
    assert!(col.max_out as f64 >= floor - 1e-9);
}
