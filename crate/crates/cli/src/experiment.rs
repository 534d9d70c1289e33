//! Config-driven experiment runner.
//!
//! A config file is a JSON object selecting one experiment and its
//! parameters; unknown keys are rejected. Monte Carlo experiments must carry
//! an explicit seed - reproducibility is the product, so there is no ambient
//! entropy anywhere. The emitted run report echoes the config; replaying the
//! echoed config reproduces every exact-mode number bit-identically and
//! every Monte Carlo number given the same seeds.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use corrsim_core::bounds::{
    brute_force_col, certified_agreement_floors, col_floor_from_agr, scaling_experiment,
};
use corrsim_core::measures::{entropy, max_correlation, mutual_info};
use corrsim_core::protocol::{
    best_agreement, disj_agreement, eval_agreement, optimize_agreement, perf_agreement, EvalMode,
};
use corrsim_core::rng::RNG_ALGORITHM;
use corrsim_core::smp::{
    eq_inner_product_hash, equality_protocol, measure_equality_error, measure_gapip_naive,
    reduce_randomness, round_accept_rate, run_simulated, simulate_with_collision,
};
use corrsim_core::source::{BipartiteSource, SourceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Equality,
    Gapip,
    Simulate,
    Scaling,
    Measures,
    Oracle,
    Agreement,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sources: Option<Vec<SourceSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_out: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub artifact_version: String,
    pub rng_algorithm: String,
    pub wall_clock_secs: f64,
    pub metrics: BTreeMap<String, Value>,
}

/// Parse and schema-check raw config bytes. Unknown keys, malformed sources
/// and missing seeds are rejected here, before any work runs.
pub fn validate_config(raw: &[u8]) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_slice(raw)
        .map_err(|e| anyhow::anyhow!("config schema error at line {}: {e}", e.line()))?;
    // every referenced source must build
    if let Some(spec) = &cfg.source {
        spec.build().context("config field 'source'")?;
    }
    if let Some(specs) = &cfg.sources {
        for (i, spec) in specs.iter().enumerate() {
            spec.build().with_context(|| format!("config field 'sources[{i}]'"))?;
        }
    }
    let needs_seed = matches!(
        cfg.experiment,
        ExperimentKind::Equality
            | ExperimentKind::Gapip
            | ExperimentKind::Simulate
            | ExperimentKind::Scaling
    ) || cfg.trials.is_some();
    if needs_seed && cfg.seed.is_none() {
        bail!("Monte Carlo experiments require an explicit 'seed' (no ambient entropy)");
    }
    Ok(cfg)
}

fn require_source(cfg: &ExperimentConfig) -> Result<BipartiteSource> {
    let spec = cfg
        .source
        .as_ref()
        .context("this experiment requires a 'source'")?;
    Ok(spec.build()?)
}

fn report_value(r: &corrsim_core::EstimateReport) -> Value {
    serde_json::to_value(r).expect("report serializes")
}

/// Dispatch a validated config to the owning module. Hard assertion failures
/// (an experiment whose own correctness check fails) surface as errors, which
/// the binary turns into a nonzero exit code.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let t0 = Instant::now();
    let mut metrics = BTreeMap::new();
    match cfg.experiment {
        ExperimentKind::Equality => {
            let src = require_source(cfg)?;
            let n = cfg.n.unwrap_or(8);
            let target = cfg.error_target.unwrap_or(1.0 / 3.0);
            let trials = cfg.trials.unwrap_or(10_000);
            let seed = cfg.seed.context("seed required")?;
            let pr = equality_protocol(&src, n, target)?;
            let x = 0xB7u64 & ((1 << n) - 1);
            let y = (x + 1) & ((1 << n) - 1);
            let eq = measure_equality_error(&pr, x, x, trials, seed);
            let ne = measure_equality_error(&pr, x, y, trials, seed.wrapping_add(1));
            metrics.insert("gamma".into(), json!(pr.witness.gamma));
            metrics.insert("gamma_prime".into(), json!(pr.witness.gamma_prime));
            metrics.insert("rounds".into(), json!(pr.rounds));
            metrics.insert("bits_alice".into(), json!(pr.cost_bits_per_player()));
            metrics.insert("bits_bob".into(), json!(pr.cost_bits_per_player()));
            metrics.insert("rho_samples".into(), json!(pr.rho_samples() as u64));
            metrics.insert(
                "round_accept_equal".into(),
                report_value(&round_accept_rate(&pr, x, x, trials, seed.wrapping_add(2))),
            );
            metrics.insert("success_equal".into(), report_value(&eq));
            metrics.insert("success_unequal".into(), report_value(&ne));
            if eq.one_sided_lower() < 1.0 - target || ne.one_sided_lower() < 1.0 - target {
                bail!(
                    "equality error bound violated: measured successes {} / {}",
                    eq.value,
                    ne.value
                );
            }
        }
        ExperimentKind::Gapip => {
            let n = cfg.n.context("gapip requires 'n'")?;
            let m = cfg
                .m
                .unwrap_or_else(|| 8 * (usize::BITS - (n - 1).leading_zeros()).max(1));
            let trials = cfg.trials.unwrap_or(1000);
            let seed = cfg.seed.context("seed required")?;
            let rep = measure_gapip_naive(n, m, trials, seed)?;
            metrics.insert("m".into(), json!(m));
            metrics.insert("bits_alice".into(), json!(m));
            metrics.insert("bits_bob".into(), json!(m));
            metrics.insert("success".into(), report_value(&rep));
            if rep.one_sided_upper() < 2.0 / 3.0 {
                bail!("gapip naive protocol success {} below 2/3 - CI", rep.value);
            }
        }
        ExperimentKind::Simulate => {
            let src = require_source(cfg)?;
            let n = cfg.n.unwrap_or(8);
            let eps = cfg.eps.unwrap_or(1.0 / 3.0);
            let trials = cfg.trials.unwrap_or(2000);
            let seed = cfg.seed.context("seed required")?;
            let full = eq_inner_product_hash(n, 3)?;
            let r_bits = ((usize::BITS - (n - 1).leading_zeros()) + 6).max(7);
            let base = reduce_randomness(&full, 1usize << r_bits, seed.wrapping_add(7))?;
            let sim = simulate_with_collision(&src, &base, eps)?;
            let x = [0x5Au64 & ((1 << n) - 1)];
            let y = [!x[0] & ((1 << n) - 1)];
            let eq = run_simulated(&sim, &x, &x, 1, trials, seed);
            let ne = run_simulated(&sim, &x, &y, 0, trials, seed.wrapping_add(1));
            metrics.insert("base".into(), json!(base.name));
            metrics.insert("base_rand_bits".into(), json!(base.rand_bits));
            metrics.insert("s_param".into(), json!(sim.s_param));
            metrics.insert("max_out".into(), json!(sim.collision.max_out));
            metrics.insert(
                "bits_alice".into(),
                json!(sim.collision.max_out as u64 * (base.rand_bits as u64 + base.msg_bits.0 as u64)),
            );
            metrics.insert(
                "bits_bob".into(),
                json!(sim.collision.max_out as u64 * (base.rand_bits as u64 + base.msg_bits.1 as u64)),
            );
            metrics.insert("cost_bits_per_rep".into(), json!(sim.cost_bits_per_rep));
            metrics.insert("rho_samples".into(), json!(sim.rho_samples_per_rep * 3));
            metrics.insert("success_equal".into(), report_value(&eq));
            metrics.insert("success_unequal".into(), report_value(&ne));
            if eq.one_sided_lower() < 2.0 / 3.0 || ne.one_sided_lower() < 2.0 / 3.0 {
                bail!(
                    "simulated protocol error above 1/3: successes {} / {}",
                    eq.value,
                    ne.value
                );
            }
        }
        ExperimentKind::Scaling => {
            let src = require_source(cfg)?;
            let ns = cfg
                .n_values
                .clone()
                .unwrap_or_else(|| vec![8, 16, 32, 64, 128, 256, 512]);
            let seed = cfg.seed.context("seed required")?;
            let result = scaling_experiment(&src, &ns, seed)?;
            if let Some(path) = &cfg.csv_out {
                write_scaling_csv(path, &result)?;
                metrics.insert("csv".into(), json!(path));
            }
            metrics.insert("fitted_exponent".into(), json!(result.fitted_exponent));
            metrics.insert("r_squared".into(), json!(result.r_squared));
            metrics.insert("fit_reliable".into(), json!(result.fit_reliable));
            metrics.insert("rows".into(), serde_json::to_value(&result.rows)?);
        }
        ExperimentKind::Measures => {
            let specs = match (&cfg.sources, &cfg.source) {
                (Some(list), _) => list.clone(),
                (None, Some(one)) => vec![one.clone()],
                (None, None) => bail!("measures requires 'source' or 'sources'"),
            };
            let mut table = Vec::new();
            for spec in &specs {
                let s = spec.build()?;
                let cor = max_correlation(&s)?;
                table.push(json!({
                    "label": s.label(),
                    "cor": cor.value,
                    "degenerate": cor.degenerate,
                    "entropy_u": entropy(s.marginal_u()),
                    "entropy_v": entropy(s.marginal_v()),
                    "mutual_info": mutual_info(&s),
                    "is_product": s.is_product(1e-9),
                }));
            }
            metrics.insert("table".into(), Value::Array(table));
        }
        ExperimentKind::Oracle => {
            let src = require_source(cfg)?;
            let n = cfg.n.context("oracle requires 'n'")?;
            let p = cfg.p.unwrap_or(1.0 / n as f64);
            let ell = cfg.ell.unwrap_or(1);
            let k_max = cfg.k_max.unwrap_or(n);
            let result = brute_force_col(&src, n, p, ell, k_max)?;
            metrics.insert("best_size".into(), json!(result.best_size));
            metrics.insert("searched_pairs".into(), json!(result.searched as u64));
            // soundness ordering against the certified floors
            let floor = certified_agreement_floors(&src, p)?
                .into_iter()
                .map(|c| col_floor_from_agr(n, c.value))
                .fold(0.0f64, f64::max);
            metrics.insert("certified_col_floor".into(), json!(floor));
            if let Some(best) = result.best_size {
                if (best as f64) < (floor - 1e-9).ceil() {
                    bail!("oracle result {best} contradicts certified floor {floor}");
                }
            }
        }
        ExperimentKind::Agreement => {
            let src = require_source(cfg)?;
            let p = cfg.p.context("agreement requires 'p'")?;
            let constructed = best_agreement(&src, p)?;
            let ce = eval_agreement(&src, &constructed, EvalMode::Exact)?;
            metrics.insert("construction".into(), json!(constructed.label));
            metrics.insert("cost".into(), report_value(&ce.cost));
            metrics.insert("success".into(), report_value(&ce.success));
            if let Some(ell) = cfg.ell {
                let opt = optimize_agreement(
                    &src,
                    ell,
                    p,
                    cfg.iters.unwrap_or(60),
                    cfg.seed.unwrap_or(0xC0FFEE),
                )?;
                let oe = eval_agreement(&src, &opt, EvalMode::Exact)?;
                metrics.insert("optimized_cost".into(), report_value(&oe.cost));
                metrics.insert("optimized_success".into(), report_value(&oe.success));
            }
            let floor = certified_agreement_floors(&src, p)?
                .into_iter()
                .map(|c| c.value)
                .fold(0.0f64, f64::max);
            metrics.insert("certified_floor".into(), json!(floor));
            if ce.cost.value < floor - 1e-9 {
                bail!(
                    "achieved cost {} undercuts certified floor {floor}",
                    ce.cost.value
                );
            }
        }
    }
    Ok(RunReport {
        config: cfg.clone(),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        wall_clock_secs: t0.elapsed().as_secs_f64(),
        metrics,
    })
}

/// CSV with one row per domain size: n, p, achieved_max_out, hyp_floor,
/// cor_floor (empty hyp_floor when no certificate exists).
pub fn write_scaling_csv(path: &str, result: &corrsim_core::bounds::ScalingResult) -> Result<()> {
    let mut out = String::from("n,p,achieved_max_out,hyp_floor,cor_floor\n");
    for row in &result.rows {
        let hyp = row
            .hyp_floor
            .map(|v| format!("{v}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.n, row.p, row.achieved_max_out, hyp, row.cor_floor
        ));
    }
    std::fs::write(path, out).with_context(|| format!("writing {path}"))?;
    Ok(())
}

/// Convenience constructors for the named simulation bases.
pub fn named_base(name: &str, n: usize, seed: u64) -> Result<corrsim_core::smp::PublicCoinSmp> {
    match name {
        "eq-perf" => {
            let full = eq_inner_product_hash(n, 3)?;
            let r_bits = ((usize::BITS - (n - 1).leading_zeros()) + 6).max(7);
            Ok(reduce_randomness(&full, 1usize << r_bits, seed)?)
        }
        "gapip-naive" => {
            let m = 8 * (usize::BITS - (n - 1).leading_zeros()).max(1);
            Ok(corrsim_core::smp::gapip_naive_protocol(n, m)?)
        }
        other => bail!("unknown base protocol '{other}' (expected eq-perf or gapip-naive)"),
    }
}

/// The closed-form agreement constructions by name (used by `agr construct`).
pub fn named_agreement(src: &BipartiteSource, p: f64) -> Result<corrsim_core::protocol::AgreementProtocol> {
    if src.matrix_eq(&BipartiteSource::perf()?, 1e-12) {
        Ok(perf_agreement(p)?)
    } else if src.matrix_eq(&BipartiteSource::disj()?, 1e-12) {
        Ok(disj_agreement(p)?)
    } else {
        Ok(best_agreement(src, p)?)
    }
}
