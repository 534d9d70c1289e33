//! corrsim: simulate SMP protocols over finite sources of shared randomness
//! and compute the associated quality-of-correlation measures.
//!
//! Every Monte Carlo subcommand takes an explicit `--seed`; runs are
//! reproducible bit-for-bit given the same seed (RNG: splitmix64). The
//! `CORRSIM_THREADS` environment variable caps worker parallelism.

mod experiment;
mod source_arg;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use corrsim_core::bounds;
use corrsim_core::measures::{self, HcSearch};
use corrsim_core::protocol::{self, EvalMode};
use corrsim_core::smp;
use corrsim_core::source::SampleBatch;

use experiment::{named_agreement, named_base, run_experiment, validate_config, write_scaling_csv};
use source_arg::resolve_source;

#[derive(Parser)]
#[command(name = "corrsim", version, about, propagate_version = true)]
struct Cli {
    /// Write the JSON output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect or sample a source of shared randomness.
    Source {
        #[command(subcommand)]
        cmd: SourceCmd,
    },
    /// Quality-of-correlation measures.
    Measure {
        #[command(subcommand)]
        cmd: MeasureCmd,
    },
    /// Agreement protocols: constructions, optimization, evaluation.
    Agr {
        #[command(subcommand)]
        cmd: AgrCmd,
    },
    /// Collision protocols: constructions, conversions, evaluation.
    Col {
        #[command(subcommand)]
        cmd: ColCmd,
    },
    /// SMP protocol simulation.
    Smp {
        #[command(subcommand)]
        cmd: SmpCmd,
    },
    /// Lower-bound formulas, oracles and scaling experiments.
    Bounds {
        #[command(subcommand)]
        cmd: BoundsCmd,
    },
    /// Run a JSON experiment config and emit a full run report.
    Experiment {
        /// Path to the config file.
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum SourceCmd {
    /// Marginals, support and predicates of a source.
    Info(SourceOnly),
    /// Draw i.i.d. samples.
    Sample {
        #[command(flatten)]
        src: SourceOnly,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        /// Emit the full batch instead of the per-pair histogram.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Args)]
struct SourceOnly {
    /// Standard name (perf, priv, disj, bsc:P, sigma:M:B) or a JSON file.
    #[arg(long)]
    source: String,
}

#[derive(Subcommand)]
enum MeasureCmd {
    /// Maximum correlation (second singular value of the normalized joint
    /// matrix).
    Cor(SourceOnly),
    /// Marginal entropies, joint entropy and mutual information (bits).
    Entropy(SourceOnly),
    /// Numerical hypercontractivity check for the (q, p) pair.
    Hc {
        #[command(flatten)]
        src: SourceOnly,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        p: f64,
        /// Grid search with this resolution per axis.
        #[arg(long, conflicts_with_all = ["random", "seed"])]
        grid: Option<usize>,
        /// Random search with this many candidates (requires --seed).
        #[arg(long, requires = "seed")]
        random: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum AgrCmd {
    /// Best available construction at success probability p.
    Construct {
        #[command(flatten)]
        src: SourceOnly,
        #[arg(long)]
        p: f64,
    },
    /// Alternating bilinear optimization at a fixed sample count.
    Optimize {
        #[command(flatten)]
        src: SourceOnly,
        #[arg(long)]
        ell: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 60)]
        iters: usize,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum ColCmd {
    /// Birthday-paradox protocol from private coins.
    Birthday {
        #[command(flatten)]
        src: SourceOnly,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
    },
    /// Parallel repetition of the best agreement protocol.
    FromAgr {
        #[command(flatten)]
        src: SourceOnly,
        #[arg(long)]
        n: usize,
        /// Agreement success floor (default 1/n).
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
    },
    /// Symmetrized protocol with empty-intersection rate at most s.
    Symmetrize {
        #[command(flatten)]
        src: SourceOnly,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        s_param: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 20_000)]
        trials: u64,
    },
}

#[derive(Subcommand)]
enum SmpCmd {
    /// Equality over a non-product source (lazy-register protocol).
    Eq {
        #[command(flatten)]
        src: SourceOnly,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        error_target: f64,
    },
    /// Naive gap-inner-product protocol over sampled promise instances.
    Gapip {
        #[arg(long)]
        n: usize,
        /// Block width (default 8 log2 n).
        #[arg(long)]
        m: Option<u32>,
        /// Designed answer of the sampled instances (default: alternate).
        #[arg(long)]
        b: Option<u8>,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Simulate a perfect-randomness base protocol over an arbitrary source.
    Simulate {
        /// Base protocol: eq-perf or gapip-naive.
        #[arg(long)]
        base: String,
        #[command(flatten)]
        src: SourceOnly,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        eps: f64,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Influence-set extraction on a toy pseudo-SMP protocol.
    Influence {
        #[command(flatten)]
        src: SourceOnly,
        /// verbatim, constant or parity.
        #[arg(long)]
        toy: String,
        #[arg(long, default_value_t = 8)]
        n_bits: usize,
        #[arg(long, default_value_t = 300)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum BoundsCmd {
    /// Hypercontractive agreement floor (p^{1/p} q'^{1/q'} z)^c / c.
    Hyp {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        z: f64,
    },
    /// Exhaustive search over deterministic protocols of bounded size.
    Oracle {
        #[command(flatten)]
        src: SourceOnly,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        ell: usize,
        #[arg(long)]
        kmax: usize,
    },
    /// Collision-size growth over a range of domain sizes.
    Scaling {
        #[command(flatten)]
        src: SourceOnly,
        /// Comma-separated domain sizes.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long)]
        seed: u64,
        /// CSV output path (columns n, p, achieved_max_out, hyp_floor,
        /// cor_floor).
        #[arg(long)]
        csv: Option<String>,
    },
    /// Verify Cor(sigma_{m,b}) against the 2^{1-m/2} bound.
    SigmaCor {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        b: u8,
    },
    /// Tensor-shift check: achieved cost on rho (x) sigma at z vs the
    /// certified floor for rho at z - Cor(sigma).
    Shift {
        #[arg(long)]
        rho: String,
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        z: f64,
    },
}

fn main() {
    configure_threads();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(value) => {
            let text = serde_json::to_string_pretty(&value).expect("serializable output");
            match &cli.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text + "\n") {
                        eprintln!("error: writing {}: {e}", path.display());
                        std::process::exit(1);
                    }
                }
                None => println!("{text}"),
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn configure_threads() {
    if let Ok(raw) = std::env::var("CORRSIM_THREADS") {
        if let Ok(n) = raw.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Source { cmd } => source_cmd(cmd),
        Command::Measure { cmd } => measure_cmd(cmd),
        Command::Agr { cmd } => agr_cmd(cmd),
        Command::Col { cmd } => col_cmd(cmd),
        Command::Smp { cmd } => smp_cmd(cmd),
        Command::Bounds { cmd } => bounds_cmd(cmd),
        Command::Experiment { config } => {
            let raw = std::fs::read(config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg = validate_config(&raw)?;
            let report = run_experiment(&cfg)?;
            Ok(serde_json::to_value(report)?)
        }
    }
}

fn source_cmd(cmd: &SourceCmd) -> Result<Value> {
    match cmd {
        SourceCmd::Info(args) => {
            let s = resolve_source(&args.source)?;
            Ok(json!({
                "label": s.label(),
                "u_size": s.u_size(),
                "v_size": s.v_size(),
                "marginal_u": s.marginal_u(),
                "marginal_v": s.marginal_v(),
                "support_size": s.support().len(),
                "is_product": s.is_product(1e-9),
                "is_degenerate": s.is_degenerate(),
            }))
        }
        SourceCmd::Sample {
            src,
            count,
            seed,
            full,
        } => {
            let s = resolve_source(&src.source)?;
            let batch: SampleBatch = s.sample(*count, *seed);
            if *full {
                return Ok(serde_json::to_value(&batch)?);
            }
            let mut hist = std::collections::BTreeMap::new();
            for (&u, &v) in batch.u_values.iter().zip(&batch.v_values) {
                *hist.entry(format!("({u},{v})")).or_insert(0u64) += 1;
            }
            Ok(json!({
                "count": batch.count,
                "seed": batch.seed,
                "histogram": hist,
            }))
        }
    }
}

fn measure_cmd(cmd: &MeasureCmd) -> Result<Value> {
    match cmd {
        MeasureCmd::Cor(args) => {
            let s = resolve_source(&args.source)?;
            let cor = measures::max_correlation(&s)?;
            Ok(json!({
                "value": cor.value,
                "degenerate": cor.degenerate,
            }))
        }
        MeasureCmd::Entropy(args) => {
            let s = resolve_source(&args.source)?;
            Ok(json!({
                "entropy_u": measures::entropy(s.marginal_u()),
                "entropy_v": measures::entropy(s.marginal_v()),
                "joint_entropy": measures::joint_entropy(&s),
                "cond_entropy_u_given_v": measures::cond_entropy(&s),
                "value": measures::mutual_info(&s),
            }))
        }
        MeasureCmd::Hc {
            src,
            q,
            p,
            grid,
            random,
            seed,
        } => {
            let s = resolve_source(&src.source)?;
            let search = match (grid, random) {
                (Some(res), None) => HcSearch::Grid { resolution: *res },
                (None, Some(trials)) => HcSearch::Random {
                    trials: *trials,
                    seed: seed.context("--random requires --seed")?,
                },
                _ => anyhow::bail!("choose exactly one of --grid N or --random N --seed S"),
            };
            let rep = measures::check_hypercontractive(&s, *q, *p, search)?;
            Ok(json!({
                "value": rep.holds,
                "gap": rep.worst_gap,
                "witness": rep.witness,
                "candidates": rep.candidates,
            }))
        }
    }
}

fn agr_cmd(cmd: &AgrCmd) -> Result<Value> {
    match cmd {
        AgrCmd::Construct { src, p } => {
            let s = resolve_source(&src.source)?;
            let pr = named_agreement(&s, *p)?;
            let eval = protocol::eval_agreement(&s, &pr, EvalMode::Exact)?;
            let serialized = pr.to_json().ok().map(|j| serde_json::to_value(j).unwrap());
            Ok(json!({
                "label": pr.label,
                "ell": pr.ell,
                "cost": eval.cost.value,
                "success": eval.success.value,
                "protocol": serialized,
            }))
        }
        AgrCmd::Optimize {
            src,
            ell,
            p,
            iters,
            seed,
        } => {
            let s = resolve_source(&src.source)?;
            let pr = protocol::optimize_agreement(&s, *ell, *p, *iters, *seed)?;
            let eval = protocol::eval_agreement(&s, &pr, EvalMode::Exact)?;
            let floor = bounds::certified_agreement_floors(&s, *p)?
                .into_iter()
                .map(|c| c.value)
                .fold(0.0f64, f64::max);
            Ok(json!({
                "label": pr.label,
                "cost": eval.cost.value,
                "success": eval.success.value,
                "certified_floor": floor,
                "protocol": serde_json::to_value(pr.to_json()?)?,
            }))
        }
    }
}

fn col_cmd(cmd: &ColCmd) -> Result<Value> {
    let eval_to_json = |s, pr: &protocol::CollisionProtocol, trials, seed| -> Result<Value> {
        let eval = protocol::eval_collision(s, pr, EvalMode::MonteCarlo { trials, seed })?;
        Ok(json!({
            "label": pr.label,
            "n": pr.n,
            "ell": pr.ell,
            "max_out": pr.max_out,
            "max_out_seen": eval.max_out_seen,
            "min_prob": eval.min_prob,
            "per_coord": eval.per_coord.iter().map(|r| r.value).collect::<Vec<_>>(),
        }))
    };
    match cmd {
        ColCmd::Birthday {
            src,
            n,
            k,
            seed,
            trials,
        } => {
            let s = resolve_source(&src.source)?;
            let pr = protocol::birthday_collision(&s, *n, *k, *seed)?;
            eval_to_json(&s, &pr, *trials, *seed)
        }
        ColCmd::FromAgr {
            src,
            n,
            p,
            seed,
            trials,
        } => {
            let s = resolve_source(&src.source)?;
            let target = p.unwrap_or(1.0 / *n as f64);
            let ag = protocol::best_agreement(&s, target)?;
            let pr = protocol::collision_from_agreement_auto(&s, &ag, *n)?;
            eval_to_json(&s, &pr, *trials, *seed)
        }
        ColCmd::Symmetrize {
            src,
            n,
            s_param,
            seed,
            trials,
        } => {
            let s = resolve_source(&src.source)?;
            let pr = protocol::symmetrize(&s, *n, *s_param)?;
            let draws = protocol::sample_common_elements(&s, &pr, *trials, *seed);
            let (stat, p_value) = corrsim_core::report::chi_square_uniform(&draws.counts);
            Ok(json!({
                "label": pr.label,
                "max_out": pr.max_out,
                "repetitions": protocol::symmetrize_repetitions(*s_param),
                "empty_rate": draws.empty as f64 / draws.trials as f64,
                "s_param": s_param,
                "chi_square": stat,
                "uniformity_p_value": p_value,
                "counts": draws.counts,
            }))
        }
    }
}

fn smp_cmd(cmd: &SmpCmd) -> Result<Value> {
    match cmd {
        SmpCmd::Eq {
            src,
            n,
            trials,
            seed,
            error_target,
        } => {
            let s = resolve_source(&src.source)?;
            let pr = smp::equality_protocol(&s, *n, *error_target)?;
            let x = 0xB7u64 & ((1 << *n) - 1);
            let y = (x + 1) & ((1 << *n) - 1);
            let eq = smp::measure_equality_error(&pr, x, x, *trials, *seed);
            let ne = smp::measure_equality_error(&pr, x, y, *trials, seed.wrapping_add(1));
            Ok(json!({
                "gamma": pr.witness.gamma,
                "gamma_prime": pr.witness.gamma_prime,
                "rounds": pr.rounds,
                "success_equal": eq,
                "success_unequal": ne,
                "cost": {
                    "bits_alice": pr.cost_bits_per_player(),
                    "bits_bob": pr.cost_bits_per_player(),
                    "rho_samples": pr.rho_samples() as u64,
                },
            }))
        }
        SmpCmd::Gapip {
            n,
            m,
            b,
            trials,
            seed,
        } => {
            let m = m.unwrap_or_else(|| 8 * (usize::BITS - (n - 1).leading_zeros()).max(1));
            let rep = match b {
                None => smp::measure_gapip_naive(*n, m, *trials, *seed)?,
                Some(bit) => {
                    // fixed designed answer: sample instances with that bit
                    let pr = smp::gapip_naive_protocol(*n, m)?;
                    let mut hits = 0u64;
                    for t in 0..*trials {
                        let inst = smp::sample_gapip_instance(
                            *n,
                            m,
                            *bit,
                            corrsim_core::rng::derive_seed(*seed, t),
                        )?;
                        let mut rng = corrsim_core::rng::SplitMix64::new(
                            corrsim_core::rng::derive_seed(seed.wrapping_add(0x5151), t),
                        );
                        let r = rng.next_u64()
                            & if pr.rand_bits >= 64 {
                                u64::MAX
                            } else {
                                (1u64 << pr.rand_bits) - 1
                            };
                        if pr.answer(&inst.xs, &inst.ys, r) == *bit {
                            hits += 1;
                        }
                    }
                    corrsim_core::EstimateReport::bernoulli(hits, *trials, *seed)
                }
            };
            Ok(json!({
                "n": n,
                "m": m,
                "success": rep,
                "cost": { "bits_alice": m, "bits_bob": m, "rho_samples": 0 },
            }))
        }
        SmpCmd::Simulate {
            base,
            src,
            eps,
            n,
            trials,
            seed,
        } => {
            let s = resolve_source(&src.source)?;
            let base_pr = named_base(base, *n, seed.wrapping_add(7))?;
            let sim = smp::simulate_with_collision(&s, &base_pr, *eps)?;
            let x = [0x5Au64 & ((1 << *n) - 1)];
            let y = [!x[0] & ((1 << *n) - 1)];
            let eq = smp::run_simulated(&sim, &x, &x, 1, *trials, *seed);
            let ne = smp::run_simulated(&sim, &x, &y, 0, *trials, seed.wrapping_add(1));
            Ok(json!({
                "base": base_pr.name,
                "s_param": sim.s_param,
                "max_out": sim.collision.max_out,
                "success_equal": eq,
                "success_unequal": ne,
                "cost": {
                    "bits_alice": sim.collision.max_out as u64
                        * (base_pr.rand_bits as u64 + base_pr.msg_bits.0 as u64),
                    "bits_bob": sim.collision.max_out as u64
                        * (base_pr.rand_bits as u64 + base_pr.msg_bits.1 as u64),
                    "per_rep_bound": sim.cost_bits_per_rep,
                    "rho_samples": sim.rho_samples_per_rep * sim.majority_reps as u64,
                },
            }))
        }
        SmpCmd::Influence {
            src,
            toy,
            n_bits,
            trials,
            seed,
        } => {
            let s = resolve_source(&src.source)?;
            let toy_pr = match toy.as_str() {
                "verbatim" => smp::toy_verbatim_bit(*n_bits, 0),
                "constant" => smp::toy_constant(*n_bits),
                "parity" => smp::toy_parity(*n_bits, 0, 1),
                other => anyhow::bail!("unknown toy '{other}'"),
            };
            let sum = smp::influence_sets(&s, &toy_pr, *trials, *seed)?;
            Ok(json!({
                "toy": toy_pr.name,
                "threshold": sum.threshold,
                "pr_la_large": sum.pr_la_large,
                "pr_in_la": sum.pr_in_la,
                "pr_in_lb": sum.pr_in_lb,
                "pr_in_both": sum.pr_in_both,
            }))
        }
    }
}

fn bounds_cmd(cmd: &BoundsCmd) -> Result<Value> {
    match cmd {
        BoundsCmd::Hyp { p, q, z } => {
            let value = bounds::hyp_lower_bound(*p, *q, *z)?;
            let params = measures::HcParams::new(*q, *p)?;
            Ok(json!({
                "value": value,
                "q_prime": params.q_prime,
                "c": params.c,
                "col_floor_exponent": 1.0 - params.c,
            }))
        }
        BoundsCmd::Oracle {
            src,
            n,
            p,
            ell,
            kmax,
        } => {
            let s = resolve_source(&src.source)?;
            let result = bounds::brute_force_col(&s, *n, *p, *ell, *kmax)?;
            Ok(json!({
                "value": result.best_size,
                "searched_pairs": result.searched as u64,
            }))
        }
        BoundsCmd::Scaling { src, n, seed, csv } => {
            let s = resolve_source(&src.source)?;
            let result = bounds::scaling_experiment(&s, n, *seed)?;
            if let Some(path) = csv {
                write_scaling_csv(path, &result)?;
            }
            Ok(json!({
                "value": result.fitted_exponent,
                "r_squared": result.r_squared,
                "fit_reliable": result.fit_reliable,
                "rows": result.rows,
            }))
        }
        BoundsCmd::SigmaCor { m, b } => {
            let rep = bounds::verify_sigma_cor(*m, *b)?;
            Ok(json!({
                "value": rep.measured,
                "bound": rep.bound,
                "ok": rep.ok,
            }))
        }
        BoundsCmd::Shift { rho, sigma, z } => {
            let r = resolve_source(rho)?;
            let sg = resolve_source(sigma)?;
            let rep = bounds::verify_cor_to_agr_shift(&r, &sg, *z)?;
            Ok(serde_json::to_value(rep)?)
        }
    }
}
