use netdp::data_io::format_full;
use netdp::gossip::{dropout_schedule, run_schedule};
use netdp::privacy::{pairwise_loss_schedule, PrivacyParams};
use netdp::rng::{self, stream};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{merged, require, toml_f64, toml_usize, CliError, CliResult, Global, OutDir};

#[derive(clap::Args)]
pub struct Args {
    /// Total node count.
    #[arg(long)]
    nodes: Option<usize>,
    /// Edge probability of the per-step random graph over available nodes.
    #[arg(long)]
    q: Option<f64>,
    /// Probability that a node is unavailable at a given step.
    #[arg(long)]
    rate: Option<f64>,
    /// Gossip steps per repetition.
    #[arg(long)]
    steps: Option<usize>,
    /// Independent repetitions (default 10).
    #[arg(long)]
    reps: Option<usize>,
    /// Input noise variance.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Standard deviation of the random node inputs (default 1).
    #[arg(long)]
    spread: Option<f64>,
    /// Rényi order (default 2).
    #[arg(long)]
    alpha: Option<f64>,
    /// Input sensitivity (default 1).
    #[arg(long)]
    delta: Option<f64>,
}

pub fn run(args: Args, global: &Global) -> CliResult<()> {
    const KEYS: &[&str] = &[
        "nodes", "q", "rate", "steps", "reps", "sigma2", "spread", "alpha", "delta",
    ];
    global.check_keys("dropout", KEYS)?;
    let cmd = "dropout";
    let nodes = require(merged(args.nodes, global, cmd, "nodes", toml_usize), "nodes")?;
    let q = require(merged(args.q, global, cmd, "q", toml_f64), "q")?;
    let rate = require(merged(args.rate, global, cmd, "rate", toml_f64), "rate")?;
    let steps = require(merged(args.steps, global, cmd, "steps", toml_usize), "steps")?;
    let reps = merged(args.reps, global, cmd, "reps", toml_usize).unwrap_or(10);
    let sigma2 = require(merged(args.sigma2, global, cmd, "sigma2", toml_f64), "sigma2")?;
    let spread = merged(args.spread, global, cmd, "spread", toml_f64).unwrap_or(1.0);
    let alpha = merged(args.alpha, global, cmd, "alpha", toml_f64).unwrap_or(2.0);
    let delta = merged(args.delta, global, cmd, "delta", toml_f64).unwrap_or(1.0);
    let params =
        PrivacyParams::new(alpha, delta, sigma2).map_err(|e| CliError::Config(e.to_string()))?;

    let rows: Vec<CliResult<(f64, f64, f64)>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let seed = rng::derive_seed(global.seed, stream::TRIAL, rep as u64);
            let sched = dropout_schedule(nodes, q, rate, steps, seed)?;
            let mut data_rng = rng::substream(seed, stream::DATA, 0);
            let x = rng::gaussian_vec(&mut data_rng, nodes, spread * spread);
            let run = run_schedule(&x, 1, &sched, sigma2, seed, false);
            let plm = pairwise_loss_schedule(&sched, &params);
            let mean_eps =
                (0..nodes).map(|v| plm.mean_loss(v)).sum::<f64>() / nodes as f64;
            Ok((run.final_mse(), mean_eps, plm.max_off_diagonal()))
        })
        .collect();

    let mut final_mse = Vec::with_capacity(reps);
    let mut mean_eps = Vec::with_capacity(reps);
    let mut max_eps = Vec::with_capacity(reps);
    for r in rows {
        let (m, e, x) = r?;
        final_mse.push(m);
        mean_eps.push(e);
        max_eps.push(x);
    }

    let mut out = OutDir::create(global)?;
    let mut csv = String::from("rep,final_mse,mean_eps,max_eps\n");
    for rep in 0..reps {
        csv.push_str(&format!(
            "{rep},{},{},{}\n",
            format_full(final_mse[rep]),
            format_full(mean_eps[rep]),
            format_full(max_eps[rep]),
        ));
    }
    out.write_text("summary.csv", &csv)?;

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let std = |v: &[f64]| {
        let m = mean(v);
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
    };
    out.write_json(
        "summary.json",
        &json!({
            "privacy_loss_mean": mean(&mean_eps),
            "privacy_loss_std": std(&mean_eps),
            "final_mse_mean": mean(&final_mse),
            "final_mse_std": std(&final_mse),
            "noise_floor_2sigma2_over_n": 2.0 * sigma2 / nodes as f64,
        }),
    )?;

    out.finish(json!({
        "command": "dropout",
        "seed": global.seed,
        "nodes": nodes,
        "q": q,
        "rate": rate,
        "steps": steps,
        "reps": reps,
        "sigma2": sigma2,
        "spread": spread,
        "alpha": alpha,
        "delta": delta,
    }))
}
