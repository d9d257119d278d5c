use clap::ValueEnum;
use netdp::data_io::format_full;
use netdp::gossip::{
    muffliato_randomized, muffliato_sync, t_stop_randomized, t_stop_sync, AveragingRun,
    EdgeActivation,
};
use netdp::rng::{self, stream};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{
    gossip_matrix_for, merged, parse_graph_spec, parse_steps, require, toml_f64, toml_string,
    toml_usize, CliResult, Global, OutDir, Steps,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Protocol {
    Sync,
    Randomized,
}

#[derive(clap::Args)]
pub struct Args {
    /// Which averaging protocol to simulate.
    #[arg(value_enum)]
    protocol: Protocol,
    /// Graph spec (see `netdp graph --help`).
    #[arg(long)]
    graph: Option<String>,
    /// Input noise variance.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Iterations, or 'auto' for the stopping rule.
    #[arg(long)]
    steps: Option<String>,
    /// Standard deviation of the random node inputs (default 1).
    #[arg(long)]
    spread: Option<f64>,
    /// Vector dimension per node (default 1).
    #[arg(long)]
    dim: Option<usize>,
    /// Independent repetitions with derived seeds (default 1).
    #[arg(long)]
    trials: Option<usize>,
}

pub fn run(args: Args, global: &Global) -> CliResult<()> {
    const KEYS: &[&str] = &["graph", "sigma2", "steps", "spread", "dim", "trials"];
    global.check_keys("average", KEYS)?;
    let spec = require(merged(args.graph, global, "average", "graph", toml_string), "graph")?;
    let sigma2 = require(merged(args.sigma2, global, "average", "sigma2", toml_f64), "sigma2")?;
    let steps_raw = merged(args.steps, global, "average", "steps", toml_string)
        .unwrap_or_else(|| "auto".into());
    let steps = parse_steps(&steps_raw)?;
    let spread = merged(args.spread, global, "average", "spread", toml_f64).unwrap_or(1.0);
    let dim = merged(args.dim, global, "average", "dim", toml_usize).unwrap_or(1);
    let trials = merged(args.trials, global, "average", "trials", toml_usize).unwrap_or(1);
    if trials == 0 {
        return Err(crate::config::CliError::config("trials must be >= 1"));
    }

    let graph = parse_graph_spec(&spec, global.seed)?;
    let (w, lazified) = gossip_matrix_for(&graph)?;
    let n = graph.n();
    let activation = match args.protocol {
        Protocol::Randomized => Some(EdgeActivation::uniform_from_renormalized(&w)?),
        Protocol::Sync => None,
    };

    let runs: Vec<CliResult<(usize, AveragingRun)>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = rng::derive_seed(global.seed, stream::TRIAL, trial as u64);
            let mut data_rng = rng::substream(seed, stream::DATA, 0);
            let x = rng::gaussian_vec(&mut data_rng, n * dim, spread * spread);
            let horizon = match steps {
                Steps::Fixed(t) => t,
                Steps::Auto => match &activation {
                    None => t_stop_sync(&w, &x, dim, sigma2)?,
                    Some(act) => t_stop_randomized(act, &x, dim, sigma2)?,
                },
            };
            let run = match &activation {
                None => muffliato_sync(&x, dim, &w, horizon, sigma2, seed)?,
                Some(act) => muffliato_randomized(&x, dim, act, horizon, sigma2, seed)?.0,
            };
            Ok((horizon, run))
        })
        .collect();
    let mut horizons = Vec::with_capacity(trials);
    let mut results = Vec::with_capacity(trials);
    for r in runs {
        let (h, run) = r?;
        horizons.push(h);
        results.push(run);
    }

    let mut out = OutDir::create(global)?;
    let mut csv = String::from("trial,step,mse\n");
    for (trial, run) in results.iter().enumerate() {
        for (t, mse) in run.mse_per_step.iter().enumerate() {
            csv.push_str(&format!("{trial},{t},{}\n", format_full(*mse)));
        }
    }
    out.write_text("mse.csv", &csv)?;
    out.write_json("run.json", &results[0].to_json(false))?;

    let finals: Vec<f64> = results.iter().map(|r| r.final_mse()).collect();
    let mean_final = finals.iter().sum::<f64>() / trials as f64;
    out.write_json(
        "summary.json",
        &json!({
            "final_mse_per_trial": finals,
            "mean_final_mse": mean_final,
            "steps_per_trial": horizons,
        }),
    )?;

    out.finish(json!({
        "command": "average",
        "protocol": format!("{:?}", args.protocol).to_lowercase(),
        "seed": global.seed,
        "graph": spec,
        "n": n,
        "sigma2": sigma2,
        "steps": steps_raw,
        "spread": spread,
        "dim": dim,
        "trials": trials,
        "lazified": lazified,
    }))
}
