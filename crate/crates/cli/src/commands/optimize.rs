use clap::ValueEnum;
use netdp::data_io::{
    format_full, load_csv_dataset, partition_indices, standardize_and_normalize,
    synthetic_classification, PartitionMode,
};
use netdp::optim::{
    central_baseline, muffliato_gd, muffliato_sgd, GraphSource, Objective, OptimConfig, OptimRun,
};
use netdp::rng::{self, stream};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{
    gossip_matrix_for, merged, parse_graph_spec, require, toml_f64, toml_string, toml_usize,
    CliError, CliResult, Global, OutDir,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptMode {
    Gd,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    /// Also run the trusted-aggregator simulation with matched noise.
    Central,
    /// Report the local-DP composition value for comparison.
    Ldp,
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(value_enum)]
    mode: OptMode,
    /// Numeric CSV with a header row; mutually exclusive with --synthetic.
    #[arg(long)]
    dataset: Option<std::path::PathBuf>,
    /// Label column name (default "label").
    #[arg(long)]
    label: Option<String>,
    /// Synthetic dataset spec "rows:dim" when no CSV is supplied.
    #[arg(long)]
    synthetic: Option<String>,
    /// Binarize labels at their median before training.
    #[arg(long)]
    binarize: bool,
    /// Number of nodes the training set is split across.
    #[arg(long)]
    nodes: Option<usize>,
    /// Fresh random graph per step with this edge probability ('auto' = ln(n)/n).
    #[arg(long)]
    q: Option<String>,
    /// Fixed communication graph spec (alternative to --q).
    #[arg(long)]
    graph: Option<String>,
    /// Step size.
    #[arg(long)]
    step: Option<f64>,
    /// Noise variance sigma^2 (noise added as nu^2 sigma^2 per coordinate).
    #[arg(long)]
    sigma2: Option<f64>,
    /// Outer optimization steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Gossip rounds per step, or 'auto' for the round formula.
    #[arg(long)]
    rounds: Option<String>,
    /// Independent trials with derived seeds (default 1).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    /// L2 regularization strength (default 1e-3).
    #[arg(long)]
    mu_reg: Option<f64>,
    /// Rényi order for the ledger (default 2).
    #[arg(long)]
    alpha: Option<f64>,
    /// Held-out fraction (default 0.2).
    #[arg(long)]
    test_fraction: Option<f64>,
}

/// Ledger matrices beyond this node count are summarized per node instead
/// of dumped in full (an n x n CSV at n = 2000 is ~100 MB).
const FULL_LEDGER_LIMIT: usize = 1024;

pub fn run(args: Args, global: &Global) -> CliResult<()> {
    const KEYS: &[&str] = &[
        "dataset", "label", "synthetic", "binarize", "nodes", "q", "graph", "step", "sigma2",
        "steps", "rounds", "trials", "baseline", "mu_reg", "alpha", "test_fraction",
    ];
    global.check_keys("optimize", KEYS)?;
    let cmd = "optimize";

    let nodes = require(merged(args.nodes, global, cmd, "nodes", toml_usize), "nodes")?;
    let step = require(merged(args.step, global, cmd, "step", toml_f64), "step")?;
    let outer_steps = require(merged(args.steps, global, cmd, "steps", toml_usize), "steps")?;
    let sigma2 = merged(args.sigma2, global, cmd, "sigma2", toml_f64).unwrap_or(0.0);
    let trials = merged(args.trials, global, cmd, "trials", toml_usize).unwrap_or(1).max(1);
    let mu_reg = merged(args.mu_reg, global, cmd, "mu_reg", toml_f64).unwrap_or(1e-3);
    let alpha = merged(args.alpha, global, cmd, "alpha", toml_f64).unwrap_or(2.0);
    let test_fraction =
        merged(args.test_fraction, global, cmd, "test_fraction", toml_f64).unwrap_or(0.2);
    let rounds_raw = merged(args.rounds, global, cmd, "rounds", toml_string)
        .unwrap_or_else(|| "auto".into());
    let gossip_rounds = if rounds_raw == "auto" {
        None
    } else {
        Some(rounds_raw.parse::<usize>().map_err(|_| {
            CliError::config(format!("rounds must be an integer or 'auto', got {rounds_raw:?}"))
        })?)
    };

    // dataset
    let dataset_path = merged(args.dataset, global, cmd, "dataset", |v| {
        v.as_str().map(std::path::PathBuf::from)
    });
    let synthetic = merged(args.synthetic, global, cmd, "synthetic", toml_string);
    let mut raw = match (&dataset_path, &synthetic) {
        (Some(path), None) => {
            let label =
                merged(args.label, global, cmd, "label", toml_string).unwrap_or_else(|| "label".into());
            load_csv_dataset(path, &label)?
        }
        (None, Some(spec)) => {
            let (rows, dim) = spec
                .split_once(':')
                .and_then(|(r, d)| Some((r.parse().ok()?, d.parse().ok()?)))
                .ok_or_else(|| CliError::config(format!("synthetic wants rows:dim, got {spec:?}")))?;
            synthetic_classification(rows, dim, 0.1, rng::derive_seed(global.seed, stream::DATA, 0))
        }
        _ => {
            return Err(CliError::config(
                "exactly one of --dataset or --synthetic is required",
            ))
        }
    };
    if args.binarize
        || global
            .file_value(cmd, "binarize")
            .and_then(|v| v.as_bool())
            .unwrap_or(false)
    {
        raw.binarize_labels_by_median();
    }
    let normalized = standardize_and_normalize(&raw)?;

    // train/test split, then per-node partition of the training rows
    let rows = normalized.features.len();
    let test_rows = ((rows as f64) * test_fraction).round() as usize;
    let split = partition_indices(rows, rows, PartitionMode::Shuffle, global.seed)?;
    let order: Vec<usize> = split.into_iter().flatten().collect();
    let (test_idx, train_idx) = order.split_at(test_rows);
    let train_features: Vec<Vec<f64>> = train_idx
        .iter()
        .map(|&r| normalized.features[r].clone())
        .collect();
    let train_labels: Vec<f64> = train_idx.iter().map(|&r| normalized.labels[r]).collect();
    let test_features: Vec<Vec<f64>> = test_idx
        .iter()
        .map(|&r| normalized.features[r].clone())
        .collect();
    let test_labels: Vec<f64> = test_idx.iter().map(|&r| normalized.labels[r]).collect();
    let shards = partition_indices(
        train_features.len(),
        nodes,
        PartitionMode::Shuffle,
        rng::derive_seed(global.seed, stream::PARTITION, 7),
    )?;
    let objective = Objective::from_partition(&train_features, &train_labels, &shards, mu_reg)?;

    // graph source
    let graph_spec = merged(args.graph, global, cmd, "graph", toml_string);
    let q_raw = merged(args.q, global, cmd, "q", toml_string);
    let (source, source_desc) = match (&graph_spec, &q_raw) {
        (Some(spec), None) => {
            let g = parse_graph_spec(spec, global.seed)?;
            if g.n() != nodes {
                return Err(CliError::config(format!(
                    "graph has {} nodes but --nodes is {nodes}",
                    g.n()
                )));
            }
            let (w, _) = gossip_matrix_for(&g)?;
            (GraphSource::Fixed(w), format!("fixed:{spec}"))
        }
        (None, Some(q_raw)) => {
            let q = if q_raw == "auto" {
                (nodes as f64).ln() / nodes as f64
            } else {
                q_raw
                    .parse()
                    .map_err(|_| CliError::config(format!("bad q {q_raw:?}")))?
            };
            (GraphSource::FreshEr { n: nodes, q }, format!("fresh-er:q={q}"))
        }
        _ => {
            return Err(CliError::config(
                "exactly one of --graph (fixed) or --q (fresh random graphs) is required",
            ))
        }
    };

    let baseline = args.baseline.or_else(|| {
        match global
            .file_value(cmd, "baseline")
            .and_then(|v| v.as_str())?
        {
            "central" => Some(Baseline::Central),
            "ldp" => Some(Baseline::Ldp),
            _ => None,
        }
    });

    let base_cfg = {
        let mut cfg = OptimConfig::new(outer_steps, step, sigma2, global.seed);
        cfg.gossip_rounds = gossip_rounds;
        cfg.alpha = alpha;
        cfg
    };
    let test_set = (!test_features.is_empty()).then_some((&test_features[..], &test_labels[..]));

    let outcomes: Vec<CliResult<(OptimRun, Option<OptimRun>)>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut cfg = base_cfg.clone();
            cfg.seed = rng::derive_seed(global.seed, stream::TRIAL, trial as u64);
            // the exact ledger is expensive at scale; one trial carries it
            cfg.compute_ledger = trial == 0;
            let run = match args.mode {
                OptMode::Gd => muffliato_gd(&objective, &cfg, &source, test_set)?,
                OptMode::Sgd => muffliato_sgd(&objective, &cfg, &source, test_set)?,
            };
            let central = match baseline {
                Some(Baseline::Central) => Some(central_baseline(&objective, &cfg, test_set)?),
                _ => None,
            };
            Ok((run, central))
        })
        .collect();
    let mut runs = Vec::with_capacity(trials);
    for o in outcomes {
        runs.push(o?);
    }

    let mut out = OutDir::create(global)?;
    let mut csv = String::from("trial,step,train_loss,train_accuracy,test_loss,test_accuracy,central_test_accuracy\n");
    for (trial, (run, central)) in runs.iter().enumerate() {
        for t in 0..run.train_loss.len() {
            let test_l = run.test_loss.get(t).copied().unwrap_or(f64::NAN);
            let test_a = run.test_accuracy.get(t).copied().unwrap_or(f64::NAN);
            let central_a = central
                .as_ref()
                .and_then(|c| c.test_accuracy.get(t).copied())
                .unwrap_or(f64::NAN);
            csv.push_str(&format!(
                "{trial},{t},{},{},{},{},{}\n",
                format_full(run.train_loss[t]),
                format_full(run.train_accuracy[t]),
                format_full(test_l),
                format_full(test_a),
                format_full(central_a),
            ));
        }
    }
    out.write_text("metrics.csv", &csv)?;

    // ledger of the first trial
    let mut ledger_summary = json!(null);
    if let Some(ledger) = &runs[0].0.ledger {
        if nodes <= FULL_LEDGER_LIMIT {
            ledger.write_csv(&out.path("ledger.csv"))?;
            out.note_artifact("ledger.csv");
            ledger.write_json(&out.path("ledger.json"))?;
            out.note_artifact("ledger.json");
        } else {
            let mut csv = String::from("node,mean_loss,max_incoming_loss,msg_count\n");
            for v in 0..nodes {
                let max_in = (0..nodes)
                    .map(|u| ledger.get(u, v))
                    .fold(0.0f64, f64::max);
                csv.push_str(&format!(
                    "{v},{},{},{}\n",
                    format_full(ledger.mean_loss(v)),
                    format_full(max_in),
                    ledger.msg_count[v]
                ));
            }
            out.write_text("ledger_by_node.csv", &csv)?;
        }
        ledger_summary = json!({
            "max_pairwise_loss": ledger.max_off_diagonal(),
            "off_diagonal_cv": ledger.off_diagonal_cv(),
            "unit_loss": ledger.params().unit_loss(),
            "file": if nodes <= FULL_LEDGER_LIMIT { "ledger.csv" } else { "ledger_by_node.csv" },
        });
    }

    let final_acc: Vec<f64> = runs
        .iter()
        .filter_map(|(r, _)| r.final_test_accuracy())
        .collect();
    let central_acc: Vec<f64> = runs
        .iter()
        .filter_map(|(_, c)| c.as_ref()?.final_test_accuracy())
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let ldp_epsilon = (sigma2 > 0.0).then(|| {
        outer_steps as f64 * alpha * objective.grad_sensitivity().powi(2) / (2.0 * sigma2)
    });
    out.write_json(
        "summary.json",
        &json!({
            "trials": trials,
            "k_used": runs[0].0.k_used,
            "lambda_used": runs[0].0.lambda_used,
            "mean_final_test_accuracy": mean(&final_acc),
            "final_test_accuracy_per_trial": final_acc,
            "central_mean_final_test_accuracy": if central_acc.is_empty() { json!(null) } else { json!(mean(&central_acc)) },
            "ldp_epsilon": ldp_epsilon,
            "ledger": ledger_summary,
        }),
    )?;

    out.finish(json!({
        "command": "optimize",
        "mode": format!("{:?}", args.mode).to_lowercase(),
        "seed": global.seed,
        "nodes": nodes,
        "source": source_desc,
        "dataset": dataset_path.map(|p| p.display().to_string()),
        "synthetic": synthetic,
        "step": step,
        "sigma2": sigma2,
        "steps": outer_steps,
        "rounds": rounds_raw,
        "trials": trials,
        "mu_reg": mu_reg,
        "alpha": alpha,
        "test_fraction": test_fraction,
        "train_rows": train_features.len(),
        "dropped_columns": normalized.dropped_columns,
    }))
}
