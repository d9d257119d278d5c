use clap::ValueEnum;
use netdp::data_io::format_full;
use netdp::gossip::{dropout_schedule, t_stop_randomized, t_stop_sync, EdgeActivation, Schedule};
use netdp::privacy::{collusion_loss, group_loss, pairwise_loss_schedule, PrivacyParams};
use netdp::rng::{self, stream};
use serde_json::json;

use crate::config::{
    gossip_matrix_for, merged, parse_graph_spec, parse_node_list, parse_steps, require, toml_f64,
    toml_string, toml_usize, CliError, CliResult, Global, OutDir, Steps,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Protocol {
    /// Fixed gossip matrix, every edge active each step.
    Sync,
    /// One sampled edge per step (uniform activation from the matrix).
    Randomized,
    /// Fresh random graph over the available nodes each step.
    Dropout,
}

#[derive(clap::Args)]
pub struct Args {
    /// Graph spec; required for sync/randomized protocols.
    #[arg(long)]
    graph: Option<String>,
    #[arg(long, value_enum)]
    protocol: Option<Protocol>,
    /// Iterations, or 'auto' (stopping rule; sync/randomized only).
    #[arg(long)]
    steps: Option<String>,
    /// Rényi order.
    #[arg(long)]
    alpha: Option<f64>,
    /// Input sensitivity.
    #[arg(long)]
    delta: Option<f64>,
    /// Noise variance.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Also write per-distance (min, mean, max) aggregation.
    #[arg(long)]
    by_distance: bool,
    /// Colluding node set, e.g. 1,5,9; reports the pooled loss about --target.
    #[arg(long)]
    collusion: Option<String>,
    #[arg(long)]
    target: Option<usize>,
    /// Protected group, e.g. 2,3; reports the joint loss toward --observer.
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    observer: Option<usize>,
    /// Dropout probability per node per step (dropout protocol).
    #[arg(long)]
    rate: Option<f64>,
    /// Edge probability for the dropout protocol ('auto' = ln(n)/n).
    #[arg(long)]
    q: Option<String>,
    /// Node count for the dropout protocol (which has no input graph).
    #[arg(long)]
    nodes: Option<usize>,
}

pub fn run(args: Args, global: &Global) -> CliResult<()> {
    const KEYS: &[&str] = &[
        "graph", "protocol", "steps", "alpha", "delta", "sigma2", "by_distance", "collusion",
        "target", "group", "observer", "rate", "q", "nodes",
    ];
    global.check_keys("account", KEYS)?;
    let cmd = "account";
    let protocol = args.protocol.unwrap_or(Protocol::Sync);
    let alpha = require(merged(args.alpha, global, cmd, "alpha", toml_f64), "alpha")?;
    let delta = require(merged(args.delta, global, cmd, "delta", toml_f64), "delta")?;
    let sigma2 = require(merged(args.sigma2, global, cmd, "sigma2", toml_f64), "sigma2")?;
    let params = PrivacyParams::new(alpha, delta, sigma2)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let steps_raw =
        merged(args.steps, global, cmd, "steps", toml_string).unwrap_or_else(|| "auto".into());
    let steps = parse_steps(&steps_raw)?;
    let by_distance = args.by_distance
        || global
            .file_value(cmd, "by_distance")
            .and_then(|v| v.as_bool())
            .unwrap_or(false);

    // Build the schedule (and keep the graph for distance joins).
    let mut lazified = false;
    let (schedule, graph) = match protocol {
        Protocol::Sync | Protocol::Randomized => {
            let spec = require(merged(args.graph, global, cmd, "graph", toml_string), "graph")?;
            let graph = parse_graph_spec(&spec, global.seed)?;
            let (w, l) = gossip_matrix_for(&graph)?;
            lazified = l;
            // the stopping rules depend on the inputs; unit-variance inputs
            // drawn from the seed stand in for them
            let mut data_rng = rng::substream(global.seed, stream::DATA, 0);
            let x = rng::gaussian_vec(&mut data_rng, graph.n(), 1.0);
            let sched = match protocol {
                Protocol::Sync => {
                    let horizon = match steps {
                        Steps::Fixed(t) => t,
                        Steps::Auto => t_stop_sync(&w, &x, 1, sigma2)?,
                    };
                    Schedule::constant(w, horizon)
                }
                Protocol::Randomized => {
                    let act = EdgeActivation::uniform_from_renormalized(&w)?;
                    let horizon = match steps {
                        Steps::Fixed(t) => t,
                        Steps::Auto => t_stop_randomized(&act, &x, 1, sigma2)?,
                    };
                    let mut edge_rng = rng::substream(global.seed, stream::EDGE_SAMPLING, 0);
                    Schedule::from_edges(
                        graph.n(),
                        (0..horizon).map(|_| act.sample_edge(&mut edge_rng)),
                    )
                }
                Protocol::Dropout => unreachable!(),
            };
            (sched, Some(graph))
        }
        Protocol::Dropout => {
            let n = require(merged(args.nodes, global, cmd, "nodes", toml_usize), "nodes")?;
            let rate = require(merged(args.rate, global, cmd, "rate", toml_f64), "rate")?;
            let q_raw = require(merged(args.q, global, cmd, "q", toml_string), "q")?;
            let q = if q_raw == "auto" {
                (n as f64).ln() / n as f64
            } else {
                q_raw
                    .parse()
                    .map_err(|_| CliError::config(format!("bad q {q_raw:?}")))?
            };
            let Steps::Fixed(horizon) = steps else {
                return Err(CliError::config(
                    "the dropout protocol needs an explicit --steps count",
                ));
            };
            (dropout_schedule(n, q, rate, horizon, global.seed)?, None)
        }
    };

    let plm = pairwise_loss_schedule(&schedule, &params);
    let mut out = OutDir::create(global)?;
    plm.write_csv(&out.path("ledger.csv"))?;
    out.note_artifact("ledger.csv");
    plm.write_json(&out.path("ledger.json"))?;
    out.note_artifact("ledger.json");

    if by_distance {
        let Some(graph) = &graph else {
            return Err(CliError::config(
                "--by-distance needs a graph-based protocol",
            ));
        };
        let mut csv = String::from("distance,min,mean,max,pairs\n");
        for row in plm.by_distance(graph) {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                row.distance,
                format_full(row.min),
                format_full(row.mean),
                format_full(row.max),
                row.pairs
            ));
        }
        out.write_text("by_distance.csv", &csv)?;
    }

    let mut summary = json!({
        "horizon": schedule.horizon(),
        "unit_loss": params.unit_loss(),
        "max_pairwise_loss": plm.max_off_diagonal(),
        "max_term": plm.max_term,
        "mean_loss_per_node": (0..plm.n).map(|v| plm.mean_loss(v)).collect::<Vec<_>>(),
        "msg_count": plm.msg_count,
    });
    // for random graphs, report the closed-form bound next to the exact
    // per-instance ledger (worst observer degree; needs the weak-convexity
    // hypothesis on sigma^2)
    if let Some((graph, q)) = graph.as_ref().zip(er_probability(&args_graph_spec)) {
        let d = (0..graph.n()).map(|v| graph.degree(v)).max().unwrap_or(0);
        match netdp::privacy::er_bound(graph.n(), q, d, schedule.horizon(), &params) {
            Ok(bound) => {
                summary["er_bound"] = serde_json::to_value(bound).unwrap_or_default();
            }
            Err(e) => summary["er_bound"] = json!({ "unavailable": e.to_string() }),
        }
    }
    if let Some(colluders) = merged(args.collusion, global, cmd, "collusion", toml_string) {
        let target = require(merged(args.target, global, cmd, "target", toml_usize), "target")?;
        let set = parse_node_list(&colluders)?;
        let loss = collusion_loss(&schedule, target, &set, &params)?;
        summary["collusion"] = json!({ "target": target, "set": set, "loss": loss });
    }
    if let Some(group) = merged(args.group, global, cmd, "group", toml_string) {
        let observer = require(
            merged(args.observer, global, cmd, "observer", toml_usize),
            "observer",
        )?;
        let set = parse_node_list(&group)?;
        let loss = group_loss(&schedule, &set, observer, &params)?;
        summary["group"] = json!({ "observer": observer, "set": set, "loss": loss });
    }
    out.write_json("summary.json", &summary)?;

    out.finish(json!({
        "command": "account",
        "protocol": format!("{protocol:?}").to_lowercase(),
        "seed": global.seed,
        "alpha": alpha,
        "delta": delta,
        "sigma2": sigma2,
        "steps": steps_raw,
        "resolved_horizon": schedule.horizon(),
        "by_distance": by_distance,
        "lazified": lazified,
    }))
}
