use netdp::graph::{write_edge_list_file, GraphJson};
use serde_json::json;

use crate::config::{merged, parse_graph_spec, require, toml_string, CliResult, Global, OutDir};

#[derive(clap::Args)]
pub struct Args {
    /// Graph spec: hypercube:L, ring:N, complete:N, grid:RxC, torus:AxB...,
    /// er:N:Q (Q may be 'auto' = ln(n)/n), geometric:N:R, file:PATH,
    /// file-giant:PATH.
    #[arg(long)]
    spec: Option<String>,
}

pub fn run(args: Args, global: &Global) -> CliResult<()> {
    global.check_keys("graph", &["spec"])?;
    let spec = require(merged(args.spec, global, "graph", "spec", toml_string), "spec")?;
    let g = parse_graph_spec(&spec, global.seed)?;

    let mut out = OutDir::create(global)?;
    let graph_json = serde_json::to_value(GraphJson::from(&g))
        .map_err(|e| crate::config::CliError::Runtime(e.to_string()))?;
    out.write_json("graph.json", &graph_json)?;
    write_edge_list_file(&g, &out.path("graph.txt"))?;
    out.note_artifact("graph.txt");

    let degrees: Vec<usize> = (0..g.n()).map(|v| g.degree(v)).collect();
    out.finish(json!({
        "command": "graph",
        "seed": global.seed,
        "spec": spec,
        "n": g.n(),
        "edges": g.num_edges(),
        "max_degree": degrees.iter().max(),
    }))
}
