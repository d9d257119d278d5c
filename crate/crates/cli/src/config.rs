//! Config resolution: TOML file merge, graph specs, and output handling.
//!
//! A config file holds top-level `seed` / `out` plus one table per
//! subcommand whose keys mirror the long flags. Flags override file values;
//! unknown keys in a command's table are rejected.

use std::path::{Path, PathBuf};

use netdp::data_io::atomic_write;
use netdp::gossip::GossipMatrix;
use netdp::graph::{self, Graph};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

/// Core-library failures after configuration is resolved are runtime errors.
impl From<netdp::Error> for CliError {
    fn from(e: netdp::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Globals shared by every command.
pub struct Global {
    pub seed: u64,
    pub out: PathBuf,
    file: Option<toml::Value>,
}

impl Global {
    pub fn resolve(
        seed: Option<u64>,
        out: Option<PathBuf>,
        config: Option<&Path>,
    ) -> CliResult<Self> {
        let file = match config {
            None => None,
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::config(format!("cannot read config {}: {e}", path.display()))
                })?;
                Some(text.parse::<toml::Value>().map_err(|e| {
                    CliError::config(format!("cannot parse config {}: {e}", path.display()))
                })?)
            }
        };
        let seed = seed
            .or_else(|| file.as_ref()?.get("seed")?.as_integer().map(|s| s as u64))
            .unwrap_or(0);
        let out = out
            .or_else(|| {
                file.as_ref()?
                    .get("out")?
                    .as_str()
                    .map(PathBuf::from)
            })
            .unwrap_or_else(|| PathBuf::from("netdp-out"));
        Ok(Self { seed, out, file })
    }

    /// Accessor for `[command].key`, with unknown-key validation done once
    /// per command via [`Global::check_keys`].
    pub fn file_value(&self, command: &str, key: &str) -> Option<&toml::Value> {
        self.file.as_ref()?.get(command)?.get(key)
    }

    pub fn check_keys(&self, command: &str, allowed: &[&str]) -> CliResult<()> {
        let Some(table) = self.file.as_ref().and_then(|f| f.get(command)) else {
            return Ok(());
        };
        let Some(table) = table.as_table() else {
            return Err(CliError::config(format!("[{command}] must be a table")));
        };
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::config(format!(
                    "unknown key {key:?} in [{command}]; allowed: {allowed:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Merge helper: CLI flag beats config file beats default.
pub fn merged<T: Clone>(
    flag: Option<T>,
    global: &Global,
    command: &str,
    key: &str,
    parse: impl Fn(&toml::Value) -> Option<T>,
) -> Option<T> {
    flag.or_else(|| global.file_value(command, key).and_then(|v| parse(&v.clone())))
}

pub fn toml_f64(v: &toml::Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

pub fn toml_usize(v: &toml::Value) -> Option<usize> {
    v.as_integer().map(|i| i as usize)
}

pub fn toml_string(v: &toml::Value) -> Option<String> {
    v.as_str().map(str::to_owned)
}

pub fn require<T>(value: Option<T>, name: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::config(format!("missing required option --{name}")))
}

/// Parse a graph spec: `hypercube:L`, `ring:N`, `complete:N`, `grid:RxC`,
/// `torus:AxB[xC...]`, `er:N:Q`, `geometric:N:R`, or `file:PATH`
/// (edge-list text; `file-giant:PATH` keeps the largest component).
pub fn parse_graph_spec(spec: &str, seed: u64) -> CliResult<Graph> {
    let bad = |msg: String| CliError::config(format!("graph spec {spec:?}: {msg}"));
    let mut parts = spec.splitn(2, ':');
    let kind = parts.next().unwrap_or_default();
    let rest = parts.next().unwrap_or_default();
    let int = |s: &str| -> CliResult<usize> {
        s.parse().map_err(|_| bad(format!("expected integer, got {s:?}")))
    };
    let float = |s: &str| -> CliResult<f64> {
        s.parse().map_err(|_| bad(format!("expected number, got {s:?}")))
    };
    let graph = match kind {
        "hypercube" => graph::gen_hypercube(int(rest)? as u32)?,
        "ring" => graph::gen_ring(int(rest)?)?,
        "complete" => graph::gen_complete(int(rest)?)?,
        "grid" => {
            let dims: Vec<&str> = rest.split('x').collect();
            if dims.len() != 2 {
                return Err(bad("grid wants RxC".into()));
            }
            graph::gen_grid(int(dims[0])?, int(dims[1])?)?
        }
        "torus" => {
            let dims: Vec<usize> = rest
                .split('x')
                .map(int)
                .collect::<CliResult<_>>()?;
            graph::gen_torus(&dims)?
        }
        "er" => {
            let (n, q) = rest
                .split_once(':')
                .ok_or_else(|| bad("er wants N:Q".into()))?;
            let n = int(n)?;
            let q = if q == "auto" {
                (n as f64).ln() / n as f64
            } else {
                float(q)?
            };
            graph::gen_erdos_renyi(n, q, seed)?
        }
        "geometric" => {
            let (n, r) = rest
                .split_once(':')
                .ok_or_else(|| bad("geometric wants N:R".into()))?;
            graph::gen_geometric(int(n)?, float(r)?, seed)?
        }
        "file" => graph::read_edge_list_file(Path::new(rest), false)?,
        "file-giant" => graph::read_edge_list_file(Path::new(rest), true)?,
        other => return Err(bad(format!("unknown kind {other:?}"))),
    };
    Ok(graph)
}

/// Gossip matrix for a graph; bipartite supports (zero spectral gap) are
/// made lazy so the accelerated protocol and the stopping rules apply.
/// Returns the matrix and whether lazification happened.
pub fn gossip_matrix_for(graph: &Graph) -> CliResult<(GossipMatrix, bool)> {
    let w = GossipMatrix::hamilton(graph);
    match w.spectral_gap() {
        Ok(gap) if gap > 0.0 => Ok((w, false)),
        Ok(_) => Ok((w.lazy(), true)),
        Err(e) => Err(e.into()),
    }
}

/// Output directory with a manifest of written artifacts. Timestamps live
/// only in `meta.json` so result files are byte-reproducible.
pub struct OutDir {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl OutDir {
    pub fn create(global: &Global) -> CliResult<Self> {
        std::fs::create_dir_all(&global.out)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", global.out.display())))?;
        Ok(Self {
            dir: global.out.clone(),
            artifacts: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> CliResult<()> {
        let bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        atomic_write(&self.path(name), &bytes)?;
        self.artifacts.push(name.to_owned());
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<()> {
        atomic_write(&self.path(name), text.as_bytes())?;
        self.artifacts.push(name.to_owned());
        Ok(())
    }

    pub fn note_artifact(&mut self, name: &str) {
        self.artifacts.push(name.to_owned());
    }

    /// Write `resolved_config.json`, `manifest.json`, and `meta.json`.
    pub fn finish(mut self, resolved_config: serde_json::Value) -> CliResult<()> {
        self.write_json("resolved_config.json", &resolved_config)?;
        let manifest = serde_json::json!({ "artifacts": self.artifacts });
        atomic_write(&self.path("manifest.json"), &serde_json::to_vec_pretty(&manifest).unwrap())?;
        let meta = serde_json::json!({
            "written_unix_ms": std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        });
        atomic_write(&self.path("meta.json"), &serde_json::to_vec_pretty(&meta).unwrap())?;
        Ok(())
    }
}

/// Parse a `--steps`-style value: a number or `auto`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Steps {
    Auto,
    Fixed(usize),
}

pub fn parse_steps(s: &str) -> CliResult<Steps> {
    if s == "auto" {
        Ok(Steps::Auto)
    } else {
        s.parse()
            .map(Steps::Fixed)
            .map_err(|_| CliError::config(format!("steps must be an integer or 'auto', got {s:?}")))
    }
}

/// Comma-separated node list, e.g. `--collusion 1,5,9`.
pub fn parse_node_list(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| CliError::config(format!("bad node id {p:?}")))
        })
        .collect()
}
