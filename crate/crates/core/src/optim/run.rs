//! The decentralized optimization loop and its trusted-aggregator baseline.
//!
//! Each outer step: every node takes one local gradient step, then the
//! perturbed parameters go through `k` rounds of accelerated gossip with
//! per-coordinate noise variance `nu^2 sigma^2` (so the privacy loss per
//! observed message is independent of the step size). With a fresh random
//! graph per step the privacy loss spreads more evenly across pairs.

use serde_json::json;

use super::{evaluate, k_rounds, Objective};
use crate::error::{Error, Result};
use crate::gossip::{chebyshev_gamma, chebyshev_mix, GossipMatrix};
use crate::graph::gen_erdos_renyi;
use crate::privacy::{sgd_privacy_loss, sgd_privacy_loss_schedule, PairwiseLossMatrix, PrivacyParams};
use crate::rng::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Gd,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Constant(f64),
    /// `nu_t = nu / (1 + t / kappa)` with the objective's condition number.
    Decay(f64),
}

impl StepSize {
    fn at(&self, t: usize, kappa: f64) -> f64 {
        match *self {
            StepSize::Constant(nu) => nu,
            StepSize::Decay(nu) => nu / (1.0 + t as f64 / kappa),
        }
    }

    fn base(&self) -> f64 {
        match *self {
            StepSize::Constant(nu) | StepSize::Decay(nu) => nu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    /// Uniform average of the per-step means over the last half of the
    /// trajectory.
    TailAverage,
    FinalIterate,
}

/// Where each step's gossip matrix comes from.
#[derive(Debug, Clone)]
pub enum GraphSource {
    Fixed(GossipMatrix),
    /// A fresh connected G(n, q) draw per outer step.
    FreshEr { n: usize, q: f64 },
}

#[derive(Debug, Clone)]
pub struct OptimConfig {
    pub mode: Mode,
    pub step: StepSize,
    pub outer_steps: usize,
    /// Gossip rounds per outer step; `None` resolves via [`k_rounds`].
    pub gossip_rounds: Option<usize>,
    pub sigma2: f64,
    pub seed: u64,
    pub output: OutputMode,
    /// Rényi order for the attached privacy ledger.
    pub alpha: f64,
    /// Override for the empirically estimated `(zeta_bar^2, rho_bar^2)`.
    pub heterogeneity_override: Option<(f64, f64)>,
    /// Whether to attach the exact pairwise ledger (the accounting pass
    /// costs far more than the optimization itself at scale; repeated
    /// trials usually only need it once).
    pub compute_ledger: bool,
}

impl OptimConfig {
    pub fn new(outer_steps: usize, step: f64, sigma2: f64, seed: u64) -> Self {
        Self {
            mode: Mode::Gd,
            step: StepSize::Constant(step),
            outer_steps,
            gossip_rounds: None,
            sigma2,
            seed,
            output: OutputMode::TailAverage,
            alpha: 2.0,
            heterogeneity_override: None,
            compute_ledger: true,
        }
    }
}

/// Trajectory, metrics, and attached privacy ledger of one optimization run.
#[derive(Debug, Clone)]
pub struct OptimRun {
    pub seed: u64,
    pub k_used: usize,
    pub lambda_used: f64,
    /// Mean parameter per step, `outer_steps + 1` entries.
    pub theta_bar: Vec<Vec<f64>>,
    pub theta_out: Vec<f64>,
    /// Objective value (with regularizer) of the per-step mean.
    pub train_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub test_loss: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    pub ledger: Option<PairwiseLossMatrix>,
    /// Realized per-step matrices in fresh-graph mode, for ledger replay.
    pub round_matrices: Option<Vec<GossipMatrix>>,
}

impl OptimRun {
    pub fn final_test_accuracy(&self) -> Option<f64> {
        self.test_accuracy.last().copied()
    }

    pub fn metrics_json(&self) -> serde_json::Value {
        json!({
            "seed": self.seed,
            "k": self.k_used,
            "lambda": self.lambda_used,
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "test_loss": self.test_loss,
            "test_accuracy": self.test_accuracy,
            "theta_out": self.theta_out,
        })
    }
}

pub fn muffliato_gd(
    obj: &Objective,
    cfg: &OptimConfig,
    source: &GraphSource,
    test: Option<(&[Vec<f64>], &[f64])>,
) -> Result<OptimRun> {
    let cfg = OptimConfig {
        mode: Mode::Gd,
        ..cfg.clone()
    };
    run_decentralized(obj, &cfg, source, test)
}

pub fn muffliato_sgd(
    obj: &Objective,
    cfg: &OptimConfig,
    source: &GraphSource,
    test: Option<(&[Vec<f64>], &[f64])>,
) -> Result<OptimRun> {
    let cfg = OptimConfig {
        mode: Mode::Sgd,
        ..cfg.clone()
    };
    run_decentralized(obj, &cfg, source, test)
}

fn column_mean(state: &[f64], n: usize, dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    for v in 0..n {
        for d in 0..dim {
            mean[d] += state[v * dim + d];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    mean
}

struct MetricsTracker<'a> {
    obj: &'a Objective,
    train_set: (Vec<Vec<f64>>, Vec<f64>),
    test: Option<(&'a [Vec<f64>], &'a [f64])>,
    initial_loss: f64,
    train_loss: Vec<f64>,
    train_accuracy: Vec<f64>,
    test_loss: Vec<f64>,
    test_accuracy: Vec<f64>,
}

impl<'a> MetricsTracker<'a> {
    fn new(obj: &'a Objective, test: Option<(&'a [Vec<f64>], &'a [f64])>) -> Self {
        Self {
            obj,
            train_set: obj.all_samples(),
            test,
            initial_loss: f64::NAN,
            train_loss: Vec::new(),
            train_accuracy: Vec::new(),
            test_loss: Vec::new(),
            test_accuracy: Vec::new(),
        }
    }

    fn record(&mut self, step: usize, theta_bar: &[f64]) -> Result<()> {
        let loss = self.obj.train_loss(theta_bar);
        if step == 0 {
            self.initial_loss = loss;
        } else if loss > 10.0 * self.initial_loss {
            return Err(Error::Divergence {
                step,
                loss,
                initial: self.initial_loss,
            });
        }
        let (_, acc) = evaluate(theta_bar, &self.train_set.0, &self.train_set.1)?;
        self.train_loss.push(loss);
        self.train_accuracy.push(acc);
        if let Some((xs, ys)) = self.test {
            let (tl, ta) = evaluate(theta_bar, xs, ys)?;
            self.test_loss.push(tl);
            self.test_accuracy.push(ta);
        }
        Ok(())
    }
}

fn resolve_rounds(
    obj: &Objective,
    cfg: &OptimConfig,
    lambda: f64,
) -> Result<usize> {
    if let Some(k) = cfg.gossip_rounds {
        return Ok(k.max(1));
    }
    let (zeta2, rho2) = match cfg.heterogeneity_override {
        Some(pair) => pair,
        None => {
            let zero = vec![0.0; obj.dim()];
            obj.heterogeneity_at(&zero)
        }
    };
    let rho2 = match cfg.mode {
        Mode::Gd => 0.0,
        Mode::Sgd => rho2,
    };
    k_rounds(lambda, obj.n(), zeta2, rho2, cfg.sigma2, obj.dim())
}

fn local_steps(
    obj: &Objective,
    cfg: &OptimConfig,
    theta: &mut [f64],
    t: usize,
    nu: f64,
) {
    let (n, dim) = (obj.n(), obj.dim());
    let mut sampler = rng::substream(cfg.seed, stream::OPTIM, (2 * t + 1) as u64);
    for v in 0..n {
        let grad = match cfg.mode {
            Mode::Gd => obj.local_gradient(v, &theta[v * dim..(v + 1) * dim]),
            Mode::Sgd => {
                let idx = rand::Rng::random_range(&mut sampler, 0..obj.shard(v).len());
                obj.sample_gradient(v, idx, &theta[v * dim..(v + 1) * dim])
            }
        };
        for (d, g) in theta[v * dim..(v + 1) * dim].iter_mut().zip(grad) {
            *d -= nu * g;
        }
    }
}

/// Shared driver for Muffliato-GD and Muffliato-SGD.
pub(crate) fn run_decentralized(
    obj: &Objective,
    cfg: &OptimConfig,
    source: &GraphSource,
    test: Option<(&[Vec<f64>], &[f64])>,
) -> Result<OptimRun> {
    let (n, dim) = (obj.n(), obj.dim());
    if cfg.outer_steps == 0 {
        return Err(Error::InvalidParameter("need at least one step".into()));
    }
    if cfg.sigma2 < 0.0 {
        return Err(Error::InvalidParameter("sigma2 must be >= 0".into()));
    }
    if cfg.step.base() <= 0.0 {
        return Err(Error::InvalidParameter("step size must be > 0".into()));
    }

    // Reference matrix and spectral gap. In fresh-graph mode the gap of the
    // first draw stands in for all steps (the draws concentrate), so the
    // mixing scale and round count are fixed once.
    let first = match source {
        GraphSource::Fixed(w) => {
            if w.n() != n {
                return Err(Error::InvalidParameter("matrix size != node count".into()));
            }
            w.clone()
        }
        GraphSource::FreshEr { n: gn, q } => {
            if *gn != n {
                return Err(Error::InvalidParameter("graph size != node count".into()));
            }
            let g = gen_erdos_renyi(n, *q, rng::derive_seed(cfg.seed, stream::GRAPH_GEN, 0))?;
            GossipMatrix::hamilton(&g)
        }
    };
    let lambda = first.spectral_gap()?;
    let gamma = chebyshev_gamma(lambda)?;
    let k = resolve_rounds(obj, cfg, lambda)?;
    let fresh = matches!(source, GraphSource::FreshEr { .. });

    let kappa = obj.condition_number();
    let mut theta = vec![0.0; n * dim];
    let mut metrics = MetricsTracker::new(obj, test);
    let mut theta_bar = vec![column_mean(&theta, n, dim)];
    metrics.record(0, &theta_bar[0])?;
    let mut matrices: Vec<GossipMatrix> = vec![first];

    for t in 0..cfg.outer_steps {
        let nu = cfg.step.at(t, kappa);
        local_steps(obj, cfg, &mut theta, t, nu);

        if fresh && t >= matrices.len() {
            let q = match source {
                GraphSource::FreshEr { q, .. } => *q,
                GraphSource::Fixed(_) => unreachable!(),
            };
            let g = gen_erdos_renyi(n, q, rng::derive_seed(cfg.seed, stream::GRAPH_GEN, t as u64))?;
            matrices.push(GossipMatrix::hamilton(&g));
        }
        let w_t = if fresh { &matrices[t] } else { &matrices[0] };

        let mut nrng = rng::substream(cfg.seed, stream::OPTIM, (2 * t) as u64);
        let eta = rng::gaussian_vec(&mut nrng, n * dim, nu * nu * cfg.sigma2);
        for (x, e) in theta.iter_mut().zip(eta) {
            *x += e;
        }
        theta = chebyshev_mix(theta, dim, w_t, k, gamma, |_| {});

        let bar = column_mean(&theta, n, dim);
        metrics.record(t + 1, &bar)?;
        theta_bar.push(bar);
    }

    let theta_out = output_estimate(&theta_bar, cfg.output, dim);
    let ledger = if cfg.sigma2 > 0.0 && cfg.compute_ledger {
        let params = PrivacyParams::new(cfg.alpha, obj.grad_sensitivity(), cfg.sigma2)?;
        Some(if fresh {
            sgd_privacy_loss_schedule(&matrices, k, &params)
        } else {
            sgd_privacy_loss(&matrices[0], cfg.outer_steps, k, &params)
        })
    } else {
        None
    };

    Ok(OptimRun {
        seed: cfg.seed,
        k_used: k,
        lambda_used: lambda,
        theta_bar,
        theta_out,
        train_loss: metrics.train_loss,
        train_accuracy: metrics.train_accuracy,
        test_loss: metrics.test_loss,
        test_accuracy: metrics.test_accuracy,
        ledger,
        round_matrices: fresh.then_some(matrices),
    })
}

fn output_estimate(theta_bar: &[Vec<f64>], mode: OutputMode, dim: usize) -> Vec<f64> {
    match mode {
        OutputMode::FinalIterate => theta_bar.last().expect("non-empty").clone(),
        OutputMode::TailAverage => {
            let t = theta_bar.len() - 1;
            let start = t / 2;
            let mut out = vec![0.0; dim];
            for bar in &theta_bar[start..] {
                for (o, b) in out.iter_mut().zip(bar) {
                    *o += b;
                }
            }
            let count = (theta_bar.len() - start) as f64;
            for o in &mut out {
                *o /= count;
            }
            out
        }
    }
}

/// Trusted-aggregator baseline: the same local steps, but a curator
/// averages the updates exactly and publishes one noisy mean with
/// per-coordinate variance `nu^2 sigma^2 / n` (sensitivity shrinks by `n`).
pub fn central_baseline(
    obj: &Objective,
    cfg: &OptimConfig,
    test: Option<(&[Vec<f64>], &[f64])>,
) -> Result<OptimRun> {
    let (n, dim) = (obj.n(), obj.dim());
    if cfg.outer_steps == 0 {
        return Err(Error::InvalidParameter("need at least one step".into()));
    }
    let kappa = obj.condition_number();
    // all nodes share the same parameter; store it replicated for the
    // gradient code
    let mut theta = vec![0.0; n * dim];
    let mut metrics = MetricsTracker::new(obj, test);
    let mut theta_bar = vec![vec![0.0; dim]];
    metrics.record(0, &theta_bar[0])?;

    for t in 0..cfg.outer_steps {
        let nu = cfg.step.at(t, kappa);
        local_steps(obj, cfg, &mut theta, t, nu);
        let mut mean = column_mean(&theta, n, dim);
        let mut nrng = rng::substream(cfg.seed, stream::OPTIM, (2 * t) as u64);
        let noise = rng::gaussian_vec(&mut nrng, dim, nu * nu * cfg.sigma2 / n as f64);
        for (m, e) in mean.iter_mut().zip(noise) {
            *m += e;
        }
        for v in 0..n {
            theta[v * dim..(v + 1) * dim].copy_from_slice(&mean);
        }
        metrics.record(t + 1, &mean)?;
        theta_bar.push(mean);
    }

    let theta_out = output_estimate(&theta_bar, cfg.output, dim);
    Ok(OptimRun {
        seed: cfg.seed,
        k_used: 0,
        lambda_used: 1.0,
        theta_bar,
        theta_out,
        train_loss: metrics.train_loss,
        train_accuracy: metrics.train_accuracy,
        test_loss: metrics.test_loss,
        test_accuracy: metrics.test_accuracy,
        ledger: None,
        round_matrices: None,
    })
}
