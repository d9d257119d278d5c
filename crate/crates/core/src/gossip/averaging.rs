//! Noisy averaging protocols: accelerated synchronous gossip, randomized
//! pairwise gossip, and plain time-varying gossip over a schedule.
//!
//! Every run starts from `x^0 = x + eta` with `eta` i.i.d. Gaussian per
//! coordinate, then mixes. The recorded error at step `t` is
//! `(1/2n) * sum_v ||x^t_v - xbar||^2` against the mean `xbar` of the
//! *unnoised* inputs, matching the convention of the utility bounds
//! (`3 sigma^2 / n` synchronous, `2 sigma^2 / n` randomized).

use serde_json::json;

use super::{chebyshev_gamma, EdgeActivation, GossipMatrix, Schedule};
use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Trajectory and error trace of one averaging run.
#[derive(Debug, Clone)]
pub struct AveragingRun {
    pub seed: u64,
    pub sigma2: f64,
    pub dim: usize,
    /// `(1/2n) sum_v ||x^t_v - xbar||^2` for `t = 0..=T`.
    pub mse_per_step: Vec<f64>,
    /// Node states per step (`T+1` entries, node-major), when recorded.
    pub states: Option<Vec<Vec<f64>>>,
    pub final_state: Vec<f64>,
}

impl AveragingRun {
    pub fn horizon(&self) -> usize {
        self.mse_per_step.len() - 1
    }

    pub fn final_mse(&self) -> f64 {
        *self.mse_per_step.last().expect("at least the initial step")
    }

    pub fn to_json(&self, include_final_state: bool) -> serde_json::Value {
        let mut v = json!({
            "seed": self.seed,
            "sigma2": self.sigma2,
            "T": self.horizon(),
            "mse_per_step": self.mse_per_step,
        });
        if include_final_state {
            v["final_state"] = json!(self.final_state);
        }
        v
    }
}

fn column_mean(x: &[f64], n: usize, dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    for v in 0..n {
        for d in 0..dim {
            mean[d] += x[v * dim + d];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    mean
}

fn half_mean_sq_dev(x: &[f64], mean: &[f64], n: usize, dim: usize) -> f64 {
    let mut total = 0.0;
    for v in 0..n {
        for d in 0..dim {
            let e = x[v * dim + d] - mean[d];
            total += e * e;
        }
    }
    total / (2.0 * n as f64)
}

/// `(1/n) sum_v ||x_v - xbar||^2` of the raw inputs.
pub fn input_variance(x: &[f64], n: usize, dim: usize) -> f64 {
    let mean = column_mean(x, n, dim);
    2.0 * half_mean_sq_dev(x, &mean, n, dim)
}

fn noisy_inputs(x: &[f64], n: usize, dim: usize, sigma2: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng::substream(seed, stream::INPUT_NOISE, 0);
    let eta = rng::gaussian_vec(&mut rng, n * dim, sigma2);
    x.iter().zip(eta).map(|(a, e)| a + e).collect()
}

struct Recorder {
    mean: Vec<f64>,
    n: usize,
    dim: usize,
    mse: Vec<f64>,
    states: Option<Vec<Vec<f64>>>,
}

impl Recorder {
    fn new(x: &[f64], n: usize, dim: usize, record_states: bool) -> Self {
        Self {
            mean: column_mean(x, n, dim),
            n,
            dim,
            mse: Vec::new(),
            states: record_states.then(Vec::new),
        }
    }

    fn push(&mut self, state: &[f64]) {
        self.mse
            .push(half_mean_sq_dev(state, &self.mean, self.n, self.dim));
        if let Some(states) = &mut self.states {
            states.push(state.to_vec());
        }
    }
}

/// Accelerated synchronous gossip with noisy inputs: `x^1 = W x^0`, then
/// `x^{t+1} = gamma W x^t + (1 - gamma) x^{t-1}` with the scale from
/// [`chebyshev_gamma`]. Requires a positive spectral gap.
pub fn muffliato_sync(
    x: &[f64],
    dim: usize,
    w: &GossipMatrix,
    horizon: usize,
    sigma2: f64,
    seed: u64,
) -> Result<AveragingRun> {
    let n = w.n();
    assert_eq!(x.len(), n * dim, "input length must be n * dim");
    let gamma = if horizon >= 1 && n > 1 {
        chebyshev_gamma(w.spectral_gap()?)?
    } else {
        // no mixing happens; the scale is irrelevant
        1.0
    };

    let mut rec = Recorder::new(x, n, dim, true);
    let final_state = chebyshev_mix(
        noisy_inputs(x, n, dim, sigma2, seed),
        dim,
        w,
        horizon,
        gamma,
        |state| rec.push(state),
    );

    Ok(AveragingRun {
        seed,
        sigma2,
        dim,
        mse_per_step: rec.mse,
        states: rec.states,
        final_state,
    })
}

/// The accelerated three-term recursion itself: `x^1 = W x^0`, then
/// `x^{t+1} = gamma W x^t + (1 - gamma) x^{t-1}`. `observe` is called on
/// every iterate including `x^0`.
pub fn chebyshev_mix(
    x0: Vec<f64>,
    dim: usize,
    w: &GossipMatrix,
    rounds: usize,
    gamma: f64,
    mut observe: impl FnMut(&[f64]),
) -> Vec<f64> {
    let n = w.n();
    assert_eq!(x0.len(), n * dim);
    let mut prev = x0;
    observe(&prev);
    if rounds == 0 {
        return prev;
    }
    let mut cur = vec![0.0; n * dim];
    w.matvec_into(&prev, dim, &mut cur);
    observe(&cur);
    let mut scratch = vec![0.0; n * dim];
    for _t in 1..rounds {
        w.matvec_into(&cur, dim, &mut scratch);
        for i in 0..n * dim {
            scratch[i] = gamma * scratch[i] + (1.0 - gamma) * prev[i];
        }
        prev.copy_from_slice(&cur);
        cur.copy_from_slice(&scratch);
        observe(&cur);
    }
    cur
}

/// Stopping time for synchronous accelerated gossip:
/// `ceil( (1/sqrt(lambda_W)) * ln( (n / (D sigma^2)) * max(D sigma^2, input variance) ) )`,
/// clamped to at least 1.
pub fn t_stop_sync(w: &GossipMatrix, x: &[f64], dim: usize, sigma2: f64) -> Result<usize> {
    let lambda = w.spectral_gap()?;
    t_stop_from_rate(lambda.sqrt(), w.n(), x, dim, sigma2)
}

/// Stopping time for randomized gossip: as [`t_stop_sync`] with
/// `1/lambda(p)` in place of `1/sqrt(lambda_W)`.
pub fn t_stop_randomized(
    act: &EdgeActivation,
    x: &[f64],
    dim: usize,
    sigma2: f64,
) -> Result<usize> {
    let lambda = act.lambda_p()?;
    t_stop_from_rate(lambda, act.n(), x, dim, sigma2)
}

fn t_stop_from_rate(rate: f64, n: usize, x: &[f64], dim: usize, sigma2: f64) -> Result<usize> {
    if sigma2 <= 0.0 {
        return Err(Error::InvalidParameter(
            "stopping rule needs sigma2 > 0".into(),
        ));
    }
    if rate <= 0.0 {
        return Err(Error::InvalidParameter(
            "stopping rule needs a positive spectral gap; use lazy()".into(),
        ));
    }
    assert_eq!(x.len(), n * dim);
    let noise = dim as f64 * sigma2;
    let arg = (n as f64 / noise) * noise.max(input_variance(x, n, dim));
    let t = (arg.ln() / rate).ceil();
    Ok((t.max(1.0)) as usize)
}

/// Randomized pairwise gossip: per step one edge is sampled i.i.d. from the
/// activation intensities and its endpoints average. Returns the run and the
/// realized schedule for exact privacy accounting.
pub fn muffliato_randomized(
    x: &[f64],
    dim: usize,
    act: &EdgeActivation,
    horizon: usize,
    sigma2: f64,
    seed: u64,
) -> Result<(AveragingRun, Schedule)> {
    let n = act.n();
    assert_eq!(x.len(), n * dim);
    if act.edges().is_empty() && horizon > 0 {
        return Err(Error::InvalidParameter("activation has no edges".into()));
    }
    let mut edge_rng = rng::substream(seed, stream::EDGE_SAMPLING, 0);
    let edges: Vec<(usize, usize)> = (0..horizon)
        .map(|_| act.sample_edge(&mut edge_rng))
        .collect();
    let sched = Schedule::from_edges(n, edges);
    let run = run_schedule(x, dim, &sched, sigma2, seed, true);
    Ok((run, sched))
}

/// Plain (non-accelerated) time-varying gossip over a schedule:
/// `x^{t+1} = W_t x^t` from noisy inputs.
pub fn run_schedule(
    x: &[f64],
    dim: usize,
    sched: &Schedule,
    sigma2: f64,
    seed: u64,
    record_states: bool,
) -> AveragingRun {
    let n = sched.n();
    assert_eq!(x.len(), n * dim);
    let mut state = noisy_inputs(x, n, dim, sigma2, seed);
    let mut rec = Recorder::new(x, n, dim, record_states);
    rec.push(&state);
    let mut scratch = Vec::new();
    for t in 0..sched.horizon() {
        sched.apply_step(t, &mut state, dim, &mut scratch);
        rec.push(&state);
    }
    AveragingRun {
        seed,
        sigma2,
        dim,
        mse_per_step: rec.mse,
        states: rec.states,
        final_state: state,
    }
}
