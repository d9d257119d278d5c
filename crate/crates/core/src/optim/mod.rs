//! Decentralized optimization of regularized logistic regression with
//! integrated privacy accounting.

mod run;

pub use run::{
    central_baseline, muffliato_gd, muffliato_sgd, GraphSource, Mode, OptimConfig, OptimRun,
    OutputMode, StepSize,
};

use crate::error::{Error, Result};

/// Feature-norm slack accepted by [`Objective::new`].
const NORM_TOL: f64 = 1e-9;

/// Per-node datasets for the objective
/// `phi(theta) = (1/n) sum_v phi_v(theta)`, with
/// `phi_v = mean over the shard of ln(1 + exp(-y theta.x)) + (mu/2)||theta||^2`.
///
/// Features must have unit (or smaller) L2 norm so the logistic loss is
/// 1-Lipschitz; two samples then differ by at most 2 in gradient, which is
/// the sensitivity the accounting uses.
#[derive(Debug, Clone)]
pub struct Objective {
    shards: Vec<Vec<(Vec<f64>, f64)>>,
    dim: usize,
    mu_reg: f64,
}

impl Objective {
    pub fn new(shards: Vec<Vec<(Vec<f64>, f64)>>, mu_reg: f64) -> Result<Self> {
        if shards.is_empty() {
            return Err(Error::EmptyInput("no nodes".into()));
        }
        if mu_reg < 0.0 {
            return Err(Error::InvalidParameter("regularization must be >= 0".into()));
        }
        let dim = shards
            .iter()
            .flat_map(|s| s.iter())
            .map(|(x, _)| x.len())
            .next()
            .ok_or_else(|| Error::EmptyInput("all shards are empty".into()))?;
        for (v, shard) in shards.iter().enumerate() {
            if shard.is_empty() {
                return Err(Error::EmptyInput(format!("node {v} has no samples")));
            }
            for (x, y) in shard {
                if x.len() != dim {
                    return Err(Error::InvalidParameter("inconsistent feature dims".into()));
                }
                let norm: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm > 1.0 + NORM_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "feature norm {norm} exceeds 1"
                    )));
                }
                if *y != 1.0 && *y != -1.0 {
                    return Err(Error::InvalidParameter(format!("label {y} is not +-1")));
                }
            }
        }
        Ok(Self {
            shards,
            dim,
            mu_reg,
        })
    }

    /// Build from normalized features, labels, and per-node row assignments.
    pub fn from_partition(
        features: &[Vec<f64>],
        labels: &[f64],
        assignment: &[Vec<usize>],
        mu_reg: f64,
    ) -> Result<Self> {
        let shards = assignment
            .iter()
            .map(|rows| {
                rows.iter()
                    .map(|&r| (features[r].clone(), labels[r]))
                    .collect()
            })
            .collect();
        Self::new(shards, mu_reg)
    }

    pub fn n(&self) -> usize {
        self.shards.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu_reg(&self) -> f64 {
        self.mu_reg
    }

    pub fn shard(&self, v: usize) -> &[(Vec<f64>, f64)] {
        &self.shards[v]
    }

    /// Smoothness constant: `1/4 + mu` for logistic loss on unit-norm data.
    pub fn smoothness(&self) -> f64 {
        0.25 + self.mu_reg
    }

    /// Strong-convexity constant guaranteed by the regularizer.
    pub fn strong_convexity(&self) -> f64 {
        self.mu_reg
    }

    pub fn condition_number(&self) -> f64 {
        self.smoothness() / self.strong_convexity()
    }

    /// Gradient sensitivity to swapping one sample: two 1-Lipschitz losses
    /// differ by at most 2 in gradient.
    pub fn grad_sensitivity(&self) -> f64 {
        2.0
    }

    /// Full local gradient `grad phi_v(theta)`.
    pub fn local_gradient(&self, v: usize, theta: &[f64]) -> Vec<f64> {
        let shard = &self.shards[v];
        let mut g = vec![0.0; self.dim];
        for (x, y) in shard {
            accumulate_logistic_gradient(&mut g, theta, x, *y, 1.0 / shard.len() as f64);
        }
        for (gi, ti) in g.iter_mut().zip(theta) {
            *gi += self.mu_reg * ti;
        }
        g
    }

    /// Gradient of a single sample's loss (plus regularizer).
    pub fn sample_gradient(&self, v: usize, sample: usize, theta: &[f64]) -> Vec<f64> {
        let (x, y) = &self.shards[v][sample];
        logistic_gradient(theta, x, *y, self.mu_reg)
    }

    pub fn global_gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for v in 0..self.n() {
            for (gi, l) in g.iter_mut().zip(self.local_gradient(v, theta)) {
                *gi += l / self.n() as f64;
            }
        }
        g
    }

    /// Training objective `phi(theta)` including the regularizer.
    pub fn train_loss(&self, theta: &[f64]) -> f64 {
        let reg = 0.5 * self.mu_reg * theta.iter().map(|t| t * t).sum::<f64>();
        let mut total = 0.0;
        for shard in &self.shards {
            let local: f64 = shard
                .iter()
                .map(|(x, y)| logistic_loss(theta, x, *y))
                .sum::<f64>()
                / shard.len() as f64;
            total += local;
        }
        total / self.n() as f64 + reg
    }

    /// All samples flattened, for train-set evaluation.
    pub fn all_samples(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for shard in &self.shards {
            for (x, y) in shard {
                xs.push(x.clone());
                ys.push(*y);
            }
        }
        (xs, ys)
    }

    /// Empirical heterogeneity constants at `theta`:
    /// `zeta_bar^2 = (1/n) sum_v ||grad phi_v - grad phi||^2` and
    /// `rho_bar^2 = (1/n) sum_v E_x ||grad l(theta,x) - grad phi||^2`
    /// (the latter is 0 in full-gradient mode only if shards are singletons;
    /// callers pick which constant applies).
    pub fn heterogeneity_at(&self, theta: &[f64]) -> (f64, f64) {
        let global = self.global_gradient(theta);
        let mut zeta2 = 0.0;
        let mut rho2 = 0.0;
        for v in 0..self.n() {
            let local = self.local_gradient(v, theta);
            zeta2 += sq_dist(&local, &global);
            let shard = &self.shards[v];
            let mut node_rho = 0.0;
            for s in 0..shard.len() {
                let g = self.sample_gradient(v, s, theta);
                node_rho += sq_dist(&g, &global);
            }
            rho2 += node_rho / shard.len() as f64;
        }
        (zeta2 / self.n() as f64, rho2 / self.n() as f64)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Numerically stable `ln(1 + exp(-y theta.x))`.
pub fn logistic_loss(theta: &[f64], x: &[f64], y: f64) -> f64 {
    let z: f64 = y * dot(theta, x);
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// `-y x sigmoid(-y theta.x) + mu theta`.
pub fn logistic_gradient(theta: &[f64], x: &[f64], y: f64, mu_reg: f64) -> Vec<f64> {
    let mut g = vec![0.0; theta.len()];
    accumulate_logistic_gradient(&mut g, theta, x, y, 1.0);
    for (gi, ti) in g.iter_mut().zip(theta) {
        *gi += mu_reg * ti;
    }
    g
}

fn accumulate_logistic_gradient(g: &mut [f64], theta: &[f64], x: &[f64], y: f64, weight: f64) {
    let z = y * dot(theta, x);
    // sigmoid(-z), computed without overflow on either tail
    let s = if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    };
    let c = -y * s * weight;
    for (gi, xi) in g.iter_mut().zip(x) {
        *gi += c * xi;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean unregularized logistic loss and accuracy of `theta` on a labeled
/// set. Ties (`theta.x == 0`) predict +1.
pub fn evaluate(theta: &[f64], features: &[Vec<f64>], labels: &[f64]) -> Result<(f64, f64)> {
    if features.is_empty() {
        return Err(Error::InvalidParameter("empty evaluation set".into()));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, &y) in features.iter().zip(labels) {
        loss += logistic_loss(theta, x, y);
        let pred = if dot(theta, x) >= 0.0 { 1.0 } else { -1.0 };
        if pred == y {
            correct += 1;
        }
    }
    Ok((
        loss / features.len() as f64,
        correct as f64 / features.len() as f64,
    ))
}

/// Gossip rounds per optimization step:
/// `ceil( (1/sqrt(lambda)) * ln( max(n, zeta_bar^2 / (D sigma^2 + rho_bar^2)) ) )`,
/// clamped to at least 1.
pub fn k_rounds(
    lambda: f64,
    n: usize,
    zeta_bar2: f64,
    rho_bar2: f64,
    sigma2: f64,
    dim: usize,
) -> Result<usize> {
    if lambda <= 0.0 {
        return Err(Error::InvalidParameter(
            "round count needs a positive spectral gap; use lazy()".into(),
        ));
    }
    let denom = dim as f64 * sigma2 + rho_bar2;
    let ratio = if zeta_bar2 == 0.0 {
        0.0
    } else if denom == 0.0 {
        return Err(Error::InvalidParameter(
            "heterogeneous data with zero noise and zero gradient variance: round count diverges"
                .into(),
        ));
    } else {
        zeta_bar2 / denom
    };
    let arg = (n as f64).max(ratio);
    Ok(((arg.ln() / lambda.sqrt()).ceil()).max(1.0) as usize)
}
