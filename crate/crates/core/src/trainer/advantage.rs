use nalgebra::{DMatrix, DVector};

use super::rollout::TrajectoryBatch;

const BASELINE_RIDGE: f64 = 1e-5;

/// `G_t = Σ_k γ^k r_{t+k}`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Generalized advantage estimates for one trajectory; `V = 0` past its end.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let next_v = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next_v - values[t];
        acc = delta + gamma * lambda * acc;
        out[t] = acc;
    }
    out
}

/// Linear value function on `[obs, obs², t/T, (t/T)², (t/T)³, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub coefficients: Vec<f64>,
    pub horizon: usize,
}

fn features(obs: &[f64], t: usize, horizon: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(obs);
    out.extend(obs.iter().map(|o| o * o));
    let s = t as f64 / horizon.max(1) as f64;
    out.extend_from_slice(&[s, s * s, s * s * s, 1.0]);
}

impl Baseline {
    pub fn zero(obs_dim: usize, horizon: usize) -> Self {
        Self {
            coefficients: vec![0.0; 2 * obs_dim + 4],
            horizon,
        }
    }

    pub fn predict(&self, obs: &[f64], t: usize) -> f64 {
        let mut f = Vec::with_capacity(self.coefficients.len());
        features(obs, t, self.horizon, &mut f);
        f.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }
}

/// Ridge regression of discounted returns on the baseline features. The
/// ridge grows tenfold until the normal equations factor.
pub fn fit_baseline(batch: &TrajectoryBatch, gamma: f64) -> Baseline {
    let obs_dim = batch
        .trajectories
        .iter()
        .find_map(|t| t.observations.first().map(Vec::len))
        .unwrap_or(0);
    let d = 2 * obs_dim + 4;
    let mut xtx = DMatrix::<f64>::zeros(d, d);
    let mut xty = DVector::<f64>::zeros(d);
    let mut f = Vec::with_capacity(d);
    for traj in &batch.trajectories {
        let returns = discounted_returns(&traj.rewards, gamma);
        for (t, (obs, g)) in traj.observations.iter().zip(&returns).enumerate() {
            features(obs, t, batch.horizon, &mut f);
            for i in 0..d {
                let fi = f[i];
                if fi == 0.0 {
                    continue;
                }
                xty[i] += fi * g;
                for j in i..d {
                    xtx[(i, j)] += fi * f[j];
                }
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            xtx[(i, j)] = xtx[(j, i)];
        }
    }
    let mut ridge = BASELINE_RIDGE;
    loop {
        let mut a = xtx.clone();
        for i in 0..d {
            a[(i, i)] += ridge;
        }
        if let Some(chol) = a.cholesky() {
            let w = chol.solve(&xty);
            if w.iter().all(|v| v.is_finite()) {
                return Baseline {
                    coefficients: w.iter().copied().collect(),
                    horizon: batch.horizon,
                };
            }
        }
        ridge *= 10.0;
        if !ridge.is_finite() {
            return Baseline::zero(obs_dim, batch.horizon);
        }
    }
}

/// Fills `returns` and batch-normalized GAE `advantages` of every trajectory.
pub fn compute_advantages(batch: &mut TrajectoryBatch, baseline: Option<&Baseline>, gamma: f64, lambda: f64) {
    for traj in &mut batch.trajectories {
        let values: Vec<f64> = match baseline {
            Some(b) => traj
                .observations
                .iter()
                .enumerate()
                .map(|(t, o)| b.predict(o, t))
                .collect(),
            None => vec![0.0; traj.len()],
        };
        traj.returns = discounted_returns(&traj.rewards, gamma);
        traj.advantages = gae(&traj.rewards, &values, gamma, lambda);
    }
    let n = batch.num_samples();
    if n == 0 {
        return;
    }
    let all = || batch.trajectories.iter().flat_map(|t| t.advantages.iter());
    let mean = all().sum::<f64>() / n as f64;
    let var = all().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    let scale = if std > 1e-8 { 1.0 / std } else { 1.0 };
    for traj in &mut batch.trajectories {
        for a in &mut traj.advantages {
            *a = (*a - mean) * scale;
        }
    }
}
