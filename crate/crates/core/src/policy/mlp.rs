//! Diagonal-Gaussian MLP policy with hand-written derivatives.
//!
//! Parameters live in one flat vector: for each layer the weight matrix
//! (row-major, `out × in`) followed by its bias, then the state-independent
//! `log_std` vector. Hidden layers use `tanh`; the output layer is affine and
//! gives the Gaussian mean.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LOG_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpPolicy {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Layer outputs from one forward pass; `layers[0]` is the input.
#[derive(Debug, Clone)]
pub struct Activations {
    layers: Vec<Vec<f64>>,
}

impl Activations {
    pub fn mean(&self) -> &[f64] {
        self.layers.last().expect("at least one layer")
    }
}

impl MlpPolicy {
    /// Small random weights, zero biases, `log_std = 0`. The output layer is
    /// scaled down so the initial mean is close to zero.
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], act_dim: usize, rng: &mut R) -> Self {
        let mut policy = Self::zeros(obs_dim, hidden, act_dim);
        let n_layers = policy.dims.len() - 1;
        let mut offset = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (policy.dims[l], policy.dims[l + 1]);
            let scale = if l + 1 == n_layers { 0.01 } else { 1.0 } / (fan_in as f64).sqrt();
            for w in &mut policy.params[offset..offset + fan_in * fan_out] {
                let z: f64 = rng.sample(StandardNormal);
                *w = z * scale;
            }
            offset += fan_in * fan_out + fan_out;
        }
        policy
    }

    pub fn zeros(obs_dim: usize, hidden: &[usize], act_dim: usize) -> Self {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(obs_dim);
        dims.extend_from_slice(hidden);
        dims.push(act_dim);
        let n = Self::count_params(&dims);
        Self {
            dims,
            params: vec![0.0; n],
        }
    }

    pub fn from_params(dims: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::config(format!("invalid layer dims {dims:?}")));
        }
        let expected = Self::count_params(&dims);
        if params.len() != expected {
            return Err(Error::config(format!(
                "layer dims {dims:?} need {expected} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self { dims, params })
    }

    fn count_params(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>() + dims[dims.len() - 1]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn obs_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn act_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::config("parameter vector length mismatch"));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn log_std_offset(&self) -> usize {
        self.params.len() - self.act_dim()
    }

    pub fn log_std(&self) -> &[f64] {
        &self.params[self.log_std_offset()..]
    }

    pub fn log_std_mut(&mut self) -> &mut [f64] {
        let off = self.log_std_offset();
        &mut self.params[off..]
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.obs_dim() {
            return Err(Error::config(format!(
                "observation has {} components, policy expects {}",
                obs.len(),
                self.obs_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, obs: &[f64]) -> Result<Activations> {
        self.check_obs(obs)?;
        Ok(self.forward_with(&self.params, obs))
    }

    /// Forward pass using an external parameter vector with this layout.
    fn forward_with(&self, params: &[f64], obs: &[f64]) -> Activations {
        let n_layers = self.dims.len() - 1;
        let mut layers = Vec::with_capacity(n_layers + 1);
        layers.push(obs.to_vec());
        let mut offset = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let w = &params[offset..offset + fan_in * fan_out];
            let b = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let input = &layers[l];
            let mut out: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    b[o] + row.iter().zip(input).map(|(wi, xi)| wi * xi).sum::<f64>()
                })
                .collect();
            if l + 1 < n_layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            layers.push(out);
            offset += fan_in * fan_out + fan_out;
        }
        Activations { layers }
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(obs)?.layers.pop().unwrap())
    }

    /// Mean computed with `params` in place of the policy's own parameters.
    pub fn mean_with(&self, params: &[f64], obs: &[f64]) -> Result<Vec<f64>> {
        self.check_obs(obs)?;
        if params.len() != self.params.len() {
            return Err(Error::config("parameter vector length mismatch"));
        }
        Ok(self.forward_with(params, obs).layers.pop().unwrap())
    }

    pub fn log_prob(&self, obs: &[f64], act: &[f64]) -> Result<f64> {
        if act.len() != self.act_dim() {
            return Err(Error::config(format!(
                "action has {} components, policy expects {}",
                act.len(),
                self.act_dim()
            )));
        }
        let mean = self.mean(obs)?;
        Ok(gaussian_log_prob(&mean, self.log_std(), act))
    }

    /// Accumulates `scale · ∇θ log π(act | obs)` into `grad`.
    pub fn accumulate_log_prob_grad(&self, acts: &Activations, act: &[f64], scale: f64, grad: &mut [f64]) {
        let mean = acts.mean();
        let log_std = self.log_std();
        let off = self.log_std_offset();
        let mut d_mean = vec![0.0; mean.len()];
        for i in 0..mean.len() {
            let inv_var = (-2.0 * log_std[i]).exp();
            let z = act[i] - mean[i];
            d_mean[i] = z * inv_var;
            grad[off + i] += scale * (z * z * inv_var - 1.0);
        }
        self.accumulate_mean_vjp(acts, &d_mean, scale, grad);
    }

    /// Accumulates `scale · (∂mean/∂θ)ᵀ · cotangent` into `grad` (reverse mode).
    pub fn accumulate_mean_vjp(&self, acts: &Activations, cotangent: &[f64], scale: f64, grad: &mut [f64]) {
        let n_layers = self.dims.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for l in 0..n_layers {
            offsets.push(offset);
            offset += self.dims[l] * self.dims[l + 1] + self.dims[l + 1];
        }
        let mut delta: Vec<f64> = cotangent.iter().map(|c| c * scale).collect();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let input = &acts.layers[l];
            let w_off = offsets[l];
            let b_off = w_off + fan_in * fan_out;
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let g_row = &mut grad[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                for (g, x) in g_row.iter_mut().zip(input) {
                    *g += d * x;
                }
                grad[b_off + o] += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.params[w_off..w_off + fan_in * fan_out];
            let mut prev = vec![0.0; fan_in];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (p, wi) in prev.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                    *p += d * wi;
                }
            }
            // Input of layer l is the tanh output of layer l-1.
            for (p, h) in prev.iter_mut().zip(input) {
                *p *= 1.0 - h * h;
            }
            delta = prev;
        }
    }

    /// Directional derivative of the mean along parameter tangent `v` (forward mode).
    pub fn mean_jvp(&self, acts: &Activations, v: &[f64]) -> Vec<f64> {
        let n_layers = self.dims.len() - 1;
        let mut tangent = vec![0.0; self.dims[0]];
        let mut offset = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[offset..offset + fan_in * fan_out];
            let vw = &v[offset..offset + fan_in * fan_out];
            let vb = &v[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let input = &acts.layers[l];
            let mut out = vec![0.0; fan_out];
            for o in 0..fan_out {
                let row = o * fan_in..(o + 1) * fan_in;
                let mut s = vb[o];
                for ((vwi, wi), (xi, ti)) in vw[row.clone()].iter().zip(&w[row]).zip(input.iter().zip(&tangent)) {
                    s += vwi * xi + wi * ti;
                }
                out[o] = s;
            }
            if l + 1 < n_layers {
                let h = &acts.layers[l + 1];
                for (t, hi) in out.iter_mut().zip(h) {
                    *t *= 1.0 - hi * hi;
                }
            }
            tangent = out;
            offset += fan_in * fan_out + fan_out;
        }
        tangent
    }
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], act: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(act)
        .map(|((m, ls), a)| {
            let z = (a - m) * (-ls).exp();
            -0.5 * z * z - ls - 0.5 * LOG_2PI
        })
        .sum()
}

/// KL(old ‖ new) between diagonal Gaussians.
pub fn gaussian_kl(mean_old: &[f64], log_std_old: &[f64], mean_new: &[f64], log_std_new: &[f64]) -> f64 {
    let mut kl = 0.0;
    for i in 0..mean_old.len() {
        let var_old = (2.0 * log_std_old[i]).exp();
        let var_new = (2.0 * log_std_new[i]).exp();
        let dm = mean_old[i] - mean_new[i];
        kl += log_std_new[i] - log_std_old[i] + (var_old + dm * dm) / (2.0 * var_new) - 0.5;
    }
    kl
}

/// Draws `mean + exp(log_std)·ε`. Returns the raw sample (for log-densities)
/// and its clamp to `[-1, 1]` (for the environment).
pub fn sample_action<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let raw: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(m, ls)| {
            let z: f64 = rng.sample(StandardNormal);
            m + ls.exp() * z
        })
        .collect();
    let clamped = raw.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
    (raw, clamped)
}
