use crate::error::{ensure_finite, Error, Result};
use crate::policy::{gaussian_kl, Activations, MlpPolicy};

use super::rollout::TrajectoryBatch;

fn forward_all(batch: &TrajectoryBatch, policy: &MlpPolicy) -> Result<Vec<Activations>> {
    batch
        .trajectories
        .iter()
        .flat_map(|t| t.observations.iter())
        .map(|o| policy.forward(o))
        .collect()
}

/// Likelihood-ratio gradient `mean_t ∇θ log π(a_t | s_t) · A_t`.
pub fn policy_gradient(batch: &TrajectoryBatch, policy: &MlpPolicy) -> Result<Vec<f64>> {
    let n = batch.num_samples();
    let mut grad = vec![0.0; policy.num_params()];
    if n == 0 {
        return Ok(grad);
    }
    let scale = 1.0 / n as f64;
    for traj in &batch.trajectories {
        if traj.advantages.len() != traj.len() {
            return Err(Error::config("advantages must be computed before the gradient"));
        }
        for ((obs, act), adv) in traj.observations.iter().zip(&traj.actions).zip(&traj.advantages) {
            if *adv == 0.0 {
                continue;
            }
            let acts = policy.forward(obs)?;
            policy.accumulate_log_prob_grad(&acts, act, scale * adv, &mut grad);
        }
    }
    ensure_finite(&grad, "policy gradient")?;
    Ok(grad)
}

/// Fisher information of the batch's state distribution, applied lazily.
pub struct FisherOperator<'a> {
    policy: &'a MlpPolicy,
    acts: Vec<Activations>,
    damping: f64,
}

impl<'a> FisherOperator<'a> {
    pub fn new(batch: &TrajectoryBatch, policy: &'a MlpPolicy, damping: f64) -> Result<Self> {
        Ok(Self {
            policy,
            acts: forward_all(batch, policy)?,
            damping,
        })
    }

    /// `F v + damping · v`, where `F` is the Hessian of the mean
    /// `KL(π_old ‖ π_θ)` at `θ = θ_old`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let p = self.policy;
        let mut out = vec![0.0; v.len()];
        let n = self.acts.len();
        if n > 0 {
            let inv_var: Vec<f64> = p.log_std().iter().map(|ls| (-2.0 * ls).exp()).collect();
            let scale = 1.0 / n as f64;
            for acts in &self.acts {
                let jv = p.mean_jvp(acts, v);
                let u: Vec<f64> = jv.iter().zip(&inv_var).map(|(a, b)| a * b).collect();
                p.accumulate_mean_vjp(acts, &u, scale, &mut out);
            }
            let off = p.num_params() - p.act_dim();
            for k in off..p.num_params() {
                out[k] += 2.0 * v[k];
            }
        }
        for (o, vi) in out.iter_mut().zip(v) {
            *o += self.damping * vi;
        }
        ensure_finite(&out, "Fisher-vector product")?;
        Ok(out)
    }
}

pub fn fisher_vector_product(batch: &TrajectoryBatch, policy: &MlpPolicy, v: &[f64], damping: f64) -> Result<Vec<f64>> {
    if v.len() != policy.num_params() {
        return Err(Error::config("Fisher-vector product: vector length differs from parameter count"));
    }
    FisherOperator::new(batch, policy, damping)?.apply(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradient for `A x = b` with `A` given as a product operator.
/// Returns the best iterate found.
pub fn conjugate_gradient<F>(mut apply: F, b: &[f64], iters: usize, tol: f64) -> Result<CgResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut it = 0;
    while it < iters && rr.sqrt() > tol {
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        it += 1;
    }
    Ok(CgResult {
        x,
        residual_norm: rr.sqrt(),
        iterations: it,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateOutcome {
    /// Step taken with multiplier `sqrt(2δ / dᵀg)`.
    Applied { step_scale: f64 },
    /// `dᵀg ≤ 0` or a non-finite step; parameters unchanged.
    Skipped,
}

/// Normalized natural-gradient step `θ ← θ + sqrt(2δ / dᵀg) · d`, then
/// `log_std` floored at `log_std_floor`.
pub fn npg_update(policy: &mut MlpPolicy, g: &[f64], d: &[f64], delta: f64, log_std_floor: f64) -> UpdateOutcome {
    let dg = dot(d, g);
    if !(dg > 0.0) || !dg.is_finite() {
        return UpdateOutcome::Skipped;
    }
    let step_scale = (2.0 * delta / dg).sqrt();
    if !step_scale.is_finite() || d.iter().any(|v| !v.is_finite()) {
        log::warn!("non-finite natural-gradient step; update skipped");
        return UpdateOutcome::Skipped;
    }
    for (p, di) in policy.params_mut().iter_mut().zip(d) {
        *p += step_scale * di;
    }
    for ls in policy.log_std_mut() {
        *ls = ls.max(log_std_floor);
    }
    UpdateOutcome::Applied { step_scale }
}

/// Mean over batch states of `KL(π_new ‖ π_old)`.
pub fn batch_kl(old: &MlpPolicy, new: &MlpPolicy, batch: &TrajectoryBatch) -> Result<f64> {
    let n = batch.num_samples();
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for obs in batch.trajectories.iter().flat_map(|t| t.observations.iter()) {
        let m_old = old.mean(obs)?;
        let m_new = new.mean(obs)?;
        total += gaussian_kl(&m_new, new.log_std(), &m_old, old.log_std());
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::trainer::Trajectory;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    fn random_batch(policy: &MlpPolicy, rng: &mut impl Rng, n_traj: usize, len: usize) -> TrajectoryBatch {
        let trajectories = (0..n_traj)
            .map(|_| {
                let observations: Vec<Vec<f64>> = (0..len)
                    .map(|_| (0..policy.obs_dim()).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                let actions: Vec<Vec<f64>> = (0..len)
                    .map(|_| (0..policy.act_dim()).map(|_| rng.random_range(-1.5..1.5)).collect())
                    .collect();
                let log_probs = observations
                    .iter()
                    .zip(&actions)
                    .map(|(o, a)| policy.log_prob(o, a).unwrap())
                    .collect();
                Trajectory {
                    advantages: (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    rewards: vec![0.0; len],
                    observations,
                    actions,
                    log_probs,
                    ..Trajectory::default()
                }
            })
            .collect();
        TrajectoryBatch { trajectories, horizon: len }
    }

    fn randomize(policy: &mut MlpPolicy, rng: &mut impl Rng) {
        for p in policy.params_mut() {
            *p = rng.random_range(-0.8..0.8);
        }
    }

    /// Surrogate objective `mean A · log π(a|s)` whose gradient is the policy gradient.
    fn surrogate(policy: &MlpPolicy, batch: &TrajectoryBatch) -> f64 {
        let n = batch.num_samples() as f64;
        batch
            .trajectories
            .iter()
            .flat_map(|t| t.observations.iter().zip(&t.actions).zip(&t.advantages))
            .map(|((o, a), adv)| adv * policy.log_prob(o, a).unwrap())
            .sum::<f64>()
            / n
    }

    #[test]
    fn zero_advantages_give_zero_gradient() {
        let mut rng = stream(1);
        let policy = MlpPolicy::new(3, &[4], 2, &mut rng);
        let mut batch = random_batch(&policy, &mut rng, 2, 5);
        for t in &mut batch.trajectories {
            t.advantages.iter_mut().for_each(|a| *a = 0.0);
        }
        assert!(policy_gradient(&batch, &policy).unwrap().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn single_sample_matches_score_formula() {
        // act_dim 1, no hidden layer: μ = w·s + b, so ∂log π/∂w = (a−μ)/σ²·s·A.
        let mut rng = stream(2);
        let mut policy = MlpPolicy::zeros(3, &[], 1);
        randomize(&mut policy, &mut rng);
        let batch = random_batch(&policy, &mut rng, 1, 1);
        let t = &batch.trajectories[0];
        let (s, a, adv) = (&t.observations[0], t.actions[0][0], t.advantages[0]);
        let mu = policy.mean(s).unwrap()[0];
        let var = (2.0 * policy.log_std()[0]).exp();
        let g = policy_gradient(&batch, &policy).unwrap();
        for i in 0..3 {
            assert!((g[i] - (a - mu) / var * s[i] * adv).abs() < 1e-8);
        }
        assert!((g[3] - (a - mu) / var * adv).abs() < 1e-8);
        assert!((g[4] - ((a - mu).powi(2) / var - 1.0) * adv).abs() < 1e-8);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = stream(3);
        for _ in 0..10 {
            let mut policy = MlpPolicy::new(4, &[5, 5], 3, &mut rng);
            randomize(&mut policy, &mut rng);
            let batch = random_batch(&policy, &mut rng, 2, 4);
            let g = policy_gradient(&batch, &policy).unwrap();
            let eps = 1e-5;
            let mut num = vec![0.0; g.len()];
            for i in 0..g.len() {
                let mut p = policy.clone();
                p.params_mut()[i] += eps;
                let up = surrogate(&p, &batch);
                p.params_mut()[i] -= 2.0 * eps;
                let down = surrogate(&p, &batch);
                num[i] = (up - down) / (2.0 * eps);
            }
            let err: f64 = g.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = num.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err / norm < 1e-4, "relative error {}", err / norm);
        }
    }

    /// Explicit Fisher: Hessian of the mean KL by finite differences of its analytic gradient.
    fn explicit_fisher(policy: &MlpPolicy, batch: &TrajectoryBatch) -> DMatrix<f64> {
        let n = policy.num_params();
        let obs: Vec<&Vec<f64>> = batch.trajectories.iter().flat_map(|t| t.observations.iter()).collect();
        let grad_kl = |theta: &[f64]| -> Vec<f64> {
            // ∇θ mean KL(π_old ‖ π_θ) computed with central differences of the KL itself.
            let kl = |th: &[f64]| {
                let mut q = policy.clone();
                q.set_params(th).unwrap();
                obs.iter()
                    .map(|o| {
                        gaussian_kl(&policy.mean(o).unwrap(), policy.log_std(), &q.mean(o).unwrap(), q.log_std())
                    })
                    .sum::<f64>()
                    / obs.len() as f64
            };
            let h = 1e-4;
            (0..n)
                .map(|i| {
                    let mut a = theta.to_vec();
                    a[i] += h;
                    let up = kl(&a);
                    a[i] -= 2.0 * h;
                    (up - kl(&a)) / (2.0 * h)
                })
                .collect()
        };
        let theta = policy.params().to_vec();
        let mut f = DMatrix::zeros(n, n);
        let h = 1e-4;
        for j in 0..n {
            let mut a = theta.clone();
            a[j] += h;
            let up = grad_kl(&a);
            a[j] -= 2.0 * h;
            let down = grad_kl(&a);
            for i in 0..n {
                f[(i, j)] = (up[i] - down[i]) / (2.0 * h);
            }
        }
        f
    }

    #[test]
    fn fisher_vector_product_matches_explicit_matrix() {
        let mut rng = stream(4);
        for _ in 0..3 {
            // 3·2 + 2 + 2·2 + 2 + 2 = 16 parameters.
            let mut policy = MlpPolicy::zeros(3, &[2], 2);
            randomize(&mut policy, &mut rng);
            assert!(policy.num_params() <= 20);
            let batch = random_batch(&policy, &mut rng, 2, 3);
            let f = explicit_fisher(&policy, &batch);
            let v: Vec<f64> = (0..policy.num_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let expected = &f * DVector::from_vec(v.clone());
            let got = fisher_vector_product(&batch, &policy, &v, 0.0).unwrap();
            for (a, b) in got.iter().zip(expected.iter()) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn fisher_is_psd_and_linear_in_damping() {
        let mut rng = stream(5);
        let policy = MlpPolicy::new(6, &[8, 8], 3, &mut rng);
        let batch = random_batch(&policy, &mut rng, 3, 6);
        let zero = vec![0.0; policy.num_params()];
        assert!(fisher_vector_product(&batch, &policy, &zero, 0.1).unwrap().iter().all(|x| *x == 0.0));
        for _ in 0..20 {
            let v: Vec<f64> = (0..policy.num_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fv = fisher_vector_product(&batch, &policy, &v, 0.0).unwrap();
            assert!(dot(&v, &fv) >= 0.0);
            let fv_d = fisher_vector_product(&batch, &policy, &v, 0.5).unwrap();
            for i in 0..v.len() {
                assert!((fv_d[i] - fv[i] - 0.5 * v[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cg_solves_spd_systems() {
        let mut rng = stream(6);
        let m = DMatrix::<f64>::from_fn(10, 10, |_, _| rng.random_range(-1.0..1.0));
        let a = &m * m.transpose() + DMatrix::identity(10, 10);
        let b: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let res = conjugate_gradient(|v| Ok((&a * DVector::from_column_slice(v)).as_slice().to_vec()), &b, 10, 0.0).unwrap();
        let residual = &a * DVector::from_vec(res.x.clone()) - DVector::from_vec(b.clone());
        assert!(residual.norm() < 1e-8, "{}", residual.norm());
        let direct = a.clone().lu().solve(&DVector::from_vec(b.clone())).unwrap();
        for (x, y) in res.x.iter().zip(direct.iter()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn cg_edge_cases() {
        let g = vec![0.3, -1.2, 2.0];
        let res = conjugate_gradient(|v| Ok(v.to_vec()), &g, 10, 1e-12).unwrap();
        assert_eq!(res.iterations, 1);
        for (a, b) in res.x.iter().zip(&g) {
            assert!((a - b).abs() < 1e-15);
        }
        let res = conjugate_gradient(|v| Ok(v.to_vec()), &[0.0; 3], 10, 0.0).unwrap();
        assert_eq!(res.x, vec![0.0; 3]);
    }

    #[test]
    fn update_step_scaling_and_skip_rule() {
        let mut policy = MlpPolicy::zeros(2, &[], 1);
        let before = policy.clone();
        let zero = vec![0.0; policy.num_params()];
        assert_eq!(npg_update(&mut policy, &zero, &zero, 0.05, -3.0), UpdateOutcome::Skipped);
        assert_eq!(policy, before);
        let g: Vec<f64> = vec![0.5, -0.25, 0.1, 0.2];
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        assert_eq!(npg_update(&mut policy, &g, &neg, 0.05, -3.0), UpdateOutcome::Skipped);
        // Quadratic model with F = 2I: d = g / 2, dᵀFd = dᵀg.
        let d: Vec<f64> = g.iter().map(|x| x / 2.0).collect();
        let dfd: f64 = d.iter().map(|x| 2.0 * x * x).sum();
        match npg_update(&mut policy, &g, &d, 0.05, -3.0) {
            UpdateOutcome::Applied { step_scale } => {
                assert!((step_scale - (2.0 * 0.05 / dfd).sqrt()).abs() < 1e-10);
                for (p, di) in policy.params().iter().zip(&d) {
                    assert!((p - step_scale * di).abs() < 1e-12);
                }
            }
            UpdateOutcome::Skipped => panic!("update skipped"),
        }
    }

    #[test]
    fn log_std_floor_applies() {
        let mut policy = MlpPolicy::zeros(1, &[], 1);
        let g = vec![0.0, 0.0, -1.0];
        let d = vec![0.0, 0.0, -1.0];
        npg_update(&mut policy, &g, &d, 100.0, -3.0);
        assert_eq!(policy.log_std()[0], -3.0);
    }
}
