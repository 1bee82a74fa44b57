use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rollout::RolloutBuffer;
use super::RlError;
use crate::geom::Vec2;
use crate::nn::{Adam, GaussianPolicy, Params, SetBatch, SetNet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub clip: f64,
    pub entropy_coef: f64,
    pub lr: f64,
    pub epochs: usize,
    pub minibatch: usize,
    /// Global gradient-norm cap applied to each network separately.
    pub max_grad_norm: Option<f64>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            entropy_coef: 0.1,
            lr: 1e-4,
            epochs: 4,
            minibatch: 1024,
            max_grad_norm: None,
        }
    }
}

/// Averages over every minibatch of the update.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub minibatches: usize,
}

/// Clipped-surrogate policy step and squared-error value step over the
/// buffer. The buffer's advantages must already be computed.
pub fn ppo_update<R: Rng + ?Sized>(
    buffer: &RolloutBuffer,
    policy: &mut GaussianPolicy,
    value: &mut SetNet,
    popt: &mut Adam,
    vopt: &mut Adam,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<PpoStats, RlError> {
    let n = buffer.len();
    if n == 0 {
        return Ok(PpoStats::default());
    }
    if buffer.advantages.len() != n || buffer.returns.len() != n {
        return Err(RlError::LengthMismatch {
            rewards: n,
            values: buffer.returns.len(),
            dones: buffer.advantages.len(),
        });
    }
    let transitions: Vec<_> = buffer.transitions().collect();
    let all = SetBatch::from_observations(transitions.iter().map(|t| &t.obs))?;
    let actions: Vec<Vec2> = transitions.iter().map(|t| t.action).collect();
    let old_logp: Vec<f64> = transitions.iter().map(|t| t.log_prob).collect();

    let mut stats = PpoStats::default();
    let mut order: Vec<usize> = (0..n).collect();
    let mb = cfg.minibatch.max(1);
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for idx in order.chunks(mb) {
            let batch = all.select(idx);
            let b = idx.len() as f64;

            let (means, cache) = policy.forward_train(&batch)?;
            let mut weights = Vec::with_capacity(idx.len());
            let mut mb_actions = Vec::with_capacity(idx.len());
            let mut surrogate = 0.0;
            let mut clipped = 0usize;
            let mut kl = 0.0;
            for (k, &i) in idx.iter().enumerate() {
                let a = buffer.advantages[i];
                let logp = policy.log_prob(Vec2::new(means[[k, 0]], means[[k, 1]]), actions[i]);
                let log_ratio = logp - old_logp[i];
                let ratio = log_ratio.exp();
                let bounded = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
                surrogate += (ratio * a).min(bounded * a);
                if (ratio - 1.0).abs() > cfg.clip {
                    clipped += 1;
                }
                kl += (ratio - 1.0) - log_ratio;
                let saturated = (a > 0.0 && ratio > 1.0 + cfg.clip) || (a < 0.0 && ratio < 1.0 - cfg.clip);
                weights.push(if saturated { 0.0 } else { -ratio * a / b });
                mb_actions.push(actions[i]);
            }
            let entropy = policy.entropy();
            let policy_loss = -surrogate / b - cfg.entropy_coef * entropy;

            let (v, vcache) = value.forward_train(&batch)?;
            let mut dv = v.clone();
            let mut value_loss = 0.0;
            for (k, &i) in idx.iter().enumerate() {
                let e = v[[k, 0]] - buffer.returns[i];
                value_loss += e * e;
                dv[[k, 0]] = 2.0 * e / b;
            }
            value_loss /= b;

            if !policy_loss.is_finite() {
                return Err(RlError::NonFinite("policy loss".into()));
            }
            if !value_loss.is_finite() {
                return Err(RlError::NonFinite("value loss".into()));
            }

            let mut pgrad = policy.zeros_like();
            policy.backward_log_prob(&cache, &means, &mb_actions, &weights, &mut pgrad);
            for g in &mut pgrad.log_std {
                *g -= cfg.entropy_coef;
            }
            let mut vgrad = value.zeros_like();
            value.backward(&vcache, dv, &mut vgrad);
            if let Some(max) = cfg.max_grad_norm {
                pgrad.clip_norm(max);
                vgrad.clip_norm(max);
            }
            if !pgrad.all_finite() || !vgrad.all_finite() {
                return Err(RlError::NonFinite("gradient".into()));
            }
            popt.step(policy, &pgrad);
            vopt.step(value, &vgrad);

            stats.policy_loss += policy_loss;
            stats.value_loss += value_loss;
            stats.entropy += entropy;
            stats.clip_fraction += clipped as f64 / b;
            stats.approx_kl += kl / b;
            stats.minibatches += 1;
        }
    }
    let m = stats.minibatches.max(1) as f64;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.clip_fraction /= m;
    stats.approx_kl /= m;
    Ok(stats)
}
