//! Behavior cloning of expert policies from pedestrian samples.

use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{augment, DataError, Sample, SampleSource, TrackSet};
use crate::geom::Vec2;
use crate::nn::{Adam, Checkpoint, NetSpec, NnError, SetBatch, SetNet};
use crate::sim::{Controller, Observation, World};

#[derive(Debug, Error)]
pub enum BcError {
    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("experts act on unaligned observations")]
    AlignedObservation,
    #[error("no training samples")]
    NoSamples,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Samples per epoch; `None` uses the number of grid samples on the
    /// training tracks.
    pub samples_per_epoch: Option<usize>,
    pub augment: bool,
    /// Fraction of active pedestrians held out for validation.
    pub val_fraction: f64,
    pub sense_radius: f64,
    pub net: NetSpec,
    pub seed: u64,
    /// Size of the fixed training subset whose loss is logged every epoch.
    pub monitor_samples: usize,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            batch_size: 256,
            epochs: 200,
            samples_per_epoch: None,
            augment: true,
            val_fraction: 0.1,
            sense_radius: 4.0,
            net: NetSpec::policy(false),
            seed: 0,
            monitor_samples: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Loss on the fixed, non-augmented training subset.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpertMeta {
    pub dataset_hash: String,
    pub augment: bool,
    pub seed: u64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_pedestrians: Vec<u64>,
}

/// A deterministic map from an unaligned observation to a velocity command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpertPolicy {
    pub net: SetNet,
    pub meta: ExpertMeta,
}

impl ExpertPolicy {
    pub fn action(&self, obs: &Observation) -> Result<Vec2, BcError> {
        expert_action(self, obs)
    }

    /// Actions for a batch of unaligned observations.
    pub fn actions(&self, batch: &SetBatch) -> Result<Vec<Vec2>, BcError> {
        if !batch.is_empty() && batch.ego.ncols() != 4 {
            return Err(BcError::AlignedObservation);
        }
        let out = self.net.forward_batch(batch)?;
        Ok(out.rows().into_iter().map(|r| Vec2::new(r[0], r[1])).collect())
    }

    pub fn save(&self, path: &Path) -> Result<(), BcError> {
        let meta = serde_json::to_value(&self.meta).expect("metadata serializes");
        Checkpoint::new("expert", self.meta.seed, self.net.clone())
            .with_meta("expert", meta)
            .save(path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BcError> {
        let ckpt: Checkpoint<SetNet> = Checkpoint::load_role(path, "expert")?;
        let meta = ckpt
            .metadata
            .get("expert")
            .and_then(|v| serde_json::from_value(v.clone()).ok())
            .ok_or_else(|| NnError::Checkpoint {
                path: path.display().to_string(),
                msg: "missing expert metadata".into(),
            })?;
        Ok(Self { net: ckpt.model, meta })
    }
}

pub fn expert_action(expert: &ExpertPolicy, obs: &Observation) -> Result<Vec2, BcError> {
    if obs.aligned() {
        return Err(BcError::AlignedObservation);
    }
    let out = expert.net.forward(obs)?;
    Ok(Vec2::new(out[0], out[1]))
}

/// Drives every agent directly with one expert's output.
pub struct ExpertController {
    pub expert: ExpertPolicy,
}

impl Controller for ExpertController {
    fn actions(&mut self, world: &World, agents: &[usize]) -> Vec<Vec2> {
        if agents.is_empty() {
            return Vec::new();
        }
        let obs: Vec<Observation> = agents.iter().map(|&i| world.observe(i, false)).collect();
        let batch = SetBatch::from_observations(&obs).expect("unaligned observations share a layout");
        self.expert.actions(&batch).expect("experts take unaligned observations")
    }
}

/// Mean over the batch of the squared action error.
pub fn mse(net: &SetNet, samples: &[Sample]) -> Result<f64, BcError> {
    if samples.is_empty() {
        return Err(BcError::NoSamples);
    }
    let mut total = 0.0;
    for chunk in samples.chunks(1024) {
        let batch = SetBatch::from_observations(chunk.iter().map(|s| &s.observation))?;
        let out = net.forward_batch(&batch)?;
        for (row, s) in out.rows().into_iter().zip(chunk) {
            total += (row[0] - s.action.x).powi(2) + (row[1] - s.action.y).powi(2);
        }
    }
    Ok(total / samples.len() as f64)
}

/// One gradient step on `samples`; returns the batch loss before the step.
fn step(net: &mut SetNet, opt: &mut Adam, samples: &[&Sample]) -> Result<f64, BcError> {
    let batch = SetBatch::from_observations(samples.iter().map(|s| &s.observation))?;
    let (out, cache) = net.forward_train(&batch)?;
    let n = samples.len() as f64;
    let mut d = Array2::zeros(out.raw_dim());
    let mut loss = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let ex = out[[i, 0]] - s.action.x;
        let ey = out[[i, 1]] - s.action.y;
        loss += ex * ex + ey * ey;
        d[[i, 0]] = 2.0 * ex / n;
        d[[i, 1]] = 2.0 * ey / n;
    }
    let mut grad = net.zeros_like();
    net.backward(&cache, d, &mut grad);
    opt.step(net, &grad);
    Ok(loss / n)
}

/// Splits active pedestrians into training and validation track indices.
pub fn split_tracks(set: &TrackSet, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut active: Vec<usize> = (0..set.tracks.len()).filter(|&i| set.tracks[i].active).collect();
    active.sort_by_key(|&i| set.tracks[i].ped_id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    active.shuffle(&mut rng);
    let n_val = ((active.len() as f64) * val_fraction).round() as usize;
    let n_val = n_val.min(active.len().saturating_sub(1));
    let mut val = active.split_off(active.len() - n_val);
    active.sort_unstable();
    val.sort_unstable();
    (active, val)
}

/// Trains one expert on the active tracks of `set`.
///
/// Without augmentation every epoch is a shuffled pass over the grid
/// samples of the training tracks. With augmentation each minibatch is drawn
/// at fresh continuous timestamps and passed through a random flip and
/// rotation.
pub fn train_expert(set: &TrackSet, cfg: &BcConfig, dataset_hash: &str) -> Result<(ExpertPolicy, Vec<EpochLog>), BcError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (train_idx, val_idx) = split_tracks(set, cfg.val_fraction, cfg.seed);
    let train_grid = set.grid_samples(&train_idx, cfg.sense_radius);
    if train_grid.is_empty() {
        return Err(BcError::NoSamples);
    }
    let val_grid = set.grid_samples(&val_idx, cfg.sense_radius);
    let source = SampleSource::new(set, train_idx.clone(), cfg.sense_radius)?;

    let mut monitor: Vec<&Sample> = train_grid.iter().collect();
    monitor.shuffle(&mut rng);
    monitor.truncate(cfg.monitor_samples.max(1));
    let monitor: Vec<Sample> = monitor.into_iter().cloned().collect();

    let mut net = SetNet::init(&cfg.net, &mut rng);
    let mut opt = Adam::new(&net, cfg.lr);
    let per_epoch = cfg.samples_per_epoch.unwrap_or(train_grid.len()).max(1);
    let batches = per_epoch.div_ceil(cfg.batch_size.max(1));
    let mut order: Vec<usize> = (0..train_grid.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut cursor = 0;
        for b in 0..batches {
            let loss = if cfg.augment {
                let drawn: Vec<Sample> = (0..cfg.batch_size)
                    .map(|_| augment(&source.draw(&mut rng), &mut rng))
                    .collect();
                step(&mut net, &mut opt, &drawn.iter().collect::<Vec<_>>())?
            } else {
                let mut picked = Vec::with_capacity(cfg.batch_size);
                for _ in 0..cfg.batch_size {
                    if cursor == order.len() {
                        order.shuffle(&mut rng);
                        cursor = 0;
                    }
                    picked.push(&train_grid[order[cursor]]);
                    cursor += 1;
                }
                step(&mut net, &mut opt, &picked)?
            };
            if !loss.is_finite() {
                return Err(BcError::Diverged { epoch, batch: b, loss });
            }
        }
        let train_loss = mse(&net, &monitor)?;
        let val_loss = if val_grid.is_empty() { None } else { Some(mse(&net, &val_grid)?) };
        log::info!("expert epoch {epoch}: train {train_loss:.5} val {val_loss:?}");
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
        });
    }

    let last = log.last().cloned();
    let expert = ExpertPolicy {
        net,
        meta: ExpertMeta {
            dataset_hash: dataset_hash.to_string(),
            augment: cfg.augment,
            seed: cfg.seed,
            train_loss: last.as_ref().map_or(f64::NAN, |l| l.train_loss),
            val_loss: last.and_then(|l| l.val_loss),
            val_pedestrians: val_idx.iter().map(|&i| set.tracks[i].ped_id).collect(),
        },
    };
    Ok((expert, log))
}

/// Plain minibatch regression on a fixed sample list, used for capacity
/// checks. Returns the network and the final full-set loss.
pub fn fit_samples(samples: &[Sample], cfg: &BcConfig) -> Result<(SetNet, f64), BcError> {
    if samples.is_empty() {
        return Err(BcError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = SetNet::init(&cfg.net, &mut rng);
    let mut opt = Adam::new(&net, cfg.lr);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let picked: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let loss = step(&mut net, &mut opt, &picked)?;
            if !loss.is_finite() {
                return Err(BcError::Diverged { epoch, batch: b, loss });
            }
        }
    }
    let loss = mse(&net, samples)?;
    Ok((net, loss))
}
