use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpCache};
use super::{NnError, Params};
use crate::sim::Observation;

pub const NEIGHBOR_DIM: usize = 4;

/// Layer widths of a [`SetNet`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetSpec {
    /// 3 for goal-aligned observations, 4 otherwise.
    pub ego_dim: usize,
    /// Widths after the input of both embedding networks; the last entry is
    /// the embedding size.
    pub embed: Vec<usize>,
    /// Hidden widths of the trunk.
    pub trunk: Vec<usize>,
    pub out_dim: usize,
}

impl Default for NetSpec {
    fn default() -> Self {
        Self {
            ego_dim: 4,
            embed: vec![64, 64],
            trunk: vec![64],
            out_dim: 2,
        }
    }
}

impl NetSpec {
    pub fn policy(aligned: bool) -> Self {
        Self {
            ego_dim: if aligned { 3 } else { 4 },
            ..Self::default()
        }
    }

    pub fn value(aligned: bool) -> Self {
        Self {
            out_dim: 1,
            ..Self::policy(aligned)
        }
    }
}

/// A batch of observations with variable neighbor counts. Neighbor records
/// of observation `i` are rows `offsets[i]..offsets[i + 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SetBatch {
    pub ego: Array2<f64>,
    pub neighbors: Array2<f64>,
    pub offsets: Vec<usize>,
}

impl SetBatch {
    pub fn from_observations<'a, I>(observations: I) -> Result<Self, NnError>
    where
        I: IntoIterator<Item = &'a Observation>,
    {
        let mut ego = Vec::new();
        let mut neigh = Vec::new();
        let mut offsets = vec![0];
        let mut ego_dim = None;
        for obs in observations {
            let e = obs.ego_features();
            match ego_dim {
                None => ego_dim = Some(e.len()),
                Some(d) if d != e.len() => {
                    return Err(NnError::ModeMismatch {
                        expected: d,
                        found: e.len(),
                    })
                }
                _ => {}
            }
            ego.extend(e);
            for n in &obs.neighbors {
                neigh.extend(n.features());
            }
            offsets.push(offsets.last().unwrap() + obs.neighbors.len());
        }
        let b = offsets.len() - 1;
        let d = ego_dim.unwrap_or(0);
        let n = *offsets.last().unwrap();
        Ok(Self {
            ego: Array2::from_shape_vec((b, d), ego).expect("shape matches"),
            neighbors: Array2::from_shape_vec((n, NEIGHBOR_DIM), neigh).expect("shape matches"),
            offsets,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sub-batch of the given observation indices, in that order.
    pub fn select(&self, idx: &[usize]) -> SetBatch {
        let d = self.ego.ncols();
        let mut ego = Vec::with_capacity(idx.len() * d);
        let mut neigh = Vec::new();
        let mut offsets = Vec::with_capacity(idx.len() + 1);
        offsets.push(0);
        for &i in idx {
            ego.extend(self.ego.row(i).iter());
            for r in self.offsets[i]..self.offsets[i + 1] {
                neigh.extend(self.neighbors.row(r).iter());
            }
            offsets.push(offsets.last().unwrap() + self.offsets[i + 1] - self.offsets[i]);
        }
        let n = *offsets.last().unwrap();
        SetBatch {
            ego: Array2::from_shape_vec((idx.len(), d), ego).expect("shape matches"),
            neighbors: Array2::from_shape_vec((n, NEIGHBOR_DIM), neigh).expect("shape matches"),
            offsets,
        }
    }
}

/// Permutation-invariant set encoder: `trunk(ego(e) + sum_j neighbor(n_j))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetNet {
    pub neighbor: Mlp,
    pub ego: Mlp,
    pub trunk: Mlp,
}

pub struct SetNetCache {
    neighbor: MlpCache,
    ego: MlpCache,
    trunk: MlpCache,
    offsets: Vec<usize>,
}

impl SetNet {
    pub fn init<R: Rng + ?Sized>(spec: &NetSpec, rng: &mut R) -> Self {
        let widths = |input: usize| {
            let mut w = vec![input];
            w.extend(&spec.embed);
            w
        };
        let embed = *spec.embed.last().expect("embedding width");
        let mut trunk = vec![embed];
        trunk.extend(&spec.trunk);
        trunk.push(spec.out_dim);
        Self {
            neighbor: Mlp::init(&widths(NEIGHBOR_DIM), rng),
            ego: Mlp::init(&widths(spec.ego_dim), rng),
            trunk: Mlp::init(&trunk, rng),
        }
    }

    pub fn spec(&self) -> NetSpec {
        let ew = self.ego.widths();
        let tw = self.trunk.widths();
        NetSpec {
            ego_dim: ew[0],
            embed: ew[1..].to_vec(),
            trunk: tw[1..tw.len() - 1].to_vec(),
            out_dim: self.trunk.output_dim(),
        }
    }

    pub fn ego_dim(&self) -> usize {
        self.ego.input_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.trunk.output_dim()
    }

    fn check(&self, batch: &SetBatch) -> Result<(), NnError> {
        if !batch.is_empty() && batch.ego.ncols() != self.ego_dim() {
            return Err(NnError::ModeMismatch {
                expected: self.ego_dim(),
                found: batch.ego.ncols(),
            });
        }
        Ok(())
    }

    fn pool(&self, embedded: &Array2<f64>, offsets: &[usize], mut acc: Array2<f64>) -> Array2<f64> {
        for i in 0..offsets.len() - 1 {
            let mut row = acc.row_mut(i);
            for r in offsets[i]..offsets[i + 1] {
                row += &embedded.row(r);
            }
        }
        acc
    }

    /// Sum of the neighbor embeddings plus the ego embedding, before the trunk.
    pub fn pooled(&self, batch: &SetBatch) -> Result<Array2<f64>, NnError> {
        self.check(batch)?;
        let n = self.neighbor.forward(&batch.neighbors);
        let e = self.ego.forward(&batch.ego);
        Ok(self.pool(&n, &batch.offsets, e))
    }

    pub fn forward_batch(&self, batch: &SetBatch) -> Result<Array2<f64>, NnError> {
        if batch.is_empty() {
            return Ok(Array2::zeros((0, self.out_dim())));
        }
        let z = self.pooled(batch)?;
        Ok(self.trunk.forward(&z))
    }

    pub fn forward(&self, obs: &Observation) -> Result<Vec<f64>, NnError> {
        let batch = SetBatch::from_observations(std::iter::once(obs))?;
        Ok(self.forward_batch(&batch)?.row(0).to_vec())
    }

    pub fn forward_train(&self, batch: &SetBatch) -> Result<(Array2<f64>, SetNetCache), NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        self.check(batch)?;
        let (n, neighbor) = self.neighbor.forward_train(batch.neighbors.clone());
        let (e, ego) = self.ego.forward_train(batch.ego.clone());
        let z = self.pool(&n, &batch.offsets, e);
        let (out, trunk) = self.trunk.forward_train(z);
        Ok((
            out,
            SetNetCache {
                neighbor,
                ego,
                trunk,
                offsets: batch.offsets.clone(),
            },
        ))
    }

    /// Accumulates gradients of a loss whose derivative with respect to the
    /// network output is `d_out`.
    pub fn backward(&self, cache: &SetNetCache, d_out: Array2<f64>, grad: &mut SetNet) {
        let dz = self
            .trunk
            .backward(&cache.trunk, d_out, &mut grad.trunk, true)
            .expect("input gradient requested");
        let rows = *cache.offsets.last().unwrap();
        let mut dn = Array2::zeros((rows, dz.ncols()));
        for i in 0..cache.offsets.len() - 1 {
            for r in cache.offsets[i]..cache.offsets[i + 1] {
                dn.row_mut(r).assign(&dz.row(i));
            }
        }
        self.neighbor.backward(&cache.neighbor, dn, &mut grad.neighbor, false);
        self.ego.backward(&cache.ego, dz, &mut grad.ego, false);
    }

    pub fn zeros_like(&self) -> SetNet {
        SetNet {
            neighbor: self.neighbor.zeros_like(),
            ego: self.ego.zeros_like(),
            trunk: self.trunk.zeros_like(),
        }
    }
}

impl Params for SetNet {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.neighbor.slices();
        v.extend(self.ego.slices());
        v.extend(self.trunk.slices());
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.neighbor.slices_mut();
        v.extend(self.ego.slices_mut());
        v.extend(self.trunk.slices_mut());
        v
    }
}
