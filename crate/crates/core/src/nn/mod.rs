//! Set-encoder networks with hand-written reverse-mode gradients.

mod adam;
mod checkpoint;
mod gaussian;
mod mlp;
mod setnet;

use thiserror::Error;

pub use adam::Adam;
pub use checkpoint::Checkpoint;
pub use gaussian::{entropy, log_prob, GaussianPolicy};
pub use mlp::{Linear, Mlp, MlpCache};
pub use setnet::{NetSpec, SetBatch, SetNet, SetNetCache, NEIGHBOR_DIM};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("network expects {expected}-dimensional ego input, observation has {found}")]
    ModeMismatch { expected: usize, found: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Flat views over every parameter tensor, in a fixed order. Gradients are
/// values of the same type, so optimizers can walk both in lockstep.
pub trait Params {
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    fn norm_sq(&self) -> f64 {
        self.slices().iter().flat_map(|s| s.iter()).map(|x| x * x).sum()
    }

    fn scale(&mut self, k: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x *= k);
        }
    }

    fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    /// Rescales so the global L2 norm is at most `max_norm`; returns the
    /// norm before clipping.
    fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let n = self.norm_sq().sqrt();
        if n > max_norm && n > 0.0 {
            self.scale(max_norm / n);
        }
        n
    }
}
