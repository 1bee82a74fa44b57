use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Params;

/// Fully connected layer computing `x W + b` on row-major batches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `(fan_in, fan_out)`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Array2::zeros((fan_in, fan_out)),
            b: Array1::zeros(fan_out),
        }
    }

    /// Uniform in `±1/sqrt(fan_in)` for weights and biases alike.
    pub fn init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..bound));
        let b = Array1::from_shape_simple_fn(fan_out, || rng.random_range(-bound..bound));
        Self { w, b }
    }

    pub fn fan_in(&self) -> usize {
        self.w.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.ncols()
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.w);
        z += &self.b;
        z
    }
}

/// Rectifier on every hidden layer, identity on the output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Layer inputs recorded by [`Mlp::forward_train`]; `inputs[l]` feeds
/// layer `l`.
#[derive(Clone, Debug)]
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
}

impl Mlp {
    /// `widths = [input, hidden.., output]`.
    pub fn init<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        Self {
            layers: widths.windows(2).map(|w| Linear::init(w[0], w[1], rng)).collect(),
        }
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.fan_out()));
        w
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").fan_out()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut h = self.layers[0].apply(x);
        for layer in &self.layers[1..] {
            h.mapv_inplace(relu);
            h = layer.apply(&h);
        }
        h
    }

    pub fn forward_train(&self, x: Array2<f64>) -> (Array2<f64>, MlpCache) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(&h);
            inputs.push(h);
            if l + 1 < self.layers.len() {
                z.mapv_inplace(relu);
            }
            h = z;
        }
        (h, MlpCache { inputs })
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the input when `want_input` is set.
    pub fn backward(&self, cache: &MlpCache, d_out: Array2<f64>, grad: &mut Mlp, want_input: bool) -> Option<Array2<f64>> {
        let mut dz = d_out;
        for l in (0..self.layers.len()).rev() {
            let x = &cache.inputs[l];
            let g = &mut grad.layers[l];
            ndarray::linalg::general_mat_mul(1.0, &x.t(), &dz, 1.0, &mut g.w);
            g.b += &dz.sum_axis(Axis(0));
            if l == 0 && !want_input {
                return None;
            }
            let mut dx = dz.dot(&self.layers[l].w.t());
            if l > 0 {
                // x is the rectified output of the previous layer
                ndarray::Zip::from(&mut dx).and(x).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            dz = dx;
        }
        Some(dz)
    }

    pub fn zeros_like(&self) -> Mlp {
        Mlp {
            layers: self.layers.iter().map(|l| Linear::zeros(l.fan_in(), l.fan_out())).collect(),
        }
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

impl Params for Mlp {
    fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            out.push(l.w.as_slice().expect("standard layout"));
            out.push(l.b.as_slice().expect("standard layout"));
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.w.as_slice_mut().expect("standard layout"));
            out.push(l.b.as_slice_mut().expect("standard layout"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn single_layer_quadratic_gradient() {
        // loss = |x W - y|^2 has dL/dW = 2 x^T (x W - y)
        let net = Mlp {
            layers: vec![Linear {
                w: array![[1.0, -2.0], [0.5, 3.0], [0.0, 1.0]],
                b: array![0.0, 0.0],
            }],
        };
        let x = array![[1.0, 2.0, -1.0]];
        let y = array![[0.5, 0.5]];
        let (out, cache) = net.forward_train(x.clone());
        let resid = &out - &y;
        let mut grad = net.zeros_like();
        net.backward(&cache, resid.mapv(|r| 2.0 * r), &mut grad, false);
        let expected = x.t().dot(&resid) * 2.0;
        for (a, b) in grad.layers[0].w.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let net = Mlp {
            layers: vec![Linear::zeros(4, 8), Linear::zeros(8, 2)],
        };
        let out = net.forward(&array![[1.0, 2.0, 3.0, 4.0]]);
        assert!(out.iter().all(|&v| v == 0.0));
    }
}
