use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::env::Policy;
use crate::{Error, Result};

/// Scale applied to the output layer's initial weights so the initial policy
/// is close to uniform over each head's mask.
const OUTPUT_INIT_SCALE: f64 = 0.1;

/// Tanh MLP with all parameters in one flat buffer.
///
/// Layer `k` stores its weight matrix (`out x in`, row-major) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

struct Cache {
    /// Input to every layer, then the output logits.
    activations: Vec<Array2<f64>>,
}

impl PolicyNetwork {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], output_dim: usize, rng: &mut R) -> Result<Self> {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(output_dim);
        if sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("layer sizes must be positive, got {sizes:?}")));
        }
        let mut params = Vec::with_capacity(Self::param_count(&sizes));
        let layers = sizes.len() - 1;
        for k in 0..layers {
            let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if k + 1 == layers { OUTPUT_INIT_SCALE } else { 1.0 };
            for _ in 0..fan_in * fan_out {
                params.push(scale * rng.random_range(-bound..bound));
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self { sizes, params })
    }

    pub fn from_params(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer sizes {sizes:?}")));
        }
        let expected = Self::param_count(&sizes);
        if params.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "expected {expected} parameters for {sizes:?}, got {}",
                params.len()
            )));
        }
        Ok(Self { sizes, params })
    }

    fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer(&self, k: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let offset: usize = self.sizes[..=k].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let (fan_in, fan_out) = (self.sizes[k], self.sizes[k + 1]);
        let w = ArrayView2::from_shape((fan_out, fan_in), &self.params[offset..offset + fan_in * fan_out])
            .expect("layer shape matches buffer");
        let b = ArrayView1::from(&self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out]);
        (w, b)
    }

    fn forward_cached(&self, x: Array2<f64>) -> Cache {
        let layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(layers + 1);
        activations.push(x);
        for k in 0..layers {
            let (w, b) = self.layer(k);
            let mut z = activations[k].dot(&w.t()).as_standard_layout().into_owned();
            z += &b;
            if k + 1 < layers {
                z.mapv_inplace(f64::tanh);
            }
            activations.push(z);
        }
        Cache { activations }
    }

    /// Logits for a batch of observations (one per row).
    pub fn forward(&self, batch: &Array2<f64>) -> Array2<f64> {
        self.forward_cached(batch.clone()).activations.pop().expect("output layer")
    }

    /// Gradient of a scalar loss with respect to the parameters, given
    /// `d loss / d logits` for the batch.
    pub fn backward(&self, batch: &Array2<f64>, grad_logits: &Array2<f64>) -> Vec<f64> {
        let cache = self.forward_cached(batch.clone());
        let layers = self.sizes.len() - 1;
        let mut grad = vec![0.0; self.params.len()];
        let mut delta = grad_logits.clone();
        let mut offsets = Vec::with_capacity(layers);
        let mut acc = 0;
        for w in self.sizes.windows(2) {
            offsets.push(acc);
            acc += w[0] * w[1] + w[1];
        }
        for k in (0..layers).rev() {
            let input = &cache.activations[k];
            let (fan_in, fan_out) = (self.sizes[k], self.sizes[k + 1]);
            let gw = delta.t().dot(input);
            let gb = delta.sum_axis(Axis(0));
            let off = offsets[k];
            for (dst, src) in grad[off..off + fan_in * fan_out].iter_mut().zip(gw.iter()) {
                *dst = *src;
            }
            for (dst, src) in grad[off + fan_in * fan_out..off + fan_in * fan_out + fan_out].iter_mut().zip(gb.iter()) {
                *dst = *src;
            }
            if k > 0 {
                let (w, _) = self.layer(k);
                let mut next = delta.dot(&w);
                // input is tanh output of the previous layer
                next.zip_mut_with(input, |d, &a| *d *= 1.0 - a * a);
                delta = next;
            }
        }
        grad
    }
}

impl Policy for PolicyNetwork {
    fn logits(&self, observation: &[f64]) -> Vec<f64> {
        let x = Array2::from_shape_vec((1, observation.len()), observation.to_vec()).expect("row vector");
        self.forward(&x).into_raw_vec_and_offset().0
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.learning_rate * mh / (vh.sqrt() + self.eps);
        }
    }
}
