use alloc::vec;
use alloc::vec::Vec;

use libm::{sqrt, tanh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Number of network inputs: irradiance and cell temperature.
pub const N_INPUTS: usize = 2;

/// Inputs further than this fraction of the training range outside it
/// raise the extrapolation flag.
pub const EXTRAPOLATION_MARGIN: f64 = 0.2;

/// Affine map from `[min, max]` onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub min: f64,
    pub max: f64,
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer { min: -1.0, max: 1.0 }
    }
}

impl Normalizer {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let (min, max) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if min.is_finite() && max.is_finite() {
            Normalizer { min, max }
        } else {
            Normalizer::default()
        }
    }

    fn half_span(&self) -> f64 {
        let h = 0.5 * (self.max - self.min);
        if h > 0.0 {
            h
        } else {
            1.0
        }
    }

    #[inline]
    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.min) / self.half_span() - 1.0
    }

    #[inline]
    pub fn from_unit(&self, y: f64) -> f64 {
        (y + 1.0) * self.half_span() + self.min
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub extrapolated: bool,
}

/// Fully connected network with `tanh` hidden layers and a single linear
/// output. Parameters live in one flat vector, layer by layer, each layer
/// as its row-major `out x in` weight matrix followed by its biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layers: Vec<usize>,
    params: Vec<f64>,
    pub input_norm: [Normalizer; N_INPUTS],
    pub output_norm: Normalizer,
}

fn param_count(layers: &[usize]) -> usize {
    layers.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

impl MlpNetwork {
    /// Weights and biases drawn uniformly from `±1/sqrt(fan_in)`.
    pub fn new(layers: &[usize], seed: u64) -> Result<Self> {
        Self::check_layers(layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(layers));
        for w in layers.windows(2) {
            let bound = 1.0 / sqrt(w[0] as f64);
            for _ in 0..w[1] * (w[0] + 1) {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Ok(MlpNetwork {
            layers: layers.to_vec(),
            params,
            input_norm: [Normalizer::default(); N_INPUTS],
            output_norm: Normalizer::default(),
        })
    }

    pub fn zeros(layers: &[usize]) -> Result<Self> {
        Self::check_layers(layers)?;
        Ok(MlpNetwork {
            layers: layers.to_vec(),
            params: vec![0.0; param_count(layers)],
            input_norm: [Normalizer::default(); N_INPUTS],
            output_norm: Normalizer::default(),
        })
    }

    pub fn from_parts(
        layers: &[usize],
        params: Vec<f64>,
        input_norm: [Normalizer; N_INPUTS],
        output_norm: Normalizer,
    ) -> Result<Self> {
        Self::check_layers(layers)?;
        if params.len() != param_count(layers) {
            return Err(Error::InvalidInput("parameter count does not match layer sizes"));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("network weights must be finite"));
        }
        Ok(MlpNetwork {
            layers: layers.to_vec(),
            params,
            input_norm,
            output_norm,
        })
    }

    fn check_layers(layers: &[usize]) -> Result<()> {
        if layers.len() < 2 || layers[0] != N_INPUTS || *layers.last().unwrap() != 1 || layers.contains(&0) {
            return Err(Error::InvalidInput(
                "layers must be [2, hidden.., 1] with non-zero widths",
            ));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Per-layer `(weights, biases)` slices.
    pub fn layer_slices(&self) -> Vec<(&[f64], &[f64])> {
        let mut out = Vec::with_capacity(self.layers.len() - 1);
        let mut at = 0;
        for w in self.layers.windows(2) {
            let nw = w[0] * w[1];
            out.push((&self.params[at..at + nw], &self.params[at + nw..at + nw + w[1]]));
            at += nw + w[1];
        }
        out
    }

    pub fn normalize_input(&self, x: [f64; N_INPUTS]) -> [f64; N_INPUTS] {
        core::array::from_fn(|k| self.input_norm[k].to_unit(x[k]))
    }

    /// Network output on already-normalized inputs.
    pub fn forward_normalized(&self, x: &[f64; N_INPUTS]) -> f64 {
        self.forward_with(&self.params, x)
    }

    pub(crate) fn forward_with(&self, params: &[f64], x: &[f64; N_INPUTS]) -> f64 {
        let mut a: Vec<f64> = x.to_vec();
        let mut at = 0;
        let n_layers = self.layers.len() - 1;
        for (l, w) in self.layers.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &params[at..at + n_in * n_out];
            let biases = &params[at + n_in * n_out..at + n_in * n_out + n_out];
            at += n_in * n_out + n_out;
            let last = l + 1 == n_layers;
            a = (0..n_out)
                .map(|i| {
                    let z = biases[i]
                        + weights[i * n_in..(i + 1) * n_in]
                            .iter()
                            .zip(&a)
                            .map(|(w, x)| w * x)
                            .sum::<f64>();
                    if last {
                        z
                    } else {
                        tanh(z)
                    }
                })
                .collect();
        }
        a[0]
    }

    /// Denormalized prediction for irradiance `g` [W/m²] and temperature
    /// `t` [K].
    pub fn forward(&self, g: f64, t: f64) -> Prediction {
        let x = self.normalize_input([g, t]);
        let limit = 1.0 + 2.0 * EXTRAPOLATION_MARGIN;
        Prediction {
            value: self.output_norm.from_unit(self.forward_normalized(&x)),
            extrapolated: x.iter().any(|v| v.abs() > limit),
        }
    }

    /// Gradient of the normalized output with respect to every parameter,
    /// by backpropagation, written into `row`.
    pub(crate) fn gradient_into(&self, x: &[f64; N_INPUTS], row: &mut [f64]) -> f64 {
        let n_layers = self.layers.len() - 1;
        // forward, keeping every activation
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_vec());
        let mut offsets = Vec::with_capacity(n_layers);
        let mut at = 0;
        for (l, w) in self.layers.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            offsets.push(at);
            let weights = &self.params[at..at + n_in * n_out];
            let biases = &self.params[at + n_in * n_out..at + n_in * n_out + n_out];
            at += n_in * n_out + n_out;
            let prev = &acts[l];
            let last = l + 1 == n_layers;
            let next: Vec<f64> = (0..n_out)
                .map(|i| {
                    let z = biases[i]
                        + weights[i * n_in..(i + 1) * n_in]
                            .iter()
                            .zip(prev)
                            .map(|(w, x)| w * x)
                            .sum::<f64>();
                    if last {
                        z
                    } else {
                        tanh(z)
                    }
                })
                .collect();
            acts.push(next);
        }

        // backward; delta = d out / d z for the current layer
        let mut delta = vec![1.0];
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.layers[l], self.layers[l + 1]);
            let off = offsets[l];
            let prev = &acts[l];
            for i in 0..n_out {
                for j in 0..n_in {
                    row[off + i * n_in + j] = delta[i] * prev[j];
                }
                row[off + n_in * n_out + i] = delta[i];
            }
            if l > 0 {
                let weights = &self.params[off..off + n_in * n_out];
                delta = (0..n_in)
                    .map(|j| {
                        let back: f64 = (0..n_out).map(|i| weights[i * n_in + j] * delta[i]).sum();
                        back * (1.0 - prev[j] * prev[j])
                    })
                    .collect();
            }
        }
        acts[n_layers][0]
    }
}
