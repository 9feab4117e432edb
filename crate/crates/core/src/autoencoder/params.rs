use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Mat;

/// Weights of one LSTM layer. Gate blocks are stacked in the order
/// input, forget, cell candidate, output (`4 * hidden` rows).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    pub wx: Mat,
    pub wh: Mat,
    pub b: Vec<f64>,
}

impl LstmWeights {
    pub fn zeros(d_in: usize, d_h: usize) -> Self {
        Self { wx: Mat::zeros(4 * d_h, d_in), wh: Mat::zeros(4 * d_h, d_h), b: vec![0.0; 4 * d_h] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub d_in: usize,
    pub d_hidden: usize,
    pub encoder: LstmWeights,
    pub decoder: LstmWeights,
    /// Output layer `d_in x d_hidden`.
    pub out_w: Mat,
    pub out_b: Vec<f64>,
}

pub const TENSOR_NAMES: [&str; 8] =
    ["enc.wx", "enc.wh", "enc.b", "dec.wx", "dec.wh", "dec.b", "out.w", "out.b"];

impl ModelParams {
    pub fn zeros(d_in: usize, d_hidden: usize) -> Self {
        Self {
            d_in,
            d_hidden,
            encoder: LstmWeights::zeros(d_in, d_hidden),
            decoder: LstmWeights::zeros(d_in, d_hidden),
            out_w: Mat::zeros(d_in, d_hidden),
            out_b: vec![0.0; d_in],
        }
    }

    /// Tensors in serialization order, paired with [`TENSOR_NAMES`].
    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            self.encoder.wx.as_slice(),
            self.encoder.wh.as_slice(),
            &self.encoder.b,
            self.decoder.wx.as_slice(),
            self.decoder.wh.as_slice(),
            &self.decoder.b,
            self.out_w.as_slice(),
            &self.out_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.encoder.wx.as_mut_slice(),
            self.encoder.wh.as_mut_slice(),
            &mut self.encoder.b,
            self.decoder.wx.as_mut_slice(),
            self.decoder.wh.as_mut_slice(),
            &mut self.decoder.b,
            self.out_w.as_mut_slice(),
            &mut self.out_b,
        ]
    }

    pub fn tensor_lens(d_in: usize, d_h: usize) -> [usize; 8] {
        let lstm = [4 * d_h * d_in, 4 * d_h * d_h, 4 * d_h];
        [lstm[0], lstm[1], lstm[2], lstm[0], lstm[1], lstm[2], d_in * d_h, d_in]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            crate::linalg::axpy(scale, src, dst);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.tensors().iter().map(|t| crate::linalg::dot(t, t)).sum()
    }
}

/// Uniform init in `[-1/sqrt(d_h), 1/sqrt(d_h)]`, forget-gate biases set to 1.
pub fn init_params(d_in: usize, d_hidden: usize, seed: u64) -> ModelParams {
    assert!(d_in >= 1 && d_hidden >= 1, "dimensions must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 1.0 / (d_hidden as f64).sqrt();
    let mut p = ModelParams::zeros(d_in, d_hidden);
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            *v = rng.random_range(-bound..=bound);
        }
    }
    for lstm in [&mut p.encoder, &mut p.decoder] {
        lstm.b[d_hidden..2 * d_hidden].iter_mut().for_each(|v| *v = 1.0);
    }
    p
}
