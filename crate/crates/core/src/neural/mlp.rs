//! Multilayer perceptron with a shared tanh trunk and one softmax head per
//! latent domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::softmax;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input: usize,
    pub hidden: Vec<usize>,
    /// Output width of every head.
    pub heads: Vec<usize>,
}

impl MlpConfig {
    fn trunk_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }

    fn trunk_out(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.input)
    }

    pub fn param_count(&self) -> usize {
        let t: usize = self.trunk_dims().iter().map(|(i, o)| i * o + o).sum();
        t + self.heads.iter().map(|h| h * self.trunk_out() + h).sum::<usize>()
    }

    /// Offset of each trunk layer then each head in the flat vector.
    fn offsets(&self) -> (Vec<usize>, Vec<usize>) {
        let mut off = 0;
        let mut layers = Vec::new();
        for (i, o) in self.trunk_dims() {
            layers.push(off);
            off += i * o + o;
        }
        let mut heads = Vec::new();
        for h in &self.heads {
            heads.push(off);
            off += h * self.trunk_out() + h;
        }
        (layers, heads)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub config: MlpConfig,
    pub params: Vec<f64>,
}

/// Activations kept for the backward pass.
pub struct Trace {
    acts: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl Mlp {
    /// Weights and biases drawn uniformly from (−0.1, 0.1).
    pub fn new(config: MlpConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..config.param_count()).map(|_| rng.random_range(-0.1..0.1)).collect();
        Mlp { config, params }
    }

    fn linear(w: &[f64], x: &[f64], out: usize) -> Vec<f64> {
        let n = x.len();
        (0..out)
            .map(|o| {
                let row = &w[o * n..(o + 1) * n];
                row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[out * n + o]
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64], head: usize) -> Trace {
        assert_eq!(x.len(), self.config.input, "input dimension mismatch");
        let (layers, heads) = self.config.offsets();
        let mut acts = vec![x.to_vec()];
        for ((_, o), &off) in self.config.trunk_dims().iter().zip(&layers) {
            let z = Mlp::linear(&self.params[off..], acts.last().expect("input"), *o);
            acts.push(z.into_iter().map(f64::tanh).collect());
        }
        let logits = Mlp::linear(&self.params[heads[head]..], acts.last().expect("input"), self.config.heads[head]);
        Trace { acts, probs: softmax(&logits) }
    }

    pub fn probs(&self, x: &[f64], head: usize) -> Vec<f64> {
        self.forward(x, head).probs
    }

    /// Adds ∂L/∂params to `grad` given ∂L/∂logits of the head.
    pub fn backward(&self, trace: &Trace, head: usize, dlogits: &[f64], grad: &mut [f64]) {
        let (layers, heads) = self.config.offsets();
        let dims = self.config.trunk_dims();
        let h_in = trace.acts.last().expect("input");
        let n = h_in.len();
        let off = heads[head];
        let out = dlogits.len();
        let mut dh = vec![0.0; n];
        for o in 0..out {
            let g = dlogits[o];
            if g == 0.0 {
                continue;
            }
            for i in 0..n {
                grad[off + o * n + i] += g * h_in[i];
                dh[i] += g * self.params[off + o * n + i];
            }
            grad[off + out * n + o] += g;
        }
        for l in (0..dims.len()).rev() {
            let (inp, outp) = dims[l];
            let a = &trace.acts[l + 1];
            let x = &trace.acts[l];
            let off = layers[l];
            let dz: Vec<f64> = dh.iter().zip(a).map(|(g, t)| g * (1.0 - t * t)).collect();
            let mut dx = vec![0.0; inp];
            for o in 0..outp {
                let g = dz[o];
                if g == 0.0 {
                    continue;
                }
                for i in 0..inp {
                    grad[off + o * inp + i] += g * x[i];
                    dx[i] += g * self.params[off + o * inp + i];
                }
                grad[off + outp * inp + o] += g;
            }
            dh = dx;
        }
    }
}
