//! Joint Adam training of the MLP and θ_R under the semantic loss.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{semantic_loss_grad, softmax, softmax_backward, LossCircuit};
use super::mlp::{Mlp, MlpConfig};
use super::AtomIndex;
use crate::asp::syntax::Term;
use crate::error::{Error, Result};
use crate::task::{NeuralTask, RawExample};

pub const MODEL_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 10, lr: 1e-3, batch: 32, beta1: 0.9, beta2: 0.999, adam_eps: 1e-8, hidden: vec![64], seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss over the epoch's examples, each taken before its batch
    /// update. Epoch 0 is the initial model.
    pub loss: f64,
    pub posterior: Vec<f64>,
    pub latent_accuracy: Option<f64>,
}

/// Feature vectors and per-position heads of a set of labelled points.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub refs: Vec<String>,
    pub features: Vec<Vec<f64>>,
    /// Per example, the feature index at every position.
    pub inputs: Vec<Vec<usize>>,
    /// Head used for each latent position.
    pub heads: Vec<usize>,
    pub head_widths: Vec<usize>,
    /// Per feature, the gold (head, value) when known.
    pub gold: Vec<Option<(usize, usize)>>,
}

impl TrainingData {
    pub fn from_task(task: &NeuralTask, examples: &[RawExample]) -> Result<Self> {
        let (heads, head_widths) = head_of_position(&task.latent.domains);
        let mut slot: BTreeMap<&str, usize> = BTreeMap::new();
        let mut refs = Vec::new();
        let mut features = Vec::new();
        let mut gold = Vec::new();
        let mut inputs = Vec::with_capacity(examples.len());
        for e in examples {
            let mut row = Vec::with_capacity(e.raw.len());
            for (j, r) in e.raw.iter().enumerate() {
                let i = match slot.get(r.as_str()) {
                    Some(&i) => i,
                    None => {
                        let v = task
                            .data
                            .get(r)
                            .ok_or_else(|| Error::DanglingRawRef { example: e.id.clone(), reference: r.clone() })?;
                        refs.push(r.clone());
                        features.push(v.to_vec());
                        gold.push(
                            task.gold_latents.get(r).and_then(|t| task.latent.index_of(j, t)).map(|k| (heads[j], k)),
                        );
                        slot.insert(r, refs.len() - 1);
                        refs.len() - 1
                    }
                };
                row.push(i);
            }
            inputs.push(row);
        }
        Ok(TrainingData { refs, features, inputs, heads, head_widths, gold })
    }

    pub fn input_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }
}

/// Positions with equal domains share a head.
pub fn head_of_position(domains: &[Vec<Term>]) -> (Vec<usize>, Vec<usize>) {
    let mut seen: Vec<&Vec<Term>> = Vec::new();
    let mut heads = Vec::new();
    for d in domains {
        match seen.iter().position(|s| *s == d) {
            Some(h) => heads.push(h),
            None => {
                seen.push(d);
                heads.push(seen.len() - 1);
            }
        }
    }
    (heads, seen.iter().map(|d| d.len()).collect())
}

/// Fraction of raw inputs with a gold latent whose argmax prediction is
/// correct. `None` when no gold latents are known.
pub fn latent_accuracy(mlp: &Mlp, data: &TrainingData) -> Option<f64> {
    let known: Vec<(usize, (usize, usize))> =
        data.gold.iter().enumerate().filter_map(|(i, g)| g.map(|g| (i, g))).collect();
    if known.is_empty() {
        return None;
    }
    let hits = known.par_iter().filter(|(i, (h, k))| argmax(&mlp.probs(&data.features[*i], *h)) == *k).count();
    Some(hits as f64 / known.len() as f64)
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Loss of one example and its gradients with respect to the MLP parameters
/// and θ_R. `None` when the example has zero probability.
pub fn example_loss_grad(
    mlp: &Mlp,
    theta_r: &[f64],
    data: &TrainingData,
    e: usize,
    circuit: &LossCircuit,
    index: &AtomIndex,
) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let post = softmax(theta_r);
    let traces: Vec<_> = data.inputs[e]
        .iter()
        .enumerate()
        .map(|(j, &f)| mlp.forward(&data.features[f], data.heads[j]))
        .collect();
    let mut p = post.clone();
    for t in &traces {
        p.extend_from_slice(&t.probs);
    }
    let (loss, g) = semantic_loss_grad(circuit, &p)?;
    let g_theta = softmax_backward(&post, &g[..index.rules]);
    let mut g_params = vec![0.0; mlp.params.len()];
    for (j, t) in traces.iter().enumerate() {
        let dl = softmax_backward(&t.probs, &g[index.nn_range(j)]);
        mlp.backward(t, data.heads[j], &dl, &mut g_params);
    }
    Some((loss, g_params, g_theta))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, cfg: &TrainConfig, x: &mut [&mut f64], g: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (i, xi) in x.iter_mut().enumerate() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            **xi -= cfg.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + cfg.adam_eps);
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub mlp: Mlp,
    pub theta_r: Vec<f64>,
    pub trajectory: Vec<EpochRecord>,
}

impl Trained {
    pub fn posterior(&self) -> Vec<f64> {
        softmax(&self.theta_r)
    }
}

fn divergence(circuit: &LossCircuit) -> Error {
    Error::Divergence(format!("example {} has zero probability", circuit.example))
}

fn mean_loss(mlp: &Mlp, theta_r: &[f64], data: &TrainingData, circuits: &[LossCircuit]) -> Result<f64> {
    let post = softmax(theta_r);
    let losses: Vec<f64> = (0..circuits.len())
        .into_par_iter()
        .map(|e| {
            let mut p = post.clone();
            for (j, &f) in data.inputs[e].iter().enumerate() {
                p.extend(mlp.probs(&data.features[f], data.heads[j]));
            }
            super::loss::semantic_loss(&circuits[e], &p)
        })
        .collect();
    if let Some(e) = losses.iter().position(|l| !l.is_finite()) {
        return Err(divergence(&circuits[e]));
    }
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

/// Trains for `cfg.epochs` epochs. Batches are shuffled per epoch from
/// `cfg.seed`; gradients of a batch are summed in example order.
pub fn train(
    data: &TrainingData,
    circuits: &[LossCircuit],
    index: &AtomIndex,
    mut mlp: Mlp,
    mut theta_r: Vec<f64>,
    cfg: &TrainConfig,
) -> Result<Trained> {
    if circuits.len() != data.inputs.len() {
        return Err(Error::Config(format!("{} circuits for {} examples", circuits.len(), data.inputs.len())));
    }
    if theta_r.len() != index.rules {
        return Err(Error::Config(format!("θ_R has {} entries for {} rules", theta_r.len(), index.rules)));
    }
    if cfg.batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let np = mlp.params.len();
    let mut adam = Adam::new(np + theta_r.len());
    let mut trajectory = vec![EpochRecord {
        epoch: 0,
        loss: mean_loss(&mlp, &theta_r, data, circuits)?,
        posterior: softmax(&theta_r),
        latent_accuracy: latent_accuracy(&mlp, data),
    }];
    let mut order: Vec<usize> = (0..circuits.len()).collect();
    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch) {
            let parts: Vec<Option<(f64, Vec<f64>, Vec<f64>)>> = batch
                .par_iter()
                .map(|&e| example_loss_grad(&mlp, &theta_r, data, e, &circuits[e], index))
                .collect();
            let mut grad = vec![0.0; np + theta_r.len()];
            for (part, &e) in parts.into_iter().zip(batch) {
                let (l, gp, gr) = part.ok_or_else(|| divergence(&circuits[e]))?;
                total += l;
                for (a, b) in grad.iter_mut().zip(gp.iter().chain(&gr)) {
                    *a += b;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence(format!("non-finite gradient in epoch {epoch}")));
            }
            let mut xs: Vec<&mut f64> = mlp.params.iter_mut().chain(theta_r.iter_mut()).collect();
            adam.step(cfg, &mut xs, &grad);
        }
        let loss = total / circuits.len().max(1) as f64;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("loss is {loss} in epoch {epoch}")));
        }
        log::info!("epoch {epoch}: loss {loss:.6}");
        trajectory.push(EpochRecord {
            epoch,
            loss,
            posterior: softmax(&theta_r),
            latent_accuracy: latent_accuracy(&mlp, data),
        });
    }
    Ok(Trained { mlp, theta_r, trajectory })
}

/// A fresh MLP for the data and a zero θ_R.
pub fn initial_model(data: &TrainingData, rules: usize, cfg: &TrainConfig) -> (Mlp, Vec<f64>) {
    let mlp = Mlp::new(
        MlpConfig { input: data.input_dim(), hidden: cfg.hidden.clone(), heads: data.head_widths.clone() },
        cfg.seed,
    );
    (mlp, vec![0.0; rules])
}

/// Serialized trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub mlp: Mlp,
    /// Head per latent position.
    pub heads: Vec<usize>,
    pub theta_r: Vec<f64>,
    pub posterior: Vec<f64>,
    pub rules: Vec<String>,
    pub config: TrainConfig,
    pub trajectory: Vec<EpochRecord>,
}

impl ModelFile {
    pub fn new(t: &Trained, data: &TrainingData, rules: Vec<String>, config: TrainConfig) -> Self {
        ModelFile {
            schema_version: MODEL_SCHEMA,
            mlp: t.mlp.clone(),
            heads: data.heads.clone(),
            theta_r: t.theta_r.clone(),
            posterior: t.posterior(),
            rules,
            config,
            trajectory: t.trajectory.clone(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.schema_version != MODEL_SCHEMA {
            return Err(Error::Schema { expected: MODEL_SCHEMA.to_string(), found: self.schema_version.to_string() });
        }
        if self.mlp.params.len() != self.mlp.config.param_count() || self.theta_r.len() != self.rules.len() {
            return Err(Error::Schema { expected: "consistent parameter sizes".into(), found: "mismatch".into() });
        }
        Ok(())
    }

    /// Argmax latent value per position of a raw example.
    pub fn predict_latents(&self, features: &[&[f64]]) -> Vec<usize> {
        features.iter().zip(&self.heads).map(|(x, &h)| argmax(&self.mlp.probs(x, h))).collect()
    }
}
