//! Synthetic arithmetic tasks over noisy digit vectors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::task::manifest::{Manifest, ManifestExample, MANIFEST_SCHEMA};
use crate::task::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// result = a + b
    Add,
    /// result = a + b + c
    Add3,
    /// result = a × b + c
    MulAdd,
    /// result = b + 9 if a is even, else b
    E9p,
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "add" => Ok(TaskKind::Add),
            "add3" => Ok(TaskKind::Add3),
            "mul-add" => Ok(TaskKind::MulAdd),
            "e9p" => Ok(TaskKind::E9p),
            _ => Err(Error::Config(format!("unknown task kind {s:?} (add, add3, mul-add, e9p)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    /// Smoothed random prototype per digit plus Gaussian noise.
    Prototype,
    /// One-hot digit plus Gaussian noise.
    OneHot,
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prototype" => Ok(FeatureKind::Prototype),
            "one-hot" => Ok(FeatureKind::OneHot),
            _ => Err(Error::Config(format!("unknown feature kind {s:?} (prototype, one-hot)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub kind: TaskKind,
    pub train: usize,
    pub test: usize,
    pub noise: f64,
    pub features: FeatureKind,
    /// Prototype dimension; one-hot vectors have one entry per digit.
    pub dim: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { kind: TaskKind::Add, train: 500, test: 200, noise: 0.3, features: FeatureKind::Prototype, dim: 32, seed: 0 }
    }
}

const DIGITS: i64 = 10;

struct Spec {
    name: &'static str,
    inputs: usize,
    background: String,
    modeb: Vec<&'static str>,
    max_body: usize,
    max_label: i64,
    target: &'static str,
    label: fn(&[i64]) -> i64,
}

fn facts(out: &mut String, pred: &str, a: std::ops::RangeInclusive<i64>, b: std::ops::RangeInclusive<i64>, f: impl Fn(i64, i64) -> i64) {
    for x in a {
        for y in b.clone() {
            let _ = write!(out, "{pred}({x},{y},{}). ", f(x, y));
        }
        out.push('\n');
    }
}

fn spec(kind: TaskKind) -> Spec {
    let d = DIGITS - 1;
    match kind {
        TaskKind::Add => {
            let mut bg = String::new();
            facts(&mut bg, "plus", 0..=d, 0..=d, |x, y| x + y);
            Spec {
                name: "add",
                inputs: 2,
                background: bg,
                modeb: vec!["nn(const(idx), var(n)+)", "plus(var(n)-, var(n)-, var(n)+) [symmetric(1,2)]"],
                max_body: 3,
                max_label: 2 * d,
                target: "result(C) :- nn(1,A), nn(2,B), plus(A,B,C).",
                label: |z| z[0] + z[1],
            }
        }
        TaskKind::Add3 => {
            let mut bg = String::new();
            facts(&mut bg, "plus", 0..=2 * d, 0..=d, |x, y| x + y);
            Spec {
                name: "add3",
                inputs: 3,
                background: bg,
                modeb: vec!["nn(const(idx), var(n)+)", "plus(var(n)-, var(n)-, var(n)+)"],
                max_body: 5,
                max_label: 3 * d,
                target: "result(E) :- nn(1,A), nn(2,B), nn(3,C), plus(A,B,D), plus(D,C,E).",
                label: |z| z[0] + z[1] + z[2],
            }
        }
        TaskKind::MulAdd => {
            let mut bg = String::new();
            facts(&mut bg, "mult", 0..=d, 0..=d, |x, y| x * y);
            facts(&mut bg, "plus", 0..=d * d, 0..=d, |x, y| x + y);
            Spec {
                name: "mul-add",
                inputs: 3,
                background: bg,
                modeb: vec![
                    "nn(const(idx), var(n)+)",
                    "mult(var(n)-, var(n)-, var(n)+) [symmetric(1,2)]",
                    "plus(var(n)-, var(n)-, var(n)+)",
                ],
                max_body: 5,
                max_label: d * d + d,
                target: "result(E) :- nn(1,A), nn(2,B), nn(3,C), mult(A,B,D), plus(D,C,E).",
                label: |z| z[0] * z[1] + z[2],
            }
        }
        TaskKind::E9p => {
            let mut bg = String::new();
            for x in (0..=d).step_by(2) {
                let _ = write!(bg, "even({x}). ");
            }
            bg.push('\n');
            for x in 0..=d {
                let _ = write!(bg, "plus9({x},{}). ", x + 9);
            }
            bg.push('\n');
            Spec {
                name: "e9p",
                inputs: 2,
                background: bg,
                modeb: vec!["nn(const(idx), var(n)+)", "even(var(n)-)", "not even(var(n)-)", "plus9(var(n)-, var(n)+)"],
                max_body: 4,
                max_label: d + 9,
                target: "result(Y) :- nn(1,A), even(A), nn(2,B), plus9(B,Y).\nresult(B) :- nn(1,A), nn(2,B), not even(A).",
                label: |z| if z[0] % 2 == 0 { z[1] + 9 } else { z[1] },
            }
        }
    }
}

struct Features {
    prototypes: Vec<Vec<f64>>,
    noise: Normal<f64>,
}

impl Features {
    fn new(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::Config(format!("noise: {e}")))?;
        let prototypes = match cfg.features {
            FeatureKind::OneHot => (0..DIGITS as usize).map(|k| (0..DIGITS as usize).map(|i| f64::from(u8::from(i == k))).collect()).collect(),
            FeatureKind::Prototype => {
                if cfg.dim < 2 {
                    return Err(Error::Config("prototype dimension must be at least 2".into()));
                }
                let std = Normal::new(0.0, 1.0).expect("unit normal");
                (0..DIGITS)
                    .map(|_| {
                        let raw: Vec<f64> = (0..cfg.dim).map(|_| std.sample(rng)).collect();
                        let n = raw.len();
                        // circular [1, 2, 1] / 4 blur
                        (0..n).map(|i| 0.25 * raw[(i + n - 1) % n] + 0.5 * raw[i] + 0.25 * raw[(i + 1) % n]).collect()
                    })
                    .collect()
            }
        };
        Ok(Features { prototypes, noise })
    }

    fn sample(&self, digit: i64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.prototypes[digit as usize].iter().map(|x| x + self.noise.sample(rng)).collect()
    }
}

/// A generated task: manifest plus the feature table it references.
pub struct Generated {
    pub manifest: Manifest,
    pub data: Dataset,
}

/// Generates a task. The manifest references its vectors through
/// `data_file`, which the caller writes next to it.
pub fn generate(cfg: &GenConfig, data_file: &str) -> Result<Generated> {
    if cfg.train == 0 {
        return Err(Error::Config("at least one training example is required".into()));
    }
    let s = spec(cfg.kind);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let feats = Features::new(cfg, &mut rng)?;
    let mut data = Dataset::new();
    let mut gold = BTreeMap::new();
    let mut make = |prefix: &str, n: usize, rng: &mut ChaCha8Rng| -> Result<Vec<ManifestExample>> {
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let z: Vec<i64> = (0..s.inputs).map(|_| rng.random_range(0..DIGITS)).collect();
            let mut raw = Vec::with_capacity(s.inputs);
            for (j, &v) in z.iter().enumerate() {
                let r = format!("{prefix}{i}_{j}");
                data.insert(r.clone(), feats.sample(v, rng))?;
                gold.insert(r.clone(), Value::from(v));
                raw.push(r);
            }
            out.push(ManifestExample { id: format!("{prefix}{i}"), label: format!("result({})", (s.label)(&z)), raw, ctx: String::new() });
        }
        Ok(out)
    };
    let examples = make("e", cfg.train, &mut rng)?;
    let test_examples = make("t", cfg.test, &mut rng)?;
    let mut types = BTreeMap::new();
    types.insert("idx".to_string(), (1..=s.inputs as i64).map(Value::from).collect());
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA,
        name: s.name.to_string(),
        background: s.background,
        modeh: vec!["result(var(n)-)".into()],
        modeb: s.modeb.iter().map(|m| m.to_string()).collect(),
        types,
        max_body: Some(s.max_body),
        latent: vec![(0..DIGITS).map(Value::from).collect(); s.inputs],
        label_space: vec![format!("result(0..{})", s.max_label)],
        examples,
        test_examples,
        data: BTreeMap::new(),
        data_file: Some(data_file.to_string()),
        gold_latents: gold,
        target_hypothesis: Some(s.target.to_string()),
    };
    Ok(Generated { manifest, data })
}
