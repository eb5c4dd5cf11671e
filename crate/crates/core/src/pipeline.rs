//! Stage-by-stage orchestration with persisted intermediates.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::debug;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::abduction::{abduce_with_limit, Abduction, PossibilitiesFile};
use crate::asp::solve::answer_sets;
use crate::asp::syntax::*;
use crate::asp::parser::parse_rule;
use crate::error::{Error, Result};
use crate::neural::{
    argmax, build_circuits, initial_model, train, AtomIndex, EpochRecord, ModelFile, TrainConfig, Trained, TrainingData,
};
use crate::solver::{emit_psolve, penalties_from_probs, prior, solve_native, SolveInstance, Solution};
use crate::synthesis::{OptSufficientSpace, SpaceFile, Synthesis, SynthesisConfig};
use crate::task::{NeuralTask, RawExample, SymbolicTask};

pub const REPORT_SCHEMA: u32 = 1;
pub const SOLUTION_SCHEMA: u32 = 1;
pub const DEFAULT_POSSIBILITY_LIMIT: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Abduce,
    Space,
    Train,
    Solve,
    Eval,
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abduce" => Ok(Stage::Abduce),
            "space" => Ok(Stage::Space),
            "train" => Ok(Stage::Train),
            "solve" => Ok(Stage::Solve),
            "eval" => Ok(Stage::Eval),
            _ => Err(Error::Config(format!("unknown stage {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub train: TrainConfig,
    pub synthesis: SynthesisConfig,
    pub possibility_limit: usize,
    /// Last stage to run.
    pub until: Stage,
    /// Reuse artifacts already present in the output directory.
    pub resume: bool,
    pub emit_psolve: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            train: TrainConfig::default(),
            synthesis: SynthesisConfig::default(),
            possibility_limit: DEFAULT_POSSIBILITY_LIMIT,
            until: Stage::Eval,
            resume: false,
            emit_psolve: false,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn example_ids(sym: &SymbolicTask) -> Vec<String> {
    sym.examples.iter().map(|e| e.id.clone()).collect()
}

pub fn load_possibilities(path: &Path, sym: &SymbolicTask) -> Result<Abduction> {
    let f: PossibilitiesFile = read_json(path)?;
    debug!("read {}", path.display());
    Abduction::from_file(&f, sym.latent.clone(), &example_ids(sym))
}

pub fn load_space(path: &Path, syn: &Synthesis) -> Result<OptSufficientSpace> {
    let f: SpaceFile = read_json(path)?;
    debug!("recomputing signatures of {} rules", f.rules.len());
    OptSufficientSpace::from_file(&f, syn)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let m: ModelFile = read_json(path)?;
    m.check()?;
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PossibilityStats {
    pub examples: usize,
    pub tables: usize,
    pub total: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

impl PossibilityStats {
    pub fn of(abd: &Abduction) -> Self {
        let per: Vec<usize> =
            abd.examples.iter().map(|e| e.groups.iter().map(|g| g.possibilities.len()).sum()).collect();
        PossibilityStats {
            examples: per.len(),
            tables: abd.tables.len(),
            total: per.iter().sum(),
            min: per.iter().copied().min().unwrap_or(0),
            max: per.iter().copied().max().unwrap_or(0),
            mean: per.iter().sum::<usize>() as f64 / per.len().max(1) as f64,
        }
    }
}

/// Trains the network and θ_R on the task's training examples.
pub fn train_stage(
    task: &NeuralTask,
    syn: &Synthesis,
    space: &OptSufficientSpace,
    cfg: &TrainConfig,
) -> Result<(Trained, TrainingData)> {
    let circuits = build_circuits(syn, space)?;
    debug!("{} loss circuits", circuits.len());
    let data = TrainingData::from_task(task, &task.examples)?;
    let index = AtomIndex::new(space.len(), &task.latent);
    let (mlp, theta) = initial_model(&data, space.len(), cfg);
    let trained = train(&data, &circuits, &index, mlp, theta, cfg)?;
    Ok((trained, data))
}

/// Per example and position, the model's distribution over the latent
/// domain.
pub fn latent_probs(task: &NeuralTask, model: &ModelFile, examples: &[RawExample]) -> Result<Vec<Vec<Vec<f64>>>> {
    examples
        .iter()
        .map(|e| {
            e.raw
                .iter()
                .enumerate()
                .map(|(j, r)| {
                    let x = task
                        .data
                        .get(r)
                        .ok_or_else(|| Error::DanglingRawRef { example: e.id.clone(), reference: r.clone() })?;
                    let h = *model.heads.get(j).ok_or_else(|| Error::Config("model has fewer inputs than the task".into()))?;
                    Ok(model.mlp.probs(x, h))
                })
                .collect()
        })
        .collect()
}

pub fn solve_instance(task: &NeuralTask, syn: &Synthesis, space: &OptSufficientSpace, model: &ModelFile) -> Result<SolveInstance> {
    if model.rules.len() != space.len() || model.rules.iter().zip(&space.rules).any(|(a, b)| *a != b.text) {
        return Err(Error::Config("model was trained on a different rule space".into()));
    }
    let probs = latent_probs(task, model, &task.examples)?;
    SolveInstance::new(syn, space, &penalties_from_probs(syn.abduction, &probs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChosenLatent {
    pub example: String,
    pub z: Vec<String>,
    pub penalty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub schema_version: u32,
    pub hypothesis: Vec<String>,
    pub rule_ids: Vec<usize>,
    pub length: usize,
    pub objective: f64,
    pub prior: f64,
    /// Other hypotheses seen with the same objective.
    pub ties: usize,
    pub nodes: u64,
    pub chosen: Vec<ChosenLatent>,
    pub posterior: Vec<f64>,
}

impl SolutionFile {
    pub fn new(s: &Solution, task: &NeuralTask, posterior: Vec<f64>) -> Self {
        SolutionFile {
            schema_version: SOLUTION_SCHEMA,
            hypothesis: s.texts.clone(),
            rule_ids: s.rules.clone(),
            length: s.length,
            objective: s.objective,
            prior: prior(s.length),
            ties: s.ties.saturating_sub(1),
            nodes: s.nodes,
            chosen: s
                .chosen
                .iter()
                .map(|c| ChosenLatent {
                    example: c.example.clone(),
                    z: c.z.iter().enumerate().map(|(j, &k)| task.latent.domains[j][k].to_string()).collect(),
                    penalty: c.penalty,
                })
                .collect(),
            posterior,
        }
    }

    pub fn rules(&self) -> Result<Vec<Rule>> {
        if self.schema_version != SOLUTION_SCHEMA {
            return Err(Error::Schema { expected: SOLUTION_SCHEMA.to_string(), found: self.schema_version.to_string() });
        }
        self.hypothesis.iter().map(|t| parse_rule(t)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub train_latent_accuracy: Option<f64>,
    pub test_latent_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub test_examples: usize,
    /// Whether the hypothesis equals the generating program up to
    /// canonical form.
    pub matches_target: Option<bool>,
}

fn latent_accuracy_on(task: &NeuralTask, model: &ModelFile, examples: &[RawExample]) -> Result<Option<f64>> {
    let mut seen = BTreeMap::new();
    for e in examples {
        for (j, r) in e.raw.iter().enumerate() {
            if let Some(k) = task.gold_latents.get(r).and_then(|t| task.latent.index_of(j, t)) {
                seen.entry(r.clone()).or_insert((j, k));
            }
        }
    }
    if seen.is_empty() {
        return Ok(None);
    }
    let mut hits = 0;
    for (r, (j, k)) in &seen {
        let x = task.data.get(r).ok_or_else(|| Error::Data(format!("missing raw input {r}")))?;
        if argmax(&model.mlp.probs(x, model.heads[*j])) == *k {
            hits += 1;
        }
    }
    Ok(Some(hits as f64 / seen.len() as f64))
}

/// Whether B ∪ ctx ∪ H ∪ {argmax latents} entails the label of every test
/// example, as a fraction.
fn end_to_end_accuracy(task: &NeuralTask, model: &ModelFile, hypothesis: &[Rule]) -> Result<Option<f64>> {
    if task.test_examples.is_empty() {
        return Ok(None);
    }
    let probs = latent_probs(task, model, &task.test_examples)?;
    let mut hits = 0;
    for (e, p) in task.test_examples.iter().zip(&probs) {
        let z: Vec<usize> = p.iter().map(|v| argmax(v)).collect();
        let mut prog = task.background.clone();
        prog.extend(e.context.clone());
        for a in task.latent.facts(&z) {
            prog.add_fact(a);
        }
        prog.rules.extend(hypothesis.iter().cloned());
        let sets = answer_sets(&prog)?;
        if !sets.is_empty() && sets.iter().all(|s| s.contains(&e.label)) {
            hits += 1;
        }
    }
    Ok(Some(hits as f64 / task.test_examples.len() as f64))
}

pub fn evaluate(task: &NeuralTask, model: &ModelFile, hypothesis: &[Rule]) -> Result<Metrics> {
    let matches_target = if task.target.is_empty() {
        None
    } else {
        let canon = |rs: &[Rule]| {
            let mut v: Vec<String> = rs.iter().map(|r| task.bias.canonical_rule(r).to_string()).collect();
            v.sort();
            v
        };
        Some(canon(&task.target) == canon(hypothesis))
    };
    Ok(Metrics {
        train_latent_accuracy: latent_accuracy_on(task, model, &task.examples)?,
        test_latent_accuracy: latent_accuracy_on(task, model, &task.test_examples)?,
        test_accuracy: end_to_end_accuracy(task, model, hypothesis)?,
        test_examples: task.test_examples.len(),
        matches_target,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub task: String,
    pub config: RunConfig,
    pub stages: Vec<Stage>,
    pub possibilities: Option<PossibilityStats>,
    pub bottom_rules: Option<usize>,
    pub generalised: Option<usize>,
    pub space_size: Option<usize>,
    pub trajectory: Vec<EpochRecord>,
    pub hypothesis: Option<Vec<String>>,
    pub objective: Option<f64>,
    pub metrics: Option<Metrics>,
}

/// Paths of the artifacts in an output directory.
pub struct Artifacts {
    pub dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Artifacts { dir: dir.into() }
    }
    pub fn possibilities(&self) -> PathBuf {
        self.dir.join("possibilities.json")
    }
    pub fn space(&self) -> PathBuf {
        self.dir.join("space.json")
    }
    pub fn model(&self) -> PathBuf {
        self.dir.join("model.json")
    }
    pub fn solution(&self) -> PathBuf {
        self.dir.join("solution.json")
    }
    pub fn psolve(&self) -> PathBuf {
        self.dir.join("psolve.lp")
    }
    pub fn report(&self) -> PathBuf {
        self.dir.join("report.json")
    }
    pub fn timings(&self) -> PathBuf {
        self.dir.join("timings.json")
    }
}

/// Runs the stages up to `cfg.until`, writing every intermediate to `out`.
/// Wall-clock timings go to a separate file so that the report is a pure
/// function of the inputs.
pub fn run_pipeline(task: &NeuralTask, cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let art = Artifacts::new(out);
    let mut timings: BTreeMap<String, f64> = BTreeMap::new();
    let mut report = RunReport {
        schema_version: REPORT_SCHEMA,
        task: task.name.clone(),
        config: cfg.clone(),
        stages: Vec::new(),
        possibilities: None,
        bottom_rules: None,
        generalised: None,
        space_size: None,
        trajectory: Vec::new(),
        hypothesis: None,
        objective: None,
        metrics: None,
    };
    let reuse = |p: &Path| cfg.resume && p.exists();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
        timings.insert(name.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };

    let sym = task.symbolic()?;
    let abd = if reuse(&art.possibilities()) {
        load_possibilities(&art.possibilities(), &sym).map_err(Error::in_stage("abduce"))?
    } else {
        let a = abduce_with_limit(&sym, cfg.possibility_limit).map_err(Error::in_stage("abduce"))?;
        write_json(&art.possibilities(), &a.to_file(&example_ids(&sym)))?;
        a
    };
    lap("abduce", &mut timings);
    report.stages.push(Stage::Abduce);
    report.possibilities = Some(PossibilityStats::of(&abd));

    let finish = |report: &RunReport, timings: &BTreeMap<String, f64>| -> Result<()> {
        write_json(&art.report(), report)?;
        write_json(&art.timings(), timings)
    };
    if cfg.until == Stage::Abduce {
        finish(&report, &timings)?;
        return Ok(report);
    }

    let syn = Synthesis::new(&sym, &abd).map_err(Error::in_stage("space"))?;
    let space = if reuse(&art.space()) {
        load_space(&art.space(), &syn).map_err(Error::in_stage("space"))?
    } else {
        let s = syn.build_opt_space(&cfg.synthesis).map_err(Error::in_stage("space"))?;
        write_json(&art.space(), &s.to_file())?;
        s
    };
    lap("space", &mut timings);
    report.stages.push(Stage::Space);
    report.bottom_rules = Some(space.stats.bottom_rules);
    report.generalised = space.stats.generalised;
    report.space_size = Some(space.len());
    if cfg.until == Stage::Space {
        finish(&report, &timings)?;
        return Ok(report);
    }

    let model = if reuse(&art.model()) {
        load_model(&art.model()).map_err(Error::in_stage("train"))?
    } else {
        let tcfg = TrainConfig { seed: cfg.seed, ..cfg.train.clone() };
        let (trained, data) = train_stage(task, &syn, &space, &tcfg).map_err(Error::in_stage("train"))?;
        let m = ModelFile::new(&trained, &data, space.rules.iter().map(|r| r.text.clone()).collect(), tcfg);
        write_json(&art.model(), &m)?;
        m
    };
    lap("train", &mut timings);
    report.stages.push(Stage::Train);
    report.trajectory = model.trajectory.clone();
    if cfg.until == Stage::Train {
        finish(&report, &timings)?;
        return Ok(report);
    }

    let solution = if reuse(&art.solution()) {
        read_json::<SolutionFile>(&art.solution())?
    } else {
        let inst = solve_instance(task, &syn, &space, &model).map_err(Error::in_stage("solve"))?;
        if cfg.emit_psolve {
            fs::write(art.psolve(), emit_psolve(&inst)).map_err(|e| Error::io(art.psolve(), e))?;
        }
        let s = solve_native(&inst).map_err(Error::in_stage("solve"))?;
        let f = SolutionFile::new(&s, task, model.posterior.clone());
        write_json(&art.solution(), &f)?;
        f
    };
    lap("solve", &mut timings);
    report.stages.push(Stage::Solve);
    report.hypothesis = Some(solution.hypothesis.clone());
    report.objective = Some(solution.objective);
    if cfg.until == Stage::Solve {
        finish(&report, &timings)?;
        return Ok(report);
    }

    let metrics = evaluate(task, &model, &solution.rules()?).map_err(Error::in_stage("eval"))?;
    lap("eval", &mut timings);
    report.stages.push(Stage::Eval);
    report.metrics = Some(metrics);
    finish(&report, &timings)?;
    Ok(report)
}
