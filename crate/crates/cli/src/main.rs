use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;

use nfl_core::abduction::{abduce_with_limit, Abduction};
use nfl_core::gen::{generate, FeatureKind, GenConfig, TaskKind};
use nfl_core::neural::{ModelFile, TrainConfig};
use nfl_core::pipeline::{
    evaluate, example_ids, load_model, load_possibilities, load_space, read_json, run_pipeline, solve_instance,
    train_stage, write_json, PossibilityStats, RunConfig, SolutionFile, Stage, DEFAULT_POSSIBILITY_LIMIT,
};
use nfl_core::solver::{emit_psolve, run_clingo, solve_native, ExternalResult};
use nfl_core::synthesis::{OptSufficientSpace, Synthesis, SynthesisConfig};
use nfl_core::task::manifest::load_task;
use nfl_core::task::{NeuralTask, SymbolicTask};
use nfl_core::Error;

#[derive(Parser)]
#[command(name = "nfl", version, about = "Neuro-symbolic rule learning from raw inputs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic task (manifest.json + data.csv).
    GenTask(GenArgs),
    /// Dump the abduced possibilities of every example.
    Abduce(AbduceArgs),
    /// Build the opt-sufficient rule space.
    Space(SpaceArgs),
    /// Train the network and rule weights.
    Train(TrainArgs),
    /// Solve for the optimal hypothesis.
    Solve(SolveArgs),
    /// Run the whole pipeline into an output directory.
    Run(RunArgs),
    /// Evaluate a model and solution on the test examples.
    Eval(EvalArgs),
    /// Write the weak-constraint encoding of the final optimisation.
    EmitPsolve(EmitArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "add")]
    kind: TaskKind,
    #[arg(long, default_value_t = 500)]
    train: usize,
    #[arg(long, default_value_t = 200)]
    test: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value = "prototype")]
    features: FeatureKind,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TaskArg {
    /// Task manifest.
    #[arg(long)]
    task: PathBuf,
    #[arg(long, default_value_t = DEFAULT_POSSIBILITY_LIMIT)]
    possibility_limit: usize,
    /// Reuse a possibilities dump instead of re-abducing.
    #[arg(long)]
    possibilities: Option<PathBuf>,
}

#[derive(Args)]
struct SpaceArg {
    /// Reuse a space dump instead of rebuilding it.
    #[arg(long)]
    space: Option<PathBuf>,
    /// List G(T) only when there are at most this many bottom rules.
    #[arg(long, default_value_t = SynthesisConfig::default().generalisation_limit)]
    generalisation_limit: usize,
    /// Also lift repeated constants to distinct variables.
    #[arg(long)]
    split_repeated: bool,
}

#[derive(Args)]
struct AbduceArgs {
    #[command(flatten)]
    task: TaskArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpaceArgs {
    #[command(flatten)]
    task: TaskArg,
    #[arg(long, default_value_t = SynthesisConfig::default().generalisation_limit)]
    generalisation_limit: usize,
    /// Also lift repeated constants to distinct variables.
    #[arg(long)]
    split_repeated: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct TrainOpts {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainOpts {
    fn config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            lr: self.lr.unwrap_or(d.lr),
            batch: self.batch.unwrap_or(d.batch),
            hidden: self.hidden.clone().unwrap_or(d.hidden.clone()),
            seed: self.seed,
            ..d
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    task: TaskArg,
    #[command(flatten)]
    space: SpaceArg,
    #[command(flatten)]
    opts: TrainOpts,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    task: TaskArg,
    #[command(flatten)]
    space: SpaceArg,
    #[arg(long)]
    model: PathBuf,
    /// Also write the weak-constraint encoding here.
    #[arg(long)]
    emit_psolve: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    task: PathBuf,
    #[command(flatten)]
    opts: TrainOpts,
    #[arg(long, default_value_t = DEFAULT_POSSIBILITY_LIMIT)]
    possibility_limit: usize,
    #[arg(long, default_value_t = SynthesisConfig::default().generalisation_limit)]
    generalisation_limit: usize,
    /// Also lift repeated constants to distinct variables.
    #[arg(long)]
    split_repeated: bool,
    /// Last stage to run: abduce, space, train, solve or eval.
    #[arg(long, default_value = "eval")]
    stages: Stage,
    /// Reuse artifacts already in the output directory.
    #[arg(long)]
    resume: bool,
    /// Also write psolve.lp.
    #[arg(long)]
    emit_psolve: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    task: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    /// Write metrics here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmitArgs {
    #[command(flatten)]
    task: TaskArg,
    #[command(flatten)]
    space: SpaceArg,
    #[arg(long)]
    model: PathBuf,
    /// Solve the encoding with clingo (via `python3 -m clingo`) and print
    /// the optimum.
    #[arg(long)]
    check: bool,
    #[arg(long)]
    out: PathBuf,
}

fn load(task: &TaskArg) -> anyhow::Result<(NeuralTask, SymbolicTask, Abduction)> {
    let nt = load_task(&task.task)?;
    let sym = nt.symbolic()?;
    let abd = match &task.possibilities {
        Some(p) => load_possibilities(p, &sym)?,
        None => abduce_with_limit(&sym, task.possibility_limit).map_err(Error::in_stage("abduce"))?,
    };
    Ok((nt, sym, abd))
}

fn space_of(syn: &Synthesis, arg: &SpaceArg) -> anyhow::Result<OptSufficientSpace> {
    Ok(match &arg.space {
        Some(p) => load_space(p, syn)?,
        None => syn
            .build_opt_space(&SynthesisConfig { generalisation_limit: arg.generalisation_limit, split_repeated: arg.split_repeated })
            .map_err(Error::in_stage("space"))?,
    })
}

fn parent_dir(p: &Path) -> anyhow::Result<()> {
    if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    Ok(())
}

fn save<T: serde::Serialize>(path: &Path, v: &T) -> anyhow::Result<()> {
    parent_dir(path)?;
    write_json(path, v)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::GenTask(a) => {
            let cfg = GenConfig {
                kind: a.kind,
                train: a.train,
                test: a.test,
                noise: a.noise,
                features: a.features,
                dim: a.dim,
                seed: a.seed,
            };
            let g = generate(&cfg, "data.csv")?;
            fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
            g.data.save_csv_table(&a.out.join("data.csv"))?;
            g.manifest.save(&a.out.join("manifest.json"))?;
            println!("{}", a.out.join("manifest.json").display());
        }
        Cmd::Abduce(a) => {
            let (_, sym, abd) = load(&a.task)?;
            save(&a.out, &abd.to_file(&example_ids(&sym)))?;
            println!("{}", serde_json::to_string(&PossibilityStats::of(&abd))?);
        }
        Cmd::Space(a) => {
            let (_, sym, abd) = load(&a.task)?;
            let syn = Synthesis::new(&sym, &abd)?;
            let space = syn
                .build_opt_space(&SynthesisConfig { generalisation_limit: a.generalisation_limit, split_repeated: a.split_repeated })
                .map_err(Error::in_stage("space"))?;
            save(&a.out, &space.to_file())?;
            println!("{}", serde_json::to_string(&space.stats)?);
        }
        Cmd::Train(a) => {
            let (nt, sym, abd) = load(&a.task)?;
            let syn = Synthesis::new(&sym, &abd)?;
            let space = space_of(&syn, &a.space)?;
            let cfg = a.opts.config();
            let (trained, data) = train_stage(&nt, &syn, &space, &cfg).map_err(Error::in_stage("train"))?;
            let m = ModelFile::new(&trained, &data, space.rules.iter().map(|r| r.text.clone()).collect(), cfg);
            save(&a.out, &m)?;
            if let Some(last) = m.trajectory.last() {
                println!("{}", serde_json::to_string(last)?);
            }
        }
        Cmd::Solve(a) => {
            let (nt, sym, abd) = load(&a.task)?;
            let syn = Synthesis::new(&sym, &abd)?;
            let space = space_of(&syn, &a.space)?;
            let model = load_model(&a.model)?;
            let inst = solve_instance(&nt, &syn, &space, &model).map_err(Error::in_stage("solve"))?;
            if let Some(p) = &a.emit_psolve {
                parent_dir(p)?;
                fs::write(p, emit_psolve(&inst)).with_context(|| format!("writing {}", p.display()))?;
            }
            let s = solve_native(&inst).map_err(Error::in_stage("solve"))?;
            let f = SolutionFile::new(&s, &nt, model.posterior.clone());
            save(&a.out, &f)?;
            for r in &f.hypothesis {
                println!("{r}");
            }
        }
        Cmd::Run(a) => {
            let nt = load_task(&a.task)?;
            let cfg = RunConfig {
                seed: a.opts.seed,
                train: a.opts.config(),
                synthesis: SynthesisConfig { generalisation_limit: a.generalisation_limit, split_repeated: a.split_repeated },
                possibility_limit: a.possibility_limit,
                until: a.stages,
                resume: a.resume,
                emit_psolve: a.emit_psolve,
            };
            let report = run_pipeline(&nt, &cfg, &a.out)?;
            if let Some(h) = &report.hypothesis {
                for r in h {
                    println!("{r}");
                }
            }
            if let Some(m) = &report.metrics {
                println!("{}", serde_json::to_string(m)?);
            }
        }
        Cmd::Eval(a) => {
            let nt = load_task(&a.task)?;
            let model = load_model(&a.model)?;
            let sol: SolutionFile = read_json(&a.solution)?;
            let metrics = evaluate(&nt, &model, &sol.rules()?).map_err(Error::in_stage("eval"))?;
            match &a.out {
                Some(p) => save(p, &metrics)?,
                None => println!("{}", serde_json::to_string_pretty(&metrics)?),
            }
        }
        Cmd::EmitPsolve(a) => {
            let (nt, sym, abd) = load(&a.task)?;
            let syn = Synthesis::new(&sym, &abd)?;
            let space = space_of(&syn, &a.space)?;
            let model = load_model(&a.model)?;
            let inst = solve_instance(&nt, &syn, &space, &model)?;
            let text = emit_psolve(&inst);
            parent_dir(&a.out)?;
            fs::write(&a.out, &text).with_context(|| format!("writing {}", a.out.display()))?;
            if a.check {
                match run_clingo(&text)? {
                    ExternalResult::Unavailable(why) => eprintln!("clingo unavailable: {}", why.trim()),
                    ExternalResult::Solved(r) => println!(
                        "{}",
                        serde_json::json!({ "cost": r.cost, "optimal": r.optimal })
                    ),
                }
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let Some(e) = err.downcast_ref::<Error>() else { return 1 };
    match e.root() {
        Error::Unsatisfiable { .. } | Error::NoPossibilities { .. } | Error::LabelUnprovable { .. } => 2,
        Error::Config(_)
        | Error::Schema { .. }
        | Error::Io { .. }
        | Error::Json(_)
        | Error::Csv(_)
        | Error::Syntax { .. }
        | Error::Recursion { .. }
        | Error::ReservedArity { .. }
        | Error::UnsafeVariable { .. }
        | Error::Mode { .. }
        | Error::Task(_)
        | Error::Data(_)
        | Error::DanglingRawRef { .. }
        | Error::LabelNotInSpace { .. }
        | Error::NotOpl(_)
        | Error::UnlearnableAtom { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    if let Ok(n) = std::env::var("NFL_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: NFL_THREADS: {e}");
                    return ExitCode::from(3);
                }
            }
            _ => {
                eprintln!("error: NFL_THREADS must be a positive integer, got {n:?}");
                return ExitCode::from(3);
            }
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
