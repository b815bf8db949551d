//! The command-line verbs. Every output file is written atomically.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recourse_core::efare::{build_automaton, efare_generate, extract_traces, fidelity, transitions, TreeParams};
use recourse_core::elicit::{replay_session, SessionContext, Transcript};
use recourse_core::eval::{run_experiment, score, GeneratorKind};
use recourse_core::generator::{train_wfare, WfareGenerator};
use recourse_core::search::exhaustive_search;
use recourse_core::{Dataset, RecourseGenerator, ScmWeights, State};
use serde::{Deserialize, Serialize};

use crate::artifacts::{load_policy, write_atomic, write_csv_with, write_json, AUTOMATON_FILE, POLICY_FILE};
use crate::registry::{kind_name, parse_kind, DatasetEntry, ModelPaths};

/// Fraction of the unfavorable population used for training; the rest is held out.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Parser)]
#[command(name = "recourse", version, about = "User-aware algorithmic recourse")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the W-FARE policy by self-play.
    Train(TrainArgs),
    /// Distil a W-EFARE automaton from a trained policy.
    ExtractEfare(ExtractArgs),
    /// Run seeded simulated-user sessions and write their transcripts.
    Simulate(SimulateArgs),
    /// Regret, validity and error curves, or replay of saved transcripts.
    Evaluate(EvaluateArgs),
    /// Start the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Dataset document (TOML).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trained policy; defaults to `<out>/wfare.json`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Number of recourse traces to distil from.
    #[arg(long, default_value_t = 300)]
    pub traces: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// `wfare`, `wefare` or `exhaustive`; the dataset default when absent.
    #[arg(long)]
    pub generator: Option<String>,
    /// Directory holding `wfare.json` / `wefare.json`; defaults to `--out`.
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long)]
    pub users: Option<usize>,
    /// Question budget (largest q on the curves).
    #[arg(long)]
    pub q: Option<usize>,
    /// Choice-set sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub run: RunArgs,
    /// Replay the transcripts in this directory instead of running fresh sessions.
    #[arg(long)]
    pub transcripts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Dataset documents to serve (repeatable).
    #[arg(long, required = true)]
    pub config: Vec<PathBuf>,
    /// Seeds session ids and default session seeds; random when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Artifact directory: models under `<out>/<dataset>/`, sessions in `<out>/sessions.redb`.
    #[arg(long, env = "RECOURSE_ARTIFACTS", default_value = "artifacts")]
    pub out: PathBuf,
    #[arg(long, env = "RECOURSE_BIND", default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// Static assets served at `/` (the web client build).
    #[arg(long, env = "RECOURSE_STATIC_DIR")]
    pub static_dir: Option<PathBuf>,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(a) => train(&a),
        Command::ExtractEfare(a) => extract(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Serve(a) => serve(a),
    }
}

fn load_dataset(path: &Path) -> anyhow::Result<Dataset> {
    Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub dataset: String,
    pub seed: u64,
    pub train_states: usize,
    pub heldout_states: usize,
    pub heldout_validity: f64,
}

/// Fraction of held-out states (with prior-drawn weights) for which the
/// generator reaches recourse.
pub fn heldout_validity(
    generator: &dyn RecourseGenerator,
    dataset: &Dataset,
    held: &[State],
    seed: u64,
) -> anyhow::Result<f64> {
    if held.is_empty() {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0usize;
    for s in held {
        let (_, w) = dataset.prior.sample(&mut rng);
        let g = generator.generate(s, &w, None)?;
        if g.success && dataset.env.reaches_favorable(&g.intervention, s)? {
            ok += 1;
        }
    }
    Ok(ok as f64 / held.len() as f64)
}

fn train(a: &TrainArgs) -> anyhow::Result<()> {
    let c = &a.common;
    let dataset = load_dataset(&c.config)?;
    let (train_states, held) = dataset.split_unfavorable(TRAIN_FRACTION, c.seed);
    let env = Arc::new(dataset.env.clone());
    let (model, log) = train_wfare(&env, &train_states, &dataset.prior, &dataset.generator, c.seed)?;
    let generator = WfareGenerator {
        env,
        policy: Arc::new(model),
        config: dataset.generator.clone(),
    };
    let validity = heldout_validity(&generator, &dataset, &held, c.seed ^ 0x0EA1)?;
    write_json(&c.out.join(POLICY_FILE), generator.policy.as_ref())?;
    write_csv_with(&c.out.join("training.csv"), |buf| log.write_csv(buf))?;
    let report = TrainReport {
        dataset: dataset.name.clone(),
        seed: c.seed,
        train_states: train_states.len(),
        heldout_states: held.len(),
        heldout_validity: validity,
    };
    write_json(&c.out.join("train_report.json"), &report)?;
    println!(
        "trained W-FARE on {} states; held-out validity {:.3} over {} states",
        report.train_states, validity, report.heldout_states
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExtractReport {
    pub dataset: String,
    pub seed: u64,
    pub traces: usize,
    pub attempts: usize,
    pub failures: usize,
    pub transition_fidelity: f64,
    pub argument_fidelity: f64,
    pub heldout_validity: f64,
}

fn extract(a: &ExtractArgs) -> anyhow::Result<()> {
    let c = &a.common;
    let dataset = load_dataset(&c.config)?;
    let model_path = a.model.clone().unwrap_or_else(|| c.out.join(POLICY_FILE));
    let model = load_policy(&model_path, &dataset.env.problem)?;
    let (train_states, held) = dataset.split_unfavorable(TRAIN_FRACTION, c.seed);
    let env = Arc::new(dataset.env.clone());
    let teacher = WfareGenerator {
        env: env.clone(),
        policy: Arc::new(model),
        config: dataset.generator.clone(),
    };
    let pool = extract_traces(&teacher, &env, &train_states, &dataset.prior, a.traces, c.seed)?;
    let automaton = build_automaton(&env.problem, &pool, TreeParams::default())?;
    let fid = fidelity(&automaton, &transitions(&env.problem, &pool, automaton.sentinel));
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ 0x0EA1);
    let mut ok = 0usize;
    for s in &held {
        let (_, w) = dataset.prior.sample(&mut rng);
        if efare_generate(&env, &automaton, s, &w, dataset.generator.max_horizon, None)?.success {
            ok += 1;
        }
    }
    let report = ExtractReport {
        dataset: dataset.name.clone(),
        seed: c.seed,
        traces: pool.traces.len(),
        attempts: pool.attempts,
        failures: pool.failures,
        transition_fidelity: fid.transition,
        argument_fidelity: fid.argument,
        heldout_validity: if held.is_empty() { 0.0 } else { ok as f64 / held.len() as f64 },
    };
    write_json(&c.out.join(AUTOMATON_FILE), &automaton)?;
    write_json(&c.out.join("extract_report.json"), &report)?;
    println!(
        "extracted W-EFARE from {} traces; fidelity {:.3} (arguments {:.3}); held-out validity {:.3}",
        report.traces, report.transition_fidelity, report.argument_fidelity, report.heldout_validity
    );
    Ok(())
}

/// Dataset, experiment settings and the generator entry for simulate/evaluate.
fn prepare(c: &Common, r: &RunArgs) -> anyhow::Result<(DatasetEntry, GeneratorKind, recourse_core::ExperimentConfig)> {
    let dataset = load_dataset(&c.config)?;
    let kind = match &r.generator {
        Some(name) => parse_kind(name).with_context(|| format!("unknown generator `{name}`"))?,
        None => dataset.experiment.generator,
    };
    let mut cfg = dataset.experiment.clone();
    cfg.generator = kind;
    cfg.seed = c.seed;
    if let Some(u) = r.users {
        cfg.users = u;
    }
    if let Some(q) = r.q {
        cfg.q_max = q;
    }
    if let Some(k) = &r.k {
        cfg.set_sizes = k.clone();
    }
    let models = r.models.clone().unwrap_or_else(|| c.out.clone());
    let entry = DatasetEntry::load_strict(dataset, kind, &ModelPaths::in_dir(&models))?;
    Ok((entry, kind, cfg))
}

/// One simulated user's session as written by `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationFile {
    pub dataset: String,
    pub generator: GeneratorKind,
    pub user: usize,
    pub k: usize,
    pub true_weights: Vec<f64>,
    pub best_cost: f64,
    pub worst_cost: f64,
    pub transcript: Transcript,
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let (entry, kind, cfg) = prepare(&a.common, &a.run)?;
    let generator = entry.generator(kind).context("generator not available")?;
    let report = run_experiment(&entry.dataset, generator, &cfg, &entry.dataset.session)?;
    let dir = a.common.out.join("transcripts");
    for run in &report.runs {
        let file = SimulationFile {
            dataset: entry.dataset.name.clone(),
            generator: kind,
            user: run.user,
            k: run.k,
            true_weights: run.true_weights.clone(),
            best_cost: run.best_cost,
            worst_cost: run.worst_cost,
            transcript: run.transcript.clone(),
        };
        write_json(&dir.join(format!("user{:04}_k{}.json", run.user, run.k)), &file)?;
    }
    println!(
        "wrote {} transcripts to {} ({} users excluded: no successful oracle intervention)",
        report.runs.len(),
        dir.display(),
        report.excluded_users
    );
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> anyhow::Result<()> {
    let (entry, kind, cfg) = prepare(&a.common, &a.run)?;
    if let Some(dir) = &a.transcripts {
        return replay(&entry, kind, &cfg, dir, &a.common.out);
    }
    let generator = entry.generator(kind).context("generator not available")?;
    let report = run_experiment(&entry.dataset, generator, &cfg, &entry.dataset.session)?;
    let out = &a.common.out;
    write_csv_with(&out.join("curves.csv"), |b| report.write_curves(b))?;
    write_csv_with(&out.join("summary.csv"), |b| report.write_summary(b))?;
    write_csv_with(&out.join("errors.csv"), |b| report.write_errors(b))?;
    for s in &report.summary {
        println!(
            "{} {} {} k={}: users {}, improvement q=1 {:.3}, q={} {:.3}, validity {:.3}",
            s.dataset, s.model, s.noise, s.k, s.users, s.improvement_q1, cfg.q_max, s.improvement_qmax, s.validity_qmax
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReplayRow {
    file: String,
    user: usize,
    k: usize,
    reproduced: bool,
    success: bool,
    normalized_regret: f64,
    similarity: f64,
}

/// Re-runs every transcript from its recorded choices and checks that the
/// final recommendation is reproduced exactly.
fn replay(
    entry: &DatasetEntry,
    kind: GeneratorKind,
    cfg: &recourse_core::ExperimentConfig,
    dir: &Path,
    out: &Path,
) -> anyhow::Result<()> {
    let generator = entry.generator(kind).context("generator not available")?;
    let ctx = SessionContext {
        env: &entry.env,
        prior: &entry.dataset.prior,
        generator,
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading transcripts from {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no transcripts found in {}", dir.display());
    }
    let mut rows = Vec::with_capacity(files.len());
    let mut mismatches = 0usize;
    for path in &files {
        let file: SimulationFile = serde_json::from_str(&std::fs::read_to_string(path)?)
            .with_context(|| format!("parsing {}", path.display()))?;
        if file.dataset != entry.dataset.name || file.generator != kind {
            bail!(
                "{} was produced by {}/{}, not {}/{}",
                path.display(),
                file.dataset,
                kind_name(file.generator),
                entry.dataset.name,
                kind_name(kind)
            );
        }
        let session = replay_session(ctx, &file.transcript)?;
        let w = ScmWeights::new(file.true_weights.clone());
        let s0 = &file.transcript.s0;
        // compare the persisted form; per-particle cost caches are not serialized
        let reproduced = serde_json::to_value(session.transcript())? == serde_json::to_value(&file.transcript)?;
        let result = session
            .result()
            .cloned()
            .map(Ok)
            .unwrap_or_else(|| session.recommend(ctx))?;
        let oracle = exhaustive_search(&entry.env, s0, &w, cfg.oracle_max_len, None)?;
        let best = oracle.best.context("transcript user has no successful oracle intervention")?;
        let checkpoint = score(
            &entry.env,
            s0,
            &w,
            &result,
            session.round,
            &best.intervention,
            file.best_cost,
            file.worst_cost,
        )?;
        if !reproduced {
            mismatches += 1;
            tracing::error!(file = %path.display(), "replay diverged from the transcript");
        }
        rows.push(ReplayRow {
            file: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            user: file.user,
            k: file.k,
            reproduced,
            success: checkpoint.success,
            normalized_regret: checkpoint.normalized_regret,
            similarity: checkpoint.similarity,
        });
    }
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    write_atomic(&out.join("replay.csv"), &buf)?;
    println!("replayed {} transcripts, {} diverged", rows.len(), mismatches);
    if mismatches > 0 {
        bail!("{mismatches} transcripts did not replay to the recorded result");
    }
    Ok(())
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let registry = crate::registry::Registry::load(&a.config, &a.out)?;
    let store = crate::store::SessionStore::open(&a.out.join("sessions.redb"))?;
    let state = Arc::new(crate::service::AppState::new(registry, store, a.seed));
    let app = crate::service::router(state, a.static_dir.clone());
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.bind)
            .await
            .with_context(|| format!("binding {}", a.bind))?;
        println!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
