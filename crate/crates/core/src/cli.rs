//! Command-line front end.
//!
//! Every command except `synth` writes a `manifest.json` run record next to
//! its outputs. `replay` re-executes a recorded run into a new directory and
//! checks that every recorded output is byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::ae::TrainConfig;
use crate::checkpoint::Checkpoint;
use crate::data::{generate_synthetic, load_bundle, save_bundle, DatasetBundle, SynthSpec};
use crate::error::{Error, Result};
use crate::experts::SeenClfConfig;
use crate::metrics::{score_decomposition, EvalReport};
use crate::pipeline::{
    evaluate_gzsl, evaluate_no_gating, retrain_final, scores_tsv, train_final, tune, GatedPredictor,
    PipelineConfig, SeenExpertKind, TuneGrids,
};
use crate::scores::{GateConfig, ScoreKind};

pub const MODEL_FILE: &str = "model.gae";
pub const TUNE_FILE: &str = "tune.tsv";
pub const REPORT_FILE: &str = "report.json";
pub const SCORES_FILE: &str = "scores.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOSS_FILE: &str = "loss.tsv";

#[derive(Debug, Parser)]
#[command(name = "gatingae", version, about = "Gated generalized zero-shot classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset bundle.
    Synth(SynthArgs),
    /// Train the autoencoder and seen expert with fixed hyperparameters.
    Train(RunArgs),
    /// Grid-search α, β, τ on the validation protocol, then retrain.
    Tune(RunArgs),
    /// Evaluate a trained model on the test rows.
    Eval(RunArgs),
    /// Dump per-query gate scores and their separate AUCs.
    GateStats(RunArgs),
    /// Re-run a recorded command and compare its outputs byte for byte.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub classes_seen: usize,
    #[arg(long, default_value_t = 5)]
    pub classes_unseen: usize,
    #[arg(long, default_value_t = 32)]
    pub dim_v: usize,
    #[arg(long, default_value_t = 16)]
    pub dim_a: usize,
    #[arg(long, default_value_t = SynthSpec::default().semantic_dim)]
    pub semantic_dim: usize,
    #[arg(long, default_value_t = 100)]
    pub samples_per_class: usize,
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    #[arg(long, default_value_t = SynthSpec::default().attr_noise)]
    pub attr_noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Small networks and a larger step size for synthetic bundles.
    #[default]
    Desk,
    /// The published training settings.
    Published,
}

impl Preset {
    pub fn train_config(self) -> TrainConfig {
        match self {
            Preset::Published => TrainConfig::default(),
            Preset::Desk => TrainConfig {
                lr: 1e-3,
                epochs: 100,
                batch_size: 64,
                hidden_v: 64,
                hidden_a: 64,
                latent_dim: 16,
                ..TrainConfig::default()
            },
        }
    }

    /// Small synthetic problems give the classifier few optimizer steps
    /// per epoch, so the desk preset trains it for longer.
    pub fn seen_clf_config(self) -> SeenClfConfig {
        match self {
            Preset::Published => SeenClfConfig::default(),
            Preset::Desk => SeenClfConfig {
                epochs: 200,
                ..SeenClfConfig::default()
            },
        }
    }
}

/// A hyperparameter value as written on the command line or in a config
/// file: a number, a list, or a string `"a:b:step"` / `"x,y,z"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridArg {
    Scalar(f64),
    List(Vec<f64>),
    Text(String),
}

impl GridArg {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            GridArg::Scalar(v) => Ok(vec![*v]),
            GridArg::List(v) => Ok(v.clone()),
            GridArg::Text(s) => parse_grid(s),
        }
    }
}

fn parse_num(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("not a number: {s:?}")))?;
    if v.is_nan() {
        return Err(Error::Config("NaN is not a valid hyperparameter".into()));
    }
    Ok(v)
}

/// Parses `"0.05"`, `"0,0.1,1"` or the inclusive range `"0.01:0.1:0.01"`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [one] => one.split(',').map(parse_num).collect(),
        [a, b, step] => {
            let (a, b, step) = (parse_num(a)?, parse_num(b)?, parse_num(step)?);
            if !(step > 0.0) || b < a || !a.is_finite() || !b.is_finite() {
                return Err(Error::Config(format!("bad range {s:?}")));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize + 1;
            if n > 100_000 {
                return Err(Error::Config(format!("range {s:?} has too many points")));
            }
            // round away the accumulated binary error so 0.01:0.1:0.01 gives 0.06, not 0.060000000000000005
            Ok((0..n).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12).collect())
        }
        _ => Err(Error::Config(format!("cannot parse grid {s:?}"))),
    }
}

impl std::str::FromStr for GridArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_grid(s)?;
        Ok(GridArg::Text(s.to_string()))
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Dataset bundle directory.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Checkpoint to evaluate (defaults to `<out>/model.gae`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// JSON file with any of these options; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub alpha: Option<GridArg>,
    #[arg(long)]
    pub beta: Option<GridArg>,
    #[arg(long)]
    pub tau: Option<GridArg>,
    #[arg(long)]
    pub score: Option<ScoreKind>,
    #[arg(long)]
    pub expert_seen: Option<SeenExpertKind>,
    /// Evaluate the 1-NN baseline over all classes instead of the gate.
    #[arg(long)]
    pub no_gating: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub clf_epochs: Option<usize>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub bundle: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub seed: Option<u64>,
    pub preset: Option<Preset>,
    pub alpha: Option<GridArg>,
    pub beta: Option<GridArg>,
    pub tau: Option<GridArg>,
    pub score: Option<ScoreKind>,
    pub expert_seen: Option<SeenExpertKind>,
    pub no_gating: Option<bool>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub hidden: Option<usize>,
    pub latent_dim: Option<usize>,
    pub clf_epochs: Option<usize>,
}

/// Fully resolved options of a run; enough to repeat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub bundle: PathBuf,
    pub out: PathBuf,
    pub model: Option<PathBuf>,
    pub seed: u64,
    pub preset: Preset,
    pub pipeline: PipelineConfig,
    pub alphas: Option<Vec<f64>>,
    pub betas: Option<Vec<f64>>,
    pub taus: Option<Vec<f64>>,
    pub score_override: Option<ScoreKind>,
    pub no_gating: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChosenHyperparameters {
    /// Unknown when evaluating an existing checkpoint.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub tau: f64,
    pub score: ScoreKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub config: RunConfig,
    pub seed: u64,
    pub bundle_checksums: BTreeMap<String, String>,
    pub chosen: Option<ChosenHyperparameters>,
    pub report: Option<EvalReport>,
    /// Files written by the run, relative to the output directory.
    pub outputs: Vec<String>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A `manifest.json` written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the repeated run.
    #[arg(long)]
    pub out: PathBuf,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

fn scalar(name: &str, values: &Option<Vec<f64>>) -> Result<Option<f64>> {
    match values.as_deref() {
        None => Ok(None),
        Some([v]) => Ok(Some(*v)),
        Some(_) => Err(Error::Config(format!("--{name} takes a single value for this command"))),
    }
}

impl RunArgs {
    /// Merges flags over the config file over the preset.
    pub fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => read_json::<ConfigFile>(p).map_err(|e| match e {
                Error::Json { path, source } => Error::Config(format!("{}: {source}", path.display())),
                other => other,
            })?,
            None => ConfigFile::default(),
        };
        let preset = self.preset.or(file.preset).unwrap_or_default();
        let seed = self.seed.or(file.seed).unwrap_or(0);
        let bundle = self
            .bundle
            .clone()
            .or(file.bundle)
            .ok_or_else(|| Error::Config("--bundle is required".into()))?;
        let out = self
            .out
            .clone()
            .or(file.out)
            .ok_or_else(|| Error::Config("--out is required".into()))?;
        let grid = |flag: &Option<GridArg>, cfg: Option<GridArg>| -> Result<Option<Vec<f64>>> {
            flag.clone().or(cfg).map(|g| g.values()).transpose()
        };

        let mut train = preset.train_config();
        train.seed = seed;
        if let Some(v) = self.epochs.or(file.epochs) {
            train.epochs = v;
        }
        if let Some(v) = self.lr.or(file.lr) {
            train.lr = v;
        }
        if let Some(v) = self.batch_size.or(file.batch_size) {
            train.batch_size = v;
        }
        if let Some(v) = self.hidden.or(file.hidden) {
            train.hidden_v = v;
            train.hidden_a = v;
        }
        if let Some(v) = self.latent_dim.or(file.latent_dim) {
            train.latent_dim = v;
        }
        let mut seen_clf = preset.seen_clf_config();
        seen_clf.seed = seed;
        if let Some(v) = self.clf_epochs.or(file.clf_epochs) {
            seen_clf.epochs = v;
        }
        let score_override = self.score.or(file.score);
        Ok(RunConfig {
            bundle: absolute(&bundle),
            out,
            model: self.model.clone().or(file.model).map(|p| absolute(&p)),
            seed,
            preset,
            pipeline: PipelineConfig {
                train,
                seen_clf,
                score: score_override.unwrap_or_default(),
                seen_expert: self.expert_seen.or(file.expert_seen).unwrap_or_default(),
            },
            alphas: grid(&self.alpha, file.alpha)?,
            betas: grid(&self.beta, file.beta)?,
            taus: grid(&self.tau, file.tau)?,
            score_override,
            no_gating: self.no_gating || file.no_gating.unwrap_or(false),
        })
    }
}

fn load_bundle_checked(cfg: &RunConfig) -> Result<DatasetBundle> {
    let bundle = load_bundle(&cfg.bundle)?;
    if bundle.splits.train_idx.is_empty() && bundle.splits.val_idx.is_empty() {
        return Err(Error::Data("bundle has no training rows".into()));
    }
    Ok(bundle)
}

fn loss_tsv(trace: &[f64]) -> String {
    let mut out = String::from("epoch\tloss\n");
    for (i, l) in trace.iter().enumerate() {
        out.push_str(&format!("{}\t{}\n", i + 1, l));
    }
    out
}

fn checkpoint_of(pred: &GatedPredictor) -> Checkpoint {
    Checkpoint {
        ae: pred.ae.clone(),
        seen_clf: Some(pred.seen_clf.clone()),
        gate: Some((pred.score, pred.gate_cfg)),
    }
}

/// Outcome of one pipeline command, before the manifest is written.
struct RunOutcome {
    chosen: Option<ChosenHyperparameters>,
    report: Option<EvalReport>,
    outputs: Vec<String>,
}

fn cmd_train(cfg: &RunConfig, bundle: &DatasetBundle) -> Result<RunOutcome> {
    let mut pcfg = cfg.pipeline.clone();
    if let Some(a) = scalar("alpha", &cfg.alphas)? {
        pcfg.train.alpha = a;
    }
    let gate_cfg = GateConfig {
        beta: scalar("beta", &cfg.betas)?.unwrap_or(0.0),
        tau: scalar("tau", &cfg.taus)?.unwrap_or(1.0),
    };
    let (pred, trace) = train_final(bundle, gate_cfg, &pcfg)?;
    checkpoint_of(&pred).save(&cfg.out.join(MODEL_FILE))?;
    write_file(&cfg.out, LOSS_FILE, loss_tsv(&trace))?;
    log::info!("final training loss {:.6}", trace.last().copied().unwrap_or(f64::NAN));
    Ok(RunOutcome {
        chosen: Some(ChosenHyperparameters {
            alpha: Some(pcfg.train.alpha),
            beta: gate_cfg.beta,
            tau: gate_cfg.tau,
            score: pcfg.score,
        }),
        report: None,
        outputs: vec![MODEL_FILE.into(), LOSS_FILE.into()],
    })
}

fn cmd_tune(cfg: &RunConfig, bundle: &DatasetBundle) -> Result<RunOutcome> {
    let defaults = TuneGrids::default();
    let grids = TuneGrids {
        alphas: cfg.alphas.clone().unwrap_or(defaults.alphas),
        betas: cfg.betas.clone().unwrap_or(defaults.betas),
        taus: cfg.taus.clone(),
    };
    let tuned = tune(bundle, &grids, &cfg.pipeline)?;
    write_file(&cfg.out, TUNE_FILE, tuned.trace_tsv())?;
    log::info!(
        "chose alpha={} beta={} tau={} (validation H {:.4})",
        tuned.best_alpha,
        tuned.best_beta,
        tuned.best_tau,
        tuned.val_harmonic
    );
    let (pred, trace) = retrain_final(bundle, &tuned, &cfg.pipeline)?;
    checkpoint_of(&pred).save(&cfg.out.join(MODEL_FILE))?;
    write_file(&cfg.out, LOSS_FILE, loss_tsv(&trace))?;
    Ok(RunOutcome {
        chosen: Some(ChosenHyperparameters {
            alpha: Some(tuned.best_alpha),
            beta: tuned.best_beta,
            tau: tuned.best_tau,
            score: cfg.pipeline.score,
        }),
        report: None,
        outputs: vec![TUNE_FILE.into(), MODEL_FILE.into(), LOSS_FILE.into()],
    })
}

/// Rebuilds the predictor from a checkpoint, applying gate overrides.
fn load_predictor(cfg: &RunConfig, bundle: &DatasetBundle) -> Result<GatedPredictor> {
    let path = cfg.model.clone().unwrap_or_else(|| cfg.out.join(MODEL_FILE));
    let ck = Checkpoint::load(&path)?;
    let seen_clf = ck
        .seen_clf
        .ok_or_else(|| Error::State(format!("{} has no seen classifier section", path.display())))?;
    let (saved_kind, saved_gate) = ck.gate.unzip();
    let score = cfg.score_override.or(saved_kind).unwrap_or_default();
    let gate_cfg = GateConfig {
        beta: scalar("beta", &cfg.betas)?
            .or(saved_gate.map(|g| g.beta))
            .unwrap_or(0.0),
        tau: scalar("tau", &cfg.taus)?
            .or(saved_gate.map(|g| g.tau))
            .ok_or_else(|| Error::Config("checkpoint has no gate; pass --tau".into()))?,
    };
    gate_cfg.validate()?;
    let banks = crate::scores::build_banks_for(
        &ck.ae,
        &bundle.attributes,
        &bundle.splits.seen_classes,
        &bundle.splits.unseen_classes,
    )?;
    if seen_clf.classes() != bundle.splits.seen_classes.as_slice() {
        return Err(Error::Data("checkpoint seen classes differ from the bundle's".into()));
    }
    Ok(GatedPredictor {
        ae: ck.ae,
        banks,
        seen_clf,
        gate_cfg,
        score,
        seen_expert: cfg.pipeline.seen_expert,
    })
}

fn cmd_eval(cfg: &RunConfig, bundle: &DatasetBundle) -> Result<RunOutcome> {
    let pred = load_predictor(cfg, bundle)?;
    let (report, records) = if cfg.no_gating {
        evaluate_no_gating(&pred, bundle)?
    } else {
        evaluate_gzsl(&pred, bundle)?
    };
    write_file(&cfg.out, REPORT_FILE, report.to_json())?;
    write_file(&cfg.out, SCORES_FILE, scores_tsv(&records))?;
    let label = if cfg.no_gating {
        "no gating (1-NN)".to_string()
    } else {
        format!("gated r_{}", pred.score.name())
    };
    print!("{}", report.render_table(&label));
    Ok(RunOutcome {
        chosen: Some(ChosenHyperparameters {
            alpha: None,
            beta: pred.gate_cfg.beta,
            tau: pred.gate_cfg.tau,
            score: pred.score,
        }),
        report: Some(report),
        outputs: vec![REPORT_FILE.into(), SCORES_FILE.into()],
    })
}

fn cmd_gate_stats(cfg: &RunConfig, bundle: &DatasetBundle) -> Result<RunOutcome> {
    let pred = load_predictor(cfg, bundle)?;
    let (_, records) = evaluate_gzsl(&pred, bundle)?;
    write_file(&cfg.out, SCORES_FILE, scores_tsv(&records))?;
    let scores: Vec<_> = records.iter().map(|r| r.scores).collect();
    let unseen: Vec<bool> = records.iter().map(|r| r.is_unseen).collect();
    println!("{:<16} {:>8}", "score", "AUC");
    for (name, auc) in score_decomposition(&scores, &unseen)? {
        println!("{name:<16} {auc:>8.4}");
    }
    Ok(RunOutcome {
        chosen: None,
        report: None,
        outputs: vec![SCORES_FILE.into()],
    })
}

fn execute(command: &str, cfg: &RunConfig, argv: Vec<String>) -> Result<RunManifest> {
    let started = Instant::now();
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let bundle = load_bundle_checked(cfg)?;
    let outcome = match command {
        "train" => cmd_train(cfg, &bundle)?,
        "tune" => cmd_tune(cfg, &bundle)?,
        "eval" => cmd_eval(cfg, &bundle)?,
        "gate-stats" => cmd_gate_stats(cfg, &bundle)?,
        other => return Err(Error::Config(format!("unknown command {other:?}"))),
    };
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        argv,
        config: cfg.clone(),
        seed: cfg.seed,
        bundle_checksums: bundle.file_checksums(),
        chosen: outcome.chosen,
        report: outcome.report,
        outputs: outcome.outputs,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Json {
        path: cfg.out.join(MANIFEST_FILE),
        source,
    })?;
    write_file(&cfg.out, MANIFEST_FILE, json + "\n")?;
    Ok(manifest)
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n_seen: a.classes_seen,
        n_unseen: a.classes_unseen,
        dim_v: a.dim_v,
        dim_a: a.dim_a,
        semantic_dim: a.semantic_dim,
        samples_per_class: a.samples_per_class,
        separation: a.separation,
        attr_noise: a.attr_noise,
        seed: a.seed,
    };
    let bundle = generate_synthetic(&spec)?;
    save_bundle(&bundle, &a.out)?;
    let c = bundle.counts();
    println!(
        "wrote {} ({} rows, {} classes; train {}, val {}, test seen {}, test unseen {})",
        a.out.display(),
        bundle.labels.len(),
        bundle.num_classes(),
        c.train,
        c.val,
        c.test_seen,
        c.test_unseen
    );
    Ok(())
}

/// Repeats the run recorded in `manifest` and compares outputs.
pub fn replay(manifest: &Path, out: &Path) -> Result<RunManifest> {
    let recorded: RunManifest = read_json(manifest)?;
    let src_dir = manifest.parent().unwrap_or(Path::new("."));
    let mut cfg = recorded.config.clone();
    if recorded.command != "train" && recorded.command != "tune" && cfg.model.is_none() {
        // the original run read its model from its own output directory
        cfg.model = Some(absolute(&src_dir.join(MODEL_FILE)));
    }
    cfg.out = out.to_path_buf();
    let bundle = load_bundle(&cfg.bundle)?;
    if bundle.file_checksums() != recorded.bundle_checksums {
        return Err(Error::Data(format!(
            "bundle {} changed since the recorded run",
            cfg.bundle.display()
        )));
    }
    let fresh = execute(&recorded.command, &cfg, recorded.argv.clone())?;
    for name in &recorded.outputs {
        let a = src_dir.join(name);
        let b = out.join(name);
        let old = fs::read(&a).map_err(|e| Error::io(&a, e))?;
        let new = fs::read(&b).map_err(|e| Error::io(&b, e))?;
        if old != new {
            return Err(Error::State(format!("{name} differs from the recorded run")));
        }
    }
    println!("replayed {}: {} outputs identical", recorded.command, recorded.outputs.len());
    Ok(fresh)
}

/// Runs one command; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let argv: Vec<String> = argv.iter().map(|s| s.to_string_lossy().into_owned()).collect();
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Replay(a) => replay(&a.manifest, &a.out).map(|_| ()),
        Command::Train(a) => a.resolve().and_then(|c| execute("train", &c, argv).map(|_| ())),
        Command::Tune(a) => a.resolve().and_then(|c| execute("tune", &c, argv).map(|_| ())),
        Command::Eval(a) => a.resolve().and_then(|c| execute("eval", &c, argv).map(|_| ())),
        Command::GateStats(a) => a.resolve().and_then(|c| execute("gate-stats", &c, argv).map(|_| ())),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Entry point for the binary: parses `std::env::args` and sets up logging.
pub fn run() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    run_from(std::env::args_os())
}
