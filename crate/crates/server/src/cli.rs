//! Command-line surface. Every setting resolves as flag, then `SYNCLAY_*`
//! environment variable, then config file, then default.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use synclay::eval::{
    self, balance_with_synthetic, dataset_entries, evaluate_predictor, fid_resampled, standard_subsets,
    train_composition_predictor, AugmentManifest, BalancePlan, CompositionSample, FeatureExtractor, MetricTable,
    PredictorConfig, RandomConvFeatures,
};
use synclay::infer::Engine;
use synclay::ingest::{self, convert, ConvertOptions, Dataset, DatasetRecord, SourceFormat};
use synclay::train::{load_segnet, pixel_accuracy, save_segnet, train_segnet, SegnetTraining, TrainConfig, Trainer};
use synclay::{io, Grade, LayoutJson, LayoutParams, LayoutSynthesizer};
use thiserror::Error;

use crate::api::{router, AppState};
use crate::store::{LayoutStore, StoreError};

pub const DEFAULT_PORT: u16 = 8408;
pub const DEFAULT_HOST: &str = "127.0.0.1";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] synclay::Error),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type CliResult<T> = Result<T, CliError>;

fn file_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Parser)]
#[command(name = "synclay", version, about = "Histology tile synthesis from cellular layouts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cellular layouts.
    Layout {
        #[command(subcommand)]
        command: LayoutCommand,
    },
    /// Convert a raw CoNiC or PanNuke release into a dataset directory.
    Ingest(IngestArgs),
    /// Train the segmentation network on a dataset.
    Segnet(SegnetArgs),
    /// Train the generator (phase 1) or fine-tune it with segmentation (phase 2).
    Train(TrainArgs),
    /// Evaluation reports.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Generate one image and mask from a layout file.
    Infer(InferArgs),
}

#[derive(Debug, Subcommand)]
pub enum LayoutCommand {
    /// Synthesize a layout from grade and cellularities.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, env = "SYNCLAY_GRADE")]
    pub grade: Option<Grade>,
    /// `type=value`, repeatable.
    #[arg(long = "cellularity", value_parser = parse_pair)]
    pub cellularities: Vec<(String, f64)>,
    #[arg(long, env = "SYNCLAY_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "SYNCLAY_IMAGE_SIZE")]
    pub image_size: Option<u32>,
    #[arg(long)]
    pub gland_count: Option<usize>,
    /// TOML file with the same keys as the layout parameters.
    #[arg(long, env = "SYNCLAY_CONFIG")]
    pub config: Option<PathBuf>,
    /// Writes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_pair(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected type=value, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

impl SynthArgs {
    pub fn params(&self) -> CliResult<LayoutParams> {
        let mut p = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
                toml::from_str(&text).map_err(|e| file_err(path, e))?
            }
            None => LayoutParams::default(),
        };
        if let Some(g) = self.grade {
            p.grade = g;
        }
        for (k, v) in &self.cellularities {
            p.cellularities.insert(k.clone(), *v);
        }
        if let Some(s) = self.seed {
            p.rng_seed = s;
        }
        if let Some(s) = self.image_size {
            p.image_size = s;
        }
        if self.gland_count.is_some() {
            p.gland_count = self.gland_count;
        }
        Ok(p)
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub format: SourceFormat,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Sends every k-th tile to the test split.
    #[arg(long)]
    pub test_every: Option<usize>,
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SegnetArgs {
    #[arg(long, env = "SYNCLAY_DATA")]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, env = "SYNCLAY_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training configuration (TOML).
    #[arg(long, env = "SYNCLAY_TRAIN_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "SYNCLAY_DATA")]
    pub data: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub phase: u8,
    /// Frozen segmentation checkpoint; required for phase 2.
    #[arg(long, env = "SYNCLAY_SEGNET")]
    pub segnet: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Bundle to continue from; phase 2 defaults to `<out>/checkpoint`.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, env = "SYNCLAY_SEED")]
    pub seed: Option<u64>,
    /// Epochs of the selected phase.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long, env = "SYNCLAY_LR")]
    pub lr: Option<f64>,
}

impl TrainArgs {
    pub fn train_config(&self) -> CliResult<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => TrainConfig::load(p)?,
            None => TrainConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(e) = self.epochs {
            match self.phase {
                1 => cfg.phase1_epochs = e,
                _ => cfg.phase2_epochs = e,
            }
        }
        if self.max_steps.is_some() {
            cfg.max_steps = self.max_steps;
        }
        if let Some(lr) = self.lr {
            cfg.lr = lr;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// FID between two directories of PNG tiles.
    Fid(FidArgs),
    /// Cell-composition prediction, optionally with a synthetic augmentation.
    Composition(CompositionArgs),
    /// Generate minority-biased tiles and write an augmentation manifest.
    Augment(AugmentArgs),
    /// Retrain with loss-term subsets and compare image quality.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct FidArgs {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub fake: PathBuf,
    #[arg(long, default_value_t = eval::fid::DEFAULT_RESAMPLES)]
    pub resamples: usize,
    #[arg(long, env = "SYNCLAY_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Directory for `fid.csv` and `fid.md`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompositionArgs {
    #[arg(long, env = "SYNCLAY_DATA")]
    pub data: PathBuf,
    #[arg(long)]
    pub augment: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, env = "SYNCLAY_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long, env = "SYNCLAY_DATA")]
    pub data: PathBuf,
    #[arg(long, env = "SYNCLAY_CHECKPOINT")]
    pub checkpoint: PathBuf,
    /// Comma-separated minority types.
    #[arg(long, value_delimiter = ',', required = true)]
    pub minority: Vec<String>,
    #[arg(long, default_value_t = 100)]
    pub images: usize,
    #[arg(long, env = "SYNCLAY_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, env = "SYNCLAY_TRAIN_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "SYNCLAY_DATA")]
    pub data: PathBuf,
    #[arg(long, env = "SYNCLAY_SEGNET")]
    pub segnet: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Keys accepted in the service config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceFile {
    pub checkpoint: Option<PathBuf>,
    pub host: Option<String>,
    pub port: Option<u16>,
    pub store: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl ServiceFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
        toml::from_str(&text).map_err(|e| file_err(path, e))
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "SYNCLAY_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, env = "SYNCLAY_HOST")]
    pub host: Option<String>,
    #[arg(long, env = "SYNCLAY_PORT")]
    pub port: Option<u16>,
    /// Layout store file; in memory when absent.
    #[arg(long, env = "SYNCLAY_STORE")]
    pub store: Option<PathBuf>,
    #[arg(long, env = "SYNCLAY_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, env = "SYNCLAY_CONFIG")]
    pub config: Option<PathBuf>,
}

/// Effective service settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ServeSettings {
    pub checkpoint: Option<PathBuf>,
    pub host: String,
    pub port: u16,
    pub store: Option<PathBuf>,
    pub workers: usize,
}

impl ServeArgs {
    pub fn settings(&self) -> CliResult<ServeSettings> {
        let file = ServiceFile::load(self.config.as_deref())?;
        let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
        Ok(ServeSettings {
            checkpoint: self.checkpoint.clone().or(file.checkpoint),
            host: self.host.clone().or(file.host).unwrap_or_else(|| DEFAULT_HOST.into()),
            port: self.port.or(file.port).unwrap_or(DEFAULT_PORT),
            store: self.store.clone().or(file.store),
            workers: self.workers.or(file.workers).unwrap_or(cores.saturating_sub(1)).max(1),
        })
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub layout: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "SYNCLAY_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, env = "SYNCLAY_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "SYNCLAY_CONFIG")]
    pub config: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Layout {
            command: LayoutCommand::Synth(a),
        } => layout_synth(&a),
        Command::Ingest(a) => ingest_cmd(&a),
        Command::Segnet(a) => segnet_cmd(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Eval { command } => match command {
            EvalCommand::Fid(a) => fid_cmd(&a),
            EvalCommand::Composition(a) => composition_cmd(&a),
            EvalCommand::Augment(a) => augment_cmd(&a),
            EvalCommand::Ablate(a) => ablate_cmd(&a),
        },
        Command::Serve(a) => serve(&a.settings()?),
        Command::Infer(a) => infer_cmd(&a),
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text).map_err(|e| file_err(p, e))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.md` and prints the Markdown.
fn report(dir: Option<&Path>, stem: &str, csv: &str, md: &str) -> CliResult<()> {
    println!("{md}");
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
        fs::write(d.join(format!("{stem}.csv")), csv)?;
        fs::write(d.join(format!("{stem}.md")), md)?;
    }
    Ok(())
}

fn layout_synth(a: &SynthArgs) -> CliResult<()> {
    let s = LayoutSynthesizer::default().synthesize(&a.params()?)?;
    let text = serde_json::to_string_pretty(&s.layout.to_json()).map_err(synclay::Error::from)?;
    write_or_print(a.out.as_deref(), &text)
}

fn ingest_cmd(a: &IngestArgs) -> CliResult<()> {
    let opts = ConvertOptions {
        split: a.split.clone(),
        test_every: a.test_every,
        limit: a.limit,
    };
    let r = convert(a.format, &a.input, &a.out, &opts)?;
    for s in &r.skipped {
        log::warn!("skipped {s}");
    }
    println!("wrote {} records to {} ({} skipped)", r.written, a.out.display(), r.skipped.len());
    Ok(())
}

fn load_split(root: &Path, split: &str) -> CliResult<Vec<DatasetRecord>> {
    Ok(Dataset::open(root, split)?.load_all()?)
}

fn segnet_cmd(a: &SegnetArgs) -> CliResult<()> {
    let vocab = ingest::read_vocabulary(&a.data)?;
    let train = load_split(&a.data, "train")?;
    let cfg = SegnetTraining {
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed.unwrap_or(0),
    };
    let (net, losses) = train_segnet(&train, vocab.len() + 1, &cfg)?;
    save_segnet(&a.out, &net, &vocab)?;
    let acc = pixel_accuracy(&net, &train)?;
    println!(
        "segmentation network saved to {} (final loss {:.4}, train pixel accuracy {:.4})",
        a.out.display(),
        losses.last().copied().unwrap_or(f64::NAN),
        acc
    );
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> CliResult<()> {
    let cfg = a.train_config()?;
    let vocab = ingest::read_vocabulary(&a.data)?;
    let records = load_split(&a.data, "train")?;
    let resume = a.resume.clone().or_else(|| {
        let c = a.out.join("checkpoint");
        (a.phase == 2 && c.exists()).then_some(c)
    });
    let mut trainer = match resume {
        Some(dir) => Trainer::resume(&dir, cfg)?,
        None if a.phase == 2 => {
            return Err(CliError::Usage(format!(
                "phase 2 needs a phase 1 bundle: pass --resume or train phase 1 into {} first",
                a.out.display()
            )))
        }
        None => Trainer::new(cfg, vocab.clone())?,
    };
    if trainer.models.vocabulary() != &vocab {
        return Err(CliError::Usage("checkpoint and dataset vocabularies differ".into()));
    }
    match &a.segnet {
        Some(dir) => trainer.set_segnet(load_segnet(dir, &vocab)?),
        None if a.phase == 2 => return Err(CliError::Usage("phase 2 requires --segnet".into())),
        None => {}
    }
    fs::create_dir_all(&a.out)?;
    trainer.set_output(&a.out);
    trainer.run_phase(a.phase, &records)?;
    println!(
        "phase {} done after {} steps; checkpoint in {}",
        a.phase,
        trainer.step,
        a.out.join("checkpoint").display()
    );
    Ok(())
}

fn png_tensors(dir: &Path) -> CliResult<Vec<synclay_autograd::Tensor>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| file_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(file_err(dir, "no PNG files"));
    }
    paths
        .iter()
        .map(|p| {
            let r = io::decode_rgb(&io::read_file(p)?).map_err(|e| file_err(p, e))?;
            Ok(io::rgb_to_tensor(&r))
        })
        .collect()
}

fn fid_cmd(a: &FidArgs) -> CliResult<()> {
    let ex = RandomConvFeatures::new(a.seed);
    let real = ex.extract(&png_tensors(&a.real)?)?;
    let fake = ex.extract(&png_tensors(&a.fake)?)?;
    let r = fid_resampled(&real, &fake, a.resamples, a.seed)?;
    let csv = format!(
        "real,fake,n_real,n_fake,fid,mean,std,resamples\n{},{},{},{},{},{},{},{}\n",
        a.real.display(),
        a.fake.display(),
        real.len(),
        fake.len(),
        r.full,
        r.mean,
        r.std,
        r.samples.len()
    );
    let md = format!(
        "| real | fake | FID | resampled |\n|---|---|---|---|\n| {} ({}) | {} ({}) | {:.4} | {:.4} ± {:.4} |\n",
        a.real.display(),
        real.len(),
        a.fake.display(),
        fake.len(),
        r.full,
        r.mean,
        r.std
    );
    report(a.report.as_deref(), "fid", &csv, &md)
}

fn predictor_table(
    train: &[CompositionSample],
    synthetic: Option<&[CompositionSample]>,
    test: &[CompositionSample],
    names: &[String],
    cfg: &PredictorConfig,
) -> CliResult<MetricTable> {
    let (p, _) = train_composition_predictor(train, synthetic, cfg)?;
    Ok(evaluate_predictor(&p, test, names)?)
}

fn composition_cmd(a: &CompositionArgs) -> CliResult<()> {
    let vocab = ingest::read_vocabulary(&a.data)?;
    let names = vocab.names().to_vec();
    let samples = |split| -> CliResult<Vec<CompositionSample>> {
        Ok(load_split(&a.data, split)?.iter().map(CompositionSample::from_record).collect())
    };
    let (train, test) = (samples("train")?, samples("test")?);
    let cfg = PredictorConfig {
        epochs: a.epochs,
        seed: a.seed,
        ..PredictorConfig::default()
    };
    let base = predictor_table(&train, None, &test, &names, &cfg)?;
    report(a.report.as_deref(), "composition_real", &base.to_csv(), &base.to_markdown())?;
    if let Some(path) = &a.augment {
        let m = AugmentManifest::load(path)?;
        if m.vocabulary != names {
            return Err(CliError::Usage("manifest and dataset vocabularies differ".into()));
        }
        let synth = m.synthetic_samples()?;
        let aug = predictor_table(&train, Some(&synth), &test, &names, &cfg)?;
        report(a.report.as_deref(), "composition_augmented", &aug.to_csv(), &aug.to_markdown())?;
        report(a.report.as_deref(), "distribution", &distribution_csv(&m), &m.distribution_markdown())?;
    }
    Ok(())
}

fn distribution_csv(m: &AugmentManifest) -> String {
    let mut s = String::from("cell_type,cells_before,cells_after,tiles_before,tiles_after\n");
    for (t, name) in m.vocabulary.iter().enumerate() {
        s.push_str(&format!(
            "{name},{},{},{},{}\n",
            m.before.cells[t], m.after.cells[t], m.before.samples[t], m.after.samples[t]
        ));
    }
    s
}

fn augment_cmd(a: &AugmentArgs) -> CliResult<()> {
    let engine = Engine::load(&a.checkpoint)?;
    let dataset = Dataset::open(&a.data, "train")?;
    let vocab = engine.models.vocabulary().clone();
    let minority: Vec<&str> = a.minority.iter().map(String::as_str).collect();
    let size = engine.models.generator.config.image_size as u32;
    let plan = BalancePlan::minority_biased(&vocab, &minority, a.images, size, a.seed)?;
    let synthesizer = LayoutSynthesizer::new(vocab, dataset.size_statistics()?);
    let aug = balance_with_synthetic(&dataset_entries(&dataset)?, &engine.models, &synthesizer, &plan, Some(&a.out))?;
    println!("{}", aug.manifest.distribution_markdown());
    println!(
        "{} synthetic tiles, {} skipped; manifest at {}",
        aug.synthetic.len(),
        aug.manifest.skipped.len(),
        a.out.join("manifest.json").display()
    );
    Ok(())
}

fn ablate_cmd(a: &AblateArgs) -> CliResult<()> {
    let cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    let vocab = ingest::read_vocabulary(&a.data)?;
    let segnet = a.segnet.as_deref().map(|d| load_segnet(d, &vocab)).transpose()?;
    let train = load_split(&a.data, "train")?;
    let test = load_split(&a.data, "test")?;
    let ex = RandomConvFeatures::new(cfg.seed);
    let table = eval::ablate(&cfg, &standard_subsets(), &train, &test, segnet.as_ref(), &ex)?;
    report(a.report.as_deref(), "ablation", &table.to_csv(), &table.to_markdown())
}

fn infer_cmd(a: &InferArgs) -> CliResult<()> {
    let file = ServiceFile::load(a.config.as_deref())?;
    let checkpoint = a
        .checkpoint
        .clone()
        .or(file.checkpoint)
        .ok_or_else(|| CliError::Usage("no checkpoint: pass --checkpoint or set SYNCLAY_CHECKPOINT".into()))?;
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let text = fs::read_to_string(&a.layout).map_err(|e| file_err(&a.layout, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let layout: LayoutJson = serde_path_to_error::deserialize(de).map_err(|e| file_err(&a.layout, e))?;
    let engine = Engine::load(&checkpoint)?;
    let pair = engine.generate_json(layout, seed)?;
    pair.write_to(&a.out)?;
    println!(
        "wrote {}x{} pair to {} (checkpoint {}, seed {})",
        pair.width,
        pair.height,
        a.out.display(),
        pair.provenance.checkpoint_id,
        seed
    );
    Ok(())
}

/// Builds the shared state for `settings`.
pub fn app_state(settings: &ServeSettings) -> CliResult<AppState> {
    let engine = settings.checkpoint.as_deref().map(Engine::load).transpose()?;
    let store = match &settings.store {
        Some(p) => LayoutStore::open(p)?,
        None => LayoutStore::in_memory(),
    };
    Ok(AppState::new(engine, store))
}

pub fn serve(settings: &ServeSettings) -> CliResult<()> {
    let state = Arc::new(app_state(settings)?);
    match state.engine() {
        Some(e) => log::info!("checkpoint {} loaded", e.checkpoint_id),
        None => log::warn!("no checkpoint loaded; generation answers 503"),
    }
    let addr: SocketAddr = format!("{}:{}", settings.host, settings.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("address {}:{}: {e}", settings.host, settings.port)))?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(settings.workers)
        .enable_all()
        .build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}
