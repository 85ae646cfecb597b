//! The two-phase adversarial training loop.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use synclay_autograd::{Adam, Tape, Var};

use super::checkpoint::{
    load_bundle, load_optimizers, save_bundle, save_optimizers, BundleInfo, Models,
};
use super::config::TrainConfig;
use super::losses::{
    discriminator_loss, generator_loss, loss_image, loss_mask, loss_seg, weighted_total, LossComponents, LossWeights,
};
use crate::error::{Error, Result};
use crate::ingest::DatasetRecord;
use crate::io::{self, Raster, MASK_PALETTE};
use crate::layout::Vocabulary;
use crate::nets::{crop_and_resize, Ctx, GeneratorOutput, SegNet, CELL_CROP_SIZE};

const OPTIM_FILE: &str = "optim.bin";
pub const METRICS_FILE: &str = "metrics.csv";

/// Losses of one generator step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepLosses {
    pub phase: u8,
    pub epoch: usize,
    pub step: u64,
    pub components: LossComponents,
    pub total: f64,
    pub disc_image: f64,
    pub disc_cell: f64,
}

/// Per-epoch means, one CSV row each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub phase: u8,
    pub epoch: usize,
    pub steps: usize,
    pub image: f64,
    pub mask: f64,
    pub seg: f64,
    pub adv_image: f64,
    pub adv_cell: f64,
    pub total: f64,
    pub disc_image: f64,
    pub disc_cell: f64,
}

impl EpochMetrics {
    fn from_steps(phase: u8, epoch: usize, steps: &[StepLosses]) -> Self {
        let n = steps.len().max(1) as f64;
        let mean = |f: &dyn Fn(&StepLosses) -> f64| steps.iter().map(f).sum::<f64>() / n;
        Self {
            phase,
            epoch,
            steps: steps.len(),
            image: mean(&|s| s.components.image),
            mask: mean(&|s| s.components.mask),
            seg: mean(&|s| s.components.seg),
            adv_image: mean(&|s| s.components.adv_image),
            adv_cell: mean(&|s| s.components.adv_cell),
            total: mean(&|s| s.total),
            disc_image: mean(&|s| s.disc_image),
            disc_cell: mean(&|s| s.disc_cell),
        }
    }
}

pub struct Trainer {
    pub config: TrainConfig,
    pub models: Models,
    gen_opts: Vec<Adam>,
    di_opt: Adam,
    dc_opt: Adam,
    /// Phase of the next step (1 or 2).
    pub phase: u8,
    /// Epochs completed over all phases.
    pub epoch: usize,
    /// Generator steps taken.
    pub step: u64,
    pub history: Vec<StepLosses>,
    pub epochs: Vec<EpochMetrics>,
    /// Sum of the gradient norms that reached the segmentation network.
    pub segnet_grad_norm: f64,
    out: Option<PathBuf>,
}

impl std::fmt::Debug for Trainer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trainer")
            .field("phase", &self.phase)
            .field("epoch", &self.epoch)
            .field("step", &self.step)
            .finish()
    }
}

fn mix(seed: u64, k: u64) -> u64 {
    crate::ingest::splitmix64(seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

impl Trainer {
    pub fn new(config: TrainConfig, vocabulary: Vocabulary) -> Result<Self> {
        config.validate()?;
        let models = Models::new(config.net, vocabulary, config.seed)?;
        Ok(Self::from_models(config, models))
    }

    pub fn from_models(config: TrainConfig, models: Models) -> Self {
        let adam = config.adam();
        let gen_opts = models
            .generator
            .trainable_stores()
            .into_iter()
            .map(|s| Adam::new(s, adam))
            .collect();
        let di_opt = Adam::new(&models.disc_img.params, adam);
        let dc_opt = Adam::new(&models.disc_cell.params, adam);
        Self {
            config,
            models,
            gen_opts,
            di_opt,
            dc_opt,
            phase: 1,
            epoch: 0,
            step: 0,
            history: Vec::new(),
            epochs: Vec::new(),
            segnet_grad_norm: 0.0,
            out: None,
        }
    }

    /// Continues from a bundle written by [`Trainer::save`]. Network shapes
    /// come from the bundle; `config` supplies the schedule.
    pub fn resume(dir: &Path, mut config: TrainConfig) -> Result<Self> {
        let (models, manifest) = load_bundle(dir)?;
        config.net = manifest.net;
        config.validate()?;
        let mut t = Self::from_models(config, models);
        let optim = dir.join(OPTIM_FILE);
        if optim.exists() {
            t.with_optimizers(|opts| load_optimizers(&optim, opts))?;
        }
        t.phase = manifest.phase.max(1);
        t.epoch = manifest.epoch;
        t.step = manifest.step;
        Ok(t)
    }

    fn with_optimizers<R>(&mut self, f: impl FnOnce(&mut [(&str, &mut Adam)]) -> R) -> R {
        let mut opts: Vec<(&str, &mut Adam)> = Vec::new();
        for (i, o) in self.gen_opts.iter_mut().enumerate() {
            opts.push((GEN_OPT_NAMES[i.min(GEN_OPT_NAMES.len() - 1)], o));
        }
        opts.push(("disc_img", &mut self.di_opt));
        opts.push(("disc_cell", &mut self.dc_opt));
        f(&mut opts)
    }

    /// Installs a trained segmentation network, frozen.
    pub fn set_segnet(&mut self, mut segnet: SegNet) {
        segnet.params.freeze();
        self.models.segnet = Some(segnet);
    }

    /// Directory for metrics, samples, checkpoints and failure snapshots.
    pub fn set_output(&mut self, dir: impl Into<PathBuf>) {
        self.out = Some(dir.into());
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let info = BundleInfo {
            weights: self.config.weights,
            terms: self.config.terms,
            phase: self.phase,
            epoch: self.epoch,
            step: self.step,
            seed: self.config.seed,
        };
        save_bundle(dir, &self.models, &info)?;
        let mut opts: Vec<(&str, &Adam)> = self
            .gen_opts
            .iter()
            .enumerate()
            .map(|(i, o)| (GEN_OPT_NAMES[i.min(GEN_OPT_NAMES.len() - 1)], o))
            .collect();
        opts.push(("disc_img", &self.di_opt));
        opts.push(("disc_cell", &self.dc_opt));
        save_optimizers(&dir.join(OPTIM_FILE), &opts)
    }

    fn check_record(&self, rec: &DatasetRecord) -> Result<()> {
        let s = self.config.net.image_size;
        if rec.image.shape() != [1, 3, s, s] {
            return Err(Error::Shape(format!(
                "record {}: image {:?} but the network trains on {s}x{s}",
                rec.id,
                rec.image.shape()
            )));
        }
        Ok(())
    }

    /// One batch-1 step: image discriminator, cellular discriminator, then
    /// the generator path.
    pub fn step(&mut self, rec: &DatasetRecord) -> Result<StepLosses> {
        self.check_record(rec)?;
        let weights = self.config.phase_weights(self.phase);
        if weights.seg > 0.0 && self.models.segnet.is_none() {
            return Err(Error::Config("phase 2 requires a frozen segmentation checkpoint".into()));
        }
        let seed = mix(self.config.seed, self.step);
        let tape = Tape::new();
        let ctx = Ctx::train(&tape, seed);
        let out = self.models.generator.forward(&ctx, &rec.layout)?;
        let fake = out.image.value();
        let boxes = out.boxes.clone();

        let mut disc_image = 0.0;
        if weights.adv_image > 0.0 {
            let t = Tape::new();
            let c = Ctx::train(&t, seed ^ 1);
            let d = &self.models.disc_img;
            let real_logits = d.forward(&c, t.constant(rec.image.clone()))?;
            let fake_logits = d.forward(&c, t.constant(fake.clone()))?;
            let l = discriminator_loss(real_logits, fake_logits);
            disc_image = l.item();
            let g = t.backward(l);
            debug_assert!(g.touches(&self.models.disc_img.params));
            self.di_opt.step(&mut self.models.disc_img.params, &g);
        }

        let mut disc_cell = 0.0;
        if weights.adv_cell > 0.0 && !boxes.is_empty() {
            let t = Tape::new();
            let c = Ctx::train(&t, seed ^ 2);
            let d = &self.models.disc_cell;
            let real_crops = crop_and_resize(t.constant(rec.image.clone()), &boxes, CELL_CROP_SIZE)?;
            let fake_crops = crop_and_resize(t.constant(fake.clone()), &boxes, CELL_CROP_SIZE)?;
            let l = discriminator_loss(d.forward(&c, real_crops)?, d.forward(&c, fake_crops)?);
            disc_cell = l.item();
            let g = t.backward(l);
            self.dc_opt.step(&mut self.models.disc_cell.params, &g);
            c.apply_stats(&mut self.models.disc_cell.params);
        }

        let m = &self.models;
        let terms = generator_terms(m, &weights, &ctx, rec, &out)?;
        let components = LossComponents::from_array(terms.map(|t| t.map_or(0.0, |v| v.item())));
        let total = weighted_total(&terms, &weights);
        let total_value = total.map_or(0.0, |t| t.item());
        let losses = StepLosses {
            phase: self.phase,
            epoch: self.epoch,
            step: self.step,
            components,
            total: total_value,
            disc_image,
            disc_cell,
        };
        let finite = components.as_array().iter().all(|v| v.is_finite())
            && total_value.is_finite()
            && disc_image.is_finite()
            && disc_cell.is_finite();
        if !finite {
            return Err(self.non_finite(&losses, &rec.id));
        }

        if let Some(total) = total {
            let grads = tape.backward(total);
            assert!(!grads.touches(&m.disc_img.params), "generator step reached disc_img");
            assert!(!grads.touches(&m.disc_cell.params), "generator step reached disc_cell");
            if let Some(s) = &m.segnet {
                self.segnet_grad_norm += grads.norm_for(&s.params);
            }
            let stores = self.models.generator.trainable_stores_mut();
            for (store, opt) in stores.into_iter().zip(&mut self.gen_opts) {
                opt.step(store, &grads);
            }
        }
        ctx.apply_stats(&mut self.models.generator.maskgen.params);
        self.step += 1;
        self.history.push(losses);
        Ok(losses)
    }

    fn non_finite(&self, losses: &StepLosses, record: &str) -> Error {
        let detail = format!(
            "record {record}: components {:?}, total {}, disc_image {}, disc_cell {}",
            losses.components.as_array(),
            losses.total,
            losses.disc_image,
            losses.disc_cell
        );
        if let Some(out) = &self.out {
            let snap = out.join(format!("nonfinite_step{}", self.step));
            match self.save(&snap) {
                Ok(()) => {
                    let _ = fs::write(snap.join("losses.json"), serde_json::to_string_pretty(losses).unwrap_or_default());
                    log::error!("non-finite loss; snapshot written to {}", snap.display());
                }
                Err(e) => log::error!("non-finite loss; snapshot failed: {e}"),
            }
        }
        Error::NonFinite {
            epoch: self.epoch,
            step: self.step as usize,
            detail,
        }
    }

    /// Runs the configured number of epochs of `phase` over `records`.
    pub fn run_phase(&mut self, phase: u8, records: &[DatasetRecord]) -> Result<()> {
        if !(1..=2).contains(&phase) {
            return Err(Error::Config(format!("phase must be 1 or 2, got {phase}")));
        }
        if records.is_empty() {
            return Err(Error::Dataset("no training records".into()));
        }
        if phase == 2 && self.models.segnet.is_none() {
            return Err(Error::Config("phase 2 requires a frozen segmentation checkpoint".into()));
        }
        self.phase = phase;
        let epochs = if phase == 1 {
            self.config.phase1_epochs
        } else {
            self.config.phase2_epochs
        };
        let mut taken = 0usize;
        for _ in 0..epochs {
            let mut order: Vec<usize> = (0..records.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(self.config.seed, 1 << 40 | self.epoch as u64)));
            let first = self.history.len();
            for i in order {
                if self.config.max_steps.is_some_and(|m| taken >= m) {
                    break;
                }
                self.step(&records[i])?;
                taken += 1;
            }
            let m = EpochMetrics::from_steps(phase, self.epoch, &self.history[first..]);
            self.epoch += 1;
            log::info!(
                "phase {phase} epoch {} steps {} image {:.4} mask {:.4} total {:.4}",
                m.epoch,
                m.steps,
                m.image,
                m.mask,
                m.total
            );
            self.epochs.push(m);
            if let Some(out) = self.out.clone() {
                append_metrics(&out.join(METRICS_FILE), &m)?;
                let every = self.config.sample_every;
                if every > 0 && self.epoch.is_multiple_of(every) {
                    let grid = self.sample_grid(&records[..records.len().min(4)])?;
                    let dir = out.join("samples");
                    fs::create_dir_all(&dir)?;
                    fs::write(
                        dir.join(format!("epoch_{:04}.png", self.epoch)),
                        io::encode_rgb(grid.width, grid.height, &grid.data)?,
                    )?;
                }
                let every = self.config.checkpoint_every;
                if every > 0 && self.epoch.is_multiple_of(every) {
                    self.save(&out.join("checkpoint"))?;
                }
            }
            if self.config.max_steps.is_some_and(|m| taken >= m) {
                break;
            }
        }
        if let Some(out) = self.out.clone() {
            self.save(&out.join("checkpoint"))?;
        }
        Ok(())
    }

    /// Rows of `real | generated | segmentation` (the last column only with
    /// a segmentation network).
    pub fn sample_grid(&self, records: &[DatasetRecord]) -> Result<Raster> {
        let mut rows = Vec::new();
        for r in records {
            let fake = self.models.generator.generate(&r.layout)?;
            let mut row = vec![io::tensor_to_rgb(&r.image)?, io::tensor_to_rgb(&fake)?];
            if let Some(s) = &self.models.segnet {
                let (_, mask) = s.segment(&fake)?;
                row.push(palette_raster(&mask, r.width() as u32, r.height() as u32));
            }
            rows.push(row);
        }
        Ok(tile(&rows))
    }
}

/// The five generator-side terms for one record. Discriminators and the
/// segmentation network are frozen on the tape first, so gradients reach
/// only the generator path. Terms with zero weight are not computed (the
/// image and mask terms always are, for logging).
pub fn generator_terms<'t>(
    models: &Models,
    weights: &LossWeights,
    ctx: &Ctx<'t>,
    rec: &DatasetRecord,
    out: &GeneratorOutput<'t>,
) -> Result<[Option<Var<'t>>; 5]> {
    let tape = ctx.tape;
    tape.freeze(&models.disc_img.params);
    tape.freeze(&models.disc_cell.params);
    if let Some(s) = &models.segnet {
        tape.freeze(&s.params);
    }
    let real = tape.constant(rec.image.clone());
    let mut terms: [Option<Var<'t>>; 5] = [None; 5];
    terms[0] = Some(loss_image(real, out.image)?);
    if let Some(masks) = out.masks {
        let gt: Vec<Vec<f64>> = rec
            .cell_masks
            .iter()
            .map(|mk| mk.iter().map(|&v| v as f64).collect())
            .collect();
        terms[1] = Some(loss_mask(&gt, masks)?);
    }
    if weights.seg > 0.0 {
        let segnet = models
            .segnet
            .as_ref()
            .ok_or_else(|| Error::Config("the segmentation term needs a segmentation network".into()))?;
        terms[2] = Some(loss_seg(&rec.class_mask, segnet.forward(ctx, out.image)?)?);
    }
    if weights.adv_image > 0.0 {
        terms[3] = Some(generator_loss(models.disc_img.forward(ctx, out.image)?));
    }
    if weights.adv_cell > 0.0 && !out.boxes.is_empty() {
        let crops = crop_and_resize(out.image, &out.boxes, CELL_CROP_SIZE)?;
        terms[4] = Some(generator_loss(models.disc_cell.forward(ctx, crops)?));
    }
    Ok(terms)
}

const GEN_OPT_NAMES: [&str; 4] = ["gen0", "gen1", "gen2", "gen3"];

fn append_metrics(path: &Path, m: &EpochMetrics) -> Result<()> {
    let exists = path.exists();
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(!exists).from_writer(file);
    w.serialize(m)?;
    w.flush()?;
    Ok(())
}

/// Class labels painted with the mask palette.
pub fn palette_raster(labels: &[u8], width: u32, height: u32) -> Raster {
    let data = labels
        .iter()
        .flat_map(|&l| MASK_PALETTE[(l as usize).min(MASK_PALETTE.len() - 1)])
        .collect();
    Raster {
        width,
        height,
        channels: 3,
        data,
    }
}

/// Lays equally sized RGB rasters out row by row, padding short rows black.
pub fn tile(rows: &[Vec<Raster>]) -> Raster {
    let Some(first) = rows.iter().flatten().next() else {
        return Raster {
            width: 0,
            height: 0,
            channels: 3,
            data: Vec::new(),
        };
    };
    let (tw, th) = (first.width as usize, first.height as usize);
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let (w, h) = (tw * cols, th * rows.len());
    let mut data = vec![0u8; w * h * 3];
    for (ri, row) in rows.iter().enumerate() {
        for (ci, r) in row.iter().enumerate() {
            for y in 0..th {
                let src = &r.data[y * tw * 3..(y + 1) * tw * 3];
                let dst = ((ri * th + y) * w + ci * tw) * 3;
                data[dst..dst + tw * 3].copy_from_slice(src);
            }
        }
    }
    Raster {
        width: w as u32,
        height: h as u32,
        channels: 3,
        data,
    }
}

