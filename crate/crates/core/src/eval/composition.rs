//! Per-type cell count regression from a tile, and its metric table.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use synclay_autograd::ops::Conv2dGeometry;
use synclay_autograd::{Adam, AdamConfig, ParamStore, Tape, Tensor};

use super::metrics::{auc_roc, pearson, r2, spearman};
use crate::error::{Error, Result};
use crate::ingest::{class_component_counts, DatasetRecord};
use crate::nets::layers::{expect_input, init_rng, Conv, Linear, LEAKY_SLOPE};
use crate::nets::Ctx;

pub const HUBER_DELTA: f64 = 1.0;

/// A tile with its per-type counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionSample {
    pub id: String,
    /// `[1, 3, H, W]`.
    pub image: Tensor,
    pub counts: Vec<f64>,
    pub synthetic: bool,
}

impl CompositionSample {
    /// Counts from the class mask's per-type connected components.
    pub fn from_record(rec: &DatasetRecord) -> Self {
        let classes = rec.layout.vocabulary.len();
        let counts = class_component_counts(&rec.class_mask, rec.width(), rec.height(), classes);
        Self {
            id: rec.id.clone(),
            image: rec.image.clone(),
            counts: counts.into_iter().map(|c| c as f64).collect(),
            synthetic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorConfig {
    pub base_channels: usize,
    pub levels: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            base_channels: 16,
            levels: 5,
            epochs: 20,
            lr: 1e-3,
            seed: 0,
        }
    }
}

/// Strided convolutions, global pooling and a two-layer regression head.
#[derive(Debug)]
pub struct CompositionPredictor {
    pub params: ParamStore,
    convs: Vec<Conv>,
    hidden: Linear,
    out: Linear,
    outputs: usize,
}

impl CompositionPredictor {
    pub fn new(outputs: usize, cfg: &PredictorConfig) -> Self {
        let mut params = ParamStore::new("composition");
        let mut rng = init_rng(cfg.seed, 30);
        let mut cin = 3;
        let convs = (0..cfg.levels)
            .map(|i| {
                let c = cfg.base_channels << i.min(3);
                let conv = Conv::new(&mut params, &format!("conv{i}"), cin, c, Conv2dGeometry::new(4, 2, 1), &mut rng);
                cin = c;
                conv
            })
            .collect();
        let hidden = Linear::new(&mut params, "fc1", cin, 64, &mut rng);
        let out = Linear::new(&mut params, "fc2", 64, outputs, &mut rng);
        Self {
            params,
            convs,
            hidden,
            out,
            outputs,
        }
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t>, image: synclay_autograd::Var<'t>) -> Result<synclay_autograd::Var<'t>> {
        expect_input("composition predictor", &image, 3, None)?;
        let mut h = image;
        for c in &self.convs {
            h = c.forward(ctx, &self.params, h).leaky_relu(LEAKY_SLOPE);
        }
        let h = self.hidden.forward(ctx, &self.params, h.global_avg_pool()).relu();
        Ok(self.out.forward(ctx, &self.params, h))
    }

    pub fn predict(&self, image: &Tensor) -> Result<Vec<f64>> {
        let tape = Tape::no_grad();
        let ctx = Ctx::eval(&tape);
        Ok(self.forward(&ctx, tape.constant(image.clone()))?.value().into_vec())
    }
}

/// Trains on `train`, plus `synthetic` when given. Returns the predictor and
/// the mean Huber loss of each epoch.
pub fn train_composition_predictor(
    train: &[CompositionSample],
    synthetic: Option<&[CompositionSample]>,
    cfg: &PredictorConfig,
) -> Result<(CompositionPredictor, Vec<f64>)> {
    let all: Vec<&CompositionSample> = train.iter().chain(synthetic.unwrap_or_default()).collect();
    let Some(first) = all.first() else {
        return Err(Error::Eval("no samples to train the composition predictor on".into()));
    };
    let k = first.counts.len();
    if all.iter().any(|s| s.counts.len() != k) {
        return Err(Error::Eval("samples disagree on the number of cell types".into()));
    }
    let mut net = CompositionPredictor::new(k, cfg);
    let mut opt = Adam::new(
        &net.params,
        AdamConfig {
            lr: cfg.lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..all.len()).collect();
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for i in order {
            let s = all[i];
            let tape = Tape::new();
            let ctx = Ctx::eval(&tape);
            let pred = net.forward(&ctx, tape.constant(s.image.clone()))?;
            let loss = pred.huber(&Tensor::new(&[1, k], s.counts.clone()), HUBER_DELTA);
            sum += loss.item();
            let g = tape.backward(loss);
            opt.step(&mut net.params, &g);
        }
        history.push(sum / all.len() as f64);
    }
    Ok((net, history))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub cell_type: String,
    pub spearman: Option<f64>,
    pub pearson: Option<f64>,
    pub r2: Option<f64>,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"))
}

impl MetricTable {
    /// Metrics per type from aligned truth and prediction rows.
    pub fn from_predictions(names: &[String], truth: &[Vec<f64>], pred: &[Vec<f64>]) -> Result<Self> {
        if truth.len() != pred.len() || truth.len() < 2 {
            return Err(Error::Eval(format!(
                "need at least 2 aligned test rows, got {} truths and {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        let rows = names
            .iter()
            .enumerate()
            .map(|(t, name)| {
                let y: Vec<f64> = truth.iter().map(|r| r[t]).collect();
                let p: Vec<f64> = pred.iter().map(|r| r[t]).collect();
                let present: Vec<bool> = y.iter().map(|&c| c > 0.0).collect();
                MetricRow {
                    cell_type: name.clone(),
                    spearman: spearman(&y, &p),
                    pearson: pearson(&y, &p),
                    r2: r2(&y, &p),
                    auc: auc_roc(&present, &p),
                }
            })
            .collect();
        Ok(Self { rows })
    }

    pub fn get(&self, cell_type: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.cell_type == cell_type)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("cell_type,spearman,pearson,r2,auc_roc\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.cell_type, cell(r.spearman), cell(r.pearson), cell(r.r2), cell(r.auc));
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| cell type | Spearman | Pearson | R² | AUC-ROC |\n|---|---|---|---|---|\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} |",
                r.cell_type,
                cell(r.spearman),
                cell(r.pearson),
                cell(r.r2),
                cell(r.auc)
            );
        }
        s
    }
}

pub fn evaluate_predictor(
    predictor: &CompositionPredictor,
    test: &[CompositionSample],
    names: &[String],
) -> Result<MetricTable> {
    let truth: Vec<Vec<f64>> = test.iter().map(|s| s.counts.clone()).collect();
    let pred = test.iter().map(|s| predictor.predict(&s.image)).collect::<Result<Vec<_>>>()?;
    MetricTable::from_predictions(names, &truth, &pred)
}
