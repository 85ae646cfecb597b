//! Supervised training of the segmentation network on real tiles.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synclay_autograd::{Adam, AdamConfig, Tape};

use super::losses::loss_seg;
use crate::error::{Error, Result};
use crate::ingest::DatasetRecord;
use crate::nets::layers::init_rng;
use crate::nets::{Ctx, SegNet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegnetTraining {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SegnetTraining {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 1e-3,
            seed: 0,
        }
    }
}

/// Trains a segmentation network for `classes` labels (background
/// included). Returns the frozen network and the mean loss per epoch.
pub fn train_segnet(records: &[DatasetRecord], classes: usize, cfg: &SegnetTraining) -> Result<(SegNet, Vec<f64>)> {
    if records.is_empty() {
        return Err(Error::Dataset("no records to train the segmentation network on".into()));
    }
    let mut net = SegNet::new(classes, &mut init_rng(cfg.seed, 8));
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
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for i in order {
            let r = &records[i];
            let tape = Tape::new();
            let ctx = Ctx::eval(&tape);
            let logits = net.forward(&ctx, tape.constant(r.image.clone()))?;
            let loss = loss_seg(&r.class_mask, logits)?;
            let v = loss.item();
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    epoch: history.len(),
                    step: 0,
                    detail: format!("segmentation loss on record {}", r.id),
                });
            }
            sum += v;
            let g = tape.backward(loss);
            opt.step(&mut net.params, &g);
        }
        history.push(sum / records.len() as f64);
    }
    net.params.freeze();
    Ok((net, history))
}

/// Fraction of pixels whose argmax label matches the class mask.
pub fn pixel_accuracy(net: &SegNet, records: &[DatasetRecord]) -> Result<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for r in records {
        let (_, mask) = net.segment(&r.image)?;
        hit += mask.iter().zip(&r.class_mask).filter(|(a, b)| a == b).count();
        total += mask.len();
    }
    if total == 0 {
        return Err(Error::Eval("pixel accuracy of an empty set".into()));
    }
    Ok(hit as f64 / total as f64)
}
