//! Loss-term ablation: one training run and one FID per term subset.

use std::fmt::Write as _;

use serde::Serialize;

use super::fid::{fid_from_features, FeatureExtractor};
use crate::error::Result;
use crate::ingest::DatasetRecord;
use crate::nets::layers::init_rng;
use crate::nets::SegNet;
use crate::train::{TermMask, TrainConfig, Trainer};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub terms: String,
    pub mask: TermMask,
    pub steps: u64,
    /// Mean image loss of the last epoch.
    pub final_image_loss: f64,
    pub fid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("terms,steps,final_image_loss,fid\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:.6},{:.6}", r.terms, r.steps, r.final_image_loss, r.fid);
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| enabled terms | steps | final L_I | FID |\n|---|---|---|---|\n");
        for r in &self.rows {
            let _ = writeln!(s, "| {} | {} | {:.4} | {:.4} |", r.terms, r.steps, r.final_image_loss, r.fid);
        }
        s
    }
}

/// Every subset of the five terms with the image term always kept, largest
/// first.
pub fn standard_subsets() -> Vec<TermMask> {
    let mut v: Vec<TermMask> = (0u8..16)
        .map(|bits| TermMask {
            image: true,
            mask: bits & 1 != 0,
            seg: bits & 2 != 0,
            adv_image: bits & 4 != 0,
            adv_cell: bits & 8 != 0,
        })
        .collect();
    v.sort_by_key(|m| std::cmp::Reverse(crate::train::LossTerm::ALL.iter().filter(|t| m.has(**t)).count()));
    v
}

fn copy_segnet(s: &SegNet) -> Result<SegNet> {
    let mut c = SegNet::new(s.classes(), &mut init_rng(0, 8));
    c.params.copy_from(&s.params)?;
    Ok(c)
}

/// Trains one model per subset from the same seed (phase 1, then phase 2
/// when a segmentation network is given) and scores each against
/// `eval` with the shared extractor.
pub fn ablate(
    config: &TrainConfig,
    subsets: &[TermMask],
    train: &[DatasetRecord],
    eval: &[DatasetRecord],
    segnet: Option<&SegNet>,
    extractor: &dyn FeatureExtractor,
) -> Result<AblationTable> {
    let real = extractor.extract(&eval.iter().map(|r| r.image.clone()).collect::<Vec<_>>())?;
    let vocabulary = train
        .first()
        .map(|r| r.layout.vocabulary.clone())
        .ok_or_else(|| crate::Error::Dataset("no training records".into()))?;
    let mut rows = Vec::with_capacity(subsets.len());
    for mask in subsets {
        let mut cfg = config.clone();
        cfg.terms = *mask;
        let mut t = Trainer::new(cfg, vocabulary.clone())?;
        t.run_phase(1, train)?;
        if let Some(s) = segnet {
            t.set_segnet(copy_segnet(s)?);
            t.run_phase(2, train)?;
        }
        let fake = eval
            .iter()
            .map(|r| t.models.generator.generate(&r.layout))
            .collect::<Result<Vec<_>>>()?;
        let fid = fid_from_features(&real, &extractor.extract(&fake)?)?;
        let final_image_loss = t.epochs.last().map_or(f64::NAN, |e| e.image);
        log::info!("ablation {}: FID {fid:.4}", mask.label());
        rows.push(AblationRow {
            terms: mask.label(),
            mask: *mask,
            steps: t.step,
            final_image_loss,
            fid,
        });
    }
    Ok(AblationTable { rows })
}
