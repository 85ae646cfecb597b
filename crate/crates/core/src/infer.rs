//! Layout to image-and-mask generation from a loaded checkpoint.

use std::path::Path;
use std::time::SystemTime;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::PairSource;
use crate::io;
use crate::layout::{CellularLayout, LayoutJson};
use crate::train::{checkpoint_id, load_bundle, Models};

/// Largest layout accepted for generation.
pub const MAX_CELLS: usize = 1024;

/// Enough to regenerate a pair bit-exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub checkpoint_id: String,
    pub seed: u64,
    pub layout_hash: String,
    /// RFC 3339, UTC.
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPair {
    pub width: u32,
    pub height: u32,
    pub image_png: Vec<u8>,
    /// Indexed PNG of class labels, 0 background.
    pub mask_png: Vec<u8>,
    pub provenance: Provenance,
}

impl GeneratedPair {
    /// Writes `image.png`, `mask.png` and `provenance.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("image.png"), &self.image_png)?;
        std::fs::write(dir.join("mask.png"), &self.mask_png)?;
        std::fs::write(dir.join("provenance.json"), serde_json::to_string_pretty(&self.provenance)?)?;
        Ok(())
    }
}

/// Validates a wire layout of at most [`MAX_CELLS`] cells; cells without a
/// seed draw their noise from `seed`.
pub fn resolve_layout(layout: LayoutJson, seed: u64) -> Result<CellularLayout> {
    if layout.cells.len() > MAX_CELLS {
        return Err(Error::Layout {
            path: "cells".into(),
            message: format!("{} cells exceeds the limit of {MAX_CELLS}", layout.cells.len()),
        });
    }
    layout.into_layout(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Immutable models plus the id of the checkpoint they came from.
#[derive(Debug)]
pub struct Engine {
    pub models: Models,
    pub checkpoint_id: String,
}

impl Engine {
    pub fn load(dir: &Path) -> Result<Self> {
        let (models, _) = load_bundle(dir)?;
        Ok(Self {
            models,
            checkpoint_id: checkpoint_id(dir)?,
        })
    }

    /// [`resolve_layout`], then rejects layouts the checkpoint cannot draw.
    pub fn resolve(&self, layout: LayoutJson, seed: u64) -> Result<CellularLayout> {
        let layout = resolve_layout(layout, seed)?;
        self.models.generator.check_layout(&layout)?;
        Ok(layout)
    }

    /// Image and class mask for a resolved layout. An empty layout gets an
    /// all-background mask.
    pub fn generate(&self, layout: &CellularLayout, seed: u64) -> Result<GeneratedPair> {
        let (image, mask) = if layout.is_empty() {
            let image = self.models.generator.generate(layout)?;
            let n = (layout.canvas.width * layout.canvas.height) as usize;
            (image, vec![0u8; n])
        } else {
            self.models.generate_pair(layout)?
        };
        let raster = io::tensor_to_rgb(&image)?;
        Ok(GeneratedPair {
            width: raster.width,
            height: raster.height,
            image_png: io::encode_rgb(raster.width, raster.height, &raster.data)?,
            mask_png: io::encode_class_mask(raster.width, raster.height, &mask)?,
            provenance: Provenance {
                checkpoint_id: self.checkpoint_id.clone(),
                seed,
                layout_hash: layout.content_hash(),
                timestamp: humantime::format_rfc3339_millis(SystemTime::now()).to_string(),
            },
        })
    }

    pub fn generate_json(&self, layout: LayoutJson, seed: u64) -> Result<GeneratedPair> {
        let layout = self.resolve(layout, seed)?;
        self.generate(&layout, seed)
    }
}
