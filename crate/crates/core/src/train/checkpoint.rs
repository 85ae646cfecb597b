//! Checkpoint bundles: one parameter blob per subnetwork plus a manifest.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use synclay_autograd::{Adam, ParamStore};

use super::losses::{LossWeights, TermMask};
use crate::error::{Error, Result};
use crate::layout::Vocabulary;
use crate::nets::layers::init_rng;
use crate::nets::{CellDiscriminator, Generator, ImageDiscriminator, NetConfig, SegNet, Variant};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BUNDLE_VERSION: u32 = 1;
pub const SUBNETS: [&str; 8] = [
    "embed",
    "gcn",
    "maskgen",
    "encdec",
    "chanreduce",
    "disc_img",
    "disc_cell",
    "segnet",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub dim: usize,
    pub vocabulary: Vec<String>,
    pub variant: Variant,
    pub net: NetConfig,
    pub weights: LossWeights,
    pub terms: TermMask,
    /// Last completed training phase (0 for an untrained or segnet-only
    /// bundle).
    pub phase: u8,
    pub epoch: usize,
    pub step: u64,
    pub seed: u64,
    /// Subnetworks present, each stored as `<name>.bin`.
    pub blobs: Vec<String>,
}

/// Every network of the framework. The segmentation network is optional
/// until it has been trained.
#[derive(Debug)]
pub struct Models {
    pub generator: Generator,
    pub disc_img: ImageDiscriminator,
    pub disc_cell: CellDiscriminator,
    pub segnet: Option<SegNet>,
}

impl Models {
    pub fn new(config: NetConfig, vocabulary: Vocabulary, seed: u64) -> Result<Self> {
        Ok(Self {
            generator: Generator::new(config, vocabulary, seed)?,
            disc_img: ImageDiscriminator::new(&mut init_rng(seed, 6)),
            disc_cell: CellDiscriminator::new(&mut init_rng(seed, 7)),
            segnet: None,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.generator.vocabulary
    }

    /// `(name, store)` for every subnetwork present.
    pub fn stores(&self) -> Vec<(&'static str, &ParamStore)> {
        let g = &self.generator;
        let mut v: Vec<(&'static str, &ParamStore)> = vec![("embed", &g.embed.params)];
        if let Some(gcn) = &g.gcn {
            v.push(("gcn", &gcn.params));
        }
        v.extend([
            ("maskgen", &g.maskgen.params),
            ("encdec", &g.encdec.params),
            ("chanreduce", &g.chanreduce.params),
            ("disc_img", &self.disc_img.params),
            ("disc_cell", &self.disc_cell.params),
        ]);
        if let Some(s) = &self.segnet {
            v.push(("segnet", &s.params));
        }
        v
    }

    fn store_mut(&mut self, name: &str) -> Option<&mut ParamStore> {
        let g = &mut self.generator;
        Some(match name {
            "embed" => &mut g.embed.params,
            "gcn" => &mut g.gcn.as_mut()?.params,
            "maskgen" => &mut g.maskgen.params,
            "encdec" => &mut g.encdec.params,
            "chanreduce" => &mut g.chanreduce.params,
            "disc_img" => &mut self.disc_img.params,
            "disc_cell" => &mut self.disc_cell.params,
            "segnet" => &mut self.segnet.as_mut()?.params,
            _ => return None,
        })
    }
}

/// Training position and settings recorded alongside the weights.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BundleInfo {
    pub weights: LossWeights,
    pub terms: TermMask,
    pub phase: u8,
    pub epoch: usize,
    pub step: u64,
    pub seed: u64,
}

pub fn save_bundle(dir: &Path, models: &Models, info: &BundleInfo) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut blobs = Vec::new();
    for (name, store) in models.stores() {
        store.save(dir.join(format!("{name}.bin")))?;
        blobs.push(name.to_string());
    }
    let g = &models.generator;
    let manifest = Manifest {
        version: BUNDLE_VERSION,
        dim: g.config.dim,
        vocabulary: g.vocabulary.names().to_vec(),
        variant: g.config.variant,
        net: g.config,
        weights: info.weights,
        terms: info.terms,
        phase: info.phase,
        epoch: info.epoch,
        step: info.step,
        seed: info.seed,
        blobs,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if m.version != BUNDLE_VERSION {
        return Err(Error::Checkpoint(format!("unsupported bundle version {}", m.version)));
    }
    Ok(m)
}

pub fn load_bundle(dir: &Path) -> Result<(Models, Manifest)> {
    let m = read_manifest(dir)?;
    let vocabulary = Vocabulary::new(&m.vocabulary)?;
    let mut models = Models::new(m.net, vocabulary.clone(), m.seed)?;
    if m.blobs.iter().any(|b| b == "segnet") {
        models.segnet = Some(SegNet::new(vocabulary.len() + 1, &mut init_rng(0, 8)));
    }
    for name in &m.blobs {
        let store = models
            .store_mut(name)
            .ok_or_else(|| Error::Checkpoint(format!("manifest lists unexpected blob {name:?}")))?;
        store
            .load(dir.join(format!("{name}.bin")))
            .map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
    }
    if let Some(s) = &mut models.segnet {
        s.params.freeze();
    }
    Ok((models, m))
}

/// Writes a standalone segmentation checkpoint (`segnet.bin` and a
/// manifest naming the vocabulary).
pub fn save_segnet(dir: &Path, segnet: &SegNet, vocabulary: &Vocabulary) -> Result<()> {
    fs::create_dir_all(dir)?;
    segnet.params.save(dir.join("segnet.bin"))?;
    fs::write(dir.join("segnet.json"), serde_json::to_string_pretty(vocabulary.names())?)?;
    Ok(())
}

/// Loads a frozen segmentation network from a directory holding
/// `segnet.bin` (a standalone checkpoint or a full bundle).
pub fn load_segnet(dir: &Path, vocabulary: &Vocabulary) -> Result<SegNet> {
    let path = dir.join("segnet.bin");
    if !path.exists() {
        return Err(Error::Checkpoint(format!("no segnet.bin in {}", dir.display())));
    }
    let mut s = SegNet::new(vocabulary.len() + 1, &mut init_rng(0, 8));
    s.params
        .load(&path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    s.params.freeze();
    Ok(s)
}

/// Content id of a bundle: SHA-256 over the manifest and blobs, hex,
/// truncated to 16 characters.
pub fn checkpoint_id(dir: &Path) -> Result<String> {
    let m = read_manifest(dir)?;
    let mut h = Sha256::new();
    h.update(fs::read(dir.join(MANIFEST_FILE))?);
    for b in &m.blobs {
        h.update(fs::read(dir.join(format!("{b}.bin")))?);
    }
    let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok(hex[..16].to_string())
}

/// Saves optimizer state in store order.
pub fn save_optimizers(path: &Path, opts: &[(&str, &Adam)]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (name, opt) in opts {
        writeln!(w, "{name}")?;
        opt.write_to(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_optimizers(path: &Path, opts: &mut [(&str, &mut Adam)]) -> Result<()> {
    let mut r = BufReader::new(fs::File::open(path)?);
    for (name, opt) in opts.iter_mut() {
        let mut line = String::new();
        std::io::BufRead::read_line(&mut r, &mut line)?;
        if line.trim_end() != *name {
            return Err(Error::Checkpoint(format!(
                "optimizer state for {name:?} expected, found {:?}",
                line.trim_end()
            )));
        }
        opt.read_from(&mut r)?;
    }
    Ok(())
}
