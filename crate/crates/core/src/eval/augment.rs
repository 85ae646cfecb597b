//! Rebalancing a training set with generated tiles biased toward minority
//! cell types.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use synclay_autograd::Tensor;

use super::composition::CompositionSample;
use crate::error::{Error, Result};
use crate::ingest::{render_box_masks, write_record, Dataset};
use crate::io;
use crate::layout::{CellularLayout, Vocabulary};
use crate::synth::{Grade, LayoutParams, LayoutSynthesizer};
use crate::train::Models;

pub const MANIFEST_VERSION: u32 = 1;
pub const SYNTHETIC_SPLIT: &str = "synthetic";
/// Fresh seeds tried per requested image before it is skipped.
pub const GENERATION_ATTEMPTS: usize = 4;

/// Anything that turns a layout into an image and a class mask.
pub trait PairSource {
    fn generate_pair(&self, layout: &CellularLayout) -> Result<(Tensor, Vec<u8>)>;
}

/// The trained generator; the mask comes from the frozen segmentation
/// network when present, otherwise from the layout's boxes.
impl PairSource for Models {
    fn generate_pair(&self, layout: &CellularLayout) -> Result<(Tensor, Vec<u8>)> {
        let image = self.generator.generate(layout)?;
        let mask = match &self.segnet {
            Some(s) => s.segment(&image)?.1,
            None => render_box_masks(layout)?.1,
        };
        Ok((image, mask))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancePlan {
    /// Generated tiles to add.
    pub images: usize,
    pub image_size: u32,
    /// Cellularity per type; missing types get 0.
    pub cellularities: BTreeMap<String, f64>,
    /// Grades cycled over the generated tiles.
    pub grades: Vec<Grade>,
    pub seed: u64,
}

impl BalancePlan {
    /// High cellularity for `minority`, `background` for every other type.
    pub fn minority_biased(
        vocabulary: &Vocabulary,
        minority: &[&str],
        images: usize,
        image_size: u32,
        seed: u64,
    ) -> Result<Self> {
        let mut cellularities = BTreeMap::new();
        for name in vocabulary.names() {
            cellularities.insert(name.clone(), 0.05);
        }
        for m in minority {
            if vocabulary.id(m).is_none() {
                return Err(Error::Vocabulary(format!("unknown minority type {m:?}")));
            }
            cellularities.insert(m.to_string(), 0.6);
        }
        Ok(Self {
            images,
            image_size,
            cellularities,
            grades: vec![Grade::Normal, Grade::Low, Grade::High],
            seed,
        })
    }

    fn params(&self, index: usize, attempt: usize) -> LayoutParams {
        let grade = if self.grades.is_empty() {
            Grade::Normal
        } else {
            self.grades[index % self.grades.len()]
        };
        LayoutParams {
            grade,
            cellularities: self.cellularities.clone(),
            image_size: self.image_size,
            rng_seed: self
                .seed
                .wrapping_add((index * GENERATION_ATTEMPTS + attempt) as u64)
                .wrapping_mul(0x9E37_79B9_7F4A_7C15),
            ..LayoutParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    /// Per-type counts, vocabulary order.
    pub counts: Vec<usize>,
    pub synthetic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedImage {
    pub index: usize,
    pub reason: String,
}

/// Per-type cell totals and the number of tiles containing each type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub cells: Vec<usize>,
    pub samples: Vec<usize>,
    pub tiles: usize,
}

impl Distribution {
    pub fn of<'a>(k: usize, counts: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let mut d = Self {
            cells: vec![0; k],
            samples: vec![0; k],
            tiles: 0,
        };
        for c in counts {
            d.tiles += 1;
            for (t, &n) in c.iter().enumerate().take(k) {
                d.cells[t] += n;
                d.samples[t] += (n > 0) as usize;
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentManifest {
    pub version: u32,
    pub vocabulary: Vec<String>,
    pub entries: Vec<ManifestEntry>,
    pub before: Distribution,
    pub after: Distribution,
    pub skipped: Vec<SkippedImage>,
}

impl AugmentManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::record(path, e.to_string()))?;
        let mut m: Self = serde_json::from_str(&text).map_err(|e| Error::record(path, e.to_string()))?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::record(path, format!("unsupported manifest version {}", m.version)));
        }
        // Relative image paths resolve against the manifest's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut m.entries {
            if e.image.is_relative() {
                e.image = base.join(&e.image);
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn synthetic(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.synthetic)
    }

    /// Loads the images of the synthetic entries as training samples.
    pub fn synthetic_samples(&self) -> Result<Vec<CompositionSample>> {
        self.synthetic()
            .map(|e| {
                let r = io::decode_rgb(&io::read_file(&e.image)?).map_err(|err| Error::record(&e.image, err.to_string()))?;
                Ok(CompositionSample {
                    id: e.id.clone(),
                    image: io::rgb_to_tensor(&r),
                    counts: e.counts.iter().map(|&c| c as f64).collect(),
                    synthetic: true,
                })
            })
            .collect()
    }

    /// Before/after table of cell totals and tiles per type.
    pub fn distribution_markdown(&self) -> String {
        let mut s = String::from("| cell type | cells before | cells after | tiles before | tiles after |\n|---|---|---|---|---|\n");
        for (t, name) in self.vocabulary.iter().enumerate() {
            let _ = writeln!(
                s,
                "| {name} | {} | {} | {} | {} |",
                self.before.cells[t], self.after.cells[t], self.before.samples[t], self.after.samples[t]
            );
        }
        let _ = writeln!(s, "| tiles | {} | {} | | |", self.before.tiles, self.after.tiles);
        s
    }
}

/// Manifest entries of every record in a dataset split; counts come from
/// the class mask's connected components.
pub fn dataset_entries(dataset: &Dataset) -> Result<Vec<ManifestEntry>> {
    (0..dataset.len())
        .map(|i| {
            let rec = dataset.load(i)?;
            let s = CompositionSample::from_record(&rec);
            Ok(ManifestEntry {
                id: rec.id.clone(),
                image: dataset.image_path(&rec.id),
                counts: s.counts.iter().map(|&c| c as usize).collect(),
                synthetic: false,
            })
        })
        .collect()
}

pub fn sample_entry(s: &CompositionSample, image: PathBuf) -> ManifestEntry {
    ManifestEntry {
        id: s.id.clone(),
        image,
        counts: s.counts.iter().map(|&c| c as usize).collect(),
        synthetic: s.synthetic,
    }
}

#[derive(Debug, Clone)]
pub struct Augmentation {
    pub manifest: AugmentManifest,
    pub synthetic: Vec<CompositionSample>,
}

/// Appends `plan.images` generated tiles to `original`. Each tile is
/// labelled with the exact type counts of the layout it was generated
/// from. A tile whose layout cannot be synthesized or generated after
/// [`GENERATION_ATTEMPTS`] seeds is skipped and logged. With `out`, tiles
/// and masks are written to `<out>/synthetic/` and the manifest to
/// `<out>/manifest.json`, image paths relative to `out`.
pub fn balance_with_synthetic(
    original: &[ManifestEntry],
    source: &dyn PairSource,
    synthesizer: &LayoutSynthesizer,
    plan: &BalancePlan,
    out: Option<&Path>,
) -> Result<Augmentation> {
    let vocab = &synthesizer.vocabulary;
    let k = vocab.len();
    if let Some(bad) = original.iter().find(|e| e.counts.len() != k) {
        return Err(Error::Eval(format!("entry {} has {} counts for {k} types", bad.id, bad.counts.len())));
    }
    let mut entries = original.to_vec();
    let mut synthetic = Vec::new();
    let mut skipped = Vec::new();
    for i in 0..plan.images {
        let mut last = String::new();
        let mut made = None;
        for attempt in 0..GENERATION_ATTEMPTS {
            let attempt_result = synthesizer
                .synthesize(&plan.params(i, attempt))
                .and_then(|s| source.generate_pair(&s.layout).map(|p| (s.layout, p)));
            match attempt_result {
                Ok(v) => {
                    made = Some(v);
                    break;
                }
                Err(e) => last = e.to_string(),
            }
        }
        let Some((layout, (image, mask))) = made else {
            log::warn!("synthetic tile {i} skipped: {last}");
            skipped.push(SkippedImage { index: i, reason: last });
            continue;
        };
        let id = format!("synthetic_{i:05}");
        let sample = CompositionSample {
            id: id.clone(),
            image,
            counts: layout.type_counts().iter().map(|&c| c as f64).collect(),
            synthetic: true,
        };
        let rel = PathBuf::from(SYNTHETIC_SPLIT).join("images").join(format!("{id}.png"));
        if let Some(out) = out {
            let (instance, _) = render_box_masks(&layout)?;
            let raster = io::tensor_to_rgb(&sample.image)?;
            write_record(out, SYNTHETIC_SPLIT, &id, &raster, &instance, &mask)?;
            fs::write(
                out.join(SYNTHETIC_SPLIT).join(format!("{id}.layout.json")),
                layout.to_canonical_json(),
            )?;
        }
        entries.push(sample_entry(&sample, rel));
        synthetic.push(sample);
    }
    let before = Distribution::of(k, original.iter().map(|e| e.counts.as_slice()));
    let after = Distribution::of(k, entries.iter().map(|e| e.counts.as_slice()));
    let manifest = AugmentManifest {
        version: MANIFEST_VERSION,
        vocabulary: vocab.names().to_vec(),
        entries,
        before,
        after,
        skipped,
    };
    if let Some(out) = out {
        let mut on_disk = manifest.clone();
        for e in on_disk.entries.iter_mut().filter(|e| !e.synthetic) {
            if let Ok(abs) = e.image.canonicalize() {
                e.image = abs;
            }
        }
        on_disk.save(&out.join("manifest.json"))?;
    }
    Ok(Augmentation { manifest, synthetic })
}
