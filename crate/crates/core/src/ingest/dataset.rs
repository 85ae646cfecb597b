//! On-disk dataset splits and training records.
//!
//! ```text
//! <root>/types.json            optional vocabulary, CoNiC when absent
//! <root>/<split>/images/*.png  RGB tiles
//! <root>/<split>/masks/*.png   16-bit: low byte class, high byte instance
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synclay_autograd::Tensor;

use super::extract::{extract_layout_from_mask, splitmix64, Extraction};
use super::SizeStatistics;
use crate::error::{Error, Result};
use crate::io::{self, Raster};
use crate::layout::{CellularLayout, Vocabulary};

pub const TYPES_FILE: &str = "types.json";
/// Instance ids must fit the high byte of a mask pixel.
pub const MAX_INSTANCES: usize = 255;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub id: String,
    /// `[1, 3, H, W]` in `[-1, 1]`.
    pub image: Tensor,
    pub instance_mask: Vec<u32>,
    pub class_mask: Vec<u8>,
    pub layout: CellularLayout,
    /// Binary `64 x 64` masks in layout order.
    pub cell_masks: Vec<Vec<u8>>,
}

impl DatasetRecord {
    /// Builds a record from an image and masks, extracting the layout.
    pub fn from_parts(
        id: impl Into<String>,
        image: &Raster,
        instance_mask: Vec<u32>,
        class_mask: Vec<u8>,
        vocabulary: &Vocabulary,
    ) -> Result<Self> {
        let id = id.into();
        let (w, h) = (image.width as usize, image.height as usize);
        if instance_mask.len() != w * h || class_mask.len() != w * h {
            return Err(Error::Shape(format!(
                "record {id}: image is {w}x{h} but masks have {} pixels",
                instance_mask.len()
            )));
        }
        let fg_inst = instance_mask.iter().map(|&v| v != 0);
        let fg_class = class_mask.iter().map(|&v| v != 0);
        if fg_inst.zip(fg_class).any(|(a, b)| a != b) {
            log::debug!("record {id}: instance and class foreground differ");
        }
        let Extraction {
            layout,
            cell_masks,
            skipped,
        } = extract_layout_from_mask(&instance_mask, &class_mask, w, h, vocabulary, seed_for(&id))?;
        if !skipped.is_empty() {
            log::warn!("record {id}: skipped {} instances", skipped.len());
        }
        Ok(Self {
            id,
            image: io::rgb_to_tensor(image),
            instance_mask,
            class_mask,
            layout,
            cell_masks,
        })
    }

    pub fn width(&self) -> usize {
        self.layout.canvas.width as usize
    }

    pub fn height(&self) -> usize {
        self.layout.canvas.height as usize
    }

    /// Per-type counts of extracted cells, vocabulary order.
    pub fn composition(&self) -> Vec<usize> {
        self.layout.type_counts()
    }

    /// Cell masks as a `[n, 1, 64, 64]` tensor.
    pub fn cell_mask_tensor(&self) -> Tensor {
        let n = self.cell_masks.len();
        let data = self.cell_masks.iter().flatten().map(|&v| v as f64).collect();
        Tensor::new(&[n, 1, 64, 64], data)
    }
}

/// Stable per-record noise seed from its id.
fn seed_for(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        splitmix64((h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
    })
}

/// One split of a dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub split: String,
    pub vocabulary: Vocabulary,
    names: Vec<String>,
}

impl Dataset {
    pub fn open(root: impl AsRef<Path>, split: &str) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let dir = root.join(split);
        let images = dir.join("images");
        if !images.is_dir() || !dir.join("masks").is_dir() {
            return Err(Error::Dataset(format!(
                "split {split:?} not found under {} (expected images/ and masks/)",
                root.display()
            )));
        }
        let vocabulary = read_vocabulary(&root)?;
        let mut names: Vec<String> = fs::read_dir(&images)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let p = e.path();
                (p.extension()? == "png").then(|| p.file_stem()?.to_str().map(str::to_string))?
            })
            .collect();
        names.sort();
        Ok(Self {
            root,
            split: split.to_string(),
            vocabulary,
            names,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn image_path(&self, name: &str) -> PathBuf {
        self.root.join(&self.split).join("images").join(format!("{name}.png"))
    }

    pub fn mask_path(&self, name: &str) -> PathBuf {
        self.root.join(&self.split).join("masks").join(format!("{name}.png"))
    }

    /// Loads record `index` in name order. Failures carry the file path.
    pub fn load(&self, index: usize) -> Result<DatasetRecord> {
        let name = &self.names[index];
        let ip = self.image_path(name);
        let mp = self.mask_path(name);
        let image = io::decode_rgb(&io::read_file(&ip)?).map_err(|e| Error::record(&ip, e.to_string()))?;
        let (mw, mh, packed) =
            io::decode_gray16(&io::read_file(&mp)?).map_err(|e| Error::record(&mp, e.to_string()))?;
        if (mw, mh) != (image.width, image.height) {
            return Err(Error::record(
                &mp,
                format!("mask is {mw}x{mh} but image is {}x{}", image.width, image.height),
            ));
        }
        let (instance, class) = unpack_mask(&packed);
        DatasetRecord::from_parts(name.clone(), &image, instance, class, &self.vocabulary)
            .map_err(|e| Error::record(&mp, e.to_string()))
    }

    /// Record indices in the shuffled order of epoch `seed`.
    pub fn epoch_order(&self, seed: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        order
    }

    pub fn iter_epoch(&self, seed: u64) -> impl Iterator<Item = Result<DatasetRecord>> + '_ {
        self.epoch_order(seed).into_iter().map(move |i| self.load(i))
    }

    /// Every record in name order, failing on the first bad one.
    pub fn load_all(&self) -> Result<Vec<DatasetRecord>> {
        (0..self.len()).map(|i| self.load(i)).collect()
    }

    pub fn size_statistics(&self) -> Result<SizeStatistics> {
        size_statistics(&self.load_all()?)
    }
}

pub fn size_statistics(records: &[DatasetRecord]) -> Result<SizeStatistics> {
    SizeStatistics::from_layouts(records.iter().map(|r| &r.layout))
}

pub fn read_vocabulary(root: &Path) -> Result<Vocabulary> {
    let path = root.join(TYPES_FILE);
    if !path.exists() {
        return Ok(Vocabulary::conic());
    }
    let names: Vec<String> = serde_json::from_slice(&fs::read(&path)?)?;
    Vocabulary::new(&names)
}

pub fn write_vocabulary(root: &Path, vocabulary: &Vocabulary) -> Result<()> {
    fs::create_dir_all(root)?;
    fs::write(root.join(TYPES_FILE), serde_json::to_vec(vocabulary.names())?)?;
    Ok(())
}

/// Splits packed mask pixels into instance and class planes.
pub fn unpack_mask(packed: &[u16]) -> (Vec<u32>, Vec<u8>) {
    packed.iter().map(|&v| ((v >> 8) as u32, (v & 0xFF) as u8)).unzip()
}

/// Packs instance and class planes, relabelling instances compactly in
/// order of first appearance. Fails when more than 255 instances remain.
pub fn pack_mask(instance: &[u32], class: &[u8]) -> Result<Vec<u16>> {
    let mut remap: BTreeMap<u32, u16> = BTreeMap::new();
    let mut out = Vec::with_capacity(instance.len());
    for (&i, &c) in instance.iter().zip(class) {
        let id = if i == 0 {
            0
        } else {
            let next = remap.len() as u16 + 1;
            *remap.entry(i).or_insert(next)
        };
        if id as usize > MAX_INSTANCES {
            return Err(Error::Dataset(format!(
                "more than {MAX_INSTANCES} instances do not fit the mask format"
            )));
        }
        out.push((id << 8) | c as u16);
    }
    Ok(out)
}

/// Writes one record into `<root>/<split>/{images,masks}/<name>.png`.
pub fn write_record(root: &Path, split: &str, name: &str, image: &Raster, instance: &[u32], class: &[u8]) -> Result<()> {
    let packed = pack_mask(instance, class)?;
    let dir = root.join(split);
    fs::create_dir_all(dir.join("images"))?;
    fs::create_dir_all(dir.join("masks"))?;
    fs::write(
        dir.join("images").join(format!("{name}.png")),
        io::encode_rgb(image.width, image.height, &image.data)?,
    )?;
    fs::write(
        dir.join("masks").join(format!("{name}.png")),
        io::encode_gray16(image.width, image.height, &packed)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_relabels_compactly() {
        let packed = pack_mask(&[0, 900, 900, 7], &[0, 3, 3, 1]).unwrap();
        assert_eq!(packed, vec![0, (1 << 8) | 3, (1 << 8) | 3, (2 << 8) | 1]);
        assert_eq!(unpack_mask(&packed), (vec![0, 1, 1, 2], vec![0, 3, 3, 1]));
    }

    #[test]
    fn pack_rejects_too_many_instances() {
        let inst: Vec<u32> = (1..=256).collect();
        assert!(pack_mask(&inst, &vec![1; 256]).is_err());
    }

    #[test]
    fn missing_split_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(Dataset::open(dir.path(), "train"), Err(Error::Dataset(_))));
    }

    #[test]
    fn record_seed_depends_on_id() {
        assert_ne!(seed_for("a"), seed_for("b"));
        assert_eq!(seed_for("tile_001"), seed_for("tile_001"));
    }
}
