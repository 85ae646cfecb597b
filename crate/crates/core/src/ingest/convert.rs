//! Converters from challenge array dumps to the dataset directory format.
//!
//! CoNiC: `images.npy` `(N, H, W, 3)` uint8 and `labels.npy` `(N, H, W, 2)`
//! with instance ids in channel 0 and classes 1..=6 in channel 1.
//!
//! PanNuke: `images.npy` `(N, H, W, 3)` and `masks.npy` `(N, H, W, 6)`,
//! one instance map per type (neoplastic, inflammatory, connective, dead,
//! epithelial) plus background in the last channel.

use std::path::Path;
use std::str::FromStr;

use super::dataset::{write_record, write_vocabulary};
use super::npy::NpyFile;
use crate::error::{Error, Result};
use crate::io::Raster;
use crate::layout::{Vocabulary, PANNUKE_TYPES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Conic,
    Pannuke,
}

impl FromStr for SourceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "conic" => Ok(Self::Conic),
            "pannuke" => Ok(Self::Pannuke),
            other => Err(Error::Config(format!("unknown format {other:?} (conic, pannuke)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvertOptions {
    pub split: String,
    /// Every `k`-th record goes to the `test` split instead.
    pub test_every: Option<usize>,
    pub limit: Option<usize>,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        Self {
            split: "train".into(),
            test_every: None,
            limit: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConvertReport {
    pub written: usize,
    pub skipped: Vec<String>,
}

pub fn convert(format: SourceFormat, input: &Path, out: &Path, opts: &ConvertOptions) -> Result<ConvertReport> {
    let (vocab, masks_file) = match format {
        SourceFormat::Conic => (Vocabulary::conic(), "labels.npy"),
        SourceFormat::Pannuke => (Vocabulary::new(&PANNUKE_TYPES)?, "masks.npy"),
    };
    let mut images = NpyFile::open(input.join("images.npy"))?;
    let mut masks = NpyFile::open(input.join(masks_file))?;
    let (n, h, w) = match images.shape[..] {
        [n, h, w, 3] => (n, h, w),
        ref s => return Err(Error::Dataset(format!("images.npy has shape {s:?}, expected (N, H, W, 3)"))),
    };
    let want_c = match format {
        SourceFormat::Conic => 2,
        SourceFormat::Pannuke => 6,
    };
    if masks.shape != [n, h, w, want_c] {
        return Err(Error::Dataset(format!(
            "{masks_file} has shape {:?}, expected ({n}, {h}, {w}, {want_c})",
            masks.shape
        )));
    }
    write_vocabulary(out, &vocab)?;
    let mut report = ConvertReport::default();
    for i in 0..opts.limit.map_or(n, |l| l.min(n)) {
        let name = format!("{i:05}");
        let img = images.read_slice(i)?;
        let raw = masks.read_slice(i)?;
        let (instance, class) = match format {
            SourceFormat::Conic => split_conic(&raw),
            SourceFormat::Pannuke => split_pannuke(&raw, vocab.len()),
        };
        let raster = Raster {
            width: w as u32,
            height: h as u32,
            channels: 3,
            data: img.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect(),
        };
        let split = match opts.test_every {
            Some(k) if k > 0 && i % k == k - 1 => "test",
            _ => opts.split.as_str(),
        };
        match write_record(out, split, &name, &raster, &instance, &class) {
            Ok(()) => report.written += 1,
            Err(Error::Dataset(msg)) => {
                log::warn!("record {name} skipped: {msg}");
                report.skipped.push(format!("{name}: {msg}"));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

fn split_conic(raw: &[f64]) -> (Vec<u32>, Vec<u8>) {
    raw.chunks_exact(2)
        .map(|p| (p[0].max(0.0) as u32, p[1].max(0.0) as u8))
        .unzip()
}

/// Merges per-type instance channels; an id is unique per `(type, id)`.
fn split_pannuke(raw: &[f64], types: usize) -> (Vec<u32>, Vec<u8>) {
    let mut ids = std::collections::BTreeMap::new();
    raw.chunks_exact(types + 1)
        .map(|p| {
            for (t, &v) in p[..types].iter().enumerate() {
                if v > 0.0 {
                    let next = ids.len() as u32 + 1;
                    let id = *ids.entry((t, v as u64)).or_insert(next);
                    return (id, t as u8 + 1);
                }
            }
            (0, 0)
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::dataset::Dataset;
    use crate::ingest::npy::write_npy;

    #[test]
    fn conic_arrays_convert_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let (n, h, w) = (3, 8, 8);
        let img: Vec<u8> = (0..n * h * w * 3).map(|i| (i % 251) as u8).collect();
        let mut labels = vec![0i32; n * h * w * 2];
        // One 2x2 nucleus of class 6 in record 1.
        for (y, x) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            let base = ((h * w) + y * w + x) * 2;
            labels[base] = 12;
            labels[base + 1] = 6;
        }
        let lb: Vec<u8> = labels.iter().flat_map(|v| v.to_le_bytes()).collect();
        write_npy(dir.path().join("images.npy"), "|u1", &[n, h, w, 3], &img).unwrap();
        write_npy(dir.path().join("labels.npy"), "<i4", &[n, h, w, 2], &lb).unwrap();
        let out = dir.path().join("out");
        let report = convert(SourceFormat::Conic, dir.path(), &out, &ConvertOptions::default()).unwrap();
        assert_eq!(report.written, 3);
        let ds = Dataset::open(&out, "train").unwrap();
        let rec = ds.load(1).unwrap();
        assert_eq!(rec.layout.len(), 1);
        assert_eq!(ds.vocabulary.name(rec.layout.cells[0].cell_type), Some("connective"));
    }

    #[test]
    fn pannuke_channels_become_classes() {
        let raw = [0.0, 0.0, 0.0, 0.0, 3.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let (inst, class) = split_pannuke(&raw, 5);
        assert_eq!(class, vec![5, 1]);
        assert_eq!(inst, vec![1, 2]);
    }

    #[test]
    fn format_parses() {
        assert_eq!("PanNuke".parse::<SourceFormat>().unwrap(), SourceFormat::Pannuke);
        assert!("monuseg".parse::<SourceFormat>().is_err());
    }
}
