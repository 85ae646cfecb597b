use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::CellularLayout;

/// Bounding-box size distribution of one cell type, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeSize {
    pub mean_w: f64,
    pub std_w: f64,
    pub mean_h: f64,
    pub std_h: f64,
    pub count: usize,
}

/// Per-type size statistics keyed by type name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SizeStatistics {
    pub by_type: BTreeMap<String, TypeSize>,
}

impl SizeStatistics {
    /// Population mean and standard deviation of box sizes over all cells.
    /// Types without cells are absent.
    pub fn from_layouts<'a>(layouts: impl IntoIterator<Item = &'a CellularLayout>) -> Result<Self> {
        #[derive(Default)]
        struct Acc {
            n: usize,
            w: f64,
            ww: f64,
            h: f64,
            hh: f64,
        }
        let mut acc: BTreeMap<String, Acc> = BTreeMap::new();
        let mut layouts_seen = 0;
        for layout in layouts {
            layouts_seen += 1;
            for c in &layout.cells {
                let name = layout.vocabulary.names()[c.cell_type].clone();
                let a = acc.entry(name).or_default();
                let (w, h) = (c.width as f64, c.height as f64);
                a.n += 1;
                a.w += w;
                a.ww += w * w;
                a.h += h;
                a.hh += h * h;
            }
        }
        if layouts_seen == 0 {
            return Err(Error::Dataset("size statistics need at least one record".into()));
        }
        let by_type = acc
            .into_iter()
            .map(|(name, a)| {
                let n = a.n as f64;
                let mean_w = a.w / n;
                let mean_h = a.h / n;
                let std_w = (a.ww / n - mean_w * mean_w).max(0.0).sqrt();
                let std_h = (a.hh / n - mean_h * mean_h).max(0.0).sqrt();
                (
                    name,
                    TypeSize {
                        mean_w,
                        std_w,
                        mean_h,
                        std_h,
                        count: a.n,
                    },
                )
            })
            .collect();
        Ok(Self { by_type })
    }

    pub fn get(&self, name: &str) -> Option<&TypeSize> {
        self.by_type.get(name)
    }

    /// Built-in nuclear sizes for the CoNiC vocabulary at 40x, used when no
    /// dataset statistics are available.
    pub fn conic_default() -> Self {
        let entry = |mw: f64, sw: f64, mh: f64, sh: f64| TypeSize {
            mean_w: mw,
            std_w: sw,
            mean_h: mh,
            std_h: sh,
            count: 0,
        };
        let by_type = [
            ("neutrophil", entry(11.0, 1.5, 11.0, 1.5)),
            ("epithelial", entry(11.0, 1.5, 10.0, 1.5)),
            ("lymphocyte", entry(10.0, 1.2, 10.0, 1.2)),
            ("plasma", entry(12.0, 1.5, 11.0, 1.5)),
            ("eosinophil", entry(12.0, 1.5, 12.0, 1.5)),
            ("connective", entry(14.0, 3.0, 8.0, 2.0)),
        ]
        .into_iter()
        .map(|(n, s)| (n.to_string(), s))
        .collect();
        Self { by_type }
    }
}
