//! Synthetic labelled tiles: coloured nuclei on a plain stained background.
//!
//! Every pixel's class and instance is known exactly, so fixtures stand in
//! for real data in tests, examples and smoke experiments.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::ingest::{write_record, write_vocabulary, DatasetRecord, SizeStatistics};
use crate::io::Raster;
use crate::layout::{compute_bbox, BoundingBox, Canvas, Cell, CellularLayout, Vocabulary};

const BACKGROUND: [u8; 3] = [232, 196, 214];
/// Nucleus colour per type index; cycles for larger vocabularies.
const NUCLEUS: [[u8; 3]; 6] = [
    [150, 30, 60],
    [70, 40, 140],
    [30, 20, 90],
    [120, 70, 160],
    [200, 60, 110],
    [90, 90, 60],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NucleusShape {
    Box,
    Ellipse,
}

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub size: u32,
    pub min_cells: usize,
    pub max_cells: usize,
    /// Relative frequency per type; uniform when `None`.
    pub type_weights: Option<Vec<f64>>,
    pub shape: NucleusShape,
    /// Peak amplitude of per-pixel intensity noise.
    pub noise: u8,
    pub seed: u64,
}

impl FixtureSpec {
    pub fn new(size: u32, seed: u64) -> Self {
        Self {
            size,
            min_cells: 2,
            max_cells: 8,
            type_weights: None,
            shape: NucleusShape::Ellipse,
            noise: 6,
            seed,
        }
    }
}

/// Raw parts of one fixture tile.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureTile {
    pub name: String,
    pub image: Raster,
    pub instance: Vec<u32>,
    pub class: Vec<u8>,
    /// The layout the tile was painted from.
    pub layout: CellularLayout,
}

impl FixtureTile {
    pub fn into_record(self, vocabulary: &Vocabulary) -> Result<DatasetRecord> {
        DatasetRecord::from_parts(self.name, &self.image, self.instance, self.class, vocabulary)
    }
}

/// Random non-overlapping cells with sizes from `sizes`.
pub fn random_layout(
    vocabulary: &Vocabulary,
    sizes: &SizeStatistics,
    canvas: Canvas,
    count: usize,
    weights: Option<&[f64]>,
    rng: &mut ChaCha8Rng,
) -> CellularLayout {
    let mut layout = CellularLayout::new(canvas, vocabulary.clone());
    let mut boxes: Vec<BoundingBox> = Vec::new();
    let cap = canvas.width.min(canvas.height).max(2) / 2;
    for _ in 0..count {
        let ty = pick_type(vocabulary.len(), weights, rng);
        let s = sizes.get(&vocabulary.names()[ty]).copied();
        let (mw, mh) = s.map_or((10.0, 10.0), |s| (s.mean_w, s.mean_h));
        for _ in 0..100 {
            let w = ((mw + rng.random_range(-2.0..=2.0)).round() as u32).clamp(3, cap);
            let h = ((mh + rng.random_range(-2.0..=2.0)).round() as u32).clamp(3, cap);
            let cell = Cell::seeded(ty, rng.random(), rng.random(), w, h, rng.random());
            let b = compute_bbox(&cell, canvas).expect("size fits canvas");
            // Keep boxes whole and separated by a pixel so instances stay apart.
            let whole = b.width() == w && b.height() == h;
            let apart = boxes.iter().all(|o| {
                b.x1 < o.x0 || o.x1 < b.x0 || b.y1 < o.y0 || o.y1 < b.y0
            });
            if whole && apart {
                boxes.push(b);
                layout.cells.push(cell);
                break;
            }
        }
    }
    layout
}

fn pick_type(n: usize, weights: Option<&[f64]>, rng: &mut ChaCha8Rng) -> usize {
    let Some(w) = weights else {
        return rng.random_range(0..n);
    };
    let total: f64 = w.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (i, &v) in w.iter().enumerate().take(n) {
        r -= v;
        if r < 0.0 {
            return i;
        }
    }
    n - 1
}

/// Paints a layout: nuclei fill their box (or its inscribed ellipse).
pub fn paint(layout: &CellularLayout, shape: NucleusShape, noise: u8, rng: &mut ChaCha8Rng) -> Result<(Raster, Vec<u32>, Vec<u8>)> {
    let (w, h) = (layout.canvas.width as usize, layout.canvas.height as usize);
    let mut instance = vec![0u32; w * h];
    let mut class = vec![0u8; w * h];
    let mut rgb = Vec::with_capacity(w * h * 3);
    for (k, (c, b)) in layout.cells.iter().zip(layout.bounding_boxes()?).enumerate() {
        let (cx, cy) = ((b.x0 + b.x1) as f64 / 2.0, (b.y0 + b.y1) as f64 / 2.0);
        let (rx, ry) = (b.width() as f64 / 2.0, b.height() as f64 / 2.0);
        for y in b.y0 as usize..b.y1 as usize {
            for x in b.x0 as usize..b.x1 as usize {
                let inside = match shape {
                    NucleusShape::Box => true,
                    NucleusShape::Ellipse => {
                        let u = (x as f64 + 0.5 - cx) / rx;
                        let v = (y as f64 + 0.5 - cy) / ry;
                        u * u + v * v <= 1.0
                    }
                };
                if inside {
                    instance[y * w + x] = k as u32 + 1;
                    class[y * w + x] = c.cell_type as u8 + 1;
                }
            }
        }
    }
    for &cl in &class {
        let base = if cl == 0 { BACKGROUND } else { NUCLEUS[(cl as usize - 1) % NUCLEUS.len()] };
        for ch in base {
            let jitter = if noise == 0 { 0 } else { rng.random_range(-(noise as i32)..=noise as i32) };
            rgb.push((ch as i32 + jitter).clamp(0, 255) as u8);
        }
    }
    let image = Raster {
        width: w as u32,
        height: h as u32,
        channels: 3,
        data: rgb,
    };
    Ok((image, instance, class))
}

/// `n` tiles drawn from `spec`, named `fx_00000`, `fx_00001`, ...
pub fn fixture_tiles(spec: &FixtureSpec, vocabulary: &Vocabulary, n: usize) -> Result<Vec<FixtureTile>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sizes = SizeStatistics::conic_default();
    let canvas = Canvas::square(spec.size);
    (0..n)
        .map(|i| {
            let count = rng.random_range(spec.min_cells..=spec.max_cells.max(spec.min_cells));
            let layout = random_layout(vocabulary, &sizes, canvas, count, spec.type_weights.as_deref(), &mut rng);
            let (image, instance, class) = paint(&layout, spec.shape, spec.noise, &mut rng)?;
            Ok(FixtureTile {
                name: format!("fx_{i:05}"),
                image,
                instance,
                class,
                layout,
            })
        })
        .collect()
}

pub fn fixture_records(spec: &FixtureSpec, vocabulary: &Vocabulary, n: usize) -> Result<Vec<DatasetRecord>> {
    fixture_tiles(spec, vocabulary, n)?
        .into_iter()
        .map(|t| t.into_record(vocabulary))
        .collect()
}

/// Writes `n` fixture tiles as a dataset split.
pub fn write_fixture_split(root: &Path, split: &str, spec: &FixtureSpec, vocabulary: &Vocabulary, n: usize) -> Result<()> {
    write_vocabulary(root, vocabulary)?;
    for t in fixture_tiles(spec, vocabulary, n)? {
        write_record(root, split, &t.name, &t.image, &t.instance, &t.class)?;
    }
    Ok(())
}
