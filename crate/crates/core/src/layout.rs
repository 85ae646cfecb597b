//! Cellular layouts: typed cells at normalized locations on a pixel canvas.
//!
//! Locations use a top-left origin with `y` growing downward. Cell order is
//! canonical: every per-cell array in the pipeline (boxes, masks,
//! embeddings) is indexed by insertion order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use synclay_autograd::ops::BoxRegion;

use crate::error::{Error, Result};

pub const NOISE_DIM: usize = 4;
pub const LAYOUT_VERSION: u32 = 1;

/// CoNiC nuclei vocabulary; class id `k + 1` in dataset masks is `CONIC_TYPES[k]`.
pub const CONIC_TYPES: [&str; 6] = [
    "neutrophil",
    "epithelial",
    "lymphocyte",
    "plasma",
    "eosinophil",
    "connective",
];

/// PanNuke nuclei vocabulary in its channel order.
pub const PANNUKE_TYPES: [&str; 5] = [
    "neoplastic",
    "inflammatory",
    "connective",
    "dead",
    "epithelial",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellType {
    pub id: usize,
    pub name: String,
}

/// Ordered, duplicate-free list of cell type names; ids are positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
}

impl Vocabulary {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Vocabulary("at least one cell type is required".into()));
        }
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::Vocabulary(format!("type {i} has an empty name")));
            }
            if names[..i].contains(n) {
                return Err(Error::Vocabulary(format!("duplicate type {n:?}")));
            }
        }
        Ok(Self { names })
    }

    pub fn conic() -> Self {
        Self::new(&CONIC_TYPES).expect("static vocabulary")
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

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, id: usize) -> Option<CellType> {
        self.name(id).map(|n| CellType {
            id,
            name: n.to_string(),
        })
    }

    pub fn types(&self) -> impl Iterator<Item = CellType> + '_ {
        self.names.iter().enumerate().map(|(id, n)| CellType {
            id,
            name: n.clone(),
        })
    }

    /// Length of a cell vector: one-hot type, location, noise.
    pub fn cell_vector_len(&self) -> usize {
        self.len() + 2 + NOISE_DIM
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

impl Canvas {
    pub fn square(side: u32) -> Self {
        Self {
            width: side,
            height: side,
        }
    }
}

impl Default for Canvas {
    fn default() -> Self {
        Self::square(256)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Index into the layout's vocabulary.
    pub cell_type: usize,
    pub x: f64,
    pub y: f64,
    pub noise: [f64; NOISE_DIM],
    pub width: u32,
    pub height: u32,
    /// Seed the noise was drawn from, when it came from one.
    pub seed: Option<u64>,
}

impl Cell {
    /// A cell whose noise is derived from `seed`.
    pub fn seeded(cell_type: usize, x: f64, y: f64, width: u32, height: u32, seed: u64) -> Self {
        Self {
            cell_type,
            x,
            y,
            noise: sample_noise(seed),
            width,
            height,
            seed: Some(seed),
        }
    }

    pub fn with_noise(
        cell_type: usize,
        x: f64,
        y: f64,
        width: u32,
        height: u32,
        noise: [f64; NOISE_DIM],
    ) -> Self {
        Self {
            cell_type,
            x,
            y,
            noise,
            width,
            height,
            seed: None,
        }
    }
}

/// Inclusive-exclusive pixel box `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BoundingBox {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    /// True when the interiors overlap; shared edges do not count.
    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn region(&self) -> BoxRegion {
        BoxRegion {
            x0: self.x0 as usize,
            y0: self.y0 as usize,
            x1: self.x1 as usize,
            y1: self.y1 as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellularLayout {
    pub canvas: Canvas,
    pub vocabulary: Vocabulary,
    pub cells: Vec<Cell>,
}

impl CellularLayout {
    pub fn new(canvas: Canvas, vocabulary: Vocabulary) -> Self {
        Self {
            canvas,
            vocabulary,
            cells: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Checks every cell against the vocabulary and canvas.
    pub fn validate(&self) -> Result<()> {
        if self.canvas.width == 0 || self.canvas.height == 0 {
            return Err(Error::layout("canvas", "canvas must be non-empty"));
        }
        for (i, c) in self.cells.iter().enumerate() {
            let at = |field: &str| format!("cells[{i}].{field}");
            if c.cell_type >= self.vocabulary.len() {
                return Err(Error::layout(at("type"), format!("unknown type id {}", c.cell_type)));
            }
            if !(0.0..=1.0).contains(&c.x) {
                return Err(Error::layout(at("x"), format!("{} outside [0, 1]", c.x)));
            }
            if !(0.0..=1.0).contains(&c.y) {
                return Err(Error::layout(at("y"), format!("{} outside [0, 1]", c.y)));
            }
            if c.width == 0 || c.width > self.canvas.width {
                return Err(Error::layout(at("w"), format!("width {} outside 1..={}", c.width, self.canvas.width)));
            }
            if c.height == 0 || c.height > self.canvas.height {
                return Err(Error::layout(at("h"), format!("height {} outside 1..={}", c.height, self.canvas.height)));
            }
            if c.noise.iter().any(|v| !v.is_finite()) {
                return Err(Error::layout(at("noise"), "non-finite noise"));
            }
        }
        Ok(())
    }

    pub fn bounding_boxes(&self) -> Result<Vec<BoundingBox>> {
        self.cells
            .iter()
            .map(|c| compute_bbox(c, self.canvas))
            .collect()
    }

    /// Per-type cell counts in vocabulary order.
    pub fn type_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.vocabulary.len()];
        for c in &self.cells {
            counts[c.cell_type] += 1;
        }
        counts
    }

    /// Row-major `[n, |vocab| + 6]` matrix of cell vectors.
    pub fn cell_vectors(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len() * self.vocabulary.cell_vector_len());
        for c in &self.cells {
            out.extend(build_cell_vector(c, &self.vocabulary)?);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> LayoutJson {
        LayoutJson {
            version: LAYOUT_VERSION,
            canvas: self.canvas,
            types: self.vocabulary.names().to_vec(),
            cells: self
                .cells
                .iter()
                .map(|c| CellJson {
                    cell_type: self.vocabulary.names()[c.cell_type].clone(),
                    x: c.x,
                    y: c.y,
                    w: c.width,
                    h: c.height,
                    seed: c.seed,
                })
                .collect(),
        }
    }

    /// Compact JSON in schema field order.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("layout serializes")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_json_str<R: Rng + ?Sized>(text: &str, rng: &mut R) -> Result<Self> {
        let doc: LayoutJson = serde_json::from_str(text)
            .map_err(|e| Error::layout(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        doc.into_layout(rng)
    }
}

/// Wire form of a layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutJson {
    pub version: u32,
    pub canvas: Canvas,
    pub types: Vec<String>,
    pub cells: Vec<CellJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellJson {
    #[serde(rename = "type")]
    pub cell_type: String,
    pub x: f64,
    pub y: f64,
    pub w: u32,
    pub h: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl LayoutJson {
    /// Validates and resolves noise: seeded cells use their seed, the rest
    /// draw from `rng` in cell order.
    pub fn into_layout<R: Rng + ?Sized>(self, rng: &mut R) -> Result<CellularLayout> {
        if self.version != LAYOUT_VERSION {
            return Err(Error::layout("version", format!("unsupported version {}", self.version)));
        }
        let vocabulary = Vocabulary::new(&self.types).map_err(|e| Error::layout("types", e.to_string()))?;
        let mut layout = CellularLayout::new(self.canvas, vocabulary);
        for (i, c) in self.cells.into_iter().enumerate() {
            let ty = layout
                .vocabulary
                .id(&c.cell_type)
                .ok_or_else(|| Error::layout(format!("cells[{i}].type"), format!("unknown type {:?}", c.cell_type)))?;
            let noise = match c.seed {
                Some(s) => sample_noise(s),
                None => draw_noise(rng),
            };
            layout.cells.push(Cell {
                cell_type: ty,
                x: c.x,
                y: c.y,
                noise,
                width: c.w,
                height: c.h,
                seed: c.seed,
            });
        }
        layout.validate()?;
        Ok(layout)
    }
}

fn check_location(x: f64, y: f64) -> std::result::Result<(), String> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(format!("location ({x}, {y}) outside [0, 1]"));
    }
    Ok(())
}

/// `[one-hot(type) | x, y | noise]`.
pub fn build_cell_vector(cell: &Cell, vocabulary: &Vocabulary) -> Result<Vec<f64>> {
    if cell.cell_type >= vocabulary.len() {
        return Err(Error::Vocabulary(format!(
            "type id {} not in a vocabulary of {}",
            cell.cell_type,
            vocabulary.len()
        )));
    }
    check_location(cell.x, cell.y).map_err(Error::Geometry)?;
    let mut v = vec![0.0; vocabulary.cell_vector_len()];
    v[cell.cell_type] = 1.0;
    let k = vocabulary.len();
    v[k] = cell.x;
    v[k + 1] = cell.y;
    v[k + 2..].copy_from_slice(&cell.noise);
    Ok(v)
}

/// Four standard-normal draws, fixed by `seed`.
pub fn sample_noise(seed: u64) -> [f64; NOISE_DIM] {
    draw_noise(&mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn draw_noise<R: Rng + ?Sized>(rng: &mut R) -> [f64; NOISE_DIM] {
    std::array::from_fn(|_| rng.sample(StandardNormal))
}

/// Box of the cell's size centred on its location, clipped to the canvas.
pub fn compute_bbox(cell: &Cell, canvas: Canvas) -> Result<BoundingBox> {
    check_location(cell.x, cell.y).map_err(Error::Geometry)?;
    if cell.width == 0 || cell.height == 0 {
        return Err(Error::Geometry("cell size must be positive".into()));
    }
    if cell.width > canvas.width || cell.height > canvas.height {
        return Err(Error::Geometry(format!(
            "cell size {}x{} exceeds canvas {}x{}",
            cell.width, cell.height, canvas.width, canvas.height
        )));
    }
    let axis = |centre: f64, size: u32, limit: u32| -> (u32, u32) {
        let start = (centre - size as f64 / 2.0 + 0.5 + 1e-9).floor() as i64;
        let end = start + size as i64;
        let lo = start.clamp(0, limit as i64 - 1);
        let hi = end.clamp(lo + 1, limit as i64);
        (lo as u32, hi as u32)
    };
    let (x0, x1) = axis(cell.x * canvas.width as f64, cell.width, canvas.width);
    let (y0, y1) = axis(cell.y * canvas.height as f64, cell.height, canvas.height);
    Ok(BoundingBox { x0, y0, x1, y1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(ty: usize, x: f64, y: f64, w: u32, h: u32) -> Cell {
        Cell::with_noise(ty, x, y, w, h, [0.0; 4])
    }

    #[test]
    fn cell_vector_layout() {
        let v = build_cell_vector(&cell(0, 0.5, 0.5, 10, 10), &Vocabulary::conic()).unwrap();
        assert_eq!(v, [1., 0., 0., 0., 0., 0., 0.5, 0.5, 0., 0., 0., 0.]);
        assert_eq!(v.len(), 12);
    }

    #[test]
    fn cell_vector_rejects_out_of_range() {
        let vocab = Vocabulary::conic();
        assert!(build_cell_vector(&cell(0, 1.2, 0.5, 10, 10), &vocab).is_err());
        assert!(matches!(
            build_cell_vector(&cell(6, 0.5, 0.5, 10, 10), &vocab),
            Err(Error::Vocabulary(_))
        ));
    }

    #[test]
    fn noise_is_seeded() {
        assert_eq!(sample_noise(7), sample_noise(7));
        assert_ne!(sample_noise(7), sample_noise(8));
        assert_eq!(sample_noise(1).len(), NOISE_DIM);
    }

    #[test]
    fn noise_moments() {
        let n = 100_000u64;
        let mut sum = [0.0; 4];
        let mut sq = [0.0; 4];
        for s in 0..n {
            for (k, v) in sample_noise(s).iter().enumerate() {
                sum[k] += v;
                sq[k] += v * v;
            }
        }
        for k in 0..4 {
            let mean = sum[k] / n as f64;
            let var = sq[k] / n as f64 - mean * mean;
            assert!(mean.abs() < 0.02, "mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "var {var}");
        }
    }

    #[test]
    fn bbox_centre_and_clip() {
        let canvas = Canvas::square(256);
        let b = compute_bbox(&cell(0, 0.5, 0.5, 32, 32), canvas).unwrap();
        assert_eq!(b, BoundingBox { x0: 112, y0: 112, x1: 144, y1: 144 });
        let b = compute_bbox(&cell(0, 0.0, 0.0, 32, 32), canvas).unwrap();
        assert_eq!(b, BoundingBox { x0: 0, y0: 0, x1: 16, y1: 16 });
        let b = compute_bbox(&cell(0, 1.0, 1.0, 32, 32), canvas).unwrap();
        assert_eq!(b, BoundingBox { x0: 240, y0: 240, x1: 256, y1: 256 });
        assert!(compute_bbox(&cell(0, 0.5, 0.5, 300, 300), canvas).is_err());
    }

    #[test]
    fn bbox_recovers_pixel_square() {
        // A 10x10 square starting at pixel 40 has centroid 44.5.
        let canvas = Canvas::square(256);
        let c = cell(1, 44.5 / 256.0, 44.5 / 256.0, 10, 10);
        let b = compute_bbox(&c, canvas).unwrap();
        assert_eq!(b, BoundingBox { x0: 40, y0: 40, x1: 50, y1: 50 });
    }

    #[test]
    fn json_matches_wire_format() {
        let text = r#"{"version":1,"canvas":{"width":256,"height":256},"types":["neutrophil","epithelial","lymphocyte","plasma","eosinophil","connective"],"cells":[{"type":"lymphocyte","x":0.41,"y":0.73,"w":14,"h":15,"seed":12345}]}"#;
        let layout = CellularLayout::from_json_str(text, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(layout.cells[0].cell_type, 2);
        assert_eq!(layout.cells[0].noise, sample_noise(12345));
        assert_eq!(layout.to_canonical_json(), text);
    }

    #[test]
    fn json_without_seed_draws_from_run_rng() {
        let text = r#"{"version":1,"canvas":{"width":64,"height":64},"types":["a"],"cells":[{"type":"a","x":0.5,"y":0.5,"w":4,"h":4}]}"#;
        let a = CellularLayout::from_json_str(text, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = CellularLayout::from_json_str(text, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.cells[0].noise, b.cells[0].noise);
        assert!(!a.to_canonical_json().contains("seed"));
    }

    #[test]
    fn json_errors_name_the_field() {
        let bad = r#"{"version":1,"canvas":{"width":64,"height":64},"types":["a"],"cells":[{"type":"b","x":0.5,"y":0.5,"w":4,"h":4}]}"#;
        let err = CellularLayout::from_json_str(bad, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(err.to_string().contains("cells[0].type"), "{err}");
        let bad = bad.replace("\"b\"", "\"a\"").replace("0.5,\"y\"", "1.5,\"y\"");
        let err = CellularLayout::from_json_str(&bad, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(err.to_string().contains("cells[0]"), "{err}");
    }

    #[test]
    fn vocabulary_rules() {
        assert!(Vocabulary::new::<&str>(&[]).is_err());
        assert!(Vocabulary::new(&["a", "a"]).is_err());
        assert_eq!(Vocabulary::conic().id("connective"), Some(5));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn clipped_boxes_are_valid(x in 0.0f64..=1.0, y in 0.0f64..=1.0, w in 1u32..=256, h in 1u32..=256) {
                let canvas = Canvas::square(256);
                let b = compute_bbox(&cell(0, x, y, w, h), canvas).unwrap();
                prop_assert!(b.x0 < b.x1 && b.x1 <= 256);
                prop_assert!(b.y0 < b.y1 && b.y1 <= 256);
                prop_assert!(b.width() <= w && b.height() <= h);
            }

            #[test]
            fn cell_vector_is_injective(
                t1 in 0usize..6, t2 in 0usize..6,
                x1 in 0.0f64..=1.0, y1 in 0.0f64..=1.0, x2 in 0.0f64..=1.0, y2 in 0.0f64..=1.0,
            ) {
                let vocab = Vocabulary::conic();
                let a = build_cell_vector(&cell(t1, x1, y1, 5, 5), &vocab).unwrap();
                let b = build_cell_vector(&cell(t2, x2, y2, 5, 5), &vocab).unwrap();
                prop_assert_eq!(a == b, (t1, x1, y1) == (t2, x2, y2));
            }
        }
    }
}
