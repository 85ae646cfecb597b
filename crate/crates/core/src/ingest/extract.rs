//! Instance/class masks to layouts and per-cell ground-truth masks.

use synclay_autograd::ops::resize_taps;

use super::components::label_components;
use crate::error::{Error, Result};
use crate::layout::{Canvas, Cell, CellularLayout, Vocabulary};

/// Side of the per-cell mask frame.
pub const CELL_MASK_SIZE: usize = 64;

/// A layout extracted from masks, with one binary `64 x 64` mask per cell in
/// layout order (row-major, values 0 or 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub layout: CellularLayout,
    pub cell_masks: Vec<Vec<u8>>,
    /// Instances dropped, with the reason.
    pub skipped: Vec<String>,
}

struct Blob {
    area: usize,
    sum_x: f64,
    sum_y: f64,
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
    votes: Vec<usize>,
}

/// One cell per 8-connected region of equal, non-zero instance id.
///
/// Type is the majority non-zero class under the region (ties go to the
/// lower class), location the centroid of pixel centres (`i + 0.5`)
/// normalized by the canvas, size the tight box. Noise seeds are derived
/// from `seed_base` and the cell index so extraction is reproducible.
pub fn extract_layout_from_mask(
    instance_mask: &[u32],
    class_mask: &[u8],
    width: usize,
    height: usize,
    vocabulary: &Vocabulary,
    seed_base: u64,
) -> Result<Extraction> {
    let n = width * height;
    if instance_mask.len() != n || class_mask.len() != n {
        return Err(Error::Shape(format!(
            "masks have {} and {} pixels, expected {width}x{height}",
            instance_mask.len(),
            class_mask.len()
        )));
    }
    if let Some(&bad) = class_mask.iter().find(|&&c| c as usize > vocabulary.len()) {
        return Err(Error::Dataset(format!(
            "class label {bad} outside 0..={}",
            vocabulary.len()
        )));
    }
    let (labels, count) = label_components(instance_mask, width, height, |v| v != 0, |a, b| a == b);
    let mut blobs: Vec<Blob> = (0..count)
        .map(|_| Blob {
            area: 0,
            sum_x: 0.0,
            sum_y: 0.0,
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
            votes: vec![0; vocabulary.len() + 1],
        })
        .collect();
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if labels[i] == 0 {
                continue;
            }
            let b = &mut blobs[labels[i] as usize - 1];
            b.area += 1;
            b.sum_x += x as f64 + 0.5;
            b.sum_y += y as f64 + 0.5;
            b.x0 = b.x0.min(x);
            b.y0 = b.y0.min(y);
            b.x1 = b.x1.max(x + 1);
            b.y1 = b.y1.max(y + 1);
            b.votes[class_mask[i] as usize] += 1;
        }
    }

    let canvas = Canvas {
        width: width as u32,
        height: height as u32,
    };
    let mut layout = CellularLayout::new(canvas, vocabulary.clone());
    let mut cell_masks = Vec::new();
    let mut skipped = Vec::new();
    for (k, b) in blobs.iter().enumerate() {
        let label = (k + 1) as u32;
        if b.area == 0 {
            skipped.push(format!("component {label}: zero area"));
            continue;
        }
        let Some((class, _)) = b.votes[1..]
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        else {
            log::warn!("instance component {label} has no class label; skipped");
            skipped.push(format!("component {label}: no class label"));
            continue;
        };
        let seed = splitmix64(seed_base.wrapping_add(layout.len() as u64));
        let cell = Cell::seeded(
            class,
            b.sum_x / b.area as f64 / width as f64,
            b.sum_y / b.area as f64 / height as f64,
            (b.x1 - b.x0) as u32,
            (b.y1 - b.y0) as u32,
            seed,
        );
        let crop: Vec<f64> = (b.y0..b.y1)
            .flat_map(|y| (b.x0..b.x1).map(move |x| (y, x)))
            .map(|(y, x)| (labels[y * width + x] == label) as u8 as f64)
            .collect();
        cell_masks.push(resize_binary(&crop, b.x1 - b.x0, b.y1 - b.y0));
        layout.cells.push(cell);
    }
    Ok(Extraction {
        layout,
        cell_masks,
        skipped,
    })
}

/// Bilinear resize to `64 x 64` then threshold at 0.5.
pub fn resize_binary(src: &[f64], w: usize, h: usize) -> Vec<u8> {
    let tx = resize_taps(CELL_MASK_SIZE, w);
    let ty = resize_taps(CELL_MASK_SIZE, h);
    let mut out = Vec::with_capacity(CELL_MASK_SIZE * CELL_MASK_SIZE);
    for row in &ty {
        for col in &tx {
            let v = row.w0 * (col.w0 * src[row.i0 * w + col.i0] + col.w1 * src[row.i0 * w + col.i1])
                + row.w1 * (col.w0 * src[row.i1 * w + col.i0] + col.w1 * src[row.i1 * w + col.i1]);
            out.push((v >= 0.5) as u8);
        }
    }
    out
}

/// Paints each cell's box into instance (`k + 1`) and class (`type + 1`)
/// masks; later cells overwrite earlier ones.
pub fn render_box_masks(layout: &CellularLayout) -> Result<(Vec<u32>, Vec<u8>)> {
    let (w, h) = (layout.canvas.width as usize, layout.canvas.height as usize);
    let mut inst = vec![0u32; w * h];
    let mut class = vec![0u8; w * h];
    for (k, (c, b)) in layout.cells.iter().zip(layout.bounding_boxes()?).enumerate() {
        for y in b.y0 as usize..b.y1 as usize {
            for x in b.x0 as usize..b.x1 as usize {
                inst[y * w + x] = k as u32 + 1;
                class[y * w + x] = c.cell_type as u8 + 1;
            }
        }
    }
    Ok((inst, class))
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[allow(clippy::too_many_arguments)]
    fn square(x0: usize, y0: usize, side: usize, class: u8, id: u32, inst: &mut [u32], cls: &mut [u8], w: usize) {
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                inst[y * w + x] = id;
                cls[y * w + x] = class;
            }
        }
    }

    #[test]
    fn single_square() {
        let (w, h) = (256, 256);
        let (mut inst, mut cls) = (vec![0; w * h], vec![0; w * h]);
        square(40, 40, 10, 2, 1, &mut inst, &mut cls, w);
        let e = extract_layout_from_mask(&inst, &cls, w, h, &Vocabulary::conic(), 0).unwrap();
        assert_eq!(e.layout.len(), 1);
        let c = &e.layout.cells[0];
        assert_eq!(c.cell_type, 1);
        assert_eq!((c.x, c.y), (45.0 / 256.0, 45.0 / 256.0));
        assert_eq!((c.width, c.height), (10, 10));
        assert!(e.cell_masks[0].iter().all(|&v| v == 1));
    }

    #[test]
    fn empty_masks_give_empty_layout() {
        let e = extract_layout_from_mask(&[0; 16], &[0; 16], 4, 4, &Vocabulary::conic(), 0).unwrap();
        assert!(e.layout.is_empty() && e.cell_masks.is_empty());
    }

    #[test]
    fn majority_vote_and_missing_class() {
        let w = 8;
        let (mut inst, mut cls) = (vec![0; 64], vec![0; 64]);
        square(0, 0, 3, 4, 1, &mut inst, &mut cls, w);
        cls[0] = 2;
        square(5, 5, 2, 0, 2, &mut inst, &mut cls, w);
        let e = extract_layout_from_mask(&inst, &cls, w, 8, &Vocabulary::conic(), 0).unwrap();
        assert_eq!(e.layout.len(), 1);
        assert_eq!(e.layout.cells[0].cell_type, 3);
        assert_eq!(e.skipped.len(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        let v = Vocabulary::conic();
        assert!(extract_layout_from_mask(&[0; 3], &[0; 4], 2, 2, &v, 0).is_err());
        assert!(extract_layout_from_mask(&[1; 4], &[9; 4], 2, 2, &v, 0).is_err());
    }

    #[test]
    fn per_cell_mask_keeps_shape() {
        // A 2x4 box with its right half missing.
        let w = 4;
        let inst = [1, 1, 0, 0, 1, 1, 0, 0];
        let cls = [1, 1, 0, 0, 1, 1, 0, 0];
        let e = extract_layout_from_mask(&inst, &cls, w, 2, &Vocabulary::conic(), 0).unwrap();
        assert_eq!(e.layout.cells[0].width, 2);
        assert!(e.cell_masks[0].iter().all(|&v| v == 1));
    }

    #[test]
    fn extraction_is_reproducible() {
        let (w, h) = (32, 32);
        let (mut inst, mut cls) = (vec![0; w * h], vec![0; w * h]);
        square(3, 4, 5, 1, 7, &mut inst, &mut cls, w);
        square(20, 20, 6, 6, 3, &mut inst, &mut cls, w);
        let a = extract_layout_from_mask(&inst, &cls, w, h, &Vocabulary::conic(), 9).unwrap();
        let b = extract_layout_from_mask(&inst, &cls, w, h, &Vocabulary::conic(), 9).unwrap();
        assert_eq!(a, b);
    }
}
