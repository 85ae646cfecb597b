//! Bilinear warps between per-cell grids and canvas boxes.

use synclay_autograd::ops::{BoxRegion, Overlap};
use synclay_autograd::{Tensor, Var};

use crate::error::{Error, Result};
use crate::layout::BoundingBox;

fn regions(boxes: &[BoundingBox], canvas: (usize, usize)) -> Result<Vec<BoxRegion>> {
    let (h, w) = canvas;
    boxes
        .iter()
        .map(|b| {
            if b.x0 >= b.x1 || b.y0 >= b.y1 {
                Err(Error::Geometry(format!("degenerate box {b:?}")))
            } else if b.x1 as usize > w || b.y1 as usize > h {
                Err(Error::Geometry(format!("box {b:?} outside the {w}x{h} canvas")))
            } else {
                Ok(b.region())
            }
        })
        .collect()
}

/// Broadcasts each embedding over its mask and warps the result into its
/// box on a `D x H x W` canvas. `emb: [n, D]`, `masks: [n, 1, s, s]`;
/// returns `[1, D, H, W]`, zero outside every box.
pub fn compose_intermediate<'t>(
    emb: Var<'t>,
    masks: Var<'t>,
    boxes: &[BoundingBox],
    canvas: (usize, usize),
    overlap: Overlap,
) -> Result<Var<'t>> {
    let (n, d) = match emb.shape()[..] {
        [n, d] => (n, d),
        ref s => return Err(Error::Shape(format!("compose: embeddings {s:?}, expected [n, D]"))),
    };
    if boxes.len() != n || masks.shape().first() != Some(&n) {
        return Err(Error::Shape(format!(
            "compose: {n} embeddings, {} masks, {} boxes",
            masks.shape().first().copied().unwrap_or(0),
            boxes.len()
        )));
    }
    if n == 0 {
        return Ok(emb.tape().constant(Tensor::zeros(&[1, d, canvas.0, canvas.1])));
    }
    let regions = regions(boxes, canvas)?;
    Ok(emb.outer_spatial(masks).compose_boxes(&regions, canvas, overlap))
}

/// Crops each box out of `image: [1, C, H, W]` and resizes it to
/// `size x size`. Returns `[n, C, size, size]`.
pub fn crop_and_resize<'t>(image: Var<'t>, boxes: &[BoundingBox], size: usize) -> Result<Var<'t>> {
    let s = image.shape();
    let (h, w) = match s[..] {
        [1, _, h, w] => (h, w),
        _ => return Err(Error::Shape(format!("crop: expected [1, C, H, W], got {s:?}"))),
    };
    if boxes.is_empty() {
        return Err(Error::Geometry("crop: no boxes".into()));
    }
    let regions = regions(boxes, (h, w))?;
    Ok(image.crop_resize(&regions, (size, size)))
}
