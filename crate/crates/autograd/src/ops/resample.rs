//! Bilinear resampling between a fixed-size grid and axis-aligned boxes.
//!
//! Coordinates follow the half-pixel convention (`align_corners = false`):
//! output index `i` of a length-`out` axis samples source coordinate
//! `(i + 0.5) * in / out - 0.5`, clamped below at zero, with the upper
//! neighbour clamped to the last source index.

use crate::tape::Var;
use crate::tensor::Tensor;

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxRegion {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoxRegion {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    fn check(&self, h: usize, w: usize) {
        assert!(
            self.x0 < self.x1 && self.y0 < self.y1 && self.x1 <= w && self.y1 <= h,
            "box {self:?} invalid for a {h}x{w} canvas"
        );
    }
}

/// How overlapping boxes combine when composed onto a canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Overlap {
    #[default]
    Sum,
    Max,
}

/// Two-neighbour interpolation weights for one output index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResizeTap {
    pub i0: usize,
    pub i1: usize,
    pub w0: f64,
    pub w1: f64,
}

pub fn resize_taps(out_len: usize, in_len: usize) -> Vec<ResizeTap> {
    assert!(out_len > 0 && in_len > 0, "resize of an empty axis");
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|i| {
            let src = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(in_len - 1);
            let i1 = (i0 + 1).min(in_len - 1);
            let lambda = src - i0 as f64;
            ResizeTap {
                i0,
                i1,
                w0: 1.0 - lambda,
                w1: lambda,
            }
        })
        .collect()
}

/// Visits every `(source offset, weight)` pair feeding output pixel `(y, x)`.
#[inline]
fn for_taps(ty: &ResizeTap, tx: &ResizeTap, src_w: usize, mut f: impl FnMut(usize, f64)) {
    f(ty.i0 * src_w + tx.i0, ty.w0 * tx.w0);
    f(ty.i0 * src_w + tx.i1, ty.w0 * tx.w1);
    f(ty.i1 * src_w + tx.i0, ty.w1 * tx.w0);
    f(ty.i1 * src_w + tx.i1, ty.w1 * tx.w1);
}

impl<'t> Var<'t> {
    /// Resamples each item of `self: [N, D, h, w]` into its box on a
    /// `D x canvas_h x canvas_w` canvas and combines overlaps. Returns
    /// `[1, D, canvas_h, canvas_w]`; pixels outside every box are zero.
    pub fn compose_boxes(
        self,
        boxes: &[BoxRegion],
        canvas: (usize, usize),
        overlap: Overlap,
    ) -> Var<'t> {
        let src = self.value();
        let (n, d, h, w) = src.dims4();
        assert_eq!(n, boxes.len(), "compose_boxes: one box per item");
        let (ch, cw) = canvas;
        for b in boxes {
            b.check(ch, cw);
        }
        let boxes = boxes.to_vec();
        let taps: Vec<(Vec<ResizeTap>, Vec<ResizeTap>)> = boxes
            .iter()
            .map(|b| (resize_taps(b.height(), h), resize_taps(b.width(), w)))
            .collect();
        let plane = ch * cw;
        let mut out = vec![0.0; d * plane];
        let mut winner = match overlap {
            Overlap::Sum => Vec::new(),
            Overlap::Max => vec![u32::MAX; d * plane],
        };
        for (k, (b, (ty, tx))) in boxes.iter().zip(&taps).enumerate() {
            for ch_i in 0..d {
                let s = &src.data()[(k * d + ch_i) * h * w..(k * d + ch_i + 1) * h * w];
                for (yy, tyy) in ty.iter().enumerate() {
                    for (xx, txx) in tx.iter().enumerate() {
                        let mut v = 0.0;
                        for_taps(tyy, txx, w, |off, wt| v += wt * s[off]);
                        let o = ch_i * plane + (b.y0 + yy) * cw + b.x0 + xx;
                        match overlap {
                            Overlap::Sum => out[o] += v,
                            Overlap::Max => {
                                if winner[o] == u32::MAX || v > out[o] {
                                    out[o] = v;
                                    winner[o] = k as u32;
                                }
                            }
                        }
                    }
                }
            }
        }
        self.tape
            .push_op(Tensor::new(&[1, d, ch, cw], out), &[self], move |g| {
                let mut ds = vec![0.0; n * d * h * w];
                for (k, (b, (ty, tx))) in boxes.iter().zip(&taps).enumerate() {
                    for ch_i in 0..d {
                        let dsk = &mut ds[(k * d + ch_i) * h * w..(k * d + ch_i + 1) * h * w];
                        for (yy, tyy) in ty.iter().enumerate() {
                            for (xx, txx) in tx.iter().enumerate() {
                                let o = ch_i * plane + (b.y0 + yy) * cw + b.x0 + xx;
                                if overlap == Overlap::Max && winner[o] != k as u32 {
                                    continue;
                                }
                                let gv = g.data()[o];
                                for_taps(tyy, txx, w, |off, wt| dsk[off] += wt * gv);
                            }
                        }
                    }
                }
                vec![Some(Tensor::new(&[n, d, h, w], ds))]
            })
    }

    /// Crops each box out of `self: [1, C, H, W]` and bilinearly resizes it to
    /// `out_h x out_w`. Returns `[boxes, C, out_h, out_w]`.
    pub fn crop_resize(self, boxes: &[BoxRegion], out: (usize, usize)) -> Var<'t> {
        let img = self.value();
        let (one, c, h, w) = img.dims4();
        assert_eq!(one, 1, "crop_resize expects a single image");
        for b in boxes {
            b.check(h, w);
        }
        let (oh, ow) = out;
        let boxes = boxes.to_vec();
        let taps: Vec<(Vec<ResizeTap>, Vec<ResizeTap>)> = boxes
            .iter()
            .map(|b| (resize_taps(oh, b.height()), resize_taps(ow, b.width())))
            .collect();
        let n = boxes.len();
        let mut data = vec![0.0; n * c * oh * ow];
        for (k, (b, (ty, tx))) in boxes.iter().zip(&taps).enumerate() {
            for ci in 0..c {
                let base = ci * h * w + b.y0 * w + b.x0;
                let dst = &mut data[(k * c + ci) * oh * ow..(k * c + ci + 1) * oh * ow];
                for (i, tyy) in ty.iter().enumerate() {
                    for (j, txx) in tx.iter().enumerate() {
                        let mut v = 0.0;
                        for_taps(tyy, txx, w, |off, wt| v += wt * img.data()[base + off]);
                        dst[i * ow + j] = v;
                    }
                }
            }
        }
        self.tape
            .push_op(Tensor::new(&[n, c, oh, ow], data), &[self], move |g| {
                let mut dimg = vec![0.0; c * h * w];
                for (k, (b, (ty, tx))) in boxes.iter().zip(&taps).enumerate() {
                    for ci in 0..c {
                        let base = ci * h * w + b.y0 * w + b.x0;
                        let gk = &g.data()[(k * c + ci) * oh * ow..(k * c + ci + 1) * oh * ow];
                        for (i, tyy) in ty.iter().enumerate() {
                            for (j, txx) in tx.iter().enumerate() {
                                let gv = gk[i * ow + j];
                                for_taps(tyy, txx, w, |off, wt| dimg[base + off] += wt * gv);
                            }
                        }
                    }
                }
                vec![Some(Tensor::new(&[1, c, h, w], dimg))]
            })
    }
}
