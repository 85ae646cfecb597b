//! Compact U-shaped nuclear segmentation network.

use rand_chacha::ChaCha8Rng;
use synclay_autograd::ops::Conv2dGeometry;
use synclay_autograd::{ParamStore, Tape, Tensor, Var};

use super::layers::{expect_input, Conv, ConvTranspose, Ctx};
use crate::error::{Error, Result};

pub const SEGNET_WIDTHS: [usize; 4] = [16, 32, 64, 128];

#[derive(Debug)]
pub struct SegNet {
    pub params: ParamStore,
    stem: Conv,
    down: Vec<Conv>,
    up: Vec<ConvTranspose>,
    head: Conv,
    classes: usize,
}

impl SegNet {
    /// `classes` includes background.
    pub fn new(classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut params = ParamStore::new("segnet");
        let w = SEGNET_WIDTHS;
        let stem = Conv::new(&mut params, "stem", 3, w[0], Conv2dGeometry::new(3, 1, 1), rng);
        let mut widths = w.to_vec();
        widths.push(2 * w[3]);
        let down: Vec<Conv> = widths
            .windows(2)
            .enumerate()
            .map(|(i, p)| Conv::new(&mut params, &format!("down{i}"), p[0], p[1], Conv2dGeometry::new(4, 2, 1), rng))
            .collect();
        // up_j maps the current width to the skip width, then concatenates.
        let mut cin = widths[4];
        let up = (0..4)
            .map(|j| {
                let cout = w[3 - j];
                let t = ConvTranspose::new(&mut params, &format!("up{j}"), cin, cout, Conv2dGeometry::new(4, 2, 1), rng);
                cin = 2 * cout;
                t
            })
            .collect();
        let head = Conv::new(&mut params, "head", cin, classes, Conv2dGeometry::new(1, 1, 0), rng);
        Self {
            params,
            stem,
            down,
            up,
            head,
            classes,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// `[N, 3, H, W]` to `[N, classes, H, W]` logits; `H` and `W` must be
    /// multiples of 16.
    pub fn forward<'t>(&self, ctx: &Ctx<'t>, image: Var<'t>) -> Result<Var<'t>> {
        expect_input("segnet", &image, 3, None)?;
        let s = image.shape();
        if !s[2].is_multiple_of(16) || !s[3].is_multiple_of(16) || s[2] == 0 || s[3] == 0 {
            return Err(Error::Shape(format!("segnet: {}x{} is not a multiple of 16", s[2], s[3])));
        }
        let mut h = self.stem.forward(ctx, &self.params, image).relu();
        let mut skips = Vec::with_capacity(4);
        for d in &self.down {
            skips.push(h);
            h = d.forward(ctx, &self.params, h).relu();
        }
        for u in &self.up {
            h = u.forward(ctx, &self.params, h).relu();
            let skip = skips.pop().expect("skip per level");
            h = Var::concat_channels(&[h, skip]);
        }
        Ok(self.head.forward(ctx, &self.params, h))
    }

    /// Frozen inference: logits and the per-pixel argmax mask.
    pub fn segment(&self, image: &Tensor) -> Result<(Tensor, Vec<u8>)> {
        let tape = Tape::no_grad();
        let ctx = Ctx::eval(&tape);
        let logits = self.forward(&ctx, tape.constant(image.clone()))?.value();
        let mask = argmax_channels(&logits);
        Ok((logits, mask))
    }
}

/// Per-pixel argmax over the channel axis of a `[1, K, H, W]` tensor; ties
/// go to the lower class.
pub fn argmax_channels(logits: &Tensor) -> Vec<u8> {
    let (_, k, h, w) = logits.dims4();
    let plane = h * w;
    let d = logits.data();
    (0..plane)
        .map(|p| {
            let mut best = 0;
            for c in 1..k {
                if d[c * plane + p] > d[best * plane + p] {
                    best = c;
                }
            }
            best as u8
        })
        .collect()
}
