//! Mask generator: a latent embedding grown into a soft `64 x 64` mask.

use rand_chacha::ChaCha8Rng;
use synclay_autograd::ops::Conv2dGeometry;
use synclay_autograd::{ParamStore, Var};

use super::layers::{BatchNorm, Conv, Ctx};
use crate::error::{Error, Result};

/// Doubling blocks; `2^6 = 64`.
pub const MASK_BLOCKS: usize = 6;

#[derive(Debug)]
pub struct MaskGenerator {
    pub params: ParamStore,
    blocks: Vec<(Conv, BatchNorm)>,
    head: Conv,
    dim: usize,
}

impl MaskGenerator {
    pub fn new(dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self::with_blocks(dim, MASK_BLOCKS, rng)
    }

    pub fn with_blocks(dim: usize, blocks: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut params = ParamStore::new("maskgen");
        let blocks = (0..blocks)
            .map(|i| {
                let conv = Conv::new(&mut params, &format!("block{i}.conv"), dim, dim, Conv2dGeometry::new(3, 1, 1), rng);
                let bn = BatchNorm::new(&mut params, &format!("block{i}.bn"), dim);
                (conv, bn)
            })
            .collect();
        let head = Conv::new(&mut params, "head", dim, 1, Conv2dGeometry::new(1, 1, 0), rng);
        Self {
            params,
            blocks,
            head,
            dim,
        }
    }

    /// Side of the generated mask.
    pub fn mask_size(&self) -> usize {
        1 << self.blocks.len()
    }

    /// `[n, dim]` embeddings to `[n, 1, S, S]` masks in `(0, 1)`. Every
    /// intermediate feature map is passed to `trace`.
    pub fn forward_traced<'t>(
        &self,
        ctx: &Ctx<'t>,
        emb: Var<'t>,
        mut trace: impl FnMut(&Var<'t>),
    ) -> Result<Var<'t>> {
        let n = match emb.shape()[..] {
            [n, d] if d == self.dim => n,
            ref s => return Err(Error::Shape(format!("maskgen: expected [n, {}], got {s:?}", self.dim))),
        };
        let mut x = emb.reshape(&[n, self.dim, 1, 1]);
        trace(&x);
        for (conv, bn) in &self.blocks {
            x = x.upsample_nearest(2);
            trace(&x);
            x = conv.forward(ctx, &self.params, x);
            trace(&x);
            x = bn.forward(ctx, &self.params, x);
            trace(&x);
            x = x.relu();
            trace(&x);
        }
        let logits = self.head.forward(ctx, &self.params, x);
        trace(&logits);
        let out = logits.sigmoid();
        trace(&out);
        Ok(out)
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t>, emb: Var<'t>) -> Result<Var<'t>> {
        self.forward_traced(ctx, emb, |_| {})
    }
}
