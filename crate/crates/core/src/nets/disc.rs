//! Image (patch) and cellular discriminators. Both return raw logits.

use rand_chacha::ChaCha8Rng;
use synclay_autograd::ops::Conv2dGeometry;
use synclay_autograd::{ParamStore, Var};

use super::layers::{expect_input, instance_norm, BatchNorm, Conv, Ctx, Linear, LEAKY_SLOPE};
use crate::error::Result;

pub const IMAGE_DISC_WIDTHS: [usize; 5] = [16, 32, 64, 128, 256];
pub const CELL_CROP_SIZE: usize = 64;

/// Patch discriminator: `[N, 3, 256, 256]` to `[N, 1, 7, 7]` logits.
#[derive(Debug)]
pub struct ImageDiscriminator {
    pub params: ParamStore,
    convs: Vec<Conv>,
    head: Conv,
}

impl ImageDiscriminator {
    pub fn new(rng: &mut ChaCha8Rng) -> Self {
        let mut params = ParamStore::new("disc_img");
        let mut cin = 3;
        let convs = IMAGE_DISC_WIDTHS
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let conv = Conv::new(&mut params, &format!("conv{i}"), cin, c, Conv2dGeometry::new(4, 2, 1), rng);
                cin = c;
                conv
            })
            .collect();
        let head = Conv::new(&mut params, "head", cin, 1, Conv2dGeometry::new(4, 1, 1), rng);
        Self { params, convs, head }
    }

    pub fn forward_traced<'t>(&self, ctx: &Ctx<'t>, image: Var<'t>, mut trace: impl FnMut(&Var<'t>)) -> Result<Var<'t>> {
        expect_input("disc_img", &image, 3, None)?;
        let s = image.shape();
        if s[2] < 64 || s[3] < 64 {
            return Err(crate::error::Error::Shape(format!(
                "disc_img: input {}x{} is smaller than 64x64",
                s[2], s[3]
            )));
        }
        let mut h = image;
        for (i, conv) in self.convs.iter().enumerate() {
            h = conv.forward(ctx, &self.params, h);
            trace(&h);
            h = h.leaky_relu(LEAKY_SLOPE);
            trace(&h);
            if i > 0 {
                h = instance_norm(h);
                trace(&h);
            }
        }
        let out = self.head.forward(ctx, &self.params, h);
        trace(&out);
        Ok(out)
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t>, image: Var<'t>) -> Result<Var<'t>> {
        self.forward_traced(ctx, image, |_| {})
    }
}

/// Cellular discriminator: `[n, 3, 64, 64]` crops to `[n, 1]` logits.
#[derive(Debug)]
pub struct CellDiscriminator {
    pub params: ParamStore,
    convs: [Conv; 3],
    norms: [BatchNorm; 2],
    fc1: Linear,
    fc2: Linear,
}

impl CellDiscriminator {
    pub fn new(rng: &mut ChaCha8Rng) -> Self {
        let mut params = ParamStore::new("disc_cell");
        let g = Conv2dGeometry::new(5, 2, 0);
        let convs = [
            Conv::new(&mut params, "conv0", 3, 16, g, rng),
            Conv::new(&mut params, "conv1", 16, 32, g, rng),
            Conv::new(&mut params, "conv2", 32, 64, g, rng),
        ];
        let norms = [
            BatchNorm::new(&mut params, "bn0", 16),
            BatchNorm::new(&mut params, "bn1", 32),
        ];
        let fc1 = Linear::new(&mut params, "fc1", 64, 1024, rng);
        let fc2 = Linear::new(&mut params, "fc2", 1024, 1, rng);
        Self {
            params,
            convs,
            norms,
            fc1,
            fc2,
        }
    }

    pub fn convs(&self) -> &[Conv; 3] {
        &self.convs
    }

    pub fn linears(&self) -> [&Linear; 2] {
        [&self.fc1, &self.fc2]
    }

    pub fn forward_traced<'t>(&self, ctx: &Ctx<'t>, crops: Var<'t>, mut trace: impl FnMut(&Var<'t>)) -> Result<Var<'t>> {
        expect_input("disc_cell", &crops, 3, Some((CELL_CROP_SIZE, CELL_CROP_SIZE)))?;
        let mut h = crops;
        for (i, conv) in self.convs.iter().enumerate() {
            h = conv.forward(ctx, &self.params, h);
            trace(&h);
            if let Some(bn) = self.norms.get(i) {
                h = bn.forward(ctx, &self.params, h);
                trace(&h);
            }
            h = h.leaky_relu(LEAKY_SLOPE);
            trace(&h);
        }
        h = h.global_avg_pool();
        trace(&h);
        h = self.fc1.forward(ctx, &self.params, h);
        trace(&h);
        h = self.fc2.forward(ctx, &self.params, h);
        trace(&h);
        Ok(h)
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t>, crops: Var<'t>) -> Result<Var<'t>> {
        self.forward_traced(ctx, crops, |_| {})
    }
}
