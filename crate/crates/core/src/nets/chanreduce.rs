//! Channel reducer: collapses the composed canvas to one channel for
//! visual inspection.

use rand_chacha::ChaCha8Rng;
use synclay_autograd::ops::Conv2dGeometry;
use synclay_autograd::{ParamStore, Var};

use super::layers::{expect_input, Conv, Ctx, LEAKY_SLOPE};
use crate::error::Result;

#[derive(Debug)]
pub struct ChannelReducer {
    pub params: ParamStore,
    convs: Vec<Conv>,
    inputs: usize,
}

impl ChannelReducer {
    /// Halves the channel count per layer down to 4, then maps to 1.
    pub fn new(inputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut params = ParamStore::new("chanreduce");
        let mut widths = vec![inputs];
        let mut c = inputs;
        while c / 2 >= 4 {
            c /= 2;
            widths.push(c);
        }
        widths.push(1);
        let convs = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Conv::new(&mut params, &format!("conv{i}"), w[0], w[1], Conv2dGeometry::new(3, 1, 1), rng))
            .collect();
        Self { params, convs, inputs }
    }

    pub fn convs(&self) -> &[Conv] {
        &self.convs
    }

    pub fn forward_traced<'t>(&self, ctx: &Ctx<'t>, x: Var<'t>, mut trace: impl FnMut(&Var<'t>)) -> Result<Var<'t>> {
        expect_input("chanreduce", &x, self.inputs, None)?;
        let mut h = x;
        for conv in &self.convs {
            h = conv.forward(ctx, &self.params, h);
            trace(&h);
            h = h.leaky_relu(LEAKY_SLOPE);
            trace(&h);
        }
        Ok(h)
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t>, x: Var<'t>) -> Result<Var<'t>> {
        self.forward_traced(ctx, x, |_| {})
    }
}
