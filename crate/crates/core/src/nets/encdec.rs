//! Encoder-decoder image generator with skip connections.
//!
//! For an `S x S` input there are `log2 S` encode blocks down to `1 x 1` and
//! `log2 S - 1` decode blocks; decode block `j` is concatenated with the
//! encoder map of the same size. A final nearest upsample and `4 x 4`
//! convolution produce the RGB image.

use rand_chacha::ChaCha8Rng;
use synclay_autograd::ops::{Conv2dGeometry, Padding};
use synclay_autograd::{ParamStore, Var};

use super::layers::{expect_input, instance_norm, Conv, ConvTranspose, Ctx, LEAKY_SLOPE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EncDecConfig {
    pub in_channels: usize,
    pub image_size: usize,
    pub base_channels: usize,
    pub max_channels: usize,
    pub dropout: f64,
    /// Innermost encode and decode blocks that apply dropout.
    pub dropout_blocks: usize,
}

impl Default for EncDecConfig {
    fn default() -> Self {
        Self {
            in_channels: 32,
            image_size: 256,
            base_channels: 64,
            max_channels: 512,
            dropout: 0.5,
            dropout_blocks: 3,
        }
    }
}

impl EncDecConfig {
    pub fn levels(&self) -> usize {
        self.image_size.trailing_zeros() as usize
    }

    /// Output channels of encode block `i` (0-based).
    pub fn channels(&self, i: usize) -> usize {
        (self.base_channels << i.min(16)).min(self.max_channels)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.image_size.is_power_of_two() || self.image_size < 4 {
            return Err(Error::Config(format!(
                "image size {} must be a power of two >= 4",
                self.image_size
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Encode {
    conv: Conv,
    norm: bool,
    dropout: bool,
}

#[derive(Debug, Clone, Copy)]
struct Decode {
    conv: ConvTranspose,
    dropout: bool,
}

#[derive(Debug)]
pub struct EncoderDecoder {
    pub params: ParamStore,
    pub config: EncDecConfig,
    encode: Vec<Encode>,
    decode: Vec<Decode>,
    head: Conv,
}

impl EncoderDecoder {
    pub fn new(config: EncDecConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new("encdec");
        let l = config.levels();
        let down = Conv2dGeometry::new(4, 2, 1);
        let inner = |i: usize, count: usize| i + config.dropout_blocks >= count;
        let mut encode = Vec::with_capacity(l);
        let mut cin = config.in_channels;
        for i in 0..l {
            let cout = config.channels(i);
            encode.push(Encode {
                conv: Conv::new(&mut params, &format!("enc{i}"), cin, cout, down, rng),
                norm: i != 0 && i != l - 1,
                dropout: config.dropout > 0.0 && inner(i, l),
            });
            cin = cout;
        }
        let mut decode = Vec::with_capacity(l - 1);
        for j in 0..l - 1 {
            let cout = config.channels(l - 2 - j);
            decode.push(Decode {
                conv: ConvTranspose::new(&mut params, &format!("dec{j}"), cin, cout, down, rng),
                dropout: config.dropout > 0.0 && j < config.dropout_blocks,
            });
            cin = 2 * cout;
        }
        let same4 = Padding {
            top: 2,
            bottom: 1,
            left: 2,
            right: 1,
        };
        let head = Conv::new(&mut params, "head", cin, 3, Conv2dGeometry::with_padding(4, 1, same4), rng);
        Ok(Self {
            params,
            config,
            encode,
            decode,
            head,
        })
    }

    /// `[1, C, S, S]` to a `[1, 3, S, S]` image in `[-1, 1]`. `trace` sees
    /// every block output in order: encodes, decodes (after concatenation),
    /// upsample, conv, tanh.
    pub fn forward_traced<'t>(&self, ctx: &Ctx<'t>, x: Var<'t>, mut trace: impl FnMut(&Var<'t>)) -> Result<Var<'t>> {
        let s = self.config.image_size;
        expect_input("encdec", &x, self.config.in_channels, Some((s, s)))?;
        let mut skips = Vec::with_capacity(self.encode.len());
        let mut h = x;
        for e in &self.encode {
            h = e.conv.forward(ctx, &self.params, h);
            if e.norm {
                h = instance_norm(h);
            }
            h = h.leaky_relu(LEAKY_SLOPE);
            if e.dropout {
                h = ctx.dropout(h, self.config.dropout);
            }
            trace(&h);
            skips.push(h);
        }
        skips.pop();
        for d in &self.decode {
            h = instance_norm(d.conv.forward(ctx, &self.params, h)).relu();
            if d.dropout {
                h = ctx.dropout(h, self.config.dropout);
            }
            let skip = skips.pop().expect("one skip per decode block");
            h = Var::concat_channels(&[h, skip]);
            trace(&h);
        }
        h = h.upsample_nearest(2);
        trace(&h);
        h = self.head.forward(ctx, &self.params, h);
        trace(&h);
        h = h.tanh();
        trace(&h);
        Ok(h)
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t>, x: Var<'t>) -> Result<Var<'t>> {
        self.forward_traced(ctx, x, |_| {})
    }
}
