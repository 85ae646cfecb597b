//! The generative pathway: layout to embeddings, masks, composed canvas and
//! image.

use serde::{Deserialize, Serialize};
use synclay_autograd::ops::Overlap;
use synclay_autograd::{ParamStore, Tape, Tensor, Var};

use super::chanreduce::ChannelReducer;
use super::compose::compose_intermediate;
use super::embed::{CellEmbedder, GraphEmbedder, GCN_LAYERS};
use super::encdec::{EncDecConfig, EncoderDecoder};
use super::layers::{init_rng, Ctx};
use super::maskgen::{MaskGenerator, MASK_BLOCKS};
use crate::error::{Error, Result};
use crate::graph::delaunay_graph;
use crate::layout::{BoundingBox, CellularLayout, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Baseline,
    Gcn,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "gcn" => Ok(Self::Gcn),
            other => Err(Error::Config(format!("unknown variant {other:?} (baseline, gcn)"))),
        }
    }
}

/// How overlapping boxes combine on the composed canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    #[default]
    Sum,
    Max,
}

impl From<Combine> for Overlap {
    fn from(c: Combine) -> Self {
        match c {
            Combine::Sum => Overlap::Sum,
            Combine::Max => Overlap::Max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub dim: usize,
    pub image_size: usize,
    pub mask_blocks: usize,
    pub base_channels: usize,
    pub max_channels: usize,
    pub dropout: f64,
    pub dropout_blocks: usize,
    pub variant: Variant,
    pub gcn_layers: usize,
    pub combine: Combine,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            image_size: 256,
            mask_blocks: MASK_BLOCKS,
            base_channels: 64,
            max_channels: 512,
            dropout: 0.5,
            dropout_blocks: 3,
            variant: Variant::Baseline,
            gcn_layers: GCN_LAYERS,
            combine: Combine::Sum,
        }
    }
}

impl NetConfig {
    /// A reduced configuration for `size x size` tiles.
    pub fn small(size: usize) -> Self {
        Self {
            image_size: size,
            base_channels: 16,
            max_channels: 64,
            ..Self::default()
        }
    }

    pub fn encdec(&self) -> EncDecConfig {
        EncDecConfig {
            in_channels: self.dim,
            image_size: self.image_size,
            base_channels: self.base_channels,
            max_channels: self.max_channels,
            dropout: self.dropout,
            dropout_blocks: self.dropout_blocks,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embedding dim must be positive".into()));
        }
        if self.image_size < 64 {
            return Err(Error::Config(format!(
                "image size {} below the 64 px the discriminators need",
                self.image_size
            )));
        }
        self.encdec().validate()
    }
}

/// Tape values of one forward pass.
#[derive(Debug, Clone)]
pub struct GeneratorOutput<'t> {
    pub boxes: Vec<BoundingBox>,
    /// `[n, D]`, or `None` for an empty layout.
    pub embeddings: Option<Var<'t>>,
    /// `[n, 1, 64, 64]`.
    pub masks: Option<Var<'t>>,
    /// `[1, D, S, S]`.
    pub intermediate: Var<'t>,
    /// `[1, 3, S, S]` in `[-1, 1]`.
    pub image: Var<'t>,
}

#[derive(Debug)]
pub struct Generator {
    pub config: NetConfig,
    pub vocabulary: Vocabulary,
    pub embed: CellEmbedder,
    pub gcn: Option<GraphEmbedder>,
    pub maskgen: MaskGenerator,
    pub encdec: EncoderDecoder,
    pub chanreduce: ChannelReducer,
}

impl Generator {
    pub fn new(config: NetConfig, vocabulary: Vocabulary, seed: u64) -> Result<Self> {
        config.validate()?;
        let embed = CellEmbedder::new(vocabulary.cell_vector_len(), config.dim, &mut init_rng(seed, 1));
        let gcn = (config.variant == Variant::Gcn)
            .then(|| GraphEmbedder::new(config.dim, config.gcn_layers, &mut init_rng(seed, 2)));
        let maskgen = MaskGenerator::with_blocks(config.dim, config.mask_blocks, &mut init_rng(seed, 3));
        let encdec = EncoderDecoder::new(config.encdec(), &mut init_rng(seed, 4))?;
        let chanreduce = ChannelReducer::new(config.dim, &mut init_rng(seed, 5));
        Ok(Self {
            config,
            vocabulary,
            embed,
            gcn,
            maskgen,
            encdec,
            chanreduce,
        })
    }

    /// Stores updated by the generator optimizer (the reducer is excluded).
    pub fn trainable_stores(&self) -> Vec<&ParamStore> {
        let mut v = vec![&self.embed.params];
        if let Some(g) = &self.gcn {
            v.push(&g.params);
        }
        v.extend([&self.maskgen.params, &self.encdec.params]);
        v
    }

    pub fn trainable_stores_mut(&mut self) -> Vec<&mut ParamStore> {
        let mut v = vec![&mut self.embed.params];
        if let Some(g) = &mut self.gcn {
            v.push(&mut g.params);
        }
        v.extend([&mut self.maskgen.params, &mut self.encdec.params]);
        v
    }

    /// Checks the layout against the network's canvas and vocabulary.
    pub fn check_layout(&self, layout: &CellularLayout) -> Result<()> {
        layout.validate()?;
        let s = self.config.image_size as u32;
        if layout.canvas.width != s || layout.canvas.height != s {
            return Err(Error::layout(
                "canvas",
                format!(
                    "layout canvas {}x{} but the network draws {s}x{s}",
                    layout.canvas.width, layout.canvas.height
                ),
            ));
        }
        if layout.vocabulary != self.vocabulary {
            return Err(Error::layout(
                "types",
                format!(
                    "layout vocabulary {:?} differs from the model's {:?}",
                    layout.vocabulary.names(),
                    self.vocabulary.names()
                ),
            ));
        }
        Ok(())
    }

    /// Cell embeddings, refined over the Delaunay graph in the GCN variant.
    pub fn embed_cells<'t>(&self, ctx: &Ctx<'t>, layout: &CellularLayout) -> Result<Var<'t>> {
        let k = self.vocabulary.cell_vector_len();
        let vectors = ctx.tape.constant(Tensor::new(&[layout.len(), k], layout.cell_vectors()?));
        let e = self.embed.forward(ctx, vectors)?;
        match &self.gcn {
            Some(gcn) => gcn.forward(ctx, &delaunay_graph(layout)?, e),
            None => Ok(e),
        }
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t>, layout: &CellularLayout) -> Result<GeneratorOutput<'t>> {
        self.check_layout(layout)?;
        let boxes = layout.bounding_boxes()?;
        let s = self.config.image_size;
        let (embeddings, masks, intermediate) = if layout.is_empty() {
            let t = ctx.tape.constant(Tensor::zeros(&[1, self.config.dim, s, s]));
            (None, None, t)
        } else {
            let e = self.embed_cells(ctx, layout)?;
            let m = self.maskgen.forward(ctx, e)?;
            let t = compose_intermediate(e, m, &boxes, (s, s), self.config.combine.into())?;
            (Some(e), Some(m), t)
        };
        let image = self.encdec.forward(ctx, intermediate)?;
        Ok(GeneratorOutput {
            boxes,
            embeddings,
            masks,
            intermediate,
            image,
        })
    }

    /// Evaluation-mode image for a layout, `[1, 3, S, S]`.
    pub fn generate(&self, layout: &CellularLayout) -> Result<Tensor> {
        let tape = Tape::no_grad();
        let ctx = Ctx::eval(&tape);
        Ok(self.forward(&ctx, layout)?.image.value())
    }

    /// Single-channel summary of the composed canvas, `[1, 1, S, S]`.
    pub fn cumulative_mask(&self, layout: &CellularLayout) -> Result<Tensor> {
        let tape = Tape::no_grad();
        let ctx = Ctx::eval(&tape);
        let out = self.forward(&ctx, layout)?;
        Ok(self.chanreduce.forward(&ctx, out.intermediate)?.value())
    }
}
