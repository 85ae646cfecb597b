//! Per-cell latent embeddings: an affine projection of the cell vector, and
//! the graph-convolution variant over the Delaunay graph.

use rand_chacha::ChaCha8Rng;
use synclay_autograd::{ParamStore, Tensor, Var};

use super::layers::{Ctx, Linear};
use crate::error::{Error, Result};
use crate::graph::CellularGraph;

pub const GCN_LAYERS: usize = 3;

/// Affine map from cell vectors to `dim`-dimensional embeddings.
#[derive(Debug)]
pub struct CellEmbedder {
    pub params: ParamStore,
    proj: Linear,
}

impl CellEmbedder {
    pub fn new(inputs: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut params = ParamStore::new("embed");
        let proj = Linear::new(&mut params, "proj", inputs, dim, rng);
        Self { params, proj }
    }

    pub fn inputs(&self) -> usize {
        self.proj.inputs
    }

    pub fn dim(&self) -> usize {
        self.proj.outputs
    }

    pub fn linear(&self) -> &Linear {
        &self.proj
    }

    /// `[n, inputs]` cell vectors to `[n, dim]`.
    pub fn forward<'t>(&self, ctx: &Ctx<'t>, vectors: Var<'t>) -> Result<Var<'t>> {
        check_rows("embed", &vectors, self.inputs())?;
        Ok(self.proj.forward(ctx, &self.params, vectors))
    }
}

/// Stacked mean-aggregation graph convolutions with self-loops:
/// `H' = relu(A (H W^T + b))`, `A` the row-normalized adjacency.
#[derive(Debug)]
pub struct GraphEmbedder {
    pub params: ParamStore,
    layers: Vec<Linear>,
}

impl GraphEmbedder {
    pub fn new(dim: usize, layers: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut params = ParamStore::new("gcn");
        let layers = (0..layers)
            .map(|i| Linear::new(&mut params, &format!("layer{i}"), dim, dim, rng))
            .collect();
        Self { params, layers }
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    /// Refines `[n, dim]` embeddings over `graph`; isolated nodes only see
    /// their own message.
    pub fn forward<'t>(&self, ctx: &Ctx<'t>, graph: &CellularGraph, h: Var<'t>) -> Result<Var<'t>> {
        check_rows("gcn", &h, self.dim())?;
        let n = h.shape()[0];
        if graph.nodes != n {
            return Err(Error::Shape(format!("gcn: graph has {} nodes for {n} cells", graph.nodes)));
        }
        let adj = ctx.tape.constant(Tensor::new(&[n, n], graph.mean_aggregation_matrix()));
        let mut h = h;
        for layer in &self.layers {
            h = adj.matmul(layer.forward(ctx, &self.params, h)).relu();
        }
        Ok(h)
    }
}

fn check_rows(net: &str, x: &Var<'_>, cols: usize) -> Result<()> {
    match x.shape()[..] {
        [_, c] if c == cols => Ok(()),
        ref s => Err(Error::Shape(format!("{net}: expected [n, {cols}], got {s:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::layers::init_rng;
    use synclay_autograd::Tape;

    #[test]
    fn projects_to_dim() {
        let e = CellEmbedder::new(12, 32, &mut init_rng(1, 0));
        let tape = Tape::new();
        let ctx = Ctx::eval(&tape);
        let y = e.forward(&ctx, tape.constant(Tensor::zeros(&[3, 12]))).unwrap();
        assert_eq!(y.shape(), vec![3, 32]);
        assert!(e.forward(&ctx, tape.constant(Tensor::zeros(&[3, 11]))).is_err());
    }

    #[test]
    fn gcn_single_node_is_self_path() {
        let g = GraphEmbedder::new(4, 1, &mut init_rng(2, 0));
        let tape = Tape::new();
        let ctx = Ctx::eval(&tape);
        let h = tape.constant(Tensor::new(&[1, 4], vec![0.3, -0.1, 0.7, 0.2]));
        let graph = CellularGraph { nodes: 1, edges: vec![] };
        let out = g.forward(&ctx, &graph, h).unwrap().value();
        let direct = g.layers()[0].forward(&ctx, &g.params, h).relu().value();
        assert_eq!(out, direct);
    }
}
