//! Histology tile synthesis from cellular layouts.
//!
//! A layout (typed cells with locations, sizes and noise) is embedded per
//! cell, turned into soft masks, warped onto the canvas and decoded into an
//! RGB tile; a frozen segmentation network labels the result. The crate
//! covers the layout model, parametric layout synthesis, dataset ingest,
//! every network, the two-phase adversarial trainer and the evaluation
//! suite.

pub mod error;
pub mod eval;
pub mod fixtures;
pub mod graph;
pub mod infer;
pub mod ingest;
pub mod io;
pub mod layout;
pub mod nets;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use graph::{delaunay_graph, CellularGraph, GraphEdge};
pub use layout::{
    build_cell_vector, compute_bbox, sample_noise, BoundingBox, Canvas, Cell, CellType,
    CellularLayout, LayoutJson, Vocabulary,
};
pub use synth::{synthesize_layout, Grade, LayoutParams, LayoutSynthesizer};
