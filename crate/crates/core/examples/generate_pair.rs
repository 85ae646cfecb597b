//! Draw an image and class mask from a synthesized layout with freshly
//! initialised networks, and save both as PNG.
//!
//! ```bash
//! cargo run -p synclay --example generate_pair -- /tmp/pair
//! ```

use std::path::PathBuf;

use synclay::infer::Engine;
use synclay::nets::NetConfig;
use synclay::train::{save_bundle, BundleInfo, Models};
use synclay::{LayoutParams, LayoutSynthesizer, Vocabulary};

fn main() -> synclay::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("synclay-pair"), PathBuf::from);
    let ckpt = tempfile::tempdir()?;
    let models = Models::new(NetConfig::small(64), Vocabulary::conic(), 0)?;
    save_bundle(ckpt.path(), &models, &BundleInfo::default())?;
    let engine = Engine::load(ckpt.path())?;

    let params = LayoutParams {
        image_size: 64,
        ..LayoutParams::new(synclay::Grade::Low, 3)
    }
    .with_cellularity("epithelial", 0.6)
    .with_cellularity("lymphocyte", 0.5);
    let layout = LayoutSynthesizer::default().synthesize(&params)?.layout;
    let pair = engine.generate(&layout, 3)?;
    pair.write_to(&out)?;
    println!(
        "{} cells -> {}x{} pair in {} (checkpoint {}, layout {})",
        layout.len(),
        pair.width,
        pair.height,
        out.display(),
        pair.provenance.checkpoint_id,
        &pair.provenance.layout_hash[..12]
    );
    Ok(())
}
