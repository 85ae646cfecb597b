//! Parametric layouts across grades, with their cellular graphs.
//!
//! ```bash
//! cargo run -p synclay --example synthesize
//! ```

use synclay::{delaunay_graph, Grade, LayoutParams, LayoutSynthesizer};

fn main() -> synclay::Result<()> {
    let synth = LayoutSynthesizer::default();
    for grade in [Grade::Normal, Grade::Low, Grade::High] {
        let params = LayoutParams::new(grade, 7)
            .with_cellularity("epithelial", 0.8)
            .with_cellularity("lymphocyte", 0.4)
            .with_cellularity("connective", 0.2);
        let s = synth.synthesize(&params)?;
        let graph = delaunay_graph(&s.layout)?;
        let counts: Vec<String> = synth
            .vocabulary
            .names()
            .iter()
            .zip(s.layout.type_counts())
            .filter(|(_, n)| *n > 0)
            .map(|(name, n)| format!("{name}={n}"))
            .collect();
        println!(
            "{grade:<6} {} glands, {} cells [{}], {} graph edges",
            s.glands.len(),
            s.layout.len(),
            counts.join(" "),
            graph.edges.len()
        );
    }
    Ok(())
}
