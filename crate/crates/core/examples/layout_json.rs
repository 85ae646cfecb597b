//! Build a layout by hand, validate it, and print its wire form.
//!
//! ```bash
//! cargo run -p synclay --example layout_json
//! ```

use synclay::{compute_bbox, Canvas, Cell, CellularLayout, Vocabulary};

fn main() -> synclay::Result<()> {
    let vocab = Vocabulary::conic();
    let mut layout = CellularLayout::new(Canvas { width: 256, height: 256 }, vocab.clone());
    let ty = |name| vocab.id(name).expect("known type");
    layout.cells.push(Cell::seeded(ty("epithelial"), 0.30, 0.40, 14, 10, 1));
    layout.cells.push(Cell::seeded(ty("lymphocyte"), 0.62, 0.55, 8, 8, 2));
    layout.cells.push(Cell::seeded(ty("connective"), 0.80, 0.20, 18, 6, 3));
    layout.validate()?;

    for c in &layout.cells {
        let b = compute_bbox(c, layout.canvas)?;
        println!("{:<11} centre ({:.2}, {:.2}) box x {}..{} y {}..{}", vocab.names()[c.cell_type], c.x, c.y, b.x0, b.x1, b.y0, b.y1);
    }
    println!("{}", serde_json::to_string_pretty(&layout.to_json())?);
    println!("content hash {}", layout.content_hash());
    Ok(())
}
