//! Write a fixture dataset, reopen it, and recover layouts from its masks.
//!
//! ```bash
//! cargo run -p synclay --example dataset
//! ```

use synclay::fixtures::{write_fixture_split, FixtureSpec};
use synclay::ingest::Dataset;
use synclay::Vocabulary;

fn main() -> synclay::Result<()> {
    let root = tempfile::tempdir()?;
    let vocab = Vocabulary::conic();
    write_fixture_split(root.path(), "train", &FixtureSpec::new(64, 1), &vocab, 6)?;

    let ds = Dataset::open(root.path(), "train")?;
    println!("{} tiles under {}", ds.len(), root.path().display());
    for i in 0..ds.len() {
        let rec = ds.load(i)?;
        println!("{}: {} cells, counts {:?}", rec.id, rec.layout.len(), rec.composition());
    }
    for (name, s) in &ds.size_statistics()?.by_type {
        println!("{name:<11} n={:<3} w {:.1}±{:.1} h {:.1}±{:.1}", s.count, s.mean_w, s.std_w, s.mean_h, s.std_h);
    }
    Ok(())
}
