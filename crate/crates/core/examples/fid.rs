//! FID of a fixture set against itself, a second draw, and box-shaped nuclei.
//!
//! ```bash
//! cargo run --release -p synclay --example fid
//! ```

use synclay::eval::{fid_resampled, FeatureExtractor, RandomConvFeatures};
use synclay::fixtures::{fixture_records, FixtureSpec, NucleusShape};
use synclay::Vocabulary;

fn main() -> synclay::Result<()> {
    let vocab = Vocabulary::conic();
    let images = |spec: FixtureSpec| -> synclay::Result<Vec<_>> {
        Ok(fixture_records(&spec, &vocab, 24)?.into_iter().map(|r| r.image).collect())
    };
    let a = images(FixtureSpec::new(64, 1))?;
    let b = images(FixtureSpec::new(64, 2))?;
    let boxes = images(FixtureSpec {
        shape: NucleusShape::Box,
        noise: 0,
        ..FixtureSpec::new(64, 3)
    })?;

    let ex = RandomConvFeatures::new(0);
    let (fa, fb, fn_) = (ex.extract(&a)?, ex.extract(&b)?, ex.extract(&boxes)?);
    println!("same set:        {}", fid_resampled(&fa, &fa, 3, 0)?);
    println!("same generator:  {}", fid_resampled(&fa, &fb, 3, 0)?);
    println!("box nuclei:      {}", fid_resampled(&fa, &fn_, 3, 0)?);
    Ok(())
}
