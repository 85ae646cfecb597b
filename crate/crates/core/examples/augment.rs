//! Balance a dataset with generated minority-rich tiles and compare the
//! cell-count predictor with and without them. The generator here is
//! untrained, so its tiles carry no signal; load a trained bundle for a
//! meaningful comparison.
//!
//! ```bash
//! cargo run --release -p synclay --example augment
//! ```

use synclay::eval::{
    balance_with_synthetic, evaluate_predictor, train_composition_predictor, BalancePlan, CompositionSample,
    ManifestEntry, PredictorConfig,
};
use synclay::fixtures::{fixture_records, FixtureSpec};
use synclay::nets::NetConfig;
use synclay::train::Models;
use synclay::{LayoutSynthesizer, Vocabulary};

fn main() -> synclay::Result<()> {
    let vocab = Vocabulary::conic();
    let spec = |seed| FixtureSpec {
        type_weights: Some(vec![0.1, 1.0, 1.0, 1.0, 0.1, 1.0]),
        ..FixtureSpec::new(64, seed)
    };
    let train = fixture_records(&spec(1), &vocab, 40)?;
    let test = fixture_records(&spec(2), &vocab, 20)?;
    let samples = |recs: &[synclay::ingest::DatasetRecord]| -> Vec<CompositionSample> {
        recs.iter().map(CompositionSample::from_record).collect()
    };
    let entries: Vec<ManifestEntry> = train
        .iter()
        .map(|r| ManifestEntry {
            id: r.id.clone(),
            image: format!("{}.png", r.id).into(),
            counts: r.composition(),
            synthetic: false,
        })
        .collect();

    let models = Models::new(NetConfig::small(64), vocab.clone(), 0)?;
    let plan = BalancePlan::minority_biased(&vocab, &["neutrophil", "eosinophil"], 20, 64, 0)?;
    let aug = balance_with_synthetic(&entries, &models, &LayoutSynthesizer::default(), &plan, None)?;
    println!("{}", aug.manifest.distribution_markdown());

    let cfg = PredictorConfig { epochs: 5, ..Default::default() };
    let (train_s, test_s) = (samples(&train), samples(&test));
    let (real, _) = train_composition_predictor(&train_s, None, &cfg)?;
    let (mixed, _) = train_composition_predictor(&train_s, Some(&aug.synthetic), &cfg)?;
    println!("real only\n{}", evaluate_predictor(&real, &test_s, vocab.names())?.to_markdown());
    println!("real + synthetic\n{}", evaluate_predictor(&mixed, &test_s, vocab.names())?.to_markdown());
    Ok(())
}
