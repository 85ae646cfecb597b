//! A few phase-1 and phase-2 training steps on fixture tiles.
//!
//! ```bash
//! cargo run --release -p synclay --example train_smoke
//! ```

use synclay::fixtures::{fixture_records, FixtureSpec};
use synclay::train::{train_segnet, SegnetTraining, TrainConfig, Trainer};
use synclay::Vocabulary;

fn main() -> synclay::Result<()> {
    let vocab = Vocabulary::conic();
    let records = fixture_records(&FixtureSpec::new(64, 5), &vocab, 6)?;

    let (segnet, seg_losses) = train_segnet(&records, vocab.len() + 1, &SegnetTraining { epochs: 3, ..Default::default() })?;
    println!("segnet loss per epoch {seg_losses:.3?}");

    let mut cfg = TrainConfig::smoke(64);
    cfg.max_steps = Some(6);
    let mut trainer = Trainer::new(cfg, vocab)?;
    trainer.run_phase(1, &records)?;
    trainer.set_segnet(segnet);
    trainer.run_phase(2, &records)?;
    for s in &trainer.history {
        let c = &s.components;
        println!(
            "image {:.4} mask {:.4} seg {:.4} adv {:.4}/{:.4} total {:.4}",
            c.image, c.mask, c.seg, c.adv_image, c.adv_cell, s.total
        );
    }
    Ok(())
}
