use synclay::fixtures::{fixture_records, FixtureSpec};
use synclay::infer::{Engine, MAX_CELLS};
use synclay::train::{TrainConfig, Trainer};
use synclay::Vocabulary;

fn trained_checkpoint(dir: &std::path::Path) -> Vec<synclay::ingest::DatasetRecord> {
    let vocab = Vocabulary::conic();
    let recs = fixture_records(&FixtureSpec::new(64, 8), &vocab, 2).unwrap();
    let mut t = Trainer::new(TrainConfig::smoke(64), vocab).unwrap();
    t.set_output(dir);
    t.run_phase(1, &recs).unwrap();
    recs
}

#[test]
fn same_request_gives_identical_pngs() {
    let dir = tempfile::tempdir().unwrap();
    let recs = trained_checkpoint(dir.path());
    let ckpt = dir.path().join("checkpoint");
    let a = Engine::load(&ckpt).unwrap();
    let b = Engine::load(&ckpt).unwrap();
    assert_eq!(a.checkpoint_id, b.checkpoint_id);
    // Strip the cell seeds so noise comes from the request seed.
    let mut json = recs[0].layout.to_json();
    for c in &mut json.cells {
        c.seed = None;
    }
    let p = a.generate_json(json.clone(), 42).unwrap();
    let q = b.generate_json(json.clone(), 42).unwrap();
    assert_eq!(p.image_png, q.image_png);
    assert_eq!(p.mask_png, q.mask_png);
    assert_eq!(p.provenance.layout_hash, q.provenance.layout_hash);
    let other = a.generate_json(json, 43).unwrap();
    assert_ne!(other.image_png, p.image_png);

    let out = dir.path().join("pair");
    p.write_to(&out).unwrap();
    assert_eq!(std::fs::read(out.join("image.png")).unwrap(), q.image_png);
}

#[test]
fn empty_and_oversized_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let recs = trained_checkpoint(dir.path());
    let e = Engine::load(&dir.path().join("checkpoint")).unwrap();
    let mut json = recs[0].layout.to_json();
    let template = json.cells[0].clone();
    json.cells.clear();
    let p = e.generate_json(json.clone(), 0).unwrap();
    let mask = synclay::io::decode_class_mask(&p.mask_png).unwrap();
    assert!(mask.data.iter().all(|&v| v == 0));
    assert_eq!((p.width, p.height), (64, 64));
    json.cells = vec![template; MAX_CELLS + 1];
    assert!(matches!(e.generate_json(json, 0), Err(synclay::Error::Layout { .. })));
}

#[test]
fn resuming_at_an_epoch_boundary_matches_a_straight_run() {
    let vocab = Vocabulary::conic();
    let recs = fixture_records(&FixtureSpec::new(64, 9), &vocab, 2).unwrap();
    let mut cfg = TrainConfig::smoke(64);
    cfg.phase1_epochs = 2;
    let mut straight = Trainer::new(cfg.clone(), vocab.clone()).unwrap();
    straight.run_phase(1, &recs).unwrap();

    let dir = tempfile::tempdir().unwrap();
    cfg.phase1_epochs = 1;
    let mut first = Trainer::new(cfg.clone(), vocab).unwrap();
    first.set_output(dir.path());
    first.run_phase(1, &recs).unwrap();
    let mut resumed = Trainer::resume(&dir.path().join("checkpoint"), cfg).unwrap();
    resumed.run_phase(1, &recs).unwrap();

    assert_eq!(resumed.step, straight.step);
    for ((name, a), (_, b)) in straight.models.stores().into_iter().zip(resumed.models.stores()) {
        assert!(a.bit_identical(b), "{name} diverged after resume");
    }
}
