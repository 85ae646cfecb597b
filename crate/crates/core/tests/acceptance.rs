//! Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if
//! any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::criteria;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use synclay::eval::{
    balance_with_synthetic, evaluate_predictor, fid_from_features, frechet_distance, train_composition_predictor,
    BalancePlan, CompositionSample, FeatureStats, ManifestEntry, PredictorConfig,
};
use synclay::fixtures::{fixture_records, FixtureSpec};
use synclay::infer::Engine;
use synclay::ingest::{DatasetRecord, SizeStatistics};
use synclay::nets::Variant;
use synclay::synth::LayoutSynthesizer;
use synclay::train::{loss_seg, loss_total, train_segnet, LossComponents, LossWeights, SegnetTraining, TrainConfig, Trainer};
use synclay::Vocabulary;
use synclay_autograd::{Tape, Tensor};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, budget_s: u64, detail: String) -> String {
    format!("{detail}; {:.1}s of {budget_s}s budget", elapsed.as_secs_f64())
}

fn compositor() -> Outcome {
    let t = Instant::now();
    let worst = criteria::compositor_deviation(120, 11);
    let e = t.elapsed();
    check(
        worst < 1e-6 && e.as_secs() < 30,
        within(e, 30, format!("max |deviation| {worst:.2e} over 120 instances (tol 1e-6)")),
    )
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let mut errs = criteria::loss_function_errors();
    errs.push(("total/baseline", criteria::full_objective_check(Variant::Baseline).max_relative_error()));
    errs.push(("total/gcn", criteria::full_objective_check(Variant::Gcn).max_relative_error()));
    let e = t.elapsed();
    let worst = errs.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    let listed: Vec<String> = errs.iter().map(|(n, v)| format!("{n} {v:.1e}")).collect();
    check(
        worst < 1e-3 && e.as_secs() < 120,
        within(e, 120, format!("max relative error {worst:.2e} (tol 1e-3): {}", listed.join(", "))),
    )
}

fn shapes() -> Outcome {
    let t = Instant::now();
    let rows = criteria::architecture_rows();
    let e = t.elapsed();
    check(e.as_secs() < 60, within(e, 60, format!("{rows} traced rows match")))
}

fn loss_arithmetic() -> Outcome {
    let total = loss_total(&LossComponents::from_array([1.0; 5]), &LossWeights::default()).map_err(|e| e.to_string())?;
    let tape = Tape::no_grad();
    let labels: Vec<u8> = (0..49).map(|i| (i % 7) as u8).collect();
    let ce = loss_seg(&labels, tape.constant(Tensor::zeros(&[1, 7, 7, 7]))).map_err(|e| e.to_string())?.item();
    let dev = (ce - 7f64.ln()).abs();
    check(
        total == 3.11 && dev < 1e-9,
        format!("total on unit components {total} (want exactly 3.11); uniform CE - ln 7 = {dev:.1e}"),
    )
}

fn fid_oracle() -> Outcome {
    let mu_a = [0.0, 1.0, -0.5, 2.0];
    let sd_a = [1.0, 0.5, 2.0, 1.5];
    let mu_b = [0.5, 0.0, 0.5, 2.5];
    let sd_b = [0.8, 1.2, 1.0, 1.5];
    let va: Vec<f64> = sd_a.iter().map(|s| s * s).collect();
    let vb: Vec<f64> = sd_b.iter().map(|s| s * s).collect();
    let want = common::frechet_diagonal(&mu_a, &va, &mu_b, &vb);

    // Exact moments.
    let stats = |mu: &[f64], var: &[f64]| FeatureStats {
        mean: DVector::from_column_slice(mu),
        cov: DMatrix::from_diagonal(&DVector::from_column_slice(var)),
        count: 10_000,
    };
    let exact = frechet_distance(&stats(&mu_a, &va), &stats(&mu_b, &vb)).map_err(|e| e.to_string())?;

    // Sampled clouds.
    let cloud = |mu: &[f64], sd: &[f64], seed: u64| -> Vec<Vec<f64>> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let z = Normal::new(0.0, 1.0).unwrap();
        (0..10_000).map(|_| mu.iter().zip(sd).map(|(m, s)| m + s * z.sample(&mut r)).collect()).collect()
    };
    let (a, b) = (cloud(&mu_a, &sd_a, 1), cloud(&mu_b, &sd_b, 2));
    let sampled = fid_from_features(&a, &b).map_err(|e| e.to_string())?;
    let self_dist = fid_from_features(&a, &a).map_err(|e| e.to_string())?;
    let (de, ds) = ((exact - want).abs(), (sampled - want).abs() / want);
    check(
        self_dist < 1e-6 && de < 1e-6 && ds < 1e-2,
        format!(
            "fid(A,A) {self_dist:.1e}; exact moments off by {de:.1e} (tol 1e-6); n=10^4 samples off by {:.2}% (tol 1%)",
            ds * 100.0
        ),
    )
}

fn frozen_segnet() -> Outcome {
    let vocab = Vocabulary::conic();
    let recs = fixture_records(&FixtureSpec::new(64, 31), &vocab, 4).map_err(|e| e.to_string())?;
    let (seg, _) = train_segnet(&recs, vocab.len() + 1, &SegnetTraining { epochs: 1, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let before = seg.params.clone();
    let mut cfg = TrainConfig::smoke(64);
    cfg.phase2_epochs = 10;
    cfg.max_steps = Some(20);
    let mut t = Trainer::new(cfg, vocab).map_err(|e| e.to_string())?;
    t.set_segnet(seg);
    t.run_phase(2, &recs).map_err(|e| e.to_string())?;
    let same = t.models.segnet.as_ref().is_some_and(|s| s.params.bit_identical(&before));
    check(
        t.step == 20 && same && t.segnet_grad_norm == 0.0,
        format!("{} phase-2 steps; parameters bit-identical: {same}; accumulated gradient norm {}", t.step, t.segnet_grad_norm),
    )
}

fn round_trip() -> Outcome {
    let (worst, mismatched) = criteria::layout_round_trip(100, 17);
    check(
        worst <= 0.5 && mismatched == 0,
        format!("100 fixtures: worst per-axis centroid error {worst:.3} px (tol 0.5); size/type mismatches {mismatched}"),
    )
}

fn zero_overlap() -> Outcome {
    let (overlaps, worst) = criteria::synthesized_overlap(50, 23);
    check(
        overlaps == 0 && worst <= 4.0,
        format!("50 layouts over all grades: {overlaps} intersecting pairs; farthest epithelial cell {worst:.2} px from a gland (tol 4)"),
    )
}

fn overfit() -> Outcome {
    let t0 = Instant::now();
    let vocab = Vocabulary::conic();
    let recs = fixture_records(&FixtureSpec::new(64, 41), &vocab, 8).map_err(|e| e.to_string())?;
    let mut cfg = TrainConfig::smoke(64);
    cfg.phase1_epochs = 500_usize.div_ceil(recs.len());
    cfg.max_steps = Some(500);
    let mut t = Trainer::new(cfg, vocab).map_err(|e| e.to_string())?;
    t.run_phase(1, &recs).map_err(|e| e.to_string())?;
    let image: Vec<f64> = t.history.iter().map(|h| h.components.image).collect();
    // One pass over the 8 records from step 10, against the last pass.
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let base = mean(&image[9..17]);
    let last = mean(&image[image.len() - 8..]);
    let drop = 1.0 - last / base;
    let e = t0.elapsed();
    check(
        image.len() == 500 && drop >= 0.5 && e.as_secs() < 900,
        within(
            e,
            900,
            format!("{} steps; loss_image {base:.4} at step 10 -> {last:.4}, a {:.1}% drop (need 50%)", image.len(), drop * 100.0),
        ),
    )
}

const MINORITY: [&str; 2] = ["neutrophil", "eosinophil"];

fn imbalanced(seed: u64, n: usize) -> Vec<DatasetRecord> {
    let mut spec = FixtureSpec::new(64, seed);
    let vocab = Vocabulary::conic();
    spec.type_weights = Some(
        vocab
            .names()
            .iter()
            .map(|n| if MINORITY.contains(&n.as_str()) { 0.1 } else { 1.0 })
            .collect(),
    );
    fixture_records(&spec, &vocab, n).unwrap()
}

fn augmentation() -> Outcome {
    let t0 = Instant::now();
    let vocab = Vocabulary::conic();
    let train = imbalanced(100, 200);
    let test = imbalanced(200, 100);
    let entries: Vec<ManifestEntry> = train
        .iter()
        .map(|r| {
            let s = CompositionSample::from_record(r);
            synclay::eval::augment::sample_entry(&s, r.id.clone().into())
        })
        .collect();

    // Generator trained on the imbalanced set itself.
    let mut cfg = TrainConfig::smoke(64);
    cfg.phase1_epochs = 2;
    let mut trainer = Trainer::new(cfg, vocab.clone()).map_err(|e| e.to_string())?;
    trainer.run_phase(1, &train).map_err(|e| e.to_string())?;
    let synth = LayoutSynthesizer::new(vocab.clone(), SizeStatistics::conic_default());

    let names = vocab.names().to_vec();
    let base_samples: Vec<CompositionSample> = train.iter().map(CompositionSample::from_record).collect();
    let test_samples: Vec<CompositionSample> = test.iter().map(CompositionSample::from_record).collect();
    let mut deltas = vec![Vec::new(); MINORITY.len()];
    let mut lines = Vec::new();
    for seed in 0..3u64 {
        let plan = BalancePlan::minority_biased(&vocab, &MINORITY, 50, 64, seed).map_err(|e| e.to_string())?;
        let aug = balance_with_synthetic(&entries, &trainer.models, &synth, &plan, None).map_err(|e| e.to_string())?;
        let pc = PredictorConfig { seed, ..Default::default() };
        let (base, _) = train_composition_predictor(&base_samples, None, &pc).map_err(|e| e.to_string())?;
        let (more, _) = train_composition_predictor(&base_samples, Some(&aug.synthetic), &pc).map_err(|e| e.to_string())?;
        let tb = evaluate_predictor(&base, &test_samples, &names).map_err(|e| e.to_string())?;
        let ta = evaluate_predictor(&more, &test_samples, &names).map_err(|e| e.to_string())?;
        for (k, m) in MINORITY.iter().enumerate() {
            let (b, a) = (tb.get(m).and_then(|r| r.spearman), ta.get(m).and_then(|r| r.spearman));
            let (Some(b), Some(a)) = (b, a) else {
                return Err(format!("seed {seed}: {m} Spearman undefined"));
            };
            deltas[k].push(a - b);
            lines.push(format!("s{seed} {m} {b:.3}->{a:.3}"));
        }
    }
    let mut ok = true;
    let mut summary = Vec::new();
    for (k, m) in MINORITY.iter().enumerate() {
        let d = &deltas[k];
        let mean = d.iter().sum::<f64>() / 3.0;
        let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        let se = sd / 3f64.sqrt();
        ok &= mean >= -se;
        let sign = if mean > 0.0 { "gain" } else if mean < 0.0 { "loss" } else { "flat" };
        summary.push(format!("{m} mean delta {mean:+.3} (se {se:.3}, {sign})"));
    }
    check(
        ok,
        format!("{}; [{}]; {:.1}s", summary.join("; "), lines.join(", "), t0.elapsed().as_secs_f64()),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let vocab = Vocabulary::conic();
    let recs = fixture_records(&FixtureSpec::new(64, 51), &vocab, 2).map_err(|e| e.to_string())?;
    let mut t = Trainer::new(TrainConfig::smoke(64), vocab).map_err(|e| e.to_string())?;
    t.set_output(dir.path());
    t.run_phase(1, &recs).map_err(|e| e.to_string())?;
    let ckpt = dir.path().join("checkpoint");
    let mut json = recs[0].layout.to_json();
    for c in &mut json.cells {
        c.seed = None;
    }
    let run = || -> Result<_, String> {
        let e = Engine::load(&ckpt).map_err(|e| e.to_string())?;
        e.generate_json(json.clone(), 7).map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    check(
        a.image_png == b.image_png && a.mask_png == b.mask_png,
        format!(
            "two loads of checkpoint {}: image {} bytes, mask {} bytes, identical: {}",
            a.provenance.checkpoint_id,
            a.image_png.len(),
            a.mask_png.len(),
            a.image_png == b.image_png && a.mask_png == b.mask_png
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("compositor oracle", compositor),
        ("gradient suite", gradients),
        ("shape suite", shapes),
        ("loss arithmetic", loss_arithmetic),
        ("fid oracle", fid_oracle),
        ("frozen segnet", frozen_segnet),
        ("layout round trip", round_trip),
        ("zero overlap", zero_overlap),
        ("overfit smoke", overfit),
        ("augmentation direction", augmentation),
        ("determinism", determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match outcome {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
