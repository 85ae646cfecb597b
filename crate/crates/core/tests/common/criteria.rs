//! Measurements behind the acceptance criteria, shared by the focused
//! integration tests and the acceptance runner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synclay::fixtures::{paint, NucleusShape};
use synclay::ingest::DatasetRecord;
use synclay::layout::{BoundingBox, Canvas, Cell, CellularLayout, Vocabulary};
use synclay::nets::{compose_intermediate, crop_and_resize, Ctx, NetConfig, Variant, CELL_CROP_SIZE};
use synclay::train::{
    discriminator_loss, generator_loss, generator_terms, loss_image, loss_mask, loss_seg, train_segnet,
    weighted_total, LossWeights, Models, SegnetTraining,
};
use synclay_autograd::gradcheck::{check_directional, GradCheckReport};
use synclay_autograd::ops::Overlap;
use synclay_autograd::{ParamStore, Tape, Tensor};

pub fn full_size_layout() -> CellularLayout {
    let mut l = CellularLayout::new(Canvas::square(256), Vocabulary::conic());
    for (i, (x, y)) in [(0.15, 0.15), (0.47, 0.23), (0.78, 0.78)].into_iter().enumerate() {
        l.cells.push(Cell::seeded(i, x, y, 12, 10, i as u64));
    }
    l
}

fn shapes(rows: &[Vec<usize>]) -> Vec<Vec<usize>> {
    rows.to_vec()
}

/// Runs a full-resolution forward pass and asserts every architecture
/// table row; returns the number of rows checked.
pub fn architecture_rows() -> usize {
    let mut rows = 0;
    let models = Models::new(NetConfig::default(), Vocabulary::conic(), 0).unwrap();
    let g = &models.generator;
    let tape = Tape::no_grad();
    let ctx = Ctx::eval(&tape);
    let l = full_size_layout();
    let n = l.len();

    // Mask generator and its block.
    let emb = g.embed_cells(&ctx, &l).unwrap();
    assert_eq!(emb.shape(), vec![n, 32]);
    let mut seen = Vec::new();
    let masks = g.maskgen.forward_traced(&ctx, emb, |v| seen.push(v.shape())).unwrap();
    let mut want = vec![vec![n, 32, 1, 1]];
    for s in [2, 4, 8, 16, 32, 64] {
        for _ in 0..4 {
            want.push(vec![n, 32, s, s]);
        }
    }
    want.push(vec![n, 1, 64, 64]);
    want.push(vec![n, 1, 64, 64]);
    rows += seen.len();
    assert_eq!(seen, shapes(&want));
    assert!(masks.value().data().iter().all(|&m| m > 0.0 && m < 1.0));

    // Channel reducer.
    let out = g.forward(&ctx, &l).unwrap();
    assert_eq!(out.intermediate.shape(), vec![1, 32, 256, 256]);
    let mut seen = Vec::new();
    g.chanreduce.forward_traced(&ctx, out.intermediate, |v| seen.push(v.shape())).unwrap();
    let want: Vec<Vec<usize>> = [16, 16, 8, 8, 4, 4, 1, 1].iter().map(|&c| vec![1, c, 256, 256]).collect();
    rows += seen.len();
    assert_eq!(seen, want);

    // Encoder-decoder.
    let mut seen = Vec::new();
    let image = g.encdec.forward_traced(&ctx, out.intermediate, |v| seen.push(v.shape())).unwrap();
    let want: Vec<Vec<usize>> = [
        (64, 128),
        (128, 64),
        (256, 32),
        (512, 16),
        (512, 8),
        (512, 4),
        (512, 2),
        (512, 1),
        (1024, 2),
        (1024, 4),
        (1024, 8),
        (1024, 16),
        (512, 32),
        (256, 64),
        (128, 128),
        (128, 256),
        (3, 256),
        (3, 256),
    ]
    .iter()
    .map(|&(c, s)| vec![1, c, s, s])
    .collect();
    rows += seen.len();
    assert_eq!(seen, want);
    assert!(image.value().data().iter().all(|v| v.abs() <= 1.0));

    // Image discriminator.
    let mut seen = Vec::new();
    models.disc_img.forward_traced(&ctx, image, |v| seen.push(v.shape())).unwrap();
    let mut want = vec![vec![1, 16, 128, 128]; 2];
    for (c, s) in [(32, 64), (64, 32), (128, 16), (256, 8)] {
        want.extend(std::iter::repeat_n(vec![1, c, s, s], 3));
    }
    want.push(vec![1, 1, 7, 7]);
    rows += seen.len();
    assert_eq!(seen, want);

    // Cellular discriminator.
    let crops = crop_and_resize(image, &out.boxes, CELL_CROP_SIZE).unwrap();
    assert_eq!(crops.shape(), vec![n, 3, 64, 64]);
    let mut seen = Vec::new();
    models.disc_cell.forward_traced(&ctx, crops, |v| seen.push(v.shape())).unwrap();
    let want = vec![
        vec![n, 16, 30, 30],
        vec![n, 16, 30, 30],
        vec![n, 16, 30, 30],
        vec![n, 32, 13, 13],
        vec![n, 32, 13, 13],
        vec![n, 32, 13, 13],
        vec![n, 64, 5, 5],
        vec![n, 64, 5, 5],
        vec![n, 64],
        vec![n, 1024],
        vec![n, 1],
    ];
    rows += seen.len();
    assert_eq!(seen, want);
    rows
}

pub fn random_box(rng: &mut ChaCha8Rng, h: u32, w: u32) -> BoundingBox {
    let bw = rng.random_range(1..=w.min(24));
    let bh = rng.random_range(1..=h.min(24));
    let x0 = rng.random_range(0..=w - bw);
    let y0 = rng.random_range(0..=h - bh);
    BoundingBox { x0, y0, x1: x0 + bw, y1: y0 + bh }
}

/// Worst absolute deviation of both warps from the pointwise oracle over
/// `instances` random cases.
pub fn compositor_deviation(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (h, w) = (rng.random_range(16..48usize), rng.random_range(16..48usize));
        let n = rng.random_range(1..5);
        let d = rng.random_range(1..4);
        let s = [4usize, 8, 16][rng.random_range(0..3)];
        let boxes: Vec<_> = (0..n).map(|_| random_box(&mut rng, h as u32, w as u32)).collect();
        let emb = Tensor::uniform(&[n, d], -1.0, 1.0, &mut rng);
        let masks = Tensor::uniform(&[n, 1, s, s], 0.0, 1.0, &mut rng);
        let tape = Tape::no_grad();
        let got = compose_intermediate(tape.constant(emb.clone()), tape.constant(masks.clone()), &boxes, (h, w), Overlap::Sum)
            .unwrap()
            .value();
        let want = super::compose_oracle(&emb, &masks, &boxes, h, w);
        for (a, b) in got.data().iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }

        let image = Tensor::uniform(&[1, 3, h, w], -1.0, 1.0, &mut rng);
        let size = [8usize, 16, 64][rng.random_range(0..3)];
        let got = crop_and_resize(tape.constant(image.clone()), &boxes, size).unwrap().value();
        assert_eq!(got.shape(), &[n, 3, size, size]);
        let want = super::crop_oracle(&image, &boxes, size);
        for (a, b) in got.data().iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

pub fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(5)
}

/// Worst relative error of each loss function's gradient.
pub fn loss_function_errors() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let mut r = rng();
    let a = Tensor::uniform(&[1, 3, 8, 8], -1.0, 1.0, &mut r);
    let b = Tensor::uniform(&[1, 3, 8, 8], -1.0, 1.0, &mut r);
    let rep = check_directional(&[a, b], |_, v| loss_image(v[0], v[1]).unwrap(), 1e-6, 4, &mut r);
    out.push(("image", rep.max_relative_error()));

    let gen = Tensor::uniform(&[3, 1, 8, 8], 0.05, 0.95, &mut r);
    let gt: Vec<Vec<f64>> = (0..3).map(|k| (0..64).map(|i| ((i + k) % 3 == 0) as u8 as f64).collect()).collect();
    let rep = check_directional(&[gen], |_, v| loss_mask(&gt, v[0]).unwrap(), 1e-6, 4, &mut r);
    out.push(("mask", rep.max_relative_error()));

    let logits = Tensor::uniform(&[1, 7, 6, 6], -2.0, 2.0, &mut r);
    let labels: Vec<u8> = (0..36).map(|i| (i * 5 % 7) as u8).collect();
    let rep = check_directional(&[logits], |_, v| loss_seg(&labels, v[0]).unwrap(), 1e-6, 4, &mut r);
    out.push(("seg", rep.max_relative_error()));

    let real = Tensor::uniform(&[1, 1, 7, 7], -3.0, 3.0, &mut r);
    let fake = Tensor::uniform(&[1, 1, 7, 7], -3.0, 3.0, &mut r);
    let rep = check_directional(&[real, fake.clone()], |_, v| discriminator_loss(v[0], v[1]), 1e-6, 4, &mut r);
    out.push(("disc", rep.max_relative_error()));
    let rep = check_directional(&[fake], |_, v| generator_loss(v[0]), 1e-6, 4, &mut r);
    out.push(("gen", rep.max_relative_error()));
    out
}

pub fn miniature() -> (Models, DatasetRecord) {
    let vocab = Vocabulary::conic();
    let mut layout = CellularLayout::new(Canvas::square(64), vocab.clone());
    for (i, (x, y, w, h)) in [(0.2, 0.2, 10, 9), (0.7, 0.25, 8, 11), (0.3, 0.75, 12, 10), (0.75, 0.7, 9, 9)]
        .into_iter()
        .enumerate()
    {
        layout.cells.push(Cell::seeded(i, x, y, w, h, 100 + i as u64));
    }
    let (image, inst, class) = paint(&layout, NucleusShape::Ellipse, 4, &mut rng()).unwrap();
    let rec = DatasetRecord::from_parts("mini", &image, inst, class, &vocab).unwrap();
    assert_eq!(rec.layout.len(), 4);
    (Models::new(NetConfig::small(64), vocab, 3).unwrap(), rec)
}

fn objective(models: &Models, rec: &DatasetRecord, weights: &LossWeights) -> f64 {
    let tape = Tape::no_grad();
    let ctx = Ctx::train(&tape, 99);
    let out = models.generator.forward(&ctx, &rec.layout).unwrap();
    let terms = generator_terms(models, weights, &ctx, rec, &out).unwrap();
    weighted_total(&terms, weights).unwrap().item()
}

fn direction(store: &ParamStore, r: &mut ChaCha8Rng) -> Vec<(synclay_autograd::ParamId, Tensor)> {
    let dirs: Vec<_> = store
        .ids()
        .filter(|&id| store.is_trainable(id))
        .map(|id| (id, Tensor::randn(store.get(id).shape(), 1.0, r)))
        .collect();
    let norm = dirs.iter().map(|(_, d)| d.dot(d)).sum::<f64>().sqrt();
    dirs.into_iter().map(|(id, d)| (id, d.scale(1.0 / norm))).collect()
}

fn shift(store: &mut ParamStore, dir: &[(synclay_autograd::ParamId, Tensor)], eps: f64) {
    for (id, d) in dir {
        let v = store.get(*id).add(&d.scale(eps));
        store.set(*id, v);
    }
}

pub fn full_objective_check(variant: Variant) -> GradCheckReport {
    let (mut models, rec) = miniature();
    if variant == Variant::Gcn {
        let mut cfg = NetConfig::small(64);
        cfg.variant = Variant::Gcn;
        models = Models::new(cfg, Vocabulary::conic(), 3).unwrap();
    }
    let (seg, _) = train_segnet(std::slice::from_ref(&rec), 7, &SegnetTraining { epochs: 0, ..Default::default() }).unwrap();
    models.segnet = Some(seg);
    let weights = LossWeights::default();

    let tape = Tape::new();
    let ctx = Ctx::train(&tape, 99);
    let out = models.generator.forward(&ctx, &rec.layout).unwrap();
    let terms = generator_terms(&models, &weights, &ctx, &rec, &out).unwrap();
    assert!(terms.iter().all(Option::is_some));
    let grads = tape.backward(weighted_total(&terms, &weights).unwrap());
    assert!(!grads.touches(&models.disc_img.params));
    assert!(!grads.touches(&models.disc_cell.params));
    assert_eq!(grads.norm_for(&models.segnet.as_ref().unwrap().params), 0.0);

    let mut r = rng();
    let mut report = GradCheckReport::default();
    let n_stores = models.generator.trainable_stores().len();
    let eps = 1e-6;
    for s in 0..n_stores {
        for _ in 0..2 {
            let store = models.generator.trainable_stores()[s];
            let dir = direction(store, &mut r);
            let analytic: f64 = dir
                .iter()
                .map(|(id, d)| grads.param(store, *id).map_or(0.0, |g| g.dot(d)))
                .sum();
            shift(models.generator.trainable_stores_mut().remove(s), &dir, eps);
            let plus = objective(&models, &rec, &weights);
            shift(models.generator.trainable_stores_mut().remove(s), &dir, -2.0 * eps);
            let minus = objective(&models, &rec, &weights);
            shift(models.generator.trainable_stores_mut().remove(s), &dir, eps);
            report.probes.push((analytic, (plus - minus) / (2.0 * eps)));
        }
    }
    report
}

/// Paints `n` random rectangle tiles, extracts them back and returns the
/// worst per-axis centroid error (px) and the number of size mismatches.
pub fn layout_round_trip(n: usize, seed: u64) -> (f64, usize) {
    use rand::{Rng, SeedableRng};
    use synclay::fixtures::{paint, random_layout, NucleusShape};
    use synclay::ingest::{extract_layout_from_mask, SizeStatistics};
    use synclay::{Canvas, Vocabulary};

    let vocab = Vocabulary::conic();
    let sizes = SizeStatistics::conic_default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut mismatched) = (0.0f64, 0usize);
    for i in 0..n {
        let side = [64, 96, 128, 256][i % 4];
        let count = rng.random_range(1..=12);
        let layout = random_layout(&vocab, &sizes, Canvas::square(side), count, None, &mut rng);
        let (_, instance, class) = paint(&layout, NucleusShape::Box, 0, &mut rng).unwrap();
        let ex = extract_layout_from_mask(&instance, &class, side as usize, side as usize, &vocab, 0).unwrap();
        assert_eq!(ex.layout.len(), layout.len(), "fixture {i}");
        let s = side as f64;
        for got in &ex.layout.cells {
            // The source cell is the one painted under the recovered centroid.
            let (px, py) = ((got.x * s) as usize, (got.y * s) as usize);
            let k = instance[py * side as usize + px] as usize - 1;
            let want = &layout.cells[k];
            let err = ((got.x - want.x) * s).abs().max(((got.y - want.y) * s).abs());
            worst = worst.max(err);
            if (got.width, got.height, got.cell_type) != (want.width, want.height, want.cell_type) {
                mismatched += 1;
            }
        }
    }
    (worst, mismatched)
}

/// Synthesizes `n` layouts cycling the grades and returns the number of
/// intersecting box pairs and the worst epithelial distance to a gland
/// boundary (px).
pub fn synthesized_overlap(n: usize, seed: u64) -> (usize, f64) {
    use rand::{Rng, SeedableRng};
    use synclay::synth::{Grade, LayoutParams, LayoutSynthesizer, EPITHELIAL_TYPE};

    let synth = LayoutSynthesizer::default();
    let epi = synth.vocabulary.id(EPITHELIAL_TYPE).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (mut overlaps, mut worst) = (0usize, 0.0f64);
    for i in 0..n {
        let grade = Grade::ALL[i % Grade::ALL.len()];
        let mut p = LayoutParams::new(grade, rng.random());
        for name in synth.vocabulary.names() {
            let v = if name == EPITHELIAL_TYPE { rng.random_range(0.2..1.0) } else { rng.random_range(0.0..0.5) };
            p = p.with_cellularity(name, v);
        }
        let s = synth.synthesize(&p).unwrap();
        let boxes = s.layout.bounding_boxes().unwrap();
        for a in 0..boxes.len() {
            for b in a + 1..boxes.len() {
                overlaps += boxes[a].intersects(&boxes[b]) as usize;
            }
        }
        let side = s.layout.canvas.width as f64;
        for c in s.layout.cells.iter().filter(|c| c.cell_type == epi) {
            let px = (c.x * side, c.y * side);
            let d = s
                .glands
                .iter()
                .map(|g| g.distance_to_boundary(px, s.layout.canvas))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    (overlaps, worst)
}
