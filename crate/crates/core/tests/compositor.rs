mod common;

use common::criteria::random_box;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synclay::layout::BoundingBox;
use synclay::nets::{compose_intermediate, crop_and_resize};
use synclay_autograd::ops::Overlap;
use synclay_autograd::{Tape, Tensor};

#[test]
fn compose_and_crop_match_pointwise_oracle() {
    let worst = common::criteria::compositor_deviation(120, 11);
    assert!(worst < 1e-6, "max deviation {worst}");
}

#[test]
fn constant_mask_fills_its_box_exactly() {
    let tape = Tape::no_grad();
    let b = BoundingBox { x0: 3, y0: 5, x1: 13, y1: 9 };
    let emb = tape.constant(Tensor::new(&[1, 2], vec![2.0, -1.0]));
    let masks = tape.constant(Tensor::ones(&[1, 1, 8, 8]));
    let t = compose_intermediate(emb, masks, &[b], (16, 16), Overlap::Sum).unwrap().value();
    for y in 0..16 {
        for x in 0..16 {
            let inside = b.contains(x, y);
            assert_eq!(t.get(&[0, 0, y as usize, x as usize]), if inside { 2.0 } else { 0.0 });
            assert_eq!(t.get(&[0, 1, y as usize, x as usize]), if inside { -1.0 } else { 0.0 });
        }
    }
}

#[test]
fn max_overlap_keeps_the_larger_value() {
    let tape = Tape::no_grad();
    let b = BoundingBox { x0: 0, y0: 0, x1: 4, y1: 4 };
    let emb = tape.constant(Tensor::new(&[2, 1], vec![1.0, 3.0]));
    let masks = tape.constant(Tensor::ones(&[2, 1, 4, 4]));
    let sum = compose_intermediate(emb, masks, &[b, b], (4, 4), Overlap::Sum).unwrap().value();
    let max = compose_intermediate(emb, masks, &[b, b], (4, 4), Overlap::Max).unwrap().value();
    assert!(sum.data().iter().all(|&v| v == 4.0));
    assert!(max.data().iter().all(|&v| v == 3.0));
}

#[test]
fn bad_boxes_are_errors() {
    let tape = Tape::no_grad();
    let emb = tape.constant(Tensor::ones(&[1, 1]));
    let masks = tape.constant(Tensor::ones(&[1, 1, 4, 4]));
    let outside = BoundingBox { x0: 10, y0: 0, x1: 20, y1: 4 };
    assert!(compose_intermediate(emb, masks, &[outside], (16, 16), Overlap::Sum).is_err());
    let empty = BoundingBox { x0: 2, y0: 2, x1: 2, y1: 4 };
    assert!(compose_intermediate(emb, masks, &[empty], (16, 16), Overlap::Sum).is_err());
    let img = tape.constant(Tensor::ones(&[1, 3, 16, 16]));
    assert!(crop_and_resize(img, &[], 8).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Changing one cell's embedding only changes pixels inside its box.
    #[test]
    fn edits_stay_inside_the_box(seed in 0u64..10_000, delta in 0.1f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = (32usize, 32usize);
        let n = rng.random_range(2..5);
        let boxes: Vec<_> = (0..n).map(|_| random_box(&mut rng, h as u32, w as u32)).collect();
        let emb = Tensor::uniform(&[n, 2], -1.0, 1.0, &mut rng);
        let masks = Tensor::uniform(&[n, 1, 8, 8], 0.0, 1.0, &mut rng);
        let mut edited = emb.clone();
        edited.set(&[0, 1], emb.get(&[0, 1]) + delta);
        let tape = Tape::no_grad();
        let run = |e: &Tensor| compose_intermediate(tape.constant(e.clone()), tape.constant(masks.clone()), &boxes, (h, w), Overlap::Sum).unwrap().value();
        let (a, b) = (run(&emb), run(&edited));
        for c in 0..2 {
            for y in 0..h {
                for x in 0..w {
                    if !boxes[0].contains(x as u32, y as u32) {
                        prop_assert_eq!(a.get(&[0, c, y, x]), b.get(&[0, c, y, x]));
                    }
                }
            }
        }
    }
}
