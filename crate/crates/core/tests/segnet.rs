use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synclay::fixtures::{fixture_records, FixtureSpec, NucleusShape};
use synclay::nets::{Ctx, SegNet};
use synclay::train::{loss_seg, pixel_accuracy, train_segnet, SegnetTraining};
use synclay::Vocabulary;
use synclay_autograd::gradcheck::check_directional;
use synclay_autograd::Tensor;

fn boxes(seed: u64, n: usize) -> Vec<synclay::ingest::DatasetRecord> {
    let mut spec = FixtureSpec::new(64, seed);
    spec.shape = NucleusShape::Box;
    fixture_records(&spec, &Vocabulary::conic(), n).unwrap()
}

#[test]
fn learns_coloured_boxes() {
    let train = boxes(1, 16);
    let held_out = boxes(2, 8);
    let (net, losses) = train_segnet(&train, 7, &SegnetTraining::default()).unwrap();
    assert!(losses.last().unwrap() < &losses[0]);
    let acc = pixel_accuracy(&net, &held_out).unwrap();
    assert!(acc >= 0.95, "held-out pixel accuracy {acc}");
    assert!(net.params.is_frozen());
}

#[test]
fn cross_entropy_gradient_wrt_image() {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    let net = SegNet::new(7, &mut r);
    let image = Tensor::uniform(&[1, 3, 32, 32], -1.0, 1.0, &mut r);
    let labels: Vec<u8> = (0..32 * 32).map(|i| (i * 3 % 7) as u8).collect();
    let rep = check_directional(
        &[image],
        |tape, v| loss_seg(&labels, net.forward(&Ctx::eval(tape), v[0]).unwrap()).unwrap(),
        // Roundoff dominates below this step: the loss is O(1) while some
        // directional derivatives are O(1e-7).
        1e-4,
        8,
        &mut r,
    );
    assert!(rep.max_relative_error() < 1e-3, "{:?}", rep.probes);
}

#[test]
fn empty_training_set_is_an_error() {
    assert!(train_segnet(&[], 7, &SegnetTraining::default()).is_err());
}
