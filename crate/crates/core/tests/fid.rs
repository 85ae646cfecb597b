mod common;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use synclay::eval::{fid, fid_from_features, fid_resampled, sqrtm_product, FeatureExtractor, RandomConvFeatures};
use synclay_autograd::Tensor;

fn gaussian_cloud(mu: &[f64], sd: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| mu.iter().zip(sd).map(|(m, s)| m + s * z.sample(&mut r)).collect()).collect()
}

#[test]
fn known_gaussians_match_closed_form() {
    let mu_a = [0.0, 1.0, -0.5, 2.0];
    let sd_a = [1.0, 0.5, 2.0, 1.5];
    let mu_b = [0.5, 0.0, 0.5, 2.5];
    let sd_b = [0.8, 1.2, 1.0, 1.5];
    let a = gaussian_cloud(&mu_a, &sd_a, 10_000, 1);
    let b = gaussian_cloud(&mu_b, &sd_b, 10_000, 2);
    let va: Vec<f64> = sd_a.iter().map(|s| s * s).collect();
    let vb: Vec<f64> = sd_b.iter().map(|s| s * s).collect();
    let want = common::frechet_diagonal(&mu_a, &va, &mu_b, &vb);
    let got = fid_from_features(&a, &b).unwrap();
    assert!((got - want).abs() < 1e-2 * want.max(1.0), "{got} vs {want}");
    assert!(fid_from_features(&a, &a).unwrap() < 1e-6);
    assert_eq!(fid_from_features(&a, &b).unwrap(), fid_from_features(&b, &a).unwrap());
}

fn random_spd(d: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let z = Normal::new(0.0, 1.0).unwrap();
    let m = DMatrix::from_fn(d, d, |_, _| z.sample(r));
    &m * m.transpose() + DMatrix::identity(d, d) * 0.1
}

#[test]
fn product_root_squares_back() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    for d in [2, 5, 12] {
        let (a, b) = (random_spd(d, &mut r), random_spd(d, &mut r));
        let s = sqrtm_product(&a, &b).unwrap();
        let err = (&s * &s - &a * &b).abs().max();
        assert!(err < 1e-8, "d={d}: {err}");
    }
}

#[test]
fn images_through_the_extractor() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let e = RandomConvFeatures::new(0);
    let set: Vec<Tensor> = (0..6).map(|_| Tensor::uniform(&[1, 3, 32, 32], -1.0, 1.0, &mut r)).collect();
    let dark: Vec<Tensor> = (0..6).map(|_| Tensor::uniform(&[1, 3, 32, 32], -1.0, -0.5, &mut r)).collect();
    assert!(fid(&set, &set, &e).unwrap() < 1e-6);
    assert!(fid(&set, &dark, &e).unwrap() > 1e-3);
    assert!(fid(&set[..1], &dark, &e).is_err());
    assert_eq!(e.features(&set[0]).unwrap(), e.features(&set[0]).unwrap());
}

#[test]
fn resampled_report_has_three_draws() {
    let a = gaussian_cloud(&[0.0, 0.0], &[1.0, 1.0], 200, 5);
    let b = gaussian_cloud(&[1.0, 0.0], &[1.0, 1.0], 200, 6);
    let rep = fid_resampled(&a, &b, 3, 9).unwrap();
    assert_eq!(rep.samples.len(), 3);
    assert!(rep.std >= 0.0);
    assert!((rep.mean - rep.full).abs() < 0.5);
    assert!(rep.to_string().contains("bootstrap"));
}
