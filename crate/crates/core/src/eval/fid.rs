//! Fréchet distance between Gaussian fits of image features.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synclay_autograd::ops::Conv2dGeometry;
use synclay_autograd::{ParamStore, Tape, Tensor};

use crate::error::{Error, Result};
use crate::nets::layers::{init_rng, Conv, LEAKY_SLOPE};
use crate::nets::Ctx;

/// Maps one `[1, 3, H, W]` image to a feature vector.
pub trait FeatureExtractor {
    fn features(&self, image: &Tensor) -> Result<Vec<f64>>;

    fn dim(&self) -> usize;

    fn extract(&self, images: &[Tensor]) -> Result<Vec<Vec<f64>>> {
        images.iter().map(|i| self.features(i)).collect()
    }
}

pub const RANDOM_FEATURE_WIDTHS: [usize; 4] = [32, 64, 128, 256];

/// A fixed, seeded, untrained convolutional encoder. The pooled activations
/// of every stage are concatenated, so the features mix colour, texture and
/// coarse layout statistics. Distances are comparable only between runs
/// using the same seed.
#[derive(Debug)]
pub struct RandomConvFeatures {
    params: ParamStore,
    convs: Vec<Conv>,
}

impl RandomConvFeatures {
    pub fn new(seed: u64) -> Self {
        let mut params = ParamStore::new("features");
        let mut rng = init_rng(seed, 20);
        let mut cin = 3;
        let convs = RANDOM_FEATURE_WIDTHS
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let conv = Conv::new(&mut params, &format!("conv{i}"), cin, c, Conv2dGeometry::new(3, 2, 1), &mut rng);
                cin = c;
                conv
            })
            .collect();
        params.freeze();
        Self { params, convs }
    }
}

impl FeatureExtractor for RandomConvFeatures {
    fn features(&self, image: &Tensor) -> Result<Vec<f64>> {
        let s = image.shape();
        if s.len() != 4 || s[0] != 1 || s[1] != 3 {
            return Err(Error::Shape(format!("feature extractor expects [1, 3, H, W], got {s:?}")));
        }
        let tape = Tape::no_grad();
        let ctx = Ctx::eval(&tape);
        let mut h = tape.constant(image.clone());
        let mut out = Vec::with_capacity(self.dim());
        for c in &self.convs {
            h = c.forward(&ctx, &self.params, h).leaky_relu(LEAKY_SLOPE);
            out.extend_from_slice(h.global_avg_pool().value().data());
        }
        Ok(out)
    }

    fn dim(&self) -> usize {
        RANDOM_FEATURE_WIDTHS.iter().sum()
    }
}

/// Mean and unbiased covariance of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub count: usize,
}

impl FeatureStats {
    pub fn from_features(features: &[Vec<f64>]) -> Result<Self> {
        let n = features.len();
        if n < 2 {
            return Err(Error::Eval(format!("feature statistics need at least 2 samples, got {n}")));
        }
        let d = features[0].len();
        if d == 0 || features.iter().any(|f| f.len() != d) {
            return Err(Error::Eval("feature vectors are empty or of unequal length".into()));
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Eval("non-finite feature value".into()));
        }
        let x = DMatrix::from_fn(n, d, |i, j| features[i][j]);
        let mean = DVector::from_fn(d, |j, _| x.column(j).mean());
        let mut centred = x;
        for j in 0..d {
            let m = mean[j];
            centred.column_mut(j).add_scalar_mut(-m);
        }
        let mut cov = centred.transpose() * &centred / (n - 1) as f64;
        cov = (&cov + cov.transpose()) * 0.5;
        Ok(Self { mean, cov, count: n })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Square root of a symmetric PSD matrix; negative eigenvalues from
/// round-off are clipped to 0.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

/// `(A B)^{1/2}` for symmetric PSD `A`, `B`, computed as
/// `A^{1/2} (A^{1/2} B A^{1/2})^{1/2} A^{-1/2}`. Requires `A` invertible.
pub fn sqrtm_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = sqrtm_psd(a);
    let inner = sqrtm_psd(&(&s * b * &s));
    let s_inv = s
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Eval("matrix square root: first factor is singular".into()))?;
    Ok(s * inner * s_inv)
}

/// `tr((A B)^{1/2})`, which equals the trace of the symmetric root of
/// `A^{1/2} B A^{1/2}`.
pub fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let s = sqrtm_psd(a);
    let m = &s * b * &s;
    let eig = SymmetricEigen::new((&m + m.transpose()) * 0.5);
    eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum()
}

/// `|mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2})`.
pub fn frechet_distance(a: &FeatureStats, b: &FeatureStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Eval(format!("feature dims differ: {} vs {}", a.dim(), b.dim())));
    }
    let diff = (&a.mean - &b.mean).norm_squared();
    // Both orders, averaged, so the result is exactly symmetric.
    let cross = 0.5 * (trace_sqrt_product(&a.cov, &b.cov) + trace_sqrt_product(&b.cov, &a.cov));
    let tr = a.cov.trace() + b.cov.trace() - 2.0 * cross;
    let d = diff + tr;
    if !d.is_finite() {
        return Err(Error::Eval("non-finite distance".into()));
    }
    // Round-off can leave a tiny negative value for identical inputs.
    Ok(d.max(0.0))
}

pub fn fid_from_features(real: &[Vec<f64>], fake: &[Vec<f64>]) -> Result<f64> {
    frechet_distance(&FeatureStats::from_features(real)?, &FeatureStats::from_features(fake)?)
}

pub fn fid(real: &[Tensor], fake: &[Tensor], extractor: &dyn FeatureExtractor) -> Result<f64> {
    fid_from_features(&extractor.extract(real)?, &extractor.extract(fake)?)
}

/// FID summarised over resampled subsets.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FidReport {
    /// Distance on the full sets.
    pub full: f64,
    pub mean: f64,
    pub std: f64,
    /// One value per resample.
    pub samples: Vec<f64>,
}

impl std::fmt::Display for FidReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "FID {:.4} (full sets); {:.4} ± {:.4} over {} bootstrap resamples",
            self.full,
            self.mean,
            self.std,
            self.samples.len()
        )
    }
}

pub const DEFAULT_RESAMPLES: usize = 3;

/// Full-set FID plus mean ± sample std over `repeats` bootstrap resamples
/// (drawn with replacement, each the size of its source set).
pub fn fid_resampled(real: &[Vec<f64>], fake: &[Vec<f64>], repeats: usize, seed: u64) -> Result<FidReport> {
    let full = fid_from_features(real, fake)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |set: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..set.len()).map(|_| set[rng.random_range(0..set.len())].clone()).collect()
    };
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let (r, f) = (draw(real), draw(fake));
        samples.push(fid_from_features(&r, &f)?);
    }
    let n = samples.len() as f64;
    let mean = if samples.is_empty() { full } else { samples.iter().sum::<f64>() / n };
    let std = if samples.len() > 1 {
        (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(FidReport {
        full,
        mean,
        std,
        samples,
    })
}
