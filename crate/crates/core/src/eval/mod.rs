//! FID, the composition-prediction experiment, augmentation and ablation.

pub mod ablate;
pub mod augment;
pub mod composition;
pub mod fid;
pub mod metrics;

pub use ablate::{ablate, standard_subsets, AblationRow, AblationTable};
pub use augment::{
    balance_with_synthetic, dataset_entries, AugmentManifest, Augmentation, BalancePlan, Distribution, ManifestEntry,
    PairSource,
};
pub use composition::{
    evaluate_predictor, train_composition_predictor, CompositionPredictor, CompositionSample, MetricRow, MetricTable,
    PredictorConfig,
};
pub use fid::{
    fid, fid_from_features, fid_resampled, frechet_distance, sqrtm_product, sqrtm_psd, FeatureExtractor, FeatureStats,
    FidReport, RandomConvFeatures,
};
pub use metrics::{auc_roc, pearson, r2, ranks, spearman};
