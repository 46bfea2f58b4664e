//! Validation harness: Gaussianity of BFI, MUSIC Monte Carlo against the
//! CRB, dataset generation and MLP positioning.

mod dataset;
mod ks;
mod mlp;
mod music;

pub use dataset::{
    error_quantiles, gen_dataset, train_eval_positioner, Dataset, DatasetConfig, ErrorQuantiles, FeatureEncoding,
    FeatureKey, FeatureSet, PositionerReport,
};
pub use ks::{kolmogorov_pvalue, ks_gaussian_pvalue, ks_normal_pvalue, KsResult, MIN_KS_SAMPLES};
pub use mlp::{Mlp, MlpSpec, Positioner, Standardizer};
pub use music::{
    aod_grid, mc_estimator_variance, music_estimate_aod, music_estimate_aod_refined, music_spectrum, McPoint,
    MusicMcConfig,
};
