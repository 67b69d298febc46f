//! Grip-force estimation from temporal pressure features.

mod cv;
pub mod dataset;
mod feature;
mod model;
mod svr;

pub use cv::{assign_folds, cross_validate, dataset_from_trials, rmse, CvConfig, CvReport, FoldResult, ForceTrial};
pub use feature::{build_feature, FeatureSet, ForceFeature, FEATURE_DIM};
pub use model::{ForceModel, MODEL_VERSION};
pub use svr::{default_gamma, kkt_residual, train, Dataset, SvrParams, TrainReport};
