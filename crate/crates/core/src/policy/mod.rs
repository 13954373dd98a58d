//! Config selection policies: fixed per-category choices and the AutoFocus
//! dynamic controller.

mod autofocus;
mod features;
mod regressor;
mod static_policy;

pub use autofocus::{
    autofocus_decide, train_autofocus, AutoFocusModel, AutoFocusParams, ControllerState, Decision,
    DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_DECISION_WINDOW,
};
pub use features::{extract_features, FeatureVector, ROI_COUNT_CAP};
pub use regressor::{fit_regressor, polynomial_expand, predict, Weights, BASIS_LEN, DEGREE, RIDGE_LAMBDA};
pub use static_policy::{fit_static, fit_static_per_category, StaticPolicy};
