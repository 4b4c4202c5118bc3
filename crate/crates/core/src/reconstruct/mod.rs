//! From convex solutions back to explicit threshold networks.

mod build;
mod caratheodory;
mod realize;

pub use build::{build_deep, build_from_delta, build_two_layer, lasso_coefficients};
pub use caratheodory::{caratheodory_decompose, CaratheodoryDecomposition};
pub use realize::{
    realize_pinv, realize_svm, realize_witness, PatternRealization, RealizationMethod, DEFAULT_SVM_ITERATIONS, SVM_C,
};
