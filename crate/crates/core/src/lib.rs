//! Discriminative null-space metric learning, linear and kernelized, with
//! cross-view re-identification evaluation.
//!
//! The learner finds the directions that collapse every training class to a
//! single point (zero within-class scatter) while keeping class means apart
//! (positive between-class scatter). With C classes there are exactly C-1
//! such directions whenever the feature dimension exceeds N - C, the regime
//! this library targets; the kernelized form lifts the data so the condition
//! holds for any input. Matching quality is scored with CMC curves and mean
//! average precision over cross-camera probe/gallery splits, with optional
//! semi-supervised self-training over an unlabeled pool.
//!
//! Module map:
//! * [`dataset`]: labeled feature sets, loading, identity splits, synthesis.
//! * [`numeric`]: orthonormal bases, symmetric eigendecomposition, centering.
//! * [`linear`]: linear null-space training and projection.
//! * [`kernel`]: kernel matrices, kernelized training and projection.
//! * [`semisup`]: cross-view k-NN graphs, pseudo-classes, self-training.
//! * [`eval`]: distance matrices, CMC, mAP, multi-query pooling, fusion.
//! * [`fmat`]: binary/CSV matrix codecs.
//! * [`model_io`]: model directory serialization.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod fmat;
pub mod kernel;
pub mod linear;
pub mod model_io;
pub mod numeric;
pub mod semisup;

pub use error::{Error, Result};
