//! Online group-structured dictionary learning for collaborative filtering.
//!
//! The crate learns a dictionary with unit-ball columns over a stream of
//! partially observed samples, coding each sample with a group-structured
//! sparsity regularizer, and applies the result to rating prediction with
//! item-item neighbor corrections. A grid-search harness reproduces the
//! train/validation/test benchmark protocol end to end.
//!
//! Module map:
//! - [`groups`]: toroid and tree group structures plus their weight vectors.
//! - [`coder`]: structured sparse coding via the variational alternation.
//! - [`dictionary`], [`learner`]: the dictionary, online statistics with
//!   forgetting, block-coordinate updates, and the training loop.
//! - [`recommender`]: base predictions and similarity-weighted corrections.
//! - [`eval`]: metrics, the 80/10/10 split, and the grid-search protocol.
//! - [`data`]: the dense Jester CSV layout and the synthetic generator.
//! - [`config`]: the JSON run configuration tying everything together.

pub mod coder;
pub mod config;
pub mod data;
pub mod dictionary;
pub mod error;
pub mod eval;
pub mod groups;
pub mod learner;
pub mod recommender;
pub mod seeding;

mod linalg;

pub use error::{Error, Result};
