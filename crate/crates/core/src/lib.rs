//! Anytime-valid goodness-of-fit tests for unnormalized densities via Stein kernels and betting.
//!
//! Data points arrive one at a time; each is scored against the history with
//! the Stein kernel of the hypothesised (unnormalised) density, the score is
//! normalised by per-point lower bounds into a payoff `g_t >= -1`, and a
//! bettor's wealth `K_t = K_{t-1}(1 + lambda_t g_t)` is tracked. Under the
//! null the wealth is a test martingale, so rejecting once `K_t >= 1/alpha`
//! is valid at any data-dependent stopping time.
//!
//! ```
//! use std::sync::Arc;
//! use sksd::{GaussianModel, SequentialTest, Strategy};
//!
//! let null = Arc::new(GaussianModel::standard(1));
//! let mut test = SequentialTest::new(null, Strategy::Agrapa, 0.05)?;
//! for x in [0.9, 1.7, 0.4, 2.2] {
//!     let rec = test.step(&[x])?;
//!     assert!(rec.wealth >= 0.0);
//! }
//! assert_eq!(test.round(), 4);
//! # Ok::<(), sksd::Error>(())
//! ```

pub mod batch;
pub mod betting;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod models;
pub mod rng;

pub use betting::{
    next_bet, ons_bet, BettingAccumulators, CompositeRecord, CompositeTest, OnsState, SequentialTest, Strategy,
    TestStatus, TrajectoryRecord,
};
pub use error::{Error, Result};
pub use kernel::{stein_eval, ImqKernel, Point, SteinKernel};
pub use models::{BoundScale, GaussianModel, IntractableModel, Model, RbmModel, ScoreModel};
