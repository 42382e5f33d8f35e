//! Online machine learning evaluation and hyperparameter tuning.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataspace`] reads CSV streams, generates SEA concept-drift streams,
//!   splits them sequentially and scales features online.
//! * [`learners`] holds the incremental classifiers (logistic regression and
//!   a Hoeffding tree with Gaussian split statistics).
//! * [`metrics`] and [`evaluation`] score a learner over a rolling horizon and
//!   fold metric, wall-time and memory into one scalar objective.
//! * [`searchspace`] describes the typed hyperparameters of each model and
//!   maps between tuner coordinates and concrete configurations.
//! * [`tuner`] runs the Kriging / expected-improvement optimisation loop.
//! * [`analysis`] derives the post-run tables and grids.
//! * [`experiments`] persists specs and results and runs experiments in the
//!   background.

pub mod analysis;
pub mod dataspace;
pub mod evaluation;
pub mod experiments;
pub mod learners;
pub mod metrics;
pub mod searchspace;
pub mod tuner;

pub use dataspace::{DataSchema, Dataset, SplitSpec};
pub use evaluation::{EvalResult, HorizonEvalConfig, WeightVector};
pub use experiments::{ExperimentSpec, ExperimentStatus};
pub use learners::OnlineClassifier;
pub use metrics::MetricId;
pub use searchspace::{ModelConfig, ModelId, SearchSpace};
pub use tuner::{TunerControl, TunerState};
