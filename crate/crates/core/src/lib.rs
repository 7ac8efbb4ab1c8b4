//! Sparse-feature malware classifiers, feature-addition evasion attacks,
//! gradient-based explanations, and the evenness/robustness analysis that
//! ties them together.
//!
//! The modules build on each other bottom-up:
//!
//! * [`featurespace`]: sparse binary samples, libsvm I/O, synthetic data.
//! * [`models`]: linear and RBF classifiers, training, ROC metrics.
//! * [`attack`]: projected gradient descent and greedy evasion.
//! * [`explain`]: Gradient, Gradient*Input and Integrated Gradients.
//! * [`evenness`]: E1 and E2 concentration metrics.
//! * [`robustness`]: adversarial robustness over a budget grid.
//! * [`stats`]: Pearson, Spearman and Kendall correlation.
//! * [`pipeline`]: end-to-end experiments and CSV output.

pub mod attack;
pub mod error;
pub mod evenness;
pub mod explain;
pub mod featurespace;
pub mod models;
pub mod pipeline;
pub mod robustness;
pub mod stats;

pub use error::{Error, Result};
