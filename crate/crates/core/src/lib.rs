//! Moments, marginals and rectangle probabilities of the doubly truncated
//! multivariate normal distribution.

pub mod error;
pub mod linalg;
pub mod marginals;
pub mod model;
pub mod moments;
pub mod precision;
pub mod prob;
pub mod sampler;
pub mod special;

pub use error::{Error, Result};
pub use linalg::{
    cholesky, condition, partitioned_inverse, CholeskyFactor, GaussianConditioner, Matrix, SymMatrix,
};
pub use marginals::{marginal_pdf_1d, marginal_pdf_2d, Marginal1d, Marginal2d, MarginalValue};
pub use model::TruncatedMvnSpec;
pub use moments::{
    detect_partition, johnson_kotz_extend, moments_auto, truncated_moments,
    univariate_truncated_moments, MomentMethod, MomentResult, Partition,
};
pub use precision::{
    conjecture_probe, precision_matrix, truncated_precision_report, ConjectureProbe, EntryStatus,
    PrecisionReport,
};
pub use prob::{mvn_rect_prob, QmcConfig, RectProbResult, MAX_DIM};
pub use sampler::{
    estimate_moments, gibbs_sample, rejection_sample, trace_export, trace_rows, McMomentEstimate,
    SampleBatch, SampleMethod, TraceRow,
};
