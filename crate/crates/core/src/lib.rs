//! Riemannian optimization on the manifold of tensors with fixed TT-rank.
//!
//! The crate covers the TT format itself ([`tt`]), tangent spaces of the
//! fixed-rank manifold ([`tangent`]), the exact Riemannian Hessian including
//! its curvature (Weingarten) term ([`hessian`]), solvers ([`optim`]), the
//! tensor-completion problem ([`completion`]) and an experiment harness
//! ([`harness`]).

pub mod ambient;
pub mod completion;
pub mod error;
pub mod harness;
pub mod hessian;
pub mod linalg;
pub mod optim;
pub mod sparse;
pub mod tangent;
pub mod tt;

pub use ambient::AmbientVector;
pub use error::{Result, TtError};
pub use sparse::SparseTensor;
pub use tangent::{make_tangent, Param, TangentVector, TtPoint};
pub use tt::{
    mu_orthogonalize, random_tt, right_orthogonalize_with_r, tt_add, tt_inner, tt_rank, tt_round, tt_svd, Core,
    DenseTensor, Orthogonality, RankTarget, RightOrthFactors, Shape, TtTensor,
};
pub use completion::{
    completion_cost, condition_estimate, sample_indices, sample_values, CompletionProblem, ConditionEstimate,
    LanczosConfig, SamplingSpec,
};
pub use harness::{check_suite, CheckLevel, CheckReport, ExperimentConfig, Summary};
pub use hessian::{fd_hess_apply, hess_apply, weingarten};
pub use optim::{Problem, RunLog, RunOutcome, StopReason};
