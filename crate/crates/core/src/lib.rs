//! No-signalling correlation boxes and two tests of physical plausibility for them:
//! the d-ary information causality game and membership in the level-1 NPA set `Q₁`.
//!
//! Everything is generic over the scalar type. Box construction and the linear checks
//! accept any [`Scalar`] (including exact rationals); entropies, simulation, root finding
//! and semidefinite feasibility need a [`Real`].

// negated comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boxes;
pub mod eigen;
pub mod error;
pub mod info;
pub mod npa;
pub mod protocol;
pub mod report;
pub mod scalar;
pub mod threshold;

pub use boxes::{
    make_deterministic, make_isotropic, make_pr_j, make_uniform, mix, BoxDocument, CorrelationBox,
    NoiseParameter, Scenario, ValidationReport, Violation, TOL_PROB,
};
pub use eigen::{symmetric_eigen, Matrix, SymmetricEigen};
pub use error::{Error, Result};
pub use info::{
    binary_entropy, fano_lower_bound, isotropic_fano_bound, mutual_information, JointDistribution,
};
pub use npa::{
    build_moment, critical_e_ml, q1_feasible, MlThreshold, MomentMatrix, OperatorIndex,
    ProjectionScheme, Q1Options, Q1Verdict, Termination,
};
pub use protocol::{
    exact_information, ic_violated, simulate_nested, success_prob_closed, success_prob_single,
    success_recurrence, ProtocolConfig, ProtocolOutcome,
};
pub use scalar::{Real, Scalar};
pub use threshold::{critical_e, curve, table_one, TableRow, ThresholdCurve, ThresholdRecord};

/// Exact rational scalar for box algebra.
pub type Rational = num_rational::Ratio<i64>;

pub type CorrelationBoxF64 = CorrelationBox<f64>;
pub type CorrelationBoxF32 = CorrelationBox<f32>;
pub type CorrelationBoxExact = CorrelationBox<Rational>;
pub type MomentMatrixF64 = MomentMatrix<f64>;
pub type ProtocolConfigF64 = ProtocolConfig<f64>;
pub type ThresholdCurveF64 = ThresholdCurve<f64>;
