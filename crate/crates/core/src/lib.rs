//! Exact-plus-numeric calculus of formal functions `Σ u_J y^J`, formal
//! densities, differential operators and formal distributions over a
//! discrete base or the real line, together with constructive sheaf and
//! cosheaf checks (partitions of unity, Mayer–Vietoris, gluing).
//!
//! Coefficients are exact Gaussian rationals wherever possible; integrals of
//! non-polynomial integrands on the line fall back to adaptive quadrature and
//! are reported as approximate [`Scalar`]s.

pub mod base;
pub mod densities;
pub mod diffops;
pub mod distributions;
pub mod error;
pub mod formal;
pub mod gen;
pub mod multiindex;
pub mod scalar;
pub mod sheaf;

pub use base::{
    Backend, BaseDensity, BaseFunction, BaseSpace, ClosedSet, DensityPiece, Ext, OpenSet, Point, QuadConfig, SmoothExpr,
    Support,
};
pub use densities::{DistributionalBaseDensity, FormalDensity};
pub use diffops::{DensityDiffOp, EndoDiffOp};
pub use distributions::{
    dist_space_dimension, jet_kernel_check, jet_table, BaseDistribution, CompactFormalDistribution, EVec,
    ExtendedDistribution, FormalDistribution, GeneralizedFunction, LineTerm, PointDistribution,
};
pub use error::{Error, Result};
pub use formal::{FormalFunction, SupportedFormalFunction};
pub use multiindex::{binomial, enumerate_upto, factorial, MultiIndex};
pub use scalar::{Scalar, CQ, Q};
pub use sheaf::{build_pou, Cover, PartitionOfUnity};
