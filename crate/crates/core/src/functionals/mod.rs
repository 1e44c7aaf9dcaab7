//! Crisanti–Sommers, Parisi and zero-temperature functionals.

pub mod continuous;
pub mod discrete;
pub mod order;
pub mod quadrature;

pub use continuous::{continuous_cs, continuous_cs_rewritten, continuous_parisi, gse_functional};
pub use discrete::{
    discrete_cs, discrete_cs_grad, discrete_parisi, discrete_parisi_with, gse_discrete,
    lambda_levels, CsGradient, FieldTerm,
};
pub use order::{
    sine_interpolate, DiscreteOrderParam, Interp, MatrixPath, MeasureFn, MeasureMode,
    PathSegment, SegmentKind, Side, ZeroTempTriple,
};
pub use quadrature::{Grid, DEFAULT_N_QUAD};
