//! Conformal geometry of timelike surfaces in the projective light cone.
pub mod blaschke;
pub mod conformal_frame;
pub mod detectors;
pub mod error;
pub mod grid;
pub mod pseudo_linear;
pub mod surface_catalog;
pub mod taylor_jets;
pub mod thomsen;

pub use blaschke::{classify, PairClassification, PairConfig, PairData, PairLabel, PairThresholds};
pub use conformal_frame::{frame_at, frame_at_order, ConformalFrame, Residuals};
pub use detectors::{DetectorReport, Thresholds};
pub use error::{Error, Result};
pub use grid::Grid;
pub use pseudo_linear::{CausalType, MetricSignature, PseudoVector, Scalar};
pub use surface_catalog::{catalog, catalog_chart, parse_chart, Source, SurfaceChart};
pub use taylor_jets::Jet2;
pub use thomsen::{ThomsenOutcome, ThomsenResult};

/// Jet-valued vector.
pub type JetVector = PseudoVector<Jet2>;
