//! Housing-market integration and contagion analytics for metropolitan
//! house price indices.
//!
//! The pipeline runs from raw index levels and national factor series to
//! rolling factor-model R² ([`integration`]), Lee–Mykland jump statistics
//! ([`jumps`]), pairwise return and jump correlations ([`correlations`]) and
//! satellite-on-primary lead-lag regressions ([`contagion`]).

pub mod contagion;
pub mod correlations;
pub mod error;
pub mod ingest;
pub mod integration;
pub mod jumps;
pub mod linreg;
pub mod panel;
pub mod stats;
pub mod synth;

pub use contagion::{ContagionFit, ContagionOptions, ContagionSpec, InteractionKind, RegionGroup, SerialPolicy};
pub use correlations::{JumpCentering, JumpCorrOptions, PairCorrelation, PairKind, PairMode, PairSet, StratumSummary};
pub use error::{Error, ErrorClass, Result};
pub use ingest::{FactorPanel, FactorSpec, HpiData, Transform};
pub use integration::{DependentMode, IntegrationOptions, IntegrationReport, IntegrationSeries};
pub use jumps::{JumpConfig, JumpSeries, JumpThreshold, LmScaling};
pub use linreg::{RegressionFit, TStat};
pub use panel::{CensusDivision, CoastFlag, IndexAveraging, MsaMeta, Quarter, ReturnPanel, Series};
