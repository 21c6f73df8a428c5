//! Bounds on delay-based localization when the transmitter manipulates its
//! OFDM pilot with artificial noise or artificial multipath.
//!
//! Anchors that assume the public pilot estimate biased delays. This crate
//! computes the pseudo-true delays and position they converge to, the
//! misspecified Cramér-Rao bound around them, and the resulting lower bound on
//! localization error, alongside the classical bound of legitimate anchors
//! that know the pilot. A Monte-Carlo estimator checks the bounds.

pub mod bounds;
pub mod config;
pub mod delay;
pub mod error;
pub mod montecarlo;
pub mod numerics;
pub mod position;
pub mod scenario;
mod ser;
pub mod signal;
pub mod sweep;

pub use bounds::{run_bounds, BoundsReport};
pub use config::{load_config, load_scenario, parse_config, ConfigFile};
pub use delay::{DelayMismatchReport, GeneralizedFimScalar};
pub use error::{Error, Result};
pub use montecarlo::McReport;
pub use numerics::{BoundingBox, DescentSpec, LineSearchSpec};
pub use position::{BMode, DelayCovariances, GeneralizedFimMatrix, PositionBoundReport};
pub use scenario::{Anchor, Role, Scenario};
pub use signal::{AmScheme, AnScheme, GainModel, OfdmConfig, Pilot, PilotScheme, SchemeTag};
pub use sweep::{Preset, SweepRow, SweepSpec};
