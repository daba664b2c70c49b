//! Linear-optics circuit simulation and sequential minimum optimization
//! (SMO) with small-sample measurement estimators.
//!
//! The crate is organised bottom-up:
//!
//! * [`fock`]: fixed-photon-number Fock sectors, permanents and the lift of
//!   mode unitaries to the sector.
//! * [`circuit`]: phase shifters with affine parameter/data phases and fixed
//!   beamsplitters; outcome probabilities, including probe-phase overrides.
//! * [`trigfit`]: reconstruction of the trigonometric dependence on one phase
//!   from `2n + 1` probes, and 1-D global minimization.
//! * [`shots`]: exact and binomial measurement oracles with keyed random
//!   streams, estimated polynomials and independent pairs.
//! * [`smo`]: the coordinate-wise trainer built on the unbiased cost
//!   estimate, and shot budget accounting.
//! * [`classifier`]: the data-reuploading classification experiment and the
//!   sweep over shot counts.
//! * [`cli`]: configuration, result files and SVG plots behind the
//!   `photonic-smo` binary.

pub mod circuit;
pub mod classifier;
pub mod cli;
pub mod fock;
pub mod shots;
pub mod smo;
pub mod trigfit;

pub use circuit::{default_reuploading_circuit, Circuit, CircuitSpec, DataPoint, ParameterVector};
pub use shots::{MeasurementOracle, OracleKind};
pub use smo::{train, TrainingConfig};
