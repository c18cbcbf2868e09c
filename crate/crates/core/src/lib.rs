//! Verification toolkit for the mechanics of mixtures of simple bodies.
//!
//! Fields live on uniform grids ([`fields`]) and are differentiated with
//! second-order central stencils ([`diffops`]). A [`MixtureState`] holds every
//! constituent field; the residual evaluators in [`balances`], [`power`],
//! [`energetics`] and [`covariance`] measure how far a state is from the
//! balance laws, and [`simulate`] integrates a binary mixture in time.

pub mod analytic;
pub mod balances;
pub mod covariance;
pub mod diffops;
pub mod energetics;
pub mod error;
pub mod fields;
pub mod mixture;
pub mod power;
pub mod report;
pub mod simulate;

pub use analytic::{AnalyticFieldSpec, Jet, TensorSpec, VectorSpec};
pub use balances::{close_state_via_balances, BinaryScenario, DiffusiveStress, Manufactured, SkewConvention};
pub use covariance::{ConstitutiveEnergy, EnergyModel, SpatialDeformation};
pub use energetics::{FluxSign, SupplyForm, TimeWindow};
pub use error::{Error, Result};
pub use fields::{BoundaryMode, Field, Grid, Mat3, Part, ScalarField, TensorField, Vec3, VectorField};
pub use mixture::{ConstituentState, MixtureState};
pub use power::ObserverChange;
pub use report::{Check, Richardson, SuiteReport};
pub use simulate::ScenarioConfig;
