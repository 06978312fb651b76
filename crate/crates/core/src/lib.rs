//! Exact diagonalisation and coherent-state effective-field spin dynamics
//! for two exchange-coupled quantum spins.

pub mod coherent;
pub mod effective;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod quantum;
pub mod sllg;
pub mod system;
pub mod validation;

pub use coherent::{BlochVector, CoherentConfiguration, StereoCoordinate};
pub use effective::{EffectiveFieldModel, FieldSample, GradientMethod, ModelKind, QuantumContext};
pub use error::{Error, Result};
pub use harness::{CriterionMode, SweepConfig, SweepResult, SweepRow};
pub use quantum::{EigenSystem, TwoSpinHamiltonian};
pub use system::{PhysicalConstants, Spin, SpinSystemSpec, Vec3};
