//! Design and validation of bilayer atomic-array light–matter interfaces.
//!
//! Units throughout: decay rates in units of the single-atom rate γ, lengths
//! in units of the wavelength λ (so `k = 2π`), times in units of `1/γ`.
//!
//! The analytic modules are generic over the scalar type ([`Real`]); the
//! aliases below fix it to `f64`. The finite-array simulation and the memory
//! dynamics are `f64` only.

pub mod bilayer;
pub mod designs;
pub mod dipole_sim;
pub mod error;
pub mod iface1d;
pub mod lattice;
pub mod memory;
pub mod scalar;

pub use error::{Error, Result};
pub use iface1d::Side;
pub use lattice::{LatticeKind, OrderIndex};
pub use bilayer::Mode;
pub use designs::ResonantCurve;
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;

pub type InterfaceParams = iface1d::InterfaceParams<f64>;
pub type ModeCoefficients = iface1d::ModeCoefficients<f64>;
pub type ScatteringResult = iface1d::ScatteringResult<f64>;
pub type LayerGeometry = lattice::LayerGeometry<f64>;
pub type DiffractionOrder = lattice::DiffractionOrder<f64>;
pub type BilayerConfig = bilayer::BilayerConfig<f64>;
pub type CollectiveMode = bilayer::CollectiveMode<f64>;
pub type EfficiencyMap = bilayer::EfficiencyMap<f64>;

pub type ResonantSet = designs::ResonantSet<f64>;

/// Library version recorded in CLI sidecars.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
