//! Near-field MIMO radar localization.
//!
//! Spherical-wavefront channel model, Fisher information and Cramér-Rao bounds
//! for multi-target 3D localization, and two cyclic maximum-likelihood grid
//! estimators (ACO for unknown noise covariance, CO-WGN for white noise).
//!
//! Geometry, channel and bound computations are generic over [`Real`]; the
//! simulation, estimation and I/O layers work in `f64`.

pub mod channel;
pub mod config;
pub mod crb;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod synthesis;
pub mod waveform;

pub use channel::{AmplitudeMode, SteeringBundle};
pub use crb::{AxisCrb, CrbReport, FimResult, NoiseCovariance, TransmitCovariance};
pub use error::{Error, Result};
pub use geometry::{build_upa, ArrayGeometry, CarrierSpec, Plane, Target, TargetScene, SPEED_OF_LIGHT};
pub use scalar::{Complex, Real};

pub type C64 = Complex<f64>;
pub type Point = nalgebra::Vector3<f64>;
pub type CMatrix = nalgebra::DMatrix<C64>;
pub type CVector = nalgebra::DVector<C64>;
pub type ArrayGeometry64 = ArrayGeometry<f64>;
pub type TargetScene64 = TargetScene<f64>;
pub type CarrierSpec64 = CarrierSpec<f64>;
pub type AmplitudeMode64 = AmplitudeMode<f64>;
pub type FimResult64 = FimResult<f64>;
pub type CrbReport64 = CrbReport<f64>;
