//! Integrable whole-body orientation (WBO) synthesis for floating-base
//! mechanisms.
//!
//! The WBO is a configuration-only quaternion `Q(q; Θ)` relative to the base
//! whose induced angular velocity approximates the local connection
//! `A(q) = M_B⁻¹ M_q` of the centroidal angular momentum. The crate provides
//!
//! - [`spatial`]: quaternion and rigid-body algebra,
//! - [`model`]: kinematic-tree models (JSON), joint locking, sampling,
//! - [`centroidal`]: momentum matrices, local connection, reconstruction,
//! - [`basis`]: monomial features and their Jacobian,
//! - [`orientation`]: the WBO function and the approximated momentum,
//! - [`fit`]: the freeze-and-solve coefficient fit,
//! - [`planar`]: closed-form bar-and-flywheel reference models,
//! - [`artifact`]: coefficient, report and evaluation file formats,
//! - [`cli`]: the command implementations behind the `wbo` binary.

pub mod artifact;
pub mod basis;
pub mod centroidal;
pub mod cli;
pub mod fit;
pub mod model;
pub mod orientation;
pub mod planar;
pub mod spatial;
pub mod trajectory;

pub use basis::{build_basis, MonomialBasis};
pub use centroidal::{
    centroidal_matrices, centroidal_momentum_oracle, forward_kinematics, local_connection,
    reconstruct_base_orientation, CentroidalMatrices, LocalConnectionSample,
};
pub use fit::{fit_wbo, FitReport, FitSettings, FitStatus};
pub use model::{parse_model, Configuration, RobotModel};
pub use orientation::WboFunction;
pub use planar::BarFlywheelParams;
pub use spatial::{Pose, SpatialInertia, UnitQuaternion};

/// Crate version embedded in every output file.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
