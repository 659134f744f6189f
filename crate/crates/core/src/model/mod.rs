//! Manipulator model: parameters, diagonal-inertia dynamics, planar
//! kinematics and the tube-rack contact environment.

mod contact;
mod dynamics;
mod kinematics;
mod params;

pub use contact::{contact_torque, ContactInfo, PegTaskEnv, Region, TubeState};
pub use dynamics::{acceleration, gravity_vector, inertia_matrix, step_dynamics, RobotState, CONTROL_DT};
pub use kinematics::{
    forward_kinematics_planar, inverse_kinematics_planar, planar_force_to_torque, planar_jacobian, planar_velocity,
    Point2,
};
pub use params::RobotParams;

pub(crate) use dynamics::{gravity_unchecked, inertia_unchecked};
