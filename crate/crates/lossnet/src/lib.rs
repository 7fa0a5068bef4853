//! Analysis toolkit for stochastic loss networks: exact stationary
//! behaviour, fixed-point approximations, fluid-limit dynamics and
//! discrete-event simulation of call blocking under admission and routing
//! controls, with every method cross-checkable against the others.

pub mod approx;
pub mod exact;
pub mod fluid;
pub mod linalg;
pub mod model;
pub mod scenario;
pub mod sim;

pub use model::{AdmissionPolicy, CallClass, NetworkSpec, OccupancyVector, ResourceUsage};
