//! Time integration, equilibrium refinement and linear stability.

pub mod integrate;
pub mod linalg;
pub mod newton;

pub use integrate::{integrate, IntegratorConfig, Method, Trajectory, TrajectoryMeta};
pub use linalg::{classify, eigenvalues, leading_real_part, numerical_jacobian, Stability, FD_STEP, TOL_EIG};
pub use newton::{find_equilibrium, Equilibrium, NewtonConfig};
