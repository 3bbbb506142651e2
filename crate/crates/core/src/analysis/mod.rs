//! Scenario runs, parameter sweeps, symmetry audits and equilibrium tables.

pub mod audit;
pub mod equilibria;
pub mod io;
pub mod scenario;
pub mod sweep;

pub use audit::{audit_equivariance, AuditConfig, AuditMode, AuditReport, AUDIT_TOL};
pub use equilibria::{
    full_equilibria, full_node_equilibria, list_equilibria, nearest_full_equilibrium, EquilibriumMode, EquilibriumRow,
    NodeEquilibrium,
};
pub use scenario::{run_scenario, InitialCondition, IntegratorSettings, Scenario, ScenarioOutcome, ScenarioSpec, ScenarioSummary};
pub use sweep::{run_sweep, SweepParameter, SweepReport, SweepSpec};
