//! Rightsizing of cloud workloads onto instance types.
//!
//! The pipeline ingests an instance type [`catalog`] and utilization
//! [`metrics`], derives each workload's demand, builds the assignment
//! [`model`] under a utilization factor, [`solve`]s it for minimum hourly
//! cost, and produces the [`analysis`] reports. [`synth`] generates
//! deterministic inputs and [`cli`] wires everything to the command line.

pub mod analysis;
pub mod catalog;
pub mod cli;
pub mod metrics;
pub mod model;
pub mod report;
pub mod solve;
pub mod synth;

pub use analysis::{
    consolidation_report, project_costs, run_sweep, t_test, utilization_report, ConsolidationReport,
    CostReport, SweepResult, TTestResult, UtilizationReport,
};
pub use catalog::{load_catalog, Catalog, InstanceType};
pub use metrics::{build_fleet, compute_demand_stats, ingest_metrics, load_bindings, Fleet, WorkloadProfile};
pub use model::{build_model, AssignmentModel, UtilizationPolicy};
pub use solve::{solve_bruteforce, solve_exact, validate_solution, AssignmentSolution, SolveError};
