//! Post-solve analyses: annual cost projection, utilization-factor sweeps with
//! break-even detection, source/target utilization with a two-sample t-test,
//! and instance-type consolidation.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::catalog::Catalog;
use crate::metrics::Fleet;
use crate::model::{build_model, ModelError, UtilizationPolicy};
use crate::solve::{solve_exact, AssignmentSolution};

pub const DEFAULT_HOURS_PER_YEAR: u32 = 8760;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("solution covers {solution} rows but the fleet has {fleet}")]
    RowMismatch { fleet: usize, solution: usize },
    #[error("solution assigns column {column}, catalog has {columns} types")]
    ColumnOutOfRange { column: usize, columns: usize },
    #[error("workload `{workload_id}` runs on `{key}`, which is not in the catalog")]
    UnknownType { workload_id: String, key: String },
    #[error("invalid sweep factors: {0}")]
    InvalidDeltas(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TTestError {
    #[error("each sample needs at least 2 values (got {a} and {b})")]
    InsufficientSamples { a: usize, b: usize },
    #[error("pooled variance is zero but the means differ")]
    DegenerateVariance,
}

fn check_rows(fleet: &Fleet, catalog: &Catalog, sol: &AssignmentSolution) -> Result<(), AnalysisError> {
    if sol.assignment.len() != fleet.len() {
        return Err(AnalysisError::RowMismatch {
            fleet: fleet.len(),
            solution: sol.assignment.len(),
        });
    }
    if let Some(&column) = sol.assignment.iter().find(|&&j| j >= catalog.len()) {
        return Err(AnalysisError::ColumnOutOfRange {
            column,
            columns: catalog.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadCost {
    pub id: String,
    pub source_type: String,
    pub target_type: String,
    pub source_hourly: f64,
    pub target_hourly: f64,
    /// target - source; negative is a saving.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub per_workload: Vec<WorkloadCost>,
    pub hours_per_year: u32,
    pub baseline_hourly: f64,
    pub target_hourly: f64,
    pub baseline_annual: f64,
    pub target_annual: f64,
    pub savings_fraction: f64,
}

pub fn project_costs(
    fleet: &Fleet,
    catalog: &Catalog,
    sol: &AssignmentSolution,
    hours_per_year: u32,
) -> Result<CostReport, AnalysisError> {
    check_rows(fleet, catalog, sol)?;
    let per_workload: Vec<WorkloadCost> = fleet
        .workloads()
        .iter()
        .zip(&sol.assignment)
        .map(|(w, &j)| {
            let target = &catalog.entries()[j];
            WorkloadCost {
                id: w.id.clone(),
                source_type: w.current_type.clone(),
                target_type: target.key.clone(),
                source_hourly: w.current_cost,
                target_hourly: target.hourly_cost,
                delta: target.hourly_cost - w.current_cost,
            }
        })
        .collect();
    let baseline_hourly: f64 = per_workload.iter().map(|c| c.source_hourly).sum();
    let target_hourly: f64 = per_workload.iter().map(|c| c.target_hourly).sum();
    Ok(CostReport::from_totals(per_workload, baseline_hourly, target_hourly, hours_per_year))
}

impl CostReport {
    /// Annualizes hourly totals.
    pub fn from_totals(
        per_workload: Vec<WorkloadCost>,
        baseline_hourly: f64,
        target_hourly: f64,
        hours_per_year: u32,
    ) -> Self {
        let hours = f64::from(hours_per_year);
        let baseline_annual = baseline_hourly * hours;
        let target_annual = target_hourly * hours;
        Self {
            per_workload,
            hours_per_year,
            baseline_hourly,
            target_hourly,
            baseline_annual,
            target_annual,
            savings_fraction: 1.0 - target_annual / baseline_annual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCase {
    pub delta: f64,
    /// `None` when any workload is infeasible at this factor.
    pub total_hourly: Option<f64>,
    pub total_annual: Option<f64>,
    pub infeasible_ids: Vec<String>,
    #[serde(skip)]
    pub solution: Option<AssignmentSolution>,
}

impl SweepCase {
    pub fn is_feasible(&self) -> bool {
        self.total_hourly.is_some()
    }
}

/// Consecutive feasible factors between which the projected annual cost first
/// rises above the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BreakEven {
    pub last_saving_delta: f64,
    pub first_exceeding_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub hours_per_year: u32,
    pub baseline_hourly: f64,
    pub baseline_annual: f64,
    pub cases: Vec<SweepCase>,
    pub break_even: Option<BreakEven>,
}

/// Evenly spaced factors `start, start + step, ..., <= end`, rounded to 9
/// decimals so decimal steps print cleanly.
pub fn delta_range(start: f64, end: f64, step: f64) -> Result<Vec<f64>, AnalysisError> {
    let invalid = |msg: &str| AnalysisError::InvalidDeltas(msg.to_string());
    if !(start.is_finite() && end.is_finite() && step.is_finite()) {
        return Err(invalid("start, end and step must be finite"));
    }
    if start < 1.0 {
        return Err(invalid("start must be >= 1"));
    }
    if step <= 0.0 {
        return Err(invalid("step must be > 0"));
    }
    if start > end {
        return Err(invalid("start must be <= end"));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// Solves one uniform-factor case per delta. Infeasible cases are recorded,
/// not fatal.
pub fn run_sweep(
    fleet: &Fleet,
    catalog: &Catalog,
    deltas: &[f64],
    hours_per_year: u32,
) -> Result<SweepResult, AnalysisError> {
    if deltas.is_empty() {
        return Err(AnalysisError::InvalidDeltas("no factors given".into()));
    }
    if let Some(&d) = deltas.iter().find(|d| !(d.is_finite() && **d >= 1.0)) {
        return Err(AnalysisError::InvalidDeltas(format!("{d} is below 1")));
    }
    if deltas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::InvalidDeltas(
            "factors must be strictly increasing".into(),
        ));
    }

    let hours = f64::from(hours_per_year);
    let baseline_hourly = fleet.baseline_hourly();
    let baseline_annual = baseline_hourly * hours;

    let mut cases = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let model = build_model(fleet, catalog, &UtilizationPolicy::uniform(delta)?)?;
        let case = match solve_exact(&model) {
            Ok(sol) => SweepCase {
                delta,
                total_hourly: Some(sol.total_hourly_cost),
                total_annual: Some(sol.total_hourly_cost * hours),
                infeasible_ids: Vec::new(),
                solution: Some(sol),
            },
            Err(err) => SweepCase {
                delta,
                total_hourly: None,
                total_annual: None,
                infeasible_ids: err
                    .infeasible_rows()
                    .iter()
                    .map(|r| r.workload_id.clone())
                    .collect(),
                solution: None,
            },
        };
        cases.push(case);
    }

    let break_even = find_break_even(&cases, baseline_annual);
    Ok(SweepResult {
        hours_per_year,
        baseline_hourly,
        baseline_annual,
        cases,
        break_even,
    })
}

fn find_break_even(cases: &[SweepCase], baseline_annual: f64) -> Option<BreakEven> {
    let feasible: Vec<(f64, f64)> = cases
        .iter()
        .filter_map(|c| c.total_annual.map(|t| (c.delta, t)))
        .collect();
    let first = feasible.iter().position(|&(_, t)| t > baseline_annual)?;
    if first == 0 {
        return None;
    }
    Some(BreakEven {
        last_saving_delta: feasible[first - 1].0,
        first_exceeding_delta: feasible[first].0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestVariant {
    StudentPooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub variant: TTestVariant,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sum_sq_dev(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m) * (x - m)).sum()
}

/// Student's two-sample t statistic with pooled variance; negative when
/// `mean(a) < mean(b)`.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, TTestError> {
    let (na, nb) = (a.len(), b.len());
    if na < 2 || nb < 2 {
        return Err(TTestError::InsufficientSamples { a: na, b: nb });
    }
    let (ma, mb) = (mean(a), mean(b));
    let df = (na + nb - 2) as f64;
    let pooled = (sum_sq_dev(a, ma) + sum_sq_dev(b, mb)) / df;
    let diff = ma - mb;
    let t_statistic = if pooled == 0.0 {
        if diff != 0.0 {
            return Err(TTestError::DegenerateVariance);
        }
        0.0
    } else {
        let se = (pooled * (1.0 / na as f64 + 1.0 / nb as f64)).sqrt();
        diff / se
    };
    Ok(TTestResult {
        t_statistic,
        degrees_of_freedom: df,
        variant: TTestVariant::StudentPooled,
    })
}

/// A t-test outcome that can be serialized even when the test is undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TTestOutcome {
    Computed(TTestResult),
    Unavailable { reason: String },
}

impl From<Result<TTestResult, TTestError>> for TTestOutcome {
    fn from(r: Result<TTestResult, TTestError>) -> Self {
        match r {
            Ok(t) => TTestOutcome::Computed(t),
            Err(e) => TTestOutcome::Unavailable { reason: e.to_string() },
        }
    }
}

impl TTestOutcome {
    pub fn result(&self) -> Option<&TTestResult> {
        match self {
            TTestOutcome::Computed(t) => Some(t),
            TTestOutcome::Unavailable { .. } => None,
        }
    }
}

/// Utilizations are fractions of the respective type's capacity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadUtilization {
    pub id: String,
    pub source_cpu_util: f64,
    pub target_cpu_util: f64,
    pub source_mem_util: f64,
    pub target_mem_util: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilizationMeans {
    pub source_cpu: f64,
    pub target_cpu: f64,
    pub source_mem: f64,
    pub target_mem: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilizationReport {
    pub per_workload: Vec<WorkloadUtilization>,
    pub means: UtilizationMeans,
    pub cpu_ttest: TTestOutcome,
    pub mem_ttest: TTestOutcome,
}

pub fn utilization_report(
    fleet: &Fleet,
    catalog: &Catalog,
    sol: &AssignmentSolution,
) -> Result<UtilizationReport, AnalysisError> {
    check_rows(fleet, catalog, sol)?;
    let mut per_workload = Vec::with_capacity(fleet.len());
    for (w, &j) in fleet.workloads().iter().zip(&sol.assignment) {
        let source = catalog
            .lookup(&w.current_type)
            .map_err(|_| AnalysisError::UnknownType {
                workload_id: w.id.clone(),
                key: w.current_type.clone(),
            })?;
        let target = &catalog.entries()[j];
        per_workload.push(WorkloadUtilization {
            id: w.id.clone(),
            source_cpu_util: w.cpu_demand / source.cpu_capacity,
            target_cpu_util: w.cpu_demand / target.cpu_capacity,
            source_mem_util: w.mem_demand / source.mem_capacity,
            target_mem_util: w.mem_demand / target.mem_capacity,
        });
    }
    let column = |f: fn(&WorkloadUtilization) -> f64| -> Vec<f64> { per_workload.iter().map(f).collect() };
    let source_cpu = column(|u| u.source_cpu_util);
    let target_cpu = column(|u| u.target_cpu_util);
    let source_mem = column(|u| u.source_mem_util);
    let target_mem = column(|u| u.target_mem_util);
    Ok(UtilizationReport {
        means: UtilizationMeans {
            source_cpu: mean(&source_cpu),
            target_cpu: mean(&target_cpu),
            source_mem: mean(&source_mem),
            target_mem: mean(&target_mem),
        },
        cpu_ttest: t_test(&source_cpu, &target_cpu).into(),
        mem_ttest: t_test(&source_mem, &target_mem).into(),
        per_workload,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowEdge {
    pub source_type: String,
    pub target_type: String,
    pub workload_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsolidationReport {
    pub source_type_count: usize,
    pub target_type_count: usize,
    /// Sorted by (source_type, target_type).
    pub flow_edges: Vec<FlowEdge>,
}

pub fn consolidation_report(
    fleet: &Fleet,
    catalog: &Catalog,
    sol: &AssignmentSolution,
) -> Result<ConsolidationReport, AnalysisError> {
    check_rows(fleet, catalog, sol)?;
    let mut edges: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for (w, &j) in fleet.workloads().iter().zip(&sol.assignment) {
        *edges
            .entry((w.current_type.as_str(), catalog.entries()[j].key.as_str()))
            .or_default() += 1;
    }
    let sources: BTreeSet<&str> = edges.keys().map(|&(s, _)| s).collect();
    let targets: BTreeSet<&str> = edges.keys().map(|&(_, t)| t).collect();
    Ok(ConsolidationReport {
        source_type_count: sources.len(),
        target_type_count: targets.len(),
        flow_edges: edges
            .into_iter()
            .map(|((s, t), n)| FlowEdge {
                source_type: s.to_string(),
                target_type: t.to_string(),
                workload_count: n,
            })
            .collect(),
    })
}
