//! Optimal assignment of workloads to instance types.
//!
//! Capacity constraints couple each assignment variable only to its own row
//! and every row picks exactly one column, so the minimum-cost assignment is
//! the per-row cheapest feasible column. [`solve_bruteforce`] enumerates every
//! candidate assignment and serves as an independent check of that argument.

use std::cmp::Ordering;

use serde::Serialize;
use thiserror::Error;

use crate::model::AssignmentModel;

/// Default enumeration budget for [`solve_bruteforce`].
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Row index → column index, one column per row, with the summed hourly cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentSolution {
    pub assignment: Vec<usize>,
    pub total_hourly_cost: f64,
}

/// A workload with no feasible column, with its factor-scaled demand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfeasibleRow {
    pub row: usize,
    pub workload_id: String,
    pub scaled_cpu: f64,
    pub scaled_mem: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("{} workload(s) fit no instance type: {}", .0.len(), infeasible_ids(.0).join(", "))]
    Infeasible(Vec<InfeasibleRow>),
    #[error("{candidates} candidate assignments exceed the enumeration budget of {budget}")]
    BudgetExceeded { candidates: u128, budget: u64 },
}

fn infeasible_ids(rows: &[InfeasibleRow]) -> Vec<&str> {
    rows.iter().map(|r| r.workload_id.as_str()).collect()
}

impl SolveError {
    pub fn infeasible_rows(&self) -> &[InfeasibleRow] {
        match self {
            SolveError::Infeasible(rows) => rows,
            SolveError::BudgetExceeded { .. } => &[],
        }
    }
}

/// Tie-break among equal-cost columns: smaller ECU, then smaller GiB, then key.
fn column_order(model: &AssignmentModel<'_>, a: usize, b: usize) -> Ordering {
    let (ta, tb) = (&model.catalog().entries()[a], &model.catalog().entries()[b]);
    ta.hourly_cost
        .total_cmp(&tb.hourly_cost)
        .then(ta.cpu_capacity.total_cmp(&tb.cpu_capacity))
        .then(ta.mem_capacity.total_cmp(&tb.mem_capacity))
        .then_with(|| ta.key.cmp(&tb.key))
}

fn infeasible_row(model: &AssignmentModel<'_>, row: usize) -> InfeasibleRow {
    let (scaled_cpu, scaled_mem) = model.scaled_demand(row);
    InfeasibleRow {
        row,
        workload_id: model.workload(row).id.clone(),
        scaled_cpu,
        scaled_mem,
    }
}

fn total_cost(model: &AssignmentModel<'_>, assignment: &[usize]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| model.cost(i, j))
        .sum()
}

/// Cheapest feasible column for every row, `None` where no column fits.
pub fn best_columns(model: &AssignmentModel<'_>) -> Vec<Option<usize>> {
    (0..model.rows())
        .map(|i| {
            (0..model.cols())
                .filter(|&j| model.is_feasible(i, j))
                .min_by(|&a, &b| column_order(model, a, b))
        })
        .collect()
}

pub fn solve_exact(model: &AssignmentModel<'_>) -> Result<AssignmentSolution, SolveError> {
    let best = best_columns(model);
    let infeasible: Vec<_> = best
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_none())
        .map(|(i, _)| infeasible_row(model, i))
        .collect();
    if !infeasible.is_empty() {
        return Err(SolveError::Infeasible(infeasible));
    }
    let assignment: Vec<usize> = best.into_iter().flatten().collect();
    let total_hourly_cost = total_cost(model, &assignment);
    Ok(AssignmentSolution {
        assignment,
        total_hourly_cost,
    })
}

/// Exhaustive search over all N^M assignments. Among equal totals the winner
/// is the row-by-row lexicographically smallest under the column tie-break.
pub fn solve_bruteforce(
    model: &AssignmentModel<'_>,
    budget: u64,
) -> Result<AssignmentSolution, SolveError> {
    let (m, n) = (model.rows(), model.cols());
    let candidates = (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if candidates > budget as u128 {
        return Err(SolveError::BudgetExceeded { candidates, budget });
    }

    let mut current = vec![0usize; m];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let feasible = current
            .iter()
            .enumerate()
            .all(|(i, &j)| model.is_feasible(i, j));
        if feasible {
            let total = total_cost(model, &current);
            let better = match &best {
                None => true,
                Some((best_total, best_cols)) => match total.total_cmp(best_total) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => current
                        .iter()
                        .zip(best_cols)
                        .map(|(&a, &b)| column_order(model, a, b))
                        .find(|o| o.is_ne())
                        == Some(Ordering::Less),
                },
            };
            if better {
                best = Some((total, current.clone()));
            }
        }
        // odometer increment, last row fastest
        let mut pos = m;
        loop {
            if pos == 0 {
                return match best {
                    Some((total_hourly_cost, assignment)) => Ok(AssignmentSolution {
                        assignment,
                        total_hourly_cost,
                    }),
                    None => Err(SolveError::Infeasible(
                        (0..m)
                            .filter(|&i| (0..n).all(|j| !model.is_feasible(i, j)))
                            .map(|i| infeasible_row(model, i))
                            .collect(),
                    )),
                };
            }
            pos -= 1;
            current[pos] += 1;
            if current[pos] < n {
                break;
            }
            current[pos] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// The solution does not assign exactly one column to every row.
    RowCountMismatch { expected: usize, actual: usize },
    ColumnOutOfRange { row: usize, column: usize },
    CapacityViolation {
        row: usize,
        column: usize,
        cpu_exceeded: bool,
        mem_exceeded: bool,
    },
    CostMismatch { reported: f64, recomputed: f64 },
}

/// Re-checks capacity and one-column-per-row constraints and the reported total.
pub fn validate_solution(model: &AssignmentModel<'_>, sol: &AssignmentSolution) -> Vec<Violation> {
    let mut out = Vec::new();
    if sol.assignment.len() != model.rows() {
        out.push(Violation::RowCountMismatch {
            expected: model.rows(),
            actual: sol.assignment.len(),
        });
    }
    let mut recomputed = 0.0;
    for (i, &j) in sol.assignment.iter().enumerate().take(model.rows()) {
        let Some(t) = model.catalog().get(j) else {
            out.push(Violation::ColumnOutOfRange { row: i, column: j });
            continue;
        };
        let (cpu, mem) = model.scaled_demand(i);
        let cpu_exceeded = cpu > t.cpu_capacity;
        let mem_exceeded = mem > t.mem_capacity;
        if cpu_exceeded || mem_exceeded {
            out.push(Violation::CapacityViolation {
                row: i,
                column: j,
                cpu_exceeded,
                mem_exceeded,
            });
        }
        recomputed += model.cost(i, j);
    }
    // NaN totals count as mismatches
    let matches = (sol.total_hourly_cost - recomputed).abs() <= 1e-9;
    if !matches {
        out.push(Violation::CostMismatch {
            reported: sol.total_hourly_cost,
            recomputed,
        });
    }
    out
}
