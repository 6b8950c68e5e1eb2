//! Report rendering: pretty JSON, aligned plain-text tables, and CSV tables
//! suitable for plotting.

use serde::Serialize;

use crate::analysis::{
    ConsolidationReport, CostReport, SweepResult, TTestOutcome, UtilizationReport,
};
use crate::model::AssignmentModel;
use crate::solve::best_columns;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Text => "txt",
            Format::Csv => "csv",
        }
    }
}

pub trait Render: Serialize {
    fn to_text(&self) -> String;
    fn to_csv(&self) -> String;

    fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize to JSON");
        s.push('\n');
        s
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Text => self.to_text(),
            Format::Csv => self.to_csv(),
        }
    }
}

fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let joined: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        out.push_str(joined.join("  ").trim_end());
        out.push('\n');
    };
    line(headers.to_vec());
    line(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

fn csv_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(headers).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 input")
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

/// Per-workload recommendation, including workloads that fit no type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentRow {
    pub id: String,
    pub current_type: String,
    pub target_type: Option<String>,
    pub factor: f64,
    pub scaled_cpu: f64,
    pub scaled_mem: f64,
    pub source_hourly: f64,
    pub target_hourly: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentReport {
    pub feasible: bool,
    pub total_hourly_cost: Option<f64>,
    pub infeasible_ids: Vec<String>,
    pub rows: Vec<AssignmentRow>,
}

impl AssignmentReport {
    pub fn from_model(model: &AssignmentModel<'_>) -> Self {
        let best = best_columns(model);
        let catalog = model.catalog();
        let rows: Vec<AssignmentRow> = best
            .iter()
            .enumerate()
            .map(|(i, col)| {
                let w = model.workload(i);
                let (scaled_cpu, scaled_mem) = model.scaled_demand(i);
                let target = col.map(|j| &catalog.entries()[j]);
                AssignmentRow {
                    id: w.id.clone(),
                    current_type: w.current_type.clone(),
                    target_type: target.map(|t| t.key.clone()),
                    factor: model.factor(i),
                    scaled_cpu,
                    scaled_mem,
                    source_hourly: w.current_cost,
                    target_hourly: target.map(|t| t.hourly_cost),
                }
            })
            .collect();
        let infeasible_ids: Vec<String> = rows
            .iter()
            .filter(|r| r.target_type.is_none())
            .map(|r| r.id.clone())
            .collect();
        let feasible = infeasible_ids.is_empty();
        AssignmentReport {
            feasible,
            total_hourly_cost: feasible
                .then(|| rows.iter().filter_map(|r| r.target_hourly).sum()),
            infeasible_ids,
            rows,
        }
    }
}

impl Render for AssignmentReport {
    fn to_text(&self) -> String {
        let mut out = String::new();
        match self.total_hourly_cost {
            Some(t) => out.push_str(&format!("total hourly cost: {t:.4}\n\n")),
            None => out.push_str(&format!(
                "INFEASIBLE: {} workload(s) fit no instance type: {}\n\n",
                self.infeasible_ids.len(),
                self.infeasible_ids.join(", ")
            )),
        }
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.id.clone(),
                    r.current_type.clone(),
                    r.target_type.clone().unwrap_or_else(|| "INFEASIBLE".into()),
                    format!("{:.2}", r.factor),
                    format!("{:.4}", r.scaled_cpu),
                    format!("{:.4}", r.scaled_mem),
                    format!("{:.4}", r.source_hourly),
                    opt(r.target_hourly, 4),
                ]
            })
            .collect();
        out.push_str(&table(
            &["workload", "current_type", "target_type", "factor", "cpu_ecu", "mem_gib", "source_$/h", "target_$/h"],
            &rows,
        ));
        out
    }

    fn to_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.id.clone(),
                    r.current_type.clone(),
                    r.target_type.clone().unwrap_or_default(),
                    r.factor.to_string(),
                    r.scaled_cpu.to_string(),
                    r.scaled_mem.to_string(),
                    r.source_hourly.to_string(),
                    r.target_hourly.map(|v| v.to_string()).unwrap_or_default(),
                ]
            })
            .collect();
        csv_table(
            &["workload_id", "current_type", "target_type", "delta", "scaled_cpu", "scaled_mem", "source_hourly", "target_hourly"],
            &rows,
        )
    }
}

impl Render for CostReport {
    fn to_text(&self) -> String {
        let mut out = format!(
            "baseline: {:.4} $/h  {:.2} $/yr\n\
             target:   {:.4} $/h  {:.2} $/yr\n\
             savings:  {:.2}%  ({} h/yr)\n\n",
            self.baseline_hourly,
            self.baseline_annual,
            self.target_hourly,
            self.target_annual,
            self.savings_fraction * 100.0,
            self.hours_per_year
        );
        let rows: Vec<Vec<String>> = self
            .per_workload
            .iter()
            .map(|c| {
                vec![
                    c.id.clone(),
                    c.source_type.clone(),
                    c.target_type.clone(),
                    format!("{:.4}", c.source_hourly),
                    format!("{:.4}", c.target_hourly),
                    format!("{:+.4}", c.delta),
                ]
            })
            .collect();
        out.push_str(&table(
            &["workload", "source_type", "target_type", "source_$/h", "target_$/h", "delta"],
            &rows,
        ));
        out
    }

    fn to_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .per_workload
            .iter()
            .map(|c| {
                vec![
                    c.id.clone(),
                    c.source_type.clone(),
                    c.target_type.clone(),
                    c.source_hourly.to_string(),
                    c.target_hourly.to_string(),
                    c.delta.to_string(),
                ]
            })
            .collect();
        csv_table(
            &["workload_id", "source_type", "target_type", "source_hourly", "target_hourly", "delta"],
            &rows,
        )
    }
}

fn ttest_line(name: &str, t: &TTestOutcome) -> String {
    match t {
        TTestOutcome::Computed(r) => format!(
            "{name} t-test (source vs target): t = {:.5}, df = {}\n",
            r.t_statistic, r.degrees_of_freedom
        ),
        TTestOutcome::Unavailable { reason } => format!("{name} t-test unavailable: {reason}\n"),
    }
}

impl Render for UtilizationReport {
    fn to_text(&self) -> String {
        let m = &self.means;
        let mut out = format!(
            "mean cpu utilization: source {:.4}  target {:.4}\n\
             mean mem utilization: source {:.4}  target {:.4}\n",
            m.source_cpu, m.target_cpu, m.source_mem, m.target_mem
        );
        out.push_str(&ttest_line("cpu", &self.cpu_ttest));
        out.push_str(&ttest_line("mem", &self.mem_ttest));
        out.push('\n');
        let rows: Vec<Vec<String>> = self
            .per_workload
            .iter()
            .map(|u| {
                vec![
                    u.id.clone(),
                    format!("{:.4}", u.source_cpu_util),
                    format!("{:.4}", u.target_cpu_util),
                    format!("{:.4}", u.source_mem_util),
                    format!("{:.4}", u.target_mem_util),
                ]
            })
            .collect();
        out.push_str(&table(
            &["workload", "source_cpu", "target_cpu", "source_mem", "target_mem"],
            &rows,
        ));
        out
    }

    fn to_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .per_workload
            .iter()
            .map(|u| {
                vec![
                    u.id.clone(),
                    u.source_cpu_util.to_string(),
                    u.target_cpu_util.to_string(),
                    u.source_mem_util.to_string(),
                    u.target_mem_util.to_string(),
                ]
            })
            .collect();
        csv_table(
            &["workload_id", "source_cpu_util", "target_cpu_util", "source_mem_util", "target_mem_util"],
            &rows,
        )
    }
}

impl Render for ConsolidationReport {
    fn to_text(&self) -> String {
        let mut out = format!(
            "distinct instance types: {} source -> {} target\n\n",
            self.source_type_count, self.target_type_count
        );
        let rows: Vec<Vec<String>> = self
            .flow_edges
            .iter()
            .map(|e| vec![e.source_type.clone(), e.target_type.clone(), e.workload_count.to_string()])
            .collect();
        out.push_str(&table(&["source_type", "target_type", "workloads"], &rows));
        out
    }

    fn to_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .flow_edges
            .iter()
            .map(|e| vec![e.source_type.clone(), e.target_type.clone(), e.workload_count.to_string()])
            .collect();
        csv_table(&["source_type", "target_type", "workload_count"], &rows)
    }
}

impl Render for SweepResult {
    fn to_text(&self) -> String {
        let mut out = format!(
            "baseline: {:.4} $/h  {:.2} $/yr ({} h/yr)\n",
            self.baseline_hourly, self.baseline_annual, self.hours_per_year
        );
        match &self.break_even {
            Some(b) => out.push_str(&format!(
                "break-even between delta {} and {}\n\n",
                b.last_saving_delta, b.first_exceeding_delta
            )),
            None => out.push_str("no break-even bracket\n\n"),
        }
        let rows: Vec<Vec<String>> = self
            .cases
            .iter()
            .enumerate()
            .map(|(k, c)| {
                vec![
                    (k + 1).to_string(),
                    c.delta.to_string(),
                    opt(c.total_hourly, 4),
                    opt(c.total_annual, 2),
                    c.infeasible_ids.len().to_string(),
                ]
            })
            .collect();
        out.push_str(&table(&["case", "delta", "total_$/h", "total_$/yr", "infeasible"], &rows));
        out
    }

    /// Annual cost against the baseline per factor.
    fn to_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .cases
            .iter()
            .map(|c| {
                vec![
                    c.delta.to_string(),
                    c.total_hourly.map(|v| v.to_string()).unwrap_or_default(),
                    c.total_annual.map(|v| v.to_string()).unwrap_or_default(),
                    self.baseline_annual.to_string(),
                    c.is_feasible().to_string(),
                    c.infeasible_ids.len().to_string(),
                ]
            })
            .collect();
        csv_table(
            &["delta", "total_hourly", "total_annual", "baseline_annual", "feasible", "infeasible_count"],
            &rows,
        )
    }
}
