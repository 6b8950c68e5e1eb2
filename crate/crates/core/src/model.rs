//! The workload → instance type assignment model: a column-constant cost
//! matrix and a feasibility mask under per-workload utilization factors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;

use thiserror::Error;

use crate::catalog::Catalog;
use crate::metrics::{Fleet, WorkloadProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid utilization factor {value} for {target}: must be a finite number >= 1")]
    InvalidPolicy { target: String, value: f64 },
    #[error("policy names workload `{0}`, which is not in the fleet")]
    UnknownPolicyWorkload(String),
    #[error("workload `{workload_id}` runs on `{key}`, which is not in the catalog")]
    UnknownType { workload_id: String, key: String },
    #[error("row index {index} out of range for {rows} workloads")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("line {line}: {reason}")]
    MalformedPolicy { line: u64, reason: String },
}

/// Headroom factors applied to observed demand. Workloads without an explicit
/// factor use the default.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilizationPolicy {
    default: f64,
    overrides: BTreeMap<String, f64>,
}

fn check_factor(target: &str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() && value >= 1.0 {
        Ok(value)
    } else {
        Err(ModelError::InvalidPolicy {
            target: target.to_string(),
            value,
        })
    }
}

impl UtilizationPolicy {
    pub fn uniform(factor: f64) -> Result<Self, ModelError> {
        Ok(Self {
            default: check_factor("default", factor)?,
            overrides: BTreeMap::new(),
        })
    }

    pub fn with_override(mut self, workload_id: impl Into<String>, factor: f64) -> Result<Self, ModelError> {
        let id = workload_id.into();
        let factor = check_factor(&format!("workload `{id}`"), factor)?;
        self.overrides.insert(id, factor);
        Ok(self)
    }

    pub fn default_factor(&self) -> f64 {
        self.default
    }

    pub fn overrides(&self) -> &BTreeMap<String, f64> {
        &self.overrides
    }

    pub fn factor_for(&self, workload_id: &str) -> f64 {
        self.overrides.get(workload_id).copied().unwrap_or(self.default)
    }
}

/// Reads per-workload overrides from a `workload_id,delta` CSV on top of `default`.
pub fn load_policy<R: Read>(source: R, default: f64) -> Result<UtilizationPolicy, ModelError> {
    let mut policy = UtilizationPolicy::uniform(default)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let malformed = |line, reason: String| ModelError::MalformedPolicy { line, reason };
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| malformed(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if n == 0 {
            if rec.iter().ne(["workload_id", "delta"]) {
                return Err(malformed(line, "expected header `workload_id,delta`".into()));
            }
            continue;
        }
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 2 || rec[0].is_empty() {
            return Err(malformed(line, "expected `workload_id,delta`".into()));
        }
        let factor = rec[1]
            .parse::<f64>()
            .map_err(|_| malformed(line, format!("delta `{}` is not a number", &rec[1])))?;
        if policy.overrides.contains_key(&rec[0]) {
            return Err(malformed(line, format!("duplicate workload `{}`", &rec[0])));
        }
        policy = policy.with_override(&rec[0], factor)?;
    }
    Ok(policy)
}

/// M×N assignment model over a fleet (rows) and a catalog (columns).
#[derive(Debug, Clone)]
pub struct AssignmentModel<'a> {
    fleet: &'a Fleet,
    catalog: &'a Catalog,
    policy: UtilizationPolicy,
    factors: Vec<f64>,
    cost: Vec<f64>,
    feasible: Vec<bool>,
}

pub fn build_model<'a>(
    fleet: &'a Fleet,
    catalog: &'a Catalog,
    policy: &UtilizationPolicy,
) -> Result<AssignmentModel<'a>, ModelError> {
    check_factor("default", policy.default)?;
    for (id, &f) in &policy.overrides {
        check_factor(id, f)?;
        if !fleet.workloads().iter().any(|w| &w.id == id) {
            return Err(ModelError::UnknownPolicyWorkload(id.clone()));
        }
    }
    for w in fleet.workloads() {
        if catalog.position(&w.current_type).is_none() {
            return Err(ModelError::UnknownType {
                workload_id: w.id.clone(),
                key: w.current_type.clone(),
            });
        }
    }

    let (m, n) = (fleet.len(), catalog.len());
    let factors: Vec<f64> = fleet.workloads().iter().map(|w| policy.factor_for(&w.id)).collect();
    let mut cost = Vec::with_capacity(m * n);
    let mut feasible = Vec::with_capacity(m * n);
    for (w, &factor) in fleet.workloads().iter().zip(&factors) {
        let cpu = w.cpu_demand * factor;
        let mem = w.mem_demand * factor;
        for t in catalog.entries() {
            cost.push(t.hourly_cost);
            feasible.push(cpu <= t.cpu_capacity && mem <= t.mem_capacity);
        }
    }
    Ok(AssignmentModel {
        fleet,
        catalog,
        policy: policy.clone(),
        factors,
        cost,
        feasible,
    })
}

impl<'a> AssignmentModel<'a> {
    pub fn fleet(&self) -> &'a Fleet {
        self.fleet
    }

    pub fn catalog(&self) -> &'a Catalog {
        self.catalog
    }

    pub fn policy(&self) -> &UtilizationPolicy {
        &self.policy
    }

    pub fn rows(&self) -> usize {
        self.fleet.len()
    }

    pub fn cols(&self) -> usize {
        self.catalog.len()
    }

    pub fn workload(&self, row: usize) -> &'a WorkloadProfile {
        &self.fleet.workloads()[row]
    }

    /// Utilization factor applied to `row`.
    pub fn factor(&self, row: usize) -> f64 {
        self.factors[row]
    }

    /// Demand of `row` after applying its factor: (ECU, GiB).
    pub fn scaled_demand(&self, row: usize) -> (f64, f64) {
        let w = self.workload(row);
        let f = self.factors[row];
        (w.cpu_demand * f, w.mem_demand * f)
    }

    pub fn cost(&self, row: usize, col: usize) -> f64 {
        self.cost[row * self.cols() + col]
    }

    pub fn is_feasible(&self, row: usize, col: usize) -> bool {
        self.feasible[row * self.cols() + col]
    }

    pub fn feasible_row(&self, row: usize) -> &[bool] {
        let n = self.cols();
        &self.feasible[row * n..(row + 1) * n]
    }

    /// Feasible columns for `row` (0-based), in catalog order.
    pub fn feasible_set(&self, row: usize) -> Result<Vec<usize>, ModelError> {
        if row >= self.rows() {
            return Err(ModelError::IndexOutOfRange {
                index: row,
                rows: self.rows(),
            });
        }
        Ok(self
            .feasible_row(row)
            .iter()
            .enumerate()
            .filter_map(|(j, &ok)| ok.then_some(j))
            .collect())
    }

    pub fn export_ampl(&self) -> AmplExport {
        AmplExport {
            model_text: AMPL_MODEL.to_string(),
            data_text: self.ampl_data(),
        }
    }

    fn ampl_data(&self) -> String {
        let catalog = self.catalog.entries();
        let workloads = self.fleet.workloads();
        let mut out = String::new();

        out.push_str("set SERV :=");
        for w in workloads {
            write!(out, " {}", quote(&w.id)).unwrap();
        }
        out.push_str(";\n");
        out.push_str("set INST :=");
        for t in catalog {
            write!(out, " {}", quote(&t.key)).unwrap();
        }
        out.push_str(";\n\n");

        out.push_str("param: cpu_s mem_s :=\n");
        for t in catalog {
            writeln!(out, "  {} {} {}", quote(&t.key), t.cpu_capacity, t.mem_capacity).unwrap();
        }
        out.push_str(";\n\n");

        out.push_str("param: cpu_d mem_d d :=\n");
        for (w, f) in workloads.iter().zip(&self.factors) {
            writeln!(out, "  {} {} {} {}", quote(&w.id), w.cpu_demand, w.mem_demand, f).unwrap();
        }
        out.push_str(";\n\n");

        out.push_str("param cost :");
        for t in catalog {
            write!(out, " {}", quote(&t.key)).unwrap();
        }
        out.push_str(" :=\n");
        for (i, w) in workloads.iter().enumerate() {
            write!(out, "  {}", quote(&w.id)).unwrap();
            for j in 0..catalog.len() {
                write!(out, " {}", self.cost(i, j)).unwrap();
            }
            out.push('\n');
        }
        out.push_str(";\n");
        out
    }
}

/// AMPL model (`.mod`) and data (`.dat`) text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmplExport {
    pub model_text: String,
    pub data_text: String,
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// `d` is used by the CPU and Memory constraints, so it is declared here.
/// `Trans` keeps the general-integer declaration; `Total` forces it to 0/1.
const AMPL_MODEL: &str = "\
set SERV;   #Servers
set INST;   #Instances

param cpu_s {INST} >= 0;
param mem_s {INST} >= 0;
param cpu_d {SERV} >= 0;
param mem_d {SERV} >= 0;
param d {SERV} >= 1;

param cost {SERV,INST} >= 0;
var Trans {SERV,INST} >= 0 , integer ;

minimize Total_Cost:
    sum {i in SERV, j in INST}
        cost[i,j] * Trans[i,j];

subject to CPU{i in SERV, j in INST}:
    Trans[i,j] * cpu_d[i] * d[i] <= cpu_s[j];

subject to Memory{i in SERV, j in INST}:
    Trans[i,j] * mem_d[i] * d[i] <= mem_s[j];

subject to Total{i in SERV}:
    sum {j in INST}
        Trans[i,j] = 1;
";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::InstanceType;

    fn abc() -> Catalog {
        Catalog::new(vec![
            InstanceType::new("win.a.us-east", 2.0, 4.0, 0.10),
            InstanceType::new("win.b.us-east", 4.0, 8.0, 0.20),
            InstanceType::new("win.c.us-east", 8.0, 16.0, 0.40),
        ])
        .unwrap()
    }

    fn one(cpu: f64, mem: f64) -> Fleet {
        Fleet::new(vec![WorkloadProfile {
            id: "w1".into(),
            current_type: "win.c.us-east".into(),
            cpu_demand: cpu,
            mem_demand: mem,
            current_cost: 0.40,
        }])
        .unwrap()
    }

    #[test]
    fn feasibility_under_factor() {
        let (fleet, cat) = (one(1.5, 3.0), abc());
        let m = build_model(&fleet, &cat, &UtilizationPolicy::uniform(1.0).unwrap()).unwrap();
        assert_eq!(m.feasible_row(0), [true, true, true]);
        let m = build_model(&fleet, &cat, &UtilizationPolicy::uniform(1.5).unwrap()).unwrap();
        assert_eq!(m.feasible_row(0), [false, true, true]);
        assert_eq!(m.scaled_demand(0), (2.25, 4.5));
        assert_eq!(m.feasible_set(0).unwrap(), vec![1, 2]);
    }

    #[test]
    fn factor_below_one_rejected() {
        assert!(matches!(
            UtilizationPolicy::uniform(0.9),
            Err(ModelError::InvalidPolicy { .. })
        ));
        assert!(UtilizationPolicy::uniform(f64::NAN).is_err());
        assert!(UtilizationPolicy::uniform(1.0).unwrap().with_override("w1", 0.5).is_err());
    }

    #[test]
    fn equality_is_feasible() {
        let (fleet, cat) = (one(2.0, 4.0), abc());
        let m = build_model(&fleet, &cat, &UtilizationPolicy::uniform(1.0).unwrap()).unwrap();
        assert_eq!(m.feasible_set(0).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn feasible_set_edges() {
        let cat = abc();
        let huge = one(9.0, 1.0);
        let m = build_model(&huge, &cat, &UtilizationPolicy::uniform(1.0).unwrap()).unwrap();
        assert!(m.feasible_set(0).unwrap().is_empty());
        assert_eq!(
            m.feasible_set(1).unwrap_err(),
            ModelError::IndexOutOfRange { index: 1, rows: 1 }
        );
    }

    #[test]
    fn overrides_and_unknowns() {
        let cat = abc();
        let fleet = one(1.5, 3.0);
        let policy = UtilizationPolicy::uniform(1.0).unwrap().with_override("w1", 1.5).unwrap();
        let m = build_model(&fleet, &cat, &policy).unwrap();
        assert_eq!(m.factor(0), 1.5);

        let stray = UtilizationPolicy::uniform(1.0).unwrap().with_override("w9", 2.0).unwrap();
        assert_eq!(
            build_model(&fleet, &cat, &stray).unwrap_err(),
            ModelError::UnknownPolicyWorkload("w9".into())
        );

        let mut w = fleet.workloads()[0].clone();
        w.current_type = "win.z.us-east".into();
        let lost = Fleet::new(vec![w]).unwrap();
        assert!(matches!(
            build_model(&lost, &cat, &UtilizationPolicy::uniform(1.0).unwrap()),
            Err(ModelError::UnknownType { .. })
        ));
    }

    #[test]
    fn cost_matrix_is_column_constant() {
        let cat = abc();
        let fleet = Fleet::new(
            (0..3)
                .map(|i| WorkloadProfile {
                    id: format!("w{i}"),
                    current_type: "win.b.us-east".into(),
                    cpu_demand: 1.0,
                    mem_demand: 1.0,
                    current_cost: 0.2,
                })
                .collect(),
        )
        .unwrap();
        let m = build_model(&fleet, &cat, &UtilizationPolicy::uniform(1.0).unwrap()).unwrap();
        for i in 0..3 {
            for (j, t) in cat.entries().iter().enumerate() {
                assert_eq!(m.cost(i, j), t.hourly_cost);
            }
        }
    }

    #[test]
    fn policy_csv() {
        let p = load_policy("workload_id,delta\nw1,2.5\n".as_bytes(), 1.2).unwrap();
        assert_eq!(p.factor_for("w1"), 2.5);
        assert_eq!(p.factor_for("w2"), 1.2);
        assert!(matches!(
            load_policy("workload_id,delta\nw1,0.5\n".as_bytes(), 1.0),
            Err(ModelError::InvalidPolicy { .. })
        ));
        assert!(matches!(
            load_policy("workload_id,delta\nw1,x\n".as_bytes(), 1.0),
            Err(ModelError::MalformedPolicy { line: 2, .. })
        ));
        assert!(matches!(
            load_policy("id,d\n".as_bytes(), 1.0),
            Err(ModelError::MalformedPolicy { line: 1, .. })
        ));
    }

    #[test]
    fn ampl_single_cell() {
        let cat = Catalog::new(vec![InstanceType::new("win.c.us-east", 8.0, 16.0, 0.4)]).unwrap();
        let fleet = one(1.5, 3.0);
        let m = build_model(&fleet, &cat, &UtilizationPolicy::uniform(1.5).unwrap()).unwrap();
        let ex = m.export_ampl();
        assert!(ex.model_text.lines().any(|l| l == "minimize Total_Cost:"));
        assert!(ex.model_text.lines().any(|l| l == "subject to Total{i in SERV}:"));
        assert!(ex.model_text.contains("param d {SERV}"));
        assert_eq!(
            ex.data_text,
            "set SERV := 'w1';\n\
             set INST := 'win.c.us-east';\n\n\
             param: cpu_s mem_s :=\n  'win.c.us-east' 8 16\n;\n\n\
             param: cpu_d mem_d d :=\n  'w1' 1.5 3 1.5\n;\n\n\
             param cost : 'win.c.us-east' :=\n  'w1' 0.4\n;\n"
        );
        assert_eq!(ex, m.export_ampl());
        assert_eq!(quote("it's"), "'it''s'");
    }
}
