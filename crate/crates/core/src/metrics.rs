//! Utilization telemetry ingestion and per-workload demand attributes.
//!
//! A workload's demand for a resource is its mean utilization plus two sample
//! standard deviations, capped at 100%, then scaled against the published
//! capacity of the type it currently runs on.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Read;

use serde::Serialize;
use thiserror::Error;

use crate::catalog::{csv_error, Catalog, CatalogError};

pub const METRICS_HEADER: [&str; 4] = ["workload_id", "timestamp", "metric", "value"];
pub const BINDINGS_HEADER: [&str; 2] = ["workload_id", "current_type"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("line {line}: expected header `{expected}`, found `{found}`")]
    BadHeader {
        line: u64,
        expected: String,
        found: String,
    },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: value {value} is outside [0, 100]")]
    ValueOutOfRange { line: u64, value: f64 },
    #[error("line {line}: duplicate {metric} sample for `{workload_id}` at timestamp {timestamp}")]
    DuplicateSample {
        line: u64,
        workload_id: String,
        metric: Metric,
        timestamp: i64,
    },
    #[error("line {line}: duplicate binding for `{workload_id}`")]
    DuplicateBinding { line: u64, workload_id: String },
    #[error("{metric} series for `{workload_id}` has {count} samples, at least 2 required")]
    InsufficientSamples {
        workload_id: String,
        metric: Metric,
        count: usize,
    },
    #[error("workload `{0}` has metrics but no current-type binding")]
    UnboundWorkload(String),
    #[error("workload `{workload_id}` is bound to `{key}`, which is not in the catalog")]
    UnknownType { workload_id: String, key: String },
    #[error("duplicate workload id `{0}`")]
    DuplicateWorkload(String),
    #[error("fleet has no workloads")]
    EmptyFleet,
}

impl From<CatalogError> for MetricsError {
    fn from(err: CatalogError) -> Self {
        match err {
            CatalogError::MalformedRow { line, reason } => MetricsError::MalformedRow { line, reason },
            other => MetricsError::MalformedRow {
                line: 0,
                reason: other.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    CpuUtilization,
    MemoryUtilization,
}

impl Metric {
    /// Literal used in the metrics CSV.
    pub fn literal(self) -> &'static str {
        match self {
            Metric::CpuUtilization => "cpu",
            Metric::MemoryUtilization => "mem",
        }
    }

    pub fn from_literal(s: &str) -> Option<Self> {
        match s {
            "cpu" => Some(Metric::CpuUtilization),
            "mem" => Some(Metric::MemoryUtilization),
            _ => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.literal())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    pub workload_id: String,
    /// Seconds since the epoch.
    pub timestamp: i64,
    pub metric: Metric,
    /// Percent in [0, 100].
    pub value: f64,
}

/// Timestamp-sorted samples for one workload, split by metric.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkloadSeries {
    pub cpu: Vec<(i64, f64)>,
    pub mem: Vec<(i64, f64)>,
}

impl WorkloadSeries {
    pub fn series(&self, metric: Metric) -> &[(i64, f64)] {
        match metric {
            Metric::CpuUtilization => &self.cpu,
            Metric::MemoryUtilization => &self.mem,
        }
    }

    fn series_mut(&mut self, metric: Metric) -> &mut Vec<(i64, f64)> {
        match metric {
            Metric::CpuUtilization => &mut self.cpu,
            Metric::MemoryUtilization => &mut self.mem,
        }
    }

    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.series(metric).iter().map(|&(_, v)| v).collect()
    }
}

/// Ingested metrics keyed by workload id.
pub type MetricSeries = BTreeMap<String, WorkloadSeries>;

fn check_header(
    rec: &csv::StringRecord,
    expected: &[&str],
) -> Result<(), MetricsError> {
    if rec.iter().ne(expected.iter().copied()) {
        return Err(MetricsError::BadHeader {
            line: 1,
            expected: expected.join(","),
            found: rec.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

fn data_rows<R: Read>(
    source: R,
    header: &[&str],
) -> Result<Vec<(u64, csv::StringRecord)>, MetricsError> {
    let mut rdr = reader(source);
    let mut records = rdr.records();
    match records.next() {
        None => {
            return Err(MetricsError::BadHeader {
                line: 1,
                expected: header.join(","),
                found: String::new(),
            })
        }
        Some(rec) => check_header(&rec.map_err(|e| csv_error(e, 1))?, header)?,
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(e, 0))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            return Err(MetricsError::MalformedRow {
                line,
                reason: format!("expected {} columns, found {}", header.len(), rec.len()),
            });
        }
        rows.push((line, rec));
    }
    Ok(rows)
}

/// Parses a metrics CSV (`workload_id,timestamp,metric,value`), grouping by
/// workload and metric with each series sorted by timestamp.
pub fn ingest_metrics<R: Read>(source: R) -> Result<MetricSeries, MetricsError> {
    let mut out = MetricSeries::new();
    let mut seen: HashSet<(String, Metric, i64)> = HashSet::new();
    for (line, rec) in data_rows(source, &METRICS_HEADER)? {
        let sample = parse_sample(&rec, line)?;
        if !seen.insert((sample.workload_id.clone(), sample.metric, sample.timestamp)) {
            return Err(MetricsError::DuplicateSample {
                line,
                workload_id: sample.workload_id,
                metric: sample.metric,
                timestamp: sample.timestamp,
            });
        }
        out.entry(sample.workload_id)
            .or_default()
            .series_mut(sample.metric)
            .push((sample.timestamp, sample.value));
    }
    for series in out.values_mut() {
        series.cpu.sort_by_key(|&(t, _)| t);
        series.mem.sort_by_key(|&(t, _)| t);
    }
    Ok(out)
}

fn parse_sample(rec: &csv::StringRecord, line: u64) -> Result<MetricSample, MetricsError> {
    let malformed = |reason: String| MetricsError::MalformedRow { line, reason };
    let workload_id = &rec[0];
    if workload_id.is_empty() {
        return Err(malformed("empty workload_id".into()));
    }
    let timestamp = rec[1]
        .parse::<i64>()
        .map_err(|_| malformed(format!("timestamp `{}` is not an integer", &rec[1])))?;
    let metric = Metric::from_literal(&rec[2])
        .ok_or_else(|| malformed(format!("metric `{}` is not `cpu` or `mem`", &rec[2])))?;
    let value = rec[3]
        .parse::<f64>()
        .map_err(|_| malformed(format!("value `{}` is not a number", &rec[3])))?;
    if !(0.0..=100.0).contains(&value) {
        return Err(MetricsError::ValueOutOfRange { line, value });
    }
    Ok(MetricSample {
        workload_id: workload_id.to_string(),
        timestamp,
        metric,
        value,
    })
}

/// Workload → current type key, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings {
    entries: Vec<(String, String)>,
    index: HashMap<String, usize>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if `workload_id` was already bound.
    pub fn insert(&mut self, workload_id: impl Into<String>, current_type: impl Into<String>) -> bool {
        let id = workload_id.into();
        if self.index.contains_key(&id) {
            return false;
        }
        self.index.insert(id.clone(), self.entries.len());
        self.entries.push((id, current_type.into()));
        true
    }

    pub fn get(&self, workload_id: &str) -> Option<&str> {
        self.index.get(workload_id).map(|&i| self.entries[i].1.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parses a bindings CSV (`workload_id,current_type`).
pub fn load_bindings<R: Read>(source: R) -> Result<Bindings, MetricsError> {
    let mut bindings = Bindings::new();
    for (line, rec) in data_rows(source, &BINDINGS_HEADER)? {
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(MetricsError::MalformedRow {
                line,
                reason: "empty field".into(),
            });
        }
        if !bindings.insert(&rec[0], &rec[1]) {
            return Err(MetricsError::DuplicateBinding {
                line,
                workload_id: rec[0].to_string(),
            });
        }
    }
    Ok(bindings)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DemandStats {
    pub mean_pct: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub stddev_pct: f64,
    /// `min(mean + 2 * stddev, 100)`.
    pub demand_pct: f64,
    pub sample_count: usize,
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("{count} samples given, at least 2 required")]
pub struct InsufficientSamples {
    pub count: usize,
}

pub fn compute_demand_stats(samples: &[f64]) -> Result<DemandStats, InsufficientSamples> {
    let n = samples.len();
    if n < 2 {
        return Err(InsufficientSamples { count: n });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    let stddev = (ss / (n - 1) as f64).sqrt();
    let demand = (mean + 2.0 * stddev).min(100.0);
    Ok(DemandStats {
        mean_pct: mean,
        stddev_pct: stddev,
        demand_pct: demand,
        sample_count: n,
    })
}

/// A running instance with its observed demand in absolute capacity units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadProfile {
    pub id: String,
    /// Catalog key of the type the workload currently runs on.
    pub current_type: String,
    /// ECU.
    pub cpu_demand: f64,
    /// GiB.
    pub mem_demand: f64,
    /// USD/hour of the current type.
    pub current_cost: f64,
}

/// Ordered set of workloads; order is the row order downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    workloads: Vec<WorkloadProfile>,
}

impl Fleet {
    pub fn new(workloads: Vec<WorkloadProfile>) -> Result<Self, MetricsError> {
        if workloads.is_empty() {
            return Err(MetricsError::EmptyFleet);
        }
        let mut ids = HashSet::new();
        for w in &workloads {
            if !ids.insert(w.id.as_str()) {
                return Err(MetricsError::DuplicateWorkload(w.id.clone()));
            }
        }
        Ok(Self { workloads })
    }

    pub fn workloads(&self) -> &[WorkloadProfile] {
        &self.workloads
    }

    pub fn len(&self) -> usize {
        self.workloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workloads.is_empty()
    }

    /// Σ current hourly cost.
    pub fn baseline_hourly(&self) -> f64 {
        self.workloads.iter().map(|w| w.current_cost).sum()
    }
}

fn stats_for(
    id: &str,
    series: Option<&WorkloadSeries>,
    metric: Metric,
) -> Result<DemandStats, MetricsError> {
    let values = series.map(|s| s.values(metric)).unwrap_or_default();
    compute_demand_stats(&values).map_err(|e| MetricsError::InsufficientSamples {
        workload_id: id.to_string(),
        metric,
        count: e.count,
    })
}

/// Builds the fleet in bindings order. Every workload with metrics must be
/// bound, and every bound workload needs both series with at least two samples.
pub fn build_fleet(
    metrics: &MetricSeries,
    catalog: &Catalog,
    bindings: &Bindings,
) -> Result<Fleet, MetricsError> {
    if let Some(id) = metrics.keys().find(|id| bindings.get(id).is_none()) {
        return Err(MetricsError::UnboundWorkload(id.clone()));
    }
    let mut workloads = Vec::with_capacity(bindings.len());
    for (id, key) in bindings.iter() {
        let current = catalog.lookup(key).map_err(|_| MetricsError::UnknownType {
            workload_id: id.to_string(),
            key: key.to_string(),
        })?;
        let series = metrics.get(id);
        let cpu = stats_for(id, series, Metric::CpuUtilization)?;
        let mem = stats_for(id, series, Metric::MemoryUtilization)?;
        workloads.push(WorkloadProfile {
            id: id.to_string(),
            current_type: key.to_string(),
            cpu_demand: cpu.demand_pct / 100.0 * current.cpu_capacity,
            mem_demand: mem.demand_pct / 100.0 * current.mem_capacity,
            current_cost: current.hourly_cost,
        });
    }
    Fleet::new(workloads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Catalog, InstanceType};

    #[test]
    fn demand_stats_hand_values() {
        let s = compute_demand_stats(&[10.0, 20.0, 30.0]).unwrap();
        assert_eq!((s.mean_pct, s.stddev_pct, s.demand_pct), (20.0, 10.0, 40.0));
        assert_eq!(s.sample_count, 3);

        let flat = compute_demand_stats(&[50.0, 50.0, 50.0]).unwrap();
        assert_eq!((flat.mean_pct, flat.stddev_pct, flat.demand_pct), (50.0, 0.0, 50.0));

        // mean 96, ss = 36 + 16 + 4 + 0 = 56, var = 56/3
        let clamp = compute_demand_stats(&[90.0, 100.0, 98.0, 96.0]).unwrap();
        assert_eq!(clamp.mean_pct, 96.0);
        assert!((clamp.stddev_pct - (56.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((clamp.stddev_pct - 4.3205).abs() < 1e-4);
        assert_eq!(clamp.demand_pct, 100.0);
    }

    #[test]
    fn demand_stats_needs_two() {
        assert_eq!(compute_demand_stats(&[]).unwrap_err().count, 0);
        assert_eq!(compute_demand_stats(&[5.0]).unwrap_err().count, 1);
    }

    #[test]
    fn ingest_groups_and_sorts() {
        let src = "workload_id,timestamp,metric,value\n\
            w1,200,cpu,20\n\
            w2,100,mem,5\n\
            w1,100,cpu,10\n\
            w2,200,mem,7.5\n";
        let m = ingest_metrics(src.as_bytes()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m["w1"].cpu, vec![(100, 10.0), (200, 20.0)]);
        assert_eq!(m["w2"].mem, vec![(100, 5.0), (200, 7.5)]);
        assert!(m["w1"].mem.is_empty());
    }

    #[test]
    fn ingest_errors() {
        let over = "workload_id,timestamp,metric,value\nw1,1,cpu,120\n";
        assert_eq!(
            ingest_metrics(over.as_bytes()).unwrap_err(),
            MetricsError::ValueOutOfRange { line: 2, value: 120.0 }
        );
        let neg = "workload_id,timestamp,metric,value\nw1,1,cpu,-0.5\n";
        assert!(matches!(
            ingest_metrics(neg.as_bytes()),
            Err(MetricsError::ValueOutOfRange { .. })
        ));
        let nan = "workload_id,timestamp,metric,value\nw1,1,cpu,NaN\n";
        assert!(matches!(
            ingest_metrics(nan.as_bytes()),
            Err(MetricsError::ValueOutOfRange { .. })
        ));
        let dup = "workload_id,timestamp,metric,value\nw1,1,cpu,1\nw1,1,mem,1\nw1,1,cpu,2\n";
        assert!(matches!(
            ingest_metrics(dup.as_bytes()),
            Err(MetricsError::DuplicateSample { line: 4, .. })
        ));
        let metric = "workload_id,timestamp,metric,value\nw1,1,disk,1\n";
        assert!(matches!(
            ingest_metrics(metric.as_bytes()),
            Err(MetricsError::MalformedRow { line: 2, .. })
        ));
        let header = "id,ts,metric,value\n";
        assert!(matches!(
            ingest_metrics(header.as_bytes()),
            Err(MetricsError::BadHeader { .. })
        ));
    }

    fn catalog() -> Catalog {
        Catalog::new(vec![InstanceType::new("win.m4.xlarge.us-east", 4.0, 8.0, 0.20)]).unwrap()
    }

    #[test]
    fn build_fleet_scales_demand() {
        let src = "workload_id,timestamp,metric,value\n\
            w1,1,cpu,10\nw1,2,cpu,20\nw1,3,cpu,30\n\
            w1,1,mem,25\nw1,2,mem,25\nw1,3,mem,25\n";
        let m = ingest_metrics(src.as_bytes()).unwrap();
        let b = load_bindings("workload_id,current_type\nw1,win.m4.xlarge.us-east\n".as_bytes()).unwrap();
        let fleet = build_fleet(&m, &catalog(), &b).unwrap();
        let w = &fleet.workloads()[0];
        assert_eq!(w.cpu_demand, 1.6);
        assert_eq!(w.mem_demand, 2.0);
        assert_eq!(w.current_cost, 0.20);
    }

    #[test]
    fn build_fleet_errors() {
        let src = "workload_id,timestamp,metric,value\nw1,1,cpu,10\nw1,2,cpu,20\n";
        let m = ingest_metrics(src.as_bytes()).unwrap();

        let mut b = Bindings::new();
        b.insert("w1", "win.m4.xlarge.us-east");
        assert!(matches!(
            build_fleet(&m, &catalog(), &b),
            Err(MetricsError::InsufficientSamples {
                metric: Metric::MemoryUtilization,
                count: 0,
                ..
            })
        ));

        let mut unknown = Bindings::new();
        unknown.insert("w1", "win.m4.huge.us-east");
        assert!(matches!(
            build_fleet(&m, &catalog(), &unknown),
            Err(MetricsError::UnknownType { .. })
        ));

        assert_eq!(
            build_fleet(&m, &catalog(), &Bindings::new()).unwrap_err(),
            MetricsError::UnboundWorkload("w1".into())
        );
    }

    #[test]
    fn bindings_reject_duplicates() {
        let src = "workload_id,current_type\nw1,a.b.c\nw1,a.b.d\n";
        assert!(matches!(
            load_bindings(src.as_bytes()),
            Err(MetricsError::DuplicateBinding { line: 3, .. })
        ));
    }

    #[test]
    fn fleet_invariants() {
        let w = WorkloadProfile {
            id: "w1".into(),
            current_type: "a.b.c".into(),
            cpu_demand: 1.0,
            mem_demand: 1.0,
            current_cost: 0.1,
        };
        assert_eq!(Fleet::new(vec![]).unwrap_err(), MetricsError::EmptyFleet);
        assert_eq!(
            Fleet::new(vec![w.clone(), w]).unwrap_err(),
            MetricsError::DuplicateWorkload("w1".into())
        );
    }
}
