//! Instance type catalog: the set of purchasable machine shapes a workload can
//! be moved to, with published capacities and on-demand hourly price.

use std::collections::HashMap;
use std::io::Read;

use serde::Serialize;
use thiserror::Error;

/// Header line of the catalog CSV format.
pub const CATALOG_HEADER: [&str; 4] = ["key", "cpu_ecu", "mem_gib", "cost_per_hour"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("line {line}: expected header `key,cpu_ecu,mem_gib,cost_per_hour`, found `{found}`")]
    BadHeader { line: u64, found: String },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: `{field}` must be positive, got {value}")]
    NonPositiveCapacity {
        line: u64,
        field: &'static str,
        value: f64,
    },
    #[error("line {line}: duplicate instance type key `{key}`")]
    DuplicateKey { line: u64, key: String },
    #[error("catalog has no instance types")]
    Empty,
    #[error("instance type `{0}` not found in catalog")]
    NotFound(String),
}

/// One catalog entry: a fully qualified type such as `rhel.m4.large.us-east`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceType {
    pub key: String,
    /// Published CPU capacity in ECU.
    pub cpu_capacity: f64,
    /// Published memory capacity in GiB.
    pub mem_capacity: f64,
    /// On-demand price in USD per hour.
    pub hourly_cost: f64,
}

impl InstanceType {
    pub fn new(key: impl Into<String>, cpu_capacity: f64, mem_capacity: f64, hourly_cost: f64) -> Self {
        Self {
            key: key.into(),
            cpu_capacity,
            mem_capacity,
            hourly_cost,
        }
    }
}

/// `<os>.<model>.<region>` with at least three non-empty dot-separated segments.
pub fn is_valid_key(key: &str) -> bool {
    let segments: Vec<&str> = key.split('.').collect();
    segments.len() >= 3
        && segments
            .iter()
            .all(|s| !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c == ','))
}

/// Ordered, immutable set of instance types. Entry order is the column order
/// of every matrix built from the catalog.
#[derive(Debug, Clone)]
pub struct Catalog {
    entries: Vec<InstanceType>,
    index: HashMap<String, usize>,
}

impl PartialEq for Catalog {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Catalog {
    /// Validates entries the same way the CSV loader does. Line numbers in
    /// errors are 1-based positions in `entries`, offset by one for the header.
    pub fn new(entries: Vec<InstanceType>) -> Result<Self, CatalogError> {
        let mut index = HashMap::with_capacity(entries.len());
        for (pos, entry) in entries.iter().enumerate() {
            let line = pos as u64 + 2;
            validate_entry(entry, line)?;
            if index.insert(entry.key.clone(), pos).is_some() {
                return Err(CatalogError::DuplicateKey {
                    line,
                    key: entry.key.clone(),
                });
            }
        }
        if entries.is_empty() {
            return Err(CatalogError::Empty);
        }
        Ok(Self { entries, index })
    }

    pub fn entries(&self) -> &[InstanceType] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, column: usize) -> Option<&InstanceType> {
        self.entries.get(column)
    }

    /// Column index of `key`. Matching is exact and case-sensitive.
    pub fn position(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn lookup(&self, key: &str) -> Result<&InstanceType, CatalogError> {
        self.position(key)
            .map(|j| &self.entries[j])
            .ok_or_else(|| CatalogError::NotFound(key.to_string()))
    }

    /// Serializes back to the catalog CSV format. Floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_csv(&self) -> String {
        let mut out = CATALOG_HEADER.join(",");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.key, e.cpu_capacity, e.mem_capacity, e.hourly_cost
            ));
        }
        out
    }
}

fn validate_entry(entry: &InstanceType, line: u64) -> Result<(), CatalogError> {
    if !is_valid_key(&entry.key) {
        return Err(CatalogError::MalformedRow {
            line,
            reason: format!(
                "key `{}` is not of the form <os>.<model>.<region>",
                entry.key
            ),
        });
    }
    for (field, value) in [
        ("cpu_ecu", entry.cpu_capacity),
        ("mem_gib", entry.mem_capacity),
        ("cost_per_hour", entry.hourly_cost),
    ] {
        if !value.is_finite() {
            return Err(CatalogError::MalformedRow {
                line,
                reason: format!("`{field}` is not a finite number"),
            });
        }
        if value <= 0.0 {
            return Err(CatalogError::NonPositiveCapacity { line, field, value });
        }
    }
    Ok(())
}

fn parse_field(raw: &str, field: &str, line: u64) -> Result<f64, CatalogError> {
    raw.parse::<f64>().map_err(|_| CatalogError::MalformedRow {
        line,
        reason: format!("`{field}` value `{raw}` is not a number"),
    })
}

/// Reads a catalog CSV (`key,cpu_ecu,mem_gib,cost_per_hour`), preserving row order.
pub fn load_catalog<R: Read>(source: R) -> Result<Catalog, CatalogError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(CatalogError::Empty),
        Some(rec) => rec.map_err(|e| csv_error(e, 1))?,
    };
    if header.iter().ne(CATALOG_HEADER.iter().copied()) {
        return Err(CatalogError::BadHeader {
            line: 1,
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut entries = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(e, 0))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != CATALOG_HEADER.len() {
            return Err(CatalogError::MalformedRow {
                line,
                reason: format!("expected 4 columns, found {}", rec.len()),
            });
        }
        let entry = InstanceType {
            key: rec[0].to_string(),
            cpu_capacity: parse_field(&rec[1], "cpu_ecu", line)?,
            mem_capacity: parse_field(&rec[2], "mem_gib", line)?,
            hourly_cost: parse_field(&rec[3], "cost_per_hour", line)?,
        };
        validate_entry(&entry, line)?;
        if index.insert(entry.key.clone(), entries.len()).is_some() {
            return Err(CatalogError::DuplicateKey {
                line,
                key: entry.key,
            });
        }
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(CatalogError::Empty);
    }
    Ok(Catalog { entries, index })
}

pub(crate) fn csv_error(err: csv::Error, fallback_line: u64) -> CatalogError {
    let line = err.position().map_or(fallback_line, |p| p.line());
    CatalogError::MalformedRow {
        line,
        reason: err.to_string(),
    }
}
