//! Deterministic synthetic fleets for running the pipeline without real
//! telemetry. Output is the metrics and bindings CSV formats, so generated
//! data goes through the same parsers as real data.

use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::catalog::Catalog;

/// First sample timestamp (2017-01-01T00:00:00Z).
const BASE_TIMESTAMP: i64 = 1_483_228_800;
/// Five-minute cadence.
const INTERVAL_SECS: i64 = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub workload_count: usize,
    pub samples_per_series: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("workload_count must be >= 1")]
    NoWorkloads,
    #[error("samples_per_series must be >= 2, got {0}")]
    TooFewSamples(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthOutput {
    pub metrics_csv: String,
    pub bindings_csv: String,
}

pub fn workload_id(index: usize) -> String {
    format!("i-{:05}", index + 1)
}

/// Roughly bell-shaped noise in [-1, 1].
fn noise(rng: &mut ChaCha8Rng) -> f64 {
    (rng.gen::<f64>() + rng.gen::<f64>() + rng.gen::<f64>()) / 1.5 - 1.0
}

pub fn generate(spec: &SynthSpec, catalog: &Catalog) -> Result<SynthOutput, SynthError> {
    if spec.workload_count == 0 {
        return Err(SynthError::NoWorkloads);
    }
    if spec.samples_per_series < 2 {
        return Err(SynthError::TooFewSamples(spec.samples_per_series));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Cheaper types are more common in a typical fleet.
    let type_weights = WeightedIndex::new(catalog.entries().iter().map(|t| 1.0 / t.hourly_cost))
        .expect("catalog costs are positive and finite");
    let mut metrics = String::from("workload_id,timestamp,metric,value\n");
    let mut bindings = String::from("workload_id,current_type\n");

    for i in 0..spec.workload_count {
        let id = workload_id(i);
        let ty = &catalog.entries()[type_weights.sample(&mut rng)];
        writeln!(bindings, "{id},{}", ty.key).unwrap();

        // Mostly idle fleets with a long tail of busier hosts.
        let cpu_mean = 2.0 + 40.0 * rng.gen::<f64>().powi(2);
        let cpu_spread = 1.0 + 10.0 * rng.gen::<f64>();
        let mem_mean = 5.0 + 40.0 * rng.gen::<f64>().powi(2);
        let mem_spread = 0.5 + 6.0 * rng.gen::<f64>();

        for (literal, mean, spread) in [("cpu", cpu_mean, cpu_spread), ("mem", mem_mean, mem_spread)] {
            for k in 0..spec.samples_per_series {
                let value = (mean + spread * noise(&mut rng)).clamp(0.0, 100.0);
                let ts = BASE_TIMESTAMP + k as i64 * INTERVAL_SECS;
                writeln!(metrics, "{id},{ts},{literal},{value:.2}").unwrap();
            }
        }
    }

    Ok(SynthOutput {
        metrics_csv: metrics,
        bindings_csv: bindings,
    })
}
