#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rightsize::{Catalog, Fleet, InstanceType, UtilizationPolicy, WorkloadProfile};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

/// A random instance with up to `max_rows` workloads and `max_cols` types.
/// Capacities and prices sit on coarse grids so equal-cost ties are common.
pub struct RandomInstance {
    pub catalog: Catalog,
    pub fleet: Fleet,
    pub policy: UtilizationPolicy,
}

pub fn random_catalog(rng: &mut ChaCha8Rng, cols: usize) -> Catalog {
    Catalog::new(
        (0..cols)
            .map(|j| {
                InstanceType::new(
                    format!("gen.t{j}.region"),
                    f64::from(rng.gen_range(1..=16u32)),
                    f64::from(rng.gen_range(1..=32u32)),
                    f64::from(rng.gen_range(1..=40u32)) / 100.0,
                )
            })
            .collect(),
    )
    .unwrap()
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_rows: usize, max_cols: usize) -> RandomInstance {
    let cols = rng.gen_range(1..=max_cols);
    let rows = rng.gen_range(1..=max_rows);
    let catalog = random_catalog(rng, cols);
    let workloads = (0..rows)
        .map(|i| {
            let current = &catalog.entries()[rng.gen_range(0..cols)];
            WorkloadProfile {
                id: format!("w{i}"),
                current_type: current.key.clone(),
                cpu_demand: rng.gen::<f64>().powi(2) * current.cpu_capacity,
                mem_demand: rng.gen::<f64>().powi(2) * current.mem_capacity,
                current_cost: current.hourly_cost,
            }
        })
        .collect();
    let fleet = Fleet::new(workloads).unwrap();
    let mut policy = UtilizationPolicy::uniform(rng.gen_range(1.0..=3.0)).unwrap();
    if rng.gen_bool(0.3) {
        let i = rng.gen_range(0..rows);
        policy = policy
            .with_override(format!("w{i}"), rng.gen_range(1.0..=3.0))
            .unwrap();
    }
    RandomInstance {
        catalog,
        fleet,
        policy,
    }
}
