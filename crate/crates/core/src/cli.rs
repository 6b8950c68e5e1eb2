//! Command-line front end. [`run`] parses arguments and returns the process
//! exit code: 0 on success, 1 on input or configuration errors, 2 when the
//! model is infeasible.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    consolidation_report, delta_range, project_costs, run_sweep, utilization_report,
    DEFAULT_HOURS_PER_YEAR,
};
use crate::catalog::{load_catalog, Catalog};
use crate::metrics::{build_fleet, ingest_metrics, load_bindings, Fleet};
use crate::model::{build_model, load_policy, UtilizationPolicy};
use crate::report::{AssignmentReport, Format, Render};
use crate::solve::solve_exact;
use crate::synth::{generate, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rightsize", version, about = "Assign cloud workloads to the cheapest instance types that fit their demand")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one assignment and write assignment, cost, utilization and consolidation reports.
    Optimize(OptimizeArgs),
    /// Solve one case per utilization factor and report cost against the baseline.
    Sweep(SweepArgs),
    /// Write the assignment model and data as AMPL `.mod` / `.dat` files.
    ExportAmpl(OptimizeArgs),
    /// Generate a synthetic metrics and bindings pair from a catalog.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Instance type catalog CSV (`key,cpu_ecu,mem_gib,cost_per_hour`).
    #[arg(long)]
    pub catalog: PathBuf,
    /// Utilization samples CSV (`workload_id,timestamp,metric,value`).
    #[arg(long)]
    pub metrics: PathBuf,
    /// Current type per workload CSV (`workload_id,current_type`).
    #[arg(long)]
    pub bindings: PathBuf,
    #[arg(long, default_value_t = DEFAULT_HOURS_PER_YEAR)]
    pub hours_per_year: u32,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Utilization factor applied to every workload without a policy entry (>= 1).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub delta: f64,
    /// Per-workload factors CSV (`workload_id,delta`).
    #[arg(long)]
    pub policy: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Factor range as `start:end:step`.
    #[arg(long, default_value = "1.0:4.0:0.1")]
    pub sweep: SweepSpec,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 108)]
    pub count: usize,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// `start:end:step`. Range checks happen when the factors are expanded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl FromStr for SweepSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, end, step] = parts[..] else {
            return Err(format!("expected start:end:step, got `{s}`"));
        };
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{p}` is not a number in sweep spec `{s}`"))
        };
        Ok(SweepSpec {
            start: num(start)?,
            end: num(end)?,
            step: num(step)?,
        })
    }
}

impl SweepSpec {
    pub fn deltas(&self) -> Result<Vec<f64>, String> {
        delta_range(self.start, self.end, self.step).map_err(|e| e.to_string())
    }
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Infeasible(String),
}

impl Failure {
    fn at(path: &Path, err: impl std::fmt::Display) -> Self {
        Failure::Input(format!("{}: {err}", path.display()))
    }
}

type CmdResult = Result<(), Failure>;

/// Runs the CLI with `args` (including the program name).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Optimize(args) => cmd_optimize(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::ExportAmpl(args) => cmd_export_ampl(&args),
        Command::Synth(args) => cmd_synth(&args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INPUT
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            EXIT_INFEASIBLE
        }
    }
}

fn open(path: &Path) -> Result<fs::File, Failure> {
    fs::File::open(path).map_err(|e| Failure::at(path, e))
}

fn read_catalog(path: &Path) -> Result<Catalog, Failure> {
    load_catalog(open(path)?).map_err(|e| Failure::at(path, e))
}

fn read_fleet(input: &InputArgs, catalog: &Catalog) -> Result<Fleet, Failure> {
    let metrics = ingest_metrics(open(&input.metrics)?).map_err(|e| Failure::at(&input.metrics, e))?;
    let bindings = load_bindings(open(&input.bindings)?).map_err(|e| Failure::at(&input.bindings, e))?;
    build_fleet(&metrics, catalog, &bindings).map_err(|e| Failure::at(&input.bindings, e))
}

fn read_policy(args: &OptimizeArgs) -> Result<UtilizationPolicy, Failure> {
    match &args.policy {
        Some(path) => load_policy(open(path)?, args.delta).map_err(|e| Failure::at(path, e)),
        None => UtilizationPolicy::uniform(args.delta).map_err(|e| Failure::Input(format!("--delta: {e}"))),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::at(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::at(&path, e))
}

fn cmd_optimize(args: &OptimizeArgs) -> CmdResult {
    let input = &args.input;
    let policy = read_policy(args)?;
    let catalog = read_catalog(&input.catalog)?;
    let fleet = read_fleet(input, &catalog)?;
    let model = build_model(&fleet, &catalog, &policy).map_err(|e| Failure::Input(e.to_string()))?;

    let ext = input.format.extension();
    let assignment = AssignmentReport::from_model(&model);
    write(&input.out, &format!("assignment.{ext}"), &assignment.render(input.format))?;

    let sol = match solve_exact(&model) {
        Ok(sol) => sol,
        Err(e) => return Err(Failure::Infeasible(e.to_string())),
    };
    let analysis_err = |e: crate::analysis::AnalysisError| Failure::Input(e.to_string());
    let cost = project_costs(&fleet, &catalog, &sol, input.hours_per_year).map_err(analysis_err)?;
    let util = utilization_report(&fleet, &catalog, &sol).map_err(analysis_err)?;
    let consolidation = consolidation_report(&fleet, &catalog, &sol).map_err(analysis_err)?;
    write(&input.out, &format!("cost_report.{ext}"), &cost.render(input.format))?;
    write(&input.out, &format!("utilization_report.{ext}"), &util.render(input.format))?;
    write(&input.out, &format!("consolidation_report.{ext}"), &consolidation.render(input.format))?;

    println!(
        "{} workloads: {:.4} -> {:.4} $/h ({:.2}% savings), {} -> {} instance types",
        fleet.len(),
        cost.baseline_hourly,
        cost.target_hourly,
        cost.savings_fraction * 100.0,
        consolidation.source_type_count,
        consolidation.target_type_count
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    let input = &args.input;
    let deltas = args.sweep.deltas().map_err(|e| Failure::Input(format!("--sweep: {e}")))?;
    let catalog = read_catalog(&input.catalog)?;
    let fleet = read_fleet(input, &catalog)?;
    let result = run_sweep(&fleet, &catalog, &deltas, input.hours_per_year)
        .map_err(|e| Failure::Input(e.to_string()))?;

    let ext = input.format.extension();
    write(&input.out, &format!("sweep.{ext}"), &result.render(input.format))?;
    write(&input.out, "annual_cost.csv", &result.to_csv())?;
    let cases_dir = input.out.join("cases");
    for (k, case) in result.cases.iter().enumerate() {
        let policy = UtilizationPolicy::uniform(case.delta).map_err(|e| Failure::Input(e.to_string()))?;
        let model = build_model(&fleet, &catalog, &policy).map_err(|e| Failure::Input(e.to_string()))?;
        let report = AssignmentReport::from_model(&model);
        write(&cases_dir, &format!("case-{}.{ext}", k + 1), &report.render(input.format))?;
    }

    let feasible = result.cases.iter().filter(|c| c.is_feasible()).count();
    match result.break_even {
        Some(b) => println!(
            "{} cases ({} feasible); break-even between delta {} and {}",
            result.cases.len(),
            feasible,
            b.last_saving_delta,
            b.first_exceeding_delta
        ),
        None => println!("{} cases ({} feasible); no break-even bracket", result.cases.len(), feasible),
    }
    if feasible == 0 {
        return Err(Failure::Infeasible("no sweep case is feasible".into()));
    }
    Ok(())
}

fn cmd_export_ampl(args: &OptimizeArgs) -> CmdResult {
    let input = &args.input;
    let policy = read_policy(args)?;
    let catalog = read_catalog(&input.catalog)?;
    let fleet = read_fleet(input, &catalog)?;
    let model = build_model(&fleet, &catalog, &policy).map_err(|e| Failure::Input(e.to_string()))?;
    let export = model.export_ampl();
    write(&input.out, "model.mod", &export.model_text)?;
    write(&input.out, "model.dat", &export.data_text)?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> CmdResult {
    let catalog = read_catalog(&args.catalog)?;
    let spec = SynthSpec {
        seed: args.seed,
        workload_count: args.count,
        samples_per_series: args.samples,
    };
    let out = generate(&spec, &catalog).map_err(|e| Failure::Input(e.to_string()))?;
    write(&args.out, "metrics.csv", &out.metrics_csv)?;
    write(&args.out, "bindings.csv", &out.bindings_csv)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_spec_parsing() {
        let s: SweepSpec = "1.0:4.0:0.1".parse().unwrap();
        assert_eq!(s.deltas().unwrap().len(), 31);
        assert_eq!("1.0:1.0:0.1".parse::<SweepSpec>().unwrap().deltas().unwrap(), vec![1.0]);
        assert!("2.0:1.0:0.1".parse::<SweepSpec>().unwrap().deltas().is_err());
        assert!("1.0:4.0".parse::<SweepSpec>().is_err());
        assert!("a:4.0:0.1".parse::<SweepSpec>().is_err());
    }
}
