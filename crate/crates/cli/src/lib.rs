//! Command-line driver: reads a run configuration, executes one mode, and
//! writes a JSON report plus CSV plot data.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use spinflow_core::verify::{self, Check, Status, Table, VerifyError, VerifyReport};
use thiserror::Error;

pub use config::{parse_config, Mode, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOURCE_CAP: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(clap::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("resource cap reached: {0}")]
    Resource(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) if !e.use_stderr() => EXIT_OK,
            CliError::Usage(_) | CliError::Config(_) => EXIT_CONFIG,
            CliError::Resource(_) => EXIT_RESOURCE_CAP,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) | CliError::Csv(_) => EXIT_IO,
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        if e.is_resource_cap() {
            CliError::Resource(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

/// Runs the configured mode and returns its report.
pub fn run(cfg: &RunConfig) -> Result<VerifyReport, CliError> {
    let vc = cfg.verify_config();
    let mut report = match cfg.mode {
        Mode::Gaps => {
            let (j, h) = (cfg.j.expect("validated"), cfg.h.expect("validated"));
            verify::check_propositions(j, h, &cfg.sizes(), &vc.tol)?
        }
        Mode::Spectrum => {
            let p = cfg.params()?;
            let ev = verify::chain_spectrum(&p, Some(cfg.count), vc.dense_cap, &vc.krylov_options())?;
            let mut rep = VerifyReport::new("spectrum", Some(p));
            let mut table = Table { name: "spectrum".into(), header: vec!["index".into(), "eigenvalue".into()], rows: vec![] };
            for (k, e) in ev.iter().enumerate() {
                rep.push(Check::report(format!("eigenvalue {k}"), *e));
                table.rows.push(vec![k as f64, *e]);
            }
            rep.tables.push(table);
            rep
        }
        Mode::Flow => verify::check_flow_against_ed(&cfg.params()?, &vc)?,
        Mode::Verify => verify::run_battery(&cfg.params()?, &cfg.battery(), &vc)?,
        Mode::Sweep => {
            let p = cfg.params()?;
            match p.regime() {
                spinflow_core::Regime::Ferro => verify::check_theorem_ferro(&p, &cfg.t_grid(), &vc)?,
                spinflow_core::Regime::Antiferro => verify::check_theorem_af(&p, &cfg.t_grid(), &vc)?,
            }
        }
    };
    if report.params.is_none() && cfg.mode != Mode::Gaps {
        report.params = cfg.params().ok();
    }
    Ok(report)
}

fn write_table(dir: &Path, table: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", table.name)))?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `report.json`, one CSV per table, and `timings.json`.
pub fn write_artifacts(report: &VerifyReport, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(report).map_err(|e| CliError::Numerical(e.to_string()))?;
    fs::write(dir.join("report.json"), json + "\n")?;
    for t in &report.tables {
        write_table(dir, t)?;
    }
    let timings: serde_json::Map<String, serde_json::Value> =
        report.timings.iter().map(|(k, v)| (k.clone(), serde_json::Value::from(*v))).collect();
    fs::write(
        dir.join("timings.json"),
        serde_json::to_string_pretty(&timings).map_err(|e| CliError::Numerical(e.to_string()))? + "\n",
    )?;
    Ok(())
}

/// Caps the global rayon pool at `SPINFLOW_THREADS` when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SPINFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("SPINFLOW_THREADS must be a positive integer, got `{v}`")))?;
    // a pool that already exists (e.g. in tests) keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Full program: parse, run, write, and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let outcome = (|| -> Result<i32, CliError> {
        configure_threads()?;
        let (cfg, warnings) = parse_config(args)?;
        for w in &warnings {
            eprintln!("warning: {w}");
        }
        log::info!("{:?} on {} threads, output in {}", cfg.mode, rayon::current_num_threads(), cfg.out.display());
        let report = run(&cfg)?;
        write_artifacts(&report, &cfg.out)?;
        let failed: Vec<&Check> = report.failures().collect();
        for c in &failed {
            eprintln!(
                "FAIL {}: measured {} expected {:?} tol {:?}",
                c.name, c.measured, c.expected, c.tol
            );
        }
        let asserted = report.checks.iter().filter(|c| c.status != Status::ReportOnly).count();
        println!(
            "{}: {} of {} asserted checks passed; report in {}",
            report.scenario,
            asserted - failed.len(),
            asserted,
            cfg.out.display()
        );
        Ok(if failed.is_empty() { EXIT_OK } else { EXIT_CHECKS_FAILED })
    })();
    match outcome {
        Ok(code) => code,
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
