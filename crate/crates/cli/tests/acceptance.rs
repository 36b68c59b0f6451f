//! Acceptance battery. Every test prints one `criterion N: PASS|FAIL` line
//! before asserting, so `cargo test --test acceptance -- --nocapture`
//! doubles as a summary.

use std::process::Command;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use spinflow_core::verify::{self, Battery, Check, Status, VerifyConfig, VerifyReport};
use spinflow_core::ModelParams;

const FERRO: (f64, f64) = (1.0, 0.4);
const ANTI: (f64, f64) = (-1.0, 0.2);
const T_GRID: [f64; 3] = [1e-4, 1e-3, 1e-2];

/// Serializes the criteria so that wall-clock limits are not distorted by
/// other tests competing for the cores.
fn exclusive() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn params(n: usize, (j, h): (f64, f64), t: f64) -> ModelParams {
    ModelParams::new(n, 3, j, h, t)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

struct FlowRuns {
    ferro: VerifyReport,
    anti: VerifyReport,
    ferro_secs: f64,
    anti_secs: f64,
}

/// The N = 10, t = 1e-3 flows of both regimes, shared by several criteria.
fn flow_runs() -> &'static FlowRuns {
    static RUNS: OnceLock<FlowRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let cfg = VerifyConfig::default();
        let (ferro, ferro_secs) = timed(|| verify::check_flow_against_ed(&params(10, FERRO, 1e-3), &cfg).unwrap());
        let (anti, anti_secs) = timed(|| verify::check_flow_against_ed(&params(10, ANTI, 1e-3), &cfg).unwrap());
        FlowRuns { ferro, anti, ferro_secs, anti_secs }
    })
}

fn selected<'a>(reports: &[&'a VerifyReport], keep: impl Fn(&Check) -> bool) -> Vec<&'a Check> {
    reports.iter().flat_map(|r| r.checks.iter()).filter(|c| keep(c)).collect()
}

fn asserted<'a>(checks: &[&'a Check]) -> Vec<&'a Check> {
    checks.iter().copied().filter(|c| c.status != Status::ReportOnly).collect()
}

/// Prints the verdict line and then fails the test if needed.
fn verdict(n: u32, checks: &[&Check], extra: &[(String, bool)]) {
    let asserted = asserted(checks);
    let failures: Vec<&&Check> = asserted.iter().filter(|c| !c.passed()).collect();
    let extra_fail: Vec<&String> = extra.iter().filter(|(_, ok)| !ok).map(|(s, _)| s).collect();
    let ok = !asserted.is_empty() && failures.is_empty() && extra_fail.is_empty();
    let mut line = format!(
        "criterion {n}: {} ({} of {} checks passed",
        if ok { "PASS" } else { "FAIL" },
        asserted.len() - failures.len(),
        asserted.len()
    );
    for (s, _) in extra {
        line.push_str("; ");
        line.push_str(s);
    }
    line.push(')');
    println!("{line}");
    for c in &failures {
        println!(
            "    failed: {} measured {:e} expected {:?} tol {:?}",
            c.name, c.measured, c.expected, c.tol
        );
    }
    for s in &extra_fail {
        println!("    failed: {s}");
    }
    assert!(ok, "criterion {n} failed");
}

fn under(label: &str, secs: f64, limit: f64) -> (String, bool) {
    (format!("{label} {secs:.2}s < {limit}s"), secs < limit)
}

#[test]
fn criterion_01_exact_gaps() {
    let _g = exclusive();
    let cfg = VerifyConfig::default();
    let ((ferro, anti), secs) = timed(|| {
        (
            verify::check_propositions(1.0, 0.4, &[5, 6, 7, 8], &cfg.tol).unwrap(),
            verify::check_propositions(-1.0, 0.3, &[5, 6, 7, 8], &cfg.tol).unwrap(),
        )
    });
    verdict(1, &selected(&[&ferro, &anti], |_| true), &[under("runtime", secs, 1.0)]);
}

#[test]
fn criterion_02_flow_consistency() {
    let _g = exclusive();
    let runs = flow_runs();
    let checks = selected(&[&runs.ferro, &runs.anti], |c| c.name.starts_with("consistency "));
    verdict(
        2,
        &checks,
        &[under("ferro runtime", runs.ferro_secs, 30.0), under("antiferro runtime", runs.anti_secs, 30.0)],
    );
}

#[test]
fn criterion_03_isospectral() {
    let _g = exclusive();
    let runs = flow_runs();
    verdict(3, &selected(&[&runs.ferro, &runs.anti], |c| c.name.starts_with("isospectral ")), &[]);
}

#[test]
fn criterion_04_block_diagonal() {
    let _g = exclusive();
    let runs = flow_runs();
    let checks = selected(&[&runs.ferro, &runs.anti], |c| {
        c.name.starts_with("block diagonal ") || c.name.starts_with("neel blocks ")
    });
    let neel = checks.iter().filter(|c| c.name.starts_with("neel blocks ")).count();
    verdict(4, &checks, &[(format!("{neel} two-reference potentials"), neel > 0)]);
}

#[test]
fn criterion_05_final_block() {
    let _g = exclusive();
    let runs = flow_runs();
    let block = |r: &VerifyReport| r.checks.iter().filter(|c| c.name.starts_with("final block eigenvalue ")).count();
    let (nf, na) = (block(&runs.ferro), block(&runs.anti));
    let checks = selected(&[&runs.ferro, &runs.anti], |c| c.name.starts_with("final block eigenvalue "));
    verdict(5, &checks, &[(format!("block sizes {nf} and {na}"), nf == 1 && na == 2)]);
}

#[test]
fn criterion_06_ferro_gap_deviation() {
    let _g = exclusive();
    let rep = verify::check_theorem_ferro(&params(10, FERRO, 1e-3), &T_GRID, &VerifyConfig::default()).unwrap();
    verdict(6, &selected(&[&rep], |_| true), &[]);
}

#[test]
fn criterion_07_af_odd_splitting() {
    let _g = exclusive();
    let (rep, secs) =
        timed(|| verify::check_theorem_af(&params(13, ANTI, 1e-3), &T_GRID, &VerifyConfig::default()).unwrap());
    verdict(7, &selected(&[&rep], |_| true), &[under("runtime", secs, 300.0)]);
}

#[test]
fn criterion_08_af_even_splitting() {
    let _g = exclusive();
    let rep = verify::check_theorem_af(&params(10, ANTI, 1e-3), &T_GRID, &VerifyConfig::default()).unwrap();
    let exact = rep.check("degeneracy t=0").is_some_and(|c| c.passed());
    verdict(8, &selected(&[&rep], |_| true), &[("exact degeneracy at t=0".into(), exact)]);
}

#[test]
fn criterion_09_translation() {
    let _g = exclusive();
    let rep = verify::check_translation(&params(13, ANTI, 1e-3), &VerifyConfig::default()).unwrap();
    let pairs = rep.check("bulk pairs compared").map_or(0.0, |c| c.measured);
    verdict(9, &selected(&[&rep], |_| true), &[(format!("{pairs} bulk pairs"), pairs > 0.0)]);
}

#[test]
fn criterion_10_norm_ledger() {
    let _g = exclusive();
    let cfg = VerifyConfig::default();
    let ferro = verify::check_ledgers(&params(10, FERRO, 1e-4), &cfg).unwrap();
    let anti = verify::check_ledgers(&params(10, ANTI, 1e-4), &cfg).unwrap();
    let runs = flow_runs();
    let larger: Vec<&Check> = selected(&[&runs.ferro, &runs.anti], |c| c.name == "norm ledger worst ratio");
    let report_only = larger.iter().all(|c| c.status == Status::ReportOnly);
    verdict(
        10,
        &selected(&[&ferro, &anti], |c| c.name == "norm ledger worst ratio"),
        &[("ledger at t=1e-3 report-only".into(), report_only)],
    );
}

#[test]
fn criterion_11_gap_ledger() {
    let _g = exclusive();
    let runs = flow_runs();
    verdict(11, &selected(&[&runs.ferro, &runs.anti], |c| c.name.starts_with("step gap ")), &[]);
}

#[test]
fn criterion_12_step_splitting() {
    let _g = exclusive();
    let rep = verify::check_splitting(&params(10, ANTI, 1e-3), &T_GRID, &VerifyConfig::default()).unwrap();
    let odd = rep.checks.iter().any(|c| c.name.ends_with("(odd)"));
    let even = rep.checks.iter().any(|c| c.name.ends_with("(even)"));
    verdict(12, &selected(&[&rep], |_| true), &[("both parities present".into(), odd && even)]);
}

#[test]
fn criterion_13_hooked_scaling() {
    let _g = exclusive();
    let battery = Battery::default();
    let rep =
        verify::check_hooked_scaling(ANTI.0, ANTI.1, &[3, 6, 9], &battery.hooked_t_grid, &VerifyConfig::default())
            .unwrap();
    let xi3 = rep.check("exponent xi=3").is_some_and(|c| c.status == Status::ReportOnly);
    verdict(13, &selected(&[&rep], |_| true), &[("xi=3 report-only".into(), xi3)]);
}

#[test]
fn criterion_14_determinism() {
    let _g = exclusive();
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("verify.json");
    std::fs::write(
        &config,
        r#"{"n":7,"j":-1.0,"h":0.2,"t":0.01,"seed":7,"hooked_xis":[3],"hooked_t_grid":[1e-4,1e-3],"translation_sites":7}"#,
    )
    .unwrap();
    let run = |out: &str| {
        let out = dir.path().join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_spinflow"))
            .args(["verify", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.code().is_some());
        out
    };
    let (a, b) = (run("a"), run("b"));
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "timings.json")
        .collect();
    names.sort();
    let mut checks = Vec::new();
    for n in &names {
        let same = std::fs::read(a.join(n)).unwrap() == std::fs::read(b.join(n)).map_err(|_| ()).unwrap_or_default();
        checks.push((format!("{n} identical"), same));
    }
    let has_report = names.iter().any(|n| n == "report.json");
    let summary = Check::close("artifacts compared", names.len() as f64, names.len() as f64, 0.0);
    checks.push(("report.json written".into(), has_report));
    verdict(14, &[&summary], &checks);
}
