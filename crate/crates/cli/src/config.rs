//! Run configuration: a JSON file merged with command-line overrides.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use spinflow_core::verify::{Battery, Tolerances, VerifyConfig};
use spinflow_core::{flow::FlowConfig, ModelParams};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Ising block gaps against their closed forms.
    Gaps,
    /// Low-lying eigenvalues of the chain.
    Spectrum,
    /// Full flow transcript and final block.
    Flow,
    /// The complete check battery.
    Verify,
    /// Hopping scans of the full-chain gap statements.
    Sweep,
}

#[derive(Debug, Parser)]
#[command(name = "spinflow", version, about = "Local block diagonalization of the XXZ chain, checked against exact diagonalization")]
struct Cli {
    mode: Mode,
    /// JSON file with any of the keys below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    xi: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    j: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    /// Comma-separated hoppings, e.g. `1e-4,1e-3,1e-2`.
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dense_cap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Fully resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub n: Option<usize>,
    #[serde(default = "default_xi")]
    pub xi: usize,
    pub j: Option<f64>,
    pub h: Option<f64>,
    #[serde(default = "default_t")]
    pub t: f64,
    pub t_grid: Option<Vec<f64>>,
    /// Block sizes for `gaps`; defaults to `n - 1` and `n`, or 5 to 8.
    pub sizes: Option<Vec<usize>>,
    /// Eigenvalues reported by `spectrum`.
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_dense_cap")]
    pub dense_cap: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_support")]
    pub max_support_sites: usize,
    #[serde(default = "default_true")]
    pub check_consistency: bool,
    #[serde(default)]
    pub tol: Tolerances,
    pub hooked_xis: Option<Vec<usize>>,
    pub hooked_t_grid: Option<Vec<f64>>,
    /// Chain length of the translation scenario in `verify`; 0 skips it.
    pub translation_sites: Option<usize>,
}

fn default_xi() -> usize {
    3
}
fn default_t() -> f64 {
    1e-3
}
fn default_count() -> usize {
    6
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_dense_cap() -> usize {
    1 << 12
}
fn default_support() -> usize {
    FlowConfig::default().max_support_sites
}
fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn params(&self) -> Result<ModelParams, CliError> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CliError::Config(format!("mode {:?} needs `{name}`", self.mode).to_lowercase()))
        };
        let n = self
            .n
            .ok_or_else(|| CliError::Config(format!("mode {:?} needs `n`", self.mode).to_lowercase()))?;
        Ok(ModelParams::new(n, self.xi, need(self.j, "j")?, need(self.h, "h")?, self.t))
    }

    pub fn t_grid(&self) -> Vec<f64> {
        let mut g = self.t_grid.clone().unwrap_or_else(|| Battery::default().t_grid);
        g.sort_by(f64::total_cmp);
        g
    }

    pub fn sizes(&self) -> Vec<usize> {
        match (&self.sizes, self.n) {
            (Some(s), _) => s.clone(),
            (None, Some(n)) if n >= 3 => vec![n - 1, n],
            _ => vec![5, 6, 7, 8],
        }
    }

    pub fn verify_config(&self) -> VerifyConfig {
        VerifyConfig {
            dense_cap: self.dense_cap,
            seed: self.seed,
            tol: self.tol.clone(),
            flow: FlowConfig {
                max_support_sites: self.max_support_sites,
                check_consistency: self.check_consistency,
                ..FlowConfig::default()
            },
            ..VerifyConfig::default()
        }
    }

    pub fn battery(&self) -> Battery {
        let d = Battery::default();
        Battery {
            proposition_sizes: self.sizes.clone().unwrap_or(d.proposition_sizes),
            t_grid: self.t_grid(),
            hooked_xis: self.hooked_xis.clone().unwrap_or(d.hooked_xis),
            hooked_t_grid: self.hooked_t_grid.clone().unwrap_or(d.hooked_t_grid),
            translation_sites: self.translation_sites.unwrap_or(d.translation_sites),
        }
    }

    /// Constraint checks; soft violations come back as warnings.
    pub fn validate(&self) -> Result<Vec<String>, CliError> {
        if self.xi == 0 || self.xi % 3 != 0 {
            return Err(CliError::Config(format!("xi must be a positive multiple of 3, got {}", self.xi)));
        }
        if let Some(n) = self.n {
            if n < 2 || (n - 1) % self.xi != 0 {
                return Err(CliError::Config(format!(
                    "(N-1)/xi not integral: N={n}, xi={}; use N = 1 + M*xi",
                    self.xi
                )));
            }
        }
        if self.t_grid.as_ref().is_some_and(|g| g.iter().any(|t| !(*t >= 0.0))) {
            return Err(CliError::Config("t-grid entries must be nonnegative".into()));
        }
        if self.dense_cap == 0 {
            return Err(CliError::Config("dense-cap must be positive".into()));
        }
        match self.mode {
            Mode::Gaps => {
                if self.j.is_none() || self.h.is_none() {
                    return Err(CliError::Config("mode gaps needs `j` and `h`".into()));
                }
                Ok(Vec::new())
            }
            _ => self.params()?.validate().map_err(|e| CliError::Config(e.to_string())),
        }
    }
}

/// Splits `--tol.<name> value` and `--tol.<name>=value` out of the argument list.
fn take_tolerances(args: Vec<OsString>) -> Result<(Vec<OsString>, Map<String, Value>), CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut tol = Map::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        let Some(tail) = s.strip_prefix("--tol.") else {
            rest.push(a);
            continue;
        };
        let (name, value) = match tail.split_once('=') {
            Some((n, v)) => (n.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Config(format!("--tol.{tail} needs a value")))?;
                (tail.to_string(), v.to_string_lossy().into_owned())
            }
        };
        let x: f64 = value
            .parse()
            .map_err(|_| CliError::Config(format!("--tol.{name}: `{value}` is not a number")))?;
        tol.insert(name, Value::from(x));
    }
    Ok((rest, tol))
}

fn set(obj: &mut Map<String, Value>, key: &str, v: Option<impl Serialize>) {
    if let Some(v) = v {
        obj.insert(key.to_string(), serde_json::to_value(v).expect("plain values serialize"));
    }
}

/// Parses the command line (including the program name) into a validated
/// configuration and its warnings.
pub fn parse_config<I, T>(args: I) -> Result<(RunConfig, Vec<String>), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let (args, tol) = take_tolerances(args.into_iter().map(Into::into).collect())?;
    let cli = Cli::try_parse_from(args).map_err(CliError::Usage)?;
    let mut obj = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text)
                .map_err(|e| CliError::Config(format!("malformed config {}: {e}", path.display())))?
            {
                Value::Object(m) => m,
                _ => return Err(CliError::Config(format!("config {} is not a JSON object", path.display()))),
            }
        }
        None => Map::new(),
    };
    set(&mut obj, "mode", Some(cli.mode));
    set(&mut obj, "n", cli.n);
    set(&mut obj, "xi", cli.xi);
    set(&mut obj, "j", cli.j);
    set(&mut obj, "h", cli.h);
    set(&mut obj, "t", cli.t);
    set(&mut obj, "t_grid", cli.t_grid);
    set(&mut obj, "out", cli.out);
    set(&mut obj, "dense_cap", cli.dense_cap);
    set(&mut obj, "seed", cli.seed);
    if !tol.is_empty() {
        let entry = obj.entry("tol").or_insert_with(|| Value::Object(Map::new()));
        let Value::Object(t) = entry else {
            return Err(CliError::Config("`tol` must be an object".into()));
        };
        t.extend(tol);
    }
    let cfg: RunConfig =
        serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
    let warnings = cfg.validate()?;
    Ok((cfg, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn parse(args: &[&str]) -> Result<(RunConfig, Vec<String>), CliError> {
        parse_config(std::iter::once("spinflow").chain(args.iter().copied()))
    }

    #[test]
    fn gaps_config_from_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"mode":"gaps","n":10,"xi":3,"j":1.0,"h":0.4}}"#).unwrap();
        let (c, w) = parse(&["gaps", "--config", f.path().to_str().unwrap()]).unwrap();
        assert_eq!(c.mode, Mode::Gaps);
        assert_eq!(c.n, Some(10));
        assert_eq!(c.t, 1e-3);
        assert!(w.is_empty());
        assert_eq!(c.sizes(), vec![9, 10]);
    }

    #[test]
    fn flags_override_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"n":10,"j":1.0,"h":0.4,"t":0.01,"tol":{{"consistency":1e-6}}}}"#).unwrap();
        let (c, _) = parse(&[
            "flow",
            "--config",
            f.path().to_str().unwrap(),
            "--t",
            "0.002",
            "--j=-1",
            "--h",
            "0.2",
            "--tol.consistency",
            "1e-9",
            "--tol.block_diag=1e-11",
            "--t-grid",
            "1e-2,1e-4",
        ])
        .unwrap();
        assert_eq!(c.t, 0.002);
        assert_eq!(c.j, Some(-1.0));
        assert_eq!(c.tol.consistency, 1e-9);
        assert_eq!(c.tol.block_diag, 1e-11);
        assert_eq!(c.t_grid(), vec![1e-4, 1e-2]);
    }

    #[test]
    fn rejects_non_integral_length() {
        let e = parse(&["flow", "--n", "11", "--j", "1", "--h", "0.4"]).unwrap_err();
        assert!(e.to_string().contains("(N-1)/xi not integral"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn strong_field_is_a_warning() {
        let (_, w) = parse(&["flow", "--n", "10", "--j=-1", "--h", "0.9"]).unwrap();
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("|J|/2"));
    }

    #[test]
    fn unknown_tolerance_is_rejected() {
        let e = parse(&["flow", "--n", "10", "--j", "1", "--h", "0.4", "--tol.nonsense", "1"]).unwrap_err();
        assert!(e.to_string().contains("nonsense"), "{e}");
    }

    #[test]
    fn missing_model_field() {
        let e = parse(&["spectrum", "--n", "10", "--j", "1"]).unwrap_err();
        assert!(e.to_string().contains("`h`"), "{e}");
    }

    #[test]
    fn malformed_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "{{ not json").unwrap();
        let e = parse(&["gaps", "--config", f.path().to_str().unwrap()]).unwrap_err();
        assert!(e.to_string().contains("malformed"), "{e}");
    }
}
