//! Command-line front end: flag and config resolution, experiment dispatch,
//! artifact writing and the exit-code contract.
//!
//! Exit codes: 0 pass, 2 a verified bound was violated, 1 operational
//! error, 64 malformed configuration, 73 unwritable output.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    locate_kappa, resolvent_bound_experiment, strip_estimate_experiment, verify_eigenvalue_asymptotics_with,
    AsymptoticsOptions, FrozenConstant, ResolventOptions, StripOptions,
};
use crate::error::Error;
use crate::grid::Grid1D;
use crate::operators::OperatorSpec;
use crate::reduction::{find_lambda_root, heuristic_start};
use crate::spectra::{flagged, fmt17, pseudospectrum_grid, survey_spectrum, Window};
use crate::variational::{
    auxiliary_airy_estimate, compute_rho0, default_lambda_samples, nu_curve_on, verify_scaling_law_with,
    ScalingOptions, DEFAULT_NU_NODES, RHO0_GRIDS,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_OPERATIONAL: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;
pub const EXIT_CONFIG: i32 = 64;
pub const EXIT_UNWRITABLE: i32 = 73;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Spectrum,
    Pseudospectrum,
    Asymptotics,
    ResolventBound,
    StripEstimate,
    ReductionCheck,
    Rho0,
    ScalingLaw,
    NuCurve,
    AiryEstimate,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Pseudospectrum => "pseudospectrum",
            Self::Asymptotics => "asymptotics",
            Self::ResolventBound => "resolvent-bound",
            Self::StripEstimate => "strip-estimate",
            Self::ReductionCheck => "reduction-check",
            Self::Rho0 => "rho0",
            Self::ScalingLaw => "scaling-law",
            Self::NuCurve => "nu-curve",
            Self::AiryEstimate => "airy-estimate",
        }
    }

    fn needs_spec(self) -> bool {
        matches!(self, Self::Spectrum | Self::Pseudospectrum)
    }

    fn sampled(self) -> bool {
        matches!(self, Self::ResolventBound | Self::StripEstimate)
    }
}

/// `start:stop:count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Axis {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + step * i as f64).collect()
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("axis `{s}` is not start:stop:count"));
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("axis `{s}`: {e}"));
        let count = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("axis `{s}`: {e}"))?;
        let axis = Axis {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            count,
        };
        if count == 0 || !(axis.start.is_finite() && axis.stop.is_finite()) || (count > 1 && axis.start >= axis.stop) {
            return Err(format!("axis `{s}` needs finite start < stop and count >= 1"));
        }
        Ok(axis)
    }
}

fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("interval `{s}` is not a,b"));
    }
    let a = parts[0]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("interval `{s}`: {e}"))?;
    let b = parts[1]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("interval `{s}`: {e}"))?;
    if !(a < b) {
        return Err(format!("interval `{s}` needs a < b"));
    }
    Ok((a, b))
}

/// Experiment parameters. Unset fields fall back to the config file, then
/// to per-experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub re: Option<Axis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub im: Option<Axis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl Params {
    fn or(self, other: Params) -> Params {
        Params {
            eps: self.eps.or(other.eps),
            modes: self.modes.or(other.modes),
            interval: self.interval.or(other.interval),
            re: self.re.or(other.re),
            im: self.im.or(other.im),
            samples: self.samples.or(other.samples),
            rho: self.rho.or(other.rho),
            rhat: self.rhat.or(other.rhat),
            delta: self.delta.or(other.delta),
            k: self.k.or(other.k),
            nodes: self.nodes.or(other.nodes),
            n_values: self.n_values.or(other.n_values),
            tol: self.tol.or(other.tol),
        }
    }

    fn set_names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let mut push = |set: bool, name| {
            if set {
                v.push(name)
            }
        };
        push(self.eps.is_some(), "eps");
        push(self.modes.is_some(), "modes");
        push(self.interval.is_some(), "interval");
        push(self.re.is_some(), "re");
        push(self.im.is_some(), "im");
        push(self.samples.is_some(), "samples");
        push(self.rho.is_some(), "rho");
        push(self.rhat.is_some(), "rhat");
        push(self.delta.is_some(), "delta");
        push(self.k.is_some(), "k");
        push(self.nodes.is_some(), "nodes");
        push(self.n_values.is_some(), "n_values");
        push(self.tol.is_some(), "tol");
        v
    }
}

/// Fully resolved run description; also the `config` entry of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<OperatorSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Parser)]
#[command(
    name = "btspec",
    version,
    about = "Spectral experiments for the Bloch-Torrey operator family"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Comma-separated eps values.
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Number of modes.
    #[arg(long, global = true)]
    pub modes: Option<usize>,
    /// Interval `a,b`.
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = parse_interval)]
    pub interval: Option<(f64, f64)>,
    /// Operator spec as JSON.
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Real axis `start:stop:count`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub re: Option<Axis>,
    /// Imaginary axis `start:stop:count`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub im: Option<Axis>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true)]
    pub rhat: Option<f64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Ceiling factor `K` in `Lambda <= K eps^2`.
    #[arg(long, global = true)]
    pub k: Option<f64>,
    /// Interior grid nodes.
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    /// Comma-separated grid sizes for the `rho0` convergence study.
    #[arg(long, global = true, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; falls back to BTSPEC_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Experiment config or a previously written manifest.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Eigenvalues of an operator spec inside the `--re` x `--im` box.
    Spectrum,
    /// Resolvent norms over a grid of spectral parameters.
    Pseudospectrum,
    /// Eigenvalue asymptotics near `i` for the first modes.
    Asymptotics,
    /// Sampled resolvent bound with a frozen constant.
    ResolventBound,
    /// Sampled strip estimate for the rescaled system.
    StripEstimate,
    /// Root of the reduced problem against the direct eigenvalue.
    ReductionCheck,
    /// The variational constant on an interval.
    Rho0,
    /// Lowest interval eigenvalue against `rho0 eps^2`.
    ScalingLaw,
    /// Lowest eigenvalue of `P_Lambda - Lambda` over sampled `Lambda`.
    NuCurve,
    /// Auxiliary Airy estimate with the `rho0` minimizer as data.
    AiryEstimate,
    /// Runs the experiment named in `--config`.
    Run,
}

impl Command {
    fn experiment(self) -> Option<Experiment> {
        Some(match self {
            Self::Spectrum => Experiment::Spectrum,
            Self::Pseudospectrum => Experiment::Pseudospectrum,
            Self::Asymptotics => Experiment::Asymptotics,
            Self::ResolventBound => Experiment::ResolventBound,
            Self::StripEstimate => Experiment::StripEstimate,
            Self::ReductionCheck => Experiment::ReductionCheck,
            Self::Rho0 => Experiment::Rho0,
            Self::ScalingLaw => Experiment::ScalingLaw,
            Self::NuCurve => Experiment::NuCurve,
            Self::AiryEstimate => Experiment::AiryEstimate,
            Self::Run => return None,
        })
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Unwritable(String),
    Operational(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Unwritable(_) => EXIT_UNWRITABLE,
            Self::Operational(_) => EXIT_OPERATIONAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Unwritable(m) => write!(f, "cannot write output: {m}"),
            Self::Operational(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) | Error::InvalidSpec(m) => Self::Config(m),
            other => Self::Operational(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn allowed(exp: Experiment) -> &'static [&'static str] {
    use Experiment::*;
    match exp {
        Spectrum => &["re", "im"],
        Pseudospectrum => &["re", "im", "tol"],
        Asymptotics => &["eps", "modes", "tol"],
        ResolventBound => &["eps", "rho", "rhat", "samples", "tol"],
        StripEstimate => &["eps", "delta", "samples", "tol"],
        ReductionCheck => &["eps", "modes", "tol"],
        Rho0 => &["interval", "n_values"],
        ScalingLaw => &["eps", "interval", "samples", "nodes", "k"],
        NuCurve => &["eps", "interval", "samples", "nodes", "k"],
        AiryEstimate => &["eps", "interval", "nodes", "k"],
    }
}

/// Fills per-experiment defaults and rejects parameters the experiment
/// does not read.
pub fn resolve_params(exp: Experiment, p: Params) -> CliResult<Params> {
    use Experiment::*;
    let ok = allowed(exp);
    if let Some(bad) = p.set_names().into_iter().find(|n| !ok.contains(n)) {
        return Err(CliError::Config(format!("`{bad}` does not apply to {}", exp.name())));
    }
    let defaults = match exp {
        Spectrum => Params::default(),
        Pseudospectrum => Params {
            tol: Some(1e-6),
            ..Params::default()
        },
        Asymptotics => Params {
            eps: Some(vec![0.08, 0.04, 0.02]),
            modes: Some(2),
            tol: Some(1e-9),
            ..Params::default()
        },
        ResolventBound => Params {
            eps: Some(vec![0.05, 0.025]),
            rho: Some(1.0),
            rhat: Some(10.0),
            samples: Some(200),
            tol: Some(1e-6),
            ..Params::default()
        },
        StripEstimate => Params {
            eps: Some(vec![0.1, 0.05]),
            delta: Some(0.3),
            samples: Some(100),
            tol: Some(1e-6),
            ..Params::default()
        },
        ReductionCheck => Params {
            eps: Some(vec![0.08, 0.05]),
            modes: Some(1),
            tol: Some(1e-9),
            ..Params::default()
        },
        Rho0 => Params {
            interval: Some((0.0, 1.0)),
            n_values: Some(RHO0_GRIDS.to_vec()),
            ..Params::default()
        },
        ScalingLaw => Params {
            eps: Some(vec![0.1, 0.05, 0.025]),
            interval: Some((0.0, 1.0)),
            samples: Some(32),
            nodes: Some(DEFAULT_NU_NODES),
            ..Params::default()
        },
        NuCurve => Params {
            eps: Some(vec![0.1]),
            interval: Some((0.0, 1.0)),
            samples: Some(32),
            nodes: Some(DEFAULT_NU_NODES),
            ..Params::default()
        },
        AiryEstimate => Params {
            eps: Some(vec![0.1, 0.05]),
            interval: Some((0.0, 1.0)),
            nodes: Some(DEFAULT_NU_NODES),
            ..Params::default()
        },
    };
    let p = p.or(defaults);
    if let Some(eps) = &p.eps {
        if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(CliError::Config("eps values must be positive".into()));
        }
    }
    if matches!(exp, Pseudospectrum) && (p.re.is_none() || p.im.is_none()) {
        return Err(CliError::Config("pseudospectrum needs --re and --im".into()));
    }
    if p.samples == Some(0) || p.modes == Some(0) {
        return Err(CliError::Config("samples and modes must be positive".into()));
    }
    Ok(p)
}

fn read_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value = match value.get("config") {
        Some(inner) if value.get("version").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn read_spec(path: &Path) -> CliResult<OperatorSpec> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let spec: OperatorSpec =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(spec)
}

/// Merges flags over the config file over defaults.
pub fn resolve(cli: &Cli) -> CliResult<ExperimentConfig> {
    let file = cli.config.as_deref().map(read_config).transpose()?;
    let experiment = match (cli.command.experiment(), &file) {
        (Some(e), Some(f)) if f.experiment != e => {
            return Err(CliError::Config(format!(
                "config is for {} but the command is {}",
                f.experiment.name(),
                e.name()
            )))
        }
        (Some(e), _) => e,
        (None, Some(f)) => f.experiment,
        (None, None) => return Err(CliError::Config("`run` needs --config".into())),
    };
    let flags = Params {
        eps: cli.eps.clone(),
        modes: cli.modes,
        interval: cli.interval,
        re: cli.re,
        im: cli.im,
        samples: cli.samples,
        rho: cli.rho,
        rhat: cli.rhat,
        delta: cli.delta,
        k: cli.k,
        nodes: cli.nodes,
        n_values: cli.n_values.clone(),
        tol: cli.tol,
    };
    let from_file = file.as_ref().map(|f| f.params.clone()).unwrap_or_default();
    let params = resolve_params(experiment, flags.or(from_file))?;
    let spec = match cli.spec.as_deref() {
        Some(p) => Some(read_spec(p)?),
        None => file.as_ref().and_then(|f| f.spec.clone()),
    };
    if experiment.needs_spec() {
        let s = spec
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{} needs --spec", experiment.name())))?;
        s.validate()?;
    } else if spec.is_some() {
        return Err(CliError::Config(format!(
            "--spec does not apply to {}",
            experiment.name()
        )));
    }
    let seed = cli.seed.or(file.as_ref().and_then(|f| f.seed));
    let seed = if experiment.sampled() {
        Some(seed.unwrap_or(0))
    } else if seed.is_some() {
        return Err(CliError::Config(format!(
            "--seed does not apply to {}",
            experiment.name()
        )));
    } else {
        None
    };
    let output_dir = cli
        .output_dir
        .clone()
        .or_else(|| file.as_ref().and_then(|f| f.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("btspec-out"));
    Ok(ExperimentConfig {
        experiment,
        spec,
        params,
        output_dir: Some(output_dir),
        seed,
    })
}

struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Unwritable(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> crate::Result<()>) -> CliResult<()> {
        let path = self.dir.join(name);
        let unwritable = |e: &dyn fmt::Display| CliError::Unwritable(format!("{}: {e}", path.display()));
        let file = fs::File::create(&path).map_err(|e| unwritable(&e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).map_err(|e| match e {
            Error::Io(io) => unwritable(&io),
            other => CliError::Operational(other),
        })?;
        w.flush().map_err(|e| unwritable(&e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }
}

fn frozen_line(label: &str, f: &FrozenConstant) -> String {
    let ratios: Vec<String> = f
        .eps_values
        .iter()
        .zip(&f.max_ratios)
        .map(|(e, r)| format!("eps={e}: {r:.6}"))
        .collect();
    format!(
        "{label}: C = {:.6} frozen at eps={}; {}; {}",
        f.constant,
        f.eps_values.first().copied().unwrap_or(f64::NAN),
        ratios.join(", "),
        if f.passed { "within 2C" } else { "EXCEEDS 2C" }
    )
}

/// Runs a resolved config; returns whether every asserted bound held.
fn execute(cfg: &ExperimentConfig, out: &mut Outputs, say: &mut dyn FnMut(String)) -> CliResult<bool> {
    let p = &cfg.params;
    let eps = || p.eps.clone().unwrap_or_default();
    let interval = p.interval.unwrap_or((0.0, 1.0));
    match cfg.experiment {
        Experiment::Spectrum => {
            let spec = cfg.spec.as_ref().expect("resolved");
            let window = Window::new(
                p.re.map_or(f64::NEG_INFINITY, |a| a.start),
                p.re.map_or(f64::INFINITY, |a| a.stop),
                p.im.map_or(f64::NEG_INFINITY, |a| a.start),
                p.im.map_or(f64::INFINITY, |a| a.stop),
            )?;
            let r = survey_spectrum(spec, &window)?;
            let bad = flagged(&r);
            out.write("spectrum.csv", |w| {
                writeln!(w, "re,im,residual")?;
                let res = r.residuals.clone().unwrap_or_default();
                for (i, z) in r.eigenvalues.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{},{}",
                        fmt17(z.re),
                        fmt17(z.im),
                        fmt17(res.get(i).copied().unwrap_or(f64::NAN))
                    )?;
                }
                Ok(())
            })?;
            out.json("spectrum.json", &r)?;
            say(format!(
                "{} eigenvalues in the window, {} flagged as ill-conditioned",
                r.eigenvalues.len(),
                bad.len()
            ));
            Ok(true)
        }
        Experiment::Pseudospectrum => {
            let spec = cfg.spec.as_ref().expect("resolved");
            let (re, im) = (p.re.expect("resolved"), p.im.expect("resolved"));
            let g = pseudospectrum_grid(spec, &re.points(), &im.points(), p.tol.unwrap_or(1e-6))?;
            out.write("pseudospectrum.csv", |w| g.write_csv(w))?;
            out.json("pseudospectrum.json", &g)?;
            let (i, j) = g.argmax();
            say(format!(
                "{}x{} grid; largest norm {:.6e} at {}{:+}i",
                re.count,
                im.count,
                g.get(i, j),
                g.re_axis[i],
                g.im_axis[j]
            ));
            Ok(true)
        }
        Experiment::Asymptotics => {
            let opts = AsymptoticsOptions {
                tol: p.tol.unwrap_or(1e-9),
                ..AsymptoticsOptions::default()
            };
            let r = verify_eigenvalue_asymptotics_with(&eps(), p.modes.unwrap_or(2), &opts)?;
            out.write("asymptotics.csv", |w| r.write_csv(w))?;
            out.write("asymptotics_slopes.csv", |w| r.write_slopes_csv(w))?;
            out.json("asymptotics.json", &r)?;
            let mut pass = true;
            for s in &r.slopes {
                let slope = s.slope.unwrap_or(f64::NAN);
                let ok = (1.7..=2.3).contains(&slope);
                pass &= ok || s.slope.is_none();
                say(format!(
                    "mode {}: slope {:.3}{}, refined slope {:.3} (mu1 = {:.6}), observed mu1 {:.6}",
                    s.n,
                    slope,
                    if ok { "" } else { " OUTSIDE [1.7, 2.3]" },
                    s.refined_slope.unwrap_or(f64::NAN),
                    s.mu1,
                    s.observed_mu1.unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
                ));
            }
            Ok(pass)
        }
        Experiment::ResolventBound => {
            let opts = ResolventOptions {
                sigma_tol: p.tol.unwrap_or(1e-6),
                ..ResolventOptions::default()
            };
            let (reports, frozen) = resolvent_bound_experiment(
                &eps(),
                p.rho.unwrap_or(1.0),
                p.rhat.unwrap_or(10.0),
                p.samples.unwrap_or(200),
                cfg.seed.unwrap_or(0),
                &opts,
            )?;
            for r in &reports {
                out.write(&format!("resolvent_bound_eps{}.csv", r.eps), |w| r.write_csv(w))?;
            }
            out.json("resolvent_bound.json", &(&reports, &frozen))?;
            let violations: usize = reports.iter().map(|r| r.accretive_violations).sum();
            say(frozen_line("ratio", &frozen));
            say(format!(
                "{violations} samples with Re Lambda < 0 above 1.05/|Re Lambda|"
            ));
            Ok(frozen.passed && violations == 0)
        }
        Experiment::StripEstimate => {
            let opts = StripOptions {
                sigma_tol: p.tol.unwrap_or(1e-6),
                ..StripOptions::default()
            };
            let (reports, sum, full) = strip_estimate_experiment(
                &eps(),
                p.delta.unwrap_or(0.3),
                p.samples.unwrap_or(100),
                cfg.seed.unwrap_or(0),
                &opts,
            )?;
            for r in &reports {
                out.write(&format!("strip_estimate_eps{}.csv", r.eps), |w| r.write_csv(w))?;
            }
            out.json("strip_estimate.json", &(&reports, &sum, &full))?;
            let violations: usize = reports.iter().map(|r| r.accretive_violations).sum();
            say(frozen_line("||u1 + u2||", &sum));
            say(frozen_line("resolvent", &full));
            say(format!(
                "{violations} samples with Re lambda < 0 above 1.05/|Re lambda|"
            ));
            Ok(sum.passed && full.passed && violations == 0)
        }
        Experiment::ReductionCheck => {
            let tol = p.tol.unwrap_or(1e-9);
            let opts = AsymptoticsOptions {
                tol,
                ..AsymptoticsOptions::default()
            };
            let mut rows = Vec::new();
            for &e in &eps() {
                let eps_check = e.powf(4.0 / 3.0);
                for k in 1..=p.modes.unwrap_or(1) {
                    let root = find_lambda_root(heuristic_start(k, eps_check)?, eps_check, tol)?;
                    let scaled = root * e.powf(2.0 / 3.0);
                    let (direct, _) = locate_kappa(k, e, &opts)?;
                    rows.push((e, k, scaled, direct, (scaled - direct).norm()));
                }
            }
            out.write("reduction_check.csv", |w| {
                writeln!(w, "eps,mode,root_re,root_im,direct_re,direct_im,difference")?;
                for (e, k, s, d, diff) in &rows {
                    writeln!(
                        w,
                        "{},{k},{},{},{},{},{}",
                        fmt17(*e),
                        fmt17(s.re),
                        fmt17(s.im),
                        fmt17(d.re),
                        fmt17(d.im),
                        fmt17(*diff)
                    )?;
                }
                Ok(())
            })?;
            let mut pass = true;
            for (e, k, s, d, diff) in &rows {
                let ok = *diff < 1e-5;
                pass &= ok;
                say(format!(
                    "eps={e} mode {k}: reduction {s:.10}, direct {d:.10}, difference {diff:.2e}{}",
                    if ok { "" } else { " ABOVE 1e-5" }
                ));
            }
            Ok(pass)
        }
        Experiment::Rho0 => {
            let (a, b) = interval;
            let r = compute_rho0(a, b, p.n_values.as_deref().unwrap_or(&RHO0_GRIDS))?;
            out.write("rho0.csv", |w| r.write_csv(w))?;
            out.json("rho0.json", &r)?;
            let floor = (std::f64::consts::PI / (b - a)).powi(2);
            let spread = r.extrapolant_spread();
            say(format!("rho0 = {:.10} on ({a}, {b})", r.rho0));
            say(format!(
                "extrapolant spread {spread:.2e}, Euler-Lagrange residual {:.2e}, Dirichlet floor {floor:.6}",
                r.euler_lagrange_residual
            ));
            Ok(r.rho0 > floor && (r.extrapolants.len() < 2 || spread < 1e-6))
        }
        Experiment::ScalingLaw => {
            let (a, b) = interval;
            let rho0 = compute_rho0(a, b, &RHO0_GRIDS)?.rho0;
            let opts = ScalingOptions {
                n: p.nodes.unwrap_or(DEFAULT_NU_NODES),
                samples: p.samples.unwrap_or(32),
                k: p.k,
            };
            let r = verify_scaling_law_with(&eps(), a, b, rho0, &opts)?;
            out.write("scaling_law.csv", |w| r.write_csv(w))?;
            out.json("scaling_law.json", &r)?;
            for row in &r.rows {
                say(format!(
                    "eps={}: Lambda1/eps^2 = {:.8}, relative error {:+.3e}, direct gap {:.1e}",
                    row.eps, row.scaled, row.rel_err, row.direct_gap
                ));
            }
            let last = r.rows.last().expect("non-empty");
            let gap_ok = r.rows.iter().all(|row| row.direct_gap < 1e-6);
            let pass = r.error_decreasing && r.floor_respected && gap_ok && last.rel_err.abs() < 0.05;
            say(format!(
                "rho0 = {rho0:.10}; error decreasing: {}; floor respected: {}",
                r.error_decreasing, r.floor_respected
            ));
            Ok(pass)
        }
        Experiment::NuCurve => {
            let (a, b) = interval;
            let e = eps()[0];
            let k = match p.k {
                Some(k) => k,
                None => 2.0 * compute_rho0(a, b, &RHO0_GRIDS)?.rho0,
            };
            let grid = Grid1D::new(a, b, p.nodes.unwrap_or(DEFAULT_NU_NODES))?;
            let samples = default_lambda_samples(e, a, b, k, p.samples.unwrap_or(32));
            let curve = nu_curve_on(e, &grid, &samples)?;
            out.write("nu_curve.csv", |w| curve.write_csv(w))?;
            out.json("nu_curve.json", &curve)?;
            match curve.crossing {
                Some(l) => {
                    say(format!(
                        "eps={e}: nu crosses zero at Lambda1 = {l:.12} (Lambda1/eps^2 = {:.8})",
                        l / (e * e)
                    ));
                    Ok(l > (std::f64::consts::PI * e / (b - a)).powi(2))
                }
                None => {
                    say(format!("eps={e}: no sign change of nu in the sampled range"));
                    Ok(false)
                }
            }
        }
        Experiment::AiryEstimate => {
            let (a, b) = interval;
            let n = p.nodes.unwrap_or(DEFAULT_NU_NODES);
            let ground = compute_rho0(a, b, &[n])?;
            let k = p.k.unwrap_or(2.0 * compute_rho0(a, b, &RHO0_GRIDS)?.rho0);
            let reports = eps()
                .iter()
                .map(|&e| auxiliary_airy_estimate(e, k, &ground.minimizer, &ground.minimizer_grid))
                .collect::<crate::Result<Vec<_>>>()?;
            let maxes: Vec<f64> = reports.iter().map(|r| r.max_ratio).collect();
            let frozen = FrozenConstant::evaluate(&eps(), &maxes, 2.0);
            out.write("airy_estimate.csv", |w| {
                writeln!(w, "eps,lambda,ratio_plus,ratio_minus")?;
                for r in &reports {
                    for row in &r.rows {
                        writeln!(
                            w,
                            "{},{},{},{}",
                            fmt17(r.eps),
                            fmt17(row.lambda),
                            fmt17(row.ratio_plus),
                            fmt17(row.ratio_minus)
                        )?;
                    }
                }
                Ok(())
            })?;
            out.json("airy_estimate.json", &(&reports, &frozen))?;
            say(frozen_line("ratio", &frozen));
            Ok(frozen.passed)
        }
    }
}

fn configure_threads(flag: Option<usize>) -> CliResult<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("BTSPEC_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Config(format!("BTSPEC_THREADS = `{v}` is not a count")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Config("thread count must be positive".into()));
        }
        // The pool can only be set once per process; later calls keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn run_cli(cli: &Cli) -> CliResult<bool> {
    configure_threads(cli.threads)?;
    let cfg = resolve(cli)?;
    let start = Instant::now();
    let dir = cfg.output_dir.clone().expect("resolved");
    let mut out = Outputs::new(&dir)?;
    let mut stdout = std::io::stdout();
    let mut say = |line: String| {
        let _ = writeln!(stdout, "{line}");
    };
    say(format!(
        "btspec {}: {}",
        env!("CARGO_PKG_VERSION"),
        cfg.experiment.name()
    ));
    let passed = execute(&cfg, &mut out, &mut say)?;
    let mut outputs = out.written.clone();
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs,
        passed,
    };
    out.json("manifest.json", &manifest)?;
    say(format!(
        "{} in {:.2}s; outputs in {}",
        if passed { "PASS" } else { "FAIL" },
        manifest.wall_time_s,
        dir.display()
    ));
    Ok(passed)
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(&cli) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_ASSERTION,
        Err(e) => {
            eprintln!("btspec: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_syntax() {
        let a: Axis = "-0.2:0.6:5".parse().unwrap();
        assert_eq!(a.points().len(), 5);
        assert!((a.points()[4] - 0.6).abs() < 1e-15);
        assert!("1:0:3".parse::<Axis>().is_err());
        assert!("0:1".parse::<Axis>().is_err());
        assert!("0:1:0".parse::<Axis>().is_err());
    }

    #[test]
    fn interval_syntax() {
        assert_eq!(parse_interval("-1,2").unwrap(), (-1.0, 2.0));
        assert!(parse_interval("2,1").is_err());
    }

    #[test]
    fn defaults_and_foreign_parameters() {
        let p = resolve_params(Experiment::Rho0, Params::default()).unwrap();
        assert_eq!(p.interval, Some((0.0, 1.0)));
        assert_eq!(p.n_values.as_deref(), Some(&RHO0_GRIDS[..]));
        let bad = Params {
            modes: Some(3),
            ..Params::default()
        };
        assert!(matches!(
            resolve_params(Experiment::Rho0, bad),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn flags_win_over_file_values() {
        let flags = Params {
            eps: Some(vec![0.1]),
            ..Params::default()
        };
        let file = Params {
            eps: Some(vec![0.2]),
            modes: Some(3),
            ..Params::default()
        };
        let p = flags.or(file);
        assert_eq!(p.eps, Some(vec![0.1]));
        assert_eq!(p.modes, Some(3));
    }

    #[test]
    fn config_json_rejects_unknown_fields() {
        let ok: ExperimentConfig =
            serde_json::from_str(r#"{"experiment":"rho0","params":{"interval":[0,1]}}"#).unwrap();
        assert_eq!(ok.experiment, Experiment::Rho0);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment":"rho0","bogus":1}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment":"nope"}"#).is_err());
    }
}
