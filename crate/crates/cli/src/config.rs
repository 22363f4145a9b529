//! Run configuration: JSON schema, validation and round-trip serialization.

use std::fmt;
use std::path::PathBuf;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use wiretap_core::misome::alpha_grid;
use wiretap_core::optimizer::mu_grid;
use wiretap_core::{
    classify, ChannelInstance, ChannelTag, InputConstraint, MisomeChannel, Receiver, Refinement, SearchBudget,
    SymMatrix, DEFAULT_PSD_TOL,
};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Region,
    EnhanceVerify,
    Misome,
    MisomeHighsnr,
    Check,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Region => "region",
            Command::EnhanceVerify => "enhance-verify",
            Command::Misome => "misome",
            Command::MisomeHighsnr => "misome-highsnr",
            Command::Check => "check",
        }
    }

    pub fn default_format(&self) -> Format {
        match self {
            Command::Region | Command::Misome => Format::Csv,
            _ => Format::Json,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub type MatrixSpec = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSpec {
    /// Defaults to the identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<MatrixSpec>,
    pub noise: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ConstraintSpec {
    Covariance(MatrixSpec),
    Power(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmit_antennas: Option<usize>,
    pub receivers: Vec<ReceiverSpec>,
    pub eavesdropper: ReceiverSpec,
    pub constraint: ConstraintSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let b = SearchBudget::default();
        SolverSpec {
            restarts: b.restarts,
            max_iterations: b.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub mu_points: usize,
    pub mu_max: f64,
    pub alpha_points: usize,
    /// Hull-edge refinement tolerance in bits.
    pub refine_tol: f64,
    /// Extra solves allowed for refinement; 0 disables it.
    pub refine_max: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            mu_points: 32,
            mu_max: 1e3,
            alpha_points: 101,
            refine_tol: Refinement::default().tol,
            refine_max: Refinement::default().max_solves,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// The configuration file as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    pub channel: ChannelSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub grids: GridSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A validated configuration ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub channel: ChannelInstance,
    pub budget: SearchBudget,
    pub mu_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub refinement: Refinement,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    /// Source document with symmetrized matrices and the resolved command.
    pub file: ConfigFile,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub command: Option<Command>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub mu_points: Option<usize>,
    pub alpha_points: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, file: &mut ConfigFile) {
        if let Some(c) = self.command {
            file.command = Some(c);
        }
        if let Some(p) = &self.output {
            file.output.path = Some(p.clone());
        }
        if let Some(f) = self.format {
            file.output.format = Some(f);
        }
        if let Some(s) = self.seed {
            file.seed = s;
        }
        if let Some(r) = self.restarts {
            file.solver.restarts = r;
        }
        if let Some(n) = self.mu_points {
            file.grids.mu_points = n;
        }
        if let Some(n) = self.alpha_points {
            file.grids.alpha_points = n;
        }
    }
}

fn matrix(spec: &MatrixSpec, path: &str) -> Result<DMatrix<f64>, CliError> {
    let rows = spec.len();
    let cols = spec.first().map(Vec::len).unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(CliError::config(path, "matrix must have at least one row and one column"));
    }
    if let Some(i) = spec.iter().position(|r| r.len() != cols) {
        return Err(CliError::config(
            format!("{path}[{i}]"),
            format!("row has {} entries, expected {cols}", spec[i].len()),
        ));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| spec[i][j]))
}

fn symmetric(spec: &MatrixSpec, path: &str, name: &str) -> Result<SymMatrix, CliError> {
    let m = matrix(spec, path)?;
    if m.nrows() != m.ncols() {
        return Err(CliError::config(
            path,
            format!("{name} must be square, got {}x{}", m.nrows(), m.ncols()),
        ));
    }
    let asym = SymMatrix::asymmetry(&m);
    if asym > 1e-9 {
        log::warn!("{path}: {name} is not symmetric (max |M - Mᵀ| = {asym:e}); using (M + Mᵀ)/2");
    }
    SymMatrix::new(m).map_err(|e| CliError::config(path, e.to_string()))
}

fn to_spec(m: &SymMatrix) -> MatrixSpec {
    let t = m.dim();
    (0..t).map(|i| (0..t).map(|j| m.matrix()[(i, j)]).collect()).collect()
}

fn noise_checked(spec: &MatrixSpec, path: &str, name: &str) -> Result<SymMatrix, CliError> {
    let n = symmetric(spec, path, name)?;
    if !n.is_finite() {
        return Err(CliError::config(path, format!("{name} has non-finite entries")));
    }
    let min = n.min_eigenvalue();
    if !(min > 0.0) {
        return Err(CliError::config(
            path,
            format!("{name} is not positive definite (minimum eigenvalue {min:e})"),
        ));
    }
    Ok(n)
}

fn receiver(
    spec: &ReceiverSpec,
    path: &str,
    name: &str,
    t: usize,
) -> Result<(Receiver, ReceiverSpec), CliError> {
    let noise = noise_checked(&spec.noise, &format!("{path}.noise"), name)?;
    let gain = match &spec.gain {
        Some(g) => {
            let g = matrix(g, &format!("{path}.gain"))?;
            if g.ncols() != t {
                return Err(CliError::config(
                    format!("{path}.gain"),
                    format!("gain has {} columns, expected {t} transmit antennas", g.ncols()),
                ));
            }
            if g.nrows() != noise.dim() {
                return Err(CliError::config(
                    format!("{path}.gain"),
                    format!("gain has {} rows but {name} is {}x{}", g.nrows(), noise.dim(), noise.dim()),
                ));
            }
            g
        }
        None => {
            if noise.dim() != t {
                return Err(CliError::config(
                    format!("{path}.noise"),
                    format!(
                        "without a gain, {name} must be {t}x{t} (transmit antennas), got {}x{}",
                        noise.dim(),
                        noise.dim()
                    ),
                ));
            }
            DMatrix::identity(t, t)
        }
    };
    let normalized = ReceiverSpec {
        gain: spec.gain.clone(),
        noise: to_spec(&noise),
    };
    Ok((Receiver::new(gain, noise), normalized))
}

fn infer_antennas(spec: &ChannelSpec) -> Result<usize, CliError> {
    if let Some(t) = spec.transmit_antennas {
        if t == 0 {
            return Err(CliError::config("channel.transmit_antennas", "must be at least 1"));
        }
        return Ok(t);
    }
    let all = spec.receivers.iter().chain(std::iter::once(&spec.eavesdropper));
    for rx in all.clone() {
        if let Some(g) = &rx.gain {
            if let Some(row) = g.first() {
                return Ok(row.len());
            }
        }
    }
    match &spec.constraint {
        ConstraintSpec::Covariance(s) if !s.is_empty() => Ok(s.len()),
        _ => Ok(spec.eavesdropper.noise.len()),
    }
}

fn check_command_fit(command: Command, ch: &ChannelInstance) -> Result<(), CliError> {
    match command {
        Command::Misome | Command::MisomeHighsnr => {
            let m = MisomeChannel::from_channel(ch).map_err(|e| CliError::config("channel", e.to_string()))?;
            if m.users() != 2 {
                return Err(CliError::config("channel.receivers", format!("{command} needs two receivers")));
            }
        }
        Command::EnhanceVerify => {
            let class = classify(ch, DEFAULT_PSD_TOL);
            if class.tag != ChannelTag::Sadbc || ch.users() != 2 {
                return Err(CliError::config(
                    "channel",
                    format!("enhance-verify needs a two-user aligned degraded channel, got {}", class.tag.as_str()),
                ));
            }
            if !matches!(ch.constraint(), InputConstraint::Covariance(_)) {
                return Err(CliError::config("channel.constraint", "enhance-verify needs a covariance constraint"));
            }
        }
        Command::Region => {
            if ch.users() != 2 {
                return Err(CliError::config("channel.receivers", "region needs two receivers"));
            }
        }
        Command::Check => {}
    }
    Ok(())
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    parse_config_with(text, &Overrides::default())
}

pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(if path == "." { "$".into() } else { path }, e.into_inner().to_string())
    })?;
    overrides.apply(&mut file);
    validate(file)
}

pub fn validate(mut file: ConfigFile) -> Result<RunConfig, CliError> {
    let command = file
        .command
        .ok_or_else(|| CliError::config("command", "no command given in the file or on the command line"))?;
    let spec = &file.channel;
    if spec.receivers.is_empty() {
        return Err(CliError::config("channel.receivers", "at least one receiver is required"));
    }
    let t = infer_antennas(spec)?;
    let mut receivers = Vec::new();
    let mut normalized = Vec::new();
    for (k, rx) in spec.receivers.iter().enumerate() {
        let (r, n) = receiver(rx, &format!("channel.receivers[{k}]"), &format!("N{}", k + 1), t)?;
        receivers.push(r);
        normalized.push(n);
    }
    let eve_name = format!("N{}", receivers.len() + 1);
    let (eve, eve_norm) = receiver(&spec.eavesdropper, "channel.eavesdropper", &eve_name, t)?;
    let (constraint, constraint_norm) = match &spec.constraint {
        ConstraintSpec::Covariance(s) => {
            let s = symmetric(s, "channel.constraint.covariance", "S")?;
            if s.dim() != t {
                return Err(CliError::config(
                    "channel.constraint.covariance",
                    format!("S is {}x{}, expected {t}x{t}", s.dim(), s.dim()),
                ));
            }
            let norm = ConstraintSpec::Covariance(to_spec(&s));
            (InputConstraint::Covariance(s), norm)
        }
        ConstraintSpec::Power(p) => (InputConstraint::Power(*p), ConstraintSpec::Power(*p)),
    };
    let channel = ChannelInstance::new(receivers, eve, constraint).map_err(|e| CliError::config("channel", e.to_string()))?;
    check_command_fit(command, &channel)?;

    if file.solver.restarts == 0 {
        return Err(CliError::config("solver.restarts", "must be at least 1"));
    }
    if file.solver.max_iterations == 0 {
        return Err(CliError::config("solver.max_iterations", "must be at least 1"));
    }
    let mu_grid =
        mu_grid(file.grids.mu_points, file.grids.mu_max).map_err(|e| CliError::config("grids", e.to_string()))?;
    let alpha_grid =
        alpha_grid(file.grids.alpha_points).map_err(|e| CliError::config("grids.alpha_points", e.to_string()))?;
    if !(file.grids.refine_tol.is_finite() && file.grids.refine_tol >= 0.0) {
        return Err(CliError::config("grids.refine_tol", "must be finite and non-negative"));
    }
    let refinement = Refinement {
        tol: file.grids.refine_tol,
        max_solves: file.grids.refine_max,
    };
    let format = file.output.format.unwrap_or_else(|| command.default_format());
    if format == Format::Csv && command.default_format() == Format::Json {
        return Err(CliError::config(
            "output.format",
            format!("command {command} only writes JSON"),
        ));
    }

    file.command = Some(command);
    file.channel = ChannelSpec {
        transmit_antennas: file.channel.transmit_antennas,
        receivers: normalized,
        eavesdropper: eve_norm,
        constraint: constraint_norm,
    };
    Ok(RunConfig {
        command,
        channel,
        budget: SearchBudget {
            max_iterations: file.solver.max_iterations,
            restarts: file.solver.restarts,
            seed: file.seed,
        },
        mu_grid,
        alpha_grid,
        refinement,
        output: file.output.path.clone(),
        format,
        seed: file.seed,
        file,
    })
}

impl RunConfig {
    /// Serializes the normalized document; parsing it yields an equal config.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("config serializes")
    }
}
