//! Job configuration: a TOML document with one source block.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays of them. Unknown keys are rejected.

use num_complex::Complex64;
use serde::Deserialize;

use crate::gbdt::SignatureLayout;
use crate::linalg::{c64, CMatrix};
use crate::weyl_inverse::{InverseTolerances, Realization};

/// Pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GenPotential,
    WeylEval,
    DirectSolve,
    Inverse,
    Roundtrip,
    BoundStates,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenPotential => "gen-potential",
            Command::WeylEval => "weyl-eval",
            Command::DirectSolve => "direct-solve",
            Command::Inverse => "inverse",
            Command::Roundtrip => "roundtrip",
            Command::BoundStates => "bound-states",
        }
    }

    pub fn default_format(self) -> Format {
        match self {
            Command::Inverse | Command::BoundStates => Format::Doc,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Doc,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid config: {0}")]
pub struct ConfigError(pub String);

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

type RawMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<Command>,
    gbdt: Option<RawGbdt>,
    realization: Option<RawRealization>,
    #[serde(default)]
    grid: GridConfig,
    #[serde(default)]
    z_points: Vec<[f64; 2]>,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default)]
    output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGbdt {
    m1: usize,
    m2: usize,
    alpha: RawMatrix,
    sigma0: RawMatrix,
    theta1: RawMatrix,
    theta2: RawMatrix,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRealization {
    m1: usize,
    m2: usize,
    c: RawMatrix,
    a: RawMatrix,
    b: RawMatrix,
}

/// Uniform grid `0, step, …, x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub x_max: f64,
    pub step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { x_max: 10.0, step: 0.01 }
    }
}

/// Tolerance overrides. `None` means data-scaled defaults.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Generating identity residual; default `1e-10·(1 + ‖α‖‖Σ₀‖ + ‖ϑ₁‖² + ‖ϑ₂‖²)`.
    pub identity: Option<f64>,
    /// Relative rank cut in the minimal-realization step.
    pub rank: f64,
    /// Slack on `‖φ(t)‖ ≤ 1` and on pole imaginary parts.
    pub admissibility: f64,
    /// Relative Riccati residual.
    pub riccati: f64,
    /// `|Im λ|` cut for real eigenvalues of `θ`; default `1e-8·(1 + ‖θ‖)`.
    pub real_eigenvalue: Option<f64>,
    /// Absolute slack added to `radius_bound` in roundtrip comparisons.
    pub roundtrip_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let inverse = InverseTolerances::default();
        Self {
            identity: None,
            rank: inverse.rank,
            admissibility: inverse.admissibility,
            riccati: inverse.riccati,
            real_eigenvalue: None,
            roundtrip_slack: 0.0,
        }
    }
}

impl Tolerances {
    pub fn inverse(&self) -> InverseTolerances {
        InverseTolerances {
            rank: self.rank,
            admissibility: self.admissibility,
            riccati: self.riccati,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub format: Option<Format>,
}

/// Generating matrices as given; identity and positivity are checked at run time.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtSource {
    pub layout: SignatureLayout,
    pub alpha: CMatrix,
    pub sigma0: CMatrix,
    pub theta1: CMatrix,
    pub theta2: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Gbdt(GbdtSource),
    Realization(Realization),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub command: Option<Command>,
    pub source: Source,
    pub grid: GridConfig,
    pub z_points: Vec<Complex64>,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
}

fn matrix(raw: &RawMatrix, rows: usize, cols: usize, what: &str) -> Result<CMatrix, ConfigError> {
    if raw.len() != rows {
        return invalid(format!("{what}: expected {rows} rows, found {}", raw.len()));
    }
    for (i, row) in raw.iter().enumerate() {
        if row.len() != cols {
            return invalid(format!(
                "{what}: row {} has {} entries, expected {cols}",
                i + 1,
                row.len()
            ));
        }
        if row.iter().flatten().any(|v| !v.is_finite()) {
            return invalid(format!("{what}: row {} has a non-finite entry", i + 1));
        }
    }
    Ok(CMatrix::from_fn(rows, cols, |i, k| c64(raw[i][k][0], raw[i][k][1])))
}

fn layout(m1: usize, m2: usize) -> Result<SignatureLayout, ConfigError> {
    SignatureLayout::new(m1, m2).map_err(|_| ConfigError("m1 and m2 must be at least 1".into()))
}

/// Strict parse plus structural validation.
pub fn parse_config(text: &str) -> Result<JobConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_owned()))?;
    let source = match (raw.gbdt, raw.realization) {
        (Some(_), Some(_)) => return invalid("give exactly one of [gbdt] and [realization], not both"),
        (None, None) => return invalid("missing source block: [gbdt] or [realization]"),
        (Some(g), None) => {
            let layout = layout(g.m1, g.m2)?;
            let n = g.alpha.len();
            Source::Gbdt(GbdtSource {
                layout,
                alpha: matrix(&g.alpha, n, n, "gbdt.alpha")?,
                sigma0: matrix(&g.sigma0, n, n, "gbdt.sigma0")?,
                theta1: matrix(&g.theta1, n, g.m1, "gbdt.theta1")?,
                theta2: matrix(&g.theta2, n, g.m2, "gbdt.theta2")?,
            })
        }
        (None, Some(r)) => {
            layout(r.m1, r.m2)?;
            let n = r.a.len();
            let c = matrix(&r.c, r.m2, n, "realization.c")?;
            let a = matrix(&r.a, n, n, "realization.a")?;
            let b = matrix(&r.b, n, r.m1, "realization.b")?;
            Source::Realization(Realization::new(c, a, b).map_err(|e| ConfigError(e.to_string()))?)
        }
    };
    let grid = raw.grid;
    if !(grid.x_max > 0.0 && grid.x_max.is_finite() && grid.step > 0.0 && grid.step <= grid.x_max) {
        return invalid(format!(
            "grid: need 0 < step <= x_max < inf, got x_max = {}, step = {}",
            grid.x_max, grid.step
        ));
    }
    let z_points: Vec<Complex64> = raw.z_points.iter().map(|z| c64(z[0], z[1])).collect();
    if let Some(z) = z_points.iter().find(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return invalid(format!("z_points: non-finite entry {z}"));
    }
    let t = raw.tolerances;
    let positive = [t.rank, t.admissibility, t.riccati]
        .into_iter()
        .chain(t.identity)
        .chain(t.real_eigenvalue)
        .all(|v| v > 0.0 && v.is_finite());
    if !positive || !(t.roundtrip_slack >= 0.0 && t.roundtrip_slack.is_finite()) {
        return invalid("tolerances must be finite and positive (roundtrip_slack may be 0)");
    }
    let config = JobConfig {
        command: raw.command,
        source,
        grid,
        z_points,
        tolerances: t,
        output: raw.output,
    };
    if let Some(command) = config.command {
        config.validate_for(command)?;
    }
    Ok(config)
}

impl JobConfig {
    /// Command-specific requirements.
    pub fn validate_for(&self, command: Command) -> Result<(), ConfigError> {
        if let Some(own) = self.command {
            if own != command {
                return invalid(format!(
                    "config is for command '{}' but '{}' was requested",
                    own.name(),
                    command.name()
                ));
            }
        }
        let needs_z = matches!(command, Command::WeylEval | Command::DirectSolve | Command::Roundtrip);
        if needs_z && self.z_points.is_empty() {
            return invalid(format!("{} needs a nonempty z_points list", command.name()));
        }
        if matches!(command, Command::DirectSolve | Command::Roundtrip) {
            if let Some(z) = self.z_points.iter().find(|z| !(z.im > 0.0)) {
                return invalid(format!("{}: z = {z} must have Im z > 0", command.name()));
            }
        }
        if matches!(command, Command::Inverse | Command::Roundtrip) && !matches!(self.source, Source::Realization(_)) {
            return invalid(format!("{} needs a [realization] source", command.name()));
        }
        Ok(())
    }
}
