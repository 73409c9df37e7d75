//! Configuration layer: CLI flags, flat `key = value` config files, and the
//! merge into a fully resolved [`ExperimentConfig`] (CLI over file over
//! paper defaults).

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use clap::Parser;

/// Process exit codes: 2 config, 3 numerical non-convergence, 4 I/O.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "qfic",
    version,
    about = "Quantum Fisher information experiments for a noisy H-phi-H gate sequence",
    after_help = "Experiments: mutual-info, qfi-analytic, qfi-device, bloch-traj, calibrate, \
                  steady-state.\nFlags override config-file values, which override the paper \
                  defaults (T1 = 150 us, T2 = 100 us, g = 0.1, tau = 0.12, t = 480 ns, grid 50)."
)]
pub struct Cli {
    /// Experiment to run (may also come from the config file)
    pub experiment: Option<String>,

    /// Flat `key = value` config file; CLI flags take precedence
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Comma-separated phase values in radians, e.g. 0.785,1.571,3.142
    #[arg(long, value_name = "A,B,C")]
    pub phi_list: Option<String>,

    /// Number of phi grid points over [0, 2pi)
    #[arg(long)]
    pub grid: Option<usize>,

    /// Finite-difference step for QFI sweeps (rad)
    #[arg(long)]
    pub dphi: Option<f64>,

    /// Collision coupling strength
    #[arg(long)]
    pub g: Option<f64>,

    /// Collision duration
    #[arg(long)]
    pub tau: Option<f64>,

    /// Coarse-graining scale zeta = rate * tau * g (mutually exclusive with --rate)
    #[arg(long)]
    pub zeta: Option<f64>,

    /// Poisson arrival rate (mutually exclusive with --zeta)
    #[arg(long)]
    pub rate: Option<f64>,

    /// Relaxation time T1 in microseconds
    #[arg(long)]
    pub t1_us: Option<f64>,

    /// Decoherence time T2 in microseconds
    #[arg(long)]
    pub t2_us: Option<f64>,

    /// Ancilla noise-exposure time in nanoseconds
    #[arg(long)]
    pub t_exposure_ns: Option<f64>,

    /// Qubit frequency omega0/2pi in GHz
    #[arg(long)]
    pub omega0_ghz: Option<f64>,

    /// Gaussian pulse width in nanoseconds
    #[arg(long)]
    pub sigma_p_ns: Option<f64>,

    /// Pulse area in radians
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Pulse half-window in units of sigma_p
    #[arg(long)]
    pub window_k: Option<f64>,

    /// Integrator step in picoseconds (default: drive period / 64)
    #[arg(long)]
    pub dt_ps: Option<f64>,

    /// Collision budget (default 300 for mutual-info, 500000 for steady-state)
    #[arg(long)]
    pub collisions: Option<usize>,

    /// Steady-state convergence threshold in trace distance
    #[arg(long)]
    pub conv_tol: Option<f64>,

    /// Divide the ancilla state by its trace before each collision
    #[arg(long)]
    pub normalize_ancilla: bool,

    /// Output CSV path (stdout when omitted)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Also emit an SVG chart next to the CSV (requires --out)
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    MutualInfo,
    QfiAnalytic,
    QfiDevice,
    BlochTraj,
    Calibrate,
    SteadyState,
}

impl Experiment {
    fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "mutual-info" => Ok(Self::MutualInfo),
            "qfi-analytic" => Ok(Self::QfiAnalytic),
            "qfi-device" => Ok(Self::QfiDevice),
            "bloch-traj" => Ok(Self::BlochTraj),
            "calibrate" => Ok(Self::Calibrate),
            "steady-state" => Ok(Self::SteadyState),
            other => Err(CliError::Config(format!(
                "unknown experiment `{other}` (expected one of mutual-info, qfi-analytic, \
                 qfi-device, bloch-traj, calibrate, steady-state)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::MutualInfo => "mutual-info",
            Self::QfiAnalytic => "qfi-analytic",
            Self::QfiDevice => "qfi-device",
            Self::BlochTraj => "bloch-traj",
            Self::Calibrate => "calibrate",
            Self::SteadyState => "steady-state",
        }
    }
}

/// Fully resolved, validated run configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub phi_list: Option<Vec<f64>>,
    pub grid: usize,
    pub dphi: f64,
    pub g: f64,
    pub tau: f64,
    pub zeta: f64,
    pub rate: f64,
    pub t1_us: f64,
    pub t2_us: f64,
    pub t_exposure_ns: f64,
    pub omega0_ghz: f64,
    pub sigma_p_ns: f64,
    pub alpha: f64,
    pub window_k: f64,
    pub dt_ps: f64,
    pub collisions: usize,
    pub conv_tol: f64,
    pub normalize_ancilla: bool,
    pub out: Option<PathBuf>,
    pub svg: bool,
}

impl ExperimentConfig {
    pub fn t1_s(&self) -> f64 {
        self.t1_us * 1e-6
    }

    pub fn t2_s(&self) -> f64 {
        self.t2_us * 1e-6
    }

    pub fn t_exposure_s(&self) -> f64 {
        self.t_exposure_ns * 1e-9
    }

    /// Phase points: the explicit list when given, otherwise `grid` points
    /// evenly spaced over [0, 2pi).
    pub fn phis(&self) -> Vec<f64> {
        match &self.phi_list {
            Some(list) => list.clone(),
            None => (0..self.grid)
                .map(|k| k as f64 / self.grid as f64 * std::f64::consts::TAU)
                .collect(),
        }
    }
}

/// Optional values gathered from one source (defaults, file, or flags);
/// later sources overwrite earlier ones field by field.
#[derive(Debug, Default)]
struct Layer {
    experiment: Option<String>,
    phi_list: Option<Vec<f64>>,
    grid: Option<usize>,
    dphi: Option<f64>,
    g: Option<f64>,
    tau: Option<f64>,
    zeta: Option<f64>,
    rate: Option<f64>,
    t1_us: Option<f64>,
    t2_us: Option<f64>,
    t_exposure_ns: Option<f64>,
    omega0_ghz: Option<f64>,
    sigma_p_ns: Option<f64>,
    alpha: Option<f64>,
    window_k: Option<f64>,
    dt_ps: Option<f64>,
    collisions: Option<usize>,
    conv_tol: Option<f64>,
    normalize_ancilla: Option<bool>,
    out: Option<PathBuf>,
    svg: Option<bool>,
}

impl Layer {
    fn merge_over(&mut self, base: Layer) {
        macro_rules! keep {
            ($($f:ident),*) => { $( if self.$f.is_none() { self.$f = base.$f; } )* };
        }
        keep!(
            experiment,
            phi_list,
            grid,
            dphi,
            g,
            tau,
            zeta,
            rate,
            t1_us,
            t2_us,
            t_exposure_ns,
            omega0_ghz,
            sigma_p_ns,
            alpha,
            window_k,
            dt_ps,
            collisions,
            conv_tol,
            normalize_ancilla,
            out,
            svg
        );
    }
}

fn parse_phi_list(raw: &str) -> Result<Vec<f64>, CliError> {
    let list: Result<Vec<f64>, _> = raw
        .split(',')
        .map(|tok| tok.trim().parse::<f64>())
        .collect();
    let list = list.map_err(|e| CliError::Config(format!("phi-list: {e}")))?;
    if list.is_empty() {
        return Err(CliError::Config("phi-list: empty".into()));
    }
    Ok(list)
}

fn parse_file(path: &PathBuf) -> Result<Layer, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }

    let mut layer = Layer::default();
    let num = |v: &str, key: &str| {
        v.parse::<f64>()
            .map_err(|e| CliError::Config(format!("{key}: {e}")))
    };
    let flag = |v: &str, key: &str| match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(CliError::Config(format!(
            "{key}: expected boolean, got `{other}`"
        ))),
    };
    for (key, value) in &map {
        match key.as_str() {
            "experiment" => layer.experiment = Some(value.clone()),
            "phi-list" => layer.phi_list = Some(parse_phi_list(value)?),
            "grid" => {
                layer.grid = Some(
                    value
                        .parse::<usize>()
                        .map_err(|e| CliError::Config(format!("grid: {e}")))?,
                )
            }
            "dphi" => layer.dphi = Some(num(value, key)?),
            "g" => layer.g = Some(num(value, key)?),
            "tau" => layer.tau = Some(num(value, key)?),
            "zeta" => layer.zeta = Some(num(value, key)?),
            "rate" => layer.rate = Some(num(value, key)?),
            "t1-us" => layer.t1_us = Some(num(value, key)?),
            "t2-us" => layer.t2_us = Some(num(value, key)?),
            "t-exposure-ns" => layer.t_exposure_ns = Some(num(value, key)?),
            "omega0-ghz" => layer.omega0_ghz = Some(num(value, key)?),
            "sigma-p-ns" => layer.sigma_p_ns = Some(num(value, key)?),
            "alpha" => layer.alpha = Some(num(value, key)?),
            "window-k" => layer.window_k = Some(num(value, key)?),
            "dt-ps" => layer.dt_ps = Some(num(value, key)?),
            "collisions" => {
                layer.collisions = Some(
                    value
                        .parse::<usize>()
                        .map_err(|e| CliError::Config(format!("collisions: {e}")))?,
                )
            }
            "conv-tol" => layer.conv_tol = Some(num(value, key)?),
            "normalize-ancilla" => layer.normalize_ancilla = Some(flag(value, key)?),
            "out" => layer.out = Some(PathBuf::from(value)),
            "svg" => layer.svg = Some(flag(value, key)?),
            other => return Err(CliError::Config(format!("unknown config key `{other}`"))),
        }
    }
    Ok(layer)
}

fn cli_layer(cli: &Cli) -> Result<Layer, CliError> {
    Ok(Layer {
        experiment: cli.experiment.clone(),
        phi_list: cli.phi_list.as_deref().map(parse_phi_list).transpose()?,
        grid: cli.grid,
        dphi: cli.dphi,
        g: cli.g,
        tau: cli.tau,
        zeta: cli.zeta,
        rate: cli.rate,
        t1_us: cli.t1_us,
        t2_us: cli.t2_us,
        t_exposure_ns: cli.t_exposure_ns,
        omega0_ghz: cli.omega0_ghz,
        sigma_p_ns: cli.sigma_p_ns,
        alpha: cli.alpha,
        window_k: cli.window_k,
        dt_ps: cli.dt_ps,
        collisions: cli.collisions,
        conv_tol: cli.conv_tol,
        normalize_ancilla: if cli.normalize_ancilla {
            Some(true)
        } else {
            None
        },
        out: cli.out.clone(),
        svg: if cli.svg { Some(true) } else { None },
    })
}

/// Merges flags over file values over defaults and validates the result.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    if cli.zeta.is_some() && cli.rate.is_some() {
        return Err(CliError::Config(
            "zeta and rate are mutually exclusive ways of fixing zeta = rate * tau * g".into(),
        ));
    }

    let mut layer = cli_layer(cli)?;
    if let Some(path) = &cli.config {
        layer.merge_over(parse_file(path)?);
    }
    // a flag fixing one of the pair supersedes the file's value of the other
    if cli.zeta.is_some() {
        layer.rate = cli.rate;
    }
    if cli.rate.is_some() {
        layer.zeta = cli.zeta;
    }

    let experiment = match &layer.experiment {
        Some(name) => Experiment::parse(name)?,
        None => return Err(CliError::Config(
            "no experiment given (positional argument or `experiment = ...` in the config file)"
                .into(),
        )),
    };

    let g = layer.g.unwrap_or(0.1);
    let tau = layer.tau.unwrap_or(0.12);
    let (zeta, rate) = match (layer.zeta, layer.rate) {
        (Some(z), None) => {
            let rate = if g > 0.0 { z / (tau * g) } else { 1.0 };
            (z, rate)
        }
        (None, Some(r)) => (r * tau * g, r),
        (None, None) => {
            let z = 0.012;
            let rate = if g > 0.0 { z / (tau * g) } else { 1.0 };
            (z, rate)
        }
        // both may appear together only in a config file (the metadata echo
        // writes both); they must then agree
        (Some(z), Some(r)) => {
            if (z - r * tau * g).abs() > 1e-9 * z.abs().max(1e-300) {
                return Err(CliError::Config(format!(
                    "zeta = {z} is inconsistent with rate * tau * g = {}",
                    r * tau * g
                )));
            }
            (z, r)
        }
    };

    let omega0_ghz = layer.omega0_ghz.unwrap_or(4.5);
    // drive period / 64, in ps
    let default_dt_ps = 1e3 / omega0_ghz / 64.0;
    let collisions = layer.collisions.unwrap_or(match experiment {
        Experiment::SteadyState => 500_000,
        _ => 300,
    });

    let cfg = ExperimentConfig {
        experiment,
        phi_list: layer.phi_list,
        grid: layer.grid.unwrap_or(50),
        dphi: layer.dphi.unwrap_or(1e-4),
        g,
        tau,
        zeta,
        rate,
        t1_us: layer.t1_us.unwrap_or(150.0),
        t2_us: layer.t2_us.unwrap_or(100.0),
        t_exposure_ns: layer.t_exposure_ns.unwrap_or(480.0),
        omega0_ghz,
        sigma_p_ns: layer.sigma_p_ns.unwrap_or(22.4),
        alpha: layer.alpha.unwrap_or(std::f64::consts::FRAC_PI_2),
        window_k: layer.window_k.unwrap_or(4.0),
        dt_ps: layer.dt_ps.unwrap_or(default_dt_ps),
        collisions,
        conv_tol: layer.conv_tol.unwrap_or(1e-8),
        normalize_ancilla: layer.normalize_ancilla.unwrap_or(false),
        out: layer.out,
        svg: layer.svg.unwrap_or(false),
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let positive: [(&str, f64); 10] = [
        ("dphi", cfg.dphi),
        ("tau", cfg.tau),
        ("t1-us", cfg.t1_us),
        ("t2-us", cfg.t2_us),
        ("omega0-ghz", cfg.omega0_ghz),
        ("sigma-p-ns", cfg.sigma_p_ns),
        ("alpha", cfg.alpha),
        ("dt-ps", cfg.dt_ps),
        ("conv-tol", cfg.conv_tol),
        ("rate", cfg.rate),
    ];
    for (name, v) in positive {
        if !(v > 0.0) {
            return Err(CliError::Config(format!("{name} = {v} must be > 0")));
        }
    }
    if cfg.g < 0.0 {
        return Err(CliError::Config(format!("g = {} must be >= 0", cfg.g)));
    }
    if cfg.zeta < 0.0 {
        return Err(CliError::Config(format!(
            "zeta = {} must be >= 0",
            cfg.zeta
        )));
    }
    if cfg.t_exposure_ns < 0.0 {
        return Err(CliError::Config(format!(
            "t-exposure-ns = {} must be >= 0",
            cfg.t_exposure_ns
        )));
    }
    if cfg.grid < 3 {
        return Err(CliError::Config(format!(
            "grid = {} must be >= 3",
            cfg.grid
        )));
    }
    if cfg.collisions < 1 {
        return Err(CliError::Config("collisions must be >= 1".into()));
    }
    if !(cfg.dphi < 1e-2) {
        return Err(CliError::Config(format!(
            "dphi = {} must be < 1e-2",
            cfg.dphi
        )));
    }
    if cfg.t2_us > 2.0 * cfg.t1_us {
        return Err(CliError::Config(format!(
            "t2-us = {} exceeds 2 * t1-us = {}; the pure dephasing rate would be negative",
            cfg.t2_us,
            2.0 * cfg.t1_us
        )));
    }
    if cfg.window_k < 3.0 {
        return Err(CliError::Config(format!(
            "window-k = {} must be >= 3",
            cfg.window_k
        )));
    }
    // the pulse spec enforces dt <= period/40; fail early with the flag name
    let period_ps = 1e3 / cfg.omega0_ghz;
    if cfg.dt_ps > period_ps / 40.0 {
        return Err(CliError::Config(format!(
            "dt-ps = {} must be <= drive period / 40 = {:.4} ps",
            cfg.dt_ps,
            period_ps / 40.0
        )));
    }
    if cfg.svg && cfg.out.is_none() {
        return Err(CliError::Config("svg output requires --out".into()));
    }
    Ok(())
}
