//! Experiment orchestration: maps a resolved config onto the library
//! pipelines and collects named columns plus a metadata echo.

use rayon::prelude::*;

use qfic_core::collision::{collide, steady_state_numeric, CollisionParams};
use qfic_core::devicesim::{bloch_trajectory, calibrate, NoiseChannels, PulseSpec};
use qfic_core::microme::{qfi_closed_form, RateBundle};
use qfic_core::qmath::DensityMatrix;
use qfic_core::reservoir::{prepare_unit, ReservoirUnitSpec};

use crate::config::{CliError, Experiment, ExperimentConfig};
use crate::output::fmt_g;

/// Equal-length named series plus the resolved-config echo that goes into
/// the CSV comment block.
pub struct SweepResult {
    pub columns: Vec<(String, Vec<f64>)>,
    pub metadata: Vec<(String, String)>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepResult, CliError> {
    let columns = match cfg.experiment {
        Experiment::MutualInfo => mutual_info(cfg)?,
        Experiment::QfiAnalytic => qfi_analytic(cfg)?,
        Experiment::QfiDevice => qfi_device(cfg)?,
        Experiment::BlochTraj => bloch_traj(cfg)?,
        Experiment::Calibrate => calibrate_run(cfg)?,
        Experiment::SteadyState => steady_state(cfg)?,
    };
    debug_assert!(columns.windows(2).all(|w| w[0].1.len() == w[1].1.len()));
    Ok(SweepResult {
        columns,
        metadata: metadata(cfg),
    })
}

fn metadata(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let mut meta = vec![("experiment".into(), cfg.experiment.name().to_string())];
    if let Some(list) = &cfg.phi_list {
        let joined: Vec<String> = list.iter().map(|&p| fmt_g(p)).collect();
        meta.push(("phi-list".into(), joined.join(",")));
    }
    let floats: [(&str, f64); 13] = [
        ("dphi", cfg.dphi),
        ("g", cfg.g),
        ("tau", cfg.tau),
        ("zeta", cfg.zeta),
        ("rate", cfg.rate),
        ("t1-us", cfg.t1_us),
        ("t2-us", cfg.t2_us),
        ("t-exposure-ns", cfg.t_exposure_ns),
        ("omega0-ghz", cfg.omega0_ghz),
        ("sigma-p-ns", cfg.sigma_p_ns),
        ("alpha", cfg.alpha),
        ("window-k", cfg.window_k),
        ("dt-ps", cfg.dt_ps),
    ];
    meta.push(("grid".into(), cfg.grid.to_string()));
    for (name, v) in floats {
        meta.push((name.into(), fmt_g(v)));
    }
    meta.push(("collisions".into(), cfg.collisions.to_string()));
    meta.push(("conv-tol".into(), fmt_g(cfg.conv_tol)));
    meta.push((
        "normalize-ancilla".into(),
        cfg.normalize_ancilla.to_string(),
    ));
    meta
}

fn collision_params(cfg: &ExperimentConfig) -> Result<CollisionParams, CliError> {
    CollisionParams::new(cfg.g, cfg.tau, 1.0, 1.0, cfg.rate)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn unit_spec(cfg: &ExperimentConfig, phi: f64) -> Result<ReservoirUnitSpec, CliError> {
    ReservoirUnitSpec::new(phi, cfg.t_exposure_s(), cfg.t1_s(), cfg.t2_s())
        .map_err(|e| CliError::Config(e.to_string()))
}

fn ancilla(cfg: &ExperimentConfig, phi: f64) -> Result<DensityMatrix, CliError> {
    prepare_unit(&unit_spec(cfg, phi)?, cfg.normalize_ancilla)
        .map_err(|e| CliError::Numeric(e.to_string()))
}

fn rate_bundle(cfg: &ExperimentConfig) -> Result<RateBundle, CliError> {
    RateBundle::from_times(cfg.t1_s(), cfg.t2_s(), cfg.zeta, cfg.t_exposure_s())
        .map_err(|e| CliError::Config(e.to_string()))
}

fn pulse_spec(cfg: &ExperimentConfig) -> Result<PulseSpec, CliError> {
    let omega0 = std::f64::consts::TAU * cfg.omega0_ghz; // rad/ns
    PulseSpec::new(
        omega0,
        omega0,
        cfg.sigma_p_ns,
        cfg.alpha,
        cfg.window_k,
        cfg.dt_ps * 1e-3,
        1.0,
    )
    .map_err(|e| CliError::Config(e.to_string()))
}

fn noise(cfg: &ExperimentConfig) -> Result<NoiseChannels, CliError> {
    NoiseChannels::from_times(cfg.t1_us * 1e3, cfg.t2_us * 1e3)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn calibrated_pulse(cfg: &ExperimentConfig) -> Result<PulseSpec, CliError> {
    let spec = pulse_spec(cfg)?;
    let cal = calibrate(&spec).map_err(|e| CliError::Numeric(e.to_string()))?;
    Ok(spec.with_amp_scale(cal.amp_scale))
}

type Columns = Vec<(String, Vec<f64>)>;

fn mutual_info(cfg: &ExperimentConfig) -> Result<Columns, CliError> {
    let phis = match &cfg.phi_list {
        Some(list) => list.clone(),
        None => {
            let pi = std::f64::consts::PI;
            vec![pi / 4.0, pi / 2.0, pi]
        }
    };
    let params = collision_params(cfg)?;
    let steps = cfg.collisions;

    let series: Result<Vec<Vec<f64>>, CliError> = phis
        .par_iter()
        .map(|&phi| {
            let unit = ancilla(cfg, phi)?;
            let mut rho = DensityMatrix::plus_state();
            let mut mi = Vec::with_capacity(steps);
            for _ in 0..steps {
                let (next, info) =
                    collide(&rho, &unit, &params).map_err(|e| CliError::Numeric(e.to_string()))?;
                rho = next;
                mi.push(info);
            }
            Ok(mi)
        })
        .collect();
    let series = series?;

    let mut columns: Columns = vec![("step".into(), (1..=steps).map(|s| s as f64).collect())];
    for (k, mi) in series.into_iter().enumerate() {
        columns.push((format!("mi_{}", k + 1), mi));
    }
    Ok(columns)
}

fn qfi_analytic(cfg: &ExperimentConfig) -> Result<Columns, CliError> {
    let rates = rate_bundle(cfg)?;
    let phis = cfg.phis();
    let qfi: Result<Vec<f64>, CliError> = phis
        .par_iter()
        .map(|&phi| {
            qfi_closed_form(&unit_spec(cfg, phi)?, &rates)
                .map(|f| f.value)
                .map_err(|e| CliError::Numeric(e.to_string()))
        })
        .collect();
    Ok(vec![("phi".into(), phis), ("qfi".into(), qfi?)])
}

fn qfi_device(cfg: &ExperimentConfig) -> Result<Columns, CliError> {
    let spec = calibrated_pulse(cfg)?;
    let noise = noise(cfg)?;
    let phis = cfg.phis();
    let sweep = qfic_core::devicesim::qfi_device_sweep(
        &phis,
        cfg.dphi,
        &DensityMatrix::basis_state(0),
        &spec,
        &noise,
    )
    .map_err(|e| CliError::Numeric(e.to_string()))?;
    let qfi: Vec<f64> = sweep.into_iter().map(|(_, f)| f).collect();
    Ok(vec![("phi".into(), phis), ("qfi".into(), qfi)])
}

fn bloch_traj(cfg: &ExperimentConfig) -> Result<Columns, CliError> {
    let spec = calibrated_pulse(cfg)?;
    let noise = noise(cfg)?;
    // roughly 16 samples per envelope width
    let sample_every = ((spec.sigma_p / spec.dt / 16.0).round() as usize).max(1);
    let traj = bloch_trajectory(&DensityMatrix::basis_state(0), &spec, &noise, sample_every)
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    Ok(vec![
        ("time_ns".into(), traj.times),
        ("rx".into(), traj.bloch_points.iter().map(|r| r.x).collect()),
        ("ry".into(), traj.bloch_points.iter().map(|r| r.y).collect()),
        ("rz".into(), traj.bloch_points.iter().map(|r| r.z).collect()),
        ("purity".into(), traj.purities),
    ])
}

fn calibrate_run(cfg: &ExperimentConfig) -> Result<Columns, CliError> {
    let spec = pulse_spec(cfg)?;
    let cal = calibrate(&spec).map_err(|e| CliError::Numeric(e.to_string()))?;
    Ok(vec![
        ("amp_scale".into(), vec![cal.amp_scale]),
        ("fidelity".into(), vec![cal.fidelity]),
    ])
}

fn steady_state(cfg: &ExperimentConfig) -> Result<Columns, CliError> {
    let params = collision_params(cfg)?;
    let phis = cfg.phis();
    let states: Result<Vec<DensityMatrix>, CliError> = phis
        .par_iter()
        .map(|&phi| {
            if cfg.normalize_ancilla {
                steady_state_with_normalized_ancilla(cfg, phi, &params)
            } else {
                steady_state_numeric(&unit_spec(cfg, phi)?, &params, cfg.collisions, cfg.conv_tol)
                    .map_err(|e| CliError::Numeric(format!("phi = {phi}: {e}")))
            }
        })
        .collect();
    let states = states?;

    let pick = |f: &dyn Fn(&DensityMatrix) -> f64| states.iter().map(f).collect::<Vec<_>>();
    Ok(vec![
        ("phi".into(), phis),
        ("p0".into(), pick(&|s| s.mat()[(0, 0)].re)),
        ("p1".into(), pick(&|s| s.mat()[(1, 1)].re)),
        ("coh_re".into(), pick(&|s| s.mat()[(0, 1)].re)),
        ("coh_im".into(), pick(&|s| s.mat()[(0, 1)].im)),
    ])
}

fn steady_state_with_normalized_ancilla(
    cfg: &ExperimentConfig,
    phi: f64,
    params: &CollisionParams,
) -> Result<DensityMatrix, CliError> {
    let unit = ancilla(cfg, phi)?;
    let mut rho = DensityMatrix::plus_state();
    for _ in 0..cfg.collisions {
        let (next, _) =
            collide(&rho, &unit, params).map_err(|e| CliError::Numeric(e.to_string()))?;
        let delta = next.trace_distance(&rho);
        rho = next;
        if delta < cfg.conv_tol {
            return Ok(rho);
        }
    }
    Err(CliError::Numeric(format!(
        "phi = {phi}: no steady state within {} collisions",
        cfg.collisions
    )))
}
