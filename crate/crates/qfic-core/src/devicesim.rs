//! Device-level simulation of the noisy H-phi-H sequence: Gaussian-modulated
//! lab-frame drive, time-dependent Lindblad propagation, virtual-Z frame
//! updates, amplitude calibration, finite-difference QFI sweeps and Bloch
//! trajectory sampling.
//!
//! Internal units are nanoseconds and rad/ns, keeping every float near unity
//! inside the integrator.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::fisher::{centered_diff, qfi_qubit_matrix, DiffSpec, FisherError};
use crate::qmath::{kron, BlochVector, ComplexMatrix, DensityMatrix, QmathError};

#[derive(Debug, Error, PartialEq)]
pub enum DeviceError {
    #[error("invalid pulse spec: {0}")]
    InvalidSpec(String),
    #[error("trace drifted by {0:.3e} during propagation")]
    TraceDrift(f64),
    #[error("positivity breach: eigenvalue {0:.3e}")]
    PositivityBreach(f64),
    #[error("calibration failed: best fidelity {fidelity:.6} at amp scale {amp_scale:.4}")]
    CalibrationFailure { amp_scale: f64, fidelity: f64 },
    #[error(transparent)]
    Math(#[from] QmathError),
    #[error(transparent)]
    Fisher(#[from] FisherError),
}

/// Gaussian x-pulse drive parameters. Frequencies in rad/ns, times in ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub omega0: f64,
    pub omega_d: f64,
    pub sigma_p: f64,
    pub alpha: f64,
    pub window_k: f64,
    pub dt: f64,
    pub amp_scale: f64,
}

impl PulseSpec {
    pub fn new(
        omega0: f64,
        omega_d: f64,
        sigma_p: f64,
        alpha: f64,
        window_k: f64,
        dt: f64,
        amp_scale: f64,
    ) -> Result<Self, DeviceError> {
        if !(sigma_p > 0.0) {
            return Err(DeviceError::InvalidSpec(format!(
                "sigma_p = {sigma_p} must be > 0"
            )));
        }
        if !(omega_d > 0.0) {
            return Err(DeviceError::InvalidSpec(format!(
                "omega_d = {omega_d} must be > 0"
            )));
        }
        if !(window_k >= 3.0) {
            return Err(DeviceError::InvalidSpec(format!(
                "window_k = {window_k} must be >= 3"
            )));
        }
        let carrier_bound = (2.0 * std::f64::consts::PI / omega_d) / 40.0;
        if !(dt > 0.0 && dt <= carrier_bound) {
            return Err(DeviceError::InvalidSpec(format!(
                "dt = {dt} ns must lie in (0, {carrier_bound:.4e}] to resolve the carrier"
            )));
        }
        if !(amp_scale > 0.0) {
            return Err(DeviceError::InvalidSpec(format!(
                "amp_scale = {amp_scale} must be > 0"
            )));
        }
        Ok(Self {
            omega0,
            omega_d,
            sigma_p,
            alpha,
            window_k,
            dt,
            amp_scale,
        })
    }

    /// Resonant 4.5 GHz qubit with a 22.4 ns quarter-turn Gaussian pulse and
    /// a carrier-resolving step of 1/64 drive period.
    pub fn default_device() -> Self {
        let omega0 = 2.0 * std::f64::consts::PI * 4.5;
        let dt = (2.0 * std::f64::consts::PI / omega0) / 64.0;
        Self::new(
            omega0,
            omega0,
            22.4,
            std::f64::consts::FRAC_PI_2,
            4.0,
            dt,
            1.0,
        )
        .expect("defaults satisfy the invariants")
    }

    pub fn with_amp_scale(mut self, amp_scale: f64) -> Self {
        self.amp_scale = amp_scale;
        self
    }

    /// Pulse window length `2 K sigma_p` (ns).
    pub fn window(&self) -> f64 {
        2.0 * self.window_k * self.sigma_p
    }

    /// Pulse center `K sigma_p` (ns).
    pub fn t_center(&self) -> f64 {
        self.window_k * self.sigma_p
    }
}

/// Dissipation rates of the x-pulse channel in 1/ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseChannels {
    pub gamma1: f64,
    pub gamma_phi: f64,
}

impl NoiseChannels {
    pub fn none() -> Self {
        Self {
            gamma1: 0.0,
            gamma_phi: 0.0,
        }
    }

    /// `Gamma_1 = 1/T1`, `gamma_phi = 1/T2 - 1/(2 T1)`; times in ns.
    pub fn from_times(t1: f64, t2: f64) -> Result<Self, DeviceError> {
        if !(t1 > 0.0 && t2 > 0.0) {
            return Err(DeviceError::InvalidSpec(format!(
                "t1 = {t1}, t2 = {t2} must be > 0"
            )));
        }
        let gamma1 = 1.0 / t1;
        let gamma_phi = 1.0 / t2 - 0.5 * gamma1;
        if gamma_phi < 0.0 {
            return Err(DeviceError::InvalidSpec(format!(
                "t2 = {t2} exceeds 2 t1 = {}; pure dephasing rate would be negative",
                2.0 * t1
            )));
        }
        Ok(Self { gamma1, gamma_phi })
    }
}

/// Peak Rabi frequency `Omega_0 = alpha / (sqrt(pi) sigma_p)` in rad/ns.
pub fn peak_amplitude(alpha: f64, sigma_p: f64) -> f64 {
    alpha / (std::f64::consts::PI.sqrt() * sigma_p)
}

/// Drive envelope `amp_scale * Omega_0 * exp(-((t - t_c)/sigma_p)^2)`.
pub fn gaussian_envelope(t: f64, spec: &PulseSpec) -> f64 {
    let x = (t - spec.t_center()) / spec.sigma_p;
    spec.amp_scale * peak_amplitude(spec.alpha, spec.sigma_p) * (-x * x).exp()
}

/// `H(t) = (omega0/2) sigma_z + Omega(t) cos(omega_d t) sigma_x`.
pub fn lab_frame_hamiltonian(t: f64, spec: &PulseSpec) -> ComplexMatrix {
    let b = gaussian_envelope(t, spec) * (spec.omega_d * t).cos();
    let a = 0.5 * spec.omega0;
    ComplexMatrix::from_rows(&[
        &[C64::new(a, 0.0), C64::new(b, 0.0)],
        &[C64::new(b, 0.0), C64::new(-a, 0.0)],
    ])
}

// flat row-major 2x2 state for the integrator hot loop (no allocation)
type M2 = [C64; 4];

#[inline]
fn rhs_m2(r: &M2, t: f64, spec: &PulseSpec, noise: &NoiseChannels) -> M2 {
    let a = 0.5 * spec.omega0;
    let b = gaussian_envelope(t, spec) * (spec.omega_d * t).cos();
    let (r00, r01, r10, r11) = (r[0], r[1], r[2], r[3]);
    // -i [H, rho] with H = [[a, b], [b, -a]]
    let mi = C64::new(0.0, -1.0);
    let c00 = mi * (b * (r10 - r01));
    let c01 = mi * (2.0 * a * r01 + b * (r11 - r00));
    let c10 = mi * (-2.0 * a * r10 + b * (r00 - r11));
    let c11 = mi * (b * (r01 - r10));
    // Gamma_1 D[sigma-] (sigma- lowers |0> into |1>) + gamma_phi D[sigma_z]
    let g1 = noise.gamma1;
    let gp = noise.gamma_phi;
    [
        c00 - g1 * r00,
        c01 - (0.5 * g1 + 2.0 * gp) * r01,
        c10 - (0.5 * g1 + 2.0 * gp) * r10,
        c11 + g1 * r00,
    ]
}

/// Lindblad right-hand side at time `t` for an arbitrary (not necessarily
/// Hermitian) operator, enabling superoperator construction by linearity.
pub fn lindblad_rhs(
    rho: &ComplexMatrix,
    t: f64,
    spec: &PulseSpec,
    noise: &NoiseChannels,
) -> ComplexMatrix {
    let r = [rho[(0, 0)], rho[(0, 1)], rho[(1, 0)], rho[(1, 1)]];
    let d = rhs_m2(&r, t, spec, noise);
    ComplexMatrix::from_rows(&[&[d[0], d[1]], &[d[2], d[3]]])
}

fn propagate_m2(
    mut r: M2,
    spec: &PulseSpec,
    noise: &NoiseChannels,
    t_start: f64,
    t_end: f64,
    symmetrize: bool,
) -> M2 {
    assert!(t_end >= t_start);
    if t_end == t_start {
        return r;
    }
    let n = ((t_end - t_start) / spec.dt).round().max(1.0) as usize;
    let h = (t_end - t_start) / n as f64;
    for i in 0..n {
        let t = t_start + i as f64 * h;
        let k1 = rhs_m2(&r, t, spec, noise);
        let mut y = [C64::new(0.0, 0.0); 4];
        for j in 0..4 {
            y[j] = r[j] + 0.5 * h * k1[j];
        }
        let k2 = rhs_m2(&y, t + 0.5 * h, spec, noise);
        for j in 0..4 {
            y[j] = r[j] + 0.5 * h * k2[j];
        }
        let k3 = rhs_m2(&y, t + 0.5 * h, spec, noise);
        for j in 0..4 {
            y[j] = r[j] + h * k3[j];
        }
        let k4 = rhs_m2(&y, t + h, spec, noise);
        for j in 0..4 {
            r[j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if symmetrize {
            r[0] = C64::new(r[0].re, 0.0);
            r[3] = C64::new(r[3].re, 0.0);
            let avg = 0.5 * (r[1] + r[2].conj());
            r[1] = avg;
            r[2] = avg.conj();
        }
    }
    r
}

fn matrix_to_m2(m: &ComplexMatrix) -> M2 {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

fn m2_to_matrix(r: &M2) -> ComplexMatrix {
    ComplexMatrix::from_rows(&[&[r[0], r[1]], &[r[2], r[3]]])
}

/// Fixed-step 4th-order integration of the Lindblad dynamics from `t_start`
/// to `t_end`, Hermitian-symmetrized per step and validity-checked at the end.
pub fn propagate(
    rho0: &DensityMatrix,
    spec: &PulseSpec,
    noise: &NoiseChannels,
    t_start: f64,
    t_end: f64,
) -> Result<DensityMatrix, DeviceError> {
    let r = propagate_m2(matrix_to_m2(rho0.mat()), spec, noise, t_start, t_end, true);
    let out = m2_to_matrix(&r);
    let drift = (out.trace().re - rho0.trace()).abs();
    if drift > 1e-9 {
        return Err(DeviceError::TraceDrift(drift));
    }
    let (vals, _) = crate::qmath::hermitian_eigen(&out)?;
    if vals[0] < -1e-6 {
        return Err(DeviceError::PositivityBreach(vals[0]));
    }
    Ok(DensityMatrix::with_tolerance(out, rho0.trace_tolerance())?)
}

fn rz(beta: f64) -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        &[C64::from_polar(1.0, -0.5 * beta), C64::new(0.0, 0.0)],
        &[C64::new(0.0, 0.0), C64::from_polar(1.0, 0.5 * beta)],
    ])
}

fn virtual_z_matrix(m: &ComplexMatrix, beta: f64) -> ComplexMatrix {
    let u = rz(beta);
    u.mul(m).mul(&u.adjoint())
}

/// Ideal software frame rotation `R_z(beta) rho R_z(beta)^dag`.
pub fn virtual_z(rho: &DensityMatrix, beta: f64) -> DensityMatrix {
    DensityMatrix::with_tolerance(virtual_z_matrix(rho.mat(), beta), rho.trace_tolerance())
        .expect("z-conjugation preserves state validity")
}

fn x_pulse_matrix(
    m: &ComplexMatrix,
    spec: &PulseSpec,
    noise: &NoiseChannels,
    symmetrize: bool,
) -> ComplexMatrix {
    let propagated = propagate_m2(matrix_to_m2(m), spec, noise, 0.0, spec.window(), symmetrize);
    // close the rotating frame: the qubit precesses omega_d * T during the
    // window, which would otherwise leak a deterministic z-phase into the
    // phase-gate bookkeeping of the surrounding virtual-Z updates
    virtual_z_matrix(&m2_to_matrix(&propagated), -spec.omega_d * spec.window())
}

/// Noisy x-rotation channel: one pulse window of Lindblad evolution followed
/// by the frame-closing virtual-Z.
pub fn x_pulse(
    rho: &DensityMatrix,
    spec: &PulseSpec,
    noise: &NoiseChannels,
) -> Result<DensityMatrix, DeviceError> {
    let out = x_pulse_matrix(rho.mat(), spec, noise, true);
    let drift = (out.trace().re - rho.trace()).abs();
    if drift > 1e-9 {
        return Err(DeviceError::TraceDrift(drift));
    }
    Ok(DensityMatrix::with_tolerance(out, rho.trace_tolerance())?)
}

/// The full device channel
/// `Uz[pi/2] . Ex[pi/2] . Uz[phi+pi] . Ex[pi/2] . Uz[pi/2]` applied to `rho0`.
pub fn device_channel(
    phi: f64,
    rho0: &DensityMatrix,
    spec: &PulseSpec,
    noise: &NoiseChannels,
) -> Result<DensityMatrix, DeviceError> {
    let half = std::f64::consts::FRAC_PI_2;
    let s1 = virtual_z(rho0, half);
    let s2 = x_pulse(&s1, spec, noise)?;
    let s3 = virtual_z(&s2, phi + std::f64::consts::PI);
    let s4 = x_pulse(&s3, spec, noise)?;
    Ok(virtual_z(&s4, half))
}

fn conj_matrix(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.dim();
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = m[(i, j)].conj();
        }
    }
    out
}

/// Natural (row-major vec) superoperator of the x-pulse channel.
fn x_pulse_superoperator(spec: &PulseSpec, noise: &NoiseChannels) -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(4);
    for k in 0..4 {
        let mut basis = ComplexMatrix::zeros(2);
        basis[(k / 2, k % 2)] = C64::new(1.0, 0.0);
        let out = x_pulse_matrix(&basis, spec, noise, false);
        for i in 0..2 {
            for j in 0..2 {
                s[(2 * i + j, k)] = out[(i, j)];
            }
        }
    }
    s
}

/// Average gate fidelity of the noiseless pulse channel against `R_x(pi/2)`.
fn rx_half_fidelity(spec: &PulseSpec) -> f64 {
    let s_e = x_pulse_superoperator(spec, &NoiseChannels::none());
    let c = std::f64::consts::FRAC_PI_4.cos();
    let s = std::f64::consts::FRAC_PI_4.sin();
    let rx = ComplexMatrix::from_rows(&[
        &[C64::new(c, 0.0), C64::new(0.0, -s)],
        &[C64::new(0.0, -s), C64::new(c, 0.0)],
    ]);
    let s_v = kron(&rx, &conj_matrix(&rx)).expect("2x2 factors");
    let f_entanglement = s_v.adjoint().mul(&s_e).trace().re / 4.0;
    (2.0 * f_entanglement + 1.0) / 3.0
}

/// Result of the amplitude calibration: the scale applied to the Gaussian
/// envelope and the average gate fidelity it achieves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub amp_scale: f64,
    pub fidelity: f64,
}

/// Finds the envelope scale in [0.5, 4] whose noiseless pulse best realizes
/// `R_x(pi/2)`: a coarse log-spaced scan followed by golden-section
/// refinement. Fails if the best fidelity stays below 0.999.
pub fn calibrate(spec: &PulseSpec) -> Result<Calibration, DeviceError> {
    let eval = |s: f64| rx_half_fidelity(&spec.with_amp_scale(s));

    let (lo, hi) = (0.5f64, 4.0f64);
    let coarse = 17;
    let mut best_i = 0;
    let mut best_f = f64::NEG_INFINITY;
    let grid: Vec<f64> = (0..coarse)
        .map(|i| lo * (hi / lo).powf(i as f64 / (coarse - 1) as f64))
        .collect();
    for (i, &s) in grid.iter().enumerate() {
        let f = eval(s);
        if f > best_f {
            best_f = f;
            best_i = i;
        }
    }
    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(coarse - 1)];

    // golden-section maximization on the bracket
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    while b - a > 1e-5 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = eval(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = eval(x1);
        }
    }
    let amp_scale = 0.5 * (a + b);
    let fidelity = eval(amp_scale);
    if fidelity < 0.999 {
        return Err(DeviceError::CalibrationFailure {
            amp_scale,
            fidelity,
        });
    }
    Ok(Calibration {
        amp_scale,
        fidelity,
    })
}

/// QFI of the device channel output over a phi grid, by centered finite
/// differences with step `dphi`. Grid points evaluate in parallel; output
/// order follows the input grid.
pub fn qfi_device_sweep(
    grid: &[f64],
    dphi: f64,
    rho0: &DensityMatrix,
    spec: &PulseSpec,
    noise: &NoiseChannels,
) -> Result<Vec<(f64, f64)>, DeviceError> {
    let diff = DiffSpec::new(dphi)?;
    grid.par_iter()
        .map(|&phi| {
            let at = |p: f64| {
                device_channel(p, rho0, spec, noise).expect("channel evaluation inside the sweep")
            };
            let drho = centered_diff(at, phi, &diff);
            let f = qfi_qubit_matrix(&at(phi), &drho)?;
            Ok((phi, f.value))
        })
        .collect()
}

/// Sampled Bloch-vector path across one noisy x-pulse window.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub bloch_points: Vec<BlochVector>,
    pub purities: Vec<f64>,
}

/// Integrates one pulse window, recording the Bloch vector and purity every
/// `sample_every` steps (plus the initial and final points).
pub fn bloch_trajectory(
    rho0: &DensityMatrix,
    spec: &PulseSpec,
    noise: &NoiseChannels,
    sample_every: usize,
) -> Result<Trajectory, DeviceError> {
    assert!(sample_every >= 1);
    let t_end = spec.window();
    let n = (t_end / spec.dt).round().max(1.0) as usize;
    let h = t_end / n as f64;

    let mut times = Vec::new();
    let mut bloch_points = Vec::new();
    let mut purities = Vec::new();
    let mut r = matrix_to_m2(rho0.mat());

    let mut record = |t: f64, r: &M2| {
        times.push(t);
        bloch_points.push(BlochVector::new(
            2.0 * r[1].re,
            -2.0 * r[1].im,
            r[0].re - r[3].re,
        ));
        let purity = (r[0] * r[0] + r[1] * r[2] + r[2] * r[1] + r[3] * r[3]).re;
        purities.push(purity);
    };

    record(0.0, &r);
    for i in 0..n {
        let t = i as f64 * h;
        r = propagate_m2(r, spec, noise, t, t + h, true);
        if (i + 1) % sample_every == 0 || i + 1 == n {
            record(t + h, &r);
        }
    }
    Ok(Trajectory {
        times,
        bloch_points,
        purities,
    })
}
