//! Reservoir ancilla preparation: the ideal H-phi-H gate algebra and the
//! phenomenologically damped unit state with T1/T2 exponential factors.
//! The damped state is deliberately subnormalized (trace exp(-t/T1)).

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::qmath::{ComplexMatrix, DensityMatrix, QmathError};

#[derive(Debug, Error, PartialEq)]
pub enum ReservoirError {
    #[error("invalid reservoir unit spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Math(#[from] QmathError),
}

/// Parameters of one prepared ancilla: phase, noise exposure time and the
/// relaxation/dephasing time constants. All times in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservoirUnitSpec {
    pub phi: f64,
    pub exposure_time: f64,
    pub t1: f64,
    pub t2: f64,
}

impl ReservoirUnitSpec {
    pub fn new(phi: f64, exposure_time: f64, t1: f64, t2: f64) -> Result<Self, ReservoirError> {
        if !(t1 > 0.0) {
            return Err(ReservoirError::InvalidSpec(format!(
                "t1 = {t1} must be > 0"
            )));
        }
        if !(t2 > 0.0) {
            return Err(ReservoirError::InvalidSpec(format!(
                "t2 = {t2} must be > 0"
            )));
        }
        if !(exposure_time >= 0.0) {
            return Err(ReservoirError::InvalidSpec(format!(
                "exposure_time = {exposure_time} must be >= 0"
            )));
        }
        Ok(Self {
            phi,
            exposure_time,
            t1,
            t2,
        })
    }

    /// Physical dephasing consistency; a false return warrants a warning
    /// (pure dephasing rate would be negative), not a hard error.
    pub fn dephasing_consistent(&self) -> bool {
        self.t2 <= 2.0 * self.t1
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Hadamard gate `(1/sqrt 2) [[1, 1], [1, -1]]`.
pub fn hadamard() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_rows(&[&[c(s, 0.0), c(s, 0.0)], &[c(s, 0.0), c(-s, 0.0)]])
}

/// Phase gate `diag(1, e^{i phi})`.
pub fn phase_gate(phi: f64) -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        &[c(1.0, 0.0), c(0.0, 0.0)],
        &[c(0.0, 0.0), C64::from_polar(1.0, phi)],
    ])
}

/// Conjugates a state by the ideal unitary sequence H, phase(phi), H.
pub fn ideal_h_phi_h(phi: f64, rho0: &DensityMatrix) -> DensityMatrix {
    let h = hadamard();
    let u = h.mul(&phase_gate(phi)).mul(&h);
    let out = u.mul(rho0.mat()).mul(&u.adjoint());
    DensityMatrix::with_tolerance(out, rho0.trace_tolerance())
        .expect("unitary conjugation preserves state validity")
}

/// The damped ancilla state: diagonal `((1 +- cos phi)/2) e^{-t/T1}`,
/// off-diagonal `+-(i sin(phi)/2) e^{-t/T2}`. Implemented verbatim, so the
/// trace is `e^{-t/T1}` and the state is subnormalized; `normalize` divides
/// it out for sensitivity studies.
pub fn prepare_unit(
    spec: &ReservoirUnitSpec,
    normalize: bool,
) -> Result<DensityMatrix, ReservoirError> {
    let e1 = (-spec.exposure_time / spec.t1).exp();
    let e2 = (-spec.exposure_time / spec.t2).exp();
    let cosp = spec.phi.cos();
    let coh = 0.5 * spec.phi.sin() * e2;
    let mat = ComplexMatrix::from_rows(&[
        &[c(0.5 * (1.0 + cosp) * e1, 0.0), c(0.0, coh)],
        &[c(0.0, -coh), c(0.5 * (1.0 - cosp) * e1, 0.0)],
    ]);
    // the construction subnormalizes the trace to e1; widen the guard band
    // accordingly for long exposures
    let tol = crate::qmath::DEFAULT_TRACE_TOL.max((1.0 - e1) * (1.0 + 1e-9) + 1e-12);
    let rho = DensityMatrix::with_tolerance(mat, tol)?;
    Ok(if normalize { rho.normalized() } else { rho })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{bloch_from_rho, hermitian_eigen, pauli_x, pauli_z};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const T1: f64 = 150e-6;
    const T2: f64 = 100e-6;
    const T_EXPOSURE: f64 = 480e-9;

    #[test]
    fn hadamard_algebra() {
        let h = hadamard();
        let h2 = h.mul(&h);
        assert!(h2.max_abs_diff(&ComplexMatrix::identity(2)) <= 1e-15);
        let hzh = h.mul(&pauli_z()).mul(&h);
        assert!(hzh.max_abs_diff(&pauli_x()) <= 1e-15);
        // H|0> = |+>
        let plus = h.mul(DensityMatrix::basis_state(0).mat()).mul(&h.adjoint());
        assert!(plus.max_abs_diff(DensityMatrix::plus_state().mat()) <= 1e-15);
    }

    #[test]
    fn phase_gate_special_angles() {
        assert!(phase_gate(0.0).max_abs_diff(&ComplexMatrix::identity(2)) <= 1e-15);
        assert!(phase_gate(PI).max_abs_diff(&pauli_z()) <= 1e-15);
        let q = phase_gate(PI / 2.0);
        assert_abs_diff_eq!(q[(1, 1)].im, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q[(1, 1)].re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ideal_sequence_populations() {
        let zero = DensityMatrix::basis_state(0);
        let id = ideal_h_phi_h(0.0, &zero);
        assert!(id.mat().max_abs_diff(zero.mat()) <= 1e-15);
        let flip = ideal_h_phi_h(PI, &zero);
        assert!(flip.mat().max_abs_diff(DensityMatrix::basis_state(1).mat()) <= 1e-14);
        for &phi in &[0.3, 1.1, 2.7, 4.9] {
            let out = ideal_h_phi_h(phi, &zero);
            assert_abs_diff_eq!(
                out.mat()[(0, 0)].re,
                (phi / 2.0).cos().powi(2),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn ideal_sequence_realized_coherence_sign() {
        // record the realized orientation: at phi = pi/2 the output sits at
        // Bloch (0, -1, 0) with this gate convention
        let out = ideal_h_phi_h(PI / 2.0, &DensityMatrix::basis_state(0));
        let r = bloch_from_rho(&out);
        assert_abs_diff_eq!(r.x, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.y, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.z, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn prepare_unit_golden_half_pi() {
        let spec = ReservoirUnitSpec::new(PI / 2.0, T_EXPOSURE, T1, T2).unwrap();
        let rho = prepare_unit(&spec, false).unwrap();
        let m = rho.mat();
        assert_abs_diff_eq!(m[(0, 0)].re, 0.49840255727151644, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(1, 1)].re, 0.49840255727151644, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(0, 1)].im, 0.4976057507950486, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(0, 1)].re, 0.0, epsilon = 0.0);
        // damped coherence sign matches the realized ideal orientation (y < 0)
        let r = bloch_from_rho(&rho);
        assert_abs_diff_eq!(r.y, -0.9952115015900972, epsilon = 1e-15);
    }

    #[test]
    fn prepare_unit_limits() {
        let spec = ReservoirUnitSpec::new(0.0, 0.0, T1, T2).unwrap();
        let rho = prepare_unit(&spec, false).unwrap();
        assert!(rho.mat().max_abs_diff(DensityMatrix::basis_state(0).mat()) <= 1e-15);

        let spec = ReservoirUnitSpec::new(PI, T_EXPOSURE, T1, T2).unwrap();
        let rho = prepare_unit(&spec, false).unwrap();
        let e1 = (-T_EXPOSURE / T1).exp();
        assert_abs_diff_eq!(rho.mat()[(0, 0)].re, 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(rho.mat()[(1, 1)].re, e1, epsilon = 1e-16);
        assert_abs_diff_eq!(rho.mat()[(0, 1)].norm(), 0.0, epsilon = 1e-16);
    }

    #[test]
    fn prepare_unit_trace_is_t1_factor() {
        for k in 0..10 {
            let t = k as f64 * 200e-9;
            for j in 0..25 {
                let phi = j as f64 * 2.0 * PI / 25.0;
                let spec = ReservoirUnitSpec::new(phi, t, T1, T2).unwrap();
                let rho = prepare_unit(&spec, false).unwrap();
                assert_abs_diff_eq!(rho.trace(), (-t / T1).exp(), epsilon = 1e-14);
                // PSD across the (phi, t) grid
                let (vals, _) = hermitian_eigen(rho.mat()).unwrap();
                assert!(
                    vals[0] >= -1e-12,
                    "negative eigenvalue {} at phi={phi}",
                    vals[0]
                );
                // coherence magnitude scaling
                assert_abs_diff_eq!(
                    rho.mat()[(0, 1)].norm(),
                    0.5 * phi.sin().abs() * (-t / T2).exp(),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn prepare_unit_normalized_has_unit_trace() {
        let spec = ReservoirUnitSpec::new(1.0, T_EXPOSURE, T1, T2).unwrap();
        let rho = prepare_unit(&spec, true).unwrap();
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn spec_validation() {
        assert!(ReservoirUnitSpec::new(0.0, 0.0, 0.0, T2).is_err());
        assert!(ReservoirUnitSpec::new(0.0, -1.0, T1, T2).is_err());
        let long_t2 = ReservoirUnitSpec::new(0.0, 0.0, T1, 400e-6).unwrap();
        assert!(!long_t2.dephasing_consistent());
        assert!(ReservoirUnitSpec::new(0.0, 0.0, T1, T2)
            .unwrap()
            .dephasing_consistent());
    }
}
