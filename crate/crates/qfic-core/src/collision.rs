//! Stroboscopic repeated-interaction engine: partial-swap collisions between
//! the probe and freshly prepared ancillas, per-step mutual information and
//! steady-state detection in trace distance.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::qmath::{
    kron, partial_trace, sigma_minus, sigma_plus, von_neumann_entropy, ComplexMatrix,
    DensityMatrix, QmathError, Subsystem,
};
use crate::reservoir::{prepare_unit, ReservoirError, ReservoirUnitSpec};

#[derive(Debug, Error, PartialEq)]
pub enum CollisionError {
    #[error("invalid collision params: {0}")]
    InvalidParams(String),
    #[error(
        "no steady state within {steps} collisions (last trace-distance step {last_delta:.3e})"
    )]
    NotConverged { steps: usize, last_delta: f64 },
    #[error(transparent)]
    Math(#[from] QmathError),
    #[error(transparent)]
    Reservoir(#[from] ReservoirError),
}

/// Partial-swap interaction parameters. `g` and the level splittings are in
/// units of the probe splitting (omega_s = 1 by default), `tau` in 1/omega_s,
/// `rate` is the Poisson arrival rate entering zeta = rate * tau * g.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionParams {
    pub g: f64,
    pub tau: f64,
    pub omega_s: f64,
    pub omega_r: f64,
    pub rate: f64,
}

impl CollisionParams {
    pub fn new(
        g: f64,
        tau: f64,
        omega_s: f64,
        omega_r: f64,
        rate: f64,
    ) -> Result<Self, CollisionError> {
        if !(g >= 0.0) {
            return Err(CollisionError::InvalidParams(format!(
                "g = {g} must be >= 0"
            )));
        }
        if !(tau > 0.0) {
            return Err(CollisionError::InvalidParams(format!(
                "tau = {tau} must be > 0"
            )));
        }
        if !(rate > 0.0) {
            return Err(CollisionError::InvalidParams(format!(
                "rate = {rate} must be > 0"
            )));
        }
        Ok(Self {
            g,
            tau,
            omega_s,
            omega_r,
            rate,
        })
    }

    /// Resonant defaults with unit arrival rate.
    pub fn resonant(g: f64, tau: f64) -> Result<Self, CollisionError> {
        Self::new(g, tau, 1.0, 1.0, 1.0)
    }

    /// Coarse-graining scale `zeta = rate * tau * g`.
    pub fn zeta(&self) -> f64 {
        self.rate * self.tau * self.g
    }
}

/// Full two-qubit Hamiltonian: free splittings plus the excitation-exchange
/// coupling `g (sigma+ x sigma- + sigma- x sigma+)`.
pub fn interaction_hamiltonian(params: &CollisionParams) -> ComplexMatrix {
    let i2 = ComplexMatrix::identity(2);
    let sz = crate::qmath::pauli_z();
    let free = kron(&sz, &i2)
        .unwrap()
        .scale(C64::new(0.5 * params.omega_s, 0.0))
        .add(
            &kron(&i2, &sz)
                .unwrap()
                .scale(C64::new(0.5 * params.omega_r, 0.0)),
        );
    let exch = kron(&sigma_plus(), &sigma_minus())
        .unwrap()
        .add(&kron(&sigma_minus(), &sigma_plus()).unwrap())
        .scale(C64::new(params.g, 0.0));
    free.add(&exch)
}

/// Collision-step propagator `exp(-i H_int tau)` built from the exchange part
/// alone (interaction picture). On resonance the exchange term commutes with
/// the free Hamiltonian, so populations and mutual information agree with the
/// lab-frame picture; working interaction-side keeps the stroboscopic map's
/// fixed point stationary instead of precessing with the injection phase.
pub fn collision_propagator(params: &CollisionParams) -> ComplexMatrix {
    let exch = kron(&sigma_plus(), &sigma_minus())
        .unwrap()
        .add(&kron(&sigma_minus(), &sigma_plus()).unwrap())
        .scale(C64::new(params.g, 0.0));
    crate::qmath::expm_hermitian_generator(&exch, C64::new(0.0, -params.tau))
        .expect("exchange Hamiltonian is Hermitian")
}

fn collide_with(
    u: &ComplexMatrix,
    rho_s: &DensityMatrix,
    rho_unit: &DensityMatrix,
) -> Result<(DensityMatrix, f64), CollisionError> {
    let joint = kron(rho_s.mat(), rho_unit.mat())?;
    let evolved = u.mul(&joint).mul(&u.adjoint());
    // the subnormalized ancilla shrinks the joint trace by Tr(rho_unit);
    // divide it out so the collision map stays trace-preserving on the probe
    let tr = evolved.trace().re;
    let evolved = evolved.scale(C64::new(rho_s.trace() / tr, 0.0));
    let joint_dm = DensityMatrix::with_tolerance(evolved, rho_s.trace_tolerance())?;
    let probe = partial_trace(&joint_dm, Subsystem::Probe)?;
    let ancilla = partial_trace(&joint_dm, Subsystem::Ancilla)?;
    let mi = von_neumann_entropy(&probe) + von_neumann_entropy(&ancilla)
        - von_neumann_entropy(&joint_dm);
    Ok((probe, mi.max(0.0)))
}

/// One collision: evolve the joint probe-ancilla state, trace out the
/// ancilla, and report the mutual information of the post-collision marginals
/// in bits.
pub fn collide(
    rho_s: &DensityMatrix,
    rho_unit: &DensityMatrix,
    params: &CollisionParams,
) -> Result<(DensityMatrix, f64), CollisionError> {
    collide_with(&collision_propagator(params), rho_s, rho_unit)
}

/// Per-step record of a repeated-interaction run.
#[derive(Debug, Clone)]
pub struct CollisionTrace {
    pub probe_states: Vec<DensityMatrix>,
    pub mutual_info: Vec<f64>,
    pub converged: bool,
    pub steps_to_converge: usize,
}

/// Repeats collisions with freshly prepared identical ancillas until the
/// probe state settles (successive trace distance below `conv_tol`) or
/// `max_steps` is exhausted.
pub fn run_collisions(
    rho_s0: &DensityMatrix,
    unit: &ReservoirUnitSpec,
    params: &CollisionParams,
    max_steps: usize,
    conv_tol: f64,
) -> Result<CollisionTrace, CollisionError> {
    assert!(max_steps >= 1);
    assert!(conv_tol > 0.0);
    let rho_unit = prepare_unit(unit, false)?;
    let u = collision_propagator(params);

    let mut probe_states = Vec::with_capacity(max_steps.min(1 << 16));
    let mut mutual_info = Vec::with_capacity(max_steps.min(1 << 16));
    let mut current = rho_s0.clone();
    let mut converged = false;
    let mut steps_to_converge = 0;

    for step in 1..=max_steps {
        let (next, mi) = collide_with(&u, &current, &rho_unit)?;
        let delta = next.trace_distance(&current);
        current = next;
        probe_states.push(current.clone());
        mutual_info.push(mi);
        if delta < conv_tol {
            converged = true;
            steps_to_converge = step;
            break;
        }
    }
    Ok(CollisionTrace {
        probe_states,
        mutual_info,
        converged,
        steps_to_converge,
    })
}

/// Final probe state of `run_collisions`; errors out if no steady state was
/// reached.
pub fn steady_state_numeric(
    unit: &ReservoirUnitSpec,
    params: &CollisionParams,
    max_steps: usize,
    conv_tol: f64,
) -> Result<DensityMatrix, CollisionError> {
    let start = DensityMatrix::plus_state();
    let trace = run_collisions(&start, unit, params, max_steps, conv_tol)?;
    if !trace.converged {
        let last_delta = match &trace.probe_states[..] {
            [.., a, b] => b.trace_distance(a),
            _ => f64::NAN,
        };
        return Err(CollisionError::NotConverged {
            steps: max_steps,
            last_delta,
        });
    }
    Ok(trace
        .probe_states
        .last()
        .expect("at least one step ran")
        .clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const T1: f64 = 150e-6;
    const T2: f64 = 100e-6;
    const T_EXPOSURE: f64 = 480e-9;

    fn paper_params() -> CollisionParams {
        CollisionParams::resonant(0.1, 0.12).unwrap()
    }

    fn paper_unit(phi: f64) -> ReservoirUnitSpec {
        ReservoirUnitSpec::new(phi, T_EXPOSURE, T1, T2).unwrap()
    }

    #[test]
    fn hamiltonian_free_part() {
        let params = CollisionParams::new(0.0, 0.12, 1.0, 1.0, 1.0).unwrap();
        let h = interaction_hamiltonian(&params);
        for (k, want) in [1.0, 0.0, 0.0, -1.0].iter().enumerate() {
            assert_abs_diff_eq!(h[(k, k)].re, want, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(h.max_abs_diff(&h.adjoint()), 0.0, epsilon = 0.0);
    }

    #[test]
    fn hamiltonian_exchange_block() {
        let h = interaction_hamiltonian(&paper_params());
        assert_abs_diff_eq!(h[(1, 2)].re, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(h[(2, 1)].re, 0.1, epsilon = 1e-15);
        // every other off-diagonal vanishes
        for i in 0..4 {
            for j in 0..4 {
                if i != j && !((i == 1 && j == 2) || (i == 2 && j == 1)) {
                    assert_abs_diff_eq!(h[(i, j)].norm(), 0.0, epsilon = 0.0);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_conserves_excitation_number() {
        let h = interaction_hamiltonian(&paper_params());
        let i2 = ComplexMatrix::identity(2);
        let sz = crate::qmath::pauli_z();
        let number = kron(&sz, &i2).unwrap().add(&kron(&i2, &sz).unwrap());
        assert!(h.commutator(&number).max_abs() <= 1e-14);
    }

    #[test]
    fn collide_without_coupling_is_identity() {
        let params = CollisionParams::new(0.0, 0.12, 1.0, 1.0, 1.0).unwrap();
        let rho_s = DensityMatrix::plus_state();
        let unit = prepare_unit(&paper_unit(PI / 2.0), false).unwrap();
        let (out, mi) = collide(&rho_s, &unit, &params).unwrap();
        assert!(out.mat().max_abs_diff(rho_s.mat()) <= 1e-13);
        assert_abs_diff_eq!(mi, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn collide_full_swap() {
        // g*tau = pi/2 rotates the {|01>,|10>} block by a half turn
        let params = CollisionParams::new(PI / 2.0 / 0.12, 0.12, 1.0, 1.0, 1.0).unwrap();
        let rho_s = DensityMatrix::basis_state(0);
        let unit = DensityMatrix::basis_state(1);
        let (out, _) = collide(&rho_s, &unit, &params).unwrap();
        assert!(out.mat().max_abs_diff(DensityMatrix::basis_state(1).mat()) <= 1e-12);
    }

    #[test]
    fn collide_partial_swap_block_rotation() {
        // populations in the exchange block rotate by angle g*tau
        let params = paper_params();
        let angle = params.g * params.tau;
        let rho_s = DensityMatrix::basis_state(0);
        let unit = DensityMatrix::basis_state(1);
        let (out, _) = collide(&rho_s, &unit, &params).unwrap();
        assert_abs_diff_eq!(out.mat()[(1, 1)].re, angle.sin().powi(2), epsilon = 1e-13);
        assert_abs_diff_eq!(out.mat()[(0, 0)].re, angle.cos().powi(2), epsilon = 1e-13);
    }

    #[test]
    fn collide_trace_preserving_with_subnormalized_ancilla() {
        let rho_s = DensityMatrix::plus_state();
        let unit = prepare_unit(&paper_unit(1.0), false).unwrap();
        let (out, mi) = collide(&rho_s, &unit, &paper_params()).unwrap();
        assert_abs_diff_eq!(out.trace(), rho_s.trace(), epsilon = 1e-12);
        assert!(mi > 0.0, "information must flow, got {mi}");
    }

    #[test]
    fn collide_golden_mutual_info() {
        let rho_s = DensityMatrix::plus_state();
        let unit = prepare_unit(&paper_unit(PI / 2.0), false).unwrap();
        let (_, mi) = collide(&rho_s, &unit, &paper_params()).unwrap();
        assert_abs_diff_eq!(mi, 2.989296264518243e-6, epsilon = 1e-12);
    }

    #[test]
    fn run_single_step_matches_collide() {
        let rho_s = DensityMatrix::plus_state();
        let unit = paper_unit(PI / 2.0);
        let trace = run_collisions(&rho_s, &unit, &paper_params(), 1, 1e-15).unwrap();
        assert_eq!(trace.probe_states.len(), 1);
        let rho_unit = prepare_unit(&unit, false).unwrap();
        let (single, mi) = collide(&rho_s, &rho_unit, &paper_params()).unwrap();
        assert!(trace.probe_states[0].mat().max_abs_diff(single.mat()) <= 1e-15);
        assert_abs_diff_eq!(trace.mutual_info[0], mi, epsilon = 1e-15);
    }

    #[test]
    fn run_without_coupling_flatlines() {
        let params = CollisionParams::new(0.0, 0.12, 1.0, 1.0, 1.0).unwrap();
        let trace = run_collisions(
            &DensityMatrix::plus_state(),
            &paper_unit(PI / 2.0),
            &params,
            50,
            1e-8,
        )
        .unwrap();
        assert!(trace.converged);
        assert!(trace.mutual_info.iter().all(|&m| m.abs() <= 1e-10));
    }

    #[test]
    fn steady_mi_ordering() {
        // plateau = first settling of the per-step mutual information
        // (|delta MI| < 1e-9): largest at pi/2, smallest at pi
        let params = paper_params();
        let plateau = |phi: f64| {
            let trace = run_collisions(
                &DensityMatrix::plus_state(),
                &paper_unit(phi),
                &params,
                40_000,
                1e-15,
            )
            .unwrap();
            trace
                .mutual_info
                .windows(2)
                .find(|w| (w[1] - w[0]).abs() < 1e-9)
                .map(|w| w[1])
                .expect("mutual information plateau not reached")
        };
        let half = plateau(PI / 2.0);
        let quarter = plateau(PI / 4.0);
        let full = plateau(PI);
        assert!(half > quarter && quarter > full, "{half} {quarter} {full}");
    }

    #[test]
    fn steady_state_pure_ancilla_homogenization() {
        let params = paper_params();
        // contraction is ~ (g tau)^2 per collision, so the approach to the
        // fixed point is slow: budget a few e-folds worth of steps
        let zero_spec = ReservoirUnitSpec::new(0.0, 0.0, T1, T2).unwrap();
        let ss = steady_state_numeric(&zero_spec, &params, 400_000, 1e-13).unwrap();
        assert!(ss.mat().max_abs_diff(DensityMatrix::basis_state(0).mat()) <= 1e-8);

        let pi_spec = ReservoirUnitSpec::new(PI, 0.0, T1, T2).unwrap();
        let ss = steady_state_numeric(&pi_spec, &params, 400_000, 1e-13).unwrap();
        assert!(ss.mat().max_abs_diff(DensityMatrix::basis_state(1).mat()) <= 1e-8);
    }

    #[test]
    fn monotone_approach_after_transient() {
        let params = paper_params();
        let trace = run_collisions(
            &DensityMatrix::plus_state(),
            &paper_unit(1.0),
            &params,
            400_000,
            1e-10,
        )
        .unwrap();
        assert!(trace.converged);
        let ss = trace.probe_states.last().unwrap();
        let skip = trace.probe_states.len() / 10;
        let mut prev = f64::INFINITY;
        for state in trace.probe_states.iter().skip(skip) {
            let d = state.trace_distance(ss);
            assert!(d <= prev + 1e-10, "distance grew: {prev} -> {d}");
            prev = d;
        }
    }

    #[test]
    fn mutual_info_stays_in_bounds() {
        let params = paper_params();
        for &phi in &[0.5, PI / 2.0, 2.5, PI] {
            let trace = run_collisions(
                &DensityMatrix::plus_state(),
                &paper_unit(phi),
                &params,
                300,
                1e-15,
            )
            .unwrap();
            assert!(trace.mutual_info.iter().all(|&m| (0.0..=2.0).contains(&m)));
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let err = steady_state_numeric(&paper_unit(1.0), &paper_params(), 5, 1e-12).unwrap_err();
        assert!(matches!(err, CollisionError::NotConverged { steps: 5, .. }));
    }

    #[test]
    fn params_validation() {
        assert!(CollisionParams::new(-0.1, 0.12, 1.0, 1.0, 1.0).is_err());
        assert!(CollisionParams::new(0.1, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(CollisionParams::new(0.1, 0.12, 1.0, 1.0, 0.0).is_err());
        assert_abs_diff_eq!(paper_params().zeta(), 0.012, epsilon = 1e-15);
    }
}
