//! Fisher information toolbox: classical Fisher, qubit-matrix QFI,
//! Bloch-form QFI, spectral-form QFI, the Cramer-Rao bound and centered
//! finite-difference differentiation of matrix-valued maps.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::qmath::{bloch_from_rho, spectral_decompose, BlochVector, ComplexMatrix, DensityMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum FisherError {
    #[error("probability and derivative lists have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid probability distribution: {0}")]
    BadDistribution(String),
    #[error("divergent classical Fisher term: p ~ 0 with dp = {0:.3e}")]
    Divergent(f64),
    #[error("singular pure-state limit: |r| ~ 1 with r.dr = {0:.3e}")]
    SingularLimit(f64),
    #[error("finite-difference step {0} outside (0, 1e-2)")]
    BadDelta(f64),
}

/// Which QFI/Fisher expression produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherMethod {
    Matrix,
    Bloch,
    Spectral,
    Classical,
}

/// Numerical caveat attached to a Fisher value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherFlag {
    /// Near-singular state routed through the Bloch pure-state limit.
    PureStateLimit,
    /// A degenerate eigenvalue pair's quantum term was dropped.
    Degeneracy,
}

/// Non-negative Fisher value in 1/rad^2 together with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherResult {
    pub value: f64,
    pub method: FisherMethod,
    pub flag: Option<FisherFlag>,
}

impl FisherResult {
    fn checked(value: f64, method: FisherMethod, flag: Option<FisherFlag>) -> Self {
        // round-off guard: tiny negative values are clamped, not propagated
        let value = if value < 0.0 && value > -1e-12 {
            0.0
        } else {
            value
        };
        assert!(
            value >= 0.0 && value.is_finite(),
            "Fisher value {value} out of range"
        );
        Self {
            value,
            method,
            flag,
        }
    }
}

/// Finite-difference step specification (centered scheme only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffSpec {
    pub delta: f64,
}

impl DiffSpec {
    pub fn new(delta: f64) -> Result<Self, FisherError> {
        if !(delta > 0.0 && delta < 1e-2) {
            return Err(FisherError::BadDelta(delta));
        }
        Ok(Self { delta })
    }
}

impl Default for DiffSpec {
    fn default() -> Self {
        Self { delta: 1e-4 }
    }
}

/// Classical Fisher information `sum (dp_i)^2 / p_i`.
///
/// Terms with both `p_i` and `|dp_i|` below 1e-14 are skipped; a vanishing
/// probability with a non-vanishing derivative is reported as divergent.
pub fn classical_fisher(p: &[f64], dp: &[f64]) -> Result<FisherResult, FisherError> {
    if p.len() != dp.len() {
        return Err(FisherError::LengthMismatch(p.len(), dp.len()));
    }
    if p.iter().any(|&x| x < -1e-12) {
        return Err(FisherError::BadDistribution("negative probability".into()));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(FisherError::BadDistribution(format!(
            "probabilities sum to {total}"
        )));
    }
    let mut value = 0.0;
    for (&pi, &dpi) in p.iter().zip(dp) {
        if pi.abs() < 1e-14 {
            if dpi.abs() < 1e-14 {
                continue;
            }
            return Err(FisherError::Divergent(dpi));
        }
        value += dpi * dpi / pi;
    }
    Ok(FisherResult::checked(value, FisherMethod::Classical, None))
}

fn det2(m: &ComplexMatrix) -> f64 {
    (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re
}

/// Bloch components of a Hermitian derivative matrix, `dr_k = Tr(drho sigma_k)`.
pub fn bloch_of_derivative(drho: &ComplexMatrix) -> BlochVector {
    BlochVector::new(
        2.0 * drho[(0, 1)].re,
        -2.0 * drho[(0, 1)].im,
        drho[(0, 0)].re - drho[(1, 1)].re,
    )
}

/// Qubit QFI from the state and its derivative:
/// `Tr[(drho)^2] + Tr[(rho drho)^2]/det(rho)`.
///
/// Near-singular states (det <= 1e-12) are routed through the Bloch
/// pure-state limit `|dr|^2` and flagged.
pub fn qfi_qubit_matrix(
    rho: &DensityMatrix,
    drho: &ComplexMatrix,
) -> Result<FisherResult, FisherError> {
    let det = det2(rho.mat());
    if det <= 1e-12 {
        let r = bloch_from_rho(rho);
        let dr = bloch_of_derivative(drho);
        let rdr = r.dot(&dr);
        if rdr.abs() > 1e-9 {
            return Err(FisherError::SingularLimit(rdr));
        }
        return Ok(FisherResult::checked(
            dr.norm_sqr(),
            FisherMethod::Matrix,
            Some(FisherFlag::PureStateLimit),
        ));
    }
    let d2 = drho.mul(drho).trace().re;
    let rd = rho.mat().mul(drho);
    let cross = rd.mul(&rd).trace().re;
    Ok(FisherResult::checked(
        d2 + cross / det,
        FisherMethod::Matrix,
        None,
    ))
}

/// Bloch-form QFI `|dr|^2 + (r.dr)^2/(1 - |r|^2)` with the pure-state limit
/// `|dr|^2` when `|r| -> 1` along the sphere.
pub fn qfi_bloch(r: &BlochVector, dr: &BlochVector) -> Result<FisherResult, FisherError> {
    let r2 = r.norm_sqr();
    let rdr = r.dot(dr);
    if r.norm() >= 1.0 - 1e-9 {
        if rdr.abs() > 1e-9 {
            return Err(FisherError::SingularLimit(rdr));
        }
        return Ok(FisherResult::checked(
            dr.norm_sqr(),
            FisherMethod::Bloch,
            Some(FisherFlag::PureStateLimit),
        ));
    }
    let value = dr.norm_sqr() + rdr * rdr / (1.0 - r2);
    Ok(FisherResult::checked(value, FisherMethod::Bloch, None))
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Phase-aligns `v` so its overlap with `reference` is real and positive.
fn phase_align(reference: &[C64], v: &[C64]) -> Vec<C64> {
    let ov = inner(reference, v);
    if ov.norm() < 1e-12 {
        return v.to_vec();
    }
    let phase = ov.conj() / ov.norm();
    v.iter().map(|x| x * phase).collect()
}

/// Pairs each central eigenvector with the offset eigenpair of largest
/// overlap. Sorting by eigenvalue alone mislabels branches across level
/// crossings, which would zero out the eigenvalue derivatives there.
fn match_branches(
    center: &crate::qmath::SpectralDecomp,
    offset: &crate::qmath::SpectralDecomp,
) -> Vec<usize> {
    let n = center.eigenvalues.len();
    let mut taken = vec![false; n];
    let mut map = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = usize::MAX;
        let mut best_ov = -1.0;
        #[allow(clippy::needless_range_loop)]
        for j in 0..n {
            if taken[j] {
                continue;
            }
            let ov = inner(&center.eigenvectors[i], &offset.eigenvectors[j]).norm();
            if ov > best_ov {
                best_ov = ov;
                best = j;
            }
        }
        taken[best] = true;
        map.push(best);
    }
    map
}

/// Spectral-form QFI from three states at `phi - delta`, `phi`, `phi + delta`:
/// `sum (dp_i)^2/p_i + sum_{i!=j} 2 (p_i - p_j)^2/(p_i + p_j) |<psi_i|dpsi_j>|^2`.
///
/// Eigenvectors at the offset points are phase-aligned to the central ones
/// before differencing; terms of nearly degenerate pairs are dropped and flagged.
pub fn qfi_spectral(
    rho_minus: &DensityMatrix,
    rho0: &DensityMatrix,
    rho_plus: &DensityMatrix,
    delta: f64,
) -> Result<FisherResult, FisherError> {
    if !(delta > 0.0 && delta < 1e-2) {
        return Err(FisherError::BadDelta(delta));
    }
    let dm = spectral_decompose(rho_minus);
    let d0 = spectral_decompose(rho0);
    let dp = spectral_decompose(rho_plus);
    let n = d0.eigenvalues.len();
    let two_delta = 2.0 * delta;
    let map_p = match_branches(&d0, &dp);
    let map_m = match_branches(&d0, &dm);

    let mut value = 0.0;
    let mut flag = None;

    // classical term over the eigenvalue populations
    for i in 0..n {
        let pi = d0.eigenvalues[i];
        let dpi = (dp.eigenvalues[map_p[i]] - dm.eigenvalues[map_m[i]]) / two_delta;
        if pi.abs() < 1e-14 {
            continue;
        }
        value += dpi * dpi / pi;
    }

    // eigenvector derivatives with gauge fixing against the central basis
    let dpsi: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let vp = phase_align(&d0.eigenvectors[j], &dp.eigenvectors[map_p[j]]);
            let vm = phase_align(&d0.eigenvectors[j], &dm.eigenvectors[map_m[j]]);
            vp.iter()
                .zip(&vm)
                .map(|(a, b)| (a - b) / C64::new(two_delta, 0.0))
                .collect()
        })
        .collect();

    for i in 0..n {
        #[allow(clippy::needless_range_loop)]
        for j in 0..n {
            if i == j {
                continue;
            }
            let (pi, pj) = (d0.eigenvalues[i], d0.eigenvalues[j]);
            if (pi - pj).abs() < 1e-8 {
                flag = Some(FisherFlag::Degeneracy);
                continue;
            }
            if pi + pj < 1e-14 {
                continue;
            }
            let ov = inner(&d0.eigenvectors[i], &dpsi[j]);
            value += 2.0 * (pi - pj).powi(2) / (pi + pj) * ov.norm_sqr();
        }
    }
    Ok(FisherResult::checked(value, FisherMethod::Spectral, flag))
}

/// Cramer-Rao variance lower bound `1/(M F)` in rad^2; infinite when F = 0.
pub fn cramer_rao_bound(f: &FisherResult, repetitions: u64) -> f64 {
    assert!(repetitions >= 1);
    if f.value == 0.0 {
        return f64::INFINITY;
    }
    1.0 / (repetitions as f64 * f.value)
}

/// Centered finite difference of a matrix-valued map of phi,
/// `(f(phi+d) - f(phi-d))/(2d)`, Hermitian-symmetrized.
pub fn centered_diff<F>(f: F, phi: f64, spec: &DiffSpec) -> ComplexMatrix
where
    F: Fn(f64) -> DensityMatrix,
{
    let d = spec.delta;
    let plus = f(phi + d);
    let minus = f(phi - d);
    plus.mat()
        .sub(minus.mat())
        .scale(C64::new(1.0 / (2.0 * d), 0.0))
        .hermitized()
}
