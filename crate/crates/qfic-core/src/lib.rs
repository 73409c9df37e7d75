//! Quantum Fisher information of a noisy `H phi H` gate sequence, computed
//! along two independent routes:
//!
//! * a collision-model / micromaser route ([`collision`], [`microme`]) in
//!   which identically prepared noisy ancillas ([`reservoir`]) imprint their
//!   phase on a probe qubit's steady state, with a closed-form QFI;
//! * a device-level route ([`devicesim`]) that realizes the same sequence
//!   with Gaussian-modulated lab-frame pulses under Lindblad noise.
//!
//! [`qmath`] supplies the small dense complex linear algebra and [`fisher`]
//! the Fisher-information estimators shared by both routes.

// `!(x > 0.0)` style validation is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod devicesim;
pub mod fisher;
pub mod microme;
pub mod qmath;
pub mod reservoir;
