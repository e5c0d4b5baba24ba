//! Stochastic-gradient estimation of the receive filter `w`, the IC
//! parameter vector `λ` and the channel `ĥ`, and the receivers built on it.
//!
//! For one user and stage the two instantaneous costs are
//!
//! ```text
//! J1(w)    = |b − wᴴ r_k|²
//! J2(λ, ĥ) = ‖F ĥ − r + D λ‖²
//! ```
//!
//! with `r_k = r − D λ`. Their gradients give the updates
//! `w += μ_w e* r_k`, `λ −= μ_λ Dᴴ e` and `ĥ −= μ_h Fᴴ e`, where `e` is
//! the scalar error `b − wᴴ r_k` and `e` (bold) the vector error
//! `F ĥ − r + D λ`.

mod receiver;

pub use receiver::{PacketReceiver, ReceiverKind, ReceiverOptions, StageSnapshot};

use crate::error::{check_dim, Error, Result};
use crate::ic::{IcParameterVector, ReconstructionMatrix, UserRegenMatrix};
use crate::{CVector, Complex64};

/// Hard QPSK decision. `sgn(0)` is taken as `+1` on both axes.
pub fn detect(x: Complex64) -> Complex64 {
    let sgn = |v: f64| if v < 0.0 { -1.0 } else { 1.0 };
    Complex64::new(sgn(x.re), sgn(x.im))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub mu_w: f64,
    pub mu_lambda: f64,
    pub mu_h: f64,
}

impl StepSizes {
    pub fn new(mu_w: f64, mu_lambda: f64, mu_h: f64) -> Result<Self> {
        for (name, mu) in [("mu_w", mu_w), ("mu_lambda", mu_lambda), ("mu_h", mu_h)] {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {mu}")));
            }
        }
        Ok(Self {
            mu_w,
            mu_lambda,
            mu_h,
        })
    }

    /// All steps zero: estimators stay at their initial values.
    pub fn frozen() -> Self {
        Self {
            mu_w: 0.0,
            mu_lambda: 0.0,
            mu_h: 0.0,
        }
    }
}

/// Adaptive parameters of one user at one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub w: CVector,
    pub lambda: IcParameterVector,
    pub h_hat: CVector,
    pub stage: usize,
}

impl EstimatorState {
    pub fn new(w: CVector, lambda: IcParameterVector, h_hat: CVector, stage: usize) -> Self {
        Self {
            w,
            lambda,
            h_hat,
            stage,
        }
    }

    /// Applies the three updates from errors computed beforehand, so every
    /// update sees the same pre-update parameters.
    pub fn sg_step(
        &mut self,
        errors: &ErrorSignals,
        r_cancelled: &CVector,
        f: &UserRegenMatrix,
        d: &ReconstructionMatrix,
        steps: &StepSizes,
    ) {
        update_w(&mut self.w, errors.e_scalar, r_cancelled, steps.mu_w);
        update_lambda(&mut self.lambda, d, &errors.e_vector, steps.mu_lambda);
        update_h(&mut self.h_hat, f, &errors.e_vector, steps.mu_h);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSignals {
    /// `b − wᴴ r_k`.
    pub e_scalar: Complex64,
    /// `F ĥ − r + D λ`.
    pub e_vector: CVector,
}

pub fn compute_errors(
    state: &EstimatorState,
    r: &CVector,
    r_cancelled: &CVector,
    f: &UserRegenMatrix,
    d: &ReconstructionMatrix,
    b_ref: Complex64,
) -> Result<ErrorSignals> {
    check_dim("filter length", r.len(), state.w.len())?;
    check_dim("cancelled observation", r.len(), r_cancelled.len())?;
    check_dim("parameter vector", d.d.ncols(), state.lambda.p())?;
    check_dim("channel estimate", f.f.ncols(), state.h_hat.len())?;
    let e_scalar = b_ref - state.w.dotc(r_cancelled);
    let mut e_vector = &f.f * &state.h_hat - r;
    if state.lambda.p() > 0 {
        e_vector += &d.d * &state.lambda.lambda;
    }
    Ok(ErrorSignals { e_scalar, e_vector })
}

/// `w ← w + μ_w·e*·r_k`.
pub fn update_w(w: &mut CVector, e_scalar: Complex64, r_cancelled: &CVector, mu_w: f64) {
    w.axpy(e_scalar.conj() * mu_w, r_cancelled, Complex64::new(1.0, 0.0));
}

/// `λ ← λ − μ_λ·Dᴴ·e`.
pub fn update_lambda(lambda: &mut IcParameterVector, d: &ReconstructionMatrix, e_vector: &CVector, mu_lambda: f64) {
    if lambda.p() == 0 {
        return;
    }
    let grad = d.d.ad_mul(e_vector);
    lambda.lambda.axpy(Complex64::new(-mu_lambda, 0.0), &grad, Complex64::new(1.0, 0.0));
}

/// `ĥ ← ĥ − μ_h·Fᴴ·e`.
pub fn update_h(h_hat: &mut CVector, f: &UserRegenMatrix, e_vector: &CVector, mu_h: f64) {
    let grad = f.f.ad_mul(e_vector);
    h_hat.axpy(Complex64::new(-mu_h, 0.0), &grad, Complex64::new(1.0, 0.0));
}

/// Gradient of `‖F ĥ − r + D λ‖²` with respect to `λ*`.
pub fn lambda_gradient(d: &ReconstructionMatrix, e_vector: &CVector) -> CVector {
    d.d.ad_mul(e_vector)
}

/// Gradient of `‖F ĥ − r + D λ‖²` with respect to `ĥ*`.
pub fn channel_gradient(f: &UserRegenMatrix, e_vector: &CVector) -> CVector {
    f.f.ad_mul(e_vector)
}
