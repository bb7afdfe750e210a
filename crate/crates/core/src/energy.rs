//! Distortion densities of a single Jacobian and their derivatives.
//!
//! Every density shares one evaluation path: the determinant enters only through
//! `χ(det J, ε)`, which is exactly `max(0, det J)` at `ε = 0`. The stiffened form
//! `w = f / (1 - t·f)` is then applied on top when `t > 0`.
//!
//! Non-finite results (inverted elements without regularization, or the stiffening
//! barrier `t·f >= 1`) are reported through `finite = false` / `None` instead of a
//! floating infinity.

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Slack below which `1 - t·f` is treated as the barrier itself.
pub const BARRIER_GUARD: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Density {
    /// `(1 - θ)·f_s + θ·f_v`: shape (conformal) plus volume distortion.
    #[default]
    MixedShapeVolume,
    /// `(1/2d)·Σ(σ_j² + σ_j⁻²)`; ignores θ.
    SymmetricDirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyParams {
    pub theta: f64,
    pub epsilon: f64,
    pub t: f64,
    pub density: Density,
}

impl EnergyParams {
    /// Plain (unregularized, unstiffened) density.
    pub fn new(density: Density, theta: f64) -> Self {
        EnergyParams {
            theta,
            epsilon: 0.0,
            t: 0.0,
            density,
        }
    }

    pub fn mixed(theta: f64) -> Self {
        Self::new(Density::MixedShapeVolume, theta)
    }

    pub fn symmetric_dirichlet() -> Self {
        Self::new(Density::SymmetricDirichlet, 0.0)
    }

    pub fn regularized(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn stiffened(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if !(0.0..1.0).contains(&self.t) {
            return Err(Error::InvalidParameter(format!("t must lie in [0, 1), got {}", self.t)));
        }
        Ok(())
    }
}

/// A density value together with its derivative with respect to the Jacobian entries.
#[derive(Clone, Copy, Debug)]
pub struct DensityValue {
    pub value: f64,
    pub grad: Mat,
    pub finite: bool,
    /// The density before stiffening (`+∞` when not computable).
    pub base: f64,
}

impl DensityValue {
    fn infinite(dim: usize) -> Self {
        DensityValue {
            value: f64::INFINITY,
            grad: Mat::zeros(dim),
            finite: false,
            base: f64::INFINITY,
        }
    }

    pub fn as_option(&self) -> Option<f64> {
        self.finite.then_some(self.value)
    }
}

/// Smooth positive surrogate for `max(0, D)`: `(D + sqrt(ε² + D²)) / 2`.
#[inline]
pub fn chi(d: f64, epsilon: f64) -> f64 {
    chi_with_derivative(d, epsilon).0
}

/// `χ(D, ε)` and `∂χ/∂D`, evaluated without cancellation for negative `D`.
#[inline]
fn chi_with_derivative(d: f64, epsilon: f64) -> (f64, f64) {
    if epsilon == 0.0 {
        return if d > 0.0 { (d, 1.0) } else { (0.0, 0.0) };
    }
    let h = epsilon.hypot(d);
    if d >= 0.0 {
        ((d + h) / 2.0, (1.0 + d / h) / 2.0)
    } else {
        let chi = epsilon * epsilon / (2.0 * (h - d));
        (chi, chi / h)
    }
}

/// `χ^(2/d)`.
#[inline]
fn chi_power(chi: f64, dim: usize) -> f64 {
    if dim == 2 {
        chi
    } else {
        let c = chi.cbrt();
        c * c
    }
}

/// Squared norm of the cofactor matrix and its derivative.
#[inline]
fn cofactor_norm2(j: &Mat, cof: &Mat) -> (f64, Mat) {
    if j.dim() == 2 {
        (cof.norm2(), *j * 2.0)
    } else {
        // ‖cof J‖² = (‖J‖⁴ - ‖JᵀJ‖²) / 2 in 3D
        let jtj = j.transpose() * *j;
        (cof.norm2(), (*j * j.norm2() - *j * jtj) * 2.0)
    }
}

/// Evaluates the density selected by `params` (regularized when `epsilon > 0`,
/// stiffened when `t > 0`) and its gradient.
pub fn evaluate(j: &Mat, params: &EnergyParams) -> DensityValue {
    let dim = j.dim();
    let det = j.det();
    let eps = params.epsilon;
    if eps == 0.0 && det <= 0.0 {
        return DensityValue::infinite(dim);
    }
    let (chi, dchi) = chi_with_derivative(det, eps);
    if !(chi > 0.0) {
        return DensityValue::infinite(dim);
    }
    let cof = j.cofactor();
    let a = j.norm2();
    let d = dim as f64;

    let (f, df) = match params.density {
        Density::MixedShapeVolume => {
            let theta = params.theta;
            let cp = chi_power(chi, dim);
            let fs = a / (d * cp);
            let dfs = *j * (2.0 / (d * cp)) - cof * ((2.0 / d) * fs * dchi / chi);
            let fv = (1.0 + det * det) / (2.0 * chi);
            let dfv = cof * (det / chi - fv * dchi / chi);
            ((1.0 - theta) * fs + theta * fv, dfs * (1.0 - theta) + dfv * theta)
        }
        Density::SymmetricDirichlet => {
            let (b, db) = cofactor_norm2(j, &cof);
            let inv_chi2 = 1.0 / (chi * chi);
            let f = (a + b * inv_chi2) / (2.0 * d);
            let df = (*j * 2.0 + db * inv_chi2 - cof * (2.0 * b * inv_chi2 * dchi / chi)) * (1.0 / (2.0 * d));
            (f, df)
        }
    };
    if !f.is_finite() {
        return DensityValue::infinite(dim);
    }

    if params.t == 0.0 {
        return DensityValue {
            value: f,
            grad: df,
            finite: true,
            base: f,
        };
    }
    let slack = 1.0 - params.t * f;
    if slack < BARRIER_GUARD {
        return DensityValue {
            base: f,
            ..DensityValue::infinite(dim)
        };
    }
    DensityValue {
        value: f / slack,
        grad: df * (1.0 / (slack * slack)),
        finite: true,
        base: f,
    }
}

fn plain(j: &Mat, density: Density, theta: f64) -> Option<f64> {
    evaluate(j, &EnergyParams::new(density, theta)).as_option()
}

/// Conformal distortion `(1/d)·tr(JᵀJ) / det(J)^(2/d)`.
pub fn shape_density(j: &Mat) -> Option<f64> {
    plain(j, Density::MixedShapeVolume, 0.0)
}

/// Volumetric distortion `(det J + 1/det J) / 2`.
pub fn volume_density(j: &Mat) -> Option<f64> {
    plain(j, Density::MixedShapeVolume, 1.0)
}

pub fn mixed_density(j: &Mat, theta: f64) -> Option<f64> {
    plain(j, Density::MixedShapeVolume, theta)
}

pub fn symmetric_dirichlet_density(j: &Mat) -> Option<f64> {
    plain(j, Density::SymmetricDirichlet, 0.0)
}

/// Unstiffened density selected by `density` (θ is ignored for symmetric Dirichlet).
pub fn distortion(j: &Mat, density: Density, theta: f64) -> Option<f64> {
    plain(j, density, theta)
}

/// Mixed density with `max(0, det J)` replaced by `χ(det J, ε)`; finite for every `J`
/// when `ε > 0`.
pub fn regularized_density(j: &Mat, theta: f64, epsilon: f64) -> f64 {
    evaluate(j, &EnergyParams::mixed(theta).regularized(epsilon)).value
}

/// `f / (1 - t·f)` for the mixed density; `None` past the barrier `f >= 1/t`.
pub fn stiffened_density(j: &Mat, theta: f64, t: f64) -> Option<f64> {
    evaluate(j, &EnergyParams::mixed(theta).stiffened(t)).as_option()
}

/// Gradient of the density selected by `params` with respect to `J`.
pub fn density_gradient(j: &Mat, params: &EnergyParams) -> Option<Mat> {
    let v = evaluate(j, params);
    v.finite.then_some(v.grad)
}
