//! Inference variances for predicting an A quadrature from a B quadrature.
//!
//! The conditional route averages the variances of `P(x | y_i)` on a grid. The
//! linear route uses the exact residual second moment `<(x - g y - d)²>` of an
//! estimate `x_est = g y + d`; the two quadratures sit on different modes and
//! commute, so the moments are unambiguous.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::error::{Error, Result};
use crate::quadrature::{conditional_profile, joint_distribution, GridSpec, QuadratureGrid};
use crate::states::{GaussianState, State};

/// Partner variance below which regression is refused.
pub const MIN_PARTNER_VARIANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Conditional,
    Linear,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Conditional => "conditional",
            Method::Linear => "linear",
        })
    }
}

/// Measured quadrature angle at A (inferred) and at B (partner).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraturePair {
    pub theta_a: f64,
    pub phi_b: f64,
}

impl QuadraturePair {
    /// Infer `x_A` from `x_B`.
    pub const X: Self = Self {
        theta_a: 0.0,
        phi_b: 0.0,
    };
    /// Infer `p_A` from `p_B`.
    pub const P: Self = Self {
        theta_a: FRAC_PI_2,
        phi_b: FRAC_PI_2,
    };
    /// Infer `p_A` from `-p_B` (the quadrature at angle `-π/2`).
    pub const P_FLIPPED: Self = Self {
        theta_a: FRAC_PI_2,
        phi_b: -FRAC_PI_2,
    };

    pub fn new(theta_a: f64, phi_b: f64) -> Self {
        Self { theta_a, phi_b }
    }
}

/// `x_est = g y + d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearEstimator {
    pub g: f64,
    pub d: f64,
}

impl LinearEstimator {
    pub fn new(g: f64, d: f64) -> Result<Self> {
        if !g.is_finite() || !d.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "estimator must be finite, got g={g}, d={d}"
            )));
        }
        Ok(Self { g, d })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InferenceResult {
    pub variance: f64,
    pub method: Method,
    pub estimator: Option<LinearEstimator>,
    /// Angle of the inferred quadrature at A.
    pub observable: f64,
    /// Angle of the measured quadrature at B.
    pub partner: f64,
}

/// `Σ_i P(y_i) Δ_i²` on explicit grids.
pub fn inference_variance_conditional(
    state: &State,
    pair: QuadraturePair,
    grid_a: &QuadratureGrid,
    grid_b: &QuadratureGrid,
) -> Result<InferenceResult> {
    let joint = joint_distribution(state, pair.theta_a, pair.phi_b, grid_a, grid_b)?;
    let profile = conditional_profile(&joint, true);
    Ok(InferenceResult {
        variance: profile.average_variance(),
        method: Method::Conditional,
        estimator: None,
        observable: pair.theta_a,
        partner: pair.phi_b,
    })
}

/// [`inference_variance_conditional`] on auto-built grids.
pub fn inference_variance_conditional_auto(
    state: &State,
    pair: QuadraturePair,
    spec: &GridSpec,
) -> Result<InferenceResult> {
    let (ga, gb) = spec.grids_for(state, pair.theta_a, pair.phi_b)?;
    inference_variance_conditional(state, pair, &ga, &gb)
}

pub(crate) fn residual_second_moment(
    m: &GaussianState,
    pair: QuadraturePair,
    g: f64,
    d: f64,
) -> f64 {
    let (mean, cov) = m.quadrature_moments(pair.theta_a, pair.phi_b);
    let var = cov[(0, 0)] - 2.0 * g * cov[(0, 1)] + g * g * cov[(1, 1)];
    let bias = mean[0] - g * mean[1] - d;
    (var + bias * bias).max(0.0)
}

pub(crate) fn optimal_offset_from(m: &GaussianState, pair: QuadraturePair, g: f64) -> f64 {
    let (mean, _) = m.quadrature_moments(pair.theta_a, pair.phi_b);
    mean[0] - g * mean[1]
}

pub(crate) fn optimal_gain_from(m: &GaussianState, pair: QuadraturePair) -> Result<f64> {
    let (_, cov) = m.quadrature_moments(pair.theta_a, pair.phi_b);
    if cov[(1, 1)] <= MIN_PARTNER_VARIANCE {
        return Err(Error::DegeneratePartner(cov[(1, 1)]));
    }
    Ok(cov[(0, 1)] / cov[(1, 1)])
}

/// Exact `<(x - (g y + d))²>`.
pub fn inference_variance_linear(
    state: &State,
    pair: QuadraturePair,
    est: LinearEstimator,
) -> InferenceResult {
    let m = state.moments();
    InferenceResult {
        variance: residual_second_moment(&m, pair, est.g, est.d),
        method: Method::Linear,
        estimator: Some(est),
        observable: pair.theta_a,
        partner: pair.phi_b,
    }
}

/// Unbiased offset `d = <x> - g <y>`, the minimizer over `d` at fixed `g`.
pub fn optimal_offset(state: &State, pair: QuadraturePair, g: f64) -> f64 {
    optimal_offset_from(&state.moments(), pair, g)
}

/// `g* = Cov(x, y) / Var(y)`.
pub fn optimal_gain(state: &State, pair: QuadraturePair) -> Result<f64> {
    optimal_gain_from(&state.moments(), pair)
}

/// Linear inference variance at the optimal gain and offset.
pub fn optimal_linear(state: &State, pair: QuadraturePair) -> Result<InferenceResult> {
    let m = state.moments();
    let g = optimal_gain_from(&m, pair)?;
    let d = optimal_offset_from(&m, pair, g);
    Ok(InferenceResult {
        variance: residual_second_moment(&m, pair, g, d),
        method: Method::Linear,
        estimator: Some(LinearEstimator { g, d }),
        observable: pair.theta_a,
        partner: pair.phi_b,
    })
}
