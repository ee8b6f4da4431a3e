//! Weighted Hardy inequality `∫ x^{α−2} f² dx ≤ 4/(1−α)² ∫ x^α f′² dx`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_X_FLOOR: f64 = -345.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyCheck {
    pub alpha: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Quadrature in `t` with `x = x_max·e^{−t}`, `t ∈ [0, t_max]`.
#[derive(Debug, Clone, Copy)]
pub struct HardyQuadrature {
    pub x_max: f64,
    pub t_max: f64,
    pub n: usize,
}

impl Default for HardyQuadrature {
    fn default() -> Self {
        Self { x_max: 1.0, t_max: 2000.0, n: 200_000 }
    }
}

/// Evaluate both sides for `f` with `f(0) = 0` and derivative `df`.
///
/// The exponential substitution resolves the endpoint behaviour of slowly
/// vanishing profiles such as `x^β`, `β → ½⁺`.
pub fn hardy_check(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    alpha: f64,
    quad: HardyQuadrature,
) -> Result<HardyCheck> {
    if !(alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("Hardy exponent needs α < 1, got {alpha}")));
    }
    if quad.n == 0 || !(quad.x_max > 0.0) || !(quad.t_max > 0.0) {
        return Err(Error::InvalidParameter("empty Hardy quadrature".into()));
    }
    let dt = quad.t_max / quad.n as f64;
    let (mut lhs, mut grad) = (0.0, 0.0);
    let ln_max = quad.x_max.ln();
    for k in 0..quad.n {
        let ln_x = ln_max - (k as f64 + 0.5) * dt;
        // Below 1e−150 the weights would overflow before the profile underflows.
        if ln_x < LN_X_FLOOR {
            break;
        }
        let x = ln_x.exp();
        let a = (0.5 * (alpha - 1.0) * ln_x).exp() * f(x);
        let b = (0.5 * (alpha + 1.0) * ln_x).exp() * df(x);
        lhs += a * a;
        grad += b * b;
    }
    lhs *= dt;
    let rhs = 4.0 / (1.0 - alpha).powi(2) * grad * dt;
    if !lhs.is_finite() || !rhs.is_finite() {
        return Err(Error::NonFinite("Hardy integrand".into()));
    }
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(HardyCheck { alpha, lhs, rhs, ratio })
}

/// Closed-form ratio for `f = x^β` on `(0, 1)`: `(1−α)²/(4β²)`, `2β > 1 − α`.
pub fn power_ratio(alpha: f64, beta: f64) -> f64 {
    (1.0 - alpha).powi(2) / (4.0 * beta * beta)
}
