//! Axis corrections
//! `χ(r,z) = ∫₀ʳ ψ₁,τ(1+K)dτ` and `η(r,z) = ∫₀ʳ (r−τ) g (1+K) dτ`,
//! and the fitted order at which `ψ₁ − ψ₁(0) − χ` and `ψ₁ − ψ₁(0) − η`
//! vanish on the axis.

use serde::{Deserialize, Serialize};

use crate::domain::CutoffK;
use crate::error::{Error, Result};
use crate::field::{Field, Parity};
use crate::norms::{weighted_terms, Region, WeightedNormSpec};
use crate::stencil::Accuracy;

/// Slope of the least-squares line through `(x, y)`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (mut num, mut den) = (0.0, 0.0);
    for &(x, y) in points {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// `F(r_i) = ∫₀^{r_i} φ dr` for samples `φ_i` at `r_i = (i+½)h`.
///
/// The first half cell integrates the parity-consistent fit through `φ₀, φ₁`
/// (`c₀ + c₂r²` or `c₁r + c₃r³`). Interior intervals use the fourth-order
/// rule `h(−φ_{i−1} + 13φ_i + 13φ_{i+1} − φ_{i+2})/24` with a mirrored ghost
/// at `i = −1`; the last interval uses the one-sided Adams–Moulton weights.
pub fn cumulative_integral(phi: &[f64], h: f64, parity: Parity) -> Vec<f64> {
    let n = phi.len();
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    let (r0, r1) = (0.5 * h, 1.5 * h);
    out[0] = if n == 1 {
        phi[0] * r0
    } else {
        match parity {
            Parity::Even => {
                let c2 = (phi[1] - phi[0]) / (r1 * r1 - r0 * r0);
                let c0 = phi[0] - c2 * r0 * r0;
                c0 * r0 + c2 * r0.powi(3) / 3.0
            }
            Parity::Odd => {
                let det = r0 * r1.powi(3) - r1 * r0.powi(3);
                let c1 = (phi[0] * r1.powi(3) - phi[1] * r0.powi(3)) / det;
                let c3 = (r0 * phi[1] - r1 * phi[0]) / det;
                c1 * r0 * r0 / 2.0 + c3 * r0.powi(4) / 4.0
            }
        }
    };
    let ghost = parity.sign() * phi[0];
    let at = |k: isize| if k < 0 { ghost } else { phi[k as usize] };
    for i in 0..n.saturating_sub(1) {
        let step = if i + 2 < n {
            h * (-at(i as isize - 1) + 13.0 * phi[i] + 13.0 * phi[i + 1] - phi[i + 2]) / 24.0
        } else if n >= 4 {
            h * (phi[n - 4] - 5.0 * phi[n - 3] + 19.0 * phi[n - 2] + 9.0 * phi[n - 1]) / 24.0
        } else {
            0.5 * h * (phi[i] + phi[i + 1])
        };
        out[i + 1] = out[i] + step;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrectionKind {
    Chi,
    Eta,
}

#[derive(Debug, Clone)]
pub struct CorrectionField {
    pub kind: CorrectionKind,
    pub values: Field,
    pub cutoff: CutoffK,
}

fn integrate_lines(integrand: &Field, parity: Parity, twice: bool) -> Result<Field> {
    let g = integrand.grid();
    let mut out = vec![0.0; g.len()];
    for j in 0..g.nz {
        let line = integrand.radial_line(j);
        let mut acc = cumulative_integral(&line, g.hr, parity);
        if twice {
            acc = cumulative_integral(&acc, g.hr, parity.flip());
        }
        for i in 0..g.nr {
            out[g.index(i, j)] = acc[i];
        }
    }
    let result_parity = if twice { parity } else { parity.flip() };
    Field::new(g.clone(), result_parity, out)
}

pub fn build_chi(psi1: &Field, cutoff: &CutoffK) -> Result<CorrectionField> {
    build_chi_with(psi1, cutoff, Accuracy::Fourth)
}

pub fn build_chi_with(psi1: &Field, cutoff: &CutoffK, accuracy: Accuracy) -> Result<CorrectionField> {
    if psi1.parity() != Parity::Even {
        return Err(Error::Precondition("χ expects an even ψ₁".into()));
    }
    let phi = psi1.derivative_with(1, 0, accuracy)?.map_rz(|r, _, v| v * (1.0 + cutoff.value(r)))?;
    let values = integrate_lines(&phi, Parity::Odd, false)?;
    Ok(CorrectionField { kind: CorrectionKind::Chi, values, cutoff: *cutoff })
}

/// How the second radial derivative entering `η` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum EtaForm {
    /// `g = −(3/r ψ₁,r + ψ₁,zz + ω₁)`, the equation solved for `ψ₁,rr`.
    Equation,
    /// `g = ψ₁,rr` differenced directly.
    #[default]
    Curvature,
}

/// `g` for [`build_eta`].
pub fn eta_source(psi1: &Field, omega1: &Field, form: EtaForm, accuracy: Accuracy) -> Result<Field> {
    psi1.check_same_grid(omega1)?;
    match form {
        EtaForm::Curvature => psi1.derivative_with(2, 0, accuracy),
        EtaForm::Equation => {
            let dr = psi1.derivative_with(1, 0, accuracy)?;
            let dzz = psi1.derivative_with(0, 2, accuracy)?;
            let g = psi1.grid();
            let mut out = vec![0.0; g.len()];
            for i in 0..g.nr {
                for j in 0..g.nz {
                    let k = g.index(i, j);
                    out[k] = -(3.0 / g.r[i] * dr.values()[k] + dzz.values()[k] + omega1.values()[k]);
                }
            }
            Field::new(g.clone(), Parity::Even, out)
        }
    }
}

pub fn build_eta(psi1: &Field, omega1: &Field, cutoff: &CutoffK) -> Result<CorrectionField> {
    build_eta_with(psi1, omega1, cutoff, EtaForm::default(), Accuracy::Fourth)
}

pub fn build_eta_with(
    psi1: &Field,
    omega1: &Field,
    cutoff: &CutoffK,
    form: EtaForm,
    accuracy: Accuracy,
) -> Result<CorrectionField> {
    if psi1.parity() != Parity::Even {
        return Err(Error::Precondition("η expects an even ψ₁".into()));
    }
    let g = eta_source(psi1, omega1, form, accuracy)?;
    let integrand = g.map_rz(|r, _, v| v * (1.0 + cutoff.value(r)))?;
    if integrand.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("η integrand near the axis".into()));
    }
    let values = integrate_lines(&integrand, Parity::Even, true)?;
    Ok(CorrectionField { kind: CorrectionKind::Eta, values, cutoff: *cutoff })
}

/// `ψ₁ − ψ₁(0) − correction`.
pub fn corrected_remainder(psi1: &Field, correction: &CorrectionField) -> Result<Field> {
    psi1.sub_trace(&psi1.axis_trace())?.sub(&correction.values)
}

pub const FIT_CELLS: usize = 6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VanishingOrder {
    /// Slope per `z` line; `+∞` for a line that vanishes identically.
    pub per_z: Vec<f64>,
    pub z: Vec<f64>,
    /// Slope of `(∫ |f(r_i, z)|² dz)^{½}` against `r_i`.
    pub aggregate: f64,
    pub window: usize,
}

impl VanishingOrder {
    /// Smallest per-line slope among lines carrying at least `1e−6` of the
    /// largest line amplitude.
    pub fn min_significant(&self) -> f64 {
        self.per_z.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Log–log slope of `|field|` against `r` over the first six cells.
pub fn vanishing_order(field: &Field) -> Result<VanishingOrder> {
    let g = field.grid();
    if g.nr < FIT_CELLS {
        return Err(Error::InsufficientGrid(format!(
            "vanishing order needs {FIT_CELLS} radial cells, grid has {}",
            g.nr
        )));
    }
    let fit = |vals: &[f64]| -> f64 {
        if vals.iter().all(|&v| v == 0.0) {
            return f64::INFINITY;
        }
        let pts: Vec<(f64, f64)> = vals
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (g.r[i].ln(), v.abs().ln()))
            .collect();
        if pts.len() < 2 {
            f64::INFINITY
        } else {
            least_squares_slope(&pts)
        }
    };
    let amplitude: Vec<f64> = (0..g.nz)
        .map(|j| (0..FIT_CELLS).fold(0.0f64, |m, i| m.max(field.at(i, j).abs())))
        .collect();
    let top = amplitude.iter().fold(0.0f64, |a, &b| a.max(b));
    let per_z = (0..g.nz)
        .map(|j| {
            if amplitude[j] <= 1e-6 * top {
                f64::INFINITY
            } else {
                fit(&(0..FIT_CELLS).map(|i| field.at(i, j)).collect::<Vec<_>>())
            }
        })
        .collect();
    let norms: Vec<f64> = (0..FIT_CELLS)
        .map(|i| ((0..g.nz).map(|j| field.at(i, j).powi(2)).sum::<f64>() * g.hz).sqrt())
        .collect();
    Ok(VanishingOrder { per_z, z: g.z.clone(), aggregate: fit(&norms), window: FIT_CELLS })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChainNorm {
    pub chain_lhs: f64,
    pub chain_rhs: f64,
    pub ratio: f64,
    pub vanishing_order: f64,
}

/// `‖u‖²_{L₂(H^k₀)}` against `‖∂ᵣ^{k−1}u‖²_{L₂(H¹₀)}`, radial derivatives only.
///
/// The field must vanish on the axis to order `k − 1`.
pub fn weighted_chain_norm(field: &Field, k: usize) -> Result<ChainNorm> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidParameter(format!("chain order must be 1..=3, got {k}")));
    }
    let order = vanishing_order(field)?.aggregate;
    if order < (k - 1) as f64 - 0.1 {
        return Err(Error::Precondition(format!(
            "field vanishes at order {order:.2} on the axis, the chain needs {}",
            k - 1
        )));
    }
    if field.max_abs() == 0.0 {
        return Ok(ChainNorm { chain_lhs: 0.0, chain_rhs: 0.0, ratio: 0.0, vanishing_order: order });
    }
    let lhs: f64 = weighted_terms(field, WeightedNormSpec::new(k, 0.0)?, &Region::RadialLines, Accuracy::Second)?
        .iter()
        .sum();
    let top = field.derivative(k - 1, 0)?;
    let rhs: f64 = weighted_terms(&top, WeightedNormSpec::new(1, 0.0)?, &Region::RadialLines, Accuracy::Second)?
        .iter()
        .sum();
    let ratio = if rhs == 0.0 { f64::INFINITY } else { lhs / rhs };
    Ok(ChainNorm { chain_lhs: lhs, chain_rhs: rhs, ratio, vanishing_order: order })
}
