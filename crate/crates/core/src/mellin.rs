//! The radial model problem `−r∂_r(r∂_r u) − 2r∂_r u = g` in the variable
//! `τ = −ln r`, where it reads `−u,ττ + 2u,τ = g′(τ)`.
//!
//! With `û(λ) = (2π)^{−½}∫e^{−iλτ}u dτ` the solution on the line
//! `Im λ = h` is `û = R(λ)ĝ′`, `R(λ) = 1/(λ(λ+2i))`. Restricted to that line
//! the transform is an ordinary Fourier transform of `e^{hτ}u`, so the solve is
//! FFT, multiply by `R(σ+ih)`, inverse FFT, untilt.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::corrections::least_squares_slope;
use crate::error::{Error, Result};
use crate::stencil::{Accuracy, LeftEnd, LineOperator};

pub const POLE_GUARD: f64 = 0.05;

/// Relative size the tilted data may keep at the ends of the `τ` window.
const EDGE_TOLERANCE: f64 = 1e-13;

/// Uniform periodic `τ` samples `lo + j·dτ`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for TauGrid {
    fn default() -> Self {
        Self { lo: -80.0, hi: 80.0, n: 1 << 14 }
    }
}

impl TauGrid {
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let d = self.step();
        (0..self.n).map(|j| self.lo + j as f64 * d).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n < 16 || !(self.hi > self.lo) {
            return Err(Error::InvalidParameter(format!("degenerate τ grid {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MellinProblem {
    pub grid: TauGrid,
    pub tau: Vec<f64>,
    pub gprime: Vec<f64>,
}

impl MellinProblem {
    pub fn from_samples(grid: TauGrid, gprime: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if gprime.len() != grid.n {
            return Err(Error::InvalidParameter(format!(
                "{} samples for a {}-point τ grid",
                gprime.len(),
                grid.n
            )));
        }
        if gprime.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model data".into()));
        }
        Ok(Self { tau: grid.nodes(), grid, gprime })
    }

    pub fn from_fn(grid: TauGrid, gprime: impl Fn(f64) -> f64) -> Result<Self> {
        grid.validate()?;
        let g = grid.nodes().into_iter().map(gprime).collect();
        Self::from_samples(grid, g)
    }

    pub fn is_zero(&self) -> bool {
        self.gprime.iter().all(|&v| v == 0.0)
    }

    /// First and last `τ` where `|g′|` exceeds `1e−12·max|g′|`.
    pub fn data_window(&self) -> Option<(f64, f64)> {
        let m = self.gprime.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if m == 0.0 {
            return None;
        }
        let lo = self.gprime.iter().position(|v| v.abs() > 1e-12 * m)?;
        let hi = self.gprime.iter().rposition(|v| v.abs() > 1e-12 * m)?;
        Some((self.tau[lo], self.tau[hi]))
    }

    /// `(2π)^{−½} ∫ g′ dτ`, the transform at `λ = 0`.
    pub fn transform_at_zero(&self) -> f64 {
        self.gprime.iter().sum::<f64>() * self.grid.step() / (2.0 * std::f64::consts::PI).sqrt()
    }
}

/// Sample `g′(τ) = e^{−2τ}F(e^{−τ})` for a radial profile `F = f + u,zz`.
///
/// The window must leave a margin of 4 in `τ` on both sides of the data.
pub fn to_log_problem(profile: impl Fn(f64) -> f64, grid: TauGrid) -> Result<MellinProblem> {
    let p = MellinProblem::from_fn(grid, |t| (-2.0 * t).exp() * profile((-t).exp()))?;
    if let Some((lo, hi)) = p.data_window() {
        if lo < grid.lo + 4.0 || hi > grid.hi - 4.0 {
            return Err(Error::InsufficientGrid(format!(
                "data occupies τ ∈ [{lo:.2}, {hi:.2}], window [{}, {}] lacks the margin 4",
                grid.lo, grid.hi
            )));
        }
    }
    Ok(p)
}

pub fn resolvent(lambda: Complex64) -> Result<Complex64> {
    let shifted = lambda + Complex64::new(0.0, 2.0);
    if lambda.norm() < 1e-14 || shifted.norm() < 1e-14 {
        return Err(Error::ResolventPole { re: lambda.re, im: lambda.im });
    }
    Ok((lambda * shifted).inv())
}

pub fn resolvent_values(lambdas: &[Complex64]) -> Result<Vec<Complex64>> {
    lambdas.iter().map(|&l| resolvent(l)).collect()
}

/// `(σ, Re R, Im R)` along `Im λ = h`.
pub fn contour_samples(h: f64, sigmas: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    guard(h)?;
    sigmas
        .iter()
        .map(|&s| resolvent(Complex64::new(s, h)).map(|r| (s, r.re, r.im)))
        .collect()
}

fn guard(h: f64) -> Result<()> {
    if h.abs() < POLE_GUARD || (h + 2.0).abs() < POLE_GUARD {
        return Err(Error::PoleGuard { h, guard: POLE_GUARD });
    }
    Ok(())
}

/// Angular frequencies of an `n`-point FFT with spacing `d`; the Nyquist mode is
/// reported with positive sign.
fn frequencies(n: usize, d: f64) -> Vec<f64> {
    let scale = 2.0 * std::f64::consts::PI / (n as f64 * d);
    (0..n)
        .map(|k| if k <= n / 2 { k as f64 } else { k as f64 - n as f64 } * scale)
        .collect()
}

#[derive(Debug, Clone)]
pub struct ModelSolution {
    pub h: f64,
    pub tau: Vec<f64>,
    pub dtau: f64,
    /// `u(τ)`.
    pub u: Vec<f64>,
    /// `v = e^{hτ}u`.
    pub tilted: Vec<f64>,
    /// `w = e^{hτ}g′`.
    pub tilted_data: Vec<f64>,
    /// Unnormalized DFT of `w`.
    pub data_spectrum: Vec<Complex64>,
    /// `σ_k`.
    pub sigma: Vec<f64>,
}

pub fn solve_model(problem: &MellinProblem, h: f64) -> Result<ModelSolution> {
    guard(h)?;
    let n = problem.grid.n;
    let d = problem.grid.step();
    let w: Vec<f64> = problem.tau.iter().zip(&problem.gprime).map(|(t, g)| (h * t).exp() * g).collect();
    let wmax = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if wmax > 0.0 && (w[0].abs() > EDGE_TOLERANCE * wmax || w[n - 1].abs() > EDGE_TOLERANCE * wmax) {
        return Err(Error::InsufficientGrid(format!(
            "tilted data e^{{{h}τ}}g′ is not negligible at the ends of the τ window"
        )));
    }
    let sigma = frequencies(n, d);
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = w.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    forward.process(&mut buf);
    let data_spectrum = buf.clone();
    for (k, b) in buf.iter_mut().enumerate() {
        let r = resolvent(Complex64::new(sigma[k], h))?;
        // The Nyquist mode has no conjugate partner; keep the real part.
        let r = if n % 2 == 0 && k == n / 2 { Complex64::new(r.re, 0.0) } else { r };
        *b *= r;
    }
    inverse.process(&mut buf);
    let tilted: Vec<f64> = buf.iter().map(|c| c.re / n as f64).collect();
    let u = problem.tau.iter().zip(&tilted).map(|(t, v)| (-h * t).exp() * v).collect();
    Ok(ModelSolution { h, tau: problem.tau.clone(), dtau: d, u, tilted, tilted_data: w, data_spectrum, sigma })
}

fn derivative(samples: &[f64], d: f64, order: usize) -> Result<Vec<f64>> {
    let op = LineOperator::uniform(samples.len(), d, 0.0, order, Accuracy::Eighth, LeftEnd::OneSided)?;
    Ok(op.apply_vec(samples, 1.0))
}

fn inner_range(n: usize) -> std::ops::Range<usize> {
    n / 10..n - n / 10
}

impl ModelSolution {
    /// `max |−v″ + (2h+2)v′ − (h²+2h)v − w| / max|w|` over the inner 80%.
    pub fn ode_residual(&self) -> Result<f64> {
        let h = self.h;
        let d1 = derivative(&self.tilted, self.dtau, 1)?;
        let d2 = derivative(&self.tilted, self.dtau, 2)?;
        let range = inner_range(self.tau.len());
        let scale = self.tilted_data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            return Ok(self.tilted.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        }
        let mut worst: f64 = 0.0;
        for k in range {
            let res = -d2[k] + (2.0 * h + 2.0) * d1[k] - (h * h + 2.0 * h) * self.tilted[k] - self.tilted_data[k];
            worst = worst.max(res.abs());
        }
        Ok(worst / scale)
    }

    /// `Σ_{j≤order} ∫ |(D−h)ʲ v|² dτ`, i.e. `Σ ∫|∂ʲ_τ u|² e^{2hτ} dτ`.
    pub fn tau_norm_squared(&self, order: usize) -> Result<f64> {
        let mut acc = 0.0;
        let mut w = self.tilted.clone();
        for j in 0..=order {
            if j > 0 {
                let dw = derivative(&w, self.dtau, 1)?;
                w = dw.iter().zip(&w).map(|(a, b)| a - self.h * b).collect();
            }
            acc += w.iter().map(|x| x * x).sum::<f64>() * self.dtau;
        }
        Ok(acc)
    }

    /// The same quantity evaluated on the contour: `Σ_k Σ_j |λ_k|^{2j}|V_k|² dτ/N`.
    pub fn contour_norm_squared(&self, order: usize) -> Result<f64> {
        let n = self.tau.len();
        let mut acc = 0.0;
        for (k, x) in self.data_spectrum.iter().enumerate() {
            let lambda = Complex64::new(self.sigma[k], self.h);
            let v = x * resolvent(lambda)?;
            let l2 = lambda.norm_sqr();
            let weight: f64 = (0..=order).map(|j| l2.powi(j as i32)).sum();
            acc += weight * v.norm_sqr();
        }
        Ok(acc * self.dtau / n as f64)
    }

    /// `∂_r u = −e^{τ}u,τ` at node `k`.
    pub fn radial_derivative(&self) -> Result<Vec<f64>> {
        let dv = derivative(&self.tilted, self.dtau, 1)?;
        Ok(self
            .tau
            .iter()
            .zip(dv.iter().zip(&self.tilted))
            .map(|(t, (dv, v))| -((1.0 - self.h) * t).exp() * (dv - self.h * v))
            .collect())
    }

    pub fn value_at(&self, tau: f64) -> f64 {
        let k = (((tau - self.tau[0]) / self.dtau).round() as usize).min(self.tau.len() - 1);
        self.u[k]
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParsevalCheck {
    pub contour: f64,
    pub tau: f64,
    pub relative_gap: f64,
}

pub fn parseval_check(sol: &ModelSolution, order: usize) -> Result<ParsevalCheck> {
    let contour = sol.contour_norm_squared(order)?;
    let tau = sol.tau_norm_squared(order)?;
    let relative_gap = if contour == 0.0 && tau == 0.0 { 0.0 } else { (contour - tau).abs() / contour.max(tau) };
    Ok(ParsevalCheck { contour, tau, relative_gap })
}

/// Chart form of the model estimate: solution norm of order `k+2` against
/// data norm of order `k`, both with the weight `e^{2hτ}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelEstimate {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// `sup_σ Σ_{j≤k+2}|λ|^{2j} |R(λ)|² / Σ_{j≤k}|λ|^{2j}`.
    pub symbol_bound: f64,
}

pub fn model_estimate(problem: &MellinProblem, k: usize, h: f64) -> Result<ModelEstimate> {
    let sol = solve_model(problem, h)?;
    let lhs = sol.tau_norm_squared(k + 2)?;
    let data = ModelSolution { tilted: sol.tilted_data.clone(), ..sol.clone() };
    let rhs = data.tau_norm_squared(k)?;
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    let mut symbol_bound: f64 = 0.0;
    let mut s = -200.0;
    while s <= 200.0 {
        let l = Complex64::new(s, h);
        let l2 = l.norm_sqr();
        let num: f64 = (0..=k + 2).map(|j| l2.powi(j as i32)).sum();
        let den: f64 = (0..=k).map(|j| l2.powi(j as i32)).sum();
        symbol_bound = symbol_bound.max(num * resolvent(l)?.norm_sqr() / den);
        s += 1e-3;
    }
    Ok(ModelEstimate { lhs, rhs, ratio, symbol_bound })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandDifference {
    pub h1: f64,
    pub h2: f64,
    /// Mean of `u₁ − u₂` over the comparison window.
    pub c0: f64,
    pub u1_at_zero: f64,
    pub constancy_stddev: f64,
    /// `(2πi/√2π)·ĝ′(0)/(2i)` with `ĝ′(0)` by direct quadrature.
    pub residue_c0: f64,
    /// `∂_r u₂` as `r → 0`: fitted power of `r`, `None` unless requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis_derivative_order: Option<f64>,
    #[serde(skip)]
    pub window: (f64, f64),
    #[serde(skip)]
    pub difference: Vec<(f64, f64)>,
}

fn band_core(problem: &MellinProblem, h1: f64, h2: f64) -> Result<(BandDifference, ModelSolution)> {
    let residue_c0 = {
        let sqrt2pi = (2.0 * std::f64::consts::PI).sqrt();
        // 2πi/√(2π) · ĝ′(0) / (2i)
        2.0 * std::f64::consts::PI / sqrt2pi * problem.transform_at_zero() / 2.0
    };
    let Some((lo, hi)) = problem.data_window() else {
        return Ok((
            BandDifference {
                h1,
                h2,
                c0: 0.0,
                u1_at_zero: 0.0,
                constancy_stddev: 0.0,
                residue_c0,
                axis_derivative_order: None,
                window: (0.0, 0.0),
                difference: Vec::new(),
            },
            solve_model(problem, h2)?,
        ));
    };
    let s1 = solve_model(problem, h1)?;
    let s2 = solve_model(problem, h2)?;
    let (wlo, whi) = ((lo - 10.0).max(problem.grid.lo), (hi + 10.0).min(problem.grid.hi));
    let difference: Vec<(f64, f64)> = s1
        .tau
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= wlo && t <= whi)
        .map(|(k, &t)| (t, s1.u[k] - s2.u[k]))
        .collect();
    let m = difference.len() as f64;
    let c0 = difference.iter().map(|p| p.1).sum::<f64>() / m;
    let constancy_stddev = (difference.iter().map(|p| (p.1 - c0).powi(2)).sum::<f64>() / m).sqrt();
    let u1_at_zero = s1.value_at(whi);
    Ok((
        BandDifference {
            h1,
            h2,
            c0,
            u1_at_zero,
            constancy_stddev,
            residue_c0,
            axis_derivative_order: None,
            window: (wlo, whi),
            difference,
        },
        s2,
    ))
}

/// Solutions on `Im λ = h₁ ∈ (−1, 0)` and `Im λ = h₂ ∈ (0, 1)` differ by the
/// residue at `λ = 0`, a constant.
pub fn band_difference(problem: &MellinProblem, h1: f64, h2: f64) -> Result<BandDifference> {
    if !(h1 > -1.0 && h1 < 0.0 && h2 > 0.0 && h2 < 1.0) {
        return Err(Error::InvalidParameter(format!("need h1 ∈ (−1,0), h2 ∈ (0,1), got {h1}, {h2}")));
    }
    guard(h1)?;
    guard(h2)?;
    Ok(band_core(problem, h1, h2)?.0)
}

/// As [`band_difference`] on the bands `h̄₁ ∈ (−1, 0)`, `h̄₂ ∈ (0, 2)`; also fits
/// the power of `r` in `∂_r ū₂` near the axis.
pub fn k1_band_difference(problem: &MellinProblem, hbar1: f64, hbar2: f64) -> Result<BandDifference> {
    if !(hbar1 > -1.0 && hbar1 < 0.0 && hbar2 > 0.0 && hbar2 < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "need h̄1 ∈ (−1,0), h̄2 ∈ (0,2), got {hbar1}, {hbar2}"
        )));
    }
    guard(hbar1)?;
    guard(hbar2)?;
    let (mut report, s2) = band_core(problem, hbar1, hbar2)?;
    if report.difference.is_empty() {
        report.axis_derivative_order = Some(f64::INFINITY);
        return Ok(report);
    }
    let dr = s2.radial_derivative()?;
    // Beyond the data ∂_r ū₂ decays faster than any power and soon meets the
    // round-off floor, so the fit uses the last unit-spaced samples inside the
    // data support that stay well above it.
    let (_, data_hi) = problem.data_window().unwrap_or(report.window);
    let top = dr.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut pts = Vec::new();
    for step in 0..6 {
        let t = data_hi - 5.0 + step as f64;
        let k = (((t - s2.tau[0]) / s2.dtau).round() as usize).min(s2.tau.len() - 1);
        if dr[k].abs() > 1e-9 * top {
            pts.push((-s2.tau[k], dr[k].abs().ln()));
        }
    }
    report.axis_derivative_order = Some(if pts.len() >= 2 { least_squares_slope(&pts) } else { f64::INFINITY });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gauss(t: f64) -> f64 {
        (-(t - 2.0).powi(2) / 2.0).exp()
    }

    #[test]
    fn resolvent_examples() {
        let r = resolvent_values(&[Complex64::i(), Complex64::new(1.0, 0.0), -Complex64::i()]).unwrap();
        assert_abs_diff_eq!(r[0].re, -1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[0].im, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[1].re, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(r[1].im, -0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(r[2].re, 1.0, epsilon = 1e-15);
        assert!(matches!(resolvent(Complex64::new(0.0, -2.0)), Err(Error::ResolventPole { .. })));
        assert!(resolvent(Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn resolvent_decay() {
        for h in [-1.5, -0.5, 0.5, 3.0] {
            let s = 1e5;
            let r = resolvent(Complex64::new(s, h)).unwrap();
            assert_abs_diff_eq!(r.norm() * s * s, 1.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn indicator_profile_maps_to_exponential() {
        let g = TauGrid { lo: -10.0, hi: 10.0, n: 2000 };
        let p = to_log_problem(|r| if r >= (-1f64).exp() && r <= 1.0 { 1.0 } else { 0.0 }, g).unwrap();
        for (t, v) in p.tau.iter().zip(&p.gprime) {
            let exact = if *t >= 0.0 && *t <= 1.0 { (-2.0 * t).exp() } else { 0.0 };
            assert_abs_diff_eq!(*v, exact, epsilon = 1e-12);
        }
        assert!(to_log_problem(|r| if r < 1.0 { 1.0 } else { 0.0 }, TauGrid { lo: -1.0, hi: 10.0, n: 100 }).is_err());
    }

    #[test]
    fn model_solution_residual_and_guard() {
        let p = MellinProblem::from_fn(TauGrid::default(), gauss).unwrap();
        let s = solve_model(&p, 0.5).unwrap();
        assert!(s.ode_residual().unwrap() < 1e-8);
        assert!(matches!(solve_model(&p, 0.01), Err(Error::PoleGuard { .. })));
        assert!(matches!(solve_model(&p, -1.97), Err(Error::PoleGuard { .. })));
        let z = MellinProblem::from_fn(TauGrid::default(), |_| 0.0).unwrap();
        assert!(solve_model(&z, 0.5).unwrap().u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_band_agrees() {
        let p = MellinProblem::from_fn(TauGrid::default(), gauss).unwrap();
        let a = solve_model(&p, 0.4).unwrap();
        let b = solve_model(&p, 0.8).unwrap();
        for k in 0..a.u.len() {
            if a.tau[k] > -10.0 && a.tau[k] < 15.0 {
                assert_abs_diff_eq!(a.u[k], b.u[k], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn residue_constant() {
        let p = MellinProblem::from_fn(TauGrid::default(), gauss).unwrap();
        let b = band_difference(&p, -0.5, 0.5).unwrap();
        let exact = 0.5 * (2.0 * std::f64::consts::PI).sqrt();
        assert!((b.c0 - exact).abs() / exact < 1e-6, "{b:?}");
        assert!(b.constancy_stddev / b.c0.abs() < 1e-6);
        assert!((b.residue_c0 - exact).abs() / exact < 1e-6);
    }

    #[test]
    fn k1_bands_vanish_on_the_axis() {
        let p = MellinProblem::from_fn(TauGrid::default(), gauss).unwrap();
        let b = k1_band_difference(&p, -0.5, 1.5).unwrap();
        assert!(b.axis_derivative_order.unwrap() >= 1.0, "{b:?}");
        assert!(b.constancy_stddev / b.c0.abs() < 1e-6);
        assert!(k1_band_difference(&p, -0.5, 2.5).is_err());
    }
}
