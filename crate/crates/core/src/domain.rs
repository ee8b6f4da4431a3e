//! Cylinder geometry, the cell-centered grid, the radial partition of unity
//! and the axis cutoff `K` used by the correction functions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Parity};
use crate::stencil::Accuracy;

/// `Ω = {r < R, |z| < a}` together with the localization radius `r₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderDomain {
    pub radius: f64,
    pub half_height: f64,
    pub r0: f64,
}

impl CylinderDomain {
    pub fn new(radius: f64, half_height: f64, r0: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidDomain(format!("radius must be positive, got {radius}")));
        }
        if !(half_height > 0.0) || !half_height.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "half-height must be positive, got {half_height}"
            )));
        }
        if !(r0 > 0.0) || !(2.0 * r0 < radius) {
            return Err(Error::InvalidDomain(format!(
                "localization radius must satisfy 0 < 2·r0 < R, got r0 = {r0}, R = {radius}"
            )));
        }
        Ok(Self { radius, half_height, r0 })
    }

    /// `R = 1`, `a = 1`, `r₀ = 0.25`.
    pub fn unit() -> Self {
        Self { radius: 1.0, half_height: 1.0, r0: 0.25 }
    }
}

/// Cell-centered tensor grid over `(0, R) × (−a, a)`.
///
/// Radial nodes sit at `(i + ½)·hr`, so the axis is a cell face and never a
/// sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nr: usize,
    pub nz: usize,
    pub hr: f64,
    pub hz: f64,
    pub radius: f64,
    pub half_height: f64,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
}

impl Grid {
    pub fn new(domain: &CylinderDomain, nr: usize, nz: usize) -> Result<Arc<Self>> {
        if nr < 3 || nz < 3 {
            return Err(Error::InsufficientGrid(format!(
                "need at least 3 cells per direction, got {nr} x {nz}"
            )));
        }
        let hr = domain.radius / nr as f64;
        let hz = 2.0 * domain.half_height / nz as f64;
        let r = (0..nr).map(|i| (i as f64 + 0.5) * hr).collect();
        let z = (0..nz).map(|j| -domain.half_height + (j as f64 + 0.5) * hz).collect();
        Ok(Arc::new(Self {
            nr,
            nz,
            hr,
            hz,
            radius: domain.radius,
            half_height: domain.half_height,
            r,
            z,
        }))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nr * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index: `r` outer, `z` inner.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nz + j
    }

    /// Radial face position `r_{i−½}`; `face_r(0) = 0` is the axis.
    #[inline]
    pub fn face_r(&self, i: usize) -> f64 {
        i as f64 * self.hr
    }
}

/// `ζ⁽¹⁾ + ζ⁽²⁾ = 1` with `ζ⁽¹⁾ = 1` on `[0, r₀]` and `ζ⁽¹⁾ = 0` on `[2r₀, R]`.
///
/// The transition is the quintic smoothstep `10s³ − 15s⁴ + 6s⁵` in
/// `s = (r − r₀)/r₀`, which is `C²` with vanishing first and second
/// derivatives at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionOfUnity {
    pub r0: f64,
}

impl PartitionOfUnity {
    fn blend(&self, r: f64) -> (f64, f64, f64) {
        let s = (r - self.r0) / self.r0;
        if s <= 0.0 {
            (0.0, 0.0, 0.0)
        } else if s >= 1.0 {
            (1.0, 0.0, 0.0)
        } else {
            let s2 = s * s;
            let value = s2 * s * (10.0 - 15.0 * s + 6.0 * s2);
            let d1 = 30.0 * s2 * (1.0 - s) * (1.0 - s) / self.r0;
            let d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (self.r0 * self.r0);
            (value, d1, d2)
        }
    }

    pub fn zeta1(&self, r: f64) -> f64 {
        1.0 - self.blend(r).0
    }

    pub fn zeta2(&self, r: f64) -> f64 {
        self.blend(r).0
    }

    pub fn zeta1_dot(&self, r: f64) -> f64 {
        -self.blend(r).1
    }

    pub fn zeta2_dot(&self, r: f64) -> f64 {
        self.blend(r).1
    }

    pub fn zeta1_ddot(&self, r: f64) -> f64 {
        -self.blend(r).2
    }

    pub fn zeta2_ddot(&self, r: f64) -> f64 {
        self.blend(r).2
    }
}

pub fn build_partition(domain: &CylinderDomain) -> Result<PartitionOfUnity> {
    if !(domain.r0 > 0.0 && 2.0 * domain.r0 < domain.radius) {
        return Err(Error::InvalidDomain(format!(
            "partition of unity needs 0 < 2·r0 < R, got r0 = {}, R = {}",
            domain.r0, domain.radius
        )));
    }
    Ok(PartitionOfUnity { r0: domain.r0 })
}

/// `K(r) = c₀·r²·B(r)` with `B = 1` on `[0, ρ/2]` and `B = 0` beyond `ρ`.
///
/// `B` uses the `C^∞` step `φ(1−s)/(φ(1−s)+φ(s))`, `φ(t) = e^{−1/t}`, on
/// `s = (r − ρ/2)/(ρ/2)`, so `K(r)/r² = c₀` exactly on the plateau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffK {
    pub c0: f64,
    pub rho: f64,
}

impl CutoffK {
    fn step(&self, r: f64) -> (f64, f64) {
        let half = 0.5 * self.rho;
        let s = (r - half) / half;
        if s <= 0.0 {
            return (1.0, 0.0);
        }
        if s >= 1.0 {
            return (0.0, 0.0);
        }
        let a = (-1.0 / (1.0 - s)).exp();
        let b = (-1.0 / s).exp();
        let sum = a + b;
        let value = a / sum;
        let ds = -a * b * (1.0 / ((1.0 - s) * (1.0 - s)) + 1.0 / (s * s)) / (sum * sum);
        (value, ds / half)
    }

    /// Plateau factor `B(r)`.
    pub fn bump(&self, r: f64) -> f64 {
        self.step(r).0
    }

    pub fn value(&self, r: f64) -> f64 {
        if self.c0 == 0.0 {
            return 0.0;
        }
        self.c0 * r * r * self.step(r).0
    }

    pub fn derivative(&self, r: f64) -> f64 {
        if self.c0 == 0.0 {
            return 0.0;
        }
        let (b, db) = self.step(r);
        self.c0 * (2.0 * r * b + r * r * db)
    }
}

pub fn build_cutoff(c0: f64, rho: f64) -> Result<CutoffK> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("cutoff radius must be positive, got {rho}")));
    }
    if !c0.is_finite() {
        return Err(Error::InvalidParameter(format!("cutoff coefficient must be finite, got {c0}")));
    }
    Ok(CutoffK { c0, rho })
}

/// Right-hand sides of the localized problems for `u = ψ₁ζ⁽¹⁾`, `w = ψ₁ζ⁽²⁾`:
///
/// `f = ω₁ζ⁽¹⁾ − 2ψ₁,r ζ̇⁽¹⁾ − ψ₁ζ̈⁽¹⁾ − (3/r)ψ₁ζ̇⁽¹⁾` and likewise `g` with `ζ⁽²⁾`.
pub fn localize_rhs(psi1: &Field, omega1: &Field, pou: &PartitionOfUnity) -> Result<(Field, Field)> {
    psi1.check_same_grid(omega1)?;
    let dpsi = psi1.derivative_with(1, 0, Accuracy::Second)?;
    let grid = psi1.grid().clone();
    let mut f = vec![0.0; grid.len()];
    let mut g = vec![0.0; grid.len()];
    for i in 0..grid.nr {
        let r = grid.r[i];
        let (z1, z1d, z1dd) = (pou.zeta1(r), pou.zeta1_dot(r), pou.zeta1_ddot(r));
        let (z2, z2d, z2dd) = (pou.zeta2(r), pou.zeta2_dot(r), pou.zeta2_ddot(r));
        for j in 0..grid.nz {
            let k = grid.index(i, j);
            let (p, pr, w) = (psi1.values()[k], dpsi.values()[k], omega1.values()[k]);
            f[k] = w * z1 - 2.0 * pr * z1d - p * z1dd - 3.0 / r * p * z1d;
            g[k] = w * z2 - 2.0 * pr * z2d - p * z2dd - 3.0 / r * p * z2d;
        }
    }
    Ok((
        Field::new(grid.clone(), Parity::Even, f)?,
        Field::new(grid, Parity::Even, g)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn domain_validation() {
        assert!(CylinderDomain::new(1.0, 1.0, 0.25).is_ok());
        assert!(CylinderDomain::new(1.0, 1.0, 0.5).is_err());
        assert!(CylinderDomain::new(-1.0, 1.0, 0.1).is_err());
        assert!(CylinderDomain::new(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn grid_never_touches_axis() {
        let grid = Grid::new(&CylinderDomain::unit(), 8, 6).unwrap();
        assert!(grid.r.iter().all(|&r| r > 0.0));
        assert_abs_diff_eq!(grid.r[0], 1.0 / 16.0, epsilon = 1e-15);
        assert_abs_diff_eq!(grid.z[0], -1.0 + 1.0 / 6.0, epsilon = 1e-15);
        assert!(grid.r.windows(2).all(|w| (w[1] - w[0] - grid.hr).abs() < 1e-14));
    }

    #[test]
    fn partition_examples() {
        let pou = build_partition(&CylinderDomain::unit()).unwrap();
        assert_eq!(pou.zeta1(0.1), 1.0);
        assert_abs_diff_eq!(pou.zeta1(0.6) + pou.zeta2(0.6), 1.0, epsilon = 1e-15);
        for k in 0..=1000 {
            let r = k as f64 / 1000.0;
            assert!((pou.zeta1(r) + pou.zeta2(r) - 1.0).abs() <= 1e-14);
            if r <= 0.25 || r >= 0.5 {
                assert_eq!(pou.zeta1_dot(r), 0.0);
                assert_eq!(pou.zeta2_ddot(r), 0.0);
            }
        }
        assert!(build_partition(&CylinderDomain { radius: 1.0, half_height: 1.0, r0: 0.5 }).is_err());
    }

    #[test]
    fn partition_derivative_matches_finite_difference() {
        let pou = build_partition(&CylinderDomain::unit()).unwrap();
        let r = 0.375;
        let d = 1e-5;
        let fd = (pou.zeta1(r + d) - pou.zeta1(r - d)) / (2.0 * d);
        let fd2 = (pou.zeta1(r + d) - 2.0 * pou.zeta1(r) + pou.zeta1(r - d)) / (d * d);
        assert!(pou.zeta1_dot(r) < 0.0);
        assert_abs_diff_eq!(pou.zeta1_dot(r), -pou.zeta2_dot(r), epsilon = 1e-15);
        assert_abs_diff_eq!(pou.zeta1_dot(r), fd, epsilon = 1e-7);
        assert_abs_diff_eq!(pou.zeta1_ddot(r), fd2, epsilon = 1e-3);
    }

    #[test]
    fn cutoff_examples() {
        let k = build_cutoff(1.0, 0.2).unwrap();
        assert_abs_diff_eq!(k.value(0.01) / 1e-4, 1.0, epsilon = 1e-6);
        let zero = build_cutoff(0.0, 0.2).unwrap();
        assert_eq!(zero.value(0.05), 0.0);
        assert_eq!(zero.value(0.15), 0.0);
        let two = build_cutoff(2.0, 0.2).unwrap();
        assert_eq!(two.value(0.3), 0.0);
        assert!(build_cutoff(1.0, 0.0).is_err());
    }

    #[test]
    fn cutoff_derivative_and_limit() {
        let k = build_cutoff(1.5, 0.2).unwrap();
        for &r in &[0.05, 0.11, 0.13, 0.15, 0.17, 0.19] {
            let d = 1e-6;
            let fd = (k.value(r + d) - k.value(r - d)) / (2.0 * d);
            assert_abs_diff_eq!(k.derivative(r), fd, epsilon = 1e-6);
        }
        let mut r = 0.05;
        while r > 1e-6 {
            assert_abs_diff_eq!(k.value(r) / (r * r), 1.5, epsilon = 1e-12);
            r *= 0.5;
        }
    }

    #[test]
    fn cutoff_is_quadratic_near_axis() {
        let rho = 0.2;
        let k = build_cutoff(0.7, rho).unwrap();
        let samples: Vec<(f64, f64)> = (0..20)
            .map(|n| {
                let r = rho / 100.0 * (25.0f64).powf(n as f64 / 19.0);
                (r.ln(), k.value(r).ln())
            })
            .collect();
        let slope = crate::corrections::least_squares_slope(&samples);
        assert!((slope - 2.0).abs() <= 0.05, "slope {slope}");
    }
}
