//! Scalar samples on the cell-centered grid.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::stencil::{Accuracy, LeftEnd, LineOperator};

/// Behaviour under the reflection `r → −r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    parity: Parity,
    values: Vec<f64>,
}

/// A curve indexed by the `z` nodes, e.g. the trace at `r = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCurve {
    pub z: Vec<f64>,
    pub values: Vec<f64>,
}

impl TraceCurve {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ values² dz` by the midpoint rule.
    pub fn l2_squared(&self, hz: f64) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * hz
    }
}

impl Field {
    pub fn new(grid: Arc<Grid>, parity: Parity, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at flat index {k}")));
        }
        Ok(Self { grid, parity, values })
    }

    pub fn zeros(grid: Arc<Grid>, parity: Parity) -> Self {
        let n = grid.len();
        Self { grid, parity, values: vec![0.0; n] }
    }

    pub fn from_fn(grid: Arc<Grid>, parity: Parity, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for &r in &grid.r {
            for &z in &grid.z {
                values.push(f(r, z));
            }
        }
        Self::new(grid, parity, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid.clone(), self.parity, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise `f(r, z, value)`.
    pub fn map_rz(&self, f: impl Fn(f64, f64, f64) -> f64) -> Result<Field> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.len());
        for i in 0..g.nr {
            for j in 0..g.nz {
                out.push(f(g.r[i], g.z[j], self.values[g.index(i, j)]));
            }
        }
        Field::new(self.grid.clone(), self.parity, out)
    }

    pub fn scale(&self, s: f64) -> Field {
        Field {
            grid: self.grid.clone(),
            parity: self.parity,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s·other`; keeps the parity of `self`.
    pub fn axpy(&self, s: f64, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        Field::new(self.grid.clone(), self.parity, values)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.axpy(-1.0, other)
    }

    /// Subtract a `z`-indexed curve from every radial line.
    pub fn sub_trace(&self, trace: &TraceCurve) -> Result<Field> {
        if trace.values.len() != self.grid.nz {
            return Err(Error::GridMismatch);
        }
        let nz = self.grid.nz;
        let values = self.values.iter().enumerate().map(|(k, v)| v - trace.values[k % nz]).collect();
        Field::new(self.grid.clone(), self.parity, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Radial line `j` as a vector over `i`.
    pub fn radial_line(&self, j: usize) -> Vec<f64> {
        (0..self.grid.nr).map(|i| self.at(i, j)).collect()
    }

    /// `∂ʳ_r ∂ᶻ_z` with second-order stencils.
    pub fn derivative(&self, dr: usize, dz: usize) -> Result<Field> {
        self.derivative_with(dr, dz, Accuracy::Second)
    }

    pub fn derivative_with(&self, dr: usize, dz: usize, accuracy: Accuracy) -> Result<Field> {
        if dr + dz > 3 {
            return Err(Error::OrderTooHigh(dr + dz));
        }
        let g = &self.grid;
        let mut values = self.values.clone();
        let mut parity = self.parity;
        if dr > 0 {
            let op = LineOperator::uniform(g.nr, g.hr, 0.5 * g.hr, dr, accuracy, LeftEnd::Mirror)?;
            let mut line = vec![0.0; g.nr];
            let mut out = vec![0.0; g.nr];
            for j in 0..g.nz {
                for i in 0..g.nr {
                    line[i] = values[g.index(i, j)];
                }
                op.apply(&line, parity.sign(), &mut out);
                for i in 0..g.nr {
                    values[g.index(i, j)] = out[i];
                }
            }
            if dr % 2 == 1 {
                parity = parity.flip();
            }
        }
        if dz > 0 {
            let op = LineOperator::uniform(g.nz, g.hz, g.z[0], dz, accuracy, LeftEnd::OneSided)?;
            let mut out = vec![0.0; g.nz];
            for i in 0..g.nr {
                let row = &mut values[i * g.nz..(i + 1) * g.nz];
                op.apply(row, 1.0, &mut out);
                row.copy_from_slice(&out);
            }
        }
        Field::new(self.grid.clone(), parity, values)
    }

    /// Value at `r = 0` per `z`.
    ///
    /// Even fields are fitted by `c₀ + c₁r² + c₂r⁴` through the first three
    /// cells; odd fields vanish on the axis.
    pub fn axis_trace(&self) -> TraceCurve {
        let g = &self.grid;
        let z = g.z.clone();
        if self.parity == Parity::Odd {
            return TraceCurve { values: vec![0.0; g.nz], z };
        }
        let s: Vec<f64> = g.r[..3].iter().map(|r| r * r).collect();
        // Lagrange weights at s = 0.
        let w = [
            s[1] * s[2] / ((s[0] - s[1]) * (s[0] - s[2])),
            s[0] * s[2] / ((s[1] - s[0]) * (s[1] - s[2])),
            s[0] * s[1] / ((s[2] - s[0]) * (s[2] - s[1])),
        ];
        let values = (0..g.nz)
            .map(|j| w[0] * self.at(0, j) + w[1] * self.at(1, j) + w[2] * self.at(2, j))
            .collect();
        TraceCurve { z, values }
    }

    /// Values at the outer wall `r = R` by one-sided extrapolation.
    pub fn wall_trace(&self) -> TraceCurve {
        let g = &self.grid;
        let n = g.nr;
        let values = (0..g.nz)
            .map(|j| (15.0 * self.at(n - 1, j) - 10.0 * self.at(n - 2, j) + 3.0 * self.at(n - 3, j)) / 8.0)
            .collect();
        TraceCurve { z: g.z.clone(), values }
    }

    /// `r,z,value` rows, `r` outer.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,z,value")?;
        let g = &self.grid;
        for i in 0..g.nr {
            for j in 0..g.nz {
                writeln!(w, "{:.17e},{:.17e},{:.17e}", g.r[i], g.z[j], self.at(i, j))?;
            }
        }
        Ok(())
    }
}
