//! Flux-form discretization of `−ψ₁,rr − (3/r)ψ₁,r − ψ₁,zz = ω₁` and its
//! Jacobi-preconditioned conjugate-gradient solve.
//!
//! The radial part is written as `−r⁻³(r³u,r),r`. Each cell carries the
//! volume weight `V_i = ∫ r³ dr / hr = r_i³ + r_i hr²/4`, and the stored
//! matrix is `S = V·A`, which is symmetric. The face at `r = 0` has zero
//! flux weight, so no axis condition is ever imposed explicitly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::field::{Field, Parity, TraceCurve};
use crate::norms::{weighted_l2_squared, Region};
use crate::stencil::Accuracy;

/// Compressed sparse rows.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.col[k] == i)
                    .map_or(0.0, |k| self.val[k])
            })
            .collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .find(|&k| self.col[k] == j)
            .map_or(0.0, |k| self.val[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ZBoundary {
    /// `u = 0` at `z = ±a`.
    #[default]
    Dirichlet,
    /// `u,z = 0` at `z = ±a`.
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum OperatorKind {
    /// `−r⁻³(r³u,r),r − u,zz`, unknown `ψ₁`.
    #[default]
    Psi1,
    /// `−r⁻¹(r u,r),r + u/r² − u,zz`, unknown `ψ`.
    Psi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct AssemblyOptions {
    pub kind: OperatorKind,
    pub z_boundary: ZBoundary,
    /// Test fixture: give the axis face a nonzero flux with an odd ghost,
    /// which pins `ψ₁` to zero on the axis.
    pub broken_axis: bool,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Arc<Grid>,
    matrix: Csr,
    volume: Vec<f64>,
    options: AssemblyOptions,
}

pub fn assemble(grid: &Arc<Grid>) -> DiscreteOperator {
    assemble_with(grid, AssemblyOptions::default())
}

pub fn assemble_with(grid: &Arc<Grid>, options: AssemblyOptions) -> DiscreteOperator {
    let g = grid.as_ref();
    let (hr2, hz2) = (g.hr * g.hr, g.hz * g.hz);
    let (face_weight, volume, zeroth): (Vec<f64>, Vec<f64>, Vec<f64>) = match options.kind {
        OperatorKind::Psi1 => (
            (0..=g.nr).map(|i| g.face_r(i).powi(3)).collect(),
            g.r.iter().map(|r| r.powi(3) + r * hr2 / 4.0).collect(),
            vec![0.0; g.nr],
        ),
        OperatorKind::Psi => (
            (0..=g.nr).map(|i| g.face_r(i)).collect(),
            g.r.clone(),
            g.r.iter().map(|r| 1.0 / r).collect(),
        ),
    };
    let axis_weight = if options.broken_axis { g.hr.powi(3) } else { 0.0 };
    let z_ghost = match options.z_boundary {
        ZBoundary::Dirichlet => -1.0,
        ZBoundary::Neumann => 1.0,
    };

    let n = g.len();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col = Vec::with_capacity(5 * n);
    let mut val = Vec::with_capacity(5 * n);
    row_ptr.push(0);
    for i in 0..g.nr {
        let (fm, fp) = (if i == 0 { axis_weight } else { face_weight[i] }, face_weight[i + 1]);
        let v = volume[i];
        for j in 0..g.nz {
            let mut diag = zeroth[i];
            let mut entries: Vec<(usize, f64)> = Vec::with_capacity(5);
            // Radial fluxes.
            if i > 0 {
                entries.push((g.index(i - 1, j), -fm / hr2));
                diag += fm / hr2;
            } else {
                // Ghost u₋₁ = −u₀ across the axis face.
                diag += 2.0 * fm / hr2;
            }
            if i + 1 < g.nr {
                entries.push((g.index(i + 1, j), -fp / hr2));
                diag += fp / hr2;
            } else {
                diag += 2.0 * fp / hr2;
            }
            // Axial second difference.
            let cz = v / hz2;
            if j > 0 {
                entries.push((g.index(i, j - 1), -cz));
                diag += cz;
            } else {
                diag += cz * (1.0 - z_ghost);
            }
            if j + 1 < g.nz {
                entries.push((g.index(i, j + 1), -cz));
                diag += cz;
            } else {
                diag += cz * (1.0 - z_ghost);
            }
            entries.push((g.index(i, j), diag));
            entries.sort_by_key(|e| e.0);
            for (c, w) in entries {
                col.push(c);
                val.push(w);
            }
            row_ptr.push(col.len());
        }
    }
    DiscreteOperator { grid: grid.clone(), matrix: Csr { n, row_ptr, col, val }, volume, options }
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    pub fn options(&self) -> AssemblyOptions {
        self.options
    }

    /// Cell weight `V_i` of the inner product `Σ u v V_i hr hz`.
    pub fn volume(&self, i: usize) -> f64 {
        self.volume[i]
    }

    /// `A u` at every cell, boundary conditions included.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        let g = &self.grid;
        if **u.grid() != **g {
            return Err(Error::GridMismatch);
        }
        let mut out = vec![0.0; g.len()];
        self.matrix.matvec(u.values(), &mut out);
        for i in 0..g.nr {
            for j in 0..g.nz {
                out[g.index(i, j)] /= self.volume[i];
            }
        }
        Field::new(g.clone(), u.parity(), out)
    }

    /// `⟨u, v⟩ = Σ u v V_i hr hz`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for i in 0..g.nr {
            for j in 0..g.nz {
                let k = g.index(i, j);
                acc += u[k] * v[k] * self.volume[i];
            }
        }
        acc * g.hr * g.hz
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    /// Defaults to `50·(nr + nz)`.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: None }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub psi1: Field,
    pub psi: Field,
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveSummary {
    pub residual_norm: f64,
    pub iterations: usize,
    pub nr: usize,
    pub nz: usize,
    pub radius: f64,
    pub half_height: f64,
}

impl SolveResult {
    pub fn summary(&self) -> SolveSummary {
        let g = self.psi1.grid();
        SolveSummary {
            residual_norm: self.residual_norm,
            iterations: self.iterations,
            nr: g.nr,
            nz: g.nz,
            radius: g.radius,
            half_height: g.half_height,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG for `S x = b`; returns `(x, relative residual, iterations)`.
pub fn pcg(matrix: &Csr, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64, usize)> {
    let n = matrix.n;
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0.0, 0));
    }
    let inv_diag: Vec<f64> = matrix.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        matrix.matvec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        if !res.is_finite() {
            return Err(Error::NoConvergence { iterations: it, residual: res });
        }
        if res <= tol {
            // Report the true residual rather than the recursively updated one.
            matrix.matvec(&x, &mut ap);
            let true_res = b.iter().zip(&ap).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt() / bnorm;
            return Ok((x, true_res, it));
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: dot(&r, &r).sqrt() / bnorm })
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol <= 1e-6 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("solver tolerance must lie in (0, 1e-6], got {tol}")))
    }
}

/// Solve `A u = rhs` and return the raw unknown.
pub fn solve_raw(op: &DiscreteOperator, rhs: &Field, opts: SolverOptions) -> Result<(Vec<f64>, f64, usize)> {
    check_tol(opts.tol)?;
    let g = op.grid();
    if **rhs.grid() != **g {
        return Err(Error::GridMismatch);
    }
    let mut b = rhs.values().to_vec();
    for i in 0..g.nr {
        for j in 0..g.nz {
            b[g.index(i, j)] *= op.volume[i];
        }
    }
    let cap = opts.max_iter.unwrap_or(50 * (g.nr + g.nz));
    pcg(&op.matrix, &b, opts.tol, cap)
}

/// Solve for `ψ₁` and form `ψ = r·ψ₁`.
pub fn solve(op: &DiscreteOperator, omega1: &Field, opts: SolverOptions) -> Result<SolveResult> {
    if op.options.kind != OperatorKind::Psi1 {
        return Err(Error::InvalidParameter("solve expects the ψ₁ operator".into()));
    }
    let (x, residual_norm, iterations) = solve_raw(op, omega1, opts)?;
    let grid = op.grid().clone();
    let psi1 = Field::new(grid.clone(), Parity::Even, x)?;
    let psi = psi1.map_rz(|r, _, v| r * v)?.with_parity(Parity::Odd);
    Ok(SolveResult { psi1, psi, residual_norm, iterations })
}

/// Solve `−r⁻¹(rψ,r),r + ψ/r² − ψ,zz = ω` directly for `ψ`.
pub fn solve_psi_direct(grid: &Arc<Grid>, omega: &Field, opts: SolverOptions) -> Result<Field> {
    let op = assemble_with(grid, AssemblyOptions { kind: OperatorKind::Psi, ..Default::default() });
    let (x, _, _) = solve_raw(&op, omega, opts)?;
    Field::new(grid.clone(), Parity::Odd, x)
}

/// Both realizations of `ψ₁,z`.
#[derive(Debug, Clone)]
pub struct DifferentiatedSolve {
    /// `∂_z` applied to the solution of the undifferentiated problem.
    pub differenced: Field,
    /// Solution of `−Δ₅v = ω₁,z`, `v = 0` at `r = R`, `v,z = 0` at `z = ±a`.
    pub direct: Field,
}

/// Largest `|ω₁|` extrapolated to `z = ±a`, relative to `max|ω₁|`.
pub fn end_trace_defect(omega1: &Field) -> f64 {
    let g = omega1.grid();
    let scale = omega1.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let n = g.nz;
    let mut worst: f64 = 0.0;
    for i in 0..g.nr {
        let lo = (15.0 * omega1.at(i, 0) - 10.0 * omega1.at(i, 1) + 3.0 * omega1.at(i, 2)) / 8.0;
        let hi = (15.0 * omega1.at(i, n - 1) - 10.0 * omega1.at(i, n - 2) + 3.0 * omega1.at(i, n - 3)) / 8.0;
        worst = worst.max(lo.abs()).max(hi.abs());
    }
    worst / scale
}

pub const END_TRACE_THRESHOLD: f64 = 1e-2;

pub fn solve_differentiated(omega1: &Field, opts: SolverOptions) -> Result<DifferentiatedSolve> {
    let defect = end_trace_defect(omega1);
    if defect > END_TRACE_THRESHOLD {
        return Err(Error::Precondition(format!(
            "ω₁ does not vanish at z = ±a (relative trace {defect:.3e})"
        )));
    }
    let grid = omega1.grid().clone();
    let base = solve(&assemble(&grid), omega1, opts)?;
    let differenced = base.psi1.derivative(0, 1)?;
    let op = assemble_with(&grid, AssemblyOptions { z_boundary: ZBoundary::Neumann, ..Default::default() });
    let (x, _, _) = solve_raw(&op, &omega1.derivative(0, 1)?, opts)?;
    let direct = Field::new(grid, Parity::Even, x)?;
    Ok(DifferentiatedSolve { differenced, direct })
}

/// `v_r = −ψ,z`, `v_z = ψ,r + ψ/r`; `ψ/r` is taken from `ψ₁` when supplied.
pub fn reconstruct_velocity(psi: &Field, psi1: Option<&Field>) -> Result<(Field, Field)> {
    if psi.parity() != Parity::Odd {
        return Err(Error::Precondition("stream function must have odd axis parity".into()));
    }
    let v_r = psi.derivative_with(0, 1, Accuracy::Fourth)?.scale(-1.0);
    let over_r = match psi1 {
        Some(p) => {
            psi.check_same_grid(p)?;
            p.clone()
        }
        None => psi.map_rz(|r, _, v| v / r)?.with_parity(Parity::Even),
    };
    let v_z = psi.derivative_with(1, 0, Accuracy::Fourth)?.add(&over_r)?;
    Ok((v_r, v_z))
}

/// `(r v_r),r + (r v_z),z`.
pub fn divergence(v_r: &Field, v_z: &Field) -> Result<Field> {
    v_r.check_same_grid(v_z)?;
    let rvr = v_r.map_rz(|r, _, v| r * v)?.with_parity(v_r.parity().flip());
    let rvz = v_z.map_rz(|r, _, v| r * v)?.with_parity(v_z.parity().flip());
    rvr.derivative(1, 0)?.with_parity(Parity::Even).add(&rvz.derivative(0, 1)?)
}

/// `‖v_r,z − v_z,r − ω‖ / ‖ω‖` in `L₂(Ω)`.
pub fn vorticity_consistency(v_r: &Field, v_z: &Field, omega: &Field) -> Result<f64> {
    v_r.check_same_grid(v_z)?;
    v_r.check_same_grid(omega)?;
    let curl = v_r.derivative(0, 1)?.sub(&v_z.derivative(1, 0)?)?;
    let defect = curl.sub(omega)?;
    let num = weighted_l2_squared(&defect, 1.0, &Region::Full)?.sqrt();
    let den = weighted_l2_squared(omega, 1.0, &Region::Full)?.sqrt();
    if den == 0.0 {
        if num == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Precondition("vorticity is zero but the velocity has nonzero curl".into()));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisFit {
    pub a1: TraceCurve,
    pub a3: TraceCurve,
    pub fit_residual: f64,
}

/// Least-squares `ψ ≈ a₁(z) r + a₃(z) r³` over the first six cells.
pub fn fit_axis_asymptotics(psi: &Field) -> Result<AxisFit> {
    const CELLS: usize = 6;
    if psi.parity() != Parity::Odd {
        return Err(Error::Precondition("axis expansion expects an odd field".into()));
    }
    let g = psi.grid();
    if g.nr < CELLS {
        return Err(Error::InsufficientGrid(format!("axis fit needs {CELLS} radial cells, grid has {}", g.nr)));
    }
    let r = &g.r[..CELLS];
    let (s11, s13, s33) = r.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &x| {
        (a + x * x, b + x.powi(4), c + x.powi(6))
    });
    let det = s11 * s33 - s13 * s13;
    let (mut a1, mut a3) = (Vec::with_capacity(g.nz), Vec::with_capacity(g.nz));
    let (mut res2, mut data2) = (0.0, 0.0);
    for j in 0..g.nz {
        let (mut b1, mut b3) = (0.0, 0.0);
        for (i, &x) in r.iter().enumerate() {
            let v = psi.at(i, j);
            b1 += x * v;
            b3 += x.powi(3) * v;
        }
        let c1 = (s33 * b1 - s13 * b3) / det;
        let c3 = (s11 * b3 - s13 * b1) / det;
        for (i, &x) in r.iter().enumerate() {
            let v = psi.at(i, j);
            res2 += (v - c1 * x - c3 * x.powi(3)).powi(2);
            data2 += v * v;
        }
        a1.push(c1);
        a3.push(c3);
    }
    let fit_residual = if data2 == 0.0 { 0.0 } else { (res2 / data2).sqrt() };
    Ok(AxisFit {
        a1: TraceCurve { z: g.z.clone(), values: a1 },
        a3: TraceCurve { z: g.z.clone(), values: a3 },
        fit_residual,
    })
}

/// Both sides of
/// `∫(ψ₁,rz² + ψ₁,zz²)dx + ∫ψ₁,z(0)²dz = −∫ω₁ψ₁,zz dx`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyIdentity {
    pub volume_term: f64,
    pub axis_term: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / |rhs|`.
    pub gap: f64,
    /// Same gap with the axis term weighted by 3/2.
    pub gap_three_halves: f64,
}

pub fn energy_identity(psi1: &Field, omega1: &Field) -> Result<EnergyIdentity> {
    psi1.check_same_grid(omega1)?;
    let g = psi1.grid();
    let rz = psi1.derivative(1, 1)?;
    let zz = psi1.derivative(0, 2)?;
    let volume_term = weighted_l2_squared(&rz, 1.0, &Region::Full)? + weighted_l2_squared(&zz, 1.0, &Region::Full)?;
    let axis_term = psi1.derivative(0, 1)?.axis_trace().l2_squared(g.hz);
    let mut rhs = 0.0;
    for i in 0..g.nr {
        let mut line = 0.0;
        for j in 0..g.nz {
            line += omega1.at(i, j) * zz.at(i, j);
        }
        rhs += line * g.r[i];
    }
    let rhs = -rhs * g.hr * g.hz;
    let lhs = volume_term + axis_term;
    let rel = |l: f64| if rhs == 0.0 { if l == 0.0 { 0.0 } else { f64::INFINITY } } else { ((l - rhs) / rhs).abs() };
    Ok(EnergyIdentity {
        volume_term,
        axis_term,
        lhs,
        rhs,
        gap: rel(lhs),
        gap_three_halves: rel(volume_term + 1.5 * axis_term),
    })
}
