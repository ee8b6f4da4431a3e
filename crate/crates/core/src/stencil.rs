//! Finite-difference weights on uniform lines.
//!
//! Interior nodes use centered stencils. At the axis the line is continued by
//! reflection (`u(−r) = ±u(r)`), so centered stencils are used all the way down
//! to the first cell. Other ends switch to one-sided windows wide enough to keep
//! the formal order.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Accuracy {
    #[default]
    Second,
    Fourth,
    Eighth,
}

impl Accuracy {
    fn extra(self) -> usize {
        match self {
            Accuracy::Second => 0,
            Accuracy::Fourth => 1,
            Accuracy::Eighth => 3,
        }
    }

    fn central_half_width(self, order: usize) -> usize {
        (order + 1) / 2 + self.extra()
    }

    fn one_sided_width(self, order: usize) -> usize {
        (order + 2 + 2 * self.extra()).max(2 * self.central_half_width(order) + 1)
    }
}

/// How the left end of a line is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeftEnd {
    /// The first node sits half a spacing from a symmetry plane.
    Mirror,
    OneSided,
}

/// Fornberg's recursion: `weights[k][j]` is the weight of node `j` in the
/// `k`-th derivative at `x0`.
pub fn fornberg_weights(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Differentiation matrix for one uniform line, stored row by row.
///
/// Negative source indices `k` refer to the mirror image of node `−k−1`.
#[derive(Debug, Clone)]
pub struct LineOperator {
    rows: Vec<Vec<(isize, f64)>>,
}

impl LineOperator {
    /// Nodes are `x0 + i·h`, `i = 0..n`.
    pub fn uniform(n: usize, h: f64, x0: f64, order: usize, accuracy: Accuracy, left: LeftEnd) -> Result<Self> {
        if order == 0 {
            return Ok(Self { rows: (0..n).map(|i| vec![(i as isize, 1.0)]).collect() });
        }
        let m = accuracy.central_half_width(order);
        let side = accuracy.one_sided_width(order);
        if n < side {
            return Err(Error::InsufficientGrid(format!(
                "order-{order} stencil needs {side} nodes, line has {n}"
            )));
        }
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let i = i as isize;
            let (mut start, mut width) = (i - m as isize, 2 * m + 1);
            if start < 0 && left == LeftEnd::OneSided {
                start = 0;
                width = side;
            }
            if start + width as isize > n as isize {
                start = n as isize - side as isize;
                width = side;
            }
            let nodes: Vec<f64> = (0..width).map(|k| x0 + (start + k as isize) as f64 * h).collect();
            let w = fornberg_weights(x0 + i as f64 * h, &nodes, order);
            let row = (0..width)
                .map(|k| (start + k as isize, w[order][k]))
                .filter(|&(_, wt)| wt != 0.0)
                .collect();
            rows.push(row);
        }
        Ok(Self { rows })
    }

    /// Apply to `input`; `mirror_sign` is `+1` for even and `−1` for odd lines.
    pub fn apply(&self, input: &[f64], mirror_sign: f64, out: &mut [f64]) {
        for (row, o) in self.rows.iter().zip(out.iter_mut()) {
            let mut acc = 0.0;
            for &(k, w) in row {
                let v = if k >= 0 { input[k as usize] } else { mirror_sign * input[(-k - 1) as usize] };
                acc += w * v;
            }
            *o = acc;
        }
    }

    pub fn apply_vec(&self, input: &[f64], mirror_sign: f64) -> Vec<f64> {
        let mut out = vec![0.0; input.len()];
        self.apply(input, mirror_sign, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fornberg_reproduces_classic_weights() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_abs_diff_eq!(w[1][0], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1][2], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w[2][1], -2.0, epsilon = 1e-15);
    }

    #[test]
    fn one_sided_ends_are_exact_on_low_degree_polynomials() {
        let h = 0.1;
        for acc in [Accuracy::Second, Accuracy::Fourth] {
            for order in 1..=3 {
                let op = LineOperator::uniform(12, h, 0.05, order, acc, LeftEnd::OneSided).unwrap();
                let x: Vec<f64> = (0..12).map(|i| 0.05 + i as f64 * h).collect();
                let u: Vec<f64> = x.iter().map(|x| x * x).collect();
                let d = op.apply_vec(&u, 1.0);
                for (xi, di) in x.iter().zip(&d) {
                    let exact = match order {
                        1 => 2.0 * xi,
                        2 => 2.0,
                        _ => 0.0,
                    };
                    assert_abs_diff_eq!(*di, exact, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn mirror_end_uses_parity() {
        let h = 0.1;
        let x: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) * h).collect();
        let even: Vec<f64> = x.iter().map(|x| x * x).collect();
        let op = LineOperator::uniform(10, h, 0.5 * h, 1, Accuracy::Second, LeftEnd::Mirror).unwrap();
        let d = op.apply_vec(&even, 1.0);
        for (xi, di) in x.iter().zip(&d) {
            assert_abs_diff_eq!(*di, 2.0 * xi, epsilon = 1e-12);
        }
        let odd: Vec<f64> = x.clone();
        let op2 = LineOperator::uniform(10, h, 0.5 * h, 2, Accuracy::Second, LeftEnd::Mirror).unwrap();
        let d2 = op2.apply_vec(&odd, -1.0);
        assert!(d2.iter().all(|v| v.abs() < 1e-10));
    }
}
