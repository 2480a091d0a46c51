use serde::{Deserialize, Serialize};

use super::bspline::Snake;
use super::field::VectorField;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnakeParams {
    /// Tension.
    pub alpha: f64,
    /// Rigidity.
    pub beta: f64,
    /// External force weight.
    pub gamma: f64,
    /// Inverse time step.
    pub eta: f64,
    pub iterations: usize,
    pub n_points: usize,
    /// Scale the external field to unit length before evolving.
    pub normalize_field: bool,
    /// Stop once fewer than 1% of the points move by 0.1 px or more.
    pub early_stop: bool,
}

impl Default for SnakeParams {
    fn default() -> Self {
        Self {
            alpha: 0.35,
            beta: 0.35,
            gamma: 0.30,
            eta: 1.0,
            iterations: 250,
            n_points: 100,
            normalize_field: true,
            early_stop: false,
        }
    }
}

impl SnakeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.gamma >= 0.0) {
            return Err(Error::param("alpha, beta and gamma must be non-negative"));
        }
        if !(self.eta > 0.0) {
            return Err(Error::param("eta must be positive"));
        }
        if self.n_points < 5 {
            return Err(Error::param("a snake needs at least 5 points"));
        }
        Ok(())
    }
}

/// Factorization of the cyclic pentadiagonal matrix `A + ηI` of a closed
/// snake. The last two unknowns are split off: the leading block is a plain
/// pentadiagonal SPD matrix, factored as `LDLᵀ`, and the coupling goes
/// through a 2×2 Schur complement.
#[derive(Clone, Debug)]
pub struct CyclicPentaSolver {
    n: usize,
    // band of L: l1[i] = L[i][i−1], l2[i] = L[i][i−2]
    l1: Vec<f64>,
    l2: Vec<f64>,
    d: Vec<f64>,
    // M_IB (n−2 × 2) and M_II⁻¹ M_IB
    border: Vec<[f64; 2]>,
    w: Vec<[f64; 2]>,
    schur_inv: [[f64; 2]; 2],
}

/// Dense `A + ηI` for a closed curve of `n` points: second-difference
/// (`α`) and fourth-difference (`β`) stencils wrapped cyclically.
pub fn snake_matrix(n: usize, alpha: f64, beta: f64, eta: f64) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    let stencil = [(0isize, 2.0 * alpha + 6.0 * beta + eta), (1, -alpha - 4.0 * beta), (-1, -alpha - 4.0 * beta), (2, beta), (-2, beta)];
    for (i, row) in m.iter_mut().enumerate() {
        for &(off, val) in &stencil {
            let j = (i as isize + off).rem_euclid(n as isize) as usize;
            row[j] += val;
        }
    }
    m
}

impl CyclicPentaSolver {
    pub fn new(n: usize, alpha: f64, beta: f64, eta: f64) -> Result<Self> {
        if n < 5 {
            return Err(Error::param("cyclic solver needs at least 5 unknowns"));
        }
        let m = snake_matrix(n, alpha, beta, eta);
        let k = n - 2;
        let (mut l1, mut l2, mut d) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        for i in 0..k {
            // L[i][j] for j = i−2, i−1 from M[i][j] − Σ L[i][p] D[p] L[j][p]
            if i >= 2 {
                l2[i] = m[i][i - 2] / d[i - 2];
            }
            if i >= 1 {
                let mut s = m[i][i - 1];
                if i >= 2 {
                    s -= l2[i] * d[i - 2] * l1[i - 1];
                }
                l1[i] = s / d[i - 1];
            }
            let mut s = m[i][i];
            if i >= 1 {
                s -= l1[i] * l1[i] * d[i - 1];
            }
            if i >= 2 {
                s -= l2[i] * l2[i] * d[i - 2];
            }
            if !(s > 0.0) {
                return Err(Error::Degenerate("snake matrix is not positive definite".into()));
            }
            d[i] = s;
        }
        let border: Vec<[f64; 2]> = (0..k).map(|i| [m[i][k], m[i][k + 1]]).collect();
        let mut solver = Self {
            n,
            l1,
            l2,
            d,
            border: border.clone(),
            w: Vec::new(),
            schur_inv: [[0.0; 2]; 2],
        };
        let c0 = solver.solve_leading(border.iter().map(|b| b[0]).collect());
        let c1 = solver.solve_leading(border.iter().map(|b| b[1]).collect());
        solver.w = c0.iter().zip(&c1).map(|(&a, &b)| [a, b]).collect();
        let mut s = [[m[k][k], m[k][k + 1]], [m[k + 1][k], m[k + 1][k + 1]]];
        for i in 0..k {
            for (r, row) in s.iter_mut().enumerate() {
                for (c, v) in row.iter_mut().enumerate() {
                    *v -= border[i][r] * solver.w[i][c];
                }
            }
        }
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        if !(det > 0.0) {
            return Err(Error::Degenerate("snake matrix is singular".into()));
        }
        solver.schur_inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        Ok(solver)
    }

    fn solve_leading(&self, mut b: Vec<f64>) -> Vec<f64> {
        let k = b.len();
        for i in 0..k {
            if i >= 1 {
                b[i] -= self.l1[i] * b[i - 1];
            }
            if i >= 2 {
                b[i] -= self.l2[i] * b[i - 2];
            }
        }
        for i in 0..k {
            b[i] /= self.d[i];
        }
        for i in (0..k).rev() {
            if i + 1 < k {
                b[i] -= self.l1[i + 1] * b[i + 1];
            }
            if i + 2 < k {
                b[i] -= self.l2[i + 2] * b[i + 2];
            }
        }
        b
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n, "right-hand side length");
        let k = self.n - 2;
        let y = self.solve_leading(rhs[..k].to_vec());
        let mut rb = [rhs[k], rhs[k + 1]];
        for i in 0..k {
            rb[0] -= self.border[i][0] * y[i];
            rb[1] -= self.border[i][1] * y[i];
        }
        let xb = [
            self.schur_inv[0][0] * rb[0] + self.schur_inv[0][1] * rb[1],
            self.schur_inv[1][0] * rb[0] + self.schur_inv[1][1] * rb[1],
        ];
        let mut x: Vec<f64> = (0..k).map(|i| y[i] - self.w[i][0] * xb[0] - self.w[i][1] * xb[1]).collect();
        x.extend(xb);
        x
    }
}

/// Evolve a closed snake: every iteration solves
/// `(A + ηI) x⁺ = η x + γ u(x, y)` (likewise for `y`) with the field
/// sampled bilinearly at the current points, then clamps to the field.
pub fn snake_evolve(init: &Snake, field: &VectorField, p: &SnakeParams) -> Result<Snake> {
    p.validate()?;
    let n = init.len();
    if n < 5 {
        return Err(Error::param("a snake needs at least 5 points"));
    }
    let field = if p.normalize_field { field.normalized() } else { field.clone() };
    let (rows, cols) = field.dims();
    let (xmax, ymax) = ((cols - 1) as f64, (rows - 1) as f64);
    let solver = CyclicPentaSolver::new(n, p.alpha, p.beta, p.eta)?;
    let mut s = init.map(|q| [q[0].clamp(0.0, xmax), q[1].clamp(0.0, ymax)]);
    for it in 0..p.iterations {
        let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            let (u, v) = field.sample(s.x[i], s.y[i]);
            bx[i] = p.eta * s.x[i] + p.gamma * u;
            by[i] = p.eta * s.y[i] + p.gamma * v;
        }
        let nx = solver.solve(&bx);
        let ny = solver.solve(&by);
        let mut moving = 0;
        for i in 0..n {
            let (x, y) = (nx[i].clamp(0.0, xmax), ny[i].clamp(0.0, ymax));
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::Divergence { iteration: it + 1 });
            }
            if (x - s.x[i]).hypot(y - s.y[i]) >= 0.1 {
                moving += 1;
            }
            s.x[i] = x;
            s.y[i] = y;
        }
        if p.early_stop && (moving as f64) < 0.01 * n as f64 {
            log::debug!("snake settled after {} iterations", it + 1);
            break;
        }
    }
    Ok(s)
}
