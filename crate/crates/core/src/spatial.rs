//! Laplacian eigenbases on `(0, π)` and grid ↔ coefficient transforms.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "bc", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    /// `-u'(0) + α u(0) = 0`, `u'(π) + α u(π) = 0`.
    Robin { alpha: f64 },
}

/// Coefficients of a spatial profile in a [`Basis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub coeffs: Vec<f64>,
}

impl State {
    pub fn zeros(n: usize) -> Self {
        State { coeffs: vec![0.0; n] }
    }

    /// `amp` times the `k`-th basis function.
    pub fn mode(n: usize, k: usize, amp: f64) -> Self {
        let mut s = State::zeros(n);
        s.coeffs[k] = amp;
        s
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scaled(&self, a: f64) -> State {
        State { coeffs: self.coeffs.iter().map(|c| a * c).collect() }
    }

    pub fn sub(&self, other: &State) -> State {
        State { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() }
    }

    pub fn add(&self, other: &State) -> State {
        State { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// `Σ |c_k|`, an upper bound of the sup norm (all basis functions have sup 1).
    pub fn abs_sum(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Leq,
    Geq,
    Equal,
    Incomparable,
}

#[derive(Debug, Clone)]
pub struct Basis {
    pub bc: BoundaryCondition,
    pub n_modes: usize,
    pub m_grid: usize,
    /// Collocation points.
    pub x: Vec<f64>,
    /// `μ_0 > μ_1 > …`
    pub eigenvalues: Vec<f64>,
    pub gamma0: f64,
    pub gap: f64,
    /// `e_0` on the grid, `e_0 ≫ 0`, sup 1.
    pub e0: Vec<f64>,
    /// Quadrature weight of each grid point (uniform).
    pub weight: f64,
    // row j: values of the N basis functions at x_j
    synth: Vec<f64>,
    // row j: weights of f(x_j) in each of the N coefficients
    proj: Vec<f64>,
    // row k: basis function k on the grid
    synth_t: Vec<f64>,
}

pub fn build_basis(bc: BoundaryCondition, n: usize, m: usize) -> Result<Basis> {
    Basis::new(bc, n, m)
}

impl Basis {
    pub fn new(bc: BoundaryCondition, n: usize, m: usize) -> Result<Basis> {
        if n < 2 {
            return invalid(format!("need at least 2 modes, got {n}"));
        }
        if m < 4 * n {
            return invalid(format!("grid too coarse: M = {m} < 4N = {}", 4 * n));
        }
        match bc {
            BoundaryCondition::Dirichlet => Ok(Self::dirichlet(n, m)),
            BoundaryCondition::Neumann => Ok(Self::neumann(n, m)),
            BoundaryCondition::Robin { alpha } => {
                if !(alpha >= 0.0) || !alpha.is_finite() {
                    return invalid(format!("robin alpha must be finite and >= 0, got {alpha}"));
                }
                Ok(Self::robin(alpha, n, m))
            }
        }
    }

    fn assemble(bc: BoundaryCondition, x: Vec<f64>, eigenvalues: Vec<f64>, synth: Vec<f64>, proj: Vec<f64>, weight: f64) -> Basis {
        let n = eigenvalues.len();
        let m = x.len();
        let e0 = (0..m).map(|j| synth[j * n]).collect();
        let mut synth_t = vec![0.0; m * n];
        for j in 0..m {
            for k in 0..n {
                synth_t[k * m + j] = synth[j * n + k];
            }
        }
        Basis {
            synth_t,
            bc,
            n_modes: n,
            m_grid: m,
            x,
            gamma0: -eigenvalues[0],
            gap: eigenvalues[0] - eigenvalues[1],
            eigenvalues,
            e0,
            weight,
            synth,
            proj,
        }
    }

    fn dirichlet(n: usize, m: usize) -> Basis {
        let h = PI / (m + 1) as f64;
        let x: Vec<f64> = (1..=m).map(|j| j as f64 * h).collect();
        let mut synth = vec![0.0; m * n];
        let mut proj = vec![0.0; m * n];
        let scale = 2.0 / (m + 1) as f64;
        for j in 0..m {
            for k in 0..n {
                // exact integer argument keeps the DST-I orthogonality to roundoff
                let s = (((j + 1) * (k + 1)) as f64 * h).sin();
                synth[j * n + k] = s;
                proj[j * n + k] = scale * s;
            }
        }
        let eig = (0..n).map(|k| -(((k + 1) * (k + 1)) as f64)).collect();
        Self::assemble(BoundaryCondition::Dirichlet, x, eig, synth, proj, h)
    }

    fn neumann(n: usize, m: usize) -> Basis {
        let h = PI / m as f64;
        let x: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) * h).collect();
        let mut synth = vec![0.0; m * n];
        let mut proj = vec![0.0; m * n];
        for j in 0..m {
            for k in 0..n {
                let c = (k as f64 * (j as f64 + 0.5) * h).cos();
                synth[j * n + k] = c;
                proj[j * n + k] = if k == 0 { 1.0 / m as f64 } else { 2.0 * c / m as f64 };
            }
        }
        let eig = (0..n).map(|k| -((k * k) as f64)).collect();
        Self::assemble(BoundaryCondition::Neumann, x, eig, synth, proj, h)
    }

    fn robin(alpha: f64, n: usize, m: usize) -> Basis {
        let h = PI / m as f64;
        let x: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) * h).collect();
        let a = robin_fd_matrix(alpha, m);
        let eig = SymmetricEigen::new(a);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
        let mut synth = vec![0.0; m * n];
        let mut proj = vec![0.0; m * n];
        let mut mu = Vec::with_capacity(n);
        for (k, &col) in order.iter().take(n).enumerate() {
            let v = eig.eigenvectors.column(col);
            let peak = v.iter().fold(0.0f64, |acc, &y| acc.max(y.abs()));
            let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
            let scale = sign / peak;
            let norm2: f64 = v.iter().map(|y| (y * scale).powi(2)).sum();
            for j in 0..m {
                let val = v[j] * scale;
                synth[j * n + k] = val;
                proj[j * n + k] = val / norm2;
            }
            mu.push(refine_robin(alpha, eig.eigenvalues[col]));
        }
        Self::assemble(BoundaryCondition::Robin { alpha }, x, mu, synth, proj, h)
    }

    pub fn to_grid(&self, s: &State) -> Vec<f64> {
        let mut out = vec![0.0; self.m_grid];
        self.synthesize_into(&s.coeffs, &mut out);
        out
    }

    pub fn to_coeffs(&self, f: &[f64]) -> Result<State> {
        if f.len() != self.m_grid {
            return Err(Error::DimensionMismatch { expected: self.m_grid, got: f.len() });
        }
        let mut c = vec![0.0; self.n_modes];
        for (j, &fj) in f.iter().enumerate() {
            if fj != 0.0 {
                self.accumulate_projection(j, fj, &mut c);
            }
        }
        Ok(State { coeffs: c })
    }

    pub(crate) fn synthesize_into(&self, c: &[f64], out: &mut [f64]) {
        let m = self.m_grid;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, &ck) in c.iter().enumerate() {
            if ck == 0.0 {
                continue;
            }
            for (o, s) in out.iter_mut().zip(&self.synth_t[k * m..(k + 1) * m]) {
                *o += ck * s;
            }
        }
    }

    /// `c += v · (projection weights of grid point j)`.
    #[inline]
    pub(crate) fn accumulate_projection(&self, j: usize, v: f64, c: &mut [f64]) {
        let n = self.n_modes;
        for (ck, w) in c.iter_mut().zip(&self.proj[j * n..(j + 1) * n]) {
            *ck += v * w;
        }
    }

    /// Value of basis function `k` at grid point `j`.
    pub fn phi(&self, k: usize, j: usize) -> f64 {
        self.synth[j * self.n_modes + k]
    }

    /// `e_0` as a state (unit vector on mode 0).
    pub fn e0_state(&self) -> State {
        State::mode(self.n_modes, 0, 1.0)
    }

    /// Series value at an arbitrary point, for the analytic bases.
    fn series_at(&self, c: &[f64], x: f64) -> Option<f64> {
        match self.bc {
            BoundaryCondition::Dirichlet => {
                // sin((k+1)x) by the three-term recurrence
                let (mut s_prev, mut s) = (0.0, x.sin());
                let two_cos = 2.0 * x.cos();
                let mut acc = 0.0;
                for &ck in c {
                    acc += ck * s;
                    let next = two_cos * s - s_prev;
                    s_prev = s;
                    s = next;
                }
                Some(acc)
            }
            BoundaryCondition::Neumann => {
                let (mut c_prev, mut cc) = (x.cos(), 1.0);
                let two_cos = 2.0 * x.cos();
                let mut acc = 0.0;
                for &ck in c {
                    acc += ck * cc;
                    let next = two_cos * cc - c_prev;
                    c_prev = cc;
                    cc = next;
                }
                Some(acc)
            }
            BoundaryCondition::Robin { .. } => None,
        }
    }

    /// Sup norm: grid maximum of `|u|`; for the analytic bases the grid
    /// maximiser is polished on its two neighbouring cells, so e.g.
    /// `sup_norm(0.7 e0) = 0.7` even when no grid point sits at `π/2`.
    pub fn sup_norm(&self, s: &State) -> f64 {
        let g = self.to_grid(s);
        let (jmax, gmax) = g.iter().enumerate().fold((0, 0.0f64), |(jm, vm), (j, &v)| {
            if v.abs() > vm {
                (j, v.abs())
            } else {
                (jm, vm)
            }
        });
        if gmax == 0.0 || matches!(self.bc, BoundaryCondition::Robin { .. }) {
            return gmax;
        }
        let lo = if jmax == 0 { 0.0 } else { self.x[jmax - 1] };
        let hi = if jmax + 1 == self.m_grid { PI } else { self.x[jmax + 1] };
        let f = |x: f64| self.series_at(&s.coeffs, x).unwrap().abs();
        gmax.max(crate::numeric::golden_max(&f, lo, hi))
    }

    pub fn sup_dist(&self, a: &State, b: &State) -> f64 {
        self.sup_norm(&a.sub(b))
    }

    /// Grid-pointwise comparison of `s1` against `s2`.
    pub fn partial_order(&self, s1: &State, s2: &State, tol: f64) -> Order {
        let d = self.to_grid(&s2.sub(s1));
        let all_small = d.iter().all(|v| v.abs() <= tol);
        if all_small {
            return Order::Equal;
        }
        if d.iter().all(|&v| v >= -tol) {
            Order::Leq
        } else if d.iter().all(|&v| v <= tol) {
            Order::Geq
        } else {
            Order::Incomparable
        }
    }

    /// Discrete L² inner product on the grid.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weight * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    /// Galerkin matrix of multiplication by `psi(x)`: `M_kl = <ψ φ_l>_k`.
    pub fn multiplication_matrix(&self, psi: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.n_modes;
        let mut out = DMatrix::zeros(n, n);
        for j in 0..self.m_grid {
            let w = psi(self.x[j]);
            for l in 0..n {
                let v = w * self.phi(l, j);
                if v == 0.0 {
                    continue;
                }
                for k in 0..n {
                    out[(k, l)] += v * self.proj[j * n + k];
                }
            }
        }
        out
    }
}

pub fn to_grid(basis: &Basis, s: &State) -> Vec<f64> {
    basis.to_grid(s)
}

pub fn to_coeffs(basis: &Basis, f: &[f64]) -> Result<State> {
    basis.to_coeffs(f)
}

pub fn sup_norm(basis: &Basis, s: &State) -> f64 {
    basis.sup_norm(s)
}

pub fn partial_order(basis: &Basis, s1: &State, s2: &State, tol: f64) -> Order {
    basis.partial_order(s1, s2, tol)
}

/// Cell-centred second-order FD Laplacian with Robin ghost cells.
pub fn robin_fd_matrix(alpha: f64, m: usize) -> DMatrix<f64> {
    let h = PI / m as f64;
    let rho = (1.0 - 0.5 * alpha * h) / (1.0 + 0.5 * alpha * h);
    let inv = 1.0 / (h * h);
    let mut a = DMatrix::zeros(m, m);
    for j in 0..m {
        a[(j, j)] = -2.0 * inv;
        if j > 0 {
            a[(j, j - 1)] = inv;
        }
        if j + 1 < m {
            a[(j, j + 1)] = inv;
        }
    }
    a[(0, 0)] += rho * inv;
    a[(m - 1, m - 1)] += rho * inv;
    a
}

/// Newton refinement of an FD eigenvalue against the exact Robin condition
/// `(k² - α²) sin kπ = 2αk cos kπ`, `μ = -k²`.
fn refine_robin(alpha: f64, mu_fd: f64) -> f64 {
    let mut k = (-mu_fd).max(0.0).sqrt();
    if k < 1e-8 {
        return mu_fd.min(0.0);
    }
    let f = |k: f64| (k * k - alpha * alpha) * (k * PI).sin() - 2.0 * alpha * k * (k * PI).cos();
    let df = |k: f64| {
        let (s, c) = (k * PI).sin_cos();
        2.0 * k * s + (k * k - alpha * alpha) * PI * c - 2.0 * alpha * c + 2.0 * alpha * k * PI * s
    };
    let seed = k;
    for _ in 0..50 {
        let d = df(k);
        if d == 0.0 {
            break;
        }
        let step = f(k) / d;
        k -= step;
        if step.abs() < 1e-15 * k.max(1.0) {
            break;
        }
    }
    // fall back to the FD value if Newton wandered to another branch
    if !k.is_finite() || (k - seed).abs() > 0.05 * seed.max(1.0) {
        return mu_fd;
    }
    -k * k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_spectrum() {
        let b = build_basis(BoundaryCondition::Dirichlet, 4, 16).unwrap();
        assert_eq!(b.eigenvalues, vec![-1.0, -4.0, -9.0, -16.0]);
        assert_eq!(b.gamma0, 1.0);
        assert_eq!(b.gap, 3.0);
        for (j, &x) in b.x.iter().enumerate() {
            assert!((b.e0[j] - x.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn neumann_spectrum() {
        let b = build_basis(BoundaryCondition::Neumann, 4, 16).unwrap();
        assert_eq!(b.eigenvalues, vec![0.0, -1.0, -4.0, -9.0]);
        assert_eq!(b.gamma0, 0.0);
        assert_eq!(b.gap, 1.0);
        assert!(b.e0.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn preconditions() {
        assert!(build_basis(BoundaryCondition::Dirichlet, 1, 16).is_err());
        assert!(build_basis(BoundaryCondition::Dirichlet, 8, 31).is_err());
        assert!(build_basis(BoundaryCondition::Robin { alpha: -1.0 }, 4, 16).is_err());
        let b = build_basis(BoundaryCondition::Dirichlet, 4, 16).unwrap();
        assert!(matches!(b.to_coeffs(&[0.0; 3]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn transforms() {
        let b = build_basis(BoundaryCondition::Dirichlet, 8, 64).unwrap();
        let f: Vec<f64> = b.x.iter().map(|x| x.sin() + 0.5 * (2.0 * x).sin()).collect();
        let c = b.to_coeffs(&f).unwrap();
        assert!((c.coeffs[0] - 1.0).abs() < 1e-13);
        assert!((c.coeffs[1] - 0.5).abs() < 1e-13);
        assert!(c.coeffs[2..].iter().all(|v| v.abs() < 1e-13));
        let e = b.to_coeffs(&b.e0).unwrap();
        assert!((e.coeffs[0] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn sup_and_order() {
        let b = build_basis(BoundaryCondition::Dirichlet, 64, 256).unwrap();
        let e = b.e0_state();
        assert!((b.sup_norm(&e.scaled(0.7)) - 0.7).abs() < 1e-14);
        let z = State::zeros(64);
        assert_eq!(b.partial_order(&z, &e, 0.0), Order::Leq);
        assert_eq!(b.partial_order(&e, &z, 0.0), Order::Geq);
        assert_eq!(b.partial_order(&e, &e, 0.0), Order::Equal);
        let s2 = State::mode(64, 1, 1.0);
        assert_eq!(b.partial_order(&e, &s2, 1e-12), Order::Incomparable);
    }

    #[test]
    fn robin_alpha_zero_is_neumann() {
        let b = build_basis(BoundaryCondition::Robin { alpha: 0.0 }, 4, 64).unwrap();
        for (k, mu) in b.eigenvalues.iter().enumerate() {
            assert!((mu + (k * k) as f64).abs() < 1e-10, "{k}: {mu}");
        }
        assert!(b.e0.iter().all(|&v| (v - 1.0).abs() < 1e-10));
    }
}
