//! Lowest eigenpairs of the field-free Hamiltonian.
//!
//! The matrix is real symmetric tridiagonal. Eigenvalues come from Sturm
//! sequence bisection, eigenvectors from inverse iteration with a pivoted
//! tridiagonal LU, followed by Gram-Schmidt against the lower states.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grid::{inner_product, Grid, WaveFunction};
use crate::hamiltonian::Hamiltonian;

pub const DEFAULT_STATES: usize = 12;
const RESIDUAL_TOL: f64 = 1e-8;
/// Amplitude threshold used to fix the global sign of each eigenvector.
const SIGN_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub index: usize,
    pub energy: f64,
    pub state: WaveFunction,
}

#[derive(Debug, Clone)]
pub struct SpectrumBundle {
    pairs: Vec<Eigenpair>,
    omega01: f64,
}

impl SpectrumBundle {
    pub fn pairs(&self) -> &[Eigenpair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn omega01(&self) -> f64 {
        self.omega01
    }

    pub fn energies(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.energy).collect()
    }

    pub fn state(&self, n: usize) -> &WaveFunction {
        &self.pairs[n].state
    }

    pub fn states(&self) -> Vec<WaveFunction> {
        self.pairs.iter().map(|p| p.state.clone()).collect()
    }

    /// `(|0> + |1>) / sqrt(2)`, localized in the left well.
    pub fn left(&self) -> WaveFunction {
        make_superposition(
            &self.pairs[..2],
            &[Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(FRAC_1_SQRT_2, 0.0)],
        )
        .expect("|0> and |1> are orthonormal")
    }

    /// `(|0> - |1>) / sqrt(2)`, localized in the right well.
    pub fn right(&self) -> WaveFunction {
        make_superposition(
            &self.pairs[..2],
            &[Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(-FRAC_1_SQRT_2, 0.0)],
        )
        .expect("|0> and |1> are orthonormal")
    }

    /// Largest |psi_n| at either end of the box.
    pub fn boundary_amplitude(&self, n: usize) -> f64 {
        let a = self.pairs[n].state.amplitudes();
        a[0].norm().max(a[a.len() - 1].norm())
    }
}

pub fn solve_eigenstates(grid: &Grid, potential: &[f64], k: usize) -> Result<SpectrumBundle> {
    let h = Hamiltonian::new(*grid, potential.to_vec())?;
    solve_hamiltonian(&h, k)
}

pub fn solve_hamiltonian(h: &Hamiltonian, k: usize) -> Result<SpectrumBundle> {
    let grid = *h.grid();
    let n = grid.n_points();
    if k < 2 || k >= n / 2 {
        return Err(invalid("k", format!("need 2 <= k < {}, got {k}", n / 2)));
    }
    let diag = h.field_free_diagonal();
    let off = h.off_diagonal();
    let sqrt_dx = grid.dx().sqrt();

    let mut pairs: Vec<Eigenpair> = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for index in 0..k {
        let energy = bisect_eigenvalue(&diag, off, index);
        let mut v = inverse_iteration(&diag, off, energy, &vectors);
        fix_sign(&mut v, SIGN_THRESHOLD * sqrt_dx);
        let residual = residual_norm(&diag, off, energy, &v);
        residuals.push(residual);
        let amps: Vec<f64> = v.iter().map(|x| x / sqrt_dx).collect();
        vectors.push(v);
        pairs.push(Eigenpair {
            index,
            energy,
            state: WaveFunction::from_real(grid, &amps)?,
        });
    }
    if residuals.iter().any(|r| !(*r < RESIDUAL_TOL)) {
        return Err(Error::Convergence { residuals });
    }
    let omega01 = pairs[1].energy - pairs[0].energy;
    Ok(SpectrumBundle { pairs, omega01 })
}

/// Normalized linear combination `sum_n c_n |n>`.
pub fn make_superposition(pairs: &[Eigenpair], coefficients: &[Complex64]) -> Result<WaveFunction> {
    if pairs.len() != coefficients.len() || pairs.is_empty() {
        return Err(invalid(
            "coefficients",
            format!("expected {} coefficients, got {}", pairs.len(), coefficients.len()),
        ));
    }
    let mut psi = WaveFunction::zeros(*pairs[0].state.grid());
    for (pair, &c) in pairs.iter().zip(coefficients) {
        psi.add_scaled(c, &pair.state)?;
    }
    psi.normalized()
}

/// Free tunnelling time `pi / omega01` from one well to the other.
pub fn half_period(omega01: f64) -> Result<f64> {
    if !(omega01 > 0.0) || !omega01.is_finite() {
        return Err(invalid("omega01", format!("must be positive, got {omega01}")));
    }
    Ok(PI / omega01)
}

/// Largest `|<i|j> - delta_ij|` over all pairs.
pub fn orthonormality_error(bundle: &SpectrumBundle) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in bundle.pairs.iter().enumerate() {
        for (j, b) in bundle.pairs.iter().enumerate().skip(i) {
            let ip = inner_product(&a.state, &b.state).expect("same grid");
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((ip - target).norm());
        }
    }
    worst
}

/// Number of eigenvalues strictly below `lambda`.
fn sturm_count(diag: &[f64], off: f64, lambda: f64) -> usize {
    let off2 = off * off;
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = 1.0;
    for (i, &d) in diag.iter().enumerate() {
        q = if i == 0 { d - lambda } else { d - lambda - off2 / q };
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn bisect_eigenvalue(diag: &[f64], off: f64, index: usize) -> f64 {
    let spread = 2.0 * off.abs();
    let mut lo = diag.iter().cloned().fold(f64::INFINITY, f64::min) - spread;
    let mut hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + spread;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pivoted LU of a real tridiagonal matrix (the `gttrf`/`gtts2` scheme).
struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(diag: &[f64], off: f64, shift: f64) -> Self {
        let n = diag.len();
        let mut dl = vec![off; n - 1];
        let mut d: Vec<f64> = diag.iter().map(|x| x - shift).collect();
        let mut du = vec![off; n - 1];
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n - 1];
        let scale = d.iter().fold(off.abs(), |m, x| m.max(x.abs()));
        let tiny = f64::EPSILON * scale;
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        Self {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn unit_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
    }
}

fn inverse_iteration(diag: &[f64], off: f64, energy: f64, lower: &[Vec<f64>]) -> Vec<f64> {
    let n = diag.len();
    let lu = TridiagonalLu::factor(diag, off, energy);
    // deterministic start vector with no special symmetry
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7).sin()).collect();
    unit_normalize(&mut v);
    for _ in 0..4 {
        lu.solve(&mut v);
        project_out(&mut v, lower);
        unit_normalize(&mut v);
    }
    project_out(&mut v, lower);
    unit_normalize(&mut v);
    v
}

/// Makes the leftmost amplitude above `threshold` positive.
fn fix_sign(v: &mut [f64], threshold: f64) {
    let first = v.iter().position(|x| x.abs() > threshold).unwrap_or(0);
    if v[first] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `||H v - E v||` for a unit vector in the plain Euclidean norm.
fn residual_norm(diag: &[f64], off: f64, energy: f64, v: &[f64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut r = (diag[i] - energy) * v[i];
        if i > 0 {
            r += off * v[i - 1];
        }
        if i + 1 < n {
            r += off * v[i + 1];
        }
        acc += r * r;
    }
    acc.sqrt()
}
