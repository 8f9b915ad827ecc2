//! Uniform real-space mesh, the double-well potential and wavefunctions.
//!
//! All quadratures are plain Riemann sums with weight `dx`. With the
//! three-point Laplacian this makes the discrete Hamiltonian exactly
//! self-adjoint under [`inner_product`].

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    dx: f64,
}

impl Grid {
    /// Uniform mesh with both endpoints included.
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max || n_points < MIN_POINTS {
            return Err(Error::InvalidBounds {
                x_min,
                x_max,
                n_points,
            });
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
            dx: (x_max - x_min) / (n_points - 1) as f64,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Node coordinate. Computed as a weighted mean of the endpoints so that
    /// a grid with `x_min = -x_max` is mirror symmetric bit for bit.
    pub fn x(&self, i: usize) -> f64 {
        let last = (self.n_points - 1) as f64;
        (self.x_min * (last - i as f64) + self.x_max * i as f64) / last
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.x_min == -self.x_max
    }
}

impl Default for Grid {
    /// `[-12, 12]` with 481 nodes, `dx = 0.05`.
    fn default() -> Self {
        Self::new(-12.0, 12.0, 481).expect("default grid is valid")
    }
}

pub fn build_grid(x_min: f64, x_max: f64, n_points: usize) -> Result<Grid> {
    Grid::new(x_min, x_max, n_points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWellParams {
    pub omega0: f64,
    pub d: f64,
}

impl DoubleWellParams {
    pub fn new(omega0: f64, d: f64) -> Result<Self> {
        if !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(invalid("omega0", format!("must be positive, got {omega0}")));
        }
        if !(d >= 0.0 && d.is_finite()) {
            return Err(invalid("d", format!("must be non-negative, got {d}")));
        }
        Ok(Self { omega0, d })
    }

    /// `(omega0^2 / 2) * min{(x - d/2)^2, (x + d/2)^2}`
    pub fn value(&self, x: f64) -> f64 {
        let half = 0.5 * self.d;
        let left = (x + half) * (x + half);
        let right = (x - half) * (x - half);
        0.5 * self.omega0 * self.omega0 * left.min(right)
    }
}

impl Default for DoubleWellParams {
    fn default() -> Self {
        Self { omega0: 0.5, d: 6.0 }
    }
}

pub fn potential_dqd(grid: &Grid, params: &DoubleWellParams) -> Vec<f64> {
    (0..grid.n_points()).map(|i| params.value(grid.x(i))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    amplitudes: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, amplitudes })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            amplitudes: vec![Complex64::new(0.0, 0.0); grid.n_points()],
        }
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.dx() * self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let inv = 1.0 / n;
        self.amplitudes.iter_mut().for_each(|a| *a *= inv);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.amplitudes.iter_mut().for_each(|a| *a *= factor);
    }

    /// `self += factor * other`
    pub fn add_scaled(&mut self, factor: Complex64, other: &WaveFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        for (a, b) in self.amplitudes.iter_mut().zip(&other.amplitudes) {
            *a += factor * b;
        }
        Ok(())
    }

    /// Squared distance `||self - other||^2`.
    pub fn distance_sqr(&self, other: &WaveFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.grid.dx()
            * self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>())
    }
}

impl Index<usize> for WaveFunction {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.amplitudes[i]
    }
}

impl IndexMut<usize> for WaveFunction {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.amplitudes[i]
    }
}

/// `<a|b> = sum_i conj(a_i) b_i dx`
pub fn inner_product(a: &WaveFunction, b: &WaveFunction) -> Result<Complex64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    Ok(raw_inner(&a.amplitudes, &b.amplitudes) * a.grid.dx())
}

/// Dipole matrix element `<a| -x |b>`.
pub fn dipole_coupling(a: &WaveFunction, b: &WaveFunction) -> Result<Complex64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let grid = a.grid;
    let sum: Complex64 = a
        .amplitudes
        .iter()
        .zip(&b.amplitudes)
        .enumerate()
        .map(|(i, (x, y))| x.conj() * y * grid.x(i))
        .sum();
    Ok(-sum * grid.dx())
}

pub(crate) fn raw_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `Im sum_i conj(a_i) (-x_i) b_i dx`, without allocating.
pub(crate) fn dipole_imag(a: &[Complex64], b: &[Complex64], x: &[f64], dx: f64) -> f64 {
    let mut acc = 0.0;
    for ((u, v), &xi) in a.iter().zip(b).zip(x) {
        // Im(conj(u) v) = u.re v.im - u.im v.re
        acc += xi * (u.re * v.im - u.im * v.re);
    }
    -acc * dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn spacing_from_endpoints() {
        assert_eq!(Grid::new(-12.0, 12.0, 481).unwrap().dx(), 24.0 / 480.0);
        assert!((Grid::new(-12.0, 12.0, 481).unwrap().dx() - 0.05).abs() < 1e-15);
        assert_eq!(Grid::new(-12.0, 12.0, 17).unwrap().dx(), 1.5);
    }

    #[test]
    fn endpoints_are_nodes() {
        let g = Grid::default();
        assert_eq!(g.x(0), -12.0);
        assert_eq!(g.x(480), 12.0);
        assert_eq!(g.x(240), 0.0);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(matches!(
            Grid::new(0.0, -1.0, 16),
            Err(Error::InvalidBounds { .. })
        ));
        assert!(Grid::new(1.0, 1.0, 100).is_err());
        // three nodes are below the minimum mesh size
        assert!(Grid::new(-12.0, 12.0, 3).is_err());
    }

    #[test]
    fn potential_reference_values() {
        let p = DoubleWellParams::default();
        assert_eq!(p.value(3.0), 0.0);
        assert_eq!(p.value(-3.0), 0.0);
        assert!((p.value(0.0) - 1.125).abs() < 1e-15);
        let single = DoubleWellParams::new(0.5, 0.0).unwrap();
        assert!((single.value(2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn potential_is_mirror_symmetric_exactly() {
        let g = Grid::default();
        let v = potential_dqd(&g, &DoubleWellParams::default());
        let n = v.len();
        for i in 0..n {
            assert_eq!(v[i], v[n - 1 - i]);
            assert!(v[i] >= 0.0);
        }
    }

    #[test]
    fn rejects_bad_well_params() {
        assert!(DoubleWellParams::new(0.0, 6.0).is_err());
        assert!(DoubleWellParams::new(0.5, -1.0).is_err());
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = WaveFunction::zeros(Grid::new(-1.0, 1.0, 16).unwrap());
        let b = WaveFunction::zeros(Grid::new(-1.0, 1.0, 17).unwrap());
        assert_eq!(inner_product(&a, &b), Err(Error::GridMismatch));
        assert_eq!(dipole_coupling(&a, &b), Err(Error::GridMismatch));
    }

    #[test]
    fn zero_state_cannot_be_normalized() {
        let mut z = WaveFunction::zeros(Grid::default());
        assert_eq!(z.normalize(), Err(Error::ZeroNorm));
    }

    #[test]
    fn normalized_state_has_unit_overlap() {
        let g = Grid::default();
        let amps = (0..g.n_points())
            .map(|i| {
                let x = g.x(i);
                c((-(x - 1.0).powi(2)).exp(), 0.3 * x)
            })
            .collect();
        let psi = WaveFunction::new(g, amps).unwrap().normalized().unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        let ip = inner_product(&psi, &psi).unwrap();
        assert!((ip - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dipole_of_even_density_vanishes() {
        let g = Grid::default();
        let vals: Vec<f64> = (0..g.n_points()).map(|i| (-g.x(i).powi(2)).exp()).collect();
        let psi = WaveFunction::from_real(g, &vals).unwrap().normalized().unwrap();
        assert!(dipole_coupling(&psi, &psi).unwrap().norm() < 1e-14);
    }

    #[test]
    fn dipole_imag_matches_full_element() {
        let g = Grid::new(-3.0, 3.0, 40).unwrap();
        let a: Vec<_> = (0..40).map(|i| c((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let b: Vec<_> = (0..40).map(|i| c((i as f64 * 0.7).cos(), (i as f64).sin())).collect();
        let wa = WaveFunction::new(g, a.clone()).unwrap();
        let wb = WaveFunction::new(g, b.clone()).unwrap();
        let full = dipole_coupling(&wa, &wb).unwrap();
        let fast = dipole_imag(&a, &b, &g.coordinates(), g.dx());
        assert!((full.im - fast).abs() < 1e-13);
    }

    fn state_strategy(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
            .prop_map(|v| v.into_iter().map(|(r, i)| c(r, i)).collect())
    }

    proptest! {
        #[test]
        fn inner_product_is_conjugate_symmetric(a in state_strategy(32), b in state_strategy(32)) {
            let g = Grid::new(-2.0, 2.0, 32).unwrap();
            let wa = WaveFunction::new(g, a).unwrap();
            let wb = WaveFunction::new(g, b).unwrap();
            let ab = inner_product(&wa, &wb).unwrap();
            let ba = inner_product(&wb, &wa).unwrap();
            prop_assert!((ab - ba.conj()).norm() < 1e-14);
        }

        #[test]
        fn inner_product_is_linear(
            a in state_strategy(32),
            b in state_strategy(32),
            c_ in state_strategy(32),
            re in -2.0f64..2.0,
            im in -2.0f64..2.0,
        ) {
            let g = Grid::new(-2.0, 2.0, 32).unwrap();
            let alpha = c(re, im);
            let wa = WaveFunction::new(g, a).unwrap();
            let wb = WaveFunction::new(g, b).unwrap();
            let wc = WaveFunction::new(g, c_).unwrap();
            let mut combo = wc.clone();
            combo.add_scaled(alpha, &wb).unwrap();
            let lhs = inner_product(&wa, &combo).unwrap();
            let rhs = alpha * inner_product(&wa, &wb).unwrap() + inner_product(&wa, &wc).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-13);
        }
    }
}
