//! Finite-difference Hamiltonian `H = -1/2 d^2/dx^2 + V(x) + x * eps`.
//!
//! The dipole operator is `mu = -x`, so the field term `-mu * eps` enters
//! the diagonal as `+x * eps`. Hard walls sit just outside the first and
//! last node.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{potential_dqd, DoubleWellParams, Grid, WaveFunction};

#[derive(Debug, Clone)]
pub struct Hamiltonian {
    grid: Grid,
    potential: Vec<f64>,
    coords: Vec<f64>,
}

impl Hamiltonian {
    pub fn new(grid: Grid, potential: Vec<f64>) -> Result<Self> {
        if potential.len() != grid.n_points() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            coords: grid.coordinates(),
            grid,
            potential,
        })
    }

    pub fn double_well(grid: Grid, params: &DoubleWellParams) -> Self {
        let potential = potential_dqd(&grid, params);
        Self::new(grid, potential).expect("potential sampled on its own grid")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Constant off-diagonal element `-1 / (2 dx^2)`.
    pub fn off_diagonal(&self) -> f64 {
        -0.5 / (self.grid.dx() * self.grid.dx())
    }

    /// Diagonal element at node `i` for field strength `field`.
    #[inline]
    pub fn diagonal(&self, i: usize, field: f64) -> f64 {
        1.0 / (self.grid.dx() * self.grid.dx()) + self.potential[i] + self.coords[i] * field
    }

    pub fn field_free_diagonal(&self) -> Vec<f64> {
        (0..self.grid.n_points()).map(|i| self.diagonal(i, 0.0)).collect()
    }

    pub fn apply(&self, psi: &WaveFunction, field: f64) -> Result<WaveFunction> {
        if psi.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let a = psi.amplitudes();
        let n = a.len();
        let off = self.off_diagonal();
        let out = (0..n)
            .map(|i| {
                let mut acc = a[i] * self.diagonal(i, field);
                if i > 0 {
                    acc += a[i - 1] * off;
                }
                if i + 1 < n {
                    acc += a[i + 1] * off;
                }
                acc
            })
            .collect::<Vec<Complex64>>();
        WaveFunction::new(self.grid, out)
    }
}
