use crate::eigen::{solve_hamiltonian, SpectrumBundle, DEFAULT_STATES};
use crate::error::{invalid, Result};
use crate::grid::{DoubleWellParams, Grid, WaveFunction};
use crate::hamiltonian::Hamiltonian;
use crate::propagate::Propagator;

/// Largest allowed amplitude of `|0>` and `|1>` on the box edges.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;

/// A discretized double dot together with its low-lying spectrum.
#[derive(Debug, Clone)]
pub struct DoubleDot {
    params: DoubleWellParams,
    propagator: Propagator,
    spectrum: SpectrumBundle,
}

impl DoubleDot {
    pub fn new(grid: Grid, params: DoubleWellParams, n_states: usize) -> Result<Self> {
        let ham = Hamiltonian::double_well(grid, &params);
        let spectrum = solve_hamiltonian(&ham, n_states)?;
        for n in 0..2 {
            let edge = spectrum.boundary_amplitude(n);
            if edge > BOUNDARY_TOLERANCE {
                return Err(invalid(
                    "grid",
                    format!("box too small: |{n}> has amplitude {edge:.2e} at the boundary"),
                ));
            }
        }
        Ok(Self {
            params,
            propagator: Propagator::new(ham),
            spectrum,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.propagator.hamiltonian().grid()
    }

    pub fn params(&self) -> &DoubleWellParams {
        &self.params
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub fn spectrum(&self) -> &SpectrumBundle {
        &self.spectrum
    }

    pub fn ground(&self) -> WaveFunction {
        self.spectrum.state(0).clone()
    }

    pub fn left(&self) -> WaveFunction {
        self.spectrum.left()
    }

    pub fn right(&self) -> WaveFunction {
        self.spectrum.right()
    }

    /// Eigenstates `|0>..|k-1>` followed by `|L>` and `|R>`.
    pub fn tracked_basis(&self) -> Vec<WaveFunction> {
        let mut basis = self.spectrum.states();
        basis.push(self.left());
        basis.push(self.right());
        basis
    }
}

impl DoubleDot {
    /// Default box, `omega0 = 0.5`, `d = 6`, twelve states.
    pub fn standard() -> Result<Self> {
        Self::new(Grid::default(), DoubleWellParams::default(), DEFAULT_STATES)
    }
}

/// The two optimization problems of the charge qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// `|0> -> |L>`
    Prepare,
    /// `|L> -> |R>`
    Transfer,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Prepare => "prepare",
            Task::Transfer => "transfer",
        }
    }

    /// Initial and target state.
    pub fn endpoints(&self, system: &DoubleDot) -> (WaveFunction, WaveFunction) {
        match self {
            Task::Prepare => (system.ground(), system.left()),
            Task::Transfer => (system.left(), system.right()),
        }
    }
}

impl std::str::FromStr for Task {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prepare" => Ok(Task::Prepare),
            "transfer" => Ok(Task::Transfer),
            other => Err(invalid("task", format!("expected prepare or transfer, got {other:?}"))),
        }
    }
}
