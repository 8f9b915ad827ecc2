//! Time propagation under `H(t) = T + V - mu eps(t)`.
//!
//! One step from `t` to `t + dt` applies
//! `exp(-i H(t+dt) dt/2) exp(-i H(t) dt/2)`, the enforced time-reversal
//! split. Each half-step exponential is the Cayley form
//! `(1 + i H dt/4)^-1 (1 - i H dt/4)`, which is unitary and is solved as a
//! tridiagonal system. Stepping backward uses the negated step and is the
//! exact inverse of the forward step up to rounding.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fields::ControlField;
use crate::grid::{dipole_imag, raw_inner, WaveFunction};
use crate::hamiltonian::Hamiltonian;

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_STRIDE: usize = 10;

/// How much of a trajectory to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Recording {
    pub stride: usize,
    pub keep_states: bool,
}

impl Default for Recording {
    fn default() -> Self {
        Self {
            stride: DEFAULT_STRIDE,
            keep_states: false,
        }
    }
}

impl Recording {
    pub fn every(stride: usize) -> Self {
        Self {
            stride: stride.max(1),
            keep_states: false,
        }
    }

    pub fn with_states(mut self) -> Self {
        self.keep_states = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Sample times; descending for backward propagation.
    pub times: Vec<f64>,
    /// `occupations[s][j] = |<phi_j|psi(times[s])>|^2`
    pub occupations: Vec<Vec<f64>>,
    /// Stored states, empty unless requested.
    pub states: Vec<WaveFunction>,
    /// Norm of the state at each sample.
    pub norms: Vec<f64>,
    pub final_state: WaveFunction,
}

impl Trajectory {
    /// Time series of the occupation of tracked state `j`.
    pub fn occupation_series(&self, j: usize) -> Vec<f64> {
        self.occupations.iter().map(|row| row[j]).collect()
    }

    pub fn max_occupation(&self, j: usize) -> f64 {
        self.occupations.iter().map(|row| row[j]).fold(0.0, f64::max)
    }

    pub fn max_norm_error(&self) -> f64 {
        self.norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// LU data of `1 + i tau H(field)` for the constant-off-diagonal Thomas sweep.
struct Factor {
    field: f64,
    tau: f64,
    ready: bool,
    diag: Vec<f64>,
    cprime: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
}

impl Factor {
    fn new(n: usize) -> Self {
        Self {
            field: 0.0,
            tau: 0.0,
            ready: false,
            diag: vec![0.0; n],
            cprime: vec![Complex64::new(0.0, 0.0); n],
            inv_pivot: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    fn matches(&self, field: f64, tau: f64) -> bool {
        self.ready && self.field.to_bits() == field.to_bits() && self.tau.to_bits() == tau.to_bits()
    }

    fn compute(&mut self, base: &[f64], coords: &[f64], off_real: f64, field: f64, tau: f64) {
        let off = Complex64::new(0.0, tau * off_real);
        // pivots obey m_i = 1 + i tau h_i + (tau o)^2 / m_{i-1}
        let kappa = tau * tau * off_real * off_real;
        let mut inv_prev = Complex64::new(0.0, 0.0);
        for (((d, cp), ip), (b, x)) in self
            .diag
            .iter_mut()
            .zip(self.cprime.iter_mut())
            .zip(self.inv_pivot.iter_mut())
            .zip(base.iter().zip(coords))
        {
            *d = b + x * field;
            let m = Complex64::new(1.0, tau * *d) + inv_prev * kappa;
            let inv = m.conj() / m.norm_sqr();
            *ip = inv;
            *cp = off * inv;
            inv_prev = inv;
        }
        self.field = field;
        self.tau = tau;
        self.ready = true;
    }

    /// Applies `(1 + i tau H)^-1 (1 - i tau H)` in place.
    fn apply(&self, psi: &mut [Complex64], rhs: &mut [Complex64], off_real: f64) {
        let n = psi.len();
        let tau = self.tau;
        let off = Complex64::new(0.0, tau * off_real);
        let mi = Complex64::new(0.0, -tau);
        for i in 0..n {
            let left = if i > 0 { psi[i - 1] } else { Complex64::new(0.0, 0.0) };
            let right = if i + 1 < n { psi[i + 1] } else { Complex64::new(0.0, 0.0) };
            let h = psi[i] * self.diag[i] + (left + right) * off_real;
            rhs[i] = psi[i] + mi * h;
        }
        let mut prev = Complex64::new(0.0, 0.0);
        for ((p, r), ip) in psi.iter_mut().zip(rhs.iter()).zip(&self.inv_pivot) {
            prev = (r - off * prev) * ip;
            *p = prev;
        }
        let mut next = psi[n - 1];
        for (p, cp) in psi[..n - 1].iter_mut().zip(&self.cprime[..n - 1]).rev() {
            *p -= cp * next;
            next = *p;
        }
    }
}

/// Cayley half-step engine. Keeps the two most recent factorizations, so
/// consecutive half-steps at the same mesh node share one.
struct Stepper {
    base: Vec<f64>,
    coords: Vec<f64>,
    off_real: f64,
    slots: [Factor; 2],
    oldest: usize,
    rhs: Vec<Complex64>,
}

impl Stepper {
    fn new(ham: &Hamiltonian) -> Self {
        let n = ham.grid().n_points();
        Self {
            base: ham.field_free_diagonal(),
            coords: ham.coords().to_vec(),
            off_real: ham.off_diagonal(),
            slots: [Factor::new(n), Factor::new(n)],
            oldest: 0,
            rhs: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    fn half_step(&mut self, states: &mut [&mut [Complex64]], field: f64, tau: f64) {
        let slot = match self.slots.iter().position(|f| f.matches(field, tau)) {
            Some(i) => {
                self.oldest = 1 - i;
                i
            }
            None => {
                let i = self.oldest;
                self.slots[i].compute(&self.base, &self.coords, self.off_real, field, tau);
                self.oldest = 1 - i;
                i
            }
        };
        for psi in states.iter_mut() {
            self.slots[slot].apply(psi, &mut self.rhs, self.off_real);
        }
    }

    /// Forward from `t` to `t + dt` when `dt > 0`; for `dt < 0` this is the
    /// inverse map from `t + |dt|` back to `t`, with `field_now` the field at
    /// the start of the step in the direction of travel.
    fn step(&mut self, states: &mut [&mut [Complex64]], field_now: f64, field_next: f64, dt: f64) {
        let tau = 0.25 * dt;
        self.half_step(states, field_now, tau);
        self.half_step(states, field_next, tau);
    }
}

#[derive(Debug, Clone)]
pub struct Propagator {
    ham: Hamiltonian,
}

impl Propagator {
    pub fn new(ham: Hamiltonian) -> Self {
        Self { ham }
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.ham
    }

    /// One step of length `dt` from a field value `field_now` to `field_next`.
    pub fn step(&self, psi: &WaveFunction, field_now: f64, field_next: f64, dt: f64) -> Result<WaveFunction> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::StepSize(dt));
        }
        self.check_grid(psi)?;
        if (psi.norm() - 1.0).abs() > 1e-6 {
            return Err(invalid("psi", format!("not normalized (norm {})", psi.norm())));
        }
        let mut out = psi.clone();
        Stepper::new(&self.ham).step(&mut [out.amplitudes_mut()], field_now, field_next, dt);
        Ok(out)
    }

    /// Forward propagation over the whole mesh of `field`.
    pub fn propagate(
        &self,
        psi0: &WaveFunction,
        field: &ControlField,
        tracked: &[WaveFunction],
        recording: Recording,
    ) -> Result<Trajectory> {
        self.run(psi0, field, tracked, recording, Direction::Forward)
    }

    /// Propagates `chi_t`, given at `t = T`, back to `t = 0`.
    pub fn backward_propagate(
        &self,
        chi_t: &WaveFunction,
        field: &ControlField,
        tracked: &[WaveFunction],
        recording: Recording,
    ) -> Result<Trajectory> {
        self.run(chi_t, field, tracked, recording, Direction::Backward)
    }

    /// State at `t = T` without recording anything.
    pub fn evolve(&self, psi0: &WaveFunction, field: &ControlField) -> Result<WaveFunction> {
        self.check_grid(psi0)?;
        let mut psi = psi0.clone();
        let samples = field.samples();
        let dt = field.mesh().dt();
        let mut stepper = Stepper::new(&self.ham);
        for k in 0..field.mesh().n_steps() {
            stepper.step(&mut [psi.amplitudes_mut()], samples[k], samples[k + 1], dt);
        }
        Ok(psi)
    }

    /// Propagates `chi` and `psi` together from `T` back to `0` and returns
    /// `Im <chi(t_k)| mu |psi(t_k)>` on every mesh node, together with
    /// `chi(0)` and `psi(0)` as reached by the backward sweep.
    pub fn backward_dipole_overlaps(
        &self,
        chi_t: &WaveFunction,
        psi_t: &WaveFunction,
        field: &ControlField,
    ) -> Result<(Vec<f64>, WaveFunction, WaveFunction)> {
        self.check_grid(chi_t)?;
        self.check_grid(psi_t)?;
        let mut chi = chi_t.clone();
        let mut psi = psi_t.clone();
        let samples = field.samples();
        let n = field.mesh().n_steps();
        let dt = field.mesh().dt();
        let x = self.ham.coords();
        let dx = self.ham.grid().dx();
        let mut overlaps = vec![0.0; n + 1];
        overlaps[n] = dipole_imag(chi.amplitudes(), psi.amplitudes(), x, dx);
        let mut stepper = Stepper::new(&self.ham);
        for k in (0..n).rev() {
            stepper.step(
                &mut [chi.amplitudes_mut(), psi.amplitudes_mut()],
                samples[k + 1],
                samples[k],
                -dt,
            );
            overlaps[k] = dipole_imag(chi.amplitudes(), psi.amplitudes(), x, dx);
        }
        Ok((overlaps, chi, psi))
    }

    /// Immediate-feedback forward sweep.
    ///
    /// `chi` is re-propagated forward from `chi_0` under `old_field`, which
    /// reproduces the backward trajectory. At every node the new field value
    /// `keep * old_k - step * f_k * Im <chi(t_k)| mu |psi(t_k)>` is formed
    /// from the state `psi` being propagated under the new field itself, and
    /// that value is held over the following step. `keep = 0, step = 1/alpha`
    /// is the plain control equation.
    pub fn feedback_sweep(
        &self,
        psi_0: &WaveFunction,
        chi_0: &WaveFunction,
        old_field: &ControlField,
        envelope: &[f64],
        keep: f64,
        step: f64,
    ) -> Result<Vec<f64>> {
        self.check_grid(psi_0)?;
        self.check_grid(chi_0)?;
        let n = old_field.mesh().n_steps();
        if envelope.len() != n + 1 {
            return Err(Error::MeshMismatch {
                expected: n + 1,
                found: envelope.len(),
            });
        }
        let old = old_field.samples();
        let dt = old_field.mesh().dt();
        let x = self.ham.coords();
        let dx = self.ham.grid().dx();
        let mut psi = psi_0.clone();
        let mut chi = chi_0.clone();
        let mut new = vec![0.0; n + 1];
        let mut psi_stepper = Stepper::new(&self.ham);
        let mut chi_stepper = Stepper::new(&self.ham);
        for k in 0..=n {
            let g = dipole_imag(chi.amplitudes(), psi.amplitudes(), x, dx);
            new[k] = keep * old[k] - step * envelope[k] * g;
            if k == n {
                break;
            }
            psi_stepper.step(&mut [psi.amplitudes_mut()], new[k], new[k], dt);
            chi_stepper.step(&mut [chi.amplitudes_mut()], old[k], old[k + 1], dt);
        }
        Ok(new)
    }

    fn check_grid(&self, psi: &WaveFunction) -> Result<()> {
        if psi.grid() != self.ham.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn run(
        &self,
        start: &WaveFunction,
        field: &ControlField,
        tracked: &[WaveFunction],
        recording: Recording,
        direction: Direction,
    ) -> Result<Trajectory> {
        self.check_grid(start)?;
        for phi in tracked {
            self.check_grid(phi)?;
        }
        let mesh = field.mesh();
        let n = mesh.n_steps();
        let samples = field.samples();
        let stride = recording.stride.max(1);
        let dx = self.ham.grid().dx();

        let mut traj = Trajectory {
            times: Vec::with_capacity(n / stride + 2),
            occupations: Vec::with_capacity(n / stride + 2),
            states: Vec::new(),
            norms: Vec::with_capacity(n / stride + 2),
            final_state: start.clone(),
        };
        let mut psi = start.clone();
        let record = |traj: &mut Trajectory, psi: &WaveFunction, k: usize| {
            traj.times.push(mesh.time(k));
            traj.occupations.push(
                tracked
                    .iter()
                    .map(|phi| (raw_inner(phi.amplitudes(), psi.amplitudes()) * dx).norm_sqr())
                    .collect(),
            );
            traj.norms.push(psi.norm());
            if recording.keep_states {
                traj.states.push(psi.clone());
            }
        };

        let mut stepper = Stepper::new(&self.ham);
        match direction {
            Direction::Forward => {
                record(&mut traj, &psi, 0);
                for k in 0..n {
                    stepper.step(&mut [psi.amplitudes_mut()], samples[k], samples[k + 1], mesh.dt());
                    if (k + 1) % stride == 0 || k + 1 == n {
                        record(&mut traj, &psi, k + 1);
                    }
                }
            }
            Direction::Backward => {
                record(&mut traj, &psi, n);
                for k in (0..n).rev() {
                    stepper.step(&mut [psi.amplitudes_mut()], samples[k + 1], samples[k], -mesh.dt());
                    if (n - k).is_multiple_of(stride) || k == 0 {
                        record(&mut traj, &psi, k);
                    }
                }
            }
        }
        traj.final_state = psi;
        Ok(traj)
    }
}

#[derive(Debug, Clone, Copy)]
enum Direction {
    Forward,
    Backward,
}
