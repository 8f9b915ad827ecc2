//! Fixed-fluence forward-backward optimal control.
//!
//! Each iteration propagates `psi` forward from the initial state,
//! projects onto the target to obtain `chi(T)`, propagates `chi` (and `psi`)
//! backward, and forms the update
//!
//! ```text
//! eps_new(t) = -(f(t) / alpha) Im <chi(t)| mu |psi(t)>
//! ```
//!
//! with `alpha` fixed by the fluence constraint.
//!
//! Two schemes assemble the candidate field:
//!
//! * [`UpdateScheme::ImmediateFeedback`] (default): `chi` is re-propagated
//!   forward under the old field while `psi` is propagated under the field
//!   being built, and at every node
//!
//!   ```text
//!   eps_new(t) = eps(t) + s [ -f(t) Im <chi(t)| mu |psi_new(t)> - beta eps(t) ]
//!   ```
//!
//!   where `beta = <eps, -f Im<chi|mu|psi>> / <eps, eps>` removes the part
//!   of the update that only changes the fluence.
//! * [`UpdateScheme::Alternating`]: the field `eps_new` of the control
//!   equation is blended with the current one, `(1 - g) eps + g eps_new`.
//!
//! Every candidate is renormalized to the fixed fluence, low-pass filtered
//! and renormalized again when a threshold is set, and accepted only if the
//! yield increases. A rejected candidate halves the step (`s` or `g`); an
//! accepted one doubles it back towards its configured value.

use crate::error::{invalid, Error, Result};
use crate::fields::{
    apply_frequency_filter, envelope_samples, sample_fluence, ControlField, EnvelopeParams, TimeMesh,
};
use crate::grid::{dipole_coupling, inner_product, WaveFunction};
use crate::propagate::{Propagator, Trajectory, DEFAULT_DT};

/// Step reductions tried before the iteration is declared stalled.
const MAX_HALVINGS: i32 = 12;

pub const DEFAULT_FEEDBACK_STEP: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct TargetSpec {
    target: WaveFunction,
}

impl TargetSpec {
    pub fn new(target: WaveFunction) -> Result<Self> {
        let norm = target.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(invalid("target", format!("must be normalized, norm is {norm}")));
        }
        Ok(Self { target })
    }

    pub fn state(&self) -> &WaveFunction {
        &self.target
    }

    /// `|Phi><Phi|psi>`
    pub fn project(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        let c = inner_product(&self.target, psi)?;
        let mut out = self.target.clone();
        out.scale(c);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationConfig {
    pub t_final: f64,
    pub fluence: f64,
    /// Spectral cutoff; `f64::INFINITY` disables the filter.
    pub omega_th: f64,
    pub envelope: EnvelopeParams,
    pub initial_frequency: f64,
    pub max_iterations: usize,
    pub yield_tolerance: f64,
    pub dt: f64,
    pub scheme: UpdateScheme,
    /// Largest immediate-feedback step `s`.
    pub feedback_step: f64,
}

/// How the candidate field of an iteration is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateScheme {
    /// New field built during a forward sweep against the stored `chi`,
    /// using the state propagated under the new field itself.
    #[default]
    ImmediateFeedback,
    /// New field built from `chi` and `psi` of the previous field.
    Alternating,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            t_final: 100.0,
            fluence: 0.3,
            omega_th: f64::INFINITY,
            envelope: EnvelopeParams::default(),
            initial_frequency: 0.5,
            max_iterations: 500,
            yield_tolerance: 1e-7,
            dt: DEFAULT_DT,
            scheme: UpdateScheme::default(),
            feedback_step: DEFAULT_FEEDBACK_STEP,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(invalid("T", format!("must be positive, got {}", self.t_final)));
        }
        if !(self.fluence > 0.0 && self.fluence.is_finite()) {
            return Err(invalid("E0", format!("must be positive, got {}", self.fluence)));
        }
        if !(self.omega_th > 0.0) {
            return Err(invalid("omega_th", format!("must be positive, got {}", self.omega_th)));
        }
        if self.max_iterations < 1 {
            return Err(invalid("max_iterations", "must be at least 1"));
        }
        if !(self.yield_tolerance >= 0.0) {
            return Err(invalid("yield_tolerance", "must be non-negative"));
        }
        if !(self.dt > 0.0 && self.dt < self.t_final) {
            return Err(Error::StepSize(self.dt));
        }
        if !(self.feedback_step > 0.0 && self.feedback_step.is_finite()) {
            return Err(invalid("feedback_step", format!("must be positive, got {}", self.feedback_step)));
        }
        EnvelopeParams::new(self.envelope.a, self.envelope.b)?;
        Ok(())
    }

    pub fn mesh(&self) -> Result<TimeMesh> {
        TimeMesh::with_step(self.t_final, self.dt)
    }

    pub fn is_filtered(&self) -> bool {
        self.omega_th.is_finite()
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub final_field: ControlField,
    /// Yield of the initial guess followed by one entry per iteration.
    pub yield_history: Vec<f64>,
    pub alpha_history: Vec<f64>,
    pub final_yield: f64,
    pub converged: bool,
}

impl OptimizationResult {
    pub fn iterations(&self) -> usize {
        self.yield_history.len() - 1
    }
}

/// `A sin(w t) f(t)` with `A` fixed by the fluence.
pub fn initial_guess(config: &OptimizationConfig, mesh: &TimeMesh) -> Result<ControlField> {
    let env = envelope_samples(mesh, &config.envelope);
    let samples = mesh
        .times()
        .iter()
        .zip(&env)
        .map(|(t, f)| f * (config.initial_frequency * t).sin())
        .collect();
    let field = ControlField::new(*mesh, samples)?;
    if !(field.fluence() > 0.0) {
        return Err(invalid("initial_guess", "envelope and carrier leave no field"));
    }
    field.with_fluence(config.fluence)
}

/// `|<psi|Phi>|^2`
pub fn compute_yield(psi_final: &WaveFunction, target: &TargetSpec) -> f64 {
    inner_product(target.state(), psi_final)
        .map(|c| c.norm_sqr())
        .unwrap_or(0.0)
        .min(1.0)
}

/// `alpha = sqrt(int raw^2 dt / E0)`
pub fn solve_alpha(raw_overlap: &[f64], fluence: f64, dt: f64) -> Result<f64> {
    if !(fluence > 0.0) {
        return Err(invalid("E0", format!("must be positive, got {fluence}")));
    }
    if raw_overlap.len() < 2 {
        return Err(invalid("raw_overlap", "need at least two samples"));
    }
    let integral = sample_fluence(raw_overlap, dt);
    if !(integral > 0.0) {
        return Err(Error::DegenerateOverlap);
    }
    Ok((integral / fluence).sqrt())
}

/// `eps_k = -(f_k / alpha) Im <chi_k| mu |psi_k>` from precomputed overlaps.
pub fn field_from_overlap(overlap: &[f64], alpha: f64, envelope: &[f64], mesh: &TimeMesh) -> Result<ControlField> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha", format!("must be positive, got {alpha}")));
    }
    if overlap.len() != envelope.len() {
        return Err(Error::MeshMismatch {
            expected: envelope.len(),
            found: overlap.len(),
        });
    }
    let samples = overlap
        .iter()
        .zip(envelope)
        .map(|(g, f)| -f * g / alpha)
        .collect();
    ControlField::new(*mesh, samples)
}

/// Field update from full-resolution trajectories with stored states.
/// `chi_traj` may come from a backward propagation (descending times).
pub fn field_update(
    chi_traj: &Trajectory,
    psi_traj: &Trajectory,
    alpha: f64,
    envelope: &[f64],
) -> Result<ControlField> {
    let chi = ascending_states(chi_traj);
    let psi = ascending_states(psi_traj);
    if chi.len() != psi.len() || chi.len() != envelope.len() || chi.len() < 2 {
        return Err(invalid(
            "trajectories",
            format!(
                "need aligned full-resolution states: chi {}, psi {}, envelope {}",
                chi.len(),
                psi.len(),
                envelope.len()
            ),
        ));
    }
    let times = ascending_times(psi_traj);
    let chi_times = ascending_times(chi_traj);
    if times
        .iter()
        .zip(&chi_times)
        .any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
    {
        return Err(invalid("trajectories", "sample times differ"));
    }
    let overlap = chi
        .iter()
        .zip(&psi)
        .map(|(c, p)| dipole_coupling(c, p).map(|z| z.im))
        .collect::<Result<Vec<_>>>()?;
    let mesh = TimeMesh::new(times[times.len() - 1], times.len() - 1)?;
    field_from_overlap(&overlap, alpha, envelope, &mesh)
}

fn ascending_states(t: &Trajectory) -> Vec<&WaveFunction> {
    let mut s: Vec<_> = t.states.iter().collect();
    if t.times.len() > 1 && t.times[0] > t.times[t.times.len() - 1] {
        s.reverse();
    }
    s
}

fn ascending_times(t: &Trajectory) -> Vec<f64> {
    let mut s = t.times.clone();
    if s.len() > 1 && s[0] > s[s.len() - 1] {
        s.reverse();
    }
    s
}

/// Per-iteration progress passed to an observer.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub iteration: usize,
    pub yield_value: f64,
    pub alpha: f64,
    /// Step of the accepted candidate: `s` or the blend factor `g`.
    pub step: f64,
}

pub fn optimize(
    propagator: &Propagator,
    initial: &WaveFunction,
    target: &TargetSpec,
    config: &OptimizationConfig,
) -> Result<OptimizationResult> {
    optimize_with_observer(propagator, initial, target, config, |_| {})
}

pub fn optimize_with_observer(
    propagator: &Propagator,
    initial: &WaveFunction,
    target: &TargetSpec,
    config: &OptimizationConfig,
    mut observer: impl FnMut(&IterationRecord),
) -> Result<OptimizationResult> {
    config.validate()?;
    if (initial.norm() - 1.0).abs() > 1e-10 {
        return Err(invalid("initial", format!("must be normalized, norm is {}", initial.norm())));
    }
    let mesh = config.mesh()?;
    let envelope = envelope_samples(&mesh, &config.envelope);
    let constrain = |field: ControlField| -> Result<ControlField> {
        let field = field.with_fluence(config.fluence)?;
        if config.is_filtered() {
            apply_frequency_filter(&field, config.omega_th)?.with_fluence(config.fluence)
        } else {
            Ok(field)
        }
    };

    let mut field = constrain(initial_guess(config, &mesh)?)?;
    let mut psi_t = propagator.evolve(initial, &field)?;
    let mut current = compute_yield(&psi_t, target);
    let mut yield_history = vec![current];
    let mut alpha_history = Vec::new();
    let full_step = match config.scheme {
        UpdateScheme::ImmediateFeedback => config.feedback_step,
        UpdateScheme::Alternating => 1.0,
    };
    let min_step = full_step * 0.5f64.powi(MAX_HALVINGS);
    let mut step = full_step;
    let mut converged = false;
    let n = mesh.n_steps();

    for iteration in 1..=config.max_iterations {
        let chi_t = target.project(&psi_t)?;
        let (overlap, chi_0, _) = propagator.backward_dipole_overlaps(&chi_t, &psi_t, &field)?;
        let raw: Vec<f64> = overlap.iter().zip(&envelope).map(|(g, f)| f * g).collect();
        let alpha = match solve_alpha(&raw, config.fluence, mesh.dt()) {
            Ok(a) => a,
            Err(Error::DegenerateOverlap) => {
                converged = current >= 1.0 - config.yield_tolerance;
                break;
            }
            Err(e) => return Err(e),
        };
        alpha_history.push(alpha);
        let old = field.samples();
        let beta = {
            let along: f64 = old[..n].iter().zip(&raw[..n]).map(|(e, r)| -e * r).sum();
            let norm: f64 = old[..n].iter().map(|e| e * e).sum();
            along / norm
        };
        let gradient = field_from_overlap(&overlap, alpha, &envelope, &mesh)?;

        let mut accepted = None;
        while accepted.is_none() && step >= min_step {
            let samples = match config.scheme {
                UpdateScheme::ImmediateFeedback => {
                    propagator.feedback_sweep(initial, &chi_0, &field, &envelope, 1.0 - step * beta, step)?
                }
                UpdateScheme::Alternating => old
                    .iter()
                    .zip(gradient.samples())
                    .map(|(e, g)| (1.0 - step) * e + step * g)
                    .collect(),
            };
            if let Ok(trial) = ControlField::new(mesh, samples).and_then(&constrain) {
                let psi = propagator.evolve(initial, &trial)?;
                let value = compute_yield(&psi, target);
                if value > current {
                    accepted = Some((trial, psi, value));
                    break;
                }
            }
            step *= 0.5;
        }

        let Some((trial, psi_trial, value)) = accepted else {
            // no ascent along the update direction: stationary to resolution
            converged = true;
            break;
        };
        let gain = value - current;
        observer(&IterationRecord {
            iteration,
            yield_value: value,
            alpha,
            step,
        });
        field = trial;
        psi_t = psi_trial;
        current = value;
        yield_history.push(current);
        step = (2.0 * step).min(full_step);
        if gain < config.yield_tolerance {
            converged = true;
            break;
        }
    }

    Ok(OptimizationResult {
        final_field: field,
        yield_history,
        alpha_history,
        final_yield: current,
        converged,
    })
}
