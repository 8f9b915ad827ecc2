//! One optimization per value of a swept parameter.

use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::oct::{optimize, OptimizationConfig, TargetSpec};
use crate::par::*;
use crate::system::{DoubleDot, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    /// Spectral cutoff `omega_th`.
    Threshold,
    /// Field length `T`.
    Length,
    /// Fluence `E0`.
    Fluence,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Threshold => "omega_th",
            SweepParameter::Length => "T",
            SweepParameter::Fluence => "E0",
        }
    }

    /// `base` with the swept parameter set to `value`.
    pub fn apply(&self, base: &OptimizationConfig, value: f64) -> OptimizationConfig {
        let mut config = base.clone();
        match self {
            SweepParameter::Threshold => config.omega_th = value,
            SweepParameter::Length => config.t_final = value,
            SweepParameter::Fluence => config.fluence = value,
        }
        config
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega_th" | "threshold" => Ok(SweepParameter::Threshold),
            "T" | "length" => Ok(SweepParameter::Length),
            "E0" | "fluence" => Ok(SweepParameter::Fluence),
            other => Err(invalid(
                "sweep.parameter",
                format!("expected omega_th, T or E0, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub yield_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs the sweep with values distributed over the worker pool. Results
/// come back in the order of `values`; `on_point` sees each point as soon as
/// it finishes, in completion order.
pub fn run_sweep(
    system: &DoubleDot,
    task: Task,
    base: &OptimizationConfig,
    parameter: SweepParameter,
    values: &[f64],
    on_point: impl Fn(&SweepPoint) + Sync,
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(invalid("sweep.values", "empty"));
    }
    let configs: Vec<OptimizationConfig> = values.iter().map(|&v| parameter.apply(base, v)).collect();
    for c in &configs {
        c.validate()?;
    }
    let (start, target) = task.endpoints(system);
    let target = TargetSpec::new(target)?;
    values
        .par_iter()
        .zip(configs.par_iter())
        .map(|(&value, config)| {
            let result = optimize(system.propagator(), &start, &target, config)?;
            let point = SweepPoint {
                value,
                yield_value: result.final_yield,
                iterations: result.iterations(),
                converged: result.converged,
            };
            on_point(&point);
            Ok(point)
        })
        .collect()
}
