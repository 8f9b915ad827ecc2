//! n-fold charge switching with a transfer field and its time inversion.

use crate::error::{invalid, Result};
use crate::fields::{concatenate, time_invert, ControlField};
use crate::grid::WaveFunction;
use crate::oct::{optimize, OptimizationConfig, TargetSpec};
use crate::par::*;
use crate::propagate::{Propagator, Recording};
use crate::system::{DoubleDot, Task};

/// Chain lengths reported by default.
pub const DEFAULT_CHAIN_LENGTHS: [usize; 6] = [1, 2, 5, 10, 50, 100];

#[derive(Debug, Clone)]
pub struct SequenceResult {
    pub n_processes: usize,
    /// Occupation of the segment target at the end of each segment.
    pub per_segment_yield: Vec<f64>,
    /// `single_yield^(k+1)` for segment `k`.
    pub power_law_prediction: Vec<f64>,
    pub single_yield: f64,
    pub field_total: ControlField,
    /// Largest deviation of the norm from one at the segment boundaries.
    pub max_norm_error: f64,
}

impl SequenceResult {
    pub fn final_yield(&self) -> f64 {
        self.per_segment_yield[self.n_processes - 1]
    }
}

/// `n` segments alternating `base` and its time inversion, starting with `base`.
pub fn build_sequence(base: &ControlField, n: usize) -> Result<ControlField> {
    if n < 1 {
        return Err(invalid("n", "need at least one segment"));
    }
    let inverted = time_invert(base);
    let segments: Vec<ControlField> = (0..n)
        .map(|k| if k % 2 == 0 { base.clone() } else { inverted.clone() })
        .collect();
    concatenate(&segments)
}

/// `J^n`
pub fn power_law_prediction(single_yield: f64, n: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&single_yield) {
        return Err(invalid("single_yield", format!("must lie in [0, 1], got {single_yield}")));
    }
    if n < 1 {
        return Err(invalid("n", "must be at least 1"));
    }
    Ok(single_yield.powi(n as i32))
}

/// Propagates `psi0` once through the whole chain and measures the
/// occupation of `forward_target` after odd segments and of `backward_target`
/// after even ones.
pub fn run_sequence(
    propagator: &Propagator,
    psi0: &WaveFunction,
    base: &ControlField,
    n: usize,
    forward_target: &WaveFunction,
    backward_target: &WaveFunction,
) -> Result<SequenceResult> {
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(invalid("psi0", format!("must be normalized, norm is {}", psi0.norm())));
    }
    let chain = build_sequence(base, n)?;
    let tracked = [forward_target.clone(), backward_target.clone()];
    let traj = propagator.propagate(psi0, &chain, &tracked, Recording::every(base.mesh().n_steps()))?;
    let per_segment_yield: Vec<f64> = (0..n)
        .map(|k| traj.occupations[k + 1][k % 2].min(1.0))
        .collect();
    let single_yield = per_segment_yield[0];
    let power_law_prediction = (1..=n)
        .map(|m| power_law_prediction(single_yield, m))
        .collect::<Result<_>>()?;
    Ok(SequenceResult {
        n_processes: n,
        per_segment_yield,
        power_law_prediction,
        single_yield,
        field_total: chain,
        max_norm_error: traj.max_norm_error(),
    })
}

/// One cell of the chain-yield table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub fluence: f64,
    pub omega_th: f64,
    pub n: usize,
    pub computed_yield: f64,
    pub power_law_yield: f64,
}

/// Optimizes a transfer field for every `(E0, omega_th)` pair and reports
/// the chain yield for every `n` in `chain_lengths`. Rows run in parallel.
pub fn chain_table(
    system: &DoubleDot,
    base: &OptimizationConfig,
    settings: &[(f64, f64)],
    chain_lengths: &[usize],
) -> Result<Vec<TableRow>> {
    let n_max = *chain_lengths
        .iter()
        .max()
        .ok_or_else(|| invalid("chain_lengths", "empty"))?;
    let (start, target) = Task::Transfer.endpoints(system);
    let target_spec = TargetSpec::new(target.clone())?;
    let rows: Vec<Vec<TableRow>> = settings
        .par_iter()
        .map(|&(fluence, omega_th)| {
            let config = OptimizationConfig {
                fluence,
                omega_th,
                ..base.clone()
            };
            let opt = optimize(system.propagator(), &start, &target_spec, &config)?;
            // every shorter chain is a prefix of the longest one
            let seq = run_sequence(system.propagator(), &start, &opt.final_field, n_max, &target, &start)?;
            Ok(chain_lengths
                .iter()
                .map(|&n| TableRow {
                    fluence,
                    omega_th,
                    n,
                    computed_yield: seq.per_segment_yield[n - 1],
                    power_law_yield: seq.power_law_prediction[n - 1],
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}
