//! Trajectory ensembles: density-matrix reconstruction and the ensemble- and
//! time-averaged position distribution.
//!
//! Trajectory `i` always uses seed `trajectory_seed(master_seed, i)` and the
//! per-chunk partial results are combined in index order, so the output does
//! not depend on the number of worker threads.

use std::ops::Range;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{Histogram, NormalizedHistogram, PositionGrid};
use crate::linalg::{hermitian_eigenvalues, hermiticity_error, trace, CMatrix};
use crate::observables::{expectations, Expectations, HermiteTable};
use crate::operators::OperatorSet;
use crate::qsd::{
    integrate, run_trajectory, trajectory_seed, warn_if_step_too_large, IntegratorConfig, Observer,
    SampleSchedule, StateVector,
};

pub use crate::histogram::merge_histograms;

/// Trajectories per work item.
const CHUNK: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Number of trajectories `M`.
    pub trajectories: u64,
    /// Samples per trajectory `N`.
    pub samples: usize,
    pub master_seed: u64,
    pub grid: PositionGrid,
}

impl EnsembleConfig {
    pub fn new(trajectories: u64, master_seed: u64, grid: PositionGrid) -> Self {
        Self {
            trajectories,
            samples: 64,
            master_seed,
            grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories == 0 {
            return Err(Error::param("trajectories", "need at least one trajectory"));
        }
        if self.samples == 0 {
            return Err(Error::param("samples", "need at least one sample"));
        }
        self.grid.validate()
    }
}

/// `ρ = (1/K) Σ |ψ⟩⟨ψ|` over all `K` sampled states.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub rho: CMatrix,
    pub sample_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub hermiticity_error: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl DensityReport {
    /// Hermitian to 1e-10, unit trace to 1e-10, eigenvalues ≥ −1e-8.
    pub fn passes(&self) -> bool {
        self.hermiticity_error <= 1e-10 && self.trace_error <= 1e-10 && self.min_eigenvalue >= -1e-8
    }
}

impl DensityMatrix {
    pub fn report(&self) -> DensityReport {
        DensityReport {
            hermiticity_error: hermiticity_error(&self.rho),
            trace_error: (trace(&self.rho) - Complex64::new(1.0, 0.0)).norm(),
            min_eigenvalue: hermitian_eigenvalues(&self.rho)[0],
        }
    }
}

/// One row of the raw observable table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub trajectory: u64,
    pub sample: usize,
    pub t: f64,
    pub q: f64,
    pub p: f64,
    pub energy: f64,
    pub duffing_energy: f64,
    pub number: f64,
}

/// Mergeable partial ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleAccumulator {
    pub histogram: Histogram,
    /// Sums over trajectories of the trajectory's time-averaged density and its square.
    traj_sum: Vec<f64>,
    traj_sumsq: Vec<f64>,
    rho_sum: CMatrix,
    pub samples: u64,
    pub trajectories: u64,
    pub rows: Vec<ObservableRow>,
    pub max_leakage: f64,
    pub leakage_warnings: u64,
}

impl EnsembleAccumulator {
    pub fn empty(grid: PositionGrid, dim: usize) -> Self {
        Self {
            histogram: Histogram::empty(grid),
            traj_sum: vec![0.0; grid.bins],
            traj_sumsq: vec![0.0; grid.bins],
            rho_sum: CMatrix::zeros(dim, dim),
            samples: 0,
            trajectories: 0,
            rows: Vec::new(),
            max_leakage: 0.0,
            leakage_warnings: 0,
        }
    }

    /// Fold `other` into `self`; rows of `other` are appended after `self`'s.
    pub fn absorb(&mut self, other: EnsembleAccumulator) -> Result<()> {
        self.histogram = self.histogram.merge(&other.histogram)?;
        if self.rho_sum.shape() != other.rho_sum.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.rho_sum.nrows(),
                got: other.rho_sum.nrows(),
            });
        }
        for (a, b) in self.traj_sum.iter_mut().zip(&other.traj_sum) {
            *a += b;
        }
        for (a, b) in self.traj_sumsq.iter_mut().zip(&other.traj_sumsq) {
            *a += b;
        }
        self.rho_sum += &other.rho_sum;
        self.samples += other.samples;
        self.trajectories += other.trajectories;
        self.rows.extend(other.rows);
        self.max_leakage = self.max_leakage.max(other.max_leakage);
        self.leakage_warnings += other.leakage_warnings;
        Ok(())
    }

    pub fn finish(self) -> EnsembleResult {
        let m = self.trajectories as f64;
        let bin_std_error = self
            .traj_sum
            .iter()
            .zip(&self.traj_sumsq)
            .map(|(s, s2)| {
                if self.trajectories < 2 {
                    return f64::NAN;
                }
                let mean = s / m;
                ((s2 / m - mean * mean).max(0.0) / (m - 1.0)).sqrt()
            })
            .collect();
        let rho = if self.samples > 0 {
            self.rho_sum.unscale(self.samples as f64)
        } else {
            self.rho_sum
        };
        EnsembleResult {
            p_avg: self.histogram.finalize(),
            histogram: self.histogram,
            density_matrix: DensityMatrix {
                rho,
                sample_count: self.samples,
            },
            bin_std_error,
            rows: self.rows,
            trajectories: self.trajectories,
            max_leakage: self.max_leakage,
            leakage_warnings: self.leakage_warnings,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub density_matrix: DensityMatrix,
    /// Raw accumulator, for merging with other runs.
    pub histogram: Histogram,
    /// `P_avg(x)`, normalized on the grid.
    pub p_avg: NormalizedHistogram,
    /// Standard error of the mean density per bin (trajectories as
    /// independent samples); `NaN` for a single trajectory.
    pub bin_std_error: Vec<f64>,
    pub rows: Vec<ObservableRow>,
    pub trajectories: u64,
    pub max_leakage: f64,
    pub leakage_warnings: u64,
}

/// Per-trajectory observer feeding an accumulator.
struct SampleCollector<'a> {
    table: &'a HermiteTable,
    trajectory: u64,
    density: Vec<f64>,
    traj_hist: Vec<f64>,
    rho_sum: &'a mut CMatrix,
    rows: &'a mut Vec<ObservableRow>,
    samples: u64,
}

impl Observer for SampleCollector<'_> {
    fn observe(&mut self, sample: usize, state: &StateVector, ops: &OperatorSet) -> Result<()> {
        let psi = state.amplitudes.as_slice();
        self.table.density_into(psi, &mut self.density);
        for (h, d) in self.traj_hist.iter_mut().zip(&self.density) {
            *h += d;
        }
        let dim = psi.len();
        for c in 0..dim {
            let pc = psi[c].conj();
            let mut col = self.rho_sum.column_mut(c);
            for (r, v) in col.iter_mut().enumerate() {
                *v += psi[r] * pc;
            }
        }
        let e = expectations(state, ops, state.time)?;
        self.rows.push(ObservableRow {
            trajectory: self.trajectory,
            sample,
            t: state.time,
            q: e.q,
            p: e.p,
            energy: e.energy,
            duffing_energy: e.duffing_energy,
            number: e.number,
        });
        self.samples += 1;
        Ok(())
    }
}

fn run_chunk(
    ops: &OperatorSet,
    icfg: &IntegratorConfig,
    ecfg: &EnsembleConfig,
    init: &StateVector,
    table: &HermiteTable,
    indices: Range<u64>,
) -> Result<EnsembleAccumulator> {
    let mut acc = EnsembleAccumulator::empty(ecfg.grid, ops.dim());
    let bins = ecfg.grid.bins;
    for index in indices {
        let seed = trajectory_seed(ecfg.master_seed, index);
        let mut collector = SampleCollector {
            table,
            trajectory: index,
            density: vec![0.0; bins],
            traj_hist: vec![0.0; bins],
            rho_sum: &mut acc.rho_sum,
            rows: &mut acc.rows,
            samples: 0,
        };
        let summary = run_trajectory(ops, icfg, init, seed, ecfg.samples, &mut [&mut collector])?;
        let n = collector.samples as f64;
        let traj_hist = std::mem::take(&mut collector.traj_hist);
        let samples = collector.samples;
        for (w, h) in acc.histogram.weights.iter_mut().zip(&traj_hist) {
            *w += h;
        }
        acc.histogram.total_weight += n;
        for ((s, s2), h) in acc
            .traj_sum
            .iter_mut()
            .zip(acc.traj_sumsq.iter_mut())
            .zip(&traj_hist)
        {
            let m = h / n;
            *s += m;
            *s2 += m * m;
        }
        acc.samples += samples;
        acc.trajectories += 1;
        acc.max_leakage = acc.max_leakage.max(summary.max_leakage);
        acc.leakage_warnings += u64::from(summary.leakage_warning);
    }
    Ok(acc)
}

/// Run trajectories `range` of the ensemble described by `ecfg`.
pub fn run_ensemble_range(
    ops: &OperatorSet,
    icfg: &IntegratorConfig,
    ecfg: &EnsembleConfig,
    init: &StateVector,
    range: Range<u64>,
) -> Result<EnsembleAccumulator> {
    ecfg.validate()?;
    icfg.validate()?;
    if init.dim() != ops.dim() {
        return Err(Error::DimensionMismatch {
            expected: ops.dim(),
            got: init.dim(),
        });
    }
    warn_if_step_too_large(ops, icfg.dt);
    let table = HermiteTable::new(ecfg.grid, ops.dim());
    let chunks: Vec<Range<u64>> = (range.start..range.end)
        .step_by(CHUNK as usize)
        .map(|s| s..(s + CHUNK).min(range.end))
        .collect();
    let parts: Vec<Result<EnsembleAccumulator>> = chunks
        .into_par_iter()
        .map(|r| run_chunk(ops, icfg, ecfg, init, &table, r))
        .collect();
    let mut acc = EnsembleAccumulator::empty(ecfg.grid, ops.dim());
    for part in parts {
        acc.absorb(part?)?;
    }
    Ok(acc)
}

/// Full ensemble from an explicit initial state.
pub fn run_ensemble_from(
    ops: &OperatorSet,
    icfg: &IntegratorConfig,
    ecfg: &EnsembleConfig,
    init: &StateVector,
) -> Result<EnsembleResult> {
    Ok(run_ensemble_range(ops, icfg, ecfg, init, 0..ecfg.trajectories)?.finish())
}

/// Full ensemble starting from the ground state of the right-hand well.
pub fn run_ensemble(
    ops: &OperatorSet,
    icfg: &IntegratorConfig,
    ecfg: &EnsembleConfig,
) -> Result<EnsembleResult> {
    let init = StateVector::well_ground_state(ops.params(), ops.dim());
    run_ensemble_from(ops, icfg, ecfg, &init)
}

/// Ensemble state at fixed checkpoint times: `ρ(t_k)` and per-trajectory
/// expectation values.
#[derive(Debug, Clone)]
pub struct CheckpointEnsemble {
    pub times: Vec<f64>,
    rho_sums: Vec<CMatrix>,
    /// `values[trajectory][checkpoint]`.
    pub values: Vec<Vec<Expectations>>,
    pub max_leakage: f64,
}

impl CheckpointEnsemble {
    pub fn trajectories(&self) -> usize {
        self.values.len()
    }

    /// Ensemble density matrix at checkpoint `k`.
    pub fn density(&self, k: usize) -> CMatrix {
        self.rho_sums[k].unscale(self.trajectories().max(1) as f64)
    }

    /// Mean and standard error of `f` at checkpoint `k`.
    pub fn mean_and_error(&self, k: usize, f: impl Fn(&Expectations) -> f64) -> (f64, f64) {
        let xs: Vec<f64> = self.values.iter().map(|row| f(&row[k])).collect();
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        if xs.len() < 2 {
            return (mean, f64::NAN);
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (mean, (var / m).sqrt())
    }

    pub fn absorb(&mut self, other: CheckpointEnsemble) -> Result<()> {
        if self.times != other.times {
            return Err(Error::param("times", "checkpoint times differ"));
        }
        for (a, b) in self.rho_sums.iter_mut().zip(&other.rho_sums) {
            if a.shape() != b.shape() {
                return Err(Error::DimensionMismatch {
                    expected: a.nrows(),
                    got: b.nrows(),
                });
            }
            *a += b;
        }
        self.values.extend(other.values);
        self.max_leakage = self.max_leakage.max(other.max_leakage);
        Ok(())
    }
}

struct CheckpointCollector<'a> {
    rho_sums: &'a mut [CMatrix],
    row: Vec<Expectations>,
}

impl Observer for CheckpointCollector<'_> {
    fn observe(&mut self, sample: usize, state: &StateVector, ops: &OperatorSet) -> Result<()> {
        let psi = &state.amplitudes;
        self.rho_sums[sample] += psi * psi.adjoint();
        self.row.push(expectations(state, ops, state.time)?);
        Ok(())
    }
}

/// Run trajectories `range` from `init`, recording the ensemble at `times`
/// (rounded to the nearest step of `icfg.dt`).
pub fn run_checkpoints(
    ops: &OperatorSet,
    icfg: &IntegratorConfig,
    init: &StateVector,
    master_seed: u64,
    range: Range<u64>,
    times: &[f64],
) -> Result<CheckpointEnsemble> {
    icfg.validate()?;
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "times",
            "checkpoints must be strictly ascending",
        ));
    }
    warn_if_step_too_large(ops, icfg.dt);
    let schedule = SampleSchedule::at_times(icfg.dt, times)?;
    let dim = ops.dim();
    let empty = || CheckpointEnsemble {
        times: schedule.sample_times(),
        rho_sums: vec![CMatrix::zeros(dim, dim); times.len()],
        values: Vec::new(),
        max_leakage: 0.0,
    };
    let chunks: Vec<Range<u64>> = range
        .clone()
        .step_by(CHUNK as usize)
        .map(|s| s..(s + CHUNK).min(range.end))
        .collect();
    let parts: Vec<Result<CheckpointEnsemble>> = chunks
        .into_par_iter()
        .map(|r| {
            let mut part = empty();
            for index in r {
                let seed = trajectory_seed(master_seed, index);
                let mut collector = CheckpointCollector {
                    rho_sums: &mut part.rho_sums,
                    row: Vec::with_capacity(times.len()),
                };
                let summary = integrate(ops, icfg, &schedule, init, seed, &mut [&mut collector])?;
                part.values.push(collector.row);
                part.max_leakage = part.max_leakage.max(summary.max_leakage);
            }
            Ok(part)
        })
        .collect();
    let mut acc = empty();
    for part in parts {
        acc.absorb(part?)?;
    }
    Ok(acc)
}
