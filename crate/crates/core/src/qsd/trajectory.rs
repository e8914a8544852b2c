use log::debug;

use super::{IntegratorConfig, NoiseStream, StateVector, Stepper};
use crate::error::{Error, Result};
use crate::observables::{expectations, Expectations};
use crate::operators::OperatorSet;

/// Step indices at which observers fire, measured from `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSchedule {
    pub dt: f64,
    pub sample_steps: Vec<u64>,
    pub total_steps: u64,
}

impl SampleSchedule {
    /// `n` samples at the midpoints of `n` equal slices of the window
    /// `(t_transient, t_transient + t_sample_window)`.
    pub fn from_config(cfg: &IntegratorConfig, n: usize) -> Result<Self> {
        cfg.validate()?;
        if n == 0 {
            return Err(Error::param("samples", "need at least one sample"));
        }
        let slice = cfg.t_sample_window / n as f64;
        let times: Vec<f64> = (0..n)
            .map(|k| cfg.t_transient + (k as f64 + 0.5) * slice)
            .collect();
        let total = ((cfg.t_transient + cfg.t_sample_window) / cfg.dt).round() as u64;
        let mut s = Self::at_times(cfg.dt, &times)?;
        s.total_steps = s.total_steps.max(total);
        Ok(s)
    }

    /// Samples at the step nearest to each requested time.
    pub fn at_times(dt: f64, times: &[f64]) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", "must be > 0"));
        }
        let mut sample_steps: Vec<u64> = times
            .iter()
            .map(|t| (t / dt).round().max(0.0) as u64)
            .collect();
        sample_steps.sort_unstable();
        let total_steps = sample_steps.last().copied().unwrap_or(0);
        Ok(Self {
            dt,
            sample_steps,
            total_steps,
        })
    }

    pub fn sample_times(&self) -> Vec<f64> {
        self.sample_steps
            .iter()
            .map(|&n| n as f64 * self.dt)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.sample_steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_steps.is_empty()
    }
}

/// Called at every sample time of a trajectory.
pub trait Observer {
    fn observe(&mut self, sample: usize, state: &StateVector, ops: &OperatorSet) -> Result<()>;
}

#[derive(Debug, Clone)]
pub struct TrajectorySummary {
    pub seed: u64,
    pub final_state: StateVector,
    pub steps: u64,
    /// Largest top-level population seen at the monitored steps.
    pub max_leakage: f64,
    pub leakage_warning: bool,
}

/// Integrate `init` along `schedule`, calling every observer at each sample.
pub fn integrate(
    ops: &OperatorSet,
    cfg: &IntegratorConfig,
    schedule: &SampleSchedule,
    init: &StateVector,
    seed: u64,
    observers: &mut [&mut dyn Observer],
) -> Result<TrajectorySummary> {
    cfg.validate()?;
    if init.dim() != ops.dim() {
        return Err(Error::DimensionMismatch {
            expected: ops.dim(),
            got: init.dim(),
        });
    }
    let dt = schedule.dt;
    let mut noise = NoiseStream::new(seed);
    let mut stepper = Stepper::new(ops, cfg.scheme);
    let mut state = init.clone();
    state.time = 0.0;
    let mut max_leakage = state.leakage();
    let mut next_sample = 0usize;

    let fire = |state: &StateVector, idx: usize, observers: &mut [&mut dyn Observer]| {
        observers
            .iter_mut()
            .try_for_each(|o| o.observe(idx, state, ops))
    };

    while next_sample < schedule.len() && schedule.sample_steps[next_sample] == 0 {
        fire(&state, next_sample, observers)?;
        next_sample += 1;
    }
    for n in 0..schedule.total_steps {
        let incr = noise.step_refined(dt, cfg.noise_substeps);
        let t = n as f64 * dt;
        let norm = stepper
            .advance(state.amplitudes.as_mut_slice(), t, dt, &incr)
            .map_err(|e| e.with_seed(seed))?;
        if cfg.renormalize_every_step {
            state.amplitudes.unscale_mut(norm);
        }
        let step = n + 1;
        state.time = step as f64 * dt;
        let sampling = next_sample < schedule.len() && schedule.sample_steps[next_sample] == step;
        if sampling || step % 1024 == 0 || step == schedule.total_steps {
            max_leakage = max_leakage.max(state.leakage());
        }
        while next_sample < schedule.len() && schedule.sample_steps[next_sample] == step {
            fire(&state, next_sample, observers)?;
            next_sample += 1;
        }
    }

    let leakage_warning = max_leakage > cfg.leakage_threshold;
    if leakage_warning {
        debug!(
            "trajectory seed {seed}: top-level population reached {max_leakage:.3e} \
             (threshold {:.1e}, dim {}); increase the basis size",
            cfg.leakage_threshold,
            ops.dim()
        );
    }
    Ok(TrajectorySummary {
        seed,
        final_state: state,
        steps: schedule.total_steps,
        max_leakage,
        leakage_warning,
    })
}

/// Integrate through the transient and the sampling window of `cfg`,
/// sampling `n_samples` times inside the window.
pub fn run_trajectory(
    ops: &OperatorSet,
    cfg: &IntegratorConfig,
    init: &StateVector,
    seed: u64,
    n_samples: usize,
    observers: &mut [&mut dyn Observer],
) -> Result<TrajectorySummary> {
    let schedule = SampleSchedule::from_config(cfg, n_samples)?;
    integrate(ops, cfg, &schedule, init, seed, observers)
}

/// Records the state norm at every sample.
#[derive(Debug, Clone, Default)]
pub struct NormRecorder {
    pub norms: Vec<f64>,
}

impl Observer for NormRecorder {
    fn observe(&mut self, _: usize, state: &StateVector, _: &OperatorSet) -> Result<()> {
        self.norms.push(state.norm());
        Ok(())
    }
}

/// Records `⟨Q⟩, ⟨P⟩, ⟨H⟩, ⟨a†a⟩` at every sample.
#[derive(Debug, Clone, Default)]
pub struct ExpectationRecorder {
    pub rows: Vec<(f64, Expectations)>,
}

impl Observer for ExpectationRecorder {
    fn observe(&mut self, _: usize, state: &StateVector, ops: &OperatorSet) -> Result<()> {
        self.rows
            .push((state.time, expectations(state, ops, state.time)?));
        Ok(())
    }
}
