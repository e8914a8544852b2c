//! Classical driven damped Duffing oscillator
//! `x'' + 2Γx' + β²x³ ∓ x = (g/β) cos Ωt`, and its position histogram over
//! the same sampling window as the quantum ensemble.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{Histogram, PositionGrid};
use crate::operators::PhysicsParams;
use crate::qsd::{trajectory_seed, IntegratorConfig, SampleSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub x: f64,
    pub v: f64,
    pub t: f64,
}

impl ClassicalState {
    pub fn new(x: f64, v: f64) -> Self {
        Self { x, v, t: 0.0 }
    }

    /// `v²/2 + V(x)`.
    pub fn energy(&self, params: &PhysicsParams) -> f64 {
        0.5 * self.v * self.v + params.potential(self.x)
    }
}

fn acceleration(params: &PhysicsParams, x: f64, v: f64, t: f64) -> f64 {
    params.force(x) - 2.0 * params.gamma * v + params.drive_amplitude() * (params.omega * t).cos()
}

/// One RK4 step.
pub fn classical_step(
    s: &ClassicalState,
    params: &PhysicsParams,
    dt: f64,
) -> Result<ClassicalState> {
    let h = 0.5 * dt;
    let (x, v, t) = (s.x, s.v, s.t);
    let k1x = v;
    let k1v = acceleration(params, x, v, t);
    let k2x = v + h * k1v;
    let k2v = acceleration(params, x + h * k1x, k2x, t + h);
    let k3x = v + h * k2v;
    let k3v = acceleration(params, x + h * k2x, k3x, t + h);
    let k4x = v + dt * k3v;
    let k4v = acceleration(params, x + dt * k3x, k4x, t + dt);
    let next = ClassicalState {
        x: x + dt / 6.0 * (k1x + 2.0 * (k2x + k3x) + k4x),
        v: v + dt / 6.0 * (k1v + 2.0 * (k2v + k3v) + k4v),
        t: t + dt,
    };
    if !(next.x.is_finite() && next.v.is_finite()) {
        return Err(Error::Blowup {
            time: next.t,
            seed: None,
        });
    }
    Ok(next)
}

/// Gaussian cloud of initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudSpec {
    pub x0: f64,
    pub v0: f64,
    pub sigma_x: f64,
    pub sigma_v: f64,
    pub count: u64,
    pub seed: u64,
}

impl CloudSpec {
    /// Phase-space spread of the quantum initial state: centred on the
    /// right-hand minimum with `σ_x² = 1/(2ω)`, `σ_v² = ω/2`, `ω² = V''`.
    pub fn matching_quantum(params: &PhysicsParams, count: u64, seed: u64) -> Self {
        let omega = params.well_curvature().sqrt();
        Self {
            x0: params.well_minimum(),
            v0: 0.0,
            sigma_x: (0.5 / omega).sqrt(),
            sigma_v: (0.5 * omega).sqrt(),
            count,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::param("count", "need at least one initial condition"));
        }
        if !(self.sigma_x >= 0.0 && self.sigma_v >= 0.0) {
            return Err(Error::param("sigma", "spreads must be >= 0"));
        }
        if !(self.x0.is_finite() && self.v0.is_finite()) {
            return Err(Error::param("x0", "centre must be finite"));
        }
        Ok(())
    }

    /// Initial condition `index`, drawn from its own seeded stream.
    pub fn member(&self, index: u64) -> ClassicalState {
        let mut rng = ChaCha8Rng::seed_from_u64(trajectory_seed(self.seed, index));
        let n = Normal::new(0.0, 1.0).expect("unit normal");
        let dx = n.sample(&mut rng);
        let dv = n.sample(&mut rng);
        ClassicalState::new(self.x0 + self.sigma_x * dx, self.v0 + self.sigma_v * dv)
    }
}

/// Integrate `init` along `schedule`, returning the positions at the samples.
pub fn sample_positions(
    init: &ClassicalState,
    params: &PhysicsParams,
    schedule: &SampleSchedule,
) -> Result<Vec<f64>> {
    let mut s = *init;
    s.t = 0.0;
    let mut out = Vec::with_capacity(schedule.len());
    let mut next = 0;
    for step in 0..=schedule.total_steps {
        while next < schedule.len() && schedule.sample_steps[next] == step {
            out.push(s.x);
            next += 1;
        }
        if step < schedule.total_steps {
            s = classical_step(&s, params, schedule.dt)?;
            // keep t on the grid so drive phases match the quantum runs
            s.t = (step + 1) as f64 * schedule.dt;
        }
    }
    Ok(out)
}

fn cloud_chunk(
    params: &PhysicsParams,
    schedule: &SampleSchedule,
    cloud: &CloudSpec,
    grid: PositionGrid,
    indices: Range<u64>,
) -> Result<Histogram> {
    let mut h = Histogram::empty(grid);
    for i in indices {
        for x in sample_positions(&cloud.member(i), params, schedule)? {
            h.add_point(x, 1.0);
        }
    }
    Ok(h)
}

/// Time-and-ensemble position histogram of the cloud over the sampling
/// window of `icfg`, `n_samples` samples per trajectory.
pub fn classical_histogram(
    params: &PhysicsParams,
    icfg: &IntegratorConfig,
    cloud: &CloudSpec,
    grid: PositionGrid,
    n_samples: usize,
) -> Result<Histogram> {
    params.validate()?;
    cloud.validate()?;
    grid.validate()?;
    let schedule = SampleSchedule::from_config(icfg, n_samples)?;
    const CHUNK: u64 = 16;
    let parts: Vec<Result<Histogram>> = (0..cloud.count)
        .step_by(CHUNK as usize)
        .map(|s| s..(s + CHUNK).min(cloud.count))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|r| cloud_chunk(params, &schedule, cloud, grid, r))
        .collect();
    let mut acc = Histogram::empty(grid);
    for p in parts {
        acc = acc.merge(&p?)?;
    }
    Ok(acc)
}
