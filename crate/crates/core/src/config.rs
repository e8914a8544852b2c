//! TOML experiment description.
//!
//! ```toml
//! mode = "qsd_ensemble"      # qsd_ensemble | master_oracle | classical | nems_map | compare
//! dim = 120
//! output_path = "out"
//! output_format = "csv"      # csv | json
//! beta = 1.0
//! gamma = 0.3
//! g = 0.3
//! omega = 1.0
//! nbar = 0.0
//! well = "double_well"       # double_well | single_well
//!
//! [integrator]
//! dt = 1e-3                  # or "auto"
//! t_transient = 125.66       # default: 20 drive periods
//! t_sample_window = 12.566   # default: 2 drive periods
//! renormalize_every_step = true
//! scheme = "rk4_drift"       # rk4_drift | euler_maruyama
//! leakage_threshold = 1e-6
//! noise_substeps = 1
//!
//! [ensemble]
//! trajectories = 512
//! samples = 64
//! master_seed = 1
//!
//! [grid]                     # default: ±2.5/β, 256 bins
//! x_min = -2.5
//! x_max = 2.5
//! bins = 256
//!
//! [initial]
//! kind = "well_ground"       # well_ground | fock (with `level = n`)
//!
//! [beam]                     # nems_map only
//! material = "SWNT"          # Si | SWNT | MWNT | Pt, or youngs_modulus + mass_density
//! l0 = 1.15e-6
//! radius = 1.6e-9            # or thickness + width
//! lambda = 50.0              # or t0 (N, negative is compressive)
//! quality_factor = 1e4       # optional
//! ```
//!
//! Every key may be omitted except `mode`; omitted keys are filled with the
//! defaults above and listed in [`Resolved::defaulted`].

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleConfig;
use crate::histogram::PositionGrid;
use crate::nems::{self, BeamSpec, CrossSection};
use crate::operators::{build_operator_set, PhysicsParams, WellShape};
use crate::oracle::MAX_ORACLE_DIM;
use crate::qsd::{suggested_dt, IntegratorConfig, Scheme};

pub const DEFAULT_DIM: usize = 120;
pub const DEFAULT_TRAJECTORIES: u64 = 512;
pub const DEFAULT_MASTER_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    QsdEnsemble,
    MasterOracle,
    Classical,
    NemsMap,
    Compare,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::QsdEnsemble => "qsd_ensemble",
            Mode::MasterOracle => "master_oracle",
            Mode::Classical => "classical",
            Mode::NemsMap => "nems_map",
            Mode::Compare => "compare",
        }
    }

    fn needs_oracle(self) -> bool {
        matches!(self, Mode::MasterOracle | Mode::Compare)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Harmonic ground state of the right-hand well.
    #[default]
    WellGround,
    Fock {
        level: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamConfig {
    pub spec: BeamSpec,
    pub quality_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub mode: Mode,
    pub physics: PhysicsParams,
    pub dim: usize,
    pub integrator: IntegratorConfig,
    pub ensemble: EnsembleConfig,
    pub initial: InitialState,
    pub beam: Option<BeamConfig>,
    pub output_path: PathBuf,
    pub output_format: OutputFormat,
}

/// A key that was filled from its default, with the value used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Defaulted {
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub config: SimConfig,
    pub defaulted: Vec<Defaulted>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
    /// 1-based line of the offending key, when known.
    pub line: Option<usize>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Values that replace whatever the document says.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub output_path: Option<PathBuf>,
    pub output_format: Option<OutputFormat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum StepSize {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<StepSize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_transient: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_sample_window: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    renormalize_every_step: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<Scheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    leakage_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_substeps: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectories: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    master_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(skip_serializing_if = "Option::is_none")]
    x_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bins: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeam {
    #[serde(skip_serializing_if = "Option::is_none")]
    material: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    youngs_modulus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mass_density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thickness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    quality_factor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_format: Option<OutputFormat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nbar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    well: Option<WellShape>,
    #[serde(skip_serializing_if = "Option::is_none")]
    integrator: Option<RawIntegrator>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ensemble: Option<RawEnsemble>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<RawGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial: Option<InitialState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beam: Option<RawBeam>,
}

/// Parse and validate a document, filling defaults.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    load(text, &Overrides::default()).map(|r| r.config)
}

/// Parse, apply `overrides`, validate and fill defaults.
pub fn load(text: &str, overrides: &Overrides) -> Result<Resolved, ConfigError> {
    let mut raw = parse_raw(text)?;
    apply_overrides(&mut raw, overrides);
    Resolver::new(text).resolve(raw)
}

fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
        ConfigError {
            message: e.message().trim().to_string(),
            line,
        }
    })
}

fn apply_overrides(raw: &mut RawConfig, o: &Overrides) {
    if let Some(m) = o.mode {
        raw.mode = Some(m);
    }
    if let Some(s) = o.seed {
        raw.ensemble
            .get_or_insert_with(Default::default)
            .master_seed = Some(s);
    }
    if let Some(p) = &o.output_path {
        raw.output_path = Some(p.clone());
    }
    if let Some(f) = o.output_format {
        raw.output_format = Some(f);
    }
}

/// Fully explicit document for `cfg`; `parse_config(&emit(cfg))` returns `cfg`.
pub fn emit(cfg: &SimConfig) -> String {
    let p = &cfg.physics;
    let i = &cfg.integrator;
    let e = &cfg.ensemble;
    let beam = cfg.beam.map(|b| {
        let (radius, thickness, width) = match b.spec.cross_section {
            CrossSection::Circular { r } => (Some(r), None, None),
            CrossSection::Rectangular { a, b } => (None, Some(a), Some(b)),
        };
        RawBeam {
            material: None,
            youngs_modulus: Some(b.spec.youngs_modulus),
            mass_density: Some(b.spec.mass_density),
            l0: Some(b.spec.l0),
            radius,
            thickness,
            width,
            lambda: None,
            t0: Some(b.spec.t0),
            quality_factor: b.quality_factor,
        }
    });
    let raw = RawConfig {
        mode: Some(cfg.mode),
        dim: Some(cfg.dim),
        output_path: Some(cfg.output_path.clone()),
        output_format: Some(cfg.output_format),
        beta: Some(p.beta),
        gamma: Some(p.gamma),
        g: Some(p.g),
        omega: Some(p.omega),
        nbar: Some(p.nbar),
        well: Some(p.well),
        integrator: Some(RawIntegrator {
            dt: Some(StepSize::Fixed(i.dt)),
            t_transient: Some(i.t_transient),
            t_sample_window: Some(i.t_sample_window),
            renormalize_every_step: Some(i.renormalize_every_step),
            scheme: Some(i.scheme),
            leakage_threshold: Some(i.leakage_threshold),
            noise_substeps: Some(i.noise_substeps),
        }),
        ensemble: Some(RawEnsemble {
            trajectories: Some(e.trajectories),
            samples: Some(e.samples),
            master_seed: Some(e.master_seed),
        }),
        grid: Some(RawGrid {
            x_min: Some(e.grid.x_min),
            x_max: Some(e.grid.x_max),
            bins: Some(e.grid.bins),
        }),
        initial: Some(cfg.initial),
        beam,
    };
    toml::to_string(&raw).expect("config serializes to TOML")
}

struct Resolver<'a> {
    text: &'a str,
    defaulted: Vec<Defaulted>,
}

impl<'a> Resolver<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            text,
            defaulted: Vec::new(),
        }
    }

    fn take<T: fmt::Debug>(
        &mut self,
        key: &str,
        value: Option<T>,
        default: impl FnOnce() -> T,
    ) -> T {
        value.unwrap_or_else(|| {
            let v = default();
            self.defaulted.push(Defaulted {
                key: key.to_string(),
                value: format!("{v:?}"),
            });
            v
        })
    }

    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            message: format!("`{key}`: {}", message.into()),
            line: locate(self.text, key),
        }
    }

    fn check(&self, key: &str, r: crate::Result<()>) -> Result<(), ConfigError> {
        r.map_err(|e| self.err(key, e.to_string()))
    }

    fn resolve(mut self, raw: RawConfig) -> Result<Resolved, ConfigError> {
        let mode = raw.mode.ok_or_else(|| ConfigError {
            message: "missing required key `mode`".into(),
            line: None,
        })?;
        let base = PhysicsParams::default();
        let physics = PhysicsParams {
            beta: self.take("beta", raw.beta, || base.beta),
            gamma: self.take("gamma", raw.gamma, || base.gamma),
            g: self.take("g", raw.g, || base.g),
            omega: self.take("omega", raw.omega, || base.omega),
            nbar: self.take("nbar", raw.nbar, || base.nbar),
            well: self.take("well", raw.well, || base.well),
        };
        for (key, v) in [
            ("beta", physics.beta),
            ("gamma", physics.gamma),
            ("g", physics.g),
            ("omega", physics.omega),
            ("nbar", physics.nbar),
        ] {
            if !v.is_finite() {
                return Err(self.err(key, "must be finite"));
            }
        }
        self.check("beta", physics.validate())?;

        let dim = self.take("dim", raw.dim, || DEFAULT_DIM);
        if dim < 2 {
            return Err(self.err("dim", format!("need at least 2, got {dim}")));
        }
        if mode.needs_oracle() && dim > MAX_ORACLE_DIM {
            return Err(self.err(
                "dim",
                format!(
                    "{} mode is limited to dim ≤ {MAX_ORACLE_DIM}, got {dim}",
                    mode.name()
                ),
            ));
        }
        let output_path = self.take("output_path", raw.output_path, || PathBuf::from("out"));
        let output_format = self.take("output_format", raw.output_format, OutputFormat::default);

        let ri = raw.integrator.unwrap_or_default();
        let di = IntegratorConfig::for_drive_frequency(physics.omega);
        let dt_spec = self.take("integrator.dt", ri.dt, || StepSize::Fixed(di.dt));
        let dt = match dt_spec {
            StepSize::Fixed(v) => v,
            StepSize::Named(s) if s == "auto" => {
                let ops = build_operator_set(&physics, dim)
                    .map_err(|e| self.err("dim", e.to_string()))?;
                let v = suggested_dt(&ops);
                self.defaulted.push(Defaulted {
                    key: "integrator.dt".into(),
                    value: format!("auto -> {v:?}"),
                });
                v
            }
            StepSize::Named(s) => {
                return Err(self.err("dt", format!("expected a number or \"auto\", got {s:?}")))
            }
        };
        let integrator = IntegratorConfig {
            dt,
            t_transient: self.take("integrator.t_transient", ri.t_transient, || di.t_transient),
            t_sample_window: self.take("integrator.t_sample_window", ri.t_sample_window, || {
                di.t_sample_window
            }),
            renormalize_every_step: self.take(
                "integrator.renormalize_every_step",
                ri.renormalize_every_step,
                || di.renormalize_every_step,
            ),
            scheme: self.take("integrator.scheme", ri.scheme, || di.scheme),
            leakage_threshold: self.take(
                "integrator.leakage_threshold",
                ri.leakage_threshold,
                || di.leakage_threshold,
            ),
            noise_substeps: self.take("integrator.noise_substeps", ri.noise_substeps, || {
                di.noise_substeps
            }),
        };
        if let Err(e) = integrator.validate() {
            let key = match &e {
                crate::Error::InvalidParameter { name, .. } => *name,
                _ => "integrator",
            };
            return Err(self.err(key, e.to_string()));
        }

        let re = raw.ensemble.unwrap_or_default();
        let rg = raw.grid.unwrap_or_default();
        let dg = PositionGrid::default_for_beta(physics.beta);
        let grid = PositionGrid {
            x_min: self.take("grid.x_min", rg.x_min, || dg.x_min),
            x_max: self.take("grid.x_max", rg.x_max, || dg.x_max),
            bins: self.take("grid.bins", rg.bins, || dg.bins),
        };
        self.check("x_min", grid.validate())?;
        let ensemble = EnsembleConfig {
            trajectories: self.take("ensemble.trajectories", re.trajectories, || {
                DEFAULT_TRAJECTORIES
            }),
            samples: self.take("ensemble.samples", re.samples, || 64),
            master_seed: self.take("ensemble.master_seed", re.master_seed, || {
                DEFAULT_MASTER_SEED
            }),
            grid,
        };
        if ensemble.trajectories == 0 {
            return Err(self.err("trajectories", "need at least one trajectory"));
        }
        if ensemble.samples == 0 {
            return Err(self.err("samples", "need at least one sample"));
        }

        let initial = self.take("initial.kind", raw.initial, InitialState::default);
        if let InitialState::Fock { level } = initial {
            if level >= dim {
                return Err(self.err(
                    "level",
                    format!("Fock level {level} outside basis of size {dim}"),
                ));
            }
        }

        let beam = match raw.beam {
            Some(rb) => Some(self.beam(rb)?),
            None if mode == Mode::NemsMap => {
                return Err(ConfigError {
                    message: "nems_map mode requires a [beam] section".into(),
                    line: None,
                })
            }
            None => None,
        };

        Ok(Resolved {
            config: SimConfig {
                mode,
                physics,
                dim,
                integrator,
                ensemble,
                initial,
                beam,
                output_path,
                output_format,
            },
            defaulted: self.defaulted,
        })
    }

    fn beam(&mut self, rb: RawBeam) -> Result<BeamConfig, ConfigError> {
        let preset = match &rb.material {
            Some(name) => Some(
                nems::material(name)
                    .ok_or_else(|| self.err("material", format!("unknown material {name:?}")))?,
            ),
            None => None,
        };
        let youngs_modulus = rb
            .youngs_modulus
            .or(preset.map(|m| m.youngs_modulus))
            .ok_or_else(|| self.err("beam", "need `material` or `youngs_modulus`"))?;
        let mass_density = rb
            .mass_density
            .or(preset.map(|m| m.mass_density))
            .ok_or_else(|| self.err("beam", "need `material` or `mass_density`"))?;
        let l0 = rb.l0.ok_or_else(|| self.err("beam", "missing `l0`"))?;
        let cross_section = match (rb.radius, rb.thickness, rb.width) {
            (Some(r), None, None) => CrossSection::Circular { r },
            (None, Some(a), Some(b)) => CrossSection::Rectangular { a, b },
            _ => {
                return Err(self.err(
                    "beam",
                    "give either `radius` or both `thickness` and `width`",
                ))
            }
        };
        let spec = BeamSpec {
            l0,
            cross_section,
            youngs_modulus,
            mass_density,
            t0: 0.0,
        };
        let spec = match (rb.lambda, rb.t0) {
            (Some(l), None) => spec.with_compression(l),
            (None, Some(t0)) => BeamSpec { t0, ..spec },
            (None, None) => {
                self.defaulted.push(Defaulted {
                    key: "beam.t0".into(),
                    value: "0.0".into(),
                });
                spec
            }
            (Some(_), Some(_)) => return Err(self.err("lambda", "give `lambda` or `t0`, not both")),
        };
        self.check("beam", spec.validate())?;
        if let Some(q) = rb.quality_factor {
            self.check(
                "quality_factor",
                nems::quality_factor_to_gamma(q).map(|_| ()),
            )?;
        }
        Ok(BeamConfig {
            spec,
            quality_factor: rb.quality_factor,
        })
    }
}

/// Line of the first `key = ...` assignment, matching the last path segment.
fn locate(text: &str, key: &str) -> Option<usize> {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    text.lines()
        .position(|line| {
            let line = line.trim_start();
            line.strip_prefix(leaf)
                .map(|rest| rest.trim_start().starts_with('='))
                .unwrap_or(false)
        })
        .map(|i| i + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig1,
    Fig2,
}

impl std::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            other => Err(format!("unknown preset {other:?} (expected fig1 or fig2)")),
        }
    }
}

/// One cell of a preset grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Panel {
    pub label: String,
    pub resolved: Resolved,
    /// Set when the cell is run with a stand-in method.
    pub note: Option<String>,
}

/// Basis size used by presets when `dim` is not given.
pub fn desk_dim(beta: f64) -> usize {
    if beta >= 0.7 {
        48
    } else if beta >= 0.2 {
        56
    } else {
        200
    }
}

/// Smallest β a fixed Fock basis handles at desk scale.
pub const MIN_QUANTUM_BETA: f64 = 0.05;

impl Preset {
    /// `(β, Γ, n̄)` of every cell, row by row.
    pub fn cells(self) -> Vec<(f64, f64, f64)> {
        let betas = [0.01, 0.3, 1.0];
        let rows: Vec<(f64, f64)> = match self {
            Preset::Fig1 => vec![(0.125, 0.0), (0.3, 0.0)],
            Preset::Fig2 => vec![(0.03, 4.0), (0.125, 4.0), (0.3, 4.0), (0.3, 0.5)],
        };
        rows.iter()
            .flat_map(|&(gamma, nbar)| betas.iter().map(move |&beta| (beta, gamma, nbar)))
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
        }
    }

    /// Expand over `base` (a possibly empty document), overriding β, Γ and n̄
    /// per cell. Cells with β below [`MIN_QUANTUM_BETA`] run the classical
    /// module instead.
    pub fn expand(self, base: &str, overrides: &Overrides) -> Result<Vec<Panel>, ConfigError> {
        let mut template = parse_raw(base)?;
        apply_overrides(&mut template, overrides);
        template.mode.get_or_insert(Mode::QsdEnsemble);
        self.cells()
            .into_iter()
            .map(|(beta, gamma, nbar)| {
                let mut raw = template.clone();
                raw.beta = Some(beta);
                raw.gamma = Some(gamma);
                raw.nbar = Some(nbar);
                let mut note = None;
                if beta < MIN_QUANTUM_BETA {
                    raw.mode = Some(Mode::Classical);
                    note = Some(format!(
                        "β = {beta} needs a Fock basis of order 10⁴; classical stand-in{}",
                        if nbar > 0.0 {
                            " (no thermal noise)"
                        } else {
                            ""
                        }
                    ));
                }
                raw.dim.get_or_insert(desk_dim(beta));
                let label = format!("{}_beta{beta}_gamma{gamma}_nbar{nbar}", self.name());
                let resolved = Resolver::new(base).resolve(raw)?;
                Ok(Panel {
                    label,
                    resolved,
                    note,
                })
            })
            .collect()
    }
}
