//! Doubly-clamped beam mechanics: the fundamental-mode potential
//! `V(Y) = c₂Y² + c₄Y⁴`, the buckling condition and the quantumness scale β.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Relative distance from the buckling threshold inside which β is refused.
pub const THRESHOLD_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum CrossSection {
    /// Thickness `a` and width `b`, in metres; `I = ab³/12`.
    Rectangular { a: f64, b: f64 },
    /// Radius in metres; `I = πr⁴/4`.
    Circular { r: f64 },
}

impl CrossSection {
    pub fn area(&self) -> f64 {
        match *self {
            CrossSection::Rectangular { a, b } => a * b,
            CrossSection::Circular { r } => PI * r * r,
        }
    }

    /// Second moment of area.
    pub fn moment_of_inertia(&self) -> f64 {
        match *self {
            CrossSection::Rectangular { a, b } => a * b.powi(3) / 12.0,
            CrossSection::Circular { r } => PI * r.powi(4) / 4.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            CrossSection::Rectangular { a, b } => a > 0.0 && b > 0.0,
            CrossSection::Circular { r } => r > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("cross_section", "dimensions must be > 0"))
        }
    }
}

/// Elastic modulus and mass density of a beam material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: &'static str,
    /// Pa.
    pub youngs_modulus: f64,
    /// kg/m³.
    pub mass_density: f64,
}

pub const SILICON: Material = Material {
    name: "Si",
    youngs_modulus: 0.137e12,
    mass_density: 2330.0,
};

pub const SWNT: Material = Material {
    name: "SWNT",
    youngs_modulus: 1.25e12,
    mass_density: 1930.0,
};

pub const MWNT: Material = Material {
    name: "MWNT",
    youngs_modulus: 1.25e12,
    mass_density: 1930.0,
};

/// Platinum nanowire: 168 GPa, 21090 kg/m³.
pub const PLATINUM: Material = Material {
    name: "Pt",
    youngs_modulus: 0.168e12,
    mass_density: 21_090.0,
};

pub const MATERIALS: [Material; 4] = [SILICON, SWNT, MWNT, PLATINUM];

pub fn material(name: &str) -> Option<Material> {
    MATERIALS
        .iter()
        .copied()
        .find(|m| m.name.eq_ignore_ascii_case(name))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    /// Clamp separation in metres.
    pub l0: f64,
    pub cross_section: CrossSection,
    /// Elastic modulus in Pa.
    pub youngs_modulus: f64,
    /// kg/m³.
    pub mass_density: f64,
    /// Inherent tension in N; negative is compressive.
    pub t0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialCoefficients {
    /// J/m².
    pub c2: f64,
    /// J/m⁴.
    pub c4: f64,
    pub is_double_well: bool,
}

impl BeamSpec {
    pub fn new(l0: f64, cross_section: CrossSection, material: Material, t0: f64) -> Self {
        Self {
            l0,
            cross_section,
            youngs_modulus: material.youngs_modulus,
            mass_density: material.mass_density,
            t0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("l0", self.l0),
            ("youngs_modulus", self.youngs_modulus),
            ("mass_density", self.mass_density),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if !self.t0.is_finite() {
            return Err(Error::param("t0", "must be finite"));
        }
        self.cross_section.validate()
    }

    /// Flexural rigidity `EI`.
    pub fn flexural_rigidity(&self) -> f64 {
        self.youngs_modulus * self.cross_section.moment_of_inertia()
    }

    /// Buckling threshold `−4π²EI/l₀²`; more compressive tensions buckle.
    pub fn critical_tension(&self) -> f64 {
        -4.0 * PI * PI * self.flexural_rigidity() / (self.l0 * self.l0)
    }

    /// Compressive load `λ = −T₀l₀²/(EI)`; buckled when `λ > 4π²`.
    pub fn compression(&self) -> f64 {
        -self.t0 * self.l0 * self.l0 / self.flexural_rigidity()
    }

    /// Same beam with `T₀` set from the compressive load `λ`.
    pub fn with_compression(mut self, lambda: f64) -> Self {
        self.t0 = -lambda * self.flexural_rigidity() / (self.l0 * self.l0);
        self
    }
}

pub fn potential_coefficients(beam: &BeamSpec) -> Result<PotentialCoefficients> {
    beam.validate()?;
    let l0 = beam.l0;
    let ei = beam.flexural_rigidity();
    let ea = beam.youngs_modulus * beam.cross_section.area();
    let pi2 = PI * PI;
    let c2 = ei * pi2 * pi2 / l0.powi(3) + pi2 * beam.t0 / (4.0 * l0);
    let c4 = ea * pi2 * pi2 / (16.0 * l0.powi(3));
    Ok(PotentialCoefficients {
        c2,
        c4,
        is_double_well: beam.t0 < beam.critical_tension(),
    })
}

/// `ħl₀/(8π²) · √(A / (2Eρ I³))`, the β² of a beam at `λ = 8π²`.
pub fn beta_squared_prefactor(beam: &BeamSpec) -> Result<f64> {
    prefactor_with_hbar(beam, HBAR)
}

fn prefactor_with_hbar(beam: &BeamSpec, hbar: f64) -> Result<f64> {
    beam.validate()?;
    let i = beam.cross_section.moment_of_inertia();
    let a = beam.cross_section.area();
    let root = (a / (2.0 * beam.youngs_modulus * beam.mass_density * i.powi(3))).sqrt();
    Ok(hbar * beam.l0 / (8.0 * PI * PI) * root)
}

/// `β² = prefactor · (λ/4π² − 1)^(−3/2)` with `ħ` in the units of `beam`.
pub fn beta_squared_with_hbar(beam: &BeamSpec, hbar: f64) -> Result<f64> {
    let k = prefactor_with_hbar(beam, hbar)?;
    let excess = beam.compression() / (4.0 * PI * PI) - 1.0;
    if !(excess > THRESHOLD_GUARD) {
        return Err(Error::Domain(format!(
            "β formula valid only for buckled beam (λ/4π² − 1 = {excess:.3e}; need > {THRESHOLD_GUARD:e})"
        )));
    }
    Ok(k * excess.powf(-1.5))
}

pub fn beta_squared(beam: &BeamSpec) -> Result<f64> {
    beta_squared_with_hbar(beam, HBAR)
}

pub fn beta_from_beam(beam: &BeamSpec) -> Result<f64> {
    beta_squared(beam).map(f64::sqrt)
}

/// `Γ = 1/(2Q)`: `Γ` is the amplitude damping rate in units of `ω₀`, so the
/// stored energy decays as `e^{−2Γt} = e^{−t/Q}`.
pub fn quality_factor_to_gamma(q: f64) -> Result<f64> {
    if !(q > 0.0) || q.is_nan() {
        return Err(Error::param(
            "quality_factor",
            format!("must be > 0, got {q}"),
        ));
    }
    Ok(0.5 / q)
}

/// SWNT device of radius 1.6 nm and length 1.15 μm under compressive load `λ`.
pub fn witkamp_swnt(lambda: f64) -> BeamSpec {
    BeamSpec::new(1.15e-6, CrossSection::Circular { r: 1.6e-9 }, SWNT, 0.0).with_compression(lambda)
}
