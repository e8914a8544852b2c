//! Truncated Fock-basis matrices for the dimensionless Duffing model.
//!
//! With `Q = (a + a†)/√2` and `P = (a − a†)/(i√2)` the model is
//!
//! ```text
//! H(t) = P²/2 + (β²/4) Q⁴ ∓ Q²/2  +  (Γ/2)(QP + PQ)  −  (g/β) Q cos(Ωt)
//! L1   = √(Γ(1 + n̄)) (Q + iP)
//! L2   = √(Γ n̄)      (Q − iP)
//! ```
//!
//! where the quadratic sign is negative for the double well.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Banded, CMatrix, I};

/// Sign of the quadratic term of the potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WellShape {
    /// `−Q²/2`: minima at `±1/β`.
    #[default]
    DoubleWell,
    /// `+Q²/2`: the hardening single-well Duffing oscillator.
    SingleWell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    /// `√(ħ/S)`; the classical limit is `beta → 0`.
    pub beta: f64,
    /// Dimensionless damping `γ/ω₀`.
    pub gamma: f64,
    /// Drive strength; the drive term is `−(g/β) Q cos(Ωt)`.
    pub g: f64,
    /// Drive frequency in units of `ω₀`.
    pub omega: f64,
    /// Thermal occupation of the bath.
    pub nbar: f64,
    pub well: WellShape,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            gamma: 0.3,
            g: 0.3,
            omega: 1.0,
            nbar: 0.0,
            well: WellShape::DoubleWell,
        }
    }
}

impl PhysicsParams {
    pub fn new(beta: f64, gamma: f64) -> Self {
        Self {
            beta,
            gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("beta", self.beta)?;
        positive("omega", self.omega)?;
        non_negative("gamma", self.gamma)?;
        non_negative("g", self.g)?;
        non_negative("nbar", self.nbar)?;
        Ok(())
    }

    fn quadratic_sign(&self) -> f64 {
        match self.well {
            WellShape::DoubleWell => -1.0,
            WellShape::SingleWell => 1.0,
        }
    }

    /// Classical potential `V(Q) = β²Q⁴/4 ∓ Q²/2`.
    pub fn potential(&self, q: f64) -> f64 {
        0.25 * self.beta * self.beta * q.powi(4) + 0.5 * self.quadratic_sign() * q * q
    }

    /// `−V'(Q)`.
    pub fn force(&self, q: f64) -> f64 {
        -(self.beta * self.beta * q * q * q + self.quadratic_sign() * q)
    }

    /// Position of the right-hand potential minimum (`1/β`, or `0` for a single well).
    pub fn well_minimum(&self) -> f64 {
        match self.well {
            WellShape::DoubleWell => 1.0 / self.beta,
            WellShape::SingleWell => 0.0,
        }
    }

    /// `V''` at [`Self::well_minimum`].
    pub fn well_curvature(&self) -> f64 {
        match self.well {
            WellShape::DoubleWell => 2.0,
            WellShape::SingleWell => 1.0,
        }
    }

    /// Drive amplitude `g/β` multiplying `Q cos(Ωt)`.
    pub fn drive_amplitude(&self) -> f64 {
        self.g / self.beta
    }
}

pub(crate) fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

pub(crate) fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be finite and >= 0, got {v}"),
        ))
    }
}

/// Lowering and raising operators on a basis of `dim` Fock states.
pub fn build_ladder(dim: usize) -> Result<(CMatrix, CMatrix)> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, min: 2 });
    }
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let adag = a.adjoint();
    Ok((a, adag))
}

/// Banded copies of the operators used inside the integrators.
#[derive(Debug, Clone)]
pub(crate) struct FastOperators {
    /// `H_D + H_R`.
    pub static_h: Banded,
    pub h_duffing: Banded,
    /// `−i(H_D + H_R) − ½ Σ L†L`.
    pub generator: Banded,
    pub q: Banded,
    pub p: Banded,
    pub number: Banded,
    /// Nonzero Lindblad channels with their noise slot (0 or 1).
    pub channels: Vec<(usize, Banded)>,
}

/// All operator matrices for one parameter point. Immutable once built.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    dim: usize,
    params: PhysicsParams,
    q: CMatrix,
    p: CMatrix,
    h_duffing: CMatrix,
    h_damping: CMatrix,
    l1: CMatrix,
    l2: CMatrix,
    drive_amplitude: f64,
    drive_frequency: f64,
    pub(crate) fast: FastOperators,
}

/// Position and momentum quadratures from the ladder operators.
fn quadratures(dim: usize) -> Result<(CMatrix, CMatrix)> {
    let (a, adag) = build_ladder(dim)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = (&a + &adag) * Complex64::new(s, 0.0);
    // (a − a†)/(i√2) = −i(a − a†)/√2
    let p = (&a - &adag) * Complex64::new(0.0, -s);
    Ok((q, p))
}

pub fn build_operator_set(params: &PhysicsParams, dim: usize) -> Result<OperatorSet> {
    params.validate()?;
    let (q, p) = quadratures(dim)?;
    let q2 = &q * &q;
    let q4 = &q2 * &q2;
    let p2 = &p * &p;
    let half = Complex64::new(0.5, 0.0);
    let h_duffing = &p2 * half
        + &q4 * Complex64::new(0.25 * params.beta * params.beta, 0.0)
        + &q2 * Complex64::new(0.5 * params.quadratic_sign(), 0.0);
    let h_damping = (&q * &p + &p * &q) * Complex64::new(0.5 * params.gamma, 0.0);
    OperatorSet::assemble(*params, q, p, h_duffing, h_damping)
}

impl OperatorSet {
    fn assemble(
        params: PhysicsParams,
        q: CMatrix,
        p: CMatrix,
        h_duffing: CMatrix,
        h_damping: CMatrix,
    ) -> Result<Self> {
        let dim = q.nrows();
        let c1 = (params.gamma * (1.0 + params.nbar)).sqrt();
        let c2 = (params.gamma * params.nbar).sqrt();
        let l1 = (&q + &p * I) * Complex64::new(c1, 0.0);
        let l2 = (&q - &p * I) * Complex64::new(c2, 0.0);
        let mut ops = Self {
            dim,
            params,
            q,
            p,
            h_duffing,
            h_damping,
            l1,
            l2,
            drive_amplitude: params.drive_amplitude(),
            drive_frequency: params.omega,
            fast: FastOperators {
                static_h: Banded::zeros(dim),
                h_duffing: Banded::zeros(dim),
                generator: Banded::zeros(dim),
                q: Banded::zeros(dim),
                p: Banded::zeros(dim),
                number: Banded::zeros(dim),
                channels: Vec::new(),
            },
        };
        ops.refresh_fast()?;
        Ok(ops)
    }

    fn refresh_fast(&mut self) -> Result<()> {
        let (a, adag) = build_ladder(self.dim)?;
        let static_h = &self.h_duffing + &self.h_damping;
        let mut gen = &static_h * Complex64::new(0.0, -1.0);
        for l in [&self.l1, &self.l2] {
            gen -= (l.adjoint() * l) * Complex64::new(0.5, 0.0);
        }
        let channels = [&self.l1, &self.l2]
            .iter()
            .map(|l| Banded::from_dense(l))
            .enumerate()
            .filter(|(_, b)| !b.is_zero())
            .collect();
        self.fast = FastOperators {
            static_h: Banded::from_dense(&static_h),
            h_duffing: Banded::from_dense(&self.h_duffing),
            generator: Banded::from_dense(&gen),
            q: Banded::from_dense(&self.q),
            p: Banded::from_dense(&self.p),
            number: Banded::from_dense(&(adag * a)),
            channels,
        };
        Ok(())
    }

    /// Operator set whose Hamiltonian is the exact harmonic oscillator
    /// `diag(n + ½)` with no squeezing term and no drive. The Lindblad
    /// operators follow `params` as usual.
    pub fn harmonic_test(params: &PhysicsParams, dim: usize) -> Result<Self> {
        params.validate()?;
        let (q, p) = quadratures(dim)?;
        let h = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(dim, |n, _| {
            Complex64::new(n as f64 + 0.5, 0.0)
        }));
        let mut ops = Self::assemble(*params, q, p, h, CMatrix::zeros(dim, dim))?;
        ops.drive_amplitude = 0.0;
        Ok(ops)
    }

    /// Replace the Hamiltonian parts, keeping quadratures and Lindblad operators.
    pub fn with_hamiltonian(
        mut self,
        h_duffing: CMatrix,
        h_damping: CMatrix,
        drive_amplitude: f64,
    ) -> Result<Self> {
        for m in [&h_duffing, &h_damping] {
            if m.nrows() != self.dim || m.ncols() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: m.nrows(),
                });
            }
        }
        self.h_duffing = h_duffing;
        self.h_damping = h_damping;
        self.drive_amplitude = drive_amplitude;
        self.refresh_fast()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn params(&self) -> &PhysicsParams {
        &self.params
    }
    pub fn q(&self) -> &CMatrix {
        &self.q
    }
    pub fn p(&self) -> &CMatrix {
        &self.p
    }
    pub fn h_duffing(&self) -> &CMatrix {
        &self.h_duffing
    }
    pub fn h_damping(&self) -> &CMatrix {
        &self.h_damping
    }
    pub fn l1(&self) -> &CMatrix {
        &self.l1
    }
    pub fn l2(&self) -> &CMatrix {
        &self.l2
    }
    pub fn drive_amplitude(&self) -> f64 {
        self.drive_amplitude
    }
    pub fn drive_frequency(&self) -> f64 {
        self.drive_frequency
    }

    /// Coefficient `c(t)` in `H_ex(t) = c(t) Q`.
    #[inline]
    pub fn drive_coefficient(&self, t: f64) -> f64 {
        -self.drive_amplitude * (self.drive_frequency * t).cos()
    }

    /// Number of top Fock levels watched by the leakage monitor (top 10%).
    pub fn leakage_levels(&self) -> usize {
        self.dim.div_ceil(10)
    }
}

/// `H(t) = H_D + H_R + H_ex(t)` as a dense matrix.
pub fn hamiltonian_at(ops: &OperatorSet, t: f64) -> CMatrix {
    let c = ops.drive_coefficient(t);
    let mut h = &ops.h_duffing + &ops.h_damping;
    if c != 0.0 {
        h += &ops.q * Complex64::new(c, 0.0);
    }
    h
}

/// Commutator `[a, b]`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Identity with the truncation artifact of `[Q, P]` in the last entry.
pub fn truncated_canonical_commutator(dim: usize) -> CMatrix {
    let mut m = CMatrix::identity(dim, dim) * I;
    m[(dim - 1, dim - 1)] = I * (1.0 - dim as f64);
    m
}
