//! Position densities, expectation values and Wigner functions.

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::PositionGrid;
use crate::linalg::{inner, norm_sqr, CMatrix, CVector, ZERO};
use crate::operators::OperatorSet;
use crate::qsd::StateVector;

const RESCALE: f64 = 1e150;

/// Normalized harmonic-oscillator eigenfunctions `φ_0(x) … φ_{count−1}(x)`
/// by the three-term recurrence
/// `φ_n = √(2/n) x φ_{n−1} − √((n−1)/n) φ_{n−2}`.
///
/// The Gaussian factor is carried as a separate exponent so that large `|x|`
/// does not underflow `φ_0` before the polynomial part has grown.
pub fn hermite_functions(x: f64, out: &mut [f64]) {
    let count = out.len();
    if count == 0 {
        return;
    }
    let mut log_scale = -0.5 * x * x;
    let mut prev = 0.0f64;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    out[0] = cur * log_scale.exp();
    for n in 1..count {
        let nf = n as f64;
        let next = (2.0 / nf).sqrt() * x * cur - ((nf - 1.0) / nf).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += RESCALE.ln();
        }
        out[n] = cur * log_scale.exp();
    }
}

/// Turning point of the highest Fock level, `√(2·dim + 1)`.
pub fn representable_extent(dim: usize) -> f64 {
    (2.0 * dim as f64 + 1.0).sqrt()
}

/// Hermite functions tabulated at the bin centers of a grid.
#[derive(Debug, Clone)]
pub struct HermiteTable {
    grid: PositionGrid,
    dim: usize,
    /// Row-major `bins × dim`.
    values: Vec<f64>,
}

impl HermiteTable {
    pub fn new(grid: PositionGrid, dim: usize) -> Self {
        let mut values = vec![0.0; grid.bins * dim];
        for (b, row) in values.chunks_mut(dim).enumerate() {
            hermite_functions(grid.center(b), row);
        }
        Self { grid, dim, values }
    }

    pub fn grid(&self) -> &PositionGrid {
        &self.grid
    }

    /// `|Σ_n c_n φ_n(x_b)|²` for every bin center.
    pub fn density_into(&self, amplitudes: &[Complex64], out: &mut [f64]) {
        debug_assert_eq!(amplitudes.len(), self.dim);
        for (row, o) in self.values.chunks(self.dim).zip(out.iter_mut()) {
            let mut acc = ZERO;
            for (phi, c) in row.iter().zip(amplitudes) {
                acc += c * *phi;
            }
            *o = acc.norm_sqr();
        }
    }

    /// `Σ_mn φ_m(x_b) ρ_mn φ_n(x_b)` for every bin center.
    pub fn density_matrix_density(&self, rho: &CMatrix) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.bins];
        let mut tmp = vec![ZERO; self.dim];
        for (row, o) in self.values.chunks(self.dim).zip(out.iter_mut()) {
            for (m, t) in tmp.iter_mut().enumerate() {
                *t = (0..self.dim).map(|n| rho[(m, n)] * row[n]).sum();
            }
            *o = row.iter().zip(&tmp).map(|(phi, t)| t.re * phi).sum();
        }
        out
    }
}

/// Position probability density of `state` at the bin centers of `grid`.
pub fn position_density(state: &StateVector, grid: &PositionGrid) -> Vec<f64> {
    let table = HermiteTable::new(*grid, state.dim());
    let mut out = vec![0.0; grid.bins];
    let norm2 = norm_sqr(state.amplitudes.as_slice());
    table.density_into(state.amplitudes.as_slice(), &mut out);
    out.iter_mut().for_each(|d| *d /= norm2);
    let extent = representable_extent(state.dim());
    if grid.x_min < -extent || grid.x_max > extent {
        let clipped = 1.0 - out.iter().sum::<f64>() * grid.width();
        warn!(
            "grid [{}, {}] extends past the representable range ±{extent:.3} of a \
             {}-level basis; estimated mass outside the grid {clipped:.3e}",
            grid.x_min,
            grid.x_max,
            state.dim()
        );
    }
    out
}

/// Fock expansion of the Gaussian `(ω/π)^¼ exp(−ω(x − x₀)²/2)`, computed by
/// quadrature against the Hermite functions and renormalized in the basis.
pub fn gaussian_wavepacket(dim: usize, center: f64, omega: f64) -> CVector {
    let width = 1.0 / omega.sqrt();
    let (lo, hi) = (center - 12.0 * width, center + 12.0 * width);
    let h = (0.004 * width).min(0.004);
    let n = ((hi - lo) / h).ceil() as usize;
    let h = (hi - lo) / n as f64;
    let norm = (omega / std::f64::consts::PI).powf(0.25);
    let mut coeffs = vec![0.0f64; dim];
    let mut phi = vec![0.0f64; dim];
    for k in 0..=n {
        let x = lo + k as f64 * h;
        let w = if k == 0 || k == n { 0.5 * h } else { h };
        let g = norm * (-0.5 * omega * (x - center).powi(2)).exp() * w;
        hermite_functions(x, &mut phi);
        for (c, p) in coeffs.iter_mut().zip(&phi) {
            *c += g * p;
        }
    }
    let mut v = CVector::from_iterator(dim, coeffs.into_iter().map(|c| Complex64::new(c, 0.0)));
    let nrm = v.norm();
    v.unscale_mut(nrm);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectations {
    pub q: f64,
    pub p: f64,
    /// `⟨H(t)⟩` including damping and drive terms.
    pub energy: f64,
    /// `⟨H_D⟩`, the bare double-well energy.
    pub duffing_energy: f64,
    pub number: f64,
}

const IMAG_TOLERANCE: f64 = 1e-8;

fn real_part(z: Complex64, what: &'static str) -> Result<f64> {
    if z.im.abs() > IMAG_TOLERANCE {
        return Err(Error::NumericalInconsistency {
            what,
            residue: z.im.abs(),
        });
    }
    Ok(z.re)
}

/// `⟨Q⟩, ⟨P⟩, ⟨H(t)⟩, ⟨H_D⟩, ⟨a†a⟩` of a (not necessarily normalized) state.
pub fn expectations(state: &StateVector, ops: &OperatorSet, t: f64) -> Result<Expectations> {
    if state.dim() != ops.dim() {
        return Err(Error::DimensionMismatch {
            expected: ops.dim(),
            got: state.dim(),
        });
    }
    let psi = state.amplitudes.as_slice();
    let norm2 = norm_sqr(psi);
    let mut buf = vec![ZERO; psi.len()];
    let fast = &ops.fast;
    let mut expect = |op: &crate::linalg::Banded| {
        op.apply(psi, &mut buf);
        inner(psi, &buf) / norm2
    };
    let q = expect(&fast.q);
    let p = expect(&fast.p);
    let h_static = expect(&fast.static_h);
    let h_d = expect(&fast.h_duffing);
    let n = expect(&fast.number);
    let energy = h_static + q * ops.drive_coefficient(t);
    Ok(Expectations {
        q: real_part(q, "<Q>")?,
        p: real_part(p, "<P>")?,
        energy: real_part(energy, "<H>")?,
        duffing_energy: real_part(h_d, "<H_D>")?,
        number: real_part(n, "<a+a>")?,
    })
}

/// Phase-space window for a Wigner function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub q_points: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub p_points: usize,
}

impl WignerSpec {
    pub fn square(half_width: f64, points: usize) -> Self {
        Self {
            q_min: -half_width,
            q_max: half_width,
            q_points: points,
            p_min: -half_width,
            p_max: half_width,
            p_points: points,
        }
    }

    /// 128×128 points over `±max(4, 2.5/β)` in both quadratures.
    pub fn default_for_beta(beta: f64) -> Self {
        Self::square(4f64.max(2.5 / beta), 128)
    }

    fn axis(min: f64, max: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (min + max)];
        }
        let step = (max - min) / (n - 1) as f64;
        (0..n).map(|k| min + k as f64 * step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub q_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    /// `values[(i, j)] = W(q_axis[i], p_axis[j])`.
    pub values: DMatrix<f64>,
}

impl WignerGrid {
    fn spacing(axis: &[f64]) -> f64 {
        if axis.len() > 1 {
            axis[1] - axis[0]
        } else {
            1.0
        }
    }

    /// Trapezoidal `∫∫ W dQ dP`.
    pub fn integral(&self) -> f64 {
        let wq = trapezoid_weights(&self.q_axis);
        let wp = trapezoid_weights(&self.p_axis);
        let mut s = 0.0;
        for (i, a) in wq.iter().enumerate() {
            for (j, b) in wp.iter().enumerate() {
                s += a * b * self.values[(i, j)];
            }
        }
        s
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    /// `∫ W dP` at every `q_axis` point.
    pub fn position_marginal(&self) -> Vec<f64> {
        let wp = trapezoid_weights(&self.p_axis);
        (0..self.q_axis.len())
            .map(|i| {
                (0..self.p_axis.len())
                    .map(|j| wp[j] * self.values[(i, j)])
                    .sum()
            })
            .collect()
    }

    pub fn q_spacing(&self) -> f64 {
        Self::spacing(&self.q_axis)
    }

    pub fn p_spacing(&self) -> f64 {
        Self::spacing(&self.p_axis)
    }
}

fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    if n < 2 {
        return vec![1.0; n];
    }
    let h = axis[1] - axis[0];
    (0..n)
        .map(|k| if k == 0 || k == n - 1 { 0.5 * h } else { h })
        .collect()
}

/// Wigner function of a density matrix, normalized to unit integral over
/// phase space.
///
/// Uses the Laguerre-polynomial expansion `W = Σ_mn ρ_mn W_mn(α)` with
/// `α = (Q + iP)/√2`, building the `W_mn` by upward recurrence in `m` and
/// `n` so each grid point costs `O(dim²)`.
pub fn wigner(rho: &CMatrix, spec: &WignerSpec) -> Result<WignerGrid> {
    if !rho.is_square() {
        return Err(Error::param("rho", "density matrix must be square"));
    }
    if spec.q_points == 0 || spec.p_points == 0 {
        return Err(Error::param(
            "wigner grid",
            "need at least one point per axis",
        ));
    }
    let q_axis = WignerSpec::axis(spec.q_min, spec.q_max, spec.q_points);
    let p_axis = WignerSpec::axis(spec.p_min, spec.p_max, spec.p_points);
    let dim = rho.nrows();
    let mut values = DMatrix::zeros(q_axis.len(), p_axis.len());
    let sqrt_n: Vec<f64> = (0..dim).map(|n| (n as f64).sqrt()).collect();
    let mut wl = vec![ZERO; dim];
    for (i, &q) in q_axis.iter().enumerate() {
        for (j, &p) in p_axis.iter().enumerate() {
            let a = Complex64::new(q, p) * std::f64::consts::FRAC_1_SQRT_2;
            let a_conj = a.conj();
            wl[0] = Complex64::new((-2.0 * a.norm_sqr()).exp() / std::f64::consts::PI, 0.0);
            let mut w = rho[(0, 0)].re * wl[0].re;
            for n in 1..dim {
                wl[n] = (2.0 * a * wl[n - 1]) / sqrt_n[n];
                w += 2.0 * (rho[(0, n)] * wl[n]).re;
            }
            for m in 1..dim {
                let mut temp = wl[m];
                wl[m] = (2.0 * a_conj * temp - sqrt_n[m] * wl[m - 1]) / sqrt_n[m];
                w += (rho[(m, m)] * wl[m]).re;
                for n in m + 1..dim {
                    let next = (2.0 * a * wl[n - 1] - sqrt_n[m] * temp) / sqrt_n[n];
                    temp = wl[n];
                    wl[n] = next;
                    w += 2.0 * (rho[(m, n)] * wl[n]).re;
                }
            }
            values[(i, j)] = w;
        }
    }
    let grid = WignerGrid {
        q_axis,
        p_axis,
        values,
    };
    if grid.q_spacing() > 0.5 || grid.p_spacing() > 0.5 {
        warn!(
            "Wigner grid spacing ({:.3}, {:.3}) exceeds 0.5; negative regions may be missed",
            grid.q_spacing(),
            grid.p_spacing()
        );
    }
    Ok(grid)
}

/// Projector `|ψ⟩⟨ψ|` of a normalized copy of `state`.
pub fn projector(state: &StateVector) -> CMatrix {
    let mut v = state.amplitudes.clone();
    let n = v.norm();
    v.unscale_mut(n);
    &v * v.adjoint()
}

pub fn wigner_of_state(state: &StateVector, spec: &WignerSpec) -> Result<WignerGrid> {
    wigner(&projector(state), spec)
}
