//! Lindblad master-equation reference solver for small bases.
//!
//! `dρ/dt = −i[H(t), ρ] + Σ_j (L_j ρ L_j† − ½{L_j†L_j, ρ})`, integrated with
//! classical RK4 on the dense density matrix.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermiticity_error, trace, Banded, CMatrix};
use crate::operators::OperatorSet;
use crate::qsd::StateVector;

/// Largest basis the oracle accepts.
pub const MAX_ORACLE_DIM: usize = 64;

/// Steps between invariant checks.
const CHECK_EVERY: u64 = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct MasterState {
    pub rho: CMatrix,
    pub time: f64,
}

impl MasterState {
    pub fn pure(state: &StateVector) -> Self {
        let psi = &state.amplitudes;
        Self {
            rho: psi * psi.adjoint(),
            time: state.time,
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    /// `Tr(ρ A)`.
    pub fn expect(&self, a: &CMatrix) -> Complex64 {
        (&self.rho * a).trace()
    }
}

/// Precomputed banded pieces of the Lindblad generator.
struct Liouvillian<'a> {
    ops: &'a OperatorSet,
    generator_adj: Banded,
    channels: Vec<(Banded, Banded)>,
}

impl<'a> Liouvillian<'a> {
    fn new(ops: &'a OperatorSet) -> Self {
        Self {
            ops,
            generator_adj: ops.fast.generator.adjoint(),
            channels: ops
                .fast
                .channels
                .iter()
                .map(|(_, l)| (l.clone(), l.adjoint()))
                .collect(),
        }
    }

    fn apply(&self, rho: &CMatrix, t: f64, out: &mut CMatrix, scratch: &mut CMatrix) {
        let one = Complex64::new(1.0, 0.0);
        let fast = &self.ops.fast;
        out.fill(Complex64::new(0.0, 0.0));
        fast.generator.left_mul_add(one, rho, out);
        self.generator_adj.right_mul_add(one, rho, out);
        for (l, l_adj) in &self.channels {
            scratch.fill(Complex64::new(0.0, 0.0));
            l.left_mul_add(one, rho, scratch);
            l_adj.right_mul_add(one, scratch, out);
        }
        let c = self.ops.drive_coefficient(t);
        if c != 0.0 {
            fast.q.left_mul_add(Complex64::new(0.0, -c), rho, out);
            fast.q.right_mul_add(Complex64::new(0.0, c), rho, out);
        }
    }
}

/// Right-hand side of the master equation at time `t`.
pub fn lindblad_rhs(ops: &OperatorSet, rho: &CMatrix, t: f64) -> CMatrix {
    let dim = ops.dim();
    let mut out = CMatrix::zeros(dim, dim);
    let mut scratch = CMatrix::zeros(dim, dim);
    Liouvillian::new(ops).apply(rho, t, &mut out, &mut scratch);
    out
}

/// Invariant residues of a density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantCheck {
    pub hermiticity_error: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

pub fn check_invariants(rho: &CMatrix) -> InvariantCheck {
    InvariantCheck {
        hermiticity_error: hermiticity_error(rho),
        trace_error: (trace(rho) - Complex64::new(1.0, 0.0)).norm(),
        min_eigenvalue: hermitian_eigenvalues(rho)[0],
    }
}

fn enforce(rho: &CMatrix, time: f64) -> Result<()> {
    let c = check_invariants(rho);
    let fail = |reason: String| Err(Error::OracleFailure { time, reason });
    if !c.hermiticity_error.is_finite() || c.hermiticity_error > 1e-8 {
        return fail(format!("hermiticity error {:e}", c.hermiticity_error));
    }
    if c.trace_error > 1e-8 {
        return fail(format!("trace drifted by {:e}", c.trace_error));
    }
    if c.min_eigenvalue < -1e-6 {
        return fail(format!("negative eigenvalue {:e}", c.min_eigenvalue));
    }
    Ok(())
}

/// `dst = base + s·k`.
fn combine(dst: &mut CMatrix, base: &CMatrix, s: f64, k: &CMatrix) {
    for ((d, b), k) in dst
        .as_mut_slice()
        .iter_mut()
        .zip(base.as_slice())
        .zip(k.as_slice())
    {
        *d = b + k * s;
    }
}

/// Evolve `init` with step `dt`, returning the state at each requested time
/// (rounded to the nearest step; must be ascending and `≥ init.time`).
pub fn evolve_master_sampled(
    ops: &OperatorSet,
    init: &MasterState,
    dt: f64,
    times: &[f64],
) -> Result<Vec<MasterState>> {
    let dim = ops.dim();
    if dim > MAX_ORACLE_DIM {
        return Err(Error::param(
            "dim",
            format!("master-equation oracle is limited to {MAX_ORACLE_DIM}, got {dim}"),
        ));
    }
    if init.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: init.dim(),
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "must be finite and > 0"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|&t| t < init.time) {
        return Err(Error::param(
            "times",
            "must be ascending and not before the initial time",
        ));
    }
    enforce(&init.rho, init.time)?;

    let liouv = Liouvillian::new(ops);
    let z = CMatrix::zeros(dim, dim);
    let (mut k1, mut k2, mut k3, mut k4) = (z.clone(), z.clone(), z.clone(), z.clone());
    let (mut stage, mut scratch) = (z.clone(), z);
    let mut rho = init.rho.clone();
    let t0 = init.time;
    let mut out = Vec::with_capacity(times.len());
    let mut step: u64 = 0;
    for &target in times {
        let target_step = ((target - t0) / dt).round() as u64;
        while step < target_step {
            let t = t0 + step as f64 * dt;
            let h = 0.5 * dt;
            liouv.apply(&rho, t, &mut k1, &mut scratch);
            combine(&mut stage, &rho, h, &k1);
            liouv.apply(&stage, t + h, &mut k2, &mut scratch);
            combine(&mut stage, &rho, h, &k2);
            liouv.apply(&stage, t + h, &mut k3, &mut scratch);
            combine(&mut stage, &rho, dt, &k3);
            liouv.apply(&stage, t + dt, &mut k4, &mut scratch);
            let w = dt / 6.0;
            for (i, r) in rho.as_mut_slice().iter_mut().enumerate() {
                *r += (k1.as_slice()[i]
                    + 2.0 * (k2.as_slice()[i] + k3.as_slice()[i])
                    + k4.as_slice()[i])
                    * w;
            }
            step += 1;
            if step % CHECK_EVERY == 0 {
                enforce(&rho, t0 + step as f64 * dt)?;
            }
        }
        let time = t0 + step as f64 * dt;
        enforce(&rho, time)?;
        out.push(MasterState {
            rho: rho.clone(),
            time,
        });
    }
    Ok(out)
}

/// Evolve `init` to `t_end`.
pub fn evolve_master(
    ops: &OperatorSet,
    init: &MasterState,
    t_end: f64,
    dt: f64,
) -> Result<MasterState> {
    let mut v = evolve_master_sampled(ops, init, dt, &[t_end])?;
    Ok(v.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_ladder, build_operator_set, PhysicsParams, WellShape};

    fn random_density(dim: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let m = &a * a.adjoint();
        let tr = m.trace();
        m / tr
    }

    fn number_op(dim: usize) -> CMatrix {
        let (a, adag) = build_ladder(dim).unwrap();
        adag * a
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let mut params = PhysicsParams::new(1.0, 0.3);
        params.nbar = 1.5;
        let ops = build_operator_set(&params, 16).unwrap();
        let rho = random_density(16, 3);
        for t in [0.0, 0.7, 2.1] {
            let d = lindblad_rhs(&ops, &rho, t);
            assert!(d.trace().norm() < 1e-11, "{}", d.trace());
            assert!(hermiticity_error(&d) < 1e-11);
        }
    }

    #[test]
    fn rhs_matches_dense_formula() {
        let mut params = PhysicsParams::new(0.7, 0.2);
        params.nbar = 0.5;
        let ops = build_operator_set(&params, 12).unwrap();
        let rho = random_density(12, 9);
        let t = 1.3;
        let h = crate::operators::hamiltonian_at(&ops, t);
        let mi = Complex64::new(0.0, -1.0);
        let mut expected = (&h * &rho - &rho * &h) * mi;
        for l in [ops.l1(), ops.l2()] {
            let ld = l.adjoint();
            let ldl = &ld * l;
            expected += l * &rho * &ld - (&ldl * &rho + &rho * &ldl) * Complex64::new(0.5, 0.0);
        }
        let got = lindblad_rhs(&ops, &rho, t);
        assert!((got - expected).norm() < 1e-11);
    }

    #[test]
    fn maximally_mixed_state_is_stationary_without_dissipation() {
        let params = PhysicsParams {
            gamma: 0.0,
            ..PhysicsParams::new(1.0, 0.3)
        };
        let ops = build_operator_set(&params, 10).unwrap();
        let rho = CMatrix::identity(10, 10) / Complex64::new(10.0, 0.0);
        for t in [0.0, 0.4] {
            assert!(lindblad_rhs(&ops, &rho, t).norm() < 1e-13);
        }
    }

    #[test]
    fn pure_state_without_dissipation_keeps_purity() {
        let params = PhysicsParams {
            gamma: 0.0,
            ..PhysicsParams::new(1.0, 0.3)
        };
        let ops = build_operator_set(&params, 24).unwrap();
        let init = MasterState::pure(&StateVector::well_ground_state(&params, 24));
        let fin = evolve_master(&ops, &init, 3.0, 2e-3).unwrap();
        assert!((fin.purity() - 1.0).abs() < 1e-9, "{}", fin.purity());
    }

    #[test]
    fn harmonic_decay_rate() {
        // d⟨n⟩/dt = −2Γ(⟨n⟩ − n̄) for the harmonic test Hamiltonian
        let params = PhysicsParams {
            gamma: 0.1,
            g: 0.0,
            well: WellShape::SingleWell,
            ..Default::default()
        };
        let dim = 16;
        let ops = OperatorSet::harmonic_test(&params, dim).unwrap();
        let init = MasterState::pure(&StateVector::fock(dim, 4));
        let n = number_op(dim);
        let d = lindblad_rhs(&ops, &init.rho, 0.0);
        assert!(((&d * &n).trace().re + 2.0 * 0.1 * 4.0).abs() < 1e-12);
        let states = evolve_master_sampled(&ops, &init, 1e-2, &[1.0, 5.0]).unwrap();
        for s in states {
            let want = 4.0 * (-0.2 * s.time).exp();
            assert!((s.expect(&n).re - want).abs() < 1e-9);
        }
    }

    #[test]
    fn thermal_steady_state() {
        let params = PhysicsParams {
            gamma: 0.5,
            g: 0.0,
            nbar: 2.0,
            well: WellShape::SingleWell,
            ..Default::default()
        };
        let dim = 48;
        let ops = OperatorSet::harmonic_test(&params, dim).unwrap();
        let init = MasterState::pure(&StateVector::fock(dim, 0));
        let fin = evolve_master(&ops, &init, 12.0, 5e-3).unwrap();
        let n = fin.expect(&number_op(dim)).re;
        assert!((n - 2.0).abs() < 0.01, "{n}");
    }

    #[test]
    fn rejects_oversized_basis_and_bad_times() {
        let params = PhysicsParams::new(1.0, 0.3);
        let ops = build_operator_set(&params, 65).unwrap();
        let init = MasterState::pure(&StateVector::fock(65, 0));
        assert!(evolve_master(&ops, &init, 1.0, 1e-3).is_err());
        let ops = build_operator_set(&params, 8).unwrap();
        let init = MasterState::pure(&StateVector::fock(8, 0));
        assert!(evolve_master_sampled(&ops, &init, 1e-3, &[2.0, 1.0]).is_err());
        assert!(evolve_master(&ops, &init, 1.0, 0.0).is_err());
    }

    #[test]
    fn invariant_violation_is_reported() {
        let params = PhysicsParams::new(1.0, 0.3);
        let ops = build_operator_set(&params, 8).unwrap();
        let mut init = MasterState::pure(&StateVector::fock(8, 0));
        init.rho[(0, 0)] = Complex64::new(2.0, 0.0);
        assert!(matches!(
            evolve_master(&ops, &init, 1.0, 1e-3),
            Err(Error::OracleFailure { .. })
        ));
    }

    #[test]
    fn driven_double_well_matches_reference_solution() {
        // independent adaptive high-order solution of the same model
        let params = PhysicsParams::new(1.0, 0.3);
        let ops = build_operator_set(&params, 32).unwrap();
        let init = MasterState::pure(&StateVector::well_ground_state(&params, 32));
        let fin = evolve_master(&ops, &init, 10.0, 2e-3).unwrap();
        let checks = [
            (fin.expect(ops.q()).re, -0.113_326_057_450_800_64),
            (fin.expect(ops.p()).re, -0.338_284_569_773_863_23),
            (fin.expect(&number_op(32)).re, 0.276_264_889_046_021_64),
            (fin.purity(), 0.828_733_949_611_044_4),
            (fin.expect(ops.h_duffing()).re, 0.357_240_029_040_570_3),
        ];
        for (got, want) in checks {
            assert!((got - want).abs() < 1e-7, "{got} vs {want}");
        }
    }
}
