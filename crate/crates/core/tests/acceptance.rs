//! Acceptance checks, one line per criterion.
//!
//! Run all with `cargo test --release --test acceptance`, or a subset by
//! number: `cargo test --release --test acceptance -- 1 7`.

use std::cell::OnceCell;
use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use qsd_duffing::classical::{classical_histogram, CloudSpec};
use qsd_duffing::ensemble::{
    run_checkpoints, run_ensemble, run_ensemble_range, DensityMatrix, EnsembleConfig,
    EnsembleResult,
};
use qsd_duffing::histogram::{NormalizedHistogram, PositionGrid};
use qsd_duffing::linalg::{hermiticity_error, trace_distance, CMatrix};
use qsd_duffing::nems::{self, BeamSpec, CrossSection};
use qsd_duffing::observables::{wigner_of_state, WignerSpec};
use qsd_duffing::operators::{
    build_operator_set, commutator, truncated_canonical_commutator, OperatorSet, PhysicsParams,
};
use qsd_duffing::oracle::{evolve_master, MasterState};
use qsd_duffing::qsd::{
    run_trajectory, trajectory_seed, IntegratorConfig, NoiseStream, Observer, StateVector,
};

const PEAK_FLOOR: f64 = 0.2;

fn periods(n: f64) -> f64 {
    n * TAU
}

fn icfg(dt: f64, transient_periods: f64) -> IntegratorConfig {
    IntegratorConfig {
        dt,
        t_transient: periods(transient_periods),
        ..IntegratorConfig::default()
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Runs shared between criteria.
#[derive(Default)]
struct Shared {
    /// Oracle ρ(10) and ensemble ρ(10) for M = 500, 1000, 2000.
    c1: OnceCell<(CMatrix, Vec<CMatrix>)>,
    beta1: OnceCell<EnsembleResult>,
    beta03: OnceCell<EnsembleResult>,
}

// β = 1 column: dim 40, dt 1.2e-3 (0.44 of the linear stability limit)
const BETA1_DIM: usize = 40;
const BETA1_DT: f64 = 1.2e-3;

fn quantum_panel(beta: f64, nbar: f64, dim: usize, dt: f64, m: u64, seed: u64) -> EnsembleResult {
    let mut params = PhysicsParams::new(beta, 0.3);
    params.nbar = nbar;
    let ops = build_operator_set(&params, dim).unwrap();
    let ecfg = EnsembleConfig::new(m, seed, PositionGrid::default_for_beta(beta));
    run_ensemble(&ops, &icfg(dt, 10.0), &ecfg).unwrap()
}

impl Shared {
    fn c1(&self) -> &(CMatrix, Vec<CMatrix>) {
        self.c1.get_or_init(|| {
            let params = PhysicsParams::new(1.0, 0.3);
            let ops = build_operator_set(&params, 32).unwrap();
            let init = StateVector::well_ground_state(&params, 32);
            let oracle = evolve_master(&ops, &MasterState::pure(&init), 10.0, 2e-3).unwrap();
            let cfg = icfg(2e-3, 0.0);
            let mut ens = run_checkpoints(&ops, &cfg, &init, 7, 0..500, &[10.0]).unwrap();
            let mut prefixes = vec![ens.density(0)];
            for r in [500..1000, 1000..2000] {
                ens.absorb(run_checkpoints(&ops, &cfg, &init, 7, r, &[10.0]).unwrap())
                    .unwrap();
                prefixes.push(ens.density(0));
            }
            (oracle.rho, prefixes)
        })
    }

    fn beta1(&self) -> &EnsembleResult {
        self.beta1
            .get_or_init(|| quantum_panel(1.0, 0.0, BETA1_DIM, BETA1_DT, 512, 99))
    }

    fn beta03(&self) -> &EnsembleResult {
        self.beta03
            .get_or_init(|| quantum_panel(0.3, 0.0, 56, 5e-3, 512, 99))
    }
}

fn describe(h: &NormalizedHistogram) -> String {
    format!(
        "right mass {:.3}, asymmetry {:.3}, peaks {}, mode {:.3}, variance {:.3}",
        h.right_mass(),
        h.asymmetry(),
        h.peak_count(PEAK_FLOOR),
        h.mode(),
        h.variance()
    )
}

/// Oracle equivalence at dim 32, t = 10.
fn criterion_1(s: &Shared) -> Outcome {
    let (oracle, prefixes) = s.c1();
    let td: Vec<f64> = prefixes.iter().map(|r| trace_distance(r, oracle)).collect();
    let decreasing = td.windows(2).all(|w| w[1] < w[0]);

    // the same ensemble with the sign of H reversed
    let params = PhysicsParams::new(1.0, 0.3);
    let ops = build_operator_set(&params, 32).unwrap();
    let flipped = ops
        .clone()
        .with_hamiltonian(-ops.h_duffing(), -ops.h_damping(), -ops.drive_amplitude())
        .unwrap();
    let init = StateVector::well_ground_state(&params, 32);
    let wrong = run_checkpoints(&flipped, &icfg(2e-3, 0.0), &init, 7, 0..200, &[10.0]).unwrap();
    let td_wrong = trace_distance(&wrong.density(0), oracle);

    let pass = td[2] <= 0.05 && decreasing && td_wrong > 0.2;
    outcome(
        pass,
        format!(
            "trace distance M=500/1000/2000: {:.4}/{:.4}/{:.4} (need ≤ 0.05 at 2000, decreasing); reversed-sign H at M=200: {:.3} (need > 0.2)",
            td[0], td[1], td[2], td_wrong
        ),
    )
}

/// Harmonic relaxation of ⟨a†a⟩ from |3⟩.
fn criterion_2(_: &Shared) -> Outcome {
    let gamma = 0.1;
    let times: Vec<f64> = (1..=10).map(|k| 1.5 * k as f64).collect();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (nbar, dim) in [(0.0, 24usize), (2.0, 40)] {
        let mut params = PhysicsParams::new(1.0, gamma);
        params.nbar = nbar;
        let ops = OperatorSet::harmonic_test(&params, dim).unwrap();
        let init = StateVector::fock(dim, 3);
        let c = run_checkpoints(&ops, &icfg(5e-3, 0.0), &init, 11, 0..1000, &times).unwrap();
        let mut z_max = 0.0f64;
        for (k, &t) in c.times.iter().enumerate() {
            let (mean, se) = c.mean_and_error(k, |e| e.number);
            let decay = (-2.0 * gamma * t).exp();
            let exact = 3.0 * decay + nbar * (1.0 - decay);
            z_max = z_max.max((mean - exact).abs() / se);
        }
        worst = worst.max(z_max);
        parts.push(format!("n̄={nbar}: max |Δ|/SE {z_max:.2}"));
    }
    outcome(
        worst <= 3.0,
        format!(
            "{} over 10 checkpoints, M=1000 (need ≤ 3)",
            parts.join(", ")
        ),
    )
}

/// Desk-scale columns of the zero-temperature grid plus the small-β stand-ins.
fn criterion_3(s: &Shared) -> Outcome {
    let b03 = &s.beta03().p_avg;
    let ok03 = b03.peak_count(PEAK_FLOOR) == 2
        && (b03.right_mass() - 0.5).abs() <= 0.05
        && b03.asymmetry() <= 0.1;
    let b1 = &s.beta1().p_avg;
    let ok1 = b1.peak_count(PEAK_FLOOR) == 1 && b1.mode().abs() < 0.2;

    let classical = classical_panel(0.3);
    let one_sided = classical.right_mass().max(classical.left_mass());
    let small = quantum_panel(0.1, 0.0, 200, 4e-3, 16, 99);
    let dominant = small.p_avg.right_mass().max(small.p_avg.left_mass());

    let pass = ok03 && ok1 && one_sided >= 0.95 && dominant >= 0.8;
    outcome(
        pass,
        format!(
            "β=0.3 [{}; max leakage {:.1e}] needs 2 peaks, |right−0.5| ≤ 0.05, asymmetry ≤ 0.1; \
             β=1 [{}; max leakage {:.1e}] needs 1 peak, |mode| < 0.2; \
             classical β=0.01 one-sided mass {:.3} (≥ 0.95); quantum β=0.1 dominant well mass {:.3} (≥ 0.8)",
            describe(b03),
            s.beta03().max_leakage,
            describe(b1),
            s.beta1().max_leakage,
            one_sided,
            dominant
        ),
    )
}

fn classical_panel(gamma: f64) -> NormalizedHistogram {
    let params = PhysicsParams::new(0.01, gamma);
    let cfg = IntegratorConfig {
        dt: 1e-2,
        ..IntegratorConfig::default()
    };
    let cloud = CloudSpec::matching_quantum(&params, 256, 3);
    classical_histogram(
        &params,
        &cfg,
        &cloud,
        PositionGrid::default_for_beta(0.01),
        256,
    )
    .unwrap()
    .finalize()
}

/// Classical damping contrast.
fn criterion_4(_: &Shared) -> Outcome {
    let low = classical_panel(0.125);
    let high = classical_panel(0.3);
    let both = low.right_mass().min(low.left_mass());
    let one = high.right_mass().max(high.left_mass());
    outcome(
        both >= 0.10 && one >= 0.95,
        format!("Γ=0.125 smaller half-line mass {both:.3} (≥ 0.10); Γ=0.3 one-sided mass {one:.3} (≥ 0.95)"),
    )
}

struct KeepStates(Vec<StateVector>);

impl Observer for KeepStates {
    fn observe(&mut self, _: usize, s: &StateVector, _: &OperatorSet) -> qsd_duffing::Result<()> {
        self.0.push(s.clone());
        Ok(())
    }
}

/// Wigner negativity along one trajectory at β = 1.
fn criterion_5(_: &Shared) -> Outcome {
    let fock1 = StateVector::fock(8, 1);
    let w = wigner_of_state(&fock1, &WignerSpec::square(1.0, 3)).unwrap();
    let w00 = w.values[(1, 1)];
    let fock_ok = (w00 + 1.0 / PI).abs() <= 1e-6;

    let params = PhysicsParams::new(1.0, 0.3);
    let ops = build_operator_set(&params, BETA1_DIM).unwrap();
    let init = StateVector::well_ground_state(&params, BETA1_DIM);
    let mut keep = KeepStates(Vec::new());
    run_trajectory(
        &ops,
        &icfg(BETA1_DT, 10.0),
        &init,
        trajectory_seed(5, 0),
        16,
        &mut [&mut keep],
    )
    .unwrap();
    let spec = WignerSpec::default_for_beta(1.0);
    let mins: Vec<f64> = keep
        .0
        .iter()
        .map(|s| wigner_of_state(s, &spec).unwrap().min())
        .collect();
    let negative = mins.iter().filter(|&&m| m < -0.01).count();
    let lowest = mins.iter().cloned().fold(f64::INFINITY, f64::min);
    let frac = negative as f64 / mins.len() as f64;
    outcome(
        fock_ok && frac >= 0.75,
        format!(
            "W_|1⟩(0,0) + 1/π = {:.1e} (need ≤ 1e-6); min W < −0.01 at {negative}/{} sampled times (need ≥ 75%), lowest {lowest:.3}",
            w00 + 1.0 / PI,
            mins.len()
        ),
    )
}

/// Finite temperature at β = 1.
fn criterion_6(s: &Shared) -> Outcome {
    let cold = &s.beta1().p_avg;
    // n̄ = 0.5 populates higher levels than n̄ = 0
    let warm = quantum_panel(1.0, 0.5, 48, 8e-4, 256, 99);
    let hot = quantum_panel(1.0, 4.0, BETA1_DIM, BETA1_DT, 128, 99);
    // the thermal peak is flat-topped, so it is located by its half-maximum
    // midpoint; the bin argmax wanders across the plateau
    let central =
        |h: &NormalizedHistogram| h.peak_count(PEAK_FLOOR) == 1 && h.half_max_center().abs() < 0.2;
    let same_class = central(cold) && central(&warm.p_avg);
    let broader = hot.p_avg.variance() > cold.variance();
    outcome(
        same_class && broader,
        format!(
            "n̄=0.5 [{}, half-max center {:.3}; max leakage {:.1e}] vs n̄=0 half-max center {:.3}, \
             both need 1 peak and |center| < 0.2; variance n̄=4 {:.3} vs n̄=0 {:.3} \
             (n̄=4 leakage {:.2}, captured mass {:.2}: not converged in a fixed basis)",
            describe(&warm.p_avg),
            warm.p_avg.half_max_center(),
            warm.max_leakage,
            cold.half_max_center(),
            hot.p_avg.variance(),
            cold.variance(),
            hot.max_leakage,
            hot.p_avg.captured_mass
        ),
    )
}

/// Beam mapping.
fn criterion_7(_: &Shared) -> Outcome {
    let si = BeamSpec::new(
        1e-6,
        CrossSection::Rectangular { a: 5e-9, b: 10e-9 },
        nems::SILICON,
        0.0,
    );
    let tc = si.critical_tension();
    let c2 = |t0: f64| nems::potential_coefficients(&BeamSpec { t0, ..si }).unwrap();
    let above = c2(tc * (1.0 - 1e-9));
    let below = c2(tc * (1.0 + 1e-9));
    let boundary =
        above.c2 > 0.0 && !above.is_double_well && below.c2 < 0.0 && below.is_double_well;

    let four_pi2 = 4.0 * PI * PI;
    let mut worst = 0.0f64;
    for (l1, l2) in [
        (40.0, 45.0),
        (39.6, 60.0),
        (50.0, 2.0 * four_pi2),
        (42.0, 100.0),
    ] {
        let b = |l: f64| nems::beta_squared(&nems::witkamp_swnt(l)).unwrap();
        let want = ((l1 / four_pi2 - 1.0) / (l2 / four_pi2 - 1.0)).powf(-1.5);
        worst = worst.max((b(l1) / b(l2) / want - 1.0).abs());
    }
    let rejected = matches!(
        nems::beta_from_beam(&nems::witkamp_swnt(26.0)),
        Err(qsd_duffing::Error::Domain(_))
    ) && !nems::potential_coefficients(&nems::witkamp_swnt(26.0))
        .unwrap()
        .is_double_well;
    outcome(
        boundary && worst <= 1e-9 && rejected,
        format!(
            "c₂ sign flips across T₀ = −4π²EI/l₀² ± 1e-9: {boundary}; worst ratio error {worst:.1e} (≤ 1e-9); λ=26 rejected: {rejected}"
        ),
    )
}

/// Numerical hygiene.
fn criterion_8(s: &Shared) -> Outcome {
    let mut notes = Vec::new();

    // operator invariants
    let ops = build_operator_set(&PhysicsParams::new(1.0, 0.3), 32).unwrap();
    let comm_err = (commutator(ops.q(), ops.p()) - truncated_canonical_commutator(32)).camax();
    let herm = [ops.q(), ops.p(), ops.h_duffing(), ops.h_damping()]
        .iter()
        .map(|m| hermiticity_error(m))
        .fold(0.0, f64::max);
    let ops_ok = comm_err < 1e-12 && herm < 1e-12;
    notes.push(format!(
        "[Q,P] error {comm_err:.0e}, Hermiticity {herm:.0e}"
    ));

    // noise moments
    let (n, dt) = (200_000usize, 0.01);
    let mut noise = NoiseStream::new(42);
    let (mut mean, mut m2, mut pseudo, mut cross) = (
        [Complex64::new(0.0, 0.0); 2],
        [0.0; 2],
        [Complex64::new(0.0, 0.0); 2],
        Complex64::new(0.0, 0.0),
    );
    for _ in 0..n {
        let d = noise.step(dt);
        for c in 0..2 {
            mean[c] += d[c];
            m2[c] += d[c].norm_sqr();
            pseudo[c] += d[c] * d[c];
        }
        cross += d[0] * d[1].conj();
    }
    let nf = n as f64;
    // standard errors: mean √(dt/n), |dξ|² dt/√n, dξ² and cross dt/√n
    let z = [
        mean.iter()
            .map(|m| m.norm() / nf / (dt / nf).sqrt())
            .fold(0.0, f64::max),
        m2.iter()
            .map(|v| (v / nf - dt).abs() / (dt / nf.sqrt()))
            .fold(0.0, f64::max),
        pseudo
            .iter()
            .map(|p| p.norm() / nf / (dt / nf.sqrt()))
            .fold(0.0, f64::max),
        cross.norm() / nf / (dt / nf.sqrt()),
    ];
    let noise_ok = z.iter().all(|&v| v < 5.0);
    notes.push(format!(
        "noise z-scores mean/|dξ|²/dξ²/cross {:.1}/{:.1}/{:.1}/{:.1} (< 5)",
        z[0], z[1], z[2], z[3]
    ));

    // dt halving with coupled noise
    let params = PhysicsParams::new(1.0, 0.3);
    let ops = build_operator_set(&params, 32).unwrap();
    let ecfg = EnsembleConfig::new(64, 2024, PositionGrid::default_for_beta(1.0));
    let coarse = run_ensemble(
        &ops,
        &IntegratorConfig {
            noise_substeps: 2,
            ..icfg(2e-3, 10.0)
        },
        &ecfg,
    )
    .unwrap();
    let fine = run_ensemble(&ops, &icfg(1e-3, 10.0), &ecfg).unwrap();
    let dx = ecfg.grid.width();
    let l1: f64 = coarse
        .p_avg
        .density
        .iter()
        .zip(&fine.p_avg.density)
        .map(|(a, b)| (a - b).abs() * dx)
        .sum();
    let se: f64 = fine.bin_std_error.iter().map(|s| s * dx).sum();
    let halving_ok = l1 < se;
    notes.push(format!("dt-halving L1 {l1:.4} < Σ SE·Δx {se:.4}"));

    // density-matrix invariants
    let (_, c1) = s.c1();
    let reports = [
        DensityMatrix {
            rho: c1[2].clone(),
            sample_count: 2000,
        }
        .report(),
        s.beta03().density_matrix.report(),
    ];
    let rho_ok = reports.iter().all(|r| r.passes());
    let worst_eig = reports
        .iter()
        .map(|r| r.min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    let worst_tr = reports
        .iter()
        .map(|r| r.trace_error.max(r.hermiticity_error))
        .fold(0.0, f64::max);
    notes.push(format!(
        "ρ trace/Hermiticity {worst_tr:.0e}, min eigenvalue {worst_eig:.1e}"
    ));

    // reruns across thread counts are byte-identical; a split ensemble regroups
    // the sums, so it is held to the 1e-12 merge contract
    let small = EnsembleConfig::new(12, 5, PositionGrid::default_for_beta(1.0));
    let cfg = icfg(2e-3, 1.0);
    let on_pool = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| run_ensemble(&ops, &cfg, &small).unwrap())
    };
    let a = on_pool(1);
    let b = on_pool(3);
    let again = on_pool(1);
    let init = StateVector::well_ground_state(&params, 32);
    let mut split = run_ensemble_range(&ops, &cfg, &small, &init, 0..5).unwrap();
    split
        .absorb(run_ensemble_range(&ops, &cfg, &small, &init, 5..12).unwrap())
        .unwrap();
    let c = split.finish();
    let values = |r: &EnsembleResult| -> Vec<f64> {
        let mut v: Vec<f64> = r.p_avg.density.clone();
        v.extend(r.density_matrix.rho.iter().flat_map(|z| [z.re, z.im]));
        v.extend(r.rows.iter().flat_map(|o| [o.q, o.p, o.number]));
        v
    };
    let bits = |r: &EnsembleResult| -> Vec<u64> { values(r).iter().map(|x| x.to_bits()).collect() };
    let bitwise = bits(&a) == bits(&b) && bits(&a) == bits(&again);
    let split_err = values(&a)
        .iter()
        .zip(values(&c))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let rerun_ok = bitwise && values(&a).len() == values(&c).len() && split_err <= 1e-12;
    notes.push(format!(
        "bitwise reruns (1 vs 3 threads): {bitwise}; split ensemble max deviation {split_err:.0e} (≤ 1e-12)"
    ));

    outcome(
        ops_ok && noise_ok && halving_ok && rho_ok && rerun_ok,
        notes.join("; "),
    )
}

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: [(usize, &str, fn(&Shared) -> Outcome); 8] = [
        (1, "oracle equivalence", criterion_1),
        (2, "thermal relaxation", criterion_2),
        (3, "zero-temperature grid", criterion_3),
        (4, "classical damping contrast", criterion_4),
        (5, "Wigner negativity", criterion_5),
        (6, "finite temperature", criterion_6),
        (7, "beam mapping", criterion_7),
        (8, "numerical hygiene", criterion_8),
    ];
    let shared = Shared::default();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = f(&shared);
        println!(
            "criterion {n} ({name}): {} [{:.0} s] {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
