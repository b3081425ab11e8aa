use std::f64::consts::{FRAC_PI_8, PI, TAU};

use msgate::dynamics::{
    evolve, evolve_thermal, integrate, ms_analytic_propagator, ms_loop_parameters, net_dd_rotation, propagator,
    ConstantGenerator, DenseMatrix, DynamicsError, IntegratorOptions, QuantumState,
};
use msgate::schedule::{build_gate_schedule, DecouplingMode, FrameModel, GateParams, ModeParams};
use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fast_gate(n_max: usize) -> (GateParams<f64>, ModeParams<f64>) {
    let mut p = GateParams::closed_gate(TAU * 3.3e3, 1, TAU * 4.0e6);
    p.fock_cutoff = n_max;
    (p, ModeParams::calcium43(TAU * 4.0e6))
}

fn opts() -> IntegratorOptions<f64> {
    IntegratorOptions::with_tolerance(1e-10)
}

fn bell_fidelity(s: &QuantumState<f64>) -> f64 {
    let r = s.qubit_density();
    0.5 * (r[0][0].re + r[3][3].re) + r[0][3].norm()
}

fn analytic_final(p: &GateParams<f64>, t: f64) -> QuantumState<f64> {
    let u = ms_analytic_propagator(p, t).unwrap();
    let psi = u.apply(QuantumState::<f64>::ground(p.fock_cutoff).amplitudes());
    QuantumState::from_amplitudes(psi, p.fock_cutoff).unwrap()
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix<f64> {
    let a = DenseMatrix::from_fn(n, |_, _| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    a.add(&a.adjoint()).scale(C::new(0.5, 0.0))
}

#[test]
fn zero_hamiltonian_is_identity() {
    let g = ConstantGenerator::from_dense(&DenseMatrix::<f64>::zeros(8));
    let u = propagator(&g, 0.0, 1.0, &opts()).unwrap();
    assert!(u.max_abs_diff(&DenseMatrix::identity(8)) < 1e-15);
}

#[test]
fn constant_segment_matches_independent_expm() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = random_hermitian(16, &mut rng);
    let t = 1.7;
    let g = ConstantGenerator::from_dense(&h);
    let u = propagator(&g, 0.0, t, &opts()).unwrap();

    let m = DMatrix::from_fn(16, 16, |r, c| h[(r, c)] * C::new(0.0, -t));
    let oracle = m.exp();
    let mut worst: f64 = 0.0;
    for r in 0..16 {
        for c in 0..16 {
            worst = worst.max((u[(r, c)] - oracle[(r, c)]).norm());
        }
    }
    assert!(worst < 1e-9, "max deviation {worst:e}");
    assert!(g_expm_agrees(&h, t));
}

fn g_expm_agrees(h: &DenseMatrix<f64>, t: f64) -> bool {
    let ours = h.scale(C::new(0.0, -t)).expm();
    let m = DMatrix::from_fn(h.dim(), h.dim(), |r, c| h[(r, c)] * C::new(0.0, -t)).exp();
    (0..h.dim()).all(|r| (0..h.dim()).all(|c| (ours[(r, c)] - m[(r, c)]).norm() < 1e-12))
}

#[test]
fn analytic_propagator_is_unitary() {
    let (p, _) = fast_gate(10);
    for &t in &[0.0, 3.3e-5, p.duration] {
        let u = ms_analytic_propagator(&p, t).unwrap();
        let uu = u.matmul(&u.adjoint());
        assert!(uu.max_abs_diff(&DenseMatrix::identity(40)) < 1e-12);
    }
}

#[test]
fn closure_values() {
    for loops in 1..=4 {
        let (d, t) = msgate::schedule::solve_closure(TAU * 2.1e3, loops);
        let (alpha, phi) = ms_loop_parameters(TAU * 2.1e3, d, t);
        assert!(alpha.norm() < 1e-12);
        assert!((phi - FRAC_PI_8).abs() < 1e-12);
    }
}

#[test]
fn analytic_matches_numerical_at_arbitrary_times() {
    // convention check against the integrator at open-loop times
    let (mut p, m) = fast_gate(12);
    p.closed = false;
    p.duration *= 0.37;
    let s = build_gate_schedule(&p, &m, false).unwrap();
    let ev = evolve(&QuantumState::ground(12), &s, &p, &m, &opts()).unwrap();
    let oracle = analytic_final(&p, p.duration);
    assert!(1.0 - ev.state.fidelity(&oracle) < 1e-9);
    // amplitudes agree including the global phase; a sign or phase convention error would be O(1)
    let diff: f64 = ev.state.amplitudes().iter().zip(oracle.amplitudes()).map(|(a, b)| (a - b).norm()).sum();
    assert!(diff < 1e-4, "diff {diff:e} overlap {:?}", ev.state.overlap(&oracle));
}

#[test]
fn closed_gate_produces_bell_state() {
    let (p, m) = fast_gate(12);
    let s = build_gate_schedule(&p, &m, false).unwrap();
    let ev = evolve(&QuantumState::ground(12), &s, &p, &m, &opts()).unwrap();
    assert!(ev.norm_drift < 1e-9);
    assert!(!ev.leakage_flag);
    let oracle = analytic_final(&p, p.duration);
    assert!(1.0 - ev.state.fidelity(&oracle) < 1e-8);
    let target = QuantumState::bell(-PI / 2.0, 12);
    assert!(1.0 - ev.state.fidelity(&target) < 1e-8);
    // motion disentangled, qubits maximally entangled
    let a = ev.state.amplitudes();
    let concurrence = 2.0 * (a[0] * a[36] - a[12] * a[24]).norm();
    assert!((concurrence - 1.0).abs() < 1e-8);
}

#[test]
fn random_closed_gates_agree_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..50 {
        let rabi = TAU * rng.random_range(1.0e3..5.0e3);
        let loops = rng.random_range(1..=4);
        let mut p = GateParams::closed_gate(rabi, loops, TAU * 4.0e6);
        p.fock_cutoff = 10;
        let m = ModeParams::calcium43(p.mode_freq);
        let s = build_gate_schedule(&p, &m, false).unwrap();
        let ev = evolve(&QuantumState::ground(10), &s, &p, &m, &opts()).unwrap();
        let oracle = analytic_final(&p, p.duration);
        let inf = 1.0 - ev.state.fidelity(&oracle);
        assert!(inf < 1e-6, "rabi={rabi} loops={loops} infidelity={inf:e}");
    }
}

#[test]
fn analytic_rejects_ramped_pulses() {
    let (mut p, _) = fast_gate(6);
    p.ramp_time = 2.8e-6;
    assert!(matches!(ms_analytic_propagator(&p, 1e-5), Err(DynamicsError::RequiresSquarePulse(_))));
}

#[test]
fn deterministic() {
    let (mut p, m) = fast_gate(8);
    p.ramp_time = 2.8e-6;
    let s = build_gate_schedule(&p, &m, false).unwrap();
    let a = evolve(&QuantumState::ground(8), &s, &p, &m, &opts()).unwrap();
    let b = evolve(&QuantumState::ground(8), &s, &p, &m, &opts()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn small_cutoff_flags_leakage() {
    let (p, m) = fast_gate(3);
    let s = build_gate_schedule(&p, &m, false).unwrap();
    let ev = evolve(&QuantumState::ground(3), &s, &p, &m, &opts()).unwrap();
    assert!(ev.leakage_flag);
    assert!(ev.warnings[0].contains("n_max"));
}

#[test]
fn step_underflow_is_an_error() {
    let h = DenseMatrix::<f64>::identity(4).scale(C::new(1e250, 0.0));
    let g = ConstantGenerator::from_dense(&h);
    let psi = vec![C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)];
    assert!(matches!(integrate(&g, &psi, 0.0, 1.0, &opts(), None), Err(DynamicsError::StepUnderflow { .. })));
}

#[test]
fn cutoff_convergence_at_operating_points() {
    let (mut p, m) = fast_gate(12);
    p.ramp_time = 2.8e-6;
    let mut errors = Vec::new();
    for n in [12, 16] {
        p.fock_cutoff = n;
        let s = build_gate_schedule(&p, &m, false).unwrap();
        let ev = evolve(&QuantumState::ground(n), &s, &p, &m, &opts()).unwrap();
        errors.push(1.0 - bell_fidelity(&ev.state));
    }
    assert!((errors[0] - errors[1]).abs() < 1e-8, "{errors:?}");
}

#[test]
fn thermal_with_zero_phonons_is_pure() {
    let (p, m) = fast_gate(10);
    let s = build_gate_schedule(&p, &m, false).unwrap();
    let one = C::new(1.0, 0.0);
    let zero = C::new(0.0, 0.0);
    let th = evolve_thermal([one, zero, zero, zero], 0.0, &s, &p, &m, &opts()).unwrap();
    assert_eq!(th.members.len(), 1);
    let pure = evolve(&QuantumState::ground(10), &s, &p, &m, &opts()).unwrap();
    assert_eq!(th.qubit_density(), pure.state.qubit_density());
    // a warm mode lowers the fidelity only slightly for a closed gate
    let warm = evolve_thermal([one, zero, zero, zero], 0.05, &s, &p, &m, &opts()).unwrap();
    assert!(warm.members.len() > 2);
    let r = warm.qubit_density();
    let f = 0.5 * (r[0][0].re + r[3][3].re) + r[0][3].norm();
    assert!(f > 1.0 - 1e-6);
}

#[test]
fn single_precision_gate() {
    let mut p = GateParams::<f32>::closed_gate(std::f32::consts::TAU * 3.3e3, 1, std::f32::consts::TAU * 4.0e6);
    p.fock_cutoff = 8;
    let m = ModeParams::calcium43(p.mode_freq);
    let s = build_gate_schedule(&p, &m, false).unwrap();
    let ev = evolve(&QuantumState::ground(8), &s, &p, &m, &IntegratorOptions::with_tolerance(1e-6)).unwrap();
    let r = ev.state.qubit_density();
    let f = 0.5 * (r[0][0].re + r[3][3].re) + r[0][3].norm();
    assert!(f > 0.999, "f32 fidelity {f}");
}

fn dd_schedule(order: u32, drift: [f64; 2]) -> msgate::schedule::PulseSchedule<f64> {
    let mut p = GateParams::closed_gate(TAU * 2.1e3, 2, TAU * 5.6e6);
    p.dd_rabi = TAU * 180e3;
    p.dd_mode = DecouplingMode::Walsh;
    p.walsh_order = order;
    p.dd_drift = drift;
    build_gate_schedule(&p, &ModeParams::calcium43(p.mode_freq), true).unwrap()
}

#[test]
fn net_rotation_cancellation() {
    let scale = TAU * 180e3 * 336.7e-6;
    let r = |o, d| net_dd_rotation(&dd_schedule(o, d)).unwrap().abs();
    assert!(r(1, [0.0, 0.0]) < 1e-10 * scale);
    assert!(r(1, [0.1, 0.0]) > 1e-3 * scale);
    assert!(r(3, [0.1, 0.0]) < 1e-10 * scale);
    assert!(r(3, [0.1, 0.1]) > 1e-4 * scale);
    assert!(r(7, [0.1, 0.1]) < 1e-10 * scale);
    assert!(r(0, [0.0, 0.0]) > 0.9 * scale);
}

#[test]
fn lab_frame_agrees_with_interaction_model() {
    // dimensionless toy frequencies well separated from the gate rate
    let mut lab = GateParams::closed_gate(1.0, 1, 40.0);
    lab.qubit_freq = 400.0;
    lab.fock_cutoff = 8;
    lab.model = FrameModel::Lab;
    let mode = ModeParams { ion_mass: 1.0, mode_freq: 40.0, zpf: 1.0, eigenvector_factor: std::f64::consts::FRAC_1_SQRT_2 };
    let s = build_gate_schedule(&lab, &ModeParams::new(1e-25, 40.0), false).unwrap();
    let a = evolve(&QuantumState::ground(8), &s, &lab, &mode, &IntegratorOptions::with_tolerance(1e-9)).unwrap();

    // the rotating-wave limit has the opposite detuning sign
    let mut ms = lab.clone();
    ms.model = FrameModel::Interaction;
    ms.closed = false;
    ms.detuning_error = -2.0 * ms.detuning;
    let b = evolve(&QuantumState::ground(8), &s, &ms, &mode, &opts()).unwrap();
    let f = a.state.fidelity(&b.state);
    assert!(f > 0.99, "lab vs interaction fidelity {f}");
    assert!(bell_fidelity(&a.state) > 0.98);
}

fn slow_gate_error(shift_hz: f64, decoupled: bool) -> f64 {
    let mut cfg = msgate::config::Catalog::builtin().gate("slow-gate-dd").unwrap();
    cfg.set_real("zeeman_shift", TAU * shift_hz);
    if !decoupled {
        cfg.set_assignment("dd_mode=off").unwrap();
    }
    let run = msgate::sweep::simulate_gate(&cfg).unwrap();
    1.0 - bell_fidelity(&run.evolution.state)
}

#[test]
fn walsh_decoupling_protects_against_a_static_shift() {
    let on = slow_gate_error(1e3, true);
    let off = slow_gate_error(1e3, false);
    assert!(on < off, "{on:e} vs {off:e}");
}

#[test]
fn undecoupled_error_grows_with_shift() {
    let shifts: Vec<f64> = (0..=8).map(|k| 250.0 * k as f64).collect();
    for sign in [1.0, -1.0] {
        let errors: Vec<f64> = shifts.iter().map(|&s| slow_gate_error(sign * s, false)).collect();
        for (k, w) in errors.windows(2).enumerate() {
            assert!(
                w[1] >= w[0],
                "error falls from {:.4e} to {:.4e} between {} and {} Hz",
                w[0],
                w[1],
                sign * shifts[k],
                sign * shifts[k + 1]
            );
        }
    }
}
