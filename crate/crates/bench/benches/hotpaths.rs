//! Timings for the three costs that dominate a run: the electrostatic
//! solve, the Lyapunov steady state, and the homodyne Monte-Carlo.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use emlc_core::electrostatics::{capacitance, solve_potential};
use emlc_core::{
    lyapunov_steady_state, simulate_homodyne, CapacitorGeometry, CoolingParams, HomodyneConfig,
    ReadoutParams, SignalSpec,
};
use num_complex::Complex64;

fn grid_capacitor() -> CapacitorGeometry {
    let d = 2e-6;
    CapacitorGeometry {
        plate_gap: d,
        wire_width: d / 4.0,
        wire_gap: 3.0 * d / 4.0,
        wire_thickness: d / 4.0,
        membrane_thickness: d / 20.0,
        eps_membrane: 7.6,
        x_m: 0.2 * d,
    }
}

fn fem_solve(c: &mut Criterion) {
    let geom = grid_capacitor();
    let mut group = c.benchmark_group("fem_solve");
    group.sample_size(20);
    for level in [1u32, 2] {
        group.bench_with_input(BenchmarkId::from_parameter(level), &level, |b, &level| {
            b.iter(|| {
                let field = solve_potential(&geom, level).unwrap();
                capacitance(&field).unwrap()
            })
        });
    }
    group.finish();
}

fn steady_state(c: &mut Criterion) {
    let params = CoolingParams {
        g: 2.0 * std::f64::consts::PI * 500.0,
        gamma_opt: 2.0 * std::f64::consts::PI * 3e3,
        gamma_m: 0.3,
        gamma: 2.0 * std::f64::consts::PI * 100.0,
        kappa: 2.0 * std::f64::consts::PI * 1e5,
        n_a: 8.3e4,
        n_b: 8.3e4,
        n_opt: 0.0,
    };
    c.bench_function("lyapunov_steady_state", |b| {
        b.iter(|| lyapunov_steady_state(&params).unwrap())
    });
}

fn homodyne(c: &mut Criterion) {
    let params = ReadoutParams {
        meas_rate: 1.0,
        gamma: 1.0,
        n_b: 100.0,
        n_d: 0.0,
    };
    let signal = SignalSpec::Tone {
        amplitude: Complex64::new(2020f64.sqrt(), 0.0),
        nu: 0.0,
    };
    let cfg = HomodyneConfig {
        duration: 2e3,
        dt: 0.04,
        trajectories: 2,
        seed: 5,
    };
    let mut group = c.benchmark_group("homodyne");
    group.sample_size(20);
    group.bench_function("estimate_100k_steps", |b| {
        b.iter(|| simulate_homodyne(&params, &signal, &[0.0], &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, fem_solve, steady_state, homodyne);
criterion_main!(benches);
