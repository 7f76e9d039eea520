use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use nnn_core::calibration::GateTarget;
use nnn_core::config::RunConfig;
use nnn_core::evolution::Integrator;
use nnn_core::exec::Execution;
use nnn_core::scenarios::{run_sweep, Axis, Metric, Param, SweepBase, SweepSpec};

fn base(execution: Execution) -> SweepBase {
    let cfg = RunConfig::table1();
    SweepBase {
        device: cfg.device_params().unwrap(),
        schedule: cfg.schedule().unwrap(),
        target: GateTarget::ciswap(),
        integrator: Integrator::unverified(0.05),
        execution,
    }
}

fn transfer_grid(c: &mut Criterion) {
    let spec = SweepSpec {
        scenario: "bench".into(),
        axes: vec![
            Axis::new(Param::OvershootMhz, -2.0, 2.0, 8),
            Axis::new(Param::THoldNs, 40.0, 46.0, 8),
        ],
        metrics: vec![Metric::Transfer, Metric::SwapError],
    };
    let mut g = c.benchmark_group("transfer_grid_8x8");
    g.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let b = base(exec);
        g.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &b,
            |bench, b| bench.iter(|| black_box(run_sweep(b, &spec).unwrap())),
        );
    }
    g.finish();
}

fn analytic_map(c: &mut Criterion) {
    let spec = SweepSpec {
        scenario: "bench".into(),
        axes: vec![
            Axis::new(Param::Alpha2Mhz, 0.0, 700.0, 101),
            Axis::new(Param::DetuningMhz, -700.0, -100.0, 101),
        ],
        metrics: vec![Metric::J1Ground, Metric::J1Excited],
    };
    let mut g = c.benchmark_group("analytic_map_101x101");
    for exec in [Execution::Sequential, Execution::Parallel] {
        let b = base(exec);
        g.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &b,
            |bench, b| bench.iter(|| black_box(run_sweep(b, &spec).unwrap())),
        );
    }
    g.finish();
}

criterion_group!(benches, transfer_grid, analytic_map);
criterion_main!(benches);
