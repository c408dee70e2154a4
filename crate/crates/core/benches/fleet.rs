use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ricci_lab::config::Tolerances;
use ricci_lab::conformal::{center_of_mass_with, uniform_measure, ConformalDilation};
use ricci_lab::exec::{self, Execution};
use ricci_lab::fixtures::fleet;
use ricci_lab::flow::OutputSchedule;
use ricci_lab::lab::{analyse, simulate};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

/// Short flows of the whole fleet, through the monitors.
fn fleet_flows(c: &mut Criterion) {
    let members = fleet(1, 64).expect("fleet builds");
    let tol = Tolerances::default();
    let mut group = c.benchmark_group("fleet_flows");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| {
                exec::map(mode, &members, |m| {
                    let traj = simulate(m.profile.clone(), 2e-3, &OutputSchedule::Stride(50), &tol).expect("flow runs");
                    analyse(&traj, &tol).width.samples.len()
                })
            })
        });
    }
    group.finish();
}

fn center_of_mass(c: &mut Criterion) {
    let m = uniform_measure(6);
    let d = ConformalDilation::new([0.6, 0.0, 0.8], 0.7).expect("valid dilation");
    let mut group = c.benchmark_group("center_of_mass");
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| center_of_mass_with(mode, &m, &d))
        });
    }
    group.finish();
}

criterion_group!(benches, fleet_flows, center_of_mass);
criterion_main!(benches);
