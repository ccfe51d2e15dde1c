use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use umh_core::field::{field_map_with, GridSpec, PropagationModel};
use umh_core::geometry::{default_array, Vec3};
use umh_core::par::Execution;
use umh_core::stimulus::{preset, render_stimulus};
use umh_core::synthesis::{drive_for_frame, stream_drive_with, SynthesisMode, SynthesisOptions};

fn executions() -> Vec<(&'static str, Execution)> {
    let mut v = vec![("sequential", Execution::Sequential)];
    if Execution::parallel_available() {
        v.push(("parallel", Execution::Parallel));
    }
    v
}

fn drive_stream(c: &mut Criterion) {
    let geometry = default_array();
    let spec = preset("S-Mix2").unwrap().with_duration(0.1);
    let frames = render_stimulus(&spec, Vec3::new(0.0, 0.2, 0.0), 1000.0).unwrap();
    let opts = SynthesisOptions::default();

    let mut group = c.benchmark_group("stream_drive");
    group.sample_size(10);
    group.throughput(Throughput::Elements(frames.len() as u64));
    for (name, exec) in executions() {
        group.bench_with_input(BenchmarkId::new(name, frames.len()), &exec, |b, &exec| {
            b.iter(|| stream_drive_with(&geometry, black_box(&frames), &opts, exec).unwrap())
        });
    }
    group.finish();
}

fn field_plane(c: &mut Criterion) {
    let geometry = default_array();
    let focus = Vec3::new(0.0, 0.2, 0.0);
    let spec = preset("S-LM").unwrap();
    let frame = &render_stimulus(&spec, focus, 1000.0).unwrap()[0];
    let drive = drive_for_frame(&geometry, frame, SynthesisMode::Superposition).unwrap();
    let model = PropagationModel::default();

    let mut group = c.benchmark_group("field_map");
    group.sample_size(10);
    for n in [21usize, 51] {
        let grid = GridSpec::centered(focus, Vec3::x(), Vec3::z(), (0.05, 0.05), (n, n)).unwrap();
        group.throughput(Throughput::Elements((n * n) as u64));
        for (name, exec) in executions() {
            group.bench_with_input(BenchmarkId::new(name, n * n), &exec, |b, &exec| {
                b.iter(|| field_map_with(&geometry, &model, black_box(&drive), &grid, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, drive_stream, field_plane);
criterion_main!(benches);
