use criterion::{black_box, criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};

use forte_bench::fixture;
use forte_core::force::build_feature;
use forte_core::pipeline::BaselineMode;
use forte_core::signal::MedianFilter;
use forte_core::slip::Periodogram;
use forte_core::Pipeline;

fn slip_step(c: &mut Criterion) {
    let mut f = fixture(12.0, 10, 0).unwrap();
    c.bench_function("slip_step", |b| b.iter(|| f.detector.step(black_box(&f.ring)).unwrap().eta));
}

fn psd_window(c: &mut Criterion) {
    let f = fixture(1.0, 10, 0).unwrap();
    let mut p = Periodogram::for_config(&f.config).unwrap();
    let window = f.ring.last(0, f.config.fft_window).unwrap();
    let mut out = vec![0.0; p.num_bins()];
    c.bench_function("psd_400", |b| b.iter(|| p.compute_into(black_box(&window), &mut out).unwrap()));
}

fn force_predict(c: &mut Criterion) {
    let mut g = c.benchmark_group("force_predict");
    for n in [500, 5000] {
        let f = fixture(12.0, n, 0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| {
            b.iter(|| f.model.predict_feature(&build_feature(black_box(&f.ring)).unwrap()))
        });
    }
    g.finish();
}

fn median_filter(c: &mut Criterion) {
    let f = fixture(1.0, 10, 0).unwrap();
    let mut m = MedianFilter::new(f.config.median_window);
    let mut frames = f.frames.iter().cycle();
    c.bench_function("median_push", |b| b.iter(|| m.push(black_box(frames.next().unwrap()))));
}

fn pipeline_second(c: &mut Criterion) {
    let f = fixture(13.0, 5000, 0).unwrap();
    let mut g = c.benchmark_group("pipeline");
    g.throughput(Throughput::Elements(2000));
    g.sample_size(20);
    g.bench_function("one_second", |b| {
        b.iter_batched(
            || {
                let mut p = Pipeline::new(&f.config, BaselineMode::None, Some(f.model.clone())).unwrap();
                for fr in &f.frames[..20_000] {
                    p.push(fr).unwrap();
                }
                p
            },
            |mut p| {
                for fr in &f.frames[20_000..22_000] {
                    p.push(fr).unwrap();
                }
                p
            },
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

criterion_group!(benches, slip_step, psd_window, force_predict, median_filter, pipeline_second);
criterion_main!(benches);
