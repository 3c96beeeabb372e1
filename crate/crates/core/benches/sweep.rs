use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use momentgate::verdicts::{classify_with, AnalysisOptions};
use momentgate::{Exec, SequenceSpec};

fn gevrey_sweep(exec: Exec, horizon: usize) -> usize {
    let grid: Vec<SequenceSpec> = (1..=15).map(|k| SequenceSpec::gevrey(0.2 * k as f64)).collect();
    let opts = AnalysisOptions {
        horizon,
        exec,
        ..AnalysisOptions::default()
    };
    exec.map(&grid, |spec| classify_with(spec, &opts).is_ok())
        .into_iter()
        .filter(|ok| *ok)
        .count()
}

fn bench_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("gevrey_sweep");
    group.sample_size(10);
    for horizon in [1_000usize, 10_000] {
        for (name, exec) in [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)] {
            group.bench_with_input(BenchmarkId::new(name, horizon), &horizon, |b, &h| {
                b.iter(|| gevrey_sweep(exec, h))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
