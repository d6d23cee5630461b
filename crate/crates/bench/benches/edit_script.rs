use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use logconform::{edit_script, weighted_score, ScoreParams};
use std::hint::black_box;

fn tokens(n: usize, salt: usize) -> Vec<String> {
    (0..n).map(|i| if (i + salt) % 5 == 0 { "<*>".to_string() } else { format!("w{}", (i * 7 + salt) % 11) }).collect()
}

fn bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("edit_script");
    for n in [8usize, 32, 128] {
        let template = tokens(n, 0);
        let record = tokens(n + n / 4, 3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| edit_script(black_box(&template), black_box(&record)))
        });
    }
    group.finish();

    let template = tokens(32, 0);
    let record = tokens(36, 1);
    let params = ScoreParams::for_pair(template.len(), record.len());
    c.bench_function("weighted_score/32", |b| {
        b.iter(|| weighted_score(black_box(&template), black_box(&record), params))
    });
}

criterion_group!(benches, bench);
criterion_main!(benches);
