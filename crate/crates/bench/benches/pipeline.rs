use criterion::{criterion_group, criterion_main, Criterion};
use logconform::eval::{synth_iiot, SynthSpec, IIOT_FORMAT};
use logconform::ingest::{preprocess_lines, recommended_masks, UnparsablePolicy};
use logconform::{calibrate, compile_schema, fit, LogRecord, ParserParams};
use std::hint::black_box;

fn corpus() -> (Vec<LogRecord>, Vec<LogRecord>) {
    let c = synth_iiot(&SynthSpec { seed: 1, n_train: 2000, n_test: 200, n_anomalies: 100 }).unwrap();
    let schema = compile_schema(IIOT_FORMAT, &recommended_masks()).unwrap();
    let pre = |lines: &[String]| {
        preprocess_lines(lines.iter().map(String::as_str), &schema, UnparsablePolicy::Abort).unwrap().records
    };
    (pre(&c.train), pre(&c.test))
}

fn bench(c: &mut Criterion) {
    let (train, test) = corpus();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    for params in ParserParams::all_defaults() {
        group.bench_function(format!("fit/{}", params.name()), |b| b.iter(|| fit(&params, black_box(&train)).unwrap()));
        let ts = fit(&params, &train).unwrap();
        group.bench_function(format!("calibrate/{}", params.name()), |b| {
            b.iter(|| calibrate(ts.clone(), black_box(&train)).unwrap())
        });
        let model = calibrate(ts, &train).unwrap();
        group.bench_function(format!("pvalues/{}", params.name()), |b| {
            b.iter(|| test.iter().map(|r| model.pvalues_for(r).max_p()).sum::<f64>())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
