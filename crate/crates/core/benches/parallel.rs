use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, Criterion};
use ensimp::data::load_csv;
use ensimp::ensemble::build;
use ensimp::eval::{run_experiment, ExperimentGrid};
use ensimp::missing::inject_mcar;
use ensimp::{Dataset, EnsembleConfig, Exec, LabelColumn, MethodId, MissingnessSpec};

fn wine() -> Dataset {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/wine.csv");
    load_csv(path, &LabelColumn::Name("class".into())).expect("data/wine.csv")
}

fn modes() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)]
}

fn bench_build(c: &mut Criterion) {
    let data = inject_mcar(&wine(), &MissingnessSpec::new(0.3, 1)).unwrap();
    let config = EnsembleConfig::default();
    let mut group = c.benchmark_group("build");
    group.sample_size(10);
    for method in [MethodId::BagGRandI, MethodId::BagMiEm] {
        for (label, exec) in modes() {
            group.bench_function(format!("{method}/{label}"), |b| {
                b.iter(|| build(method, black_box(&data), &config, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_predict(c: &mut Criterion) {
    let data = inject_mcar(&wine(), &MissingnessSpec::new(0.3, 2)).unwrap();
    let model = build(MethodId::BagMei, &data, &EnsembleConfig::default(), Exec::Parallel).unwrap();
    let mut group = c.benchmark_group("predict");
    for (label, exec) in modes() {
        group.bench_function(label, |b| b.iter(|| model.predict(black_box(&data), exec).unwrap()));
    }
    group.finish();
}

fn bench_grid(c: &mut Criterion) {
    let data = vec![wine()];
    let grid = ExperimentGrid {
        methods: vec![MethodId::Mei, MethodId::BagMei, MethodId::MiGRandI],
        ratios: vec![0.0, 0.2],
        repetitions: 2,
        folds: 2,
        ensemble: EnsembleConfig {
            ensemble_size: 10,
            ..EnsembleConfig::default()
        },
        master_seed: 1,
        kappa_cell: None,
    };
    let mut group = c.benchmark_group("grid");
    group.sample_size(10);
    for (label, exec) in modes() {
        group.bench_function(label, |b| b.iter(|| run_experiment(&grid, black_box(&data), exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_build, bench_predict, bench_grid);
criterion_main!(benches);
