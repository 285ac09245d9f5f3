//! Data-parallel hot paths benchmarked against their sequential reference:
//! batch cleaning, batch contribution computation, candidate-k clustering,
//! and the multi-strategy demand-response sweep.
//!
//! The functions under test collect per-item results in input order, so the
//! parallel and sequential variants produce identical values; only the wall
//! clock differs. Run with `cargo bench -p peakshare-core` (rayon on) and
//! `cargo bench -p peakshare-core --no-default-features` for the fully
//! sequential build.

use std::collections::HashMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use peakshare_core::calendar::{Season, SeasonCalendar};
use peakshare_core::series::HourlySeries;
use peakshare_core::{cmpc, ingest, par, spectral, strategies, synth};

fn synth_population(n: usize, months: u32) -> synth::SynthOutput {
    let config = synth::SynthConfig {
        n_customers: n,
        n_months: months,
        seed: 99,
        ..synth::SynthConfig::default()
    };
    synth::generate(&config).expect("generator config is valid")
}

fn bench_clean(c: &mut Criterion) {
    let out = synth_population(300, 6);
    let mut group = c.benchmark_group("clean_all");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| ingest::clean_all(black_box(&out.meters), 5.0).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            par::seq_map(black_box(&out.meters), |m| ingest::clean_series(m, 5.0))
                .into_iter()
                .collect::<Result<Vec<_>, _>>()
                .unwrap()
        })
    });
    group.finish();
}

fn bench_cmpc(c: &mut Criterion) {
    let out = synth_population(500, 12);
    let mut group = c.benchmark_group("cmpc_batch");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| cmpc::compute_all(black_box(&out.meters), black_box(&out.feeder)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let months = out.feeder.months();
            let peaks: Vec<_> = months
                .iter()
                .map(|&m| cmpc::daily_peaks(&out.feeder, m))
                .collect();
            par::seq_map(&out.meters, |meter| {
                peaks
                    .iter()
                    .filter_map(|p| cmpc::compute_cmpc(meter, p).ok())
                    .collect::<Vec<_>>()
            })
        })
    });
    group.finish();
}

fn bench_spectral(c: &mut Criterion) {
    let out = synth_population(150, 3);
    let calendar = SeasonCalendar::default();
    let split = ingest::split_seasons(&out.meters, &out.feeder, &calendar);
    let profiles: Vec<Vec<f64>> = split
        .datasets
        .get(Season::Winter)
        .profiles()
        .iter()
        .map(|p| p.to_vec())
        .collect();
    let config = spectral::SpectralConfig {
        k_min: 2,
        k_max: 10,
        seed: 4,
        ..spectral::SpectralConfig::default()
    };
    let mut group = c.benchmark_group("spectral_select_k");
    group.sample_size(10);
    // candidate-k evaluations fan out across threads in the default build
    group.bench_function("default", |b| {
        b.iter(|| spectral::select_k_and_cluster(black_box(&profiles), black_box(&config)).unwrap())
    });
    group.finish();
}

fn bench_dr(c: &mut Criterion) {
    let out = synth_population(300, 1);
    let dates: Vec<chrono::NaiveDate> = out.feeder.dates().into_iter().take(28).collect();
    let inputs =
        strategies::StrategyInputs::compute(&out.meters, &out.feeder, &dates, &HashMap::new())
            .unwrap();
    let config = strategies::DrSimConfig::default();
    let picked = [
        strategies::Strategy::Random,
        strategies::Strategy::MonthlyDemandRank,
        strategies::Strategy::CustomerPeakRank,
        strategies::Strategy::EntropyRank,
        strategies::Strategy::CmpcRankActual,
    ];
    let mut group = c.benchmark_group("dr_strategies");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            strategies::simulate_strategies(
                &config,
                black_box(&out.meters),
                &out.feeder,
                &picked,
                &inputs,
                &dates,
                7,
            )
            .unwrap()
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            par::seq_map(&picked, |&s| {
                strategies::simulate_dr(&config, &out.meters, &out.feeder, s, &inputs, &dates, 7)
                    .unwrap()
            })
        })
    });
    group.finish();
}

criterion_group!(benches, bench_clean, bench_cmpc, bench_spectral, bench_dr);
criterion_main!(benches);
