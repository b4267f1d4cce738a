use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ofa_core::coalition::Coalition;
use ofa_core::games::{exact_semivalue_sou, Game, SouGame};
use ofa_core::ofa::{q_ofa_a, q_ofa_s};
use ofa_core::{
    make_weights, run_estimator, run_ofa_shared, AllocationMode, EstimatorId, OfaConfig,
    SemivalueSpec,
};

fn sou_utility(c: &mut Criterion) {
    let game = SouGame::generate(64, 4096, 2024).unwrap();
    let half = Coalition::from_players(0..32);
    c.bench_function("sou_utility_n64_d4096", |b| {
        b.iter(|| game.utility(black_box(&half)))
    });
}

fn weights(c: &mut Criterion) {
    let mut g = c.benchmark_group("weights");
    for spec in [
        SemivalueSpec::BetaShapley {
            alpha: 4.0,
            beta: 1.0,
        },
        SemivalueSpec::WeightedBanzhaf { a: 0.2 },
    ] {
        g.bench_with_input(
            BenchmarkId::new("make_weights_n1024", &spec),
            &spec,
            |b, s| b.iter(|| make_weights(black_box(s), 1024).unwrap()),
        );
        let w = make_weights(&spec, 1024).unwrap();
        g.bench_with_input(BenchmarkId::new("q_ofa_s_n1024", &spec), &w, |b, w| {
            b.iter(|| q_ofa_s(black_box(w)).unwrap())
        });
    }
    g.finish();
}

fn estimators(c: &mut Criterion) {
    let game = SouGame::generate(64, 4096, 2024).unwrap();
    let spec = SemivalueSpec::WeightedBanzhaf { a: 0.5 };
    let mut g = c.benchmark_group("estimate_sou64_200_per_player");
    g.sample_size(10);
    for id in [
        EstimatorId::OfaA,
        EstimatorId::Wsl,
        EstimatorId::WeightedShap,
        EstimatorId::ShapIq,
    ] {
        g.bench_function(id.to_string(), |b| {
            b.iter(|| run_estimator(id, &game, &spec, 200, 10, 0).unwrap())
        });
    }
    let specs = [
        SemivalueSpec::BetaShapley {
            alpha: 4.0,
            beta: 1.0,
        },
        SemivalueSpec::BetaShapley {
            alpha: 1.0,
            beta: 1.0,
        },
        SemivalueSpec::BetaShapley {
            alpha: 1.0,
            beta: 4.0,
        },
        SemivalueSpec::WeightedBanzhaf { a: 0.2 },
        SemivalueSpec::WeightedBanzhaf { a: 0.5 },
        SemivalueSpec::WeightedBanzhaf { a: 0.8 },
    ];
    let ws: Vec<_> = specs.iter().map(|s| make_weights(s, 64).unwrap()).collect();
    let q = q_ofa_a(64).unwrap();
    let cfg = OfaConfig {
        budget_per_player: 200,
        checkpoints: 10,
        seed: 0,
        allocation: AllocationMode::Stochastic,
    };
    g.bench_function("ofa_a_six_semivalues", |b| {
        b.iter(|| run_ofa_shared(&game, &ws, Some(&q), &cfg).unwrap())
    });
    g.finish();
}

fn exact(c: &mut Criterion) {
    let game = SouGame::generate(64, 4096, 2024).unwrap();
    let spec = SemivalueSpec::BetaShapley {
        alpha: 4.0,
        beta: 1.0,
    };
    c.bench_function("exact_sou_n64_d4096", |b| {
        b.iter(|| exact_semivalue_sou(&game, black_box(&spec)).unwrap())
    });
}

criterion_group!(benches, sou_utility, weights, estimators, exact);
criterion_main!(benches);
