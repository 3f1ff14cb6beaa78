//! Whole simulated days: the 10x10 grid desk scenario and the four-node
//! line, both with pooled parcel service.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rpp_core::demand::{build_parcels, sample_customers};
use rpp_core::{fixture, run, Demand, IntegrationMode, SimConfig, StrategyKind};

fn day_inputs(name: &str, cfg: &SimConfig) -> (rpp_core::Network, Demand) {
    let fx = fixture::by_name(name).expect("known fixture");
    let net = fx.network().expect("fixture network");
    let od = fx.od(&net).expect("fixture od");
    let raw = fx.raw(&net).expect("fixture parcels");
    let customers = sample_customers(&od, &net, cfg.penetration, cfg.seed).unwrap();
    let parcels = build_parcels(&raw, cfg.parcel_share, cfg.parcel_capacity, cfg.seed).unwrap();
    (
        net,
        Demand {
            customers,
            parcels,
            od,
        },
    )
}

fn bench_sim_day(c: &mut Criterion) {
    let mut group = c.benchmark_group("sim_day");
    group.sample_size(10);

    let line_cfg = SimConfig {
        fleet_size: 2,
        penetration: 1.0,
        parcel_share: 1.0,
        threshold: 0.8,
        seed: 0,
        ..SimConfig::default()
    };
    let (line_net, line_demand) = day_inputs("line4", &line_cfg);
    group.bench_function("line4_sdpa_full", |b| {
        b.iter(|| {
            black_box(
                run(
                    &line_cfg,
                    &line_net,
                    &line_demand,
                    StrategyKind::Sdpa,
                    IntegrationMode::Full,
                )
                .unwrap(),
            )
        })
    });

    let grid_cfg = SimConfig {
        fleet_size: 20,
        penetration: 1.0,
        parcel_share: 0.8,
        threshold: 0.8,
        seed: 0,
        ..SimConfig::default()
    };
    let (grid_net, grid_demand) = day_inputs("grid10", &grid_cfg);
    for (label, strategy) in [
        ("grid10_cdpa_full", StrategyKind::Cdpa),
        ("grid10_sdpa_full", StrategyKind::Sdpa),
        ("grid10_scpa_full", StrategyKind::Scpa),
    ] {
        group.bench_function(label, |b| {
            b.iter(|| {
                black_box(
                    run(
                        &grid_cfg,
                        &grid_net,
                        &grid_demand,
                        strategy,
                        IntegrationMode::Full,
                    )
                    .unwrap(),
                )
            })
        });
    }
    group.bench_function("grid10_statusquo", |b| {
        b.iter(|| {
            black_box(
                run(
                    &grid_cfg,
                    &grid_net,
                    &grid_demand,
                    StrategyKind::Cdpa,
                    IntegrationMode::StatusQuo,
                )
                .unwrap(),
            )
        })
    });
    group.finish();
}

criterion_group!(benches, bench_sim_day);
criterion_main!(benches);
