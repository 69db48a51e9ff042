use criterion::{criterion_group, criterion_main, Criterion};

use ces_bench::community;
use ces_core::allocation::CostGame;
use ces_core::coalition::solve_coalition;
use ces_core::{CharacteristicCache, CommunityGame};

fn sizing(c: &mut Criterion) {
    let model = community("community5");
    let mut group = c.benchmark_group("community5");
    group.sample_size(10);
    group.bench_function("grand_coalition_lp", |b| b.iter(|| solve_coalition(&model, &model.grand_coalition()).unwrap()));

    let cache = CharacteristicCache::new(&model);
    let game = CommunityGame::new(&model, &cache).unwrap();
    let grand = game.value(&model.grand_coalition()).unwrap();
    let x = vec![grand / model.n_buildings() as f64; model.n_buildings()];
    group.bench_function("violation_milp", |b| b.iter(|| game.max_excess(&x, 0.0, &[]).unwrap()));
    group.finish();
}

criterion_group!(benches, sizing);
criterion_main!(benches);
