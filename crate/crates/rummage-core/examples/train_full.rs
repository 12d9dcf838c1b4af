use rummage_core::config::WorldConfig;
use rummage_core::container::Scenario;
use rummage_core::eval::evaluate;
use rummage_core::net::checkpoint;
use rummage_core::net::{ModelBundle, ModelKind, PlaceModel, PointScoreModel};
use rummage_core::policy::PolicyConfig;
use rummage_core::train::{accuracy_point_score, collect_retrieval_data, train_point_score, TrainConfig};
use std::time::Instant;

fn main() {
    let world = WorldConfig::desk();
    let scenarios = [Scenario::WashingMachine, Scenario::Basket, Scenario::Sofa];

    let t0 = Instant::now();
    let dataset = collect_retrieval_data(&world, &scenarios, 2000, 4242).unwrap();
    println!(
        "collected {} retrieval samples ({} pos / {} neg) in {:.0}s",
        dataset.len(),
        dataset.positives(ModelKind::Retrieve),
        dataset.negatives(ModelKind::Retrieve),
        t0.elapsed().as_secs_f64()
    );
    std::fs::write("/tmp/retrieve.affd", dataset.encode()).unwrap();

    let t0 = Instant::now();
    let cfg = TrainConfig { epochs: 60, batch_size: 128, lr: 1e-3, seed: 7, ..TrainConfig::default() };
    let (model, curve) = train_point_score(ModelKind::Retrieve, &dataset, &cfg).unwrap();
    for (e, (tr, ho)) in curve.epochs.iter().enumerate() {
        if e % 6 == 0 || e == curve.epochs.len() - 1 {
            println!("epoch {e:2}: train {tr:.4} holdout {ho:.4}  [{:.0}s]", t0.elapsed().as_secs_f64());
        }
    }
    let all: Vec<usize> = (0..dataset.len()).collect();
    let acc = accuracy_point_score(&model, &dataset, &all).unwrap();
    println!("full-set accuracy {:.3}, elapsed {:.0}s", acc, t0.elapsed().as_secs_f64());
    std::fs::write("/tmp/retrieve.aff1", checkpoint::encode_point_score(&model, ModelKind::Retrieve).unwrap()).unwrap();

    let bundle = ModelBundle {
        retrieval: model,
        place: PlaceModel::desk(world.place_points(), 1).unwrap(),
        pick: PointScoreModel::desk(world.n_points, 2).unwrap(),
        place_points: world.place_points(),
    };
    for scenario in scenarios {
        for (name, policy) in [
            ("affordance", PolicyConfig::without_adaptation()),
            ("random", PolicyConfig::random_baseline()),
            ("highest", PolicyConfig::highest_baseline()),
        ] {
            let t0 = Instant::now();
            let r = evaluate(&bundle, &world, scenario, 30, 909, &policy).unwrap();
            println!(
                "{scenario:?} {name:10}: {}/{} = {:.3} (miss {} floor {} drag {} notext {}) {:.0}s",
                r.successes, r.attempts, r.success_rate,
                r.failure_counts[1], r.failure_counts[2], r.failure_counts[3], r.failure_counts[4],
                t0.elapsed().as_secs_f64()
            );
        }
    }
}
