use rummage_core::config::WorldConfig;
use rummage_core::container::Scenario;
use rummage_core::eval::{brute_force_oracle, evaluate};
use rummage_core::net::{ModelBundle, ModelKind, PlaceModel, PointScoreModel};
use rummage_core::policy::PolicyConfig;
use rummage_core::train::{
    accuracy_point_score, collect_retrieval_data, train_point_score, TrainConfig,
};
use std::time::Instant;

fn main() {
    let mut world = WorldConfig::desk();
    world.n_points = 96;
    let scenarios = [Scenario::Sofa, Scenario::Basket, Scenario::WashingMachine];

    let t0 = Instant::now();
    let dataset = collect_retrieval_data(&world, &scenarios, 300, 42).unwrap();
    println!(
        "collected {} samples ({} pos / {} neg) in {:.1}s",
        dataset.len(),
        dataset.positives(ModelKind::Retrieve),
        dataset.negatives(ModelKind::Retrieve),
        t0.elapsed().as_secs_f64()
    );

    let t0 = Instant::now();
    let cfg = TrainConfig { epochs: 20, batch_size: 128, lr: 2e-3, seed: 7, ..TrainConfig::default() };
    let (model, curve) = train_point_score(ModelKind::Retrieve, &dataset, &cfg).unwrap();
    for (e, (tr, ho)) in curve.epochs.iter().enumerate() {
        if e % 4 == 0 || e == curve.epochs.len() - 1 {
            println!("epoch {e:2}: train {tr:.4} holdout {ho:.4}");
        }
    }
    let all: Vec<usize> = (0..dataset.len()).collect();
    let acc = accuracy_point_score(&model, &dataset, &all).unwrap();
    println!("train-set accuracy {:.3}ในเวลา {:.1}s", acc, t0.elapsed().as_secs_f64());

    // Policy vs baselines on 15 scenes each (untrained place/pick models,
    // adaptation off everywhere).
    let bundle = ModelBundle {
        retrieval: model,
        place: PlaceModel::desk(world.place_points(), 1).unwrap(),
        pick: PointScoreModel::desk(world.n_points, 2).unwrap(),
        place_points: world.place_points(),
    };
    for (name, policy) in [
        ("affordance", PolicyConfig::without_adaptation()),
        ("random", PolicyConfig::random_baseline()),
        ("highest", PolicyConfig::highest_baseline()),
    ] {
        let t0 = Instant::now();
        let r = evaluate(&bundle, &world, Scenario::Sofa, 15, 99, &policy).unwrap();
        println!(
            "{name:10} sofa: success {}/{} = {:.3} (floor {}, drag {}, notext {}, miss {}) {:.1}s",
            r.successes, r.attempts, r.success_rate,
            r.failure_counts[2], r.failure_counts[3], r.failure_counts[4], r.failure_counts[1],
            t0.elapsed().as_secs_f64()
        );
    }

    // Oracle consistency spot check on one small scene.
    let mut small = WorldConfig::desk();
    small.n_points = 64;
    small.max_garments = 2;
    let state = rummage_core::train::build_scene(&small, Scenario::Sofa, 5).unwrap();
    let candidates: Vec<usize> = (0..64).collect();
    let t0 = Instant::now();
    let set = brute_force_oracle(&state, &small, &candidates).unwrap();
    println!("oracle: {}/64 candidates succeed, {:.1}s", set.len(), t0.elapsed().as_secs_f64());
}
