use rummage_core::config::WorldConfig;
use rummage_core::container::Scenario;
use rummage_core::eval::{adaptation_round_sweep, find_gated_scenes};
use rummage_core::net::checkpoint::{self, Checkpoint};
use rummage_core::net::{ModelBundle, ModelKind};
use rummage_core::train::{collect_pick_data, collect_place_data, train_place, train_point_score, TrainConfig};
use std::time::Instant;

fn main() {
    let world = WorldConfig::desk();
    let scenarios = [Scenario::WashingMachine, Scenario::Basket, Scenario::Sofa];

    let retrieval = match checkpoint::decode(&std::fs::read("/tmp/retrieve.aff1").unwrap()).unwrap() {
        Checkpoint::Retrieve(m) => m,
        _ => panic!("wrong checkpoint"),
    };

    let t0 = Instant::now();
    let place_data = collect_place_data(&world, &retrieval, &scenarios, 800, 777).unwrap();
    println!(
        "place data: {} samples ({} pos / {} neg) in {:.0}s",
        place_data.len(),
        place_data.positives(ModelKind::Place),
        place_data.negatives(ModelKind::Place),
        t0.elapsed().as_secs_f64()
    );
    std::fs::write("/tmp/place.affd", place_data.encode()).unwrap();

    let t0 = Instant::now();
    let cfg = TrainConfig { epochs: 40, batch_size: 64, lr: 1e-3, seed: 7, ..TrainConfig::default() };
    let (place_model, curve) = train_place(&place_data, &cfg).unwrap();
    println!(
        "place trained in {:.0}s (first {:.4}/{:.4} last {:.4}/{:.4})",
        t0.elapsed().as_secs_f64(),
        curve.epochs.first().unwrap().0, curve.epochs.first().unwrap().1,
        curve.epochs.last().unwrap().0, curve.epochs.last().unwrap().1,
    );
    std::fs::write("/tmp/place.aff1", checkpoint::encode_place(&place_model).unwrap()).unwrap();

    let t0 = Instant::now();
    let pick_data = collect_pick_data(&world, &retrieval, &place_model, &scenarios, 800, 888).unwrap();
    println!(
        "pick data: {} samples ({} pos / {} neg) in {:.0}s",
        pick_data.len(),
        pick_data.positives(ModelKind::Pick),
        pick_data.negatives(ModelKind::Pick),
        t0.elapsed().as_secs_f64()
    );
    std::fs::write("/tmp/pick.affd", pick_data.encode()).unwrap();

    let t0 = Instant::now();
    let cfg = TrainConfig { epochs: 40, batch_size: 128, lr: 1e-3, seed: 7, ..TrainConfig::default() };
    let (pick_model, curve) = train_point_score(ModelKind::Pick, &pick_data, &cfg).unwrap();
    println!(
        "pick trained in {:.0}s (last {:.4}/{:.4})",
        t0.elapsed().as_secs_f64(),
        curve.epochs.last().unwrap().0, curve.epochs.last().unwrap().1,
    );
    std::fs::write("/tmp/pick.aff1", checkpoint::encode_point_score(&pick_model, ModelKind::Pick).unwrap()).unwrap();

    let bundle = ModelBundle {
        retrieval,
        place: place_model,
        pick: pick_model,
        place_points: world.place_points(),
    };

    // Hard-scene sweep: pooled gated scenes.
    for scenario in scenarios {
        let t0 = Instant::now();
        match find_gated_scenes(&bundle, &world, scenario, 12, 31415, 0.1) {
            Ok(seeds) => {
                let rows = adaptation_round_sweep(&bundle, &world, scenario, &seeds, 31415).unwrap();
                let line: Vec<String> = rows
                    .iter()
                    .map(|r| format!("{}={:.3}({}/{})", r.label, r.report.success_rate, r.report.successes, r.report.attempts))
                    .collect();
                println!("{scenario:?} hard-scene sweep: {} [{:.0}s]", line.join(" "), t0.elapsed().as_secs_f64());
            }
            Err(e) => println!("{scenario:?}: gated-scene search failed: {e}"),
        }
    }
}
