use rummage_core::config::WorldConfig;
use rummage_core::container::{Container, Scenario};
use rummage_core::sim::{generate_scene, step};
use std::time::Instant;

fn main() {
    let world = WorldConfig::desk();
    for n in [1u32, 3, 5] {
        let mut s = generate_scene(Container::standard(Scenario::Basket), &world.templates, n, 11, &world.sim).unwrap();
        let particles = s.total_particles();
        let t0 = Instant::now();
        let steps = 2000;
        for _ in 0..steps {
            step(&mut s, &world.sim).unwrap();
        }
        let dt = t0.elapsed().as_secs_f64();
        println!("{n} garments ({particles:3} particles): {:.1} us/step ({:.2} s for {steps})", dt / steps as f64 * 1e6, dt);
    }
    // Render cost
    let s = generate_scene(Container::standard(Scenario::Basket), &world.templates, 3, 11, &world.sim).unwrap();
    let cam = rummage_core::obs::CameraPose::standard(&s.container);
    let t0 = Instant::now();
    for _ in 0..50 {
        rummage_core::obs::render_cloud(&s, &cam, world.n_points, world.sim.contact_radius).unwrap();
    }
    println!("render: {:.1} ms", t0.elapsed().as_secs_f64() / 50.0 * 1000.0);
    // Forward cost
    let model = rummage_core::net::PointScoreModel::<f32>::desk(world.n_points, 1).unwrap();
    let obs = rummage_core::obs::render_cloud(&s, &cam, world.n_points, world.sim.contact_radius).unwrap();
    let t0 = Instant::now();
    for _ in 0..20 {
        model.forward(obs.coords()).unwrap();
    }
    println!("forward (N=256): {:.1} ms", t0.elapsed().as_secs_f64() / 20.0 * 1000.0);
}
