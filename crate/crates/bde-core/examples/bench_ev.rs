use bde_core::dynamics::{simulate_batch, SimulationPlan};
use bde_core::environment::{generate, DisorderLaw};
use bde_core::grid::{Boundary, LatticeWindow, Profile};

fn main() {
    let n = 256u32;
    let w = LatticeWindow::symmetric(n, 2.0, Boundary::FrozenBuffer).unwrap();
    let env = generate(1, DisorderLaw::Uniform { a: 0.5, b: 2.0 }, w, 0.25).unwrap();
    let t = 0.5;
    let plan = SimulationPlan::new(Profile::canonical_tanh(), t, vec![0.25, 0.5]);
    let reps = 20u64;
    let start = std::time::Instant::now();
    let series = simulate_batch(&env, &plan, 3, reps).unwrap();
    let wall = start.elapsed().as_secs_f64();
    let s = env.window.sites() as f64;
    let xi_sum: f64 = (env.window.x_min - 1..=env.window.x_max).map(|b| env.xi(b)).sum();
    let lambda = (n as f64) * (n as f64) * xi_sum;
    let events = lambda * t * reps as f64;
    println!("sites {s}, lambda {lambda:.3e}, events {events:.3e}, wall {wall:.2}s, ns/event {:.1}",
        wall / events * 1e9);
    println!("series len {}", series.len());
}
