use bde_core::rng::replica_rng;
use rand::RngCore;

fn main() {
    let mut rng = replica_rng(1, 2, 3);
    let n = 500_000_000u64;
    let start = std::time::Instant::now();
    let mut acc = 0u64;
    for _ in 0..n {
        acc ^= rng.next_u64();
    }
    let wall = start.elapsed().as_secs_f64();
    println!("acc {acc}, ns per u64: {:.2}", wall / n as f64 * 1e9);
}
