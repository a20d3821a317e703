//! Counts connected labeled graphs by enumeration and checks the subset
//! recursion against it with unit and random bond weights.

use henderson::cluster::graphs::{connected_graphs, connected_sum, MAX_VERTICES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("{:>2} {:>8} {:>12} {:>12}", "n", "graphs", "unit sum", "random diff");
    for n in 1..=MAX_VERTICES {
        let set = connected_graphs(n)?;
        let unit = [[1.0; MAX_VERTICES]; MAX_VERTICES];
        let mut w = [[0.0; MAX_VERTICES]; MAX_VERTICES];
        for (i, j) in (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))) {
            w[i][j] = rng.gen_range(-1.0..1.0);
            w[j][i] = w[i][j];
        }
        let diff = (set.weighted_sum(&w) - connected_sum(n, &w)).abs();
        println!("{n:>2} {:>8} {:>12} {diff:>12.1e}", set.len(), connected_sum(n, &unit));
    }
    Ok(())
}
