//! Compares the cluster expansion with direct quadrature of the grand
//! partition function of hard rods in a box, away from the walls.

use std::time::Instant;

use henderson::cluster::ClusterTruncation;
use henderson::grid::GridSpec;
use henderson::oracle::{box_correlation, box_correlations, box_partition_function, BoxSpec};
use henderson::potentials::{PairPotential, Shape};
use henderson::thermo::forward;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let z: f64 = std::env::args().nth(1).map_or(Ok(0.05), |s| s.parse())?;
    let n_cap: usize = std::env::args().nth(2).map_or(Ok(4), |s| s.parse())?;
    let spec = GridSpec::new(8.0, 257)?;
    let p = PairPotential::from_shape(Shape::hard_rod(1.0), 1.0, spec)?;
    let mu = z.ln();
    let state = forward(&p, mu, ClusterTruncation::new(4)?)?;
    let mut b = BoxSpec::new(12.0, n_cap)?;
    if let Some(q) = std::env::args().nth(3) {
        b.quad_points = q.parse()?;
        b.quad_points_high = b.quad_points;
    }
    let clock = Instant::now();
    println!("Xi = {:.10}", box_partition_function(&p, mu, &b)?);
    let mut worst: f64 = 0.0;
    for x in [0.0, 1.0, 2.0] {
        let rho = box_correlation(&p, mu, &b, &[x])?;
        worst = worst.max((rho - state.rho).abs());
        println!("rho({x}) box {rho:.8} series {:.8} diff {:.2e}", state.rho, rho - state.rho);
    }
    for d in [0.5, 1.25, 1.5, 2.0, 3.0] {
        let (a, c) = (-0.5 * d, 0.5 * d);
        let t = box_correlations(&p, mu, &b, &[a, c])?;
        let w2 = t.rho(3) - t.rho(1) * t.rho(2);
        let i = spec.index_of(d).ok_or("separation off grid")?;
        let s = state.omega2.at(i);
        worst = worst.max((w2 - s).abs());
        println!("omega2({d}) box {w2:.8} series {s:.8} diff {:.2e}", w2 - s);
    }
    println!("max abs diff {worst:.2e}, {:.1} s", clock.elapsed().as_secs_f64());
    Ok(())
}
