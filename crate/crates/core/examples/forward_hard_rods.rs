//! Density of hard rods from the truncated series against the exact
//! equation of state, over a range of activities and truncation orders.

use henderson::cluster::ClusterTruncation;
use henderson::grid::GridSpec;
use henderson::oracle::{tonks_reference, TonksInput};
use henderson::potentials::{PairPotential, Shape};
use henderson::thermo::forward;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let points: usize = std::env::args().nth(1).map_or(Ok(1025), |s| s.parse())?;
    let spec = GridSpec::new(8.0, points)?;
    let p = PairPotential::from_shape(Shape::hard_rod(1.0), 1.0, spec)?;
    println!("{:>6} {:>3} {:>14} {:>14} {:>11} {:>11}", "z", "n", "rho series", "rho exact", "error", "error/z^n+1");
    for n in 2..=4 {
        let trunc = ClusterTruncation::new(n)?;
        for z in [0.0125f64, 0.025, 0.05, 0.1] {
            let s = forward(&p, z.ln(), trunc)?;
            let exact = tonks_reference(TonksInput::Activity(z), 1.0)?.rho;
            let err = s.rho - exact;
            println!(
                "{z:>6} {n:>3} {:>14.10} {exact:>14.10} {err:>11.3e} {:>11.4}",
                s.rho,
                err / z.powi(n as i32 + 1)
            );
        }
    }
    Ok(())
}
