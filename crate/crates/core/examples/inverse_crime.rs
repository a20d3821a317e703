//! Recovers a hard-rod potential with an attractive tail from its own pair
//! correlation, starting from the potential of mean force.

use std::time::Instant;

use henderson::cluster::ClusterTruncation;
use henderson::entropy::{henderson_f, Target};
use henderson::grid::{GridFunction, GridSpec};
use henderson::imc::{run_imc, ImcConfig};
use henderson::potentials::{pmf_initial_guess, v_norm, PairPotential, Shape, PMF_FLOOR};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_max: usize = std::env::args().nth(1).map_or(Ok(3), |s| s.parse())?;
    let points: usize = std::env::args().nth(2).map_or(Ok(257), |s| s.parse())?;
    let spec = GridSpec::new(8.0, points)?;
    let trunc = ClusterTruncation::new(n_max)?;
    let shape = Shape::HardRod {
        sigma: 1.0,
        tail_depth: 0.3,
        tail_alpha: 6.0,
    };
    let truth = PairPotential::from_shape(shape, 1.0, spec)?;
    let rho_star = 0.05;
    let clock = Instant::now();
    let target = Target::new(rho_star, henderson_f(&truth, rho_star, trunc)?)?;
    let start = pmf_initial_guess(&target.rho2_star, rho_star, 1.0, PMF_FLOOR)?;
    let cfg = ImcConfig {
        trunc,
        grad_tol: 1e-12,
        ..ImcConfig::default()
    };
    let out = run_imc(&start, &target, &cfg)?;
    for it in &out.iterates {
        println!("{}", serde_json::to_string(it)?);
    }
    let diff: Vec<f64> = (0..spec.points())
        .map(|i| {
            let (a, b) = (out.potential.u_at(i), truth.u_at(i));
            if a.is_finite() && b.is_finite() {
                a - b
            } else {
                0.0
            }
        })
        .collect();
    let diff = GridFunction::new(spec, diff)?.symmetrized();
    println!(
        "stop {:?} after {} steps, |u - u*|_V = {:.3e}, sup|u - u*| = {:.3e}, {:.1} s",
        out.stop,
        out.steps(),
        v_norm(&diff, &truth.majorant())?,
        diff.sup_norm(),
        clock.elapsed().as_secs_f64()
    );
    Ok(())
}
