//! Finite differences of the forward map along a smooth probe against the
//! Jacobian, and the symmetry of the Hessian on a pair of probes.

use henderson::cluster::ClusterTruncation;
use henderson::entropy::{apply_f_prime, hessian_form, hessian_form_direct, henderson_f, phi, JacobianKernels, Target};
use henderson::grid::{inner, GridFunction, GridSpec};
use henderson::potentials::{PairPotential, Shape};
use henderson::thermo::forward;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = GridSpec::new(8.0, 257)?;
    let trunc = ClusterTruncation::new(3)?;
    let shape = Shape::HardRod {
        sigma: 1.0,
        tail_depth: 0.3,
        tail_alpha: 6.0,
    };
    let p = PairPotential::from_shape(shape, 1.0, spec)?;
    let rho = forward(&p, 0.05f64.ln(), trunc)?.rho;
    let target = Target::new(rho, henderson_f(&p, rho, trunc)?)?;
    let e = phi(&p, &target, trunc)?;
    let k = JacobianKernels::new(&e.state)?;
    let outside = |c: f64, w: f64| {
        GridFunction::even_from_fn(spec, |x| (-((x.abs() - c) / w).powi(2)).exp())
            .zip_map(p.boltzmann(), |v, b| if b > 0.0 { v } else { 0.0 })
    };
    let (v, w) = (outside(1.5, 0.5), outside(2.5, 0.8));
    let fv = apply_f_prime(&e.state, &k, &v)?;
    println!("{:>8} {:>12}", "step", "remainder");
    for h in [4e-2, 2e-2, 1e-2, 5e-3, 2.5e-3] {
        let f = henderson_f(&p.perturbed(&v, h)?, rho, trunc)?;
        let r = f.add_scaled(-1.0, &target.rho2_star).add_scaled(-h, &fv).sup_norm();
        println!("{h:>8} {r:>12.4e}");
    }
    let (a, b) = (hessian_form(&e.state, &k, &v, &w)?, hessian_form(&e.state, &k, &w, &v)?);
    println!("H(v,w) = {a:.12e}, H(w,v) = {b:.12e}, direct = {:.12e}", hessian_form_direct(&e.state, &k, &v, &w)?);
    println!("H(v,v) = {:.6e}, <v,v> = {:.6e}", hessian_form(&e.state, &k, &v, &v)?, inner(&v, &v)?);
    Ok(())
}
