use super::*;
use crate::grid::{integrate, GridSpec};
use crate::potentials::Shape;

fn soft(spec: GridSpec) -> PairPotential {
    PairPotential::from_shape(
        Shape::LjType {
            epsilon: 0.4,
            sigma: 0.8,
            alpha: 6.0,
        },
        1.0,
        spec,
    )
    .unwrap()
}

fn hard_rod(spec: GridSpec) -> PairPotential {
    PairPotential::from_shape(Shape::hard_rod(1.0), 1.0, spec).unwrap()
}

/// Independent count: adjacency lists and depth-first search over all edge subsets.
fn count_connected(n: usize) -> usize {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut count = 0;
    for m in 0u32..1 << pairs.len() {
        let mut adj = vec![vec![]; n];
        for (b, &(i, j)) in pairs.iter().enumerate() {
            if m >> b & 1 == 1 {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if seen.iter().all(|&s| s) {
            count += 1;
        }
    }
    count
}

#[test]
fn graph_counts_match_exhaustive_search() {
    for n in 1..=5 {
        let set = connected_graphs(n).unwrap();
        assert_eq!(set.len(), count_connected(n), "n={n}");
        for g in set.graphs() {
            assert!(g.iter().all(|&(i, j)| 1 <= i && i < j && j <= n));
        }
    }
    let counts: Vec<usize> = (1..=4).map(|n| connected_graphs(n).unwrap().len()).collect();
    assert_eq!(counts, vec![1, 1, 4, 38]);
}

#[test]
fn fast_pair_coefficients_match_brute_force() {
    let spec = GridSpec::new(3.0, 25).unwrap();
    let p = soft(spec);
    let trunc = ClusterTruncation::new(4).unwrap();
    let s = ClusterSeries::assemble(&p, trunc, Assembly::Pair).unwrap();
    let f = p.mayer();
    for (n, fact) in [(2usize, 1.0), (3, 1.0), (4, 2.0)] {
        let GraphIntegral::Function(brute) = phi_n(&f, n, Externals::PairSlice, trunc).unwrap() else {
            panic!("expected a function")
        };
        let fast = s.omega2_coefficient(n);
        for i in 0..spec.points() {
            let b = brute.at(i) / fact;
            assert!((fast.at(i) - b).abs() < 1e-12 * (1.0 + b.abs()), "n={n} i={i}: {} vs {b}", fast.at(i));
        }
    }
}

#[test]
fn fast_kernels_match_brute_force() {
    let spec = GridSpec::new(2.5, 21).unwrap();
    let p = soft(spec);
    let trunc = ClusterTruncation::new(4).unwrap();
    let s = ClusterSeries::assemble(&p, trunc, Assembly::WithKernels).unwrap();
    let f = p.mayer();
    let k = spec.center();
    let pp = spec.period();
    let h = spec.spacing();
    for &(i, j) in &[(3usize, 7usize), (10, 10), (15, 2), (0, 20), (k, 13)] {
        for n in 3..=4 {
            let GraphIntegral::Scalar(b) = phi_n(&f, n, Externals::Nodes(&[i, k, j]), trunc).unwrap() else {
                panic!()
            };
            let fast = s.omega3_coefficient(n).unwrap().get(i, j);
            assert!((fast - b).abs() < 1e-12 * (1.0 + b.abs()), "n={n} ({i},{j}): {fast} vs {b}");
        }
        let mut b = 0.0;
        for t in 0..pp {
            let t2 = (t + j + pp - k) % pp;
            let GraphIntegral::Scalar(v) = phi_n(&f, 4, Externals::Nodes(&[i, k, t, t2]), trunc).unwrap() else {
                panic!()
            };
            b += h * v;
        }
        let fast = s.k4_coefficient().unwrap().get(i, j);
        assert!((fast - b).abs() < 1e-12 * (1.0 + b.abs()), "K4 ({i},{j}): {fast} vs {b}");
    }
}

#[test]
fn kernel_row_integrals_reproduce_pair_function() {
    let spec = GridSpec::new(6.0, 97).unwrap();
    let p = soft(spec);
    let s = ClusterSeries::assemble(&p, ClusterTruncation::new(4).unwrap(), Assembly::WithKernels).unwrap();
    for n in 3..=4 {
        let lhs = s.omega3_row_integral(n);
        let rhs = s.omega2_coefficient(n).scaled((n - 2) as f64);
        for i in 0..spec.points() {
            assert!((lhs.at(i) - rhs.at(i)).abs() < 1e-12, "n={n} i={i}");
        }
    }
    let k4_rows = s.k4_coefficient().unwrap().row_integrals();
    let two_w4 = s.omega2_coefficient(4).scaled(2.0);
    for i in 0..spec.points() {
        assert!((k4_rows.at(i) - two_w4.at(i)).abs() < 1e-12);
    }
    assert_eq!(s.omega3_coefficient(4).unwrap().asymmetry(), 0.0);
    assert!(s.omega2(0.05).asymmetry() == 0.0);
}

#[test]
fn hard_rod_density_coefficients() {
    // With b(σ) = 1/2 the second coefficient is exact; the third carries the
    // trapezoid error h²/4 of the triangle overlap integral.
    let h = 1.0 / 16.0;
    let spec = GridSpec::with_spacing(6.0, h).unwrap();
    let s = ClusterSeries::assemble(&hard_rod(spec), ClusterTruncation::new(4).unwrap(), Assembly::Pair).unwrap();
    let r = s.rho_coefficients();
    assert_eq!(r[1], 1.0);
    assert!((r[2] + 2.0).abs() < 1e-13);
    assert!((r[3] - (4.5 + h * h / 4.0)).abs() < 1e-11, "{}", r[3]);
    // Tonks: ρ₄ = -32/3.
    assert!((r[4] + 32.0 / 3.0).abs() < 0.02, "{}", r[4]);
    let pc = s.pressure_coefficients();
    assert!((pc[2] + 1.0).abs() < 1e-13);
    assert!((pc[3] - 1.5).abs() < 1e-3);
}

#[test]
fn phi3_of_hard_rods_at_origin() {
    let spec = GridSpec::new(3.0, 97).unwrap();
    let f = hard_rod(spec).mayer();
    let GraphIntegral::Scalar(v) = phi_n(&f, 3, Externals::Origin, ClusterTruncation::new(3).unwrap()).unwrap() else {
        panic!()
    };
    assert!((v - 9.0).abs() < 1e-2, "{v}");
}

#[test]
fn ideal_gas_has_no_clusters() {
    let spec = GridSpec::new(3.0, 31).unwrap();
    let p = PairPotential::ideal(1.0, spec).unwrap();
    let trunc = ClusterTruncation::default();
    assert_eq!(omega_m(&p, 0.1, 1, trunc).unwrap(), ClusterValue::Scalar(0.1));
    let ClusterValue::Function(w2) = omega_m(&p, 0.1, 2, trunc).unwrap() else { panic!() };
    assert_eq!(w2.sup_norm(), 0.0);
    for m in 3..=4 {
        let ClusterValue::Kernel(k) = omega_m(&p, 0.1, m, trunc).unwrap() else { panic!() };
        assert_eq!(k.sup_norm(), 0.0);
    }
    assert_eq!(pressure_series(&p, 0.1, trunc).unwrap(), 0.1);
    for n in 2..=4 {
        let GraphIntegral::Function(g) = phi_n(&p.mayer(), n, Externals::PairSlice, trunc).unwrap() else {
            panic!()
        };
        assert_eq!(g.sup_norm(), 0.0);
    }
}

#[test]
fn leading_pair_term_is_mayer_function() {
    let spec = GridSpec::new(4.0, 81).unwrap();
    let p = hard_rod(spec);
    let ClusterValue::Function(w2) = omega_m(&p, 0.1, 2, ClusterTruncation::new(2).unwrap()).unwrap() else {
        panic!()
    };
    assert!((w2.at_origin() + 0.01).abs() < 1e-16);
    assert_eq!(w2.at(spec.index_of(2.0).unwrap()), 0.0);
}

#[test]
fn hard_rod_series_values_at_tenth() {
    let spec = GridSpec::with_spacing(6.0, 1.0 / 32.0).unwrap();
    let p = hard_rod(spec);
    let trunc = ClusterTruncation::new(3).unwrap();
    let ClusterValue::Scalar(rho) = omega_m(&p, 0.1, 1, trunc).unwrap() else { panic!() };
    assert!((rho - 0.0845).abs() < 1e-6, "{rho}");
    let bp = pressure_series(&p, 0.1, trunc).unwrap();
    assert!((bp - 0.0915).abs() < 1e-6, "{bp}");
    // ∫ω⁽²⁾ = -2z² + 9z³ at third order.
    let j = integrate(&ClusterSeries::assemble(&p, trunc, Assembly::Pair).unwrap().omega2(0.1));
    assert!((j - (-0.02 + 0.009)).abs() < 1e-6, "{j}");
}

#[test]
fn guards() {
    assert!(ClusterTruncation::new(1).is_err());
    assert!(ClusterTruncation::new(6).is_err());
    let spec = GridSpec::new(2.0, 11).unwrap();
    let p = hard_rod(spec);
    assert!(ClusterSeries::assemble(&p, ClusterTruncation::new(5).unwrap(), Assembly::Pair).is_err());
    let f = p.mayer();
    let t5 = ClusterTruncation::new(5).unwrap();
    assert!(phi_n(&f, 5, Externals::Origin, t5).is_err());
    assert!(phi_n(&f, 4, Externals::Origin, ClusterTruncation::new(3).unwrap()).is_err());
    assert!(omega_m(&p, 0.1, 5, t5).is_err());
}
