use dmpdiffuse::qp::{solve_box_qp, BoxQp, DEFAULT_TOL};
use dmpdiffuse::sparse::SparseSymMatrix;
use proptest::prelude::*;

/// Random banded SPD matrix: a shifted 1D Laplacian with random positive weights.
fn banded(weights: &[f64], shift: f64) -> Vec<Vec<f64>> {
    let n = weights.len() + 1;
    let mut k = vec![vec![0.0; n]; n];
    for (e, &w) in weights.iter().enumerate() {
        k[e][e] += w;
        k[e + 1][e + 1] += w;
        k[e][e + 1] -= w;
        k[e + 1][e] -= w;
    }
    for (i, row) in k.iter_mut().enumerate() {
        row[i] += shift;
    }
    k
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solution_satisfies_kkt(
        weights in proptest::collection::vec(0.1f64..5.0, 5..60),
        shift in 0.01f64..2.0,
        seed_f in proptest::collection::vec(-4.0f64..4.0, 61),
        lo in -0.5f64..0.0,
        width in 0.1f64..1.5,
        warm in any::<bool>(),
    ) {
        let k = banded(&weights, shift);
        let n = k.len();
        let f = &seed_f[..n];
        let lo_v = vec![lo; n];
        let hi_v = vec![lo + width; n];
        let ks = SparseSymMatrix::from_dense(&k).unwrap();
        let prob = BoxQp::new(&ks, f, &lo_v, &hi_v).unwrap();
        let start = vec![lo + 0.5 * width; n];
        let r = solve_box_qp(&prob, if warm { Some(&start) } else { None }, DEFAULT_TOL).unwrap();
        let scale = 1.0 + f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            let x = r.x[i];
            prop_assert!(x >= lo_v[i] && x <= hi_v[i]);
            // Gradient of 1/2 x'Kx - f'x.
            let g: f64 = k[i].iter().zip(&r.x).map(|(a, b)| a * b).sum::<f64>() - f[i];
            let tol = 1e-8 * scale;
            if x > lo_v[i] + 1e-12 && x < hi_v[i] - 1e-12 {
                prop_assert!(g.abs() <= tol, "free gradient {g}");
            } else if x <= lo_v[i] + 1e-12 {
                prop_assert!(g >= -tol, "lower multiplier {g}");
            } else {
                prop_assert!(g <= tol, "upper multiplier {g}");
            }
        }
        prop_assert!(r.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs())));
    }
}
