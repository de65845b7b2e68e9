//! Box-constrained QP: minimize 1/2 x'Kx - f'x subject to 0 <= x <= 1.

use dmpdiffuse::qp::{solve_box_qp, BoxQp, DEFAULT_TOL};
use dmpdiffuse::sparse::SparseSymMatrix;

fn main() -> dmpdiffuse::Result<()> {
    let k = SparseSymMatrix::from_dense(&[
        vec![2.0, -1.0, 0.0, 0.0],
        vec![-1.0, 2.0, -1.0, 0.0],
        vec![0.0, -1.0, 2.0, -1.0],
        vec![0.0, 0.0, -1.0, 2.0],
    ])?;
    let f = [3.0, -1.0, 0.5, 2.0];
    let (lo, hi) = ([0.0; 4], [1.0; 4]);
    let prob = BoxQp::new(&k, &f, &lo, &hi)?;
    let r = solve_box_qp(&prob, None, DEFAULT_TOL)?;
    println!("x           = {:?}", r.x);
    println!("at lower    = {:?}", r.active_lower);
    println!("at upper    = {:?}", r.active_upper);
    println!("multipliers = {:?}", r.multipliers);
    println!("iterations {}  kkt residual {:.2e}", r.iterations, r.kkt_residual);
    Ok(())
}
