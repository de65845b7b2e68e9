//! Refinement study on the 1D slab with dt proportional to h^2.

use dmpdiffuse::assembly::InitialProjection;
use dmpdiffuse::diagnostics::{convergence_rates, error_norms};
use dmpdiffuse::mesh::generate_interval_mesh;
use dmpdiffuse::problem::ProblemSpec;
use dmpdiffuse::timestepping::{run_until, Scheme, SchemeConfig};

fn main() -> dmpdiffuse::Result<()> {
    let problem = ProblemSpec::slab_1d(0.4, 0.6)?;
    let exact = problem.exact.expect("slab has a series solution");
    let t_eval = 0.01;
    let (mut hs, mut l2, mut h1) = (Vec::new(), Vec::new(), Vec::new());
    for n in [10, 20, 40, 80] {
        let mesh = generate_interval_mesh(n, 1.0)?;
        let h = 1.0 / n as f64;
        let dt = 1e-3 * (h / 0.1f64).powi(2);
        let cfg = SchemeConfig::new(Scheme::Proposed { gamma: 1.0 }, dt).with_projection(InitialProjection::LumpedL2);
        let hist = run_until(&mesh, &problem, cfg, t_eval, &[])?;
        let e = error_norms(&mesh, &hist.final_state.c, &exact, t_eval, 3)?;
        println!("n = {n:>3}  dt = {dt:.3e}  L2 = {:.4e}  H1 = {:.4e}", e.l2, e.h1_semi);
        hs.push(h);
        l2.push(e.l2);
        h1.push(e.h1_semi);
    }
    println!("L2 rates {:?}", convergence_rates(&l2, &hs)?);
    println!("H1 rates {:?}", convergence_rates(&h1, &hs)?);
    Ok(())
}
