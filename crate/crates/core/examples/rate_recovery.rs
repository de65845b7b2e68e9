//! Nodal rates from the constrained scheme against the analytic time
//! derivative of the 1D uniform problem, for both recovery methods.

use dmpdiffuse::analytic::ExactSolution;
use dmpdiffuse::mesh::generate_interval_mesh;
use dmpdiffuse::problem::ProblemSpec;
use dmpdiffuse::timestepping::{run_until, RateMethod, Scheme, SchemeConfig};

fn main() -> dmpdiffuse::Result<()> {
    let mesh = generate_interval_mesh(20, 1.0)?;
    let problem = ProblemSpec::uniform_1d();
    let exact = problem.exact.expect("series solution");
    let t = 0.009;
    for rates in [RateMethod::Direct, RateMethod::Weighted] {
        for gamma in [0.1, 0.5, 1.0] {
            let cfg = SchemeConfig::new(Scheme::Proposed { gamma }, 1e-3).with_rates(rates);
            let h = run_until(&mesh, &problem, cfg, 0.01, &[t])?;
            let snap = &h.snapshots[0];
            let mut worst = 0.0f64;
            for (x, v) in mesh.coords().iter().zip(&snap.v) {
                worst = worst.max((v - exact.rate(*x, snap.t)?).abs());
            }
            println!("{rates:?} gamma = {gamma}: max rate error {worst:.4e}");
        }
    }
    Ok(())
}
