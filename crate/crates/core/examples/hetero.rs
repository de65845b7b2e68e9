//! Heterogeneous anisotropic medium with a square source. Only the
//! non-negativity side of the bounds applies because of the source.

use dmpdiffuse::mesh::{generate_structured_quad_mesh, Rect};
use dmpdiffuse::problem::ProblemSpec;
use dmpdiffuse::timestepping::{run_transient, Scheme, SchemeConfig};

fn main() -> dmpdiffuse::Result<()> {
    let mesh = generate_structured_quad_mesh(51, 51, Rect::UNIT)?;
    let problem = ProblemSpec::hetero(1e-3);
    let dt = 0.5;
    let single = run_transient(&mesh, &problem, SchemeConfig::new(Scheme::SingleField { gamma: 1.0, lumped: false }, dt), &[])?;
    let proposed = run_transient(&mesh, &problem, SchemeConfig::new(Scheme::Proposed { gamma: 1.0 }, dt), &[])?;
    println!("   t   single min   single max  proposed min  proposed max  qp iters");
    for (a, b) in single.records.iter().zip(&proposed.records) {
        println!(
            "{:4.1} {:+.4e} {:.6e} {:+.4e} {:.6e} {:>9}",
            a.t, a.min_c, a.max_c, b.min_c, b.max_c, b.qp_iterations
        );
    }
    Ok(())
}
