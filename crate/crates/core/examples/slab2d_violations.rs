//! One backward Euler step on the 2D slab: the unconstrained solution leaves
//! [0, 1] on a fraction of the nodes, the box QP keeps every node inside.

use dmpdiffuse::diagnostics::violation_report;
use dmpdiffuse::mesh::{generate_structured_tri_mesh, Rect, TriPattern};
use dmpdiffuse::problem::ProblemSpec;
use dmpdiffuse::timestepping::{run_until, Scheme, SchemeConfig, VIOLATION_TOL};

fn main() -> dmpdiffuse::Result<()> {
    let problem = ProblemSpec::slab_2d(0.4, 0.6)?;
    for pattern in [TriPattern::RightDiagonal, TriPattern::CrissCross] {
        let mesh = generate_structured_tri_mesh(21, 21, Rect::UNIT, pattern)?;
        for scheme in [
            Scheme::SingleField { gamma: 1.0, lumped: false },
            Scheme::Proposed { gamma: 1.0 },
        ] {
            let h = run_until(&mesh, &problem, SchemeConfig::new(scheme, 1e-4), 1e-4, &[])?;
            let r = violation_report(&h.final_state.c, 0.0, 1.0, VIOLATION_TOL);
            println!(
                "{pattern:?} {:<13} min {:+.5} ({:4.1}% below)  max {:.5} ({:3.1}% above)",
                scheme.name(),
                r.min_value,
                100.0 * r.fraction_below,
                r.max_value,
                100.0 * r.fraction_above
            );
        }
    }
    Ok(())
}
