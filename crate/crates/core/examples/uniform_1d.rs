//! Unit initial value on [0, 1] with a zero-value right end. The single-field
//! scheme overshoots unity at small time steps; the constrained scheme does not.

use dmpdiffuse::mesh::generate_interval_mesh;
use dmpdiffuse::problem::ProblemSpec;
use dmpdiffuse::timestepping::{run_transient, Scheme, SchemeConfig};

fn main() -> dmpdiffuse::Result<()> {
    let mesh = generate_interval_mesh(5, 1.0)?;
    let problem = ProblemSpec::uniform_1d();
    for scheme in [
        Scheme::SingleField { gamma: 1.0, lumped: false },
        Scheme::Proposed { gamma: 1.0 },
    ] {
        let h = run_transient(&mesh, &problem, SchemeConfig::new(scheme, 1e-3), &[])?;
        println!(
            "{:<13} max over steps {:.6}  min over steps {:.6}",
            scheme.name(),
            h.max_over_steps(),
            h.min_over_steps()
        );
    }
    Ok(())
}
