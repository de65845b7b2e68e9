//! Reads a Gmsh 2.2 file (argument, or a built-in unit square) and runs the
//! 2D slab problem on it. Boundary groups must be named left/right/bottom/top.

use dmpdiffuse::mesh::{generate_structured_tri_mesh, read_gmsh, write_gmsh, Rect, TriPattern};
use dmpdiffuse::problem::ProblemSpec;
use dmpdiffuse::timestepping::{run_until, Scheme, SchemeConfig};

fn main() -> dmpdiffuse::Result<()> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => write_gmsh(&generate_structured_tri_mesh(17, 17, Rect::UNIT, TriPattern::LeftDiagonal)?),
    };
    let mesh = read_gmsh(&text)?;
    println!(
        "{} nodes, {} elements, tags {:?}",
        mesh.n_nodes(),
        mesh.n_elements(),
        mesh.node_tags().keys().collect::<Vec<_>>()
    );
    let problem = ProblemSpec::slab_2d(0.4, 0.6)?;
    let h = run_until(&mesh, &problem, SchemeConfig::new(Scheme::Proposed { gamma: 1.0 }, 1e-4), 2e-3, &[])?;
    println!("min {:.3e}  max {:.6}  violations {}", h.min_over_steps(), h.max_over_steps(), h.total_violations());
    Ok(())
}
