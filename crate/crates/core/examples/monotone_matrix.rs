//! Monotonicity of step matrices: the 1D isotropic lumped matrix has a
//! non-negative inverse at every step size, the anisotropic bilinear one
//! does not.

use std::f64::consts::PI;

use dmpdiffuse::assembly::{assemble_capacity, assemble_stiffness};
use dmpdiffuse::diagnostics::is_monotone_matrix;
use dmpdiffuse::mesh::{generate_interval_mesh, generate_structured_quad_mesh, Rect};
use dmpdiffuse::problem::Diffusivity;

fn main() -> dmpdiffuse::Result<()> {
    let line = generate_interval_mesh(10, 1.0)?;
    let k1 = assemble_stiffness(&line, &Diffusivity::Isotropic(1.0), 2)?;
    let m1 = assemble_capacity(&line, true, 2)?;

    let square = generate_structured_quad_mesh(3, 3, Rect::UNIT)?;
    let aniso = Diffusivity::RotatedAnisotropic { k1: 10.0, k2: 1e-3, theta: -PI / 6.0 };
    let k2 = assemble_stiffness(&square, &aniso, 2)?;
    let m2 = assemble_capacity(&square, false, 2)?;

    println!("      dt   1D lumped (min inv)      Quad4 anisotropic (min inv)");
    for dt in [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
        let a = m1.linear_combination(1.0 / dt, &k1, 1.0)?.to_dense();
        let b = m2.linear_combination(1.0 / dt, &k2, 1.0)?.to_dense();
        let (ma, ea) = is_monotone_matrix(&a, 0.0)?;
        let (mb, eb) = is_monotone_matrix(&b, 0.0)?;
        println!("{dt:8.0e}   {ma:<5} ({ea:+.3e})      {mb:<5} ({eb:+.3e})");
    }
    Ok(())
}
