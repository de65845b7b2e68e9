//! Global operators: stiffness, capacity, loads and Dirichlet elimination.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fem::{map_element, quadrature_rule};
use crate::mesh::{boundary_nodes, ElementType, Mesh};
use crate::problem::{BoundaryData, Diffusivity, Field, ProblemSpec};
use crate::sparse::SparseSymMatrix;

/// Diffusion stiffness `K_ij = int grad N_i . D grad N_j`.
pub fn assemble_stiffness(mesh: &Mesh, field: &Diffusivity, quad_order: usize) -> Result<SparseSymMatrix> {
    let dim = mesh.dim();
    let mut t = Vec::new();
    for (e, el) in mesh.elements().iter().enumerate() {
        let rule = quadrature_rule(el.kind, quad_order)?;
        let nn = el.nodes.len();
        let mut ke = vec![0.0; nn * nn];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let mp = map_element(mesh.coords(), el.kind, &el.nodes, e, *p)?;
            let d = field.eval(mp.x);
            let s = w * mp.det_j;
            for a in 0..nn {
                let ga = mp.grads[a];
                let dga = if dim == 1 {
                    [d[0][0] * ga[0], 0.0]
                } else {
                    [d[0][0] * ga[0] + d[0][1] * ga[1], d[1][0] * ga[0] + d[1][1] * ga[1]]
                };
                for b in 0..nn {
                    let gb = mp.grads[b];
                    ke[a * nn + b] += s * (dga[0] * gb[0] + dga[1] * gb[1]);
                }
            }
        }
        push_element(&mut t, &el.nodes, &ke);
    }
    SparseSymMatrix::from_triplets(mesh.n_nodes(), t)
}

fn push_element(t: &mut Vec<(usize, usize, f64)>, nodes: &[usize], ke: &[f64]) {
    let nn = nodes.len();
    for a in 0..nn {
        for b in 0..nn {
            t.push((nodes[a], nodes[b], ke[a * nn + b]));
        }
    }
}

/// Capacity (mass) matrix, consistent or row-sum lumped.
pub fn assemble_capacity(mesh: &Mesh, lumped: bool, quad_order: usize) -> Result<SparseSymMatrix> {
    let mut t = Vec::new();
    for (e, el) in mesh.elements().iter().enumerate() {
        let rule = quadrature_rule(el.kind, quad_order)?;
        let nn = el.nodes.len();
        let mut me = vec![0.0; nn * nn];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let mp = map_element(mesh.coords(), el.kind, &el.nodes, e, *p)?;
            let s = w * mp.det_j;
            for a in 0..nn {
                for b in 0..nn {
                    me[a * nn + b] += s * mp.values[a] * mp.values[b];
                }
            }
        }
        if lumped {
            for a in 0..nn {
                let row: f64 = me[a * nn..(a + 1) * nn].iter().sum();
                t.push((el.nodes[a], el.nodes[a], row));
            }
        } else {
            push_element(&mut t, &el.nodes, &me);
        }
    }
    SparseSymMatrix::from_triplets(mesh.n_nodes(), t)
}

/// Load vector `int N_i f(x, t) + int_{Gamma_N} N_i q(x, t)`.
pub fn assemble_load(
    mesh: &Mesh,
    source: &Field,
    neumann: &[BoundaryData],
    t: f64,
    quad_order: usize,
) -> Result<Vec<f64>> {
    let mut load = vec![0.0; mesh.n_nodes()];
    for (e, el) in mesh.elements().iter().enumerate() {
        let rule = quadrature_rule(el.kind, quad_order)?;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let mp = map_element(mesh.coords(), el.kind, &el.nodes, e, *p)?;
            let fv = source.eval(mp.x, t);
            if fv == 0.0 {
                continue;
            }
            let s = w * mp.det_j * fv;
            for (a, &n) in el.nodes.iter().enumerate() {
                load[n] += s * mp.values[a];
            }
        }
    }
    for data in neumann {
        add_neumann(mesh, data, t, &mut load)?;
    }
    Ok(load)
}

fn add_neumann(mesh: &Mesh, data: &BoundaryData, t: f64, load: &mut [f64]) -> Result<()> {
    let nodes = boundary_nodes(mesh, &data.tag)?;
    if mesh.dim() == 1 {
        for n in nodes {
            load[n] += data.value.eval(mesh.coords()[n], t);
        }
        return Ok(());
    }
    let edges = neumann_edges(mesh, &data.tag, &nodes);
    let rule = quadrature_rule(ElementType::Line2, 2)?;
    for [a, b] in edges {
        let (pa, pb) = (mesh.coords()[a], mesh.coords()[b]);
        let half = 0.5 * ((pb[0] - pa[0]).hypot(pb[1] - pa[1]));
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let na = 0.5 * (1.0 - p[0]);
            let nb = 0.5 * (1.0 + p[0]);
            let x = [na * pa[0] + nb * pb[0], na * pa[1] + nb * pb[1]];
            let q = data.value.eval(x, t) * w * half;
            load[a] += q * na;
            load[b] += q * nb;
        }
    }
    Ok(())
}

/// Edges carrying `tag`. Falls back to element edges with both endpoints in
/// the tagged node set when the mesh stores no tagged edges.
fn neumann_edges(mesh: &Mesh, tag: &str, nodes: &[usize]) -> Vec<[usize; 2]> {
    let tagged: Vec<[usize; 2]> = mesh
        .boundary_edges()
        .iter()
        .filter(|e| e.tag == tag)
        .map(|e| e.nodes)
        .collect();
    if !tagged.is_empty() {
        return tagged;
    }
    let set: std::collections::BTreeSet<usize> = nodes.iter().copied().collect();
    let mut count: BTreeMap<[usize; 2], usize> = BTreeMap::new();
    for el in mesh.elements() {
        let k = el.nodes.len();
        for i in 0..k {
            let (a, b) = (el.nodes[i], el.nodes[(i + 1) % k]);
            *count.entry([a.min(b), a.max(b)]).or_default() += 1;
        }
    }
    count
        .into_iter()
        .filter(|(e, c)| *c == 1 && set.contains(&e[0]) && set.contains(&e[1]))
        .map(|(e, _)| e)
        .collect()
}

/// Dirichlet values at time `t`, keyed by node. Nodes shared by several tags
/// must receive the same value.
pub fn dirichlet_values(mesh: &Mesh, problem: &ProblemSpec, t: f64) -> Result<BTreeMap<usize, f64>> {
    let mut pinned = Vec::new();
    for d in &problem.dirichlet {
        for n in boundary_nodes(mesh, &d.tag)? {
            pinned.push((n, d.value.eval(mesh.coords()[n], t)));
        }
    }
    merge_pinned(&pinned)
}

fn merge_pinned(pinned: &[(usize, f64)]) -> Result<BTreeMap<usize, f64>> {
    let mut map = BTreeMap::new();
    for &(n, v) in pinned {
        if let Some(&old) = map.get(&n) {
            if old != v {
                return Err(Error::Conflict {
                    node: n,
                    first: old,
                    second: v,
                });
            }
        }
        map.insert(n, v);
    }
    Ok(map)
}

/// Split of the degrees of freedom into free and pinned sets.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    n: usize,
    free: Vec<usize>,
    pinned: Vec<usize>,
    /// Position in `free` of each node, or `usize::MAX` for pinned nodes.
    slot: Vec<usize>,
}

impl DofMap {
    pub fn new(n: usize, pinned: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut is_pinned = vec![false; n];
        for p in pinned {
            if p >= n {
                return Err(Error::invalid(format!("pinned node {p} out of range")));
            }
            is_pinned[p] = true;
        }
        let free: Vec<usize> = (0..n).filter(|&i| !is_pinned[i]).collect();
        let pinned: Vec<usize> = (0..n).filter(|&i| is_pinned[i]).collect();
        let mut slot = vec![usize::MAX; n];
        for (k, &i) in free.iter().enumerate() {
            slot[i] = k;
        }
        Ok(DofMap { n, free, pinned, slot })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn pinned(&self) -> &[usize] {
        &self.pinned
    }

    pub fn reduce_matrix(&self, a: &SparseSymMatrix) -> SparseSymMatrix {
        a.submatrix(&self.free)
    }

    /// `b_f - A_fp c_p`, with `full` supplying the pinned values.
    pub fn reduce_rhs(&self, a: &SparseSymMatrix, b: &[f64], full: &[f64]) -> Vec<f64> {
        self.free
            .iter()
            .map(|&i| {
                let coupling: f64 = a
                    .row(i)
                    .filter(|&(j, _)| self.slot[j] == usize::MAX)
                    .map(|(j, v)| v * full[j])
                    .sum();
                b[i] - coupling
            })
            .collect()
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }

    /// Writes free values into `full`, leaving pinned entries untouched.
    pub fn scatter(&self, free_vals: &[f64], full: &mut [f64]) {
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = free_vals[k];
        }
    }
}

/// System reduced to free degrees of freedom by symmetric elimination.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub matrix: SparseSymMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
    pub pinned_values: BTreeMap<usize, f64>,
}

impl ReducedSystem {
    /// Full-length vector with free values from `x_free` and pinned values restored.
    pub fn expand(&self, x_free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.dofs.n()];
        for (&n, &v) in &self.pinned_values {
            full[n] = v;
        }
        self.dofs.scatter(x_free, &mut full);
        full
    }
}

/// Eliminates pinned nodes from `A x = b`.
pub fn apply_dirichlet(a: &SparseSymMatrix, b: &[f64], pinned: &[(usize, f64)]) -> Result<ReducedSystem> {
    if b.len() != a.n() {
        return Err(Error::invalid("right-hand side length differs from matrix size"));
    }
    let values = merge_pinned(pinned)?;
    let dofs = DofMap::new(a.n(), values.keys().copied())?;
    let mut full = vec![0.0; a.n()];
    for (&n, &v) in &values {
        full[n] = v;
    }
    Ok(ReducedSystem {
        matrix: dofs.reduce_matrix(a),
        rhs: dofs.reduce_rhs(a, b, &full),
        dofs,
        pinned_values: values,
    })
}

/// How the initial value is transferred to nodal values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitialProjection {
    /// Pointwise evaluation at the nodes.
    #[default]
    Nodal,
    /// `int N_i c0 / int N_i`: a local average that stays within the range
    /// of `c0` and smooths jumps that fall on nodes.
    LumpedL2,
}

/// Nodal initial values.
pub fn initial_values(
    mesh: &Mesh,
    initial: &Field,
    projection: InitialProjection,
    quad_order: usize,
) -> Result<Vec<f64>> {
    match projection {
        InitialProjection::Nodal => Ok(mesh.coords().iter().map(|&p| initial.eval(p, 0.0)).collect()),
        InitialProjection::LumpedL2 => {
            let mut num = vec![0.0; mesh.n_nodes()];
            let mut den = vec![0.0; mesh.n_nodes()];
            for (e, el) in mesh.elements().iter().enumerate() {
                let rule = quadrature_rule(el.kind, quad_order)?;
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let mp = map_element(mesh.coords(), el.kind, &el.nodes, e, *p)?;
                    let s = w * mp.det_j;
                    let c = initial.eval(mp.x, 0.0);
                    for (a, &n) in el.nodes.iter().enumerate() {
                        num[n] += s * mp.values[a] * c;
                        den[n] += s * mp.values[a];
                    }
                }
            }
            Ok(num
                .iter()
                .zip(&den)
                .enumerate()
                .map(|(i, (a, d))| if *d > 0.0 { a / d } else { initial.eval(mesh.coords()[i], 0.0) })
                .collect())
        }
    }
}

/// Convenience: stiffness and capacity together.
pub fn assemble_operators(
    mesh: &Mesh,
    field: &Diffusivity,
    lumped: bool,
    quad_order: usize,
) -> Result<(SparseSymMatrix, SparseSymMatrix)> {
    Ok((
        assemble_stiffness(mesh, field, quad_order)?,
        assemble_capacity(mesh, lumped, quad_order)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{
        generate_interval_mesh, generate_plate_with_hole_mesh, generate_structured_quad_mesh,
        generate_structured_tri_mesh, Rect, TriPattern,
    };
    use crate::sparse::solve_spd;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn meshes() -> Vec<Mesh> {
        vec![
            generate_interval_mesh(6, 1.5).unwrap(),
            generate_structured_tri_mesh(5, 4, Rect::UNIT, TriPattern::RightDiagonal).unwrap(),
            generate_structured_tri_mesh(4, 4, Rect::UNIT, TriPattern::CrissCross).unwrap(),
            generate_structured_quad_mesh(5, 6, Rect::new(0.0, 2.0, 0.0, 1.0)).unwrap(),
            generate_plate_with_hole_mesh(21, ElementType::Quad4, TriPattern::default()).unwrap(),
        ]
    }

    #[test]
    fn stiffness_1d() {
        let m = generate_interval_mesh(2, 1.0).unwrap();
        let k = assemble_stiffness(&m, &Diffusivity::Isotropic(1.0), 2).unwrap();
        let expected = [[2.0, -2.0, 0.0], [-2.0, 4.0, -2.0], [0.0, -2.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(k.get(i, j), expected[i][j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn stiffness_unit_quad() {
        let m = generate_structured_quad_mesh(2, 2, Rect::UNIT).unwrap();
        let k = assemble_stiffness(&m, &Diffusivity::Isotropic(1.0), 2).unwrap();
        let v = &m.elements()[0].nodes;
        for i in 0..4 {
            assert_relative_eq!(k.get(v[i], v[i]), 2.0 / 3.0, epsilon = 1e-14);
            assert_relative_eq!(k.get(v[i], v[(i + 1) % 4]), -1.0 / 6.0, epsilon = 1e-14);
            assert_relative_eq!(k.get(v[i], v[(i + 2) % 4]), -1.0 / 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn stiffness_kernel_and_psd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let fields = [
            Diffusivity::Isotropic(2.0),
            Diffusivity::RotatedAnisotropic { k1: 10.0, k2: 1e-3, theta: -PI / 6.0 },
            Diffusivity::LePotier { eps: 0.001 },
        ];
        for m in meshes() {
            for f in &fields {
                let k = assemble_stiffness(&m, f, 2).unwrap();
                assert!(k.asymmetry() < 1e-14);
                let r = k.mul_vec(&vec![1.0; m.n_nodes()]);
                assert!(r.iter().all(|v| v.abs() < 1e-12));
                for _ in 0..100 {
                    let x: Vec<f64> = (0..m.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let kx = k.mul_vec(&x);
                    let q: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
                    assert!(q >= -1e-12);
                }
            }
        }
    }

    #[test]
    fn capacity_1d() {
        let h = 0.25;
        let m = generate_interval_mesh(1, h).unwrap();
        let c = assemble_capacity(&m, false, 2).unwrap();
        assert_relative_eq!(c.get(0, 0), h / 3.0, epsilon = 1e-15);
        assert_relative_eq!(c.get(0, 1), h / 6.0, epsilon = 1e-15);
        let l = assemble_capacity(&m, true, 2).unwrap();
        assert_relative_eq!(l.get(0, 0), h / 2.0, epsilon = 1e-15);
        assert_eq!(l.get(0, 1), 0.0);
    }

    #[test]
    fn capacity_properties() {
        for m in meshes() {
            let c = assemble_capacity(&m, false, 2).unwrap();
            let l = assemble_capacity(&m, true, 2).unwrap();
            let area = m.measure();
            assert_relative_eq!(c.total_sum(), area, max_relative = 1e-12);
            assert_relative_eq!(l.total_sum(), area, max_relative = 1e-12);
            for i in 0..m.n_nodes() {
                let row: f64 = c.row(i).map(|(_, v)| v).sum();
                assert!((l.get(i, i) - row).abs() <= 1e-15 * row.abs().max(1.0));
                assert!(c.row(i).all(|(_, v)| v >= 0.0));
            }
            crate::sparse::SkylineCholesky::new(&c).unwrap();
        }
        let plate = generate_plate_with_hole_mesh(21, ElementType::Quad4, TriPattern::default()).unwrap();
        assert_relative_eq!(assemble_capacity(&plate, false, 2).unwrap().total_sum(), 0.99, max_relative = 1e-12);
    }

    #[test]
    fn load_examples() {
        let m = generate_structured_quad_mesh(9, 9, Rect::UNIT).unwrap();
        let f = assemble_load(&m, &Field::constant(1.0), &[], 0.0, 2).unwrap();
        assert_relative_eq!(f.iter().sum::<f64>(), 1.0, max_relative = 1e-13);

        // 3/8 and 5/8 fall on grid lines of a 9-seed grid, so the indicator is exact there.
        let src = Field::indicator([0.375, 0.375], [0.625, 0.625]);
        let inner = Field::new(move |x, t| if x[0] > 0.375 && x[0] < 0.625 && x[1] > 0.375 && x[1] < 0.625 { src.eval(x, t) } else { 0.0 });
        let f = assemble_load(&m, &inner, &[], 0.0, 2).unwrap();
        assert_relative_eq!(f.iter().sum::<f64>(), 1.0 / 16.0, max_relative = 1e-13);

        let m = generate_interval_mesh(5, 1.0).unwrap();
        let zero = [BoundaryData::new("left", Field::constant(0.0))];
        let f = assemble_load(&m, &Field::constant(0.0), &zero, 0.0, 2).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
        let bad = [BoundaryData::new("nowhere", Field::constant(1.0))];
        assert!(matches!(assemble_load(&m, &Field::constant(0.0), &bad, 0.0, 2), Err(Error::NotFound(_))));
    }

    #[test]
    fn neumann_flux_integrates() {
        let m = generate_structured_tri_mesh(5, 5, Rect::new(0.0, 2.0, 0.0, 1.0), TriPattern::LeftDiagonal).unwrap();
        let q = [BoundaryData::new("top", Field::new(|x, _| x[0]))];
        let f = assemble_load(&m, &Field::constant(0.0), &q, 0.0, 2).unwrap();
        // int_0^2 x dx = 2
        assert_relative_eq!(f.iter().sum::<f64>(), 2.0, max_relative = 1e-13);
    }

    #[test]
    fn dirichlet_examples() {
        let m = generate_interval_mesh(2, 1.0).unwrap();
        let k = assemble_stiffness(&m, &Diffusivity::Isotropic(1.0), 2).unwrap();
        let r = apply_dirichlet(&k, &[0.0; 3], &[(2, 0.0)]).unwrap();
        assert_eq!(r.matrix.n(), 2);

        let all: Vec<(usize, f64)> = (0..3).map(|i| (i, i as f64 + 0.5)).collect();
        let r = apply_dirichlet(&k, &[0.0; 3], &all).unwrap();
        assert_eq!(r.matrix.n(), 0);
        assert_eq!(r.expand(&[]), vec![0.5, 1.5, 2.5]);

        assert!(matches!(apply_dirichlet(&k, &[0.0; 3], &[(1, 0.0), (1, 1.0)]), Err(Error::Conflict { .. })));
        apply_dirichlet(&k, &[0.0; 3], &[(1, 1.0), (1, 1.0)]).unwrap();
    }

    #[test]
    fn patch_test() {
        let u = |p: [f64; 2]| 0.2 + 1.3 * p[0] - 0.7 * p[1];
        for m in meshes() {
            let k = assemble_stiffness(&m, &Diffusivity::Isotropic(1.0), 2).unwrap();
            let mut pinned = Vec::new();
            for set in m.node_tags().values() {
                pinned.extend(set.iter().map(|&n| (n, u(m.coords()[n]))));
            }
            let r = apply_dirichlet(&k, &vec![0.0; m.n_nodes()], &pinned).unwrap();
            let x = solve_spd(&r.matrix, &r.rhs).unwrap();
            let full = r.expand(&x);
            for (i, p) in m.coords().iter().enumerate() {
                assert!((full[i] - u(*p)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lumped_projection_halves_jumps() {
        let m = generate_interval_mesh(10, 1.0).unwrap();
        let ic = Field::indicator([0.4, f64::NEG_INFINITY], [0.6, f64::INFINITY]);
        let nodal = initial_values(&m, &ic, InitialProjection::Nodal, 3).unwrap();
        assert_eq!(nodal[4], 1.0);
        let proj = initial_values(&m, &ic, InitialProjection::LumpedL2, 3).unwrap();
        assert_relative_eq!(proj[4], 0.5, epsilon = 1e-12);
        assert_relative_eq!(proj[5], 1.0, epsilon = 1e-12);
        assert!(proj.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
