//! Low-order meshes in one and two dimensions.
//!
//! Generated meshes number nodes lexicographically by `(y, x)`; elements are
//! numbered cell by cell in the same order. Boundary entities carry string
//! tags that the problem definitions refer to for Dirichlet and Neumann data.

mod gmsh;

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::fem;

pub use gmsh::{read_gmsh, write_gmsh};

/// Spatial point. One-dimensional meshes leave the second coordinate at zero.
pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementType {
    Line2,
    Tri3,
    Quad4,
}

impl ElementType {
    pub fn n_nodes(self) -> usize {
        match self {
            ElementType::Line2 => 2,
            ElementType::Tri3 => 3,
            ElementType::Quad4 => 4,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ElementType::Line2 => 1,
            ElementType::Tri3 | ElementType::Quad4 => 2,
        }
    }

    /// Measure of the reference element.
    pub fn reference_measure(self) -> f64 {
        match self {
            ElementType::Line2 => 2.0,
            ElementType::Tri3 => 0.5,
            ElementType::Quad4 => 4.0,
        }
    }
}

/// How each rectangular cell of a structured grid is split into triangles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TriPattern {
    /// Diagonal from the lower-left to the upper-right corner.
    #[default]
    RightDiagonal,
    /// Diagonal from the lower-right to the upper-left corner.
    LeftDiagonal,
    /// Both diagonals, with an added node at the cell center.
    CrissCross,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub kind: ElementType,
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: String,
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
    };

    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Immutable mesh of low-order elements with tagged boundary sets.
#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    coords: Vec<Point>,
    elements: Vec<Element>,
    boundary_edges: Vec<BoundaryEdge>,
    node_tags: BTreeMap<String, BTreeSet<usize>>,
}

impl Mesh {
    /// Builds a mesh and checks connectivity, tags and element orientation.
    pub fn new(
        dim: usize,
        coords: Vec<Point>,
        elements: Vec<Element>,
        boundary_edges: Vec<BoundaryEdge>,
        node_tags: BTreeMap<String, BTreeSet<usize>>,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid(format!("mesh dimension must be 1 or 2, got {dim}")));
        }
        let n = coords.len();
        for (e, el) in elements.iter().enumerate() {
            if el.kind.dim() != dim {
                return Err(Error::invalid(format!(
                    "element {e} of type {:?} in a {dim}D mesh",
                    el.kind
                )));
            }
            if el.nodes.len() != el.kind.n_nodes() {
                return Err(Error::invalid(format!("element {e} has wrong node count")));
            }
            if let Some(&bad) = el.nodes.iter().find(|&&i| i >= n) {
                return Err(Error::invalid(format!("element {e} references node {bad} >= {n}")));
            }
        }
        for edge in &boundary_edges {
            if edge.tag.is_empty() {
                return Err(Error::invalid("boundary edge with empty tag"));
            }
            if edge.nodes.iter().any(|&i| i >= n) {
                return Err(Error::invalid("boundary edge references a missing node"));
            }
        }
        for (tag, set) in &node_tags {
            if tag.is_empty() {
                return Err(Error::invalid("empty node tag"));
            }
            if set.iter().any(|&i| i >= n) {
                return Err(Error::invalid(format!("tag {tag:?} references a missing node")));
            }
        }
        let mesh = Mesh {
            dim,
            coords,
            elements,
            boundary_edges,
            node_tags,
        };
        mesh.check_orientation()?;
        Ok(mesh)
    }

    fn check_orientation(&self) -> Result<()> {
        for e in 0..self.elements.len() {
            let kind = self.elements[e].kind;
            let rule = fem::quadrature_rule(kind, 2)?;
            for p in &rule.points {
                fem::map_to_physical(self, e, *p)?;
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn node_tags(&self) -> &BTreeMap<String, BTreeSet<usize>> {
        &self.node_tags
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.node_tags.contains_key(tag)
    }

    /// Sum of element lengths (1D) or areas (2D).
    pub fn measure(&self) -> f64 {
        (0..self.elements.len())
            .map(|e| fem::element_measure(self, e).unwrap_or(0.0))
            .sum()
    }

    /// Element sizes: length in 1D, square root of the area in 2D.
    pub fn max_element_size(&self) -> f64 {
        (0..self.elements.len())
            .map(|e| {
                let m = fem::element_measure(self, e).unwrap_or(0.0);
                if self.dim == 1 {
                    m
                } else {
                    m.sqrt()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Nodes carrying `tag`, in ascending order.
pub fn boundary_nodes(mesh: &Mesh, tag: &str) -> Result<Vec<usize>> {
    mesh.node_tags
        .get(tag)
        .map(|s| s.iter().copied().collect())
        .ok_or_else(|| Error::NotFound(format!("node tag {tag:?}")))
}

/// Uniform mesh of `[0, length]` with `n_elem` two-node elements.
pub fn generate_interval_mesh(n_elem: usize, length: f64) -> Result<Mesh> {
    if n_elem == 0 {
        return Err(Error::invalid("interval mesh needs at least one element"));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::invalid(format!("interval length must be positive, got {length}")));
    }
    let coords = (0..=n_elem)
        .map(|i| [length * i as f64 / n_elem as f64, 0.0])
        .collect();
    let elements = (0..n_elem)
        .map(|i| Element {
            kind: ElementType::Line2,
            nodes: vec![i, i + 1],
        })
        .collect();
    let mut tags = BTreeMap::new();
    tags.insert("left".to_string(), BTreeSet::from([0]));
    tags.insert("right".to_string(), BTreeSet::from([n_elem]));
    Mesh::new(1, coords, elements, Vec::new(), tags)
}

/// Structured Quad4 mesh with `xseed x yseed` nodes.
pub fn generate_structured_quad_mesh(xseed: usize, yseed: usize, domain: Rect) -> Result<Mesh> {
    GridSpec::new(xseed, yseed, domain)?.build(Cell::Quad, |_, _| true, side_tag)
}

/// Structured Tri3 mesh with `xseed x yseed` grid nodes, cells split per `pattern`.
pub fn generate_structured_tri_mesh(
    xseed: usize,
    yseed: usize,
    domain: Rect,
    pattern: TriPattern,
) -> Result<Mesh> {
    GridSpec::new(xseed, yseed, domain)?.build(Cell::Tri(pattern), |_, _| true, side_tag)
}

/// Unit square minus the square hole `[0.45, 0.55]^2`, meshed on a
/// `seed x seed` grid whose lines pass through the hole boundary.
///
/// Boundary tags are `"outer"` and `"hole"`. `pattern` only matters for Tri3.
pub fn generate_plate_with_hole_mesh(
    seed: usize,
    elem: ElementType,
    pattern: TriPattern,
) -> Result<Mesh> {
    if seed < 21 || !(seed - 1).is_multiple_of(20) {
        return Err(Error::invalid(format!(
            "plate-with-hole seed must satisfy (seed - 1) % 20 == 0, got {seed}"
        )));
    }
    let cell = match elem {
        ElementType::Quad4 => Cell::Quad,
        ElementType::Tri3 => Cell::Tri(pattern),
        ElementType::Line2 => {
            return Err(Error::invalid("plate-with-hole needs a 2D element type"))
        }
    };
    let k = (seed - 1) / 20;
    let (lo, hi) = (9 * k, 11 * k);
    let in_hole = move |i: usize, j: usize| (lo..hi).contains(&i) && (lo..hi).contains(&j);
    GridSpec::new(seed, seed, Rect::UNIT)?.build(
        cell,
        move |i, j| !in_hole(i, j),
        |_, outer| if outer { "outer".into() } else { "hole".into() },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

fn side_tag(side: Side, _outer: bool) -> String {
    match side {
        Side::Bottom => "bottom",
        Side::Right => "right",
        Side::Top => "top",
        Side::Left => "left",
    }
    .to_string()
}

#[derive(Clone, Copy)]
enum Cell {
    Quad,
    Tri(TriPattern),
}

struct GridSpec {
    nx: usize,
    ny: usize,
    domain: Rect,
}

impl GridSpec {
    fn new(xseed: usize, yseed: usize, domain: Rect) -> Result<Self> {
        if xseed < 2 || yseed < 2 {
            return Err(Error::invalid(format!(
                "structured mesh needs xseed, yseed >= 2, got {xseed} x {yseed}"
            )));
        }
        let finite = [domain.x0, domain.x1, domain.y0, domain.y1]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(domain.x1 > domain.x0) || !(domain.y1 > domain.y0) {
            return Err(Error::invalid(format!("degenerate rectangle {domain:?}")));
        }
        Ok(GridSpec {
            nx: xseed - 1,
            ny: yseed - 1,
            domain,
        })
    }

    fn x(&self, i: usize) -> f64 {
        let d = &self.domain;
        if i == self.nx {
            d.x1
        } else {
            d.x0 + (d.x1 - d.x0) * i as f64 / self.nx as f64
        }
    }

    fn y(&self, j: usize) -> f64 {
        let d = &self.domain;
        if j == self.ny {
            d.y1
        } else {
            d.y0 + (d.y1 - d.y0) * j as f64 / self.ny as f64
        }
    }

    fn build(
        &self,
        cell: Cell,
        keep: impl Fn(usize, usize) -> bool,
        tag: impl Fn(Side, bool) -> String,
    ) -> Result<Mesh> {
        let (nx, ny) = (self.nx, self.ny);
        let kept = |i: isize, j: isize| -> bool {
            i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && keep(i as usize, j as usize)
        };
        let centers = matches!(cell, Cell::Tri(TriPattern::CrissCross));

        // Mark used grid nodes, then number grid rows interleaved with center rows.
        let mut used = vec![false; (nx + 1) * (ny + 1)];
        for j in 0..ny {
            for i in 0..nx {
                if kept(i as isize, j as isize) {
                    for (a, b) in [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)] {
                        used[b * (nx + 1) + a] = true;
                    }
                }
            }
        }
        let mut grid_id = vec![usize::MAX; used.len()];
        let mut center_id = vec![usize::MAX; nx * ny];
        let mut coords = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                if used[j * (nx + 1) + i] {
                    grid_id[j * (nx + 1) + i] = coords.len();
                    coords.push([self.x(i), self.y(j)]);
                }
            }
            if centers && j < ny {
                for i in 0..nx {
                    if kept(i as isize, j as isize) {
                        center_id[j * nx + i] = coords.len();
                        coords.push([
                            0.5 * (self.x(i) + self.x(i + 1)),
                            0.5 * (self.y(j) + self.y(j + 1)),
                        ]);
                    }
                }
            }
        }

        let node = |i: usize, j: usize| grid_id[j * (nx + 1) + i];
        let mut elements = Vec::new();
        let mut edges = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if !kept(i as isize, j as isize) {
                    continue;
                }
                let (p00, p10, p11, p01) = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
                match cell {
                    Cell::Quad => elements.push(Element {
                        kind: ElementType::Quad4,
                        nodes: vec![p00, p10, p11, p01],
                    }),
                    Cell::Tri(pattern) => {
                        let tris: Vec<[usize; 3]> = match pattern {
                            TriPattern::RightDiagonal => vec![[p00, p10, p11], [p00, p11, p01]],
                            TriPattern::LeftDiagonal => vec![[p00, p10, p01], [p10, p11, p01]],
                            TriPattern::CrissCross => {
                                let c = center_id[j * nx + i];
                                vec![[p00, p10, c], [p10, p11, c], [p11, p01, c], [p01, p00, c]]
                            }
                        };
                        elements.extend(tris.into_iter().map(|t| Element {
                            kind: ElementType::Tri3,
                            nodes: t.to_vec(),
                        }));
                    }
                }
                let (ii, jj) = (i as isize, j as isize);
                let sides = [
                    (Side::Bottom, kept(ii, jj - 1), j == 0, [p00, p10]),
                    (Side::Right, kept(ii + 1, jj), i + 1 == nx, [p10, p11]),
                    (Side::Top, kept(ii, jj + 1), j + 1 == ny, [p11, p01]),
                    (Side::Left, kept(ii - 1, jj), i == 0, [p01, p00]),
                ];
                for (side, neighbour, outer, nodes) in sides {
                    if !neighbour {
                        edges.push(BoundaryEdge {
                            nodes,
                            tag: tag(side, outer),
                        });
                    }
                }
            }
        }

        let mut node_tags: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        for e in &edges {
            node_tags.entry(e.tag.clone()).or_default().extend(e.nodes);
        }
        Mesh::new(2, coords, elements, edges, node_tags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_nodes() {
        let m = generate_interval_mesh(5, 1.0).unwrap();
        assert_eq!(m.n_nodes(), 6);
        for (i, p) in m.coords().iter().enumerate() {
            assert!((p[0] - 0.2 * i as f64).abs() < 1e-15);
        }
        assert_eq!(boundary_nodes(&m, "right").unwrap(), vec![5]);
        assert_eq!(boundary_nodes(&m, "left").unwrap(), vec![0]);

        let m = generate_interval_mesh(1, 2.0).unwrap();
        assert_eq!(m.coords(), &[[0.0, 0.0], [2.0, 0.0]]);

        let m = generate_interval_mesh(10, 1.0).unwrap();
        for e in 0..10 {
            assert!((fem::element_measure(&m, e).unwrap() - 0.1).abs() < 1e-15);
        }
        assert!((m.measure() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interval_rejects_zero_elements() {
        assert!(matches!(generate_interval_mesh(0, 1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn quad_mesh_counts() {
        let m = generate_structured_quad_mesh(51, 51, Rect::UNIT).unwrap();
        assert_eq!(m.n_elements(), 2500);
        assert_eq!(m.n_nodes(), 2601);

        let m = generate_structured_quad_mesh(2, 2, Rect::UNIT).unwrap();
        assert_eq!((m.n_elements(), m.n_nodes()), (1, 4));

        let m = generate_structured_quad_mesh(3, 2, Rect::new(0.0, 2.0, 0.0, 1.0)).unwrap();
        assert_eq!(m.n_elements(), 2);
        for e in 0..2 {
            assert!((fem::element_measure(&m, e).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn quad_mesh_bottom_tag() {
        let m = generate_structured_quad_mesh(3, 3, Rect::UNIT).unwrap();
        let bottom = boundary_nodes(&m, "bottom").unwrap();
        assert_eq!(bottom.len(), 3);
        assert!(bottom.iter().all(|&i| m.coords()[i][1] == 0.0));
    }

    #[test]
    fn degenerate_rectangle_rejected() {
        let r = Rect::new(0.0, 0.0, 0.0, 1.0);
        assert!(generate_structured_quad_mesh(3, 3, r).is_err());
        assert!(generate_structured_quad_mesh(1, 3, Rect::UNIT).is_err());
    }

    #[test]
    fn tri_mesh_counts() {
        let m = generate_structured_tri_mesh(21, 21, Rect::UNIT, TriPattern::RightDiagonal).unwrap();
        assert_eq!(m.n_elements(), 20 * 20 * 2);

        let m = generate_structured_tri_mesh(2, 2, Rect::UNIT, TriPattern::RightDiagonal).unwrap();
        assert_eq!(m.n_elements(), 2);
        assert!((m.measure() - 1.0).abs() < 1e-15);

        let m = generate_structured_tri_mesh(2, 2, Rect::UNIT, TriPattern::CrissCross).unwrap();
        assert_eq!((m.n_elements(), m.n_nodes()), (4, 5));
    }

    #[test]
    fn crisscross_keeps_lexicographic_order() {
        let m = generate_structured_tri_mesh(4, 3, Rect::UNIT, TriPattern::CrissCross).unwrap();
        assert_eq!(m.n_nodes(), 12 + 6);
        let c = m.coords();
        for w in c.windows(2) {
            assert!((w[0][1], w[0][0]) < (w[1][1], w[1][0]));
        }
    }

    /// Counts the cells of a `seed x seed` grid whose centers fall inside the hole.
    fn hole_cells_oracle(seed: usize) -> usize {
        let h = 1.0 / (seed - 1) as f64;
        let mut count = 0;
        for j in 0..seed - 1 {
            for i in 0..seed - 1 {
                let (cx, cy) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                if (0.45..=0.55).contains(&cx) && (0.45..=0.55).contains(&cy) {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn plate_with_hole_cells() {
        assert_eq!(hole_cells_oracle(21), 4);
        let m = generate_plate_with_hole_mesh(21, ElementType::Quad4, TriPattern::default()).unwrap();
        assert_eq!(m.n_elements(), 400 - 4);
        assert!((m.measure() - 0.99).abs() < 1e-12);

        let m = generate_plate_with_hole_mesh(41, ElementType::Quad4, TriPattern::default()).unwrap();
        assert_eq!(m.n_elements(), 1600 - hole_cells_oracle(41));
        // No element may overlap the open hole.
        for el in m.elements() {
            let cx = el.nodes.iter().map(|&n| m.coords()[n][0]).sum::<f64>() / 4.0;
            let cy = el.nodes.iter().map(|&n| m.coords()[n][1]).sum::<f64>() / 4.0;
            assert!(!((0.45..0.55).contains(&cx) && (0.45..0.55).contains(&cy)));
        }

        let m = generate_plate_with_hole_mesh(21, ElementType::Tri3, TriPattern::RightDiagonal).unwrap();
        assert_eq!(m.n_elements(), 792);
    }

    #[test]
    fn plate_with_hole_tags() {
        let m = generate_plate_with_hole_mesh(21, ElementType::Quad4, TriPattern::default()).unwrap();
        // Oracle: nodes lying on the hole perimeter of a 0.05-spaced grid.
        let h = 0.05;
        let on_perimeter = |p: &Point| {
            let inside = |v: f64| v > 0.45 - 1e-12 && v < 0.55 + 1e-12;
            let on = |v: f64| (v - 0.45).abs() < 1e-12 || (v - 0.55).abs() < 1e-12;
            inside(p[0]) && inside(p[1]) && (on(p[0]) || on(p[1]))
        };
        let expected: Vec<usize> = (0..m.n_nodes()).filter(|&i| on_perimeter(&m.coords()[i])).collect();
        let hole = boundary_nodes(&m, "hole").unwrap();
        assert_eq!(hole, expected);
        assert_eq!(hole.len(), 4 * ((0.55 - 0.45_f64) / h).round() as usize);
        assert_eq!(m.n_nodes(), 441 - 1);
        assert_eq!(boundary_nodes(&m, "outer").unwrap().len(), 80);
        assert!(generate_plate_with_hole_mesh(25, ElementType::Quad4, TriPattern::default()).is_err());
    }

    #[test]
    fn unknown_tag_is_not_found() {
        let m = generate_interval_mesh(2, 1.0).unwrap();
        assert!(matches!(boundary_nodes(&m, "top"), Err(Error::NotFound(_))));
    }

    #[test]
    fn inverted_element_rejected() {
        let coords = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let el = Element {
            kind: ElementType::Tri3,
            nodes: vec![0, 2, 1],
        };
        let r = Mesh::new(2, coords, vec![el], vec![], BTreeMap::new());
        assert!(matches!(r, Err(Error::DegenerateElement { .. })));
    }
}
