//! Gmsh MSH 2.2 ASCII reader and writer.
//!
//! Physical group names become tags. Lower-dimensional elements (lines in a
//! 2D mesh, points in a 1D mesh) only contribute tags.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use super::{BoundaryEdge, Element, ElementType, Mesh, Point};
use crate::error::{Error, Result};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            if !l.is_empty() {
                self.last = i + 1;
                return Some((i + 1, l));
            }
        }
        None
    }

    fn expect_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let last = self.last;
        self.next_line()
            .ok_or_else(|| Error::parse(last + 1, format!("unexpected end of file, expected {what}")))
    }

    fn expect_end(&mut self, section: &str) -> Result<()> {
        let (line, l) = self.expect_line(&format!("$End{section}"))?;
        if l != format!("$End{section}") {
            return Err(Error::parse(line, format!("expected $End{section}, found {l:?}")));
        }
        Ok(())
    }

    fn skip_section(&mut self, section: &str) -> Result<()> {
        let end = format!("$End{section}");
        loop {
            let (_, l) = self.expect_line(&end)?;
            if l == end {
                return Ok(());
            }
        }
    }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} {tok:?}")))
}

struct RawElement {
    code: u32,
    physical: Option<i64>,
    nodes: Vec<usize>,
}

/// Parses an MSH 2.2 ASCII file.
pub fn read_gmsh(text: &str) -> Result<Mesh> {
    let mut lines = Lines::new(text);
    let mut names: HashMap<i64, String> = HashMap::new();
    let mut coords: Vec<Point> = Vec::new();
    let mut node_index: HashMap<u64, usize> = HashMap::new();
    let mut raw: Vec<RawElement> = Vec::new();
    let mut seen_nodes = false;
    let mut seen_elements = false;

    while let Some((line, header)) = lines.next_line() {
        match header {
            "$MeshFormat" => {
                let (l, fmt) = lines.expect_line("format line")?;
                let mut it = fmt.split_whitespace();
                let version: f64 = num(it.next(), l, "version")?;
                let file_type: u32 = num(it.next(), l, "file type")?;
                if !(2.0..3.0).contains(&version) {
                    return Err(Error::parse(l, format!("unsupported MSH version {version}")));
                }
                if file_type != 0 {
                    return Err(Error::parse(l, "binary MSH files are not supported"));
                }
                lines.expect_end("MeshFormat")?;
            }
            "$PhysicalNames" => {
                let (l, count) = lines.expect_line("physical name count")?;
                let n: usize = num(Some(count), l, "physical name count")?;
                for _ in 0..n {
                    let (l, entry) = lines.expect_line("physical name")?;
                    let mut it = entry.splitn(3, char::is_whitespace);
                    let _dim: u32 = num(it.next(), l, "physical dimension")?;
                    let tag: i64 = num(it.next(), l, "physical tag")?;
                    let name = it
                        .next()
                        .map(|s| s.trim().trim_matches('"').to_string())
                        .filter(|s| !s.is_empty())
                        .ok_or_else(|| Error::parse(l, "missing physical name"))?;
                    names.insert(tag, name);
                }
                lines.expect_end("PhysicalNames")?;
            }
            "$Nodes" => {
                let (l, count) = lines.expect_line("node count")?;
                let n: usize = num(Some(count), l, "node count")?;
                coords.reserve(n);
                for _ in 0..n {
                    let (l, entry) = lines.expect_line("node")?;
                    let mut it = entry.split_whitespace();
                    let id: u64 = num(it.next(), l, "node id")?;
                    let x: f64 = num(it.next(), l, "x coordinate")?;
                    let y: f64 = num(it.next(), l, "y coordinate")?;
                    let _z: f64 = num(it.next(), l, "z coordinate")?;
                    if node_index.insert(id, coords.len()).is_some() {
                        return Err(Error::parse(l, format!("duplicate node id {id}")));
                    }
                    coords.push([x, y]);
                }
                lines.expect_end("Nodes")?;
                seen_nodes = true;
            }
            "$Elements" => {
                let (l, count) = lines.expect_line("element count")?;
                let n: usize = num(Some(count), l, "element count")?;
                for _ in 0..n {
                    let (l, entry) = lines.expect_line("element")?;
                    let mut it = entry.split_whitespace();
                    let _id: u64 = num(it.next(), l, "element id")?;
                    let code: u32 = num(it.next(), l, "element type")?;
                    let n_nodes = match code {
                        1 => 2,
                        2 => 3,
                        3 => 4,
                        15 => 1,
                        _ => return Err(Error::UnsupportedElement { code, line: l }),
                    };
                    let n_tags: usize = num(it.next(), l, "tag count")?;
                    let mut tags = Vec::with_capacity(n_tags);
                    for _ in 0..n_tags {
                        tags.push(num::<i64>(it.next(), l, "element tag")?);
                    }
                    let mut nodes = Vec::with_capacity(n_nodes);
                    for _ in 0..n_nodes {
                        let id: u64 = num(it.next(), l, "element node")?;
                        let idx = *node_index
                            .get(&id)
                            .ok_or_else(|| Error::parse(l, format!("unknown node id {id}")))?;
                        nodes.push(idx);
                    }
                    if it.next().is_some() {
                        return Err(Error::parse(l, "trailing tokens in element record"));
                    }
                    raw.push(RawElement {
                        code,
                        physical: tags.first().copied(),
                        nodes,
                    });
                }
                lines.expect_end("Elements")?;
                seen_elements = true;
            }
            s if s.starts_with('$') && !s.starts_with("$End") => {
                lines.skip_section(&s[1..])?;
            }
            other => return Err(Error::parse(line, format!("unexpected content {other:?}"))),
        }
    }
    if !seen_nodes {
        return Err(Error::parse(lines.last, "missing $Nodes section"));
    }
    if !seen_elements {
        return Err(Error::parse(lines.last, "missing $Elements section"));
    }
    assemble(coords, raw, &names)
}

fn assemble(coords: Vec<Point>, raw: Vec<RawElement>, names: &HashMap<i64, String>) -> Result<Mesh> {
    let dim = if raw.iter().any(|r| r.code == 2 || r.code == 3) {
        2
    } else if raw.iter().any(|r| r.code == 1) {
        1
    } else {
        return Err(Error::parse(0, "mesh contains no line, triangle or quadrilateral elements"));
    };
    let tag_name = |p: Option<i64>| -> Option<String> {
        p.filter(|&t| t != 0)
            .map(|t| names.get(&t).cloned().unwrap_or_else(|| t.to_string()))
    };

    let mut elements = Vec::new();
    let mut edges = Vec::new();
    let mut node_tags: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for r in raw {
        let kind = match r.code {
            1 => ElementType::Line2,
            2 => ElementType::Tri3,
            3 => ElementType::Quad4,
            _ => {
                if let Some(name) = tag_name(r.physical) {
                    node_tags.entry(name).or_default().extend(&r.nodes);
                }
                continue;
            }
        };
        if kind.dim() == dim {
            let mut nodes = r.nodes;
            if dim == 2 && signed_area(&coords, &nodes) < 0.0 {
                nodes.reverse();
            }
            if dim == 1 && coords[nodes[1]][0] < coords[nodes[0]][0] {
                nodes.reverse();
            }
            elements.push(Element { kind, nodes });
        } else if let Some(name) = tag_name(r.physical) {
            node_tags.entry(name.clone()).or_default().extend(&r.nodes);
            edges.push(BoundaryEdge {
                nodes: [r.nodes[0], r.nodes[1]],
                tag: name,
            });
        }
    }
    Mesh::new(dim, coords, elements, edges, node_tags)
}

fn signed_area(coords: &[Point], nodes: &[usize]) -> f64 {
    let n = nodes.len();
    (0..n)
        .map(|k| {
            let a = coords[nodes[k]];
            let b = coords[nodes[(k + 1) % n]];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Serializes a mesh as MSH 2.2 ASCII.
///
/// Boundary edges become line elements (points in 1D) in physical groups
/// named after their tags; domain elements go in a group named `"domain"`.
pub fn write_gmsh(mesh: &Mesh) -> String {
    let dim = mesh.dim();
    let mut groups: Vec<String> = Vec::new();
    let group_id = |name: &str, groups: &mut Vec<String>| -> usize {
        match groups.iter().position(|g| g == name) {
            Some(i) => i + 1,
            None => {
                groups.push(name.to_string());
                groups.len()
            }
        }
    };

    let mut records: Vec<(u32, usize, Vec<usize>)> = Vec::new();
    if dim == 1 {
        for (tag, set) in mesh.node_tags() {
            let g = group_id(tag, &mut groups);
            records.extend(set.iter().map(|&n| (15, g, vec![n])));
        }
    } else {
        for e in mesh.boundary_edges() {
            let g = group_id(&e.tag, &mut groups);
            records.push((1, g, e.nodes.to_vec()));
        }
    }
    let boundary_groups = groups.len();
    let domain = group_id("domain", &mut groups);
    for el in mesh.elements() {
        let code = match el.kind {
            ElementType::Line2 => 1,
            ElementType::Tri3 => 2,
            ElementType::Quad4 => 3,
        };
        records.push((code, domain, el.nodes.clone()));
    }

    let mut out = String::new();
    out.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    let _ = writeln!(out, "$PhysicalNames\n{}", groups.len());
    for (i, g) in groups.iter().enumerate() {
        let gdim = if i < boundary_groups { dim - 1 } else { dim };
        let _ = writeln!(out, "{gdim} {} \"{g}\"", i + 1);
    }
    out.push_str("$EndPhysicalNames\n");
    let _ = writeln!(out, "$Nodes\n{}", mesh.n_nodes());
    for (i, p) in mesh.coords().iter().enumerate() {
        let _ = writeln!(out, "{} {:?} {:?} 0", i + 1, p[0], p[1]);
    }
    out.push_str("$EndNodes\n");
    let _ = writeln!(out, "$Elements\n{}", records.len());
    for (i, (code, g, nodes)) in records.iter().enumerate() {
        let _ = write!(out, "{} {code} 2 {g} {g}", i + 1);
        for n in nodes {
            let _ = write!(out, " {}", n + 1);
        }
        out.push('\n');
    }
    out.push_str("$EndElements\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem;
    use crate::mesh::{
        generate_interval_mesh, generate_plate_with_hole_mesh, generate_structured_quad_mesh,
        generate_structured_tri_mesh, Rect, TriPattern,
    };

    const ONE_QUAD: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n$EndNodes\n$Elements\n1\n1 3 2 0 1 1 2 3 4\n$EndElements\n";

    #[test]
    fn minimal_quad() {
        let m = read_gmsh(ONE_QUAD).unwrap();
        assert_eq!(m.n_elements(), 1);
        assert_eq!(m.elements()[0].kind, ElementType::Quad4);
        assert_eq!(m.elements()[0].nodes, vec![0, 1, 2, 3]);
    }

    #[test]
    fn tet_is_unsupported() {
        let text = ONE_QUAD.replace("1 3 2 0 1 1 2 3 4", "1 4 2 0 1 1 2 3 4");
        match read_gmsh(&text) {
            Err(Error::UnsupportedElement { code: 4, line }) => assert_eq!(line, 13),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_reports_line() {
        let text = ONE_QUAD.replace("3 1 1 0", "3 1 x 0");
        match read_gmsh(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
        let text = ONE_QUAD.replace("$EndNodes\n", "");
        assert!(matches!(read_gmsh(&text), Err(Error::Parse { .. })));
        assert!(matches!(read_gmsh("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn clockwise_elements_are_reoriented() {
        let text = ONE_QUAD.replace("1 3 2 0 1 1 2 3 4", "1 3 2 0 1 4 3 2 1");
        let m = read_gmsh(&text).unwrap();
        assert!(fem::element_measure(&m, 0).unwrap() > 0.0);
    }

    #[test]
    fn outer_tag_matches_generator() {
        // Hand-written 3x3 grid with the whole boundary in physical line "outer".
        let mut text = String::from("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$PhysicalNames\n2\n1 7 \"outer\"\n2 8 \"plate\"\n$EndPhysicalNames\n$Nodes\n9\n");
        for j in 0..3 {
            for i in 0..3 {
                text += &format!("{} {} {} 0\n", j * 3 + i + 1, i as f64 * 0.5, j as f64 * 0.5);
            }
        }
        text += "$EndNodes\n$Elements\n12\n";
        let ring = [1, 2, 3, 6, 9, 8, 7, 4, 1];
        for (k, w) in ring.windows(2).enumerate() {
            text += &format!("{} 1 2 7 1 {} {}\n", k + 1, w[0], w[1]);
        }
        text += "9 3 2 8 1 1 2 5 4\n10 3 2 8 1 2 3 6 5\n11 3 2 8 1 4 5 8 7\n12 3 2 8 1 5 6 9 8\n$EndElements\n";
        let m = read_gmsh(&text).unwrap();

        let g = generate_structured_quad_mesh(3, 3, Rect::UNIT).unwrap();
        let mut expected = BTreeSet::new();
        for t in ["left", "right", "bottom", "top"] {
            expected.extend(g.node_tags()[t].iter().copied());
        }
        assert_eq!(m.node_tags()["outer"], expected);
        assert_eq!(m.coords(), g.coords());
    }

    fn assert_roundtrip(m: &Mesh) {
        let back = read_gmsh(&write_gmsh(m)).unwrap();
        assert_eq!(back.coords(), m.coords());
        assert_eq!(back.elements(), m.elements());
        assert_eq!(back.node_tags(), m.node_tags());
        assert_eq!(back.boundary_edges(), m.boundary_edges());
    }

    #[test]
    fn roundtrip_generated() {
        assert_roundtrip(&generate_interval_mesh(7, 1.3).unwrap());
        assert_roundtrip(&generate_structured_quad_mesh(5, 4, Rect::new(0.1, 0.7, -1.0, 2.0)).unwrap());
        for p in [TriPattern::RightDiagonal, TriPattern::LeftDiagonal, TriPattern::CrissCross] {
            assert_roundtrip(&generate_structured_tri_mesh(6, 7, Rect::UNIT, p).unwrap());
        }
        assert_roundtrip(&generate_plate_with_hole_mesh(21, ElementType::Quad4, TriPattern::default()).unwrap());
    }
}
