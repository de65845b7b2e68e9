//! CSV histories, VTK snapshots and rate tables.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::{ElementType, Mesh};
use crate::timestepping::{StepRecord, TimeHistory};

pub const HISTORY_HEADER: &str = "step,time,min_c,max_c,n_below,n_above,qp_iters,wall_ms";

fn row(out: &mut String, r: &StepRecord) {
    let _ = writeln!(
        out,
        "{},{:.16e},{:.16e},{:.16e},{},{},{},{:.16e}",
        r.step, r.t, r.min_c, r.max_c, r.n_below, r.n_above, r.qp_iterations, r.wall_ms
    );
}

/// One row per step. Floats carry 17 significant digits.
pub fn write_history_csv(history: &TimeHistory) -> Result<String> {
    if history.records.is_empty() {
        return Err(Error::invalid("history has no steps"));
    }
    let mut out = String::with_capacity(96 * (history.records.len() + 1));
    out.push_str(HISTORY_HEADER);
    out.push('\n');
    for r in &history.records {
        row(&mut out, r);
    }
    Ok(out)
}

/// Histories of several schemes in one table, prefixed with a `scheme` column.
pub fn write_joint_csv(runs: &[(&str, &TimeHistory)]) -> Result<String> {
    if runs.is_empty() || runs.iter().any(|(_, h)| h.records.is_empty()) {
        return Err(Error::invalid("joint history needs at least one non-empty run"));
    }
    let mut out = format!("scheme,{HISTORY_HEADER}\n");
    for (label, h) in runs {
        for r in &h.records {
            out.push_str(label);
            out.push(',');
            row(&mut out, r);
        }
    }
    Ok(out)
}

fn vtk_cell_type(kind: ElementType) -> u8 {
    match kind {
        ElementType::Line2 => 3,
        ElementType::Tri3 => 5,
        ElementType::Quad4 => 9,
    }
}

/// Legacy ASCII VTK unstructured grid with one point scalar.
pub fn write_vtk_snapshot(mesh: &Mesh, c: &[f64], field_name: &str) -> Result<String> {
    if c.len() != mesh.n_nodes() {
        return Err(Error::invalid(format!(
            "field has {} values, mesh has {} nodes",
            c.len(),
            mesh.n_nodes()
        )));
    }
    if field_name.is_empty() || field_name.chars().any(char::is_whitespace) {
        return Err(Error::invalid(format!("field name {field_name:?} must be non-empty without whitespace")));
    }
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(out, "{field_name}");
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.n_nodes());
    for p in mesh.coords() {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], 0.0);
    }
    let size: usize = mesh.elements().iter().map(|e| e.nodes.len() + 1).sum();
    let _ = writeln!(out, "CELLS {} {}", mesh.n_elements(), size);
    for e in mesh.elements() {
        out.push_str(&e.nodes.len().to_string());
        for n in &e.nodes {
            let _ = write!(out, " {n}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.n_elements());
    for e in mesh.elements() {
        let _ = writeln!(out, "{}", vtk_cell_type(e.kind));
    }
    let _ = writeln!(out, "POINT_DATA {}", mesh.n_nodes());
    let _ = writeln!(out, "SCALARS {field_name} double 1");
    out.push_str("LOOKUP_TABLE default\n");
    for v in c {
        let _ = writeln!(out, "{v:.16e}");
    }
    Ok(out)
}

/// One level of a convergence study.
#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub scheme: String,
    pub level: usize,
    pub h: f64,
    pub dt: f64,
    pub l2: f64,
    pub h1_semi: f64,
    /// Rates against the previous level; `None` on the coarsest.
    pub l2_rate: Option<f64>,
    pub h1_rate: Option<f64>,
}

/// Whitespace-aligned table of errors and observed rates.
pub fn write_rate_table(rows: &[RateRow]) -> String {
    let mut out = format!(
        "{:<16} {:>6} {:>12} {:>12} {:>14} {:>14} {:>8} {:>8}\n",
        "scheme", "level", "h", "dt", "l2", "h1_semi", "l2_rate", "h1_rate"
    );
    let rate = |r: Option<f64>| r.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    for r in rows {
        let _ = writeln!(
            out,
            "{:<16} {:>6} {:>12.4e} {:>12.4e} {:>14.6e} {:>14.6e} {:>8} {:>8}",
            r.scheme,
            r.level,
            r.h,
            r.dt,
            r.l2,
            r.h1_semi,
            rate(r.l2_rate),
            rate(r.h1_rate)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_interval_mesh, generate_structured_quad_mesh, Rect};
    use crate::problem::ProblemSpec;
    use crate::timestepping::{run_until, Scheme, SchemeConfig};

    fn one_step() -> TimeHistory {
        let m = generate_interval_mesh(5, 1.0).unwrap();
        let p = ProblemSpec::uniform_1d();
        run_until(&m, &p, SchemeConfig::new(Scheme::Proposed { gamma: 1.0 }, 1e-3), 1e-3, &[]).unwrap()
    }

    #[test]
    fn single_step_two_lines() {
        let csv = write_history_csv(&one_step()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], HISTORY_HEADER);
        assert!(!csv.contains('\r'));
        let cols: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cols.len(), 8);
        assert_eq!(cols[1].parse::<f64>().unwrap(), 1e-3);
        // 17 significant digits: one before the point, sixteen after.
        assert_eq!(cols[1].split('e').next().unwrap().len(), 18);
    }

    #[test]
    fn constrained_min_column() {
        let m = generate_interval_mesh(10, 1.0).unwrap();
        let p = ProblemSpec::slab_1d(0.4, 0.6).unwrap();
        let h = run_until(&m, &p, SchemeConfig::new(Scheme::Proposed { gamma: 1.0 }, 1e-3), 0.02, &[]).unwrap();
        let csv = write_history_csv(&h).unwrap();
        for line in csv.lines().skip(1) {
            let min: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
            assert!(min >= -1e-9);
        }
    }

    #[test]
    fn empty_history_rejected() {
        let mut h = one_step();
        h.records.clear();
        assert!(write_history_csv(&h).is_err());
    }

    #[test]
    fn joint_csv_prefixes_label() {
        let h = one_step();
        let csv = write_joint_csv(&[("a", &h), ("b", &h)]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("a,1,"));
        assert!(lines[2].starts_with("b,1,"));
    }

    #[test]
    fn vtk_single_quad() {
        let m = generate_structured_quad_mesh(2, 2, Rect::UNIT).unwrap();
        let vtk = write_vtk_snapshot(&m, &[0.0, 1.0, 2.0, 3.0], "c").unwrap();
        assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(vtk.contains("POINTS 4 double\n"));
        assert!(vtk.contains("CELLS 1 5\n"));
        assert!(vtk.contains("CELL_TYPES 1\n9\n"));
        assert!(vtk.contains("SCALARS c double 1\n"));
        assert!(write_vtk_snapshot(&m, &[0.0; 3], "c").is_err());
        assert!(write_vtk_snapshot(&m, &[0.0; 4], "two words").is_err());
    }

    #[test]
    fn vtk_point_count_matches() {
        let m = generate_interval_mesh(7, 2.0).unwrap();
        let vtk = write_vtk_snapshot(&m, &[0.5; 8], "conc").unwrap();
        assert!(vtk.contains("POINTS 8 double"));
        assert!(vtk.contains("CELL_TYPES 7\n3\n"));
        let scalars = vtk.split("LOOKUP_TABLE default\n").nth(1).unwrap();
        assert_eq!(scalars.lines().count(), 8);
    }

    #[test]
    fn rate_table_layout() {
        let rows = vec![
            RateRow { scheme: "p".into(), level: 10, h: 0.1, dt: 1e-3, l2: 1e-2, h1_semi: 1e-1, l2_rate: None, h1_rate: None },
            RateRow { scheme: "p".into(), level: 20, h: 0.05, dt: 2.5e-4, l2: 2.5e-3, h1_semi: 5e-2, l2_rate: Some(2.0), h1_rate: Some(1.0) },
        ];
        let t = write_rate_table(&rows);
        assert_eq!(t.lines().count(), 3);
        assert!(t.lines().nth(2).unwrap().contains("2.0000"));
    }
}
