//! Batch orchestration behind the command-line subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{RunSpec, SchemeEntry};
use crate::diagnostics::{convergence_rates, error_norms};
use crate::error::{Error, Result};
use crate::mesh::{write_gmsh, Mesh};
use crate::output::{write_history_csv, write_joint_csv, write_rate_table, write_vtk_snapshot, RateRow};
use crate::timestepping::{run_transient, run_until, TimeHistory};

/// Outcome of one scheme run.
#[derive(Clone, Debug)]
pub struct SchemeSummary {
    pub label: String,
    pub steps: usize,
    pub min_c: f64,
    pub max_c: f64,
    pub violations: usize,
    pub steps_with_violations: usize,
    pub flags: Vec<String>,
}

impl SchemeSummary {
    fn new(label: &str, h: &TimeHistory) -> Self {
        SchemeSummary {
            label: label.to_string(),
            steps: h.records.len(),
            min_c: h.min_over_steps(),
            max_c: h.max_over_steps(),
            violations: h.total_violations(),
            steps_with_violations: h.records.iter().filter(|r| r.n_below + r.n_above > 0).count(),
            flags: h.flags.clone(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} steps={} min_c={:.6e} max_c={:.6e} violations={} steps_with_violations={}",
            self.label, self.steps, self.min_c, self.max_c, self.violations, self.steps_with_violations
        )
    }
}

/// Files written by a subcommand plus a human-readable report.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub text: String,
}

impl Report {
    fn write(&mut self, dir: &Path, name: &str, contents: &str) -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }
}

fn prepare(spec: &RunSpec) -> Result<Mesh> {
    let problem = spec.problem()?;
    let mesh = spec.mesh.build()?;
    problem.validate(&mesh)?;
    Ok(mesh)
}

fn solve(spec: &RunSpec, mesh: &Mesh, entry: &SchemeEntry) -> Result<TimeHistory> {
    let problem = spec.problem()?;
    let mut h = run_transient(mesh, problem, entry.config, &spec.output.snapshots)?;
    if !spec.output.timing {
        for r in &mut h.records {
            r.wall_ms = 0.0;
        }
    }
    Ok(h)
}

fn write_snapshots(report: &mut Report, dir: &Path, prefix: &str, mesh: &Mesh, h: &TimeHistory) -> Result<()> {
    for (i, s) in h.snapshots.iter().enumerate() {
        let vtk = write_vtk_snapshot(mesh, &s.c, "concentration")?;
        report.write(dir, &format!("{prefix}snapshot_{i:03}.vtk"), &vtk)?;
    }
    let vtk = write_vtk_snapshot(mesh, &h.final_state.c, "concentration")?;
    report.write(dir, &format!("{prefix}final.vtk"), &vtk)
}

/// Runs the single configured scheme.
pub fn run(spec: &RunSpec, out: &Path) -> Result<Report> {
    spec.require_schemes()?;
    if spec.schemes.len() != 1 {
        return Err(Error::Config(format!(
            "`run` takes exactly one [[schemes]] entry, found {}; use `compare`",
            spec.schemes.len()
        )));
    }
    let mesh = prepare(spec)?;
    let entry = &spec.schemes[0];
    let h = solve(spec, &mesh, entry)?;
    fs::create_dir_all(out)?;
    let mut report = Report::default();
    report.write(out, "history.csv", &write_history_csv(&h)?)?;
    if spec.output.vtk {
        write_snapshots(&mut report, out, "", &mesh, &h)?;
    }
    let s = SchemeSummary::new(&entry.label, &h);
    report.text = s.line() + "\n";
    for f in &s.flags {
        report.text.push_str(&format!("note: {f}\n"));
    }
    Ok(report)
}

/// Runs every scheme on the same mesh; returns the report and per-scheme summaries.
pub fn compare(spec: &RunSpec, out: &Path) -> Result<(Report, Vec<SchemeSummary>)> {
    spec.require_schemes()?;
    let mesh = prepare(spec)?;
    let mut histories = Vec::new();
    for entry in &spec.schemes {
        histories.push(solve(spec, &mesh, entry)?);
    }
    fs::create_dir_all(out)?;
    let mut report = Report::default();
    let runs: Vec<(&str, &TimeHistory)> = spec.schemes.iter().map(|e| e.label.as_str()).zip(&histories).collect();
    report.write(out, "history.csv", &write_joint_csv(&runs)?)?;
    let mut summaries = Vec::new();
    for (label, h) in &runs {
        report.write(out, &format!("{label}.csv"), &write_history_csv(h)?)?;
        if spec.output.vtk {
            write_snapshots(&mut report, out, &format!("{label}_"), &mesh, h)?;
        }
        summaries.push(SchemeSummary::new(label, h));
    }
    let text: String = summaries.iter().map(|s| s.line() + "\n").collect();
    report.write(out, "summary.txt", &text)?;
    report.text = text;
    Ok((report, summaries))
}

/// Runs each scheme on the mesh hierarchy with `dt = dt0 (h / h0)^2` and
/// tabulates errors at the evaluation time.
pub fn converge(spec: &RunSpec, out: &Path) -> Result<(Report, Vec<RateRow>)> {
    spec.require_schemes()?;
    let problem = spec.problem()?;
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::Config(format!("problem {:?} has no analytic solution", problem.name)))?;
    let c = &spec.convergence;
    if c.t_eval > problem.end_time {
        return Err(Error::Config(format!(
            "t_eval = {} exceeds the end time {}",
            c.t_eval, problem.end_time
        )));
    }
    let mut meshes = Vec::new();
    for &level in &c.levels {
        let mesh = spec.mesh.with_resolution(level)?.build()?;
        problem.validate(&mesh)?;
        meshes.push(mesh);
    }
    let hs: Vec<f64> = meshes.iter().map(Mesh::max_element_size).collect();
    let mut rows = Vec::new();
    for entry in &spec.schemes {
        let mut l2 = Vec::new();
        let mut h1 = Vec::new();
        let mut dts = Vec::new();
        for (mesh, &h) in meshes.iter().zip(&hs) {
            let dt = c.dt0 * (h / hs[0]).powi(2);
            let mut cfg = entry.config;
            cfg.dt = dt;
            cfg.projection = c.projection;
            let hist = run_until(mesh, problem, cfg, c.t_eval, &[])?;
            let e = error_norms(mesh, &hist.final_state.c, exact, hist.final_state.t, c.error_quad_order)?;
            l2.push(e.l2);
            h1.push(e.h1_semi);
            dts.push(dt);
        }
        let l2_rates = convergence_rates(&l2, &hs)?;
        let h1_rates = convergence_rates(&h1, &hs)?;
        for i in 0..c.levels.len() {
            rows.push(RateRow {
                scheme: entry.label.clone(),
                level: c.levels[i],
                h: hs[i],
                dt: dts[i],
                l2: l2[i],
                h1_semi: h1[i],
                l2_rate: i.checked_sub(1).map(|k| l2_rates[k]),
                h1_rate: i.checked_sub(1).map(|k| h1_rates[k]),
            });
        }
    }
    fs::create_dir_all(out)?;
    let mut report = Report::default();
    let table = write_rate_table(&rows);
    report.write(out, "rates.txt", &table)?;
    report.text = table;
    Ok((report, rows))
}

/// Writes the configured mesh as Gmsh and VTK, with the initial values as
/// the VTK field when a problem is given.
pub fn mesh_gen(spec: &RunSpec, out: &Path) -> Result<Report> {
    let mesh = spec.mesh.build()?;
    let field = match &spec.problem {
        Some(p) => {
            p.validate(&mesh)?;
            mesh.coords().iter().map(|&x| p.initial.eval(x, 0.0)).collect()
        }
        None => vec![0.0; mesh.n_nodes()],
    };
    fs::create_dir_all(out)?;
    let mut report = Report::default();
    report.write(out, "mesh.msh", &write_gmsh(&mesh))?;
    report.write(out, "mesh.vtk", &write_vtk_snapshot(&mesh, &field, "initial")?)?;
    report.text = format!(
        "nodes={} elements={} tags={}\n",
        mesh.n_nodes(),
        mesh.n_elements(),
        mesh.node_tags().keys().cloned().collect::<Vec<_>>().join(",")
    );
    Ok(report)
}
