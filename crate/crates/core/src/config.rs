//! TOML run configuration.
//!
//! ```toml
//! [problem]
//! name = "slab1d"
//!
//! [mesh]
//! n = 10
//!
//! [[schemes]]
//! type = "proposed"
//! dt = 1e-4
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::assembly::InitialProjection;
use crate::error::{Error, Result};
use crate::mesh::{
    generate_interval_mesh, generate_plate_with_hole_mesh, generate_structured_quad_mesh, generate_structured_tri_mesh,
    read_gmsh, ElementType, Mesh, Rect, TriPattern,
};
use crate::problem::{validate_ellipticity, Diffusivity, ProblemSpec};
use crate::qp::DEFAULT_TOL;
use crate::timestepping::{ConstraintMode, RateMethod, Scheme, SchemeConfig};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: Option<RawProblem>,
    mesh: Option<RawMesh>,
    #[serde(default)]
    schemes: Vec<RawScheme>,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    convergence: RawConvergence,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    name: String,
    end_time: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    k1: Option<f64>,
    k2: Option<f64>,
    theta: Option<f64>,
    eps: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    gmsh: Option<PathBuf>,
    n: Option<usize>,
    length: Option<f64>,
    xseed: Option<usize>,
    yseed: Option<usize>,
    seed: Option<usize>,
    element: Option<ElementName>,
    pattern: Option<PatternName>,
    domain: Option<[f64; 4]>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum ElementName {
    Tri3,
    Quad4,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum PatternName {
    Right,
    Left,
    CrissCross,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum SchemeName {
    Proposed,
    Weighted,
    SingleField,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    #[serde(rename = "type")]
    kind: SchemeName,
    dt: f64,
    gamma: Option<f64>,
    label: Option<String>,
    lumped: Option<bool>,
    constraint: Option<ConstraintName>,
    rates: Option<RateName>,
    quad_order: Option<usize>,
    projection: Option<ProjectionName>,
    qp_tol: Option<f64>,
    qp_max_iter: Option<usize>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum ConstraintName {
    MaxPrinciple,
    NonNegative,
    Unconstrained,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum RateName {
    Direct,
    Weighted,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum ProjectionName {
    Nodal,
    LumpedL2,
}

impl From<ProjectionName> for InitialProjection {
    fn from(p: ProjectionName) -> Self {
        match p {
            ProjectionName::Nodal => InitialProjection::Nodal,
            ProjectionName::LumpedL2 => InitialProjection::LumpedL2,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    #[serde(default)]
    snapshots: Vec<f64>,
    vtk: Option<bool>,
    timing: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConvergence {
    levels: Option<Vec<usize>>,
    dt0: Option<f64>,
    t_eval: Option<f64>,
    projection: Option<ProjectionName>,
    error_quad_order: Option<usize>,
}

/// How to obtain the mesh.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    Interval { n: usize, length: f64 },
    Structured { xseed: usize, yseed: usize, element: ElementType, pattern: TriPattern, domain: Rect },
    PlateWithHole { seed: usize, element: ElementType, pattern: TriPattern },
    Gmsh(PathBuf),
}

impl MeshSource {
    pub fn build(&self) -> Result<Mesh> {
        match self {
            MeshSource::Interval { n, length } => generate_interval_mesh(*n, *length),
            MeshSource::Structured { xseed, yseed, element: ElementType::Quad4, domain, .. } => {
                generate_structured_quad_mesh(*xseed, *yseed, *domain)
            }
            MeshSource::Structured { xseed, yseed, pattern, domain, .. } => {
                generate_structured_tri_mesh(*xseed, *yseed, *domain, *pattern)
            }
            MeshSource::PlateWithHole { seed, element, pattern } => generate_plate_with_hole_mesh(*seed, *element, *pattern),
            MeshSource::Gmsh(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::NotFound(format!("mesh file {}: {e}", path.display())))?;
                read_gmsh(&text)
            }
        }
    }

    /// The same generator at a different resolution: elements for an
    /// interval, nodes per side for a grid.
    pub fn with_resolution(&self, level: usize) -> Result<MeshSource> {
        match self {
            MeshSource::Interval { length, .. } => Ok(MeshSource::Interval { n: level, length: *length }),
            MeshSource::Structured { element, pattern, domain, .. } => Ok(MeshSource::Structured {
                xseed: level,
                yseed: level,
                element: *element,
                pattern: *pattern,
                domain: *domain,
            }),
            MeshSource::PlateWithHole { element, pattern, .. } => Ok(MeshSource::PlateWithHole {
                seed: level,
                element: *element,
                pattern: *pattern,
            }),
            MeshSource::Gmsh(_) => Err(Error::Config("convergence studies need a mesh generator, not a Gmsh file".into())),
        }
    }
}

/// One scheme entry with its display label.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeEntry {
    pub label: String,
    pub config: SchemeConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub snapshots: Vec<f64>,
    pub vtk: bool,
    pub timing: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceSpec {
    /// Interval elements (1D) or nodes per side (2D), coarsest first.
    pub levels: Vec<usize>,
    pub dt0: f64,
    pub t_eval: f64,
    pub projection: InitialProjection,
    pub error_quad_order: usize,
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub problem: Option<ProblemSpec>,
    pub mesh: MeshSource,
    pub schemes: Vec<SchemeEntry>,
    pub output: OutputSpec,
    pub convergence: ConvergenceSpec,
}

impl RunSpec {
    pub fn problem(&self) -> Result<&ProblemSpec> {
        self.problem
            .as_ref()
            .ok_or_else(|| Error::Config("missing [problem] section".into()))
    }

    pub fn require_schemes(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one [[schemes]] entry is required".into()));
        }
        Ok(())
    }
}

/// Parses and validates a configuration. Relative Gmsh paths resolve
/// against `base` when given.
pub fn parse_config(text: &str, base: Option<&Path>) -> Result<RunSpec> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let problem = raw.problem.as_ref().map(build_problem).transpose()?;
    let mesh_raw = raw.mesh.clone().ok_or_else(|| Error::Config("missing [mesh] section".into()))?;
    let mesh = build_mesh(&mesh_raw, problem.as_ref(), base)?;

    let mut schemes = Vec::new();
    for (i, s) in raw.schemes.iter().enumerate() {
        schemes.push(build_scheme(i, s, problem.as_ref())?);
    }
    let mut labels: Vec<&str> = schemes.iter().map(|s| s.label.as_str()).collect();
    labels.sort_unstable();
    if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!("duplicate scheme label {:?}", w[0])));
    }

    let end = problem.as_ref().map(|p| p.end_time);
    if let Some(end) = end {
        if let Some(bad) = raw.output.snapshots.iter().find(|&&s| !(0.0..=end).contains(&s)) {
            return Err(Error::Config(format!("snapshot time {bad} outside [0, {end}]")));
        }
    }
    let output = OutputSpec {
        dir: raw.output.dir.clone().unwrap_or_else(|| PathBuf::from("out")),
        snapshots: raw.output.snapshots.clone(),
        vtk: raw.output.vtk.unwrap_or(true),
        timing: raw.output.timing.unwrap_or(false),
    };

    let c = &raw.convergence;
    let default_levels = match mesh {
        MeshSource::Interval { .. } => vec![10, 20, 40, 80],
        MeshSource::PlateWithHole { .. } => vec![21, 41, 81],
        _ => vec![11, 21, 41],
    };
    let convergence = ConvergenceSpec {
        levels: c.levels.clone().unwrap_or(default_levels),
        dt0: c.dt0.unwrap_or(1e-3),
        t_eval: c.t_eval.unwrap_or(0.01),
        projection: c.projection.map(Into::into).unwrap_or(InitialProjection::LumpedL2),
        error_quad_order: c.error_quad_order.unwrap_or(3),
    };
    if convergence.levels.len() < 2 || convergence.levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("[convergence] levels must be at least two strictly increasing values".into()));
    }
    if !(convergence.dt0 > 0.0) || !(convergence.t_eval > 0.0) {
        return Err(Error::Config("[convergence] dt0 and t_eval must be positive".into()));
    }
    if !(1..=3).contains(&convergence.error_quad_order) {
        return Err(Error::Config("[convergence] error_quad_order must be 1, 2 or 3".into()));
    }

    Ok(RunSpec {
        problem,
        mesh,
        schemes,
        output,
        convergence,
    })
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<RunSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, path.parent())
}

fn build_problem(p: &RawProblem) -> Result<ProblemSpec> {
    let allowed: &[&str] = match p.name.as_str() {
        "uniform1d" => &[],
        "slab1d" | "slab2d" => &["a", "b"],
        "plate_hole" => &["k1", "k2", "theta"],
        "hetero" => &["eps"],
        other => {
            return Err(Error::Config(format!(
                "unknown problem {other:?}; expected uniform1d, slab1d, slab2d, plate_hole or hetero"
            )))
        }
    };
    let given = [
        ("a", p.a.is_some()),
        ("b", p.b.is_some()),
        ("k1", p.k1.is_some()),
        ("k2", p.k2.is_some()),
        ("theta", p.theta.is_some()),
        ("eps", p.eps.is_some()),
    ];
    if let Some((key, _)) = given.iter().find(|(k, set)| *set && !allowed.contains(k)) {
        return Err(Error::Config(format!("key `{key}` does not apply to problem {:?}", p.name)));
    }
    let cfg = |e: Error| Error::Config(e.to_string());
    let mut spec = match p.name.as_str() {
        "uniform1d" => ProblemSpec::uniform_1d(),
        "slab1d" => ProblemSpec::slab_1d(p.a.unwrap_or(0.4), p.b.unwrap_or(0.6)).map_err(cfg)?,
        "slab2d" => ProblemSpec::slab_2d(p.a.unwrap_or(0.4), p.b.unwrap_or(0.6)).map_err(cfg)?,
        "plate_hole" => {
            let d = ProblemSpec::plate_hole_default();
            match d.diffusivity {
                Diffusivity::RotatedAnisotropic { k1, k2, theta } => ProblemSpec::plate_hole(
                    p.k1.unwrap_or(k1),
                    p.k2.unwrap_or(k2),
                    p.theta.unwrap_or(theta),
                ),
                _ => d,
            }
        }
        _ => ProblemSpec::hetero(p.eps.unwrap_or(1e-3)),
    };
    let grid: Vec<[f64; 2]> = (1..20)
        .flat_map(|i| (1..20).map(move |j| [i as f64 / 20.0, j as f64 / 20.0]))
        .collect();
    validate_ellipticity(&spec.diffusivity, &grid).map_err(cfg)?;
    if let Some(t) = p.end_time {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Config(format!("end_time must be positive, got {t}")));
        }
        spec.end_time = t;
    }
    Ok(spec)
}

fn build_mesh(m: &RawMesh, problem: Option<&ProblemSpec>, base: Option<&Path>) -> Result<MeshSource> {
    let generator_keys = [
        ("n", m.n.is_some()),
        ("length", m.length.is_some()),
        ("xseed", m.xseed.is_some()),
        ("yseed", m.yseed.is_some()),
        ("seed", m.seed.is_some()),
        ("element", m.element.is_some()),
        ("pattern", m.pattern.is_some()),
        ("domain", m.domain.is_some()),
    ];
    let given: Vec<&str> = generator_keys.iter().filter(|(_, s)| *s).map(|(k, _)| *k).collect();
    if let Some(path) = &m.gmsh {
        if !given.is_empty() {
            return Err(Error::Config(format!(
                "ambiguous mesh source: `gmsh` given together with generator keys {given:?}"
            )));
        }
        let path = match base {
            Some(b) if path.is_relative() => b.join(path),
            _ => path.clone(),
        };
        return Ok(MeshSource::Gmsh(path));
    }
    let only = |keys: &[&str], what: &str| -> Result<()> {
        match given.iter().find(|k| !keys.contains(k)) {
            Some(k) => Err(Error::Config(format!("key `{k}` does not apply to a {what} mesh"))),
            None => Ok(()),
        }
    };
    let element = match m.element {
        Some(ElementName::Tri3) => ElementType::Tri3,
        Some(ElementName::Quad4) | None => ElementType::Quad4,
    };
    let pattern = match m.pattern {
        Some(PatternName::Left) => TriPattern::LeftDiagonal,
        Some(PatternName::CrissCross) => TriPattern::CrissCross,
        Some(PatternName::Right) | None => TriPattern::RightDiagonal,
    };
    if m.pattern.is_some() && element != ElementType::Tri3 {
        return Err(Error::Config("`pattern` only applies to element = \"tri3\"".into()));
    }
    if let Some(n) = m.n {
        only(&["n", "length"], "interval")?;
        let length = m.length.unwrap_or(1.0);
        if n == 0 || !(length > 0.0) {
            return Err(Error::Config("interval mesh needs n >= 1 and a positive length".into()));
        }
        return Ok(MeshSource::Interval { n, length });
    }
    if let Some(seed) = m.seed {
        only(&["seed", "element", "pattern"], "plate-with-hole")?;
        if seed < 21 || !(seed - 1).is_multiple_of(20) {
            return Err(Error::Config(format!("plate-with-hole seed must satisfy (seed - 1) % 20 == 0, got {seed}")));
        }
        return Ok(MeshSource::PlateWithHole { seed, element, pattern });
    }
    if m.xseed.is_some() || m.yseed.is_some() {
        only(&["xseed", "yseed", "element", "pattern", "domain"], "structured")?;
        let (xseed, yseed) = match (m.xseed, m.yseed) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(Error::Config("structured mesh needs both `xseed` and `yseed`".into())),
        };
        if xseed < 2 || yseed < 2 {
            return Err(Error::Config("seeds must be at least 2".into()));
        }
        let domain = match m.domain {
            Some([x0, x1, y0, y1]) if x1 > x0 && y1 > y0 => Rect::new(x0, x1, y0, y1),
            Some(d) => return Err(Error::Config(format!("empty domain {d:?}"))),
            None => Rect::UNIT,
        };
        return Ok(MeshSource::Structured { xseed, yseed, element, pattern, domain });
    }
    let hint = match problem.map(|p| p.name.as_str()) {
        Some("uniform1d" | "slab1d") => "`n`",
        Some("plate_hole") => "`seed`",
        _ => "`xseed`/`yseed`",
    };
    Err(Error::Config(format!("[mesh] needs `gmsh` or generator keys such as {hint}")))
}

fn build_scheme(i: usize, s: &RawScheme, problem: Option<&ProblemSpec>) -> Result<SchemeEntry> {
    let gamma = s.gamma.unwrap_or(1.0);
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Config(format!("schemes[{i}]: γ ∈ (0, 1] required, got {gamma}")));
    }
    if s.lumped.is_some() && s.kind != SchemeName::SingleField {
        return Err(Error::Config(format!("schemes[{i}]: `lumped` only applies to single_field")));
    }
    let scheme = match s.kind {
        SchemeName::Proposed => Scheme::Proposed { gamma },
        SchemeName::Weighted => Scheme::Weighted { gamma },
        SchemeName::SingleField => Scheme::SingleField {
            gamma,
            lumped: s.lumped.unwrap_or(false),
        },
    };
    let constraint = match s.constraint {
        Some(ConstraintName::MaxPrinciple) | None => ConstraintMode::MaxPrinciple,
        Some(ConstraintName::NonNegative) => ConstraintMode::NonNegative,
        Some(ConstraintName::Unconstrained) => ConstraintMode::Unconstrained,
    };
    let mut config = SchemeConfig::new(scheme, s.dt)
        .with_constraint(constraint)
        .with_rates(match s.rates {
            Some(RateName::Weighted) => RateMethod::Weighted,
            _ => RateMethod::Direct,
        })
        .with_quad_order(s.quad_order.unwrap_or(2))
        .with_projection(s.projection.map(Into::into).unwrap_or(InitialProjection::Nodal));
    config.qp_tol = s.qp_tol.unwrap_or(DEFAULT_TOL);
    config.qp_max_iter = s.qp_max_iter;
    config.validate().map_err(|e| Error::Config(format!("schemes[{i}]: {e}")))?;
    if !(config.qp_tol > 0.0) {
        return Err(Error::Config(format!("schemes[{i}]: qp_tol must be positive")));
    }
    if let Some(p) = problem {
        if s.dt > p.end_time {
            return Err(Error::Config(format!(
                "schemes[{i}]: dt = {} exceeds the end time {}",
                s.dt, p.end_time
            )));
        }
    }
    let label = s.label.clone().unwrap_or_else(|| format!("{}{i}", scheme.name()));
    if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(Error::Config(format!("schemes[{i}]: label {label:?} must be non-empty [A-Za-z0-9_-]")));
    }
    Ok(SchemeEntry { label, config })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[problem]
name = "slab1d"

[mesh]
n = 10

[[schemes]]
type = "proposed"
dt = 1e-4
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let spec = parse_config(MINIMAL, None).unwrap();
        assert_eq!(spec.problem().unwrap().name, "slab1d");
        assert_eq!(spec.mesh, MeshSource::Interval { n: 10, length: 1.0 });
        let s = &spec.schemes[0];
        assert_eq!(s.config.scheme, Scheme::Proposed { gamma: 1.0 });
        assert_eq!(s.config.constraint, ConstraintMode::MaxPrinciple);
        assert_eq!(s.config.quad_order, 2);
        assert_eq!(s.label, "proposed0");
        assert_eq!(spec.output.dir, PathBuf::from("out"));
        assert_eq!(spec.convergence.levels, vec![10, 20, 40, 80]);
    }

    #[test]
    fn gamma_zero_rejected() {
        let text = MINIMAL.replace("dt = 1e-4", "dt = 1e-4\ngamma = 0.0");
        let err = parse_config(&text, None).unwrap_err().to_string();
        assert!(err.contains("γ ∈ (0, 1]"), "{err}");
    }

    #[test]
    fn unknown_key_named() {
        let text = MINIMAL.replace("dt = 1e-4", "dt = 1e-4\ndelta_t = 2.0");
        let err = parse_config(&text, None).unwrap_err().to_string();
        assert!(err.contains("delta_t"), "{err}");
        let text = MINIMAL.replace("n = 10", "nn = 10");
        assert!(parse_config(&text, None).unwrap_err().to_string().contains("nn"));
    }

    #[test]
    fn ambiguous_mesh_rejected() {
        let text = MINIMAL.replace("n = 10", "n = 10\ngmsh = \"m.msh\"");
        let err = parse_config(&text, None).unwrap_err().to_string();
        assert!(err.contains("ambiguous"), "{err}");
    }

    #[test]
    fn missing_fields_rejected() {
        let text = MINIMAL.replace("dt = 1e-4", "");
        assert!(matches!(parse_config(&text, None), Err(Error::Config(_))));
        assert!(matches!(parse_config("[problem]\nname = \"slab1d\"\n", None), Err(Error::Config(_))));
        let text = MINIMAL.replace("slab1d", "slab3d");
        assert!(matches!(parse_config(&text, None), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_and_mesh_kinds() {
        let text = r#"
[problem]
name = "plate_hole"
k1 = 5.0
end_time = 0.01

[mesh]
seed = 41
element = "tri3"
pattern = "criss_cross"

[[schemes]]
type = "single_field"
lumped = true
dt = 1e-3
label = "be_lumped"

[[schemes]]
type = "weighted"
gamma = 0.5
dt = 1e-3
rates = "weighted"
constraint = "non_negative"

[output]
snapshots = [0.005, 0.01]
"#;
        let spec = parse_config(text, None).unwrap();
        let p = spec.problem().unwrap();
        assert_eq!(p.end_time, 0.01);
        assert!(matches!(p.diffusivity, crate::problem::Diffusivity::RotatedAnisotropic { k1, .. } if k1 == 5.0));
        assert_eq!(
            spec.mesh,
            MeshSource::PlateWithHole {
                seed: 41,
                element: ElementType::Tri3,
                pattern: TriPattern::CrissCross
            }
        );
        assert_eq!(spec.schemes[0].label, "be_lumped");
        assert_eq!(spec.schemes[1].config.constraint, ConstraintMode::NonNegative);
        assert_eq!(spec.schemes[1].config.rates, RateMethod::Weighted);
        assert_eq!(spec.convergence.levels, vec![21, 41, 81]);

        let bad = text.replace("snapshots = [0.005, 0.01]", "snapshots = [0.5]");
        assert!(parse_config(&bad, None).is_err());
        let bad = text.replace("k1 = 5.0", "eps = 5.0");
        assert!(parse_config(&bad, None).is_err());
        let bad = text.replace("k1 = 5.0", "k2 = -1.0");
        assert!(parse_config(&bad, None).unwrap_err().to_string().contains("elliptic"));
    }
}
