//! Problem data: diffusivity, source, boundary and initial values.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::analytic::{AnalyticKind, AnalyticSolution};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

/// Symmetric 2x2 tensor. 1D problems use the `[0][0]` entry.
pub type Tensor = [[f64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Diffusivity {
    Isotropic(f64),
    ConstantTensor(Tensor),
    /// `R diag(k1, k2) R^T` with `R` the rotation by `theta`.
    RotatedAnisotropic { k1: f64, k2: f64, theta: f64 },
    /// `[[y^2 + eps x^2, -(1 - eps) x y], [-(1 - eps) x y, eps y^2 + x^2]]`.
    LePotier { eps: f64 },
}

impl Diffusivity {
    pub fn eval(&self, x: Point) -> Tensor {
        match *self {
            Diffusivity::Isotropic(k) => [[k, 0.0], [0.0, k]],
            Diffusivity::ConstantTensor(d) => d,
            Diffusivity::RotatedAnisotropic { k1, k2, theta } => {
                let (s, c) = theta.sin_cos();
                let off = (k1 - k2) * c * s;
                [[k1 * c * c + k2 * s * s, off], [off, k1 * s * s + k2 * c * c]]
            }
            Diffusivity::LePotier { eps } => {
                let [x, y] = x;
                let off = -(1.0 - eps) * x * y;
                [[y * y + eps * x * x, off], [off, eps * y * y + x * x]]
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        !matches!(self, Diffusivity::LePotier { .. })
    }
}

/// Diffusivity tensor at a point.
pub fn eval_diffusivity(field: &Diffusivity, x: Point) -> Tensor {
    field.eval(x)
}

/// Eigenvalues of a symmetric 2x2 tensor, ascending.
pub fn eigenvalues(d: &Tensor) -> (f64, f64) {
    let m = 0.5 * (d[0][0] + d[1][1]);
    let r = (0.25 * (d[0][0] - d[1][1]).powi(2) + d[0][1] * d[1][0]).sqrt();
    (m - r, m + r)
}

/// Smallest and largest eigenvalue over the sample points.
pub fn validate_ellipticity(field: &Diffusivity, samples: &[Point]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::invalid("ellipticity check needs at least one sample"));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &p in samples {
        let d = field.eval(p);
        let (a, b) = eigenvalues(&d);
        if !(a > 0.0) || (d[0][1] - d[1][0]).abs() > 1e-14 * (d[0][1].abs() + 1.0) {
            return Err(Error::NotElliptic {
                x: p[0],
                y: p[1],
                min_eig: a,
            });
        }
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok((lo, hi))
}

/// Scalar function of position and time.
#[derive(Clone)]
pub struct Field(Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>);

impl Field {
    pub fn new(f: impl Fn(Point, f64) -> f64 + Send + Sync + 'static) -> Self {
        Field(Arc::new(f))
    }

    pub fn constant(v: f64) -> Self {
        Field::new(move |_, _| v)
    }

    /// Indicator of the closed box `[lo, hi]` in every used coordinate.
    pub fn indicator(lo: [f64; 2], hi: [f64; 2]) -> Self {
        Field::new(move |x, _| {
            let inside = (lo[0]..=hi[0]).contains(&x[0]) && (lo[1]..=hi[1]).contains(&x[1]);
            if inside {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn eval(&self, x: Point, t: f64) -> f64 {
        (self.0)(x, t)
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Field(..)")
    }
}

/// Boundary data attached to a mesh tag.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub tag: String,
    pub value: Field,
}

impl BoundaryData {
    pub fn new(tag: &str, value: Field) -> Self {
        BoundaryData {
            tag: tag.to_string(),
            value,
        }
    }
}

/// Complete description of a transient diffusion problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub name: String,
    pub diffusivity: Diffusivity,
    pub source: Field,
    pub dirichlet: Vec<BoundaryData>,
    /// Prescribed flux `n . D grad c` on tagged boundaries.
    pub neumann: Vec<BoundaryData>,
    pub initial: Field,
    pub end_time: f64,
    pub exact: Option<AnalyticSolution>,
}

impl ProblemSpec {
    /// Checks the data against a mesh: tags exist, Dirichlet and Neumann
    /// tags are disjoint, and the end time is positive.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if !(self.end_time > 0.0) || !self.end_time.is_finite() {
            return Err(Error::invalid(format!("end time must be positive, got {}", self.end_time)));
        }
        for d in self.dirichlet.iter().chain(&self.neumann) {
            if !mesh.has_tag(&d.tag) {
                return Err(Error::NotFound(format!("boundary tag {:?}", d.tag)));
            }
        }
        for n in &self.neumann {
            if self.dirichlet.iter().any(|d| d.tag == n.tag) {
                return Err(Error::invalid(format!(
                    "tag {:?} carries both Dirichlet and Neumann data",
                    n.tag
                )));
            }
        }
        Ok(())
    }

    /// Unit initial value, zero flux on the left, zero value on the right.
    pub fn uniform_1d() -> Self {
        ProblemSpec {
            name: "uniform1d".into(),
            diffusivity: Diffusivity::Isotropic(1.0),
            source: Field::constant(0.0),
            dirichlet: vec![BoundaryData::new("right", Field::constant(0.0))],
            neumann: vec![BoundaryData::new("left", Field::constant(0.0))],
            initial: Field::constant(1.0),
            end_time: 0.1,
            exact: Some(AnalyticSolution::new(AnalyticKind::UniformIC1D).expect("valid series")),
        }
    }

    /// Unit initial value on `[a, b]` with zero values at both ends.
    pub fn slab_1d(a: f64, b: f64) -> Result<Self> {
        let exact = AnalyticSolution::new(AnalyticKind::SlabIC1D { a, b })?;
        Ok(ProblemSpec {
            name: "slab1d".into(),
            diffusivity: Diffusivity::Isotropic(1.0),
            source: Field::constant(0.0),
            dirichlet: ["left", "right"]
                .iter()
                .map(|t| BoundaryData::new(t, Field::constant(0.0)))
                .collect(),
            neumann: Vec::new(),
            initial: Field::indicator([a, f64::NEG_INFINITY], [b, f64::INFINITY]),
            end_time: 0.1,
            exact: Some(exact),
        })
    }

    /// Unit initial value on `[a, b]^2` with zero values on the whole boundary.
    pub fn slab_2d(a: f64, b: f64) -> Result<Self> {
        let exact = AnalyticSolution::new(AnalyticKind::SlabIC2D { a, b })?;
        Ok(ProblemSpec {
            name: "slab2d".into(),
            diffusivity: Diffusivity::Isotropic(1.0),
            source: Field::constant(0.0),
            dirichlet: square_sides(0.0),
            neumann: Vec::new(),
            initial: Field::indicator([a, a], [b, b]),
            end_time: 0.01,
            exact: Some(exact),
        })
    }

    /// Plate with a square hole: unit value on the hole, zero outside, rotated
    /// anisotropic diffusivity, zero initial value.
    pub fn plate_hole(k1: f64, k2: f64, theta: f64) -> Self {
        ProblemSpec {
            name: "plate_hole".into(),
            diffusivity: Diffusivity::RotatedAnisotropic { k1, k2, theta },
            source: Field::constant(0.0),
            dirichlet: vec![
                BoundaryData::new("outer", Field::constant(0.0)),
                BoundaryData::new("hole", Field::constant(1.0)),
            ],
            neumann: Vec::new(),
            initial: Field::constant(0.0),
            end_time: 0.05,
            exact: None,
        }
    }

    /// Default plate-with-hole parameters: `k1 = 10`, `k2 = 1e-3`, `theta = -pi/6`.
    pub fn plate_hole_default() -> Self {
        Self::plate_hole(10.0, 1e-3, -PI / 6.0)
    }

    /// Heterogeneous anisotropic medium with a unit source on `[3/8, 5/8]^2`.
    pub fn hetero(eps: f64) -> Self {
        ProblemSpec {
            name: "hetero".into(),
            diffusivity: Diffusivity::LePotier { eps },
            source: Field::indicator([0.375, 0.375], [0.625, 0.625]),
            dirichlet: square_sides(0.0),
            neumann: Vec::new(),
            initial: Field::constant(0.0),
            end_time: 2.0,
            exact: None,
        }
    }
}

fn square_sides(v: f64) -> Vec<BoundaryData> {
    ["left", "right", "bottom", "top"]
        .iter()
        .map(|t| BoundaryData::new(t, Field::constant(v)))
        .collect()
}
