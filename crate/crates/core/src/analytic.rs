//! Series solutions of the benchmark problems on the unit interval and square.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Default number of series terms per direction.
pub const DEFAULT_TERMS: usize = 200;
/// Default envelope below which summation stops early.
pub const DEFAULT_TAIL_TOL: f64 = 1e-14;

/// A reference solution with value, gradient and time derivative.
pub trait ExactSolution {
    fn value(&self, x: Point, t: f64) -> Result<f64>;
    fn gradient(&self, x: Point, t: f64) -> Result<[f64; 2]>;
    fn rate(&self, x: Point, t: f64) -> Result<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AnalyticKind {
    /// Unit initial value on `[0, 1]`, zero flux at 0 and zero value at 1.
    UniformIC1D,
    /// Unit initial value on `[a, b]`, zero elsewhere, zero boundary values.
    SlabIC1D { a: f64, b: f64 },
    /// Unit initial value on `[a, b]^2`, zero elsewhere, zero boundary values.
    SlabIC2D { a: f64, b: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticSolution {
    pub kind: AnalyticKind,
    pub n_terms: usize,
    pub tail_tol: f64,
}

impl AnalyticSolution {
    pub fn new(kind: AnalyticKind) -> Result<Self> {
        Self::with_terms(kind, DEFAULT_TERMS)
    }

    pub fn with_terms(kind: AnalyticKind, n_terms: usize) -> Result<Self> {
        if n_terms == 0 {
            return Err(Error::invalid("series needs at least one term"));
        }
        if let AnalyticKind::SlabIC1D { a, b } | AnalyticKind::SlabIC2D { a, b } = kind {
            if !(0.0 < a && a < b && b < 1.0) {
                return Err(Error::invalid(format!("slab bounds must satisfy 0 < a < b < 1, got ({a}, {b})")));
            }
        }
        Ok(AnalyticSolution {
            kind,
            n_terms,
            tail_tol: DEFAULT_TAIL_TOL,
        })
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("series solutions need t > 0, got {t}")))
    }
}

/// Which derivative of the spatial mode to sum.
#[derive(Clone, Copy)]
enum Part {
    Value,
    Gradient,
    Rate,
}

fn uniform_sum(x: f64, t: f64, n_terms: usize, tail_tol: f64, part: Part) -> f64 {
    let mut s = 0.0;
    for n in 0..n_terms {
        let k = (2 * n + 1) as f64;
        let e = (-k * k * PI * PI * t / 4.0).exp();
        if e / k < tail_tol {
            break;
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let arg = k * PI * x / 2.0;
        s += match part {
            Part::Value => 4.0 / PI * sign / k * e * arg.cos(),
            Part::Gradient => -2.0 * sign * e * arg.sin(),
            Part::Rate => -PI * sign * k * e * arg.cos(),
        };
    }
    s
}

/// Per-mode terms of the slab series along one axis.
fn slab_terms(x: f64, t: f64, a: f64, b: f64, n_terms: usize, tail_tol: f64, part: Part) -> Vec<f64> {
    let mut out = Vec::new();
    for n in 1..=n_terms {
        let m = n as f64;
        let e = (-m * m * PI * PI * t).exp();
        if e / m < tail_tol {
            break;
        }
        let coef = ((m * PI * a).cos() - (m * PI * b).cos()) * e;
        out.push(match part {
            Part::Value => 2.0 / PI / m * coef * (m * PI * x).sin(),
            Part::Gradient => 2.0 * coef * (m * PI * x).cos(),
            Part::Rate => -2.0 * PI * m * coef * (m * PI * x).sin(),
        });
    }
    out
}

/// Series for the uniform initial value problem on `[0, 1]`.
pub fn analytic_uniform_ic_1d(x: f64, t: f64, n_terms: usize) -> Result<f64> {
    check_time(t)?;
    Ok(uniform_sum(x, t, n_terms, DEFAULT_TAIL_TOL, Part::Value))
}

/// Series for the 1D slab initial value on `[a, b]`.
pub fn analytic_slab_ic_1d(x: f64, t: f64, a: f64, b: f64, n_terms: usize) -> Result<f64> {
    check_time(t)?;
    Ok(slab_terms(x, t, a, b, n_terms, DEFAULT_TAIL_TOL, Part::Value).iter().sum())
}

/// Double series for the 2D slab initial value on `[a, b]^2`.
pub fn analytic_slab_ic_2d(x: f64, y: f64, t: f64, a: f64, b: f64, n_terms: usize) -> Result<f64> {
    check_time(t)?;
    Ok(slab_2d(x, y, t, a, b, n_terms, DEFAULT_TAIL_TOL, Part::Value, Part::Value))
}

#[allow(clippy::too_many_arguments)]
fn slab_2d(x: f64, y: f64, t: f64, a: f64, b: f64, n: usize, tol: f64, px: Part, py: Part) -> f64 {
    // Mode (m, n) decays as exp(-(m^2 + n^2) pi^2 t), so both factors share the 1D envelope.
    let tx = slab_terms(x, t, a, b, n, tol, px);
    let ty = slab_terms(y, t, a, b, n, tol, py);
    let mut s = 0.0;
    for u in &tx {
        for v in &ty {
            s += u * v;
        }
    }
    s
}

impl ExactSolution for AnalyticSolution {
    fn value(&self, x: Point, t: f64) -> Result<f64> {
        check_time(t)?;
        let (n, tol) = (self.n_terms, self.tail_tol);
        Ok(match self.kind {
            AnalyticKind::UniformIC1D => uniform_sum(x[0], t, n, tol, Part::Value),
            AnalyticKind::SlabIC1D { a, b } => slab_terms(x[0], t, a, b, n, tol, Part::Value).iter().sum(),
            AnalyticKind::SlabIC2D { a, b } => slab_2d(x[0], x[1], t, a, b, n, tol, Part::Value, Part::Value),
        })
    }

    fn gradient(&self, x: Point, t: f64) -> Result<[f64; 2]> {
        check_time(t)?;
        let (n, tol) = (self.n_terms, self.tail_tol);
        Ok(match self.kind {
            AnalyticKind::UniformIC1D => [uniform_sum(x[0], t, n, tol, Part::Gradient), 0.0],
            AnalyticKind::SlabIC1D { a, b } => {
                [slab_terms(x[0], t, a, b, n, tol, Part::Gradient).iter().sum(), 0.0]
            }
            AnalyticKind::SlabIC2D { a, b } => [
                slab_2d(x[0], x[1], t, a, b, n, tol, Part::Gradient, Part::Value),
                slab_2d(x[0], x[1], t, a, b, n, tol, Part::Value, Part::Gradient),
            ],
        })
    }

    fn rate(&self, x: Point, t: f64) -> Result<f64> {
        check_time(t)?;
        let (n, tol) = (self.n_terms, self.tail_tol);
        Ok(match self.kind {
            AnalyticKind::UniformIC1D => uniform_sum(x[0], t, n, tol, Part::Rate),
            AnalyticKind::SlabIC1D { a, b } => slab_terms(x[0], t, a, b, n, tol, Part::Rate).iter().sum(),
            // d/dt of exp(-(m^2 + n^2) pi^2 t) splits into the two 1D rate factors.
            AnalyticKind::SlabIC2D { a, b } => {
                slab_2d(x[0], x[1], t, a, b, n, tol, Part::Rate, Part::Value)
                    + slab_2d(x[0], x[1], t, a, b, n, tol, Part::Value, Part::Rate)
            }
        })
    }
}

/// Time-independent linear field `c0 + g . x`, handy for patch tests.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearField {
    pub c0: f64,
    pub grad: [f64; 2],
}

impl ExactSolution for LinearField {
    fn value(&self, x: Point, _t: f64) -> Result<f64> {
        Ok(self.c0 + self.grad[0] * x[0] + self.grad[1] * x[1])
    }

    fn gradient(&self, _x: Point, _t: f64) -> Result<[f64; 2]> {
        Ok(self.grad)
    }

    fn rate(&self, _x: Point, _t: f64) -> Result<f64> {
        Ok(0.0)
    }
}
