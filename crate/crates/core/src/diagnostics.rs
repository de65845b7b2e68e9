//! Bound violations, monotone-matrix checks, error norms and convergence rates.

use nalgebra::DMatrix;

use crate::analytic::ExactSolution;
use crate::error::{Error, Result};
use crate::fem::{map_element, quadrature_rule};
use crate::mesh::Mesh;

#[derive(Clone, Debug, PartialEq)]
pub struct ViolationReport {
    pub min_value: f64,
    pub max_value: f64,
    pub argmin: usize,
    pub argmax: usize,
    pub count_below: usize,
    pub count_above: usize,
    pub fraction_below: f64,
    pub fraction_above: f64,
    pub tol: f64,
}

impl ViolationReport {
    pub fn violations(&self) -> usize {
        self.count_below + self.count_above
    }
}

/// Counts entries below `c_min - tol` or above `c_max + tol`.
pub fn violation_report(c: &[f64], c_min: f64, c_max: f64, tol: f64) -> ViolationReport {
    let mut r = ViolationReport {
        min_value: f64::INFINITY,
        max_value: f64::NEG_INFINITY,
        argmin: 0,
        argmax: 0,
        count_below: 0,
        count_above: 0,
        fraction_below: 0.0,
        fraction_above: 0.0,
        tol,
    };
    for (i, &v) in c.iter().enumerate() {
        if v < r.min_value {
            r.min_value = v;
            r.argmin = i;
        }
        if v > r.max_value {
            r.max_value = v;
            r.argmax = i;
        }
        if v < c_min - tol {
            r.count_below += 1;
        }
        if v > c_max + tol {
            r.count_above += 1;
        }
    }
    if !c.is_empty() {
        r.fraction_below = r.count_below as f64 / c.len() as f64;
        r.fraction_above = r.count_above as f64 / c.len() as f64;
    }
    r
}

/// Whether `a` is invertible with an entrywise non-negative inverse (up to
/// `-tol`). Also returns the smallest inverse entry.
pub fn is_monotone_matrix(a: &[Vec<f64>], tol: f64) -> Result<(bool, f64)> {
    let n = a.len();
    if n > 500 {
        return Err(Error::invalid(format!("dense monotonicity check limited to n <= 500, got {n}")));
    }
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("matrix is not square"));
    }
    if n == 0 {
        return Ok((true, f64::INFINITY));
    }
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let inv = m.try_inverse().ok_or(Error::SingularMatrix)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix);
    }
    let min = inv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((min >= -tol, min))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub t: f64,
    pub l2: f64,
    pub h1_semi: f64,
}

/// L2 norm and H1 seminorm of `c_h - exact(., t)`.
pub fn error_norms(mesh: &Mesh, c_h: &[f64], exact: &dyn ExactSolution, t: f64, quad_order: usize) -> Result<ErrorNorms> {
    if c_h.len() != mesh.n_nodes() {
        return Err(Error::invalid("nodal vector length differs from node count"));
    }
    let (mut l2, mut h1) = (0.0, 0.0);
    for (e, el) in mesh.elements().iter().enumerate() {
        let rule = quadrature_rule(el.kind, quad_order)?;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let mp = map_element(mesh.coords(), el.kind, &el.nodes, e, *p)?;
            let mut uh = 0.0;
            let mut gh = [0.0; 2];
            for (a, &n) in el.nodes.iter().enumerate() {
                uh += mp.values[a] * c_h[n];
                gh[0] += mp.grads[a][0] * c_h[n];
                gh[1] += mp.grads[a][1] * c_h[n];
            }
            let u = exact.value(mp.x, t)?;
            let g = exact.gradient(mp.x, t)?;
            let s = w * mp.det_j;
            l2 += s * (uh - u).powi(2);
            let dy = if mesh.dim() == 1 { 0.0 } else { gh[1] - g[1] };
            h1 += s * ((gh[0] - g[0]).powi(2) + dy * dy);
        }
    }
    Ok(ErrorNorms {
        t,
        l2: l2.sqrt(),
        h1_semi: h1.sqrt(),
    })
}

/// `rate_k = ln(e_k / e_{k+1}) / ln(h_k / h_{k+1})`; a zero error gives `+inf`.
pub fn convergence_rates(errors: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != h.len() || errors.len() < 2 {
        return Err(Error::invalid("need at least two levels with matching errors and sizes"));
    }
    if h.windows(2).any(|w| !(w[1] < w[0])) || h.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("mesh sizes must be positive and strictly decreasing"));
    }
    Ok(errors
        .windows(2)
        .zip(h.windows(2))
        .map(|(e, hh)| {
            if e[1] == 0.0 {
                f64::INFINITY
            } else {
                (e[0] / e[1]).ln() / (hh[0] / hh[1]).ln()
            }
        })
        .collect())
}
