//! Reference elements: shape functions, quadrature and the isoparametric map.
//!
//! Reference domains are `[-1, 1]` for Line2, the unit simplex for Tri3 and
//! `[-1, 1]^2` for Quad4. Quad4 nodes are ordered counter-clockwise starting
//! at `(-1, -1)`. Gradients are stored as `[d/dx, d/dy]`; 1D elements leave
//! the second component at zero.

use crate::error::{Error, Result};
use crate::mesh::{ElementType, Mesh, Point};

const TOL: f64 = 1e-12;

/// Quad4 reference node coordinates.
pub const QUAD4_NODES: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

/// Shape function values and derivatives mapped to a physical element.
#[derive(Clone, Debug, PartialEq)]
pub struct MappedPoint {
    pub x: Point,
    pub det_j: f64,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

fn check_inside(etype: ElementType, xi: Point) -> Result<()> {
    let inside = match etype {
        ElementType::Line2 => xi[0].abs() <= 1.0 + TOL,
        ElementType::Tri3 => xi[0] >= -TOL && xi[1] >= -TOL && xi[0] + xi[1] <= 1.0 + TOL,
        ElementType::Quad4 => xi[0].abs() <= 1.0 + TOL && xi[1].abs() <= 1.0 + TOL,
    };
    if inside && xi.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "point {xi:?} lies outside the {etype:?} reference element"
        )))
    }
}

fn values_unchecked(etype: ElementType, xi: Point) -> Vec<f64> {
    let [s, t] = xi;
    match etype {
        ElementType::Line2 => vec![0.5 * (1.0 - s), 0.5 * (1.0 + s)],
        ElementType::Tri3 => vec![1.0 - s - t, s, t],
        ElementType::Quad4 => QUAD4_NODES
            .iter()
            .map(|[a, b]| 0.25 * (1.0 + a * s) * (1.0 + b * t))
            .collect(),
    }
}

fn gradients_unchecked(etype: ElementType, xi: Point) -> Vec<[f64; 2]> {
    let [s, t] = xi;
    match etype {
        ElementType::Line2 => vec![[-0.5, 0.0], [0.5, 0.0]],
        ElementType::Tri3 => vec![[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]],
        ElementType::Quad4 => QUAD4_NODES
            .iter()
            .map(|[a, b]| [0.25 * a * (1.0 + b * t), 0.25 * b * (1.0 + a * s)])
            .collect(),
    }
}

/// Shape function values at a reference point.
pub fn shape_values(etype: ElementType, xi: Point) -> Result<Vec<f64>> {
    check_inside(etype, xi)?;
    Ok(values_unchecked(etype, xi))
}

/// Reference shape function gradients, one row per node.
pub fn shape_gradients(etype: ElementType, xi: Point) -> Result<Vec<[f64; 2]>> {
    check_inside(etype, xi)?;
    Ok(gradients_unchecked(etype, xi))
}

fn gauss_1d(order: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    Some(match order {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (0.6f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        _ => return None,
    })
}

/// Quadrature rule of the given order (1, 2 or 3).
///
/// Line2 and Quad4 use Gauss rules with `order` points per direction. Tri3
/// uses the 1-point (degree 1), 3-point (degree 2) and 6-point (degree 4)
/// symmetric rules, all with positive weights.
pub fn quadrature_rule(etype: ElementType, order: usize) -> Result<QuadratureRule> {
    let unsupported = || Error::invalid(format!("unsupported quadrature order {order} for {etype:?}"));
    match etype {
        ElementType::Line2 => {
            let (p, w) = gauss_1d(order).ok_or_else(unsupported)?;
            Ok(QuadratureRule {
                points: p.iter().map(|&x| [x, 0.0]).collect(),
                weights: w,
            })
        }
        ElementType::Quad4 => {
            let (p, w) = gauss_1d(order).ok_or_else(unsupported)?;
            let mut rule = QuadratureRule {
                points: Vec::new(),
                weights: Vec::new(),
            };
            for (j, &y) in p.iter().enumerate() {
                for (i, &x) in p.iter().enumerate() {
                    rule.points.push([x, y]);
                    rule.weights.push(w[i] * w[j]);
                }
            }
            Ok(rule)
        }
        ElementType::Tri3 => match order {
            1 => Ok(QuadratureRule {
                points: vec![[1.0 / 3.0, 1.0 / 3.0]],
                weights: vec![0.5],
            }),
            2 => Ok(QuadratureRule {
                points: vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
                weights: vec![1.0 / 6.0; 3],
            }),
            3 => {
                let mut rule = QuadratureRule {
                    points: Vec::new(),
                    weights: Vec::new(),
                };
                for (a, w) in [
                    (0.445_948_490_915_965, 0.223_381_589_678_011),
                    (0.091_576_213_509_771, 0.109_951_743_655_322),
                ] {
                    let b = 1.0 - 2.0 * a;
                    for p in [[a, a], [b, a], [a, b]] {
                        rule.points.push(p);
                        rule.weights.push(0.5 * w);
                    }
                }
                Ok(rule)
            }
            _ => Err(unsupported()),
        },
    }
}

/// Maps a reference point of element `e` to physical space.
pub fn map_to_physical(mesh: &Mesh, e: usize, xi: Point) -> Result<MappedPoint> {
    let el = mesh
        .elements()
        .get(e)
        .ok_or_else(|| Error::invalid(format!("element index {e} out of range")))?;
    check_inside(el.kind, xi)?;
    map_element(mesh.coords(), el.kind, &el.nodes, e, xi)
}

pub(crate) fn map_element(
    coords: &[Point],
    kind: ElementType,
    nodes: &[usize],
    e: usize,
    xi: Point,
) -> Result<MappedPoint> {
    let values = values_unchecked(kind, xi);
    let dref = gradients_unchecked(kind, xi);
    let mut x = [0.0; 2];
    for (k, &n) in nodes.iter().enumerate() {
        x[0] += values[k] * coords[n][0];
        x[1] += values[k] * coords[n][1];
    }
    let degenerate = |det_j: f64| Error::DegenerateElement { element: e, det_j };
    if kind == ElementType::Line2 {
        let j: f64 = nodes.iter().zip(&dref).map(|(&n, d)| d[0] * coords[n][0]).sum();
        if !(j > 0.0) {
            return Err(degenerate(j));
        }
        let grads = dref.iter().map(|d| [d[0] / j, 0.0]).collect();
        return Ok(MappedPoint {
            x,
            det_j: j,
            values,
            grads,
        });
    }
    // J[a][b] = d x_a / d xi_b
    let mut jm = [[0.0; 2]; 2];
    for (k, &n) in nodes.iter().enumerate() {
        for a in 0..2 {
            for b in 0..2 {
                jm[a][b] += coords[n][a] * dref[k][b];
            }
        }
    }
    let det = jm[0][0] * jm[1][1] - jm[0][1] * jm[1][0];
    if !(det > 0.0) {
        return Err(degenerate(det));
    }
    // Physical gradient = reference gradient times J^{-1}.
    let inv = [
        [jm[1][1] / det, -jm[0][1] / det],
        [-jm[1][0] / det, jm[0][0] / det],
    ];
    let grads = dref
        .iter()
        .map(|d| {
            [
                d[0] * inv[0][0] + d[1] * inv[1][0],
                d[0] * inv[0][1] + d[1] * inv[1][1],
            ]
        })
        .collect();
    Ok(MappedPoint {
        x,
        det_j: det,
        values,
        grads,
    })
}

/// Length or area of element `e`, integrated with the order-2 rule.
pub fn element_measure(mesh: &Mesh, e: usize) -> Result<f64> {
    let el = mesh
        .elements()
        .get(e)
        .ok_or_else(|| Error::invalid(format!("element index {e} out of range")))?;
    let rule = quadrature_rule(el.kind, 2)?;
    let mut m = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        m += w * map_element(mesh.coords(), el.kind, &el.nodes, e, *p)?.det_j;
    }
    Ok(m)
}
