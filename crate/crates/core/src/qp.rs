//! Box-constrained convex quadratic programs
//! `min 1/2 x^T K x - f^T x` subject to `lo <= x <= hi`.
//!
//! The solver is a primal active-set method. Each iteration solves the
//! equality-restricted problem on the free variables with an envelope
//! Cholesky factorization whose ordering is computed once per matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sparse::{SkylineSymbolic, SparseSymMatrix};

/// Default optimality tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
pub struct BoxQp<'a> {
    pub k: &'a SparseSymMatrix,
    pub f: &'a [f64],
    pub lo: &'a [f64],
    pub hi: &'a [f64],
}

impl<'a> BoxQp<'a> {
    pub fn new(k: &'a SparseSymMatrix, f: &'a [f64], lo: &'a [f64], hi: &'a [f64]) -> Result<Self> {
        let n = k.n();
        if f.len() != n || lo.len() != n || hi.len() != n {
            return Err(Error::invalid("box QP dimensions do not agree"));
        }
        for i in 0..n {
            if lo[i].is_nan() || hi[i].is_nan() || !f[i].is_finite() || lo[i] > hi[i] {
                return Err(Error::invalid(format!("invalid box [{}, {}] or load at index {i}", lo[i], hi[i])));
            }
            if lo[i] == f64::INFINITY || hi[i] == f64::NEG_INFINITY {
                return Err(Error::invalid(format!("empty box at index {i}")));
            }
        }
        Ok(BoxQp { k, f, lo, hi })
    }

    pub fn n(&self) -> usize {
        self.k.n()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let kx = self.k.mul_vec(x);
        x.iter().zip(&kx).zip(self.f).map(|((xi, kxi), fi)| 0.5 * xi * kxi - fi * xi).sum()
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.lo.iter().zip(self.hi)).map(|(v, (l, h))| v.clamp(*l, *h)).collect()
    }

    /// Scaled tolerance `tol (1 + max |f|)`.
    pub fn scaled_tol(&self, tol: f64) -> f64 {
        tol * (1.0 + self.f.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpResult {
    pub x: Vec<f64>,
    pub active_lower: Vec<usize>,
    pub active_upper: Vec<usize>,
    /// `K x - f` on the active sets, zero elsewhere.
    pub multipliers: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Objective after each outer iteration.
    pub objective_trace: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Free,
    Lower,
    Upper,
}

/// KKT residual of `x`: bound violation, gradient on free variables, and
/// wrong-signed multipliers on variables sitting at a bound.
pub fn kkt_residual(prob: &BoxQp, x: &[f64]) -> f64 {
    let kx = prob.k.mul_vec(x);
    let mut r = 0.0f64;
    for i in 0..prob.n() {
        let g = kx[i] - prob.f[i];
        let (lo, hi) = (prob.lo[i], prob.hi[i]);
        r = r.max(lo - x[i]).max(x[i] - hi);
        let term = if x[i] <= lo && x[i] >= hi {
            0.0
        } else if x[i] <= lo {
            (-g).max(0.0)
        } else if x[i] >= hi {
            g.max(0.0)
        } else {
            g.abs()
        };
        r = r.max(term);
    }
    r
}

/// Active-set solver that caches the fill-reducing ordering of `K`.
#[derive(Clone, Debug)]
pub struct ActiveSetSolver {
    symbolic: SkylineSymbolic,
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl ActiveSetSolver {
    pub fn new(k: &SparseSymMatrix) -> Self {
        ActiveSetSolver {
            symbolic: SkylineSymbolic::new(k),
            tol: DEFAULT_TOL,
            max_iter: None,
        }
    }

    pub fn solve(&self, prob: &BoxQp, warm_start: Option<&[f64]>) -> Result<QpResult> {
        let n = prob.n();
        let tol_s = prob.scaled_tol(self.tol);
        let max_iter = self.max_iter.unwrap_or(10 * n + 100);
        let mut status = vec![Status::Free; n];
        let mut trace = Vec::new();

        let mut x = match warm_start {
            Some(w) => {
                if w.len() != n {
                    return Err(Error::invalid("warm start length differs from problem size"));
                }
                prob.clamp(w)
            }
            None => {
                let xu = self.symbolic.factor(prob.k, None)?.solve(prob.f);
                let feasible = (0..n).all(|i| xu[i] >= prob.lo[i] && xu[i] <= prob.hi[i]);
                if feasible {
                    return Ok(self.finish(prob, xu, &status, 0, vec![]));
                }
                prob.clamp(&xu)
            }
        };
        for i in 0..n {
            status[i] = if x[i] == prob.lo[i] && prob.lo[i].is_finite() {
                Status::Lower
            } else if x[i] == prob.hi[i] && prob.hi[i].is_finite() {
                Status::Upper
            } else {
                Status::Free
            };
        }
        trace.push(prob.objective(&x));

        let mut iterations = 0;
        loop {
            if iterations >= max_iter {
                let best = self.finish(prob, x, &status, iterations, trace);
                return Err(Error::NoConvergence {
                    iterations,
                    kkt_residual: best.kkt_residual,
                    best: Box::new(best),
                });
            }
            iterations += 1;

            let xhat = self.subproblem(prob, &x, &status)?;
            let blocking = (0..n)
                .filter(|&i| status[i] == Status::Free)
                .filter_map(|i| {
                    let d = xhat[i] - x[i];
                    if xhat[i] < prob.lo[i] && d < 0.0 {
                        Some(((prob.lo[i] - x[i]) / d, i, Status::Lower))
                    } else if xhat[i] > prob.hi[i] && d > 0.0 {
                        Some(((prob.hi[i] - x[i]) / d, i, Status::Upper))
                    } else {
                        None
                    }
                })
                // Smallest step; ties go to the lowest index.
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

            if let Some((alpha, j, s)) = blocking {
                let alpha = alpha.clamp(0.0, 1.0);
                for i in 0..n {
                    if status[i] == Status::Free {
                        x[i] = (x[i] + alpha * (xhat[i] - x[i])).clamp(prob.lo[i], prob.hi[i]);
                    }
                }
                x[j] = if s == Status::Lower { prob.lo[j] } else { prob.hi[j] };
                status[j] = s;
                trace.push(prob.objective(&x));
                continue;
            }

            x = xhat;
            let kx = prob.k.mul_vec(&x);
            let mut worst: Option<(f64, usize)> = None;
            for i in 0..n {
                let g = kx[i] - prob.f[i];
                let v = match status[i] {
                    Status::Free => continue,
                    Status::Lower => -g,
                    Status::Upper => g,
                };
                if v > tol_s && worst.is_none_or(|(w, _)| v > w) {
                    worst = Some((v, i));
                }
            }
            trace.push(prob.objective(&x));
            match worst {
                Some((_, i)) => status[i] = Status::Free,
                None => return Ok(self.finish(prob, x, &status, iterations, trace)),
            }
        }
    }

    /// Minimizer over the free variables with the others held at their bounds.
    fn subproblem(&self, prob: &BoxQp, x: &[f64], status: &[Status]) -> Result<Vec<f64>> {
        let n = prob.n();
        let mask: Vec<bool> = status.iter().map(|s| *s != Status::Free).collect();
        if mask.iter().all(|&m| m) {
            return Ok(x.to_vec());
        }
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            if mask[i] {
                rhs[i] = x[i];
            } else {
                let coupling: f64 = prob.k.row(i).filter(|&(j, _)| mask[j]).map(|(j, v)| v * x[j]).sum();
                rhs[i] = prob.f[i] - coupling;
            }
        }
        let fac = self.symbolic.factor(prob.k, Some(&mask))?;
        let mut y = fac.solve(&rhs);
        for i in 0..n {
            if mask[i] {
                y[i] = x[i];
            }
        }
        Ok(y)
    }

    fn finish(&self, prob: &BoxQp, x: Vec<f64>, status: &[Status], iterations: usize, trace: Vec<f64>) -> QpResult {
        let kx = prob.k.mul_vec(&x);
        let mut multipliers = vec![0.0; x.len()];
        let mut active_lower = Vec::new();
        let mut active_upper = Vec::new();
        for (i, s) in status.iter().enumerate() {
            match s {
                Status::Free => {}
                Status::Lower => active_lower.push(i),
                Status::Upper => active_upper.push(i),
            }
            if *s != Status::Free {
                multipliers[i] = kx[i] - prob.f[i];
            }
        }
        QpResult {
            kkt_residual: kkt_residual(prob, &x),
            x,
            active_lower,
            active_upper,
            multipliers,
            iterations,
            objective_trace: trace,
        }
    }
}

/// Solves a box QP with a fresh solver.
pub fn solve_box_qp(prob: &BoxQp, warm_start: Option<&[f64]>, tol: f64) -> Result<QpResult> {
    let mut s = ActiveSetSolver::new(prob.k);
    s.tol = tol;
    s.solve(prob, warm_start)
}

/// Reference solution by enumerating all `3^n` lower/upper/free assignments.
pub fn brute_force_box_qp(prob: &BoxQp) -> Result<Vec<f64>> {
    let n = prob.n();
    if n > 12 {
        return Err(Error::invalid(format!("brute force limited to n <= 12, got {n}")));
    }
    if (0..n).any(|i| !prob.lo[i].is_finite() || !prob.hi[i].is_finite()) {
        return Err(Error::invalid("brute force needs finite bounds"));
    }
    let k = DMatrix::from_fn(n, n, |i, j| prob.k.get(i, j));
    let f = DVector::from_column_slice(prob.f);
    let feas_tol = 1e-12;
    let kkt_tol = 1e-8 * (1.0 + f.amax());
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut fallback: Option<(f64, Vec<f64>)> = None;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let mut state = vec![0u8; n];
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = match state[i] {
                0 => prob.lo[i],
                1 => prob.hi[i],
                _ => 0.0,
            };
        }
        if !free.is_empty() {
            let m = free.len();
            let kff = DMatrix::from_fn(m, m, |a, b| k[(free[a], free[b])]);
            let rhs = DVector::from_fn(m, |a, _| {
                let i = free[a];
                f[i] - (0..n).filter(|&j| state[j] != 2).map(|j| k[(i, j)] * x[j]).sum::<f64>()
            });
            let Some(chol) = kff.cholesky() else { continue };
            let sol = chol.solve(&rhs);
            for (a, &i) in free.iter().enumerate() {
                x[i] = sol[a];
            }
        }
        let feasible = (0..n).all(|i| x[i] >= prob.lo[i] - feas_tol && x[i] <= prob.hi[i] + feas_tol);
        if !feasible {
            continue;
        }
        let xv = DVector::from_column_slice(&x);
        let g = &k * &xv - &f;
        let obj = 0.5 * xv.dot(&(&k * &xv)) - f.dot(&xv);
        let consistent = (0..n).all(|i| match state[i] {
            0 => g[i] >= -kkt_tol,
            1 => g[i] <= kkt_tol,
            _ => true,
        });
        let slot = if consistent { &mut best } else { &mut fallback };
        if slot.as_ref().is_none_or(|(o, _)| obj < *o) {
            *slot = Some((obj, x));
        }
    }
    best.or(fallback)
        .map(|(_, x)| x)
        .ok_or_else(|| Error::invalid("no feasible candidate found"))
}
