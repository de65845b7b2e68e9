//! Time integration.
//!
//! Three schemes share one driver:
//!
//! * [`Scheme::Proposed`]: each step solves the diffusion-with-decay problem
//!   `(M/dt + K) c = F(t_{n+1}) + M c_n / dt` as a box-constrained QP. The
//!   parameter `gamma` only enters the recovery of nodal rates.
//! * [`Scheme::Weighted`]: the same QP posed at the weighted levels
//!   `t_{n+gamma}`, with integral-level values interpolated between
//!   consecutive weighted levels.
//! * [`Scheme::SingleField`]: the trapezoidal family applied to the
//!   semi-discrete system `C dc/dt + K c = F`, with consistent or lumped
//!   capacity. No constraints are imposed.

use std::time::Instant;

use crate::assembly::{
    assemble_capacity, assemble_load, assemble_stiffness, dirichlet_values, initial_values, DofMap,
    InitialProjection,
};
use crate::diagnostics::violation_report;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::problem::ProblemSpec;
use crate::qp::{ActiveSetSolver, BoxQp, DEFAULT_TOL};
use crate::sparse::{SkylineCholesky, SparseSymMatrix};

/// Violation tolerance used when recording step statistics.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme {
    Proposed { gamma: f64 },
    Weighted { gamma: f64 },
    SingleField { gamma: f64, lumped: bool },
}

impl Scheme {
    pub fn gamma(&self) -> f64 {
        match *self {
            Scheme::Proposed { gamma } | Scheme::Weighted { gamma } | Scheme::SingleField { gamma, .. } => gamma,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Proposed { .. } => "proposed",
            Scheme::Weighted { .. } => "weighted",
            Scheme::SingleField { .. } => "single_field",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConstraintMode {
    /// Bounds from the initial values and the Dirichlet data at the level.
    #[default]
    MaxPrinciple,
    /// `c >= 0` only.
    NonNegative,
    Unconstrained,
}

/// How nodal rates are recovered by the constrained schemes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RateMethod {
    /// From the update relation `c_{n+1} = c_n + dt ((1 - gamma) v_n + gamma v_{n+1})`.
    #[default]
    Direct,
    /// Blend of the weighted-level rates on either side of `t_{n+1}`. Lags one
    /// step; the final step falls back to [`RateMethod::Direct`].
    Weighted,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub constraint: ConstraintMode,
    pub rates: RateMethod,
    pub quad_order: usize,
    pub projection: InitialProjection,
    pub qp_tol: f64,
    /// Active-set iteration cap; `None` uses the solver default.
    pub qp_max_iter: Option<usize>,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, dt: f64) -> Self {
        SchemeConfig {
            scheme,
            dt,
            constraint: ConstraintMode::MaxPrinciple,
            rates: RateMethod::Direct,
            quad_order: 2,
            projection: InitialProjection::Nodal,
            qp_tol: DEFAULT_TOL,
            qp_max_iter: None,
        }
    }

    pub fn with_constraint(mut self, mode: ConstraintMode) -> Self {
        self.constraint = mode;
        self
    }

    pub fn with_rates(mut self, rates: RateMethod) -> Self {
        self.rates = rates;
        self
    }

    pub fn with_projection(mut self, projection: InitialProjection) -> Self {
        self.projection = projection;
        self
    }

    pub fn with_quad_order(mut self, order: usize) -> Self {
        self.quad_order = order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {}", self.dt)));
        }
        let g = self.scheme.gamma();
        let ok = match self.scheme {
            Scheme::Proposed { .. } | Scheme::Weighted { .. } => g > 0.0 && g <= 1.0,
            // gamma = 0 is the explicit member, which is not provided.
            Scheme::SingleField { .. } => g > 0.0 && g <= 1.0,
        };
        if !ok {
            return Err(Error::invalid(format!("gamma must lie in (0, 1], got {g}")));
        }
        if !(1..=3).contains(&self.quad_order) {
            return Err(Error::invalid(format!("quadrature order must be 1, 2 or 3, got {}", self.quad_order)));
        }
        Ok(())
    }
}

/// Nodal state at an integral time level.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeState {
    pub step: usize,
    pub t: f64,
    pub c: Vec<f64>,
    pub v: Vec<f64>,
    /// Weighted scheme only: the solution at the next weighted level `t_{n+gamma}`.
    pub weighted: Option<WeightedLevel>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedLevel {
    pub t: f64,
    pub c: Vec<f64>,
}

/// Admissible range at a time level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
    /// Set when no Dirichlet data exist and the range comes from the initial values alone.
    pub initial_only: bool,
}

/// Bounds at time `t` given nodal initial values `c0`.
///
/// In [`ConstraintMode::MaxPrinciple`] the range spans the initial and
/// Dirichlet values; a positive load lifts the upper bound and a negative
/// load drops the lower one.
pub fn compute_bounds(mesh: &Mesh, problem: &ProblemSpec, c0: &[f64], t: f64, mode: ConstraintMode) -> Result<Bounds> {
    match mode {
        ConstraintMode::Unconstrained => Ok(Bounds {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            initial_only: false,
        }),
        ConstraintMode::NonNegative => Ok(Bounds {
            lo: 0.0,
            hi: f64::INFINITY,
            initial_only: false,
        }),
        ConstraintMode::MaxPrinciple => {
            let fold = |it: &mut dyn Iterator<Item = f64>| {
                it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
            };
            let (mut lo, mut hi) = fold(&mut c0.iter().copied());
            let pinned = dirichlet_values(mesh, problem, t)?;
            let (plo, phi) = fold(&mut pinned.values().copied());
            lo = lo.min(plo);
            hi = hi.max(phi);
            // A source or boundary flux of one sign only preserves the
            // opposite side of the principle.
            let load = assemble_load(mesh, &problem.source, &problem.neumann, t, 2)?;
            if load.iter().any(|&f| f > 0.0) {
                hi = f64::INFINITY;
            }
            if load.iter().any(|&f| f < 0.0) {
                lo = f64::NEG_INFINITY;
            }
            Ok(Bounds {
                lo,
                hi,
                initial_only: pinned.is_empty(),
            })
        }
    }
}

/// `v_{n+1} = (c_{n+1} - c_n - (1 - gamma) dt v_n) / (gamma dt)`.
pub fn recover_rates_direct(c_next: &[f64], c_prev: &[f64], v_prev: &[f64], gamma: f64, dt: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("direct rate recovery needs gamma > 0"));
    }
    Ok(c_next
        .iter()
        .zip(c_prev)
        .zip(v_prev)
        .map(|((cn, cp), vp)| (cn - cp - (1.0 - gamma) * dt * vp) / (gamma * dt))
        .collect())
}

/// Returns `(v_{n+gamma}, v_{n+1})` with `v_{n+gamma} = (c_{n+1} - c_n) / dt`
/// and `v_{n+1} = gamma v_{n+gamma} + (1 - gamma) v_{n+1+gamma}`.
pub fn recover_rates_weighted(
    c_next: &[f64],
    c_prev: &[f64],
    v_weighted_next: &[f64],
    gamma: f64,
    dt: f64,
) -> (Vec<f64>, Vec<f64>) {
    let vw: Vec<f64> = c_next.iter().zip(c_prev).map(|(a, b)| (a - b) / dt).collect();
    let v = vw
        .iter()
        .zip(v_weighted_next)
        .map(|(a, b)| gamma * a + (1.0 - gamma) * b)
        .collect();
    (vw, v)
}

/// Statistics of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub min_c: f64,
    pub max_c: f64,
    pub n_below: usize,
    pub n_above: usize,
    pub qp_iterations: usize,
    pub wall_ms: f64,
    /// Reference bounds the counts were taken against.
    pub bounds: Bounds,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub c: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeHistory {
    pub initial: Vec<f64>,
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: TimeState,
    /// Notes about fallbacks taken during the run.
    pub flags: Vec<String>,
}

impl TimeHistory {
    pub fn min_over_steps(&self) -> f64 {
        self.records.iter().map(|r| r.min_c).fold(f64::INFINITY, f64::min)
    }

    pub fn max_over_steps(&self) -> f64 {
        self.records.iter().map(|r| r.max_c).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn total_violations(&self) -> usize {
        self.records.iter().map(|r| r.n_below + r.n_above).sum()
    }
}

/// Result of a single call to [`Stepper::step`].
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: TimeState,
    pub qp_iterations: usize,
    pub bounds: Bounds,
}

struct CachedSystem {
    coef: f64,
    full: SparseSymMatrix,
    reduced: SparseSymMatrix,
    chol: Option<SkylineCholesky>,
}

/// Assembled operators and solver state for one mesh, problem and scheme.
pub struct Stepper<'a> {
    mesh: &'a Mesh,
    problem: &'a ProblemSpec,
    cfg: SchemeConfig,
    k: SparseSymMatrix,
    m: SparseSymMatrix,
    c0: Vec<f64>,
    dofs: DofMap,
    qp: Option<ActiveSetSolver>,
    cache: Vec<CachedSystem>,
}

impl<'a> Stepper<'a> {
    pub fn new(mesh: &'a Mesh, problem: &'a ProblemSpec, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        problem.validate(mesh)?;
        let k = assemble_stiffness(mesh, &problem.diffusivity, cfg.quad_order)?;
        let lumped = matches!(cfg.scheme, Scheme::SingleField { lumped: true, .. });
        let m = assemble_capacity(mesh, lumped, cfg.quad_order)?;
        let c0 = initial_values(mesh, &problem.initial, cfg.projection, cfg.quad_order)?;
        let pinned = dirichlet_values(mesh, problem, 0.0)?;
        let dofs = DofMap::new(mesh.n_nodes(), pinned.keys().copied())?;
        Ok(Stepper {
            mesh,
            problem,
            cfg,
            k,
            m,
            c0,
            dofs,
            qp: None,
            cache: Vec::new(),
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn stiffness(&self) -> &SparseSymMatrix {
        &self.k
    }

    pub fn capacity(&self) -> &SparseSymMatrix {
        &self.m
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn initial_values(&self) -> &[f64] {
        &self.c0
    }

    /// Full step matrix `coef * M + K` (before Dirichlet elimination).
    pub fn step_matrix(&mut self, coef: f64) -> Result<&SparseSymMatrix> {
        let i = self.system(coef)?;
        Ok(&self.cache[i].full)
    }

    fn system(&mut self, coef: f64) -> Result<usize> {
        if let Some(i) = self.cache.iter().position(|s| s.coef == coef) {
            return Ok(i);
        }
        let full = self.m.linear_combination(coef, &self.k, 1.0)?;
        let reduced = self.dofs.reduce_matrix(&full);
        if self.qp.is_none() {
            let mut s = ActiveSetSolver::new(&reduced);
            s.tol = self.cfg.qp_tol;
            s.max_iter = self.cfg.qp_max_iter;
            self.qp = Some(s);
        }
        if self.cache.len() >= 4 {
            self.cache.remove(0);
        }
        self.cache.push(CachedSystem {
            coef,
            full,
            reduced,
            chol: None,
        });
        Ok(self.cache.len() - 1)
    }

    fn pinned_full(&self, t: f64) -> Result<Vec<f64>> {
        let mut full = vec![0.0; self.mesh.n_nodes()];
        for (n, v) in dirichlet_values(self.mesh, self.problem, t)? {
            full[n] = v;
        }
        Ok(full)
    }

    fn load(&self, t: f64) -> Result<Vec<f64>> {
        assemble_load(self.mesh, &self.problem.source, &self.problem.neumann, t, self.cfg.quad_order)
    }

    /// Overwrites the rates of pinned nodes with the forward difference of the
    /// Dirichlet data over `[t0, t1]`.
    pub fn pin_rates(&self, v: &mut [f64], t0: f64, t1: f64) -> Result<()> {
        let p0 = self.pinned_full(t0)?;
        let p1 = self.pinned_full(t1)?;
        for &i in self.dofs.pinned() {
            v[i] = (p1[i] - p0[i]) / (t1 - t0);
        }
        Ok(())
    }

    /// Initial rates from `C v = F(0) - K c0` on free nodes. Pinned nodes take
    /// the forward difference of the Dirichlet data over one step.
    fn initial_rates(&mut self) -> Result<Vec<f64>> {
        let dt = self.cfg.dt;
        let p0 = self.pinned_full(0.0)?;
        let p1 = self.pinned_full(dt)?;
        let mut v = vec![0.0; self.mesh.n_nodes()];
        for &i in self.dofs.pinned() {
            v[i] = (p1[i] - p0[i]) / dt;
        }
        if self.dofs.free().is_empty() {
            return Ok(v);
        }
        let f0 = self.load(0.0)?;
        let kc = self.k.mul_vec(&self.c0);
        let rhs: Vec<f64> = f0.iter().zip(&kc).map(|(a, b)| a - b).collect();
        let reduced = self.dofs.reduce_matrix(&self.m);
        let b = self.dofs.reduce_rhs(&self.m, &rhs, &v);
        let x = SkylineCholesky::new(&reduced)?.solve(&b);
        self.dofs.scatter(&x, &mut v);
        Ok(v)
    }

    pub fn initial_state(&mut self) -> Result<TimeState> {
        let v = self.initial_rates()?;
        Ok(TimeState {
            step: 0,
            t: 0.0,
            c: self.c0.clone(),
            v,
            weighted: None,
        })
    }

    /// Solves `(coef M + K) c = F(t) + M rhs_c * coef` with Dirichlet data at
    /// `t`, constrained or not according to the configuration.
    fn decay_solve(&mut self, coef: f64, t: f64, rhs_c: &[f64], warm: &[f64], constrained: bool) -> Result<(Vec<f64>, usize, Bounds)> {
        let idx = self.system(coef)?;
        let mut b = self.load(t)?;
        let mc = self.m.mul_vec(rhs_c);
        for (bi, mi) in b.iter_mut().zip(&mc) {
            *bi += coef * mi;
        }
        let mut full = self.pinned_full(t)?;
        let sys = &self.cache[idx];
        let rhs = self.dofs.reduce_rhs(&sys.full, &b, &full);
        let report_mode = match self.cfg.constraint {
            ConstraintMode::NonNegative => ConstraintMode::NonNegative,
            _ => ConstraintMode::MaxPrinciple,
        };
        let report = compute_bounds(self.mesh, self.problem, &self.c0, t, report_mode)?;
        let mut iters = 0;
        let x = if constrained {
            let bounds = compute_bounds(self.mesh, self.problem, &self.c0, t, self.cfg.constraint)?;
            let nf = rhs.len();
            let lo = vec![bounds.lo; nf];
            let hi = vec![bounds.hi; nf];
            let qp = BoxQp::new(&sys.reduced, &rhs, &lo, &hi)?;
            let warm = self.dofs.restrict(warm);
            let solver = self.qp.as_ref().expect("solver built with the first system");
            let r = solver.solve(&qp, Some(&warm))?;
            iters = r.iterations;
            r.x
        } else {
            if self.cache[idx].chol.is_none() {
                let c = SkylineCholesky::new(&self.cache[idx].reduced)?;
                self.cache[idx].chol = Some(c);
            }
            self.cache[idx].chol.as_ref().expect("just built").solve(&rhs)
        };
        self.dofs.scatter(&x, &mut full);
        Ok((full, iters, report))
    }

    /// Advances `state` by `dt`.
    pub fn step(&mut self, state: &TimeState, dt: f64) -> Result<StepOutcome> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        match self.cfg.scheme {
            Scheme::Proposed { gamma } => self.step_proposed(state, dt, gamma),
            Scheme::Weighted { gamma } => self.step_weighted(state, dt, gamma),
            Scheme::SingleField { gamma, .. } => self.step_single_field(state, dt, gamma),
        }
    }

    fn step_proposed(&mut self, state: &TimeState, dt: f64, gamma: f64) -> Result<StepOutcome> {
        let t = state.t + dt;
        let (c, iters, bounds) = self.decay_solve(1.0 / dt, t, &state.c, &state.c, true)?;
        let mut v = recover_rates_direct(&c, &state.c, &state.v, gamma, dt)?;
        self.pin_rates(&mut v, state.t, t)?;
        Ok(StepOutcome {
            state: TimeState {
                step: state.step + 1,
                t,
                c,
                v,
                weighted: None,
            },
            qp_iterations: iters,
            bounds,
        })
    }

    fn step_weighted(&mut self, state: &TimeState, dt: f64, gamma: f64) -> Result<StepOutcome> {
        let mut iters = 0;
        // Not self-starting: the first weighted level comes from a backward
        // Euler step of length gamma dt.
        let ahead = match &state.weighted {
            Some(w) => w.clone(),
            None => {
                let tg = state.t + gamma * dt;
                let (c, it, _) = self.decay_solve(1.0 / (gamma * dt), tg, &state.c, &state.c, true)?;
                iters += it;
                WeightedLevel { t: tg, c }
            }
        };
        let t_next_level = ahead.t + dt;
        let (c_ahead, it, _) = self.decay_solve(1.0 / dt, t_next_level, &ahead.c, &ahead.c, true)?;
        iters += it;

        let t = state.t + dt;
        // Interpolate linearly in time between the bracketing levels.
        let c: Vec<f64> = if t >= ahead.t {
            let w = (t - ahead.t) / dt;
            ahead.c.iter().zip(&c_ahead).map(|(a, b)| (1.0 - w) * a + w * b).collect()
        } else {
            let w = (t - state.t) / (ahead.t - state.t);
            state.c.iter().zip(&ahead.c).map(|(a, b)| (1.0 - w) * a + w * b).collect()
        };
        let mut c = c;
        for (n, v) in dirichlet_values(self.mesh, self.problem, t)? {
            c[n] = v;
        }
        let mut v = recover_rates_direct(&c, &state.c, &state.v, gamma, dt)?;
        self.pin_rates(&mut v, state.t, t)?;
        let report_mode = match self.cfg.constraint {
            ConstraintMode::NonNegative => ConstraintMode::NonNegative,
            _ => ConstraintMode::MaxPrinciple,
        };
        let bounds = compute_bounds(self.mesh, self.problem, &self.c0, t, report_mode)?;
        Ok(StepOutcome {
            state: TimeState {
                step: state.step + 1,
                t,
                c,
                v,
                weighted: Some(WeightedLevel {
                    t: t_next_level,
                    c: c_ahead,
                }),
            },
            qp_iterations: iters,
            bounds,
        })
    }

    fn step_single_field(&mut self, state: &TimeState, dt: f64, gamma: f64) -> Result<StepOutcome> {
        let t = state.t + dt;
        let coef = 1.0 / (gamma * dt);
        let pred: Vec<f64> = state
            .c
            .iter()
            .zip(&state.v)
            .map(|(c, v)| c + dt * (1.0 - gamma) * v)
            .collect();
        let (c, _, bounds) = self.decay_solve(coef, t, &pred, &state.c, false)?;
        let mut v = recover_rates_direct(&c, &state.c, &state.v, gamma, dt)?;
        self.pin_rates(&mut v, state.t, t)?;
        Ok(StepOutcome {
            state: TimeState {
                step: state.step + 1,
                t,
                c,
                v,
                weighted: None,
            },
            qp_iterations: 0,
            bounds,
        })
    }
}

/// Step sizes covering `[0, end]`: full steps of `dt` plus a shorter final
/// step when `end` is not a multiple of `dt`.
pub fn step_sizes(end: f64, dt: f64) -> Vec<f64> {
    let ratio = end / dt;
    let n_full = (ratio + 1e-9).floor() as usize;
    let mut steps = vec![dt; n_full];
    let rest = end - n_full as f64 * dt;
    if rest > 1e-9 * dt {
        steps.push(rest);
    }
    steps
}

/// Runs a scheme from `t = 0` to the problem's end time.
pub fn run_transient(mesh: &Mesh, problem: &ProblemSpec, cfg: SchemeConfig, snapshot_times: &[f64]) -> Result<TimeHistory> {
    run_until(mesh, problem, cfg, problem.end_time, snapshot_times)
}

/// Runs a scheme from `t = 0` to `end`.
pub fn run_until(mesh: &Mesh, problem: &ProblemSpec, cfg: SchemeConfig, end: f64, snapshot_times: &[f64]) -> Result<TimeHistory> {
    if !(end > 0.0) {
        return Err(Error::invalid(format!("end time must be positive, got {end}")));
    }
    if let Some(&bad) = snapshot_times.iter().find(|&&s| !(0.0..=end * (1.0 + 1e-12)).contains(&s)) {
        return Err(Error::invalid(format!("snapshot time {bad} outside [0, {end}]")));
    }
    let mut stepper = Stepper::new(mesh, problem, cfg)?;
    let gamma = cfg.scheme.gamma();
    let weighted_rates = cfg.rates == RateMethod::Weighted && !matches!(cfg.scheme, Scheme::SingleField { .. });
    let mut state = stepper.initial_state()?;
    let mut flags = Vec::new();
    let b0 = compute_bounds(mesh, problem, stepper.initial_values(), cfg.dt, ConstraintMode::MaxPrinciple)?;
    if b0.initial_only && cfg.constraint == ConstraintMode::MaxPrinciple {
        flags.push("no Dirichlet data: bounds taken from the initial values only".to_string());
    }

    let mut pending: Vec<f64> = snapshot_times.to_vec();
    pending.sort_by(f64::total_cmp);
    let mut snapshots = Vec::new();
    let take = |s: &TimeState, pending: &mut Vec<f64>, out: &mut Vec<Snapshot>| {
        while let Some(&ts) = pending.first() {
            if s.t >= ts - 1e-9 * ts.max(cfg.dt) {
                out.push(Snapshot {
                    t: s.t,
                    c: s.c.clone(),
                    v: s.v.clone(),
                });
                pending.remove(0);
            } else {
                break;
            }
        }
    };

    // With weighted rate recovery, the snapshot of a level is emitted once
    // the following step has refined its rate.
    let mut prev: Option<(Vec<f64>, f64)> = None;
    if !weighted_rates {
        take(&state, &mut pending, &mut snapshots);
    }
    let mut records = Vec::new();
    for (k, dt) in step_sizes(end, cfg.dt).into_iter().enumerate() {
        let start = Instant::now();
        let out = stepper.step(&state, dt).map_err(|e| Error::Step {
            step: k + 1,
            source: Box::new(e),
        })?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let rep = violation_report(&out.state.c, out.bounds.lo, out.bounds.hi, VIOLATION_TOL);
        records.push(StepRecord {
            step: out.state.step,
            t: out.state.t,
            min_c: rep.min_value,
            max_c: rep.max_value,
            n_below: rep.count_below,
            n_above: rep.count_above,
            qp_iterations: out.qp_iterations,
            wall_ms,
            bounds: out.bounds,
        });
        let mut next = out.state;
        if weighted_rates {
            if let Some((c_prev, dt_prev)) = prev.take() {
                let vw_next: Vec<f64> = next.c.iter().zip(&state.c).map(|(a, b)| (a - b) / dt).collect();
                state.v = recover_rates_weighted(&state.c, &c_prev, &vw_next, gamma, dt_prev).1;
                stepper.pin_rates(&mut state.v, state.t - dt_prev, state.t)?;
            }
            take(&state, &mut pending, &mut snapshots);
            // Provisional until the next step refines it.
            next.v = recover_rates_direct(&next.c, &state.c, &state.v, gamma, dt)?;
            stepper.pin_rates(&mut next.v, state.t, next.t)?;
            prev = Some((state.c.clone(), dt));
        } else {
            take(&next, &mut pending, &mut snapshots);
        }
        state = next;
    }
    if weighted_rates {
        flags.push("final step rates use direct recovery".to_string());
        take(&state, &mut pending, &mut snapshots);
    }
    Ok(TimeHistory {
        initial: stepper.initial_values().to_vec(),
        records,
        snapshots,
        final_state: state,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_interval_mesh, generate_structured_quad_mesh, Rect};
    use proptest::prelude::*;

    #[test]
    fn rates_examples() {
        let c1 = [1.0, 2.0, 3.0];
        let c0 = [0.5, 2.0, 4.0];
        let v = recover_rates_direct(&c1, &c0, &[9.0; 3], 1.0, 0.5).unwrap();
        assert_eq!(v, vec![1.0, 0.0, -2.0]);
        let z = recover_rates_direct(&c0, &c0, &[0.0; 3], 0.5, 0.1).unwrap();
        assert_eq!(z, vec![0.0; 3]);
        assert!(recover_rates_direct(&c1, &c0, &[0.0; 3], 0.0, 0.1).is_err());

        let (vw, v) = recover_rates_weighted(&c1, &c0, &[7.0; 3], 1.0, 0.5);
        assert_eq!(vw, v);
        assert_eq!(v, vec![1.0, 0.0, -2.0]);
    }

    #[test]
    fn linear_in_time_rates() {
        let (alpha, beta, dt) = (0.3, -1.7, 0.01);
        let c = |n: usize| vec![alpha + beta * n as f64 * dt; 4];
        for gamma in [0.1, 0.5, 1.0] {
            let mut v = vec![beta; 4];
            for n in 0..5 {
                v = recover_rates_direct(&c(n + 1), &c(n), &v, gamma, dt).unwrap();
                assert!(v.iter().all(|x| (x - beta).abs() < 1e-9));
                let vw_next: Vec<f64> = c(n + 2).iter().zip(&c(n + 1)).map(|(a, b)| (a - b) / dt).collect();
                let (_, vv) = recover_rates_weighted(&c(n + 1), &c(n), &vw_next, gamma, dt);
                assert!(vv.iter().all(|x| (x - beta).abs() < 1e-9));
            }
        }
    }

    proptest! {
        #[test]
        fn direct_round_trip(
            data in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 1..20),
            gi in 0usize..3,
            dt in 1e-4f64..1.0,
        ) {
            let gamma = [0.1, 0.5, 1.0][gi];
            let c1: Vec<f64> = data.iter().map(|d| d.0).collect();
            let c0: Vec<f64> = data.iter().map(|d| d.1).collect();
            let v0: Vec<f64> = data.iter().map(|d| d.2).collect();
            let v1 = recover_rates_direct(&c1, &c0, &v0, gamma, dt).unwrap();
            for i in 0..c1.len() {
                let back = c0[i] + dt * ((1.0 - gamma) * v0[i] + gamma * v1[i]);
                prop_assert!((back - c1[i]).abs() <= 1e-13 * (1.0 + c1[i].abs()));
            }
        }
    }

    #[test]
    fn step_sizes_cover_interval() {
        assert_eq!(step_sizes(0.01, 0.001).len(), 10);
        let s = step_sizes(0.0105, 0.001);
        assert_eq!(s.len(), 11);
        assert!((s.iter().sum::<f64>() - 0.0105).abs() < 1e-15);
        assert_eq!(step_sizes(0.5, 1.0), vec![0.5]);
    }

    #[test]
    fn bounds_examples() {
        let m = generate_interval_mesh(10, 1.0).unwrap();
        let p = ProblemSpec::slab_1d(0.4, 0.6).unwrap();
        let c0 = initial_values(&m, &p.initial, InitialProjection::Nodal, 2).unwrap();
        let b = compute_bounds(&m, &p, &c0, 0.01, ConstraintMode::MaxPrinciple).unwrap();
        assert_eq!((b.lo, b.hi, b.initial_only), (0.0, 1.0, false));
        let b = compute_bounds(&m, &p, &c0, 0.01, ConstraintMode::NonNegative).unwrap();
        assert_eq!((b.lo, b.hi), (0.0, f64::INFINITY));
        let mut free = p.clone();
        free.dirichlet.clear();
        free.neumann.clear();
        let b = compute_bounds(&m, &free, &c0, 0.01, ConstraintMode::MaxPrinciple).unwrap();
        assert!(b.initial_only);

        let m = generate_structured_quad_mesh(6, 6, Rect::UNIT).unwrap();
        let h = ProblemSpec::hetero(1e-3);
        let c0 = vec![0.0; m.n_nodes()];
        let b = compute_bounds(&m, &h, &c0, 0.0, ConstraintMode::MaxPrinciple).unwrap();
        assert_eq!((b.lo, b.hi), (0.0, f64::INFINITY));
    }

    #[test]
    fn gamma_zero_rejected() {
        let m = generate_interval_mesh(5, 1.0).unwrap();
        let p = ProblemSpec::uniform_1d();
        for s in [Scheme::Proposed { gamma: 0.0 }, Scheme::Weighted { gamma: 0.0 }, Scheme::SingleField { gamma: 0.0, lumped: false }] {
            assert!(Stepper::new(&m, &p, SchemeConfig::new(s, 1e-3)).is_err());
        }
    }

    #[test]
    fn steady_state_is_fixed_point() {
        // Linear steady profile: zero source, c = 1 - x with Dirichlet ends.
        let m = generate_interval_mesh(8, 1.0).unwrap();
        let mut p = ProblemSpec::slab_1d(0.4, 0.6).unwrap();
        p.dirichlet[0].value = crate::problem::Field::constant(1.0);
        p.initial = crate::problem::Field::new(|x, _| 1.0 - x[0]);
        for scheme in [Scheme::Proposed { gamma: 1.0 }, Scheme::SingleField { gamma: 0.5, lumped: false }, Scheme::Weighted { gamma: 0.5 }] {
            let mut s = Stepper::new(&m, &p, SchemeConfig::new(scheme, 1e-2)).unwrap();
            let st = s.initial_state().unwrap();
            let next = s.step(&st, 1e-2).unwrap().state;
            for (a, b) in next.c.iter().zip(&st.c) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
