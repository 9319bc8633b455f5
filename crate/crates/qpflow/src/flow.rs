//! Time integration of u_t + grad E(u) = 0, trajectory bookkeeping, the
//! discrete energy inequality, and long-time (omega-limit) sampling.
//!
//! The implicit scheme is a discrete-gradient midpoint rule: the step solves
//!   (v - u)/dt + R(m) + theta (v - u) = 0,   m = (u + v)/2,
//! where theta is the scalar making the bracket an exact mean-value gradient
//! of the energy along v - u. Every converged step then satisfies
//!   E(v) + dt ||(v - u)/dt||^2 = E(u)
//! up to the Newton tolerance, which is what lets the energy inequality be
//! checked at a 1e-10 budget instead of an O(dt) one. The semi-implicit
//! scheme freezes the diffusion weights at u and treats the lower-order and
//! reaction terms explicitly; it is cheaper per step but only dissipative
//! for small dt, so the runner backtracks on any energy increase.

use std::sync::Arc;

use serde::Serialize;

use crate::coefficients::extend_f_hat;
use crate::error::{Error, Result};
use crate::grid::{dot_h, lq_norm, norm_w1p, Field};
use crate::linsolve::{factor_with_shift, SkylineFactor};
use crate::operators::{MatrixKind, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    SemiImplicit,
    Implicit,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowConfig {
    pub dt0: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub newton_rtol: f64,
    pub newton_max_iter: usize,
    /// dt multiplier on a rejected step, in (0,1).
    pub backtrack: f64,
    /// Every stride-th step stores a full field snapshot.
    pub snapshot_stride: usize,
    pub dt_min: f64,
    /// Nodal ceiling; crossing it flags suspected blow-up and stops.
    pub blowup_ceiling: f64,
}

impl FlowConfig {
    pub fn new(dt0: f64, t_end: f64, scheme: Scheme) -> FlowConfig {
        FlowConfig {
            dt0,
            t_end,
            scheme,
            newton_rtol: 1e-10,
            newton_max_iter: 40,
            backtrack: 0.5,
            snapshot_stride: 1,
            dt_min: dt0 * 1e-6,
            blowup_ceiling: 1e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt0 > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::Config("dt0 and t_end must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Config(format!(
                "backtracking factor must lie in (0,1), got {}",
                self.backtrack
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot stride must be at least 1".into()));
        }
        if !(self.newton_rtol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::Config("bad Newton controls".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepRecord {
    /// Time after the step.
    pub t: f64,
    pub dt: f64,
    pub energy: f64,
    /// ||(v - u)/dt|| in the discrete L^2 norm.
    pub ut_l2: f64,
    pub min_value: f64,
    pub max_value: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    /// ut_l2 of the step that produced this state; +inf for the initial one.
    pub ut_l2: f64,
    pub field: Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FlowFlag {
    Completed,
    StoppedEarly,
    BlowupSuspected,
    DtUnderflow,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub problem: Problem,
    pub energy0: f64,
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub flag: FlowFlag,
    /// Smallest nodal value seen anywhere along the run.
    pub min_nodal: f64,
    /// Largest negative excursion removed by the positivity truncation Q.
    pub max_undershoot: f64,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }

    pub fn final_field(&self) -> &Field {
        &self.snapshots.last().expect("trajectory has snapshots").field
    }

    pub fn energies(&self) -> Vec<f64> {
        let mut e = Vec::with_capacity(self.records.len() + 1);
        e.push(self.energy0);
        e.extend(self.records.iter().map(|r| r.energy));
        e
    }
}

/// One step of the selected scheme. Returns the new state and its energy.
pub fn step(pr: &Problem, u: &Field, dt: f64, cfg: &FlowConfig) -> Result<(Field, f64)> {
    match cfg.scheme {
        Scheme::SemiImplicit => semi_implicit_step(pr, u, dt),
        Scheme::Implicit => implicit_step(pr, u, dt, cfg.newton_rtol, cfg.newton_max_iter),
    }
}

/// (I/dt + M_u) v = u/dt - R(u) + M_u u, with M_u the frozen-weight
/// diffusion at u. Lower-order and reaction terms sit on the right.
pub fn semi_implicit_step(pr: &Problem, u: &Field, dt: f64) -> Result<(Field, f64)> {
    if !(dt > 0.0) {
        return Err(Error::Precondition(format!("nonpositive dt {dt}")));
    }
    let mut mat = pr.new_matrix();
    pr.assemble_matrix(u, MatrixKind::Frozen, false, &mut mat);
    let ui = pr.grid.gather_interior(u.values());
    let mu = mat.matvec(&ui);
    let g = pr.residual(u);
    let gi = pr.grid.gather_interior(g.values());
    let mut rhs = vec![0.0; ui.len()];
    for k in 0..ui.len() {
        rhs[k] = ui[k] / dt - gi[k] + mu[k];
    }
    for k in 0..ui.len() {
        mat.add_diag(k, 1.0 / dt);
    }
    let factor = factor_with_shift(&mat, 0.0)?;
    let vi = factor.solve(&rhs);
    let v = pr.grid.scatter_interior(&vi);
    let e = pr.energy(&v);
    Ok((v, e))
}

struct MeanValueResidual {
    psi: Field,
    theta: f64,
    energy_v: f64,
    norm: f64,
}

/// Psi(v) = (v - u)/dt + R((u+v)/2) + theta (v - u) with the exact
/// mean-value theta (0 when v is numerically equal to u).
fn eval_mean_value_residual(pr: &Problem, u: &Field, e_u: f64, v: &Field, dt: f64) -> MeanValueResidual {
    let m = u.axpy(1.0, v).scale(0.5);
    let g = pr.residual(&m);
    let d = v.sub(u);
    let nd2 = dot_h(&pr.grid, d.values(), d.values());
    let e_v = pr.energy(v);
    let floor = 1e-13 * (1.0 + norm_h(pr, u));
    let theta = if nd2 > floor * floor {
        (e_v - e_u - dot_h(&pr.grid, g.values(), d.values())) / nd2
    } else {
        0.0
    };
    let psi = g.axpy(1.0 / dt + theta, &d);
    let norm = norm_h(pr, &psi);
    MeanValueResidual {
        psi,
        theta,
        energy_v: e_v,
        norm,
    }
}

fn norm_h(pr: &Problem, f: &Field) -> f64 {
    dot_h(&pr.grid, f.values(), f.values()).sqrt()
}

/// Damped Newton on the mean-value residual. Factorizations are reused and
/// refreshed only when contraction degrades.
pub fn implicit_step(
    pr: &Problem,
    u: &Field,
    dt: f64,
    rtol: f64,
    max_iter: usize,
) -> Result<(Field, f64)> {
    if !(dt > 0.0) {
        return Err(Error::Precondition(format!("nonpositive dt {dt}")));
    }
    let e_u = pr.energy(u);
    let mut v = u.clone();
    let mut cur = eval_mean_value_residual(pr, u, e_u, &v, dt);
    let floor = 200.0 * f64::EPSILON * (1.0 + norm_h(pr, u)) / dt;
    let tol = (rtol * cur.norm).max(floor);
    if cur.norm <= tol {
        return Ok((v, cur.energy_v));
    }

    let jacobian = |m: &Field, theta: f64| -> Result<SkylineFactor> {
        let mut mat = pr.new_matrix();
        pr.assemble_matrix(m, MatrixKind::Newton, true, &mut mat);
        // d/dv of R((u+v)/2) is half the Hessian at the midpoint; the
        // rank-one theta sensitivity is dropped (modified Newton).
        mat.scale_all(0.5);
        for k in 0..mat.order() {
            mat.add_diag(k, 1.0 / dt + theta);
        }
        factor_with_shift(&mat, 0.0)
    };

    let midpoint = |v: &Field| u.axpy(1.0, v).scale(0.5);
    let mut factor = jacobian(&midpoint(&v), cur.theta)?;
    let mut stale = false;
    for _ in 0..max_iter {
        let psi_i = pr.grid.gather_interior(cur.psi.values());
        let neg: Vec<f64> = psi_i.iter().map(|x| -x).collect();
        let delta_i = factor.solve(&neg);
        let delta = pr.grid.scatter_interior(&delta_i);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..25 {
            let cand = v.axpy(alpha, &delta);
            let trial = eval_mean_value_residual(pr, u, e_u, &cand, dt);
            if trial.norm.is_finite() && trial.norm <= (1.0 - 1e-4 * alpha) * cur.norm {
                accepted = Some((cand, trial));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((cand, trial)) => {
                let contraction = trial.norm / cur.norm;
                v = cand;
                cur = trial;
                if cur.norm <= tol {
                    return Ok((v, cur.energy_v));
                }
                if contraction > 0.25 {
                    factor = jacobian(&midpoint(&v), cur.theta)?;
                    stale = false;
                } else {
                    stale = true;
                }
            }
            None => {
                if stale {
                    factor = jacobian(&midpoint(&v), cur.theta)?;
                    stale = false;
                    continue;
                }
                return Err(Error::SolverStall {
                    iterations: max_iter,
                    residual: cur.norm,
                });
            }
        }
    }
    Err(Error::SolverStall {
        iterations: max_iter,
        residual: cur.norm,
    })
}

/// Runs the flow to t_end. The reaction is replaced by its zero extension
/// so negative undershoots receive no forcing; for the nonnegative data the
/// preconditions require, the two agree.
pub fn run_flow(problem: &Problem, u0: &Field, cfg: &FlowConfig) -> Result<Trajectory> {
    run_flow_until(problem, u0, cfg, |_, _| false)
}

/// Like `run_flow` but stops early (flag StoppedEarly) once `stop(u, t)`
/// returns true after an accepted step.
pub fn run_flow_until(
    problem: &Problem,
    u0: &Field,
    cfg: &FlowConfig,
    mut stop: impl FnMut(&Field, f64) -> bool,
) -> Result<Trajectory> {
    cfg.validate()?;
    if !Arc::ptr_eq(u0.grid(), &problem.grid) {
        return Err(Error::Precondition("initial state lives on another grid".into()));
    }
    if !u0.is_finite() {
        return Err(Error::Eval("initial state is not finite".into()));
    }
    let scale0 = 1.0 + u0.max_abs();
    if u0.min_value() < -1e-12 * scale0 {
        return Err(Error::Precondition(format!(
            "initial state must be nonnegative, min {}",
            u0.min_value()
        )));
    }
    let pr = problem.with_nonlinearity(extend_f_hat(&problem.nonlin))?;
    let e0 = pr.energy(u0);
    if !e0.is_finite() {
        return Err(Error::Eval("initial energy is not finite".into()));
    }

    let mut u = u0.clone();
    let mut e_u = e0;
    let mut t = 0.0;
    let mut dt = cfg.dt0;
    let mut records: Vec<StepRecord> = Vec::new();
    let mut snapshots = vec![Snapshot {
        t: 0.0,
        ut_l2: f64::INFINITY,
        field: u0.clone(),
    }];
    let mut min_nodal = u0.min_value();
    let mut max_undershoot = 0.0f64;
    let mut flag = FlowFlag::Completed;
    let mut steps_accepted = 0usize;

    // shrinks dt in place; true when no further shrinking is possible
    fn shrink(dt: &mut f64, factor: f64, dt_min: f64) -> bool {
        *dt *= factor;
        *dt < dt_min
    }

    let horizon = cfg.t_end * (1.0 - 1e-12);
    while t < horizon {
        let dt_try = dt.min(cfg.t_end - t);
        let attempt = step(&pr, &u, dt_try, cfg);
        match attempt {
            Ok((mut v, mut e_v)) => {
                // Q(v): drop the negative part. The implicit midpoint update can
                // overshoot below zero on stiff decaying modes; truncation restores
                // positivity without raising energy (clipping only removes gradient
                // mass and the extended nonlinearity vanishes on negatives) and only
                // shrinks the increment away from a nonnegative state.
                let undershoot = -v.min_value();
                if undershoot > 0.0 {
                    v = v.clip_min(0.0);
                    e_v = pr.energy(&v);
                }
                let tol_e = 1e-10 * (1.0 + e_u.abs());
                if !v.is_finite() || !e_v.is_finite() || e_v > e_u + tol_e {
                    if shrink(&mut dt, cfg.backtrack, cfg.dt_min) {
                        flag = FlowFlag::DtUnderflow;
                        break;
                    }
                    continue;
                }
                if undershoot > 0.0 {
                    max_undershoot = max_undershoot.max(undershoot);
                }
                let d = v.sub(&u);
                let ut = norm_h(&pr, &d) / dt_try;
                t += dt_try;
                steps_accepted += 1;
                min_nodal = min_nodal.min(v.min_value());
                records.push(StepRecord {
                    t,
                    dt: dt_try,
                    energy: e_v,
                    ut_l2: ut,
                    min_value: v.min_value(),
                    max_value: v.max_value(),
                });
                u = v;
                e_u = e_v;
                let at_end = t >= horizon;
                if steps_accepted % cfg.snapshot_stride == 0 || at_end {
                    snapshots.push(Snapshot {
                        t,
                        ut_l2: ut,
                        field: u.clone(),
                    });
                }
                if u.max_abs() > cfg.blowup_ceiling {
                    flag = FlowFlag::BlowupSuspected;
                    break;
                }
                if stop(&u, t) {
                    flag = FlowFlag::StoppedEarly;
                    break;
                }
                // recover dt after earlier backtracking
                if dt < cfg.dt0 {
                    dt = (dt * 2.0).min(cfg.dt0);
                }
            }
            Err(Error::SolverStall { .. }) => {
                if shrink(&mut dt, cfg.backtrack, cfg.dt_min) {
                    flag = FlowFlag::DtUnderflow;
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    if snapshots.last().map(|s| s.t) != records.last().map(|r| r.t) {
        if let Some(last) = records.last() {
            snapshots.push(Snapshot {
                t: last.t,
                ut_l2: last.ut_l2,
                field: u.clone(),
            });
        }
    }
    Ok(Trajectory {
        problem: pr,
        energy0: e0,
        records,
        snapshots,
        flag,
        min_nodal,
        max_undershoot,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    /// max over s < t of E(t) + sum_{(s,t]} dt ut^2 - E(s)
    pub max_violation: f64,
    pub budget: f64,
    pub steps: usize,
    pub pass: bool,
}

/// Checks E(u(t)) + int_s^t ||u_t||^2 <= E(u(s)) for every recorded pair
/// s < t, in one pass over the prefix sums.
pub fn verify_energy_inequality(tr: &Trajectory) -> EnergyReport {
    let energies = tr.energies();
    let steps = tr.records.len();
    let mut max_abs_e = 0.0f64;
    for &e in &energies {
        max_abs_e = max_abs_e.max(e.abs());
    }
    let mut cum = 0.0;
    let mut min_seen = energies[0]; // E_s + C_s at s = 0
    let mut max_violation: f64 = 0.0;
    for (k, rec) in tr.records.iter().enumerate() {
        cum += rec.dt * rec.ut_l2 * rec.ut_l2;
        let val = energies[k + 1] + cum;
        max_violation = max_violation.max(val - min_seen);
        min_seen = min_seen.min(val);
    }
    let budget = 1e-10 * (1.0 + max_abs_e) * steps.max(1) as f64;
    EnergyReport {
        max_violation,
        budget,
        steps,
        pass: max_violation <= budget,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OmegaVerdict {
    Vanished,
    Nontrivial,
    Undecided,
}

#[derive(Debug, Clone)]
pub struct OmegaLimitReport {
    /// t_j in [tau_j, tau_j + 1] minimizing the recorded ||u_t||.
    pub sampled_times: Vec<f64>,
    /// Discrete Lambda_j = ||u_t(t_j)||^2.
    pub lambda: Vec<f64>,
    /// ||u(t_j) - z||_{W^{1,p}}; the last entry is 0 by construction.
    pub metrics: Vec<f64>,
    pub z: Field,
    pub z_norm_w1p: f64,
    pub z_residual_l2: f64,
    pub vanish_tol: f64,
    pub verdict: OmegaVerdict,
}

/// Picks, in each window [tau, tau+1], the snapshot with the smallest
/// dissipation rate; the last pick is the omega-limit candidate z.
pub fn sample_omega_limit(tr: &Trajectory, tau_list: &[f64]) -> Result<OmegaLimitReport> {
    if tr.snapshots.is_empty() || tau_list.is_empty() {
        return Err(Error::Precondition("empty trajectory or window list".into()));
    }
    let p = tr.problem.p;
    let mut picks: Vec<&Snapshot> = Vec::with_capacity(tau_list.len());
    for &tau in tau_list {
        let best = tr
            .snapshots
            .iter()
            .filter(|s| s.t >= tau - 1e-12 && s.t <= tau + 1.0 + 1e-12)
            .min_by(|a, b| a.ut_l2.total_cmp(&b.ut_l2));
        match best {
            Some(s) => picks.push(s),
            None => {
                return Err(Error::Config(format!(
                    "no snapshot recorded in the window [{tau}, {}]",
                    tau + 1.0
                )))
            }
        }
    }
    let z = picks.last().unwrap().field.clone();
    let metrics: Vec<f64> = picks
        .iter()
        .map(|s| norm_w1p(&s.field.sub(&z), p))
        .collect();
    let u0_norm = norm_w1p(&tr.snapshots[0].field, p);
    let vanish_tol = 1e-3 * u0_norm;
    let z_norm = norm_w1p(&z, p);
    let residual = tr.problem.residual(&z);
    let z_residual_l2 = dot_h(&tr.problem.grid, residual.values(), residual.values()).sqrt();
    let verdict = if z_norm <= vanish_tol {
        OmegaVerdict::Vanished
    } else {
        let settling = metrics
            .windows(2)
            .all(|w| w[1] <= 1.1 * w[0] + 1e-12 * (1.0 + u0_norm));
        if settling {
            OmegaVerdict::Nontrivial
        } else {
            OmegaVerdict::Undecided
        }
    };
    Ok(OmegaLimitReport {
        sampled_times: picks.iter().map(|s| s.t).collect(),
        lambda: picks
            .iter()
            .map(|s| if s.ut_l2.is_finite() { s.ut_l2 * s.ut_l2 } else { f64::INFINITY })
            .collect(),
        metrics,
        z,
        z_norm_w1p: z_norm,
        z_residual_l2,
        vanish_tol,
        verdict,
    })
}

/// sup ||u(t) - u(t + mu)||_{L^q} over snapshots in the last quarter of the
/// run and increments mu in (0, mu0]. A decay certificate: extending the run
/// must shrink it.
pub fn check_time_equicontinuity(tr: &Trajectory, mu0: f64, q: f64) -> Result<f64> {
    if !(mu0 >= 0.0) {
        return Err(Error::Precondition(format!("mu0 must be nonnegative, got {mu0}")));
    }
    let pstar = tr.problem.nonlin.pstar();
    if !(q >= 1.0) || q >= pstar {
        return Err(Error::Precondition(format!(
            "q = {q} outside [1, p*) with p* = {pstar}"
        )));
    }
    if mu0 == 0.0 {
        return Ok(0.0);
    }
    let t_last = tr.snapshots.last().map_or(0.0, |s| s.t);
    let start = 0.75 * t_last;
    let mut sup = 0.0f64;
    for (i, a) in tr.snapshots.iter().enumerate() {
        if a.t < start {
            continue;
        }
        for b in tr.snapshots[i + 1..].iter() {
            if b.t - a.t > mu0 + 1e-12 {
                break;
            }
            let d = b.field.sub(&a.field);
            sup = sup.max(lq_norm(&tr.problem.grid, d.values(), q));
        }
    }
    Ok(sup)
}
