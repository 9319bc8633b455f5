//! Direct solves of the stationary problem
//!   -div(a(z) |grad z|^{p-2} grad z) + (a'(z)/p)|grad z|^p = f(z),  z|_bd = 0
//! by damped Newton with continuation in the gradient regularization, used
//! to cross-validate omega-limits and the symmetry/uniqueness diagnostics.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{dot_h, Domain, Field, Grid};
use crate::linsolve::factor_with_shift;
use crate::operators::{MatrixKind, Problem, RegularizationParams};

#[derive(Debug, Clone)]
pub struct StationaryResult {
    pub z: Field,
    pub residual_norm: f64,
    pub iterations: usize,
    pub eps_path: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarySummary {
    pub residual_norm: f64,
    pub iterations: usize,
    pub eps_path: Vec<f64>,
    pub converged: bool,
}

impl StationaryResult {
    pub fn summary(&self) -> StationarySummary {
        StationarySummary {
            residual_norm: self.residual_norm,
            iterations: self.iterations,
            eps_path: self.eps_path.clone(),
            converged: self.converged,
        }
    }
}

fn norm_h(pr: &Problem, f: &Field) -> f64 {
    dot_h(&pr.grid, f.values(), f.values()).sqrt()
}

/// Regularization stages: a single solve at the target, or four geometric
/// steps down from 1e-2 when the target sits below it (degenerate p).
/// Continuation is a cold-start aid; a nonzero guess (a warm start from a
/// coarser grid or a nearby trajectory) goes straight to the target.
fn continuation_stages(p: f64, target: f64, warm: bool) -> Vec<f64> {
    if warm || p == 2.0 || target >= 1e-2 {
        return vec![target];
    }
    let start: f64 = 1e-2;
    let ratio = (target / start).powf(1.0 / 3.0);
    (0..4).map(|k| start * ratio.powi(k)).collect()
}

/// Damped Newton on the residual, nonnegativity kept by clipping, with an
/// energy-descent fallback when the Newton direction stops paying off.
/// Non-convergence is reported in the result, not as an error.
pub fn solve_stationary(
    problem: &Problem,
    guess: &Field,
    tol: f64,
) -> Result<StationaryResult> {
    if !Arc::ptr_eq(guess.grid(), &problem.grid) {
        return Err(Error::Precondition("guess lives on another grid".into()));
    }
    if !guess.is_finite() {
        return Err(Error::Eval("guess is not finite".into()));
    }
    if guess.min_value() < -1e-12 * (1.0 + guess.max_abs()) {
        return Err(Error::Precondition(format!(
            "guess must be nonnegative, min {}",
            guess.min_value()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }

    let stages = continuation_stages(problem.p, problem.reg.eps, guess.max_abs() > 0.0);
    let mut z = guess.clip_min(0.0);
    let mut iterations = 0usize;
    let mut eps_path = Vec::new();
    let mut residual_norm = f64::INFINITY;
    let max_iter_per_stage = 80usize;

    for (si, &eps) in stages.iter().enumerate() {
        let pr = problem.with_regularization(RegularizationParams::fixed(eps))?;
        eps_path.push(eps);
        let last_stage = si + 1 == stages.len();
        let mut g = pr.residual(&z);
        let mut gn = norm_h(&pr, &g);
        let mut ok = gn <= tol;
        for _ in 0..max_iter_per_stage {
            if gn <= tol {
                ok = true;
                break;
            }
            iterations += 1;
            let mut mat = pr.new_matrix();
            pr.assemble_matrix(&z, MatrixKind::Newton, true, &mut mat);
            let factor = factor_with_shift(&mat, 0.0)?;
            let gi = pr.grid.gather_interior(g.values());
            let neg: Vec<f64> = gi.iter().map(|x| -x).collect();
            let delta = pr.grid.scatter_interior(&factor.solve(&neg));

            let mut advanced = false;
            let mut alpha = 1.0;
            for _ in 0..25 {
                let cand = z.axpy(alpha, &delta).clip_min(0.0);
                let gc = pr.residual(&cand);
                let gcn = norm_h(&pr, &gc);
                if gcn.is_finite() && gcn <= (1.0 - 1e-4 * alpha) * gn {
                    z = cand;
                    g = gc;
                    gn = gcn;
                    advanced = true;
                    break;
                }
                alpha *= 0.5;
            }
            if advanced {
                continue;
            }
            // Newton stalled: backtracking descent on the energy itself.
            let e = pr.energy(&z);
            let mut alpha = 1.0 / (1.0 + gn);
            for _ in 0..40 {
                let cand = z.axpy(-alpha, &g).clip_min(0.0);
                if pr.energy(&cand) <= e - 1e-4 * alpha * gn * gn {
                    z = cand;
                    g = pr.residual(&z);
                    gn = norm_h(&pr, &g);
                    advanced = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !advanced {
                break;
            }
        }
        residual_norm = gn;
        if !ok && gn > tol {
            // a failed intermediate stage still hands its iterate onward;
            // only the final stage decides convergence
            if last_stage {
                return Ok(StationaryResult {
                    z,
                    residual_norm,
                    iterations,
                    eps_path,
                    converged: false,
                });
            }
        }
    }
    Ok(StationaryResult {
        converged: residual_norm <= tol,
        z,
        residual_norm,
        iterations,
        eps_path,
    })
}

/// Fresh residual norm of a candidate stationary state, with a Dirichlet
/// trace check: values on the interior fringe must be small next to the
/// field's scale, otherwise the state does not vanish at the boundary.
pub fn verify_stationary(problem: &Problem, z: &Field) -> Result<f64> {
    if !Arc::ptr_eq(z.grid(), &problem.grid) {
        return Err(Error::Precondition("field lives on another grid".into()));
    }
    let scale = z.max_abs();
    if scale > 0.0 {
        let mut trace = 0.0f64;
        for &idx in problem.grid.interior_indices() {
            if problem.grid.depth(idx) == 1 {
                trace = trace.max(z.values()[idx].abs());
            }
        }
        if trace > 0.5 * scale {
            return Err(Error::BoundaryViolation { trace, scale });
        }
    }
    let g = problem.residual(z);
    Ok(norm_h(problem, &g))
}

/// Radial solution of -div(|grad u|^{p-2} grad u) = 1 on a disk of radius R:
/// u(r) = ((p-1)/p) (1/2)^{1/(p-1)} (R^{p/(p-1)} - r^{p/(p-1)}).
pub fn exact_p_torsion(grid: &Arc<Grid>, p: f64) -> Result<Field> {
    let Domain::Disk { radius } = grid.domain else {
        return Err(Error::Precondition(format!(
            "p-torsion oracle needs a disk, got {}",
            grid.domain
        )));
    };
    if !(p > 1.0) {
        return Err(Error::Precondition(format!("p must exceed 1, got {p}")));
    }
    let alpha = p / (p - 1.0);
    let c = (p - 1.0) / p * 0.5f64.powf(1.0 / (p - 1.0));
    Ok(Field::from_fn(grid, |x, y| {
        let r = (x * x + y * y).sqrt();
        c * (radius.powf(alpha) - r.powf(alpha))
    }))
}
