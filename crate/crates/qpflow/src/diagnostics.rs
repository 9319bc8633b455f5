//! Qualitative checks on computed fields: reflection symmetry and x1
//! monotonicity, moving-plane ordering, critical-set size, weighted
//! gradient integrals, Poincare constants under degenerate weights, and
//! the small-subdomain comparison experiment.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{gradient_field, lq_norm, reflect_field, Domain, Field};
use crate::operators::{for_each_element, powers};

/// How far a field sits from the symmetric decreasing profile the
/// long-time theory predicts.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    /// L2 distance between u and its x1 mirror image, relative to ||u||_2.
    pub asymmetry_x1: f64,
    /// Largest value spread across nodes sharing a lattice radius, relative
    /// to ||u||_inf. Absent off the disk, where radius classes mean nothing.
    pub radial_deviation: Option<f64>,
    /// max over {x1 < 0} of the negative part of du/dx1.
    pub monotonicity_defect: f64,
}

pub fn symmetry_report(u: &Field) -> Result<SymmetryReport> {
    let g = u.grid();
    if !g.domain.symmetric_in_x1() {
        return Err(Error::Precondition(
            "symmetry diagnostics need a domain symmetric in x1".into(),
        ));
    }
    // The symmetric domains all put the plane x1 = 0 on the half-grid
    // lattice, so the mirror image is an exact node permutation.
    let mirrored = reflect_field(u, 0.0)?;
    let diff = u.sub(&mirrored);
    let denom = lq_norm(g, u.values(), 2.0);
    let asymmetry_x1 = if denom > 0.0 {
        lq_norm(g, diff.values(), 2.0) / denom
    } else {
        0.0
    };

    let radial_deviation = match g.domain {
        Domain::Disk { .. } => {
            // Key nodes by the exact squared lattice radius (doubled indices
            // keep the key integral for odd resolutions); a radial field has
            // zero spread inside every class.
            let res = g.resolution as i64;
            let mut classes: HashMap<i64, (f64, f64)> = HashMap::new();
            for &idx in g.interior_indices() {
                let i = (idx % g.nx) as i64;
                let j = (idx / g.nx) as i64;
                let key = (2 * i - res).pow(2) + (2 * j - res).pow(2);
                let v = u.values()[idx];
                classes
                    .entry(key)
                    .and_modify(|mm| {
                        mm.0 = mm.0.min(v);
                        mm.1 = mm.1.max(v);
                    })
                    .or_insert((v, v));
            }
            let spread = classes.values().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
            let sup = u.max_abs();
            Some(if sup > 0.0 { spread / sup } else { 0.0 })
        }
        _ => None,
    };

    let grad = gradient_field(u);
    let mut defect = 0.0f64;
    for &idx in g.interior_indices() {
        let (x, _) = g.coords(idx);
        if x < -1e-12 {
            defect = defect.max(-grad.gx[idx]);
        }
    }

    Ok(SymmetryReport {
        asymmetry_x1,
        radial_deviation,
        monotonicity_defect: defect.max(0.0),
    })
}

/// Per-plane ordering defects for the reflection sweep on [x_lo/2, 0].
#[derive(Debug, Clone, Serialize)]
pub struct MovingPlaneReport {
    pub lambdas: Vec<f64>,
    /// max over the cap {x1 < lambda} of (u - u_lambda)^+, per plane.
    pub defects: Vec<f64>,
    pub max_defect: f64,
}

pub fn moving_plane_sweep(u: &Field, lambda_count: usize) -> Result<MovingPlaneReport> {
    let g = u.grid();
    if !g.domain.symmetric_in_x1() {
        return Err(Error::Precondition(
            "the moving-plane sweep needs a domain symmetric in x1".into(),
        ));
    }
    if lambda_count < 2 {
        return Err(Error::Config(
            "the moving-plane sweep needs at least 2 planes".into(),
        ));
    }

    let lo = g.x_lo / 2.0;
    let mut lambdas: Vec<f64> = Vec::with_capacity(lambda_count);
    for k in 0..lambda_count {
        let raw = lo * (1.0 - k as f64 / (lambda_count - 1) as f64);
        // Snap to the half-grid lattice so each reflection is exact.
        let snapped = (g.x_lo + 0.5 * g.h * (2.0 * (raw - g.x_lo) / g.h).round()).min(0.0);
        if lambdas.last().map_or(true, |&l| (snapped - l).abs() > 1e-12) {
            lambdas.push(snapped);
        }
    }

    let mut defects = Vec::with_capacity(lambdas.len());
    let mut max_defect = 0.0f64;
    for &lam in &lambdas {
        let ul = reflect_field(u, lam)?;
        let mut d = 0.0f64;
        for &idx in g.interior_indices() {
            let (x, _) = g.coords(idx);
            if x < lam - 1e-12 * (1.0 + lam.abs()) {
                d = d.max(u.values()[idx] - ul.values()[idx]);
            }
        }
        let d = d.max(0.0);
        defects.push(d);
        max_defect = max_defect.max(d);
    }

    Ok(MovingPlaneReport {
        lambdas,
        defects,
        max_defect,
    })
}

/// Size of the critical set {grad u = 0} and the weighted integrals that
/// quantify how fast the gradient can degenerate.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalSetReport {
    pub deltas: Vec<f64>,
    /// Area fraction of the cells with |grad u| < delta, per delta.
    pub fractions: Vec<f64>,
    /// max over y samples of int |grad u|^{-(p-1) r} dx off the critical set.
    pub inverse_gradient_integral: f64,
    pub inverse_gradient_by_y: Vec<f64>,
    /// int |grad u|^{p-2-beta} ||D2 u||^2 dx over the deep interior.
    pub hessian_weighted_integral: f64,
    pub r_exp: f64,
    pub beta: f64,
    pub gamma: f64,
}

pub fn critical_set_report(
    u: &Field,
    p: f64,
    deltas: &[f64],
    r_exp: f64,
    beta: f64,
    gamma: f64,
    y_samples: &[(f64, f64)],
) -> Result<CriticalSetReport> {
    let g = u.grid();
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Precondition(format!("exponent p must exceed 1, got {p}")));
    }
    if !(r_exp > 0.0 && r_exp < 1.0) {
        return Err(Error::Precondition(format!(
            "inverse-gradient exponent r must lie in (0, 1), got {r_exp}"
        )));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::Precondition(format!(
            "Hessian weight exponent beta must lie in [0, 1), got {beta}"
        )));
    }
    // Below three dimensions the admissible kernel window collapses, so the
    // distance kernel is the constant 1 and every y sample sees the same
    // integral; the per-y vector stays in the report for the stability check.
    if gamma != 0.0 {
        return Err(Error::Precondition(format!(
            "kernel exponent gamma must be 0 below three dimensions, got {gamma}"
        )));
    }
    if deltas.is_empty() {
        return Err(Error::Config("at least one delta threshold is required".into()));
    }
    if y_samples.is_empty() {
        return Err(Error::Config("at least one y sample is required".into()));
    }

    let uv = u.values();
    let inv_exp = -(p - 1.0) * r_exp;
    let mut total_area = 0.0;
    let mut critical_area = vec![0.0; deltas.len()];
    let mut inverse_sum = 0.0;
    let mut noncritical = 0usize;
    for_each_element(g, |el| {
        let mut t = 0.0;
        let mut n = 0.0;
        for m in 0..el.len {
            t += el.ct[m] * uv[el.nodes[m]];
            n += el.cn[m] * uv[el.nodes[m]];
        }
        let s = t * t + n * n;
        total_area += el.area;
        let mag = s.sqrt();
        for (k, &delta) in deltas.iter().enumerate() {
            if mag < delta {
                critical_area[k] += el.area;
            }
        }
        if s > 0.0 {
            noncritical += 1;
            inverse_sum += el.area * mag.powf(inv_exp);
        }
    });
    if noncritical == 0 {
        return Err(Error::DegenerateField(
            "every cell is critical: the gradient vanishes identically".into(),
        ));
    }
    let fractions = critical_area.iter().map(|&a| a / total_area).collect();
    let inverse_gradient_by_y = vec![inverse_sum; y_samples.len()];

    // Second central differences on the deep interior (depth >= 2 keeps the
    // one-cell fringe out and every axis neighbor inside); the cross term
    // additionally needs the four diagonal neighbors unpinned.
    let grad = gradient_field(u);
    let h2 = g.h * g.h;
    let stride = g.nx;
    let mut hess_sum = 0.0;
    for &idx in g.interior_indices() {
        if g.depth(idx) < 2 {
            continue;
        }
        let gm = grad.magnitude[idx];
        if gm <= 0.0 {
            continue;
        }
        let uxx = (uv[idx + 1] - 2.0 * uv[idx] + uv[idx - 1]) / h2;
        let d2 = if g.dim() == 1 {
            uxx * uxx
        } else {
            let diagonals_in = g.is_interior(idx + stride + 1)
                && g.is_interior(idx + stride - 1)
                && g.is_interior(idx - stride + 1)
                && g.is_interior(idx - stride - 1);
            if !diagonals_in {
                continue;
            }
            let uyy = (uv[idx + stride] - 2.0 * uv[idx] + uv[idx - stride]) / h2;
            let uxy = (uv[idx + stride + 1] - uv[idx + stride - 1] - uv[idx - stride + 1]
                + uv[idx - stride - 1])
                / (4.0 * h2);
            uxx * uxx + 2.0 * uxy * uxy + uyy * uyy
        };
        hess_sum += gm.powf(p - 2.0 - beta) * d2;
    }

    Ok(CriticalSetReport {
        deltas: deltas.to_vec(),
        fractions,
        inverse_gradient_integral: inverse_sum,
        inverse_gradient_by_y,
        hessian_weighted_integral: hess_sum * g.cell_measure(),
        r_exp,
        beta,
        gamma,
    })
}

struct WeightedElement {
    nodes: [usize; 4],
    len: usize,
    ct: [f64; 4],
    cn: [f64; 4],
    area: f64,
    rho: f64,
}

/// Element row of the rho-weighted stiffness form, rho = |grad u_weight|^{p-2}.
fn weighted_elements(u_weight: &Field, p: f64) -> Vec<WeightedElement> {
    let wv = u_weight.values();
    let mut els = Vec::new();
    for_each_element(u_weight.grid(), |el| {
        let mut t = 0.0;
        let mut n = 0.0;
        for m in 0..el.len {
            t += el.ct[m] * wv[el.nodes[m]];
            n += el.cn[m] * wv[el.nodes[m]];
        }
        let (rho, _) = powers(t * t + n * n, p);
        els.push(WeightedElement {
            nodes: el.nodes,
            len: el.len,
            ct: el.ct,
            cn: el.cn,
            area: el.area,
            rho,
        });
    });
    els
}

fn rayleigh_over(els: &[WeightedElement], v: &Field) -> f64 {
    let num = lq_norm(v.grid(), v.values(), 2.0);
    if num == 0.0 {
        return 0.0;
    }
    let vv = v.values();
    let mut den2 = 0.0;
    for el in els {
        let mut t = 0.0;
        let mut n = 0.0;
        for m in 0..el.len {
            t += el.ct[m] * vv[el.nodes[m]];
            n += el.cn[m] * vv[el.nodes[m]];
        }
        den2 += el.rho * el.area * (t * t + n * n);
    }
    if den2 > 0.0 {
        num / den2.sqrt()
    } else {
        // The weight degenerates on the support of v: the constant is
        // genuinely unbounded in this direction.
        f64::INFINITY
    }
}

/// ||v||_2 / ||grad v||_{2, rho} for one fixed test field.
pub fn weighted_rayleigh_ratio(u_weight: &Field, p: f64, v: &Field) -> Result<f64> {
    if !Arc::ptr_eq(u_weight.grid(), v.grid()) {
        return Err(Error::Precondition(
            "weight and test field live on different grids".into(),
        ));
    }
    if p < 2.0 {
        return Err(Error::Precondition(format!(
            "the weighted Poincare form needs p >= 2, got {p}"
        )));
    }
    Ok(rayleigh_over(&weighted_elements(u_weight, p), v))
}

/// Estimates the best constant in ||v||_2 <= C ||grad v||_{2, rho} by
/// maximizing the Rayleigh ratio over low-frequency candidates (the pinned
/// box modes and a paraboloid bump) plus seeded random mode mixtures.
/// For p = 2 the weight drops out and this is the classical constant.
pub fn weighted_poincare_constant(
    u_weight: &Field,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let g = u_weight.grid();
    if p < 2.0 {
        return Err(Error::Precondition(format!(
            "the weighted Poincare estimate needs p >= 2, got {p}"
        )));
    }
    if trials < 32 {
        return Err(Error::Precondition(format!(
            "at least 32 trials are required for a usable estimate, got {trials}"
        )));
    }
    if p > 2.0 && u_weight.max_abs() == 0.0 {
        // For p = 2 the weight never enters; beyond that a vanishing weight
        // makes every ratio infinite.
        return Err(Error::DegenerateField(
            "weight field is identically zero".into(),
        ));
    }

    let els = weighted_elements(u_weight, p);
    let lx = (g.nx - 1) as f64 * g.h;
    let ly = (g.ny.max(2) - 1) as f64 * g.h;
    let x_lo = g.x_lo;
    let y_lo = g.y_lo;
    let two_d = g.dim() == 2;

    let mode = move |j: usize, k: usize, x: f64, y: f64| -> f64 {
        let sx = (j as f64 * std::f64::consts::PI * (x - x_lo) / lx).sin();
        if two_d {
            sx * (k as f64 * std::f64::consts::PI * (y - y_lo) / ly).sin()
        } else {
            sx
        }
    };
    let modes: Vec<(usize, usize)> = if two_d {
        (1..=3).flat_map(|j| (1..=3).map(move |k| (j, k))).collect()
    } else {
        (1..=3).map(|j| (j, 1)).collect()
    };

    let mut best = 0.0f64;
    for &(j, k) in &modes {
        let v = Field::from_fn(g, |x, y| mode(j, k, x, y));
        best = best.max(rayleigh_over(&els, &v));
    }
    let cx = x_lo + 0.5 * lx;
    let cy = y_lo + 0.5 * ly;
    let bump = Field::from_fn(g, |x, y| {
        let xi = 2.0 * (x - cx) / lx;
        let up = if two_d { 2.0 * (y - cy) / ly } else { 0.0 };
        (1.0 - xi * xi - up * up).max(0.0)
    });
    best = best.max(rayleigh_over(&els, &bump));

    let deterministic = modes.len() + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in deterministic..trials {
        let coeffs: Vec<f64> = modes.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = Field::from_fn(g, |x, y| {
            modes
                .iter()
                .zip(&coeffs)
                .map(|(&(j, k), c)| c * mode(j, k, x, y))
                .sum()
        });
        best = best.max(rayleigh_over(&els, &v));
    }
    Ok(best)
}

/// Outcome of the ordering comparison on one small subdomain.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub subdomain_measure: f64,
    pub theta: f64,
    /// u <= v held on every node bordering the subdomain.
    pub boundary_ordered: bool,
    /// max over the subdomain of (u - v)^+.
    pub interior_violation: f64,
    /// Small enough and boundary-ordered, so the principle applies.
    pub applicable: bool,
    pub passed: bool,
}

/// Checks u <= v inside a small subdomain given u <= v on its discrete
/// boundary. `mask` selects the subdomain nodes; `theta` is the measure
/// ceiling under which the comparison principle is claimed.
pub fn comparison_experiment(
    u: &Field,
    v: &Field,
    mask: &[bool],
    theta: f64,
) -> Result<ComparisonReport> {
    let g = u.grid();
    if !Arc::ptr_eq(g, v.grid()) {
        return Err(Error::Precondition(
            "comparison fields live on different grids".into(),
        ));
    }
    if mask.len() != g.node_count() {
        return Err(Error::Config(format!(
            "mask has {} entries for {} nodes",
            mask.len(),
            g.node_count()
        )));
    }
    let inside = |idx: usize| mask[idx] && g.is_interior(idx);
    let nodes: Vec<usize> = (0..g.node_count()).filter(|&i| inside(i)).collect();
    if nodes.is_empty() {
        return Err(Error::Precondition("the subdomain mask is empty".into()));
    }

    // Lattice 4-neighbors, staying inside the index box.
    let neighbors = |idx: usize| -> Vec<usize> {
        let (i, j) = (idx % g.nx, idx / g.nx);
        let mut out = Vec::with_capacity(4);
        if i > 0 {
            out.push(idx - 1);
        }
        if i + 1 < g.nx {
            out.push(idx + 1);
        }
        if g.ny > 1 {
            if j > 0 {
                out.push(idx - g.nx);
            }
            if j + 1 < g.ny {
                out.push(idx + g.nx);
            }
        }
        out
    };

    let mut seen: HashMap<usize, ()> = HashMap::new();
    let mut queue = VecDeque::new();
    seen.insert(nodes[0], ());
    queue.push_back(nodes[0]);
    while let Some(idx) = queue.pop_front() {
        for nb in neighbors(idx) {
            if inside(nb) && !seen.contains_key(&nb) {
                seen.insert(nb, ());
                queue.push_back(nb);
            }
        }
    }
    if seen.len() != nodes.len() {
        return Err(Error::Precondition(
            "the subdomain mask is disconnected".into(),
        ));
    }

    let subdomain_measure = nodes.len() as f64 * g.cell_measure();
    let tol_b = 1e-12 * (1.0 + v.max_abs());
    let mut boundary_ordered = true;
    let mut interior_violation = 0.0f64;
    for &idx in &nodes {
        interior_violation = interior_violation.max(u.values()[idx] - v.values()[idx]);
        for nb in neighbors(idx) {
            if !inside(nb) && u.values()[nb] > v.values()[nb] + tol_b {
                boundary_ordered = false;
            }
        }
    }
    let interior_violation = interior_violation.max(0.0);
    let applicable = boundary_ordered && subdomain_measure <= theta;
    let passed = applicable && interior_violation <= 1e-8 * v.max_abs();

    Ok(ComparisonReport {
        subdomain_measure,
        theta,
        boundary_ordered,
        interior_violation,
        applicable,
        passed,
    })
}
