//! Discrete energy, residual, and Hessian for
//!   E(u) = (1/p) int a(u) (|grad u|^2 + eps^2)^{p/2} - int F(u).
//!
//! Space discretization: piecewise-linear elements on the uniform grid. In
//! 1D the elements are the intervals between nodes. In 2D each cell is split
//! into four triangles meeting at the cell center; the center value is the
//! average of the four corners, so it is not an unknown and the discrete
//! operator inherits the mirror symmetries of the lattice. The reaction is
//! integrated nodally. The residual is exactly the gradient of the discrete
//! energy divided by the cell measure, which the tests pin down.

use std::sync::Arc;

use crate::coefficients::{CoefficientModel, NonlinearityModel};
use crate::error::{Error, Result};
use crate::grid::{dot_h, Field, Grid};
use crate::linsolve::SkylineMatrix;

/// Gradient regularization magnitude. Zero is allowed only for p >= 2;
/// the default scales with the number of cells across the domain so that
/// eps stays far below resolvable gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationParams {
    pub eps: f64,
}

impl RegularizationParams {
    pub fn none() -> Self {
        RegularizationParams { eps: 0.0 }
    }

    pub fn fixed(eps: f64) -> Self {
        RegularizationParams { eps }
    }

    pub fn default_for(p: f64, grid: &Grid) -> Self {
        if p == 2.0 {
            RegularizationParams { eps: 0.0 }
        } else {
            RegularizationParams {
                eps: 1e-6 * grid.domain.extent() / grid.h,
            }
        }
    }
}

/// A grid plus the coefficient pair (a, f) and the regularization, checked
/// for mutual consistency once so the hot loops can assume it.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Arc<Grid>,
    pub coeff: CoefficientModel,
    pub nonlin: NonlinearityModel,
    pub reg: RegularizationParams,
    pub p: f64,
}

impl Problem {
    pub fn new(
        grid: Arc<Grid>,
        coeff: CoefficientModel,
        nonlin: NonlinearityModel,
        reg: RegularizationParams,
    ) -> Result<Problem> {
        let p = nonlin.p;
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Config(format!("exponent p must exceed 1, got {p}")));
        }
        if nonlin.n as usize != grid.dim() {
            return Err(Error::Config(format!(
                "reaction model is set in dimension {}, grid is {}-dimensional",
                nonlin.n,
                grid.dim()
            )));
        }
        if !(reg.eps >= 0.0) || !reg.eps.is_finite() {
            return Err(Error::Config(format!("bad regularization {}", reg.eps)));
        }
        if p < 2.0 && reg.eps == 0.0 {
            return Err(Error::Config(
                "p < 2 needs a positive gradient regularization".into(),
            ));
        }
        if !(coeff.eta > 0.0) {
            return Err(Error::Config(format!(
                "diffusivity floor eta must be positive, got {}",
                coeff.eta
            )));
        }
        Ok(Problem {
            grid,
            coeff,
            nonlin,
            reg,
            p,
        })
    }

    pub fn with_nonlinearity(&self, nonlin: NonlinearityModel) -> Result<Problem> {
        Problem::new(
            Arc::clone(&self.grid),
            self.coeff.clone(),
            nonlin,
            self.reg,
        )
    }

    pub fn with_regularization(&self, reg: RegularizationParams) -> Result<Problem> {
        Problem::new(
            Arc::clone(&self.grid),
            self.coeff.clone(),
            self.nonlin.clone(),
            reg,
        )
    }
}

/// One linear element: an interval in 1D (len = 2), a cell triangle in 2D
/// (len = 4, coefficients over the cell corners). ct and cn are the two
/// orthogonal gradient components, cm the element mean, all pre-scaled.
pub(crate) struct Element {
    pub(crate) nodes: [usize; 4],
    pub(crate) len: usize,
    pub(crate) ct: [f64; 4],
    pub(crate) cn: [f64; 4],
    pub(crate) cm: [f64; 4],
    pub(crate) area: f64,
}

const CT: [[f64; 4]; 4] = [
    [-1.0, 1.0, 0.0, 0.0],
    [0.0, -1.0, 1.0, 0.0],
    [0.0, 0.0, -1.0, 1.0],
    [1.0, 0.0, 0.0, -1.0],
];
const CN: [[f64; 4]; 4] = [
    [-1.0, -1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0, -1.0],
];
const CM: [[f64; 4]; 4] = [
    [5.0, 5.0, 1.0, 1.0],
    [1.0, 5.0, 5.0, 1.0],
    [1.0, 1.0, 5.0, 5.0],
    [5.0, 1.0, 1.0, 5.0],
];

pub(crate) fn for_each_element(grid: &Grid, mut visit: impl FnMut(&Element)) {
    let h = grid.h;
    if grid.dim() == 1 {
        let mut el = Element {
            nodes: [0; 4],
            len: 2,
            ct: [-1.0 / h, 1.0 / h, 0.0, 0.0],
            cn: [0.0; 4],
            cm: [0.5, 0.5, 0.0, 0.0],
            area: h,
        };
        for i in 0..grid.nx - 1 {
            if !grid.is_interior(i) && !grid.is_interior(i + 1) {
                continue;
            }
            el.nodes = [i, i + 1, 0, 0];
            visit(&el);
        }
        return;
    }
    let area = 0.25 * h * h;
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            let sw = j * grid.nx + i;
            let corners = [sw, sw + 1, sw + grid.nx + 1, sw + grid.nx];
            if !corners.iter().any(|&c| grid.is_interior(c)) {
                continue;
            }
            for k in 0..4 {
                let mut el = Element {
                    nodes: corners,
                    len: 4,
                    ct: [0.0; 4],
                    cn: [0.0; 4],
                    cm: [0.0; 4],
                    area,
                };
                for m in 0..4 {
                    el.ct[m] = CT[k][m] / h;
                    el.cn[m] = CN[k][m] / (2.0 * h);
                    el.cm[m] = CM[k][m] / 12.0;
                }
                visit(&el);
            }
        }
    }
}

/// (w, sp2) = (s^{(p-2)/2}, s^{p/2}) with the s -> 0 limits that keep
/// w * gradient finite for every p > 1.
#[inline]
pub(crate) fn powers(s: f64, p: f64) -> (f64, f64) {
    if p == 2.0 {
        (1.0, s)
    } else if s > 0.0 {
        let w = s.powf(0.5 * p - 1.0);
        (w, w * s)
    } else {
        (0.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyBreakdown {
    pub gradient: f64,
    pub reaction: f64,
    pub total: f64,
}

use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DirectionalDerivative {
    /// int a(u) (|grad u|^2 + eps^2)^{(p-2)/2} grad u . grad v
    pub diffusion: f64,
    /// int (a'(u)/p) (|grad u|^2 + eps^2)^{p/2} v
    pub lower_order: f64,
    /// -int f(u) v
    pub reaction: f64,
    pub total: f64,
}

impl Problem {
    pub fn energy_parts(&self, u: &Field) -> EnergyBreakdown {
        assert!(Arc::ptr_eq(u.grid(), &self.grid));
        let p = self.p;
        let e2 = self.reg.eps * self.reg.eps;
        let mut grad = 0.0;
        for_each_element(&self.grid, |el| {
            let mut t = 0.0;
            let mut nn = 0.0;
            let mut um = 0.0;
            for m in 0..el.len {
                let v = u.values()[el.nodes[m]];
                t += el.ct[m] * v;
                nn += el.cn[m] * v;
                um += el.cm[m] * v;
            }
            let s = t * t + nn * nn + e2;
            let (_, sp2) = powers(s, p);
            grad += el.area / p * self.coeff.a(um) * sp2;
        });
        let mut reaction = 0.0;
        for &idx in self.grid.interior_indices() {
            reaction += self.nonlin.big_f(u.values()[idx]);
        }
        reaction *= self.grid.cell_measure();
        EnergyBreakdown {
            gradient: grad,
            reaction,
            total: grad - reaction,
        }
    }

    pub fn energy(&self, u: &Field) -> f64 {
        self.energy_parts(u).total
    }

    /// Gradient of the discrete energy in the L^2_h metric: the discrete
    /// realization of -div(a |grad u|^{p-2} grad u) + (a'/p)|grad u|^p - f(u).
    pub fn residual(&self, u: &Field) -> Field {
        assert!(Arc::ptr_eq(u.grid(), &self.grid));
        let p = self.p;
        let e2 = self.reg.eps * self.reg.eps;
        let mut raw = vec![0.0; self.grid.node_count()];
        for_each_element(&self.grid, |el| {
            let mut t = 0.0;
            let mut nn = 0.0;
            let mut um = 0.0;
            for m in 0..el.len {
                let v = u.values()[el.nodes[m]];
                t += el.ct[m] * v;
                nn += el.cn[m] * v;
                um += el.cm[m] * v;
            }
            let s = t * t + nn * nn + e2;
            let (w, sp2) = powers(s, p);
            let aw = self.coeff.a(um) * w;
            let low = self.coeff.a1(um) * sp2 / p;
            for m in 0..el.len {
                raw[el.nodes[m]] +=
                    el.area * (aw * (t * el.ct[m] + nn * el.cn[m]) + low * el.cm[m]);
            }
        });
        let inv = 1.0 / self.grid.cell_measure();
        for &idx in self.grid.interior_indices() {
            raw[idx] = raw[idx] * inv - self.nonlin.f(u.values()[idx]);
        }
        Field::from_raw(&self.grid, raw)
    }

    /// d/dtau E(u + tau v) at tau = 0, reported term by term. Computed from
    /// its own element loop, not by dotting the residual.
    pub fn directional_derivative(&self, u: &Field, v: &Field) -> DirectionalDerivative {
        assert!(Arc::ptr_eq(u.grid(), &self.grid));
        assert!(Arc::ptr_eq(v.grid(), &self.grid));
        let p = self.p;
        let e2 = self.reg.eps * self.reg.eps;
        let mut diffusion = 0.0;
        let mut lower = 0.0;
        for_each_element(&self.grid, |el| {
            let mut t = 0.0;
            let mut nn = 0.0;
            let mut um = 0.0;
            let mut tv = 0.0;
            let mut nv = 0.0;
            let mut mv = 0.0;
            for m in 0..el.len {
                let uu = u.values()[el.nodes[m]];
                let vv = v.values()[el.nodes[m]];
                t += el.ct[m] * uu;
                nn += el.cn[m] * uu;
                um += el.cm[m] * uu;
                tv += el.ct[m] * vv;
                nv += el.cn[m] * vv;
                mv += el.cm[m] * vv;
            }
            let s = t * t + nn * nn + e2;
            let (w, sp2) = powers(s, p);
            diffusion += el.area * self.coeff.a(um) * w * (t * tv + nn * nv);
            lower += el.area * self.coeff.a1(um) * sp2 / p * mv;
        });
        let mut reaction = 0.0;
        for &idx in self.grid.interior_indices() {
            reaction -= self.nonlin.f(u.values()[idx]) * v.values()[idx];
        }
        reaction *= self.grid.cell_measure();
        DirectionalDerivative {
            diffusion,
            lower_order: lower,
            reaction,
            total: diffusion + lower + reaction,
        }
    }

    /// L^2_h pairing of the residual with v; equals the directional
    /// derivative up to floating-point reassociation.
    pub fn residual_pairing(&self, u: &Field, v: &Field) -> f64 {
        dot_h(&self.grid, self.residual(u).values(), v.values())
    }
}

/// Which linearization to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Full Jacobian of the residual.
    Newton,
    /// Only the frozen-weight diffusion a(u) s^{(p-2)/2} (grad ., grad .),
    /// the symmetric positive part used by the semi-implicit scheme.
    Frozen,
}

/// Skyline profile of the element stencil in interior ordering.
pub fn stiffness_profile(grid: &Grid) -> Vec<usize> {
    let m = grid.interior_count();
    let mut col_start: Vec<usize> = (0..m).collect();
    let mut touch = |a: usize, b: usize| {
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        if col_start[hi] > lo {
            col_start[hi] = lo;
        }
    };
    for_each_element(grid, |el| {
        for x in 0..el.len {
            for y in 0..x {
                if let (Some(a), Some(b)) = (
                    grid.interior_ordinal(el.nodes[x]),
                    grid.interior_ordinal(el.nodes[y]),
                ) {
                    touch(a, b);
                }
            }
        }
    });
    col_start
}

impl Problem {
    pub fn new_matrix(&self) -> SkylineMatrix {
        SkylineMatrix::new(stiffness_profile(&self.grid))
    }

    /// Assembles the Jacobian of the residual (or its frozen positive part)
    /// at u into `mat`, in interior ordering, residual scale. With
    /// `reaction` the nodal -f'(u) diagonal is included.
    pub fn assemble_matrix(
        &self,
        u: &Field,
        kind: MatrixKind,
        reaction: bool,
        mat: &mut SkylineMatrix,
    ) {
        assert!(Arc::ptr_eq(u.grid(), &self.grid));
        assert_eq!(mat.order(), self.grid.interior_count());
        mat.reset();
        let p = self.p;
        let eps = self.reg.eps;
        let e2 = eps * eps;
        let scale = 1.0 / self.grid.cell_measure();
        for_each_element(&self.grid, |el| {
            let mut t = 0.0;
            let mut nn = 0.0;
            let mut um = 0.0;
            for m in 0..el.len {
                let v = u.values()[el.nodes[m]];
                t += el.ct[m] * v;
                nn += el.cn[m] * v;
                um += el.cm[m] * v;
            }
            let s = t * t + nn * nn + e2;
            let (w, sp2) = powers(s, p);
            let a = self.coeff.a(um);
            // Curvature of the |grad|^p kernel along q = grad u; dropped in
            // the frozen matrix and, for p < 2, near the regularized floor
            // where it would fight the positive part (modified Newton).
            let mut c_q = 0.0;
            let mut c_qm = 0.0;
            let mut c_mm = 0.0;
            if kind == MatrixKind::Newton {
                let keep_q = p != 2.0
                    && s > 0.0
                    && !(p < 2.0 && t * t + nn * nn < 100.0 * e2);
                if keep_q {
                    c_q = a * (p - 2.0) * s.powf(0.5 * p - 2.0);
                }
                c_qm = self.coeff.a1(um) * w;
                c_mm = self.coeff.a2(um) * sp2 / p;
            }
            let f = el.area * scale;
            for x in 0..el.len {
                let Some(row) = self.grid.interior_ordinal(el.nodes[x]) else {
                    continue;
                };
                let qx = t * el.ct[x] + nn * el.cn[x];
                for y in 0..el.len {
                    let Some(col) = self.grid.interior_ordinal(el.nodes[y]) else {
                        continue;
                    };
                    if col > row {
                        continue;
                    }
                    let qy = t * el.ct[y] + nn * el.cn[y];
                    let mut v = a * w * (el.ct[x] * el.ct[y] + el.cn[x] * el.cn[y]);
                    v += c_q * qx * qy;
                    v += c_qm * (qx * el.cm[y] + el.cm[x] * qy);
                    v += c_mm * el.cm[x] * el.cm[y];
                    mat.add(row, col, f * v);
                }
            }
        });
        if reaction {
            for (ord, &idx) in self.grid.interior_indices().iter().enumerate() {
                mat.add_diag(ord, -self.nonlin.f1(u.values()[idx]));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain};
    use std::f64::consts::PI;

    fn problem_on(
        domain: Domain,
        res: usize,
        coeff: CoefficientModel,
        nonlin: NonlinearityModel,
        eps: f64,
    ) -> Problem {
        let grid = build_grid(domain, res).unwrap();
        Problem::new(grid, coeff, nonlin, RegularizationParams::fixed(eps)).unwrap()
    }

    fn unit_interval() -> Domain {
        Domain::Interval { x_lo: 0.0, x_hi: 1.0 }
    }

    #[test]
    fn sine_energy_matches_first_dirichlet_mode() {
        let pr = problem_on(
            unit_interval(),
            128,
            CoefficientModel::constant(),
            NonlinearityModel::zero(1, 2.0),
            0.0,
        );
        let u = Field::from_fn(&pr.grid, |x, _| (PI * x).sin());
        let e = pr.energy(&u);
        let exact = PI * PI / 4.0;
        assert!((e - exact).abs() / exact < 1e-3, "energy {e} vs {exact}");
    }

    #[test]
    fn quadratic_diffusivity_energy() {
        let pr = problem_on(
            unit_interval(),
            128,
            CoefficientModel::quadratic(),
            NonlinearityModel::zero(1, 2.0),
            0.0,
        );
        let u = Field::from_fn(&pr.grid, |x, _| (PI * x).sin());
        let e = pr.energy(&u);
        let exact = 5.0 * PI * PI / 16.0;
        assert!((e - exact).abs() / exact < 1e-3, "energy {e} vs {exact}");
    }

    #[test]
    fn product_sine_energy_in_two_dimensions() {
        let pr = problem_on(
            Domain::Rectangle {
                x_lo: 0.0,
                x_hi: 1.0,
                y_lo: 0.0,
                y_hi: 1.0,
            },
            128,
            CoefficientModel::constant(),
            NonlinearityModel::zero(2, 2.0),
            0.0,
        );
        let u = Field::from_fn(&pr.grid, |x, y| (PI * x).sin() * (PI * y).sin());
        let e = pr.energy(&u);
        // (1/2) int |grad u|^2 = (1/2)(pi^2/4 + pi^2/4)
        let exact = PI * PI / 4.0;
        assert!((e - exact).abs() / exact < 1e-3, "energy {e} vs {exact}");
    }

    #[test]
    fn sine_pairing_matches_the_rayleigh_value() {
        // d/dtau E(u + tau u) for u = sin(pi x): int pi^2 cos^2 = pi^2/2.
        let pr = problem_on(
            unit_interval(),
            128,
            CoefficientModel::constant(),
            NonlinearityModel::zero(1, 2.0),
            0.0,
        );
        let u = Field::from_fn(&pr.grid, |x, _| (PI * x).sin());
        let dd = pr.directional_derivative(&u, &u);
        let exact = PI * PI / 2.0;
        assert!((dd.total - exact).abs() / exact < 1e-3, "pairing {}", dd.total);
        assert!(dd.lower_order.abs() < 1e-14 && dd.reaction.abs() < 1e-14);
    }

    #[test]
    fn residual_center_values_match_the_classical_operator() {
        // -u'' for u = sin(pi x) is pi^2 at x = 1/2.
        let pr = problem_on(
            unit_interval(),
            128,
            CoefficientModel::constant(),
            NonlinearityModel::zero(1, 2.0),
            0.0,
        );
        let u = Field::from_fn(&pr.grid, |x, _| (PI * x).sin());
        let r = pr.residual(&u);
        let center = 64;
        let exact = PI * PI;
        assert!(
            (r.values()[center] - exact).abs() / exact < 1e-3,
            "got {}",
            r.values()[center]
        );

        // With a = 1 + u^2 the operator value at the center is 2 pi^2.
        let pr = problem_on(
            unit_interval(),
            128,
            CoefficientModel::quadratic(),
            NonlinearityModel::zero(1, 2.0),
            0.0,
        );
        let u = Field::from_fn(&pr.grid, |x, _| (PI * x).sin());
        let r = pr.residual(&u);
        let exact = 2.0 * PI * PI;
        assert!(
            (r.values()[center] - exact).abs() / exact < 1e-3,
            "got {}",
            r.values()[center]
        );
    }

    #[test]
    fn torsion_residual_vanishes_away_from_the_rim() {
        // u = (1 - r^2)/4 solves -lap u = 1; the stencil is exact on
        // quadratics, so the residual is rounding-level where the full
        // element neighborhood is interior (depth >= 3).
        let pr = problem_on(
            Domain::Disk { radius: 1.0 },
            64,
            CoefficientModel::constant(),
            NonlinearityModel::constant(1.0, 2, 2.0),
            0.0,
        );
        let u = Field::from_fn(&pr.grid, |x, y| 0.25 * (1.0 - x * x - y * y));
        let r = pr.residual(&u);
        let mut worst = 0.0f64;
        let mut checked = 0;
        for &idx in pr.grid.interior_indices() {
            if pr.grid.depth(idx) >= 3 {
                worst = worst.max(r.values()[idx].abs());
                checked += 1;
            }
        }
        assert!(checked > 2000);
        assert!(worst < 1e-9, "interior torsion residual {worst}");
    }

    fn wavy(pr: &Problem) -> (Field, Field) {
        let u = Field::from_fn(&pr.grid, |x, y| {
            (1.0 - x * x - y * y).max(0.0) * (1.0 + 0.4 * x - 0.2 * y)
        });
        let v = Field::from_fn(&pr.grid, |x, y| {
            (1.0 - x * x - y * y).max(0.0) * (x - 0.3 * y + 0.1)
        });
        (u, v)
    }

    #[test]
    fn directional_derivative_is_dual_to_the_residual() {
        let pr = problem_on(
            Domain::Disk { radius: 1.0 },
            32,
            CoefficientModel::quadratic(),
            NonlinearityModel::power(3.0, 2, 2.6).unwrap(),
            1e-4,
        );
        let (u, v) = wavy(&pr);
        let dd = pr.directional_derivative(&u, &v);
        let paired = pr.residual_pairing(&u, &v);
        let scale = 1.0 + dd.total.abs();
        assert!(
            (dd.total - paired).abs() < 1e-11 * scale,
            "duality gap {}",
            (dd.total - paired).abs()
        );
        let sum = dd.diffusion + dd.lower_order + dd.reaction;
        assert!((dd.total - sum).abs() <= 1e-14 * scale);
    }

    #[test]
    fn directional_derivative_matches_finite_differences() {
        let pr = problem_on(
            Domain::Disk { radius: 1.0 },
            24,
            CoefficientModel::quadratic(),
            NonlinearityModel::power(3.0, 2, 2.6).unwrap(),
            1e-4,
        );
        let (u, v) = wavy(&pr);
        let dd = pr.directional_derivative(&u, &v);
        let tau = 1e-5;
        let fd = (pr.energy(&u.axpy(tau, &v)) - pr.energy(&u.axpy(-tau, &v))) / (2.0 * tau);
        assert!(
            (fd - dd.total).abs() < 1e-6 * (1.0 + dd.total.abs()),
            "fd {fd} vs dd {}",
            dd.total
        );
    }

    #[test]
    fn hessian_is_the_jacobian_of_the_residual() {
        let pr = problem_on(
            Domain::Disk { radius: 1.0 },
            16,
            CoefficientModel::quadratic(),
            NonlinearityModel::power(3.0, 2, 2.6).unwrap(),
            1e-3,
        );
        let (u, w) = wavy(&pr);
        let mut mat = pr.new_matrix();
        pr.assemble_matrix(&u, MatrixKind::Newton, true, &mut mat);
        let wi = pr.grid.gather_interior(w.values());
        let hw = mat.matvec(&wi);
        let tau = 1e-6;
        let rp = pr.residual(&u.axpy(tau, &w));
        let rm = pr.residual(&u.axpy(-tau, &w));
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for (ord, &idx) in pr.grid.interior_indices().iter().enumerate() {
            let fd = (rp.values()[idx] - rm.values()[idx]) / (2.0 * tau);
            worst = worst.max((fd - hw[ord]).abs());
            scale = scale.max(fd.abs());
        }
        assert!(worst < 1e-4 * (1.0 + scale), "jacobian gap {worst} at scale {scale}");
    }

    #[test]
    fn frozen_matrix_equals_newton_for_the_heat_operator() {
        let pr = problem_on(
            unit_interval(),
            64,
            CoefficientModel::constant(),
            NonlinearityModel::zero(1, 2.0),
            0.0,
        );
        let u = Field::from_fn(&pr.grid, |x, _| x * (1.0 - x) * (2.0 + x));
        let mut a = pr.new_matrix();
        let mut b = pr.new_matrix();
        pr.assemble_matrix(&u, MatrixKind::Newton, false, &mut a);
        pr.assemble_matrix(&u, MatrixKind::Frozen, false, &mut b);
        let x: Vec<f64> = (0..a.order()).map(|i| (i as f64 * 0.1).sin()).collect();
        let ya = a.matvec(&x);
        let yb = b.matvec(&x);
        for (p, q) in ya.iter().zip(&yb) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn problem_validation_rejects_mismatches() {
        let grid = build_grid(Domain::Disk { radius: 1.0 }, 16).unwrap();
        let bad_dim = Problem::new(
            Arc::clone(&grid),
            CoefficientModel::constant(),
            NonlinearityModel::power(3.0, 3, 2.0).unwrap(),
            RegularizationParams::none(),
        );
        assert!(matches!(bad_dim, Err(Error::Config(_))));
        let missing_eps = Problem::new(
            grid,
            CoefficientModel::constant(),
            NonlinearityModel::zero(2, 1.5),
            RegularizationParams::none(),
        );
        assert!(matches!(missing_eps, Err(Error::Config(_))));
    }
}
