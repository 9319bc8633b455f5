//! Uniform Cartesian grids over intervals, rectangles, and disks, plus the
//! node fields that live on them. Disks are realized as a masked square grid:
//! nodes strictly inside the circle (with a quarter-cell margin) are unknowns,
//! every other node of the bounding box is pinned to the Dirichlet value 0.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Domain {
    Interval { x_lo: f64, x_hi: f64 },
    Rectangle { x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64 },
    Disk { radius: f64 },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Extent along the first axis; the default regularization scale.
    pub fn extent(&self) -> f64 {
        match *self {
            Domain::Interval { x_lo, x_hi } => x_hi - x_lo,
            Domain::Rectangle { x_lo, x_hi, .. } => x_hi - x_lo,
            Domain::Disk { radius } => 2.0 * radius,
        }
    }

    /// True when the domain is mirror-symmetric in the first coordinate,
    /// which reflection diagnostics require.
    pub fn symmetric_in_x1(&self) -> bool {
        match *self {
            Domain::Interval { x_lo, x_hi } => (x_lo + x_hi).abs() < 1e-12 * (x_hi - x_lo).abs(),
            Domain::Rectangle { x_lo, x_hi, .. } => {
                (x_lo + x_hi).abs() < 1e-12 * (x_hi - x_lo).abs()
            }
            Domain::Disk { .. } => true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Domain::Interval { x_lo, x_hi } => x_hi > x_lo && x_lo.is_finite() && x_hi.is_finite(),
            Domain::Rectangle {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => x_hi > x_lo && y_hi > y_lo && [x_lo, x_hi, y_lo, y_hi].iter().all(|v| v.is_finite()),
            Domain::Disk { radius } => radius > 0.0 && radius.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("degenerate domain {self:?}")))
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Domain::Interval { x_lo, x_hi } => write!(f, "interval({x_lo},{x_hi})"),
            Domain::Rectangle {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => write!(f, "rectangle({x_lo},{x_hi})x({y_lo},{y_hi})"),
            Domain::Disk { radius } => write!(f, "disk({radius})"),
        }
    }
}

/// Uniform grid with spacing `h`. Node (i, j) sits at
/// (x_lo + i h, y_lo + j h) and is stored at index j*nx + i.
#[derive(Debug)]
pub struct Grid {
    pub domain: Domain,
    pub resolution: usize,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub x_lo: f64,
    pub y_lo: f64,
    interior: Vec<bool>,
    /// Graph distance to the nearest pinned node: 0 on pinned nodes,
    /// 1 on the interior fringe, and so on.
    depth: Vec<u16>,
    interior_indices: Vec<usize>,
    node_to_interior: Vec<i32>,
}

pub fn build_grid(domain: Domain, resolution: usize) -> Result<Arc<Grid>> {
    domain.validate()?;
    if resolution < 4 {
        return Err(Error::Config(format!(
            "resolution must be at least 4, got {resolution}"
        )));
    }
    let (h, nx, ny, x_lo, y_lo) = match domain {
        Domain::Interval { x_lo, x_hi } => ((x_hi - x_lo) / resolution as f64, resolution + 1, 1, x_lo, 0.0),
        Domain::Rectangle {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        } => {
            let h = (x_hi - x_lo) / resolution as f64;
            let steps_y = (y_hi - y_lo) / h;
            let ny = steps_y.round() as usize;
            if (steps_y - ny as f64).abs() > 1e-9 * steps_y.max(1.0) || ny < 4 {
                return Err(Error::Config(format!(
                    "rectangle height {} is not a multiple (>= 4) of the spacing {h}",
                    y_hi - y_lo
                )));
            }
            (h, resolution + 1, ny + 1, x_lo, y_lo)
        }
        Domain::Disk { radius } => (
            2.0 * radius / resolution as f64,
            resolution + 1,
            resolution + 1,
            -radius,
            -radius,
        ),
    };

    let node_count = nx * ny;
    let mut interior = vec![false; node_count];
    for j in 0..ny {
        for i in 0..nx {
            let inside = match domain {
                Domain::Interval { .. } => i > 0 && i < nx - 1,
                Domain::Rectangle { .. } => i > 0 && i < nx - 1 && j > 0 && j < ny - 1,
                Domain::Disk { radius } => {
                    let x = x_lo + i as f64 * h;
                    let y = y_lo + j as f64 * h;
                    // Inset the rim by a fraction of a cell: deep enough that
                    // the boundary error shrinks deterministically under
                    // refinement, shallow enough that equal-radius nodes keep
                    // near-equal distance to the pinned ring.
                    let margin = radius - 0.40 * h;
                    x * x + y * y < margin * margin
                }
            };
            interior[j * nx + i] = inside;
        }
    }

    // Multi-source BFS from pinned nodes gives the fringe depth.
    let mut depth = vec![u16::MAX; node_count];
    let mut queue = std::collections::VecDeque::new();
    for idx in 0..node_count {
        if !interior[idx] {
            depth[idx] = 0;
            queue.push_back(idx);
        }
    }
    // Bounding-box rim counts as pinned even when the array ends there.
    for j in 0..ny {
        for i in 0..nx {
            let idx = j * nx + i;
            if interior[idx] && (i == 0 || i == nx - 1 || (ny > 1 && (j == 0 || j == ny - 1))) {
                depth[idx] = 1;
                queue.push_back(idx);
            }
        }
    }
    while let Some(idx) = queue.pop_front() {
        let (i, j) = (idx % nx, idx / nx);
        let d = depth[idx];
        let mut push = |ii: usize, jj: usize| {
            let nidx = jj * nx + ii;
            if depth[nidx] > d + 1 {
                depth[nidx] = d + 1;
                queue.push_back(nidx);
            }
        };
        if i > 0 {
            push(i - 1, j);
        }
        if i + 1 < nx {
            push(i + 1, j);
        }
        if ny > 1 {
            if j > 0 {
                push(i, j - 1);
            }
            if j + 1 < ny {
                push(i, j + 1);
            }
        }
    }

    let mut interior_indices = Vec::new();
    let mut node_to_interior = vec![-1i32; node_count];
    for idx in 0..node_count {
        if interior[idx] {
            node_to_interior[idx] = interior_indices.len() as i32;
            interior_indices.push(idx);
        }
    }
    if interior_indices.is_empty() {
        return Err(Error::Config("grid has no interior nodes".into()));
    }

    Ok(Arc::new(Grid {
        domain,
        resolution,
        h,
        nx,
        ny,
        x_lo,
        y_lo,
        interior,
        depth,
        interior_indices,
        node_to_interior,
    }))
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn interior_count(&self) -> usize {
        self.interior_indices.len()
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        self.interior[idx]
    }

    /// Graph distance to the nearest pinned node (0 on pinned nodes).
    pub fn depth(&self, idx: usize) -> u16 {
        self.depth[idx]
    }

    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let i = idx % self.nx;
        let j = idx / self.nx;
        (
            self.x_lo + i as f64 * self.h,
            if self.ny > 1 { self.y_lo + j as f64 * self.h } else { 0.0 },
        )
    }

    pub fn interior_indices(&self) -> &[usize] {
        &self.interior_indices
    }

    pub fn interior_ordinal(&self, idx: usize) -> Option<usize> {
        let v = self.node_to_interior[idx];
        (v >= 0).then_some(v as usize)
    }

    /// Cell measure h^n.
    pub fn cell_measure(&self) -> f64 {
        if self.dim() == 1 {
            self.h
        } else {
            self.h * self.h
        }
    }

    /// Discrete measure of the domain: h^n times the interior node count.
    pub fn measure(&self) -> f64 {
        self.cell_measure() * self.interior_count() as f64
    }

    pub fn gather_interior(&self, values: &[f64]) -> Vec<f64> {
        self.interior_indices.iter().map(|&i| values[i]).collect()
    }

    pub fn scatter_interior(self: &Arc<Self>, interior: &[f64]) -> Field {
        assert_eq!(interior.len(), self.interior_count());
        let mut values = vec![0.0; self.node_count()];
        for (k, &idx) in self.interior_indices.iter().enumerate() {
            values[idx] = interior[k];
        }
        Field {
            grid: Arc::clone(self),
            values,
        }
    }
}

/// Node values on a grid. Non-interior nodes always hold exactly 0.
#[derive(Clone)]
pub struct Field {
    pub(crate) grid: Arc<Grid>,
    pub(crate) values: Vec<f64>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Field({} nodes on {}, sup {:.3e})",
            self.values.len(),
            self.grid.domain,
            self.max_abs()
        )
    }
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.node_count()],
        }
    }

    /// Samples f at interior nodes; pinned nodes stay 0.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Field {
        let mut field = Field::zeros(grid);
        for &idx in grid.interior_indices() {
            let (x, y) = grid.coords(idx);
            field.values[idx] = f(x, y);
        }
        field
    }

    /// Builds a field from one value per node; pinned nodes are reset to 0.
    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.node_count() {
            return Err(Error::Precondition(format!(
                "expected {} node values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        Ok(Field::from_raw(grid, values))
    }

    pub(crate) fn from_raw(grid: &Arc<Grid>, mut values: Vec<f64>) -> Field {
        assert_eq!(values.len(), grid.node_count());
        for idx in 0..values.len() {
            if !grid.is_interior(idx) {
                values[idx] = 0.0;
            }
        }
        Field {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.grid
            .interior_indices()
            .iter()
            .fold(f64::INFINITY, |m, &i| m.min(self.values[i]))
    }

    pub fn max_value(&self) -> f64 {
        self.grid
            .interior_indices()
            .iter()
            .fold(f64::NEG_INFINITY, |m, &i| m.max(self.values[i]))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// self + alpha * other.
    pub fn axpy(&self, alpha: f64, other: &Field) -> Field {
        assert!(Arc::ptr_eq(&self.grid, &other.grid));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Field {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, alpha: f64) -> Field {
        let values = self.values.iter().map(|v| alpha * v).collect();
        Field {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    /// Clamps interior values from below (used to keep iterates nonnegative).
    pub fn clip_min(&self, floor: f64) -> Field {
        let mut out = self.clone();
        for &idx in self.grid.interior_indices() {
            if out.values[idx] < floor {
                out.values[idx] = floor;
            }
        }
        out
    }

    /// Bilinear resample onto another grid (0 outside this grid's box);
    /// used to warm-start solves on refined grids.
    pub fn resample_to(&self, fine: &Arc<Grid>) -> Field {
        let src = &self.grid;
        Field::from_fn(fine, |x, y| {
            let fx = (x - src.x_lo) / src.h;
            let fy = if src.ny > 1 { (y - src.y_lo) / src.h } else { 0.0 };
            let i0 = (fx.floor() as isize).clamp(0, src.nx as isize - 1) as usize;
            let j0 = (fy.floor() as isize).clamp(0, src.ny.max(1) as isize - 1) as usize;
            let i1 = (i0 + 1).min(src.nx - 1);
            let j1 = (j0 + 1).min(src.ny.max(1) - 1);
            let tx = (fx - i0 as f64).clamp(0.0, 1.0);
            let ty = (fy - j0 as f64).clamp(0.0, 1.0);
            let v = |i: usize, j: usize| self.values[j * src.nx + i];
            let lo = v(i0, j0) * (1.0 - tx) + v(i1, j0) * tx;
            let hi = v(i0, j1) * (1.0 - tx) + v(i1, j1) * tx;
            lo * (1.0 - ty) + hi * ty
        })
    }
}

/// Nodal gradient: central differences where both axis neighbors are
/// interior, one-sided toward the interior at the fringe, zero where neither
/// neighbor is interior. Components vanish on pinned nodes.
#[derive(Debug, Clone)]
pub struct GradientField {
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
}

pub fn gradient_field(u: &Field) -> GradientField {
    let g = &u.grid;
    let n = g.node_count();
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut magnitude = vec![0.0; n];
    // Caller guarantees idx +/- stride stays inside the array.
    let axis_diff = |idx: usize, stride: usize| -> f64 {
        let lo = idx - stride;
        let hi = idx + stride;
        let lo_in = g.is_interior(lo);
        let hi_in = g.is_interior(hi);
        if lo_in && hi_in {
            (u.values[hi] - u.values[lo]) / (2.0 * g.h)
        } else if hi_in {
            (u.values[hi] - u.values[idx]) / g.h
        } else if lo_in {
            (u.values[idx] - u.values[lo]) / g.h
        } else {
            0.0
        }
    };
    for &idx in g.interior_indices() {
        let i = idx % g.nx;
        let j = idx / g.nx;
        let dx = if i > 0 && i + 1 < g.nx { axis_diff(idx, 1) } else { 0.0 };
        let dy = if g.ny > 1 && j > 0 && j + 1 < g.ny {
            axis_diff(idx, g.nx)
        } else {
            0.0
        };
        gx[idx] = dx;
        gy[idx] = dy;
        magnitude[idx] = (dx * dx + dy * dy).sqrt();
    }
    GradientField { gx, gy, magnitude }
}

/// Sum of values over interior nodes times the cell measure.
pub fn integrate(grid: &Grid, values: &[f64]) -> f64 {
    assert_eq!(values.len(), grid.node_count());
    let mut sum = 0.0;
    for &idx in grid.interior_indices() {
        sum += values[idx];
    }
    sum * grid.cell_measure()
}

/// Discrete L^q norm over interior nodes.
pub fn lq_norm(grid: &Grid, values: &[f64], q: f64) -> f64 {
    assert!(q >= 1.0);
    let mut sum = 0.0;
    for &idx in grid.interior_indices() {
        sum += values[idx].abs().powf(q);
    }
    (sum * grid.cell_measure()).powf(1.0 / q)
}

/// Discrete L^2 inner product over interior nodes.
pub fn dot_h(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for &idx in grid.interior_indices() {
        sum += a[idx] * b[idx];
    }
    sum * grid.cell_measure()
}

/// (||u||_p^p + ||grad u||_p^p)^(1/p) with the nodal gradient.
pub fn norm_w1p(u: &Field, p: f64) -> f64 {
    assert!(p > 1.0);
    let g = &u.grid;
    let grad = gradient_field(u);
    let mut sum = 0.0;
    for &idx in g.interior_indices() {
        sum += u.values[idx].abs().powf(p) + grad.magnitude[idx].powf(p);
    }
    (sum * g.cell_measure()).powf(1.0 / p)
}

/// u composed with the reflection x1 -> 2*lambda - x1. The plane must be
/// grid-aligned (2*lambda on the node lattice); reflected points that leave
/// the grid read the Dirichlet value 0.
pub fn reflect_field(u: &Field, lambda: f64) -> Result<Field> {
    let g = &u.grid;
    let k2f = 2.0 * (lambda - g.x_lo) / g.h;
    let k2 = k2f.round();
    if (k2f - k2).abs() > 1e-9 * k2f.abs().max(1.0) {
        return Err(Error::Precondition(format!(
            "reflection plane lambda = {lambda} is not grid-aligned (h = {})",
            g.h
        )));
    }
    let k2 = k2 as isize;
    let mut values = vec![0.0; g.node_count()];
    for &idx in g.interior_indices() {
        let i = (idx % g.nx) as isize;
        let j = idx / g.nx;
        let ir = k2 - i;
        if ir >= 0 && (ir as usize) < g.nx {
            values[idx] = u.values[j * g.nx + ir as usize];
        }
    }
    Ok(Field::from_raw(g, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interval_interior_count() {
        let g = build_grid(Domain::Interval { x_lo: 0.0, x_hi: 1.0 }, 10).unwrap();
        assert_eq!(g.interior_count(), 9);
        assert_eq!(g.node_count(), 11);
    }

    #[test]
    fn rectangle_interior_count() {
        let g = build_grid(
            Domain::Rectangle {
                x_lo: -1.0,
                x_hi: 1.0,
                y_lo: -1.0,
                y_hi: 1.0,
            },
            16,
        )
        .unwrap();
        assert_eq!(g.interior_count(), 15 * 15);
    }

    #[test]
    fn disk_interior_count_tracks_area() {
        let g = build_grid(Domain::Disk { radius: 1.0 }, 64).unwrap();
        // Frozen lattice count for the inset-rim mask.
        assert_eq!(g.interior_count(), 3133);
        let reference = std::f64::consts::PI / 4.0 * 64.0 * 64.0;
        assert!((g.interior_count() as f64 - reference).abs() / reference < 0.03);
        for &idx in g.interior_indices() {
            let (x, y) = g.coords(idx);
            assert!(x * x + y * y < 1.0);
        }
    }

    #[test]
    fn integrate_constants() {
        let g = build_grid(Domain::Interval { x_lo: 0.0, x_hi: 1.0 }, 100).unwrap();
        let ones = vec![1.0; g.node_count()];
        let v = integrate(&g, &ones);
        assert!((v - 1.0).abs() <= g.h + 1e-12);

        let gd = build_grid(Domain::Disk { radius: 1.0 }, 64).unwrap();
        let ones = vec![1.0; gd.node_count()];
        let area = integrate(&gd, &ones);
        // The cell-wide rim margin trims an annulus of width O(h).
        assert!(area < std::f64::consts::PI);
        assert!(area > std::f64::consts::PI * (1.0 - 4.0 * gd.h));
    }

    #[test]
    fn gradient_of_coordinate_function_is_one() {
        let g = build_grid(
            Domain::Rectangle {
                x_lo: -1.0,
                x_hi: 1.0,
                y_lo: -1.0,
                y_hi: 1.0,
            },
            16,
        )
        .unwrap();
        let u = Field::from_fn(&g, |x, _| x);
        let grad = gradient_field(&u);
        for &idx in g.interior_indices() {
            assert_relative_eq!(grad.gx[idx], 1.0, max_relative = 1e-12);
            assert_relative_eq!(grad.magnitude[idx], 1.0, max_relative = 1e-12);
            assert!(grad.gy[idx].abs() < 1e-12);
        }
    }

    #[test]
    fn w1p_norm_of_coordinate_function() {
        let g = build_grid(Domain::Interval { x_lo: 0.0, x_hi: 1.0 }, 128).unwrap();
        let u = Field::from_fn(&g, |x, _| x);
        let norm = norm_w1p(&u, 2.0);
        let exact = (1.0f64 / 3.0 + 1.0).sqrt();
        assert!((norm - exact).abs() / exact < 0.02, "norm {norm} vs {exact}");
    }

    #[test]
    fn reflection_is_an_involution_at_zero() {
        let g = build_grid(Domain::Disk { radius: 1.0 }, 32).unwrap();
        let u = Field::from_fn(&g, |x, y| (1.0 - x * x - y * y) * (1.0 + 0.3 * x));
        let r = reflect_field(&u, 0.0).unwrap();
        let rr = reflect_field(&r, 0.0).unwrap();
        for idx in 0..g.node_count() {
            assert!((rr.values[idx] - u.values[idx]).abs() < 1e-12);
        }
    }

    #[test]
    fn reflection_reads_the_mirrored_node() {
        let g = build_grid(Domain::Interval { x_lo: -1.0, x_hi: 1.0 }, 8).unwrap();
        let u = Field::from_fn(&g, |x, _| 1.0 - x);
        // lambda = -0.25: the node at -0.5 must read u(0) = 1.
        let r = reflect_field(&u, -0.25).unwrap();
        let idx_half = 2; // x = -0.5 at i = 2
        assert_relative_eq!(r.values[idx_half], 1.0, max_relative = 1e-14);
        assert!(reflect_field(&u, -0.3).is_err());
    }

    #[test]
    fn symmetric_field_equals_its_reflection() {
        let g = build_grid(Domain::Interval { x_lo: -1.0, x_hi: 1.0 }, 64).unwrap();
        let u = Field::from_fn(&g, |x, _| 1.0 - x * x);
        let r = reflect_field(&u, 0.0).unwrap();
        for idx in 0..g.node_count() {
            assert!((r.values[idx] - u.values[idx]).abs() < 1e-14);
        }
    }

    #[test]
    fn depth_marks_the_fringe() {
        let g = build_grid(Domain::Interval { x_lo: 0.0, x_hi: 1.0 }, 10).unwrap();
        assert_eq!(g.depth(0), 0);
        assert_eq!(g.depth(1), 1);
        assert_eq!(g.depth(2), 2);
        assert_eq!(g.depth(5), 5);
    }

    #[test]
    fn resample_preserves_smooth_fields() {
        let coarse = build_grid(Domain::Disk { radius: 1.0 }, 32).unwrap();
        let fine = build_grid(Domain::Disk { radius: 1.0 }, 64).unwrap();
        let u = Field::from_fn(&coarse, |x, y| 1.0 - x * x - y * y);
        let v = u.resample_to(&fine);
        // Stay a coarse cell clear of the rim, where interpolation sees
        // pinned zeros.
        for &idx in fine.interior_indices() {
            let (x, y) = fine.coords(idx);
            if x * x + y * y < 0.64 {
                let exact = 1.0 - x * x - y * y;
                assert!((v.values[idx] - exact).abs() < 5e-3);
            }
        }
    }
}
