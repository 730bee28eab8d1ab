//! Cell-based layer-potential integration for targets on or near the surface.
//!
//! Every node owns the tensor cell of parameter space between neighbouring
//! Gauss edges. A layer potential is the sum of cell integrals of the kernel
//! against the density, which is either interpolated from a 5×5 block of
//! nodes around the cell (high order) or held constant per cell. Separated
//! cells use cached tensor Gauss points; nearby cells are
//! subdivided adaptively until each leaf is well separated; the cell that
//! contains an on-surface target is split at the target and integrated in
//! polar coordinates, where the Jacobian cancels the 1/r singularity.

use super::kernels::Kernel;
use crate::geometry::quadrature::{ChartGrid, SurfaceQuadrature};
use crate::geometry::surface::ParametricSurface;
use crate::geometry::vec3::{norm, sub};
use crate::rules::{lagrange_weights, unit_gauss};

const P: usize = 5;
const CACHED_ORDERS: [usize; NC] = [3, 4, 5, 6];
const NC: usize = 4;
/// Leaves and cached cells are accepted when `radius / distance` is below this.
const ACCEPT_RATIO: f64 = 0.45;
const MAX_DEPTH: usize = 48;
const POLAR_ORDER: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityModel {
    /// Local tensor Lagrange interpolation of the nodal values.
    Interpolated,
    /// The cell's own nodal value throughout the cell.
    CellConstant,
}

fn order_for(ratio: f64) -> usize {
    if ratio < 0.08 {
        2
    } else if ratio < 0.18 {
        3
    } else if ratio < 0.3 {
        4
    } else if ratio < 0.4 {
        5
    } else {
        6
    }
}

#[derive(Clone, Debug)]
struct Cell {
    chart: usize,
    node: usize,
    u: [f64; 2],
    v: [f64; 2],
    center: [f64; 3],
    radius: f64,
    xs: [f64; P],
    ts: [f64; P],
    idx: [[u32; P]; P],
}

#[derive(Clone, Debug)]
struct Child {
    u: [f64; 2],
    v: [f64; 2],
    center: [f64; 3],
    radius: f64,
    points: [Vec<CachedPoint>; NC],
}

#[derive(Clone, Copy, Debug)]
struct CachedPoint {
    x: [f64; 3],
    n: [f64; 3],
    w: f64,
    lu: [f64; P],
    lv: [f64; P],
}

/// A target point with the coefficient it carries in a linear functional.
#[derive(Clone, Copy, Debug)]
pub struct Target {
    pub x: [f64; 3],
    pub coef: f64,
}

pub struct NearField {
    pub quad_id: u64,
    surface: ParametricSurface,
    model: DensityModel,
    cells: Vec<Cell>,
    /// Per cell, the cached points for each order in `CACHED_ORDERS`.
    cache: Vec<[Vec<CachedPoint>; NC]>,
    children: Vec<Vec<Child>>,
    node_param: Vec<(usize, f64, f64, f64, f64)>,
}

fn cell_stencil(g: &ChartGrid, i: usize, j: usize) -> ([f64; P], [f64; P], [[u32; P]; P]) {
    let nx = g.n_xi() as isize;
    let closed = g.ghost_row(-1).is_some();
    let si = if closed { i as isize - 2 } else { (i as isize - 2).clamp(0, nx - P as isize) };
    let nt = g.n_theta() as isize;
    let sj = if g.theta_periodic { j as isize - 2 } else { (j as isize - 2).clamp(0, nt - P as isize) };
    let dt = g.theta[1] - g.theta[0];
    let mut xs = [0.0; P];
    let mut ts = [0.0; P];
    let mut idx = [[0u32; P]; P];
    for b in 0..P {
        let col = sj + b as isize;
        ts[b] = if g.theta_periodic { g.theta[j] + (col - j as isize) as f64 * dt } else { g.theta[col as usize] };
    }
    for a in 0..P {
        let (row, xe, map) = g.ghost_row(si + a as isize).expect("stencil inside glued range");
        xs[a] = xe;
        for b in 0..P {
            idx[a][b] = g.index(row, g.map_theta(map, sj + b as isize)) as u32;
        }
    }
    (xs, ts, idx)
}

impl NearField {
    pub fn new(quad: &SurfaceQuadrature, model: DensityModel) -> Self {
        use rayon::prelude::*;
        let surface = quad.surface.clone();
        let mut specs = vec![];
        for g in &quad.grids {
            for i in 0..g.n_xi() {
                for j in 0..g.n_theta() {
                    specs.push((g, i, j));
                }
            }
        }
        let built: Vec<(Cell, [Vec<CachedPoint>; NC], Vec<Child>)> = specs
            .par_iter()
            .map(|&(g, i, j)| {
                let node = g.index(i, j);
                let u = [g.xi_edges[i], g.xi_edges[i + 1]];
                let v = [g.theta_edges[j], g.theta_edges[j + 1]];
                let center = quad.nodes[node].position;
                let mut radius: f64 = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        let p = surface.position(g.chart, u[0] + 0.5 * a as f64 * (u[1] - u[0]), v[0] + 0.5 * b as f64 * (v[1] - v[0]));
                        radius = radius.max(norm(sub(p, center)));
                    }
                }
                let (xs, ts, idx) = cell_stencil(g, i, j);
                let cell = Cell { chart: g.chart, node, u, v, center, radius, xs, ts, idx };
                let cache = CACHED_ORDERS.map(|q| gauss_points(&surface, &cell, u, v, q));
                let children = split(&surface, g.chart, u, v)
                    .into_iter()
                    .map(|(cu, cv)| {
                        let (center, radius) = patch_extent(&surface, g.chart, cu, cv);
                        let points = CACHED_ORDERS.map(|q| gauss_points(&surface, &cell, cu, cv, q));
                        Child { u: cu, v: cv, center, radius, points }
                    })
                    .collect();
                (cell, cache, children)
            })
            .collect();
        let node_param = quad
            .nodes
            .iter()
            .map(|n| (n.chart, n.xi, n.theta, n.geometry.xu.iter().map(|t| t * t).sum::<f64>().sqrt(), n.geometry.xv.iter().map(|t| t * t).sum::<f64>().sqrt()))
            .collect();
        let mut cells = Vec::with_capacity(built.len());
        let mut cache = Vec::with_capacity(built.len());
        let mut children = Vec::with_capacity(built.len());
        for (a, b, c) in built {
            cells.push(a);
            cache.push(b);
            children.push(c);
        }
        NearField { quad_id: quad.id, surface, model, cells, cache, children, node_param }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Row of the functional `Σ_t coef_t ∫ K(x_t, y) ψ(y) dσ(y)` acting on nodal ψ.
    /// `singular` names the node a single on-surface target sits on.
    pub fn row(&self, kernel: Kernel, targets: &[Target], singular: Option<usize>) -> Vec<f64> {
        let mut row = vec![0.0; self.cells.len()];
        self.accumulate(kernel, targets, singular, &mut row);
        row
    }

    pub fn accumulate(&self, kernel: Kernel, targets: &[Target], singular: Option<usize>, row: &mut [f64]) {
        assert!(singular.is_none() || targets.len() == 1, "singular functional needs a single target");
        for (c, cell) in self.cells.iter().enumerate() {
            if singular == Some(cell.node) {
                self.singular_cell(kernel, targets[0], cell, row);
                continue;
            }
            let d = targets.iter().map(|t| norm(sub(t.x, cell.center))).fold(f64::INFINITY, f64::min);
            let ratio = cell.radius / (d - cell.radius).max(0.0);
            if ratio < ACCEPT_RATIO && d > cell.radius {
                let k = CACHED_ORDERS.iter().position(|&q| q == order_for(ratio).max(CACHED_ORDERS[0])).unwrap();
                for p in &self.cache[c][k] {
                    let val: f64 = targets.iter().map(|t| t.coef * kernel.eval(t.x, p.x, p.n)).sum::<f64>() * p.w;
                    self.scatter(cell, &p.lu, &p.lv, val, row);
                }
            } else {
                // First split level is target independent and cached.
                for child in &self.children[c] {
                    let d = targets.iter().map(|t| norm(sub(t.x, child.center))).fold(f64::INFINITY, f64::min);
                    let ratio = child.radius / (d - child.radius).max(0.0);
                    if ratio < ACCEPT_RATIO && d > child.radius {
                        let k = CACHED_ORDERS.iter().position(|&q| q == order_for(ratio).max(CACHED_ORDERS[0])).unwrap();
                        for p in &child.points[k] {
                            let val: f64 = targets.iter().map(|t| t.coef * kernel.eval(t.x, p.x, p.n)).sum::<f64>() * p.w;
                            self.scatter(cell, &p.lu, &p.lv, val, row);
                        }
                    } else {
                        self.adaptive(kernel, targets, cell, child.u, child.v, 1, row);
                    }
                }
            }
        }
    }

    #[inline]
    fn scatter(&self, cell: &Cell, lu: &[f64; P], lv: &[f64; P], val: f64, row: &mut [f64]) {
        match self.model {
            DensityModel::CellConstant => row[cell.node] += val,
            DensityModel::Interpolated => {
                for a in 0..P {
                    let va = val * lu[a];
                    for b in 0..P {
                        row[cell.idx[a][b] as usize] += va * lv[b];
                    }
                }
            }
        }
    }

    fn leaf(&self, kernel: Kernel, targets: &[Target], cell: &Cell, u: [f64; 2], v: [f64; 2], q: usize, row: &mut [f64]) {
        let (gx, gw) = unit_gauss(q);
        let (du, dv) = (u[1] - u[0], v[1] - v[0]);
        let mut lu = [0.0; P];
        let mut lv = [0.0; P];
        for a in 0..q {
            let uu = u[0] + du * gx[a];
            lagrange_weights(&cell.xs, uu, &mut lu);
            for b in 0..q {
                let vv = v[0] + dv * gx[b];
                lagrange_weights(&cell.ts, vv, &mut lv);
                let p = self.surface.point(cell.chart, uu, vv);
                let w = gw[a] * gw[b] * du * dv * p.jac;
                let val: f64 = targets.iter().map(|t| t.coef * kernel.eval(t.x, p.x, p.normal)).sum::<f64>() * w;
                self.scatter(cell, &lu, &lv, val, row);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn adaptive(&self, kernel: Kernel, targets: &[Target], cell: &Cell, u: [f64; 2], v: [f64; 2], depth: usize, row: &mut [f64]) {
        let (center, radius) = patch_extent(&self.surface, cell.chart, u, v);
        let d = targets.iter().map(|t| norm(sub(t.x, center))).fold(f64::INFINITY, f64::min);
        let ratio = radius / (d - radius).max(0.0);
        if (ratio < ACCEPT_RATIO && d > radius) || depth >= MAX_DEPTH {
            let q = if depth >= MAX_DEPTH { 8 } else { order_for(ratio) };
            self.leaf(kernel, targets, cell, u, v, q, row);
            return;
        }
        for (cu, cv) in split(&self.surface, cell.chart, u, v) {
            self.adaptive(kernel, targets, cell, cu, cv, depth + 1, row);
        }
    }

    /// Cell containing the on-surface target: four rectangles cornered at the
    /// target, each integrated in polar coordinates over its near square and
    /// adaptively over the remainder.
    fn singular_cell(&self, kernel: Kernel, target: Target, cell: &Cell, row: &mut [f64]) {
        let (_, u0, v0, su, sv) = self.node_param[cell.node];
        for (ua, ub) in [(u0, cell.u[0]), (u0, cell.u[1])] {
            for (va, vb) in [(v0, cell.v[0]), (v0, cell.v[1])] {
                let (lu, lv) = ((ub - ua).abs() * su, (vb - va).abs() * sv);
                if lu == 0.0 || lv == 0.0 {
                    continue;
                }
                let (mut ue, mut ve) = (ub, vb);
                if lu > 2.0 * lv {
                    ue = ua + (ub - ua) * (lv / lu);
                    let rest = if ua < ub { [ue, ub] } else { [ub, ue] };
                    let vr = if va < vb { [va, vb] } else { [vb, va] };
                    self.adaptive(kernel, &[target], cell, rest, vr, 0, row);
                } else if lv > 2.0 * lu {
                    ve = va + (vb - va) * (lu / lv);
                    let rest = if va < vb { [ve, vb] } else { [vb, ve] };
                    let ur = if ua < ub { [ua, ub] } else { [ub, ua] };
                    self.adaptive(kernel, &[target], cell, ur, rest, 0, row);
                }
                let p0 = (ua, va);
                self.polar_triangle(kernel, target, cell, p0, (ue, va), (ue, ve), row);
                self.polar_triangle(kernel, target, cell, p0, (ue, ve), (ua, ve), row);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn polar_triangle(&self, kernel: Kernel, target: Target, cell: &Cell, p0: (f64, f64), a: (f64, f64), b: (f64, f64), row: &mut [f64]) {
        let (gx, gw) = unit_gauss(POLAR_ORDER);
        let (ax, ay) = (a.0 - p0.0, a.1 - p0.1);
        let (bx, by) = (b.0 - a.0, b.1 - a.1);
        let area2 = (ax * by - ay * bx).abs();
        let mut lu = [0.0; P];
        let mut lv = [0.0; P];
        for it in 0..POLAR_ORDER {
            let t = gx[it];
            let (dx, dy) = (ax + t * bx, ay + t * by);
            for ir in 0..POLAR_ORDER {
                let r = gx[ir];
                let (uu, vv) = (p0.0 + r * dx, p0.1 + r * dy);
                lagrange_weights(&cell.xs, uu, &mut lu);
                lagrange_weights(&cell.ts, vv, &mut lv);
                let p = self.surface.point(cell.chart, uu, vv);
                let w = gw[it] * gw[ir] * r * area2 * p.jac;
                let val = target.coef * kernel.eval(target.x, p.x, p.normal) * w;
                self.scatter(cell, &lu, &lv, val, row);
            }
        }
    }
}

/// Midpoint image and the largest distance from it to a corner.
fn patch_extent(surface: &ParametricSurface, chart: usize, u: [f64; 2], v: [f64; 2]) -> ([f64; 3], f64) {
    let center = surface.position(chart, 0.5 * (u[0] + u[1]), 0.5 * (v[0] + v[1]));
    let mut radius: f64 = 0.0;
    for uu in u {
        for vv in v {
            radius = radius.max(norm(sub(surface.position(chart, uu, vv), center)));
        }
    }
    (center, radius)
}

/// Halve along the physically longer direction, or both when comparable.
fn split(surface: &ParametricSurface, chart: usize, u: [f64; 2], v: [f64; 2]) -> Vec<([f64; 2], [f64; 2])> {
    let (um, vm) = (0.5 * (u[0] + u[1]), 0.5 * (v[0] + v[1]));
    let eu = norm(sub(surface.position(chart, u[1], vm), surface.position(chart, u[0], vm)));
    let ev = norm(sub(surface.position(chart, um, v[1]), surface.position(chart, um, v[0])));
    let us: Vec<[f64; 2]> = if eu > 0.5 * ev { vec![[u[0], um], [um, u[1]]] } else { vec![u] };
    let vs: Vec<[f64; 2]> = if ev > 0.5 * eu { vec![[v[0], vm], [vm, v[1]]] } else { vec![v] };
    let mut out = Vec::with_capacity(4);
    for a in &us {
        for b in &vs {
            out.push((*a, *b));
        }
    }
    out
}

fn gauss_points(surface: &ParametricSurface, cell: &Cell, u: [f64; 2], v: [f64; 2], q: usize) -> Vec<CachedPoint> {
    let (gx, gw) = unit_gauss(q);
    let (du, dv) = (u[1] - u[0], v[1] - v[0]);
    let mut out = Vec::with_capacity(q * q);
    for a in 0..q {
        let uu = u[0] + du * gx[a];
        let mut lu = [0.0; P];
        lagrange_weights(&cell.xs, uu, &mut lu);
        for b in 0..q {
            let vv = v[0] + dv * gx[b];
            let mut lv = [0.0; P];
            lagrange_weights(&cell.ts, vv, &mut lv);
            let p = surface.point(cell.chart, uu, vv);
            out.push(CachedPoint { x: p.x, n: p.normal, w: gw[a] * gw[b] * du * dv * p.jac, lu, lv });
        }
    }
    out
}

/// Value at parameter point `(u, v)` of chart `chart` of the nodal field
/// `values`, by the same 5×5 tensor interpolation the cell engine uses.
pub fn interpolate(quad: &SurfaceQuadrature, values: &[f64], chart: usize, u: f64, v: f64) -> Option<f64> {
    let g = quad.grids.iter().find(|g| g.chart == chart)?;
    let i = g.xi_edges.partition_point(|&e| e <= u).checked_sub(1)?.min(g.n_xi() - 1);
    let j = g.theta_edges.partition_point(|&e| e <= v).checked_sub(1)?.min(g.n_theta() - 1);
    let (xs, ts, idx) = cell_stencil(g, i, j);
    let mut lu = [0.0; P];
    let mut lv = [0.0; P];
    lagrange_weights(&xs, u, &mut lu);
    lagrange_weights(&ts, v, &mut lv);
    let mut acc = 0.0;
    for a in 0..P {
        for b in 0..P {
            acc += lu[a] * lv[b] * values[idx[a][b] as usize];
        }
    }
    Some(acc)
}
