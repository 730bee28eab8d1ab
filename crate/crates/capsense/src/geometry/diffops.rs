//! Chart-wise finite differences on the (ξ, θ) node grid.
//!
//! Five-point stencils in each direction (fourth order on smooth data); rows
//! that run off a ξ end continue through the chart's gluing, θ wraps
//! periodically. Open patches fall back to one-sided windows.

use rayon::prelude::*;

use super::expansion::surface_gradient;
use super::quadrature::{ChartGrid, SurfaceQuadrature, ThetaMap};
use super::vec3::dot;
use crate::density::DensityVector;
use crate::error::Result;
use crate::rules::fd_weights;

pub type SparseRow = Vec<(usize, f64)>;

/// Parameter-derivative stencils of every node.
#[derive(Clone, Debug)]
pub struct ParamStencils {
    pub quad_id: u64,
    pub du: Vec<SparseRow>,
    pub dv: Vec<SparseRow>,
    pub duu: Vec<SparseRow>,
    pub duv: Vec<SparseRow>,
    pub dvv: Vec<SparseRow>,
}

const P: usize = 5;

fn window(center: usize, n: usize, open: bool) -> isize {
    if open {
        (center as isize - 2).clamp(0, n as isize - P.min(n) as isize)
    } else {
        center as isize - 2
    }
}

impl ParamStencils {
    pub fn new(quad: &SurfaceQuadrature) -> Self {
        let rows: Vec<[SparseRow; 5]> = (0..quad.len())
            .into_par_iter()
            .map(|k| {
                let (g, i, j) = quad.grid_of(k);
                node_stencils(g, i, j)
            })
            .collect();
        let mut out = ParamStencils {
            quad_id: quad.id,
            du: vec![],
            dv: vec![],
            duu: vec![],
            duv: vec![],
            dvv: vec![],
        };
        for [a, b, c, d, e] in rows {
            out.du.push(a);
            out.dv.push(b);
            out.duu.push(c);
            out.duv.push(d);
            out.dvv.push(e);
        }
        out
    }

    /// Laplace–Beltrami stencil rows, `G^{ij}(∂_ij − Γ^k_ij ∂_k)`.
    pub fn laplace_beltrami_rows(&self, quad: &SurfaceQuadrature) -> Vec<SparseRow> {
        (0..quad.len())
            .into_par_iter()
            .map(|k| {
                let node = &quad.nodes[k];
                let g = &node.geometry;
                let [[e, f], [_, gg]] = node.metric;
                let det = e * gg - f * f;
                let (iuu, iuv, ivv) = (gg / det, -f / det, e / det);
                let cu = iuu * dot(g.xuu, g.xu) + 2.0 * iuv * dot(g.xuv, g.xu) + ivv * dot(g.xvv, g.xu);
                let cv = iuu * dot(g.xuu, g.xv) + 2.0 * iuv * dot(g.xuv, g.xv) + ivv * dot(g.xvv, g.xv);
                let bu = iuu * cu + iuv * cv;
                let bv = iuv * cu + ivv * cv;
                let mut row = SparseRow::new();
                push_scaled(&mut row, &self.duu[k], iuu);
                push_scaled(&mut row, &self.duv[k], 2.0 * iuv);
                push_scaled(&mut row, &self.dvv[k], ivv);
                push_scaled(&mut row, &self.du[k], -bu);
                push_scaled(&mut row, &self.dv[k], -bv);
                annihilate_constants(compact(row), k)
            })
            .collect()
    }

    pub fn apply(rows: &[SparseRow], field: &[f64]) -> Vec<f64> {
        rows.iter().map(|r| r.iter().map(|&(j, c)| c * field[j]).sum()).collect()
    }
}

fn push_scaled(row: &mut SparseRow, src: &SparseRow, s: f64) {
    if s != 0.0 {
        row.extend(src.iter().map(|&(j, c)| (j, c * s)));
    }
}

/// Merge duplicate column indices, keeping a fixed (sorted) order.
pub fn compact(mut row: SparseRow) -> SparseRow {
    row.sort_by_key(|e| e.0);
    let mut out: SparseRow = Vec::with_capacity(row.len());
    for (j, c) in row {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += c,
            _ => out.push((j, c)),
        }
    }
    out
}

fn node_stencils(g: &ChartGrid, i: usize, j: usize) -> [SparseRow; 5] {
    let open_xi = g.ghost_row(-1).is_none();
    let s = window(i, g.n_xi(), open_xi);
    let pxi = if open_xi { P.min(g.n_xi()) } else { P };
    let mut rows: Vec<(usize, f64, ThetaMap)> = vec![];
    for a in 0..pxi as isize {
        rows.push(g.ghost_row(s + a).expect("stencil row inside glued range"));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let cx = fd_weights(&xs, g.xi[i], 2);

    let nt = g.n_theta();
    let (tcols, ct): (Vec<isize>, Vec<Vec<f64>>) = if g.theta_periodic {
        let d = g.theta[1] - g.theta[0];
        let cols = (-2..=2).map(|b| j as isize + b).collect();
        let w1 = [1.0, -8.0, 0.0, 8.0, -1.0].iter().map(|c| c / (12.0 * d)).collect();
        let w2 = [-1.0, 16.0, -30.0, 16.0, -1.0].iter().map(|c| c / (12.0 * d * d)).collect();
        (cols, vec![vec![], w1, w2])
    } else {
        let st = window(j, nt, true);
        let cols: Vec<isize> = (0..P.min(nt) as isize).map(|b| st + b).collect();
        let ts: Vec<f64> = cols.iter().map(|&c| g.theta[c as usize]).collect();
        (cols, fd_weights(&ts, g.theta[j], 2))
    };

    let here = |row: usize, map: ThetaMap, col: isize| g.index(row, g.map_theta(map, col));
    let mut du = SparseRow::new();
    let mut duu = SparseRow::new();
    let mut duv = SparseRow::new();
    for (a, &(row, _, map)) in rows.iter().enumerate() {
        let k = here(row, map, j as isize);
        du.push((k, cx[1][a]));
        duu.push((k, cx[2][a]));
        for (b, &col) in tcols.iter().enumerate() {
            duv.push((here(row, map, col), cx[1][a] * ct[1][b]));
        }
    }
    let mut dv = SparseRow::new();
    let mut dvv = SparseRow::new();
    for (b, &col) in tcols.iter().enumerate() {
        let k = here(i, ThetaMap::Identity, col);
        dv.push((k, ct[1][b]));
        dvv.push((k, ct[2][b]));
    }
    let k = g.index(i, j);
    [du, dv, duu, duv, dvv].map(|r| annihilate_constants(compact(r), k))
}

/// Put the rounding residue of the weight sum on the centre entry so that
/// constants are differentiated to exactly zero.
fn annihilate_constants(mut row: SparseRow, center: usize) -> SparseRow {
    let total: f64 = row.iter().filter(|e| e.0 != center).map(|e| e.1).sum();
    match row.iter_mut().find(|e| e.0 == center) {
        Some(e) => e.1 = -total,
        None => row.push((center, -total)),
    }
    row.sort_by_key(|e| e.0);
    row
}

/// Tangential gradient `∇_Γ w = G^{ij} ∂_j w X_i` by chart-wise differencing.
pub fn tangential_gradient(quad: &SurfaceQuadrature, field: &DensityVector) -> Result<Vec<[f64; 3]>> {
    field.check(quad)?;
    let st = ParamStencils::new(quad);
    let fu = ParamStencils::apply(&st.du, &field.values);
    let fv = ParamStencils::apply(&st.dv, &field.values);
    Ok(quad.nodes.iter().enumerate().map(|(k, n)| surface_gradient(n, fu[k], fv[k])).collect())
}

/// Laplace–Beltrami operator by chart-wise differencing of the expanded form
/// `Δ_G w = G^{ij}(∂_ij w − Γ^k_ij ∂_k w)`.
pub fn laplace_beltrami(quad: &SurfaceQuadrature, field: &DensityVector) -> Result<Vec<f64>> {
    field.check(quad)?;
    let st = ParamStencils::new(quad);
    Ok(ParamStencils::apply(&st.laplace_beltrami_rows(quad), &field.values))
}
