use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use super::surface::{Gluing, LocalGeometry, ParametricSurface, Sampling};
use super::vec3::{dot, norm, scale, sub};
use crate::error::{Error, Result};
use crate::rules::gauss_legendre;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Debug)]
pub struct Node {
    pub position: [f64; 3],
    pub normal: [f64; 3],
    pub weight: f64,
    pub tau: f64,
    pub metric: [[f64; 2]; 2],
    /// Orthonormal (T_ξ, T_θ); T_θ is Gram–Schmidt corrected for non-orthogonal charts.
    pub tangent_frame: [[f64; 3]; 2],
    pub chart: usize,
    pub xi: f64,
    pub theta: f64,
    pub geometry: LocalGeometry,
    /// Longest physical edge of the node's parameter cell.
    pub spacing: f64,
}

/// Tensor grid of one chart: node parameters and cell edges.
#[derive(Clone, Debug)]
pub struct ChartGrid {
    pub chart: usize,
    pub offset: usize,
    pub xi: Vec<f64>,
    pub theta: Vec<f64>,
    pub xi_edges: Vec<f64>,
    pub theta_edges: Vec<f64>,
    pub gluing: Gluing,
    pub theta_periodic: bool,
}

impl ChartGrid {
    pub fn n_xi(&self) -> usize {
        self.xi.len()
    }
    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }
    pub fn index(&self, i: usize, j: usize) -> usize {
        self.offset + i * self.theta.len() + j
    }

    /// Node row/column and glued θ index for a possibly out-of-range ξ row.
    /// Returns `(row, ξ position in the extended chart, θ-index map)`.
    pub fn ghost_row(&self, i: isize) -> Option<(usize, f64, ThetaMap)> {
        let n = self.xi.len() as isize;
        if (0..n).contains(&i) {
            return Some((i as usize, self.xi[i as usize], ThetaMap::Identity));
        }
        let map = match self.gluing {
            Gluing::Pole => ThetaMap::Shift,
            Gluing::Fold => ThetaMap::Mirror,
            Gluing::Open => return None,
        };
        if i < 0 && i >= -n {
            let r = (-1 - i) as usize;
            Some((r, -self.xi[r], map))
        } else if i >= n && i < 2 * n {
            let r = (2 * n - 1 - i) as usize;
            Some((r, 2.0 * PI - self.xi[r], map))
        } else {
            None
        }
    }

    pub fn map_theta(&self, map: ThetaMap, j: isize) -> usize {
        let n = self.theta.len() as isize;
        let k = match map {
            ThetaMap::Identity => j,
            ThetaMap::Shift => j + n / 2,
            ThetaMap::Mirror => -1 - j,
        };
        k.rem_euclid(n) as usize
    }
}

/// How θ indices of a ghost row map onto real nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaMap {
    Identity,
    Shift,
    Mirror,
}

#[derive(Clone, Debug)]
pub struct SurfaceQuadrature {
    pub id: u64,
    pub surface: ParametricSurface,
    pub resolution: usize,
    pub grids: Vec<ChartGrid>,
    pub nodes: Vec<Node>,
}

impl SurfaceQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn weights(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.weight).collect()
    }
    pub fn area(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }
    /// Same node layout (so node-index pullback is meaningful).
    pub fn same_layout(&self, other: &SurfaceQuadrature) -> bool {
        self.resolution == other.resolution
            && self.grids.len() == other.grids.len()
            && self.grids.iter().zip(&other.grids).all(|(a, b)| a.xi == b.xi && a.theta == b.theta)
    }
    /// Weighted inner product `Σ aᵢ bᵢ wᵢ`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.nodes.iter().zip(a.iter().zip(b)).map(|(n, (x, y))| n.weight * x * y).sum()
    }
    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }
    pub fn grid_of(&self, node: usize) -> (&ChartGrid, usize, usize) {
        let g = self
            .grids
            .iter()
            .rev()
            .find(|g| g.offset <= node)
            .expect("node index within quadrature");
        let local = node - g.offset;
        (g, local / g.n_theta(), local % g.n_theta())
    }
}

/// Tensor-product quadrature: `resolution` nodes around θ and `resolution/2`
/// along ξ on every closed chart (resolution × resolution on open patches).
pub fn build_quadrature(surface: &ParametricSurface, resolution: usize) -> Result<SurfaceQuadrature> {
    if resolution < 8 {
        return Err(Error::Config(format!("resolution must be at least 8, got {resolution}")));
    }
    if resolution % 2 != 0 {
        return Err(Error::Config(format!("resolution must be even, got {resolution}")));
    }
    let mut grids = vec![];
    let mut params = vec![];
    let mut offset = 0;
    for (c, ch) in surface.charts.iter().enumerate() {
        let n_xi = if ch.theta_periodic { resolution / 2 } else { resolution };
        let (s, ws) = gauss_legendre(n_xi);
        let mut s_edges = vec![-1.0];
        for w in &ws {
            s_edges.push(s_edges.last().unwrap() + w);
        }
        *s_edges.last_mut().unwrap() = 1.0;
        let (a, b) = ch.xi_range;
        let to_xi = |t: f64| match ch.sampling {
            Sampling::Cosine => (-t).clamp(-1.0, 1.0).acos(),
            Sampling::Linear => a + (b - a) * 0.5 * (t + 1.0),
        };
        let dxi_ds = |xi: f64| match ch.sampling {
            Sampling::Cosine => 1.0 / xi.sin(),
            Sampling::Linear => 0.5 * (b - a),
        };
        let xi: Vec<f64> = s.iter().map(|&t| to_xi(t)).collect();
        let xi_w: Vec<f64> = xi.iter().zip(&ws).map(|(&x, w)| w * dxi_ds(x)).collect();
        let xi_edges: Vec<f64> = s_edges.iter().map(|&t| to_xi(t)).collect();
        let (ta, tb) = ch.theta_range;
        let (theta, theta_w, theta_edges) = if ch.theta_periodic {
            let n = resolution;
            let d = (tb - ta) / n as f64;
            (
                (0..n).map(|j| ta + (j as f64 + 0.5) * d).collect::<Vec<_>>(),
                vec![d; n],
                (0..=n).map(|j| ta + j as f64 * d).collect::<Vec<_>>(),
            )
        } else {
            let (t, w) = gauss_legendre(resolution);
            let mut e = vec![ta];
            let mut acc = -1.0;
            for wi in &w {
                acc += wi;
                e.push(ta + (tb - ta) * 0.5 * (acc + 1.0));
            }
            *e.last_mut().unwrap() = tb;
            (
                t.iter().map(|&x| ta + (tb - ta) * 0.5 * (x + 1.0)).collect(),
                w.iter().map(|&x| x * 0.5 * (tb - ta)).collect(),
                e,
            )
        };
        for i in 0..xi.len() {
            for j in 0..theta.len() {
                params.push((c, xi[i], theta[j], xi_w[i] * theta_w[j], xi_edges[i + 1] - xi_edges[i], theta_edges[j + 1] - theta_edges[j]));
            }
        }
        let len = xi.len() * theta.len();
        grids.push(ChartGrid {
            chart: c,
            offset,
            xi,
            theta,
            xi_edges,
            theta_edges,
            gluing: ch.gluing,
            theta_periodic: ch.theta_periodic,
        });
        offset += len;
    }
    let nodes: Vec<Node> = params
        .par_iter()
        .map(|&(c, u, v, pw, du, dv)| {
            let g = surface.local(c, u, v);
            let t1 = scale(g.xu, 1.0 / norm(g.xu));
            let t2raw = sub(g.xv, scale(t1, dot(g.xv, t1)));
            let t2 = scale(t2raw, 1.0 / norm(t2raw));
            Node {
                position: g.x,
                normal: g.normal,
                weight: pw * g.jac,
                tau: g.tau(),
                metric: g.metric(),
                tangent_frame: [t1, t2],
                chart: c,
                xi: u,
                theta: v,
                geometry: g,
                spacing: (norm(g.xu) * du).max(norm(g.xv) * dv),
            }
        })
        .collect();
    Ok(SurfaceQuadrature {
        id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
        surface: surface.clone(),
        resolution,
        grids,
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::surface::{make_surface, Shape};

    #[test]
    fn ghost_rows_glue_onto_the_same_points() {
        for shape in [Shape::Sphere { radius: 1.0 }, Shape::Ellipsoid { axes: [2.0, 1.0, 0.5] }] {
            let s = make_surface(&shape).unwrap();
            let q = build_quadrature(&s, 16).unwrap();
            let g = &q.grids[0];
            for i in [-2isize, -1, 8, 9] {
                let (row, xe, map) = g.ghost_row(i).unwrap();
                for j in 0..16 {
                    let p = s.position(0, xe, g.theta[j]);
                    let k = g.map_theta(map, j as isize);
                    let node = &q.nodes[g.index(row, k)];
                    assert!(norm(sub(p, node.position)) < 1e-12, "{shape:?} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn rejects_small_or_odd_resolution() {
        let s = make_surface(&Shape::Sphere { radius: 1.0 }).unwrap();
        assert!(build_quadrature(&s, 6).is_err());
        assert!(build_quadrature(&s, 17).is_err());
    }
}
