//! First-order shape derivatives of the boundary operators under `x ↦ x + εh(x)n(x)`,
//! pulled back to the unperturbed surface. Exterior traces throughout; the
//! `±½I` parts of the traces cancel in both composites.

use faer::Mat;
use rayon::prelude::*;

use super::kernels::Kernel;
use super::nearfield::{NearField, Target};
use super::operator::{BoundaryOperatorMatrix, OperatorKind};
use crate::error::{Error, Result};
use crate::geometry::diffops::{compact, SparseRow};
use crate::geometry::vec3::{axpy, dot};
use crate::geometry::{ParamStencils, PerturbationField, SurfaceQuadrature};

/// Normal offset of the finite-difference targets, in units of local node spacing.
pub const FD_OFFSET: f64 = 1e-2;

fn check_field(quad: &SurfaceQuadrature, h: &PerturbationField) -> Result<()> {
    if h.quad_id != quad.id {
        return Err(Error::QuadratureMismatch { expected: quad.id, found: h.quad_id });
    }
    Ok(())
}

fn expect_kind(m: &BoundaryOperatorMatrix, kind: OperatorKind, quad: &SurfaceQuadrature) -> Result<()> {
    m.check(quad)?;
    if m.kind != kind {
        return Err(Error::Domain(format!("expected {kind:?} matrix, got {:?}", m.kind)));
    }
    Ok(())
}

/// `S¹ψ = −2S[τhψ] + h(½I + K*)ψ + (−½I + K)[hψ] = −2S[τhψ] + hK*ψ + K[hψ]`.
pub fn assemble_s1(
    quad: &SurfaceQuadrature,
    h: &PerturbationField,
    s: &BoundaryOperatorMatrix,
    k: &BoundaryOperatorMatrix,
    kstar: &BoundaryOperatorMatrix,
) -> Result<BoundaryOperatorMatrix> {
    check_field(quad, h)?;
    expect_kind(s, OperatorKind::S, quad)?;
    expect_kind(k, OperatorKind::K, quad)?;
    expect_kind(kstar, OperatorKind::Kstar, quad)?;
    if h.is_zero() {
        return Ok(BoundaryOperatorMatrix::zeros(OperatorKind::S1, quad));
    }
    let n = quad.len();
    let th: Vec<f64> = (0..n).map(|j| quad.nodes[j].tau * h.h[j]).collect();
    let entries = Mat::from_fn(n, n, |i, j| {
        -2.0 * s.entries[(i, j)] * th[j] + h.h[i] * kstar.entries[(i, j)] + k.entries[(i, j)] * h.h[j]
    });
    Ok(BoundaryOperatorMatrix { kind: OperatorKind::S1, entries, quad_id: quad.id })
}

/// Rows of `L_h f = ∇_Γ·(h∇_Γ f) = hΔ_G f + ∇_Γh·∇_Γf`.
fn weighted_laplacian_rows(quad: &SurfaceQuadrature, h: &PerturbationField) -> Vec<SparseRow> {
    let st = ParamStencils::new(quad);
    let lb = st.laplace_beltrami_rows(quad);
    (0..quad.len())
        .into_par_iter()
        .map(|i| {
            let node = &quad.nodes[i];
            let [[e, f], [_, g]] = node.metric;
            let det = e * g - f * f;
            let hu = dot(h.grad_t_h[i], node.geometry.xu);
            let hv = dot(h.grad_t_h[i], node.geometry.xv);
            let cu = (g * hu - f * hv) / det;
            let cv = (e * hv - f * hu) / det;
            let mut row: SparseRow = lb[i].iter().map(|&(j, c)| (j, c * h.h[i])).collect();
            row.extend(st.du[i].iter().map(|&(j, c)| (j, c * cu)));
            row.extend(st.dv[i].iter().map(|&(j, c)| (j, c * cv)));
            compact(row)
        })
        .collect()
}

/// Row of `∂D[ψ]/∂n` at node `i`: one-sided three-point extrapolations of the
/// off-surface double layer at `δ, 2δ, 3δ` on either side, averaged.
fn normal_derivative_double_row(quad: &SurfaceQuadrature, nf: &NearField, i: usize) -> Vec<f64> {
    const W: [f64; 3] = [-2.5, 4.0, -1.5];
    let node = &quad.nodes[i];
    let delta = FD_OFFSET * node.spacing;
    let mut targets = Vec::with_capacity(6);
    for (m, w) in W.iter().enumerate() {
        let t = (m + 1) as f64 * delta;
        targets.push(Target { x: axpy(t, node.normal, node.position), coef: 0.5 * w / delta });
        targets.push(Target { x: axpy(-t, node.normal, node.position), coef: -0.5 * w / delta });
    }
    nf.row(Kernel::Double, &targets, None)
}

/// `K¹ψ = 2(τh(½I+K*)ψ − (½I+K*)[τhψ]) + ∂D[hψ]/∂n − L_h S[ψ]`.
pub fn assemble_k1(
    quad: &SurfaceQuadrature,
    h: &PerturbationField,
    s: &BoundaryOperatorMatrix,
    kstar: &BoundaryOperatorMatrix,
    nf: &NearField,
) -> Result<BoundaryOperatorMatrix> {
    check_field(quad, h)?;
    expect_kind(s, OperatorKind::S, quad)?;
    expect_kind(kstar, OperatorKind::Kstar, quad)?;
    if nf.quad_id != quad.id {
        return Err(Error::QuadratureMismatch { expected: quad.id, found: nf.quad_id });
    }
    if h.is_zero() {
        return Ok(BoundaryOperatorMatrix::zeros(OperatorKind::K1, quad));
    }
    let n = quad.len();
    let th: Vec<f64> = (0..n).map(|j| quad.nodes[j].tau * h.h[j]).collect();
    let lh = weighted_laplacian_rows(quad, h);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = normal_derivative_double_row(quad, nf, i);
            for (j, r) in row.iter_mut().enumerate() {
                *r *= h.h[j];
                *r += 2.0 * (th[i] - th[j]) * kstar.entries[(i, j)];
            }
            for &(m, c) in &lh[i] {
                for (j, r) in row.iter_mut().enumerate() {
                    *r -= c * s.entries[(m, j)];
                }
            }
            row
        })
        .collect();
    Ok(BoundaryOperatorMatrix::from_rows(OperatorKind::K1, quad, &rows))
}
