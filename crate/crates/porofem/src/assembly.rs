//! Assembly of the sparse operators and load vectors.
//!
//! All volume matrices use degree-4 quadrature (exact for products of P2
//! gradients on affine triangles); load vectors and error integrals use
//! degree-6. Boundary terms use 3-point Gauss rules on edges. Element loops
//! run in parallel chunks when the `parallel` feature is enabled; results are
//! merged in a fixed chunk order so both code paths produce bitwise identical
//! matrices.

use crate::fem::{edge_quadrature, eval_basis, p2_ref_hessians, quadrature, DofMap, ElemKind};
use crate::mesh::{BoundaryFacet, BoundaryTag, Mesh, TriGeom};
use crate::linalg::{CsrMatrix, Triplets};
use crate::params::{CheckedParams, Tensor2};

/// Triangles per parallel assembly chunk.
const CHUNK: usize = 256;

/// Mesh plus the degree-of-freedom maps for every field.
pub struct Spaces {
    pub mesh: Mesh,
    /// Vector-valued quadratic space (displacement).
    pub p2v: DofMap,
    /// Scalar linear space (auxiliary scalars and pressure projections).
    pub p1: DofMap,
    /// Cached element geometry.
    pub geoms: Vec<TriGeom>,
}

impl Spaces {
    pub fn new(mesh: Mesh) -> Spaces {
        let p2v = DofMap::build(&mesh, ElemKind::P2, 2);
        let p1 = DofMap::build(&mesh, ElemKind::P1, 1);
        let geoms = (0..mesh.n_triangles()).map(|t| mesh.tri_geom(t)).collect();
        Spaces { mesh, p2v, p1, geoms }
    }

    pub fn n_tau(&self) -> usize {
        self.p2v.n_dofs()
    }

    pub fn n_scalar(&self) -> usize {
        self.p1.n_dofs()
    }
}

// ---------------------------------------------------------------------------
// Parallel element loop
// ---------------------------------------------------------------------------

/// Runs `per_tri` over all triangles, collecting triplet contributions into a
/// deterministic order (chunked, chunk results concatenated in chunk order).
fn assemble_triplets<F>(
    spaces: &Spaces,
    n_rows: usize,
    n_cols: usize,
    per_tri: F,
) -> CsrMatrix
where
    F: Fn(usize, &mut Vec<(u32, u32, f64)>) + Sync,
{
    let n_tri = spaces.mesh.n_triangles();
    let chunk_results = map_chunks(n_tri, |range| {
        let mut local = Vec::new();
        for t in range {
            per_tri(t, &mut local);
        }
        local
    });
    let mut trip = Triplets::with_capacity(n_rows, n_cols, chunk_results.iter().map(Vec::len).sum());
    for chunk in chunk_results {
        trip.extend_from(chunk);
    }
    CsrMatrix::from_triplets(&trip)
}

/// Runs `per_tri` over all triangles accumulating a dense vector.
fn assemble_vector<F>(spaces: &Spaces, n: usize, per_tri: F) -> Vec<f64>
where
    F: Fn(usize, &mut Vec<(u32, f64)>) + Sync,
{
    let n_tri = spaces.mesh.n_triangles();
    let chunk_results = map_chunks(n_tri, |range| {
        let mut local = Vec::new();
        for t in range {
            per_tri(t, &mut local);
        }
        local
    });
    let mut out = vec![0.0; n];
    for chunk in chunk_results {
        for (dof, v) in chunk {
            out[dof as usize] += v;
        }
    }
    out
}

#[cfg(feature = "parallel")]
fn map_chunks<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let ranges: Vec<std::ops::Range<usize>> =
        (0..n).step_by(CHUNK).map(|s| s..(s + CHUNK).min(n)).collect();
    ranges.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    (0..n).step_by(CHUNK).map(|s| f(s..(s + CHUNK).min(n))).collect()
}

// ---------------------------------------------------------------------------
// Volume matrices
// ---------------------------------------------------------------------------

/// Strain inner product: entries `gamma * (eps(Phi_b), eps(Phi_a))` on the
/// vector quadratic space, where `eps` is the symmetric gradient.
pub fn assemble_elasticity(spaces: &Spaces, gamma: f64) -> CsrMatrix {
    let n = spaces.n_tau();
    let quad = quadrature(4).expect("degree-4 rule");
    assemble_triplets(spaces, n, n, |t, out| {
        let geom = &spaces.geoms[t];
        let nodes = spaces.p2v.cell_nodes(t);
        // Physical gradients of the six scalar basis functions per point.
        let mut sum = [[0.0f64; 12]; 12];
        for (pt, &w) in quad.points.iter().zip(&quad.weights) {
            let basis = eval_basis(ElemKind::P2, *pt);
            let grads: Vec<[f64; 2]> =
                (0..6).map(|a| geom.phys_grad(basis.grads[a])).collect();
            let wj = w * geom.det.abs();
            for a in 0..6 {
                for c in 0..2 {
                    for b in 0..6 {
                        for d in 0..2 {
                            // (eps(phi_b e_d), eps(phi_a e_c)) =
                            // 1/2 [ delta_cd grad(phi_a).grad(phi_b)
                            //       + d_c(phi_b) d_d(phi_a) ]
                            let mut v = grads[b][c] * grads[a][d];
                            if c == d {
                                v += grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1];
                            }
                            sum[2 * a + c][2 * b + d] += 0.5 * wj * v;
                        }
                    }
                }
            }
        }
        for a in 0..6 {
            for c in 0..2 {
                let row = spaces.p2v.dof(nodes[a] as usize, c) as u32;
                for b in 0..6 {
                    for d in 0..2 {
                        out.push((
                            row,
                            spaces.p2v.dof(nodes[b] as usize, d) as u32,
                            gamma * sum[2 * a + c][2 * b + d],
                        ));
                    }
                }
            }
        }
    })
}

/// Mixed divergence operator: entries `(div Phi_col, psi_row)` mapping the
/// vector quadratic space into the scalar linear space.
pub fn assemble_div(spaces: &Spaces) -> CsrMatrix {
    let quad = quadrature(4).expect("degree-4 rule");
    assemble_triplets(spaces, spaces.n_scalar(), spaces.n_tau(), |t, out| {
        let geom = &spaces.geoms[t];
        let p2_nodes = spaces.p2v.cell_nodes(t);
        let p1_nodes = spaces.p1.cell_nodes(t);
        let mut sum = [[0.0f64; 12]; 3];
        for (pt, &w) in quad.points.iter().zip(&quad.weights) {
            let b2 = eval_basis(ElemKind::P2, *pt);
            let b1 = eval_basis(ElemKind::P1, *pt);
            let wj = w * geom.det.abs();
            for b in 0..6 {
                let g = geom.phys_grad(b2.grads[b]);
                for d in 0..2 {
                    for i in 0..3 {
                        sum[i][2 * b + d] += wj * g[d] * b1.values[i];
                    }
                }
            }
        }
        for i in 0..3 {
            let row = p1_nodes[i];
            for b in 0..6 {
                for d in 0..2 {
                    out.push((
                        row,
                        spaces.p2v.dof(p2_nodes[b] as usize, d) as u32,
                        sum[i][2 * b + d],
                    ));
                }
            }
        }
    })
}

/// Scalar linear mass matrix.
pub fn assemble_mass_p1(spaces: &Spaces) -> CsrMatrix {
    let n = spaces.n_scalar();
    let quad = quadrature(2).expect("degree-2 rule");
    assemble_triplets(spaces, n, n, |t, out| {
        let geom = &spaces.geoms[t];
        let nodes = spaces.p1.cell_nodes(t);
        let mut sum = [[0.0f64; 3]; 3];
        for (pt, &w) in quad.points.iter().zip(&quad.weights) {
            let b1 = eval_basis(ElemKind::P1, *pt);
            let wj = w * geom.det.abs();
            for i in 0..3 {
                for j in 0..3 {
                    sum[i][j] += wj * b1.values[i] * b1.values[j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                out.push((nodes[i], nodes[j], sum[i][j]));
            }
        }
    })
}

/// Vector quadratic mass matrix (block diagonal over components).
pub fn assemble_mass_p2v(spaces: &Spaces) -> CsrMatrix {
    let n = spaces.n_tau();
    let quad = quadrature(4).expect("degree-4 rule");
    assemble_triplets(spaces, n, n, |t, out| {
        let geom = &spaces.geoms[t];
        let nodes = spaces.p2v.cell_nodes(t);
        let mut sum = [[0.0f64; 6]; 6];
        for (pt, &w) in quad.points.iter().zip(&quad.weights) {
            let basis = eval_basis(ElemKind::P2, *pt);
            let wj = w * geom.det.abs();
            for a in 0..6 {
                for b in 0..6 {
                    sum[a][b] += wj * basis.values[a] * basis.values[b];
                }
            }
        }
        for a in 0..6 {
            for b in 0..6 {
                for c in 0..2 {
                    out.push((
                        spaces.p2v.dof(nodes[a] as usize, c) as u32,
                        spaces.p2v.dof(nodes[b] as usize, c) as u32,
                        sum[a][b],
                    ));
                }
            }
        }
    })
}

/// Vector quadratic stiffness matrix `(grad u, grad v)` (componentwise).
pub fn assemble_stiffness_p2v(spaces: &Spaces) -> CsrMatrix {
    let n = spaces.n_tau();
    let quad = quadrature(4).expect("degree-4 rule");
    assemble_triplets(spaces, n, n, |t, out| {
        let geom = &spaces.geoms[t];
        let nodes = spaces.p2v.cell_nodes(t);
        let mut sum = [[0.0f64; 6]; 6];
        for (pt, &w) in quad.points.iter().zip(&quad.weights) {
            let basis = eval_basis(ElemKind::P2, *pt);
            let grads: Vec<[f64; 2]> =
                (0..6).map(|a| geom.phys_grad(basis.grads[a])).collect();
            let wj = w * geom.det.abs();
            for a in 0..6 {
                for b in 0..6 {
                    sum[a][b] += wj * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                }
            }
        }
        for a in 0..6 {
            for b in 0..6 {
                for c in 0..2 {
                    out.push((
                        spaces.p2v.dof(nodes[a] as usize, c) as u32,
                        spaces.p2v.dof(nodes[b] as usize, c) as u32,
                        sum[a][b],
                    ));
                }
            }
        }
    })
}

/// Pressure diffusion matrix `(1/theta_f) (K grad u, grad v)` on the scalar
/// linear space.
pub fn assemble_diffusion(spaces: &Spaces, permeability: Tensor2, theta_f: f64) -> CsrMatrix {
    let n = spaces.n_scalar();
    let quad = quadrature(2).expect("degree-2 rule");
    assemble_triplets(spaces, n, n, |t, out| {
        let geom = &spaces.geoms[t];
        let nodes = spaces.p1.cell_nodes(t);
        let mut sum = [[0.0f64; 3]; 3];
        for (pt, &w) in quad.points.iter().zip(&quad.weights) {
            let b1 = eval_basis(ElemKind::P1, *pt);
            let grads: Vec<[f64; 2]> =
                (0..3).map(|i| geom.phys_grad(b1.grads[i])).collect();
            let wj = w * geom.det.abs() / theta_f;
            for i in 0..3 {
                let kg = permeability.apply(grads[i]);
                for j in 0..3 {
                    sum[j][i] += wj * (kg[0] * grads[j][0] + kg[1] * grads[j][1]);
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                out.push((nodes[i], nodes[j], sum[i][j]));
            }
        }
    })
}

/// Coupling matrix with entries `(1/theta_f) (K grad(div Phi_col), grad psi_row)`
/// where `div Phi` is the elementwise (broken linear) divergence of a vector
/// quadratic basis function. Used for the time-lagged dilation terms.
pub fn assemble_broken_divgrad(spaces: &Spaces, permeability: Tensor2, theta_f: f64) -> CsrMatrix {
    let hess_ref = p2_ref_hessians();
    let quad = quadrature(2).expect("degree-2 rule");
    assemble_triplets(spaces, spaces.n_scalar(), spaces.n_tau(), |t, out| {
        let geom = &spaces.geoms[t];
        let p2_nodes = spaces.p2v.cell_nodes(t);
        let p1_nodes = spaces.p1.cell_nodes(t);
        // grad(div(phi_b e_d)) is constant per element: column d of the
        // physical Hessian of phi_b.
        let mut grad_div = [[[0.0f64; 2]; 2]; 6];
        for b in 0..6 {
            let h = geom.phys_hessian(hess_ref[b]);
            for d in 0..2 {
                grad_div[b][d] = [h[0][d], h[1][d]];
            }
        }
        let mut sum = [[0.0f64; 12]; 3];
        for (pt, &w) in quad.points.iter().zip(&quad.weights) {
            let b1 = eval_basis(ElemKind::P1, *pt);
            let wj = w * geom.det.abs() / theta_f;
            for b in 0..6 {
                for d in 0..2 {
                    let kg = permeability.apply(grad_div[b][d]);
                    for i in 0..3 {
                        let gi = geom.phys_grad(b1.grads[i]);
                        sum[i][2 * b + d] += wj * (kg[0] * gi[0] + kg[1] * gi[1]);
                    }
                }
            }
        }
        for i in 0..3 {
            for b in 0..6 {
                for d in 0..2 {
                    out.push((
                        p1_nodes[i],
                        spaces.p2v.dof(p2_nodes[b] as usize, d) as u32,
                        sum[i][2 * b + d],
                    ));
                }
            }
        }
    })
}

/// Divergence-divergence matrix `(div Phi_col, div Phi_row)` on the vector
/// quadratic space.
pub fn assemble_div_div(spaces: &Spaces) -> CsrMatrix {
    let n = spaces.n_tau();
    let quad = quadrature(4).expect("degree-4 rule");
    assemble_triplets(spaces, n, n, |t, out| {
        let geom = &spaces.geoms[t];
        let nodes = spaces.p2v.cell_nodes(t);
        let mut sum = [[0.0f64; 12]; 12];
        for (pt, &w) in quad.points.iter().zip(&quad.weights) {
            let basis = eval_basis(ElemKind::P2, *pt);
            let grads: Vec<[f64; 2]> =
                (0..6).map(|a| geom.phys_grad(basis.grads[a])).collect();
            let wj = w * geom.det.abs();
            for a in 0..6 {
                for c in 0..2 {
                    for b in 0..6 {
                        for d in 0..2 {
                            sum[2 * a + c][2 * b + d] += wj * grads[a][c] * grads[b][d];
                        }
                    }
                }
            }
        }
        for a in 0..6 {
            for c in 0..2 {
                let row = spaces.p2v.dof(nodes[a] as usize, c) as u32;
                for b in 0..6 {
                    for d in 0..2 {
                        out.push((
                            row,
                            spaces.p2v.dof(nodes[b] as usize, d) as u32,
                            sum[2 * a + c][2 * b + d],
                        ));
                    }
                }
            }
        }
    })
}

/// The full set of constant-in-time operators for one mesh.
pub struct Operators {
    /// Strain form scaled by `gamma`.
    pub a_eps: CsrMatrix,
    /// Mixed divergence (scalar rows, vector columns).
    pub b_div: CsrMatrix,
    /// Scalar mass.
    pub m_s: CsrMatrix,
    /// Pressure diffusion.
    pub d_k: CsrMatrix,
    /// Broken-dilation diffusion coupling (scalar rows, vector columns).
    pub g_k: CsrMatrix,
    /// Divergence-divergence form on the vector space.
    pub c_div: CsrMatrix,
}

impl Operators {
    pub fn build(spaces: &Spaces, params: &CheckedParams) -> Operators {
        Operators {
            a_eps: assemble_elasticity(spaces, params.consts.gamma),
            b_div: assemble_div(spaces),
            m_s: assemble_mass_p1(spaces),
            d_k: assemble_diffusion(spaces, params.phys.permeability, params.phys.theta_f),
            g_k: assemble_broken_divgrad(spaces, params.phys.permeability, params.phys.theta_f),
            c_div: assemble_div_div(spaces),
        }
    }
}

// ---------------------------------------------------------------------------
// Load vectors
// ---------------------------------------------------------------------------

/// Volume load `(f, v)` against the vector quadratic space, degree-6 rule.
pub fn assemble_load_vec<F>(spaces: &Spaces, f: F) -> Vec<f64>
where
    F: Fn([f64; 2]) -> [f64; 2] + Sync,
{
    let quad = quadrature(6).expect("degree-6 rule");
    assemble_vector(spaces, spaces.n_tau(), |t, out| {
        let geom = &spaces.geoms[t];
        let verts = spaces.mesh.tri_vertices(t);
        let nodes = spaces.p2v.cell_nodes(t);
        let mut sum = [[0.0f64; 2]; 6];
        for (pt, &w) in quad.points.iter().zip(&quad.weights) {
            let basis = eval_basis(ElemKind::P2, *pt);
            let x = barycentric_to_point(verts, *pt);
            let fval = f(x);
            let wj = w * geom.det.abs();
            for a in 0..6 {
                sum[a][0] += wj * basis.values[a] * fval[0];
                sum[a][1] += wj * basis.values[a] * fval[1];
            }
        }
        for a in 0..6 {
            for c in 0..2 {
                out.push((spaces.p2v.dof(nodes[a] as usize, c) as u32, sum[a][c]));
            }
        }
    })
}

/// Volume load `(f, psi)` against the scalar linear space, degree-6 rule.
pub fn assemble_load_scalar<F>(spaces: &Spaces, f: F) -> Vec<f64>
where
    F: Fn([f64; 2]) -> f64 + Sync,
{
    let quad = quadrature(6).expect("degree-6 rule");
    assemble_vector(spaces, spaces.n_scalar(), |t, out| {
        let geom = &spaces.geoms[t];
        let verts = spaces.mesh.tri_vertices(t);
        let nodes = spaces.p1.cell_nodes(t);
        let mut sum = [0.0f64; 3];
        for (pt, &w) in quad.points.iter().zip(&quad.weights) {
            let b1 = eval_basis(ElemKind::P1, *pt);
            let x = barycentric_to_point(verts, *pt);
            let fval = f(x);
            let wj = w * geom.det.abs();
            for i in 0..3 {
                sum[i] += wj * b1.values[i] * fval;
            }
        }
        for i in 0..3 {
            out.push((nodes[i], sum[i]));
        }
    })
}

pub fn barycentric_to_point(verts: [[f64; 2]; 3], bary: [f64; 3]) -> [f64; 2] {
    [
        bary[0] * verts[0][0] + bary[1] * verts[1][0] + bary[2] * verts[2][0],
        bary[0] * verts[0][1] + bary[1] * verts[1][1] + bary[2] * verts[2][1],
    ]
}

/// Boundary traction term `<g, v>` over the facets of one side. The `mask`
/// callback decides per facet which displacement components receive the
/// load, so callers can restrict it to part of a side or to the components
/// that are not otherwise constrained.
pub fn assemble_traction<M, G>(spaces: &Spaces, tag: BoundaryTag, mask: M, g: G) -> Vec<f64>
where
    M: Fn(&BoundaryFacet) -> [bool; 2],
    G: Fn([f64; 2], &BoundaryFacet) -> [f64; 2],
{
    let rule = edge_quadrature();
    let mut out = vec![0.0; spaces.n_tau()];
    for facet in spaces.mesh.boundary_facets(tag) {
        let mask = mask(facet);
        if !mask[0] && !mask[1] {
            continue;
        }
        let nodes = spaces.p2v.facet_nodes(&spaces.mesh, facet);
        let a = spaces.mesh.vertices[facet.vertices[0]];
        let b = spaces.mesh.vertices[facet.vertices[1]];
        for (&s, &w) in rule.0.iter().zip(&rule.1) {
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let val = g(x, facet);
            // Quadratic trace basis on the edge: ends then midpoint.
            let tr = [
                (1.0 - s) * (1.0 - 2.0 * s),
                s * (2.0 * s - 1.0),
                4.0 * s * (1.0 - s),
            ];
            let wl = w * facet.length;
            for (k, &node) in nodes.iter().enumerate() {
                for c in 0..2 {
                    if mask[c] {
                        out[spaces.p2v.dof(node, c)] += wl * tr[k] * val[c];
                    }
                }
            }
        }
    }
    out
}

/// Boundary flux term `<g, psi>` on the scalar linear space over one side.
pub fn assemble_flux<G>(spaces: &Spaces, tag: BoundaryTag, g: G) -> Vec<f64>
where
    G: Fn([f64; 2], &BoundaryFacet) -> f64,
{
    let rule = edge_quadrature();
    let mut out = vec![0.0; spaces.n_scalar()];
    for facet in spaces.mesh.boundary_facets(tag) {
        let a = spaces.mesh.vertices[facet.vertices[0]];
        let b = spaces.mesh.vertices[facet.vertices[1]];
        for (&s, &w) in rule.0.iter().zip(&rule.1) {
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let val = g(x, facet);
            let tr = [1.0 - s, s];
            let wl = w * facet.length;
            for (k, &v) in facet.vertices.iter().enumerate() {
                out[v] += wl * tr[k] * val;
            }
        }
    }
    out
}

/// Gravity contribution to the flow equation: `(1/theta_f)(K rho_f g, grad psi)`.
pub fn assemble_gravity_flux(spaces: &Spaces, params: &CheckedParams) -> Vec<f64> {
    let kg = params.phys.permeability.apply(params.phys.rho_f_g);
    if kg[0] == 0.0 && kg[1] == 0.0 {
        return vec![0.0; spaces.n_scalar()];
    }
    let quad = quadrature(2).expect("degree-2 rule");
    assemble_vector(spaces, spaces.n_scalar(), |t, out| {
        let geom = &spaces.geoms[t];
        let nodes = spaces.p1.cell_nodes(t);
        let mut sum = [0.0f64; 3];
        for (pt, &w) in quad.points.iter().zip(&quad.weights) {
            let b1 = eval_basis(ElemKind::P1, *pt);
            let wj = w * geom.det.abs() / params.phys.theta_f;
            for i in 0..3 {
                let gi = geom.phys_grad(b1.grads[i]);
                sum[i] += wj * (kg[0] * gi[0] + kg[1] * gi[1]);
            }
        }
        for i in 0..3 {
            out.push((nodes[i], sum[i]));
        }
    })
}

/// Interpolates nodal values of a scalar field into the linear space.
pub fn interpolate_p1<F>(spaces: &Spaces, f: F) -> Vec<f64>
where
    F: Fn([f64; 2]) -> f64,
{
    crate::fem::interpolate(&spaces.p1, f)
}

/// Interpolates nodal values of a vector field into the quadratic space
/// (interleaved components).
pub fn interpolate_p2v<F>(spaces: &Spaces, f: F) -> Vec<f64>
where
    F: Fn([f64; 2]) -> [f64; 2],
{
    crate::fem::interpolate_vec(&spaces.p2v, f)
}

/// Checks `op` for symmetry; returns the largest asymmetry found.
pub fn max_asymmetry(a: &CsrMatrix) -> f64 {
    let at = a.transpose();
    let mut worst = 0.0f64;
    for i in 0..a.n_rows {
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.col_idx[k] as usize;
            worst = worst.max((a.values[k] - at.get(i, j)).abs());
        }
    }
    worst
}

/// L2 inner products of a vector quadratic coefficient vector with the three
/// rigid motions `(1,0)`, `(0,1)`, `(-y, x)`, via the mass matrix.
pub fn rigid_motion_products(
    spaces: &Spaces,
    mass_p2v: &CsrMatrix,
    tau: &[f64],
) -> [f64; 3] {
    let modes = rigid_motion_basis(spaces);
    [
        mass_p2v.quad_form(&modes[0], tau),
        mass_p2v.quad_form(&modes[1], tau),
        mass_p2v.quad_form(&modes[2], tau),
    ]
}

/// Nodal interpolants of the three rigid motions.
pub fn rigid_motion_basis(spaces: &Spaces) -> [Vec<f64>; 3] {
    let tx = crate::fem::interpolate_vec(&spaces.p2v, |_x| [1.0, 0.0]);
    let ty = crate::fem::interpolate_vec(&spaces.p2v, |_x| [0.0, 1.0]);
    let rot = crate::fem::interpolate_vec(&spaces.p2v, |x: [f64; 2]| [-x[1], x[0]]);
    [tx, ty, rot]
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
