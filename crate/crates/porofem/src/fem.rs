//! Reference elements, quadrature rules, degree-of-freedom maps, and field
//! evaluation on triangulated rectangles.
//!
//! Conventions used throughout the crate:
//! - Reference triangle: vertices (0,0), (1,0), (0,1); barycentric
//!   coordinates (L0, L1, L2) = (1-xi-eta, xi, eta).
//! - Quadratic (P2) local node order: the three vertices, then the edge
//!   midpoints opposite to them in the order mid(v0,v1), mid(v1,v2),
//!   mid(v2,v0).
//! - Vector fields store components interleaved: dof = node * n_components
//!   + component.

use crate::error::{Error, Result};
use crate::mesh::{BoundaryFacet, Mesh};

/// Continuous Lagrange element family on triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElemKind {
    /// Piecewise linear, 3 nodes.
    P1,
    /// Piecewise quadratic, 6 nodes.
    P2,
}

impl ElemKind {
    /// Number of local scalar basis functions.
    pub fn local_nodes(self) -> usize {
        match self {
            ElemKind::P1 => 3,
            ElemKind::P2 => 6,
        }
    }
}

/// Basis values and reference-coordinate gradients at one point.
#[derive(Debug, Clone, Copy)]
pub struct BasisEval {
    /// Number of valid entries (3 for P1, 6 for P2).
    pub n: usize,
    pub values: [f64; 6],
    /// Gradients with respect to (xi, eta) on the reference triangle.
    pub grads: [[f64; 2]; 6],
}

/// Evaluates all basis functions of `kind` at barycentric point
/// `(l0, l1, l2) = (1-xi-eta, xi, eta)`.
pub fn eval_basis(kind: ElemKind, bary: [f64; 3]) -> BasisEval {
    let [l0, l1, l2] = bary;
    match kind {
        ElemKind::P1 => BasisEval {
            n: 3,
            values: [l0, l1, l2, 0.0, 0.0, 0.0],
            grads: [
                [-1.0, -1.0],
                [1.0, 0.0],
                [0.0, 1.0],
                [0.0, 0.0],
                [0.0, 0.0],
                [0.0, 0.0],
            ],
        },
        ElemKind::P2 => {
            // Gradients of the barycentric coordinates in (xi, eta).
            const DL: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
            let mut values = [0.0; 6];
            let mut grads = [[0.0; 2]; 6];
            let l = [l0, l1, l2];
            for i in 0..3 {
                values[i] = l[i] * (2.0 * l[i] - 1.0);
                grads[i] = [(4.0 * l[i] - 1.0) * DL[i][0], (4.0 * l[i] - 1.0) * DL[i][1]];
            }
            // Edge bubbles: (v0,v1), (v1,v2), (v2,v0).
            const EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];
            for (k, &(a, b)) in EDGES.iter().enumerate() {
                values[3 + k] = 4.0 * l[a] * l[b];
                grads[3 + k] = [
                    4.0 * (l[a] * DL[b][0] + l[b] * DL[a][0]),
                    4.0 * (l[a] * DL[b][1] + l[b] * DL[a][1]),
                ];
            }
            BasisEval { n: 6, values, grads }
        }
    }
}

/// Constant reference-coordinate Hessians of the six P2 basis functions,
/// `[d2/dxi2, d2/dxi deta; d2/deta dxi, d2/deta2]` each.
pub fn p2_ref_hessians() -> [[[f64; 2]; 2]; 6] {
    const DL: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    let mut h = [[[0.0; 2]; 2]; 6];
    // Vertex functions L(2L-1): Hessian 4 * dL dL^T.
    for i in 0..3 {
        for r in 0..2 {
            for c in 0..2 {
                h[i][r][c] = 4.0 * DL[i][r] * DL[i][c];
            }
        }
    }
    // Edge bubbles 4 La Lb: Hessian 4 (dLa dLb^T + dLb dLa^T).
    const EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];
    for (k, &(a, b)) in EDGES.iter().enumerate() {
        for r in 0..2 {
            for c in 0..2 {
                h[3 + k][r][c] = 4.0 * (DL[a][r] * DL[b][c] + DL[b][r] * DL[a][c]);
            }
        }
    }
    h
}

/// Quadrature rule on the reference triangle. Weights include the reference
/// area, so `sum(weights) = 1/2` and `integral over T of f =
/// |det J| * sum_i w_i f(x(bary_i))`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Returns a rule exact for polynomials of (at least) the requested degree.
/// Supported requests: 1..=6.
pub fn quadrature(degree: usize) -> Result<QuadratureRule> {
    match degree {
        0 | 1 => Ok(QuadratureRule {
            degree: 1,
            points: vec![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
        }),
        2 | 3 | 4 => {
            // Six-point rule of degree 4.
            let mut points = Vec::with_capacity(6);
            let mut weights = Vec::with_capacity(6);
            let groups = [
                (0.223_381_589_678_011, 0.108_103_018_168_070, 0.445_948_490_915_965),
                (0.109_951_743_655_322, 0.816_847_572_980_459, 0.091_576_213_509_771),
            ];
            for &(w, a, b) in &groups {
                points.push([a, b, b]);
                points.push([b, a, b]);
                points.push([b, b, a]);
                for _ in 0..3 {
                    weights.push(0.5 * w);
                }
            }
            Ok(QuadratureRule { degree: 4, points, weights })
        }
        5 | 6 => {
            // Twelve-point rule of degree 6.
            let mut points = Vec::with_capacity(12);
            let mut weights = Vec::with_capacity(12);
            let sym3 = [
                (0.116_786_275_726_379, 0.501_426_509_658_179, 0.249_286_745_170_910),
                (0.050_844_906_370_207, 0.873_821_971_016_996, 0.063_089_014_491_502),
            ];
            for &(w, a, b) in &sym3 {
                points.push([a, b, b]);
                points.push([b, a, b]);
                points.push([b, b, a]);
                for _ in 0..3 {
                    weights.push(0.5 * w);
                }
            }
            let (w, a, b, c) =
                (0.082_851_075_618_374, 0.053_145_049_844_817, 0.310_352_451_033_784, 0.636_502_499_121_399);
            for perm in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                points.push(perm);
                weights.push(0.5 * w);
            }
            Ok(QuadratureRule { degree: 6, points, weights })
        }
        d => Err(Error::UnsupportedQuadrature(d)),
    }
}

/// Three-point Gauss rule on the unit interval `[0, 1]`, exact for degree 5.
/// Returns `(points, weights)` with weights summing to 1.
pub fn edge_quadrature() -> ([f64; 3], [f64; 3]) {
    let r = (0.6f64).sqrt();
    ([0.5 * (1.0 - r), 0.5, 0.5 * (1.0 + r)], [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])
}

/// Degree-of-freedom map for a (possibly vector-valued) Lagrange space on a
/// mesh. Scalar support points are the mesh vertices (P1) or vertices plus
/// edge midpoints (P2); vector dofs interleave components per node.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub kind: ElemKind,
    pub n_components: usize,
    /// Number of scalar support points.
    pub n_nodes: usize,
    /// Coordinates of every support point.
    pub coords: Vec<[f64; 2]>,
    cells: Vec<u32>,
}

impl DofMap {
    /// Builds the map for `kind` with `n_components` field components.
    pub fn build(mesh: &Mesh, kind: ElemKind, n_components: usize) -> DofMap {
        assert!(n_components == 1 || n_components == 2, "only scalar and 2-vector fields supported");
        let nv = mesh.vertices.len();
        let (n_nodes, locals) = match kind {
            ElemKind::P1 => (nv, 3),
            ElemKind::P2 => (nv + mesh.edges.len(), 6),
        };
        let mut coords = Vec::with_capacity(n_nodes);
        coords.extend_from_slice(&mesh.vertices);
        if kind == ElemKind::P2 {
            for e in &mesh.edges {
                let a = mesh.vertices[e[0]];
                let b = mesh.vertices[e[1]];
                coords.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            }
        }
        let mut cells = Vec::with_capacity(mesh.triangles.len() * locals);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            cells.extend(tri.iter().map(|&v| v as u32));
            if kind == ElemKind::P2 {
                cells.extend(mesh.tri_edges[t].iter().map(|&e| (nv + e) as u32));
            }
        }
        DofMap { kind, n_components, n_nodes, coords, cells }
    }

    /// Total number of degrees of freedom.
    pub fn n_dofs(&self) -> usize {
        self.n_nodes * self.n_components
    }

    /// Number of scalar nodes per cell.
    pub fn local_nodes(&self) -> usize {
        self.kind.local_nodes()
    }

    /// Number of dofs per cell.
    pub fn local_dofs(&self) -> usize {
        self.kind.local_nodes() * self.n_components
    }

    /// Global scalar node ids of cell `t`, in reference order.
    pub fn cell_nodes(&self, t: usize) -> &[u32] {
        let l = self.local_nodes();
        &self.cells[t * l..(t + 1) * l]
    }

    /// Global dof index of `(node, component)`.
    pub fn dof(&self, node: usize, component: usize) -> usize {
        node * self.n_components + component
    }

    /// Scalar node ids on the boundary facet, ordered along the facet:
    /// `[start, end]` for P1, `[start, end, midpoint]` for P2.
    pub fn facet_nodes(&self, mesh: &Mesh, facet: &BoundaryFacet) -> Vec<usize> {
        let mut nodes = vec![facet.vertices[0], facet.vertices[1]];
        if self.kind == ElemKind::P2 {
            nodes.push(mesh.vertices.len() + facet.edge);
        }
        nodes
    }

    /// Sorted, deduplicated scalar node ids lying on the given boundary side.
    pub fn boundary_nodes(&self, mesh: &Mesh, tag: crate::mesh::BoundaryTag) -> Vec<usize> {
        let mut nodes: Vec<usize> =
            mesh.boundary_facets(tag).flat_map(|f| self.facet_nodes(mesh, f)).collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }
}

/// Nodal interpolation of a scalar function.
pub fn interpolate(map: &DofMap, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    assert_eq!(map.n_components, 1);
    map.coords.iter().map(|&x| f(x)).collect()
}

/// Nodal interpolation of a 2-vector function (interleaved components).
pub fn interpolate_vec(map: &DofMap, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    assert_eq!(map.n_components, 2);
    let mut out = Vec::with_capacity(map.n_dofs());
    for &x in &map.coords {
        let v = f(x);
        out.push(v[0]);
        out.push(v[1]);
    }
    out
}

/// Value and physical gradient of a scalar field at a barycentric point of
/// triangle `tri`.
pub fn eval_field(
    map: &DofMap,
    coeffs: &[f64],
    mesh: &Mesh,
    tri: usize,
    bary: [f64; 3],
) -> (f64, [f64; 2]) {
    assert_eq!(map.n_components, 1);
    let basis = eval_basis(map.kind, bary);
    let geom = mesh.tri_geom(tri);
    let nodes = map.cell_nodes(tri);
    let mut value = 0.0;
    let mut grad = [0.0; 2];
    for (a, &node) in nodes.iter().enumerate() {
        let c = coeffs[node as usize];
        value += c * basis.values[a];
        let g = geom.phys_grad(basis.grads[a]);
        grad[0] += c * g[0];
        grad[1] += c * g[1];
    }
    (value, grad)
}

/// Value, physical gradient `grad[i][j] = d u_i / d x_j`, and divergence of a
/// 2-vector field at a barycentric point of triangle `tri`.
pub fn eval_field_vec(
    map: &DofMap,
    coeffs: &[f64],
    mesh: &Mesh,
    tri: usize,
    bary: [f64; 3],
) -> ([f64; 2], [[f64; 2]; 2], f64) {
    assert_eq!(map.n_components, 2);
    let basis = eval_basis(map.kind, bary);
    let geom = mesh.tri_geom(tri);
    let nodes = map.cell_nodes(tri);
    let mut value = [0.0; 2];
    let mut grad = [[0.0; 2]; 2];
    for (a, &node) in nodes.iter().enumerate() {
        let g = geom.phys_grad(basis.grads[a]);
        for comp in 0..2 {
            let c = coeffs[2 * node as usize + comp];
            value[comp] += c * basis.values[a];
            grad[comp][0] += c * g[0];
            grad[comp][1] += c * g[1];
        }
    }
    (value, grad, grad[0][0] + grad[1][1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Mesh, Rect};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// Exact integral of xi^a eta^b over the reference triangle.
    fn ref_monomial_integral(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>().max(1.0);
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn quadrature_rules_are_exact_to_declared_degree() {
        for degree in [1usize, 2, 4, 6] {
            let rule = quadrature(degree).unwrap();
            assert_relative_eq!(rule.weights.iter().sum::<f64>(), 0.5, max_relative = 1e-14);
            for a in 0..=rule.degree as u32 {
                for b in 0..=(rule.degree as u32 - a) {
                    let num: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                        .sum();
                    assert_relative_eq!(
                        num,
                        ref_monomial_integral(a, b),
                        max_relative = 1e-13,
                        epsilon = 1e-15
                    );
                }
            }
        }
        assert!(quadrature(7).is_err());
    }

    #[test]
    fn edge_rule_integrates_quintics() {
        let (pts, wts) = edge_quadrature();
        for deg in 0..=5u32 {
            let num: f64 = pts.iter().zip(&wts).map(|(s, w)| w * s.powi(deg as i32)).sum();
            assert_relative_eq!(num, 1.0 / (deg as f64 + 1.0), max_relative = 1e-14);
        }
    }

    #[test]
    fn basis_partition_of_unity() {
        for kind in [ElemKind::P1, ElemKind::P2] {
            for bary in [[0.2, 0.3, 0.5], [1.0, 0.0, 0.0], [0.1, 0.1, 0.8]] {
                let b = eval_basis(kind, bary);
                let sum: f64 = b.values[..b.n].iter().sum();
                assert_relative_eq!(sum, 1.0, max_relative = 1e-14);
                for d in 0..2 {
                    let gsum: f64 = b.grads[..b.n].iter().map(|g| g[d]).sum();
                    assert_abs_diff_eq!(gsum, 0.0, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn p2_basis_is_nodal() {
        // Reference nodes in local order.
        let nodes = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ];
        for (i, &bary) in nodes.iter().enumerate() {
            let b = eval_basis(ElemKind::P2, bary);
            for j in 0..6 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(b.values[j], expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn p2_hessians_match_finite_differences() {
        let h = p2_ref_hessians();
        let eps = 1e-5;
        let at = |xi: f64, eta: f64| eval_basis(ElemKind::P2, [1.0 - xi - eta, xi, eta]);
        let (xi, eta) = (0.31, 0.27);
        for j in 0..6 {
            let gp = at(xi + eps, eta).grads[j];
            let gm = at(xi - eps, eta).grads[j];
            assert_relative_eq!((gp[0] - gm[0]) / (2.0 * eps), h[j][0][0], epsilon = 1e-6, max_relative = 1e-6);
            assert_relative_eq!((gp[1] - gm[1]) / (2.0 * eps), h[j][1][0], epsilon = 1e-6, max_relative = 1e-6);
            let gp = at(xi, eta + eps).grads[j];
            let gm = at(xi, eta - eps).grads[j];
            assert_relative_eq!((gp[0] - gm[0]) / (2.0 * eps), h[j][0][1], epsilon = 1e-6, max_relative = 1e-6);
            assert_relative_eq!((gp[1] - gm[1]) / (2.0 * eps), h[j][1][1], epsilon = 1e-6, max_relative = 1e-6);
        }
    }

    #[test]
    fn dofmap_counts_on_single_cell_square() {
        let mesh = Mesh::build_rect(Rect::unit(), 1, 1).unwrap();
        let p2 = DofMap::build(&mesh, ElemKind::P2, 1);
        assert_eq!(p2.n_dofs(), 9); // 4 vertices + 5 edges
        let p1 = DofMap::build(&mesh, ElemKind::P1, 1);
        assert_eq!(p1.n_dofs(), 4);
        let p2v = DofMap::build(&mesh, ElemKind::P2, 2);
        assert_eq!(p2v.n_dofs(), 18);
    }

    #[test]
    fn p2_interpolation_reproduces_quadratics() {
        let mesh = Mesh::build_rect(Rect::unit(), 3, 2).unwrap();
        let map = DofMap::build(&mesh, ElemKind::P2, 1);
        let f = |x: [f64; 2]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1] + x[0] * x[0] - 0.25 * x[1] * x[1];
        let grad_f = |x: [f64; 2]| [2.0 + 0.5 * x[1] + 2.0 * x[0], -1.0 + 0.5 * x[0] - 0.5 * x[1]];
        let coeffs = interpolate(&map, f);
        for (tri, bary) in [(0usize, [0.3, 0.4, 0.3]), (5, [0.1, 0.2, 0.7]), (11, [0.6, 0.25, 0.15])] {
            let geom = mesh.tri_geom(tri);
            let verts = mesh.triangles[tri];
            let mut x = [0.0; 2];
            for k in 0..3 {
                x[0] += bary[k] * mesh.vertices[verts[k]][0];
                x[1] += bary[k] * mesh.vertices[verts[k]][1];
            }
            let (v, g) = eval_field(&map, &coeffs, &mesh, tri, bary);
            assert_relative_eq!(v, f(x), max_relative = 1e-13);
            let ge = grad_f(x);
            assert_relative_eq!(g[0], ge[0], max_relative = 1e-12, epsilon = 1e-13);
            assert_relative_eq!(g[1], ge[1], max_relative = 1e-12, epsilon = 1e-13);
            assert!(geom.det > 0.0);
        }
    }

    #[test]
    fn vector_field_divergence_is_exact_for_quadratics() {
        let mesh = Mesh::build_rect(Rect::unit(), 2, 2).unwrap();
        let map = DofMap::build(&mesh, ElemKind::P2, 2);
        // u = (x^2/2, x*y): div u = x + x = 2x.
        let coeffs = interpolate_vec(&map, |x| [0.5 * x[0] * x[0], x[0] * x[1]]);
        for tri in 0..mesh.triangles.len() {
            let bary = [0.25, 0.35, 0.4];
            let verts = mesh.triangles[tri];
            let x0: f64 = (0..3).map(|k| bary[k] * mesh.vertices[verts[k]][0]).sum();
            let (_, _, div) = eval_field_vec(&map, &coeffs, &mesh, tri, bary);
            assert_relative_eq!(div, 2.0 * x0, max_relative = 1e-12, epsilon = 1e-13);
        }
    }
}
