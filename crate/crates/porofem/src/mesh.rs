//! Structured triangulations of axis-aligned rectangles.
//!
//! A rectangle is split into `nx * ny` cells; each cell is cut along the
//! diagonal from its bottom-left to its top-right corner, producing two
//! counterclockwise triangles. Boundary facets carry side tags so boundary
//! conditions can be prescribed per side.

use crate::error::{Error, Result};
use std::collections::HashMap;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    /// The unit square `[0,1]^2`.
    pub fn unit() -> Rect {
        Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// Boundary side of the rectangle. The numbering follows the convention
/// used by the test problems: side 1 = right, 2 = bottom, 3 = left, 4 = top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Right,
    Bottom,
    Left,
    Top,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Right,
        BoundaryTag::Bottom,
        BoundaryTag::Left,
        BoundaryTag::Top,
    ];

    /// Zero-based storage index.
    pub fn index(self) -> usize {
        match self {
            BoundaryTag::Right => 0,
            BoundaryTag::Bottom => 1,
            BoundaryTag::Left => 2,
            BoundaryTag::Top => 3,
        }
    }

    /// Conventional side label ("gamma1" = right, ..., "gamma4" = top).
    pub fn label(self) -> &'static str {
        match self {
            BoundaryTag::Right => "gamma1",
            BoundaryTag::Bottom => "gamma2",
            BoundaryTag::Left => "gamma3",
            BoundaryTag::Top => "gamma4",
        }
    }

    /// Outward unit normal of the side.
    pub fn normal(self) -> [f64; 2] {
        match self {
            BoundaryTag::Right => [1.0, 0.0],
            BoundaryTag::Bottom => [0.0, -1.0],
            BoundaryTag::Left => [-1.0, 0.0],
            BoundaryTag::Top => [0.0, 1.0],
        }
    }
}

/// One boundary edge together with its side tag and geometry.
#[derive(Debug, Clone)]
pub struct BoundaryFacet {
    pub tag: BoundaryTag,
    /// Triangle owning the facet.
    pub tri: usize,
    /// Local edge of that triangle (0: v0-v1, 1: v1-v2, 2: v2-v0).
    pub local_edge: usize,
    /// Global edge index.
    pub edge: usize,
    /// Endpoint vertices ordered counterclockwise around the domain.
    pub vertices: [usize; 2],
    pub normal: [f64; 2],
    pub length: f64,
}

impl BoundaryFacet {
    /// Facet midpoint.
    pub fn midpoint(&self, mesh: &Mesh) -> [f64; 2] {
        let a = mesh.vertices[self.vertices[0]];
        let b = mesh.vertices[self.vertices[1]];
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }
}

/// Affine geometry of a triangle: Jacobian of the reference map, its
/// transposed inverse, determinant, and area.
#[derive(Debug, Clone, Copy)]
pub struct TriGeom {
    /// Columns are the edge vectors v1-v0 and v2-v0.
    pub jac: [[f64; 2]; 2],
    /// Transposed inverse of the Jacobian.
    pub inv_t: [[f64; 2]; 2],
    pub det: f64,
    pub area: f64,
}

impl TriGeom {
    /// Maps a reference gradient to the physical gradient.
    pub fn phys_grad(&self, ref_grad: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * ref_grad[0] + self.inv_t[0][1] * ref_grad[1],
            self.inv_t[1][0] * ref_grad[0] + self.inv_t[1][1] * ref_grad[1],
        ]
    }

    /// Maps a constant reference Hessian to the physical Hessian
    /// `J^{-T} H J^{-1}`.
    pub fn phys_hessian(&self, h_ref: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let a = &self.inv_t;
        let mut tmp = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                tmp[r][c] = a[r][0] * h_ref[0][c] + a[r][1] * h_ref[1][c];
            }
        }
        let mut out = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] = tmp[r][0] * a[c][0] + tmp[r][1] * a[c][1];
            }
        }
        out
    }
}

/// Triangulated rectangle with boundary metadata.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
    /// Cell widths in x and y.
    pub dx: f64,
    pub dy: f64,
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Unique edges as sorted vertex pairs.
    pub edges: Vec<[usize; 2]>,
    /// Per triangle: global edge ids of local edges (v0v1, v1v2, v2v0).
    pub tri_edges: Vec<[usize; 3]>,
    /// Boundary facets ordered counterclockwise within each side.
    pub boundary: Vec<BoundaryFacet>,
    /// Triangles incident to each vertex.
    pub vertex_tris: Vec<Vec<u32>>,
    /// Longest edge length in the mesh.
    pub h_max: f64,
}

impl Mesh {
    /// Builds the structured triangulation with `nx * ny` cells.
    pub fn build_rect(rect: Rect, nx: usize, ny: usize) -> Result<Mesh> {
        if nx == 0 || ny == 0 {
            return Err(Error::Mesh(format!("need at least one cell per direction, got {nx}x{ny}")));
        }
        if !(rect.x1 > rect.x0) || !(rect.y1 > rect.y0) {
            return Err(Error::Mesh(format!(
                "degenerate rectangle [{}, {}] x [{}, {}]",
                rect.x0, rect.x1, rect.y0, rect.y1
            )));
        }
        let dx = rect.width() / nx as f64;
        let dy = rect.height() / ny as f64;
        let vid = |i: usize, j: usize| j * (nx + 1) + i;

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                // Exact endpoints avoid tolerance churn in boundary lookups.
                let x = if i == nx { rect.x1 } else { rect.x0 + i as f64 * dx };
                let y = if j == ny { rect.y1 } else { rect.y0 + j as f64 * dy };
                vertices.push([x, y]);
            }
        }

        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let a = vid(i, j);
                let b = vid(i + 1, j);
                let c = vid(i + 1, j + 1);
                let d = vid(i, j + 1);
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }

        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let mut ids = [0usize; 3];
            for (k, (a, b)) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
                .into_iter()
                .enumerate()
            {
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edges.len() - 1
                });
                ids[k] = id;
            }
            tri_edges.push(ids);
        }

        let edge_lookup = edge_ids;
        let cell = |i: usize, j: usize| 2 * (j * nx + i);
        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        let mut push_facet = |tag: BoundaryTag, tri: usize, local_edge: usize, va: usize, vb: usize| {
            let key = (va.min(vb), va.max(vb));
            let edge = edge_lookup[&key];
            let pa = vertices[va];
            let pb = vertices[vb];
            let length = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            boundary.push(BoundaryFacet {
                tag,
                tri,
                local_edge,
                edge,
                vertices: [va, vb],
                normal: tag.normal(),
                length,
            });
        };
        // Counterclockwise traversal: bottom, right, top (x decreasing),
        // left (y decreasing).
        for i in 0..nx {
            push_facet(BoundaryTag::Bottom, cell(i, 0), 0, vid(i, 0), vid(i + 1, 0));
        }
        for j in 0..ny {
            push_facet(BoundaryTag::Right, cell(nx - 1, j), 1, vid(nx, j), vid(nx, j + 1));
        }
        for i in (0..nx).rev() {
            push_facet(BoundaryTag::Top, cell(i, ny - 1) + 1, 1, vid(i + 1, ny), vid(i, ny));
        }
        for j in (0..ny).rev() {
            push_facet(BoundaryTag::Left, cell(0, j) + 1, 2, vid(0, j + 1), vid(0, j));
        }

        let mut vertex_tris = vec![Vec::new(); vertices.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_tris[v].push(t as u32);
            }
        }

        let h_max = edges
            .iter()
            .map(|e| {
                let a = vertices[e[0]];
                let b = vertices[e[1]];
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max);

        Ok(Mesh {
            rect,
            nx,
            ny,
            dx,
            dy,
            vertices,
            triangles,
            edges,
            tri_edges,
            boundary,
            vertex_tris,
            h_max,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Structured cell width used to label convergence reports.
    pub fn cell_width(&self) -> f64 {
        self.dx.max(self.dy)
    }

    /// Boundary facets of one side, ordered counterclockwise.
    pub fn boundary_facets(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryFacet> {
        self.boundary.iter().filter(move |f| f.tag == tag)
    }

    /// Vertex coordinates of triangle `t`.
    pub fn tri_vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Affine geometry of triangle `t`.
    pub fn tri_geom(&self, t: usize) -> TriGeom {
        let [a, b, c] = self.triangles[t];
        let pa = self.vertices[a];
        let pb = self.vertices[b];
        let pc = self.vertices[c];
        let jac = [[pb[0] - pa[0], pc[0] - pa[0]], [pb[1] - pa[1], pc[1] - pa[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        // inv_t[r][c] = inv[c][r]
        let inv_t = [[inv[0][0], inv[1][0]], [inv[0][1], inv[1][1]]];
        TriGeom { jac, inv_t, det, area: 0.5 * det.abs() }
    }

    /// Locates the triangle containing `p` and returns its barycentric
    /// coordinates there. Points on interior interfaces resolve to a unique
    /// triangle via the structured cell lookup; points outside the rectangle
    /// (beyond a small tolerance) are rejected.
    pub fn locate(&self, p: [f64; 2]) -> Result<(usize, [f64; 3])> {
        let tol = 1e-10 * self.h_max.max(1.0);
        if p[0] < self.rect.x0 - tol
            || p[0] > self.rect.x1 + tol
            || p[1] < self.rect.y0 - tol
            || p[1] > self.rect.y1 + tol
        {
            return Err(Error::PointOutsideDomain(p[0], p[1]));
        }
        let fi = ((p[0] - self.rect.x0) / self.dx).floor();
        let fj = ((p[1] - self.rect.y0) / self.dy).floor();
        let i = (fi.max(0.0) as usize).min(self.nx - 1);
        let j = (fj.max(0.0) as usize).min(self.ny - 1);
        let xi = (p[0] - (self.rect.x0 + i as f64 * self.dx)) / self.dx;
        let eta = (p[1] - (self.rect.y0 + j as f64 * self.dy)) / self.dy;
        // The cell diagonal runs bottom-left to top-right; below it lies the
        // first (lower) triangle of the cell.
        let t = 2 * (j * self.nx + i) + usize::from(eta > xi);
        let geom = self.tri_geom(t);
        let p0 = self.vertices[self.triangles[t][0]];
        let rx = p[0] - p0[0];
        let ry = p[1] - p0[1];
        let u = (geom.jac[1][1] * rx - geom.jac[0][1] * ry) / geom.det;
        let v = (-geom.jac[1][0] * rx + geom.jac[0][0] * ry) / geom.det;
        let mut bary = [1.0 - u - v, u, v];
        for b in &mut bary {
            *b = b.clamp(0.0, 1.0);
        }
        let sum: f64 = bary.iter().sum();
        for b in &mut bary {
            *b /= sum;
        }
        Ok((t, bary))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_cell_counts() {
        let mesh = Mesh::build_rect(Rect::unit(), 1, 1).unwrap();
        assert_eq!(mesh.n_vertices(), 4);
        assert_eq!(mesh.n_triangles(), 2);
        assert_eq!(mesh.n_edges(), 5);
        assert_eq!(mesh.boundary.len(), 4);
    }

    #[test]
    fn euler_characteristic_and_edge_count() {
        for (nx, ny) in [(1usize, 1usize), (3, 2), (8, 8), (32, 32), (5, 9)] {
            let mesh = Mesh::build_rect(Rect::unit(), nx, ny).unwrap();
            assert_eq!(mesh.n_vertices(), (nx + 1) * (ny + 1));
            assert_eq!(mesh.n_triangles(), 2 * nx * ny);
            assert_eq!(mesh.n_edges(), 3 * nx * ny + nx + ny);
            let euler = mesh.n_vertices() as i64 - mesh.n_edges() as i64 + mesh.n_triangles() as i64;
            assert_eq!(euler, 1);
        }
    }

    #[test]
    fn large_mesh_counts() {
        let mesh = Mesh::build_rect(Rect::unit(), 32, 32).unwrap();
        assert_eq!(mesh.n_vertices(), 1089);
        assert_eq!(mesh.n_triangles(), 2048);
    }

    #[test]
    fn triangles_are_counterclockwise_with_correct_total_area() {
        let rect = Rect { x0: -50.0, y0: 0.0, x1: 50.0, y1: 100.0 };
        let mesh = Mesh::build_rect(rect, 7, 5).unwrap();
        let mut area = 0.0;
        for t in 0..mesh.n_triangles() {
            let geom = mesh.tri_geom(t);
            assert!(geom.det > 0.0, "triangle {t} not counterclockwise");
            area += geom.area;
        }
        assert_relative_eq!(area, 100.0 * 100.0, max_relative = 1e-12);
    }

    #[test]
    fn boundary_sides_have_expected_facets_and_normals() {
        let mesh = Mesh::build_rect(Rect::unit(), 4, 3).unwrap();
        assert_eq!(mesh.boundary_facets(BoundaryTag::Bottom).count(), 4);
        assert_eq!(mesh.boundary_facets(BoundaryTag::Top).count(), 4);
        assert_eq!(mesh.boundary_facets(BoundaryTag::Left).count(), 3);
        assert_eq!(mesh.boundary_facets(BoundaryTag::Right).count(), 3);
        for f in &mesh.boundary {
            let mid = f.midpoint(&mesh);
            match f.tag {
                BoundaryTag::Right => assert_relative_eq!(mid[0], 1.0),
                BoundaryTag::Bottom => assert_relative_eq!(mid[1], 0.0),
                BoundaryTag::Left => assert_relative_eq!(mid[0], 0.0),
                BoundaryTag::Top => assert_relative_eq!(mid[1], 1.0),
            }
            // Outward normal is perpendicular to the facet and points away
            // from the domain centroid.
            let d = [mid[0] - 0.5, mid[1] - 0.5];
            assert!(f.normal[0] * d[0] + f.normal[1] * d[1] > 0.0);
            // Facet length adds up per side.
            assert_relative_eq!(f.length, if matches!(f.tag, BoundaryTag::Bottom | BoundaryTag::Top) { 0.25 } else { 1.0 / 3.0 }, max_relative = 1e-12);
        }
    }

    #[test]
    fn locate_finds_vertices_and_interior_points() {
        let mesh = Mesh::build_rect(Rect::unit(), 4, 4).unwrap();
        // A vertex resolves with one barycentric coordinate equal to 1.
        let (t, bary) = mesh.locate(mesh.vertices[6]).unwrap();
        assert!(bary.iter().any(|&b| (b - 1.0).abs() < 1e-12));
        assert!(mesh.triangles[t].iter().any(|&v| v == 6));
        // Interior points reproduce their coordinates.
        for p in [[0.13, 0.57], [0.99, 0.01], [0.5, 0.5], [1.0, 1.0], [0.0, 0.7]] {
            let (t, bary) = mesh.locate(p).unwrap();
            let tri = mesh.triangles[t];
            let x: f64 = (0..3).map(|k| bary[k] * mesh.vertices[tri[k]][0]).sum();
            let y: f64 = (0..3).map(|k| bary[k] * mesh.vertices[tri[k]][1]).sum();
            assert_relative_eq!(x, p[0], epsilon = 1e-12);
            assert_relative_eq!(y, p[1], epsilon = 1e-12);
        }
        assert!(mesh.locate([1.2, 0.5]).is_err());
        assert!(mesh.locate([0.5, -0.1]).is_err());
    }

    #[test]
    fn degenerate_requests_rejected() {
        assert!(Mesh::build_rect(Rect::unit(), 0, 3).is_err());
        let bad = Rect { x0: 1.0, y0: 0.0, x1: 1.0, y1: 1.0 };
        assert!(Mesh::build_rect(bad, 2, 2).is_err());
    }

    #[test]
    fn vertex_adjacency_covers_all_triangles() {
        let mesh = Mesh::build_rect(Rect::unit(), 3, 3).unwrap();
        let total: usize = mesh.vertex_tris.iter().map(|v| v.len()).sum();
        assert_eq!(total, 3 * mesh.n_triangles());
        // An interior vertex of the structured pattern touches 6 triangles.
        let interior = 1 * 4 + 1; // vertex (1,1)
        assert_eq!(mesh.vertex_tris[interior].len(), 6);
    }
}
