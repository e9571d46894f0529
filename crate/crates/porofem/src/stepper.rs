//! Problem definitions and time stepping for the coupled system.
//!
//! The solver advances the reformulated unknowns: displacement `tau`, the
//! auxiliary stress-like scalar `delta`, and the conserved scalar
//! `varpi = a0 p + b0 div tau`. Pressure `p` and dilation `q` are
//! reconstructed per element from algebraic identities after each step, so
//! they live in the broken (discontinuous) linear space.
//!
//! Two couplings are provided. The monolithic scheme solves displacement,
//! `delta`, and `varpi` together each step and is unconditionally stable.
//! The decoupled scheme lags `varpi` in the generalized Stokes block, which
//! splits every step into a Stokes solve followed by a diffusion solve at
//! the cost of a time-step restriction. A direct displacement-pressure
//! scheme on the same elements is included for locking comparisons.

use crate::assembly::{
    assemble_flux, assemble_gravity_flux, assemble_load_scalar,
    assemble_load_vec, assemble_mass_p2v, assemble_traction, rigid_motion_basis, Operators,
    Spaces,
};
use crate::error::{Error, Result};
use crate::fem::{eval_basis, interpolate, interpolate_vec, ElemKind};
use crate::linalg::{ConstrainedSystem, CsrMatrix, DenseLu, DenseMatrix, Triplets};
use crate::mesh::{BoundaryTag, Mesh, Rect};
use crate::params::CheckedParams;

/// Boundary data: scalar of position and time.
pub type BoundaryValueFn = Box<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;
/// Boundary data: vector of position and time.
pub type BoundaryVecFn = Box<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;
/// Volume data: scalar of position and time.
pub type VolumeFn = Box<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;
/// Volume data: vector of position and time.
pub type VolumeVecFn = Box<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;
/// Initial data: scalar of position.
pub type SpaceFn = Box<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
/// Initial data: vector of position.
pub type SpaceVecFn = Box<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
/// Predicate selecting part of a boundary side by facet midpoint.
pub type RegionFn = Box<dyn Fn([f64; 2]) -> bool + Send + Sync>;

/// Displacement condition on one side.
#[derive(Default)]
pub struct DisplacementBc {
    /// Dirichlet data per component; `None` leaves the component natural.
    pub dirichlet: [Option<BoundaryValueFn>; 2],
    /// Restricts the Dirichlet part to facets whose midpoint satisfies the
    /// predicate; the rest of the side stays natural. `None` means the whole
    /// side.
    pub dirichlet_region: Option<RegionFn>,
    /// Traction data applied to the natural components (total traction,
    /// including the viscous and pressure parts).
    pub traction: Option<BoundaryVecFn>,
}

/// Pressure condition on one side.
pub enum PressureBc {
    /// Natural condition: prescribed outward fluid flux (`None` = no flow).
    Flux(Option<BoundaryValueFn>),
    /// Essential condition with data given directly for `varpi`.
    DirichletVarpi(BoundaryValueFn),
    /// Essential condition with pressure data, translated to `varpi` through
    /// the reconstruction identity using the newest available stage values.
    DirichletPressure(BoundaryValueFn),
}

impl Default for PressureBc {
    fn default() -> PressureBc {
        PressureBc::Flux(None)
    }
}

/// Boundary conditions on one side of the rectangle.
#[derive(Default)]
pub struct SideBc {
    pub displacement: DisplacementBc,
    pub pressure: PressureBc,
}

/// Initial data; missing fields default to zero.
#[derive(Default)]
pub struct InitData {
    pub tau: Option<SpaceVecFn>,
    pub p: Option<SpaceFn>,
    /// Initial dilation `div tau`; computed from the discrete `tau` when
    /// absent.
    pub q: Option<SpaceFn>,
    /// Initial auxiliary scalar; `b0 p - lam q` when absent (the viscous
    /// rate contribution is unknown without time-derivative data).
    pub delta: Option<SpaceFn>,
}

/// A complete initial-boundary value problem on a rectangle.
pub struct ProblemCase {
    pub params: CheckedParams,
    pub rect: Rect,
    /// Momentum volume load.
    pub body_load: Option<VolumeVecFn>,
    /// Fluid mass source.
    pub fluid_source: Option<VolumeFn>,
    /// Sides indexed by [`BoundaryTag::index`].
    pub sides: [SideBc; 4],
    pub init: InitData,
    /// Pin and project out rigid motions. Only valid (and required) when no
    /// displacement component is constrained anywhere.
    pub fix_rigid_motions: bool,
}

impl ProblemCase {
    /// Natural problem: traction-free, no-flow, zero loads and initial data.
    pub fn natural(params: CheckedParams, rect: Rect) -> ProblemCase {
        ProblemCase {
            params,
            rect,
            body_load: None,
            fluid_source: None,
            sides: Default::default(),
            init: InitData::default(),
            fix_rigid_motions: false,
        }
    }
}

/// Time coupling of the two-block system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// The Stokes block sees the previous conserved scalar; each step is a
    /// Stokes solve followed by a diffusion solve.
    Decoupled,
    /// Fully implicit coupling solved as one monolithic system per step.
    Monolithic,
}

impl Scheme {
    /// Weight of the current-step conserved scalar in the Stokes block.
    pub fn theta(self) -> f64 {
        match self {
            Scheme::Decoupled => 0.0,
            Scheme::Monolithic => 1.0,
        }
    }
}

/// Discrete solution at one time level.
#[derive(Debug, Clone)]
pub struct State {
    pub step: usize,
    pub t: f64,
    /// Displacement coefficients (interleaved components).
    pub tau: Vec<f64>,
    /// Displacement at the previous level (equals `tau` at the start).
    pub tau_prev: Vec<f64>,
    /// Auxiliary scalar coefficients.
    pub delta: Vec<f64>,
    /// Conserved scalar coefficients.
    pub varpi: Vec<f64>,
    /// Stage value of the conserved scalar used in the reconstruction:
    /// the current value for the monolithic scheme, the previous one for
    /// the decoupled scheme.
    pub varpi_stage: Vec<f64>,
    /// Elementwise `div tau` at the triangle corners.
    pub div_broken: Vec<[f64; 3]>,
    /// Elementwise backward difference of `div tau` over the step.
    pub dt_div_broken: Vec<[f64; 3]>,
    /// Reconstructed pressure (broken linear).
    pub p_broken: Vec<[f64; 3]>,
    /// Reconstructed dilation (broken linear).
    pub q_broken: Vec<[f64; 3]>,
}

/// Evaluates the elementwise divergence of a displacement field at the
/// corners of every triangle.
pub fn broken_div(spaces: &Spaces, tau: &[f64]) -> Vec<[f64; 3]> {
    let corners = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let evals = corners.map(|b| eval_basis(ElemKind::P2, b));
    let mut out = vec![[0.0; 3]; spaces.mesh.n_triangles()];
    for t in 0..spaces.mesh.n_triangles() {
        let geom = &spaces.geoms[t];
        let nodes = spaces.p2v.cell_nodes(t);
        for corner in 0..3 {
            let mut div = 0.0;
            for a in 0..6 {
                let g = geom.phys_grad(evals[corner].grads[a]);
                for d in 0..2 {
                    div += tau[spaces.p2v.dof(nodes[a] as usize, d)] * g[d];
                }
            }
            out[t][corner] = div;
        }
    }
    out
}

/// Copies a continuous linear field into broken per-triangle corner values.
pub fn p1_to_broken(spaces: &Spaces, v: &[f64]) -> Vec<[f64; 3]> {
    spaces
        .mesh
        .triangles
        .iter()
        .map(|&[a, b, c]| [v[a], v[b], v[c]])
        .collect()
}

/// Area-weighted average of a broken field at the mesh vertices.
/// Appends, for every marked vertex `v`, the row of the linear functional
/// `tau -> scale * node-averaged div tau (x_v)` at matrix row `offset + v`.
/// The average matches [`node_average`] applied to the broken divergence.
fn push_avg_div_rows(
    t: &mut Triplets,
    spaces: &Spaces,
    marked: &[bool],
    offset: usize,
    scale: f64,
) {
    let mut den = vec![0.0; spaces.mesh.n_vertices()];
    for (tri, verts) in spaces.mesh.triangles.iter().enumerate() {
        for &v in verts {
            den[v] += spaces.geoms[tri].area;
        }
    }
    let corners = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let evals = corners.map(|b| eval_basis(ElemKind::P2, b));
    for (tri, verts) in spaces.mesh.triangles.iter().enumerate() {
        let geom = &spaces.geoms[tri];
        let nodes = spaces.p2v.cell_nodes(tri);
        for (corner, &v) in verts.iter().enumerate() {
            if !marked[v] {
                continue;
            }
            let w = scale * geom.area / den[v];
            for a in 0..6 {
                let g = geom.phys_grad(evals[corner].grads[a]);
                for d in 0..2 {
                    t.push(offset + v, spaces.p2v.dof(nodes[a] as usize, d), w * g[d]);
                }
            }
        }
    }
}

pub fn node_average(spaces: &Spaces, broken: &[[f64; 3]]) -> Vec<f64> {
    let n = spaces.mesh.n_vertices();
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for (t, tri) in spaces.mesh.triangles.iter().enumerate() {
        let area = spaces.geoms[t].area;
        for (i, &v) in tri.iter().enumerate() {
            num[v] += area * broken[t][i];
            den[v] += area;
        }
    }
    for (x, d) in num.iter_mut().zip(&den) {
        *x /= d;
    }
    num
}

/// Evaluates a broken linear field at a physical point.
pub fn sample_broken(spaces: &Spaces, broken: &[[f64; 3]], p: [f64; 2]) -> Result<f64> {
    let (t, bary) = spaces.mesh.locate(p)?;
    Ok(bary[0] * broken[t][0] + bary[1] * broken[t][1] + bary[2] * broken[t][2])
}

/// Evaluates a continuous linear field at a physical point.
pub fn sample_p1(spaces: &Spaces, v: &[f64], p: [f64; 2]) -> Result<f64> {
    let (t, bary) = spaces.mesh.locate(p)?;
    let [a, b, c] = spaces.mesh.triangles[t];
    Ok(bary[0] * v[a] + bary[1] * v[b] + bary[2] * v[c])
}

/// Reconstructs broken pressure and dilation from the auxiliary scalars and
/// the elementwise dilation rate.
pub fn broken_reconstruction(
    spaces: &Spaces,
    params: &CheckedParams,
    delta: &[f64],
    varpi_stage: &[f64],
    dt_div: &[[f64; 3]],
) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let c = &params.consts;
    let ls = params.phys.lambda_star;
    let n_t = spaces.mesh.n_triangles();
    let mut p = vec![[0.0; 3]; n_t];
    let mut q = vec![[0.0; 3]; n_t];
    for (t, tri) in spaces.mesh.triangles.iter().enumerate() {
        for i in 0..3 {
            let d = delta[tri[i]];
            let w = varpi_stage[tri[i]];
            let r = dt_div[t][i];
            p[t][i] = c.chi1 * d + c.chi2 * w + ls * c.chi1 * r;
            q[t][i] = c.chi1 * w - c.chi3 * d - ls * c.chi3 * r;
        }
    }
    (p, q)
}

// ---------------------------------------------------------------------------
// Constraint bookkeeping
// ---------------------------------------------------------------------------

/// One Dirichlet site: a dof whose value comes from a given side's data.
#[derive(Clone, Copy)]
struct Site {
    dof: usize,
    side: usize,
}

fn merged_values(dofs: &[usize], sites: &[(usize, f64)]) -> Result<Vec<f64>> {
    let mut vals: Vec<Option<f64>> = vec![None; dofs.len()];
    for &(dof, v) in sites {
        let k = dofs.binary_search(&dof).expect("constraint site not registered");
        match vals[k] {
            None => vals[k] = Some(v),
            Some(prev) => {
                if (prev - v).abs() > 1e-12 * prev.abs().max(1.0) {
                    return Err(Error::ConflictingConstraint { dof, first: prev, second: v });
                }
            }
        }
    }
    Ok(vals.into_iter().map(|v| v.unwrap_or(0.0)).collect())
}

/// Projector removing the rigid-motion component of a displacement field.
struct RigidProjector {
    basis: [Vec<f64>; 3],
    gram: DenseLu,
}

impl RigidProjector {
    fn new(spaces: &Spaces, mass_p2v: &CsrMatrix) -> Result<RigidProjector> {
        let basis = rigid_motion_basis(spaces);
        let mut g = DenseMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                g.set(i, j, mass_p2v.quad_form(&basis[i], &basis[j]));
            }
        }
        Ok(RigidProjector { gram: g.lu()?, basis })
    }

    fn project(&self, mass_p2v: &CsrMatrix, tau: &mut [f64]) {
        let rhs = [
            mass_p2v.quad_form(&self.basis[0], tau),
            mass_p2v.quad_form(&self.basis[1], tau),
            mass_p2v.quad_form(&self.basis[2], tau),
        ];
        let coef = self.gram.solve(&rhs);
        for k in 0..3 {
            if coef[k] != 0.0 {
                for (x, r) in tau.iter_mut().zip(&self.basis[k]) {
                    *x -= coef[k] * r;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

enum Systems {
    Monolithic(ConstrainedSystem),
    Decoupled { stokes: ConstrainedSystem, diffusion: ConstrainedSystem },
}

/// A problem bound to a mesh, scheme, and step size, with all constant
/// matrices factored once.
pub struct Simulation {
    pub case: ProblemCase,
    pub scheme: Scheme,
    pub dt: f64,
    pub spaces: Spaces,
    pub ops: Operators,
    pub mass_p2v: CsrMatrix,
    tau_sites: Vec<Site>,
    tau_dofs: Vec<usize>,
    varpi_sites: Vec<Site>,
    varpi_nodes: Vec<usize>,
    /// Constrained scalar nodes whose value is given directly.
    varpi_value_nodes: Vec<usize>,
    /// Boundary nodes where pressure data is enforced through an implicit
    /// reconstruction row instead of a value constraint (monolithic only).
    translated_nodes: Vec<usize>,
    rigid: Option<RigidProjector>,
    gravity: Vec<f64>,
    systems: Systems,
}

/// Collects the Dirichlet displacement sites of a case on a mesh.
fn displacement_sites(case: &ProblemCase, spaces: &Spaces) -> Vec<Site> {
    let mut sites = Vec::new();
    for tag in BoundaryTag::ALL {
        let side = tag.index();
        let bc = &case.sides[side].displacement;
        for c in 0..2 {
            if bc.dirichlet[c].is_none() {
                continue;
            }
            for facet in spaces.mesh.boundary_facets(tag) {
                let accepted = match &bc.dirichlet_region {
                    Some(region) => region(facet.midpoint(&spaces.mesh)),
                    None => true,
                };
                if !accepted {
                    continue;
                }
                for node in spaces.p2v.facet_nodes(&spaces.mesh, facet) {
                    sites.push(Site { dof: spaces.p2v.dof(node, c), side });
                }
            }
        }
    }
    sites
}

/// Collects the Dirichlet pressure sites (scalar space nodes).
fn pressure_sites(case: &ProblemCase, spaces: &Spaces) -> Vec<Site> {
    let mut sites = Vec::new();
    for tag in BoundaryTag::ALL {
        let side = tag.index();
        if matches!(case.sides[side].pressure, PressureBc::Flux(_)) {
            continue;
        }
        for node in spaces.p1.boundary_nodes(&spaces.mesh, tag) {
            sites.push(Site { dof: node, side });
        }
    }
    sites
}

impl Simulation {
    pub fn new(
        case: ProblemCase,
        nx: usize,
        ny: usize,
        dt: f64,
        scheme: Scheme,
    ) -> Result<Simulation> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidRun(format!("time step must be positive, got {dt}")));
        }
        let mesh = Mesh::build_rect(case.rect, nx, ny)?;
        let spaces = Spaces::new(mesh);
        let ops = Operators::build(&spaces, &case.params);
        let mass_p2v = assemble_mass_p2v(&spaces);

        let mut tau_sites = displacement_sites(&case, &spaces);
        let mut tau_dofs: Vec<usize> = tau_sites.iter().map(|s| s.dof).collect();
        tau_dofs.sort_unstable();
        tau_dofs.dedup();

        let rigid = if case.fix_rigid_motions {
            if !tau_dofs.is_empty() {
                return Err(Error::InvalidRun(
                    "rigid motion handling requires a pure traction displacement boundary".into(),
                ));
            }
            // Pin one corner fully and the vertical component of another to
            // remove translations and rotation, then project the solved
            // field onto the orthogonal complement of the rigid motions.
            let v_corner = spaces.mesh.nx;
            tau_dofs = vec![
                spaces.p2v.dof(0, 0),
                spaces.p2v.dof(0, 1),
                spaces.p2v.dof(v_corner, 1),
            ];
            tau_dofs.sort_unstable();
            Some(RigidProjector::new(&spaces, &mass_p2v)?)
        } else {
            None
        };
        tau_sites.retain(|s| tau_dofs.binary_search(&s.dof).is_ok());

        let varpi_sites = pressure_sites(&case, &spaces);
        let mut varpi_nodes: Vec<usize> = varpi_sites.iter().map(|s| s.dof).collect();
        varpi_nodes.sort_unstable();
        varpi_nodes.dedup();
        let needs_translation = case
            .sides
            .iter()
            .any(|s| matches!(s.pressure, PressureBc::DirichletPressure(_)));
        if needs_translation && case.params.consts.chi2 == 0.0 {
            return Err(Error::InvalidRun(
                "pressure Dirichlet translation needs a nonzero volumetric modulus".into(),
            ));
        }
        // Nodes touched by a side with direct conserved-scalar data stay
        // value constraints; the remaining pressure-data nodes are handled
        // per scheme below.
        let mut varpi_value_nodes: Vec<usize> = varpi_sites
            .iter()
            .filter(|s| matches!(case.sides[s.side].pressure, PressureBc::DirichletVarpi(_)))
            .map(|s| s.dof)
            .collect();
        varpi_value_nodes.sort_unstable();
        varpi_value_nodes.dedup();
        let pressure_nodes: Vec<usize> = varpi_nodes
            .iter()
            .copied()
            .filter(|n| varpi_value_nodes.binary_search(n).is_err())
            .collect();

        let n_tau = spaces.n_tau();
        let n_s = spaces.n_scalar();
        let c = &case.params.consts;
        let ls = case.params.phys.lambda_star;

        let systems = match scheme {
            Scheme::Monolithic => {
                let n_sys = n_tau + 2 * n_s;
                let mut t = Triplets::with_capacity(
                    n_sys,
                    n_sys,
                    ops.a_eps.n_nnz() + 3 * ops.b_div.n_nnz() + 3 * ops.m_s.n_nnz()
                        + 2 * ops.d_k.n_nnz() + ops.g_k.n_nnz(),
                );
                t.push_block(&ops.a_eps, 0, 0, 1.0);
                t.push_block_transposed(&ops.b_div, 0, n_tau, -1.0);
                t.push_block(&ops.b_div, n_tau, 0, 1.0 + ls * c.chi3 / dt);
                t.push_block(&ops.m_s, n_tau, n_tau, c.chi3);
                t.push_block(&ops.m_s, n_tau, n_tau + n_s, -c.chi1);
                t.push_block(&ops.g_k, n_tau + n_s, 0, ls * c.chi1 / dt);
                t.push_block(&ops.d_k, n_tau + n_s, n_tau, c.chi1);
                t.push_block(&ops.m_s, n_tau + n_s, n_tau + n_s, 1.0 / dt);
                t.push_block(&ops.d_k, n_tau + n_s, n_tau + n_s, c.chi2);
                // Pressure data is enforced implicitly: the scalar balance
                // row at such a node is replaced by the reconstruction
                // identity, keeping the stiff coupling between the Stokes
                // multiplier and the boundary value inside the factored
                // matrix. A lagged translation is unstable when b0^2 is
                // large against lam * a0.
                if !pressure_nodes.is_empty() {
                    let mut replaced = vec![false; n_s];
                    for &v in &pressure_nodes {
                        replaced[v] = true;
                    }
                    t.retain_rows(|r| r < n_tau + n_s || !replaced[r - n_tau - n_s]);
                    for &v in &pressure_nodes {
                        let row = n_tau + n_s + v;
                        t.push(row, n_tau + v, c.chi1);
                        t.push(row, row, c.chi2);
                    }
                    if ls != 0.0 {
                        push_avg_div_rows(
                            &mut t,
                            &spaces,
                            &replaced,
                            n_tau + n_s,
                            ls * c.chi1 / dt,
                        );
                    }
                }
                let matrix = CsrMatrix::from_triplets(&t);
                let mut cdofs = tau_dofs.clone();
                cdofs.extend(varpi_value_nodes.iter().map(|&v| n_tau + n_s + v));
                Systems::Monolithic(ConstrainedSystem::new(&matrix, &cdofs)?)
            }
            Scheme::Decoupled => {
                let h = spaces.mesh.cell_width();
                if dt > h * h {
                    eprintln!(
                        "warning: decoupled scheme with dt = {dt} above the stability \
                         guideline dt <= h^2 = {:.3e}",
                        h * h
                    );
                }
                let n_stokes = n_tau + n_s;
                let mut t = Triplets::with_capacity(
                    n_stokes,
                    n_stokes,
                    ops.a_eps.n_nnz() + 2 * ops.b_div.n_nnz() + ops.m_s.n_nnz(),
                );
                t.push_block(&ops.a_eps, 0, 0, 1.0);
                t.push_block_transposed(&ops.b_div, 0, n_tau, -1.0);
                t.push_block(&ops.b_div, n_tau, 0, 1.0 + ls * c.chi3 / dt);
                t.push_block(&ops.m_s, n_tau, n_tau, c.chi3);
                let stokes_matrix = CsrMatrix::from_triplets(&t);
                let stokes = ConstrainedSystem::new(&stokes_matrix, &tau_dofs)?;

                let mut td = Triplets::with_capacity(n_s, n_s, ops.m_s.n_nnz() + ops.d_k.n_nnz());
                td.push_block(&ops.m_s, 0, 0, 1.0 / dt);
                td.push_block(&ops.d_k, 0, 0, c.chi2);
                let diff_matrix = CsrMatrix::from_triplets(&td);
                let diffusion = ConstrainedSystem::new(&diff_matrix, &varpi_nodes)?;
                Systems::Decoupled { stokes, diffusion }
            }
        };

        let translated_nodes = match scheme {
            Scheme::Monolithic => pressure_nodes,
            Scheme::Decoupled => Vec::new(),
        };
        let gravity = assemble_gravity_flux(&spaces, &case.params);
        Ok(Simulation {
            case,
            scheme,
            dt,
            spaces,
            ops,
            mass_p2v,
            tau_sites,
            tau_dofs,
            varpi_sites,
            varpi_nodes,
            varpi_value_nodes,
            translated_nodes,
            rigid,
            gravity,
            systems,
        })
    }

    // -- load helpers -----------------------------------------------------

    /// Momentum volume load at time `t`.
    pub fn body_load(&self, t: f64) -> Vec<f64> {
        match &self.case.body_load {
            Some(f) => assemble_load_vec(&self.spaces, |x| f(x, t)),
            None => vec![0.0; self.spaces.n_tau()],
        }
    }

    /// Boundary traction load at time `t` (natural displacement components
    /// only).
    pub fn traction_load(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.spaces.n_tau()];
        for tag in BoundaryTag::ALL {
            let bc = &self.case.sides[tag.index()].displacement;
            let g = match &bc.traction {
                Some(g) => g,
                None => continue,
            };
            let load = assemble_traction(&self.spaces, tag, |facet| {
                let in_dirichlet_part = match &bc.dirichlet_region {
                    Some(region) => region(facet.midpoint(&self.spaces.mesh)),
                    None => true,
                };
                [
                    bc.dirichlet[0].is_none() || !in_dirichlet_part,
                    bc.dirichlet[1].is_none() || !in_dirichlet_part,
                ]
            }, |x, _f| g(x, t));
            for (o, l) in out.iter_mut().zip(&load) {
                *o += l;
            }
        }
        out
    }

    /// Fluid source load at time `t`.
    pub fn source_load(&self, t: f64) -> Vec<f64> {
        match &self.case.fluid_source {
            Some(f) => assemble_load_scalar(&self.spaces, |x| f(x, t)),
            None => vec![0.0; self.spaces.n_scalar()],
        }
    }

    /// Boundary flux load at time `t`. Flux data specifies outward normal
    /// flow, so it enters the right-hand side with a negative sign.
    pub fn flux_load(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.spaces.n_scalar()];
        for tag in BoundaryTag::ALL {
            if let PressureBc::Flux(Some(g)) = &self.case.sides[tag.index()].pressure {
                let load = assemble_flux(&self.spaces, tag, |x, _f| g(x, t));
                for (o, l) in out.iter_mut().zip(&load) {
                    *o -= l;
                }
            }
        }
        out
    }

    /// Gravity contribution to the flow right-hand side (constant in time).
    pub fn gravity_load(&self) -> &[f64] {
        &self.gravity
    }

    // -- constraints ----------------------------------------------------------

    fn tau_values(&self, t: f64) -> Result<Vec<f64>> {
        let mut pairs = Vec::with_capacity(self.tau_sites.len());
        for site in &self.tau_sites {
            let comp = site.dof % 2;
            let node = site.dof / 2;
            let x = self.spaces.p2v.coords[node];
            let g = self.case.sides[site.side].displacement.dirichlet[comp]
                .as_ref()
                .expect("site registered for missing data");
            pairs.push((site.dof, g(x, t)));
        }
        merged_values(&self.tau_dofs, &pairs)
    }

    /// Values for the conserved-scalar constraints of the decoupled flow
    /// solve at time `t`. Pressure data is translated through the
    /// reconstruction identity with the supplied stage fields (`delta`
    /// nodal values and the node-averaged dilation rate), which the split
    /// has already computed when the flow system is assembled.
    fn varpi_values(&self, t: f64, delta: &[f64], dtq_nodes: &[f64]) -> Result<Vec<f64>> {
        let c = &self.case.params.consts;
        let ls = self.case.params.phys.lambda_star;
        let mut pairs = Vec::with_capacity(self.varpi_sites.len());
        for site in &self.varpi_sites {
            let node = site.dof;
            let x = self.spaces.p1.coords[node];
            let value = match &self.case.sides[site.side].pressure {
                PressureBc::Flux(_) => unreachable!("flux side has no pressure sites"),
                PressureBc::DirichletVarpi(g) => g(x, t),
                PressureBc::DirichletPressure(g) => {
                    (g(x, t) - c.chi1 * delta[node] - ls * c.chi1 * dtq_nodes[node]) / c.chi2
                }
            };
            pairs.push((node, value));
        }
        merged_values(&self.varpi_nodes, &pairs)
    }

    /// Values for scalar nodes carrying direct conserved-scalar data,
    /// aligned with `varpi_value_nodes`.
    fn varpi_value_constraints(&self, t: f64) -> Result<Vec<f64>> {
        let mut pairs = Vec::new();
        for site in &self.varpi_sites {
            if let PressureBc::DirichletVarpi(g) = &self.case.sides[site.side].pressure {
                let x = self.spaces.p1.coords[site.dof];
                pairs.push((site.dof, g(x, t)));
            }
        }
        merged_values(&self.varpi_value_nodes, &pairs)
    }

    /// Pressure data at the nodes whose scalar rows were replaced by the
    /// reconstruction identity, aligned with `translated_nodes`.
    fn translation_values(&self, t: f64) -> Result<Vec<f64>> {
        let mut pairs = Vec::new();
        for site in &self.varpi_sites {
            if self.translated_nodes.binary_search(&site.dof).is_err() {
                continue;
            }
            if let PressureBc::DirichletPressure(g) = &self.case.sides[site.side].pressure {
                let x = self.spaces.p1.coords[site.dof];
                pairs.push((site.dof, g(x, t)));
            }
        }
        merged_values(&self.translated_nodes, &pairs)
    }

    fn needs_dtq_nodes(&self) -> bool {
        self.case
            .sides
            .iter()
            .any(|s| matches!(s.pressure, PressureBc::DirichletPressure(_)))
            && self.case.params.phys.lambda_star != 0.0
    }

    // -- initialization and stepping -------------------------------------------

    /// Builds the state at `t = 0` from the case's initial data.
    pub fn init_state(&self) -> State {
        let phys = &self.case.params.phys;
        let tau = match &self.case.init.tau {
            Some(f) => interpolate_vec(&self.spaces.p2v, f),
            None => vec![0.0; self.spaces.n_tau()],
        };
        let p0 = match &self.case.init.p {
            Some(f) => interpolate(&self.spaces.p1, f),
            None => vec![0.0; self.spaces.n_scalar()],
        };
        let div0 = broken_div(&self.spaces, &tau);
        let (q0_nodes, q0_broken) = match &self.case.init.q {
            Some(f) => {
                let nodes = interpolate(&self.spaces.p1, f);
                let broken = p1_to_broken(&self.spaces, &nodes);
                (nodes, broken)
            }
            None => (node_average(&self.spaces, &div0), div0.clone()),
        };
        let varpi: Vec<f64> = p0
            .iter()
            .zip(&q0_nodes)
            .map(|(&p, &q)| phys.a0 * p + phys.b0 * q)
            .collect();
        let delta = match &self.case.init.delta {
            Some(f) => interpolate(&self.spaces.p1, f),
            None => p0
                .iter()
                .zip(&q0_nodes)
                .map(|(&p, &q)| phys.b0 * p - self.case.params.consts.lam * q)
                .collect(),
        };
        let p_broken = p1_to_broken(&self.spaces, &p0);
        let n_t = self.spaces.mesh.n_triangles();
        State {
            step: 0,
            t: 0.0,
            tau_prev: tau.clone(),
            tau,
            delta,
            varpi_stage: varpi.clone(),
            varpi,
            div_broken: div0,
            dt_div_broken: vec![[0.0; 3]; n_t],
            p_broken,
            q_broken: q0_broken,
        }
    }

    /// Advances one step from `state`.
    pub fn step(&self, state: &State) -> Result<State> {
        let t1 = state.t + self.dt;
        let c = &self.case.params.consts;
        let ls = self.case.params.phys.lambda_star;
        let dt = self.dt;
        let n_tau = self.spaces.n_tau();
        let n_s = self.spaces.n_scalar();

        let tau_vals = self.tau_values(t1)?;
        match &self.systems {
            Systems::Monolithic(sys) => {
                let mut rhs = vec![0.0; n_tau + 2 * n_s];
                let body = self.body_load(t1);
                let trac = self.traction_load(t1);
                for i in 0..n_tau {
                    rhs[i] = body[i] + trac[i];
                }
                let btau = self.ops.b_div.mul_vec(&state.tau);
                for i in 0..n_s {
                    rhs[n_tau + i] = ls * c.chi3 / dt * btau[i];
                }
                let msw = self.ops.m_s.mul_vec(&state.varpi);
                let gtau = self.ops.g_k.mul_vec(&state.tau);
                let src = self.source_load(t1);
                let flux = self.flux_load(t1);
                for i in 0..n_s {
                    rhs[n_tau + n_s + i] = msw[i] / dt
                        + ls * c.chi1 / dt * gtau[i]
                        + src[i]
                        + flux[i]
                        + self.gravity[i];
                }
                // Replaced scalar rows carry the pressure value plus the
                // lagged half of the dilation rate as their right-hand side;
                // the current-step half sits in the matrix row.
                if !self.translated_nodes.is_empty() {
                    let pvals = self.translation_values(t1)?;
                    let avg_prev = if ls != 0.0 {
                        node_average(&self.spaces, &state.div_broken)
                    } else {
                        Vec::new()
                    };
                    for (k, &v) in self.translated_nodes.iter().enumerate() {
                        let mut val = pvals[k];
                        if ls != 0.0 {
                            val += ls * c.chi1 / dt * avg_prev[v];
                        }
                        rhs[n_tau + n_s + v] = val;
                    }
                }
                let w_vals = self.varpi_value_constraints(t1)?;
                let mut vals = tau_vals;
                vals.extend(w_vals);
                let x = sys.solve(&rhs, &vals)?;
                let mut tau = x[..n_tau].to_vec();
                if let Some(r) = &self.rigid {
                    r.project(&self.mass_p2v, &mut tau);
                }
                let delta = x[n_tau..n_tau + n_s].to_vec();
                let varpi = x[n_tau + n_s..].to_vec();
                Ok(self.make_state(state, t1, tau, delta, varpi.clone(), varpi))
            }
            Systems::Decoupled { stokes, diffusion } => {
                // Stokes block with the lagged conserved scalar.
                let mut rhs = vec![0.0; n_tau + n_s];
                let body = self.body_load(t1);
                let trac = self.traction_load(t1);
                for i in 0..n_tau {
                    rhs[i] = body[i] + trac[i];
                }
                let btau = self.ops.b_div.mul_vec(&state.tau);
                let msw = self.ops.m_s.mul_vec(&state.varpi);
                for i in 0..n_s {
                    rhs[n_tau + i] = c.chi1 * msw[i] + ls * c.chi3 / dt * btau[i];
                }
                let x = stokes.solve(&rhs, &tau_vals)?;
                let mut tau = x[..n_tau].to_vec();
                if let Some(r) = &self.rigid {
                    r.project(&self.mass_p2v, &mut tau);
                }
                let delta = x[n_tau..].to_vec();

                // Diffusion block, implicit in the conserved scalar.
                let mut rd = vec![0.0; n_s];
                let src = self.source_load(t1);
                let flux = self.flux_load(t1);
                for i in 0..n_s {
                    rd[i] = msw[i] / dt + src[i] + flux[i] + self.gravity[i];
                }
                self.ops.d_k.add_mul_vec(&delta, &mut rd, -c.chi1);
                let dtau: Vec<f64> =
                    tau.iter().zip(&state.tau).map(|(a, b)| (a - b) / dt).collect();
                self.ops.g_k.add_mul_vec(&dtau, &mut rd, -ls * c.chi1);
                // Pressure translation uses current-stage fields.
                let dtq_nodes = if self.needs_dtq_nodes() {
                    let div1 = broken_div(&self.spaces, &tau);
                    let mut rate = vec![[0.0; 3]; div1.len()];
                    for (t, r) in rate.iter_mut().enumerate() {
                        for i in 0..3 {
                            r[i] = (div1[t][i] - state.div_broken[t][i]) / dt;
                        }
                    }
                    node_average(&self.spaces, &rate)
                } else {
                    vec![0.0; n_s]
                };
                let w_vals = self.varpi_values(t1, &delta, &dtq_nodes)?;
                let varpi = diffusion.solve(&rd, &w_vals)?;
                Ok(self.make_state(state, t1, tau, delta, varpi, state.varpi.clone()))
            }
        }
    }

    fn make_state(
        &self,
        prev: &State,
        t1: f64,
        tau: Vec<f64>,
        delta: Vec<f64>,
        varpi: Vec<f64>,
        varpi_stage: Vec<f64>,
    ) -> State {
        let div1 = broken_div(&self.spaces, &tau);
        let mut dt_div = vec![[0.0; 3]; div1.len()];
        for (t, r) in dt_div.iter_mut().enumerate() {
            for i in 0..3 {
                r[i] = (div1[t][i] - prev.div_broken[t][i]) / self.dt;
            }
        }
        let (p_broken, q_broken) = broken_reconstruction(
            &self.spaces,
            &self.case.params,
            &delta,
            &varpi_stage,
            &dt_div,
        );
        State {
            step: prev.step + 1,
            t: t1,
            tau_prev: prev.tau.clone(),
            tau,
            delta,
            varpi,
            varpi_stage,
            div_broken: div1,
            dt_div_broken: dt_div,
            p_broken,
            q_broken,
        }
    }

    /// Runs from zero to `t_end`, returning all states including the initial
    /// one. `t_end` must be an integer multiple of the step.
    pub fn run(&self, t_end: f64) -> Result<Vec<State>> {
        let steps_f = t_end / self.dt;
        let n = steps_f.round();
        if (steps_f - n).abs() > 1e-9 * steps_f.abs().max(1.0) || n < 0.0 {
            return Err(Error::InvalidRun(format!(
                "final time {t_end} is not a multiple of the step {}",
                self.dt
            )));
        }
        let n = n as usize;
        let mut states = Vec::with_capacity(n + 1);
        states.push(self.init_state());
        for _ in 0..n {
            let next = self.step(states.last().unwrap())?;
            states.push(next);
        }
        Ok(states)
    }
}

// ---------------------------------------------------------------------------
// Direct displacement-pressure scheme (locking comparison)
// ---------------------------------------------------------------------------

/// Discrete solution of the direct scheme at one time level.
#[derive(Debug, Clone)]
pub struct DirectState {
    pub step: usize,
    pub t: f64,
    pub tau: Vec<f64>,
    pub tau_prev: Vec<f64>,
    /// Continuous linear pressure coefficients.
    pub p: Vec<f64>,
}

/// Backward Euler discretization of the original displacement-pressure
/// system on the same elements, without the reformulation. Exhibits pressure
/// oscillations in the low-permeability, nearly incompressible regime.
pub struct DirectSimulation {
    pub case: ProblemCase,
    pub dt: f64,
    pub spaces: Spaces,
    pub ops: Operators,
    pub mass_p2v: CsrMatrix,
    tau_sites: Vec<Site>,
    tau_dofs: Vec<usize>,
    p_sites: Vec<Site>,
    p_nodes: Vec<usize>,
    rigid: Option<RigidProjector>,
    gravity: Vec<f64>,
    system: ConstrainedSystem,
}

impl DirectSimulation {
    pub fn new(case: ProblemCase, nx: usize, ny: usize, dt: f64) -> Result<DirectSimulation> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidRun(format!("time step must be positive, got {dt}")));
        }
        for side in &case.sides {
            if matches!(side.pressure, PressureBc::DirichletVarpi(_)) {
                return Err(Error::InvalidRun(
                    "the direct scheme takes pressure Dirichlet data, not conserved-scalar data"
                        .into(),
                ));
            }
        }
        let mesh = Mesh::build_rect(case.rect, nx, ny)?;
        let spaces = Spaces::new(mesh);
        let ops = Operators::build(&spaces, &case.params);
        let mass_p2v = assemble_mass_p2v(&spaces);

        let mut tau_sites = displacement_sites(&case, &spaces);
        let mut tau_dofs: Vec<usize> = tau_sites.iter().map(|s| s.dof).collect();
        tau_dofs.sort_unstable();
        tau_dofs.dedup();
        let rigid = if case.fix_rigid_motions {
            if !tau_dofs.is_empty() {
                return Err(Error::InvalidRun(
                    "rigid motion handling requires a pure traction displacement boundary".into(),
                ));
            }
            let v_corner = spaces.mesh.nx;
            tau_dofs = vec![
                spaces.p2v.dof(0, 0),
                spaces.p2v.dof(0, 1),
                spaces.p2v.dof(v_corner, 1),
            ];
            tau_dofs.sort_unstable();
            Some(RigidProjector::new(&spaces, &mass_p2v)?)
        } else {
            None
        };
        tau_sites.retain(|s| tau_dofs.binary_search(&s.dof).is_ok());

        let p_sites = pressure_sites(&case, &spaces);
        let mut p_nodes: Vec<usize> = p_sites.iter().map(|s| s.dof).collect();
        p_nodes.sort_unstable();
        p_nodes.dedup();

        let phys = &case.params.phys;
        let lam = case.params.consts.lam;
        let n_tau = spaces.n_tau();
        let n_s = spaces.n_scalar();
        let mut t = Triplets::with_capacity(
            n_tau + n_s,
            n_tau + n_s,
            ops.a_eps.n_nnz() + ops.c_div.n_nnz() + 2 * ops.b_div.n_nnz() + ops.m_s.n_nnz()
                + ops.d_k.n_nnz(),
        );
        t.push_block(&ops.a_eps, 0, 0, 1.0);
        t.push_block(&ops.c_div, 0, 0, phys.lambda_star / dt + lam);
        t.push_block_transposed(&ops.b_div, 0, n_tau, -phys.b0);
        t.push_block(&ops.b_div, n_tau, 0, phys.b0 / dt);
        t.push_block(&ops.m_s, n_tau, n_tau, phys.a0 / dt);
        t.push_block(&ops.d_k, n_tau, n_tau, 1.0);
        let matrix = CsrMatrix::from_triplets(&t);
        let mut cdofs = tau_dofs.clone();
        cdofs.extend(p_nodes.iter().map(|&v| n_tau + v));
        let system = ConstrainedSystem::new(&matrix, &cdofs)?;
        let gravity = assemble_gravity_flux(&spaces, &case.params);
        Ok(DirectSimulation {
            case,
            dt,
            spaces,
            ops,
            mass_p2v,
            tau_sites,
            tau_dofs,
            p_sites,
            p_nodes,
            rigid,
            gravity,
            system,
        })
    }

    pub fn init_state(&self) -> DirectState {
        let tau = match &self.case.init.tau {
            Some(f) => interpolate_vec(&self.spaces.p2v, f),
            None => vec![0.0; self.spaces.n_tau()],
        };
        let p = match &self.case.init.p {
            Some(f) => interpolate(&self.spaces.p1, f),
            None => vec![0.0; self.spaces.n_scalar()],
        };
        DirectState { step: 0, t: 0.0, tau_prev: tau.clone(), tau, p }
    }

    pub fn step(&self, state: &DirectState) -> Result<DirectState> {
        let t1 = state.t + self.dt;
        let phys = &self.case.params.phys;
        let n_tau = self.spaces.n_tau();
        let n_s = self.spaces.n_scalar();
        let dt = self.dt;

        let mut rhs = vec![0.0; n_tau + n_s];
        let body = body_load_for(&self.case, &self.spaces, t1);
        let trac = traction_load_for(&self.case, &self.spaces, t1);
        let ctau = self.ops.c_div.mul_vec(&state.tau);
        for i in 0..n_tau {
            rhs[i] = body[i] + trac[i] + phys.lambda_star / dt * ctau[i];
        }
        let msp = self.ops.m_s.mul_vec(&state.p);
        let btau = self.ops.b_div.mul_vec(&state.tau);
        let src = source_load_for(&self.case, &self.spaces, t1);
        let flux = flux_load_for(&self.case, &self.spaces, t1);
        for i in 0..n_s {
            rhs[n_tau + i] =
                phys.a0 / dt * msp[i] + phys.b0 / dt * btau[i] + src[i] + flux[i] + self.gravity[i];
        }

        let mut pairs = Vec::with_capacity(self.tau_sites.len());
        for site in &self.tau_sites {
            let comp = site.dof % 2;
            let node = site.dof / 2;
            let x = self.spaces.p2v.coords[node];
            let g = self.case.sides[site.side].displacement.dirichlet[comp]
                .as_ref()
                .expect("site registered for missing data");
            pairs.push((site.dof, g(x, t1)));
        }
        let mut vals = merged_values(&self.tau_dofs, &pairs)?;
        let mut p_pairs = Vec::with_capacity(self.p_sites.len());
        for site in &self.p_sites {
            let x = self.spaces.p1.coords[site.dof];
            let value = match &self.case.sides[site.side].pressure {
                PressureBc::DirichletPressure(g) => g(x, t1),
                _ => unreachable!("site registered for missing data"),
            };
            p_pairs.push((site.dof, value));
        }
        vals.extend(merged_values(&self.p_nodes, &p_pairs)?);

        let x = self.system.solve(&rhs, &vals)?;
        let mut tau = x[..n_tau].to_vec();
        if let Some(r) = &self.rigid {
            r.project(&self.mass_p2v, &mut tau);
        }
        Ok(DirectState {
            step: state.step + 1,
            t: t1,
            tau_prev: state.tau.clone(),
            tau,
            p: x[n_tau..].to_vec(),
        })
    }

    pub fn run(&self, t_end: f64) -> Result<Vec<DirectState>> {
        let steps_f = t_end / self.dt;
        let n = steps_f.round();
        if (steps_f - n).abs() > 1e-9 * steps_f.abs().max(1.0) || n < 0.0 {
            return Err(Error::InvalidRun(format!(
                "final time {t_end} is not a multiple of the step {}",
                self.dt
            )));
        }
        let n = n as usize;
        let mut states = Vec::with_capacity(n + 1);
        states.push(self.init_state());
        for _ in 0..n {
            let next = self.step(states.last().unwrap())?;
            states.push(next);
        }
        Ok(states)
    }
}

// Shared load helpers (free functions so both schemes use identical data).

fn body_load_for(case: &ProblemCase, spaces: &Spaces, t: f64) -> Vec<f64> {
    match &case.body_load {
        Some(f) => assemble_load_vec(spaces, |x| f(x, t)),
        None => vec![0.0; spaces.n_tau()],
    }
}

fn traction_load_for(case: &ProblemCase, spaces: &Spaces, t: f64) -> Vec<f64> {
    let mut out = vec![0.0; spaces.n_tau()];
    for tag in BoundaryTag::ALL {
        let bc = &case.sides[tag.index()].displacement;
        let g = match &bc.traction {
            Some(g) => g,
            None => continue,
        };
        let load = assemble_traction(spaces, tag, |facet| {
            let in_dirichlet_part = match &bc.dirichlet_region {
                Some(region) => region(facet.midpoint(&spaces.mesh)),
                None => true,
            };
            [
                bc.dirichlet[0].is_none() || !in_dirichlet_part,
                bc.dirichlet[1].is_none() || !in_dirichlet_part,
            ]
        }, |x, _f| g(x, t));
        for (o, l) in out.iter_mut().zip(&load) {
            *o += l;
        }
    }
    out
}

fn source_load_for(case: &ProblemCase, spaces: &Spaces, t: f64) -> Vec<f64> {
    match &case.fluid_source {
        Some(f) => assemble_load_scalar(spaces, |x| f(x, t)),
        None => vec![0.0; spaces.n_scalar()],
    }
}

fn flux_load_for(case: &ProblemCase, spaces: &Spaces, t: f64) -> Vec<f64> {
    let mut out = vec![0.0; spaces.n_scalar()];
    for tag in BoundaryTag::ALL {
        if let PressureBc::Flux(Some(g)) = &case.sides[tag.index()].pressure {
            let load = assemble_flux(spaces, tag, |x, _f| g(x, t));
            for (o, l) in out.iter_mut().zip(&load) {
                *o -= l;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{validate, PhysicalParams};
    use approx::assert_relative_eq;

    fn baseline() -> CheckedParams {
        validate(PhysicalParams::default()).unwrap()
    }

    fn sup_norm(v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn zero_data_stays_zero() {
        // Pure traction-free problem with zero loads: every scheme must hold
        // the zero state to rounding over many steps.
        for scheme in [Scheme::Monolithic, Scheme::Decoupled] {
            let mut case = ProblemCase::natural(baseline(), Rect::unit());
            case.fix_rigid_motions = true;
            let sim = Simulation::new(case, 4, 4, 0.002, scheme).unwrap();
            let states = sim.run(0.04).unwrap();
            assert_eq!(states.len(), 21);
            let last = states.last().unwrap();
            assert!(sup_norm(&last.tau) <= 1e-12, "tau drifted: {}", sup_norm(&last.tau));
            assert!(sup_norm(&last.delta) <= 1e-12);
            assert!(sup_norm(&last.varpi) <= 1e-12);
            let pmax = last.p_broken.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(pmax <= 1e-12);
        }
        let mut case = ProblemCase::natural(baseline(), Rect::unit());
        case.fix_rigid_motions = true;
        let sim = DirectSimulation::new(case, 4, 4, 0.002).unwrap();
        let states = sim.run(0.04).unwrap();
        let last = states.last().unwrap();
        assert!(sup_norm(&last.tau) <= 1e-12);
        assert!(sup_norm(&last.p) <= 1e-12);
    }

    #[test]
    fn initial_conserved_scalar_combines_pressure_and_dilation() {
        let mut case = ProblemCase::natural(baseline(), Rect::unit());
        case.init.p = Some(Box::new(|_| 1.0));
        case.fix_rigid_motions = true;
        let sim = Simulation::new(case, 3, 3, 0.01, Scheme::Monolithic).unwrap();
        let s0 = sim.init_state();
        for &w in &s0.varpi {
            assert_relative_eq!(w, 0.2, max_relative = 1e-14);
        }
        // delta(0) = b0 p - lam q = 1e-5 with q = 0.
        for &d in &s0.delta {
            assert_relative_eq!(d, 1e-5, max_relative = 1e-12);
        }
    }

    #[test]
    fn reconstruction_splits_constant_conserved_scalar() {
        // With delta = 0 and no dilation rate, varpi = c splits into
        // p = chi2 c and q = chi1 c.
        let params = baseline();
        let mut case = ProblemCase::natural(params, Rect::unit());
        case.fix_rigid_motions = true;
        let sim = Simulation::new(case, 2, 2, 0.01, Scheme::Monolithic).unwrap();
        let n_s = sim.spaces.n_scalar();
        let n_t = sim.spaces.mesh.n_triangles();
        let delta = vec![0.0; n_s];
        let varpi = vec![3.0; n_s];
        let dt_div = vec![[0.0; 3]; n_t];
        let (p, q) =
            broken_reconstruction(&sim.spaces, &sim.case.params, &delta, &varpi, &dt_div);
        let c = &sim.case.params.consts;
        for t in 0..n_t {
            for i in 0..3 {
                assert_relative_eq!(p[t][i], c.chi2 * 3.0, max_relative = 1e-14);
                assert_relative_eq!(q[t][i], c.chi1 * 3.0, max_relative = 1e-14);
            }
        }
    }

    /// A small driven problem with mixed conditions, used by the identity
    /// tests below.
    fn driven_case() -> ProblemCase {
        let mut case = ProblemCase::natural(baseline(), Rect::unit());
        case.body_load = Some(Box::new(|x, t| {
            [t * (std::f64::consts::PI * x[1]).sin(), 0.3 * t * x[0]]
        }));
        case.fluid_source = Some(Box::new(|x, t| (1.0 + t) * x[0] * x[1]));
        // Clamp the left side, prescribe conserved-scalar data on the right.
        case.sides[BoundaryTag::Left.index()].displacement.dirichlet =
            [Some(Box::new(|_, _| 0.0)), Some(Box::new(|_, _| 0.0))];
        case.sides[BoundaryTag::Right.index()].pressure =
            PressureBc::DirichletVarpi(Box::new(|x, t| 0.1 * t * x[1]));
        case
    }

    #[test]
    fn reconstruction_identities_hold_along_trajectory() {
        for scheme in [Scheme::Monolithic, Scheme::Decoupled] {
            let sim = Simulation::new(driven_case(), 4, 4, 0.01, scheme).unwrap();
            let states = sim.run(0.05).unwrap();
            let phys = &sim.case.params.phys;
            let lam = sim.case.params.consts.lam;
            for s in &states[1..] {
                let mut worst_a = 0.0f64;
                let mut worst_b = 0.0f64;
                let mut scale = 1e-30f64;
                for (t, tri) in sim.spaces.mesh.triangles.iter().enumerate() {
                    for i in 0..3 {
                        let p = s.p_broken[t][i];
                        let q = s.q_broken[t][i];
                        let w = s.varpi_stage[tri[i]];
                        let d = s.delta[tri[i]];
                        let r = s.dt_div_broken[t][i];
                        worst_a = worst_a.max((phys.a0 * p + phys.b0 * q - w).abs());
                        worst_b = worst_b
                            .max((phys.b0 * p - lam * q - phys.lambda_star * r - d).abs());
                        scale = scale.max(w.abs()).max(d.abs()).max(p.abs());
                    }
                }
                assert!(worst_a <= 1e-11 * scale.max(1.0), "conserved split: {worst_a}");
                assert!(worst_b <= 1e-11 * scale.max(1.0), "stress split: {worst_b}");
            }
        }
    }

    #[test]
    fn schemes_agree_at_steady_state() {
        // Without the viscous term and with time-independent data, both
        // couplings relax to the same stationary solution.
        let mut phys = PhysicalParams::default();
        phys.lambda_star = 0.0;
        phys.permeability = crate::params::Tensor2::isotropic(1.0);
        let params = validate(phys).unwrap();
        let make = || {
            let mut case = ProblemCase::natural(params.clone(), Rect::unit());
            case.body_load = Some(Box::new(|x, _| [x[1] - 0.5, 0.2]));
            case.fluid_source = Some(Box::new(|_, _| 0.5));
            for tag in BoundaryTag::ALL {
                case.sides[tag.index()].displacement.dirichlet =
                    [Some(Box::new(|_, _| 0.0)), Some(Box::new(|_, _| 0.0))];
            }
            case
        };
        let sim1 = Simulation::new(make(), 4, 4, 0.02, Scheme::Monolithic).unwrap();
        let sim0 = Simulation::new(make(), 4, 4, 0.02, Scheme::Decoupled).unwrap();
        let s1 = sim1.run(1.0).unwrap();
        let s0 = sim0.run(1.0).unwrap();
        let a = s1.last().unwrap();
        let b = s0.last().unwrap();
        let scale = sup_norm(&a.tau).max(sup_norm(&a.varpi)).max(1e-30);
        let dtau: Vec<f64> = a.tau.iter().zip(&b.tau).map(|(x, y)| x - y).collect();
        let dw: Vec<f64> = a.varpi.iter().zip(&b.varpi).map(|(x, y)| x - y).collect();
        assert!(sup_norm(&dtau) <= 1e-8 * scale, "tau mismatch {}", sup_norm(&dtau));
        assert!(sup_norm(&dw) <= 1e-8 * scale, "varpi mismatch {}", sup_norm(&dw));
    }

    #[test]
    fn rigid_motion_component_is_projected_out() {
        // Pure traction problem with an arbitrary load: after each step the
        // displacement must be L2-orthogonal to all rigid motions.
        let mut case = ProblemCase::natural(baseline(), Rect::unit());
        case.fix_rigid_motions = true;
        case.body_load = Some(Box::new(|x, t| [x[0] * x[1] + t, x[0] - x[1]]));
        case.fluid_source = Some(Box::new(|x, _| x[0]));
        let sim = Simulation::new(case, 4, 4, 0.01, Scheme::Monolithic).unwrap();
        let states = sim.run(0.05).unwrap();
        let last = states.last().unwrap();
        let scale = sup_norm(&last.tau).max(1e-30);
        let products =
            crate::assembly::rigid_motion_products(&sim.spaces, &sim.mass_p2v, &last.tau);
        for p in products {
            assert!(p.abs() <= 1e-10 * scale, "rigid component remains: {p}");
        }
        assert!(scale > 1e-6, "load produced no deformation");
    }

    #[test]
    fn conflicting_displacement_data_is_reported() {
        let mut case = ProblemCase::natural(baseline(), Rect::unit());
        // Both sides claim the shared corner's first component with
        // different values.
        case.sides[BoundaryTag::Left.index()].displacement.dirichlet[0] =
            Some(Box::new(|_, _| 1.0));
        case.sides[BoundaryTag::Bottom.index()].displacement.dirichlet[0] =
            Some(Box::new(|_, _| 2.0));
        let sim = Simulation::new(case, 2, 2, 0.01, Scheme::Monolithic).unwrap();
        let err = sim.step(&sim.init_state()).unwrap_err();
        assert!(matches!(err, Error::ConflictingConstraint { .. }));
    }

    #[test]
    fn run_rejects_incompatible_horizon() {
        let mut case = ProblemCase::natural(baseline(), Rect::unit());
        case.fix_rigid_motions = true;
        let sim = Simulation::new(case, 2, 2, 0.03, Scheme::Monolithic).unwrap();
        assert!(matches!(sim.run(0.1), Err(Error::InvalidRun(_))));
    }
}
