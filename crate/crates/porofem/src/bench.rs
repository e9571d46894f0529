//! Benchmark problems without exact solutions: a near-incompressible
//! locking test on the unit square and a strip-footing consolidation run.
//!
//! Both problems stress the pressure approximation in the regime where the
//! storage coefficient is close to zero and the permeability is small, the
//! classical trigger for locking and spurious pressure oscillations in
//! displacement-pressure discretizations. The drivers run the three-field
//! scheme and the two-field scheme on identical data and reduce the final
//! pressure along a mid-height sampling line to an oscillation index, so
//! the two formulations can be compared quantitatively. A profile that
//! vanishes at both drained ends of the line and is nonzero in between has
//! an index of at least two, with equality exactly for clean unimodal
//! profiles; oscillations push the index above that floor.

use crate::error::Result;
use crate::mesh::{BoundaryTag, Rect};
use crate::params::{validate, CheckedParams, PhysicalParams, Tensor2};
use crate::stepper::{
    sample_broken, sample_p1, DirectSimulation, PressureBc, ProblemCase, Scheme, Simulation,
};
use crate::verification::{oscillation_metric, OscillationMetric};

/// Storage coefficient of the locking benchmark, close enough to zero to
/// put the problem deep in the locking regime.
const LOCKING_A0: f64 = 2e-10;

/// Near-incompressible, almost impermeable soil column: Poisson ratio
/// 1/22, tiny storage, stiff grains. The values keep the two derived Lame
/// constants at exactly 1e3 and 1e4.
pub fn locking_params() -> CheckedParams {
    locking_params_with_storage(LOCKING_A0)
}

/// Locking column with the storage coefficient replaced; larger values
/// give the well-storaged control problem for the comparison.
pub fn locking_params_with_storage(a0: f64) -> CheckedParams {
    let phys = PhysicalParams {
        lambda_star: 1e-5,
        e_modulus: 2.0e4 * 23.0 / 22.0,
        nu: 1.0 / 22.0,
        b0: 1e-5,
        a0,
        permeability: Tensor2::isotropic(1e-7),
        theta_f: 1.0,
        rho_f_g: [0.0, 0.0],
    };
    validate(phys).expect("locking parameters are valid")
}

/// Footing soil block: meter/Newton/second scale, viscosity 1e-3, and a
/// permeability small enough that the load response over the simulated
/// 0.01 s is essentially undrained.
pub fn footing_params() -> CheckedParams {
    let phys = PhysicalParams {
        lambda_star: 1e-2,
        e_modulus: 3.0e4,
        nu: 0.2,
        b0: 1.0,
        a0: 2e-8,
        permeability: Tensor2::isotropic(1e-15),
        theta_f: 1e-3,
        rho_f_g: [0.0, 0.0],
    };
    validate(phys).expect("footing parameters are valid")
}

/// Uniform load intensity of the footing strip, in N/m^2.
pub const FOOTING_LOAD: f64 = 1.0e4;

/// Unit-square column, drained on the whole boundary, loaded through a
/// strip `x1 in [0.2, 0.8)` of the top side with the vertical traction
/// `(0, b0 sin t)`; the rest of the top and the bottom hold the vertical
/// displacement, the lateral sides hold the horizontal displacement.
pub fn locking_case() -> ProblemCase {
    locking_case_with_storage(LOCKING_A0)
}

/// The locking column with an overridden storage coefficient.
pub fn locking_case_with_storage(a0: f64) -> ProblemCase {
    let params = locking_params_with_storage(a0);
    let b0 = params.phys.b0;
    let mut case = ProblemCase::natural(params, Rect::unit());
    for side in case.sides.iter_mut() {
        side.pressure = PressureBc::DirichletPressure(Box::new(|_x, _t| 0.0));
    }
    let zero = || -> Box<dyn Fn([f64; 2], f64) -> f64 + Send + Sync> {
        Box::new(|_x, _t| 0.0)
    };
    case.sides[BoundaryTag::Right.index()].displacement.dirichlet[0] = Some(zero());
    case.sides[BoundaryTag::Left.index()].displacement.dirichlet[0] = Some(zero());
    case.sides[BoundaryTag::Bottom.index()].displacement.dirichlet[1] = Some(zero());
    let top = &mut case.sides[BoundaryTag::Top.index()].displacement;
    top.dirichlet[1] = Some(zero());
    top.dirichlet_region = Some(Box::new(|x| !(0.2..0.8).contains(&x[0])));
    top.traction = Some(Box::new(move |_x, t| [0.0, b0 * t.sin()]));
    case
}

/// 100 m by 100 m soil block, fixed on the lateral sides and the base,
/// drained everywhere, loaded by a uniform downward traction on the
/// centered 40 m strip of the surface; the rest of the surface is
/// traction free.
pub fn footing_case() -> ProblemCase {
    let params = footing_params();
    let rect = Rect { x0: -50.0, y0: 0.0, x1: 50.0, y1: 100.0 };
    let mut case = ProblemCase::natural(params, rect);
    for side in case.sides.iter_mut() {
        side.pressure = PressureBc::DirichletPressure(Box::new(|_x, _t| 0.0));
    }
    let zero = || -> Box<dyn Fn([f64; 2], f64) -> f64 + Send + Sync> {
        Box::new(|_x, _t| 0.0)
    };
    for tag in [BoundaryTag::Right, BoundaryTag::Bottom, BoundaryTag::Left] {
        let side = &mut case.sides[tag.index()].displacement;
        side.dirichlet = [Some(zero()), Some(zero())];
    }
    case.sides[BoundaryTag::Top.index()].displacement.traction =
        Some(Box::new(|x, _t| {
            if x[0].abs() <= 20.0 {
                [0.0, -FOOTING_LOAD]
            } else {
                [0.0, 0.0]
            }
        }));
    case
}

/// Pressure profiles of the two formulations along one horizontal line,
/// with their oscillation metrics.
#[derive(Debug, Clone)]
pub struct FormulationComparison {
    /// Sampling abscissas.
    pub xs: Vec<f64>,
    /// Height of the sampling line.
    pub y: f64,
    /// Reconstructed pressure of the three-field scheme.
    pub reformulated: Vec<f64>,
    /// Nodal pressure of the two-field scheme on the same mesh and data.
    pub original: Vec<f64>,
    pub reformulated_metric: OscillationMetric,
    pub original_metric: OscillationMetric,
}

/// Number of sample points along a comparison line.
pub const LINE_SAMPLES: usize = 161;

fn line_xs(rect: Rect, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| rect.x0 + (rect.x1 - rect.x0) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Mid-height sampling line, offset by half a cell so it crosses element
/// interiors instead of edges.
fn mid_line(rect: Rect, ny: usize) -> f64 {
    let dy = (rect.y1 - rect.y0) / ny as f64;
    rect.y0 + 0.5 * (rect.y1 - rect.y0) + 0.5 * dy
}

/// Runs both formulations of a benchmark case on the same mesh and time
/// grid and samples their final pressures along the mid-height line. The
/// two cases must describe the same problem; they are passed separately
/// because a case holds non-clonable closures.
pub fn compare_formulations(
    case: ProblemCase,
    case_again: ProblemCase,
    nx: usize,
    ny: usize,
    dt: f64,
    t_end: f64,
) -> Result<FormulationComparison> {
    let rect = case.rect;
    let sim = Simulation::new(case, nx, ny, dt, Scheme::Monolithic)?;
    let states = sim.run(t_end)?;
    let last = states.last().expect("at least the initial state");

    let direct = DirectSimulation::new(case_again, nx, ny, dt)?;
    let direct_states = direct.run(t_end)?;
    let direct_last = direct_states.last().expect("at least the initial state");

    let y = mid_line(rect, ny);
    let xs = line_xs(rect, LINE_SAMPLES);
    let mut reformulated = Vec::with_capacity(xs.len());
    let mut original = Vec::with_capacity(xs.len());
    for &x in &xs {
        reformulated.push(sample_broken(&sim.spaces, &last.p_broken, [x, y])?);
        original.push(sample_p1(&direct.spaces, &direct_last.p, [x, y])?);
    }
    Ok(FormulationComparison {
        reformulated_metric: oscillation_metric(&reformulated),
        original_metric: oscillation_metric(&original),
        xs,
        y,
        reformulated,
        original,
    })
}

/// Final state summary of the footing run on the three-field scheme.
#[derive(Debug, Clone)]
pub struct FootingReport {
    /// Sampling abscissas of both profiles.
    pub xs: Vec<f64>,
    /// Height of the pressure sampling line.
    pub y: f64,
    /// Reconstructed pressure along the mid-height line.
    pub pressure: Vec<f64>,
    pub pressure_metric: OscillationMetric,
    /// Vertical surface displacement along the top of the domain.
    pub settlement: Vec<f64>,
}

impl FootingReport {
    /// Largest vertical surface displacement under the loaded strip; a
    /// sound run settles downward, so this is negative.
    pub fn max_settlement_under_strip(&self) -> f64 {
        self.xs
            .iter()
            .zip(&self.settlement)
            .filter(|(&x, _)| x.abs() <= 20.0)
            .map(|(_, &s)| s)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs the footing problem with the three-field scheme and reduces the
/// final state to the quantities the acceptance checks look at.
pub fn run_footing(case: ProblemCase, nx: usize, ny: usize, dt: f64, t_end: f64) -> Result<FootingReport> {
    let rect = case.rect;
    let sim = Simulation::new(case, nx, ny, dt, Scheme::Monolithic)?;
    let states = sim.run(t_end)?;
    let last = states.last().expect("at least the initial state");

    let y = mid_line(rect, ny);
    let xs = line_xs(rect, LINE_SAMPLES);
    let mut pressure = Vec::with_capacity(xs.len());
    let mut settlement = Vec::with_capacity(xs.len());
    for &x in &xs {
        pressure.push(sample_broken(&sim.spaces, &last.p_broken, [x, y])?);
        let (tri, bary) = sim.spaces.mesh.locate([x, rect.y1])?;
        let (v, _, _) =
            crate::fem::eval_field_vec(&sim.spaces.p2v, &last.tau, &sim.spaces.mesh, tri, bary);
        settlement.push(v[1]);
    }
    Ok(FootingReport {
        pressure_metric: oscillation_metric(&pressure),
        xs,
        y,
        pressure,
        settlement,
    })
}
