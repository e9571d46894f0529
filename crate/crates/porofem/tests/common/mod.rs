//! Shared helpers for the integration tests.
//!
//! The centerpiece is [`Jet3`], a truncated trivariate Taylor polynomial in
//! (x1, x2, t) of total degree three. Evaluating the exact manufactured
//! fields in jet arithmetic yields every partial derivative the model needs
//! (up to three differentiations) without repeating any of the hand-derived
//! calculus inside the library, so residual checks built on jets are an
//! independent oracle for the generated loads.

#![allow(dead_code)]

use porofem::params::CheckedParams;
use porofem::verification::ManufacturedSolution;

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

/// Exponent triples (i, j, k) of all monomials x1^i x2^j t^k with
/// i + j + k <= 3, ordered by total degree.
const MONO: [(usize, usize, usize); 20] = [
    (0, 0, 0),
    (1, 0, 0),
    (0, 1, 0),
    (0, 0, 1),
    (2, 0, 0),
    (1, 1, 0),
    (1, 0, 1),
    (0, 2, 0),
    (0, 1, 1),
    (0, 0, 2),
    (3, 0, 0),
    (2, 1, 0),
    (2, 0, 1),
    (1, 2, 0),
    (1, 1, 1),
    (1, 0, 2),
    (0, 3, 0),
    (0, 2, 1),
    (0, 1, 2),
    (0, 0, 3),
];

fn mono_index(e: (usize, usize, usize)) -> Option<usize> {
    MONO.iter().position(|&m| m == e)
}

/// Truncated Taylor polynomial of total degree three in (x1, x2, t),
/// centered at the evaluation point. The coefficient of x1^i x2^j t^k is the
/// (i, j, k) partial derivative divided by i! j! k!, so derivatives are read
/// off exactly as long as no more than three differentiations are taken.
#[derive(Debug, Clone, Copy)]
pub struct Jet3 {
    c: [f64; 20],
}

impl Jet3 {
    pub fn constant(v: f64) -> Jet3 {
        let mut c = [0.0; 20];
        c[0] = v;
        Jet3 { c }
    }

    /// The coordinate function for `axis` (0 = x1, 1 = x2, 2 = t) seeded
    /// with its value at the evaluation point.
    pub fn var(value: f64, axis: usize) -> Jet3 {
        let mut c = [0.0; 20];
        c[0] = value;
        c[1 + axis] = 1.0;
        Jet3 { c }
    }

    /// Value at the evaluation point.
    pub fn val(&self) -> f64 {
        self.c[0]
    }

    /// Partial derivative value d^(i+j+k) f / dx1^i dx2^j dt^k at the
    /// evaluation point. Exact for i + j + k <= 3.
    pub fn deriv(&self, e: (usize, usize, usize)) -> f64 {
        let idx = mono_index(e).expect("derivative order above the jet degree");
        let fact = |n: usize| (1..=n).product::<usize>() as f64;
        self.c[idx] * fact(e.0) * fact(e.1) * fact(e.2)
    }

    /// Differentiates along `axis`, dropping one Taylor degree. Applying
    /// this n times leaves a jet whose coefficients are exact up to total
    /// degree 3 - n, which is all the residual checks consume.
    pub fn d(&self, axis: usize) -> Jet3 {
        let mut out = [0.0; 20];
        for (idx, &(i, j, k)) in MONO.iter().enumerate() {
            let src = match axis {
                0 => (i + 1, j, k),
                1 => (i, j + 1, k),
                _ => (i, j, k + 1),
            };
            if let Some(s) = mono_index(src) {
                let order = match axis {
                    0 => i + 1,
                    1 => j + 1,
                    _ => k + 1,
                };
                out[idx] = order as f64 * self.c[s];
            }
        }
        Jet3 { c: out }
    }

    fn scale(&self, s: f64) -> Jet3 {
        let mut c = self.c;
        for v in &mut c {
            *v *= s;
        }
        Jet3 { c }
    }

    /// Composes an analytic function through its Taylor coefficients at the
    /// jet's base value: f(u0 + v) with f(u0), f'(u0), f''(u0), f'''(u0).
    fn compose(&self, f: [f64; 4]) -> Jet3 {
        let mut v = *self;
        v.c[0] = 0.0;
        let v2 = v * v;
        let v3 = v2 * v;
        Jet3::constant(f[0]) + v.scale(f[1]) + v2.scale(f[2] / 2.0) + v3.scale(f[3] / 6.0)
    }

    pub fn sin(&self) -> Jet3 {
        let (s, c) = self.c[0].sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet3 {
        let (s, c) = self.c[0].sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn exp(&self) -> Jet3 {
        let e = self.c[0].exp();
        self.compose([e, e, e, e])
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, rhs: Jet3) -> Jet3 {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(rhs.c.iter()) {
            *a += b;
        }
        Jet3 { c }
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, rhs: Jet3) -> Jet3 {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(rhs.c.iter()) {
            *a -= b;
        }
        Jet3 { c }
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self.scale(-1.0)
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, rhs: Jet3) -> Jet3 {
        let mut out = [0.0; 20];
        for (ia, &(i1, j1, k1)) in MONO.iter().enumerate() {
            if self.c[ia] == 0.0 {
                continue;
            }
            for (ib, &(i2, j2, k2)) in MONO.iter().enumerate() {
                if rhs.c[ib] == 0.0 {
                    continue;
                }
                if let Some(idx) = mono_index((i1 + i2, j1 + j2, k1 + k2)) {
                    out[idx] += self.c[ia] * rhs.c[ib];
                }
            }
        }
        Jet3 { c: out }
    }
}

impl Mul<Jet3> for f64 {
    type Output = Jet3;
    fn mul(self, rhs: Jet3) -> Jet3 {
        rhs.scale(self)
    }
}

/// Exact manufactured fields (tau1, tau2, p) of the given case, rebuilt in
/// jet arithmetic from their closed forms. No derivative formula from the
/// library is reused: the jets carry all partials themselves.
pub fn exact_jets(sol: ManufacturedSolution, x: [f64; 2], t: f64) -> (Jet3, Jet3, Jet3) {
    let x1 = Jet3::var(x[0], 0);
    let x2 = Jet3::var(x[1], 1);
    let tt = Jet3::var(t, 2);
    let pi = PI;
    match sol {
        ManufacturedSolution::LinearTime => {
            let tau1 = tt * (pi * x1).sin();
            let tau2 = tt * (pi * x2).sin();
            let p = tt * (pi * (x1 + x2)).sin();
            (tau1, tau2, p)
        }
        ManufacturedSolution::ExponentialTime => {
            let tau1 = tt.exp() * x1.sin();
            let tau2 = tt.exp() * x2.sin();
            let p = tt * (pi * x1).sin() * (pi * x2).sin();
            (tau1, tau2, p)
        }
    }
}

/// Residuals of the two model equations at one space-time point, using the
/// library's generated loads but jet-computed derivatives of the exact
/// fields:
///
///   momentum: -lam_star grad(div tau)_t - div sigma(tau) + b0 grad p - F
///   flow:     (a0 p + b0 div tau)_t + div zeta_f - phi
///
/// with sigma(tau) = gamma eps(tau) + lam tr(eps(tau)) I and
/// zeta_f = -(K / theta_f)(grad p - rho_f g). Returns
/// [momentum_1, momentum_2, flow].
pub fn model_residuals(
    sol: ManufacturedSolution,
    params: &CheckedParams,
    x: [f64; 2],
    t: f64,
) -> [f64; 3] {
    let phys = &params.phys;
    let lam = params.consts.lam;
    let gamma = params.consts.gamma;
    let (tau1, tau2, p) = exact_jets(sol, x, t);

    let div_tau = tau1.d(0) + tau2.d(1);
    let eps11 = tau1.d(0);
    let eps22 = tau2.d(1);
    let eps12 = 0.5 * (tau1.d(1) + tau2.d(0));
    let sig11 = gamma * eps11 + lam * div_tau;
    let sig22 = gamma * eps22 + lam * div_tau;
    let sig12 = gamma * eps12;

    let visc = div_tau.d(2);
    let f = sol.body_load(params, x, t);
    let mom1 =
        -phys.lambda_star * visc.d(0).val() - (sig11.d(0) + sig12.d(1)).val()
            + phys.b0 * p.d(0).val()
            - f[0];
    let mom2 =
        -phys.lambda_star * visc.d(1).val() - (sig12.d(0) + sig22.d(1)).val()
            + phys.b0 * p.d(1).val()
            - f[1];

    let k = phys.permeability;
    let g1 = Jet3::constant(phys.rho_f_g[0]);
    let g2 = Jet3::constant(phys.rho_f_g[1]);
    let zeta1 = (-1.0 / phys.theta_f) * (k.xx * (p.d(0) - g1) + k.xy * (p.d(1) - g2));
    let zeta2 = (-1.0 / phys.theta_f) * (k.xy * (p.d(0) - g1) + k.yy * (p.d(1) - g2));
    let storage = phys.a0 * p + phys.b0 * div_tau;
    let flow = storage.d(2).val() + (zeta1.d(0) + zeta2.d(1)).val()
        - sol.fluid_source(params, x, t);

    [mom1, mom2, flow]
}

/// Residuals of the change-of-variables identities at one point, with the
/// auxiliary exact fields taken from the library and the primitive fields
/// (p, q = div tau, q_t) recomputed by jets:
///
///   delta = b0 p - lam q - lam_star q_t
///   varpi = a0 p + b0 q
///   p     = chi1 delta + chi2 varpi + lam_star chi1 q_t
///
/// Returns [delta_residual, varpi_residual, reconstruction_residual].
pub fn reformulation_residuals(
    sol: ManufacturedSolution,
    params: &CheckedParams,
    x: [f64; 2],
    t: f64,
) -> [f64; 3] {
    let phys = &params.phys;
    let c = &params.consts;
    let (tau1, tau2, p) = exact_jets(sol, x, t);
    let q = (tau1.d(0) + tau2.d(1)).val();
    let q_t = (tau1.d(0) + tau2.d(1)).d(2).val();
    let p0 = p.val();

    let delta = sol.exact_delta(params, x, t);
    let varpi = sol.exact_varpi(params, x, t);
    [
        delta - (phys.b0 * p0 - c.lam * q - phys.lambda_star * q_t),
        varpi - (phys.a0 * p0 + phys.b0 * q),
        p0 - (c.chi1 * delta + c.chi2 * varpi + phys.lambda_star * c.chi1 * q_t),
    ]
}

/// Seeded sample points in the open unit square and the time interval
/// (0, 1], suitable for residual sweeps that must avoid boundary and t = 0
/// degeneracies.
pub fn sample_points(seed: u64, count: usize) -> Vec<([f64; 2], f64)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = [rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99)];
            let t = rng.gen_range(0.01..=1.0);
            (x, t)
        })
        .collect()
}
