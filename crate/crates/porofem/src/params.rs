//! Physical parameters of the consolidation model and derived constants.
//!
//! The solver works with a reformulated three-field system in the
//! displacement `tau`, an auxiliary stress-like variable
//! `delta = b0*p - lam*q - lambda_star*q_t`, and a storage variable
//! `varpi = a0*p + b0*q`, where `q = div tau`. The change of variables is
//! invertible whenever `b0^2 + lam*a0 > 0`; the coefficients of the inverse
//! map are `chi1`, `chi2`, `chi3` below.

use crate::error::{Error, Result};

/// Symmetric 2x2 tensor, used for the permeability field `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Tensor2 {
    /// Isotropic tensor `k * I`.
    pub fn isotropic(k: f64) -> Self {
        Tensor2 { xx: k, xy: 0.0, yy: k }
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    /// Eigenvalue bounds `(min, max)` of the symmetric tensor.
    pub fn eigen_bounds(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let radius = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (mean - radius, mean + radius)
    }
}

/// Raw model parameters as they appear in a run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Secondary consolidation coefficient `lambda_star >= 0`, the weight of
    /// the `grad (div tau)_t` term in the momentum balance.
    pub lambda_star: f64,
    /// Young's modulus `E > 0`.
    pub e_modulus: f64,
    /// Poisson ratio `0 <= nu < 0.5`.
    pub nu: f64,
    /// Biot-Willis coupling constant `b0`.
    pub b0: f64,
    /// Constrained specific storage coefficient `a0 > 0`.
    pub a0: f64,
    /// Symmetric positive definite permeability tensor `K`.
    pub permeability: Tensor2,
    /// Fluid viscosity `theta_f > 0`.
    pub theta_f: f64,
    /// Gravity body-force vector `rho_f * g` acting on the fluid.
    pub rho_f_g: [f64; 2],
}

impl Default for PhysicalParams {
    /// Baseline parameter set used by the manufactured convergence cases.
    fn default() -> Self {
        PhysicalParams {
            lambda_star: 1e-5,
            e_modulus: 25.0,
            nu: 0.25,
            b0: 1e-5,
            a0: 0.2,
            permeability: Tensor2::isotropic(1e-3),
            theta_f: 1.0,
            rho_f_g: [0.0, 0.0],
        }
    }
}

/// Constants computed from a validated parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// First Lame constant `lam = E*nu / ((1+nu)(1-2nu))`; the model uses it
    /// both as the dilatation modulus `beta` in the stress law and in the
    /// variable change.
    pub lam: f64,
    /// Shear-type constant `gamma = E / (2(1+nu))` multiplying the symmetric
    /// gradient in the stress law.
    pub gamma: f64,
    /// `chi1 = b0 / (b0^2 + lam*a0)`.
    pub chi1: f64,
    /// `chi2 = lam / (b0^2 + lam*a0)`.
    pub chi2: f64,
    /// `chi3 = a0 / (b0^2 + lam*a0)`.
    pub chi3: f64,
}

/// Parameter set that passed [`validate`], together with derived constants
/// and the eigenvalue bounds of the permeability tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedParams {
    pub phys: PhysicalParams,
    pub consts: DerivedConstants,
    /// `(K1, K2)`: smallest and largest eigenvalue of the permeability.
    pub k_bounds: (f64, f64),
}

/// Computes the Lame constants `(lam, gamma)` from Young's modulus and the
/// Poisson ratio.
pub fn derive_lame(e_modulus: f64, nu: f64) -> Result<(f64, f64)> {
    if !(e_modulus > 0.0) || !e_modulus.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Young's modulus must be positive and finite, got {e_modulus}"
        )));
    }
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::InvalidParameter(format!(
            "Poisson ratio must satisfy 0 <= nu < 0.5, got {nu}"
        )));
    }
    let lam = e_modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let gamma = e_modulus / (2.0 * (1.0 + nu));
    Ok((lam, gamma))
}

/// Computes the inverse-map coefficients `(chi1, chi2, chi3)` of the variable
/// change, requiring `b0^2 + lam*a0 > 0`.
pub fn derive_chi(b0: f64, a0: f64, lam: f64) -> Result<(f64, f64, f64)> {
    let denom = b0 * b0 + lam * a0;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "variable change requires b0^2 + lam*a0 > 0, got {denom}"
        )));
    }
    Ok((b0 / denom, lam / denom, a0 / denom))
}

/// Validates a raw parameter set and attaches the derived constants.
pub fn validate(phys: PhysicalParams) -> Result<CheckedParams> {
    for (name, value) in [
        ("lambda_star", phys.lambda_star),
        ("e_modulus", phys.e_modulus),
        ("nu", phys.nu),
        ("b0", phys.b0),
        ("a0", phys.a0),
        ("theta_f", phys.theta_f),
        ("k_xx", phys.permeability.xx),
        ("k_xy", phys.permeability.xy),
        ("k_yy", phys.permeability.yy),
        ("rho_f_g_x", phys.rho_f_g[0]),
        ("rho_f_g_y", phys.rho_f_g[1]),
    ] {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} must be finite, got {value}")));
        }
    }
    if phys.lambda_star < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda_star must be nonnegative, got {}",
            phys.lambda_star
        )));
    }
    if !(phys.a0 > 0.0) {
        return Err(Error::InvalidParameter(format!("a0 must be positive, got {}", phys.a0)));
    }
    if !(phys.theta_f > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "theta_f must be positive, got {}",
            phys.theta_f
        )));
    }
    let (k1, k2) = phys.permeability.eigen_bounds();
    if !(k1 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "permeability tensor must be positive definite; smallest eigenvalue is {k1:e}"
        )));
    }
    let (lam, gamma) = derive_lame(phys.e_modulus, phys.nu)?;
    let (chi1, chi2, chi3) = derive_chi(phys.b0, phys.a0, lam)?;
    Ok(CheckedParams {
        phys,
        consts: DerivedConstants { lam, gamma, chi1, chi2, chi3 },
        k_bounds: (k1, k2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn lame_constants_match_reference_values() {
        let (lam, gamma) = derive_lame(25.0, 0.25).unwrap();
        assert_relative_eq!(lam, 10.0, max_relative = 1e-14);
        assert_relative_eq!(gamma, 10.0, max_relative = 1e-14);

        let (lam, gamma) = derive_lame(3e4, 0.2).unwrap();
        assert_relative_eq!(lam, 8.333333333333334e3, max_relative = 1e-12);
        assert_relative_eq!(gamma, 1.25e4, max_relative = 1e-14);

        let (lam, gamma) = derive_lame(1.0, 0.0).unwrap();
        assert_abs_diff_eq!(lam, 0.0);
        assert_relative_eq!(gamma, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn lame_rejects_incompressible_limit() {
        assert!(derive_lame(25.0, 0.5).is_err());
        assert!(derive_lame(25.0, 0.7).is_err());
        assert!(derive_lame(-1.0, 0.25).is_err());
        assert!(derive_lame(0.0, 0.25).is_err());
    }

    #[test]
    fn chi_coefficients_match_reference_values() {
        let (c1, c2, c3) = derive_chi(1e-5, 0.2, 10.0).unwrap();
        assert_relative_eq!(c1, 5e-6, max_relative = 1e-9);
        assert_relative_eq!(c2, 5.0, max_relative = 1e-9);
        assert_relative_eq!(c3, 0.1, max_relative = 1e-9);

        let (c1, c2, c3) = derive_chi(1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(c1, 1.0, max_relative = 1e-15);
        assert_abs_diff_eq!(c2, 0.0);
        assert_relative_eq!(c3, 1.0, max_relative = 1e-15);

        let (c1, c2, c3) = derive_chi(1.0, 2e-8, 8.333e3).unwrap();
        assert_relative_eq!(c1, 0.99983, max_relative = 1e-5);
        assert_relative_eq!(c2, 8.3316e3, max_relative = 1e-4);
        assert_relative_eq!(c3, 1.99966e-8, max_relative = 1e-5);
    }

    #[test]
    fn chi_rejects_degenerate_change_of_variables() {
        assert!(derive_chi(0.0, 0.2, 0.0).is_err());
        assert!(derive_chi(0.0, 0.0, 10.0).is_err());
    }

    #[test]
    fn bulk_modulus_identity_holds() {
        for (e, nu) in [(25.0, 0.25), (3e4, 0.2), (20909.091, 1.0 / 22.0), (7.5, 0.49)] {
            let (lam, gamma) = derive_lame(e, nu).unwrap();
            let bulk = lam + 2.0 * gamma / 3.0;
            assert_relative_eq!(bulk, e / (3.0 * (1.0 - 2.0 * nu)), max_relative = 1e-13);
        }
    }

    #[test]
    fn validate_accepts_baseline_parameters() {
        let checked = validate(PhysicalParams::default()).unwrap();
        assert_relative_eq!(checked.consts.lam, 10.0, max_relative = 1e-14);
        assert_relative_eq!(checked.consts.gamma, 10.0, max_relative = 1e-14);
        assert_relative_eq!(checked.consts.chi2, 5.0, max_relative = 1e-9);
        assert_relative_eq!(checked.k_bounds.0, 1e-3, max_relative = 1e-14);
        assert_relative_eq!(checked.k_bounds.1, 1e-3, max_relative = 1e-14);
    }

    #[test]
    fn validate_rejects_indefinite_permeability() {
        let phys = PhysicalParams {
            permeability: Tensor2 { xx: 1.0, xy: 2.0, yy: 1.0 },
            ..PhysicalParams::default()
        };
        let err = validate(phys).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)), "got {err:?}");
    }

    #[test]
    fn validate_rejects_bad_scalars() {
        let cases: Vec<PhysicalParams> = vec![
            PhysicalParams { lambda_star: -1e-3, ..PhysicalParams::default() },
            PhysicalParams { theta_f: 0.0, ..PhysicalParams::default() },
            PhysicalParams { a0: -0.1, ..PhysicalParams::default() },
            PhysicalParams { a0: 0.0, ..PhysicalParams::default() },
            PhysicalParams { nu: 0.5, ..PhysicalParams::default() },
            PhysicalParams { e_modulus: f64::NAN, ..PhysicalParams::default() },
        ];
        for phys in cases {
            assert!(validate(phys).is_err());
        }
    }

    #[test]
    fn tensor_eigen_bounds_are_exact_for_2x2() {
        let t = Tensor2 { xx: 2.0, xy: 1.0, yy: 2.0 };
        let (lo, hi) = t.eigen_bounds();
        assert_relative_eq!(lo, 1.0, max_relative = 1e-14);
        assert_relative_eq!(hi, 3.0, max_relative = 1e-14);
    }

    proptest! {
        /// The inverse-map coefficients satisfy the algebraic identities
        /// `a0*chi2 + b0*chi1 = 1`, `b0*chi2 = lam*chi1`, `a0*chi1 = b0*chi3`
        /// used throughout the scheme.
        #[test]
        fn chi_identities(b0 in 1e-8f64..1e2, a0 in 1e-10f64..1e2, lam in 0.0f64..1e5) {
            let (c1, c2, c3) = derive_chi(b0, a0, lam).unwrap();
            let scale = (c1.abs() + c2.abs() + c3.abs()).max(1.0);
            prop_assert!((a0 * c2 + b0 * c1 - 1.0).abs() < 1e-12 * scale.max(1.0));
            prop_assert!((b0 * c2 - lam * c1).abs() < 1e-12 * (b0 * c2).abs().max(1.0));
            prop_assert!((a0 * c1 - b0 * c3).abs() < 1e-12 * (a0 * c1).abs().max(1.0));
        }

        /// Lame constants are nonnegative across the admissible range.
        #[test]
        fn lame_nonnegative(e in 1e-6f64..1e9, nu in 0.0f64..0.499) {
            let (lam, gamma) = derive_lame(e, nu).unwrap();
            prop_assert!(lam >= 0.0);
            prop_assert!(gamma > 0.0);
        }
    }
}
