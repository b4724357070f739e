use crate::error::{Error, Result};
use crate::grid::{sym_gradient_norm2, GridSpec, ScalarField, VelocityField};
use crate::stokes::PhysParams;

/// Bounds defining the admissible set of the fixed-point map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Upper bound of the viscosity ratio.
    pub m: f64,
    /// Bound on `(int int |D v|^2)^(1/2)`; infinite when `a = 2`.
    pub b1: f64,
    /// Lower bound of the viscosity ratio.
    pub beta0: f64,
}

impl DerivedConstants {
    /// False when `a = 2`, where the strain-energy constraint disappears.
    pub fn strain_bound_active(&self) -> bool {
        self.b1.is_finite()
    }
}

/// Evaluates `M`, `b1` and `beta0` from the physical parameters, the
/// initial kinetic energy and the horizon. The `alpha` of the lower bound
/// is `alpha_reg`; `|k0|^2` is the squared L2 norm.
pub fn compute_constants(
    phys: &PhysParams,
    k0: &ScalarField,
    t_final: f64,
    grid: &GridSpec,
) -> Result<DerivedConstants> {
    phys.validate()?;
    k0.check(grid)?;
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::invalid("t_final", format!("must be positive, got {t_final}")));
    }
    if !(k0.min() >= 0.0) {
        return Err(Error::invalid("k0", "must be nonnegative"));
    }
    let area = grid.area();
    let k0_l1 = k0.integral(grid);
    let k0_l2_sq = k0.map(|x| x * x).integral(grid);
    let m = 2.0 * (phys.phi00 + (phys.a - 2.0) * t_final * k0_l1 / area);
    let b1 = if phys.a > 2.0 {
        (area / (2.0 * (phys.a - 2.0) * phys.c_nu * t_final)).sqrt()
    } else {
        f64::INFINITY
    };
    let ka2 = phys.kappa * phys.alpha_reg * phys.alpha_reg;
    let te = t_final * t_final.exp();
    let spread = 2.0 * phys.c0 * phys.phi00 / area * (te * k0_l2_sq + phys.c_nu * phys.c_nu * m * m * (1.0 + te));
    let beta0 = ka2 * phys.phi00 / (ka2 + spread);
    Ok(DerivedConstants { m, b1, beta0 })
}

/// Margins of the admissible-set constraints; a constraint holds when its
/// margin is nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct GMembership {
    pub phi_min: f64,
    pub phi_max: f64,
    /// `int int |D v|^2`.
    pub strain2: f64,
    /// `int int |D v|^4`.
    pub strain4: f64,
    /// `min phi - beta0`.
    pub lower_margin: f64,
    /// `M - max phi`.
    pub upper_margin: f64,
    /// `b1^2 - int int |D v|^2`; infinite when the bound is inactive.
    pub strain2_margin: f64,
    /// `1 - int int |D v|^4`.
    pub strain4_margin: f64,
}

impl GMembership {
    pub fn is_member(&self) -> bool {
        self.violations().is_empty()
    }

    /// Names of the violated constraints.
    pub fn violations(&self) -> Vec<&'static str> {
        [
            ("phi_lower", self.lower_margin),
            ("phi_upper", self.upper_margin),
            ("strain_l2", self.strain2_margin),
            ("strain_l4", self.strain4_margin),
        ]
        .into_iter()
        .filter(|(_, margin)| !(*margin >= 0.0))
        .map(|(name, _)| name)
        .collect()
    }
}

/// `(int int |D v|^2, int int |D v|^4)` with the midpoint rule in space and
/// the trapezoid rule in time.
pub fn strain_integrals(grid: &GridSpec, v: &[VelocityField]) -> Result<(f64, f64)> {
    if v.len() != grid.nt + 1 {
        return Err(Error::Shape(format!("velocity has {} nodes, expected {}", v.len(), grid.nt + 1)));
    }
    let tw = grid.trapezoid_weights();
    let mut s2 = 0.0;
    let mut s4 = 0.0;
    for (w, f) in tw.iter().zip(v) {
        let d = sym_gradient_norm2(grid, f);
        s2 += w * d.integral(grid);
        s4 += w * d.map(|x| x * x).integral(grid);
    }
    Ok((s2, s4))
}

/// Evaluates the admissible-set constraints for `(v, phi)`.
pub fn check_g_membership(
    grid: &GridSpec,
    v_tilde: &[VelocityField],
    phi_tilde: &[f64],
    consts: &DerivedConstants,
) -> Result<GMembership> {
    if phi_tilde.len() != grid.nt + 1 {
        return Err(Error::Shape(format!("phi has {} nodes, expected {}", phi_tilde.len(), grid.nt + 1)));
    }
    let (strain2, strain4) = strain_integrals(grid, v_tilde)?;
    let phi_min = phi_tilde.iter().copied().fold(f64::INFINITY, f64::min);
    let phi_max = phi_tilde.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(GMembership {
        phi_min,
        phi_max,
        strain2,
        strain4,
        lower_margin: phi_min - consts.beta0,
        upper_margin: consts.m - phi_max,
        strain2_margin: consts.b1 * consts.b1 - strain2,
        strain4_margin: 1.0 - strain4,
    })
}
