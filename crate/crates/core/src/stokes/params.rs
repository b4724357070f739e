use crate::error::{Error, Result};

/// Physical constants of the coupled model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    /// Molecular viscosity.
    pub nu: f64,
    /// Eddy-viscosity coefficient.
    pub c_nu: f64,
    /// Diffusivity of the kinetic energy.
    pub kappa: f64,
    /// Turbulent diffusion coefficient of the kinetic energy.
    pub c0: f64,
    /// Exponent in the viscosity-ratio ODE, `a >= 2`.
    pub a: f64,
    /// Initial viscosity ratio.
    pub phi00: f64,
    /// Regularization of the energy-gradient ratio in the viscosity-ratio ODE.
    pub alpha_reg: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self { nu: 1e-2, c_nu: 0.09, kappa: 1e-2, c0: 0.1, a: 3.0, phi00: 0.1, alpha_reg: 1e-3 }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("physics.nu", self.nu),
            ("physics.c_nu", self.c_nu),
            ("physics.kappa", self.kappa),
            ("physics.c0", self.c0),
            ("physics.phi00", self.phi00),
            ("physics.alpha_reg", self.alpha_reg),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.a.is_finite() && self.a >= 2.0) {
            return Err(Error::invalid("physics.a", format!("must be >= 2, got {}", self.a)));
        }
        Ok(())
    }

    /// `nu + c_nu * phi0`.
    pub fn viscosity(&self, phi0: f64) -> f64 {
        self.nu + self.c_nu * phi0
    }
}

/// Time discretization of the Stokes solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    ImplicitEuler,
    CrankNicolson,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit_euler" | "ie" => Ok(Scheme::ImplicitEuler),
            "crank_nicolson" | "cn" => Ok(Scheme::CrankNicolson),
            other => Err(Error::invalid(
                "stokes.scheme",
                format!("expected `implicit_euler` or `crank_nicolson`, got `{other}`"),
            )),
        }
    }
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ImplicitEuler => "implicit_euler",
            Scheme::CrankNicolson => "crank_nicolson",
        }
    }
}
