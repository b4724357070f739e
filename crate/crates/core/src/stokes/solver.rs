use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::basis::{modal_basis, ModalBasis};
use super::{PhysParams, Scheme, Trajectory, TrajectoryKind};
use crate::error::{Error, Result};
use crate::grid::{
    divergence, solve_neumann_poisson, vector_laplacian, GridSpec, RegionMask, ScalarField, VelocityField,
};

/// Relative divergence tolerance: `max |div v| <= DIV_REL_TOL * max|v| / h`.
pub const DIV_REL_TOL: f64 = 1e-10;

/// Time-dependent Stokes solver on a fixed grid.
///
/// Both directions are integrated exactly in the eigenbasis of the discrete
/// Stokes operator, so the adjoint is the exact transpose of the forward map.
/// Forcing in the step from node `n` to `n + 1` is sampled at node `n`
/// (implicit Euler) or averaged over both nodes (Crank-Nicolson); the
/// viscosity uses the mean of the two nodal values of `phi0`.
#[derive(Debug, Clone)]
pub struct StokesSolver {
    grid: GridSpec,
    phys: PhysParams,
    scheme: Scheme,
    basis: Arc<ModalBasis>,
}

fn check_series(name: &str, len: usize, expected: usize) -> Result<()> {
    if len != 0 && len != expected {
        return Err(Error::Shape(format!("{name} has {len} time nodes, expected {expected}")));
    }
    Ok(())
}

/// Rejects fields that are not divergence-free with zero boundary flux.
pub fn check_solenoidal(grid: &GridSpec, v: &VelocityField) -> Result<()> {
    v.check(grid)?;
    if !v.all_finite() {
        return Err(Error::NonFinite("velocity field".into()));
    }
    let scale = v.max_abs() / grid.dx().min(grid.dy());
    let div = divergence(grid, v).max_abs();
    let bn = v.boundary_normal_max();
    let tol = DIV_REL_TOL * scale.max(f64::MIN_POSITIVE);
    if div > tol || bn > tol * grid.dx().min(grid.dy()) {
        return Err(Error::NotSolenoidal { max_div: div.max(bn) });
    }
    Ok(())
}

impl StokesSolver {
    pub fn new(grid: GridSpec, phys: PhysParams, scheme: Scheme) -> Result<Self> {
        phys.validate()?;
        let basis = modal_basis(&grid)?;
        Ok(Self { grid, phys, scheme, basis })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn phys(&self) -> &PhysParams {
        &self.phys
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn basis(&self) -> &ModalBasis {
        &self.basis
    }

    /// Step viscosities `mu_n`, `n = 0..nt`, from nodal `phi0`.
    pub fn viscosities(&self, phi0: &[f64]) -> Result<Vec<f64>> {
        let nt = self.grid.nt;
        if phi0.len() != nt + 1 {
            return Err(Error::Shape(format!("phi0 has {} nodes, expected {}", phi0.len(), nt + 1)));
        }
        if let Some(bad) = phi0.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::invalid("phi0", format!("must be finite and nonnegative, found {bad}")));
        }
        Ok((0..nt).map(|n| self.phys.viscosity(0.5 * (phi0[n] + phi0[n + 1]))).collect())
    }

    fn coefficients(&self, mu: f64, lam: f64) -> (f64, f64) {
        let h = self.grid.dt() * mu * lam;
        match self.scheme {
            Scheme::ImplicitEuler => (1.0 / (1.0 + h), 1.0 / (1.0 + h)),
            Scheme::CrankNicolson => ((1.0 - 0.5 * h) / (1.0 + 0.5 * h), 1.0 / (1.0 + 0.5 * h)),
        }
    }

    /// Per-step modal coefficients `(c_n, d_n)` of the recursion
    /// `a_{n+1} = c_n a_n + dt d_n g`.
    pub(crate) fn step_coefficients(&self, mu: &[f64]) -> Vec<(DVector<f64>, DVector<f64>)> {
        let lam = &self.basis.eigenvalues;
        (0..self.grid.nt)
            .map(|n| {
                let (c, d): (Vec<f64>, Vec<f64>) = lam.iter().map(|&l| self.coefficients(mu[n], l)).unzip();
                (DVector::from_vec(c), DVector::from_vec(d))
            })
            .collect()
    }

    /// Modal forward integration. `g` holds projected forcing, one column per
    /// time node; the result holds the state coefficients per node.
    pub fn forward_modal(&self, mu: &[f64], a0: &DVector<f64>, g: Option<&DMatrix<f64>>) -> DMatrix<f64> {
        let nt = self.grid.nt;
        let dt = self.grid.dt();
        let lam = &self.basis.eigenvalues;
        let nm = lam.len();
        let mut a = DMatrix::zeros(nm, nt + 1);
        a.set_column(0, a0);
        for n in 0..nt {
            for k in 0..nm {
                let (c, d) = self.coefficients(mu[n], lam[k]);
                let force = match (g, self.scheme) {
                    (None, _) => 0.0,
                    (Some(g), Scheme::ImplicitEuler) => g[(k, n)],
                    (Some(g), Scheme::CrankNicolson) => 0.5 * (g[(k, n)] + g[(k, n + 1)]),
                };
                a[(k, n + 1)] = c * a[(k, n)] + d * dt * force;
            }
        }
        a
    }

    /// Modal adjoint integration for the terminal value `phi_t` and the
    /// source `f` (column `n` pairs with the state at node `n`; column 0 is
    /// ignored).
    ///
    /// Returns `(psi, sensitivity, initial)` such that for every forward
    /// solution with data `(a0, g)`:
    /// `<a_T, phi_t> + sum_{n>=1} dt <a_n, f_n> = <a0, initial> + sum_m dt <g_m, sensitivity_m>`.
    pub fn adjoint_modal(
        &self,
        mu: &[f64],
        phi_t: &DVector<f64>,
        f: Option<&DMatrix<f64>>,
    ) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let nt = self.grid.nt;
        let dt = self.grid.dt();
        let lam = &self.basis.eigenvalues;
        let nm = lam.len();
        let mut psi = DMatrix::zeros(nm, nt + 1);
        psi.set_column(nt, phi_t);
        let mut initial = DVector::zeros(nm);
        for k in 0..nm {
            let src = |n: usize| f.map_or(0.0, |f| f[(k, n)]);
            // costate at node n + 1
            let mut costate = phi_t[k] + dt * src(nt);
            for n in (0..nt).rev() {
                let (c, d) = self.coefficients(mu[n], lam[k]);
                psi[(k, n)] = d * costate;
                if n == 0 {
                    initial[k] = c * costate;
                } else {
                    costate = dt * src(n) + c * costate;
                }
            }
        }
        let mut sens = DMatrix::zeros(nm, nt + 1);
        match self.scheme {
            Scheme::ImplicitEuler => {
                for n in 0..nt {
                    sens.set_column(n, &psi.column(n));
                }
            }
            Scheme::CrankNicolson => {
                for n in 0..=nt {
                    let left = if n < nt { psi.column(n).into_owned() } else { DVector::zeros(nm) };
                    let right = if n > 0 { psi.column(n - 1).into_owned() } else { DVector::zeros(nm) };
                    sens.set_column(n, &((left + right) * 0.5));
                }
            }
        }
        (psi, sens, initial)
    }

    fn faces(&self, fields: &[VelocityField], mask: Option<&RegionMask>) -> Result<DMatrix<f64>> {
        let nf = self.grid.n_interior_faces();
        let mut m = DMatrix::zeros(nf, self.grid.nt + 1);
        if fields.is_empty() {
            return Ok(m);
        }
        let keep = mask.map(|m| m.interior_faces());
        for (n, f) in fields.iter().enumerate() {
            f.check(&self.grid)?;
            let vals = f.interior();
            match &keep {
                None => m.set_column(n, &DVector::from_vec(vals)),
                Some(idx) => {
                    for &r in idx {
                        m[(r, n)] = vals[r];
                    }
                }
            }
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("forcing".into()));
        }
        Ok(m)
    }

    fn fields_from(&self, faces: &DMatrix<f64>) -> Result<Vec<VelocityField>> {
        (0..faces.ncols())
            .map(|n| VelocityField::from_interior(&self.grid, faces.column(n).as_slice()))
            .collect()
    }

    fn check_steps(&self, v: &[VelocityField]) -> Result<()> {
        for (n, f) in v.iter().enumerate() {
            if !f.all_finite() {
                return Err(Error::StepFailure { step: n, message: "non-finite velocity".into() });
            }
            let scale = f.max_abs() / self.grid.dx().min(self.grid.dy());
            let div = divergence(&self.grid, f).max_abs();
            if div > DIV_REL_TOL * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::StepFailure { step: n, message: format!("divergence {div:e} after projection") });
            }
        }
        Ok(())
    }

    /// Pressure whose gradient balances `rhs = force + mu Lap v` up to a
    /// divergence-free remainder.
    fn pressure(&self, force: &VelocityField, mu: f64, v: &VelocityField) -> Result<ScalarField> {
        let mut rhs = force.clone();
        rhs.clear_boundary();
        rhs.axpy(mu, &vector_laplacian(&self.grid, v));
        solve_neumann_poisson(&self.grid, &divergence(&self.grid, &rhs))
    }

    fn average(a: &VelocityField, b: &VelocityField) -> VelocityField {
        let mut m = a.scaled(0.5);
        m.axpy(0.5, b);
        m
    }

    /// Integrates `v_t - mu(t) Lap v + grad q = u 1_omega + f` with no-slip
    /// walls from the solenoidal `v0`. Empty `forcing` or `control` mean
    /// zero; otherwise they need one field per time node.
    pub fn solve_forward(
        &self,
        phi0: &[f64],
        forcing: &[VelocityField],
        control: &[VelocityField],
        v0: &VelocityField,
        mask: &RegionMask,
    ) -> Result<Trajectory> {
        let nt = self.grid.nt;
        check_series("forcing", forcing.len(), nt + 1)?;
        check_series("control", control.len(), nt + 1)?;
        if !mask.matches(&self.grid) {
            return Err(Error::Shape("control mask does not match the grid".into()));
        }
        check_solenoidal(&self.grid, v0)?;
        let mu = self.viscosities(phi0)?;

        let mut g = self.faces(forcing, None)?;
        g += self.faces(control, Some(mask))?;
        let a0 = self.basis.modes.tr_mul(&DVector::from_vec(v0.interior()));
        let a = self.forward_modal(&mu, &a0, Some(&self.basis.project(&g)));
        let velocity = self.fields_from(&self.basis.expand(&a))?;
        self.check_steps(&velocity)?;

        let force = self.fields_from(&g)?;
        let mut pressure = Vec::with_capacity(nt + 1);
        pressure.push(self.pressure(&force[0], self.phys.viscosity(phi0[0]), &velocity[0])?);
        for n in 0..nt {
            let q = match self.scheme {
                Scheme::ImplicitEuler => self.pressure(&force[n], mu[n], &velocity[n + 1]),
                Scheme::CrankNicolson => self.pressure(
                    &Self::average(&force[n], &force[n + 1]),
                    mu[n],
                    &Self::average(&velocity[n], &velocity[n + 1]),
                ),
            }
            .map_err(|e| Error::StepFailure { step: n + 1, message: e.to_string() })?;
            pressure.push(q);
        }
        Ok(Trajectory { kind: TrajectoryKind::Forward, scheme: self.scheme, times: self.grid.times(), velocity, pressure })
    }

    /// Integrates the backward system `-phi_t - mu(t) Lap phi + grad pi = F`,
    /// `phi(T) = phi_t`, as the exact discrete adjoint of
    /// [`StokesSolver::solve_forward`]. `forcing[0]` is not used.
    pub fn solve_adjoint(&self, phi0: &[f64], forcing: &[VelocityField], phi_t: &VelocityField) -> Result<Trajectory> {
        let nt = self.grid.nt;
        check_series("adjoint forcing", forcing.len(), nt + 1)?;
        check_solenoidal(&self.grid, phi_t)?;
        let mu = self.viscosities(phi0)?;
        let f = self.faces(forcing, None)?;
        let pt = self.basis.modes.tr_mul(&DVector::from_vec(phi_t.interior()));
        let (psi, _, _) = self.adjoint_modal(&mu, &pt, Some(&self.basis.project(&f)));
        let velocity = self.fields_from(&self.basis.expand(&psi))?;
        self.check_steps(&velocity)?;

        let force = self.fields_from(&f)?;
        let mut pressure = Vec::with_capacity(nt + 1);
        for n in 0..nt {
            let src = match self.scheme {
                Scheme::ImplicitEuler => force[n + 1].clone(),
                Scheme::CrankNicolson => Self::average(&force[n], &force[n + 1]),
            };
            let q = self
                .pressure(&src, mu[n], &velocity[n])
                .map_err(|e| Error::StepFailure { step: n, message: e.to_string() })?;
            pressure.push(q);
        }
        pressure.push(self.pressure(&force[nt], self.phys.viscosity(phi0[nt]), &velocity[nt])?);
        Ok(Trajectory { kind: TrajectoryKind::Adjoint, scheme: self.scheme, times: self.grid.times(), velocity, pressure })
    }

    /// Gradient of the adjoint pairing with respect to the forward forcing at
    /// each node: `sum_m dt <g_m, s_m>` reproduces the pairing.
    pub fn forcing_sensitivity(&self, adjoint: &Trajectory) -> Vec<VelocityField> {
        let nt = self.grid.nt;
        let psi = &adjoint.velocity;
        (0..=nt)
            .map(|m| match self.scheme {
                Scheme::ImplicitEuler => {
                    if m < nt {
                        psi[m].clone()
                    } else {
                        VelocityField::zeros(&self.grid)
                    }
                }
                Scheme::CrankNicolson => {
                    let mut s = VelocityField::zeros(&self.grid);
                    if m < nt {
                        s.axpy(0.5, &psi[m]);
                    }
                    if m > 0 {
                        s.axpy(0.5, &psi[m - 1]);
                    }
                    s
                }
            })
            .collect()
    }

    /// Gradient of the adjoint pairing with respect to the initial state.
    pub fn initial_sensitivity(&self, phi0: &[f64], adjoint: &Trajectory) -> Result<VelocityField> {
        match self.scheme {
            Scheme::ImplicitEuler => Ok(adjoint.velocity[0].clone()),
            Scheme::CrankNicolson => {
                let mu = self.viscosities(phi0)?;
                let lam = &self.basis.eigenvalues;
                let mut p = self.basis.modes.tr_mul(&DVector::from_vec(adjoint.velocity[0].interior()));
                for k in 0..lam.len() {
                    let (c, d) = self.coefficients(mu[0], lam[k]);
                    p[k] *= c / d;
                }
                VelocityField::from_interior(&self.grid, (&self.basis.modes * p).as_slice())
            }
        }
    }
}
