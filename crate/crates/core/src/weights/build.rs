use super::eta0::{find_lambda00, select_m0, weight_numerator};
use super::profile::{ell_profile, tau_profile, ProfileValue};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, SpaceTimeField};

/// Admissible range of the exponent cap.
pub const EXP_CAP_RANGE: (f64, f64) = (1.0, 150.0);
pub const DEFAULT_EXP_CAP: f64 = 6.0;

/// Resolved weight parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightParams {
    pub lambda: f64,
    pub s: f64,
    pub m0: f64,
    pub exp_cap: f64,
}

/// Weight parameters where `None` means "derive from the grid".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightConfig {
    pub lambda: Option<f64>,
    pub s: Option<f64>,
    pub m0: Option<f64>,
    pub exp_cap: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self { lambda: None, s: None, m0: None, exp_cap: DEFAULT_EXP_CAP }
    }
}

impl WeightConfig {
    /// `lambda` defaults to the smallest admissible value, `m0` to the
    /// doubling scan of [`select_m0`], and `s` to the value making the
    /// smallest exponent on `[0, T/2]` equal to one.
    pub fn resolve(&self, grid: &GridSpec, eta0: &ScalarField) -> Result<WeightParams> {
        // The admissibility ratio does not depend on m0.
        let lambda = match self.lambda {
            Some(l) => l,
            None => find_lambda00(eta0, 1.0),
        };
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid("weights.lambda", format!("must be positive, got {lambda}")));
        }
        let m0 = match self.m0 {
            Some(m) => m,
            None => select_m0(grid, eta0, lambda)?,
        };
        if !(m0.is_finite() && m0 > 0.0) {
            return Err(Error::invalid("weights.m0", format!("must be positive, got {m0}")));
        }
        let s = match self.s {
            Some(s) => s,
            None => {
                let n_min = weight_numerator(eta0, lambda, m0).into_iter().fold(f64::INFINITY, f64::min);
                (0.5 * grid.t_final).powi(8) / n_min
            }
        };
        let p = WeightParams { lambda, s, m0, exp_cap: self.exp_cap };
        p.validate()?;
        Ok(p)
    }
}

impl WeightParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.s.is_finite() && self.s > 0.0) {
            return Err(Error::invalid("weights.s", format!("must be positive, got {}", self.s)));
        }
        if !(self.m0.is_finite() && self.m0 > 0.0) {
            return Err(Error::invalid("weights.m0", format!("must be positive, got {}", self.m0)));
        }
        let (lo, hi) = EXP_CAP_RANGE;
        if !(self.exp_cap >= lo && self.exp_cap <= hi) {
            return Err(Error::invalid(
                "weights.exp_cap",
                format!("must lie in [{lo}, {hi}], got {}", self.exp_cap),
            ));
        }
        Ok(())
    }
}

/// Carleman weight families at cell centers and time nodes.
///
/// Exponents `s * alpha` above `exp_cap` are handled by flooring the time
/// profile pointwise, so a capped entry is the weight family evaluated at the
/// profile value where its exponent equals the cap. Time derivatives vanish
/// there. `*_capped` flags mark those entries.
#[derive(Debug, Clone)]
pub struct CarlemanWeightSet {
    pub grid: GridSpec,
    pub params: WeightParams,
    pub eta0: ScalarField,
    /// Numerator of `alpha` per cell.
    pub numerator: Vec<f64>,
    pub tau: Vec<ProfileValue>,
    pub ell: Vec<ProfileValue>,

    pub alpha: SpaceTimeField,
    pub xi: SpaceTimeField,
    pub rho: SpaceTimeField,
    pub alpha_t: SpaceTimeField,
    pub xi_t: SpaceTimeField,
    pub rho_bar: Vec<f64>,
    pub xi_bar: Vec<f64>,
    pub capped: Vec<bool>,

    pub tilde_alpha: SpaceTimeField,
    pub tilde_xi: SpaceTimeField,
    pub tilde_rho: SpaceTimeField,
    pub rho_star: Vec<f64>,
    pub xi_star: Vec<f64>,
    pub tilde_capped: Vec<bool>,

    pub eta_tilde: SpaceTimeField,

    pub rho_hat: Vec<f64>,
    pub zeta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub zeta_t: Vec<f64>,
    pub gamma_t: Vec<f64>,
    pub hat_capped: Vec<bool>,
}

struct Family {
    alpha: SpaceTimeField,
    xi: SpaceTimeField,
    rho: SpaceTimeField,
    alpha_t: SpaceTimeField,
    xi_t: SpaceTimeField,
    rho_max: Vec<f64>,
    xi_max: Vec<f64>,
    capped: Vec<bool>,
}

fn family(profiles: &[ProfileValue], numerator: &[f64], spatial: &[f64], p: &WeightParams) -> Family {
    let nc = numerator.len();
    let nn = profiles.len();
    let (s, cap) = (p.s, p.exp_cap);
    let mut capped = vec![false; nc * nn];
    let mut alpha = Vec::with_capacity(nc * nn);
    let mut xi = Vec::with_capacity(nc * nn);
    let mut rho = Vec::with_capacity(nc * nn);
    let mut alpha_t = Vec::with_capacity(nc * nn);
    let mut xi_t = Vec::with_capacity(nc * nn);
    let mut rho_max = Vec::with_capacity(nn);
    let mut xi_max = Vec::with_capacity(nn);
    let n_max = numerator.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (n, pr) in profiles.iter().enumerate() {
        let t8 = pr.value.powi(8);
        let mut xm = f64::NEG_INFINITY;
        for c in 0..nc {
            let num = numerator[c];
            let e = spatial[c];
            let expo = if t8 > 0.0 { s * num / t8 } else { f64::INFINITY };
            if expo > cap {
                capped[n * nc + c] = true;
                let floor8 = s * num / cap;
                alpha.push(cap / s);
                xi.push(e / floor8);
                rho.push(cap.exp());
                alpha_t.push(0.0);
                xi_t.push(0.0);
            } else {
                let t9 = t8 * pr.value;
                alpha.push(num / t8);
                xi.push(e / t8);
                rho.push(expo.exp());
                alpha_t.push(-8.0 * num * pr.d1 / t9);
                xi_t.push(-8.0 * e * pr.d1 / t9);
            }
            xm = xm.max(xi[n * nc + c]);
        }
        let top = if t8 > 0.0 { s * n_max / t8 } else { f64::INFINITY };
        rho_max.push(top.min(cap).exp());
        xi_max.push(xm);
    }
    let st = |v: Vec<f64>| SpaceTimeField::from_vec(nc, nn, v);
    Family {
        alpha: st(alpha),
        xi: st(xi),
        rho: st(rho),
        alpha_t: st(alpha_t),
        xi_t: st(xi_t),
        rho_max,
        xi_max,
        capped,
    }
}

/// Builds every weight family on the grid's cells and time nodes.
pub fn build_weights(params: &WeightParams, eta0: &ScalarField, grid: &GridSpec) -> Result<CarlemanWeightSet> {
    params.validate()?;
    eta0.check(grid)?;
    let lambda00 = find_lambda00(eta0, params.m0);
    if params.lambda < lambda00 {
        return Err(Error::invalid(
            "weights.lambda",
            format!("{} is below the admissible minimum {lambda00:e}", params.lambda),
        ));
    }
    let (lambda, m0, s, cap) = (params.lambda, params.m0, params.s, params.exp_cap);
    let numerator = weight_numerator(eta0, lambda, m0);
    let spatial: Vec<f64> = eta0.as_slice().iter().map(|&e| (lambda * (e + m0)).exp()).collect();
    let times = grid.times();
    let tau = times.iter().map(|&t| tau_profile(t, grid.t_final)).collect::<Result<Vec<_>>>()?;
    let ell = times.iter().map(|&t| ell_profile(t, grid.t_final)).collect::<Result<Vec<_>>>()?;

    let plain = family(&tau, &numerator, &spatial, params);
    let tilde = family(&ell, &numerator, &spatial, params);

    let nc = grid.n_cells();
    let eta_tilde = SpaceTimeField::from_fn(nc, times.len(), |n, c| tilde.rho.get(n, c) / tilde.xi.get(n, c));

    let n_min = numerator.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = (s * n_min / cap).powf(0.125);
    let mut rho_hat = Vec::new();
    let mut zeta = Vec::new();
    let mut gamma = Vec::new();
    let mut zeta_t = Vec::new();
    let mut gamma_t = Vec::new();
    let mut hat_capped = Vec::new();
    for pr in &ell {
        let l = pr.value;
        let expo = if l > 0.0 { s * n_min / l.powi(8) } else { f64::INFINITY };
        if expo > cap {
            let r = cap.exp();
            rho_hat.push(r);
            zeta.push(r * floor.powi(12));
            gamma.push(r * floor.powf(16.5));
            zeta_t.push(0.0);
            gamma_t.push(0.0);
            hat_capped.push(true);
        } else {
            let r = expo.exp();
            // d/dt exp(s n_min l^-8) = r * s n_min (-8) l' / l^9
            let r_t = r * expo * (-8.0) * pr.d1 / l;
            rho_hat.push(r);
            zeta.push(r * l.powi(12));
            gamma.push(r * l.powf(16.5));
            zeta_t.push(r_t * l.powi(12) + 12.0 * r * l.powi(11) * pr.d1);
            gamma_t.push(r_t * l.powf(16.5) + 16.5 * r * l.powf(15.5) * pr.d1);
            hat_capped.push(false);
        }
    }

    let ws = CarlemanWeightSet {
        grid: *grid,
        params: *params,
        eta0: eta0.clone(),
        numerator,
        tau,
        ell,
        alpha: plain.alpha,
        xi: plain.xi,
        rho: plain.rho,
        alpha_t: plain.alpha_t,
        xi_t: plain.xi_t,
        rho_bar: plain.rho_max,
        xi_bar: plain.xi_max,
        capped: plain.capped,
        tilde_alpha: tilde.alpha,
        tilde_xi: tilde.xi,
        tilde_rho: tilde.rho,
        rho_star: tilde.rho_max,
        xi_star: tilde.xi_max,
        tilde_capped: tilde.capped,
        eta_tilde,
        rho_hat,
        zeta,
        gamma,
        zeta_t,
        gamma_t,
        hat_capped,
    };
    ws.check_finite()?;
    Ok(ws)
}

impl CarlemanWeightSet {
    fn check_finite(&self) -> Result<()> {
        let fields = [
            ("alpha", &self.alpha),
            ("xi", &self.xi),
            ("rho", &self.rho),
            ("alpha_t", &self.alpha_t),
            ("xi_t", &self.xi_t),
            ("tilde alpha", &self.tilde_alpha),
            ("tilde xi", &self.tilde_xi),
            ("tilde rho", &self.tilde_rho),
            ("eta tilde", &self.eta_tilde),
        ];
        for (name, f) in fields {
            if !f.all_finite() {
                return Err(Error::NonFinite(format!("weight family {name}")));
            }
        }
        let series = [
            ("rho bar", &self.rho_bar),
            ("xi bar", &self.xi_bar),
            ("rho star", &self.rho_star),
            ("xi star", &self.xi_star),
            ("rho hat", &self.rho_hat),
            ("zeta", &self.zeta),
            ("gamma", &self.gamma),
            ("zeta_t", &self.zeta_t),
            ("gamma_t", &self.gamma_t),
        ];
        for (name, v) in series {
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite(format!("weight family {name}")));
            }
        }
        Ok(())
    }

    pub fn n_times(&self) -> usize {
        self.grid.nt + 1
    }

    /// Fraction of space-time nodes where the tilde family is capped.
    pub fn tilde_capped_fraction(&self) -> f64 {
        self.tilde_capped.iter().filter(|&&c| c).count() as f64 / self.tilde_capped.len() as f64
    }

    /// Smallest of `rho tilde`, `rho star`, `eta tilde`, `zeta`, `gamma` over
    /// time nodes with `t <= t_max`.
    pub fn min_positive_until(&self, t_max: f64) -> f64 {
        let nc = self.grid.n_cells();
        let mut m = f64::INFINITY;
        for n in 0..self.n_times() {
            if self.grid.time(n) > t_max + 1e-12 {
                break;
            }
            for c in 0..nc {
                m = m.min(self.tilde_rho.get(n, c)).min(self.eta_tilde.get(n, c));
            }
            m = m.min(self.rho_star[n]).min(self.zeta[n]).min(self.gamma[n]);
        }
        m
    }
}
