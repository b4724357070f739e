//! Time profiles `tau` and `ell`.

use crate::error::{Error, Result};

/// Value, first and second derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileValue {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Quintic with `p(0) = 0, p(1) = 1, p'(0) = 1, p'(1) = 0, p''(0) = p''(1) = 0`.
fn blend(s: f64) -> (f64, f64, f64) {
    let s2 = s * s;
    let p = s + 4.0 * s2 * s - 7.0 * s2 * s2 + 3.0 * s2 * s2 * s;
    let dp = 1.0 + 12.0 * s2 - 28.0 * s2 * s + 15.0 * s2 * s2;
    let ddp = 24.0 * s - 84.0 * s2 + 60.0 * s2 * s;
    (p, dp, ddp)
}

fn check_time(t: f64, t_final: f64) -> Result<()> {
    // allow rounding from accumulated time stepping
    let slack = 1e-12 * t_final;
    if t.is_nan() || t < -slack || t > t_final + slack {
        return Err(Error::TimeOutOfRange { t, t_final });
    }
    Ok(())
}

/// `tau` with derivatives: `t` on `[0, T/4]`, `T - t` on `[3T/4, T]`, a C2
/// quintic rise to the peak `T/2` at `t = T/2` in between (mirrored on the
/// right half).
pub fn tau_profile(t: f64, t_final: f64) -> Result<ProfileValue> {
    check_time(t, t_final)?;
    let t = t.clamp(0.0, t_final);
    let q = 0.25 * t_final;
    let v = if t <= q {
        ProfileValue { value: t, d1: 1.0, d2: 0.0 }
    } else if t <= 2.0 * q {
        let (p, dp, ddp) = blend((t - q) / q);
        ProfileValue { value: q + q * p, d1: dp, d2: ddp / q }
    } else if t < 3.0 * q {
        let (p, dp, ddp) = blend((3.0 * q - t) / q);
        ProfileValue { value: q + q * p, d1: -dp, d2: ddp / q }
    } else {
        ProfileValue { value: t_final - t, d1: -1.0, d2: 0.0 }
    };
    Ok(v)
}

/// `ell`: `T/2` on `[0, T/2]`, equal to `tau` afterwards.
pub fn ell_profile(t: f64, t_final: f64) -> Result<ProfileValue> {
    check_time(t, t_final)?;
    if t <= 0.5 * t_final {
        Ok(ProfileValue { value: 0.5 * t_final, d1: 0.0, d2: 0.0 })
    } else {
        tau_profile(t, t_final)
    }
}

pub fn eval_tau(t: f64, t_final: f64) -> Result<f64> {
    tau_profile(t, t_final).map(|p| p.value)
}

pub fn eval_ell(t: f64, t_final: f64) -> Result<f64> {
    ell_profile(t, t_final).map(|p| p.value)
}
