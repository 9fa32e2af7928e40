//! Closed-form densities for the half-line Robin problem with constant
//! coefficients.
//!
//! Every `exp(E) erfc(z)` product is rewritten as `exp(E - z^2) erfcx(z)`.
//! For both closed forms `E - z^2` equals the exponent of the image
//! Gaussian, so the sink term never overflows however large `kappa t`
//! or `x` become.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::special::erfcx;

/// Absolute tolerance used for survival probabilities.
pub const SURVIVAL_TOL: f64 = 1e-7;

/// Constant-coefficient Robin problem on `x > 0` started from `x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinParams1D {
    pub sigma: f64,
    pub a: f64,
    pub kappa: f64,
    pub x0: f64,
}

impl RobinParams1D {
    pub fn new(sigma: f64, a: f64, kappa: f64, x0: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::domain(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !(kappa >= 0.0) {
            return Err(Error::domain(format!(
                "kappa must be nonnegative, got {kappa}"
            )));
        }
        if !(x0 > 0.0) {
            return Err(Error::domain(format!("x0 must be positive, got {x0}")));
        }
        if !a.is_finite() {
            return Err(Error::domain("drift must be finite"));
        }
        Ok(Self {
            sigma,
            a,
            kappa,
            x0,
        })
    }
}

fn check_point(x: f64, t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("time must be positive, got {t}")));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(format!("x must be in [0, inf), got {x}")));
    }
    Ok(())
}

/// Bryan's solution for zero drift: two image Gaussians minus the sink
/// term `(kappa/sigma) exp(kappa (x + x0 + kappa t)/sigma) erfc(...)`.
pub fn bryan_density(x: f64, t: f64, p: &RobinParams1D) -> Result<f64> {
    check_point(x, t)?;
    if p.a != 0.0 {
        return Err(Error::domain("Bryan's solution requires zero drift"));
    }
    let four_st = 4.0 * p.sigma * t;
    let norm = 1.0 / (PI * four_st).sqrt();
    let direct = (-(x - p.x0).powi(2) / four_st).exp();
    let image = (-(x + p.x0).powi(2) / four_st).exp();
    let z = (x + p.x0 + 2.0 * p.kappa * t) / four_st.sqrt();
    let sink = p.kappa / p.sigma * image * erfcx(z);
    Ok(norm * (direct + image) - sink)
}

/// Constant drift `a` and constant `sigma`. Reduces to Smoluchowski's
/// reflecting solution at `kappa = 0` and to Bryan's at `a = 0`.
pub fn drift_density(x: f64, t: f64, p: &RobinParams1D) -> Result<f64> {
    check_point(x, t)?;
    let (s, a, k, x0) = (p.sigma, p.a, p.kappa, p.x0);
    let four_st = 4.0 * s * t;
    let norm = 1.0 / (PI * four_st).sqrt();
    let direct = (-(x - x0 - a * t).powi(2) / four_st).exp();
    let image = (-a * x0 / s - (x + x0 - a * t).powi(2) / four_st).exp();
    let z = (x + x0 + (2.0 * k + a) * t) / four_st.sqrt();
    let sink = (2.0 * k + a) / (2.0 * s) * erfcx(z);
    Ok(norm * direct + image * (norm - sink))
}

/// `p(x, t)` integrated over `[lo, hi]` within `[0, inf)`.
pub fn interval_mass(lo: f64, hi: f64, t: f64, p: &RobinParams1D, tol: f64) -> Result<f64> {
    check_point(lo.max(0.0), t)?;
    let lo = lo.max(0.0);
    if hi <= lo {
        return Ok(0.0);
    }
    // Break at the peak and a few widths around it so narrow densities
    // (small t) are never stepped over by the first Kronrod rule.
    let peak = p.x0 + p.a * t;
    let width = (2.0 * p.sigma * t).sqrt();
    let mut breaks = vec![lo, hi];
    for k in [-10.0, -3.0, 0.0, 3.0, 10.0] {
        let b = peak + k * width;
        if b > lo && b < hi {
            breaks.push(b);
        }
    }
    breaks.sort_by(f64::total_cmp);
    // The integrand is bounded by a few multiples of the Gaussian peak, so
    // domain errors cannot occur inside [lo, hi].
    let q = quadrature::integrate_with_breaks(
        |x| drift_density(x, t, p).unwrap_or(f64::NAN),
        &breaks,
        tol,
    )?;
    Ok(q.value)
}

/// Survival probability `int_0^inf p(x, t | x0) dx`, by adaptive
/// quadrature to absolute tolerance [`SURVIVAL_TOL`].
pub fn survival_analytic(t: f64, p: &RobinParams1D) -> Result<f64> {
    survival_analytic_with_tol(t, p, SURVIVAL_TOL)
}

pub fn survival_analytic_with_tol(t: f64, p: &RobinParams1D, tol: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("time must be positive, got {t}")));
    }
    // Beyond `upper` both Gaussians are at least 8.4 standard deviations
    // from their centres; the neglected tail is below 1e-16.
    let upper = p.x0 + p.a.abs() * t + 12.0 * (p.sigma * t).sqrt();
    let mass = interval_mass(0.0, upper, t, p, tol)?;
    Ok(mass.clamp(0.0, 1.0))
}
