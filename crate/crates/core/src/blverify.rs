//! Numerical checks of the boundary-layer analysis: one application of the
//! Euler-scheme transition kernel, the boundary slope it produces, and the
//! erfc-weighted efflux integral that recovers the radiation constant.

use rayon::prelude::*;

use crate::coefficients::CoefficientModel1D;
use crate::error::{Error, Result};
use crate::special::erfc;

/// Kernel support in standard deviations.
pub const KERNEL_CUTOFF: f64 = 8.0;
/// Required nodes per boundary-layer width `sqrt(sigma dt)`.
pub const LAYER_NODES: f64 = 20.0;

/// Density sampled at `x_i = i * dx` on `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub dx: f64,
    pub values: Vec<f64>,
}

impl Profile {
    pub fn sample(dx: f64, length: f64, f: impl Fn(f64) -> f64) -> Self {
        let n = (length / dx).round() as usize + 1;
        Self {
            dx,
            values: (0..n).map(|i| f(i as f64 * dx)).collect(),
        }
    }

    pub fn length(&self) -> f64 {
        self.dx * (self.values.len() - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.dx * i as f64
    }

    /// Trapezoidal mass.
    pub fn mass(&self) -> f64 {
        let n = self.values.len();
        let inner: f64 = self.values.iter().sum();
        self.dx * (inner - 0.5 * (self.values[0] + self.values[n - 1]))
    }

    /// Linear interpolation; `None` beyond the last node.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let s = x / self.dx;
        let last = self.values.len() - 1;
        if s < 0.0 || s > last as f64 + 1e-9 {
            return None;
        }
        let i = (s.floor() as usize).min(last - 1);
        let f = s - i as f64;
        Some(self.values[i] * (1.0 - f) + self.values[i + 1] * f)
    }
}

#[derive(Debug, Clone)]
pub struct PropagatorInput {
    pub density: Profile,
    pub model: CoefficientModel1D,
    pub p: f64,
    pub dt: f64,
    pub t: f64,
}

/// One step of the partially reflecting Euler scheme acting on a density:
/// a free Gaussian move plus the mirror image weighted by `1 - P sqrt(dt)`.
/// The output lives on the input grid.
pub fn apply_propagator_1d(input: &PropagatorInput) -> Result<Profile> {
    let PropagatorInput {
        density,
        model,
        p,
        dt,
        t,
    } = input;
    let (p, dt, t) = (*p, *dt, *t);
    if !(dt > 0.0) || !(p >= 0.0) {
        return Err(Error::config(format!(
            "need dt > 0 and P >= 0, got dt={dt}, P={p}"
        )));
    }
    let stay = 1.0 - p * dt.sqrt();
    if stay < 0.0 {
        return Err(Error::config(format!(
            "P sqrt(dt) = {} exceeds 1",
            p * dt.sqrt()
        )));
    }
    let dx = density.dx;
    let layer = (model.sigma_min() * dt).sqrt();
    if dx > layer / LAYER_NODES {
        return Err(Error::config(format!(
            "grid spacing {dx} does not resolve the boundary layer (need dx <= {})",
            layer / LAYER_NODES
        )));
    }
    let n = density.values.len();
    let nodes: Vec<(f64, f64, f64, f64)> = (0..n)
        .map(|i| {
            let x = density.coord(i);
            let w = if i == 0 || i + 1 == n { 0.5 * dx } else { dx };
            let s = model.sigma(x, t);
            (
                x + model.drift(x, t) * dt,
                4.0 * s * dt,
                w * density.values[i],
                s,
            )
        })
        .collect();
    let s_max = nodes.iter().map(|v| v.3).fold(0.0, f64::max);
    let a_max = (0..n)
        .map(|i| model.drift(density.coord(i), t).abs())
        .fold(0.0, f64::max);
    let reach = KERNEL_CUTOFF * (2.0 * s_max * dt).sqrt() + a_max * dt;
    let span = (reach / dx).ceil() as usize + 1;
    let values = (0..n)
        .into_par_iter()
        .map(|j| {
            let y = density.coord(j);
            let lo = j.saturating_sub(span);
            let hi = (j + span).min(n - 1);
            let mut acc = 0.0;
            for &(m, four_sdt, mass, _) in &nodes[lo..=hi] {
                if mass == 0.0 {
                    continue;
                }
                let norm = mass / (std::f64::consts::PI * four_sdt).sqrt();
                let direct = (-(y - m).powi(2) / four_sdt).exp();
                let image = (-(y + m).powi(2) / four_sdt).exp();
                acc += norm * (direct + stay * image);
            }
            acc
        })
        .collect();
    Ok(Profile { dx, values })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeReport {
    /// One-sided second-order difference of the output at `y = 0`.
    pub measured: f64,
    /// `p(0) P / sqrt(4 pi sigma)` from the input.
    pub predicted: f64,
    /// Central difference of the output at `10 sqrt(sigma dt)`.
    pub interior: f64,
}

impl SlopeReport {
    pub fn ratio(&self) -> f64 {
        self.measured / self.predicted
    }
}

pub fn boundary_derivative_check(
    output: &Profile,
    input: &Profile,
    p: f64,
    sigma0: f64,
    dt: f64,
) -> SlopeReport {
    let v = &output.values;
    let h = output.dx;
    let measured = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    let k = ((10.0 * (sigma0 * dt).sqrt() / h).round() as usize).clamp(1, v.len() - 2);
    SlopeReport {
        measured,
        predicted: input.values[0] * p / (4.0 * std::f64::consts::PI * sigma0).sqrt(),
        interior: (v[k + 1] - v[k - 1]) / (2.0 * h),
    }
}

/// Sub-intervals for the Simpson rule on `z in [0, 6]`.
const FLUX_PANELS: usize = 1200;

/// Efflux rate `P sqrt(sigma) int_0^inf erfc(z) p(2 z sqrt(sigma dt)) dz`,
/// truncated at `z = 6` where `erfc` drops below 1e-16.
pub fn flux_integral(density: &Profile, p: f64, sigma0: f64, dt: f64) -> Result<f64> {
    let scale = 2.0 * (sigma0 * dt).sqrt();
    let z_max = 6.0;
    if density.length() < scale * z_max {
        return Err(Error::domain(format!(
            "density covers [0, {}] but the efflux integral needs [0, {}]",
            density.length(),
            scale * z_max
        )));
    }
    let h = z_max / FLUX_PANELS as f64;
    let f = |z: f64| erfc(z) * density.interpolate(scale * z).unwrap_or(0.0);
    let mut s = f(0.0) + f(z_max);
    for k in 1..FLUX_PANELS {
        s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    Ok(p * sigma0.sqrt() * s * h / 3.0)
}
