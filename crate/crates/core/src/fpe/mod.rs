//! Finite-volume Crank-Nicolson solvers for the Fokker-Planck equation on
//! the half line and the half plane with a Robin (radiation) boundary.
//!
//! Nodes sit on a uniform lattice with the first column on `x = 0`; its
//! control volumes are half cells whose outer face carries the Robin flux
//! `J.n = -kappa p` exactly. Interior faces use centered fluxes of
//! `J = a p - div(sigma p)`, so the lattice mass (the trapezoidal integral)
//! changes only through the Robin face and the truncated far edges.

mod line;
mod plane;

pub use line::solve_fpe_1d;
pub use plane::solve_fpe_2d;

use crate::coefficients::{CoefficientModel1D, HalfSpaceModel};
use crate::error::{Error, Result};

/// Relative residual requested from the Krylov solver.
pub const SOLVER_TOL: f64 = 1e-10;
/// Any increase of lattice mass above this is treated as instability.
pub const MASS_ALARM: f64 = 1e-5;

#[derive(Debug, Clone)]
pub enum FpeModel {
    Line(CoefficientModel1D),
    Plane(HalfSpaceModel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// `[0, length]`
    Line { length: f64, dx: f64 },
    /// `[0, lx] x [-ly, ly]`
    Plane { lx: f64, ly: f64, dx: f64 },
}

#[derive(Debug, Clone)]
pub struct FpeConfig {
    pub model: FpeModel,
    pub kappa: f64,
    pub geometry: Geometry,
    /// Crank-Nicolson step; `None` picks `dx / 4`.
    pub pde_dt: Option<f64>,
    pub horizon: f64,
    pub x0: Vec<f64>,
}

impl FpeConfig {
    pub(crate) fn spacing(&self) -> f64 {
        match self.geometry {
            Geometry::Line { dx, .. } | Geometry::Plane { dx, .. } => dx,
        }
    }

    pub(crate) fn time_step(&self) -> Result<f64> {
        let dx = self.spacing();
        let dt = self.pde_dt.unwrap_or(dx / 4.0);
        if !(dt > 0.0) || dt > dx {
            return Err(Error::config(format!(
                "pde time step {dt} must lie in (0, dx = {dx}]"
            )));
        }
        Ok(dt)
    }
}

/// Grid axis: nodes `origin + i * spacing` for `i < nodes`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub origin: f64,
    pub spacing: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn coord(&self, i: usize) -> f64 {
        self.origin + self.spacing * i as f64
    }

    /// Trapezoidal weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.nodes {
            0.5 * self.spacing
        } else {
            self.spacing
        }
    }
}

/// Lattice density, row-major with the last axis fastest. Includes the
/// far-edge nodes where the density is pinned to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DensityGrid {
    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.axes[1].nodes + j]
    }
}

/// One record per time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub mass: f64,
    /// Rate of mass loss through the Robin boundary, averaged over the
    /// step as Crank-Nicolson does.
    pub boundary_flux: f64,
    /// Rate of mass loss through the truncated far edges.
    pub far_flux: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct FpeSolution {
    pub grid: DensityGrid,
    pub initial_mass: f64,
    pub start_time: f64,
    pub steps: Vec<StepRecord>,
}

/// Start time and standard deviation of the initial Gaussian. The delta
/// at `x0` is replaced by the free-space solution at a time `t0` where its
/// normal-direction spread is two lattice spacings.
pub(crate) fn initial_time(
    dx: f64,
    sigma_normal: f64,
    x0_normal: f64,
    horizon: f64,
) -> Result<f64> {
    let width = 2.0 * dx;
    if x0_normal < 5.0 * width {
        return Err(Error::config(format!(
            "grid spacing {dx} does not resolve the start point {x0_normal} (need x0 >= 10 dx)"
        )));
    }
    let t0 = width * width / (2.0 * sigma_normal);
    if t0 >= horizon {
        return Err(Error::config(format!(
            "horizon {horizon} is shorter than the start-up time {t0}"
        )));
    }
    Ok(t0)
}

/// Trapezoidal integral of the lattice density.
pub fn grid_survival(grid: &DensityGrid) -> f64 {
    match grid.dims() {
        1 => {
            let ax = grid.axes[0];
            grid.values
                .iter()
                .enumerate()
                .map(|(i, p)| ax.weight(i) * p)
                .sum()
        }
        _ => {
            let (ax, ay) = (grid.axes[0], grid.axes[1]);
            let mut total = 0.0;
            for i in 0..ax.nodes {
                let row: f64 = (0..ay.nodes).map(|j| ay.weight(j) * grid.at(i, j)).sum();
                total += ax.weight(i) * row;
            }
            total
        }
    }
}

/// Lattice marginal: node coordinate and integrated density.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub coords: Vec<f64>,
    pub density: Vec<f64>,
    pub spacing: f64,
}

impl Marginal {
    pub fn mass(&self) -> f64 {
        let n = self.density.len();
        self.density
            .iter()
            .enumerate()
            .map(|(i, d)| d * if i == 0 || i + 1 == n { 0.5 } else { 1.0 } * self.spacing)
            .sum()
    }

    /// Linear interpolation; zero outside the lattice.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.coords.len();
        let s = (x - self.coords[0]) / self.spacing;
        if s < 0.0 || s > (n - 1) as f64 {
            return 0.0;
        }
        let i = (s.floor() as usize).min(n - 2);
        let f = s - i as f64;
        self.density[i] * (1.0 - f) + self.density[i + 1] * f
    }

    /// Average over `[lo, hi]` by the trapezoidal rule on `sub` pieces.
    pub fn bin_average(&self, lo: f64, hi: f64, sub: usize) -> f64 {
        let h = (hi - lo) / sub as f64;
        let mut s = 0.5 * (self.interpolate(lo) + self.interpolate(hi));
        for k in 1..sub {
            s += self.interpolate(lo + h * k as f64);
        }
        s * h / (hi - lo)
    }
}

/// Marginals over the first and second axes of a two-dimensional grid:
/// `int p dy` as a function of `x`, and `int p dx` as a function of `y`.
pub fn grid_marginals(grid: &DensityGrid) -> Result<(Marginal, Marginal)> {
    if grid.dims() != 2 {
        return Err(Error::domain("marginals need a two-dimensional grid"));
    }
    let (ax, ay) = (grid.axes[0], grid.axes[1]);
    let mx = (0..ax.nodes)
        .map(|i| (0..ay.nodes).map(|j| ay.weight(j) * grid.at(i, j)).sum())
        .collect();
    let my = (0..ay.nodes)
        .map(|j| (0..ax.nodes).map(|i| ax.weight(i) * grid.at(i, j)).sum())
        .collect();
    Ok((
        Marginal {
            coords: (0..ax.nodes).map(|i| ax.coord(i)).collect(),
            density: mx,
            spacing: ax.spacing,
        },
        Marginal {
            coords: (0..ay.nodes).map(|j| ay.coord(j)).collect(),
            density: my,
            spacing: ay.spacing,
        },
    ))
}
