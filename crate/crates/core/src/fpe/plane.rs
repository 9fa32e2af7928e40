use super::line::{lattice_size, step_plan};
use super::{
    initial_time, Axis, DensityGrid, FpeConfig, FpeModel, FpeSolution, Geometry, StepRecord,
    MASS_ALARM, SOLVER_TOL,
};
use crate::error::{Error, Result};
use crate::sparse::{bicgstab, CsrMatrix, TripletBuilder};

const MAX_ITER: usize = 5000;

struct Lattice {
    nx: usize,
    ny: usize,
    h: f64,
}

impl Lattice {
    /// Unknowns are `i < nx`, `0 < j < ny`; other nodes are pinned to zero.
    fn index(&self, i: usize, j: usize) -> Option<usize> {
        (i < self.nx && j > 0 && j < self.ny).then(|| i * (self.ny - 1) + j - 1)
    }

    fn unknowns(&self) -> usize {
        self.nx * (self.ny - 1)
    }

    fn volume(&self, i: usize) -> f64 {
        if i == 0 {
            0.5 * self.h * self.h
        } else {
            self.h * self.h
        }
    }
}

/// Net face flux as a sparse functional of the lattice values.
#[derive(Default)]
struct Stencil(Vec<((usize, usize), f64)>);

impl Stencil {
    fn push(&mut self, node: (usize, usize), c: f64) {
        self.0.push((node, c));
    }
}

struct Operator {
    /// `dp/dt = M p`
    m: CsrMatrix,
    /// Far-edge outflow rate as a functional of `p`.
    far: Vec<f64>,
}

fn assemble(lat: &Lattice, sigma: [[f64; 2]; 2], a: [f64; 2], kappa: f64) -> Operator {
    let Lattice { nx, ny, h } = *lat;
    let n = lat.unknowns();
    let mut tb = TripletBuilder::new(n);
    let mut far = vec![0.0; n];
    let (s11, s12, s22) = (sigma[0][0], sigma[0][1], sigma[1][1]);

    // Outflow `flux` from cell `from` into cell `to` (either may be absent).
    let mut transfer = |from: (usize, usize),
                        to: Option<(usize, usize)>,
                        flux: &Stencil,
                        tb: &mut TripletBuilder| {
        let from_idx = lat.index(from.0, from.1);
        let to_idx = to.and_then(|c| lat.index(c.0, c.1));
        for &((ci, cj), c) in &flux.0 {
            let Some(col) = lat.index(ci, cj) else {
                continue;
            };
            match from_idx {
                Some(r) => tb.add(r, col, -c / lat.volume(from.0)),
                None => far[col] -= c,
            }
            match to_idx {
                Some(r) => tb.add(r, col, c / lat.volume(to.unwrap().0)),
                None => far[col] += c,
            }
        }
    };

    for j in 1..ny {
        if let Some(r) = lat.index(0, j) {
            tb.add(r, r, -kappa * h / lat.volume(0));
        }
        for i in 0..nx {
            let len = h;
            let mut f = Stencil::default();
            f.push((i, j), len * (0.5 * a[0] + s11 / h));
            f.push((i + 1, j), len * (0.5 * a[0] - s11 / h));
            let c = len * s12 / (4.0 * h);
            f.push((i, j + 1), -c);
            f.push((i, j - 1), c);
            f.push((i + 1, j + 1), -c);
            f.push((i + 1, j - 1), c);
            let to = (i + 1 < nx).then_some((i + 1, j));
            transfer((i, j), to, &f, &mut tb);
        }
    }
    for i in 0..nx {
        let len = if i == 0 { 0.5 * h } else { h };
        for j in 0..ny {
            let mut f = Stencil::default();
            f.push((i, j), len * (0.5 * a[1] + s22 / h));
            f.push((i, j + 1), len * (0.5 * a[1] - s22 / h));
            if i == 0 {
                // second-order one-sided d/dx at x = h/4
                let c = len * s12 / (8.0 * h);
                for jj in [j, j + 1] {
                    f.push((0, jj), 5.0 * c);
                    f.push((1, jj), -6.0 * c);
                    f.push((2, jj), c);
                }
            } else {
                let c = len * s12 / (4.0 * h);
                for jj in [j, j + 1] {
                    f.push((i + 1, jj), -c);
                    f.push((i - 1, jj), c);
                }
            }
            let from = (i, j);
            if j == 0 {
                // outflow through the lower edge is the negative of this flux
                let neg = Stencil(f.0.iter().map(|&(n, c)| (n, -c)).collect());
                transfer((i, j + 1), None, &neg, &mut tb);
            } else {
                let to = (j + 1 < ny).then_some((i, j + 1));
                transfer(from, to, &f, &mut tb);
            }
        }
    }
    Operator { m: tb.build(), far }
}

/// Solves on `[0, lx] x [-ly, ly]` with `-J.n = kappa p` on `x = 0` and
/// zero density on the far edges. Requires a constant tensor and drift.
pub fn solve_fpe_2d(cfg: &FpeConfig) -> Result<FpeSolution> {
    let FpeModel::Plane(model) = &cfg.model else {
        return Err(Error::config("solve_fpe_2d needs a half-space model"));
    };
    if model.dim() != 2 || cfg.x0.len() != 2 {
        return Err(Error::config("solve_fpe_2d is two-dimensional"));
    }
    let Some(drift) = model.constant_drift() else {
        return Err(Error::config("solve_fpe_2d needs a constant drift"));
    };
    let Geometry::Plane { lx, ly, dx: h } = cfg.geometry else {
        return Err(Error::config("solve_fpe_2d needs a plane geometry"));
    };
    if !(cfg.kappa >= 0.0) {
        return Err(Error::config(format!(
            "kappa must be >= 0, got {}",
            cfg.kappa
        )));
    }
    let dt = cfg.time_step()?;
    let lat = Lattice {
        nx: lattice_size(lx, h, "lx")?,
        ny: lattice_size(2.0 * ly, h, "2 ly")?,
        h,
    };
    let s = model.sigma();
    let sigma = [[s[(0, 0)], s[(0, 1)]], [s[(1, 0)], s[(1, 1)]]];
    let a = [drift[0], drift[1]];
    let (x0, y0) = (cfg.x0[0], cfg.x0[1]);
    if x0 >= lx || y0.abs() >= ly {
        return Err(Error::config(format!(
            "start point ({x0}, {y0}) lies outside the domain"
        )));
    }
    let t0 = initial_time(h, sigma[0][0], x0, cfg.horizon)?;

    // free-space Gaussian with covariance 2 sigma t0
    let c = [
        [2.0 * sigma[0][0] * t0, 2.0 * sigma[0][1] * t0],
        [2.0 * sigma[1][0] * t0, 2.0 * sigma[1][1] * t0],
    ];
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let (mx, my) = (x0 + a[0] * t0, y0 + a[1] * t0);
    let n = lat.unknowns();
    let mut p = vec![0.0; n];
    for i in 0..lat.nx {
        for j in 1..lat.ny {
            let dx_ = i as f64 * h - mx;
            let dy_ = -ly + j as f64 * h - my;
            let q = (c[1][1] * dx_ * dx_ - 2.0 * c[0][1] * dx_ * dy_ + c[0][0] * dy_ * dy_) / det;
            p[lat.index(i, j).unwrap()] = (-0.5 * q).exp();
        }
    }
    let weights: Vec<f64> = (0..n).map(|k| lat.volume(k / (lat.ny - 1))).collect();
    let mass = |p: &[f64]| p.iter().zip(&weights).map(|(v, w)| v * w).sum::<f64>();
    let m0 = mass(&p);
    p.iter_mut().for_each(|v| *v /= m0);

    let op = assemble(&lat, sigma, a, cfg.kappa);
    let boundary_rate = |p: &[f64]| {
        cfg.kappa
            * h
            * (1..lat.ny)
                .map(|j| p[lat.index(0, j).unwrap()])
                .sum::<f64>()
    };
    let far_rate = |p: &[f64]| p.iter().zip(&op.far).map(|(v, f)| v * f).sum::<f64>();

    let mut systems: Vec<(f64, CsrMatrix)> = Vec::new();
    let mut t = t0;
    let mut current = 1.0;
    let mut steps = Vec::new();
    let mut mp = vec![0.0; n];
    for (dt_k, implicit) in step_plan(t0, cfg.horizon, dt) {
        let c = if implicit { dt_k } else { 0.5 * dt_k };
        if !systems.iter().any(|(k, _)| *k == c) {
            systems.push((c, op.m.shifted(1.0, -c)));
        }
        let sys = &systems.iter().find(|(k, _)| *k == c).unwrap().1;
        let rhs = if implicit {
            p.clone()
        } else {
            op.m.mul_vec(&p, &mut mp);
            p.iter().zip(&mp).map(|(u, v)| u + c * v).collect()
        };
        let mut next = p.clone();
        let stats = bicgstab(sys, &rhs, &mut next, SOLVER_TOL, MAX_ITER)?;
        let (bf, ff) = if implicit {
            (boundary_rate(&next), far_rate(&next))
        } else {
            (
                0.5 * (boundary_rate(&p) + boundary_rate(&next)),
                0.5 * (far_rate(&p) + far_rate(&next)),
            )
        };
        p = next;
        t += dt_k;
        let m = mass(&p);
        if m > current + MASS_ALARM || !m.is_finite() {
            return Err(Error::numeric(format!(
                "lattice mass grew from {current} to {m} at t = {t}"
            )));
        }
        current = m;
        steps.push(StepRecord {
            time: t,
            mass: m,
            boundary_flux: bf,
            far_flux: ff,
            iterations: stats.iterations,
        });
    }

    let (gx, gy) = (lat.nx + 1, lat.ny + 1);
    let mut values = vec![0.0; gx * gy];
    for i in 0..lat.nx {
        for j in 1..lat.ny {
            values[i * gy + j] = p[lat.index(i, j).unwrap()];
        }
    }
    Ok(FpeSolution {
        grid: DensityGrid {
            axes: vec![
                Axis {
                    origin: 0.0,
                    spacing: h,
                    nodes: gx,
                },
                Axis {
                    origin: -ly,
                    spacing: h,
                    nodes: gy,
                },
            ],
            values,
            time: t,
        },
        initial_mass: 1.0,
        start_time: t0,
        steps,
    })
}
