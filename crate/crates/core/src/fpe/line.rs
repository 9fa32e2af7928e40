use super::{
    initial_time, Axis, DensityGrid, FpeConfig, FpeModel, FpeSolution, Geometry, StepRecord,
    MASS_ALARM, SOLVER_TOL,
};
use crate::coefficients::CoefficientModel1D;
use crate::error::{Error, Result};

pub(super) fn lattice_size(extent: f64, dx: f64, what: &str) -> Result<usize> {
    if !(dx > 0.0) || !(extent > 0.0) {
        return Err(Error::config(format!(
            "{what} = {extent} and dx = {dx} must be positive"
        )));
    }
    let n = (extent / dx).round();
    if n < 4.0 || (n * dx - extent).abs() > 1e-9 * extent {
        return Err(Error::config(format!(
            "{what} = {extent} is not a multiple of dx = {dx}"
        )));
    }
    Ok(n as usize)
}

/// Tridiagonal operator `dp/dt = M p` on nodes `0..n`.
struct Tridiag {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    /// Outflow coefficient of the last face.
    far: f64,
}

fn assemble(model: &CoefficientModel1D, kappa: f64, h: f64, n: usize, t: f64) -> Tridiag {
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let vol = |i: usize| if i == 0 { 0.5 * h } else { h };
    diag[0] -= kappa / vol(0);
    let mut far = 0.0;
    for i in 0..n {
        let xf = (i as f64 + 0.5) * h;
        let af = model.drift(xf, t);
        let cl = 0.5 * af + model.sigma(i as f64 * h, t) / h;
        let cr = 0.5 * af - model.sigma((i + 1) as f64 * h, t) / h;
        diag[i] -= cl / vol(i);
        if i + 1 < n {
            upper[i] -= cr / vol(i);
            lower[i + 1] += cl / vol(i + 1);
            diag[i + 1] += cr / vol(i + 1);
        } else {
            far = cl;
        }
    }
    Tridiag {
        lower,
        diag,
        upper,
        far,
    }
}

impl Tridiag {
    fn apply(&self, p: &[f64], out: &mut [f64]) {
        let n = p.len();
        for i in 0..n {
            let mut s = self.diag[i] * p[i];
            if i > 0 {
                s += self.lower[i] * p[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * p[i + 1];
            }
            out[i] = s;
        }
    }

    /// Solves `(I - c M) x = b`.
    fn solve_shifted(&self, c: f64, b: &[f64]) -> Result<Vec<f64>> {
        let n = b.len();
        let a: Vec<f64> = self.lower.iter().map(|v| -c * v).collect();
        let d: Vec<f64> = self.diag.iter().map(|v| 1.0 - c * v).collect();
        let u: Vec<f64> = self.upper.iter().map(|v| -c * v).collect();
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        let mut piv = d[0];
        cp[0] = u[0] / piv;
        dp[0] = b[0] / piv;
        for i in 1..n {
            piv = d[i] - a[i] * cp[i - 1];
            if piv.abs() < 1e-300 {
                return Err(Error::numeric(format!(
                    "zero pivot in tridiagonal solve at row {i}"
                )));
            }
            cp[i] = u[i] / piv;
            dp[i] = (b[i] - a[i] * dp[i - 1]) / piv;
        }
        let mut x = dp;
        for i in (0..n - 1).rev() {
            x[i] -= cp[i] * x[i + 1];
        }
        let mut res = 0.0f64;
        let mut norm = 0.0f64;
        for i in 0..n {
            let mut r = d[i] * x[i] - b[i];
            if i > 0 {
                r += a[i] * x[i - 1];
            }
            if i + 1 < n {
                r += u[i] * x[i + 1];
            }
            res += r * r;
            norm += b[i] * b[i];
        }
        let rel = (res / norm.max(f64::MIN_POSITIVE)).sqrt();
        if !(rel <= SOLVER_TOL) {
            return Err(Error::numeric(format!(
                "tridiagonal solve residual {rel:e} above {SOLVER_TOL:e}"
            )));
        }
        Ok(x)
    }
}

pub(super) fn step_plan(t0: f64, horizon: f64, dt: f64) -> Vec<(f64, bool)> {
    let n = ((horizon - t0) / dt).ceil().max(2.0) as usize;
    let h = (horizon - t0) / n as f64;
    // Two Crank-Nicolson steps are replaced by four implicit half steps to
    // damp the non-smooth start.
    let mut plan = vec![(0.5 * h, true); 4];
    plan.extend(std::iter::repeat_n((h, false), n - 2));
    plan
}

/// Solves on `[0, length]` with `J(0) = -kappa p(0)` and `p(length) = 0`.
pub fn solve_fpe_1d(cfg: &FpeConfig) -> Result<FpeSolution> {
    let FpeModel::Line(model) = &cfg.model else {
        return Err(Error::config("solve_fpe_1d needs a one-dimensional model"));
    };
    let Geometry::Line { length, dx: h } = cfg.geometry else {
        return Err(Error::config("solve_fpe_1d needs a line geometry"));
    };
    if cfg.x0.len() != 1 {
        return Err(Error::config("one-dimensional start point expected"));
    }
    if !(cfg.kappa >= 0.0) {
        return Err(Error::config(format!(
            "kappa must be >= 0, got {}",
            cfg.kappa
        )));
    }
    let dt = cfg.time_step()?;
    let n = lattice_size(length, h, "length")?;
    let x0 = cfg.x0[0];
    if x0 >= length {
        return Err(Error::config(format!(
            "x0 = {x0} lies outside [0, {length}]"
        )));
    }
    let s0 = model.sigma(x0, 0.0);
    let t0 = initial_time(h, s0, x0, cfg.horizon)?;
    let mean = x0 + model.drift(x0, 0.0) * t0;
    let var = 2.0 * s0 * t0;
    let vol = |i: usize| if i == 0 { 0.5 * h } else { h };
    let mut p: Vec<f64> = (0..n)
        .map(|i| (-(i as f64 * h - mean).powi(2) / (2.0 * var)).exp())
        .collect();
    let mass = |p: &[f64]| p.iter().enumerate().map(|(i, v)| vol(i) * v).sum::<f64>();
    let m0 = mass(&p);
    p.iter_mut().for_each(|v| *v /= m0);

    // built-in families do not depend on time
    let frozen = model.drift_field().tag().is_some() && model.sigma_field().tag().is_some();
    let mut op = assemble(model, cfg.kappa, h, n, t0);
    let mut t = t0;
    let mut current = 1.0;
    let mut steps = Vec::new();
    let mut mp = vec![0.0; n];
    for (dt_k, implicit) in step_plan(t0, cfg.horizon, dt) {
        if !frozen {
            let tm = if implicit { t + dt_k } else { t + 0.5 * dt_k };
            op = assemble(model, cfg.kappa, h, n, tm);
        }
        let (rhs, c) = if implicit {
            (p.clone(), dt_k)
        } else {
            op.apply(&p, &mut mp);
            let r: Vec<f64> = p.iter().zip(&mp).map(|(a, b)| a + 0.5 * dt_k * b).collect();
            (r, 0.5 * dt_k)
        };
        let next = op.solve_shifted(c, &rhs)?;
        let (bf, ff) = if implicit {
            (cfg.kappa * next[0], op.far * next[n - 1])
        } else {
            (
                0.5 * cfg.kappa * (p[0] + next[0]),
                0.5 * op.far * (p[n - 1] + next[n - 1]),
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
            iterations: 1,
        });
    }
    let mut values = p;
    values.push(0.0);
    Ok(FpeSolution {
        grid: DensityGrid {
            axes: vec![Axis {
                origin: 0.0,
                spacing: h,
                nodes: n + 1,
            }],
            values,
            time: t,
        },
        initial_mass: 1.0,
        start_time: t0,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic1d::{drift_density, RobinParams1D};
    use crate::fpe::grid_survival;

    fn config(a: f64, kappa: f64, dx: f64, length: f64) -> FpeConfig {
        FpeConfig {
            model: FpeModel::Line(CoefficientModel1D::constant(a, 1.0).unwrap()),
            kappa,
            geometry: Geometry::Line { length, dx },
            pde_dt: None,
            horizon: 1.0,
            x0: vec![1.0],
        }
    }

    #[test]
    fn matches_closed_form() {
        let sol = solve_fpe_1d(&config(0.0, 1.0, 0.01, 12.0)).unwrap();
        let params = RobinParams1D::new(1.0, 0.0, 1.0, 1.0).unwrap();
        let g = &sol.grid;
        let err = (0..g.axes[0].nodes)
            .map(|i| (g.values[i] - drift_density(g.axes[0].coord(i), 1.0, &params).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(err < 5e-3, "{err}");
        assert!((grid_survival(g) - 0.7709508519720129).abs() < 1e-3);
    }

    #[test]
    fn reflecting_conserves_mass() {
        let sol = solve_fpe_1d(&config(-1.0, 0.0, 0.01, 12.0)).unwrap();
        assert!((grid_survival(&sol.grid) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn discrete_mass_balance() {
        let sol = solve_fpe_1d(&config(-1.0, 2.0, 0.02, 10.0)).unwrap();
        let mut prev = sol.initial_mass;
        let mut t = sol.start_time;
        for s in &sol.steps {
            let predicted = prev - (s.time - t) * (s.boundary_flux + s.far_flux);
            assert!(
                (s.mass - predicted).abs() < 1e-12,
                "{} vs {predicted}",
                s.mass
            );
            prev = s.mass;
            t = s.time;
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            solve_fpe_1d(&config(0.0, 1.0, 0.03, 10.0)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            solve_fpe_1d(&config(0.0, 1.0, 0.2, 10.0)),
            Err(Error::Config(_))
        ));
        let mut c = config(0.0, 1.0, 0.01, 10.0);
        c.pde_dt = Some(0.5);
        assert!(matches!(solve_fpe_1d(&c), Err(Error::Config(_))));
    }
}
