use std::path::{Path, PathBuf};

use super::config::{Engine, ExperimentConfig, Model, Reference};
use super::csv::{write_csv, write_labelled_csv, Provenance};
use crate::analytic1d::{drift_density, survival_analytic, RobinParams1D};
use crate::blverify::{
    apply_propagator_1d, boundary_derivative_check, flux_integral, Profile, PropagatorInput,
    LAYER_NODES,
};
use crate::error::{Error, Result};
use crate::euler1d::{default_binning, run_ensemble_1d, Boundary1D, SimConfig1D};
use crate::euler_nd::{
    default_marginal_binnings, run_ensemble_nd, Absorption, BoundarySpecNd, SimConfigNd,
};
use crate::fpe::{
    grid_marginals, grid_survival, solve_fpe_1d, solve_fpe_2d, FpeConfig, FpeModel, FpeSolution,
    Geometry,
};
use crate::histogram::{density_table, Binning};

/// Default plane for the Fokker-Planck reference: `[0, 4] x [-6, 6]`.
pub const DEFAULT_PLANE: [f64; 2] = [4.0, 6.0];
pub const DEFAULT_DX_PLANE: f64 = 0.02;
pub const DEFAULT_DX_LINE: f64 = 0.01;

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance {
        experiment: cfg.experiment.clone(),
        seed: cfg.seed,
        dt: cfg.dt.clone(),
        n: cfg.n,
    }
}

fn line_model(cfg: &ExperimentConfig) -> Result<&crate::coefficients::CoefficientModel1D> {
    match &cfg.model {
        Model::Line(m) => Ok(m),
        Model::Plane(_) => Err(Error::config(format!(
            "engine `{}` is one-dimensional",
            cfg.engine.name()
        ))),
    }
}

/// Closed-form parameters; only constant coefficients have them.
pub fn robin_params(cfg: &ExperimentConfig) -> Result<RobinParams1D> {
    let (a, sigma) = line_model(cfg)?
        .as_constant()
        .ok_or_else(|| Error::config("the closed form needs constant drift and sigma"))?;
    RobinParams1D::new(sigma, a, cfg.kappa, cfg.x0[0])
}

fn line_length(cfg: &ExperimentConfig) -> Result<f64> {
    if let Some(d) = &cfg.domain {
        return match d.as_slice() {
            [l] => Ok(*l),
            _ => Err(Error::config("a one-dimensional domain is a single length")),
        };
    }
    let m = line_model(cfg)?;
    let x0 = cfg.x0[0];
    let a = m.drift(x0, 0.0).abs();
    let s = m.sigma(x0, 0.0);
    Ok(((x0 + a * cfg.horizon + 10.0 * (s * cfg.horizon).sqrt()) * 10.0).ceil() / 10.0)
}

pub fn fpe_config(cfg: &ExperimentConfig) -> Result<FpeConfig> {
    let (model, geometry) = match &cfg.model {
        Model::Line(m) => (
            FpeModel::Line(m.clone()),
            Geometry::Line {
                length: line_length(cfg)?,
                dx: cfg.dx.unwrap_or(DEFAULT_DX_LINE),
            },
        ),
        Model::Plane(m) => {
            let [lx, ly] = match cfg.domain.as_deref() {
                None => DEFAULT_PLANE,
                Some([lx, ly]) => [*lx, *ly],
                Some(_) => return Err(Error::config("a plane domain is `lx ly`")),
            };
            (
                FpeModel::Plane(m.clone()),
                Geometry::Plane {
                    lx,
                    ly,
                    dx: cfg.dx.unwrap_or(DEFAULT_DX_PLANE),
                },
            )
        }
    };
    Ok(FpeConfig {
        model,
        kappa: cfg.kappa,
        geometry,
        pde_dt: cfg.pde_dt,
        horizon: cfg.horizon,
        x0: cfg.x0.clone(),
    })
}

pub fn solve_fpe(cfg: &ExperimentConfig) -> Result<FpeSolution> {
    let fc = fpe_config(cfg)?;
    match fc.model {
        FpeModel::Line(_) => solve_fpe_1d(&fc),
        FpeModel::Plane(_) => solve_fpe_2d(&fc),
    }
}

/// Survival of one ensemble: `(n_total, n_survived)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalCount {
    pub n: u64,
    pub survived: u64,
}

impl SurvivalCount {
    pub fn estimate(&self) -> f64 {
        self.survived as f64 / self.n as f64
    }

    pub fn stderr(&self) -> f64 {
        let p = self.estimate();
        (p * (1.0 - p) / self.n as f64).sqrt()
    }

    fn row(&self, dt: f64) -> [f64; 5] {
        [
            dt,
            self.n as f64,
            self.survived as f64,
            self.estimate(),
            self.stderr(),
        ]
    }
}

fn line_sim(cfg: &ExperimentConfig, dt: f64) -> Result<SimConfig1D> {
    let model = line_model(cfg)?.clone();
    let binning = match cfg.bins {
        Some(b) => Some(Binning::new(
            0.0,
            default_binning(&model, cfg.x0[0], cfg.horizon).hi,
            b,
        )?),
        None => None,
    };
    Ok(SimConfig1D {
        model,
        boundary: Boundary1D::new(cfg.p)?,
        x0: cfg.x0[0],
        horizon: cfg.horizon,
        dt,
        n: cfg.n.ok_or_else(|| Error::config("missing `n`"))?,
        seed: cfg.seed,
        binning,
    })
}

fn plane_sim(cfg: &ExperimentConfig, dt: f64) -> Result<SimConfigNd> {
    let Model::Plane(model) = &cfg.model else {
        return Err(Error::config("engine `simnd` needs `sigma_matrix`"));
    };
    let binnings = match cfg.bins {
        Some(b) => Some(
            default_marginal_binnings(model.dim())
                .into_iter()
                .map(|d| Binning::new(d.lo, d.hi, b))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok(SimConfigNd {
        model: model.clone(),
        boundary: BoundarySpecNd {
            absorption: Absorption::Constant(cfg.p),
            rule: cfg.reflection.clone(),
        },
        x0: cfg.x0.clone(),
        horizon: cfg.horizon,
        dt,
        n: cfg.n.ok_or_else(|| Error::config("missing `n`"))?,
        seed: cfg.seed,
        binnings,
    })
}

fn dt_dir(out: &Path, dt: f64) -> PathBuf {
    out.join(format!("dt_{dt}"))
}

fn density_rows(hist: &crate::histogram::Histogram, n: u64) -> Result<Vec<[f64; 3]>> {
    Ok(density_table(hist, n)?
        .into_iter()
        .map(|b| [b.lo, b.hi, b.density])
        .collect())
}

fn run_sim1d(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let prov = provenance(cfg);
    let mut files = Vec::new();
    let mut rows = Vec::new();
    for &dt in &cfg.dt {
        let r = run_ensemble_1d(&line_sim(cfg, dt)?)?;
        rows.push(
            SurvivalCount {
                n: r.n_total,
                survived: r.n_survived,
            }
            .row(dt),
        );
        let path = dt_dir(out, dt).join("density.csv");
        write_csv(
            &path,
            &prov,
            "bin_lo,bin_hi,density",
            density_rows(&r.histogram, r.n_total)?,
        )?;
        files.push(path);
    }
    let path = out.join("survival.csv");
    write_csv(&path, &prov, "dt,n,n_sur,p_hat,stderr", rows)?;
    files.insert(0, path);
    Ok(files)
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn run_simnd(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let prov = provenance(cfg);
    let mut files = Vec::new();
    let mut rows = Vec::new();
    for &dt in &cfg.dt {
        let r = run_ensemble_nd(&plane_sim(cfg, dt)?)?;
        rows.push(
            SurvivalCount {
                n: r.n_total,
                survived: r.n_survived,
            }
            .row(dt),
        );
        for (k, hist) in r.marginals.iter().enumerate().take(2) {
            let path = dt_dir(out, dt).join(format!("marginal_{}.csv", AXES[k]));
            let labelled = density_rows(hist, r.n_total)?
                .into_iter()
                .map(|row| (AXES[k].to_string(), row));
            write_labelled_csv(&path, &prov, "axis,bin_lo,bin_hi,density", labelled)?;
            files.push(path);
        }
    }
    let path = out.join("survival.csv");
    write_csv(&path, &prov, "dt,n,n_sur,p_hat,stderr", rows)?;
    files.insert(0, path);
    Ok(files)
}

fn run_fpe(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let prov = provenance(cfg);
    let sol = solve_fpe(cfg)?;
    let g = &sol.grid;
    let mut files = vec![out.join("grid.csv"), out.join("survival.csv")];
    if g.dims() == 1 {
        let ax = g.axes[0];
        write_csv(
            &files[0],
            &prov,
            "x,p",
            (0..ax.nodes).map(|i| [ax.coord(i), g.values[i]]),
        )?;
    } else {
        let (ax, ay) = (g.axes[0], g.axes[1]);
        let rows = (0..ax.nodes).flat_map(|i| (0..ay.nodes).map(move |j| (i, j)));
        write_csv(
            &files[0],
            &prov,
            "x,y,p",
            rows.map(|(i, j)| [ax.coord(i), ay.coord(j), g.at(i, j)]),
        )?;
        let (mx, my) = grid_marginals(g)?;
        for (k, m) in [mx, my].into_iter().enumerate() {
            let path = out.join(format!("marginal_{}.csv", AXES[k]));
            let rows = m
                .coords
                .iter()
                .zip(&m.density)
                .map(|(c, d)| (AXES[k].to_string(), [*c, *d]));
            write_labelled_csv(&path, &prov, "axis,coord,density", rows)?;
            files.push(path);
        }
    }
    let mut rows = vec![[sol.start_time, sol.initial_mass, 0.0, 0.0]];
    rows.extend(
        sol.steps
            .iter()
            .map(|s| [s.time, s.mass, s.boundary_flux, s.far_flux]),
    );
    write_csv(
        &files[1],
        &prov,
        "time,survival,boundary_flux,far_flux",
        rows,
    )?;
    Ok(files)
}

fn run_analytic(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let params = robin_params(cfg)?;
    let length = line_length(cfg)?;
    let nodes = cfg.bins.unwrap_or(400);
    let h = length / nodes as f64;
    let rows = (0..=nodes)
        .map(|i| {
            let x = i as f64 * h;
            drift_density(x, cfg.horizon, &params).map(|p| [x, p])
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out.join("analytic.csv");
    write_csv(&path, &provenance(cfg), "x,p", rows)?;
    Ok(vec![path])
}

/// Boundary-layer diagnostics for one propagator step started from the
/// closed-form density at `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlReport {
    pub rows: Vec<(String, [f64; 3])>,
}

pub fn blcheck(cfg: &ExperimentConfig) -> Result<BlReport> {
    let params = robin_params(cfg)?;
    let model = line_model(cfg)?.clone();
    let dt = cfg.dt[0];
    let sigma = params.sigma;
    let dx = (sigma * dt).sqrt() / LAYER_NODES;
    let length = line_length(cfg)?;
    let input = Profile::sample(dx, length, |x| {
        drift_density(x, cfg.horizon, &params).unwrap_or(f64::NAN)
    });
    if input.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(
            "closed-form density is not finite on the grid",
        ));
    }
    let output = apply_propagator_1d(&PropagatorInput {
        density: input.clone(),
        model,
        p: cfg.p,
        dt,
        t: cfg.horizon,
    })?;
    let slope = boundary_derivative_check(&output, &input, cfg.p, sigma, dt);
    let efflux = flux_integral(&input, cfg.p, sigma, dt)?;
    let loss_rate = (input.mass() - output.mass()) / dt;
    let kp0 = cfg.kappa * input.values[0];
    let ratio = |m: f64, p: f64| if p == 0.0 { f64::NAN } else { m / p };
    Ok(BlReport {
        rows: vec![
            (
                "boundary_slope".into(),
                [
                    slope.measured,
                    slope.predicted,
                    ratio(slope.measured, slope.predicted),
                ],
            ),
            (
                "interior_slope".into(),
                [slope.interior, slope.interior, 1.0],
            ),
            ("efflux".into(), [efflux, kp0, ratio(efflux, kp0)]),
            (
                "mass_loss_rate".into(),
                [loss_rate, efflux, ratio(loss_rate, efflux)],
            ),
        ],
    })
}

fn run_blcheck(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let report = blcheck(cfg)?;
    let path = out.join("blreport.csv");
    write_labelled_csv(
        &path,
        &provenance(cfg),
        "quantity,measured,predicted,ratio",
        report.rows,
    )?;
    Ok(vec![path])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub estimate: f64,
    pub reference: f64,
    /// `reference - estimate`
    pub bias: f64,
    pub stderr: f64,
    /// Bias of the previous (larger) step divided by this one.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

/// Reference survival: closed form, lattice solution, or a given value.
/// Defaults to the closed form in one dimension and the lattice otherwise.
pub fn reference_survival(cfg: &ExperimentConfig) -> Result<f64> {
    let source = cfg.reference.unwrap_or(match cfg.model {
        Model::Line(_) => Reference::Analytic,
        Model::Plane(_) => Reference::Fpe,
    });
    match source {
        Reference::Value(v) => Ok(v),
        _ if cfg.kappa == 0.0 => Ok(1.0),
        Reference::Analytic => survival_analytic(cfg.horizon, &robin_params(cfg)?),
        Reference::Fpe => Ok(grid_survival(&solve_fpe(cfg)?.grid)),
    }
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    let reference = reference_survival(cfg)?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &dt in &cfg.dt {
        let count = match cfg.model {
            Model::Line(_) => {
                let r = run_ensemble_1d(&line_sim(cfg, dt)?)?;
                SurvivalCount {
                    n: r.n_total,
                    survived: r.n_survived,
                }
            }
            Model::Plane(_) => {
                let r = run_ensemble_nd(&plane_sim(cfg, dt)?)?;
                SurvivalCount {
                    n: r.n_total,
                    survived: r.n_survived,
                }
            }
        };
        let bias = reference - count.estimate();
        rows.push(ConvergenceRow {
            dt,
            estimate: count.estimate(),
            reference,
            bias,
            stderr: count.stderr(),
            ratio: rows.last().map(|prev| prev.bias / bias),
        });
    }
    Ok(ConvergenceTable { rows })
}

fn write_convergence(
    cfg: &ExperimentConfig,
    table: &ConvergenceTable,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let path = out.join("convergence.csv");
    let rows = table.rows.iter().map(|r| {
        [
            r.dt,
            r.estimate,
            r.reference,
            r.bias,
            r.stderr,
            r.ratio.unwrap_or(f64::NAN),
        ]
    });
    write_csv(
        &path,
        &provenance(cfg),
        "dt,estimate,reference,bias,stderr,ratio",
        rows,
    )?;
    Ok(vec![path])
}

/// Runs the configured engine and writes its CSV files under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    match cfg.engine {
        Engine::Analytic => run_analytic(cfg, out),
        Engine::Sim1d => run_sim1d(cfg, out),
        Engine::SimNd => run_simnd(cfg, out),
        Engine::Fpe => run_fpe(cfg, out),
        Engine::Blcheck => run_blcheck(cfg, out),
        Engine::Convergence => write_convergence(cfg, &run_convergence(cfg)?, out),
    }
}
