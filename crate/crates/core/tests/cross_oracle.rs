use robinsim::analytic1d::{drift_density, interval_mass, RobinParams1D};
use robinsim::coefficients::{CoefficientModel1D, DriftNd, HalfSpaceModel, Matrix};
use robinsim::euler1d::{run_ensemble_1d, Boundary1D, SimConfig1D};
use robinsim::euler_nd::{
    kappa_to_p_nd, run_ensemble_nd, Absorption, BoundarySpecNd, ReflectionRule, SimConfigNd,
};
use robinsim::fpe::{
    grid_marginals, grid_survival, solve_fpe_1d, solve_fpe_2d, FpeConfig, FpeModel, Geometry,
};
use robinsim::histogram::{density_table, Binning};

fn line(a: f64, kappa: f64, dx: f64) -> FpeConfig {
    FpeConfig {
        model: FpeModel::Line(CoefficientModel1D::constant(a, 1.0).unwrap()),
        kappa,
        geometry: Geometry::Line { length: 10.0, dx },
        pde_dt: None,
        horizon: 1.0,
        x0: vec![1.0],
    }
}

#[test]
fn line_lattice_matches_drift_solution() {
    let sol = solve_fpe_1d(&line(-1.0, 1.0, 0.01)).unwrap();
    let params = RobinParams1D::new(1.0, -1.0, 1.0, 1.0).unwrap();
    let ax = sol.grid.axes[0];
    let err = (0..ax.nodes)
        .map(|i| (sol.grid.values[i] - drift_density(ax.coord(i), 1.0, &params).unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(err < 5e-3, "{err}");
    assert!((grid_survival(&sol.grid) - 0.5771857806859542).abs() < 1e-3);
}

#[test]
fn line_lattice_refines() {
    let s: Vec<f64> = [0.05, 0.025, 0.0125]
        .iter()
        .map(|&dx| grid_survival(&solve_fpe_1d(&line(0.0, 1.0, dx)).unwrap().grid))
        .collect();
    let (d1, d2) = ((s[0] - s[1]).abs(), (s[1] - s[2]).abs());
    assert!(d2 < d1, "{s:?}");
    assert!((s[2] - 0.7709508519720129).abs() < 5e-4, "{s:?}");
}

#[test]
fn line_ensemble_density_matches_closed_form() {
    // experiment 1 at dt = 1e-4, bins holding more than 1e3 counts
    let n = 400_000;
    let r = run_ensemble_1d(&SimConfig1D {
        model: CoefficientModel1D::constant(0.0, 1.0).unwrap(),
        boundary: Boundary1D::new(std::f64::consts::PI.sqrt()).unwrap(),
        x0: 1.0,
        horizon: 1.0,
        dt: 1e-4,
        n,
        seed: 99,
        binning: Some(Binning::new(0.0, 5.0, 40).unwrap()),
    })
    .unwrap();
    let params = RobinParams1D::new(1.0, 0.0, 1.0, 1.0).unwrap();
    let table = density_table(&r.histogram, n).unwrap();
    let mut worst = 0.0f64;
    for (b, c) in table.iter().zip(&r.histogram.counts) {
        if *c <= 1000 {
            continue;
        }
        let exact = interval_mass(b.lo, b.hi, 1.0, &params, 1e-10).unwrap() / (b.hi - b.lo);
        worst = worst.max((b.density - exact).abs());
    }
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn plane_marginals_against_ensemble() {
    let sigma = Matrix::from_rows(&[vec![0.25, 0.4], vec![0.4, 1.0]]).unwrap();
    let model = HalfSpaceModel::new(DriftNd::Constant(vec![0.0, 0.0]), sigma).unwrap();
    let sol = solve_fpe_2d(&FpeConfig {
        model: FpeModel::Plane(model.clone()),
        kappa: 1.0,
        geometry: Geometry::Plane {
            lx: 4.0,
            ly: 6.0,
            dx: 0.02,
        },
        pde_dt: None,
        horizon: 0.5,
        x0: vec![0.3, 0.0],
    })
    .unwrap();
    let (mx, my) = grid_marginals(&sol.grid).unwrap();
    let peak = (0..my.density.len())
        .max_by(|&a, &b| my.density[a].total_cmp(&my.density[b]))
        .unwrap();
    assert!(
        my.coords[peak] > 0.0,
        "y-marginal peak at {}",
        my.coords[peak]
    );

    let n = 200_000;
    let r = run_ensemble_nd(&SimConfigNd {
        model,
        boundary: BoundarySpecNd {
            absorption: Absorption::Constant(kappa_to_p_nd(1.0, 0.25)),
            rule: ReflectionRule::CoNormal,
        },
        x0: vec![0.3, 0.0],
        horizon: 0.5,
        dt: 1e-4,
        n,
        seed: 5,
        binnings: Some(vec![
            Binning::new(0.0, 3.0, 40).unwrap(),
            Binning::new(-3.0, 3.0, 40).unwrap(),
        ]),
    })
    .unwrap();
    let l1: f64 = density_table(&r.marginals[0], n)
        .unwrap()
        .iter()
        .map(|b| (b.density - mx.bin_average(b.lo, b.hi, 16)).abs() * (b.hi - b.lo))
        .sum();
    assert!(l1 < 0.02, "{l1}");
}
