use std::f64::consts::PI;

use robinsim::analytic1d::{drift_density, RobinParams1D};
use robinsim::blverify::{flux_integral, Profile};
use robinsim::coefficients::CoefficientModel1D;
use robinsim::euler1d::{run_ensemble_1d, Boundary1D, SimConfig1D};
use robinsim::histogram::{density_table, Binning};

/// Efflux computed from the simulated boundary layer itself recovers
/// `kappa p(0, t)` of the closed form.
#[test]
fn ensemble_profile_efflux() {
    let dt = 1e-4;
    let n = 400_000;
    let w = 0.005;
    let r = run_ensemble_1d(&SimConfig1D {
        model: CoefficientModel1D::constant(0.0, 1.0).unwrap(),
        boundary: Boundary1D::new(PI.sqrt()).unwrap(),
        x0: 1.0,
        horizon: 1.0,
        dt,
        n,
        seed: 17,
        binning: Some(Binning::new(0.0, 0.25, (0.25 / w) as usize).unwrap()),
    })
    .unwrap();
    let bins = density_table(&r.histogram, n).unwrap();
    // nodes on bin edges, first node takes the first bin's value
    let mut values = vec![bins[0].density];
    values.extend(bins.windows(2).map(|p| 0.5 * (p[0].density + p[1].density)));
    let profile = Profile { dx: w, values };
    let efflux = flux_integral(&profile, PI.sqrt(), 1.0, dt).unwrap();
    let p0 = drift_density(0.0, 1.0, &RobinParams1D::new(1.0, 0.0, 1.0, 1.0).unwrap()).unwrap();
    assert!(
        (efflux / p0 - 1.0).abs() < 0.1,
        "efflux {efflux} vs kappa p(0) {p0}"
    );
}
