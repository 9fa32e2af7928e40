//! Euler scheme on the half line with partial reflection.
//!
//! A step proposes `x' = x + a dt + sqrt(2 sigma dt) z`. If `x' < 0` the
//! trajectory is terminated with probability `P sqrt(dt)` and otherwise
//! continues from `-x'`. The resulting density converges to the Robin
//! problem with `kappa = P sqrt(sigma(0,t)) / sqrt(pi)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::coefficients::CoefficientModel1D;
use crate::error::{Error, Result};
use crate::histogram::{density_table, Binning, DensityBin, Histogram};
use crate::parallel::{chunks, trajectory_rng};

/// `P = kappa sqrt(pi) / sqrt(sigma0)`.
pub fn kappa_to_p(kappa: f64, sigma0: f64) -> f64 {
    kappa * PI.sqrt() / sigma0.sqrt()
}

/// Inverse of [`kappa_to_p`].
pub fn p_to_kappa(p: f64, sigma0: f64) -> f64 {
    p * sigma0.sqrt() / PI.sqrt()
}

/// Absorption parameter of the partially reflecting boundary at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary1D {
    p: f64,
}

impl Boundary1D {
    pub fn new(p: f64) -> Result<Self> {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::config(format!(
                "absorption parameter P must be >= 0, got {p}"
            )));
        }
        Ok(Self { p })
    }

    pub fn reflecting() -> Self {
        Self { p: 0.0 }
    }

    pub fn from_kappa(kappa: f64, sigma0: f64) -> Result<Self> {
        Self::new(kappa_to_p(kappa, sigma0))
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Termination probability `P sqrt(dt)` of a crossing trajectory.
    pub fn termination_probability(&self, dt: f64) -> f64 {
        self.p * dt.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Moved(f64),
    Terminated,
}

/// One Euler step from `x > 0` with standard normal `z`. The coin for the
/// boundary rule is drawn from `rng` only when the proposal crosses.
#[inline]
pub fn step_1d<R: Rng + ?Sized>(
    x: f64,
    t: f64,
    dt: f64,
    model: &CoefficientModel1D,
    boundary: &Boundary1D,
    z: f64,
    rng: &mut R,
) -> Step {
    let proposal = x + model.drift(x, t) * dt + (2.0 * model.sigma(x, t) * dt).sqrt() * z;
    resolve(proposal, boundary.termination_probability(dt), rng)
}

#[inline]
fn resolve<R: Rng + ?Sized>(proposal: f64, kill: f64, rng: &mut R) -> Step {
    if proposal >= 0.0 {
        Step::Moved(proposal)
    } else if kill > 0.0 && rng.random::<f64>() < kill {
        Step::Terminated
    } else {
        Step::Moved(-proposal)
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig1D {
    pub model: CoefficientModel1D,
    pub boundary: Boundary1D,
    pub x0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub n: u64,
    pub seed: u64,
    /// Survivor binning; defaults to [`default_binning`].
    pub binning: Option<Binning>,
}

/// Number of steps `T / dt`, required to be an integer up to rounding.
pub fn step_count(horizon: f64, dt: f64) -> Result<u64> {
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::config(format!(
            "need T > 0 and dt > 0, got T={horizon}, dt={dt}"
        )));
    }
    let ratio = horizon / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 4.0 * f64::EPSILON * steps.max(1.0) || steps < 1.0 {
        return Err(Error::config(format!("T/dt = {ratio} is not an integer")));
    }
    Ok(steps as u64)
}

/// 200 bins on `[0, x0 + |a| T + 6 sqrt(sigma T)]`, with `a`, `sigma`
/// taken at the starting point.
pub fn default_binning(model: &CoefficientModel1D, x0: f64, horizon: f64) -> Binning {
    let a = model.drift(x0, 0.0).abs();
    let s = model.sigma(x0, 0.0);
    Binning {
        lo: 0.0,
        hi: x0 + a * horizon + 6.0 * (s * horizon).sqrt(),
        bins: 200,
    }
}

impl SimConfig1D {
    pub fn validate(&self) -> Result<u64> {
        if !(self.x0 > 0.0) {
            return Err(Error::config(format!(
                "x0 must be positive, got {}",
                self.x0
            )));
        }
        let steps = step_count(self.horizon, self.dt)?;
        if self.boundary.termination_probability(self.dt) > 1.0 {
            return Err(Error::config(format!(
                "P sqrt(dt) = {} exceeds 1",
                self.boundary.termination_probability(self.dt)
            )));
        }
        Ok(steps)
    }

    pub fn binning(&self) -> Binning {
        self.binning
            .unwrap_or_else(|| default_binning(&self.model, self.x0, self.horizon))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub n_total: u64,
    pub n_survived: u64,
    pub histogram: Histogram,
    pub dt: f64,
    pub seed: u64,
}

impl EnsembleResult {
    pub fn n_terminated(&self) -> u64 {
        self.n_total - self.n_survived
    }

    pub fn survival(&self) -> f64 {
        self.n_survived as f64 / self.n_total as f64
    }

    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub fn stderr(&self) -> f64 {
        let p = self.survival();
        (p * (1.0 - p) / self.n_total as f64).sqrt()
    }
}

/// Endpoint of trajectory `index`, or `None` if it was absorbed.
fn run_trajectory(config: &SimConfig1D, steps: u64, index: u64) -> Option<f64> {
    let mut rng = trajectory_rng(config.seed, index);
    let dt = config.dt;
    let kill = config.boundary.termination_probability(dt);
    let mut x = config.x0;
    if let Some((a, s)) = config.model.as_constant() {
        let shift = a * dt;
        let scale = (2.0 * s * dt).sqrt();
        for _ in 0..steps {
            let z: f64 = rng.sample(StandardNormal);
            match resolve(x + shift + scale * z, kill, &mut rng) {
                Step::Moved(y) => x = y,
                Step::Terminated => return None,
            }
        }
    } else {
        for i in 0..steps {
            let t = i as f64 * dt;
            let z: f64 = rng.sample(StandardNormal);
            match step_1d(x, t, dt, &config.model, &config.boundary, z, &mut rng) {
                Step::Moved(y) => x = y,
                Step::Terminated => return None,
            }
        }
    }
    Some(x)
}

/// Simulates `n` independent trajectories to time `T` and bins the
/// survivors. Work is split into fixed index blocks whose integer partial
/// results are summed, so the output does not depend on the worker count.
pub fn run_ensemble_1d(config: &SimConfig1D) -> Result<EnsembleResult> {
    let steps = config.validate()?;
    let binning = config.binning();
    let blank = Histogram::new(binning);
    let (n_survived, histogram) = chunks(config.n)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut h = blank.clone();
            let mut survived = 0u64;
            for index in lo..hi {
                if let Some(x) = run_trajectory(config, steps, index) {
                    survived += 1;
                    h.add(x);
                }
            }
            (survived, h)
        })
        .reduce(
            || (0, blank.clone()),
            |(s1, mut h1), (s2, h2)| {
                h1.merge(&h2);
                (s1 + s2, h1)
            },
        );
    Ok(EnsembleResult {
        n_total: config.n,
        n_survived,
        histogram,
        dt: config.dt,
        seed: config.seed,
    })
}

/// Survivor density `count / (n_total * width)`; integrates to the
/// surviving fraction inside the binned range.
pub fn empirical_density(result: &EnsembleResult) -> Result<Vec<DensityBin>> {
    density_table(&result.histogram, result.n_total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::with_workers;

    /// Every uniform it produces is 0, so any positive kill probability fires.
    struct ZeroRng;

    impl rand::RngCore for ZeroRng {
        fn next_u32(&mut self) -> u32 {
            0
        }
        fn next_u64(&mut self) -> u64 {
            0
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(0)
        }
    }

    #[test]
    fn kappa_p_examples() {
        assert!((kappa_to_p(1.0, 1.0) - 1.772_453_850_905_516).abs() < 1e-15);
        assert_eq!(kappa_to_p(0.0, 2.0), 0.0);
        assert!((kappa_to_p(1.0, 4.0) - PI.sqrt() / 2.0).abs() < 1e-15);
        for &(k, s) in &[(1.0, 1.0), (0.3, 2.5), (7.0, 0.01)] {
            let back = p_to_kappa(kappa_to_p(k, s), s);
            assert!((back - k).abs() <= 1e-15 * k.max(1.0));
        }
    }

    #[test]
    fn interior_step_unchanged() {
        let model = CoefficientModel1D::constant(0.0, 1.0).unwrap();
        let b = Boundary1D::new(1.0).unwrap();
        let mut rng = ZeroRng;
        match step_1d(1.0, 0.0, 0.01, &model, &b, 0.5, &mut rng) {
            Step::Moved(x) => assert!((x - (1.0 + 0.02f64.sqrt() * 0.5)).abs() < 1e-15),
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn crossing_step_reflects() {
        let model = CoefficientModel1D::constant(0.0, 1.0).unwrap();
        let mut rng = ZeroRng;
        let s = step_1d(
            0.01,
            0.0,
            0.01,
            &model,
            &Boundary1D::reflecting(),
            -2.0,
            &mut rng,
        );
        let expected = -(0.01 - 2.0 * 0.02f64.sqrt());
        assert_eq!(s, Step::Moved(expected));
        assert!((expected - 0.272_842_712_474_619).abs() < 1e-12);
    }

    #[test]
    fn crossing_step_terminates_on_low_coin() {
        let model = CoefficientModel1D::constant(0.0, 1.0).unwrap();
        let mut rng = ZeroRng;
        let b = Boundary1D::new(1.0).unwrap();
        assert_eq!(
            step_1d(0.01, 0.0, 0.01, &model, &b, -2.0, &mut rng),
            Step::Terminated
        );
    }

    #[test]
    fn zero_proposal_is_interior() {
        let model = CoefficientModel1D::constant(-1.0, 1.0).unwrap();
        let mut rng = ZeroRng;
        let b = Boundary1D::new(10.0).unwrap();
        // x + a dt = 0 exactly with z = 0
        assert_eq!(
            step_1d(0.5, 0.0, 0.5, &model, &b, 0.0, &mut rng),
            Step::Moved(0.0)
        );
    }

    #[test]
    fn reflecting_never_terminates() {
        let model = CoefficientModel1D::constant(-1.0, 1.0).unwrap();
        let b = Boundary1D::reflecting();
        let mut rng = trajectory_rng(1, 0);
        let mut x = 1e-3;
        for i in 0..1_000_000 {
            let z: f64 = rng.sample(StandardNormal);
            match step_1d(x, i as f64 * 1e-3, 1e-3, &model, &b, z, &mut rng) {
                Step::Moved(y) => x = y,
                Step::Terminated => panic!("terminated at step {i}"),
            }
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let cfg = SimConfig1D {
            model: CoefficientModel1D::constant(0.0, 1.0).unwrap(),
            boundary: Boundary1D::new(20.0).unwrap(),
            x0: 1.0,
            horizon: 1.0,
            dt: 0.01,
            n: 10,
            seed: 1,
            binning: None,
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = SimConfig1D {
            boundary: Boundary1D::new(1.0).unwrap(),
            dt: 0.3,
            ..cfg
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(Boundary1D::new(-1.0).is_err());
        assert_eq!(step_count(0.5, 1e-3).unwrap(), 500);
        assert_eq!(step_count(1.0, 1e-4).unwrap(), 10_000);
    }

    fn small_config(p: f64) -> SimConfig1D {
        SimConfig1D {
            model: CoefficientModel1D::constant(0.0, 1.0).unwrap(),
            boundary: Boundary1D::new(p).unwrap(),
            x0: 1.0,
            horizon: 1.0,
            dt: 0.01,
            n: 20_000,
            seed: 99,
            binning: None,
        }
    }

    #[test]
    fn mass_accounting_and_histogram_total() {
        let r = run_ensemble_1d(&small_config(PI.sqrt())).unwrap();
        assert_eq!(r.n_survived + r.n_terminated(), r.n_total);
        assert_eq!(r.histogram.total(), r.n_survived);
        assert!(r.n_survived < r.n_total);
        let dens = empirical_density(&r).unwrap();
        let mass: f64 = dens.iter().map(|b| b.density * (b.hi - b.lo)).sum();
        let inside = r.histogram.counts.iter().sum::<u64>() as f64 / r.n_total as f64;
        assert!((mass - inside).abs() < 1e-12);
    }

    #[test]
    fn reflecting_ensemble_keeps_everyone() {
        let r = run_ensemble_1d(&small_config(0.0)).unwrap();
        assert_eq!(r.n_survived, r.n_total);
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let cfg = small_config(PI.sqrt());
        let a = with_workers(Some(1), || run_ensemble_1d(&cfg).unwrap());
        let b = with_workers(Some(3), || run_ensemble_1d(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_endpoints_density() {
        // Synthetic survivors, uniform on [0, 1]: each bin within
        // 5 / sqrt(count) of 1.
        let b = Binning::new(0.0, 1.0, 100).unwrap();
        let mut h = Histogram::new(b);
        let mut rng = trajectory_rng(5, 5);
        let n = 1_000_000u64;
        for _ in 0..n {
            h.add(rng.random::<f64>());
        }
        let r = EnsembleResult {
            n_total: n,
            n_survived: n,
            histogram: h,
            dt: 1.0,
            seed: 5,
        };
        for bin in empirical_density(&r).unwrap() {
            let count = bin.density * n as f64 * 0.01;
            assert!((bin.density - 1.0).abs() < 5.0 / count.sqrt());
        }
    }
}
