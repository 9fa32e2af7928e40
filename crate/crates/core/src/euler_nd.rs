//! Euler scheme in the half space `x_1 > 0` with partial oblique
//! reflection.
//!
//! A crossing proposal `x'` is terminated with probability
//! `P(x'_B) sqrt(dt)`, `x'_B` being its normal projection on the boundary,
//! and is otherwise moved to `x'' = x' - (2 x'_1 / v_1) v`. Only the
//! co-normal direction `v = sigma n / |sigma n|` recovers the Robin
//! condition `kappa = P sqrt(sigma_n) / sqrt(pi)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::coefficients::{HalfSpaceModel, Matrix};
use crate::error::{Error, Result};
use crate::euler1d::step_count;
use crate::histogram::{Binning, Histogram, Histogram2D};
use crate::parallel::{chunks, trajectory_rng};

/// `sigma n / |sigma n|` for `n = e_1`.
pub fn conormal_direction(sigma: &Matrix) -> Vec<f64> {
    let col: Vec<f64> = (0..sigma.dim()).map(|i| sigma[(i, 0)]).collect();
    let norm = col.iter().map(|c| c * c).sum::<f64>().sqrt();
    col.iter().map(|c| c / norm).collect()
}

/// `P(y) = kappa(y) sqrt(pi) / sqrt(sigma_n)`.
pub fn kappa_to_p_nd(kappa: f64, sigma_n: f64) -> f64 {
    kappa * PI.sqrt() / sigma_n.sqrt()
}

/// Moves a point with `x_1 < 0` along `v` back into the half space:
/// `x'' = x' - (2 x'_1 / v_1) v`, so that `x''_1 = -x'_1`.
pub fn reflect_oblique(x: &mut [f64], v: &[f64]) -> Result<()> {
    if v[0] == 0.0 {
        return Err(Error::config(
            "reflection direction is tangent to the boundary",
        ));
    }
    reflect_unchecked(x, v);
    Ok(())
}

#[inline]
fn reflect_unchecked(x: &mut [f64], v: &[f64]) {
    let s = 2.0 * x[0] / v[0];
    let first = -x[0];
    for (xi, vi) in x.iter_mut().zip(v).skip(1) {
        *xi -= s * vi;
    }
    x[0] = first;
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReflectionRule {
    CoNormal,
    Normal,
    /// Unit vector with positive first component.
    Custom(Vec<f64>),
}

impl ReflectionRule {
    /// Concrete unit direction for the given tensor.
    pub fn direction(&self, sigma: &Matrix) -> Result<Vec<f64>> {
        let d = sigma.dim();
        match self {
            ReflectionRule::CoNormal => Ok(conormal_direction(sigma)),
            ReflectionRule::Normal => {
                let mut n = vec![0.0; d];
                n[0] = 1.0;
                Ok(n)
            }
            ReflectionRule::Custom(v) => {
                if v.len() != d {
                    return Err(Error::config(format!(
                        "reflection vector has {} components, need {d}",
                        v.len()
                    )));
                }
                let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::config(format!(
                        "reflection vector is not unit length (|v| = {norm})"
                    )));
                }
                if !(v[0] > 0.0) {
                    return Err(Error::config(
                        "reflection vector must point into the domain (v_1 > 0)",
                    ));
                }
                Ok(v.clone())
            }
        }
    }
}

type BoundaryFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Absorption parameter on the boundary hyperplane.
#[derive(Clone)]
pub enum Absorption {
    Constant(f64),
    /// Evaluated at boundary points; `sup` bounds it from above.
    Field {
        value: BoundaryFn,
        sup: f64,
    },
}

impl fmt::Debug for Absorption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Absorption::Constant(p) => write!(f, "Constant({p})"),
            Absorption::Field { sup, .. } => write!(f, "Field(sup={sup})"),
        }
    }
}

impl Absorption {
    #[inline]
    pub fn at(&self, boundary_point: &[f64]) -> f64 {
        match self {
            Absorption::Constant(p) => *p,
            Absorption::Field { value, .. } => {
                let p = value(boundary_point);
                debug_assert!(p >= 0.0, "negative absorption parameter {p}");
                p
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            Absorption::Constant(p) => *p,
            Absorption::Field { sup, .. } => *sup,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundarySpecNd {
    pub absorption: Absorption,
    pub rule: ReflectionRule,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepNd {
    Moved,
    Terminated,
}

/// One Euler step of `x` in place. `z` holds `d` standard normals, `v` is
/// the resolved reflection direction and `scratch` is a length-`d` buffer.
#[allow(clippy::too_many_arguments)]
pub fn step_nd<R: Rng + ?Sized>(
    x: &mut [f64],
    t: f64,
    dt: f64,
    model: &HalfSpaceModel,
    absorption: &Absorption,
    v: &[f64],
    z: &[f64],
    scratch: &mut [f64],
    rng: &mut R,
) -> StepNd {
    model.drift(x, t, scratch);
    let noise = (2.0 * dt).sqrt();
    let b = model.factor();
    let d = x.len();
    for i in 0..d {
        let bz: f64 = (0..d).map(|k| b[(i, k)] * z[k]).sum();
        scratch[i] = x[i] + scratch[i] * dt + noise * bz;
    }
    x.copy_from_slice(scratch);
    if x[0] >= 0.0 {
        return StepNd::Moved;
    }
    // normal projection x'_B = (0, x'_2, ..., x'_d)
    scratch[0] = 0.0;
    let kill = absorption.at(scratch) * dt.sqrt();
    if kill > 0.0 && rng.random::<f64>() < kill {
        return StepNd::Terminated;
    }
    reflect_unchecked(x, v);
    StepNd::Moved
}

#[derive(Debug, Clone)]
pub struct SimConfigNd {
    pub model: HalfSpaceModel,
    pub boundary: BoundarySpecNd,
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub n: u64,
    pub seed: u64,
    /// One binning per axis; defaults to [`default_marginal_binnings`].
    pub binnings: Option<Vec<Binning>>,
}

/// 200 bins on `[0, 3]` for `x_1` and on `[-3, 3]` for the other axes.
pub fn default_marginal_binnings(d: usize) -> Vec<Binning> {
    (0..d)
        .map(|i| Binning {
            lo: if i == 0 { 0.0 } else { -3.0 },
            hi: 3.0,
            bins: 200,
        })
        .collect()
}

impl SimConfigNd {
    pub fn validate(&self) -> Result<u64> {
        let d = self.model.dim();
        if self.x0.len() != d {
            return Err(Error::config(format!(
                "x0 has {} components, model is {d}-dimensional",
                self.x0.len()
            )));
        }
        if !(self.x0[0] > 0.0) {
            return Err(Error::config("x0 must lie in the open half space x_1 > 0"));
        }
        let steps = step_count(self.horizon, self.dt)?;
        let worst = self.boundary.absorption.sup() * self.dt.sqrt();
        if !(self.boundary.absorption.sup() >= 0.0) || worst > 1.0 {
            return Err(Error::config(format!(
                "sup P sqrt(dt) = {worst} is not a probability"
            )));
        }
        if let Some(b) = &self.binnings {
            if b.len() != d {
                return Err(Error::config("need one marginal binning per axis"));
            }
        }
        self.boundary.rule.direction(self.model.sigma())?;
        Ok(steps)
    }

    pub fn binnings(&self) -> Vec<Binning> {
        self.binnings
            .clone()
            .unwrap_or_else(|| default_marginal_binnings(self.model.dim()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResultNd {
    pub n_total: u64,
    pub n_survived: u64,
    /// Joint histogram of `(x_1, x_2)`.
    pub joint: Histogram2D,
    pub marginals: Vec<Histogram>,
    pub dt: f64,
    pub seed: u64,
}

impl EnsembleResultNd {
    pub fn survival(&self) -> f64 {
        self.n_survived as f64 / self.n_total as f64
    }

    pub fn stderr(&self) -> f64 {
        let p = self.survival();
        (p * (1.0 - p) / self.n_total as f64).sqrt()
    }

    pub fn n_terminated(&self) -> u64 {
        self.n_total - self.n_survived
    }
}

struct Partial {
    survived: u64,
    joint: Histogram2D,
    marginals: Vec<Histogram>,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        self.survived += other.survived;
        self.joint.merge(&other.joint);
        for (a, b) in self.marginals.iter_mut().zip(&other.marginals) {
            a.merge(b);
        }
        self
    }
}

pub fn run_ensemble_nd(config: &SimConfigNd) -> Result<EnsembleResultNd> {
    let steps = config.validate()?;
    let d = config.model.dim();
    let v = config.boundary.rule.direction(config.model.sigma())?;
    let binnings = config.binnings();
    let blank = || Partial {
        survived: 0,
        joint: Histogram2D::new(binnings[0], binnings[1]),
        marginals: binnings.iter().map(|b| Histogram::new(*b)).collect(),
    };

    let total = chunks(config.n)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut part = blank();
            let mut x = vec![0.0; d];
            let mut z = vec![0.0; d];
            let mut scratch = vec![0.0; d];
            'traj: for index in lo..hi {
                let mut rng = trajectory_rng(config.seed, index);
                x.copy_from_slice(&config.x0);
                for i in 0..steps {
                    for zk in z.iter_mut() {
                        *zk = rng.sample(StandardNormal);
                    }
                    let t = i as f64 * config.dt;
                    let outcome = step_nd(
                        &mut x,
                        t,
                        config.dt,
                        &config.model,
                        &config.boundary.absorption,
                        &v,
                        &z,
                        &mut scratch,
                        &mut rng,
                    );
                    if outcome == StepNd::Terminated {
                        continue 'traj;
                    }
                }
                part.survived += 1;
                part.joint.add(x[0], x[1]);
                for (h, xi) in part.marginals.iter_mut().zip(&x) {
                    h.add(*xi);
                }
            }
            part
        })
        .reduce(blank, Partial::merge);

    Ok(EnsembleResultNd {
        n_total: config.n,
        n_survived: total.survived,
        joint: total.joint,
        marginals: total.marginals,
        dt: config.dt,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::DriftNd;
    use crate::parallel::with_workers;

    fn anisotropic_sigma() -> Matrix {
        Matrix::from_rows(&[vec![0.25, 0.4], vec![0.4, 1.0]]).unwrap()
    }

    #[test]
    fn conormal_examples() {
        let v = conormal_direction(&anisotropic_sigma());
        let norm = (0.25f64.powi(2) + 0.4f64.powi(2)).sqrt();
        assert!((v[0] - 0.25 / norm).abs() < 1e-15 && (v[1] - 0.4 / norm).abs() < 1e-15);
        assert!((v[0] - 0.52999).abs() < 1e-5 && (v[1] - 0.84799).abs() < 1e-5);
        assert!((v.iter().map(|c| c * c).sum::<f64>().sqrt() - 1.0).abs() < 1e-15);
        assert_eq!(conormal_direction(&Matrix::identity(2)), vec![1.0, 0.0]);
        let diag = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 7.0]]).unwrap();
        assert_eq!(conormal_direction(&diag), vec![1.0, 0.0]);
    }

    #[test]
    fn reflection_examples() {
        let mut x = [-0.2, 0.5];
        reflect_oblique(&mut x, &[1.0, 0.0]).unwrap();
        assert_eq!(x, [0.2, 0.5]);

        let v = conormal_direction(&anisotropic_sigma());
        let mut x = [-0.1, 0.0];
        reflect_oblique(&mut x, &v).unwrap();
        assert_eq!(x[0], 0.1);
        assert!((x[1] - 0.32).abs() < 1e-12, "{}", x[1]);

        assert!(matches!(
            reflect_oblique(&mut [-0.1, 0.0], &[0.0, 1.0]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn kappa_p_nd_examples() {
        assert!((kappa_to_p_nd(1.0, 0.25) - 2.0 * PI.sqrt()).abs() < 1e-15);
        assert_eq!(kappa_to_p_nd(0.0, 0.25), 0.0);
        assert_eq!(
            kappa_to_p_nd(1.0, 1.0),
            crate::euler1d::kappa_to_p(1.0, 1.0)
        );
    }

    #[test]
    fn custom_rule_validation() {
        let s = anisotropic_sigma();
        assert!(ReflectionRule::Custom(vec![0.6, 0.8]).direction(&s).is_ok());
        assert!(ReflectionRule::Custom(vec![0.6, 0.7])
            .direction(&s)
            .is_err());
        assert!(ReflectionRule::Custom(vec![-0.6, 0.8])
            .direction(&s)
            .is_err());
        assert!(ReflectionRule::Custom(vec![0.0, 1.0])
            .direction(&s)
            .is_err());
    }

    fn model(a: [f64; 2]) -> HalfSpaceModel {
        HalfSpaceModel::new(DriftNd::Constant(a.to_vec()), anisotropic_sigma()).unwrap()
    }

    #[test]
    fn interior_step_is_plain_euler() {
        let m = model([0.5, -0.2]);
        let mut x = [1.0, 0.0];
        let z = [0.1, -0.3];
        let mut s = [0.0; 2];
        let mut rng = trajectory_rng(0, 0);
        let out = step_nd(
            &mut x,
            0.0,
            0.01,
            &m,
            &Absorption::Constant(1.0),
            &[1.0, 0.0],
            &z,
            &mut s,
            &mut rng,
        );
        assert_eq!(out, StepNd::Moved);
        let b = m.factor();
        let n = 0.02f64.sqrt();
        let want0 = 1.0 + 0.005 + n * (b[(0, 0)] * 0.1 + b[(0, 1)] * -0.3);
        let want1 = -0.002 + n * (b[(1, 0)] * 0.1 + b[(1, 1)] * -0.3);
        assert!((x[0] - want0).abs() < 1e-15 && (x[1] - want1).abs() < 1e-15);
    }

    #[test]
    fn reflecting_walk_stays_inside() {
        let m = model([-1.0, 0.0]);
        let v = conormal_direction(m.sigma());
        let mut rng = trajectory_rng(3, 1);
        let mut x = [0.01, 0.0];
        let mut z = [0.0; 2];
        let mut s = [0.0; 2];
        for i in 0..1_000_000 {
            z[0] = rng.sample(StandardNormal);
            z[1] = rng.sample(StandardNormal);
            let out = step_nd(
                &mut x,
                0.0,
                1e-3,
                &m,
                &Absorption::Constant(0.0),
                &v,
                &z,
                &mut s,
                &mut rng,
            );
            assert_eq!(out, StepNd::Moved, "terminated at {i}");
            assert!(x[0] >= 0.0);
        }
    }

    #[test]
    fn absorption_evaluated_at_normal_projection() {
        // Absorb only where the projection has y > 0.
        let field = Absorption::Field {
            value: Arc::new(|y: &[f64]| {
                assert_eq!(y[0], 0.0);
                if y[1] > 0.0 {
                    1e4
                } else {
                    0.0
                }
            }),
            sup: 1e4,
        };
        let mut s = [0.0; 2];
        let mut rng = trajectory_rng(0, 0);
        // proposal ends at (-0.1, 0.5): absorbed w.p. min(1, 1e4 * 0.1)
        let z = [-(0.15 / (0.02f64.sqrt() * 0.5)), 0.0];
        let mut x = [0.05, 0.0];
        let m_iso = HalfSpaceModel::new(
            DriftNd::Constant(vec![0.0, 0.0]),
            Matrix::from_rows(&[vec![0.25, 0.0], vec![0.0, 0.25]]).unwrap(),
        )
        .unwrap();
        let out = step_nd(
            &mut x,
            0.0,
            0.01,
            &m_iso,
            &field,
            &[1.0, 0.0],
            &z,
            &mut s,
            &mut rng,
        );
        assert_eq!(out, StepNd::Moved, "projection had y = 0 so P = 0");
        assert!((x[0] - 0.1).abs() < 1e-12);
    }

    fn small_config(rule: ReflectionRule) -> SimConfigNd {
        let m = model([0.0, 0.0]);
        SimConfigNd {
            boundary: BoundarySpecNd {
                absorption: Absorption::Constant(kappa_to_p_nd(1.0, m.sigma_n())),
                rule,
            },
            model: m,
            x0: vec![0.3, 0.0],
            horizon: 0.5,
            dt: 0.01,
            n: 10_000,
            seed: 11,
            binnings: None,
        }
    }

    #[test]
    fn ensemble_accounting_and_determinism() {
        let cfg = small_config(ReflectionRule::CoNormal);
        let a = with_workers(Some(1), || run_ensemble_nd(&cfg).unwrap());
        let b = with_workers(Some(2), || run_ensemble_nd(&cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.n_survived + a.n_terminated(), a.n_total);
        assert_eq!(a.joint.total(), a.n_survived);
        for m in &a.marginals {
            assert_eq!(m.total(), a.n_survived);
        }
    }

    #[test]
    fn first_coordinate_independent_of_rule() {
        let co = run_ensemble_nd(&small_config(ReflectionRule::CoNormal)).unwrap();
        let no = run_ensemble_nd(&small_config(ReflectionRule::Normal)).unwrap();
        assert_eq!(co.n_survived, no.n_survived);
        assert_eq!(co.marginals[0], no.marginals[0]);
        assert_ne!(co.marginals[1], no.marginals[1]);
    }

    #[test]
    fn bad_configs_rejected() {
        let mut cfg = small_config(ReflectionRule::CoNormal);
        cfg.x0 = vec![-0.1, 0.0];
        assert!(cfg.validate().is_err());
        let mut cfg = small_config(ReflectionRule::CoNormal);
        cfg.boundary.absorption = Absorption::Constant(20.0);
        assert!(cfg.validate().is_err());
        let cfg = small_config(ReflectionRule::Custom(vec![0.0, 1.0]));
        assert!(cfg.validate().is_err());
    }
}
