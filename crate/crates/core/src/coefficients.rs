//! Drift and diffusion coefficient models shared by every engine.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Step used for the central difference of `sigma` when a family has no
/// closed-form derivative.
pub const DERIVATIVE_STEP: f64 = 1e-6;

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A scalar field `f(x, t)` on the half line.
#[derive(Clone)]
pub enum Field1D {
    Constant(f64),
    /// `c0 + c1 * x`
    Linear {
        c0: f64,
        c1: f64,
    },
    /// User-registered field. `derivative`, when given, is `df/dx`.
    Custom {
        name: String,
        value: ScalarFn,
        derivative: Option<ScalarFn>,
    },
}

impl fmt::Debug for Field1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field1D::Constant(c) => write!(f, "Constant({c})"),
            Field1D::Linear { c0, c1 } => write!(f, "Linear({c0} + {c1}*x)"),
            Field1D::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Field1D {
    /// Builds a field from a family tag and its numeric parameters, as they
    /// appear in experiment configuration files.
    pub fn from_tag(tag: &str, params: &[f64]) -> Result<Self> {
        match (tag, params) {
            ("zero", []) => Ok(Field1D::Constant(0.0)),
            ("constant", [c]) => Ok(Field1D::Constant(*c)),
            ("linear", [c1]) => Ok(Field1D::Linear { c0: 0.0, c1: *c1 }),
            ("linear", [c0, c1]) => Ok(Field1D::Linear { c0: *c0, c1: *c1 }),
            ("zero" | "constant" | "linear", _) => Err(Error::config(format!(
                "family `{tag}` does not take {} parameter(s)",
                params.len()
            ))),
            _ => Err(Error::config(format!("unknown coefficient family `{tag}`"))),
        }
    }

    pub fn custom<F>(name: impl Into<String>, value: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Field1D::Custom {
            name: name.into(),
            value: Arc::new(value),
            derivative: None,
        }
    }

    /// Family tag and parameters, the inverse of [`Field1D::from_tag`].
    /// `None` for custom fields, which have no textual form.
    pub fn tag(&self) -> Option<(&'static str, Vec<f64>)> {
        match *self {
            Field1D::Constant(c) => Some(("constant", vec![c])),
            Field1D::Linear { c0, c1 } => Some(("linear", vec![c0, c1])),
            Field1D::Custom { .. } => None,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            Field1D::Constant(c) => *c,
            Field1D::Linear { c0, c1 } => c0 + c1 * x,
            Field1D::Custom { value, .. } => value(x, t),
        }
    }

    /// `df/dx` at `(x, t)`; exact for the built-in families, otherwise a
    /// central difference with step [`DERIVATIVE_STEP`].
    pub fn dx(&self, x: f64, t: f64) -> f64 {
        match self {
            Field1D::Constant(_) => 0.0,
            Field1D::Linear { c1, .. } => *c1,
            Field1D::Custom {
                derivative: Some(d),
                ..
            } => d(x, t),
            Field1D::Custom { value, .. } => {
                let h = DERIVATIVE_STEP;
                (value(x + h, t) - value(x - h, t)) / (2.0 * h)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Field1D::Constant(_))
    }
}

/// Drift `a(x,t)` and diffusion `sigma(x,t)` for `dx = a dt + sqrt(2 sigma) dw`
/// on `x > 0`.
#[derive(Clone, Debug)]
pub struct CoefficientModel1D {
    drift: Field1D,
    sigma: Field1D,
    sigma_min: f64,
}

impl CoefficientModel1D {
    /// Validates uniform ellipticity on the closed half line. Constant and
    /// linear families are checked exactly; a custom `sigma` is trusted to
    /// respect the declared `sigma_min` (checked on every evaluation in
    /// debug builds).
    pub fn new(drift: Field1D, sigma: Field1D, sigma_min: f64) -> Result<Self> {
        if !(sigma_min > 0.0) {
            return Err(Error::config(format!(
                "sigma_min must be positive, got {sigma_min}"
            )));
        }
        match sigma {
            Field1D::Constant(s) if s < sigma_min => {
                return Err(Error::config(format!(
                    "constant sigma {s} is below sigma_min {sigma_min}"
                )))
            }
            Field1D::Linear { c0, c1 } if c0 < sigma_min || c1 < 0.0 => {
                return Err(Error::config(format!(
                    "linear sigma {c0} + {c1} x is not bounded below by {sigma_min} on x >= 0"
                )))
            }
            _ => {}
        }
        Ok(Self {
            drift,
            sigma,
            sigma_min,
        })
    }

    /// Constant drift `a` and constant diffusion `sigma`.
    pub fn constant(a: f64, sigma: f64) -> Result<Self> {
        Self::new(Field1D::Constant(a), Field1D::Constant(sigma), sigma)
    }

    pub fn drift_field(&self) -> &Field1D {
        &self.drift
    }

    pub fn sigma_field(&self) -> &Field1D {
        &self.sigma
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    #[inline]
    pub fn drift(&self, x: f64, t: f64) -> f64 {
        self.drift.eval(x, t)
    }

    #[inline]
    pub fn sigma(&self, x: f64, t: f64) -> f64 {
        let s = self.sigma.eval(x, t);
        debug_assert!(s >= self.sigma_min, "sigma({x},{t}) = {s} < sigma_min");
        s
    }

    /// `d sigma / dx`, used by the boundary-layer checks.
    pub fn sigma_dx(&self, x: f64, t: f64) -> f64 {
        self.sigma.dx(x, t)
    }

    /// Constant (drift, sigma) pair when both fields are constant.
    pub fn as_constant(&self) -> Option<(f64, f64)> {
        match (&self.drift, &self.sigma) {
            (Field1D::Constant(a), Field1D::Constant(s)) => Some((*a, *s)),
            _ => None,
        }
    }
}

/// Small dense row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::config("matrix must be square and nonempty"));
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// `self * self^T`
    pub fn gram(&self) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = (0..n).map(|k| self[(i, k)] * self[(j, k)]).sum();
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = self.data[i * self.n..(i + 1) * self.n]
                .iter()
                .zip(v)
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..self.n).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol * scale))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Lower-triangular Cholesky factor `B` with `B B^T = sigma`.
pub fn factor_diffusion(sigma: &Matrix) -> Result<Matrix> {
    let n = sigma.dim();
    if !sigma.is_symmetric(1e-14) {
        return Err(Error::domain("diffusion tensor is not symmetric"));
    }
    let mut l = Matrix::zeros(n);
    for j in 0..n {
        let pivot = sigma[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if !(pivot > 0.0) {
            return Err(Error::domain(format!(
                "diffusion tensor is not positive definite: pivot {j} = {pivot:e}"
            )));
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let s = sigma[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

type VectorFn = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

/// Drift field on the half space.
#[derive(Clone)]
pub enum DriftNd {
    Constant(Vec<f64>),
    Custom { name: String, value: VectorFn },
}

impl fmt::Debug for DriftNd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftNd::Constant(a) => write!(f, "Constant({a:?})"),
            DriftNd::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// Half-space model `dx = a(x,t) dt + sqrt(2) B dw` on `x_1 > 0` with a
/// constant symmetric positive definite tensor `sigma = B B^T`.
#[derive(Clone, Debug)]
pub struct HalfSpaceModel {
    drift: DriftNd,
    sigma: Matrix,
    factor: Matrix,
}

impl HalfSpaceModel {
    pub fn new(drift: DriftNd, sigma: Matrix) -> Result<Self> {
        let d = sigma.dim();
        if d < 2 {
            return Err(Error::config("half-space model needs dimension >= 2"));
        }
        if let DriftNd::Constant(a) = &drift {
            if a.len() != d {
                return Err(Error::config(format!(
                    "drift has {} components, tensor is {d}x{d}",
                    a.len()
                )));
            }
        }
        let factor = factor_diffusion(&sigma)?;
        Ok(Self {
            drift,
            sigma,
            factor,
        })
    }

    /// Uses a caller-supplied factor (e.g. an upper-triangular one); it must
    /// reproduce `sigma` to 1e-12 relative.
    pub fn with_factor(drift: DriftNd, factor: Matrix) -> Result<Self> {
        let sigma = factor.gram();
        let mut model = Self::new(drift, sigma)?;
        model.factor = factor;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn factor(&self) -> &Matrix {
        &self.factor
    }

    /// `n^T sigma n` for the inward normal `n = e_1`.
    pub fn sigma_n(&self) -> f64 {
        self.sigma[(0, 0)]
    }

    pub fn drift_field(&self) -> &DriftNd {
        &self.drift
    }

    #[inline]
    pub fn drift(&self, x: &[f64], t: f64, out: &mut [f64]) {
        match &self.drift {
            DriftNd::Constant(a) => out.copy_from_slice(a),
            DriftNd::Custom { value, .. } => value(x, t, out),
        }
    }

    pub fn constant_drift(&self) -> Option<&[f64]> {
        match &self.drift {
            DriftNd::Constant(a) => Some(a),
            DriftNd::Custom { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn drift_families() {
        let c = Field1D::from_tag("constant", &[-1.0]).unwrap();
        assert_eq!(c.eval(0.7, 0.5), -1.0);
        let z = Field1D::from_tag("zero", &[]).unwrap();
        assert_eq!(z.eval(3.0, 9.0), 0.0);
        let l = Field1D::from_tag("linear", &[2.0]).unwrap();
        assert!((l.eval(0.3, 42.0) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn unknown_family_is_config_error() {
        assert!(matches!(
            Field1D::from_tag("cubic", &[1.0]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Field1D::from_tag("constant", &[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn custom_derivative_by_central_difference() {
        let f = Field1D::custom("quad", |x, _| 1.0 + x * x);
        assert!((f.dx(0.5, 0.0) - 1.0).abs() < 1e-8);
        assert_eq!(Field1D::Linear { c0: 1.0, c1: 0.25 }.dx(3.0, 0.0), 0.25);
    }

    #[test]
    fn ellipticity_is_validated() {
        assert!(
            CoefficientModel1D::new(Field1D::Constant(0.0), Field1D::Constant(0.5), 1.0).is_err()
        );
        assert!(CoefficientModel1D::new(
            Field1D::Constant(0.0),
            Field1D::Linear { c0: 1.0, c1: -0.1 },
            0.5
        )
        .is_err());
    }

    #[test]
    fn anisotropic_tensor_factor() {
        let sigma = Matrix::from_rows(&[vec![0.25, 0.4], vec![0.4, 1.0]]).unwrap();
        let b = factor_diffusion(&sigma).unwrap();
        let g = b.gram();
        for i in 0..2 {
            for j in 0..2 {
                assert!((g[(i, j)] - sigma[(i, j)]).abs() <= 1e-12);
            }
        }
        let upper = Matrix::from_rows(&[vec![0.3, 0.4], vec![0.0, 1.0]]).unwrap();
        let g = upper.gram();
        for i in 0..2 {
            for j in 0..2 {
                assert!((g[(i, j)] - sigma[(i, j)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn identity_and_diagonal_factors() {
        assert_eq!(
            factor_diffusion(&Matrix::identity(3)).unwrap(),
            Matrix::identity(3)
        );
        let d = Matrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 9.0]]).unwrap();
        let b = factor_diffusion(&d).unwrap();
        assert_eq!(
            b,
            Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap()
        );
    }

    #[test]
    fn non_spd_names_pivot() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        match factor_diffusion(&m) {
            Err(Error::Domain(msg)) => assert!(msg.contains("pivot 1"), "{msg}"),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn sigma_stays_above_floor(x in 0.0f64..100.0, t in 0.0f64..10.0, c0 in 0.1f64..5.0, c1 in 0.0f64..3.0) {
            let model = CoefficientModel1D::new(
                Field1D::Constant(0.0),
                Field1D::Linear { c0, c1 },
                c0,
            ).unwrap();
            prop_assert!(model.sigma(x, t) >= model.sigma_min());
            let cm = CoefficientModel1D::constant(-1.0, c0).unwrap();
            prop_assert!(cm.sigma(x, t) >= cm.sigma_min());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn cholesky_reconstructs(entries in proptest::collection::vec(-2.0f64..2.0, 9), eps in 0.01f64..1.0) {
            let m = Matrix::from_rows(&[entries[0..3].to_vec(), entries[3..6].to_vec(), entries[6..9].to_vec()]).unwrap();
            let mut sigma = m.gram();
            for i in 0..3 { sigma[(i, i)] += eps; }
            let b = factor_diffusion(&sigma).unwrap();
            let g = b.gram();
            let scale = sigma.max_abs();
            for i in 0..3 { for j in 0..3 {
                prop_assert!((g[(i, j)] - sigma[(i, j)]).abs() <= 1e-12 * scale);
            }}
        }
    }
}
