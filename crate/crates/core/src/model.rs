//! Domain types shared by every other module: points, functionals with
//! their derivative evaluators, the additive viscous family `F + σ²G`, and
//! the entropy bound that drives σ selection.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Hard cap on the coordinate dimension; Morse data needs a dense
/// eigendecomposition of the Hessian.
pub const MAX_DIM: usize = 2000;

/// `e^{-e}`: below this threshold `log log (1/σ)` is strictly positive.
pub fn entropy_sigma_max() -> f64 {
    (-std::f64::consts::E).exp()
}

/// A validated point of the coordinate space: finite coordinates, `1 <= dim <= MAX_DIM`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point {
    coords: Vector,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::from_vector(Vector::from_vec(coords))
    }

    pub fn from_vector(coords: Vector) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidPoint("empty coordinate vector".into()));
        }
        if coords.len() > MAX_DIM {
            return Err(Error::InvalidPoint(format!(
                "dimension {} exceeds cap {MAX_DIM}",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint(format!(
                "coordinate {i} is not finite ({})",
                coords[i]
            )));
        }
        Ok(Point { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_vector(&self) -> &Vector {
        &self.coords
    }

    pub fn into_vector(self) -> Vector {
        self.coords
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.coords.iter().copied().collect()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (&self.coords - &other.coords).norm()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.to_vec()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point{:?}", self.coords.as_slice())
    }
}

/// Raw evaluation contract. Implementations must be pure: the same input
/// always gives the same output, with no interior mutation.
pub trait Functional: Send + Sync {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    fn value(&self, x: &Vector) -> Result<f64>;
    fn gradient(&self, x: &Vector) -> Result<Vector>;
    fn hessian(&self, x: &Vector) -> Result<Matrix>;
}

/// Shareable handle around a [`Functional`] that checks dimensions and
/// finiteness of every output and returns symmetric Hessians.
#[derive(Clone)]
pub struct FunctionalHandle {
    inner: Arc<dyn Functional>,
}

impl fmt::Debug for FunctionalHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FunctionalHandle({})", self.label())
    }
}

impl FunctionalHandle {
    pub fn new<F: Functional + 'static>(f: F) -> Self {
        FunctionalHandle { inner: Arc::new(f) }
    }

    pub fn from_arc(inner: Arc<dyn Functional>) -> Self {
        FunctionalHandle { inner }
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn label(&self) -> String {
        self.inner.label()
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn non_finite(&self, x: &Vector) -> Error {
        Error::NonFinite {
            label: self.label(),
            x: x.iter().copied().collect(),
        }
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        let v = self.inner.value(x)?;
        if !v.is_finite() {
            return Err(self.non_finite(x));
        }
        Ok(v)
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        let g = self.inner.gradient(x)?;
        if g.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: g.len(),
            });
        }
        if g.iter().any(|c| !c.is_finite()) {
            return Err(self.non_finite(x));
        }
        Ok(g)
    }

    pub fn hessian(&self, x: &Vector) -> Result<Matrix> {
        self.check_dim(x)?;
        let h = self.inner.hessian(x)?;
        if h.nrows() != self.dim() || h.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: h.nrows(),
            });
        }
        if h.iter().any(|c| !c.is_finite()) {
            return Err(self.non_finite(x));
        }
        Ok(symmetrize(h))
    }
}

pub(crate) fn symmetrize(h: Matrix) -> Matrix {
    let t = h.transpose();
    (h + t) * 0.5
}

/// A σ-indexed family of functionals. Additive families `F + σ²G` are the
/// common case; families that are viscous in some other way (exponent
/// regularization) implement this directly.
pub trait SigmaFamily: Send + Sync {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    fn value(&self, sigma: f64, x: &Vector) -> Result<f64>;
    fn gradient(&self, sigma: f64, x: &Vector) -> Result<Vector>;
    fn hessian(&self, sigma: f64, x: &Vector) -> Result<Matrix>;

    /// The quantity `G` whose multiple `σ²G(x)` is tested against the entropy
    /// set. For families that are not additive in `σ²` this is the effective
    /// regularizer `(F_σ − F_0)/σ²`, which is zero at `σ = 0` by convention.
    fn regularizer_value(&self, sigma: f64, x: &Vector) -> Result<f64> {
        if sigma == 0.0 {
            return Ok(0.0);
        }
        Ok((self.value(sigma, x)? - self.value(0.0, x)?) / (sigma * sigma))
    }
}

/// Freezes a family at `sigma` into a standalone functional.
pub fn at_sigma(family: Arc<dyn SigmaFamily>, sigma: f64) -> FunctionalHandle {
    FunctionalHandle::new(FrozenSigma { family, sigma })
}

/// A single functional seen as a σ-family that ignores σ.
#[derive(Clone, Debug)]
pub struct FixedFamily(pub FunctionalHandle);

impl SigmaFamily for FixedFamily {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn label(&self) -> String {
        self.0.label()
    }
    fn value(&self, _sigma: f64, x: &Vector) -> Result<f64> {
        self.0.value(x)
    }
    fn gradient(&self, _sigma: f64, x: &Vector) -> Result<Vector> {
        self.0.gradient(x)
    }
    fn hessian(&self, _sigma: f64, x: &Vector) -> Result<Matrix> {
        self.0.hessian(x)
    }
    fn regularizer_value(&self, _sigma: f64, _x: &Vector) -> Result<f64> {
        Ok(0.0)
    }
}

/// `F_σ = F + σ²G`.
#[derive(Clone, Debug)]
pub struct ViscousFamily {
    pub base: FunctionalHandle,
    pub regularizer: FunctionalHandle,
}

impl ViscousFamily {
    pub fn new(base: FunctionalHandle, regularizer: FunctionalHandle) -> Result<Self> {
        if base.dim() != regularizer.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: regularizer.dim(),
            });
        }
        Ok(ViscousFamily { base, regularizer })
    }

    /// `∂_σ F_σ(x) = 2σ G(x)`.
    pub fn sigma_derivative(&self, sigma: f64, x: &Vector) -> Result<f64> {
        Ok(2.0 * sigma * self.regularizer.value(x)?)
    }

    /// Returns `(F(x), G(x))`.
    pub fn split(&self, x: &Vector) -> Result<(f64, f64)> {
        Ok((self.base.value(x)?, self.regularizer.value(x)?))
    }

    /// The family frozen at `sigma`, as a standalone functional.
    pub fn at(&self, sigma: f64) -> FunctionalHandle {
        at_sigma(Arc::new(self.clone()), sigma)
    }
}

impl SigmaFamily for ViscousFamily {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn label(&self) -> String {
        format!("{} + σ²·{}", self.base.label(), self.regularizer.label())
    }

    fn value(&self, sigma: f64, x: &Vector) -> Result<f64> {
        let f = self.base.value(x)?;
        if sigma == 0.0 {
            return Ok(f);
        }
        Ok(f + sigma * sigma * self.regularizer.value(x)?)
    }

    fn gradient(&self, sigma: f64, x: &Vector) -> Result<Vector> {
        let g = self.base.gradient(x)?;
        if sigma == 0.0 {
            return Ok(g);
        }
        Ok(g + self.regularizer.gradient(x)? * (sigma * sigma))
    }

    fn hessian(&self, sigma: f64, x: &Vector) -> Result<Matrix> {
        let h = self.base.hessian(x)?;
        if sigma == 0.0 {
            return Ok(h);
        }
        Ok(h + self.regularizer.hessian(x)? * (sigma * sigma))
    }

    fn regularizer_value(&self, _sigma: f64, x: &Vector) -> Result<f64> {
        self.regularizer.value(x)
    }
}

struct FrozenSigma {
    family: Arc<dyn SigmaFamily>,
    sigma: f64,
}

impl Functional for FrozenSigma {
    fn dim(&self) -> usize {
        self.family.dim()
    }
    fn label(&self) -> String {
        format!("({})[σ={}]", self.family.label(), self.sigma)
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        self.family.value(self.sigma, x)
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.family.gradient(self.sigma, x)
    }
    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        self.family.hessian(self.sigma, x)
    }
}

/// `F_σ(x) = F(x) + σ²G(x)` with full input validation.
pub fn evaluate_viscous(family: &ViscousFamily, sigma: f64, x: &Point) -> Result<f64> {
    if !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be finite, got {sigma}")));
    }
    if x.dim() != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            found: x.dim(),
        });
    }
    family.value(sigma, x.as_vector())
}

/// Which side of the entropy condition to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyForm {
    /// `1/(σ log(1/σ) loglog(1/σ))`, the bound on `β'(σ)`.
    Derivative,
    /// `1/(log(1/σ) loglog(1/σ))`, the bound on `σ²G(x)` defining the entropy set.
    Set,
}

pub fn entropy_bound(sigma: f64, form: EntropyForm) -> Result<f64> {
    let max = entropy_sigma_max();
    if !(sigma > 0.0 && sigma < max) {
        return Err(Error::Domain(format!(
            "entropy bound needs 0 < sigma < e^(-e) = {max:.6}, got {sigma}"
        )));
    }
    let l = (1.0 / sigma).ln();
    let ll = l.ln();
    let set = 1.0 / (l * ll);
    Ok(match form {
        EntropyForm::Set => set,
        EntropyForm::Derivative => set / sigma,
    })
}

/// `σ²G(x) − 1/(log(1/σ) loglog(1/σ))`; non-positive iff `x` lies in the entropy set.
pub fn entropy_residual(sigma: f64, reg_value: f64) -> Result<f64> {
    Ok(sigma * sigma * reg_value - entropy_bound(sigma, EntropyForm::Set)?)
}

fn check_step(h: f64) -> Result<()> {
    if !(h > 0.0 && h <= 1e-2) {
        return Err(Error::Domain(format!(
            "finite-difference step must lie in (0, 1e-2], got {h}"
        )));
    }
    Ok(())
}

/// Max over coordinates of |central difference − supplied gradient|.
pub fn grad_check(handle: &FunctionalHandle, x: &Point, h: f64) -> Result<f64> {
    check_step(h)?;
    let x = x.as_vector();
    let g = handle.gradient(x)?;
    let mut worst: f64 = 0.0;
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = handle.value(&probe)?;
        probe[i] = x[i] - h;
        let fm = handle.value(&probe)?;
        probe[i] = x[i];
        worst = worst.max(((fp - fm) / (2.0 * h) - g[i]).abs());
    }
    Ok(worst)
}

/// Max entry of |central difference of the gradient − supplied Hessian|.
pub fn hessian_check(handle: &FunctionalHandle, x: &Point, h: f64) -> Result<f64> {
    check_step(h)?;
    let x = x.as_vector();
    let hess = handle.hessian(x)?;
    let mut worst: f64 = 0.0;
    let mut probe = x.clone();
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let gp = handle.gradient(&probe)?;
        probe[j] = x[j] - h;
        let gm = handle.gradient(&probe)?;
        probe[j] = x[j];
        let col = (gp - gm) / (2.0 * h);
        for i in 0..x.len() {
            worst = worst.max((col[i] - hess[(i, j)]).abs());
        }
    }
    Ok(worst)
}

/// Symmetrized central-difference Jacobian of a gradient map.
pub(crate) fn fd_hessian<G>(gradient: G, x: &Vector, h: f64) -> Result<Matrix>
where
    G: Fn(&Vector) -> Result<Vector>,
{
    let n = x.len();
    let mut hess = Matrix::zeros(n, n);
    let mut probe = x.clone();
    for j in 0..n {
        probe[j] = x[j] + h;
        let gp = gradient(&probe)?;
        probe[j] = x[j] - h;
        let gm = gradient(&probe)?;
        probe[j] = x[j];
        hess.set_column(j, &((gp - gm) / (2.0 * h)));
    }
    Ok(symmetrize(hess))
}

/// Numerical tolerances carried by the run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceProfile {
    /// Gradient norm accepted as critical.
    pub grad: f64,
    /// Gradient norm used when certifying non-degeneracy of perturbed critical sets.
    pub certify_grad: f64,
    /// Null band relative to the spectral norm of the Hessian.
    pub null_rel: f64,
    /// Absolute floor of the null band.
    pub null_abs: f64,
    /// A point refined to gradient norm `g` is treated as degenerate when its
    /// smallest |eigenvalue| is below `gap_factor·√g`.
    pub gap_factor: f64,
    /// Margin used by the non-triviality check.
    pub nontrivial_margin: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        ToleranceProfile {
            grad: 1e-9,
            certify_grad: 1e-12,
            null_rel: 1e-7,
            null_abs: 1e-12,
            gap_factor: 10.0,
            nontrivial_margin: 1e-3,
        }
    }
}

impl ToleranceProfile {
    pub fn null_band(&self, spectral_norm: f64) -> f64 {
        (self.null_rel * spectral_norm).max(self.null_abs)
    }

    /// Near a degenerate critical point a residual gradient `g` leaves the
    /// iterate `O(√g)` away from it, where the Hessian is itself `O(√g)`.
    pub fn degeneracy_gap(&self, grad_tol: f64) -> f64 {
        (self.gap_factor * grad_tol.sqrt()).max(self.null_abs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct SumSquares(usize);
    impl Functional for SumSquares {
        fn dim(&self) -> usize {
            self.0
        }
        fn label(&self) -> String {
            "sum_squares".into()
        }
        fn value(&self, x: &Vector) -> Result<f64> {
            Ok(x.norm_squared())
        }
        fn gradient(&self, x: &Vector) -> Result<Vector> {
            Ok(x * 2.0)
        }
        fn hessian(&self, _x: &Vector) -> Result<Matrix> {
            Ok(Matrix::identity(self.0, self.0) * 2.0)
        }
    }

    struct Constant(usize, f64);
    impl Functional for Constant {
        fn dim(&self) -> usize {
            self.0
        }
        fn label(&self) -> String {
            "constant".into()
        }
        fn value(&self, _x: &Vector) -> Result<f64> {
            Ok(self.1)
        }
        fn gradient(&self, _x: &Vector) -> Result<Vector> {
            Ok(Vector::zeros(self.0))
        }
        fn hessian(&self, _x: &Vector) -> Result<Matrix> {
            Ok(Matrix::zeros(self.0, self.0))
        }
    }

    struct Cube;
    impl Functional for Cube {
        fn dim(&self) -> usize {
            1
        }
        fn label(&self) -> String {
            "cube".into()
        }
        fn value(&self, x: &Vector) -> Result<f64> {
            Ok(x[0].powi(3))
        }
        fn gradient(&self, x: &Vector) -> Result<Vector> {
            Ok(Vector::from_element(1, 3.0 * x[0] * x[0]))
        }
        fn hessian(&self, x: &Vector) -> Result<Matrix> {
            Ok(Matrix::from_element(1, 1, 6.0 * x[0]))
        }
    }

    struct Nan;
    impl Functional for Nan {
        fn dim(&self) -> usize {
            2
        }
        fn label(&self) -> String {
            "nan".into()
        }
        fn value(&self, _x: &Vector) -> Result<f64> {
            Ok(f64::NAN)
        }
        fn gradient(&self, _x: &Vector) -> Result<Vector> {
            Ok(Vector::zeros(2))
        }
        fn hessian(&self, _x: &Vector) -> Result<Matrix> {
            Ok(Matrix::zeros(2, 2))
        }
    }

    fn sq_plus_const() -> ViscousFamily {
        ViscousFamily::new(
            FunctionalHandle::new(SumSquares(2)),
            FunctionalHandle::new(Constant(2, 1.0)),
        )
        .unwrap()
    }

    #[test]
    fn point_rejects_non_finite_and_empty() {
        assert!(Point::new(vec![1.0, f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert!(Point::new(vec![]).is_err());
        assert_eq!(Point::new(vec![1.0, 2.0]).unwrap().dim(), 2);
    }

    #[test]
    fn viscous_evaluation_examples() {
        let fam = sq_plus_const();
        let x = Point::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(evaluate_viscous(&fam, 0.0, &x).unwrap(), 2.0);
        assert_eq!(evaluate_viscous(&fam, 0.5, &x).unwrap(), 2.25);
    }

    #[test]
    fn viscous_dimension_mismatch_is_hard_error() {
        let fam = sq_plus_const();
        let x = Point::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            evaluate_viscous(&fam, 0.1, &x),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_output_carries_point() {
        let fam = ViscousFamily::new(
            FunctionalHandle::new(Nan),
            FunctionalHandle::new(Constant(2, 0.0)),
        )
        .unwrap();
        let x = Point::new(vec![0.5, -0.5]).unwrap();
        match evaluate_viscous(&fam, 0.1, &x) {
            Err(Error::NonFinite { x, .. }) => assert_eq!(x, vec![0.5, -0.5]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn entropy_bound_examples() {
        // 1/(0.01·ln 100·ln ln 100), evaluated independently below.
        let l = 100f64.ln();
        let expected = 1.0 / (0.01 * l * l.ln());
        let d = entropy_bound(0.01, EntropyForm::Derivative).unwrap();
        assert!((d - expected).abs() < 1e-12);
        assert!((d - 14.219).abs() < 5e-4);
        let s = entropy_bound(0.01, EntropyForm::Set).unwrap();
        assert!((s - 0.14219).abs() < 5e-6);

        // σ = e^{-e²}: log(1/σ) = e², loglog = 2, so the bound is e^{e²}/(2e²).
        let e2 = std::f64::consts::E.powi(2);
        let sigma = (-e2).exp();
        let d = entropy_bound(sigma, EntropyForm::Derivative).unwrap();
        let oracle = e2.exp() / (2.0 * e2);
        assert!((d / oracle - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_bound_domain() {
        for s in [0.0, -0.1, 0.07, 1.0, f64::NAN] {
            let err = entropy_bound(s, EntropyForm::Derivative).unwrap_err();
            assert!(err.to_string().contains("e^(-e)"));
        }
    }

    #[test]
    fn entropy_bound_strictly_decreasing() {
        let lo = (-std::f64::consts::E.powi(2)).exp();
        let hi = entropy_sigma_max();
        let mut prev = f64::INFINITY;
        for k in 0..100 {
            let s = lo + (hi - lo) * (k as f64 + 0.5) / 100.0;
            let b = entropy_bound(s, EntropyForm::Derivative).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn grad_check_examples() {
        let h = FunctionalHandle::new(SumSquares(2));
        let x = Point::new(vec![3.0, 4.0]).unwrap();
        assert!(grad_check(&h, &x, 1e-5).unwrap() < 1e-8);
        let c = FunctionalHandle::new(Cube);
        let x = Point::new(vec![1.0]).unwrap();
        assert!(grad_check(&c, &x, 1e-4).unwrap() < 1e-6);
        assert!(hessian_check(&c, &x, 1e-4).unwrap() < 1e-6);
        assert!(grad_check(&c, &x, 0.1).is_err());
    }

    #[test]
    fn sigma_monotone_when_regularizer_nonnegative() {
        let fam = sq_plus_const();
        let x = Point::new(vec![0.3, -0.2]).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..50 {
            let v = evaluate_viscous(&fam, k as f64 * 0.02, &x).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }
}
