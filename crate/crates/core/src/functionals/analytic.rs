//! Closed-form test functions with known critical structure.

use crate::error::{Error, Result};
use crate::model::{Functional, FunctionalHandle, Matrix, Vector};

/// `Σ_{i ≥ neg} s_i x_i² − Σ_{i < neg} s_i x_i²`. Negative directions come first.
#[derive(Clone, Debug)]
pub struct QuadraticSaddle {
    neg: usize,
    scales: Vec<f64>,
}

impl Functional for QuadraticSaddle {
    fn dim(&self) -> usize {
        self.scales.len()
    }
    fn label(&self) -> String {
        format!(
            "quadratic_saddle(neg={},pos={})",
            self.neg,
            self.scales.len() - self.neg
        )
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(self
            .scales
            .iter()
            .enumerate()
            .map(|(i, s)| self.sign(i) * s * x[i] * x[i])
            .sum())
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(Vector::from_fn(self.dim(), |i, _| {
            2.0 * self.sign(i) * self.scales[i] * x[i]
        }))
    }
    fn hessian(&self, _x: &Vector) -> Result<Matrix> {
        let d = Vector::from_fn(self.dim(), |i, _| 2.0 * self.sign(i) * self.scales[i]);
        Ok(Matrix::from_diagonal(&d))
    }
}

impl QuadraticSaddle {
    fn sign(&self, i: usize) -> f64 {
        if i < self.neg {
            -1.0
        } else {
            1.0
        }
    }
}

pub fn make_quadratic_saddle(neg: usize, pos: usize, scales: &[f64]) -> Result<FunctionalHandle> {
    if neg + pos == 0 {
        return Err(Error::Precondition("quadratic saddle needs neg+pos >= 1".into()));
    }
    let scales = if scales.is_empty() {
        vec![1.0; neg + pos]
    } else {
        scales.to_vec()
    };
    if scales.len() != neg + pos {
        return Err(Error::DimensionMismatch {
            expected: neg + pos,
            found: scales.len(),
        });
    }
    if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Precondition("quadratic saddle scales must be positive".into()));
    }
    Ok(FunctionalHandle::new(QuadraticSaddle { neg, scales }))
}

/// `(x²−1)² + 5y²`.
#[derive(Clone, Debug)]
pub struct DoubleWell;

impl Functional for DoubleWell {
    fn dim(&self) -> usize {
        2
    }
    fn label(&self) -> String {
        "double_well".into()
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        let a = x[0] * x[0] - 1.0;
        Ok(a * a + 5.0 * x[1] * x[1])
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(Vector::from_vec(vec![
            4.0 * x[0] * (x[0] * x[0] - 1.0),
            10.0 * x[1],
        ]))
    }
    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        Ok(Matrix::from_row_slice(
            2,
            2,
            &[12.0 * x[0] * x[0] - 4.0, 0.0, 0.0, 10.0],
        ))
    }
}

pub fn make_double_well() -> FunctionalHandle {
    FunctionalHandle::new(DoubleWell)
}

/// `x³ − 3xy² + confine·(x²+y²)² + c·x`.
#[derive(Clone, Debug)]
pub struct MonkeySaddle {
    pub confine: f64,
    pub c: f64,
}

impl Functional for MonkeySaddle {
    fn dim(&self) -> usize {
        2
    }
    fn label(&self) -> String {
        format!("monkey_saddle(confine={},c={})", self.confine, self.c)
    }
    fn value(&self, p: &Vector) -> Result<f64> {
        let (x, y) = (p[0], p[1]);
        let r2 = x * x + y * y;
        Ok(x * x * x - 3.0 * x * y * y + self.confine * r2 * r2 + self.c * x)
    }
    fn gradient(&self, p: &Vector) -> Result<Vector> {
        let (x, y) = (p[0], p[1]);
        let r2 = x * x + y * y;
        Ok(Vector::from_vec(vec![
            3.0 * x * x - 3.0 * y * y + 4.0 * self.confine * r2 * x + self.c,
            -6.0 * x * y + 4.0 * self.confine * r2 * y,
        ]))
    }
    fn hessian(&self, p: &Vector) -> Result<Matrix> {
        let (x, y) = (p[0], p[1]);
        let k = self.confine;
        let r2 = x * x + y * y;
        let hxx = 6.0 * x + k * (4.0 * r2 + 8.0 * x * x);
        let hyy = -6.0 * x + k * (4.0 * r2 + 8.0 * y * y);
        let hxy = -6.0 * y + 8.0 * k * x * y;
        Ok(Matrix::from_row_slice(2, 2, &[hxx, hxy, hxy, hyy]))
    }
}

pub fn make_monkey_saddle(confine: f64) -> Result<FunctionalHandle> {
    make_tilted_monkey_saddle(confine, 0.0)
}

pub fn make_tilted_monkey_saddle(confine: f64, c: f64) -> Result<FunctionalHandle> {
    if !(confine >= 0.0 && confine.is_finite() && c.is_finite()) {
        return Err(Error::Precondition(
            "monkey saddle needs finite confine >= 0".into(),
        ));
    }
    Ok(FunctionalHandle::new(MonkeySaddle { confine, c }))
}

/// `(x²−1)² + (y²−1)²`: a maximum of index 2 at the origin, four index-1
/// saddles at `(±1,0)`, `(0,±1)` and minima at `(±1,±1)`.
#[derive(Clone, Debug)]
pub struct FourWell;

impl Functional for FourWell {
    fn dim(&self) -> usize {
        2
    }
    fn label(&self) -> String {
        "four_well".into()
    }
    fn value(&self, p: &Vector) -> Result<f64> {
        let a = p[0] * p[0] - 1.0;
        let b = p[1] * p[1] - 1.0;
        Ok(a * a + b * b)
    }
    fn gradient(&self, p: &Vector) -> Result<Vector> {
        Ok(Vector::from_vec(vec![
            4.0 * p[0] * (p[0] * p[0] - 1.0),
            4.0 * p[1] * (p[1] * p[1] - 1.0),
        ]))
    }
    fn hessian(&self, p: &Vector) -> Result<Matrix> {
        Ok(Matrix::from_row_slice(
            2,
            2,
            &[12.0 * p[0] * p[0] - 4.0, 0.0, 0.0, 12.0 * p[1] * p[1] - 4.0],
        ))
    }
}

pub fn make_four_well() -> FunctionalHandle {
    FunctionalHandle::new(FourWell)
}

/// `(x²−1)² + y² + A·exp(−(x²+y²)/w²)`. For `A = 1`, `w = 0.5` the origin is
/// an index-2 maximum at level 2 sitting on the straight path between the
/// minima, and two index-1 saddles at `(0, ±0.5887)` lie lower, at ≈ 1.5966.
#[derive(Clone, Debug)]
pub struct PlantedSaddle {
    pub amplitude: f64,
    pub width: f64,
}

impl Functional for PlantedSaddle {
    fn dim(&self) -> usize {
        2
    }
    fn label(&self) -> String {
        format!("planted_saddle(A={},w={})", self.amplitude, self.width)
    }
    fn value(&self, p: &Vector) -> Result<f64> {
        let (x, y) = (p[0], p[1]);
        let a = x * x - 1.0;
        Ok(a * a + y * y + self.bump(x, y))
    }
    fn gradient(&self, p: &Vector) -> Result<Vector> {
        let (x, y) = (p[0], p[1]);
        let e = self.bump(x, y);
        let k = 2.0 / (self.width * self.width);
        Ok(Vector::from_vec(vec![
            4.0 * x * (x * x - 1.0) - k * x * e,
            2.0 * y - k * y * e,
        ]))
    }
    fn hessian(&self, p: &Vector) -> Result<Matrix> {
        let (x, y) = (p[0], p[1]);
        let e = self.bump(x, y);
        let k = 2.0 / (self.width * self.width);
        let hxx = 12.0 * x * x - 4.0 + e * (k * k * x * x - k);
        let hyy = 2.0 + e * (k * k * y * y - k);
        let hxy = e * k * k * x * y;
        Ok(Matrix::from_row_slice(2, 2, &[hxx, hxy, hxy, hyy]))
    }
}

impl PlantedSaddle {
    fn bump(&self, x: f64, y: f64) -> f64 {
        self.amplitude * (-(x * x + y * y) / (self.width * self.width)).exp()
    }
}

pub fn make_planted_saddle(amplitude: f64, width: f64) -> Result<FunctionalHandle> {
    if !(amplitude.is_finite() && width > 0.0 && width.is_finite()) {
        return Err(Error::Precondition(
            "planted saddle needs finite amplitude and width > 0".into(),
        ));
    }
    Ok(FunctionalHandle::new(PlantedSaddle { amplitude, width }))
}

/// `Σ x_i⁴`, the default regularizer of the analytic problems.
#[derive(Clone, Debug)]
pub struct QuarticSum(pub usize);

impl Functional for QuarticSum {
    fn dim(&self) -> usize {
        self.0
    }
    fn label(&self) -> String {
        "sum_x4".into()
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(x.iter().map(|v| v.powi(4)).sum())
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(x.map(|v| 4.0 * v * v * v))
    }
    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        Ok(Matrix::from_diagonal(&x.map(|v| 12.0 * v * v)))
    }
}

/// The zero functional, for families with `G ≡ 0`.
#[derive(Clone, Debug)]
pub struct Zero(pub usize);

impl Functional for Zero {
    fn dim(&self) -> usize {
        self.0
    }
    fn label(&self) -> String {
        "zero".into()
    }
    fn value(&self, _x: &Vector) -> Result<f64> {
        Ok(0.0)
    }
    fn gradient(&self, _x: &Vector) -> Result<Vector> {
        Ok(Vector::zeros(self.0))
    }
    fn hessian(&self, _x: &Vector) -> Result<Matrix> {
        Ok(Matrix::zeros(self.0, self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{grad_check, hessian_check, Point};

    fn v(x: &[f64]) -> Vector {
        Vector::from_row_slice(x)
    }

    #[test]
    fn quadratic_saddle_normal_form() {
        let f = make_quadratic_saddle(1, 1, &[1.0, 1.0]).unwrap();
        assert_eq!(f.value(&v(&[1.0, 1.0])).unwrap(), 0.0);
        let h = f.hessian(&v(&[0.0, 0.0])).unwrap();
        assert_eq!(h, Matrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 2.0]));
        assert!(make_quadratic_saddle(0, 0, &[]).is_err());
        assert!(make_quadratic_saddle(1, 1, &[1.0, -1.0]).is_err());
    }

    #[test]
    fn double_well_values() {
        let f = make_double_well();
        assert_eq!(f.value(&v(&[1.0, 0.0])).unwrap(), 0.0);
        assert_eq!(f.value(&v(&[-1.0, 0.0])).unwrap(), 0.0);
        assert_eq!(f.value(&v(&[0.0, 0.0])).unwrap(), 1.0);
        let h = f.hessian(&v(&[0.0, 0.0])).unwrap();
        assert_eq!(h, Matrix::from_row_slice(2, 2, &[-4.0, 0.0, 0.0, 10.0]));
        let p = Point::new(vec![0.5, 0.2]).unwrap();
        assert!(grad_check(&f, &p, 1e-5).unwrap() < 1e-6);
        let g = f.gradient(p.as_vector()).unwrap();
        assert!((g[0] - 4.0 * 0.5 * (0.25 - 1.0)).abs() < 1e-15);
        assert!((g[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn monkey_saddle_degenerate_origin() {
        let f = make_monkey_saddle(0.0).unwrap();
        let o = v(&[0.0, 0.0]);
        assert_eq!(f.gradient(&o).unwrap().norm(), 0.0);
        assert_eq!(f.hessian(&o).unwrap(), Matrix::zeros(2, 2));
    }

    #[test]
    fn tilted_monkey_critical_points() {
        // 3x² − 3y² + c = 0 and −6xy = 0.
        let f = make_tilted_monkey_saddle(0.0, -0.03).unwrap();
        for x in [0.1, -0.1] {
            let p = v(&[x, 0.0]);
            assert!(f.gradient(&p).unwrap().norm() < 1e-15);
            let h = f.hessian(&p).unwrap();
            assert!((h[(0, 0)] - 6.0 * x).abs() < 1e-15);
            assert!((h[(1, 1)] + 6.0 * x).abs() < 1e-15);
        }
        let f = make_tilted_monkey_saddle(0.0, 0.03).unwrap();
        for y in [0.1, -0.1] {
            assert!(f.gradient(&v(&[0.0, y])).unwrap().norm() < 1e-15);
        }
        // Grid search confirms there are no others nearby.
        let mut hits = 0;
        let n = 400;
        for i in 0..=n {
            for j in 0..=n {
                let p = v(&[-0.2 + 0.4 * i as f64 / n as f64, -0.2 + 0.4 * j as f64 / n as f64]);
                if f.gradient(&p).unwrap().norm() < 1e-3 {
                    assert!(p[0].abs() < 0.01 && (p[1].abs() - 0.1).abs() < 0.01);
                    hits += 1;
                }
            }
        }
        assert!(hits >= 2);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let handles = [
            make_quadratic_saddle(2, 1, &[1.0, 2.0, 3.0]).unwrap(),
            make_double_well(),
            make_tilted_monkey_saddle(1.3, 0.2).unwrap(),
            make_four_well(),
            FunctionalHandle::new(QuarticSum(3)),
        ];
        for f in &handles {
            let x: Vec<f64> = (0..f.dim()).map(|i| 0.3 - 0.25 * i as f64).collect();
            let p = Point::new(x).unwrap();
            assert!(grad_check(f, &p, 1e-5).unwrap() < 1e-6, "{}", f.label());
            assert!(hessian_check(f, &p, 1e-5).unwrap() < 1e-6, "{}", f.label());
        }
    }
}
