//! Parametrized surfaces in 3-space.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartKind {
    /// `(u, v, 0)`.
    Flat,
    /// Round torus with center radius `big_r` and tube radius `r`; `v = π` is the inner equator.
    Torus { big_r: f64, r: f64 },
    /// Ellipsoid of revolution `(a cos u sin v, a sin u sin v, c cos v)`; `v = π/2` is the equator.
    Ellipsoid { a: f64, c: f64 },
}

/// First and second partial derivatives of the embedding at one parameter pair.
#[derive(Clone, Copy, Debug)]
pub struct ChartJet {
    pub p: Vector3<f64>,
    pub pu: Vector3<f64>,
    pub pv: Vector3<f64>,
    pub puu: Vector3<f64>,
    pub puv: Vector3<f64>,
    pub pvv: Vector3<f64>,
}

/// An embedding `(u, v) ↦ R·P(u, v) + t` of a model surface.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceChart {
    pub kind: ChartKind,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl SurfaceChart {
    pub fn flat() -> Self {
        Self::from_kind(ChartKind::Flat)
    }

    pub fn torus(big_r: f64, r: f64) -> Result<Self> {
        if !(r > 0.0 && big_r > r && big_r.is_finite()) {
            return Err(Error::Precondition(format!(
                "torus needs 0 < r < R, got R={big_r}, r={r}"
            )));
        }
        Ok(Self::from_kind(ChartKind::Torus { big_r, r }))
    }

    pub fn ellipsoid(a: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && c > 0.0 && a.is_finite() && c.is_finite()) {
            return Err(Error::Precondition(format!(
                "ellipsoid needs positive semi-axes, got a={a}, c={c}"
            )));
        }
        Ok(Self::from_kind(ChartKind::Ellipsoid { a, c }))
    }

    fn from_kind(kind: ChartKind) -> Self {
        SurfaceChart {
            kind,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Composes the embedding with a rigid motion `x ↦ R x + t`.
    pub fn with_rigid_motion(mut self, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        self.translation = rotation * self.translation + translation;
        self.rotation = rotation * self.rotation;
        self
    }

    pub fn label(&self) -> String {
        match self.kind {
            ChartKind::Flat => "flat".into(),
            ChartKind::Torus { big_r, r } => format!("torus(R={big_r},r={r})"),
            ChartKind::Ellipsoid { a, c } => format!("ellipsoid(a={a},c={c})"),
        }
    }

    pub fn point(&self, u: f64, v: f64) -> Vector3<f64> {
        self.rotation * self.model_point(u, v) + self.translation
    }

    fn model_point(&self, u: f64, v: f64) -> Vector3<f64> {
        match self.kind {
            ChartKind::Flat => Vector3::new(u, v, 0.0),
            ChartKind::Torus { big_r, r } => {
                let w = big_r + r * v.cos();
                Vector3::new(w * u.cos(), w * u.sin(), r * v.sin())
            }
            ChartKind::Ellipsoid { a, c } => {
                Vector3::new(a * u.cos() * v.sin(), a * u.sin() * v.sin(), c * v.cos())
            }
        }
    }

    pub fn jet(&self, u: f64, v: f64) -> ChartJet {
        let (su, cu, sv, cv) = (u.sin(), u.cos(), v.sin(), v.cos());
        let z = Vector3::zeros();
        let (pu, pv, puu, puv, pvv) = match self.kind {
            ChartKind::Flat => (Vector3::x(), Vector3::y(), z, z, z),
            ChartKind::Torus { big_r, r } => {
                let w = big_r + r * cv;
                (
                    Vector3::new(-w * su, w * cu, 0.0),
                    Vector3::new(-r * sv * cu, -r * sv * su, r * cv),
                    Vector3::new(-w * cu, -w * su, 0.0),
                    Vector3::new(r * sv * su, -r * sv * cu, 0.0),
                    Vector3::new(-r * cv * cu, -r * cv * su, -r * sv),
                )
            }
            ChartKind::Ellipsoid { a, c } => (
                Vector3::new(-a * su * sv, a * cu * sv, 0.0),
                Vector3::new(a * cu * cv, a * su * cv, -c * sv),
                Vector3::new(-a * cu * sv, -a * su * sv, 0.0),
                Vector3::new(-a * su * cv, a * cu * cv, 0.0),
                Vector3::new(-a * cu * sv, -a * su * sv, -c * cv),
            ),
        };
        let r = &self.rotation;
        ChartJet {
            p: self.point(u, v),
            pu: r * pu,
            pv: r * pv,
            puu: r * puu,
            puv: r * puv,
            pvv: r * pvv,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn charts() -> Vec<SurfaceChart> {
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -1.1, 2.0).into_inner();
        vec![
            SurfaceChart::flat(),
            SurfaceChart::torus(2.0, 0.5).unwrap(),
            SurfaceChart::ellipsoid(1.0, 0.5).unwrap(),
            SurfaceChart::ellipsoid(1.0, 0.5)
                .unwrap()
                .with_rigid_motion(rot, Vector3::new(1.0, 2.0, 3.0)),
        ]
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        for chart in charts() {
            for _ in 0..100 {
                let u = rng.random_range(0.0..std::f64::consts::TAU);
                let v = rng.random_range(0.2..3.0);
                let j = chart.jet(u, v);
                let du = (chart.point(u + h, v) - chart.point(u - h, v)) / (2.0 * h);
                let dv = (chart.point(u, v + h) - chart.point(u, v - h)) / (2.0 * h);
                assert!((du - j.pu).norm() < 1e-5);
                assert!((dv - j.pv).norm() < 1e-5);
                let juu = (chart.jet(u + h, v).pu - chart.jet(u - h, v).pu) / (2.0 * h);
                let juv = (chart.jet(u, v + h).pu - chart.jet(u, v - h).pu) / (2.0 * h);
                let jvv = (chart.jet(u, v + h).pv - chart.jet(u, v - h).pv) / (2.0 * h);
                assert!((juu - j.puu).norm() < 1e-5);
                assert!((juv - j.puv).norm() < 1e-5);
                assert!((jvv - j.pvv).norm() < 1e-5);
            }
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(SurfaceChart::torus(0.5, 1.0).is_err());
        assert!(SurfaceChart::ellipsoid(0.0, 1.0).is_err());
    }
}
