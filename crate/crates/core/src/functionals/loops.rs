//! Discretized loops on a parametrized surface: polygonal length, a bending
//! regularizer, and the exponent-regularized α-energy.
//!
//! A loop with `N` nodes is stored as interleaved parameter pairs
//! `(u_0, v_0, u_1, v_1, …)`. Pinned arcs keep their two end nodes outside
//! the coordinate vector, so their dimension is `2(N−2)`.

use std::f64::consts::TAU;

use nalgebra::{Matrix2, Vector2, Vector3};

use super::chart::SurfaceChart;
use crate::error::{Error, Result};
use crate::model::{fd_hessian, Functional, FunctionalHandle, Matrix, SigmaFamily, Vector};

pub const MIN_NODES: usize = 8;
const FD_STEP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum Closure {
    Closed,
    /// End nodes `(u, v)` held fixed.
    Pinned { start: (f64, f64), end: (f64, f64) },
}

#[derive(Clone, Debug)]
pub struct LoopConfig {
    pub chart: SurfaceChart,
    pub nodes: usize,
    pub closure: Closure,
}

impl LoopConfig {
    pub fn closed(chart: SurfaceChart, nodes: usize) -> Result<Self> {
        Self::new(chart, nodes, Closure::Closed)
    }

    pub fn pinned(
        chart: SurfaceChart,
        nodes: usize,
        start: (f64, f64),
        end: (f64, f64),
    ) -> Result<Self> {
        Self::new(chart, nodes, Closure::Pinned { start, end })
    }

    fn new(chart: SurfaceChart, nodes: usize, closure: Closure) -> Result<Self> {
        if nodes < MIN_NODES {
            return Err(Error::Precondition(format!(
                "loops need at least {MIN_NODES} nodes, got {nodes}"
            )));
        }
        Ok(LoopConfig {
            chart,
            nodes,
            closure,
        })
    }

    pub fn is_closed(&self) -> bool {
        self.closure == Closure::Closed
    }

    /// Number of nodes carried by the coordinate vector.
    pub fn free_nodes(&self) -> usize {
        if self.is_closed() {
            self.nodes
        } else {
            self.nodes - 2
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.free_nodes()
    }

    fn offset(&self) -> usize {
        if self.is_closed() {
            0
        } else {
            1
        }
    }

    /// All `N` parameter pairs, end nodes included.
    pub fn params(&self, x: &Vector) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.nodes);
        if let Closure::Pinned { start, .. } = self.closure {
            out.push(start);
        }
        for i in 0..self.free_nodes() {
            out.push((x[2 * i], x[2 * i + 1]));
        }
        if let Closure::Pinned { end, .. } = self.closure {
            out.push(end);
        }
        out
    }

    pub fn ambient(&self, x: &Vector) -> Vec<Vector3<f64>> {
        self.params(x)
            .into_iter()
            .map(|(u, v)| self.chart.point(u, v))
            .collect()
    }

    /// Segment vectors `P_{i+1} − P_i`; closed loops wrap around.
    fn segments(&self, pts: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        let n = pts.len();
        let count = if self.is_closed() { n } else { n - 1 };
        (0..count).map(|i| pts[(i + 1) % n] - pts[i]).collect()
    }

    /// Pulls an ambient gradient per node back to parameter coordinates.
    fn pull_back(&self, x: &Vector, ambient_grad: &[Vector3<f64>]) -> Vector {
        let params = self.params(x);
        let off = self.offset();
        let mut g = Vector::zeros(self.dim());
        for i in 0..self.free_nodes() {
            let (u, v) = params[i + off];
            let jet = self.chart.jet(u, v);
            let a = ambient_grad[i + off];
            g[2 * i] = a.dot(&jet.pu);
            g[2 * i + 1] = a.dot(&jet.pv);
        }
        g
    }

    /// One unit in-surface normal variation per free node, as orthonormal
    /// columns. Tangential node sliding is excluded.
    pub fn normal_basis(&self, x: &Vector) -> Result<Matrix> {
        let params = self.params(x);
        let pts = self.ambient(x);
        let n = pts.len();
        let off = self.offset();
        let mut q = Matrix::zeros(self.dim(), self.free_nodes());
        for i in 0..self.free_nodes() {
            let k = i + off;
            let (prev, next) = if self.is_closed() {
                ((k + n - 1) % n, (k + 1) % n)
            } else {
                (k - 1, k + 1)
            };
            let t = pts[next] - pts[prev];
            let jet = self.chart.jet(params[k].0, params[k].1);
            let nu = jet.pu.cross(&jet.pv);
            let b = nu.cross(&t);
            let jtj = Matrix2::new(
                jet.pu.dot(&jet.pu),
                jet.pu.dot(&jet.pv),
                jet.pv.dot(&jet.pu),
                jet.pv.dot(&jet.pv),
            );
            let rhs = Vector2::new(jet.pu.dot(&b), jet.pv.dot(&b));
            let w = jtj
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Degenerate(format!("singular chart at node {k}")))?;
            let norm = w.norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::DegenerateSegment { index: k });
            }
            q[(2 * i, i)] = w[0] / norm;
            q[(2 * i + 1, i)] = w[1] / norm;
        }
        Ok(q)
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
}

/// Sum that does not depend on the order of the terms, so that cyclic
/// relabelings of a loop give bit-identical energies.
fn canonical_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Closed loop at constant `v` with nodes equally spaced in `u`.
pub fn latitude_loop(nodes: usize, v: f64) -> Vector {
    let mut x = Vector::zeros(2 * nodes);
    for i in 0..nodes {
        x[2 * i] = TAU * i as f64 / nodes as f64;
        x[2 * i + 1] = v;
    }
    x
}

/// Polygonal length `Σ |P_{i+1} − P_i|` in ambient space.
#[derive(Clone, Debug)]
pub struct LoopLength(pub LoopConfig);

impl Functional for LoopLength {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn label(&self) -> String {
        format!("loop_length[{},N={}]", self.0.chart.label(), self.0.nodes)
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        self.0.check_dim(x)?;
        let segs = self.0.segments(&self.0.ambient(x));
        Ok(canonical_sum(segs.iter().map(|s| s.norm()).collect()))
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.0.check_dim(x)?;
        let pts = self.0.ambient(x);
        let n = pts.len();
        let segs = self.0.segments(&pts);
        let mut grad = vec![Vector3::zeros(); n];
        for (i, s) in segs.iter().enumerate() {
            let l = s.norm();
            if l == 0.0 {
                return Err(Error::DegenerateSegment { index: i });
            }
            let e = s / l;
            grad[(i + 1) % n] += e;
            grad[i] -= e;
        }
        Ok(self.0.pull_back(x, &grad))
    }
    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        fd_hessian(|y| self.gradient(y), x, FD_STEP)
    }
}

/// `Σ_i (1 + κ_i²)² ℓ̄_i` with `κ_i = 2 tan(θ_i/2)/ℓ̄_i`, `θ_i` the exterior
/// turning angle at node `i` and `ℓ̄_i` the mean of the adjacent segment
/// lengths. Pinned end nodes contribute half their segment with `κ = 0`.
#[derive(Clone, Debug)]
pub struct LoopBending(pub LoopConfig);

/// Bending term of one node and its partials with respect to the incoming
/// and outgoing segment vectors.
fn node_bending(e1: &Vector3<f64>, e2: &Vector3<f64>) -> (f64, Vector3<f64>, Vector3<f64>) {
    let l1 = e1.norm();
    let l2 = e2.norm();
    let s = l1 + l2;
    let q = l1 * l2;
    let d = e1.dot(e2);
    let qd = q + d;
    // κ² = 4 tan²(θ/2) / (s/2)², tan²(θ/2) = (q − d)/(q + d).
    let k = 16.0 * (q - d) / (qd * s * s);
    let t = (1.0 + k) * (1.0 + k) * s / 2.0;
    let kq = 32.0 * d / (qd * qd * s * s);
    let kd = -32.0 * q / (qd * qd * s * s);
    let ks = -2.0 * k / s;
    let tq = (1.0 + k) * s * kq;
    let td = (1.0 + k) * s * kd;
    let ts = (1.0 + k) * s * ks + (1.0 + k) * (1.0 + k) / 2.0;
    let tl1 = tq * l2 + ts;
    let tl2 = tq * l1 + ts;
    let g1 = e1 * (tl1 / l1) + e2 * td;
    let g2 = e2 * (tl2 / l2) + e1 * td;
    (t, g1, g2)
}

impl LoopBending {
    fn terms(&self, x: &Vector) -> Result<(Vec<f64>, Vec<Vector3<f64>>)> {
        self.0.check_dim(x)?;
        let pts = self.0.ambient(x);
        let n = pts.len();
        let segs = self.0.segments(&pts);
        for (i, s) in segs.iter().enumerate() {
            if s.norm() == 0.0 {
                return Err(Error::DegenerateSegment { index: i });
            }
        }
        let mut terms = Vec::with_capacity(n);
        let mut grad = vec![Vector3::zeros(); n];
        let closed = self.0.is_closed();
        let interior: Vec<usize> = if closed {
            (0..n).collect()
        } else {
            (1..n - 1).collect()
        };
        for i in interior {
            let (a, b) = if closed {
                ((i + n - 1) % n, i)
            } else {
                (i - 1, i)
            };
            let (t, g1, g2) = node_bending(&segs[a], &segs[b]);
            terms.push(t);
            // e1 = P_i − P_{i−1}, e2 = P_{i+1} − P_i.
            let prev = if closed { (i + n - 1) % n } else { i - 1 };
            let next = (i + 1) % n;
            grad[prev] -= g1;
            grad[i] += g1 - g2;
            grad[next] += g2;
        }
        if !closed {
            for (si, (a, b)) in [(0, (0, 1)), (n - 2, (n - 2, n - 1))] {
                let s = segs[si];
                let l = s.norm();
                terms.push(l / 2.0);
                let e = s / (2.0 * l);
                grad[b] += e;
                grad[a] -= e;
            }
        }
        Ok((terms, grad))
    }
}

impl Functional for LoopBending {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn label(&self) -> String {
        format!("loop_bending[{},N={}]", self.0.chart.label(), self.0.nodes)
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(canonical_sum(self.terms(x)?.0))
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        let (_, grad) = self.terms(x)?;
        Ok(self.0.pull_back(x, &grad))
    }
    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        fd_hessian(|y| self.gradient(y), x, FD_STEP)
    }
}

pub fn make_loop_length(config: LoopConfig) -> FunctionalHandle {
    FunctionalHandle::new(LoopLength(config))
}

pub fn make_loop_bending(config: LoopConfig) -> FunctionalHandle {
    FunctionalHandle::new(LoopBending(config))
}

/// `½ Σ_i ((1 + |ΔP_i/h|²)^{1+σ} − 1)·h` on a closed loop, `h = 2π/N`.
/// Viscous in the exponent rather than additive in `σ²`.
#[derive(Clone, Debug)]
pub struct AlphaFamily {
    pub config: LoopConfig,
}

impl AlphaFamily {
    pub fn new(chart: SurfaceChart, nodes: usize) -> Result<Self> {
        Ok(AlphaFamily {
            config: LoopConfig::closed(chart, nodes)?,
        })
    }

    fn h(&self) -> f64 {
        TAU / self.config.nodes as f64
    }

    fn check_sigma(sigma: f64) -> Result<()> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("alpha energy needs sigma >= 0, got {sigma}")));
        }
        Ok(())
    }
}

impl SigmaFamily for AlphaFamily {
    fn dim(&self) -> usize {
        self.config.dim()
    }
    fn label(&self) -> String {
        format!("alpha_energy[{},N={}]", self.config.chart.label(), self.config.nodes)
    }
    fn value(&self, sigma: f64, x: &Vector) -> Result<f64> {
        Self::check_sigma(sigma)?;
        self.config.check_dim(x)?;
        let h = self.h();
        let segs = self.config.segments(&self.config.ambient(x));
        Ok(canonical_sum(
            segs.iter()
                .map(|s| {
                    let q = s.norm_squared() / (h * h);
                    0.5 * ((1.0 + q).powf(1.0 + sigma) - 1.0) * h
                })
                .collect(),
        ))
    }
    fn gradient(&self, sigma: f64, x: &Vector) -> Result<Vector> {
        Self::check_sigma(sigma)?;
        self.config.check_dim(x)?;
        let h = self.h();
        let pts = self.config.ambient(x);
        let n = pts.len();
        let segs = self.config.segments(&pts);
        let mut grad = vec![Vector3::zeros(); n];
        for (i, s) in segs.iter().enumerate() {
            let q = s.norm_squared() / (h * h);
            let g = s * ((1.0 + sigma) * (1.0 + q).powf(sigma) / h);
            grad[(i + 1) % n] += g;
            grad[i] -= g;
        }
        Ok(self.config.pull_back(x, &grad))
    }
    fn hessian(&self, sigma: f64, x: &Vector) -> Result<Matrix> {
        fd_hessian(|y| self.gradient(sigma, y), x, FD_STEP)
    }
}

/// The α-energy frozen at one `σ`.
pub fn make_alpha_energy(nodes: usize, sigma: f64, target: SurfaceChart) -> Result<FunctionalHandle> {
    AlphaFamily::check_sigma(sigma)?;
    let fam = AlphaFamily::new(target, nodes)?;
    Ok(crate::model::at_sigma(std::sync::Arc::new(fam), sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{grad_check, hessian_check, Point};
    use std::f64::consts::PI;

    fn circle(n: usize, r: f64) -> Vector {
        let mut x = Vector::zeros(2 * n);
        for i in 0..n {
            let t = TAU * i as f64 / n as f64;
            x[2 * i] = r * t.cos();
            x[2 * i + 1] = r * t.sin();
        }
        x
    }

    #[test]
    fn flat_square_has_length_four() {
        // The length functional itself accepts any N; only the loop configs enforce N ≥ 8.
        let cfg = LoopConfig {
            chart: SurfaceChart::flat(),
            nodes: 4,
            closure: Closure::Closed,
        };
        let x = Vector::from_vec(vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        assert_eq!(LoopLength(cfg).value(&x).unwrap(), 4.0);
        assert!(LoopConfig::closed(SurfaceChart::flat(), 4).is_err());
    }

    #[test]
    fn torus_inner_equator_length() {
        let cfg = LoopConfig::closed(SurfaceChart::torus(2.0, 0.5).unwrap(), 64).unwrap();
        let l = make_loop_length(cfg).value(&latitude_loop(64, PI)).unwrap();
        let exact = TAU * 1.5;
        assert!((l / exact - 1.0).abs() < 5e-3);
    }

    #[test]
    fn ellipsoid_equator_length() {
        let cfg = LoopConfig::closed(SurfaceChart::ellipsoid(1.0, 0.5).unwrap(), 64).unwrap();
        let l = make_loop_length(cfg).value(&latitude_loop(64, PI / 2.0)).unwrap();
        assert!((l / TAU - 1.0).abs() < 5e-3);
    }

    #[test]
    fn coincident_nodes_name_the_segment() {
        let cfg = LoopConfig::closed(SurfaceChart::flat(), 8).unwrap();
        let mut x = circle(8, 1.0);
        x[6] = x[4];
        x[7] = x[5];
        let f = make_loop_length(cfg);
        match f.gradient(&x) {
            Err(Error::DegenerateSegment { index }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn straight_pinned_arc_bending_equals_length() {
        for n in [8, 13, 40] {
            let cfg =
                LoopConfig::pinned(SurfaceChart::flat(), n, (0.0, 0.0), (3.0, 1.0)).unwrap();
            let mut x = Vector::zeros(cfg.dim());
            for i in 1..n - 1 {
                let t = i as f64 / (n - 1) as f64;
                x[2 * (i - 1)] = 3.0 * t;
                x[2 * (i - 1) + 1] = t;
            }
            let g = make_loop_bending(cfg.clone()).value(&x).unwrap();
            let l = make_loop_length(cfg).value(&x).unwrap();
            assert!((g - l).abs() < 1e-12);
            assert!((l - 10f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_bending_continuum_limit() {
        for r in [0.5, 1.0, 2.0] {
            let cfg = LoopConfig::closed(SurfaceChart::flat(), 256).unwrap();
            let g = make_loop_bending(cfg).value(&circle(256, r)).unwrap();
            let oracle = TAU * r * (1.0 + 1.0 / (r * r)).powi(2);
            assert!((g / oracle - 1.0).abs() < 0.02, "r={r}: {g} vs {oracle}");
        }
        let cfg = LoopConfig::closed(SurfaceChart::flat(), 256).unwrap();
        let g = make_loop_bending(cfg).value(&circle(256, 1.0)).unwrap();
        assert!((g / (8.0 * PI) - 1.0).abs() < 0.02);
    }

    #[test]
    fn bending_dominates_length() {
        let cfg = LoopConfig::closed(SurfaceChart::ellipsoid(1.0, 0.5).unwrap(), 16).unwrap();
        let mut x = latitude_loop(16, 1.2);
        for i in 0..16 {
            x[2 * i + 1] += 0.1 * (3.0 * i as f64).sin();
        }
        let g = make_loop_bending(cfg.clone()).value(&x).unwrap();
        let l = make_loop_length(cfg).value(&x).unwrap();
        assert!(g >= l && l > 0.0);
    }

    #[test]
    fn loop_derivatives_match_finite_differences() {
        let cfg = LoopConfig::closed(SurfaceChart::torus(2.0, 0.5).unwrap(), 12).unwrap();
        let mut x = latitude_loop(12, 2.5);
        for i in 0..12 {
            x[2 * i + 1] += 0.2 * (i as f64).cos();
        }
        let p = Point::from_vector(x).unwrap();
        for f in [make_loop_length(cfg.clone()), make_loop_bending(cfg)] {
            assert!(grad_check(&f, &p, 1e-5).unwrap() < 1e-5, "{}", f.label());
            assert!(hessian_check(&f, &p, 1e-5).unwrap() < 1e-4, "{}", f.label());
        }
        let pin = LoopConfig::pinned(SurfaceChart::flat(), 10, (0.0, 0.0), (1.0, 0.5)).unwrap();
        let x = Vector::from_fn(pin.dim(), |i, _| {
            let k = (i / 2 + 1) as f64 / 9.0;
            if i % 2 == 0 {
                k
            } else {
                0.5 * k + 0.05 * (3.0 * k).sin()
            }
        });
        let p = Point::from_vector(x).unwrap();
        for f in [make_loop_length(pin.clone()), make_loop_bending(pin)] {
            let e = grad_check(&f, &p, 1e-6).unwrap();
            assert!(e < 1e-5, "{}: {e}", f.label());
        }
    }

    #[test]
    fn alpha_energy_examples() {
        let flat = SurfaceChart::flat();
        let constant = Vector::from_element(2 * 16, 0.3);
        for s in [0.0, 0.1, 0.7] {
            let f = make_alpha_energy(16, s, flat.clone()).unwrap();
            assert_eq!(f.value(&constant).unwrap(), 0.0);
        }
        // σ = 0 reduces to the discrete Dirichlet energy.
        let x = circle(64, 1.0);
        let f0 = make_alpha_energy(64, 0.0, flat.clone()).unwrap();
        let h = TAU / 64.0;
        let pts: Vec<_> = (0..64).map(|i| (x[2 * i], x[2 * i + 1])).collect();
        let dirichlet: f64 = (0..64)
            .map(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % 64]);
                0.5 * ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)) / (h * h) * h
            })
            .sum();
        assert!((f0.value(&x).unwrap() - dirichlet).abs() < 1e-12);

        // Degree-one map to the unit circle: |ΔP/h| = 2 sin(h/2)/h.
        let f = make_alpha_energy(64, 0.1, flat).unwrap();
        let v = f.value(&x).unwrap();
        let q = (2.0 * (h / 2.0).sin() / h).powi(2);
        let discrete = 0.5 * ((1.0 + q).powf(1.1) - 1.0) * TAU;
        assert!((v - discrete).abs() < 1e-12);
        let continuum = PI * (2f64.powf(1.1) - 1.0);
        assert!((v / continuum - 1.0).abs() < 2e-3);
    }
}
