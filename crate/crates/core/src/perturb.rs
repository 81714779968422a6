//! Compactly supported linear tilts `F̃ = F + φ⟨y, x − x0⟩` that make a
//! degenerate critical set non-degenerate, with the sign control `F̃ ≤ F`
//! and sampled certification of the resulting spectral gaps.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::{refine, CriticalPointRecord, RefineOptions};
use crate::deform::{CutoffZeta, PlateauEta};
use crate::error::{Error, Result};
use crate::model::{
    Functional, FunctionalHandle, Matrix, Point, SigmaFamily, ToleranceProfile, Vector,
};

/// Differentiability order of the perturbation budget.
pub const K_ORDER: u32 = 2;
/// Distance under which two refined critical points are the same.
const DEDUP_RADIUS: f64 = 1e-7;
/// Gradient norm below which an unconverged refinement counts as an
/// unresolved near-degenerate point.
const UNRESOLVED_GRAD: f64 = 1e-6;

/// `φ(x) = ζ(Σ_i η(|x − x_i|²/δ²))`: 1 on `N_δ(K)`, 0 outside `N_{2δ}(K)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub centers: Vec<Vec<f64>>,
    pub delta: f64,
}

impl BumpFunction {
    fn sum_terms(&self, x: &Vector) -> Vec<(f64, Vector)> {
        let d2 = self.delta * self.delta;
        self.centers
            .iter()
            .filter_map(|c| {
                let r = x - Vector::from_column_slice(c);
                let t = r.norm_squared() / d2;
                (t < PlateauEta::END).then_some((t, r))
            })
            .collect()
    }

    fn inner(&self, x: &Vector) -> f64 {
        self.sum_terms(x)
            .iter()
            .map(|(t, _)| PlateauEta.value(*t))
            .sum()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        CutoffZeta.value(self.inner(x))
    }

    /// Value, gradient and Hessian.
    pub fn jet(&self, x: &Vector) -> (f64, Vector, Matrix) {
        let n = x.len();
        let d2 = self.delta * self.delta;
        let mut s = 0.0;
        let mut gs = Vector::zeros(n);
        let mut hs = Matrix::zeros(n, n);
        for (t, r) in self.sum_terms(x) {
            s += PlateauEta.value(t);
            let e1 = PlateauEta.d1(t);
            let e2 = PlateauEta.d2(t);
            gs += &r * (2.0 * e1 / d2);
            hs += &r * r.transpose() * (4.0 * e2 / (d2 * d2));
            for i in 0..n {
                hs[(i, i)] += 2.0 * e1 / d2;
            }
        }
        let z1 = CutoffZeta.d1(s);
        let z2 = CutoffZeta.d2(s);
        let h = &gs * gs.transpose() * z2 + hs * z1;
        (CutoffZeta.value(s), gs * z1, h)
    }

    /// Largest number of supports `B(x_i, 2δ)` sharing a point.
    pub fn overlap(&self) -> usize {
        let c: Vec<Vector> = self.centers.iter().map(|c| Vector::from_column_slice(c)).collect();
        c.iter()
            .map(|a| c.iter().filter(|b| (a - *b).norm() < 4.0 * self.delta).count())
            .max()
            .unwrap_or(0)
    }

    /// `C₁` with `‖φ‖_{C⁰} + δ‖∇φ‖ + δ²‖∇²φ‖ ≤ C₁` propagated through the tilt
    /// `φ⟨y, x − x0⟩`, for `δ ≤ 1` and `C₀ ≥ 1`.
    pub fn c1(&self) -> f64 {
        let m = self.overlap() as f64;
        let cg = CutoffZeta::D1_MAX * m * 4.0 * PlateauEta::D1_MAX;
        let ch = CutoffZeta::D2_MAX * m * m * (4.0 * PlateauEta::D1_MAX).powi(2)
            + CutoffZeta::D1_MAX * m * (16.0 * PlateauEta::D2_MAX + 2.0 * PlateauEta::D1_MAX);
        3.0 + 4.0 * cg + 2.0 * ch
    }

    /// `C₀(δ) = max(1, 1.1·sup_{N_{2δ}(K)} ‖x‖)`.
    pub fn c0(&self) -> f64 {
        let r = self
            .centers
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        (1.1 * (r + 2.0 * self.delta)).max(1.0)
    }

    pub fn dist_to_centers(&self, x: &Vector) -> f64 {
        self.centers
            .iter()
            .map(|c| (x - Vector::from_column_slice(c)).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Greedy sub-covering of `K` at radius `δ/2`.
pub fn build_bump(k: &[Point], delta: f64) -> Result<BumpFunction> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Precondition(format!("bump radius must be positive, got {delta}")));
    }
    if k.is_empty() {
        return Err(Error::Precondition("bump needs a nonempty set K".into()));
    }
    let dim = k[0].dim();
    let mut centers: Vec<Point> = Vec::new();
    for p in k {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        if centers.iter().all(|c| c.distance(p) > delta / 2.0) {
            centers.push(p.clone());
        }
    }
    Ok(BumpFunction {
        centers: centers.iter().map(Point::to_vec).collect(),
        delta,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub y: Vec<f64>,
    pub x0: Vec<f64>,
    pub bump: BumpFunction,
    pub epsilon: f64,
    pub k_order: u32,
    pub c0: f64,
    pub c1: f64,
    pub rng_seed: Option<u64>,
}

impl PerturbationSpec {
    pub fn new(y: Vec<f64>, x0: Vec<f64>, bump: BumpFunction, epsilon: f64) -> Self {
        PerturbationSpec {
            c0: bump.c0(),
            c1: bump.c1(),
            y,
            x0,
            bump,
            epsilon,
            k_order: K_ORDER,
            rng_seed: None,
        }
    }

    /// `δᵏ·ε/(C₀·C₁)`.
    pub fn norm_bound(&self) -> f64 {
        self.bump.delta.powi(self.k_order as i32) * self.epsilon / (self.c0 * self.c1)
    }

    pub fn y_norm(&self) -> f64 {
        self.y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn check(&self) -> Result<()> {
        let n = self.y_norm();
        let bound = self.norm_bound();
        if n > 0.0 && n >= bound {
            return Err(Error::NormBound { norm: n, bound });
        }
        Ok(())
    }
}

/// Draws `y` uniformly from the ball of radius `δ²ε/(C₀C₁)` and anchors the
/// tilt at the maximizer of `⟨y, x⟩` over `N_{2δ}(K)`, which gives `F̃ ≤ F`.
pub fn sample_tilt(k: &[Point], delta: f64, epsilon: f64, rng_seed: u64) -> Result<PerturbationSpec> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Precondition(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if delta > 1.0 {
        return Err(Error::Precondition(format!(
            "bump radius must be at most 1 for the C² budget, got {delta}"
        )));
    }
    let bump = build_bump(k, delta)?;
    let dim = k[0].dim();
    let mut spec = PerturbationSpec::new(vec![0.0; dim], k[0].to_vec(), bump, epsilon);
    spec.rng_seed = Some(rng_seed);
    let radius = spec.norm_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let g = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let u: f64 = rng.random();
    let gn = g.norm();
    if radius == 0.0 || gn == 0.0 {
        return Ok(spec);
    }
    let y = g * (radius * u.powf(1.0 / dim as f64) / gn);
    let yn = y.norm();
    if yn > 0.0 {
        let best = k
            .iter()
            .max_by(|a, b| y.dot(a.as_vector()).total_cmp(&y.dot(b.as_vector())))
            .expect("nonempty K");
        let x0 = best.as_vector() + &y * (2.0 * delta / yn);
        spec.x0 = x0.iter().copied().collect();
    }
    spec.y = y.iter().copied().collect();
    Ok(spec)
}

/// `φ(x)⟨y, x − x0⟩` with its derivatives; zero outside the support.
fn tilt_jet(spec: &PerturbationSpec, x: &Vector) -> Option<(f64, Vector, Matrix)> {
    if spec.y_norm() == 0.0 {
        return None;
    }
    let (phi, gphi, hphi) = spec.bump.jet(x);
    if phi == 0.0 && gphi.iter().all(|v| *v == 0.0) {
        return None;
    }
    let y = Vector::from_column_slice(&spec.y);
    let lin = y.dot(&(x - Vector::from_column_slice(&spec.x0)));
    let g = &gphi * lin + &y * phi;
    let h = hphi * lin + &gphi * y.transpose() + &y * gphi.transpose();
    Some((phi * lin, g, h))
}

/// `F̃` for a single functional.
pub struct Tilted {
    base: FunctionalHandle,
    spec: PerturbationSpec,
}

impl Functional for Tilted {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn label(&self) -> String {
        format!("tilted({})", self.base.label())
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        let f = self.base.value(x)?;
        Ok(match tilt_jet(&self.spec, x) {
            Some((t, _, _)) => f + t,
            None => f,
        })
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        let g = self.base.gradient(x)?;
        Ok(match tilt_jet(&self.spec, x) {
            Some((_, tg, _)) => g + tg,
            None => g,
        })
    }
    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        let h = self.base.hessian(x)?;
        Ok(match tilt_jet(&self.spec, x) {
            Some((_, _, th)) => h + th,
            None => h,
        })
    }
}

pub fn perturb_functional(f: &FunctionalHandle, spec: &PerturbationSpec) -> Result<FunctionalHandle> {
    spec.check()?;
    if spec.y.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: spec.y.len(),
        });
    }
    Ok(FunctionalHandle::new(Tilted {
        base: f.clone(),
        spec: spec.clone(),
    }))
}

/// The same tilt applied to every member of a σ-family.
pub struct TiltedFamily {
    base: Arc<dyn SigmaFamily>,
    spec: PerturbationSpec,
}

impl TiltedFamily {
    pub fn new(base: Arc<dyn SigmaFamily>, spec: PerturbationSpec) -> Result<Self> {
        spec.check()?;
        if spec.y.len() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: spec.y.len(),
            });
        }
        Ok(TiltedFamily { base, spec })
    }

    pub fn spec(&self) -> &PerturbationSpec {
        &self.spec
    }
}

impl SigmaFamily for TiltedFamily {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn label(&self) -> String {
        format!("tilted({})", self.base.label())
    }
    fn value(&self, sigma: f64, x: &Vector) -> Result<f64> {
        let f = self.base.value(sigma, x)?;
        Ok(match tilt_jet(&self.spec, x) {
            Some((t, _, _)) => f + t,
            None => f,
        })
    }
    fn gradient(&self, sigma: f64, x: &Vector) -> Result<Vector> {
        let g = self.base.gradient(sigma, x)?;
        Ok(match tilt_jet(&self.spec, x) {
            Some((_, tg, _)) => g + tg,
            None => g,
        })
    }
    fn hessian(&self, sigma: f64, x: &Vector) -> Result<Matrix> {
        let h = self.base.hessian(sigma, x)?;
        Ok(match tilt_jet(&self.spec, x) {
            Some((_, _, th)) => h + th,
            None => h,
        })
    }
    fn regularizer_value(&self, sigma: f64, x: &Vector) -> Result<f64> {
        self.base.regularizer_value(sigma, x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertifyStatus {
    Certified,
    Degenerate,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub status: CertifyStatus,
    pub gap_tol: f64,
    pub records: Vec<CriticalPointRecord>,
    pub starts: usize,
    pub unresolved: usize,
}

impl Certification {
    pub fn certified(&self) -> bool {
        self.status == CertifyStatus::Certified
    }
}

/// Multi-start refinement inside `N_{2δ}(K)`; certified iff every critical
/// point found has all |eigenvalues| at least `gap_tol`.
#[allow(clippy::too_many_arguments)]
pub fn certify_nondegenerate(
    f_tilde: &dyn SigmaFamily,
    sigma: f64,
    region: &BumpFunction,
    gap_tol: f64,
    starts: usize,
    refine_budget: usize,
    tol: &ToleranceProfile,
    rng_seed: u64,
    subspace: &(dyn Fn(&Vector) -> Result<Option<Matrix>> + Sync),
) -> Result<Certification> {
    let dim = f_tilde.dim();
    let radius = 2.0 * region.delta;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let seeds: Vec<Vector> = (0..starts)
        .map(|_| {
            let c = &region.centers[rng.random_range(0..region.centers.len())];
            loop {
                let g = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
                let gn = g.norm();
                if gn > 0.0 && r > 0.0 {
                    break Vector::from_column_slice(c) + g * (r / gn);
                }
            }
        })
        .collect();
    let opts = RefineOptions {
        tol_grad: tol.certify_grad,
        budget: refine_budget,
        bound: 1e6,
    };
    let outcomes: Vec<Result<Option<Point>>> = seeds
        .par_iter()
        .map(|s| match refine(&Point::from_vector(s.clone())?, f_tilde, sigma, &opts) {
            Ok(out) => Ok(Some(out.point)),
            Err(Error::Convergence { trace, .. }) => {
                let best = trace.iter().copied().fold(f64::INFINITY, f64::min);
                if best < UNRESOLVED_GRAD {
                    Err(Error::Convergence {
                        reason: "unresolved".into(),
                        iterations: 0,
                        trace: vec![best],
                    })
                } else {
                    Ok(None)
                }
            }
            Err(e) => Err(e),
        })
        .collect();
    let mut points: Vec<Point> = Vec::new();
    let mut unresolved = 0;
    for o in outcomes {
        match o {
            Ok(Some(p)) => {
                if region.dist_to_centers(p.as_vector()) <= radius
                    && points.iter().all(|q| q.distance(&p) > DEDUP_RADIUS)
                {
                    points.push(p);
                }
            }
            Ok(None) => {}
            Err(Error::Convergence { .. }) => unresolved += 1,
            Err(e) => return Err(e),
        }
    }
    points.sort_by(|a, b| a.to_vec().partial_cmp(&b.to_vec()).unwrap());
    let records = points
        .iter()
        .map(|p| {
            let q = subspace(p.as_vector())?;
            CriticalPointRecord::evaluate(p, f_tilde, sigma, tol, q.as_ref())
        })
        .collect::<Result<Vec<_>>>()?;
    let degenerate = records
        .iter()
        .any(|r| r.morse.as_ref().is_none_or(|m| m.min_abs_eigenvalue() < gap_tol));
    let status = if degenerate {
        CertifyStatus::Degenerate
    } else if unresolved > 0 {
        CertifyStatus::Inconclusive
    } else {
        CertifyStatus::Certified
    };
    Ok(Certification {
        status,
        gap_tol,
        records,
        starts,
        unresolved,
    })
}

/// Radius in `σ` over which a spectral gap survives: `gap/(2·sup‖∇G‖)`.
pub fn stability_radius(gap: f64, sup_grad_g: f64) -> f64 {
    if sup_grad_g <= 0.0 {
        f64::INFINITY
    } else {
        gap / (2.0 * sup_grad_g)
    }
}

/// Cover of `[lo, hi]` by consecutive subintervals of width at most `width`,
/// one bump per subinterval.
pub fn sigma_cover(lo: f64, hi: f64, width: f64) -> Result<Vec<(f64, f64)>> {
    if !(hi >= lo && width > 0.0) {
        return Err(Error::Precondition(format!(
            "sigma cover needs lo <= hi and width > 0, got [{lo}, {hi}], {width}"
        )));
    }
    if !width.is_finite() || hi == lo {
        return Ok(vec![(lo, hi)]);
    }
    let n = ((hi - lo) / width).ceil().max(1.0) as usize;
    Ok((0..n)
        .map(|i| {
            let a = lo + (hi - lo) * i as f64 / n as f64;
            let b = if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * (i + 1) as f64 / n as f64
            };
            (a, b)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::analytic::{make_monkey_saddle, make_quadratic_saddle};
    use crate::model::{grad_check, hessian_check, FixedFamily};

    fn p(x: &[f64]) -> Point {
        Point::new(x.to_vec()).unwrap()
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from_row_slice(x)
    }

    #[test]
    fn bump_examples() {
        let b = build_bump(&[p(&[0.0, 0.0])], 0.1).unwrap();
        assert_eq!(b.value(&v(&[0.0, 0.0])), 1.0);
        assert_eq!(b.value(&v(&[0.25, 0.0])), 0.0);
        assert_eq!(b.value(&v(&[0.14, 0.0])), 1.0);
        assert_eq!(b.value(&v(&[0.21, 0.0])), 0.0);
        let mid = b.value(&v(&[0.17, 0.0]));
        assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn greedy_cover_skips_close_points() {
        let k = [p(&[0.0]), p(&[0.01]), p(&[0.5])];
        let b = build_bump(&k, 0.1).unwrap();
        assert_eq!(b.centers, vec![vec![0.0], vec![0.5]]);
        assert!(build_bump(&[], 0.1).is_err());
        assert!(build_bump(&k, 0.0).is_err());
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let b = build_bump(&[p(&[0.0, 0.0]), p(&[0.15, 0.05])], 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = v(&[rng.random_range(-0.3..0.45), rng.random_range(-0.3..0.35)]);
            let (_, g, h) = b.jet(&x);
            let step = 1e-6;
            for i in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += step;
                xm[i] -= step;
                let fd = (b.value(&xp) - b.value(&xm)) / (2.0 * step);
                assert!((fd - g[i]).abs() < 1e-5, "{fd} vs {}", g[i]);
                let gd = (b.jet(&xp).1 - b.jet(&xm).1) / (2.0 * step);
                for j in 0..2 {
                    assert!((gd[j] - h[(j, i)]).abs() < 1e-3);
                }
            }
        }
    }

    #[test]
    fn sampled_c2_norm_within_constant() {
        let b = build_bump(&[p(&[0.0, 0.0]), p(&[0.12, 0.0])], 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut s0, mut s1, mut s2) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..5000 {
            let x = v(&[rng.random_range(-0.25..0.4), rng.random_range(-0.25..0.25)]);
            let (f, g, h) = b.jet(&x);
            s0 = s0.max(f.abs());
            s1 = s1.max(g.norm());
            s2 = s2.max(h.norm());
        }
        let d = b.delta;
        assert!(s0 + d * s1 + d * d * s2 <= b.c1());
    }

    #[test]
    fn tilt_examples() {
        let k = [p(&[0.0, 0.0])];
        let bump = build_bump(&k, 0.2).unwrap();
        let spec = PerturbationSpec::new(vec![-0.03, 0.0], vec![0.0, 0.0], bump, 1e3);
        let f = make_monkey_saddle(0.0).unwrap();
        let ft = perturb_functional(&f, &spec).unwrap();
        let x = v(&[0.05, -0.02]);
        let dg = ft.gradient(&x).unwrap() - f.gradient(&x).unwrap();
        assert_eq!(dg, v(&[-0.03, 0.0]));
        assert_eq!(ft.hessian(&x).unwrap(), f.hessian(&x).unwrap());
        let far = v(&[0.5, 0.3]);
        assert_eq!(ft.value(&far).unwrap(), f.value(&far).unwrap());

        let fam = FixedFamily(ft);
        let tol = ToleranceProfile::default();
        for s in [[0.12, 0.01], [-0.09, -0.01]] {
            let out = refine(&p(&s), &fam, 0.0, &RefineOptions::default()).unwrap();
            let r = CriticalPointRecord::evaluate(&out.point, &fam, 0.0, &tol, None).unwrap();
            assert!((r.point.as_vector() - v(&[s[0].signum() * 0.1, 0.0])).norm() < 1e-9);
            assert_eq!(r.index(), Some(1));
            assert!((r.morse.unwrap().gap - 0.6).abs() < 1e-8);
        }

        let too_big = PerturbationSpec::new(vec![-0.03, 0.0], vec![0.0, 0.0], build_bump(&k, 0.2).unwrap(), 1e-3);
        assert!(matches!(perturb_functional(&f, &too_big), Err(Error::NormBound { .. })));
    }

    #[test]
    fn tilted_derivatives_match_finite_differences() {
        let k = [p(&[0.0, 0.0])];
        let bump = build_bump(&k, 0.2).unwrap();
        let spec = PerturbationSpec::new(vec![0.01, -0.02], vec![0.1, 0.0], bump, 1e3);
        let ft = perturb_functional(&make_monkey_saddle(1.0).unwrap(), &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x = p(&[rng.random_range(-0.45..0.45), rng.random_range(-0.45..0.45)]);
            assert!(grad_check(&ft, &x, 1e-5).unwrap() < 1e-5);
            assert!(hessian_check(&ft, &x, 1e-5).unwrap() < 1e-4);
        }
    }

    #[test]
    fn sample_tilt_bounds_sign_and_determinism() {
        let k = [p(&[0.0, 0.0]), p(&[0.05, 0.0])];
        let a = sample_tilt(&k, 0.2, 0.1, 42).unwrap();
        let b = sample_tilt(&k, 0.2, 0.1, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.y_norm() < a.norm_bound());
        let f = make_monkey_saddle(1.0).unwrap();
        let ft = perturb_functional(&f, &a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let x = v(&[rng.random_range(-0.5..0.6), rng.random_range(-0.5..0.5)]);
            assert!(ft.value(&x).unwrap() <= f.value(&x).unwrap() + 1e-12);
        }
        let z = sample_tilt(&k, 0.2, 0.0, 42).unwrap();
        assert_eq!(z.y_norm(), 0.0);
        let fz = perturb_functional(&f, &z).unwrap();
        let x = v(&[0.01, 0.02]);
        assert_eq!(fz.value(&x).unwrap(), f.value(&x).unwrap());
        assert!(sample_tilt(&k, 1.5, 0.1, 1).is_err());
    }

    #[test]
    fn certification_examples() {
        let tol = ToleranceProfile::default();
        let gap_tol = tol.degeneracy_gap(tol.certify_grad);
        let k = [p(&[0.0, 0.0])];
        let bump = build_bump(&k, 0.2).unwrap();
        let spec = PerturbationSpec::new(vec![-0.03, 0.0], vec![0.0, 0.0], bump.clone(), 1e3);
        let tilted = FixedFamily(perturb_functional(&make_monkey_saddle(0.0).unwrap(), &spec).unwrap());
        let c = certify_nondegenerate(&tilted, 0.0, &bump, gap_tol, 24, 200, &tol, 11, &|_| Ok(None)).unwrap();
        assert!(c.certified());
        assert_eq!(c.records.len(), 2);
        for r in &c.records {
            assert!((r.morse.as_ref().unwrap().gap - 0.6).abs() < 1e-8);
        }

        let plain = FixedFamily(make_monkey_saddle(0.0).unwrap());
        let c = certify_nondegenerate(&plain, 0.0, &bump, gap_tol, 8, 100, &tol, 11, &|_| Ok(None)).unwrap();
        assert!(!c.certified());

        let q = FixedFamily(make_quadratic_saddle(1, 1, &[]).unwrap());
        let c = certify_nondegenerate(&q, 0.0, &bump, gap_tol, 8, 100, &tol, 11, &|_| Ok(None)).unwrap();
        assert!(c.certified());
        assert_eq!(c.records.len(), 1);
    }

    #[test]
    fn sigma_cover_examples() {
        assert_eq!(stability_radius(0.6, 0.0), f64::INFINITY);
        assert!((stability_radius(0.6, 3.0) - 0.1).abs() < 1e-15);
        let c = sigma_cover(0.0, 0.25, 0.1).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c[0].0, 0.0);
        assert_eq!(c[2].1, 0.25);
        assert_eq!(sigma_cover(0.1, 0.2, f64::INFINITY).unwrap(), vec![(0.1, 0.2)]);
    }
}
