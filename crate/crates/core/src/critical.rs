//! Near-critical localization, Levenberg-damped Newton refinement and Morse
//! data (index, nullity, spectral gap).

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{beta_prime_estimate, DEFAULT_WINDOW_STEPS};
use crate::error::{Error, Result};
use crate::model::{
    entropy_residual, entropy_sigma_max, Matrix, Point, SigmaFamily, ToleranceProfile, Vector,
};
use crate::sweepout::{frame_values, Sweepout, WidthCurve};

/// Fraction of frames, ranked by value, used as localization seeds.
pub const SEED_FRACTION: f64 = 0.05;
pub const DEFAULT_REFINE_BUDGET: usize = 200;
const LOCATE_STEPS: usize = 25;
const MAX_DAMPING_TRIES: usize = 40;

/// Hessian spectrum split by sign, with the null band used to classify it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseData {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub index: usize,
    pub nullity: usize,
    /// Smallest |λ| outside the null band, 0 when every eigenvalue is null.
    pub gap: f64,
    pub null_tol: f64,
    /// Orthonormal eigenvectors of the negative eigenvalues, as columns in
    /// ambient coordinates.
    pub neg_basis: Vec<Vec<f64>>,
    pub pos_basis: Vec<Vec<f64>>,
}

impl MorseData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn positive(&self) -> usize {
        self.dim() - self.index - self.nullity
    }

    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Degenerate when some eigenvalue is null or below `gap_tol` in modulus.
    pub fn is_degenerate(&self, gap_tol: f64) -> bool {
        self.nullity > 0 || self.min_abs_eigenvalue() < gap_tol
    }

    pub fn neg_matrix(&self) -> Matrix {
        columns(&self.neg_basis)
    }

    pub fn pos_matrix(&self) -> Matrix {
        columns(&self.pos_basis)
    }
}

fn columns(cols: &[Vec<f64>]) -> Matrix {
    let n = cols.first().map_or(0, Vec::len);
    Matrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Classifies a symmetric matrix. `lift` maps eigenvectors back to ambient
/// coordinates when the matrix is a compression `QᵀHQ`.
fn classify(h: &Matrix, lift: Option<&Matrix>, tol: &ToleranceProfile) -> Result<MorseData> {
    let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen(format!("no convergence on a {}x{} matrix", h.nrows(), h.ncols())))?;
    if eig.eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let norm = eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
    let band = tol.null_band(norm);
    let mut out = MorseData {
        eigenvalues: Vec::with_capacity(order.len()),
        index: 0,
        nullity: 0,
        gap: f64::INFINITY,
        null_tol: band,
        neg_basis: Vec::new(),
        pos_basis: Vec::new(),
    };
    for k in order {
        let l = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k).into_owned();
        let v = match lift {
            Some(q) => q * v,
            None => v,
        };
        out.eigenvalues.push(l);
        if l.abs() <= band {
            out.nullity += 1;
            continue;
        }
        out.gap = out.gap.min(l.abs());
        if l < 0.0 {
            out.index += 1;
            out.neg_basis.push(v.iter().copied().collect());
        } else {
            out.pos_basis.push(v.iter().copied().collect());
        }
    }
    if !out.gap.is_finite() {
        out.gap = 0.0;
    }
    Ok(out)
}

/// Morse data of a symmetric matrix.
pub fn morse_from_hessian(h: &Matrix, tol: &ToleranceProfile) -> Result<MorseData> {
    classify(h, None, tol)
}

/// Morse data of `F_σ` at `x`, optionally restricted to the variations
/// spanned by the orthonormal columns of `subspace`.
pub fn morse_data(
    x: &Point,
    family: &dyn SigmaFamily,
    sigma: f64,
    tol: &ToleranceProfile,
    subspace: Option<&Matrix>,
) -> Result<MorseData> {
    let h = family.hessian(sigma, x.as_vector())?;
    match subspace {
        Some(q) => classify(&(q.transpose() * &h * q), Some(q), tol),
        None => classify(&h, None, tol),
    }
}

/// Entropy residual of a record: the limit 0 at `σ = 0`, absent where the
/// bound is undefined.
pub fn record_entropy_residual(sigma: f64, reg_value: f64) -> Option<f64> {
    if sigma == 0.0 {
        Some(0.0)
    } else if sigma > 0.0 && sigma < entropy_sigma_max() {
        entropy_residual(sigma, reg_value).ok()
    } else {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointRecord {
    pub point: Point,
    pub sigma: f64,
    /// `F_σ(x)`.
    pub value: f64,
    /// `F(x)`.
    pub base_value: f64,
    /// `G(x)`.
    pub reg_value: f64,
    pub grad_norm: f64,
    pub morse: Option<MorseData>,
    pub entropy_residual: Option<f64>,
}

impl CriticalPointRecord {
    pub fn evaluate(
        x: &Point,
        family: &dyn SigmaFamily,
        sigma: f64,
        tol: &ToleranceProfile,
        subspace: Option<&Matrix>,
    ) -> Result<Self> {
        let v = x.as_vector();
        let reg_value = family.regularizer_value(sigma, v)?;
        Ok(CriticalPointRecord {
            point: x.clone(),
            sigma,
            value: family.value(sigma, v)?,
            base_value: family.value(0.0, v)?,
            reg_value,
            grad_norm: family.gradient(sigma, v)?.norm(),
            morse: Some(morse_data(x, family, sigma, tol, subspace)?),
            entropy_residual: record_entropy_residual(sigma, reg_value),
        })
    }

    pub fn index(&self) -> Option<usize> {
        self.morse.as_ref().map(|m| m.index)
    }

    pub fn nullity(&self) -> Option<usize> {
        self.morse.as_ref().map(|m| m.nullity)
    }

    pub fn in_entropy_set(&self) -> bool {
        self.entropy_residual.is_some_and(|r| r <= 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    pub tol_grad: f64,
    pub budget: usize,
    /// Coordinate norm beyond which the iteration counts as divergent.
    pub bound: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            tol_grad: 1e-9,
            budget: DEFAULT_REFINE_BUDGET,
            bound: 1e3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RefineOutcome {
    pub point: Point,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Gradient norm after each accepted step, starting with the seed.
    pub trace: Vec<f64>,
}

/// One Levenberg-damped Newton step on `‖∇F_σ‖²`: solves
/// `(H² + μI)p = −Hg` and raises `μ` until the gradient norm decreases.
fn damped_step(
    family: &dyn SigmaFamily,
    sigma: f64,
    x: &Vector,
    g: &Vector,
    mu: &mut f64,
) -> Result<Option<(Vector, Vector)>> {
    let h = family.hessian(sigma, x)?;
    let a = &h * &h;
    let b = -(&h * g);
    let scale = a.trace() / a.nrows() as f64;
    let floor = 1e-16 * scale.max(f64::MIN_POSITIVE);
    *mu = mu.max(floor);
    let gn = g.norm();
    for _ in 0..MAX_DAMPING_TRIES {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += *mu;
        }
        if let Some(ch) = m.cholesky() {
            let trial = x + ch.solve(&b);
            if let Ok(gt) = family.gradient(sigma, &trial) {
                if gt.norm() < gn {
                    *mu = (*mu * 0.1).max(floor);
                    return Ok(Some((trial, gt)));
                }
            }
        }
        *mu *= 10.0;
    }
    Ok(None)
}

/// Drives `‖∇F_σ‖` below `tol_grad`. Convergence is to the nearest critical
/// point of any index.
pub fn refine(
    x0: &Point,
    family: &dyn SigmaFamily,
    sigma: f64,
    opts: &RefineOptions,
) -> Result<RefineOutcome> {
    if !(opts.tol_grad > 0.0) {
        return Err(Error::Precondition("tol_grad must be positive".into()));
    }
    let mut x = x0.as_vector().clone();
    let mut g = family.gradient(sigma, &x)?;
    let mut trace = vec![g.norm()];
    let mut mu = 0.0;
    for it in 0..=opts.budget {
        let gn = g.norm();
        if gn <= opts.tol_grad {
            return Ok(RefineOutcome {
                point: Point::from_vector(x)?,
                grad_norm: gn,
                iterations: it,
                trace,
            });
        }
        if x.norm() > opts.bound {
            return Err(Error::Convergence {
                reason: format!("diverged: |x| = {:.3e} exceeds {:.3e}", x.norm(), opts.bound),
                iterations: it,
                trace,
            });
        }
        if it == opts.budget {
            break;
        }
        match damped_step(family, sigma, &x, &g, &mut mu)? {
            Some((nx, ng)) => {
                x = nx;
                g = ng;
                trace.push(g.norm());
            }
            None => {
                return Err(Error::Convergence {
                    reason: format!("no decrease of the gradient norm at {gn:.3e}"),
                    iterations: it,
                    trace,
                })
            }
        }
    }
    Err(Error::Convergence {
        reason: format!("budget exhausted with gradient norm {:.3e}", g.norm()),
        iterations: opts.budget,
        trace,
    })
}

/// Refines and evaluates the full record.
pub fn refine_record(
    x0: &Point,
    family: &dyn SigmaFamily,
    sigma: f64,
    opts: &RefineOptions,
    tol: &ToleranceProfile,
    subspace: impl Fn(&Vector) -> Result<Option<Matrix>>,
) -> Result<CriticalPointRecord> {
    let out = refine(x0, family, sigma, opts)?;
    let q = subspace(out.point.as_vector())?;
    CriticalPointRecord::evaluate(&out.point, family, sigma, tol, q.as_ref())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearCriticalCertificate {
    pub point: Point,
    pub sigma: f64,
    pub sigma_k: f64,
    pub beta_prime: f64,
    /// `√(2(β′(σ)+2)(σ_k−σ))`.
    pub delta_k: f64,
    pub dist_to_sweepout: f64,
    /// `F_σ(x)`.
    pub value: f64,
    /// `[β(σ)−(σ_k−σ), β(σ_k)+(σ_k−σ)]`.
    pub value_bracket: (f64, f64),
    pub grad_norm: f64,
    /// `F(x) ≥ ¾β(0)`; recorded, not required.
    pub base_floor_ok: bool,
    /// `σ ≤ e^{−4/β(0)}`; recorded, not required.
    pub sigma_small_ok: bool,
}

impl NearCriticalCertificate {
    pub fn delta_formula(beta_prime: f64, sigma: f64, sigma_k: f64) -> f64 {
        (2.0 * (beta_prime + 2.0) * (sigma_k - sigma)).sqrt()
    }

    /// Every gated conclusion holds.
    pub fn holds(&self) -> bool {
        self.grad_norm <= self.delta_k
            && self.dist_to_sweepout <= self.delta_k
            && self.value_bracket.0 <= self.value
            && self.value <= self.value_bracket.1
    }
}

/// Localizes a near-critical point of `F_σ` next to a sweepout that is
/// near-optimal at `σ_k`. Seeds are the top frames by `F_{σ_k}`, each
/// followed by a short damped Newton run on `‖∇F_σ‖`.
pub fn locate_near_critical(
    sweepout: &Sweepout,
    family: &dyn SigmaFamily,
    sigma: f64,
    sigma_k: f64,
    curve: &WidthCurve,
) -> Result<NearCriticalCertificate> {
    if !(sigma_k > sigma) {
        return Err(Error::Precondition(format!(
            "sigma_k = {sigma_k} must exceed sigma = {sigma}"
        )));
    }
    let i = curve.index_of(sigma).ok_or_else(|| {
        Error::Precondition(format!("sigma = {sigma} is not a grid point of the width curve"))
    })?;
    let j = (i + DEFAULT_WINDOW_STEPS).min(curve.len() - 1);
    let beta_prime = beta_prime_estimate(curve, sigma, curve.sigmas[j] - sigma)?;
    let gap = sigma_k - sigma;
    let beta_s = curve.beta_at(sigma)?;
    let beta_k = curve.beta_at(sigma_k)?;
    let values_k = frame_values(sweepout, family, sigma_k)?;
    let sup_k = values_k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if sup_k > beta_k + gap {
        return Err(Error::Precondition(format!(
            "sweepout not near-optimal at sigma_k: sup {sup_k:.6e} > beta(sigma_k) + gap = {:.6e}",
            beta_k + gap
        )));
    }
    let delta_k = NearCriticalCertificate::delta_formula(beta_prime, sigma, sigma_k);
    let bracket = (beta_s - gap, beta_k + gap);
    let beta0 = curve.beta0();

    let mut ranked: Vec<usize> = (0..sweepout.len()).collect();
    ranked.sort_by(|&a, &b| values_k[b].total_cmp(&values_k[a]));
    let count = ((SEED_FRACTION * ranked.len() as f64).ceil() as usize).max(1);
    let seeds = &ranked[..count];

    let runs: Vec<Result<Option<(Vector, f64, f64, f64)>>> = seeds
        .par_iter()
        .map(|&s| {
            let mut x = sweepout.frame(s).clone();
            let mut g = family.gradient(sigma, &x)?;
            let mut mu = 0.0;
            let mut best: Option<(Vector, f64, f64, f64)> = None;
            let mut fallback = (x.clone(), g.norm(), 0.0);
            for step in 0..=LOCATE_STEPS {
                let gn = g.norm();
                let dist = sweepout.distance_to(&x);
                let v = family.value(sigma, &x)?;
                if gn < fallback.1 {
                    fallback = (x.clone(), gn, dist);
                }
                let ok = gn <= delta_k && dist <= delta_k && bracket.0 <= v && v <= bracket.1;
                if ok && best.as_ref().is_none_or(|b| gn < b.1) {
                    best = Some((x.clone(), gn, dist, v));
                }
                if dist > delta_k || step == LOCATE_STEPS {
                    break;
                }
                match damped_step(family, sigma, &x, &g, &mut mu)? {
                    Some((nx, ng)) => {
                        x = nx;
                        g = ng;
                    }
                    None => break,
                }
            }
            Ok(best.or(Some((fallback.0, fallback.1, fallback.2, f64::NAN))))
        })
        .collect();

    let mut chosen: Option<(Vector, f64, f64, f64)> = None;
    let mut diag: Option<(Vector, f64, f64)> = None;
    for r in runs {
        let Some((x, gn, dist, v)) = r? else { continue };
        if v.is_nan() {
            if diag.as_ref().is_none_or(|d| gn < d.1) {
                diag = Some((x, gn, dist));
            }
        } else if chosen.as_ref().is_none_or(|c| gn < c.1) {
            chosen = Some((x, gn, dist, v));
        }
    }
    match chosen {
        Some((x, grad_norm, dist, value)) => Ok(NearCriticalCertificate {
            base_floor_ok: family.value(0.0, &x)? >= 0.75 * beta0,
            sigma_small_ok: beta0 > 0.0 && sigma <= (-4.0 / beta0).exp(),
            point: Point::from_vector(x)?,
            sigma,
            sigma_k,
            beta_prime,
            delta_k,
            dist_to_sweepout: dist,
            value,
            value_bracket: bracket,
            grad_norm,
        }),
        None => {
            let (best, best_grad_norm, best_distance) =
                diag.unwrap_or((sweepout.frame(ranked[0]).clone(), f64::INFINITY, 0.0));
            Err(Error::NotNearOptimal {
                best: best.iter().copied().collect(),
                best_grad_norm,
                best_distance,
            })
        }
    }
}

/// Lower and upper semicontinuity of the Morse index along a sequence
/// converging to `limit`: `Ind(limit) ≤ min Ind` and
/// `Ind(limit) + Null(limit) ≥ max (Ind + Null)`.
pub fn semicontinuity_holds(sequence: &[(usize, usize)], limit: (usize, usize)) -> bool {
    let (li, ln) = limit;
    sequence
        .iter()
        .all(|&(i, n)| li <= i && li + ln >= i + n)
}

/// [`semicontinuity_holds`] on records; false when Morse data is missing.
pub fn index_semicontinuity_check(
    records: &[CriticalPointRecord],
    limit: &CriticalPointRecord,
) -> bool {
    let Some(l) = limit.morse.as_ref() else {
        return false;
    };
    let mut seq = Vec::with_capacity(records.len());
    for r in records {
        match r.morse.as_ref() {
            Some(m) => seq.push((m.index, m.nullity)),
            None => return false,
        }
    }
    semicontinuity_holds(&seq, (l.index, l.nullity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::analytic::{
        make_double_well, make_monkey_saddle, make_quadratic_saddle, QuarticSum,
    };
    use crate::model::{FixedFamily, FunctionalHandle, ViscousFamily};
    use crate::sweepout::{estimate_width_curve, Sweepout};

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn p(x: &[f64]) -> Point {
        Point::new(x.to_vec()).unwrap()
    }

    fn dw() -> ViscousFamily {
        ViscousFamily::new(make_double_well(), FunctionalHandle::new(QuarticSum(2))).unwrap()
    }

    #[test]
    fn morse_of_diagonal_matrices() {
        let m = morse_from_hessian(&Matrix::from_diagonal(&Vector::from_vec(vec![-2.0, 2.0])), &tol())
            .unwrap();
        assert_eq!((m.index, m.nullity, m.gap), (1, 0, 2.0));
        assert_eq!(m.neg_basis.len(), 1);
        assert_eq!(m.index + m.nullity + m.positive(), 2);

        let z = morse_from_hessian(&Matrix::zeros(2, 2), &tol()).unwrap();
        assert_eq!((z.index, z.nullity, z.gap), (0, 2, 0.0));
        assert!(z.is_degenerate(1e-5));
    }

    #[test]
    fn double_well_saddle_spectrum() {
        let fam = FixedFamily(make_double_well());
        let m = morse_data(&p(&[0.0, 0.0]), &fam, 0.0, &tol(), None).unwrap();
        assert_eq!(m.eigenvalues, vec![-4.0, 10.0]);
        assert_eq!(m.index, 1);
    }

    #[test]
    fn monkey_origin_is_degenerate() {
        let fam = FixedFamily(make_monkey_saddle(0.0).unwrap());
        let m = morse_data(&p(&[0.0, 0.0]), &fam, 0.0, &tol(), None).unwrap();
        assert_eq!((m.index, m.nullity), (0, 2));
        assert!(m.is_degenerate(tol().degeneracy_gap(tol().grad)));
    }

    #[test]
    fn refine_examples() {
        let q = FixedFamily(make_quadratic_saddle(1, 1, &[]).unwrap());
        let out = refine(&p(&[0.1, 0.1]), &q, 0.0, &RefineOptions::default()).unwrap();
        assert!(out.point.as_vector().norm() < 1e-10);

        let fam = dw();
        let out = refine(&p(&[0.05, 0.02]), &fam, 0.0, &RefineOptions::default()).unwrap();
        assert!(out.point.as_vector().norm() < 1e-8);
        assert!((fam.value(0.0, out.point.as_vector()).unwrap() - 1.0).abs() < 1e-12);

        let r = refine_record(&p(&[1.0, 0.0]), &fam, 0.0, &RefineOptions::default(), &tol(), |_| Ok(None))
            .unwrap();
        assert_eq!(r.point, p(&[1.0, 0.0]));
        assert_eq!(r.index(), Some(0));
    }

    #[test]
    fn refine_reports_divergence() {
        struct Linear;
        impl crate::model::Functional for Linear {
            fn dim(&self) -> usize {
                1
            }
            fn label(&self) -> String {
                "linear".into()
            }
            fn value(&self, x: &Vector) -> Result<f64> {
                Ok(x[0] + x[0].powi(3) / 3.0)
            }
            fn gradient(&self, x: &Vector) -> Result<Vector> {
                Ok(Vector::from_element(1, 1.0 + x[0] * x[0]))
            }
            fn hessian(&self, x: &Vector) -> Result<Matrix> {
                Ok(Matrix::from_element(1, 1, 2.0 * x[0]))
            }
        }
        let fam = FixedFamily(FunctionalHandle::new(Linear));
        let opts = RefineOptions {
            budget: 50,
            ..Default::default()
        };
        assert!(matches!(
            refine(&p(&[0.3]), &fam, 0.0, &opts),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn record_fields_recompute() {
        let fam = dw();
        let r = refine_record(&p(&[0.05, 0.02]), &fam, 0.05, &RefineOptions::default(), &tol(), |_| Ok(None))
            .unwrap();
        let x = r.point.as_vector();
        let g = x[0].powi(4) + x[1].powi(4);
        assert_eq!(r.reg_value, g);
        let bound = 1.0 / ((20f64).ln() * (20f64).ln().ln());
        assert!((r.entropy_residual.unwrap() - (0.0025 * g - bound)).abs() < 1e-15);
        assert!(r.in_entropy_set());
        assert_eq!(r.index(), Some(1));
        let json = serde_json::to_string(&r).unwrap();
        let back: CriticalPointRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn delta_formula_example() {
        let d = NearCriticalCertificate::delta_formula(0.5, 0.0, 0.02);
        assert!((d - 0.1f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn double_well_near_critical() {
        let fam = dw();
        let seed = Sweepout::line(&Vector::from_vec(vec![-1.0, 0.0]), &Vector::from_vec(vec![1.0, 0.0]), 33)
            .unwrap();
        let grid: Vec<f64> = (0..=8).map(|k| 0.01 * k as f64).collect();
        let curve = estimate_width_curve(&seed, &fam, &grid, 50, true).unwrap();
        let sw = &curve.tightened_sweepouts.as_ref().unwrap()[2];
        let c = locate_near_critical(sw, &fam, 0.01, 0.02, &curve).unwrap();
        assert!(c.holds());
        assert!(c.point.as_vector().norm() < 0.05);
        let recomputed = (2.0 * (c.beta_prime + 2.0) * 0.01f64).sqrt();
        assert_eq!(c.delta_k, recomputed);
    }

    #[test]
    fn quadratic_path_through_origin_is_stationary() {
        let fam = ViscousFamily::new(
            make_quadratic_saddle(1, 1, &[]).unwrap(),
            FunctionalHandle::new(QuarticSum(2)),
        )
        .unwrap();
        let seed = Sweepout::line(&Vector::from_vec(vec![-1.0, 0.0]), &Vector::from_vec(vec![1.0, 0.0]), 33)
            .unwrap();
        let grid: Vec<f64> = (0..=4).map(|k| 0.01 * k as f64).collect();
        let curve = estimate_width_curve(&seed, &fam, &grid, 20, true).unwrap();
        let sw = &curve.tightened_sweepouts.as_ref().unwrap()[1];
        let c = locate_near_critical(sw, &fam, 0.0, 0.01, &curve).unwrap();
        assert_eq!(c.grad_norm, 0.0);
        assert_eq!(c.point, p(&[0.0, 0.0]));
    }

    #[test]
    fn semicontinuity_examples() {
        assert!(semicontinuity_holds(&[(1, 0), (1, 0), (1, 0)], (0, 2)));
        assert!(semicontinuity_holds(&[(1, 0), (1, 0)], (1, 0)));
        assert!(!semicontinuity_holds(&[(1, 0), (1, 0)], (2, 0)));
        assert!(!semicontinuity_holds(&[(1, 2)], (0, 2)));
    }
}
