//! Derivative estimates of the width curve, entropy-condition selection of
//! `σ`, and the dyadic-style schedule `a_j = 1/j` of the monotonicity trick.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{entropy_bound, entropy_sigma_max, EntropyForm};
use crate::sweepout::WidthCurve;

pub const DEFAULT_J_START: usize = 16;
/// Forward window of the selection rule, in grid steps (three samples).
pub const DEFAULT_WINDOW_STEPS: usize = 2;
const LOG_GUARD: f64 = 1e-3;

fn guarded_logs(j: usize) -> (f64, f64, f64) {
    let l1 = (j as f64).ln().max(LOG_GUARD);
    let l2 = l1.ln().max(LOG_GUARD);
    let l3 = l2.ln().max(LOG_GUARD);
    (l1, l2, l3)
}

/// `a_j = 1/j`, `b_j = 1/((j+1) log j loglog j logloglog j)`,
/// `δ_j = 1/logloglog j`, for `j = j_start, …, j_start + len − 1`. The
/// iterated logs are floored at `1e-3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropySchedule {
    pub j_start: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub delta: Vec<f64>,
}

impl EntropySchedule {
    pub fn new(j_start: usize, len: usize) -> Result<Self> {
        if j_start < 2 {
            return Err(Error::Precondition("schedule needs j_start >= 2".into()));
        }
        let js = j_start..j_start + len;
        Ok(EntropySchedule {
            j_start,
            a: js.clone().map(Self::a_j).collect(),
            b: js.clone().map(Self::b_j).collect(),
            delta: js.map(Self::delta_j).collect(),
        })
    }

    pub fn a_j(j: usize) -> f64 {
        1.0 / j as f64
    }

    pub fn b_j(j: usize) -> f64 {
        let (l1, l2, l3) = guarded_logs(j);
        1.0 / ((j as f64 + 1.0) * l1 * l2 * l3)
    }

    pub fn delta_j(j: usize) -> f64 {
        1.0 / guarded_logs(j).2
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `I_j = [a_{j+1}, a_j]`.
    pub fn interval(j: usize) -> (f64, f64) {
        (Self::a_j(j + 1), Self::a_j(j))
    }

    /// `β(a_j) − β(a_{j+1})` for every `j` of the schedule.
    pub fn increments(&self, beta: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let j = self.j_start + k;
                beta(Self::a_j(j)) - beta(Self::a_j(j + 1))
            })
            .collect()
    }
}

/// Entropy-condition verdict at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyCertificate {
    pub sigma: f64,
    pub beta_prime_est: f64,
    pub bound: f64,
    pub slack: f64,
    pub stencil: Vec<f64>,
}

impl EntropyCertificate {
    pub fn accepted(&self) -> bool {
        self.slack >= 0.0
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

/// Forward difference quotient `(β(σ+w) − β(σ))/w`; the window must contain
/// at least three samples.
pub fn beta_prime_estimate(curve: &WidthCurve, sigma: f64, window: f64) -> Result<f64> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::Precondition(format!("window must be positive, got {window}")));
    }
    let hi = sigma + window;
    let found = curve
        .sigmas
        .iter()
        .filter(|&&s| (s >= sigma || close(s, sigma)) && (s <= hi || close(s, hi)))
        .count();
    let last = *curve.sigmas.last().unwrap_or(&f64::NEG_INFINITY);
    if found < 3 || (hi > last && !close(hi, last)) {
        return Err(Error::InsufficientSamples { needed: 3, found });
    }
    let hi = hi.min(last);
    Ok((curve.beta_at(hi)? - curve.beta_at(sigma)?) / window)
}

/// Certificates at every admissible grid point, accepted or not. The window
/// at `σ_i` reaches `σ_{i+steps}`.
pub fn classify_entropy_sigmas(curve: &WidthCurve, steps: usize) -> Result<Vec<EntropyCertificate>> {
    if steps < 2 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            found: steps + 1,
        });
    }
    let max = entropy_sigma_max();
    let mut out = Vec::new();
    for i in 0..curve.len() {
        let sigma = curve.sigmas[i];
        if !(sigma > 0.0 && sigma < max) || i + steps >= curve.len() {
            continue;
        }
        let window = curve.sigmas[i + steps] - sigma;
        let est = beta_prime_estimate(curve, sigma, window)?;
        let bound = entropy_bound(sigma, EntropyForm::Derivative)?;
        out.push(EntropyCertificate {
            sigma,
            beta_prime_est: est,
            bound,
            slack: bound - est,
            stencil: curve.sigmas[i..=i + steps].to_vec(),
        });
    }
    Ok(out)
}

/// Grid points where the forward derivative estimate obeys the entropy bound.
pub fn select_entropy_sigmas(curve: &WidthCurve) -> Result<Vec<EntropyCertificate>> {
    select_entropy_sigmas_with(curve, DEFAULT_WINDOW_STEPS)
}

pub fn select_entropy_sigmas_with(
    curve: &WidthCurve,
    steps: usize,
) -> Result<Vec<EntropyCertificate>> {
    Ok(classify_entropy_sigmas(curve, steps)?
        .into_iter()
        .filter(EntropyCertificate::accepted)
        .collect())
}

/// Fraction of the samples in `I_j` whose forward quotient to the next
/// sample is at most `1/(a_j log(1/a_j) loglog(1/a_j))`.
pub fn good_interval_fraction(curve: &WidthCurve, schedule: &EntropySchedule, j: usize) -> Result<f64> {
    if j < schedule.j_start {
        return Err(Error::Precondition(format!(
            "j = {j} precedes the schedule start {}",
            schedule.j_start
        )));
    }
    let (lo, hi) = EntropySchedule::interval(j);
    let s = &curve.sigmas;
    if s.is_empty() || s[0] > lo || *s.last().unwrap() < hi {
        return Err(Error::Coverage(format!(
            "grid does not cover I_{j} = [{lo}, {hi}]"
        )));
    }
    let idx: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= lo && s[i] <= hi).collect();
    if idx.len() < 16 {
        return Err(Error::Coverage(format!(
            "I_{j} holds {} samples, need 16",
            idx.len()
        )));
    }
    let bound = entropy_bound(EntropySchedule::a_j(j), EntropyForm::Derivative)?;
    let pairs = idx.len() - 1;
    let good = idx
        .windows(2)
        .filter(|w| {
            let (a, b) = (w[0], w[1]);
            (curve.betas[b] - curve.betas[a]) / (s[b] - s[a]) <= bound
        })
        .count();
    Ok(good as f64 / pairs as f64)
}

/// `min_{j < prefix} increment_j / b_j`.
pub fn liminf_ratio_check(increments: &[f64], b: &[f64], prefix: usize) -> Result<f64> {
    let available = increments.len().min(b.len());
    if prefix == 0 || prefix > available {
        return Err(Error::InsufficientSamples {
            needed: prefix.max(1),
            found: available,
        });
    }
    if b[..prefix].iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Precondition("schedule b must be positive".into()));
    }
    Ok(increments[..prefix]
        .iter()
        .zip(&b[..prefix])
        .map(|(i, b)| i / b)
        .fold(f64::INFINITY, f64::min))
}

/// Indices `j` (offsets into the schedule) with `increment_j ≤ b_j`.
pub fn accepted_indices(increments: &[f64], b: &[f64]) -> Vec<usize> {
    increments
        .iter()
        .zip(b)
        .enumerate()
        .filter(|(_, (i, b))| i <= b)
        .map(|(k, _)| k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(sigmas: Vec<f64>, f: impl Fn(f64) -> f64) -> WidthCurve {
        let b = sigmas.iter().map(|&s| f(s)).collect();
        WidthCurve::from_samples(sigmas, b).unwrap()
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn derivative_of_linear_curve() {
        let c = curve(linspace(0.001, 0.06, 60), |s| s);
        let d = beta_prime_estimate(&c, 0.01, 0.004).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        let c = curve(linspace(0.001, 0.06, 60), |_| 2.0);
        assert_eq!(beta_prime_estimate(&c, 0.01, 0.004).unwrap(), 0.0);
    }

    #[test]
    fn derivative_of_sqrt_curve() {
        let sig: Vec<f64> = (0..40).map(|i| (20 + i) as f64 * 0.0005).collect();
        let c = curve(sig, f64::sqrt);
        let d = beta_prime_estimate(&c, 0.01, 0.001).unwrap();
        let oracle = (0.011f64.sqrt() - 0.1) / 0.001;
        assert!((d - oracle).abs() < 1e-6);
        assert!((d - 4.88).abs() < 5e-3);
    }

    #[test]
    fn narrow_window_is_rejected() {
        let c = curve(linspace(0.001, 0.06, 60), |s| s);
        assert!(matches!(
            beta_prime_estimate(&c, 0.01, 0.0005),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn schedule_values() {
        let s = EntropySchedule::new(16, 1000).unwrap();
        assert_eq!(s.a[0], 1.0 / 16.0);
        for w in s.a.windows(2) {
            assert!(w[1] < w[0]);
        }
        for w in s.delta.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(s.b.iter().all(|&b| b > 0.0));
        let j = 100f64;
        let expected = 1.0 / (101.0 * j.ln() * j.ln().ln() * j.ln().ln().ln());
        assert!((EntropySchedule::b_j(100) / expected - 1.0).abs() < 1e-14);
    }

    #[test]
    fn liminf_examples() {
        let s = EntropySchedule::new(16, 100).unwrap();
        let zeros = vec![0.0; 100];
        assert_eq!(liminf_ratio_check(&zeros, &s.b, 100).unwrap(), 0.0);
        assert_eq!(liminf_ratio_check(&s.b, &s.b, 100).unwrap(), 1.0);
        let geo: Vec<f64> = (0..100).map(|k| 0.5f64.powi((16 + k) as i32)).collect();
        assert!(liminf_ratio_check(&geo, &s.b, 100).unwrap() < 1e-20);
        assert!(liminf_ratio_check(&geo, &s.b, 101).is_err());
    }

    #[test]
    fn constant_curve_accepts_everything() {
        let c = curve(linspace(0.001, 0.065, 50), |_| 1.0);
        let all = classify_entropy_sigmas(&c, 2).unwrap();
        let sel = select_entropy_sigmas(&c).unwrap();
        assert_eq!(all.len(), sel.len());
        assert_eq!(sel.len(), 48);
        for cert in &sel {
            assert_eq!(cert.slack, cert.bound - cert.beta_prime_est);
            assert_eq!(cert.stencil.len(), 3);
        }
    }

    #[test]
    fn steep_ramp_is_rejected() {
        let grid = linspace(0.015, 0.03, 61);
        let ramp = |s: f64| s + 1e6 * (s.clamp(0.02, 0.021) - 0.02);
        let c = curve(grid, ramp);
        let sel = select_entropy_sigmas(&c).unwrap();
        for cert in &sel {
            assert!(*cert.stencil.last().unwrap() <= 0.02 + 1e-12 || cert.sigma >= 0.021 - 1e-12);
        }
        assert!(sel.iter().any(|c| c.sigma < 0.02));
    }

    #[test]
    fn good_fraction_examples() {
        let s = EntropySchedule::new(16, 10).unwrap();
        let (lo, hi) = EntropySchedule::interval(20);
        let grid = linspace(lo, hi, 101);
        assert_eq!(good_interval_fraction(&curve(grid.clone(), |_| 1.0), &s, 20).unwrap(), 1.0);
        assert_eq!(good_interval_fraction(&curve(grid.clone(), |s| s), &s, 20).unwrap(), 1.0);
        let len = hi - lo;
        let (r0, r1) = (lo + 0.35 * len, lo + 0.65 * len);
        let adversarial = |s: f64| 1e4 * (s.clamp(r0, r1) - r0);
        let f = good_interval_fraction(&curve(grid, adversarial), &s, 20).unwrap();
        assert!((f - 0.7).abs() < 0.02, "{f}");
        let sparse = linspace(lo, hi, 10);
        assert!(matches!(
            good_interval_fraction(&curve(sparse, |s| s), &s, 20),
            Err(Error::Coverage(_))
        ));
    }
}
