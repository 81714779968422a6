//! Check rows shared by run records, `selftest` and the acceptance tests,
//! and the acceptance suite itself.

use std::time::Instant;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{GridConfig, RunConfig, Spacing};
use crate::critical::{
    index_semicontinuity_check, locate_near_critical, morse_from_hessian, refine_record,
    CriticalPointRecord, RefineOptions,
};
use crate::deform::{build_chart, deform_phi, ChartCoords, CutoffZeta};
use crate::entropy::{
    classify_entropy_sigmas, good_interval_fraction, liminf_ratio_check, select_entropy_sigmas,
    EntropySchedule, DEFAULT_WINDOW_STEPS,
};
use crate::error::{Error, Result};
use crate::functionals::{self, make_loop_length, REGISTERED};
use crate::model::{
    grad_check, hessian_check, Matrix, Point, SigmaFamily,
    ToleranceProfile, Vector,
};
use crate::perturb::TiltedFamily;
use crate::pipeline;
use crate::sweepout::WidthCurve;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub tolerance: String,
    pub pass: bool,
}

impl CheckRow {
    pub fn new(
        name: impl Into<String>,
        expected: impl Into<String>,
        actual: impl Into<String>,
        tolerance: impl Into<String>,
        pass: bool,
    ) -> Self {
        CheckRow {
            name: name.into(),
            expected: expected.into(),
            actual: actual.into(),
            tolerance: tolerance.into(),
            pass,
        }
    }

    /// `|actual − expected| ≤ tol`.
    pub fn close(name: impl Into<String>, expected: f64, actual: f64, tol: f64) -> Self {
        let pass = (actual - expected).abs() <= tol;
        CheckRow::new(
            name,
            format!("{expected:.6e}"),
            format!("{actual:.6e}"),
            format!("{tol:.1e}"),
            pass,
        )
    }

    /// `actual ≤ bound`.
    pub fn at_most(name: impl Into<String>, actual: f64, bound: f64) -> Self {
        CheckRow::new(
            name,
            format!("<= {bound:.6e}"),
            format!("{actual:.6e}"),
            "-",
            actual <= bound,
        )
    }

    pub fn flag(name: impl Into<String>, expected: &str, actual: impl Into<String>, pass: bool) -> Self {
        CheckRow::new(name, expected, actual, "-", pass)
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {} | expected {} | actual {} | tol {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.expected,
            self.actual,
            self.tolerance
        )
    }
}

pub fn format_table(rows: &[CheckRow]) -> String {
    let w = |f: &dyn Fn(&CheckRow) -> usize, h: &str| rows.iter().map(f).max().unwrap_or(0).max(h.len());
    let wn = w(&|r| r.name.len(), "check");
    let we = w(&|r| r.expected.len(), "expected");
    let wa = w(&|r| r.actual.len(), "actual");
    let mut out = format!(
        "{:<4}  {:<wn$}  {:<we$}  {:<wa$}  tolerance\n",
        "", "check", "expected", "actual"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<4}  {:<wn$}  {:<we$}  {:<wa$}  {}\n",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.expected,
            r.actual,
            r.tolerance
        ));
    }
    out
}

/// Acceptance groups in suite order.
pub const GROUPS: &[&str] = &[
    "mountain_pass",
    "index_bound",
    "deformation",
    "perturbation",
    "entropy",
    "near_critical",
    "geodesic",
    "hygiene",
];

#[derive(Clone, Debug, Default)]
pub struct SuiteOptions {
    /// Runs only the groups whose name contains this string.
    pub filter: Option<String>,
    /// Group whose tolerances are corrupted so that it must fail.
    pub inject: Option<String>,
}

/// Tolerance source of one group. Injection replaces every tolerance by a
/// value no measurement can meet.
struct Ctx {
    inject: bool,
}

impl Ctx {
    fn tol(&self, t: f64) -> f64 {
        if self.inject {
            -1.0
        } else {
            t
        }
    }

    fn at_least(&self, name: impl Into<String>, actual: f64, bound: f64) -> CheckRow {
        let bound = if self.inject { f64::INFINITY } else { bound };
        CheckRow::new(
            name,
            format!(">= {bound:.6e}"),
            format!("{actual:.6e}"),
            "-",
            actual >= bound,
        )
    }

    fn within(&self, name: impl Into<String>, value: f64, lo: f64, hi: f64) -> CheckRow {
        let t = self.tol(0.0);
        CheckRow::new(
            name,
            format!("[{lo:.6e}, {hi:.6e}]"),
            format!("{value:.6e}"),
            "-",
            lo - t <= value && value <= hi + t,
        )
    }
}

fn cfg(problem: &str) -> RunConfig {
    RunConfig {
        problem: problem.into(),
        ..RunConfig::default()
    }
}

fn runtime(c: &Ctx, t: Instant, limit: f64) -> CheckRow {
    CheckRow::at_most("runtime [s]", t.elapsed().as_secs_f64(), c.tol(limit))
}

fn final_record(rec: &pipeline::RunRecord) -> Result<&CriticalPointRecord> {
    rec.final_records()
        .first()
        .copied()
        .ok_or_else(|| Error::Precondition("the run emitted no critical point".into()))
}

fn index_of(r: &CriticalPointRecord) -> f64 {
    r.index().map_or(f64::INFINITY, |i| i as f64)
}

fn ball(rng: &mut ChaCha8Rng, k: usize, radius: f64) -> Vector {
    let g = Vector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let n = g.norm();
    if n == 0.0 {
        return g;
    }
    let r = radius * rng.random::<f64>().powf(1.0 / k as f64);
    g * (r / n)
}

fn sphere(rng: &mut ChaCha8Rng, k: usize, radius: f64) -> Vector {
    loop {
        let g = Vector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = g.norm();
        if n > 0.0 {
            return g * (radius / n);
        }
    }
}

fn mountain_pass(c: &Ctx) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for (key, level) in [("quadratic_saddle:neg=1,pos=1", 0.0), ("double_well", 1.0)] {
        let t = Instant::now();
        let config = cfg(key);
        let rec = pipeline::run(&config)?;
        let r = final_record(&rec)?;
        let mut group = vec![
            CheckRow::close("beta(0)", level, rec.width.beta0(), c.tol(1e-4)),
            CheckRow::close("distance to the saddle", 0.0, r.point.as_vector().norm(), c.tol(1e-6)),
            CheckRow::close("index", config.d as f64, index_of(r), c.tol(0.0)),
            runtime(c, t, 10.0),
        ];
        for row in &mut group {
            row.name = format!("{key} {}", row.name);
        }
        rows.extend(group);
    }
    Ok(rows)
}

/// Critical points of a planar σ-family found on a grid: local minima of
/// `‖∇F_σ‖` over the eight neighbors, below `cutoff`, classified by the sign
/// pattern of the Hessian.
fn grid_critical_points(
    family: &dyn SigmaFamily,
    sigma: f64,
    lo: f64,
    hi: f64,
    step: f64,
    cutoff: f64,
) -> Result<Vec<(Vector, usize)>> {
    let n = ((hi - lo) / step).round() as usize + 1;
    let coord = |i: usize| lo + i as f64 * step;
    let norms: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let x = Vector::from_vec(vec![coord(i), coord(j)]);
                    family.gradient(sigma, &x).map(|g| g.norm())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let tol = ToleranceProfile::default();
    let mut out = Vec::new();
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let g = norms[i][j];
            if g >= cutoff {
                continue;
            }
            let is_min = (i - 1..=i + 1)
                .flat_map(|a| (j - 1..=j + 1).map(move |b| (a, b)))
                .filter(|&(a, b)| (a, b) != (i, j))
                .all(|(a, b)| g < norms[a][b] || (g == norms[a][b] && (i, j) < (a, b)));
            if is_min {
                let x = Vector::from_vec(vec![coord(i), coord(j)]);
                let m = morse_from_hessian(&family.hessian(sigma, &x)?, &tol)?;
                out.push((x, m.index));
            }
        }
    }
    Ok(out)
}

fn index_bound(c: &Ctx) -> Result<Vec<CheckRow>> {
    let t = Instant::now();
    let key = "planted_saddle:A=1,w=0.5";
    let config = cfg(key);
    let rec = pipeline::run(&config)?;
    let run = rec
        .runs
        .first()
        .ok_or_else(|| Error::Precondition("no entropy-certified sigma".into()))?;
    let r = final_record(&rec)?;
    let naive = run.surgery.first().map(|s| s.index);
    let mut rows = vec![
        CheckRow::flag(
            "surgery at the naive min-max point",
            "index 2",
            format!("{naive:?} over {} round(s)", run.surgery.len()),
            naive == Some(2),
        ),
        CheckRow::at_most("final index", index_of(r), c.tol(1.0)),
    ];
    let problem = functionals::build(key)?;
    let found = grid_critical_points(&*problem.family, r.sigma, -1.5, 1.5, 1e-3, 0.05)?;
    let ones: Vec<&Vector> = found.iter().filter(|p| p.1 == 1).map(|p| &p.0).collect();
    let twos = found.iter().filter(|p| p.1 == 2).count();
    rows.push(CheckRow::flag(
        "grid enumeration",
        "2 index-1 saddles, 1 index-2 maximum",
        format!("{} index-1, {twos} index-2", ones.len()),
        ones.len() == 2 && twos == 1,
    ));
    let nearest = ones
        .iter()
        .map(|p| (*p - r.point.as_vector()).norm())
        .fold(f64::INFINITY, f64::min);
    rows.push(CheckRow::close(
        "distance to the nearest grid index-1 saddle",
        0.0,
        nearest,
        c.tol(1e-3),
    ));
    rows.push(runtime(c, t, 60.0));
    Ok(rows)
}

fn deformation(c: &Ctx) -> Result<Vec<CheckRow>> {
    const POINTS: usize = 10_000;
    const BOUNDARY: usize = 2_000;
    let cases: [(&str, &[f64]); 5] = [
        ("double_well", &[0.0, 0.0]),
        ("quadratic_saddle:neg=1,pos=1", &[0.0, 0.0]),
        ("quadratic_saddle:neg=2,pos=1", &[0.0, 0.0, 0.0]),
        ("four_well", &[0.0, 0.0]),
        ("monkey_saddle:confine=1,c=-0.03", &[0.1, 0.0]),
    ];
    let tol = ToleranceProfile::default();
    let zeta = CutoffZeta;
    let mut rows = Vec::new();
    for (k, (key, seed)) in cases.iter().enumerate() {
        let problem = functionals::build(key)?;
        let fam = &*problem.family;
        let opts = RefineOptions {
            tol_grad: 1e-12,
            ..RefineOptions::default()
        };
        let rec = refine_record(&Point::new(seed.to_vec())?, fam, 0.0, &opts, &tol, |_| Ok(None))?;
        let chart = build_chart(&rec, fam, 0.0, &tol, None)?;
        let (ni, np) = (chart.index(), chart.pos_basis.len());
        let mut rng = ChaCha8Rng::seed_from_u64(42 + k as u64);

        let mut violations = 0;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..POINTS {
            let z = ChartCoords {
                neg: ball(&mut rng, ni, 2.5 * chart.r1),
                pos: ball(&mut rng, np, 1.25 * chart.r2),
            };
            let x = chart.inverse(&z);
            let rise = fam.value(0.0, &deform_phi(&x, &chart, &zeta))? - fam.value(0.0, &x)?;
            worst = worst.max(rise);
            if rise > 1e-12 {
                violations += 1;
            }
        }
        rows.push(CheckRow::new(
            format!("{key} F(Phi(x)) <= F(x) + 1e-12 violations"),
            format!("0 of {POINTS}"),
            format!("{violations} (max rise {worst:.3e})"),
            "1e-12",
            violations as f64 <= c.tol(0.0),
        ));

        let mut tested = 0;
        let mut err: f64 = 0.0;
        for b in 0..BOUNDARY {
            // With no positive block the side ‖z₊‖ = r2 is empty.
            let z = if b % 2 == 0 || np == 0 {
                ChartCoords {
                    neg: sphere(&mut rng, ni, chart.r1),
                    pos: ball(&mut rng, np, chart.r2),
                }
            } else {
                ChartCoords {
                    neg: ball(&mut rng, ni, chart.r1),
                    pos: sphere(&mut rng, np, chart.r2),
                }
            };
            let x = chart.inverse(&z);
            if fam.value(0.0, &x)? > chart.level + chart.delta {
                continue;
            }
            tested += 1;
            let w = chart.coords(&deform_phi(&x, &chart, &zeta));
            err = err.max((w.neg.norm() - chart.r1).abs()).max(w.pos.norm());
        }
        rows.push(CheckRow::new(
            format!("{key} boundary of C(r1,r2) onto the negative sphere"),
            format!("<= {:.1e} over {tested} points", c.tol(1e-10)),
            format!("{err:.3e}"),
            "1e-10",
            tested > 0 && err <= c.tol(1e-10),
        ));
    }
    Ok(rows)
}

fn perturbation(c: &Ctx) -> Result<Vec<CheckRow>> {
    const SAMPLES: usize = 10_000;
    let t = Instant::now();
    let key = "monkey_saddle:confine=1,c=0";
    let config = cfg(key);
    let rec = pipeline::run(&config)?;
    let run = rec
        .runs
        .iter()
        .find(|r| r.degenerate.is_some())
        .ok_or_else(|| Error::Precondition("the degenerate branch did not run".into()))?;
    let dg = run.degenerate.as_ref().expect("checked");
    let mut rows = Vec::new();
    for &eps in &config.perturb.epsilons {
        let tries: Vec<_> = dg.attempts.iter().filter(|a| a.epsilon == eps).collect();
        let used = tries
            .iter()
            .position(|a| a.status == crate::perturb::CertifyStatus::Certified && a.critical_points > 0)
            .map(|p| p + 1);
        rows.push(CheckRow::flag(
            format!("eps={eps:.0e} certified non-degenerate"),
            "within 10 attempts",
            format!("{used:?} of {}", tries.len()),
            used.is_some_and(|u| u <= 10),
        ));
    }
    let problem = functionals::build(key)?;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for spec in &dg.specs {
        let tilted = TiltedFamily::new(problem.family.clone(), spec.clone())?;
        let center = Vector::from_column_slice(&spec.bump.centers[0]);
        let reach = 4.0 * spec.bump.delta;
        let (mut above, mut outside, mut changed) = (0usize, 0usize, 0usize);
        for _ in 0..SAMPLES {
            let x = &center + Vector::from_fn(2, |_, _| rng.random_range(-reach..reach));
            let f = problem.family.value(run.sigma, &x)?;
            let ft = tilted.value(run.sigma, &x)?;
            if ft > f {
                above += 1;
            }
            if spec.bump.dist_to_centers(&x) > 2.0 * spec.bump.delta {
                outside += 1;
                if ft != f {
                    changed += 1;
                }
            }
        }
        let e = spec.epsilon;
        rows.push(CheckRow::new(
            format!("eps={e:.0e} F~ <= F"),
            format!("0 of {SAMPLES} above"),
            above.to_string(),
            "0",
            above as f64 <= c.tol(0.0),
        ));
        rows.push(CheckRow::new(
            format!("eps={e:.0e} F~ = F outside N_2delta(K)"),
            format!("0 of {outside} differ"),
            changed.to_string(),
            "exact",
            outside > 0 && changed as f64 <= c.tol(0.0),
        ));
    }
    rows.push(CheckRow::close(
        "certified record per eps",
        config.perturb.epsilons.len() as f64,
        dg.sequence.len() as f64,
        c.tol(0.0),
    ));
    let origin = Point::new(vec![0.0, 0.0])?;
    let limit = CriticalPointRecord::evaluate(
        &origin,
        &*problem.family,
        run.sigma,
        &ToleranceProfile::default(),
        None,
    )?;
    rows.push(CheckRow::flag(
        "analytic limit",
        "index 0, nullity 2",
        format!("index {:?}, nullity {:?}", limit.index(), limit.nullity()),
        limit.index() == Some(0) && limit.nullity() == Some(2),
    ));
    rows.push(CheckRow::flag(
        "index semicontinuity against the analytic limit",
        "true",
        format!("{} certified points", dg.certified_points.len()),
        !dg.certified_points.is_empty() && index_semicontinuity_check(&dg.certified_points, &limit),
    ));
    rows.push(runtime(c, t, 30.0));
    Ok(rows)
}

struct Synthetic {
    name: &'static str,
    beta: fn(f64) -> f64,
    /// Derivative away from the jumps.
    slope: fn(f64) -> f64,
    jumps: &'static [f64],
}

const SYNTHETIC: [Synthetic; 5] = [
    Synthetic {
        name: "linear",
        beta: |s| 1.0 + 10.0 * s,
        slope: |_| 10.0,
        jumps: &[],
    },
    Synthetic {
        name: "sqrt",
        beta: |s| 1.0 + 3.0 * s.sqrt(),
        slope: |s| 1.5 / s.sqrt(),
        jumps: &[],
    },
    Synthetic {
        name: "staircase",
        beta: |s| 1.0 + 0.05 * (s / 0.01).floor(),
        slope: |_| 0.0,
        jumps: &[0.01, 0.02, 0.03, 0.04, 0.05, 0.06],
    },
    Synthetic {
        name: "ramp-with-jump",
        beta: |s| 1.0 + 5.0 * s + if s >= 0.03 { 0.1 } else { 0.0 },
        slope: |_| 5.0,
        jumps: &[0.03],
    },
    Synthetic {
        name: "constant",
        beta: |_| 1.0,
        slope: |_| 0.0,
        jumps: &[],
    },
];

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn bound_oracle(s: f64) -> f64 {
    let l = (1.0 / s).ln();
    1.0 / (s * l * l.ln())
}

fn entropy(c: &Ctx) -> Result<Vec<CheckRow>> {
    let t = Instant::now();
    let mut rows = Vec::new();
    let grid = linspace(0.002, 0.06, 400);
    let fine = linspace(1.0 / 21.0, 1.0 / 16.0, 1000);
    let steps = DEFAULT_WINDOW_STEPS;
    for curve in &SYNTHETIC {
        let betas = grid.iter().map(|&s| (curve.beta)(s)).collect();
        let wc = WidthCurve::from_samples(grid.clone(), betas)?;
        let accepted: Vec<f64> = select_entropy_sigmas(&wc)?.iter().map(|c| c.sigma).collect();
        let all = classify_entropy_sigmas(&wc, steps)?;
        let (mut judged, mut errors) = (0, 0);
        for cert in &all {
            let i = wc.index_of(cert.sigma).expect("grid point");
            let (s, e) = (grid[i], grid[i + steps]);
            let oracle = if curve.jumps.iter().any(|&j| s < j && j <= e) {
                ((curve.beta)(e) - (curve.beta)(s)) / (e - s)
            } else {
                (curve.slope)(s)
            };
            let bound = bound_oracle(s);
            let margin = bound - oracle;
            if margin.abs() <= 0.1 * bound {
                continue;
            }
            judged += 1;
            if (margin >= 0.0) != accepted.contains(&s) {
                errors += 1;
            }
        }
        rows.push(CheckRow::new(
            format!("{} classification errors", curve.name),
            format!("0 of {judged}"),
            errors.to_string(),
            "0",
            judged > 0 && errors as f64 <= c.tol(0.0),
        ));

        let betas = fine.iter().map(|&s| (curve.beta)(s)).collect();
        let fc = WidthCurve::from_samples(fine.clone(), betas)?;
        let schedule = EntropySchedule::new(16, 5)?;
        for j in 16..=20 {
            let (lo, hi) = EntropySchedule::interval(j);
            let bound = bound_oracle(EntropySchedule::a_j(j));
            let compliant = !curve.jumps.iter().any(|&x| lo <= x && x <= hi)
                && fine
                    .iter()
                    .filter(|&&s| lo <= s && s <= hi)
                    .all(|&s| (curve.slope)(s) <= bound);
            if !compliant {
                continue;
            }
            let frac = good_interval_fraction(&fc, &schedule, j)?;
            rows.push(c.at_least(
                format!("{} good fraction on I_{j} vs 1 - 2 delta_j", curve.name),
                frac,
                1.0 - 2.0 * EntropySchedule::delta_j(j),
            ));
            rows.push(c.at_least(format!("{} good fraction on I_{j}", curve.name), frac, 1.0));
        }
    }

    let schedule = EntropySchedule::new(16, 1_000_000)?;
    let summable = schedule.increments(|s| 1.0 + s);
    let mins: Vec<f64> = [100, 1_000, 10_000, 100_000]
        .iter()
        .map(|&p| liminf_ratio_check(&summable[p..], &schedule.b[p..], 9 * p))
        .collect::<Result<_>>()?;
    rows.push(CheckRow::flag(
        "summable increments: minima of increment/b_j over decades",
        "strictly decreasing",
        format!("{:?}", mins.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>()),
        mins.windows(2).all(|w| w[1] < w[0]),
    ));
    let mins = vec![liminf_ratio_check(&summable, &schedule.b, 1_000_000)?];
    rows.push(CheckRow::at_most(
        "summable increments: min ratio over 1e6 terms",
        *mins.last().expect("nonempty"),
        c.tol(1e-4),
    ));
    let doubled: Vec<f64> = schedule.b.iter().map(|b| 2.0 * b).collect();
    rows.push(CheckRow::close(
        "increments 2 b_j: min ratio",
        2.0,
        liminf_ratio_check(&doubled, &schedule.b, 1_000_000)?,
        c.tol(1e-12),
    ));
    rows.push(runtime(c, t, 5.0));
    Ok(rows)
}

fn near_critical(c: &Ctx) -> Result<Vec<CheckRow>> {
    let t = Instant::now();
    let config = RunConfig {
        grid: GridConfig {
            include_zero: true,
            min: 0.005,
            max: 0.06,
            points: 12,
            spacing: Spacing::Linear,
        },
        ..cfg("double_well")
    };
    let (problem, curve, _) = pipeline::width_curve(&config)?;
    let sweeps = curve
        .tightened_sweepouts
        .as_ref()
        .ok_or_else(|| Error::Precondition("width curve without sweepouts".into()))?;
    let fam = &*problem.family;
    let mut rows = Vec::new();
    for sigma in [0.01, 0.02] {
        let i = curve
            .sigmas
            .iter()
            .position(|s| (s - sigma).abs() < 1e-12)
            .ok_or_else(|| Error::Precondition(format!("{sigma} is not on the grid")))?;
        let (s, sk, s2) = (curve.sigmas[i], curve.sigmas[i + 1], curve.sigmas[i + 2]);
        let cert = locate_near_critical(&sweeps[i + 1], fam, s, sk, &curve)?;
        let beta_prime = (curve.betas[i + 2] - curve.betas[i]) / (s2 - s);
        let delta = (2.0 * (beta_prime + 2.0) * (sk - s)).sqrt();
        let x = cert.point.as_vector();
        let gap = sk - s;
        rows.push(CheckRow::at_most(
            format!("sigma={s} grad_norm vs delta_k"),
            fam.gradient(s, x)?.norm(),
            c.tol(delta),
        ));
        rows.push(c.within(
            format!("sigma={s} value in bracket"),
            fam.value(s, x)?,
            curve.betas[i] - gap,
            curve.betas[i + 1] + gap,
        ));
    }
    rows.push(runtime(c, t, 20.0));
    Ok(rows)
}

fn geodesic(c: &Ctx) -> Result<Vec<CheckRow>> {
    let t = Instant::now();
    let key = "ellipsoid_loop:a=1,c=0.5,N=64";
    let rec = pipeline::run(&cfg(key))?;
    let run = rec
        .runs
        .first()
        .ok_or_else(|| Error::Precondition("no entropy-certified sigma".into()))?;
    let r = final_record(&rec)?;
    let smallest = rec
        .entropy
        .iter()
        .filter(|e| e.accepted())
        .map(|e| e.sigma)
        .fold(f64::INFINITY, f64::min);
    let problem = functionals::build(key)?;
    let config = problem
        .loop_config()
        .ok_or_else(|| Error::Precondition("not a loop problem".into()))?;
    let length = make_loop_length(config.clone()).value(r.point.as_vector())?;
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(vec![
        CheckRow::flag(
            "smallest entropy-certified sigma",
            &format!("{smallest:.6e}"),
            format!("{:.6e}", run.sigma),
            run.sigma == smallest,
        ),
        CheckRow::close("loop length", two_pi, length, c.tol(0.02 * two_pi)),
        CheckRow::at_most("index", index_of(r), c.tol(1.0)),
        CheckRow::at_most(
            "entropy residual",
            r.entropy_residual.unwrap_or(f64::INFINITY),
            c.tol(0.0),
        ),
        runtime(c, t, 300.0),
    ])
}

fn sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Matrix {
    let a = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
    (&a + a.transpose()) * 0.5
}

fn hygiene(c: &Ctx) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for key in REGISTERED {
        let problem = functionals::build(key)?;
        let (mut ge, mut he) = (0.0f64, 0.0f64);
        for _ in 0..100 {
            let x = Point::from_vector(problem.sample_point(&mut rng))?;
            for h in problem.handles() {
                let gs = h.gradient(x.as_vector())?.amax().max(1.0);
                let hs = h.hessian(x.as_vector())?.amax().max(1.0);
                ge = ge.max(grad_check(&h, &x, 1e-5)? / gs);
                he = he.max(hessian_check(&h, &x, 1e-5)? / hs);
            }
        }
        rows.push(CheckRow::at_most(
            format!("{key} gradient FD error / max(1, |grad|)"),
            ge,
            c.tol(1e-5),
        ));
        rows.push(CheckRow::at_most(
            format!("{key} Hessian FD error / max(1, |hess|)"),
            he,
            c.tol(1e-4),
        ));
    }

    let tol = ToleranceProfile::default();
    let mut violations = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=20);
        let a = sym(&mut rng, n, 1.0);
        let scale = 10f64.powf(rng.random_range(-8.0..-1.0));
        let e = sym(&mut rng, n, scale);
        let la = morse_from_hessian(&a, &tol)?.eigenvalues;
        let lb = morse_from_hessian(&(&a + &e), &tol)?.eigenvalues;
        let norm_e = SymmetricEigen::new(e.clone())
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, l| m.max(l.abs()));
        let norm_a = la.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let shift = la.iter().zip(&lb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if shift > norm_e + 1e-12 * norm_a.max(1.0) {
            violations += 1;
        }
    }
    rows.push(CheckRow::new(
        "Weyl eigenvalue stability",
        "0 of 100 pairs",
        violations.to_string(),
        "1e-12 relative",
        violations as f64 <= c.tol(0.0),
    ));

    let base = std::env::temp_dir().join(format!("vmm-determinism-{}", std::process::id()));
    let mut docs = Vec::new();
    for k in 0..2 {
        let dir = base.join(k.to_string());
        pipeline::emit(&pipeline::run(&cfg("double_well"))?, &dir)?;
        let mut v: serde_json::Value = crate::io::read_json(&dir.join("run.json"))?;
        if let Some(m) = v.as_object_mut() {
            m.remove("timings");
        }
        docs.push(v);
    }
    let _ = std::fs::remove_dir_all(&base);
    rows.push(CheckRow::flag(
        "seed 42 runs give identical run.json without timings",
        "identical",
        if docs[0] == docs[1] { "identical" } else { "different" },
        docs[0] == docs[1],
    ));
    Ok(rows)
}

/// Runs one group; row names are prefixed with the group.
pub fn run_group(name: &str, inject: bool) -> Result<Vec<CheckRow>> {
    let c = Ctx { inject };
    let rows = match name {
        "mountain_pass" => mountain_pass(&c),
        "index_bound" => index_bound(&c),
        "deformation" => deformation(&c),
        "perturbation" => perturbation(&c),
        "entropy" => entropy(&c),
        "near_critical" => near_critical(&c),
        "geodesic" => geodesic(&c),
        "hygiene" => hygiene(&c),
        _ => {
            return Err(Error::Config(format!(
                "unknown acceptance group '{name}' (valid: {})",
                GROUPS.join(", ")
            )))
        }
    };
    let rows = rows.unwrap_or_else(|e| vec![CheckRow::flag("run", "no error", e.to_string(), false)]);
    Ok(rows
        .into_iter()
        .map(|mut r| {
            r.name = format!("{name}: {}", r.name);
            r
        })
        .collect())
}

pub fn run_suite(opts: &SuiteOptions) -> Result<Vec<CheckRow>> {
    if let Some(g) = &opts.inject {
        if !GROUPS.contains(&g.as_str()) {
            return Err(Error::Config(format!(
                "cannot inject into unknown group '{g}' (valid: {})",
                GROUPS.join(", ")
            )));
        }
    }
    let selected: Vec<&str> = GROUPS
        .iter()
        .copied()
        .filter(|g| opts.filter.as_deref().is_none_or(|f| g.contains(f)))
        .collect();
    if selected.is_empty() {
        return Err(Error::Config(format!(
            "filter '{}' matches no group (valid: {})",
            opts.filter.as_deref().unwrap_or_default(),
            GROUPS.join(", ")
        )));
    }
    let mut rows = Vec::new();
    for g in selected {
        rows.extend(run_group(g, opts.inject.as_deref() == Some(g))?);
    }
    Ok(rows)
}
