//! End-to-end run: width curve, entropy selection, localization, refinement,
//! perturbation of degenerate points, surgery on over-indexed ones, and the
//! emitted artifacts.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acceptance::CheckRow;
use crate::config::RunConfig;
use crate::critical::{
    index_semicontinuity_check, locate_near_critical, morse_data, refine_record,
    CriticalPointRecord, NearCriticalCertificate, RefineOptions,
};
use crate::deform::{build_chart, certify_index_bound, surgery_admissible, FamilyKind, SurgeryReport};
use crate::entropy::{classify_entropy_sigmas, EntropyCertificate};
use crate::error::{Error, Result};
use crate::functionals::{self, Problem};
use crate::io;
use crate::model::{Point, SigmaFamily, ToleranceProfile, Vector};
use crate::perturb::{
    certify_nondegenerate, sample_tilt, sigma_cover, stability_radius, CertifyStatus,
    PerturbationSpec, TiltedFamily,
};
use crate::sweepout::{
    boundary_value, check_nontrivial, estimate_width_curve, tighten, Sweepout, WidthCurve,
};

/// Tolerance of the independent re-verification of emitted records.
pub const REVERIFY_TOL: f64 = 1e-9;
const CHART_SHRINK: f64 = 0.5;
const COVER_SAMPLES: usize = 256;

/// Seed for stream `(a, b)` derived from the run seed.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbAttempt {
    pub epsilon: f64,
    pub attempt: usize,
    pub rng_seed: u64,
    pub y_norm: f64,
    pub norm_bound: f64,
    pub status: CertifyStatus,
    pub critical_points: usize,
}

/// The degenerate branch at one `σ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegenerateReport {
    /// The unperturbed point, with the null band widened to the degeneracy gap.
    pub limit: CriticalPointRecord,
    pub gap_tol: f64,
    pub attempts: Vec<PerturbAttempt>,
    /// One certified representative per `ε`, in the order tried.
    pub sequence: Vec<CriticalPointRecord>,
    pub specs: Vec<PerturbationSpec>,
    /// Every certified critical point, for the semicontinuity check.
    pub certified_points: Vec<CriticalPointRecord>,
    pub semicontinuity: bool,
    pub sigma_cover: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaRun {
    pub sigma: f64,
    pub grid_index: usize,
    pub certificate: EntropyCertificate,
    pub sigma_k: Vec<f64>,
    pub near_critical: Vec<NearCriticalCertificate>,
    pub record: Option<CriticalPointRecord>,
    /// Tilt in effect for `record`, if the degenerate branch ran.
    pub perturbation: Option<PerturbationSpec>,
    pub index_bound: Option<bool>,
    pub degenerate: Option<DegenerateReport>,
    pub surgery: Vec<SurgeryReport>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub rng_seed: u64,
    pub dim: usize,
    pub boundary_value: f64,
    pub nontrivial: bool,
    pub width: WidthCurve,
    pub entropy: Vec<EntropyCertificate>,
    pub runs: Vec<SigmaRun>,
    pub checks: Vec<CheckRow>,
    pub complete: bool,
    pub notes: Vec<String>,
    pub timings: BTreeMap<String, f64>,
}

impl RunRecord {
    pub fn empty(config: RunConfig) -> Self {
        RunRecord {
            rng_seed: config.seed,
            config,
            dim: 0,
            boundary_value: 0.0,
            nontrivial: false,
            width: WidthCurve {
                sigmas: Vec::new(),
                betas: Vec::new(),
                raw_betas: Vec::new(),
                argmax_frames: Vec::new(),
                tightened_sweepouts: None,
            },
            entropy: Vec::new(),
            runs: Vec::new(),
            checks: Vec::new(),
            complete: false,
            notes: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn final_records(&self) -> Vec<&CriticalPointRecord> {
        self.runs.iter().filter_map(|r| r.record.as_ref()).collect()
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// The record as JSON with timings removed, for determinism comparisons.
    pub fn without_timings(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("record serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("timings");
        }
        v
    }
}

/// Seed path from the configured vertices or the problem default.
pub fn seed_sweepout(config: &RunConfig, problem: &Problem) -> Result<Sweepout> {
    if config.sweepout.vertices.is_empty() {
        return problem.seed_sweepout(config.sweepout.frames);
    }
    let verts: Vec<Vector> = config
        .sweepout
        .vertices
        .iter()
        .map(|v| {
            if v.len() != problem.dim() {
                Err(Error::DimensionMismatch {
                    expected: problem.dim(),
                    found: v.len(),
                })
            } else {
                Ok(Vector::from_column_slice(v))
            }
        })
        .collect::<Result<_>>()?;
    Sweepout::polyline(&verts, config.sweepout.frames)
}

/// Width curve with tightened sweepouts kept, and the boundary value at the
/// first grid point.
pub fn width_curve(config: &RunConfig) -> Result<(Problem, WidthCurve, f64)> {
    config.validate()?;
    let problem = functionals::build(&config.problem)?;
    let seed = seed_sweepout(config, &problem)?;
    let grid = config.grid.sigmas();
    let curve = estimate_width_curve(
        &seed,
        &*problem.family,
        &grid,
        config.sweepout.tighten_budget,
        true,
    )?;
    let bv = boundary_value(&seed, &*problem.family, grid[0])?;
    Ok((problem, curve, bv))
}

fn refine_opts(config: &RunConfig, problem: &Problem, tol_grad: f64) -> RefineOptions {
    RefineOptions {
        tol_grad,
        budget: config.budget.refine,
        bound: problem.bound,
    }
}

fn evaluate_in(
    problem: &Problem,
    family: &dyn SigmaFamily,
    x: &Point,
    sigma: f64,
    tol: &ToleranceProfile,
) -> Result<CriticalPointRecord> {
    let q = problem.morse_subspace(x.as_vector())?;
    CriticalPointRecord::evaluate(x, family, sigma, tol, q.as_ref())
}

/// Degenerate when the smallest |eigenvalue| is within the gap that the
/// achieved gradient norm cannot resolve.
fn is_degenerate(record: &CriticalPointRecord, tol: &ToleranceProfile) -> bool {
    record
        .morse
        .as_ref()
        .is_none_or(|m| m.nullity > 0 || m.gap < tol.degeneracy_gap(record.grad_norm))
}

fn sup_regularizer_gradient(problem: &Problem, spec: &PerturbationSpec, seed: u64) -> Option<f64> {
    let reg = &problem.viscous.as_ref()?.regularizer;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = problem.dim();
    let r = 2.0 * spec.bump.delta;
    let mut best = 0.0f64;
    for _ in 0..COVER_SAMPLES {
        let c = &spec.bump.centers[rng.random_range(0..spec.bump.centers.len())];
        let x = Vector::from_fn(dim, |i, _| c[i] + rng.random_range(-r..r));
        best = best.max(reg.gradient(&x).ok()?.norm());
    }
    Some(best)
}

/// Perturbs, certifies and refines with decreasing `ε` budgets.
fn degenerate_branch(
    config: &RunConfig,
    problem: &Problem,
    sigma: f64,
    sigma_hi: f64,
    record: &CriticalPointRecord,
    stream: u64,
) -> Result<(DegenerateReport, Option<(CriticalPointRecord, PerturbationSpec)>)> {
    let tol = &config.tolerance;
    let fam = problem.family.clone();
    let k = vec![record.point.clone()];
    let gap_tol = tol.degeneracy_gap(tol.certify_grad);
    let limit_tol = ToleranceProfile {
        null_abs: tol.degeneracy_gap(tol.grad),
        ..tol.clone()
    };
    let limit = evaluate_in(problem, &*fam, &record.point, sigma, &limit_tol)?;
    let mut attempts = Vec::new();
    let mut sequence = Vec::new();
    let mut specs = Vec::new();
    let mut certified_points = Vec::new();
    let mut last = None;
    for (ei, &eps) in config.perturb.epsilons.iter().enumerate() {
        for attempt in 0..config.budget.perturb_retries {
            let seed = derive_seed(config.seed, stream, (ei * 1000 + attempt) as u64);
            let spec = sample_tilt(&k, config.perturb.delta, eps, seed)?;
            let tilted = TiltedFamily::new(fam.clone(), spec.clone())?;
            let cert = certify_nondegenerate(
                &tilted,
                sigma,
                &spec.bump,
                gap_tol,
                config.budget.certify_starts,
                config.budget.refine,
                tol,
                derive_seed(seed, 1, 0),
                &|x| problem.morse_subspace(x),
            )?;
            attempts.push(PerturbAttempt {
                epsilon: eps,
                attempt,
                rng_seed: seed,
                y_norm: spec.y_norm(),
                norm_bound: spec.norm_bound(),
                status: cert.status,
                critical_points: cert.records.len(),
            });
            if !cert.certified() || cert.records.is_empty() {
                continue;
            }
            let records: Vec<CriticalPointRecord> = cert
                .records
                .iter()
                .map(|r| evaluate_in(problem, &tilted, &r.point, sigma, tol))
                .collect::<Result<_>>()?;
            let dist = |r: &CriticalPointRecord| r.point.distance(&record.point);
            let rep = records
                .iter()
                .filter(|r| r.index().is_some_and(|i| i <= config.d))
                .min_by(|a, b| dist(a).total_cmp(&dist(b)))
                .or_else(|| records.iter().min_by(|a, b| dist(a).total_cmp(&dist(b))))
                .cloned()
                .expect("nonempty");
            certified_points.extend(records);
            sequence.push(rep.clone());
            specs.push(spec.clone());
            last = Some((rep, spec));
            break;
        }
    }
    let semicontinuity =
        !certified_points.is_empty() && index_semicontinuity_check(&certified_points, &limit);
    let cover = match (&last, last.as_ref().and_then(|(_, s)| sup_regularizer_gradient(problem, s, stream))) {
        (Some((rep, _)), Some(g)) => {
            let width = stability_radius(rep.morse.as_ref().map_or(0.0, |m| m.gap), g);
            sigma_cover(sigma, sigma_hi, width)?
        }
        _ => Vec::new(),
    };
    Ok((
        DegenerateReport {
            limit,
            gap_tol,
            attempts,
            sequence,
            specs,
            certified_points,
            semicontinuity,
            sigma_cover: cover,
        },
        last,
    ))
}

/// Surgery at over-indexed points followed by re-tightening, until the
/// refined point obeys the index bound or the round budget is spent.
#[allow(clippy::too_many_arguments)]
fn surgery_loop(
    config: &RunConfig,
    problem: &Problem,
    family: &dyn SigmaFamily,
    sigma: f64,
    sweepout: &Sweepout,
    record: CriticalPointRecord,
    grad_tol: f64,
    stream: u64,
    notes: &mut Vec<String>,
) -> Result<(CriticalPointRecord, Vec<SurgeryReport>)> {
    let tol = &config.tolerance;
    let d = sweepout.d();
    let mut current = sweepout.clone();
    let mut rec = record;
    let mut reports = Vec::new();
    for round in 0..config.budget.surgery_rounds {
        if rec.index().is_some_and(|i| i <= d) {
            break;
        }
        let q = problem.morse_subspace(rec.point.as_vector())?;
        let chart = match build_chart(&rec, family, sigma, tol, q.as_ref()) {
            Ok(c) => c,
            Err(e) => {
                notes.push(format!("surgery round {round}: {e}"));
                break;
            }
        };
        let mut rho = chart.validity_radius;
        let mut done = None;
        let mut last_err = None;
        for shrink in 0..=config.budget.chart_shrinks {
            let c = if shrink == 0 {
                chart.clone()
            } else {
                rho *= CHART_SHRINK;
                chart.with_validity_radius(rho)?
            };
            let seed = derive_seed(config.seed, stream, (round * 100 + shrink) as u64);
            match surgery_admissible(&current, &c, family, sigma, seed) {
                Ok(x) => {
                    done = Some(x);
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        let Some((cut, report)) = done else {
            notes.push(format!(
                "surgery round {round}: {}",
                last_err.map(|e| e.to_string()).unwrap_or_default()
            ));
            break;
        };
        reports.push(report);
        let t = tighten(&cut, family, sigma, config.sweepout.tighten_budget)?;
        let x0 = Point::from_vector(t.sweepout.frame(t.argmax).clone())?;
        current = t.sweepout;
        let opts = refine_opts(config, problem, grad_tol);
        match refine_record(&x0, family, sigma, &opts, tol, |x| problem.morse_subspace(x)) {
            Ok(r) => rec = r,
            Err(e) => {
                notes.push(format!("surgery round {round}: refinement after re-tightening: {e}"));
                break;
            }
        }
    }
    Ok((rec, reports))
}

fn process_sigma(
    config: &RunConfig,
    problem: &Problem,
    curve: &WidthCurve,
    cert: &EntropyCertificate,
    i: usize,
) -> Result<SigmaRun> {
    let tol = &config.tolerance;
    let fam = problem.family.clone();
    let sigma = curve.sigmas[i];
    let sweeps = curve
        .tightened_sweepouts
        .as_ref()
        .ok_or_else(|| Error::Precondition("width curve without tightened sweepouts".into()))?;
    let stream = i as u64 + 1;
    let mut notes = Vec::new();
    let hi = (i + config.selection.neighbors).min(curve.len() - 1);
    let sigma_k: Vec<f64> = curve.sigmas[i + 1..=hi].to_vec();
    let mut near = Vec::new();
    for (k, &sk) in sigma_k.iter().enumerate() {
        match locate_near_critical(&sweeps[i + 1 + k], &*fam, sigma, sk, curve) {
            Ok(c) => near.push(c),
            Err(e) => notes.push(format!("sigma_k = {sk}: {e}")),
        }
    }
    let x0 = match near.iter().min_by(|a, b| a.grad_norm.total_cmp(&b.grad_norm)) {
        Some(c) => c.point.clone(),
        None => Point::from_vector(sweeps[i].frame(curve.argmax_frames[i]).clone())?,
    };
    let mut run = SigmaRun {
        sigma,
        grid_index: i,
        certificate: cert.clone(),
        sigma_k,
        near_critical: near,
        record: None,
        perturbation: None,
        index_bound: None,
        degenerate: None,
        surgery: Vec::new(),
        notes: Vec::new(),
    };
    let opts = refine_opts(config, problem, tol.grad);
    let mut record = match refine_record(&x0, &*fam, sigma, &opts, tol, |x| problem.morse_subspace(x)) {
        Ok(r) => r,
        Err(e) => {
            notes.push(format!("refinement: {e}"));
            run.notes = notes;
            return Ok(run);
        }
    };
    let mut active: Arc<dyn SigmaFamily> = fam.clone();
    let mut grad_tol = tol.grad;
    if is_degenerate(&record, tol) {
        let (report, found) = degenerate_branch(config, problem, sigma, curve.sigmas[hi], &record, stream)?;
        run.degenerate = Some(report);
        match found {
            Some((rep, spec)) => {
                active = Arc::new(TiltedFamily::new(fam.clone(), spec.clone())?);
                record = rep;
                run.perturbation = Some(spec);
                grad_tol = tol.certify_grad;
            }
            None => notes.push("degenerate branch: no certified perturbation within budget".into()),
        }
    }
    if config.family == FamilyKind::Admissible && record.index().is_some_and(|ix| ix > config.d) {
        let (rec, reports) = surgery_loop(
            config, problem, &*active, sigma, &sweeps[i], record, grad_tol, stream, &mut notes,
        )?;
        record = rec;
        run.surgery = reports;
    }
    run.index_bound = Some(certify_index_bound(&record, config.d, config.family));
    run.record = Some(record);
    run.notes = notes;
    Ok(run)
}

fn run_checks(config: &RunConfig, record: &RunRecord) -> Vec<CheckRow> {
    let tol = &config.tolerance;
    let mut rows = vec![CheckRow::flag(
        "non-triviality",
        "beta(0) > boundary + margin",
        format!("{:.6e} vs {:.6e}", record.width.betas.first().copied().unwrap_or(f64::NAN), record.boundary_value),
        record.nontrivial,
    )];
    rows.push(CheckRow::flag(
        "entropy selection",
        ">= 1 certified sigma",
        record.runs.len().to_string(),
        !record.runs.is_empty(),
    ));
    for run in &record.runs {
        let s = format!("sigma={:.4e}", run.sigma);
        let holds = run.near_critical.iter().all(NearCriticalCertificate::holds);
        rows.push(CheckRow::flag(
            format!("{s} near-critical certificates"),
            "all hold",
            format!("{}/{}", run.near_critical.len(), run.sigma_k.len()),
            holds && run.near_critical.len() == run.sigma_k.len(),
        ));
        match &run.record {
            None => rows.push(CheckRow::flag(format!("{s} critical point"), "found", "none", false)),
            Some(r) => {
                let g = if run.perturbation.is_some() { tol.certify_grad } else { tol.grad };
                rows.push(CheckRow::at_most(format!("{s} grad_norm"), r.grad_norm, g));
                rows.push(CheckRow::flag(
                    format!("{s} index bound ({:?}, d={})", config.family, config.d),
                    "true",
                    format!("index {:?}, nullity {:?}", r.index(), r.nullity()),
                    run.index_bound == Some(true),
                ));
                rows.push(CheckRow::at_most(
                    format!("{s} entropy residual"),
                    r.entropy_residual.unwrap_or(f64::INFINITY),
                    0.0,
                ));
            }
        }
        if let Some(dg) = &run.degenerate {
            rows.push(CheckRow::flag(
                format!("{s} index semicontinuity"),
                "true",
                format!("{} certified points", dg.certified_points.len()),
                dg.semicontinuity,
            ));
        }
    }
    rows
}

/// Full pipeline. Non-triviality failure aborts; budget exhaustion yields a
/// record flagged incomplete.
pub fn run(config: &RunConfig) -> Result<RunRecord> {
    let mut timings = BTreeMap::new();
    let t0 = Instant::now();
    let (problem, curve, bv) = width_curve(config)?;
    timings.insert("width".to_string(), t0.elapsed().as_secs_f64());
    let nontrivial = check_nontrivial(&curve, bv, config.tolerance.nontrivial_margin)?;
    if !nontrivial {
        return Err(Error::Precondition(format!(
            "non-triviality check failed: beta({}) = {:.6e} does not exceed the boundary value {:.6e} by {:.1e}",
            curve.sigmas[0],
            curve.beta0(),
            bv,
            config.tolerance.nontrivial_margin
        )));
    }
    let certificates = classify_entropy_sigmas(&curve, config.selection.window_steps)?;
    let mut record = RunRecord::empty(config.clone());
    record.dim = problem.dim();
    record.boundary_value = bv;
    record.nontrivial = nontrivial;

    let n = config.selection.neighbors;
    let selected: Vec<(usize, &EntropyCertificate)> = certificates
        .iter()
        .filter(|c| c.accepted())
        .filter_map(|c| curve.index_of(c.sigma).map(|i| (i, c)))
        .filter(|(i, _)| i + n < curve.len())
        .take(config.selection.count)
        .collect();
    if selected.is_empty() {
        record.notes.push("no entropy-certified sigma with enough grid neighbors".into());
    }
    let t1 = Instant::now();
    for (i, c) in selected {
        record.runs.push(process_sigma(config, &problem, &curve, c, i)?);
    }
    timings.insert("critical".to_string(), t1.elapsed().as_secs_f64());

    let mut width = curve;
    width.tightened_sweepouts = None;
    record.width = width;
    record.entropy = certificates;
    record.complete = !record.runs.is_empty()
        && record
            .runs
            .iter()
            .all(|r| r.record.is_some() && r.index_bound == Some(true));
    record.checks = run_checks(config, &record);
    timings.insert("total".to_string(), t0.elapsed().as_secs_f64());
    record.timings = timings;
    Ok(record)
}

/// Recomputes gradient norm, index and entropy residual of every emitted
/// record from the problem registry and compares with the stored values.
pub fn reverify(record: &RunRecord) -> Result<Vec<CheckRow>> {
    let problem = functionals::build(&record.config.problem)?;
    let tol = &record.config.tolerance;
    let mut rows = Vec::new();
    for run in &record.runs {
        let Some(r) = &run.record else { continue };
        let fam: Arc<dyn SigmaFamily> = match &run.perturbation {
            Some(spec) => Arc::new(TiltedFamily::new(problem.family.clone(), spec.clone())?),
            None => problem.family.clone(),
        };
        let x = r.point.as_vector();
        let g = fam.gradient(r.sigma, x)?.norm();
        let q = problem.morse_subspace(x)?;
        let m = morse_data(&r.point, &*fam, r.sigma, tol, q.as_ref())?;
        let res = crate::critical::record_entropy_residual(r.sigma, fam.regularizer_value(r.sigma, x)?);
        let s = format!("sigma={:.4e}", r.sigma);
        rows.push(CheckRow::close(format!("{s} reverify grad_norm"), r.grad_norm, g, REVERIFY_TOL));
        rows.push(CheckRow::flag(
            format!("{s} reverify index"),
            &format!("{:?}", r.index()),
            format!("{}", m.index),
            r.index() == Some(m.index),
        ));
        let same = match (r.entropy_residual, res) {
            (Some(a), Some(b)) => (a - b).abs() <= REVERIFY_TOL,
            (None, None) => true,
            _ => false,
        };
        rows.push(CheckRow::flag(
            format!("{s} reverify entropy residual"),
            &format!("{:?}", r.entropy_residual),
            format!("{res:?}"),
            same,
        ));
    }
    Ok(rows)
}

/// Writes `run.json`, `width.csv`, `critical_points.csv` and `plotdata/`.
pub fn emit(record: &RunRecord, dir: &Path) -> Result<()> {
    io::ensure_dir(dir)?;
    io::write_json(&dir.join("run.json"), record)?;
    io::write_width_csv(&dir.join("width.csv"), &record.width)?;
    io::write_critical_csv(&dir.join("critical_points.csv"), &record.final_records())?;
    io::write_width_entropy_csv(
        &dir.join("plotdata/width_entropy.csv"),
        &record.width,
        &record.entropy,
    )?;
    let mut spectra = Vec::new();
    for (k, run) in record.runs.iter().enumerate() {
        if let Some(r) = &run.record {
            spectra.push((format!("final{k}"), r));
        }
        if let Some(dg) = &run.degenerate {
            spectra.push((format!("limit{k}"), &dg.limit));
            for (j, s) in dg.sequence.iter().enumerate() {
                spectra.push((format!("perturbed{k}_{j}"), s));
            }
        }
    }
    io::write_spectra_csv(&dir.join("plotdata/spectra.csv"), &spectra)?;
    Ok(())
}

pub fn read_record(path: &Path) -> Result<RunRecord> {
    io::read_json(path)
}
