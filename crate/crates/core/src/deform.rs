//! Linearized Morse charts at non-degenerate critical points, the
//! deformation `Φ` that collapses the positive block near the negative disc,
//! and sweepout surgery.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::critical::{morse_data, CriticalPointRecord};
use crate::error::{Error, Result};
use crate::model::{Matrix, SigmaFamily, ToleranceProfile, Vector};
use crate::sweepout::{frame_values, Sweepout};

/// Quintic smoothstep: 0 on `(−∞, 0]`, 1 on `[1, ∞)`, `C²`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CutoffZeta;

impl CutoffZeta {
    /// `max |ζ'|`, attained at `t = 1/2`.
    pub const D1_MAX: f64 = 15.0 / 8.0;
    /// `max |ζ''| = 10/√3`, attained at `t = (3 ± √3)/6`.
    pub const D2_MAX: f64 = 5.773_502_691_896_258;

    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= 1.0 {
            0.0
        } else {
            30.0 * t * t * (1.0 - t) * (1.0 - t)
        }
    }

    pub fn d2(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= 1.0 {
            0.0
        } else {
            60.0 * t * (2.0 * t - 1.0) * (t - 1.0)
        }
    }
}

/// Plateau profile: 1 for `t ≤ 9/4`, 0 for `t ≥ 4`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlateauEta;

impl PlateauEta {
    pub const START: f64 = 9.0 / 4.0;
    pub const END: f64 = 4.0;
    const WIDTH: f64 = Self::END - Self::START;
    pub const D1_MAX: f64 = CutoffZeta::D1_MAX / Self::WIDTH;
    pub const D2_MAX: f64 = CutoffZeta::D2_MAX / (Self::WIDTH * Self::WIDTH);

    fn s(t: f64) -> f64 {
        (t - Self::START) / Self::WIDTH
    }

    pub fn value(&self, t: f64) -> f64 {
        1.0 - CutoffZeta.value(Self::s(t))
    }

    pub fn d1(&self, t: f64) -> f64 {
        -CutoffZeta.d1(Self::s(t)) / Self::WIDTH
    }

    pub fn d2(&self, t: f64) -> f64 {
        -CutoffZeta.d2(Self::s(t)) / (Self::WIDTH * Self::WIDTH)
    }
}

/// Upper end of the radius search; exact quadratics stop here.
pub const RADIUS_CAP: f64 = 100.0;
/// Fraction of the bisected radius kept, a margin for the sampled test.
const RADIUS_SAFETY: f64 = 0.5;
const RADIUS_FLOOR: f64 = 1e-10;
const RADIUS_SAMPLES: usize = 256;
const BISECTION_STEPS: usize = 40;
const MISSED_POINT_DRAWS: usize = 1000;
/// Upper bound on the missed-point clearance, relative to `r1`.
const CLEARANCE_CAP: f64 = 0.25;

/// Eigen-rescaled linear chart `z_i = √(|λ_i|/2)·⟨c_i, x − x*⟩`, in which the
/// quadratic model reads `level + ‖z₊‖² − ‖z₋‖²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseChart {
    pub center: Vec<f64>,
    pub level: f64,
    pub sigma: f64,
    /// Negative eigenvalues first, ascending within each block.
    pub eigenvalues: Vec<f64>,
    pub neg_basis: Vec<Vec<f64>>,
    pub pos_basis: Vec<Vec<f64>>,
    /// `√|λ|` per direction, same order as `eigenvalues`.
    pub scales: Vec<f64>,
    pub r1: f64,
    pub r2: f64,
    pub delta: f64,
    pub validity_radius: f64,
    /// The search hit [`RADIUS_CAP`] without finding a model error.
    pub capped: bool,
}

/// A point split into chart blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartCoords {
    pub neg: Vector,
    pub pos: Vector,
}

impl ChartCoords {
    pub fn norm(&self) -> f64 {
        (self.neg.norm_squared() + self.pos.norm_squared()).sqrt()
    }
}

impl MorseChart {
    pub fn index(&self) -> usize {
        self.neg_basis.len()
    }

    fn center_vec(&self) -> Vector {
        Vector::from_column_slice(&self.center)
    }

    /// Chart from explicit radii; `δ = (r2² − 4r1²)/2`.
    pub fn with_radii(&self, r1: f64, r2: f64) -> Result<Self> {
        if !(r1 > 0.0 && 2.0 * r1 < r2 && r2.is_finite()) {
            return Err(Error::Precondition(format!(
                "chart radii need 0 < 2·r1 < r2, got r1 = {r1}, r2 = {r2}"
            )));
        }
        let mut c = self.clone();
        c.r1 = r1;
        c.r2 = r2;
        c.delta = (r2 * r2 - 4.0 * r1 * r1) / 2.0;
        Ok(c)
    }

    /// Radii fitted to a validity radius `ρ`: `r2 = ρ/2`, `r1 = r2/4`.
    pub fn with_validity_radius(&self, rho: f64) -> Result<Self> {
        let mut c = self.with_radii(rho / 8.0, rho / 2.0)?;
        c.validity_radius = rho;
        Ok(c)
    }

    fn block_scale(&self, k: usize) -> f64 {
        self.scales[k] / std::f64::consts::SQRT_2
    }

    pub fn coords(&self, x: &Vector) -> ChartCoords {
        let d = x - self.center_vec();
        let ni = self.index();
        let neg = Vector::from_fn(ni, |i, _| {
            self.block_scale(i) * dot(&self.neg_basis[i], &d)
        });
        let pos = Vector::from_fn(self.pos_basis.len(), |i, _| {
            self.block_scale(ni + i) * dot(&self.pos_basis[i], &d)
        });
        ChartCoords { neg, pos }
    }

    /// Ambient displacement of chart increments.
    fn lift(&self, dneg: &Vector, dpos: &Vector) -> Vector {
        let mut out = Vector::zeros(self.center.len());
        let ni = self.index();
        for (i, c) in self.neg_basis.iter().enumerate() {
            axpy(&mut out, dneg[i] / self.block_scale(i), c);
        }
        for (i, c) in self.pos_basis.iter().enumerate() {
            axpy(&mut out, dpos[i] / self.block_scale(ni + i), c);
        }
        out
    }

    pub fn inverse(&self, z: &ChartCoords) -> Vector {
        self.center_vec() + self.lift(&z.neg, &z.pos)
    }

    pub fn model(&self, z: &ChartCoords) -> f64 {
        self.level + z.pos.norm_squared() - z.neg.norm_squared()
    }

    /// `x ∈ C(s, t)`: `‖z₋‖ ≤ s` and `‖z₊‖ ≤ t`.
    pub fn in_cylinder(&self, x: &Vector, s: f64, t: f64) -> bool {
        let z = self.coords(x);
        z.neg.norm() <= s && z.pos.norm() <= t
    }

    /// Interior of `C(s, t)`.
    pub fn in_open_cylinder(&self, x: &Vector, s: f64, t: f64) -> bool {
        let z = self.coords(x);
        z.neg.norm() < s && z.pos.norm() < t
    }

    /// Projection of `x − x*` onto the positive block, in ambient coordinates.
    fn pos_projection(&self, x: &Vector) -> Vector {
        let d = x - self.center_vec();
        let mut out = Vector::zeros(d.len());
        for c in &self.pos_basis {
            axpy(&mut out, dot(c, &d), c);
        }
        out
    }

    /// Sampled test at radius `rho`: model error below `δ(ρ)/4` and `F`
    /// nondecreasing outward along the positive block.
    fn valid_at(&self, family: &dyn SigmaFamily, unit: &[(Vector, Vector)], rho: f64) -> bool {
        let delta = 3.0 * rho * rho / 32.0;
        unit.iter().all(|(un, up)| {
            let z = ChartCoords {
                neg: un * rho,
                pos: up * rho,
            };
            let x = self.inverse(&z);
            let (Ok(v), Ok(g)) = (family.value(self.sigma, &x), family.gradient(self.sigma, &x))
            else {
                return false;
            };
            let pd = self.pos_projection(&x);
            let slope = g.dot(&pd);
            (v - self.model(&z)).abs() < delta / 4.0
                && slope >= -1e-12 * g.norm() * pd.norm()
        })
    }
}

fn dot(c: &[f64], v: &Vector) -> f64 {
    c.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

fn axpy(out: &mut Vector, a: f64, c: &[f64]) {
    for (o, ci) in out.iter_mut().zip(c) {
        *o += a * ci;
    }
}

/// Unit-ball samples in chart coordinates: uniform draws plus the axis
/// extremes, fixed so that the radius test is monotone in the sample set.
fn unit_samples(neg: usize, pos: usize) -> Vec<(Vector, Vector)> {
    let k = neg + pos;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d6f7273);
    let mut out = Vec::with_capacity(RADIUS_SAMPLES + 2 * k);
    for i in 0..k {
        for s in [-1.0, 1.0] {
            let mut u = Vector::zeros(k);
            u[i] = s;
            out.push(u);
        }
    }
    for _ in 0..RADIUS_SAMPLES {
        let g = Vector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = g.norm();
        if n == 0.0 {
            continue;
        }
        let r: f64 = rng.random::<f64>().powf(1.0 / k as f64);
        out.push(g * (r / n));
    }
    out.into_iter()
        .map(|u| (u.rows(0, neg).into_owned(), u.rows(neg, pos).into_owned()))
        .collect()
}

/// Chart at a non-degenerate critical point with the validity radius found
/// by bisection on the sampled model error. With a `subspace`, the chart
/// lives in its span and the complementary directions are left alone.
pub fn build_chart(
    record: &CriticalPointRecord,
    family: &dyn SigmaFamily,
    sigma: f64,
    tol: &ToleranceProfile,
    subspace: Option<&Matrix>,
) -> Result<MorseChart> {
    let m = morse_data(&record.point, family, sigma, tol, subspace)?;
    if m.nullity > 0 || m.gap <= m.null_tol {
        return Err(Error::Degenerate(format!(
            "nullity {} at the chart center (gap {:.3e}, null band {:.3e})",
            m.nullity, m.gap, m.null_tol
        )));
    }
    let neg_vals: Vec<f64> = m.eigenvalues.iter().copied().filter(|l| *l < 0.0).collect();
    let pos_vals: Vec<f64> = m.eigenvalues.iter().copied().filter(|l| *l > 0.0).collect();
    let eigenvalues: Vec<f64> = neg_vals.iter().chain(&pos_vals).copied().collect();
    let x = record.point.as_vector();
    let mut chart = MorseChart {
        center: x.iter().copied().collect(),
        level: family.value(sigma, x)?,
        sigma,
        scales: eigenvalues.iter().map(|l| l.abs().sqrt()).collect(),
        eigenvalues,
        neg_basis: m.neg_basis,
        pos_basis: m.pos_basis,
        r1: 0.0,
        r2: 0.0,
        delta: 0.0,
        validity_radius: 0.0,
        capped: false,
    };
    let unit = unit_samples(chart.index(), chart.pos_basis.len());
    let rho = if chart.valid_at(family, &unit, RADIUS_CAP) {
        chart.capped = true;
        RADIUS_CAP
    } else {
        let mut hi = RADIUS_CAP;
        let mut lo = hi / 2.0;
        while !chart.valid_at(family, &unit, lo) {
            hi = lo;
            lo /= 2.0;
            if lo < RADIUS_FLOOR {
                return Err(Error::Precondition(
                    "no chart radius passes the model-error test".into(),
                ));
            }
        }
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if chart.valid_at(family, &unit, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        RADIUS_SAFETY * lo
    };
    chart = chart.with_validity_radius(rho)?;
    Ok(chart)
}

/// `Φ(x) = φ⁻¹(ζ(‖φ(x)₋‖/r1 − 1)·φ(x)₊ + φ(x)₋)` on `C(2r1, r2)`, the
/// identity elsewhere.
pub fn deform_phi(x: &Vector, chart: &MorseChart, zeta: &CutoffZeta) -> Vector {
    let z = chart.coords(x);
    let nn = z.neg.norm();
    if nn > 2.0 * chart.r1 || z.pos.norm() > chart.r2 {
        return x.clone();
    }
    let s = zeta.value(nn / chart.r1 - 1.0);
    if s == 1.0 {
        return x.clone();
    }
    x - chart.pos_projection(x) * (1.0 - s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Admissible,
    Dual,
    Codual,
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "admissible" => Ok(FamilyKind::Admissible),
            "dual" => Ok(FamilyKind::Dual),
            "codual" => Ok(FamilyKind::Codual),
            other => Err(Error::Config(format!(
                "unknown family kind '{other}' (valid: admissible, dual, codual)"
            ))),
        }
    }
}

/// `Ind ≤ d`, `Ind ≥ d`, or `Ind ≤ d ≤ Ind + Null` by family kind.
pub fn certify_index_bound(record: &CriticalPointRecord, d: usize, kind: FamilyKind) -> bool {
    let Some(m) = record.morse.as_ref() else {
        return false;
    };
    match kind {
        FamilyKind::Admissible => m.index <= d,
        FamilyKind::Dual => m.index >= d,
        FamilyKind::Codual => m.index <= d && d <= m.index + m.nullity,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgeryReport {
    pub kind: FamilyKind,
    pub center: Vec<f64>,
    pub index: usize,
    pub r1: f64,
    pub r2: f64,
    pub delta: f64,
    pub sup_before: f64,
    pub sup_after: f64,
    pub frames_moved: usize,
    pub frames_deleted: usize,
    /// Center of the radial projection, in negative-block chart coordinates.
    pub missed_point: Option<Vec<f64>>,
    /// Largest value among deleted frames (dual surgery).
    pub deleted_max: Option<f64>,
}

fn sup(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn check_boundary(sweepout: &Sweepout, chart: &MorseChart) -> Result<()> {
    for (i, f) in sweepout.frames().iter().enumerate() {
        if sweepout.is_boundary(i) && chart.in_cylinder(f, 2.0 * chart.r1, chart.r2) {
            return Err(Error::Precondition(format!(
                "boundary frame {i} lies inside C(2r1, r2); shrink the chart"
            )));
        }
    }
    Ok(())
}

/// Removes an admissible sweepout from a neighborhood of a critical point
/// whose index exceeds the family dimension, without raising its sup.
pub fn surgery_admissible(
    sweepout: &Sweepout,
    chart: &MorseChart,
    family: &dyn SigmaFamily,
    sigma: f64,
    rng_seed: u64,
) -> Result<(Sweepout, SurgeryReport)> {
    let d = sweepout.d();
    if chart.index() <= d {
        return Err(Error::SurgeryNotApplicable(format!(
            "index {} <= d = {d}",
            chart.index()
        )));
    }
    let before = frame_values(sweepout, family, sigma)?;
    let sup_before = sup(&before);
    if sup_before > chart.level + chart.delta {
        return Err(Error::Precondition(format!(
            "sup {sup_before:.6e} exceeds level + delta = {:.6e}",
            chart.level + chart.delta
        )));
    }
    check_boundary(sweepout, chart)?;

    let zeta = CutoffZeta;
    let mut frames: Vec<Vector> = sweepout
        .frames()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if sweepout.is_boundary(i) {
                f.clone()
            } else {
                deform_phi(f, chart, &zeta)
            }
        })
        .collect();
    let mut moved: Vec<bool> = frames
        .iter()
        .zip(sweepout.frames())
        .map(|(a, b)| a != b)
        .collect();

    let coords: Vec<ChartCoords> = frames.iter().map(|f| chart.coords(f)).collect();
    let inside: Vec<usize> = (0..frames.len())
        .filter(|&i| !sweepout.is_boundary(i) && coords[i].neg.norm() < chart.r1)
        .collect();
    let mut missed = None;
    if !inside.is_empty() {
        let spacing = sweepout
            .edges()
            .into_iter()
            .filter(|(a, b)| inside.contains(a) || inside.contains(b))
            .map(|(a, b)| (&coords[a].neg - &coords[b].neg).norm())
            .fold(0.0, f64::max);
        let simplices: Vec<Vec<&Vector>> = sweepout
            .simplices()
            .into_iter()
            .map(|c| c.into_iter().map(|i| &coords[i].neg).collect())
            .collect();
        let clearance = (2.0 * spacing).min(CLEARANCE_CAP * chart.r1);
        let p = missed_point(chart.index(), chart.r1, clearance, &simplices, rng_seed)?;
        for &i in &inside {
            let z = &coords[i].neg;
            let u = (z - &p).normalize();
            let pu = p.dot(&u);
            let t = -pu + (pu * pu - p.norm_squared() + chart.r1 * chart.r1).sqrt();
            let target = &p + &u * t;
            frames[i] = &frames[i] + chart.lift(&(&target - z), &Vector::zeros(coords[i].pos.len()));
            moved[i] = true;
        }
        missed = Some(p.iter().copied().collect());
    }

    let out = sweepout.with_interior(frames)?;
    let after = frame_values(&out, family, sigma)?;
    let sup_after = sup(&after);
    if sup_after > sup_before + 1e-12 {
        return Err(Error::Precondition(format!(
            "surgery raised the sup from {sup_before:.12e} to {sup_after:.12e}; shrink the chart"
        )));
    }
    let eps = chart.r1 / 2.0;
    if let Some(i) = out.frames().iter().position(|f| chart.coords(f).norm() < eps) {
        return Err(Error::Precondition(format!(
            "frame {i} remains within r1/2 of the center"
        )));
    }
    let report = SurgeryReport {
        kind: FamilyKind::Admissible,
        center: chart.center.clone(),
        index: chart.index(),
        r1: chart.r1,
        r2: chart.r2,
        delta: chart.delta,
        sup_before,
        sup_after,
        frames_moved: moved.iter().filter(|&&m| m).count(),
        frames_deleted: 0,
        missed_point: missed,
        deleted_max: None,
    };
    Ok((out, report))
}

/// Distance from `p` to the simplex spanned by `v` (one to three vertices).
fn simplex_distance(p: &Vector, v: &[&Vector]) -> f64 {
    match v.len() {
        1 => (p - v[0]).norm(),
        2 => {
            let e = v[1] - v[0];
            let l = e.norm_squared();
            let t = if l > 0.0 { ((p - v[0]).dot(&e) / l).clamp(0.0, 1.0) } else { 0.0 };
            (p - (v[0] + e * t)).norm()
        }
        _ => {
            let e1 = v[1] - v[0];
            let e2 = v[2] - v[0];
            let w = p - v[0];
            let (a, b, c) = (e1.dot(&e1), e1.dot(&e2), e2.dot(&e2));
            let det = a * c - b * b;
            if det > 1e-300 * a.max(c).max(1e-300) {
                let (r1, r2) = (w.dot(&e1), w.dot(&e2));
                let s = (c * r1 - b * r2) / det;
                let t = (a * r2 - b * r1) / det;
                if s >= 0.0 && t >= 0.0 && s + t <= 1.0 {
                    return (w - e1 * s - e2 * t).norm();
                }
            }
            [[0, 1], [1, 2], [2, 0]]
                .iter()
                .map(|[i, j]| simplex_distance(p, &[v[*i], v[*j]]))
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Random draws in `B₋(0, 0.9·r1)` at distance at least `clearance` from
/// the piecewise-linear image of the sweepout.
fn missed_point(
    dim: usize,
    r1: f64,
    clearance: f64,
    images: &[Vec<&Vector>],
    seed: u64,
) -> Result<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MISSED_POINT_DRAWS {
        let g = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = g.norm();
        if n == 0.0 {
            continue;
        }
        let r = 0.9 * r1 * rng.random::<f64>().powf(1.0 / dim as f64);
        let p = g * (r / n);
        if images.iter().all(|z| simplex_distance(&p, z) >= clearance) {
            return Ok(p);
        }
    }
    Err(Error::NoMissedPoint(MISSED_POINT_DRAWS))
}

/// Dual surgery: deforms a point set and deletes the frames in the interior
/// of `C(r1, r2)`, all of which lie below the sup.
pub fn surgery_dual(
    pointset: &Sweepout,
    chart: &MorseChart,
    family: &dyn SigmaFamily,
    sigma: f64,
    d: usize,
) -> Result<(Sweepout, SurgeryReport)> {
    if chart.index() >= d {
        return Err(Error::SurgeryNotApplicable(format!(
            "index {} >= d = {d}",
            chart.index()
        )));
    }
    let before = frame_values(pointset, family, sigma)?;
    let sup_before = sup(&before);
    let zeta = CutoffZeta;
    let frames: Vec<Vector> = pointset
        .frames()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if pointset.is_boundary(i) {
                f.clone()
            } else {
                deform_phi(f, chart, &zeta)
            }
        })
        .collect();
    let moved = frames
        .iter()
        .zip(pointset.frames())
        .filter(|(a, b)| a != b)
        .count();
    let deformed = Sweepout::new(
        pointset.d(),
        pointset.shape().0,
        pointset.shape().1,
        frames,
        pointset.boundary_mask().to_vec(),
    )?;
    let deleted: Vec<bool> = deformed
        .frames()
        .iter()
        .enumerate()
        .map(|(i, f)| !deformed.is_boundary(i) && chart.in_open_cylinder(f, chart.r1, chart.r2))
        .collect();
    let values = frame_values(&deformed, family, sigma)?;
    let deleted_max = values
        .iter()
        .zip(&deleted)
        .filter(|(_, &del)| del)
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let out = deformed.retain_points(|i| !deleted[i])?;
    let after = frame_values(&out, family, sigma)?;
    let n_deleted = deleted.iter().filter(|&&d| d).count();
    let report = SurgeryReport {
        kind: FamilyKind::Dual,
        center: chart.center.clone(),
        index: chart.index(),
        r1: chart.r1,
        r2: chart.r2,
        delta: chart.delta,
        sup_before,
        sup_after: sup(&after),
        frames_moved: moved,
        frames_deleted: n_deleted,
        missed_point: None,
        deleted_max: (n_deleted > 0).then_some(deleted_max),
    };
    Ok((out, report))
}
