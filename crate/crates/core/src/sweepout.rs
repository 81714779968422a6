//! Discretized min-max families, their tightening by boundary-preserving
//! descent, and width curves `σ ↦ β(σ)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SigmaFamily, Vector};

pub const MIN_PATH_FRAMES: usize = 16;

/// Frames of a map from a `d`-dimensional parameter complex into coordinate
/// space. `d = 1` is a path of `M` frames, `d = 2` a row-major `M × M2` grid,
/// `d = 0` an unstructured point set (the output of dual surgery).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SweepoutDoc", into = "SweepoutDoc")]
pub struct Sweepout {
    d: usize,
    m: usize,
    m2: usize,
    dim: usize,
    boundary_mask: Vec<bool>,
    frames: Vec<Vector>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct SweepoutDoc {
    d: usize,
    M: usize,
    M2: usize,
    dim: usize,
    boundary_mask: Vec<bool>,
    frames: Vec<f64>,
}

impl From<Sweepout> for SweepoutDoc {
    fn from(s: Sweepout) -> Self {
        SweepoutDoc {
            d: s.d,
            M: s.m,
            M2: s.m2,
            dim: s.dim,
            boundary_mask: s.boundary_mask,
            frames: s.frames.iter().flat_map(|f| f.iter().copied()).collect(),
        }
    }
}

impl TryFrom<SweepoutDoc> for Sweepout {
    type Error = Error;
    fn try_from(doc: SweepoutDoc) -> Result<Self> {
        if doc.dim == 0 || doc.frames.len() != doc.M * doc.M2 * doc.dim {
            return Err(Error::InvalidPoint(format!(
                "sweepout frame data has {} floats, expected {}",
                doc.frames.len(),
                doc.M * doc.M2 * doc.dim
            )));
        }
        let frames = doc
            .frames
            .chunks(doc.dim)
            .map(|c| Vector::from_row_slice(c))
            .collect();
        Sweepout::new(doc.d, doc.M, doc.M2, frames, doc.boundary_mask)
    }
}

impl Sweepout {
    pub fn new(
        d: usize,
        m: usize,
        m2: usize,
        frames: Vec<Vector>,
        boundary_mask: Vec<bool>,
    ) -> Result<Self> {
        match d {
            0 => {
                if m2 != 1 || m == 0 {
                    return Err(Error::EmptySweepout("point set needs M >= 1, M2 = 1".into()));
                }
            }
            1 => {
                if m2 != 1 || m < MIN_PATH_FRAMES {
                    return Err(Error::Precondition(format!(
                        "d=1 sweepouts need M >= {MIN_PATH_FRAMES} frames and M2 = 1, got {m}x{m2}"
                    )));
                }
            }
            2 => {
                if m < 3 || m2 < 3 {
                    return Err(Error::Precondition(format!(
                        "d=2 sweepouts need at least a 3x3 grid, got {m}x{m2}"
                    )));
                }
            }
            _ => {
                return Err(Error::Precondition(format!(
                    "sweepouts of dimension {d} are not supported"
                )))
            }
        }
        if frames.len() != m * m2 || boundary_mask.len() != frames.len() {
            return Err(Error::Precondition(format!(
                "expected {} frames and mask entries, got {} and {}",
                m * m2,
                frames.len(),
                boundary_mask.len()
            )));
        }
        let dim = frames[0].len();
        for (i, f) in frames.iter().enumerate() {
            if f.len() != dim || dim == 0 {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: f.len(),
                }
                .in_frame(i));
            }
            if f.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidPoint("non-finite coordinate".into()).in_frame(i));
            }
        }
        Ok(Sweepout {
            d,
            m,
            m2,
            dim,
            boundary_mask,
            frames,
        })
    }

    /// A `d = 1` path with both end frames frozen.
    pub fn path(frames: Vec<Vector>) -> Result<Self> {
        let m = frames.len();
        let mut mask = vec![false; m];
        if m > 0 {
            mask[0] = true;
            mask[m - 1] = true;
        }
        Self::new(1, m, 1, frames, mask)
    }

    /// `m` equally spaced frames on the segment from `a` to `b`.
    pub fn line(a: &Vector, b: &Vector, m: usize) -> Result<Self> {
        Self::polyline(&[a.clone(), b.clone()], m)
    }

    /// `m` frames equally spaced by arc length along a polyline.
    pub fn polyline(vertices: &[Vector], m: usize) -> Result<Self> {
        if vertices.len() < 2 || m < 2 {
            return Err(Error::Precondition("polyline needs two vertices".into()));
        }
        let mut frames = resample(vertices, m);
        frames[0] = vertices[0].clone();
        frames[m - 1] = vertices[vertices.len() - 1].clone();
        Self::path(frames)
    }

    /// A `d = 2` grid with its outer ring frozen.
    pub fn grid(m: usize, m2: usize, frames: Vec<Vector>) -> Result<Self> {
        let mask = (0..m * m2)
            .map(|k| {
                let (i, j) = (k / m2, k % m2);
                i == 0 || j == 0 || i == m - 1 || j == m2 - 1
            })
            .collect();
        Self::new(2, m, m2, frames, mask)
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn len(&self) -> usize {
        self.frames.len()
    }
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.m2)
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn frames(&self) -> &[Vector] {
        &self.frames
    }
    pub fn frame(&self, i: usize) -> &Vector {
        &self.frames[i]
    }
    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }
    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary_mask[i]
    }
    pub fn boundary_frames(&self) -> impl Iterator<Item = &Vector> {
        self.frames
            .iter()
            .zip(&self.boundary_mask)
            .filter(|(_, b)| **b)
            .map(|(f, _)| f)
    }

    /// Replaces interior frames. Boundary frames are kept bit-identical
    /// regardless of what `frames` holds at those indices.
    pub fn with_interior(&self, frames: Vec<Vector>) -> Result<Self> {
        if frames.len() != self.frames.len() {
            return Err(Error::Precondition("frame count changed".into()));
        }
        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                if self.boundary_mask[i] {
                    self.frames[i].clone()
                } else {
                    f
                }
            })
            .collect();
        Self::new(self.d, self.m, self.m2, frames, self.boundary_mask.clone())
    }

    /// Keeps the frames whose index satisfies `keep`, as a `d = 0` point set.
    pub fn retain_points(&self, keep: impl Fn(usize) -> bool) -> Result<Self> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        if idx.is_empty() {
            return Err(Error::EmptySweepout("every frame was removed".into()));
        }
        let frames = idx.iter().map(|&i| self.frames[i].clone()).collect();
        let mask = idx.iter().map(|&i| self.boundary_mask[i]).collect();
        Self::new(0, idx.len(), 1, frames, mask)
    }

    /// Edges of the parameter complex: consecutive frames for paths, row and
    /// column neighbors for grids, none for point sets.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        match self.d {
            1 => (0..self.m - 1).map(|i| (i, i + 1)).collect(),
            2 => {
                let mut e = Vec::new();
                for i in 0..self.m {
                    for j in 0..self.m2 {
                        let k = i * self.m2 + j;
                        if j + 1 < self.m2 {
                            e.push((k, k + 1));
                        }
                        if i + 1 < self.m {
                            e.push((k, k + self.m2));
                        }
                    }
                }
                e
            }
            _ => Vec::new(),
        }
    }

    /// Simplices of the piecewise-linear image: points, segments, or two
    /// triangles per grid cell.
    pub fn simplices(&self) -> Vec<Vec<usize>> {
        match self.d {
            1 => (0..self.m - 1).map(|i| vec![i, i + 1]).collect(),
            2 => {
                let s = self.m2;
                let mut out = Vec::new();
                for i in 0..self.m - 1 {
                    for j in 0..s - 1 {
                        let k = i * s + j;
                        out.push(vec![k, k + 1, k + s]);
                        out.push(vec![k + 1, k + s + 1, k + s]);
                    }
                }
                out
            }
            _ => (0..self.len()).map(|i| vec![i]).collect(),
        }
    }

    /// Distance from interior frame `k` to its nearest grid neighbor.
    fn neighbor_gap(&self, frames: &[Vector], k: usize) -> f64 {
        let nb: Vec<usize> = match self.d {
            1 => vec![k - 1, k + 1],
            2 => vec![k - 1, k + 1, k - self.m2, k + self.m2],
            _ => Vec::new(),
        };
        nb.into_iter()
            .map(|j| (&frames[j] - &frames[k]).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Orthonormal tangent directions of the family at interior frame `k`.
    fn tangents(&self, frames: &[Vector], k: usize) -> Vec<Vector> {
        let raw = match self.d {
            1 => vec![&frames[k + 1] - &frames[k - 1]],
            2 => {
                let s = self.m2;
                vec![&frames[k + 1] - &frames[k - 1], &frames[k + s] - &frames[k - s]]
            }
            _ => Vec::new(),
        };
        let mut basis: Vec<Vector> = Vec::new();
        for mut t in raw {
            for b in &basis {
                let c = t.dot(b);
                t -= b * c;
            }
            let n = t.norm();
            if n > 1e-300 {
                basis.push(t / n);
            }
        }
        basis
    }

    /// Minimal Euclidean distance from `x` to the frames and edges.
    pub fn distance_to(&self, x: &Vector) -> f64 {
        let mut best = self
            .frames
            .iter()
            .map(|f| (f - x).norm())
            .fold(f64::INFINITY, f64::min);
        for (a, b) in self.edges() {
            best = best.min(segment_distance(x, &self.frames[a], &self.frames[b]));
        }
        best
    }
}

pub(crate) fn segment_distance(x: &Vector, a: &Vector, b: &Vector) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((x - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (x - (a + ab * t)).norm()
}

/// `m` points equally spaced by arc length along a polyline.
fn resample(vertices: &[Vector], m: usize) -> Vec<Vector> {
    let mut cum = vec![0.0];
    for w in vertices.windows(2) {
        let last = *cum.last().unwrap();
        cum.push(last + (&w[1] - &w[0]).norm());
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    for k in 0..m {
        let s = total * k as f64 / (m - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let t = if span > 0.0 {
            ((s - cum[seg]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(&vertices[seg] + (&vertices[seg + 1] - &vertices[seg]) * t);
    }
    out
}

/// `F_σ` at every frame, evaluated in parallel.
pub fn frame_values(sweepout: &Sweepout, family: &dyn SigmaFamily, sigma: f64) -> Result<Vec<f64>> {
    sweepout
        .frames
        .par_iter()
        .enumerate()
        .map(|(i, f)| family.value(sigma, f).map_err(|e| e.in_frame(i)))
        .collect()
}

fn argmax(values: &[f64]) -> (f64, usize) {
    let mut best = (values[0], 0);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.0 {
            best = (v, i);
        }
    }
    best
}

/// `max F_σ` over frames and its index; ties go to the lowest index.
pub fn sup_over(sweepout: &Sweepout, family: &dyn SigmaFamily, sigma: f64) -> Result<(f64, usize)> {
    Ok(argmax(&frame_values(sweepout, family, sigma)?))
}

/// Largest `F_σ` over the frozen frames, `−∞` if there are none.
pub fn boundary_value(sweepout: &Sweepout, family: &dyn SigmaFamily, sigma: f64) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for (i, f) in sweepout.frames.iter().enumerate() {
        if sweepout.boundary_mask[i] {
            best = best.max(family.value(sigma, f).map_err(|e| e.in_frame(i))?);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug)]
pub struct TightenReport {
    pub sweepout: Sweepout,
    pub sup: f64,
    pub argmax: usize,
    pub iterations: usize,
    pub line_search_failures: usize,
    pub reparam_rejections: usize,
    pub sup_trace: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 40;
const STEP_INIT: f64 = 0.05;
const STEP_MAX: f64 = 10.0;
const WEIGHT_FLOOR: f64 = 1e-12;
const STALL_WINDOW: usize = 50;
const MIN_STEP: f64 = 1e-12;
const TRUST: f64 = 0.5;

/// Boundary-preserving descent of the near-maximal frames.
///
/// Each interior frame moves along the part of `−∇F_σ` orthogonal to the
/// family's tangent directions, with step scaled by
/// `w_i = exp((F_σ(frame_i) − max)/τ)`, `τ = 0.05·(max − min)`, and an
/// Armijo backtracking search so that no frame value increases. A spacing
/// pass then redistributes frames evenly along each path, row and column; it
/// is kept only if the sup does not increase.
pub fn tighten(
    sweepout: &Sweepout,
    family: &dyn SigmaFamily,
    sigma: f64,
    budget: usize,
) -> Result<TightenReport> {
    if budget == 0 {
        return Err(Error::Precondition("tighten budget must be >= 1".into()));
    }
    let mut current = sweepout.clone();
    let mut values = frame_values(&current, family, sigma)?;
    let mut steps = vec![STEP_INIT; current.len()];
    let (mut sup, _) = argmax(&values);
    let mut trace = vec![sup];
    let mut failures = 0;
    let mut rejections = 0;
    let mut stall = 0;
    let mut iterations = 0;

    for _ in 0..budget {
        iterations += 1;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let tau = 0.05 * (sup - min);
        let frames = current.frames.clone();
        let moves: Vec<Result<Option<FrameMove>>> = (0..current.len())
            .into_par_iter()
            .map(|i| {
                if current.boundary_mask[i] {
                    return Ok(None);
                }
                let w = if tau > 0.0 {
                    ((values[i] - sup) / tau).exp()
                } else {
                    1.0
                };
                if w < WEIGHT_FLOOR {
                    return Ok(None);
                }
                descend(&current, &frames, i, family, sigma, values[i], w, steps[i])
                    .map(Some)
                    .map_err(|e| e.in_frame(i))
            })
            .collect();
        let prev = (current.clone(), values.clone());
        let mut next = frames;
        let mut moved = false;
        let mut trial_steps = steps.clone();
        for (i, m) in moves.into_iter().enumerate() {
            if let Some(m) = m? {
                trial_steps[i] = m.step;
                if m.failed {
                    failures += 1;
                }
                if let Some((x, v)) = m.update {
                    next[i] = x;
                    values[i] = v;
                    moved = true;
                }
            }
        }
        current = current.with_interior(next)?;
        let mut new_sup = argmax(&values).0;
        let mut changed = moved;
        // Descent and respacing form one step: descent alone lets frames
        // slide off the ridge and leave the path unresolved.
        if current.d >= 1 && moved {
            let candidate = current.with_interior(reparametrize(&current))?;
            match frame_values(&candidate, family, sigma) {
                Ok(cv) if argmax(&cv).0 <= sup => {
                    current = candidate;
                    values = cv;
                    new_sup = argmax(&values).0;
                    steps = trial_steps;
                }
                _ => {
                    rejections += 1;
                    (current, values) = prev;
                    new_sup = sup;
                    for st in steps.iter_mut() {
                        *st *= 0.5;
                    }
                    changed = steps.iter().any(|&st| st > MIN_STEP);
                }
            }
        } else {
            steps = trial_steps;
        }

        debug_assert!(new_sup <= sup, "tighten increased the sup");
        let progress = sup - new_sup;
        sup = new_sup;
        trace.push(sup);
        if progress <= 1e-15 * sup.abs().max(1.0) {
            stall += 1;
        } else {
            stall = 0;
        }
        // Nothing changed: every further iteration would repeat this one.
        if !changed || stall >= STALL_WINDOW {
            break;
        }
    }
    let (sup, argmax_idx) = argmax(&values);
    Ok(TightenReport {
        sweepout: current,
        sup,
        argmax: argmax_idx,
        iterations,
        line_search_failures: failures,
        reparam_rejections: rejections,
        sup_trace: trace,
    })
}

struct FrameMove {
    update: Option<(Vector, f64)>,
    step: f64,
    failed: bool,
}

#[allow(clippy::too_many_arguments)]
fn descend(
    sweepout: &Sweepout,
    frames: &[Vector],
    i: usize,
    family: &dyn SigmaFamily,
    sigma: f64,
    value: f64,
    weight: f64,
    step: f64,
) -> Result<FrameMove> {
    let x = &frames[i];
    let mut dir = family.gradient(sigma, x)?;
    for t in sweepout.tangents(frames, i) {
        let c = dir.dot(&t);
        dir -= t * c;
    }
    let g2 = dir.norm_squared();
    if g2 == 0.0 {
        return Ok(FrameMove {
            update: None,
            step,
            failed: false,
        });
    }
    // Trust region: a frame never moves past half the gap to a neighbor.
    let t_max = TRUST * sweepout.neighbor_gap(frames, i) / g2.sqrt();
    let mut eta = step;
    for attempt in 0..MAX_BACKTRACK {
        let t = (eta * weight).min(t_max);
        let trial = x - &dir * t;
        if let Ok(v) = family.value(sigma, &trial) {
            if v <= value - ARMIJO * t * g2 {
                let next_step = if attempt == 0 && t < t_max {
                    (eta * 2.0).min(STEP_MAX)
                } else {
                    eta
                };
                return Ok(FrameMove {
                    update: Some((trial, v)),
                    step: next_step,
                    failed: false,
                });
            }
        }
        eta *= 0.5;
    }
    Ok(FrameMove {
        update: None,
        step: STEP_INIT,
        failed: true,
    })
}

/// Even arc-length spacing along paths, then along grid rows and columns.
fn reparametrize(s: &Sweepout) -> Vec<Vector> {
    let mut frames = s.frames.clone();
    match s.d {
        1 => {
            frames = resample(&frames, s.m);
        }
        2 => {
            for i in 1..s.m - 1 {
                let row: Vec<Vector> = (0..s.m2).map(|j| frames[i * s.m2 + j].clone()).collect();
                for (j, f) in resample(&row, s.m2).into_iter().enumerate() {
                    frames[i * s.m2 + j] = f;
                }
            }
            for j in 1..s.m2 - 1 {
                let col: Vec<Vector> = (0..s.m).map(|i| frames[i * s.m2 + j].clone()).collect();
                for (i, f) in resample(&col, s.m).into_iter().enumerate() {
                    frames[i * s.m2 + j] = f;
                }
            }
        }
        _ => {}
    }
    frames
}

/// Pool-adjacent-violators fit: the nondecreasing sequence closest to `y` in
/// least squares.
pub fn isotonic(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let n = na + nb;
            *blocks.last_mut().unwrap() = ((a * na as f64 + b * nb as f64) / n as f64, n);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(v, n)| std::iter::repeat_n(v, n))
        .collect()
}

/// Monotone samples of the width `β(σ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthCurve {
    pub sigmas: Vec<f64>,
    /// Isotonic fit of `raw_betas`.
    pub betas: Vec<f64>,
    pub raw_betas: Vec<f64>,
    pub argmax_frames: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tightened_sweepouts: Option<Vec<Sweepout>>,
}

impl WidthCurve {
    /// A curve from given samples, isotonically corrected.
    pub fn from_samples(sigmas: Vec<f64>, raw_betas: Vec<f64>) -> Result<Self> {
        validate_grid(&sigmas)?;
        if sigmas.len() != raw_betas.len() {
            return Err(Error::Precondition("sigma and beta lengths differ".into()));
        }
        if raw_betas.iter().any(|b| !b.is_finite()) {
            return Err(Error::Precondition("non-finite beta sample".into()));
        }
        Ok(WidthCurve {
            betas: isotonic(&raw_betas),
            argmax_frames: vec![0; sigmas.len()],
            sigmas,
            raw_betas,
            tightened_sweepouts: None,
        })
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    /// First sample, the estimate of `β(0)` when the grid starts at zero.
    pub fn beta0(&self) -> f64 {
        self.betas[0]
    }

    /// Piecewise-linear interpolation of the isotonic betas.
    pub fn beta_at(&self, sigma: f64) -> Result<f64> {
        let s = &self.sigmas;
        let n = s.len();
        if n == 0 || sigma < s[0] || sigma > s[n - 1] {
            return Err(Error::Coverage(format!(
                "sigma {sigma} outside the sampled range"
            )));
        }
        let k = s.partition_point(|&x| x <= sigma);
        if k == 0 {
            return Ok(self.betas[0]);
        }
        let i = k - 1;
        if i + 1 == n || s[i] == sigma {
            return Ok(self.betas[i]);
        }
        let t = (sigma - s[i]) / (s[i + 1] - s[i]);
        Ok(self.betas[i] + t * (self.betas[i + 1] - self.betas[i]))
    }

    pub fn index_of(&self, sigma: f64) -> Option<usize> {
        self.sigmas.iter().position(|&s| s == sigma)
    }
}

pub(crate) fn validate_grid(sigmas: &[f64]) -> Result<()> {
    if sigmas.is_empty() {
        return Err(Error::Precondition("empty sigma grid".into()));
    }
    for w in sigmas.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Precondition(format!(
                "sigma grid must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0 && *s < 1.0)) {
        return Err(Error::Precondition("sigma grid must lie in [0, 1)".into()));
    }
    Ok(())
}

/// Tightens at each grid point in turn, warm-starting from the previous
/// minimizer, then applies the isotonic correction.
pub fn estimate_width_curve(
    seed: &Sweepout,
    family: &dyn SigmaFamily,
    sigma_grid: &[f64],
    budget: usize,
    keep_sweepouts: bool,
) -> Result<WidthCurve> {
    validate_grid(sigma_grid)?;
    let mut current = seed.clone();
    let mut raw = Vec::with_capacity(sigma_grid.len());
    let mut argmaxes = Vec::with_capacity(sigma_grid.len());
    let mut kept = Vec::new();
    for &sigma in sigma_grid {
        let report = tighten(&current, family, sigma, budget)?;
        raw.push(report.sup);
        argmaxes.push(report.argmax);
        current = report.sweepout;
        if keep_sweepouts {
            kept.push(current.clone());
        }
    }
    Ok(WidthCurve {
        sigmas: sigma_grid.to_vec(),
        betas: isotonic(&raw),
        raw_betas: raw,
        argmax_frames: argmaxes,
        tightened_sweepouts: keep_sweepouts.then_some(kept),
    })
}

/// `β(0) > boundary_value + margin`.
pub fn check_nontrivial(curve: &WidthCurve, boundary_value: f64, margin: f64) -> Result<bool> {
    if !(margin > 0.0) {
        return Err(Error::Precondition("non-triviality margin must be positive".into()));
    }
    if curve.is_empty() {
        return Err(Error::Precondition("empty width curve".into()));
    }
    Ok(curve.beta0() > boundary_value + margin)
}
