//! Concrete problem instances and the string-keyed registry.

pub mod analytic;
pub mod chart;
pub mod loops;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{at_sigma, FunctionalHandle, Matrix, SigmaFamily, Vector, ViscousFamily};
use crate::sweepout::Sweepout;

pub use analytic::{
    make_double_well, make_four_well, make_monkey_saddle, make_planted_saddle,
    make_quadratic_saddle, make_tilted_monkey_saddle,
};
pub use chart::{ChartKind, SurfaceChart};
pub use loops::{
    latitude_loop, make_alpha_energy, make_loop_bending, make_loop_length, AlphaFamily, Closure,
    LoopConfig,
};

/// Keys accepted by [`build`], each with its default parameters.
pub const REGISTERED: &[&str] = &[
    "double_well",
    "quadratic_saddle:neg=1,pos=1",
    "quadratic_saddle:neg=2,pos=1",
    "monkey_saddle:confine=1,c=0",
    "four_well",
    "planted_saddle:A=1,w=0.5",
    "torus_loop:R=2,r=0.5,N=64",
    "ellipsoid_loop:a=1,c=0.5,N=64",
    "alpha_loop:N=64,target=flat",
];

#[derive(Clone, Debug)]
enum Shape {
    Analytic { seed: Option<Vec<Vector>> },
    Loop { config: LoopConfig, v0: Option<f64> },
    Alpha { config: LoopConfig },
}

/// A registered problem: a σ-family plus the metadata the pipeline needs.
#[derive(Clone)]
pub struct Problem {
    pub key: String,
    pub family: Arc<dyn SigmaFamily>,
    /// Present when the family is additive, `F + σ²G`.
    pub viscous: Option<ViscousFamily>,
    /// Coordinate norm beyond which refinement is declared divergent.
    pub bound: f64,
    shape: Shape,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Problem({})", self.key)
    }
}

impl Problem {
    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    /// Handles whose derivatives must pass finite-difference checks.
    pub fn handles(&self) -> Vec<FunctionalHandle> {
        match &self.viscous {
            Some(v) => vec![v.base.clone(), v.regularizer.clone()],
            None => vec![at_sigma(self.family.clone(), 0.0), at_sigma(self.family.clone(), 0.1)],
        }
    }

    /// Default seed family: a path whose end frames are frozen.
    pub fn seed_sweepout(&self, frames: usize) -> Result<Sweepout> {
        match &self.shape {
            Shape::Analytic { seed: Some(vertices) } => Sweepout::polyline(vertices, frames),
            Shape::Loop {
                config,
                v0: Some(v0),
            } => {
                let n = config.nodes;
                let fr = (0..frames)
                    .map(|k| {
                        let t = k as f64 / (frames - 1) as f64;
                        let v = if 2 * k + 1 == frames {
                            PI / 2.0
                        } else {
                            v0 + (PI - 2.0 * v0) * t
                        };
                        latitude_loop(n, v)
                    })
                    .collect();
                Sweepout::path(fr)
            }
            _ => Err(Error::Config(format!(
                "problem '{}' has no default sweepout",
                self.key
            ))),
        }
    }

    /// Orthonormal basis of the variations in which Morse data is computed,
    /// `None` meaning the full coordinate space.
    pub fn morse_subspace(&self, x: &Vector) -> Result<Option<Matrix>> {
        match &self.shape {
            Shape::Loop { config, .. } | Shape::Alpha { config } => {
                config.normal_basis(x).map(Some)
            }
            Shape::Analytic { .. } => Ok(None),
        }
    }

    pub fn loop_config(&self) -> Option<&LoopConfig> {
        match &self.shape {
            Shape::Loop { config, .. } | Shape::Alpha { config } => Some(config),
            Shape::Analytic { .. } => None,
        }
    }

    /// A random configuration away from degenerate loci, for derivative checks.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Vector {
        match &self.shape {
            Shape::Analytic { .. } => {
                Vector::from_fn(self.dim(), |_, _| rng.random_range(-1.5..1.5))
            }
            Shape::Loop { config, .. } | Shape::Alpha { config } => {
                let n = config.nodes;
                let v = rng.random_range(0.6..PI - 0.6);
                let mut x = latitude_loop(n, v);
                let phase = rng.random_range(0.0..2.0 * PI);
                for i in 0..n {
                    x[2 * i] += rng.random_range(-0.2..0.2) * 2.0 * PI / n as f64;
                    x[2 * i + 1] += 0.15 * (2.0 * PI * i as f64 / n as f64 + phase).sin()
                        + rng.random_range(-0.02..0.02);
                }
                x
            }
        }
    }
}

fn parse_key(key: &str) -> Result<(String, BTreeMap<String, String>)> {
    let (name, rest) = match key.split_once(':') {
        Some((n, r)) => (n.trim(), r),
        None => (key.trim(), ""),
    };
    let mut params = BTreeMap::new();
    for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| {
            Error::Config(format!("problem parameter '{part}' is not of the form k=v"))
        })?;
        params.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok((name.to_string(), params))
}

struct Params {
    key: String,
    map: BTreeMap<String, String>,
}

impl Params {
    fn take<T: std::str::FromStr>(&mut self, name: &str, default: T) -> Result<T> {
        match self.map.remove(name) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| {
                Error::Config(format!("problem '{}': cannot parse {name}={s}", self.key))
            }),
        }
    }

    fn finish(self, valid: &[&str]) -> Result<()> {
        if let Some(k) = self.map.keys().next() {
            return Err(Error::Config(format!(
                "problem '{}': unknown parameter '{k}' (valid: {valid:?})",
                self.key
            )));
        }
        Ok(())
    }
}

fn quartic(dim: usize) -> FunctionalHandle {
    FunctionalHandle::new(analytic::QuarticSum(dim))
}

fn regularizer(params: &mut Params, dim: usize) -> Result<FunctionalHandle> {
    match params.take("reg", "quartic".to_string())?.as_str() {
        "quartic" => Ok(quartic(dim)),
        "zero" => Ok(FunctionalHandle::new(analytic::Zero(dim))),
        other => Err(Error::Config(format!(
            "unknown regularizer '{other}' (valid: quartic, zero)"
        ))),
    }
}

fn analytic(
    key: &str,
    base: FunctionalHandle,
    reg: FunctionalHandle,
    seed: Option<Vec<Vector>>,
) -> Result<Problem> {
    let fam = ViscousFamily::new(base, reg)?;
    Ok(Problem {
        key: key.to_string(),
        family: Arc::new(fam.clone()),
        viscous: Some(fam),
        bound: 1e3,
        shape: Shape::Analytic { seed },
    })
}

fn v(x: &[f64]) -> Vector {
    Vector::from_row_slice(x)
}

fn chart_from(params: &mut Params, kind: &str) -> Result<SurfaceChart> {
    match kind {
        "flat" => Ok(SurfaceChart::flat()),
        "torus" => SurfaceChart::torus(params.take("R", 2.0)?, params.take("r", 0.5)?),
        "ellipsoid" => SurfaceChart::ellipsoid(params.take("a", 1.0)?, params.take("c", 0.5)?),
        other => Err(Error::Config(format!(
            "unknown chart '{other}' (valid: flat, torus, ellipsoid)"
        ))),
    }
}

/// Builds a problem from a key such as `"torus_loop:R=2,r=0.5,N=64"`.
pub fn build(key: &str) -> Result<Problem> {
    let (name, map) = parse_key(key)?;
    let mut p = Params {
        key: key.to_string(),
        map,
    };
    let problem = match name.as_str() {
        "double_well" => {
            let reg = regularizer(&mut p, 2)?;
            p.finish(&["reg"])?;
            analytic(
                key,
                make_double_well(),
                reg,
                Some(vec![v(&[-1.0, 0.0]), v(&[1.0, 0.0])]),
            )?
        }
        "quadratic_saddle" => {
            let neg: usize = p.take("neg", 1)?;
            let pos: usize = p.take("pos", 1)?;
            let scales: String = p.take("scales", String::new())?;
            let scales = scales
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad scale '{s}'")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let reg = regularizer(&mut p, neg + pos)?;
            p.finish(&["neg", "pos", "scales", "reg"])?;
            let n = neg + pos;
            let base = make_quadratic_saddle(neg, pos, &scales)?;
            let mut a = Vector::zeros(n);
            let mut b = Vector::zeros(n);
            a[0] = -1.0;
            b[0] = 1.0;
            if neg >= 1 && pos >= 1 {
                a[neg] = 0.3;
                b[neg] = 0.3;
            }
            analytic(key, base, reg, Some(vec![a, b]))?
        }
        "monkey_saddle" => {
            let confine: f64 = p.take("confine", 1.0)?;
            let c: f64 = p.take("c", 0.0)?;
            let reg = regularizer(&mut p, 2)?;
            p.finish(&["confine", "c", "reg"])?;
            let base = make_tilted_monkey_saddle(confine, c)?;
            // Valley floors of the confined saddle lie at r = 3/(4·confine).
            let seed = (confine > 0.0).then(|| {
                let r = 3.0 / (4.0 * confine);
                vec![
                    v(&[-r, 0.0]),
                    v(&[0.0, 0.0]),
                    v(&[r * (PI / 3.0).cos(), r * (PI / 3.0).sin()]),
                ]
            });
            analytic(key, base, reg, seed)?
        }
        "four_well" => {
            let reg = regularizer(&mut p, 2)?;
            p.finish(&["reg"])?;
            analytic(
                key,
                make_four_well(),
                reg,
                Some(vec![v(&[-1.0, -1.0]), v(&[1.0, 1.0])]),
            )?
        }
        "planted_saddle" => {
            let a: f64 = p.take("A", 1.0)?;
            let w: f64 = p.take("w", 0.5)?;
            let reg = regularizer(&mut p, 2)?;
            p.finish(&["A", "w", "reg"])?;
            analytic(
                key,
                make_planted_saddle(a, w)?,
                reg,
                Some(vec![v(&[-1.0, 0.0]), v(&[1.0, 0.0])]),
            )?
        }
        "torus_loop" | "ellipsoid_loop" => {
            let n: usize = p.take("N", 64)?;
            let chart = chart_from(&mut p, name.trim_end_matches("_loop"))?;
            let v0 = if name == "ellipsoid_loop" {
                Some(p.take("v0", 0.3)?)
            } else {
                None
            };
            p.finish(&["N", "R", "r", "a", "c", "v0"])?;
            let config = LoopConfig::closed(chart, n)?;
            let fam = ViscousFamily::new(
                make_loop_length(config.clone()),
                make_loop_bending(config.clone()),
            )?;
            Problem {
                key: key.to_string(),
                family: Arc::new(fam.clone()),
                viscous: Some(fam),
                bound: 1e3,
                shape: Shape::Loop { config, v0 },
            }
        }
        "alpha_loop" => {
            let n: usize = p.take("N", 64)?;
            let target: String = p.take("target", "flat".to_string())?;
            let chart = chart_from(&mut p, &target)?;
            p.finish(&["N", "target", "R", "r", "a", "c"])?;
            let fam = AlphaFamily::new(chart, n)?;
            let config = fam.config.clone();
            Problem {
                key: key.to_string(),
                family: Arc::new(fam),
                viscous: None,
                bound: 1e3,
                shape: Shape::Alpha { config },
            }
        }
        _ => return Err(Error::UnknownProblem(key.to_string())),
    };
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_registered_key_builds() {
        for key in REGISTERED {
            let p = build(key).unwrap();
            assert!(p.dim() > 0);
        }
    }

    #[test]
    fn unknown_keys_and_parameters_rejected() {
        assert!(matches!(build("nope"), Err(Error::UnknownProblem(_))));
        assert!(matches!(build("double_well:x=1"), Err(Error::Config(_))));
        assert!(matches!(build("quadratic_saddle:neg=a"), Err(Error::Config(_))));
    }

    #[test]
    fn seed_sweepouts_freeze_end_frames() {
        for key in ["double_well", "four_well", "monkey_saddle", "ellipsoid_loop:N=16"] {
            let p = build(key).unwrap();
            let s = p.seed_sweepout(17).unwrap();
            assert!(s.is_boundary(0) && s.is_boundary(16));
            assert_eq!(s.dim(), p.dim());
        }
        assert!(build("torus_loop").unwrap().seed_sweepout(17).is_err());
    }

    #[test]
    fn ellipsoid_seed_passes_through_equator() {
        let p = build("ellipsoid_loop:N=16").unwrap();
        let s = p.seed_sweepout(17).unwrap();
        assert_eq!(s.frame(8)[1], PI / 2.0);
    }

    #[test]
    fn double_well_viscous_example() {
        let p = build("double_well").unwrap();
        let x = v(&[1.0, 0.0]);
        assert!((p.family.value(0.1, &x).unwrap() - 0.01).abs() < 1e-15);
    }
}
