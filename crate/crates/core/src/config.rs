//! Run configuration: a sectioned TOML file with dotted-key overrides.
//!
//! ```toml
//! problem = "double_well"
//! family = "admissible"
//! d = 1
//! seed = 42
//! output = "out/double_well"
//!
//! [grid]
//! include_zero = true
//! min = 0.005
//! max = 0.06
//! points = 12
//! spacing = "geometric"
//! ```
//!
//! Every key has a default, so a file only lists what it changes. Keys not in
//! [`valid_keys`] are rejected.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::deform::FamilyKind;
use crate::entropy::{DEFAULT_J_START, DEFAULT_WINDOW_STEPS};
use crate::error::{Error, Result};
use crate::functionals;
use crate::model::ToleranceProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Prepend `σ = 0`, whose width is `β(0)`.
    pub include_zero: bool,
    pub min: f64,
    pub max: f64,
    /// Number of positive grid points.
    pub points: usize,
    pub spacing: Spacing,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            include_zero: true,
            min: 0.005,
            max: 0.06,
            points: 12,
            spacing: Spacing::Geometric,
        }
    }
}

impl GridConfig {
    pub fn sigmas(&self) -> Vec<f64> {
        let n = self.points;
        let mut out = Vec::with_capacity(n + 1);
        if self.include_zero {
            out.push(0.0);
        }
        for i in 0..n {
            let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            let s = match self.spacing {
                Spacing::Linear => self.min + t * (self.max - self.min),
                Spacing::Geometric => self.min * (self.max / self.min).powf(t),
            };
            out.push(s);
        }
        if n > 1 {
            *out.last_mut().unwrap() = self.max;
        }
        out
    }

    /// Parses `min:max:points`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || Error::Config(format!("grid '{spec}' is not of the form min:max:points"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let g = GridConfig {
            include_zero: false,
            min: parts[0].trim().parse().map_err(|_| bad())?,
            max: parts[1].trim().parse().map_err(|_| bad())?,
            points: parts[2].trim().parse().map_err(|_| bad())?,
            spacing: Spacing::Linear,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.min < self.max && self.max < 1.0) {
            return Err(Error::Config(format!(
                "grid needs 0 < min < max < 1, got min = {}, max = {}",
                self.min, self.max
            )));
        }
        if self.points < 2 {
            return Err(Error::Config("grid.points must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepoutConfig {
    pub frames: usize,
    pub tighten_budget: usize,
    /// Polyline vertices of the seed path; empty means the problem default.
    pub vertices: Vec<Vec<f64>>,
}

impl Default for SweepoutConfig {
    fn default() -> Self {
        SweepoutConfig {
            frames: 33,
            tighten_budget: 3000,
            vertices: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    pub refine: usize,
    pub surgery_rounds: usize,
    pub chart_shrinks: usize,
    pub perturb_retries: usize,
    pub certify_starts: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            refine: 200,
            surgery_rounds: 8,
            chart_shrinks: 6,
            perturb_retries: 10,
            certify_starts: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    /// Forward window of the derivative estimate, in grid steps.
    pub window_steps: usize,
    pub j_start: usize,
    /// How many grid neighbors above a selected `σ` serve as `σ_k`.
    pub neighbors: usize,
    /// How many certified `σ` values are processed, smallest first.
    pub count: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            window_steps: DEFAULT_WINDOW_STEPS,
            j_start: DEFAULT_J_START,
            neighbors: 2,
            count: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbConfig {
    pub epsilons: Vec<f64>,
    /// Bump radius around the degenerate critical set.
    pub delta: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            epsilons: vec![1e-1, 1e-2, 1e-3],
            delta: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: String,
    pub family: FamilyKind,
    pub d: usize,
    pub seed: u64,
    pub output: String,
    pub grid: GridConfig,
    pub sweepout: SweepoutConfig,
    pub budget: BudgetConfig,
    pub tolerance: ToleranceProfile,
    pub selection: SelectionConfig,
    pub perturb: PerturbConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "double_well".into(),
            family: FamilyKind::Admissible,
            d: 1,
            seed: 42,
            output: "out".into(),
            grid: GridConfig::default(),
            sweepout: SweepoutConfig::default(),
            budget: BudgetConfig::default(),
            tolerance: ToleranceProfile::default(),
            selection: SelectionConfig::default(),
            perturb: PerturbConfig::default(),
        }
    }
}

fn flatten(prefix: &str, table: &Table, out: &mut Vec<String>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            _ => out.push(key),
        }
    }
}

fn default_table() -> Table {
    Table::try_from(RunConfig::default()).expect("default config serializes")
}

/// Every accepted dotted key.
pub fn valid_keys() -> Vec<String> {
    let mut out = Vec::new();
    flatten("", &default_table(), &mut out);
    out.sort();
    out
}

fn check_keys(table: &Table) -> Result<()> {
    let valid: BTreeSet<String> = valid_keys().into_iter().collect();
    let sections: BTreeSet<String> = default_table()
        .iter()
        .filter(|(_, v)| v.is_table())
        .map(|(k, _)| k.clone())
        .collect();
    let mut found = Vec::new();
    flatten("", table, &mut found);
    let unknown: Vec<String> = found
        .into_iter()
        .filter(|k| !valid.contains(k) && !sections.contains(k))
        .collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(Error::UnknownKeys {
            unknown,
            valid: valid.into_iter().collect(),
        })
    }
}

fn parse_value(raw: &str) -> Value {
    match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

/// Sets `key = value` in `table`, creating intermediate sections.
fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("'{p}' in '{key}' is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Parses `key=value` pairs.
pub fn parse_overrides(pairs: &[String]) -> Result<Vec<(String, String)>> {
    pairs
        .iter()
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .filter(|(k, _)| !k.is_empty())
                .ok_or_else(|| Error::Config(format!("override '{p}' is not of the form key=value")))
        })
        .collect()
}

impl RunConfig {
    /// Parses, applies overrides, and validates.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
        for (k, v) in overrides {
            set_dotted(&mut table, k, parse_value(v))?;
        }
        check_keys(&table)?;
        let cfg: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, overrides).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Normalized form: every key, fixed order.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        functionals::build(&self.problem).map_err(|e| match e {
            Error::UnknownProblem(k) => Error::Config(format!(
                "unknown problem '{k}' (registered: {:?})",
                functionals::REGISTERED
            )),
            other => other,
        })?;
        self.grid.validate()?;
        if self.sweepout.frames < crate::sweepout::MIN_PATH_FRAMES {
            return Err(Error::Config(format!(
                "sweepout.frames must be >= {}",
                crate::sweepout::MIN_PATH_FRAMES
            )));
        }
        let b = &self.budget;
        for (name, v) in [
            ("sweepout.tighten_budget", self.sweepout.tighten_budget),
            ("budget.refine", b.refine),
            ("budget.surgery_rounds", b.surgery_rounds),
            ("budget.chart_shrinks", b.chart_shrinks),
            ("budget.perturb_retries", b.perturb_retries),
            ("budget.certify_starts", b.certify_starts),
            ("selection.count", self.selection.count),
            ("selection.neighbors", self.selection.neighbors),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!(
                "seed must be at most {} (TOML integers are signed 64-bit)",
                i64::MAX
            )));
        }
        if self.selection.window_steps < 2 {
            return Err(Error::Config("selection.window_steps must be >= 2".into()));
        }
        let t = &self.tolerance;
        for (name, v) in [
            ("tolerance.grad", t.grad),
            ("tolerance.certify_grad", t.certify_grad),
            ("tolerance.null_rel", t.null_rel),
            ("tolerance.null_abs", t.null_abs),
            ("tolerance.gap_factor", t.gap_factor),
            ("tolerance.nontrivial_margin", t.nontrivial_margin),
            ("perturb.delta", self.perturb.delta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite")));
            }
        }
        if self.perturb.delta > 1.0 {
            return Err(Error::Config("perturb.delta must be at most 1".into()));
        }
        if self.perturb.epsilons.is_empty()
            || self.perturb.epsilons.iter().any(|e| !(*e >= 0.0 && e.is_finite()))
        {
            return Err(Error::Config("perturb.epsilons must be a nonempty list of values >= 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = c.to_toml_string();
        let back = RunConfig::from_toml_str(&text, &[]).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml_string(), text);
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml_str("", &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_apply() {
        let o = parse_overrides(&[
            "grid.points=24".into(),
            "problem=monkey_saddle".into(),
            "perturb.epsilons=[0.5]".into(),
            "family=dual".into(),
        ])
        .unwrap();
        let c = RunConfig::from_toml_str("", &o).unwrap();
        assert_eq!(c.grid.points, 24);
        assert_eq!(c.problem, "monkey_saddle");
        assert_eq!(c.perturb.epsilons, vec![0.5]);
        assert_eq!(c.family, FamilyKind::Dual);
        assert!(parse_overrides(&["nokey".into()]).is_err());
    }

    #[test]
    fn unknown_keys_listed() {
        let e = RunConfig::from_toml_str("[grid]\npoint = 3\nbogus = 1\n", &[]).unwrap_err();
        match e {
            Error::UnknownKeys { unknown, valid } => {
                assert_eq!(unknown, vec!["grid.bogus".to_string(), "grid.point".to_string()]);
                assert!(valid.contains(&"grid.points".to_string()));
                assert!(valid.contains(&"tolerance.grad".to_string()));
            }
            other => panic!("{other}"),
        }
        let o = parse_overrides(&["tolerance.gradd=1".into()]).unwrap();
        assert!(matches!(
            RunConfig::from_toml_str("", &o),
            Err(Error::UnknownKeys { .. })
        ));
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "problem = \"nope\"",
            "[grid]\nmin = 0.0",
            "[grid]\nmax = 1.5",
            "[budget]\nrefine = 0",
            "[tolerance]\ngrad = -1.0",
            "[perturb]\nepsilons = []",
            "family = \"sideways\"",
        ] {
            assert!(RunConfig::from_toml_str(text, &[]).is_err(), "{text}");
        }
        let big = RunConfig {
            seed: u64::MAX,
            ..RunConfig::default()
        };
        assert!(big.validate().is_err());
    }

    #[test]
    fn grid_values() {
        let g = GridConfig::parse_spec("0.005:0.08:24").unwrap();
        let s = g.sigmas();
        assert_eq!(s.len(), 24);
        assert_eq!(s[0], 0.005);
        assert_eq!(s[23], 0.08);
        assert!(GridConfig::parse_spec("0.1:0.05:3").is_err());
        assert!(GridConfig::parse_spec("a:b").is_err());
        let d = GridConfig::default().sigmas();
        assert_eq!(d.len(), 13);
        assert_eq!(d[0], 0.0);
        assert!(d.windows(2).all(|w| w[1] > w[0]));
    }
}
