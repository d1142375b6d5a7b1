//! JSON scenario configuration.
//!
//! ```json
//! { "scenario": "vehicle", "epsilon": "1/sqrt(10*pi)",
//!   "eta1": 1, "eta2": 0.25, "N0": 2, "T0": 2, "Qs": [3], "Qu": [1, 2],
//!   "schedule": "schedules/vehicle_nominal.csv", "x0": [-4, 4], "horizon": 30 }
//! ```
//!
//! Paths are resolved against the directory holding the config file.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::es_affine::{build_es_affine, EsAffineParams};
use super::sphere::{build_sphere_es, SphereEsParams};
use super::sync::{build_sync, cyclic_schedule, SyncParams};
use super::vehicle::{build_vehicle, Coordinates, VehicleParams};
use super::{CostFunction, Scenario, ScenarioError};
use crate::automaton::{AutomatonConfig, AutomatonError, SwitchSchedule};
use crate::averaging::QuadratureConfig;
use crate::quadrature::Rational;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot parse epsilon {0:?}")]
    Epsilon(String),
    #[error("schedule {path}: {source}")]
    Schedule {
        path: PathBuf,
        #[source]
        source: AutomatonError,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Vehicle,
    Sync,
    EsAffine,
    Sphere,
}

/// A real number or an expression such as `"3/2"` or `"1/sqrt(60*pi)"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumberSpec {
    Value(f64),
    Expr(String),
}

impl NumberSpec {
    pub fn value(&self) -> Result<f64, ConfigError> {
        match self {
            Self::Value(v) if *v > 0.0 && v.is_finite() => Ok(*v),
            Self::Value(v) => Err(ConfigError::Epsilon(v.to_string())),
            Self::Expr(s) => parse_epsilon(s),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub step: Option<f64>,
    pub average_step: Option<f64>,
    pub j_max: Option<usize>,
    pub state_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub epsilon: Option<NumberSpec>,
    pub frequencies: Option<Vec<Rational>>,
    pub cost: Option<CostFunction>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    #[serde(rename = "N0")]
    pub n0: Option<u32>,
    #[serde(rename = "T0")]
    pub t0: Option<f64>,
    #[serde(rename = "Qs")]
    pub qs: Option<Vec<u32>>,
    #[serde(rename = "Qu")]
    pub qu: Option<Vec<u32>>,
    pub schedule: Option<PathBuf>,
    pub mode0: Option<u32>,
    pub x0: Option<Vec<f64>>,
    pub heading: Option<[f64; 2]>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub solver: Option<SolverOverrides>,
    pub quad_nodes: Option<usize>,
    pub coordinates: Option<Coordinates>,
    pub amplitude: Option<f64>,
    pub delta: Option<f64>,
    pub warp: Option<Vec<f64>>,
    pub switching: Option<bool>,
    /// Number of oscillators (2 or 4 select the built-in layouts).
    pub r: Option<usize>,
    /// Edge lists on one-based node labels.
    pub graphs: Option<Vec<Vec<(usize, usize)>>>,
    pub directions: Option<Vec<Vec<f64>>>,
    pub switch_period: Option<f64>,
    /// State dimension for control-affine extremum seeking.
    pub dimension: Option<usize>,
    /// Practical-stability radius and overshoot constant for `run` metrics.
    pub nu: Option<f64>,
    pub c: Option<f64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Evaluates a positive number written as products and quotients of
/// numbers, `pi` and `sqrt(…)`.
pub fn parse_epsilon(text: &str) -> Result<f64, ConfigError> {
    let err = || ConfigError::Epsilon(text.to_string());
    let src: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut pos = 0;
    let v = product(&src, &mut pos).ok_or_else(err)?;
    if pos != src.len() || !(v > 0.0) || !v.is_finite() {
        return Err(err());
    }
    Ok(v)
}

fn product(s: &[char], pos: &mut usize) -> Option<f64> {
    let mut acc = atom(s, pos)?;
    while let Some(&op) = s.get(*pos) {
        match op {
            '*' => {
                *pos += 1;
                acc *= atom(s, pos)?;
            }
            '/' => {
                *pos += 1;
                acc /= atom(s, pos)?;
            }
            _ => break,
        }
    }
    Some(acc)
}

fn atom(s: &[char], pos: &mut usize) -> Option<f64> {
    let rest: String = s[*pos..].iter().collect();
    if rest.starts_with("pi") {
        *pos += 2;
        return Some(std::f64::consts::PI);
    }
    if rest.starts_with("sqrt(") {
        *pos += 5;
        let v = product(s, pos)?;
        (s.get(*pos) == Some(&')')).then(|| *pos += 1)?;
        return Some(v.sqrt());
    }
    if s.get(*pos) == Some(&'(') {
        *pos += 1;
        let v = product(s, pos)?;
        (s.get(*pos) == Some(&')')).then(|| *pos += 1)?;
        return Some(v);
    }
    let start = *pos;
    while let Some(&c) = s.get(*pos) {
        let exp_sign = (c == '-' || c == '+') && *pos > start && s[*pos - 1] == 'e';
        if !(c.is_ascii_digit() || c == '.' || c == 'e' || exp_sign) {
            break;
        }
        *pos += 1;
    }
    s[start..*pos].iter().collect::<String>().parse().ok()
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioKind) -> Self {
        Self {
            scenario,
            description: None,
            epsilon: None,
            frequencies: None,
            cost: None,
            eta1: None,
            eta2: None,
            n0: None,
            t0: None,
            qs: None,
            qu: None,
            schedule: None,
            mode0: None,
            x0: None,
            heading: None,
            horizon: None,
            seed: None,
            solver: None,
            quad_nodes: None,
            coordinates: None,
            amplitude: None,
            delta: None,
            warp: None,
            switching: None,
            r: None,
            graphs: None,
            directions: None,
            switch_period: None,
            dimension: None,
            nu: None,
            c: None,
            base_dir: PathBuf::from("."),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let file = File::open(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: Self = serde_json::from_reader(file)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Self = serde_json::from_str(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn name(&self) -> &'static str {
        match self.scenario {
            ScenarioKind::Vehicle => "vehicle",
            ScenarioKind::Sync => "sync",
            ScenarioKind::EsAffine => "es_affine",
            ScenarioKind::Sphere => "sphere",
        }
    }

    pub fn epsilon_value(&self) -> Result<Option<f64>, ConfigError> {
        self.epsilon.as_ref().map(NumberSpec::value).transpose()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Schedule from the configured file, truncated to the horizon.
    pub fn load_schedule(&self, horizon: f64) -> Result<Option<SwitchSchedule>, ConfigError> {
        let Some(rel) = &self.schedule else {
            return Ok(None);
        };
        let path = self.resolve(rel);
        let file = File::open(&path).map_err(|source| ConfigError::Io {
            path: path.clone(),
            source,
        })?;
        let mut sched = SwitchSchedule::from_csv(file)
            .map_err(|source| ConfigError::Schedule { path, source })?;
        sched.entries.retain(|e| e.time < horizon);
        Ok(Some(sched))
    }

    fn automaton(&self, mut base: AutomatonConfig) -> AutomatonConfig {
        if let Some(v) = self.eta1 {
            base.eta1 = v;
        }
        if let Some(v) = self.eta2 {
            base.eta2 = v;
        }
        if let Some(v) = self.n0 {
            base.n0 = v;
        }
        if let Some(v) = self.t0 {
            base.t0 = v;
        }
        if let Some(v) = &self.qs {
            base.stable = v.clone();
        }
        if let Some(v) = &self.qu {
            base.unstable = v.clone();
        }
        if self.qs.is_some() || self.qu.is_some() {
            base.modes = base.stable.len() as u32 + base.unstable.len() as u32;
        }
        base
    }

    fn quad(&self, base: QuadratureConfig) -> QuadratureConfig {
        match self.quad_nodes {
            Some(n) => QuadratureConfig {
                nodes_tau2: n,
                ..base
            },
            None => base,
        }
    }

    fn x0_len(&self, n: usize) -> Result<Option<&[f64]>, ConfigError> {
        match &self.x0 {
            Some(v) if v.len() != n => Err(ConfigError::Invalid(format!(
                "x0 needs {n} entries, got {}",
                v.len()
            ))),
            Some(v) => Ok(Some(v)),
            None => Ok(None),
        }
    }

    pub fn build(&self) -> Result<Scenario, ConfigError> {
        let eps = self.epsilon_value()?;
        let overrides = self.solver.clone().unwrap_or_default();
        let mut sc = match self.scenario {
            ScenarioKind::Vehicle => self.build_vehicle(eps, &overrides)?,
            ScenarioKind::Sync => self.build_sync(eps, &overrides)?,
            ScenarioKind::EsAffine => self.build_es(eps, &overrides)?,
            ScenarioKind::Sphere => self.build_sphere(eps, &overrides)?,
        };
        if let Some(h) = overrides.average_step {
            sc.average_solver.step = h;
        }
        if let Some(j) = overrides.j_max {
            sc.solver.j_max = j;
            sc.average_solver.j_max = j;
        }
        if let Some(b) = overrides.state_bound {
            sc.solver.state_bound = b;
            sc.average_solver.state_bound = b;
        }
        sc.seed = self.seed;
        sc.solver
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        sc.average_solver
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(sc)
    }

    fn build_vehicle(
        &self,
        eps: Option<f64>,
        o: &SolverOverrides,
    ) -> Result<Scenario, ConfigError> {
        let d = VehicleParams::default();
        let horizon = self.horizon.unwrap_or(d.horizon);
        let position = match self.x0_len(2)? {
            Some(v) => [v[0], v[1]],
            None => d.position,
        };
        let p = VehicleParams {
            eps: eps.unwrap_or(d.eps),
            cost: self.cost.clone().unwrap_or(d.cost),
            schedule: self.load_schedule(horizon)?.unwrap_or(d.schedule),
            mode0: self.mode0.unwrap_or(d.mode0),
            automaton: self.automaton(d.automaton),
            coordinates: self.coordinates.unwrap_or(d.coordinates),
            amplitude: self.amplitude.unwrap_or(d.amplitude),
            position,
            heading: self.heading.unwrap_or(d.heading),
            horizon,
            step: o.step,
            quad: self.quad(d.quad),
        };
        Ok(build_vehicle(&p)?)
    }

    fn build_sync(&self, eps: Option<f64>, o: &SolverOverrides) -> Result<Scenario, ConfigError> {
        let eps = eps.unwrap_or(1.0 / (60.0 * std::f64::consts::PI).sqrt());
        let seed = self.seed.unwrap_or(0);
        let mut p = match self.r.unwrap_or(2) {
            2 => SyncParams::two_oscillators(eps, seed),
            4 => SyncParams::four_oscillators(eps, seed),
            r if self.graphs.is_some() && self.directions.is_some() => {
                let mut p = SyncParams::two_oscillators(eps, seed);
                p.xi0 = super::sync::random_phases(r, seed);
                p.frequencies = (0..r as u64).map(|i| Rational::integer(10 + i)).collect();
                p
            }
            r => {
                return Err(ConfigError::Invalid(format!(
                    "r = {r} needs explicit graphs and directions"
                )))
            }
        };
        if let Some(g) = &self.graphs {
            p.graphs = g
                .iter()
                .map(|edges| {
                    edges
                        .iter()
                        .map(|&(a, b)| {
                            if a == 0 || b == 0 {
                                Err(ConfigError::Invalid(
                                    "graph nodes are numbered from 1".into(),
                                ))
                            } else {
                                Ok((a - 1, b - 1))
                            }
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<_, _>>()?;
        }
        if let Some(dirs) = &self.directions {
            p.directions = dirs.clone();
        }
        if let Some(f) = &self.frequencies {
            p.frequencies = f.clone();
        }
        if let Some(x) = &self.x0 {
            p.xi0 = x.clone();
        }
        let modes = (p.graphs.len() * p.directions.len()) as u32;
        p.automaton = self.automaton(AutomatonConfig::all_stable(modes, 1.0, 2));
        p.mode0 = self.mode0.unwrap_or(1);
        p.horizon = self.horizon.unwrap_or(p.horizon);
        p.schedule = match self.load_schedule(p.horizon)? {
            Some(s) => s,
            None => cyclic_schedule(modes, p.mode0, self.switch_period.unwrap_or(2.0), p.horizon),
        };
        p.step = o.step;
        p.quad = self.quad(p.quad);
        Ok(build_sync(&p)?)
    }

    fn build_es(&self, eps: Option<f64>, o: &SolverOverrides) -> Result<Scenario, ConfigError> {
        let n = self
            .dimension
            .or(self.x0.as_ref().map(Vec::len))
            .unwrap_or(2);
        let mut p = EsAffineParams::unit_fields(n, eps.unwrap_or(0.1));
        if let Some(x) = self.x0_len(n)? {
            p.x0 = x.to_vec();
        }
        if let Some(f) = &self.frequencies {
            p.frequencies = f.clone();
        }
        if let Some(c) = &self.cost {
            p.cost = c.clone();
        }
        p.automaton = self.automaton(p.automaton);
        p.mode0 = self.mode0.unwrap_or(p.mode0);
        p.horizon = self.horizon.unwrap_or(p.horizon);
        if let Some(s) = self.load_schedule(p.horizon)? {
            p.schedule = s;
        } else {
            p.schedule.entries.retain(|e| e.time < p.horizon);
        }
        p.step = o.step;
        p.quad = self.quad(p.quad);
        Ok(build_es_affine(&p)?)
    }

    fn build_sphere(&self, eps: Option<f64>, o: &SolverOverrides) -> Result<Scenario, ConfigError> {
        let d = SphereEsParams::default();
        let frequencies = match &self.frequencies {
            Some(f) if f.len() == 3 => [f[0], f[1], f[2]],
            Some(f) => {
                return Err(ConfigError::Invalid(format!(
                    "the sphere needs 3 frequencies, got {}",
                    f.len()
                )))
            }
            None => d.frequencies,
        };
        let x0 = match self.x0_len(3)? {
            Some(v) => [v[0], v[1], v[2]],
            None => d.x0,
        };
        let p = SphereEsParams {
            eps: eps.unwrap_or(d.eps),
            frequencies,
            delta: self.delta.unwrap_or(d.delta),
            warp: self.warp.clone().unwrap_or(d.warp),
            x0,
            mode0: self.mode0.unwrap_or(d.mode0),
            horizon: self.horizon.unwrap_or(d.horizon),
            switching: self.switching.unwrap_or(d.switching),
            step: o.step,
            quad: self.quad(d.quad),
        };
        Ok(build_sphere_es(&p)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn epsilon_expressions() {
        assert_eq!(parse_epsilon("0.1").unwrap(), 0.1);
        assert_eq!(parse_epsilon("3/2").unwrap(), 1.5);
        assert!((parse_epsilon("1/sqrt(10*pi)").unwrap() - 1.0 / (10.0 * PI).sqrt()).abs() < 1e-15);
        assert!(
            (parse_epsilon("1 / sqrt(60 * pi)").unwrap() - 1.0 / (60.0 * PI).sqrt()).abs() < 1e-15
        );
        assert!((parse_epsilon("2e-1").unwrap() - 0.2).abs() < 1e-15);
        for bad in ["", "0", "1/0", "sqrt(2", "x", "1//2", "-1"] {
            assert!(parse_epsilon(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn automaton_keys_override_defaults() {
        let cfg = ScenarioConfig::from_json(
            r#"{"scenario": "vehicle", "eta1": 2, "eta2": 0.9, "N0": 3, "T0": 3, "Qs": [3], "Qu": [1, 2]}"#,
            Path::new("."),
        )
        .unwrap();
        let a = cfg.automaton(AutomatonConfig::three_mode());
        assert_eq!((a.eta1, a.eta2, a.n0, a.t0, a.modes), (2.0, 0.9, 3, 3.0, 3));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioConfig::from_json(
            r#"{"scenario": "sphere", "delat": 0.1}"#,
            Path::new(".")
        )
        .is_err());
        assert!(ScenarioConfig::from_json(r#"{"scenario": "boat"}"#, Path::new(".")).is_err());
    }

    #[test]
    fn numeric_and_textual_epsilon() {
        let a =
            ScenarioConfig::from_json(r#"{"scenario": "sphere", "epsilon": 0.2}"#, Path::new("."))
                .unwrap();
        assert_eq!(a.epsilon_value().unwrap(), Some(0.2));
        let b = ScenarioConfig::from_json(
            r#"{"scenario": "sphere", "epsilon": "1/5"}"#,
            Path::new("."),
        )
        .unwrap();
        assert_eq!(b.epsilon_value().unwrap(), Some(0.2));
        let c =
            ScenarioConfig::from_json(r#"{"scenario": "sphere", "epsilon": -1}"#, Path::new("."))
                .unwrap();
        assert!(c.epsilon_value().is_err());
    }

    #[test]
    fn frequencies_as_pairs() {
        let cfg = ScenarioConfig::from_json(
            r#"{"scenario": "es_affine", "frequencies": [[1, 1], [3, 2]], "x0": [1, 1], "horizon": 2}"#,
            Path::new("."),
        )
        .unwrap();
        assert_eq!(
            cfg.frequencies.as_ref().unwrap()[1],
            Rational::new(3, 2).unwrap()
        );
        let sc = cfg.build().unwrap();
        assert_eq!(sc.x0[..2], [1.0, 1.0]);
        assert!(ScenarioConfig::from_json(
            r#"{"scenario": "es_affine", "frequencies": [[0, 1]]}"#,
            Path::new(".")
        )
        .is_err());
    }

    #[test]
    fn each_kind_builds_with_defaults() {
        for kind in [
            ScenarioKind::Vehicle,
            ScenarioKind::Sync,
            ScenarioKind::EsAffine,
            ScenarioKind::Sphere,
        ] {
            let sc = ScenarioConfig::new(kind).build().unwrap();
            assert_eq!(sc.name, ScenarioConfig::new(kind).name());
        }
    }
}
