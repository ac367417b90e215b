//! Configuration-driven experiments and their reports.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]: replicas
//! draw from streams keyed by the seed, the level and the replica index, and
//! all reductions run in replica order.

mod experiments;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::environments::{ConductanceLaw, SamplingMode};
use crate::error::{bail, Result};
use crate::network::FractalScheme;

pub use experiments::{
    estimate_c0, run_btm, run_diagnostics, run_experiment, run_homogenize, run_lbm, run_rcm, COORDINATES,
};
pub use output::{emit_report, render_svg, OutputFormat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Btm,
    Lbm,
    RcmTree,
    RcmFractal,
    Homogenize,
    Diagnostics,
}

/// How the time-t laws of the walks are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum MarginalMethod {
    /// Spectral heat kernel of each sampled environment.
    #[default]
    Exact,
    /// One Gillespie path per environment.
    Simulate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Walk {
    Vsrw,
    Csrw,
}

/// One experiment. Unknown fields are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// `gasket`, `vicsek` or `carpet`.
    #[serde(default = "default_scheme")]
    pub scheme: String,
    /// Strictly ascending.
    pub levels: Vec<usize>,
    /// Tail index of the trap or conductance law.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Liouville coupling.
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Conductance law; defaults to `pareto(alpha)`.
    #[serde(default)]
    pub law: Option<ConductanceLaw>,
    /// Rescaled observation times.
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    /// Environment replicas per level (samples for `homogenize`).
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub method: MarginalMethod,
    /// Conductance sampling; per edge on trees and per cell otherwise by default.
    #[serde(default)]
    pub mode: Option<SamplingMode>,
    /// Walks run by the random conductance experiments.
    #[serde(default = "default_walks")]
    pub walks: Vec<Walk>,
    /// Compare levels environment by environment instead of under the annealed law.
    #[serde(default)]
    pub quenched: bool,
    /// Overrides the estimated constant of the CSRW time scale.
    #[serde(default)]
    pub time_constant: Option<f64>,
}

fn default_scheme() -> String {
    "gasket".into()
}

fn default_times() -> Vec<f64> {
    vec![0.1, 0.5, 1.0]
}

fn default_replicas() -> usize {
    1000
}

fn default_walks() -> Vec<Walk> {
    vec![Walk::Vsrw, Walk::Csrw]
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, levels: Vec<usize>) -> Self {
        Self {
            experiment,
            scheme: default_scheme(),
            levels,
            alpha: None,
            kappa: None,
            law: None,
            times: default_times(),
            replicas: default_replicas(),
            seed: 0,
            output: None,
            method: MarginalMethod::Exact,
            mode: None,
            walks: default_walks(),
            quenched: false,
            time_constant: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| crate::Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// JSON schema of the configuration file.
    pub fn schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(ExperimentConfig)).expect("schema serializes")
    }

    pub fn scheme(&self) -> Result<FractalScheme> {
        FractalScheme::by_name(&self.scheme).map_err(|e| crate::Error::Config(e.to_string()))
    }

    /// The conductance or trap law in force.
    pub fn law(&self) -> Result<ConductanceLaw> {
        match (&self.law, self.alpha) {
            (Some(l), _) => Ok(l.clone()),
            (None, Some(a)) => Ok(ConductanceLaw::pareto(a)),
            (None, None) => bail!(Config, "experiment needs either `law` or `alpha`"),
        }
    }

    /// Tail index used by the heavy-tailed scalings, if the law has one.
    pub fn tail_index(&self) -> Option<f64> {
        match (&self.law, self.alpha) {
            (Some(ConductanceLaw::Pareto { alpha }), _) => Some(*alpha),
            (Some(_), a) => a,
            (None, a) => a,
        }
    }

    /// Checks everything that can be checked without simulating.
    pub fn validate(&self) -> Result<()> {
        let scheme = self.scheme()?;
        if self.levels.is_empty() {
            bail!(Config, "levels must not be empty");
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            bail!(Config, "levels must be strictly ascending, got {:?}", self.levels);
        }
        if self.replicas < 1 {
            bail!(Config, "replicas must be at least 1");
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            bail!(Config, "times must be a nonempty list of positive numbers");
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            bail!(Config, "times must be strictly ascending");
        }
        if let Some(law) = &self.law {
            law.validate().map_err(|e| crate::Error::Config(e.to_string()))?;
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) || !a.is_finite() || a == 1.0 {
                bail!(Config, "alpha must be positive and different from 1, got {a}");
            }
        }
        let comparing = !matches!(self.experiment, ExperimentKind::Homogenize);
        if comparing && self.levels.len() < 2 {
            bail!(Config, "cross-level comparisons need at least two levels");
        }
        let needs_scale = !matches!(self.experiment, ExperimentKind::Homogenize);
        if needs_scale && scheme.resistance_scale.is_none() {
            bail!(Config, "scheme {} has no known resistance scale", scheme.name);
        }
        match self.experiment {
            ExperimentKind::Btm => {
                if self.alpha.is_none() {
                    bail!(Config, "btm needs alpha");
                }
            }
            _ if self.mode == Some(SamplingMode::PerEdge) && self.experiment == ExperimentKind::Homogenize => {
                bail!(Config, "homogenize draws cell matrices; use per_cell or per_cell_shared");
            }
            ExperimentKind::Lbm => {
                let k = self.kappa.unwrap_or(0.0);
                if !(k >= 0.0) || !k.is_finite() {
                    bail!(Config, "kappa must be nonnegative, got {k}");
                }
            }
            ExperimentKind::RcmTree | ExperimentKind::RcmFractal => {
                let law = self.law()?;
                law.validate().map_err(|e| crate::Error::Config(e.to_string()))?;
                if !(law.lower_bound() > 0.0) {
                    bail!(Config, "random conductance experiments need a law bounded away from zero");
                }
                if self.walks.is_empty() {
                    bail!(Config, "walks must not be empty");
                }
                if self.walks.contains(&Walk::Csrw) && !law.has_finite_mean() {
                    match self.tail_index() {
                        Some(a) if a > 0.0 && a < 1.0 => {}
                        _ => bail!(Config, "CSRW scaling needs a tail index in (0, 1) for an infinite-mean law"),
                    }
                }
                if self.experiment == ExperimentKind::RcmTree {
                    let top = crate::network::build_fractal_graph(&scheme, 0)?;
                    if !top.network.is_tree() {
                        bail!(Config, "rcm_tree needs a scheme whose graphs are trees, {} is not", scheme.name);
                    }
                }
            }
            ExperimentKind::Homogenize => {
                self.law()?;
                if self.replicas < 2 {
                    bail!(Config, "homogenize needs at least two samples");
                }
            }
            ExperimentKind::Diagnostics => {}
        }
        if let Some(c) = self.time_constant {
            if !(c > 0.0) || !c.is_finite() {
                bail!(Config, "time_constant must be positive, got {c}");
            }
        }
        Ok(())
    }
}

/// `t_n = constant * base^n * t`: the time at which the level-n walk is
/// compared with the limit at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRule {
    pub walk: String,
    pub formula: String,
    pub base: f64,
    pub constant: f64,
    /// Standard error of an estimated constant.
    pub constant_se: Option<f64>,
    /// The constant is a Monte Carlo estimate rather than a known value.
    pub estimated: bool,
}

impl ScalingRule {
    /// `1 / (a_n b_n^power)` per level, with `a_1`, `b_1` taken from the scheme.
    fn from_exponents(walk: &str, formula: &str, scheme: &FractalScheme, power: f64) -> Result<Self> {
        let Some(a) = scheme.resistance_scale else {
            bail!(Config, "scheme {} has no known resistance scale", scheme.name);
        };
        Ok(Self {
            walk: walk.into(),
            formula: formula.into(),
            base: 1.0 / (a * scheme.mass_scale.powf(power)),
            constant: 1.0,
            constant_se: None,
            estimated: false,
        })
    }

    /// Bouchaud trap model, `t / (a_n b_n^(1/alpha))`.
    pub fn btm(scheme: &FractalScheme, alpha: f64) -> Result<Self> {
        Self::from_exponents("btm", "t / (a_n b_n^(1/alpha))", scheme, 1.0 / alpha)
    }

    /// Variable-speed walk, `t / (a_n b_n)`; on trees the constant is `E[1/w]`.
    pub fn vsrw(scheme: &FractalScheme) -> Result<Self> {
        Self::from_exponents("vsrw", "t / (a_n b_n)", scheme, 1.0)
    }

    /// Constant-speed walk in the heavy-tailed regime, `c t / (a_n b_n^(1/alpha))`.
    pub fn csrw(scheme: &FractalScheme, alpha: f64) -> Result<Self> {
        Self::from_exponents("csrw", "c t / (a_n b_n^(1/alpha))", scheme, 1.0 / alpha)
    }

    /// Liouville Brownian motion, `t / (a_n b_n)`.
    pub fn lbm(scheme: &FractalScheme) -> Result<Self> {
        Self::from_exponents("lbm", "t / (a_n b_n)", scheme, 1.0)
    }

    pub fn with_constant(mut self, constant: f64, se: Option<f64>, estimated: bool) -> Self {
        self.constant = constant;
        self.constant_se = se;
        self.estimated = estimated;
        self
    }

    pub fn time(&self, level: usize, t: f64) -> f64 {
        self.constant * self.base.powi(level as i32) * t
    }
}

/// Numeric table; categorical columns store indices into `categories`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(with = "nan_as_null::rows")]
    pub rows: Vec<Vec<f64>>,
    #[serde(default)]
    pub categories: BTreeMap<String, Vec<String>>,
    /// Column plotted against, if the table should be drawn.
    #[serde(default)]
    pub plot: Option<PlotSpec>,
}

/// `y` against `x`, one line per distinct combination of the `series` columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub x: String,
    pub y: String,
    pub series: Vec<String>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }

    pub fn with_categories(mut self, column: &str, labels: &[&str]) -> Self {
        self.categories.insert(column.into(), labels.iter().map(|l| l.to_string()).collect());
        self
    }

    pub fn with_plot(mut self, x: &str, y: &str, series: &[&str]) -> Self {
        self.plot = Some(PlotSpec { x: x.into(), y: y.into(), series: series.iter().map(|s| s.to_string()).collect() });
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Cell rendered for CSV: categories by label, integers without a fraction.
    pub fn cell(&self, row: usize, col: usize) -> String {
        let v = self.rows[row][col];
        if let Some(labels) = self.categories.get(&self.columns[col]) {
            if let Some(l) = labels.get(v as usize) {
                return l.clone();
            }
        }
        format!("{v:?}")
    }
}

/// Everything an experiment produced, with its full configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub scaling: Vec<ScalingRule>,
    pub tables: Vec<Table>,
    #[serde(with = "nan_as_null::map")]
    pub summary: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, bool>,
    pub notes: Vec<String>,
    /// SHA-256 of the report with this field empty, in git blob framing.
    #[serde(default)]
    pub content_hash: String,
}

impl Report {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            config,
            scaling: Vec::new(),
            tables: Vec::new(),
            summary: BTreeMap::new(),
            checks: BTreeMap::new(),
            notes: Vec::new(),
            content_hash: String::new(),
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn compute_hash(&self) -> Result<String> {
        let mut blank = self.clone();
        blank.content_hash.clear();
        let body = serde_json::to_vec(&blank)?;
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(&body);
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn seal(mut self) -> Result<Self> {
        self.content_hash = self.compute_hash()?;
        Ok(self)
    }

    /// True when every recorded check passed.
    pub fn all_checks_pass(&self) -> bool {
        self.checks.values().all(|c| *c)
    }
}

/// JSON has no NaN; missing values travel as `null`.
mod nan_as_null {
    fn wrap(v: f64) -> Option<f64> {
        v.is_finite().then_some(v)
    }

    pub mod rows {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
            let wrapped: Vec<Vec<Option<f64>>> = rows.iter().map(|r| r.iter().map(|v| super::wrap(*v)).collect()).collect();
            wrapped.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
            let wrapped: Vec<Vec<Option<f64>>> = Vec::deserialize(d)?;
            Ok(wrapped.into_iter().map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect()).collect())
        }
    }

    pub mod map {
        use std::collections::BTreeMap;

        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
            let wrapped: BTreeMap<&String, Option<f64>> = m.iter().map(|(k, v)| (k, super::wrap(*v))).collect();
            wrapped.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
            let wrapped: BTreeMap<String, Option<f64>> = BTreeMap::deserialize(d)?;
            Ok(wrapped.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
        }
    }
}

#[cfg(test)]
mod tests;
