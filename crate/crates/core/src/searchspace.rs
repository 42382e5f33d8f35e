//! Typed hyperparameter definitions and the mapping between tuner
//! coordinates and concrete model configurations.
//!
//! Every hyperparameter has an *internal* coordinate, which is what the tuner
//! moves, and an *effective* value, which is what the model receives.
//! Integers round half-to-even, `transform_power_2_int` maps `x` to
//! `2^round(x)`, and factors round to an index into the selected levels.

use crate::dataspace::ScalerKind;
use crate::learners::{
    HoeffdingTree, HoeffdingTreeParams, LeafPrediction, LogisticModel, OnlineClassifier, Scaled,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("{name}: {value} is outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("{name}: unknown level '{level}'")]
    UnknownLevel { name: String, level: String },
    #[error("unknown hyperparameter '{0}'")]
    UnknownKey(String),
    #[error("missing hyperparameter '{0}'")]
    MissingKey(String),
    #[error("expected {expected} coordinates, got {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("{name}: value {value} cannot be represented")]
    NotRepresentable { name: String, value: String },
    #[error("invalid search space: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    HoeffdingTree,
    LogisticRegression,
}

impl ModelId {
    pub const ALL: [ModelId; 2] = [ModelId::HoeffdingTree, ModelId::LogisticRegression];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::HoeffdingTree => "hoeffding_tree",
            ModelId::LogisticRegression => "logistic_regression",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = SpaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| SpaceError::UnknownModel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Int,
    Float,
    Factor,
}

impl ParamKind {
    pub fn name(self) -> &'static str {
        match self {
            ParamKind::Int => "int",
            ParamKind::Float => "float",
            ParamKind::Factor => "factor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Transform {
    #[default]
    #[serde(rename = "none", alias = "None")]
    None,
    #[serde(rename = "transform_power_2_int")]
    Power2Int,
}

/// How the tuner spreads a numeric dimension over its unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

impl Scale {
    fn is_linear(&self) -> bool {
        *self == Scale::Linear
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Level(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Level(s) => f.write_str(s),
        }
    }
}

/// One tunable hyperparameter. `default`, `lower` and `upper` are internal
/// coordinates; for factors the bounds index into `selected_levels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParamDef {
    pub name: String,
    pub kind: ParamKind,
    pub default: ParamValue,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub transform: Transform,
    #[serde(default, skip_serializing_if = "Scale::is_linear")]
    pub scale: Scale,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selected_levels: Vec<String>,
}

impl HyperParamDef {
    fn int(name: &str, default: i64, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Int,
            default: ParamValue::Int(default),
            lower,
            upper,
            transform: Transform::None,
            scale: Scale::Linear,
            levels: Vec::new(),
            selected_levels: Vec::new(),
        }
    }

    fn float(name: &str, default: f64, lower: f64, upper: f64) -> Self {
        Self {
            kind: ParamKind::Float,
            default: ParamValue::Float(default),
            ..Self::int(name, 0, lower, upper)
        }
    }

    fn factor(name: &str, default: &str, levels: &[&str]) -> Self {
        let levels: Vec<String> = levels.iter().map(|s| s.to_string()).collect();
        Self {
            kind: ParamKind::Factor,
            default: ParamValue::Level(default.into()),
            upper: (levels.len() - 1) as f64,
            selected_levels: levels.clone(),
            levels,
            ..Self::int(name, 0, 0.0, 0.0)
        }
    }

    /// Default value in internal coordinates.
    pub fn default_internal(&self) -> Result<f64, SpaceError> {
        match (&self.default, self.kind) {
            (ParamValue::Level(level), ParamKind::Factor) => self.level_index(level),
            (ParamValue::Int(v), _) => Ok(*v as f64),
            (ParamValue::Float(v), _) => Ok(*v),
            (other, _) => Err(SpaceError::NotRepresentable {
                name: self.name.clone(),
                value: other.to_string(),
            }),
        }
    }

    fn level_index(&self, level: &str) -> Result<f64, SpaceError> {
        self.selected_levels
            .iter()
            .position(|l| l == level)
            .map(|i| i as f64)
            .ok_or_else(|| SpaceError::UnknownLevel {
                name: self.name.clone(),
                level: level.to_string(),
            })
    }

    pub fn span(&self) -> f64 {
        self.upper - self.lower
    }

    /// Internal coordinate to effective value. Out-of-range factor indices clamp.
    pub fn apply_transform(&self, x: f64) -> ParamValue {
        match (self.kind, self.transform) {
            (ParamKind::Factor, _) => {
                let last = self.selected_levels.len().saturating_sub(1) as f64;
                let idx = x.round_ties_even().clamp(0.0, last) as usize;
                ParamValue::Level(self.selected_levels[idx].clone())
            }
            (ParamKind::Int, Transform::Power2Int) => {
                ParamValue::Int(1i64 << (x.round_ties_even().clamp(0.0, 62.0) as u32))
            }
            (ParamKind::Int, Transform::None) => ParamValue::Int(x.round_ties_even() as i64),
            (ParamKind::Float, _) => ParamValue::Float(x),
        }
    }

    /// Effective value back to its internal coordinate.
    pub fn invert(&self, v: &ParamValue) -> Result<f64, SpaceError> {
        let unrepresentable = || SpaceError::NotRepresentable {
            name: self.name.clone(),
            value: v.to_string(),
        };
        let x = match (self.kind, self.transform, v) {
            (ParamKind::Factor, _, ParamValue::Level(level)) => self.level_index(level)?,
            (ParamKind::Int, Transform::Power2Int, ParamValue::Int(p)) => {
                if *p <= 0 || (*p as u64).count_ones() != 1 {
                    return Err(unrepresentable());
                }
                p.trailing_zeros() as f64
            }
            (ParamKind::Int, Transform::None, ParamValue::Int(i)) => *i as f64,
            (ParamKind::Float, _, ParamValue::Float(f)) => *f,
            (ParamKind::Float, _, ParamValue::Int(i)) => *i as f64,
            _ => return Err(unrepresentable()),
        };
        self.check_bounds(x)?;
        Ok(x)
    }

    fn check_bounds(&self, x: f64) -> Result<(), SpaceError> {
        let slack = 1e-9 * self.span().abs().max(1.0);
        if x.is_nan() || x < self.lower - slack || x > self.upper + slack {
            return Err(SpaceError::OutOfBounds {
                name: self.name.clone(),
                value: x,
                lower: self.lower,
                upper: self.upper,
            });
        }
        Ok(())
    }

    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let n = &self.name;
        if !(self.lower.is_finite() && self.upper.is_finite()) || self.lower > self.upper {
            v.push(format!("{n}: bounds [{}, {}] are not an interval", self.lower, self.upper));
        }
        match self.kind {
            ParamKind::Factor => {
                if self.selected_levels.is_empty() {
                    v.push(format!("{n}: select at least one level"));
                }
                for l in &self.selected_levels {
                    if !self.levels.contains(l) {
                        v.push(format!("{n}: selected level '{l}' is not one of {:?}", self.levels));
                    }
                }
                let mut uniq = self.selected_levels.clone();
                uniq.sort();
                uniq.dedup();
                if uniq.len() != self.selected_levels.len() {
                    v.push(format!("{n}: selected levels contain duplicates"));
                }
                let expected_upper = self.selected_levels.len().saturating_sub(1) as f64;
                if self.lower != 0.0 || self.upper != expected_upper {
                    v.push(format!(
                        "{n}: factor bounds must be [0, {expected_upper}] for the selected levels"
                    ));
                }
                if self.transform != Transform::None {
                    v.push(format!("{n}: factors take no transform"));
                }
            }
            ParamKind::Int | ParamKind::Float => {
                if self.transform == Transform::Power2Int
                    && (self.kind != ParamKind::Int || self.lower < 0.0 || self.upper > 62.0)
                {
                    v.push(format!("{n}: transform_power_2_int needs an int within [0, 62]"));
                }
                if self.scale == Scale::Log && self.lower <= 0.0 {
                    v.push(format!("{n}: log scale needs a positive lower bound"));
                }
            }
        }
        match self.default_internal() {
            Ok(d) if self.check_bounds(d).is_err() => v.push(format!(
                "{n}: default {} lies outside [{}, {}]",
                self.default, self.lower, self.upper
            )),
            Ok(_) => {}
            Err(e) => v.push(e.to_string()),
        }
        v
    }
}

/// Internal coordinates, one per hyperparameter, in search-space order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfigVector(pub Vec<f64>);

impl ConfigVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Effective hyperparameter values by name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelConfig(pub BTreeMap<String, ParamValue>);

impl ModelConfig {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub model_id: ModelId,
    pub params: Vec<HyperParamDef>,
}

impl SearchSpace {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn param(&self, name: &str) -> Option<&HyperParamDef> {
        self.params.iter().find(|p| p.name == name)
    }

    fn param_mut(&mut self, name: &str) -> Result<&mut HyperParamDef, SpaceError> {
        self.params
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| SpaceError::UnknownKey(name.to_string()))
    }

    /// Narrow or widen the bounds of a numeric hyperparameter.
    pub fn set_bounds(&mut self, name: &str, lower: f64, upper: f64) -> Result<(), SpaceError> {
        let p = self.param_mut(name)?;
        if p.kind == ParamKind::Factor {
            return Err(SpaceError::Invalid(vec![format!(
                "{name}: factors are restricted by selecting levels, not bounds"
            )]));
        }
        p.lower = lower;
        p.upper = upper;
        Ok(())
    }

    /// Restrict a factor to a subset of its levels (kept in level order).
    pub fn select_levels(&mut self, name: &str, selected: &[&str]) -> Result<(), SpaceError> {
        let p = self.param_mut(name)?;
        if p.kind != ParamKind::Factor {
            return Err(SpaceError::Invalid(vec![format!("{name} is not a factor")]));
        }
        for s in selected {
            if !p.levels.iter().any(|l| l == s) {
                return Err(SpaceError::UnknownLevel {
                    name: name.to_string(),
                    level: s.to_string(),
                });
            }
        }
        p.selected_levels = p
            .levels
            .iter()
            .filter(|l| selected.contains(&l.as_str()))
            .cloned()
            .collect();
        p.lower = 0.0;
        p.upper = p.selected_levels.len().saturating_sub(1) as f64;
        Ok(())
    }

    /// Every problem with this space, including edits to the fixed parts of
    /// the model's registry entry (names, kinds, defaults, transforms, level sets).
    pub fn violations(&self) -> Vec<String> {
        let builtin = builtin_space(self.model_id);
        let mut v = Vec::new();
        let names: Vec<&str> = self.names().collect();
        let expected: Vec<&str> = builtin.names().collect();
        if names != expected {
            v.push(format!(
                "hyperparameters of {} must be exactly {:?} in this order, got {:?}",
                self.model_id, expected, names
            ));
            return v;
        }
        for (p, b) in self.params.iter().zip(&builtin.params) {
            if p.kind != b.kind {
                v.push(format!("{}: kind is fixed to {}", p.name, b.kind.name()));
            }
            if p.default != b.default {
                v.push(format!("{}: default is fixed to {}", p.name, b.default));
            }
            if p.transform != b.transform || p.scale != b.scale {
                v.push(format!("{}: transform is fixed by the model registry", p.name));
            }
            if p.levels != b.levels {
                v.push(format!("{}: level set is fixed to {:?}", p.name, b.levels));
            }
            v.extend(p.violations());
        }
        v
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(SpaceError::Invalid(v))
        }
    }

    pub fn default_vector(&self) -> Result<ConfigVector, SpaceError> {
        self.params
            .iter()
            .map(HyperParamDef::default_internal)
            .collect::<Result<_, _>>()
            .map(ConfigVector)
    }

    pub fn decode(&self, v: &ConfigVector) -> Result<ModelConfig, SpaceError> {
        if v.len() != self.len() {
            return Err(SpaceError::WrongLength {
                expected: self.len(),
                found: v.len(),
            });
        }
        let mut out = BTreeMap::new();
        for (p, &x) in self.params.iter().zip(v.as_slice()) {
            p.check_bounds(x)?;
            out.insert(p.name.clone(), p.apply_transform(x));
        }
        Ok(ModelConfig(out))
    }

    pub fn encode(&self, c: &ModelConfig) -> Result<ConfigVector, SpaceError> {
        if let Some(unknown) = c.0.keys().find(|k| self.param(k).is_none()) {
            return Err(SpaceError::UnknownKey(unknown.clone()));
        }
        self.params
            .iter()
            .map(|p| {
                let value = c
                    .get(&p.name)
                    .ok_or_else(|| SpaceError::MissingKey(p.name.clone()))?;
                p.invert(value)
            })
            .collect::<Result<_, _>>()
            .map(ConfigVector)
    }

    /// Round a vector onto the grid of distinct configurations
    /// (`encode(decode(v))`).
    pub fn snap(&self, v: &ConfigVector) -> Result<ConfigVector, SpaceError> {
        self.encode(&self.decode(v)?)
    }
}

pub fn apply_transform(def: &HyperParamDef, x: f64) -> ParamValue {
    def.apply_transform(x)
}

/// The tunable hyperparameters of each model, with defaults, bounds and
/// transforms fixed here.
pub fn builtin_space(model_id: ModelId) -> SearchSpace {
    let params = match model_id {
        ModelId::HoeffdingTree => {
            let mut max_depth = HyperParamDef::int("max_depth", 20, 2.0, 20.0);
            max_depth.transform = Transform::Power2Int;
            vec![
                HyperParamDef::int("grace_period", 200, 10.0, 1000.0),
                max_depth,
                HyperParamDef::float("delta", 1e-7, 1e-8, 1e-6),
                HyperParamDef::float("tau", 0.05, 0.01, 0.1),
                HyperParamDef::factor("leaf_prediction", "nba", &["mc", "nb", "nba"]),
                HyperParamDef::int("nb_threshold", 0, 0.0, 10.0),
                HyperParamDef::factor("splitter", "GaussianSplitter", &["GaussianSplitter"]),
                HyperParamDef::factor("binary_split", "0", &["0", "1"]),
            ]
        }
        ModelId::LogisticRegression => {
            let mut lr = HyperParamDef::float("lr", 0.01, 1e-4, 1.0);
            lr.scale = Scale::Log;
            vec![lr, HyperParamDef::float("l2", 0.0, 0.0, 1.0)]
        }
    };
    SearchSpace { model_id, params }
}

pub fn builtin_space_by_name(model_id: &str) -> Result<SearchSpace, SpaceError> {
    Ok(builtin_space(model_id.parse()?))
}

fn take_int(c: &ModelConfig, name: &str) -> Result<i64, SpaceError> {
    match c.get(name) {
        Some(ParamValue::Int(v)) => Ok(*v),
        Some(other) => Err(SpaceError::NotRepresentable {
            name: name.into(),
            value: other.to_string(),
        }),
        None => Err(SpaceError::MissingKey(name.into())),
    }
}

fn take_float(c: &ModelConfig, name: &str) -> Result<f64, SpaceError> {
    match c.get(name) {
        Some(ParamValue::Float(v)) => Ok(*v),
        Some(ParamValue::Int(v)) => Ok(*v as f64),
        Some(other) => Err(SpaceError::NotRepresentable {
            name: name.into(),
            value: other.to_string(),
        }),
        None => Err(SpaceError::MissingKey(name.into())),
    }
}

fn take_level<'a>(c: &'a ModelConfig, name: &str) -> Result<&'a str, SpaceError> {
    match c.get(name) {
        Some(ParamValue::Level(v)) => Ok(v),
        Some(other) => Err(SpaceError::NotRepresentable {
            name: name.into(),
            value: other.to_string(),
        }),
        None => Err(SpaceError::MissingKey(name.into())),
    }
}

fn non_negative(name: &str, v: i64) -> Result<usize, SpaceError> {
    usize::try_from(v).map_err(|_| SpaceError::NotRepresentable {
        name: name.into(),
        value: v.to_string(),
    })
}

/// Construct a fresh model (behind the chosen scaler) from a configuration.
/// Keys must match the model's registry exactly.
pub fn build_model(
    model_id: ModelId,
    config: &ModelConfig,
    scaler: ScalerKind,
) -> Result<Box<dyn OnlineClassifier>, SpaceError> {
    let space = builtin_space(model_id);
    if let Some(unknown) = config.0.keys().find(|k| space.param(k).is_none()) {
        return Err(SpaceError::UnknownKey(unknown.clone()));
    }
    match model_id {
        ModelId::HoeffdingTree => {
            let leaf_prediction = match take_level(config, "leaf_prediction")? {
                "mc" => LeafPrediction::Mc,
                "nb" => LeafPrediction::Nb,
                "nba" => LeafPrediction::Nba,
                other => {
                    return Err(SpaceError::UnknownLevel {
                        name: "leaf_prediction".into(),
                        level: other.into(),
                    })
                }
            };
            let splitter = take_level(config, "splitter")?;
            if splitter != "GaussianSplitter" {
                return Err(SpaceError::UnknownLevel {
                    name: "splitter".into(),
                    level: splitter.into(),
                });
            }
            let binary_split = match take_level(config, "binary_split")? {
                "0" => false,
                "1" => true,
                other => {
                    return Err(SpaceError::UnknownLevel {
                        name: "binary_split".into(),
                        level: other.into(),
                    })
                }
            };
            let params = HoeffdingTreeParams {
                grace_period: non_negative("grace_period", take_int(config, "grace_period")?)?,
                max_depth: non_negative("max_depth", take_int(config, "max_depth")?)?,
                delta: take_float(config, "delta")?,
                tau: take_float(config, "tau")?,
                leaf_prediction,
                nb_threshold: non_negative("nb_threshold", take_int(config, "nb_threshold")?)?,
                binary_split,
            };
            Ok(Box::new(Scaled::new(scaler, HoeffdingTree::new(params))))
        }
        ModelId::LogisticRegression => {
            let model = LogisticModel::new(take_float(config, "lr")?, take_float(config, "l2")?);
            Ok(Box::new(Scaled::new(scaler, model)))
        }
    }
}
