use super::DataError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerKind {
    Standard,
    #[serde(alias = "min_max")]
    Minmax,
    #[default]
    None,
}

impl ScalerKind {
    pub fn name(self) -> &'static str {
        match self {
            ScalerKind::Standard => "standard",
            ScalerKind::Minmax => "minmax",
            ScalerKind::None => "none",
        }
    }
}

impl std::str::FromStr for ScalerKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(ScalerKind::Standard),
            "minmax" | "min_max" => Ok(ScalerKind::Minmax),
            "none" => Ok(ScalerKind::None),
            other => Err(DataError::Config(format!(
                "unknown scaler '{other}' (expected none, standard or minmax)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Population standard deviation.
    fn std(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone)]
enum State {
    Standard(Vec<Welford>),
    MinMax(Vec<(f64, f64)>),
    Identity,
}

/// Feature scaler updated one instance at a time.
#[derive(Debug, Clone)]
pub struct OnlineScaler {
    kind: ScalerKind,
    state: State,
    dim: Option<usize>,
}

impl OnlineScaler {
    pub fn new(kind: ScalerKind) -> Self {
        let state = match kind {
            ScalerKind::Standard => State::Standard(Vec::new()),
            ScalerKind::Minmax => State::MinMax(Vec::new()),
            ScalerKind::None => State::Identity,
        };
        Self { kind, state, dim: None }
    }

    pub fn kind(&self) -> ScalerKind {
        self.kind
    }

    fn check_dim(&mut self, x: &[f64]) -> Result<(), DataError> {
        match self.dim {
            Some(d) if d != x.len() => Err(DataError::DimensionMismatch {
                expected: d,
                found: x.len(),
            }),
            Some(_) => Ok(()),
            None => {
                self.dim = Some(x.len());
                match &mut self.state {
                    State::Standard(s) => s.resize(x.len(), Welford::default()),
                    State::MinMax(s) => s.resize(x.len(), (f64::INFINITY, f64::NEG_INFINITY)),
                    State::Identity => {}
                }
                Ok(())
            }
        }
    }

    /// Update the running state with `x`, then transform `x`.
    pub fn learn_transform(&mut self, x: &[f64]) -> Result<Vec<f64>, DataError> {
        self.learn(x)?;
        Ok(self.transform(x))
    }

    pub fn learn(&mut self, x: &[f64]) -> Result<(), DataError> {
        self.check_dim(x)?;
        match &mut self.state {
            State::Standard(stats) => stats.iter_mut().zip(x).for_each(|(s, &v)| s.push(v)),
            State::MinMax(ranges) => ranges.iter_mut().zip(x).for_each(|(r, &v)| {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }),
            State::Identity => {}
        }
        Ok(())
    }

    /// Transform with the current state; does not learn. Features the scaler
    /// has no statistics for yet map to 0 (standard, minmax).
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        match &self.state {
            State::Identity => x.to_vec(),
            State::Standard(stats) => x
                .iter()
                .enumerate()
                .map(|(j, &v)| match stats.get(j) {
                    Some(s) if s.std() > 0.0 => (v - s.mean) / s.std(),
                    _ => 0.0,
                })
                .collect(),
            State::MinMax(ranges) => x
                .iter()
                .enumerate()
                .map(|(j, &v)| match ranges.get(j) {
                    Some(&(lo, hi)) if hi > lo => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
                    _ => 0.0,
                })
                .collect(),
        }
    }

    /// Inverse of [`transform`](Self::transform) for the standard scaler at the
    /// current state. Features with zero spread map back to their mean.
    pub fn inverse_transform(&self, z: &[f64]) -> Vec<f64> {
        match &self.state {
            State::Standard(stats) => z
                .iter()
                .zip(stats)
                .map(|(&v, s)| v * s.std() + s.mean)
                .collect(),
            State::MinMax(ranges) => z
                .iter()
                .zip(ranges)
                .map(|(&v, &(lo, hi))| if hi > lo { lo + v * (hi - lo) } else { lo })
                .collect(),
            State::Identity => z.to_vec(),
        }
    }

    /// Bytes held by the running state.
    pub fn memory_bytes(&self) -> usize {
        let per_feature = match self.kind {
            ScalerKind::Standard => 24,
            ScalerKind::Minmax => 16,
            ScalerKind::None => 0,
        };
        32 + per_feature * self.dim.unwrap_or(0)
    }
}
