//! Surrogate-model-based tuning: a Latin hypercube initial design that
//! always starts with the default configuration, then Kriging fits and
//! expected-improvement proposals until a budget runs out.

mod acquisition;
mod kriging;
mod lhs;

pub use acquisition::{ei, expected_improvement, propose_unit, random_unit};
pub use kriging::{
    merge_duplicates, Kriging, KrigingError, KrigingParams, FIXED_NUGGET, LOG_NUGGET_BOUNDS,
    THETA_BOUNDS,
};
pub use lhs::latin_hypercube;

use crate::evaluation::EvalResult;
use crate::searchspace::{ConfigVector, ModelConfig, Scale, SearchSpace, SpaceError};
use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TunerError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("invalid tuner control: {}", .0.join("; "))]
    InvalidControl(Vec<String>),
    #[error("every initial-design trial failed; first error: {0}")]
    AllInitialFailed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerControl {
    pub max_time_minutes: f64,
    pub fun_evals: usize,
    pub init_size: usize,
    #[serde(default)]
    pub noise: bool,
    #[serde(default)]
    pub seed: u64,
    pub prefix: String,
}

impl Default for TunerControl {
    fn default() -> Self {
        Self {
            max_time_minutes: 1.0,
            fun_evals: 30,
            init_size: 5,
            noise: false,
            seed: 123,
            prefix: "experiment".into(),
        }
    }
}

/// Names usable as file stems on every common filesystem.
pub fn is_safe_prefix(p: &str) -> bool {
    !p.is_empty()
        && p.len() <= 128
        && !p.starts_with('.')
        && p.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
}

impl TunerControl {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.max_time_minutes.is_finite() && self.max_time_minutes > 0.0) {
            v.push(format!("max_time_minutes must be > 0, got {}", self.max_time_minutes));
        }
        if self.init_size < 2 {
            v.push(format!("init_size must be at least 2, got {}", self.init_size));
        }
        if self.fun_evals < 1 {
            v.push("fun_evals must be at least 1".into());
        }
        if !is_safe_prefix(&self.prefix) {
            v.push(format!(
                "prefix '{}' must be non-empty and use only letters, digits, '_', '-' or '.'",
                self.prefix
            ));
        }
        v
    }

    /// Warnings that do not block a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.init_size > self.fun_evals {
            w.push(format!(
                "init_size {} exceeds fun_evals {}; the whole initial design is still evaluated",
                self.init_size, self.fun_evals
            ));
        }
        w
    }

    pub fn validate(&self) -> Result<(), TunerError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(TunerError::InvalidControl(v))
        }
    }
}

/// Maps internal coordinates of the dimensions with a non-empty range onto
/// the unit cube. Dimensions with `lower == upper` stay at `lower`.
#[derive(Debug, Clone)]
pub struct UnitMap {
    bounds: Vec<(f64, f64, Scale)>,
    active: Vec<usize>,
}

impl UnitMap {
    pub fn new(space: &SearchSpace) -> Self {
        let bounds: Vec<_> = space.params.iter().map(|p| (p.lower, p.upper, p.scale)).collect();
        let active = bounds
            .iter()
            .enumerate()
            .filter(|(_, (lo, hi, _))| hi > lo)
            .map(|(i, _)| i)
            .collect();
        Self { bounds, active }
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    fn warp(scale: Scale, v: f64) -> f64 {
        match scale {
            Scale::Linear => v,
            Scale::Log => v.ln(),
        }
    }

    /// Position of coordinate `x` of dimension `k` in `[0, 1]` (0 if fixed).
    pub fn unit_of(&self, k: usize, x: f64) -> f64 {
        let (lo, hi, scale) = self.bounds[k];
        if hi <= lo {
            return 0.0;
        }
        let (lo, hi, x) = (Self::warp(scale, lo), Self::warp(scale, hi), Self::warp(scale, x));
        ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    pub fn value_of(&self, k: usize, u: f64) -> f64 {
        let (lo, hi, scale) = self.bounds[k];
        if hi <= lo {
            return lo;
        }
        let u = u.clamp(0.0, 1.0);
        let v = match scale {
            Scale::Linear => lo + u * (hi - lo),
            Scale::Log => (lo.ln() + u * (hi.ln() - lo.ln())).exp(),
        };
        v.clamp(lo, hi)
    }

    pub fn to_unit(&self, v: &ConfigVector) -> Vec<f64> {
        self.active.iter().map(|&k| self.unit_of(k, v.0[k])).collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> ConfigVector {
        let mut out: Vec<f64> = self.bounds.iter().map(|b| b.0).collect();
        for (&k, &x) in self.active.iter().zip(u) {
            out[k] = self.value_of(k, x);
        }
        ConfigVector(out)
    }

    /// Every dimension in `[0, 1]`, fixed ones at 0.
    pub fn full_unit(&self, v: &ConfigVector) -> Vec<f64> {
        (0..self.bounds.len()).map(|k| self.unit_of(k, v.0[k])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    InitialDesign,
    Surrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub config_vector: ConfigVector,
    pub model_config: ModelConfig,
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalResult>,
    pub phase: Phase,
    pub wall_clock: DateTime<Utc>,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressEvent {
    pub trial_index: usize,
    pub phase: Phase,
    pub objective: Option<f64>,
    pub best_so_far: Option<f64>,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FunEvals,
    MaxTime,
    Stopped,
}

/// Outcome of evaluating one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub objective: f64,
    pub eval: Option<EvalResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TunerState {
    pub trials: Vec<TrialRecord>,
    /// Surrogate fitted on all successful trials, in active unit coordinates.
    pub surrogate: Option<Kriging>,
    pub best: Option<usize>,
    pub stop_reason: StopReason,
    pub elapsed_s: f64,
}

impl TunerState {
    pub fn best_trial(&self) -> Option<&TrialRecord> {
        self.best.and_then(|i| self.trials.get(i))
    }

    pub fn default_trial(&self) -> Option<&TrialRecord> {
        self.trials.first()
    }
}

/// Index of the lowest objective; the earliest wins ties.
pub fn argmin_trial(trials: &[TrialRecord]) -> Option<usize> {
    trials
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.objective.map(|o| (i, o)))
        .fold(None, |acc: Option<(usize, f64)>, (i, o)| match acc {
            Some((_, b)) if b <= o => acc,
            _ => Some((i, o)),
        })
        .map(|(i, _)| i)
}

fn surrogate_data(map: &UnitMap, trials: &[TrialRecord]) -> (Vec<Vec<f64>>, Vec<f64>) {
    trials
        .iter()
        .filter_map(|t| t.objective.map(|o| (map.to_unit(&t.config_vector), o)))
        .unzip()
}

/// Fit the surrogate for a finished set of trials.
pub fn fit_surrogate(
    space: &SearchSpace,
    trials: &[TrialRecord],
    noise: bool,
    seed: u64,
) -> Result<Kriging, KrigingError> {
    let (x, y) = surrogate_data(&UnitMap::new(space), trials);
    Kriging::fit(&x, &y, noise, seed)
}

/// Evaluate the initial design, then propose and evaluate until `fun_evals`
/// trials exist, `max_time_minutes` has passed, or `stop` is raised.
pub fn run_tuning_loop(
    space: &SearchSpace,
    control: &TunerControl,
    objective: &mut dyn FnMut(&ModelConfig) -> Result<TrialOutcome, String>,
    on_trial: &mut dyn FnMut(&ProgressEvent, &TrialRecord),
    stop: &AtomicBool,
) -> Result<TunerState, TunerError> {
    space.validate()?;
    control.validate()?;
    let start = Instant::now();
    let map = UnitMap::new(space);
    let d = map.active().len();
    let mut rng = ChaCha8Rng::seed_from_u64(control.seed);
    let snap = |u: &[f64]| -> Vec<f64> {
        match space.snap(&map.from_unit(u)) {
            Ok(v) => map.to_unit(&v),
            Err(_) => u.to_vec(),
        }
    };

    let mut initial = vec![space.default_vector()?];
    for u in latin_hypercube(control.init_size - 1, d, &mut rng) {
        initial.push(map.from_unit(&snap(&u)));
    }

    let mut trials: Vec<TrialRecord> = Vec::new();
    let mut best: Option<f64> = None;
    let mut evaluate = |v: ConfigVector, phase: Phase, trials: &mut Vec<TrialRecord>| -> Result<(), TunerError> {
        let config = space.decode(&v)?;
        let (objective_value, eval, error) = match objective(&config) {
            Ok(o) if o.objective.is_finite() => (Some(o.objective), o.eval, None),
            Ok(o) => (None, o.eval, Some(format!("non-finite objective {}", o.objective))),
            Err(e) => (None, None, Some(e)),
        };
        if let Some(o) = objective_value {
            best = Some(best.map_or(o, |b: f64| b.min(o)));
        }
        let record = TrialRecord {
            index: trials.len(),
            config_vector: v,
            model_config: config,
            objective: objective_value,
            error,
            eval,
            phase,
            wall_clock: Utc::now(),
            elapsed_s: start.elapsed().as_secs_f64(),
        };
        let event = ProgressEvent {
            trial_index: record.index,
            phase,
            objective: objective_value,
            best_so_far: best,
            elapsed_s: record.elapsed_s,
        };
        on_trial(&event, &record);
        trials.push(record);
        Ok(())
    };

    let mut stop_reason = StopReason::FunEvals;
    for v in initial {
        if stop.load(Ordering::Relaxed) {
            stop_reason = StopReason::Stopped;
            break;
        }
        evaluate(v, Phase::InitialDesign, &mut trials)?;
    }
    if stop_reason != StopReason::Stopped && trials.iter().all(|t| t.objective.is_none()) {
        let first = trials.first().and_then(|t| t.error.clone()).unwrap_or_default();
        return Err(TunerError::AllInitialFailed(first));
    }

    let budget = control.max_time_minutes * 60.0;
    while stop_reason != StopReason::Stopped && trials.len() < control.fun_evals {
        if stop.load(Ordering::Relaxed) {
            stop_reason = StopReason::Stopped;
            break;
        }
        if start.elapsed().as_secs_f64() > budget {
            stop_reason = StopReason::MaxTime;
            break;
        }
        let (x, y) = surrogate_data(&map, &trials);
        let design: Vec<Vec<f64>> = trials.iter().map(|t| map.to_unit(&t.config_vector)).collect();
        let fit_seed: u64 = rng.random();
        let next = match Kriging::fit(&x, &y, control.noise, fit_seed) {
            Ok(m) => {
                let f_best = if control.noise {
                    m.min_design_mean()
                } else {
                    m.responses().iter().copied().fold(f64::INFINITY, f64::min)
                };
                propose_unit(&m, &design, f_best, &snap, &mut rng)
            }
            Err(e) => {
                log::warn!("surrogate fit failed ({e}); proposing a random configuration");
                random_unit(d, &design, &snap, &mut rng)
            }
        };
        evaluate(map.from_unit(&next), Phase::Surrogate, &mut trials)?;
    }

    let fit_seed: u64 = rng.random();
    let surrogate = fit_surrogate(space, &trials, control.noise, fit_seed).ok();
    Ok(TunerState {
        best: argmin_trial(&trials),
        trials,
        surrogate,
        stop_reason,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub name: String,
    /// `None` for dimensions the surrogate does not see (fixed range).
    pub importance: Option<f64>,
    pub stars: String,
}

/// `100 * 10^theta_k / max_j 10^theta_j`, computed in log space.
pub fn importance_values(theta: &[f64]) -> Vec<f64> {
    let max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    theta.iter().map(|t| 100.0 * 10f64.powf(t - max)).collect()
}

pub fn stars(importance: f64) -> &'static str {
    if importance < 0.1 {
        ""
    } else if importance < 1.0 {
        "."
    } else if importance < 50.0 {
        "*"
    } else if importance < 95.0 {
        "**"
    } else {
        "***"
    }
}

pub fn importance(m: &Kriging, space: &SearchSpace) -> Vec<ImportanceEntry> {
    let map = UnitMap::new(space);
    let values = importance_values(m.theta());
    space
        .params
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let v = map.active().iter().position(|&a| a == k).map(|i| values[i]);
            ImportanceEntry {
                name: p.name.clone(),
                importance: v,
                stars: v.map_or("", stars).to_string(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::searchspace::{builtin_space, ModelId, ParamValue};
    use proptest::prelude::*;

    fn quadratic(c: &ModelConfig) -> Result<TrialOutcome, String> {
        let g = match c.get("grace_period") {
            Some(ParamValue::Int(g)) => *g as f64,
            _ => unreachable!(),
        };
        let tau = match c.get("tau") {
            Some(ParamValue::Float(t)) => *t,
            _ => unreachable!(),
        };
        Ok(TrialOutcome {
            objective: ((g - 420.0) / 1000.0).powi(2) + (tau - 0.03).powi(2) * 10.0,
            eval: None,
        })
    }

    fn run(control: &TunerControl) -> (TunerState, Vec<ProgressEvent>) {
        let space = builtin_space(ModelId::HoeffdingTree);
        let mut events = Vec::new();
        let state = run_tuning_loop(
            &space,
            control,
            &mut quadratic,
            &mut |e, _| events.push(e.clone()),
            &AtomicBool::new(false),
        )
        .unwrap();
        (state, events)
    }

    fn control(fun_evals: usize, init_size: usize) -> TunerControl {
        TunerControl {
            max_time_minutes: 10.0,
            fun_evals,
            init_size,
            noise: false,
            seed: 7,
            prefix: "t".into(),
        }
    }

    #[test]
    fn init_only_boundary() {
        let (s, events) = run(&control(8, 8));
        assert_eq!(s.trials.len(), 8);
        assert!(s.trials.iter().all(|t| t.phase == Phase::InitialDesign));
        assert_eq!(events.len(), 8);
        assert_eq!(s.stop_reason, StopReason::FunEvals);
    }

    #[test]
    fn default_first_and_best_monotone() {
        let (s, events) = run(&control(20, 6));
        let space = builtin_space(ModelId::HoeffdingTree);
        assert_eq!(s.trials[0].config_vector, space.default_vector().unwrap());
        assert_eq!(s.trials.iter().filter(|t| t.phase == Phase::Surrogate).count(), 14);
        let best: Vec<f64> = events.iter().map(|e| e.best_so_far.unwrap()).collect();
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        let b = s.best_trial().unwrap().objective.unwrap();
        assert_eq!(b, *best.last().unwrap());
        assert!(b <= s.trials[0].objective.unwrap());
        assert!(s.surrogate.is_some());
    }

    #[test]
    fn surrogate_improves_on_initial_design() {
        let (s, _) = run(&control(25, 8));
        let init_best = s.trials[..8].iter().filter_map(|t| t.objective).fold(f64::INFINITY, f64::min);
        let overall = s.best_trial().unwrap().objective.unwrap();
        assert!(overall < init_best, "{overall} vs {init_best}");
    }

    #[test]
    fn deterministic_sequence() {
        let (a, _) = run(&control(14, 5));
        let (b, _) = run(&control(14, 5));
        let seq = |s: &TunerState| s.trials.iter().map(|t| t.config_vector.clone()).collect::<Vec<_>>();
        assert_eq!(seq(&a), seq(&b));
    }

    #[test]
    fn noisy_mode_runs() {
        let mut c = control(12, 5);
        c.noise = true;
        let (s, _) = run(&c);
        assert_eq!(s.trials.len(), 12);
        assert!(s.surrogate.unwrap().nugget() >= 1e-8);
    }

    #[test]
    fn initial_design_ignores_time_budget() {
        let mut c = control(20, 4);
        c.max_time_minutes = 1e-9;
        let (s, _) = run(&c);
        assert_eq!(s.trials.len(), 4);
        assert_eq!(s.stop_reason, StopReason::MaxTime);
    }

    #[test]
    fn stop_flag_halts() {
        let space = builtin_space(ModelId::HoeffdingTree);
        let stop = AtomicBool::new(false);
        let s = run_tuning_loop(
            &space,
            &control(20, 4),
            &mut quadratic,
            &mut |e, _| {
                if e.trial_index == 1 {
                    stop.store(true, Ordering::Relaxed);
                }
            },
            &stop,
        )
        .unwrap();
        assert_eq!(s.trials.len(), 2);
        assert_eq!(s.stop_reason, StopReason::Stopped);
    }

    #[test]
    fn failed_trials_are_recorded() {
        let space = builtin_space(ModelId::HoeffdingTree);
        let mut calls = 0;
        let mut obj = |c: &ModelConfig| {
            calls += 1;
            if calls % 3 == 0 {
                Err("boom".to_string())
            } else {
                quadratic(c)
            }
        };
        let s = run_tuning_loop(&space, &control(10, 4), &mut obj, &mut |_, _| {}, &AtomicBool::new(false)).unwrap();
        assert_eq!(s.trials.len(), 10);
        let failed: Vec<_> = s.trials.iter().filter(|t| t.objective.is_none()).collect();
        assert_eq!(failed.len(), 3);
        assert!(failed.iter().all(|t| t.error.as_deref() == Some("boom")));

        let mut always = |_: &ModelConfig| Err::<TrialOutcome, _>("nope".to_string());
        let r = run_tuning_loop(&space, &control(10, 3), &mut always, &mut |_, _| {}, &AtomicBool::new(false));
        assert!(matches!(r, Err(TunerError::AllInitialFailed(_))));
    }

    #[test]
    fn control_validation() {
        let mut c = control(10, 1);
        c.prefix = "../x".into();
        c.max_time_minutes = 0.0;
        assert_eq!(c.violations().len(), 3);
        assert_eq!(control(3, 5).warnings().len(), 1);
    }

    #[test]
    fn unit_map_round_trip() {
        let mut space = builtin_space(ModelId::LogisticRegression);
        space.set_bounds("l2", 0.0, 0.0).unwrap();
        let map = UnitMap::new(&space);
        assert_eq!(map.active(), &[0]);
        let v = ConfigVector(vec![0.01, 0.0]);
        let u = map.to_unit(&v);
        assert!((u[0] - 0.5).abs() < 1e-12);
        assert!((map.from_unit(&u).0[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn stars_table() {
        let got: Vec<_> = [100.0, 13.64, 10.17, 0.21, 0.04].iter().map(|&v| stars(v)).collect();
        assert_eq!(got, vec!["***", "*", "*", ".", ""]);
        assert_eq!(importance_values(&[0.3, 0.3, 0.3]), vec![100.0; 3]);
        assert_eq!(importance_values(&[-1.7]), vec![100.0]);
    }

    #[test]
    fn importance_names_fixed_dims() {
        let space = builtin_space(ModelId::HoeffdingTree);
        let m = Kriging::with_params(KrigingParams {
            x: vec![vec![0.0; 7], vec![1.0; 7]],
            y: vec![0.0, 1.0],
            theta: vec![1.0, 0.0, -1.0, -2.0, -3.0, 0.5, 1.0],
            nugget: FIXED_NUGGET,
            noise: false,
        })
        .unwrap();
        let imp = importance(&m, &space);
        let splitter = imp.iter().find(|e| e.name == "splitter").unwrap();
        assert_eq!(splitter.importance, None);
        assert_eq!(imp[0].importance, Some(100.0));
        assert_eq!(imp[1].importance, Some(10.0));
    }

    proptest! {
        #[test]
        fn importance_is_permutation_equivariant(theta in proptest::collection::vec(-3.0f64..2.0, 1..8), rot in 0usize..8) {
            let v = importance_values(&theta);
            let k = rot % theta.len();
            let mut t2 = theta.clone();
            t2.rotate_left(k);
            let mut v2 = v.clone();
            v2.rotate_left(k);
            prop_assert_eq!(importance_values(&t2), v2);
            prop_assert_eq!(v.iter().copied().fold(f64::MIN, f64::max), 100.0);
            prop_assert!(v.iter().all(|x| *x > 0.0 && *x <= 100.0));
        }
    }
}
