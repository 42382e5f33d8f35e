//! Structured post-run artifacts computed from a finished (or running)
//! tuner state: progress, default-vs-tuned table, importance, surrogate
//! slices, parallel coordinates and the confusion matrix.

use crate::metrics::ConfusionCounts;
use crate::searchspace::{ParamKind, SearchSpace, Transform};
use crate::tuner::{argmin_trial, importance, ImportanceEntry, Phase, TunerState, UnitMap};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const COMPARE_HEADER: &str =
    "|name    |type   |default |low | up |tuned |transf |importance|stars|";
const COMPARE_RULE: &str = "|--------|-------|--------|----|----|------|-------|----------|-----|";
pub const DEFAULT_RESOLUTION: usize = 50;
pub const MAX_RESOLUTION: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("the run has no successful trial yet")]
    NoSuccessfulTrial,
    #[error("no surrogate model was fitted")]
    NoSurrogate,
    #[error("contour needs two different dimensions, got {0} twice")]
    SameDimension(usize),
    #[error("dimension {0} does not exist")]
    NoSuchDimension(usize),
    #[error("dimension '{0}' has a fixed value and is not modelled")]
    FixedDimension(String),
    #[error("the best trial has no stored evaluation")]
    NoEvaluation,
    #[error("resolution must be between 2 and {MAX_RESOLUTION}")]
    Resolution,
    #[error("contour needs the two dimensions i and j")]
    MissingAxes,
}

/// The analysis artifacts that can be requested for an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    Progress,
    Compare,
    Importance,
    Contour,
    Parallel,
    Confusion,
}

impl AnalysisKind {
    pub const ALL: [AnalysisKind; 6] = [
        AnalysisKind::Progress,
        AnalysisKind::Compare,
        AnalysisKind::Importance,
        AnalysisKind::Contour,
        AnalysisKind::Parallel,
        AnalysisKind::Confusion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnalysisKind::Progress => "progress",
            AnalysisKind::Compare => "compare",
            AnalysisKind::Importance => "importance",
            AnalysisKind::Contour => "contour",
            AnalysisKind::Parallel => "parallel",
            AnalysisKind::Confusion => "confusion",
        }
    }

    /// Kinds that only make sense once the run has ended.
    pub fn needs_finished_run(self) -> bool {
        matches!(
            self,
            AnalysisKind::Compare | AnalysisKind::Contour | AnalysisKind::Confusion
        )
    }
}

impl fmt::Display for AnalysisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AnalysisKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AnalysisKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown analysis kind '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressPoint {
    pub index: usize,
    pub objective: Option<f64>,
    pub best_so_far: Option<f64>,
    pub phase: Phase,
}

/// Running minimum over the trials; failed trials carry the previous best.
pub fn progress_series(state: &TunerState) -> Result<Vec<ProgressPoint>, AnalysisError> {
    if state.trials.iter().all(|t| t.objective.is_none()) {
        return Err(AnalysisError::NoSuccessfulTrial);
    }
    let mut best: Option<f64> = None;
    Ok(state
        .trials
        .iter()
        .map(|t| {
            if let Some(o) = t.objective {
                best = Some(best.map_or(o, |b| b.min(o)));
            }
            ProgressPoint {
                index: t.index,
                objective: t.objective,
                best_so_far: best,
                phase: t.phase,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ParamKind,
    pub default: f64,
    pub lower: f64,
    pub upper: f64,
    pub tuned: f64,
    pub transform: Transform,
    pub importance: Option<f64>,
    pub stars: String,
}

/// Default against tuned values, all in internal coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
}

fn num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e6 {
        format!("{x:.1}")
    } else if (1e-3..1e6).contains(&x.abs()) {
        let s = format!("{x:.4}");
        s.trim_end_matches('0').to_string()
    } else {
        format!("{x:.2e}")
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{COMPARE_HEADER}")?;
        writeln!(f, "{COMPARE_RULE}")?;
        for r in &self.rows {
            let transf = match r.transform {
                Transform::Power2Int => "pow_2",
                Transform::None => "None",
            };
            let importance = r.importance.map_or(String::new(), |v| format!("{v:.2}"));
            // Console names are cut to seven characters; the rows keep them whole.
            let name: String = r.name.chars().take(7).collect();
            writeln!(
                f,
                "|{:<8}|{:<7}|{:>7} |{:<4}|{:<4}|{:>6}| {:<6}|{:>10}| {:<4}|",
                name,
                r.kind.name(),
                num(r.default),
                num(r.lower),
                num(r.upper),
                num(r.tuned),
                transf,
                importance,
                r.stars
            )?;
        }
        Ok(())
    }
}

pub fn compare_default_tuned(
    state: &TunerState,
    space: &SearchSpace,
) -> Result<Comparison, AnalysisError> {
    let best = argmin_trial(&state.trials).ok_or(AnalysisError::NoSuccessfulTrial)?;
    let tuned = &state.trials[best].config_vector;
    let imp: Vec<ImportanceEntry> = match &state.surrogate {
        Some(m) => importance(m, space),
        None => Vec::new(),
    };
    let rows = space
        .params
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let entry = imp.get(k);
            CompareRow {
                name: p.name.clone(),
                kind: p.kind,
                default: p.default_internal().unwrap_or(f64::NAN),
                lower: p.lower,
                upper: p.upper,
                tuned: tuned.0[k],
                transform: p.transform,
                importance: entry.and_then(|e| e.importance),
                stars: entry.map_or(String::new(), |e| e.stars.clone()),
            }
        })
        .collect();
    Ok(Comparison { rows })
}

pub fn importance_report(
    state: &TunerState,
    space: &SearchSpace,
) -> Result<Vec<ImportanceEntry>, AnalysisError> {
    let m = state.surrogate.as_ref().ok_or(AnalysisError::NoSurrogate)?;
    Ok(importance(m, space))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub i: usize,
    pub j: usize,
    pub name_i: String,
    pub name_j: String,
    pub resolution: usize,
    /// Axis values in internal coordinates.
    pub axis_i: Vec<f64>,
    pub axis_j: Vec<f64>,
    /// Unit coordinates of the modelled dimensions at which the rest is pinned.
    pub pinned: Vec<f64>,
    /// `values[a][b]` is the surrogate mean at `axis_i[a]`, `axis_j[b]`.
    pub values: Vec<Vec<f64>>,
}

/// Surrogate mean over a grid of two hyperparameters (indices into the
/// search space), the others pinned at the best configuration.
pub fn surrogate_contour(
    state: &TunerState,
    space: &SearchSpace,
    i: usize,
    j: usize,
    resolution: usize,
) -> Result<ContourGrid, AnalysisError> {
    if i == j {
        return Err(AnalysisError::SameDimension(i));
    }
    if !(2..=MAX_RESOLUTION).contains(&resolution) {
        return Err(AnalysisError::Resolution);
    }
    for k in [i, j] {
        if k >= space.len() {
            return Err(AnalysisError::NoSuchDimension(k));
        }
    }
    let m = state.surrogate.as_ref().ok_or(AnalysisError::NoSurrogate)?;
    let map = UnitMap::new(space);
    let pos = |k: usize| {
        map.active()
            .iter()
            .position(|&a| a == k)
            .ok_or_else(|| AnalysisError::FixedDimension(space.params[k].name.clone()))
    };
    let (pi, pj) = (pos(i)?, pos(j)?);
    let best = argmin_trial(&state.trials).ok_or(AnalysisError::NoSuccessfulTrial)?;
    let pinned = map.to_unit(&state.trials[best].config_vector);
    let grid: Vec<f64> = (0..resolution)
        .map(|a| a as f64 / (resolution - 1) as f64)
        .collect();
    let values = grid
        .iter()
        .map(|&ua| {
            grid.iter()
                .map(|&ub| {
                    let mut x = pinned.clone();
                    x[pi] = ua;
                    x[pj] = ub;
                    m.predict(&x).0
                })
                .collect()
        })
        .collect();
    Ok(ContourGrid {
        i,
        j,
        name_i: space.params[i].name.clone(),
        name_j: space.params[j].name.clone(),
        resolution,
        axis_i: grid.iter().map(|&u| map.value_of(i, u)).collect(),
        axis_j: grid.iter().map(|&u| map.value_of(j, u)).collect(),
        pinned,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelRow {
    pub index: usize,
    pub coords: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelData {
    pub names: Vec<String>,
    pub rows: Vec<ParallelRow>,
}

/// Successful trials with every coordinate scaled to `[0, 1]`.
pub fn parallel_coordinates_data(state: &TunerState, space: &SearchSpace) -> ParallelData {
    let map = UnitMap::new(space);
    ParallelData {
        names: space.names().map(String::from).collect(),
        rows: state
            .trials
            .iter()
            .filter_map(|t| {
                t.objective.map(|objective| ParallelRow {
                    index: t.index,
                    coords: map.full_unit(&t.config_vector),
                    objective,
                })
            })
            .collect(),
    }
}

pub fn confusion_for_best(state: &TunerState) -> Result<ConfusionCounts, AnalysisError> {
    let best = argmin_trial(&state.trials).ok_or(AnalysisError::NoSuccessfulTrial)?;
    state.trials[best]
        .eval
        .as_ref()
        .map(|e| e.confusion)
        .ok_or(AnalysisError::NoEvaluation)
}

/// The comparison with its rendered console table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    pub header: String,
    pub table: String,
    pub rows: Vec<CompareRow>,
}

impl From<Comparison> for CompareTable {
    fn from(c: Comparison) -> Self {
        Self {
            header: COMPARE_HEADER.to_string(),
            table: c.to_string(),
            rows: c.rows,
        }
    }
}

/// Grid request for [`AnalysisKind::Contour`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContourRequest {
    pub i: usize,
    pub j: usize,
    pub resolution: usize,
}

/// One computed analysis artifact, serialized as the bare structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Artifact {
    Progress(Vec<ProgressPoint>),
    Compare(CompareTable),
    Importance(Vec<ImportanceEntry>),
    Contour(ContourGrid),
    Parallel(ParallelData),
    Confusion(ConfusionCounts),
}

/// Compute the artifact of `kind`. Progress on a state without any
/// successful trial is an empty series.
pub fn artifact(
    kind: AnalysisKind,
    state: &TunerState,
    space: &SearchSpace,
    contour: Option<ContourRequest>,
) -> Result<Artifact, AnalysisError> {
    Ok(match kind {
        AnalysisKind::Progress => Artifact::Progress(progress_series(state).unwrap_or_default()),
        AnalysisKind::Compare => Artifact::Compare(compare_default_tuned(state, space)?.into()),
        AnalysisKind::Importance => Artifact::Importance(importance_report(state, space)?),
        AnalysisKind::Contour => {
            let c = contour.ok_or(AnalysisError::MissingAxes)?;
            Artifact::Contour(surrogate_contour(state, space, c.i, c.j, c.resolution)?)
        }
        AnalysisKind::Parallel => Artifact::Parallel(parallel_coordinates_data(state, space)),
        AnalysisKind::Confusion => Artifact::Confusion(confusion_for_best(state)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::confusion;
    use crate::searchspace::{builtin_space, ConfigVector, ModelConfig, ModelId};
    use crate::tuner::{
        run_tuning_loop, Kriging, StopReason, TrialOutcome, TrialRecord, TunerControl,
    };
    use std::sync::atomic::AtomicBool;

    fn trial(index: usize, objective: Option<f64>, phase: Phase) -> TrialRecord {
        let space = builtin_space(ModelId::HoeffdingTree);
        let v = space.default_vector().unwrap();
        TrialRecord {
            index,
            model_config: space.decode(&v).unwrap(),
            config_vector: v,
            objective,
            error: None,
            eval: None,
            phase,
            wall_clock: chrono::Utc::now(),
            elapsed_s: 0.0,
        }
    }

    fn state(objectives: &[Option<f64>], init: usize) -> TunerState {
        TunerState {
            trials: objectives
                .iter()
                .enumerate()
                .map(|(i, &o)| {
                    trial(i, o, if i < init { Phase::InitialDesign } else { Phase::Surrogate })
                })
                .collect(),
            surrogate: None,
            best: None,
            stop_reason: StopReason::FunEvals,
            elapsed_s: 0.0,
        }
    }

    /// Linear in grace_period and tau, so contours must be monotone.
    fn tuned_state(fun_evals: usize, init_size: usize) -> (TunerState, SearchSpace) {
        let space = builtin_space(ModelId::HoeffdingTree);
        let mut obj = |c: &ModelConfig| {
            let g = match c.get("grace_period") {
                Some(crate::searchspace::ParamValue::Int(g)) => *g as f64,
                _ => unreachable!(),
            };
            Ok(TrialOutcome { objective: g / 1000.0, eval: None })
        };
        let control = TunerControl {
            max_time_minutes: 5.0,
            fun_evals,
            init_size,
            noise: false,
            seed: 3,
            prefix: "a".into(),
        };
        let s = run_tuning_loop(&space, &control, &mut obj, &mut |_, _| {}, &AtomicBool::new(false)).unwrap();
        (s, space)
    }

    #[test]
    fn running_minimum() {
        let s = state(&[Some(3.0), Some(2.0), Some(4.0), Some(1.0)], 2);
        let p = progress_series(&s).unwrap();
        let best: Vec<_> = p.iter().map(|x| x.best_so_far.unwrap()).collect();
        assert_eq!(best, vec![3.0, 2.0, 2.0, 1.0]);
        assert_eq!(p[1].phase, Phase::InitialDesign);
        assert_eq!(p[2].phase, Phase::Surrogate);
        assert_eq!(progress_series(&state(&[Some(5.0)], 1)).unwrap().len(), 1);
        assert_eq!(
            progress_series(&state(&[None], 1)).unwrap_err(),
            AnalysisError::NoSuccessfulTrial
        );
        let p = progress_series(&state(&[None, Some(2.0), None], 3)).unwrap();
        assert_eq!(p[0].best_so_far, None);
        assert_eq!(p[2].best_so_far, Some(2.0));
    }

    #[test]
    fn kind_names_parse_back() {
        for k in AnalysisKind::ALL {
            assert_eq!(k.name().parse::<AnalysisKind>(), Ok(k));
        }
        assert!("histogram".parse::<AnalysisKind>().is_err());
        let gated: Vec<_> = AnalysisKind::ALL.into_iter().filter(|k| k.needs_finished_run()).collect();
        assert_eq!(gated, [AnalysisKind::Compare, AnalysisKind::Contour, AnalysisKind::Confusion]);
    }

    #[test]
    fn compare_single_trial_is_default() {
        let s = state(&[Some(1.0)], 1);
        let space = builtin_space(ModelId::HoeffdingTree);
        let c = compare_default_tuned(&s, &space).unwrap();
        assert!(c.rows.iter().all(|r| r.tuned == r.default));
        assert!(c.rows.iter().all(|r| r.importance.is_none()));
        let text = c.to_string();
        assert_eq!(text.lines().next().unwrap(), COMPARE_HEADER);
        assert!(text.contains("|max_dep |int    |   20.0 |2.0 |20.0|  20.0| pow_2 |"), "{text}");
    }

    #[test]
    fn compare_passes_importance_through() {
        let (s, space) = tuned_state(12, 6);
        let c = compare_default_tuned(&s, &space).unwrap();
        let imp = importance_report(&s, &space).unwrap();
        for (row, e) in c.rows.iter().zip(&imp) {
            assert_eq!(row.importance, e.importance);
            assert_eq!(row.stars, e.stars);
        }
        let best = s.best_trial().unwrap();
        assert_eq!(c.rows[0].tuned, best.config_vector.0[0]);
    }

    #[test]
    fn contour_checks_and_shape() {
        let (s, space) = tuned_state(12, 6);
        assert_eq!(
            surrogate_contour(&s, &space, 0, 0, 10).unwrap_err(),
            AnalysisError::SameDimension(0)
        );
        assert!(matches!(
            surrogate_contour(&s, &space, 0, 6, 10),
            Err(AnalysisError::FixedDimension(_))
        ));
        let g = surrogate_contour(&s, &space, 0, 3, 2).unwrap();
        assert_eq!(g.values.len() * g.values[0].len(), 4);
        assert_eq!(g.axis_i, vec![10.0, 1000.0]);
        let g = surrogate_contour(&s, &space, 0, 3, DEFAULT_RESOLUTION).unwrap();
        assert!(g.values.iter().flatten().all(|v| v.is_finite()));
        // Linear response in grace_period: monotone along axis i.
        for b in 0..g.resolution {
            for a in 1..g.resolution {
                assert!(g.values[a][b] >= g.values[a - 1][b] - 1e-6, "{a} {b}");
            }
        }
        assert_eq!(surrogate_contour(&s, &space, 0, 3, DEFAULT_RESOLUTION).unwrap(), g);
    }

    #[test]
    fn contour_hits_best_point() {
        let space = builtin_space(ModelId::LogisticRegression);
        let mut s = state(&[], 0);
        let pts = [(0.0, 0.0, 1.0), (1.0, 0.0, 2.0), (0.0, 1.0, 0.5), (1.0, 1.0, 3.0)];
        let map = UnitMap::new(&space);
        for (k, (a, b, y)) in pts.iter().enumerate() {
            let v = map.from_unit(&[*a, *b]);
            s.trials.push(TrialRecord {
                index: k,
                model_config: space.decode(&v).unwrap(),
                config_vector: v,
                objective: Some(*y),
                ..trial(k, None, Phase::InitialDesign)
            });
        }
        let x: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0, p.1]).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.2).collect();
        s.surrogate = Some(Kriging::fit(&x, &y, false, 0).unwrap());
        let g = surrogate_contour(&s, &space, 0, 1, 2).unwrap();
        assert!((g.values[0][1] - 0.5).abs() <= 1e-6 * 1.5);
    }

    #[test]
    fn parallel_rows_round_trip() {
        let (mut s, space) = tuned_state(10, 5);
        s.trials[2].objective = None;
        let p = parallel_coordinates_data(&s, &space);
        assert_eq!(p.rows.len(), 9);
        let map = UnitMap::new(&space);
        for row in &p.rows {
            assert!(row.coords.iter().all(|c| (0.0..=1.0).contains(c)));
            let active: Vec<f64> = map.active().iter().map(|&k| row.coords[k]).collect();
            let back: ConfigVector = map.from_unit(&active);
            for (a, b) in back.0.iter().zip(&s.trials[row.index].config_vector.0) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn confusion_of_best_trial() {
        use crate::dataspace::generate_sea;
        use crate::dataspace::SeaConfig;
        use crate::evaluation::{eval_oml_horizon, HorizonEvalConfig, WeightVector};
        use crate::learners::{HoeffdingTree, HoeffdingTreeParams};
        use crate::metrics::MetricId;

        let d = generate_sea(&SeaConfig::single_drift(800, 0.0, 1)).unwrap();
        let (train, test) = (d.slice(0, 300), d.slice(300, 800));
        let eval = eval_oml_horizon(
            &mut HoeffdingTree::new(HoeffdingTreeParams::default()),
            &train,
            &test,
            &HorizonEvalConfig::new(50, MetricId::AccuracyScore),
            &WeightVector::default(),
        )
        .unwrap();
        let mut s = state(&[Some(1.0), Some(eval.objective)], 2);
        s.trials[1].eval = Some(eval.clone());
        let c = confusion_for_best(&s).unwrap();
        assert_eq!(c.total(), 500);
        let mut recount = ConfusionCounts::default();
        for w in &eval.windows {
            recount.merge(&confusion(&w.truths, &w.predictions));
        }
        assert_eq!(c, recount);
        s.trials[1].eval = None;
        assert_eq!(confusion_for_best(&s).unwrap_err(), AnalysisError::NoEvaluation);
    }
}
