//! Rolling-horizon evaluation of an online classifier.
//!
//! The model first learns the grace rows of the training split without being
//! scored. The test split is then consumed in windows of `horizon` rows: the
//! model predicts every row of a window, is scored on it, and only then
//! learns the window.

use crate::dataspace::Dataset;
use crate::learners::{ModelError, OnlineClassifier};
use crate::metrics::{compute_metric, label_of, ConfusionCounts, MetricDirection, MetricError, MetricId};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::time::Instant;
use thiserror::Error;

const MIB: f64 = 1024.0 * 1024.0;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("the test split is empty")]
    EmptyTest,
    #[error("grace period of {grace} rows exceeds the {available} training rows")]
    GraceTooLong { grace: usize, available: usize },
    #[error("train has {train} features but test has {test}")]
    FeatureMismatch { train: usize, test: usize },
    #[error("{metric} is undefined on every window")]
    AllWindowsUndefined { metric: MetricId },
    #[error("weights and objective terms must be finite")]
    NonFinite,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizonEvalConfig {
    pub horizon: usize,
    /// Training rows learned before scoring starts; `None` means `horizon`.
    #[serde(
        default,
        serialize_with = "ser_grace",
        deserialize_with = "de_grace"
    )]
    pub oml_grace_period: Option<usize>,
    pub metric: MetricId,
}

fn ser_grace<S: Serializer>(g: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
    match g {
        Some(n) => s.serialize_u64(*n as u64),
        None => s.serialize_str("none"),
    }
}

fn de_grace<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Rows(usize),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Rows(n)) => Ok(Some(n)),
        Some(Raw::Text(t)) if t.eq_ignore_ascii_case("none") || t.is_empty() => Ok(None),
        Some(Raw::Text(t)) => t
            .parse()
            .map(Some)
            .map_err(|_| serde::de::Error::custom(format!("oml_grace_period '{t}' is not a count or \"none\""))),
    }
}

impl HorizonEvalConfig {
    pub fn new(horizon: usize, metric: MetricId) -> Self {
        Self {
            horizon,
            oml_grace_period: None,
            metric,
        }
    }

    pub fn grace_rows(&self) -> usize {
        self.oml_grace_period.unwrap_or(self.horizon)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.horizon == 0 {
            return Err(EvalError::ZeroHorizon);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w_y: f64,
    pub w_time: f64,
    pub w_mem: f64,
}

impl Default for WeightVector {
    fn default() -> Self {
        Self {
            w_y: 1.0,
            w_time: 0.0,
            w_mem: 0.0,
        }
    }
}

impl WeightVector {
    pub fn new(w_y: f64, w_time: f64, w_mem: f64) -> Self {
        Self { w_y, w_time, w_mem }
    }

    pub fn is_finite(&self) -> bool {
        self.w_y.is_finite() && self.w_time.is_finite() && self.w_mem.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub index: usize,
    pub metric_value: Option<f64>,
    /// Cumulative seconds spent inside learn/predict calls, grace phase included.
    pub elapsed_s: f64,
    pub memory_mb: f64,
    /// True labels of the window, stored as a `0`/`1` string.
    #[serde(with = "bits")]
    pub truths: Vec<u8>,
    /// Thresholded predictions of the window, stored like `truths`.
    #[serde(with = "bits")]
    pub predictions: Vec<u8>,
}

mod bits {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect::<String>())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        String::deserialize(d)?
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(serde::de::Error::custom(format!("'{other}' is not a label"))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub metric: MetricId,
    pub grace_rows: usize,
    pub windows: Vec<WindowRecord>,
    pub metric_mean: f64,
    pub total_time_s: f64,
    pub final_memory_mb: f64,
    pub peak_memory_mb: f64,
    pub objective: f64,
    pub confusion: ConfusionCounts,
}

impl EvalResult {
    /// Objective recomputed from the stored components.
    pub fn recompute_objective(&self, w: &WeightVector) -> f64 {
        weighted_objective(
            self.metric_mean,
            self.metric.direction(),
            self.total_time_s,
            self.final_memory_mb,
            w,
        )
    }
}

/// Scalar to minimize. Maximize-direction metrics enter with a minus sign.
pub fn weighted_objective(
    metric_mean: f64,
    direction: MetricDirection,
    total_time_s: f64,
    final_memory_mb: f64,
    w: &WeightVector,
) -> f64 {
    let y_term = match direction {
        MetricDirection::Minimize => metric_mean,
        MetricDirection::Maximize => -metric_mean,
    };
    w.w_y * y_term + w.w_time * total_time_s + w.w_mem * final_memory_mb
}

fn mib(model: &dyn OnlineClassifier) -> f64 {
    model.memory_bytes() as f64 / MIB
}

pub fn eval_oml_horizon(
    model: &mut dyn OnlineClassifier,
    train: &Dataset,
    test: &Dataset,
    cfg: &HorizonEvalConfig,
    weights: &WeightVector,
) -> Result<EvalResult, EvalError> {
    cfg.validate()?;
    if !weights.is_finite() {
        return Err(EvalError::NonFinite);
    }
    if test.is_empty() {
        return Err(EvalError::EmptyTest);
    }
    if train.n_features() != test.n_features() {
        return Err(EvalError::FeatureMismatch {
            train: train.n_features(),
            test: test.n_features(),
        });
    }
    let grace = cfg.grace_rows();
    if grace > train.len() {
        return Err(EvalError::GraceTooLong {
            grace,
            available: train.len(),
        });
    }

    let mut busy = 0.0f64;
    let mut peak = 0.0f64;

    let start = Instant::now();
    for i in 0..grace {
        model.learn_one(train.features(i), train.label(i))?;
    }
    busy += start.elapsed().as_secs_f64();
    peak = peak.max(mib(model));

    let mut windows = Vec::with_capacity(test.len().div_ceil(cfg.horizon));
    let mut confusion = ConfusionCounts::default();
    let mut scores = Vec::with_capacity(cfg.horizon);
    for (index, lo) in (0..test.len()).step_by(cfg.horizon).enumerate() {
        let hi = (lo + cfg.horizon).min(test.len());
        scores.clear();

        let start = Instant::now();
        for i in lo..hi {
            scores.push(model.predict_proba_one(test.features(i)));
        }
        for i in lo..hi {
            model.learn_one(test.features(i), test.label(i))?;
        }
        busy += start.elapsed().as_secs_f64();

        let truths = &test.labels()[lo..hi];
        let predictions: Vec<u8> = scores.iter().map(|&s| label_of(s)).collect();
        for (&t, &p) in truths.iter().zip(&predictions) {
            confusion.add(t, p);
        }
        let memory_mb = mib(model);
        peak = peak.max(memory_mb);
        windows.push(WindowRecord {
            index,
            metric_value: compute_metric(cfg.metric, truths, &scores)?,
            elapsed_s: busy,
            memory_mb,
            truths: truths.to_vec(),
            predictions,
        });
    }

    let defined: Vec<f64> = windows.iter().filter_map(|w| w.metric_value).collect();
    if defined.is_empty() {
        return Err(EvalError::AllWindowsUndefined { metric: cfg.metric });
    }
    let metric_mean = defined.iter().sum::<f64>() / defined.len() as f64;
    let final_memory_mb = windows.last().map_or(0.0, |w| w.memory_mb);
    let objective = weighted_objective(
        metric_mean,
        cfg.metric.direction(),
        busy,
        final_memory_mb,
        weights,
    );
    if !objective.is_finite() {
        return Err(EvalError::NonFinite);
    }
    Ok(EvalResult {
        metric: cfg.metric,
        grace_rows: grace,
        windows,
        metric_mean,
        total_time_s: busy,
        final_memory_mb,
        peak_memory_mb: peak,
        objective,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataspace::{generate_sea, DataSchema, Provenance, SeaConfig};
    use crate::learners::{HoeffdingTree, HoeffdingTreeParams};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Always predicts class 1 and counts the rows it learned.
    #[derive(Default)]
    struct ConstOne {
        learned: usize,
    }

    impl OnlineClassifier for ConstOne {
        fn learn_one(&mut self, _x: &[f64], _y: u8) -> Result<(), ModelError> {
            self.learned += 1;
            Ok(())
        }
        fn predict_proba_one(&self, _x: &[f64]) -> f64 {
            1.0
        }
        fn memory_bytes(&self) -> usize {
            64
        }
    }

    fn data(labels: &[u8]) -> Dataset {
        let schema = DataSchema::new(vec!["x".into()], "y".into()).unwrap();
        let rows = (0..labels.len()).map(|i| vec![i as f64]).collect();
        Dataset::new(
            schema,
            rows,
            labels.to_vec(),
            Provenance::Generator { id: "test".into() },
        )
        .unwrap()
    }

    fn masked(r: &EvalResult) -> String {
        let mut v = serde_json::to_value(r).unwrap();
        v["total_time_s"] = 0.into();
        v["objective"] = 0.into();
        for w in v["windows"].as_array_mut().unwrap() {
            w["elapsed_s"] = 0.into();
        }
        v.to_string()
    }

    #[test]
    fn constant_stub_trace() {
        let train = data(&[0, 1, 0, 1]);
        let test = data(&[1, 1, 0, 1]);
        let cfg = HorizonEvalConfig::new(2, MetricId::AccuracyScore);
        let mut m = ConstOne::default();
        let r = eval_oml_horizon(&mut m, &train, &test, &cfg, &WeightVector::default()).unwrap();
        let per: Vec<_> = r.windows.iter().map(|w| w.metric_value.unwrap()).collect();
        assert_eq!(per, vec![1.0, 0.5]);
        assert_eq!(r.metric_mean, 0.75);
        assert_eq!(r.objective, -0.75);
        assert_eq!(r.confusion, ConfusionCounts { tp: 3, fp: 1, tn: 0, fn_: 0 });
        assert_eq!(m.learned, 2 + 4);
        assert_eq!(r.windows[1].truths, vec![0, 1]);
        assert_eq!(r.windows[1].predictions, vec![1, 1]);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["windows"][0]["truths"], "11");
        let back: EvalResult = serde_json::from_value(json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn grace_none_means_horizon() {
        let train = data(&[0; 60]);
        let test = data(&[1; 10]);
        let cfg = HorizonEvalConfig::new(25, MetricId::AccuracyScore);
        let mut m = ConstOne::default();
        let r = eval_oml_horizon(&mut m, &train, &test, &cfg, &WeightVector::default()).unwrap();
        assert_eq!(r.grace_rows, 25);
        assert_eq!(m.learned, 25 + 10);
    }

    #[test]
    fn grace_errors() {
        let train = data(&[0; 3]);
        let test = data(&[1; 10]);
        let cfg = HorizonEvalConfig::new(5, MetricId::AccuracyScore);
        let err = eval_oml_horizon(&mut ConstOne::default(), &train, &test, &cfg, &WeightVector::default());
        assert_eq!(err.unwrap_err(), EvalError::GraceTooLong { grace: 5, available: 3 });
        let cfg = HorizonEvalConfig { oml_grace_period: Some(0), ..cfg };
        assert!(eval_oml_horizon(&mut ConstOne::default(), &train, &data(&[]), &cfg, &WeightVector::default()).is_err());
        let cfg = HorizonEvalConfig { horizon: 0, ..cfg };
        assert_eq!(
            eval_oml_horizon(&mut ConstOne::default(), &train, &test, &cfg, &WeightVector::default()).unwrap_err(),
            EvalError::ZeroHorizon
        );
    }

    #[test]
    fn single_window_equals_whole_metric() {
        let labels = [1, 0, 0, 1, 1, 0, 1];
        let test = data(&labels);
        let cfg = HorizonEvalConfig {
            horizon: labels.len(),
            oml_grace_period: Some(0),
            metric: MetricId::F1Score,
        };
        let r = eval_oml_horizon(&mut ConstOne::default(), &data(&[]), &test, &cfg, &WeightVector::default()).unwrap();
        assert_eq!(r.windows.len(), 1);
        let whole = compute_metric(MetricId::F1Score, &labels, &[1.0; 7]).unwrap().unwrap();
        assert_eq!(r.metric_mean, whole);
    }

    #[test]
    fn undefined_windows_are_skipped_or_fail() {
        let test = data(&[1, 1, 0, 1]);
        let cfg = HorizonEvalConfig {
            horizon: 2,
            oml_grace_period: Some(0),
            metric: MetricId::RocAucScore,
        };
        let r = eval_oml_horizon(&mut ConstOne::default(), &data(&[]), &test, &cfg, &WeightVector::default()).unwrap();
        assert_eq!(r.windows[0].metric_value, None);
        assert_eq!(r.metric_mean, 0.5);
        let err = eval_oml_horizon(&mut ConstOne::default(), &data(&[]), &data(&[1, 1]), &cfg, &WeightVector::default());
        assert!(matches!(err, Err(EvalError::AllWindowsUndefined { .. })));
    }

    #[test]
    fn weight_examples() {
        let max = MetricDirection::Maximize;
        assert_eq!(weighted_objective(0.75, max, 9.0, 9.0, &WeightVector::new(1.0, 0.0, 0.0)), -0.75);
        assert_eq!(weighted_objective(0.75, max, 2.5, 9.0, &WeightVector::new(0.0, 1.0, 0.0)), 2.5);
        assert_eq!(weighted_objective(0.75, max, 2.5, 3.2, &WeightVector::new(0.0, 0.0, 1.0)), 3.2);
        assert_eq!(
            weighted_objective(0.2, MetricDirection::Minimize, 0.0, 0.0, &WeightVector::default()),
            0.2
        );
    }

    #[test]
    fn tree_run_is_deterministic_and_consistent() {
        let d = generate_sea(&SeaConfig::single_drift(1500, 0.1, 3)).unwrap();
        let train = d.slice(0, 500);
        let test = d.slice(500, 1500);
        let cfg = HorizonEvalConfig::new(100, MetricId::AccuracyScore);
        let w = WeightVector::new(1.0, 0.5, 2.0);
        let run = || {
            let mut m = HoeffdingTree::new(HoeffdingTreeParams::default());
            eval_oml_horizon(&mut m, &train, &test, &cfg, &w).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.windows.len(), 10);
        assert_eq!(masked(&a), masked(&b));
        assert_eq!(a.objective, a.recompute_objective(&w));
        assert_eq!(a.confusion.total(), 1000);
        assert!(a.windows.windows(2).all(|p| p[0].elapsed_s <= p[1].elapsed_s));
        assert!(a.windows.iter().all(|w| w.memory_mb > 0.0));
        assert!(a.peak_memory_mb >= a.final_memory_mb);
        assert!(a.metric_mean > 0.7);
    }

    #[test]
    fn grace_serde_forms() {
        for (text, expect) in [
            (r#"{"horizon":5,"metric":"accuracy_score"}"#, None),
            (r#"{"horizon":5,"oml_grace_period":null,"metric":"accuracy_score"}"#, None),
            (r#"{"horizon":5,"oml_grace_period":"None","metric":"accuracy_score"}"#, None),
            (r#"{"horizon":5,"oml_grace_period":"none","metric":"accuracy_score"}"#, None),
            (r#"{"horizon":5,"oml_grace_period":7,"metric":"accuracy_score"}"#, Some(7)),
        ] {
            let c: HorizonEvalConfig = serde_json::from_str(text).unwrap();
            assert_eq!(c.oml_grace_period, expect, "{text}");
            let back: HorizonEvalConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
            assert_eq!(back, c);
        }
        assert!(serde_json::from_str::<HorizonEvalConfig>(
            r#"{"horizon":5,"oml_grace_period":"soon","metric":"accuracy_score"}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn window_count_is_ceiling(n in 1usize..200, h in 1usize..50) {
            let labels: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
            let cfg = HorizonEvalConfig { horizon: h, oml_grace_period: Some(0), metric: MetricId::AccuracyScore };
            let r = eval_oml_horizon(&mut ConstOne::default(), &data(&[]), &data(&labels), &cfg, &WeightVector::default()).unwrap();
            prop_assert_eq!(r.windows.len(), n.div_ceil(h));
            prop_assert_eq!(r.confusion.total() as usize, n);
        }

        #[test]
        fn accuracy_objective_preserves_argmax(accs in proptest::collection::vec(0.0f64..=1.0, 1..20)) {
            let w = WeightVector::default();
            let obj: Vec<f64> = accs.iter().map(|&a| weighted_objective(a, MetricDirection::Maximize, 1.0, 1.0, &w)).collect();
            let amin = obj.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            let best = accs.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert_eq!(accs[amin], best);
        }

        #[test]
        fn objective_is_linear(m in -1.0f64..1.0, t in 0.0f64..10.0, mem in 0.0f64..10.0,
                               a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0) {
            let o = weighted_objective(m, MetricDirection::Minimize, t, mem, &WeightVector::new(a, b, c));
            assert_abs_diff_eq!(o, a * m + b * t + c * mem, epsilon = 1e-12);
        }
    }
}
