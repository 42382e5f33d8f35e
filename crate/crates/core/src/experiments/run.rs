use super::{
    AnalysisBundle, ArtifactStore, ExperimentError, ExperimentResults, ExperimentSpec,
    ExperimentStatus, FieldError, RunState,
};
use crate::analysis::{
    compare_default_tuned, confusion_for_best, importance_report, parallel_coordinates_data,
    progress_series,
};
use crate::dataspace::{split_train_test, DataRegistry, Dataset};
use crate::evaluation::eval_oml_horizon;
use crate::searchspace::{build_model, ModelConfig};
use crate::tuner::{run_tuning_loop, ProgressEvent, StopReason, TrialOutcome, TrialRecord, TunerState};
use chrono::Utc;
use std::sync::atomic::AtomicBool;

fn bundle(state: &TunerState, spec: &ExperimentSpec) -> AnalysisBundle {
    AnalysisBundle {
        progress: progress_series(state).unwrap_or_default(),
        compare: compare_default_tuned(state, &spec.space).ok(),
        importance: importance_report(state, &spec.space).ok(),
        parallel: parallel_coordinates_data(state, &spec.space),
        confusion: confusion_for_best(state).ok(),
    }
}

/// Validate the spec against the data and produce the train/test split.
pub(crate) fn prepare(
    spec: &ExperimentSpec,
    data: &DataRegistry,
) -> Result<(Dataset, Dataset), ExperimentError> {
    spec.validate_with(data)?;
    let dataset = data.resolve(&spec.data.source)?;
    let (train, test) = split_train_test(&dataset, &spec.data.split())?;
    let grace = spec.eval.grace_rows();
    if grace > train.len() {
        return Err(ExperimentError::Invalid(vec![FieldError::new(
            "eval.oml_grace_period",
            format!("{grace} grace rows exceed the {} training rows", train.len()),
        )]));
    }
    Ok((train, test))
}

/// Run an experiment to completion on the calling thread.
///
/// The event log and the results file are rewritten after every trial, so
/// an interrupted run leaves complete artifacts behind. `on_trial` sees each
/// progress event together with the results as persisted at that point.
pub fn execute(
    spec: &ExperimentSpec,
    data: &DataRegistry,
    store: &ArtifactStore,
    stop: &AtomicBool,
    on_trial: &mut dyn FnMut(&ProgressEvent, &ExperimentResults),
) -> Result<ExperimentResults, ExperimentError> {
    let (train, test) = prepare(spec, data)?;

    store.reset_events(&spec.prefix)?;
    let mut results = ExperimentResults::new(
        spec,
        ExperimentStatus {
            state: RunState::Running,
            started: Some(Utc::now()),
            ..ExperimentStatus::saved()
        },
    );
    store.write_results(&results)?;

    let mut objective = |config: &ModelConfig| -> Result<TrialOutcome, String> {
        let mut model =
            build_model(spec.model_id, config, spec.data.scaler).map_err(|e| e.to_string())?;
        let r = eval_oml_horizon(model.as_mut(), &train, &test, &spec.eval, &spec.weights)
            .map_err(|e| e.to_string())?;
        Ok(TrialOutcome {
            objective: r.objective,
            eval: Some(r),
        })
    };

    let mut trials: Vec<TrialRecord> = Vec::new();
    let mut write_error: Option<ExperimentError> = None;
    let mut record = |event: &ProgressEvent, trial: &TrialRecord| {
        trials.push(trial.clone());
        results.set_trials(trials.clone());
        results.elapsed_s = event.elapsed_s;
        let written = store
            .append_event(&spec.prefix, event)
            .and_then(|_| store.write_results(&results));
        if let Err(e) = written {
            log::error!("could not persist trial {}: {e}", trial.index);
            write_error.get_or_insert(e);
        }
        on_trial(event, &results);
    };

    let outcome = run_tuning_loop(
        &spec.space,
        &spec.tuner_control(),
        &mut objective,
        &mut record,
        stop,
    );
    if let Some(e) = write_error {
        return Err(e);
    }

    results.status.finished = Some(Utc::now());
    match outcome {
        Ok(state) => {
            results.status.state = match state.stop_reason {
                StopReason::Stopped => RunState::Stopped,
                StopReason::FunEvals | StopReason::MaxTime => RunState::Finished,
            };
            results.analysis = Some(bundle(&state, spec));
            results.surrogate = state.surrogate;
            results.stop_reason = Some(state.stop_reason);
            results.elapsed_s = state.elapsed_s;
            results.set_trials(state.trials);
            store.write_results(&results)?;
            Ok(results)
        }
        Err(e) => {
            results.status.state = RunState::Failed;
            results.status.message = Some(e.to_string());
            store.write_results(&results)?;
            Err(e.into())
        }
    }
}
