use crate::CliError;
use clap::{ArgGroup, Args};
use omltune::analysis::{artifact, AnalysisKind, Artifact, ContourRequest, DEFAULT_RESOLUTION};
use omltune::dataspace::{DataRegistry, DataSource, ScalerKind, SeaConfig};
use omltune::evaluation::{HorizonEvalConfig, WeightVector};
use omltune::experiments::{self, ArtifactStore, DataOptions, ExperimentSpec, RunState};
use omltune::metrics::MetricId;
use omltune::searchspace::{builtin_space, ModelId};
use omltune::tuner::{Phase, ProgressEvent};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};

fn parse<T>(s: &str) -> Result<T, String>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

/// `name=lower:upper`
fn parse_bounds(s: &str) -> Result<(String, f64, f64), String> {
    let (name, range) = s.split_once('=').ok_or("expected name=lower:upper")?;
    let (lo, hi) = range.split_once(':').ok_or("expected name=lower:upper")?;
    let lo = lo.trim().parse().map_err(|_| format!("'{lo}' is not a number"))?;
    let hi = hi.trim().parse().map_err(|_| format!("'{hi}' is not a number"))?;
    Ok((name.trim().to_string(), lo, hi))
}

/// `name=level,level,...`
fn parse_levels(s: &str) -> Result<(String, Vec<String>), String> {
    let (name, levels) = s.split_once('=').ok_or("expected name=level,level")?;
    Ok((
        name.trim().to_string(),
        levels.split(',').map(|l| l.trim().to_string()).collect(),
    ))
}

/// A grace period in rows, or `none` for one horizon.
#[derive(Debug, Clone, Copy)]
pub struct Grace(pub Option<usize>);

fn parse_grace(s: &str) -> Result<Grace, String> {
    match s.trim() {
        "" | "none" | "None" => Ok(Grace(None)),
        n => n
            .parse()
            .map(|g| Grace(Some(g)))
            .map_err(|_| format!("'{n}' is neither a count nor 'none'")),
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["dataset", "csv", "sea"])))]
pub struct SaveArgs {
    #[arg(long)]
    pub prefix: String,

    /// Registered dataset id.
    #[arg(long)]
    pub dataset: Option<String>,
    /// CSV file with the binary target in the last column.
    #[arg(long)]
    pub csv: Option<String>,
    /// Generate a SEA stream of this many rows with one concept drift halfway.
    #[arg(long)]
    pub sea: Option<usize>,
    #[arg(long = "sea_noise", visible_alias = "sea-noise", default_value_t = 0.1)]
    pub sea_noise: f64,
    #[arg(long = "sea_seed", visible_alias = "sea-seed", default_value_t = 1)]
    pub sea_seed: u64,

    #[arg(long = "n_total", visible_alias = "n-total")]
    pub n_total: Option<usize>,
    #[arg(long = "test_size", visible_alias = "test-size", default_value_t = 0.3)]
    pub test_size: f64,
    /// none, standard or minmax.
    #[arg(long, default_value = "none", value_parser = parse::<ScalerKind>)]
    pub scaler: ScalerKind,

    #[arg(long = "model_id", visible_alias = "model-id", default_value = "hoeffding_tree", value_parser = parse::<ModelId>)]
    pub model_id: ModelId,
    /// Restrict a numeric hyperparameter, e.g. `grace_period=10:500`. Repeatable.
    #[arg(long, value_parser = parse_bounds)]
    pub bounds: Vec<(String, f64, f64)>,
    /// Restrict a factor to some levels, e.g. `leaf_prediction=mc,nb`. Repeatable.
    #[arg(long, value_parser = parse_levels)]
    pub levels: Vec<(String, Vec<String>)>,

    #[arg(long, default_value = "accuracy_score", value_parser = parse::<MetricId>)]
    pub metric: MetricId,
    #[arg(long, default_value_t = 100)]
    pub horizon: usize,
    /// Grace rows before scoring, or `none` for one horizon.
    #[arg(long = "oml_grace_period", visible_alias = "oml-grace-period", default_value = "none", value_parser = parse_grace)]
    pub oml_grace_period: Grace,
    #[arg(long = "w_y", visible_alias = "w-y", default_value_t = 1.0, allow_negative_numbers = true)]
    pub w_y: f64,
    #[arg(long = "w_time", visible_alias = "w-time", default_value_t = 0.0, allow_negative_numbers = true)]
    pub w_time: f64,
    #[arg(long = "w_mem", visible_alias = "w-mem", default_value_t = 0.0, allow_negative_numbers = true)]
    pub w_mem: f64,

    /// Time budget in minutes, checked after the initial design.
    #[arg(long = "max_time", visible_alias = "max-time", default_value_t = 1.0)]
    pub max_time: f64,
    #[arg(long = "fun_evals", visible_alias = "fun-evals", default_value_t = 30)]
    pub fun_evals: usize,
    #[arg(long = "init_size", visible_alias = "init-size", default_value_t = 5)]
    pub init_size: usize,
    /// Fit a nugget for noisy objectives.
    #[arg(long)]
    pub noise: bool,
    #[arg(long, default_value_t = 123)]
    pub seed: u64,

    /// Where to write the spec.
    #[arg(short, long)]
    pub output: PathBuf,
}

impl SaveArgs {
    pub fn to_spec(&self) -> Result<ExperimentSpec, CliError> {
        let source = match (&self.dataset, &self.csv, self.sea) {
            (Some(id), _, _) => DataSource::Dataset { id: id.clone() },
            (_, Some(path), _) => DataSource::Csv { path: path.clone() },
            (_, _, Some(n)) => DataSource::Sea(SeaConfig::single_drift(n, self.sea_noise, self.sea_seed)),
            _ => unreachable!("clap requires one data source"),
        };
        let data = DataOptions {
            source,
            n_total: self.n_total,
            test_size: self.test_size,
            scaler: self.scaler,
            target_column: None,
        };
        let mut eval = HorizonEvalConfig::new(self.horizon, self.metric);
        eval.oml_grace_period = self.oml_grace_period.0;
        let mut spec = ExperimentSpec::new(&self.prefix, data, self.model_id, eval);
        let mut space = builtin_space(self.model_id);
        for (name, lo, hi) in &self.bounds {
            space
                .set_bounds(name, *lo, *hi)
                .map_err(|e| CliError::Invalid(format!("--bounds {name}: {e}")))?;
        }
        for (name, levels) in &self.levels {
            let levels: Vec<&str> = levels.iter().map(String::as_str).collect();
            space
                .select_levels(name, &levels)
                .map_err(|e| CliError::Invalid(format!("--levels {name}: {e}")))?;
        }
        spec.space = space;
        spec.weights = WeightVector::new(self.w_y, self.w_time, self.w_mem);
        spec.control.max_time_minutes = self.max_time;
        spec.control.fun_evals = self.fun_evals;
        spec.control.init_size = self.init_size;
        spec.control.noise = self.noise;
        spec.control.seed = self.seed;
        Ok(spec)
    }
}

pub fn save(data: &DataRegistry, args: &SaveArgs) -> Result<(), CliError> {
    let spec = args.to_spec()?;
    spec.validate_with(data)?;
    for w in spec.control.warnings() {
        eprintln!("warning: {w}");
    }
    let path = experiments::save_spec_file(&args.output, &spec)?;
    emit!("saved {}", path.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Spec file written by `omltune save` (or the web UI).
    pub spec: PathBuf,
    /// Replace earlier results stored under the same prefix.
    #[arg(long)]
    pub overwrite: bool,
    /// Suppress the per-trial progress lines.
    #[arg(short, long)]
    pub quiet: bool,
}

fn progress_line(e: &ProgressEvent, total: usize) -> String {
    let phase = match e.phase {
        Phase::InitialDesign => "init",
        Phase::Surrogate => "ei  ",
    };
    let fmt = |v: Option<f64>| v.map_or_else(|| "failed".to_string(), |v| format!("{v:.6}"));
    format!(
        "[{:>3}/{total}] {phase}  objective {:>12}  best {:>12}  {:>7.1}s",
        e.trial_index + 1,
        fmt(e.objective),
        fmt(e.best_so_far),
        e.elapsed_s
    )
}

pub fn run(
    data: &DataRegistry,
    store: &ArtifactStore,
    args: &RunArgs,
    interrupt: &AtomicBool,
) -> Result<(), CliError> {
    let spec = experiments::load_spec(&args.spec)?;
    spec.validate_with(data)?;
    if !args.overwrite {
        if let Ok(Some(prev)) = store.load_results(&spec.prefix) {
            if prev.status.state != RunState::Saved {
                return Err(CliError::Runtime(format!(
                    "{} already holds results for '{}' ({:?}); pass --overwrite to replace them",
                    store.dir().display(),
                    spec.prefix,
                    prev.status.state
                )));
            }
        }
    }
    store.save_spec(&spec)?;
    for w in spec.control.warnings() {
        eprintln!("warning: {w}");
    }
    let total = spec.control.fun_evals;
    let quiet = args.quiet;
    let results = experiments::execute(&spec, data, store, interrupt, &mut |e, _| {
        if !quiet {
            eprintln!("{}", progress_line(e, total));
        }
    })?;
    let best = results
        .status
        .best_objective
        .map_or_else(|| "none".to_string(), |b| format!("{b:.6}"));
    emit!(
        "{}: {:?} after {} trials, best objective {best}",
        spec.prefix, results.status.state, results.status.trials_done
    );
    emit!("results: {}", store.results_path(&spec.prefix).display());
    if interrupt.load(Ordering::Relaxed) {
        return Err(CliError::Interrupted);
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Experiment prefix in the artifact directory.
    pub prefix: String,
    /// progress, compare, importance, contour, parallel or confusion.
    #[arg(long, value_parser = parse::<AnalysisKindArg>)]
    pub kind: AnalysisKindArg,
    /// Contour: search-space index of the first axis.
    #[arg(long)]
    pub i: Option<usize>,
    /// Contour: search-space index of the second axis.
    #[arg(long)]
    pub j: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    pub resolution: usize,
    /// Print JSON even for kinds that have a text rendering.
    #[arg(long)]
    pub json: bool,
    /// Write the JSON artifact to this file instead of printing.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisKindArg(pub AnalysisKind);

impl std::str::FromStr for AnalysisKindArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(AnalysisKindArg)
    }
}

fn render_text(a: &Artifact) -> Option<String> {
    match a {
        Artifact::Compare(c) => Some(c.table.clone()),
        Artifact::Importance(rows) => {
            let mut s = format!("{:<24} {:>10}  stars\n", "name", "importance");
            for r in rows {
                let imp = r.importance.map_or_else(|| "fixed".to_string(), |v| format!("{v:.2}"));
                s.push_str(&format!("{:<24} {imp:>10}  {}\n", r.name, r.stars));
            }
            Some(s)
        }
        Artifact::Confusion(c) => Some(format!(
            "           pred 0  pred 1\ntrue 0  {:>8}  {:>6}\ntrue 1  {:>8}  {:>6}\n",
            c.tn, c.fp, c.fn_, c.tp
        )),
        Artifact::Progress(points) => {
            let mut s = String::from("index,phase,objective,best_so_far\n");
            let cell = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
            for p in points {
                let phase = match p.phase {
                    Phase::InitialDesign => "initial_design",
                    Phase::Surrogate => "surrogate",
                };
                s.push_str(&format!("{},{phase},{},{}\n", p.index, cell(p.objective), cell(p.best_so_far)));
            }
            Some(s)
        }
        Artifact::Contour(_) | Artifact::Parallel(_) => None,
    }
}

pub fn analyze(store: &ArtifactStore, args: &AnalyzeArgs) -> Result<(), CliError> {
    let kind = args.kind.0;
    let spec = store.load_spec(&args.prefix).map_err(|e| match e {
        experiments::ExperimentError::Io { .. } => {
            CliError::Invalid(format!("no experiment '{}' in {}", args.prefix, store.dir().display()))
        }
        other => other.into(),
    })?;
    let results = store
        .load_results(&args.prefix)?
        .ok_or_else(|| CliError::Runtime(format!("experiment '{}' has not been run", args.prefix)))?;
    if kind.needs_finished_run() && !results.status.state.is_terminal() {
        return Err(CliError::Runtime(format!(
            "{kind} is available once the run has ended (state: {:?})",
            results.status.state
        )));
    }
    let contour = match (kind, args.i, args.j) {
        (AnalysisKind::Contour, Some(i), Some(j)) => Some(ContourRequest {
            i,
            j,
            resolution: args.resolution,
        }),
        (AnalysisKind::Contour, _, _) => {
            return Err(CliError::Invalid("contour needs --i and --j".into()));
        }
        _ => None,
    };
    let a = artifact(kind, &results.tuner_state(), &spec.space, contour).map_err(|e| {
        use omltune::analysis::AnalysisError as A;
        match e {
            A::SameDimension(_) | A::NoSuchDimension(_) | A::FixedDimension(_) | A::Resolution | A::MissingAxes => {
                CliError::Invalid(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    })?;
    let json = serde_json::to_string_pretty(&a).expect("serializable");
    if let Some(path) = &args.output {
        std::fs::write(path, json + "\n").map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        eprintln!("wrote {}", path.display());
        return Ok(());
    }
    match render_text(&a).filter(|_| !args.json) {
        Some(text) => print!("{text}"),
        None => emit!("{json}"),
    }
    Ok(())
}
