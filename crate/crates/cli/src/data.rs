use crate::CliError;
use clap::Args;
use omltune::dataspace::{data_report, DataRegistry, DataReport, SplitSpec};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Args)]
pub struct ShowArgs {
    /// Dataset id (see `omltune data list`).
    pub id: String,

    #[arg(long = "test_size", visible_alias = "test-size", default_value_t = 0.3)]
    pub test_size: f64,

    #[arg(long = "n_total", visible_alias = "n-total")]
    pub n_total: Option<usize>,

    /// Print the full report as JSON (the same document the API serves).
    #[arg(long)]
    pub json: bool,

    /// Write histogram and scatter CSVs for plotting into this directory.
    #[arg(long = "plot_dir", visible_alias = "plot-dir")]
    pub plot_dir: Option<PathBuf>,
}

pub fn list(data: &DataRegistry, json: bool) -> Result<(), CliError> {
    let infos = data.list()?;
    if json {
        emit!("{}", serde_json::to_string_pretty(&infos).expect("serializable"));
        return Ok(());
    }
    emit!("{:<16} {:>8} {:>10}  source", "id", "rows", "features");
    for d in infos {
        emit!("{:<16} {:>8} {:>10}  {}", d.id, d.n_rows, d.n_features, d.source);
    }
    Ok(())
}

pub fn show(data: &DataRegistry, args: &ShowArgs) -> Result<(), CliError> {
    if !data.contains(&args.id) {
        return Err(CliError::Invalid(format!(
            "unknown dataset '{}' (known: {})",
            args.id,
            data.ids().collect::<Vec<_>>().join(", ")
        )));
    }
    let report = data_report(data, &args.id, &SplitSpec::new(args.n_total, args.test_size))?;
    if args.json {
        emit!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        emit!("train ({} rows)\n{}", report.n_train, report.train);
        emit!("test ({} rows)\n{}", report.n_test, report.test);
    }
    if let Some(dir) = &args.plot_dir {
        let written = write_plot_files(&report, dir)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        for p in written {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

/// Target counts per partition, and the display sample with its labels.
fn write_plot_files(r: &DataReport, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let hist = dir.join(format!("{}_target_histogram.csv", r.id));
    let mut f = fs::File::create(&hist)?;
    writeln!(f, "partition,label,count")?;
    for (name, summary, n) in [("train", &r.train, r.n_train), ("test", &r.test, r.n_test)] {
        let ones = summary
            .columns
            .last()
            .map_or(0, |c| (c.mean * n as f64).round() as usize);
        writeln!(f, "{name},0,{}", n - ones)?;
        writeln!(f, "{name},1,{ones}")?;
    }

    let scatter = dir.join(format!("{}_scatter.csv", r.id));
    let mut f = fs::File::create(&scatter)?;
    let s = &r.display_sample;
    writeln!(f, "{},label,partition", s.columns.join(","))?;
    for ((row, label), test) in s.rows.iter().zip(&s.labels).zip(&s.test) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let part = if *test { "test" } else { "train" };
        writeln!(f, "{},{label},{part}", cells.join(","))?;
    }
    Ok(vec![hist, scatter])
}
