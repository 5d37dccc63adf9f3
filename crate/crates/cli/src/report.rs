//! Side-by-side comparison of metrics files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use racnet::config::RunConfig;
use racnet::trainer::{parse_metrics_csv, MetricsRecord};

use crate::{write_file, CliResult, Failure};

struct Run {
    name: String,
    records: Vec<MetricsRecord>,
    config: Option<RunConfig>,
}

fn run_name(path: &Path, index: usize) -> String {
    path.parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| format!("run{index}"))
}

fn load(paths: &[std::path::PathBuf]) -> CliResult<Vec<Run>> {
    let mut runs = Vec::new();
    for (i, path) in paths.iter().enumerate() {
        let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        let records = parse_metrics_csv(&text)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        let sibling = path.with_file_name("config.toml");
        let config = if sibling.is_file() { Some(RunConfig::load(&sibling)?) } else { None };
        let mut name = run_name(path, i);
        if runs.iter().any(|r: &Run| r.name == name) {
            name = format!("{name}#{i}");
        }
        runs.push(Run { name, records, config });
    }
    Ok(runs)
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Pseudo-label accuracy and reliable count of one run at one step.
type CurveCell = (Option<f64>, Option<usize>);

/// `step` plus a `pl_acc` and `reliable_count` column per run, one row per
/// training step seen in any run.
fn curves(runs: &[Run]) -> String {
    let mut rows: BTreeMap<u64, Vec<CurveCell>> = BTreeMap::new();
    for (i, run) in runs.iter().enumerate() {
        for r in run.records.iter().filter(|r| !r.is_eval()) {
            rows.entry(r.step).or_insert_with(|| vec![(None, None); runs.len()])[i] = (r.pl_acc, r.reliable_count);
        }
    }
    let mut out = String::from("step");
    for run in runs {
        out.push_str(&format!(",{0}_pl_acc,{0}_reliable_count", run.name));
    }
    out.push('\n');
    for (step, cols) in rows {
        out.push_str(&step.to_string());
        for (acc, count) in cols {
            out.push_str(&format!(",{},{}", fmt(acc), count.map(|c| c.to_string()).unwrap_or_default()));
        }
        out.push('\n');
    }
    out
}

fn mark(on: Option<bool>) -> &'static str {
    match on {
        Some(true) => "x",
        Some(false) => "",
        None => "?",
    }
}

/// Final evaluation per run with the loss terms that were switched on.
fn summary(runs: &[Run]) -> String {
    let mut out = String::from("run,l_r,l_a,l_mix,kappa,eval_step,final_miou\n");
    for run in runs {
        let last = run.records.iter().rev().find(|r| r.is_eval());
        let t = run.config.as_ref().map(|c| &c.train);
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            run.name,
            mark(t.map(|t| t.lambda1 != 0.0)),
            mark(t.map(|t| t.lambda2 != 0.0)),
            mark(t.map(|t| t.lambda3 != 0.0)),
            t.map(|t| t.kappa.to_string()).unwrap_or_default(),
            last.map(|r| r.step.to_string()).unwrap_or_default(),
            fmt(last.and_then(|r| r.miou)),
        ));
    }
    out
}

fn aligned(csv: &str) -> String {
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.len()).max().unwrap_or(0))
        .collect();
    rows.iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn run(paths: &[std::path::PathBuf], out: Option<&Path>) -> CliResult {
    let runs = load(paths)?;
    let curves = curves(&runs);
    let summary = summary(&runs);
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure { code: 1, message: format!("{}: {e}", dir.display()) })?;
            write_file(&dir.join("curves.csv"), &curves)?;
            write_file(&dir.join("summary.csv"), &summary)?;
            println!("{}", aligned(&summary));
        }
        None => {
            print!("{curves}");
            println!();
            print!("{summary}");
        }
    }
    Ok(())
}
