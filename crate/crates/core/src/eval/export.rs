//! CSV and text output of experiment results.
//!
//! Layout under the output directory:
//!
//! ```text
//! <dataset>/runs.csv                    one row per (ratio, repetition, fold, method)
//! <dataset>/accuracy_mean.csv           methods × ratios, mean accuracy
//! <dataset>/accuracy_sd.csv             methods × ratios, sample sd
//! <dataset>/kappa_error/<method>_r<ratio>.csv   kappa,mean_error per member pair
//! ranks.csv, friedman.csv               across datasets, per ratio (>= 2 datasets)
//! summary.txt                           plain-text tables
//! ```
//!
//! Files depend only on the results, so reruns with the same seed are
//! byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::ensemble::MethodId;
use crate::error::{Error, Result};
use crate::eval::experiment::{ExperimentOutput, KappaRecord, RunResult};
use crate::eval::friedman::{friedman, RankTable};
use crate::eval::metrics::KappaErrorPoint;

pub const RUNS_HEADER: [&str; 6] = ["dataset", "method", "ratio", "repetition", "fold", "accuracy"];
pub const KAPPA_HEADER: [&str; 4] = ["member_i", "member_j", "kappa", "mean_error"];

/// Mean and sample sd of the fold accuracies of each (method, ratio).
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyTable {
    pub dataset: String,
    pub methods: Vec<MethodId>,
    pub ratios: Vec<f64>,
    /// `mean[method][ratio]`; `NaN` where no runs exist.
    pub mean: Vec<Vec<f64>>,
    pub sd: Vec<Vec<f64>>,
    pub count: Vec<Vec<usize>>,
}

/// Friedman table for one ratio across datasets.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioRanks {
    pub ratio: f64,
    pub methods: Vec<MethodId>,
    pub datasets: Vec<String>,
    pub table: RankTable,
}

pub fn format_ratio(r: f64) -> String {
    format!("{r:.2}")
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, sd)
}

fn sorted_ratios(results: &[&RunResult]) -> Vec<f64> {
    let mut r: Vec<f64> = results.iter().map(|x| x.ratio).collect();
    r.sort_by(f64::total_cmp);
    r.dedup();
    r
}

fn sorted_methods(results: &[&RunResult]) -> Vec<MethodId> {
    let mut m: Vec<MethodId> = results.iter().map(|x| x.method).collect();
    m.sort();
    m.dedup();
    m
}

/// Dataset names in first-appearance order.
pub fn dataset_names(results: &[RunResult]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in results {
        if !names.contains(&r.dataset) {
            names.push(r.dataset.clone());
        }
    }
    names
}

pub fn accuracy_table(results: &[RunResult], dataset: &str) -> AccuracyTable {
    let rows: Vec<&RunResult> = results.iter().filter(|r| r.dataset == dataset).collect();
    let methods = sorted_methods(&rows);
    let ratios = sorted_ratios(&rows);
    let mut mean = vec![vec![f64::NAN; ratios.len()]; methods.len()];
    let mut sd = mean.clone();
    let mut count = vec![vec![0; ratios.len()]; methods.len()];
    for (i, m) in methods.iter().enumerate() {
        for (j, r) in ratios.iter().enumerate() {
            let xs: Vec<f64> = rows
                .iter()
                .filter(|x| x.method == *m && x.ratio == *r)
                .map(|x| x.accuracy)
                .collect();
            let (mu, s) = mean_sd(&xs);
            mean[i][j] = mu;
            sd[i][j] = s;
            count[i][j] = xs.len();
        }
    }
    AccuracyTable {
        dataset: dataset.to_string(),
        methods,
        ratios,
        mean,
        sd,
        count,
    }
}

/// Friedman tables per ratio over datasets that have every method. Ratios
/// with fewer than two such datasets are skipped.
pub fn rank_tables(tables: &[AccuracyTable]) -> Result<Vec<RatioRanks>> {
    let mut ratios: Vec<f64> = tables.iter().flat_map(|t| t.ratios.iter().copied()).collect();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    let mut methods: Vec<MethodId> = tables.iter().flat_map(|t| t.methods.iter().copied()).collect();
    methods.sort();
    methods.dedup();
    if methods.len() < 2 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for &ratio in &ratios {
        let mut datasets = Vec::new();
        let mut columns = Vec::new();
        for t in tables {
            let Some(j) = t.ratios.iter().position(|&r| r == ratio) else { continue };
            let col: Option<Vec<f64>> = methods
                .iter()
                .map(|m| {
                    t.methods
                        .iter()
                        .position(|x| x == m)
                        .map(|i| t.mean[i][j])
                        .filter(|v| v.is_finite())
                })
                .collect();
            if let Some(col) = col {
                datasets.push(t.dataset.clone());
                columns.push(col);
            }
        }
        if datasets.len() < 2 {
            continue;
        }
        let matrix: Vec<Vec<f64>> = (0..methods.len())
            .map(|i| columns.iter().map(|c| c[i]).collect())
            .collect();
        out.push(RatioRanks {
            ratio,
            methods: methods.clone(),
            datasets,
            table: friedman(&matrix)?,
        });
    }
    Ok(out)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn write_runs(results: &[RunResult], path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.dataset.clone(),
                r.method.name().to_string(),
                r.ratio.to_string(),
                r.repetition.to_string(),
                r.fold.to_string(),
                r.accuracy.to_string(),
            ]
        })
        .collect();
    write_rows(path, &strings(&RUNS_HEADER), &rows)
}

pub fn read_runs(path: &Path) -> Result<Vec<RunResult>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != RUNS_HEADER {
        return Err(Error::Format(format!(
            "{}: expected header {}",
            path.display(),
            RUNS_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |what: &str| Error::Format(format!("{}: line {}: bad {what}", path.display(), i + 2));
        out.push(RunResult {
            dataset: rec[0].to_string(),
            method: rec[1].parse().map_err(|_| bad("method"))?,
            ratio: rec[2].parse().map_err(|_| bad("ratio"))?,
            repetition: rec[3].parse().map_err(|_| bad("repetition"))?,
            fold: rec[4].parse().map_err(|_| bad("fold"))?,
            accuracy: rec[5].parse().map_err(|_| bad("accuracy"))?,
        });
    }
    Ok(out)
}

fn write_matrix(table: &AccuracyTable, values: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut header = vec!["method".to_string()];
    header.extend(table.ratios.iter().map(|&r| format_ratio(r)));
    let rows: Vec<Vec<String>> = table
        .methods
        .iter()
        .zip(values)
        .map(|(m, vals)| {
            let mut row = vec![m.name().to_string()];
            row.extend(vals.iter().map(|v| format!("{v:.6}")));
            row
        })
        .collect();
    write_rows(path, &header, &rows)
}

pub fn write_kappa(record: &KappaRecord, path: &Path) -> Result<()> {
    write_kappa_points(&record.points, path)
}

pub fn write_kappa_points(points: &[KappaErrorPoint], path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.member_i.to_string(),
                p.member_j.to_string(),
                p.kappa.to_string(),
                p.mean_error.to_string(),
            ]
        })
        .collect();
    write_rows(path, &strings(&KAPPA_HEADER), &rows)
}

pub fn kappa_file_name(method: MethodId, ratio: f64) -> String {
    format!("{}_r{}.csv", method.name(), format_ratio(ratio))
}

fn write_ranks(ranks: &[RatioRanks], dir: &Path) -> Result<Vec<PathBuf>> {
    if ranks.is_empty() {
        return Ok(Vec::new());
    }
    let mut rank_rows = Vec::new();
    let mut stat_rows = Vec::new();
    for rr in ranks {
        for (i, m) in rr.methods.iter().enumerate() {
            for (d, name) in rr.datasets.iter().enumerate() {
                rank_rows.push(vec![
                    format_ratio(rr.ratio),
                    m.name().to_string(),
                    name.clone(),
                    format!("{:.6}", rr.table.accuracy[i][d]),
                    rr.table.ranks[i][d].to_string(),
                ]);
            }
            rank_rows.push(vec![
                format_ratio(rr.ratio),
                m.name().to_string(),
                "mean_rank".to_string(),
                String::new(),
                format!("{:.6}", rr.table.mean_ranks[i]),
            ]);
        }
        stat_rows.push(vec![
            format_ratio(rr.ratio),
            rr.methods.len().to_string(),
            rr.datasets.len().to_string(),
            format!("{:.6}", rr.table.statistic),
            format!("{:.6e}", rr.table.p_value),
        ]);
    }
    let ranks_path = dir.join("ranks.csv");
    write_rows(
        &ranks_path,
        &strings(&["ratio", "method", "dataset", "mean_accuracy", "rank"]),
        &rank_rows,
    )?;
    let fr_path = dir.join("friedman.csv");
    write_rows(
        &fr_path,
        &strings(&["ratio", "methods", "datasets", "statistic", "p_value"]),
        &stat_rows,
    )?;
    Ok(vec![ranks_path, fr_path])
}

fn format_p(p: f64) -> String {
    if p >= 1e-4 {
        format!("{p:.4}")
    } else {
        format!("{p:.3e}")
    }
}

/// Plain-text tables: methods as rows, ratios as columns, one block per
/// dataset, followed by the Friedman statistics.
pub fn render_summary(tables: &[AccuracyTable], ranks: &[RatioRanks]) -> String {
    let mut s = String::new();
    for t in tables {
        let _ = writeln!(s, "{}: mean accuracy over {} runs per cell", t.dataset, t.count.iter().flatten().max().unwrap_or(&0));
        let _ = write!(s, "{:<12}", "method");
        for r in &t.ratios {
            let _ = write!(s, " {:>7}", format!("{:.0}%", r * 100.0));
        }
        s.push('\n');
        for (i, m) in t.methods.iter().enumerate() {
            let _ = write!(s, "{:<12}", m.name());
            for v in &t.mean[i] {
                let _ = write!(s, " {v:>7.4}");
            }
            s.push('\n');
        }
        s.push('\n');
    }
    for rr in ranks {
        let _ = writeln!(
            s,
            "Friedman at {:.0}%: chi2 = {:.4}, df = {}, p = {} ({} datasets)",
            rr.ratio * 100.0,
            rr.table.statistic,
            rr.methods.len() - 1,
            format_p(rr.table.p_value),
            rr.datasets.len()
        );
        let mut order: Vec<usize> = (0..rr.methods.len()).collect();
        order.sort_by(|&a, &b| rr.table.mean_ranks[a].total_cmp(&rr.table.mean_ranks[b]));
        let parts: Vec<String> = order
            .iter()
            .map(|&i| format!("{} {:.2}", rr.methods[i].name(), rr.table.mean_ranks[i]))
            .collect();
        let _ = writeln!(s, "  mean ranks: {}", parts.join(", "));
    }
    s
}

/// Writes all result files under `dir` and returns their paths.
pub fn export_results(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut by_dataset: BTreeMap<usize, (String, Vec<RunResult>)> = BTreeMap::new();
    for (i, name) in dataset_names(&output.results).into_iter().enumerate() {
        let rows = output.results.iter().filter(|r| r.dataset == name).cloned().collect();
        by_dataset.insert(i, (name, rows));
    }
    let mut tables = Vec::new();
    for (name, rows) in by_dataset.values() {
        let ddir = dir.join(name);
        let p = ddir.join("runs.csv");
        write_runs(rows, &p)?;
        written.push(p);
        let table = accuracy_table(rows, name);
        let p = ddir.join("accuracy_mean.csv");
        write_matrix(&table, &table.mean, &p)?;
        written.push(p);
        let p = ddir.join("accuracy_sd.csv");
        write_matrix(&table, &table.sd, &p)?;
        written.push(p);
        tables.push(table);
    }
    for k in &output.kappa {
        let p = dir.join(&k.dataset).join("kappa_error").join(kappa_file_name(k.method, k.ratio));
        write_kappa(k, &p)?;
        written.push(p);
    }
    let ranks = rank_tables(&tables)?;
    written.extend(write_ranks(&ranks, dir)?);
    let mut summary = render_summary(&tables, &ranks);
    for f in &output.failures {
        let _ = writeln!(summary, "FAILED {}: {}", f.dataset, f.error);
    }
    let p = dir.join("summary.txt");
    fs::write(&p, summary).map_err(|e| Error::io(&p, e))?;
    written.push(p);
    Ok(written)
}

/// Rebuilds tables and summary from `runs.csv` files found one level below
/// `dir`, without the kappa-error files.
pub fn report_from_dir(dir: &Path) -> Result<(Vec<AccuracyTable>, Vec<RatioRanks>)> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path().join("runs.csv")))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(Error::Invalid(format!("no */runs.csv under {}", dir.display())));
    }
    let mut tables = Vec::new();
    for p in entries {
        let rows = read_runs(&p)?;
        for name in dataset_names(&rows) {
            tables.push(accuracy_table(&rows, &name));
        }
    }
    let ranks = rank_tables(&tables)?;
    Ok((tables, ranks))
}
