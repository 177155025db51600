use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use crate::algo::LocalUpdates;
use crate::error::{Error, Result};

pub const ROW_HEADER: [&str; 8] = [
    "experiment",
    "task_seed",
    "algorithm",
    "E",
    "kappa",
    "iter",
    "metric",
    "value",
];
pub const SUMMARY_HEADER: [&str; 8] = [
    "experiment",
    "algorithm",
    "E",
    "kappa",
    "metric",
    "mean",
    "stderr",
    "count",
];

/// Placeholder for key columns that do not apply to a row.
pub const NOT_APPLICABLE: &str = "-";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub task_seed: u64,
    pub algorithm: String,
    pub e: Option<LocalUpdates>,
    pub kappa: Option<f64>,
    pub iter: u64,
    pub metric: String,
    pub value: f64,
}

impl ResultRow {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.experiment
            .cmp(&other.experiment)
            .then(self.task_seed.cmp(&other.task_seed))
            .then(self.algorithm.cmp(&other.algorithm))
            .then(self.e.cmp(&other.e))
            .then(cmp_kappa(self.kappa, other.kappa))
            .then(self.iter.cmp(&other.iter))
            .then(self.metric.cmp(&other.metric))
    }
}

fn cmp_kappa(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        _ => a.is_some().cmp(&b.is_some()),
    }
}

/// Sorts rows by `(experiment, task_seed, algorithm, E, kappa, iter, metric)`.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(ResultRow::cmp_key);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub experiment: String,
    pub algorithm: String,
    pub e: Option<LocalUpdates>,
    pub kappa: Option<f64>,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(count)`; 0 for a single seed.
    pub stderr: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct GroupKey {
    experiment: String,
    algorithm: String,
    e: Option<LocalUpdates>,
    kappa: Option<u64>,
    metric: String,
}

fn kappa_key(kappa: Option<f64>) -> Option<u64> {
    // order-preserving map of finite floats to integers
    kappa.map(|k| {
        let bits = k.to_bits();
        if bits >> 63 == 1 {
            !bits
        } else {
            bits | (1 << 63)
        }
    })
}

/// Mean and standard error per `(experiment, algorithm, E, kappa, metric)`
/// over task seeds, using each seed's row at its final recorded iteration.
/// The result does not depend on the input order.
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<Summary>> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot summarize an empty row set"));
    }
    let mut last: BTreeMap<(GroupKey, u64), (u64, f64)> = BTreeMap::new();
    for row in rows {
        let key = GroupKey {
            experiment: row.experiment.clone(),
            algorithm: row.algorithm.clone(),
            e: row.e,
            kappa: kappa_key(row.kappa),
            metric: row.metric.clone(),
        };
        let slot = last
            .entry((key, row.task_seed))
            .or_insert((row.iter, row.value));
        if row.iter > slot.0 {
            *slot = (row.iter, row.value);
        }
    }
    let mut groups: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    // BTreeMap iteration visits seeds in increasing order within a group
    for ((key, _seed), (_, value)) in last {
        groups.entry(key).or_default().push(value);
    }
    let kappa_of: BTreeMap<Option<u64>, Option<f64>> =
        rows.iter().map(|r| (kappa_key(r.kappa), r.kappa)).collect();
    Ok(groups
        .into_iter()
        .map(|(key, values)| {
            let count = values.len();
            let mean = values.iter().sum::<f64>() / count as f64;
            let stderr = if count > 1 {
                let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
                (ss / (count - 1) as f64).sqrt() / (count as f64).sqrt()
            } else {
                0.0
            };
            Summary {
                kappa: kappa_of[&key.kappa],
                experiment: key.experiment,
                algorithm: key.algorithm,
                e: key.e,
                metric: key.metric,
                mean,
                stderr,
                count,
            }
        })
        .collect())
}

/// 17 significant digits; parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_e(e: Option<LocalUpdates>) -> String {
    e.map_or_else(|| NOT_APPLICABLE.to_string(), |e| e.to_string())
}

fn format_kappa(kappa: Option<f64>) -> String {
    kappa.map_or_else(|| NOT_APPLICABLE.to_string(), format_float)
}

pub fn parse_e(field: &str) -> Result<Option<LocalUpdates>> {
    if field == NOT_APPLICABLE {
        Ok(None)
    } else {
        field.parse().map(Some)
    }
}

pub fn parse_kappa(field: &str) -> Result<Option<f64>> {
    if field == NOT_APPLICABLE {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::invalid(format!("bad kappa `{field}`")))
}

fn csv_error(path: &Path, err: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: err.to_string(),
    }
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes rows sorted by the composite key. An empty slice yields a
/// header-only file.
pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut w = create(path)?;
    w.write_record(ROW_HEADER).map_err(|e| csv_error(path, e))?;
    for r in &sorted {
        if !r.value.is_finite() {
            return Err(Error::invalid(format!(
                "metric {} of seed {} is not finite",
                r.metric, r.task_seed
            )));
        }
        w.write_record([
            r.experiment.clone(),
            r.task_seed.to_string(),
            r.algorithm.clone(),
            format_e(r.e),
            format_kappa(r.kappa),
            r.iter.to_string(),
            r.metric.clone(),
            format_float(r.value),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_summaries(summaries: &[Summary], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(SUMMARY_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for s in summaries {
        w.write_record([
            s.experiment.clone(),
            s.algorithm.clone(),
            format_e(s.e),
            format_kappa(s.kappa),
            s.metric.clone(),
            format_float(s.mean),
            format_float(s.stderr),
            s.count.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a file written by [`write_results`].
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(ROW_HEADER) {
        return Err(csv_error(
            path,
            format!("expected header `{}`", ROW_HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let at = |e: Error| csv_error(path, format!("data row {}: {e}", line + 1));
        let int = |i: usize| -> Result<u64> {
            record[i]
                .parse()
                .map_err(|_| Error::invalid(format!("bad {} `{}`", ROW_HEADER[i], &record[i])))
        };
        let value: f64 = record[7]
            .parse()
            .map_err(|_| at(Error::invalid(format!("bad value `{}`", &record[7]))))?;
        rows.push(ResultRow {
            experiment: record[0].to_string(),
            task_seed: int(1).map_err(at)?,
            algorithm: record[2].to_string(),
            e: parse_e(&record[3]).map_err(at)?,
            kappa: parse_kappa(&record[4]).map_err(at)?,
            iter: int(5).map_err(at)?,
            metric: record[6].to_string(),
            value,
        });
    }
    Ok(rows)
}
