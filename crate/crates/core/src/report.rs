//! Cross-instance summaries of score files: mean rank, median and win rate
//! per method and metric.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{Method, ScoreRow, METRICS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

impl Direction {
    /// Invalid and unresolved reference counts are the only metrics where less is better.
    pub fn for_metric(metric: &str) -> Direction {
        match metric {
            "refs_invalid" | "refs_unresolved" => Direction::LowerIsBetter,
            _ => Direction::HigherIsBetter,
        }
    }

    fn better(self, a: f64, b: f64) -> std::cmp::Ordering {
        match self {
            Direction::HigherIsBetter => b.total_cmp(&a),
            Direction::LowerIsBetter => a.total_cmp(&b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub metric: String,
    pub method: String,
    pub instances: usize,
    pub mean_rank: f64,
    pub median: f64,
    pub win_pct: f64,
}

/// Known methods in ladder order, then anything else by name.
type MethodKey = (Option<Method>, String);

fn method_order(name: &str) -> MethodKey {
    (Method::from_str(name).ok(), name.to_string())
}

/// Median of a non-empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Ranks (1 = best) with tied values sharing the average of their positions.
pub fn average_ranks(values: &[f64], direction: Direction) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| direction.better(values[a], values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Summarise one metric. Methods that never report the metric are left out;
/// instances where any remaining method lacks a value are dropped. Every
/// method tied for the best value on an instance is credited with a win.
pub fn aggregate(rows: &[ScoreRow], metric: &str, direction: Direction) -> Result<Vec<AggregateRow>> {
    let mut table: BTreeMap<&str, BTreeMap<MethodKey, Option<f64>>> = BTreeMap::new();
    let mut methods: BTreeSet<MethodKey> = BTreeSet::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        let m = method_order(&r.method);
        if r.value.is_some() {
            methods.insert(m.clone());
        }
        if let Some(prev) = table.entry(r.instance_id.as_str()).or_default().insert(m, r.value) {
            if prev != r.value {
                return Err(Error::Report(format!(
                    "{}: conflicting {metric} values for {}",
                    r.instance_id, r.method
                )));
            }
        }
    }
    if methods.is_empty() {
        return Err(Error::Report(format!("no scores for metric {metric}")));
    }
    let methods: Vec<_> = methods.into_iter().collect();

    let mut complete: Vec<(&str, Vec<f64>)> = Vec::new();
    for (instance, scores) in &table {
        let values: Option<Vec<f64>> = methods.iter().map(|m| scores.get(m).copied().flatten()).collect();
        match values {
            Some(v) => complete.push((instance, v)),
            None => log::info!("{metric}: instance {instance} dropped (not every method has a score)"),
        }
    }
    if complete.is_empty() {
        return Err(Error::Report(format!(
            "no instance has {metric} scores for every method"
        )));
    }
    let n = complete.len();
    log::info!("{metric}: {n} instance(s), {} method(s)", methods.len());

    let mut rank_sum = vec![0.0; methods.len()];
    let mut wins = vec![0usize; methods.len()];
    for (_, values) in &complete {
        let best = values
            .iter()
            .copied()
            .min_by(|a, b| direction.better(*a, *b))
            .expect("non-empty");
        for (i, r) in average_ranks(values, direction).into_iter().enumerate() {
            rank_sum[i] += r;
            wins[i] += (values[i] == best) as usize;
        }
    }
    Ok(methods
        .iter()
        .enumerate()
        .map(|(i, (_, name))| AggregateRow {
            metric: metric.to_string(),
            method: name.clone(),
            instances: n,
            mean_rank: rank_sum[i] / n as f64,
            median: median(&complete.iter().map(|(_, v)| v[i]).collect::<Vec<_>>()),
            win_pct: 100.0 * wins[i] as f64 / n as f64,
        })
        .collect())
}

/// [`aggregate`] for every known metric present in `rows`, metric-major.
pub fn aggregate_all(rows: &[ScoreRow]) -> Result<Vec<AggregateRow>> {
    let present: BTreeSet<&str> = rows
        .iter()
        .filter(|r| r.value.is_some())
        .map(|r| r.metric.as_str())
        .collect();
    let mut names: Vec<&str> = METRICS.iter().copied().filter(|m| present.contains(m)).collect();
    names.extend(present.iter().copied().filter(|m| !METRICS.contains(m)));
    let mut out = Vec::new();
    for m in names {
        match aggregate(rows, m, Direction::for_metric(m)) {
            Ok(r) => out.extend(r),
            Err(e) => log::warn!("{e}"),
        }
    }
    if out.is_empty() {
        return Err(Error::Report("nothing to aggregate".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

pub const TIE_POLICY: &str = "Ties share the average rank; every method tied for the best value is credited with a win, so win percentages can sum to more than 100.";

fn csv_string(rows: &[AggregateRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
}

fn markdown_string(rows: &[AggregateRow]) -> String {
    let mut s = String::from("# Method comparison\n\n");
    let _ = writeln!(s, "{TIE_POLICY}\n");
    let mut blocks: Vec<(&str, Vec<&AggregateRow>)> = Vec::new();
    for r in rows {
        match blocks.last_mut() {
            Some((m, v)) if *m == r.metric => v.push(r),
            _ => blocks.push((&r.metric, vec![r])),
        }
    }
    for (metric, block) in blocks {
        let dir = match Direction::for_metric(metric) {
            Direction::HigherIsBetter => "higher is better",
            Direction::LowerIsBetter => "lower is better",
        };
        let _ = writeln!(s, "## {metric} ({} instances, {dir})\n", block[0].instances);
        s.push_str("| method | rank | median | win % |\n|---|---:|---:|---:|\n");
        for r in block {
            let _ = writeln!(
                s,
                "| {} | {:.3} | {:.4} | {:.1} |",
                r.method, r.mean_rank, r.median, r.win_pct
            );
        }
        s.push('\n');
    }
    s
}

/// Write the summary table.
pub fn emit_report(rows: &[AggregateRow], format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Report("no rows to report".into()));
    }
    let body = match format {
        ReportFormat::Csv => csv_string(rows)?,
        ReportFormat::Markdown => markdown_string(rows),
    };
    let path = path.as_ref();
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn read_report_csv(path: impl AsRef<Path>) -> Result<Vec<AggregateRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LongRow<'a> {
    instance_id: &'a str,
    method: &'a str,
    metric: &'a str,
    value: f64,
}

/// Plot-ready long table of every present score, sorted by metric, method, instance.
pub fn write_long_format(rows: &[ScoreRow], path: impl AsRef<Path>) -> Result<()> {
    let mut present: Vec<&ScoreRow> = rows.iter().filter(|r| r.value.is_some()).collect();
    present.sort_by(|a, b| {
        (a.metric.as_str(), method_order(&a.method), a.instance_id.as_str()).cmp(&(
            b.metric.as_str(),
            method_order(&b.method),
            b.instance_id.as_str(),
        ))
    });
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in present {
        w.serialize(LongRow {
            instance_id: &r.instance_id,
            method: &r.method,
            metric: &r.metric,
            value: r.value.expect("filtered"),
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
