//! Summary statistics, histograms, and CSV output.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Linear-interpolation percentile of ascending `sorted`, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p05: f64,
    pub p25: f64,
    pub p75: f64,
    pub p95: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    /// Statistics of a non-empty sample. The mean is summed in input order.
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Self {
            count: values.len(),
            mean,
            median: percentile(&sorted, 0.5),
            p05: percentile(&sorted, 0.05),
            p25: percentile(&sorted, 0.25),
            p75: percentile(&sorted, 0.75),
            p95: percentile(&sorted, 0.95),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        }
    }
}

/// `bins + 1` equally spaced edges over `[0, max]`; a zero `max` widens to `[0, 1]`.
pub fn histogram_edges(max: f64, bins: usize) -> Vec<f64> {
    let top = if max > 0.0 { max } else { 1.0 };
    let mut edges: Vec<f64> = (0..=bins).map(|i| top * i as f64 / bins as f64).collect();
    edges[bins] = top;
    edges
}

/// Counts per bin; bins are half-open except the last, which includes its
/// upper edge. Values outside the edges are not counted.
pub fn histogram_counts(values: &[f64], edges: &[f64]) -> Vec<u64> {
    let bins = edges.len() - 1;
    let mut counts = vec![0; bins];
    for &v in values {
        if v < edges[0] || v > edges[bins] {
            continue;
        }
        let idx = edges[1..].partition_point(|&e| e <= v).min(bins - 1);
        counts[idx] += 1;
    }
    counts
}

/// Serializes `rows` as CSV with a header row.
pub fn write_csv<T: Serialize, W: Write>(out: W, rows: &[T]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(io::Error::other)?;
    }
    w.flush()
}

pub fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> io::Result<()> {
    write_csv(io::BufWriter::new(File::create(path)?), rows)
}

/// Reads CSV rows written by [`write_csv`].
pub fn read_csv_file<T: serde::de::DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(io::Error::other)?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(io::Error::other)
}
