//! Return-panel ingestion: CSV parsing, share-class deduplication, linear
//! interpolation of interior price gaps, and history/missingness filters.
//!
//! Input CSV: first column an ISO-8601 date, remaining columns one ticker
//! each, holding either prices or simple returns (declared by the caller).
//! Empty cells are missing observations.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ReturnPanel;
use crate::error::{Error, Result};

/// Whether the CSV columns hold price levels or simple returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    Price,
    Return,
}

/// Ingestion filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadFilters {
    pub input_kind: InputKind,
    /// Minimum non-missing observations a ticker needs over the panel.
    pub min_history: usize,
    /// Maximum missing fraction inside the lookback window.
    pub max_missing_frac: f64,
    /// Window (in rows, from the end) over which missingness is measured;
    /// 0 means the whole panel.
    pub lookback: usize,
    /// Groups of tickers that are share classes of the same company; only
    /// the member with the longest history is kept.
    pub share_class_groups: Vec<Vec<String>>,
}

impl Default for LoadFilters {
    fn default() -> Self {
        Self {
            input_kind: InputKind::Return,
            min_history: 0,
            max_missing_frac: 0.05,
            lookback: 0,
            share_class_groups: Vec::new(),
        }
    }
}

/// Loads, interpolates, deduplicates, and filters a return panel.
pub fn load_returns(path: &Path, filters: &LoadFilters) -> Result<ReturnPanel> {
    load_returns_from(std::fs::File::open(path)?, filters)
}

pub fn load_returns_from<R: Read>(reader: R, filters: &LoadFilters) -> Result<ReturnPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::InvalidCsv(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if headers.len() < 2 {
        return Err(Error::InvalidCsv("need a date column plus at least one ticker".into()));
    }
    let tickers: Vec<String> = headers[1..].to_vec();
    let d = tickers.len();

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::InvalidCsv(e.to_string()))?;
        if record.len() != d + 1 {
            return Err(Error::InvalidCsv(format!(
                "row {} has {} fields, expected {}",
                dates.len() + 1,
                record.len(),
                d + 1
            )));
        }
        let date = NaiveDate::parse_from_str(record[0].trim(), "%Y-%m-%d")
            .map_err(|_| Error::InvalidCsv(format!("unparseable date {:?}", &record[0])))?;
        dates.push(date);
        let row: Vec<Option<f64>> = record
            .iter()
            .skip(1)
            .map(|field| {
                let field = field.trim();
                if field.is_empty() {
                    Ok(None)
                } else {
                    field
                        .parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::InvalidCsv(format!("not a number: {field:?}")))
                }
            })
            .collect::<Result<_>>()?;
        cells.push(row);
    }
    if dates.len() < 2 {
        return Err(Error::InvalidCsv("need at least two rows".into()));
    }
    if dates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidCsv("dates must be strictly increasing".into()));
    }
    let t_in = dates.len();

    // Raw gap counts drive the missingness filter; interpolation happens
    // afterwards, on the tickers' price paths.
    let raw_missing: Vec<Vec<bool>> = (0..d)
        .map(|j| (0..t_in).map(|t| cells[t][j].is_none()).collect())
        .collect();

    // Build a price path per ticker (returns are compounded onto a unit
    // base), interpolate interior gaps linearly on the path, and convert
    // back to simple returns.
    let mut paths: Vec<Vec<Option<f64>>> = vec![vec![None; t_in]; d];
    for (j, path) in paths.iter_mut().enumerate() {
        match filters.input_kind {
            InputKind::Price => {
                for t in 0..t_in {
                    path[t] = cells[t][j];
                }
            }
            InputKind::Return => {
                let mut level = 1.0;
                for t in 0..t_in {
                    match cells[t][j] {
                        Some(r) => {
                            if r <= -1.0 {
                                return Err(Error::InvalidData(format!(
                                    "return {r} <= -1 for {} at {}",
                                    tickers[j], dates[t]
                                )));
                            }
                            level *= 1.0 + r;
                            path[t] = Some(level);
                        }
                        None => path[t] = None,
                    }
                }
                // a return observed on the very first row anchors the path
                // one step before the panel starts; handled in the return
                // reconstruction below
            }
        }
        interpolate_interior(path);
        if path.iter().flatten().any(|&p| p <= 0.0) {
            return Err(Error::InvalidData(format!(
                "nonpositive price on the path of {}",
                tickers[j]
            )));
        }
    }

    // Returns: price mode drops the first row (no prior price); return mode
    // keeps every row, reading the first observed return directly.
    let (t_out, offset) = match filters.input_kind {
        InputKind::Price => (t_in - 1, 1usize),
        InputKind::Return => (t_in, 0usize),
    };
    let out_dates: Vec<NaiveDate> = dates[offset..].to_vec();
    let mut returns = Array2::<f64>::zeros((t_out, d));
    let mut missing = Array2::from_elem((t_out, d), true);
    for j in 0..d {
        for t in 0..t_out {
            let row_in = t + offset;
            let here = paths[j][row_in];
            let prev = if row_in == 0 { None } else { paths[j][row_in - 1] };
            match (prev, here) {
                (Some(p0), Some(p1)) => {
                    returns[[t, j]] = p1 / p0 - 1.0;
                    missing[[t, j]] = false;
                }
                (None, Some(_)) if filters.input_kind == InputKind::Return => {
                    // first observation in return mode is itself a return
                    if cells[row_in][j].is_some() {
                        returns[[t, j]] = cells[row_in][j].unwrap();
                        missing[[t, j]] = false;
                    }
                }
                _ => {}
            }
        }
    }

    // Share-class deduplication: keep the longest history per group.
    let history: Vec<usize> = (0..d)
        .map(|j| (0..t_out).filter(|&t| !missing[[t, j]]).count())
        .collect();
    let mut drop = vec![false; d];
    for group in &filters.share_class_groups {
        let present: Vec<usize> = group
            .iter()
            .filter_map(|name| tickers.iter().position(|t| t == name))
            .collect();
        if present.len() < 2 {
            continue;
        }
        let keep = *present
            .iter()
            .max_by(|&&a, &&b| {
                history[a]
                    .cmp(&history[b])
                    // longest history wins; ties to the lexicographically
                    // first ticker
                    .then_with(|| tickers[b].cmp(&tickers[a]))
            })
            .unwrap();
        for &j in &present {
            if j != keep {
                drop[j] = true;
            }
        }
    }

    // History and missingness filters. Missingness counts raw input gaps
    // over the window, before interpolation.
    let window = if filters.lookback == 0 || filters.lookback > t_in {
        t_in
    } else {
        filters.lookback
    };
    let keep: Vec<usize> = (0..d)
        .filter(|&j| {
            if drop[j] {
                return false;
            }
            if history[j] < filters.min_history {
                return false;
            }
            let miss_in_window = (t_in - window..t_in).filter(|&t| raw_missing[j][t]).count();
            (miss_in_window as f64) <= filters.max_missing_frac * window as f64
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyUniverse);
    }

    let kept_tickers: Vec<String> = keep.iter().map(|&j| tickers[j].clone()).collect();
    let mut kept_returns = Array2::<f64>::zeros((t_out, keep.len()));
    let mut kept_missing = Array2::from_elem((t_out, keep.len()), true);
    for (cj, &j) in keep.iter().enumerate() {
        for t in 0..t_out {
            kept_returns[[t, cj]] = returns[[t, j]];
            kept_missing[[t, cj]] = missing[[t, j]];
        }
    }
    ReturnPanel::new(out_dates, kept_tickers, kept_returns, kept_missing)
}

/// Linear interpolation of interior gaps; leading and trailing gaps stay
/// missing.
fn interpolate_interior(path: &mut [Option<f64>]) {
    let first = path.iter().position(|v| v.is_some());
    let last = path.iter().rposition(|v| v.is_some());
    let (Some(first), Some(last)) = (first, last) else {
        return;
    };
    let mut t = first;
    while t < last {
        if path[t + 1].is_some() {
            t += 1;
            continue;
        }
        let gap_end = (t + 1..=last).find(|&s| path[s].is_some()).unwrap();
        let p0 = path[t].unwrap();
        let p1 = path[gap_end].unwrap();
        let span = (gap_end - t) as f64;
        for (step, slot) in (t + 1..gap_end).enumerate() {
            path[slot] = Some(p0 + (p1 - p0) * (step as f64 + 1.0) / span);
        }
        t = gap_end;
    }
}

/// Tickers usable at `end_row` (inclusive): enough total history and at most
/// the allowed missing fraction inside the trailing window.
pub(crate) fn eligible_tickers(
    panel: &ReturnPanel,
    end_row: usize,
    lookback: usize,
    min_history: usize,
    max_missing_frac: f64,
) -> Vec<usize> {
    let start = end_row + 1 - lookback;
    (0..panel.width())
        .filter(|&j| {
            let hist = (0..=end_row).filter(|&t| !panel.missing()[[t, j]]).count();
            if hist < min_history {
                return false;
            }
            let miss = (start..=end_row).filter(|&t| panel.missing()[[t, j]]).count();
            (miss as f64) <= max_missing_frac * lookback as f64
        })
        .collect()
}
