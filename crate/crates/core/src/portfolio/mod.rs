//! The empirical pipeline on return panels: ingestion and filtering,
//! hierarchical clustering of the investment universe, lowest-volatility
//! selection, long-only minimum-variance weights, and backtesting with the
//! usual wealth-management metric suite.

mod backtest;
mod ingest;
mod pipeline;
mod weights;

pub use backtest::{
    backtest, compute_metrics, BacktestConfig, BacktestLedger, ClusterMethod, MetricsReport,
    RebalanceRecord, RebalanceSchedule,
};
pub use ingest::{load_returns, InputKind, LoadFilters};
pub use pipeline::{hierarchical_cluster, select_low_vol, HierarchicalOptions};
pub use weights::{min_variance_weights, project_to_simplex};

use chrono::NaiveDate;
use ndarray::Array2;

use crate::error::{Error, Result};

/// Daily simple returns for a universe of tickers, with a mask for days a
/// ticker has no observation (pre-listing, delisted, unfilled gaps).
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    /// T x d simple returns; entries under the mask are meaningless.
    returns: Array2<f64>,
    /// T x d; true where the observation is missing.
    missing: Array2<bool>,
}

impl ReturnPanel {
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        returns: Array2<f64>,
        missing: Array2<bool>,
    ) -> Result<Self> {
        let (t, d) = returns.dim();
        if dates.len() != t || tickers.len() != d || missing.dim() != (t, d) {
            return Err(Error::InvalidInput(format!(
                "panel shapes disagree: {} dates, {} tickers, returns {t}x{d}",
                dates.len(),
                tickers.len()
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("dates must be strictly increasing".into()));
        }
        for ((r, c), &v) in returns.indexed_iter() {
            if !missing[[r, c]] {
                if !v.is_finite() {
                    return Err(Error::InvalidData(format!(
                        "non-finite return for {} at {}",
                        tickers[c], dates[r]
                    )));
                }
                if v <= -1.0 {
                    return Err(Error::InvalidData(format!(
                        "return {v} <= -1 for {} at {}",
                        tickers[c], dates[r]
                    )));
                }
            }
        }
        Ok(Self {
            dates,
            tickers,
            returns,
            missing,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn returns(&self) -> &Array2<f64> {
        &self.returns
    }

    pub fn missing(&self) -> &Array2<bool> {
        &self.missing
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn width(&self) -> usize {
        self.tickers.len()
    }

    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    /// Return at (row, col), with missing entries read as 0 (flat price).
    pub fn return_or_zero(&self, row: usize, col: usize) -> f64 {
        if self.missing[[row, col]] {
            0.0
        } else {
            self.returns[[row, col]]
        }
    }
}

/// Long-only portfolio weights over a selection of tickers.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightVector {
    pub tickers: Vec<String>,
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(tickers: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if tickers.len() != weights.len() {
            return Err(Error::InvalidInput("tickers/weights length mismatch".into()));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { tickers, weights })
    }
}
