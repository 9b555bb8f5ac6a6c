//! Walk-forward backtest: at each rebalance date, filter the universe over
//! the trailing window, cluster it, take the lowest-volatility member of
//! each cluster, weight the selection by the long-only minimum-variance
//! allocation, and hold (weights drifting with returns) until the next
//! rebalance. Metrics follow the usual wealth-management conventions:
//! 252-day annualization, zero risk-free rate, VAMI base 1000.

use chrono::{Datelike, NaiveDate};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::ingest::eligible_tickers;
use super::pipeline::{hierarchical_cluster, select_low_vol, HierarchicalOptions};
use super::weights::min_variance_weights_named;
use super::ReturnPanel;
use crate::baselines::{acc_cluster, cord_dissimilarity, correlation_dissimilarity, kmedoids};
use crate::datamodel::{standardize, CovarianceEstimate, CovarianceKind};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;

/// When portfolios are re-formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RebalanceSchedule {
    /// First trading day of the anchor month each year.
    Annual,
    /// First trading day of every third month from the anchor.
    Quarterly,
    /// First trading day of every month.
    Monthly,
    /// Every n-th trading day.
    EveryNDays(usize),
}

/// Which clusterer drives stock selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterMethod {
    /// Robust regression for k1 top-level groups, linkage for k2 within.
    DroAcc,
    /// Correlation-profile linkage straight to k1*k2 clusters.
    Acc,
    /// k-medoids on 1 - rho^2 with k1*k2 clusters.
    KMedoids,
}

/// Backtest controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub schedule: RebalanceSchedule,
    /// Month (1-12) anchoring annual/quarterly schedules.
    pub anchor_month: u32,
    /// Trailing window length (trading days) for clustering and weights.
    pub lookback: usize,
    pub k1: usize,
    pub k2: usize,
    pub method: ClusterMethod,
    /// Ticker used as the benchmark; excluded from the universe.
    pub benchmark: Option<String>,
    /// Minimum non-missing history a ticker needs to be eligible.
    pub min_history: usize,
    /// Maximum missing fraction inside the lookback window.
    pub max_missing_frac: f64,
    /// Warn when the common window of the selected stocks is shorter.
    pub min_common_window: usize,
    pub seed: u64,
    pub cluster_opts: HierarchicalOptions,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            schedule: RebalanceSchedule::Annual,
            anchor_month: 2,
            lookback: 500,
            k1: 6,
            k2: 6,
            method: ClusterMethod::DroAcc,
            benchmark: None,
            min_history: 0,
            max_missing_frac: 0.05,
            min_common_window: 250,
            seed: 0,
            cluster_opts: HierarchicalOptions::default(),
        }
    }
}

/// One portfolio formation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RebalanceRecord {
    pub date: NaiveDate,
    pub selections: Vec<String>,
    pub weights: Vec<f64>,
    /// Length of the common return window the covariance was fit on.
    pub common_window: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

/// Daily portfolio results and the formation history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestLedger {
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
    /// `vami[t] = 1000 * prod_{s<=t} (1 + r_s)`.
    pub vami: Vec<f64>,
    pub rebalances: Vec<RebalanceRecord>,
}

impl BacktestLedger {
    pub fn from_returns(dates: Vec<NaiveDate>, returns: Vec<f64>) -> Result<Self> {
        if dates.len() != returns.len() {
            return Err(Error::InvalidInput("dates/returns length mismatch".into()));
        }
        let mut vami = Vec::with_capacity(returns.len());
        let mut level = 1000.0;
        for r in &returns {
            level *= 1.0 + r;
            vami.push(level);
        }
        Ok(Self {
            dates,
            returns,
            vami,
            rebalances: Vec::new(),
        })
    }

    pub fn ending_vami(&self) -> f64 {
        self.vami.last().copied().unwrap_or(1000.0)
    }
}

/// The metric suite. Ratios that divide by zero are `None` and listed in
/// `undefined`. Positive periods count r > 0; negative periods count
/// r <= 0, so the two always sum to the total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ending_vami: f64,
    pub max_drawdown: f64,
    pub peak_to_valley: Option<(NaiveDate, NaiveDate)>,
    pub recovery_days: Option<i64>,
    pub sharpe_ratio: Option<f64>,
    pub sortino_ratio: Option<f64>,
    pub calmar_ratio: Option<f64>,
    pub ann_volatility: f64,
    pub ann_downside_volatility: f64,
    pub annualized_return: f64,
    pub correlation: Option<f64>,
    pub beta: Option<f64>,
    pub positive_periods: usize,
    pub negative_periods: usize,
    pub total_periods: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub undefined: Vec<String>,
}

const TRADING_DAYS: f64 = 252.0;

/// Computes the metric suite from a ledger, optionally against a benchmark
/// return stream aligned to the ledger dates.
pub fn compute_metrics(ledger: &BacktestLedger, benchmark: Option<&[f64]>) -> Result<MetricsReport> {
    let t = ledger.returns.len();
    if t == 0 {
        return Err(Error::InvalidInput("empty ledger".into()));
    }
    if let Some(b) = benchmark {
        if b.len() != t {
            return Err(Error::InvalidInput(format!(
                "benchmark has {} returns for {t} ledger days",
                b.len()
            )));
        }
    }
    let mut undefined = Vec::new();

    let ending = ledger.ending_vami();
    let ann_return = (ending / 1000.0).powf(TRADING_DAYS / t as f64) - 1.0;

    let mean = ledger.returns.iter().sum::<f64>() / t as f64;
    let var = if t > 1 {
        ledger
            .returns
            .iter()
            .map(|r| (r - mean) * (r - mean))
            .sum::<f64>()
            / (t as f64 - 1.0)
    } else {
        0.0
    };
    let ann_vol = var.sqrt() * TRADING_DAYS.sqrt();
    let downside =
        (ledger.returns.iter().map(|&r| r.min(0.0).powi(2)).sum::<f64>() / t as f64).sqrt();
    let ann_downside = downside * TRADING_DAYS.sqrt();

    let sharpe = if ann_vol > 0.0 {
        Some(ann_return / ann_vol)
    } else {
        undefined.push("sharpe_ratio".into());
        None
    };
    let sortino = if ann_downside > 0.0 {
        Some(ann_return / ann_downside)
    } else {
        undefined.push("sortino_ratio".into());
        None
    };

    // drawdown on the VAMI path, base included as the starting peak
    let mut peak = 1000.0;
    let mut peak_idx: Option<usize> = None; // None = the base point
    let mut mdd = 0.0f64;
    let mut valley_idx = 0usize;
    let mut mdd_peak_idx: Option<usize> = None;
    for (i, &v) in ledger.vami.iter().enumerate() {
        if v > peak {
            peak = v;
            peak_idx = Some(i);
        }
        let dd = 1.0 - v / peak;
        if dd > mdd {
            mdd = dd;
            valley_idx = i;
            mdd_peak_idx = peak_idx;
        }
    }
    let peak_to_valley = if mdd > 0.0 {
        let peak_date = mdd_peak_idx
            .map(|i| ledger.dates[i])
            .unwrap_or(ledger.dates[0]);
        Some((peak_date, ledger.dates[valley_idx]))
    } else {
        None
    };
    let recovery_days = if mdd > 0.0 {
        let peak_level = mdd_peak_idx.map(|i| ledger.vami[i]).unwrap_or(1000.0);
        (valley_idx + 1..t)
            .find(|&i| ledger.vami[i] >= peak_level)
            .map(|i| (ledger.dates[i] - ledger.dates[valley_idx]).num_days())
    } else {
        None
    };

    let calmar = if mdd > 0.0 {
        Some(ann_return / mdd)
    } else {
        undefined.push("calmar_ratio".into());
        None
    };

    let (correlation, beta) = match benchmark {
        Some(b) => {
            let bm = b.iter().sum::<f64>() / t as f64;
            let bvar = b.iter().map(|r| (r - bm) * (r - bm)).sum::<f64>() / (t as f64 - 1.0);
            let cov = ledger
                .returns
                .iter()
                .zip(b.iter())
                .map(|(r, rb)| (r - mean) * (rb - bm))
                .sum::<f64>()
                / (t as f64 - 1.0);
            if bvar > 0.0 && var > 0.0 {
                (
                    Some(cov / (var.sqrt() * bvar.sqrt())),
                    Some(cov / bvar),
                )
            } else {
                undefined.push("correlation".into());
                undefined.push("beta".into());
                (None, None)
            }
        }
        None => (None, None),
    };

    let positive = ledger.returns.iter().filter(|&&r| r > 0.0).count();
    Ok(MetricsReport {
        ending_vami: ending,
        max_drawdown: mdd,
        peak_to_valley,
        recovery_days,
        sharpe_ratio: sharpe,
        sortino_ratio: sortino,
        calmar_ratio: calmar,
        ann_volatility: ann_vol,
        ann_downside_volatility: ann_downside,
        annualized_return: ann_return,
        correlation,
        beta,
        positive_periods: positive,
        negative_periods: t - positive,
        total_periods: t,
        undefined,
    })
}

/// Runs the walk-forward backtest.
pub fn backtest(panel: &ReturnPanel, config: &BacktestConfig) -> Result<(BacktestLedger, MetricsReport)> {
    if config.k1 == 0 || config.k2 == 0 || config.lookback < 2 {
        return Err(Error::InvalidInput("k1, k2, and lookback must be positive".into()));
    }
    let t_total = panel.len();
    if t_total < config.lookback + 2 {
        return Err(Error::InsufficientHistory {
            required: config.lookback + 2,
            available: t_total,
        });
    }
    let bench_col = match &config.benchmark {
        Some(name) => Some(panel.ticker_index(name).ok_or_else(|| {
            Error::InvalidInput(format!("benchmark ticker {name} not in the panel"))
        })?),
        None => None,
    };

    let rebalance_rows = schedule_rows(panel.dates(), config);
    let first = *rebalance_rows.first().ok_or(Error::InsufficientHistory {
        required: config.lookback,
        available: t_total,
    })?;

    let mut daily_dates = Vec::new();
    let mut daily_returns = Vec::new();
    let mut rebalances = Vec::new();
    let mut held: Option<(Vec<usize>, Vec<f64>)> = None;

    for t in first..t_total {
        if rebalance_rows.contains(&t) {
            let record = form_portfolio(panel, t, config, bench_col)?;
            let cols: Vec<usize> = record
                .selections
                .iter()
                .map(|name| panel.ticker_index(name).expect("selection from the panel"))
                .collect();
            held = Some((cols, record.weights.clone()));
            rebalances.push(record);
        }
        // returns accrue from the day after the first formation
        if t == first {
            continue;
        }
        let (cols, weights) = held.as_mut().expect("portfolio formed at the first date");
        let mut day_return = 0.0;
        for (slot, &j) in cols.iter().enumerate() {
            day_return += weights[slot] * panel.return_or_zero(t, j);
        }
        daily_dates.push(panel.dates()[t]);
        daily_returns.push(day_return);
        // drift
        let gross = 1.0 + day_return;
        if gross > 0.0 {
            for (slot, &j) in cols.iter().enumerate() {
                weights[slot] *= (1.0 + panel.return_or_zero(t, j)) / gross;
            }
        }
    }

    let mut ledger = BacktestLedger::from_returns(daily_dates, daily_returns)?;
    ledger.rebalances = rebalances;
    let bench_returns: Option<Vec<f64>> = bench_col.map(|j| {
        ledger
            .dates
            .iter()
            .map(|date| {
                let row = panel.dates().iter().position(|d| d == date).unwrap();
                panel.return_or_zero(row, j)
            })
            .collect()
    });
    let metrics = compute_metrics(&ledger, bench_returns.as_deref())?;
    Ok((ledger, metrics))
}

/// Builds one portfolio at row `t` using the trailing lookback window.
fn form_portfolio(
    panel: &ReturnPanel,
    t: usize,
    config: &BacktestConfig,
    bench_col: Option<usize>,
) -> Result<RebalanceRecord> {
    let lookback = config.lookback;
    let mut warnings = Vec::new();
    let mut universe: Vec<usize> =
        eligible_tickers(panel, t, lookback, config.min_history, config.max_missing_frac)
            .into_iter()
            .filter(|&j| Some(j) != bench_col)
            .collect();
    // zero-variance columns cannot be standardized or clustered
    universe.retain(|&j| {
        let col: Vec<f64> = (t + 1 - lookback..=t).map(|s| panel.return_or_zero(s, j)).collect();
        let mean = col.iter().sum::<f64>() / lookback as f64;
        col.iter().any(|v| (v - mean).abs() > 1e-12)
    });
    if universe.len() < config.k1 * config.k2 {
        return Err(Error::InvalidK {
            k: config.k1 * config.k2,
            d: universe.len(),
        });
    }

    let window = window_matrix(panel, t, lookback, &universe);
    let seed_t = derive_seed(config.seed, t as u64);
    let partition = match config.method {
        ClusterMethod::DroAcc => hierarchical_cluster(
            window.view(),
            config.k1,
            config.k2,
            &config.cluster_opts,
            seed_t,
        )?,
        ClusterMethod::Acc => {
            let std = standardize(&window)?;
            acc_cluster(&cord_dissimilarity(&std)?, config.k1 * config.k2)?
        }
        ClusterMethod::KMedoids => {
            let std = standardize(&window)?;
            kmedoids(&correlation_dissimilarity(&std)?, config.k1 * config.k2, seed_t)?
        }
    };

    let names: Vec<String> = universe
        .iter()
        .map(|&j| panel.tickers()[j].clone())
        .collect();
    let picked_slots = select_low_vol(window.view(), &names, &partition)?;
    let picked_cols: Vec<usize> = picked_slots.iter().map(|&s| universe[s]).collect();

    // covariance over the longest common window of the selections
    let common_start = (t + 1 - lookback..=t)
        .find(|&s| picked_cols.iter().all(|&j| !panel.missing()[[s, j]]))
        .unwrap_or(t + 1 - lookback);
    let common_window = t - common_start + 1;
    if common_window < config.min_common_window {
        warnings.push(format!(
            "common window {common_window} below the configured {}",
            config.min_common_window
        ));
    }
    let k = picked_cols.len();
    let mut sub = Array2::<f64>::zeros((common_window, k));
    for (slot, &j) in picked_cols.iter().enumerate() {
        for (r, s) in (common_start..=t).enumerate() {
            sub[[r, slot]] = panel.return_or_zero(s, j);
        }
    }
    let cov = sample_covariance(sub.view());
    let cov = CovarianceEstimate::new(cov, CovarianceKind::SampleSecondMoment)?;
    let picked_names: Vec<String> = picked_cols
        .iter()
        .map(|&j| panel.tickers()[j].clone())
        .collect();
    let weights = min_variance_weights_named(&cov, Some(&picked_names))?;

    Ok(RebalanceRecord {
        date: panel.dates()[t],
        selections: picked_names,
        weights: weights.weights,
        common_window,
        warnings,
    })
}

fn window_matrix(panel: &ReturnPanel, t: usize, lookback: usize, cols: &[usize]) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((lookback, cols.len()));
    for (cj, &j) in cols.iter().enumerate() {
        for (r, s) in (t + 1 - lookback..=t).enumerate() {
            out[[r, cj]] = panel.return_or_zero(s, j);
        }
    }
    out
}

fn sample_covariance(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, k) = x.dim();
    let mean: Vec<f64> = (0..k).map(|j| x.column(j).sum() / n as f64).collect();
    let mut cov = Array2::<f64>::zeros((k, k));
    for a in 0..k {
        for b in a..k {
            let mut acc = 0.0;
            for t in 0..n {
                acc += (x[[t, a]] - mean[a]) * (x[[t, b]] - mean[b]);
            }
            let v = acc / (n as f64 - 1.0);
            cov[[a, b]] = v;
            cov[[b, a]] = v;
        }
    }
    cov
}

/// Rows at which a rebalance happens: the first eligible row (enough
/// lookback) and every schedule boundary after it.
fn schedule_rows(dates: &[NaiveDate], config: &BacktestConfig) -> Vec<usize> {
    let first_eligible = config.lookback - 1;
    if first_eligible >= dates.len() {
        return Vec::new();
    }
    let mut rows = Vec::new();
    match config.schedule {
        RebalanceSchedule::EveryNDays(n) => {
            let n = n.max(1);
            let mut t = first_eligible;
            while t < dates.len() {
                rows.push(t);
                t += n;
            }
        }
        _ => {
            let period = |date: &NaiveDate| -> Option<i32> {
                let month = date.month();
                match config.schedule {
                    RebalanceSchedule::Monthly => Some(date.year() * 12 + month as i32),
                    RebalanceSchedule::Quarterly => {
                        let offset = (month as i32 - config.anchor_month as i32).rem_euclid(12);
                        if offset % 3 == 0 {
                            Some(date.year() * 12 + month as i32)
                        } else {
                            None
                        }
                    }
                    RebalanceSchedule::Annual => {
                        if month == config.anchor_month {
                            Some(date.year())
                        } else {
                            None
                        }
                    }
                    RebalanceSchedule::EveryNDays(_) => unreachable!(),
                }
            };
            let mut last_period: Option<i32> = None;
            let mut started = false;
            for (t, date) in dates.iter().enumerate() {
                if t < first_eligible {
                    // periods before eligibility never trigger, but track
                    // them so the first eligible boundary is a fresh one
                    last_period = period(date).or(last_period);
                    continue;
                }
                match period(date) {
                    Some(p) if Some(p) != last_period => {
                        last_period = Some(p);
                        rows.push(t);
                        started = true;
                    }
                    Some(_) => {}
                    None => {}
                }
            }
            if !started {
                // no schedule boundary inside the data: fall back to the
                // first eligible day so short panels still run
                rows.push(first_eligible);
            }
        }
    }
    rows
}
