//! Rolling-window informed-flow features for bounded-price binary markets.
//!
//! All features are causal: each function sees only the trades (or series
//! points) timestamped at or before the evaluation time. Prices live in
//! [0, 1], so log-return based diagnostics clip away from the boundary
//! before taking logs.
//!
//! - order imbalance  OI = (V_buy - V_sell) / (V_buy + V_sell)
//! - two-sidedness    TS = 1 - |OI|
//! - VPIN             trailing mean of per-volume-bucket |imbalance|
//! - Kyle's lambda    OLS slope of per-trade price change on signed size
//! - variance ratio   VR(k) = Var(k-step log returns) / (k Var(1-step))
//! - size kurtosis    bias-corrected excess kurtosis of token sizes
//! - Hawkes branching alpha/beta of an exponential-kernel fit to arrivals

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hawkes;
use crate::market::{PriceSeries, Side, Trade};
use crate::stats;
use crate::time::{format_duration, Ts, SECS_PER_DAY};

/// Price clip bounds for log-return computation.
pub const LOG_CLIP: (f64, f64) = (0.001, 0.999);

#[derive(Debug, Error)]
pub enum MicroError {
    #[error("empty window")]
    EmptyWindow,
    #[error("not enough volume for a single complete bucket")]
    InsufficientVolume,
    #[error("degenerate regression: zero signed-flow variance")]
    Degenerate,
    #[error("insufficient history: need {need} returns, have {have}")]
    InsufficientHistory { need: usize, have: usize },
    #[error("undefined: {0}")]
    Undefined(&'static str),
    #[error(transparent)]
    Hawkes(#[from] hawkes::HawkesError),
    #[error(transparent)]
    Series(#[from] crate::market::MarketError),
}

/// Window and bucket parameters for the rolling features.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSpec {
    /// Order-imbalance windows in seconds (default 5m, 15m, 1h).
    pub oi_windows_secs: Vec<i64>,
    /// Volume per VPIN bucket in tokens; None derives a per-category default
    /// from the data (median daily token volume / 50).
    pub vpin_bucket_volume: Option<f64>,
    /// Trailing buckets averaged into VPIN.
    pub vpin_trailing_buckets: usize,
    /// Trade-count window for Kyle's lambda and size kurtosis.
    pub lambda_window: usize,
    /// Variance-ratio horizon multiple.
    pub vr_k: usize,
    /// Variance-ratio sampling resolution in seconds.
    pub vr_delta_secs: i64,
    /// Arrival window for the Hawkes branching fit, in seconds.
    pub hawkes_window_secs: i64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            oi_windows_secs: vec![300, 900, 3_600],
            vpin_bucket_volume: None,
            vpin_trailing_buckets: 50,
            lambda_window: 200,
            vr_k: 6,
            vr_delta_secs: 300,
            hawkes_window_secs: 3_600,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.oi_windows_secs.is_empty() || self.oi_windows_secs.iter().any(|w| *w <= 0) {
            return Err("oi windows must be positive".into());
        }
        if let Some(v) = self.vpin_bucket_volume {
            if !(v > 0.0) {
                return Err("vpin bucket volume must be positive".into());
            }
        }
        if self.vpin_trailing_buckets == 0
            || self.lambda_window < 2
            || self.vr_k < 2
            || self.vr_delta_secs <= 0
            || self.hawkes_window_secs <= 0
        {
            return Err("window parameters must be positive".into());
        }
        Ok(())
    }
}

/// Trades with timestamps in (t - delta, t].
pub fn window_slice(trades: &[Trade], t: Ts, delta_secs: i64) -> &[Trade] {
    let lo = trades.partition_point(|tr| tr.ts.unix() <= t.unix() - delta_secs);
    let hi = trades.partition_point(|tr| tr.ts <= t);
    &trades[lo..hi]
}

fn buy_sell_volumes(trades: &[Trade]) -> (f64, f64) {
    let mut buy = 0.0;
    let mut sell = 0.0;
    for t in trades {
        match t.side {
            Side::BuyYes => buy += t.size,
            Side::SellYes => sell += t.size,
        }
    }
    (buy, sell)
}

/// Signed order imbalance in [-1, 1] over a window of trades.
pub fn order_imbalance(trades: &[Trade]) -> Result<f64, MicroError> {
    let (buy, sell) = buy_sell_volumes(trades);
    let total = buy + sell;
    if total <= 0.0 {
        return Err(MicroError::EmptyWindow);
    }
    Ok((buy - sell) / total)
}

/// Two-sidedness in [0, 1]: 0 is one-sided pressure, 1 is balanced flow.
pub fn two_sidedness(trades: &[Trade]) -> Result<f64, MicroError> {
    let (buy, sell) = buy_sell_volumes(trades);
    let total = buy + sell;
    if total <= 0.0 {
        return Err(MicroError::EmptyWindow);
    }
    Ok(1.0 - (buy - sell).abs() / total)
}

/// Per-bucket absolute imbalances |V_buy - V_sell| / V over equal-volume
/// buckets, splitting trades pro-rata across bucket boundaries.
pub fn bucket_toxicities(trades: &[Trade], bucket_volume: f64) -> Vec<f64> {
    let mut toxicities = Vec::new();
    let mut fill = 0.0; // volume accumulated into the current bucket
    let mut buy_fill = 0.0;
    for t in trades {
        let mut remaining = t.size;
        let buy_fraction = match t.side {
            Side::BuyYes => 1.0,
            Side::SellYes => 0.0,
        };
        while remaining > 0.0 {
            let room = bucket_volume - fill;
            let take = remaining.min(room);
            fill += take;
            buy_fill += take * buy_fraction;
            remaining -= take;
            if fill >= bucket_volume {
                let sell_fill = fill - buy_fill;
                toxicities.push((buy_fill - sell_fill).abs() / bucket_volume);
                fill = 0.0;
                buy_fill = 0.0;
            }
        }
    }
    toxicities
}

/// VPIN: trailing mean of the last `trailing` bucket toxicities.
pub fn vpin(trades: &[Trade], bucket_volume: f64, trailing: usize) -> Result<f64, MicroError> {
    if !(bucket_volume > 0.0) {
        return Err(MicroError::Undefined("bucket volume must be positive"));
    }
    let tox = bucket_toxicities(trades, bucket_volume);
    if tox.is_empty() {
        return Err(MicroError::InsufficientVolume);
    }
    let tail = &tox[tox.len().saturating_sub(trailing)..];
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Default VPIN bucket volume from the data: median daily token volume / 50.
pub fn default_bucket_volume(trades: &[Trade]) -> Option<f64> {
    if trades.is_empty() {
        return None;
    }
    let mut per_day: BTreeMap<i64, f64> = BTreeMap::new();
    for t in trades {
        *per_day.entry(t.ts.unix().div_euclid(SECS_PER_DAY)).or_insert(0.0) += t.size;
    }
    let mut daily: Vec<f64> = per_day.into_values().collect();
    daily.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = stats::percentile(&daily, 0.5);
    if median > 0.0 {
        Some(median / 50.0)
    } else {
        None
    }
}

/// Kyle's lambda: OLS slope of per-trade price changes on signed trade size.
/// The intercept is fitted and discarded; the slope is the per-unit impact.
pub fn kyle_lambda_fit(trades: &[Trade]) -> Result<stats::OlsFit, MicroError> {
    if trades.len() < 2 {
        return Err(MicroError::InsufficientHistory {
            need: 2,
            have: trades.len(),
        });
    }
    let mut flows = Vec::with_capacity(trades.len() - 1);
    let mut dps = Vec::with_capacity(trades.len() - 1);
    for w in trades.windows(2) {
        flows.push(w[1].signed_size());
        dps.push(w[1].price - w[0].price);
    }
    stats::ols(&flows, &dps).ok_or(MicroError::Degenerate)
}

pub fn kyle_lambda(trades: &[Trade]) -> Result<f64, MicroError> {
    kyle_lambda_fit(trades).map(|f| f.slope)
}

fn clipped_log(p: f64) -> f64 {
    p.clamp(LOG_CLIP.0, LOG_CLIP.1).ln()
}

/// Variance ratio VR(k) on log returns sampled every `delta_secs` up to `t`.
///
/// Uncentered second moments, so a persistent drift inflates the ratio
/// instead of vanishing into the sample mean: under a driftless random walk
/// VR(k) tends to 1, directional pressure pushes it above one, and mean
/// reversion below. Needs at least 2k one-step returns of history.
pub fn variance_ratio(
    series: &PriceSeries,
    k: usize,
    delta_secs: i64,
    t: Ts,
) -> Result<f64, MicroError> {
    let first = series.first_ts().ok_or(MicroError::EmptyWindow)?;
    if k < 2 {
        return Err(MicroError::Undefined("k must be at least 2"));
    }
    // Sampling grid anchored at t, reaching back to the series start.
    let span = t - first;
    if span < 0 {
        return Err(MicroError::InsufficientHistory { need: 2 * k, have: 0 });
    }
    let n_points = (span / delta_secs) as usize + 1;
    let n_returns = n_points.saturating_sub(1);
    if n_returns < 2 * k {
        return Err(MicroError::InsufficientHistory {
            need: 2 * k,
            have: n_returns,
        });
    }
    let mut log_prices = Vec::with_capacity(n_points);
    for j in (0..n_points).rev() {
        let ts = t - (j as i64) * delta_secs;
        log_prices.push(clipped_log(series.price_at(ts)?));
    }
    let mean_square = |xs: &[f64]| xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    let one_step: Vec<f64> = log_prices.windows(2).map(|w| w[1] - w[0]).collect();
    let k_step: Vec<f64> = (k..log_prices.len())
        .map(|i| log_prices[i] - log_prices[i - k])
        .collect();
    let ms_1 = mean_square(&one_step);
    let ms_k = mean_square(&k_step);
    if ms_1 == 0.0 {
        return Err(MicroError::Undefined("zero short-horizon variance"));
    }
    Ok(ms_k / (k as f64 * ms_1))
}

/// Bias-corrected excess kurtosis of token trade sizes in the window.
pub fn trade_size_kurtosis(trades: &[Trade]) -> Result<f64, MicroError> {
    if trades.len() < 4 {
        return Err(MicroError::InsufficientHistory {
            need: 4,
            have: trades.len(),
        });
    }
    let sizes: Vec<f64> = trades.iter().map(|t| t.size).collect();
    stats::excess_kurtosis_g2(&sizes).ok_or(MicroError::Undefined("zero size variance"))
}

/// Branching ratio of an exponential-kernel Hawkes fit to the trade arrival
/// times in (t - window, t].
pub fn hawkes_branching(trades: &[Trade], window_secs: i64, t: Ts) -> Result<f64, MicroError> {
    let slice = window_slice(trades, t, window_secs);
    let start = (t.unix() - window_secs) as f64;
    let times: Vec<f64> = slice.iter().map(|tr| tr.ts.unix() as f64 - start).collect();
    let fit = hawkes::fit(&times, window_secs as f64)?;
    Ok(fit.branching)
}

/// One feature snapshot; absent values are features whose preconditions the
/// window did not meet.
#[derive(Debug, Clone, Serialize)]
pub struct MicroFeatures {
    pub market_id: String,
    pub at: Ts,
    pub oi: BTreeMap<String, Option<f64>>,
    pub vpin: Option<f64>,
    pub kyle_lambda: Option<f64>,
    pub vr: Option<f64>,
    pub ts: Option<f64>,
    pub size_kurtosis: Option<f64>,
    pub hawkes_branching: Option<f64>,
}

/// Compute the full snapshot at time `t` from trades already filtered to one
/// market. Only data timestamped at or before `t` participates; the series
/// minute containing `t` is treated as complete, so live evaluation should
/// run at minute boundaries the way [`stream_features`] does.
pub fn snapshot(
    trades: &[Trade],
    series: &PriceSeries,
    t: Ts,
    spec: &WindowSpec,
    bucket_volume: f64,
) -> MicroFeatures {
    let upto = &trades[..trades.partition_point(|tr| tr.ts <= t)];
    let mut oi = BTreeMap::new();
    let mut largest: Option<i64> = None;
    for &w in &spec.oi_windows_secs {
        let slice = window_slice(upto, t, w);
        oi.insert(format_duration(w), order_imbalance(slice).ok());
        largest = Some(largest.map_or(w, |l: i64| l.max(w)));
    }
    let ts_value = largest.and_then(|w| two_sidedness(window_slice(upto, t, w)).ok());
    let lambda_slice = &upto[upto.len().saturating_sub(spec.lambda_window)..];
    MicroFeatures {
        market_id: series.market_id.clone(),
        at: t,
        oi,
        vpin: vpin(upto, bucket_volume, spec.vpin_trailing_buckets).ok(),
        kyle_lambda: kyle_lambda(lambda_slice).ok(),
        vr: variance_ratio(series, spec.vr_k, spec.vr_delta_secs, t).ok(),
        ts: ts_value,
        size_kurtosis: trade_size_kurtosis(lambda_slice).ok(),
        hawkes_branching: hawkes_branching(upto, spec.hawkes_window_secs, t).ok(),
    }
}

/// Streaming mode: one snapshot per minute boundary from the first to the
/// last trade.
pub fn stream_features(
    trades: &[Trade],
    series: &PriceSeries,
    spec: &WindowSpec,
    bucket_volume: f64,
) -> Vec<MicroFeatures> {
    let (Some(first), Some(last)) = (trades.first(), trades.last()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut minute = first.ts.minute_floor() + 60;
    let end = last.ts.minute_floor() + 60;
    while minute <= end {
        out.push(snapshot(trades, series, minute, spec, bucket_volume));
        minute = minute + 60;
    }
    out
}
