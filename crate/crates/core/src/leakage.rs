//! Event-resolved information leakage scoring.
//!
//! For a resolved binary market with opening price p(T_open), news-time price
//! p(T_news) and binary outcome o, the leakage score is the share of the total
//! information move that happened before the news:
//!
//! ```text
//! delta_pre = p(T_news) - p(T_open)
//! delta_total = o - p(T_open)
//! ILS = delta_pre / delta_total        (defined when |delta_total| > epsilon)
//! ```
//!
//! Three scope conditions gate interpretation: a trivial-resolution threshold
//! on |delta_total|, an edge-effect band on the opening price, and an
//! anchor-sensitivity robustness check across at least two anchor
//! specifications. Violations are flagged, never silently dropped.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{
    AnchorTier, MarketError, MarketRecord, NewsAnchor, PriceSeries, ResolutionType, Trade,
};
use crate::time::{format_duration, Ts};
use crate::wallet::{mean_wallet_novelty, MeanNovelty, NoveltyConfig, WalletProfile};

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_EDGE_BAND: f64 = 0.4;
pub const DEFAULT_ANCHOR_MAX_DELTA: f64 = 0.25;
pub const DEFAULT_TOP_K: usize = 10;

/// Default multi-window offsets: 30m, 2h, 6h, 24h, 7d.
pub const DEFAULT_WINDOWS_SECS: [i64; 5] = [1_800, 7_200, 21_600, 86_400, 604_800];

/// Scope-condition parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScopeConfig {
    /// Trivial-resolution threshold on |delta_total|.
    pub epsilon: f64,
    /// Edge band: opening prices with |p - 0.5| > edge_band are flagged.
    pub edge_band: f64,
    /// Maximum pairwise |ILS| difference for the anchor robustness check.
    pub anchor_robustness_max_delta: f64,
    /// Proxy offsets (hours before resolution) used to synthesize additional
    /// anchor specifications when the input supplies fewer than two.
    pub proxy_offsets_hours: Vec<f64>,
}

impl Default for ScopeConfig {
    fn default() -> Self {
        ScopeConfig {
            epsilon: DEFAULT_EPSILON,
            edge_band: DEFAULT_EDGE_BAND,
            anchor_robustness_max_delta: DEFAULT_ANCHOR_MAX_DELTA,
            proxy_offsets_hours: vec![24.0, 6.0],
        }
    }
}

impl ScopeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.epsilon > 0.0) {
            return Err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.edge_band > 0.0 && self.edge_band < 0.5) {
            return Err(format!("edge_band must lie in (0, 0.5), got {}", self.edge_band));
        }
        if !(self.anchor_robustness_max_delta > 0.0) {
            return Err("anchor_robustness_max_delta must be positive".into());
        }
        if self.proxy_offsets_hours.len() < 2 {
            return Err("at least two anchor specifications are required".into());
        }
        Ok(())
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum ScopeFlag {
    #[serde(rename = "EDGE_EFFECT")]
    EdgeEffect,
    #[serde(rename = "TRIVIAL_RESOLUTION")]
    TrivialResolution,
    #[serde(rename = "ANCHOR_UNSTABLE")]
    AnchorUnstable,
}

#[derive(Debug, Error)]
pub enum LeakageError {
    #[error("market is {found:?}, not event-resolved")]
    WrongResolutionType { found: ResolutionType },
    #[error("anchor {t_news} outside market lifetime [{open}, {resolve}]")]
    AnchorOutOfRange { t_news: Ts, open: Ts, resolve: Ts },
    #[error("proxy anchor t_news {got} disagrees with resolve_ts - offset = {expected}")]
    InvalidProxyAnchor { got: Ts, expected: Ts },
    #[error("no usable news anchor for market {market_id}")]
    NoAnchor { market_id: String },
    #[error("anchor sensitivity needs at least 2 anchors, got {n}")]
    InsufficientAnchors { n: usize },
    #[error("zero total volume")]
    ZeroVolume,
    #[error("fewer than two price points in the pre-news window")]
    JumpUndefined,
    #[error("no winning trades")]
    NoWinningTrades,
    #[error(transparent)]
    Series(#[from] MarketError),
}

/// Core score output: ILS plus the quantities it is built from.
#[derive(Debug, Clone, Serialize)]
pub struct IlsResult {
    /// None means MISSING (trivial resolution).
    pub ils: Option<f64>,
    pub delta_pre: f64,
    pub delta_total: f64,
    pub p_open: f64,
    pub p_news: f64,
    pub flags: BTreeSet<ScopeFlag>,
}

fn check_event_market(market: &MarketRecord) -> Result<(), LeakageError> {
    if market.resolution_type != ResolutionType::EventResolved {
        return Err(LeakageError::WrongResolutionType {
            found: market.resolution_type,
        });
    }
    Ok(())
}

fn check_anchor(market: &MarketRecord, anchor: &NewsAnchor) -> Result<(), LeakageError> {
    if anchor.t_news < market.open_ts || anchor.t_news > market.resolve_ts {
        return Err(LeakageError::AnchorOutOfRange {
            t_news: anchor.t_news,
            open: market.open_ts,
            resolve: market.resolve_ts,
        });
    }
    if anchor.tier == AnchorTier::ProxyOffset {
        let expected = anchor
            .expected_proxy_t_news(market.resolve_ts)
            .expect("validated proxy anchors carry an offset");
        if (expected - anchor.t_news).abs() > 1 {
            return Err(LeakageError::InvalidProxyAnchor {
                got: anchor.t_news,
                expected,
            });
        }
    }
    Ok(())
}

/// Score one event-resolved market against one news anchor.
pub fn compute_ils(
    market: &MarketRecord,
    series: &PriceSeries,
    anchor: &NewsAnchor,
    cfg: &ScopeConfig,
) -> Result<IlsResult, LeakageError> {
    check_event_market(market)?;
    check_anchor(market, anchor)?;
    let p_open = series.price_at(market.open_ts)?;
    let p_news = series.price_at(anchor.t_news)?;
    let delta_pre = p_news - p_open;
    let delta_total = market.outcome.as_f64() - p_open;

    let mut flags = BTreeSet::new();
    if (p_open - 0.5).abs() > cfg.edge_band {
        flags.insert(ScopeFlag::EdgeEffect);
    }
    let ils = if delta_total.abs() > cfg.epsilon {
        Some(delta_pre / delta_total)
    } else {
        flags.insert(ScopeFlag::TrivialResolution);
        None
    };
    Ok(IlsResult {
        ils,
        delta_pre,
        delta_total,
        p_open,
        p_news,
        flags,
    })
}

/// Multi-window scores keyed by canonical window label (`30m`, `2h`, ...).
#[derive(Debug, Clone, Serialize, Default)]
pub struct WindowResult {
    /// None means the window denominator fell below epsilon.
    pub windows: BTreeMap<String, Option<f64>>,
    /// Omissions and per-window edge-effect annotations.
    pub notes: Vec<String>,
}

/// Timing profile of the leakage: for each window w,
/// ILS_w = [p(T_news) - p(T_news - w)] / [o - p(T_news - w)].
///
/// Windows reaching back past the opening are omitted (and noted); the edge
/// condition is applied to the window base price p(T_news - w).
pub fn compute_ils_windows(
    market: &MarketRecord,
    series: &PriceSeries,
    anchor: &NewsAnchor,
    cfg: &ScopeConfig,
    windows_secs: &[i64],
) -> Result<WindowResult, LeakageError> {
    check_event_market(market)?;
    check_anchor(market, anchor)?;
    let p_news = series.price_at(anchor.t_news)?;
    let outcome = market.outcome.as_f64();

    let mut out = WindowResult::default();
    for &w in windows_secs {
        let label = format_duration(w);
        let base_ts = anchor.t_news - w;
        if base_ts < market.open_ts {
            out.notes
                .push(format!("{label}: omitted, window starts before market open"));
            continue;
        }
        let p_base = series.price_at(base_ts)?;
        if (p_base - 0.5).abs() > cfg.edge_band {
            out.notes.push(format!("{label}: EDGE_EFFECT at window base"));
        }
        let den = outcome - p_base;
        if den.abs() > cfg.epsilon {
            out.windows.insert(label, Some((p_news - p_base) / den));
        } else {
            out.notes.push(format!("{label}: below-epsilon denominator"));
            out.windows.insert(label, None);
        }
    }
    Ok(out)
}

/// Per-anchor score used by the robustness check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorIls {
    pub label: String,
    pub t_news: Ts,
    pub ils: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnchorCheck {
    pub per_anchor: Vec<AnchorIls>,
    pub robust: bool,
}

/// Sign and rough-magnitude preservation: no strictly opposite signs, and all
/// pairwise absolute differences within `max_delta`.
pub fn robust_values(values: &[f64], max_delta: f64) -> bool {
    if values.len() < 2 {
        return false;
    }
    let any_pos = values.iter().any(|v| *v > 0.0);
    let any_neg = values.iter().any(|v| *v < 0.0);
    if any_pos && any_neg {
        return false;
    }
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            if (a - b).abs() > max_delta {
                return false;
            }
        }
    }
    true
}

/// Score a market under every supplied anchor and decide whether the value is
/// robust to the anchor choice. Values that are MISSING under some anchor are
/// excluded; fewer than two defined values cannot establish robustness.
pub fn anchor_sensitivity(
    market: &MarketRecord,
    series: &PriceSeries,
    anchors: &[NewsAnchor],
    cfg: &ScopeConfig,
) -> Result<AnchorCheck, LeakageError> {
    if anchors.len() < 2 {
        return Err(LeakageError::InsufficientAnchors { n: anchors.len() });
    }
    let mut per_anchor = Vec::with_capacity(anchors.len());
    for (i, anchor) in anchors.iter().enumerate() {
        let core = compute_ils(market, series, anchor, cfg)?;
        per_anchor.push(AnchorIls {
            label: format!("{}#{i}", anchor.tier.as_str()),
            t_news: anchor.t_news,
            ils: core.ils,
        });
    }
    let defined: Vec<f64> = per_anchor.iter().filter_map(|a| a.ils).collect();
    let robust = defined.len() >= 2 && robust_values(&defined, cfg.anchor_robustness_max_delta);
    Ok(AnchorCheck { per_anchor, robust })
}

/// Share of lifetime notional traded strictly before the news.
pub fn pre_news_volume_share(
    trades: &[Trade],
    t_news: Ts,
    t_resolve: Ts,
) -> Result<f64, LeakageError> {
    let mut pre = 0.0;
    let mut total = 0.0;
    for t in trades {
        if t.ts > t_resolve {
            continue;
        }
        let n = t.notional();
        total += n;
        if t.ts < t_news {
            pre += n;
        }
    }
    if total <= 0.0 {
        return Err(LeakageError::ZeroVolume);
    }
    Ok(pre / total)
}

/// Largest absolute move between consecutive minute VWAPs in [T_open, T_news].
pub fn max_pre_news_jump(
    series: &PriceSeries,
    t_open: Ts,
    t_news: Ts,
) -> Result<f64, LeakageError> {
    let window: Vec<f64> = series
        .points
        .iter()
        .filter(|p| p.minute_ts >= t_open.minute_floor() && p.minute_ts <= t_news)
        .map(|p| p.vwap)
        .collect();
    if window.len() < 2 {
        return Err(LeakageError::JumpUndefined);
    }
    Ok(window
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max))
}

/// Trades on the side that paid out, largest first.
///
/// Ordering is by token size descending with timestamp and input order as
/// tie-breakers, so selection is deterministic.
pub fn winning_trades<'a>(trades: &'a [Trade], outcome: crate::market::Outcome) -> Vec<&'a Trade> {
    let side = outcome.winning_side();
    let mut winners: Vec<(usize, &Trade)> = trades
        .iter()
        .enumerate()
        .filter(|(_, t)| t.side == side)
        .collect();
    winners.sort_by(|(ia, a), (ib, b)| {
        b.size
            .partial_cmp(&a.size)
            .unwrap()
            .then(a.ts.cmp(&b.ts))
            .then(ia.cmp(ib))
    });
    winners.into_iter().map(|(_, t)| t).collect()
}

pub fn top_k_winning<'a>(
    trades: &'a [Trade],
    outcome: crate::market::Outcome,
    k: usize,
) -> Vec<&'a Trade> {
    let mut w = winning_trades(trades, outcome);
    w.truncate(k);
    w
}

/// Herfindahl–Hirschman index of size shares over the top-k winning trades.
pub fn wallet_concentration_hhi(top: &[&Trade]) -> Result<f64, LeakageError> {
    if top.is_empty() {
        return Err(LeakageError::NoWinningTrades);
    }
    let total: f64 = top.iter().map(|t| t.size).sum();
    Ok(top
        .iter()
        .map(|t| {
            let s = t.size / total;
            s * s
        })
        .sum())
}

/// Gaps T_news - t_i for the top-k winning trades, in seconds.
///
/// Post-news entries (negative gaps) are reported separately rather than
/// silently dropped: late entries into the winning side carry their own
/// analytical meaning.
#[derive(Debug, Clone, Serialize, Default)]
pub struct GapReport {
    pub pre_news_secs: Vec<i64>,
    pub post_news_secs: Vec<i64>,
}

pub fn time_to_news_gaps(top: &[&Trade], t_news: Ts) -> GapReport {
    let mut report = GapReport::default();
    for t in top {
        let gap = t_news - t.ts;
        if gap >= 0 {
            report.pre_news_secs.push(gap);
        } else {
            report.post_news_secs.push(gap);
        }
    }
    report
}

/// Full per-market label for an event-resolved market.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LeakageLabel {
    pub market_id: String,
    pub ils: Option<f64>,
    pub ils_windows: BTreeMap<String, Option<f64>>,
    pub window_notes: Vec<String>,
    pub delta_pre: f64,
    pub delta_total: f64,
    pub p_open: f64,
    pub p_news: f64,
    pub scope_flags: BTreeSet<ScopeFlag>,
    pub v_pre: Option<f64>,
    pub max_pre_news_jump: Option<f64>,
    pub hhi_top10: Option<f64>,
    pub time_to_news_gaps_secs: Vec<i64>,
    pub post_news_gaps_secs: Vec<i64>,
    pub mean_wallet_novelty: Option<f64>,
    pub novelty_scored: usize,
    pub novelty_missing: usize,
    pub anchor_robust: bool,
    pub per_anchor_ils: Vec<AnchorIls>,
}

impl crate::io::Validate for LeakageLabel {
    fn validate(&self) -> Result<(), String> {
        if self.market_id.is_empty() {
            return Err("market_id must be non-empty".into());
        }
        Ok(())
    }
}

/// Pick the primary anchor: best tier first, then confidence, then time.
pub fn primary_anchor<'a>(anchors: &'a [NewsAnchor]) -> Option<&'a NewsAnchor> {
    anchors
        .iter()
        .filter(|a| a.tier != AnchorTier::DeadlineExpiry)
        .min_by(|a, b| {
            a.tier
                .rank()
                .cmp(&b.tier.rank())
                .then(b.confidence.partial_cmp(&a.confidence).unwrap())
                .then(a.t_news.cmp(&b.t_news))
        })
}

/// Assemble the complete leakage label for one event-resolved market.
///
/// The robustness check runs over the supplied anchors, topped up with proxy
/// variants from the config when fewer than two usable specifications exist.
/// Failure to establish robustness sets ANCHOR_UNSTABLE.
#[allow(clippy::too_many_arguments)]
pub fn label_market(
    market: &MarketRecord,
    series: &PriceSeries,
    trades: &[Trade],
    anchors: &[NewsAnchor],
    profiles: Option<&HashMap<String, WalletProfile>>,
    novelty_cfg: &NoveltyConfig,
    cfg: &ScopeConfig,
    windows_secs: &[i64],
    top_k: usize,
) -> Result<LeakageLabel, LeakageError> {
    let primary = primary_anchor(anchors).ok_or_else(|| LeakageError::NoAnchor {
        market_id: market.market_id.clone(),
    })?;
    let core = compute_ils(market, series, primary, cfg)?;
    let windows = compute_ils_windows(market, series, primary, cfg, windows_secs)?;

    // Anchor robustness over explicit anchors plus synthesized proxies.
    let mut variants: Vec<NewsAnchor> = anchors
        .iter()
        .filter(|a| a.tier != AnchorTier::DeadlineExpiry)
        .cloned()
        .collect();
    if variants.len() < 2 {
        for &hours in &cfg.proxy_offsets_hours {
            let t = market.resolve_ts - (hours * 3600.0).round() as i64;
            if t >= market.open_ts && !variants.iter().any(|v| v.t_news == t) {
                variants.push(NewsAnchor {
                    market_id: market.market_id.clone(),
                    t_news: t,
                    tier: AnchorTier::ProxyOffset,
                    proxy_offset_hours: Some(hours),
                    confidence: 0.5,
                });
            }
            if variants.len() >= 2 {
                break;
            }
        }
    }
    let mut flags = core.flags.clone();
    let (robust, per_anchor) = if variants.len() >= 2 {
        match anchor_sensitivity(market, series, &variants, cfg) {
            Ok(check) => (check.robust, check.per_anchor),
            Err(_) => (false, Vec::new()),
        }
    } else {
        (false, Vec::new())
    };
    if !robust {
        flags.insert(ScopeFlag::AnchorUnstable);
    }

    let v_pre = pre_news_volume_share(trades, primary.t_news, market.resolve_ts).ok();
    let jump = max_pre_news_jump(series, market.open_ts, primary.t_news).ok();
    let top = top_k_winning(trades, market.outcome, top_k);
    let hhi = wallet_concentration_hhi(&top).ok();
    let gaps = time_to_news_gaps(&top, primary.t_news);
    let novelty = match profiles {
        Some(p) => mean_wallet_novelty(market, &top, p, novelty_cfg),
        None => MeanNovelty::default(),
    };

    Ok(LeakageLabel {
        market_id: market.market_id.clone(),
        ils: core.ils,
        ils_windows: windows.windows,
        window_notes: windows.notes,
        delta_pre: core.delta_pre,
        delta_total: core.delta_total,
        p_open: core.p_open,
        p_news: core.p_news,
        scope_flags: flags,
        v_pre,
        max_pre_news_jump: jump,
        hhi_top10: hhi,
        time_to_news_gaps_secs: gaps.pre_news_secs,
        post_news_gaps_secs: gaps.post_news_secs,
        mean_wallet_novelty: novelty.mean,
        novelty_scored: novelty.scored,
        novelty_missing: novelty.missing,
        anchor_robust: robust,
        per_anchor_ils: per_anchor,
    })
}
