//! Core domain types: markets, trades, news anchors, and the minute-resolution
//! price series reconstructed as a trade-VWAP within each minute.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::Validate;
use crate::time::Ts;

pub const DEFAULT_VOLUME_CUTOFF_USDC: f64 = 50_000.0;

/// Target category for a market.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    MilitaryGeopolitics,
    Regulatory,
    Corporate,
    #[default]
    Other,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::MilitaryGeopolitics,
        Category::Regulatory,
        Category::Corporate,
        Category::Other,
    ];

    /// Stable numeric code, ordered by classification priority.
    pub fn code(self) -> u8 {
        match self {
            Category::MilitaryGeopolitics => 0,
            Category::Regulatory => 1,
            Category::Corporate => 2,
            Category::Other => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::MilitaryGeopolitics => "military_geopolitics",
            Category::Regulatory => "regulatory",
            Category::Corporate => "corporate",
            Category::Other => "other",
        }
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// Binary resolution outcome of the YES token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "NO")]
    No,
    #[serde(rename = "YES")]
    Yes,
}

impl Outcome {
    pub fn as_f64(self) -> f64 {
        match self {
            Outcome::No => 0.0,
            Outcome::Yes => 1.0,
        }
    }

    /// The trade side that pays out under this outcome.
    pub fn winning_side(self) -> Side {
        match self {
            Outcome::Yes => Side::BuyYes,
            Outcome::No => Side::SellYes,
        }
    }
}

/// How the market's resolution criterion is structured.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionType {
    EventResolved,
    DeadlineResolved,
    #[default]
    Unclassifiable,
}

impl ResolutionType {
    pub const ALL: [ResolutionType; 3] = [
        ResolutionType::EventResolved,
        ResolutionType::DeadlineResolved,
        ResolutionType::Unclassifiable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ResolutionType::EventResolved => "event_resolved",
            ResolutionType::DeadlineResolved => "deadline_resolved",
            ResolutionType::Unclassifiable => "unclassifiable",
        }
    }
}

/// Explicit trade direction on the YES outcome token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "BUY_YES")]
    BuyYes,
    #[serde(rename = "SELL_YES")]
    SellYes,
}

/// One resolved or active binary market.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketRecord {
    pub market_id: String,
    pub question: String,
    pub category: Category,
    pub open_ts: Ts,
    pub resolve_ts: Ts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_ts: Option<Ts>,
    pub outcome: Outcome,
    pub total_volume_usdc: f64,
    pub resolution_type: ResolutionType,
}

impl Validate for MarketRecord {
    fn validate(&self) -> Result<(), String> {
        if self.market_id.is_empty() {
            return Err("market_id must be non-empty".into());
        }
        if self.open_ts >= self.resolve_ts {
            return Err(format!(
                "open_ts {} must precede resolve_ts {}",
                self.open_ts, self.resolve_ts
            ));
        }
        if let Some(d) = self.deadline_ts {
            if self.open_ts >= d {
                return Err(format!("open_ts {} must precede deadline_ts {}", self.open_ts, d));
            }
        }
        if self.resolution_type == ResolutionType::DeadlineResolved
            && self.outcome == Outcome::No
            && self.deadline_ts.is_none()
        {
            return Err("deadline-resolved NO market requires deadline_ts".into());
        }
        if !self.total_volume_usdc.is_finite() || self.total_volume_usdc < 0.0 {
            return Err(format!(
                "total_volume_usdc must be non-negative, got {}",
                self.total_volume_usdc
            ));
        }
        Ok(())
    }
}

/// One explicit-direction fill.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trade {
    pub ts: Ts,
    pub market_id: String,
    pub wallet_id: String,
    pub side: Side,
    pub price: f64,
    pub size: f64,
}

impl Trade {
    /// USDC notional of the fill.
    pub fn notional(&self) -> f64 {
        self.price * self.size
    }

    /// Token size signed by direction: positive for YES buys.
    pub fn signed_size(&self) -> f64 {
        match self.side {
            Side::BuyYes => self.size,
            Side::SellYes => -self.size,
        }
    }
}

impl Validate for Trade {
    fn validate(&self) -> Result<(), String> {
        if self.market_id.is_empty() {
            return Err("market_id must be non-empty".into());
        }
        if !(self.price > 0.0 && self.price < 1.0) {
            return Err(format!("price must lie strictly inside (0,1), got {}", self.price));
        }
        if !(self.size > 0.0) || !self.size.is_finite() {
            return Err(format!("size must be positive, got {}", self.size));
        }
        Ok(())
    }
}

/// Provenance tier of a recovered news/event timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorTier {
    ProxyOffset,
    Article,
    Gdelt,
    EventOccurrence,
    DeadlineExpiry,
}

impl AnchorTier {
    /// Preference rank when picking a primary anchor (lower is better).
    pub fn rank(self) -> u8 {
        match self {
            AnchorTier::Article => 0,
            AnchorTier::Gdelt => 1,
            AnchorTier::EventOccurrence => 2,
            AnchorTier::ProxyOffset => 3,
            AnchorTier::DeadlineExpiry => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AnchorTier::ProxyOffset => "proxy_offset",
            AnchorTier::Article => "article",
            AnchorTier::Gdelt => "gdelt",
            AnchorTier::EventOccurrence => "event_occurrence",
            AnchorTier::DeadlineExpiry => "deadline_expiry",
        }
    }
}

/// Recovered timestamp of the first public mention (or occurrence) of the
/// resolution-relevant event.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewsAnchor {
    pub market_id: String,
    pub t_news: Ts,
    pub tier: AnchorTier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proxy_offset_hours: Option<f64>,
    pub confidence: f64,
}

impl NewsAnchor {
    /// For proxy anchors, the t_news implied by the market's resolution time.
    pub fn expected_proxy_t_news(&self, resolve_ts: Ts) -> Option<Ts> {
        self.proxy_offset_hours
            .map(|h| resolve_ts - (h * 3600.0).round() as i64)
    }
}

impl Validate for NewsAnchor {
    fn validate(&self) -> Result<(), String> {
        if self.market_id.is_empty() {
            return Err("market_id must be non-empty".into());
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("confidence must be in [0,1], got {}", self.confidence));
        }
        if self.tier == AnchorTier::ProxyOffset {
            match self.proxy_offset_hours {
                Some(h) if h > 0.0 => {}
                _ => return Err("proxy_offset tier requires positive proxy_offset_hours".into()),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("no trades supplied")]
    NoTrades,
    #[error("trades are not sorted by timestamp (offending index {index})")]
    UnsortedInput { index: usize },
    #[error("trade at index {index} belongs to market {found}, expected {expected}")]
    MixedMarkets {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("lookup at {t} precedes series start {first}")]
    BeforeSeriesStart { t: Ts, first: Ts },
    #[error("invalid price point: {0}")]
    InvalidPoint(String),
}

/// One minute of trading, collapsed to a volume-weighted average price.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PricePoint {
    pub minute_ts: Ts,
    pub vwap: f64,
    pub volume: f64,
}

/// Minute-resolution price series with forward-fill lookup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceSeries {
    pub market_id: String,
    pub points: Vec<PricePoint>,
}

impl PriceSeries {
    /// Build a series from pre-validated points, enforcing the invariants
    /// (strictly increasing minutes, prices in [0,1]).
    pub fn from_points(market_id: String, points: Vec<PricePoint>) -> Result<Self, MarketError> {
        for (i, p) in points.iter().enumerate() {
            if p.minute_ts != p.minute_ts.minute_floor() {
                return Err(MarketError::InvalidPoint(format!(
                    "point {i} not minute-aligned: {}",
                    p.minute_ts
                )));
            }
            if !(0.0..=1.0).contains(&p.vwap) {
                return Err(MarketError::InvalidPoint(format!(
                    "point {i} vwap {} outside [0,1]",
                    p.vwap
                )));
            }
            if i > 0 && points[i - 1].minute_ts >= p.minute_ts {
                return Err(MarketError::InvalidPoint(format!(
                    "points not strictly increasing at index {i}"
                )));
            }
        }
        Ok(PriceSeries { market_id, points })
    }

    pub fn first_ts(&self) -> Option<Ts> {
        self.points.first().map(|p| p.minute_ts)
    }

    pub fn last_ts(&self) -> Option<Ts> {
        self.points.last().map(|p| p.minute_ts)
    }

    /// VWAP of the first traded minute; the opening price p(T_open).
    pub fn open_price(&self) -> Option<f64> {
        self.points.first().map(|p| p.vwap)
    }

    /// Forward-fill lookup: VWAP of the last minute at or before `t`.
    pub fn price_at(&self, t: Ts) -> Result<f64, MarketError> {
        let first = self.points.first().ok_or(MarketError::NoTrades)?;
        if t < first.minute_ts {
            return Err(MarketError::BeforeSeriesStart {
                t,
                first: first.minute_ts,
            });
        }
        let idx = self.points.partition_point(|p| p.minute_ts <= t);
        Ok(self.points[idx - 1].vwap)
    }

    /// VWAP of the last minute that started strictly before the minute
    /// containing `t`; the price immediately before an observation at `t`.
    pub fn price_before_minute(&self, t: Ts) -> Option<f64> {
        let cutoff = t.minute_floor();
        let idx = self.points.partition_point(|p| p.minute_ts < cutoff);
        if idx == 0 {
            None
        } else {
            Some(self.points[idx - 1].vwap)
        }
    }
}

/// Collapse a market's trade log to one VWAP point per traded minute.
///
/// Trades must belong to a single market and be sorted by timestamp.
pub fn build_price_series(trades: &[Trade]) -> Result<PriceSeries, MarketError> {
    let first = trades.first().ok_or(MarketError::NoTrades)?;
    let market_id = first.market_id.clone();
    let mut minutes: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    let mut prev = first.ts;
    for (index, tr) in trades.iter().enumerate() {
        if tr.market_id != market_id {
            return Err(MarketError::MixedMarkets {
                index,
                expected: market_id,
                found: tr.market_id.clone(),
            });
        }
        if tr.ts < prev {
            return Err(MarketError::UnsortedInput { index });
        }
        prev = tr.ts;
        let bucket = minutes.entry(tr.ts.minute_floor().unix()).or_insert((0.0, 0.0));
        bucket.0 += tr.price * tr.size;
        bucket.1 += tr.size;
    }
    let points = minutes
        .into_iter()
        .map(|(minute, (pq, q))| PricePoint {
            minute_ts: Ts::from_unix(minute),
            vwap: pq / q,
            volume: q,
        })
        .collect();
    Ok(PriceSeries { market_id, points })
}

/// Retain markets whose lifetime volume clears the analysis threshold.
///
/// Below roughly $50K the venue's subgraph carries no CLOB trade history, so
/// the cutoff is a hard prerequisite for anything order-flow based.
pub fn volume_cutoff_filter(markets: Vec<MarketRecord>, threshold_usdc: f64) -> Vec<MarketRecord> {
    markets
        .into_iter()
        .filter(|m| m.total_volume_usdc >= threshold_usdc)
        .collect()
}
