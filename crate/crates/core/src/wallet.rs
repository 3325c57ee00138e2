//! Wallet novelty scoring from on-chain context.
//!
//! The composite score for a wallet w at trade time t:
//!
//! ```text
//! WN(w,t) = a1*1[age(w,t) < 48h] + a2*1[|markets(w,<t)| < 3]
//!         + a3*c_fund(w) + a4*1[t > T_resolve - 2h]
//! ```
//!
//! with the weights normalized to sum to one. Funding concentration c_fund is
//! the Herfindahl index over the wallet's USDC inflow sources.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::Validate;
use crate::market::{MarketRecord, Trade};
use crate::time::{Ts, SECS_PER_HOUR};

#[derive(Debug, Error)]
pub enum WalletError {
    #[error("scoring time {t} precedes the wallet's first transaction {first}")]
    BadTimestamp { t: Ts, first: Ts },
    #[error("zero total inflow")]
    ZeroInflow,
    #[error("invalid novelty config: {0}")]
    BadConfig(String),
}

/// One USDC inflow into a wallet. The timestamp is optional because most
/// explorers export aggregate amounts only; when present it participates in
/// the causality cutoff.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Inflow {
    pub source: String,
    pub amount: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<Ts>,
}

/// On-chain wallet context as read from the wallets file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalletContext {
    pub wallet_id: String,
    pub first_tx_ts: Ts,
    #[serde(default)]
    pub market_first_trade_ts: Vec<Ts>,
    #[serde(default)]
    pub inflows: Vec<Inflow>,
}

impl Validate for WalletContext {
    fn validate(&self) -> Result<(), String> {
        if self.wallet_id.is_empty() {
            return Err("wallet_id must be non-empty".into());
        }
        for inflow in &self.inflows {
            if !(inflow.amount > 0.0) || !inflow.amount.is_finite() {
                return Err(format!("inflow amount must be positive, got {}", inflow.amount));
            }
        }
        Ok(())
    }
}

/// Materialized wallet profile with sorted per-market first-trade timestamps.
#[derive(Debug, Clone)]
pub struct WalletProfile {
    pub wallet_id: String,
    pub first_tx_ts: Ts,
    market_first_trades: Vec<Ts>,
    inflows: Vec<Inflow>,
}

impl From<WalletContext> for WalletProfile {
    fn from(ctx: WalletContext) -> Self {
        let mut firsts = ctx.market_first_trade_ts;
        firsts.sort();
        WalletProfile {
            wallet_id: ctx.wallet_id,
            first_tx_ts: ctx.first_tx_ts,
            market_first_trades: firsts,
            inflows: ctx.inflows,
        }
    }
}

impl WalletProfile {
    /// Number of distinct markets first traded strictly before `t`.
    pub fn markets_traded_before(&self, t: Ts) -> usize {
        self.market_first_trades.partition_point(|&x| x < t)
    }

    pub fn age_secs(&self, t: Ts) -> i64 {
        t - self.first_tx_ts
    }

    /// Funding concentration over inflows observable at `t`: timestamped
    /// inflows after `t` are excluded, untimestamped ones always count.
    /// `None` when no inflow is observable.
    pub fn funding_concentration_at(&self, t: Ts) -> Option<f64> {
        let visible: Vec<Inflow> = self
            .inflows
            .iter()
            .filter(|i| i.ts.map(|ts| ts <= t).unwrap_or(true))
            .cloned()
            .collect();
        funding_concentration(&visible).ok()
    }
}

/// Load a wallet file into a lookup map keyed by wallet id.
pub fn profile_map(contexts: Vec<WalletContext>) -> HashMap<String, WalletProfile> {
    contexts
        .into_iter()
        .map(|c| (c.wallet_id.clone(), WalletProfile::from(c)))
        .collect()
}

/// Herfindahl index of inflow shares aggregated per distinct source.
pub fn funding_concentration(inflows: &[Inflow]) -> Result<f64, WalletError> {
    let mut by_source: HashMap<&str, f64> = HashMap::new();
    let mut total = 0.0;
    for inflow in inflows {
        *by_source.entry(inflow.source.as_str()).or_insert(0.0) += inflow.amount;
        total += inflow.amount;
    }
    if total <= 0.0 {
        return Err(WalletError::ZeroInflow);
    }
    Ok(by_source
        .values()
        .map(|a| {
            let s = a / total;
            s * s
        })
        .sum())
}

/// Component weights and thresholds for the novelty score.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NoveltyConfig {
    /// (age, prior-markets, funding, late-entry) weights; normalized on use.
    pub alphas: [f64; 4],
    pub age_threshold_hours: f64,
    pub prior_markets_threshold: usize,
    pub late_entry_window_hours: f64,
}

impl Default for NoveltyConfig {
    fn default() -> Self {
        NoveltyConfig {
            alphas: [0.25, 0.25, 0.25, 0.25],
            age_threshold_hours: 48.0,
            prior_markets_threshold: 3,
            late_entry_window_hours: 2.0,
        }
    }
}

impl NoveltyConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.alphas.iter().any(|a| *a < 0.0 || !a.is_finite()) {
            return Err("alphas must be non-negative".into());
        }
        if self.alphas.iter().sum::<f64>() <= 0.0 {
            return Err("alphas must not all be zero".into());
        }
        if self.age_threshold_hours <= 0.0 || self.late_entry_window_hours <= 0.0 {
            return Err("thresholds must be positive".into());
        }
        Ok(())
    }

    /// Weights scaled to sum to one.
    pub fn normalized_alphas(&self) -> [f64; 4] {
        let sum: f64 = self.alphas.iter().sum();
        [
            self.alphas[0] / sum,
            self.alphas[1] / sum,
            self.alphas[2] / sum,
            self.alphas[3] / sum,
        ]
    }
}

/// Composite novelty of a wallet at trade time `t` for a market resolving at
/// `t_resolve`. All component facts are causal in `t`.
pub fn wallet_novelty(
    profile: &WalletProfile,
    t: Ts,
    t_resolve: Ts,
    cfg: &NoveltyConfig,
) -> Result<f64, WalletError> {
    cfg.validate().map_err(WalletError::BadConfig)?;
    if t < profile.first_tx_ts {
        return Err(WalletError::BadTimestamp {
            t,
            first: profile.first_tx_ts,
        });
    }
    let a = cfg.normalized_alphas();
    let age_secs = profile.age_secs(t);
    let age_fires = (age_secs as f64) < cfg.age_threshold_hours * SECS_PER_HOUR as f64;
    let prior_fires = profile.markets_traded_before(t) < cfg.prior_markets_threshold;
    let c_fund = profile.funding_concentration_at(t).unwrap_or(0.0);
    let late_cutoff = t_resolve - (cfg.late_entry_window_hours * SECS_PER_HOUR as f64).round() as i64;
    let late_fires = t > late_cutoff;

    Ok(a[0] * f64::from(age_fires as u8)
        + a[1] * f64::from(prior_fires as u8)
        + a[2] * c_fund
        + a[3] * f64::from(late_fires as u8))
}

/// Trade-level mean novelty over the top-k winning trades. A wallet appearing
/// twice counts twice; trades whose wallet has no profile are excluded from
/// the mean and counted as missing.
#[derive(Debug, Clone, Serialize, Default)]
pub struct MeanNovelty {
    pub mean: Option<f64>,
    pub scored: usize,
    pub missing: usize,
}

pub fn mean_wallet_novelty(
    market: &MarketRecord,
    top_winning: &[&Trade],
    profiles: &HashMap<String, WalletProfile>,
    cfg: &NoveltyConfig,
) -> MeanNovelty {
    let mut sum = 0.0;
    let mut scored = 0usize;
    let mut missing = 0usize;
    for trade in top_winning {
        match profiles.get(&trade.wallet_id) {
            Some(profile) => match wallet_novelty(profile, trade.ts, market.resolve_ts, cfg) {
                Ok(wn) => {
                    sum += wn;
                    scored += 1;
                }
                Err(_) => missing += 1,
            },
            None => missing += 1,
        }
    }
    MeanNovelty {
        mean: if scored > 0 { Some(sum / scored as f64) } else { None },
        scored,
        missing,
    }
}
