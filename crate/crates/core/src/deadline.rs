//! Deadline-market extension: constant-hazard baseline belief tracker,
//! per-category exponential-hazard MLE, and the event-anchored score for
//! deadline contracts.
//!
//! With a constant hazard rate lambda, the passive belief trajectory on a
//! market asking "will E occur by deadline D" has the closed form
//!
//! ```text
//! theta(t) = theta_open * (1 - exp(-lambda (D - t))) / (1 - exp(-lambda (D - T_open)))
//! ```
//!
//! For a YES-resolved deadline market with the event publicly observed at
//! T_event, the score parallels the event-resolved one with the opening price
//! as baseline:
//!
//! ```text
//! ILS_dl = [p(T_event-) - theta_open] / [1 - theta_open]
//! ```
//!
//! NO-resolved markets anchored at deadline expiry are a structural zero:
//! nothing happened and there was no public moment to anticipate. With an
//! explicit cancellation anchor, the symmetric NO-side score applies on
//! q(t) = 1 - p(t).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::leakage::{ScopeConfig, ScopeFlag};
use crate::market::{
    AnchorTier, Category, MarketError, MarketRecord, NewsAnchor, Outcome, PriceSeries,
    ResolutionType,
};
use crate::stats::chi_square_quantile;
use crate::time::Ts;

#[derive(Debug, Error)]
pub enum DeadlineError {
    #[error("market is {found:?}, not deadline-resolved")]
    WrongResolutionType { found: ResolutionType },
    #[error("market resolved {found:?}; use the scoring path for the other leg")]
    WrongOutcome { found: Outcome },
    #[error("anchor tier {found:?} unsupported here, expected {expected:?}")]
    AnchorTierMismatch { found: AnchorTier, expected: AnchorTier },
    #[error("event time {t_event} outside (open {open}, deadline {deadline}]")]
    EventOutsideWindow { t_event: Ts, open: Ts, deadline: Ts },
    #[error("no price data strictly before the event at {t_event}")]
    NoPreEventPrice { t_event: Ts },
    #[error("no uncensored events supplied")]
    NoEvents,
    #[error("non-positive exposure in sample (index {index})")]
    BadExposure { index: usize },
    #[error("time {t} outside [{t_open}, {deadline}]")]
    OutOfWindow { t: Ts, t_open: Ts, deadline: Ts },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("baseline mode {0:?} is not implemented; use the opening-price baseline")]
    NotImplemented(BaselineMode),
    #[error(transparent)]
    Series(#[from] MarketError),
}

/// Baseline choice for the deadline score. Only the opening price is wired
/// up; the parametric prior and empirical base rate are accepted as config
/// values so that configs written against them fail loudly, not silently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    #[default]
    OpeningPrice,
    ParametricPrior,
    EmpiricalBaseRate,
}

/// Passive belief trajectory under a constant hazard, evaluated at `t`.
pub fn theta_baseline(
    theta_open: f64,
    lambda_per_day: f64,
    t: Ts,
    t_open: Ts,
    deadline: Ts,
) -> Result<f64, DeadlineError> {
    if !(lambda_per_day > 0.0) || !lambda_per_day.is_finite() {
        return Err(DeadlineError::BadParameter(format!(
            "lambda must be positive, got {lambda_per_day}"
        )));
    }
    if !(0.0..=1.0).contains(&theta_open) {
        return Err(DeadlineError::BadParameter(format!(
            "theta_open must be in [0,1], got {theta_open}"
        )));
    }
    if t_open >= deadline {
        return Err(DeadlineError::BadParameter(
            "t_open must precede the deadline".into(),
        ));
    }
    if t < t_open || t > deadline {
        return Err(DeadlineError::OutOfWindow { t, t_open, deadline });
    }
    let remaining = deadline.days_since(t);
    let full = deadline.days_since(t_open);
    let num = 1.0 - (-lambda_per_day * remaining).exp();
    let den = 1.0 - (-lambda_per_day * full).exp();
    Ok(theta_open * num / den)
}

/// Per-category exponential-hazard fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HazardFit {
    pub category: Category,
    pub lambda_per_day: f64,
    pub n_events: usize,
    pub n_censored: usize,
    pub total_exposure_days: f64,
    /// 95% interval on the rate (chi-square based).
    pub ci95: (f64, f64),
}

/// Maximum-likelihood rate from raw exposures in days. Censored exposures
/// contribute survival time without an event.
pub fn fit_hazard_exposures(
    category: Category,
    event_exposure_days: &[f64],
    censored_exposure_days: &[f64],
) -> Result<HazardFit, DeadlineError> {
    if event_exposure_days.is_empty() {
        return Err(DeadlineError::NoEvents);
    }
    for (index, &e) in event_exposure_days
        .iter()
        .chain(censored_exposure_days.iter())
        .enumerate()
    {
        if !(e > 0.0) || !e.is_finite() {
            return Err(DeadlineError::BadExposure { index });
        }
    }
    let n = event_exposure_days.len();
    let total: f64 =
        event_exposure_days.iter().sum::<f64>() + censored_exposure_days.iter().sum::<f64>();
    let lambda = n as f64 / total;
    let dof = 2.0 * n as f64;
    let lo = chi_square_quantile(0.025, dof) / (2.0 * total);
    let hi = chi_square_quantile(0.975, dof) / (2.0 * total);
    Ok(HazardFit {
        category,
        lambda_per_day: lambda,
        n_events: n,
        n_censored: censored_exposure_days.len(),
        total_exposure_days: total,
        ci95: (lo, hi),
    })
}

/// Hazard MLE from (t_open, t_event) pairs, plus optional censored
/// (t_open, deadline) windows from markets where the event never occurred.
pub fn fit_hazard(
    category: Category,
    events: &[(Ts, Ts)],
    censored: &[(Ts, Ts)],
) -> Result<HazardFit, DeadlineError> {
    let ev: Vec<f64> = events.iter().map(|(open, t)| t.days_since(*open)).collect();
    let cz: Vec<f64> = censored.iter().map(|(open, d)| d.days_since(*open)).collect();
    fit_hazard_exposures(category, &ev, &cz)
}

/// Scored / MISSING / structural-zero states of the deadline score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeadlineIls {
    Scored(f64),
    Missing,
    StructuralZero,
}

impl DeadlineIls {
    pub fn value(&self) -> Option<f64> {
        match self {
            DeadlineIls::Scored(v) => Some(*v),
            _ => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            DeadlineIls::Scored(_) => "scored",
            DeadlineIls::Missing => "missing",
            DeadlineIls::StructuralZero => "structural_zero",
        }
    }
}

impl Serialize for DeadlineIls {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("DeadlineIls", 2)?;
        s.serialize_field("status", self.status())?;
        s.serialize_field("value", &self.value())?;
        s.end()
    }
}

/// Per-market label for a deadline-resolved market.
#[derive(Debug, Clone, Serialize)]
pub struct DeadlineLabel {
    pub market_id: String,
    pub ils_dl: DeadlineIls,
    pub theta_open: f64,
    pub p_pre_event: Option<f64>,
    pub t_event: Option<Ts>,
    pub scope_flags: BTreeSet<ScopeFlag>,
}

/// Shared scoring core: pre-observation price against a baseline belief, with
/// the trivial-resolution and edge scope checks applied.
pub fn deadline_score(
    p_pre: f64,
    theta_open: f64,
    cfg: &ScopeConfig,
) -> (DeadlineIls, BTreeSet<ScopeFlag>) {
    let mut flags = BTreeSet::new();
    if (theta_open - 0.5).abs() > cfg.edge_band {
        flags.insert(ScopeFlag::EdgeEffect);
    }
    let delta_total = 1.0 - theta_open;
    if delta_total.abs() > cfg.epsilon {
        (DeadlineIls::Scored((p_pre - theta_open) / delta_total), flags)
    } else {
        flags.insert(ScopeFlag::TrivialResolution);
        (DeadlineIls::Missing, flags)
    }
}

fn deadline_bound(market: &MarketRecord) -> Ts {
    market.deadline_ts.unwrap_or(market.resolve_ts)
}

fn check_deadline_market(market: &MarketRecord, want: Outcome) -> Result<(), DeadlineError> {
    if market.resolution_type != ResolutionType::DeadlineResolved {
        return Err(DeadlineError::WrongResolutionType {
            found: market.resolution_type,
        });
    }
    if market.outcome != want {
        return Err(DeadlineError::WrongOutcome {
            found: market.outcome,
        });
    }
    Ok(())
}

/// Score a YES-resolved deadline market against the public observation of the
/// underlying event. The baseline is the opening price; the event anchor must
/// carry the event-occurrence tier and fall inside (T_open, deadline].
pub fn compute_ils_deadline(
    market: &MarketRecord,
    series: &PriceSeries,
    event_anchor: &NewsAnchor,
    cfg: &ScopeConfig,
    mode: BaselineMode,
) -> Result<DeadlineLabel, DeadlineError> {
    if mode != BaselineMode::OpeningPrice {
        return Err(DeadlineError::NotImplemented(mode));
    }
    check_deadline_market(market, Outcome::Yes)?;
    if event_anchor.tier != AnchorTier::EventOccurrence {
        return Err(DeadlineError::AnchorTierMismatch {
            found: event_anchor.tier,
            expected: AnchorTier::EventOccurrence,
        });
    }
    let t_event = event_anchor.t_news;
    let deadline = deadline_bound(market);
    if t_event <= market.open_ts || t_event > deadline {
        return Err(DeadlineError::EventOutsideWindow {
            t_event,
            open: market.open_ts,
            deadline,
        });
    }
    let theta_open = series.price_at(market.open_ts)?;
    let p_pre = series
        .price_before_minute(t_event)
        .ok_or(DeadlineError::NoPreEventPrice { t_event })?;
    let (ils_dl, scope_flags) = deadline_score(p_pre, theta_open, cfg);
    Ok(DeadlineLabel {
        market_id: market.market_id.clone(),
        ils_dl,
        theta_open,
        p_pre_event: Some(p_pre),
        t_event: Some(t_event),
        scope_flags,
    })
}

/// Score a NO-resolved deadline market.
///
/// Without a cancellation anchor the only public moment is deadline expiry,
/// and the score is a structural zero by construction. With a cancellation
/// anchor, the symmetric definition applies on the NO price q(t) = 1 - p(t):
///
/// ```text
/// ILS_dl = [q(T_anchor-) - (1 - theta_open)] / theta_open
/// ```
pub fn compute_ils_deadline_no(
    market: &MarketRecord,
    series: &PriceSeries,
    cancellation_anchor: Option<&NewsAnchor>,
    cfg: &ScopeConfig,
    mode: BaselineMode,
) -> Result<DeadlineLabel, DeadlineError> {
    if mode != BaselineMode::OpeningPrice {
        return Err(DeadlineError::NotImplemented(mode));
    }
    check_deadline_market(market, Outcome::No)?;
    let deadline = deadline_bound(market);
    let theta_open = series.price_at(market.open_ts)?;

    let effective = cancellation_anchor.filter(|a| a.tier != AnchorTier::DeadlineExpiry);
    match effective {
        None => {
            // Deadline expiry is the implicit anchor: structurally zero.
            let mut flags = BTreeSet::new();
            if (theta_open - 0.5).abs() > cfg.edge_band {
                flags.insert(ScopeFlag::EdgeEffect);
            }
            Ok(DeadlineLabel {
                market_id: market.market_id.clone(),
                ils_dl: DeadlineIls::StructuralZero,
                theta_open,
                p_pre_event: series.price_before_minute(deadline),
                t_event: None,
                scope_flags: flags,
            })
        }
        Some(anchor) => {
            let t_anchor = anchor.t_news;
            if t_anchor <= market.open_ts || t_anchor > deadline {
                return Err(DeadlineError::EventOutsideWindow {
                    t_event: t_anchor,
                    open: market.open_ts,
                    deadline,
                });
            }
            let p_pre = series
                .price_before_minute(t_anchor)
                .ok_or(DeadlineError::NoPreEventPrice { t_event: t_anchor })?;
            let q_pre = 1.0 - p_pre;
            let q_baseline = 1.0 - theta_open;
            let mut flags = BTreeSet::new();
            if (theta_open - 0.5).abs() > cfg.edge_band {
                flags.insert(ScopeFlag::EdgeEffect);
            }
            // The NO-side total move is 1 - q_baseline = theta_open.
            let ils_dl = if theta_open.abs() > cfg.epsilon {
                DeadlineIls::Scored((q_pre - q_baseline) / theta_open)
            } else {
                flags.insert(ScopeFlag::TrivialResolution);
                DeadlineIls::Missing
            };
            Ok(DeadlineLabel {
                market_id: market.market_id.clone(),
                ils_dl,
                theta_open,
                p_pre_event: Some(p_pre),
                t_event: Some(t_anchor),
                scope_flags: flags,
            })
        }
    }
}
