//! Property tests for the leakage-score geometry and scope-flag guarantees.

use proptest::prelude::*;

use iflow_core::leakage::{compute_ils, ScopeConfig, ScopeFlag};
use iflow_core::market::{
    AnchorTier, Category, MarketRecord, NewsAnchor, Outcome, PricePoint, PriceSeries,
    ResolutionType,
};
use iflow_core::time::Ts;

fn market(outcome: Outcome, open: i64, resolve: i64) -> MarketRecord {
    MarketRecord {
        market_id: "p".into(),
        question: "prop".into(),
        category: Category::Other,
        open_ts: Ts::from_unix(open),
        resolve_ts: Ts::from_unix(resolve),
        deadline_ts: None,
        outcome,
        total_volume_usdc: 1e6,
        resolution_type: ResolutionType::EventResolved,
    }
}

fn two_point_series(p_open: f64, open_minute: i64, p_news: f64, news_minute: i64) -> PriceSeries {
    PriceSeries::from_points(
        "p".into(),
        vec![
            PricePoint {
                minute_ts: Ts::from_unix(open_minute * 60),
                vwap: p_open,
                volume: 1.0,
            },
            PricePoint {
                minute_ts: Ts::from_unix(news_minute * 60),
                vwap: p_news,
                volume: 1.0,
            },
        ],
    )
    .unwrap()
}

fn anchor(ts: i64) -> NewsAnchor {
    NewsAnchor {
        market_id: "p".into(),
        t_news: Ts::from_unix(ts),
        tier: AnchorTier::Article,
        proxy_offset_hours: None,
        confidence: 1.0,
    }
}

proptest! {
    // Fully priced-in trajectories score exactly one; flat trajectories
    // exactly zero; counter-moves strictly negative.
    #[test]
    fn regime_geometry(p_open in 0.06f64..0.94, outcome_yes in any::<bool>()) {
        let outcome = if outcome_yes { Outcome::Yes } else { Outcome::No };
        let cfg = ScopeConfig::default();
        let m = market(outcome, 0, 12_000);

        let at_outcome = two_point_series(p_open, 0, outcome.as_f64(), 100);
        let r = compute_ils(&m, &at_outcome, &anchor(6_030), &cfg).unwrap();
        if let Some(v) = r.ils {
            prop_assert_eq!(v, 1.0);
        }

        let flat = two_point_series(p_open, 0, p_open, 100);
        let r = compute_ils(&m, &flat, &anchor(6_030), &cfg).unwrap();
        if let Some(v) = r.ils {
            prop_assert_eq!(v, 0.0);
        }

        // Move against the outcome.
        let against = if outcome == Outcome::Yes { p_open * 0.5 } else { p_open + (1.0 - p_open) * 0.5 };
        let counter = two_point_series(p_open, 0, against, 100);
        let r = compute_ils(&m, &counter, &anchor(6_030), &cfg).unwrap();
        if let Some(v) = r.ils {
            prop_assert!(v < 0.0, "counter-move ILS {} must be negative", v);
        }
    }

    // The score depends only on (p_open, p_news, outcome): any time
    // reparameterization preserving those three gives the identical value.
    #[test]
    fn time_reparameterization_invariance(
        p_open in 0.06f64..0.94,
        p_news in 0.01f64..0.99,
        news_minute_a in 2i64..500,
        news_minute_b in 2i64..500,
        outcome_yes in any::<bool>(),
    ) {
        let outcome = if outcome_yes { Outcome::Yes } else { Outcome::No };
        let cfg = ScopeConfig::default();
        let horizon = 2_000 * 60;
        let m = market(outcome, 0, horizon);
        let sa = two_point_series(p_open, 0, p_news, news_minute_a);
        let sb = two_point_series(p_open, 0, p_news, news_minute_b);
        let ra = compute_ils(&m, &sa, &anchor(news_minute_a * 60 + 30), &cfg).unwrap();
        let rb = compute_ils(&m, &sb, &anchor(news_minute_b * 60 + 30), &cfg).unwrap();
        prop_assert_eq!(ra.ils, rb.ils);
        prop_assert_eq!(ra.delta_pre, rb.delta_pre);
        prop_assert_eq!(ra.delta_total, rb.delta_total);
    }

    // For a YES market, raising p_news strictly raises the score.
    #[test]
    fn monotone_in_news_price_for_yes(
        p_open in 0.06f64..0.94,
        lo in 0.01f64..0.98,
        bump in 0.005f64..0.01,
    ) {
        let hi = (lo + bump).min(0.999);
        let cfg = ScopeConfig::default();
        let m = market(Outcome::Yes, 0, 12_000);
        let r_lo = compute_ils(&m, &two_point_series(p_open, 0, lo, 100), &anchor(6_030), &cfg).unwrap();
        let r_hi = compute_ils(&m, &two_point_series(p_open, 0, hi, 100), &anchor(6_030), &cfg).unwrap();
        if let (Some(a), Some(b)) = (r_lo.ils, r_hi.ils) {
            prop_assert!(b > a, "ILS must increase with p_news: {} !> {}", b, a);
        }
    }

    // No high score on an edge-regime opening price escapes unflagged.
    #[test]
    fn high_scores_outside_band_are_flagged(
        p_open in 0.001f64..0.999,
        p_news in 0.001f64..0.999,
        outcome_yes in any::<bool>(),
    ) {
        let outcome = if outcome_yes { Outcome::Yes } else { Outcome::No };
        let cfg = ScopeConfig::default();
        let m = market(outcome, 0, 12_000);
        let series = two_point_series(p_open, 0, p_news, 100);
        let r = compute_ils(&m, &series, &anchor(6_030), &cfg).unwrap();
        if let Some(v) = r.ils {
            if v > 0.9 && (p_open - 0.5).abs() > cfg.edge_band {
                prop_assert!(
                    r.flags.contains(&ScopeFlag::EdgeEffect),
                    "ILS {} at p_open {} missing the edge flag",
                    v,
                    p_open
                );
            }
        }
    }

    // The MISSING state and the trivial-resolution flag are one condition.
    #[test]
    fn missing_iff_trivial_flag(
        p_open in 0.01f64..0.99,
        p_news in 0.01f64..0.99,
        outcome_yes in any::<bool>(),
    ) {
        let outcome = if outcome_yes { Outcome::Yes } else { Outcome::No };
        let cfg = ScopeConfig::default();
        let m = market(outcome, 0, 12_000);
        let series = two_point_series(p_open, 0, p_news, 100);
        let r = compute_ils(&m, &series, &anchor(6_030), &cfg).unwrap();
        prop_assert_eq!(r.ils.is_none(), r.flags.contains(&ScopeFlag::TrivialResolution));
    }
}
