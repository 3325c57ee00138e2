//! Scoring diagnostics and label assembly: Murphy decomposition of the Brier
//! score, the resolution-share check, label-vector aggregation, feature-vector
//! assembly, and statistical power analysis.
//!
//! Murphy decomposition over binned forecasts:
//!
//! ```text
//! B = UNC + REL - RES
//! UNC = obar (1 - obar)
//! REL = sum_b (n_b/n) (fbar_b - obar_b)^2
//! RES = sum_b (n_b/n) (obar_b - obar)^2
//! ```
//!
//! With forecasts quantized to their bin means the identity is exact. The
//! raw-forecast variant keeps the original forecasts and carries the
//! within-bin variance and covariance terms needed for exactness:
//! B = UNC + REL - RES + WBV - 2 WBC.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::leakage::LeakageLabel;
use crate::market::MarketRecord;
use crate::micro::MicroFeatures;
use crate::stats::inverse_normal_cdf;
use crate::time::{Ts, SECS_PER_HOUR};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("no data")]
    NoData,
    #[error("need at least two markets for a population quantity")]
    TooFewMarkets,
    #[error("degenerate outcome set: all outcomes equal, UNC = 0")]
    DegenerateOutcomes,
    #[error("invalid effect: pi1 ({pi1}) must exceed pi0 ({pi0}), both in (0,1)")]
    InvalidEffect { pi1: f64, pi0: f64 },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("market {market_id} closed at {resolve_ts}; cannot assemble features at {t}")]
    MarketClosed {
        market_id: String,
        resolve_ts: Ts,
        t: Ts,
    },
}

/// Which forecasts enter the Brier term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MurphyVariant {
    /// Forecasts replaced by their bin means; three-term identity exact.
    #[default]
    QuantizedMeans,
    /// Raw forecasts; exact with the within-bin variance/covariance terms.
    RawForecasts,
}

#[derive(Debug, Clone, Serialize)]
pub struct MurphyDecomposition {
    pub brier: f64,
    pub unc: f64,
    pub rel: f64,
    pub res: f64,
    /// Within-bin forecast variance (zero under quantization).
    pub within_bin_var: f64,
    /// Within-bin forecast-outcome covariance (zero under quantization).
    pub within_bin_cov: f64,
    pub n: usize,
    pub bins: usize,
    pub variant: MurphyVariant,
}

pub const DEFAULT_BINS: usize = 10;

fn bin_index(forecast: f64, bins: usize) -> usize {
    ((forecast * bins as f64) as usize).min(bins - 1)
}

/// Decompose the Brier score of (forecast, outcome) pairs over equal-width
/// bins.
pub fn murphy_decompose(
    pairs: &[(f64, bool)],
    bins: usize,
    variant: MurphyVariant,
) -> Result<MurphyDecomposition, ScoreError> {
    if pairs.is_empty() {
        return Err(ScoreError::NoData);
    }
    if bins == 0 {
        return Err(ScoreError::BadParameter("bins must be positive".into()));
    }
    for &(f, _) in pairs {
        if !(0.0..=1.0).contains(&f) {
            return Err(ScoreError::BadParameter(format!(
                "forecast {f} outside [0,1]"
            )));
        }
    }
    let n = pairs.len() as f64;
    let obar = pairs.iter().filter(|(_, o)| *o).count() as f64 / n;
    let unc = obar * (1.0 - obar);

    struct Bin {
        n: f64,
        f_sum: f64,
        o_sum: f64,
        f_sq_sum: f64,
        fo_sum: f64,
    }
    let mut table: Vec<Bin> = (0..bins)
        .map(|_| Bin {
            n: 0.0,
            f_sum: 0.0,
            o_sum: 0.0,
            f_sq_sum: 0.0,
            fo_sum: 0.0,
        })
        .collect();
    for &(f, o) in pairs {
        let b = &mut table[bin_index(f, bins)];
        let o = f64::from(o as u8);
        b.n += 1.0;
        b.f_sum += f;
        b.o_sum += o;
        b.f_sq_sum += f * f;
        b.fo_sum += f * o;
    }

    let mut rel = 0.0;
    let mut res = 0.0;
    let mut wbv = 0.0;
    let mut wbc = 0.0;
    for b in table.iter().filter(|b| b.n > 0.0) {
        let fbar = b.f_sum / b.n;
        let obar_b = b.o_sum / b.n;
        let w = b.n / n;
        rel += w * (fbar - obar_b) * (fbar - obar_b);
        res += w * (obar_b - obar) * (obar_b - obar);
        wbv += w * (b.f_sq_sum / b.n - fbar * fbar);
        wbc += w * (b.fo_sum / b.n - fbar * obar_b);
    }

    let brier = match variant {
        MurphyVariant::QuantizedMeans => {
            let mut sum = 0.0;
            for &(f, o) in pairs {
                let b = &table[bin_index(f, bins)];
                let fq = b.f_sum / b.n;
                let d = fq - f64::from(o as u8);
                sum += d * d;
            }
            sum / n
        }
        MurphyVariant::RawForecasts => {
            pairs
                .iter()
                .map(|&(f, o)| {
                    let d = f - f64::from(o as u8);
                    d * d
                })
                .sum::<f64>()
                / n
        }
    };
    let (within_bin_var, within_bin_cov) = match variant {
        MurphyVariant::QuantizedMeans => (0.0, 0.0),
        MurphyVariant::RawForecasts => (wbv, wbc),
    };
    Ok(MurphyDecomposition {
        brier,
        unc,
        rel,
        res,
        within_bin_var,
        within_bin_cov,
        n: pairs.len(),
        bins,
        variant,
    })
}

/// Share of a population's total resolution accomplished by the supplied
/// forecasts: RES(forecasts) / RES(outcomes), the latter being UNC exactly.
pub fn resolution_share(pairs: &[(f64, bool)], bins: usize) -> Result<f64, ScoreError> {
    if pairs.len() < 2 {
        return Err(ScoreError::TooFewMarkets);
    }
    let d = murphy_decompose(pairs, bins, MurphyVariant::QuantizedMeans)?;
    if d.unc == 0.0 {
        return Err(ScoreError::DegenerateOutcomes);
    }
    Ok(d.res / d.unc)
}

/// Thresholds collapsing the label vector into a binary label.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelThresholds {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        LabelThresholds {
            theta1: 0.5,
            theta2: 0.5,
            theta3: 0.5,
        }
    }
}

/// Per-market label vector plus its binary collapse.
#[derive(Debug, Clone, Serialize)]
pub struct LabelVector {
    pub market_id: String,
    pub ils: Option<f64>,
    pub ils_30min: Option<f64>,
    pub ils_2h: Option<f64>,
    pub v_pre: Option<f64>,
    pub hhi_top10: Option<f64>,
    pub mean_wn: Option<f64>,
    /// None when any thresholded component is missing.
    pub y_bin: Option<bool>,
    pub partial: bool,
    pub thresholds: LabelThresholds,
}

/// Collapse a leakage label into the training vector. The binary label fires
/// only when every thresholded component is present and clears its threshold;
/// missing components leave it undefined rather than false.
pub fn aggregate_label(label: &LeakageLabel, thresholds: LabelThresholds) -> LabelVector {
    let window = |key: &str| label.ils_windows.get(key).copied().flatten();
    let components = (label.ils, label.v_pre, label.mean_wallet_novelty);
    let (y_bin, partial) = match components {
        (Some(ils), Some(v_pre), Some(wn)) => (
            Some(ils >= thresholds.theta1 && v_pre >= thresholds.theta2 && wn >= thresholds.theta3),
            false,
        ),
        _ => (None, true),
    };
    LabelVector {
        market_id: label.market_id.clone(),
        ils: label.ils,
        ils_30min: window("30m"),
        ils_2h: window("2h"),
        v_pre: label.v_pre,
        hhi_top10: label.hhi_top10,
        mean_wn: label.mean_wallet_novelty,
        y_bin,
        partial,
        thresholds,
    }
}

/// Inference-time feature row: microstructure features plus wallet novelty
/// and the category / liquidity / time-to-resolution encodings.
#[derive(Debug, Clone, Serialize)]
pub struct FeatureVector {
    pub market_id: String,
    pub at: Ts,
    #[serde(flatten)]
    pub micro: MicroFeatures,
    pub mean_wn: Option<f64>,
    pub c_cat: u8,
    /// floor(log10(volume to date)); None when no volume has printed yet.
    pub c_liq: Option<i64>,
    /// ln(1 + hours to the configured resolution date).
    pub c_ttr: f64,
}

pub fn assemble_features(
    micro: &MicroFeatures,
    mean_wn: Option<f64>,
    market: &MarketRecord,
    t: Ts,
) -> Result<FeatureVector, ScoreError> {
    if t >= market.resolve_ts {
        return Err(ScoreError::MarketClosed {
            market_id: market.market_id.clone(),
            resolve_ts: market.resolve_ts,
            t,
        });
    }
    let c_liq = if market.total_volume_usdc > 0.0 {
        Some(market.total_volume_usdc.log10().floor() as i64)
    } else {
        None
    };
    let hours_to_resolution = (market.resolve_ts - t) as f64 / SECS_PER_HOUR as f64;
    Ok(FeatureVector {
        market_id: market.market_id.clone(),
        at: t,
        micro: micro.clone(),
        mean_wn,
        c_cat: market.category.code(),
        c_liq,
        c_ttr: (1.0 + hours_to_resolution).ln(),
    })
}

/// Power-analysis inputs for distinguishing a detector with sensitivity `pi1`
/// from a no-skill baseline with false-positive rate `pi0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerSpec {
    pub pi1: f64,
    pub pi0: f64,
    /// Significance level (one-sided unless `two_sided`).
    pub kappa: f64,
    pub power: f64,
    /// Use the two-sided z quantile z_{1-kappa/2}.
    pub two_sided: bool,
    /// Add the baseline variance pi0(1-pi0) to the effect variance.
    pub pooled_variance: bool,
}

impl Default for PowerSpec {
    fn default() -> Self {
        PowerSpec {
            pi1: 0.7,
            pi0: 0.2,
            kappa: 0.05,
            power: 0.80,
            two_sided: false,
            pooled_variance: false,
        }
    }
}

/// Required number of labeled positives:
///
/// ```text
/// n = ceil( (z_{1-kappa} + z_{power})^2 * pi1 (1 - pi1) / (pi1 - pi0)^2 )
/// ```
///
/// The variant flags swap in the two-sided quantile and/or add the baseline
/// variance term.
pub fn required_positives(spec: &PowerSpec) -> Result<u64, ScoreError> {
    if !(spec.pi0 > 0.0 && spec.pi1 < 1.0 && spec.pi1 > spec.pi0) {
        return Err(ScoreError::InvalidEffect {
            pi1: spec.pi1,
            pi0: spec.pi0,
        });
    }
    if !(spec.kappa > 0.0 && spec.kappa < 1.0 && spec.power > 0.0 && spec.power < 1.0) {
        return Err(ScoreError::BadParameter(
            "kappa and power must lie in (0,1)".into(),
        ));
    }
    let z_alpha = if spec.two_sided {
        inverse_normal_cdf(1.0 - spec.kappa / 2.0)
    } else {
        inverse_normal_cdf(1.0 - spec.kappa)
    };
    let z_power = inverse_normal_cdf(spec.power);
    let mut variance = spec.pi1 * (1.0 - spec.pi1);
    if spec.pooled_variance {
        variance += spec.pi0 * (1.0 - spec.pi0);
    }
    let effect = spec.pi1 - spec.pi0;
    let n = (z_alpha + z_power).powi(2) * variance / (effect * effect);
    Ok(n.ceil() as u64)
}
