//! Deterministic synthetic-market generator and ground-truth oracle.
//!
//! Three regimes:
//!
//! - `null` — a driftless logit-space walk; the outcome is drawn as
//!   Bernoulli(final price), so the population is calibrated by construction.
//! - `event_leak` — each market receives a calibrated partial signal by
//!   T_news: the news-time price is drawn from a Beta distribution centered
//!   on the opening price whose variance injects exactly the requested
//!   leakage fraction f, the outcome is drawn as Bernoulli(news-time price),
//!   and the path bridges open -> news target -> outcome. In conditional
//!   expectation the pre-news price moves to p_open + f * (outcome - p_open),
//!   and the population mean leakage score recovers f.
//! - `deadline_leak` — event times drawn from an exponential hazard; markets
//!   whose event lands inside the window resolve YES with informed buying
//!   injected just before the event (pre-event price pinned at
//!   theta_open + f * (1 - theta_open)); the rest expire NO at the deadline.
//!
//! Determinism: every market draws from its own ChaCha12 stream derived from
//! the scenario seed via a SplitMix64 mix of the market index, so generation
//! is reproducible byte-for-byte and safe to parallelize by market.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hawkes;
use crate::io::{write_jsonl, IoError};
use crate::market::{
    AnchorTier, Category, MarketRecord, NewsAnchor, Outcome, ResolutionType, Side, Trade,
};
use crate::time::{Ts, SECS_PER_DAY, SECS_PER_MINUTE};
use crate::wallet::{Inflow, WalletContext};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Hawkes(#[from] hawkes::HawkesError),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Null,
    EventLeak,
    DeadlineLeak,
}

/// Opening-price distribution.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum POpen {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
}

impl POpen {
    fn draw(&self, rng: &mut ChaCha12Rng) -> f64 {
        match *self {
            POpen::Fixed(p) => p,
            POpen::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

/// Trade-arrival process inside each market.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrival {
    Poisson { rate_per_min: f64 },
    Hawkes { mu_per_min: f64, alpha: f64, beta: f64 },
}

/// Which novelty components the injected informed wallets trip.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct InformedWalletProfile {
    pub fresh: bool,
    pub few_markets: bool,
    pub concentrated_funding: bool,
    pub late_entry: bool,
}

impl Default for InformedWalletProfile {
    fn default() -> Self {
        InformedWalletProfile {
            fresh: true,
            few_markets: true,
            concentrated_funding: true,
            late_entry: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_markets: usize,
    pub regime: Regime,
    /// Injected leakage fraction f in [0, 1].
    pub leak_fraction: f64,
    pub p_open: POpen,
    /// Event-time hazard for the deadline regime, per day.
    pub hazard_lambda_per_day: f64,
    pub informed_wallet_profile: InformedWalletProfile,
    pub arrival: Arrival,
    /// Logit-space diffusion per square-root day.
    pub noise_scale: f64,
    pub lifetime_days: f64,
    /// Fraction of the lifetime elapsed at T_news (event regimes).
    pub pre_news_fraction: f64,
    pub category: Category,
    pub start_ts: Ts,
    pub market_spacing_secs: i64,
    /// Token-size scale for background trades.
    pub size_scale: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            seed: 0,
            n_markets: 100,
            regime: Regime::Null,
            leak_fraction: 0.5,
            p_open: POpen::Fixed(0.5),
            hazard_lambda_per_day: 0.306,
            informed_wallet_profile: InformedWalletProfile::default(),
            arrival: Arrival::Poisson { rate_per_min: 0.5 },
            noise_scale: 0.25,
            lifetime_days: 1.0,
            pre_news_fraction: 0.75,
            category: Category::Other,
            start_ts: Ts::from_unix(1_767_225_600), // 2026-01-01T00:00:00Z
            market_spacing_secs: 3_600,
            size_scale: 200.0,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_markets == 0 {
            return Err(SynthError::Config("n_markets must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.leak_fraction) {
            return Err(SynthError::Config("leak_fraction must be in [0,1]".into()));
        }
        match self.p_open {
            POpen::Fixed(p) if !(p > 0.0 && p < 1.0) => {
                return Err(SynthError::Config("p_open must lie inside (0,1)".into()));
            }
            POpen::Uniform { lo, hi } if !(lo > 0.0 && hi < 1.0 && lo < hi) => {
                return Err(SynthError::Config("p_open bounds must satisfy 0 < lo < hi < 1".into()));
            }
            _ => {}
        }
        if !(self.hazard_lambda_per_day > 0.0) {
            return Err(SynthError::Config("hazard lambda must be positive".into()));
        }
        match self.arrival {
            Arrival::Poisson { rate_per_min } if !(rate_per_min > 0.0) => {
                return Err(SynthError::Config("arrival rate must be positive".into()));
            }
            Arrival::Hawkes { mu_per_min, alpha, beta } => {
                if !(mu_per_min > 0.0) || alpha < 0.0 || !(beta > 0.0) {
                    return Err(SynthError::Config("bad hawkes arrival parameters".into()));
                }
                if alpha / beta >= 1.0 {
                    return Err(SynthError::Config("hawkes arrivals are supercritical".into()));
                }
            }
            _ => {}
        }
        if self.noise_scale < 0.0 {
            return Err(SynthError::Config("noise_scale must be non-negative".into()));
        }
        if !(self.lifetime_days > 0.0) {
            return Err(SynthError::Config("lifetime_days must be positive".into()));
        }
        if !(self.pre_news_fraction > 0.0 && self.pre_news_fraction < 1.0) {
            return Err(SynthError::Config("pre_news_fraction must lie inside (0,1)".into()));
        }
        if !(self.size_scale > 0.0) {
            return Err(SynthError::Config("size_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Per-market ground truth recorded alongside the generated files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub market_id: String,
    pub regime: Regime,
    pub injected_f: Option<f64>,
    pub p_open: f64,
    pub p_news_target: Option<f64>,
    pub p_final: f64,
    pub outcome: Outcome,
    /// Raw exponential event-time draw in days from open, recorded even when
    /// it falls beyond the deadline (the market then resolves NO).
    pub t_event_raw_days: Option<f64>,
    pub informed_wallets: Vec<String>,
}

impl crate::io::Validate for GroundTruth {
    fn validate(&self) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthBundle {
    pub markets: Vec<MarketRecord>,
    pub trades: Vec<Trade>,
    pub anchors: Vec<NewsAnchor>,
    pub wallets: Vec<WalletContext>,
    pub ground_truth: Vec<GroundTruth>,
}

impl SynthBundle {
    /// Write the bundle in the same JSONL formats every other stage consumes.
    pub fn write_dir(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir).map_err(|source| IoError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        write_jsonl(&dir.join("markets.jsonl"), &self.markets)?;
        write_jsonl(&dir.join("trades.jsonl"), &self.trades)?;
        write_jsonl(&dir.join("anchors.jsonl"), &self.anchors)?;
        write_jsonl(&dir.join("wallets.jsonl"), &self.wallets)?;
        write_jsonl(&dir.join("ground_truth.jsonl"), &self.ground_truth)?;
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent per-market stream: ChaCha12 keyed by SplitMix64(seed, index).
fn market_rng(seed: u64, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index)))
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

const PRICE_CLAMP: (f64, f64) = (0.002, 0.998);

fn clamp_price(p: f64) -> f64 {
    p.clamp(PRICE_CLAMP.0, PRICE_CLAMP.1)
}

/// Brownian bridge in logit space from `from` to `to` over `steps` steps.
fn bridge_path(
    from: f64,
    to: f64,
    steps: usize,
    sigma_step: f64,
    rng: &mut ChaCha12Rng,
) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut xs = Vec::with_capacity(steps + 1);
    let mut x = from;
    xs.push(x);
    for m in 0..steps {
        let remaining = (steps - m) as f64;
        let drift = (to - x) / remaining;
        let vol = if remaining > 1.0 {
            sigma_step * ((remaining - 1.0) / remaining).sqrt()
        } else {
            0.0
        };
        x += drift + vol * normal.sample(rng);
        xs.push(x);
    }
    *xs.last_mut().unwrap() = to;
    xs
}

fn free_walk(from: f64, steps: usize, sigma_step: f64, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut xs = Vec::with_capacity(steps + 1);
    let mut x = from;
    xs.push(x);
    for _ in 0..steps {
        x += sigma_step * normal.sample(rng);
        xs.push(x);
    }
    xs
}

/// Arrival seconds over [0, horizon_secs), excluding pinned minutes.
fn arrival_seconds(
    arrival: Arrival,
    horizon_secs: f64,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<f64>, SynthError> {
    match arrival {
        Arrival::Poisson { rate_per_min } => {
            let rate_per_sec = rate_per_min / 60.0;
            let mut out = Vec::new();
            let mut t = 0.0;
            loop {
                let u: f64 = rng.random();
                t += -u.ln() / rate_per_sec;
                if t >= horizon_secs {
                    break;
                }
                out.push(t);
            }
            Ok(out)
        }
        Arrival::Hawkes { mu_per_min, alpha, beta } => {
            Ok(hawkes::simulate(mu_per_min / 60.0, alpha, beta, horizon_secs, rng)?)
        }
    }
}

/// Public Hawkes arrival generator (thinning, seed-deterministic).
pub fn gen_hawkes_arrivals(
    mu: f64,
    alpha: f64,
    beta: f64,
    horizon_secs: f64,
    seed: u64,
) -> Result<Vec<f64>, SynthError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Ok(hawkes::simulate(mu, alpha, beta, horizon_secs, &mut rng)?)
}

const BACKGROUND_WALLETS: usize = 50;

fn background_wallets(start: Ts) -> Vec<WalletContext> {
    let two_years = 2 * 365 * SECS_PER_DAY;
    (0..BACKGROUND_WALLETS)
        .map(|k| WalletContext {
            wallet_id: format!("bg{k:02}"),
            first_tx_ts: start - two_years,
            market_first_trade_ts: (0..10)
                .map(|j| start - two_years + (j + 1) * 30 * SECS_PER_DAY + k as i64)
                .collect(),
            inflows: (0..4)
                .map(|j| Inflow {
                    source: format!("src{j}"),
                    amount: 25.0,
                    ts: None,
                })
                .collect(),
        })
        .collect()
}

fn informed_wallet(
    id: String,
    entry: Ts,
    start: Ts,
    profile: InformedWalletProfile,
) -> WalletContext {
    let two_years = 2 * 365 * SECS_PER_DAY;
    WalletContext {
        wallet_id: id,
        first_tx_ts: if profile.fresh { entry - 1_800 } else { start - two_years },
        market_first_trade_ts: if profile.few_markets {
            Vec::new()
        } else {
            (0..10).map(|j| start - two_years + (j + 1) * 30 * SECS_PER_DAY).collect()
        },
        inflows: if profile.concentrated_funding {
            vec![Inflow {
                source: "fresh_src".into(),
                amount: 1_000.0,
                ts: Some(entry - 1_200),
            }]
        } else {
            (0..4)
                .map(|j| Inflow {
                    source: format!("src{j}"),
                    amount: 250.0,
                    ts: None,
                })
                .collect()
        },
    }
}

struct MarketPieces {
    market: MarketRecord,
    trades: Vec<Trade>,
    anchors: Vec<NewsAnchor>,
    informed: Vec<WalletContext>,
    truth: GroundTruth,
}

fn push_trade(
    trades: &mut Vec<Trade>,
    market_id: &str,
    ts: Ts,
    price: f64,
    size: f64,
    side: Side,
    wallet: String,
) {
    trades.push(Trade {
        ts,
        market_id: market_id.to_string(),
        wallet_id: wallet,
        side,
        price: clamp_price(price),
        size,
    });
}

fn background_trades(
    trades: &mut Vec<Trade>,
    market_id: &str,
    open: Ts,
    path: &[f64],
    pinned_minutes: &[i64],
    spec: &ScenarioSpec,
    rng: &mut ChaCha12Rng,
) -> Result<(), SynthError> {
    let horizon = (path.len() as f64 - 1.0) * 60.0;
    for s in arrival_seconds(spec.arrival, horizon, rng)? {
        let minute = (s / 60.0) as i64;
        if pinned_minutes.contains(&minute) {
            continue;
        }
        let base = logistic(path[minute as usize]);
        let jitter = 0.002 * (rng.random::<f64>() - 0.5);
        let side = if rng.random_bool(0.5) { Side::BuyYes } else { Side::SellYes };
        let wallet = format!("bg{:02}", rng.random_range(0..BACKGROUND_WALLETS));
        push_trade(
            trades,
            market_id,
            open + s as i64,
            base + jitter,
            spec.size_scale * rng.random_range(0.5..1.5),
            side,
            wallet,
        );
    }
    Ok(())
}

fn gen_event_market(spec: &ScenarioSpec, index: usize) -> Result<MarketPieces, SynthError> {
    let mut rng = market_rng(spec.seed, index as u64);
    let market_id = format!("syn{index:05}");
    let open = spec.start_ts + index as i64 * spec.market_spacing_secs;
    let lifetime_minutes = ((spec.lifetime_days * 1_440.0).round() as i64).max(8);
    let news_minute = ((spec.pre_news_fraction * lifetime_minutes as f64).round() as i64)
        .clamp(2, lifetime_minutes - 2);
    let resolve = open + (lifetime_minutes + 1) * SECS_PER_MINUTE;
    let sigma_step = spec.noise_scale / (1_440.0f64).sqrt();

    let p_open = spec.p_open.draw(&mut rng);
    let f = spec.leak_fraction;

    // Calibrated news-time posterior and outcome.
    let (p_news_raw, outcome) = match spec.regime {
        Regime::Null => (f64::NAN, Outcome::No), // decided after the walk
        Regime::EventLeak => {
            if f <= 1e-9 {
                let y = rng.random_bool(p_open);
                (p_open, if y { Outcome::Yes } else { Outcome::No })
            } else if f >= 0.999 {
                let y = rng.random_bool(p_open);
                (
                    if y { 1.0 } else { 0.0 },
                    if y { Outcome::Yes } else { Outcome::No },
                )
            } else {
                let nu = (1.0 - f) / f;
                let beta = Beta::new(p_open * nu, (1.0 - p_open) * nu)
                    .map_err(|e| SynthError::Config(format!("beta draw: {e}")))?;
                let p: f64 = beta.sample(&mut rng);
                let p = p.clamp(1e-9, 1.0 - 1e-9);
                let y = rng.random_bool(p);
                (p, if y { Outcome::Yes } else { Outcome::No })
            }
        }
        Regime::DeadlineLeak => unreachable!("deadline markets use gen_deadline_market"),
    };

    let (path, p_news_target, p_final, outcome) = match spec.regime {
        Regime::Null => {
            let xs = free_walk(logit(p_open), lifetime_minutes as usize, sigma_step, &mut rng);
            let p_final = clamp_price(logistic(*xs.last().unwrap()));
            let y = rng.random_bool(p_final);
            let outcome = if y { Outcome::Yes } else { Outcome::No };
            (xs, None, p_final, outcome)
        }
        Regime::EventLeak => {
            let p_news = clamp_price(p_news_raw);
            let p_final = clamp_price(match outcome {
                Outcome::Yes => 0.995,
                Outcome::No => 0.005,
            });
            let mut xs = bridge_path(
                logit(p_open),
                logit(p_news),
                news_minute as usize,
                sigma_step,
                &mut rng,
            );
            let tail = bridge_path(
                logit(p_news),
                logit(p_final),
                (lifetime_minutes - news_minute) as usize,
                sigma_step,
                &mut rng,
            );
            xs.extend_from_slice(&tail[1..]);
            (xs, Some(p_news), p_final, outcome)
        }
        Regime::DeadlineLeak => unreachable!(),
    };

    let t_news = open + news_minute * SECS_PER_MINUTE + 30;
    let mut trades = Vec::new();

    // Pinned prints make the opening, news, and final prices exact.
    let p_news_pin = p_news_target.unwrap_or_else(|| clamp_price(logistic(path[news_minute as usize])));
    push_trade(&mut trades, &market_id, open, p_open, spec.size_scale, Side::BuyYes, "bg00".into());
    push_trade(
        &mut trades,
        &market_id,
        open + news_minute * SECS_PER_MINUTE,
        p_news_pin,
        spec.size_scale,
        Side::BuyYes,
        "bg01".into(),
    );
    push_trade(
        &mut trades,
        &market_id,
        open + lifetime_minutes * SECS_PER_MINUTE,
        p_final,
        spec.size_scale,
        Side::BuyYes,
        "bg02".into(),
    );

    background_trades(
        &mut trades,
        &market_id,
        open,
        &path,
        &[0, news_minute, lifetime_minutes],
        spec,
        &mut rng,
    )?;

    // Informed wallet activity concentrated shortly before the news.
    let mut informed = Vec::new();
    let mut informed_ids = Vec::new();
    if matches!(spec.regime, Regime::EventLeak) && f > 1e-9 {
        let id = format!("ins_{market_id}");
        let profile = spec.informed_wallet_profile;
        let inj_minutes = (news_minute / 4).clamp(1, 120);
        let side = outcome.winning_side();
        let mut entry = t_news;
        for j in 0..5 {
            let minute = news_minute - 1 - rng.random_range(0..inj_minutes);
            let ts = open + minute * SECS_PER_MINUTE + 10 + j;
            entry = entry.min(ts);
            let price = logistic(path[minute as usize]);
            push_trade(
                &mut trades,
                &market_id,
                ts,
                price,
                spec.size_scale * rng.random_range(2.0..6.0),
                side,
                id.clone(),
            );
        }
        let entry = if profile.late_entry {
            // Late-entry variants also trade inside the final two hours.
            let late_ts = resolve - 3_600;
            let price = logistic(path[((late_ts - open) / 60).clamp(0, lifetime_minutes) as usize]);
            push_trade(
                &mut trades,
                &market_id,
                late_ts,
                price,
                spec.size_scale * 3.0,
                side,
                id.clone(),
            );
            entry.min(late_ts)
        } else {
            entry
        };
        informed.push(informed_wallet(id.clone(), entry, spec.start_ts, profile));
        informed_ids.push(id);
    }

    trades.sort_by(|a, b| a.ts.cmp(&b.ts).then(a.wallet_id.cmp(&b.wallet_id)));

    let anchors = vec![
        NewsAnchor {
            market_id: market_id.clone(),
            t_news,
            tier: AnchorTier::Article,
            proxy_offset_hours: None,
            confidence: 0.9,
        },
        NewsAnchor {
            market_id: market_id.clone(),
            t_news: t_news + 600,
            tier: AnchorTier::ProxyOffset,
            proxy_offset_hours: Some((resolve - (t_news + 600)) as f64 / 3_600.0),
            confidence: 0.5,
        },
    ];

    let volume: f64 = trades.iter().map(|t| t.notional()).sum();
    let market = MarketRecord {
        market_id: market_id.clone(),
        question: format!("Will the outcome be announced in session {index}?"),
        category: spec.category,
        open_ts: open,
        resolve_ts: resolve,
        deadline_ts: None,
        outcome,
        total_volume_usdc: volume,
        resolution_type: ResolutionType::EventResolved,
    };
    let truth = GroundTruth {
        market_id,
        regime: spec.regime,
        injected_f: matches!(spec.regime, Regime::EventLeak).then_some(f),
        p_open,
        p_news_target,
        p_final,
        outcome,
        t_event_raw_days: None,
        informed_wallets: informed_ids,
    };
    Ok(MarketPieces {
        market,
        trades,
        anchors,
        informed,
        truth,
    })
}

fn gen_deadline_market(spec: &ScenarioSpec, index: usize) -> Result<MarketPieces, SynthError> {
    let mut rng = market_rng(spec.seed, index as u64);
    let market_id = format!("syn{index:05}");
    let open = spec.start_ts + index as i64 * spec.market_spacing_secs;
    let lifetime_minutes = ((spec.lifetime_days * 1_440.0).round() as i64).max(8);
    let deadline = open + lifetime_minutes * SECS_PER_MINUTE;
    let deadline_days = lifetime_minutes as f64 / 1_440.0;
    let f = spec.leak_fraction;
    let p_open = spec.p_open.draw(&mut rng);

    // Raw exponential event-time draw, recorded even when censored.
    let u: f64 = rng.random();
    let event_days = -u.ln() / spec.hazard_lambda_per_day;
    let event_minute = (event_days * 1_440.0).floor() as i64;

    let lambda = spec.hazard_lambda_per_day;
    let passive = |minute: i64| -> f64 {
        let remaining = (lifetime_minutes - minute) as f64 / 1_440.0;
        let num = 1.0 - (-lambda * remaining).exp();
        let den = 1.0 - (-lambda * deadline_days).exp();
        clamp_price(p_open * num / den)
    };

    let yes_case = event_minute >= 2 && event_minute <= lifetime_minutes - 2;
    let mut trades = Vec::new();
    let mut informed = Vec::new();
    let mut informed_ids = Vec::new();

    let pieces = if yes_case {
        let t_event = open + event_minute * SECS_PER_MINUTE + 30;
        let resolve = t_event + 1_800;
        let p_pre_target = clamp_price(p_open + f * (1.0 - p_open));
        let inj_minutes = (event_minute / 2).clamp(1, 120);
        let inj_start = event_minute - inj_minutes;

        // Passive decay, then an informed ramp pinned just before the event,
        // then the public jump.
        let mut path = Vec::with_capacity(lifetime_minutes as usize + 1);
        for m in 0..=lifetime_minutes {
            path.push(logit(passive(m)));
        }
        let ramp = bridge_path(
            path[inj_start as usize],
            logit(p_pre_target),
            inj_minutes as usize,
            spec.noise_scale / (1_440.0f64).sqrt() * 0.3,
            &mut rng,
        );
        for (k, v) in ramp.iter().enumerate() {
            path[inj_start as usize + k] = *v;
        }
        for m in event_minute..=lifetime_minutes {
            path[m as usize] = logit(0.995);
        }

        // Pins: opening, the pre-event minute, and the post-event jump.
        push_trade(&mut trades, &market_id, open, p_open, spec.size_scale, Side::BuyYes, "bg00".into());
        push_trade(
            &mut trades,
            &market_id,
            open + (event_minute - 1) * SECS_PER_MINUTE,
            p_pre_target,
            spec.size_scale,
            Side::BuyYes,
            "bg01".into(),
        );
        push_trade(
            &mut trades,
            &market_id,
            open + event_minute * SECS_PER_MINUTE + 40,
            0.995,
            spec.size_scale,
            Side::BuyYes,
            "bg02".into(),
        );

        // Background flow ends at the event; afterwards the market is settled
        // in practice.
        let horizon_path: Vec<f64> = path[..=(event_minute as usize)].to_vec();
        background_trades(
            &mut trades,
            &market_id,
            open,
            &horizon_path,
            &[0, event_minute - 1, event_minute],
            spec,
            &mut rng,
        )?;

        if f > 1e-9 {
            let id = format!("ins_{market_id}");
            let side = Side::BuyYes;
            let mut entry = t_event;
            for j in 0..5 {
                let minute = inj_start + rng.random_range(0..inj_minutes);
                let ts = open + minute * SECS_PER_MINUTE + 10 + j;
                entry = entry.min(ts);
                push_trade(
                    &mut trades,
                    &market_id,
                    ts,
                    logistic(path[minute as usize]),
                    spec.size_scale * rng.random_range(2.0..6.0),
                    side,
                    id.clone(),
                );
            }
            informed.push(informed_wallet(
                id.clone(),
                entry,
                spec.start_ts,
                spec.informed_wallet_profile,
            ));
            informed_ids.push(id);
        }

        trades.sort_by(|a, b| a.ts.cmp(&b.ts).then(a.wallet_id.cmp(&b.wallet_id)));
        let anchors = vec![NewsAnchor {
            market_id: market_id.clone(),
            t_news: t_event,
            tier: AnchorTier::EventOccurrence,
            proxy_offset_hours: None,
            confidence: 1.0,
        }];
        let volume: f64 = trades.iter().map(|t| t.notional()).sum();
        let market = MarketRecord {
            market_id: market_id.clone(),
            question: format!("Will the shipment arrive by end of the period? (case {index})"),
            category: spec.category,
            open_ts: open,
            resolve_ts: resolve,
            deadline_ts: Some(deadline),
            outcome: Outcome::Yes,
            total_volume_usdc: volume,
            resolution_type: ResolutionType::DeadlineResolved,
        };
        let truth = GroundTruth {
            market_id,
            regime: spec.regime,
            injected_f: Some(f),
            p_open,
            p_news_target: Some(p_pre_target),
            p_final: 0.995,
            outcome: Outcome::Yes,
            t_event_raw_days: Some(event_days),
            informed_wallets: informed_ids,
        };
        MarketPieces {
            market,
            trades,
            anchors,
            informed,
            truth,
        }
    } else {
        // The event never lands inside the window: passive decay to expiry.
        let resolve = deadline + 1_800;
        let mut path = Vec::with_capacity(lifetime_minutes as usize + 1);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let sigma_step = spec.noise_scale / (1_440.0f64).sqrt();
        for m in 0..=lifetime_minutes {
            let noise: f64 = normal.sample(&mut rng);
            path.push(logit(passive(m)) + sigma_step * noise);
        }
        push_trade(&mut trades, &market_id, open, p_open, spec.size_scale, Side::BuyYes, "bg00".into());
        background_trades(&mut trades, &market_id, open, &path, &[0], spec, &mut rng)?;
        trades.sort_by(|a, b| a.ts.cmp(&b.ts).then(a.wallet_id.cmp(&b.wallet_id)));

        let anchors = vec![NewsAnchor {
            market_id: market_id.clone(),
            t_news: deadline,
            tier: AnchorTier::DeadlineExpiry,
            proxy_offset_hours: None,
            confidence: 1.0,
        }];
        let volume: f64 = trades.iter().map(|t| t.notional()).sum();
        let market = MarketRecord {
            market_id: market_id.clone(),
            question: format!("Will the shipment arrive by end of the period? (case {index})"),
            category: spec.category,
            open_ts: open,
            resolve_ts: resolve,
            deadline_ts: Some(deadline),
            outcome: Outcome::No,
            total_volume_usdc: volume,
            resolution_type: ResolutionType::DeadlineResolved,
        };
        let truth = GroundTruth {
            market_id,
            regime: spec.regime,
            injected_f: Some(f),
            p_open,
            p_news_target: None,
            p_final: PRICE_CLAMP.0,
            outcome: Outcome::No,
            t_event_raw_days: Some(event_days),
            informed_wallets: informed_ids,
        };
        MarketPieces {
            market,
            trades,
            anchors,
            informed,
            truth,
        }
    };
    Ok(pieces)
}

/// Generate a full population. Identical specs (including the seed) produce
/// byte-identical bundles.
pub fn gen_population(spec: &ScenarioSpec) -> Result<SynthBundle, SynthError> {
    spec.validate()?;
    let mut markets = Vec::with_capacity(spec.n_markets);
    let mut trades = Vec::new();
    let mut anchors = Vec::new();
    let mut wallets = background_wallets(spec.start_ts);
    let mut ground_truth = Vec::with_capacity(spec.n_markets);

    for index in 0..spec.n_markets {
        let pieces = match spec.regime {
            Regime::Null | Regime::EventLeak => gen_event_market(spec, index)?,
            Regime::DeadlineLeak => gen_deadline_market(spec, index)?,
        };
        markets.push(pieces.market);
        trades.extend(pieces.trades);
        anchors.extend(pieces.anchors);
        wallets.extend(pieces.informed);
        ground_truth.push(pieces.truth);
    }
    trades.sort_by(|a, b| {
        a.ts.cmp(&b.ts)
            .then_with(|| a.market_id.cmp(&b.market_id))
            .then_with(|| a.wallet_id.cmp(&b.wallet_id))
    });
    Ok(SynthBundle {
        markets,
        trades,
        anchors,
        wallets,
        ground_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leakage::{compute_ils, ScopeConfig};
    use crate::market::build_price_series;
    use std::collections::HashMap;

    fn recovered_ils(bundle: &SynthBundle) -> Vec<f64> {
        let cfg = ScopeConfig::default();
        let mut by_market: HashMap<&str, Vec<Trade>> = HashMap::new();
        for t in &bundle.trades {
            by_market.entry(t.market_id.as_str()).or_default().push(t.clone());
        }
        let mut out = Vec::new();
        for m in &bundle.markets {
            let trades = &by_market[m.market_id.as_str()];
            let series = build_price_series(trades).unwrap();
            let anchor = bundle
                .anchors
                .iter()
                .find(|a| a.market_id == m.market_id && a.tier == AnchorTier::Article)
                .unwrap();
            let r = compute_ils(m, &series, anchor, &cfg).unwrap();
            if let Some(v) = r.ils {
                out.push(v);
            }
        }
        out
    }

    #[test]
    fn determinism_byte_identical() {
        let spec = ScenarioSpec {
            seed: 42,
            n_markets: 8,
            regime: Regime::EventLeak,
            ..Default::default()
        };
        let a = gen_population(&spec).unwrap();
        let b = gen_population(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let da = dir.path().join("a");
        let db = dir.path().join("b");
        a.write_dir(&da).unwrap();
        b.write_dir(&db).unwrap();
        for f in ["markets.jsonl", "trades.jsonl", "anchors.jsonl", "wallets.jsonl", "ground_truth.jsonl"] {
            let ba = std::fs::read(da.join(f)).unwrap();
            let bb = std::fs::read(db.join(f)).unwrap();
            assert_eq!(ba, bb, "{f} differs between identical runs");
        }
    }

    #[test]
    fn null_population_centers_near_zero() {
        let spec = ScenarioSpec {
            seed: 7,
            n_markets: 300,
            regime: Regime::Null,
            ..Default::default()
        };
        let bundle = gen_population(&spec).unwrap();
        let mut ils = recovered_ils(&bundle);
        assert!(ils.len() > 250);
        ils.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = crate::stats::percentile(&ils, 0.5);
        assert!(median.abs() < 0.1, "null median {median}");
        let mean_abs = ils.iter().map(|v| v.abs()).sum::<f64>() / ils.len() as f64;
        assert!(mean_abs < 0.5, "null mean |ILS| {mean_abs}");
    }

    #[test]
    fn event_leak_recovers_half() {
        let spec = ScenarioSpec {
            seed: 11,
            n_markets: 300,
            regime: Regime::EventLeak,
            leak_fraction: 0.5,
            ..Default::default()
        };
        let bundle = gen_population(&spec).unwrap();
        let ils = recovered_ils(&bundle);
        let mean = ils.iter().sum::<f64>() / ils.len() as f64;
        assert!((mean - 0.5).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn event_leak_full_injection_is_tight_per_market() {
        let spec = ScenarioSpec {
            seed: 13,
            n_markets: 120,
            regime: Regime::EventLeak,
            leak_fraction: 1.0,
            ..Default::default()
        };
        let bundle = gen_population(&spec).unwrap();
        let ils = recovered_ils(&bundle);
        assert_eq!(ils.len(), 120);
        for v in &ils {
            assert!((0.9..=1.1).contains(v), "per-market ILS {v}");
        }
    }

    #[test]
    fn null_population_is_calibrated() {
        // Outcomes are Bernoulli(final price) by construction: bin outcomes
        // by the final price and compare frequencies within a binomial CI.
        let spec = ScenarioSpec {
            seed: 19,
            n_markets: 2_000,
            regime: Regime::Null,
            noise_scale: 1.2,
            ..Default::default()
        };
        let bundle = gen_population(&spec).unwrap();
        let mut bins: Vec<(f64, f64)> = vec![(0.0, 0.0); 10];
        for t in &bundle.ground_truth {
            let b = ((t.p_final * 10.0) as usize).min(9);
            bins[b].0 += 1.0;
            bins[b].1 += t.outcome.as_f64();
        }
        for (idx, (n, yes)) in bins.iter().enumerate() {
            if *n < 40.0 {
                continue;
            }
            let centre = (idx as f64 + 0.5) / 10.0;
            let rate = yes / n;
            let half_width = 3.0 * (centre * (1.0 - centre) / n).sqrt() + 0.05;
            assert!(
                (rate - centre).abs() <= half_width,
                "bin {idx}: rate {rate} vs centre {centre} (n {n})"
            );
        }
    }

    #[test]
    fn deadline_event_times_follow_the_hazard() {
        let spec = ScenarioSpec {
            seed: 24,
            n_markets: 1_200,
            regime: Regime::DeadlineLeak,
            hazard_lambda_per_day: 0.306,
            lifetime_days: 3.0,
            ..Default::default()
        };
        let bundle = gen_population(&spec).unwrap();
        let draws: Vec<f64> = bundle
            .ground_truth
            .iter()
            .filter_map(|t| t.t_event_raw_days)
            .collect();
        assert_eq!(draws.len(), 1_200);
        let d = crate::stats::ks_statistic(&draws, |x| 1.0 - (-0.306 * x).exp());
        // 1% critical value for the KS statistic.
        let crit = 1.628 / (draws.len() as f64).sqrt();
        assert!(d < crit, "KS {d} exceeds {crit}");
    }

    #[test]
    fn deadline_yes_markets_recover_f() {
        let spec = ScenarioSpec {
            seed: 29,
            n_markets: 120,
            regime: Regime::DeadlineLeak,
            leak_fraction: 0.5,
            hazard_lambda_per_day: 0.5,
            lifetime_days: 2.0,
            ..Default::default()
        };
        let bundle = gen_population(&spec).unwrap();
        let mut by_market: HashMap<&str, Vec<Trade>> = HashMap::new();
        for t in &bundle.trades {
            by_market.entry(t.market_id.as_str()).or_default().push(t.clone());
        }
        let cfg = ScopeConfig::default();
        let mut scored = 0;
        for m in bundle.markets.iter().filter(|m| m.outcome == Outcome::Yes) {
            let series = build_price_series(&by_market[m.market_id.as_str()]).unwrap();
            let anchor = bundle
                .anchors
                .iter()
                .find(|a| a.market_id == m.market_id)
                .unwrap();
            let label = crate::deadline::compute_ils_deadline(
                m,
                &series,
                anchor,
                &cfg,
                crate::deadline::BaselineMode::OpeningPrice,
            )
            .unwrap();
            let v = label.ils_dl.value().unwrap();
            assert!((v - 0.5).abs() < 0.05, "deadline ILS {v}");
            scored += 1;
        }
        assert!(scored > 30, "only {scored} YES deadline markets");
        // NO markets become structural zeros.
        let no_market = bundle.markets.iter().find(|m| m.outcome == Outcome::No).unwrap();
        let series = build_price_series(&by_market[no_market.market_id.as_str()]).unwrap();
        let anchor = bundle
            .anchors
            .iter()
            .find(|a| a.market_id == no_market.market_id)
            .unwrap();
        let label = crate::deadline::compute_ils_deadline_no(
            no_market,
            &series,
            Some(anchor),
            &cfg,
            crate::deadline::BaselineMode::OpeningPrice,
        )
        .unwrap();
        assert_eq!(label.ils_dl, crate::deadline::DeadlineIls::StructuralZero);
    }

    #[test]
    fn hazard_refit_recovers_lambda() {
        let spec = ScenarioSpec {
            seed: 31,
            n_markets: 800,
            regime: Regime::DeadlineLeak,
            hazard_lambda_per_day: 0.306,
            lifetime_days: 4.0,
            ..Default::default()
        };
        let bundle = gen_population(&spec).unwrap();
        let mut events = Vec::new();
        let mut censored = Vec::new();
        for m in &bundle.markets {
            if m.outcome == Outcome::Yes {
                let anchor = bundle.anchors.iter().find(|a| a.market_id == m.market_id).unwrap();
                events.push((m.open_ts, anchor.t_news));
            } else {
                censored.push((m.open_ts, m.deadline_ts.unwrap()));
            }
        }
        let fit = crate::deadline::fit_hazard(Category::Other, &events, &censored).unwrap();
        assert!(
            fit.ci95.0 <= 0.306 && 0.306 <= fit.ci95.1,
            "lambda CI {:?} misses 0.306 (estimate {})",
            fit.ci95,
            fit.lambda_per_day
        );
    }

    #[test]
    fn hawkes_arrivals_examples() {
        // alpha = 0 reduces to homogeneous Poisson at rate mu.
        let poisson = gen_hawkes_arrivals(2.0, 0.0, 1.0, 4_000.0, 77).unwrap();
        let rate = poisson.len() as f64 / 4_000.0;
        assert!((rate - 2.0).abs() < 0.15, "rate {rate}");

        // Branching 0.5 doubles the count over a long horizon.
        let hawkes = gen_hawkes_arrivals(1.0, 0.5, 1.0, 8_000.0, 78).unwrap();
        let expected = 1.0 * 8_000.0 / 0.5;
        assert!(
            (hawkes.len() as f64 - expected).abs() / expected < 0.05,
            "count {} vs {expected}",
            hawkes.len()
        );

        // Fixed seeds give identical output.
        let again = gen_hawkes_arrivals(1.0, 0.5, 1.0, 8_000.0, 78).unwrap();
        assert_eq!(hawkes, again);

        assert!(gen_hawkes_arrivals(1.0, 2.0, 1.0, 10.0, 1).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad = ScenarioSpec {
            leak_fraction: 1.5,
            ..Default::default()
        };
        assert!(matches!(gen_population(&bad), Err(SynthError::Config(_))));
        let bad = ScenarioSpec {
            n_markets: 0,
            ..Default::default()
        };
        assert!(gen_population(&bad).is_err());
        let bad = ScenarioSpec {
            arrival: Arrival::Hawkes {
                mu_per_min: 1.0,
                alpha: 2.0,
                beta: 1.0,
            },
            ..Default::default()
        };
        assert!(gen_population(&bad).is_err());
    }
}
