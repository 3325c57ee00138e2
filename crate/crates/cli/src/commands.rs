//! Subcommand implementations. Each returns the payload it printed so the
//! integration tests can assert on structured output instead of stdout.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use iflow_core::deadline::{fit_hazard, HazardFit};
use iflow_core::io::{read_jsonl, read_trades, write_jsonl, Validate};
use iflow_core::leakage::{top_k_winning, LeakageLabel};
use iflow_core::market::{
    AnchorTier, Category, MarketRecord, NewsAnchor, Outcome, ResolutionType, Trade,
};
use iflow_core::micro::{default_bucket_volume, snapshot, stream_features, MicroFeatures};
use iflow_core::scoring::{
    aggregate_label, murphy_decompose, resolution_share, LabelThresholds, LabelVector,
    MurphyDecomposition, MurphyVariant, PowerSpec,
};
use iflow_core::synth::{gen_population, ScenarioSpec};
use iflow_core::time::Ts;
use iflow_core::typology::{typology_report, RuleSet, TypologyReport};
use iflow_core::wallet::{mean_wallet_novelty, profile_map, wallet_novelty, WalletContext};
use iflow_core::market::build_price_series;

use crate::config::PipelineConfig;
use crate::pipeline::{self, MarketRow, RowStatus};

fn load_rules(path: Option<&Path>) -> Result<RuleSet> {
    match path {
        Some(p) => {
            RuleSet::from_path(p).map_err(|e| anyhow::anyhow!("loading rules {}: {e}", p.display()))
        }
        None => Ok(RuleSet::default_rules()),
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

pub fn write_or_print<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ClassifyRow {
    pub market_id: String,
    pub resolution_type: ResolutionType,
    pub category: Category,
}

#[derive(Debug, Serialize)]
pub struct ClassifyOutput {
    pub rows: Vec<ClassifyRow>,
    pub report: TypologyReport,
}

pub fn classify(markets_path: &Path, rules_path: Option<&Path>) -> Result<ClassifyOutput> {
    let rules = load_rules(rules_path)?;
    let markets: Vec<MarketRecord> = read_jsonl(markets_path)?;
    let rows = markets
        .iter()
        .map(|m| ClassifyRow {
            market_id: m.market_id.clone(),
            resolution_type: iflow_core::typology::classify_resolution(&m.question, "", &rules),
            category: iflow_core::typology::classify_category(&m.question, &rules),
        })
        .collect();
    let report = typology_report(&markets, Some(&rules));
    Ok(ClassifyOutput { rows, report })
}

pub fn classify_table(output: &ClassifyOutput) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<22}{:>8}{:>9}{:>10}\n", "type", "n", "share", "yes_rate"));
    for (ty, stats) in &output.report.per_type {
        out.push_str(&format!(
            "{:<22}{:>8}{:>9.3}{:>10.3}\n",
            ty.as_str(),
            stats.n,
            stats.share,
            stats.yes_rate
        ));
    }
    if !output.report.deadline_yes_review.is_empty() {
        out.push_str(&format!(
            "deadline YES markets flagged for review: {}\n",
            output.report.deadline_yes_review.len()
        ));
    }
    out
}

/// Shared structure for the `ils` and `ils-deadline` commands: run the
/// pipeline restricted to one resolution-type lane.
fn scored_rows(
    cfg: &PipelineConfig,
    skip_errors: bool,
    lane: ResolutionType,
) -> Result<Vec<MarketRow>> {
    let inputs = pipeline::load_inputs(cfg)?;
    let filtered =
        iflow_core::market::volume_cutoff_filter(inputs.markets.clone(), cfg.volume_cutoff_usdc);
    let mut rows = Vec::new();
    for market in &filtered {
        // Lane commands trust the manifest's resolution typing; `run` is the
        // path that re-derives it from the question text.
        if market.resolution_type != lane {
            continue;
        }
        let row = pipeline::process_market_with_type(cfg, &inputs, market, lane);
        if row.status == RowStatus::Error && !skip_errors {
            anyhow::bail!(
                "market {} failed: {}",
                row.market_id,
                row.error.as_deref().unwrap_or("unknown")
            );
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn ils_command(
    markets: &Path,
    trades: &Path,
    anchors: &Path,
    wallets: Option<&Path>,
    config: Option<&Path>,
    out: &Path,
    skip_errors: bool,
) -> Result<usize> {
    let mut cfg = load_config(config)?;
    cfg.inputs.markets = markets.to_path_buf();
    cfg.inputs.trades = trades.to_path_buf();
    cfg.inputs.anchors = anchors.to_path_buf();
    if let Some(w) = wallets {
        cfg.inputs.wallets = Some(w.to_path_buf());
    }
    let rows = scored_rows(&cfg, skip_errors, ResolutionType::EventResolved)?;
    write_jsonl(out, &rows)?;
    Ok(rows.len())
}

pub fn ils_deadline_command(
    markets: &Path,
    trades: &Path,
    events: &Path,
    config: Option<&Path>,
    out: &Path,
    skip_errors: bool,
) -> Result<usize> {
    let mut cfg = load_config(config)?;
    cfg.inputs.markets = markets.to_path_buf();
    cfg.inputs.trades = trades.to_path_buf();
    cfg.inputs.anchors = events.to_path_buf();
    let rows = scored_rows(&cfg, skip_errors, ResolutionType::DeadlineResolved)?;
    write_jsonl(out, &rows)?;
    Ok(rows.len())
}

pub fn hazard_fit_command(
    markets_path: &Path,
    events_path: &Path,
    category: Category,
    include_censored: bool,
) -> Result<HazardFit> {
    let markets: Vec<MarketRecord> = read_jsonl(markets_path)?;
    let anchors: Vec<NewsAnchor> = read_jsonl(events_path)?;
    let by_market: HashMap<&str, &NewsAnchor> = anchors
        .iter()
        .filter(|a| a.tier == AnchorTier::EventOccurrence)
        .map(|a| (a.market_id.as_str(), a))
        .collect();
    let mut events = Vec::new();
    let mut censored = Vec::new();
    for m in &markets {
        if m.category != category || m.resolution_type != ResolutionType::DeadlineResolved {
            continue;
        }
        match m.outcome {
            Outcome::Yes => {
                if let Some(anchor) = by_market.get(m.market_id.as_str()) {
                    events.push((m.open_ts, anchor.t_news));
                }
            }
            Outcome::No => {
                if include_censored {
                    if let Some(d) = m.deadline_ts {
                        censored.push((m.open_ts, d));
                    }
                }
            }
        }
    }
    Ok(fit_hazard(category, &events, &censored)?)
}

pub fn micro_command(
    trades_path: &Path,
    market_id: &str,
    at: &str,
    windows: &crate::config::WindowsConfig,
    bucket_volume: Option<f64>,
    out: &Path,
) -> Result<usize> {
    let all = read_trades(trades_path)?;
    let trades: Vec<Trade> = all.into_iter().filter(|t| t.market_id == market_id).collect();
    if trades.is_empty() {
        anyhow::bail!("no trades for market {market_id}");
    }
    let series = build_price_series(&trades)?;
    let spec = windows.to_spec()?;
    let bucket = bucket_volume
        .or(spec.vpin_bucket_volume)
        .or_else(|| default_bucket_volume(&trades))
        .context("cannot derive a VPIN bucket volume from empty data")?;
    let rows: Vec<MicroFeatures> = if at == "stream" {
        stream_features(&trades, &series, &spec, bucket)
    } else {
        let t = Ts::parse_rfc3339(at)?;
        vec![snapshot(&trades, &series, t, &spec, bucket)]
    };
    write_jsonl(out, &rows)?;
    Ok(rows.len())
}

#[derive(Debug, Serialize)]
pub struct TradeNovelty {
    pub wallet_id: String,
    pub ts: Ts,
    pub wn: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct NoveltyRow {
    pub market_id: String,
    pub mean_wn: Option<f64>,
    pub scored: usize,
    pub missing: usize,
    pub per_trade: Vec<TradeNovelty>,
}

pub fn wallet_novelty_command(
    wallets_path: &Path,
    trades_path: &Path,
    markets_path: &Path,
    top_k: usize,
    out: &Path,
) -> Result<usize> {
    let contexts: Vec<WalletContext> = read_jsonl(wallets_path)?;
    let profiles = profile_map(contexts);
    let markets: Vec<MarketRecord> = read_jsonl(markets_path)?;
    let all_trades = read_trades(trades_path)?;
    let mut by_market: HashMap<&str, Vec<&Trade>> = HashMap::new();
    for t in &all_trades {
        by_market.entry(t.market_id.as_str()).or_default().push(t);
    }
    let cfg = iflow_core::wallet::NoveltyConfig::default();
    let mut rows = Vec::new();
    for market in &markets {
        let trades: Vec<Trade> = by_market
            .get(market.market_id.as_str())
            .map(|ts| ts.iter().map(|t| (*t).clone()).collect())
            .unwrap_or_default();
        let top = top_k_winning(&trades, market.outcome, top_k);
        let mean = mean_wallet_novelty(market, &top, &profiles, &cfg);
        let per_trade = top
            .iter()
            .map(|t| TradeNovelty {
                wallet_id: t.wallet_id.clone(),
                ts: t.ts,
                wn: profiles
                    .get(&t.wallet_id)
                    .and_then(|p| wallet_novelty(p, t.ts, market.resolve_ts, &cfg).ok()),
            })
            .collect();
        rows.push(NoveltyRow {
            market_id: market.market_id.clone(),
            mean_wn: mean.mean,
            scored: mean.scored,
            missing: mean.missing,
            per_trade,
        });
    }
    write_jsonl(out, &rows)?;
    Ok(rows.len())
}

/// Forecast/outcome pair as read from the murphy pairs file.
#[derive(Debug, serde::Deserialize)]
pub struct PairRecord {
    pub forecast: f64,
    pub outcome: u8,
}

impl Validate for PairRecord {
    fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.forecast) {
            return Err(format!("forecast {} outside [0,1]", self.forecast));
        }
        if self.outcome > 1 {
            return Err(format!("outcome must be 0 or 1, got {}", self.outcome));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct MurphyOutput {
    pub decomposition: MurphyDecomposition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution_share: Option<f64>,
}

pub fn murphy_command(
    pairs_path: &Path,
    bins: usize,
    raw: bool,
    with_share: bool,
) -> Result<MurphyOutput> {
    let records: Vec<PairRecord> = read_jsonl(pairs_path)?;
    let pairs: Vec<(f64, bool)> = records.iter().map(|r| (r.forecast, r.outcome == 1)).collect();
    let variant = if raw { MurphyVariant::RawForecasts } else { MurphyVariant::QuantizedMeans };
    let decomposition = murphy_decompose(&pairs, bins, variant)?;
    let share = if with_share {
        Some(resolution_share(&pairs, bins)?)
    } else {
        None
    };
    Ok(MurphyOutput {
        decomposition,
        resolution_share: share,
    })
}

pub fn label_command(leakage_path: &Path, thresholds: LabelThresholds, out: &Path) -> Result<usize> {
    let labels: Vec<LeakageLabel> = read_jsonl(leakage_path)?;
    let vectors: Vec<LabelVector> = labels.iter().map(|l| aggregate_label(l, thresholds)).collect();
    write_jsonl(out, &vectors)?;
    Ok(vectors.len())
}

pub fn power_command(spec: &PowerSpec) -> Result<serde_json::Value> {
    let n = iflow_core::scoring::required_positives(spec)?;
    Ok(serde_json::json!({
        "inputs": spec,
        "required_positives": n,
    }))
}

pub fn synth_command(spec_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<usize> {
    let text = std::fs::read_to_string(spec_path)
        .with_context(|| format!("reading scenario {}", spec_path.display()))?;
    let mut spec: ScenarioSpec = toml::from_str(&text)
        .with_context(|| format!("parsing scenario {}", spec_path.display()))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let bundle = gen_population(&spec)?;
    bundle.write_dir(out_dir)?;
    Ok(bundle.markets.len())
}

pub fn run_command(
    config_path: &Path,
    out_dir: Option<PathBuf>,
    skip_errors: bool,
    jobs: Option<usize>,
) -> Result<pipeline::RunOutput> {
    let mut cfg = PipelineConfig::load(config_path)?;
    if let Some(dir) = out_dir {
        cfg.output_dir = dir;
    }
    let output = pipeline::run_pipeline(&cfg, skip_errors, jobs)?;
    pipeline::write_outputs(&cfg.output_dir, &output)?;
    Ok(output)
}

pub fn validate_command(
    markets: &Path,
    trades: &Path,
    anchors: Option<&Path>,
    wallets: Option<&Path>,
) -> Result<pipeline::ValidationReport> {
    pipeline::validate_inputs(markets, trades, anchors, wallets)
}
