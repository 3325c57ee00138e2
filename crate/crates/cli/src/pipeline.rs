//! Batch pipeline: volume filter -> typology -> price series -> leakage or
//! deadline scoring -> auxiliary metrics -> wallet novelty -> label vectors,
//! with a summary table and a machine-readable run manifest.
//!
//! Per-market work is pure and runs on a bounded worker pool; results are
//! collected in manifest order and written by a single writer, so identical
//! inputs and config produce byte-identical outputs (the run-manifest
//! timestamp is excluded from the config hash).

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use iflow_core::deadline::{compute_ils_deadline, compute_ils_deadline_no, BaselineMode, DeadlineLabel};
use iflow_core::io::{read_jsonl, read_trades, scan_jsonl, scan_trades, write_jsonl, LineError};
use iflow_core::leakage::{label_market, LeakageLabel, ScopeFlag};
use iflow_core::market::{
    build_price_series, volume_cutoff_filter, AnchorTier, Category, MarketRecord, NewsAnchor,
    Outcome, ResolutionType, Trade,
};
use iflow_core::scoring::{aggregate_label, LabelVector};
use iflow_core::stats::percentile;
use iflow_core::typology::{classify_category, classify_resolution, RuleSet};
use iflow_core::wallet::{profile_map, WalletContext, WalletProfile};
use iflow_core::SCHEMA_VERSION;

use crate::config::PipelineConfig;

/// One output row per manifest market.
#[derive(Debug, Clone, Serialize)]
pub struct MarketRow {
    pub schema_version: String,
    pub market_id: String,
    /// Classifier outputs used for routing.
    pub resolution_type: ResolutionType,
    pub category: Category,
    /// The manifest's own typology, kept for disagreement audits.
    pub manifest_resolution_type: ResolutionType,
    pub status: RowStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leakage: Option<LeakageLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deadline: Option<DeadlineLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_vector: Option<LabelVector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Scored,
    Skipped,
    Error,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct Quantiles {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
    pub positive_share: f64,
}

impl Quantiles {
    pub fn from_values(values: &[f64]) -> Option<Quantiles> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        Some(Quantiles {
            n,
            mean: sorted.iter().sum::<f64>() / n as f64,
            min: sorted[0],
            p25: percentile(&sorted, 0.25),
            median: percentile(&sorted, 0.5),
            p75: percentile(&sorted, 0.75),
            max: sorted[n - 1],
            positive_share: sorted.iter().filter(|v| **v > 0.0).count() as f64 / n as f64,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: String,
    pub n_manifest: usize,
    pub n_after_volume_filter: usize,
    pub per_type: BTreeMap<String, usize>,
    pub typology_disagreements: usize,
    pub scope_flag_counts: BTreeMap<String, usize>,
    pub scored_event: usize,
    pub scored_deadline: usize,
    pub structural_zeros: usize,
    pub skipped: usize,
    pub errors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ils: Option<Quantiles>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ils_deadline: Option<Quantiles>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: String,
    pub tool_version: String,
    /// SHA-256 of the canonical config serialization.
    pub config_hash: String,
    /// Wall-clock creation time; excluded from the hash on purpose.
    pub created_at: String,
    pub inputs: crate::config::InputPaths,
    pub output_files: Vec<String>,
    pub n_markets: usize,
}

#[derive(Debug)]
pub struct RunOutput {
    pub records: Vec<MarketRow>,
    pub summary: Summary,
    pub manifest: RunManifest,
}

/// Everything loaded from disk, grouped for per-market processing.
pub struct LoadedInputs {
    pub markets: Vec<MarketRecord>,
    pub trades_by_market: HashMap<String, Vec<Trade>>,
    pub anchors_by_market: HashMap<String, Vec<NewsAnchor>>,
    pub profiles: Option<HashMap<String, WalletProfile>>,
    pub rules: RuleSet,
}

pub fn load_inputs(cfg: &PipelineConfig) -> Result<LoadedInputs> {
    let markets: Vec<MarketRecord> = read_jsonl(&cfg.inputs.markets)
        .with_context(|| format!("reading {}", cfg.inputs.markets.display()))?;
    let trades: Vec<Trade> = read_trades(&cfg.inputs.trades)
        .with_context(|| format!("reading {}", cfg.inputs.trades.display()))?;
    let anchors: Vec<NewsAnchor> = read_jsonl(&cfg.inputs.anchors)
        .with_context(|| format!("reading {}", cfg.inputs.anchors.display()))?;
    let profiles = match &cfg.inputs.wallets {
        Some(path) => {
            let contexts: Vec<WalletContext> =
                read_jsonl(path).with_context(|| format!("reading {}", path.display()))?;
            Some(profile_map(contexts))
        }
        None => None,
    };
    let rules = match &cfg.rules {
        Some(path) => RuleSet::from_path(path)
            .map_err(|e| anyhow::anyhow!("loading rules {}: {e}", path.display()))?,
        None => RuleSet::default_rules(),
    };

    let mut trades_by_market: HashMap<String, Vec<Trade>> = HashMap::new();
    for t in trades {
        trades_by_market.entry(t.market_id.clone()).or_default().push(t);
    }
    let mut anchors_by_market: HashMap<String, Vec<NewsAnchor>> = HashMap::new();
    for a in anchors {
        anchors_by_market.entry(a.market_id.clone()).or_default().push(a);
    }
    Ok(LoadedInputs {
        markets,
        trades_by_market,
        anchors_by_market,
        profiles,
        rules,
    })
}

static EMPTY_TRADES: Vec<Trade> = Vec::new();
static EMPTY_ANCHORS: Vec<NewsAnchor> = Vec::new();

/// Score one market along the path its classified resolution type selects.
pub fn process_market(cfg: &PipelineConfig, inputs: &LoadedInputs, market: &MarketRecord) -> MarketRow {
    let rt = classify_resolution(&market.question, "", &inputs.rules);
    process_market_with_type(cfg, inputs, market, rt)
}

/// Score one market along a caller-chosen lane (the standalone `ils` and
/// `ils-deadline` commands trust the manifest's typing).
pub fn process_market_with_type(
    cfg: &PipelineConfig,
    inputs: &LoadedInputs,
    market: &MarketRecord,
    rt: ResolutionType,
) -> MarketRow {
    let category = classify_category(&market.question, &inputs.rules);
    let trades = inputs
        .trades_by_market
        .get(&market.market_id)
        .unwrap_or(&EMPTY_TRADES);
    let anchors = inputs
        .anchors_by_market
        .get(&market.market_id)
        .unwrap_or(&EMPTY_ANCHORS);

    let mut row = MarketRow {
        schema_version: SCHEMA_VERSION.to_string(),
        market_id: market.market_id.clone(),
        resolution_type: rt,
        category,
        manifest_resolution_type: market.resolution_type,
        status: RowStatus::Skipped,
        error: None,
        leakage: None,
        deadline: None,
        label_vector: None,
    };

    // Scoring honors the classified type; the manifest's own field is kept in
    // the row for audits.
    let routed = MarketRecord {
        resolution_type: rt,
        category,
        ..market.clone()
    };

    match rt {
        ResolutionType::EventResolved => {
            let result = build_price_series(trades).map_err(anyhow::Error::from).and_then(|series| {
                let window_secs = cfg.ils_window_secs()?;
                label_market(
                    &routed,
                    &series,
                    trades,
                    anchors,
                    inputs.profiles.as_ref(),
                    &cfg.novelty,
                    &cfg.scope,
                    &window_secs,
                    cfg.top_k,
                )
                .map_err(anyhow::Error::from)
            });
            match result {
                Ok(label) => {
                    row.label_vector = Some(aggregate_label(&label, cfg.thresholds));
                    row.leakage = Some(label);
                    row.status = RowStatus::Scored;
                }
                Err(e) => {
                    row.status = RowStatus::Error;
                    row.error = Some(e.to_string());
                }
            }
        }
        ResolutionType::DeadlineResolved => {
            let result = build_price_series(trades).map_err(anyhow::Error::from).and_then(|series| {
                match routed.outcome {
                    Outcome::Yes => {
                        let event_anchor = anchors
                            .iter()
                            .find(|a| a.tier == AnchorTier::EventOccurrence)
                            .ok_or_else(|| {
                                anyhow::anyhow!(
                                    "no event-occurrence anchor for YES deadline market {}",
                                    routed.market_id
                                )
                            })?;
                        compute_ils_deadline(
                            &routed,
                            &series,
                            event_anchor,
                            &cfg.scope,
                            BaselineMode::OpeningPrice,
                        )
                        .map_err(anyhow::Error::from)
                    }
                    Outcome::No => {
                        let cancellation = anchors
                            .iter()
                            .find(|a| a.tier != AnchorTier::DeadlineExpiry);
                        compute_ils_deadline_no(
                            &routed,
                            &series,
                            cancellation,
                            &cfg.scope,
                            BaselineMode::OpeningPrice,
                        )
                        .map_err(anyhow::Error::from)
                    }
                }
            });
            match result {
                Ok(label) => {
                    row.deadline = Some(label);
                    row.status = RowStatus::Scored;
                }
                Err(e) => {
                    row.status = RowStatus::Error;
                    row.error = Some(e.to_string());
                }
            }
        }
        ResolutionType::Unclassifiable => {
            row.status = RowStatus::Skipped;
            row.error = Some("unclassifiable resolution type; out of scoring scope".into());
        }
    }
    row
}

fn summarize(manifest_n: usize, filtered: &[MarketRecord], rows: &[MarketRow]) -> Summary {
    let mut per_type: BTreeMap<String, usize> = BTreeMap::new();
    let mut scope_flag_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut disagreements = 0usize;
    let mut ils_values = Vec::new();
    let mut dl_values = Vec::new();
    let mut structural_zeros = 0usize;
    let mut scored_event = 0usize;
    let mut scored_deadline = 0usize;
    let mut skipped = 0usize;
    let mut errors = 0usize;

    let mut count_flag = |flags: &std::collections::BTreeSet<ScopeFlag>| {
        for f in flags {
            let name = serde_json::to_value(f).unwrap();
            *scope_flag_counts
                .entry(name.as_str().unwrap().to_string())
                .or_insert(0) += 1;
        }
    };

    for row in rows {
        *per_type.entry(row.resolution_type.as_str().to_string()).or_insert(0) += 1;
        if row.resolution_type != row.manifest_resolution_type {
            disagreements += 1;
        }
        match row.status {
            RowStatus::Skipped => skipped += 1,
            RowStatus::Error => errors += 1,
            RowStatus::Scored => {}
        }
        if let Some(l) = &row.leakage {
            scored_event += 1;
            count_flag(&l.scope_flags);
            if let Some(v) = l.ils {
                ils_values.push(v);
            }
        }
        if let Some(d) = &row.deadline {
            scored_deadline += 1;
            count_flag(&d.scope_flags);
            match d.ils_dl.value() {
                Some(v) => dl_values.push(v),
                None => {
                    if d.ils_dl.status() == "structural_zero" {
                        structural_zeros += 1;
                    }
                }
            }
        }
    }

    Summary {
        schema_version: SCHEMA_VERSION.to_string(),
        n_manifest: manifest_n,
        n_after_volume_filter: filtered.len(),
        per_type,
        typology_disagreements: disagreements,
        scope_flag_counts,
        scored_event,
        scored_deadline,
        structural_zeros,
        skipped,
        errors,
        ils: Quantiles::from_values(&ils_values),
        ils_deadline: Quantiles::from_values(&dl_values),
    }
}

/// Run the batch pipeline. Per-market failures abort the run unless
/// `skip_errors` downgrades them to error rows.
pub fn run_pipeline(cfg: &PipelineConfig, skip_errors: bool, jobs: Option<usize>) -> Result<RunOutput> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let manifest_n = inputs.markets.len();
    let filtered = volume_cutoff_filter(inputs.markets.clone(), cfg.volume_cutoff_usdc);

    let process = |market: &MarketRecord| process_market(cfg, &inputs, market);
    let rows: Vec<MarketRow> = match jobs {
        Some(n) if n > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building worker pool")?;
            pool.install(|| {
                use rayon::prelude::*;
                filtered.par_iter().map(process).collect()
            })
        }
        _ => filtered.iter().map(process).collect(),
    };

    if !skip_errors {
        if let Some(row) = rows.iter().find(|r| r.status == RowStatus::Error) {
            anyhow::bail!(
                "market {} failed: {} (use --skip-errors to continue past per-market failures)",
                row.market_id,
                row.error.as_deref().unwrap_or("unknown error")
            );
        }
    }

    let summary = summarize(manifest_n, &filtered, &rows);
    let config_hash = {
        let mut h = Sha256::new();
        h.update(cfg.canonical_toml()?.as_bytes());
        hex_string(&h.finalize())
    };
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash,
        created_at: chrono::Utc::now().to_rfc3339(),
        inputs: cfg.inputs.clone(),
        output_files: vec![
            "labels.jsonl".into(),
            "summary.json".into(),
            "summary.txt".into(),
            "run_manifest.json".into(),
        ],
        n_markets: rows.len(),
    };
    Ok(RunOutput {
        records: rows,
        summary,
        manifest,
    })
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Aligned text rendering of the summary.
pub fn summary_table(s: &Summary) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        out.push_str(&format!("{k:<34}{v}\n"));
    };
    line("manifest markets", s.n_manifest.to_string());
    line("after volume filter", s.n_after_volume_filter.to_string());
    for (ty, n) in &s.per_type {
        line(&format!("type {ty}"), n.to_string());
    }
    line("typology disagreements", s.typology_disagreements.to_string());
    for (flag, n) in &s.scope_flag_counts {
        line(&format!("flag {flag}"), n.to_string());
    }
    line("scored event", s.scored_event.to_string());
    line("scored deadline", s.scored_deadline.to_string());
    line("structural zeros", s.structural_zeros.to_string());
    line("skipped", s.skipped.to_string());
    line("errors", s.errors.to_string());
    let fmt_q = |q: &Quantiles| {
        format!(
            "n={} mean={:.4} min={:.4} p25={:.4} median={:.4} p75={:.4} max={:.4} pos={:.3}",
            q.n, q.mean, q.min, q.p25, q.median, q.p75, q.max, q.positive_share
        )
    };
    if let Some(q) = &s.ils {
        line("ils distribution", fmt_q(q));
    }
    if let Some(q) = &s.ils_deadline {
        line("deadline ils distribution", fmt_q(q));
    }
    out
}

/// Write the report bundle; returns the created paths.
pub fn write_outputs(out_dir: &Path, output: &RunOutput) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let labels = out_dir.join("labels.jsonl");
    write_jsonl(&labels, &output.records)?;
    let summary_json = out_dir.join("summary.json");
    std::fs::write(&summary_json, serde_json::to_string_pretty(&output.summary)?)?;
    let summary_txt = out_dir.join("summary.txt");
    std::fs::write(&summary_txt, summary_table(&output.summary))?;
    let manifest = out_dir.join("run_manifest.json");
    std::fs::write(&manifest, serde_json::to_string_pretty(&output.manifest)?)?;
    Ok(vec![labels, summary_json, summary_txt, manifest])
}

// ---------------------------------------------------------------------------
// Input validation (report-only)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct FileReport {
    pub path: String,
    pub records: usize,
    pub errors: Vec<LineError>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferentialError {
    pub file: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub files: Vec<FileReport>,
    pub referential_errors: Vec<ReferentialError>,
    pub ok: bool,
}

/// Schema-check every file and cross-check references; never fails the
/// process, only reports.
pub fn validate_inputs(
    markets_path: &Path,
    trades_path: &Path,
    anchors_path: Option<&Path>,
    wallets_path: Option<&Path>,
) -> Result<ValidationReport> {
    let mut files = Vec::new();
    let mut referential = Vec::new();

    let (markets, market_errors) = scan_jsonl::<MarketRecord>(markets_path)?;
    files.push(FileReport {
        path: markets_path.display().to_string(),
        records: markets.len(),
        errors: market_errors,
    });
    let by_id: HashMap<&str, &MarketRecord> =
        markets.iter().map(|(_, m)| (m.market_id.as_str(), m)).collect();

    let (trades, trade_errors) = scan_trades(trades_path)?;
    files.push(FileReport {
        path: trades_path.display().to_string(),
        records: trades.len(),
        errors: trade_errors,
    });
    for (line, trade) in &trades {
        if !by_id.contains_key(trade.market_id.as_str()) {
            referential.push(ReferentialError {
                file: trades_path.display().to_string(),
                line: *line,
                message: format!("trade references unknown market {}", trade.market_id),
            });
        }
    }

    if let Some(path) = anchors_path {
        let (anchors, anchor_errors) = scan_jsonl::<NewsAnchor>(path)?;
        files.push(FileReport {
            path: path.display().to_string(),
            records: anchors.len(),
            errors: anchor_errors,
        });
        for (line, anchor) in &anchors {
            match by_id.get(anchor.market_id.as_str()) {
                None => referential.push(ReferentialError {
                    file: path.display().to_string(),
                    line: *line,
                    message: format!("anchor references unknown market {}", anchor.market_id),
                }),
                Some(market) => {
                    if anchor.tier == AnchorTier::ProxyOffset {
                        let expected = anchor.expected_proxy_t_news(market.resolve_ts).unwrap();
                        if (expected - anchor.t_news).abs() > 1 {
                            referential.push(ReferentialError {
                                file: path.display().to_string(),
                                line: *line,
                                message: format!(
                                    "proxy anchor t_news {} disagrees with resolve_ts - offset = {expected}",
                                    anchor.t_news
                                ),
                            });
                        }
                    }
                }
            }
        }
    }

    if let Some(path) = wallets_path {
        let (wallets, wallet_errors) = scan_jsonl::<WalletContext>(path)?;
        files.push(FileReport {
            path: path.display().to_string(),
            records: wallets.len(),
            errors: wallet_errors,
        });
    }

    let ok = referential.is_empty() && files.iter().all(|f| f.errors.is_empty());
    Ok(ValidationReport {
        files,
        referential_errors: referential,
        ok,
    })
}
