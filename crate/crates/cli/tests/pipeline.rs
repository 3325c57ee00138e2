//! End-to-end pipeline tests over synthetic bundles and hand-built fixtures.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;

use iflow_cli::config::PipelineConfig;
use iflow_cli::pipeline::{run_pipeline, validate_inputs, write_outputs, Quantiles, RowStatus};
use iflow_core::market::{Category, Outcome, ResolutionType};
use iflow_core::synth::{gen_population, Regime, ScenarioSpec};

fn synth_config(dir: &Path, bundle_dir: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.inputs.markets = bundle_dir.join("markets.jsonl");
    cfg.inputs.trades = bundle_dir.join("trades.jsonl");
    cfg.inputs.anchors = bundle_dir.join("anchors.jsonl");
    cfg.inputs.wallets = Some(bundle_dir.join("wallets.jsonl"));
    cfg.volume_cutoff_usdc = 0.0;
    cfg.output_dir = dir.join("out");
    cfg
}

#[test]
fn pipeline_scores_synth_event_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let bundle_dir = dir.path().join("bundle");
    let spec = ScenarioSpec {
        seed: 5,
        n_markets: 30,
        regime: Regime::EventLeak,
        leak_fraction: 0.5,
        ..Default::default()
    };
    gen_population(&spec).unwrap().write_dir(&bundle_dir).unwrap();

    let cfg = synth_config(dir.path(), &bundle_dir);
    let out = run_pipeline(&cfg, false, None).unwrap();
    assert_eq!(out.records.len(), 30);
    assert!(out.records.iter().all(|r| r.status == RowStatus::Scored));
    assert_eq!(out.summary.scored_event, 30);
    assert_eq!(out.summary.typology_disagreements, 0);
    let q = out.summary.ils.as_ref().unwrap();
    assert!((q.mean - 0.5).abs() < 0.2, "mean {}", q.mean);
    // Wallet novelty flows through to the label vectors.
    assert!(out
        .records
        .iter()
        .all(|r| r.leakage.as_ref().unwrap().mean_wallet_novelty.is_some()));

    let files = write_outputs(&cfg.output_dir, &out).unwrap();
    for f in files {
        assert!(f.exists());
    }
}

#[test]
fn pipeline_scores_deadline_bundle_with_structural_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let bundle_dir = dir.path().join("bundle");
    let spec = ScenarioSpec {
        seed: 6,
        n_markets: 40,
        regime: Regime::DeadlineLeak,
        leak_fraction: 0.5,
        hazard_lambda_per_day: 0.4,
        lifetime_days: 2.0,
        ..Default::default()
    };
    gen_population(&spec).unwrap().write_dir(&bundle_dir).unwrap();

    let cfg = synth_config(dir.path(), &bundle_dir);
    let out = run_pipeline(&cfg, false, None).unwrap();
    assert_eq!(out.summary.scored_deadline, 40);
    assert!(out.summary.structural_zeros > 0);
    let q = out.summary.ils_deadline.as_ref().unwrap();
    assert!((q.mean - 0.5).abs() < 0.1, "deadline mean {}", q.mean);
}

#[test]
fn pipeline_composition_equals_stage_by_stage() {
    // The pipeline's per-market output must equal a manual invocation of the
    // stages for the same market.
    let dir = tempfile::tempdir().unwrap();
    let bundle_dir = dir.path().join("bundle");
    let spec = ScenarioSpec {
        seed: 9,
        n_markets: 6,
        regime: Regime::EventLeak,
        leak_fraction: 0.75,
        ..Default::default()
    };
    let bundle = gen_population(&spec).unwrap();
    bundle.write_dir(&bundle_dir).unwrap();

    let cfg = synth_config(dir.path(), &bundle_dir);
    let out = run_pipeline(&cfg, false, None).unwrap();

    // Manual stage-by-stage for one market.
    let market = &bundle.markets[3];
    let trades: Vec<_> = bundle
        .trades
        .iter()
        .filter(|t| t.market_id == market.market_id)
        .cloned()
        .collect();
    let anchors: Vec<_> = bundle
        .anchors
        .iter()
        .filter(|a| a.market_id == market.market_id)
        .cloned()
        .collect();
    let series = iflow_core::market::build_price_series(&trades).unwrap();
    let profiles = iflow_core::wallet::profile_map(bundle.wallets.clone());
    let manual = iflow_core::leakage::label_market(
        market,
        &series,
        &trades,
        &anchors,
        Some(&profiles),
        &cfg.novelty,
        &cfg.scope,
        &cfg.ils_window_secs().unwrap(),
        cfg.top_k,
    )
    .unwrap();

    let row = out
        .records
        .iter()
        .find(|r| r.market_id == market.market_id)
        .unwrap();
    assert_eq!(
        serde_json::to_string(row.leakage.as_ref().unwrap()).unwrap(),
        serde_json::to_string(&manual).unwrap()
    );
}

#[test]
fn empty_manifest_yields_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    File::create(&empty).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.inputs.markets = empty.clone();
    cfg.inputs.trades = empty.clone();
    cfg.inputs.anchors = empty;
    cfg.output_dir = dir.path().join("out");
    let out = run_pipeline(&cfg, false, None).unwrap();
    assert!(out.records.is_empty());
    assert_eq!(out.summary.n_manifest, 0);
    write_outputs(&cfg.output_dir, &out).unwrap();
    assert!(cfg.output_dir.join("labels.jsonl").exists());
}

#[test]
fn pipeline_jobs_parallelism_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let bundle_dir = dir.path().join("bundle");
    let spec = ScenarioSpec {
        seed: 12,
        n_markets: 24,
        regime: Regime::EventLeak,
        ..Default::default()
    };
    gen_population(&spec).unwrap().write_dir(&bundle_dir).unwrap();
    let cfg = synth_config(dir.path(), &bundle_dir);
    let sequential = run_pipeline(&cfg, false, None).unwrap();
    let parallel = run_pipeline(&cfg, false, Some(4)).unwrap();
    assert_eq!(
        serde_json::to_string(&sequential.records).unwrap(),
        serde_json::to_string(&parallel.records).unwrap()
    );
}

#[test]
fn skip_errors_downgrades_failures() {
    // A market with no trades cannot build a series.
    let dir = tempfile::tempdir().unwrap();
    let markets = dir.path().join("markets.jsonl");
    let mut f = File::create(&markets).unwrap();
    writeln!(
        f,
        r#"{{"market_id":"m1","question":"Will the incumbent win the runoff?","category":"other","open_ts":"2026-01-01T00:00:00Z","resolve_ts":"2026-01-02T00:00:00Z","outcome":"YES","total_volume_usdc":100000.0,"resolution_type":"event_resolved"}}"#
    )
    .unwrap();
    drop(f);
    let trades = dir.path().join("trades.jsonl");
    File::create(&trades).unwrap();
    let anchors = dir.path().join("anchors.jsonl");
    let mut f = File::create(&anchors).unwrap();
    writeln!(
        f,
        r#"{{"market_id":"m1","t_news":"2026-01-01T12:00:00Z","tier":"article","confidence":0.9}}"#
    )
    .unwrap();
    drop(f);

    let mut cfg = PipelineConfig::default();
    cfg.inputs.markets = markets;
    cfg.inputs.trades = trades;
    cfg.inputs.anchors = anchors;
    cfg.volume_cutoff_usdc = 0.0;
    cfg.output_dir = dir.path().join("out");

    assert!(run_pipeline(&cfg, false, None).is_err());
    let out = run_pipeline(&cfg, true, None).unwrap();
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.records[0].status, RowStatus::Error);
    assert!(out.records[0].error.as_deref().unwrap().contains("no trades"));
}

#[test]
fn validation_report_referential_and_range_errors() {
    let dir = tempfile::tempdir().unwrap();
    let markets = dir.path().join("markets.jsonl");
    let mut f = File::create(&markets).unwrap();
    writeln!(
        f,
        r#"{{"market_id":"m1","question":"q","category":"other","open_ts":"2026-01-01T00:00:00Z","resolve_ts":"2026-01-02T00:00:00Z","outcome":"NO","total_volume_usdc":60000.0,"resolution_type":"event_resolved"}}"#
    )
    .unwrap();
    drop(f);

    let trades = dir.path().join("trades.jsonl");
    let mut f = File::create(&trades).unwrap();
    writeln!(
        f,
        r#"{{"ts":"2026-01-01T01:00:00Z","market_id":"m1","wallet_id":"w","side":"BUY_YES","price":0.5,"size":2.0}}"#
    )
    .unwrap();
    writeln!(
        f,
        r#"{{"ts":"2026-01-01T02:00:00Z","market_id":"ghost","wallet_id":"w","side":"BUY_YES","price":0.5,"size":2.0}}"#
    )
    .unwrap();
    writeln!(
        f,
        r#"{{"ts":"2026-01-01T03:00:00Z","market_id":"m1","wallet_id":"w","side":"BUY_YES","price":1.2,"size":2.0}}"#
    )
    .unwrap();
    drop(f);

    let report = validate_inputs(&markets, &trades, None, None).unwrap();
    assert!(!report.ok);
    // Price out of range: schema error with its line number.
    let trade_file = &report.files[1];
    assert_eq!(trade_file.errors.len(), 1);
    assert_eq!(trade_file.errors[0].line, 3);
    // Unknown market: referential error with its line number.
    assert_eq!(report.referential_errors.len(), 1);
    assert_eq!(report.referential_errors[0].line, 2);
    assert!(report.referential_errors[0].message.contains("ghost"));

    // A fully valid bundle yields an empty error list.
    let clean_trades = dir.path().join("clean.jsonl");
    let mut f = File::create(&clean_trades).unwrap();
    writeln!(
        f,
        r#"{{"ts":"2026-01-01T01:00:00Z","market_id":"m1","wallet_id":"w","side":"BUY_YES","price":0.5,"size":2.0}}"#
    )
    .unwrap();
    drop(f);
    let report = validate_inputs(&markets, &clean_trades, None, None).unwrap();
    assert!(report.ok);
    assert!(report.referential_errors.is_empty());
}

#[test]
fn volume_cutoff_reproduces_population_counts() {
    // Per-category counts of resolved markets clearing the $50K threshold:
    // 3,970 / 5,582 / 1,711 / 88,656, plus sub-threshold markets that the
    // filter must drop.
    use iflow_core::market::{volume_cutoff_filter, MarketRecord};
    use iflow_core::time::Ts;
    let mut markets = Vec::new();
    let mut push = |cat: Category, n: usize, volume: f64| {
        for i in 0..n {
            markets.push(MarketRecord {
                market_id: format!("{}-{}-{i}", cat.as_str(), volume as i64),
                question: "q".into(),
                category: cat,
                open_ts: Ts::from_unix(0),
                resolve_ts: Ts::from_unix(600),
                deadline_ts: None,
                outcome: Outcome::No,
                total_volume_usdc: volume,
                resolution_type: ResolutionType::Unclassifiable,
            });
        }
    };
    push(Category::MilitaryGeopolitics, 3_970, 75_000.0);
    push(Category::Regulatory, 5_582, 50_000.0);
    push(Category::Corporate, 1_711, 1_000_000.0);
    push(Category::Other, 88_656, 60_000.0);
    // Below-threshold mass in every category.
    push(Category::MilitaryGeopolitics, 2_000, 49_999.0);
    push(Category::Regulatory, 1_500, 10.0);
    push(Category::Other, 5_000, 0.0);

    let kept = volume_cutoff_filter(markets, 50_000.0);
    let mut counts: HashMap<Category, usize> = HashMap::new();
    for m in &kept {
        *counts.entry(m.category).or_insert(0) += 1;
    }
    assert_eq!(counts[&Category::MilitaryGeopolitics], 3_970);
    assert_eq!(counts[&Category::Regulatory], 5_582);
    assert_eq!(counts[&Category::Corporate], 1_711);
    assert_eq!(counts[&Category::Other], 88_656);
    assert_eq!(kept.len(), 99_919);
}

#[test]
fn summary_statistics_match_a_constructed_population() {
    // Framework sanity: build a population whose per-market scores are fixed
    // by construction and check the report recovers the constructed median
    // and positive share exactly.
    use iflow_core::leakage::{compute_ils, ScopeConfig};
    use iflow_core::market::{
        build_price_series, AnchorTier, MarketRecord, NewsAnchor, Side, Trade,
    };
    use iflow_core::time::Ts;

    let n = 725usize;
    let n_pos = 110usize; // 15.17% positive share
    let p_open = 0.3;
    let target_median = -0.084;
    // Exactly n/2 values below the target, the target itself as the middle
    // order statistic, and n/2 above (the positives among them).
    let below = n / 2;
    let above_neg = n - n_pos - below - 1;
    let mut targets = Vec::with_capacity(n);
    for i in 0..below {
        targets.push(-0.4 + (0.3 - 0.085) * (i as f64 / below as f64)); // [-0.4, -0.185)
    }
    targets.push(target_median);
    for i in 0..above_neg {
        targets.push(-0.08 + 0.079 * (i as f64 / above_neg as f64)); // [-0.08, -0.001)
    }
    for i in 0..n_pos {
        targets.push(0.05 + 0.6 * (i as f64 / n_pos as f64));
    }
    assert_eq!(targets.len(), n);

    let cfg = ScopeConfig::default();
    let mut recovered = Vec::new();
    for (i, t) in targets.iter().enumerate() {
        let p_news = p_open + t * (1.0 - p_open);
        let trades: Vec<Trade> = [(0i64, p_open), (600, p_news)]
            .iter()
            .map(|&(ts, p)| Trade {
                ts: Ts::from_unix(ts),
                market_id: format!("m{i}"),
                wallet_id: "w".into(),
                side: Side::BuyYes,
                price: p,
                size: 10.0,
            })
            .collect();
        let series = build_price_series(&trades).unwrap();
        let market = MarketRecord {
            market_id: format!("m{i}"),
            question: "q".into(),
            category: Category::Other,
            open_ts: Ts::from_unix(0),
            resolve_ts: Ts::from_unix(3_600),
            deadline_ts: None,
            outcome: Outcome::Yes,
            total_volume_usdc: 1e5,
            resolution_type: ResolutionType::EventResolved,
        };
        let anchor = NewsAnchor {
            market_id: format!("m{i}"),
            t_news: Ts::from_unix(630),
            tier: AnchorTier::Article,
            proxy_offset_hours: None,
            confidence: 1.0,
        };
        recovered.push(compute_ils(&market, &series, &anchor, &cfg).unwrap().ils.unwrap());
    }
    let q = Quantiles::from_values(&recovered).unwrap();
    assert!((q.median - target_median).abs() < 1e-9, "median {}", q.median);
    let share = n_pos as f64 / n as f64;
    assert!((q.positive_share - share).abs() < 1e-9);
}

fn run_binary(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_iflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn cli_binary_power_and_synth_and_run() {
    // power: formula reference point.
    let out = run_binary(&["power", "--pi1", "0.7", "--pi0", "0.2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["required_positives"], 6);

    // synth -> validate -> classify -> run, end to end through the binary.
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("scenario.toml");
    std::fs::write(
        &spec_path,
        r#"
seed = 3
n_markets = 12
regime = "event_leak"
leak_fraction = 0.5
"#,
    )
    .unwrap();
    let bundle_dir = dir.path().join("bundle");
    let out = run_binary(&[
        "synth",
        "--spec",
        spec_path.to_str().unwrap(),
        "--out-dir",
        bundle_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run_binary(&[
        "validate",
        "--markets",
        bundle_dir.join("markets.jsonl").to_str().unwrap(),
        "--trades",
        bundle_dir.join("trades.jsonl").to_str().unwrap(),
        "--anchors",
        bundle_dir.join("anchors.jsonl").to_str().unwrap(),
        "--wallets",
        bundle_dir.join("wallets.jsonl").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["ok"], true);

    let out = run_binary(&[
        "classify",
        "--markets",
        bundle_dir.join("markets.jsonl").to_str().unwrap(),
        "--format",
        "table",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("event_resolved"));

    // Full pipeline via config file.
    let cfg_path = dir.path().join("cfg.toml");
    let out_dir = dir.path().join("out");
    std::fs::write(
        &cfg_path,
        format!(
            r#"
volume_cutoff_usdc = 0.0
output_dir = "{}"

[inputs]
markets = "{}"
trades = "{}"
anchors = "{}"
wallets = "{}"
"#,
            out_dir.display(),
            bundle_dir.join("markets.jsonl").display(),
            bundle_dir.join("trades.jsonl").display(),
            bundle_dir.join("anchors.jsonl").display(),
            bundle_dir.join("wallets.jsonl").display(),
        ),
    )
    .unwrap();
    let out = run_binary(&["--config", cfg_path.to_str().unwrap(), "run"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("labels.jsonl").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("ils distribution"));

    // ils subcommand writes one row per event market (the config file lifts
    // the volume cutoff, which synthetic notionals do not always clear).
    let labels_path = dir.path().join("event_labels.jsonl");
    let out = run_binary(&[
        "--config",
        cfg_path.to_str().unwrap(),
        "ils",
        "--markets",
        bundle_dir.join("markets.jsonl").to_str().unwrap(),
        "--trades",
        bundle_dir.join("trades.jsonl").to_str().unwrap(),
        "--anchors",
        bundle_dir.join("anchors.jsonl").to_str().unwrap(),
        "--wallets",
        bundle_dir.join("wallets.jsonl").to_str().unwrap(),
        "--out",
        labels_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = std::fs::read_to_string(&labels_path).unwrap();
    assert_eq!(lines.lines().count(), 12);
}

#[test]
fn cli_binary_micro_and_murphy_and_hazard() {
    let dir = tempfile::tempdir().unwrap();

    // Murphy pairs.
    let pairs = dir.path().join("pairs.jsonl");
    let mut f = File::create(&pairs).unwrap();
    for i in 0..100 {
        let o = i % 2;
        writeln!(f, r#"{{"forecast":{},"outcome":{o}}}"#, o).unwrap();
    }
    drop(f);
    let out = run_binary(&["murphy", "--pairs", pairs.to_str().unwrap(), "--share"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["decomposition"]["brier"], 0.0);
    assert_eq!(v["resolution_share"], 1.0);

    // Micro streaming over a synthetic market.
    let bundle_dir = dir.path().join("bundle");
    let spec = ScenarioSpec {
        seed: 8,
        n_markets: 2,
        regime: Regime::EventLeak,
        lifetime_days: 0.2,
        arrival: iflow_core::synth::Arrival::Poisson { rate_per_min: 3.0 },
        ..Default::default()
    };
    gen_population(&spec).unwrap().write_dir(&bundle_dir).unwrap();
    let micro_out = dir.path().join("micro.jsonl");
    let out = run_binary(&[
        "micro",
        "--trades",
        bundle_dir.join("trades.jsonl").to_str().unwrap(),
        "--market",
        "syn00000",
        "--at",
        "stream",
        "--out",
        micro_out.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(&micro_out).unwrap().lines().count() > 100);

    // Hazard fit over a deadline bundle.
    let dl_dir = dir.path().join("dl");
    let spec = ScenarioSpec {
        seed: 10,
        n_markets: 60,
        regime: Regime::DeadlineLeak,
        hazard_lambda_per_day: 0.5,
        lifetime_days: 3.0,
        ..Default::default()
    };
    gen_population(&spec).unwrap().write_dir(&dl_dir).unwrap();
    let out = run_binary(&[
        "hazard-fit",
        "--markets",
        dl_dir.join("markets.jsonl").to_str().unwrap(),
        "--events",
        dl_dir.join("anchors.jsonl").to_str().unwrap(),
        "--category",
        "other",
        "--include-censored",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let lambda = fit["lambda_per_day"].as_f64().unwrap();
    assert!((lambda - 0.5).abs() < 0.25, "lambda {lambda}");

    // wallet-novelty rows.
    let wn_out = dir.path().join("wn.jsonl");
    let out = run_binary(&[
        "wallet-novelty",
        "--wallets",
        bundle_dir.join("wallets.jsonl").to_str().unwrap(),
        "--trades",
        bundle_dir.join("trades.jsonl").to_str().unwrap(),
        "--markets",
        bundle_dir.join("markets.jsonl").to_str().unwrap(),
        "--out",
        wn_out.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&wn_out).unwrap().lines().count(), 2);

    // label vectors from an ils output.
    let zero_cutoff_cfg = dir.path().join("zero_cutoff.toml");
    std::fs::write(&zero_cutoff_cfg, "volume_cutoff_usdc = 0.0\n").unwrap();
    let labels_path = dir.path().join("event_labels_raw.jsonl");
    let out = run_binary(&[
        "--config",
        zero_cutoff_cfg.to_str().unwrap(),
        "ils",
        "--markets",
        bundle_dir.join("markets.jsonl").to_str().unwrap(),
        "--trades",
        bundle_dir.join("trades.jsonl").to_str().unwrap(),
        "--anchors",
        bundle_dir.join("anchors.jsonl").to_str().unwrap(),
        "--out",
        labels_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    // Extract the leakage objects into the bare label format `label` expects.
    let rows: Vec<serde_json::Value> = std::fs::read_to_string(&labels_path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["leakage"].clone())
        .collect();
    let bare = dir.path().join("bare_labels.jsonl");
    let mut f = File::create(&bare).unwrap();
    for r in rows {
        writeln!(f, "{r}").unwrap();
    }
    drop(f);
    let vec_out = dir.path().join("vectors.jsonl");
    let out = run_binary(&[
        "label",
        "--leakage",
        bare.to_str().unwrap(),
        "--thresholds",
        "0.5,0.5,0.5",
        "--out",
        vec_out.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&vec_out).unwrap().lines().count(), 2);
}

#[test]
fn run_rejects_missing_config() {
    let out = run_binary(&["run"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}
