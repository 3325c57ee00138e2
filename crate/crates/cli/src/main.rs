use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use iflow_cli::commands;
use iflow_cli::config::WindowsConfig;
use iflow_cli::pipeline::summary_table;
use iflow_core::market::Category;
use iflow_core::scoring::{LabelThresholds, PowerSpec};

#[derive(Parser)]
#[command(
    name = "iflow",
    version,
    about = "Informed-flow analytics for binary prediction markets: leakage labels, deadline scoring, microstructure features, and a synthetic oracle"
)]
struct Cli {
    /// Pipeline config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Downgrade per-market failures to error records instead of aborting.
    #[arg(long, global = true)]
    skip_errors: bool,
    /// Worker threads for per-market stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed override for generators.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Classify markets into resolution types and categories.
    Classify {
        #[arg(long)]
        markets: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
    },
    /// Score event-resolved markets: leakage labels with auxiliary metrics.
    Ils {
        #[arg(long)]
        markets: PathBuf,
        #[arg(long)]
        trades: PathBuf,
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long)]
        wallets: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score deadline-resolved markets against event-occurrence anchors.
    IlsDeadline {
        #[arg(long)]
        markets: PathBuf,
        #[arg(long)]
        trades: PathBuf,
        /// Anchor file carrying event-occurrence (and expiry) anchors.
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the per-category exponential hazard from event anchors.
    HazardFit {
        #[arg(long)]
        markets: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        category: String,
        /// Include NO-resolved deadline windows as censored exposure.
        #[arg(long)]
        include_censored: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rolling microstructure features for one market.
    Micro {
        #[arg(long)]
        trades: PathBuf,
        #[arg(long)]
        market: String,
        /// RFC3339 timestamp, or "stream" for one row per minute boundary.
        #[arg(long)]
        at: String,
        /// Windows config file (TOML section identical to the pipeline's).
        #[arg(long)]
        windows: Option<PathBuf>,
        /// Explicit VPIN bucket volume in tokens.
        #[arg(long)]
        bucket_volume: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wallet novelty for the top winning trades of each market.
    WalletNovelty {
        #[arg(long)]
        wallets: PathBuf,
        #[arg(long)]
        trades: PathBuf,
        #[arg(long)]
        markets: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Murphy decomposition of forecast/outcome pairs.
    Murphy {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// Keep raw forecasts (adds the within-bin terms) instead of
        /// quantizing to bin means.
        #[arg(long)]
        raw: bool,
        /// Also report the resolution share RES/UNC.
        #[arg(long)]
        share: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Collapse leakage labels into binary training labels.
    Label {
        #[arg(long)]
        leakage: PathBuf,
        /// theta1,theta2,theta3
        #[arg(long, default_value = "0.5,0.5,0.5")]
        thresholds: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Required labeled positives for a detector skill claim.
    Power {
        #[arg(long)]
        pi1: f64,
        #[arg(long)]
        pi0: f64,
        #[arg(long, default_value_t = 0.05)]
        kappa: f64,
        #[arg(long, default_value_t = 0.80)]
        power: f64,
        #[arg(long)]
        two_sided: bool,
        #[arg(long)]
        pooled_variance: bool,
    },
    /// Generate a synthetic population with ground truth.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Full batch pipeline: filter, classify, score, label, report.
    Run {
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Schema and referential validation of input files (report only).
    Validate {
        #[arg(long)]
        markets: PathBuf,
        #[arg(long)]
        trades: PathBuf,
        #[arg(long)]
        anchors: Option<PathBuf>,
        #[arg(long)]
        wallets: Option<PathBuf>,
    },
}

fn parse_thresholds(s: &str) -> Result<LabelThresholds> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        anyhow::bail!("thresholds must be theta1,theta2,theta3");
    }
    Ok(LabelThresholds {
        theta1: parts[0].trim().parse()?,
        theta2: parts[1].trim().parse()?,
        theta3: parts[2].trim().parse()?,
    })
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Classify {
            markets,
            rules,
            out,
            format,
        } => {
            let output = commands::classify(&markets, rules.as_deref())?;
            match format {
                OutputFormat::Json => commands::write_or_print(out.as_deref(), &output)?,
                OutputFormat::Table => {
                    let table = commands::classify_table(&output);
                    match out {
                        Some(path) => std::fs::write(path, table)?,
                        None => print!("{table}"),
                    }
                }
            }
        }
        Command::Ils {
            markets,
            trades,
            anchors,
            wallets,
            out,
        } => {
            let n = commands::ils_command(
                &markets,
                &trades,
                &anchors,
                wallets.as_deref(),
                cli.config.as_deref(),
                &out,
                cli.skip_errors,
            )?;
            eprintln!("scored {n} event-resolved markets -> {}", out.display());
        }
        Command::IlsDeadline {
            markets,
            trades,
            events,
            out,
        } => {
            let n = commands::ils_deadline_command(
                &markets,
                &trades,
                &events,
                cli.config.as_deref(),
                &out,
                cli.skip_errors,
            )?;
            eprintln!("scored {n} deadline markets -> {}", out.display());
        }
        Command::HazardFit {
            markets,
            events,
            category,
            include_censored,
            out,
        } => {
            let category: Category = category.parse().map_err(anyhow::Error::msg)?;
            let fit = commands::hazard_fit_command(&markets, &events, category, include_censored)?;
            commands::write_or_print(out.as_deref(), &fit)?;
        }
        Command::Micro {
            trades,
            market,
            at,
            windows,
            bucket_volume,
            out,
        } => {
            let windows_cfg = match windows {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)?;
                    toml::from_str::<WindowsConfig>(&text)?
                }
                None => WindowsConfig::default(),
            };
            let n =
                commands::micro_command(&trades, &market, &at, &windows_cfg, bucket_volume, &out)?;
            eprintln!("wrote {n} feature rows -> {}", out.display());
        }
        Command::WalletNovelty {
            wallets,
            trades,
            markets,
            top_k,
            out,
        } => {
            let n = commands::wallet_novelty_command(&wallets, &trades, &markets, top_k, &out)?;
            eprintln!("wrote {n} novelty rows -> {}", out.display());
        }
        Command::Murphy {
            pairs,
            bins,
            raw,
            share,
            out,
        } => {
            let output = commands::murphy_command(&pairs, bins, raw, share)?;
            commands::write_or_print(out.as_deref(), &output)?;
        }
        Command::Label {
            leakage,
            thresholds,
            out,
        } => {
            let th = parse_thresholds(&thresholds)?;
            let n = commands::label_command(&leakage, th, &out)?;
            eprintln!("wrote {n} label vectors -> {}", out.display());
        }
        Command::Power {
            pi1,
            pi0,
            kappa,
            power,
            two_sided,
            pooled_variance,
        } => {
            let spec = PowerSpec {
                pi1,
                pi0,
                kappa,
                power,
                two_sided,
                pooled_variance,
            };
            let value = commands::power_command(&spec)?;
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        Command::Synth { spec, out_dir } => {
            let n = commands::synth_command(&spec, &out_dir, cli.seed)?;
            eprintln!("generated {n} markets -> {}", out_dir.display());
        }
        Command::Run { out_dir } => {
            let config = cli
                .config
                .ok_or_else(|| anyhow::anyhow!("run requires --config"))?;
            let output = commands::run_command(&config, out_dir, cli.skip_errors, cli.jobs)?;
            if output.records.is_empty() {
                eprintln!("warning: no markets survived the input filters; outputs are empty");
            }
            print!("{}", summary_table(&output.summary));
        }
        Command::Validate {
            markets,
            trades,
            anchors,
            wallets,
        } => {
            let report = commands::validate_command(
                &markets,
                &trades,
                anchors.as_deref(),
                wallets.as_deref(),
            )?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}
