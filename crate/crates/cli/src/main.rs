//! `traderisk` — systemic trade-risk pipeline over multiplex trade networks.
//!
//! Subcommands cover the full workflow: synthetic dataset generation,
//! CSV ingestion into a checksummed panel archive, indicator tables,
//! null-model ensembles, and correlation reports.
//!
//! Exit codes: 0 success, 1 success but spectrally degenerate layers were
//! encountered, 2 input or configuration error.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use config::Config;
use traderisk_core::model::{validate_panel, IndicatorTable, TradeFlowPanel};
use traderisk_core::nullmodels::{self, Scheme};
use traderisk_core::pipeline::{self, PipelineParams};
use traderisk_core::stats;
use traderisk_core::{archive, fixture, ingest};

#[derive(Parser)]
#[command(name = "traderisk", version, about = "Systemic trade-risk indicators for multiplex trade networks")]
struct Cli {
    /// TOML configuration file (falls back to $TRADERISK_CONFIG, then defaults)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Base seed, overriding the configured one
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for ensemble runs (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic benchmark dataset plus a matching config file
    Fixture {
        /// Output directory for countries.csv, resources.csv, trade.csv, config.toml
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Parse and reconcile raw CSVs into a checksummed panel archive
    Ingest {
        /// Directory containing countries.csv, resources.csv, trade.csv
        #[arg(long, value_name = "DIR")]
        input: PathBuf,
        /// Panel archive to write (JSON)
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Compute global and regional indicator tables from a panel archive
    Indicators {
        #[arg(long, value_name = "FILE")]
        panel: PathBuf,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Ensemble-average network indicators over randomized surrogate panels
    Nullmodel {
        #[arg(long, value_name = "FILE")]
        panel: PathBuf,
        /// fix-degree, fix-in-deg or fix-in-out-deg
        #[arg(long)]
        scheme: String,
        /// Surrogates to draw (default: from config)
        #[arg(long)]
        realizations: Option<u32>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Correlation tables with significance stars
    Correlate {
        #[arg(long, value_name = "FILE")]
        panel: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Indicators, TradeRisk rankings and correlations in one pass
    Report {
        #[arg(long, value_name = "FILE")]
        panel: PathBuf,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(degenerate_layers) => {
            if degenerate_layers > 0 {
                log::warn!("{degenerate_layers} spectrally degenerate layer(s) were skipped");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

/// Runs the selected subcommand; returns the number of degenerate layers
/// encountered (0 for subcommands where the notion does not apply).
fn run(cli: Cli) -> anyhow::Result<usize> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let stamp = Stamp {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    };

    match cli.command {
        Command::Fixture { out } => {
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            fixture::write_dir(&out, cfg.seed)?;
            // a config matching the generated dataset, so downstream stages
            // can be pointed straight at it
            let mut fixture_cfg = cfg.clone();
            fixture_cfg.regions = fixture::default_params().regions;
            fixture_cfg.year_start = *fixture::fixture_years().first().expect("non-empty");
            fixture_cfg.year_end = *fixture::fixture_years().last().expect("non-empty");
            std::fs::write(out.join("config.toml"), fixture_cfg.to_toml())
                .with_context(|| format!("writing {}", out.join("config.toml").display()))?;
            Ok(0)
        }
        Command::Ingest { input, out } => {
            let panel = ingest::load_dir(&input, &cfg.years())?;
            let violations = validate_panel(&panel);
            for v in &violations {
                log::warn!("panel violation: {v:?}");
            }
            anyhow::ensure!(
                violations.is_empty(),
                "panel failed validation with {} violation(s)",
                violations.len()
            );
            archive::save(&panel, &out)?;
            Ok(0)
        }
        Command::Indicators { panel, out_dir } => {
            let panel = archive::load(&panel)?;
            let outcome = pipeline::compute_indicator_table(&panel, &cfg.pipeline_params())?;
            std::fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            write_indicator_files(&outcome.table, &out_dir, &stamp)?;
            Ok(outcome.degenerate_layers)
        }
        Command::Nullmodel {
            panel,
            scheme,
            realizations,
            out,
        } => {
            let scheme: Scheme = scheme
                .parse()
                .map_err(|e: String| anyhow::anyhow!(e))
                .context("invalid --scheme")?;
            let panel = archive::load(&panel)?;
            let realizations = realizations.unwrap_or(cfg.realizations);
            run_nullmodel(&panel, &cfg, scheme, realizations, cli.jobs, &out, &stamp)?;
            Ok(0)
        }
        Command::Correlate { panel, out } => {
            let panel = archive::load(&panel)?;
            let outcome = pipeline::compute_indicator_table(&panel, &cfg.pipeline_params())?;
            write_correlations(&outcome.table, &cfg, &out, &stamp)?;
            Ok(outcome.degenerate_layers)
        }
        Command::Report { panel, out_dir } => {
            let panel = archive::load(&panel)?;
            let outcome = pipeline::compute_indicator_table(&panel, &cfg.pipeline_params())?;
            std::fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            write_indicator_files(&outcome.table, &out_dir, &stamp)?;
            write_correlations(&outcome.table, &cfg, &out_dir.join("correlations.csv"), &stamp)?;
            Ok(outcome.degenerate_layers)
        }
    }
}

/// Provenance line prepended to every output file.
struct Stamp {
    config_hash: String,
    seed: u64,
}

impl Stamp {
    fn header(&self) -> String {
        format!(
            "# traderisk {} config={} seed={}\n",
            env!("CARGO_PKG_VERSION"),
            self.config_hash,
            self.seed
        )
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_indicator_files(
    table: &IndicatorTable,
    out_dir: &Path,
    stamp: &Stamp,
) -> anyhow::Result<()> {
    let mut global = stamp.header();
    global.push_str("resource,avg_degree,lambda,scc_fraction,scarcity,total_trade_volume_kg,csr\n");
    for (resource, g) in &table.global {
        writeln!(
            global,
            "{},{},{},{},{},{},{}",
            resource,
            fmt_opt(g.avg_degree),
            fmt_opt(g.lambda),
            fmt_opt(g.scc_fraction),
            fmt_opt(g.scarcity),
            fmt_opt(g.total_trade_volume_kg),
            fmt_opt(g.csr)
        )?;
    }
    write_file(&out_dir.join("global.csv"), &global)?;

    let mut regional = stamp.header();
    regional.push_str(
        "resource,region,pagerank,in_strength,in_degree,traderisk,instrength_traderisk,\
         import_reliance,volatility,trade_barrier\n",
    );
    for (resource, per_region) in &table.regional {
        for (region, r) in per_region {
            writeln!(
                regional,
                "{},{},{},{},{},{},{},{},{},{}",
                resource,
                region,
                fmt_opt(r.pagerank),
                fmt_opt(r.in_strength),
                fmt_opt(r.in_degree),
                fmt_opt(r.traderisk),
                fmt_opt(r.instrength_traderisk),
                fmt_opt(r.import_reliance),
                fmt_opt(r.volatility),
                fmt_opt(r.trade_barrier)
            )?;
        }
    }
    write_file(&out_dir.join("regional.csv"), &regional)?;

    for region in table.regions() {
        let ranks = pipeline::traderisk_ranks(table, &region);
        if ranks.is_empty() {
            continue;
        }
        let mut text = stamp.header();
        text.push_str("rank,resource,traderisk\n");
        for (resource, rank, tr) in ranks {
            writeln!(text, "{rank},{resource},{tr}")?;
        }
        write_file(&out_dir.join(format!("ranks_{region}.csv")), &text)?;
    }
    Ok(())
}

fn write_correlations(
    table: &IndicatorTable,
    cfg: &Config,
    out: &Path,
    stamp: &Stamp,
) -> anyhow::Result<()> {
    let regions: Vec<String> = cfg.regions.iter().map(|r| r.id.clone()).collect();
    let specs = stats::default_suite(&regions);
    let report = stats::correlation_suite(table, &specs);
    let mut text = stamp.header();
    text.push_str("x,y,n,rho,p,stars,controlling_for,partial_rho,partial_p,partial_stars,note\n");
    for e in &report.entries {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{}",
            e.x_name,
            e.y_name,
            e.n,
            fmt_opt(e.rho),
            fmt_opt(e.p_value),
            e.p_value.map(stats::stars).unwrap_or(""),
            e.controlling_for.clone().unwrap_or_default(),
            fmt_opt(e.partial_rho),
            fmt_opt(e.partial_p),
            e.partial_p.map(stats::stars).unwrap_or(""),
            e.note.clone().unwrap_or_default()
        )?;
    }
    write_file(out, &text)
}

/// Null-model ensemble: the threshold is applied once to the observed panel,
/// each surrogate randomizes the thresholded layers, and the downstream
/// indicators are computed without further thresholding (randomized shares
/// would otherwise be re-filtered, breaking the degree constraints).
fn run_nullmodel(
    panel: &TradeFlowPanel,
    cfg: &Config,
    scheme: Scheme,
    realizations: u32,
    jobs: Option<usize>,
    out: &Path,
    stamp: &Stamp,
) -> anyhow::Result<()> {
    anyhow::ensure!(realizations >= 1, "need at least one realization");
    let base = ingest::apply_threshold(panel, cfg.threshold);
    let mut params: PipelineParams = cfg.pipeline_params();
    params.threshold = 0.0;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("building thread pool")?;
    // one ordered result slot per realization: aggregation order, and hence
    // output bytes, are independent of scheduling
    let results: Vec<_> = pool.install(|| {
        (0..realizations)
            .into_par_iter()
            .map(|r| {
                nullmodels::randomize_panel(&base, scheme, cfg.seed, r)
                    .and_then(|surrogate| {
                        pipeline::compute_indicator_table(&surrogate, &params)
                            .map(|o| pipeline::flatten_table(&o.table))
                    })
            })
            .collect()
    });

    let mut per_key: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    let mut failed = 0usize;
    for result in results {
        match result {
            Ok(values) => {
                for (k, v) in values {
                    per_key.entry(k).or_default().push(v);
                }
            }
            Err(err) => {
                log::warn!("realization failed: {err}");
                failed += 1;
            }
        }
    }

    let mut text = stamp.header();
    writeln!(
        text,
        "# scheme={scheme} realizations={realizations} failed={failed}"
    )?;
    text.push_str("metric,mean,std_error,n\n");
    for (key, vs) in per_key {
        let n = vs.len();
        let mean = vs.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        writeln!(text, "{key},{mean},{std_error},{n}")?;
    }
    write_file(out, &text)
}
