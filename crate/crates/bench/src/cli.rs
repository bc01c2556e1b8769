use std::path::PathBuf;

use aquaseg_core::csa::TemplateBank;
use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{BenchError, Result};
use crate::runner::run;
use crate::sentences::sentence_manifest;

/// Environment variable holding the log filter, e.g. `debug` or `aquaseg_bench=trace`.
pub const LOG_ENV: &str = "AQUASEG_LOG";

/// Training-free open-vocabulary segmentation benchmark.
///
/// Without a subcommand, evaluates a manifest and writes metrics.json,
/// metrics.csv and per-class-iou.csv to the output directory.
/// Exit codes: 0 success, 1 data error, 2 configuration error.
#[derive(Debug, Parser)]
#[command(name = "aquaseg", version, args_conflicts_with_subcommands = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the sentence manifest consumed by the text-embedding extractor.
    Sentences {
        #[arg(long)]
        manifest: PathBuf,
        /// Template file with `{class}` slots; defaults to the bundled underwater bank.
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "w-max")]
    pub w_max: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long = "geo-stage")]
    pub geo_stage: Option<u8>,
    /// Skip geometric correction; interpolated features pass through.
    #[arg(long = "no-gmg")]
    pub no_gmg: bool,
    /// Skip reasoning fusion; template embeddings only.
    #[arg(long = "no-csa")]
    pub no_csa: bool,
    /// Use the plain single-prompt bank instead of the template bank.
    #[arg(long = "no-templates")]
    pub no_templates: bool,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write each prediction as a uint16 .npy under <out>/predictions.
    #[arg(long = "dump-predictions")]
    pub dump_predictions: bool,
}

impl RunArgs {
    /// The configuration file, if any, with every given flag applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(m) = &self.manifest {
            cfg.manifest_path = m.clone();
        }
        if let Some(v) = self.beta {
            cfg.gmg.beta = v;
        }
        if let Some(v) = self.gamma {
            cfg.gmg.gamma = v;
        }
        if let Some(v) = self.geo_stage {
            cfg.gmg.geo_stage = v;
        }
        if let Some(v) = self.w_max {
            cfg.fusion.w_max = v;
        }
        if let Some(v) = self.tau {
            cfg.fusion.tau = v;
        }
        if let Some(v) = self.temperature {
            cfg.temperature = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        cfg.enable_gmg &= !self.no_gmg;
        cfg.enable_csa &= !self.no_csa;
        cfg.enable_templates &= !self.no_templates;
        cfg.dump_predictions |= self.dump_predictions;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Some(Command::Sentences {
            manifest,
            templates,
            out,
        }) => {
            let bank = match templates {
                Some(path) => TemplateBank::load(path)?,
                None => TemplateBank::underwater(),
            };
            let sentences = sentence_manifest(&manifest, &bank)?;
            let mut json = serde_json::to_string_pretty(&sentences).expect("sentences serialize");
            json.push('\n');
            match out {
                Some(path) => std::fs::write(&path, json).map_err(BenchError::output(&path))?,
                None => print!("{json}"),
            }
            Ok(())
        }
        None => {
            let cfg = cli.run.resolve()?;
            let report = run(&cfg)?;
            println!(
                "aAcc {:.4}  mIoU {:.4}  mAcc {:.4}  ({} samples, {} pixels) -> {}",
                report.aacc,
                report.miou,
                report.macc,
                report.sample_count,
                report.pixel_count,
                cfg.output_dir.display()
            );
            Ok(())
        }
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "info");
    // A second initialization (e.g. from tests) is harmless.
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}
