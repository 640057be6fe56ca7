//! Command line front end: train models, run the degradation protocol,
//! recognize single probes, degrade images, dump diagnostics, and emit
//! split lists.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use lfd::archive::load_bank;
use lfd::descriptors::DescriptorKind;
use lfd::harness::{
    evaluate, inspect, scan_dataset, split, train, ExperimentConfig, InspectRequest,
    SPLIT_RNG_VERSION,
};
use lfd::imaging::{degrade, load_pgm, save_pgm, DegradationSpec};
use lfd::recognition::multiscale_recognize;

#[derive(Parser)]
#[command(name = "lfd", about = "Local frequency descriptors for degraded grayscale recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file plus per-key override flags. Flags carry the exact key names
/// used in the config file.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Plain-text key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "n_train")]
    n_train: Option<String>,
    /// Comma list of descriptor kinds: lmd,lpd,elmd,elpd.
    #[arg(long)]
    kinds: Option<String>,
    /// Comma list of scale modes: single,competition.
    #[arg(long)]
    modes: Option<String>,
    #[arg(long = "single_scale")]
    single_scale: Option<String>,
    /// Competition scales: start:stop:step or a comma list of odd sizes.
    #[arg(long)]
    scales: Option<String>,
    #[arg(long = "valid_bins_lmd")]
    valid_bins_lmd: Option<String>,
    #[arg(long = "valid_bins_lpd")]
    valid_bins_lpd: Option<String>,
    #[arg(long = "valid_bins_elmd")]
    valid_bins_elmd: Option<String>,
    #[arg(long = "valid_bins_elpd")]
    valid_bins_elpd: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// Comma list of degradations, e.g. clean,lowres(2),gaussian(3,7),motion(7,45),kernel(k.txt).
    #[arg(long)]
    degradations: Option<String>,
    #[arg(long)]
    output: Option<String>,
    /// Normalize image dimensions: WxH, or `none`.
    #[arg(long)]
    resize: Option<String>,
}

impl ConfigArgs {
    fn build(&self) -> anyhow::Result<ExperimentConfig> {
        let mut overrides: Vec<(String, String)> = Vec::new();
        let mut push = |key: &str, value: &Option<String>| {
            if let Some(v) = value {
                overrides.push((key.to_string(), v.clone()));
            }
        };
        push("dataset", &self.dataset);
        push("seed", &self.seed);
        push("n_train", &self.n_train);
        push("kinds", &self.kinds);
        push("modes", &self.modes);
        push("single_scale", &self.single_scale);
        push("scales", &self.scales);
        push("valid_bins_lmd", &self.valid_bins_lmd);
        push("valid_bins_lpd", &self.valid_bins_lpd);
        push("valid_bins_elmd", &self.valid_bins_elmd);
        push("valid_bins_elpd", &self.valid_bins_elpd);
        push("lambda", &self.lambda);
        push("degradations", &self.degradations);
        push("output", &self.output);
        push("resize", &self.resize);
        Ok(ExperimentConfig::from_sources(self.config.as_deref(), &overrides)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train scale banks for the configured kinds and write model archives.
    Train(ConfigArgs),
    /// Run the degradation protocol on the held-out test split.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Archive root holding model_<kind> directories; defaults to the
        /// configured output directory.
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Recognize one probe image with a trained bank.
    Recognize {
        /// A bank directory (model_<kind>).
        #[arg(long)]
        model: PathBuf,
        /// Probe image (binary PGM).
        #[arg(long)]
        image: PathBuf,
    },
    /// Apply a degradation to an image file.
    Degrade {
        /// Degradation, e.g. lowres(2), gaussian(3,7), motion(7,45), kernel(k.txt).
        #[arg(long)]
        spec: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Dump label images, regional histograms, and confidence traces.
    Inspect {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 11)]
        scale: usize,
        /// Descriptor kind: lmd, lpd, elmd, elpd.
        #[arg(long, default_value = "elmd")]
        kind: String,
        /// 1-based principal,correlated pair for enhanced kinds, e.g. 1,2.
        #[arg(long)]
        pair: Option<String>,
        /// 1-based plane index for single-plane kinds.
        #[arg(long)]
        plane: Option<usize>,
        /// Trained bank directory; adds a per-scale confidence trace.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also export min-max scaled magnitude/phase planes.
        #[arg(long)]
        planes: bool,
        #[arg(long, default_value = "inspect_out")]
        output: PathBuf,
        /// Normalize probe dimensions: WxH.
        #[arg(long)]
        resize: Option<String>,
    },
    /// Emit the seeded train/test split lists.
    Split {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn parse_resize(text: &Option<String>) -> anyhow::Result<Option<(usize, usize)>> {
    match text {
        None => Ok(None),
        Some(t) => {
            let (w, h) = t.split_once('x').context("resize must be WxH")?;
            Ok(Some((w.parse()?, h.parse()?)))
        }
    }
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train(args) => {
            let config = args.build()?;
            let dirs = train(&config)?;
            for dir in dirs {
                println!("wrote {}", dir.display());
            }
        }
        Command::Evaluate { config, archive } => {
            let config = config.build()?;
            let root = archive.unwrap_or_else(|| config.output.clone());
            let report = evaluate(&config, &root)?;
            print!("{}", report.table.to_aligned_text());
            for path in report.written {
                println!("wrote {}", path.display());
            }
        }
        Command::Recognize { model, image } => {
            let bank = load_bank(&model)?;
            let probe = load_pgm(&image)?;
            let result = multiscale_recognize(&bank, &probe)?;
            println!(
                "identity: {}  (scale {}, confidence {:.6})",
                bank.class_names()[result.identity],
                result.winning_scale,
                result.confidence
            );
            println!("scale  top_class  confidence");
            for outcome in &result.per_scale {
                let flag = if outcome.degenerate { "  [degenerate margin]" } else { "" };
                println!(
                    "{:>5}  {:>9}  {:>10.6}{}",
                    outcome.scale,
                    bank.class_names()[outcome.class],
                    outcome.confidence,
                    flag
                );
            }
        }
        Command::Degrade { spec, input, output } => {
            let spec = DegradationSpec::parse(&spec)?;
            let image = load_pgm(&input)?;
            save_pgm(&degrade(&image, &spec)?, &output)?;
            println!("wrote {}", output.display());
        }
        Command::Inspect {
            image,
            scale,
            kind,
            pair,
            plane,
            model,
            planes,
            output,
            resize,
        } => {
            let kind = DescriptorKind::parse(&kind)?;
            let pair = match pair {
                None => None,
                Some(text) => {
                    let (p, c) = text
                        .split_once(',')
                        .context("pair must be two comma-separated 1-based indices")?;
                    Some((p.trim().parse()?, c.trim().parse()?))
                }
            };
            let request = InspectRequest {
                image,
                scale,
                kind,
                pair,
                plane,
                model,
                export_planes: planes,
                output,
                resize: parse_resize(&resize)?,
            };
            for path in inspect(&request)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Split { config } => {
            let config = config.build()?;
            let manifest = scan_dataset(&config.dataset)?;
            let partition = split(&manifest, config.seed, config.n_train)?;
            std::fs::create_dir_all(&config.output)?;
            for (name, samples) in [("train.txt", &partition.train), ("test.txt", &partition.test)]
            {
                let mut text = format!(
                    "# seed={} n_train={} rng={}\n",
                    config.seed, config.n_train, SPLIT_RNG_VERSION
                );
                for s in samples {
                    text.push_str(&format!("{} {}\n", s.class_name, s.rel));
                }
                let path = config.output.join(name);
                std::fs::write(&path, text)?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}
