//! Command-line harness: synthetic corpus generation, model training,
//! single-image upscaling, quality and recognition experiments, and
//! gradient checks.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use irissr::harness::{
    generate_corpus, ingest, load_model, prepare_model, run_quality_experiment,
    run_recognition_experiment, Corpus, ExperimentConfig, ExperimentReport, Method, SynthConfig,
    TrainedModel,
};
use irissr::image::{load_grayscale, resize, save_grayscale, Image, ResampleKernel};
use irissr::nn::Activation;
use irissr::sae::{sae_grad_check, Autoencoder, SaeModel, SAE_DIMS};
use irissr::srcnn::{srcnn_grad_check, SrcnnModel};

#[derive(Parser)]
#[command(name = "irissr", version, about = "Iris super-resolution experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus root directory.
    #[arg(long)]
    corpus: PathBuf,
    /// Annotation CSV; defaults to <corpus>/annotations.csv.
    #[arg(long)]
    annotations: Option<PathBuf>,
}

impl CorpusArgs {
    fn ingest(&self, config: &ExperimentConfig) -> Result<Corpus> {
        let file = self
            .annotations
            .clone()
            .unwrap_or_else(|| self.corpus.join("annotations.csv"));
        let corpus = ingest(&self.corpus, &file, &config.split.to_spec()?)?;
        for r in &corpus.rejects {
            log::warn!("rejected {}: {}", r.image_id, r.reason);
        }
        eprintln!(
            "ingested {} images ({} rejected)",
            corpus.entries.len(),
            corpus.rejects.len()
        );
        Ok(corpus)
    }
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment settings (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's training factor.
    #[arg(long)]
    train_factor: Option<u32>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_toml_file(p)
                .with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(factor) = self.train_factor {
            cfg.train_factor = factor;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: irissr::Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic annotated iris corpus.
    Synth {
        /// Output corpus directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 6)]
        eyes: usize,
        #[arg(long, default_value_t = 3)]
        images_per_eye: usize,
        #[arg(long, default_value_t = 340)]
        width: usize,
        #[arg(long, default_value_t = 320)]
        height: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a learned method on the corpus' train split and save weights.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// srcnn-fs, srcnn-ft, srcnn-tl, or sae.
        #[arg(long, value_parser = parse_method)]
        method: Method,
        /// Weight file to write.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Upscale one grayscale PNG.
    Sr {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Target upscale factor (2, 4, 8, or 16).
        #[arg(long)]
        factor: u32,
        /// bilinear, bicubic, or a learned method (needs --weights).
        #[arg(long, default_value = "bicubic", value_parser = parse_method)]
        method: Method,
        /// Weight file of a learned method.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Factor the weights were trained at; cascading covers the rest.
        #[arg(long, default_value_t = 2)]
        trained_factor: u32,
        /// Patch-grid stride of the auto-encoder stack's full-image pass.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Run the quality-metric experiment and write a CSV table.
    Quality {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output CSV path; "-" is stdout.
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Run the recognition (EER) experiment and write a CSV table.
    Verify {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output CSV path; "-" is stdout.
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Finite-difference gradient checks of both model families.
    Gradcheck {
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
        /// Parameters sampled per model.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest accepted relative error.
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
}

fn write_report(report: &ExperimentReport, out: &Path) -> Result<()> {
    if out == Path::new("-") {
        report.write_csv(std::io::stdout().lock())?;
    } else {
        report.write_csv(std::fs::File::create(out)?)?;
        eprintln!("wrote {} rows to {}", report.rows().len(), out.display());
    }
    Ok(())
}

fn random_image(width: usize, height: usize, rng: &mut ChaCha8Rng) -> Result<Image> {
    Ok(Image::from_vec(
        width,
        height,
        (0..width * height).map(|_| rng.random()).collect(),
    )?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            out,
            eyes,
            images_per_eye,
            width,
            height,
            seed,
        } => {
            let cfg = SynthConfig {
                eyes,
                images_per_eye,
                width,
                height,
                seed,
            };
            let n = generate_corpus(&out, &cfg)?;
            println!("wrote {} annotated images under {}", n, out.display());
        }
        Command::Train {
            corpus,
            method,
            out,
            config,
        } => {
            if !method.is_learned() {
                bail!("{} needs no training", method);
            }
            let cfg = config.load()?;
            let corpus = corpus.ingest(&cfg)?;
            let model = prepare_model(&corpus, method, &cfg)?
                .expect("learned methods always produce a model");
            model.save(&out)?;
            println!(
                "trained {} at factor {}; weights in {}",
                method,
                model.trained_factor(),
                out.display()
            );
        }
        Command::Sr {
            input,
            output,
            factor,
            method,
            weights,
            trained_factor,
            stride,
        } => {
            if ![2, 4, 8, 16].contains(&factor) {
                bail!("factor must be 2, 4, 8, or 16");
            }
            if method.is_learned() && weights.is_none() {
                bail!("learned methods need --weights");
            }
            let img = load_grayscale(&input)?;
            let sr = if method.is_learned() {
                let path = weights.expect("checked above");
                let mut model = load_model(&path, trained_factor)?;
                if let (TrainedModel::Sae(_, s), Some(stride)) = (&mut model, stride) {
                    *s = stride;
                }
                model.super_resolve(&img, factor)?
            } else {
                let kernel = match method {
                    Method::Bilinear => ResampleKernel::Bilinear,
                    _ => ResampleKernel::Bicubic,
                };
                let f = factor as usize;
                resize(&img, img.width() * f, img.height() * f, kernel)?
            };
            save_grayscale(&sr, &output)?;
            println!(
                "{} ({}x{}) -> {} ({}x{})",
                input.display(),
                img.width(),
                img.height(),
                output.display(),
                sr.width(),
                sr.height()
            );
        }
        Command::Quality {
            corpus,
            config,
            out,
        } => {
            let cfg = config.load()?;
            let corpus = corpus.ingest(&cfg)?;
            let report = run_quality_experiment(&corpus, &cfg)?;
            write_report(&report, &out)?;
        }
        Command::Verify {
            corpus,
            config,
            out,
        } => {
            let cfg = config.load()?;
            let corpus = corpus.ingest(&cfg)?;
            let report = run_recognition_experiment(&corpus, &cfg)?;
            write_report(&report, &out)?;
        }
        Command::Gradcheck {
            epsilon,
            samples,
            seed,
            tolerance,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);

            // Hidden biases at 1.0 keep preactivations away from the ReLU
            // kink, which centered differences would otherwise straddle.
            let mut cnn = SrcnnModel::build_with_init(2, rng.random(), 0.01)?;
            cnn.layer1.bias.fill(1.0);
            cnn.layer2.bias.fill(1.0);
            let input = random_image(33, 33, &mut rng)?;
            let target = random_image(21, 21, &mut rng)?;
            let report = srcnn_grad_check(&cnn, &input, &target, epsilon, samples, seed)?;
            println!(
                "srcnn: max rel err {:.3e} over {} sampled parameters",
                report.max_rel_err, report.checked
            );
            let mut worst = report.max_rel_err;

            let aes: Vec<Autoencoder<f32>> = (0..4)
                .map(|i| {
                    Autoencoder::random(SAE_DIMS[i], SAE_DIMS[i + 1], Activation::Sigmoid, seed + i as u64)
                })
                .collect::<irissr::Result<_>>()?;
            let stack = SaeModel::from_autoencoders(&aes, seed)?;
            let input: Vec<f32> = (0..SAE_DIMS[0]).map(|_| rng.random()).collect();
            let target: Vec<f32> = (0..SAE_DIMS[5]).map(|_| rng.random()).collect();
            let report = sae_grad_check(&stack, &input, &target, epsilon, samples, seed)?;
            println!(
                "sae:   max rel err {:.3e} over {} sampled parameters",
                report.max_rel_err, report.checked
            );
            worst = worst.max(report.max_rel_err);

            if worst > tolerance {
                bail!("gradient check failed: {:.3e} > {:.3e}", worst, tolerance);
            }
            println!("gradient checks passed (tolerance {:.1e})", tolerance);
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {:#}", e);
        std::process::exit(1);
    }
}
