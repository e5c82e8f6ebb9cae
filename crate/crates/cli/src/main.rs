//! `handshape` — classify hand silhouettes from segmented images.
//!
//! The pipeline runs as separate commands with file handoffs so every
//! intermediate artifact can be inspected and cached:
//!
//! ```text
//! handshape make-manifest --dir corpus/
//! handshape preprocess --manifest corpus/manifest.csv --output-dir out
//! handshape extract    --output-dir out --descriptor radon-local
//! handshape train      --output-dir out --seed 7
//! handshape predict    --output-dir out --top-k 2
//! handshape evaluate   --output-dir out --protocol random-cv --repetitions 30
//! ```
//!
//! `run-all` chains preprocess, extract, train, and evaluate.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ClassifierChoice, RunConfig};
use handshape_core::descriptor::DescriptorKind;
use handshape_core::eval::Protocol;

#[derive(Parser)]
#[command(name = "handshape", version, about = "Handshape classification pipeline")]
struct Cli {
    /// JSON config file; explicit flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed for every random draw
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores); results do not depend on this
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Directory for all produced artifacts
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Write the five preprocessing stage images per input
    #[arg(long, global = true)]
    debug_stages: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a corpus directory named `<class>_<subject>_<repetition>.<ext>`
    /// and write a manifest CSV
    MakeManifest {
        /// Corpus directory to scan
        #[arg(long)]
        dir: PathBuf,
        /// Output manifest path (default: `<dir>/manifest.csv`)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Treat file-name indices as 0-based instead of 1-based
        #[arg(long)]
        zero_based: bool,
    },
    /// Segment and canonicalize every manifest image
    Preprocess {
        /// Manifest CSV (`path,class,subject,repetition`)
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Compute descriptor sets from the canonical images
    Extract {
        /// radon-local, radon-global, or sift
        #[arg(long)]
        descriptor: Option<DescriptorKind>,
        /// Feed the binary mask instead of intensities to the Radon transform
        #[arg(long)]
        radon_on_mask: bool,
    },
    /// Train the classifier on an extracted descriptor file
    Train {
        /// Model output path (default: `<output-dir>/model.json`)
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        descriptor: Option<DescriptorKind>,
    },
    /// Rank classes for every sample of a descriptor file
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        /// How many top classes to report per sample
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Run an evaluation protocol over a descriptor file
    Evaluate {
        /// random-cv or inter-subject
        #[arg(long)]
        protocol: Option<Protocol>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        test_fraction: Option<f64>,
        /// probsom or knn (knn needs radon-global descriptors)
        #[arg(long)]
        classifier: Option<ClassifierChoice>,
        #[arg(long)]
        descriptor: Option<DescriptorKind>,
    },
    /// preprocess + extract + train + evaluate in sequence
    RunAll {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        descriptor: Option<DescriptorKind>,
        #[arg(long)]
        protocol: Option<Protocol>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
}

fn resolve_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = Some(jobs);
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.clone();
    }
    if cli.debug_stages {
        config.debug_stages = true;
    }

    match &cli.command {
        Command::Preprocess { manifest } => {
            if let Some(m) = manifest {
                config.manifest = Some(m.clone());
            }
        }
        Command::Extract {
            descriptor,
            radon_on_mask,
        } => {
            if let Some(d) = descriptor {
                config.descriptor = *d;
            }
            if *radon_on_mask {
                config.radon_on_mask = true;
            }
        }
        Command::Train { model, descriptor } => {
            if let Some(m) = model {
                config.model_file = Some(m.clone());
            }
            if let Some(d) = descriptor {
                config.descriptor = *d;
            }
        }
        Command::Predict { model, top_k } => {
            if let Some(m) = model {
                config.model_file = Some(m.clone());
            }
            if let Some(k) = top_k {
                config.top_k = *k;
            }
        }
        Command::Evaluate {
            protocol,
            repetitions,
            test_fraction,
            classifier,
            descriptor,
        } => {
            if let Some(p) = protocol {
                config.protocol = *p;
            }
            if let Some(n) = repetitions {
                config.repetitions = *n;
            }
            if let Some(f) = test_fraction {
                config.test_fraction = *f;
            }
            if let Some(c) = classifier {
                config.classifier = *c;
            }
            if let Some(d) = descriptor {
                config.descriptor = *d;
            }
        }
        Command::RunAll {
            manifest,
            descriptor,
            protocol,
            repetitions,
        } => {
            if let Some(m) = manifest {
                config.manifest = Some(m.clone());
            }
            if let Some(d) = descriptor {
                config.descriptor = *d;
            }
            if let Some(p) = protocol {
                config.protocol = *p;
            }
            if let Some(n) = repetitions {
                config.repetitions = *n;
            }
        }
        Command::MakeManifest { .. } => {}
    }
    Ok(config)
}

fn run(cli: &Cli) -> anyhow::Result<i32> {
    let config = resolve_config(cli)?;
    if let Some(jobs) = config.jobs {
        // ignore the error if a pool already exists (tests call run twice)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match &cli.command {
        Command::MakeManifest {
            dir,
            out,
            zero_based,
        } => commands::make_manifest(dir, out.clone(), *zero_based),
        Command::Preprocess { .. } => commands::preprocess(&config),
        Command::Extract { .. } => commands::extract(&config),
        Command::Train { .. } => commands::train(&config),
        Command::Predict { .. } => commands::predict(&config),
        Command::Evaluate { .. } => commands::evaluate(&config),
        Command::RunAll { .. } => commands::run_all(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
