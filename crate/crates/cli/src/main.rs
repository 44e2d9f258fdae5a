use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use coalesce::align::CategoryConfig;
use coalesce::meshkit::obj::write_text;
use coalesce::pipeline::assemble::{AssembleRequest, Models, PartSpec, RunManifest};
use coalesce::pipeline::evaluate::evaluate_suite;
use coalesce::pipeline::perturb::{perturb_shape, PerturbConfig, Perturbation};
use coalesce::pipeline::{generate_synthetic, preprocess_dataset, run_assemble, LabeledShape, PipelineConfig};
use coalesce::pipeline::{run_pretrain, run_train_align, run_train_joint};

#[derive(Parser)]
#[command(name = "coalesce", version, about = "Assemble shapes from labeled mesh parts")]
struct Cli {
    /// `key = value` config file; `COALESCE_<KEY>` variables override it.
    #[arg(long, global = true, env = "COALESCE_CONFIG")]
    config: Option<PathBuf>,
    /// Log level (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic labeled-part dataset.
    GenData {
        #[arg(long, default_value = "chairlike")]
        category: String,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Erode, sample and voxelize a dataset for training.
    Preprocess {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the part alignment network.
    TrainAlign {
        #[arg(long)]
        prep: PathBuf,
        /// Defaults to `align_checkpoint` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pretrain the joint encoders as point-cloud autoencoders.
    PretrainEnc {
        #[arg(long)]
        prep: PathBuf,
        /// Defaults to `pretrain_checkpoint` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the joint decoder, then decoder and encoders together.
    TrainJoint {
        #[arg(long)]
        prep: PathBuf,
        /// Defaults to `pretrain_checkpoint` from the config.
        #[arg(long)]
        pretrained: Option<PathBuf>,
        /// Defaults to `joint_checkpoint` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble parts into one mesh and write OBJ plus a JSON manifest.
    Assemble {
        /// Input part as `<shape_dir>:<label>`; repeat once per part.
        #[arg(long = "part")]
        parts: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Skip test-time optimization.
        #[arg(long)]
        no_refine: bool,
        #[arg(long)]
        refine_iters: Option<usize>,
        /// Replay the run recorded in this manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Where to write this run's manifest (default: output with `.json`).
        #[arg(long)]
        manifest_out: Option<PathBuf>,
    },
    /// Self-assemble every shape of a dataset and report chamfer per stage.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "none")]
        perturb: String,
        #[arg(long)]
        limit: Option<usize>,
        /// JSON report; a text table is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a sine warp or global similarity to one shape.
    Perturb {
        #[arg(long)]
        shape: PathBuf,
        #[arg(long, default_value = "sine")]
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn or_config(p: Option<PathBuf>, default: &str) -> PathBuf {
    p.unwrap_or_else(|| PathBuf::from(default))
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

fn run(cli: Cli) -> Result<()> {
    let load_cfg = || PipelineConfig::load(cli.config.as_deref()).context("loading config");
    match cli.cmd {
        Cmd::GenData {
            category,
            count,
            seed,
            out,
        } => {
            let cat = CategoryConfig::by_name(&category)?;
            let m = generate_synthetic(&cat, count, seed, &out)?;
            info!("wrote {} {} shapes to {}", m.count, m.category, out.display());
        }
        Cmd::Preprocess { data, out } => {
            let cfg = load_cfg()?;
            let all = preprocess_dataset(&data, &out, &cfg)?;
            info!("prepared {} shapes into {}", all.len(), out.display());
        }
        Cmd::TrainAlign { prep, out } => {
            let cfg = load_cfg()?;
            let out = or_config(out, &cfg.align_checkpoint);
            print_json(&run_train_align(&cfg, &prep, &out)?);
        }
        Cmd::PretrainEnc { prep, out } => {
            let cfg = load_cfg()?;
            let out = or_config(out, &cfg.pretrain_checkpoint);
            print_json(&run_pretrain(&cfg, &prep, &out)?);
        }
        Cmd::TrainJoint { prep, pretrained, out } => {
            let cfg = load_cfg()?;
            let pretrained = or_config(pretrained, &cfg.pretrain_checkpoint);
            let out = or_config(out, &cfg.joint_checkpoint);
            print_json(&run_train_joint(&cfg, &prep, &pretrained, &out)?);
        }
        Cmd::Assemble {
            parts,
            out,
            no_refine,
            refine_iters,
            manifest,
            manifest_out,
        } => {
            let mut req = match manifest {
                Some(m) => {
                    if !parts.is_empty() {
                        bail!("--part cannot be combined with --manifest");
                    }
                    AssembleRequest::replay(&RunManifest::load(&m)?, out)?
                }
                None => {
                    let mut cfg = load_cfg()?;
                    if let Some(n) = refine_iters {
                        cfg.refine_iters = n;
                    }
                    AssembleRequest {
                        config: cfg,
                        parts: parts.iter().map(|s| s.parse()).collect::<Result<Vec<PartSpec>, _>>()?,
                        refine: !no_refine,
                        output: out,
                        manifest: None,
                    }
                }
            };
            req.manifest = manifest_out;
            let m = run_assemble(&req)?;
            println!("{} {}", m.output.display(), m.output_sha256);
        }
        Cmd::Evaluate {
            data,
            perturb,
            limit,
            out,
        } => {
            let cfg = load_cfg()?;
            let kind: Perturbation = perturb.parse()?;
            let models = Models::from_config(&cfg)?;
            let report = evaluate_suite(&cfg, &models, &data, kind, limit)?;
            report.save(&out)?;
            print!("{}", report.table());
        }
        Cmd::Perturb { shape, kind, seed, out } => {
            let cfg = load_cfg()?;
            let kind: Perturbation = kind.parse()?;
            let src = LabeledShape::load(&shape)?;
            let (warped, record) = perturb_shape(&src, kind, &PerturbConfig::from_pipeline(&cfg), seed);
            warped.save(&out)?;
            write_text(
                &out.join("perturbation.json"),
                &(serde_json::to_string_pretty(&record)? + "\n"),
            )?;
            print_json(&record);
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp_secs()
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
