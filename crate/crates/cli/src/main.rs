//! `cgp`: generate synthetic architecture datasets, train the transferable
//! predictor, evaluate rank correlation, and run evolutionary search.

mod config;
mod stages;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use cgpredict::cg::ComputationGraph;
use cgpredict::lowering::{build_network, CellSpec, Dialect, MacroConfig};
use cgpredict::oracle::{generate_dataset, save_manifest, Oracle, OracleConfig};
use cgpredict::spectral::{signature, DistanceCache};
use cgpredict::train::PreparedDataset;

use config::RunConfig;
use stages::Workspace;

#[derive(Parser)]
#[command(name = "cgp", version, about = "Computation-graph performance prediction pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate labeled architecture datasets (pipeline mode with --config, or a
    /// single manifest with --dialect/--count)
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dialect: Option<Dialect>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 7)]
        oracle_seed: u64,
        #[arg(long)]
        force: bool,
    },
    /// Lower a symbolic cell spec into a computation-graph JSON file
    Lower {
        #[arg(long, conflicts_with = "spec_file")]
        spec: Option<String>,
        #[arg(long)]
        spec_file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a graph's spectral signature, or dump a dataset's distance cache
    Spectral {
        #[arg(long, conflicts_with = "dataset")]
        cg: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Contrastive pretraining of the encoder on the generated pools
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Train the prediction head on the labeled source families
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Fine-tune the head on the small labeled target split
    Finetune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Rank correlation: of a prediction/truth pairs CSV, or of the pipeline's
    /// fine-tuned predictor on the held-out evaluation split
    #[command(name = "eval-srcc")]
    EvalSrcc {
        #[arg(long, conflicts_with = "config")]
        pairs: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Run an evolutionary search preset
    Search {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dialect: Option<Dialect>,
        #[arg(long, value_parser = ["random", "cl"])]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Full pipeline from one config and seed: gen, pretrain, train, finetune,
    /// evaluate, search
    Repro {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_file(path)?;
    if let Some(seed) = seed {
        cfg = cfg.with_seed(seed);
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen {
            config,
            out,
            dialect,
            count,
            seed,
            oracle_seed,
            force,
        } => match (config, dialect) {
            (Some(config), None) => {
                let cfg = load_config(&config, seed)?;
                Workspace::new(out, cfg, force)?.gen()?;
            }
            (None, Some(dialect)) => {
                let count = count.context("--count is required with --dialect")?;
                let oracle = Oracle::new(OracleConfig::with_seed(oracle_seed));
                let records = generate_dataset(
                    dialect,
                    count,
                    seed.unwrap_or(0),
                    &oracle,
                    &MacroConfig::default(),
                )?;
                save_manifest(&out, oracle_seed, dialect, &records)?;
                println!("wrote {} records to {}", records.len(), out.display());
            }
            _ => bail!("gen needs either --config or --dialect/--count"),
        },
        Command::Lower { spec, spec_file, out } => {
            let text = match (spec, spec_file) {
                (Some(s), None) => s,
                (None, Some(path)) => std::fs::read_to_string(path)?.trim().to_string(),
                _ => bail!("lower needs exactly one of --spec or --spec-file"),
            };
            let cell: CellSpec = text.parse()?;
            let graph = build_network(&cell, &MacroConfig::default())?;
            let json = graph.to_json()?;
            match out {
                Some(path) => {
                    std::fs::write(&path, json)?;
                    println!(
                        "lowered {} -> {} nodes, {} edges -> {}",
                        cell.dialect(),
                        graph.node_count(),
                        graph.edge_count(),
                        path.display()
                    );
                }
                None => println!("{json}"),
            }
        }
        Command::Spectral { cg, dataset, out } => match (cg, dataset) {
            (Some(path), None) => {
                let graph = ComputationGraph::from_json(&std::fs::read_to_string(&path)?)?;
                let sig = signature(&graph)?;
                let values: Vec<String> = sig.values.iter().map(|v| v.to_string()).collect();
                println!("nodes: {}", sig.node_count);
                println!("signature: {}", values.join(","));
            }
            (None, Some(path)) => {
                let out = out.context("--out is required with --dataset")?;
                let (oracle_seed, dialect, records) =
                    cgpredict::oracle::load_manifest(&path, &MacroConfig::default())?;
                let prepared = PreparedDataset::new(dialect, records, oracle_seed)?;
                let cache = DistanceCache::build(&prepared.signatures, prepared.digest);
                cache.save(&out)?;
                println!(
                    "wrote {}x{} distance cache (digest {:016x}) to {}",
                    cache.n(),
                    cache.n(),
                    cache.digest(),
                    out.display()
                );
            }
            _ => bail!("spectral needs exactly one of --cg or --dataset"),
        },
        Command::Pretrain { config, out, seed, force } => {
            let cfg = load_config(&config, seed)?;
            Workspace::new(out, cfg, force)?.pretrain()?;
        }
        Command::Train { config, out, seed, force } => {
            let cfg = load_config(&config, seed)?;
            Workspace::new(out, cfg, force)?.train()?;
        }
        Command::Finetune { config, out, seed, force } => {
            let cfg = load_config(&config, seed)?;
            Workspace::new(out, cfg, force)?.finetune()?;
        }
        Command::EvalSrcc { pairs, config, out, seed, force } => match (pairs, config) {
            (Some(path), None) => {
                let rho = stages::eval_pairs_file(&path)?;
                println!("srcc = {rho:.6}");
            }
            (None, Some(config)) => {
                let cfg = load_config(&config, seed)?;
                let out = out.context("--out directory is required with --config")?;
                Workspace::new(out, cfg, force)?.eval()?;
            }
            _ => bail!("eval-srcc needs exactly one of --pairs or --config"),
        },
        Command::Search { config, out, dialect, preset, seed, force } => {
            let mut cfg = load_config(&config, seed)?;
            if let Some(d) = dialect {
                cfg.search_dialect = d;
            }
            if let Some(p) = preset {
                cfg.search_preset = p;
            }
            if let Some(s) = seed {
                cfg.search_seed = s;
            }
            Workspace::new(out, cfg, force)?.search()?;
        }
        Command::Repro { config, out, seed, force } => {
            let cfg = load_config(&config, seed)?;
            Workspace::new(out, cfg, force)?.repro()?;
        }
    }
    Ok(())
}
