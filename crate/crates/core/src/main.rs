//! Command-line front end: synthetic benchmark generation, model ranking,
//! the full evaluation experiment, and the ablation sweeps.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use icms::data::Dataset;
use icms::dgp::{
    choose_perturb_set, gen_obs_data, gen_treat_data, random_dag, split_rows, PerturbMode,
};
use icms::error::{Error, Result};
use icms::graph::CausalDag;
use icms::harness::{
    run_experiment, sweep_lambda, sweep_misspec, sweep_subgraph, ExperimentConfig, SweepReport,
};
use icms::risks::factual_mse;
use icms::selection::{rank_models, BaseRisk, RiskSpec, UdaWeighting};
use icms::zoo::{build_zoo, fit_candidate};

#[derive(Parser)]
#[command(name = "icms", version, about = "ITE model selection for domain adaptation")]
struct Cli {
    /// Experiment configuration JSON (defaults apply when omitted)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseArg {
    Mse,
    Iptw,
}

#[derive(Clone, Copy, ValueEnum)]
enum UdaArg {
    None,
    Iwcv,
    Dev,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Reverse,
    Add,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random weighted benchmark DAG (writes dag.json)
    GenDag {
        /// Node count (defaults to the configured dgp.n_nodes)
        #[arg(long)]
        n: Option<usize>,
        /// Edge-count cap (defaults to the configured dgp.max_edges or n(n-1)/2)
        #[arg(long)]
        max_edges: Option<usize>,
    },
    /// Generate source and shifted target datasets from a graph
    GenData {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Fit the candidate zoo on a training set and write a summary
    FitZoo {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        train: PathBuf,
    },
    /// Rank candidate models on validation + target data
    Rank {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        /// Target covariates (treatment/outcome columns, if present, are ignored)
        #[arg(long)]
        target: PathBuf,
        /// Weight of the causal risk (defaults to the configured policy)
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, value_enum, default_value = "mse")]
        base: BaseArg,
        #[arg(long, value_enum, default_value = "none")]
        uda: UdaArg,
    },
    /// Run the full benchmark experiment
    Evaluate,
    /// Lambda sensitivity sweep
    SweepLambda {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.25, 0.5, 1.0, 2.0, 4.0])]
        lambdas: Vec<f64>,
    },
    /// Graph misspecification sweep
    SweepMisspec {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.1, 0.25, 0.5, 1.0])]
        fractions: Vec<f64>,
        #[arg(long, value_enum, default_value = "add")]
        mode: ModeArg,
    },
    /// Partial outcome-parent knowledge sweep
    SweepSubgraph {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 0.75, 1.0])]
        kept: Vec<f64>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
        cfg.dgp.seed = seed;
    }
    cfg.out_dir = Some(cli.out.clone());
    cfg.validate()?;
    Ok(cfg)
}

fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

fn load_dataset(csv: &Path) -> Result<Dataset> {
    Dataset::read_csv(csv, &meta_path(csv))
}

fn load_graph(path: &Path) -> Result<CausalDag> {
    CausalDag::from_json_str(&std::fs::read_to_string(path)?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_sweep(out: &Path, name: &str, report: &SweepReport) -> Result<()> {
    write_json(&out.join(format!("{name}_sweep.json")), report)?;
    let csv = out.join(format!("{name}_curve.csv"));
    report.write_curve_csv(&csv)?;
    println!("wrote {}", csv.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = cli.out.clone();
    std::fs::create_dir_all(&out)?;
    match &cli.command {
        Command::GenDag { n, max_edges } => {
            let n = n.unwrap_or(cfg.dgp.n_nodes);
            let cap = n.saturating_mul(n.saturating_sub(1)) / 2;
            let max_edges = max_edges.or(cfg.dgp.max_edges).unwrap_or(cap);
            let dag = random_dag(n, max_edges, cfg.dgp.weight_range, cfg.dgp.seed)?;
            std::fs::write(out.join("dag.json"), dag.to_json_string()? + "\n")?;
            println!("wrote {}", out.join("dag.json").display());
        }
        Command::GenData { graph } => {
            let dag = load_graph(graph)?;
            let source = gen_obs_data(&dag, &cfg.dgp)?;
            source.write_csv(&out.join("source.csv"), &out.join("source.meta.json"))?;
            let (train, val) = split_rows(&source, 0.8, cfg.dgp.seed);
            train.write_csv(&out.join("train.csv"), &out.join("train.meta.json"))?;
            val.write_csv(&out.join("val.csv"), &out.join("val.meta.json"))?;
            let perturb: BTreeSet<_> = choose_perturb_set(&dag, 3, cfg.dgp.seed)?;
            let target = gen_treat_data(&dag, &cfg.dgp, &perturb)?;
            target
                .data
                .write_csv(&out.join("target.csv"), &out.join("target.meta.json"))?;
            target.write_truth_csv(&out.join("target_truth.csv"))?;
            for name in ["train.csv", "val.csv", "target.csv", "target_truth.csv"] {
                println!("wrote {}", out.join(name).display());
            }
        }
        Command::FitZoo { graph, train } => {
            let dag = load_graph(graph)?;
            let train = load_dataset(train)?;
            let specs = build_zoo(&cfg.zoo, &dag)?;
            #[derive(serde::Serialize)]
            struct ZooEntry {
                model_id: String,
                family: String,
                hyperparams: std::collections::BTreeMap<String, f64>,
                train_factual_mse: f64,
            }
            let mut entries = Vec::new();
            for (j, spec) in specs.iter().enumerate() {
                let model = fit_candidate(spec, &train, icms::dgp::subseed(cfg.master_seed, &[j as u64]))?;
                entries.push(ZooEntry {
                    model_id: model.model_id().to_string(),
                    family: model.family_name().to_string(),
                    hyperparams: model.hyperparams().clone(),
                    train_factual_mse: factual_mse(&model, &train)?.mean(),
                });
            }
            write_json(&out.join("zoo.json"), &entries)?;
        }
        Command::Rank { graph, train, val, target, lambda, base, uda } => {
            let dag = load_graph(graph)?;
            let train = load_dataset(train)?;
            let val = load_dataset(val)?;
            let target_x = load_dataset(target)?.covariates();
            let spec = RiskSpec {
                base: match base {
                    BaseArg::Mse => BaseRisk::Mse,
                    BaseArg::Iptw => BaseRisk::Iptw,
                },
                uda: match uda {
                    UdaArg::None => UdaWeighting::None,
                    UdaArg::Iwcv => UdaWeighting::Iwcv,
                    UdaArg::Dev => UdaWeighting::Dev,
                },
            };
            let specs = build_zoo(&cfg.zoo, &dag)?;
            let models = specs
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    fit_candidate(s, &train, icms::dgp::subseed(cfg.master_seed, &[j as u64]))
                })
                .collect::<Result<Vec<_>>>()?;
            let lambda = match lambda {
                Some(v) => *v,
                None => cfg.lambda.value(&dag)?,
            };
            let reports = rank_models(&models, &val, &target_x, &dag, lambda, spec)?;
            write_json(&out.join("score_reports.json"), &reports)?;
        }
        Command::Evaluate => {
            let report = run_experiment(&cfg)?;
            for m in &report.methods {
                println!(
                    "{:<18} pehe10 {:.4} ({:.4})  inversions {:.4} ({:.4})",
                    m.method, m.mean_pehe10, m.se_pehe10, m.mean_inversion, m.se_inversion
                );
            }
            println!("wrote {}", out.join("experiment_report.json").display());
        }
        Command::SweepLambda { lambdas } => {
            let report = sweep_lambda(&cfg, lambdas)?;
            write_sweep(&out, "lambda", &report)?;
        }
        Command::SweepMisspec { fractions, mode } => {
            let mode = match mode {
                ModeArg::Reverse => PerturbMode::Reverse,
                ModeArg::Add => PerturbMode::Add,
            };
            let report = sweep_misspec(&cfg, fractions, mode)?;
            write_sweep(&out, "misspec", &report)?;
        }
        Command::SweepSubgraph { kept } => {
            let report = sweep_subgraph(&cfg, kept)?;
            write_sweep(&out, "subgraph", &report)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
