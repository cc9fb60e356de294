use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seqpolicy::core::{read_dataset_csv, write_dataset_csv, Dataset, PolicySpec};
use seqpolicy::dtr_direct::{estimate_value_iptw, estimate_value_mc};
use seqpolicy::harness::{
    config_hash_hex, fit_configured_policy, load_config, run_experiment, ExperimentConfig,
    Scenario,
};
use seqpolicy::numerics::{stream_id_for, RngStream};
use seqpolicy::simulators::{simulate_mrt_policy, simulate_smart, write_regret_csv};

#[derive(Parser)]
#[command(
    name = "seqpolicy",
    version,
    about = "Sequential-decision policy optimization: trial simulators, offline regime estimators, online bandit agents, and a reproducible experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (defaults to the config's output_dir, then ".").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress progress lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Estimator {
    Mc,
    Iptw,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from the configured environment.
    Simulate(CommonArgs),
    /// Fit the configured offline methods on a dataset CSV and write the
    /// fitted policies.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset CSV produced by `simulate`.
        #[arg(long)]
        data: PathBuf,
    },
    /// Estimate the value of a fitted policy on a dataset.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: PathBuf,
        /// Policy JSON produced by `fit`.
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, value_enum, default_value = "iptw")]
        estimator: Estimator,
    },
    /// Run the configured online agents through the trial loop.
    BanditRun(CommonArgs),
    /// The composite: per method × replication, simulate (and fit, for
    /// offline methods), compute metrics, and write the manifest.
    Experiment(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Simulate(common) => {
            let (cfg, out) = prepare(&common)?;
            simulate_cmd(&cfg, &out, common.quiet)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit { common, data } => {
            let (cfg, out) = prepare(&common)?;
            fit_cmd(&cfg, &data, &out, common.quiet)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            common,
            data,
            policy,
            estimator,
        } => {
            let (cfg, out) = prepare(&common)?;
            evaluate_cmd(&cfg, &data, &policy, estimator, &out, common.quiet)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::BanditRun(common) => {
            let (cfg, out) = prepare(&common)?;
            if cfg.scenario != Scenario::Mrt {
                return Err("bandit-run applies to the mrt scenario".into());
            }
            experiment_cmd(&cfg, &out, common.quiet)
        }
        Command::Experiment(common) => {
            let (cfg, out) = prepare(&common)?;
            experiment_cmd(&cfg, &out, common.quiet)
        }
    }
}

fn prepare(common: &CommonArgs) -> Result<(ExperimentConfig, PathBuf), Box<dyn std::error::Error>> {
    let mut cfg = load_config(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn simulate_cmd(
    cfg: &ExperimentConfig,
    out: &Path,
    quiet: bool,
) -> Result<(), Box<dyn std::error::Error>> {
    let stream = RngStream::new(cfg.master_seed, stream_id_for(0, "simulate"));
    match cfg.scenario {
        Scenario::Smart => {
            let env = cfg.env.smart.as_ref().expect("validated");
            let sim_cfg = env.to_sim_config(&mut Vec::new()).expect("validated");
            let (dataset, truth) = simulate_smart(&sim_cfg, env.n, &stream)?;
            let path = out.join("dataset.csv");
            write_dataset_csv(&dataset, fs::File::create(&path)?)?;
            fs::write(
                out.join("truth.json"),
                serde_json::to_string_pretty(&truth)? + "\n",
            )?;
            if !quiet {
                println!(
                    "wrote {} ({} trajectories) and truth.json",
                    path.display(),
                    dataset.n_units()
                );
            }
        }
        Scenario::Mrt => {
            let env = cfg.env.mrt.as_ref().expect("validated");
            let sim_cfg = env.to_sim_config(&mut Vec::new());
            let policy = PolicySpec::uniform(sim_cfg.n_arms);
            let (dataset, trace) = simulate_mrt_policy(&sim_cfg, &policy, env.n_users, &stream)?;
            let path = out.join("dataset.csv");
            write_dataset_csv(&dataset, fs::File::create(&path)?)?;
            write_regret_csv(&trace, fs::File::create(out.join("regret_trace.csv"))?)?;
            if !quiet {
                println!(
                    "wrote {} ({} users × {} days) and regret_trace.csv",
                    path.display(),
                    dataset.n_units(),
                    env.horizon
                );
            }
        }
    }
    Ok(())
}

fn load_dataset(
    cfg: &ExperimentConfig,
    data: &Path,
) -> Result<Dataset, Box<dyn std::error::Error>> {
    let schema = match cfg.scenario {
        Scenario::Smart => cfg
            .env
            .smart
            .as_ref()
            .expect("validated")
            .to_sim_config(&mut Vec::new())
            .expect("validated")
            .schema(),
        Scenario::Mrt => cfg
            .env
            .mrt
            .as_ref()
            .expect("validated")
            .to_sim_config(&mut Vec::new())
            .schema(),
    };
    Ok(read_dataset_csv(fs::File::open(data)?, &schema)?)
}

fn fit_cmd(
    cfg: &ExperimentConfig,
    data: &Path,
    out: &Path,
    quiet: bool,
) -> Result<(), Box<dyn std::error::Error>> {
    if cfg.scenario != Scenario::Smart {
        return Err("fit applies to the smart scenario".into());
    }
    let dataset = load_dataset(cfg, data)?;
    let mut fitted = 0;
    for method in &cfg.methods {
        match fit_configured_policy(method, &dataset) {
            Ok(policy) => {
                let path = out.join(format!("policy_{}.json", method.id));
                fs::write(&path, serde_json::to_string_pretty(&policy)? + "\n")?;
                fitted += 1;
                if !quiet {
                    println!("fit {}: wrote {}", method.id, path.display());
                }
            }
            Err(e) => {
                if !quiet {
                    println!("skip {}: {e}", method.id);
                }
            }
        }
    }
    if fitted == 0 {
        return Err("no configured method produced a fitted policy".into());
    }
    Ok(())
}

fn evaluate_cmd(
    cfg: &ExperimentConfig,
    data: &Path,
    policy_path: &Path,
    estimator: Estimator,
    out: &Path,
    quiet: bool,
) -> Result<(), Box<dyn std::error::Error>> {
    let dataset = load_dataset(cfg, data)?;
    let policy: PolicySpec = serde_json::from_str(&fs::read_to_string(policy_path)?)?;
    let (name, estimate) = match estimator {
        Estimator::Mc => ("mc", estimate_value_mc(&dataset, &policy)?),
        Estimator::Iptw => ("iptw", estimate_value_iptw(&dataset, &policy)?),
    };
    let record = serde_json::json!({
        "method": name,
        "point": estimate.point,
        "weight_min": estimate.weight_min,
        "weight_mean": estimate.weight_mean,
        "weight_max": estimate.weight_max,
        "n_effective": estimate.n_effective,
        "config_hash": config_hash_hex(cfg),
        "seed": cfg.master_seed,
    });
    let path = out.join(format!("evaluate_{name}.json"));
    fs::write(&path, serde_json::to_string_pretty(&record)? + "\n")?;
    if !quiet {
        println!(
            "{name} value estimate: {} → {}",
            estimate.point,
            path.display()
        );
    }
    Ok(())
}

fn experiment_cmd(
    cfg: &ExperimentConfig,
    out: &Path,
    quiet: bool,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let report = run_experiment(cfg, out)?;
    if !quiet {
        for s in &report.statuses {
            match &s.error {
                None => println!("ok   {} rep {}", s.method, s.replication),
                Some(e) => println!("FAIL {} rep {}: {e}", s.method, s.replication),
            }
        }
        println!("outputs in {}", report.out_dir.display());
    }
    Ok(if report.all_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
