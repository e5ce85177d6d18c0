use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use idopt::case::{run_case, write_json, CaseConfig, ResolvedInputs};
use idopt::dataset::{load_csv, titanic_columns};
use idopt::optimizer::Trajectory;
use idopt::pipeline::{fit_density, train_model, ModelKind, DEFAULT_BANDWIDTH, DEFAULT_SPLIT};

#[derive(Parser)]
#[command(name = "idopt", version, about = "Iterative domain optimization over trained black boxes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a classifier on the Titanic table and save it with its schema.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "mlp")]
        model: ModelKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fraction of rows used for training.
        #[arg(long, default_value_t = DEFAULT_SPLIT)]
        split: f64,
    },
    /// Run one case config and write its trajectory and report.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Also dump the per-iteration surrogate coefficients.
        #[arg(long)]
        surrogates: bool,
    },
    /// Fit a Gaussian KDE on the encoded Titanic table.
    Density {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BANDWIDTH)]
        bandwidth: f64,
        #[arg(long)]
        out: PathBuf,
        /// Must match the seed the model was trained with so both share one encoding.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SPLIT)]
        split: f64,
    },
    /// Summarize a trajectory CSV.
    Report { trajectory: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for bad input (config, schema, unreadable paths), 1 for runtime failures.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<idopt::Error>() {
        Some(err) if err.is_config() || matches!(err, idopt::Error::Io(_)) => 2,
        Some(_) => 1,
        None => 2,
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Train { data, model, out, seed, split } => train(&data, model, &out, seed, split),
        Command::Optimize { config, out, surrogates } => optimize(&config, &out, surrogates),
        Command::Density { data, bandwidth, out, seed, split } => density(&data, bandwidth, &out, seed, split),
        Command::Report { trajectory } => report(&trajectory),
    }
}

fn train(data: &Path, kind: ModelKind, out: &Path, seed: u64, split: f64) -> anyhow::Result<()> {
    let table = load_csv(data, &titanic_columns(), "survived")?;
    let file = train_model(&table, kind, split, seed)?;
    if let Some(m) = &file.metrics {
        println!("test rows {}  auc {:.4}  accuracy {:.4}", m.test_rows, m.auc, m.accuracy);
    }
    write_json(out, &file)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn density(data: &Path, bandwidth: f64, out: &Path, seed: u64, split: f64) -> anyhow::Result<()> {
    let table = load_csv(data, &titanic_columns(), "survived")?;
    let file = fit_density(&table, bandwidth, split, seed)?;
    write_json(out, &file)?;
    println!(
        "{} support rows, {} dims, bandwidth {}; wrote {}",
        file.density.support.len(),
        file.schema.dim(),
        bandwidth,
        out.display()
    );
    Ok(())
}

fn optimize(config: &Path, out: &Path, surrogates: bool) -> anyhow::Result<()> {
    let cfg = CaseConfig::load(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let inputs = ResolvedInputs::load(&cfg, base)?;
    let outcome = run_case(&cfg, &inputs)?;

    std::fs::create_dir_all(out)
        .map_err(idopt::Error::Io)
        .with_context(|| format!("creating {}", out.display()))?;
    let csv_path = out.join("trajectory.csv");
    let writer = BufWriter::new(
        File::create(&csv_path)
            .map_err(idopt::Error::Io)
            .with_context(|| format!("creating {}", csv_path.display()))?,
    );
    outcome.trajectory.write_csv(writer)?;
    write_json(&out.join("report.json"), &outcome.report)?;
    if surrogates {
        let coefs: Vec<Vec<f64>> = outcome
            .trajectory
            .records
            .iter()
            .filter_map(|r| r.surrogate.as_ref().map(|s| s.coefficients()))
            .collect();
        write_json(&out.join("surrogates.json"), &coefs)?;
    }

    let r = &outcome.report;
    println!("case {} ({} iterations)", r.case, r.iterations);
    println!(
        "mean over box: {:.4} (start {:.4}, stderr {:.4})",
        r.final_mean, r.initial_mean, r.final_mean_stderr
    );
    print!("{}", r.domain);
    println!("wrote {}", out.display());
    Ok(())
}

fn report(path: &Path) -> anyhow::Result<()> {
    let file = File::open(path)
        .map_err(idopt::Error::Io)
        .with_context(|| format!("opening {}", path.display()))?;
    let traj = Trajectory::read_csv(file).with_context(|| format!("reading {}", path.display()))?;
    let first = &traj.records[0];
    let last = &traj.records[traj.len() - 1];
    let best_obj = traj.records.iter().map(|r| r.objective).fold(f64::NEG_INFINITY, f64::max);
    let best = traj
        .records
        .iter()
        .max_by(|a, b| a.mean.total_cmp(&b.mean))
        .expect("non-empty trajectory");
    println!("iterations      {}", traj.len());
    println!("objective       first {:.6}  last {:.6}  best {:.6}", first.objective, last.objective, best_obj);
    println!("sample mean     first {:.6}  last {:.6}", first.mean, last.mean);
    println!("best mean       {:.6} at iteration {}", best.mean, best.iter);
    let s = &last.half_lengths;
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "final widths    min {:.4}  mean {:.4}  max {:.4}",
        lo,
        s.iter().sum::<f64>() / s.len() as f64,
        hi
    );
    Ok(())
}
