use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use trajbench_core::eval::EvalReport;
use trajbench_core::experiment::{
    emit_report, hyperparam_search_dmp, hyperparam_search_tbgmr, run_experiment, tuning_sample,
    DatasetSource, ExperimentSpec, Hyperparams, ModelFamily, ScenarioKind,
};
use trajbench_core::traj::SynthConfig;

#[derive(Parser)]
#[command(name = "bench", version, about = "Trajectory encoder benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write the report.
    Run(RunArgs),
    /// Grid-search a hyperparameter per K.
    Tune(TuneArgs),
    /// Re-render figures and tables from an existing report.json.
    Report { dir: PathBuf },
}

#[derive(clap::Args)]
struct DataArgs {
    /// `synth` or a dataset directory with a manifest.
    #[arg(long, default_value = "synth")]
    dataset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (further capped by BENCH_WORKERS).
    #[arg(long)]
    workers: Option<usize>,
}

impl DataArgs {
    fn source(&self) -> DatasetSource {
        if self.dataset == "synth" {
            DatasetSource::Synth(SynthConfig {
                seed: self.seed,
                ..SynthConfig::default()
            })
        } else {
            DatasetSource::Path(PathBuf::from(&self.dataset))
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_scenario)]
    scenario: ScenarioKind,
    /// Comma-separated: dmp, tpgmm (tbGMR for recon), seds.
    #[arg(long, default_value = "dmp,tpgmm,seds")]
    models: String,
    /// `3..11` (inclusive), `3,6,11` or `6`.
    #[arg(long, default_value = "3..11")]
    k: String,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    /// Hyperparameters JSON, as written by `bench tune --hyper-out`.
    #[arg(long)]
    hyper: Option<PathBuf>,
    /// Largest K fitted with SEDS.
    #[arg(long)]
    seds_k_max: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TuneModel {
    Dmp,
    Tbgmr,
}

#[derive(clap::Args)]
struct TuneArgs {
    #[arg(long, value_enum)]
    model: TuneModel,
    #[arg(long, default_value = "3..11")]
    k: String,
    #[command(flatten)]
    data: DataArgs,
    /// Trajectories drawn for the search.
    #[arg(long, default_value_t = 250)]
    sample: usize,
    /// Write the search table here as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Merge the selected values into this hyperparameters JSON.
    #[arg(long)]
    hyper_out: Option<PathBuf>,
}

fn parse_scenario(s: &str) -> Result<ScenarioKind, String> {
    s.parse().map_err(|e: trajbench_core::Error| e.to_string())
}

fn parse_ks(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().context("bad K range start")?;
        let b: usize = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .context("bad K range end")?;
        if a > b {
            bail!("empty K range {s}");
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .with_context(|| format!("bad K value '{p}'"))
        })
        .collect()
}

fn parse_models(s: &str) -> Result<Vec<ModelFamily>> {
    s.split(',')
        .map(|m| Ok(m.parse::<ModelFamily>()?))
        .collect()
}

fn read_hyper(path: &Path) -> Result<Hyperparams> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(args: RunArgs) -> Result<()> {
    let mut spec = ExperimentSpec::new(
        args.scenario,
        parse_models(&args.models)?,
        parse_ks(&args.k)?,
    );
    spec.seed = args.data.seed;
    spec.workers = args.data.workers;
    if let Some(cap) = args.seds_k_max {
        spec.seds_k_max = cap;
    }
    if let Some(p) = &args.hyper {
        spec.hyper = read_hyper(p)?;
    }
    spec.validate()?;
    let set = args.data.source().load()?;
    let out = run_experiment(&spec, &set)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    emit_report(&out.report, &args.out)?;
    write_file(
        &args.out.join("spec.json"),
        &serde_json::to_string_pretty(&spec)?,
    )?;
    write_file(
        &args.out.join("timing.json"),
        &serde_json::to_string_pretty(&out.timing)?,
    )?;
    print_summary(&out.report);
    println!("wrote {}", args.out.display());
    Ok(())
}

fn print_summary(report: &EvalReport) {
    let mm = |v: Option<f64>| {
        v.map(|x| format!("{:8.2}", x * 1e3))
            .unwrap_or_else(|| "       -".into())
    };
    println!(
        "{:<16} {:<7} {:>3} {:>6} {:>8} {:>8} {:>8}",
        "scenario", "model", "K", "cases", "success", "d_mm", "de_mm"
    );
    for g in report.summaries() {
        println!(
            "{:<16} {:<7} {:>3} {:>6} {:>7.1}% {} {}",
            g.scenario.to_string(),
            g.model.to_string(),
            g.k,
            g.cases,
            100.0 * g.success_rate(),
            mm(g.d.map(|a| a.median)),
            mm(g.d_e.map(|a| a.median))
        );
    }
}

fn tune(args: TuneArgs) -> Result<()> {
    let ks = parse_ks(&args.k)?;
    let set = args.data.source().load()?;
    let sample = tuning_sample(&set, args.sample, args.data.seed);
    let mut hyper = match &args.hyper_out {
        Some(p) if p.exists() => read_hyper(p)?,
        _ => Hyperparams::default(),
    };
    let table = match args.model {
        TuneModel::Dmp => {
            let rows = hyperparam_search_dmp(&sample, &ks, args.data.workers)?;
            println!("{:>3} {:>6} {:>10}", "K", "kappa", "median_mm");
            for r in &rows {
                println!("{:>3} {:>6.1} {:>10.3}", r.k, r.kappa, r.median_d * 1e3);
                hyper.dmp_kappa.insert(r.k, r.kappa);
            }
            serde_json::to_string_pretty(&rows)?
        }
        TuneModel::Tbgmr => {
            let rows = hyperparam_search_tbgmr(&sample, &ks, args.data.workers)?;
            println!("{:>3} {:>8} {:>14}", "K", "epsilon", "rule");
            for r in &rows {
                println!("{:>3} {:>8.0e} {:>14?}", r.k, r.epsilon, r.rule);
                hyper.gmm_epsilon.insert(r.k, r.epsilon);
            }
            serde_json::to_string_pretty(&rows)?
        }
    };
    if let Some(p) = &args.out {
        write_file(p, &table)?;
    }
    if let Some(p) = &args.hyper_out {
        write_file(p, &serde_json::to_string_pretty(&hyper)?)?;
    }
    Ok(())
}

fn report(dir: &Path) -> Result<()> {
    let path = dir.join("report.json");
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let report = EvalReport::from_json(&text)?;
    if report.is_empty() {
        bail!("{} has no records", path.display());
    }
    emit_report(&report, dir)?;
    print_summary(&report);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Tune(a) => tune(a),
        Command::Report { dir } => report(&dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
