use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use linkadapt::config::ExperimentConfig;
use linkadapt::harness::{compare_matched, compare_within, write_traces, Execution, Experiment, RunOptions, Summary};
use linkadapt::{presets, Error};

#[derive(Parser)]
#[command(name = "linkadapt", version, about = "Link-adaptation simulator: LTSLA, OLLA and UTS over stochastic channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write traces.csv, summary.json and config.resolved.json.
    Run(RunArgs),
    /// Tabulate throughput ratios between agents of one or more summaries.
    Compare(CompareArgs),
    /// Write one run's effective-SINR trajectory as CSV.
    Channel(ChannelArgs),
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct Source {
    /// Built-in preset name.
    #[arg(value_name = "PRESET", conflicts_with_all = ["preset", "config"])]
    name: Option<String>,
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML or JSON experiment file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a config value by dotted path, e.g. `agents.0.step=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Replace the base seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Source {
    /// Returns the config and a label for the default output directory.
    fn load(&self) -> Result<(ExperimentConfig, String), Error> {
        let (mut cfg, label) = match (&self.config, self.name.as_ref().or(self.preset.as_ref())) {
            (Some(path), _) => {
                let label = path.file_stem().map_or("experiment".into(), |s| s.to_string_lossy().into_owned());
                (ExperimentConfig::load(path)?, label)
            }
            (None, Some(name)) => (presets::load(name)?, name.clone()),
            (None, None) => {
                return Err(Error::invalid(
                    "preset",
                    format!("give a preset or --config; presets: {}", presets::names().join(", ")),
                ))
            }
        };
        for assignment in &self.overrides {
            cfg.set(assignment)?;
        }
        if let Some(seed) = self.seed {
            cfg.base_seed = seed;
        }
        Ok((cfg, label))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory; defaults to the config's output_dir, else out/<name>.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 0 runs sequentially on the calling thread.
    #[arg(long, value_name = "INT")]
    parallel: Option<usize>,
    /// Also write pmf_<agent>.csv with the belief after every TTI of run 0.
    #[arg(long)]
    dump_pmf: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// summary.json files; later ones are matched by agent name against the first.
    #[arg(required = true, value_name = "SUMMARY")]
    summaries: Vec<PathBuf>,
    /// Flag TTIs whose ratio reaches this factor.
    #[arg(long, default_value_t = 1.5)]
    factor: f64,
    /// Compare every pair of agents inside each summary instead.
    #[arg(long)]
    within: bool,
    /// Also write every per-TTI ratio to this CSV.
    #[arg(long, value_name = "PATH")]
    per_tti: Option<PathBuf>,
}

#[derive(Args)]
struct ChannelArgs {
    #[command(flatten)]
    source: Source,
    /// 0-based run index.
    #[arg(long, default_value_t = 0)]
    run: usize,
    /// Destination CSV; stdout when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Channel(args) => cmd_channel(args),
        Command::Presets => {
            for name in presets::names() {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) | Error::Validation(_) | Error::Parse { .. } | Error::Toml(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, Error> {
    let (cfg, label) = args.source.load()?;
    let experiment = Experiment::new(&cfg)?;
    let out_dir = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&label));

    let cancel = Arc::new(AtomicBool::new(false));
    {
        let cancel = Arc::clone(&cancel);
        // a second handler cannot be installed; losing graceful shutdown is fine
        let _ = ctrlc::set_handler(move || cancel.store(true, Ordering::Relaxed));
    }
    let execution = match args.parallel {
        None => Execution::Parallel,
        Some(0) => Execution::Sequential,
        Some(n) => Execution::ParallelThreads(n),
    };
    let output = experiment.run(&RunOptions {
        execution,
        dump_pmf: args.dump_pmf,
        cancel: Some(Arc::clone(&cancel)),
    })?;

    fs::create_dir_all(&out_dir)?;
    let mut w = create(&out_dir.join("traces.csv"))?;
    write_traces(&mut w, &output.traces)?;
    w.flush()?;
    fs::write(out_dir.join("summary.json"), output.summary.to_json_pretty()?)?;
    let mut resolved = experiment.config().clone();
    resolved.output_dir = None;
    fs::write(out_dir.join("config.resolved.json"), resolved.to_json_pretty()?)?;
    for dump in &output.pmf_dumps {
        let mut w = create(&out_dir.join(format!("pmf_{}.csv", dump.agent)))?;
        dump.write_csv(&mut w)?;
        w.flush()?;
    }

    let done = output.completed_runs.len();
    if cancel.load(Ordering::Relaxed) && done < cfg.num_runs {
        eprintln!(
            "interrupted: wrote {done} of {} runs to {}",
            cfg.num_runs,
            out_dir.display()
        );
        return Ok(ExitCode::from(130));
    }
    for agent in &output.summary.agents {
        eprintln!(
            "{:<12} mean throughput {:.4}  BLER {:.4}",
            agent.name, agent.mean_throughput, agent.bler
        );
    }
    eprintln!("wrote {}", out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode, Error> {
    let summaries = args
        .summaries
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", p.display())))?;
            Summary::from_json_str(&text)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let refs: Vec<&Summary> = summaries.iter().collect();
    let reports = if args.within || refs.len() == 1 {
        compare_within(&refs, args.factor)?
    } else {
        compare_matched(&refs, args.factor)?
    };

    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "numerator,denominator,aggregate_ratio,max_ratio,max_ratio_tti,flagged_ttis")?;
    for r in &reports {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{},{}",
            r.numerator,
            r.denominator,
            r.aggregate_ratio,
            r.max_ratio,
            r.max_ratio_tti,
            r.flagged.len()
        )?;
    }
    writeln!(out)?;
    writeln!(out, "numerator,denominator,tti,ratio")?;
    for r in &reports {
        for &tti in &r.flagged {
            writeln!(out, "{},{},{},{:.6}", r.numerator, r.denominator, tti, r.per_tti[tti - 1])?;
        }
    }
    if let Some(path) = &args.per_tti {
        let mut w = create(path)?;
        writeln!(w, "numerator,denominator,tti,ratio")?;
        for r in &reports {
            for (i, ratio) in r.per_tti.iter().enumerate() {
                writeln!(w, "{},{},{},{}", r.numerator, r.denominator, i + 1, ratio)?;
            }
        }
        w.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_channel(args: ChannelArgs) -> Result<ExitCode, Error> {
    let (cfg, _) = args.source.load()?;
    let experiment = Experiment::new(&cfg)?;
    if args.run >= cfg.num_runs {
        return Err(Error::invalid("run", format!("must be below num_runs = {}", cfg.num_runs)));
    }
    let chan = experiment.channel(args.run)?;
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            chan.write_csv(&mut w)?;
            w.flush()?;
        }
        None => chan.write_csv(io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}
