use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use irqbench::analysis::{analyze, SummaryReport};
use irqbench::bench::{comparison_table, run_benchmark, BenchOptions, BenchResult};
use irqbench::scenarios::{registry, BenchmarkName, ScenarioId, DEFAULT_BLMAX_T6_CORES};
use irqbench::sim::{run, RunConfig};
use irqbench::stimulus::{Mode, StimulationPattern, DEFAULT_SCALE, LATENCY_CAPTURE_NS, THROUGHPUT_CAPTURE_NS};
use irqbench::timing::{StackKind, TimingModel};
use irqbench::trace::TraceCapture;
use irqbench::units::{parse_duration, parse_seeds};

// A plain `Vec` would make clap expect repeated flags.
type SeedList = Vec<u64>;

#[derive(Parser)]
#[command(
    name = "irqbench",
    version,
    about = "Simulate and analyze GICv2 interrupt latency and throughput"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args)]
struct ModelArgs {
    /// TOML file overriding timing model parameters.
    #[arg(long)]
    timing: Option<PathBuf>,
    /// Time-scale divisor applied to stimulation pattern and duration.
    #[arg(long, default_value_t = DEFAULT_SCALE)]
    scale: u64,
    /// Capture length before scaling (e.g. 30s, 120s, 500ms).
    #[arg(long, value_parser = parse_duration)]
    duration: Option<u64>,
    /// Number of cores used by the T6 part of B-Lmax.
    #[arg(long, default_value_t = DEFAULT_BLMAX_T6_CORES)]
    blmax_cores: u32,
}

impl ModelArgs {
    fn timing(&self) -> Result<TimingModel> {
        let Some(path) = &self.timing else {
            return Ok(TimingModel::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let model = TimingModel::from_config_str(&text).with_context(|| format!("in {}", path.display()))?;
        model.validate()?;
        Ok(model)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its trace.
    Run {
        /// Test-case (T1..T7, T4-36, T6-2, ...), benchmark or `+`-joined combination.
        scenario: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Defaults to the only supported mode, or latency when both are.
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long, default_value = "bare-metal")]
        profile: StackKind,
        /// Custom high phase, before scaling.
        #[arg(long, value_parser = parse_duration, requires = "low")]
        high: Option<u64>,
        /// Custom low phase, before scaling.
        #[arg(long, value_parser = parse_duration, requires = "high")]
        low: Option<u64>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Extract latency or throughput statistics from a trace.
    Analyze {
        trace: PathBuf,
        /// Defaults to the mode recorded in the trace.
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Defaults to stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run benchmarks across seeds and stack profiles.
    Bench {
        /// B-Lmin, B-Lmax, B-Tmax or `all`.
        name: String,
        #[arg(long, value_parser = parse_seeds, default_value = "1..10")]
        seeds: SeedList,
        /// Restrict to one stack profile; both by default.
        #[arg(long)]
        profile: Option<StackKind>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Dump trace events as CSV.
    ExportCsv {
        trace: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// List scenario ids and benchmarks.
    List,
    /// Print the default timing model as TOML.
    Timing,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_trace(path: &Path) -> Result<TraceCapture> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    TraceCapture::read_from(BufReader::new(file)).with_context(|| format!("reading trace {}", path.display()))
}

fn cmd_run(
    scenario: &str,
    seed: u64,
    mode: Option<Mode>,
    profile: StackKind,
    pattern: Option<(u64, u64)>,
    model: &ModelArgs,
    out: &Path,
) -> Result<()> {
    let id: ScenarioId = scenario.parse()?;
    let config = id.resolve(model.blmax_cores)?.with_stack(profile);
    let mode = match (mode, &id) {
        (Some(m), _) => m,
        (None, ScenarioId::Benchmark(b)) => b.mode(),
        (None, _) if config.modes.contains(&Mode::Latency) => Mode::Latency,
        (None, _) => Mode::Throughput,
    };
    let duration = model.duration.unwrap_or(match mode {
        Mode::Latency => LATENCY_CAPTURE_NS,
        Mode::Throughput => THROUGHPUT_CAPTURE_NS,
    });
    let mut run_config = RunConfig::new(mode, seed, duration, model.scale);
    if let Some((high, low)) = pattern {
        run_config = run_config.with_pattern(StimulationPattern::new(high, low, vec![0], mode)?);
    }
    let capture = run(&config, &model.timing()?, &run_config)?;
    let mut w = output(Some(out))?;
    capture.write_to(&mut w)?;
    w.flush()?;
    eprintln!(
        "{}: {} events, {} simulated ns -> {}",
        config.name,
        capture.events.len(),
        capture.metadata.duration_ns,
        out.display()
    );
    Ok(())
}

fn cmd_analyze(trace: &Path, mode: Option<Mode>, format: Format, out: Option<&Path>) -> Result<()> {
    let capture = read_trace(trace)?;
    let Some(mode) = mode.or(capture.metadata.mode) else {
        bail!("{} records no measurement mode; pass --mode", trace.display());
    };
    let report = analyze(&capture, mode)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut w = output(out)?;
    match format {
        Format::Json => writeln!(w, "{}", report.to_json()?)?,
        Format::Csv => report.write_csv(&mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &SummaryReport) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_bench(result: &BenchResult, dir: &Path) -> Result<()> {
    let root = dir.join(&result.name);
    for agg in &result.aggregates {
        let stack_dir = root.join(agg.stack.as_str());
        fs::create_dir_all(&stack_dir).with_context(|| format!("creating {}", stack_dir.display()))?;
        for r in result.runs.iter().filter(|r| r.stack == agg.stack) {
            write_json(&stack_dir.join(format!("seed-{}.json", r.seed)), &r.report)?;
        }
        write_json(&stack_dir.join("aggregate.json"), &agg.report)?;
        let csv_path = stack_dir.join("aggregate.csv");
        let file = File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
        agg.report.write_csv(BufWriter::new(file))?;
    }
    Ok(())
}

fn cmd_bench(name: &str, seeds: Vec<u64>, profile: Option<StackKind>, model: &ModelArgs, out_dir: &Path) -> Result<()> {
    let names: Vec<BenchmarkName> = if name == "all" {
        BenchmarkName::ALL.to_vec()
    } else {
        vec![name.parse()?]
    };
    let opts = BenchOptions {
        seeds,
        scale: model.scale,
        duration_ns: model.duration,
        blmax_t6_cores: model.blmax_cores,
        profiles: profile.map_or(StackKind::ALL.to_vec(), |p| vec![p]),
        timing: model.timing()?,
    };
    let mut results = Vec::new();
    for n in names {
        let result = run_benchmark(n, &opts)?;
        write_bench(&result, out_dir)?;
        results.push(result);
    }
    let table = comparison_table(&results);
    fs::write(out_dir.join("comparison.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_export_csv(trace: &Path, out: Option<&Path>) -> Result<()> {
    let capture = read_trace(trace)?;
    let mut w = output(out)?;
    capture.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_list() {
    println!("{:<10} {:<22} {:<18} {:<5} modes", "id", "cache", "interrupts", "cores");
    for c in registry() {
        let modes: Vec<&str> = c.modes.iter().map(Mode::as_str).collect();
        println!(
            "{:<10} {:<22} {:<18} {:<5} {}",
            c.name,
            c.cache_mode.to_string(),
            c.enabled_interrupts(),
            c.enabled_cores,
            modes.join(",")
        );
    }
    for b in BenchmarkName::ALL {
        println!("{:<10} {} benchmark", b.as_str(), b.mode());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            scenario,
            seed,
            mode,
            profile,
            high,
            low,
            model,
            out,
        } => cmd_run(scenario, *seed, *mode, *profile, high.zip(*low), model, out),
        Command::Analyze {
            trace,
            mode,
            format,
            out,
        } => cmd_analyze(trace, *mode, *format, out.as_deref()),
        Command::Bench {
            name,
            seeds,
            profile,
            model,
            out_dir,
        } => cmd_bench(name, seeds.clone(), *profile, model, out_dir),
        Command::ExportCsv { trace, out } => cmd_export_csv(trace, out.as_deref()),
        Command::List => {
            cmd_list();
            Ok(())
        }
        Command::Timing => {
            print!("{}", TimingModel::default().to_config_string());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
