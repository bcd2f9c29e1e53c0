use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Quantize weights, benchmark sentiment inference, and account for its carbon cost.
#[derive(Debug, Parser)]
#[command(name = "greenbench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quantize a tensor file and print reconstruction error statistics.
    Quantize(QuantizeArgs),
    /// Run one benchmark and write a single-run report.
    Bench(Box<BenchArgs>),
    /// Compare a before run with an after run.
    Compare(CompareArgs),
    /// Render a report as a markdown table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct QuantizeArgs {
    /// Tensor file: shape on line 1, values on line 2.
    input: PathBuf,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(2..=8))]
    bits: u32,
    /// Quantized output file [default: <input>.quant].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RunnerKind {
    Mock,
    Toy,
    Http,
}

#[derive(Debug, Clone, PartialEq)]
enum PowerSpec {
    Counter(PathBuf),
    Constant(f64),
    Trace(PathBuf),
}

fn parse_power_source(s: &str) -> Result<PowerSpec, String> {
    let (kind, value) = s
        .split_once(':')
        .ok_or_else(|| "expected counter:<path>, constant:<watts> or trace:<path>".to_string())?;
    if value.is_empty() {
        return Err(format!("missing value after `{kind}:`"));
    }
    match kind {
        "counter" => Ok(PowerSpec::Counter(value.into())),
        "trace" => Ok(PowerSpec::Trace(value.into())),
        "constant" => match value.trim_end_matches(['W', 'w']).parse::<f64>() {
            Ok(w) if w >= 0.0 && w.is_finite() => Ok(PowerSpec::Constant(w)),
            _ => Err(format!("invalid wattage {value:?}")),
        },
        other => Err(format!("unknown power source kind {other:?}")),
    }
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Labeled dataset CSV with header `text,label`.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = RunnerKind::Mock)]
    runner: RunnerKind,
    /// Model name sent to the server; overrides the preset.
    #[arg(long)]
    model: Option<String>,
    /// Generate endpoint for `--runner http`.
    #[arg(long, default_value = "http://127.0.0.1:11434")]
    endpoint: String,
    /// Preset name (e.g. phi-3-mini) or path to a key=value config file.
    #[arg(long)]
    config: Option<String>,
    /// counter:<path> | constant:<watts> | trace:<path>
    #[arg(long, value_parser = parse_power_source)]
    power_source: PowerSpec,
    /// Max counter value in µJ; read from a sibling `max_energy_range_uj` when omitted.
    #[arg(long)]
    counter_max_range: Option<u64>,
    /// Counter polling interval.
    #[arg(long, default_value_t = 100)]
    sample_interval_ms: u64,
    /// Emission factor CSV (`region,gco2_per_kwh,scope`).
    #[arg(long, env = "GREENBENCH_FACTOR_FILE")]
    factor_file: PathBuf,
    /// Region key looked up in the factor file.
    #[arg(long)]
    region: String,
    /// Evaluate a seeded sample of this many examples instead of the whole dataset.
    #[arg(long)]
    subset: Option<usize>,
    /// Seed for subset sampling and toy training.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report JSON output path.
    #[arg(long)]
    out: PathBuf,
    /// Also write per-example predictions (`text,gold,predicted,raw_response`).
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Report label [default: model name].
    #[arg(long)]
    label: Option<String>,
    /// Dispatch up to batch_size requests concurrently.
    #[arg(long)]
    parallel: bool,

    /// Fixed response for `--runner mock` (default echoes the gold label).
    #[arg(long)]
    mock_response: Option<String>,
    /// Hashed feature buckets for `--runner toy`.
    #[arg(long, default_value_t = 256)]
    dims: usize,
    /// Quantize the toy classifier's weights to this many bits.
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..=8))]
    bits: Option<u32>,

    /// Retries per request after the first attempt [default: 3].
    #[arg(long)]
    retries: Option<u32>,
    /// Forward beam_size to the server; most generate APIs ignore or reject it.
    #[arg(long)]
    pass_beam_size: bool,

    // per-field overrides, applied on top of --config
    #[arg(long)]
    batch_size: Option<u32>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    top_p: Option<f64>,
    #[arg(long)]
    top_k: Option<u32>,
    #[arg(long)]
    beam_size: Option<u32>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Report holding the baseline run.
    before: PathBuf,
    /// Report holding the optimized run.
    after: PathBuf,
    /// Output path [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report JSON document.
    input: PathBuf,
    /// Output path [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Quantize(args) => commands::quantize(args),
        Command::Bench(args) => commands::bench(*args),
        Command::Compare(args) => commands::compare(args),
        Command::Report(args) => commands::report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_source_syntax() {
        assert_eq!(parse_power_source("constant:28"), Ok(PowerSpec::Constant(28.0)));
        assert_eq!(parse_power_source("constant:28W"), Ok(PowerSpec::Constant(28.0)));
        assert_eq!(
            parse_power_source("trace:/tmp/a:b.csv"),
            Ok(PowerSpec::Trace("/tmp/a:b.csv".into()))
        );
        assert_eq!(
            parse_power_source("counter:/sys/x/energy_uj"),
            Ok(PowerSpec::Counter("/sys/x/energy_uj".into()))
        );
        assert!(parse_power_source("constant:-1").is_err());
        assert!(parse_power_source("constant:").is_err());
        assert!(parse_power_source("gpu:0").is_err());
        assert!(parse_power_source("28").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
