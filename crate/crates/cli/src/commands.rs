use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde_json::json;

use greenbench_core::carbon::FactorTable;
use greenbench_core::corpus::load_csv;
use greenbench_core::energy::{load_trace, read_counter_file, PowerSource};
use greenbench_core::quant::{self, memory_footprint, quant_error};
use greenbench_core::report::{emit_json, emit_markdown_table, parse_json, Provenance, ReportDocument};
use greenbench_core::runner::{
    self, run_benchmark, toy_classifier_train, ConfigOverrides, HttpClient, InferenceConfig, MockRunner,
    ModelRunner, RunOptions, ToyRunner, Workload,
};
use greenbench_core::tensorfile::{format_quantized, parse_tensor};

use crate::{BenchArgs, CompareArgs, PowerSpec, QuantizeArgs, ReportArgs, RunnerKind};

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes).context("writing stdout")
        }
    }
}

pub fn quantize(args: QuantizeArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let tensor = parse_tensor(&text).with_context(|| format!("parsing {}", args.input.display()))?;
    let q = quant::quantize(&tensor, args.bits)?;
    let stats = quant_error(&tensor, args.bits)?;

    let out = args.out.unwrap_or_else(|| {
        let mut p = args.input.clone().into_os_string();
        p.push(".quant");
        PathBuf::from(p)
    });
    write_output(Some(&out), format_quantized(&q).as_bytes())?;

    let summary = json!({
        "output": out.display().to_string(),
        "bits": q.bits(),
        "delta": q.delta(),
        "minimum": q.minimum(),
        "max_abs_error": stats.max_abs_error,
        "mean_squared_error": stats.mean_squared_error,
        "fp32_bytes": memory_footprint(&tensor),
        "quantized_bytes": memory_footprint(&q),
        "footprint_ratio": memory_footprint(&q) as f64 / memory_footprint(&tensor) as f64,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn power_source(args: &BenchArgs) -> Result<PowerSource> {
    Ok(match &args.power_source {
        PowerSpec::Constant(watts) => PowerSource::Constant { watts: *watts },
        PowerSpec::Trace(path) => PowerSource::Trace {
            origin: path.display().to_string(),
            samples: load_trace(path)?,
        },
        PowerSpec::Counter(path) => {
            let max_range_uj = match args.counter_max_range {
                Some(v) => v,
                None => {
                    let sibling = path.with_file_name("max_energy_range_uj");
                    read_counter_file(&sibling).with_context(|| {
                        format!("no --counter-max-range given and {} is unreadable", sibling.display())
                    })?
                }
            };
            PowerSource::Counter {
                path: path.clone(),
                max_range_uj,
                interval: Duration::from_millis(args.sample_interval_ms.max(1)),
            }
        }
    })
}

fn inference_config(args: &BenchArgs) -> Result<InferenceConfig> {
    let mut base = match &args.config {
        Some(c) => InferenceConfig::load(c)?,
        None => InferenceConfig::default(),
    };
    if args.config.is_none() {
        match args.runner {
            RunnerKind::Mock => base.model_name = "mock".into(),
            RunnerKind::Toy => base.model_name = "toy-classifier".into(),
            RunnerKind::Http => {}
        }
    }
    Ok(base.with_overrides(&ConfigOverrides {
        model_name: args.model.clone(),
        batch_size: args.batch_size,
        max_tokens: args.max_tokens,
        temperature: args.temperature,
        top_p: args.top_p,
        top_k: args.top_k,
        beam_size: args.beam_size,
    })?)
}

pub fn bench(args: BenchArgs) -> Result<()> {
    if args.bits.is_some() && args.runner != RunnerKind::Toy {
        bail!("--bits only applies to --runner toy");
    }
    let corpus = load_csv(&args.dataset)?;
    let workload = match args.subset {
        Some(n) => Workload::sample(&corpus, n, args.seed)?,
        None => Workload::full(corpus.clone()),
    };
    let config = inference_config(&args)?;
    let power = power_source(&args)?;
    let factor = FactorTable::load(&args.factor_file)
        .with_context(|| format!("loading {}", args.factor_file.display()))?
        .lookup(&args.region)?;

    let model: Box<dyn ModelRunner> = match args.runner {
        RunnerKind::Mock => Box::new(match &args.mock_response {
            Some(text) => MockRunner::Fixed(text.clone()),
            None => MockRunner::Oracle,
        }),
        RunnerKind::Toy => {
            let weights = toy_classifier_train(&corpus, args.dims, args.seed)?;
            match args.bits {
                Some(bits) => Box::new(ToyRunner::new(&quant::quantize(&weights, bits)?)?),
                None => Box::new(ToyRunner::new(&weights)?),
            }
        }
        RunnerKind::Http => {
            let mut client = HttpClient::new(&args.endpoint).send_beam_size(args.pass_beam_size);
            if let Some(r) = args.retries {
                client = client.retries(r);
            }
            Box::new(client)
        }
    };

    let label = args.label.clone().or_else(|| {
        model
            .quantization()
            .map(|q| format!("{} ({}-bit)", config.model_name, q.bits))
    });
    let options = RunOptions {
        parallel: args.parallel,
        label,
        ..RunOptions::default()
    };
    let outcome = run_benchmark(model.as_ref(), &workload, &config, &power, &factor, &options)?;

    if let Some(path) = &args.predictions {
        let csv = runner::PredictionRecord::to_csv(&outcome.predictions);
        write_output(Some(path), csv.as_bytes())?;
    }
    let run = outcome.run;
    eprintln!(
        "{}: accuracy {:.4}, macro F1 {:.4}, {:.6} J, {:.3e} kg CO2e/inference",
        run.label,
        run.metrics.accuracy,
        run.metrics.macro_f1,
        run.energy.joules,
        run.carbon.comparable_kg()
    );
    let provenance = Provenance::from_runs([&run], &args.factor_file.display().to_string());
    let doc = ReportDocument::new(vec![run], vec![], provenance);
    doc.validate()?;
    write_output(Some(&args.out), &emit_json(&doc))
}

fn read_doc(path: &Path) -> Result<ReportDocument> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_json(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn single_run(doc: ReportDocument, path: &Path) -> Result<(runner::BenchmarkRun, Provenance)> {
    match <[_; 1]>::try_from(doc.runs) {
        Ok([run]) => Ok((run, doc.provenance)),
        Err(runs) => bail!("{} holds {} runs; expected exactly one", path.display(), runs.len()),
    }
}

pub fn compare(args: CompareArgs) -> Result<()> {
    let (before, mut provenance) = single_run(read_doc(&args.before)?, &args.before)?;
    let (after, after_provenance) = single_run(read_doc(&args.after)?, &args.after)?;
    provenance.merge(&after_provenance);
    let report = runner::compare(&before, &after)?;
    let runs = if before == after { vec![before] } else { vec![before, after] };
    let doc = ReportDocument::new(runs, vec![report], provenance);
    doc.validate()?;
    write_output(args.out.as_deref(), &emit_json(&doc))
}

pub fn report(args: ReportArgs) -> Result<()> {
    let doc = read_doc(&args.input)?;
    write_output(args.out.as_deref(), emit_markdown_table(&doc).as_bytes())
}
