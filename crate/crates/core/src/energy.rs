//! Energy measurement for a benchmark window.
//!
//! Three providers produce an [`EnergyReading`]:
//! - `counter-file`: a cumulative microjoule counter (RAPL `energy_uj` style) sampled periodically,
//! - `constant-power`: configured watts times measured wall-clock duration,
//! - `trace-replay`: a recorded `timestamp_ms,watts` trace integrated with the trapezoidal rule.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const JOULES_PER_KWH: f64 = 3.6e6;
pub const DEFAULT_SAMPLE_INTERVAL: Duration = Duration::from_millis(100);

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("power trace has no samples")]
    EmptyTrace,
    #[error("power trace timestamps decrease at sample {index} ({prev} ms -> {next} ms)")]
    UnsortedTrace { index: usize, prev: u64, next: u64 },
    #[error("negative or non-finite power: {0} W")]
    NegativePower(f64),
    #[error("counter max range is zero")]
    ZeroRange,
    #[error("counter value {value} exceeds max range {max_range_uj}")]
    CounterOutOfRange { value: u64, max_range_uj: u64 },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("energy sampling thread panicked")]
    SamplerPanicked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    CounterFile,
    ConstantPower,
    TraceReplay,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::CounterFile => "counter-file",
            ProviderKind::ConstantPower => "constant-power",
            ProviderKind::TraceReplay => "trace-replay",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub timestamp_ms: u64,
    pub watts: f64,
}

impl PowerSample {
    pub fn new(timestamp_ms: u64, watts: f64) -> Self {
        Self { timestamp_ms, watts }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReading {
    pub joules: f64,
    pub kwh: f64,
    pub provider: ProviderKind,
    pub window_ms: u64,
}

impl EnergyReading {
    pub fn from_joules(joules: f64, provider: ProviderKind, window_ms: u64) -> Self {
        Self {
            joules,
            kwh: joules / JOULES_PER_KWH,
            provider,
            window_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRead {
    pub microjoules: u64,
    pub max_range_uj: u64,
}

/// Trapezoidal integral of a power trace. A single sample spans zero time.
pub fn integrate_trace(samples: &[PowerSample]) -> Result<EnergyReading, EnergyError> {
    let first = samples.first().ok_or(EnergyError::EmptyTrace)?;
    for (i, s) in samples.iter().enumerate() {
        if s.watts < 0.0 || !s.watts.is_finite() {
            return Err(EnergyError::NegativePower(s.watts));
        }
        if i > 0 && s.timestamp_ms < samples[i - 1].timestamp_ms {
            return Err(EnergyError::UnsortedTrace {
                index: i,
                prev: samples[i - 1].timestamp_ms,
                next: s.timestamp_ms,
            });
        }
    }
    let joules = samples
        .windows(2)
        .map(|pair| {
            let dt_s = (pair[1].timestamp_ms - pair[0].timestamp_ms) as f64 / 1000.0;
            dt_s * (pair[0].watts + pair[1].watts) / 2.0
        })
        .sum();
    let last = samples[samples.len() - 1];
    Ok(EnergyReading::from_joules(
        joules,
        ProviderKind::TraceReplay,
        last.timestamp_ms - first.timestamp_ms,
    ))
}

fn counter_delta_uj(before: CounterRead, after: CounterRead) -> Result<u64, EnergyError> {
    let range = after.max_range_uj;
    if range == 0 || before.max_range_uj == 0 {
        return Err(EnergyError::ZeroRange);
    }
    for value in [before.microjoules, after.microjoules] {
        if value > range {
            return Err(EnergyError::CounterOutOfRange {
                value,
                max_range_uj: range,
            });
        }
    }
    if after.microjoules >= before.microjoules {
        Ok(after.microjoules - before.microjoules)
    } else {
        // one wrap: the counter runs 0..=max_range, so it has max_range + 1 states
        Ok(range - before.microjoules + after.microjoules + 1)
    }
}

/// Joules elapsed between two reads of a wrapping counter, assuming at most one wrap.
pub fn counter_delta(before: CounterRead, after: CounterRead) -> Result<f64, EnergyError> {
    counter_delta_uj(before, after).map(|uj| uj as f64 / 1e6)
}

pub fn constant_power_energy(watts: f64, duration_ms: u64) -> Result<EnergyReading, EnergyError> {
    if watts < 0.0 || !watts.is_finite() {
        return Err(EnergyError::NegativePower(watts));
    }
    Ok(EnergyReading::from_joules(
        watts * duration_ms as f64 / 1000.0,
        ProviderKind::ConstantPower,
        duration_ms,
    ))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EnergyError + '_ {
    move |source| EnergyError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parses a `timestamp_ms,watts` CSV trace.
pub fn parse_trace(text: &str, origin: &str) -> Result<Vec<PowerSample>, EnergyError> {
    let parse_err = |message: String| EnergyError::Parse {
        path: origin.to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["timestamp_ms", "watts"] {
        return Err(parse_err(format!(
            "expected header `timestamp_ms,watts`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(format!("line {line}: {e}")))?;
        let field = |k: usize| record.get(k).unwrap_or("");
        let timestamp_ms = field(0)
            .parse()
            .map_err(|_| parse_err(format!("line {line}: bad timestamp {:?}", field(0))))?;
        let watts = field(1)
            .parse()
            .map_err(|_| parse_err(format!("line {line}: bad watts {:?}", field(1))))?;
        samples.push(PowerSample { timestamp_ms, watts });
    }
    Ok(samples)
}

pub fn load_trace(path: &Path) -> Result<Vec<PowerSample>, EnergyError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_trace(&text, &path.display().to_string())
}

pub fn format_trace(samples: &[PowerSample]) -> String {
    let mut out = String::from("timestamp_ms,watts\n");
    for s in samples {
        out.push_str(&format!("{},{}\n", s.timestamp_ms, s.watts));
    }
    out
}

/// Reads a whole counter file as a decimal microjoule count.
pub fn read_counter_file(path: &Path) -> Result<u64, EnergyError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    text.trim().parse().map_err(|_| EnergyError::Parse {
        path: path.display().to_string(),
        message: format!("not a decimal counter value: {:?}", text.trim()),
    })
}

/// Wall-clock source for measurement windows, in milliseconds since the Unix epoch.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Deterministic clock advancing a fixed step on every read.
#[derive(Debug)]
pub struct StepClock {
    next: AtomicU64,
    step_ms: u64,
}

impl StepClock {
    pub fn new(start_ms: u64, step_ms: u64) -> Self {
        Self {
            next: AtomicU64::new(start_ms),
            step_ms,
        }
    }
}

impl Clock for StepClock {
    fn now_ms(&self) -> u64 {
        self.next.fetch_add(self.step_ms, Ordering::SeqCst)
    }
}

/// Where the energy figure of a run comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerSource {
    Counter {
        path: PathBuf,
        max_range_uj: u64,
        interval: Duration,
    },
    Constant {
        watts: f64,
    },
    Trace {
        origin: String,
        samples: Vec<PowerSample>,
    },
}

impl PowerSource {
    pub fn kind(&self) -> ProviderKind {
        match self {
            PowerSource::Counter { .. } => ProviderKind::CounterFile,
            PowerSource::Constant { .. } => ProviderKind::ConstantPower,
            PowerSource::Trace { .. } => ProviderKind::TraceReplay,
        }
    }

    /// Human-readable provenance string, e.g. `constant-power:28W`.
    pub fn describe(&self) -> String {
        match self {
            PowerSource::Counter { path, .. } => format!("counter-file:{}", path.display()),
            PowerSource::Constant { watts } => format!("constant-power:{watts}W"),
            PowerSource::Trace { origin, .. } => format!("trace-replay:{origin}"),
        }
    }

    /// Begins a measurement window.
    pub fn start(&self, clock: Arc<dyn Clock>) -> Result<Collector, EnergyError> {
        let state = match self {
            PowerSource::Constant { watts } => {
                if *watts < 0.0 || !watts.is_finite() {
                    return Err(EnergyError::NegativePower(*watts));
                }
                CollectorState::Constant { watts: *watts }
            }
            PowerSource::Trace { samples, .. } => {
                // validate up front so a bad trace fails before any inference runs
                integrate_trace(samples)?;
                CollectorState::Trace {
                    samples: samples.clone(),
                }
            }
            PowerSource::Counter {
                path,
                max_range_uj,
                interval,
            } => {
                if *max_range_uj == 0 {
                    return Err(EnergyError::ZeroRange);
                }
                let first = read_counter_file(path)?;
                let sampler = CounterSampler::spawn(path.clone(), *max_range_uj, *interval, first);
                CollectorState::Counter(sampler)
            }
        };
        let start_ms = clock.now_ms();
        Ok(Collector {
            clock,
            start_ms,
            state,
        })
    }
}

/// Energy plus the window it covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub reading: EnergyReading,
    pub start_ms: u64,
    pub end_ms: u64,
}

enum CollectorState {
    Constant { watts: f64 },
    Trace { samples: Vec<PowerSample> },
    Counter(CounterSampler),
}

/// A running measurement window; owned by exactly one benchmark run.
pub struct Collector {
    clock: Arc<dyn Clock>,
    start_ms: u64,
    state: CollectorState,
}

impl Collector {
    pub fn stop(self) -> Result<Measurement, EnergyError> {
        let end_ms = self.clock.now_ms().max(self.start_ms);
        match self.state {
            CollectorState::Constant { watts } => Ok(Measurement {
                reading: constant_power_energy(watts, end_ms - self.start_ms)?,
                start_ms: self.start_ms,
                end_ms,
            }),
            // a replayed trace is the measurement of record, including its timing
            CollectorState::Trace { samples } => {
                let reading = integrate_trace(&samples)?;
                Ok(Measurement {
                    reading,
                    start_ms: samples[0].timestamp_ms,
                    end_ms: samples[samples.len() - 1].timestamp_ms,
                })
            }
            CollectorState::Counter(sampler) => {
                let microjoules = sampler.finish()?;
                Ok(Measurement {
                    reading: EnergyReading::from_joules(
                        microjoules as f64 / 1e6,
                        ProviderKind::CounterFile,
                        end_ms - self.start_ms,
                    ),
                    start_ms: self.start_ms,
                    end_ms,
                })
            }
        }
    }
}

struct CounterSampler {
    stop: mpsc::Sender<()>,
    handle: JoinHandle<Result<u64, EnergyError>>,
}

impl CounterSampler {
    fn spawn(path: PathBuf, max_range_uj: u64, interval: Duration, first: u64) -> Self {
        let (stop, stopped) = mpsc::channel::<()>();
        let handle = thread::spawn(move || {
            let mut prev = CounterRead {
                microjoules: first,
                max_range_uj,
            };
            let mut total: u64 = 0;
            loop {
                // re-read every tick so at most one wrap happens between reads
                let done = match stopped.recv_timeout(interval) {
                    Err(RecvTimeoutError::Timeout) => false,
                    Ok(()) | Err(RecvTimeoutError::Disconnected) => true,
                };
                let now = CounterRead {
                    microjoules: read_counter_file(&path)?,
                    max_range_uj,
                };
                total += counter_delta_uj(prev, now)?;
                prev = now;
                if done {
                    return Ok(total);
                }
            }
        });
        Self { stop, handle }
    }

    fn finish(self) -> Result<u64, EnergyError> {
        let _ = self.stop.send(());
        self.handle.join().map_err(|_| EnergyError::SamplerPanicked)?
    }
}
