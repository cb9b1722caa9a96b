//! Scheduled injection probes.
//!
//! A probe is an external command whose wall-clock runtime stands in for an
//! application launch. The harness runs an ordered list of probes on a fixed
//! cycle and appends one record per run to a permanent tab-separated log:
//!
//! ```text
//! 1999-06-01T18:22:00Z	appC	773.94	ok
//! ```
//!
//! The log is append-only and survives across harness restarts, so weeks of
//! cycles accumulate into one analyzable history. [`synth_samples`] generates
//! gamma-distributed synthetic logs for testing the analysis pipeline without
//! waiting on a real schedule.

use std::fmt;
use std::io::{self, Write};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

/// Granularity of the child-exit polling loop in [`run_probe`].
const POLL_INTERVAL: Duration = Duration::from_millis(2);

/// Errors from schedule validation, log parsing, and sampling.
#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("probe name must be nonempty")]
    EmptyName,
    #[error("probe {name:?}: timeout must be positive and finite, got {timeout}")]
    BadTimeout { name: String, timeout: f64 },
    #[error("duplicate probe name {0:?}")]
    DuplicateName(String),
    #[error("schedule has no probes")]
    NoProbes,
    #[error("schedule interval must be positive and finite, got {0}")]
    BadInterval(f64),
    #[error("gamma shape must be positive and finite, got {0}")]
    BadShape(f64),
    #[error("gamma scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("{0}")]
    Parse(String),
    #[error("config line {line}: {detail}")]
    Config { line: usize, detail: String },
    #[error("log sink write failed: {0}")]
    Sink(#[from] io::Error),
}

/// One configured probe: a named command with a kill timeout and a launch
/// position within the cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSpec {
    pub name: String,
    pub command: String,
    /// Seconds before the child is killed and the run recorded as `timeout`.
    pub timeout: f64,
    /// Launch position within a cycle; probes run in ascending order.
    pub order: usize,
}

impl ProbeSpec {
    pub fn validate(&self) -> Result<(), ProbeError> {
        if self.name.is_empty() {
            return Err(ProbeError::EmptyName);
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(ProbeError::BadTimeout {
                name: self.name.clone(),
                timeout: self.timeout,
            });
        }
        Ok(())
    }
}

/// Outcome of a single probe run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeStatus {
    /// Command exited successfully within its timeout.
    Ok,
    /// Command exceeded its timeout and was killed.
    Timeout,
    /// Command failed to spawn or exited nonzero.
    Fail,
}

impl fmt::Display for ProbeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeStatus::Ok => "ok",
            ProbeStatus::Timeout => "timeout",
            ProbeStatus::Fail => "fail",
        })
    }
}

impl std::str::FromStr for ProbeStatus {
    type Err = ProbeError;

    fn from_str(s: &str) -> Result<Self, ProbeError> {
        match s {
            "ok" => Ok(ProbeStatus::Ok),
            "timeout" => Ok(ProbeStatus::Timeout),
            "fail" => Ok(ProbeStatus::Fail),
            other => Err(ProbeError::Parse(format!("unknown status {other:?}"))),
        }
    }
}

/// One timestamped duration measurement of a named application action.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSample {
    pub timestamp: DateTime<Utc>,
    pub app: String,
    /// Wall-clock seconds from spawn to completion signal.
    pub duration: f64,
    pub status: ProbeStatus,
}

/// A probe cycle definition: which probes, how often, how many times.
#[derive(Debug, Clone)]
pub struct Schedule {
    /// Seconds between cycle starts. Cycles that overrun are not back-dated;
    /// the next cycle simply starts as soon as the previous one finishes.
    pub interval: f64,
    pub probes: Vec<ProbeSpec>,
    /// `None` runs until the process is killed.
    pub cycles: Option<u64>,
}

impl Schedule {
    pub fn validate(&self) -> Result<(), ProbeError> {
        if !(self.interval > 0.0 && self.interval.is_finite()) {
            return Err(ProbeError::BadInterval(self.interval));
        }
        if self.probes.is_empty() {
            return Err(ProbeError::NoProbes);
        }
        let mut seen = std::collections::HashSet::new();
        for probe in &self.probes {
            probe.validate()?;
            if !seen.insert(probe.name.as_str()) {
                return Err(ProbeError::DuplicateName(probe.name.clone()));
            }
        }
        Ok(())
    }
}

/// Injectable time source: wall clock for log timestamps, a monotonic
/// elapsed counter for durations, and sleep for pacing. Production code uses
/// [`SystemClock`]; tests can substitute [`VirtualClock`] to run schedules
/// without real waiting.
pub trait Clock: Send + Sync {
    fn now_utc(&self) -> DateTime<Utc>;
    /// Monotonic time elapsed since the clock was created.
    fn elapsed(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

/// Host clock: `Utc::now` plus a monotonic [`std::time::Instant`] anchor.
pub struct SystemClock {
    start: std::time::Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock {
            start: std::time::Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now_utc(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Deterministic clock whose time advances only when `sleep` is called.
/// Child processes still run in real time, so durations measured through a
/// virtual clock count polling iterations rather than host seconds.
pub struct VirtualClock {
    state: Mutex<(DateTime<Utc>, Duration)>,
}

impl VirtualClock {
    pub fn starting_at(start: DateTime<Utc>) -> Self {
        VirtualClock {
            state: Mutex::new((start, Duration::ZERO)),
        }
    }
}

impl Clock for VirtualClock {
    fn now_utc(&self) -> DateTime<Utc> {
        self.state.lock().unwrap().0
    }

    fn elapsed(&self) -> Duration {
        self.state.lock().unwrap().1
    }

    fn sleep(&self, d: Duration) {
        let mut state = self.state.lock().unwrap();
        state.0 += chrono::Duration::from_std(d).unwrap_or(chrono::Duration::zero());
        state.1 += d;
    }
}

/// Runs one probe to completion and returns the measurement. Nothing is
/// persisted; the caller decides what to do with the sample.
///
/// The command runs under `/bin/sh -c`. Completion means child exit: exit 0
/// is `ok`, nonzero is `fail`, and exceeding the timeout kills the child and
/// records `timeout` with the duration clamped to the timeout value.
pub fn run_probe(spec: &ProbeSpec, clock: &dyn Clock) -> ProbeSample {
    let timestamp = clock.now_utc();
    let start = clock.elapsed();
    let sample = |duration: f64, status: ProbeStatus| ProbeSample {
        timestamp,
        app: spec.name.clone(),
        duration,
        status,
    };

    let mut child = match Command::new("/bin/sh")
        .arg("-c")
        .arg(&spec.command)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
    {
        Ok(child) => child,
        Err(_) => {
            let elapsed = (clock.elapsed() - start).as_secs_f64();
            return sample(elapsed, ProbeStatus::Fail);
        }
    };

    loop {
        match child.try_wait() {
            Ok(Some(exit)) => {
                let elapsed = (clock.elapsed() - start).as_secs_f64();
                let status = if exit.success() {
                    ProbeStatus::Ok
                } else {
                    ProbeStatus::Fail
                };
                return sample(elapsed, status);
            }
            Ok(None) => {
                let elapsed = (clock.elapsed() - start).as_secs_f64();
                if elapsed >= spec.timeout {
                    let _ = child.kill();
                    let _ = child.wait();
                    // Clamp so `duration <= timeout` holds even though the
                    // polling loop detected the overrun a little late.
                    return sample(spec.timeout, ProbeStatus::Timeout);
                }
                clock.sleep(POLL_INTERVAL);
            }
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                let elapsed = (clock.elapsed() - start).as_secs_f64();
                return sample(elapsed, ProbeStatus::Fail);
            }
        }
    }
}

/// Runs a schedule to completion, appending one log line per probe run.
///
/// Probes run strictly sequentially in `order` within each cycle. Cycle `n`
/// starts no earlier than `start + n * interval`; an overrunning cycle
/// delays the next one rather than back-dating anything. Each line is
/// flushed as written, so a crash leaves a full-line log behind. A sink
/// write failure aborts the run with the partial log intact; a probe
/// failure does not.
///
/// Returns the number of complete cycles executed.
pub fn run_schedule(
    schedule: &Schedule,
    sink: &mut dyn Write,
    clock: &dyn Clock,
) -> Result<u64, ProbeError> {
    schedule.validate()?;
    let mut probes: Vec<&ProbeSpec> = schedule.probes.iter().collect();
    probes.sort_by_key(|p| p.order);

    let start = clock.elapsed();
    let mut completed = 0u64;
    loop {
        if let Some(limit) = schedule.cycles {
            if completed >= limit {
                return Ok(completed);
            }
        }
        let target = start + Duration::from_secs_f64(schedule.interval * completed as f64);
        let now = clock.elapsed();
        if now < target {
            clock.sleep(target - now);
        }
        for spec in &probes {
            let sample = run_probe(spec, clock);
            writeln!(sink, "{}", render_line(&sample))?;
            sink.flush()?;
        }
        completed += 1;
    }
}

/// Renders a sample as one log line: four tab-separated fields of
/// RFC 3339 UTC timestamp, app name, duration to two decimals, and status.
pub fn render_line(sample: &ProbeSample) -> String {
    format!(
        "{}\t{}\t{:.2}\t{}",
        sample.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
        sample.app,
        sample.duration,
        sample.status
    )
}

/// Parses one log line. Offset timestamps are accepted and normalized to
/// UTC; everything else about the four-field format is strict.
pub fn parse_line(line: &str) -> Result<ProbeSample, ProbeError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(ProbeError::Parse(format!(
            "expected 4 tab-separated fields, got {}",
            fields.len()
        )));
    }
    let timestamp = DateTime::parse_from_rfc3339(fields[0])
        .map_err(|e| ProbeError::Parse(format!("bad timestamp {:?}: {e}", fields[0])))?
        .with_timezone(&Utc);
    let app = fields[1];
    if app.is_empty() {
        return Err(ProbeError::Parse("empty app name".into()));
    }
    let duration: f64 = fields[2]
        .parse()
        .map_err(|e| ProbeError::Parse(format!("bad duration {:?}: {e}", fields[2])))?;
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(ProbeError::Parse(format!(
            "duration must be finite and nonnegative, got {duration}"
        )));
    }
    let status: ProbeStatus = fields[3].parse()?;
    Ok(ProbeSample {
        timestamp,
        app: app.to_string(),
        duration,
        status,
    })
}

/// Epoch for synthetic sample timestamps.
fn synth_epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(1999, 6, 1, 17, 0, 0).unwrap()
}

/// Spacing between synthetic samples, mirroring a 15-minute probe cycle.
const SYNTH_SPACING_SECS: i64 = 900;

/// Generates `n` gamma-distributed samples with a deterministic seed.
///
/// Durations follow Gamma(shape, scale); timestamps are synthetic and evenly
/// spaced at 15-minute intervals under the app name `synth`. Equal seeds
/// yield identical sample lists.
pub fn synth_samples(
    shape: f64,
    scale: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<ProbeSample>, ProbeError> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(ProbeError::BadShape(shape));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(ProbeError::BadScale(scale));
    }
    let gamma = Gamma::new(shape, scale).map_err(|_| ProbeError::BadShape(shape))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let epoch = synth_epoch();
    Ok((0..n)
        .map(|i| ProbeSample {
            timestamp: epoch + chrono::Duration::seconds(SYNTH_SPACING_SECS * i as i64),
            app: "synth".to_string(),
            duration: gamma.sample(&mut rng),
            status: ProbeStatus::Ok,
        })
        .collect())
}

/// Parsed schedule config file. All fields are optional so command-line
/// flags can fill or override them.
///
/// The grammar is line-oriented; `#` starts a comment and blank lines are
/// ignored:
///
/// ```text
/// interval 900
/// cycles 4
/// log /var/tmp/probe.log
/// probe appA=/usr/bin/appA --launch,30
/// probe appB=/usr/bin/appB,45
/// ```
///
/// A `probe` value is `name=command,timeout`; the command may itself contain
/// commas, so the timeout is split off at the last comma.
#[derive(Debug, Default, Clone)]
pub struct ScheduleConfig {
    pub interval: Option<f64>,
    pub cycles: Option<u64>,
    pub log: Option<std::path::PathBuf>,
    pub probes: Vec<ProbeSpec>,
}

pub fn parse_schedule_config(text: &str) -> Result<ScheduleConfig, ProbeError> {
    let mut config = ScheduleConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |detail: String| ProbeError::Config {
            line: idx + 1,
            detail,
        };
        let (key, value) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| bad(format!("expected `key value`, got {line:?}")))?;
        let value = value.trim();
        match key {
            "interval" => {
                config.interval =
                    Some(value.parse().map_err(|e| bad(format!("bad interval: {e}")))?)
            }
            "cycles" => {
                config.cycles = Some(value.parse().map_err(|e| bad(format!("bad cycles: {e}")))?)
            }
            "log" => config.log = Some(value.into()),
            "probe" => {
                let (name, rest) = value
                    .split_once('=')
                    .ok_or_else(|| bad("probe wants name=command,timeout".into()))?;
                let (command, timeout) = rest
                    .rsplit_once(',')
                    .ok_or_else(|| bad("probe wants name=command,timeout".into()))?;
                let timeout: f64 = timeout
                    .trim()
                    .parse()
                    .map_err(|e| bad(format!("bad timeout: {e}")))?;
                let spec = ProbeSpec {
                    name: name.trim().to_string(),
                    command: command.trim().to_string(),
                    timeout,
                    order: config.probes.len(),
                };
                spec.validate()
                    .map_err(|e| bad(e.to_string()))?;
                config.probes.push(spec);
            }
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(name: &str, command: &str, timeout: f64) -> ProbeSpec {
        ProbeSpec {
            name: name.into(),
            command: command.into(),
            timeout,
            order: 0,
        }
    }

    #[test]
    fn zero_work_probe_is_ok_and_fast() {
        let clock = SystemClock::new();
        let sample = run_probe(&spec("quick", "true", 10.0), &clock);
        assert_eq!(sample.status, ProbeStatus::Ok);
        assert!(sample.duration < 0.5, "duration {}", sample.duration);
    }

    #[test]
    fn sleeping_probe_duration_tracks_host_clock() {
        let clock = SystemClock::new();
        let before = std::time::Instant::now();
        let sample = run_probe(&spec("nap", "sleep 0.2", 10.0), &clock);
        let host = before.elapsed().as_secs_f64();
        assert_eq!(sample.status, ProbeStatus::Ok);
        assert!(sample.duration >= 0.2, "duration {}", sample.duration);
        assert!(
            sample.duration <= host + 0.01,
            "duration {} exceeds host-observed {host}",
            sample.duration
        );
    }

    #[test]
    fn timeout_kills_and_clamps_duration() {
        let clock = SystemClock::new();
        let before = std::time::Instant::now();
        let sample = run_probe(&spec("stuck", "sleep 5", 0.3), &clock);
        assert_eq!(sample.status, ProbeStatus::Timeout);
        assert_eq!(sample.duration, 0.3);
        assert!(
            before.elapsed().as_secs_f64() < 2.0,
            "child was not killed promptly"
        );
    }

    #[test]
    fn nonzero_exit_is_fail() {
        let clock = SystemClock::new();
        let sample = run_probe(&spec("bad", "exit 3", 10.0), &clock);
        assert_eq!(sample.status, ProbeStatus::Fail);
    }

    #[test]
    fn unspawnable_shell_is_fail() {
        // /bin/sh itself always spawns, so drive the failure through a
        // command the shell cannot find; exit status is nonzero.
        let clock = SystemClock::new();
        let sample = run_probe(&spec("gone", "/no/such/binary/anywhere", 10.0), &clock);
        assert_eq!(sample.status, ProbeStatus::Fail);
    }

    #[test]
    fn schedule_runs_probes_in_order_for_each_cycle() {
        let schedule = Schedule {
            interval: 0.05,
            probes: vec![
                ProbeSpec { order: 2, ..spec("c", "true", 5.0) },
                ProbeSpec { order: 0, ..spec("a", "true", 5.0) },
                ProbeSpec { order: 1, ..spec("b", "true", 5.0) },
            ],
            cycles: Some(2),
        };
        let mut sink = Vec::new();
        let clock = SystemClock::new();
        let completed = run_schedule(&schedule, &mut sink, &clock).unwrap();
        assert_eq!(completed, 2);
        let log = String::from_utf8(sink).unwrap();
        let apps: Vec<&str> = log
            .lines()
            .map(|l| parse_line(l).unwrap())
            .map(|s| match s.app.as_str() {
                "a" => "a",
                "b" => "b",
                "c" => "c",
                _ => panic!("unexpected app"),
            })
            .collect();
        assert_eq!(apps, ["a", "b", "c", "a", "b", "c"]);
    }

    #[test]
    fn zero_cycles_yields_empty_log() {
        let schedule = Schedule {
            interval: 1.0,
            probes: vec![spec("a", "true", 5.0)],
            cycles: Some(0),
        };
        let mut sink = Vec::new();
        let clock = SystemClock::new();
        assert_eq!(run_schedule(&schedule, &mut sink, &clock).unwrap(), 0);
        assert!(sink.is_empty());
    }

    #[test]
    fn overrunning_probe_delays_but_never_backdates() {
        let schedule = Schedule {
            interval: 0.1,
            probes: vec![spec("slow", "sleep 0.25", 5.0)],
            cycles: Some(2),
        };
        let mut sink = Vec::new();
        let clock = SystemClock::new();
        let before = std::time::Instant::now();
        run_schedule(&schedule, &mut sink, &clock).unwrap();
        // Two 0.25 s probes back to back: the second cycle cannot wait for
        // the 0.1 s grid, so total elapsed is ~0.5 s, not 0.35 s.
        assert!(before.elapsed().as_secs_f64() >= 0.45);
        let log = String::from_utf8(sink).unwrap();
        let samples: Vec<ProbeSample> =
            log.lines().map(|l| parse_line(l).unwrap()).collect();
        assert_eq!(samples.len(), 2);
        assert!(samples[0].timestamp <= samples[1].timestamp);
    }

    #[test]
    fn schedule_on_a_virtual_clock_spaces_cycles_by_interval() {
        let epoch = Utc.with_ymd_and_hms(1999, 6, 1, 17, 0, 0).unwrap();
        let schedule = Schedule {
            interval: 900.0,
            probes: vec![spec("a", "true", 5.0)],
            cycles: Some(3),
        };
        let mut sink = Vec::new();
        let clock = VirtualClock::starting_at(epoch);
        run_schedule(&schedule, &mut sink, &clock).unwrap();
        let log = String::from_utf8(sink).unwrap();
        let stamps: Vec<DateTime<Utc>> = log
            .lines()
            .map(|l| parse_line(l).unwrap().timestamp)
            .collect();
        assert_eq!(stamps.len(), 3);
        for (i, stamp) in stamps.iter().enumerate() {
            let offset = (*stamp - epoch).num_seconds();
            // Each probe consumes a few 2 ms polls of virtual time, so the
            // cycle start drifts below one second off the ideal grid.
            assert!(
                (offset - 900 * i as i64).unsigned_abs() < 1,
                "cycle {i} started at +{offset}s"
            );
        }
    }

    #[test]
    fn sink_write_failure_aborts() {
        struct FailingSink;
        impl Write for FailingSink {
            fn write(&mut self, _: &[u8]) -> io::Result<usize> {
                Err(io::Error::other("sink full"))
            }
            fn flush(&mut self) -> io::Result<()> {
                Ok(())
            }
        }
        let schedule = Schedule {
            interval: 0.05,
            probes: vec![spec("a", "true", 5.0)],
            cycles: Some(2),
        };
        let clock = SystemClock::new();
        let err = run_schedule(&schedule, &mut FailingSink, &clock).unwrap_err();
        assert!(matches!(err, ProbeError::Sink(_)));
    }

    #[test]
    fn schedule_validation_rejects_duplicates_and_empty() {
        let clock = SystemClock::new();
        let mut sink = Vec::new();
        let dup = Schedule {
            interval: 1.0,
            probes: vec![spec("a", "true", 5.0), spec("a", "true", 5.0)],
            cycles: Some(1),
        };
        assert!(matches!(
            run_schedule(&dup, &mut sink, &clock),
            Err(ProbeError::DuplicateName(_))
        ));
        let empty = Schedule {
            interval: 1.0,
            probes: vec![],
            cycles: Some(1),
        };
        assert!(matches!(
            run_schedule(&empty, &mut sink, &clock),
            Err(ProbeError::NoProbes)
        ));
    }

    #[test]
    fn log_line_round_trips_the_documented_example() {
        let line = "1999-06-01T18:22:00Z\tappC\t773.94\tok";
        let sample = parse_line(line).unwrap();
        assert_eq!(sample.app, "appC");
        assert_eq!(sample.duration, 773.94);
        assert_eq!(sample.status, ProbeStatus::Ok);
        assert_eq!(render_line(&sample), line);
    }

    #[test]
    fn parse_line_rejects_malformed_input() {
        assert!(parse_line("not a log line").is_err());
        assert!(parse_line("1999-06-01T18:22:00Z\tappC\t773.94").is_err());
        assert!(parse_line("1999-06-01T18:22:00Z\tappC\t-1.00\tok").is_err());
        assert!(parse_line("1999-06-01T18:22:00Z\tappC\t1.00\tmaybe").is_err());
        assert!(parse_line("yesterday\tappC\t1.00\tok").is_err());
        assert!(parse_line("1999-06-01T18:22:00Z\t\t1.00\tok").is_err());
    }

    #[test]
    fn synth_is_deterministic_per_seed() {
        let a = synth_samples(0.25, 56.92, 64, 7).unwrap();
        let b = synth_samples(0.25, 56.92, 64, 7).unwrap();
        let c = synth_samples(0.25, 56.92, 64, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn synth_spacing_and_count() {
        assert!(synth_samples(1.0, 1.0, 0, 1).unwrap().is_empty());
        let samples = synth_samples(1.0, 1.0, 3, 1).unwrap();
        assert_eq!(samples.len(), 3);
        let gap = samples[1].timestamp - samples[0].timestamp;
        assert_eq!(gap.num_seconds(), 900);
        assert!(samples.iter().all(|s| s.app == "synth"));
        assert!(samples.iter().all(|s| s.duration >= 0.0));
    }

    #[test]
    fn synth_exponential_special_case_mean() {
        let samples = synth_samples(1.0, 1.0, 100_000, 99).unwrap();
        let mean: f64 =
            samples.iter().map(|s| s.duration).sum::<f64>() / samples.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn synth_rejects_nonpositive_parameters() {
        assert!(matches!(
            synth_samples(0.0, 1.0, 1, 1),
            Err(ProbeError::BadShape(_))
        ));
        assert!(matches!(
            synth_samples(1.0, -2.0, 1, 1),
            Err(ProbeError::BadScale(_))
        ));
    }

    #[test]
    fn config_grammar_round_trip() {
        let text = "\
# probe cycle for the pool of launch hosts
interval 900
cycles 4
log /var/tmp/probe.log

probe appA=/usr/bin/appA --launch,30   # trailing comment
probe appB=env LC_ALL=C appB,45
";
        let config = parse_schedule_config(text).unwrap();
        assert_eq!(config.interval, Some(900.0));
        assert_eq!(config.cycles, Some(4));
        assert_eq!(config.log.as_deref(), Some(std::path::Path::new("/var/tmp/probe.log")));
        assert_eq!(config.probes.len(), 2);
        assert_eq!(config.probes[0].name, "appA");
        assert_eq!(config.probes[0].command, "/usr/bin/appA --launch");
        assert_eq!(config.probes[0].timeout, 30.0);
        assert_eq!(config.probes[0].order, 0);
        assert_eq!(config.probes[1].command, "env LC_ALL=C appB");
        assert_eq!(config.probes[1].order, 1);
    }

    #[test]
    fn config_commas_in_command_split_at_last() {
        let config = parse_schedule_config("probe x=sh -c 'a,b,c',9\n").unwrap();
        assert_eq!(config.probes[0].command, "sh -c 'a,b,c'");
        assert_eq!(config.probes[0].timeout, 9.0);
    }

    #[test]
    fn config_errors_carry_line_numbers() {
        let err = parse_schedule_config("interval 900\nwat 7\n").unwrap_err();
        match err {
            ProbeError::Config { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    proptest! {
        /// Any sample expressible in the log format (two-decimal duration,
        /// whole-second timestamp) survives render → parse unchanged.
        #[test]
        fn log_round_trip(
            secs in 0i64..4_000_000_000i64,
            centis in 0u32..10_000_000u32,
            app_idx in 0usize..4,
            status_idx in 0usize..3,
        ) {
            let sample = ProbeSample {
                timestamp: Utc.timestamp_opt(secs, 0).unwrap(),
                app: ["appA", "appB", "appC", "x-11_probe.7"][app_idx].to_string(),
                duration: centis as f64 / 100.0,
                status: [ProbeStatus::Ok, ProbeStatus::Timeout, ProbeStatus::Fail][status_idx],
            };
            let back = parse_line(&render_line(&sample)).unwrap();
            prop_assert_eq!(back, sample);
        }

        /// Synthetic samples are reproducible and nonnegative for any seed.
        #[test]
        fn synth_determinism(seed in any::<u64>()) {
            let a = synth_samples(0.5, 2.0, 16, seed).unwrap();
            let b = synth_samples(0.5, 2.0, 16, seed).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.iter().all(|s| s.duration >= 0.0));
        }
    }
}
