//! Experiment harnesses: parameter sweeps, preprocessing A/B runs and
//! per-log latency measurement.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::drain::{DrainConfig, DrainParser};
use crate::error::{Error, Result};
use crate::eval::{self, on_off, EvalReport, ImprovementRatio, RunLabel};
use crate::ingest::{self, ContentExtractor, DatasetManifest, GroundTruth, RawStream};
use crate::model::{run_parser, LogParser, LogRecord, TokenSequence};
use crate::preprocess::{preprocess_content, MaskSet};
use crate::spell::{SpellConfig, SpellParser};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParserKind {
    Spell,
    Drain,
}

impl ParserKind {
    pub fn name(&self) -> &'static str {
        match self {
            ParserKind::Spell => "spell",
            ParserKind::Drain => "drain",
        }
    }
}

impl fmt::Display for ParserKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParserKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spell" => Ok(ParserKind::Spell),
            "drain" => Ok(ParserKind::Drain),
            other => Err(Error::Config(format!(
                "unknown parser {other:?} (expected spell or drain)"
            ))),
        }
    }
}

/// A parser together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParserParams {
    Spell(SpellConfig),
    Drain(DrainConfig),
}

impl ParserParams {
    pub fn kind(&self) -> ParserKind {
        match self {
            ParserParams::Spell(_) => ParserKind::Spell,
            ParserParams::Drain(_) => ParserKind::Drain,
        }
    }

    /// Default parameters: tau 0.5; depth 4, st 0.4, 100 children.
    pub fn default_for(kind: ParserKind) -> Self {
        match kind {
            ParserKind::Spell => ParserParams::Spell(SpellConfig::default()),
            ParserKind::Drain => ParserParams::Drain(DrainConfig::default()),
        }
    }

    pub fn build(&self) -> Box<dyn LogParser + Send> {
        match *self {
            ParserParams::Spell(c) => Box::new(SpellParser::new(c)),
            ParserParams::Drain(c) => Box::new(DrainParser::new(c)),
        }
    }

    /// `tau=0.50` or `depth=4;st=0.40`.
    pub fn describe(&self) -> String {
        match self {
            ParserParams::Spell(c) => format!("tau={:.2}", c.tau),
            ParserParams::Drain(c) => format!("depth={};st={:.2}", c.depth, c.st),
        }
    }
}

fn step_values(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| ((start + i as f64 * step) * 1e6).round() / 1e6)
        .collect()
}

/// Parameter grid for sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub spell_tau: Vec<f64>,
    pub drain_depth: Vec<usize>,
    pub drain_st: Vec<f64>,
    pub max_children: usize,
}

impl Default for SweepGrid {
    /// tau 0.05..=0.95 step 0.05; depth 3..=8; st 0.1..=0.9 step 0.1.
    fn default() -> Self {
        SweepGrid {
            spell_tau: step_values(0.05, 0.95, 0.05),
            drain_depth: (3..=8).collect(),
            drain_st: step_values(0.1, 0.9, 0.1),
            max_children: 100,
        }
    }
}

impl SweepGrid {
    /// Grid points for one parser, in row-major order (depth, then st).
    pub fn points(&self, kind: ParserKind) -> Result<Vec<ParserParams>> {
        let points: Vec<ParserParams> = match kind {
            ParserKind::Spell => self
                .spell_tau
                .iter()
                .map(|&tau| SpellConfig::new(tau).map(ParserParams::Spell))
                .collect::<Result<_>>()?,
            ParserKind::Drain => self
                .drain_depth
                .iter()
                .flat_map(|&d| self.drain_st.iter().map(move |&st| (d, st)))
                .map(|(d, st)| DrainConfig::new(d, st, self.max_children).map(ParserParams::Drain))
                .collect::<Result<_>>()?,
        };
        if points.is_empty() {
            return Err(Error::Config(format!("empty {kind} sweep grid")));
        }
        Ok(points)
    }
}

/// A labeled sample ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Sample {
    pub dataset: String,
    pub records: Vec<LogRecord>,
    pub truth: GroundTruth,
    pub masks: MaskSet,
}

impl Sample {
    pub fn load(manifest: &DatasetManifest) -> Result<Self> {
        let (records, truth) = ingest::load_sample(manifest)?;
        Ok(Sample {
            dataset: manifest.name.clone(),
            records,
            truth,
            masks: manifest.masks()?,
        })
    }

    pub fn tokens(&self, preprocessing: bool) -> Vec<TokenSequence> {
        self.records
            .iter()
            .map(|r| preprocess_content(&r.content, &self.masks, preprocessing))
            .collect()
    }
}

/// Runs `params` over pre-tokenized messages and scores the grouping.
pub fn evaluate(
    params: &ParserParams,
    tokens: &[TokenSequence],
    truth: &GroundTruth,
) -> Result<EvalReport> {
    let mut parser = params.build();
    let assignment = run_parser(&mut parser, tokens.iter().cloned().enumerate());
    eval::grouping_accuracy(&assignment, truth)
}

/// Evaluates one configuration on a sample.
pub fn evaluate_sample(
    sample: &Sample,
    params: &ParserParams,
    preprocessing: bool,
) -> Result<EvalReport> {
    evaluate(params, &sample.tokens(preprocessing), &sample.truth)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub dataset: String,
    pub params: ParserParams,
    pub preprocessing: bool,
    /// Error text when the point failed.
    pub report: std::result::Result<EvalReport, String>,
    pub runtime_ms: f64,
}

impl SweepRow {
    pub fn accuracy(&self) -> Option<f64> {
        self.report.as_ref().ok().map(|r| r.accuracy)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub kind: ParserKind,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Header of the sweep CSV; the parameter column is `tau` or `depth`.
    pub fn header(kind: ParserKind) -> [&'static str; 8] {
        let param = match kind {
            ParserKind::Spell => "tau",
            ParserKind::Drain => "depth",
        };
        [
            "dataset",
            "parser",
            "preprocessing",
            param,
            "st",
            "accuracy",
            "predicted_templates",
            "runtime_ms",
        ]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::csv("<sweep csv>", e);
        w.write_record(Self::header(self.kind)).map_err(wrap)?;
        for row in &self.rows {
            let (param, st) = match row.params {
                ParserParams::Spell(c) => (format!("{:.2}", c.tau), String::new()),
                ParserParams::Drain(c) => (c.depth.to_string(), format!("{:.2}", c.st)),
            };
            let (accuracy, templates) = match &row.report {
                Ok(r) => (
                    format!("{:.4}", r.accuracy),
                    r.predicted_template_count.to_string(),
                ),
                Err(_) => (String::new(), String::new()),
            };
            w.write_record([
                row.dataset.as_str(),
                row.params.kind().name(),
                on_off(row.preprocessing),
                &param,
                &st,
                &accuracy,
                &templates,
                &format!("{:.3}", row.runtime_ms),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("<sweep csv>", e))?;
        Ok(())
    }

    pub fn errors(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.report.is_err())
    }

    /// Writes `dataset,parser,preprocessing,parameters,error` rows.
    pub fn write_errors_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::csv("<errors csv>", e);
        w.write_record(["dataset", "parser", "preprocessing", "parameters", "error"])
            .map_err(wrap)?;
        for row in self.errors() {
            w.write_record([
                row.dataset.as_str(),
                row.params.kind().name(),
                on_off(row.preprocessing),
                &row.params.describe(),
                row.report.as_ref().err().map(String::as_str).unwrap_or(""),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("<errors csv>", e))?;
        Ok(())
    }

    /// Highest-accuracy row; ties resolve to the earliest grid point.
    pub fn best(&self) -> Option<&SweepRow> {
        let mut best: Option<&SweepRow> = None;
        for row in &self.rows {
            if let Some(acc) = row.accuracy() {
                if best.and_then(SweepRow::accuracy).is_none_or(|b| acc > b) {
                    best = Some(row);
                }
            }
        }
        best
    }
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// Sweeps a grid over an already loaded sample. Each point gets a fresh
/// parser; failures are recorded on their row.
pub fn run_sweep_on(
    sample: &Sample,
    kind: ParserKind,
    grid: &SweepGrid,
    preprocessing: bool,
    workers: usize,
) -> Result<SweepResult> {
    let points = grid.points(kind)?;
    let tokens = sample.tokens(preprocessing);
    let pool = worker_pool(workers.max(1))?;
    let rows = pool.install(|| {
        points
            .par_iter()
            .map(|params| {
                let start = Instant::now();
                let report = evaluate(params, &tokens, &sample.truth).map_err(|e| e.to_string());
                SweepRow {
                    dataset: sample.dataset.clone(),
                    params: *params,
                    preprocessing,
                    report,
                    runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                }
            })
            .collect()
    });
    Ok(SweepResult { kind, rows })
}

/// Loads the manifest's sample and sweeps it. A sample that cannot be
/// loaded marks every point as failed.
pub fn run_sweep(
    kind: ParserKind,
    grid: &SweepGrid,
    manifest: &DatasetManifest,
    preprocessing: bool,
    workers: usize,
) -> Result<SweepResult> {
    match Sample::load(manifest) {
        Ok(sample) => run_sweep_on(&sample, kind, grid, preprocessing, workers),
        Err(e) => {
            let message = e.to_string();
            let rows = grid
                .points(kind)?
                .into_iter()
                .map(|params| SweepRow {
                    dataset: manifest.name.clone(),
                    params,
                    preprocessing,
                    report: Err(message.clone()),
                    runtime_ms: 0.0,
                })
                .collect();
            Ok(SweepResult { kind, rows })
        }
    }
}

/// Paired runs with and without masking.
#[derive(Debug, Clone)]
pub struct AbResult {
    pub dataset: String,
    pub params: ParserParams,
    pub with: EvalReport,
    pub without: EvalReport,
    pub ratio: ImprovementRatio,
}

impl AbResult {
    pub const CSV_HEADER: [&'static str; 9] = [
        "dataset",
        "parser",
        "parameters",
        "accuracy_without",
        "templates_without",
        "accuracy_with",
        "templates_with",
        "accuracy_ratio",
        "templates_ratio",
    ];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::csv("<ab csv>", e);
        w.write_record(Self::CSV_HEADER).map_err(wrap)?;
        w.write_record([
            self.dataset.clone(),
            self.params.kind().name().to_owned(),
            self.params.describe(),
            format!("{:.4}", self.without.accuracy),
            self.without.predicted_template_count.to_string(),
            format!("{:.4}", self.with.accuracy),
            self.with.predicted_template_count.to_string(),
            self.ratio.accuracy.to_string(),
            self.ratio.templates.to_string(),
        ])
        .map_err(wrap)?;
        w.flush().map_err(|e| Error::io("<ab csv>", e))?;
        Ok(())
    }

    /// One line in the style `0.91(x1.5) 180(x0.42)`.
    pub fn summary_line(&self) -> String {
        format!(
            "{} {}: without {:.2} / {} templates, with {:.2}({}) / {}({})",
            self.dataset,
            self.params.kind(),
            self.without.accuracy,
            self.without.predicted_template_count,
            self.with.accuracy,
            self.ratio.accuracy,
            self.with.predicted_template_count,
            self.ratio.templates
        )
    }
}

pub fn run_ab_on(sample: &Sample, params: &ParserParams) -> Result<AbResult> {
    let with = evaluate_sample(sample, params, true)?;
    let without = evaluate_sample(sample, params, false)?;
    let ratio = eval::improvement_ratio(&with, &without);
    Ok(AbResult {
        dataset: sample.dataset.clone(),
        params: *params,
        with,
        without,
        ratio,
    })
}

pub fn run_ab(params: &ParserParams, manifest: &DatasetManifest) -> Result<AbResult> {
    run_ab_on(&Sample::load(manifest)?, params)
}

/// Label used in eval CSV rows.
pub fn run_label(dataset: &str, params: &ParserParams, preprocessing: bool) -> RunLabel {
    RunLabel {
        dataset: dataset.to_owned(),
        parser: params.kind().name().to_owned(),
        preprocessing,
        parameters: params.describe(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencySummary {
    pub mean_ns: f64,
    pub median_ns: u64,
    pub p99_ns: u64,
    pub p999_ns: u64,
    pub max_ns: u64,
    pub max_over_mean: f64,
}

/// Per-log processing times of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub elapsed_ns: Vec<u64>,
    /// `(logs processed, cumulative ns)` every `sample_every` logs plus the
    /// final count.
    pub cumulative: Vec<(usize, u64)>,
    pub summary: LatencySummary,
    pub total_logs: usize,
    pub timed_out: bool,
    pub clock_resolution_ns: u64,
    pub warnings: Vec<String>,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl LatencySummary {
    pub fn from_samples(elapsed_ns: &[u64]) -> Self {
        if elapsed_ns.is_empty() {
            return LatencySummary {
                mean_ns: 0.0,
                median_ns: 0,
                p99_ns: 0,
                p999_ns: 0,
                max_ns: 0,
                max_over_mean: 0.0,
            };
        }
        let mut sorted = elapsed_ns.to_vec();
        sorted.sort_unstable();
        let total: u128 = elapsed_ns.iter().map(|&v| v as u128).sum();
        let mean = total as f64 / elapsed_ns.len() as f64;
        let max = *sorted.last().unwrap();
        LatencySummary {
            mean_ns: mean,
            median_ns: percentile(&sorted, 0.5),
            p99_ns: percentile(&sorted, 0.99),
            p999_ns: percentile(&sorted, 0.999),
            max_ns: max,
            max_over_mean: if mean > 0.0 { max as f64 / mean } else { 0.0 },
        }
    }
}

impl LatencyReport {
    pub fn empty() -> Self {
        LatencyReport {
            elapsed_ns: Vec::new(),
            cumulative: Vec::new(),
            summary: LatencySummary::from_samples(&[]),
            total_logs: 0,
            timed_out: false,
            clock_resolution_ns: 0,
            warnings: Vec::new(),
        }
    }

    pub fn cumulative_total_ns(&self) -> u64 {
        self.cumulative.last().map_or(0, |&(_, ns)| ns)
    }

    /// Internal consistency: mean times count within 1% of the cumulative
    /// total, ordered percentiles, non-decreasing cumulative series.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        if self.total_logs != self.elapsed_ns.len() {
            return Err(format!(
                "total_logs {} != {} samples",
                self.total_logs,
                self.elapsed_ns.len()
            ));
        }
        if self.total_logs == 0 {
            return Ok(());
        }
        let total = self.cumulative_total_ns() as f64;
        let estimate = self.summary.mean_ns * self.total_logs as f64;
        if (estimate - total).abs() > 0.01 * total.max(1.0) {
            return Err(format!(
                "mean * count = {estimate} but cumulative total = {total}"
            ));
        }
        let s = &self.summary;
        if !(s.max_ns >= s.p999_ns && s.p999_ns >= s.p99_ns && s.p99_ns >= s.median_ns) {
            return Err(format!("percentiles out of order: {s:?}"));
        }
        if self
            .cumulative
            .windows(2)
            .any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1)
        {
            return Err("cumulative series decreases".into());
        }
        if self.cumulative.last().map(|c| c.0) != Some(self.total_logs) {
            return Err("cumulative series does not end at the total".into());
        }
        Ok(())
    }

    pub fn write_samples_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::csv("<latency csv>", e);
        w.write_record(["log_index", "elapsed_ns"]).map_err(wrap)?;
        for (i, ns) in self.elapsed_ns.iter().enumerate() {
            w.write_record([i.to_string(), ns.to_string()])
                .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("<latency csv>", e))?;
        Ok(())
    }

    pub fn write_cumulative_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::csv("<cumulative csv>", e);
        w.write_record(["logs_processed", "cumulative_ns"])
            .map_err(wrap)?;
        for (n, ns) in &self.cumulative {
            w.write_record([n.to_string(), ns.to_string()])
                .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("<cumulative csv>", e))?;
        Ok(())
    }

    /// `key = value` lines.
    pub fn summary_text(&self, label: &str) -> String {
        let s = &self.summary;
        let mut out = format!(
            "run = \"{label}\"\n\
             total_logs = {}\n\
             timed_out = {}\n\
             total_ns = {}\n\
             mean_ns = {:.1}\n\
             median_ns = {}\n\
             p99_ns = {}\n\
             p999_ns = {}\n\
             max_ns = {}\n\
             max_over_mean = {:.1}\n\
             clock_resolution_ns = {}\n",
            self.total_logs,
            self.timed_out,
            self.cumulative_total_ns(),
            s.mean_ns,
            s.median_ns,
            s.p99_ns,
            s.p999_ns,
            s.max_ns,
            s.max_over_mean,
            self.clock_resolution_ns,
        );
        for w in &self.warnings {
            out.push_str(&format!("warning = {w:?}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingOptions {
    pub preprocessing: bool,
    /// Stop after this many records; `None` is unlimited.
    pub limit: Option<usize>,
    /// Cumulative series sampling period.
    pub sample_every: usize,
    /// Wall-clock budget; the run stops cleanly when exceeded.
    pub budget: Option<Duration>,
}

impl Default for TimingOptions {
    fn default() -> Self {
        TimingOptions {
            preprocessing: true,
            limit: Some(2_000_000),
            sample_every: 1000,
            budget: None,
        }
    }
}

/// Smallest positive step of the monotonic clock observed over a few reads.
pub fn clock_resolution_ns() -> u64 {
    let mut best = u64::MAX;
    for _ in 0..200 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min((b - a).as_nanos() as u64);
    }
    best
}

/// Times masking + parsing of each record. Reading the records is outside
/// the measured span.
pub fn time_stream<P, I>(
    parser: &mut P,
    records: I,
    masks: &MaskSet,
    options: &TimingOptions,
) -> Result<LatencyReport>
where
    P: LogParser + ?Sized,
    I: IntoIterator<Item = Result<LogRecord>>,
{
    let mut report = LatencyReport::empty();
    if options.limit == Some(0) {
        return Ok(report);
    }
    report.clock_resolution_ns = clock_resolution_ns();
    if report.clock_resolution_ns > 1_000 {
        report.warnings.push(format!(
            "clock resolution {} ns is coarser than 1 us",
            report.clock_resolution_ns
        ));
    }
    let every = options.sample_every.max(1);
    let started = Instant::now();
    let mut cumulative: u64 = 0;
    for record in records {
        if options.limit.is_some_and(|l| report.elapsed_ns.len() >= l) {
            break;
        }
        if let Some(budget) = options.budget {
            if started.elapsed() > budget {
                report.timed_out = true;
                report
                    .warnings
                    .push(format!("stopped after exceeding the {budget:?} budget"));
                break;
            }
        }
        let record = record?;
        let t0 = Instant::now();
        let tokens = preprocess_content(&record.content, masks, options.preprocessing);
        parser.feed(&tokens);
        let ns = t0.elapsed().as_nanos() as u64;
        cumulative += ns;
        report.elapsed_ns.push(ns);
        if report.elapsed_ns.len().is_multiple_of(every) {
            report
                .cumulative
                .push((report.elapsed_ns.len(), cumulative));
        }
    }
    report.total_logs = report.elapsed_ns.len();
    if report.total_logs > 0 && report.cumulative.last().map(|c| c.0) != Some(report.total_logs) {
        report.cumulative.push((report.total_logs, cumulative));
    }
    report.summary = LatencySummary::from_samples(&report.elapsed_ns);
    Ok(report)
}

/// Times a parser over a log file read with the manifest's line format.
pub fn run_timing_file(
    params: &ParserParams,
    path: &Path,
    extractor: ContentExtractor,
    masks: &MaskSet,
    options: &TimingOptions,
) -> Result<LatencyReport> {
    let stream = RawStream::open(path, extractor)?;
    let mut parser = params.build();
    time_stream(&mut parser, stream, masks, options)
}

/// Times a parser over the manifest's full corpus.
pub fn run_timing(
    params: &ParserParams,
    manifest: &DatasetManifest,
    options: &TimingOptions,
) -> Result<LatencyReport> {
    run_timing_file(
        params,
        &manifest.raw_path,
        manifest.extractor()?,
        &manifest.masks()?,
        options,
    )
}
