use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use logstruct::bench::{self, Sample, TimingOptions};
use logstruct::eval::EVAL_CSV_HEADER;
use logstruct::ingest::{ContentExtractor, RawStream};
use logstruct::preprocess::preprocess_content;
use logstruct::{
    DatasetManifest, DrainConfig, Error, MaskSet, ParserKind, ParserParams, SpellConfig, SweepGrid,
};

const EXIT_FATAL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

/// Online log template mining: parse, evaluate, sweep and time Spell and Drain.
#[derive(Debug, Parser)]
#[command(name = "logstruct", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a log stream and print one CSV row per line.
    Parse(Opts),
    /// Score a parser on a manifest's labeled sample.
    Eval(Opts),
    /// Score every point of a parameter grid.
    Sweep(Opts),
    /// Score one configuration with and without masking.
    Ab(Opts),
    /// Measure per-log latency over a manifest's corpus.
    Bench(Opts),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Spell,
    Drain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
struct Opts {
    #[arg(long, value_enum, default_value = "spell")]
    parser: Kind,
    /// Spell threshold in [0, 1]; `sweep` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    tau: Vec<f64>,
    /// Drain tree depth (>= 3); `sweep` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    depth: Vec<usize>,
    /// Drain similarity threshold in [0, 1]; `sweep` accepts a list.
    #[arg(long, value_delimiter = ',')]
    st: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    max_children: usize,
    #[arg(long, value_enum, default_value = "on")]
    preprocess: Switch,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "LOGSTRUCT_OUT", default_value = ".")]
    out: PathBuf,
    /// Record cap for `bench`; 0 means unlimited.
    #[arg(long, default_value_t = 2_000_000)]
    limit: usize,
    /// Wall-clock budget in seconds for `bench`.
    #[arg(long)]
    budget: Option<f64>,
    /// Worker threads for `sweep`; defaults to the available cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Log file to read instead of the manifest's default.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Fatal(Error),
    Partial(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Usage(msg),
            other => Failure::Fatal(other),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn single<T: Copy>(values: &[T], flag: &str, default: T) -> Result<T, Failure> {
    match values {
        [] => Ok(default),
        [v] => Ok(*v),
        _ => Err(Failure::Usage(format!(
            "--{flag} takes one value for this command"
        ))),
    }
}

impl Opts {
    fn kind(&self) -> ParserKind {
        match self.parser {
            Kind::Spell => ParserKind::Spell,
            Kind::Drain => ParserKind::Drain,
        }
    }

    fn preprocessing(&self) -> bool {
        self.preprocess == Switch::On
    }

    fn params(&self) -> Result<ParserParams, Failure> {
        let d = DrainConfig::default();
        Ok(match self.kind() {
            ParserKind::Spell => ParserParams::Spell(SpellConfig::new(single(
                &self.tau,
                "tau",
                SpellConfig::default().tau,
            )?)?),
            ParserKind::Drain => ParserParams::Drain(DrainConfig::new(
                single(&self.depth, "depth", d.depth)?,
                single(&self.st, "st", d.st)?,
                self.max_children,
            )?),
        })
    }

    fn grid(&self) -> SweepGrid {
        let mut grid = SweepGrid {
            max_children: self.max_children,
            ..SweepGrid::default()
        };
        if !self.tau.is_empty() {
            grid.spell_tau = self.tau.clone();
        }
        if !self.depth.is_empty() {
            grid.drain_depth = self.depth.clone();
        }
        if !self.st.is_empty() {
            grid.drain_st = self.st.clone();
        }
        grid
    }

    fn manifest(&self) -> Result<Option<DatasetManifest>, Failure> {
        self.manifest
            .as_ref()
            .map(DatasetManifest::load)
            .transpose()
            .map_err(Failure::from)
    }

    fn require_manifest(&self) -> Result<DatasetManifest, Failure> {
        self.manifest()?
            .ok_or_else(|| Failure::Usage("--manifest is required for this command".into()))
    }

    fn output(
        &self,
        dataset: &str,
        subcommand: &str,
        suffix: &str,
    ) -> Result<(PathBuf, BufWriter<File>), Failure> {
        std::fs::create_dir_all(&self.out).map_err(|e| Failure::Fatal(Error::io(&self.out, e)))?;
        let path = self
            .out
            .join(format!("{dataset}_{}_{subcommand}{suffix}", self.kind()));
        let file = File::create(&path).map_err(|e| Failure::Fatal(Error::io(&path, e)))?;
        Ok((path, BufWriter::new(file)))
    }
}

/// Input file, dataset label, line extractor and masks for streaming commands.
fn stream_source(
    opts: &Opts,
    default: impl Fn(&DatasetManifest) -> PathBuf,
) -> Result<(PathBuf, String, ContentExtractor, MaskSet), Failure> {
    let manifest = opts.manifest()?;
    let input = match (&opts.input, &manifest) {
        (Some(p), _) => p.clone(),
        (None, Some(m)) => default(m),
        (None, None) => return Err(Failure::Usage("give --manifest or --input".into())),
    };
    Ok(match manifest {
        Some(m) => (input, m.name.clone(), m.extractor()?, m.masks()?),
        None => {
            let name = input
                .file_stem()
                .map_or_else(|| "input".to_owned(), |s| s.to_string_lossy().into_owned());
            (
                input,
                name,
                ContentExtractor::whole_line(),
                MaskSet::empty(),
            )
        }
    })
}

fn csv_error(path: &Path) -> impl Fn(logstruct::Error) -> Failure + '_ {
    move |e| match e {
        Error::Csv { source, .. } => Failure::Fatal(Error::csv(path, source)),
        Error::Io { source, .. } => Failure::Fatal(Error::io(path, source)),
        other => Failure::Fatal(other),
    }
}

fn cmd_parse(opts: &Opts) -> CmdResult {
    let params = opts.params()?;
    let (input, _, extractor, masks) = stream_source(opts, |m| m.sample_path.clone())?;
    let stream = RawStream::open(&input, extractor)?;
    let mut parser = params.build();
    let stdout = io::stdout();
    let mut out = csv::Writer::from_writer(stdout.lock());
    let fail = |e: csv::Error| Failure::Fatal(Error::csv("<stdout>", e));
    out.write_record(["line_index", "template_id", "template", "parameters"])
        .map_err(fail)?;
    for record in stream {
        let record = record?;
        let tokens = preprocess_content(&record.content, &masks, opts.preprocessing());
        let outcome = parser.feed(&tokens);
        let template = parser
            .template(outcome.template_id)
            .map(|t| t.text())
            .unwrap_or_default();
        out.write_record([
            record.index.to_string(),
            outcome.template_id.to_string(),
            template,
            outcome.parameters.join("|"),
        ])
        .map_err(fail)?;
    }
    out.flush()
        .map_err(|e| Failure::Fatal(Error::io("<stdout>", e)))?;
    eprintln!("{} templates", parser.template_count());
    Ok(())
}

fn cmd_eval(opts: &Opts) -> CmdResult {
    let params = opts.params()?;
    let manifest = opts.require_manifest()?;
    let mut sample = Sample::load(&manifest)?;
    if let Some(input) = &opts.input {
        let (records, truth) = logstruct::ingest::load_sample_files(
            input,
            &manifest.truth_path,
            manifest.extractor()?,
        )?;
        sample.records = records;
        sample.truth = truth;
    }
    let report = bench::evaluate_sample(&sample, &params, opts.preprocessing())?;
    let label = bench::run_label(&sample.dataset, &params, opts.preprocessing());
    let (path, file) = opts.output(&sample.dataset, "eval", ".csv")?;
    let mut w = csv::Writer::from_writer(file);
    let fail = |e: csv::Error| Failure::Fatal(Error::csv(&path, e));
    w.write_record(EVAL_CSV_HEADER).map_err(fail)?;
    w.write_record(report.csv_row(&label)).map_err(fail)?;
    w.flush().map_err(|e| Failure::Fatal(Error::io(&path, e)))?;
    println!(
        "{} {} {}: accuracy {:.4}, {} templates ({} in truth)",
        sample.dataset,
        params.kind(),
        params.describe(),
        report.accuracy,
        report.predicted_template_count,
        report.truth_template_count
    );
    Ok(())
}

fn cmd_sweep(opts: &Opts) -> CmdResult {
    let manifest = opts.require_manifest()?;
    let workers = opts
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let result = bench::run_sweep(
        opts.kind(),
        &opts.grid(),
        &manifest,
        opts.preprocessing(),
        workers,
    )?;
    let (path, file) = opts.output(&manifest.name, "sweep", ".csv")?;
    result.write_csv(file).map_err(csv_error(&path))?;
    let failed = result.errors().count();
    if let Some(best) = result.best() {
        println!(
            "{} {}: best {} accuracy {:.4} over {} points",
            manifest.name,
            opts.kind(),
            best.params.describe(),
            best.accuracy().unwrap_or(0.0),
            result.rows.len()
        );
    }
    if failed == 0 {
        return Ok(());
    }
    let (errors_path, file) = opts.output(&manifest.name, "sweep", "_errors.csv")?;
    result
        .write_errors_csv(file)
        .map_err(csv_error(&errors_path))?;
    let message = format!(
        "{failed} of {} grid points failed, see {}",
        result.rows.len(),
        errors_path.display()
    );
    if failed == result.rows.len() {
        Err(Failure::Fatal(Error::Eval(message)))
    } else {
        Err(Failure::Partial(message))
    }
}

fn cmd_ab(opts: &Opts) -> CmdResult {
    let params = opts.params()?;
    let manifest = opts.require_manifest()?;
    let result = bench::run_ab(&params, &manifest)?;
    let (path, file) = opts.output(&manifest.name, "ab", ".csv")?;
    result.write_csv(file).map_err(csv_error(&path))?;
    println!("{}", result.summary_line());
    Ok(())
}

fn cmd_bench(opts: &Opts) -> CmdResult {
    let params = opts.params()?;
    let (input, dataset, extractor, masks) = stream_source(opts, |m| m.raw_path.clone())?;
    let budget = match opts.budget {
        Some(s) if !(s.is_finite() && s > 0.0) => {
            return Err(Failure::Usage(format!(
                "--budget must be a positive number of seconds, got {s}"
            )))
        }
        other => other.map(Duration::from_secs_f64),
    };
    let options = TimingOptions {
        preprocessing: opts.preprocessing(),
        limit: (opts.limit > 0).then_some(opts.limit),
        budget,
        ..TimingOptions::default()
    };
    let report = bench::run_timing_file(&params, &input, extractor, &masks, &options)?;
    let (path, file) = opts.output(&dataset, "bench", ".csv")?;
    report.write_samples_csv(file).map_err(csv_error(&path))?;
    let (path, file) = opts.output(&dataset, "bench", "_cumulative.csv")?;
    report
        .write_cumulative_csv(file)
        .map_err(csv_error(&path))?;
    let (path, mut file) = opts.output(&dataset, "bench", "_summary.txt")?;
    let label = format!("{dataset} {} {}", params.kind(), params.describe());
    file.write_all(report.summary_text(&label).as_bytes())
        .and_then(|_| file.flush())
        .map_err(|e| Failure::Fatal(Error::io(&path, e)))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{label}: {} logs, mean {:.0} ns, p99 {} ns, max/mean {:.1}{}",
        report.total_logs,
        report.summary.mean_ns,
        report.summary.p99_ns,
        report.summary.max_over_mean,
        if report.timed_out {
            " (budget exceeded)"
        } else {
            ""
        }
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Parse(o) => cmd_parse(o),
        Command::Eval(o) => cmd_eval(o),
        Command::Sweep(o) => cmd_sweep(o),
        Command::Ab(o) => cmd_ab(o),
        Command::Bench(o) => cmd_bench(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Fatal(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FATAL)
        }
        Err(Failure::Partial(msg)) => {
            eprintln!("warning: {msg}");
            ExitCode::from(EXIT_PARTIAL)
        }
    }
}
