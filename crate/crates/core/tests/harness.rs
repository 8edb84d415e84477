mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::{seq, write_dataset};
use logstruct::bench::{
    self, run_ab, run_ab_on, run_sweep, run_sweep_on, time_stream, Sample, SweepResult,
    TimingOptions,
};
use logstruct::drain::update_group_template;
use logstruct::ingest::{self, load_sample, DatasetManifest};
use logstruct::spell::refine_template;
use logstruct::{
    DrainConfig, LogParser, LogRecord, MaskSet, ParseOutcome, ParserKind, ParserParams,
    SpellConfig, SweepGrid, Template, TemplateId, TokenSequence, WILDCARD,
};

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

/// Tokens equal at a position in every message, wildcard elsewhere.
fn positionwise_common(messages: &[TokenSequence]) -> TokenSequence {
    let n = messages[0].len();
    (0..n)
        .map(|i| {
            let t = &messages[0].tokens()[i];
            if messages.iter().all(|m| &m.tokens()[i] == t) {
                t.clone()
            } else {
                WILDCARD.to_owned()
            }
        })
        .collect()
}

#[test]
fn refinement_constants_do_not_depend_on_order() {
    let triple = [
        seq("New process started: process x92 started on port 42"),
        seq("New process started: process x07 started on port 80"),
        seq("New process started: process x15 started on port 8080"),
    ];
    let expected = positionwise_common(&triple);
    let orders = permutations(&triple);
    assert_eq!(orders.len(), 6);
    for order in orders {
        let template = order[1..]
            .iter()
            .fold(order[0].clone(), |t, m| refine_template(&t, m));
        assert_eq!(template.constants(), expected.constants());
        assert_eq!(template, expected);
    }
}

#[test]
fn drain_merge_does_not_depend_on_order() {
    let fixtures = [
        seq("Receiving block blk_1 src: /10.0.0.1 dest: /10.0.0.2"),
        seq("Receiving block blk_2 src: /10.0.0.1 dest: /10.0.0.3"),
        seq("Receiving block blk_3 src: /10.0.0.4 dest: /10.0.0.2"),
        seq("Receiving block blk_1 src: /10.0.0.1 dest: /10.0.0.2"),
    ];
    let expected = positionwise_common(&fixtures);
    let orders = permutations(&fixtures);
    assert_eq!(orders.len(), 24);
    for order in orders {
        let template = order[1..]
            .iter()
            .fold(order[0].clone(), |t, m| update_group_template(&t, m));
        assert_eq!(template, expected);
    }
    assert_eq!(
        expected.to_string(),
        "Receiving block <*> src: <*> dest: <*>"
    );
}

#[test]
fn two_message_example_under_both_parsers() {
    for params in [
        ParserParams::Spell(SpellConfig::new(0.5).unwrap()),
        ParserParams::Drain(DrainConfig::default()),
    ] {
        let mut parser = params.build();
        let a = parser.feed(&seq("New process started: process x92 started on port 42"));
        let b = parser.feed(&seq("New process started: process x07 started on port 80"));
        assert!(a.created);
        assert!(!b.created);
        assert_eq!(a.template_id, b.template_id);
        assert_eq!(b.parameters, vec!["x07", "80"]);
        assert_eq!(
            parser.templates()[0].text(),
            "New process started: process <*> started on port <*>"
        );
    }
}

#[test]
fn spell_tau_zero_collapses_equal_length_stream() {
    let mut parser = ParserParams::Spell(SpellConfig::new(0.0).unwrap()).build();
    for text in ["a b c", "d e f", "g h i", "a x i"] {
        parser.feed(&seq(text));
    }
    assert_eq!(parser.template_count(), 1);
}

#[test]
fn sample_is_a_prefix_of_the_raw_stream() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = DatasetManifest::load(write_dataset(dir.path(), 200, 50, 7)).unwrap();
    let (records, truth) = load_sample(&manifest).unwrap();
    assert_eq!(records.len(), 200);
    assert_eq!(truth.len(), 200);
    let raw: Vec<LogRecord> = ingest::stream_raw(&manifest)
        .unwrap()
        .take(200)
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(records, raw);
    assert!(records
        .iter()
        .all(|r| r.content.starts_with(|c: char| c.is_alphabetic())));
    assert_eq!(ingest::stream_raw(&manifest).unwrap().count(), 250);
}

#[test]
fn shipped_manifests_load() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../manifests");
    for (name, patterns) in [("HDFS", 2), ("Android", 3), ("OpenStack", 3)] {
        let m = DatasetManifest::load(dir.join(format!("{name}.toml"))).unwrap();
        assert_eq!(m.name, name);
        assert_eq!(m.masks().unwrap().len(), patterns);
        m.extractor().unwrap();
        assert!(m.sample_path.is_absolute());
    }
}

#[test]
fn synthetic_dataset_scores_well_with_masks() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = DatasetManifest::load(write_dataset(dir.path(), 500, 0, 11)).unwrap();
    let sample = Sample::load(&manifest).unwrap();
    let spell =
        bench::evaluate_sample(&sample, &ParserParams::default_for(ParserKind::Spell), true)
            .unwrap();
    let drain = bench::evaluate_sample(
        &sample,
        &ParserParams::Drain(DrainConfig::new(4, 0.5, 100).unwrap()),
        true,
    )
    .unwrap();
    assert_eq!(spell.truth_template_count, 5);
    assert!(spell.accuracy > 0.99, "spell {spell:?}");
    assert!(drain.accuracy > 0.99, "drain {drain:?}");
}

fn sweep_csv(result: &SweepResult) -> String {
    let mut out = Vec::new();
    result.write_csv(&mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn sweep_rows_follow_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = DatasetManifest::load(write_dataset(dir.path(), 300, 0, 3)).unwrap();
    let grid = SweepGrid::default();

    let spell = run_sweep(ParserKind::Spell, &grid, &manifest, true, 4).unwrap();
    assert_eq!(spell.rows.len(), 19);
    let csv = sweep_csv(&spell);
    assert!(csv.starts_with(
        "dataset,parser,preprocessing,tau,st,accuracy,predicted_templates,runtime_ms\n"
    ));
    assert_eq!(csv.lines().count(), 20);
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("Synth,spell,on,0.05,,"));

    let drain = run_sweep(ParserKind::Drain, &grid, &manifest, false, 2).unwrap();
    assert_eq!(drain.rows.len(), 54);
    assert!(sweep_csv(&drain)
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("Synth,drain,off,3,0.10,"));
    assert_eq!(drain.errors().count(), 0);
}

#[test]
fn single_point_grid_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = DatasetManifest::load(write_dataset(dir.path(), 100, 0, 3)).unwrap();
    let grid = SweepGrid {
        spell_tau: vec![0.5],
        ..SweepGrid::default()
    };
    let result = run_sweep(ParserKind::Spell, &grid, &manifest, true, 1).unwrap();
    assert_eq!(result.rows.len(), 1);
    assert!(result.best().is_some());
}

#[test]
fn sweeps_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = DatasetManifest::load(write_dataset(dir.path(), 300, 0, 5)).unwrap();
    let sample = Sample::load(&manifest).unwrap();
    let grid = SweepGrid::default();
    for kind in [ParserKind::Spell, ParserKind::Drain] {
        let a = run_sweep_on(&sample, kind, &grid, true, 4).unwrap();
        let b = run_sweep_on(&sample, kind, &grid, true, 1).unwrap();
        let acc = |r: &SweepResult| r.rows.iter().map(|row| row.accuracy()).collect::<Vec<_>>();
        assert_eq!(acc(&a), acc(&b));
    }
}

#[test]
fn unreadable_sample_marks_every_point_failed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("M.toml");
    std::fs::write(
        &path,
        "name = \"M\"\nlog_format = '<Content>'\nsample_path = \"missing.log\"\ntruth_path = \"missing.csv\"\n",
    )
    .unwrap();
    let manifest = DatasetManifest::load(&path).unwrap();
    let result = run_sweep(ParserKind::Spell, &SweepGrid::default(), &manifest, true, 2).unwrap();
    assert_eq!(result.errors().count(), 19);
    let mut errors = Vec::new();
    result.write_errors_csv(&mut errors).unwrap();
    let errors = String::from_utf8(errors).unwrap();
    assert_eq!(errors.lines().count(), 20);
    assert!(errors.contains("missing.log"));
}

#[test]
fn ab_with_vacuous_masks_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = DatasetManifest::load(write_dataset(dir.path(), 300, 0, 9)).unwrap();
    let mut sample = Sample::load(&manifest).unwrap();
    sample.masks = MaskSet::compile(&["QQQ_never_present"]).unwrap();
    for kind in [ParserKind::Spell, ParserKind::Drain] {
        let ab = run_ab_on(&sample, &ParserParams::default_for(kind)).unwrap();
        assert_eq!(ab.with, ab.without);
        assert_eq!(ab.ratio.accuracy.to_string(), "x1");
        assert_eq!(ab.ratio.templates.to_string(), "x1");
    }
}

#[test]
fn ab_arms_are_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = DatasetManifest::load(write_dataset(dir.path(), 300, 0, 13)).unwrap();
    let params = ParserParams::default_for(ParserKind::Spell);
    let ab = run_ab(&params, &manifest).unwrap();
    let sample = Sample::load(&manifest).unwrap();
    assert_eq!(
        ab.without,
        bench::evaluate_sample(&sample, &params, false).unwrap()
    );
    assert_eq!(
        ab.with,
        bench::evaluate_sample(&sample, &params, true).unwrap()
    );
    assert!(ab.with.predicted_template_count <= ab.without.predicted_template_count);
    let mut csv = Vec::new();
    ab.write_csv(&mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("dataset,parser,parameters,accuracy_without"));
}

/// Parser whose every feed busy-waits for a fixed delay.
struct SlowParser {
    delay: Duration,
    seen: u32,
}

impl LogParser for SlowParser {
    fn feed(&mut self, _tokens: &TokenSequence) -> ParseOutcome {
        let start = Instant::now();
        while start.elapsed() < self.delay {
            std::hint::spin_loop();
        }
        self.seen += 1;
        ParseOutcome {
            template_id: TemplateId(0),
            created: self.seen == 1,
            parameters: Vec::new(),
        }
    }

    fn templates(&self) -> Vec<Template> {
        Vec::new()
    }

    fn template(&self, _id: TemplateId) -> Option<Template> {
        None
    }

    fn template_count(&self) -> usize {
        1
    }
}

fn records(n: usize) -> Vec<logstruct::Result<LogRecord>> {
    (0..n)
        .map(|i| {
            Ok(LogRecord {
                index: i,
                raw: format!("line {i}"),
                content: format!("line {i}"),
            })
        })
        .collect()
}

#[test]
fn timing_recovers_an_injected_delay() {
    let delay = Duration::from_micros(200);
    let mut parser = SlowParser { delay, seen: 0 };
    let options = TimingOptions {
        preprocessing: false,
        sample_every: 10,
        ..TimingOptions::default()
    };
    let report = time_stream(&mut parser, records(100), &MaskSet::empty(), &options).unwrap();
    let injected = delay.as_nanos() as f64;
    assert!(
        (report.summary.mean_ns - injected).abs() <= 0.2 * injected,
        "mean {} vs injected {injected}",
        report.summary.mean_ns
    );
    assert_eq!(report.total_logs, 100);
    assert_eq!(report.cumulative.len(), 10);
    report.check_consistency().unwrap();
}

#[test]
fn timing_honours_limit_and_budget() {
    let mut parser = SlowParser {
        delay: Duration::from_millis(2),
        seen: 0,
    };
    let options = TimingOptions {
        limit: Some(1000),
        budget: Some(Duration::from_millis(50)),
        ..TimingOptions::default()
    };
    let report = time_stream(&mut parser, records(10_000), &MaskSet::empty(), &options).unwrap();
    assert!(report.timed_out);
    assert!(report.total_logs < 1000);
    assert!(report.summary_text("slow").contains("timed_out = true"));
    report.check_consistency().unwrap();

    let options = TimingOptions {
        limit: Some(25),
        sample_every: 10,
        ..TimingOptions::default()
    };
    let mut parser = ParserParams::default_for(ParserKind::Drain).build();
    let report = time_stream(&mut parser, records(100), &MaskSet::empty(), &options).unwrap();
    assert_eq!(report.total_logs, 25);
    assert_eq!(
        report.cumulative.iter().map(|c| c.0).collect::<Vec<_>>(),
        vec![10, 20, 25]
    );
    report.check_consistency().unwrap();
}

#[test]
fn timing_run_writes_both_series() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = DatasetManifest::load(write_dataset(dir.path(), 100, 2400, 21)).unwrap();
    let options = TimingOptions::default();
    let report = bench::run_timing(
        &ParserParams::default_for(ParserKind::Drain),
        &manifest,
        &options,
    )
    .unwrap();
    assert_eq!(report.total_logs, 2500);
    report.check_consistency().unwrap();
    let mut samples = Vec::new();
    report.write_samples_csv(&mut samples).unwrap();
    let samples = String::from_utf8(samples).unwrap();
    assert_eq!(samples.lines().next(), Some("log_index,elapsed_ns"));
    assert_eq!(samples.lines().count(), 2501);
    let mut cumulative = Vec::new();
    report.write_cumulative_csv(&mut cumulative).unwrap();
    let cumulative = String::from_utf8(cumulative).unwrap();
    assert_eq!(
        cumulative.lines().next(),
        Some("logs_processed,cumulative_ns")
    );
    let counts: Vec<&str> = cumulative
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(counts, ["1000", "2000", "2500"]);
    assert!(report.summary.max_over_mean >= 1.0);
}

#[test]
fn drain_late_literal_child_reroutes_earlier_sequence() {
    let mut parser = logstruct::DrainParser::new(DrainConfig::new(4, 0.5, 2).unwrap());
    parser.feed(&seq("x1 f"));
    let first = parser.feed(&seq("e f"));
    assert_eq!(parser.routing_path(&seq("e f")).unwrap(), ["2", WILDCARD]);
    parser.feed(&seq("e a"));
    assert_eq!(parser.routing_path(&seq("e f")).unwrap(), ["2", "e"]);
    let replay = parser.feed(&seq("e f"));
    assert_ne!(
        parser.leaf_of(first.template_id),
        parser.leaf_of(replay.template_id)
    );
}
