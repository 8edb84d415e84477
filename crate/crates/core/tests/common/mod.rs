#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use logstruct::TokenSequence;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn seq(text: &str) -> TokenSequence {
    TokenSequence::tokenize(text)
}

/// Event kinds of the synthetic HDFS-shaped dataset: (id, template, generator).
const EVENTS: &[(&str, &str)] = &[
    ("E1", "Receiving block <*> src: /<*> dest: /<*>"),
    ("E2", "PacketResponder <*> for block <*> terminating"),
    (
        "E3",
        "BLOCK* NameSystem.addStoredBlock: blockMap updated: <*> is added to <*> size <*>",
    ),
    ("E4", "Verification succeeded for <*>"),
    ("E5", "Deleting block <*> file <*>"),
];

fn ip(rng: &mut ChaCha8Rng) -> String {
    format!(
        "10.{}.{}.{}:{}",
        rng.random_range(0..255),
        rng.random_range(0..255),
        rng.random_range(1..255),
        rng.random_range(1000..60000)
    )
}

fn blk(rng: &mut ChaCha8Rng) -> String {
    let sign = if rng.random_bool(0.5) { "-" } else { "" };
    format!(
        "blk_{sign}{}",
        rng.random_range(1_000_000_000u64..9_000_000_000_000_000_000)
    )
}

fn content(event: usize, rng: &mut ChaCha8Rng) -> String {
    match event {
        0 => format!(
            "Receiving block {} src: /{} dest: /{}",
            blk(rng),
            ip(rng),
            ip(rng)
        ),
        1 => format!(
            "PacketResponder {} for block {} terminating",
            rng.random_range(0..3),
            blk(rng)
        ),
        2 => format!(
            "BLOCK* NameSystem.addStoredBlock: blockMap updated: {} is added to {} size {}",
            ip(rng),
            blk(rng),
            rng.random_range(1..70_000_000)
        ),
        3 => format!("Verification succeeded for {}", blk(rng)),
        _ => {
            let b = blk(rng);
            format!(
                "Deleting block {b} file /mnt/hadoop/dfs/data/current/subdir{}/{b}",
                rng.random_range(0..64)
            )
        }
    }
}

/// Writes a labeled HDFS-shaped sample (`n` lines), a longer raw corpus
/// starting with the same lines, a truth CSV and a manifest using the HDFS
/// masks. Returns the manifest path.
pub fn write_dataset(dir: &Path, n: usize, extra: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = String::new();
    let mut raw = String::new();
    let mut truth =
        String::from("LineId,Date,Time,Pid,Level,Component,Content,EventId,EventTemplate\n");
    for i in 0..n + extra {
        let event = rng.random_range(0..EVENTS.len());
        let text = content(event, &mut rng);
        let line = format!(
            "081109 2036{:02} {} INFO dfs.DataNode: {}",
            i % 60,
            100 + i % 50,
            text
        );
        writeln!(raw, "{line}").unwrap();
        if i < n {
            writeln!(sample, "{line}").unwrap();
            let (id, template) = EVENTS[event];
            writeln!(
                truth,
                "{},081109,2036{:02},{},INFO,dfs.DataNode,\"{}\",{},\"{}\"",
                i + 1,
                i % 60,
                100 + i % 50,
                text,
                id,
                template
            )
            .unwrap();
        }
    }
    fs::write(dir.join("Synth_2k.log"), sample).unwrap();
    fs::write(dir.join("Synth.log"), raw).unwrap();
    fs::write(dir.join("Synth_2k.log_structured.csv"), truth).unwrap();
    let manifest = dir.join("Synth.toml");
    fs::write(
        &manifest,
        r#"name = "Synth"
log_format = '<Date> <Time> <Pid> <Level> <Component>: <Content>'
mask_patterns = ['blk_-?\d+', '(\d+\.){3}\d+(:\d+)?']
sample_path = "Synth_2k.log"
truth_path = "Synth_2k.log_structured.csv"
raw_path = "Synth.log"
"#,
    )
    .unwrap();
    manifest
}

/// Random token streams over a small vocabulary so that templates collide.
pub mod strategies {
    use logstruct::TokenSequence;
    use proptest::prelude::*;

    pub const VOCAB: &[&str] = &["a", "b", "c", "d", "e", "f", "x1", "42", "<*>"];

    pub fn tokens(max_len: usize) -> impl Strategy<Value = TokenSequence> {
        prop::collection::vec(prop::sample::select(VOCAB), 0..=max_len)
            .prop_map(TokenSequence::from_tokens)
    }

    pub fn stream(max_records: usize, max_len: usize) -> impl Strategy<Value = Vec<TokenSequence>> {
        prop::collection::vec(tokens(max_len), 1..=max_records)
    }
}
