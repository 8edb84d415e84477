//! Longest-common-subsequence online parser.
//!
//! Each incoming message is compared to the live templates by the length of
//! the longest common subsequence between the template's constant tokens and
//! the message. The best candidate is accepted when that length reaches
//! `tau * |message|`; the template is then refined to the common part, with
//! every gap turned into a single wildcard.
//!
//! A prefix tree over the constant tokens gives a fast path: templates whose
//! constants are a full subsequence of the message are found without any DP.
//! The fast path falls back to a pruned scan whenever a longer template could
//! still win, so it never changes the result of the exhaustive scan.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::model::{
    Interner, LogParser, ParseOutcome, Sym, Template, TemplateId, TokenSequence, WILDCARD_SYM,
};

/// Slack for float comparisons against `tau * n`.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpellConfig {
    /// Minimum ratio of LCS length to message length for a match.
    pub tau: f64,
    /// Use the prefix-tree fast path and candidate pruning. Disabling it
    /// computes the LCS against every template.
    pub prefix_tree: bool,
}

impl SpellConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Config(format!("tau must lie in [0, 1], got {tau}")));
        }
        Ok(SpellConfig {
            tau,
            prefix_tree: true,
        })
    }

    pub fn exhaustive(mut self) -> Self {
        self.prefix_tree = false;
        self
    }
}

impl Default for SpellConfig {
    fn default() -> Self {
        SpellConfig {
            tau: 0.5,
            prefix_tree: true,
        }
    }
}

/// One longest common subsequence of `a` and `b`.
pub fn lcs(a: &TokenSequence, b: &TokenSequence) -> TokenSequence {
    let pairs = lcs_pairs(a.tokens(), b.tokens());
    pairs.iter().map(|&(i, _)| a.tokens()[i].as_str()).collect()
}

/// Matching index pairs `(i, j)` of one LCS of `a` and `b`, increasing in both.
pub fn lcs_pairs<T: PartialEq>(a: &[T], b: &[T]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Vec::new();
    }
    // suffix table: table[i][j] = LCS length of a[i..], b[j..]
    let w = m + 1;
    let mut table = vec![0u32; (n + 1) * w];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[i * w + j] = if a[i] == b[j] {
                table[(i + 1) * w + j + 1] + 1
            } else {
                table[(i + 1) * w + j].max(table[i * w + j + 1])
            };
        }
    }
    let mut pairs = Vec::with_capacity(table[0] as usize);
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if table[(i + 1) * w + j] >= table[i * w + j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    pairs
}

/// Length of the LCS, in O(min(|a|, |b|)) memory.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 0;
    }
    let mut row = vec![0u32; short.len() + 1];
    for x in long {
        let mut diag = 0;
        for (j, y) in short.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[short.len()] as usize
}

/// Result of aligning a template with a message.
struct Merge<T> {
    tokens: Vec<T>,
    /// Non-empty message ranges that fell on a wildcard.
    gaps: Vec<(usize, usize)>,
}

/// Aligns the template's constant tokens with the message through one LCS.
/// Anchored constants stay, every non-empty gap on either side becomes one
/// wildcard.
fn merge_walk<T: PartialEq + Clone>(template: &[T], message: &[T], wildcard: &T) -> Merge<T> {
    let const_pos: Vec<usize> = (0..template.len())
        .filter(|&p| template[p] != *wildcard)
        .collect();
    let constants: Vec<&T> = const_pos.iter().map(|&p| &template[p]).collect();
    let message_refs: Vec<&T> = message.iter().collect();
    let anchors: Vec<(usize, usize)> = lcs_pairs(&constants, &message_refs)
        .into_iter()
        .map(|(c, m)| (const_pos[c], m))
        .collect();

    let mut tokens = Vec::with_capacity(template.len());
    let mut gaps = Vec::new();
    let (mut tp, mut mp) = (0usize, 0usize);
    let mut close_gap = |tokens: &mut Vec<T>, t_end: usize, m_end: usize, tp: usize, mp: usize| {
        if t_end > tp || m_end > mp {
            tokens.push(wildcard.clone());
            if m_end > mp {
                gaps.push((mp, m_end));
            }
        }
    };
    for &(t, m) in &anchors {
        close_gap(&mut tokens, t, m, tp, mp);
        tokens.push(template[t].clone());
        tp = t + 1;
        mp = m + 1;
    }
    close_gap(&mut tokens, template.len(), message.len(), tp, mp);
    Merge { tokens, gaps }
}

/// Refines `template` against a matched message. Constant tokens of the
/// result are exactly the LCS of the old constants and the message.
pub fn refine_template(template: &TokenSequence, tokens: &TokenSequence) -> TokenSequence {
    let wildcard = crate::model::WILDCARD.to_owned();
    let merged = merge_walk(template.tokens(), tokens.tokens(), &wildcard);
    TokenSequence::from_tokens(merged.tokens)
}

#[derive(Debug, Clone)]
struct SpellTemplate {
    tokens: Vec<Sym>,
    constants: Vec<Sym>,
    wildcards: usize,
    support: u64,
    node: usize,
    empty: bool,
}

impl SpellTemplate {
    fn new(tokens: Vec<Sym>) -> Self {
        let constants: Vec<Sym> = tokens
            .iter()
            .copied()
            .filter(|&s| s != WILDCARD_SYM)
            .collect();
        let wildcards = tokens.len() - constants.len();
        SpellTemplate {
            tokens,
            constants,
            wildcards,
            support: 1,
            node: 0,
            empty: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct TreeNode {
    children: HashMap<Sym, usize>,
    templates: Vec<usize>,
}

/// Candidate ranking: longer LCS, then fewer wildcards, then lower id.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    lcs: usize,
    wildcards: usize,
    index: usize,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        (other.lcs, self.wildcards, self.index) < (self.lcs, other.wildcards, other.index)
    }
}

fn keep_best(best: &mut Option<Candidate>, c: Candidate) {
    match best {
        Some(b) if !c.beats(b) => {}
        _ => *best = Some(c),
    }
}

/// Online LCS parser state.
#[derive(Debug, Clone)]
pub struct SpellParser {
    config: SpellConfig,
    interner: Interner,
    templates: Vec<SpellTemplate>,
    nodes: Vec<TreeNode>,
    // constant length -> number of non-empty templates with that length
    const_lengths: BTreeMap<usize, usize>,
    empty_template: Option<usize>,
    last_match: Option<(usize, usize)>,
}

impl SpellParser {
    pub fn new(config: SpellConfig) -> Self {
        SpellParser {
            config,
            interner: Interner::default(),
            templates: Vec::new(),
            nodes: vec![TreeNode::default()],
            const_lengths: BTreeMap::new(),
            empty_template: None,
            last_match: None,
        }
    }

    pub fn config(&self) -> &SpellConfig {
        &self.config
    }

    /// `(lcs, message length)` of the most recent accepted match, if the last
    /// feed matched an existing template.
    pub fn last_match(&self) -> Option<(usize, usize)> {
        self.last_match
    }

    /// Constant tokens of a template, in order.
    pub fn constants(&self, id: TemplateId) -> Option<TokenSequence> {
        self.templates
            .get(id.0 as usize)
            .map(|t| self.interner.resolve(&t.constants))
    }

    fn accepts(&self, lcs: usize, n: usize) -> bool {
        lcs as f64 + EPS >= self.config.tau * n as f64
    }

    fn tree_insert(&mut self, index: usize) {
        let mut node = 0;
        for i in 0..self.templates[index].constants.len() {
            let sym = self.templates[index].constants[i];
            node = match self.nodes[node].children.get(&sym) {
                Some(&child) => child,
                None => {
                    let child = self.nodes.len();
                    self.nodes.push(TreeNode::default());
                    self.nodes[node].children.insert(sym, child);
                    child
                }
            };
        }
        self.nodes[node].templates.push(index);
        self.templates[index].node = node;
        *self
            .const_lengths
            .entry(self.templates[index].constants.len())
            .or_default() += 1;
    }

    fn tree_remove(&mut self, index: usize) {
        let node = self.templates[index].node;
        self.nodes[node].templates.retain(|&t| t != index);
        let len = self.templates[index].constants.len();
        if let Some(count) = self.const_lengths.get_mut(&len) {
            *count -= 1;
            if *count == 0 {
                self.const_lengths.remove(&len);
            }
        }
    }

    /// Templates whose constants are a subsequence of `msg`. Greedy earliest
    /// matching of each child token is enough to decide subsequence-ness.
    fn full_matches(&self, msg: &[Sym], found: &mut Vec<Candidate>) {
        let mut stack = vec![(0usize, 0usize, 0usize)];
        let mut seen: Vec<Sym> = Vec::new();
        while let Some((node, pos, depth)) = stack.pop() {
            for &index in &self.nodes[node].templates {
                found.push(Candidate {
                    lcs: depth,
                    wildcards: self.templates[index].wildcards,
                    index,
                });
            }
            if self.nodes[node].children.is_empty() {
                continue;
            }
            seen.clear();
            for (i, &sym) in msg.iter().enumerate().skip(pos) {
                if sym == WILDCARD_SYM || seen.contains(&sym) {
                    continue;
                }
                seen.push(sym);
                if let Some(&child) = self.nodes[node].children.get(&sym) {
                    stack.push((child, i + 1, depth + 1));
                }
            }
        }
    }

    fn scan(
        &self,
        msg: &[Sym],
        min_const_len: f64,
        above: Option<usize>,
        best: &mut Option<Candidate>,
    ) {
        for (index, t) in self.templates.iter().enumerate() {
            if t.empty {
                continue;
            }
            let len = t.constants.len();
            if self.config.prefix_tree {
                if (len as f64) + EPS < min_const_len {
                    continue;
                }
                if let Some(floor) = above {
                    if len <= floor {
                        continue;
                    }
                }
            }
            let c = Candidate {
                lcs: lcs_len(&t.constants, msg),
                wildcards: t.wildcards,
                index,
            };
            keep_best(best, c);
        }
    }

    fn find_match(&self, msg: &[Sym]) -> Option<Candidate> {
        let threshold = self.config.tau * msg.len() as f64;
        let mut best = None;
        if !self.config.prefix_tree {
            self.scan(msg, 0.0, None, &mut best);
            return best;
        }
        let mut found = Vec::new();
        self.full_matches(msg, &mut found);
        for c in found {
            keep_best(&mut best, c);
        }
        match best {
            Some(fast) if self.accepts(fast.lcs, msg.len()) => {
                let longest = self.const_lengths.keys().next_back().copied().unwrap_or(0);
                if longest > fast.lcs {
                    // a longer template may still share more tokens
                    self.scan(msg, threshold, Some(fast.lcs), &mut best);
                }
            }
            _ => {
                best = None;
                self.scan(msg, threshold, None, &mut best);
            }
        }
        best
    }

    fn feed_empty(&mut self) -> ParseOutcome {
        self.last_match = None;
        if let Some(index) = self.empty_template {
            self.last_match = Some((0, 0));
            self.templates[index].support += 1;
            return ParseOutcome {
                template_id: TemplateId(index as u32),
                created: false,
                parameters: Vec::new(),
            };
        }
        let index = self.templates.len();
        let mut t = SpellTemplate::new(Vec::new());
        t.empty = true;
        self.templates.push(t);
        self.empty_template = Some(index);
        ParseOutcome {
            template_id: TemplateId(index as u32),
            created: true,
            parameters: Vec::new(),
        }
    }

    fn params(&self, msg: &[Sym], gaps: &[(usize, usize)]) -> Vec<String> {
        gaps.iter()
            .map(|&(s, e)| {
                msg[s..e]
                    .iter()
                    .map(|&sym| self.interner.name(sym))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect()
    }

    fn snapshot(&self, index: usize) -> Template {
        let t = &self.templates[index];
        Template {
            id: TemplateId(index as u32),
            tokens: self.interner.resolve(&t.tokens),
            support: t.support,
        }
    }
}

impl Default for SpellParser {
    fn default() -> Self {
        SpellParser::new(SpellConfig::default())
    }
}

impl LogParser for SpellParser {
    fn feed(&mut self, tokens: &TokenSequence) -> ParseOutcome {
        if tokens.is_empty() {
            return self.feed_empty();
        }
        let msg = self.interner.intern_all(tokens);
        match self.find_match(&msg) {
            Some(c) if self.accepts(c.lcs, msg.len()) => {
                self.last_match = Some((c.lcs, msg.len()));
                let merged = merge_walk(&self.templates[c.index].tokens, &msg, &WILDCARD_SYM);
                let parameters = self.params(&msg, &merged.gaps);
                let refined = SpellTemplate::new(merged.tokens);
                let changed = refined.constants != self.templates[c.index].constants;
                if changed {
                    self.tree_remove(c.index);
                }
                let t = &mut self.templates[c.index];
                t.tokens = refined.tokens;
                t.constants = refined.constants;
                t.wildcards = refined.wildcards;
                t.support += 1;
                if changed {
                    self.tree_insert(c.index);
                }
                ParseOutcome {
                    template_id: TemplateId(c.index as u32),
                    created: false,
                    parameters,
                }
            }
            _ => {
                self.last_match = None;
                let index = self.templates.len();
                let parameters = msg
                    .iter()
                    .filter(|&&s| s == WILDCARD_SYM)
                    .map(|&s| self.interner.name(s).to_owned())
                    .collect();
                self.templates.push(SpellTemplate::new(msg));
                self.tree_insert(index);
                ParseOutcome {
                    template_id: TemplateId(index as u32),
                    created: true,
                    parameters,
                }
            }
        }
    }

    fn templates(&self) -> Vec<Template> {
        (0..self.templates.len())
            .map(|i| self.snapshot(i))
            .collect()
    }

    fn template(&self, id: TemplateId) -> Option<Template> {
        ((id.0 as usize) < self.templates.len()).then(|| self.snapshot(id.0 as usize))
    }

    fn template_count(&self) -> usize {
        self.templates.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TokenSequence {
        TokenSequence::tokenize(s)
    }

    #[test]
    fn lcs_identity() {
        let x = seq("a b c d");
        assert_eq!(lcs(&x, &x), x);
    }

    #[test]
    fn lcs_single_substitution() {
        assert_eq!(lcs(&seq("a b c"), &seq("a x c")), seq("a c"));
    }

    #[test]
    fn lcs_with_empty_side() {
        assert!(lcs(&seq(""), &seq("a b")).is_empty());
        assert_eq!(lcs_len::<u32>(&[], &[1, 2]), 0);
    }

    #[test]
    fn refine_single_divergence() {
        assert_eq!(
            refine_template(&seq("Send 42 bytes"), &seq("Send 99 bytes")),
            seq("Send <*> bytes")
        );
    }

    #[test]
    fn refine_is_idempotent_on_wildcard() {
        let t = seq("Send <*> bytes");
        assert_eq!(refine_template(&t, &seq("Send 99 bytes")), t);
    }

    #[test]
    fn refine_marks_inserted_tokens() {
        assert_eq!(
            refine_template(&seq("a b"), &seq("a x y b z")),
            seq("a <*> b <*>")
        );
    }

    #[test]
    fn first_message_creates() {
        let mut p = SpellParser::default();
        let o = p.feed(&seq("hello world"));
        assert!(o.created);
        assert_eq!(
            p.template(o.template_id).unwrap().tokens,
            seq("hello world")
        );
    }

    #[test]
    fn repeat_matches() {
        let mut p = SpellParser::default();
        let a = p.feed(&seq("disk full on sda"));
        let b = p.feed(&seq("disk full on sda"));
        assert!(!b.created);
        assert_eq!(a.template_id, b.template_id);
        assert!(b.parameters.is_empty());
    }

    #[test]
    fn process_example_extracts_parameters() {
        let mut p = SpellParser::new(SpellConfig::new(0.5).unwrap());
        let a = p.feed(&seq("New process started: process x92 started on port 42"));
        let b = p.feed(&seq("New process started: process x07 started on port 80"));
        assert_eq!(a.template_id, b.template_id);
        assert_eq!(b.parameters, vec!["x07", "80"]);
        assert_eq!(
            p.template(b.template_id).unwrap().text(),
            "New process started: process <*> started on port <*>"
        );
    }

    #[test]
    fn tau_zero_collapses_everything() {
        let mut p = SpellParser::new(SpellConfig::new(0.0).unwrap());
        for line in ["a b c", "d e f", "g h i", "a x c"] {
            p.feed(&seq(line));
        }
        assert_eq!(p.template_count(), 1);
    }

    #[test]
    fn tau_one_requires_full_subsequence() {
        let mut p = SpellParser::new(SpellConfig::new(1.0).unwrap());
        let a = p.feed(&seq("a b c"));
        let b = p.feed(&seq("a b d"));
        assert_ne!(a.template_id, b.template_id);
    }

    #[test]
    fn empty_content_gets_its_own_template() {
        let mut p = SpellParser::new(SpellConfig::new(0.0).unwrap());
        let x = p.feed(&seq("a b"));
        let e1 = p.feed(&seq(""));
        let e2 = p.feed(&seq(""));
        assert!(e1.created);
        assert!(!e2.created);
        assert_eq!(e1.template_id, e2.template_id);
        assert_ne!(x.template_id, e1.template_id);
        assert_eq!(p.feed(&seq("a c")).template_id, x.template_id);
    }

    #[test]
    fn ties_prefer_fewer_wildcards() {
        // Two templates both sharing 2 constants with the message.
        let mut p = SpellParser::new(SpellConfig::new(0.7).unwrap());
        let t0 = p.feed(&seq("open file a.txt now")).template_id;
        p.feed(&seq("open file b.txt now"));
        let t1 = p.feed(&seq("open file quickly")).template_id;
        assert_ne!(t0, t1);
        assert_eq!(p.template(t0).unwrap().text(), "open file <*> now");
        let o = p.feed(&seq("open file"));
        assert_eq!(o.template_id, t1);
    }

    #[test]
    fn rejects_bad_tau() {
        assert!(SpellConfig::new(1.5).is_err());
        assert!(SpellConfig::new(-0.1).is_err());
    }
}
