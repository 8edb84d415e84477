//! Shared domain types and the online parser contract.
//!
//! A parser consumes one [`TokenSequence`] at a time and answers with a
//! [`ParseOutcome`] naming the template the message was grouped under. Both
//! parsers in this crate keep their templates as sequences of tokens where a
//! variable position holds the reserved [`WILDCARD`] token.

use std::collections::BTreeMap;
use std::fmt;

/// The reserved token marking a variable position in a template.
pub const WILDCARD: &str = "<*>";

/// Returns true when `token` is the reserved wildcard.
#[inline]
pub fn is_wildcard(token: &str) -> bool {
    token == WILDCARD
}

/// One line of a log stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    /// 0-based ordinal within the stream.
    pub index: usize,
    /// The original line, without its line terminator.
    pub raw: String,
    /// The free-text message part of `raw`.
    pub content: String,
}

/// Ordered whitespace-delimited tokens of a message.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Splits `text` on runs of whitespace. Punctuation stays attached.
    pub fn tokenize(text: &str) -> Self {
        TokenSequence(text.split_whitespace().map(str::to_owned).collect())
    }

    /// Builds a sequence from already split tokens, dropping empty ones and
    /// splitting any token that still carries whitespace.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        TokenSequence(
            tokens
                .into_iter()
                .flat_map(|t| {
                    t.as_ref()
                        .split_whitespace()
                        .map(str::to_owned)
                        .collect::<Vec<_>>()
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    /// Number of wildcard tokens.
    pub fn wildcard_count(&self) -> usize {
        self.0.iter().filter(|t| is_wildcard(t)).count()
    }

    /// Tokens that are not the wildcard, in order.
    pub fn constants(&self) -> Vec<&str> {
        self.iter().filter(|t| !is_wildcard(t)).collect()
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl<S: AsRef<str>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence::from_tokens(iter)
    }
}

/// Stable identity of a template within one parser run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TemplateId(pub u32);

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A template snapshot: fixed tokens plus wildcard positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: TemplateId,
    pub tokens: TokenSequence,
    /// Number of records assigned so far.
    pub support: u64,
}

impl Template {
    pub fn text(&self) -> String {
        self.tokens.to_string()
    }
}

/// What a parser answered for one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOutcome {
    pub template_id: TemplateId,
    /// True iff this record created the template.
    pub created: bool,
    /// Record tokens found at the template's wildcard positions, in order.
    pub parameters: Vec<String>,
}

/// Strictly online parser: one record in, one outcome out.
pub trait LogParser {
    /// Assigns `tokens` to a template, creating one when nothing matches.
    fn feed(&mut self, tokens: &TokenSequence) -> ParseOutcome;

    /// Snapshot of the live templates, ordered by id.
    fn templates(&self) -> Vec<Template>;

    fn template(&self, id: TemplateId) -> Option<Template>;

    fn template_count(&self) -> usize;
}

impl<P: LogParser + ?Sized> LogParser for Box<P> {
    fn feed(&mut self, tokens: &TokenSequence) -> ParseOutcome {
        (**self).feed(tokens)
    }

    fn templates(&self) -> Vec<Template> {
        (**self).templates()
    }

    fn template(&self, id: TemplateId) -> Option<Template> {
        (**self).template(id)
    }

    fn template_count(&self) -> usize {
        (**self).template_count()
    }
}

/// Materialized result of a parser run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    /// record index -> template id
    pub entries: BTreeMap<usize, TemplateId>,
    /// All templates at the end of the run, ordered by id.
    pub templates: Vec<Template>,
}

impl Assignment {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct template ids referenced by the entries.
    pub fn distinct_templates(&self) -> usize {
        let mut ids: Vec<TemplateId> = self.entries.values().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

/// Feeds every `(index, tokens)` pair through `parser` and records the result.
pub fn run_parser<P, I>(parser: &mut P, stream: I) -> Assignment
where
    P: LogParser + ?Sized,
    I: IntoIterator<Item = (usize, TokenSequence)>,
{
    let mut entries = BTreeMap::new();
    for (index, tokens) in stream {
        let outcome = parser.feed(&tokens);
        entries.insert(index, outcome.template_id);
    }
    Assignment {
        entries,
        templates: parser.templates(),
    }
}

/// Per-run string interner. Symbol 0 is always the wildcard.
#[derive(Debug, Clone)]
pub(crate) struct Interner {
    ids: std::collections::HashMap<String, u32>,
    names: Vec<String>,
}

pub(crate) type Sym = u32;
pub(crate) const WILDCARD_SYM: Sym = 0;

impl Default for Interner {
    fn default() -> Self {
        let mut interner = Interner {
            ids: Default::default(),
            names: Vec::new(),
        };
        interner.intern(WILDCARD);
        interner
    }
}

impl Interner {
    pub(crate) fn intern(&mut self, token: &str) -> Sym {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.names.len() as Sym;
        self.names.push(token.to_owned());
        self.ids.insert(token.to_owned(), id);
        id
    }

    pub(crate) fn get(&self, token: &str) -> Option<Sym> {
        self.ids.get(token).copied()
    }

    pub(crate) fn intern_all(&mut self, tokens: &TokenSequence) -> Vec<Sym> {
        tokens.iter().map(|t| self.intern(t)).collect()
    }

    pub(crate) fn name(&self, sym: Sym) -> &str {
        &self.names[sym as usize]
    }

    pub(crate) fn resolve(&self, syms: &[Sym]) -> TokenSequence {
        TokenSequence(syms.iter().map(|&s| self.name(s).to_owned()).collect())
    }
}
