//! Fixed-depth partition tree parser.
//!
//! Routing goes root -> token-count node -> `depth - 3` leading-token nodes
//! -> leaf, so every root-to-leaf path visits `depth` levels. Tokens holding
//! a digit, and new keys arriving at a node that already has `max_children`
//! children, route through the catch-all key. In the leaf, the group with the
//! highest positional similarity wins and absorbs the message when the
//! similarity reaches `st`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{
    Interner, LogParser, ParseOutcome, Sym, Template, TemplateId, TokenSequence, WILDCARD,
    WILDCARD_SYM,
};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrainConfig {
    /// Total tree depth, root and leaf included.
    pub depth: usize,
    /// Similarity threshold in [0, 1].
    pub st: f64,
    /// Branching cap of internal token nodes.
    pub max_children: usize,
}

impl DrainConfig {
    pub fn new(depth: usize, st: f64, max_children: usize) -> Result<Self> {
        if depth < 3 {
            return Err(Error::Config(format!(
                "depth must be at least 3, got {depth}"
            )));
        }
        if !(0.0..=1.0).contains(&st) {
            return Err(Error::Config(format!("st must lie in [0, 1], got {st}")));
        }
        if max_children < 1 {
            return Err(Error::Config("max_children must be at least 1".into()));
        }
        Ok(DrainConfig {
            depth,
            st,
            max_children,
        })
    }

    /// Leading tokens consulted for routing.
    pub fn routing_tokens(&self) -> usize {
        self.depth - 3
    }
}

impl Default for DrainConfig {
    fn default() -> Self {
        DrainConfig {
            depth: 4,
            st: 0.4,
            max_children: 100,
        }
    }
}

/// Positional similarity of equal-length sequences.
///
/// Returns `(identical non-wildcard positions / length, wildcard count)`.
///
/// # Panics
///
/// When the lengths differ; the tree never compares across lengths.
pub fn seq_similarity(template: &TokenSequence, message: &TokenSequence) -> (f64, usize) {
    assert_eq!(
        template.len(),
        message.len(),
        "similarity is only defined for equal-length sequences"
    );
    similarity(template.tokens(), message.tokens(), &WILDCARD.to_owned())
}

fn similarity<T: PartialEq>(template: &[T], message: &[T], wildcard: &T) -> (f64, usize) {
    if template.is_empty() {
        return (1.0, 0);
    }
    let mut same = 0;
    let mut params = 0;
    for (t, m) in template.iter().zip(message) {
        if t == wildcard {
            params += 1;
        } else if t == m {
            same += 1;
        }
    }
    (same as f64 / template.len() as f64, params)
}

/// Positionwise merge: unequal positions become the wildcard.
pub fn update_group_template(template: &TokenSequence, tokens: &TokenSequence) -> TokenSequence {
    assert_eq!(template.len(), tokens.len());
    template
        .iter()
        .zip(tokens.iter())
        .map(|(t, m)| if t == m { t } else { WILDCARD })
        .collect()
}

fn has_digit(token: &str) -> bool {
    token.bytes().any(|b| b.is_ascii_digit())
}

#[derive(Debug, Clone, Default)]
struct Node {
    children: HashMap<Sym, usize>,
    groups: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Group {
    tokens: Vec<Sym>,
    support: u64,
    leaf: usize,
}

/// Online fixed-depth tree parser state.
#[derive(Debug, Clone)]
pub struct DrainParser {
    config: DrainConfig,
    interner: Interner,
    nodes: Vec<Node>,
    // token count -> length node
    lengths: HashMap<usize, usize>,
    groups: Vec<Group>,
    digit_tokens: HashMap<Sym, bool>,
}

impl DrainParser {
    pub fn new(config: DrainConfig) -> Self {
        DrainParser {
            config,
            interner: Interner::default(),
            nodes: Vec::new(),
            lengths: HashMap::new(),
            groups: Vec::new(),
            digit_tokens: HashMap::new(),
        }
    }

    pub fn config(&self) -> &DrainConfig {
        &self.config
    }

    /// Number of leaves in the tree.
    pub fn leaf_count(&self) -> usize {
        let mut leaves: Vec<usize> = self.groups.iter().map(|g| g.leaf).collect();
        leaves.sort_unstable();
        leaves.dedup();
        leaves.len()
    }

    /// Node keys along the path `tokens` would follow to an existing leaf,
    /// starting with the token count. `None` when no leaf exists yet.
    pub fn routing_path(&self, tokens: &TokenSequence) -> Option<Vec<String>> {
        let syms: Vec<Option<Sym>> = tokens.iter().map(|t| self.interner_lookup(t)).collect();
        let mut node = *self.lengths.get(&tokens.len())?;
        let mut path = vec![tokens.len().to_string()];
        for sym in syms.iter().take(self.layers(tokens.len())) {
            let literal = sym.and_then(|s| self.nodes[node].children.get(&s).map(|&c| (s, c)));
            let (key, child) = match literal {
                Some(hit) => hit,
                None => (WILDCARD_SYM, *self.nodes[node].children.get(&WILDCARD_SYM)?),
            };
            path.push(self.interner.name(key).to_owned());
            node = child;
        }
        Some(path)
    }

    /// Leaf node index holding a group.
    pub fn leaf_of(&self, id: TemplateId) -> Option<usize> {
        self.groups.get(id.0 as usize).map(|g| g.leaf)
    }

    fn interner_lookup(&self, token: &str) -> Option<Sym> {
        self.interner.get(token)
    }

    fn layers(&self, len: usize) -> usize {
        self.config.routing_tokens().min(len)
    }

    fn is_digit_token(&mut self, sym: Sym) -> bool {
        if let Some(&d) = self.digit_tokens.get(&sym) {
            return d;
        }
        let d = has_digit(self.interner.name(sym));
        self.digit_tokens.insert(sym, d);
        d
    }

    fn search(&self, msg: &[Sym]) -> Option<usize> {
        let mut node = *self.lengths.get(&msg.len())?;
        for sym in msg.iter().take(self.layers(msg.len())) {
            let children = &self.nodes[node].children;
            node = match children.get(sym) {
                Some(&c) => c,
                None => *children.get(&WILDCARD_SYM)?,
            };
        }
        Some(node)
    }

    fn new_node(&mut self) -> usize {
        self.nodes.push(Node::default());
        self.nodes.len() - 1
    }

    fn insert_path(&mut self, msg: &[Sym]) -> usize {
        let mut node = match self.lengths.get(&msg.len()) {
            Some(&n) => n,
            None => {
                let n = self.new_node();
                self.lengths.insert(msg.len(), n);
                n
            }
        };
        for &sym in &msg[..self.layers(msg.len())] {
            if let Some(&child) = self.nodes[node].children.get(&sym) {
                node = child;
                continue;
            }
            let key = if self.is_digit_token(sym) {
                WILDCARD_SYM
            } else {
                let children = &self.nodes[node].children;
                let has_wild = children.contains_key(&WILDCARD_SYM);
                let used = children.len();
                let cap = self.config.max_children;
                if (has_wild && used < cap) || (!has_wild && used + 1 < cap) {
                    sym
                } else {
                    WILDCARD_SYM
                }
            };
            node = match self.nodes[node].children.get(&key) {
                Some(&child) => child,
                None => {
                    let child = self.new_node();
                    self.nodes[node].children.insert(key, child);
                    child
                }
            };
        }
        node
    }

    fn best_group(&self, leaf: usize, msg: &[Sym]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, usize)> = None;
        for &g in &self.nodes[leaf].groups {
            let (sim, params) = similarity(&self.groups[g].tokens, msg, &WILDCARD_SYM);
            let better = match best {
                None => true,
                Some((_, bs, bp)) => sim > bs + EPS || ((sim - bs).abs() <= EPS && params > bp),
            };
            if better {
                best = Some((g, sim, params));
            }
        }
        best.map(|(g, s, _)| (g, s))
    }

    fn snapshot(&self, index: usize) -> Template {
        let g = &self.groups[index];
        Template {
            id: TemplateId(index as u32),
            tokens: self.interner.resolve(&g.tokens),
            support: g.support,
        }
    }

    fn params(&self, template: &[Sym], msg: &[Sym]) -> Vec<String> {
        template
            .iter()
            .zip(msg)
            .filter(|(&t, _)| t == WILDCARD_SYM)
            .map(|(_, &m)| self.interner.name(m).to_owned())
            .collect()
    }
}

impl Default for DrainParser {
    fn default() -> Self {
        DrainParser::new(DrainConfig::default())
    }
}

impl LogParser for DrainParser {
    fn feed(&mut self, tokens: &TokenSequence) -> ParseOutcome {
        let msg = self.interner.intern_all(tokens);
        if let Some(leaf) = self.search(&msg) {
            if let Some((g, sim)) = self.best_group(leaf, &msg) {
                if sim + EPS >= self.config.st {
                    let group = &mut self.groups[g];
                    for (t, &m) in group.tokens.iter_mut().zip(&msg) {
                        if *t != m {
                            *t = WILDCARD_SYM;
                        }
                    }
                    group.support += 1;
                    let parameters = self.params(&self.groups[g].tokens, &msg);
                    return ParseOutcome {
                        template_id: TemplateId(g as u32),
                        created: false,
                        parameters,
                    };
                }
            }
        }
        let leaf = self.insert_path(&msg);
        let index = self.groups.len();
        let parameters = self.params(&msg, &msg);
        self.groups.push(Group {
            tokens: msg,
            support: 1,
            leaf,
        });
        self.nodes[leaf].groups.push(index);
        ParseOutcome {
            template_id: TemplateId(index as u32),
            created: true,
            parameters,
        }
    }

    fn templates(&self) -> Vec<Template> {
        (0..self.groups.len()).map(|i| self.snapshot(i)).collect()
    }

    fn template(&self, id: TemplateId) -> Option<Template> {
        ((id.0 as usize) < self.groups.len()).then(|| self.snapshot(id.0 as usize))
    }

    fn template_count(&self) -> usize {
        self.groups.len()
    }
}
