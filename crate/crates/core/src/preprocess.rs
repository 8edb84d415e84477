//! Optional masking of known-variable substrings before tokenization.

use regex::Regex;

use crate::error::{Error, Result};
use crate::model::{LogRecord, TokenSequence, WILDCARD};

/// Ordered, compiled masking patterns. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct MaskSet {
    patterns: Vec<Regex>,
}

impl MaskSet {
    /// Compiles `sources` in declaration order.
    pub fn compile<S: AsRef<str>>(sources: &[S]) -> Result<Self> {
        let patterns = sources
            .iter()
            .map(|s| {
                Regex::new(s.as_ref())
                    .map_err(|e| Error::Config(format!("bad mask pattern {:?}: {e}", s.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MaskSet { patterns })
    }

    pub fn empty() -> Self {
        MaskSet::default()
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.patterns.iter().map(Regex::as_str)
    }

    /// Replaces every leftmost non-overlapping match of each pattern with the
    /// wildcard. Pattern `k` runs over the output of pattern `k - 1`.
    pub fn apply(&self, content: &str) -> String {
        let mut text = std::borrow::Cow::Borrowed(content);
        for re in &self.patterns {
            if let std::borrow::Cow::Owned(s) = re.replace_all(&text, WILDCARD) {
                text = std::borrow::Cow::Owned(s);
            }
        }
        text.into_owned()
    }
}

/// Free-function form of [`MaskSet::apply`].
pub fn apply_masks(content: &str, masks: &MaskSet) -> String {
    masks.apply(content)
}

/// Tokenizes the record content, masked first when `enabled`.
pub fn preprocess_record(record: &LogRecord, masks: &MaskSet, enabled: bool) -> TokenSequence {
    preprocess_content(&record.content, masks, enabled)
}

pub fn preprocess_content(content: &str, masks: &MaskSet, enabled: bool) -> TokenSequence {
    if enabled && !masks.is_empty() {
        TokenSequence::tokenize(&masks.apply(content))
    } else {
        TokenSequence::tokenize(content)
    }
}
