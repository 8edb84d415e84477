//! Python bindings: parsers, masking, LCS and grouping accuracy.

use logstruct::drain::{DrainConfig, DrainParser};
use logstruct::spell::{SpellConfig, SpellParser};
use logstruct::{LogParser, TokenSequence};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_error(e: logstruct::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Text or a pre-split token list.
#[derive(FromPyObject)]
enum Message {
    Text(String),
    Tokens(Vec<String>),
}

impl Message {
    fn into_tokens(self) -> TokenSequence {
        match self {
            Message::Text(s) => TokenSequence::tokenize(&s),
            Message::Tokens(v) => TokenSequence::from_tokens(v),
        }
    }
}

/// Result of feeding one message.
#[pyclass(name = "ParseOutcome", frozen, get_all)]
struct PyParseOutcome {
    template_id: u32,
    created: bool,
    parameters: Vec<String>,
}

#[pymethods]
impl PyParseOutcome {
    fn __repr__(&self) -> String {
        format!(
            "ParseOutcome(template_id={}, created={}, parameters={:?})",
            self.template_id,
            if self.created { "True" } else { "False" },
            self.parameters
        )
    }
}

fn feed(parser: &mut dyn LogParser, message: Message) -> PyParseOutcome {
    let out = parser.feed(&message.into_tokens());
    PyParseOutcome {
        template_id: out.template_id.0,
        created: out.created,
        parameters: out.parameters,
    }
}

/// `(id, text, support)` triples.
fn templates(parser: &dyn LogParser) -> Vec<(u32, String, u64)> {
    parser
        .templates()
        .into_iter()
        .map(|t| (t.id.0, t.text(), t.support))
        .collect()
}

#[pyclass(name = "SpellParser")]
struct PySpell(SpellParser);

#[pymethods]
impl PySpell {
    #[new]
    #[pyo3(signature = (tau = 0.5))]
    fn new(tau: f64) -> PyResult<Self> {
        Ok(PySpell(SpellParser::new(
            SpellConfig::new(tau).map_err(value_error)?,
        )))
    }

    fn feed(&mut self, message: Message) -> PyParseOutcome {
        feed(&mut self.0, message)
    }

    fn templates(&self) -> Vec<(u32, String, u64)> {
        templates(&self.0)
    }

    fn template_count(&self) -> usize {
        self.0.template_count()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.config().tau
    }
}

#[pyclass(name = "DrainParser")]
struct PyDrain(DrainParser);

#[pymethods]
impl PyDrain {
    #[new]
    #[pyo3(signature = (depth = 4, st = 0.4, max_children = 100))]
    fn new(depth: usize, st: f64, max_children: usize) -> PyResult<Self> {
        let config = DrainConfig::new(depth, st, max_children).map_err(value_error)?;
        Ok(PyDrain(DrainParser::new(config)))
    }

    fn feed(&mut self, message: Message) -> PyParseOutcome {
        feed(&mut self.0, message)
    }

    fn templates(&self) -> Vec<(u32, String, u64)> {
        templates(&self.0)
    }

    fn template_count(&self) -> usize {
        self.0.template_count()
    }

    /// Node keys the message would follow, or None before its length is seen.
    fn routing_path(&self, message: Message) -> Option<Vec<String>> {
        self.0.routing_path(&message.into_tokens())
    }
}

#[pyclass(name = "MaskSet", frozen)]
struct PyMaskSet(logstruct::MaskSet);

#[pymethods]
impl PyMaskSet {
    #[new]
    fn new(patterns: Vec<String>) -> PyResult<Self> {
        Ok(PyMaskSet(
            logstruct::MaskSet::compile(&patterns).map_err(value_error)?,
        ))
    }

    fn apply(&self, content: &str) -> String {
        self.0.apply(content)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Replaces every match of each pattern, in order, with `<*>`.
#[pyfunction]
fn apply_masks(content: &str, patterns: Vec<String>) -> PyResult<String> {
    let masks = logstruct::MaskSet::compile(&patterns).map_err(value_error)?;
    Ok(masks.apply(content))
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    TokenSequence::tokenize(text).into_inner()
}

/// One longest common subsequence of two token lists.
#[pyfunction]
fn lcs(a: Vec<String>, b: Vec<String>) -> Vec<String> {
    logstruct::spell::lcs(
        &TokenSequence::from_tokens(a),
        &TokenSequence::from_tokens(b),
    )
    .into_inner()
}

/// `(accuracy, predicted template count, truth template count)` of two
/// aligned labelings.
#[pyfunction]
fn grouping_accuracy(predicted: Vec<u32>, truth: Vec<String>) -> PyResult<(f64, usize, usize)> {
    if predicted.len() != truth.len() {
        return Err(PyValueError::new_err(format!(
            "{} predictions for {} truth labels",
            predicted.len(),
            truth.len()
        )));
    }
    let truth: Vec<&str> = truth.iter().map(String::as_str).collect();
    let r = logstruct::eval::partition_accuracy(&predicted, &truth);
    Ok((
        r.accuracy,
        r.predicted_template_count,
        r.truth_template_count,
    ))
}

#[pymodule]
fn logstruct_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("WILDCARD", logstruct::WILDCARD)?;
    m.add_class::<PySpell>()?;
    m.add_class::<PyDrain>()?;
    m.add_class::<PyMaskSet>()?;
    m.add_class::<PyParseOutcome>()?;
    m.add_function(wrap_pyfunction!(apply_masks, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(lcs, m)?)?;
    m.add_function(wrap_pyfunction!(grouping_accuracy, m)?)?;
    Ok(())
}
