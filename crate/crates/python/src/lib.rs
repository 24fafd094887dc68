//! Python bindings for `designscan_core`.

use std::collections::{BTreeSet, HashMap};

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use designscan_core::classifier::{self, EnsembleConfig};
use designscan_core::corpus::{self, SplitSpec, DEFAULT_TRAIN_FRACTION};
use designscan_core::domain::{self, AttackScenario, AttributeKind, AttributeValue, N_ATTRIBUTES};
use designscan_core::{encoder, mlp, synthgen, Error};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn kind(name: &str) -> PyResult<AttributeKind> {
    name.parse().map_err(PyValueError::new_err)
}

fn scenario(values: &HashMap<String, String>) -> PyResult<AttackScenario> {
    let mut s = AttackScenario::new("python");
    for (k, v) in values {
        let k = kind(k)?;
        let v = AttributeValue::new(v).ok_or_else(|| PyValueError::new_err(format!("empty value for {k}")))?;
        if s.set(k, v).is_some() {
            return Err(PyValueError::new_err(format!("{k} given more than once")));
        }
    }
    Ok(s)
}

#[pyclass(name = "Vocabulary", module = "designscan", from_py_object)]
#[derive(Clone)]
struct PyVocabulary {
    inner: domain::Vocabulary,
}

#[pymethods]
impl PyVocabulary {
    /// The shipped vocabulary with the pinned value codes.
    #[staticmethod]
    fn pinned() -> Self {
        PyVocabulary {
            inner: domain::Vocabulary::pinned(),
        }
    }

    /// The vocabulary the synthetic corpus is generated over.
    #[staticmethod]
    fn generation() -> Self {
        PyVocabulary {
            inner: synthgen::generation_vocabulary(),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        domain::Vocabulary::load(path)
            .map(|inner| PyVocabulary { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        domain::Vocabulary::from_text(text)
            .map(|inner| PyVocabulary { inner })
            .map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn register(&mut self, kind_name: &str, value: &str) -> PyResult<u32> {
        self.inner
            .register_text(kind(kind_name)?, value)
            .ok_or_else(|| PyValueError::new_err("empty value"))
    }

    fn code_of(&self, kind_name: &str, value: &str) -> PyResult<Option<u32>> {
        Ok(self.inner.code_of_text(kind(kind_name)?, value))
    }

    fn value_of(&self, kind_name: &str, code: u32) -> PyResult<Option<String>> {
        Ok(self
            .inner
            .value_of(kind(kind_name)?, code)
            .map(|v| v.text().to_string()))
    }

    fn size(&self, kind_name: &str) -> PyResult<usize> {
        Ok(self.inner.size(kind(kind_name)?))
    }

    /// Codes of a scenario given as `{kind: value}` for all twelve kinds.
    fn encode(&self, values: HashMap<String, String>) -> PyResult<Vec<u32>> {
        let codes = encoder::encode_scenario(&scenario(&values)?, &self.inner).map_err(to_py)?;
        Ok(codes.to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Vocabulary(fingerprint={:?})", self.inner.fingerprint())
    }
}

#[pyclass(name = "Corpus", module = "designscan", from_py_object)]
#[derive(Clone)]
struct PyCorpus {
    inner: corpus::Corpus,
}

#[pymethods]
impl PyCorpus {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        corpus::Corpus::load(path)
            .map(|inner| PyCorpus { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        corpus::Corpus::parse(text, "<python>")
            .map(|inner| PyCorpus { inner })
            .map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<usize> {
        self.inner.save(path).map_err(to_py)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// `(scenario_id, codes, pattern_id)` tuples.
    fn records(&self) -> Vec<(String, Vec<u32>, u32)> {
        self.inner
            .records()
            .iter()
            .map(|r| (r.scenario_id.clone(), r.codes.to_vec(), r.pattern_id))
            .collect()
    }

    fn pattern_ids(&self) -> Vec<u32> {
        self.inner.pattern_ids()
    }

    #[pyo3(signature = (train_fraction = DEFAULT_TRAIN_FRACTION, seed = 42, stratified = true))]
    fn split(&self, train_fraction: f64, seed: u64, stratified: bool) -> PyResult<(PyCorpus, PyCorpus)> {
        let spec = SplitSpec {
            stratified,
            ..SplitSpec::new(train_fraction, seed)
        };
        let (train, test) = corpus::split_corpus(&self.inner, &spec).map_err(to_py)?;
        Ok((PyCorpus { inner: train }, PyCorpus { inner: test }))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Corpus(len={})", self.inner.len())
    }
}

#[pyclass(name = "EnsembleModel", module = "designscan")]
struct PyEnsemble {
    inner: classifier::EnsembleModel,
}

#[pymethods]
impl PyEnsemble {
    /// Trains the partitioned ensemble; unset options keep their defaults.
    #[staticmethod]
    #[pyo3(signature = (corpus, vocab, seed = 42, hidden = None, lr = None, momentum = None, max_iter = None, patience = None, band = None, max_classes = None))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        corpus: &PyCorpus,
        vocab: &PyVocabulary,
        seed: u64,
        hidden: Option<usize>,
        lr: Option<f64>,
        momentum: Option<f64>,
        max_iter: Option<usize>,
        patience: Option<usize>,
        band: Option<f64>,
        max_classes: Option<usize>,
    ) -> PyResult<Self> {
        let base = EnsembleConfig::default();
        let mut config = base;
        config.train.seed = seed;
        config.train.learning_rate = lr.unwrap_or(base.train.learning_rate);
        config.train.momentum = momentum.unwrap_or(base.train.momentum);
        config.train.max_iterations = max_iter.unwrap_or(base.train.max_iterations);
        config.train.patience = patience.unwrap_or(base.train.patience);
        config.network.n_hidden = hidden.unwrap_or(base.network.n_hidden);
        config.band = band.unwrap_or(base.band);
        config.max_classes_per_net = max_classes.unwrap_or(base.max_classes_per_net);
        let (c, v) = (&corpus.inner, &vocab.inner);
        py.detach(|| classifier::train_ensemble(c, v, &config))
            .map(|inner| PyEnsemble { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        classifier::EnsembleModel::load(path)
            .map(|inner| PyEnsemble { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        classifier::EnsembleModel::from_text(text)
            .map(|inner| PyEnsemble { inner })
            .map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// `(lo, hi)` of each partition.
    fn partitions(&self) -> Vec<(u32, u32)> {
        self.inner.partitions().iter().map(|p| (p.lo(), p.hi())).collect()
    }

    /// `(pattern_id, raw, partition)` for a `{kind: value}` scenario.
    fn predict(&self, values: HashMap<String, String>, vocab: &PyVocabulary) -> PyResult<(u32, f64, usize)> {
        let p = self
            .inner
            .predict_pattern(&scenario(&values)?, &vocab.inner)
            .map_err(to_py)?;
        Ok((p.pattern_id, p.raw, p.partition))
    }

    fn predict_codes(&self, codes: Vec<u32>, vocab: &PyVocabulary) -> PyResult<(u32, f64, usize)> {
        let codes: [u32; N_ATTRIBUTES] = codes
            .try_into()
            .map_err(|v: Vec<u32>| PyValueError::new_err(format!("expected {N_ATTRIBUTES} codes, got {}", v.len())))?;
        let p = self.inner.predict_codes(&codes, &vocab.inner).map_err(to_py)?;
        Ok((p.pattern_id, p.raw, p.partition))
    }

    /// `(accuracy, per-partition accuracies, report csv)`.
    fn evaluate(&self, corpus: &PyCorpus, vocab: &PyVocabulary) -> PyResult<(f64, Vec<Option<f64>>, String)> {
        let report = self.inner.evaluate(&corpus.inner, &vocab.inner).map_err(to_py)?;
        let per_partition = report.partitions.iter().map(|p| p.accuracy()).collect();
        Ok((report.accuracy, per_partition, report.to_csv()))
    }
}

#[pyfunction]
fn tansig(n: f64) -> f64 {
    mlp::tansig(n)
}

#[pyfunction]
fn decode_prediction(estimate: f64, lo: u32, hi: u32) -> PyResult<u32> {
    if hi < lo {
        return Err(PyValueError::new_err(format!("empty range ({lo}, {hi})")));
    }
    Ok(encoder::decode_prediction(estimate, lo, hi))
}

#[pyfunction]
#[pyo3(signature = (ids, max_classes = classifier::DEFAULT_MAX_CLASSES))]
fn build_partitions(ids: Vec<u32>, max_classes: usize) -> Vec<(u32, u32)> {
    let ids: BTreeSet<u32> = ids.into_iter().collect();
    classifier::build_partitions(&ids, max_classes)
}

/// The default synthetic corpus and its vocabulary.
#[pyfunction]
#[pyo3(signature = (seed = 42))]
fn synthetic_corpus(seed: u64) -> (PyCorpus, PyVocabulary) {
    let (inner, vocab) = synthgen::default_corpus(seed);
    (PyCorpus { inner }, PyVocabulary { inner: vocab })
}

#[pymodule]
fn designscan(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVocabulary>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(tansig, m)?)?;
    m.add_function(wrap_pyfunction!(decode_prediction, m)?)?;
    m.add_function(wrap_pyfunction!(build_partitions, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    Ok(())
}
