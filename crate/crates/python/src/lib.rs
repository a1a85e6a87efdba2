//! Python bindings: datasets, training, evaluation, checkpoints and export.

use std::path::PathBuf;

use kane_core::checkpoint::Checkpoint;
use kane_core::evaluation::{Evaluator, RankingReport};
use kane_core::export::write_embeddings;
use kane_core::kg::{generate_synthetic_kg, Dataset as CoreDataset, Source, SynthConfig};
use kane_core::model::{embed, PropagationGraph};
use kane_core::training::{train as core_train, TrainConfig as CoreConfig, TrainReport};
use kane_core::KaneError;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyAny, PyDict};

fn err(e: KaneError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io(path: &PathBuf, e: std::io::Error) -> PyErr {
    PyIOError::new_err(format!("{}: {e}", path.display()))
}

fn read(path: &PathBuf) -> PyResult<String> {
    std::fs::read_to_string(path).map_err(|e| io(path, e))
}

/// Parsed graph with its train/valid/test split and optional entity labels.
#[pyclass(module = "kane", frozen)]
struct Dataset {
    inner: CoreDataset,
}

#[pymethods]
impl Dataset {
    /// Reads tab-separated relation, attribute and label files.
    #[staticmethod]
    #[pyo3(signature = (relations, attributes=None, labels=None, seed=42))]
    fn from_files(
        relations: PathBuf,
        attributes: Option<PathBuf>,
        labels: Option<PathBuf>,
        seed: u64,
    ) -> PyResult<Self> {
        let rel = read(&relations)?;
        let attr = attributes.as_ref().map(read).transpose()?;
        let lab = labels.as_ref().map(read).transpose()?;
        let names = [
            relations.display().to_string(),
            attributes.map(|p| p.display().to_string()).unwrap_or_default(),
            labels.map(|p| p.display().to_string()).unwrap_or_default(),
        ];
        let inner = CoreDataset::from_texts(
            Source { name: &names[0], text: &rel },
            attr.as_deref().map(|text| Source { name: &names[1], text }),
            lab.as_deref().map(|text| Source { name: &names[2], text }),
            seed,
        )
        .map_err(err)?;
        Ok(Dataset { inner })
    }

    /// Same as `from_files`, with the file contents given as strings.
    #[staticmethod]
    #[pyo3(signature = (relations, attributes=None, labels=None, seed=42))]
    fn from_texts(relations: &str, attributes: Option<&str>, labels: Option<&str>, seed: u64) -> PyResult<Self> {
        let inner = CoreDataset::from_texts(
            Source { name: "<relations>", text: relations },
            attributes.map(|text| Source { name: "<attributes>", text }),
            labels.map(|text| Source { name: "<labels>", text }),
            seed,
        )
        .map_err(err)?;
        Ok(Dataset { inner })
    }

    /// Planted-partition graph with cluster labels.
    #[staticmethod]
    #[pyo3(signature = (seed=42, entities=50, relations=5, clusters=5, min_degree=None, max_degree=None, noise=None))]
    fn synthetic(
        seed: u64,
        entities: usize,
        relations: usize,
        clusters: usize,
        min_degree: Option<usize>,
        max_degree: Option<usize>,
        noise: Option<f64>,
    ) -> PyResult<Self> {
        let d = SynthConfig::default();
        let config = SynthConfig {
            seed,
            entities,
            relations,
            clusters,
            min_degree: min_degree.unwrap_or(d.min_degree),
            max_degree: max_degree.unwrap_or(d.max_degree),
            noise: noise.unwrap_or(d.noise),
        };
        let (kg, split) = generate_synthetic_kg(&config).map_err(err)?;
        Ok(Dataset { inner: CoreDataset { kg, split } })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(|e| io(&path, e))?;
        Ok(Dataset { inner: CoreDataset::from_bundle_bytes(&bytes).map_err(err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let bytes = self.inner.to_bundle_bytes().map_err(err)?;
        std::fs::write(&path, bytes).map_err(|e| io(&path, e))
    }

    #[getter]
    fn checksum(&self) -> PyResult<String> {
        self.inner.checksum().map_err(err)
    }

    /// Counts of entities, relations, attributes and triples.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.kg.stats();
        let d = PyDict::new(py);
        d.set_item("entities", s.entities)?;
        d.set_item("relations", s.relations)?;
        d.set_item("attributes", s.attributes)?;
        d.set_item("relation_triples", s.relation_triples)?;
        d.set_item("attribute_triples", s.attribute_triples)?;
        d.set_item("total_triples", s.total_triples())?;
        d.set_item("duplicates_dropped", s.duplicates_dropped)?;
        d.set_item("train", self.inner.split.train.len())?;
        d.set_item("valid", self.inner.split.valid.len())?;
        d.set_item("test", self.inner.split.test.len())?;
        Ok(d)
    }

    #[getter]
    fn entity_names(&self) -> Vec<String> {
        self.inner.kg.entities().names().to_vec()
    }

    #[getter]
    fn relation_names(&self) -> Vec<String> {
        self.inner.kg.relations().names().to_vec()
    }

    #[getter]
    fn class_count(&self) -> usize {
        self.inner.split.class_count()
    }

    fn relations_tsv(&self) -> String {
        self.inner.kg.relations_tsv()
    }

    fn attributes_tsv(&self) -> String {
        self.inner.kg.attributes_tsv()
    }

    fn labels_tsv(&self) -> Option<String> {
        self.inner.split.labels.as_ref().map(|l| l.to_tsv(&self.inner.kg))
    }

    fn __repr__(&self) -> String {
        let s = self.inner.kg.stats();
        format!(
            "Dataset(entities={}, relations={}, attributes={}, triples={})",
            s.entities,
            s.relations,
            s.attributes,
            s.total_triples()
        )
    }
}

/// Model and optimization settings; keyword arguments override defaults.
#[pyclass(module = "kane", skip_from_py_object)]
#[derive(Clone)]
struct TrainConfig {
    inner: CoreConfig,
}

fn set_from_py(config: &mut CoreConfig, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
    let text = if value.is_none() {
        "auto".to_string()
    } else if let Ok(b) = value.extract::<bool>() {
        b.to_string()
    } else {
        value.str()?.to_string()
    };
    config.set(key, &text).map_err(err)
}

#[pymethods]
impl TrainConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut inner = CoreConfig::default();
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                set_from_py(&mut inner, &k.extract::<String>()?, &v)?;
            }
        }
        Ok(TrainConfig { inner })
    }

    fn set(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        set_from_py(&mut self.inner, key, value)
    }

    /// Every setting as a string, keyed by name.
    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (k, v) in self.inner.to_kv_text().lines().filter_map(|l| l.split_once('=')) {
            d.set_item(k.trim(), v.trim())?;
        }
        Ok(d)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.epochs
    }

    #[getter]
    fn learning_rate(&self) -> f64 {
        self.inner.effective_learning_rate()
    }

    fn __repr__(&self) -> String {
        self.inner.to_kv_text()
    }
}

/// Trained parameters tied to the dataset they were trained on.
#[pyclass(module = "kane", frozen)]
struct Model {
    checkpoint: Checkpoint,
    report: Option<TrainReport>,
}

impl Model {
    fn evaluator<'a>(&'a self, dataset: &Dataset) -> PyResult<Evaluator<'a>> {
        self.checkpoint.check_dataset(&dataset.inner).map_err(err)?;
        Evaluator::new(&self.checkpoint.params, &dataset.inner).map_err(err)
    }
}

fn ranking_dict<'py>(py: Python<'py>, r: &RankingReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("k", r.k)?;
    d.set_item("queries", r.queries())?;
    d.set_item("mean_rank_raw", r.mean_rank_raw)?;
    d.set_item("mean_rank_filtered", r.mean_rank_filtered)?;
    d.set_item("hits_raw", r.hits_raw)?;
    d.set_item("hits_filtered", r.hits_filtered)?;
    Ok(d)
}

fn pick_split<'a, T>(name: &str, valid: &'a [T], test: &'a [T]) -> PyResult<&'a [T]> {
    match name {
        "valid" => Ok(valid),
        "test" => Ok(test),
        other => Err(PyValueError::new_err(format!("split must be 'valid' or 'test', got {other:?}"))),
    }
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(|e| io(&path, e))?;
        Self::from_bytes(&bytes)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Model { checkpoint: Checkpoint::from_bytes(data).map_err(err)?, report: None })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        std::fs::write(&path, self.to_bytes()?).map_err(|e| io(&path, e))
    }

    fn to_bytes(&self) -> PyResult<Vec<u8>> {
        self.checkpoint.to_bytes().map_err(err)
    }

    #[getter]
    fn config(&self) -> TrainConfig {
        TrainConfig { inner: self.checkpoint.config.clone() }
    }

    #[getter]
    fn dataset_checksum(&self) -> String {
        self.checkpoint.dataset_checksum.clone()
    }

    /// Per-epoch training losses; empty for a loaded checkpoint.
    #[getter]
    fn losses(&self) -> Vec<f64> {
        self.report.as_ref().map(|r| r.losses()).unwrap_or_default()
    }

    /// `epoch,loss,val_metric,seconds` log of the training run.
    fn loss_csv(&self) -> Option<String> {
        self.report.as_ref().map(|r| r.to_csv())
    }

    #[pyo3(signature = (dataset, split="test"))]
    fn evaluate_completion<'py>(&self, py: Python<'py>, dataset: &Dataset, split: &str) -> PyResult<Bound<'py, PyDict>> {
        let s = &dataset.inner.split;
        let triples = pick_split(split, &s.valid, &s.test)?;
        let rep = self.evaluator(dataset)?.completion_report(triples).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("model", &rep.model)?;
        d.set_item("entity", ranking_dict(py, &rep.entity)?)?;
        d.set_item("relation", ranking_dict(py, &rep.relation)?)?;
        d.set_item("text", rep.to_text())?;
        Ok(d)
    }

    #[pyo3(signature = (dataset, split="test"))]
    fn evaluate_classification<'py>(&self, py: Python<'py>, dataset: &Dataset, split: &str) -> PyResult<Bound<'py, PyDict>> {
        let labels = dataset
            .inner
            .split
            .labels
            .as_ref()
            .ok_or_else(|| PyValueError::new_err("dataset has no entity labels"))?;
        let entities = pick_split(split, &labels.valid, &labels.test)?;
        let rep = self.evaluator(dataset)?.classification_report(entities, labels).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("model", &rep.model)?;
        d.set_item("entities", rep.entities)?;
        d.set_item("accuracy", rep.accuracy)?;
        d.set_item("text", rep.to_text())?;
        Ok(d)
    }

    /// Rows of the entity table, or final-layer vectors when a dataset is given.
    #[pyo3(signature = (dataset=None))]
    fn embeddings(&self, dataset: Option<&Dataset>) -> PyResult<Vec<Vec<f64>>> {
        let params = &self.checkpoint.params;
        let rows = |t: &kane_core::autodiff::Tensor| (0..t.rows()).map(|i| t.row(i).to_vec()).collect();
        match dataset {
            None => Ok(rows(&params.entity)),
            Some(ds) => {
                self.checkpoint.check_dataset(&ds.inner).map_err(err)?;
                let graph = PropagationGraph::for_dataset(&ds.inner, params.config.use_attributes);
                let emb = embed(params, &graph, ds.inner.kg.values()).map_err(err)?;
                Ok(rows(emb.entities()))
            }
        }
    }

    /// `#n k` header then `name<TAB>v1 ... vk` lines.
    fn export(&self) -> PyResult<String> {
        write_embeddings(&self.checkpoint.entity_names, &self.checkpoint.params.entity).map_err(err)
    }

    fn __repr__(&self) -> String {
        let c = &self.checkpoint.config;
        format!(
            "Model(task={}, dim={}, layers={}, entities={})",
            c.task,
            c.model.dim,
            c.model.layers,
            self.checkpoint.entity_names.len()
        )
    }
}

/// Trains on `dataset`; deterministic for a fixed config seed.
#[pyfunction]
#[pyo3(signature = (dataset, config=None))]
fn train(py: Python<'_>, dataset: &Dataset, config: Option<&TrainConfig>) -> PyResult<Model> {
    let config = config.map(|c| c.inner.clone()).unwrap_or_default();
    let ds = &dataset.inner;
    let trained = py.detach(|| core_train(ds, &config)).map_err(err)?;
    let report = trained.report.clone();
    let checkpoint = Checkpoint::new(ds, &config, trained).map_err(err)?;
    Ok(Model { checkpoint, report: Some(report) })
}

#[pymodule]
fn kane(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<TrainConfig>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
