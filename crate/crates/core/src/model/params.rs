use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{Aggregator, Encoder, ModelConfig};
use crate::autodiff::{Tape, Tensor, Var};
use crate::encoders::{LstmParams, LstmVars, GATE_NAMES};
use crate::error::{KaneError, Result};
use crate::kg::Dataset;

/// Transforms for one propagation layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    /// One `k' × k` transform per attention head.
    pub heads: Vec<Tensor>,
    /// `k × (m·k')` output transform of the concatenation aggregator.
    pub output: Option<Tensor>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    /// `C × k`
    pub weight: Tensor,
    /// `1 × C`
    pub bias: Tensor,
}

/// Item counts that fix the parameter shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSizes {
    pub entities: usize,
    pub relations: usize,
    pub words: usize,
    pub classes: usize,
}

impl ModelSizes {
    pub fn of(dataset: &Dataset) -> Self {
        ModelSizes {
            entities: dataset.kg.entity_count(),
            relations: dataset.kg.relation_count(),
            words: dataset.kg.word_count(),
            classes: dataset.split.class_count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// `|E| × k`
    pub entity: Tensor,
    /// `|R| × k`
    pub relation: Tensor,
    /// `|W| × k`; absent when attributes are off or there are no words.
    pub words: Option<Tensor>,
    pub lstm: Option<LstmParams>,
    pub layers: Vec<LayerParams>,
    pub classifier: Option<Classifier>,
}

pub(crate) fn fill_uniform(t: &mut Tensor, bound: f64, rng: &mut (impl Rng + ?Sized)) {
    for v in t.data_mut() {
        *v = rng.gen_range(-bound..=bound);
    }
}

fn normalize_rows(t: &mut Tensor) {
    for i in 0..t.rows() {
        let row = t.row_mut(i);
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            row.iter_mut().for_each(|x| *x /= n);
        }
    }
}

impl ModelParams {
    /// All-zero parameters with the shapes implied by `config` and `sizes`.
    pub fn zeros(config: &ModelConfig, sizes: ModelSizes) -> Result<Self> {
        config.validate()?;
        if sizes.entities == 0 || sizes.relations == 0 {
            return Err(KaneError::Config(
                "a model needs at least one entity and one relation".into(),
            ));
        }
        let k = config.dim;
        let words = (config.use_attributes && sizes.words > 0).then(|| Tensor::zeros(&[sizes.words, k]));
        let lstm = (words.is_some() && config.encoder == Encoder::Lstm).then(|| LstmParams::zeros(k));
        let layers = (0..config.layers)
            .map(|_| LayerParams {
                heads: (0..config.heads)
                    .map(|_| Tensor::zeros(&[config.head_dim, k]))
                    .collect(),
                output: (config.aggregator == Aggregator::Concat)
                    .then(|| Tensor::zeros(&[k, config.heads * config.head_dim])),
            })
            .collect();
        let classifier = (sizes.classes > 0).then(|| Classifier {
            weight: Tensor::zeros(&[sizes.classes, k]),
            bias: Tensor::zeros(&[1, sizes.classes]),
        });
        Ok(ModelParams {
            config: config.clone(),
            entity: Tensor::zeros(&[sizes.entities, k]),
            relation: Tensor::zeros(&[sizes.relations, k]),
            words,
            lstm,
            layers,
            classifier,
        })
    }

    /// Embedding tables uniform in `[-6/√k, 6/√k]`; transforms
    /// Glorot-uniform in `±√(6 / (fan_in + fan_out))`; biases zero except
    /// the LSTM forget gate (1). Entity and relation rows are then
    /// L2-normalized once.
    pub fn init(config: &ModelConfig, sizes: ModelSizes, rng: &mut (impl Rng + ?Sized)) -> Result<Self> {
        let mut p = ModelParams::zeros(config, sizes)?;
        let table_bound = 6.0 / (config.dim as f64).sqrt();
        for (name, t) in p.tensors_mut() {
            if name == "lstm.bias.forget" {
                t.data_mut().fill(1.0);
            } else if name.ends_with("bias") || name.starts_with("lstm.bias") {
                continue;
            } else if matches!(name.as_str(), "entity" | "relation" | "words") {
                fill_uniform(t, table_bound, rng);
            } else {
                let (fan_out, fan_in) = (t.rows(), t.row_width());
                fill_uniform(t, (6.0 / (fan_in + fan_out) as f64).sqrt(), rng);
            }
        }
        normalize_rows(&mut p.entity);
        normalize_rows(&mut p.relation);
        Ok(p)
    }

    pub fn sizes(&self) -> ModelSizes {
        ModelSizes {
            entities: self.entity.rows(),
            relations: self.relation.rows(),
            words: self.words.as_ref().map_or(0, Tensor::rows),
            classes: self.classifier.as_ref().map_or(0, |c| c.weight.rows()),
        }
    }

    /// All tensors in a fixed canonical order with stable names.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("entity".to_string(), &self.entity),
            ("relation".to_string(), &self.relation),
        ];
        if let Some(w) = &self.words {
            out.push(("words".into(), w));
        }
        if let Some(l) = &self.lstm {
            for (kind, group) in [("input", &l.input), ("hidden", &l.hidden), ("bias", &l.bias)] {
                for (g, t) in group.iter().enumerate() {
                    out.push((format!("lstm.{kind}.{}", GATE_NAMES[g]), t));
                }
            }
        }
        for (i, layer) in self.layers.iter().enumerate() {
            for (h, w) in layer.heads.iter().enumerate() {
                out.push((format!("layer{i}.head{h}"), w));
            }
            if let Some(o) = &layer.output {
                out.push((format!("layer{i}.output"), o));
            }
        }
        if let Some(c) = &self.classifier {
            out.push(("classifier.weight".into(), &c.weight));
            out.push(("classifier.bias".into(), &c.bias));
        }
        out
    }

    /// Same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = vec![
            ("entity".to_string(), &mut self.entity),
            ("relation".to_string(), &mut self.relation),
        ];
        if let Some(w) = &mut self.words {
            out.push(("words".into(), w));
        }
        if let Some(l) = &mut self.lstm {
            let LstmParams {
                input,
                hidden,
                bias,
            } = l;
            for (kind, group) in [("input", input), ("hidden", hidden), ("bias", bias)] {
                for (g, t) in group.iter_mut().enumerate() {
                    out.push((format!("lstm.{kind}.{}", GATE_NAMES[g]), t));
                }
            }
        }
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (h, w) in layer.heads.iter_mut().enumerate() {
                out.push((format!("layer{i}.head{h}"), w));
            }
            if let Some(o) = &mut layer.output {
                out.push((format!("layer{i}.output"), o));
            }
        }
        if let Some(c) = &mut self.classifier {
            out.push(("classifier.weight".into(), &mut c.weight));
            out.push(("classifier.bias".into(), &mut c.bias));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }

    /// Records every tensor on the tape, as parameters or as constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundParams {
        let mut all = Vec::new();
        let mut leaf = |t: &Tensor| {
            let v = if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            };
            all.push(v);
            v
        };
        let entity = leaf(&self.entity);
        let relation = leaf(&self.relation);
        let words = self.words.as_ref().map(&mut leaf);
        let lstm = self.lstm.as_ref().map(|l| LstmVars {
            input: std::array::from_fn(|g| leaf(&l.input[g])),
            hidden: std::array::from_fn(|g| leaf(&l.hidden[g])),
            bias: std::array::from_fn(|g| leaf(&l.bias[g])),
        });
        let layers = self
            .layers
            .iter()
            .map(|layer| LayerVars {
                heads: layer.heads.iter().map(&mut leaf).collect(),
                output: layer.output.as_ref().map(&mut leaf),
            })
            .collect();
        let classifier = self
            .classifier
            .as_ref()
            .map(|c| (leaf(&c.weight), leaf(&c.bias)));
        BoundParams {
            entity,
            relation,
            words,
            lstm,
            layers,
            classifier,
            all,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LayerVars {
    pub heads: Vec<Var>,
    pub output: Option<Var>,
}

/// Parameters recorded on a tape.
#[derive(Clone, Debug)]
pub struct BoundParams {
    pub entity: Var,
    pub relation: Var,
    pub words: Option<Var>,
    pub lstm: Option<LstmVars>,
    pub layers: Vec<LayerVars>,
    pub classifier: Option<(Var, Var)>,
    /// Every leaf in [`ModelParams::tensors`] order.
    pub all: Vec<Var>,
}
