//! The attentive propagation network and translational scoring.
//!
//! [`forward`] runs every layer for all entities at once on a tape, which
//! is what training differentiates. The per-entity functions
//! ([`Embeddings::attention_logit`], [`Embeddings::propagate_head`],
//! [`aggregate`], ...) compute the same quantities one entity at a time on
//! plain tensors.

mod config;
mod params;

use std::sync::Arc;

pub use config::{Aggregator, AttentionForm, Encoder, ModelConfig, Norm};
pub(crate) use params::fill_uniform;
pub use params::{BoundParams, Classifier, LayerParams, LayerVars, ModelParams, ModelSizes};

use crate::autodiff::{Tape, Tensor, Var};
use crate::encoders::encode_values;
use crate::error::{KaneError, Result};
use crate::kg::{AttributeTriple, AttributeValue, Dataset, EntityId, NeighborRef, Neighborhood, RelationTriple};

/// Edge lists of the neighborhoods the network attends over, sorted by
/// head. Neighbor indices point into the stacked matrix
/// `[entity vectors; value encodings]`.
#[derive(Clone, Debug)]
pub struct PropagationGraph {
    entity_count: usize,
    value_count: usize,
    /// CSR over all entities: edges of `h` are `starts[h]..starts[h+1]`.
    starts: Vec<usize>,
    edge_relation: Arc<[usize]>,
    edge_neighbor: Arc<[usize]>,
    edge_head: Arc<[usize]>,
    /// Segment bounds over the non-isolated heads only.
    offsets: Arc<[usize]>,
    /// Row `h` of `[aggregated; previous]` that becomes entity `h`.
    merge: Arc<[usize]>,
    has_values: bool,
}

impl PropagationGraph {
    /// Uses every pair in `nb`, dropping attribute neighbors unless
    /// `use_attributes` is set.
    pub fn new(nb: &Neighborhood, value_count: usize, use_attributes: bool) -> Self {
        let n = nb.entity_count();
        let mut starts = Vec::with_capacity(n + 1);
        let (mut rel, mut nbr, mut head) = (Vec::new(), Vec::new(), Vec::new());
        starts.push(0);
        for h in 0..n {
            for &(r, neighbor) in nb.of(EntityId(h)) {
                let idx = match neighbor {
                    NeighborRef::Entity(e) => e.0,
                    NeighborRef::Value(v) if use_attributes => n + v.0,
                    NeighborRef::Value(_) => continue,
                };
                rel.push(r.0);
                nbr.push(idx);
                head.push(h);
            }
            starts.push(rel.len());
        }
        let mut offsets = vec![0];
        let mut merge = Vec::with_capacity(n);
        let active = (0..n).filter(|&h| starts[h + 1] > starts[h]).count();
        let mut a = 0;
        for h in 0..n {
            if starts[h + 1] > starts[h] {
                offsets.push(starts[h + 1]);
                merge.push(a);
                a += 1;
            } else {
                merge.push(active + h);
            }
        }
        let has_values = nbr.iter().any(|&i| i >= n);
        PropagationGraph {
            entity_count: n,
            value_count,
            starts,
            edge_relation: rel.into(),
            edge_neighbor: nbr.into(),
            edge_head: head.into(),
            offsets: offsets.into(),
            merge: merge.into(),
            has_values,
        }
    }

    pub fn from_triples(
        entity_count: usize,
        value_count: usize,
        relations: &[RelationTriple],
        attributes: &[AttributeTriple],
        use_attributes: bool,
    ) -> Self {
        let nb = Neighborhood::build(entity_count, relations, attributes);
        Self::new(&nb, value_count, use_attributes)
    }

    /// The graph the network attends over for a dataset: training relation
    /// triples plus every attribute triple.
    pub fn for_dataset(dataset: &Dataset, use_attributes: bool) -> Self {
        Self::from_triples(
            dataset.kg.entity_count(),
            dataset.kg.value_count(),
            &dataset.split.train,
            dataset.kg.attribute_triples(),
            use_attributes,
        )
    }

    pub fn entity_count(&self) -> usize {
        self.entity_count
    }

    pub fn value_count(&self) -> usize {
        self.value_count
    }

    pub fn edge_count(&self) -> usize {
        self.edge_relation.len()
    }

    pub fn has_values(&self) -> bool {
        self.has_values
    }

    pub fn is_isolated(&self, h: EntityId) -> bool {
        self.starts[h.0] == self.starts[h.0 + 1]
    }

    /// `(relation, neighbor)` pairs of `h` in attention order.
    pub fn neighbors(&self, h: EntityId) -> Vec<(usize, NeighborRef)> {
        (self.starts[h.0]..self.starts[h.0 + 1])
            .map(|i| {
                let n = self.edge_neighbor[i];
                let neighbor = if n < self.entity_count {
                    NeighborRef::Entity(EntityId(n))
                } else {
                    NeighborRef::Value(crate::kg::ValueId(n - self.entity_count))
                };
                (self.edge_relation[i], neighbor)
            })
            .collect()
    }
}

/// Tape handles of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    /// Entity matrices: `layers[0]` is the raw table, the last is final.
    pub layers: Vec<Var>,
    /// Attention weights of every layer and head, aligned with the graph's
    /// non-isolated edges.
    pub attention: Vec<Vec<Var>>,
    /// `|V| × k` encodings, when attributes are in use.
    pub values: Option<Var>,
}

impl Forward {
    pub fn entities(&self) -> Var {
        *self.layers.last().expect("layer 0 always present")
    }
}

/// Encodes all attribute values from the bound word table.
pub fn encode_all_values(
    tape: &mut Tape,
    config: &ModelConfig,
    bound: &BoundParams,
    values: &[AttributeValue],
) -> Result<Option<Var>> {
    match bound.words {
        Some(words) if config.use_attributes && !values.is_empty() => Ok(Some(encode_values(
            tape,
            config.encoder,
            words,
            bound.lstm.as_ref(),
            values,
        )?)),
        _ => Ok(None),
    }
}

/// Runs all propagation layers for every entity.
pub fn forward(
    tape: &mut Tape,
    config: &ModelConfig,
    bound: &BoundParams,
    graph: &PropagationGraph,
    values: &[AttributeValue],
) -> Result<Forward> {
    let encoded = encode_all_values(tape, config, bound, values)?;
    if graph.has_values && encoded.is_none() {
        return Err(KaneError::Contract(
            "graph has attribute neighbors but no value encodings".into(),
        ));
    }
    if graph.has_values && values.len() != graph.value_count {
        return Err(KaneError::Contract(format!(
            "graph expects {} values, got {}",
            graph.value_count,
            values.len()
        )));
    }
    let mut layers = vec![bound.entity];
    let mut attention = Vec::new();
    if graph.edge_count() == 0 {
        layers.extend(std::iter::repeat(bound.entity).take(config.layers));
        return Ok(Forward {
            layers,
            attention,
            values: encoded,
        });
    }
    let rel_rows = tape.gather_rows(bound.relation, graph.edge_relation.clone())?;
    for (l, lv) in bound.layers.iter().enumerate() {
        let x = layers[l];
        let stacked = match encoded {
            Some(v) if graph.has_values => tape.concat_rows(&[x, v])?,
            _ => x,
        };
        let nbr_rows = tape.gather_rows(stacked, graph.edge_neighbor.clone())?;
        let messages = tape.add(rel_rows, nbr_rows)?;
        let mut heads = Vec::with_capacity(lv.heads.len());
        let mut weights = Vec::with_capacity(lv.heads.len());
        for &w in &lv.heads {
            let wt = tape.transpose(w)?;
            let projected = tape.matmul(messages, wt)?;
            let logits = match config.attention_form {
                AttentionForm::Bilinear => {
                    let rw = tape.matmul(bound.relation, wt)?;
                    let rw_edges = tape.gather_rows(rw, graph.edge_relation.clone())?;
                    let raw = tape.row_dot(rw_edges, projected)?;
                    tape.leaky_relu(raw, config.leaky_slope)
                }
                AttentionForm::Translational => {
                    let h_rows = tape.gather_rows(x, graph.edge_head.clone())?;
                    let hr = tape.add(h_rows, rel_rows)?;
                    let diff = tape.sub(hr, nbr_rows)?;
                    let d = row_norm(tape, diff, config.norm)?;
                    tape.scale(d, -1.0)
                }
            };
            let pi = tape.segment_softmax(logits, graph.offsets.clone())?;
            let weighted = tape.scale_rows(projected, pi)?;
            heads.push(tape.segment_sum(weighted, graph.offsets.clone())?);
            weights.push(pi);
        }
        let combined = aggregate_var(tape, config, lv, &heads)?;
        let both = tape.concat_rows(&[combined, x])?;
        layers.push(tape.gather_rows(both, graph.merge.clone())?);
        attention.push(weights);
    }
    Ok(Forward {
        layers,
        attention,
        values: encoded,
    })
}

fn aggregate_var(
    tape: &mut Tape,
    config: &ModelConfig,
    layer: &LayerVars,
    heads: &[Var],
) -> Result<Var> {
    let pre = match config.aggregator {
        Aggregator::Concat => {
            let out = layer.output.ok_or_else(|| {
                KaneError::Contract("concat aggregator without an output transform".into())
            })?;
            let cat = tape.concat_cols(heads)?;
            let out_t = tape.transpose(out)?;
            tape.matmul(cat, out_t)?
        }
        Aggregator::Average => {
            let mut acc = heads[0];
            for &h in &heads[1..] {
                acc = tape.add(acc, h)?;
            }
            tape.scale(acc, 1.0 / heads.len() as f64)
        }
    };
    Ok(tape.leaky_relu(pre, config.leaky_slope))
}

/// Per-row (or whole-vector) distance under the chosen norm.
pub fn row_norm(tape: &mut Tape, a: Var, norm: Norm) -> Result<Var> {
    match norm {
        Norm::L1 => tape.l1_norm(a),
        Norm::L2 => tape.l2_norm(a),
    }
}

/// `‖H + R − T‖` for each row of three equally shaped matrices.
pub fn score_rows(tape: &mut Tape, h: Var, r: Var, t: Var, norm: Norm) -> Result<Var> {
    let hr = tape.add(h, r)?;
    let diff = tape.sub(hr, t)?;
    row_norm(tape, diff, norm)
}

/// Class scores `X Wᵀ + b` for every row of `x`.
pub fn classify_rows(tape: &mut Tape, x: Var, classifier: (Var, Var)) -> Result<Var> {
    let (w, b) = classifier;
    let wt = tape.transpose(w)?;
    let scores = tape.matmul(x, wt)?;
    let n = tape.value(x).rows();
    let bias = tape.gather_rows(b, vec![0; n].into())?;
    tape.add(scores, bias)
}

/// `‖h + r − t‖`; lower means more plausible.
pub fn score(h: &[f64], r: &[f64], t: &[f64], norm: Norm) -> Result<f64> {
    if h.len() != r.len() || h.len() != t.len() {
        return Err(KaneError::shape("score", &[h.len(), r.len()], &[t.len()]));
    }
    let diffs = h.iter().zip(r).zip(t).map(|((a, b), c)| a + b - c);
    Ok(match norm {
        Norm::L1 => diffs.map(f64::abs).sum(),
        Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
    })
}

/// Raw class scores `W x + b`.
pub fn classify(entity: &[f64], classifier: &Classifier) -> Result<Vec<f64>> {
    let w = &classifier.weight;
    if w.row_width() != entity.len() {
        return Err(KaneError::shape("classify", w.shape(), &[entity.len()]));
    }
    Ok((0..w.rows())
        .map(|c| dot(w.row(c), entity) + classifier.bias.data()[c])
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matvec(m: &Tensor, v: &[f64]) -> Result<Vec<f64>> {
    if m.rank() != 2 || m.row_width() != v.len() {
        return Err(KaneError::shape("matvec", m.shape(), &[v.len()]));
    }
    Ok((0..m.rows()).map(|i| dot(m.row(i), v)).collect())
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Combines `m` head outputs into one `k`-vector.
pub fn aggregate(config: &ModelConfig, layer: &LayerParams, heads: &[Tensor]) -> Result<Tensor> {
    if heads.is_empty() {
        return Err(KaneError::Contract("aggregate needs at least one head".into()));
    }
    let pre = match config.aggregator {
        Aggregator::Concat => {
            let out = layer.output.as_ref().ok_or_else(|| {
                KaneError::Contract("concat aggregator without an output transform".into())
            })?;
            let cat: Vec<f64> = heads.iter().flat_map(|h| h.data().iter().copied()).collect();
            matvec(out, &cat)?
        }
        Aggregator::Average => {
            if heads[0].len() != config.dim {
                return Err(KaneError::Config(format!(
                    "average aggregator needs head_dim == dim, got {} vs {}",
                    heads[0].len(),
                    config.dim
                )));
            }
            let mut acc = vec![0.0; config.dim];
            for h in heads {
                if h.len() != config.dim {
                    return Err(KaneError::shape("aggregate", &[config.dim], h.shape()));
                }
                acc.iter_mut().zip(h.data()).for_each(|(a, x)| *a += x);
            }
            acc.iter().map(|a| a / heads.len() as f64).collect()
        }
    };
    Tensor::vector(pre.into_iter().map(|x| leaky(x, config.leaky_slope)).collect())
}

/// Frozen output of a forward pass: every layer's entity matrix, the
/// relation table and the value encodings.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    /// `layers[l]` is the input of layer `l`; the last entry is final.
    pub layers: Vec<Tensor>,
    pub relations: Tensor,
    pub values: Option<Tensor>,
}

/// Runs the network on constants and keeps every layer's output.
pub fn embed(
    params: &ModelParams,
    graph: &PropagationGraph,
    values: &[AttributeValue],
) -> Result<Embeddings> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let fwd = forward(&mut tape, &params.config, &bound, graph, values)?;
    Ok(Embeddings {
        layers: fwd.layers.iter().map(|&v| tape.value(v).clone()).collect(),
        relations: params.relation.clone(),
        values: fwd.values.map(|v| tape.value(v).clone()),
    })
}

impl Embeddings {
    /// Final entity vectors, `|E| × k`.
    pub fn entities(&self) -> &Tensor {
        self.layers.last().expect("layer 0 always present")
    }

    fn neighbor_vec(&self, layer: usize, n: NeighborRef) -> Result<&[f64]> {
        match n {
            NeighborRef::Entity(e) => Ok(self.layers[layer].row(e.0)),
            NeighborRef::Value(v) => self
                .values
                .as_ref()
                .map(|t| t.row(v.0))
                .ok_or_else(|| KaneError::Lookup(format!("no encoding for value {}", v.0))),
        }
    }

    /// Attention logit of one `(h, r, n)` edge at a given layer and head.
    pub fn attention_logit(
        &self,
        params: &ModelParams,
        layer: usize,
        head: usize,
        h: EntityId,
        r: usize,
        neighbor: &[f64],
    ) -> Result<f64> {
        let config = &params.config;
        let w = layer_head(params, layer, head)?;
        let rv = self.relations.row(r);
        if neighbor.len() != rv.len() {
            return Err(KaneError::shape("attention_logit", &[rv.len()], &[neighbor.len()]));
        }
        match config.attention_form {
            AttentionForm::Bilinear => {
                let sum: Vec<f64> = rv.iter().zip(neighbor).map(|(a, b)| a + b).collect();
                Ok(leaky(dot(&matvec(w, rv)?, &matvec(w, &sum)?), config.leaky_slope))
            }
            AttentionForm::Translational => {
                let hv = self.layers[layer].row(h.0);
                Ok(-score(hv, rv, neighbor, config.norm)?)
            }
        }
    }

    /// Softmax weights over the neighborhood of `h`, in graph order.
    pub fn attention_weights(
        &self,
        params: &ModelParams,
        graph: &PropagationGraph,
        layer: usize,
        head: usize,
        h: EntityId,
    ) -> Result<Vec<f64>> {
        let nbrs = graph.neighbors(h);
        if nbrs.is_empty() {
            return Err(KaneError::Contract(format!(
                "entity {} is isolated and has no attention weights",
                h.0
            )));
        }
        let logits = nbrs
            .iter()
            .map(|&(r, n)| self.attention_logit(params, layer, head, h, r, self.neighbor_vec(layer, n)?))
            .collect::<Result<Vec<_>>>()?;
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / z).collect())
    }

    /// Attention-weighted sum `Σ π W (r + n)` for one head; `None` for an
    /// isolated entity.
    pub fn propagate_head(
        &self,
        params: &ModelParams,
        graph: &PropagationGraph,
        layer: usize,
        head: usize,
        h: EntityId,
    ) -> Result<Option<Tensor>> {
        if graph.is_isolated(h) {
            return Ok(None);
        }
        let w = layer_head(params, layer, head)?;
        let pi = self.attention_weights(params, graph, layer, head, h)?;
        let mut out = vec![0.0; w.rows()];
        for (&(r, n), p) in graph.neighbors(h).iter().zip(pi) {
            let sum: Vec<f64> = self
                .relations
                .row(r)
                .iter()
                .zip(self.neighbor_vec(layer, n)?)
                .map(|(a, b)| a + b)
                .collect();
            out.iter_mut()
                .zip(matvec(w, &sum)?)
                .for_each(|(o, x)| *o += p * x);
        }
        Ok(Some(Tensor::vector(out)?))
    }

    /// Layer `layer` output for one entity, from its own heads.
    pub fn propagate(
        &self,
        params: &ModelParams,
        graph: &PropagationGraph,
        layer: usize,
        h: EntityId,
    ) -> Result<Tensor> {
        let lp = params
            .layers
            .get(layer)
            .ok_or_else(|| KaneError::Lookup(format!("no layer {layer}")))?;
        let mut heads = Vec::with_capacity(lp.heads.len());
        for head in 0..lp.heads.len() {
            match self.propagate_head(params, graph, layer, head, h)? {
                Some(t) => heads.push(t),
                None => return Tensor::vector(self.layers[layer].row(h.0).to_vec()),
            }
        }
        aggregate(&params.config, lp, &heads)
    }
}

fn layer_head(params: &ModelParams, layer: usize, head: usize) -> Result<&Tensor> {
    params
        .layers
        .get(layer)
        .and_then(|l| l.heads.get(head))
        .ok_or_else(|| KaneError::Lookup(format!("no transform for layer {layer} head {head}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{RelationId, ValueId, WordId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config(aggregator: Aggregator, encoder: Encoder) -> ModelConfig {
        ModelConfig {
            dim: 3,
            head_dim: if aggregator == Aggregator::Average { 3 } else { 2 },
            heads: 2,
            layers: 2,
            aggregator,
            encoder,
            ..ModelConfig::default()
        }
    }

    fn toy() -> (Vec<RelationTriple>, Vec<AttributeTriple>, Vec<AttributeValue>) {
        let rel = vec![
            RelationTriple::new(0, 0, 1),
            RelationTriple::new(0, 1, 2),
            RelationTriple::new(1, 0, 2),
            RelationTriple::new(3, 1, 0),
        ];
        let attr = vec![
            AttributeTriple {
                head: EntityId(1),
                relation: RelationId(2),
                value: ValueId(0),
            },
            AttributeTriple {
                head: EntityId(4),
                relation: RelationId(2),
                value: ValueId(1),
            },
        ];
        let values = vec![
            AttributeValue {
                tokens: vec![WordId(0), WordId(1)],
            },
            AttributeValue {
                tokens: vec![WordId(2)],
            },
        ];
        (rel, attr, values)
    }

    fn setup(config: &ModelConfig) -> (ModelParams, PropagationGraph, Vec<AttributeValue>) {
        let (rel, attr, values) = toy();
        let sizes = ModelSizes {
            entities: 6,
            relations: 3,
            words: 3,
            classes: 2,
        };
        let params = ModelParams::init(config, sizes, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let graph = PropagationGraph::from_triples(6, 2, &rel, &attr, config.use_attributes);
        (params, graph, values)
    }

    #[test]
    fn graph_merge_and_isolation() {
        let (rel, attr, _) = toy();
        let g = PropagationGraph::from_triples(6, 2, &rel, &attr, true);
        assert!(g.is_isolated(EntityId(2)));
        assert!(g.is_isolated(EntityId(5)));
        assert_eq!(g.edge_count(), 6);
        assert_eq!(g.neighbors(EntityId(1)).len(), 2);
        let g = PropagationGraph::from_triples(6, 2, &rel, &attr, false);
        assert!(g.is_isolated(EntityId(4)));
        assert!(!g.has_values());
    }

    #[test]
    fn zero_layers_is_identity() {
        let config = ModelConfig {
            layers: 0,
            ..small_config(Aggregator::Concat, Encoder::Bow)
        };
        let (params, graph, values) = setup(&config);
        let emb = embed(&params, &graph, &values).unwrap();
        assert_eq!(emb.entities(), &params.entity);
    }

    #[test]
    fn batched_forward_matches_per_entity_path() {
        for aggregator in [Aggregator::Concat, Aggregator::Average] {
            for encoder in [Encoder::Bow, Encoder::Lstm] {
                for form in [AttentionForm::Bilinear, AttentionForm::Translational] {
                    let config = ModelConfig {
                        attention_form: form,
                        ..small_config(aggregator, encoder)
                    };
                    let (params, graph, values) = setup(&config);
                    let emb = embed(&params, &graph, &values).unwrap();
                    for l in 0..config.layers {
                        for h in 0..6 {
                            let want = emb.propagate(&params, &graph, l, EntityId(h)).unwrap();
                            for (a, b) in emb.layers[l + 1].row(h).iter().zip(want.data()) {
                                assert!((a - b).abs() < 1e-12, "{aggregator} {encoder} {form} l{l} e{h}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn isolated_entity_keeps_previous_vector() {
        let config = small_config(Aggregator::Concat, Encoder::Lstm);
        let (params, graph, values) = setup(&config);
        let emb = embed(&params, &graph, &values).unwrap();
        assert_eq!(emb.entities().row(5), params.entity.row(5));
    }

    #[test]
    fn attention_logit_identity_cases() {
        let config = ModelConfig {
            dim: 2,
            head_dim: 2,
            heads: 1,
            layers: 1,
            ..ModelConfig::default()
        };
        let mut params = ModelParams::init(
            &config,
            ModelSizes {
                entities: 2,
                relations: 1,
                words: 0,
                classes: 0,
            },
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        params.layers[0].heads[0] = Tensor::identity(2);
        let emb = Embeddings {
            layers: vec![params.entity.clone()],
            relations: Tensor::from_rows(&[vec![1.0, 0.0]]).unwrap(),
            values: None,
        };
        let a = emb.attention_logit(&params, 0, 0, EntityId(0), 0, &[0.0, 1.0]).unwrap();
        assert_eq!(a, 1.0);
        let b = emb.attention_logit(&params, 0, 0, EntityId(0), 0, &[-2.0, 0.0]).unwrap();
        assert!((b + 0.2).abs() < 1e-15);
    }

    #[test]
    fn score_examples() {
        assert_eq!(score(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], Norm::L1).unwrap(), 0.0);
        assert_eq!(score(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], Norm::L1).unwrap(), 2.0);
        let l2 = score(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], Norm::L2).unwrap();
        assert_eq!(l2, 2f64.sqrt());
    }

    #[test]
    fn classify_zero_head_gives_zero_scores() {
        let c = Classifier {
            weight: Tensor::zeros(&[3, 2]),
            bias: Tensor::zeros(&[1, 3]),
        };
        assert_eq!(classify(&[0.3, -1.0], &c).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn average_needs_matching_dims() {
        let config = ModelConfig {
            aggregator: Aggregator::Average,
            head_dim: 3,
            dim: 4,
            ..ModelConfig::default()
        };
        assert!(matches!(config.validate(), Err(KaneError::Config(_))));
    }
}
