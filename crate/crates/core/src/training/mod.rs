//! Negative sampling, the hinge and cross-entropy objectives, plain SGD and
//! the seeded mini-batch training loop.

mod config;

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{Task, TrainConfig};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{KaneError, Result};
use crate::evaluation::Evaluator;
use crate::kg::{AttributeTriple, Dataset, EntityId, KnowledgeGraph, Labels, RelationTriple, ValueId};
use crate::model::{
    classify_rows, forward, score_rows, BoundParams, ModelParams, ModelSizes, PropagationGraph,
};

/// A training fact of either kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Triple {
    Relation(RelationTriple),
    Attribute(AttributeTriple),
}

/// Draws corrupted triples, optionally rejecting ones that are known
/// positives.
#[derive(Clone, Debug)]
pub struct Corrupter {
    relations: HashSet<RelationTriple>,
    attributes: HashSet<AttributeTriple>,
    entity_count: usize,
    value_count: usize,
    filter: bool,
}

const SAMPLE_ATTEMPTS: usize = 64;

impl Corrupter {
    /// Known positives are every relation and attribute triple of `kg`.
    pub fn new(kg: &KnowledgeGraph, filter: bool) -> Result<Self> {
        if kg.entity_count() < 2 {
            return Err(KaneError::Sampling(format!(
                "cannot corrupt triples in a graph with {} entit{}",
                kg.entity_count(),
                if kg.entity_count() == 1 { "y" } else { "ies" }
            )));
        }
        Ok(Corrupter {
            relations: kg.relation_triples().iter().copied().collect(),
            attributes: kg.attribute_triples().iter().copied().collect(),
            entity_count: kg.entity_count(),
            value_count: kg.value_count(),
            filter,
        })
    }

    pub fn is_known(&self, t: &Triple) -> bool {
        match t {
            Triple::Relation(t) => self.relations.contains(t),
            Triple::Attribute(t) => self.attributes.contains(t),
        }
    }

    fn replace(t: Triple, tail: bool, c: usize) -> Triple {
        match (t, tail) {
            (Triple::Relation(mut r), false) => {
                r.head = EntityId(c);
                Triple::Relation(r)
            }
            (Triple::Relation(mut r), true) => {
                r.tail = EntityId(c);
                Triple::Relation(r)
            }
            (Triple::Attribute(mut a), false) => {
                a.head = EntityId(c);
                Triple::Attribute(a)
            }
            (Triple::Attribute(mut a), true) => {
                a.value = ValueId(c);
                Triple::Attribute(a)
            }
        }
    }

    fn side(t: Triple, tail: bool) -> usize {
        match (t, tail) {
            (Triple::Relation(r), false) => r.head.0,
            (Triple::Relation(r), true) => r.tail.0,
            (Triple::Attribute(a), false) => a.head.0,
            (Triple::Attribute(a), true) => a.value.0,
        }
    }

    fn pool(&self, t: Triple, tail: bool) -> usize {
        match t {
            Triple::Attribute(_) if tail => self.value_count,
            _ => self.entity_count,
        }
    }

    fn accept(&self, t: &Triple) -> bool {
        !self.filter || !self.is_known(t)
    }

    fn corrupt_side(&self, t: Triple, tail: bool, rng: &mut (impl Rng + ?Sized)) -> Option<Triple> {
        let n = self.pool(t, tail);
        if n < 2 {
            return None;
        }
        let current = Self::side(t, tail);
        for _ in 0..SAMPLE_ATTEMPTS {
            let mut c = rng.gen_range(0..n - 1);
            if c >= current {
                c += 1;
            }
            let cand = Self::replace(t, tail, c);
            if self.accept(&cand) {
                return Some(cand);
            }
        }
        let valid: Vec<Triple> = (0..n)
            .filter(|&c| c != current)
            .map(|c| Self::replace(t, tail, c))
            .filter(|c| self.accept(c))
            .collect();
        valid.choose(rng).copied()
    }

    /// `n` corruptions of `t`, each replacing the head or the tail (the
    /// value, for attribute triples) chosen uniformly.
    pub fn corrupt(&self, t: Triple, rng: &mut (impl Rng + ?Sized), n: usize) -> Result<Vec<Triple>> {
        (0..n)
            .map(|_| {
                let tail = rng.gen_bool(0.5);
                self.corrupt_side(t, tail, rng)
                    .or_else(|| self.corrupt_side(t, !tail, rng))
                    .ok_or_else(|| {
                        KaneError::Sampling(format!("no valid corruption exists for {t:?}"))
                    })
            })
            .collect()
    }
}

/// `Σ [γ + d⁺ − d⁻]₊` over aligned pairs of distance vectors.
pub fn hinge_loss(tape: &mut Tape, pos: Var, neg: Var, margin: f64) -> Result<Var> {
    let n = tape.value(pos).len();
    let gamma = tape.constant(Tensor::full(&[n], margin));
    let a = tape.add(gamma, pos)?;
    let gap = tape.sub(a, neg)?;
    let hinge = tape.relu(gap);
    Ok(tape.sum(hinge))
}

/// Plain-number form of [`hinge_loss`].
pub fn hinge_loss_values(pos: &[f64], neg: &[f64], margin: f64) -> Result<f64> {
    if pos.len() != neg.len() {
        return Err(KaneError::shape("hinge_loss", &[pos.len()], &[neg.len()]));
    }
    Ok(pos
        .iter()
        .zip(neg)
        .map(|(p, n)| (margin + p - n).max(0.0))
        .sum())
}

/// Mean over entities of the summed per-class binary cross-entropy against
/// one-hot targets. `labels[i]` is the class of row `i` of `scores`.
pub fn bce_loss(tape: &mut Tape, scores: Var, labels: &[Option<usize>]) -> Result<Var> {
    let shape = tape.value(scores).shape().to_vec();
    if shape.len() != 2 || shape[0] != labels.len() {
        return Err(KaneError::shape("bce_loss", &shape, &[labels.len()]));
    }
    let c = shape[1];
    let mut targets = Tensor::zeros(&shape);
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(j) if *j < c => targets.row_mut(i)[*j] = 1.0,
            Some(j) => {
                return Err(KaneError::Contract(format!("label {j} out of range for {c} classes")))
            }
            None => {
                return Err(KaneError::Contract(format!(
                    "entity at row {i} has no label"
                )))
            }
        }
    }
    let targets = tape.constant(targets);
    tape.bce_with_logits(scores, targets)
}

/// `p ← p − λ g` for every tensor, in [`ModelParams::tensors`] order.
/// Nothing is updated when any gradient is non-finite.
pub fn sgd_step(params: &mut ModelParams, grads: &[Tensor], lr: f64) -> Result<()> {
    let mut slots = params.tensors_mut();
    if slots.len() != grads.len() {
        return Err(KaneError::Contract(format!(
            "{} gradients for {} parameters",
            grads.len(),
            slots.len()
        )));
    }
    for ((name, p), g) in slots.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(KaneError::shape("sgd_step", p.shape(), g.shape()));
        }
        if !g.is_finite() {
            return Err(KaneError::NonFiniteGradient {
                parameter: name.clone(),
                epoch: 0,
                batch: 0,
            });
        }
    }
    for ((_, p), g) in slots.iter_mut().zip(grads) {
        for (x, d) in p.data_mut().iter_mut().zip(g.data()) {
            *x -= lr * d;
        }
    }
    Ok(())
}

fn triple_indices(triples: &[Triple], entity_count: usize) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut h = Vec::with_capacity(triples.len());
    let mut r = Vec::with_capacity(triples.len());
    let mut t = Vec::with_capacity(triples.len());
    for tr in triples {
        match tr {
            Triple::Relation(x) => {
                h.push(x.head.0);
                r.push(x.relation.0);
                t.push(x.tail.0);
            }
            Triple::Attribute(x) => {
                h.push(x.head.0);
                r.push(x.relation.0);
                t.push(entity_count + x.value.0);
            }
        }
    }
    (h, r, t)
}

/// Distances `‖h + r − t‖` of a list of triples under one forward pass.
/// Attribute tails are the encoded values.
pub fn triple_distances(
    tape: &mut Tape,
    params: &ModelParams,
    bound: &BoundParams,
    entities: Var,
    values: Option<Var>,
    triples: &[Triple],
) -> Result<Var> {
    let e = tape.value(entities).rows();
    let (h, r, t) = triple_indices(triples, e);
    let tails = match values {
        Some(v) if t.iter().any(|&i| i >= e) => tape.concat_rows(&[entities, v])?,
        _ => entities,
    };
    let hv = tape.gather_rows(entities, h.into())?;
    let rv = tape.gather_rows(bound.relation, r.into())?;
    let tv = tape.gather_rows(tails, t.into())?;
    score_rows(tape, hv, rv, tv, params.config.norm)
}

/// Hinge loss of `positives` against `negatives`, where negatives come in
/// consecutive groups of `negatives.len() / positives.len()`.
pub fn completion_loss(
    params: &ModelParams,
    graph: &PropagationGraph,
    values: &[crate::kg::AttributeValue],
    positives: &[Triple],
    negatives: &[Triple],
    margin: f64,
    trainable: bool,
) -> Result<(Tape, BoundParams, Var)> {
    if positives.is_empty() || negatives.len() % positives.len() != 0 || negatives.is_empty() {
        return Err(KaneError::Contract(format!(
            "{} negatives cannot be paired with {} positives",
            negatives.len(),
            positives.len()
        )));
    }
    let per = negatives.len() / positives.len();
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, trainable);
    let fwd = forward(&mut tape, &params.config, &bound, graph, values)?;
    let repeated: Vec<Triple> = positives
        .iter()
        .flat_map(|p| std::iter::repeat(*p).take(per))
        .collect();
    let dp = triple_distances(&mut tape, params, &bound, fwd.entities(), fwd.values, &repeated)?;
    let dn = triple_distances(&mut tape, params, &bound, fwd.entities(), fwd.values, negatives)?;
    let loss = hinge_loss(&mut tape, dp, dn, margin)?;
    Ok((tape, bound, loss))
}

/// Cross-entropy of the classifier on `entities`.
pub fn classification_loss(
    params: &ModelParams,
    graph: &PropagationGraph,
    values: &[crate::kg::AttributeValue],
    entities: &[EntityId],
    labels: &Labels,
    trainable: bool,
) -> Result<(Tape, BoundParams, Var)> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, trainable);
    let classifier = bound
        .classifier
        .ok_or_else(|| KaneError::Contract("model has no classifier head".into()))?;
    let fwd = forward(&mut tape, &params.config, &bound, graph, values)?;
    let idx: Vec<usize> = entities.iter().map(|e| e.0).collect();
    let rows = tape.gather_rows(fwd.entities(), idx.into())?;
    let scores = classify_rows(&mut tape, rows, classifier)?;
    let classes: Vec<Option<usize>> = entities.iter().map(|&e| labels.class(e)).collect();
    let loss = bce_loss(&mut tape, scores, &classes)?;
    Ok((tape, bound, loss))
}

/// Gradients of `loss` for every parameter, in [`ModelParams::tensors`]
/// order.
pub fn gradients(tape: &Tape, bound: &BoundParams, loss: Var) -> Result<Vec<Tensor>> {
    let mut g = tape.backward(loss)?;
    bound
        .all
        .iter()
        .map(|&v| {
            g.take(v)
                .ok_or_else(|| KaneError::Contract("parameter without gradient".into()))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_metric: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch after which patience ran out, if it did.
    pub early_stop_epoch: Option<usize>,
    /// Epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
    pub best_val_metric: Option<f64>,
}

impl TrainReport {
    /// `epoch,loss,val_metric,seconds` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,val_metric,seconds\n");
        for e in &self.epochs {
            let val = e.val_metric.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{},{:.3}\n", e.epoch, e.loss, val, e.seconds));
        }
        s
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }
}

/// Random generator position after training, enough to resume the stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngState {
    pub seed: u64,
    pub word_pos: u128,
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub params: ModelParams,
    pub report: TrainReport,
    pub rng: RngState,
}

/// Fresh parameters for `dataset`, drawn from `rng`.
pub fn init_params(dataset: &Dataset, config: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<ModelParams> {
    let mut sizes = ModelSizes::of(dataset);
    if config.task == Task::Completion {
        sizes.classes = 0;
    }
    ModelParams::init(&config.model, sizes, rng)
}

fn with_position(e: KaneError, epoch: usize, batch: usize) -> KaneError {
    match e {
        KaneError::NonFiniteGradient { parameter, .. } => KaneError::NonFiniteGradient {
            parameter,
            epoch,
            batch,
        },
        other => other,
    }
}

fn normalize_entity_rows(params: &mut ModelParams) {
    for i in 0..params.entity.rows() {
        let row = params.entity.row_mut(i);
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            row.iter_mut().for_each(|x| *x /= n);
        }
    }
}

/// Seeded mini-batch SGD with periodic validation and early stopping.
/// When validation ran, the parameters of the latest check that matched
/// the best validation metric are returned. Only strict improvements
/// reset the patience counter.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<Trained> {
    config.validate()?;
    dataset.split.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init_params(dataset, config, &mut rng)?;
    let graph = PropagationGraph::for_dataset(dataset, config.model.use_attributes);
    let values = dataset.kg.values();

    let labels = match config.task {
        Task::Classification => Some(dataset.split.labels.as_ref().ok_or_else(|| {
            KaneError::Config("classification training needs labels".into())
        })?),
        Task::Completion => None,
    };
    let items: Vec<Triple> = match config.task {
        Task::Completion => {
            let mut v: Vec<Triple> = dataset.split.train.iter().map(|&t| Triple::Relation(t)).collect();
            if config.model.use_attributes && params.words.is_some() {
                v.extend(dataset.kg.attribute_triples().iter().map(|&t| Triple::Attribute(t)));
            }
            v
        }
        Task::Classification => Vec::new(),
    };
    let mut entities: Vec<EntityId> = labels.map(|l| l.train.clone()).unwrap_or_default();
    if config.task == Task::Classification && entities.is_empty() {
        return Err(KaneError::Config("no labeled training entities".into()));
    }
    if config.task == Task::Completion && items.is_empty() {
        return Err(KaneError::Config("no training triples".into()));
    }
    let corrupter = match config.task {
        Task::Completion => Some(Corrupter::new(&dataset.kg, config.filter_negatives)?),
        Task::Classification => None,
    };
    let validate = config.eval_every > 0
        && match config.task {
            Task::Completion => !dataset.split.valid.is_empty(),
            Task::Classification => labels.is_some_and(|l| !l.valid.is_empty()),
        };

    let lr = config.effective_learning_rate();
    let mut report = TrainReport::default();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut stale = 0;
    let mut order: Vec<usize> = (0..items.len().max(entities.len())).collect();
    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let mut total = 0.0;
        let mut batches = 0;
        match config.task {
            Task::Completion => order.shuffle(&mut rng),
            Task::Classification => entities.shuffle(&mut rng),
        }
        let n_items = if config.task == Task::Completion { items.len() } else { entities.len() };
        for (b, chunk) in (0..n_items).collect::<Vec<_>>().chunks(config.batch_size).enumerate() {
            let (tape, bound, loss) = match config.task {
                Task::Completion => {
                    let corrupter = corrupter.as_ref().expect("completion has a corrupter");
                    let pos: Vec<Triple> = chunk.iter().map(|&i| items[order[i]]).collect();
                    let mut neg = Vec::with_capacity(pos.len() * config.negatives);
                    for p in &pos {
                        neg.extend(corrupter.corrupt(*p, &mut rng, config.negatives)?);
                    }
                    completion_loss(&params, &graph, values, &pos, &neg, config.margin, true)?
                }
                Task::Classification => {
                    let batch: Vec<EntityId> = chunk.iter().map(|&i| entities[i]).collect();
                    classification_loss(&params, &graph, values, &batch, labels.unwrap(), true)?
                }
            };
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(KaneError::NonFiniteLoss {
                    loss: value,
                    epoch,
                    batch: b,
                });
            }
            let grads = gradients(&tape, &bound, loss)?;
            sgd_step(&mut params, &grads, lr).map_err(|e| with_position(e, epoch, b))?;
            total += value;
            batches += 1;
        }
        if config.renormalize {
            normalize_entity_rows(&mut params);
        }
        let mut record = EpochRecord {
            epoch,
            loss: total / batches.max(1) as f64,
            val_metric: None,
            seconds: 0.0,
        };
        let mut stop = false;
        if validate && epoch % config.eval_every == 0 {
            let metric = validation_metric(&params, dataset, config.task)?;
            record.val_metric = Some(metric);
            let previous = best.as_ref().map(|(m, _, _)| *m);
            if previous.map_or(true, |m| metric >= m) {
                best = Some((metric, epoch, params.clone()));
            }
            if previous.map_or(true, |m| metric > m) {
                stale = 0;
            } else {
                stale += 1;
                stop = stale >= config.patience;
            }
        }
        record.seconds = start.elapsed().as_secs_f64();
        report.epochs.push(record);
        if stop {
            report.early_stop_epoch = Some(epoch);
            break;
        }
    }
    if let Some((metric, epoch, p)) = best {
        params = p;
        report.best_epoch = Some(epoch);
        report.best_val_metric = Some(metric);
    }
    Ok(Trained {
        params,
        report,
        rng: RngState {
            seed: config.seed,
            word_pos: rng.get_word_pos(),
        },
    })
}

/// Filtered entity Hits@10 on the validation triples, or validation
/// accuracy for classification.
pub fn validation_metric(params: &ModelParams, dataset: &Dataset, task: Task) -> Result<f64> {
    let ev = Evaluator::new(params, dataset)?;
    match task {
        Task::Completion => Ok(ev.entity_report(&dataset.split.valid)?.hits_filtered),
        Task::Classification => {
            let labels = dataset
                .split
                .labels
                .as_ref()
                .ok_or_else(|| KaneError::Config("classification needs labels".into()))?;
            ev.accuracy(&labels.valid, labels)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_entity_kg() -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::new();
        kg.load_relations("e0\tr\te1\n").unwrap();
        kg
    }

    #[test]
    fn two_entity_corruptions_are_exhaustive() {
        let kg = two_entity_kg();
        let c = Corrupter::new(&kg, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let seen: HashSet<Triple> = c
            .corrupt(Triple::Relation(RelationTriple::new(0, 0, 1)), &mut rng, 200)
            .unwrap()
            .into_iter()
            .collect();
        let want: HashSet<Triple> = [RelationTriple::new(1, 0, 1), RelationTriple::new(0, 0, 0)]
            .into_iter()
            .map(Triple::Relation)
            .collect();
        assert_eq!(seen, want);
    }

    #[test]
    fn single_entity_graph_cannot_be_corrupted() {
        let mut kg = KnowledgeGraph::new();
        kg.load_relations("e\tr\te\n").unwrap();
        assert!(matches!(Corrupter::new(&kg, true), Err(KaneError::Sampling(_))));
    }

    #[test]
    fn exhausted_sides_are_an_error() {
        let mut kg = KnowledgeGraph::new();
        kg.load_relations("a\tr\tb\nb\tr\tb\na\tr\ta\nb\tr\ta\n").unwrap();
        let c = Corrupter::new(&kg, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = Triple::Relation(RelationTriple::new(0, 0, 1));
        assert!(matches!(c.corrupt(t, &mut rng, 1), Err(KaneError::Sampling(_))));
    }

    #[test]
    fn attribute_tails_are_replaced_by_values() {
        let mut kg = KnowledgeGraph::new();
        kg.load_relations("a\tr\tb\n").unwrap();
        kg.load_attributes("a\tname\t\"x\"\nb\tname\t\"y\"\na\tage\t\"z\"\n").unwrap();
        let c = Corrupter::new(&kg, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = Triple::Attribute(kg.attribute_triples()[0]);
        for n in c.corrupt(t, &mut rng, 100).unwrap() {
            let Triple::Attribute(a) = n else { panic!("kind changed") };
            assert!(a.head.0 < 2 && a.value.0 < 3);
            assert!(!kg.contains_attribute_triple(&a));
        }
    }

    #[test]
    fn hinge_examples() {
        assert_eq!(hinge_loss_values(&[1.0], &[3.0], 1.0).unwrap(), 0.0);
        assert_eq!(hinge_loss_values(&[2.0], &[2.0], 1.0).unwrap(), 1.0);
        assert_eq!(hinge_loss_values(&[1.0, 2.0], &[3.0, 2.0], 1.0).unwrap(), 1.0);
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let n = tape.constant(Tensor::vector(vec![3.0, 2.0]).unwrap());
        let l = hinge_loss(&mut tape, p, n, 1.0).unwrap();
        assert_eq!(tape.value(l).item(), 1.0);
    }

    #[test]
    fn bce_examples() {
        let mut tape = Tape::new();
        let s = tape.constant(Tensor::zeros(&[1, 2]));
        let l = bce_loss(&mut tape, s, &[Some(0)]).unwrap();
        assert!((tape.value(l).item() - 1.3862943611198906).abs() < 1e-12);
        let s = tape.constant(Tensor::from_rows(&[vec![40.0, -40.0]]).unwrap());
        let l = bce_loss(&mut tape, s, &[Some(0)]).unwrap();
        assert!(tape.value(l).item() < 1e-15);
        assert!(matches!(bce_loss(&mut tape, s, &[None]), Err(KaneError::Contract(_))));
    }

    fn tiny_params() -> ModelParams {
        let config = crate::model::ModelConfig::transe(2, crate::model::Norm::L1);
        let sizes = ModelSizes {
            entities: 2,
            relations: 1,
            words: 0,
            classes: 0,
        };
        ModelParams::init(&config, sizes, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn sgd_arithmetic() {
        let mut p = tiny_params();
        p.entity = Tensor::full(&[2, 2], 1.0);
        let before = p.clone();
        let zero: Vec<Tensor> = p.tensors().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        sgd_step(&mut p, &zero, 0.1).unwrap();
        assert_eq!(p, before);
        let twos: Vec<Tensor> = p.tensors().iter().map(|(_, t)| Tensor::full(t.shape(), 2.0)).collect();
        sgd_step(&mut p, &twos, 0.0).unwrap();
        assert_eq!(p, before);
        sgd_step(&mut p, &twos, 0.1).unwrap();
        assert!(p.entity.data().iter().all(|&x| x == 0.8));
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = tiny_params();
        let before = p.clone();
        let mut g: Vec<Tensor> = p.tensors().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        g[1].data_mut()[0] = f64::NAN;
        match sgd_step(&mut p, &g, 0.1) {
            Err(KaneError::NonFiniteGradient { parameter, .. }) => assert_eq!(parameter, "relation"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(p, before);
    }
}
