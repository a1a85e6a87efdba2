//! Link-prediction ranking under the raw and filtered settings, and
//! classification accuracy.
//!
//! Ranks are optimistic: `1 + #candidates with a strictly smaller distance`.
//! Head and tail queries of every triple are pooled.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{KaneError, Result};
use crate::kg::{Dataset, EntityId, Labels, RelationId, RelationTriple};
use crate::model::{classify, embed, score, Classifier, Embeddings, ModelParams, Norm, PropagationGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Setting {
    Raw,
    Filter,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Setting::Raw => "raw",
            Setting::Filter => "filter",
        }
    }
}

/// Which end of a triple a query asks for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Head,
    Tail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankTask {
    EntityPrediction,
    RelationPrediction,
}

impl RankTask {
    pub fn name(self) -> &'static str {
        match self {
            RankTask::EntityPrediction => "entity_prediction",
            RankTask::RelationPrediction => "relation_prediction",
        }
    }
}

/// Rank of the true entity of `triple` on `side` among all entities.
pub fn rank_entity(
    emb: &Embeddings,
    norm: Norm,
    known: &HashSet<RelationTriple>,
    triple: RelationTriple,
    side: Side,
    setting: Setting,
) -> Result<usize> {
    let x = emb.entities();
    let r = emb.relations.row(triple.relation.0);
    let dist = |c: usize| -> Result<f64> {
        match side {
            Side::Tail => score(x.row(triple.head.0), r, x.row(c), norm),
            Side::Head => score(x.row(c), r, x.row(triple.tail.0), norm),
        }
    };
    let truth = match side {
        Side::Head => triple.head.0,
        Side::Tail => triple.tail.0,
    };
    let d_true = dist(truth)?;
    let mut better = 0;
    for c in 0..x.rows() {
        if c == truth {
            continue;
        }
        if setting == Setting::Filter {
            let mut cand = triple;
            match side {
                Side::Head => cand.head = EntityId(c),
                Side::Tail => cand.tail = EntityId(c),
            }
            if known.contains(&cand) {
                continue;
            }
        }
        if dist(c)? < d_true {
            better += 1;
        }
    }
    Ok(better + 1)
}

/// Rank of the true relation of `triple` among `candidates`.
pub fn rank_relation(
    emb: &Embeddings,
    norm: Norm,
    known: &HashSet<RelationTriple>,
    candidates: &[RelationId],
    triple: RelationTriple,
    setting: Setting,
) -> Result<usize> {
    let x = emb.entities();
    let (h, t) = (x.row(triple.head.0), x.row(triple.tail.0));
    let d_true = score(h, emb.relations.row(triple.relation.0), t, norm)?;
    let mut better = 0;
    for &c in candidates {
        if c == triple.relation {
            continue;
        }
        if setting == Setting::Filter && known.contains(&RelationTriple { relation: c, ..triple }) {
            continue;
        }
        if score(h, emb.relations.row(c.0), t, norm)? < d_true {
            better += 1;
        }
    }
    Ok(better + 1)
}

/// `(mean rank, fraction of ranks ≤ k)`.
pub fn aggregate_metrics(ranks: &[usize], k: usize) -> Result<(f64, f64)> {
    if ranks.is_empty() {
        return Err(KaneError::Contract("no ranks to aggregate".into()));
    }
    let n = ranks.len() as f64;
    let mean = ranks.iter().map(|&r| r as f64).sum::<f64>() / n;
    let hits = ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    Ok((mean, hits))
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Fraction of `entities` whose top class equals their label.
pub fn classification_accuracy(
    entity_vectors: &crate::autodiff::Tensor,
    classifier: &Classifier,
    entities: &[EntityId],
    labels: &Labels,
) -> Result<f64> {
    if entities.is_empty() {
        return Err(KaneError::Contract("empty classification test set".into()));
    }
    let mut correct = 0;
    for &e in entities {
        let label = labels
            .class(e)
            .ok_or_else(|| KaneError::Contract(format!("entity {} has no label", e.0)))?;
        if argmax(&classify(entity_vectors.row(e.0), classifier)?) == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / entities.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankingReport {
    pub task: RankTask,
    pub k: usize,
    pub mean_rank_raw: f64,
    pub mean_rank_filtered: f64,
    pub hits_raw: f64,
    pub hits_filtered: f64,
    pub ranks_raw: Vec<usize>,
    pub ranks_filtered: Vec<usize>,
}

impl RankingReport {
    pub fn from_ranks(task: RankTask, k: usize, raw: Vec<usize>, filtered: Vec<usize>) -> Result<Self> {
        let (mean_rank_raw, hits_raw) = aggregate_metrics(&raw, k)?;
        let (mean_rank_filtered, hits_filtered) = aggregate_metrics(&filtered, k)?;
        Ok(RankingReport {
            task,
            k,
            mean_rank_raw,
            mean_rank_filtered,
            hits_raw,
            hits_filtered,
            ranks_raw: raw,
            ranks_filtered: filtered,
        })
    }

    pub fn queries(&self) -> usize {
        self.ranks_raw.len()
    }

    fn tsv_rows(&self, out: &mut String) {
        let t = self.task.name();
        for (setting, mr, hits) in [
            ("raw", self.mean_rank_raw, self.hits_raw),
            ("filter", self.mean_rank_filtered, self.hits_filtered),
        ] {
            let _ = writeln!(out, "{t}\t{setting}\tmean_rank\t{mr}");
            let _ = writeln!(out, "{t}\t{setting}\thits@{}\t{hits}", self.k);
        }
    }
}

/// `kane`, or `transe-mode` for the propagation-free, attribute-free model.
pub fn model_label(params: &ModelParams) -> &'static str {
    if params.config.is_transe_mode() {
        "transe-mode"
    } else {
        "kane"
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionReport {
    pub model: String,
    pub entity: RankingReport,
    pub relation: RankingReport,
}

impl CompletionReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("model: {}\n", self.model);
        for r in [&self.entity, &self.relation] {
            let _ = writeln!(
                s,
                "{} ({} queries)\n  raw     mean rank {:>10.3}  hits@{} {:.4}\n  filter  mean rank {:>10.3}  hits@{} {:.4}",
                r.task.name(),
                r.queries(),
                r.mean_rank_raw,
                r.k,
                r.hits_raw,
                r.mean_rank_filtered,
                r.k,
                r.hits_filtered
            );
        }
        s
    }

    /// `task<TAB>setting<TAB>metric<TAB>value` rows after a header.
    pub fn to_tsv(&self) -> String {
        let mut s = format!("# model: {}\ntask\tsetting\tmetric\tvalue\n", self.model);
        self.entity.tsv_rows(&mut s);
        self.relation.tsv_rows(&mut s);
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationReport {
    pub model: String,
    pub entities: usize,
    pub accuracy: f64,
}

impl ClassificationReport {
    pub fn to_text(&self) -> String {
        format!(
            "model: {}\nentity_classification ({} entities)\n  accuracy {:.4}\n",
            self.model, self.entities, self.accuracy
        )
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "# model: {}\ntask\tsetting\tmetric\tvalue\nentity_classification\ttest\taccuracy\t{}\n",
            self.model, self.accuracy
        )
    }
}

/// Frozen model plus everything needed to rank queries on one dataset.
pub struct Evaluator<'a> {
    params: &'a ModelParams,
    pub embeddings: Embeddings,
    known: HashSet<RelationTriple>,
    relation_candidates: Vec<RelationId>,
}

impl<'a> Evaluator<'a> {
    pub fn new(params: &'a ModelParams, dataset: &Dataset) -> Result<Self> {
        let graph = PropagationGraph::for_dataset(dataset, params.config.use_attributes);
        let embeddings = embed(params, &graph, dataset.kg.values())?;
        Ok(Evaluator {
            params,
            embeddings,
            known: dataset.kg.relation_triples().iter().copied().collect(),
            relation_candidates: dataset.kg.entity_relations(),
        })
    }

    pub fn known(&self) -> &HashSet<RelationTriple> {
        &self.known
    }

    pub fn relation_candidates(&self) -> &[RelationId] {
        &self.relation_candidates
    }

    pub fn rank_entity(&self, triple: RelationTriple, side: Side, setting: Setting) -> Result<usize> {
        rank_entity(&self.embeddings, self.params.config.norm, &self.known, triple, side, setting)
    }

    pub fn rank_relation(&self, triple: RelationTriple, setting: Setting) -> Result<usize> {
        rank_relation(
            &self.embeddings,
            self.params.config.norm,
            &self.known,
            &self.relation_candidates,
            triple,
            setting,
        )
    }

    /// Head and tail queries of every triple, pooled; Hits@10.
    pub fn entity_report(&self, triples: &[RelationTriple]) -> Result<RankingReport> {
        let (mut raw, mut filtered) = (Vec::new(), Vec::new());
        for &t in triples {
            for side in [Side::Head, Side::Tail] {
                raw.push(self.rank_entity(t, side, Setting::Raw)?);
                filtered.push(self.rank_entity(t, side, Setting::Filter)?);
            }
        }
        RankingReport::from_ranks(RankTask::EntityPrediction, 10, raw, filtered)
    }

    /// One query per triple; Hits@1.
    pub fn relation_report(&self, triples: &[RelationTriple]) -> Result<RankingReport> {
        let (mut raw, mut filtered) = (Vec::new(), Vec::new());
        for &t in triples {
            raw.push(self.rank_relation(t, Setting::Raw)?);
            filtered.push(self.rank_relation(t, Setting::Filter)?);
        }
        RankingReport::from_ranks(RankTask::RelationPrediction, 1, raw, filtered)
    }

    pub fn completion_report(&self, triples: &[RelationTriple]) -> Result<CompletionReport> {
        Ok(CompletionReport {
            model: model_label(self.params).into(),
            entity: self.entity_report(triples)?,
            relation: self.relation_report(triples)?,
        })
    }

    pub fn accuracy(&self, entities: &[EntityId], labels: &Labels) -> Result<f64> {
        let classifier = self
            .params
            .classifier
            .as_ref()
            .ok_or_else(|| KaneError::Contract("model has no classifier head".into()))?;
        classification_accuracy(self.embeddings.entities(), classifier, entities, labels)
    }

    pub fn classification_report(&self, entities: &[EntityId], labels: &Labels) -> Result<ClassificationReport> {
        Ok(ClassificationReport {
            model: model_label(self.params).into(),
            entities: entities.len(),
            accuracy: self.accuracy(entities, labels)?,
        })
    }
}
