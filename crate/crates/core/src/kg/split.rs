use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EntityId, Interner, KnowledgeGraph, RelationTriple};
use crate::error::{KaneError, Result};

/// Entity class assignments plus the train/valid/test partition of the
/// labeled entities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labels {
    pub classes: Interner,
    /// Indexed by entity id; `None` for unlabeled entities.
    pub class_of: Vec<Option<usize>>,
    pub train: Vec<EntityId>,
    pub valid: Vec<EntityId>,
    pub test: Vec<EntityId>,
}

impl Labels {
    /// Parses `entity<TAB>class_name` lines. Every entity must already be
    /// known to the graph.
    pub fn parse(kg: &KnowledgeGraph, text: &str) -> Result<Self> {
        let mut classes = Interner::new();
        let mut class_of = vec![None; kg.entity_count()];
        for line in text.lines().enumerate().filter_map(|(i, l)| {
            let l = l.strip_suffix('\r').unwrap_or(l);
            (!l.trim().is_empty() && !l.starts_with('#')).then_some((i + 1, l))
        }) {
            let (n, raw) = line;
            let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
            if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
                return Err(KaneError::Parse {
                    source_name: "<input>".into(),
                    line: n,
                    message: "expected `entity<TAB>class`".into(),
                });
            }
            let entity = kg.entity_id(fields[0]).ok_or_else(|| KaneError::Parse {
                source_name: "<input>".into(),
                line: n,
                message: format!("label for unknown entity {:?}", fields[0]),
            })?;
            let class = classes.intern(fields[1]);
            match class_of[entity.0] {
                Some(c) if c != class => {
                    return Err(KaneError::Parse {
                        source_name: "<input>".into(),
                        line: n,
                        message: format!("entity {:?} has two labels", fields[0]),
                    })
                }
                _ => class_of[entity.0] = Some(class),
            }
        }
        Ok(Labels {
            classes,
            class_of,
            train: Vec::new(),
            valid: Vec::new(),
            test: Vec::new(),
        })
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn labeled(&self) -> impl Iterator<Item = (EntityId, usize)> + '_ {
        self.class_of
            .iter()
            .enumerate()
            .filter_map(|(e, c)| c.map(|c| (EntityId(e), c)))
    }

    pub fn class(&self, e: EntityId) -> Option<usize> {
        self.class_of.get(e.0).copied().flatten()
    }

    pub fn to_tsv(&self, kg: &KnowledgeGraph) -> String {
        self.labeled()
            .map(|(e, c)| format!("{}\t{}\n", kg.entity_name(e), self.classes.name(c)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitFractions {
    pub valid: f64,
    pub test: f64,
    pub label_valid: f64,
    pub label_test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            valid: 0.1,
            test: 0.1,
            label_valid: 0.2,
            label_test: 0.2,
        }
    }
}

/// Held-out relation triples for link prediction and, optionally, held-out
/// labeled entities for classification. Attribute triples are always
/// training data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<RelationTriple>,
    pub valid: Vec<RelationTriple>,
    pub test: Vec<RelationTriple>,
    pub labels: Option<Labels>,
}

impl DatasetSplit {
    pub fn class_count(&self) -> usize {
        self.labels.as_ref().map_or(0, Labels::class_count)
    }

    /// Checks disjointness and that every held-out entity and relation
    /// occurs in a training relation triple.
    pub fn validate(&self) -> Result<()> {
        let train: HashSet<_> = self.train.iter().collect();
        let valid: HashSet<_> = self.valid.iter().collect();
        if self.valid.iter().any(|t| train.contains(t))
            || self.test.iter().any(|t| train.contains(t) || valid.contains(t))
        {
            return Err(KaneError::Contract("splits overlap".into()));
        }
        let ents: HashSet<EntityId> = self.train.iter().flat_map(|t| [t.head, t.tail]).collect();
        let rels: HashSet<_> = self.train.iter().map(|t| t.relation).collect();
        for t in self.valid.iter().chain(&self.test) {
            if !ents.contains(&t.head) || !ents.contains(&t.tail) || !rels.contains(&t.relation)
            {
                return Err(KaneError::Contract(format!(
                    "held-out triple {t:?} mentions an item missing from train"
                )));
            }
        }
        if let Some(l) = &self.labels {
            let mut seen = HashSet::new();
            for e in l.train.iter().chain(&l.valid).chain(&l.test) {
                if !seen.insert(*e) || l.class(*e).is_none() {
                    return Err(KaneError::Contract(format!(
                        "labeled entity {e:?} is unlabeled or split twice"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn holdout_size(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction).round() as usize
}

/// Seeded random split of the graph's relation triples (and of labeled
/// entities, when given). A triple is held out only while every entity and
/// relation it mentions keeps at least one training occurrence.
pub fn split_dataset(
    kg: &KnowledgeGraph,
    labels: Option<Labels>,
    fractions: SplitFractions,
    seed: u64,
) -> Result<DatasetSplit> {
    for f in [
        fractions.valid,
        fractions.test,
        fractions.label_valid,
        fractions.label_test,
    ] {
        if !(0.0..1.0).contains(&f) {
            return Err(KaneError::Config(format!("split fraction {f} not in [0, 1)")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples = kg.relation_triples();
    let n = triples.len();
    let want_test = holdout_size(n, fractions.test);
    let want_valid = holdout_size(n, fractions.valid);

    let mut entity_uses = vec![0usize; kg.entity_count()];
    let mut relation_uses = vec![0usize; kg.relation_count()];
    for t in triples {
        entity_uses[t.head.0] += 1;
        entity_uses[t.tail.0] += 1;
        relation_uses[t.relation.0] += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    // 0 = train, 1 = valid, 2 = test
    let mut assignment = vec![0u8; n];
    let (mut n_test, mut n_valid) = (0, 0);
    for &i in &order {
        if n_test == want_test && n_valid == want_valid {
            break;
        }
        let t = triples[i];
        let head_need = if t.head == t.tail { 2 } else { 1 };
        let removable = entity_uses[t.head.0] > head_need
            && entity_uses[t.tail.0] > 1
            && relation_uses[t.relation.0] > 1;
        if !removable {
            continue;
        }
        entity_uses[t.head.0] -= 1;
        entity_uses[t.tail.0] -= 1;
        relation_uses[t.relation.0] -= 1;
        if n_test < want_test {
            assignment[i] = 2;
            n_test += 1;
        } else {
            assignment[i] = 1;
            n_valid += 1;
        }
    }

    let pick = |tag: u8| -> Vec<RelationTriple> {
        (0..n)
            .filter(|&i| assignment[i] == tag)
            .map(|i| triples[i])
            .collect()
    };

    let labels = labels.map(|mut l| {
        let mut labeled: Vec<EntityId> = l.labeled().map(|(e, _)| e).collect();
        labeled.shuffle(&mut rng);
        let m = labeled.len();
        let nt = holdout_size(m, fractions.label_test);
        let nv = holdout_size(m, fractions.label_valid);
        let mut test = labeled[..nt].to_vec();
        let mut valid = labeled[nt..nt + nv].to_vec();
        let mut train = labeled[nt + nv..].to_vec();
        test.sort();
        valid.sort();
        train.sort();
        l.train = train;
        l.valid = valid;
        l.test = test;
        l
    });

    let split = DatasetSplit {
        train: pick(0),
        valid: pick(1),
        test: pick(2),
        labels,
    };
    split.validate()?;
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::new();
        let mut text = String::new();
        for i in 0..n {
            text.push_str(&format!("e{i}\tnext\te{}\n", (i + 1) % n));
            text.push_str(&format!("e{i}\tskip\te{}\n", (i + 2) % n));
        }
        kg.load_relations(&text).unwrap();
        kg
    }

    #[test]
    fn split_is_disjoint_and_covered() {
        let kg = ring(30);
        let s = split_dataset(&kg, None, SplitFractions::default(), 7).unwrap();
        assert_eq!(s.train.len() + s.valid.len() + s.test.len(), 60);
        assert_eq!(s.test.len(), 6);
        assert_eq!(s.valid.len(), 6);
        s.validate().unwrap();
    }

    #[test]
    fn split_is_seeded() {
        let kg = ring(30);
        let a = split_dataset(&kg, None, SplitFractions::default(), 1).unwrap();
        let b = split_dataset(&kg, None, SplitFractions::default(), 1).unwrap();
        let c = split_dataset(&kg, None, SplitFractions::default(), 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.test, c.test);
    }

    #[test]
    fn labels_parse_and_split() {
        let kg = ring(10);
        let text: String = (0..10).map(|i| format!("e{i}\tc{}\n", i % 2)).collect();
        let labels = Labels::parse(&kg, &text).unwrap();
        assert_eq!(labels.class_count(), 2);
        let s = split_dataset(&kg, Some(labels), SplitFractions::default(), 3).unwrap();
        let l = s.labels.unwrap();
        assert_eq!((l.train.len(), l.valid.len(), l.test.len()), (6, 2, 2));
    }

    #[test]
    fn unknown_label_entity_is_rejected() {
        let kg = ring(3);
        assert!(matches!(
            Labels::parse(&kg, "e0\ta\nnobody\tb\n"),
            Err(KaneError::Parse { line: 2, .. })
        ));
    }
}
