use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    split_dataset, AttributeTriple, DatasetSplit, EntityId, Interner, KnowledgeGraph, Labels,
    RelationTriple, SplitFractions,
};
use crate::error::{KaneError, Result};

const ATTRIBUTE_RELATIONS: [&str; 3] = ["category", "description", "keywords"];
const CLUSTER_WORDS: usize = 2;
const FILLER_WORDS: usize = 12;

/// Planted-partition knowledge graph.
///
/// Clusters sit at integer positions on a line and relation `j` translates
/// cluster `c` to cluster `c + shift(j)`, so every relation is a consistent
/// translation between clusters. Heads come from every cluster where the
/// shifted cluster exists. A fraction of tails are replaced by uniformly
/// random entities. Out-degrees are uniform in `min_degree..=max_degree`, so
/// some entities have no relational neighbors at all.
///
/// Every entity has a `category` attribute holding one cluster word, plus up
/// to two free-text attributes that mix cluster words with shared filler.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub entities: usize,
    pub relations: usize,
    pub clusters: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            entities: 50,
            relations: 5,
            clusters: 5,
            min_degree: 0,
            max_degree: 12,
            noise: 0.1,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.clusters < 2 || self.entities < self.clusters {
            return Err(KaneError::Config(format!(
                "need entities >= clusters >= 2, got entities={} clusters={}",
                self.entities, self.clusters
            )));
        }
        if self.relations == 0 {
            return Err(KaneError::Config("need at least one relation".into()));
        }
        if self.min_degree > self.max_degree {
            return Err(KaneError::Config("min_degree exceeds max_degree".into()));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(KaneError::Config("noise must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Translation applied by relation `j`: 1, -1, 2, -2, ... cycling.
    fn shift(&self, j: usize) -> isize {
        let span = 2 * (self.clusters - 1);
        let k = j % span;
        let magnitude = (k / 2 + 1) as isize;
        if k % 2 == 0 {
            magnitude
        } else {
            -magnitude
        }
    }
}

pub fn generate_synthetic_kg(config: &SynthConfig) -> Result<(KnowledgeGraph, DatasetSplit)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let c = config.clusters;
    let mut kg = KnowledgeGraph::new();

    let cluster_of: Vec<usize> = (0..config.entities).map(|i| i % c).collect();
    for i in 0..config.entities {
        kg.intern_entity(&format!("e{i:03}"));
    }
    let mut members = vec![Vec::new(); c];
    for (i, &k) in cluster_of.iter().enumerate() {
        members[k].push(i);
    }
    let relations: Vec<_> = (0..config.relations)
        .map(|j| kg.intern_relation(&format!("r{j}")))
        .collect();

    for (head, &k) in cluster_of.iter().enumerate() {
        let usable: Vec<usize> = (0..config.relations)
            .filter(|&j| (0..c as isize).contains(&(k as isize + config.shift(j))))
            .collect();
        if usable.is_empty() {
            continue;
        }
        let degree = rng.gen_range(config.min_degree..=config.max_degree);
        let mut attempts = 0;
        let mut added = 0;
        while added < degree && attempts < 20 * degree.max(1) {
            attempts += 1;
            let j = *usable.choose(&mut rng).unwrap();
            let target = (k as isize + config.shift(j)) as usize;
            let tail = if rng.gen::<f64>() < config.noise {
                rng.gen_range(0..config.entities)
            } else {
                *members[target].choose(&mut rng).unwrap()
            };
            if tail == head {
                continue;
            }
            let t = RelationTriple {
                head: EntityId(head),
                relation: relations[j],
                tail: EntityId(tail),
            };
            if kg.contains_relation_triple(&t) {
                continue;
            }
            kg.add_relation_triple(t);
            added += 1;
        }
    }

    let attr_relations: Vec<_> = ATTRIBUTE_RELATIONS
        .iter()
        .map(|n| kg.intern_relation(n))
        .collect();
    for (head, &k) in cluster_of.iter().enumerate() {
        let extra = rng.gen_range(0..attr_relations.len());
        let mut free_text = attr_relations[1..].to_vec();
        free_text.shuffle(&mut rng);
        let chosen = std::iter::once(attr_relations[0]).chain(free_text.into_iter().take(extra));
        for relation in chosen {
            let literal = if relation == attr_relations[0] {
                category_literal(&mut rng, k)
            } else {
                cluster_literal(&mut rng, k)
            };
            let value = kg.intern_literal(&literal)?;
            kg.add_attribute_triple(AttributeTriple {
                head: EntityId(head),
                relation,
                value,
            });
        }
    }

    let mut classes = Interner::new();
    for k in 0..c {
        classes.intern(&format!("class{k}"));
    }
    let labels = Labels {
        classes,
        class_of: cluster_of.iter().map(|&k| Some(k)).collect(),
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
    };
    let split = split_dataset(&kg, Some(labels), SplitFractions::default(), config.seed)?;
    Ok((kg, split))
}

fn cluster_word(rng: &mut ChaCha8Rng, cluster: usize) -> String {
    format!("topic{cluster}{}", (b'a' + rng.gen_range(0..CLUSTER_WORDS) as u8) as char)
}

/// A single cluster word, so category values repeat across entities.
fn category_literal(rng: &mut ChaCha8Rng, cluster: usize) -> String {
    cluster_word(rng, cluster)
}

/// One or two cluster words plus zero to two filler words, shuffled.
fn cluster_literal(rng: &mut ChaCha8Rng, cluster: usize) -> String {
    let mut words = Vec::new();
    let signal = rng.gen_range(1..=2);
    for _ in 0..signal {
        words.push(cluster_word(rng, cluster));
    }
    for _ in 0..rng.gen_range(0..=2) {
        words.push(format!("word{}", rng.gen_range(0..FILLER_WORDS)));
    }
    words.shuffle(rng);
    words.join(" ")
}
