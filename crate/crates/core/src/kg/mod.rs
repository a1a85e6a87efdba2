//! Knowledge graph storage: interned entities, relations and attribute
//! literals, the two triple stores, and the per-entity neighborhood index.

mod bundle;
mod neighborhood;
mod parse;
mod split;
mod synth;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use bundle::{Dataset, Source, BUNDLE_FORMAT, BUNDLE_VERSION};
pub use neighborhood::{NeighborRef, Neighborhood};
pub use parse::{parse_fields, tokenize};
pub use split::{split_dataset, DatasetSplit, Labels, SplitFractions};
pub use synth::{generate_synthetic_kg, SynthConfig};

use crate::error::{KaneError, Result};

macro_rules! dense_id {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl $name {
            pub fn index(self) -> usize {
                self.0
            }
        }
    };
}

dense_id!(EntityId);
dense_id!(RelationId);
dense_id!(
    /// Interned attribute literal.
    ValueId
);
dense_id!(WordId);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationTriple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl RelationTriple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        RelationTriple {
            head: EntityId(head),
            relation: RelationId(relation),
            tail: EntityId(tail),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttributeTriple {
    pub head: EntityId,
    pub relation: RelationId,
    pub value: ValueId,
}

/// Token sequence of one attribute literal. Never empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeValue {
    pub tokens: Vec<WordId>,
}

/// Bijection between surface strings and dense ids in first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(KaneError::Format(format!("duplicate interned name {n:?}")));
            }
        }
        Ok(Interner { names, index })
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A knowledge graph holding relation triples `(h, r, t)` and attribute
/// triples `(h, r, a)` over one shared relation vocabulary.
#[derive(Clone, Debug, Default)]
pub struct KnowledgeGraph {
    pub(crate) entities: Interner,
    pub(crate) relations: Interner,
    pub(crate) words: Interner,
    pub(crate) literals: Interner,
    pub(crate) values: Vec<AttributeValue>,
    pub(crate) relation_triples: Vec<RelationTriple>,
    pub(crate) attribute_triples: Vec<AttributeTriple>,
    relation_seen: HashSet<RelationTriple>,
    attribute_seen: HashSet<AttributeTriple>,
    pub(crate) duplicates_dropped: usize,
    neighborhood: Option<Neighborhood>,
}

/// Table-style dataset statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphStats {
    pub entities: usize,
    pub relations: usize,
    pub attributes: usize,
    pub relation_triples: usize,
    pub attribute_triples: usize,
    pub duplicates_dropped: usize,
}

impl GraphStats {
    pub fn total_triples(&self) -> usize {
        self.relation_triples + self.attribute_triples
    }
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn value_count(&self) -> usize {
        self.values.len()
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn entities(&self) -> &Interner {
        &self.entities
    }

    pub fn relations(&self) -> &Interner {
        &self.relations
    }

    pub fn words(&self) -> &Interner {
        &self.words
    }

    pub fn literals(&self) -> &Interner {
        &self.literals
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.get(name).map(RelationId)
    }

    pub fn value_id(&self, literal: &str) -> Option<ValueId> {
        self.literals.get(literal).map(ValueId)
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0)
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        self.relations.name(id.0)
    }

    pub fn value(&self, id: ValueId) -> &AttributeValue {
        &self.values[id.0]
    }

    pub fn values(&self) -> &[AttributeValue] {
        &self.values
    }

    pub fn relation_triples(&self) -> &[RelationTriple] {
        &self.relation_triples
    }

    pub fn attribute_triples(&self) -> &[AttributeTriple] {
        &self.attribute_triples
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    /// Relations that occur in at least one attribute triple.
    pub fn attribute_relations(&self) -> Vec<bool> {
        let mut flags = vec![false; self.relations.len()];
        for t in &self.attribute_triples {
            flags[t.relation.0] = true;
        }
        flags
    }

    /// Relations that occur in at least one relation triple, ascending.
    pub fn entity_relations(&self) -> Vec<RelationId> {
        let mut flags = vec![false; self.relations.len()];
        for t in &self.relation_triples {
            flags[t.relation.0] = true;
        }
        flags
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(i, _)| RelationId(i))
            .collect()
    }

    pub fn stats(&self) -> GraphStats {
        let attr = self.attribute_relations();
        GraphStats {
            entities: self.entities.len(),
            relations: attr.iter().filter(|f| !**f).count(),
            attributes: attr.iter().filter(|f| **f).count(),
            relation_triples: self.relation_triples.len(),
            attribute_triples: self.attribute_triples.len(),
            duplicates_dropped: self.duplicates_dropped,
        }
    }

    pub fn intern_entity(&mut self, name: &str) -> EntityId {
        EntityId(self.entities.intern(name))
    }

    pub fn intern_relation(&mut self, name: &str) -> RelationId {
        RelationId(self.relations.intern(name))
    }

    /// Interns a literal (already unquoted); identical literals share an id.
    pub fn intern_literal(&mut self, literal: &str) -> Result<ValueId> {
        if let Some(id) = self.literals.get(literal) {
            return Ok(ValueId(id));
        }
        let tokens: Vec<WordId> = tokenize(literal)
            .iter()
            .map(|w| WordId(self.words.intern(w)))
            .collect();
        if tokens.is_empty() {
            return Err(KaneError::Contract(format!(
                "attribute literal {literal:?} has no tokens"
            )));
        }
        let id = self.literals.intern(literal);
        debug_assert_eq!(id, self.values.len());
        self.values.push(AttributeValue { tokens });
        Ok(ValueId(id))
    }

    /// Adds a triple unless already present. Returns whether it was new.
    pub fn add_relation_triple(&mut self, t: RelationTriple) -> bool {
        if !self.relation_seen.insert(t) {
            self.duplicates_dropped += 1;
            return false;
        }
        self.relation_triples.push(t);
        self.neighborhood = None;
        true
    }

    pub fn add_attribute_triple(&mut self, t: AttributeTriple) -> bool {
        if !self.attribute_seen.insert(t) {
            self.duplicates_dropped += 1;
            return false;
        }
        self.attribute_triples.push(t);
        self.neighborhood = None;
        true
    }

    pub fn contains_relation_triple(&self, t: &RelationTriple) -> bool {
        self.relation_seen.contains(t)
    }

    pub fn contains_attribute_triple(&self, t: &AttributeTriple) -> bool {
        self.attribute_seen.contains(t)
    }

    /// Parses `head<TAB>relation<TAB>tail` lines, interning names, and
    /// returns the triples in input order (duplicates included).
    pub fn parse_relation_triples(&mut self, text: &str) -> Result<Vec<RelationTriple>> {
        let mut out = Vec::new();
        for (_, fields) in parse_fields(text)? {
            let head = self.intern_entity(fields[0]);
            let relation = self.intern_relation(fields[1]);
            let tail = self.intern_entity(fields[2]);
            out.push(RelationTriple {
                head,
                relation,
                tail,
            });
        }
        Ok(out)
    }

    /// Parses `head<TAB>attribute<TAB>"literal"` lines.
    pub fn parse_attribute_triples(&mut self, text: &str) -> Result<Vec<AttributeTriple>> {
        let mut out = Vec::new();
        for (line, fields) in parse_fields(text)? {
            let literal = strip_quotes(fields[2]);
            if tokenize(literal).is_empty() {
                return Err(KaneError::Parse {
                    source_name: "<input>".into(),
                    line,
                    message: "attribute literal has no tokens".into(),
                });
            }
            let head = self.intern_entity(fields[0]);
            let relation = self.intern_relation(fields[1]);
            let value = self.intern_literal(literal)?;
            out.push(AttributeTriple {
                head,
                relation,
                value,
            });
        }
        Ok(out)
    }

    /// Parses and stores relation triples, dropping duplicates.
    pub fn load_relations(&mut self, text: &str) -> Result<usize> {
        let parsed = self.parse_relation_triples(text)?;
        Ok(parsed
            .into_iter()
            .filter(|&t| self.add_relation_triple(t))
            .count())
    }

    pub fn load_attributes(&mut self, text: &str) -> Result<usize> {
        let parsed = self.parse_attribute_triples(text)?;
        Ok(parsed
            .into_iter()
            .filter(|&t| self.add_attribute_triple(t))
            .count())
    }

    /// Neighborhood over every stored triple.
    pub fn neighborhood(&mut self) -> &Neighborhood {
        if self.neighborhood.is_none() {
            self.neighborhood = Some(self.build_neighborhood());
        }
        self.neighborhood.as_ref().unwrap()
    }

    pub fn build_neighborhood(&self) -> Neighborhood {
        Neighborhood::build(
            self.entity_count(),
            &self.relation_triples,
            &self.attribute_triples,
        )
    }

    pub fn relations_tsv(&self) -> String {
        let mut s = String::new();
        for t in &self.relation_triples {
            s.push_str(&format!(
                "{}\t{}\t{}\n",
                self.entities.name(t.head.0),
                self.relations.name(t.relation.0),
                self.entities.name(t.tail.0)
            ));
        }
        s
    }

    pub fn attributes_tsv(&self) -> String {
        let mut s = String::new();
        for t in &self.attribute_triples {
            s.push_str(&format!(
                "{}\t{}\t\"{}\"\n",
                self.entities.name(t.head.0),
                self.relations.name(t.relation.0),
                self.literals.name(t.value.0)
            ));
        }
        s
    }
}

fn strip_quotes(field: &str) -> &str {
    if field.len() >= 2 && field.starts_with('"') && field.ends_with('"') {
        &field[1..field.len() - 1]
    } else {
        field
    }
}
