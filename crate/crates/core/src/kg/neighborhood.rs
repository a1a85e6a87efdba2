use super::{AttributeTriple, EntityId, RelationId, RelationTriple, ValueId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NeighborRef {
    Entity(EntityId),
    Value(ValueId),
}

/// Outgoing `(relation, neighbor)` pairs per head entity, stored as a CSR
/// table. Within one head, relation-triple neighbors come first in triple
/// order, then attribute neighbors in triple order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    offsets: Vec<usize>,
    pairs: Vec<(RelationId, NeighborRef)>,
}

impl Neighborhood {
    pub fn build(
        entity_count: usize,
        relation_triples: &[RelationTriple],
        attribute_triples: &[AttributeTriple],
    ) -> Self {
        let mut counts = vec![0usize; entity_count + 1];
        for t in relation_triples {
            counts[t.head.0 + 1] += 1;
        }
        for t in attribute_triples {
            counts[t.head.0 + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let placeholder = (RelationId(0), NeighborRef::Entity(EntityId(0)));
        let mut pairs = vec![placeholder; *offsets.last().unwrap()];
        for t in relation_triples {
            pairs[cursor[t.head.0]] = (t.relation, NeighborRef::Entity(t.tail));
            cursor[t.head.0] += 1;
        }
        for t in attribute_triples {
            pairs[cursor[t.head.0]] = (t.relation, NeighborRef::Value(t.value));
            cursor[t.head.0] += 1;
        }
        Neighborhood { offsets, pairs }
    }

    pub fn entity_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn of(&self, head: EntityId) -> &[(RelationId, NeighborRef)] {
        &self.pairs[self.offsets[head.0]..self.offsets[head.0 + 1]]
    }

    pub fn total_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_isolated(&self, head: EntityId) -> bool {
        self.of(head).is_empty()
    }
}
