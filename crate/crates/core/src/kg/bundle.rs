//! Self-contained dataset bundle: interners, triples, splits and labels as
//! one JSON document with a SHA-256 checksum over the canonical payload.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    split_dataset, SplitFractions, AttributeTriple, AttributeValue, DatasetSplit, EntityId, Interner, KnowledgeGraph, Labels,
    RelationTriple,
};
use crate::error::{KaneError, Result};

pub const BUNDLE_FORMAT: &str = "kane-dataset";
pub const BUNDLE_VERSION: u32 = 1;

/// A knowledge graph together with its evaluation split.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub kg: KnowledgeGraph,
    pub split: DatasetSplit,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    checksum: String,
    payload: Payload,
}

#[derive(Serialize, Deserialize, PartialEq)]
struct Payload {
    entities: Vec<String>,
    relations: Vec<String>,
    words: Vec<String>,
    literals: Vec<String>,
    values: Vec<AttributeValue>,
    relation_triples: Vec<RelationTriple>,
    attribute_triples: Vec<AttributeTriple>,
    duplicates_dropped: usize,
    train: Vec<RelationTriple>,
    valid: Vec<RelationTriple>,
    test: Vec<RelationTriple>,
    labels: Option<LabelPayload>,
}

#[derive(Serialize, Deserialize, PartialEq)]
struct LabelPayload {
    classes: Vec<String>,
    assignments: Vec<(EntityId, usize)>,
    train: Vec<EntityId>,
    valid: Vec<EntityId>,
    test: Vec<EntityId>,
}

fn checksum_of(payload: &Payload) -> Result<String> {
    let bytes = serde_json::to_vec(payload).map_err(|e| KaneError::Format(e.to_string()))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// One input file: a display name for error messages and its contents.
pub struct Source<'a> {
    pub name: &'a str,
    pub text: &'a str,
}

impl Dataset {
    /// Parses relation, attribute and label files and splits them with `seed`.
    /// Parse errors carry the source name and line.
    pub fn from_texts(
        relations: Source<'_>,
        attributes: Option<Source<'_>>,
        labels: Option<Source<'_>>,
        seed: u64,
    ) -> Result<Self> {
        let mut kg = KnowledgeGraph::new();
        kg.load_relations(relations.text)
            .map_err(|e| e.with_source(relations.name))?;
        if let Some(a) = attributes {
            kg.load_attributes(a.text).map_err(|e| e.with_source(a.name))?;
        }
        let labels = labels
            .map(|l| Labels::parse(&kg, l.text).map_err(|e| e.with_source(l.name)))
            .transpose()?;
        let split = split_dataset(&kg, labels, SplitFractions::default(), seed)?;
        Ok(Dataset { kg, split })
    }

    fn payload(&self) -> Payload {
        let kg = &self.kg;
        Payload {
            entities: kg.entities.names().to_vec(),
            relations: kg.relations.names().to_vec(),
            words: kg.words.names().to_vec(),
            literals: kg.literals.names().to_vec(),
            values: kg.values.clone(),
            relation_triples: kg.relation_triples.clone(),
            attribute_triples: kg.attribute_triples.clone(),
            duplicates_dropped: kg.duplicates_dropped,
            train: self.split.train.clone(),
            valid: self.split.valid.clone(),
            test: self.split.test.clone(),
            labels: self.split.labels.as_ref().map(|l| LabelPayload {
                classes: l.classes.names().to_vec(),
                assignments: l.labeled().collect(),
                train: l.train.clone(),
                valid: l.valid.clone(),
                test: l.test.clone(),
            }),
        }
    }

    /// Content checksum (hex SHA-256) identifying this dataset.
    pub fn checksum(&self) -> Result<String> {
        checksum_of(&self.payload())
    }

    pub fn to_bundle_bytes(&self) -> Result<Vec<u8>> {
        let payload = self.payload();
        let envelope = Envelope {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            checksum: checksum_of(&payload)?,
            payload,
        };
        let mut bytes =
            serde_json::to_vec(&envelope).map_err(|e| KaneError::Format(e.to_string()))?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_bundle_bytes(bytes: &[u8]) -> Result<Self> {
        let envelope: Envelope = serde_json::from_slice(bytes)
            .map_err(|e| KaneError::Format(format!("bundle is not valid JSON: {e}")))?;
        if envelope.format != BUNDLE_FORMAT || envelope.version != BUNDLE_VERSION {
            return Err(KaneError::Format(format!(
                "unsupported bundle {} v{}",
                envelope.format, envelope.version
            )));
        }
        let actual = checksum_of(&envelope.payload)?;
        if actual != envelope.checksum {
            return Err(KaneError::Format(format!(
                "bundle checksum {} does not match content {actual}",
                envelope.checksum
            )));
        }
        let p = envelope.payload;
        let mut kg = KnowledgeGraph {
            entities: Interner::from_names(p.entities)?,
            relations: Interner::from_names(p.relations)?,
            words: Interner::from_names(p.words)?,
            literals: Interner::from_names(p.literals)?,
            values: p.values,
            ..KnowledgeGraph::default()
        };
        let (ne, nr, nw, nv) = (
            kg.entity_count(),
            kg.relation_count(),
            kg.word_count(),
            kg.values.len(),
        );
        if nv != kg.literals.len()
            || kg
                .values
                .iter()
                .any(|v| v.tokens.is_empty() || v.tokens.iter().any(|w| w.0 >= nw))
        {
            return Err(KaneError::Format("attribute values are inconsistent".into()));
        }
        let rel_ok = |t: &RelationTriple| t.head.0 < ne && t.tail.0 < ne && t.relation.0 < nr;
        for t in p.relation_triples {
            if !rel_ok(&t) {
                return Err(KaneError::Format(format!("triple {t:?} out of range")));
            }
            kg.add_relation_triple(t);
        }
        for t in p.attribute_triples {
            if t.head.0 >= ne || t.relation.0 >= nr || t.value.0 >= nv {
                return Err(KaneError::Format(format!("triple {t:?} out of range")));
            }
            kg.add_attribute_triple(t);
        }
        kg.duplicates_dropped = p.duplicates_dropped;
        if p.train.iter().chain(&p.valid).chain(&p.test).any(|t| !rel_ok(t)) {
            return Err(KaneError::Format("split triple out of range".into()));
        }

        let labels = match p.labels {
            None => None,
            Some(lp) => {
                let mut class_of = vec![None; ne];
                let nc = lp.classes.len();
                for (e, c) in lp.assignments {
                    if e.0 >= ne || c >= nc {
                        return Err(KaneError::Format("label out of range".into()));
                    }
                    class_of[e.0] = Some(c);
                }
                Some(Labels {
                    classes: Interner::from_names(lp.classes)?,
                    class_of,
                    train: lp.train,
                    valid: lp.valid,
                    test: lp.test,
                })
            }
        };
        let split = DatasetSplit {
            train: p.train,
            valid: p.valid,
            test: p.test,
            labels,
        };
        split.validate()?;
        Ok(Dataset { kg, split })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{generate_synthetic_kg, SynthConfig};

    #[test]
    fn bundle_round_trip_is_byte_exact() {
        let (kg, split) = generate_synthetic_kg(&SynthConfig::default()).unwrap();
        let ds = Dataset { kg, split };
        let bytes = ds.to_bundle_bytes().unwrap();
        let back = Dataset::from_bundle_bytes(&bytes).unwrap();
        assert_eq!(back.to_bundle_bytes().unwrap(), bytes);
        assert_eq!(back.split, ds.split);
        assert_eq!(back.kg.relation_triples(), ds.kg.relation_triples());
    }

    #[test]
    fn texts_parse_with_file_names_in_errors() {
        let rel = "a\tr\tb\nb\tr\tc\n";
        let ds = Dataset::from_texts(
            Source { name: "rel.tsv", text: rel },
            Some(Source { name: "attr.tsv", text: "a\tcolor\t\"deep red\"\n" }),
            Some(Source { name: "labels.tsv", text: "a\tx\nc\ty\n" }),
            1,
        )
        .unwrap();
        assert_eq!(ds.kg.entity_count(), 3);
        assert_eq!(ds.split.class_count(), 2);
        let err = Dataset::from_texts(Source { name: "rel.tsv", text: "a\tr\tb\nbroken\n" }, None, None, 1)
            .unwrap_err()
            .to_string();
        assert!(err.contains("rel.tsv:2"), "{err}");
    }

    #[test]
    fn tampered_bundle_is_rejected() {
        let (kg, split) = generate_synthetic_kg(&SynthConfig::default()).unwrap();
        let bytes = Dataset { kg, split }.to_bundle_bytes().unwrap();
        let text = String::from_utf8(bytes).unwrap().replacen("e001", "e999", 1);
        assert!(matches!(
            Dataset::from_bundle_bytes(text.as_bytes()),
            Err(KaneError::Format(_))
        ));
    }
}
