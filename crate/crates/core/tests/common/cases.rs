//! Randomized finite-difference cases for every tape op and both losses.

use std::sync::Arc;

use kane_core::autodiff::{Tape, Tensor, Var};
use kane_core::kg::{AttributeTriple, Dataset, EntityId, RelationTriple, ValueId};
use kane_core::model::{
    Aggregator, AttentionForm, Encoder, ModelConfig, ModelParams, ModelSizes, Norm,
    PropagationGraph,
};
use kane_core::training::{bce_loss, classification_loss, completion_loss, gradients, hinge_loss, Triple};
use kane_core::Result;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{grad_check, random_away_from_zero, random_tensor, rel_err, FD_STEP};

type Build = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>;

pub struct OpCase {
    pub name: &'static str,
    pub inputs: Vec<Tensor>,
    build: Build,
}

impl OpCase {
    pub fn error(&self) -> f64 {
        grad_check(&self.inputs, &self.build)
    }
}

/// Contracts a tensor of any shape against fixed random weights, so every
/// output element contributes to the scalar root with a distinct weight.
fn weighted(tape: &mut Tape, out: Var, weights: &Tensor) -> Result<Var> {
    let n = tape.value(out).len();
    let w = Tensor::new(tape.value(out).shape().to_vec(), weights.data()[..n].to_vec())?;
    let w = tape.constant(w);
    let m = tape.mul(out, w)?;
    Ok(tape.sum(m))
}

fn case(
    name: &'static str,
    inputs: Vec<Tensor>,
    weights: Tensor,
    f: impl Fn(&mut Tape, &[Var]) -> Result<Var> + 'static,
) -> OpCase {
    OpCase {
        name,
        inputs,
        build: Box::new(move |tape, v| {
            let out = f(tape, v)?;
            weighted(tape, out, &weights)
        }),
    }
}

fn random_offsets(rng: &mut impl Rng, n: usize) -> Arc<[usize]> {
    let mut cuts = vec![0];
    for i in 1..n {
        if rng.gen_bool(0.4) {
            cuts.push(i);
        }
    }
    cuts.push(n);
    cuts.into()
}

/// `per_op` random cases of every differentiable op.
pub fn op_cases(seed: u64, per_op: usize) -> Vec<OpCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..per_op {
        let r = rng.gen_range(1..5);
        let c = rng.gen_range(1..5);
        let k = rng.gen_range(1..5);
        let w = random_tensor(&mut rng, &[64], 1.0);
        let m = |rng: &mut ChaCha8Rng, s: &[usize]| random_tensor(rng, s, 1.0);

        out.push(case("add", vec![m(&mut rng, &[r, c]), m(&mut rng, &[r, c])], w.clone(), |t, v| t.add(v[0], v[1])));
        out.push(case("sub", vec![m(&mut rng, &[r, c]), m(&mut rng, &[r, c])], w.clone(), |t, v| t.sub(v[0], v[1])));
        out.push(case("mul", vec![m(&mut rng, &[r, c]), m(&mut rng, &[r, c])], w.clone(), |t, v| t.mul(v[0], v[1])));
        let s = rng.gen_range(-2.0..2.0);
        out.push(case("scale", vec![m(&mut rng, &[c])], w.clone(), move |t, v| Ok(t.scale(v[0], s))));
        out.push(case("matvec", vec![m(&mut rng, &[r, c]), m(&mut rng, &[c])], w.clone(), |t, v| t.matvec(v[0], v[1])));
        out.push(case("matmul", vec![m(&mut rng, &[r, k]), m(&mut rng, &[k, c])], w.clone(), |t, v| t.matmul(v[0], v[1])));
        out.push(case("transpose", vec![m(&mut rng, &[r, c])], w.clone(), |t, v| t.transpose(v[0])));
        out.push(case("concat", vec![m(&mut rng, &[r]), m(&mut rng, &[c])], w.clone(), |t, v| t.concat(&[v[0], v[1]])));
        out.push(case("concat_rows", vec![m(&mut rng, &[r, c]), m(&mut rng, &[k, c])], w.clone(), |t, v| {
            t.concat_rows(&[v[0], v[1]])
        }));
        out.push(case("concat_cols", vec![m(&mut rng, &[r, c]), m(&mut rng, &[r, k])], w.clone(), |t, v| {
            t.concat_cols(&[v[0], v[1]])
        }));
        out.push(case("sum", vec![m(&mut rng, &[r, c])], w.clone(), |t, v| Ok(t.sum(v[0]))));
        out.push(case("sum_rows", vec![m(&mut rng, &[r, c])], w.clone(), |t, v| t.sum_rows(v[0])));
        out.push(case("dot", vec![m(&mut rng, &[c]), m(&mut rng, &[c])], w.clone(), |t, v| t.dot(v[0], v[1])));
        out.push(case("row_dot", vec![m(&mut rng, &[r, c]), m(&mut rng, &[r, c])], w.clone(), |t, v| t.row_dot(v[0], v[1])));
        out.push(case("l1_norm", vec![random_away_from_zero(&mut rng, &[r, c], 0.05)], w.clone(), |t, v| t.l1_norm(v[0])));
        out.push(case("l2_norm", vec![random_away_from_zero(&mut rng, &[c], 0.05)], w.clone(), |t, v| t.l2_norm(v[0])));
        let slope = rng.gen_range(0.0..0.5);
        out.push(case("leaky_relu", vec![random_away_from_zero(&mut rng, &[r, c], 0.05)], w.clone(), move |t, v| {
            Ok(t.leaky_relu(v[0], slope))
        }));
        out.push(case("sigmoid", vec![random_tensor(&mut rng, &[r, c], 4.0)], w.clone(), |t, v| Ok(t.sigmoid(v[0]))));
        out.push(case("tanh", vec![random_tensor(&mut rng, &[r, c], 3.0)], w.clone(), |t, v| Ok(t.tanh(v[0]))));
        let pos = random_tensor(&mut rng, &[r, c], 1.0).map(|x| x.abs() + 0.2);
        out.push(case("log", vec![pos], w.clone(), |t, v| t.log(v[0])));
        out.push(case("softmax", vec![random_tensor(&mut rng, &[c], 3.0)], w.clone(), |t, v| t.softmax(v[0])));
        let n = rng.gen_range(1..8);
        let offs = random_offsets(&mut rng, n);
        let o2 = offs.clone();
        out.push(case("softmax_over_group", vec![random_tensor(&mut rng, &[n], 3.0)], w.clone(), move |t, v| {
            t.segment_softmax(v[0], o2.clone())
        }));
        out.push(case("segment_sum", vec![m(&mut rng, &[n, c])], w.clone(), move |t, v| {
            t.segment_sum(v[0], offs.clone())
        }));
        let idx: Arc<[usize]> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..r)).collect();
        out.push(case("gather_rows", vec![m(&mut rng, &[r, c])], w.clone(), move |t, v| {
            t.gather_rows(v[0], idx.clone())
        }));
        let row = rng.gen_range(0..r);
        out.push(case("row", vec![m(&mut rng, &[r, c])], w.clone(), move |t, v| t.row(v[0], row)));
        out.push(case("scale_rows", vec![m(&mut rng, &[r, c]), m(&mut rng, &[r])], w.clone(), |t, v| {
            t.scale_rows(v[0], v[1])
        }));
        out.push(case("reshape", vec![m(&mut rng, &[r, c])], w.clone(), move |t, v| t.reshape(v[0], vec![c, r])));
        let targets = Tensor::new(
            vec![r, c],
            (0..r * c).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect(),
        )
        .unwrap();
        out.push(case("bce_with_logits", vec![random_tensor(&mut rng, &[r, c], 4.0)], w.clone(), move |t, v| {
            let y = t.constant(targets.clone());
            t.bce_with_logits(v[0], y)
        }));

        // Losses, fed by distances kept clear of the hinge.
        let margin = rng.gen_range(0.5..2.0);
        let p = random_tensor(&mut rng, &[k], 1.0).map(|x| x.abs());
        let q = Tensor::new(
            vec![k],
            p.data()
                .iter()
                .map(|&x| x + margin + if rng.gen_bool(0.5) { 0.3 } else { -0.3 })
                .collect(),
        )
        .unwrap();
        out.push(OpCase {
            name: "hinge_loss",
            inputs: vec![p, q],
            build: Box::new(move |t, v| hinge_loss(t, v[0], v[1], margin)),
        });
        let labels: Vec<Option<usize>> = (0..r).map(|_| Some(rng.gen_range(0..c))).collect();
        out.push(OpCase {
            name: "bce_loss",
            inputs: vec![random_tensor(&mut rng, &[r, c], 3.0)],
            build: Box::new(move |t, v| bce_loss(t, v[0], &labels)),
        });
    }
    out
}

// ---------------------------------------------------------------- end to end

/// Four entities, three relations, two attribute values.
pub fn tiny_dataset() -> Dataset {
    let mut kg = kane_core::kg::KnowledgeGraph::new();
    for name in ["a", "b", "c", "d"] {
        kg.intern_entity(name);
    }
    for name in ["r0", "r1", "attr"] {
        kg.intern_relation(name);
    }
    for (h, r, t) in [(0, 0, 1), (0, 1, 2), (1, 0, 2), (2, 1, 3), (3, 0, 0), (1, 1, 3)] {
        kg.add_relation_triple(RelationTriple::new(h, r, t));
    }
    let v0 = kg.intern_literal("red fox").unwrap();
    let v1 = kg.intern_literal("blue fox jumps").unwrap();
    let attr = kg.relation_id("attr").unwrap();
    for (h, v) in [(0, v0), (2, v1), (3, v0)] {
        kg.add_attribute_triple(AttributeTriple {
            head: EntityId(h),
            relation: attr,
            value: v,
        });
    }
    let mut classes = kane_core::kg::Interner::new();
    classes.intern("x");
    classes.intern("y");
    let labels = kane_core::kg::Labels {
        classes,
        class_of: vec![Some(0), Some(1), Some(1), Some(0)],
        train: (0..4).map(EntityId).collect(),
        valid: vec![],
        test: vec![],
    };
    let split = kane_core::kg::DatasetSplit {
        train: kg.relation_triples().to_vec(),
        valid: vec![],
        test: vec![],
        labels: Some(labels),
    };
    Dataset { kg, split }
}

pub struct EndToEndCase {
    pub name: String,
    pub error: f64,
}

/// Every aggregator, encoder and attention form, through two layers, for
/// both the hinge and the cross-entropy objective.
pub fn end_to_end_cases(seed: u64) -> Vec<EndToEndCase> {
    let ds = tiny_dataset();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for aggregator in [Aggregator::Concat, Aggregator::Average] {
        for encoder in [Encoder::Bow, Encoder::Lstm] {
            for form in [AttentionForm::Bilinear, AttentionForm::Translational] {
                let config = ModelConfig {
                    dim: 3,
                    head_dim: if aggregator == Aggregator::Average { 3 } else { 2 },
                    heads: 2,
                    layers: 2,
                    aggregator,
                    encoder,
                    attention_form: form,
                    norm: if rng.gen_bool(0.5) { Norm::L1 } else { Norm::L2 },
                    ..ModelConfig::default()
                };
                let mut sizes = ModelSizes::of(&ds);
                sizes.classes = 2;
                let params = ModelParams::init(&config, sizes, &mut rng).unwrap();
                let graph = PropagationGraph::for_dataset(&ds, true);
                let values = ds.kg.values().to_vec();
                let attr = ds.kg.relation_id("attr").unwrap();
                let pos = vec![
                    Triple::Relation(RelationTriple::new(0, 0, 1)),
                    Triple::Attribute(AttributeTriple {
                        head: EntityId(2),
                        relation: attr,
                        value: ValueId(1),
                    }),
                ];
                let neg = vec![
                    Triple::Relation(RelationTriple::new(0, 0, 3)),
                    Triple::Relation(RelationTriple::new(2, 0, 1)),
                    Triple::Attribute(AttributeTriple {
                        head: EntityId(2),
                        relation: attr,
                        value: ValueId(0),
                    }),
                    Triple::Attribute(AttributeTriple {
                        head: EntityId(1),
                        relation: attr,
                        value: ValueId(1),
                    }),
                ];
                let labels = ds.split.labels.clone().unwrap();
                let ents: Vec<EntityId> = (0..4).map(EntityId).collect();
                let tag = format!("{aggregator}/{encoder}/{form}");

                let g = graph.clone();
                let v = values.clone();
                let completion = move |p: &ModelParams, train: bool| {
                    completion_loss(p, &g, &v, &pos, &neg, 10.0, train).unwrap()
                };
                out.push(EndToEndCase {
                    name: format!("completion {tag}"),
                    error: check_params(&params, &completion),
                });
                let classification = move |p: &ModelParams, train: bool| {
                    classification_loss(p, &graph, &values, &ents, &labels, train).unwrap()
                };
                out.push(EndToEndCase {
                    name: format!("classification {tag}"),
                    error: check_params(&params, &classification),
                });
            }
        }
    }
    out
}

/// Largest error between backprop and central differences over every
/// parameter element.
pub fn check_params(
    params: &ModelParams,
    loss: &dyn Fn(&ModelParams, bool) -> (Tape, kane_core::model::BoundParams, Var),
) -> f64 {
    let (tape, bound, root) = loss(params, true);
    let analytic = gradients(&tape, &bound, root).unwrap();
    let value = |p: &ModelParams| {
        let (tape, _, root) = loss(p, false);
        tape.value(root).item()
    };
    let mut p = params.clone();
    let mut worst: f64 = 0.0;
    for (i, g) in analytic.iter().enumerate() {
        for j in 0..g.len() {
            let orig = p.tensors()[i].1.data()[j];
            p.tensors_mut()[i].1.data_mut()[j] = orig + FD_STEP;
            let up = value(&p);
            p.tensors_mut()[i].1.data_mut()[j] = orig - FD_STEP;
            let down = value(&p);
            p.tensors_mut()[i].1.data_mut()[j] = orig;
            worst = worst.max(rel_err(g.data()[j], (up - down) / (2.0 * FD_STEP)));
        }
    }
    worst
}
