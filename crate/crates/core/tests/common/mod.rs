//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the model code it is used to check.

#![allow(dead_code)]

use std::collections::HashSet;

pub mod cases;

use kane_core::autodiff::{Tape, Tensor, Var};
use kane_core::kg::{
    AttributeTriple, AttributeValue, Dataset, DatasetSplit, EntityId, Interner, KnowledgeGraph,
    Labels, RelationTriple, ValueId,
};
use kane_core::encoders::LstmParams;
use kane_core::model::{Aggregator, AttentionForm, Encoder, ModelParams, Norm};
use kane_core::Result;
use rand::Rng;

// ---------------------------------------------------------------- gradients

pub const FD_STEP: f64 = 1e-6;

/// `|a - n| / max(1, |a|, |n|)`: relative for large gradients, absolute near zero.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / 1f64.max(a.abs()).max(n.abs())
}

/// Largest error between the tape gradient and central differences over
/// every element of every input.
pub fn grad_check<F>(inputs: &[Tensor], f: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.constant(x.clone())).collect();
        let root = f(&mut tape, &vars).unwrap();
        tape.value(root).item()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.param(x.clone())).collect();
    let root = f(&mut tape, &vars).unwrap();
    let grads = tape.backward(root).unwrap();

    let mut worst: f64 = 0.0;
    let mut xs = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let g = grads.get(*v).expect("parameter has a gradient").clone();
        for j in 0..xs[i].len() {
            let orig = xs[i].data()[j];
            xs[i].data_mut()[j] = orig + FD_STEP;
            let up = eval(&xs);
            xs[i].data_mut()[j] = orig - FD_STEP;
            let down = eval(&xs);
            xs[i].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(g.data()[j], numeric));
        }
    }
    worst
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize], scale: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Entries at least `gap` away from zero, for ops with a kink there.
pub fn random_away_from_zero(rng: &mut impl Rng, shape: &[usize], gap: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(gap..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

// ---------------------------------------------------------------- scalar math

pub fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn mat_vec(m: &Tensor, v: &[f64]) -> Vec<f64> {
    let cols = m.row_width();
    assert_eq!(cols, v.len());
    (0..m.rows())
        .map(|i| {
            let mut s = 0.0;
            for j in 0..cols {
                s += m.data()[i * cols + j] * v[j];
            }
            s
        })
        .collect()
}

pub fn distance(h: &[f64], r: &[f64], t: &[f64], norm: Norm) -> f64 {
    let mut acc = 0.0;
    for i in 0..h.len() {
        let d = h[i] + r[i] - t[i];
        acc += match norm {
            Norm::L1 => d.abs(),
            Norm::L2 => d * d,
        };
    }
    match norm {
        Norm::L1 => acc,
        Norm::L2 => acc.sqrt(),
    }
}

// ---------------------------------------------------------------- encoders

pub fn naive_bow(table: &Tensor, tokens: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; table.row_width()];
    for &w in tokens {
        for (o, x) in out.iter_mut().zip(table.row(w)) {
            *o += x;
        }
    }
    out
}

/// Textbook LSTM cell, gates ordered input, forget, output, candidate.
pub fn naive_lstm(table: &Tensor, p: &LstmParams, tokens: &[usize]) -> Vec<f64> {
    let k = table.row_width();
    let mut h = vec![0.0; k];
    let mut c = vec![0.0; k];
    for &w in tokens {
        let x = table.row(w);
        let gate = |g: usize| -> Vec<f64> {
            let a = mat_vec(&p.input[g], x);
            let b = mat_vec(&p.hidden[g], &h);
            (0..k).map(|i| a[i] + b[i] + p.bias[g].data()[i]).collect()
        };
        let (i, f, o, z) = (gate(0), gate(1), gate(2), gate(3));
        for j in 0..k {
            c[j] = sigmoid(f[j]) * c[j] + sigmoid(i[j]) * z[j].tanh();
            h[j] = sigmoid(o[j]) * c[j].tanh();
        }
    }
    h
}

// ---------------------------------------------------------------- forward

#[derive(Clone, Copy)]
pub enum Nbr {
    Entity(usize),
    Value(usize),
}

/// Layer-by-layer entity vectors (`out[0]` is the embedding table),
/// computed one entity and one edge at a time.
pub fn naive_forward(
    p: &ModelParams,
    relations: &[RelationTriple],
    attributes: &[AttributeTriple],
    values: &[AttributeValue],
) -> Vec<Vec<Vec<f64>>> {
    let c = &p.config;
    let n = p.entity.rows();
    let mut adj: Vec<Vec<(usize, Nbr)>> = vec![Vec::new(); n];
    for t in relations {
        adj[t.head.0].push((t.relation.0, Nbr::Entity(t.tail.0)));
    }
    let encoded: Vec<Vec<f64>> = if c.use_attributes {
        for t in attributes {
            adj[t.head.0].push((t.relation.0, Nbr::Value(t.value.0)));
        }
        let table = p.words.as_ref().unwrap();
        values
            .iter()
            .map(|v| {
                let toks: Vec<usize> = v.tokens.iter().map(|w| w.0).collect();
                match c.encoder {
                    Encoder::Bow => naive_bow(table, &toks),
                    Encoder::Lstm => naive_lstm(table, p.lstm.as_ref().unwrap(), &toks),
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut layers = vec![(0..n).map(|i| p.entity.row(i).to_vec()).collect::<Vec<_>>()];
    for (l, lp) in p.layers.iter().enumerate() {
        let x = &layers[l];
        let mut next = Vec::with_capacity(n);
        for h in 0..n {
            if adj[h].is_empty() {
                next.push(x[h].clone());
                continue;
            }
            let nvec = |nb: Nbr| -> &Vec<f64> {
                match nb {
                    Nbr::Entity(e) => &x[e],
                    Nbr::Value(v) => &encoded[v],
                }
            };
            let mut heads = Vec::new();
            for w in &lp.heads {
                let mut logits = Vec::new();
                let mut msgs = Vec::new();
                for &(r, nb) in &adj[h] {
                    let rv = p.relation.row(r);
                    let nv = nvec(nb);
                    let sum: Vec<f64> = (0..rv.len()).map(|i| rv[i] + nv[i]).collect();
                    let msg = mat_vec(w, &sum);
                    let logit = match c.attention_form {
                        AttentionForm::Bilinear => {
                            let wr = mat_vec(w, rv);
                            leaky(wr.iter().zip(&msg).map(|(a, b)| a * b).sum(), c.leaky_slope)
                        }
                        AttentionForm::Translational => -distance(&x[h], rv, nv, c.norm),
                    };
                    logits.push(logit);
                    msgs.push(msg);
                }
                let pi = naive_softmax(&logits);
                let mut acc = vec![0.0; w.rows()];
                for (m, p) in msgs.iter().zip(&pi) {
                    for i in 0..acc.len() {
                        acc[i] += p * m[i];
                    }
                }
                heads.push(acc);
            }
            let pre = match c.aggregator {
                Aggregator::Concat => {
                    let cat: Vec<f64> = heads.concat();
                    mat_vec(lp.output.as_ref().unwrap(), &cat)
                }
                Aggregator::Average => {
                    let m = heads.len() as f64;
                    (0..heads[0].len())
                        .map(|i| heads.iter().map(|hd| hd[i]).sum::<f64>() / m)
                        .collect()
                }
            };
            next.push(pre.into_iter().map(|v| leaky(v, c.leaky_slope)).collect());
        }
        layers.push(next);
    }
    layers
}

pub fn naive_softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

// ---------------------------------------------------------------- TransE

/// Summed margin loss where positive `i` is paired with negatives
/// `i*per .. (i+1)*per`, read straight from the embedding tables.
pub fn transe_loss(
    entity: &Tensor,
    relation: &Tensor,
    pos: &[RelationTriple],
    neg: &[RelationTriple],
    margin: f64,
    norm: Norm,
) -> f64 {
    let per = neg.len() / pos.len();
    let d = |t: &RelationTriple| {
        distance(entity.row(t.head.0), relation.row(t.relation.0), entity.row(t.tail.0), norm)
    };
    let mut total = 0.0;
    for (i, p) in pos.iter().enumerate() {
        let dp = d(p);
        for q in &neg[i * per..(i + 1) * per] {
            total += (margin + dp - d(q)).max(0.0);
        }
    }
    total
}

// ---------------------------------------------------------------- ranking

/// Sorts every surviving candidate's distance and returns the position of
/// the first one tied with the truth.
pub fn brute_rank(candidates: &[(bool, f64)], truth: f64) -> usize {
    let mut d: Vec<f64> = candidates.iter().filter(|c| !c.0).map(|c| c.1).collect();
    d.push(truth);
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d.iter().position(|&v| v == truth).unwrap() + 1
}

/// Brute-force entity rank. `x` holds final entity vectors.
pub fn brute_rank_entity(
    x: &[Vec<f64>],
    rels: &[Vec<f64>],
    norm: Norm,
    known: &HashSet<RelationTriple>,
    t: RelationTriple,
    head_side: bool,
    filter: bool,
) -> usize {
    let truth = if head_side { t.head.0 } else { t.tail.0 };
    let r = &rels[t.relation.0];
    let dist = |c: usize| {
        if head_side {
            distance(&x[c], r, &x[t.tail.0], norm)
        } else {
            distance(&x[t.head.0], r, &x[c], norm)
        }
    };
    let cands: Vec<(bool, f64)> = (0..x.len())
        .filter(|&c| c != truth)
        .map(|c| {
            let mut q = t;
            if head_side {
                q.head = EntityId(c);
            } else {
                q.tail = EntityId(c);
            }
            (filter && known.contains(&q), dist(c))
        })
        .collect();
    brute_rank(&cands, dist(truth))
}

pub fn brute_rank_relation(
    x: &[Vec<f64>],
    rels: &[Vec<f64>],
    norm: Norm,
    known: &HashSet<RelationTriple>,
    candidates: &[usize],
    t: RelationTriple,
    filter: bool,
) -> usize {
    let (h, tl) = (&x[t.head.0], &x[t.tail.0]);
    let cands: Vec<(bool, f64)> = candidates
        .iter()
        .filter(|&&r| r != t.relation.0)
        .map(|&r| {
            let q = RelationTriple {
                relation: kane_core::kg::RelationId(r),
                ..t
            };
            (filter && known.contains(&q), distance(h, &rels[r], tl, norm))
        })
        .collect();
    brute_rank(&cands, distance(h, &rels[t.relation.0], tl, norm))
}

// ---------------------------------------------------------------- data

pub struct RandomKg {
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
    pub attribute_triples: usize,
    pub classes: usize,
}

/// Random graph with every triple in train and random class labels.
pub fn random_dataset(rng: &mut impl Rng, shape: &RandomKg) -> Dataset {
    let mut kg = KnowledgeGraph::new();
    for i in 0..shape.entities {
        kg.intern_entity(&format!("e{i}"));
    }
    for j in 0..shape.relations {
        kg.intern_relation(&format!("r{j}"));
    }
    let attr = kg.intern_relation("attr");
    for _ in 0..shape.triples {
        let t = RelationTriple::new(
            rng.gen_range(0..shape.entities),
            rng.gen_range(0..shape.relations),
            rng.gen_range(0..shape.entities),
        );
        kg.add_relation_triple(t);
    }
    for _ in 0..shape.attribute_triples {
        let len = rng.gen_range(1..=3);
        let lit: Vec<String> = (0..len).map(|_| format!("w{}", rng.gen_range(0..6))).collect();
        let value: ValueId = kg.intern_literal(&lit.join(" ")).unwrap();
        kg.add_attribute_triple(AttributeTriple {
            head: EntityId(rng.gen_range(0..shape.entities)),
            relation: attr,
            value,
        });
    }
    let labels = (shape.classes > 0).then(|| {
        let mut classes = Interner::new();
        for c in 0..shape.classes {
            classes.intern(&format!("c{c}"));
        }
        let class_of: Vec<Option<usize>> =
            (0..shape.entities).map(|_| Some(rng.gen_range(0..shape.classes))).collect();
        Labels {
            classes,
            class_of,
            train: (0..shape.entities).map(EntityId).collect(),
            valid: Vec::new(),
            test: Vec::new(),
        }
    });
    let split = DatasetSplit {
        train: kg.relation_triples().to_vec(),
        valid: Vec::new(),
        test: Vec::new(),
        labels,
    };
    Dataset { kg, split }
}
