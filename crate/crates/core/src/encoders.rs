//! Attribute-value encoders: bag-of-words summation and an LSTM whose
//! final hidden state represents the literal.
//!
//! Both run on a [`Tape`] so gradients reach the word table (and the LSTM
//! weights). Values are re-encoded from the current word table every time
//! they are needed.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{KaneError, Result};
use crate::kg::AttributeValue;
use crate::model::{fill_uniform, Encoder};

pub const GATE_NAMES: [&str; 4] = ["input", "forget", "output", "candidate"];
const INPUT: usize = 0;
const FORGET: usize = 1;
const OUTPUT: usize = 2;
const CANDIDATE: usize = 3;

/// Standard LSTM cell weights. Gate order everywhere is input, forget,
/// output, candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    /// `k × k` input-to-gate transforms.
    pub input: [Tensor; 4],
    /// `k × k` hidden-to-gate transforms.
    pub hidden: [Tensor; 4],
    /// `1 × k` gate biases.
    pub bias: [Tensor; 4],
}

impl LstmParams {
    pub fn zeros(k: usize) -> Self {
        let m = || Tensor::zeros(&[k, k]);
        let b = || Tensor::zeros(&[1, k]);
        LstmParams {
            input: [m(), m(), m(), m()],
            hidden: [m(), m(), m(), m()],
            bias: [b(), b(), b(), b()],
        }
    }

    /// Uniform weights, forget-gate bias 1 and other biases 0.
    pub fn init(k: usize, bound: f64, rng: &mut (impl Rng + ?Sized)) -> Self {
        let mut p = LstmParams::zeros(k);
        for t in p.input.iter_mut().chain(p.hidden.iter_mut()) {
            fill_uniform(t, bound, rng);
        }
        p.bias[FORGET] = Tensor::full(&[1, k], 1.0);
        p
    }

    pub fn hidden_size(&self) -> usize {
        self.input[0].rows()
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> LstmVars {
        let mut leaf = |t: &Tensor| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        LstmVars {
            input: std::array::from_fn(|g| leaf(&self.input[g])),
            hidden: std::array::from_fn(|g| leaf(&self.hidden[g])),
            bias: std::array::from_fn(|g| leaf(&self.bias[g])),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LstmVars {
    pub input: [Var; 4],
    pub hidden: [Var; 4],
    pub bias: [Var; 4],
}

fn token_indices(value: &AttributeValue) -> Result<Arc<[usize]>> {
    if value.tokens.is_empty() {
        return Err(KaneError::Contract("cannot encode an empty token sequence".into()));
    }
    Ok(value.tokens.iter().map(|w| w.0).collect())
}

/// Tokens sorted by id, so the floating-point sum does not depend on order.
fn bag_indices(value: &AttributeValue) -> Result<Vec<usize>> {
    let mut idx = token_indices(value)?.to_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Sum of the word rows of one value.
pub fn bow_encode_var(tape: &mut Tape, table: Var, value: &AttributeValue) -> Result<Var> {
    let rows = tape.gather_rows(table, bag_indices(value)?.into())?;
    tape.sum_rows(rows)
}

/// Runs the LSTM left to right over one value from zero states and returns
/// the final hidden state.
pub fn lstm_encode_var(
    tape: &mut Tape,
    table: Var,
    lstm: &LstmVars,
    value: &AttributeValue,
) -> Result<Var> {
    let tokens = token_indices(value)?;
    let k = tape.value(table).row_width();
    let biases: Vec<Var> = lstm
        .bias
        .iter()
        .map(|&b| tape.reshape(b, vec![k]))
        .collect::<Result<_>>()?;
    let mut h = tape.constant(Tensor::zeros(&[k]));
    let mut c = tape.constant(Tensor::zeros(&[k]));
    for &w in tokens.iter() {
        let x = tape.row(table, w)?;
        let mut pre = [h; 4];
        for g in 0..4 {
            let a = tape.matvec(lstm.input[g], x)?;
            let b = tape.matvec(lstm.hidden[g], h)?;
            let s = tape.add(a, b)?;
            pre[g] = tape.add(s, biases[g])?;
        }
        let i = tape.sigmoid(pre[INPUT]);
        let f = tape.sigmoid(pre[FORGET]);
        let o = tape.sigmoid(pre[OUTPUT]);
        let cand = tape.tanh(pre[CANDIDATE]);
        let keep = tape.mul(f, c)?;
        let write = tape.mul(i, cand)?;
        c = tape.add(keep, write)?;
        let tc = tape.tanh(c);
        h = tape.mul(o, tc)?;
    }
    Ok(h)
}

/// Bag-of-words encoding on plain tensors.
pub fn bow_encode(value: &AttributeValue, table: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let t = tape.constant(table.clone());
    let v = bow_encode_var(&mut tape, t, value)?;
    Ok(tape.value(v).clone())
}

/// LSTM encoding on plain tensors.
pub fn lstm_encode(value: &AttributeValue, table: &Tensor, params: &LstmParams) -> Result<Tensor> {
    let mut tape = Tape::new();
    let t = tape.constant(table.clone());
    let lstm = params.bind(&mut tape, false);
    let v = lstm_encode_var(&mut tape, t, &lstm, value)?;
    Ok(tape.value(v).clone())
}

/// Encodes every value at once into a `|values| × k` matrix (row `i` is
/// value `i`). LSTM sequences are batched by length.
pub fn encode_values(
    tape: &mut Tape,
    encoder: Encoder,
    table: Var,
    lstm: Option<&LstmVars>,
    values: &[AttributeValue],
) -> Result<Var> {
    if values.is_empty() {
        return Err(KaneError::Contract("no attribute values to encode".into()));
    }
    match encoder {
        Encoder::Bow => {
            let mut flat = Vec::new();
            let mut offsets = vec![0];
            for v in values {
                flat.extend(bag_indices(v)?);
                offsets.push(flat.len());
            }
            let rows = tape.gather_rows(table, flat.into())?;
            tape.segment_sum(rows, offsets.into())
        }
        Encoder::Lstm => {
            let lstm = lstm.ok_or_else(|| {
                KaneError::Contract("LSTM encoder selected without LSTM parameters".into())
            })?;
            lstm_encode_batch(tape, table, lstm, values)
        }
    }
}

fn lstm_encode_batch(
    tape: &mut Tape,
    table: Var,
    lstm: &LstmVars,
    values: &[AttributeValue],
) -> Result<Var> {
    let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, v) in values.iter().enumerate() {
        if v.tokens.is_empty() {
            return Err(KaneError::Contract("cannot encode an empty token sequence".into()));
        }
        by_len.entry(v.tokens.len()).or_default().push(i);
    }
    let input_t: Vec<Var> = lstm
        .input
        .iter()
        .map(|&w| tape.transpose(w))
        .collect::<Result<_>>()?;
    let hidden_t: Vec<Var> = lstm
        .hidden
        .iter()
        .map(|&w| tape.transpose(w))
        .collect::<Result<_>>()?;

    let mut finals = Vec::with_capacity(by_len.len());
    let mut order = Vec::with_capacity(values.len());
    for (len, members) in &by_len {
        let n = members.len();
        let broadcast: Arc<[usize]> = vec![0; n].into();
        let biases: Vec<Var> = lstm
            .bias
            .iter()
            .map(|&b| tape.gather_rows(b, broadcast.clone()))
            .collect::<Result<_>>()?;
        let mut h: Option<Var> = None;
        let mut c: Option<Var> = None;
        for step in 0..*len {
            let idx: Arc<[usize]> = members.iter().map(|&m| values[m].tokens[step].0).collect();
            let x = tape.gather_rows(table, idx)?;
            let mut pre = Vec::with_capacity(4);
            for g in 0..4 {
                let mut s = tape.matmul(x, input_t[g])?;
                if let Some(h) = h {
                    let hh = tape.matmul(h, hidden_t[g])?;
                    s = tape.add(s, hh)?;
                }
                pre.push(tape.add(s, biases[g])?);
            }
            let i = tape.sigmoid(pre[INPUT]);
            let f = tape.sigmoid(pre[FORGET]);
            let o = tape.sigmoid(pre[OUTPUT]);
            let cand = tape.tanh(pre[CANDIDATE]);
            let write = tape.mul(i, cand)?;
            let cell = match c {
                Some(prev) => {
                    let keep = tape.mul(f, prev)?;
                    tape.add(keep, write)?
                }
                None => write,
            };
            let tc = tape.tanh(cell);
            h = Some(tape.mul(o, tc)?);
            c = Some(cell);
        }
        finals.push(h.expect("length >= 1"));
        order.extend_from_slice(members);
    }
    let stacked = tape.concat_rows(&finals)?;
    // row j of `stacked` holds value order[j]; invert to value order
    let mut position = vec![0; values.len()];
    for (j, &v) in order.iter().enumerate() {
        position[v] = j;
    }
    tape.gather_rows(stacked, position.into())
}
