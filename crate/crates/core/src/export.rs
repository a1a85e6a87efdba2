//! Plain-text embedding export for external tools.
//!
//! ```text
//! #<entities> <k>
//! name<TAB>v1 v2 ... vk
//! ```
//!
//! Values are written with 17 significant digits, which parse back to the
//! identical `f64`.

use std::fmt::Write as _;

use crate::autodiff::Tensor;
use crate::error::{KaneError, Result};

pub fn write_embeddings(names: &[String], vectors: &Tensor) -> Result<String> {
    if names.len() != vectors.rows() {
        return Err(KaneError::Contract(format!(
            "{} names for {} vectors",
            names.len(),
            vectors.rows()
        )));
    }
    let k = vectors.row_width();
    let mut out = format!("#{} {k}\n", names.len());
    for (i, name) in names.iter().enumerate() {
        if name.contains(['\t', '\n']) {
            return Err(KaneError::Contract(format!("name {name:?} contains a tab or newline")));
        }
        out.push_str(name);
        out.push('\t');
        for (j, v) in vectors.row(i).iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    Ok(out)
}

fn parse_err(line: usize, message: impl Into<String>) -> KaneError {
    KaneError::Parse {
        source_name: "<embeddings>".into(),
        line,
        message: message.into(),
    }
}

/// Inverse of [`write_embeddings`].
pub fn parse_embeddings(text: &str) -> Result<(Vec<String>, Tensor)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let (n, k) = header
        .strip_prefix('#')
        .and_then(|h| h.split_once(' '))
        .and_then(|(n, k)| Some((n.parse::<usize>().ok()?, k.parse::<usize>().ok()?)))
        .ok_or_else(|| parse_err(1, "expected header `#<entities> <k>`"))?;
    let mut names = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * k);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let (name, values) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(lineno, "expected `name<TAB>values`"))?;
        let before = data.len();
        for v in values.split(' ') {
            data.push(
                v.parse::<f64>()
                    .map_err(|_| parse_err(lineno, format!("bad number {v:?}")))?,
            );
        }
        if data.len() - before != k {
            return Err(parse_err(
                lineno,
                format!("expected {k} values, found {}", data.len() - before),
            ));
        }
        names.push(name.to_string());
    }
    if names.len() != n {
        return Err(parse_err(1, format!("header says {n} entities, found {}", names.len())));
    }
    Ok((names, Tensor::matrix(n, k, data)?))
}
