use crate::error::{KaneError, Result};

/// Splits TSV text into `(line_number, [f0, f1, f2])`, skipping blank and
/// `#` comment lines. Line numbers are 1-based.
pub fn parse_fields(text: &str) -> Result<Vec<(usize, [&str; 3])>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(KaneError::Parse {
                source_name: "<input>".into(),
                line,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
            return Err(KaneError::Parse {
                source_name: "<input>".into(),
                line,
                message: format!("field {} is empty", pos + 1),
            });
        }
        out.push((line, [fields[0], fields[1], fields[2]]));
    }
    Ok(out)
}

/// Lowercases and splits on Unicode whitespace; punctuation stays attached.
pub fn tokenize(literal: &str) -> Vec<String> {
    literal.split_whitespace().map(str::to_lowercase).collect()
}
