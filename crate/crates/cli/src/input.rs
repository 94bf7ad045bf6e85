//! Reading tensors from `ATEN` files or plain text.
//!
//! Text input has one matrix row per line, values separated by commas or
//! whitespace. `#` starts a comment. A single row is read as a vector.

use std::path::Path;

use anyhow::{bail, Context, Result};
use atomo_core::atoms::{Tensor, TENSOR_MAGIC};

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = if bytes.starts_with(TENSOR_MAGIC) {
        Tensor::from_bytes(&bytes).map_err(anyhow::Error::from)
    } else {
        let text = std::str::from_utf8(&bytes).context("input is neither an ATEN tensor nor UTF-8 text")?;
        parse_text(text)
    };
    parsed.with_context(|| format!("parsing {}", path.display()))
}

pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let row = parse_row(s, 1)?;
    if row.is_empty() {
        bail!("no values given");
    }
    Ok(row)
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(k, tok)| {
            let v: f64 = tok
                .parse()
                .map_err(|_| anyhow::anyhow!("line {lineno}, value {}: {tok:?} is not a number", k + 1))?;
            if !v.is_finite() {
                bail!("line {lineno}, value {}: {tok:?} is not finite", k + 1);
            }
            Ok(v)
        })
        .collect()
}

pub fn parse_text(text: &str) -> Result<Tensor> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let row = parse_row(line, i + 1)?;
        if row.is_empty() {
            continue;
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                bail!("line {}: {} values, expected {} like the first row", i + 1, row.len(), first.len());
            }
        }
        rows.push(row);
    }
    match rows.len() {
        0 => bail!("no values found"),
        1 => Ok(Tensor::vector(rows.pop().unwrap())?),
        _ => Ok(Tensor::from_rows(&rows)?),
    }
}

/// Views a vector as a `1 x n` matrix; matrices pass through.
pub fn as_matrix(t: Tensor) -> Result<Tensor> {
    match t.rank() {
        1 => {
            let n = t.len();
            Ok(t.reshape(vec![1, n])?)
        }
        2 => Ok(t),
        r => bail!("expected a matrix, got a rank-{r} tensor"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_forms() {
        let t = parse_text("# gradient\n1, 2 3\n\n4 5,6 # trailing\n").unwrap();
        assert_eq!(t.shape(), [2, 3]);
        assert_eq!(t.data(), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(parse_text("3 1 1 1").unwrap().shape(), [4]);
        assert_eq!(parse_values("3,1, 1 1").unwrap(), [3.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagnostics() {
        let e = parse_text("1 2\n3 x\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("\"x\""), "{e}");
        let e = parse_text("1 2\n3\n").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        assert!(parse_text("\n# nothing\n").is_err());
        assert!(parse_values("1 nan").is_err());
    }
}
