//! File formats: problem JSON, matrices, candidate vectors and output sinks.
//!
//! A problem file is the JSON form of [`ProblemSpec`]. Its `loss.a` may be
//! given inline (`{"dense": [[...]]}` or `{"csr": {...}}`) or as a reference
//! `{"file": "A.mtx"}`, resolved relative to the problem file.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseMatrix, Matrix};
use crate::model::ProblemSpec;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn json_error(origin: &str, e: serde_json::Error) -> Error {
    if e.line() == 0 {
        Error::Parse(format!("{origin}: {e}"))
    } else {
        // serde_json already appends "at line L column C".
        Error::Parse(format!("{origin}:{}:{}: {e}", e.line(), e.column()))
    }
}

/// Reads a problem file, resolving a `{"file": ...}` matrix reference.
pub fn load_problem(path: &Path) -> Result<ProblemSpec> {
    let text = read_text(path)?;
    parse_problem(&text, path.parent(), &path.display().to_string())
}

/// Parses problem JSON. `base` anchors relative matrix paths.
pub fn parse_problem(text: &str, base: Option<&Path>, origin: &str) -> Result<ProblemSpec> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| json_error(origin, e))?;
    let reference = value
        .pointer("/loss/a/file")
        .and_then(Value::as_str)
        .map(PathBuf::from);
    match reference {
        None => serde_json::from_str(text).map_err(|e| json_error(origin, e)),
        Some(rel) => {
            let path = match base {
                Some(dir) if rel.is_relative() => dir.join(rel),
                _ => rel,
            };
            let a = load_matrix(&path)?;
            value["loss"]["a"] = serde_json::to_value(a)?;
            serde_json::from_value(value).map_err(|e| json_error(origin, e))
        }
    }
}

/// Loads a matrix: Matrix Market when the extension is `.mtx`, dense text otherwise.
pub fn load_matrix(path: &Path) -> Result<Matrix> {
    let text = read_text(path)?;
    let origin = path.display().to_string();
    if path.extension().and_then(|e| e.to_str()) == Some("mtx") {
        parse_matrix_market(&text, &origin)
    } else {
        parse_dense_text(&text, &origin).map(Matrix::Dense)
    }
}

/// Rows of whitespace-separated reals. Blank lines and `#` comments are skipped.
pub fn parse_dense_text(text: &str, origin: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .enumerate()
            .map(|(col, tok)| {
                tok.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("{origin}:{}: field {}: not a number: {tok:?}", ln + 1, col + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "{origin}:{}: expected {} fields, found {}",
                    ln + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{origin}: no matrix rows")));
    }
    DenseMatrix::from_rows(&rows)
}

/// Matrix Market `coordinate` (real, integer or pattern; general or symmetric)
/// and `array` (real, general) formats.
pub fn parse_matrix_market(text: &str, origin: &str) -> Result<Matrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{origin}: empty file")))?;
    let h: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(Error::Parse(format!("{origin}:1: not a MatrixMarket matrix header")));
    }
    let (format, field, symmetry) = (h[2].as_str(), h[3].as_str(), h[4].as_str());
    if !matches!(field, "real" | "integer" | "pattern") {
        return Err(Error::Parse(format!("{origin}:1: unsupported field {field:?}")));
    }
    if !matches!(symmetry, "general" | "symmetric") {
        return Err(Error::Parse(format!("{origin}:1: unsupported symmetry {symmetry:?}")));
    }
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let parse_usize = |ln: usize, tok: Option<&str>| -> Result<usize> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("{origin}:{}: expected an integer", ln + 1)))
    };
    let parse_f64 = |ln: usize, tok: Option<&str>| -> Result<f64> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("{origin}:{}: expected a number", ln + 1)))
    };
    let (ln, size) = body
        .next()
        .ok_or_else(|| Error::Parse(format!("{origin}: missing size line")))?;
    let mut toks = size.split_whitespace();
    let rows = parse_usize(ln, toks.next())?;
    let cols = parse_usize(ln, toks.next())?;
    match format {
        "coordinate" => {
            let nnz = parse_usize(ln, toks.next())?;
            let mut triplets = Vec::with_capacity(nnz);
            for (ln, line) in body.by_ref().take(nnz) {
                let mut t = line.split_whitespace();
                let i = parse_usize(ln, t.next())?;
                let j = parse_usize(ln, t.next())?;
                let v = if field == "pattern" { 1.0 } else { parse_f64(ln, t.next())? };
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(Error::Parse(format!(
                        "{origin}:{}: entry ({i}, {j}) outside {rows}x{cols} (indices are 1-based)",
                        ln + 1
                    )));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetry == "symmetric" && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
            if triplets.len() < nnz {
                return Err(Error::Parse(format!("{origin}: expected {nnz} entries")));
            }
            Ok(Matrix::Csr(CsrMatrix::from_triplets(rows, cols, &triplets)?))
        }
        "array" => {
            if field == "pattern" || symmetry != "general" {
                return Err(Error::Parse(format!("{origin}: array format must be real general")));
            }
            // Column-major.
            let mut m = DenseMatrix::zeros(rows, cols);
            let mut count = 0;
            for (ln, line) in body {
                for tok in line.split_whitespace() {
                    if count == rows * cols {
                        return Err(Error::Parse(format!("{origin}:{}: too many values", ln + 1)));
                    }
                    m.set(count % rows.max(1), count / rows.max(1), parse_f64(ln, Some(tok))?);
                    count += 1;
                }
            }
            if count != rows * cols {
                return Err(Error::Parse(format!(
                    "{origin}: expected {} values, found {count}",
                    rows * cols
                )));
            }
            Ok(Matrix::Dense(m))
        }
        other => Err(Error::Parse(format!("{origin}:1: unsupported format {other:?}"))),
    }
}

/// Reads a vector from a JSON array, from the `x_final` or `x` field of a JSON
/// object (a solve report, for instance), or from whitespace-separated text.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    parse_vector(&text, &path.display().to_string())
}

pub fn parse_vector(text: &str, origin: &str) -> Result<Vec<f64>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') || trimmed.starts_with('{') {
        let value: Value = serde_json::from_str(text).map_err(|e| json_error(origin, e))?;
        let array = match &value {
            Value::Array(_) => &value,
            Value::Object(map) => map
                .get("x_final")
                .or_else(|| map.get("x"))
                .ok_or_else(|| Error::Parse(format!("{origin}: object has no \"x_final\" or \"x\" field")))?,
            _ => unreachable!("checked first character"),
        };
        return serde_json::from_value(array.clone()).map_err(|e| json_error(origin, e));
    }
    text.split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            tok.parse::<f64>()
                .map_err(|_| Error::Parse(format!("{origin}: entry {}: not a number: {tok:?}", i + 1)))
        })
        .collect()
}

/// A file, or stdout for `None` and `-`.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(io::stdout().lock())),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(io::stdout().lock())),
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| {
                Error::Io(io::Error::new(e.kind(), format!("{}: {e}", p.display())))
            })?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
    }
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// `report.json` → `report.<suffix>`, used for the companion CSV files.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::LinearOperator;

    const PROBLEM: &str = r#"{
  "loss": {"kind": "least_squares", "a": {"dense": [[1.0, 0.0], [0.0, 1.0]]}, "b": [2.0, 0.0]},
  "box": {"lower": [0.0, 0.0], "upper": [10.0, "inf"]},
  "groups": {"n": 2, "groups": [[0], [1]], "weights": [1.0, 1.0], "p": 1},
  "lambda1": 1.0
}"#;

    #[test]
    fn inline_problem() {
        let p = parse_problem(PROBLEM, None, "p.json").unwrap();
        assert_eq!(p.n(), 2);
        assert_eq!(p.bounds().upper()[1], f64::INFINITY);
        assert_eq!(p.lambda2(), 0.0);
    }

    #[test]
    fn errors_carry_line_and_column() {
        let broken = PROBLEM.replace("\"lambda1\": 1.0", "\"lambda1\": ");
        let e = parse_problem(&broken, None, "p.json").unwrap_err().to_string();
        assert!(e.contains("p.json:6:"), "{e}");
        let unknown = PROBLEM.replace("least_squares", "hinge");
        let e = parse_problem(&unknown, None, "p.json").unwrap_err().to_string();
        assert!(e.contains("p.json:2:") && e.contains("hinge"), "{e}");
        let bad_lambda = PROBLEM.replace("\"lambda1\": 1.0", "\"lambda1\": -1.0");
        let e = parse_problem(&bad_lambda, None, "p.json").unwrap_err().to_string();
        assert!(e.contains("lambda1"), "{e}");
    }

    #[test]
    fn matrix_file_reference() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("A.txt"), "# identity\n1 0\n0 1\n").unwrap();
        let text = PROBLEM.replace(r#"{"dense": [[1.0, 0.0], [0.0, 1.0]]}"#, r#"{"file": "A.txt"}"#);
        let path = dir.path().join("p.json");
        fs::write(&path, text).unwrap();
        let p = load_problem(&path).unwrap();
        assert_eq!(p.loss().matrix().nrows(), 2);
        assert_eq!(p.loss().value(&[2.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn dense_text() {
        let m = parse_dense_text("1 2 3\n\n4 5 6 # tail\n", "m").unwrap();
        assert_eq!((m.nrows(), m.ncols()), (2, 3));
        assert_eq!(m.get(1, 2), 6.0);
        let e = parse_dense_text("1 2\n3\n", "m").unwrap_err().to_string();
        assert!(e.contains("m:2"), "{e}");
        let e = parse_dense_text("1 x\n", "m").unwrap_err().to_string();
        assert!(e.contains("m:1: field 2"), "{e}");
    }

    #[test]
    fn matrix_market() {
        let coord = "%%MatrixMarket matrix coordinate real symmetric\n% c\n3 3 3\n1 1 2.0\n3 1 -1.5\n2 2 1\n";
        let Matrix::Csr(m) = parse_matrix_market(coord, "m.mtx").unwrap() else {
            panic!("expected csr");
        };
        let mut y = vec![0.0; 3];
        m.apply(&[1.0, 1.0, 1.0], &mut y);
        assert_eq!(y, vec![0.5, 1.0, -1.5]);

        let array = "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n";
        let Matrix::Dense(d) = parse_matrix_market(array, "m.mtx").unwrap() else {
            panic!("expected dense");
        };
        assert_eq!(d.row(0), &[1.0, 3.0]);
        assert_eq!(d.row(1), &[2.0, 4.0]);

        let oob = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert!(parse_matrix_market(oob, "m.mtx").unwrap_err().to_string().contains("m.mtx:3"));
        assert!(parse_matrix_market("hello\n", "m.mtx").is_err());
    }

    #[test]
    fn vectors() {
        assert_eq!(parse_vector("[1, 2.5]", "v").unwrap(), vec![1.0, 2.5]);
        assert_eq!(parse_vector("{\"x_final\": [3]}", "v").unwrap(), vec![3.0]);
        assert_eq!(parse_vector("{\"x\": [4]}", "v").unwrap(), vec![4.0]);
        assert_eq!(parse_vector("1 2\n3", "v").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_vector("{\"y\": [1]}", "v").is_err());
        assert!(parse_vector("1 q", "v").is_err());
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("/t/r.json"), "trace.csv"), PathBuf::from("/t/r.trace.csv"));
    }
}
