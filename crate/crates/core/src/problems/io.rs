//! Text format for problems.
//!
//! ```text
//! kaczlab-problem v1
//! # label: shaw-8           (comment; the writer records the label here)
//! m n
//! <m lines of n floats>     (17 significant digits)
//! b
//! <m values>
//! x_true                    (optional)
//! <n values>
//! b_noisy delta <value>     (optional)
//! <m values>
//! ```
//!
//! Tokens are whitespace-separated and everything from `#` to the end of
//! a line is a comment. Values are written with 17 significant digits, so
//! a save/load round trip reproduces every f64 bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::problems::LinearProblem;

const MAGIC: &str = "kaczlab-problem v1";

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write `p` to `path` in the problem text format.
pub fn save_problem(p: &LinearProblem, path: impl AsRef<Path>) -> Result<()> {
    p.validate()?;
    let mut out = Vec::new();
    writeln!(out, "{MAGIC}")?;
    if !p.label.is_empty() {
        writeln!(out, "# label: {}", p.label)?;
    }
    let (m, n) = p.a.dim();
    writeln!(out, "{m} {n}")?;
    for row in p.a.rows() {
        let line: Vec<String> = row.iter().map(|&x| fmt(x)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    writeln!(out, "b")?;
    for &x in p.b.iter() {
        writeln!(out, "{}", fmt(x))?;
    }
    if let Some(xt) = &p.x_true {
        writeln!(out, "x_true")?;
        for &x in xt.iter() {
            writeln!(out, "{}", fmt(x))?;
        }
    }
    if let (Some(bn), Some(delta)) = (&p.b_noisy, p.delta) {
        writeln!(out, "b_noisy delta {}", fmt(delta))?;
        for &x in bn.iter() {
            writeln!(out, "{}", fmt(x))?;
        }
    }
    fs::write(path, out)?;
    Ok(())
}

struct Reader<'a> {
    // (1-based line number, comment-stripped content) for nonblank lines
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    label: Option<String>,
    last_line: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let mut lines = Vec::new();
        let mut label = None;
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            last_line = idx + 1;
            let (content, comment) = match raw.find('#') {
                Some(p) => (&raw[..p], Some(raw[p + 1..].trim())),
                None => (raw, None),
            };
            if let Some(c) = comment {
                if let Some(rest) = c.strip_prefix("label:") {
                    label.get_or_insert_with(|| rest.trim().to_string());
                }
            }
            if !content.trim().is_empty() {
                lines.push((idx + 1, content.trim()));
            }
        }
        Reader { lines, pos: 0, label, last_line }
    }

    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        let item = self.lines.get(self.pos).copied();
        self.pos += 1;
        item
    }

    fn peek_line(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.pos).copied()
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::ParseError { line, message: message.into() }
    }

    fn eof_line(&self) -> usize {
        self.last_line
    }

    /// Collect exactly `count` floats from one or more lines.
    fn read_values(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let mut values = Vec::with_capacity(count);
        while values.len() < count {
            let (line_no, content) = self
                .next_line()
                .ok_or_else(|| self.err(self.eof_line(), format!("expected {count} values for {what}, got {}", values.len())))?;
            for tok in content.split_whitespace() {
                if values.len() == count {
                    return Err(self.err(line_no, format!("unexpected extra value for {what}")));
                }
                let x: f64 = tok
                    .parse()
                    .map_err(|_| self.err(line_no, format!("expected a number for {what}, got '{tok}'")))?;
                values.push(x);
            }
        }
        Ok(values)
    }
}

/// Read a problem from `path`.
pub fn load_problem(path: impl AsRef<Path>) -> Result<LinearProblem> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut r = Reader::new(&text);

    let (line_no, header) = r
        .next_line()
        .ok_or_else(|| r.err(1, "empty file"))?;
    if header != MAGIC {
        return Err(r.err(line_no, format!("expected header '{MAGIC}'")));
    }

    let (line_no, dims) = r
        .next_line()
        .ok_or_else(|| r.err(r.eof_line(), "missing dimensions line"))?;
    let mut parts = dims.split_whitespace();
    let parse_dim = |tok: Option<&str>, name: &str| -> Result<usize> {
        tok.and_then(|t| t.parse::<usize>().ok())
            .filter(|&d| d >= 1)
            .ok_or(Error::ParseError { line: line_no, message: format!("invalid dimension {name}") })
    };
    let m = parse_dim(parts.next(), "m")?;
    let n = parse_dim(parts.next(), "n")?;
    if parts.next().is_some() {
        return Err(r.err(line_no, "dimensions line must contain exactly 'm n'"));
    }

    let mut entries = Vec::with_capacity(m * n);
    for i in 0..m {
        let (line_no, content) = r
            .next_line()
            .ok_or_else(|| r.err(r.eof_line(), format!("expected {m} matrix rows, got {i}")))?;
        let row: Vec<f64> = content
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| r.err(line_no, format!("matrix row {}: invalid number '{tok}'", i + 1)))
            })
            .collect::<Result<_>>()?;
        if row.len() != n {
            return Err(r.err(line_no, format!("matrix row {} has {} values, expected {n}", i + 1, row.len())));
        }
        entries.extend(row);
    }
    let a = Array2::from_shape_vec((m, n), entries).expect("shape checked above");

    let (line_no, marker) = r
        .next_line()
        .ok_or_else(|| r.err(r.eof_line(), "missing 'b' section"))?;
    if marker != "b" {
        return Err(r.err(line_no, format!("expected marker 'b', got '{marker}'")));
    }
    let b = Array1::from_vec(r.read_values(m, "b")?);

    let mut x_true = None;
    let mut b_noisy = None;
    let mut delta = None;
    while let Some((line_no, content)) = r.peek_line() {
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("x_true") => {
                r.next_line();
                if x_true.is_some() {
                    return Err(r.err(line_no, "duplicate x_true section"));
                }
                x_true = Some(Array1::from_vec(r.read_values(n, "x_true")?));
            }
            Some("b_noisy") => {
                r.next_line();
                if b_noisy.is_some() {
                    return Err(r.err(line_no, "duplicate b_noisy section"));
                }
                match (toks.next(), toks.next(), toks.next()) {
                    (Some("delta"), Some(v), None) => {
                        let d: f64 = v
                            .parse()
                            .map_err(|_| r.err(line_no, format!("invalid noise level '{v}'")))?;
                        delta = Some(d);
                    }
                    _ => return Err(r.err(line_no, "expected 'b_noisy delta <value>'")),
                }
                b_noisy = Some(Array1::from_vec(r.read_values(m, "b_noisy")?));
            }
            Some(other) => {
                return Err(r.err(line_no, format!("unexpected content '{other}'")));
            }
            None => unreachable!("blank lines are filtered"),
        }
    }

    let label = r
        .label
        .clone()
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_default();

    let p = LinearProblem { a, b, b_noisy, delta, x_true, label };
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{gen_shaw, gen_synthetic, NoiseMode};

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("shaw8.txt");
        let p = gen_shaw(8)
            .unwrap()
            .with_noise(0.05, NoiseMode::SignedUniform, 3)
            .unwrap();
        save_problem(&p, &path).unwrap();
        let q = load_problem(&path).unwrap();
        assert_eq!(p, q);

        let p2 = gen_synthetic(5, 4, 2, false, 9).unwrap();
        let path2 = dir.path().join("syn.txt");
        save_problem(&p2, &path2).unwrap();
        assert_eq!(p2, load_problem(&path2).unwrap());
    }

    #[test]
    fn hand_written_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.txt");
        std::fs::write(
            &path,
            "kaczlab-problem v1\n# a 2x2 fixture\n2 2\n1.0 2.0  # row 1\n3.0 4.0\nb\n5.0\n6.0\n",
        )
        .unwrap();
        let p = load_problem(&path).unwrap();
        assert_eq!(p.a[[0, 0]], 1.0);
        assert_eq!(p.a[[0, 1]], 2.0);
        assert_eq!(p.a[[1, 0]], 3.0);
        assert_eq!(p.a[[1, 1]], 4.0);
        assert_eq!(p.b.to_vec(), vec![5.0, 6.0]);
        assert_eq!(p.label, "tiny");
        assert!(p.x_true.is_none());
    }

    #[test]
    fn row_count_mismatch_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        // header says 3 rows, file has 2
        std::fs::write(&path, "kaczlab-problem v1\n3 2\n1 2\n3 4\nb\n1\n2\n3\n").unwrap();
        match load_problem(&path) {
            Err(Error::ParseError { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn bad_header_and_bad_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad2.txt");
        std::fs::write(&path, "not a problem file\n").unwrap();
        assert!(matches!(load_problem(&path), Err(Error::ParseError { line: 1, .. })));

        std::fs::write(&path, "kaczlab-problem v1\n2 2\n1 2\n3 oops\nb\n1\n2\n").unwrap();
        assert!(matches!(load_problem(&path), Err(Error::ParseError { line: 4, .. })));
    }
}
