//! Term-keyed vector tables and the paired ADE/drug embedding space.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::{dot, norm, sigmoid, Real};

/// Dense row-major table of vectors, one row per term.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable<T> {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> VectorTable<T> {
    pub fn zeros(terms: Vec<String>, dim: usize) -> Result<Self> {
        let data = vec![T::zero(); terms.len() * dim];
        Self::from_parts(terms, dim, data)
    }

    pub fn from_parts(terms: Vec<String>, dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != terms.len() * dim {
            return Err(Error::Config(format!(
                "table data has {} values, expected {} rows x {dim}",
                data.len(),
                terms.len()
            )));
        }
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate term `{t}` in vector table")));
            }
        }
        Ok(VectorTable {
            terms,
            index,
            dim,
            data,
        })
    }

    /// Builds a table from `(term, vector)` rows sharing one dimension.
    pub fn from_rows<S: Into<String>>(dim: usize, rows: impl IntoIterator<Item = (S, Vec<T>)>) -> Result<Self> {
        let mut terms = Vec::new();
        let mut data = Vec::new();
        for (term, v) in rows {
            let term = term.into();
            if v.len() != dim {
                return Err(Error::Config(format!("row `{term}` has dim {}, expected {dim}", v.len())));
            }
            terms.push(term);
            data.extend(v);
        }
        Self::from_parts(terms, dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, row: usize) -> &str {
        &self.terms[row]
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, term: &str) -> Option<&[T]> {
        self.id(term).map(|i| self.row(i))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copy with every non-zero row scaled to unit Euclidean norm.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for i in 0..out.len() {
            let row = out.row_mut(i);
            let n = norm(row);
            if n > T::zero() {
                row.iter_mut().for_each(|v| *v = *v / n);
            }
        }
        out
    }

    /// Text format: a `<rows> <dim>` header, then `term v1 ... vdim` per row.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (i, term) in self.terms.iter().enumerate() {
            if term.is_empty() {
                return Err(Error::Config("empty term cannot be written".into()));
            }
            write!(out, "{}", escape_term(term))?;
            for v in self.row(i) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, line)) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        break line;
                    }
                }
                None => return Err(Error::parse("embedding file", 1, "missing `<rows> <dim>` header")),
            }
        };
        let mut head = header.split_whitespace().map(str::parse::<usize>);
        let (Some(Ok(rows)), Some(Ok(dim)), None) = (head.next(), head.next(), head.next()) else {
            return Err(Error::parse("embedding file", 1, format!("bad header `{header}`")));
        };
        let mut terms = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows * dim);
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let term = unescape_term(parts.next().unwrap_or_default())
                .ok_or_else(|| Error::parse("embedding file", idx + 1, "bad %-escape in term"))?;
            let before = data.len();
            for p in parts {
                let v: T = p
                    .parse()
                    .map_err(|_| Error::parse("embedding file", idx + 1, format!("bad value `{p}`")))?;
                data.push(v);
            }
            if data.len() - before != dim {
                return Err(Error::parse(
                    "embedding file",
                    idx + 1,
                    format!("row `{term}` has {} values, expected {dim}", data.len() - before),
                ));
            }
            terms.push(term);
        }
        if terms.len() != rows {
            return Err(Error::parse(
                "embedding file",
                1,
                format!("header declares {rows} rows, found {}", terms.len()),
            ));
        }
        Self::from_parts(terms, dim, data)
    }
}

/// Terms are space-delimited on disk, so `%` and whitespace are written as
/// `%XX` escapes (`%20` for a space).
pub fn escape_term(term: &str) -> String {
    let mut out = String::with_capacity(term.len());
    for ch in term.chars() {
        if ch == '%' || ch.is_whitespace() {
            let mut buf = [0u8; 4];
            for byte in ch.encode_utf8(&mut buf).bytes() {
                out.push_str(&format!("%{byte:02X}"));
            }
        } else {
            out.push(ch);
        }
    }
    out
}

pub fn unescape_term(raw: &str) -> Option<String> {
    let bytes = raw.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = raw.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

/// ADE input vectors and drug output vectors of one trained edition.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace<T> {
    pub ades: VectorTable<T>,
    pub drugs: VectorTable<T>,
    pub seed: u64,
}

impl<T: Real> EmbeddingSpace<T> {
    pub fn new(ades: VectorTable<T>, drugs: VectorTable<T>, seed: u64) -> Result<Self> {
        if ades.dim() != drugs.dim() {
            return Err(Error::Config(format!(
                "ADE dim {} differs from drug dim {}",
                ades.dim(),
                drugs.dim()
            )));
        }
        Ok(EmbeddingSpace { ades, drugs, seed })
    }

    pub fn dim(&self) -> usize {
        self.ades.dim()
    }

    /// `sigmoid(ade . drug)`, the estimate of P(drug | ADE).
    pub fn score_pair(&self, ade: &str, drug: &str) -> Result<T> {
        score_vectors(&self.ades, &self.drugs, ade, drug)
    }
}

/// Scores a drug/ADE pair from an ADE table and a (possibly retrofitted)
/// drug table.
pub fn score_vectors<T: Real>(ades: &VectorTable<T>, drugs: &VectorTable<T>, ade: &str, drug: &str) -> Result<T> {
    let a = ades.get(ade).ok_or_else(|| Error::NotFound(format!("ADE `{ade}`")))?;
    let d = drugs.get(drug).ok_or_else(|| Error::NotFound(format!("drug `{drug}`")))?;
    Ok(sigmoid(dot(a, d)))
}
