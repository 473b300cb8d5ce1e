//! Datasets and their placement on servers.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::field::{Field, FieldError, Fp};
use crate::graphs::StorageGraph;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StorageError {
    #[error("graph has {graph} files but the dataset has {dataset}")]
    FileCountMismatch { graph: usize, dataset: usize },
    #[error("dataset must have at least one file and one symbol per file")]
    Empty,
    #[error("file {file} has length {len}, expected {expected}")]
    Ragged { file: usize, len: usize, expected: usize },
    #[error("file {file} holds {value}, which is not below q = {q}")]
    OutOfField { file: usize, value: u64, q: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `n` files of `f` symbols each over one prime field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    field: Field,
    rows: Vec<Vec<Fp>>,
}

/// What one server stores: file index to stored vector. In replication
/// mode the vector is a full copy of the file; in coded mode it is the
/// server's codeword symbol for that file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerContents {
    pub server: usize,
    pub field: Field,
    /// Length of every stored vector.
    pub symbol_len: usize,
    pub holdings: BTreeMap<usize, Vec<Fp>>,
}

impl Dataset {
    pub fn new(field: Field, rows: Vec<Vec<Fp>>) -> Result<Self, StorageError> {
        let f = rows.first().map_or(0, Vec::len);
        if f == 0 {
            return Err(StorageError::Empty);
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != f {
                return Err(StorageError::Ragged { file: i, len: r.len(), expected: f });
            }
            assert!(r.iter().all(|x| x.field() == field), "dataset entries from another field");
        }
        Ok(Dataset { field, rows })
    }

    pub fn from_u64(field: Field, rows: &[Vec<u64>]) -> Result<Self, StorageError> {
        for (i, r) in rows.iter().enumerate() {
            if let Some(&v) = r.iter().find(|&&v| v >= field.modulus()) {
                return Err(StorageError::OutOfField { file: i, value: v, q: field.modulus() });
            }
        }
        Dataset::new(field, rows.iter().map(|r| r.iter().map(|&v| field.elem(v)).collect()).collect())
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn files(&self) -> usize {
        self.rows.len()
    }

    pub fn file_len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn file(&self, i: usize) -> &[Fp] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<Fp>] {
        &self.rows
    }

    /// Parses `n f q` followed by `n` lines of `f` integers.
    pub fn parse(text: &str) -> Result<Self, StorageError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) =
            lines.next().ok_or(StorageError::Parse { line: 0, message: "missing `n f q` header".into() })?;
        let [n, f, q] = parse_u64s(hline, header)?[..] else {
            return Err(StorageError::Parse { line: hline, message: "header must be `n f q`".into() });
        };
        let field = Field::new(q)?;
        let mut rows = Vec::with_capacity(n as usize);
        for (line, l) in lines {
            let vals = parse_u64s(line, l)?;
            if vals.len() as u64 != f {
                return Err(StorageError::Parse {
                    line,
                    message: format!("expected {f} symbols, found {}", vals.len()),
                });
            }
            rows.push(vals);
        }
        if rows.len() as u64 != n {
            return Err(StorageError::Parse {
                line: 0,
                message: format!("header announces {n} files, found {}", rows.len()),
            });
        }
        Dataset::from_u64(field, &rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.files(), self.file_len(), self.field.modulus());
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|x| x.value().to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Uniform `n x f` dataset.
pub fn random_dataset<R: Rng + ?Sized>(n: usize, f: usize, field: Field, rng: &mut R) -> Dataset {
    assert!(n >= 1 && f >= 1, "dataset dimensions must be positive");
    let rows = (0..n).map(|_| (0..f).map(|_| field.sample(rng)).collect()).collect();
    Dataset { field, rows }
}

/// Server `j` receives a copy of `x_i` for every hyperedge `i` containing `j`.
pub fn disperse(g: &StorageGraph, data: &Dataset) -> Result<Vec<ServerContents>, StorageError> {
    if g.files() != data.files() {
        return Err(StorageError::FileCountMismatch { graph: g.files(), dataset: data.files() });
    }
    let mut servers: Vec<ServerContents> =
        (0..g.servers()).map(|server| ServerContents::empty(server, data.field(), data.file_len())).collect();
    for (i, e) in g.edges().iter().enumerate() {
        for &v in e {
            servers[v].holdings.insert(i, data.file(i).to_vec());
        }
    }
    Ok(servers)
}

impl ServerContents {
    pub fn empty(server: usize, field: Field, symbol_len: usize) -> Self {
        ServerContents { server, field, symbol_len, holdings: BTreeMap::new() }
    }

    pub fn holds(&self, file: usize) -> bool {
        self.holdings.contains_key(&file)
    }

    pub fn stored_symbols(&self) -> usize {
        self.holdings.values().map(Vec::len).sum()
    }
}

fn parse_u64s(line: usize, text: &str) -> Result<Vec<u64>, StorageError> {
    text.split_whitespace()
        .map(|t| {
            t.parse().map_err(|_| StorageError::Parse { line, message: format!("not an integer: `{t}`") })
        })
        .collect()
}
