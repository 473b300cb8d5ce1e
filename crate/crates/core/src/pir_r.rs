//! Additive-sharing PIR over r-replicated storage, private against any
//! `r - 1` colluding servers.
//!
//! The user splits `e_φ` into `r` random rows `V_1..V_r` summing to `e_φ`
//! and gives the `k`-th server of file `j` (ascending server order) the
//! coefficient `V_{k,j}`. Summing all answers yields `x_φ`.

use rand::Rng;

use crate::field::{sum_vectors, Field, Fp};
use crate::graphs::StorageGraph;
use crate::linalg::Matrix;
use crate::pir2::{answer, PirError, ServerQuery, Transcript};
use crate::storage::{disperse, Dataset};

/// `r x n` matrix whose column sums are `e_φ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareMatrix {
    matrix: Matrix,
    phi: usize,
}

impl ShareMatrix {
    /// Completes `r - 1` given rows with the row that makes the columns sum
    /// to `e_φ`.
    pub fn from_free_rows(field: Field, free: Vec<Vec<Fp>>, files: usize, phi: usize) -> Self {
        assert!(phi < files, "phi out of range");
        assert!(free.iter().all(|r| r.len() == files), "free rows must have length n");
        let mut last = field.zeros(files);
        last[phi] = field.one();
        for row in &free {
            for (l, &v) in last.iter_mut().zip(row) {
                *l -= v;
            }
        }
        let mut rows = free;
        rows.push(last);
        ShareMatrix { matrix: Matrix::from_rows(field, rows), phi }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn phi(&self) -> usize {
        self.phi
    }

    pub fn shares(&self) -> usize {
        self.matrix.rows()
    }
}

pub fn gen_shares<R: Rng + ?Sized>(r: usize, files: usize, phi: usize, field: Field, rng: &mut R) -> ShareMatrix {
    assert!(r >= 2, "need at least two shares");
    let free = (0..r - 1).map(|_| (0..files).map(|_| field.sample(rng)).collect()).collect();
    ShareMatrix::from_free_rows(field, free, files, phi)
}

fn check_uniform(g: &StorageGraph, r: usize) -> Result<(), PirError> {
    match g.edges().iter().position(|e| e.len() != r) {
        Some(i) => Err(PirError::WrongEdgeSize { edge: i, size: g.edge(i).len(), expected: r }),
        None => Ok(()),
    }
}

/// The `k`-th smallest server of hyperedge `j` receives `V_{k,j}`.
pub fn disperse_shares(g: &StorageGraph, v: &ShareMatrix) -> Result<Vec<ServerQuery>, PirError> {
    check_uniform(g, v.shares())?;
    if v.matrix.cols() != g.files() {
        return Err(PirError::BadSecret(format!(
            "share matrix has {} columns for {} files",
            v.matrix.cols(),
            g.files()
        )));
    }
    let mut queries: Vec<ServerQuery> =
        (0..g.servers()).map(|server| ServerQuery { server, coefficients: Vec::new() }).collect();
    for (j, e) in g.edges().iter().enumerate() {
        for (k, &server) in e.iter().enumerate() {
            queries[server].coefficients.push((j, v.matrix[(k, j)]));
        }
    }
    Ok(queries)
}

pub fn reconstruct_r(answers: &[Vec<Fp>]) -> Vec<Fp> {
    sum_vectors(answers)
}

/// Result of an in-process r-replication retrieval.
#[derive(Debug, Clone)]
pub struct RetrievalR {
    pub value: Vec<Fp>,
    pub shares: ShareMatrix,
    pub transcript: Transcript,
}

pub fn retrieve_r<R: Rng + ?Sized>(
    g: &StorageGraph,
    data: &Dataset,
    phi: usize,
    rng: &mut R,
) -> Result<RetrievalR, PirError> {
    let r = g.uniformity().ok_or_else(|| PirError::BadSecret("graph is not uniform".into()))?;
    if phi >= g.files() {
        return Err(PirError::PhiOutOfRange { phi, files: g.files() });
    }
    let servers = disperse(g, data)?;
    let shares = gen_shares(r, g.files(), phi, data.field(), rng);
    let queries = disperse_shares(g, &shares)?;
    let answers = queries
        .iter()
        .map(|sq| answer(&servers[sq.server], &sq.coefficients))
        .collect::<Result<Vec<_>, _>>()?;
    let value = reconstruct_r(&answers);
    let upload = queries.iter().map(|sq| sq.coefficients.len()).sum();
    let download = answers.iter().map(Vec::len).sum();
    Ok(RetrievalR { value, shares, transcript: Transcript { queries, answers, upload, download } })
}
