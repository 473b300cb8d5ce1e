//! PIR over 2-replicated storage.
//!
//! The user draws `α ∈ (F_q*)^n`, `γ ∈ (F_q*)^s` and `h ∈ F_q \ {0, 1}` and
//! sends server `j` row `j` of `Q = diag(γ) · I_φ · diag(α)`. `I_φ` is the
//! incidence matrix with the entry of each file at its larger server turned
//! into `-1`, and the remaining entry of file `φ` turned into `h`. Scaling
//! every answer by `γ_j⁻¹` and summing cancels all files except `x_φ`, which
//! survives as `(h - 1) α_φ x_φ`.

use num_rational::Ratio;
use rand::Rng;
use thiserror::Error;

use crate::field::{axpy, Field, Fp};
use crate::graphs::StorageGraph;
use crate::linalg::Matrix;
use crate::storage::{disperse, Dataset, ServerContents, StorageError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PirError {
    #[error("file index {phi} is out of range for {files} files")]
    PhiOutOfRange { phi: usize, files: usize },
    #[error("file {edge} is stored on {size} servers; this protocol needs exactly {expected}")]
    WrongEdgeSize { edge: usize, size: usize, expected: usize },
    #[error("server {server} was asked about file {file}, which it does not store")]
    Unheld { server: usize, file: usize },
    #[error("expected {expected} answers, got {got}")]
    AnswerCount { expected: usize, got: usize },
    #[error("answer of length {got}, expected {expected}")]
    AnswerLength { expected: usize, got: usize },
    #[error("secret is malformed: {0}")]
    BadSecret(String),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

/// The user's private randomness for one retrieval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSecret {
    pub alpha: Vec<Fp>,
    pub gamma: Vec<Fp>,
    pub h: Fp,
    pub phi: usize,
}

/// The sparse query sent to one server: `(file, coefficient)` pairs for the
/// files it stores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerQuery {
    pub server: usize,
    pub coefficients: Vec<(usize, Fp)>,
}

/// The `s x n` matrix of all queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryMatrix {
    matrix: Matrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub queries: Vec<ServerQuery>,
    pub answers: Vec<Vec<Fp>>,
    /// Field symbols sent to servers.
    pub upload: usize,
    /// Field symbols received from servers.
    pub download: usize,
}

/// Result of an in-process retrieval.
#[derive(Debug, Clone)]
pub struct Retrieval {
    pub value: Vec<Fp>,
    pub secret: UserSecret,
    pub query: QueryMatrix,
    pub transcript: Transcript,
}

impl Transcript {
    /// Retrieved symbols per downloaded symbol.
    pub fn rate(&self, file_len: usize) -> Ratio<u64> {
        Ratio::new(file_len as u64, self.download as u64)
    }
}

impl UserSecret {
    pub fn sample<R: Rng + ?Sized>(files: usize, servers: usize, phi: usize, field: Field, rng: &mut R) -> Self {
        UserSecret {
            alpha: (0..files).map(|_| field.sample_nonzero(rng)).collect(),
            gamma: (0..servers).map(|_| field.sample_nonzero(rng)).collect(),
            h: field.sample_h(rng),
            phi,
        }
    }

    pub fn validate(&self, g: &StorageGraph) -> Result<(), PirError> {
        let bad = |m: &str| Err(PirError::BadSecret(m.to_string()));
        if self.alpha.len() != g.files() || self.gamma.len() != g.servers() {
            return bad("alpha or gamma has the wrong length");
        }
        if self.phi >= g.files() {
            return Err(PirError::PhiOutOfRange { phi: self.phi, files: g.files() });
        }
        if self.alpha.iter().chain(&self.gamma).any(|x| x.is_zero()) {
            return bad("alpha and gamma must be nonzero");
        }
        if self.h.is_zero() || self.h == self.h.field().one() {
            return bad("h must differ from 0 and 1");
        }
        Ok(())
    }
}

impl QueryMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Sparse row `j`, restricted to the files server `j` stores.
    pub fn server_query(&self, g: &StorageGraph, j: usize) -> ServerQuery {
        ServerQuery {
            server: j,
            coefficients: g.incident_edges(j).into_iter().map(|i| (i, self.matrix[(j, i)])).collect(),
        }
    }

    pub fn server_queries(&self, g: &StorageGraph) -> Vec<ServerQuery> {
        (0..g.servers()).map(|j| self.server_query(g, j)).collect()
    }
}

pub(crate) fn check_two_uniform(g: &StorageGraph) -> Result<(), PirError> {
    match g.edges().iter().position(|e| e.len() != 2) {
        Some(i) => Err(PirError::WrongEdgeSize { edge: i, size: g.edge(i).len(), expected: 2 }),
        None => Ok(()),
    }
}

/// `I_φ`: `+1` at the smaller server of each file, `-1` at the larger, and
/// `h` in place of the `+1` of file `phi`.
pub fn signed_incidence(g: &StorageGraph, phi: usize, h: Fp) -> Result<Matrix, PirError> {
    check_two_uniform(g)?;
    if phi >= g.files() {
        return Err(PirError::PhiOutOfRange { phi, files: g.files() });
    }
    let field = h.field();
    let mut m = Matrix::zeros(field, g.servers(), g.files());
    for (i, e) in g.edges().iter().enumerate() {
        m[(e[0], i)] = if i == phi { h } else { field.one() };
        m[(e[1], i)] = -field.one();
    }
    Ok(m)
}

/// `Q = diag(γ) · I_φ · diag(α)` for a given secret.
pub fn query_matrix(g: &StorageGraph, secret: &UserSecret) -> Result<QueryMatrix, PirError> {
    check_two_uniform(g)?;
    secret.validate(g)?;
    let mut m = signed_incidence(g, secret.phi, secret.h)?;
    for j in 0..g.servers() {
        for i in 0..g.files() {
            m[(j, i)] = secret.gamma[j] * m[(j, i)] * secret.alpha[i];
        }
    }
    Ok(QueryMatrix { matrix: m })
}

pub fn gen_queries<R: Rng + ?Sized>(
    g: &StorageGraph,
    phi: usize,
    field: Field,
    rng: &mut R,
) -> Result<(QueryMatrix, UserSecret), PirError> {
    check_two_uniform(g)?;
    if phi >= g.files() {
        return Err(PirError::PhiOutOfRange { phi, files: g.files() });
    }
    let secret = UserSecret::sample(g.files(), g.servers(), phi, field, rng);
    let q = query_matrix(g, &secret)?;
    Ok((q, secret))
}

/// `Σ c · x_i` over the requested files.
pub fn answer(contents: &ServerContents, coefficients: &[(usize, Fp)]) -> Result<Vec<Fp>, PirError> {
    let mut acc = contents.field.zeros(contents.symbol_len);
    for &(file, c) in coefficients {
        let x = contents.holdings.get(&file).ok_or(PirError::Unheld { server: contents.server, file })?;
        axpy(&mut acc, c, x);
    }
    Ok(acc)
}

/// `Σ_j γ_j⁻¹ a_j / ((h - 1) α_φ)`.
pub fn reconstruct(answers: &[Vec<Fp>], secret: &UserSecret) -> Result<Vec<Fp>, PirError> {
    if answers.len() != secret.gamma.len() {
        return Err(PirError::AnswerCount { expected: secret.gamma.len(), got: answers.len() });
    }
    let field = secret.h.field();
    let f = answers.first().map_or(0, Vec::len);
    let mut acc = field.zeros(f);
    for (a, &g) in answers.iter().zip(&secret.gamma) {
        if a.len() != f {
            return Err(PirError::AnswerLength { expected: f, got: a.len() });
        }
        let inv = g.inv().map_err(|_| PirError::BadSecret("gamma has a zero entry".into()))?;
        axpy(&mut acc, inv, a);
    }
    let scale = ((secret.h - field.one()) * secret.alpha[secret.phi])
        .inv()
        .map_err(|_| PirError::BadSecret("(h - 1) alpha_phi is zero".into()))?;
    Ok(acc.into_iter().map(|x| x * scale).collect())
}

/// Runs the whole protocol in process against freshly dispersed storage.
pub fn retrieve<R: Rng + ?Sized>(
    g: &StorageGraph,
    data: &Dataset,
    phi: usize,
    rng: &mut R,
) -> Result<Retrieval, PirError> {
    let servers = disperse(g, data)?;
    let (query, secret) = gen_queries(g, phi, data.field(), rng)?;
    let queries = query.server_queries(g);
    let answers = queries
        .iter()
        .map(|sq| answer(&servers[sq.server], &sq.coefficients))
        .collect::<Result<Vec<_>, _>>()?;
    let value = reconstruct(&answers, &secret)?;
    let upload = queries.iter().map(|sq| sq.coefficients.len()).sum();
    let download = answers.iter().map(Vec::len).sum();
    Ok(Retrieval { value, secret, query, transcript: Transcript { queries, answers, upload, download } })
}
