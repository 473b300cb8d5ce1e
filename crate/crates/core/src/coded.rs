//! PIR over MDS-coded storage.
//!
//! Each file is cut into `K` chunks and encoded with a `K x N` generator;
//! codeword symbol `m` of every file lives on exactly one server of part
//! `L_m` of a server partition. A retrieval runs in rounds. In round `i`
//! the coefficients of the wanted files at the positions `J^(i)` are
//! multiplied by `h`, so the per-part aggregates form a codeword plus a
//! known-position error; erasure decoding from the other `K` positions
//! exposes the wanted codeword symbols.

use std::collections::BTreeSet;

use num_rational::Ratio;
use rand::Rng;
use thiserror::Error;

use crate::field::{axpy, Field, Fp};
use crate::graphs::StorageGraph;
use crate::linalg::Matrix;
use crate::pir2::{answer, PirError, ServerQuery};
use crate::storage::{Dataset, ServerContents, StorageError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodedError {
    #[error("invalid code: {0}")]
    InvalidCode(String),
    #[error("a length-{length} Reed-Solomon code needs q >= {length}, got q = {q}")]
    FieldTooSmall { q: u64, length: usize },
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("invalid assignment: {0}")]
    Assignment(String),
    #[error("file length {f} is not divisible by K = {k}")]
    Indivisible { f: usize, k: usize },
    #[error("file {0} requested twice in one batch")]
    RepeatedPhi(usize),
    #[error("a batch holds {expected} files, got {got}")]
    BatchSize { expected: usize, got: usize },
    #[error("file index {phi} is out of range for {files} files")]
    PhiOutOfRange { phi: usize, files: usize },
    #[error("inconsistent transcript: {0}")]
    Transcript(String),
    #[error(transparent)]
    Pir(#[from] PirError),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

/// An `[N, K]` MDS code given by a `K x N` generator matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdsCode {
    generator: Matrix,
}

impl MdsCode {
    /// Accepts a generator only if every `K x K` column selection is
    /// invertible.
    pub fn from_generator(generator: Matrix) -> Result<Self, CodedError> {
        let (k, n) = (generator.rows(), generator.cols());
        if k == 0 || k >= n {
            return Err(CodedError::InvalidCode(format!("need 1 <= K < N, got K = {k}, N = {n}")));
        }
        let rows: Vec<usize> = (0..k).collect();
        for cols in subsets(n, k) {
            if generator.submatrix(&rows, &cols).rank() < k {
                return Err(CodedError::InvalidCode(format!(
                    "columns {cols:?} of the generator are dependent"
                )));
            }
        }
        Ok(MdsCode { generator })
    }

    /// Reed-Solomon code evaluated at `0, 1, .., N - 1`: `G[k][j] = j^k`.
    pub fn reed_solomon(n: usize, k: usize, field: Field) -> Result<Self, CodedError> {
        if k == 0 || k >= n {
            return Err(CodedError::InvalidCode(format!("need 1 <= K < N, got K = {k}, N = {n}")));
        }
        if (field.modulus() as u128) < n as u128 {
            return Err(CodedError::FieldTooSmall { q: field.modulus(), length: n });
        }
        let rows = (0..k)
            .map(|e| (0..n).map(|j| field.elem(j as u64).pow(e as u64)).collect())
            .collect();
        let generator = Matrix::from_rows(field, rows);
        if n <= 12 {
            MdsCode::from_generator(generator)
        } else {
            Ok(MdsCode { generator })
        }
    }

    /// `[I_K | 1]`: `K` data symbols and their sum.
    pub fn parity(k: usize, field: Field) -> Self {
        assert!(k >= 1, "parity code needs K >= 1");
        let rows = (0..k)
            .map(|r| (0..=k).map(|c| if c == r || c == k { field.one() } else { field.zero() }).collect())
            .collect();
        MdsCode { generator: Matrix::from_rows(field, rows) }
    }

    /// `{(x, -x)}`, the code underlying 2-replication.
    pub fn negated_repetition(field: Field) -> Self {
        MdsCode { generator: Matrix::from_rows(field, vec![vec![field.one(), -field.one()]]) }
    }

    pub fn length(&self) -> usize {
        self.generator.cols()
    }

    pub fn dimension(&self) -> usize {
        self.generator.rows()
    }

    pub fn field(&self) -> Field {
        self.generator.field()
    }

    pub fn generator(&self) -> &Matrix {
        &self.generator
    }

    /// Encodes `K` message symbols into `N` codeword symbols.
    pub fn encode(&self, message: &[Fp]) -> Vec<Fp> {
        self.generator.left_mul(message)
    }

    /// Recovers the message from the codeword symbols at `positions`
    /// (exactly `K` of them).
    pub fn decode(&self, positions: &[usize], symbols: &[Fp]) -> Result<Vec<Fp>, CodedError> {
        Ok(self.decoder(positions)?.left_mul(symbols))
    }

    /// Inverse of the generator restricted to `positions`.
    fn decoder(&self, positions: &[usize]) -> Result<Matrix, CodedError> {
        let k = self.dimension();
        if positions.len() != k {
            return Err(CodedError::Transcript(format!("need {k} positions, got {}", positions.len())));
        }
        let rows: Vec<usize> = (0..k).collect();
        self.generator
            .submatrix(&rows, positions)
            .inverse()
            .ok_or_else(|| CodedError::Transcript(format!("positions {positions:?} are not an information set")))
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Disjoint nonempty server sets `L_1..L_N` covering all servers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    parts: Vec<Vec<usize>>,
    part_of: Vec<usize>,
}

impl Partition {
    pub fn new(servers: usize, parts: Vec<Vec<usize>>) -> Result<Self, CodedError> {
        let mut part_of = vec![usize::MAX; servers];
        let mut parts = parts;
        for (m, part) in parts.iter_mut().enumerate() {
            if part.is_empty() {
                return Err(CodedError::Partition(format!("part {} is empty", m + 1)));
            }
            part.sort_unstable();
            for &v in part.iter() {
                if v >= servers {
                    return Err(CodedError::Partition(format!("server {} does not exist", v + 1)));
                }
                if part_of[v] != usize::MAX {
                    return Err(CodedError::Partition(format!("server {} appears twice", v + 1)));
                }
                part_of[v] = m;
            }
        }
        if let Some(v) = part_of.iter().position(|&p| p == usize::MAX) {
            return Err(CodedError::Partition(format!("server {} is in no part", v + 1)));
        }
        Ok(Partition { parts, part_of })
    }

    /// `N` consecutive blocks of `s / N` servers.
    pub fn contiguous(servers: usize, n: usize) -> Result<Self, CodedError> {
        if n == 0 || !servers.is_multiple_of(n) {
            return Err(CodedError::Partition(format!("{servers} servers do not split into {n} equal parts")));
        }
        let w = servers / n;
        Partition::new(servers, (0..n).map(|m| (m * w..(m + 1) * w).collect()).collect())
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    pub fn part(&self, m: usize) -> &[usize] {
        &self.parts[m]
    }

    pub fn part_of(&self, server: usize) -> usize {
        self.part_of[server]
    }

    pub fn servers(&self) -> usize {
        self.part_of.len()
    }
}

/// Which codeword positions of which batch slot are exposed in each round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundPlan {
    length: usize,
    dimension: usize,
    /// `sets[i][j]` is `J^(i, j)`, 0-based and sorted.
    sets: Vec<Vec<Vec<usize>>>,
}

impl RoundPlan {
    pub fn rounds(&self) -> usize {
        self.sets.len()
    }

    pub fn batch(&self) -> usize {
        self.sets[0].len()
    }

    pub fn set(&self, round: usize, slot: usize) -> &[usize] {
        &self.sets[round][slot]
    }

    /// `J^(i)`: every position exposed in round `i`.
    pub fn round_positions(&self, round: usize) -> Vec<usize> {
        let mut all: Vec<usize> = self.sets[round].iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    /// Positions of slot `j` gathered over all rounds.
    pub fn slot_positions(&self, slot: usize) -> Vec<usize> {
        let mut all: Vec<usize> = self.sets.iter().flat_map(|r| r[slot].iter().copied()).collect();
        all.sort_unstable();
        all
    }

    /// Checks disjointness within rounds, `|J^(i)| = N - K`, `K` distinct
    /// positions per slot, and `K b = r (N - K)`.
    pub fn validate(&self) -> Result<(), String> {
        let (n, k) = (self.length, self.dimension);
        if k * self.batch() != self.rounds() * (n - k) {
            return Err("K b differs from r (N - K)".into());
        }
        for i in 0..self.rounds() {
            let pos = self.round_positions(i);
            if pos.len() != n - k || pos.iter().collect::<BTreeSet<_>>().len() != pos.len() {
                return Err(format!("round {} does not expose N - K distinct positions", i + 1));
            }
            if pos.iter().any(|&p| p >= n) {
                return Err(format!("round {} uses a position beyond N", i + 1));
            }
        }
        for j in 0..self.batch() {
            let pos = self.slot_positions(j);
            if pos.len() != k || pos.iter().collect::<BTreeSet<_>>().len() != k {
                return Err(format!("slot {} does not collect K distinct positions", j + 1));
            }
        }
        Ok(())
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Rounds `r = lcm(K, N-K) / (N-K)` and batch `b = lcm(K, N-K) / K`.
///
/// The `r x b` grid is filled row-major with `K` consecutive tokens per
/// slot and `N - K` tokens per round; token `t` lands on position
/// `t mod max(K, N - K)`, so each round and each slot sees distinct
/// positions.
pub fn plan_rounds(n: usize, k: usize) -> RoundPlan {
    assert!(k >= 1 && k < n, "need 1 <= K < N");
    let redundancy = n - k;
    let lcm = k / gcd(k, redundancy) * redundancy;
    let (rounds, batch) = (lcm / redundancy, lcm / k);
    let width = k.max(redundancy);
    let mut sets = vec![vec![Vec::new(); batch]; rounds];
    for t in 0..lcm {
        sets[t / redundancy][t / k].push(t % width);
    }
    for round in &mut sets {
        for s in round.iter_mut() {
            s.sort_unstable();
        }
    }
    RoundPlan { length: n, dimension: k, sets }
}

/// A symbol placement: `assignment[i][m]` is the server of `L_m` storing
/// codeword symbol `m` of file `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedLayout {
    pub partition: Partition,
    pub assignment: Vec<Vec<usize>>,
}

impl CodedLayout {
    pub fn new(partition: Partition, assignment: Vec<Vec<usize>>) -> Result<Self, CodedError> {
        let n = partition.parts().len();
        for (i, row) in assignment.iter().enumerate() {
            if row.len() != n {
                return Err(CodedError::Assignment(format!(
                    "file {} places {} symbols, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            for (m, &v) in row.iter().enumerate() {
                if v >= partition.servers() || partition.part_of(v) != m {
                    return Err(CodedError::Assignment(format!(
                        "symbol {} of file {} is on server {}, outside part {}",
                        m + 1,
                        i + 1,
                        v + 1,
                        m + 1
                    )));
                }
            }
        }
        Ok(CodedLayout { partition, assignment })
    }

    /// The `N`-uniform hypergraph whose edge `i` holds the servers storing a
    /// symbol of file `i`.
    pub fn graph(&self) -> StorageGraph {
        StorageGraph::new(self.partition.servers(), self.assignment.clone())
            .expect("partition parts are disjoint")
    }

    pub fn files(&self) -> usize {
        self.assignment.len()
    }

    /// Three parts of `s / 3` servers; file `(k, i)` takes server `i` of the
    /// first part, `k` of the second and `(i + k) mod (s / 3)` of the third.
    /// The pairs used with a fixed first-part server form one of `s / 3`
    /// edge-disjoint perfect matchings between the other two parts, so any
    /// two files share at most one server. `s = 12` yields 16 files.
    pub fn cyclic_matching(servers: usize) -> Result<Self, CodedError> {
        if servers == 0 || !servers.is_multiple_of(3) {
            return Err(CodedError::Partition(format!("{servers} servers is not a positive multiple of 3")));
        }
        let w = servers / 3;
        let partition = Partition::contiguous(servers, 3)?;
        let assignment = (0..w)
            .flat_map(|k| (0..w).map(move |i| vec![i, w + k, 2 * w + (i + k) % w]))
            .collect();
        CodedLayout::new(partition, assignment)
    }
}

/// A coded storage system holding a dataset.
#[derive(Debug, Clone)]
pub struct CodedSystem {
    pub code: MdsCode,
    pub layout: CodedLayout,
    pub graph: StorageGraph,
    pub servers: Vec<ServerContents>,
    pub file_len: usize,
}

impl CodedSystem {
    pub fn files(&self) -> usize {
        self.layout.files()
    }

    pub fn symbol_len(&self) -> usize {
        self.file_len / self.code.dimension()
    }

    pub fn stored_symbols(&self) -> usize {
        self.servers.iter().map(ServerContents::stored_symbols).sum()
    }

    /// Stored symbols per dataset symbol: `N / K`.
    pub fn storage_overhead(&self) -> Ratio<u64> {
        Ratio::new(self.stored_symbols() as u64, (self.files() * self.file_len) as u64)
    }
}

/// Codeword symbols of one file: entry `m` is `y_m`, of length `f / K`.
/// Chunk `k` of the file is symbols `k f/K .. (k+1) f/K`.
pub fn encode_file(code: &MdsCode, file: &[Fp]) -> Vec<Vec<Fp>> {
    let k = code.dimension();
    let w = file.len() / k;
    let mut out = vec![Vec::with_capacity(w); code.length()];
    for row in 0..w {
        let msg: Vec<Fp> = (0..k).map(|c| file[c * w + row]).collect();
        for (m, y) in code.encode(&msg).into_iter().enumerate() {
            out[m].push(y);
        }
    }
    out
}

/// Inverse of [`encode_file`] from `K` symbols at the given positions.
pub fn decode_file(code: &MdsCode, positions: &[usize], symbols: &[Vec<Fp>]) -> Result<Vec<Fp>, CodedError> {
    let k = code.dimension();
    let dec = code.decoder(positions)?;
    let w = symbols.first().map_or(0, Vec::len);
    let mut file = code.field().zeros(w * k);
    for row in 0..w {
        let received: Vec<Fp> = symbols.iter().map(|s| s[row]).collect();
        for (c, x) in dec.left_mul(&received).into_iter().enumerate() {
            file[c * w + row] = x;
        }
    }
    Ok(file)
}

pub fn encode_and_disperse(data: &Dataset, code: &MdsCode, layout: &CodedLayout) -> Result<CodedSystem, CodedError> {
    let (k, n) = (code.dimension(), code.length());
    if data.field() != code.field() {
        return Err(CodedError::InvalidCode("code and dataset use different fields".into()));
    }
    if layout.partition.parts().len() != n {
        return Err(CodedError::Partition(format!(
            "{} parts for a length-{n} code",
            layout.partition.parts().len()
        )));
    }
    if layout.files() != data.files() {
        return Err(StorageError::FileCountMismatch { graph: layout.files(), dataset: data.files() }.into());
    }
    if !data.file_len().is_multiple_of(k) {
        return Err(CodedError::Indivisible { f: data.file_len(), k });
    }
    let w = data.file_len() / k;
    let mut servers: Vec<ServerContents> = (0..layout.partition.servers())
        .map(|j| ServerContents::empty(j, data.field(), w))
        .collect();
    for (i, row) in layout.assignment.iter().enumerate() {
        for (m, y) in encode_file(code, data.file(i)).into_iter().enumerate() {
            servers[row[m]].holdings.insert(i, y);
        }
    }
    Ok(CodedSystem {
        code: code.clone(),
        layout: layout.clone(),
        graph: layout.graph(),
        servers,
        file_len: data.file_len(),
    })
}

/// Randomness for one round. `phis[j]` is the file in batch slot `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedSecret {
    pub alpha: Vec<Fp>,
    pub gamma: Vec<Fp>,
    pub h: Fp,
    pub phis: Vec<usize>,
}

impl CodedSecret {
    pub fn sample<R: Rng + ?Sized>(files: usize, servers: usize, phis: &[usize], field: Field, rng: &mut R) -> Self {
        CodedSecret {
            alpha: (0..files).map(|_| field.sample_nonzero(rng)).collect(),
            gamma: (0..servers).map(|_| field.sample_nonzero(rng)).collect(),
            h: field.sample_h(rng),
            phis: phis.to_vec(),
        }
    }

    /// Whether position `m` of file `t` carries `h` in `round`.
    pub fn delta(&self, plan: &RoundPlan, round: usize, t: usize, m: usize) -> bool {
        self.phis.iter().enumerate().any(|(j, &phi)| phi == t && plan.set(round, j).contains(&m))
    }
}

/// Whether secrets are redrawn for every round or drawn once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SecretMode {
    #[default]
    FreshPerRound,
    Reuse,
}

pub(crate) fn check_batch(files: usize, plan: &RoundPlan, phis: &[usize]) -> Result<(), CodedError> {
    if phis.len() != plan.batch() {
        return Err(CodedError::BatchSize { expected: plan.batch(), got: phis.len() });
    }
    let mut seen = BTreeSet::new();
    for &phi in phis {
        if phi >= files {
            return Err(CodedError::PhiOutOfRange { phi, files });
        }
        if !seen.insert(phi) {
            return Err(CodedError::RepeatedPhi(phi));
        }
    }
    Ok(())
}

/// Server `j` in `L_m` gets `γ_j α_t h^δ(t, m)` for every file `t` it holds a
/// symbol of.
pub fn coded_queries(layout: &CodedLayout, plan: &RoundPlan, round: usize, secret: &CodedSecret) -> Vec<ServerQuery> {
    let mut queries: Vec<ServerQuery> =
        (0..layout.partition.servers()).map(|server| ServerQuery { server, coefficients: Vec::new() }).collect();
    for (t, row) in layout.assignment.iter().enumerate() {
        for (m, &j) in row.iter().enumerate() {
            let mut c = secret.gamma[j] * secret.alpha[t];
            if secret.delta(plan, round, t, m) {
                c *= secret.h;
            }
            queries[j].coefficients.push((t, c));
        }
    }
    queries
}

/// Queries and answers of one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedRound {
    pub queries: Vec<ServerQuery>,
    pub answers: Vec<Vec<Fp>>,
}

pub fn coded_round(
    system: &CodedSystem,
    plan: &RoundPlan,
    round: usize,
    secret: &CodedSecret,
) -> Result<CodedRound, CodedError> {
    check_batch(system.files(), plan, &secret.phis)?;
    let queries = coded_queries(&system.layout, plan, round, secret);
    let answers = queries
        .iter()
        .map(|q| answer(&system.servers[q.server], &q.coefficients))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CodedRound { queries, answers })
}

/// Recovers the `b` files of the batch from all rounds' answers.
pub fn coded_reconstruct(
    code: &MdsCode,
    partition: &Partition,
    plan: &RoundPlan,
    answers: &[Vec<Vec<Fp>>],
    secrets: &[CodedSecret],
) -> Result<Vec<Vec<Fp>>, CodedError> {
    let (n, field) = (code.length(), code.field());
    if answers.len() != plan.rounds() || secrets.len() != plan.rounds() {
        return Err(CodedError::Transcript(format!(
            "{} rounds planned, got {} answer sets and {} secrets",
            plan.rounds(),
            answers.len(),
            secrets.len()
        )));
    }
    let batch = plan.batch();
    // recovered[j][m] is y_{φ_j, m} once known.
    let mut recovered: Vec<Vec<Option<Vec<Fp>>>> = vec![vec![None; n]; batch];
    let w = answers.first().and_then(|a| a.first()).map_or(0, Vec::len);
    for (round, (ans, secret)) in answers.iter().zip(secrets).enumerate() {
        if ans.len() != partition.servers() {
            return Err(CodedError::Transcript(format!(
                "round {} has {} answers for {} servers",
                round + 1,
                ans.len(),
                partition.servers()
            )));
        }
        let mut observed = vec![field.zeros(w); n];
        for (j, a) in ans.iter().enumerate() {
            if a.len() != w {
                return Err(CodedError::Transcript("answers differ in length".into()));
            }
            let g = secret.gamma[j].inv().map_err(|_| CodedError::Transcript("zero gamma".into()))?;
            axpy(&mut observed[partition.part_of(j)], g, a);
        }
        let exposed = plan.round_positions(round);
        let intact: Vec<usize> = (0..n).filter(|m| !exposed.contains(m)).collect();
        let intact_symbols: Vec<Vec<Fp>> = intact.iter().map(|&m| observed[m].clone()).collect();
        let message = decode_file(code, &intact, &intact_symbols)?;
        let clean = encode_file(code, &message);
        for j in 0..batch {
            let scale = ((secret.h - field.one()) * secret.alpha[secret.phis[j]])
                .inv()
                .map_err(|_| CodedError::Transcript("degenerate secret".into()))?;
            for &m in plan.set(round, j) {
                let y = observed[m].iter().zip(&clean[m]).map(|(&o, &c)| (o - c) * scale).collect();
                recovered[j][m] = Some(y);
            }
        }
    }
    (0..batch)
        .map(|j| {
            let positions = plan.slot_positions(j);
            let symbols = positions
                .iter()
                .map(|&m| recovered[j][m].clone().ok_or_else(|| CodedError::Transcript("missing symbol".into())))
                .collect::<Result<Vec<_>, _>>()?;
            decode_file(code, &positions, &symbols)
        })
        .collect()
}

/// A complete multi-round retrieval with its accounting.
#[derive(Debug, Clone)]
pub struct CodedRetrieval {
    pub files: Vec<Vec<Fp>>,
    pub rounds: Vec<CodedRound>,
    pub secrets: Vec<CodedSecret>,
    pub upload: usize,
    pub download: usize,
}

impl CodedRetrieval {
    /// Retrieved symbols per downloaded symbol.
    pub fn rate(&self, file_len: usize) -> Ratio<u64> {
        Ratio::new((self.files.len() * file_len) as u64, self.download as u64)
    }
}

pub fn coded_retrieve<R: Rng + ?Sized>(
    system: &CodedSystem,
    phis: &[usize],
    mode: SecretMode,
    rng: &mut R,
) -> Result<CodedRetrieval, CodedError> {
    let plan = plan_rounds(system.code.length(), system.code.dimension());
    check_batch(system.files(), &plan, phis)?;
    let field = system.code.field();
    let s = system.layout.partition.servers();
    let mut secrets = Vec::with_capacity(plan.rounds());
    let mut rounds = Vec::with_capacity(plan.rounds());
    for round in 0..plan.rounds() {
        let secret = match (mode, secrets.last()) {
            (SecretMode::Reuse, Some(prev)) => CodedSecret::clone(prev),
            _ => CodedSecret::sample(system.files(), s, phis, field, rng),
        };
        rounds.push(coded_round(system, &plan, round, &secret)?);
        secrets.push(secret);
    }
    let answers: Vec<Vec<Vec<Fp>>> = rounds.iter().map(|r| r.answers.clone()).collect();
    let files = coded_reconstruct(&system.code, &system.layout.partition, &plan, &answers, &secrets)?;
    let upload = rounds.iter().flat_map(|r| &r.queries).map(|q| q.coefficients.len()).sum();
    let download = rounds.iter().flat_map(|r| &r.answers).map(Vec::len).sum();
    Ok(CodedRetrieval { files, rounds, secrets, upload, download })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::random_dataset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_based(sets: &[usize]) -> Vec<usize> {
        sets.iter().map(|p| p + 1).collect()
    }

    #[test]
    fn code_constructors() {
        let f5 = Field::new(5).unwrap();
        let rs = MdsCode::reed_solomon(4, 2, f5).unwrap();
        let rows: Vec<usize> = vec![0, 1];
        for cols in subsets(4, 2) {
            assert_eq!(rs.generator().submatrix(&rows, &cols).rank(), 2);
        }
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(
            MdsCode::reed_solomon(6, 2, f5),
            Err(CodedError::FieldTooSmall { q: 5, length: 6 })
        );
        let parity = MdsCode::parity(2, f5);
        assert_eq!(parity.encode(&[f5.elem(2), f5.elem(4)]), vec![f5.elem(2), f5.elem(4), f5.elem(1)]);
        assert!(MdsCode::from_generator(parity.generator().clone()).is_ok());
        let neg = MdsCode::negated_repetition(f5);
        assert_eq!(neg.encode(&[f5.elem(3)]), vec![f5.elem(3), f5.elem(2)]);
        let bad = Matrix::from_u64(f5, &[vec![1, 0, 1], vec![0, 0, 1]]);
        assert!(matches!(MdsCode::from_generator(bad), Err(CodedError::InvalidCode(_))));
    }

    #[test]
    fn plans_reproduce_worked_examples() {
        // N - K = 4, K = 6.
        let p = plan_rounds(10, 6);
        assert_eq!((p.rounds(), p.batch()), (3, 2));
        assert_eq!(one_based(p.set(0, 0)), vec![1, 2, 3, 4]);
        assert_eq!(one_based(p.set(1, 0)), vec![5, 6]);
        assert_eq!(one_based(p.set(1, 1)), vec![1, 2]);
        assert_eq!(one_based(p.set(2, 1)), vec![3, 4, 5, 6]);
        assert!(p.set(0, 1).is_empty() && p.set(2, 0).is_empty());
        // N - K = 6, K = 4.
        let p = plan_rounds(10, 4);
        assert_eq!((p.rounds(), p.batch()), (2, 3));
        assert_eq!(one_based(p.set(0, 0)), vec![1, 2, 3, 4]);
        assert_eq!(one_based(p.set(0, 1)), vec![5, 6]);
        assert_eq!(one_based(p.set(1, 1)), vec![1, 2]);
        assert_eq!(one_based(p.set(1, 2)), vec![3, 4, 5, 6]);
        // Parity code.
        let p = plan_rounds(3, 2);
        assert_eq!((p.rounds(), p.batch()), (2, 1));
        assert_eq!(one_based(p.set(0, 0)), vec![1]);
        assert_eq!(one_based(p.set(1, 0)), vec![2]);
    }

    #[test]
    fn plans_are_valid_up_to_twelve() {
        for n in 2..=12 {
            for k in 1..n {
                plan_rounds(n, k).validate().unwrap_or_else(|e| panic!("N={n} K={k}: {e}"));
            }
        }
    }

    #[test]
    fn cyclic_matching_matches_listed_layout() {
        let layout = CodedLayout::cyclic_matching(12).unwrap();
        assert_eq!(layout.files(), 16);
        let listed = [
            [1, 5, 9], [2, 5, 10], [3, 5, 11], [4, 5, 12],
            [1, 6, 10], [2, 6, 11], [3, 6, 12], [4, 6, 9],
            [1, 7, 11], [2, 7, 12], [3, 7, 9], [4, 7, 10],
            [1, 8, 12], [2, 8, 9], [3, 8, 10], [4, 8, 11],
        ];
        for (row, want) in layout.assignment.iter().zip(listed) {
            assert_eq!(one_based(row), want.to_vec());
        }
        let g = layout.graph();
        for a in 0..16 {
            for b in a + 1..16 {
                let shared = g.edge(a).iter().filter(|v| g.edge(b).contains(v)).count();
                assert!(shared <= 1);
            }
        }
        for s in [3, 6, 9, 15] {
            assert_eq!(CodedLayout::cyclic_matching(s).unwrap().files(), s * s / 9);
            assert!(!CodedLayout::cyclic_matching(s).unwrap().graph().shares_multiple_files());
        }
        assert!(CodedLayout::cyclic_matching(10).is_err());
    }

    #[test]
    fn layout_validation() {
        let part = Partition::contiguous(6, 3).unwrap();
        assert!(CodedLayout::new(part.clone(), vec![vec![0, 2, 4]]).is_ok());
        assert!(matches!(CodedLayout::new(part.clone(), vec![vec![0, 1, 4]]), Err(CodedError::Assignment(_))));
        assert!(matches!(CodedLayout::new(part, vec![vec![0, 2]]), Err(CodedError::Assignment(_))));
        assert!(Partition::new(3, vec![vec![0], vec![0, 1], vec![2]]).is_err());
        assert!(Partition::new(3, vec![vec![0], vec![1]]).is_err());
        assert!(Partition::new(3, vec![vec![0, 1, 2], vec![]]).is_err());
    }

    #[test]
    fn encode_decode_roundtrip() {
        let f7 = Field::new(7).unwrap();
        let code = MdsCode::reed_solomon(5, 3, f7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let file: Vec<Fp> = (0..6).map(|_| f7.sample(&mut rng)).collect();
        let symbols = encode_file(&code, &file);
        for pos in subsets(5, 3) {
            let chosen: Vec<Vec<Fp>> = pos.iter().map(|&m| symbols[m].clone()).collect();
            assert_eq!(decode_file(&code, &pos, &chosen).unwrap(), file);
        }
    }

    #[test]
    fn listed_layout_rate_and_overhead() {
        let f5 = Field::new(5).unwrap();
        let code = MdsCode::parity(2, f5);
        let layout = CodedLayout::cyclic_matching(12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = random_dataset(16, 4, f5, &mut rng);
        let system = encode_and_disperse(&data, &code, &layout).unwrap();
        assert_eq!(system.storage_overhead(), Ratio::new(3, 2));
        for phi in 0..16 {
            let r = coded_retrieve(&system, &[phi], SecretMode::FreshPerRound, &mut rng).unwrap();
            assert_eq!(r.files, vec![data.file(phi).to_vec()]);
            assert_eq!(r.rate(4), Ratio::new(1, 12));
        }
        assert_eq!(
            coded_retrieve(&system, &[1, 2], SecretMode::FreshPerRound, &mut rng).unwrap_err(),
            CodedError::BatchSize { expected: 1, got: 2 }
        );
        let odd = random_dataset(16, 3, f5, &mut rng);
        assert_eq!(encode_and_disperse(&odd, &code, &layout).unwrap_err(), CodedError::Indivisible { f: 3, k: 2 });
    }

    #[test]
    fn repetition_codes_behave_like_two_replication() {
        let f7 = Field::new(7).unwrap();
        let part = Partition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let layout = CodedLayout::new(part, vec![vec![0, 2], vec![0, 3], vec![1, 3]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = random_dataset(3, 2, f7, &mut rng);
        for code in [MdsCode::negated_repetition(f7), MdsCode::reed_solomon(2, 1, f7).unwrap()] {
            let system = encode_and_disperse(&data, &code, &layout).unwrap();
            for (j, s) in system.servers.iter().enumerate() {
                assert_eq!(s.holdings.len(), system.graph.degree(j));
            }
            for phi in 0..3 {
                let r = coded_retrieve(&system, &[phi], SecretMode::FreshPerRound, &mut rng).unwrap();
                assert_eq!(r.files[0], data.file(phi));
                assert_eq!(r.rate(2), Ratio::new(1, 4));
            }
        }
    }

    #[test]
    fn multi_round_batches_roundtrip() {
        let f13 = Field::new(13).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (n, k) in [(3, 2), (3, 1), (4, 1), (5, 2), (5, 3), (6, 4)] {
            let code = MdsCode::reed_solomon(n, k, f13).unwrap();
            let s = 2 * n;
            let part = Partition::contiguous(s, n).unwrap();
            let files = 6;
            let assignment =
                (0..files).map(|i| (0..n).map(|m| 2 * m + (i + m) % 2).collect()).collect();
            let layout = CodedLayout::new(part, assignment).unwrap();
            let data = random_dataset(files, 2 * k, f13, &mut rng);
            let system = encode_and_disperse(&data, &code, &layout).unwrap();
            let plan = plan_rounds(n, k);
            let phis: Vec<usize> = (0..plan.batch()).map(|j| (j * 2 + 1) % files).collect();
            for mode in [SecretMode::FreshPerRound, SecretMode::Reuse] {
                let r = coded_retrieve(&system, &phis, mode, &mut rng).unwrap();
                for (j, &phi) in phis.iter().enumerate() {
                    assert_eq!(r.files[j], data.file(phi), "N={n} K={k}");
                }
                assert_eq!(r.download, s * 2 * plan.rounds());
                assert_eq!(r.rate(2 * k), Ratio::new((n - k) as u64, s as u64));
            }
        }
    }

    #[test]
    fn query_supports_and_delta() {
        let f5 = Field::new(5).unwrap();
        let code = MdsCode::parity(2, f5);
        let layout = CodedLayout::cyclic_matching(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let data = random_dataset(4, 2, f5, &mut rng);
        let system = encode_and_disperse(&data, &code, &layout).unwrap();
        let plan = plan_rounds(3, 2);
        let secret = CodedSecret::sample(4, 6, &[2], f5, &mut rng);
        let round = coded_round(&system, &plan, 0, &secret).unwrap();
        for q in &round.queries {
            let files: Vec<usize> = q.coefficients.iter().map(|c| c.0).collect();
            assert_eq!(files, system.graph.incident_edges(q.server));
            assert!(q.coefficients.iter().all(|c| !c.1.is_zero()));
        }
        for t in 0..4 {
            for m in 0..3 {
                assert_eq!(secret.delta(&plan, 0, t, m), t == 2 && m == 0);
            }
        }
        let twice = CodedSecret { phis: vec![2, 2], ..secret };
        let plan2 = RoundPlan { length: 3, dimension: 2, sets: vec![vec![vec![0], vec![1]]] };
        assert_eq!(coded_round(&system, &plan2, 0, &twice).unwrap_err(), CodedError::RepeatedPhi(2));
    }
}
