//! The colluding servers' view of the protocols and exact privacy checks.
//!
//! Every distribution here is computed by enumerating all of the relevant
//! randomness, so results are exact rationals. Randomness that cannot
//! influence the entries being observed (the `α` of unseen files, the `γ` of
//! other servers, and `h` when file `φ` is not observed) is left out of the
//! enumeration: it only multiplies every count by the same factor.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::Ratio;
use thiserror::Error;

use crate::coded::{CodedLayout, RoundPlan};
use crate::field::{Field, Fp};
use crate::graphs::{StorageGraph, Subgraph};
use crate::linalg::Matrix;
use crate::pir2::{check_two_uniform, PirError, QueryMatrix};
use crate::pir_r::{disperse_shares, ShareMatrix};

pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("enumeration needs {needed} tuples, above the budget of {budget}")]
    Budget { needed: u128, budget: u64 },
    #[error("the colluding set induces a cycle; use the rank attack instead")]
    Cyclic,
    #[error("the colluding set contains a polychromatic cycle")]
    Polychromatic,
    #[error("invalid colluding set: {0}")]
    InvalidSet(String),
    #[error(transparent)]
    Pir(#[from] PirError),
}

/// The verdict on one cycle of the colluders' induced subgraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleVerdict {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub rank: usize,
    /// Full rank, which happens exactly when the cycle carries file `φ`.
    pub contains_phi: bool,
}

/// What a colluding set learns from its queries.
#[derive(Debug, Clone, PartialEq)]
pub struct CollusionReport {
    pub colluders: Vec<usize>,
    pub files: usize,
    pub induced_edges: Vec<usize>,
    pub cycles: Vec<CycleVerdict>,
    /// Files still consistent with the observation, `T(S, φ)`.
    pub candidates: Vec<usize>,
    pub leakage_bits: f64,
}

impl CollusionReport {
    pub fn acyclic(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn verdict(&self) -> &'static str {
        if self.acyclic() {
            "acyclic: perfect privacy"
        } else if self.candidates.len() == self.files {
            "cyclic: no leakage"
        } else {
            "cyclic: leaks information"
        }
    }

    /// `key=value` lines with 1-based indices.
    pub fn to_text(&self) -> String {
        let list = |xs: &[usize]| xs.iter().map(|x| (x + 1).to_string()).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        let _ = writeln!(out, "colluders={}", list(&self.colluders));
        let _ = writeln!(out, "files={}", self.files);
        let _ = writeln!(out, "induced_edges={}", list(&self.induced_edges));
        let _ = writeln!(out, "acyclic={}", self.acyclic());
        let _ = writeln!(out, "cycles={}", self.cycles.len());
        for (i, c) in self.cycles.iter().enumerate() {
            let k = i + 1;
            let _ = writeln!(out, "cycle.{k}.vertices={}", list(&c.vertices));
            let _ = writeln!(out, "cycle.{k}.edges={}", list(&c.edges));
            let _ = writeln!(out, "cycle.{k}.rank={}", c.rank);
            let _ = writeln!(out, "cycle.{k}.contains_phi={}", c.contains_phi);
        }
        let _ = writeln!(out, "candidates={}", list(&self.candidates));
        let _ = writeln!(out, "candidate_count={}", self.candidates.len());
        let _ = writeln!(out, "leakage_bits={:.6}", self.leakage_bits);
        let _ = writeln!(out, "verdict={}", self.verdict());
        out
    }
}

pub fn leakage_bits(files: usize, candidates: usize) -> f64 {
    (files as f64).log2() - (candidates as f64).log2()
}

fn sorted_set(g: &StorageGraph, set: &[usize]) -> Result<Vec<usize>, AnalysisError> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&v) = s.iter().find(|&&v| v >= g.servers()) {
        return Err(AnalysisError::InvalidSet(format!("server {} does not exist", v + 1)));
    }
    Ok(s)
}

/// Rows `S` and the columns of the files both of whose servers lie in `S`.
pub fn observe(q: &QueryMatrix, g: &StorageGraph, set: &[usize]) -> Result<Matrix, AnalysisError> {
    let s = sorted_set(g, set)?;
    let sub = g.induced(&s);
    Ok(q.matrix().submatrix(&sub.vertices, &sub.edges))
}

/// Tests every cycle of the induced subgraph for full rank and intersects
/// the results into the candidate set.
pub fn rank_attack(observed: &Matrix, g: &StorageGraph, set: &[usize]) -> Result<CollusionReport, AnalysisError> {
    check_two_uniform(g)?;
    let s = sorted_set(g, set)?;
    let sub = g.induced(&s);
    if observed.rows() != sub.vertices.len() || observed.cols() != sub.edges.len() {
        return Err(AnalysisError::InvalidSet("observation does not match the induced subgraph".into()));
    }
    let cycles: Vec<CycleVerdict> = sub
        .cycles(g)
        .into_iter()
        .map(|c| {
            let rows: Vec<usize> = {
                let mut r: Vec<usize> = c.vertices.iter().map(|v| sub.vertices.binary_search(v).unwrap()).collect();
                r.sort_unstable();
                r
            };
            let cols: Vec<usize> = c.edges.iter().map(|e| sub.edges.binary_search(e).unwrap()).collect();
            let rank = observed.submatrix(&rows, &cols).rank();
            CycleVerdict { contains_phi: rank == c.len(), rank, vertices: c.vertices, edges: c.edges }
        })
        .collect();
    let candidates = candidates_from_verdicts(g.files(), &cycles);
    Ok(CollusionReport {
        colluders: s,
        files: g.files(),
        induced_edges: sub.edges,
        leakage_bits: leakage_bits(g.files(), candidates.len()),
        cycles,
        candidates,
    })
}

/// `(∩ full-rank cycles) \ (∪ deficient cycles)`, the intersection over no
/// cycles being every file.
fn candidates_from_verdicts(files: usize, cycles: &[CycleVerdict]) -> Vec<usize> {
    let mut keep = vec![true; files];
    for c in cycles {
        if c.contains_phi {
            for (e, k) in keep.iter_mut().enumerate() {
                *k &= c.edges.contains(&e);
            }
        } else {
            for &e in &c.edges {
                keep[e] = false;
            }
        }
    }
    (0..files).filter(|&e| keep[e]).collect()
}

/// The candidate set predicted from the graph alone, assuming every cycle
/// through `φ` has full rank and every other cycle is rank deficient.
pub fn candidate_set(g: &StorageGraph, set: &[usize], phi: usize) -> Result<Vec<usize>, AnalysisError> {
    let s = sorted_set(g, set)?;
    let sub = g.induced(&s);
    let verdicts: Vec<CycleVerdict> = sub
        .cycles(g)
        .into_iter()
        .map(|c| CycleVerdict { contains_phi: c.contains_edge(phi), rank: 0, vertices: c.vertices, edges: c.edges })
        .collect();
    Ok(candidates_from_verdicts(g.files(), &verdicts))
}

/// Exact distribution of an observation, keyed by the observed entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryDistribution {
    counts: BTreeMap<Vec<u64>, u64>,
    total: u64,
}

impl QueryDistribution {
    fn new() -> Self {
        QueryDistribution { counts: BTreeMap::new(), total: 0 }
    }

    fn add(&mut self, key: Vec<u64>) {
        *self.counts.entry(key).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probability(&self, key: &[u64]) -> Ratio<u64> {
        Ratio::new(self.counts.get(key).copied().unwrap_or(0), self.total)
    }

    pub fn support(&self) -> impl Iterator<Item = &Vec<u64>> {
        self.counts.keys()
    }

    pub fn probabilities(&self) -> impl Iterator<Item = (&Vec<u64>, Ratio<u64>)> {
        self.counts.iter().map(|(k, &c)| (k, Ratio::new(c, self.total)))
    }

    /// The common probability if the distribution is uniform on its support.
    pub fn uniform_probability(&self) -> Option<Ratio<u64>> {
        let mut it = self.counts.values();
        let first = *it.next()?;
        it.all(|&c| c == first).then(|| Ratio::new(first, self.total))
    }

    /// Equality as probability distributions.
    pub fn same_as(&self, other: &QueryDistribution) -> bool {
        self.counts.len() == other.counts.len()
            && self.counts.iter().all(|(k, &c)| {
                other.counts.get(k).is_some_and(|&d| c as u128 * other.total as u128 == d as u128 * self.total as u128)
            })
    }
}

fn check_budget(needed: u128, budget: u64) -> Result<(), AnalysisError> {
    if needed > budget as u128 {
        return Err(AnalysisError::Budget { needed, budget });
    }
    Ok(())
}

fn pow_u128(base: u64, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base as u128))
}

/// Calls `f` with every vector in `values^len`.
fn for_each_tuple<F: FnMut(&[Fp])>(values: &[Fp], len: usize, mut f: F) {
    if len == 0 {
        f(&[]);
        return;
    }
    if values.is_empty() {
        return;
    }
    let mut idx = vec![0usize; len];
    let mut cur = vec![values[0]; len];
    loop {
        f(&cur);
        let mut pos = 0;
        loop {
            if pos == len {
                return;
            }
            idx[pos] += 1;
            if idx[pos] < values.len() {
                cur[pos] = values[idx[pos]];
                break;
            }
            idx[pos] = 0;
            cur[pos] = values[0];
            pos += 1;
        }
    }
}

/// Incidence positions of `T` in column-major order: for each edge of `T`,
/// its servers in increasing order, as `(row, column)` in `T`'s coordinates.
fn incidence_positions(g: &StorageGraph, t: &Subgraph) -> Vec<(usize, usize)> {
    t.edges
        .iter()
        .enumerate()
        .flat_map(|(c, &e)| g.edge(e).iter().map(move |v| (t.vertices.binary_search(v).unwrap(), c)))
        .collect()
}

/// The exact distribution of `Q` restricted to the servers and files of `t`,
/// given `φ`. Keys list the entries at `t`'s incidences, edge by edge.
pub fn enumerate_distribution(
    g: &StorageGraph,
    t: &Subgraph,
    phi: usize,
    field: Field,
    budget: u64,
) -> Result<QueryDistribution, AnalysisError> {
    check_two_uniform(g)?;
    if phi >= g.files() {
        return Err(PirError::PhiOutOfRange { phi, files: g.files() }.into());
    }
    let q = field.modulus();
    let phi_col = t.edges.iter().position(|&e| e == phi);
    let h_values: Vec<Fp> = if phi_col.is_some() { field.h_values().collect() } else { vec![field.one()] };
    let (nv, ne) = (t.vertices.len(), t.edges.len());
    check_budget(pow_u128(q - 1, nv + ne).saturating_mul(h_values.len() as u128), budget)?;
    let positions = incidence_positions(g, t);
    let nonzero: Vec<Fp> = field.nonzero_elements().collect();
    let minus_one = -field.one();
    let mut dist = QueryDistribution::new();
    for &h in &h_values {
        // Sign pattern of I_φ at each incidence: the smaller server of each
        // file is first in `positions`.
        let signs: Vec<Fp> = positions
            .iter()
            .enumerate()
            .map(|(k, &(_, c))| {
                let first = k == 0 || positions[k - 1].1 != c;
                match (first, Some(c) == phi_col) {
                    (true, true) => h,
                    (true, false) => field.one(),
                    (false, _) => minus_one,
                }
            })
            .collect();
        for_each_tuple(&nonzero, nv, |gamma| {
            for_each_tuple(&nonzero, ne, |alpha| {
                let key = positions
                    .iter()
                    .zip(&signs)
                    .map(|(&(r, c), &sg)| (gamma[r] * sg * alpha[c]).value())
                    .collect();
                dist.add(key);
            });
        });
    }
    Ok(dist)
}

/// The closed-form probability of each matrix in the support of `Q^T | φ`:
/// `(q-1)^-(u-k)`, times `(q-2)^-1` when `φ` lies on a cycle of `T`, where
/// `u` counts incidences of `T` and `k` is its cyclomatic number.
pub fn closed_form_probability(g: &StorageGraph, t: &Subgraph, phi: usize, q: u64) -> Ratio<u128> {
    let u = t.incidences(g);
    let k = t.edges.len() + t.components(g) - t.vertices.len();
    let mut denom = pow_u128(q - 1, u - k);
    if t.cycles(g).iter().any(|c| c.contains_edge(phi)) {
        denom *= (q - 2) as u128;
    }
    Ratio::new(1, denom)
}

/// Outcome of checking the support and uniformity of `Q^T | φ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportCheck {
    pub support_matches: bool,
    pub uniform: bool,
    pub support_size: usize,
    pub expected_support_size: usize,
    pub probability: Option<Ratio<u64>>,
}

impl SupportCheck {
    pub fn holds(&self) -> bool {
        self.support_matches && self.uniform
    }
}

/// Compares the enumerated distribution of `Q^T | φ` with the set of
/// matrices supported on `T`'s incidences whose cycle submatrices have full
/// rank exactly on the cycles through `φ`, found by enumerating all such
/// matrices independently.
pub fn check_support(
    g: &StorageGraph,
    t: &Subgraph,
    phi: usize,
    field: Field,
    budget: u64,
) -> Result<SupportCheck, AnalysisError> {
    let dist = enumerate_distribution(g, t, phi, field, budget)?;
    let positions = incidence_positions(g, t);
    check_budget(pow_u128(field.modulus() - 1, positions.len()), budget)?;
    let cycles: Vec<(Vec<usize>, Vec<usize>, bool)> = t
        .cycles(g)
        .into_iter()
        .map(|c| {
            let mut rows: Vec<usize> = c.vertices.iter().map(|v| t.vertices.binary_search(v).unwrap()).collect();
            rows.sort_unstable();
            let cols = c.edges.iter().map(|e| t.edges.binary_search(e).unwrap()).collect();
            (rows, cols, c.contains_edge(phi))
        })
        .collect();
    let nonzero: Vec<Fp> = field.nonzero_elements().collect();
    let mut expected = 0usize;
    let mut all_present = true;
    for_each_tuple(&nonzero, positions.len(), |vals| {
        let mut a = Matrix::zeros(field, t.vertices.len(), t.edges.len());
        for (&(r, c), &v) in positions.iter().zip(vals) {
            a[(r, c)] = v;
        }
        let ok = cycles.iter().all(|(rows, cols, through_phi)| {
            let rank = a.submatrix(rows, cols).rank();
            rank == if *through_phi { cols.len() } else { cols.len() - 1 }
        });
        if ok {
            expected += 1;
            let key: Vec<u64> = vals.iter().map(|v| v.value()).collect();
            all_present &= dist.probability(&key) != Ratio::from_integer(0);
        }
    });
    Ok(SupportCheck {
        support_matches: all_present && expected == dist.support_size(),
        uniform: dist.uniform_probability().is_some(),
        support_size: dist.support_size(),
        expected_support_size: expected,
        probability: dist.uniform_probability(),
    })
}

/// Support and uniformity of `Q^T | φ`, as a single verdict.
pub fn verify_query_support(g: &StorageGraph, t: &Subgraph, phi: usize, field: Field, budget: u64) -> Result<bool, AnalysisError> {
    Ok(check_support(g, t, phi, field, budget)?.holds())
}

/// True iff the colluders' view has the same distribution for every file.
/// The set must induce an acyclic subgraph.
pub fn verify_acyclic_privacy(g: &StorageGraph, set: &[usize], field: Field, budget: u64) -> Result<bool, AnalysisError> {
    let s = sorted_set(g, set)?;
    let sub = g.induced(&s);
    if !sub.is_acyclic(g) {
        return Err(AnalysisError::Cyclic);
    }
    let first = enumerate_distribution(g, &sub, 0, field, budget)?;
    for phi in 1..g.files() {
        if !enumerate_distribution(g, &sub, phi, field, budget)?.same_as(&first) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True iff the colluders' view has the same distribution under `φ1` and
/// `φ2`.
pub fn verify_indistinguishable(
    g: &StorageGraph,
    set: &[usize],
    phi1: usize,
    phi2: usize,
    field: Field,
    budget: u64,
) -> Result<bool, AnalysisError> {
    let s = sorted_set(g, set)?;
    let sub = g.induced(&s);
    let a = enumerate_distribution(g, &sub, phi1, field, budget)?;
    let b = enumerate_distribution(g, &sub, phi2, field, budget)?;
    Ok(a.same_as(&b))
}

/// Distribution of the coefficients received by `set` under additive
/// sharing, by enumerating the `r - 1` free share rows.
pub fn additive_view_distribution(
    g: &StorageGraph,
    set: &[usize],
    phi: usize,
    field: Field,
    budget: u64,
) -> Result<QueryDistribution, AnalysisError> {
    let s = sorted_set(g, set)?;
    let r = g.uniformity().ok_or_else(|| AnalysisError::InvalidSet("graph is not uniform".into()))?;
    let n = g.files();
    if phi >= n {
        return Err(PirError::PhiOutOfRange { phi, files: n }.into());
    }
    check_budget(pow_u128(field.modulus(), (r - 1) * n), budget)?;
    let all: Vec<Fp> = field.elements().collect();
    let mut dist = QueryDistribution::new();
    let mut failure = None;
    for_each_tuple(&all, (r - 1) * n, |free| {
        let rows = free.chunks(n).map(<[Fp]>::to_vec).collect();
        let v = ShareMatrix::from_free_rows(field, rows, n, phi);
        match disperse_shares(g, &v) {
            Ok(queries) => {
                let key = s
                    .iter()
                    .flat_map(|&j| queries[j].coefficients.iter().map(|&(_, c)| c.value()))
                    .collect();
                dist.add(key);
            }
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(dist),
    }
}

/// True iff every set of `r - 1` servers sees a `φ`-independent
/// distribution.
pub fn verify_additive_privacy(g: &StorageGraph, field: Field, budget: u64) -> Result<bool, AnalysisError> {
    let r = g.uniformity().ok_or_else(|| AnalysisError::InvalidSet("graph is not uniform".into()))?;
    for set in subsets_of_size(g.servers(), r - 1) {
        let first = additive_view_distribution(g, &set, 0, field, budget)?;
        for phi in 1..g.files() {
            if !additive_view_distribution(g, &set, phi, field, budget)?.same_as(&first) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u64..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|&v| m >> v & 1 == 1).collect())
        .collect()
}

/// Distribution of the coefficients received by `set` in one round of the
/// coded scheme, for the batch `phis`.
pub fn coded_view_distribution(
    layout: &CodedLayout,
    plan: &RoundPlan,
    round: usize,
    set: &[usize],
    phis: &[usize],
    field: Field,
    budget: u64,
) -> Result<QueryDistribution, AnalysisError> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    let servers = layout.partition.servers();
    if let Some(&v) = s.iter().find(|&&v| v >= servers) {
        return Err(AnalysisError::InvalidSet(format!("server {} does not exist", v + 1)));
    }
    // (server slot in s, file, position) for every symbol the set holds.
    let mut seen: Vec<(usize, usize, usize)> = Vec::new();
    for (t, row) in layout.assignment.iter().enumerate() {
        for (m, &j) in row.iter().enumerate() {
            if let Ok(slot) = s.binary_search(&j) {
                seen.push((slot, t, m));
            }
        }
    }
    seen.sort_unstable();
    let mut files: Vec<usize> = seen.iter().map(|&(_, t, _)| t).collect();
    files.sort_unstable();
    files.dedup();
    let h_values: Vec<Fp> = field.h_values().collect();
    check_budget(
        pow_u128(field.modulus() - 1, s.len() + files.len()).saturating_mul(h_values.len() as u128),
        budget,
    )?;
    let delta: Vec<bool> = seen
        .iter()
        .map(|&(_, t, m)| phis.iter().enumerate().any(|(j, &phi)| phi == t && plan.set(round, j).contains(&m)))
        .collect();
    let file_slot: Vec<usize> = seen.iter().map(|&(_, t, _)| files.binary_search(&t).unwrap()).collect();
    let nonzero: Vec<Fp> = field.nonzero_elements().collect();
    let mut dist = QueryDistribution::new();
    for &h in &h_values {
        for_each_tuple(&nonzero, s.len(), |gamma| {
            for_each_tuple(&nonzero, files.len(), |alpha| {
                let key = seen
                    .iter()
                    .enumerate()
                    .map(|(k, &(slot, _, _))| {
                        let c = gamma[slot] * alpha[file_slot[k]];
                        (if delta[k] { c * h } else { c }).value()
                    })
                    .collect();
                dist.add(key);
            });
        });
    }
    Ok(dist)
}

/// True iff, in every round, the set's view is identically distributed for
/// every batch of distinct files. The set must not contain a polychromatic
/// cycle.
pub fn verify_coded_privacy(
    layout: &CodedLayout,
    plan: &RoundPlan,
    set: &[usize],
    field: Field,
    budget: u64,
) -> Result<bool, AnalysisError> {
    if layout.graph().to_colored().polychromatic_cycle_exists(set) {
        return Err(AnalysisError::Polychromatic);
    }
    let batches = ordered_batches(layout.files(), plan.batch());
    for round in 0..plan.rounds() {
        let mut reference: Option<QueryDistribution> = None;
        for phis in &batches {
            let d = coded_view_distribution(layout, plan, round, set, phis, field, budget)?;
            match &reference {
                Some(r) if !r.same_as(&d) => return Ok(false),
                Some(_) => {}
                None => reference = Some(d),
            }
        }
    }
    Ok(true)
}

fn ordered_batches(files: usize, batch: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..batch {
        let mut next = Vec::new();
        for p in &out {
            for t in (0..files).filter(|t| !p.contains(t)) {
                let mut q = p.clone();
                q.push(t);
                next.push(q);
            }
        }
        out = next;
    }
    out
}
