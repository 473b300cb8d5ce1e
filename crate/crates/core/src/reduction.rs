//! Running the 2-replication protocol on arbitrary replication systems.
//!
//! A choice function keeps one coloured edge per file of the clique
//! expansion, giving a 2-uniform pruned graph. Each file is then queried only
//! at the two servers of its chosen edge; the other servers holding it get no
//! coefficient for it.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use thiserror::Error;

use crate::graphs::{ColoredMultigraph, StorageGraph};
use crate::pir2::{answer, gen_queries, reconstruct, PirError, Retrieval, Transcript};
use crate::storage::{disperse, Dataset};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReductionError {
    #[error("colour {0} has no edges")]
    EmptyColor(usize),
    #[error("choice for colour {color} is edge {edge}, which does not carry that colour")]
    WrongColor { color: usize, edge: usize },
    #[error("choice function covers {got} colours, expected {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error(transparent)]
    Pir(#[from] PirError),
}

/// `choices[i]` indexes the edge of colour `i` kept in the pruned graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChoiceFunction {
    choices: Vec<usize>,
}

impl ChoiceFunction {
    pub fn new(cm: &ColoredMultigraph, choices: Vec<usize>) -> Result<Self, ReductionError> {
        if choices.len() != cm.colors() {
            return Err(ReductionError::WrongLength { expected: cm.colors(), got: choices.len() });
        }
        for (color, &edge) in choices.iter().enumerate() {
            if cm.edges().get(edge).is_none_or(|e| e.color != color) {
                return Err(ReductionError::WrongColor { color, edge });
            }
        }
        Ok(ChoiceFunction { choices })
    }

    pub fn choices(&self) -> &[usize] {
        &self.choices
    }

    /// The 2-uniform graph keeping only the chosen edges, file `i` being the
    /// edge chosen for colour `i`.
    pub fn pruned(&self, cm: &ColoredMultigraph) -> StorageGraph {
        let edges = self
            .choices
            .iter()
            .map(|&k| {
                let e = cm.edges()[k];
                vec![e.a, e.b]
            })
            .collect();
        StorageGraph::new(cm.servers(), edges).expect("edges of a valid coloured multigraph")
    }
}

pub fn random_choice<R: Rng + ?Sized>(cm: &ColoredMultigraph, rng: &mut R) -> Result<ChoiceFunction, ReductionError> {
    let mut choices = Vec::with_capacity(cm.colors());
    for color in 0..cm.colors() {
        let cands = cm.edges_of_color(color);
        if cands.is_empty() {
            return Err(ReductionError::EmptyColor(color));
        }
        choices.push(cands[rng.gen_range(0..cands.len())]);
    }
    Ok(ChoiceFunction { choices })
}

/// Candidate edges per colour with duplicate server pairs removed.
fn candidates(cm: &ColoredMultigraph) -> Vec<Vec<usize>> {
    (0..cm.colors())
        .map(|color| {
            let mut seen = BTreeMap::new();
            for k in cm.edges_of_color(color) {
                let e = cm.edges()[k];
                seen.entry((e.a, e.b)).or_insert(k);
            }
            seen.into_values().collect()
        })
        .collect()
}

/// A choice function whose pruned graph has no cycle of length at most
/// `max_cycle`, or `None` if none exists. Exhaustive backtracking: colours
/// are assigned fewest-candidates first, and an edge `{a, b}` is rejected
/// when `a` and `b` are already within distance `max_cycle - 1`.
pub fn find_choice_no_short_cycles(cm: &ColoredMultigraph, max_cycle: usize) -> Option<ChoiceFunction> {
    let cands = candidates(cm);
    if cands.iter().any(Vec::is_empty) {
        return None;
    }
    let mut order: Vec<usize> = (0..cm.colors()).collect();
    order.sort_by_key(|&c| cands[c].len());
    let mut search = Search {
        cm,
        cands: &cands,
        order: &order,
        max_cycle,
        adj: vec![Vec::new(); cm.servers()],
        choices: vec![usize::MAX; cm.colors()],
    };
    search.go(0).then_some(ChoiceFunction { choices: search.choices })
}

struct Search<'a> {
    cm: &'a ColoredMultigraph,
    cands: &'a [Vec<usize>],
    order: &'a [usize],
    max_cycle: usize,
    adj: Vec<Vec<usize>>,
    choices: Vec<usize>,
}

impl Search<'_> {
    fn go(&mut self, depth: usize) -> bool {
        let Some(&color) = self.order.get(depth) else {
            return true;
        };
        for &k in &self.cands[color] {
            let e = self.cm.edges()[k];
            if self.max_cycle >= 2 && self.within(e.a, e.b, self.max_cycle - 1) {
                continue;
            }
            self.adj[e.a].push(e.b);
            self.adj[e.b].push(e.a);
            self.choices[color] = k;
            if self.go(depth + 1) {
                return true;
            }
            self.adj[e.a].pop();
            self.adj[e.b].pop();
        }
        false
    }

    /// Whether `b` is reachable from `a` in at most `limit` steps.
    fn within(&self, a: usize, b: usize, limit: usize) -> bool {
        let mut dist = vec![usize::MAX; self.adj.len()];
        dist[a] = 0;
        let mut queue = VecDeque::from([a]);
        while let Some(u) = queue.pop_front() {
            if u == b {
                return true;
            }
            if dist[u] == limit {
                continue;
            }
            for &w in &self.adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        false
    }
}

/// A choice function with no parallel chosen edges, found as a maximum
/// matching between colours and distinct server pairs.
pub fn matching_choice_g2(cm: &ColoredMultigraph) -> Option<ChoiceFunction> {
    let cands = candidates(cm);
    let mut pair_ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let adj: Vec<Vec<usize>> = cands
        .iter()
        .map(|ks| {
            ks.iter()
                .map(|&k| {
                    let e = cm.edges()[k];
                    let next = pair_ids.len();
                    *pair_ids.entry((e.a, e.b)).or_insert(next)
                })
                .collect()
        })
        .collect();
    let matched = hopcroft_karp(&adj, pair_ids.len());
    let choices = matched
        .into_iter()
        .enumerate()
        .map(|(color, m)| {
            let p = m?;
            let slot = adj[color].iter().position(|&x| x == p).expect("matched along an edge");
            Some(cands[color][slot])
        })
        .collect::<Option<Vec<_>>>()?;
    Some(ChoiceFunction { choices })
}

/// Maximum bipartite matching. `adj[l]` lists right vertices adjacent to
/// left vertex `l`; returns the partner of each left vertex.
pub fn hopcroft_karp(adj: &[Vec<usize>], right: usize) -> Vec<Option<usize>> {
    const FREE: usize = usize::MAX;
    let left = adj.len();
    let mut match_l = vec![FREE; left];
    let mut match_r = vec![FREE; right];
    let mut dist = vec![0usize; left];
    loop {
        // Layer free left vertices by alternating-path distance.
        let mut queue = VecDeque::new();
        for l in 0..left {
            if match_l[l] == FREE {
                dist[l] = 0;
                queue.push_back(l);
            } else {
                dist[l] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(l) = queue.pop_front() {
            for &r in &adj[l] {
                let m = match_r[r];
                if m == FREE {
                    found = true;
                } else if dist[m] == usize::MAX {
                    dist[m] = dist[l] + 1;
                    queue.push_back(m);
                }
            }
        }
        if !found {
            break;
        }
        for l in 0..left {
            if match_l[l] == FREE {
                augment(l, adj, &mut match_l, &mut match_r, &mut dist);
            }
        }
    }
    match_l.into_iter().map(|m| (m != FREE).then_some(m)).collect()
}

fn augment(
    l: usize,
    adj: &[Vec<usize>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
) -> bool {
    for &r in &adj[l] {
        let m = match_r[r];
        if m == usize::MAX || (dist[m] == dist[l] + 1 && augment(m, adj, match_l, match_r, dist)) {
            match_l[l] = r;
            match_r[r] = l;
            return true;
        }
    }
    dist[l] = usize::MAX;
    false
}

/// Retrieves `x_phi` from the servers of `g` by running the 2-replication
/// protocol on the pruned graph of `choice`.
pub fn reduce_and_retrieve<R: Rng + ?Sized>(
    g: &StorageGraph,
    choice: &ChoiceFunction,
    data: &Dataset,
    phi: usize,
    rng: &mut R,
) -> Result<Retrieval, ReductionError> {
    let cm = g.to_colored();
    ChoiceFunction::new(&cm, choice.choices.clone())?;
    let pruned = choice.pruned(&cm);
    let servers = disperse(g, data).map_err(PirError::from)?;
    let (query, secret) = gen_queries(&pruned, phi, data.field(), rng)?;
    let queries = query.server_queries(&pruned);
    let answers = queries
        .iter()
        .map(|sq| answer(&servers[sq.server], &sq.coefficients))
        .collect::<Result<Vec<_>, _>>()?;
    let value = reconstruct(&answers, &secret)?;
    let upload = queries.iter().map(|sq| sq.coefficients.len()).sum();
    let download = answers.iter().map(Vec::len).sum();
    Ok(Retrieval { value, secret, query, transcript: Transcript { queries, answers, upload, download } })
}
