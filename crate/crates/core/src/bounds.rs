//! Upper bounds on the rate of 2-private PIR over 2-replicated storage.
//!
//! Privacy against each pair of servers sharing a file forces the two
//! answers together to carry a full file's worth of download, so the
//! per-server download fractions `μ` form a fractional vertex cover and
//! the rate is at most `1 / min Σ μ`. Its dual, `η = (1/δ) 𝟙`, certifies the
//! closed form `δ / n`.

use num_rational::Ratio;
use thiserror::Error;

use crate::graphs::StorageGraph;

/// Largest server count for the exhaustive LP search (`3^s` candidates).
pub const LP_MAX_SERVERS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundError {
    #[error("file {edge} is stored on {size} servers; the bound needs exactly 2")]
    NotTwoUniform { edge: usize, size: usize },
    #[error("server {0} stores no file")]
    IsolatedVertex(usize),
    #[error("the graph has no files")]
    NoFiles,
    #[error("exhaustive LP search supports at most {LP_MAX_SERVERS} servers, got {0}")]
    TooLarge(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateBound {
    pub max_degree: usize,
    pub files: usize,
    /// `δ / n`.
    pub bound: Ratio<u64>,
    /// `2 / s`, reported for regular graphs where it equals `δ / n`.
    pub regular_form: Option<Ratio<u64>>,
    /// Exact LP optimum when the exhaustive search was run.
    pub lp_optimum: Option<Ratio<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualCertificate {
    /// The common value `1/δ` of every `η_i`.
    pub eta: Ratio<u64>,
    /// `n / δ`.
    pub objective: Ratio<u64>,
    /// Every server's load `Σ_{i ∋ v} η_i` is at most 1.
    pub feasible: bool,
}

fn check_two_uniform(g: &StorageGraph) -> Result<(), BoundError> {
    match g.edges().iter().position(|e| e.len() != 2) {
        Some(i) => Err(BoundError::NotTwoUniform { edge: i, size: g.edge(i).len() }),
        None => Ok(()),
    }
}

pub fn degree_bound(g: &StorageGraph) -> Result<RateBound, BoundError> {
    check_two_uniform(g)?;
    if g.files() == 0 {
        return Err(BoundError::NoFiles);
    }
    let degrees = g.degrees();
    if let Some(v) = degrees.iter().position(|&d| d == 0) {
        return Err(BoundError::IsolatedVertex(v));
    }
    let delta = g.max_degree();
    Ok(RateBound {
        max_degree: delta,
        files: g.files(),
        bound: Ratio::new(delta as u64, g.files() as u64),
        regular_form: g.regular_degree().map(|_| Ratio::new(2, g.servers() as u64)),
        lp_optimum: None,
    })
}

/// `δ / n` together with the exact LP optimum.
pub fn full_bound(g: &StorageGraph) -> Result<RateBound, BoundError> {
    let mut b = degree_bound(g)?;
    b.lp_optimum = Some(lp_optimum(g)?);
    Ok(b)
}

/// `min Σ μ_v` subject to `μ_a + μ_b >= 1` for every file `{a, b}` and
/// `μ >= 0`. The program has a half-integral optimal vertex, so searching
/// `μ ∈ {0, 1/2, 1}^s` is exact.
pub fn lp_optimum(g: &StorageGraph) -> Result<Ratio<u64>, BoundError> {
    check_two_uniform(g)?;
    let s = g.servers();
    if s > LP_MAX_SERVERS {
        return Err(BoundError::TooLarge(s));
    }
    let edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e[0], e[1])).collect();
    // Doubled values: 0, 1, 2 stand for 0, 1/2, 1.
    let mut mu = vec![0u8; s];
    let mut best = 2 * s as u64;
    loop {
        if edges.iter().all(|&(a, b)| mu[a] + mu[b] >= 2) {
            best = best.min(mu.iter().map(|&x| x as u64).sum());
        }
        let mut pos = 0;
        loop {
            if pos == s {
                return Ok(Ratio::new(best, 2));
            }
            mu[pos] += 1;
            if mu[pos] <= 2 {
                break;
            }
            mu[pos] = 0;
            pos += 1;
        }
    }
}

pub fn dual_certificate(g: &StorageGraph) -> Result<DualCertificate, BoundError> {
    check_two_uniform(g)?;
    let delta = g.max_degree();
    if delta == 0 {
        return Err(BoundError::NoFiles);
    }
    let eta = Ratio::new(1, delta as u64);
    let feasible = g.degrees().into_iter().all(|d| eta * Ratio::from_integer(d as u64) <= Ratio::from_integer(1));
    Ok(DualCertificate { eta, objective: Ratio::new(g.files() as u64, delta as u64), feasible })
}

/// The rate `1/s` achieved by the 2-replication protocol.
pub fn achieved_rate(g: &StorageGraph) -> Ratio<u64> {
    Ratio::new(1, g.servers() as u64)
}
