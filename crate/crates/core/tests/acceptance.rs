//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p graph-pir --test acceptance`. Every check is
//! exact unless a tolerance is named next to it; wall-clock limits are
//! reported but only enforced in release builds, since debug builds are
//! several times slower.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use graph_pir::analysis::{
    check_support, closed_form_probability, coded_view_distribution, enumerate_distribution, observe, rank_attack,
    verify_acyclic_privacy, verify_additive_privacy, verify_coded_privacy, DEFAULT_BUDGET,
};
use graph_pir::bounds::{achieved_rate, degree_bound, dual_certificate, full_bound, lp_optimum};
use graph_pir::coded::{
    coded_retrieve, encode_and_disperse, plan_rounds, CodedLayout, MdsCode, Partition, SecretMode,
};
use graph_pir::field::{Field, Fp};
use graph_pir::graphs::{ColoredEdge, ColoredMultigraph, Family, StorageGraph};
use graph_pir::linalg::Matrix;
use graph_pir::net::{client_retrieve, ServerHandle, WireMessage};
use graph_pir::pir2::{gen_queries, retrieve};
use graph_pir::pir_r::retrieve_r;
use graph_pir::reduction::{find_choice_no_short_cycles, matching_choice_g2, reduce_and_retrieve, ChoiceFunction};
use graph_pir::storage::{disperse, random_dataset};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Leakage is a difference of two `log2` values, compared to this tolerance.
const LEAKAGE_TOLERANCE: f64 = 1e-12;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn field(q: u64) -> Field {
    Field::new(q).unwrap()
}

fn c1_roundtrip() -> Result<String, String> {
    let families = [
        Family::Path(2),
        Family::Path(3),
        Family::Path(5),
        Family::Cycle(3),
        Family::Cycle(4),
        Family::Cycle(5),
        Family::Cycle(6),
        Family::Bowtie,
        Family::Petersen,
        Family::CompleteBipartite(3, 3),
    ];
    let mut runs = 0;
    for fam in families {
        let g = fam.build().unwrap();
        for q in [3, 5, 7] {
            for f in [1, 4] {
                for seed in 0..20 {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let data = random_dataset(g.files(), f, field(q), &mut rng);
                    for phi in 0..g.files() {
                        let r = retrieve(&g, &data, phi, &mut rng).map_err(|e| e.to_string())?;
                        ensure!(r.value == data.file(phi), "{fam} q={q} f={f} seed={seed} phi={}", phi + 1);
                        ensure!(
                            r.transcript.upload == 2 * g.files() && r.transcript.download == g.servers() * f,
                            "{fam}: upload {} download {}",
                            r.transcript.upload,
                            r.transcript.download
                        );
                        runs += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{runs} retrievals exact"))
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|&v| m >> v & 1 == 1).collect())
        .collect()
}

fn c2_petersen_row() -> Result<String, String> {
    let g = Family::Petersen.build().unwrap();
    ensure!(g.files() == 15 && g.servers() == 10, "n={} s={}", g.files(), g.servers());
    ensure!(g.regular_degree() == Some(3), "not 3-regular");
    ensure!(g.girth() == Some(5), "girth {:?}", g.girth());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = random_dataset(15, 4, field(5), &mut rng);
    let r = retrieve(&g, &data, 6, &mut rng).map_err(|e| e.to_string())?;
    ensure!(r.transcript.rate(4) == Ratio::new(1, 10), "rate {}", r.transcript.rate(4));
    let sets = subsets(10, 4);
    ensure!(sets.len() == 210, "{} four-subsets", sets.len());
    for set in &sets {
        ensure!(g.induced(set).is_acyclic(&g), "{set:?} induces a cycle");
        let private = verify_acyclic_privacy(&g, set, field(3), DEFAULT_BUDGET).map_err(|e| e.to_string())?;
        ensure!(private, "{set:?} distinguishes files");
    }
    // t = 4 is tight: some five servers see a cycle.
    ensure!(subsets(10, 5).iter().any(|s| !g.induced(s).is_acyclic(&g)), "no cyclic 5-set");
    Ok("n=15 s=10 d=3 rate=1/10 t=4 (210/210 four-sets private)".into())
}

/// Connected simple graphs on `2..=5` vertices with at most 6 edges, one per
/// isomorphism class.
fn small_connected_graphs() -> Vec<StorageGraph> {
    let mut out = Vec::new();
    for s in 2..=5usize {
        let pairs: Vec<(usize, usize)> = (0..s).flat_map(|a| (a + 1..s).map(move |b| (a, b))).collect();
        let perms = permutations(s);
        let mut seen = BTreeSet::new();
        for mask in 1u32..1 << pairs.len() {
            if mask.count_ones() > 6 {
                continue;
            }
            let edges: Vec<(usize, usize)> =
                pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &p)| p).collect();
            if !connected(s, &edges) {
                continue;
            }
            let canon = perms
                .iter()
                .map(|p| {
                    let mut e: Vec<(usize, usize)> =
                        edges.iter().map(|&(a, b)| (p[a].min(p[b]), p[a].max(p[b]))).collect();
                    e.sort_unstable();
                    e
                })
                .min()
                .unwrap();
            if seen.insert(canon) {
                out.push(StorageGraph::new(s, edges.iter().map(|&(a, b)| vec![a, b]).collect()).unwrap());
            }
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn connected(s: usize, edges: &[(usize, usize)]) -> bool {
    let mut reach = vec![false; s];
    reach[0] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for &(a, b) in edges {
            if reach[a] != reach[b] {
                reach[a] = true;
                reach[b] = true;
                changed = true;
            }
        }
    }
    reach.into_iter().all(|r| r)
}

/// Edge subsets forming a single cycle: every touched vertex has degree 2
/// and the subset is connected.
fn cycle_edge_sets(g: &StorageGraph) -> Vec<Vec<usize>> {
    let n = g.files();
    let mut out = Vec::new();
    for mask in 1u32..1 << n {
        let es: Vec<usize> = (0..n).filter(|&e| mask >> e & 1 == 1).collect();
        let mut deg = vec![0; g.servers()];
        for &e in &es {
            for &v in g.edge(e) {
                deg[v] += 1;
            }
        }
        if deg.iter().any(|&d| d != 0 && d != 2) {
            continue;
        }
        let verts: Vec<usize> = (0..g.servers()).filter(|&v| deg[v] == 2).collect();
        let local: Vec<(usize, usize)> = es
            .iter()
            .map(|&e| {
                let pos = |v: usize| verts.binary_search(&v).unwrap();
                (pos(g.edge(e)[0]), pos(g.edge(e)[1]))
            })
            .collect();
        if connected(verts.len(), &local) {
            out.push(es);
        }
    }
    out
}

/// Full enumeration of `Q = diag(γ) I_φ diag(α)` over every `α`, `γ`, `h`,
/// keyed by the entries at the incidences (edge by edge, smaller server
/// first).
fn brute_force_distribution(g: &StorageGraph, phi: usize, fq: Field) -> BTreeMap<Vec<u64>, u64> {
    let q = fq.modulus();
    let (s, n) = (g.servers(), g.files());
    let mut counts = BTreeMap::new();
    let vars = s + n;
    let total = (q - 1).pow(vars as u32);
    for h in 2..q {
        for code in 0..total {
            let mut c = code;
            let mut vals = Vec::with_capacity(vars);
            for _ in 0..vars {
                vals.push(fq.elem(c % (q - 1) + 1));
                c /= q - 1;
            }
            let (gamma, alpha) = vals.split_at(s);
            let mut key = Vec::with_capacity(2 * n);
            for e in 0..n {
                let (a, b) = (g.edge(e)[0], g.edge(e)[1]);
                let top = if e == phi { fq.elem(h) } else { fq.one() };
                key.push((gamma[a] * top * alpha[e]).value());
                key.push((gamma[b] * -fq.one() * alpha[e]).value());
            }
            *counts.entry(key).or_insert(0u64) += 1;
        }
    }
    counts
}

/// Matrices supported on the incidences whose cycle submatrices have full
/// rank exactly on the cycles through `φ`.
fn compatible_support(g: &StorageGraph, phi: usize, fq: Field) -> BTreeSet<Vec<u64>> {
    let q = fq.modulus();
    let n = g.files();
    let cycles = cycle_edge_sets(g);
    let mut out = BTreeSet::new();
    for code in 0..(q - 1).pow(2 * n as u32) {
        let mut c = code;
        let key: Vec<u64> = (0..2 * n)
            .map(|_| {
                let v = c % (q - 1) + 1;
                c /= q - 1;
                v
            })
            .collect();
        let mut a = Matrix::zeros(fq, g.servers(), n);
        for e in 0..n {
            a[(g.edge(e)[0], e)] = fq.elem(key[2 * e]);
            a[(g.edge(e)[1], e)] = fq.elem(key[2 * e + 1]);
        }
        let ok = cycles.iter().all(|es| {
            let mut rows: Vec<usize> = es.iter().flat_map(|&e| g.edge(e).to_vec()).collect();
            rows.sort_unstable();
            rows.dedup();
            let rank = a.submatrix(&rows, es).rank();
            rank == if es.contains(&phi) { es.len() } else { es.len() - 1 }
        });
        if ok {
            out.insert(key);
        }
    }
    out
}

/// `(q-1)^-(u-k)`, with a further `(q-2)^-1` when `φ` is on a cycle, for a
/// connected graph: `u = 2n` incidences and cyclomatic number `n - s + 1`.
fn expected_probability(g: &StorageGraph, phi: usize, q: u128) -> Ratio<u128> {
    let u = 2 * g.files();
    let k = g.files() + 1 - g.servers();
    let mut denom = (q - 1).pow((u - k) as u32);
    if cycle_edge_sets(g).iter().any(|c| c.contains(&phi)) {
        denom *= q - 2;
    }
    Ratio::new(1, denom)
}

fn c3_support() -> Result<String, String> {
    let f3 = field(3);
    let graphs = small_connected_graphs();
    let mut cases = 0;
    for g in &graphs {
        let whole = g.whole();
        for phi in 0..g.files() {
            let dist = brute_force_distribution(g, phi, f3);
            let total: u64 = dist.values().sum();
            let support: BTreeSet<Vec<u64>> = dist.keys().cloned().collect();
            ensure!(support == compatible_support(g, phi, f3), "{} phi={}: support differs", g.to_text(), phi + 1);
            let first = *dist.values().next().unwrap();
            ensure!(dist.values().all(|&c| c == first), "{} phi={}: not uniform", g.to_text(), phi + 1);
            let p = Ratio::new(first as u128, total as u128);
            let expected = expected_probability(g, phi, 3);
            ensure!(p == expected, "{} phi={}: probability {p}, closed form {expected}", g.to_text(), phi + 1);
            ensure!(
                closed_form_probability(g, &whole, phi, 3) == p,
                "library closed form disagrees on {}",
                g.to_text()
            );
            let lib = enumerate_distribution(g, &whole, phi, f3, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
            ensure!(
                dist.iter().all(|(key, &c)| lib.probability(key) == Ratio::new(c, total))
                    && lib.support_size() == dist.len(),
                "library enumeration disagrees on {}",
                g.to_text()
            );
            let check = check_support(g, &whole, phi, f3, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
            ensure!(check.holds(), "library support check fails on {}", g.to_text());
            cases += 1;
        }
    }
    // The (q-2)^-1 factor is invisible at q = 3; confirm it at q = 5 on a
    // triangle with a pendant file.
    let tadpole = StorageGraph::new(4, vec![vec![0, 1], vec![1, 2], vec![0, 2], vec![2, 3]]).unwrap();
    for phi in 0..4 {
        let dist = brute_force_distribution(&tadpole, phi, field(5));
        let total: u64 = dist.values().sum();
        let first = *dist.values().next().unwrap();
        let expected = expected_probability(&tadpole, phi, 5);
        ensure!(Ratio::new(first as u128, total as u128) == expected, "tadpole q=5 phi={}", phi + 1);
        ensure!(closed_form_probability(&tadpole, &tadpole.whole(), phi, 5) == expected, "tadpole closed form");
    }
    Ok(format!("{} graphs, {cases} (graph, phi) cases", graphs.len()))
}

fn c4_rank_attack() -> Result<String, String> {
    let bowtie = Family::Bowtie.build().unwrap();
    let all: Vec<usize> = (0..5).collect();
    let triangles = [[0usize, 1, 2], [3, 4, 5]];
    for phi in 0..6 {
        let own: Vec<usize> = triangles.iter().find(|t| t.contains(&phi)).unwrap().to_vec();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fq = field([3, 5, 7, 11][seed as usize % 4]);
            let (q, _) = gen_queries(&bowtie, phi, fq, &mut rng).map_err(|e| e.to_string())?;
            let obs = observe(&q, &bowtie, &all).map_err(|e| e.to_string())?;
            let report = rank_attack(&obs, &bowtie, &all).map_err(|e| e.to_string())?;
            ensure!(report.candidates == own, "phi={} seed={seed}: T={:?}", phi + 1, report.candidates);
            ensure!((report.leakage_bits - 1.0).abs() <= LEAKAGE_TOLERANCE, "leakage {}", report.leakage_bits);
        }
    }
    let tri = Family::Cycle(3).build().unwrap();
    for phi in 0..3 {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (q, _) = gen_queries(&tri, phi, field(5), &mut rng).map_err(|e| e.to_string())?;
            let obs = observe(&q, &tri, &[0, 1, 2]).map_err(|e| e.to_string())?;
            let report = rank_attack(&obs, &tri, &[0, 1, 2]).map_err(|e| e.to_string())?;
            ensure!(report.candidates.len() == 3 && report.leakage_bits == 0.0, "triangle leaks");
        }
    }
    Ok(format!("bowtie |T|=3 leakage=1.0 (tol {LEAKAGE_TOLERANCE:e}); triangle leakage=0.0"))
}

fn c5_bounds() -> Result<String, String> {
    let p = Family::Petersen.build().unwrap();
    let b = full_bound(&p).map_err(|e| e.to_string())?;
    let lp = b.lp_optimum.unwrap();
    ensure!(b.bound == Ratio::new(1, 5) && lp.recip() == Ratio::new(1, 5), "delta/n {} lp {lp}", b.bound);
    ensure!(achieved_rate(&p) == Ratio::new(1, 10), "achieved {}", achieved_rate(&p));
    ensure!(lp.recip() / achieved_rate(&p) == Ratio::from_integer(2), "gap is not 2");
    let complete = |k: usize| {
        StorageGraph::new(k, (0..k).flat_map(|a| (a + 1..k).map(move |b| vec![a, b])).collect()).unwrap()
    };
    let cube = StorageGraph::new(
        8,
        (0..8usize).flat_map(|v| (0..3).map(move |i| v ^ 1 << i).filter(move |&w| w > v).map(move |w| vec![v, w])).collect(),
    )
    .unwrap();
    let mut regular: Vec<StorageGraph> = (3..=10).map(|c| Family::Cycle(c).build().unwrap()).collect();
    for (a, b) in [(2, 2), (3, 3), (4, 4), (5, 5)] {
        regular.push(Family::CompleteBipartite(a, b).build().unwrap());
    }
    regular.extend([complete(4), complete(5), complete(6), cube, p]);
    for g in &regular {
        ensure!(g.is_connected() && g.regular_degree().is_some() && g.servers() <= 10, "bad test graph");
        let lp = lp_optimum(g).map_err(|e| e.to_string())?;
        ensure!(lp == Ratio::new(g.servers() as u64, 2), "{}: lp {lp}", g.to_text());
        let d = dual_certificate(g).map_err(|e| e.to_string())?;
        ensure!(d.feasible && d.objective <= lp, "{}: weak duality", g.to_text());
        let b = degree_bound(g).map_err(|e| e.to_string())?;
        ensure!(b.regular_form == Some(Ratio::new(2, g.servers() as u64)) && b.bound == lp.recip(), "regular form");
        ensure!(achieved_rate(g) <= lp.recip(), "achieved above bound");
    }
    Ok(format!("petersen 1/5 vs 1/10; {} regular graphs at s/2", regular.len()))
}

/// Every 2-server view of additive 3-sharing over 2 files, by enumerating
/// the free share rows directly.
fn additive_views(g: &StorageGraph, phi: usize, fq: Field) -> BTreeMap<Vec<usize>, BTreeMap<Vec<u64>, u64>> {
    let q = fq.modulus();
    let n = g.files();
    let mut out: BTreeMap<Vec<usize>, BTreeMap<Vec<u64>, u64>> = BTreeMap::new();
    for code in 0..q.pow(2 * n as u32) {
        let mut c = code;
        let mut rows = vec![vec![fq.zero(); n]; 3];
        for row in rows.iter_mut().take(2) {
            for x in row.iter_mut() {
                *x = fq.elem(c % q);
                c /= q;
            }
        }
        for j in 0..n {
            let unit = if j == phi { fq.one() } else { fq.zero() };
            rows[2][j] = unit - rows[0][j] - rows[1][j];
        }
        for set in subsets(g.servers(), 2) {
            let mut key = Vec::new();
            for &v in &set {
                for (j, e) in g.edges().iter().enumerate() {
                    if let Some(k) = e.iter().position(|&w| w == v) {
                        key.push(rows[k][j].value());
                    }
                }
            }
            *out.entry(set).or_default().entry(key).or_insert(0) += 1;
        }
    }
    out
}

fn c6_additive() -> Result<String, String> {
    let f3 = field(3);
    let systems = [
        StorageGraph::new(4, vec![vec![0, 1, 2], vec![1, 2, 3]]).unwrap(),
        StorageGraph::new(5, vec![vec![0, 1, 2], vec![2, 3, 4]]).unwrap(),
        StorageGraph::new(6, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap(),
        StorageGraph::new(3, vec![vec![0, 1, 2], vec![0, 1, 2]]).unwrap(),
    ];
    for g in &systems {
        let reference = additive_views(g, 0, f3);
        ensure!(additive_views(g, 1, f3) == reference, "{}: a 2-set distinguishes the files", g.to_text());
        ensure!(
            verify_additive_privacy(g, f3, DEFAULT_BUDGET).map_err(|e| e.to_string())?,
            "library check fails on {}",
            g.to_text()
        );
    }
    let mut runs = 0;
    let ring = Family::TriangleRing(4).build().unwrap();
    for g in systems.iter().chain([&ring]) {
        for q in [3, 5, 7] {
            for seed in 0..10 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let data = random_dataset(g.files(), 3, field(q), &mut rng);
                for phi in 0..g.files() {
                    let r = retrieve_r(g, &data, phi, &mut rng).map_err(|e| e.to_string())?;
                    ensure!(r.value == data.file(phi), "{} phi={}", g.to_text(), phi + 1);
                    runs += 1;
                }
            }
        }
    }
    Ok(format!("2-privacy on {} systems; {runs} retrievals exact", systems.len()))
}

fn ring_of_four_triangles() -> StorageGraph {
    let one_based = [[1, 8, 4], [4, 7, 3], [2, 6, 3], [1, 5, 2]];
    StorageGraph::new(8, one_based.iter().map(|e| e.iter().map(|v| v - 1).collect()).collect()).unwrap()
}

fn all_choices(cm: &ColoredMultigraph) -> Vec<ChoiceFunction> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for color in 0..cm.colors() {
        let mut next = Vec::new();
        for p in &out {
            for k in cm.edges_of_color(color) {
                let mut q = p.clone();
                q.push(k);
                next.push(q);
            }
        }
        out = next;
    }
    out.into_iter().map(|c| ChoiceFunction::new(cm, c).unwrap()).collect()
}

fn random_colored(seed: u64) -> ColoredMultigraph {
    let mut rng = ChaCha8Rng::seed_from_u64(1_000 + seed);
    let s = rng.gen_range(2..=6);
    let n = rng.gen_range(1..=6);
    let mut edges = Vec::new();
    for color in 0..n {
        for _ in 0..rng.gen_range(1..=3) {
            let a = rng.gen_range(0..s);
            let b = (a + rng.gen_range(1..s)) % s;
            edges.push(ColoredEdge { a, b, color });
        }
    }
    ColoredMultigraph::new(s, n, edges).unwrap()
}

fn c7_reduction() -> Result<String, String> {
    let mut feasible = 0;
    for seed in 0..500 {
        let cm = random_colored(seed);
        let choices = all_choices(&cm);
        for g in [2, 3, 4] {
            let brute = choices.iter().any(|c| c.pruned(&cm).girth().is_none_or(|x| x > g));
            let found = find_choice_no_short_cycles(&cm, g);
            ensure!(found.is_some() == brute, "seed {seed} g={g}: search {} brute {brute}", found.is_some());
            if let Some(c) = found {
                let girth = c.pruned(&cm).girth();
                ensure!(girth.is_none_or(|x| x > g), "seed {seed} g={g}: girth {girth:?}");
            }
        }
        let m = matching_choice_g2(&cm);
        ensure!(m.is_some() == find_choice_no_short_cycles(&cm, 2).is_some(), "seed {seed}: matching disagrees");
        if let Some(c) = m {
            ensure!(!c.pruned(&cm).shares_multiple_files(), "seed {seed}: matching repeats a pair");
            feasible += 1;
        }
    }
    let g = ring_of_four_triangles();
    let cm = g.to_colored();
    ensure!(cm.edges().len() == 12, "{} coloured edges", cm.edges().len());
    ensure!(!cm.polychromatic_cycle_exists(&[0, 1, 4]), "{{v1,v2,v5}} has a polychromatic cycle");
    ensure!(cm.polychromatic_cycle_exists(&[0, 3, 2, 1, 4]), "{{v1,v4,v3,v2,v5}} lacks one");
    let choices = all_choices(&cm);
    ensure!(choices.len() == 81, "{} choice functions", choices.len());
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let data = random_dataset(4, 3, field(7), &mut rng);
    for c in &choices {
        for phi in 0..4 {
            let r = reduce_and_retrieve(&g, c, &data, phi, &mut rng).map_err(|e| e.to_string())?;
            ensure!(r.value == data.file(phi), "choice {:?} phi={}", c.choices(), phi + 1);
        }
    }
    Ok(format!("500 instances ({feasible} matchable); 81 choices x 4 files exact"))
}

fn c8_coded() -> Result<String, String> {
    let f5 = field(5);
    let code = MdsCode::parity(2, f5);
    let layout = CodedLayout::cyclic_matching(12).map_err(|e| e.to_string())?;
    ensure!(layout.files() == 16, "{} files", layout.files());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let data = random_dataset(16, 4, f5, &mut rng);
    let system = encode_and_disperse(&data, &code, &layout).map_err(|e| e.to_string())?;
    ensure!(system.storage_overhead() == Ratio::new(3, 2), "overhead {}", system.storage_overhead());
    let r = coded_retrieve(&system, &[6], SecretMode::FreshPerRound, &mut rng).map_err(|e| e.to_string())?;
    ensure!(r.rate(4) == Ratio::new(1, 12), "rate {}", r.rate(4));
    for s in [12, 9] {
        let g = CodedLayout::cyclic_matching(s).map_err(|e| e.to_string())?.graph();
        for a in 0..g.files() {
            for b in a + 1..g.files() {
                let shared = g.edge(a).iter().filter(|v| g.edge(b).contains(v)).count();
                ensure!(shared <= 1, "s={s}: files {} and {} share {shared}", a + 1, b + 1);
            }
        }
    }
    let one = |p: &[usize]| p.iter().map(|x| x + 1).collect::<Vec<_>>();
    let p = plan_rounds(10, 6);
    let want: [[&[usize]; 2]; 3] = [[&[1, 2, 3, 4], &[]], [&[5, 6], &[1, 2]], [&[], &[3, 4, 5, 6]]];
    ensure!(p.rounds() == 3 && p.batch() == 2, "N-K=4 K=6: r={} b={}", p.rounds(), p.batch());
    for (i, row) in want.iter().enumerate() {
        for (j, set) in row.iter().enumerate() {
            ensure!(one(p.set(i, j)) == *set, "N-K=4 K=6: J({},{}) = {:?}", i + 1, j + 1, one(p.set(i, j)));
        }
    }
    let p = plan_rounds(10, 4);
    let want: [[&[usize]; 3]; 2] = [[&[1, 2, 3, 4], &[5, 6], &[]], [&[], &[1, 2], &[3, 4, 5, 6]]];
    ensure!(p.rounds() == 2 && p.batch() == 3, "N-K=6 K=4: r={} b={}", p.rounds(), p.batch());
    for (i, row) in want.iter().enumerate() {
        for (j, set) in row.iter().enumerate() {
            ensure!(one(p.set(i, j)) == *set, "N-K=6 K=4: J({},{}) = {:?}", i + 1, j + 1, one(p.set(i, j)));
        }
    }
    let p = plan_rounds(3, 2);
    ensure!(p.rounds() == 2 && p.batch() == 1, "parity plan r={} b={}", p.rounds(), p.batch());
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_dataset(16, 4, f5, &mut rng);
        let system = encode_and_disperse(&data, &code, &layout).map_err(|e| e.to_string())?;
        let phi = rng.gen_range(0..16);
        let r = coded_retrieve(&system, &[phi], SecretMode::FreshPerRound, &mut rng).map_err(|e| e.to_string())?;
        ensure!(r.files == vec![data.file(phi).to_vec()], "seed {seed} phi={}", phi + 1);
    }
    let small = CodedLayout::cyclic_matching(6).map_err(|e| e.to_string())?;
    let plan = plan_rounds(3, 2);
    let cm = small.graph().to_colored();
    let mut checked = 0;
    for set in subsets(6, 2) {
        if cm.polychromatic_cycle_exists(&set) {
            continue;
        }
        let ok = verify_coded_privacy(&small, &plan, &set, field(3), DEFAULT_BUDGET).map_err(|e| e.to_string())?;
        ensure!(ok, "set {:?} distinguishes files", one(&set));
        checked += 1;
    }
    ensure!(checked == 15, "{checked} clean 2-sets");
    // Two files sharing two servers let that pair tell them apart from a
    // third file.
    let bad = CodedLayout::new(
        Partition::contiguous(6, 3).unwrap(),
        vec![vec![0, 2, 4], vec![0, 2, 5], vec![1, 3, 5]],
    )
    .unwrap();
    ensure!(bad.graph().to_colored().polychromatic_cycle_exists(&[0, 2]), "control lacks a polychromatic cycle");
    let leaks = (0..plan.rounds()).any(|round| {
        let a = coded_view_distribution(&bad, &plan, round, &[0, 2], &[0], field(3), DEFAULT_BUDGET).unwrap();
        let b = coded_view_distribution(&bad, &plan, round, &[0, 2], &[2], field(3), DEFAULT_BUDGET).unwrap();
        !a.same_as(&b)
    });
    ensure!(leaks, "negative control shows no leakage");
    Ok(format!("rate 1/12, overhead 3/2, J tables exact, 50 seeds exact, {checked} 2-sets private"))
}

fn c9_network() -> Result<String, String> {
    let g = Family::Petersen.build().unwrap();
    let f7 = field(7);
    let data = random_dataset(15, 4, f7, &mut ChaCha8Rng::seed_from_u64(99));
    let contents = disperse(&g, &data).map_err(|e| e.to_string())?;
    let servers: Vec<ServerHandle> = contents
        .into_iter()
        .map(|c| ServerHandle::spawn(c, "127.0.0.1:0"))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let endpoints: Vec<String> = servers.iter().map(|s| s.addr().to_string()).collect();
    let bytes = |answers: &[Vec<Fp>]| -> Vec<Vec<u8>> {
        answers
            .iter()
            .map(|a| WireMessage::Answer { values: a.iter().map(|x| x.value()).collect() }.encode())
            .collect()
    };
    for seed in 0..20 {
        let phi = seed as usize % 15;
        let local = retrieve(&g, &data, phi, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(|e| e.to_string())?;
        let remote =
            client_retrieve(&endpoints, &g, phi, f7, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(|e| e.to_string())?;
        ensure!(remote.value == local.value && remote.value == data.file(phi), "seed {seed}: values differ");
        ensure!(remote.transcript == local.transcript, "seed {seed}: transcripts differ");
        ensure!(bytes(&remote.transcript.answers) == bytes(&local.transcript.answers), "seed {seed}: bytes differ");
    }
    for s in servers {
        s.shutdown().map_err(|e| e.to_string())?;
    }
    Ok("20 seeds byte-identical over loopback".into())
}

fn main() -> ExitCode {
    let release = !cfg!(debug_assertions);
    let criteria: [(&str, Check, Duration); 9] = [
        ("round-trip correctness", c1_roundtrip, Duration::from_secs(5)),
        ("petersen row", c2_petersen_row, Duration::from_secs(120)),
        ("support and closed form", c3_support, Duration::from_secs(300)),
        ("rank attack leakage", c4_rank_attack, Duration::from_secs(60)),
        ("rate bound", c5_bounds, Duration::from_secs(60)),
        ("r-replication", c6_additive, Duration::from_secs(60)),
        ("reduction", c7_reduction, Duration::from_secs(60)),
        ("coded storage", c8_coded, Duration::from_secs(600)),
        ("networked mode", c9_network, Duration::from_secs(30)),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if release && elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} [{elapsed:.2?}] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name} [{elapsed:.2?}] {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
