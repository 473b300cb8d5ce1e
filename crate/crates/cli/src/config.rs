use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, Result};
use graph_pir::coded::{CodedLayout, MdsCode, Partition};
use graph_pir::field::Field;
use graph_pir::graphs::{Family, StorageGraph};
use graph_pir::storage::{random_dataset, Dataset};
use rand_chacha::ChaCha8Rng;

/// A bad flag, file or parameter combination. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(UsageError(msg.into()))
}

pub fn usage_from<E: fmt::Display>(e: E) -> anyhow::Error {
    usage(e.to_string())
}

/// A storage graph, plus the coded layout when the source names one.
pub struct GraphSource {
    pub name: String,
    pub graph: StorageGraph,
    pub layout: Option<CodedLayout>,
}

/// `--graph` accepts a family name, `cyclic-matching:S`, or a path to a graph
/// file.
pub fn load_graph(spec: &str) -> Result<GraphSource> {
    if let Some(s) = spec.strip_prefix("cyclic-matching:") {
        let servers: usize = s.trim().parse().map_err(|_| usage(format!("bad server count in `{spec}`")))?;
        let layout = CodedLayout::cyclic_matching(servers).map_err(usage_from)?;
        return Ok(GraphSource { name: spec.to_string(), graph: layout.graph(), layout: Some(layout) });
    }
    if let Ok(fam) = Family::from_str(spec) {
        let graph = fam.build().map_err(usage_from)?;
        return Ok(GraphSource { name: fam.to_string(), graph, layout: None });
    }
    if Path::new(spec).is_file() {
        let text = fs::read_to_string(spec).map_err(|e| usage(format!("cannot read {spec}: {e}")))?;
        let graph = StorageGraph::parse(&text).map_err(|e| usage(format!("{spec}: {e}")))?;
        return Ok(GraphSource { name: spec.to_string(), graph, layout: None });
    }
    Err(usage(format!("`{spec}` is neither a known graph family nor a readable file")))
}

/// The dataset from `--dataset`, or a uniform one drawn from `rng`.
pub fn load_dataset(path: Option<&Path>, q: Option<u64>, files: usize, f: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
            let data = Dataset::parse(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            if let Some(q) = q.filter(|&q| q != data.field().modulus()) {
                return Err(usage(format!("--q {q} disagrees with the dataset's q = {}", data.field().modulus())));
            }
            if data.files() != files {
                return Err(usage(format!("the dataset has {} files, the graph {files}", data.files())));
            }
            Ok(data)
        }
        None => {
            let field = Field::new(q.unwrap_or(5)).map_err(usage_from)?;
            if f == 0 {
                return Err(usage("--f must be positive"));
            }
            Ok(random_dataset(files, f, field, rng))
        }
    }
}

/// Comma-separated 1-based indices below `bound`, returned 0-based.
pub fn parse_indices(text: &str, bound: usize, what: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            let v: usize = t.trim().parse().map_err(|_| usage(format!("bad {what} `{t}`")))?;
            if v == 0 || v > bound {
                return Err(usage(format!("{what} {v} is outside 1..={bound}")));
            }
            Ok(v - 1)
        })
        .collect()
}

/// Parts separated by `;`, each a comma list of 1-based servers.
pub fn parse_partition(text: &str, servers: usize) -> Result<Partition> {
    let parts = text.split(';').map(|p| parse_indices(p, servers, "server")).collect::<Result<Vec<_>>>()?;
    Partition::new(servers, parts).map_err(usage_from)
}

/// The coded layout: the named one, or the graph's hyperedges placed by
/// `partition` (codeword symbol `m` goes to the hyperedge's server in part
/// `m`).
pub fn coded_layout(source: &GraphSource, partition: Option<&str>, n: usize) -> Result<CodedLayout> {
    let g = &source.graph;
    let partition = match (partition, &source.layout) {
        (Some(text), _) => parse_partition(text, g.servers())?,
        (None, Some(layout)) => return Ok(layout.clone()),
        (None, None) => Partition::contiguous(g.servers(), n).map_err(usage_from)?,
    };
    if partition.parts().len() != n {
        return Err(usage(format!("the partition has {} parts but N = {n}", partition.parts().len())));
    }
    let mut assignment = Vec::with_capacity(g.files());
    for (i, e) in g.edges().iter().enumerate() {
        let mut row = vec![usize::MAX; n];
        for &v in e {
            row[partition.part_of(v)] = v;
        }
        if e.len() != n || row.contains(&usize::MAX) {
            return Err(usage(format!("file {} does not have one server in each of the {n} parts", i + 1)));
        }
        assignment.push(row);
    }
    CodedLayout::new(partition, assignment).map_err(usage_from)
}

/// `[I | 1]` when `K = N - 1`, Reed-Solomon otherwise.
pub fn mds_code(n: usize, k: usize, field: Field) -> Result<MdsCode> {
    if k == 0 || k >= n {
        return Err(usage(format!("need 1 <= K < N, got N = {n}, K = {k}")));
    }
    if k + 1 == n {
        Ok(MdsCode::parity(k, field))
    } else {
        MdsCode::reed_solomon(n, k, field).map_err(usage_from)
    }
}
