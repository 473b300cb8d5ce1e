mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use graph_pir::analysis::{
    candidate_set, check_support, observe, rank_attack, verify_acyclic_privacy, verify_additive_privacy,
    verify_coded_privacy, AnalysisError, DEFAULT_BUDGET,
};
use graph_pir::bounds::{achieved_rate, degree_bound, dual_certificate, lp_optimum, LP_MAX_SERVERS};
use graph_pir::coded::{coded_retrieve, encode_and_disperse, plan_rounds, CodedLayout, MdsCode, SecretMode};
use graph_pir::field::{Field, Fp};
use graph_pir::graphs::{Family, StorageGraph};
use graph_pir::net::{client_coded_retrieve, client_retrieve, parse_endpoints, serve};
use graph_pir::pir2::{gen_queries, retrieve};
use graph_pir::pir_r::retrieve_r;
use graph_pir::reduction::{find_choice_no_short_cycles, random_choice, reduce_and_retrieve};
use graph_pir::storage::{disperse, Dataset, ServerContents};
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{coded_layout, load_dataset, load_graph, mds_code, parse_indices, usage, usage_from, UsageError};

#[derive(Parser)]
#[command(name = "graph-pir", version, about = "Private information retrieval over graph-based storage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one retrieval end to end and report the accounting.
    Retrieve(RetrieveArgs),
    /// What a colluding server set learns from one simulated query.
    Analyze(AnalyzeArgs),
    /// Rate upper bounds for a 2-replication graph.
    Bound(BoundArgs),
    /// Exhaustive privacy and support checks on a small system.
    Verify(VerifyArgs),
    /// Recompute the Petersen and complete bipartite rows of the rate table.
    #[command(alias = "table1")]
    RateTable(OutputArgs),
    /// Serve one server's contents over TCP until killed.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Protocol {
    /// 2-replication with the signed incidence matrix.
    Rep2,
    /// r-replication with additive shares.
    #[value(name = "repR", alias = "rep-r")]
    RepR,
    /// Prune hyperedges to one pair each, then run rep2.
    Reduced,
    /// MDS-coded storage.
    Coded,
}

#[derive(Args)]
struct GraphArgs {
    /// Family (`petersen`, `cycle:5`, `complete-bipartite:4,4`, ...),
    /// `cyclic-matching:S`, or a graph file.
    #[arg(long, default_value = "petersen")]
    graph: String,
    /// Field modulus (prime, at least 3). Defaults to 5, or the dataset's.
    #[arg(long)]
    q: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    /// Symbols per file for generated datasets.
    #[arg(long, default_value_t = 4)]
    f: usize,
    /// Dataset file; generated from `--seed` when absent.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct CodedArgs {
    /// Code length; defaults to the layout's part count.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Code dimension; defaults to `N - 1`.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Parts as 1-based server lists, e.g. `1,2;3,4;5,6`.
    #[arg(long)]
    partition: Option<String>,
    /// Reuse the first round's secrets in later rounds.
    #[arg(long)]
    reuse_secrets: bool,
}

#[derive(Args)]
struct RetrieveArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    coded: CodedArgs,
    #[arg(long, value_enum, default_value = "rep2")]
    protocol: Protocol,
    /// 1-based file index; a comma list for coded batches.
    #[arg(long, default_value = "1")]
    phi: String,
    /// For `reduced`: require the pruned graph's girth to exceed this.
    #[arg(long)]
    girth: Option<usize>,
    /// Endpoint file (one `host:port` per line) for networked retrieval.
    #[arg(long)]
    endpoints: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// 1-based colluding servers; all servers when absent.
    #[arg(long)]
    colluders: Option<String>,
    #[arg(long, default_value_t = 1)]
    phi: usize,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, default_value = "petersen")]
    graph: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    coded: CodedArgs,
    #[arg(long, value_enum, default_value = "rep2")]
    protocol: Protocol,
    /// Largest number of tuples any single enumeration may visit.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Size of the colluding sets checked; defaults to girth - 1 for rep2
    /// and 2 for coded.
    #[arg(long)]
    colluders: Option<usize>,
    /// Skip the whole-graph support check (it enumerates every variable).
    #[arg(long)]
    no_support: bool,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    coded: CodedArgs,
    #[arg(long, value_enum, default_value = "rep2")]
    protocol: Protocol,
    /// 1-based server index.
    #[arg(long)]
    server: usize,
    /// Address to bind; defaults to the server's line of `--endpoints`.
    #[arg(long)]
    listen: Option<String>,
    #[arg(long)]
    endpoints: Option<PathBuf>,
}

/// `key=value` lines.
#[derive(Default)]
struct Report(String);

impl Report {
    fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key}={value}");
    }

    fn emit(&self, output: Option<&PathBuf>) -> Result<()> {
        print!("{}", self.0);
        if let Some(path) = output {
            fs::write(path, &self.0).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn symbols(xs: &[Fp]) -> String {
    xs.iter().map(|x| x.value().to_string()).collect::<Vec<_>>().join(" ")
}

fn one_based(xs: &[usize]) -> String {
    xs.iter().map(|x| (x + 1).to_string()).collect::<Vec<_>>().join(",")
}

fn field(q: Option<u64>) -> Result<Field> {
    Field::new(q.unwrap_or(5)).map_err(usage_from)
}

fn rng(seed: Option<u64>) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.unwrap_or(0))
}

fn read_endpoints(path: &PathBuf) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_endpoints(&text))
}

struct CodedSetup {
    code: MdsCode,
    layout: CodedLayout,
    mode: SecretMode,
}

fn coded_setup(source: &config::GraphSource, args: &CodedArgs, field: Field) -> Result<CodedSetup> {
    let n = args.n.or(source.layout.as_ref().map(|l| l.partition.parts().len())).unwrap_or(3);
    let layout = coded_layout(source, args.partition.as_deref(), n)?;
    if layout.partition.parts().len() != n {
        return Err(usage(format!("the layout has {} parts but N = {n}", layout.partition.parts().len())));
    }
    let code = mds_code(n, args.k.unwrap_or(n - 1), field)?;
    let mode = if args.reuse_secrets { SecretMode::Reuse } else { SecretMode::FreshPerRound };
    Ok(CodedSetup { code, layout, mode })
}

fn cmd_retrieve(args: &RetrieveArgs) -> Result<bool> {
    let source = load_graph(&args.graph.graph)?;
    let g = &source.graph;
    let mut rng = rng(args.graph.seed);
    let data = load_dataset(args.data.dataset.as_deref(), args.graph.q, g.files(), args.data.f, &mut rng)?;
    let field = data.field();
    let phis = parse_indices(&args.phi, g.files(), "file")?;
    let endpoints = args.endpoints.as_ref().map(read_endpoints).transpose()?;
    if args.protocol != Protocol::Coded && phis.len() != 1 {
        return Err(usage("only the coded protocol retrieves several files at once"));
    }
    if endpoints.is_some() && matches!(args.protocol, Protocol::RepR | Protocol::Reduced) {
        return Err(usage("networked retrieval supports rep2 and coded"));
    }
    let phi = phis[0];
    let mut report = Report::default();
    report.put("protocol", args.protocol.to_possible_value().unwrap().get_name());
    report.put("graph", &source.name);
    report.put("servers", g.servers());
    report.put("files", g.files());
    report.put("q", field.modulus());
    report.put("f", data.file_len());
    report.put("phi", one_based(&phis));
    let (recovered, upload, download): (Vec<Vec<Fp>>, usize, usize) = match args.protocol {
        Protocol::Rep2 => match &endpoints {
            Some(eps) => {
                let r = client_retrieve(eps, g, phi, field, &mut rng)?;
                (vec![r.value], r.transcript.upload, r.transcript.download)
            }
            None => {
                let r = retrieve(g, &data, phi, &mut rng).map_err(usage_from)?;
                (vec![r.value], r.transcript.upload, r.transcript.download)
            }
        },
        Protocol::RepR => {
            let r = retrieve_r(g, &data, phi, &mut rng).map_err(usage_from)?;
            report.put("shares", r.shares.shares());
            (vec![r.value], r.transcript.upload, r.transcript.download)
        }
        Protocol::Reduced => {
            let cm = g.to_colored();
            let choice = match args.girth {
                Some(girth) => match find_choice_no_short_cycles(&cm, girth) {
                    Some(c) => c,
                    None => {
                        report.put("error", format!("no choice function leaves girth above {girth}"));
                        report.emit(args.graph.output.as_ref())?;
                        return Ok(false);
                    }
                },
                None => random_choice(&cm, &mut rng).map_err(usage_from)?,
            };
            let pruned = choice.pruned(&cm);
            for (i, e) in pruned.edges().iter().enumerate() {
                report.put(&format!("choice.{}", i + 1), one_based(e));
            }
            report.put("pruned_girth", pruned.girth().map_or("none".to_string(), |x| x.to_string()));
            let r = reduce_and_retrieve(g, &choice, &data, phi, &mut rng).map_err(usage_from)?;
            (vec![r.value], r.transcript.upload, r.transcript.download)
        }
        Protocol::Coded => {
            let setup = coded_setup(&source, &args.coded, field)?;
            let plan = plan_rounds(setup.code.length(), setup.code.dimension());
            report.put("N", setup.code.length());
            report.put("K", setup.code.dimension());
            report.put("rounds", plan.rounds());
            report.put("batch", plan.batch());
            if data.file_len() % setup.code.dimension() != 0 {
                return Err(usage(format!("--f {} is not divisible by K", data.file_len())));
            }
            let system = encode_and_disperse(&data, &setup.code, &setup.layout).map_err(usage_from)?;
            report.put("storage_overhead", system.storage_overhead());
            match &endpoints {
                Some(eps) => {
                    let files = client_coded_retrieve(eps, &setup.code, &setup.layout, &phis, setup.mode, &mut rng)?;
                    // Every server answers `f / K` symbols per round.
                    let per = data.file_len() / setup.code.dimension();
                    let download = plan.rounds() * g.servers() * per;
                    let upload = plan.rounds() * g.edges().iter().map(Vec::len).sum::<usize>();
                    (files, upload, download)
                }
                None => {
                    let r = coded_retrieve(&system, &phis, setup.mode, &mut rng).map_err(usage_from)?;
                    (r.files, r.upload, r.download)
                }
            }
        }
    };
    let mut correct = true;
    for (k, (&phi, value)) in phis.iter().zip(&recovered).enumerate() {
        let key = if recovered.len() == 1 { "recovered".to_string() } else { format!("recovered.{}", k + 1) };
        report.put(&key, symbols(value));
        correct &= value.as_slice() == data.file(phi);
    }
    report.put("correct", correct);
    report.put("upload", upload);
    report.put("download", download);
    report.put("rate", Ratio::new((phis.len() * data.file_len()) as u64, download as u64));
    report.emit(args.graph.output.as_ref())?;
    Ok(correct)
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<bool> {
    let source = load_graph(&args.graph.graph)?;
    let g = &source.graph;
    if !g.is_two_uniform() {
        return Err(usage("analyze needs a graph storing every file twice"));
    }
    let field = field(args.graph.q)?;
    let phi = parse_indices(&args.phi.to_string(), g.files(), "file")?[0];
    let set = match &args.colluders {
        Some(text) => parse_indices(text, g.servers(), "server")?,
        None => (0..g.servers()).collect(),
    };
    let (q, _) = gen_queries(g, phi, field, &mut rng(args.graph.seed)).map_err(usage_from)?;
    let observed = observe(&q, g, &set).map_err(usage_from)?;
    let attack = rank_attack(&observed, g, &set).map_err(usage_from)?;
    let predicted = candidate_set(g, &set, phi).map_err(usage_from)?;
    let mut report = Report::default();
    report.put("graph", &source.name);
    report.put("q", field.modulus());
    report.put("phi", phi + 1);
    report.0.push_str(&attack.to_text());
    let consistent = predicted == attack.candidates && attack.candidates.contains(&phi);
    report.put("predicted_candidates", one_based(&predicted));
    report.put("consistent", consistent);
    report.emit(args.graph.output.as_ref())?;
    Ok(consistent)
}

fn cmd_bound(args: &BoundArgs) -> Result<bool> {
    let source = load_graph(&args.graph)?;
    let g = &source.graph;
    let b = degree_bound(g).map_err(usage_from)?;
    let dual = dual_certificate(g).map_err(usage_from)?;
    let mut report = Report::default();
    report.put("graph", &source.name);
    report.put("servers", g.servers());
    report.put("files", b.files);
    report.put("max_degree", b.max_degree);
    report.put("degree_bound", b.bound);
    if let Some(r) = b.regular_form {
        report.put("regular_bound", r);
    }
    let mut ok = dual.feasible;
    if g.servers() <= LP_MAX_SERVERS {
        let lp = lp_optimum(g).map_err(usage_from)?;
        report.put("lp_optimum", lp);
        report.put("lp_rate_bound", lp.recip());
        ok &= dual.objective <= lp && achieved_rate(g) <= lp.recip() && lp.recip() <= b.bound;
    } else {
        report.put("lp_optimum", "skipped");
    }
    report.put("dual_eta", dual.eta);
    report.put("dual_objective", dual.objective);
    report.put("dual_feasible", dual.feasible);
    report.put("achieved_rate", achieved_rate(g));
    report.put("gap", b.bound / achieved_rate(g));
    report.put("consistent", ok);
    report.emit(args.output.as_ref())?;
    Ok(ok)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Budget overruns are refusals, not failures.
fn refuse(e: AnalysisError) -> anyhow::Error {
    match e {
        AnalysisError::Budget { .. } => usage(format!("refused: {e}")),
        other => other.into(),
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool> {
    let source = load_graph(&args.graph.graph)?;
    let g = &source.graph;
    let field = field(args.graph.q.or(Some(3)))?;
    let mut report = Report::default();
    report.put("graph", &source.name);
    report.put("q", field.modulus());
    let mut all = true;
    let mut record = |report: &mut Report, name: String, ok: bool| {
        all &= ok;
        report.put(&name, if ok { "PASS" } else { "FAIL" });
    };
    match args.protocol {
        Protocol::Rep2 | Protocol::Reduced => {
            if !g.is_two_uniform() {
                return Err(usage("rep2 verification needs a graph storing every file twice"));
            }
            let whole = g.whole();
            for phi in (0..g.files()).filter(|_| !args.no_support) {
                let c = check_support(g, &whole, phi, field, args.budget).map_err(refuse)?;
                record(&mut report, format!("support.phi.{}", phi + 1), c.holds());
            }
            let t = args.colluders.unwrap_or(g.girth().map_or(g.servers(), |x| x - 1));
            report.put("colluders", t);
            let (mut sets, mut private) = (0, true);
            for set in subsets(g.servers(), t) {
                if !g.induced(&set).is_acyclic(g) {
                    return Err(usage(format!("servers {} induce a cycle; pick fewer colluders", one_based(&set))));
                }
                let ok = verify_acyclic_privacy(g, &set, field, args.budget).map_err(refuse)?;
                if !ok {
                    private = false;
                    record(&mut report, format!("privacy.{}", one_based(&set)), false);
                }
                sets += 1;
            }
            record(&mut report, format!("privacy.all_{sets}_sets"), private);
            if g.servers() <= LP_MAX_SERVERS && g.degrees().iter().all(|&d| d > 0) {
                let lp = lp_optimum(g).map_err(usage_from)?;
                let dual = dual_certificate(g).map_err(usage_from)?;
                record(&mut report, "weak_duality".into(), dual.feasible && dual.objective <= lp);
            }
        }
        Protocol::RepR => {
            let ok = verify_additive_privacy(g, field, args.budget).map_err(refuse)?;
            record(&mut report, "additive_privacy".into(), ok);
        }
        Protocol::Coded => {
            let setup = coded_setup(&source, &args.coded, field)?;
            let plan = plan_rounds(setup.code.length(), setup.code.dimension());
            let cm = setup.layout.graph().to_colored();
            let t = args.colluders.unwrap_or(2);
            report.put("colluders", t);
            let (mut checked, mut skipped, mut private) = (0, 0, true);
            for set in subsets(g.servers(), t) {
                if cm.polychromatic_cycle_exists(&set) {
                    skipped += 1;
                    continue;
                }
                let ok = verify_coded_privacy(&setup.layout, &plan, &set, field, args.budget).map_err(refuse)?;
                if !ok {
                    private = false;
                    record(&mut report, format!("coded_privacy.{}", one_based(&set)), false);
                }
                checked += 1;
            }
            report.put("polychromatic_sets_skipped", skipped);
            record(&mut report, format!("coded_privacy.all_{checked}_sets"), private);
        }
    }
    report.put("verdict", if all { "PASS" } else { "FAIL" });
    report.emit(args.graph.output.as_ref())?;
    Ok(all)
}

fn cmd_rate_table(args: &OutputArgs) -> Result<bool> {
    let mut report = Report::default();
    for fam in [Family::Petersen, Family::CompleteBipartite(4, 4)] {
        let g: StorageGraph = fam.build()?;
        let data = Dataset::from_u64(Field::new(5)?, &vec![vec![1]; g.files()])?;
        let r = retrieve(&g, &data, 0, &mut rng(None))?;
        let t = g.girth().map_or(g.servers(), |x| x - 1);
        let _ = writeln!(
            report.0,
            "graph={fam} n={} s={} t={t} d={} rate={}",
            g.files(),
            g.servers(),
            g.max_degree(),
            r.transcript.rate(1)
        );
    }
    report.emit(args.output.as_ref())?;
    Ok(true)
}

fn cmd_serve(args: &ServeArgs) -> Result<bool> {
    let source = load_graph(&args.graph.graph)?;
    let g = &source.graph;
    if args.server == 0 || args.server > g.servers() {
        return Err(usage(format!("--server {} is outside 1..={}", args.server, g.servers())));
    }
    let j = args.server - 1;
    let mut rng = rng(args.graph.seed);
    let data = load_dataset(args.data.dataset.as_deref(), args.graph.q, g.files(), args.data.f, &mut rng)?;
    let contents: ServerContents = match args.protocol {
        Protocol::Rep2 => disperse(g, &data).map_err(usage_from)?.swap_remove(j),
        Protocol::Coded => {
            let setup = coded_setup(&source, &args.coded, data.field())?;
            encode_and_disperse(&data, &setup.code, &setup.layout).map_err(usage_from)?.servers.swap_remove(j)
        }
        _ => return Err(usage("serve supports rep2 and coded")),
    };
    let addr = match (&args.listen, &args.endpoints) {
        (Some(a), _) => a.clone(),
        (None, Some(path)) => read_endpoints(path)?
            .get(j)
            .cloned()
            .ok_or_else(|| usage(format!("the endpoint file has no line {}", j + 1)))?,
        (None, None) => return Err(usage("give --listen or --endpoints")),
    };
    let listener = TcpListener::bind(&addr).map_err(|e| anyhow!("cannot bind {addr}: {e}"))?;
    println!("server={}", j + 1);
    println!("listening={}", listener.local_addr()?);
    io::stdout().flush()?;
    serve(&contents, &listener, &AtomicBool::new(false))?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Verify(a) => cmd_verify(a),
        Command::RateTable(a) => cmd_rate_table(a),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
