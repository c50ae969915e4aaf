//! Command-line front end. Results go to standard output, diagnostics to
//! standard error.
//!
//! Exit codes: 0 success, 1 usage or per-line errors, 2 unreadable or
//! malformed input, 3 computation failure.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::codingtree::CodingTree;
use crate::error::Error;
use crate::flow::{visit_rates, FlowConfig, FlowNetwork};
use crate::graph::{generate_crossed_k_regular, largest_weakly_connected_component, parse_edge_list, Graph, NodeId};
use crate::linkpred::{evaluate, EvalConfig, Method};
use crate::optimizer::optimize_two_level;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mapsim", version, about = "Map equation node similarities and community detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Find the best two-level partition and write its coding tree.
    Partition {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output tree file.
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Print the codelength of a tree file on a network.
    Codelength {
        #[command(flatten)]
        input: GraphInput,
        tree: PathBuf,
    },
    /// Print similarity and description length of node pairs.
    Score {
        #[command(flatten)]
        input: GraphInput,
        tree: PathBuf,
        /// File of "u v" lines.
        #[arg(long, conflicts_with = "pair", required_unless_present = "pair")]
        pairs: Option<PathBuf>,
        #[arg(long, num_args = 2, value_names = ["U", "V"])]
        pair: Option<Vec<NodeId>>,
    },
    /// Cross-validated link prediction.
    Evaluate {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
        folds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        /// mapsim or mapsim1 (one-module tree).
        #[arg(long, default_value = "mapsim", value_parser = parse_method)]
        method: Method,
        /// Output JSON report.
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Write the edge list of a crossed k-regular graph.
    Generate {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        degree: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output edge list; standard output if omitted.
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct GraphInput {
    /// Edge list with "source target [weight]" lines.
    edges: PathBuf,
    #[arg(long)]
    directed: bool,
    /// Teleportation probability for directed flow.
    #[arg(long, default_value_t = 0.15)]
    teleport: f64,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn input(path: &Path, err: impl std::fmt::Display) -> Self {
        Self { code: EXIT_INPUT, message: format!("{}: {err}", path.display()) }
    }

    fn compute(err: impl std::fmt::Display) -> Self {
        Self { code: EXIT_COMPUTE, message: err.to_string() }
    }
}

type CmdResult = Result<i32, Failure>;

/// Runs the command line `args` (including the program name) and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(f) = configure_threads() {
        eprintln!("error: {}", f.message);
        return f.code;
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Partition { input, trials, seed, output } => cmd_partition(&input, trials as usize, seed, &output, &mut out),
        Command::Codelength { input, tree } => cmd_codelength(&input, &tree, &mut out),
        Command::Score { input, tree, pairs, pair } => cmd_score(&input, &tree, pairs.as_deref(), pair, &mut out),
        Command::Evaluate { input, folds, seed, trials, method, output } => {
            let cfg = EvalConfig {
                folds: folds as usize,
                seed,
                trials: trials as usize,
                method,
                teleport_probability: input.teleport,
                ..EvalConfig::default()
            };
            cmd_evaluate(&input, &cfg, output.as_deref(), &mut out)
        }
        Command::Generate { nodes, degree, seed, output } => cmd_generate(nodes, degree, seed, output.as_deref(), &mut out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("MAPSIM_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::usage(format!("MAPSIM_THREADS must be a positive integer, got {value:?}")))?;
    // a pool that already exists (repeated in-process runs) is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn load_graph(input: &GraphInput) -> Result<Graph, Failure> {
    let file = File::open(&input.edges).map_err(|e| Failure::input(&input.edges, e))?;
    let g = parse_edge_list(BufReader::new(file), input.directed).map_err(|e| Failure::input(&input.edges, e))?;
    if g.node_count() == 0 {
        return Err(Failure::input(&input.edges, "no edges"));
    }
    let lwcc = largest_weakly_connected_component(&g).map_err(Failure::compute)?;
    if lwcc.node_count() < g.node_count() {
        eprintln!(
            "note: kept the largest weakly connected component ({} of {} nodes)",
            lwcc.node_count(),
            g.node_count()
        );
    }
    Ok(lwcc)
}

fn flow_of(g: &Graph, input: &GraphInput) -> Result<FlowNetwork, Failure> {
    let cfg = FlowConfig { teleport_probability: input.teleport, ..FlowConfig::default() };
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    visit_rates(g, &cfg).map_err(Failure::compute)
}

fn load_tree(path: &Path, flow: &FlowNetwork) -> Result<CodingTree, Failure> {
    let file = File::open(path).map_err(|e| Failure::input(path, e))?;
    CodingTree::parse_tree(BufReader::new(file), flow).map_err(|e| Failure::input(path, e))
}

fn write_file<F>(path: &Path, body: F) -> Result<(), Failure>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let file = File::create(path).map_err(|e| Failure::input(path, e))?;
    let mut sink = BufWriter::new(file);
    body(&mut sink).and_then(|_| sink.flush()).map_err(|e| Failure::input(path, e))
}

fn emit(out: &mut impl Write, line: &str) -> Result<(), Failure> {
    writeln!(out, "{line}").map_err(|e| Failure { code: EXIT_INPUT, message: format!("stdout: {e}") })
}

fn cmd_partition(input: &GraphInput, trials: usize, seed: u64, output: &Path, out: &mut impl Write) -> CmdResult {
    let g = load_graph(input)?;
    let flow = flow_of(&g, input)?;
    let best = optimize_two_level(&flow, seed, trials).map_err(Failure::compute)?;
    let tree = CodingTree::build(&flow, &best.partition).map_err(Failure::compute)?;
    write_file(output, |sink| tree.write_tree(sink))?;
    emit(out, &format!("codelength={:.6} modules={}", best.codelength, best.module_count))?;
    Ok(EXIT_OK)
}

fn cmd_codelength(input: &GraphInput, tree: &Path, out: &mut impl Write) -> CmdResult {
    let g = load_graph(input)?;
    let flow = flow_of(&g, input)?;
    let tree = load_tree(tree, &flow)?;
    emit(out, &format!("codelength={:.6}", tree.codelength()))?;
    Ok(EXIT_OK)
}

/// `similarity bits` columns of a score line.
pub fn format_score(similarity: f64, bits: f64) -> String {
    let bits = if bits.is_infinite() { "inf".to_string() } else { format!("{bits:.6}") };
    format!("{similarity:e} {bits}")
}

fn cmd_score(
    input: &GraphInput,
    tree_path: &Path,
    pairs_path: Option<&Path>,
    pair: Option<Vec<NodeId>>,
    out: &mut impl Write,
) -> CmdResult {
    let g = load_graph(input)?;
    let flow = flow_of(&g, input)?;
    let tree = load_tree(tree_path, &flow)?;
    let lines: Vec<(usize, String)> = match (pairs_path, pair) {
        (Some(path), _) => {
            let file = File::open(path).map_err(|e| Failure::input(path, e))?;
            let mut lines = Vec::new();
            for (i, line) in BufReader::new(file).lines().enumerate() {
                lines.push((i + 1, line.map_err(|e| Failure::input(path, e))?));
            }
            lines
        }
        (None, Some(p)) => vec![(1, format!("{} {}", p[0], p[1]))],
        (None, None) => return Err(Failure::usage("either --pairs or --pair is required")),
    };
    let mut failed = false;
    for (lineno, line) in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let ids: Vec<Option<NodeId>> = trimmed.split_whitespace().map(|t| t.parse().ok()).collect();
        let (u, v) = match ids.as_slice() {
            [Some(u), Some(v)] => (*u, *v),
            _ => {
                eprintln!("line {lineno}: expected two node ids");
                failed = true;
                continue;
            }
        };
        match tree.mapsim(u, v).and_then(|s| Ok((s, tree.description_length(u, v)?))) {
            Ok((sim, bits)) => emit(out, &format!("{u} {v} {}", format_score(sim, bits)))?,
            Err(e) => {
                eprintln!("line {lineno}: {e}");
                failed = true;
            }
        }
    }
    Ok(if failed { EXIT_USAGE } else { EXIT_OK })
}

fn cmd_evaluate(input: &GraphInput, cfg: &EvalConfig, output: Option<&Path>, out: &mut impl Write) -> CmdResult {
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let g = load_graph(input)?;
    let report = evaluate(&g, cfg).map_err(Failure::compute)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = output {
        let json = report.to_json().map_err(Failure::compute)?;
        write_file(path, |sink| writeln!(sink, "{json}"))?;
    }
    emit(
        out,
        &format!(
            "auc={:.6}±{:.6} aupr={:.6}±{:.6}",
            report.auc_mean, report.auc_std, report.aupr_mean, report.aupr_std
        ),
    )?;
    Ok(EXIT_OK)
}

fn cmd_generate(nodes: usize, degree: usize, seed: u64, output: Option<&Path>, out: &mut impl Write) -> CmdResult {
    if nodes < 4 || nodes % 2 != 0 {
        return Err(Failure::usage(format!("--nodes must be an even number of at least 4, got {nodes}")));
    }
    let half = nodes / 2;
    if degree == 0 || degree >= half || (degree * half) % 2 != 0 {
        return Err(Failure::usage(format!("no {degree}-regular graph on {half} nodes")));
    }
    let g = generate_crossed_k_regular(nodes, degree, seed).map_err(Failure::compute)?;
    match output {
        Some(path) => write_file(path, |sink| g.write_edge_list(sink))?,
        None => g
            .write_edge_list(&mut *out)
            .map_err(|e| Failure { code: EXIT_INPUT, message: format!("stdout: {e}") })?,
    }
    Ok(EXIT_OK)
}
