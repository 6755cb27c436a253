use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ngf::datasets::{dataset_paths, load_citation, FeatureMode};
use ngf::experiments::{
    config_keys, exp_classify, exp_denoise, exp_filter_error, exp_perturb_classify, load_config, to_csv,
    ClassifyConfig, ConfigFile, DenoiseConfig, FilterErrorConfig, RunRecord, DATA_DIR_ENV,
};
use ngf::filters::{build_classical, build_ngf, parse_coeffs, FilterSpec};
use ngf::graph::{bfs_distances, generate_er, generate_sbm, generate_small_world, graph_metrics, khop_stack, Graph, GsoChoice, GsoKind};
use ngf::io::write_atomic;
use ngf::{Error, Result};

#[derive(Parser)]
#[command(name = "ngf", version, about = "Neighborhood and classical graph filters, graph networks and their experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random graph and write it as an edge list.
    GenGraph(GenGraph),
    /// Write the k-hop adjacency matrices of a graph.
    Khop(Khop),
    /// Build a filter matrix from a graph and coefficients.
    BuildFilter(BuildFilter),
    /// Filter error under topology perturbation, per number of taps.
    #[command(after_help = keys_help::<FilterErrorConfig>())]
    FilterError(Experiment),
    /// Graph signal denoising by early-stopped overfitting.
    #[command(after_help = keys_help::<DenoiseConfig>())]
    Denoise(Experiment),
    /// Node classification accuracy per number of taps.
    #[command(after_help = keys_help::<ClassifyConfig>())]
    Classify(Experiment),
    /// Node classification accuracy as a function of topology perturbation.
    #[command(after_help = keys_help::<ClassifyConfig>())]
    PerturbSweep(Experiment),
    /// Load a citation dataset and report its size and largest component.
    DatasetInfo(DatasetInfo),
}

#[derive(Args)]
struct Experiment {
    /// TOML config file; keys not set keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads. The output does not depend on this.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// `key=value` overrides applied after the config file, e.g. `seed=7` or `synthetic.n=600`.
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Er,
    Sbm,
    SmallWorld,
}

#[derive(Args)]
struct GenGraph {
    #[arg(long, value_enum, default_value_t = Family::Er)]
    family: Family,
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Edge probability (er).
    #[arg(long, default_value_t = 0.15)]
    p: f64,
    /// Number of communities (sbm).
    #[arg(long, default_value_t = 8)]
    communities: usize,
    /// Intra-community edge probability (sbm).
    #[arg(long, default_value_t = 0.3)]
    p_in: f64,
    /// Inter-community edge probability (sbm).
    #[arg(long, default_value_t = 0.0075)]
    p_out: f64,
    /// Ring neighbors on each side (small-world).
    #[arg(long, default_value_t = 4)]
    k_ring: usize,
    /// Rewiring probability (small-world).
    #[arg(long, default_value_t = 0.15)]
    beta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Khop {
    /// Edge list file.
    #[arg(long)]
    graph: PathBuf,
    /// Largest hop count to write; defaults to the diameter.
    #[arg(long)]
    kmax: Option<usize>,
    /// CSV with one `k,i,j` row per nonzero entry.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Classical,
    Neighborhood,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shift {
    Adjacency,
    Laplacian,
}

#[derive(Args)]
struct BuildFilter {
    /// Edge list file.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Neighborhood)]
    kind: Kind,
    /// Comma-separated coefficients `h_0,h_1,...`.
    #[arg(long, allow_hyphen_values = true)]
    coeffs: String,
    /// Shift operator of a classical filter.
    #[arg(long, value_enum, default_value_t = Shift::Adjacency)]
    gso: Shift,
    /// Scale the shift operator by its spectral radius.
    #[arg(long)]
    normalize: bool,
    /// Dense matrix as CSV, one row per line.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Features {
    Binary,
    Raw,
}

#[derive(Args)]
struct DatasetInfo {
    /// `.content` file (or the Pubmed node table).
    #[arg(long, requires = "cites", conflicts_with = "name")]
    content: Option<PathBuf>,
    /// `.cites` file (or the Pubmed directed citation table).
    #[arg(long, requires = "content")]
    cites: Option<PathBuf>,
    /// Dataset under the data directory: cora, citeseer or pubmed.
    #[arg(long)]
    name: Option<String>,
    /// Data directory; defaults to the environment variable NGF_DATA_DIR.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Features::Binary)]
    features: Features,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn keys_help<T: ConfigFile>() -> String {
    let mut s = String::from("Config keys (defaults):\n");
    for (k, v) in config_keys::<T>() {
        let _ = writeln!(s, "  {k} = {v}");
    }
    s
}

fn run_experiment<T: ConfigFile>(args: &Experiment, exp: fn(&T, usize) -> Result<Vec<RunRecord>>) -> Result<()> {
    let cfg: T = load_config(args.config.as_deref(), &args.overrides)?;
    if args.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let records = exp(&cfg, args.jobs)?;
    write_atomic(&args.out, to_csv(&records).as_bytes())?;
    eprintln!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

fn read_graph(path: &Path) -> Result<Graph> {
    Graph::read_edge_list(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read {}: {io}", path.display())),
        e => e,
    })
}

fn gen_graph(a: &GenGraph) -> Result<()> {
    let g = match a.family {
        Family::Er => generate_er(a.n, a.p, a.seed)?,
        Family::Sbm => generate_sbm(a.n, a.communities, a.p_in, a.p_out, a.seed)?.graph,
        Family::SmallWorld => generate_small_world(a.n, a.k_ring, a.beta, a.seed)?,
    };
    write_atomic(&a.out, g.to_edge_list().as_bytes())?;
    eprintln!("n={} edges={}", g.n(), g.edge_count());
    Ok(())
}

fn khop(a: &Khop) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let diameter = bfs_distances(&g).diameter().unwrap_or(0);
    let stack = khop_stack(&g, a.kmax.unwrap_or(diameter));
    let mut out = String::from("k,i,j\n");
    for (k, layer) in stack.layers().iter().enumerate() {
        for i in 0..layer.n() {
            for j in layer.row_ones(i) {
                let _ = writeln!(out, "{k},{i},{j}");
            }
        }
    }
    write_atomic(&a.out, out.as_bytes())?;
    println!("diameter={diameter} matrices={}", stack.len());
    Ok(())
}

fn build_filter(a: &BuildFilter) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let coeffs = parse_coeffs(&a.coeffs).map_err(|e| Error::Config(e.to_string()))?;
    let filter = match a.kind {
        Kind::Neighborhood => build_ngf(&khop_stack(&g, coeffs.len() - 1), &coeffs)?,
        Kind::Classical => {
            let kind = match a.gso {
                Shift::Adjacency => GsoKind::Adjacency,
                Shift::Laplacian => GsoKind::Laplacian,
            };
            build_classical(&g, &FilterSpec::classical(coeffs, GsoChoice { kind, normalize: a.normalize }))?
        }
    };
    let mut out = String::new();
    for row in filter.matrix().rows() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_atomic(&a.out, out.as_bytes())?;
    Ok(())
}

fn dataset_info(a: &DatasetInfo) -> Result<()> {
    let (content, cites) = match (&a.content, &a.cites, &a.name) {
        (Some(c), Some(r), _) => (c.clone(), r.clone()),
        (_, _, Some(name)) => {
            let dir = match &a.data_dir {
                Some(d) => d.clone(),
                None => std::env::var_os(DATA_DIR_ENV)
                    .map(PathBuf::from)
                    .ok_or_else(|| Error::Config(format!("--name needs --data-dir or {DATA_DIR_ENV}")))?,
            };
            dataset_paths(&dir, name)
        }
        _ => return Err(Error::Config("give --content and --cites, or --name".into())),
    };
    let mode = match a.features {
        Features::Binary => FeatureMode::Binary,
        Features::Raw => FeatureMode::Raw,
    };
    let (ds, report) = load_citation(&content, &cites, mode)?;
    let lcc = ds.largest_component()?;
    let m = graph_metrics(&lcc.graph)?;
    println!("n={} features={} classes={} edges={}", ds.n(), ds.features.ncols(), ds.num_classes(), ds.graph.edge_count());
    println!(
        "largest component: n={} edges={} diameter={} radius={}",
        lcc.n(),
        lcc.graph.edge_count(),
        m.diameter,
        m.radius
    );
    println!(
        "components={} unknown_citations_dropped={} self_citations_dropped={} duplicate_citations={}",
        report.components, report.unknown_citations_dropped, report.self_citations_dropped, report.duplicate_citations
    );
    if let Some(out) = &a.out {
        let json = serde_json::json!({ "load": report, "largest_component": m });
        write_atomic(out, serde_json::to_string_pretty(&json)?.as_bytes())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::GenGraph(a) => gen_graph(a),
        Command::Khop(a) => khop(a),
        Command::BuildFilter(a) => build_filter(a),
        Command::FilterError(a) => run_experiment::<FilterErrorConfig>(a, exp_filter_error),
        Command::Denoise(a) => run_experiment::<DenoiseConfig>(a, exp_denoise),
        Command::Classify(a) => run_experiment::<ClassifyConfig>(a, exp_classify),
        Command::PerturbSweep(a) => run_experiment::<ClassifyConfig>(a, exp_perturb_classify),
        Command::DatasetInfo(a) => dataset_info(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
