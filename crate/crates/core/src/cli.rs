//! Command-line front end: `generate-walks`, `fit`, `assign`, `score` and
//! `pipeline`.
//!
//! Every subcommand accepts `--config FILE` holding `key = value` lines whose
//! keys are flag names without the leading dashes. Flags given on the
//! command line win over the file; a repeated flag keeps its last value.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::community::{assign, node_posteriors, Partition, ScoreReport};
use crate::corpus::{generate_corpus, Corpus};
use crate::error::{Error, Result};
use crate::graph::{read_label_map, Graph};
use crate::hdp::{self, fit_with, perplexity, read_checkpoint, write_checkpoint, GlobalState, HdpConfig};
use crate::io::{open, write_atomic};

/// Fraction of documents, taken from the end of the corpus, held out for
/// perplexity.
pub const HOLDOUT_FRACTION: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(name = "walkcomm", version, about = "Community detection with random walks and an HDP topic model")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads (0 = one per core). Affects speed only.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the random-walk corpus of a graph.
    GenerateWalks(GenerateArgs),
    /// Fit the topic model to a corpus.
    Fit(FitArgs),
    /// Assign every node to its most probable community.
    Assign(AssignArgs),
    /// Score a partition.
    Score(ScoreArgs),
    /// Run all stages with one seed.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WalkCount {
    Absolute(usize),
    PerNode(f64),
}

impl WalkCount {
    pub fn resolve(self, num_nodes: usize) -> usize {
        match self {
            WalkCount::Absolute(n) => n,
            WalkCount::PerNode(m) => (m * num_nodes as f64).round() as usize,
        }
    }
}

impl FromStr for WalkCount {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if let Some(m) = s.strip_suffix(['x', 'X']) {
            let m: f64 = m.parse().map_err(|_| format!("bad walk multiplier {s:?}"))?;
            if !(m > 0.0 && m.is_finite()) {
                return Err(format!("walk multiplier must be positive, got {s:?}"));
            }
            Ok(WalkCount::PerNode(m))
        } else {
            s.parse()
                .map(WalkCount::Absolute)
                .map_err(|_| format!("expected a walk count or an \"Nx\" multiplier, got {s:?}"))
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArg {
    /// File of `key = value` defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct WalkArgs {
    /// Number of walks, or a multiple of the node count such as `5x`.
    #[arg(long)]
    pub walks: Option<WalkCount>,
    /// Expected walk length.
    #[arg(long)]
    pub length: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Corpus-level truncation K.
    #[arg(long)]
    pub topics: Option<usize>,
    /// Document-level truncation T.
    #[arg(long)]
    pub doc_topics: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_local_iters: Option<usize>,
    #[arg(long)]
    pub local_tol: Option<f64>,
    /// Hold out the last 10% of walks and report perplexity after each epoch.
    #[arg(long)]
    pub holdout: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Label map output; defaults to `<out>.map`.
    #[arg(long)]
    pub label_map: Option<PathBuf>,
    #[command(flatten)]
    pub walk: WalkArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Label map of the corpus vocabulary; defaults to `<corpus>.map`.
    #[arg(long)]
    pub label_map: Option<PathBuf>,
    /// Checkpoint output.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct AssignArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Node labels as a `label id` map.
    #[arg(long, required_unless_present = "graph")]
    pub label_map: Option<PathBuf>,
    /// Node labels taken from an edge list; wins over `--label-map`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Partition output.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Partition file of `node_label community_id` lines.
    #[arg(long)]
    pub labels: PathBuf,
    /// Report output.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Directory receiving corpus.txt, corpus.txt.map, model.ckpt, labels.txt
    /// and report.txt.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub config: ConfigArg,
}

const DEFAULT_WALKS: WalkCount = WalkCount::PerNode(5.0);
const DEFAULT_LENGTH: f64 = 100.0;
const DEFAULT_SEED: u64 = 0;

const KNOWN_KEYS: &[&str] = &[
    "walks", "length", "seed", "topics", "doc-topics", "eta", "gamma", "alpha", "batch-size",
    "kappa", "tau", "epochs", "max-local-iters", "local-tol", "holdout",
];

/// Parsed `key = value` file. Keys may use `-` or `_`.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: HashMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno,
                message: "expected \"key = value\"".into(),
            })?;
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("unknown key {key:?}"),
                });
            }
            values.insert(key, (lineno, value.trim().to_string()));
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                ConfigFile::parse(&text).map_err(|e| e.in_file(p))
            }
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, raw)) => raw.parse().map(Some).map_err(|e| Error::Parse {
                line: *line,
                message: format!("{key}: {e}"),
            }),
        }
    }

    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }
}

impl ModelArgs {
    pub fn resolve(&self, file: &ConfigFile) -> Result<HdpConfig> {
        let d = HdpConfig::default();
        let config = HdpConfig {
            corpus_truncation: file.pick(self.topics, "topics", d.corpus_truncation)?,
            doc_truncation: file.pick(self.doc_topics, "doc-topics", d.doc_truncation)?,
            eta: file.pick(self.eta, "eta", d.eta)?,
            gamma: file.pick(self.gamma, "gamma", d.gamma)?,
            alpha: file.pick(self.alpha, "alpha", d.alpha)?,
            batch_size: file.pick(self.batch_size, "batch-size", d.batch_size)?,
            kappa: file.pick(self.kappa, "kappa", d.kappa)?,
            tau: file.pick(self.tau, "tau", d.tau)?,
            epochs: file.pick(self.epochs, "epochs", d.epochs)?,
            max_local_iters: file.pick(self.max_local_iters, "max-local-iters", d.max_local_iters)?,
            local_tol: file.pick(self.local_tol, "local-tol", d.local_tol)?,
        };
        config.validate()?;
        Ok(config)
    }

    fn holdout(&self, file: &ConfigFile) -> Result<bool> {
        Ok(self.holdout || file.get::<bool>("holdout")?.unwrap_or(false))
    }
}

impl WalkArgs {
    fn resolve(&self, file: &ConfigFile) -> Result<(WalkCount, f64)> {
        let walks = file.pick(self.walks, "walks", DEFAULT_WALKS)?;
        let length = file.pick(self.length, "length", DEFAULT_LENGTH)?;
        Ok((walks, length))
    }
}

fn default_map_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".map");
    PathBuf::from(s)
}

fn load_graph(path: &Path) -> Result<Graph> {
    Graph::read_edge_list(open(path)?).map_err(|e| e.in_file(path))
}

fn load_labels(path: &Path) -> Result<Vec<String>> {
    read_label_map(open(path)?).map_err(|e| e.in_file(path))
}

fn load_corpus(path: &Path, vocab_size: usize) -> Result<Corpus> {
    Corpus::read(open(path)?, vocab_size).map_err(|e| match e {
        Error::Corpus { document, message } => Error::Corpus {
            document,
            message: format!("{message} (in {})", path.display()),
        },
        other => other,
    })
}

fn load_model(path: &Path) -> Result<hdp::Checkpoint> {
    read_checkpoint(open(path)?).map_err(|e| match e {
        Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn ensure_distinct(paths: &[&Path]) -> Result<()> {
    for (i, a) in paths.iter().enumerate() {
        if paths[i + 1..].contains(a) {
            return Err(Error::Config(format!("output path {} used twice", a.display())));
        }
    }
    Ok(())
}

fn write_corpus_files(g: &Graph, corpus: &Corpus, out: &Path, map: &Path) -> Result<()> {
    write_atomic(out, |w| corpus.write(w))?;
    write_atomic(map, |w| g.write_label_map(w))
}

fn generate(g: &Graph, walks: WalkCount, length: f64, seed: u64) -> Result<Corpus> {
    let started = Instant::now();
    let d = walks.resolve(g.num_nodes());
    let corpus = generate_corpus(g, d, length, seed)?;
    eprintln!(
        "generated D = {} walks, mean length {:.3}, in {:.2?}",
        corpus.len(),
        corpus.mean_length(),
        started.elapsed()
    );
    Ok(corpus)
}

fn train(corpus: &Corpus, config: &HdpConfig, seed: u64, holdout: bool) -> Result<GlobalState> {
    let started = Instant::now();
    let (train, test) = if holdout {
        let (train, test) = corpus.split_holdout(HOLDOUT_FRACTION)?;
        (train, Some(test).filter(|t| !t.is_empty()))
    } else {
        (corpus.clone(), None)
    };
    let state = fit_with(&train, config, seed, |epoch, state| {
        match &test {
            Some(test) => eprintln!(
                "epoch {epoch}: held-out perplexity {:.4}",
                perplexity(test, state, config)?
            ),
            None => eprintln!("epoch {epoch} done"),
        }
        Ok(())
    })?;
    eprintln!(
        "fitted K = {}, V = {} over {} documents in {:.2?}",
        state.num_topics(),
        state.vocab_size(),
        train.len(),
        started.elapsed()
    );
    Ok(state)
}

fn detect(state: &GlobalState) -> Partition {
    let partition = assign(&node_posteriors(state));
    eprintln!("detected {} communities", partition.num_communities());
    partition
}

fn score(g: &Graph, partition: &Partition, out: &Path) -> Result<()> {
    let report = ScoreReport::compute(g, partition)?;
    eprintln!(
        "modularity {:.6} over {} communities",
        report.modularity,
        report.communities.len()
    );
    let text = report.render();
    write_atomic(out, |w| std::io::Write::write_all(w, text.as_bytes()))
}

fn cmd_generate_walks(args: &GenerateArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.config.as_deref())?;
    let (walks, length) = args.walk.resolve(&file)?;
    let seed = file.pick(args.seed, "seed", DEFAULT_SEED)?;
    let map = args.label_map.clone().unwrap_or_else(|| default_map_path(&args.out));
    ensure_distinct(&[&args.out, &map])?;
    let g = load_graph(&args.graph)?;
    let corpus = generate(&g, walks, length, seed)?;
    write_corpus_files(&g, &corpus, &args.out, &map)
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.config.as_deref())?;
    let config = args.model_args.resolve(&file)?;
    let holdout = args.model_args.holdout(&file)?;
    let seed = file.pick(args.seed, "seed", DEFAULT_SEED)?;
    let map = args.label_map.clone().unwrap_or_else(|| default_map_path(&args.corpus));
    let labels = load_labels(&map)?;
    let corpus = load_corpus(&args.corpus, labels.len())?;
    let state = train(&corpus, &config, seed, holdout)?;
    write_atomic(&args.model, |w| write_checkpoint(w, &config, &state))
}

fn cmd_assign(args: &AssignArgs) -> Result<()> {
    ConfigFile::load(args.config.config.as_deref())?;
    let checkpoint = load_model(&args.model)?;
    let labels = match (&args.graph, &args.label_map) {
        (Some(g), _) => load_graph(g)?.labels().to_vec(),
        (None, Some(m)) => load_labels(m)?,
        (None, None) => return Err(Error::Config("need --graph or --label-map".into())),
    };
    if labels.len() != checkpoint.state.vocab_size() {
        return Err(Error::Mismatch(format!(
            "model has V = {} but the node labels describe {} nodes",
            checkpoint.state.vocab_size(),
            labels.len()
        )));
    }
    let partition = detect(&checkpoint.state);
    write_atomic(&args.out, |w| partition.write(&labels, w))
}

fn cmd_score(args: &ScoreArgs) -> Result<()> {
    ConfigFile::load(args.config.config.as_deref())?;
    let g = load_graph(&args.graph)?;
    let partition = Partition::read(open(&args.labels)?, g.labels()).map_err(|e| e.in_file(&args.labels))?;
    score(&g, &partition, &args.out)
}

fn cmd_pipeline(args: &PipelineArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.config.as_deref())?;
    let (walks, length) = args.walk.resolve(&file)?;
    let config = args.model_args.resolve(&file)?;
    let holdout = args.model_args.holdout(&file)?;
    let seed = file.pick(args.seed, "seed", DEFAULT_SEED)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let corpus_path = args.out_dir.join("corpus.txt");
    let map_path = default_map_path(&corpus_path);

    let g = load_graph(&args.graph)?;
    let corpus = generate(&g, walks, length, seed)?;
    write_corpus_files(&g, &corpus, &corpus_path, &map_path)?;
    let state = train(&corpus, &config, seed, holdout)?;
    write_atomic(&args.out_dir.join("model.ckpt"), |w| write_checkpoint(w, &config, &state))?;
    let partition = detect(&state);
    write_atomic(&args.out_dir.join("labels.txt"), |w| partition.write(g.labels(), w))?;
    score(&g, &partition, &args.out_dir.join("report.txt"))
}

pub fn execute(cli: &Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::GenerateWalks(a) => cmd_generate_walks(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Assign(a) => cmd_assign(a),
        Command::Score(a) => cmd_score(a),
        Command::Pipeline(a) => cmd_pipeline(a),
    })
}

/// Parses `args`, runs the command and maps failures to exit code 2.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("walkcomm").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn walk_count_forms() {
        assert_eq!("640".parse::<WalkCount>().unwrap(), WalkCount::Absolute(640));
        assert_eq!("5x".parse::<WalkCount>().unwrap(), WalkCount::PerNode(5.0));
        assert_eq!(WalkCount::PerNode(5.0).resolve(128), 640);
        assert_eq!(WalkCount::PerNode(2.5).resolve(3), 8);
        assert!("x".parse::<WalkCount>().is_err());
        assert!("-1x".parse::<WalkCount>().is_err());
        assert!("five".parse::<WalkCount>().is_err());
    }

    #[test]
    fn default_model_flags() {
        let cli = parse(&["fit", "--corpus", "c", "--model", "m"]);
        let Command::Fit(f) = cli.command else { panic!() };
        let cfg = f.model_args.resolve(&ConfigFile::default()).unwrap();
        assert_eq!(cfg, HdpConfig::default());
        assert_eq!((cfg.corpus_truncation, cfg.doc_truncation, cfg.batch_size, cfg.epochs), (100, 10, 2, 3));
    }

    #[test]
    fn last_flag_wins() {
        let cli = parse(&["fit", "--corpus", "c", "--model", "m", "--epochs", "1", "--epochs", "3"]);
        let Command::Fit(f) = cli.command else { panic!() };
        assert_eq!(f.model_args.epochs, Some(3));
    }

    #[test]
    fn flags_override_config_file() {
        let file = ConfigFile::parse("# experiment\nepochs = 5\ndoc_topics = 4\nkappa=0.9\n").unwrap();
        let cli = parse(&["fit", "--corpus", "c", "--model", "m", "--epochs", "2"]);
        let Command::Fit(f) = cli.command else { panic!() };
        let cfg = f.model_args.resolve(&file).unwrap();
        assert_eq!(cfg.epochs, 2);
        assert_eq!(cfg.doc_truncation, 4);
        assert_eq!(cfg.kappa, 0.9);
    }

    #[test]
    fn config_file_errors() {
        assert!(matches!(ConfigFile::parse("epochs 3"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(ConfigFile::parse("\nbogus = 1"), Err(Error::Parse { line: 2, .. })));
        let file = ConfigFile::parse("epochs = many").unwrap();
        let cli = parse(&["fit", "--corpus", "c", "--model", "m"]);
        let Command::Fit(f) = cli.command else { panic!() };
        assert!(f.model_args.resolve(&file).is_err());
    }

    #[test]
    fn invalid_model_config_rejected() {
        let cli = parse(&["fit", "--corpus", "c", "--model", "m", "--epochs", "0"]);
        let Command::Fit(f) = cli.command else { panic!() };
        assert!(f.model_args.resolve(&ConfigFile::default()).is_err());
    }

    #[test]
    fn map_path_default() {
        assert_eq!(default_map_path(Path::new("out/c.txt")), PathBuf::from("out/c.txt.map"));
    }

    #[test]
    fn duplicate_outputs_rejected() {
        assert!(ensure_distinct(&[Path::new("a"), Path::new("a")]).is_err());
        assert!(ensure_distinct(&[Path::new("a"), Path::new("b")]).is_ok());
    }
}
