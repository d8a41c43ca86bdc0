//! The `seqrank` command line: data generation, training, gradient checking,
//! embedding, ranking, NDCG evaluation and activation analysis.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure
//! (non-finite values, or a failed gradient check). Every run writes the
//! resolved configuration to a provenance file next to its outputs; runs that
//! print to stdout send it to stderr instead.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{self, ActivationGrid, KeywordReport};
use crate::corpus::{self, GroundTruth, SyntheticSpec};
use crate::error::{Error, Result};
use crate::eval::{self, Ranker};
use crate::grad::check::{gradcheck, GradcheckConfig, DEFAULT_STEP};
use crate::model::{checkpoint, Arch, Encoder, Side, Variant};
use crate::texthash::TrigramDict;
use crate::trainer::{self, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "seqrank", version, about = "Recurrent sentence embeddings trained on click-through data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic click-through corpus with graded judgments.
    GenData(GenDataArgs),
    /// Train query and document encoders on a click-through corpus.
    Train(TrainArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Print sentence embeddings.
    Embed(EmbedArgs),
    /// Rank candidate documents for one query.
    Rank(RankArgs),
    /// Mean NDCG@k of a trained model on graded judgments.
    Eval(EvalArgs),
    /// Export activation grids, keyword reports and topic cells.
    Analyze(AnalyzeArgs),
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    match s.split_once('-') {
        Some((a, b)) => Ok((parse(a)?, parse(b)?)),
        None => parse(s).map(|v| (v, v)),
    }
}

#[derive(Args, Debug, Serialize)]
pub struct GenDataArgs {
    /// Output directory for clicks.tsv, judgments.tsv and truth.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub topics: Option<usize>,
    #[arg(long)]
    pub vocab_per_topic: Option<usize>,
    #[arg(long)]
    pub filler_vocab: Option<usize>,
    #[arg(long)]
    pub records: Option<usize>,
    /// Inclusive word-count range, e.g. `2-4`.
    #[arg(long, value_parser = parse_range)]
    pub query_len: Option<(usize, usize)>,
    #[arg(long, value_parser = parse_range)]
    pub doc_len: Option<(usize, usize)>,
    #[arg(long)]
    pub keyword_rate: Option<f64>,
    #[arg(long)]
    pub judgment_queries: Option<usize>,
    #[arg(long)]
    pub docs_per_grade: Option<usize>,
}

impl GenDataArgs {
    pub fn spec(&self) -> SyntheticSpec {
        let d = SyntheticSpec::default();
        SyntheticSpec {
            n_topics: self.topics.unwrap_or(d.n_topics),
            vocab_per_topic: self.vocab_per_topic.unwrap_or(d.vocab_per_topic),
            filler_vocab: self.filler_vocab.unwrap_or(d.filler_vocab),
            n_records: self.records.unwrap_or(d.n_records),
            query_len: self.query_len.unwrap_or(d.query_len),
            doc_len: self.doc_len.unwrap_or(d.doc_len),
            keyword_rate: self.keyword_rate.unwrap_or(d.keyword_rate),
            judgment_queries: self.judgment_queries.unwrap_or(d.judgment_queries),
            docs_per_grade: self.docs_per_grade.unwrap_or(d.docs_per_grade),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Click-through TSV: `query<TAB>document_title` per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory for dict.tsv, query.ckpt, doc.ckpt and loss.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub arch: Option<Arch>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub bidirectional: bool,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub minibatch: Option<usize>,
    #[arg(long)]
    pub bptt_depth: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Half-width of the uniform parameter initialization.
    #[arg(long)]
    pub init_range: Option<f64>,
    /// `key = value` settings file; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl TrainArgs {
    /// Defaults, then the config file if given, then explicit flags.
    pub fn config(&self) -> Result<TrainConfig> {
        let mut d = TrainConfig::default();
        if let Some(path) = &self.config {
            let mut text = String::new();
            std::io::Read::read_to_string(&mut crate::error::open(path)?, &mut text)?;
            d.apply_overrides(&text, &path.display().to_string())?;
        }
        Ok(TrainConfig {
            arch: self.arch.unwrap_or(d.arch),
            variant: self.variant.unwrap_or(d.variant),
            bidirectional: self.bidirectional || d.bidirectional,
            cells: self.cells.unwrap_or(d.cells),
            n_negatives: self.negatives.unwrap_or(d.n_negatives),
            gamma: self.gamma.unwrap_or(d.gamma),
            eps: self.eps.unwrap_or(d.eps),
            clip: self.clip.unwrap_or(d.clip),
            epochs: self.epochs.unwrap_or(d.epochs),
            minibatch: self.minibatch.unwrap_or(d.minibatch),
            bptt_depth: self.bptt_depth.unwrap_or(d.bptt_depth),
            seed: self.seed.unwrap_or(d.seed),
            deterministic: self.deterministic || d.deterministic,
            threads: self.threads.or(d.threads),
            init_range: self.init_range.unwrap_or(d.init_range),
        })
    }
}

#[derive(Args, Debug, Serialize)]
pub struct GradcheckArgs {
    #[arg(long, default_value = "lstm")]
    pub arch: Arch,
    #[arg(long, default_value = "full")]
    pub variant: Variant,
    #[arg(long)]
    pub bidirectional: bool,
    /// Cell count, or an inclusive range such as `3-8`.
    #[arg(long, value_parser = parse_range, default_value = "3-8")]
    pub cells: (usize, usize),
    /// Trigram dimension, or an inclusive range such as `6-20`.
    #[arg(long, value_parser = parse_range, default_value = "6-20")]
    pub dim: (usize, usize),
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "1,10")]
    pub gamma: Vec<f64>,
    #[arg(long, default_value_t = 4)]
    pub max_len: usize,
    #[arg(long, default_value_t = 2)]
    pub negatives: usize,
    #[arg(long, default_value_t = 2)]
    pub records: usize,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// TSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[group(id = "side", required = true, multiple = false, args = ["checkpoint_q", "checkpoint_d"])]
pub struct SideArgs {
    /// Query-side checkpoint (sentences are embedded as queries).
    #[arg(long)]
    pub checkpoint_q: Option<PathBuf>,
    /// Document-side checkpoint (sentences are embedded as documents).
    #[arg(long)]
    pub checkpoint_d: Option<PathBuf>,
    /// Trigram dictionary; defaults to the one named in the checkpoint.
    #[arg(long)]
    pub dict: Option<PathBuf>,
}

impl SideArgs {
    fn load(&self) -> Result<(Encoder, TrigramDict, Side)> {
        let (path, side) = match (&self.checkpoint_q, &self.checkpoint_d) {
            (Some(p), _) => (p, Side::Query),
            (_, Some(p)) => (p, Side::Document),
            _ => return Err(Error::Config("a checkpoint is required".into())),
        };
        let (_, encoder, dict_path) = checkpoint::load(path)?;
        let dict = read_dict(self.dict.as_deref().unwrap_or(&dict_path))?;
        if dict.dim() != encoder.input_dim() {
            return Err(Error::DimMismatch(format!(
                "checkpoint expects {} trigrams, dictionary has {}",
                encoder.input_dim(),
                dict.dim()
            )));
        }
        Ok((encoder, dict, side))
    }
}

#[derive(Args, Debug, Serialize)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub side: SideArgs,
    /// Sentences, one per line.
    #[arg(long, required_unless_present = "text")]
    pub input: Option<PathBuf>,
    /// A sentence to embed; may be repeated.
    #[arg(long)]
    pub text: Vec<String>,
    /// TSV destination (`sentence<TAB>space-separated values`); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct PairArgs {
    #[arg(long)]
    pub checkpoint_q: PathBuf,
    #[arg(long)]
    pub checkpoint_d: PathBuf,
    /// Trigram dictionary; defaults to the one named in the query checkpoint.
    #[arg(long)]
    pub dict: Option<PathBuf>,
}

impl PairArgs {
    fn load(&self) -> Result<Ranker> {
        Ranker::load(&self.checkpoint_q, &self.checkpoint_d, self.dict.as_deref())
    }
}

#[derive(Args, Debug, Serialize)]
pub struct RankArgs {
    #[command(flatten)]
    pub model: PairArgs,
    #[arg(long)]
    pub query: String,
    /// Candidate documents, one per line.
    #[arg(long)]
    pub candidates: PathBuf,
    /// TSV destination (`rank<TAB>score<TAB>doc`); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: PairArgs,
    /// Judgment TSV: `query<TAB>doc<TAB>grade` per line.
    #[arg(long)]
    pub judgments: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
    pub k: Vec<usize>,
    /// TSV destination (`k<TAB>mean_ndcg`); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-query NDCG detail TSV.
    #[arg(long)]
    pub detail: Option<PathBuf>,
    /// Also write the random-permutation baseline here.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub shuffles: usize,
    /// Seed of the baseline permutations.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub side: SideArgs,
    /// A sentence to analyze; may be repeated.
    #[arg(long)]
    pub sentence: Vec<String>,
    /// Sentences, one per line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = analysis::DEFAULT_TOP_K)]
    pub top_k: usize,
    #[arg(long, default_value_t = analysis::DEFAULT_TOP_M)]
    pub top_m: usize,
    /// Absolute activation-change threshold; by default a fixed fraction of
    /// each sentence's largest |y|.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Ground-truth topic keywords (truth.json from gen-data) for the topic report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::SpecInvalid(_) => EXIT_USAGE,
        Error::NonFinite(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("SEQRANK_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let recorded: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, &recorded) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("seqrank: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, argv: &[String]) -> Result<i32> {
    match cmd {
        Command::GenData(a) => gen_data(&a, argv),
        Command::Train(a) => train(&a, argv),
        Command::Gradcheck(a) => grad_check(&a, argv),
        Command::Embed(a) => embed(&a, argv),
        Command::Rank(a) => rank(&a, argv),
        Command::Eval(a) => evaluate(&a, argv),
        Command::Analyze(a) => analyze(&a, argv),
    }
}

#[derive(Serialize)]
struct Provenance<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    argv: &'a [String],
    config: &'a C,
}

/// Where a command's provenance record goes.
enum Dest<'a> {
    Dir(&'a Path),
    File(&'a Path),
    Stderr,
}

impl<'a> Dest<'a> {
    fn for_output(out: Option<&'a Path>) -> Dest<'a> {
        out.map_or(Dest::Stderr, Dest::File)
    }
}

/// Sidecar path of a file output.
pub fn provenance_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".provenance.json");
    PathBuf::from(name)
}

fn write_provenance<C: Serialize>(dest: Dest<'_>, command: &str, argv: &[String], config: &C) -> Result<()> {
    let record = Provenance {
        tool: "seqrank",
        version: env!("CARGO_PKG_VERSION"),
        command,
        argv,
        config,
    };
    let mut text = serde_json::to_string_pretty(&record)?;
    text.push('\n');
    match dest {
        Dest::Dir(d) => fs::write(d.join("provenance.json"), text)?,
        Dest::File(f) => fs::write(provenance_path(f), text)?,
        Dest::Stderr => eprint!("{text}"),
    }
    Ok(())
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_dict(path: &Path) -> Result<TrigramDict> {
    let f = crate::error::open(path)?;
    TrigramDict::read_tsv(BufReader::new(f), &path.display().to_string())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in BufReader::new(crate::error::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(line.trim_end_matches('\r').to_string());
        }
    }
    Ok(out)
}

fn sentences(input: Option<&Path>, inline: &[String]) -> Result<Vec<String>> {
    let mut all = inline.to_vec();
    if let Some(p) = input {
        all.extend(read_lines(p)?);
    }
    if all.is_empty() {
        return Err(Error::Config("no sentences given".into()));
    }
    Ok(all)
}

fn gen_data(a: &GenDataArgs, argv: &[String]) -> Result<i32> {
    let spec = a.spec();
    let corpus = corpus::generate(&spec)?;
    corpus::save_corpus(&a.out, &corpus)?;
    write_provenance(Dest::Dir(&a.out), "gen-data", argv, &spec)?;
    eprintln!(
        "wrote {} click records and {} judgments to {}",
        corpus.clicks.len(),
        corpus.judgments.len(),
        a.out.display()
    );
    Ok(EXIT_OK)
}

fn train(a: &TrainArgs, argv: &[String]) -> Result<i32> {
    let cfg = a.config()?;
    cfg.validate()?;
    eprint!("{}", cfg.to_overrides());
    let records = corpus::read_clicks(&a.corpus)?;
    let out = trainer::train(&records, &cfg)?;
    trainer::save_outputs(&a.out, &out)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        corpus: &'a Path,
        out: &'a Path,
        #[serde(flatten)]
        train: &'a TrainConfig,
        skipped_records: usize,
        updates: u64,
    }
    let resolved = Resolved {
        corpus: &a.corpus,
        out: &a.out,
        train: &cfg,
        skipped_records: out.skipped_records,
        updates: out.updates,
    };
    write_provenance(Dest::Dir(&a.out), "train", argv, &resolved)?;
    if let (Some(first), Some(last)) = (out.curve.first(), out.curve.last()) {
        eprintln!("mean loss: epoch 1 {first:.6}, epoch {} {last:.6}", cfg.epochs);
    }
    if out.skipped_records > 0 {
        eprintln!("skipped {} record visits with zero-norm embeddings", out.skipped_records);
    }
    Ok(EXIT_OK)
}

fn grad_check(a: &GradcheckArgs, argv: &[String]) -> Result<i32> {
    let cfg = GradcheckConfig {
        arch: a.arch,
        variant: a.variant,
        bidirectional: a.bidirectional,
        cells: a.cells,
        dim: a.dim,
        max_len: a.max_len,
        negatives: a.negatives,
        records: a.records,
        gammas: a.gamma.clone(),
        seeds: a.seeds,
        step: a.step,
    };
    let errors = gradcheck(&cfg)?;
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "group\tentries\tmax_rel_error\tmax_abs_error_small\tpass")?;
    for e in &errors {
        writeln!(
            w,
            "{}\t{}\t{:e}\t{:e}\t{}",
            e.group,
            e.entries,
            e.max_rel_error,
            e.max_abs_error_small,
            e.passes()
        )?;
    }
    w.flush()?;
    write_provenance(Dest::for_output(a.out.as_deref()), "gradcheck", argv, &cfg)?;
    Ok(if errors.iter().all(|e| e.passes()) { EXIT_OK } else { EXIT_NUMERIC })
}

fn embed(a: &EmbedArgs, argv: &[String]) -> Result<i32> {
    let (encoder, dict, side) = a.side.load()?;
    let texts = sentences(a.input.as_deref(), &a.text)?;
    let mut w = output(a.out.as_deref())?;
    for t in &texts {
        let v = encoder.embed(&dict.hash_sentence(t)?, side)?.v;
        let vals: Vec<String> = v.iter().map(f64::to_string).collect();
        writeln!(w, "{t}\t{}", vals.join(" "))?;
    }
    w.flush()?;
    write_provenance(Dest::for_output(a.out.as_deref()), "embed", argv, a)?;
    Ok(EXIT_OK)
}

fn rank(a: &RankArgs, argv: &[String]) -> Result<i32> {
    let ranker = a.model.load()?;
    let candidates = read_lines(&a.candidates)?;
    let ranked = ranker.rank(&a.query, &candidates)?;
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "rank\tscore\tdoc")?;
    for (i, d) in ranked.docs.iter().enumerate() {
        let score = if d.scorable { d.score.to_string() } else { "unscorable".into() };
        writeln!(w, "{}\t{score}\t{}", i + 1, d.doc)?;
    }
    w.flush()?;
    write_provenance(Dest::for_output(a.out.as_deref()), "rank", argv, a)?;
    Ok(EXIT_OK)
}

fn evaluate(a: &EvalArgs, argv: &[String]) -> Result<i32> {
    let ranker = a.model.load()?;
    let judgments = corpus::read_judgments(&a.judgments)?;
    let report = match a.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| eval::mean_ndcg(&ranker, &judgments, &a.k))?,
        None => eval::mean_ndcg(&ranker, &judgments, &a.k)?,
    };
    let mut w = output(a.out.as_deref())?;
    report.write_tsv(&mut w)?;
    w.flush()?;
    if let Some(p) = &a.detail {
        report.write_detail_tsv(BufWriter::new(File::create(p)?))?;
    }
    if let Some(p) = &a.baseline {
        let base = eval::random_baseline(&judgments, &a.k, a.shuffles, a.seed)?;
        base.write_tsv(BufWriter::new(File::create(p)?))?;
    }
    write_provenance(Dest::for_output(a.out.as_deref()), "eval", argv, a)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SentenceKeywords<'a> {
    sentence: &'a str,
    report: KeywordReport,
}

#[derive(Serialize)]
struct TopicReport {
    dominant_cells: Vec<Vec<usize>>,
    /// Overlap of the first two topics' dominant cell sets.
    jaccard: Option<f64>,
    planted_keywords: usize,
    flagged_keywords: usize,
    keyword_recall: f64,
    filler_words: usize,
    flagged_filler: usize,
}

fn analyze(a: &AnalyzeArgs, argv: &[String]) -> Result<i32> {
    let (encoder, dict, _) = a.side.load()?;
    let texts = sentences(a.input.as_deref(), &a.sentence)?;
    let grid_dir = a.out.join("activations");
    fs::create_dir_all(&grid_dir)?;

    let mut all_grids = Vec::new();
    let mut reports = Vec::new();
    for (i, t) in texts.iter().enumerate() {
        let grids: Vec<ActivationGrid> = analysis::dump_activations(&encoder, &dict, t)?;
        for g in &grids {
            let path = grid_dir.join(format!("{i:04}_{}.csv", g.stem()));
            g.write_csv(BufWriter::new(File::create(path)?))?;
        }
        all_grids.push(serde_json::json!({
            "sentence": t,
            "grids": grids.iter().map(ActivationGrid::to_json).collect::<Vec<_>>(),
        }));
        reports.push(SentenceKeywords {
            sentence: t,
            report: analysis::keyword_report(&encoder, &dict, t, a.top_k, a.threshold)?,
        });
    }
    write_json(&a.out.join("activations.json"), &all_grids)?;
    write_json(&a.out.join("keywords.json"), &reports)?;
    let cells = analysis::topic_cells(&texts, &encoder, &dict, a.top_m, a.top_k, a.threshold)?;
    write_json(&a.out.join("topic_cells.json"), &cells)?;

    if let Some(p) = &a.truth {
        let truth: GroundTruth = serde_json::from_reader(BufReader::new(crate::error::open(p)?))?;
        let dominant: Vec<Vec<usize>> = truth
            .topics
            .iter()
            .map(|kw| cells.dominant_cells(&kw.iter().cloned().collect::<BTreeSet<_>>(), a.top_m))
            .collect();
        let (mut planted, mut flagged, mut filler, mut flagged_filler) = (0, 0, 0, 0);
        for r in &reports {
            for w in &r.report.words {
                if truth.is_keyword(&w.word) {
                    planted += 1;
                    flagged += usize::from(w.is_keyword);
                } else {
                    filler += 1;
                    flagged_filler += usize::from(w.is_keyword);
                }
            }
        }
        let topic = TopicReport {
            jaccard: (dominant.len() >= 2).then(|| analysis::jaccard(&dominant[0], &dominant[1])),
            dominant_cells: dominant,
            planted_keywords: planted,
            flagged_keywords: flagged,
            keyword_recall: if planted == 0 { 0.0 } else { flagged as f64 / planted as f64 },
            filler_words: filler,
            flagged_filler,
        };
        write_json(&a.out.join("topics.json"), &topic)?;
    }
    write_provenance(Dest::Dir(&a.out), "analyze", argv, a)?;
    Ok(EXIT_OK)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
