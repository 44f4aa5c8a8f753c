//! Command-line front end: `simulst <command> [flags]`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::decoder::{build_consistency_mask, InterleavedLayout, Modality, TokenId, Vocabulary, WordRule};
use crate::encoder::{build_blockwise_mask, StreamManifest, WaveformSegment};
use crate::error::{bail, Result};
use crate::losses::{build_stage2_mask, group_words, masked_ce_grad, waco_loss_grad, Stage2MaskSpec, WordAlignment};
use crate::model::Model;
use crate::streaming::{run_policy, Clock, CostTable, IncrementalEngine, PolicyConfig, PolicyKind, Variant};
use crate::tensor::weights::Initializer;
use crate::tensor::{finite_diff_grad, Matrix};
use crate::FORMAT_VERSION;

use super::bench::{bench_scaling, noise_segments, write_bench_csv, BenchConfig};
use super::equiv::run_equivalence;
use super::metrics::MetricsReport;

#[derive(Parser, Debug)]
#[command(name = "simulst", version, about = "Streaming speech-to-text inference toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded random model (config, vocabulary, weights).
    Init(InitArgs),
    /// Run a policy session and write the event log and translation.
    Simulate(SimulateArgs),
    /// Latency and quality metrics from an event log.
    Eval(EvalArgs),
    /// Per-step cost of incremental versus recomputing inference, as CSV.
    Bench(BenchArgs),
    /// Print attention masks as 0/1 grids.
    Masks(MasksArgs),
    /// Compare analytic loss gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Contrastive loss of word-aligned speech and text embeddings.
    Loss(LossArgs),
    /// Incremental-versus-reference deviations; fails above 1e-5.
    Equiv(EquivArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model configuration JSON (defaults to the built-in toy shape).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Weight blob; requires --weights-manifest and --vocab.
    #[arg(long, requires_all = ["weights_manifest", "vocab"])]
    weights: Option<PathBuf>,
    #[arg(long)]
    weights_manifest: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Seed for random weights when no weight file is given.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = RuleArg::EveryToken)]
    word_rule: RuleArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleArg {
    Separator,
    EveryToken,
}

impl From<RuleArg> for WordRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Separator => WordRule::Separator,
            RuleArg::EveryToken => WordRule::EveryToken,
        }
    }
}

impl ModelArgs {
    fn config(&self) -> Result<ModelConfig> {
        let cfg = match &self.config {
            Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
            None => ModelConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn load(&self) -> Result<Model<f32>> {
        let cfg = self.config()?;
        match (&self.weights, &self.weights_manifest, &self.vocab) {
            (Some(blob), Some(manifest), Some(vocab)) => Model::load(cfg, Vocabulary::read(vocab)?, blob, manifest),
            _ => Model::random(cfg, self.word_rule.into(), self.seed),
        }
    }
}

#[derive(Args, Debug)]
struct InitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ClockArg {
    Simulated,
    Real,
}

#[derive(Args, Debug)]
struct ClockArgs {
    #[arg(long, value_enum, default_value_t = ClockArg::Simulated)]
    clock: ClockArg,
    /// Simulated ms per million multiply-accumulates, for every operation.
    #[arg(long, default_value_t = 1.0)]
    ms_per_mmac: f64,
    /// Per-operation cost table JSON; overrides --ms-per-mmac.
    #[arg(long)]
    cost_table: Option<PathBuf>,
}

impl ClockArgs {
    fn clock(&self) -> Result<Clock> {
        Ok(match self.clock {
            ClockArg::Real => Clock::real(),
            ClockArg::Simulated => {
                let table = match &self.cost_table {
                    Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
                    None => CostTable::uniform(self.ms_per_mmac),
                };
                Clock::simulated(table)
            }
        })
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    WaitK,
    HoldN,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    clock: ClockArgs,
    /// Stream manifest; without it a seeded noise stream is used.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Segments of the noise stream.
    #[arg(long, default_value_t = 4)]
    noise_segments: usize,
    /// Policy JSON; overrides the policy flags below.
    #[arg(long)]
    policy_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PolicyArg::WaitK)]
    policy: PolicyArg,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 1000.0)]
    segment_ms: f64,
    #[arg(long, default_value_t = 64)]
    max_tokens: usize,
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    translation: Option<PathBuf>,
}

/// Translation file written by `simulate` and read by `eval`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationFile {
    pub format_version: u32,
    pub tokens: Vec<TokenId>,
    pub words: usize,
    pub text: String,
}

/// Reference translation for `eval`. `words` defaults to the count given by
/// the vocabulary's word rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFile {
    #[serde(default = "version")]
    pub format_version: u32,
    pub tokens: Vec<TokenId>,
    #[serde(default)]
    pub words: Option<usize>,
}

fn version() -> u32 {
    FORMAT_VERSION
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    /// Vocabulary used to count reference words.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RuleArg::EveryToken)]
    word_rule: RuleArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    clock: ClockArgs,
    #[arg(long, default_value_t = 32)]
    segments: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Comma-separated subset of full_recompute, incremental_encoder_only, full_incremental.
    #[arg(long, value_delimiter = ',')]
    variants: Vec<String>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("kind").required(true).args(["blockwise", "consistency", "stage2"])))]
struct MasksArgs {
    #[arg(long)]
    blockwise: bool,
    #[arg(long)]
    consistency: bool,
    #[arg(long)]
    stage2: bool,
    /// Sequence length (blockwise).
    #[arg(long, default_value_t = 8)]
    len: usize,
    #[arg(long, default_value_t = 2)]
    block: usize,
    /// Span list such as `s3,t2,s1` (consistency).
    #[arg(long, default_value = "s2,t2,s2,t2")]
    spans: String,
    /// Speech rows per segment, comma-separated (stage2).
    #[arg(long, value_delimiter = ',', default_value = "2,2,2")]
    segment_counts: Vec<usize>,
    #[arg(long, default_value_t = 6)]
    text_len: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    n: usize,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    words: usize,
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
}

/// Embeddings for `loss`: rows of speech and text vectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmbeddingsFile {
    pub speech: Vec<Vec<f64>>,
    pub text: Vec<Vec<f64>>,
}

#[derive(Args, Debug)]
struct LossArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    alignment: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
}

#[derive(Args, Debug)]
struct EquivArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Also write the full-pass and incremental logits of one decoder case as CSV.
    #[arg(long)]
    dump_logits: Option<PathBuf>,
}

/// Parses `argv` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 on failure, 2 on usage errors.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Init(a) => init(a),
        Command::Simulate(a) => simulate(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Masks(a) => masks(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Loss(a) => loss(a),
        Command::Equiv(a) => equiv(a),
    }
}

fn init(a: InitArgs) -> Result<i32> {
    let model = a.model.load()?;
    fs::create_dir_all(&a.out_dir)?;
    let d = &a.out_dir;
    fs::write(d.join("config.json"), serde_json::to_string_pretty(&model.config)?)?;
    model.vocab.write(&d.join("vocab.json"))?;
    model.save(&d.join("weights.bin"), &d.join("weights.json"))?;
    println!("wrote model to {}", d.display());
    Ok(0)
}

fn segments_for(a: &SimulateArgs, model: &Model<f32>) -> Result<Vec<WaveformSegment<f32>>> {
    let expected = model.config.segment_samples();
    match &a.manifest {
        Some(path) => {
            let manifest = StreamManifest::read(path)?;
            if manifest.segment_samples != expected {
                bail!(
                    InvalidConfig,
                    "stream segments have {} samples but the model reads {expected}",
                    manifest.segment_samples
                );
            }
            manifest.load_segments(path.parent().unwrap_or(Path::new(".")))
        }
        None => noise_segments(expected, a.noise_segments, a.model.seed ^ 0xa11d10),
    }
}

fn simulate(a: SimulateArgs) -> Result<i32> {
    let model = a.model.load()?;
    let segments = segments_for(&a, &model)?;
    let policy = match &a.policy_file {
        Some(p) => PolicyConfig::read(p)?,
        None => PolicyConfig {
            kind: match a.policy {
                PolicyArg::WaitK => PolicyKind::WaitKStrideN,
                PolicyArg::HoldN => PolicyKind::HoldN,
            },
            k: a.k,
            n: a.n,
            segment_ms: a.segment_ms,
            max_tokens_per_write: a.max_tokens,
        },
    };
    let mut clock = a.clock.clock()?;
    let mut engine = IncrementalEngine::new(&model)?;
    let out = run_policy(&mut engine, &segments, &policy, &mut clock)?;
    out.log.write(&a.log)?;
    let words: usize = out
        .log
        .writes()
        .map(|e| match e {
            crate::streaming::Event::Write { words, .. } => *words,
            _ => 0,
        })
        .sum();
    let translation = TranslationFile {
        format_version: FORMAT_VERSION,
        text: model.vocab.render(&out.tokens),
        tokens: out.tokens,
        words,
    };
    if let Some(p) = &a.translation {
        fs::write(p, serde_json::to_string_pretty(&translation)? + "\n")?;
    }
    println!(
        "{} reads, {} writes, {} tokens, {} words",
        out.log.reads(),
        out.log.writes().count(),
        translation.tokens.len(),
        words
    );
    Ok(0)
}

fn eval(a: EvalArgs) -> Result<i32> {
    let log = crate::streaming::SessionEventLog::read(&a.log)?;
    let reference: ReferenceFile = serde_json::from_str(&fs::read_to_string(&a.reference)?)?;
    let ref_words = match reference.words {
        Some(w) => w,
        None => {
            let vocab = match &a.vocab {
                Some(p) => Vocabulary::read(p)?,
                None => Vocabulary::new(ModelConfig::default().vocab_size, a.word_rule.into())?,
            };
            vocab.count_words(&reference.tokens, true)
        }
    };
    let report = MetricsReport::compute(&log, &log.tokens(), &reference.tokens, ref_words)?;
    if let Some(p) = &a.out {
        report.write(p)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn bench(a: BenchArgs) -> Result<i32> {
    let model = a.model.load()?;
    let variants = if a.variants.is_empty() {
        Variant::ALL.to_vec()
    } else {
        a.variants.iter().map(|v| Variant::parse(v)).collect::<Result<_>>()?
    };
    let cfg = BenchConfig {
        segments: a.segments,
        k: a.k,
        n: a.n,
        seed: a.model.seed,
    };
    let records = bench_scaling(&model, &cfg, &variants, &a.clock.clock()?)?;
    match &a.out {
        Some(p) => write_bench_csv(&records, fs::File::create(p)?)?,
        None => write_bench_csv(&records, std::io::stdout().lock())?,
    }
    Ok(0)
}

fn parse_spans(text: &str) -> Result<InterleavedLayout> {
    let mut spans = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (m, n) = part.split_at(1);
        let modality = match m {
            "s" | "S" => Modality::Speech,
            "t" | "T" => Modality::Text,
            _ => bail!(InvalidArgument, "span '{part}' must start with s or t"),
        };
        let len = n
            .parse()
            .map_err(|_| crate::Error::InvalidArgument(format!("bad span length in '{part}'")))?;
        spans.push((modality, len));
    }
    InterleavedLayout::new(spans)
}

fn masks(a: MasksArgs) -> Result<i32> {
    let mask = if a.blockwise {
        if a.block == 0 {
            bail!(InvalidArgument, "block must be >= 1");
        }
        build_blockwise_mask(a.len, a.block)
    } else if a.consistency {
        build_consistency_mask(&parse_spans(&a.spans)?)
    } else {
        build_stage2_mask(&Stage2MaskSpec::new(a.segment_counts, a.text_len, a.k, a.n)?)
    };
    print!("{}", mask.to_grid());
    Ok(0)
}

/// Largest entrywise `|a - b| / max(|a|, |b|, 1e-8)`.
fn relative_error(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// Relative gradient errors of both losses on seeded inputs.
pub fn gradcheck_errors(seed: u64, words: usize, dim: usize, tau: f64) -> Result<Vec<(&'static str, f64)>> {
    let mut init = Initializer::new(seed);
    let speech: Matrix<f64> = init.uniform(words, dim, 1.0);
    let text: Matrix<f64> = init.uniform(words, dim, 1.0);
    let g = waco_loss_grad(&speech, &text, tau)?;
    let eps = 1e-6;
    let fd_s = finite_diff_grad(|s| crate::losses::waco_loss(s, &text, tau), &speech, eps)?;
    let fd_t = finite_diff_grad(|t| crate::losses::waco_loss(&speech, t, tau), &text, eps)?;

    let vocab = 8;
    let logits: Matrix<f64> = init.uniform(words, vocab, 3.0);
    let targets: Vec<TokenId> = (0..words).map(|_| init.rng().gen_range(0..vocab as TokenId)).collect();
    let (_, g_ce) = masked_ce_grad(&logits, &targets)?;
    let fd_ce = finite_diff_grad(|l| crate::losses::masked_ce(l, &targets), &logits, eps)?;
    Ok(vec![
        ("waco_speech", relative_error(&g.grad_speech, &fd_s)),
        ("waco_text", relative_error(&g.grad_text, &fd_t)),
        ("masked_ce", relative_error(&g_ce, &fd_ce)),
    ])
}

fn gradcheck(a: GradcheckArgs) -> Result<i32> {
    let errors = gradcheck_errors(a.seed, a.words, a.dim, a.tau)?;
    let mut ok = true;
    for (name, err) in errors {
        let pass = err <= 1e-3;
        ok &= pass;
        println!("{name:<12} rel_err={err:.3e} {}", if pass { "ok" } else { "FAIL" });
    }
    Ok(if ok { 0 } else { 1 })
}

fn loss(a: LossArgs) -> Result<i32> {
    let emb: EmbeddingsFile = serde_json::from_str(&fs::read_to_string(&a.embeddings)?)?;
    let alignment = WordAlignment::read(&a.alignment)?;
    let speech = Matrix::from_rows(&emb.speech)?;
    let text = Matrix::from_rows(&emb.text)?;
    alignment.validate(speech.rows(), text.rows())?;
    let ws = group_words(&speech, &alignment.speech_ranges())?;
    let wt = group_words(&text, &alignment.text_ranges())?;
    let g = waco_loss_grad(&ws, &wt, a.tau)?;
    let report = serde_json::json!({
        "format_version": FORMAT_VERSION,
        "loss": g.loss,
        "words": alignment.words.len(),
        "tau": a.tau,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn dump_logits(path: &Path, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = super::equiv::random_config(&mut rng);
    let layout = super::equiv::random_layout(&mut rng, 4, 3);
    let (full, inc) = super::equiv::decoder_logits::<f32>(&cfg, &layout, seed)?;
    let mut out = fs::File::create(path)?;
    let header: Vec<String> = (0..full.cols()).map(|v| format!("v{v}")).collect();
    writeln!(out, "path,row,{}", header.join(","))?;
    for (name, m) in [("full", &full), ("incremental", &inc)] {
        for (r, row) in m.iter_rows().enumerate() {
            let vals: Vec<String> = row.iter().map(|x| format!("{x:.7e}")).collect();
            writeln!(out, "{name},{r},{}", vals.join(","))?;
        }
    }
    Ok(())
}

fn equiv(a: EquivArgs) -> Result<i32> {
    let results = run_equivalence(a.seed, a.trials)?;
    let mut ok = true;
    for r in &results {
        let pass = r.max_deviation <= 1e-5;
        ok &= pass;
        println!(
            "{:<8} cases={:<4} max_dev={:.3e} {}",
            r.name,
            r.cases,
            r.max_deviation,
            if pass { "ok" } else { "FAIL" }
        );
    }
    if let Some(p) = &a.dump_logits {
        dump_logits(p, a.seed)?;
    }
    Ok(if ok { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> i32 {
        run(std::iter::once("simulst").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors() {
        assert_ne!(run_args(&["frobnicate"]), 0);
        assert_ne!(run_args(&["masks", "--blockwise", "--bogus"]), 0);
        assert_ne!(run_args(&["masks"]), 0);
        assert_eq!(run_args(&["masks", "--blockwise", "--len", "4", "--block", "2"]), 0);
    }

    #[test]
    fn span_parsing() {
        let l = parse_spans("s3,t2, s1").unwrap();
        assert_eq!(l.spans(), &[(Modality::Speech, 3), (Modality::Text, 2), (Modality::Speech, 1)]);
        assert!(parse_spans("x3").is_err());
        assert!(parse_spans("s0").is_err());
    }

    #[test]
    fn gradients_agree() {
        for (name, err) in gradcheck_errors(1, 3, 4, 0.2).unwrap() {
            assert!(err <= 1e-3, "{name} {err}");
        }
    }
}
