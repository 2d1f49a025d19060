mod config;

use clap::{Args, Parser, Subcommand};
use config::{write_stamp, Overrides, RunConfig};
use emorec::dsp::{frame_signal, read_wav, write_feature_file, FramingSpec, StreamTag};
use emorec::eval::{
    make_folds, predict_split, prediction_metrics, read_manifest, run_cv, summary_table, train_split, Corpus,
    CorpusNeeds, CvSetup, FoldScheme, LabelScheme, ManifestRecord, TextCondition,
};
use emorec::model::{FeatureSet, ModelInput, TsbInput, TwoBranchModel, AUDIO25_DIM, FBK250_DIM};
use emorec::nn::{check_gradients, load_checkpoint, save_checkpoint, Dropout, GradCheckOptions, Tensor};
use emorec::text::{load_word_table, words_to_frames, ContextSpan, ContextWindow, GLOVE_DIM};
use emorec::train::write_history_csv;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Engine(emorec::Error),
    GradientMismatch(String),
}

impl CliError {
    fn from_config(e: emorec::Error) -> Self {
        CliError::Usage(e.to_string())
    }

    fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Engine(e) => e.class(),
            CliError::GradientMismatch(_) => "GradientMismatch",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::GradientMismatch(m) => f.write_str(m),
            CliError::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl From<emorec::Error> for CliError {
    fn from(e: emorec::Error) -> Self {
        CliError::Engine(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "emorec", version, about = "Two-branch emotion recognition from audio, words and dialogue context")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute normalised audio25 and fbk250 feature files for a manifest.
    ExtractFeatures(Common),
    /// Turn word alignments into frame-level word-vector files.
    EmbedAlign(Common),
    /// Fit one model (on all utterances, or the training side of --fold).
    Train(Common),
    /// Score a checkpoint (on all utterances, or the test side of --fold).
    Evaluate(Common),
    /// Cross-validate over the fold plan.
    Cv {
        #[command(flatten)]
        common: Common,
        /// Print a results table after the run.
        #[arg(long)]
        emit_table: bool,
    },
    /// Write a synthetic corpus.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dialogues: Option<usize>,
        #[arg(long)]
        utterances_per_dialogue: Option<usize>,
    },
    /// Finite-difference check of the configured architecture at small width.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

fn parse_span(s: &str) -> std::result::Result<ContextSpan, String> {
    s.parse().map_err(|e: emorec::Error| e.to_string())
}

fn parse_features(s: &str) -> std::result::Result<FeatureSet, String> {
    s.parse().map_err(|e: emorec::Error| e.to_string())
}

fn parse_scheme(s: &str) -> std::result::Result<FoldScheme, String> {
    s.parse().map_err(|e: emorec::Error| e.to_string())
}

fn parse_labels(s: &str) -> std::result::Result<LabelScheme, String> {
    s.parse().map_err(|e: emorec::Error| e.to_string())
}

fn parse_text(s: &str) -> std::result::Result<TextCondition, String> {
    s.parse().map_err(|e: emorec::Error| e.to_string())
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    word_table: Option<PathBuf>,
    #[arg(long)]
    sentences_ref: Option<PathBuf>,
    #[arg(long)]
    sentences_asr: Option<PathBuf>,
    /// Directory of precomputed feature files.
    #[arg(long)]
    feature_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// session5, speaker10 or single-session5.
    #[arg(long, value_parser = parse_scheme)]
    fold_scheme: Option<FoldScheme>,
    /// 4way or 5way.
    #[arg(long, value_parser = parse_labels)]
    labels: Option<LabelScheme>,
    /// ref, asr or mix.
    #[arg(long, value_parser = parse_text)]
    text: Option<TextCondition>,
    /// Context span "before,after".
    #[arg(long, value_parser = parse_span, allow_hyphen_values = true, value_name = "C1,C2")]
    context: Option<ContextSpan>,
    /// Comma list of audio25, fbk250, glove, bert.
    #[arg(long, value_parser = parse_features)]
    features: Option<FeatureSet>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fold name for train / evaluate.
    #[arg(long)]
    fold: Option<String>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(Overrides {
            manifest: self.manifest.clone(),
            word_table: self.word_table.clone(),
            sentences_ref: self.sentences_ref.clone(),
            sentences_asr: self.sentences_asr.clone(),
            feature_dir: self.feature_dir.clone(),
            out: self.out.clone(),
            fold_scheme: self.fold_scheme,
            labels: self.labels,
            text: self.text,
            context: self.context,
            features: self.features,
            seed: self.seed,
            fold: self.fold.clone(),
            checkpoint: self.checkpoint.clone(),
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::ExtractFeatures(c) => extract_features(&c.resolve()?),
        Command::EmbedAlign(c) => embed_align(&c.resolve()?),
        Command::Train(c) => train(&c.resolve()?),
        Command::Evaluate(c) => evaluate(&c.resolve()?),
        Command::Cv { common, emit_table } => cv(&common.resolve()?, emit_table),
        Command::Synth { common, dialogues, utterances_per_dialogue } => {
            let mut cfg = common.resolve()?;
            if let Some(n) = dialogues {
                cfg.synth.n_dialogues = n;
            }
            if let Some(n) = utterances_per_dialogue {
                cfg.synth.utterances_per_dialogue = n;
            }
            synth(&cfg)
        }
        Command::Gradcheck { common, tolerance } => gradcheck(&common.resolve()?, tolerance),
    }
}

fn needs(cfg: &RunConfig) -> CorpusNeeds {
    let f = cfg.model.features;
    CorpusNeeds { audio: f.uses_tsb(), glove: f.glove }
}

fn load_corpus(cfg: &RunConfig, needs: CorpusNeeds) -> Result<Corpus> {
    Ok(Corpus::load(cfg.manifest()?, &cfg.corpus_paths(), needs)?)
}

fn setup<'a>(cfg: &'a RunConfig, out: Option<&'a Path>) -> Result<CvSetup<'a>> {
    Ok(CvSetup { model: &cfg.model, train: &cfg.train, labels: cfg.labels()?, condition: cfg.text()?, out_dir: out })
}

/// Utterance ids for `train` (`test = false`) or `evaluate` (`test = true`).
fn split_ids(cfg: &RunConfig, records: &[ManifestRecord], test: bool) -> Result<(String, Vec<String>)> {
    match &cfg.experiment.fold {
        None => Ok(("all".into(), records.iter().map(|r| r.utt_id.clone()).collect())),
        Some(name) => {
            let plan = make_folds(records, cfg.fold_scheme()?)?;
            let fold = plan.folds.iter().find(|f| &f.name == name).ok_or_else(|| {
                let names: Vec<&str> = plan.folds.iter().map(|f| f.name.as_str()).collect();
                CliError::Usage(format!("no fold {name:?} in the {} plan (have {names:?})", plan.scheme))
            })?;
            Ok((name.clone(), if test { fold.test.clone() } else { fold.train.clone() }))
        }
    }
}

fn extract_features(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out()?;
    let mut paths = cfg.corpus_paths();
    paths.feature_dir = None;
    let corpus = Corpus::load(cfg.manifest()?, &paths, CorpusNeeds { audio: true, glove: false })?;
    let n = corpus.write_features(out)?;
    write_stamp(out, cfg, "extract-features")?;
    println!("wrote {n} feature files for {} utterances to {}", corpus.len(), out.display());
    Ok(())
}

fn embed_align(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out()?;
    let manifest = cfg.manifest()?;
    let table_path = cfg
        .data
        .word_table
        .as_deref()
        .ok_or_else(|| CliError::Usage("embed-align needs --word-table".into()))?;
    let table = load_word_table(table_path)?;
    let records = read_manifest(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(out).map_err(emorec::Error::from)?;
    for r in &records {
        let frames = match &cfg.data.feature_dir {
            Some(dir) => {
                emorec::dsp::read_feature_file(&dir.join(format!("{}.audio25.emof", r.utt_id)), StreamTag::Combined)?
                    .frames()
            }
            None => frame_signal(&read_wav(&base.join(&r.audio_path))?, &FramingSpec::SHORT)?.len(),
        };
        let m = words_to_frames(&r.ref_alignments, &table, frames, FramingSpec::SHORT.frame_shift_ms)?;
        write_feature_file(&out.join(format!("{}.glove.emof", r.utt_id)), &m)?;
    }
    write_stamp(out, cfg, "embed-align")?;
    println!("wrote {} word-frame files to {}", records.len(), out.display());
    Ok(())
}

fn train(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out()?;
    let (name, ids) = split_ids(cfg, &read_manifest(cfg.manifest()?)?, false)?;
    let corpus = load_corpus(cfg, needs(cfg))?;
    let setup = setup(cfg, Some(out))?;
    let (model, fitted) = train_split(&corpus, &setup, &name, &ids, cfg.train.seed)?;
    std::fs::create_dir_all(out).map_err(emorec::Error::from)?;
    save_checkpoint(&out.join("checkpoint.emow"), model.params())?;
    write_history_csv(&out.join("history.csv"), &fitted.history)?;
    std::fs::write(out.join("model.toml"), model.config().to_toml()?).map_err(emorec::Error::from)?;
    write_stamp(out, cfg, "train")?;
    let best = &fitted.history[fitted.best_epoch - 1];
    println!(
        "trained on {name}: best epoch {} of {}, validation WA {:.4} UA {:.4}",
        fitted.best_epoch,
        fitted.history.len(),
        best.val_wa,
        best.val_ua
    );
    Ok(())
}

fn evaluate(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out()?;
    let ckpt = cfg
        .experiment
        .checkpoint
        .as_deref()
        .ok_or_else(|| CliError::Usage("evaluate needs --checkpoint".into()))?;
    let model = TwoBranchModel::from_parts(cfg.model.clone(), load_checkpoint(ckpt)?)?;
    let (name, ids) = split_ids(cfg, &read_manifest(cfg.manifest()?)?, true)?;
    let corpus = load_corpus(cfg, needs(cfg))?;
    let setup = setup(cfg, Some(out))?;
    let preds = predict_split(&corpus, &setup, &model, &name, &ids)?;
    let m = prediction_metrics(&preds, setup.labels.n_classes())?;
    let mut report = String::new();
    let _ = writeln!(report, "split = \"{name}\"\nutterances = {}\nwa = {:?}\nua = {:?}", preds.len(), m.wa, m.ua);
    let _ = writeln!(report, "confusion = {:?}", m.confusion);
    let mut tsv = String::from("utt_id\tlabel\tpredicted\n");
    for p in &preds {
        let _ = writeln!(tsv, "{}\t{}\t{}", p.utt_id, p.label, p.predicted);
    }
    std::fs::create_dir_all(out).map_err(emorec::Error::from)?;
    std::fs::write(out.join("report.toml"), report).map_err(emorec::Error::from)?;
    std::fs::write(out.join("predictions.tsv"), tsv).map_err(emorec::Error::from)?;
    write_stamp(out, cfg, "evaluate")?;
    println!("{name}: WA {:.2}% UA {:.2}% over {} utterances", 100.0 * m.wa, 100.0 * m.ua, preds.len());
    Ok(())
}

fn system_name(cfg: &RunConfig) -> String {
    let f = cfg.model.features;
    if f.uses_tab() {
        format!("{} context {}", f, cfg.model.tab.span)
    } else {
        f.to_string()
    }
}

fn cv(cfg: &RunConfig, emit_table: bool) -> Result<()> {
    let out = cfg.out()?;
    std::fs::create_dir_all(out).map_err(emorec::Error::from)?;
    let corpus = load_corpus(cfg, needs(cfg))?;
    let plan = make_folds(corpus.records(), cfg.fold_scheme()?)?;
    let report = run_cv(&corpus, &setup(cfg, Some(out))?, &plan)?;
    write_stamp(out, cfg, "cv")?;
    print!("{}", report.table());
    if emit_table {
        let title = format!("{} ({}, {} text, {})", plan.scheme, report.labels, report.condition, corpus.len());
        println!();
        print!("{}", summary_table(&title, &[(system_name(cfg), &report)]));
    }
    Ok(())
}

fn synth(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out()?;
    let summary = emorec::synth::generate(&cfg.synth, out)?;
    // a ready-to-use run configuration next to the data
    let mut run = RunConfig::default();
    run.data.manifest = Some(emorec::synth::MANIFEST_FILE.into());
    run.data.word_table = Some(emorec::synth::WORD_TABLE_FILE.into());
    run.data.sentences_ref = Some(emorec::synth::SENT_REF_FILE.into());
    run.data.sentences_asr = Some(emorec::synth::SENT_ASR_FILE.into());
    run.experiment.fold_scheme = FoldScheme::Session5.to_string();
    let text = run.to_toml()?;
    std::fs::write(out.join("emorec.toml"), text).map_err(emorec::Error::from)?;
    write_stamp(out, cfg, "synth")?;
    println!(
        "wrote {} utterances ({} ambiguous, {} without ASR) to {}",
        summary.n_utterances,
        summary.n_ambiguous,
        summary.n_asr_missing,
        out.display()
    );
    Ok(())
}

fn random_tensor(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("sized")
}

fn gradcheck(cfg: &RunConfig, tolerance: f64) -> Result<()> {
    let mut small = cfg.model.clone();
    small.tsb.encoder_dim = 4;
    small.tsb.n_blocks = small.tsb.n_blocks.min(2);
    small.tab.proj_dim = 3;
    small.tab.sentence_dim = 6;
    small.fusion.hidden_dim = 5;
    small.attention.attn_hidden = 3;
    let features = small.features;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let mut model = TwoBranchModel::new(small, cfg.train.seed)?;
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        model.params_mut().get_mut(id).data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.4..0.4));
    }
    let frames = 4;
    let a25 = random_tensor(frames, AUDIO25_DIM, &mut rng);
    let f250 = random_tensor(frames, FBK250_DIM, &mut rng);
    let glove = random_tensor(frames, GLOVE_DIM, &mut rng);
    let span = model.config().tab.span;
    let window = ContextWindow {
        span,
        dim: 6,
        vectors: (0..span.len()).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
        mask: (0..span.len()).map(|i| span.len() == 1 || i != 0).collect(),
        ids: (0..span.len()).map(|i| Some(format!("slot{i}"))).collect(),
    };
    let input = ModelInput {
        tsb: TsbInput {
            audio25: features.audio25.then_some(&a25),
            fbk250: features.fbk250.then_some(&f250),
            glove: features.glove.then_some(&glove),
        },
        context: features.uses_tab().then_some(&window),
    };
    let label = rng.gen_range(0..model.n_classes());
    let m = &model;
    let module = |g: &mut emorec::nn::Graph, s: &emorec::nn::ParamStore, _x: &[emorec::nn::NodeId]| {
        m.sample_loss(g, s, &input, label, &mut Dropout::eval())
    };
    let mut opts = GradCheckOptions::with_tolerance(tolerance);
    opts.seed = cfg.train.seed;
    let report = check_gradients(&module, model.params(), &[], &opts)?;
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::GradientMismatch(format!("max relative error {:.3e} exceeds {tolerance:e}", report.max_rel_error)))
    }
}
