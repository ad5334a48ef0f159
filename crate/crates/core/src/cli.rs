//! Command-line front end.
//!
//! Exit status: 0 on success, 1 for usage errors and invalid option values, 2
//! for data errors (I/O, parsing, unknown ids, dimension mismatches) and 3
//! when training hits numerically degenerate data.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::io::{self, EmbeddingFormat, EmbeddingTable, EnrollMap, ModelMeta};
use crate::metrics::{det_points, eer, eer_staircase, min_dcf};
use crate::model::{em_train, EmOptions, PsdaModel, SideStats};
use crate::scoring::{cosine_score, Label, ScoreReport, ScoredTrial, Scorer};
use crate::synth::{synth_dataset, synth_trials};
use crate::vmf::UnitVec;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "psda", version, about = "Von Mises-Fisher backend for embedding verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from labeled embeddings.
    Train(TrainArgs),
    /// Score trials with a trained model or with cosine similarity.
    Score(ScoreArgs),
    /// EER, minDCF and DET points from a labeled score file.
    Eval(EvalArgs),
    /// Generate synthetic embeddings from given model parameters.
    Synth(SynthArgs),
    /// Print the parameters stored in a model file.
    Info(InfoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Tsv,
    Bin,
}

impl From<FormatArg> for EmbeddingFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Tsv => EmbeddingFormat::Tsv,
            FormatArg::Bin => EmbeddingFormat::Bin,
        }
    }
}

#[derive(Debug, Args)]
pub struct EmbeddingArgs {
    /// Embedding file.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Embedding file format; by default `.bin` files are binary and anything
    /// else is TSV.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

impl EmbeddingArgs {
    fn load(&self) -> Result<EmbeddingTable> {
        let format = self
            .format
            .map(EmbeddingFormat::from)
            .unwrap_or_else(|| EmbeddingFormat::from_path(&self.embeddings));
        EmbeddingTable::load(&self.embeddings, format)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub emb: EmbeddingArgs,
    /// Training labels, `segment<TAB>speaker` per line.
    #[arg(long)]
    pub labels: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    /// Hold the between-speaker concentration at 0 (uniform speaker prior).
    #[arg(long)]
    pub b_zero: bool,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub rel_tol: f64,
    /// Print the log-likelihood after every iteration.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub emb: EmbeddingArgs,
    /// Model file; required unless `--cosine` is given.
    #[arg(long, required_unless_present = "cosine")]
    pub model: Option<PathBuf>,
    /// Enrollment map, `model seg1 [seg2 ...]` per line. Without it every
    /// enrollment id is looked up as a single segment.
    #[arg(long)]
    pub enroll: Option<PathBuf>,
    /// Trials, `enroll test [tar|non]` per line.
    #[arg(long)]
    pub trials: PathBuf,
    /// Output score file.
    #[arg(long)]
    pub out: PathBuf,
    /// Score with the cosine baseline; enrollment must be single-segment.
    #[arg(long)]
    pub cosine: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Score file, `enroll test score [tar|non]` per line.
    #[arg(long)]
    pub scores: PathBuf,
    /// Labeled trials used when the score file carries no labels.
    #[arg(long)]
    pub trials: Option<PathBuf>,
    /// Target prior for minDCF.
    #[arg(long, default_value_t = 0.05)]
    pub p_tar: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_miss: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_fa: f64,
    /// Write DET points here, `p_fa p_miss` per line.
    #[arg(long)]
    pub det: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub dim: usize,
    /// Within-speaker concentration.
    #[arg(long)]
    pub w: f64,
    /// Between-speaker concentration.
    #[arg(long)]
    pub b: f64,
    /// Speaker mean direction, comma separated; defaults to the first basis
    /// vector.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu: Option<Vec<f64>>,
    /// Training speakers.
    #[arg(long)]
    pub speakers: usize,
    /// Embeddings per training speaker.
    #[arg(long)]
    pub per_speaker: usize,
    /// Evaluation speakers, disjoint from the training ones. With 0 no
    /// evaluation set is written.
    #[arg(long, default_value_t = 0)]
    pub eval_speakers: usize,
    /// Embeddings per evaluation speaker.
    #[arg(long, default_value_t = 10)]
    pub eval_per_speaker: usize,
    /// Leading segments per evaluation speaker used for enrollment.
    #[arg(long, default_value_t = 1)]
    pub enroll_per_speaker: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Tsv)]
    pub format: FormatArg,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(long)]
    pub model: PathBuf,
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) => 1,
        Error::Degenerate(_) | Error::CappedConcentration { .. } => 3,
        Error::DimensionMismatch { .. }
        | Error::NotUnit { .. }
        | Error::Empty(_)
        | Error::Parse { .. }
        | Error::Data(_)
        | Error::Io { .. } => 2,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status. Diagnostics go to stderr as a single line.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("psda: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cmd: Command, out: &mut dyn std::io::Write) -> Result<()> {
    let text = match cmd {
        Command::Train(a) => train(&a)?,
        Command::Score(a) => score(&a)?,
        Command::Eval(a) => eval(&a)?,
        Command::Synth(a) => synth(&a)?,
        Command::Info(a) => info(&a)?,
    };
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<stdout>", e))
}

fn train(a: &TrainArgs) -> Result<String> {
    if !(a.rel_tol >= 0.0) {
        return Err(Error::Domain(format!("--rel-tol must be >= 0, got {}", a.rel_tol)));
    }
    let table = a.emb.load()?;
    let labels = io::load_labels(&a.labels)?;
    let speakers: Vec<SideStats> = io::speaker_stats(&table, &labels)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let opts = EmOptions {
        max_iters: a.max_iters,
        rel_tol: a.rel_tol,
        fix_b_zero: a.b_zero,
        ..EmOptions::default()
    };
    let res = em_train(&speakers, &opts)?;
    let meta = ModelMeta::new(speakers.len(), labels.len());
    io::save_model(&a.out, &res.model, &meta)?;

    let mut s = String::new();
    if a.verbose {
        for (i, ll) in res.trace.iter().enumerate() {
            writeln!(s, "iter {i:3}  loglik {ll:.10e}").unwrap();
        }
    }
    writeln!(
        s,
        "trained on {} speakers, {} embeddings: {} iterations ({})",
        meta.speakers,
        meta.observations,
        res.iterations,
        if res.converged { "converged" } else { "iteration limit" }
    )
    .unwrap();
    writeln!(s, "w = {:.6}  b = {:.6}", res.model.w(), res.model.b()).unwrap();
    Ok(s)
}

fn enroll_segments<'a>(map: Option<&'a EnrollMap>, id: &'a str) -> Result<Vec<&'a str>> {
    match map {
        Some(m) => m
            .get(id)
            .map(|segs| segs.iter().map(String::as_str).collect())
            .ok_or_else(|| Error::Data(format!("unknown enrollment model '{id}'"))),
        None => Ok(vec![id]),
    }
}

fn lookup<'a>(table: &'a EmbeddingTable, id: &str) -> Result<&'a UnitVec> {
    table
        .get(id)
        .ok_or_else(|| Error::Data(format!("unknown embedding id '{id}'")))
}

fn score(a: &ScoreArgs) -> Result<String> {
    let table = a.emb.load()?;
    let trials = io::load_trials(&a.trials)?;
    let map = a.enroll.as_deref().map(io::load_enroll_map).transpose()?;

    let scores: Vec<f64> = if a.cosine {
        let pairs = trials
            .iter()
            .map(|t| {
                let segs = enroll_segments(map.as_ref(), &t.enroll)?;
                let [seg] = segs[..] else {
                    return Err(Error::Data(format!(
                        "cosine scoring needs single-segment enrollment, '{}' has {}",
                        t.enroll,
                        segs.len()
                    )));
                };
                Ok((lookup(&table, seg)?, lookup(&table, &t.test)?))
            })
            .collect::<Result<Vec<_>>>()?;
        pairs
            .par_iter()
            .map(|(e, t)| cosine_score(e, t))
            .collect::<Result<_>>()?
    } else {
        let path = a.model.as_deref().expect("clap requires --model without --cosine");
        let (model, _) = io::load_model(path)?;
        score_with_model(&model, &table, map.as_ref(), &trials)?
    };

    let report = ScoreReport {
        trials: trials
            .into_iter()
            .zip(scores)
            .map(|(t, score)| ScoredTrial {
                enroll: t.enroll,
                test: t.test,
                score,
                label: t.label,
            })
            .collect(),
    };
    io::write_scores(&a.out, &report)?;
    Ok(format!("scored {} trials\n", report.trials.len()))
}

/// Scores each trial, preparing every distinct enrollment and test side once.
pub fn score_with_model(
    model: &PsdaModel,
    table: &EmbeddingTable,
    map: Option<&EnrollMap>,
    trials: &[io::TrialSpec],
) -> Result<Vec<f64>> {
    let scorer = Scorer::new(model);
    let mut enrolls = HashMap::new();
    let mut tests = HashMap::new();
    for t in trials {
        if !enrolls.contains_key(t.enroll.as_str()) {
            let stats = table.stats(&enroll_segments(map, &t.enroll)?)?;
            enrolls.insert(t.enroll.as_str(), scorer.prepare(&stats)?);
        }
        if !tests.contains_key(t.test.as_str()) {
            let stats = SideStats::from_vec(lookup(table, &t.test)?);
            tests.insert(t.test.as_str(), scorer.prepare(&stats)?);
        }
    }
    Ok(trials
        .par_iter()
        .map(|t| scorer.score(&enrolls[t.enroll.as_str()], &tests[t.test.as_str()]))
        .collect())
}

fn eval(a: &EvalArgs) -> Result<String> {
    let mut report = io::load_scores(&a.scores)?;
    if let Some(path) = &a.trials {
        let labels: HashMap<(String, String), Option<Label>> = io::load_trials(path)?
            .into_iter()
            .map(|t| ((t.enroll, t.test), t.label))
            .collect();
        for t in &mut report.trials {
            if t.label.is_none() {
                t.label = labels
                    .get(&(t.enroll.clone(), t.test.clone()))
                    .copied()
                    .flatten();
            }
        }
    }
    let scores = report.labeled()?;
    let e = eer(&scores);
    let stair = eer_staircase(&scores);
    let dcf = min_dcf(&scores, a.p_tar, a.c_miss, a.c_fa)?;
    if let Some(det) = &a.det {
        io::write_det(det, &det_points(&scores))?;
    }
    let mut s = String::new();
    writeln!(
        s,
        "trials: {} target, {} non-target",
        scores.targets().len(),
        scores.nontargets().len()
    )
    .unwrap();
    writeln!(s, "EER: {:.4} %", 100.0 * e).unwrap();
    writeln!(s, "EER (staircase): {:.4} %", 100.0 * stair).unwrap();
    writeln!(s, "minDCF (p_tar={}): {:.4}", a.p_tar, dcf).unwrap();
    Ok(s)
}

fn embedding_path(dir: &Path, stem: &str, format: FormatArg) -> PathBuf {
    dir.join(match format {
        FormatArg::Tsv => format!("{stem}.tsv"),
        FormatArg::Bin => format!("{stem}.bin"),
    })
}

fn write_embeddings(table: &EmbeddingTable, path: &Path, format: FormatArg) -> Result<()> {
    match format {
        FormatArg::Tsv => table.write_tsv_single(path),
        FormatArg::Bin => table.write_bin(path),
    }
}

fn synth(a: &SynthArgs) -> Result<String> {
    if a.dim < 2 {
        return Err(Error::Domain(format!("--dim must be at least 2, got {}", a.dim)));
    }
    if a.speakers < 2 || a.per_speaker < 1 {
        return Err(Error::Domain(
            "need --speakers >= 2 and --per-speaker >= 1".into(),
        ));
    }
    let mu = match &a.mu {
        None => UnitVec::basis(a.dim, 0),
        Some(v) if v.len() != a.dim => {
            return Err(Error::Domain(format!(
                "--mu has {} entries but --dim is {}",
                v.len(),
                a.dim
            )))
        }
        Some(v) => UnitVec::from_direction(v)
            .ok_or_else(|| Error::Domain("--mu must be a non-zero vector".into()))?,
    };
    let truth = PsdaModel::new(a.w, a.b, mu)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;

    let train = synth_dataset(&truth, a.speakers, a.per_speaker, a.seed, "t")?;
    write_embeddings(&train.table, &embedding_path(&a.out_dir, "train", a.format), a.format)?;
    io::write_labels(&a.out_dir.join("train.labels"), &train.labels)?;
    io::save_model(
        &a.out_dir.join("truth.toml"),
        &truth,
        &ModelMeta::new(a.speakers, train.table.len()),
    )?;
    let mut s = format!(
        "wrote {} training embeddings for {} speakers to {}\n",
        train.table.len(),
        a.speakers,
        a.out_dir.display()
    );

    if a.eval_speakers > 0 {
        let data = synth_dataset(
            &truth,
            a.eval_speakers,
            a.eval_per_speaker,
            a.seed.wrapping_add(1),
            "e",
        )?;
        write_embeddings(&data.table, &embedding_path(&a.out_dir, "eval", a.format), a.format)?;
        io::write_labels(&a.out_dir.join("eval.labels"), &data.labels)?;
        let (map, trials) = synth_trials(&data, a.enroll_per_speaker);
        io::write_enroll_map(&a.out_dir.join("enroll.txt"), &map)?;
        io::write_trials(&a.out_dir.join("trials.txt"), &trials)?;
        writeln!(
            s,
            "wrote {} evaluation embeddings, {} enrollment models, {} trials",
            data.table.len(),
            map.entries().len(),
            trials.len()
        )
        .unwrap();
    }
    Ok(s)
}

fn info(a: &InfoArgs) -> Result<String> {
    let (model, meta) = io::load_model(&a.model)?;
    let mut s = String::new();
    writeln!(s, "format:       {}", io::MODEL_FORMAT).unwrap();
    writeln!(s, "dim:          {}", model.dim()).unwrap();
    writeln!(s, "order:        {}", model.order().value()).unwrap();
    writeln!(s, "w:            {:.16e}", model.w()).unwrap();
    writeln!(s, "b:            {:.16e}", model.b()).unwrap();
    let mu: Vec<String> = model.mu().as_slice().iter().map(|m| format!("{m:.6}")).collect();
    writeln!(s, "mu:           [{}]", mu.join(", ")).unwrap();
    writeln!(s, "speakers:     {}", meta.speakers).unwrap();
    writeln!(s, "observations: {}", meta.observations).unwrap();
    writeln!(s, "tool version: {}", meta.tool_version).unwrap();
    Ok(s)
}
