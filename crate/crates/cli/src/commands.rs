//! Subcommand implementations. Every artifact is written atomically and is
//! byte-identical across reruns with the same inputs, config, and seed.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

use exdial::annotation::{
    consolidate_corpus, fleiss_kappa, group_records, krippendorff_alpha_ordinal, AnnotationRecord,
    AnnotationSet, ConsolidateConfig, Dimension, LabeledCorpus, LabeledDialogue, QualityMode,
    Split,
};
use exdial::corpus::{extract_dialogues, parse_dump, select_candidate_threads, CommentRecord};
use exdial::crf::{evaluate_tagger, plan_folds, train_tagger};
use exdial::flow::{
    distribution_csv, flows_csv, label_distribution, mine_flows, quality_conditioned_csv,
    quality_conditioned_distribution, score_distribution, scores_csv, Scope,
};
use exdial::io::{read_jsonl, write_atomic, write_jsonl_atomic};
use exdial::quality::{
    early_prediction_curve, evaluate_quality, gold_scores, predict_with_predicted_labels,
    train_quality, Augmentation, BaselinePredictor, QualityHyper,
};
use exdial::{CrfModel, QualityEnsemble, Scalar, TaggerHyper};

use crate::config::{require, resolve, FileConfig};
use crate::Command;

pub fn run(command: Command, config: &FileConfig) -> Result<()> {
    match command {
        Command::Ingest {
            dump,
            output,
            per_month_limit,
        } => ingest(config, dump, output, per_month_limit),
        Command::Extract {
            dump,
            output,
            min_turns,
            min_score,
            per_month_limit,
        } => extract(config, dump, output, min_turns, min_score, per_month_limit),
        Command::Consolidate {
            dialogues,
            annotations,
            output,
            seed,
            restarts,
            iterations,
            smoothing,
            quality_mode,
            train_weight,
            test_weight,
        } => consolidate(
            config,
            dialogues,
            annotations,
            output,
            seed,
            restarts,
            iterations,
            smoothing,
            quality_mode,
            train_weight,
            test_weight,
        ),
        Command::Agree {
            annotations,
            output,
        } => agree(config, annotations, output),
        Command::Analyze { corpus, output_dir } => {
            let corpus = load_corpus(config, corpus)?;
            let dir = out_dir(config, output_dir)?;
            let files = write_analysis(&corpus, &dir)?;
            log::debug!("wrote {} analysis files", files.len());
            Ok(())
        }
        Command::MineFlows {
            corpus,
            dimension,
            top_k,
            output,
        } => {
            let corpus = load_corpus(config, corpus)?;
            let dimension = parse_dimension(&dimension)?;
            let flows = mine_flows(&corpus, dimension, top_k)?;
            let mut buffer = Vec::new();
            flows_csv(&flows, &mut buffer)?;
            emit(output.as_deref(), &buffer)
        }
        Command::TrainTagger {
            corpus,
            dimension,
            output,
            seed,
            lambda,
            epochs,
            step_size,
            batch_size,
            all_splits,
        } => train_tagger_cmd(
            config, corpus, dimension, output, seed, lambda, epochs, step_size, batch_size,
            all_splits,
        ),
        Command::EvalTagger {
            corpus,
            dimension,
            folds,
            seed,
            output,
        } => eval_tagger_cmd(config, corpus, dimension, folds, seed, output),
        Command::TrainQuality {
            corpus,
            augmentation,
            output,
            seed,
            lambda,
            folds,
            min_frequency,
        } => train_quality_cmd(
            config,
            corpus,
            augmentation,
            output,
            seed,
            lambda,
            folds,
            min_frequency,
        ),
        Command::EvalQuality {
            corpus,
            ensemble,
            taggers_dir,
            output,
        } => eval_quality_cmd(config, corpus, ensemble, taggers_dir, output),
        Command::EarlyEval {
            corpus,
            ensemble,
            percentages,
            output,
        } => early_eval_cmd(config, corpus, ensemble, percentages, output),
        Command::Report {
            corpus,
            output_dir,
            top_k,
        } => report(config, corpus, output_dir, top_k),
    }
}

// --- shared plumbing --------------------------------------------------------

fn parse_dimension(s: &str) -> Result<Dimension> {
    let dimension = Dimension::from_str(s)?;
    if dimension == Dimension::Quality {
        bail!("quality is a dialogue-level dimension; use move, act, or topic");
    }
    Ok(dimension)
}

fn require_input(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        bail!("{what} not found: {}", path.display());
    }
    Ok(())
}

fn load_dump(config: &FileConfig, flag: Option<PathBuf>) -> Result<Vec<CommentRecord>> {
    let path = require(flag, config.paths.dump.clone(), "the dump path (--dump)")?;
    require_input(&path, "dump")?;
    read_jsonl(&path).with_context(|| format!("reading dump {}", path.display()))
}

fn load_dialogues(
    config: &FileConfig,
    flag: Option<PathBuf>,
) -> Result<Vec<exdial::corpus::Dialogue>> {
    let path = require(
        flag,
        config.paths.dialogues.clone(),
        "the dialogues path (--dialogues)",
    )?;
    require_input(&path, "dialogues file")?;
    read_jsonl(&path).with_context(|| format!("reading dialogues {}", path.display()))
}

fn load_corpus(config: &FileConfig, flag: Option<PathBuf>) -> Result<LabeledCorpus> {
    let path = require(
        flag,
        config.paths.corpus.clone(),
        "the corpus path (--corpus)",
    )?;
    require_input(&path, "corpus file")?;
    let dialogues: Vec<LabeledDialogue> =
        read_jsonl(&path).with_context(|| format!("reading corpus {}", path.display()))?;
    Ok(LabeledCorpus { dialogues })
}

fn load_annotations(config: &FileConfig, flag: Option<PathBuf>) -> Result<Vec<AnnotationRecord>> {
    let path = require(
        flag,
        config.paths.annotations.clone(),
        "the annotations path (--annotations)",
    )?;
    require_input(&path, "annotations file")?;
    read_jsonl(&path).with_context(|| format!("reading annotations {}", path.display()))
}

fn out_dir(config: &FileConfig, flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = require(
        flag,
        config.paths.reports.clone(),
        "the output directory (--output-dir)",
    )?;
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

/// Write bytes to a file atomically, or to stdout when no path is given.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(path) => {
            write_atomic(path, |out| {
                out.write_all(bytes)?;
                Ok(())
            })
            .with_context(|| format!("writing {}", path.display()))?;
            Ok(())
        }
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    Ok(writer.into_inner()?)
}

// --- corpus construction ----------------------------------------------------

fn ingest(
    config: &FileConfig,
    dump: Option<PathBuf>,
    output: Option<PathBuf>,
    per_month_limit: Option<usize>,
) -> Result<()> {
    let records = load_dump(config, dump)?;
    let limit = resolve(per_month_limit, config.extract.per_month_limit, 100);
    let trees = parse_dump(records)?;
    let trees = select_candidate_threads(trees, limit)?;
    let retained: Vec<CommentRecord> = trees
        .iter()
        .flat_map(|t| t.sorted_records().into_iter().cloned())
        .collect();
    // No config fallback here: the dump config key names the input, and
    // inputs are never overwritten.
    let output = require(output, None, "the output path (--output)")?;
    write_jsonl_atomic(&retained, &output)
        .with_context(|| format!("writing {}", output.display()))?;
    log::debug!("kept {} threads, {} records", trees.len(), retained.len());
    Ok(())
}

fn extract(
    config: &FileConfig,
    dump: Option<PathBuf>,
    output: Option<PathBuf>,
    min_turns: Option<usize>,
    min_score: Option<i64>,
    per_month_limit: Option<usize>,
) -> Result<()> {
    let records = load_dump(config, dump)?;
    let min_turns = resolve(min_turns, config.extract.min_turns, 6);
    let min_score = resolve(min_score, config.extract.min_first_level_score, 2);
    let mut trees = parse_dump(records)?;
    if let Some(limit) = per_month_limit.or(config.extract.per_month_limit) {
        trees = select_candidate_threads(trees, limit)?;
    }
    let mut dialogues = Vec::new();
    for tree in &trees {
        dialogues.extend(extract_dialogues(tree, min_turns, min_score)?);
    }
    let output = require(
        output,
        config.paths.dialogues.clone(),
        "the output path (--output)",
    )?;
    write_jsonl_atomic(&dialogues, &output)
        .with_context(|| format!("writing {}", output.display()))?;
    log::debug!("extracted {} dialogues", dialogues.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn consolidate(
    config: &FileConfig,
    dialogues: Option<PathBuf>,
    annotations: Option<PathBuf>,
    output: Option<PathBuf>,
    seed: Option<u64>,
    restarts: Option<usize>,
    iterations: Option<usize>,
    smoothing: Option<f64>,
    quality_mode: Option<String>,
    train_weight: Option<u64>,
    test_weight: Option<u64>,
) -> Result<()> {
    let dialogues = load_dialogues(config, dialogues)?;
    let records = load_annotations(config, annotations)?;
    let seed = require(seed, config.seed, "the seed (--seed)")?;
    let grouped = group_records(&records)?;

    let mut consolidate_config = ConsolidateConfig::<Scalar>::new(seed);
    consolidate_config.em.restarts = resolve(restarts, config.em.restarts, 10);
    consolidate_config.em.iterations = resolve(iterations, config.em.iterations, 50);
    consolidate_config.em.smoothing = smoothing.or(config.em.smoothing);
    consolidate_config.train_weight = resolve(train_weight, config.em.train_weight, 154);
    consolidate_config.test_weight = resolve(test_weight, config.em.test_weight, 50);
    let mode = resolve(
        quality_mode,
        config.em.quality_mode.clone(),
        "em".to_string(),
    );
    consolidate_config.quality_mode = match mode.as_str() {
        "em" => QualityMode::Em,
        "median" => QualityMode::Median,
        other => bail!("unknown quality mode {other:?} (expected em or median)"),
    };

    let corpus = consolidate_corpus(&dialogues, &grouped, &consolidate_config)?;
    let output = require(
        output,
        config.paths.corpus.clone(),
        "the output path (--output)",
    )?;
    write_jsonl_atomic(&corpus.dialogues, &output)
        .with_context(|| format!("writing {}", output.display()))?;
    Ok(())
}

// --- agreement --------------------------------------------------------------

fn agree(config: &FileConfig, annotations: Option<PathBuf>, output: Option<PathBuf>) -> Result<()> {
    let records = load_annotations(config, annotations)?;
    let grouped = group_records(&records)?;
    let mut rows = Vec::new();
    for &dimension in Dimension::TURN {
        if let Some(sets) = grouped.get(&dimension) {
            let counts = judgment_counts(sets, dimension.label_count());
            let kappa: Scalar = fleiss_kappa(&counts)?;
            rows.push(vec![
                dimension.as_str().to_string(),
                "fleiss_kappa".to_string(),
                format!("{kappa:.4}"),
            ]);
        }
    }
    if let Some(sets) = grouped.get(&Dimension::Quality) {
        let ratings: BTreeMap<String, BTreeMap<String, u32>> = sets
            .iter()
            .map(|set| {
                (
                    set.item_id.clone(),
                    set.judgments
                        .iter()
                        .map(|(annotator, &label)| (annotator.clone(), label as u32 + 1))
                        .collect(),
                )
            })
            .collect();
        let alpha: Scalar = krippendorff_alpha_ordinal(&ratings)?;
        rows.push(vec![
            "quality".to_string(),
            "krippendorff_alpha_ordinal".to_string(),
            format!("{alpha:.4}"),
        ]);
    }
    let bytes = csv_bytes(&["dimension", "metric", "value"], &rows)?;
    emit(output.as_deref(), &bytes)
}

fn judgment_counts(sets: &[AnnotationSet], label_count: usize) -> Vec<Vec<usize>> {
    sets.iter()
        .map(|set| {
            let mut row = vec![0usize; label_count];
            for &label in set.judgments.values() {
                row[label] += 1;
            }
            row
        })
        .collect()
}

// --- analysis ---------------------------------------------------------------

/// Distribution, quality-conditioned, and score CSVs; returns the file
/// names written.
fn write_analysis(corpus: &LabeledCorpus, dir: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for &dimension in Dimension::TURN {
        for scope in [Scope::Train, Scope::Test, Scope::All] {
            let name = format!("distribution_{}_{}.csv", dimension.as_str(), scope.as_str());
            match label_distribution(corpus, dimension, scope) {
                Ok(dist) => {
                    let mut buffer = Vec::new();
                    distribution_csv(&dist, &mut buffer)?;
                    emit(Some(&dir.join(&name)), &buffer)?;
                    files.push(name);
                }
                Err(exdial::Error::EmptyInput(_)) => {
                    log::warn!("skipping {name}: scope has no turns");
                }
                Err(e) => return Err(e.into()),
            }
        }
        let name = format!("quality_conditioned_{}.csv", dimension.as_str());
        let dist = quality_conditioned_distribution(corpus, dimension)?;
        let mut buffer = Vec::new();
        quality_conditioned_csv(&dist, &mut buffer)?;
        emit(Some(&dir.join(&name)), &buffer)?;
        files.push(name);
    }
    let dist = score_distribution(corpus)?;
    let mut buffer = Vec::new();
    scores_csv(&dist, &mut buffer)?;
    emit(Some(&dir.join("scores.csv")), &buffer)?;
    files.push("scores.csv".to_string());
    Ok(files)
}

fn report(
    config: &FileConfig,
    corpus: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    top_k: usize,
) -> Result<()> {
    let corpus = load_corpus(config, corpus)?;
    let dir = out_dir(config, output_dir)?;
    let mut files = write_analysis(&corpus, &dir)?;
    for &dimension in Dimension::TURN {
        let name = format!("flows_{}.csv", dimension.as_str());
        let flows = mine_flows(&corpus, dimension, top_k)?;
        let mut buffer = Vec::new();
        flows_csv(&flows, &mut buffer)?;
        emit(Some(&dir.join(&name)), &buffer)?;
        files.push(name);
    }
    files.sort();
    let manifest = serde_json::json!({ "files": files });
    write_atomic(&dir.join("manifest.json"), |out| {
        serde_json::to_writer_pretty(&mut *out, &manifest)?;
        out.write_all(b"\n")?;
        Ok(())
    })?;
    Ok(())
}

// --- tagger -----------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn train_tagger_cmd(
    config: &FileConfig,
    corpus: Option<PathBuf>,
    dimension: String,
    output: Option<PathBuf>,
    seed: Option<u64>,
    lambda: Option<f64>,
    epochs: Option<usize>,
    step_size: Option<f64>,
    batch_size: Option<usize>,
    all_splits: bool,
) -> Result<()> {
    let corpus = load_corpus(config, corpus)?;
    let dimension = parse_dimension(&dimension)?;
    let seed = require(seed, config.seed, "the seed (--seed)")?;
    let mut hyper = TaggerHyper::new(seed);
    hyper.lambda = resolve(lambda, config.tagger.lambda, 0.1);
    hyper.epochs = resolve(epochs, config.tagger.epochs, 30);
    hyper.step_size = resolve(step_size, config.tagger.step_size, 0.1);
    hyper.batch_size = resolve(batch_size, config.tagger.batch_size, 8);

    let model = if all_splits {
        train_tagger(corpus.dialogues.iter(), dimension, &hyper)?
    } else {
        train_tagger(corpus.split(Split::Train), dimension, &hyper)?
    };
    let output = require(output, None, "the output path (--output)")?;
    model
        .save(&output)
        .with_context(|| format!("writing {}", output.display()))?;
    Ok(())
}

fn eval_tagger_cmd(
    config: &FileConfig,
    corpus: Option<PathBuf>,
    dimension: String,
    folds: Option<usize>,
    seed: Option<u64>,
    output: Option<PathBuf>,
) -> Result<()> {
    let corpus = load_corpus(config, corpus)?;
    let dimension = parse_dimension(&dimension)?;
    let seed = require(seed, config.seed, "the seed (--seed)")?;
    let k = resolve(folds, config.tagger.folds, 5);
    let plan = plan_folds(corpus.dialogues.iter(), k, seed)?;
    let mut hyper = TaggerHyper::new(seed);
    hyper.lambda = config.tagger.lambda.unwrap_or(0.1);
    hyper.epochs = config.tagger.epochs.unwrap_or(30);
    hyper.step_size = config.tagger.step_size.unwrap_or(0.1);
    hyper.batch_size = config.tagger.batch_size.unwrap_or(8);
    let evaluation = evaluate_tagger(&corpus, dimension, &plan, &hyper)?;

    let mut rows: Vec<Vec<String>> = dimension
        .codes()
        .iter()
        .zip(&evaluation.per_label_f1)
        .map(|(code, f1)| vec![code.clone(), format!("{f1:.6}")])
        .collect();
    rows.push(vec![
        "macro".to_string(),
        format!("{:.6}", evaluation.macro_f1),
    ]);
    let bytes = csv_bytes(&["label", "f1"], &rows)?;
    emit(output.as_deref(), &bytes)
}

// --- quality ----------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn train_quality_cmd(
    config: &FileConfig,
    corpus: Option<PathBuf>,
    augmentation: String,
    output: Option<PathBuf>,
    seed: Option<u64>,
    lambda: Option<f64>,
    folds: Option<usize>,
    min_frequency: Option<usize>,
) -> Result<()> {
    let corpus = load_corpus(config, corpus)?;
    let augmentation = Augmentation::from_str(&augmentation)?;
    let seed = require(seed, config.seed, "the seed (--seed)")?;
    let mut hyper = QualityHyper::new(seed);
    hyper.lambda = resolve(lambda, config.quality.lambda, 1.0);
    hyper.folds = resolve(folds, config.quality.folds, 10);
    hyper.min_frequency = resolve(min_frequency, config.quality.min_frequency, 5);
    let ensemble = train_quality(corpus.split(Split::Train), augmentation, &hyper)?;
    let output = require(output, None, "the output path (--output)")?;
    ensemble
        .save(&output)
        .with_context(|| format!("writing {}", output.display()))?;
    Ok(())
}

fn load_ensemble(path: &Path) -> Result<QualityEnsemble> {
    require_input(path, "ensemble model file")?;
    QualityEnsemble::load(path).with_context(|| format!("loading ensemble {}", path.display()))
}

fn load_taggers(dir: &Path, needed: &[Dimension]) -> Result<BTreeMap<Dimension, CrfModel>> {
    let mut taggers = BTreeMap::new();
    for &dimension in needed {
        let path = dir.join(format!("{}.json", dimension.as_str()));
        require_input(&path, "tagger model file")?;
        let model =
            CrfModel::load(&path).with_context(|| format!("loading tagger {}", path.display()))?;
        taggers.insert(dimension, model);
    }
    Ok(taggers)
}

fn eval_quality_cmd(
    config: &FileConfig,
    corpus: Option<PathBuf>,
    ensemble: Option<PathBuf>,
    taggers_dir: Option<PathBuf>,
    output: Option<PathBuf>,
) -> Result<()> {
    let corpus = load_corpus(config, corpus)?;
    let ensemble_path = require(ensemble, None, "the ensemble path (--ensemble)")?;
    let ensemble = load_ensemble(&ensemble_path)?;
    let test: Vec<&LabeledDialogue> = corpus.split(Split::Test).collect();
    if test.is_empty() {
        bail!("corpus has no test split to evaluate on");
    }
    let gold: Vec<Scalar> = gold_scores(test.iter().copied());

    let mut rows = Vec::new();
    let baseline = BaselinePredictor::fit(corpus.split(Split::Train))?;
    let baseline_pred: Vec<Scalar> = test.iter().map(|_| baseline.predict()).collect();
    let metrics = evaluate_quality(&baseline_pred, &gold)?;
    rows.push(vec![
        "baseline".to_string(),
        "gold".to_string(),
        format!("{:.6}", metrics.rmse),
        format!("{:.6}", metrics.mae),
    ]);

    let pred: Vec<Scalar> = test
        .iter()
        .map(|d| ensemble.predict(d, 1.0))
        .collect::<exdial::Result<_>>()?;
    let metrics = evaluate_quality(&pred, &gold)?;
    rows.push(vec![
        ensemble.augmentation.as_str().to_string(),
        "gold".to_string(),
        format!("{:.6}", metrics.rmse),
        format!("{:.6}", metrics.mae),
    ]);

    if let Some(dir) = taggers_dir {
        let taggers = load_taggers(&dir, ensemble.augmentation.dimensions())?;
        let pred: Vec<Scalar> = test
            .iter()
            .map(|d| predict_with_predicted_labels(&ensemble, d, &taggers))
            .collect::<exdial::Result<_>>()?;
        let metrics = evaluate_quality(&pred, &gold)?;
        rows.push(vec![
            ensemble.augmentation.as_str().to_string(),
            "predicted".to_string(),
            format!("{:.6}", metrics.rmse),
            format!("{:.6}", metrics.mae),
        ]);
    }

    let bytes = csv_bytes(&["augmentation", "label_source", "rmse", "mae"], &rows)?;
    emit(output.as_deref(), &bytes)
}

fn early_eval_cmd(
    config: &FileConfig,
    corpus: Option<PathBuf>,
    ensemble: Option<PathBuf>,
    percentages: Option<String>,
    output: Option<PathBuf>,
) -> Result<()> {
    let corpus = load_corpus(config, corpus)?;
    let ensemble_path = require(ensemble, None, "the ensemble path (--ensemble)")?;
    let ensemble = load_ensemble(&ensemble_path)?;
    let test: Vec<&LabeledDialogue> = corpus.split(Split::Test).collect();
    if test.is_empty() {
        bail!("corpus has no test split to evaluate on");
    }
    let percentages: Vec<u32> = match percentages {
        None => (1..=10).map(|i| i * 10).collect(),
        Some(list) => list
            .split(',')
            .map(|piece| {
                piece
                    .trim()
                    .parse::<u32>()
                    .with_context(|| format!("bad percentage {piece:?}"))
            })
            .collect::<Result<_>>()?,
    };
    let points = early_prediction_curve(&ensemble, &test, &percentages)?;
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.percentage.to_string(),
                ensemble.augmentation.as_str().to_string(),
                format!("{:.6}", p.rmse),
            ]
        })
        .collect();
    let bytes = csv_bytes(&["percentage", "augmentation", "rmse"], &rows)?;
    emit(output.as_deref(), &bytes)
}
