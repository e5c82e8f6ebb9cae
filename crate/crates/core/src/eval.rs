//! Evaluation protocols and reporting.
//!
//! Two protocols: repeated stratified 90/10 holdout ("random-cv") and
//! leave-one-subject-out ("inter-subject"), each optionally repeated with
//! fresh classifier seeds. Folds are independent and run in parallel; every
//! random draw flows from the base seed through a per-repetition counter, so
//! reports are reproducible byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::descriptor::DescriptorSet;
use crate::error::{Error, Result};
use crate::pipeline::{descriptors_from_rgb, PipelineConfig};
use crate::probsom::{classify, train_som, weight_neurons, ClassScores, SomConfig};
use crate::NUM_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    RandomCv,
    InterSubject,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::RandomCv => "random-cv",
            Protocol::InterSubject => "inter-subject",
        })
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-cv" => Ok(Protocol::RandomCv),
            "inter-subject" => Ok(Protocol::InterSubject),
            other => Err(Error::validation(format!(
                "unknown protocol `{other}` (expected random-cv or inter-subject)"
            ))),
        }
    }
}

/// Disjoint train/test index lists into a sample collection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl SplitSpec {
    pub fn validate(&self, collection_len: usize) -> Result<()> {
        if self.test_indices.is_empty() {
            return Err(Error::validation("test set is empty"));
        }
        let mut seen = vec![false; collection_len];
        for &i in self.train_indices.iter().chain(&self.test_indices) {
            if i >= collection_len {
                return Err(Error::validation(format!(
                    "split index {i} out of bounds for {collection_len} samples"
                )));
            }
            if seen[i] {
                return Err(Error::validation(format!(
                    "index {i} appears in both train and test"
                )));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

/// Per class, draws `round(test_fraction * n_class)` samples into the test
/// set with the given seed. Classes whose rounded share would be zero or
/// would empty their training side make the stratification infeasible.
pub fn stratified_random_split(
    class_ids: &[usize],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitSpec> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::validation(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut per_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in class_ids.iter().enumerate() {
        per_class.entry(c).or_default().push(i);
    }
    if per_class.is_empty() {
        return Err(Error::validation("no samples to split"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut indices) in per_class {
        let n_test = (test_fraction * indices.len() as f64).round() as usize;
        if n_test == 0 || n_test >= indices.len() {
            return Err(Error::validation(format!(
                "class {class}: cannot draw {n_test} test samples from {}",
                indices.len()
            )));
        }
        indices.shuffle(&mut rng);
        test.extend_from_slice(&indices[..n_test]);
        train.extend_from_slice(&indices[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    let split = SplitSpec {
        train_indices: train,
        test_indices: test,
    };
    split.validate(class_ids.len())?;
    Ok(split)
}

/// One fold per distinct subject: that subject tests, the rest train.
pub fn leave_one_subject_out(subject_ids: &[usize]) -> Result<Vec<SplitSpec>> {
    let mut subjects: Vec<usize> = subject_ids.to_vec();
    subjects.sort_unstable();
    subjects.dedup();
    if subjects.len() < 2 {
        return Err(Error::validation(format!(
            "leave-one-subject-out needs at least 2 subjects, found {}",
            subjects.len()
        )));
    }
    subjects
        .into_iter()
        .map(|subject| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..subject_ids.len()).partition(|&i| subject_ids[i] == subject);
            let split = SplitSpec {
                train_indices: train,
                test_indices: test,
            };
            split.validate(subject_ids.len())?;
            Ok(split)
        })
        .collect()
}

/// One sample's descriptors with its labels, the unit the protocols operate
/// on.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSample {
    pub id: String,
    pub class_id: usize,
    pub subject_id: usize,
    pub set: DescriptorSet,
}

/// A classifier as seen by the protocols: trained per fold, scoring each
/// test sample. Implementations must ignore the labels of `test`.
pub trait FoldClassifier: Sync {
    fn classify_fold(
        &self,
        train: &[&DescriptorSample],
        test: &[&DescriptorSample],
        seed: u64,
    ) -> Result<Vec<ClassScores>>;
}

/// ProbSom trained on the pooled training vectors.
pub struct ProbSomFoldClassifier {
    pub som: SomConfig,
    pub class_names: Vec<String>,
}

impl ProbSomFoldClassifier {
    pub fn new(som: SomConfig) -> Self {
        ProbSomFoldClassifier {
            som,
            class_names: (0..NUM_CLASSES).map(|c| format!("class_{c:02}")).collect(),
        }
    }
}

impl FoldClassifier for ProbSomFoldClassifier {
    fn classify_fold(
        &self,
        train: &[&DescriptorSample],
        test: &[&DescriptorSample],
        seed: u64,
    ) -> Result<Vec<ClassScores>> {
        let vectors: Vec<Vec<f64>> = train
            .iter()
            .flat_map(|s| s.set.vectors().iter().cloned())
            .collect();
        let config = SomConfig {
            seed,
            ..self.som.clone()
        };
        let grid = train_som(&vectors, &config)?;
        let labeled: Vec<(DescriptorSet, usize)> = train
            .iter()
            .map(|s| (s.set.clone(), s.class_id))
            .collect();
        let model = weight_neurons(grid, &labeled, self.class_names.clone())?;
        test.iter().map(|s| classify(&model, &s.set)).collect()
    }
}

/// Majority vote over the k nearest global descriptors; vote ties go to the
/// class of the nearest contested neighbor.
pub fn knn_baseline(
    train: &[(Vec<f64>, usize)],
    test: &[Vec<f64>],
    k_neighbors: usize,
) -> Result<Vec<usize>> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if k_neighbors == 0 {
        return Err(Error::validation("k must be at least 1"));
    }
    let dim = train[0].0.len();
    for (v, _) in train {
        if v.len() != dim {
            return Err(Error::dim(format!("train vectors of dim {dim}"), v.len().to_string()));
        }
    }
    let k = k_neighbors.min(train.len());

    test.iter()
        .map(|query| {
            if query.len() != dim {
                return Err(Error::dim(
                    format!("test vector of dim {dim}"),
                    query.len().to_string(),
                ));
            }
            let mut neighbors: Vec<(f64, usize)> = train
                .iter()
                .enumerate()
                .map(|(i, (v, _))| {
                    let d = v
                        .iter()
                        .zip(query)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                    (d, i)
                })
                .collect();
            neighbors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes = [0usize; NUM_CLASSES];
            for &(_, i) in &neighbors[..k] {
                votes[train[i].1] += 1;
            }
            let max_votes = *votes.iter().max().unwrap();
            // nearest neighbor whose class is among the vote leaders
            let winner = neighbors[..k]
                .iter()
                .map(|&(_, i)| train[i].1)
                .find(|&c| votes[c] == max_votes)
                .unwrap();
            Ok(winner)
        })
        .collect()
}

/// k-NN over single-vector (global) descriptor sets.
pub struct KnnFoldClassifier {
    pub k_neighbors: usize,
}

impl FoldClassifier for KnnFoldClassifier {
    fn classify_fold(
        &self,
        train: &[&DescriptorSample],
        test: &[&DescriptorSample],
        _seed: u64,
    ) -> Result<Vec<ClassScores>> {
        let as_vector = |s: &DescriptorSample| -> Result<Vec<f64>> {
            if s.set.len() != 1 {
                return Err(Error::validation(format!(
                    "knn baseline needs single-vector (global) descriptors, sample {} has {}",
                    s.id,
                    s.set.len()
                )));
            }
            Ok(s.set.vectors()[0].clone())
        };
        let train_vecs: Vec<(Vec<f64>, usize)> = train
            .iter()
            .map(|s| Ok((as_vector(s)?, s.class_id)))
            .collect::<Result<_>>()?;
        let test_vecs: Vec<Vec<f64>> = test.iter().map(|s| as_vector(s)).collect::<Result<_>>()?;
        let predictions = knn_baseline(&train_vecs, &test_vecs, self.k_neighbors)?;

        // scores are vote counts; the winner gets a half-vote bonus so the
        // ranking reflects the nearest-neighbor tie-break
        let k = self.k_neighbors.min(train_vecs.len());
        predictions
            .iter()
            .zip(&test_vecs)
            .map(|(&winner, query)| {
                let mut neighbors: Vec<(f64, usize)> = train_vecs
                    .iter()
                    .enumerate()
                    .map(|(i, (v, _))| {
                        let d = v
                            .iter()
                            .zip(query)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>();
                        (d, i)
                    })
                    .collect();
                neighbors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut scores = vec![0.0; NUM_CLASSES];
                for &(_, i) in &neighbors[..k] {
                    scores[train_vecs[i].1] += 1.0;
                }
                scores[winner] += 0.5;
                ClassScores::from_scores(scores)
            })
            .collect()
    }
}

/// Fraction of predictions whose true class appears in the first k ranking
/// entries.
pub fn top_k_accuracy(predictions: &[(Vec<usize>, usize)], k: usize) -> Result<f64> {
    if k == 0 || k > NUM_CLASSES {
        return Err(Error::validation(format!(
            "k must be in 1..={NUM_CLASSES}, got {k}"
        )));
    }
    if predictions.is_empty() {
        return Err(Error::validation("no predictions to score"));
    }
    for (ranking, true_class) in predictions {
        if *true_class >= NUM_CLASSES {
            return Err(Error::validation(format!(
                "true class {true_class} out of range"
            )));
        }
        let mut seen = [false; NUM_CLASSES];
        if ranking.len() != NUM_CLASSES {
            return Err(Error::validation("ranking is not a full permutation"));
        }
        for &c in ranking {
            if c >= NUM_CLASSES || seen[c] {
                return Err(Error::validation("ranking is not a permutation of 0..16"));
            }
            seen[c] = true;
        }
    }
    let hits = predictions
        .iter()
        .filter(|(ranking, true_class)| ranking[..k].contains(true_class))
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub label: String,
    pub accuracy: f64,
    pub test_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectAccuracy {
    pub subject_id: usize,
    pub accuracy: f64,
}

/// Aggregated results of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub protocol: Protocol,
    pub repetitions: usize,
    pub base_seed: u64,
    pub folds: Vec<FoldOutcome>,
    pub per_fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Sample standard deviation over the folds.
    pub std_dev_accuracy: f64,
    /// Per class: correct / tested, or null for classes never tested.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub per_class_test_counts: Vec<u64>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
    pub top_k_accuracy: BTreeMap<usize, f64>,
    /// Mean accuracy per held-out subject (inter-subject protocol only).
    pub per_subject_accuracy: Option<Vec<SubjectAccuracy>>,
    pub config: serde_json::Value,
}

impl EvaluationReport {
    pub fn validate(&self) -> Result<()> {
        let n = self.per_fold_accuracy.len() as f64;
        let mean = self.per_fold_accuracy.iter().sum::<f64>() / n;
        if (mean - self.mean_accuracy).abs() > 1e-12 {
            return Err(Error::validation("mean inconsistent with folds"));
        }
        let std = if self.per_fold_accuracy.len() < 2 {
            0.0
        } else {
            (self
                .per_fold_accuracy
                .iter()
                .map(|a| (a - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt()
        };
        if (std - self.std_dev_accuracy).abs() > 1e-12 {
            return Err(Error::validation("std dev inconsistent with folds"));
        }
        for (c, row) in self.confusion.iter().enumerate() {
            if row.iter().sum::<u64>() != self.per_class_test_counts[c] {
                return Err(Error::validation(format!(
                    "confusion row {c} does not sum to its test count"
                )));
            }
        }
        Ok(())
    }
}

struct FoldResult {
    label: String,
    subject: Option<usize>,
    accuracy: f64,
    test_count: usize,
    confusion: Vec<Vec<u64>>,
    rankings: Vec<(Vec<usize>, usize)>,
}

fn run_fold(
    samples: &[DescriptorSample],
    split: &SplitSpec,
    classifier: &dyn FoldClassifier,
    seed: u64,
    label: String,
    subject: Option<usize>,
) -> Result<FoldResult> {
    let train: Vec<&DescriptorSample> =
        split.train_indices.iter().map(|&i| &samples[i]).collect();
    let test: Vec<&DescriptorSample> = split.test_indices.iter().map(|&i| &samples[i]).collect();
    let scores = classifier
        .classify_fold(&train, &test, seed)
        .map_err(|e| e.in_fold(label.clone()))?;
    if scores.len() != test.len() {
        return Err(Error::validation(format!(
            "classifier returned {} scores for {} test samples",
            scores.len(),
            test.len()
        ))
        .in_fold(label));
    }

    let mut confusion = vec![vec![0u64; NUM_CLASSES]; NUM_CLASSES];
    let mut rankings = Vec::with_capacity(test.len());
    let mut correct = 0usize;
    for (sample, score) in test.iter().zip(&scores) {
        let predicted = score.top();
        confusion[sample.class_id][predicted] += 1;
        if predicted == sample.class_id {
            correct += 1;
        }
        rankings.push((score.ranking.clone(), sample.class_id));
    }
    Ok(FoldResult {
        label,
        subject,
        accuracy: correct as f64 / test.len() as f64,
        test_count: test.len(),
        confusion,
        rankings,
    })
}

/// Runs a protocol over pre-extracted descriptor samples.
///
/// Random-cv performs `repetitions` stratified holdouts; inter-subject
/// performs `repetitions` passes over all leave-one-subject-out folds. Split
/// and classifier seeds are drawn per repetition from a counter-advanced
/// stream of `base_seed`, so runs reproduce exactly; folds execute in
/// parallel without affecting the result.
pub fn run_protocol_on_samples(
    samples: &[DescriptorSample],
    classifier: &dyn FoldClassifier,
    protocol: Protocol,
    repetitions: usize,
    test_fraction: f64,
    base_seed: u64,
    config_snapshot: serde_json::Value,
) -> Result<EvaluationReport> {
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if repetitions == 0 {
        return Err(Error::validation("repetitions must be at least 1"));
    }
    let class_ids: Vec<usize> = samples.iter().map(|s| s.class_id).collect();
    let subject_ids: Vec<usize> = samples.iter().map(|s| s.subject_id).collect();

    let mut seed_stream = ChaCha8Rng::seed_from_u64(base_seed);

    // fold plan: (split, classifier seed, label, subject)
    let mut plan: Vec<(SplitSpec, u64, String, Option<usize>)> = Vec::new();
    match protocol {
        Protocol::RandomCv => {
            for rep in 0..repetitions {
                let split_seed = seed_stream.gen::<u64>();
                let som_seed = seed_stream.gen::<u64>();
                let split = stratified_random_split(&class_ids, test_fraction, split_seed)?;
                plan.push((split, som_seed, format!("rep{rep:02}"), None));
            }
        }
        Protocol::InterSubject => {
            let folds = leave_one_subject_out(&subject_ids)?;
            let subjects: Vec<usize> = {
                let mut s = subject_ids.clone();
                s.sort_unstable();
                s.dedup();
                s
            };
            for rep in 0..repetitions {
                for (fold, split) in folds.iter().enumerate() {
                    let som_seed = seed_stream.gen::<u64>();
                    plan.push((
                        split.clone(),
                        som_seed,
                        format!("rep{rep:02}-subject{}", subjects[fold]),
                        Some(subjects[fold]),
                    ));
                }
            }
        }
    }

    let results: Vec<FoldResult> = plan
        .into_par_iter()
        .map(|(split, seed, label, subject)| {
            run_fold(samples, &split, classifier, seed, label, subject)
        })
        .collect::<Result<_>>()?;

    let per_fold_accuracy: Vec<f64> = results.iter().map(|r| r.accuracy).collect();
    let n = per_fold_accuracy.len() as f64;
    let mean_accuracy = per_fold_accuracy.iter().sum::<f64>() / n;
    let std_dev_accuracy = if per_fold_accuracy.len() < 2 {
        0.0
    } else {
        (per_fold_accuracy
            .iter()
            .map(|a| (a - mean_accuracy).powi(2))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    };

    let mut confusion = vec![vec![0u64; NUM_CLASSES]; NUM_CLASSES];
    let mut rankings = Vec::new();
    for r in &results {
        for (true_class, row) in r.confusion.iter().enumerate() {
            for (predicted, &count) in row.iter().enumerate() {
                confusion[true_class][predicted] += count;
            }
        }
        rankings.extend(r.rankings.iter().cloned());
    }
    let per_class_test_counts: Vec<u64> =
        confusion.iter().map(|row| row.iter().sum()).collect();
    let per_class_accuracy: Vec<Option<f64>> = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let total = per_class_test_counts[c];
            (total > 0).then(|| row[c] as f64 / total as f64)
        })
        .collect();

    let mut top_k = BTreeMap::new();
    for k in 1..=NUM_CLASSES {
        top_k.insert(k, top_k_accuracy(&rankings, k)?);
    }

    let per_subject_accuracy = (protocol == Protocol::InterSubject).then(|| {
        let mut by_subject: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in &results {
            if let Some(s) = r.subject {
                by_subject.entry(s).or_default().push(r.accuracy);
            }
        }
        by_subject
            .into_iter()
            .map(|(subject_id, accs)| SubjectAccuracy {
                subject_id,
                accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
            })
            .collect()
    });

    let report = EvaluationReport {
        protocol,
        repetitions,
        base_seed,
        folds: results
            .iter()
            .map(|r| FoldOutcome {
                label: r.label.clone(),
                accuracy: r.accuracy,
                test_count: r.test_count,
            })
            .collect(),
        per_fold_accuracy,
        mean_accuracy,
        std_dev_accuracy,
        per_class_accuracy,
        per_class_test_counts,
        confusion,
        top_k_accuracy: top_k,
        per_subject_accuracy,
        config: config_snapshot,
    };
    report.validate()?;
    Ok(report)
}

/// Full protocol run from a dataset on disk: loads and segments every image,
/// extracts descriptors once (they are deterministic), then evaluates with
/// ProbSom.
pub fn run_protocol(
    dataset: &Dataset,
    config: &PipelineConfig,
    protocol: Protocol,
    repetitions: usize,
    test_fraction: f64,
    base_seed: u64,
) -> Result<EvaluationReport> {
    config.validate()?;
    let samples = extract_dataset_descriptors(dataset, config)?;
    let classifier = ProbSomFoldClassifier {
        som: config.som.clone(),
        class_names: dataset.class_names.clone(),
    };
    let snapshot = serde_json::json!({
        "pipeline": config,
        "protocol": protocol,
        "repetitions": repetitions,
        "test_fraction": test_fraction,
        "base_seed": base_seed,
    });
    run_protocol_on_samples(
        &samples,
        &classifier,
        protocol,
        repetitions,
        test_fraction,
        base_seed,
        snapshot,
    )
}

/// Loads every record and extracts its descriptor set, in parallel.
pub fn extract_dataset_descriptors(
    dataset: &Dataset,
    config: &PipelineConfig,
) -> Result<Vec<DescriptorSample>> {
    dataset
        .records
        .par_iter()
        .map(|record| {
            let rgb = crate::dataset::load_rgb(&record.image_path)
                .map_err(|e| e.in_fold(record.id()))?;
            let set =
                descriptors_from_rgb(&rgb, config).map_err(|e| e.in_fold(record.id()))?;
            Ok(DescriptorSample {
                id: record.id(),
                class_id: record.class_id,
                subject_id: record.subject_id,
                set,
            })
        })
        .collect()
}

pub fn write_report_json(report: &EvaluationReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::validation(format!("serialize report: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

/// One row per fold.
pub fn write_folds_csv(report: &EvaluationReport, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::validation(e.to_string()))?;
    writer
        .write_record(["fold", "accuracy", "test_count"])
        .map_err(|e| Error::validation(e.to_string()))?;
    for fold in &report.folds {
        writer
            .write_record([
                fold.label.as_str(),
                &format!("{:.6}", fold.accuracy),
                &fold.test_count.to_string(),
            ])
            .map_err(|e| Error::validation(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Confusion matrix, rows = true class.
pub fn write_confusion_csv(report: &EvaluationReport, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::validation(e.to_string()))?;
    let mut header = vec!["true_class".to_string()];
    header.extend((0..NUM_CLASSES).map(|c| format!("pred_{c}")));
    writer
        .write_record(&header)
        .map_err(|e| Error::validation(e.to_string()))?;
    for (c, row) in report.confusion.iter().enumerate() {
        let mut record = vec![c.to_string()];
        record.extend(row.iter().map(|v| v.to_string()));
        writer
            .write_record(&record)
            .map_err(|e| Error::validation(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-subject accuracies (plot data for the inter-subject protocol).
pub fn write_per_subject_csv(report: &EvaluationReport, path: &Path) -> Result<()> {
    let Some(per_subject) = &report.per_subject_accuracy else {
        return Err(Error::validation(
            "report has no per-subject accuracies (random-cv protocol)",
        ));
    };
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::validation(e.to_string()))?;
    writer
        .write_record(["subject", "accuracy"])
        .map_err(|e| Error::validation(e.to_string()))?;
    for s in per_subject {
        writer
            .write_record([s.subject_id.to_string(), format!("{:.6}", s.accuracy)])
            .map_err(|e| Error::validation(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}
