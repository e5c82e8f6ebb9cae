//! Subcommand implementations. Each returns the process exit code: 0 only
//! when every item succeeded.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use handshape_core::dataset::{auto_segment, load_manifest, load_rgb, scan_corpus_dir, write_manifest};
use handshape_core::descriptor::{read_jsonl, write_jsonl, DescriptorRecord};
use handshape_core::eval::{
    run_protocol_on_samples, write_confusion_csv, write_folds_csv, write_per_subject_csv,
    write_report_json, DescriptorSample, KnnFoldClassifier, ProbSomFoldClassifier,
};
use handshape_core::imageio::{load_gray_png, load_mask_png, save_gray_png, save_mask_png};
use handshape_core::pipeline::descriptors_from_canonical;
use handshape_core::preprocess::{canonicalize_with_stages, CanonicalHandImage};
use handshape_core::probsom::{
    classify, load_model, predict_top_k, save_model, train_som, weight_neurons,
};
use handshape_core::NUM_CLASSES;

use crate::config::{ClassifierChoice, RunConfig};

pub fn make_manifest(dir: &Path, out: Option<PathBuf>, zero_based: bool) -> Result<i32> {
    let mut records = scan_corpus_dir(dir, !zero_based)?;
    if records.is_empty() {
        bail!(
            "no `<class>_<subject>_<repetition>` images found under {}",
            dir.display()
        );
    }
    // paths in the file are resolved against the manifest's directory, so
    // store them relative to it (absolute when that is not possible)
    let out = out.unwrap_or_else(|| dir.join("manifest.csv"));
    let base = out.parent().unwrap_or_else(|| Path::new("."));
    for record in &mut records {
        record.image_path = match record.image_path.strip_prefix(base) {
            Ok(relative) => relative.to_path_buf(),
            Err(_) => std::fs::canonicalize(&record.image_path)?,
        };
    }
    write_manifest(&records, &out)?;
    println!("wrote {} records to {}", records.len(), out.display());
    Ok(0)
}

struct CanonicalRow {
    id: String,
    pixels: String,
    mask: String,
    contour: String,
    class_id: usize,
    subject_id: usize,
    repetition: usize,
}

pub fn preprocess(config: &RunConfig) -> Result<i32> {
    let manifest = config
        .manifest
        .as_ref()
        .context("no manifest configured (pass --manifest or set it in the config file)")?;
    let dataset = load_manifest(manifest)?;
    let canonical_dir = config.canonical_dir();
    std::fs::create_dir_all(&canonical_dir)?;
    if config.debug_stages {
        std::fs::create_dir_all(config.debug_dir())?;
    }

    let results: Vec<(String, Result<CanonicalRow>)> = dataset
        .records
        .par_iter()
        .map(|record| {
            let id = record.id();
            let outcome = (|| -> Result<CanonicalRow> {
                let rgb = load_rgb(&record.image_path)
                    .with_context(|| format!("loading {}", record.image_path.display()))?;
                let segmented = auto_segment(&rgb, &config.glove)?;
                let (canonical, stages) = canonicalize_with_stages(&segmented)?;

                let pixels = format!("{id}.png");
                let mask = format!("{id}_mask.png");
                let contour = format!("{id}_contour.png");
                save_gray_png(&canonical.pixels, &canonical_dir.join(&pixels))?;
                save_mask_png(&canonical.mask, &canonical_dir.join(&mask))?;
                save_mask_png(&canonical.contour, &canonical_dir.join(&contour))?;

                if config.debug_stages {
                    let debug = config.debug_dir();
                    save_gray_png(&stages.segmented, &debug.join(format!("{id}_1_segmented.png")))?;
                    save_gray_png(&stages.oriented, &debug.join(format!("{id}_2_oriented.png")))?;
                    save_gray_png(&stages.corrected, &debug.join(format!("{id}_3_corrected.png")))?;
                    save_mask_png(&canonical.mask, &debug.join(format!("{id}_4_mask.png")))?;
                    save_mask_png(&canonical.contour, &debug.join(format!("{id}_5_contour.png")))?;
                }
                Ok(CanonicalRow {
                    id: id.clone(),
                    pixels,
                    mask,
                    contour,
                    class_id: record.class_id,
                    subject_id: record.subject_id,
                    repetition: record.repetition,
                })
            })();
            (id, outcome)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = 0usize;
    for (id, outcome) in results {
        match outcome {
            Ok(row) => {
                println!("ok   {id}");
                rows.push(row);
            }
            Err(e) => {
                failures += 1;
                eprintln!("FAIL {id}: {e:#}");
            }
        }
    }

    let mut writer = csv::Writer::from_path(config.canonical_index())?;
    writer.write_record(["id", "pixels", "mask", "contour", "class", "subject", "repetition"])?;
    for row in &rows {
        writer.write_record([
            row.id.as_str(),
            &row.pixels,
            &row.mask,
            &row.contour,
            &row.class_id.to_string(),
            &row.subject_id.to_string(),
            &row.repetition.to_string(),
        ])?;
    }
    writer.flush()?;
    println!(
        "preprocessed {} of {} images into {}",
        rows.len(),
        dataset.len(),
        canonical_dir.display()
    );
    Ok(i32::from(failures > 0))
}

struct CanonicalEntry {
    id: String,
    class_id: usize,
    subject_id: usize,
    repetition: usize,
    pixels: PathBuf,
    mask: PathBuf,
    contour: PathBuf,
}

fn read_canonical_index(config: &RunConfig) -> Result<Vec<CanonicalEntry>> {
    let index = config.canonical_index();
    if !index.exists() {
        bail!(
            "canonical index {} not found; run `preprocess` first",
            index.display()
        );
    }
    let dir = config.canonical_dir();
    let mut reader = csv::Reader::from_path(&index)?;
    let mut entries = Vec::new();
    for row in reader.records() {
        let row = row?;
        entries.push(CanonicalEntry {
            id: row[0].to_string(),
            pixels: dir.join(&row[1]),
            mask: dir.join(&row[2]),
            contour: dir.join(&row[3]),
            class_id: row[4].parse()?,
            subject_id: row[5].parse()?,
            repetition: row[6].parse()?,
        });
    }
    Ok(entries)
}

pub fn extract(config: &RunConfig) -> Result<i32> {
    let entries = read_canonical_index(config)?;
    if entries.is_empty() {
        bail!("canonical index is empty; nothing to extract");
    }
    let pipeline = config.pipeline_config();

    let results: Vec<(String, Result<DescriptorRecord>)> = entries
        .par_iter()
        .map(|entry| {
            let outcome = (|| -> Result<DescriptorRecord> {
                let canonical = CanonicalHandImage {
                    pixels: load_gray_png(&entry.pixels)?,
                    mask: load_mask_png(&entry.mask)?,
                    contour: load_mask_png(&entry.contour)?,
                };
                let set = descriptors_from_canonical(&canonical, &pipeline)?;
                Ok(DescriptorRecord {
                    id: entry.id.clone(),
                    class_id: entry.class_id,
                    subject_id: entry.subject_id,
                    repetition: entry.repetition,
                    set,
                })
            })();
            (entry.id.clone(), outcome)
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = 0usize;
    for (id, outcome) in results {
        match outcome {
            Ok(record) => records.push(record),
            Err(e) => {
                failures += 1;
                eprintln!("FAIL {id}: {e:#}");
            }
        }
    }
    let path = config.descriptors_path();
    write_jsonl(&records, &path)?;
    println!(
        "extracted {} descriptor sets ({}) to {}",
        records.len(),
        config.descriptor,
        path.display()
    );
    Ok(i32::from(failures > 0))
}

fn load_descriptor_records(config: &RunConfig) -> Result<Vec<DescriptorRecord>> {
    let path = config.descriptors_path();
    if !path.exists() {
        bail!(
            "descriptor file {} not found; run `extract` first",
            path.display()
        );
    }
    let records = read_jsonl(&path)?;
    if records.is_empty() {
        bail!("descriptor file {} is empty", path.display());
    }
    Ok(records)
}

fn default_class_names() -> Vec<String> {
    (0..NUM_CLASSES).map(|c| format!("class_{c:02}")).collect()
}

pub fn train(config: &RunConfig) -> Result<i32> {
    let records = load_descriptor_records(config)?;
    let kind = records[0].set.kind();
    if kind != config.descriptor {
        bail!(
            "descriptor kind mismatch: config says {}, descriptor file holds {kind}",
            config.descriptor
        );
    }
    let vectors: Vec<Vec<f64>> = records
        .iter()
        .flat_map(|r| r.set.vectors().iter().cloned())
        .collect();
    let som = config.som_config();
    println!(
        "training {}x{} map on {} vectors of dim {} ({} epochs, seed {})",
        som.grid_rows,
        som.grid_cols,
        vectors.len(),
        som.vector_dim,
        som.epochs,
        som.seed
    );
    let grid = train_som(&vectors, &som)?;
    let labeled: Vec<_> = records
        .iter()
        .map(|r| (r.set.clone(), r.class_id))
        .collect();
    let model = weight_neurons(grid, &labeled, default_class_names())?;
    let path = config.model_path();
    save_model(&model, &path)?;
    let hit = model.profiles.iter().filter(|p| p.hit_count > 0).count();
    println!(
        "wrote model to {} ({hit}/{} neurons hit)",
        path.display(),
        model.profiles.len()
    );
    Ok(0)
}

pub fn predict(config: &RunConfig) -> Result<i32> {
    let records = load_descriptor_records(config)?;
    let model = load_model(&config.model_path())
        .with_context(|| format!("loading model {}", config.model_path().display()))?;
    let kind = records[0].set.kind();
    if kind != model.descriptor_kind {
        bail!(
            "descriptor kind mismatch: file holds {kind}, model was trained on {}",
            model.descriptor_kind
        );
    }
    let k = config.top_k.clamp(1, NUM_CLASSES);

    let out = config.output_dir.join("predictions.csv");
    std::fs::create_dir_all(&config.output_dir)?;
    let mut writer = csv::Writer::from_path(&out)?;
    let mut header = vec!["id".to_string(), "true_class".to_string()];
    header.extend((1..=k).map(|i| format!("rank{i}")));
    header.extend((1..=k).map(|i| format!("score{i}")));
    writer.write_record(&header)?;

    let mut top1_hits = 0usize;
    let mut topk_hits = 0usize;
    for record in &records {
        let scores = classify(&model, &record.set)?;
        let ranked = predict_top_k(&model, &record.set, k)?;
        if ranked[0] == record.class_id {
            top1_hits += 1;
        }
        if ranked.contains(&record.class_id) {
            topk_hits += 1;
        }
        let mut row = vec![record.id.clone(), record.class_id.to_string()];
        row.extend(ranked.iter().map(|c| c.to_string()));
        row.extend(ranked.iter().map(|&c| format!("{:.6}", scores.scores[c])));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    let n = records.len();
    println!(
        "wrote {} rankings to {} (top-1 accuracy {:.4}, top-{k} {:.4})",
        n,
        out.display(),
        top1_hits as f64 / n as f64,
        topk_hits as f64 / n as f64
    );
    Ok(0)
}

fn to_samples(records: Vec<DescriptorRecord>) -> Vec<DescriptorSample> {
    records
        .into_iter()
        .map(|r| DescriptorSample {
            id: r.id,
            class_id: r.class_id,
            subject_id: r.subject_id,
            set: r.set,
        })
        .collect()
}

pub fn evaluate(config: &RunConfig) -> Result<i32> {
    let records = load_descriptor_records(config)?;
    let kind = records[0].set.kind();
    if kind != config.descriptor {
        bail!(
            "descriptor kind mismatch: config says {}, descriptor file holds {kind}",
            config.descriptor
        );
    }
    let samples = to_samples(records);
    // worker count does not influence results, keep it out of the snapshot
    let snapshot = serde_json::to_value(&RunConfig {
        jobs: None,
        ..config.clone()
    })?;

    let report = match config.classifier {
        ClassifierChoice::Probsom => {
            let classifier = ProbSomFoldClassifier::new(config.som_config());
            run_protocol_on_samples(
                &samples,
                &classifier,
                config.protocol,
                config.repetitions,
                config.test_fraction,
                config.seed,
                snapshot,
            )?
        }
        ClassifierChoice::Knn => {
            if kind != handshape_core::descriptor::DescriptorKind::RadonGlobal {
                bail!("knn baseline needs radon-global descriptors, file holds {kind}");
            }
            let classifier = KnnFoldClassifier {
                k_neighbors: config.knn_neighbors,
            };
            run_protocol_on_samples(
                &samples,
                &classifier,
                config.protocol,
                config.repetitions,
                config.test_fraction,
                config.seed,
                snapshot,
            )?
        }
    };

    std::fs::create_dir_all(&config.output_dir)?;
    let report_path = config.output_dir.join("report.json");
    write_report_json(&report, &report_path)?;
    write_folds_csv(&report, &config.output_dir.join("folds.csv"))?;
    write_confusion_csv(&report, &config.output_dir.join("confusion.csv"))?;
    if report.per_subject_accuracy.is_some() {
        write_per_subject_csv(&report, &config.output_dir.join("per_subject.csv"))?;
    }

    println!(
        "{} over {} folds: accuracy {:.4} (std {:.4}), top-2 {:.4}; report at {}",
        report.protocol,
        report.folds.len(),
        report.mean_accuracy,
        report.std_dev_accuracy,
        report.top_k_accuracy[&2],
        report_path.display()
    );
    Ok(0)
}

pub fn run_all(config: &RunConfig) -> Result<i32> {
    for (name, step) in [
        ("preprocess", preprocess as fn(&RunConfig) -> Result<i32>),
        ("extract", extract),
        ("train", train),
        ("evaluate", evaluate),
    ] {
        let code = step(config).with_context(|| format!("step `{name}` failed"))?;
        if code != 0 {
            eprintln!("step `{name}` reported failures; stopping");
            return Ok(code);
        }
    }
    Ok(0)
}
