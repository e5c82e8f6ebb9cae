//! ProbSom: a Kohonen map whose neurons carry class-ratio profiles.
//!
//! Training is the classic online SOM update. Afterwards every training
//! vector is re-processed and its sample's class tallied at the winning
//! neuron, giving each neuron the proportions of the classes it represents.
//! A sample — a set of vectors — is classified by summing the winning
//! neurons' ratios over its vectors and taking the class with the maximal
//! aggregate.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descriptor::{DescriptorKind, DescriptorSet};
use crate::error::{Error, Result};
use crate::NUM_CLASSES;

/// Version tag of the model file format.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// SOM hyperparameters. None of these come from a reference setting, so all
/// are exposed and the defaults are documented assumptions.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SomConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub vector_dim: usize,
    pub epochs: usize,
    pub initial_learning_rate: f64,
    pub initial_radius: f64,
    pub seed: u64,
}

impl SomConfig {
    /// 10x10 grid, 100 epochs, learning rate 0.5 decaying exponentially to
    /// 0.01, radius max(grid)/2 decaying to 0.5, weights seeded from
    /// training vectors.
    pub fn defaults_for_dim(vector_dim: usize) -> Self {
        SomConfig {
            grid_rows: 10,
            grid_cols: 10,
            vector_dim,
            epochs: 100,
            initial_learning_rate: 0.5,
            initial_radius: 5.0,
            seed: 0,
        }
    }

    pub fn defaults_for_kind(kind: DescriptorKind) -> Self {
        Self::defaults_for_dim(kind.vector_dim())
    }

    pub fn neuron_count(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(Error::validation("grid dimensions must be positive"));
        }
        if self.vector_dim == 0 {
            return Err(Error::validation("vector_dim must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::validation("epochs must be positive"));
        }
        if !(self.initial_learning_rate > 0.0 && self.initial_learning_rate <= 1.0) {
            return Err(Error::validation("initial_learning_rate must be in (0, 1]"));
        }
        if !self.initial_radius.is_finite() || self.initial_radius <= 0.0 {
            return Err(Error::validation("initial_radius must be positive"));
        }
        Ok(())
    }
}

const FINAL_LEARNING_RATE: f64 = 0.01;
const FINAL_RADIUS: f64 = 0.5;

/// Trained weight grid, neurons indexed row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomGrid {
    pub rows: usize,
    pub cols: usize,
    pub vector_dim: usize,
    weights: Vec<Vec<f64>>,
}

impl SomGrid {
    pub fn from_weights(rows: usize, cols: usize, weights: Vec<Vec<f64>>) -> Result<Self> {
        let dim = weights.first().map(|w| w.len()).unwrap_or(0);
        let grid = SomGrid {
            rows,
            cols,
            vector_dim: dim,
            weights,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn neuron_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn weight(&self, neuron: usize) -> &[f64] {
        &self.weights[neuron]
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    fn grid_position(&self, neuron: usize) -> (usize, usize) {
        (neuron / self.cols, neuron % self.cols)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.vector_dim == 0 {
            return Err(Error::validation("grid dimensions must be positive"));
        }
        if self.weights.len() != self.neuron_count() {
            return Err(Error::validation(format!(
                "{} weight vectors for {} neurons",
                self.weights.len(),
                self.neuron_count()
            )));
        }
        for w in &self.weights {
            if w.len() != self.vector_dim {
                return Err(Error::dim(
                    format!("{} weight components", self.vector_dim),
                    w.len().to_string(),
                ));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation("non-finite weight component"));
            }
        }
        Ok(())
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the neuron nearest to `v` in Euclidean distance; ties go to the
/// smallest row-major index.
pub fn best_matching_unit(grid: &SomGrid, v: &[f64]) -> Result<usize> {
    if v.len() != grid.vector_dim {
        return Err(Error::dim(
            format!("vector of dim {}", grid.vector_dim),
            v.len().to_string(),
        ));
    }
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, w) in grid.weights.iter().enumerate() {
        let d = squared_distance(w, v);
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    Ok(best)
}

/// Classic online Kohonen training. Per epoch the vectors are visited in a
/// seeded-shuffled order; the winning neuron and its neighbors within the
/// current radius move toward each vector, scaled by a Gaussian of the grid
/// distance. Learning rate and radius decay exponentially; once the radius
/// drops below 1 only the winner updates, so the map settles on local
/// means. Weights start as training vectors sampled with the same seed, so
/// the whole run is deterministic.
pub fn train_som(vectors: &[Vec<f64>], config: &SomConfig) -> Result<SomGrid> {
    config.validate()?;
    if vectors.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != config.vector_dim {
            return Err(Error::dim(
                format!("training vectors of dim {}", config.vector_dim),
                format!("{} in vector {i}", v.len()),
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut grid = SomGrid {
        rows: config.grid_rows,
        cols: config.grid_cols,
        vector_dim: config.vector_dim,
        weights: (0..config.neuron_count())
            .map(|_| vectors[rng.gen_range(0..vectors.len())].clone())
            .collect(),
    };

    let epochs = config.epochs;
    let decay_steps = (epochs - 1).max(1) as f64;
    let lr_decay = (FINAL_LEARNING_RATE / config.initial_learning_rate).ln() / decay_steps;
    let radius_floor = FINAL_RADIUS.min(config.initial_radius);
    let radius_decay = (radius_floor / config.initial_radius).ln() / decay_steps;

    let mut order: Vec<usize> = (0..vectors.len()).collect();
    for epoch in 0..epochs {
        let lr = config.initial_learning_rate * (lr_decay * epoch as f64).exp();
        let radius = config.initial_radius * (radius_decay * epoch as f64).exp();
        let two_sigma_sq = 2.0 * radius * radius;
        order.shuffle(&mut rng);
        for &vi in &order {
            let v = &vectors[vi];
            let bmu = best_matching_unit(&grid, v)?;
            let (br, bc) = grid.grid_position(bmu);
            for n in 0..grid.neuron_count() {
                let (nr, nc) = grid.grid_position(n);
                let grid_dist_sq =
                    (nr as f64 - br as f64).powi(2) + (nc as f64 - bc as f64).powi(2);
                if grid_dist_sq > radius * radius {
                    continue;
                }
                let influence = (-grid_dist_sq / two_sigma_sq).exp() * lr;
                let w = &mut grid.weights[n];
                for (wk, &vk) in w.iter_mut().zip(v.iter()) {
                    *wk += influence * (vk - *wk);
                }
            }
        }
    }
    Ok(grid)
}

/// Per-neuron class counts from the weighting pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronClassProfile {
    pub hit_count: u64,
    pub class_counts: Vec<u64>,
}

impl NeuronClassProfile {
    fn empty() -> Self {
        NeuronClassProfile {
            hit_count: 0,
            class_counts: vec![0; NUM_CLASSES],
        }
    }

    /// Ratios derived from the counts; all zero for a never-hit neuron.
    pub fn ratios(&self) -> Vec<f64> {
        if self.hit_count == 0 {
            vec![0.0; NUM_CLASSES]
        } else {
            self.class_counts
                .iter()
                .map(|&c| c as f64 / self.hit_count as f64)
                .collect()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_counts.len() != NUM_CLASSES {
            return Err(Error::validation(format!(
                "profile must cover {NUM_CLASSES} classes, covers {}",
                self.class_counts.len()
            )));
        }
        if self.class_counts.iter().sum::<u64>() != self.hit_count {
            return Err(Error::validation(
                "profile class counts do not sum to hit_count",
            ));
        }
        Ok(())
    }
}

/// Trained grid plus class profiles; the complete classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbSomModel {
    pub grid: SomGrid,
    pub profiles: Vec<NeuronClassProfile>,
    pub class_names: Vec<String>,
    pub descriptor_kind: DescriptorKind,
    // ratios cached from the profiles, one vector per neuron
    ratios: Vec<Vec<f64>>,
}

impl ProbSomModel {
    fn from_parts(
        grid: SomGrid,
        profiles: Vec<NeuronClassProfile>,
        class_names: Vec<String>,
        descriptor_kind: DescriptorKind,
    ) -> Result<Self> {
        grid.validate().map_err(|e| Error::ModelFormat(e.to_string()))?;
        if profiles.len() != grid.neuron_count() {
            return Err(Error::ModelFormat(format!(
                "{} profiles for {} neurons",
                profiles.len(),
                grid.neuron_count()
            )));
        }
        for p in &profiles {
            p.validate().map_err(|e| Error::ModelFormat(e.to_string()))?;
        }
        if profiles.iter().all(|p| p.hit_count == 0) {
            return Err(Error::ModelFormat("no neuron was ever hit".into()));
        }
        if class_names.len() != NUM_CLASSES {
            return Err(Error::ModelFormat(format!(
                "expected {NUM_CLASSES} class names, got {}",
                class_names.len()
            )));
        }
        if grid.vector_dim != descriptor_kind.vector_dim() {
            return Err(Error::ModelFormat(format!(
                "grid dimension {} does not match {descriptor_kind} vectors of dim {}",
                grid.vector_dim,
                descriptor_kind.vector_dim()
            )));
        }
        let ratios = profiles.iter().map(NeuronClassProfile::ratios).collect();
        Ok(ProbSomModel {
            grid,
            profiles,
            class_names,
            descriptor_kind,
            ratios,
        })
    }

    pub fn ratios_of(&self, neuron: usize) -> &[f64] {
        &self.ratios[neuron]
    }
}

/// Aggregated class scores with the fixed total order: descending score,
/// ascending class index on ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub scores: Vec<f64>,
    pub ranking: Vec<usize>,
}

impl ClassScores {
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        if scores.len() != NUM_CLASSES {
            return Err(Error::dim(
                format!("{NUM_CLASSES} class scores"),
                scores.len().to_string(),
            ));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::validation("non-finite class score"));
        }
        let mut ranking: Vec<usize> = (0..NUM_CLASSES).collect();
        ranking.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Ok(ClassScores { scores, ranking })
    }

    pub fn top(&self) -> usize {
        self.ranking[0]
    }
}

/// Re-processes all samples' vectors through the trained grid and tallies
/// each sample's class at the winning neuron.
pub fn weight_neurons(
    grid: SomGrid,
    samples: &[(DescriptorSet, usize)],
    class_names: Vec<String>,
) -> Result<ProbSomModel> {
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let kind = samples[0].0.kind();
    let mut profiles: Vec<NeuronClassProfile> = (0..grid.neuron_count())
        .map(|_| NeuronClassProfile::empty())
        .collect();
    for (set, class_id) in samples {
        if *class_id >= NUM_CLASSES {
            return Err(Error::validation(format!(
                "class id {class_id} out of range 0..{NUM_CLASSES}"
            )));
        }
        if set.kind() != kind {
            return Err(Error::validation(format!(
                "mixed descriptor kinds in training samples: {kind} and {}",
                set.kind()
            )));
        }
        for v in set.vectors() {
            let bmu = best_matching_unit(&grid, v)?;
            profiles[bmu].hit_count += 1;
            profiles[bmu].class_counts[*class_id] += 1;
        }
    }
    ProbSomModel::from_parts(grid, profiles, class_names, kind)
}

/// Sums the winning neuron's class ratios over the sample's vectors.
/// Vectors landing on never-hit neurons contribute nothing.
pub fn classify(model: &ProbSomModel, sample: &DescriptorSet) -> Result<ClassScores> {
    if sample.kind() != model.descriptor_kind {
        return Err(Error::validation(format!(
            "sample kind {} does not match model kind {}",
            sample.kind(),
            model.descriptor_kind
        )));
    }
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut scores = vec![0.0; NUM_CLASSES];
    for v in sample.vectors() {
        let bmu = best_matching_unit(&model.grid, v)?;
        for (s, r) in scores.iter_mut().zip(model.ratios_of(bmu)) {
            *s += r;
        }
    }
    ClassScores::from_scores(scores)
}

/// The k best-scored classes, in ranking order.
pub fn predict_top_k(model: &ProbSomModel, sample: &DescriptorSet, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > NUM_CLASSES {
        return Err(Error::validation(format!(
            "k must be in 1..={NUM_CLASSES}, got {k}"
        )));
    }
    let scores = classify(model, sample)?;
    Ok(scores.ranking[..k].to_vec())
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    descriptor_kind: DescriptorKind,
    grid_rows: usize,
    grid_cols: usize,
    vector_dim: usize,
    class_names: Vec<String>,
    weights: Vec<Vec<f64>>,
    profiles: Vec<NeuronClassProfile>,
}

/// Writes the model as a self-describing JSON document. Weight components
/// serialize with round-trip-exact decimal precision; ratios are never
/// stored and are recomputed from the integer counts on load.
pub fn save_model(model: &ProbSomModel, path: &Path) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        descriptor_kind: model.descriptor_kind,
        grid_rows: model.grid.rows,
        grid_cols: model.grid.cols,
        vector_dim: model.grid.vector_dim,
        class_names: model.class_names.clone(),
        weights: model.grid.weights().to_vec(),
        profiles: model.profiles.clone(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::ModelFormat(format!("serialize: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ProbSomModel> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::ModelFormat(format!("parse: {e}")))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {} (expected {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }
    let grid = SomGrid {
        rows: file.grid_rows,
        cols: file.grid_cols,
        vector_dim: file.vector_dim,
        weights: file.weights,
    };
    ProbSomModel::from_parts(grid, file.profiles, file.class_names, file.descriptor_kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn names() -> Vec<String> {
        (0..NUM_CLASSES).map(|c| format!("class_{c:02}")).collect()
    }

    fn tiny_config(rows: usize, cols: usize, dim: usize) -> SomConfig {
        SomConfig {
            grid_rows: rows,
            grid_cols: cols,
            vector_dim: dim,
            epochs: 60,
            initial_learning_rate: 0.5,
            initial_radius: (rows.max(cols) as f64) / 2.0,
            seed: 42,
        }
    }

    fn grid_with_weights(cols: usize, weights: Vec<Vec<f64>>) -> SomGrid {
        let rows = weights.len() / cols;
        SomGrid::from_weights(rows, cols, weights).unwrap()
    }

    #[test]
    fn identical_vectors_converge_to_that_vector() {
        let v = vec![0.3, -1.2, 4.5];
        let vectors = vec![v.clone(); 20];
        let grid = train_som(&vectors, &tiny_config(3, 3, 3)).unwrap();
        for w in grid.weights() {
            for (wk, vk) in w.iter().zip(&v) {
                assert!((wk - vk).abs() < 1e-3, "{wk} vs {vk}");
            }
        }
    }

    // plain Lloyd iteration as the independent reference for the
    // two-cluster case
    fn two_means(vectors: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let dim = vectors[0].len();
        let mut c0 = vectors[0].clone();
        let mut c1 = vectors[vectors.len() - 1].clone();
        for _ in 0..50 {
            let (mut s0, mut s1) = (vec![0.0; dim], vec![0.0; dim]);
            let (mut n0, mut n1) = (0usize, 0usize);
            for v in vectors {
                if squared_distance(v, &c0) <= squared_distance(v, &c1) {
                    for (s, x) in s0.iter_mut().zip(v) {
                        *s += x;
                    }
                    n0 += 1;
                } else {
                    for (s, x) in s1.iter_mut().zip(v) {
                        *s += x;
                    }
                    n1 += 1;
                }
            }
            c0 = s0.iter().map(|s| s / n0.max(1) as f64).collect();
            c1 = s1.iter().map(|s| s / n1.max(1) as f64).collect();
        }
        (c0, c1)
    }

    #[test]
    fn two_clusters_on_1x2_grid_find_cluster_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut vectors = Vec::new();
        for _ in 0..40 {
            vectors.push(vec![rng.gen::<f64>() * 0.2, rng.gen::<f64>() * 0.2]);
            vectors.push(vec![
                10.0 + rng.gen::<f64>() * 0.2,
                10.0 + rng.gen::<f64>() * 0.2,
            ]);
        }
        let (m0, m1) = two_means(&vectors);
        let separation = squared_distance(&m0, &m1).sqrt();

        let grid = train_som(&vectors, &tiny_config(1, 2, 2)).unwrap();
        let mut dists: Vec<f64> = grid
            .weights()
            .iter()
            .map(|w| {
                squared_distance(w, &m0)
                    .sqrt()
                    .min(squared_distance(w, &m1).sqrt())
            })
            .collect();
        dists.sort_by(f64::total_cmp);
        assert!(
            dists[1] < 0.1 * separation,
            "weights {:?} not near means {m0:?} / {m1:?}",
            grid.weights()
        );
        // and they went to different clusters
        let near_m0 = grid
            .weights()
            .iter()
            .filter(|w| squared_distance(w, &m0) < squared_distance(w, &m1))
            .count();
        assert_eq!(near_m0, 1);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vectors: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..4).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let cfg = tiny_config(4, 4, 4);
        let a = train_som(&vectors, &cfg).unwrap();
        let b = train_som(&vectors, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_rejects_bad_input() {
        let cfg = tiny_config(2, 2, 3);
        assert!(matches!(train_som(&[], &cfg), Err(Error::EmptyTrainingSet)));
        let wrong = vec![vec![0.0; 2]];
        assert!(matches!(
            train_som(&wrong, &cfg),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn bmu_exact_weight_and_tie_break() {
        let grid = grid_with_weights(
            3,
            vec![
                vec![0.0, 0.0],
                vec![5.0, 0.0],
                vec![1.0, 1.0], // neuron 2
                vec![9.0, 9.0],
                vec![4.0, 4.0],
                vec![1.0, 1.0], // neuron 5, same weight as 2
            ],
        );
        assert_eq!(best_matching_unit(&grid, &[9.0, 9.0]).unwrap(), 3);
        // equidistant to neurons 2 and 5 -> smallest index wins
        assert_eq!(best_matching_unit(&grid, &[1.0, 1.2]).unwrap(), 2);
        assert!(best_matching_unit(&grid, &[1.0]).is_err());
    }

    #[test]
    fn bmu_matches_linear_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let weights: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..6).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let grid = grid_with_weights(5, weights.clone());
        for _ in 0..100 {
            let v: Vec<f64> = (0..6).map(|_| rng.gen::<f64>()).collect();
            let got = best_matching_unit(&grid, &v).unwrap();
            let mut best = 0;
            for i in 1..weights.len() {
                if squared_distance(&weights[i], &v) < squared_distance(&weights[best], &v) {
                    best = i;
                }
            }
            assert_eq!(got, best);
        }
    }

    fn set_of(kind: DescriptorKind, vectors: Vec<Vec<f64>>) -> DescriptorSet {
        DescriptorSet::new(kind, vectors).unwrap()
    }

    #[test]
    fn weighting_single_class_is_one_hot() {
        let grid = grid_with_weights(1, vec![vec![0.0; 128]]);
        let sample = set_of(DescriptorKind::Sift, vec![vec![0.1; 128]; 4]);
        let model = weight_neurons(grid, &[(sample, 3)], names()).unwrap();
        let ratios = model.ratios_of(0);
        for (c, &r) in ratios.iter().enumerate() {
            assert_eq!(r, if c == 3 { 1.0 } else { 0.0 });
        }
        assert_eq!(model.profiles[0].hit_count, 4);
    }

    #[test]
    fn weighting_ratio_arithmetic() {
        let grid = grid_with_weights(1, vec![vec![0.0; 128]]);
        let a = set_of(DescriptorKind::Sift, vec![vec![0.0; 128]; 6]);
        let b = set_of(DescriptorKind::Sift, vec![vec![0.0; 128]; 2]);
        let model = weight_neurons(grid, &[(a, 0), (b, 1)], names()).unwrap();
        let ratios = model.ratios_of(0);
        assert!((ratios[0] - 0.75).abs() < 1e-12);
        assert!((ratios[1] - 0.25).abs() < 1e-12);
        let sum: f64 = ratios.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn weighting_matches_brute_force_tally() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let weights: Vec<Vec<f64>> = (0..9)
            .map(|_| (0..128).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let grid = grid_with_weights(3, weights);
        let samples: Vec<(DescriptorSet, usize)> = (0..12)
            .map(|i| {
                let vectors: Vec<Vec<f64>> = (0..(1 + i % 4))
                    .map(|_| (0..128).map(|_| rng.gen::<f64>()).collect())
                    .collect();
                (set_of(DescriptorKind::Sift, vectors), i % NUM_CLASSES)
            })
            .collect();
        let model = weight_neurons(grid.clone(), &samples, names()).unwrap();

        let mut tally = vec![vec![0u64; NUM_CLASSES]; grid.neuron_count()];
        for (set, class) in &samples {
            for v in set.vectors() {
                let bmu = best_matching_unit(&grid, v).unwrap();
                tally[bmu][*class] += 1;
            }
        }
        for (n, profile) in model.profiles.iter().enumerate() {
            assert_eq!(profile.class_counts, tally[n], "neuron {n}");
            assert_eq!(profile.hit_count, tally[n].iter().sum::<u64>());
        }
    }

    #[test]
    fn classify_matches_manual_aggregation() {
        let mut far = vec![0.0; 128];
        far[0] = 10.0;
        let grid = grid_with_weights(2, vec![vec![0.0; 128], far]);
        let mut p0 = NeuronClassProfile::empty();
        p0.hit_count = 4;
        p0.class_counts[1] = 3;
        p0.class_counts[2] = 1;
        let mut p1 = NeuronClassProfile::empty();
        p1.hit_count = 2;
        p1.class_counts[2] = 2;
        let model =
            ProbSomModel::from_parts(grid, vec![p0, p1], names(), DescriptorKind::Sift).unwrap();

        // one vector hits neuron 0, two hit neuron 1
        let mut near1a = vec![0.0; 128];
        near1a[0] = 9.5;
        let mut near1b = vec![0.0; 128];
        near1b[0] = 10.4;
        let sample = set_of(DescriptorKind::Sift, vec![vec![0.0; 128], near1a, near1b]);
        let scores = classify(&model, &sample).unwrap();
        assert!((scores.scores[1] - 0.75).abs() < 1e-12);
        assert!((scores.scores[2] - (0.25 + 2.0)).abs() < 1e-12);
        assert_eq!(scores.top(), 2);
        // total equals the number of vectors landing on hit neurons
        let total: f64 = scores.scores.iter().sum();
        assert!((total - 3.0).abs() < 1e-9);
    }

    #[test]
    fn single_one_hot_neuron_scores_cardinality() {
        let grid = grid_with_weights(1, vec![vec![0.0; 128]]);
        let train = set_of(DescriptorKind::Sift, vec![vec![0.0; 128]; 5]);
        let model = weight_neurons(grid, &[(train, 7)], names()).unwrap();
        let sample = set_of(DescriptorKind::Sift, vec![vec![1.0; 128]; 9]);
        let scores = classify(&model, &sample).unwrap();
        assert_eq!(scores.top(), 7);
        assert!((scores.scores[7] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn classify_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let weights: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..128).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let grid = grid_with_weights(3, weights);
        let train: Vec<(DescriptorSet, usize)> = (0..6)
            .map(|i| {
                let vs: Vec<Vec<f64>> = (0..3)
                    .map(|_| (0..128).map(|_| rng.gen::<f64>()).collect())
                    .collect();
                (set_of(DescriptorKind::Sift, vs), i)
            })
            .collect();
        let model = weight_neurons(grid, &train, names()).unwrap();

        let mut vectors: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..128).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let forward = classify(&model, &set_of(DescriptorKind::Sift, vectors.clone())).unwrap();
        vectors.reverse();
        vectors.swap(0, 3);
        let shuffled = classify(&model, &set_of(DescriptorKind::Sift, vectors)).unwrap();
        for (a, b) in forward.scores.iter().zip(&shuffled.scores) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(forward.ranking, shuffled.ranking);
    }

    #[test]
    fn ranking_is_scale_invariant() {
        let scores = vec![
            0.5, 0.3, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1,
        ];
        let base = ClassScores::from_scores(scores.clone()).unwrap();
        let scaled = ClassScores::from_scores(scores.iter().map(|s| s * 17.0).collect()).unwrap();
        assert_eq!(base.ranking, scaled.ranking);
        assert_eq!(&base.ranking[..3], &[0, 1, 2]);
        // ties break toward the smaller class index
        let tied = ClassScores::from_scores(vec![1.0; NUM_CLASSES]).unwrap();
        assert_eq!(tied.ranking, (0..NUM_CLASSES).collect::<Vec<_>>());
    }

    #[test]
    fn top_k_prefix_and_bounds() {
        let grid = grid_with_weights(1, vec![vec![0.0; 128]]);
        let train = set_of(DescriptorKind::Sift, vec![vec![0.0; 128]; 2]);
        let model = weight_neurons(grid, &[(train, 4)], names()).unwrap();
        let sample = set_of(DescriptorKind::Sift, vec![vec![0.5; 128]]);

        let full = predict_top_k(&model, &sample, NUM_CLASSES).unwrap();
        let mut sorted = full.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..NUM_CLASSES).collect::<Vec<_>>());

        let one = predict_top_k(&model, &sample, 1).unwrap();
        assert_eq!(one[0], classify(&model, &sample).unwrap().top());

        assert!(predict_top_k(&model, &sample, 0).is_err());
        assert!(predict_top_k(&model, &sample, NUM_CLASSES + 1).is_err());
    }

    #[test]
    fn model_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let vectors: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..32).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let mut cfg = tiny_config(3, 3, 32);
        cfg.epochs = 20;
        let grid = train_som(&vectors, &cfg).unwrap();
        let samples: Vec<(DescriptorSet, usize)> = (0..5)
            .map(|i| {
                let rows: Vec<Vec<f64>> = (0..32)
                    .map(|_| (0..32).map(|_| rng.gen::<f64>()).collect())
                    .collect();
                (set_of(DescriptorKind::RadonLocal, rows), i)
            })
            .collect();
        let model = weight_neurons(grid, &samples, names()).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(model, loaded);

        for _ in 0..100 {
            let rows: Vec<Vec<f64>> = (0..32)
                .map(|_| (0..32).map(|_| rng.gen::<f64>() * 3.0).collect())
                .collect();
            let sample = set_of(DescriptorKind::RadonLocal, rows);
            let a = classify(&model, &sample).unwrap();
            let b = classify(&loaded, &sample).unwrap();
            assert_eq!(a.scores, b.scores);
            assert_eq!(a.ranking, b.ranking);
        }
    }

    #[test]
    fn model_file_corruption_is_detected() {
        let grid = grid_with_weights(1, vec![vec![0.0; 128]]);
        let train = set_of(DescriptorKind::Sift, vec![vec![0.0; 128]; 2]);
        let model = weight_neurons(grid, &[(train, 0)], names()).unwrap();
        let dir = tempfile::tempdir().unwrap();

        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();

        // truncated file
        let truncated = dir.path().join("truncated.json");
        std::fs::write(&truncated, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_model(&truncated), Err(Error::ModelFormat(_))));

        // profile count mismatch
        let mut file: serde_json::Value = serde_json::from_str(&text).unwrap();
        let profiles = file["profiles"].as_array().unwrap().clone();
        let doubled: Vec<_> = profiles.iter().chain(profiles.iter()).cloned().collect();
        file["profiles"] = serde_json::Value::Array(doubled);
        let mismatched = dir.path().join("mismatch.json");
        std::fs::write(&mismatched, serde_json::to_string(&file).unwrap()).unwrap();
        assert!(matches!(load_model(&mismatched), Err(Error::ModelFormat(_))));

        // version mismatch
        let mut file: serde_json::Value = serde_json::from_str(&text).unwrap();
        file["format_version"] = serde_json::json!(99);
        let wrong_version = dir.path().join("version.json");
        std::fs::write(&wrong_version, serde_json::to_string(&file).unwrap()).unwrap();
        assert!(matches!(
            load_model(&wrong_version),
            Err(Error::ModelFormat(_))
        ));
    }
}
