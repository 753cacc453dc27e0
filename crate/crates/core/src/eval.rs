//! Cross-validated evaluation: fold splits, metrics, and experiment grids.
//!
//! One experiment run per seed goes: data → labelled set at γ_A → prune the
//! positives' target accounts → thin the target at γ_T → featurize → k-fold
//! train/test. Grid points that share (seed, γ_A, γ_T) share one feature
//! table; every variant/feature-set/SE column set is a projection of it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchor::{build_labeled_set, LabelOptions};
use crate::classifier::{LinearModel, TrainOptions};
use crate::count::PathCounter;
use crate::dataset::{Dataset, USER};
use crate::error::{Error, Result, StageExt};
use crate::features::{build_feature_table, FeatureSet, FeatureSpec, FeatureTable, Variant};
use crate::hetgraph::{subsample_network, LoadOptions, SubsamplePlan};
use crate::rng::{stream, Stage};
use crate::syngen::{generate, GeneratorConfig};

/// Indices into a labelled row list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold split. Each class is shuffled and dealt round-robin, the
/// negatives continuing where the positives stopped so fold sizes differ by at
/// most one overall and per class.
pub fn kfold_split(labels: &[bool], folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    let mut assign = vec![0usize; labels.len()];
    let mut offset = 0;
    for (sub, class) in [true, false].into_iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(Error::InvalidArgument(format!(
                "{} {} samples cannot fill {folds} folds",
                members.len(),
                if class { "positive" } else { "negative" }
            )));
        }
        members.shuffle(&mut stream(seed, Stage::Folds, sub as u64));
        for (r, &i) in members.iter().enumerate() {
            assign[i] = (offset + r) % folds;
        }
        offset = (offset + members.len()) % folds;
    }
    Ok((0..folds)
        .map(|f| {
            let (test, train) = (0..labels.len()).partition(|&i| assign[i] == f);
            Fold { train, test }
        })
        .collect())
}

fn class_counts(labels: &[bool]) -> Result<(u64, u64)> {
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument("metric needs both classes present".into()));
    }
    Ok((pos, neg))
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    Ok(())
}

/// Mann–Whitney AUC with ties counted one half. Ranks are kept doubled so tie
/// midranks stay integral; the only rounding is the final division.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_scores(scores, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j share the midrank (i+1+j)/2
        let mid2 = (i + 1 + j) as u128;
        let tied_pos = order[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        rank_sum2 += mid2 * tied_pos;
        i = j;
    }
    let u2 = rank_sum2 - (pos as u128) * (pos as u128 + 1);
    Ok(u2 as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// Label the `k = #positives` highest-scoring rows positive (ties keep input
/// order) and return the accuracy of that labelling.
pub fn topk_accuracy(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_scores(scores, labels)?;
    let (pos, _) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut predicted = vec![false; labels.len()];
    order[..pos as usize].iter().for_each(|&i| predicted[i] = true);
    accuracy(&predicted, labels)
}

pub fn accuracy(predicted: &[bool], labels: &[bool]) -> Result<f64> {
    if predicted.len() != labels.len() || labels.is_empty() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: predicted.len(),
        });
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    /// Regenerated for every experiment seed, with the generator seed set to
    /// the experiment seed.
    Synthetic(GeneratorConfig),
    /// A dataset directory (see [`crate::dataset`]).
    Directory {
        path: PathBuf,
        max_edges_per_link: Option<usize>,
    },
}

/// One cell of an experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub spec: FeatureSpec,
    pub gamma_a: f64,
    pub gamma_t: f64,
}

impl Default for GridPoint {
    fn default() -> Self {
        GridPoint {
            spec: FeatureSpec::default(),
            gamma_a: 0.8,
            gamma_t: 1.0,
        }
    }
}

impl GridPoint {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("gamma_A", self.gamma_a), ("gamma_T", self.gamma_t)] {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::InvalidArgument(format!("{name} = {g} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub point: GridPoint,
    pub folds: usize,
    pub seeds: Vec<u64>,
    pub negative_cap: Option<usize>,
    pub train: TrainOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::Synthetic(GeneratorConfig::default()),
            point: GridPoint::default(),
            folds: 5,
            seeds: vec![0],
            negative_cap: None,
            train: TrainOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub seed: u64,
    pub fold: usize,
    pub accuracy: f64,
    pub topk_accuracy: f64,
    pub auc: f64,
}

/// Mean with two spreads: `fold_std` over every fold of every seed, and
/// `seed_std` over the per-seed means (0 for a single seed). Both are sample
/// standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub fold_std: f64,
    pub seed_std: f64,
    pub min: f64,
    pub max: f64,
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

impl MetricSummary {
    fn of(results: &[FoldResult], seeds: &[u64], metric: impl Fn(&FoldResult) -> f64) -> MetricSummary {
        let all: Vec<f64> = results.iter().map(&metric).collect();
        let seed_means: Vec<f64> = seeds
            .iter()
            .map(|s| {
                let v: Vec<f64> = results.iter().filter(|r| r.seed == *s).map(&metric).collect();
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect();
        MetricSummary {
            mean: all.iter().sum::<f64>() / all.len() as f64,
            fold_std: sample_std(&all),
            seed_std: sample_std(&seed_means),
            min: all.iter().copied().fold(f64::INFINITY, f64::min),
            max: all.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub point: GridPoint,
    pub folds: usize,
    pub seeds: Vec<u64>,
    /// (positives, negatives) per seed.
    pub class_counts: Vec<(usize, usize)>,
    pub feature_columns: usize,
    pub saturated_cells: u64,
    pub results: Vec<FoldResult>,
    pub accuracy: MetricSummary,
    pub topk_accuracy: MetricSummary,
    pub auc: MetricSummary,
    /// Wall-clock seconds; not written to report files.
    #[serde(skip)]
    pub elapsed_secs: f64,
}

/// Train and test one model per fold. Folds run in parallel; results come
/// back in fold order.
pub fn cross_validate(table: &FeatureTable, folds: &[Fold], train: &TrainOptions, seed: u64) -> Result<Vec<FoldResult>> {
    let rows = table.to_f64_rows();
    let names: Vec<String> = table.columns.iter().map(|c| c.name.clone()).collect();
    folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let x: Vec<Vec<f64>> = fold.train.iter().map(|&i| rows[i].clone()).collect();
            let y: Vec<bool> = fold.train.iter().map(|&i| table.labels[i]).collect();
            let opts = TrainOptions {
                seed,
                run: f as u64,
                ..*train
            };
            let model = LinearModel::train(&x, &y, &names, &opts)?;
            let truth: Vec<bool> = fold.test.iter().map(|&i| table.labels[i]).collect();
            let scores = fold
                .test
                .iter()
                .map(|&i| model.score(&rows[i]))
                .collect::<Result<Vec<_>>>()?;
            let predicted: Vec<bool> = scores.iter().map(|&s| s > 0.0).collect();
            Ok(FoldResult {
                seed,
                fold: f,
                accuracy: accuracy(&predicted, &truth)?,
                topk_accuracy: topk_accuracy(&scores, &truth)?,
                auc: auc(&scores, &truth)?,
            })
        })
        .collect()
}

/// Smallest spec whose columns include every spec in `specs` (all sharing
/// one `exclude_self`).
fn covering_spec(specs: &[FeatureSpec]) -> FeatureSpec {
    let conn = specs.iter().any(|s| s.variant.uses_connector());
    let rec = specs.iter().any(|s| s.variant.uses_recursive());
    FeatureSpec {
        variant: match (conn, rec) {
            (true, true) => Variant::Crmp,
            (false, true) => Variant::Rmp,
            _ => Variant::Cmp,
        },
        feature_set: if specs.iter().any(|s| s.feature_set == FeatureSet::Heterogeneous) {
            FeatureSet::Heterogeneous
        } else {
            FeatureSet::Homogeneous
        },
        similarity_extension: specs.iter().any(|s| s.similarity_extension),
        exclude_self: specs[0].exclude_self,
    }
}

/// Labelled feature table for one (dataset, γ_A, γ_T, seed).
pub fn featurize(
    data: &Dataset,
    spec: &FeatureSpec,
    gamma_a: f64,
    gamma_t: f64,
    negative_cap: Option<usize>,
    seed: u64,
) -> Result<FeatureTable> {
    let n_source = data.source.node_count(USER)?;
    let (labeled, directive) = build_labeled_set(
        &data.anchors,
        n_source,
        LabelOptions {
            gamma_a,
            negative_cap,
        },
        seed,
    )
    .stage("label")?;
    let pruned = directive.apply(&data.target, USER).stage("prune")?;
    let target = subsample_network(&pruned, &SubsamplePlan::target_newness(gamma_t), seed).stage("subsample")?;
    let counter = PathCounter::new(&data.source, &target, &labeled.retained, USER).stage("featurize")?;
    let (users, labels) = labeled.users_and_labels();
    build_feature_table(&counter, &users, &labels, spec).stage("featurize")
}

fn load_data(source: &DataSource, seed: u64) -> Result<Dataset> {
    match source {
        DataSource::Synthetic(cfg) => Ok(generate(&GeneratorConfig {
            seed,
            ..cfg.clone()
        })?
        .dataset),
        DataSource::Directory {
            path,
            max_edges_per_link,
        } => Dataset::load(
            path,
            LoadOptions {
                max_edges_per_link: *max_edges_per_link,
            },
        ),
    }
}

/// Evaluate every grid point under `base`'s data, folds, seeds and training
/// options. Reports come back in `points` order.
pub fn run_grid(base: &ExperimentConfig, points: &[GridPoint]) -> Result<Vec<EvaluationReport>> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty experiment grid".into()));
    }
    if base.seeds.is_empty() {
        return Err(Error::InvalidArgument("no seeds given".into()));
    }
    if base.folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {}", base.folds)));
    }
    for p in points {
        p.validate()?;
    }
    let started = Instant::now();

    // groups of points sharing one feature table, in first-appearance order
    let mut groups: Vec<(f64, f64, bool, Vec<usize>)> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let key = (p.gamma_a, p.gamma_t, p.spec.exclude_self);
        match groups.iter_mut().find(|g| (g.0, g.1, g.2) == key) {
            Some(g) => g.3.push(i),
            None => groups.push((key.0, key.1, key.2, vec![i])),
        }
    }

    let mut results: Vec<Vec<FoldResult>> = vec![Vec::new(); points.len()];
    let mut counts: Vec<Vec<(usize, usize)>> = vec![Vec::new(); points.len()];
    let mut columns = vec![0usize; points.len()];
    let mut saturated = vec![0u64; points.len()];
    let shared = match &base.data {
        DataSource::Directory { .. } => Some(load_data(&base.data, 0).stage("load")?),
        DataSource::Synthetic(_) => None,
    };
    for &seed in &base.seeds {
        let owned;
        let data = match &shared {
            Some(d) => d,
            None => {
                owned = load_data(&base.data, seed).stage("generate")?;
                &owned
            }
        };
        for (gamma_a, gamma_t, _, members) in &groups {
            let specs: Vec<FeatureSpec> = members.iter().map(|&i| points[i].spec).collect();
            let cover = covering_spec(&specs);
            let t0 = Instant::now();
            let table = featurize(data, &cover, *gamma_a, *gamma_t, base.negative_cap, seed)?;
            log::info!(
                "seed {seed} gamma_A {gamma_a} gamma_T {gamma_t}: {} rows x {} columns in {:.1}s",
                table.n_rows(),
                table.n_cols(),
                t0.elapsed().as_secs_f64()
            );
            let folds = kfold_split(&table.labels, base.folds, seed).stage("split")?;
            let pos = table.labels.iter().filter(|&&l| l).count();
            for &i in members {
                let projected = table.project(&points[i].spec).stage("featurize")?;
                let fold_results = cross_validate(&projected, &folds, &base.train, seed).stage("train")?;
                results[i].extend(fold_results);
                counts[i].push((pos, table.n_rows() - pos));
                columns[i] = projected.n_cols();
                saturated[i] += projected.saturated.iter().sum::<u64>();
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let r = &results[i];
            EvaluationReport {
                point: *p,
                folds: base.folds,
                seeds: base.seeds.clone(),
                class_counts: counts[i].clone(),
                feature_columns: columns[i],
                saturated_cells: saturated[i],
                results: r.clone(),
                accuracy: MetricSummary::of(r, &base.seeds, |f| f.accuracy),
                topk_accuracy: MetricSummary::of(r, &base.seeds, |f| f.topk_accuracy),
                auc: MetricSummary::of(r, &base.seeds, |f| f.auc),
                elapsed_secs: elapsed,
            }
        })
        .collect())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvaluationReport> {
    Ok(run_grid(cfg, &[cfg.point])?.remove(0))
}

/// Which grid dimension a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    GammaA,
    GammaT,
    FeatureSet,
    Se,
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gamma_a" => Ok(Axis::GammaA),
            "gamma_t" => Ok(Axis::GammaT),
            "feature_set" => Ok(Axis::FeatureSet),
            "se" => Ok(Axis::Se),
            _ => Err(Error::InvalidArgument(format!(
                "unknown axis `{s}` (gamma_A|gamma_T|feature_set|se)"
            ))),
        }
    }
}

/// Parse `from:to:step` (inclusive) or a comma list. Values are rounded to
/// 1e-9 so `0.1:0.8:0.1` yields exactly 0.1, 0.2, ..., 0.8.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("bad number `{s}` in `{text}`")))
    };
    let round = |x: f64| (x * 1e9).round() / 1e9;
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [from, to, step] => {
            let (from, to, step) = (num(from)?, num(to)?, num(step)?);
            if step <= 0.0 || to < from {
                return Err(Error::InvalidArgument(format!("empty range `{text}`")));
            }
            let n = ((to - from) / step + 1e-9).floor() as usize + 1;
            Ok((0..n).map(|i| round(from + i as f64 * step)).collect())
        }
        [_] => text.split(',').map(|v| num(v).map(round)).collect(),
        _ => Err(Error::InvalidArgument(format!("range `{text}` must be from:to:step or a list"))),
    }
}

/// Grid points for a sweep: every value of `axis` times every variant.
pub fn sweep_points(base: &GridPoint, axis: Axis, values: &str, variants: &[Variant]) -> Result<Vec<GridPoint>> {
    let mut out = Vec::new();
    let words: Vec<&str> = values.split(',').map(str::trim).collect();
    let cells: Vec<GridPoint> = match axis {
        Axis::GammaA => parse_range(values)?
            .into_iter()
            .map(|g| GridPoint { gamma_a: g, ..*base })
            .collect(),
        Axis::GammaT => parse_range(values)?
            .into_iter()
            .map(|g| GridPoint { gamma_t: g, ..*base })
            .collect(),
        Axis::FeatureSet => words
            .iter()
            .map(|w| {
                let mut p = *base;
                p.spec.feature_set = w.parse()?;
                Ok(p)
            })
            .collect::<Result<_>>()?,
        Axis::Se => words
            .iter()
            .map(|w| {
                let mut p = *base;
                p.spec.similarity_extension = match *w {
                    "with" | "true" | "1" => true,
                    "without" | "false" | "0" => false,
                    _ => return Err(Error::InvalidArgument(format!("se value `{w}` (with|without)"))),
                };
                Ok(p)
            })
            .collect::<Result<_>>()?,
    };
    for cell in cells {
        for &v in variants {
            let mut p = cell;
            p.spec.variant = v;
            p.validate()?;
            out.push(p);
        }
    }
    Ok(out)
}

const REPORT_HEADER: &str = "variant\tfeature_set\tse\texclude_self\tgamma_A\tgamma_T\tfolds\tseeds\tcolumns\tpositives\tnegatives\tacc_mean\tacc_fold_std\tacc_seed_std\ttopk_mean\ttopk_fold_std\ttopk_seed_std\tauc_mean\tauc_fold_std\tauc_seed_std";

/// One row per report; stable column order (see the header line).
pub fn report_table(reports: &[EvaluationReport]) -> String {
    let mut s = String::new();
    writeln!(s, "{REPORT_HEADER}").unwrap();
    for r in reports {
        let sp = &r.point.spec;
        let pos: usize = r.class_counts.iter().map(|c| c.0).sum();
        let neg: usize = r.class_counts.iter().map(|c| c.1).sum();
        let n = r.class_counts.len().max(1);
        write!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            sp.variant,
            sp.feature_set,
            if sp.similarity_extension { "with" } else { "without" },
            sp.exclude_self,
            r.point.gamma_a,
            r.point.gamma_t,
            r.folds,
            r.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
            r.feature_columns,
            pos / n,
            neg / n,
        )
        .unwrap();
        for m in [&r.accuracy, &r.topk_accuracy, &r.auc] {
            write!(s, "\t{:.6}\t{:.6}\t{:.6}", m.mean, m.fold_std, m.seed_std).unwrap();
        }
        writeln!(s).unwrap();
    }
    s
}

/// Per-fold metrics for every report.
pub fn fold_table(reports: &[EvaluationReport]) -> String {
    let mut s = String::new();
    writeln!(s, "variant\tfeature_set\tse\tgamma_A\tgamma_T\tseed\tfold\taccuracy\ttopk_accuracy\tauc").unwrap();
    for r in reports {
        let sp = &r.point.spec;
        for f in &r.results {
            writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
                sp.variant,
                sp.feature_set,
                if sp.similarity_extension { "with" } else { "without" },
                r.point.gamma_a,
                r.point.gamma_t,
                f.seed,
                f.fold,
                f.accuracy,
                f.topk_accuracy,
                f.auc
            )
            .unwrap();
        }
    }
    s
}

pub fn write_reports(reports: &[EvaluationReport], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, body) in [("report.tsv", report_table(reports)), ("folds.tsv", fold_table(reports))] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
