//! The `crmp` command line. Every verb writes its outputs plus a
//! `manifest.json` and the resolved `config.txt` into `--out`; logs go to
//! standard error. Exit codes: 0 success, 1 pipeline failure (message names
//! the stage), 2 usage error.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::classifier::{LinearModel, TrainOptions};
use crate::config::Config;
use crate::dataset::{read_labels, Dataset};
use crate::error::{Error, Result, StageExt};
use crate::eval::{self, Axis, DataSource};
use crate::features::{FeatureTable, Variant};
use crate::hetgraph::LoadOptions;
use crate::metapath::MetaPathCatalog;
use crate::oracle;
use crate::syngen;

/// Seed of the bundled `oracle-check` fixture.
pub const FIXTURE_SEED: u64 = 20;

#[derive(Parser, Debug)]
#[command(name = "crmp", version, about = "Anchor link prediction with connector and recursive meta-path features")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Configuration file (`[section]` / `key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set experiment.gamma_A=0.5`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (default: $CRMP_WORKERS, else all cores). Outputs do
    /// not depend on it.
    #[arg(long, env = "CRMP_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Write a synthetic network pair with ground-truth labels.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a dataset directory and write a normalized copy.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the labelled feature table for the first experiment seed.
    Featurize {
        #[command(flatten)]
        common: Common,
        /// Dataset directory; synthetic data from `[generator]` otherwise.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a whole feature table.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        features: PathBuf,
        /// `<user_id>\t<0|1>` file replacing the table's labels.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validated experiment, or scoring of a saved model with
    /// `--model` and `--features`.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with_all = ["model", "features"])]
        data: Option<PathBuf>,
        #[arg(long, requires = "features")]
        model: Option<PathBuf>,
        #[arg(long, requires = "model")]
        features: Option<PathBuf>,
        #[arg(long, requires = "model")]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a grid along one axis for one or more variants.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// gamma_A, gamma_T, feature_set or se.
        #[arg(long)]
        axis: String,
        /// `from:to:step`, or a comma list (`hom,het`, `with,without`).
        #[arg(long)]
        values: String,
        /// all, or a comma list of cmp, rmp, crmp.
        #[arg(long, default_value = "all")]
        variant: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare matrix path counts with brute-force enumeration.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Dataset directory to check instead of the bundled fixture.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Refuse datasets with more users than this (both networks).
        #[arg(long, default_value_t = 200)]
        max_users: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Verb {
    fn name(&self) -> &'static str {
        match self {
            Verb::Generate { .. } => "generate",
            Verb::Ingest { .. } => "ingest",
            Verb::Featurize { .. } => "featurize",
            Verb::Train { .. } => "train",
            Verb::Evaluate { .. } => "evaluate",
            Verb::Sweep { .. } => "sweep",
            Verb::OracleCheck { .. } => "oracle-check",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Verb::Generate { common, .. }
            | Verb::Ingest { common, .. }
            | Verb::Featurize { common, .. }
            | Verb::Train { common, .. }
            | Verb::Evaluate { common, .. }
            | Verb::Sweep { common, .. }
            | Verb::OracleCheck { common, .. } => common,
        }
    }
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    verb: &'static str,
    /// Canonical config text after `--set` overrides and flags.
    config: String,
    resolved: serde_json::Value,
    seeds: Vec<u64>,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

/// Parse `argv` (including the program name) and run; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let verb = cli.verb.name();
    match dispatch(&cli.verb) {
        Ok(()) => 0,
        Err(Error::Config(msg)) => {
            eprintln!("crmp {verb}: usage: {msg}");
            2
        }
        Err(e) => {
            let e = match e {
                e @ Error::Stage { .. } => e,
                e => Error::Stage {
                    stage: verb,
                    source: Box::new(e),
                },
            };
            eprintln!("crmp {verb}: {e}");
            1
        }
    }
}

fn dispatch(verb: &Verb) -> Result<()> {
    let common = verb.common();
    let mut config = match &common.config {
        Some(p) => Config::load(p).stage("config")?,
        None => Config::default(),
    };
    for s in &common.overrides {
        config.set(s)?;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| match verb {
        Verb::Generate { out, .. } => generate(&config, out),
        Verb::Ingest { data, out, .. } => ingest(&config, data, out),
        Verb::Featurize { data, out, .. } => featurize(&mut config, data.as_deref(), out),
        Verb::Train {
            features,
            labels,
            out,
            ..
        } => train(&config, features, labels.as_deref(), out),
        Verb::Evaluate {
            data,
            model: Some(model),
            features: Some(features),
            labels,
            out,
            ..
        } => {
            let _ = data;
            score(&config, model, features, labels.as_deref(), out)
        }
        Verb::Evaluate { data, out, .. } => evaluate(&mut config, data.as_deref(), out),
        Verb::Sweep {
            data,
            axis,
            values,
            variant,
            out,
            ..
        } => sweep(&mut config, data.as_deref(), axis, values, variant, out),
        Verb::OracleCheck {
            data,
            max_users,
            out,
            ..
        } => oracle_check(&config, data.as_deref(), *max_users, out.as_deref()),
    })
}

fn use_data_dir(config: &mut Config, data: Option<&Path>) -> Result<()> {
    if let Some(d) = data {
        config.set("data.source=dir")?;
        config.set(&format!("data.dir={}", d.display()))?;
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// SHA-256 of a file, or of a directory's files in sorted relative-path order
/// (each path and its contents are hashed).
pub fn digest(path: &Path) -> Result<String> {
    fn walk(root: &Path, dir: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
            .collect::<Result<_>>()?;
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, files)?;
            } else {
                files.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
        Ok(())
    }
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        walk(path, path, &mut files)?;
        for rel in files {
            let full = path.join(&rel);
            h.update(rel.to_string_lossy().as_bytes());
            h.update([0]);
            h.update(fs::read(&full).map_err(|e| Error::io(&full, e))?);
            h.update([0]);
        }
    } else {
        h.update(fs::read(path).map_err(|e| Error::io(path, e))?);
    }
    Ok(format!("{:x}", h.finalize()))
}

fn inputs(paths: &[&Path]) -> Result<Vec<InputDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(InputDigest {
                path: p.display().to_string(),
                sha256: digest(p)?,
            })
        })
        .collect()
}

fn finish(
    out: &Path,
    verb: &'static str,
    config: &Config,
    resolved: impl Serialize,
    seeds: Vec<u64>,
    inputs: Vec<InputDigest>,
    mut outputs: Vec<String>,
) -> Result<()> {
    outputs.push("config.txt".into());
    outputs.sort();
    let manifest = Manifest {
        tool: "crmp",
        version: env!("CARGO_PKG_VERSION"),
        verb,
        config: config.to_text(),
        resolved: serde_json::to_value(resolved)?,
        seeds,
        inputs,
        outputs,
    };
    write_text(&out.join("config.txt"), &config.to_text())?;
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    write_text(&out.join("manifest.json"), &json).stage("manifest")
}

fn generate(config: &Config, out: &Path) -> Result<()> {
    let cfg = config.generator()?;
    log::info!("generating synthetic pair with seed {}", cfg.seed);
    let g = syngen::generate(&cfg).stage("generate")?;
    create_dir(out)?;
    g.dataset.write(out).stage("write")?;
    g.dataset.write_labels(&out.join("labels.tsv")).stage("write")?;
    log::info!("source: {}", g.dataset.source.stats());
    log::info!("target: {}", g.dataset.target.stats());
    let outputs = ["source", "target", "anchors.tsv", "labels.tsv"].map(String::from).to_vec();
    finish(out, "generate", config, &cfg, vec![cfg.seed], Vec::new(), outputs)
}

fn ingest(config: &Config, data: &Path, out: &Path) -> Result<()> {
    let max_edges_per_link = config
        .get("data.max_edges_per_link")
        .map(|v| {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad value `{v}` for data.max_edges_per_link")))
        })
        .transpose()?;
    let d = Dataset::load(data, LoadOptions { max_edges_per_link }).stage("ingest")?;
    create_dir(out)?;
    d.write(out).stage("write")?;
    let labels = data.join("labels.tsv");
    let mut outputs = vec!["source".to_string(), "target".into(), "anchors.tsv".into(), "stats.txt".into()];
    if labels.exists() {
        fs::copy(&labels, out.join("labels.tsv")).map_err(|e| Error::io(&labels, e))?;
        outputs.push("labels.tsv".into());
    }
    let stats = format!(
        "[source]\n{}[target]\n{}[anchors]\n{}\n",
        d.source.stats(),
        d.target.stats(),
        d.anchors.len()
    );
    write_text(&out.join("stats.txt"), &stats)?;
    let resolved = serde_json::json!({ "max_edges_per_link": max_edges_per_link });
    finish(out, "ingest", config, resolved, Vec::new(), inputs(&[data])?, outputs)
}

fn data_inputs(data: &DataSource) -> Result<Vec<InputDigest>> {
    match data {
        DataSource::Directory { path, .. } => inputs(&[path]),
        DataSource::Synthetic(_) => Ok(Vec::new()),
    }
}

fn featurize(config: &mut Config, data: Option<&Path>, out: &Path) -> Result<()> {
    use_data_dir(config, data)?;
    let exp = config.experiment()?;
    let seed = exp.seeds[0];
    let dataset = match &exp.data {
        DataSource::Synthetic(g) => {
            syngen::generate(&syngen::GeneratorConfig { seed, ..g.clone() })
                .stage("generate")?
                .dataset
        }
        DataSource::Directory {
            path,
            max_edges_per_link,
        } => Dataset::load(
            path,
            LoadOptions {
                max_edges_per_link: *max_edges_per_link,
            },
        )
        .stage("load")?,
    };
    let p = exp.point;
    let table = eval::featurize(&dataset, &p.spec, p.gamma_a, p.gamma_t, exp.negative_cap, seed)?;
    log::info!("{} rows x {} columns", table.n_rows(), table.n_cols());
    let saturated: u64 = table.saturated.iter().sum();
    if saturated > 0 {
        log::warn!("{saturated} feature cells saturated at the count cap");
    }
    create_dir(out)?;
    table.write_tsv(&out.join("features.tsv")).stage("write")?;
    let digests = data_inputs(&exp.data)?;
    finish(out, "featurize", config, &exp, vec![seed], digests, vec!["features.tsv".into()])
}

fn load_table(features: &Path, labels: Option<&Path>) -> Result<FeatureTable> {
    let mut table = FeatureTable::read_tsv(features).stage("load")?;
    if let Some(l) = labels {
        let map: HashMap<String, bool> = read_labels(l).stage("load")?.into_iter().collect();
        table.relabel(&map).stage("load")?;
    }
    Ok(table)
}

fn train(config: &Config, features: &Path, labels: Option<&Path>, out: &Path) -> Result<()> {
    let opts: TrainOptions = config.train_options()?;
    let table = load_table(features, labels)?;
    let names: Vec<String> = table.columns.iter().map(|c| c.name.clone()).collect();
    let model = LinearModel::train(&table.to_f64_rows(), &table.labels, &names, &opts).stage("train")?;
    create_dir(out)?;
    model.save(&out.join("model.txt")).stage("write")?;
    let mut paths = vec![features];
    paths.extend(labels);
    finish(out, "train", config, opts, vec![opts.seed], inputs(&paths)?, vec!["model.txt".into()])
}

fn score(config: &Config, model: &Path, features: &Path, labels: Option<&Path>, out: &Path) -> Result<()> {
    let m = LinearModel::load(model).stage("load")?;
    let table = load_table(features, labels)?;
    let names: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    if !m.columns.is_empty() && m.columns.iter().map(String::as_str).ne(names.iter().copied()) {
        return Err(Error::InvalidArgument(format!(
            "feature columns of {} do not match the model's columns",
            features.display()
        )))
        .stage("score");
    }
    let scores = table
        .to_f64_rows()
        .iter()
        .map(|r| m.score(r))
        .collect::<Result<Vec<f64>>>()
        .stage("score")?;
    let predicted: Vec<bool> = scores.iter().map(|&s| s > 0.0).collect();
    let mut body = String::from("user_id\tlabel\tscore\n");
    for ((id, l), s) in table.user_ids.iter().zip(&table.labels).zip(&scores) {
        writeln!(body, "{id}\t{}\t{s:?}", u8::from(*l)).unwrap();
    }
    let metrics = format!(
        "rows\tpositives\taccuracy\ttopk_accuracy\tauc\n{}\t{}\t{:.6}\t{:.6}\t{:.6}\n",
        table.n_rows(),
        table.labels.iter().filter(|&&l| l).count(),
        eval::accuracy(&predicted, &table.labels)?,
        eval::topk_accuracy(&scores, &table.labels).stage("score")?,
        eval::auc(&scores, &table.labels).stage("score")?,
    );
    create_dir(out)?;
    write_text(&out.join("scores.tsv"), &body)?;
    write_text(&out.join("metrics.tsv"), &metrics)?;
    let mut paths = vec![model, features];
    paths.extend(labels);
    let resolved = serde_json::json!({ "mode": "score" });
    let outputs = vec!["scores.tsv".into(), "metrics.tsv".into()];
    finish(out, "evaluate", config, resolved, Vec::new(), inputs(&paths)?, outputs)
}

fn evaluate(config: &mut Config, data: Option<&Path>, out: &Path) -> Result<()> {
    use_data_dir(config, data)?;
    let exp = config.experiment()?;
    let report = eval::run_experiment(&exp)?;
    log::info!(
        "{} auc {:.4} (fold std {:.4}, seed std {:.4}) in {:.1}s",
        report.point.spec.variant,
        report.auc.mean,
        report.auc.fold_std,
        report.auc.seed_std,
        report.elapsed_secs
    );
    create_dir(out)?;
    eval::write_reports(std::slice::from_ref(&report), out).stage("write")?;
    let outputs = vec!["report.tsv".into(), "folds.tsv".into()];
    finish(out, "evaluate", config, &exp, exp.seeds.clone(), data_inputs(&exp.data)?, outputs)
}

/// `all` or a comma list of variant names.
pub fn parse_variants(text: &str) -> Result<Vec<Variant>> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(Variant::ALL.to_vec());
    }
    text.split(',').map(|v| v.trim().parse()).collect()
}

fn sweep(config: &mut Config, data: Option<&Path>, axis: &str, values: &str, variant: &str, out: &Path) -> Result<()> {
    use_data_dir(config, data)?;
    let exp = config.experiment()?;
    let axis: Axis = axis.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let variants = parse_variants(variant).map_err(|e| Error::Config(e.to_string()))?;
    let points = eval::sweep_points(&exp.point, axis, values, &variants).map_err(|e| Error::Config(e.to_string()))?;
    log::info!("sweeping {} grid points over {} seeds", points.len(), exp.seeds.len());
    let reports = eval::run_grid(&exp, &points)?;
    create_dir(out)?;
    eval::write_reports(&reports, out).stage("write")?;
    let resolved = serde_json::json!({
        "experiment": &exp,
        "axis": axis,
        "values": values,
        "variants": variants,
    });
    let outputs = vec!["report.tsv".into(), "folds.tsv".into()];
    finish(out, "sweep", config, resolved, exp.seeds.clone(), data_inputs(&exp.data)?, outputs)
}

fn oracle_check(config: &Config, data: Option<&Path>, max_users: usize, out: Option<&Path>) -> Result<()> {
    let spec = config.feature_spec()?;
    let dataset = match data {
        Some(d) => Dataset::load(d, LoadOptions::default()).stage("load")?,
        None => oracle::random_fixture(FIXTURE_SEED).stage("fixture")?,
    };
    let users = dataset.source.node_count(crate::dataset::USER)? + dataset.target.node_count(crate::dataset::USER)?;
    if users > max_users {
        return Err(Error::InvalidArgument(format!(
            "{users} users exceed --max-users {max_users}; brute-force enumeration is exponential"
        )))
        .stage("oracle");
    }
    let catalog: MetaPathCatalog = spec.catalog();
    let report = oracle::check_catalog(&dataset.source, &dataset.target, &dataset.anchors, &catalog).stage("oracle")?;
    let summary = if report.all_match() {
        format!(
            "all path counts match ({} paths, {} rows, {} feature cells)\n",
            report.paths_checked, report.rows_checked, report.cells_checked
        )
    } else {
        let mut s = format!("{} mismatches\n", report.mismatches.len());
        for m in &report.mismatches {
            writeln!(s, "{m}").unwrap();
        }
        s
    };
    print!("{summary}");
    if let Some(out) = out {
        create_dir(out)?;
        write_text(&out.join("oracle.txt"), &summary)?;
        let digests = match data {
            Some(d) => inputs(&[d])?,
            None => Vec::new(),
        };
        let resolved = serde_json::json!({ "spec": spec, "fixture_seed": data.is_none().then_some(FIXTURE_SEED) });
        finish(out, "oracle-check", config, resolved, Vec::new(), digests, vec!["oracle.txt".into()])?;
    }
    if report.all_match() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{} path counts differ from brute-force enumeration",
            report.mismatches.len()
        )))
        .stage("oracle")
    }
}
