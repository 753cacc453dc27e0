//! Five-fold cross-validation of CRMP on synthetic data over two seeds.

use crmp::eval::{report_table, run_experiment, DataSource, ExperimentConfig};
use crmp::syngen::GeneratorConfig;

fn main() -> crmp::Result<()> {
    let cfg = ExperimentConfig {
        data: DataSource::Synthetic(GeneratorConfig::small()),
        seeds: vec![0, 1],
        ..ExperimentConfig::default()
    };
    let r = run_experiment(&cfg)?;
    for f in &r.results {
        println!("seed {} fold {}: auc {:.3} accuracy {:.3}", f.seed, f.fold, f.auc, f.accuracy);
    }
    println!(
        "mean auc {:.3} (fold std {:.3}, seed std {:.3})",
        r.auc.mean, r.auc.fold_std, r.auc.seed_std
    );
    print!("{}", report_table(&[r]));
    Ok(())
}
