//! Sweep the retained-anchor fraction γ_A for all three variants.

use crmp::eval::{run_grid, sweep_points, Axis, DataSource, ExperimentConfig, GridPoint};
use crmp::features::Variant;
use crmp::syngen::GeneratorConfig;

fn main() -> crmp::Result<()> {
    let cfg = ExperimentConfig {
        data: DataSource::Synthetic(GeneratorConfig::small()),
        seeds: vec![0, 1],
        ..ExperimentConfig::default()
    };
    let points = sweep_points(&GridPoint::default(), Axis::GammaA, "0.2:0.8:0.3", &Variant::ALL)?;
    println!("gamma_A\tvariant\tauc");
    for r in run_grid(&cfg, &points)? {
        println!("{}\t{}\t{:.3}", r.point.gamma_a, r.point.spec.variant, r.auc.mean);
    }
    Ok(())
}
