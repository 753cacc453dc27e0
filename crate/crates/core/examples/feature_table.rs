//! Build a CRMP feature table for synthetic data and project it onto smaller
//! variants without recounting.

use crmp::eval::featurize;
use crmp::features::{FeatureSet, FeatureSpec, Variant};
use crmp::syngen::{generate, GeneratorConfig};

fn main() -> crmp::Result<()> {
    let data = generate(&GeneratorConfig::small())?.dataset;
    let full = featurize(&data, &FeatureSpec::default(), 0.8, 1.0, None, 0)?;
    let pos = full.labels.iter().filter(|&&l| l).count();
    println!("{} users ({pos} positive) x {} columns", full.n_rows(), full.n_cols());
    for c in full.columns.iter().take(3) {
        println!("  {}", c.name);
    }

    for variant in Variant::ALL {
        for feature_set in [FeatureSet::Heterogeneous, FeatureSet::Homogeneous] {
            for se in [true, false] {
                let spec = FeatureSpec {
                    variant,
                    feature_set,
                    similarity_extension: se,
                    ..FeatureSpec::default()
                };
                let t = full.project(&spec)?;
                println!("{variant} {feature_set} se={se}: {} columns", t.n_cols());
            }
        }
    }

    let path = std::env::temp_dir().join("crmp-example-features.tsv");
    full.write_tsv(&path)?;
    println!("written to {}", path.display());
    Ok(())
}
