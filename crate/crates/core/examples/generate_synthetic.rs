//! Generate a small synthetic network pair and write it to a directory.

use crmp::syngen::{generate, GeneratorConfig};

fn main() -> crmp::Result<()> {
    let cfg = GeneratorConfig {
        seed: 7,
        ..GeneratorConfig::small()
    };
    let g = generate(&cfg)?;
    let d = &g.dataset;
    println!("source network:\n{}", d.source.stats());
    println!("target network:\n{}", d.target.stats());

    let truth = d.ground_truth()?;
    let pos = truth.iter().filter(|(_, l)| *l).count();
    println!(
        "{} anchors, {} positives, {} negatives, {} planted target follows",
        d.anchors.len(),
        pos,
        truth.len() - pos,
        g.planted.len()
    );

    let dir = std::env::temp_dir().join("crmp-example-generate");
    d.write(&dir)?;
    d.write_labels(&dir.join("labels.tsv"))?;
    println!("written to {}", dir.display());
    Ok(())
}
