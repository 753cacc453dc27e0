//! Train the linear classifier on one split, score held-out users, and round
//! trip the model through its text format.

use crmp::classifier::{LinearModel, TrainOptions};
use crmp::eval::{auc, featurize, kfold_split};
use crmp::features::FeatureSpec;
use crmp::syngen::{generate, GeneratorConfig};

fn main() -> crmp::Result<()> {
    let data = generate(&GeneratorConfig::small())?.dataset;
    let table = featurize(&data, &FeatureSpec::default(), 0.8, 1.0, None, 0)?;
    let rows = table.to_f64_rows();
    let names: Vec<String> = table.columns.iter().map(|c| c.name.clone()).collect();

    let split = &kfold_split(&table.labels, 5, 0)?[0];
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<bool>) {
        (idx.iter().map(|&i| rows[i].clone()).collect(), idx.iter().map(|&i| table.labels[i]).collect())
    };
    let (x, y) = pick(&split.train);
    let (tx, ty) = pick(&split.test);

    let model = LinearModel::train(&x, &y, &names, &TrainOptions::default())?;
    let scores = tx.iter().map(|r| model.score(r)).collect::<crmp::Result<Vec<_>>>()?;
    println!("held-out AUC {:.3} on {} users", auc(&scores, &ty)?, ty.len());

    let mut top: Vec<(f64, &str)> = model.weights.iter().copied().zip(names.iter().map(String::as_str)).collect();
    top.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
    for (w, n) in top.iter().take(3) {
        println!("{w:+.3}  {n}");
    }

    let again = LinearModel::from_text(&model.to_text(), std::path::Path::new("model.txt"))?;
    assert_eq!(again, model);
    println!("model text format round-trips exactly");
    Ok(())
}
