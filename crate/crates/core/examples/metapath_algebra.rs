//! Build, print, parse, invert and compose meta-paths; enumerate the catalog.

use crmp::metapath::{similarity_paths, MetaPath, MetaPathCatalog, Side};

fn main() -> crmp::Result<()> {
    for (i, p) in similarity_paths(Side::Source).iter().enumerate() {
        println!("σ{} = {p}  (palindromic: {})", i + 1, p.is_palindromic());
    }

    let cat = MetaPathCatalog::heterogeneous();
    let psi = cat.connector(7)?;
    println!("\nΨ7 = {psi}");
    println!("Ψ7⁻¹ = {}", psi.invert());

    let phi = cat.recursive(1, 1, 7)?;
    println!("Φ(1,1,7) = {phi}");
    let parsed: MetaPath = phi.to_string().parse()?;
    assert_eq!(parsed, phi);
    println!("printed form parses back to the same path");

    let sigma1 = &cat.source_sims()[0];
    let two_hop = sigma1.compose(sigma1)?;
    println!("σ1 ∘ σ1 = {two_hop}");

    let hom = MetaPathCatalog::homogeneous();
    for (name, c) in [("heterogeneous", &cat), ("homogeneous", &hom)] {
        let n = c.connector_indices().len();
        println!("{name}: {n} connector + {} recursive paths", n * c.r() * n);
    }
    Ok(())
}
