//! Cross-check every similarity, connector and recursive path count against
//! brute-force enumeration on random small network pairs.

use crmp::metapath::MetaPathCatalog;
use crmp::oracle::{check_catalog, random_fixture};

fn main() -> crmp::Result<()> {
    for seed in 0..5 {
        let d = random_fixture(seed)?;
        for cat in [MetaPathCatalog::heterogeneous(), MetaPathCatalog::heterogeneous().with_exclude_self(false)] {
            let r = check_catalog(&d.source, &d.target, &d.anchors, &cat)?;
            println!(
                "fixture {seed} exclude_self={}: {} paths, {} rows, {} cells, {} mismatches",
                cat.exclude_self,
                r.paths_checked,
                r.rows_checked,
                r.cells_checked,
                r.mismatches.len()
            );
            assert!(r.all_match());
        }
    }
    println!("all path counts match");
    Ok(())
}
