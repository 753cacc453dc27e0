//! Count path instances along connector and recursive meta-paths on a tiny
//! hand-built pair, and confirm them by brute-force enumeration.

use crmp::anchor::{AnchorMap, AnchorPair};
use crmp::count::PathCounter;
use crmp::hetgraph::{NetworkBuilder, NetworkSchema};
use crmp::metapath::MetaPathCatalog;
use crmp::oracle::DfsOracle;

fn main() -> crmp::Result<()> {
    // source: u0 follows u1 and u2; target: t0 and t1 follow each other
    let mut s = NetworkBuilder::new(NetworkSchema::social());
    for i in 0..3 {
        s.add_node("user", format!("u{i}"))?;
    }
    s.add_edge("follow", 0, 1)?;
    s.add_edge("follow", 0, 2)?;
    let source = s.build();
    let mut t = NetworkBuilder::new(NetworkSchema::social());
    for i in 0..2 {
        t.add_node("user", format!("t{i}"))?;
    }
    t.add_edge("follow", 0, 1)?;
    t.add_edge("follow", 1, 0)?;
    let target = t.build();
    let pair = |source, target| AnchorPair {
        source,
        target,
        joined_target_after_source: false,
    };
    let anchors = AnchorMap::new(vec![pair(1, 0), pair(2, 1)])?;

    let counter = PathCounter::new(&source, &target, &anchors, "user")?;
    let oracle = DfsOracle::new(&source, &target, &anchors)?;
    let cat = MetaPathCatalog::heterogeneous();

    let psi1 = cat.connector(1)?;
    let rows = counter.path_count_rows(&psi1, &[0])?;
    let reached: Vec<(u32, u128)> = rows[0].nonzeros().collect();
    println!("{psi1}\n  from u0 reaches {reached:?}");

    let phi = cat.recursive(1, 1, 1)?;
    let n = counter.closed_count(&phi, 0)?;
    println!("{phi}\n  closed instances at u0: {n}");
    assert_eq!(n, oracle.closed_count(&phi, 0)?);
    assert_eq!(n, 2);
    println!("brute-force enumeration agrees");
    Ok(())
}
