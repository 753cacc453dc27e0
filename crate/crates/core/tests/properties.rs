mod common;

use std::collections::HashSet;

use proptest::prelude::*;

use common::{brute_auc, pc_matrix};
use crmp::anchor::{build_labeled_set, AnchorMap, AnchorPair, LabelOptions};
use crmp::count::PathCounter;
use crmp::eval::{auc, topk_accuracy};
use crmp::features::{build_with_catalog, FeatureSpec, Variant};
use crmp::hetgraph::{
    load_network_dir, subsample_network, write_network_dir, Direction, LoadOptions, NetworkBuilder, NetworkSchema,
    SubsamplePlan,
};
use crmp::metapath::{MetaPath, MetaPathCatalog};
use crmp::oracle::random_fixture;

fn all_users(n: usize) -> (Vec<u32>, Vec<bool>) {
    ((0..n as u32).collect(), vec![false; n])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inverse_matrix_is_transpose(
        n in 1usize..12,
        edges in prop::collection::vec((0u32..12, 0u32..12), 0..40),
    ) {
        let mut b = NetworkBuilder::new(NetworkSchema::social());
        for i in 0..n {
            b.add_node("user", format!("u{i}")).unwrap();
        }
        for &(a, c) in &edges {
            if (a as usize) < n && (c as usize) < n {
                b.add_edge("follow", a, c).unwrap();
            }
        }
        let net = b.build();
        let fwd = net.relation_matrix("follow", Direction::Forward).unwrap();
        let inv = net.relation_matrix("follow", Direction::Inverse).unwrap();
        prop_assert_eq!((fwd.nrows(), fwd.ncols()), (n, n));
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(inv.contains(j, i), fwd.contains(i, j));
                prop_assert_eq!(fwd.contains(i, j), edges.contains(&(i as u32, j as u32)));
            }
        }
    }

    #[test]
    fn subsample_is_monotone_and_drops_dangling_posts(seed in 0u64..1000, fraction in 0.0f64..=1.0) {
        let d = random_fixture(seed).unwrap();
        let net = &d.target;
        let out = subsample_network(net, &SubsamplePlan::target_newness(fraction), seed).unwrap();
        for link in ["follow", "write", "checkin_at", "written_at", "contain"] {
            let before: HashSet<_> = net.edges(link).unwrap().iter().collect();
            for e in out.edges(link).unwrap() {
                prop_assert!(before.contains(e), "{} edge {:?} not in input", link, e);
            }
        }
        for link in ["follow", "write"] {
            let m = net.edge_count(link).unwrap();
            let keep = (fraction * m as f64 - 1e-9 * m as f64).ceil().max(0.0) as usize;
            prop_assert_eq!(out.edge_count(link).unwrap(), keep.min(m));
        }
        let written: HashSet<u32> = out.edges("write").unwrap().iter().map(|e| e.1).collect();
        for link in ["checkin_at", "written_at", "contain"] {
            for &(post, _) in out.edges(link).unwrap() {
                prop_assert!(written.contains(&post), "post {} kept {} without a writer", post, link);
            }
        }
        for t in net.schema().node_types() {
            prop_assert_eq!(out.node_ids(t).unwrap(), net.node_ids(t).unwrap());
        }
        let same = subsample_network(net, &SubsamplePlan::target_newness(fraction), seed).unwrap();
        prop_assert!(same == out);
        let whole = subsample_network(net, &SubsamplePlan::target_newness(1.0), seed).unwrap();
        prop_assert!(&whole == net);
    }

    #[test]
    fn ingestion_is_idempotent(seed in 0u64..1000) {
        let d = random_fixture(seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_network_dir(&d.source, dir.path()).unwrap();
        let a = load_network_dir(dir.path(), LoadOptions::default()).unwrap();
        let b = load_network_dir(dir.path(), LoadOptions::default()).unwrap();
        prop_assert!(a == b);
        prop_assert!(a == d.source);
    }

    #[test]
    fn metapath_print_parse_round_trip(
        i in 1usize..=9, j in 1usize..=9, k in 1usize..=9, exclude in any::<bool>(), inverted in any::<bool>(),
    ) {
        let cat = MetaPathCatalog::heterogeneous().with_exclude_self(exclude);
        let mut paths = vec![cat.connector(i).unwrap(), cat.recursive(i, j, k).unwrap(), cat.source_sims()[j - 1].clone()];
        if inverted {
            paths = paths.iter().map(MetaPath::invert).collect();
        }
        for p in paths {
            let text = p.to_string();
            let back: MetaPath = text.parse().unwrap();
            prop_assert_eq!(back.to_string(), text);
            prop_assert_eq!(back, p);
        }
    }

    #[test]
    fn labelled_set_invariants(seed in 0u64..1000, gamma_a in 0.05f64..=1.0) {
        let d = random_fixture(seed).unwrap();
        let n_s = d.source.node_count("user").unwrap();
        let n_t = d.target.node_count("user").unwrap();
        let m = d.anchors.matrix(n_s, n_t).unwrap();
        let mut col = vec![0; n_t];
        for i in 0..n_s {
            prop_assert!(m.row(i).len() <= 1);
            for &j in m.row(i) {
                col[j as usize] += 1;
            }
        }
        prop_assert!(col.iter().all(|&c| c <= 1));

        let opts = LabelOptions { gamma_a, negative_cap: None };
        let Ok((set, prune)) = build_labeled_set(&d.anchors, n_s, opts, seed) else {
            // every anchor is a positive; nothing to retain
            prop_assert!(d.anchors.pairs().iter().all(|p| p.joined_target_after_source));
            return Ok(());
        };
        let positives: HashSet<u32> = set.positives.iter().copied().collect();
        let input: HashSet<AnchorPair> = d.anchors.pairs().iter().copied().collect();
        for p in set.retained.pairs() {
            prop_assert!(!positives.contains(&p.source));
            prop_assert!(input.contains(p));
            prop_assert!(!prune.target_users.contains(&p.target));
        }
        let eligible = d.anchors.pairs().iter().filter(|p| !p.joined_target_after_source).count();
        let want = ((gamma_a * eligible as f64) - 1e-9 * eligible as f64).ceil() as usize;
        prop_assert_eq!(set.retained.len(), want);
    }

    #[test]
    fn features_vanish_without_anchors_and_grow_with_them(seed in 0u64..1000, keep_mask in any::<u16>()) {
        let d = random_fixture(seed).unwrap();
        let n_s = d.source.node_count("user").unwrap();
        let (users, labels) = all_users(n_s);
        let cat = FeatureSpec::default().catalog();

        let none = AnchorMap::empty();
        let counter = PathCounter::new(&d.source, &d.target, &none, "user").unwrap();
        let zero = build_with_catalog(&counter, &users, &labels, &cat, Variant::Crmp).unwrap();
        for r in 0..zero.n_rows() {
            prop_assert!(zero.row(r).iter().all(|&v| v == 0));
        }

        let subset: Vec<AnchorPair> = d
            .anchors
            .pairs()
            .iter()
            .enumerate()
            .filter(|(i, _)| keep_mask & (1 << i) != 0)
            .map(|(_, p)| *p)
            .collect();
        let small = AnchorMap::new(subset).unwrap();
        let c_small = PathCounter::new(&d.source, &d.target, &small, "user").unwrap();
        let c_full = PathCounter::new(&d.source, &d.target, &d.anchors, "user").unwrap();
        let t_small = build_with_catalog(&c_small, &users, &labels, &cat, Variant::Crmp).unwrap();
        let t_full = build_with_catalog(&c_full, &users, &labels, &cat, Variant::Crmp).unwrap();
        for r in 0..n_s {
            for (a, b) in t_small.row(r).iter().zip(t_full.row(r)) {
                prop_assert!(a <= b);
            }
        }
    }

    #[test]
    fn feature_rows_follow_their_users(seed in 0u64..1000, perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let d = random_fixture(seed).unwrap();
        let n_s = d.source.node_count("user").unwrap();
        let (users, labels) = all_users(n_s);
        let cat = FeatureSpec::default().catalog();
        let counter = PathCounter::new(&d.source, &d.target, &d.anchors, "user").unwrap();
        let base = build_with_catalog(&counter, &users, &labels, &cat, Variant::Crmp).unwrap();
        let mut shuffled = users.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let t = build_with_catalog(&counter, &shuffled, &labels, &cat, Variant::Crmp).unwrap();
        for (r, &u) in shuffled.iter().enumerate() {
            prop_assert_eq!(t.row(r), base.row(u as usize));
            prop_assert_eq!(t.users[r], u);
        }
    }

    #[test]
    fn composition_chains_rows(seed in 0u64..1000, a in 1usize..=9, b in 1usize..=9, exclusive in any::<bool>()) {
        let d = random_fixture(seed).unwrap();
        let counter = PathCounter::new(&d.source, &d.target, &d.anchors, "user").unwrap();
        let cat = MetaPathCatalog::heterogeneous();
        let mut left = cat.source_sims()[a - 1].clone();
        if exclusive {
            left = left.exclusive().unwrap();
        }
        let right = cat.source_sims()[b - 1].compose(&cat.alpha()).unwrap();
        let whole = left.compose(&right).unwrap();
        let prepared = counter.prepare(&right).unwrap();
        let n = d.source.node_count("user").unwrap() as u32;
        let starts: Vec<u32> = (0..n).collect();
        let lrows = counter.path_count_rows(&left, &starts).unwrap();
        let wrows = counter.path_count_rows(&whole, &starts).unwrap();
        for (l, w) in lrows.into_iter().zip(&wrows) {
            prop_assert_eq!(prepared.chain(l).to_dense(), w.to_dense());
        }
    }

    #[test]
    fn empty_relation_annihilates(seed in 0u64..1000, i in 1usize..=6, j in 1usize..=9, k in 1usize..=9) {
        let d = random_fixture(seed).unwrap();
        let plan = SubsamplePlan { fraction: 0.0, links: vec!["follow".into()], cascade_links: vec![] };
        let source = subsample_network(&d.source, &plan, 0).unwrap();
        let counter = PathCounter::new(&source, &d.target, &d.anchors, "user").unwrap();
        let cat = MetaPathCatalog::heterogeneous();
        // σ1..σ6 all step along source follows
        for p in [cat.connector(i).unwrap(), cat.recursive(i, j, k).unwrap(), cat.recursive(k, j, i).unwrap()] {
            prop_assert!(pc_matrix(&counter, &p).iter().flatten().all(|&c| c == 0));
        }
    }

    #[test]
    fn auc_matches_pairwise(
        scores in prop::collection::vec(0u8..6, 2..40),
        mask in prop::collection::vec(any::<bool>(), 40),
    ) {
        let n = scores.len();
        let mut labels: Vec<bool> = mask[..n].to_vec();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = scores.iter().map(|&s| s as f64 * 0.25).collect();
        prop_assert!((auc(&scores, &labels).unwrap() - brute_auc(&scores, &labels)).abs() <= 1e-12);
    }

    #[test]
    fn topk_balanced_accuracy_is_one_minus_fp_over_k(scores in prop::collection::vec(-1e3f64..1e3, 2..20)) {
        // balanced: first half positive
        let n = scores.len() / 2 * 2;
        let scores = &scores[..n];
        let k = n / 2;
        let labels: Vec<bool> = (0..n).map(|i| i < k).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
        let fp = order[..k].iter().filter(|&&i| !labels[i]).count();
        let got = topk_accuracy(scores, &labels).unwrap();
        prop_assert!((got - (1.0 - fp as f64 / k as f64)).abs() < 1e-12);
    }
}
