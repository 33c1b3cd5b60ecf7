use polyfract::fixtures::{fixture, valid_fixtures};
use polyfract::system::{load_validated, ValidatedSystem};
use polyfract::algebra::{vertex, CycloNumber};
use polyfract::wordtree::{
    build_levels, contact_clusters, gamma_ball, geometric_adjacency_oracle, index_of, level_stats, point_in_k,
    prefix_index, suffix_index, word_of, EdgeKind, Membership, OracleOptions, UnionFind,
};
use proptest::prelude::*;

fn sys(name: &str) -> ValidatedSystem {
    load_validated(fixture(name).unwrap().text).unwrap()
}

#[test]
fn recursion_matches_oracle_up_to_level_three() {
    for fx in valid_fixtures() {
        let s = load_validated(fx.text).unwrap();
        let levels = build_levels(&s, 3).unwrap();
        for (k, g) in levels.iter().enumerate() {
            let oracle = geometric_adjacency_oracle(&s, k + 1, OracleOptions::default()).unwrap();
            assert_eq!(g.node_count, oracle.node_count, "{} level {}", fx.name, k + 1);
            assert_eq!(g.ell_edges, oracle.ell_edges, "{} level {} ell", fx.name, k + 1);
            assert_eq!(g.point_edges, oracle.point_edges, "{} level {} point", fx.name, k + 1);
        }
    }
}

#[test]
fn carpet_level_two_counts() {
    let s = sys("carpet");
    let g = &build_levels(&s, 2).unwrap()[1];
    let st = level_stats(g, s.j);
    assert_eq!(st.node_count, 64);
    assert!(st.max_point_multiplicity <= 6);
}

#[test]
fn folded_square_level_three_is_a_grid_with_diagonals() {
    let s = sys("folded-square");
    let g = &build_levels(&s, 3).unwrap()[2];
    assert_eq!(level_stats(g, s.j).max_degree, 8);
}

#[test]
fn star_graph_contains_edge_graph() {
    for fx in valid_fixtures() {
        let s = load_validated(fx.text).unwrap();
        for g in build_levels(&s, 2).unwrap() {
            for e in &g.ell_edges {
                assert!(g.is_adjacent(e.a, e.b, EdgeKind::Star));
                assert!(g.is_adjacent(e.b, e.a, EdgeKind::Ell));
                assert_eq!(g.ell_edge(e.a, e.b), Some(e));
            }
            let st = level_stats(&g, s.j);
            assert!(st.star_count >= st.ell_count);
        }
    }
}

#[test]
fn contact_clusters_are_small() {
    for fx in valid_fixtures() {
        let s = load_validated(fx.text).unwrap();
        for g in build_levels(&s, 3).unwrap() {
            for c in contact_clusters(&g, s.j) {
                assert!(c.cells().len() <= 6, "{} level {}", fx.name, g.level);
            }
        }
    }
}

#[test]
fn outer_vertices_of_the_carpet_lie_in_k() {
    let s = sys("carpet");
    for k in 0..4 {
        assert_eq!(point_in_k(&s, &vertex(4, k), 4096), Membership::In);
    }
    // the centre of the removed middle square is not in the carpet
    assert_eq!(point_in_k(&s, &CycloNumber::zero(8), 4096), Membership::Out);
}

#[test]
fn union_find_groups_partition() {
    let mut uf = UnionFind::new(6);
    uf.union(0, 3);
    uf.union(3, 5);
    uf.union(1, 2);
    let groups = uf.groups();
    assert_eq!(groups, vec![vec![0, 3, 5], vec![1, 2], vec![4]]);
}

proptest! {
    #[test]
    fn word_index_round_trip(level in 1usize..6, alphabet in 2usize..9, seed in any::<u64>()) {
        let total = alphabet.pow(level as u32);
        let idx = (seed % total as u64) as usize;
        let w = word_of(idx, level, alphabet);
        prop_assert_eq!(w.len(), level);
        prop_assert_eq!(index_of(&w, alphabet), idx);
        for k in 0..=level {
            let head = prefix_index(idx, level, k, alphabet);
            let tail = suffix_index(idx, level, k, alphabet);
            prop_assert_eq!(index_of(&w[..k], alphabet), head);
            prop_assert_eq!(head * alphabet.pow((level - k) as u32) + tail, idx);
        }
    }

    #[test]
    fn gamma_balls_are_symmetric_and_nested(w in 0usize..64, v in 0usize..64, m in 0usize..3) {
        let s = sys("carpet");
        let g = &build_levels(&s, 2).unwrap()[1];
        let bw = gamma_ball(g, w, m, EdgeKind::Star).unwrap();
        let bv = gamma_ball(g, v, m, EdgeKind::Star).unwrap();
        prop_assert_eq!(bw.contains(&v), bv.contains(&w));
        let bigger = gamma_ball(g, w, m + 1, EdgeKind::Star).unwrap();
        prop_assert!(bw.iter().all(|x| bigger.contains(x)));
        prop_assert!(bw.contains(&w));
    }
}
