use std::collections::BTreeSet;

use polyfract::algebra::{midpoint, vertex};
use polyfract::geometry::{boundary_index_action, mod_distance, regular_polygon, DihedralElement, SymmetryGroup};
use proptest::prelude::*;

fn element(j: usize) -> impl Strategy<Value = DihedralElement> {
    (0..2 * j as i64, any::<bool>()).prop_map(move |(h, c)| DihedralElement::new(j, h, c))
}

/// Elements of `D_J` only.
fn polygon_element(j: usize) -> impl Strategy<Value = DihedralElement> {
    element(j).prop_filter("in D_J", |g| g.in_dj())
}

#[test]
fn group_orders() {
    for j in 3..=8 {
        assert_eq!(SymmetryGroup::full(j).len(), 2 * j);
        assert_eq!(SymmetryGroup::trivial(j).len(), 1);
        assert!(SymmetryGroup::trivial(j).is_trivial());
        assert!(SymmetryGroup::full(j).is_closed());
    }
    assert_eq!(SymmetryGroup::rot(6, 3).unwrap().len(), 3);
    assert_eq!(SymmetryGroup::dihedral(6, 3).unwrap().len(), 6);
    assert_eq!(SymmetryGroup::dihedral_v(6).unwrap().len(), 6);
    assert!(SymmetryGroup::rot(6, 4).is_err());
}

#[test]
fn orbits_on_sides() {
    assert_eq!(SymmetryGroup::full(4).orbits().len(), 1);
    assert_eq!(SymmetryGroup::trivial(5).orbits().len(), 5);
    // midpoint reflections keep the parity of a side index when J is even
    let d3 = SymmetryGroup::dihedral(6, 3).unwrap();
    let orbits = d3.orbits();
    assert_eq!(orbits.len(), 2);
    assert!(orbits.iter().all(|o| o.iter().all(|&i| i % 2 == o.iter().next().unwrap() % 2)));
    // the vertex-reflection version is transitive on sides
    assert_eq!(SymmetryGroup::dihedral_v(6).unwrap().orbits().len(), 1);
}

#[test]
fn modular_distance() {
    assert_eq!(mod_distance(6, 0, 5), 1);
    assert_eq!(mod_distance(6, 1, 4), 3);
    assert_eq!(mod_distance(5, 2, 2), 0);
}

#[test]
fn polygon_sides_join_consecutive_vertices() {
    for j in 3..=8 {
        let poly = regular_polygon(j).unwrap();
        assert_eq!(poly.vertices.len(), j);
        for k in 0..j {
            let (a, b) = poly.edge(k);
            assert_eq!(a, &vertex(j, (k + j - 1) % j));
            assert_eq!(b, &vertex(j, k));
        }
    }
    assert!(regular_polygon(2).is_err());
}

#[test]
fn named_reflections_fix_their_axes() {
    for j in 3..=8 {
        for i in 0..j {
            let m = DihedralElement::reflection_through_midpoint(j, i);
            assert_eq!(m.apply(&midpoint(j, i)), midpoint(j, i));
            let v = DihedralElement::reflection_through_vertex(j, i);
            assert_eq!(v.apply(&vertex(j, i)), vertex(j, i));
            let p = DihedralElement::reflection_parallel_to_edge(j, i);
            assert!(p.compose(&p).is_identity());
        }
    }
}

proptest! {
    #[test]
    fn composition_matches_application(g in element(6), h in element(6), k in 0usize..6) {
        let z = vertex(6, k);
        prop_assert_eq!(g.compose(&h).apply(&z), g.apply(&h.apply(&z)));
    }

    #[test]
    fn inverse_undoes(g in element(5)) {
        prop_assert!(g.compose(&g.inverse()).is_identity());
        prop_assert!(g.inverse().compose(&g).is_identity());
    }

    #[test]
    fn associativity(a in element(7), b in element(7), c in element(7)) {
        prop_assert_eq!(a.compose(&b).compose(&c), a.compose(&b.compose(&c)));
    }

    #[test]
    fn side_action_is_a_homomorphism(g in polygon_element(6), h in polygon_element(6), k in 0usize..6) {
        prop_assert_eq!(g.compose(&h).edge_action(k), g.edge_action(h.edge_action(k)));
        prop_assert_eq!(g.compose(&h).vertex_action(k), g.vertex_action(h.vertex_action(k)));
    }

    #[test]
    fn side_action_agrees_with_geometry(g in polygon_element(5), k in 0usize..5) {
        prop_assert_eq!(g.apply(&midpoint(5, k)), midpoint(5, g.edge_action(k)));
        prop_assert_eq!(g.apply(&vertex(5, k)), vertex(5, g.vertex_action(k)));
    }

    #[test]
    fn side_action_is_a_permutation(g in polygon_element(8)) {
        let perm = boundary_index_action(&g).unwrap();
        let image: BTreeSet<usize> = perm.iter().copied().collect();
        prop_assert_eq!(image.len(), 8);
    }
}
