use polyfract::fixtures::{fixture, valid_fixtures, FIXTURES};
use polyfract::geometry::DihedralElement;
use polyfract::system::{
    axiom_report, candidate_maximal_symmetry, detect_trivial_symmetry, group_action_on_words, load_system,
    load_validated, validate, write_system, SystemError, ValidationError, VertexPosition,
};

fn text(name: &str) -> &'static str {
    fixture(name).unwrap().text
}

#[test]
fn builtins_validate_as_labelled() {
    for fx in FIXTURES {
        let desc = load_system(fx.text).unwrap();
        let report = axiom_report(&desc).unwrap();
        assert_eq!(report.all_passed(), fx.valid, "{}", fx.name);
        match validate(&desc) {
            Ok(_) => assert!(fx.valid),
            Err(ValidationError::Axioms(r)) => {
                assert!(!fx.valid);
                assert_eq!(*r, report);
            }
            Err(e) => panic!("{}: {e}", fx.name),
        }
    }
}

#[test]
fn fixture_parameters() {
    let expected = [("carpet", 4, 8, 8), ("folded-square", 4, 4, 1), ("folded-triangle", 3, 4, 1), ("hexa-d3", 6, 6, 6)];
    for (name, j, cells, group) in expected {
        let s = load_validated(text(name)).unwrap();
        assert_eq!((s.j, s.cell_count(), s.group.len()), (j, cells, group), "{name}");
    }
}

#[test]
fn description_round_trips_through_toml() {
    for fx in FIXTURES {
        let desc = load_system(fx.text).unwrap();
        let again = load_system(&write_system(&desc)).unwrap();
        assert_eq!(desc, again, "{}", fx.name);
    }
}

#[test]
fn syntax_errors_carry_offsets() {
    let bad = text("folded-square").replace("r = \"1/2\"", "r = \"1/2 *\"");
    let bad = bad.as_str();
    match load_system(bad) {
        Err(SystemError::SyntaxError { offset, .. }) => assert!(offset >= bad.find("1/2").unwrap()),
        Err(SystemError::Expression { .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(load_system("J = "), Err(SystemError::SyntaxError { .. })));
}

#[test]
fn structural_errors() {
    let base = text("folded-square");
    let unknown = base.replace("kind = \"trivial\"", "kind = \"wallpaper\"");
    assert!(matches!(load_system(&unknown), Err(SystemError::UnknownGroupKind(_))));
    let dup = base.replace("id = \"se\"", "id = \"sw\"");
    assert!(matches!(load_system(&dup), Err(SystemError::DuplicateCellId(_))));
    let ratio = base.replace("r = \"1/2\"", "r = \"3/2\"");
    let err = load_system(&ratio).and_then(|d| validate(&d).map(|_| ()).map_err(|e| match e {
        ValidationError::Invalid(e) => e,
        other => panic!("unexpected {other}"),
    }));
    assert!(matches!(err, Err(SystemError::BadRatio)), "{err:?}");
}

#[test]
fn identity_acts_trivially_on_words() {
    for fx in valid_fixtures() {
        let s = load_validated(fx.text).unwrap();
        let id = DihedralElement::identity(s.j);
        for w in [vec![0], vec![0, 1], vec![s.cell_count() - 1, 0, 1]] {
            assert_eq!(group_action_on_words(&s, &id, &w).unwrap(), w);
        }
    }
}

#[test]
fn carpet_rotation_permutes_corners() {
    let s = load_validated(text("carpet")).unwrap();
    let quarter = DihedralElement::rotation(4, 1);
    let corners = [0, 2, 5, 7];
    for c in corners {
        let img = group_action_on_words(&s, &quarter, &[c]).unwrap();
        assert!(corners.contains(&img[0]), "{c} -> {img:?}");
    }
    // four quarter turns return every word
    let w = vec![1, 6, 3];
    let mut x = w.clone();
    for _ in 0..4 {
        x = group_action_on_words(&s, &quarter, &x).unwrap();
    }
    assert_eq!(x, w);
}

#[test]
fn vertex_positions_of_carpet() {
    let s = load_validated(text("carpet")).unwrap();
    // the south-west cell sits on exactly one outer corner
    let corners = s.vertex_positions[0].iter().filter(|p| matches!(p, VertexPosition::Corner(_))).count();
    assert_eq!(corners, 1);
    // the south middle cell has no outer corner
    assert!(!s.vertex_positions[1].iter().any(|p| matches!(p, VertexPosition::Corner(_))));
    assert!(s.vertex_in_k.iter().all(|&b| b));
}

#[test]
fn folded_square_is_foldable() {
    let s = load_validated(text("folded-square")).unwrap();
    assert!(detect_trivial_symmetry(&s).foldable);
    let carpet = load_validated(text("carpet")).unwrap();
    assert!(!detect_trivial_symmetry(&carpet).foldable);
}

#[test]
fn maximal_symmetry_contains_the_declared_group() {
    for fx in valid_fixtures() {
        let s = load_validated(fx.text).unwrap();
        let max = candidate_maximal_symmetry(&s, 2);
        for g in &s.group.elements {
            assert!(max.elements.contains(g), "{}: {g}", fx.name);
        }
    }
    let carpet = load_validated(text("carpet")).unwrap();
    assert_eq!(candidate_maximal_symmetry(&carpet, 2).elements.len(), 8);
}
