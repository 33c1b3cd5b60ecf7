use polyfract::conditions::{
    check_j3, check_trivial_g, check_zj_transitive, m_j, theorem_dispatch, CheckDetails, Status, TheoremTag,
};
use polyfract::boundary::isolated_contact_report;
use polyfract::fixtures::fixture;
use polyfract::system::{load_validated, ValidatedSystem};

fn sys(name: &str) -> ValidatedSystem {
    load_validated(fixture(name).unwrap().text).unwrap()
}

#[test]
fn neighbourhood_radius() {
    assert_eq!([3, 4, 5, 6, 7, 8].map(m_j), [4, 2, 8, 4, 12, 6]);
}

#[test]
fn tags_serialise_to_stable_names() {
    let cases = [
        (TheoremTag::J3, "J3"),
        (TheoremTag::ZjTransitive, "ZJ_transitive"),
        (TheoremTag::EssentialTransitive, "essential_transitive"),
        (TheoremTag::EvenJ, "even_J_F_partial"),
        (TheoremTag::TrivialG, "trivial_G_F_partial"),
        (TheoremTag::None, "none"),
    ];
    for (tag, name) in cases {
        assert_eq!(tag.as_str(), name);
        assert_eq!(serde_json::to_string(&tag).unwrap(), format!("\"{name}\""));
    }
    assert_eq!(serde_json::to_string(&Status::Inconclusive).unwrap(), "\"inconclusive\"");
}

#[test]
fn builtin_verdicts() {
    let expected = [
        ("carpet", TheoremTag::ZjTransitive),
        ("folded-triangle", TheoremTag::J3),
        ("hexa-d3", TheoremTag::EssentialTransitive),
        ("folded-square", TheoremTag::None),
    ];
    for (name, tag) in expected {
        let v = theorem_dispatch(&sys(name)).unwrap();
        assert_eq!(v.theorem, tag, "{name}");
        let homogeneous = tag != TheoremTag::None;
        assert_eq!(v.status == Status::ConductivelyHomogeneous, homogeneous, "{name}");
        assert_eq!(v.prerequisites.is_empty(), !homogeneous, "{name}");
        assert!(v.prerequisites.iter().all(|p| p.passed), "{name}");
        assert_eq!(v.m_j, m_j(v.essential_boundary.j), "{name}");
        assert_eq!(v.checks.len(), 5);
    }
}

#[test]
fn earlier_checks_win() {
    // the triangle also has a trivial group, but J = 3 is checked first
    let v = theorem_dispatch(&sys("folded-triangle")).unwrap();
    assert_eq!(v.checks[0].theorem, TheoremTag::J3);
    assert!(v.checks[0].applies);
    assert!(check_j3(&sys("folded-triangle")).applies);
    assert!(!check_j3(&sys("carpet")).applies);
    assert!(check_zj_transitive(&sys("carpet")).applies);
    assert!(!check_zj_transitive(&sys("hexa-d3")).applies);
}

#[test]
fn folded_square_fails_every_trivial_group_condition() {
    let s = sys("folded-square");
    let contact = isolated_contact_report(&s, 3).unwrap();
    let check = check_trivial_g(&s, &contact).unwrap();
    assert!(!check.applies);
    match check.details {
        CheckDetails::TrivialG { f1, f2, f3, conditions_agree, .. } => {
            assert!(!f1 && !f2 && !f3);
            assert!(conditions_agree);
        }
        other => panic!("unexpected details {other:?}"),
    }
}

#[test]
fn trivial_group_check_needs_a_trivial_group() {
    let s = sys("carpet");
    let contact = isolated_contact_report(&s, 2).unwrap();
    assert!(check_trivial_g(&s, &contact).is_err());
}

#[test]
fn verdict_serialises() {
    let v = theorem_dispatch(&sys("carpet")).unwrap();
    let json: serde_json::Value = serde_json::to_value(&v).unwrap();
    assert_eq!(json["status"], "conductively_homogeneous");
    assert_eq!(json["theorem"], "ZJ_transitive");
    assert_eq!(json["m_j"], 2);
}
