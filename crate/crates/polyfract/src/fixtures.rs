//! Builtin example systems shipped with the crate.

/// A named builtin system description.
#[derive(Clone, Copy, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub summary: &'static str,
    /// Whether the description satisfies every axiom.
    pub valid: bool,
    pub text: &'static str,
}

/// Builtin fixtures in their stable listing order.
pub const FIXTURES: &[Fixture] = &[
    Fixture {
        name: "carpet",
        summary: "Sierpinski carpet, J=4, full square symmetry",
        valid: true,
        text: include_str!("../fixtures/carpet.toml"),
    },
    Fixture {
        name: "folded-square",
        summary: "filled square from four flipped quadrants, trivial group",
        valid: true,
        text: include_str!("../fixtures/folded-square.toml"),
    },
    Fixture {
        name: "folded-triangle",
        summary: "filled triangle with a half-turned central cell, J=3",
        valid: true,
        text: include_str!("../fixtures/folded-triangle.toml"),
    },
    Fixture {
        name: "hexa-d3",
        summary: "ring of six hexagons glued along odd sides, G=D_3",
        valid: true,
        text: include_str!("../fixtures/hexa-d3.toml"),
    },
    Fixture {
        name: "identity-square",
        summary: "negative: untwisted quadrants with the trivial group",
        valid: false,
        text: include_str!("../fixtures/identity-square.toml"),
    },
    Fixture {
        name: "two-corners",
        summary: "negative: two opposite corner hexagons",
        valid: false,
        text: include_str!("../fixtures/two-corners.toml"),
    },
];

pub fn fixture(name: &str) -> Option<&'static Fixture> {
    FIXTURES.iter().find(|f| f.name == name)
}

pub fn valid_fixtures() -> impl Iterator<Item = &'static Fixture> {
    FIXTURES.iter().filter(|f| f.valid)
}
