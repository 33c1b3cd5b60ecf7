//! Sufficient conditions for p-conductive homogeneity and their dispatch.
//!
//! Every check is a sufficient condition only, so a negative outcome is
//! reported as inconclusive rather than as non-homogeneity.

use serde::Serialize;
use thiserror::Error;

use crate::boundary::{
    b_high, essential_boundary, f_partial_iterate, f_partial_table, in_b_low, is_transitive,
    isolated_contact_report, BoundaryError, ContactPointReport, ContactVerdict, SeedOrbit, SubsetZJ,
};
use crate::geometry::SymmetryGroup;
use crate::system::ValidatedSystem;

/// Depth used by the direct isolated-contact search during dispatch.
pub const DEFAULT_ORACLE_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConditionError {
    #[error("{theorem:?} does not apply: {hypothesis}")]
    PreconditionFailed { theorem: TheoremTag, hypothesis: String },
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    ConductivelyHomogeneous,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TheoremTag {
    #[serde(rename = "J3")]
    J3,
    #[serde(rename = "ZJ_transitive")]
    ZjTransitive,
    #[serde(rename = "essential_transitive")]
    EssentialTransitive,
    #[serde(rename = "even_J_F_partial")]
    EvenJ,
    #[serde(rename = "trivial_G_F_partial")]
    TrivialG,
    #[serde(rename = "none")]
    None,
}

impl TheoremTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremTag::J3 => "J3",
            TheoremTag::ZjTransitive => "ZJ_transitive",
            TheoremTag::EssentialTransitive => "essential_transitive",
            TheoremTag::EvenJ => "even_J_F_partial",
            TheoremTag::TrivialG => "trivial_G_F_partial",
            TheoremTag::None => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prerequisite {
    pub name: String,
    pub passed: bool,
}

fn prereq(name: impl Into<String>, passed: bool) -> Prerequisite {
    Prerequisite { name: name.into(), passed }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckDetails {
    None,
    Transitivity {
        set: SubsetZJ,
        orbits: Vec<Vec<usize>>,
        /// For `Z_J`: whether the group is one of the three transitive families.
        #[serde(skip_serializing_if = "Option::is_none")]
        classification_agrees: Option<bool>,
    },
    EvenJ {
        f_z0: Vec<SubsetZJ>,
        f_z1: Vec<SubsetZJ>,
        z0_in_f_z0: bool,
        z1_in_f_z1: bool,
        mixed: bool,
        mixed_clause_checked: bool,
    },
    TrivialG {
        orbits: Vec<SeedOrbit>,
        f1: bool,
        f2: bool,
        f3: bool,
        conditions_agree: bool,
        /// `∅ ∈ F^n(X)` forces `F^n(X) ⊆ {∅} ∪ B^L` on every computed iterate.
        empty_implies_low: bool,
        /// `F(1, X) ⊆ B^L` for every `X ∈ B^L`.
        low_is_invariant: bool,
    },
}

/// Outcome of one sufficient condition.
#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub theorem: TheoremTag,
    pub applies: bool,
    pub prerequisites: Vec<Prerequisite>,
    pub details: CheckDetails,
}

impl CheckResult {
    fn not_applicable(theorem: TheoremTag, err: ConditionError) -> Self {
        let name = match err {
            ConditionError::PreconditionFailed { hypothesis, .. } => hypothesis,
            other => other.to_string(),
        };
        CheckResult { theorem, applies: false, prerequisites: vec![prereq(name, false)], details: CheckDetails::None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub theorem: TheoremTag,
    /// Hypotheses of the winning theorem, or empty when inconclusive.
    pub prerequisites: Vec<Prerequisite>,
    pub checks: Vec<CheckResult>,
    pub essential_boundary: SubsetZJ,
    pub contact: ContactPointReport,
    /// Neighbourhood radius used by downstream energy runs.
    pub m_j: usize,
}

/// `J - 2` for even `J`, `2J - 2` for odd `J`.
pub fn m_j(j: usize) -> usize {
    if j.is_multiple_of(2) {
        j - 2
    } else {
        2 * j - 2
    }
}

fn orbits_of(group: &SymmetryGroup) -> Vec<Vec<usize>> {
    group.orbits().into_iter().map(|o| o.into_iter().collect()).collect()
}

pub fn check_j3(sys: &ValidatedSystem) -> CheckResult {
    let applies = sys.j == 3;
    CheckResult {
        theorem: TheoremTag::J3,
        applies,
        prerequisites: vec![prereq("J = 3", applies)],
        details: CheckDetails::None,
    }
}

/// The groups acting transitively on `Z_J` are exactly `D_J`, `Rot_J` and,
/// for even `J`, the vertex-reflection dihedral group of order `J`.
fn transitive_classification(group: &SymmetryGroup) -> bool {
    let j = group.j;
    let candidates = [
        Some(SymmetryGroup::full(j)),
        SymmetryGroup::rot(j, j).ok(),
        if j.is_multiple_of(2) { SymmetryGroup::dihedral_v(j).ok() } else { None },
    ];
    candidates.iter().flatten().any(|g| g.elements == group.elements)
}

pub fn check_zj_transitive(sys: &ValidatedSystem) -> CheckResult {
    let full = SubsetZJ::full(sys.j);
    let transitive = is_transitive(&full, &sys.group);
    let classified = transitive_classification(&sys.group);
    CheckResult {
        theorem: TheoremTag::ZjTransitive,
        applies: transitive,
        prerequisites: vec![prereq("Z_J is G-transitive", transitive)],
        details: CheckDetails::Transitivity {
            set: full,
            orbits: orbits_of(&sys.group),
            classification_agrees: Some(classified == transitive),
        },
    }
}

fn contact_none(contact: &ContactPointReport) -> bool {
    contact.verdict == ContactVerdict::NoneExist
}

pub fn check_essential_transitive(sys: &ValidatedSystem, contact: &ContactPointReport) -> CheckResult {
    let e = essential_boundary(sys);
    let transitive = is_transitive(&e, &sys.group);
    let none = contact_none(contact);
    CheckResult {
        theorem: TheoremTag::EssentialTransitive,
        applies: transitive && none,
        prerequisites: vec![
            prereq("no isolated contact points", none),
            prereq("essential boundary is G-transitive", transitive),
        ],
        details: CheckDetails::Transitivity { set: e, orbits: orbits_of(&sys.group), classification_agrees: None },
    }
}

pub fn check_even_j(sys: &ValidatedSystem, contact: &ContactPointReport) -> Result<CheckResult, ConditionError> {
    let j = sys.j;
    let fail = |h: &str| ConditionError::PreconditionFailed { theorem: TheoremTag::EvenJ, hypothesis: h.into() };
    if !j.is_multiple_of(2) || j < 6 {
        return Err(fail("J = 2q with q >= 3"));
    }
    let q = j / 2;
    let is = |g: Result<SymmetryGroup, _>| g.map(|g| g.elements == sys.group.elements).unwrap_or(false);
    if !(is(SymmetryGroup::dihedral(j, q)) || is(SymmetryGroup::rot(j, q))) {
        return Err(fail("G is the dihedral or rotation group of order q"));
    }
    if !contact_none(contact) {
        return Err(fail("no isolated contact points"));
    }
    let graph = crate::wordtree::level_one(sys);
    let table = crate::boundary::TraceTable::level_one(sys);
    let z0 = SubsetZJ::parity(j, 0);
    let z1 = SubsetZJ::parity(j, 1);
    let f_z0 = crate::boundary::f_partial_on(&graph, &table, &z0, &sys.group);
    let f_z1 = crate::boundary::f_partial_on(&graph, &table, &z1, &sys.group);
    let z0_in_f_z0 = f_z0.contains(&z0);
    let z1_in_f_z1 = f_z1.contains(&z1);
    let mixed = f_z0.contains(&z1) && f_z1.contains(&z0);
    let mixed_clause_checked = !(j == 6 || j == 8);
    let obstructed = z0_in_f_z0 || z1_in_f_z1 || (mixed_clause_checked && mixed);
    Ok(CheckResult {
        theorem: TheoremTag::EvenJ,
        applies: !obstructed,
        prerequisites: vec![
            prereq("J = 2q with q >= 3", true),
            prereq("G is the dihedral or rotation group of order q", true),
            prereq("no isolated contact points", true),
            prereq("no parity class is a fixed point of F_∂", !(z0_in_f_z0 || z1_in_f_z1)),
            prereq("parity classes are not exchanged by F_∂", !(mixed_clause_checked && mixed)),
        ],
        details: CheckDetails::EvenJ {
            f_z0: f_z0.into_iter().collect(),
            f_z1: f_z1.into_iter().collect(),
            z0_in_f_z0,
            z1_in_f_z1,
            mixed,
            mixed_clause_checked,
        },
    })
}

pub fn check_trivial_g(sys: &ValidatedSystem, contact: &ContactPointReport) -> Result<CheckResult, ConditionError> {
    let fail = |h: &str| ConditionError::PreconditionFailed { theorem: TheoremTag::TrivialG, hypothesis: h.into() };
    if !sys.group.is_trivial() {
        return Err(fail("G is trivial"));
    }
    if !contact_none(contact) {
        return Err(fail("no isolated contact points"));
    }
    let seeds = b_high(sys.j);
    let orbits = f_partial_iterate(sys, &seeds)?;
    let f1 = orbits.iter().all(|o| o.f1);
    let f2 = orbits.iter().all(|o| o.f2);
    let f3 = orbits.iter().all(|o| o.f3);
    let conditions_agree = f1 == f2 && f2 == f3;
    let empty_implies_low = orbits.iter().all(|o| o.empty_implies_low);
    let table = f_partial_table(sys);
    let low_is_invariant = SubsetZJ::all(sys.j)
        .filter(in_b_low)
        .all(|x| table[x.bits as usize].iter().all(in_b_low));
    Ok(CheckResult {
        theorem: TheoremTag::TrivialG,
        applies: f3,
        prerequisites: vec![
            prereq("G is trivial", true),
            prereq("no isolated contact points", true),
            prereq("every high seed is eventually absorbed into {∅} ∪ B^L", f3),
        ],
        details: CheckDetails::TrivialG { orbits, f1, f2, f3, conditions_agree, empty_implies_low, low_is_invariant },
    })
}

/// Run every check in priority order; the first applicable one decides.
pub fn theorem_dispatch(sys: &ValidatedSystem) -> Result<Verdict, ConditionError> {
    theorem_dispatch_with_depth(sys, DEFAULT_ORACLE_DEPTH)
}

pub fn theorem_dispatch_with_depth(sys: &ValidatedSystem, oracle_depth: usize) -> Result<Verdict, ConditionError> {
    let contact = isolated_contact_report(sys, oracle_depth)?;
    let checks = vec![
        check_j3(sys),
        check_zj_transitive(sys),
        check_essential_transitive(sys, &contact),
        check_even_j(sys, &contact).unwrap_or_else(|e| CheckResult::not_applicable(TheoremTag::EvenJ, e)),
        check_trivial_g(sys, &contact).unwrap_or_else(|e| CheckResult::not_applicable(TheoremTag::TrivialG, e)),
    ];
    let winner = checks.iter().find(|c| c.applies);
    let (status, theorem, prerequisites) = match winner {
        Some(c) => (Status::ConductivelyHomogeneous, c.theorem, c.prerequisites.clone()),
        None => (Status::Inconclusive, TheoremTag::None, Vec::new()),
    };
    Ok(Verdict {
        status,
        theorem,
        prerequisites,
        checks,
        essential_boundary: essential_boundary(sys),
        contact,
        m_j: m_j(sys.j),
    })
}
