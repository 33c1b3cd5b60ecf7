//! System descriptions, axiom validation and the cached level-one tables that
//! every later stage consumes.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

use crate::algebra::{field_order, parse_expr, AlgebraError, CycloNumber, EvalContext, PointExpr};
use crate::geometry::{
    classify_contact, contained_in_polygon, on_edge_line, regular_polygon, ContactClass, Contraction,
    DihedralElement, GeometryError, GroupKind, Polygon, SymmetryGroup,
};
use crate::wordtree::{EllEdge, PointEdge, UnionFind};

pub const FORMAT_TAG: &str = "polyfract/v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("syntax error at byte {offset}: {message}")]
    SyntaxError { offset: usize, message: String },
    #[error("unknown group kind `{0}`")]
    UnknownGroupKind(String),
    #[error("duplicate cell id `{0}`")]
    DuplicateCellId(String),
    #[error("the cell list is empty")]
    EmptyCells,
    #[error("unsupported format tag `{0}`")]
    BadFormat(String),
    #[error("group kind `{kind}` needs the `{field}` field")]
    MissingGroupField { kind: String, field: String },
    #[error("in {context}: {source}")]
    Expression { context: String, source: AlgebraError },
    #[error("contraction ratio must be real with 0 < r < 1")]
    BadRatio,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawElement {
    half_turns: i64,
    conj: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroup {
    kind: Spanned<String>,
    k: Option<usize>,
    elements: Option<Vec<RawElement>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCell {
    id: Spanned<String>,
    phi: RawElement,
    center: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    format: Spanned<String>,
    #[serde(rename = "J")]
    j: usize,
    r: Spanned<String>,
    group: RawGroup,
    #[serde(default)]
    cells: Vec<RawCell>,
}

/// Group section of a description, before closure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GroupSpec {
    pub kind: GroupKind,
    pub elements: Vec<(i64, bool)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSpec {
    pub id: String,
    pub phi: (i64, bool),
    pub center: String,
    #[serde(skip)]
    pub center_expr: PointExpr,
}

/// A parsed but unvalidated system description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemDescription {
    pub j: usize,
    pub r: String,
    #[serde(skip)]
    pub r_expr: PointExpr,
    pub group: GroupSpec,
    pub cells: Vec<CellSpec>,
}

fn expr_at(text: &Spanned<String>) -> Result<PointExpr, SystemError> {
    parse_expr(text.get_ref()).map_err(|e| match e {
        // +1 skips the opening quote of the TOML string
        AlgebraError::SyntaxError { offset, message } => {
            SystemError::SyntaxError { offset: text.span().start + 1 + offset, message }
        }
        other => SystemError::Expression { context: format!("expression `{}`", text.get_ref()), source: other },
    })
}

/// Parse the TOML description format.
pub fn load_system(text: &str) -> Result<SystemDescription, SystemError> {
    let raw: RawSystem = toml::from_str(text).map_err(|e| SystemError::SyntaxError {
        offset: e.span().map(|s| s.start).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    if raw.format.get_ref() != FORMAT_TAG {
        return Err(SystemError::BadFormat(raw.format.get_ref().clone()));
    }
    let kind_name = raw.group.kind.get_ref().as_str();
    let need_k = |k: Option<usize>| {
        k.ok_or_else(|| SystemError::MissingGroupField { kind: kind_name.to_string(), field: "k".into() })
    };
    let kind = match kind_name {
        "trivial" => GroupKind::Trivial,
        "rot" => GroupKind::Rot { k: need_k(raw.group.k)? },
        "dihedral" => GroupKind::Dihedral { k: need_k(raw.group.k)? },
        "dihedral_v" => GroupKind::DihedralV,
        "explicit" => GroupKind::Explicit,
        other => return Err(SystemError::UnknownGroupKind(other.to_string())),
    };
    let elements: Vec<(i64, bool)> = match (&kind, raw.group.elements) {
        (GroupKind::Explicit, Some(list)) => list.into_iter().map(|e| (e.half_turns, e.conj)).collect(),
        (GroupKind::Explicit, None) => {
            return Err(SystemError::MissingGroupField { kind: "explicit".into(), field: "elements".into() })
        }
        (_, _) => Vec::new(),
    };
    if raw.cells.is_empty() {
        return Err(SystemError::EmptyCells);
    }
    let r_expr = expr_at(&raw.r)?;
    let mut seen = BTreeSet::new();
    let mut cells = Vec::with_capacity(raw.cells.len());
    for c in raw.cells {
        if !seen.insert(c.id.get_ref().clone()) {
            return Err(SystemError::DuplicateCellId(c.id.get_ref().clone()));
        }
        let center_expr = expr_at(&c.center)?;
        cells.push(CellSpec {
            id: c.id.into_inner(),
            phi: (c.phi.half_turns, c.phi.conj),
            center: c.center.into_inner(),
            center_expr,
        });
    }
    Ok(SystemDescription { j: raw.j, r: raw.r.into_inner(), r_expr, group: GroupSpec { kind, elements }, cells })
}

/// Serialize a description back to the TOML format.
pub fn write_system(desc: &SystemDescription) -> String {
    let mut out = String::new();
    out.push_str(&format!("format = \"{FORMAT_TAG}\"\nJ = {}\nr = \"{}\"\n\n[group]\n", desc.j, desc.r));
    match &desc.group.kind {
        GroupKind::Trivial => out.push_str("kind = \"trivial\"\n"),
        GroupKind::Rot { k } => out.push_str(&format!("kind = \"rot\"\nk = {k}\n")),
        GroupKind::Dihedral { k } => out.push_str(&format!("kind = \"dihedral\"\nk = {k}\n")),
        GroupKind::DihedralV => out.push_str("kind = \"dihedral_v\"\n"),
        GroupKind::Explicit => {
            out.push_str("kind = \"explicit\"\nelements = [\n");
            for (h, c) in &desc.group.elements {
                out.push_str(&format!("  {{ half_turns = {h}, conj = {c} }},\n"));
            }
            out.push_str("]\n");
        }
    }
    for c in &desc.cells {
        out.push_str(&format!(
            "\n[[cells]]\nid = \"{}\"\nphi = {{ half_turns = {}, conj = {} }}\ncenter = \"{}\"\n",
            c.id, c.phi.0, c.phi.1, c.center
        ));
    }
    out
}

/// One axiom's verdict with its witnesses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AxiomVerdict {
    pub passed: bool,
    pub witnesses: Vec<Witness>,
}

impl AxiomVerdict {
    fn from(witnesses: Vec<Witness>) -> Self {
        AxiomVerdict { passed: witnesses.is_empty(), witnesses }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    PhiNotAllowed { cell: String, half_turns: usize, conj: bool },
    NotContained { cell: String },
    UncoveredSide { index: usize },
    NoImageCell { group_element: DihedralElement, cell: String },
    TwistOutsideGroup { group_element: DihedralElement, cell: String, image: String, twist: DihedralElement },
    OverlappingCells { first: String, second: String },
    LabelOutsideGroup { first: String, second: String, i: usize, j: usize, label: DihedralElement },
    Disconnected { components: Vec<Vec<String>> },
}

/// Per-axiom verdicts for (A1)–(A5).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AxiomReport {
    pub a1: AxiomVerdict,
    pub a2: AxiomVerdict,
    pub a3: AxiomVerdict,
    pub a4: AxiomVerdict,
    pub a5: AxiomVerdict,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.verdicts().iter().all(|(_, v)| v.passed)
    }

    pub fn verdicts(&self) -> [(&'static str, &AxiomVerdict); 5] {
        [("A1", &self.a1), ("A2", &self.a2), ("A3", &self.a3), ("A4", &self.a4), ("A5", &self.a5)]
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.verdicts().iter().filter(|(_, v)| !v.passed).map(|(n, _)| *n).collect()
    }
}

#[derive(Debug, Clone, Error)]
pub enum ValidationError {
    #[error("axioms failed: {}", .0.failed().join(", "))]
    Axioms(Box<AxiomReport>),
    #[error(transparent)]
    Invalid(#[from] SystemError),
}

/// Position of a cell vertex relative to `∂Q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VertexPosition {
    /// Coincides with the outer vertex `p_a`.
    Corner(usize),
    /// Lies in the relative interior of the outer side `b_i`.
    Side(usize),
    Inside,
}

/// How a cell meets the line of an outer side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SideTrace {
    Edge(usize),
    Vertex(usize),
}

/// A pair of cells whose traces on one outer side intersect.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SideContact {
    /// Same cell meeting the side in its edge `k`.
    Edge(usize),
    /// Vertex `k` of the first cell coincides with vertex `k2` of the second.
    Point(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SidePair {
    pub first: usize,
    pub second: usize,
    pub contact: SideContact,
}

/// Action of one group element on the alphabet: `g(Q_s) = Q_{perm[s]}` and
/// `g ∘ f_s = f_{perm[s]} ∘ twist[s]`.
#[derive(Clone, Debug)]
pub struct CellAction {
    pub element: DihedralElement,
    pub perm: Vec<usize>,
    pub twist: Vec<DihedralElement>,
}

/// A system that satisfies (A1)–(A5), with cached level-one data.
#[derive(Clone, Debug)]
pub struct ValidatedSystem {
    pub description: SystemDescription,
    pub j: usize,
    pub polygon: Polygon,
    pub ratio: CycloNumber,
    pub ratio_f64: f64,
    pub maps: Vec<Contraction>,
    pub group: SymmetryGroup,
    pub contacts: Vec<Vec<ContactClass>>,
    pub ell_edges: Vec<EllEdge>,
    pub point_edges: Vec<PointEdge>,
    pub actions: Vec<CellAction>,
    /// `xi[s][k] = Some(i)` when `f_s(b_k) ⊆ b_i`.
    pub xi: Vec<Vec<Option<usize>>>,
    pub vertex_positions: Vec<Vec<VertexPosition>>,
    /// For each outer vertex `p_a`, the `(cell, vertex)` pairs with `f_s(p_c) = p_a`.
    pub corner_cells: Vec<Vec<(usize, usize)>>,
    pub side_traces: Vec<Vec<(usize, SideTrace)>>,
    pub side_pairs: Vec<Vec<SidePair>>,
    pub vertex_in_k: Vec<bool>,
    pub report: AxiomReport,
}

impl ValidatedSystem {
    pub fn cell_count(&self) -> usize {
        self.maps.len()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.description.cells.iter().map(|c| c.id.as_str()).collect()
    }

    pub fn action(&self, g: &DihedralElement) -> Option<&CellAction> {
        self.group.elements.binary_search(g).ok().map(|k| &self.actions[k])
    }

    pub fn identity_action(&self) -> &CellAction {
        self.action(&DihedralElement::identity(self.j)).expect("identity is in every group")
    }

    /// `f_s`.
    pub fn map(&self, s: usize) -> &Contraction {
        &self.maps[s]
    }

    /// Composite map `f_w = f_{w_1} ∘ ⋯ ∘ f_{w_m}`.
    pub fn word_map(&self, word: &[usize]) -> Contraction {
        word.iter().fold(Contraction::identity(self.j), |acc, &s| acc.compose(&self.maps[s]))
    }
}

struct Built {
    ratio: CycloNumber,
    maps: Vec<Contraction>,
    group: SymmetryGroup,
    polygon: Polygon,
}

fn build_maps(desc: &SystemDescription) -> Result<Built, SystemError> {
    let j = desc.j;
    let polygon = regular_polygon(j)?;
    let order = field_order(j);
    let ratio = desc
        .r_expr
        .eval(&EvalContext { j, ratio: None })
        .map_err(|e| SystemError::Expression { context: "r".into(), source: e })?;
    if !ratio.is_real() {
        return Err(SystemError::BadRatio);
    }
    let one = CycloNumber::one(order);
    if ratio.real_sign().map_err(|_| SystemError::BadRatio)? <= 0 || one.sub(&ratio).real_sign().unwrap_or(0) <= 0 {
        return Err(SystemError::BadRatio);
    }
    let ctx = EvalContext { j, ratio: Some(ratio.clone()) };
    let mut maps = Vec::with_capacity(desc.cells.len());
    for c in &desc.cells {
        let center = c
            .center_expr
            .eval(&ctx)
            .map_err(|e| SystemError::Expression { context: format!("center of cell `{}`", c.id), source: e })?;
        maps.push(Contraction { ratio: ratio.clone(), phi: DihedralElement::new(j, c.phi.0, c.phi.1), center });
    }
    let group = match &desc.group.kind {
        GroupKind::Trivial => SymmetryGroup::trivial(j),
        GroupKind::Rot { k } => SymmetryGroup::rot(j, *k)?,
        GroupKind::Dihedral { k } => SymmetryGroup::dihedral(j, *k)?,
        GroupKind::DihedralV => SymmetryGroup::dihedral_v(j)?,
        GroupKind::Explicit => {
            let gens: Vec<DihedralElement> =
                desc.group.elements.iter().map(|&(h, c)| DihedralElement::new(j, h, c)).collect();
            SymmetryGroup::explicit(j, &gens)?
        }
    };
    Ok(Built { ratio, maps, group, polygon })
}

/// Parameter of a point along `b_i`, measured from `p_{i-1}`.
fn side_param(poly: &Polygon, i: usize, z: &CycloNumber) -> CycloNumber {
    let (start, end) = poly.edge(i);
    end.sub(start).conj().mul(&z.sub(start)).re()
}

fn validate_inner(desc: &SystemDescription) -> Result<(AxiomReport, Option<ValidatedSystem>), SystemError> {
    let Built { ratio, maps, group, polygon } = build_maps(desc)?;
    let j = desc.j;
    let n = maps.len();
    let ids: Vec<String> = desc.cells.iter().map(|c| c.id.clone()).collect();

    // (A1)
    let mut w1 = Vec::new();
    for (s, f) in maps.iter().enumerate() {
        if !f.phi.in_dj_star() {
            w1.push(Witness::PhiNotAllowed { cell: ids[s].clone(), half_turns: f.phi.half_turns, conj: f.phi.conj });
        }
        if !contained_in_polygon(f, &polygon) {
            w1.push(Witness::NotContained { cell: ids[s].clone() });
        }
    }

    // positions of image vertices and edges
    let images: Vec<Vec<CycloNumber>> = maps.iter().map(|f| f.image_vertices(&polygon)).collect();
    let on_line: Vec<Vec<Vec<bool>>> = images
        .iter()
        .map(|vs| vs.iter().map(|v| (0..j).map(|i| on_edge_line(v, &polygon, i)).collect()).collect())
        .collect();
    let mut xi = vec![vec![None; j]; n];
    for s in 0..n {
        for k in 0..j {
            let a = (k + j - 1) % j;
            xi[s][k] = (0..j).find(|&i| on_line[s][a][i] && on_line[s][k][i]);
        }
    }
    let mut vertex_positions = vec![vec![VertexPosition::Inside; j]; n];
    let mut corner_cells = vec![Vec::new(); j];
    for s in 0..n {
        for c in 0..j {
            let v = &images[s][c];
            if let Some(a) = (0..j).find(|&a| *v == polygon.vertices[a]) {
                vertex_positions[s][c] = VertexPosition::Corner(a);
                corner_cells[a].push((s, c));
            } else if let Some(i) = (0..j).find(|&i| on_line[s][c][i]) {
                vertex_positions[s][c] = VertexPosition::Side(i);
            }
        }
    }

    // (A2)
    let covered: BTreeSet<usize> = xi.iter().flatten().flatten().copied().collect();
    let w2: Vec<Witness> = (0..j).filter(|i| !covered.contains(i)).map(|index| Witness::UncoveredSide { index }).collect();

    // (A3)
    let mut w3 = Vec::new();
    let center_index: HashMap<&CycloNumber, usize> = maps.iter().enumerate().map(|(s, f)| (&f.center, s)).collect();
    let mut actions = Vec::with_capacity(group.len());
    for g in &group.elements {
        let mut perm = vec![usize::MAX; n];
        let mut twist = vec![DihedralElement::identity(j); n];
        for s in 0..n {
            let img = g.apply(&maps[s].center);
            match center_index.get(&img) {
                None => w3.push(Witness::NoImageCell { group_element: *g, cell: ids[s].clone() }),
                Some(&t) => {
                    let tw = maps[t].phi.inverse().compose(g).compose(&maps[s].phi);
                    perm[s] = t;
                    twist[s] = tw;
                    if !group.contains(&tw) {
                        w3.push(Witness::TwistOutsideGroup {
                            group_element: *g,
                            cell: ids[s].clone(),
                            image: ids[t].clone(),
                            twist: tw,
                        });
                    }
                }
            }
        }
        actions.push(CellAction { element: *g, perm, twist });
    }

    // (A4) and contact table
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let classes: Vec<ContactClass> = {
        use rayon::prelude::*;
        pairs.par_iter().map(|&(a, b)| classify_contact(&maps[a], &maps[b], &polygon)).collect()
    };
    let mut contacts = vec![vec![ContactClass::Disjoint; n]; n];
    let mut w4 = Vec::new();
    let mut ell_edges = Vec::new();
    let mut point_edges_raw = Vec::new();
    for (&(a, b), &cls) in pairs.iter().zip(&classes) {
        contacts[a][b] = cls;
        contacts[b][a] = cls.swapped();
        match cls {
            ContactClass::Overlap => {
                w4.push(Witness::OverlappingCells { first: ids[a].clone(), second: ids[b].clone() })
            }
            ContactClass::Edge { i, j: jj } => {
                let label = maps[b]
                    .phi
                    .inverse()
                    .compose(&maps[a].phi)
                    .compose(&DihedralElement::reflection_parallel_to_edge(j, i));
                if !group.contains(&label) {
                    w4.push(Witness::LabelOutsideGroup {
                        first: ids[a].clone(),
                        second: ids[b].clone(),
                        i,
                        j: jj,
                        label,
                    });
                }
                ell_edges.push(EllEdge { a, b, i, j: jj, label });
            }
            ContactClass::Vertex { i, j: jj } => point_edges_raw.push((a, b, i, jj)),
            ContactClass::Disjoint => {}
        }
    }

    // (A5)
    let mut uf = UnionFind::new(n);
    for e in &ell_edges {
        uf.union(e.a, e.b);
    }
    let groups = uf.groups();
    let w5 = if groups.len() > 1 {
        vec![Witness::Disconnected {
            components: groups.iter().map(|g| g.iter().map(|&s| ids[s].clone()).collect()).collect(),
        }]
    } else {
        Vec::new()
    };

    let report = AxiomReport {
        a1: AxiomVerdict::from(w1),
        a2: AxiomVerdict::from(w2),
        a3: AxiomVerdict::from(w3),
        a4: AxiomVerdict::from(w4),
        a5: AxiomVerdict::from(w5),
    };
    if !report.all_passed() {
        return Ok((report, None));
    }

    let vertex_in_k = crate::wordtree::vertex_membership(j, &corner_cells).in_k;

    let point_edges: Vec<PointEdge> = point_edges_raw
        .into_iter()
        .map(|(a, b, i, jj)| PointEdge { a, b, i, j: jj, in_k: vertex_in_k[i] && vertex_in_k[jj] })
        .collect();

    // traces on outer sides
    let mut side_traces: Vec<Vec<(usize, SideTrace)>> = vec![Vec::new(); j];
    for s in 0..n {
        let mut edge_sides = BTreeSet::new();
        for k in 0..j {
            if let Some(i) = xi[s][k] {
                side_traces[i].push((s, SideTrace::Edge(k)));
                edge_sides.insert(i);
            }
        }
        for c in 0..j {
            for i in 0..j {
                if on_line[s][c][i] && !edge_sides.contains(&i) {
                    side_traces[i].push((s, SideTrace::Vertex(c)));
                }
            }
        }
    }
    let mut side_pairs = vec![Vec::new(); j];
    for i in 0..j {
        let traces = &side_traces[i];
        // parameter interval of each trace along b_i, with the vertex at each end
        let spans: Vec<(CycloNumber, usize, CycloNumber, usize)> = traces
            .iter()
            .map(|&(s, t)| match t {
                SideTrace::Edge(k) => {
                    let a = (k + j - 1) % j;
                    let la = side_param(&polygon, i, &images[s][a]);
                    let lk = side_param(&polygon, i, &images[s][k]);
                    if la.sub(&lk).re_sign() <= 0 {
                        (la, a, lk, k)
                    } else {
                        (lk, k, la, a)
                    }
                }
                SideTrace::Vertex(c) => {
                    let l = side_param(&polygon, i, &images[s][c]);
                    (l.clone(), c, l, c)
                }
            })
            .collect();
        for (x, &(s1, t1)) in traces.iter().enumerate() {
            for (y, &(s2, _)) in traces.iter().enumerate() {
                if x == y {
                    let contact = match t1 {
                        SideTrace::Edge(k) => SideContact::Edge(k),
                        SideTrace::Vertex(c) => SideContact::Point(c, c),
                    };
                    side_pairs[i].push(SidePair { first: s1, second: s2, contact });
                    continue;
                }
                let (lo1, vlo1, hi1, vhi1) = &spans[x];
                let (lo2, vlo2, hi2, vhi2) = &spans[y];
                if hi1 == lo2 {
                    side_pairs[i].push(SidePair { first: s1, second: s2, contact: SideContact::Point(*vhi1, *vlo2) });
                } else if lo1 == hi2 {
                    side_pairs[i].push(SidePair { first: s1, second: s2, contact: SideContact::Point(*vlo1, *vhi2) });
                }
            }
        }
    }

    let ratio_f64 = ratio.to_f64().0;
    let sys = ValidatedSystem {
        description: desc.clone(),
        j,
        polygon,
        ratio,
        ratio_f64,
        maps,
        group,
        contacts,
        ell_edges,
        point_edges,
        actions,
        xi,
        vertex_positions,
        corner_cells,
        side_traces,
        side_pairs,
        vertex_in_k,
        report: report.clone(),
    };
    Ok((report, Some(sys)))
}

/// Evaluate all five axioms without failing early.
pub fn axiom_report(desc: &SystemDescription) -> Result<AxiomReport, SystemError> {
    validate_inner(desc).map(|(r, _)| r)
}

/// Validate a description; on success every cached table is populated.
pub fn validate(desc: &SystemDescription) -> Result<ValidatedSystem, ValidationError> {
    match validate_inner(desc)? {
        (_, Some(sys)) => Ok(sys),
        (report, None) => Err(ValidationError::Axioms(Box::new(report))),
    }
}

/// Load and validate in one step.
pub fn load_validated(text: &str) -> Result<ValidatedSystem, ValidationError> {
    validate(&load_system(text)?)
}

/// `g_*(w)` with `g(Q_w) = Q_{g_*(w)}`, carrying the evolving group element letter by letter.
pub fn group_action_on_words(sys: &ValidatedSystem, g: &DihedralElement, word: &[usize]) -> Result<Vec<usize>, GeometryError> {
    let mut current = *g;
    let mut out = Vec::with_capacity(word.len());
    for &s in word {
        let act = sys.action(&current).ok_or(GeometryError::NotInDJ(current))?;
        out.push(act.perm[s]);
        current = act.twist[s];
    }
    Ok(out)
}

/// Result of the folding-consistency check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FoldingReport {
    pub foldable: bool,
    pub witnesses: Vec<FoldingWitness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FoldingWitness {
    pub first: String,
    pub second: String,
    pub i: usize,
    pub j: usize,
    pub reason: String,
}

/// For `G = {I}`, check that every edge contact has equal indices and that the
/// two maps agree on the shared segment.
pub fn detect_trivial_symmetry(sys: &ValidatedSystem) -> FoldingReport {
    if !sys.group.is_trivial() {
        return FoldingReport { foldable: false, witnesses: Vec::new() };
    }
    let ids = sys.ids();
    let mut witnesses = Vec::new();
    for e in &sys.ell_edges {
        let witness = |reason: &str| FoldingWitness {
            first: ids[e.a].to_string(),
            second: ids[e.b].to_string(),
            i: e.i,
            j: e.j,
            reason: reason.to_string(),
        };
        if e.i != e.j {
            witnesses.push(witness("indices differ"));
            continue;
        }
        let (p, q) = sys.polygon.edge(e.i);
        let (fa, fb) = (&sys.maps[e.a], &sys.maps[e.b]);
        if fa.apply(p) != fb.apply(p) || fa.apply(q) != fb.apply(q) {
            witnesses.push(witness("maps disagree on the shared segment"));
        }
    }
    FoldingReport { foldable: witnesses.is_empty(), witnesses }
}

/// Elements of `D_J` that permute the level-`n` cells for every `n ≤ n_max`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MaximalSymmetry {
    pub elements: Vec<DihedralElement>,
    pub verified_depth: usize,
}

pub fn candidate_maximal_symmetry(sys: &ValidatedSystem, n_max: usize) -> MaximalSymmetry {
    let full = SymmetryGroup::full(sys.j);
    let mut alive: Vec<DihedralElement> = full.elements.clone();
    let mut level: Vec<Contraction> = vec![Contraction::identity(sys.j)];
    for _ in 0..n_max {
        level = level.iter().flat_map(|f| sys.maps.iter().map(move |m| f.compose(m))).collect();
        let index: HashMap<&CycloNumber, usize> = level.iter().enumerate().map(|(k, f)| (&f.center, k)).collect();
        alive.retain(|g| {
            level.iter().all(|f| match index.get(&g.apply(&f.center)) {
                Some(&t) => level[t].phi.inverse().compose(g).compose(&f.phi).in_dj(),
                None => false,
            })
        });
    }
    MaximalSymmetry { elements: alive, verified_depth: n_max }
}
