//! Essential boundary segments, isolated contact points, restricted edge sets,
//! component decompositions, boundary traces and the `F_∂` set dynamics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::geometry::{mod_distance, SymmetryGroup};
use crate::system::{SideTrace, ValidatedSystem, VertexPosition};
use crate::wordtree::{
    build_levels, contact_clusters, point_in_k, EllEdge, LevelGraph, Membership, UnionFind, WordTreeError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundaryError {
    #[error("composition of level-one F_∂ is only valid for the trivial group")]
    NotTrivialGroup,
    #[error(transparent)]
    WordTree(#[from] WordTreeError),
}

/// A subset of `Z_J` stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetZJ {
    pub j: usize,
    pub bits: u32,
}

impl fmt::Debug for SubsetZJ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for SubsetZJ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", items.join(","))
    }
}

impl Serialize for SubsetZJ {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl SubsetZJ {
    pub fn empty(j: usize) -> Self {
        assert!(j <= 32, "J above 32 is not supported by the bitmask representation");
        SubsetZJ { j, bits: 0 }
    }

    pub fn full(j: usize) -> Self {
        SubsetZJ { j, bits: Self::mask(j) }
    }

    fn mask(j: usize) -> u32 {
        if j == 32 {
            u32::MAX
        } else {
            (1u32 << j) - 1
        }
    }

    pub fn from_bits(j: usize, bits: u32) -> Self {
        SubsetZJ { j, bits: bits & Self::mask(j) }
    }

    pub fn from_indices(j: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(j);
        for i in idx {
            s.insert(i % j);
        }
        s
    }

    /// Indices with the given parity.
    pub fn parity(j: usize, r: usize) -> Self {
        Self::from_indices(j, (0..j).filter(|i| i % 2 == r))
    }

    pub fn contains(&self, i: usize) -> bool {
        self.bits >> i & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        self.bits |= 1 << i;
    }

    pub fn remove(&mut self, i: usize) {
        self.bits &= !(1 << i);
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn complement(&self) -> Self {
        SubsetZJ { j: self.j, bits: !self.bits & Self::mask(self.j) }
    }

    pub fn union(&self, o: &Self) -> Self {
        SubsetZJ { j: self.j, bits: self.bits | o.bits }
    }

    pub fn intersection(&self, o: &Self) -> Self {
        SubsetZJ { j: self.j, bits: self.bits & o.bits }
    }

    pub fn is_subset(&self, o: &Self) -> bool {
        self.bits & !o.bits == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.j).filter(move |&i| self.contains(i))
    }

    /// `G(X)`.
    pub fn g_closure(&self, group: &SymmetryGroup) -> Self {
        let mut out = *self;
        for g in &group.elements {
            for i in self.iter() {
                out.insert(g.edge_action(i));
            }
        }
        out
    }

    pub fn is_invariant(&self, group: &SymmetryGroup) -> bool {
        self.g_closure(group) == *self
    }

    /// Every subset of `Z_J` in bitmask order.
    pub fn all(j: usize) -> impl Iterator<Item = SubsetZJ> {
        (0..=Self::mask(j)).map(move |b| SubsetZJ { j, bits: b })
    }
}

/// `X = G(i)` for some `i ∈ X`; the empty set is not transitive.
pub fn is_transitive(x: &SubsetZJ, group: &SymmetryGroup) -> bool {
    match x.iter().next() {
        None => false,
        Some(i) => SubsetZJ::from_indices(x.j, group.orbit(i)) == *x,
    }
}

fn all_ell_indices(sys: &ValidatedSystem) -> SubsetZJ {
    SubsetZJ::from_indices(sys.j, sys.ell_edges.iter().flat_map(|e| [e.i, e.j]))
}

/// Rule (E2): sub-edges of cells lying on a side in `X` contribute their index.
fn e2_step(sys: &ValidatedSystem, x: &SubsetZJ) -> SubsetZJ {
    let mut out = *x;
    for row in &sys.xi {
        for (k, side) in row.iter().enumerate() {
            if let Some(side) = side {
                if x.contains(*side) {
                    out.insert(k);
                }
            }
        }
    }
    out
}

/// Whether `X` is `G`-invariant and satisfies (E1) and (E2).
pub fn is_admissible(sys: &ValidatedSystem, x: &SubsetZJ) -> bool {
    x.is_invariant(&sys.group) && all_ell_indices(sys).is_subset(x) && e2_step(sys, x) == *x
}

/// Least admissible set, grown from the level-one gluing indices.
pub fn essential_boundary(sys: &ValidatedSystem) -> SubsetZJ {
    let mut x = all_ell_indices(sys).g_closure(&sys.group);
    loop {
        let next = e2_step(sys, &x).g_closure(&sys.group);
        if next == x {
            return x;
        }
        x = next;
    }
}

/// Intersection of every admissible subset, by enumeration.
pub fn essential_boundary_brute(sys: &ValidatedSystem) -> SubsetZJ {
    SubsetZJ::all(sys.j)
        .filter(|x| is_admissible(sys, x))
        .fold(SubsetZJ::full(sys.j), |acc, x| acc.intersection(&x))
}

/// `b_{k}(w) ⊆ b_{trace[w][k]}` for every node of a level.
#[derive(Clone, Debug)]
pub struct TraceTable {
    pub level: usize,
    j: usize,
    edges: Vec<Option<u8>>,
    vertices: Vec<Position>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Position {
    Corner(u8),
    Side(u8),
    Inside,
}

impl TraceTable {
    pub fn level_one(sys: &ValidatedSystem) -> Self {
        let j = sys.j;
        let mut edges = Vec::with_capacity(sys.cell_count() * j);
        let mut vertices = Vec::with_capacity(sys.cell_count() * j);
        for s in 0..sys.cell_count() {
            for k in 0..j {
                edges.push(sys.xi[s][k].map(|i| i as u8));
                vertices.push(match sys.vertex_positions[s][k] {
                    VertexPosition::Corner(a) => Position::Corner(a as u8),
                    VertexPosition::Side(i) => Position::Side(i as u8),
                    VertexPosition::Inside => Position::Inside,
                });
            }
        }
        TraceTable { level: 1, j, edges, vertices }
    }

    /// Extend by one letter: `Ξ_{xu}(k) = Ξ_x(ξ(u, k))`.
    pub fn extend(&self, sys: &ValidatedSystem) -> Self {
        let j = self.j;
        let n = sys.cell_count();
        let parents = self.edges.len() / j;
        let mut edges = Vec::with_capacity(parents * n * j);
        let mut vertices = Vec::with_capacity(parents * n * j);
        for x in 0..parents {
            for u in 0..n {
                for k in 0..j {
                    edges.push(sys.xi[u][k].and_then(|i| self.edges[x * j + i]));
                    vertices.push(match sys.vertex_positions[u][k] {
                        VertexPosition::Corner(a) => self.vertices[x * j + a],
                        VertexPosition::Side(i) => match self.edges[x * j + i] {
                            Some(i2) => Position::Side(i2),
                            None => Position::Inside,
                        },
                        VertexPosition::Inside => Position::Inside,
                    });
                }
            }
        }
        TraceTable { level: self.level + 1, j, edges, vertices }
    }

    pub fn for_level(sys: &ValidatedSystem, n: usize) -> Self {
        let mut t = Self::level_one(sys);
        while t.level < n {
            t = t.extend(sys);
        }
        t
    }

    /// Outer side containing `b_k(w)`, if any.
    pub fn edge_side(&self, w: usize, k: usize) -> Option<usize> {
        self.edges[w * self.j + k].map(|i| i as usize)
    }

    /// Outer sides touched by vertex `c` of `Q_w`.
    pub fn vertex_sides(&self, w: usize, c: usize) -> Vec<usize> {
        match self.vertices[w * self.j + c] {
            Position::Corner(a) => vec![a as usize, (a as usize + 1) % self.j],
            Position::Side(i) => vec![i as usize],
            Position::Inside => Vec::new(),
        }
    }
}

/// `∂_Y A`.
pub fn boundary_trace(table: &TraceTable, a: &[usize], y: &SubsetZJ) -> SubsetZJ {
    let mut out = SubsetZJ::empty(y.j);
    for &w in a {
        for k in y.iter() {
            if let Some(i) = table.edge_side(w, k) {
                out.insert(i);
            }
        }
    }
    out
}

/// Plain `∂A`: sides met by the attractor part of some cell, including single-vertex touches.
pub fn plain_boundary(table: &TraceTable, a: &[usize], vertex_in_k: &[bool]) -> SubsetZJ {
    let j = vertex_in_k.len();
    let mut out = boundary_trace(table, a, &SubsetZJ::full(j));
    for &w in a {
        for (c, &inside) in vertex_in_k.iter().enumerate() {
            if inside {
                for i in table.vertex_sides(w, c) {
                    out.insert(i);
                }
            }
        }
    }
    out
}

/// `E_n^ℓ(Y)`, keeping edges whose both indices lie in `Y`.
#[derive(Clone, Debug)]
pub struct RestrictedEdges {
    pub edges: Vec<EllEdge>,
    /// Set when `Y` is not `G`-invariant; the both-indices reading may then
    /// differ from the either-index reading.
    pub non_invariant: bool,
}

pub fn restricted_edges(graph: &LevelGraph, y: &SubsetZJ, group: &SymmetryGroup) -> RestrictedEdges {
    RestrictedEdges {
        edges: graph.ell_edges.iter().filter(|e| y.contains(e.i) && y.contains(e.j)).copied().collect(),
        non_invariant: !y.is_invariant(group),
    }
}

/// `Con_T(n, X)` with the trace `∂_{X^c}A` of each component.
#[derive(Clone, Debug, Serialize)]
pub struct ComponentDecomposition {
    pub level: usize,
    pub cut: SubsetZJ,
    pub components: Vec<Vec<usize>>,
    pub traces: Vec<SubsetZJ>,
    pub non_invariant: bool,
}

pub fn components(
    graph: &LevelGraph,
    table: &TraceTable,
    x: &SubsetZJ,
    group: &SymmetryGroup,
) -> ComponentDecomposition {
    let keep = x.complement();
    let restricted = restricted_edges(graph, &keep, group);
    let mut uf = UnionFind::new(graph.node_count);
    for e in &restricted.edges {
        uf.union(e.a, e.b);
    }
    let components = uf.groups();
    let traces = components.iter().map(|c| boundary_trace(table, c, &keep)).collect();
    ComponentDecomposition {
        level: graph.level,
        cut: *x,
        components,
        traces,
        non_invariant: restricted.non_invariant,
    }
}

/// A deduplicated family of subsets, sorted by bitmask.
pub type Family = BTreeSet<SubsetZJ>;

/// `F_∂(n, X)` on a prebuilt level graph.
pub fn f_partial_on(graph: &LevelGraph, table: &TraceTable, x: &SubsetZJ, group: &SymmetryGroup) -> Family {
    let dec = components(graph, table, x, group);
    dec.traces.iter().map(|t| t.complement()).collect()
}

/// `F_∂(n, X)` built from scratch.
pub fn f_partial(sys: &ValidatedSystem, n: usize, x: &SubsetZJ) -> Result<Family, BoundaryError> {
    let graph = build_levels(sys, n)?.pop().expect("at least one level");
    let table = TraceTable::for_level(sys, n);
    Ok(f_partial_on(&graph, &table, x, &sys.group))
}

/// Level-one `F_∂` for every subset of `Z_J`, indexed by bitmask.
pub fn f_partial_table(sys: &ValidatedSystem) -> Vec<Family> {
    let graph = crate::wordtree::level_one(sys);
    let table = TraceTable::level_one(sys);
    SubsetZJ::all(sys.j)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|x| f_partial_on(&graph, &table, x, &sys.group))
        .collect()
}

/// Membership in `B^L`: at least `J-1` elements, or `J-2` elements whose
/// missing pair is not an opposite pair.
pub fn in_b_low(x: &SubsetZJ) -> bool {
    let j = x.j;
    let len = x.len();
    if len >= j.saturating_sub(1) {
        return true;
    }
    len + 2 == j && !missing_pair_is_opposite(x)
}

fn missing_pair_is_opposite(x: &SubsetZJ) -> bool {
    let missing: Vec<usize> = x.complement().iter().collect();
    x.j.is_multiple_of(2) && missing.len() == 2 && mod_distance(x.j, missing[0], missing[1]) == x.j / 2
}

/// Membership in `B^H`: between 1 and `J-3` elements, or `J-2` elements whose
/// missing pair is opposite.
pub fn in_b_high(x: &SubsetZJ) -> bool {
    let j = x.j;
    let len = x.len();
    (len >= 1 && len + 3 <= j) || (len + 2 == j && missing_pair_is_opposite(x))
}

/// Every member of `B^H`, in bitmask order.
pub fn b_high(j: usize) -> Vec<SubsetZJ> {
    SubsetZJ::all(j).filter(in_b_high).collect()
}

/// The eventually periodic sequence `F_∂^n(X)` for one seed.
#[derive(Clone, Debug, Serialize)]
pub struct SeedOrbit {
    pub seed: SubsetZJ,
    /// `families[n-1] = F_∂^n(X)`, up to the first repetition.
    pub families: Vec<Vec<SubsetZJ>>,
    /// Index into `families` where the cycle starts.
    pub cycle_start: usize,
    pub reaches_empty: bool,
    pub enters_b_low: bool,
    /// Some iterate contains the seed itself.
    pub returns_to_seed: bool,
    pub f1: bool,
    pub f2: bool,
    pub f3: bool,
    /// Some iterate contains `∅`, and that iterate lies inside `{∅} ∪ B^L`.
    pub empty_implies_low: bool,
}

/// Iterate `F_∂` by composing the level-one map; valid only for the trivial group.
pub fn f_partial_iterate(sys: &ValidatedSystem, seeds: &[SubsetZJ]) -> Result<Vec<SeedOrbit>, BoundaryError> {
    if !sys.group.is_trivial() {
        return Err(BoundaryError::NotTrivialGroup);
    }
    let table = f_partial_table(sys);
    Ok(seeds.iter().map(|x| iterate_seed(&table, x)).collect())
}

/// Iterate a level-one map given as a table.
pub fn iterate_seed(table: &[Family], seed: &SubsetZJ) -> SeedOrbit {
    let mut seen: HashMap<Family, usize> = HashMap::new();
    let mut families: Vec<Family> = Vec::new();
    let mut current: Family = [*seed].into_iter().collect();
    let cycle_start = loop {
        let next: Family = current.iter().flat_map(|y| table[y.bits as usize].iter().copied()).collect();
        if let Some(&k) = seen.get(&next) {
            break k;
        }
        seen.insert(next.clone(), families.len());
        families.push(next.clone());
        current = next;
    };
    let empty = SubsetZJ::empty(seed.j);
    let low_or_empty = |f: &Family| f.iter().all(|y| y.is_empty() || in_b_low(y));
    let reaches_empty = families.iter().any(|f| f.contains(&empty));
    let enters_b_low = families.iter().any(|f| f.iter().all(in_b_low));
    let returns_to_seed = families.iter().any(|f| f.contains(seed));
    let f2 = families.iter().any(|f| f.contains(&empty) || f.iter().all(in_b_low));
    let f3 = families.iter().any(low_or_empty);
    let empty_implies_low = families.iter().filter(|f| f.contains(&empty)).all(low_or_empty);
    SeedOrbit {
        seed: *seed,
        families: families.iter().map(|f| f.iter().copied().collect()).collect(),
        cycle_start,
        reaches_empty,
        enters_b_low,
        returns_to_seed,
        f1: !returns_to_seed,
        f2,
        f3,
        empty_implies_low,
    }
}

/// One contact point examined for connectivity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContactPointCheck {
    pub level: usize,
    pub cells: Vec<usize>,
    pub cells_in_k: Vec<usize>,
    pub connected: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ContactVerdict {
    NoneExist,
    Exists { level: usize, cells: Vec<Vec<usize>> },
    Unknown { reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Nic2Witness {
    pub cell: usize,
    pub side: usize,
    pub vertex: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContactPointReport {
    pub verdict: ContactVerdict,
    /// Whether the equivalence route applies (`J ≥ 4`).
    pub theorem_route: bool,
    pub nic1_passed: bool,
    pub nic1_points: Vec<ContactPointCheck>,
    pub nic2_passed: bool,
    pub nic2_auto_pass: bool,
    pub nic2_witnesses: Vec<Nic2Witness>,
    /// Disconnected contact points found by the direct search at each depth.
    pub direct_depth: usize,
    pub direct_witnesses: Vec<ContactPointCheck>,
    /// Whether the equivalence route and the direct search agree.
    pub routes_agree: bool,
}

fn ell_connected(graph: &LevelGraph, cells: &[usize]) -> bool {
    if cells.len() <= 1 {
        return true;
    }
    let index: BTreeMap<usize, usize> = cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let mut uf = UnionFind::new(cells.len());
    for &c in cells {
        for &d in graph.neighbors(c, crate::wordtree::EdgeKind::Ell) {
            if let Some(&kd) = index.get(&d) {
                uf.union(index[&c], kd);
            }
        }
    }
    uf.groups().len() == 1
}

/// Contact points of one level with their connectivity inside `K`.
pub fn contact_point_checks(graph: &LevelGraph, j: usize, vertex_in_k: &[bool]) -> Vec<ContactPointCheck> {
    contact_clusters(graph, j)
        .into_iter()
        .filter_map(|cl| {
            let cells_in_k = cl.cells_in_k(vertex_in_k);
            if cells_in_k.is_empty() {
                return None;
            }
            let connected = ell_connected(graph, &cells_in_k);
            Some(ContactPointCheck { level: graph.level, cells: cl.cells(), cells_in_k, connected })
        })
        .collect()
}

/// Default preimage budget for membership checks of contact points.
pub const MEMBERSHIP_BUDGET: usize = 4096;

/// Decide whether isolated contact points exist.
pub fn isolated_contact_report(sys: &ValidatedSystem, oracle_depth: usize) -> Result<ContactPointReport, BoundaryError> {
    let j = sys.j;
    let depth = oracle_depth.max(1);
    let levels = build_levels(sys, depth)?;

    // direct search
    let mut direct_witnesses = Vec::new();
    let mut nic1_points = Vec::new();
    for g in &levels {
        let checks = contact_point_checks(g, j, &sys.vertex_in_k);
        if g.level == 1 {
            nic1_points = checks.clone();
        }
        direct_witnesses.extend(checks.into_iter().filter(|c| !c.connected));
    }

    // membership cross-check of level-one contact points
    let mut unknown = None;
    for cl in contact_clusters(&levels[0], j) {
        let Some(&(w, c)) = cl.slots.iter().find(|&&(_, v)| sys.vertex_in_k[v]) else {
            continue;
        };
        let x = sys.maps[w].apply(&sys.polygon.vertices[c]);
        match point_in_k(sys, &x, MEMBERSHIP_BUDGET) {
            Membership::Unknown => unknown = Some(format!("membership of a level-one contact point of cell {w}")),
            Membership::Out => {
                return Err(BoundaryError::WordTree(WordTreeError::InternalInconsistency(
                    "vertex table and preimage search disagree".into(),
                )))
            }
            Membership::In => {}
        }
    }

    let nic1_passed = nic1_points.iter().all(|p| p.connected);
    let essential = essential_boundary(sys);
    let mut nic2_witnesses = Vec::new();
    for i in essential.iter() {
        for &(s, t) in &sys.side_traces[i] {
            if let SideTrace::Vertex(c) = t {
                if sys.vertex_in_k[c] {
                    nic2_witnesses.push(Nic2Witness { cell: s, side: i, vertex: c });
                }
            }
        }
    }
    let nic2_passed = nic2_witnesses.is_empty();
    let nic2_auto_pass = j.is_multiple_of(2);
    let theorem_route = j >= 4;
    let direct_none = direct_witnesses.is_empty();

    let theorem_none = if j == 6 { true } else { nic1_passed && nic2_passed };
    let routes_agree = !theorem_route || theorem_none == direct_none || (!theorem_none && depth < 2);

    let verdict = if let Some(reason) = unknown {
        ContactVerdict::Unknown { reason }
    } else if theorem_route {
        if theorem_none {
            ContactVerdict::NoneExist
        } else {
            direct_or_level_one(&direct_witnesses, &nic1_points, &nic2_witnesses)
        }
    } else if let Some(w) = direct_witnesses.first() {
        ContactVerdict::Exists { level: w.level, cells: vec![w.cells_in_k.clone()] }
    } else {
        ContactVerdict::Unknown {
            reason: format!("no equivalence criterion for J = {j}; none found by direct search up to level {depth}"),
        }
    };

    Ok(ContactPointReport {
        verdict,
        theorem_route,
        nic1_passed,
        nic1_points,
        nic2_passed,
        nic2_auto_pass,
        nic2_witnesses,
        direct_depth: depth,
        direct_witnesses,
        routes_agree,
    })
}

fn direct_or_level_one(
    direct: &[ContactPointCheck],
    nic1: &[ContactPointCheck],
    nic2: &[Nic2Witness],
) -> ContactVerdict {
    if let Some(w) = direct.first() {
        return ContactVerdict::Exists { level: w.level, cells: vec![w.cells_in_k.clone()] };
    }
    if let Some(p) = nic1.iter().find(|p| !p.connected) {
        return ContactVerdict::Exists { level: 1, cells: vec![p.cells_in_k.clone()] };
    }
    let w = &nic2[0];
    ContactVerdict::Exists { level: 2, cells: vec![vec![w.cell]] }
}
