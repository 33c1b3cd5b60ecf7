//! Level-`m` word graphs built by the reflection recursion, the brute-force
//! geometric oracle used to cross-check them, graph balls, and membership of
//! distinguished points in the attractor.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::CycloNumber;
use crate::geometry::{
    approx_radius, classify_contact, point_in_polygon, ContactClass, Contraction, DihedralElement,
};
use crate::system::{SideContact, ValidatedSystem};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordTreeError {
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
    #[error("{nodes} nodes exceed the guard of {guard}; pass force to override")]
    TooLarge { nodes: usize, guard: usize },
    #[error("word index {0} is not a node of this level")]
    UnknownWord(usize),
    #[error("membership of a contact point is undecided within budget {0}; raise the budget")]
    MembershipUnknown(usize),
}

/// Default node-count guard for the exact pairwise oracle.
pub const ORACLE_GUARD: usize = 10_000;

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    /// Classes as sorted member lists, ordered by smallest member.
    pub fn groups(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut first: HashMap<usize, usize> = HashMap::new();
        for x in 0..n {
            let r = self.find(x);
            let key = *first.entry(r).or_insert(x);
            by_root.entry(key).or_default().push(x);
        }
        by_root.into_values().collect()
    }
}

/// Digits of a node index at a given level, most significant letter first.
pub fn word_of(index: usize, level: usize, alphabet: usize) -> Vec<usize> {
    let mut out = vec![0; level];
    let mut x = index;
    for slot in out.iter_mut().rev() {
        *slot = x % alphabet;
        x /= alphabet;
    }
    out
}

pub fn index_of(word: &[usize], alphabet: usize) -> usize {
    word.iter().fold(0, |acc, &s| acc * alphabet + s)
}

/// Prefix `[w]_k` of a node at `level`, as a node index at level `k`.
pub fn prefix_index(index: usize, level: usize, k: usize, alphabet: usize) -> usize {
    index / alphabet.pow((level - k) as u32)
}

/// Suffix `σ_k(w)` as a node index at level `level - k`.
pub fn suffix_index(index: usize, level: usize, k: usize, alphabet: usize) -> usize {
    index % alphabet.pow((level - k) as u32)
}

/// Two cells sharing a full edge: `Q_a ∩ Q_b = b_i(a) = b_j(b)`, with
/// `label = Φ_b⁻¹ Φ_a R_{ρ(i)}` so that the reflection in the shared segment
/// maps `Q_{a u}` onto `Q_{b label(u)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EllEdge {
    pub a: usize,
    pub b: usize,
    pub i: usize,
    pub j: usize,
    pub label: DihedralElement,
}

/// Two cells meeting in one point, vertex `i` of `a` and vertex `j` of `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PointEdge {
    pub a: usize,
    pub b: usize,
    pub i: usize,
    pub j: usize,
    pub in_k: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Ell,
    Star,
}

/// Compressed adjacency lists.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Adjacency {
    fn build(nodes: usize, pairs: impl Iterator<Item = (usize, usize)> + Clone) -> Self {
        let mut deg = vec![0usize; nodes + 1];
        for (a, b) in pairs.clone() {
            deg[a + 1] += 1;
            deg[b + 1] += 1;
        }
        for k in 0..nodes {
            deg[k + 1] += deg[k];
        }
        let mut fill = deg.clone();
        let mut targets = vec![0usize; deg[nodes]];
        for (a, b) in pairs {
            targets[fill[a]] = b;
            fill[a] += 1;
            targets[fill[b]] = a;
            fill[b] += 1;
        }
        for k in 0..nodes {
            targets[deg[k]..deg[k + 1]].sort_unstable();
        }
        Adjacency { offsets: deg, targets }
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// The word graph at one level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelGraph {
    pub level: usize,
    pub alphabet: usize,
    pub node_count: usize,
    /// Linear part `Φ_w = φ_{w_1} ∘ ⋯ ∘ φ_{w_m}` of each cell map.
    pub phis: Vec<DihedralElement>,
    pub ell_edges: Vec<EllEdge>,
    pub point_edges: Vec<PointEdge>,
    ell_adj: Adjacency,
    star_adj: Adjacency,
}

impl LevelGraph {
    fn assemble(
        level: usize,
        alphabet: usize,
        phis: Vec<DihedralElement>,
        mut ell_edges: Vec<EllEdge>,
        mut point_edges: Vec<PointEdge>,
    ) -> Result<Self, WordTreeError> {
        let node_count = phis.len();
        let j = phis.first().map(|p| p.j).unwrap_or(3);
        for e in ell_edges.iter_mut() {
            if e.a > e.b {
                *e = EllEdge { a: e.b, b: e.a, i: e.j, j: e.i, label: e.label };
            }
            e.label = edge_label(&phis, e.a, e.b, e.i, j);
        }
        for e in point_edges.iter_mut() {
            if e.a > e.b {
                *e = PointEdge { a: e.b, b: e.a, i: e.j, j: e.i, in_k: e.in_k };
            }
        }
        ell_edges.sort_unstable();
        point_edges.sort_unstable();
        let dup_ell = ell_edges.windows(2).any(|w| (w[0].a, w[0].b) == (w[1].a, w[1].b));
        let dup_point = point_edges.windows(2).any(|w| (w[0].a, w[0].b) == (w[1].a, w[1].b));
        if dup_ell || dup_point {
            return Err(WordTreeError::InternalInconsistency(format!("duplicate edge at level {level}")));
        }
        let ell_adj = Adjacency::build(node_count, ell_edges.iter().map(|e| (e.a, e.b)));
        let star_pairs = ell_edges
            .iter()
            .map(|e| (e.a, e.b))
            .chain(point_edges.iter().filter(|e| e.in_k).map(|e| (e.a, e.b)));
        let star_adj = Adjacency::build(node_count, star_pairs);
        Ok(LevelGraph { level, alphabet, node_count, phis, ell_edges, point_edges, ell_adj, star_adj })
    }

    pub fn neighbors(&self, v: usize, kind: EdgeKind) -> &[usize] {
        match kind {
            EdgeKind::Ell => self.ell_adj.neighbors(v),
            EdgeKind::Star => self.star_adj.neighbors(v),
        }
    }

    /// Star edges as canonical `(a, b)` pairs: ell edges plus point contacts inside `K`.
    pub fn star_pairs(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .ell_edges
            .iter()
            .map(|e| (e.a, e.b))
            .chain(self.point_edges.iter().filter(|e| e.in_k).map(|e| (e.a, e.b)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn word(&self, index: usize) -> Vec<usize> {
        word_of(index, self.level, self.alphabet)
    }

    pub fn is_adjacent(&self, a: usize, b: usize, kind: EdgeKind) -> bool {
        self.neighbors(a, kind).binary_search(&b).is_ok()
    }

    /// The ell edge joining `a` and `b`, stored with `a < b`.
    pub fn ell_edge(&self, a: usize, b: usize) -> Option<&EllEdge> {
        let key = (a.min(b), a.max(b));
        let k = self.ell_edges.partition_point(|e| (e.a, e.b) < key);
        self.ell_edges.get(k).filter(|e| (e.a, e.b) == key)
    }
}

fn edge_label(phis: &[DihedralElement], a: usize, b: usize, i: usize, j: usize) -> DihedralElement {
    phis[b].inverse().compose(&phis[a]).compose(&DihedralElement::reflection_parallel_to_edge(j, i))
}

/// The level-one graph read off the validated contact table.
pub fn level_one(sys: &ValidatedSystem) -> LevelGraph {
    let phis = sys.maps.iter().map(|f| f.phi).collect();
    LevelGraph::assemble(1, sys.cell_count(), phis, sys.ell_edges.clone(), sys.point_edges.clone())
        .expect("level-one table has no duplicates")
}

/// Level `m + 1` from level `m` without exact arithmetic.
pub fn extend_level(sys: &ValidatedSystem, graph: &LevelGraph) -> Result<LevelGraph, WordTreeError> {
    let n = sys.cell_count();
    let vin = &sys.vertex_in_k;
    let phis: Vec<DihedralElement> =
        graph.phis.iter().flat_map(|p| sys.maps.iter().map(move |f| p.compose(&f.phi))).collect();

    // within one parent
    let mut ell: Vec<EllEdge> = Vec::with_capacity(graph.node_count * sys.ell_edges.len());
    let mut point: Vec<PointEdge> = Vec::new();
    for x in 0..graph.node_count {
        for e in &sys.ell_edges {
            ell.push(EllEdge { a: x * n + e.a, b: x * n + e.b, ..*e });
        }
        for e in &sys.point_edges {
            point.push(PointEdge { a: x * n + e.a, b: x * n + e.b, ..*e });
        }
    }

    // across an edge shared by two parents
    for e in &graph.ell_edges {
        let act = sys.action(&e.label).ok_or_else(|| {
            WordTreeError::InternalInconsistency(format!("edge label {} is outside the group", e.label))
        })?;
        for sp in &sys.side_pairs[e.i] {
            let a = e.a * n + sp.first;
            let b = e.b * n + act.perm[sp.second];
            match sp.contact {
                SideContact::Edge(k) => {
                    let k2 = act.twist[sp.first].edge_action(k);
                    ell.push(EllEdge { a, b, i: k, j: k2, label: e.label });
                }
                SideContact::Point(c, c2) => {
                    let c2 = act.twist[sp.second].vertex_action(c2);
                    point.push(PointEdge { a, b, i: c, j: c2, in_k: vin[c] && vin[c2] });
                }
            }
        }
    }

    // across a point shared by two parents
    for e in &graph.point_edges {
        for &(u, c) in &sys.corner_cells[e.i] {
            for &(u2, c2) in &sys.corner_cells[e.j] {
                point.push(PointEdge { a: e.a * n + u, b: e.b * n + u2, i: c, j: c2, in_k: vin[c] && vin[c2] });
            }
        }
    }

    LevelGraph::assemble(graph.level + 1, n, phis, ell, point)
}

/// Level `m` by recursion from level one.
pub fn build_level(sys: &ValidatedSystem, m: usize) -> Result<LevelGraph, WordTreeError> {
    let mut g = level_one(sys);
    for _ in 1..m.max(1) {
        g = extend_level(sys, &g)?;
    }
    Ok(g)
}

/// All levels `1..=m`.
pub fn build_levels(sys: &ValidatedSystem, m: usize) -> Result<Vec<LevelGraph>, WordTreeError> {
    let mut out = vec![level_one(sys)];
    while out.len() < m {
        let next = extend_level(sys, out.last().expect("nonempty"))?;
        out.push(next);
    }
    Ok(out)
}

/// Exact cell maps `f_w` for every word of length `m`, in node order.
pub fn level_maps(sys: &ValidatedSystem, m: usize) -> Vec<Contraction> {
    let mut level = vec![Contraction::identity(sys.j)];
    for _ in 0..m {
        level = level.iter().flat_map(|f| sys.maps.iter().map(move |g| f.compose(g))).collect();
    }
    level
}

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    /// Skip pairs whose centers are too far apart to touch.
    pub bucketing: bool,
    /// Ignore the node-count guard.
    pub force: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { bucketing: true, force: false }
    }
}

/// Brute-force classification of every pair of level-`m` cells.
pub fn geometric_adjacency_oracle(
    sys: &ValidatedSystem,
    m: usize,
    opts: OracleOptions,
) -> Result<LevelGraph, WordTreeError> {
    let n = sys.cell_count();
    let nodes = n.pow(m as u32);
    if nodes > ORACLE_GUARD && !opts.force {
        return Err(WordTreeError::TooLarge { nodes, guard: ORACLE_GUARD });
    }
    let maps = level_maps(sys, m);
    let centers: Vec<(f64, f64)> = maps.iter().map(|f| f.center.to_f64()).collect();
    let reach = 2.0 * approx_radius(sys.j) * sys.ratio_f64.powi(m as i32) * (1.0 + 1e-9);
    let pairs: Vec<(usize, usize)> = if opts.bucketing {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (k, &(x, y)) in centers.iter().enumerate() {
            buckets.entry(((x / reach).floor() as i64, (y / reach).floor() as i64)).or_default().push(k);
        }
        let mut out = Vec::new();
        for (k, &(x, y)) in centers.iter().enumerate() {
            let (bx, by) = ((x / reach).floor() as i64, (y / reach).floor() as i64);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = buckets.get(&(bx + dx, by + dy)) {
                        for &t in list {
                            let (tx, ty) = centers[t];
                            if t > k && (tx - x).hypot(ty - y) <= reach {
                                out.push((k, t));
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    } else {
        (0..nodes).flat_map(|a| (a + 1..nodes).map(move |b| (a, b))).collect()
    };
    let classes: Vec<ContactClass> =
        pairs.par_iter().map(|&(a, b)| classify_contact(&maps[a], &maps[b], &sys.polygon)).collect();
    let vin = &sys.vertex_in_k;
    let mut ell = Vec::new();
    let mut point = Vec::new();
    for (&(a, b), cls) in pairs.iter().zip(classes) {
        match cls {
            ContactClass::Edge { i, j } => ell.push(EllEdge { a, b, i, j, label: DihedralElement::identity(sys.j) }),
            ContactClass::Vertex { i, j } => point.push(PointEdge { a, b, i, j, in_k: vin[i] && vin[j] }),
            ContactClass::Overlap => {
                return Err(WordTreeError::InternalInconsistency(format!("cells {a} and {b} overlap at level {m}")))
            }
            ContactClass::Disjoint => {}
        }
    }
    let phis = maps.iter().map(|f| f.phi).collect();
    LevelGraph::assemble(m, n, phis, ell, point)
}

/// `Γ_M(w)`: nodes reachable from `w` in at most `M` steps.
pub fn gamma_ball(graph: &LevelGraph, w: usize, m: usize, kind: EdgeKind) -> Result<Vec<usize>, WordTreeError> {
    if w >= graph.node_count {
        return Err(WordTreeError::UnknownWord(w));
    }
    let mut dist: HashMap<usize, usize> = HashMap::new();
    dist.insert(w, 0);
    let mut queue = VecDeque::from([w]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d == m {
            continue;
        }
        for &u in graph.neighbors(v, kind) {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(u) {
                e.insert(d + 1);
                queue.push_back(u);
            }
        }
    }
    let mut out: Vec<usize> = dist.into_keys().collect();
    out.sort_unstable();
    Ok(out)
}

/// Which outer vertices lie in the attractor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VertexMembership {
    pub in_k: Vec<bool>,
    /// `successors[i]` holds every `c` with `f_s(p_c) = p_i` for some cell `s`.
    pub successors: Vec<Vec<usize>>,
}

/// Greatest fixed point of "`p_i` is the image of some vertex that is itself in `K`".
pub fn vertex_membership(j: usize, corner_cells: &[Vec<(usize, usize)>]) -> VertexMembership {
    let successors: Vec<Vec<usize>> = (0..j)
        .map(|i| {
            let mut s: Vec<usize> = corner_cells[i].iter().map(|&(_, c)| c).collect();
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect();
    let mut in_k = vec![true; j];
    loop {
        let next: Vec<bool> = (0..j).map(|i| successors[i].iter().any(|&c| in_k[c])).collect();
        if next == in_k {
            break;
        }
        in_k = next;
    }
    VertexMembership { in_k, successors }
}

pub fn vertex_in_k(sys: &ValidatedSystem) -> VertexMembership {
    vertex_membership(sys.j, &sys.corner_cells)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    In,
    Out,
    Unknown,
}

/// Decide `x ∈ K` by exploring preimages under the cell maps.
///
/// A preimage chain that revisits a point certifies membership; a search in
/// which every branch leaves the polygon certifies non-membership.
pub fn point_in_k(sys: &ValidatedSystem, x: &CycloNumber, budget: usize) -> Membership {
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        OnStack,
        Done(Membership),
    }
    struct Search<'a> {
        sys: &'a ValidatedSystem,
        states: HashMap<CycloNumber, State>,
        budget: usize,
    }
    impl Search<'_> {
        fn visit(&mut self, x: &CycloNumber) -> Membership {
            match self.states.get(x) {
                Some(State::OnStack) => return Membership::In,
                Some(State::Done(m)) => return *m,
                None => {}
            }
            if self.budget == 0 {
                return Membership::Unknown;
            }
            self.budget -= 1;
            self.states.insert(x.clone(), State::OnStack);
            let mut result = Membership::Out;
            for f in &self.sys.maps {
                let y = f.apply_inverse(x);
                if !point_in_polygon(&y, &self.sys.polygon) {
                    continue;
                }
                match self.visit(&y) {
                    Membership::In => {
                        result = Membership::In;
                        break;
                    }
                    Membership::Unknown => result = Membership::Unknown,
                    Membership::Out => {}
                }
            }
            self.states.insert(x.clone(), State::Done(result));
            result
        }
    }
    if !point_in_polygon(x, &sys.polygon) {
        return Membership::Out;
    }
    Search { sys, states: HashMap::new(), budget }.visit(x)
}

/// Cells meeting at one point, as `(node, vertex index)` slots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContactCluster {
    pub slots: Vec<(usize, usize)>,
}

impl ContactCluster {
    pub fn cells(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.slots.iter().map(|&(w, _)| w).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Cells whose attractor part contains the point.
    pub fn cells_in_k(&self, vertex_in_k: &[bool]) -> Vec<usize> {
        let mut c: Vec<usize> = self.slots.iter().filter(|&&(_, v)| vertex_in_k[v]).map(|&(w, _)| w).collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// Group cell vertices that coincide, using both edge kinds.
pub fn contact_clusters(graph: &LevelGraph, j: usize) -> Vec<ContactCluster> {
    let slot = |w: usize, v: usize| w * j + v;
    let mut uf = UnionFind::new(graph.node_count * j);
    let mut touched = vec![false; graph.node_count * j];
    for e in &graph.point_edges {
        uf.union(slot(e.a, e.i), slot(e.b, e.j));
        touched[slot(e.a, e.i)] = true;
        touched[slot(e.b, e.j)] = true;
    }
    for e in &graph.ell_edges {
        for v in [(e.i + j - 1) % j, e.i] {
            let v2 = e.label.vertex_action(v);
            uf.union(slot(e.a, v), slot(e.b, v2));
            touched[slot(e.a, v)] = true;
            touched[slot(e.b, v2)] = true;
        }
    }
    let mut by_root: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for s in 0..graph.node_count * j {
        if touched[s] {
            let r = uf.find(s);
            by_root.entry(r).or_default().push((s / j, s % j));
        }
    }
    let mut out: Vec<ContactCluster> = by_root.into_values().map(|slots| ContactCluster { slots }).collect();
    out.sort_by(|a, b| a.slots.cmp(&b.slots));
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LevelStats {
    pub node_count: usize,
    pub ell_count: usize,
    pub star_count: usize,
    pub point_count: usize,
    pub max_degree: usize,
    pub max_point_multiplicity: usize,
}

pub fn level_stats(graph: &LevelGraph, j: usize) -> LevelStats {
    let star_count = graph.ell_edges.len() + graph.point_edges.iter().filter(|e| e.in_k).count();
    let max_degree = (0..graph.node_count).map(|v| graph.neighbors(v, EdgeKind::Star).len()).max().unwrap_or(0);
    let max_point_multiplicity = contact_clusters(graph, j).iter().map(|c| c.cells().len()).max().unwrap_or(1);
    LevelStats {
        node_count: graph.node_count,
        ell_count: graph.ell_edges.len(),
        star_count,
        point_count: graph.point_edges.len(),
        max_degree,
        max_point_multiplicity,
    }
}
