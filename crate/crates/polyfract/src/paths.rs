//! Paths in the word graphs: projection onto coarser levels, concatenation,
//! folding along ell edges, the word sets `H`, alternation of boundary traces
//! and random sampling of corridor paths.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::CycloNumber;
use crate::boundary::{essential_boundary, plain_boundary, SubsetZJ, TraceTable};
use crate::conditions::m_j;
use crate::geometry::{mod_distance, DihedralElement, GeometryError};
use crate::system::{group_action_on_words, ValidatedSystem};
use crate::wordtree::{
    build_levels, gamma_ball, index_of, prefix_index, suffix_index, word_of, EdgeKind, LevelGraph, WordTreeError,
};

/// Attempts allowed per sampled path before giving up.
pub const DEFAULT_ATTEMPT_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("level {0} is not available")]
    BadLevel(usize),
    #[error("path is empty")]
    Empty,
    #[error("nodes {0} and {1} are not adjacent")]
    NotAPath(usize, usize),
    #[error("paths cannot be joined: {0} and {1} are neither equal nor adjacent")]
    NotJoinable(usize, usize),
    #[error("the projected path is not an ell path")]
    ProjectionNotEll,
    #[error("invalid indices: {0}")]
    BadIndices(String),
    #[error("no corridor path found after {0} attempts")]
    NoneFound(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    WordTree(#[from] WordTreeError),
}

/// A walk in the level-`level` word graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathSeq {
    pub level: usize,
    pub nodes: Vec<usize>,
    pub kind: EdgeKind,
}

impl PathSeq {
    /// Validate adjacency against `graph`.
    pub fn new(graph: &LevelGraph, nodes: Vec<usize>, kind: EdgeKind) -> Result<Self, PathError> {
        if nodes.is_empty() {
            return Err(PathError::Empty);
        }
        for w in nodes.windows(2) {
            if !graph.is_adjacent(w[0], w[1], kind) {
                return Err(PathError::NotAPath(w[0], w[1]));
            }
        }
        Ok(PathSeq { level: graph.level, nodes, kind })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first(&self) -> usize {
        self.nodes[0]
    }

    pub fn last(&self) -> usize {
        *self.nodes.last().expect("paths are nonempty")
    }

    pub fn reversed(&self) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        PathSeq { level: self.level, nodes, kind: self.kind }
    }

    /// Distinct nodes, sorted.
    pub fn node_set(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.nodes.iter().copied().collect();
        set.into_iter().collect()
    }
}

/// `[γ]_k` together with the blocks `σ_k(γ)_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathBlocks {
    pub k: usize,
    /// Level-`k` nodes visited, consecutive entries distinct.
    pub projection: Vec<usize>,
    /// Suffix paths at level `n - k`.
    pub blocks: Vec<PathSeq>,
    /// Exclusive end offset of each block in the original path.
    pub breakpoints: Vec<usize>,
}

/// Split a path into maximal runs with a common length-`k` prefix.
pub fn decompose(gamma: &PathSeq, k: usize, alphabet: usize) -> Result<PathBlocks, PathError> {
    let n = gamma.level;
    if k > n {
        return Err(PathError::BadLevel(k));
    }
    let mut projection = Vec::new();
    let mut blocks: Vec<PathSeq> = Vec::new();
    let mut breakpoints = Vec::new();
    for (pos, &v) in gamma.nodes.iter().enumerate() {
        let head = prefix_index(v, n, k, alphabet);
        let tail = suffix_index(v, n, k, alphabet);
        if projection.last() != Some(&head) {
            if !projection.is_empty() {
                breakpoints.push(pos);
            }
            projection.push(head);
            blocks.push(PathSeq { level: n - k, nodes: Vec::new(), kind: gamma.kind });
        }
        blocks.last_mut().expect("a block was opened").nodes.push(tail);
    }
    breakpoints.push(gamma.len());
    Ok(PathBlocks { k, projection, blocks, breakpoints })
}

/// Inverse of [`decompose`].
pub fn reassemble(blocks: &PathBlocks, alphabet: usize) -> PathSeq {
    let m = blocks.blocks.first().map(|b| b.level).unwrap_or(0);
    let scale = alphabet.pow(m as u32);
    let nodes = blocks
        .projection
        .iter()
        .zip(&blocks.blocks)
        .flat_map(|(&head, b)| b.nodes.iter().map(move |&t| head * scale + t))
        .collect();
    PathSeq { level: blocks.k + m, nodes, kind: blocks.blocks.first().map(|b| b.kind).unwrap_or(EdgeKind::Star) }
}

/// `γ_1 ∨ γ_2`: the shared node appears once when the paths meet end to start.
pub fn concat(graph: &LevelGraph, g1: &PathSeq, g2: &PathSeq) -> Result<PathSeq, PathError> {
    let (a, b) = (g1.last(), g2.first());
    let mut nodes = g1.nodes.clone();
    let kind = if a == b {
        nodes.extend_from_slice(&g2.nodes[1..]);
        join_kind(g1.kind, g2.kind, EdgeKind::Ell)
    } else if graph.is_adjacent(a, b, EdgeKind::Ell) {
        nodes.extend_from_slice(&g2.nodes);
        join_kind(g1.kind, g2.kind, EdgeKind::Ell)
    } else if graph.is_adjacent(a, b, EdgeKind::Star) {
        nodes.extend_from_slice(&g2.nodes);
        EdgeKind::Star
    } else {
        return Err(PathError::NotJoinable(a, b));
    };
    Ok(PathSeq { level: g1.level, nodes, kind })
}

fn join_kind(a: EdgeKind, b: EdgeKind, c: EdgeKind) -> EdgeKind {
    if a == EdgeKind::Ell && b == EdgeKind::Ell && c == EdgeKind::Ell {
        EdgeKind::Ell
    } else {
        EdgeKind::Star
    }
}

fn level_of(levels: &[LevelGraph], l: usize) -> Result<&LevelGraph, PathError> {
    if l == 0 {
        return Err(PathError::BadLevel(0));
    }
    levels.get(l - 1).filter(|g| g.level == l).ok_or(PathError::BadLevel(l))
}

/// `g_{w,v} = f_w⁻¹ ∘ R_{w,v} ∘ f_v` for an ell edge of `graph`.
pub fn reflection_element(graph: &LevelGraph, w: usize, v: usize) -> Option<DihedralElement> {
    let e = graph.ell_edge(w, v)?;
    // the stored label carries Q_{a u} to Q_{b label(u)}, i.e. it is g_{b,a}
    Some(if e.a == w { e.label.inverse() } else { e.label })
}

fn apply_to_node(sys: &ValidatedSystem, g: &DihedralElement, node: usize, level: usize) -> Result<usize, PathError> {
    let n = sys.cell_count();
    let word = word_of(node, level, n);
    Ok(index_of(&group_action_on_words(sys, g, &word)?, n))
}

/// The `k`-folding of a path whose level-`k` projection is an ell path.
///
/// `levels[l - 1]` must be the level-`l` graph for every level used.
pub fn fold(sys: &ValidatedSystem, levels: &[LevelGraph], gamma: &PathSeq, k: usize) -> Result<PathSeq, PathError> {
    let n = sys.cell_count();
    let blocks = decompose(gamma, k, n)?;
    let low = gamma.level - k;
    if blocks.blocks.len() == 1 {
        return Ok(blocks.blocks[0].clone());
    }
    let coarse = level_of(levels, k)?;
    let fine = level_of(levels, low)?;
    let mut g = DihedralElement::identity(sys.j);
    let mut out = blocks.blocks[0].clone();
    for idx in 1..blocks.projection.len() {
        let (w, v) = (blocks.projection[idx - 1], blocks.projection[idx]);
        let step = reflection_element(coarse, w, v).ok_or(PathError::ProjectionNotEll)?;
        g = g.compose(&step);
        let moved = blocks.blocks[idx]
            .nodes
            .iter()
            .map(|&u| apply_to_node(sys, &g, u, low))
            .collect::<Result<Vec<_>, _>>()?;
        let piece = PathSeq { level: low, nodes: moved, kind: blocks.blocks[idx].kind };
        out = concat(fine, &out, &piece)?;
    }
    out.kind = EdgeKind::Star;
    Ok(out)
}

/// `σ_n(w)`: drop the first `n` letters, or the empty word.
fn drop_prefix(word: &[usize], n: usize) -> &[usize] {
    if word.len() > n {
        &word[n..]
    } else {
        &[]
    }
}

/// `H_{n1,n2,m}(u)` as sorted node indices at level `m`.
pub fn h_set(sys: &ValidatedSystem, u: &[usize], n1: usize, n2: usize, m: usize) -> Result<Vec<usize>, PathError> {
    if n1 > u.len() {
        return Err(PathError::BadIndices(format!("n1 = {n1} exceeds |u| = {}", u.len())));
    }
    let n = sys.cell_count();
    let l = m as i64 - n2 as i64 - u.len() as i64 + n1 as i64;
    let tail = drop_prefix(u, n1);
    let mut out = BTreeSet::new();
    for g in &sys.group.elements {
        let moved = group_action_on_words(sys, g, tail)?;
        for v in 0..n.pow(n2 as u32) {
            let mut word = word_of(v, n2, n);
            word.extend_from_slice(&moved);
            if l >= 0 {
                let base = index_of(&word, n) * n.pow(l as u32);
                out.extend(base..base + n.pow(l as u32));
            } else {
                word.truncate(m);
                out.insert(index_of(&word, n));
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// Image of a node set under every element of `G`, as level-`level` indices.
pub fn group_orbit_of_set(sys: &ValidatedSystem, a: &[usize], level: usize) -> Result<Vec<usize>, PathError> {
    let mut out = BTreeSet::new();
    for g in &sys.group.elements {
        for &w in a {
            out.insert(apply_to_node(sys, g, w, level)?);
        }
    }
    Ok(out.into_iter().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternation {
    Alternated,
    NotAlternated,
    Unknown,
}

/// A piece of `K(A) ∩ ∂Q` in the cyclic boundary coordinate `t ∈ [0, J)`,
/// where side `b_i` occupies `[i, i + 1]`.
#[derive(Clone, Debug)]
struct BoundaryPiece {
    lo: CycloNumber,
    hi: CycloNumber,
    /// A point known to lie in `K`; otherwise only some point of the segment does.
    point: bool,
    cell: usize,
}

fn cmp_real(a: &CycloNumber, b: &CycloNumber) -> Ordering {
    a.sub(b).re_sign().cmp(&0)
}

fn side_parameter(sys: &ValidatedSystem, z: &CycloNumber, side: usize) -> CycloNumber {
    let j = sys.j;
    let start = &sys.polygon.vertices[(side + j - 1) % j];
    let end = &sys.polygon.vertices[side];
    let dir = end.sub(start);
    let num = z.sub(start).mul(&dir.conj()).re();
    let den = dir.mul(&dir.conj()).re();
    let lambda = num.div(&den).expect("polygon sides have positive length");
    CycloNumber::from_ratio(sys.polygon.order(), side as i64, 1).add(&lambda)
}

fn boundary_pieces(sys: &ValidatedSystem, table: &TraceTable, a: &[usize], level: usize) -> Vec<BoundaryPiece> {
    let j = sys.j;
    let n = sys.cell_count();
    let mut out = Vec::new();
    for &w in a {
        let map = sys.word_map(&word_of(w, level, n));
        let corners = map.image_vertices(&sys.polygon);
        for k in 0..j {
            if let Some(side) = table.edge_side(w, k) {
                let p = side_parameter(sys, &corners[(k + j - 1) % j], side);
                let q = side_parameter(sys, &corners[k], side);
                let (lo, hi) = if cmp_real(&p, &q) == Ordering::Less { (p, q) } else { (q, p) };
                out.push(BoundaryPiece { lo, hi, point: false, cell: w });
            }
        }
        for c in 0..j {
            if !sys.vertex_in_k[c] {
                continue;
            }
            let sides = table.vertex_sides(w, c);
            if let Some(&side) = sides.first() {
                let t = side_parameter(sys, &corners[c], side);
                out.push(BoundaryPiece { lo: t.clone(), hi: t, point: true, cell: w });
            }
        }
    }
    // identify t = J with t = 0
    let full = CycloNumber::from_ratio(sys.polygon.order(), j as i64, 1);
    for p in out.iter_mut() {
        if p.point && cmp_real(&p.lo, &full) == Ordering::Equal {
            p.lo = CycloNumber::zero(sys.polygon.order());
            p.hi = CycloNumber::zero(sys.polygon.order());
        }
    }
    out
}

fn pieces_disjoint(a: &BoundaryPiece, b: &BoundaryPiece) -> bool {
    cmp_real(&a.hi, &b.lo) == Ordering::Less || cmp_real(&b.hi, &a.lo) == Ordering::Less
}

/// Certificate check for alternation of two node sets at `level`.
pub fn alternated(sys: &ValidatedSystem, a: &[usize], b: &[usize], level: usize) -> Alternation {
    let table = TraceTable::for_level(sys, level);
    let pa = boundary_pieces(sys, &table, a, level);
    let pb = boundary_pieces(sys, &table, b, level);
    if pa.is_empty() || pb.is_empty() {
        return Alternation::NotAlternated;
    }
    // a common point of both traces
    for x in &pa {
        for y in &pb {
            let same_point = x.point && y.point && cmp_real(&x.lo, &y.lo) == Ordering::Equal;
            let same_segment = !x.point
                && !y.point
                && x.cell == y.cell
                && cmp_real(&x.lo, &y.lo) == Ordering::Equal
                && cmp_real(&x.hi, &y.hi) == Ordering::Equal;
            if same_point || same_segment {
                return Alternation::Alternated;
            }
        }
    }
    if pa.iter().any(|x| pb.iter().any(|y| !pieces_disjoint(x, y))) {
        return Alternation::Unknown;
    }
    let mut tagged: Vec<(&BoundaryPiece, bool)> = pa.iter().map(|p| (p, true)).chain(pb.iter().map(|p| (p, false))).collect();
    tagged.sort_by(|x, y| cmp_real(&x.0.lo, &y.0.lo));
    let labels: Vec<bool> = tagged.iter().map(|t| t.1).collect();
    let changes = (0..labels.len()).filter(|&i| labels[i] != labels[(i + 1) % labels.len()]).count();
    if changes >= 4 {
        Alternation::Alternated
    } else {
        Alternation::NotAlternated
    }
}

/// A member of `C_{M,m}(w)` with its two admissible endpoints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CorridorPath {
    pub start: usize,
    pub interior: PathSeq,
    pub end: usize,
}

impl CorridorPath {
    /// `(γ(0), γ(1), …, γ(k), γ(k+1))`.
    pub fn full(&self) -> PathSeq {
        let mut nodes = vec![self.start];
        nodes.extend_from_slice(&self.interior.nodes);
        nodes.push(self.end);
        PathSeq { level: self.interior.level, nodes, kind: self.interior.kind }
    }
}

/// Random members of `C_{M,m}(w)` for a level-`n` node `w`, sampled as walks
/// in the level-`n + m` graph. Deterministic for a given seed.
pub fn sample_corridor_paths_on(
    coarse: &LevelGraph,
    fine: &LevelGraph,
    w: usize,
    radius: usize,
    count: usize,
    seed: u64,
    kind: EdgeKind,
) -> Result<Vec<CorridorPath>, PathError> {
    let n = coarse.level;
    let m = fine.level - n;
    let alphabet = fine.alphabet;
    let ball = gamma_ball(coarse, w, radius, EdgeKind::Star)?;
    if ball.len() == coarse.node_count {
        return Err(PathError::NoneFound(0));
    }
    let zone = |v: usize| -> u8 {
        let head = prefix_index(v, fine.level, n, alphabet);
        if head == w {
            0
        } else if ball.binary_search(&head).is_ok() {
            1
        } else {
            2
        }
    };
    let scale = alphabet.pow(m as u32);
    let starts: Vec<usize> = (w * scale..(w + 1) * scale)
        .filter(|&v| fine.neighbors(v, kind).iter().any(|&u| zone(u) == 1))
        .collect();
    if starts.is_empty() {
        return Err(PathError::NoneFound(0));
    }
    let corridor_size = ball.len().saturating_sub(1) * scale;
    let max_steps = 4 * corridor_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        if attempts >= DEFAULT_ATTEMPT_CAP * count.max(1) {
            if out.is_empty() {
                return Err(PathError::NoneFound(attempts));
            }
            break;
        }
        attempts += 1;
        let start = *starts.choose(&mut rng).expect("nonempty");
        let first: Vec<usize> = fine.neighbors(start, kind).iter().copied().filter(|&u| zone(u) == 1).collect();
        let mut cur = *first.choose(&mut rng).expect("start has a corridor neighbour");
        let mut nodes = vec![cur];
        let mut end = None;
        for _ in 0..max_steps {
            let exits: Vec<usize> = fine.neighbors(cur, kind).iter().copied().filter(|&u| zone(u) == 2).collect();
            if !exits.is_empty() && rng.gen_bool(0.5) {
                end = Some(*exits.choose(&mut rng).expect("nonempty"));
                break;
            }
            let inner: Vec<usize> = fine.neighbors(cur, kind).iter().copied().filter(|&u| zone(u) == 1).collect();
            match inner.choose(&mut rng) {
                Some(&next) => {
                    cur = next;
                    nodes.push(cur);
                }
                None => break,
            }
        }
        if let Some(end) = end {
            out.push(CorridorPath { start, interior: PathSeq { level: fine.level, nodes, kind }, end });
        }
    }
    Ok(out)
}

/// [`sample_corridor_paths_on`] building the graphs from the system.
pub fn sample_corridor_paths(
    sys: &ValidatedSystem,
    w: &[usize],
    radius: usize,
    m: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<CorridorPath>, PathError> {
    let n = w.len();
    if n == 0 {
        return Err(PathError::BadIndices("w must be a nonempty word".into()));
    }
    let levels = build_levels(sys, n + m)?;
    let coarse = level_of(&levels, n)?;
    let fine = level_of(&levels, n + m)?;
    sample_corridor_paths_on(coarse, fine, index_of(w, sys.cell_count()), radius, count, seed, EdgeKind::Star)
}

/// Result of folding the interior of a long path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FoldedTrace {
    pub folded: PathSeq,
    pub boundary: SubsetZJ,
    /// `∂ ∩ (Z_J)^e`.
    pub essential_trace: SubsetZJ,
    /// At least three essential sides, or an opposite pair for even `J`.
    pub satisfied: bool,
}

/// Fold the interior blocks `2..l-1` of a path at level `n + m` along its
/// level-`n` projection and read off the boundary trace.
///
/// Returns `None` when the path does not meet the hypothesis: the projection
/// must be an ell path whose endpoints are more than `M_J` star steps apart.
pub fn interior_fold_trace(
    sys: &ValidatedSystem,
    levels: &[LevelGraph],
    gamma: &PathSeq,
    n: usize,
) -> Result<Option<FoldedTrace>, PathError> {
    let alphabet = sys.cell_count();
    let blocks = decompose(gamma, n, alphabet)?;
    let coarse = level_of(levels, n)?;
    let proj = &blocks.projection;
    if proj.windows(2).any(|p| !coarse.is_adjacent(p[0], p[1], EdgeKind::Ell)) {
        return Ok(None);
    }
    let ball = gamma_ball(coarse, proj[0], m_j(sys.j), EdgeKind::Star)?;
    if ball.binary_search(proj.last().expect("nonempty")).is_ok() || proj.len() < 3 {
        return Ok(None);
    }
    let inner = PathBlocks {
        k: n,
        projection: proj[1..proj.len() - 1].to_vec(),
        blocks: blocks.blocks[1..proj.len() - 1].to_vec(),
        breakpoints: Vec::new(),
    };
    let hat = reassemble(&inner, alphabet);
    let folded = fold(sys, levels, &hat, n)?;
    let m = folded.level;
    let table = TraceTable::for_level(sys, m);
    let boundary = plain_boundary(&table, &folded.node_set(), &sys.vertex_in_k);
    let essential_trace = boundary.intersection(&essential_boundary(sys));
    let ids: Vec<usize> = essential_trace.iter().collect();
    let opposite = sys.j.is_multiple_of(2) && ids.len() == 2 && mod_distance(sys.j, ids[0], ids[1]) == sys.j / 2;
    let satisfied = ids.len() >= 3 || opposite;
    Ok(Some(FoldedTrace { folded, boundary, essential_trace, satisfied }))
}
