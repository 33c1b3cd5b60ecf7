//! The regular `J`-gon, dihedral symmetries, contraction maps and exact
//! contact classification between placed copies of the polygon.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{field_order, midpoint, vertex, CycloNumber};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("J must be at least 3, got {0}")]
    JTooSmall(usize),
    #[error("element {0} does not preserve the polygon")]
    NotInDJ(DihedralElement),
    #[error("rotation order {k} does not divide J = {j}")]
    BadRotationOrder { k: usize, j: usize },
    #[error("dihedral_v requires even J, got {0}")]
    DihedralVOddJ(usize),
    #[error("element {0} belongs to a different polygon size")]
    SizeMismatch(DihedralElement),
}

/// Cyclic distance on `Z_J`.
pub fn mod_distance(j: usize, a: usize, b: usize) -> usize {
    let d = (a as i64 - b as i64).rem_euclid(j as i64) as usize;
    d.min(j - d)
}

/// The regular `J`-gon with incircle radius one.
#[derive(Clone, Debug)]
pub struct Polygon {
    pub j: usize,
    pub vertices: Vec<CycloNumber>,
    pub midpoints: Vec<CycloNumber>,
}

pub fn regular_polygon(j: usize) -> Result<Polygon, GeometryError> {
    if j < 3 {
        return Err(GeometryError::JTooSmall(j));
    }
    Ok(Polygon {
        j,
        vertices: (0..j).map(|k| vertex(j, k)).collect(),
        midpoints: (0..j).map(|k| midpoint(j, k)).collect(),
    })
}

impl Polygon {
    pub fn order(&self) -> u32 {
        field_order(self.j)
    }

    /// Edge `b_k` as the pair of its endpoints `(p_{k-1}, p_k)`.
    pub fn edge(&self, k: usize) -> (&CycloNumber, &CycloNumber) {
        (&self.vertices[(k + self.j - 1) % self.j], &self.vertices[k])
    }
}

/// `z ↦ ω^h z` or `z ↦ ω^h z̄` with `ω = e^{iπ/J}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DihedralElement {
    pub j: usize,
    pub half_turns: usize,
    pub conj: bool,
}

impl fmt::Display for DihedralElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.conj {
            write!(f, "reflect(h={}, J={})", self.half_turns, self.j)
        } else {
            write!(f, "rotate(h={}, J={})", self.half_turns, self.j)
        }
    }
}

impl DihedralElement {
    pub fn new(j: usize, half_turns: i64, conj: bool) -> Self {
        DihedralElement { j, half_turns: half_turns.rem_euclid(2 * j as i64) as usize, conj }
    }

    pub fn identity(j: usize) -> Self {
        Self::new(j, 0, false)
    }

    /// Rotation by `2πt/J`.
    pub fn rotation(j: usize, t: i64) -> Self {
        Self::new(j, 2 * t, false)
    }

    /// Reflection in the line through the origin parallel to edge `b_i`.
    pub fn reflection_parallel_to_edge(j: usize, i: usize) -> Self {
        Self::new(j, 4 * i as i64, true)
    }

    /// Reflection in the line through the origin and the midpoint `q_i`.
    pub fn reflection_through_midpoint(j: usize, i: usize) -> Self {
        Self::new(j, j as i64 + 4 * i as i64, true)
    }

    /// Reflection in the line through the origin and the vertex `p_i`.
    pub fn reflection_through_vertex(j: usize, i: usize) -> Self {
        Self::new(j, 2 - j as i64 + 4 * i as i64, true)
    }

    pub fn is_identity(&self) -> bool {
        self.half_turns == 0 && !self.conj
    }

    pub fn compose(&self, other: &Self) -> Self {
        debug_assert_eq!(self.j, other.j);
        let h2 = other.half_turns as i64;
        let h = self.half_turns as i64 + if self.conj { -h2 } else { h2 };
        Self::new(self.j, h, self.conj ^ other.conj)
    }

    pub fn inverse(&self) -> Self {
        if self.conj {
            *self
        } else {
            Self::new(self.j, -(self.half_turns as i64), false)
        }
    }

    /// Membership in `D_J`, the symmetry group of the polygon.
    pub fn in_dj(&self) -> bool {
        if self.conj {
            self.half_turns % 2 == self.j % 2
        } else {
            self.half_turns.is_multiple_of(2)
        }
    }

    /// Membership in `D_J^*`: equal to `D_J` for even `J`, all of `D_{2J}` for odd `J`.
    pub fn in_dj_star(&self) -> bool {
        self.j % 2 == 1 || self.in_dj()
    }

    pub fn apply(&self, z: &CycloNumber) -> CycloNumber {
        let w = CycloNumber::omega_power(self.j, self.half_turns as i64);
        if self.conj {
            w.mul(&z.conj())
        } else {
            w.mul(z)
        }
    }

    /// Vertex permutation `p_k ↦ p_{g(k)}`; only meaningful inside `D_J`.
    pub fn vertex_action(&self, k: usize) -> usize {
        debug_assert!(self.in_dj());
        let j = self.j as i64;
        let h = self.half_turns as i64;
        let k = k as i64;
        let img = if self.conj { (h + j - 2) / 2 - k } else { h / 2 + k };
        img.rem_euclid(j) as usize
    }

    /// Boundary index permutation `b_k ↦ b_{g_*(k)}`; only meaningful inside `D_J`.
    pub fn edge_action(&self, k: usize) -> usize {
        debug_assert!(self.in_dj());
        let j = self.j as i64;
        let h = self.half_turns as i64;
        let k = k as i64;
        let img = if self.conj { (h + j) / 2 - k } else { h / 2 + k };
        img.rem_euclid(j) as usize
    }
}

/// The permutation `g_*` of `Z_J` induced on boundary segments.
pub fn boundary_index_action(g: &DihedralElement) -> Result<Vec<usize>, GeometryError> {
    if !g.in_dj() {
        return Err(GeometryError::NotInDJ(*g));
    }
    Ok((0..g.j).map(|k| g.edge_action(k)).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupKind {
    Trivial,
    Rot { k: usize },
    Dihedral { k: usize },
    DihedralV,
    Explicit,
}

/// A finite subgroup of `D_J`, stored as a sorted element list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetryGroup {
    pub j: usize,
    pub kind: GroupKind,
    pub elements: Vec<DihedralElement>,
}

fn closure(j: usize, gens: &[DihedralElement]) -> Vec<DihedralElement> {
    let mut set: BTreeSet<DihedralElement> = BTreeSet::new();
    set.insert(DihedralElement::identity(j));
    let mut frontier: Vec<DihedralElement> = vec![DihedralElement::identity(j)];
    while let Some(x) = frontier.pop() {
        for g in gens {
            let y = g.compose(&x);
            if set.insert(y) {
                frontier.push(y);
            }
        }
    }
    set.into_iter().collect()
}

impl SymmetryGroup {
    pub fn trivial(j: usize) -> Self {
        SymmetryGroup { j, kind: GroupKind::Trivial, elements: vec![DihedralElement::identity(j)] }
    }

    /// Cyclic group of rotations by multiples of `2π/k`.
    pub fn rot(j: usize, k: usize) -> Result<Self, GeometryError> {
        if k == 0 || !j.is_multiple_of(k) {
            return Err(GeometryError::BadRotationOrder { k, j });
        }
        let gen = DihedralElement::rotation(j, (j / k) as i64);
        Ok(SymmetryGroup { j, kind: GroupKind::Rot { k }, elements: closure(j, &[gen]) })
    }

    /// `Rot_k` together with reflections in the lines through edge midpoints.
    pub fn dihedral(j: usize, k: usize) -> Result<Self, GeometryError> {
        if k == 0 || !j.is_multiple_of(k) {
            return Err(GeometryError::BadRotationOrder { k, j });
        }
        let gens = [DihedralElement::rotation(j, (j / k) as i64), DihedralElement::reflection_through_midpoint(j, 0)];
        Ok(SymmetryGroup { j, kind: GroupKind::Dihedral { k }, elements: closure(j, &gens) })
    }

    /// `Rot_{J/2}` together with reflections in the lines `p_i p_{i+J/2}`.
    pub fn dihedral_v(j: usize) -> Result<Self, GeometryError> {
        if !j.is_multiple_of(2) {
            return Err(GeometryError::DihedralVOddJ(j));
        }
        let gens = [DihedralElement::rotation(j, 2), DihedralElement::reflection_through_vertex(j, 0)];
        Ok(SymmetryGroup { j, kind: GroupKind::DihedralV, elements: closure(j, &gens) })
    }

    /// Closure of an explicit generator list; every element must preserve the polygon.
    pub fn explicit(j: usize, gens: &[DihedralElement]) -> Result<Self, GeometryError> {
        for g in gens {
            if g.j != j {
                return Err(GeometryError::SizeMismatch(*g));
            }
            if !g.in_dj() {
                return Err(GeometryError::NotInDJ(*g));
            }
        }
        Ok(SymmetryGroup { j, kind: GroupKind::Explicit, elements: closure(j, gens) })
    }

    /// The full group `D_J`.
    pub fn full(j: usize) -> Self {
        Self::dihedral(j, j).expect("J divides J")
    }

    pub fn contains(&self, g: &DihedralElement) -> bool {
        self.elements.binary_search(g).is_ok()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }

    /// Orbit `G(i)` of a boundary index.
    pub fn orbit(&self, i: usize) -> BTreeSet<usize> {
        self.elements.iter().map(|g| g.edge_action(i)).collect()
    }

    /// All orbits on `Z_J`, ordered by smallest element.
    pub fn orbits(&self) -> Vec<BTreeSet<usize>> {
        let mut seen = vec![false; self.j];
        let mut out = Vec::new();
        for i in 0..self.j {
            if !seen[i] {
                let o = self.orbit(i);
                for &x in &o {
                    seen[x] = true;
                }
                out.push(o);
            }
        }
        out
    }

    /// Whether the group is closed under composition and inverses.
    pub fn is_closed(&self) -> bool {
        self.elements.iter().all(|a| {
            self.contains(&a.inverse()) && self.elements.iter().all(|b| self.contains(&a.compose(b)))
        })
    }
}

/// `f(z) = r·φ(z) + c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contraction {
    pub ratio: CycloNumber,
    pub phi: DihedralElement,
    pub center: CycloNumber,
}

impl Contraction {
    pub fn identity(j: usize) -> Self {
        let order = field_order(j);
        Contraction { ratio: CycloNumber::one(order), phi: DihedralElement::identity(j), center: CycloNumber::zero(order) }
    }

    pub fn apply(&self, z: &CycloNumber) -> CycloNumber {
        self.ratio.mul(&self.phi.apply(z)).add(&self.center)
    }

    pub fn apply_inverse(&self, z: &CycloNumber) -> CycloNumber {
        let shifted = z.sub(&self.center).div(&self.ratio).expect("contraction ratio is nonzero");
        self.phi.inverse().apply(&shifted)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Contraction {
            ratio: self.ratio.mul(&other.ratio),
            phi: self.phi.compose(&other.phi),
            center: self.apply(&other.center),
        }
    }

    pub fn image_vertices(&self, poly: &Polygon) -> Vec<CycloNumber> {
        poly.vertices.iter().map(|v| self.apply(v)).collect()
    }
}

/// Outcome of intersecting two placed polygons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContactClass {
    Disjoint,
    /// Edge `i` of the first copy equals edge `j` of the second as point sets.
    Edge { i: usize, j: usize },
    /// Vertex `i` of the first copy equals vertex `j` of the second and nothing else meets.
    Vertex { i: usize, j: usize },
    Overlap,
}

impl ContactClass {
    pub fn swapped(self) -> Self {
        match self {
            ContactClass::Edge { i, j } => ContactClass::Edge { i: j, j: i },
            ContactClass::Vertex { i, j } => ContactClass::Vertex { i: j, j: i },
            other => other,
        }
    }

    pub fn intersects(&self) -> bool {
        !matches!(self, ContactClass::Disjoint)
    }
}

/// A placed polygon with its outward normals and support values.
struct Placed {
    vertices: Vec<CycloNumber>,
    normals_conj: Vec<CycloNumber>,
}

impl Placed {
    fn new(f: &Contraction, poly: &Polygon) -> Self {
        Placed {
            vertices: f.image_vertices(poly),
            normals_conj: poly.midpoints.iter().map(|q| f.phi.apply(q).conj()).collect(),
        }
    }
}

enum AxisOutcome {
    Separated,
    Touching(ContactClass),
    Crossing,
}

/// Test the supporting line of edge `k` of `a` against all vertices of `b`.
fn axis_test(a: &Placed, k: usize, b: &Placed) -> AxisOutcome {
    let j = a.vertices.len();
    let anchor = &a.vertices[k];
    let mut touching = Vec::new();
    for (t, v) in b.vertices.iter().enumerate() {
        let s = a.normals_conj[k].mul(&v.sub(anchor)).re_sign();
        if s < 0 {
            return AxisOutcome::Crossing;
        }
        if s == 0 {
            touching.push(t);
        }
    }
    if touching.is_empty() {
        return AxisOutcome::Separated;
    }
    let start = &a.vertices[(k + j - 1) % j];
    let tau = anchor.sub(start);
    let tau_conj = tau.conj();
    let param = |x: &CycloNumber| tau_conj.mul(&x.sub(start)).re();
    let len = tau_conj.mul(&tau).re();
    let cmp = |x: &CycloNumber, y: &CycloNumber| x.sub(y).re_sign();
    let lam: Vec<CycloNumber> = touching.iter().map(|&t| param(&b.vertices[t])).collect();
    let zero = CycloNumber::zero(len.order());
    match touching.len() {
        1 => {
            let l = &lam[0];
            let lo = cmp(l, &zero);
            let hi = cmp(l, &len);
            if lo < 0 || hi > 0 {
                AxisOutcome::Touching(ContactClass::Disjoint)
            } else if lo == 0 {
                AxisOutcome::Touching(ContactClass::Vertex { i: (k + j - 1) % j, j: touching[0] })
            } else if hi == 0 {
                AxisOutcome::Touching(ContactClass::Vertex { i: k, j: touching[0] })
            } else {
                AxisOutcome::Touching(ContactClass::Overlap)
            }
        }
        2 => {
            let (t0, t1) = (touching[0], touching[1]);
            let (l0, l1) = (&lam[0], &lam[1]);
            // order the touching pair along the edge direction
            let (tmin, lmin, tmax, lmax) = if cmp(l0, l1) < 0 { (t0, l0, t1, l1) } else { (t1, l1, t0, l0) };
            let min_vs_len = cmp(lmin, &len);
            let max_vs_zero = cmp(lmax, &zero);
            if min_vs_len > 0 || max_vs_zero < 0 {
                return AxisOutcome::Touching(ContactClass::Disjoint);
            }
            if min_vs_len == 0 {
                return AxisOutcome::Touching(ContactClass::Vertex { i: k, j: tmin });
            }
            if max_vs_zero == 0 {
                return AxisOutcome::Touching(ContactClass::Vertex { i: (k + j - 1) % j, j: tmax });
            }
            if cmp(lmin, &zero) == 0 && cmp(lmax, &len) == 0 {
                // the two touching vertices are adjacent, so they span one edge of b
                let jb = b.vertices.len();
                let edge = if (t0 + 1) % jb == t1 { t1 } else { t0 };
                return AxisOutcome::Touching(ContactClass::Edge { i: k, j: edge });
            }
            AxisOutcome::Touching(ContactClass::Overlap)
        }
        _ => AxisOutcome::Touching(ContactClass::Overlap),
    }
}

/// Exact classification of `f1(Q) ∩ f2(Q)`.
pub fn classify_contact(f1: &Contraction, f2: &Contraction, poly: &Polygon) -> ContactClass {
    let a = Placed::new(f1, poly);
    let b = Placed::new(f2, poly);
    for k in 0..poly.j {
        match axis_test(&a, k, &b) {
            AxisOutcome::Separated => return ContactClass::Disjoint,
            AxisOutcome::Touching(c) => return c,
            AxisOutcome::Crossing => {}
        }
    }
    for k in 0..poly.j {
        match axis_test(&b, k, &a) {
            AxisOutcome::Separated => return ContactClass::Disjoint,
            AxisOutcome::Touching(c) => return c.swapped(),
            AxisOutcome::Crossing => {}
        }
    }
    ContactClass::Overlap
}

/// Whether `f(Q)` lies inside `Q`: every image vertex satisfies every supporting inequality.
pub fn contained_in_polygon(f: &Contraction, poly: &Polygon) -> bool {
    let verts = f.image_vertices(poly);
    verts.iter().all(|v| point_in_polygon(v, poly))
}

/// Closed containment of a point in `Q`.
pub fn point_in_polygon(z: &CycloNumber, poly: &Polygon) -> bool {
    let one = CycloNumber::one(poly.order());
    poly.midpoints.iter().all(|q| one.sub(&q.conj().mul(z)).re_sign() >= 0)
}

/// Whether a point lies on the supporting line of `b_i` (`Re(q̄_i z) = 1`).
pub fn on_edge_line(z: &CycloNumber, poly: &Polygon, i: usize) -> bool {
    let one = CycloNumber::one(poly.order());
    one.sub(&poly.midpoints[i].conj().mul(z)).re().is_zero()
}

/// Circumradius of the polygon as a float, used for coarse distance filters.
pub fn approx_radius(j: usize) -> f64 {
    1.0 / (std::f64::consts::PI / j as f64).cos()
}
