//! Exact combinatorics and p-energy scaling for symmetric self-similar sets
//! built from regular polygons.
//!
//! A system is a finite family of contractions `f_s(z) = r·φ_s(z) + c_s` of a
//! regular `J`-gon together with a symmetry group `G`. The crate validates the
//! structural axioms with exact cyclotomic arithmetic, builds the word graphs
//! of every level, analyses boundary and contact combinatorics, dispatches the
//! sufficient conditions for conductive homogeneity, and estimates discrete
//! p-conductance scaling numerically.

pub mod algebra;
pub mod boundary;
pub mod cli;
pub mod conditions;
pub mod energy;
pub mod fixtures;
pub mod geometry;
pub mod paths;
pub mod render;
pub mod system;
pub mod wordtree;
