//! Deterministic SVG drawings of level-`m` cells with optional overlays.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::boundary::{components, essential_boundary, SubsetZJ, TraceTable};
use crate::geometry::Contraction;
use crate::system::ValidatedSystem;
use crate::wordtree::{build_levels, WordTreeError};

/// Largest number of cells a single drawing may contain.
pub const MAX_POLYGONS: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("level {level} has {cells} cells, above the limit of {limit}")]
    TooLarge { level: usize, cells: usize, limit: usize },
    #[error("level must be at least 1")]
    BadLevel,
    #[error("overlay subset {0} does not fit J = {1}")]
    BadSubset(String, usize),
    #[error(transparent)]
    WordTree(#[from] WordTreeError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Overlay {
    None,
    EssentialEdges,
    Components(Vec<usize>),
    PhiParityFill,
}

impl FromStr for Overlay {
    type Err = String;

    /// `none`, `essential_edges`, `phi_parity_fill` or `components:0,2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, arg) {
            ("none", None) => Ok(Overlay::None),
            ("essential_edges", None) => Ok(Overlay::EssentialEdges),
            ("phi_parity_fill", None) => Ok(Overlay::PhiParityFill),
            ("components", Some(a)) => {
                let idx = a
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| t.trim().parse::<usize>().map_err(|e| format!("bad index {t:?}: {e}")))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Overlay::Components(idx))
            }
            ("components", None) => Ok(Overlay::Components(Vec::new())),
            _ => Err(format!("unknown overlay {s:?}")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RenderSpec {
    pub level: usize,
    pub overlay: Overlay,
    /// Width of the canvas in user units; the height follows the aspect ratio.
    pub canvas: f64,
    pub cell_stroke: f64,
    pub overlay_stroke: f64,
}

impl RenderSpec {
    pub fn new(level: usize, overlay: Overlay) -> Self {
        RenderSpec { level, overlay, canvas: 800.0, cell_stroke: 0.5, overlay_stroke: 2.5 }
    }
}

const GREY: &str = "#9a9a9a";
const WHITE: &str = "#ffffff";
const STROKE: &str = "#303030";
const HIGHLIGHT: &str = "#d62728";

/// Colour of the `k`-th component: hues step by the golden angle so every
/// component gets its own colour.
fn component_colour(k: usize) -> String {
    let hue = (k as f64 * 137.507_764_050_037_85).rem_euclid(360.0);
    let (s, l) = (0.6, 0.55);
    let c = (1.0 - (2.0 * l - 1.0f64).abs()) * s;
    let h = hue / 60.0;
    let x = c * (1.0 - (h.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let byte = |v: f64| ((v + m) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", byte(r), byte(g), byte(b))
}

/// Nine significant digits, printed in the shortest form that round-trips.
pub fn format_coord(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    if rounded == 0.0 {
        "0".to_string()
    } else {
        format!("{rounded}")
    }
}

struct Frame {
    scale: f64,
    min_x: f64,
    max_y: f64,
}

impl Frame {
    fn point(&self, (re, im): (f64, f64)) -> String {
        // SVG y grows downwards
        format!("{},{}", format_coord((re - self.min_x) * self.scale), format_coord((self.max_y - im) * self.scale))
    }
}

/// Word maps of every level-`m` cell in index order.
fn cell_maps(sys: &ValidatedSystem, level: usize) -> Vec<Contraction> {
    let mut maps = vec![Contraction::identity(sys.j)];
    for _ in 0..level {
        maps = maps.iter().flat_map(|f| sys.maps.iter().map(move |g| f.compose(g))).collect();
    }
    maps
}

pub fn render_svg(sys: &ValidatedSystem, spec: &RenderSpec) -> Result<Vec<u8>, RenderError> {
    if spec.level == 0 {
        return Err(RenderError::BadLevel);
    }
    let n = sys.cell_count();
    let cells = (n as u128).checked_pow(spec.level as u32).unwrap_or(u128::MAX);
    if cells > MAX_POLYGONS as u128 {
        return Err(RenderError::TooLarge {
            level: spec.level,
            cells: usize::try_from(cells).unwrap_or(usize::MAX),
            limit: MAX_POLYGONS,
        });
    }
    let j = sys.j;
    let outer: Vec<(f64, f64)> = sys.polygon.vertices.iter().map(|v| v.to_f64()).collect();
    let (mut min_x, mut max_x, mut min_y, mut max_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &outer {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let pad_x = 0.05 * (max_x - min_x);
    let pad_y = 0.05 * (max_y - min_y);
    min_x -= pad_x;
    max_x += pad_x;
    min_y -= pad_y;
    max_y += pad_y;
    let scale = spec.canvas / (max_x - min_x);
    let frame = Frame { scale, min_x, max_y };
    let width = format_coord(spec.canvas);
    let height = format_coord((max_y - min_y) * scale);

    let maps = cell_maps(sys, spec.level);
    let vertices: Vec<Vec<(f64, f64)>> =
        maps.iter().map(|f| f.image_vertices(&sys.polygon).iter().map(|v| v.to_f64()).collect()).collect();

    let fills: Vec<String> = match &spec.overlay {
        Overlay::Components(idx) => {
            if idx.iter().any(|&i| i >= j) {
                return Err(RenderError::BadSubset(format!("{idx:?}"), j));
            }
            let x = SubsetZJ::from_indices(j, idx.iter().copied());
            let levels = build_levels(sys, spec.level)?;
            let table = TraceTable::for_level(sys, spec.level);
            let decomposition = components(levels.last().expect("level ≥ 1"), &table, &x, &sys.group);
            let mut comps = decomposition.components;
            comps.sort_by_key(|c| c.iter().min().copied());
            let mut fill = vec![WHITE.to_string(); maps.len()];
            for (k, comp) in comps.iter().enumerate() {
                let colour = component_colour(k);
                for &w in comp {
                    fill[w] = colour.clone();
                }
            }
            fill
        }
        _ => maps.iter().map(|f| if f.phi.conj { GREY } else { WHITE }.to_string()).collect(),
    };

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r#"<g id="cells" stroke="{STROKE}" stroke-width="{}" stroke-linejoin="round">"#,
        format_coord(spec.cell_stroke)
    );
    for (verts, fill) in vertices.iter().zip(&fills) {
        let points: Vec<String> = verts.iter().map(|&v| frame.point(v)).collect();
        let _ = writeln!(out, r#"<polygon points="{}" fill="{fill}"/>"#, points.join(" "));
    }
    let _ = writeln!(out, "</g>");

    let line = |out: &mut String, a: (f64, f64), b: (f64, f64)| {
        let (pa, pb) = (frame.point(a), frame.point(b));
        let (x1, y1) = pa.split_once(',').expect("formatted point");
        let (x2, y2) = pb.split_once(',').expect("formatted point");
        let _ = writeln!(out, r#"<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}"/>"#);
    };
    // side b_k joins p_{k-1} and p_k
    let side = |verts: &[(f64, f64)], k: usize| (verts[(k + j - 1) % j], verts[k]);
    match &spec.overlay {
        Overlay::EssentialEdges => {
            let essential = essential_boundary(sys);
            let table = TraceTable::for_level(sys, spec.level);
            let _ = writeln!(
                out,
                r#"<g id="essential-edges" stroke="{HIGHLIGHT}" stroke-width="{}" stroke-linecap="round">"#,
                format_coord(spec.overlay_stroke)
            );
            for i in essential.iter() {
                let (a, b) = side(&outer, i);
                line(&mut out, a, b);
            }
            for (w, verts) in vertices.iter().enumerate() {
                for k in 0..j {
                    if table.edge_side(w, k).is_some_and(|i| essential.contains(i)) {
                        let (a, b) = side(verts, k);
                        line(&mut out, a, b);
                    }
                }
            }
            let _ = writeln!(out, "</g>");
        }
        Overlay::PhiParityFill => {
            // mark the image of side b_0 so the orientation of each cell is visible
            let _ = writeln!(
                out,
                r#"<g id="phi-marks" stroke="{HIGHLIGHT}" stroke-width="{}" stroke-linecap="round">"#,
                format_coord(spec.overlay_stroke)
            );
            for verts in &vertices {
                let (a, b) = side(verts, 0);
                line(&mut out, a, b);
            }
            let _ = writeln!(out, "</g>");
        }
        Overlay::None | Overlay::Components(_) => {}
    }
    let _ = writeln!(out, "</svg>");
    Ok(out.into_bytes())
}
