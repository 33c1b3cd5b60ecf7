use std::collections::BTreeSet;

use polyfract::boundary::{components, SubsetZJ, TraceTable};
use polyfract::fixtures::{fixture, valid_fixtures};
use polyfract::render::{format_coord, render_svg, Overlay, RenderError, RenderSpec, MAX_POLYGONS};
use polyfract::system::{load_validated, ValidatedSystem};
use polyfract::wordtree::build_levels;

fn sys(name: &str) -> ValidatedSystem {
    load_validated(fixture(name).unwrap().text).unwrap()
}

fn render(s: &ValidatedSystem, level: usize, overlay: Overlay) -> String {
    String::from_utf8(render_svg(s, &RenderSpec::new(level, overlay)).unwrap()).unwrap()
}

fn polygons(doc: &roxmltree::Document<'_>) -> Vec<Vec<(f64, f64)>> {
    doc.descendants()
        .filter(|n| n.has_tag_name("polygon"))
        .map(|n| {
            n.attribute("points")
                .unwrap()
                .split(' ')
                .map(|p| {
                    let (x, y) = p.split_once(',').unwrap();
                    (x.parse().unwrap(), y.parse().unwrap())
                })
                .collect()
        })
        .collect()
}

fn group_lines(doc: &roxmltree::Document<'_>, id: &str) -> usize {
    doc.descendants()
        .find(|n| n.attribute("id") == Some(id))
        .map(|g| g.children().filter(|c| c.has_tag_name("line")).count())
        .unwrap_or(0)
}

#[test]
fn coordinates_format_compactly() {
    assert_eq!(format_coord(0.0), "0");
    assert_eq!(format_coord(-0.0), "0");
    assert_eq!(format_coord(-1e-20), "-0.00000000000000000001");
    assert_eq!(format_coord(800.0), "800");
    assert_eq!(format_coord(0.1 + 0.2), "0.3");
    assert_eq!(format_coord(1.0 / 3.0), "0.333333333");
    assert_eq!(format_coord(-2.5), "-2.5");
}

#[test]
fn overlays_parse() {
    assert_eq!("none".parse::<Overlay>().unwrap(), Overlay::None);
    assert_eq!("essential_edges".parse::<Overlay>().unwrap(), Overlay::EssentialEdges);
    assert_eq!("phi_parity_fill".parse::<Overlay>().unwrap(), Overlay::PhiParityFill);
    assert_eq!("components:0, 2".parse::<Overlay>().unwrap(), Overlay::Components(vec![0, 2]));
    assert_eq!("components".parse::<Overlay>().unwrap(), Overlay::Components(vec![]));
    assert!("components:x".parse::<Overlay>().is_err());
    assert!("sparkles".parse::<Overlay>().is_err());
}

#[test]
fn one_polygon_per_cell() {
    for fx in valid_fixtures() {
        let s = load_validated(fx.text).unwrap();
        for level in 1..=3 {
            let svg = render(&s, level, Overlay::None);
            let doc = roxmltree::Document::parse(&svg).unwrap();
            let polys = polygons(&doc);
            assert_eq!(polys.len(), s.cell_count().pow(level as u32), "{} level {level}", fx.name);
            assert!(polys.iter().all(|p| p.len() == s.j));
            let root = doc.root_element();
            assert_eq!(root.attribute("width"), Some("800"));
            let h: f64 = root.attribute("height").unwrap().parse().unwrap();
            assert!(polys.iter().flatten().all(|&(x, y)| (0.0..=800.0).contains(&x) && (0.0..=h).contains(&y)));
        }
    }
}

#[test]
fn north_is_up() {
    let s = sys("carpet");
    let svg = render(&s, 1, Overlay::None);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let polys = polygons(&doc);
    let mean_y = |p: &[(f64, f64)]| p.iter().map(|v| v.1).sum::<f64>() / p.len() as f64;
    // cell 1 is the south middle, cell 6 the north middle
    assert!(mean_y(&polys[6]) < mean_y(&polys[1]));
}

#[test]
fn overlay_groups() {
    let f = sys("folded-square");
    let doc_src = render(&f, 2, Overlay::PhiParityFill);
    let doc = roxmltree::Document::parse(&doc_src).unwrap();
    assert_eq!(group_lines(&doc, "phi-marks"), 16);
    let doc_src = render(&f, 1, Overlay::EssentialEdges);
    let doc = roxmltree::Document::parse(&doc_src).unwrap();
    // four outer sides plus every cell side lying on the outer boundary
    assert_eq!(group_lines(&doc, "essential-edges"), 4 + 8);
    let plain = render(&f, 1, Overlay::None);
    assert!(!plain.contains("<line"));
}

#[test]
fn component_colours() {
    let s = sys("carpet");
    let x = SubsetZJ::from_indices(4, [0, 2]);
    let svg = render(&s, 2, Overlay::Components(vec![0, 2]));
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let fills: BTreeSet<&str> = doc.descendants().filter_map(|n| n.attribute("fill")).collect();
    let levels = build_levels(&s, 2).unwrap();
    let count = components(&levels[1], &TraceTable::for_level(&s, 2), &x, &s.group).components.len();
    assert_eq!(fills.len(), count);
}

#[test]
fn rejected_specs() {
    let s = sys("carpet");
    assert!(matches!(render_svg(&s, &RenderSpec::new(0, Overlay::None)), Err(RenderError::BadLevel)));
    match render_svg(&s, &RenderSpec::new(7, Overlay::None)) {
        Err(RenderError::TooLarge { cells, limit, .. }) => assert_eq!((cells, limit), (1 << 21, MAX_POLYGONS)),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(render_svg(&s, &RenderSpec::new(1, Overlay::Components(vec![4]))), Err(RenderError::BadSubset(..))));
}

#[test]
fn output_is_byte_stable() {
    let s = sys("hexa-d3");
    let a = render_svg(&s, &RenderSpec::new(2, Overlay::EssentialEdges)).unwrap();
    let b = render_svg(&s, &RenderSpec::new(2, Overlay::EssentialEdges)).unwrap();
    assert_eq!(a, b);
}
