use polyfract::energy::{
    base_level, default_radius, dimar_bracket, knight_ratio, min_energy, orbit_representatives, p_energy,
    scaling_csv, scaling_estimate, EnergyContext, EnergyError, EnergyProblem, CSV_HEADER,
};
use polyfract::fixtures::fixture;
use polyfract::system::{load_validated, ValidatedSystem};
use proptest::prelude::*;

fn sys(name: &str) -> ValidatedSystem {
    load_validated(fixture(name).unwrap().text).unwrap()
}

fn path_graph(k: usize) -> Vec<(usize, usize)> {
    (0..k).map(|i| (i, i + 1)).collect()
}

/// Harmonic extension by dense Gaussian elimination on the free nodes.
fn dense_p2(n: usize, edges: &[(usize, usize)], one: &[usize], zero: &[usize]) -> f64 {
    let mut fixed = vec![None; n];
    for &v in one {
        fixed[v] = Some(1.0);
    }
    for &v in zero {
        fixed[v] = Some(0.0);
    }
    // nodes cut off from every terminal carry no energy; pin them
    let mut reached = vec![false; n];
    let mut stack: Vec<usize> = one.iter().chain(zero).copied().collect();
    while let Some(v) = stack.pop() {
        if !std::mem::replace(&mut reached[v], true) {
            for &(a, b) in edges {
                if a == v && !reached[b] {
                    stack.push(b);
                }
                if b == v && !reached[a] {
                    stack.push(a);
                }
            }
        }
    }
    for v in 0..n {
        if !reached[v] {
            fixed[v] = Some(0.0);
        }
    }
    let free: Vec<usize> = (0..n).filter(|&v| fixed[v].is_none()).collect();
    let pos = |v: usize| free.iter().position(|&u| u == v);
    let k = free.len();
    let mut a = vec![vec![0.0f64; k + 1]; k];
    for &(u, v) in edges {
        for (x, y) in [(u, v), (v, u)] {
            if let Some(i) = pos(x) {
                a[i][i] += 1.0;
                match (pos(y), fixed[y]) {
                    (Some(j), _) => a[i][j] -= 1.0,
                    (None, Some(val)) => a[i][k] += val,
                    (None, None) => unreachable!(),
                }
            }
        }
    }
    for c in 0..k {
        let piv = (c..k).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, piv);
        for r in 0..k {
            if r != c && a[r][c] != 0.0 {
                let f = a[r][c] / a[c][c];
                for col in c..=k {
                    a[r][col] -= f * a[c][col];
                }
            }
        }
    }
    let mut f: Vec<f64> = fixed.iter().map(|x| x.unwrap_or(0.0)).collect();
    for (i, &v) in free.iter().enumerate() {
        f[v] = a[i][k] / a[i][i];
    }
    p_energy(&f, edges, 2.0)
}

fn graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (4usize..10).prop_flat_map(|n| {
        let edges = prop::collection::btree_set((0..n, 0..n), 1..3 * n)
            .prop_map(|s| s.into_iter().filter(|(a, b)| a < b).collect::<Vec<_>>());
        (Just(n), edges)
    })
}

#[test]
fn path_energy_is_exact() {
    for k in 1..6 {
        for p in [1.5, 2.0, 3.0] {
            let prob = EnergyProblem {
                node_count: k + 1,
                edges: path_graph(k),
                boundary_one: vec![0],
                boundary_zero: vec![k],
                p,
            };
            let sol = min_energy(&prob).unwrap();
            let exact = (k as f64).powf(1.0 - p);
            assert!((sol.value - exact).abs() < 1e-8 * exact, "k={k} p={p}: {}", sol.value);
        }
    }
}

#[test]
fn cycle_energy_is_twice_a_path() {
    // two parallel paths of length k between the terminals
    let k = 3;
    let n = 2 * k;
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    for p in [1.5, 2.0, 4.0] {
        let prob = EnergyProblem { node_count: n, edges: edges.clone(), boundary_one: vec![0], boundary_zero: vec![k], p };
        let exact = 2.0 * (k as f64).powf(1.0 - p);
        assert!((min_energy(&prob).unwrap().value - exact).abs() < 1e-8);
    }
}

#[test]
fn degenerate_problems() {
    let prob = |one: Vec<usize>, zero: Vec<usize>, p: f64| EnergyProblem {
        node_count: 3,
        edges: path_graph(2),
        boundary_one: one,
        boundary_zero: zero,
        p,
    };
    assert_eq!(min_energy(&prob(vec![], vec![2], 2.0)).unwrap().value, 0.0);
    assert!(matches!(min_energy(&prob(vec![0], vec![2], 1.0)), Err(EnergyError::BadExponent(_))));
    assert!(matches!(min_energy(&prob(vec![0], vec![2], f64::NAN)), Err(EnergyError::BadExponent(_))));
}

#[test]
fn radii_and_base_levels() {
    assert_eq!(default_radius(4), 2);
    assert_eq!(default_radius(3), 4);
    let f = sys("folded-square");
    assert_eq!(base_level(&f, 2, 6).unwrap(), 2);
    assert_eq!(orbit_representatives(&f, 2).len(), 16);
    let c = sys("carpet");
    assert_eq!(base_level(&c, 2, 6).unwrap(), 1);
    assert_eq!(orbit_representatives(&c, 1), [0, 1]);
    assert!(matches!(base_level(&c, 100, 2), Err(EnergyError::NoBaseLevel(100))));
}

#[test]
fn scaling_table() {
    let c = sys("carpet");
    let est = scaling_estimate(&c, 2.0, 2, 2).unwrap();
    assert_eq!(est.values.len(), 2);
    assert_eq!(est.ratios.len(), 1);
    assert!(est.values.iter().all(|v| v.value > 0.0));
    assert!((est.ratios[0] - est.values[1].value / est.values[0].value).abs() < 1e-12);
    for (v, r) in est.values.iter().zip(&est.roots) {
        assert!((r - v.value.powf(1.0 / v.m as f64)).abs() < 1e-12);
    }
    let csv = scaling_csv("carpet", &est);
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 5);
    let width = CSV_HEADER.split(',').count();
    assert!(rows.iter().all(|r| r.split(',').count() == width && r.starts_with("carpet,2,2,")));
    assert!(matches!(scaling_estimate(&c, 2.0, 2, 1), Err(EnergyError::TooFewLevels)));
}

#[test]
fn bracket_arguments() {
    let c = sys("carpet");
    let trivial = dimar_bracket(&c, 1.2, 1.3, 0.5, 2, 2).unwrap();
    assert_eq!((trivial.lo, trivial.hi, trivial.evaluations), (1.2, 1.3, 0));
    // both ends decay, so nothing crosses
    assert!(matches!(dimar_bracket(&c, 2.5, 3.0, 0.1, 2, 2), Err(EnergyError::BadBracket { .. })));
}

#[test]
fn carpet_knight_ratio_is_frozen() {
    let c = sys("carpet");
    let ctx = EnergyContext::new(&c, 2, 2).unwrap();
    let r = knight_ratio(&ctx, 2.0, 2, 1).unwrap();
    assert!((r - 1.0).abs() < 1e-6, "{r}");
}

#[test]
fn disparity_is_finite_at_p_two() {
    let c = sys("carpet");
    let ctx = EnergyContext::new(&c, 2, 2).unwrap();
    let d = ctx.neighbor_disparity(1, 1, 2.0).unwrap();
    assert!(d.value.is_finite() && d.value > 0.0);
    assert!(d.classes >= 1 && d.edge.is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn agrees_with_dense_solve((n, edges) in graph()) {
        let (one, zero) = (vec![0], vec![n - 1]);
        let prob = EnergyProblem { node_count: n, edges: edges.clone(), boundary_one: one.clone(), boundary_zero: zero.clone(), p: 2.0 };
        let sol = min_energy(&prob).unwrap();
        let oracle = dense_p2(n, &edges, &one, &zero);
        prop_assert!((sol.value - oracle).abs() < 1e-8 * (1.0 + oracle), "{} vs {}", sol.value, oracle);
    }

    #[test]
    fn minimiser_is_admissible((n, edges) in graph(), p in 1.2f64..4.0) {
        let prob = EnergyProblem { node_count: n, edges: edges.clone(), boundary_one: vec![0, 1], boundary_zero: vec![n - 1], p };
        let sol = min_energy(&prob).unwrap();
        prop_assert!(sol.minimizer.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert_eq!(sol.minimizer[0], 1.0);
        prop_assert_eq!(sol.minimizer[n - 1], 0.0);
        prop_assert!((p_energy(&sol.minimizer, &edges, p) - sol.value).abs() < 1e-12 * (1.0 + sol.value));
        // the step function is admissible, so it bounds the minimum
        let step: Vec<f64> = (0..n).map(|v| if v < 2 { 1.0 } else { 0.0 }).collect();
        prop_assert!(sol.value <= p_energy(&step, &edges, p) + 1e-9);
    }

    #[test]
    fn adding_edges_never_lowers_energy((n, edges) in graph(), extra in (0usize..10, 0usize..10), p in 1.5f64..3.0) {
        let (a, b) = (extra.0 % n, extra.1 % n);
        prop_assume!(a != b);
        let base = EnergyProblem { node_count: n, edges: edges.clone(), boundary_one: vec![0], boundary_zero: vec![n - 1], p };
        let mut more = base.clone();
        more.edges.push((a.min(b), a.max(b)));
        let (e0, e1) = (min_energy(&base).unwrap().value, min_energy(&more).unwrap().value);
        prop_assert!(e1 >= e0 - 1e-7 * (1.0 + e0), "{e0} > {e1}");
    }
}
