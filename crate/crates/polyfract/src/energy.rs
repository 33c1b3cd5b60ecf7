//! Discrete p-energies on the word graphs: Dirichlet minimisation,
//! conductance constants, neighbour disparity, scaling estimates and
//! conformal-dimension brackets. All values here are floating point
//! approximations.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::system::{group_action_on_words, ValidatedSystem};
use crate::wordtree::{build_levels, gamma_ball, index_of, word_of, EdgeKind, LevelGraph, UnionFind, WordTreeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("exponent p = {0} must exceed 1")]
    BadExponent(f64),
    #[error("solver did not converge after {iterations} iterations (relative change {change:.3e})")]
    NonConvergence { iterations: usize, change: f64 },
    #[error("no level has a cell whose {0}-neighbourhood misses some cell")]
    NoBaseLevel(usize),
    #[error("bracket [{lo}, {hi}] does not straddle the crossing: ratios {ratio_lo:.4} and {ratio_hi:.4}")]
    BadBracket { lo: f64, hi: f64, ratio_lo: f64, ratio_hi: f64 },
    #[error("m_max must be at least 2")]
    TooFewLevels,
    #[error(transparent)]
    WordTree(#[from] WordTreeError),
}

/// Tolerances for [`min_energy`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Relative residual for the linear solves at `p = 2`.
    pub cg_tol: f64,
    /// Relative energy change that ends a Newton stage.
    pub energy_rtol: f64,
    /// Smoothing parameters, largest first.
    pub eps_schedule: Vec<f64>,
    pub max_newton: usize,
    pub max_cg: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        // six stages from 1e-1 down to 1e-8
        let eps_schedule = (0..6).map(|k| 10f64.powf(-1.0 - 7.0 * k as f64 / 5.0)).collect();
        SolverOptions { cg_tol: 1e-10, energy_rtol: 1e-9, eps_schedule, max_newton: 100, max_cg: 20_000 }
    }
}

/// A Dirichlet problem on an undirected graph.
#[derive(Clone, Debug)]
pub struct EnergyProblem {
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
    pub boundary_one: Vec<usize>,
    pub boundary_zero: Vec<usize>,
    pub p: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergySolution {
    pub value: f64,
    pub minimizer: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Smoothing parameters visited.
    pub regularization: Vec<f64>,
}

/// `Σ |f(u) - f(v)|^p` over undirected edges.
pub fn p_energy(f: &[f64], edges: &[(usize, usize)], p: f64) -> f64 {
    edges.iter().map(|&(u, v)| (f[u] - f[v]).abs().powf(p)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Weighted graph Laplacian restricted to the free nodes.
struct Laplacian<'a> {
    edges: &'a [(usize, usize)],
    free: &'a [bool],
    weights: Vec<f64>,
}

impl Laplacian<'_> {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, &(u, v)) in self.edges.iter().enumerate() {
            let d = self.weights[k] * (x[u] - x[v]);
            out[u] += d;
            out[v] -= d;
        }
        for (o, &f) in out.iter_mut().zip(self.free) {
            if !f {
                *o = 0.0;
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.free.len()];
        for (k, &(u, v)) in self.edges.iter().enumerate() {
            d[u] += self.weights[k];
            d[v] += self.weights[k];
        }
        d.iter().zip(self.free).map(|(&x, &f)| if f && x > 0.0 { x } else { 1.0 }).collect()
    }

    /// Jacobi-preconditioned conjugate gradients; returns iterations and relative residual.
    fn solve(&self, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> (usize, f64) {
        let n = b.len();
        let diag = self.diagonal();
        let mask = |v: &mut [f64]| {
            for (e, &f) in v.iter_mut().zip(self.free) {
                if !f {
                    *e = 0.0;
                }
            }
        };
        let bnorm = norm(b);
        if bnorm == 0.0 {
            x.iter_mut().for_each(|e| *e = 0.0);
            return (0, 0.0);
        }
        let mut r = vec![0.0; n];
        self.apply(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        mask(&mut r);
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        let mut rel = norm(&r) / bnorm;
        let mut it = 0;
        while rel > tol && it < max_iter {
            self.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            rel = norm(&r) / bnorm;
            it += 1;
        }
        (it, rel)
    }
}

/// Smoothed edge potential `(t² + ε²)^{p/2} - ε^p` and its first two derivatives.
fn potential(t: f64, p: f64, eps: f64) -> (f64, f64, f64) {
    let s = t * t + eps * eps;
    let base = s.powf(p / 2.0 - 2.0);
    let value = s.powf(p / 2.0) - eps.powf(p);
    let d1 = p * t * base * s;
    let d2 = p * base * ((p - 1.0) * t * t + eps * eps);
    (value, d1, d2)
}

struct Newton<'a> {
    edges: &'a [(usize, usize)],
    free: &'a [bool],
    p: f64,
    opts: &'a SolverOptions,
    /// Linear constraint `c · x = 1`, kept exactly along the iteration.
    constraint: Option<&'a [f64]>,
}

struct NewtonOutcome {
    iterations: usize,
    residual: f64,
}

impl Newton<'_> {
    fn objective(&self, x: &[f64], eps: f64) -> f64 {
        self.edges.iter().map(|&(u, v)| potential(x[u] - x[v], self.p, eps).0).sum()
    }

    fn run(&self, x: &mut [f64]) -> Result<NewtonOutcome, EnergyError> {
        let n = x.len();
        let mut total = 0;
        let mut residual = 0.0;
        let last = self.opts.eps_schedule.len().saturating_sub(1);
        for (stage, &eps) in self.opts.eps_schedule.iter().enumerate() {
            let mut value = self.objective(x, eps);
            let mut converged = false;
            let mut change = f64::INFINITY;
            for _ in 0..self.opts.max_newton {
                total += 1;
                let mut grad = vec![0.0; n];
                let mut weights = Vec::with_capacity(self.edges.len());
                for &(u, v) in self.edges {
                    let (_, d1, d2) = potential(x[u] - x[v], self.p, eps);
                    grad[u] += d1;
                    grad[v] -= d1;
                    weights.push(d2);
                }
                for (g, &f) in grad.iter_mut().zip(self.free) {
                    if !f {
                        *g = 0.0;
                    }
                }
                residual = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
                let lap = Laplacian { edges: self.edges, free: self.free, weights };
                let gnorm = norm(&grad);
                let forcing = (gnorm / (1.0 + value.abs())).sqrt().clamp(1e-10, 1e-2);
                let mut a = vec![0.0; n];
                lap.solve(&grad, &mut a, forcing, self.opts.max_cg);
                let mut dir: Vec<f64> = a.iter().map(|v| -v).collect();
                if let Some(c) = self.constraint {
                    let mut b = vec![0.0; n];
                    lap.solve(c, &mut b, forcing, self.opts.max_cg);
                    let cb = dot(c, &b);
                    if cb > 0.0 {
                        let alpha = (1.0 - dot(c, x) + dot(c, &a)) / cb;
                        for i in 0..n {
                            dir[i] += alpha * b[i];
                        }
                    }
                }
                let slope = dot(&grad, &dir);
                if slope >= 0.0 && self.constraint.is_none() {
                    converged = true;
                    break;
                }
                let mut step = 1.0;
                let mut trial = x.to_vec();
                let mut accepted = false;
                for _ in 0..60 {
                    for i in 0..n {
                        trial[i] = x[i] + step * dir[i];
                    }
                    let v = self.objective(&trial, eps);
                    if v <= value + 1e-4 * step * slope.min(0.0) {
                        change = (value - v).abs() / v.abs().max(1e-300);
                        x.copy_from_slice(&trial);
                        value = v;
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted || change <= self.opts.energy_rtol {
                    converged = true;
                    break;
                }
            }
            if !converged && stage == last && change > 1e-6 {
                return Err(EnergyError::NonConvergence { iterations: total, change });
            }
        }
        Ok(NewtonOutcome { iterations: total, residual })
    }
}

/// Minimise the p-energy with `f = 1` on `boundary_one` and `f = 0` on `boundary_zero`.
pub fn min_energy(prob: &EnergyProblem) -> Result<EnergySolution, EnergyError> {
    min_energy_with(prob, &SolverOptions::default())
}

pub fn min_energy_with(prob: &EnergyProblem, opts: &SolverOptions) -> Result<EnergySolution, EnergyError> {
    let p = prob.p;
    if p.is_nan() || p <= 1.0 {
        return Err(EnergyError::BadExponent(p));
    }
    let n = prob.node_count;
    let mut x = vec![0.0; n];
    let mut free = vec![true; n];
    for &v in &prob.boundary_one {
        x[v] = 1.0;
        free[v] = false;
    }
    for &v in &prob.boundary_zero {
        free[v] = false;
    }
    if prob.boundary_one.is_empty() || prob.boundary_zero.is_empty() {
        let c = if prob.boundary_one.is_empty() { 0.0 } else { 1.0 };
        return Ok(EnergySolution {
            value: 0.0,
            minimizer: vec![c; n],
            iterations: 0,
            residual: 0.0,
            regularization: Vec::new(),
        });
    }
    // free components that never meet the boundary are set to a constant
    let mut uf = UnionFind::new(n);
    for &(u, v) in &prob.edges {
        if free[u] && free[v] {
            uf.union(u, v);
        }
    }
    let mut anchored = vec![false; n];
    for &(u, v) in &prob.edges {
        if free[u] != free[v] {
            let f = if free[u] { u } else { v };
            let r = uf.find(f);
            anchored[r] = true;
        }
    }
    for v in 0..n {
        if free[v] && !anchored[uf.find(v)] {
            free[v] = false;
        }
    }

    // harmonic start
    let ones = vec![1.0; prob.edges.len()];
    let lap = Laplacian { edges: &prob.edges, free: &free, weights: ones };
    let mut rhs = vec![0.0; n];
    lap.apply(&x, &mut rhs);
    rhs.iter_mut().for_each(|r| *r = -*r);
    let mut y = vec![0.0; n];
    let (mut iterations, mut residual) = lap.solve(&rhs, &mut y, opts.cg_tol, opts.max_cg);
    for i in 0..n {
        x[i] += y[i];
    }
    let mut regularization = Vec::new();
    if (p - 2.0).abs() > 1e-12 {
        let newton = Newton { edges: &prob.edges, free: &free, p, opts, constraint: None };
        let out = newton.run(&mut x)?;
        iterations += out.iterations;
        residual = out.residual;
        regularization = opts.eps_schedule.clone();
    }
    for v in x.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(EnergySolution { value: p_energy(&x, &prob.edges, p), minimizer: x, iterations, residual, regularization })
}

/// `min E(f)` subject to `c · f = 1`, for a vector `c` summing to zero.
/// Returns `None` when the constraint can be met at zero energy.
fn min_energy_constrained(
    node_count: usize,
    edges: &[(usize, usize)],
    c: &[f64],
    p: f64,
    opts: &SolverOptions,
) -> Result<Option<(f64, usize, f64)>, EnergyError> {
    let n = node_count;
    let mut uf = UnionFind::new(n);
    for &(u, v) in edges {
        uf.union(u, v);
    }
    let groups = uf.groups();
    let mut free = vec![true; n];
    for g in &groups {
        let mass: f64 = g.iter().map(|&v| c[v]).sum();
        if mass.abs() > 1e-12 {
            return Ok(None);
        }
        free[g[0]] = false;
    }
    let ones = vec![1.0; edges.len()];
    let lap = Laplacian { edges, free: &free, weights: ones };
    let mut cm = c.to_vec();
    for (e, &f) in cm.iter_mut().zip(&free) {
        if !f {
            *e = 0.0;
        }
    }
    let mut x = vec![0.0; n];
    let (mut iterations, mut residual) = lap.solve(&cm, &mut x, opts.cg_tol, opts.max_cg);
    let cx = dot(&cm, &x);
    if cx <= 0.0 {
        return Ok(None);
    }
    if (p - 2.0).abs() <= 1e-12 {
        return Ok(Some((1.0 / cx, iterations, residual)));
    }
    x.iter_mut().for_each(|v| *v /= cx);
    let newton = Newton { edges, free: &free, p, opts, constraint: Some(&cm) };
    let out = newton.run(&mut x)?;
    iterations += out.iterations;
    residual = out.residual;
    // restore feasibility exactly before evaluating
    let cx = dot(&cm, &x);
    x.iter_mut().for_each(|v| *v /= cx);
    Ok(Some((p_energy(&x, edges, p), iterations, residual)))
}

/// Node range `S^m(w)` of a level-`n` node inside level `n + m`.
fn refinement(w: usize, alphabet: usize, m: usize) -> std::ops::Range<usize> {
    let scale = alphabet.pow(m as u32);
    w * scale..(w + 1) * scale
}

/// One conductance constant with its solver diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct ConductanceValue {
    pub word: Vec<usize>,
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// `E_{M,p,m}(w)` for a node `w` of `coarse`, computed on `fine`.
pub fn conductance_constant_on(
    coarse: &LevelGraph,
    fine: &LevelGraph,
    w: usize,
    radius: usize,
    p: f64,
    opts: &SolverOptions,
) -> Result<ConductanceValue, EnergyError> {
    let m = fine.level - coarse.level;
    let alphabet = fine.alphabet;
    let ball = gamma_ball(coarse, w, radius, EdgeKind::Star)?;
    let word = coarse.word(w);
    if ball.len() == coarse.node_count {
        return Ok(ConductanceValue { word, value: 0.0, iterations: 0, residual: 0.0 });
    }
    let mut zero = Vec::new();
    let mut inside = vec![false; coarse.node_count];
    for &b in &ball {
        inside[b] = true;
    }
    for (v, &ins) in inside.iter().enumerate() {
        if !ins {
            zero.extend(refinement(v, alphabet, m));
        }
    }
    let prob = EnergyProblem {
        node_count: fine.node_count,
        edges: fine.star_pairs(),
        boundary_one: refinement(w, alphabet, m).collect(),
        boundary_zero: zero,
        p,
    };
    let sol = min_energy_with(&prob, opts)?;
    Ok(ConductanceValue { word, value: sol.value, iterations: sol.iterations, residual: sol.residual })
}

/// `E_{M,p,m}(w)` built from scratch.
pub fn conductance_constant(
    sys: &ValidatedSystem,
    w: &[usize],
    radius: usize,
    p: f64,
    m: usize,
) -> Result<f64, EnergyError> {
    let n = w.len();
    let levels = build_levels(sys, n + m)?;
    let coarse = &levels[n - 1];
    let fine = &levels[n + m - 1];
    let idx = index_of(w, sys.cell_count());
    Ok(conductance_constant_on(coarse, fine, idx, radius, p, &SolverOptions::default())?.value)
}

/// One node per `G`-orbit of a level, smallest index first.
pub fn orbit_representatives(sys: &ValidatedSystem, level: usize) -> Vec<usize> {
    let n = sys.cell_count();
    let total = n.pow(level as u32);
    let mut seen = vec![false; total];
    let mut reps = Vec::new();
    for w in 0..total {
        if seen[w] {
            continue;
        }
        reps.push(w);
        let word = word_of(w, level, n);
        for g in &sys.group.elements {
            if let Ok(img) = group_action_on_words(sys, g, &word) {
                seen[index_of(&img, n)] = true;
            }
        }
    }
    reps
}

/// Smallest level with a node whose `M`-ball misses some node.
pub fn base_level(sys: &ValidatedSystem, radius: usize, max_level: usize) -> Result<usize, EnergyError> {
    let levels = build_levels(sys, max_level)?;
    for g in &levels {
        for w in orbit_representatives(sys, g.level) {
            if gamma_ball(g, w, radius, EdgeKind::Star)?.len() < g.node_count {
                return Ok(g.level);
            }
        }
    }
    Err(EnergyError::NoBaseLevel(radius))
}

/// Default neighbourhood radius `max(1, M_J)`.
pub fn default_radius(j: usize) -> usize {
    crate::conditions::m_j(j).max(1)
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelValue {
    pub m: usize,
    pub value: f64,
    pub representative: Vec<usize>,
    pub iterations: usize,
    pub residual: f64,
}

/// Finite-level decay of the conductance constants.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingEstimate {
    pub p: f64,
    pub radius: usize,
    pub base_level: usize,
    pub values: Vec<LevelValue>,
    /// `λ̂(m) = E(m)/E(m-1)` for `m ≥ 2`, aligned with `values[1..]`.
    pub ratios: Vec<f64>,
    /// `E(m)^{1/m}`.
    pub roots: Vec<f64>,
}

impl ScalingEstimate {
    pub fn last_ratio(&self) -> Option<f64> {
        self.ratios.last().copied()
    }
}

/// Levels `1..=base + m_max`, built once and shared by the energy routines.
pub struct EnergyContext<'a> {
    pub sys: &'a ValidatedSystem,
    pub radius: usize,
    pub base: usize,
    pub levels: Vec<LevelGraph>,
    pub representatives: Vec<usize>,
    pub opts: SolverOptions,
}

impl<'a> EnergyContext<'a> {
    pub fn new(sys: &'a ValidatedSystem, radius: usize, m_max: usize) -> Result<Self, EnergyError> {
        let base = base_level(sys, radius, 4)?;
        let levels = build_levels(sys, base + m_max)?;
        let representatives = orbit_representatives(sys, base);
        Ok(EnergyContext { sys, radius, base, levels, representatives, opts: SolverOptions::default() })
    }

    pub fn level(&self, l: usize) -> &LevelGraph {
        &self.levels[l - 1]
    }

    /// `max_w E_{M,p,m}(w)` over orbit representatives of the base level.
    pub fn conductance(&self, p: f64, m: usize) -> Result<LevelValue, EnergyError> {
        let coarse = self.level(self.base);
        let fine = self.level(self.base + m);
        let values = self
            .representatives
            .par_iter()
            .map(|&w| conductance_constant_on(coarse, fine, w, self.radius, p, &self.opts))
            .collect::<Result<Vec<_>, _>>()?;
        let best = values
            .into_iter()
            .reduce(|a, b| if b.value > a.value { b } else { a })
            .expect("at least one representative");
        Ok(LevelValue {
            m,
            value: best.value,
            representative: best.word,
            iterations: best.iterations,
            residual: best.residual,
        })
    }

    pub fn scaling(&self, p: f64, m_max: usize) -> Result<ScalingEstimate, EnergyError> {
        let values = (1..=m_max).map(|m| self.conductance(p, m)).collect::<Result<Vec<_>, _>>()?;
        let ratios = values.windows(2).map(|w| w[1].value / w[0].value).collect();
        let roots = values.iter().map(|v| v.value.powf(1.0 / v.m as f64)).collect();
        Ok(ScalingEstimate { p, radius: self.radius, base_level: self.base, values, ratios, roots })
    }

    /// `λ̂` at `m_max` only.
    pub fn ratio_at(&self, p: f64, m_max: usize) -> Result<f64, EnergyError> {
        let hi = self.conductance(p, m_max)?;
        let lo = self.conductance(p, m_max - 1)?;
        Ok(hi.value / lo.value)
    }

    /// `σ_{p,m,n}` with the worst edge class.
    pub fn neighbor_disparity(&self, n: usize, m: usize, p: f64) -> Result<Disparity, EnergyError> {
        neighbor_disparity_on(self.sys, self.level(n), self.level(n + m), p, &self.opts)
    }
}

pub fn scaling_estimate(sys: &ValidatedSystem, p: f64, radius: usize, m_max: usize) -> Result<ScalingEstimate, EnergyError> {
    if m_max < 2 {
        return Err(EnergyError::TooFewLevels);
    }
    EnergyContext::new(sys, radius, m_max)?.scaling(p, m_max)
}

/// Bisection bracket for the crossing `λ̂(p) = 1` at `m_max`.
#[derive(Clone, Debug, Serialize)]
pub struct DimensionBracket {
    pub lo: f64,
    pub hi: f64,
    pub ratio_lo: Option<f64>,
    pub ratio_hi: Option<f64>,
    pub evaluations: usize,
}

pub fn dimar_bracket(
    sys: &ValidatedSystem,
    p_lo: f64,
    p_hi: f64,
    tol: f64,
    radius: usize,
    m_max: usize,
) -> Result<DimensionBracket, EnergyError> {
    if tol >= p_hi - p_lo {
        return Ok(DimensionBracket { lo: p_lo, hi: p_hi, ratio_lo: None, ratio_hi: None, evaluations: 0 });
    }
    if m_max < 2 {
        return Err(EnergyError::TooFewLevels);
    }
    let ctx = EnergyContext::new(sys, radius, m_max)?;
    dimar_bracket_in(&ctx, p_lo, p_hi, tol, m_max)
}

pub fn dimar_bracket_in(
    ctx: &EnergyContext<'_>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    m_max: usize,
) -> Result<DimensionBracket, EnergyError> {
    let mut r_lo = ctx.ratio_at(lo, m_max)?;
    let mut r_hi = ctx.ratio_at(hi, m_max)?;
    let mut evaluations = 2;
    if !(r_lo > 1.0 && r_hi < 1.0) {
        return Err(EnergyError::BadBracket { lo, hi, ratio_lo: r_lo, ratio_hi: r_hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let r = ctx.ratio_at(mid, m_max)?;
        evaluations += 1;
        if r > 1.0 {
            lo = mid;
            r_lo = r;
        } else {
            hi = mid;
            r_hi = r;
        }
    }
    Ok(DimensionBracket { lo, hi, ratio_lo: Some(r_lo), ratio_hi: Some(r_hi), evaluations })
}

/// Neighbour disparity with the edge class attaining it.
#[derive(Clone, Debug, Serialize)]
pub struct Disparity {
    pub value: f64,
    pub edge: Option<(Vec<usize>, Vec<usize>)>,
    pub classes: usize,
    pub iterations: usize,
}

fn edge_class_key(sys: &ValidatedSystem, a: usize, b: usize, level: usize) -> (usize, usize) {
    let n = sys.cell_count();
    let (wa, wb) = (word_of(a, level, n), word_of(b, level, n));
    sys.group
        .elements
        .iter()
        .filter_map(|g| {
            let x = index_of(&group_action_on_words(sys, g, &wa).ok()?, n);
            let y = index_of(&group_action_on_words(sys, g, &wb).ok()?, n);
            Some((x.min(y), x.max(y)))
        })
        .min()
        .unwrap_or((a.min(b), a.max(b)))
}

/// `σ_{p,m,n}` from prebuilt level graphs.
pub fn neighbor_disparity_on(
    sys: &ValidatedSystem,
    coarse: &LevelGraph,
    fine: &LevelGraph,
    p: f64,
    opts: &SolverOptions,
) -> Result<Disparity, EnergyError> {
    if p.is_nan() || p <= 1.0 {
        return Err(EnergyError::BadExponent(p));
    }
    let alphabet = fine.alphabet;
    let m = fine.level - coarse.level;
    let mut classes: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for (a, b) in coarse.star_pairs() {
        classes.entry(edge_class_key(sys, a, b, coarse.level)).or_insert((a, b));
    }
    let reps: Vec<(usize, usize)> = classes.into_values().collect();
    let fine_pairs = fine.star_pairs();
    let results = reps
        .par_iter()
        .map(|&(a, b)| {
            let ra = refinement(a, alphabet, m);
            let rb = refinement(b, alphabet, m);
            let size = ra.len();
            let local = |v: usize| -> Option<usize> {
                if ra.contains(&v) {
                    Some(v - ra.start)
                } else if rb.contains(&v) {
                    Some(size + v - rb.start)
                } else {
                    None
                }
            };
            let edges: Vec<(usize, usize)> =
                fine_pairs.iter().filter_map(|&(u, v)| Some((local(u)?, local(v)?))).collect();
            let mut c = vec![1.0 / size as f64; 2 * size];
            for e in c[size..].iter_mut() {
                *e = -1.0 / size as f64;
            }
            let out = min_energy_constrained(2 * size, &edges, &c, p, opts)?;
            Ok::<_, EnergyError>(match out {
                Some((energy, it, _)) => (1.0 / energy, it),
                None => (f64::INFINITY, 0),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut best = (0.0f64, None);
    let mut iterations = 0;
    for (k, &(value, it)) in results.iter().enumerate() {
        iterations += it;
        if value > best.0 || best.1.is_none() {
            best = (value, Some(k));
        }
    }
    let edge = best.1.map(|k| (coarse.word(reps[k].0), coarse.word(reps[k].1)));
    Ok(Disparity { value: best.0, edge, classes: reps.len(), iterations })
}

pub fn neighbor_disparity(sys: &ValidatedSystem, n: usize, m: usize, p: f64) -> Result<Disparity, EnergyError> {
    let levels = build_levels(sys, n + m)?;
    neighbor_disparity_on(sys, &levels[n - 1], &levels[n + m - 1], p, &SolverOptions::default())
}

/// `max_z E_{M,p,m}(z) / min_{u ≠ v ∈ T_k} E_{p,m}(u, v, T_k)`, with zero
/// denominators excluded.
pub fn knight_ratio(ctx: &EnergyContext<'_>, p: f64, m: usize, k: usize) -> Result<f64, EnergyError> {
    let numerator = ctx.conductance(p, m)?.value;
    let coarse = ctx.level(k);
    let fine = ctx.level(k + m);
    let alphabet = fine.alphabet;
    let edges = fine.star_pairs();
    let pairs: Vec<(usize, usize)> =
        (0..coarse.node_count).flat_map(|u| (u + 1..coarse.node_count).map(move |v| (u, v))).collect();
    let values = pairs
        .par_iter()
        .map(|&(u, v)| {
            let prob = EnergyProblem {
                node_count: fine.node_count,
                edges: edges.clone(),
                boundary_one: refinement(u, alphabet, m).collect(),
                boundary_zero: refinement(v, alphabet, m).collect(),
                p,
            };
            min_energy_with(&prob, &ctx.opts).map(|s| s.value)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let denominator = values.into_iter().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    Ok(numerator / denominator)
}

/// `E_{M,p,m} · σ_{p,m,n}` over a grid of `(m, n)`.
#[derive(Clone, Debug, Serialize)]
pub struct ProductEntry {
    pub m: usize,
    pub n: usize,
    pub conductance: f64,
    pub disparity: f64,
    pub product: f64,
}

pub fn conductive_products(
    ctx: &EnergyContext<'_>,
    p: f64,
    ms: &[usize],
    ns: &[usize],
) -> Result<Vec<ProductEntry>, EnergyError> {
    let mut out = Vec::new();
    for &m in ms {
        let e = ctx.conductance(p, m)?.value;
        for &n in ns {
            let s = ctx.neighbor_disparity(n, m, p)?.value;
            out.push(ProductEntry { m, n, conductance: e, disparity: s, product: e * s });
        }
    }
    Ok(out)
}

/// CSV header shared by every energy table.
pub const CSV_HEADER: &str = "system,p,M,m,quantity,value,iterations,residual";

/// Rows for a scaling estimate.
pub fn scaling_csv(system: &str, est: &ScalingEstimate) -> String {
    let mut out = String::new();
    for v in &est.values {
        let _ = writeln!(
            out,
            "{system},{},{},{},conductance,{:e},{},{:e}",
            est.p, est.radius, v.m, v.value, v.iterations, v.residual
        );
    }
    for (k, r) in est.ratios.iter().enumerate() {
        let v = &est.values[k + 1];
        let _ = writeln!(out, "{system},{},{},{},ratio,{:e},,", est.p, est.radius, v.m, r);
    }
    for (v, r) in est.values.iter().zip(&est.roots) {
        let _ = writeln!(out, "{system},{},{},{},root,{:e},,", est.p, est.radius, v.m, r);
    }
    out
}
