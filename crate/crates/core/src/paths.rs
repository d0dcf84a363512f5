//! Explicit W^{1,p} paths between circle maps on `T^2` and barrier estimates.
//!
//! The path from `u` to `v` has four kinds of stages:
//!
//! 1. shrink `u`: `u o phi_s`, a copy of each cell scaled by `1 - s` inside
//!    the cone over the cell boundary, ending at the skeleton cone of `u`;
//! 2. homotopy on the 1-skeleton: vertex angles `theta_u + s c`, with `c`
//!    lifted along a spanning tree so that tree edges end with `v`'s increments;
//! 3. one swap per remaining edge whose increment differs from `v`'s by a
//!    multiple of `2 pi`: on the two squares `V` next to the edge the map is
//!    shrunk towards the edge midpoint (`lambda = |1 - 2s|`) inside the cone
//!    over `dV`, and grows back with the new increment;
//! 4. shrink `v`, reversed.
//!
//! Every sample has an exact energy computed from cone integrals.

use std::collections::VecDeque;

use crate::cones::{radial_factor, segment_coefficient, SkeletonMap};
use crate::complex::TorusGrid;
use crate::error::{Error, Result};
use crate::maps::{wrap_angle, GridMap, Target, TWO_PI};

/// Tolerance for recognizing half-turn edges and lifting mismatches.
const LIFT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapOrder {
    /// Lexicographic by base vertex, then axis.
    BaseAxis,
    /// By edge index (all axis-0 edges first).
    EdgeIndex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    pub samples_per_stage: usize,
    pub swap_order: SwapOrder,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self { samples_per_stage: 4, swap_order: SwapOrder::BaseAxis }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    ShrinkStart,
    Homotopy,
    /// Swap of the increment on the given edge.
    Swap(usize),
    ShrinkEnd,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub stage: usize,
    pub s: f64,
}

/// A Hang-Lin path with its sampling.
#[derive(Debug, Clone)]
pub struct MapPath {
    u: GridMap,
    v: GridMap,
    su: SkeletonMap,
    sv: SkeletonMap,
    shift: Vec<f64>,
    /// Skeleton after `i` swaps; index 0 is the homotopy endpoint.
    snapshots: Vec<SkeletonMap>,
    stages: Vec<StageKind>,
    samples: Vec<Sample>,
}

/// One map on a path.
#[derive(Debug, Clone)]
pub enum PathMap {
    Grid(GridMap),
    Shrink { map: GridMap, skeleton: SkeletonMap, frac: f64 },
    Skeleton(SkeletonMap),
    Swap { state: SkeletonMap, edge: usize, lambda: f64 },
}

fn check_pair(u: &GridMap, v: &GridMap) -> Result<()> {
    if u.target() != Target::Circle || v.target() != Target::Circle {
        return Err(Error::TargetMismatch("paths need circle maps".into()));
    }
    if u.grid() != v.grid() || u.grid().n() != 2 {
        return Err(Error::DimensionMismatch("paths need two maps on the same T^2 grid".into()));
    }
    for map in [u, v] {
        let s = SkeletonMap::from_map(map)?;
        if let Some(e) = s.increments().iter().position(|d| (d.abs() - std::f64::consts::PI).abs() < LIFT_TOL) {
            return Err(Error::OutOfRange(format!("half-turn increment on edge {e}")));
        }
    }
    Ok(())
}

/// Spanning tree of the 1-skeleton: Kruskal over edges in index order.
fn spanning_tree(grid: &TorusGrid) -> Vec<bool> {
    let nv = grid.num_vertices();
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut in_tree = vec![false; 2 * nv];
    for e in 0..2 * nv {
        let (axis, base) = (e / nv, e % nv);
        let (a, b) = (find(&mut parent, base), find(&mut parent, grid.shift(base, axis, 1)));
        if a != b {
            parent[a] = b;
            in_tree[e] = true;
        }
    }
    in_tree
}

/// Vertex shifts `c` with `theta_u + c = theta_v (mod 2 pi)` and
/// `c_b - c_a = dv_e - du_e` on tree edges.
fn lift_shift(u: &GridMap, v: &GridMap, su: &SkeletonMap, sv: &SkeletonMap, tree: &[bool]) -> Result<Vec<f64>> {
    let grid = u.grid();
    let nv = grid.num_vertices();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
    for (e, &t) in tree.iter().enumerate() {
        if t {
            let (a, b) = su.edge_vertices(e);
            adj[a].push((e, b));
            adj[b].push((e, a));
        }
    }
    let mut c = vec![f64::NAN; nv];
    c[0] = wrap_angle(v.angle(0) - u.angle(0));
    let mut queue = VecDeque::from([0usize]);
    while let Some(x) = queue.pop_front() {
        for &(e, y) in &adj[x] {
            if !c[y].is_nan() {
                continue;
            }
            let d = sv.increments()[e] - su.increments()[e];
            let (a, _) = su.edge_vertices(e);
            c[y] = if a == x { c[x] + d } else { c[x] - d };
            queue.push_back(y);
        }
    }
    for w in 0..nv {
        if c[w].is_nan() || wrap_angle(u.angle(w) + c[w] - v.angle(w)).abs() > LIFT_TOL {
            return Err(Error::HomotopyObstruction { vertex: w });
        }
    }
    Ok(c)
}

fn homotopy_skeleton(su: &SkeletonMap, shift: &[f64], s: f64) -> SkeletonMap {
    let angles: Vec<f64> = su.angles().iter().zip(shift).map(|(a, c)| (a + s * c).rem_euclid(TWO_PI)).collect();
    let increments: Vec<f64> = (0..su.num_edges())
        .map(|e| {
            let (a, b) = su.edge_vertices(e);
            su.increments()[e] + s * (shift[b] - shift[a])
        })
        .collect();
    SkeletonMap::new(su.grid().clone(), angles, increments).expect("sizes match")
}

/// Builds the path from `u` to `v`.
pub fn hang_lin_path(u: &GridMap, v: &GridMap, opts: PathOptions) -> Result<MapPath> {
    check_pair(u, v)?;
    if opts.samples_per_stage == 0 {
        return Err(Error::OutOfRange("samples_per_stage must be positive".into()));
    }
    let su = SkeletonMap::from_map(u)?;
    let sv = SkeletonMap::from_map(v)?;
    let grid = u.grid().clone();
    if u.values() == v.values() {
        let samples = vec![Sample { t: 0.0, stage: 0, s: 0.0 }, Sample { t: 1.0, stage: 0, s: 1.0 }];
        return Ok(MapPath {
            u: u.clone(),
            v: v.clone(),
            su: su.clone(),
            sv,
            shift: vec![0.0; grid.num_vertices()],
            snapshots: vec![su],
            stages: vec![StageKind::Constant],
            samples,
        });
    }
    let tree = spanning_tree(&grid);
    let shift = lift_shift(u, v, &su, &sv, &tree)?;
    let u2 = homotopy_skeleton(&su, &shift, 1.0);
    let nv = grid.num_vertices();
    let mut edges: Vec<usize> = (0..2 * nv)
        .filter(|&e| ((u2.increments()[e] - sv.increments()[e]) / TWO_PI).round() != 0.0)
        .collect();
    if opts.swap_order == SwapOrder::BaseAxis {
        edges.sort_by_key(|&e| (e % nv, e / nv));
    }
    let mut snapshots = vec![u2];
    for &e in &edges {
        let mut next = snapshots.last().expect("nonempty").clone();
        next.set_increment(e, sv.increments()[e]);
        snapshots.push(next);
    }
    let mut stages = vec![StageKind::ShrinkStart, StageKind::Homotopy];
    stages.extend(edges.iter().map(|&e| StageKind::Swap(e)));
    stages.push(StageKind::ShrinkEnd);

    let per = opts.samples_per_stage;
    let mut raw = Vec::new();
    for (i, kind) in stages.iter().enumerate() {
        let mut ss: Vec<f64> = (0..per).map(|j| j as f64 / per as f64).collect();
        if matches!(kind, StageKind::Swap(_)) && !ss.contains(&0.5) {
            ss.push(0.5);
            ss.sort_by(f64::total_cmp);
        }
        raw.extend(ss.into_iter().map(|s| (i, s)));
    }
    raw.push((stages.len() - 1, 1.0));
    let last = (raw.len() - 1) as f64;
    let samples = raw
        .into_iter()
        .enumerate()
        .map(|(k, (stage, s))| Sample { t: k as f64 / last, stage, s })
        .collect();
    Ok(MapPath { u: u.clone(), v: v.clone(), su, sv, shift, snapshots, stages, samples })
}

impl MapPath {
    pub fn grid(&self) -> &TorusGrid {
        self.u.grid()
    }

    pub fn stages(&self) -> &[StageKind] {
        &self.stages
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn swap_edges(&self) -> Vec<usize> {
        self.stages
            .iter()
            .filter_map(|k| if let StageKind::Swap(e) = k { Some(*e) } else { None })
            .collect()
    }

    /// Skeleton reached after the homotopy stage.
    pub fn homotopy_end(&self) -> &SkeletonMap {
        &self.snapshots[0]
    }

    /// The map at stage `stage`, parameter `s in [0, 1]`.
    pub fn map_at(&self, stage: usize, s: f64) -> PathMap {
        let s = s.clamp(0.0, 1.0);
        match self.stages[stage] {
            StageKind::Constant => PathMap::Grid(self.u.clone()),
            StageKind::ShrinkStart if s == 0.0 => PathMap::Grid(self.u.clone()),
            StageKind::ShrinkStart => PathMap::Shrink { map: self.u.clone(), skeleton: self.su.clone(), frac: 1.0 - s },
            StageKind::Homotopy => PathMap::Skeleton(homotopy_skeleton(&self.su, &self.shift, s)),
            StageKind::Swap(edge) => {
                let i = stage - 2;
                let state = if s <= 0.5 { &self.snapshots[i] } else { &self.snapshots[i + 1] };
                PathMap::Swap { state: state.clone(), edge, lambda: (1.0 - 2.0 * s).abs() }
            }
            StageKind::ShrinkEnd if s == 1.0 => PathMap::Grid(self.v.clone()),
            StageKind::ShrinkEnd => PathMap::Shrink { map: self.v.clone(), skeleton: self.sv.clone(), frac: s },
        }
    }

    /// Map at a global parameter `tau in [0, #stages]`.
    pub fn map_at_tau(&self, tau: f64) -> PathMap {
        let n = self.stages.len();
        let stage = (tau.floor() as usize).min(n - 1);
        self.map_at(stage, tau - stage as f64)
    }

    pub fn sample_map(&self, i: usize) -> PathMap {
        let s = self.samples[i];
        self.map_at(s.stage, s.s)
    }

    pub fn sample_tau(&self, i: usize) -> f64 {
        let s = self.samples[i];
        s.stage as f64 + s.s
    }
}

/// Geometry of the two squares next to an edge, in grid units relative to
/// the edge midpoint: `(along, transverse)` coordinates.
struct Star {
    origin: Vec<f64>,
    axis: usize,
    squares: [usize; 2],
    segments: [(usize, [f64; 2], [f64; 2]); 6],
}

fn star(grid: &TorusGrid, edge: usize) -> Star {
    let nv = grid.num_vertices();
    let (a, w) = (edge / nv, edge % nv);
    let t = 1 - a;
    let mut origin = grid.vertex_coords(w).iter().map(|&c| c as f64).collect::<Vec<_>>();
    origin[a] += 0.5;
    let lo = grid.shift(w, t, -1);
    let hi = grid.shift(w, t, 1);
    let far = grid.shift(w, a, 1);
    let far_lo = grid.shift(far, t, -1);
    let along = |e_axis: usize, base: usize| e_axis * nv + base;
    Star {
        origin,
        axis: a,
        squares: [w, lo],
        segments: [
            (along(a, lo), [-0.5, -1.0], [0.5, -1.0]),
            (along(a, hi), [-0.5, 1.0], [0.5, 1.0]),
            (along(t, lo), [-0.5, -1.0], [-0.5, 0.0]),
            (along(t, w), [-0.5, 0.0], [-0.5, 1.0]),
            (along(t, far_lo), [0.5, -1.0], [0.5, 0.0]),
            (along(t, far), [0.5, 0.0], [0.5, 1.0]),
        ],
    }
}

impl PathMap {
    /// Exact p-energy (`1 <= p < 2`).
    pub fn energy(&self, p: f64) -> Result<f64> {
        match self {
            PathMap::Grid(u) => crate::maps::p_energy(u, p),
            PathMap::Shrink { map, skeleton, frac } => crate::cones::shrink_energy(map, skeleton, *frac, p),
            PathMap::Skeleton(s) => s.cone_energy(p),
            PathMap::Swap { state, edge, lambda } => {
                let grid = state.grid();
                let st = star(grid, *edge);
                let h = grid.h();
                let rf0 = radial_factor(p, 0.0);
                let outside: f64 = (0..grid.num_vertices())
                    .filter(|v| !st.squares.contains(v))
                    .map(|v| state.square_coefficient(v, p))
                    .sum();
                let inside: f64 = st.squares.iter().map(|&v| state.square_coefficient(v, p)).sum();
                let rim: f64 = st
                    .segments
                    .iter()
                    .map(|&(e, from, to)| {
                        let f = [from[0] * h, from[1] * h];
                        let t = [to[0] * h, to[1] * h];
                        segment_coefficient(p, f, t, state.increments()[e])
                    })
                    .sum();
                Ok(outside * rf0 + lambda.powf(2.0 - p) * inside * rf0 + radial_factor(p, *lambda) * rim)
            }
        }
    }

    /// Angle at a physical point; `None` at cone apexes.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        match self {
            PathMap::Grid(u) => Some(u.sample(x)[0].rem_euclid(TWO_PI)),
            PathMap::Shrink { map, skeleton, frac } => {
                let grid = map.grid();
                let xi = grid.to_grid_units(x);
                let y: Vec<f64> = xi.iter().map(|g| g - g.floor() - 0.5).collect();
                let r = y[0].abs().max(y[1].abs());
                if *frac > 0.0 && r <= 0.5 * frac {
                    let inner: Vec<f64> = xi.iter().zip(&y).map(|(g, yy)| g.floor() + 0.5 + yy / frac).collect();
                    Some(map.sample(&grid.from_grid_units(&inner))[0].rem_euclid(TWO_PI))
                } else {
                    skeleton.eval(x)
                }
            }
            PathMap::Skeleton(s) => s.eval(x),
            PathMap::Swap { state, edge, lambda } => {
                let grid = state.grid();
                let st = star(grid, *edge);
                let m = grid.m() as f64;
                let xi = grid.to_grid_units(x);
                let rel: Vec<f64> = xi
                    .iter()
                    .zip(&st.origin)
                    .map(|(g, o)| {
                        let d = g - o;
                        d - (d / m).round() * m
                    })
                    .collect();
                let (a, t) = (st.axis, 1 - st.axis);
                let rho = (rel[a].abs() / 0.5).max(rel[t].abs());
                if rho > 1.0 {
                    return state.eval(x);
                }
                let scale = if rho >= *lambda {
                    if rho == 0.0 {
                        return None;
                    }
                    1.0 / rho
                } else {
                    1.0 / lambda
                };
                let pt: Vec<f64> = st.origin.iter().zip(&rel).map(|(o, r)| o + r * scale).collect();
                state.eval(&grid.from_grid_units(&pt))
            }
        }
    }

    /// Angles at the centers of the cells of a grid `refine` times finer.
    pub fn quadrature_values(&self, grid: &TorusGrid, refine: usize) -> Vec<f64> {
        let mf = grid.m() * refine;
        let mut out = Vec::with_capacity(mf * mf);
        for j in 0..mf {
            for i in 0..mf {
                let x = [(i as f64 + 0.5) / mf as f64 + grid.offset()[0], (j as f64 + 0.5) / mf as f64 + grid.offset()[1]];
                let x = [x[0].rem_euclid(1.0), x[1].rem_euclid(1.0)];
                out.push(self.eval(&x).unwrap_or(0.0));
            }
        }
        out
    }

    /// Rasterization onto the vertices of a grid `refine` times finer.
    pub fn to_grid(&self, grid: &TorusGrid, refine: usize) -> Result<GridMap> {
        let fine = TorusGrid::new(2, grid.m() * refine, grid.offset())?;
        let hf = fine.h();
        let angles = (0..fine.num_vertices())
            .map(|v| {
                let x = fine.vertex_position(v);
                self.eval(&x)
                    .or_else(|| self.eval(&[x[0] + 1e-3 * hf, x[1] + 2e-3 * hf]))
                    .unwrap_or(0.0)
            })
            .collect();
        GridMap::circle(fine, angles)
    }
}

/// L^p distance (geodesic on the circle) between quadrature value arrays.
pub fn quadrature_distance(a: &[f64], b: &[f64], p: f64) -> f64 {
    let w = 1.0 / a.len() as f64;
    let s: f64 = a.iter().zip(b).map(|(x, y)| wrap_angle(x - y).abs().powf(p)).sum();
    (s * w).powf(1.0 / p)
}

/// Exact energies of all samples and their maximum.
pub fn profile_energy(path: &MapPath, p: f64) -> Result<(Vec<f64>, f64)> {
    let e: Vec<f64> = (0..path.samples.len()).map(|i| path.sample_map(i).energy(p)).collect::<Result<_>>()?;
    let sup = e.iter().copied().fold(0.0, f64::max);
    Ok((e, sup))
}

/// Least-squares fit `log sup = log C + beta log(1/(k - p))`.
pub fn fit_scaling(ps: &[f64], sups: &[f64], k: usize) -> Result<(f64, f64)> {
    let kf = k as f64;
    if ps.len() != sups.len() || ps.len() < 3 {
        return Err(Error::DegenerateFit("need at least 3 matching points".into()));
    }
    if ps.iter().any(|&p| !(p > kf - 1.0 && p < kf)) {
        return Err(Error::OutOfRange(format!("exponents must lie in ({}, {kf})", kf - 1.0)));
    }
    if sups.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateFit("non-positive sup energy".into()));
    }
    let xs: Vec<f64> = ps.iter().map(|p| (1.0 / (kf - p)).ln()).collect();
    let ys: Vec<f64> = sups.iter().map(|s| s.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all exponents equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = sxy / sxx;
    Ok(((my - beta * mx).exp(), beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierKind {
    HangLinUpper,
    SequenceDelta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierEstimate {
    pub p: f64,
    pub gamma_hat: f64,
    pub kind: BarrierKind,
    pub delta: Option<f64>,
    /// Number of maps in the reported sequence.
    pub samples: usize,
    /// Largest consecutive L^p distance in the reported sequence.
    pub max_step: f64,
}

/// Sup energy along the sampled Hang-Lin path.
pub fn hang_lin_barrier(u: &GridMap, v: &GridMap, p: f64, opts: PathOptions) -> Result<BarrierEstimate> {
    let path = hang_lin_path(u, v, opts)?;
    let (_, sup) = profile_energy(&path, p)?;
    Ok(BarrierEstimate {
        p,
        gamma_hat: sup,
        kind: BarrierKind::HangLinUpper,
        delta: None,
        samples: path.samples.len(),
        max_step: f64::NAN,
    })
}

/// Options for [`sequence_barrier`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceOptions {
    pub path: PathOptions,
    /// Quadrature refinement for L^p distances.
    pub refine: usize,
    /// Bisection stops below this parameter gap.
    pub min_gap: f64,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        Self { path: PathOptions::default(), refine: 4, min_gap: 1e-6 }
    }
}

struct Node {
    map: PathMap,
    values: Vec<f64>,
}

/// Upper estimate of the delta-discrete barrier: the sampled Hang-Lin path is
/// bisected until consecutive L^p distances are below `delta`, thinned
/// greedily, and skeleton samples are optionally relaxed by projected
/// gradient steps on their cone energy that keep the chain delta-fine.
pub fn sequence_barrier(
    u: &GridMap,
    v: &GridMap,
    p: f64,
    delta: f64,
    relax_iters: usize,
    opts: SequenceOptions,
) -> Result<BarrierEstimate> {
    if !(delta > 0.0) {
        return Err(Error::OutOfRange(format!("delta = {delta} must be positive")));
    }
    let path = hang_lin_path(u, v, opts.path)?;
    let grid = path.grid().clone();
    let node = |tau: f64| {
        let map = path.map_at_tau(tau);
        let values = map.quadrature_values(&grid, opts.refine);
        (tau, Node { map, values })
    };
    let mut seq: Vec<(f64, Node)> = (0..path.samples.len()).map(|i| node(path.sample_tau(i))).collect();
    let mut i = 0;
    while i + 1 < seq.len() {
        let d = quadrature_distance(&seq[i].1.values, &seq[i + 1].1.values, p);
        let gap = seq[i + 1].0 - seq[i].0;
        if d >= delta && gap > opts.min_gap {
            let mid = node(0.5 * (seq[i].0 + seq[i + 1].0));
            seq.insert(i + 1, mid);
        } else {
            i += 1;
        }
    }
    // greedy thinning: from each kept map jump to the farthest map still within delta
    let mut rest = seq.into_iter();
    let mut kept = vec![rest.next().expect("nonempty")];
    let rest: Vec<(f64, Node)> = rest.collect();
    let mut idx = 0;
    while idx < rest.len() {
        let anchor = &kept.last().expect("nonempty").1.values;
        let mut j = idx;
        while j + 1 < rest.len() && quadrature_distance(anchor, &rest[j + 1].1.values, p) < delta {
            j += 1;
        }
        let (tau, n) = &rest[j];
        kept.push((*tau, Node { map: n.map.clone(), values: n.values.clone() }));
        idx = j + 1;
    }
    let mut maps: Vec<Node> = kept.into_iter().map(|(_, n)| n).collect();
    if relax_iters > 0 {
        relax(&mut maps, &grid, p, delta, relax_iters, opts.refine)?;
    }
    let mut gamma = 0.0f64;
    for n in &maps {
        gamma = gamma.max(n.map.energy(p)?);
    }
    let max_step = maps
        .windows(2)
        .map(|w| quadrature_distance(&w[0].values, &w[1].values, p))
        .fold(0.0, f64::max);
    Ok(BarrierEstimate {
        p,
        gamma_hat: gamma,
        kind: BarrierKind::SequenceDelta,
        delta: Some(delta),
        samples: maps.len(),
        max_step,
    })
}

/// Gradient of the cone energy of a skeleton map with respect to vertex angles.
fn skeleton_gradient(s: &SkeletonMap, p: f64) -> Vec<f64> {
    let hh = 0.5 * s.grid().h();
    // every side of every square has the same geometry; each edge borders two squares
    let g = 2.0 * segment_coefficient(p, [-hh, -hh], [hh, -hh], 1.0) * radial_factor(p, 0.0);
    let mut grad = vec![0.0; s.grid().num_vertices()];
    for (e, &d) in s.increments().iter().enumerate() {
        let (a, b) = s.edge_vertices(e);
        let de = g * p * d.abs().powf(p - 1.0) * d.signum();
        grad[b] += de;
        grad[a] -= de;
    }
    grad
}

fn relax(maps: &mut [Node], grid: &TorusGrid, p: f64, delta: f64, iters: usize, refine: usize) -> Result<()> {
    for i in 1..maps.len().saturating_sub(1) {
        let PathMap::Skeleton(mut s) = maps[i].map.clone() else { continue };
        let mut energy = s.cone_energy(p)?;
        let mut step = 1e-2;
        for _ in 0..iters {
            let grad = skeleton_gradient(&s, p);
            let norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if norm == 0.0 {
                break;
            }
            let mut accepted = false;
            while step > 1e-8 {
                let angles: Vec<f64> = s.angles().iter().zip(&grad).map(|(a, g)| (a - step * g / norm).rem_euclid(TWO_PI)).collect();
                let increments: Vec<f64> = (0..s.num_edges())
                    .map(|e| {
                        let (a, b) = s.edge_vertices(e);
                        s.increments()[e] - step * (grad[b] - grad[a]) / norm
                    })
                    .collect();
                let trial = SkeletonMap::new(grid.clone(), angles, increments)?;
                let te = trial.cone_energy(p)?;
                let map = PathMap::Skeleton(trial.clone());
                let values = map.quadrature_values(grid, refine);
                let fine = quadrature_distance(&maps[i - 1].values, &values, p) < delta
                    && quadrature_distance(&values, &maps[i + 1].values, p) < delta;
                if te < energy && fine {
                    s = trial;
                    energy = te;
                    maps[i] = Node { map, values };
                    accepted = true;
                    step *= 1.5;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }
    Ok(())
}
