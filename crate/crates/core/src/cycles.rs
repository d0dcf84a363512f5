//! Integral cubical chains, Jacobian cycles, flat norms, the Almgren class of a
//! sequence of 0-cycles and min-max widths over balanced 0-chains.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::complex::{axis_sets, Cell, CubicalComplex};
use crate::cones::retracted_energy;
use crate::degrees::{boundary_degree, DegreeConstants};
use crate::error::{Error, Result};
use crate::flow::MinCostFlow;
use crate::maps::{p_energy, wrap_angle, GridMap, Target, TWO_PI};

/// Default isoperimetric threshold `eps0` for fillings.
pub const DEFAULT_EPS0: f64 = 0.5;

/// Sparse integer chain of cells of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    complex: CubicalComplex,
    dim: usize,
    coeffs: BTreeMap<usize, i64>,
}

impl Chain {
    pub fn zero(complex: &CubicalComplex, dim: usize) -> Self {
        Self { complex: complex.clone(), dim, coeffs: BTreeMap::new() }
    }

    /// Chain from `(cell index, coefficient)` pairs; repeated indices add up.
    pub fn from_terms(
        complex: &CubicalComplex,
        dim: usize,
        terms: impl IntoIterator<Item = (usize, i64)>,
    ) -> Result<Self> {
        if dim > complex.n() {
            return Err(Error::DimensionMismatch(format!("{dim}-chains in T^{}", complex.n())));
        }
        let mut c = Self::zero(complex, dim);
        let count = complex.num_cells(dim);
        for (i, v) in terms {
            if i >= count {
                return Err(Error::OutOfRange(format!("cell index {i} >= {count}")));
            }
            c.add(i, v);
        }
        Ok(c)
    }

    pub fn complex(&self) -> &CubicalComplex {
        &self.complex
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coefficient(&self, index: usize) -> i64 {
        self.coeffs.get(&index).copied().unwrap_or(0)
    }

    /// Nonzero `(cell index, coefficient)` pairs in index order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.coeffs.iter().map(|(&i, &c)| (i, c))
    }

    pub fn add(&mut self, index: usize, value: i64) {
        if value == 0 {
            return;
        }
        let e = self.coeffs.entry(index).or_insert(0);
        *e += value;
        if *e == 0 {
            self.coeffs.remove(&index);
        }
    }

    pub fn add_cell(&mut self, cell: &Cell, value: i64) {
        let i = self.complex.cell_index(cell);
        self.add(i, value);
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn compatible(&self, other: &Chain) -> Result<()> {
        if self.dim != other.dim || self.complex != other.complex {
            return Err(Error::DimensionMismatch("chains on different complexes or dimensions".into()));
        }
        Ok(())
    }

    /// `self + factor * other`.
    pub fn combine(&self, other: &Chain, factor: i64) -> Result<Chain> {
        self.compatible(other)?;
        let mut out = self.clone();
        for (i, c) in other.terms() {
            out.add(i, factor * c);
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: i64) -> Chain {
        let mut out = Chain::zero(&self.complex, self.dim);
        for (i, c) in self.terms() {
            out.add(i, factor * c);
        }
        out
    }

    /// `sum |coef| * h^dim`.
    pub fn mass(&self) -> f64 {
        let total: i64 = self.coeffs.values().map(|c| c.abs()).sum();
        total as f64 * self.complex.grid().h().powi(self.dim as i32)
    }

    /// Sum of coefficients (meaningful for 0-chains).
    pub fn augmentation(&self) -> i64 {
        self.coeffs.values().sum()
    }

    pub fn boundary(&self) -> Result<Chain> {
        if self.dim == 0 {
            return Err(Error::DimensionMismatch("0-chains have no boundary on the torus".into()));
        }
        let mut out = Chain::zero(&self.complex, self.dim - 1);
        for (i, c) in self.terms() {
            let cell = self.complex.cell(self.dim, i);
            for (f, s) in self.complex.boundary(&cell) {
                out.add_cell(&f, c * s as i64);
            }
        }
        Ok(out)
    }

    pub fn is_cycle(&self) -> bool {
        if self.dim == 0 {
            return self.augmentation() == 0;
        }
        self.boundary().map(|b| b.is_zero()).unwrap_or(false)
    }
}

pub fn chain_boundary(c: &Chain) -> Result<Chain> {
    c.boundary()
}

pub fn chain_mass(c: &Chain) -> f64 {
    c.mass()
}

/// `sum_sigma deg(u, d sigma) [P(sigma)]` on the dual complex.
pub fn jacobian_cycle(u: &GridMap) -> Result<Chain> {
    let k = u.target().k().ok_or_else(|| Error::TargetMismatch("ambient map".into()))?;
    let n = u.grid().n();
    if k > n {
        return Err(Error::DimensionMismatch(format!("k = {k} > n = {n}")));
    }
    let complex = CubicalComplex::new(u.grid().clone());
    let dual = CubicalComplex::new(u.grid().dual());
    let mut out = Chain::zero(&dual, n - k);
    for sigma in complex.cells(k) {
        let theta = boundary_degree(u, &sigma)?;
        if theta != 0 {
            let pc = complex.dual_cell(&sigma)?;
            out.add_cell(&pc.cell, theta * pc.orientation as i64);
        }
    }
    Ok(out)
}

/// Cut numbers: for every axis set `A` of size `dim` (lexicographic order), the
/// sum of coefficients of `A`-cells whose base has coordinate 0 on every axis
/// of `A`. Invariant under adding boundaries, so it computes homology classes
/// of cycles and relative classes of fillings.
pub fn cut_numbers(c: &Chain) -> Vec<i64> {
    let cx = c.complex();
    let grid = cx.grid();
    axis_sets(cx.n(), c.dim())
        .into_iter()
        .map(|mask| {
            c.terms()
                .filter(|&(i, _)| {
                    let cell = cx.cell(c.dim(), i);
                    cell.axes == mask && {
                        let co = grid.vertex_coords(cell.base);
                        (0..cx.n()).all(|a| mask & (1 << a) == 0 || co[a] == 0)
                    }
                })
                .map(|(_, v)| v)
                .sum()
        })
        .collect()
}

/// Homology class of a cycle in `H_dim(T^n; Z) = Z^C(n, dim)`.
pub fn homology_class(c: &Chain) -> Result<Vec<i64>> {
    if !c.is_cycle() {
        return Err(Error::NotACycle);
    }
    Ok(cut_numbers(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlatMethod {
    ExactFlow,
    Exhaustive,
}

/// `T = T' + dS` with `value = M(T') + M(S)` minimal.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatNormResult {
    pub value: f64,
    pub s: Chain,
    pub t_prime: Chain,
}

/// Limit on cells of dimension `dim + 1` for exhaustive search.
pub const EXHAUSTIVE_CELL_CAP: usize = 300;
/// Coefficient bound for exhaustive enumeration of top-dimensional fillings.
pub const EXHAUSTIVE_COEF_BOUND: i64 = 2;
const EXHAUSTIVE_UNIT_CAP: usize = 16;
const EXHAUSTIVE_WORK_CAP: f64 = 5e7;

pub fn flat_norm(t: &Chain, method: FlatMethod) -> Result<FlatNormResult> {
    match method {
        FlatMethod::ExactFlow => {
            if t.dim() != 0 || t.augmentation() != 0 {
                return Err(Error::MethodMismatch {
                    method: "EXACT_FLOW",
                    reason: "needs a 0-chain with zero total coefficient".into(),
                });
            }
            transport(t, true)
        }
        FlatMethod::Exhaustive => {
            let cx = t.complex();
            if t.dim() >= cx.n() {
                return Err(Error::MethodMismatch { method: "EXHAUSTIVE", reason: "top-dimensional chain".into() });
            }
            let cells = cx.num_cells(t.dim() + 1);
            if cells > EXHAUSTIVE_CELL_CAP {
                return Err(Error::SizeCap(format!("{cells} cells of dimension {} > {EXHAUSTIVE_CELL_CAP}", t.dim() + 1)));
            }
            match (t.dim(), cx.n()) {
                (0, _) => pairing_search(t),
                (1, 2) => profile_search(t),
                _ => Err(Error::MethodMismatch {
                    method: "EXHAUSTIVE",
                    reason: format!("dimension {} in T^{}", t.dim(), cx.n()),
                }),
            }
        }
    }
}

fn edge_cell(axis: usize, base: usize) -> Cell {
    Cell { base, axes: 1 << axis }
}

/// Min-cost transport of a 0-chain along grid edges (cost `h` per edge), with
/// optional disposal at cost 1 per unit. Returns the filling and residual.
fn transport(t: &Chain, disposal: bool) -> Result<FlatNormResult> {
    let cx = t.complex();
    let grid = cx.grid();
    let n = cx.n();
    let nv = grid.num_vertices();
    let m = grid.m() as i64;
    let (z, src, snk) = (nv, nv + 1, nv + 2);
    let mut f = MinCostFlow::new(nv + 3);
    let big = t.terms().map(|(_, c)| c.abs()).sum::<i64>().max(1);
    let mut arcs = Vec::with_capacity(n * nv);
    for v in 0..nv {
        for a in 0..n {
            let w = grid.shift(v, a, 1);
            arcs.push((a, v, f.add_arc(v, w, big, 1), f.add_arc(w, v, big, 1)));
        }
        if disposal {
            f.add_arc(v, z, big, m);
            f.add_arc(z, v, big, m);
        }
    }
    let mut demand = 0;
    for (v, c) in t.terms() {
        if c < 0 {
            f.add_arc(src, v, -c, 0);
        } else {
            f.add_arc(v, snk, c, 0);
            demand += c;
        }
    }
    let (sent, _) = f.run(src, snk, demand);
    if sent != demand {
        return Err(Error::NotACycle);
    }
    let mut s = Chain::zero(cx, 1);
    for (a, v, fwd, bwd) in arcs {
        let net = f.flow(fwd) - f.flow(bwd);
        if net != 0 {
            s.add_cell(&edge_cell(a, v), net);
        }
    }
    let t_prime = t.combine(&s.boundary()?, -1)?;
    Ok(FlatNormResult { value: t_prime.mass() + s.mass(), s, t_prime })
}

/// Minimal-mass filling `S` with `dS = T` of a balanced 0-chain.
pub fn min_filling(t: &Chain) -> Result<Chain> {
    if t.dim() != 0 || t.augmentation() != 0 {
        return Err(Error::NotACycle);
    }
    Ok(transport(t, false)?.s)
}

fn torus_steps(m: usize, from: usize, to: usize) -> isize {
    let d = (to + m - from) % m;
    if d <= m / 2 {
        d as isize
    } else {
        d as isize - m as isize
    }
}

/// A shortest edge path from `a` to `b` (axis 0 first), with `dS = b - a`.
fn path_chain(cx: &CubicalComplex, a: usize, b: usize) -> Chain {
    let grid = cx.grid();
    let mut s = Chain::zero(cx, 1);
    let (ca, cb) = (grid.vertex_coords(a), grid.vertex_coords(b));
    let mut v = a;
    for axis in 0..cx.n() {
        let steps = torus_steps(grid.m(), ca[axis], cb[axis]);
        for _ in 0..steps.unsigned_abs() {
            if steps > 0 {
                s.add_cell(&edge_cell(axis, v), 1);
                v = grid.shift(v, axis, 1);
            } else {
                v = grid.shift(v, axis, -1);
                s.add_cell(&edge_cell(axis, v), -1);
            }
        }
    }
    s
}

fn graph_distance(cx: &CubicalComplex, a: usize, b: usize) -> usize {
    let grid = cx.grid();
    let (ca, cb) = (grid.vertex_coords(a), grid.vertex_coords(b));
    (0..cx.n()).map(|i| torus_steps(grid.m(), ca[i], cb[i]).unsigned_abs()).sum()
}

/// Exact flat norm of a 0-chain by dynamic programming over all pairings of
/// positive with negative units; unpaired units are kept in `T'`.
fn pairing_search(t: &Chain) -> Result<FlatNormResult> {
    let cx = t.complex();
    let h = cx.grid().h();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (v, c) in t.terms() {
        let list = if c > 0 { &mut pos } else { &mut neg };
        list.extend(std::iter::repeat(v).take(c.unsigned_abs() as usize));
    }
    if pos.len().max(neg.len()) > EXHAUSTIVE_UNIT_CAP {
        return Err(Error::SizeCap(format!("{} units > {EXHAUSTIVE_UNIT_CAP}", pos.len().max(neg.len()))));
    }
    let m = cx.grid().m() as i64;
    // integer costs in units of h: transport d, disposal m per unit
    let pair_cost = |a: usize, b: usize| (graph_distance(cx, a, b) as i64).min(2 * m);
    let full = 1usize << neg.len();
    let inf = i64::MAX / 4;
    let mut dp = vec![vec![inf; full]; pos.len() + 1];
    dp[0][0] = 0;
    for i in 0..pos.len() {
        for mask in 0..full {
            let cur = dp[i][mask];
            if cur >= inf {
                continue;
            }
            if cur + m < dp[i + 1][mask] {
                dp[i + 1][mask] = cur + m;
            }
            for j in 0..neg.len() {
                if mask & (1 << j) == 0 {
                    let nm = mask | (1 << j);
                    let c = cur + pair_cost(pos[i], neg[j]);
                    if c < dp[i + 1][nm] {
                        dp[i + 1][nm] = c;
                    }
                }
            }
        }
    }
    let left = |mask: usize| (neg.len() - mask.count_ones() as usize) as i64 * m;
    let (best_mask, _) = (0..full)
        .map(|mask| (mask, dp[pos.len()][mask].saturating_add(left(mask))))
        .min_by_key(|&(mask, c)| (c, mask))
        .expect("nonempty");
    // backtrack
    let mut s = Chain::zero(cx, 1);
    let mut mask = best_mask;
    for i in (0..pos.len()).rev() {
        let cur = dp[i + 1][mask];
        if dp[i][mask].saturating_add(m) == cur {
            continue;
        }
        let j = (0..neg.len())
            .find(|&j| {
                mask & (1 << j) != 0 && dp[i][mask ^ (1 << j)].saturating_add(pair_cost(pos[i], neg[j])) == cur
            })
            .expect("consistent table");
        if (graph_distance(cx, pos[i], neg[j]) as i64) < 2 * m {
            s = s.combine(&path_chain(cx, neg[j], pos[i]), 1)?;
        }
        mask ^= 1 << j;
    }
    let t_prime = t.combine(&s.boundary()?, -1)?;
    let value = t_prime.mass() + s.mass();
    debug_assert!((value - (dp[pos.len()][best_mask] + left(best_mask)) as f64 * h).abs() < 1e-9);
    Ok(FlatNormResult { value, s, t_prime })
}

/// Exact flat norm of a 1-chain on `T^2` over square fillings with
/// coefficients in `[-2, 2]`, by a broken-profile dynamic program.
fn profile_search(t: &Chain) -> Result<FlatNormResult> {
    let cx = t.complex();
    let grid = cx.grid();
    let m = grid.m();
    let b = EXHAUSTIVE_COEF_BOUND;
    let q = (2 * b + 1) as usize;
    let states = q.pow(m as u32);
    let work = (states as f64).powi(2) * (m * m * q) as f64;
    if work > EXHAUSTIVE_WORK_CAP {
        return Err(Error::SizeCap(format!("profile search needs ~{work:.1e} steps")));
    }
    let nv = grid.num_vertices();
    let idx = |i: usize, j: usize| (i % m) + m * (j % m);
    // T on horizontal (axis 0) and vertical (axis 1) edges
    let th: Vec<i64> = (0..nv).map(|v| t.coefficient(cx.cell_index(&edge_cell(0, v)))).collect();
    let tv: Vec<i64> = (0..nv).map(|v| t.coefficient(cx.cell_index(&edge_cell(1, v)))).collect();
    let mi = m as i64;
    // costs in units of h^2: squares 1, edges m
    let hcost = |i: usize, j: usize, below: i64, above: i64| mi * (th[idx(i, j)] - (above - below)).abs();
    let vcost = |i: usize, j: usize, left: i64, right: i64| mi * (tv[idx(i, j)] - (left - right)).abs();
    let digit = |state: usize, k: usize| ((state / q.pow(k as u32)) % q) as i64 - b;
    let top = q.pow(m as u32 - 1);
    let inf = i64::MAX / 4;

    // minimal cost for a fixed first row, plus the remaining squares if `keep`
    let solve = |row0: &[i64], keep: bool| -> (i64, Vec<u8>) {
        let mut base = 0;
        for i in 0..m {
            base += row0[i].abs();
            if i > 0 {
                base += vcost(i, 0, row0[i - 1], row0[i]);
            }
        }
        base += vcost(0, 0, row0[m - 1], row0[0]);
        let start: usize = row0.iter().enumerate().map(|(k, &v)| (v + b) as usize * q.pow(k as u32)).sum();
        let mut cur = vec![inf; states];
        cur[start] = base;
        let mut parents = Vec::new();
        for j in 1..m {
            for i in 0..m {
                let mut next = vec![inf; states];
                let mut par = if keep { vec![(usize::MAX, 0u8); states] } else { Vec::new() };
                for (st, &c) in cur.iter().enumerate() {
                    if c >= inf {
                        continue;
                    }
                    let below = digit(st, 0);
                    let left = digit(st, m - 1);
                    let first_in_row = digit(st, 1);
                    for sv in 0..q {
                        let s = sv as i64 - b;
                        let mut cost = c + s.abs() + hcost(i, j, below, s);
                        if i > 0 {
                            cost += vcost(i, j, left, s);
                        }
                        if i == m - 1 {
                            cost += vcost(0, j, s, if m == 1 { s } else { first_in_row });
                        }
                        if j == m - 1 {
                            cost += hcost(i, 0, s, row0[i]);
                        }
                        let ns = st / q + sv * top;
                        if cost < next[ns] {
                            next[ns] = cost;
                            if keep {
                                par[ns] = (st, sv as u8);
                            }
                        }
                    }
                }
                cur = next;
                if keep {
                    parents.push(par);
                }
            }
        }
        let (best_state, best) = cur.iter().enumerate().min_by_key(|&(s, &c)| (c, s)).map(|(s, &c)| (s, c)).unwrap();
        if keep {
            // reconstruct square values row by row
            let mut vals = vec![0u8; m * (m - 1)];
            let mut st = best_state;
            for step in (0..m * (m - 1)).rev() {
                let (prev, sv) = parents[step][st];
                vals[step] = sv;
                st = prev;
            }
            return (best, vals);
        }
        (best, Vec::new())
    };

    let mut best: Option<(i64, Vec<i64>)> = None;
    for code in 0..states {
        let row0: Vec<i64> = (0..m).map(|k| digit(code, k)).collect();
        let (c, _) = solve(&row0, false);
        if best.as_ref().map_or(true, |(bc, _)| c < *bc) {
            best = Some((c, row0));
        }
    }
    let (_, row0) = best.expect("at least one first row");
    let (_, choice) = solve(&row0, true);
    let mut s = Chain::zero(cx, 2);
    let sq = |v: usize| Cell { base: v, axes: 0b11 };
    for i in 0..m {
        s.add_cell(&sq(idx(i, 0)), row0[i]);
    }
    for (step, &sv) in choice.iter().enumerate() {
        let (i, j) = (step % m, 1 + step / m);
        s.add_cell(&sq(idx(i, j)), sv as i64 - b);
    }
    let t_prime = t.combine(&s.boundary()?, -1)?;
    Ok(FlatNormResult { value: t_prime.mass() + s.mass(), s, t_prime })
}

/// Class in `H_1` of the fillings of a closed sequence of 0-cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmgrenResult {
    pub class: Vec<i64>,
    pub fillings: Vec<Chain>,
    pub eps0: f64,
}

fn check_sequence(seq: &[Chain]) -> Result<()> {
    if seq.is_empty() {
        return Ok(());
    }
    if !seq[0].is_zero() || !seq[seq.len() - 1].is_zero() {
        return Err(Error::NotClosed);
    }
    Ok(())
}

/// Sums minimal fillings of consecutive differences of a closed sequence.
pub fn almgren_class(seq: &[Chain], delta: f64, eps0: f64) -> Result<AlmgrenResult> {
    check_sequence(seq)?;
    let mut fillings = Vec::new();
    for step in 1..seq.len() {
        let diff = seq[step].combine(&seq[step - 1], -1)?;
        let norm = flat_norm(&diff, FlatMethod::ExactFlow)?.value;
        if norm >= delta {
            return Err(Error::Fineness { step, norm, delta });
        }
        fillings.push(min_filling(&diff)?);
    }
    almgren_class_with(seq, fillings, eps0)
}

/// Same as [`almgren_class`] with caller-supplied fillings `dS_i = T_i - T_{i-1}`.
pub fn almgren_class_with(seq: &[Chain], fillings: Vec<Chain>, eps0: f64) -> Result<AlmgrenResult> {
    check_sequence(seq)?;
    if fillings.len() + 1 != seq.len().max(1) {
        return Err(Error::DimensionMismatch("one filling per step".into()));
    }
    let n = seq.first().map(|c| c.complex().n()).unwrap_or(2);
    let mut class = vec![0i64; n];
    for (i, s) in fillings.iter().enumerate() {
        let step = i + 1;
        let diff = seq[step].combine(&seq[step - 1], -1)?;
        if s.boundary()? != diff {
            return Err(Error::NotACycle);
        }
        let mass = s.mass();
        if mass >= 0.5 * eps0 {
            return Err(Error::FillTooBig { step, mass, limit: 0.5 * eps0 });
        }
        for (acc, c) in class.iter_mut().zip(cut_numbers(s)) {
            *acc += c;
        }
    }
    Ok(AlmgrenResult { class, fillings, eps0 })
}

/// A min-max width query over balanced 0-chains.
#[derive(Debug, Clone, PartialEq)]
pub struct WidthQuery {
    pub xi: Vec<i64>,
    pub delta: f64,
    pub mass_cap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidthResult {
    /// Minimal max-mass, `+inf` when no sequence within the cap realizes the class.
    pub value: f64,
    pub mass_cap: f64,
    /// A realizing sequence (empty when not found or for the zero class).
    pub sequence: Vec<Chain>,
    pub states_explored: usize,
}

impl WidthResult {
    pub fn found(&self) -> bool {
        self.value.is_finite()
    }
}

type State = (Vec<(u32, i32)>, Vec<i64>);

fn chain_key(c: &Chain) -> Vec<(u32, i32)> {
    c.terms().map(|(i, v)| (i as u32, v as i32)).collect()
}

/// Width `L(xi)` of balanced 0-chains on a `T^2` complex: the least `L` such
/// that a delta-fine sequence of chains of mass `<= L` sweeps out `xi`.
/// Moves shift one unit along one edge (exactly the moves of flat norm `< delta`
/// when `h < delta <= 2h`); swept classes are tracked in a box of radius
/// `max|xi| + 1`.
pub fn minmax_width(cx: &CubicalComplex, q: &WidthQuery) -> Result<WidthResult> {
    let n = cx.n();
    if n != 2 || q.xi.len() != n {
        return Err(Error::DimensionMismatch("widths of 0-cycles need T^2 and a class in Z^2".into()));
    }
    let h = cx.grid().h();
    if !(q.delta > h && q.delta <= 2.0 * h) {
        return Err(Error::OutOfRange(format!("delta = {} must lie in (h, 2h] = ({h}, {}]", q.delta, 2.0 * h)));
    }
    if !(q.mass_cap >= 0.0) {
        return Err(Error::OutOfRange("negative mass cap".into()));
    }
    if q.xi.iter().all(|&x| x == 0) {
        return Ok(WidthResult { value: 0.0, mass_cap: q.mass_cap, sequence: Vec::new(), states_explored: 1 });
    }
    let bound = q.xi.iter().map(|x| x.abs()).max().unwrap_or(0) + 1;
    let grid = cx.grid();
    let nv = grid.num_vertices();
    let mut moves = Vec::new();
    for v in 0..nv {
        for a in 0..n {
            let w = grid.shift(v, a, 1);
            let cut = usize::from(grid.vertex_coords(v)[a] == 0) as i64;
            // unit from v to w: T += w - v, filling +edge
            moves.push((v, w, a, cut));
            moves.push((w, v, a, -cut));
        }
    }
    let mut explored = 0;
    let mut level = 0usize;
    while (level as f64) <= q.mass_cap {
        let start: State = (Vec::new(), vec![0; n]);
        let goal: State = (Vec::new(), q.xi.clone());
        let mut parent: HashMap<State, Option<State>> = HashMap::new();
        parent.insert(start.clone(), None);
        let mut queue = VecDeque::from([start]);
        let mut reached = false;
        while let Some(state) = queue.pop_front() {
            explored += 1;
            let mut chain = Chain::from_terms(cx, 0, state.0.iter().map(|&(i, v)| (i as usize, v as i64)))?;
            for &(from, to, axis, cut) in &moves {
                chain.add(from, -1);
                chain.add(to, 1);
                let mass: i64 = chain.terms().map(|(_, c)| c.abs()).sum();
                let mut class = state.1.clone();
                class[axis] += cut;
                if mass as usize <= level && class[axis].abs() <= bound {
                    let next = (chain_key(&chain), class);
                    if !parent.contains_key(&next) {
                        parent.insert(next.clone(), Some(state.clone()));
                        if next == goal {
                            reached = true;
                            break;
                        }
                        queue.push_back(next);
                    }
                }
                chain.add(to, -1);
                chain.add(from, 1);
            }
            if reached {
                break;
            }
        }
        if reached {
            let mut seq = Vec::new();
            let mut cur = Some(goal);
            while let Some(s) = cur {
                seq.push(Chain::from_terms(cx, 0, s.0.iter().map(|&(i, v)| (i as usize, v as i64)))?);
                cur = parent[&s].clone();
            }
            seq.reverse();
            return Ok(WidthResult { value: level as f64, mass_cap: q.mass_cap, sequence: seq, states_explored: explored });
        }
        level += 2;
    }
    Ok(WidthResult { value: f64::INFINITY, mass_cap: q.mass_cap, sequence: Vec::new(), states_explored: explored })
}

/// Real width: minimum of [`minmax_width`] over integer classes with
/// coefficients in `[-3, 3]` whose real image is `xi_bar`.
pub fn real_width(cx: &CubicalComplex, xi_bar: &[f64], delta: f64, mass_cap: f64) -> Result<WidthResult> {
    let mut best: Option<WidthResult> = None;
    for a in -3i64..=3 {
        for b in -3i64..=3 {
            let xi = vec![a, b];
            if xi.iter().zip(xi_bar).any(|(&x, &y)| (x as f64 - y).abs() > 1e-9) {
                continue;
            }
            let r = minmax_width(cx, &WidthQuery { xi, delta, mass_cap })?;
            if best.as_ref().map_or(true, |bst| r.value < bst.value) {
                best = Some(r);
            }
        }
    }
    Ok(best.unwrap_or(WidthResult {
        value: f64::INFINITY,
        mass_cap,
        sequence: Vec::new(),
        states_explored: 0,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassBoundRow {
    pub p: f64,
    pub mass: f64,
    pub energy: f64,
    /// `sigma_{k-1} M(T)`.
    pub lhs: f64,
    /// `lambda^(k/(k-1)) (k - p) E_p`.
    pub rhs: f64,
    pub ratio: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassBoundReport {
    pub rows: Vec<MassBoundRow>,
    pub tolerance: f64,
    pub tightest: f64,
    pub satisfied: bool,
}

/// Energy used for mass comparisons: the exact cone energy of the skeleton
/// retraction for circle maps on `T^2`, the discrete energy otherwise.
pub fn measured_energy(u: &GridMap, p: f64) -> Result<f64> {
    if u.target() == Target::Circle && u.grid().n() == 2 {
        retracted_energy(u, p)
    } else {
        p_energy(u, p)
    }
}

/// Checks `sigma_{k-1} M(T(u)) <= lambda^(k/(k-1)) (k-p) E_p(u) (1 + tol)`.
pub fn mass_bound_check(family: &[(f64, GridMap)], k: usize, tolerance: f64) -> Result<MassBoundReport> {
    if family.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::OutOfRange("p values must increase".into()));
    }
    let consts = DegreeConstants::new(k)?;
    let lam = consts.lambda.powf(k as f64 / (k as f64 - 1.0));
    let mut rows = Vec::new();
    for (p, u) in family {
        let t = jacobian_cycle(u)?;
        let mass = t.mass();
        let energy = measured_energy(u, *p)?;
        let lhs = consts.sigma_km1 * mass;
        let rhs = lam * (k as f64 - p) * energy;
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        rows.push(MassBoundRow { p: *p, mass, energy, lhs, rhs, ratio, satisfied: lhs <= rhs * (1.0 + tolerance) });
    }
    let tightest = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let satisfied = rows.iter().all(|r| r.satisfied);
    Ok(MassBoundReport { rows, tolerance, tightest, satisfied })
}

/// Windings of a circle map along the coordinate circles through vertex 0.
pub fn winding_vector(u: &GridMap) -> Result<Vec<i64>> {
    if u.target() != Target::Circle {
        return Err(Error::TargetMismatch("windings need a circle map".into()));
    }
    let g = u.grid();
    Ok((0..g.n())
        .map(|a| {
            let mut total = 0.0;
            let mut v = 0;
            for _ in 0..g.m() {
                let w = g.shift(v, a, 1);
                total += wrap_angle(u.angle(w) - u.angle(v));
                v = w;
            }
            (total / TWO_PI).round() as i64
        })
        .collect())
}

/// Class in `H_1(T^2)` (cut-number coordinates) of the preimage cycle of a
/// regular value of `v / u`: windings `(q1, q2)` give `(-q2, q1)`.
pub fn difference_class(u: &GridMap, v: &GridMap) -> Result<Vec<i64>> {
    if u.grid() != v.grid() || u.grid().n() != 2 {
        return Err(Error::DimensionMismatch("difference classes need two maps on one T^2 grid".into()));
    }
    let (a, b) = (winding_vector(u)?, winding_vector(v)?);
    let q = [b[0] - a[0], b[1] - a[1]];
    Ok(vec![-q[1], q[0]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::TorusGrid;
    use crate::fixtures::{vortex_lines, vortex_pair, winding_map, Vortex};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn winding_difference_classes() {
        let g = TorusGrid::unit(2, 8).unwrap();
        let u = winding_map(g.clone(), &[1, 0]).unwrap();
        let v = winding_map(g.clone(), &[2, -1]).unwrap();
        assert_eq!(winding_vector(&v).unwrap(), vec![2, -1]);
        assert_eq!(difference_class(&u, &v).unwrap(), vec![1, 1]);
        let pair = vortex_pair(g, [0.3, 0.3], [0.6, 0.6]).unwrap();
        assert_eq!(winding_vector(&pair).unwrap(), vec![0, 0]);
    }

    fn t2(m: usize) -> CubicalComplex {
        CubicalComplex::build(2, m, &[0.0, 0.0]).unwrap()
    }

    fn point_chain(cx: &CubicalComplex, pts: &[(usize, usize, i64)]) -> Chain {
        let g = cx.grid();
        Chain::from_terms(cx, 0, pts.iter().map(|&(i, j, c)| (g.vertex_index(&[i, j]), c))).unwrap()
    }

    #[test]
    fn boundary_of_square_and_fundamental_cycle() {
        let cx = t2(4);
        let sq = Chain::from_terms(&cx, 2, [(5, 1)]).unwrap();
        let b = sq.boundary().unwrap();
        assert_eq!(b.terms().count(), 4);
        assert!(b.boundary().unwrap().is_zero());
        let all = Chain::from_terms(&cx, 2, (0..16).map(|i| (i, 1))).unwrap();
        assert!(all.boundary().unwrap().is_zero());
        assert!(Chain::zero(&cx, 0).boundary().is_err());
    }

    #[test]
    fn boundary_squares_to_zero_on_random_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cx = CubicalComplex::build(3, 4, &[0.0; 3]).unwrap();
        for dim in 2..=3 {
            let c = Chain::from_terms(&cx, dim, (0..20).map(|_| (rng.gen_range(0..cx.num_cells(dim)), rng.gen_range(-3..=3)))).unwrap();
            assert!(c.boundary().unwrap().boundary().unwrap().is_zero());
        }
    }

    #[test]
    fn mass_examples() {
        let cx = t2(4);
        assert_eq!(Chain::zero(&cx, 1).mass(), 0.0);
        assert_relative_eq!(Chain::from_terms(&cx, 1, [(0, 1), (1, 1), (20, 1)]).unwrap().mass(), 0.75);
        assert_relative_eq!(Chain::from_terms(&cx, 2, [(3, -2)]).unwrap().mass(), 0.125);
    }

    #[test]
    fn jacobian_of_smooth_winding_map_vanishes() {
        let u = winding_map(TorusGrid::unit(2, 16).unwrap(), &[2, -1]).unwrap();
        assert!(jacobian_cycle(&u).unwrap().is_zero());
    }

    #[test]
    fn jacobian_of_vortex_pair_is_signed_dual_points() {
        let g = TorusGrid::unit(2, 16).unwrap();
        let u = vortex_pair(g.clone(), [0.28, 0.53], [0.72, 0.47]).unwrap();
        let t = jacobian_cycle(&u).unwrap();
        let dual = g.dual();
        assert_eq!(t.dim(), 0);
        assert_eq!(t.augmentation(), 0);
        let terms: Vec<(usize, i64)> = t.terms().collect();
        let mut expect = vec![(dual.vertex_index(&[4, 8]), 1), (dual.vertex_index(&[11, 7]), -1)];
        expect.sort();
        assert_eq!(terms, expect);
        // dual vertices sit at the plaquette centers
        let c = dual.vertex_position(dual.vertex_index(&[4, 8]));
        assert_relative_eq!(c[0], 4.5 / 16.0);
        assert_relative_eq!(c[1], 8.5 / 16.0);
    }

    #[test]
    fn jacobian_of_vortex_lines_is_closed_and_vertical() {
        let g = TorusGrid::unit(3, 8).unwrap();
        let u = vortex_lines(g, &[Vortex::new(0.3, 0.3, 1), Vortex::new(0.7, 0.6, -1)]).unwrap();
        let t = jacobian_cycle(&u).unwrap();
        assert_eq!(t.dim(), 1);
        assert!(t.boundary().unwrap().is_zero());
        assert_eq!(t.terms().count(), 16);
        for (i, _) in t.terms() {
            assert_eq!(t.complex().cell(1, i).axes, 0b100);
        }
        assert_eq!(homology_class(&t).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn jacobian_classes_vanish_on_product_fixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let g = TorusGrid::unit(3, 8).unwrap();
            let a = [rng.gen_range(0.05..0.45), rng.gen_range(0.05..0.95)];
            let b = [rng.gen_range(0.55..0.95), rng.gen_range(0.05..0.95)];
            let q = [rng.gen_range(-2..=2i64), rng.gen_range(-2..=2i64), rng.gen_range(-2..=2i64)];
            let vort = vortex_lines(g.clone(), &[Vortex::new(a[0], a[1], 1), Vortex::new(b[0], b[1], -1)]).unwrap();
            let wind = winding_map(g.clone(), &q).unwrap();
            let sum: Vec<f64> = vort.values().iter().zip(wind.values()).map(|(x, y)| x + y).collect();
            let u = GridMap::circle(g, sum).unwrap();
            let t = jacobian_cycle(&u).unwrap();
            // windings along the slices of a closed torus cancel, so the Jacobian is null-homologous
            assert_eq!(homology_class(&t).unwrap(), vec![0, 0, 0]);
        }
    }

    #[test]
    fn homology_examples() {
        let cx = t2(4);
        assert_eq!(homology_class(&Chain::zero(&cx, 1)).unwrap(), vec![0, 0]);
        let g = cx.grid();
        let y_circle = Chain::from_terms(&cx, 1, (0..4).map(|j| (16 + g.vertex_index(&[1, j]), 1))).unwrap();
        assert_eq!(homology_class(&y_circle).unwrap(), vec![0, 1]);
        let sq = Chain::from_terms(&cx, 2, [(0, 1)]).unwrap().boundary().unwrap();
        assert_eq!(homology_class(&sq).unwrap(), vec![0, 0]);
        let open = Chain::from_terms(&cx, 1, [(0, 1)]).unwrap();
        assert_eq!(homology_class(&open), Err(Error::NotACycle));
    }

    #[test]
    fn flat_norm_examples() {
        let cx = t2(4);
        for method in [FlatMethod::ExactFlow, FlatMethod::Exhaustive] {
            assert_eq!(flat_norm(&Chain::zero(&cx, 0), method).unwrap().value, 0.0);
            let t = point_chain(&cx, &[(1, 1, 1), (2, 1, -1)]);
            let r = flat_norm(&t, method).unwrap();
            assert_relative_eq!(r.value, 0.25);
            assert_eq!(r.t_prime.combine(&r.s.boundary().unwrap(), 1).unwrap(), t);
        }
        let t = Chain::from_terms(&cx, 2, [(6, 1)]).unwrap().boundary().unwrap();
        let r = flat_norm(&t, FlatMethod::Exhaustive).unwrap();
        assert_relative_eq!(r.value, 0.0625);
        assert_eq!(r.t_prime.combine(&r.s.boundary().unwrap(), 1).unwrap(), t);
        assert!(matches!(flat_norm(&t, FlatMethod::ExactFlow), Err(Error::MethodMismatch { .. })));
    }

    #[test]
    fn far_pair_is_cheaper_to_dispose() {
        let cx = t2(16);
        let t = point_chain(&cx, &[(0, 0, 1), (8, 8, -1)]);
        let r = flat_norm(&t, FlatMethod::ExactFlow).unwrap();
        assert_relative_eq!(r.value, 1.0 * 2.0_f64.min(16.0 / 16.0));
        assert_relative_eq!(r.value, 1.0);
        let t = point_chain(&cx, &[(0, 0, 1), (12, 12, -1)]);
        assert_relative_eq!(flat_norm(&t, FlatMethod::ExactFlow).unwrap().value, 0.5);
    }

    #[test]
    fn exact_flow_matches_exhaustive_on_random_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let cx = t2(4);
        for _ in 0..50 {
            let mut t = Chain::zero(&cx, 0);
            for v in 0..16 {
                t.add(v, rng.gen_range(-2..=2));
            }
            let total = t.augmentation();
            // rebalance at a random vertex while keeping coefficients in [-2, 2]
            let mut left = total;
            while left != 0 {
                let v = rng.gen_range(0..16);
                let c = t.coefficient(v);
                if left > 0 && c > -2 {
                    t.add(v, -1);
                    left -= 1;
                } else if left < 0 && c < 2 {
                    t.add(v, 1);
                    left += 1;
                }
            }
            let a = flat_norm(&t, FlatMethod::ExactFlow).unwrap();
            let b = flat_norm(&t, FlatMethod::Exhaustive).unwrap();
            assert!((a.value - b.value).abs() < 1e-12, "{} vs {}", a.value, b.value);
            assert!(a.value <= t.mass() + 1e-12);
        }
    }

    #[test]
    fn flat_norm_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cx = t2(8);
        let random = |rng: &mut ChaCha8Rng| {
            let (a, b) = (rng.gen_range(0..64), rng.gen_range(0..64));
            let mut c = Chain::zero(&cx, 0);
            c.add(a, 1);
            c.add(b, -1);
            c
        };
        for _ in 0..30 {
            let (x, y) = (random(&mut rng), random(&mut rng));
            let f = |c: &Chain| flat_norm(c, FlatMethod::ExactFlow).unwrap().value;
            assert!(f(&x.combine(&y, 1).unwrap()) <= f(&x) + f(&y) + 1e-12);
        }
    }

    #[test]
    fn exhaustive_respects_caps() {
        let cx = t2(16);
        let t = point_chain(&cx, &[(0, 0, 1), (1, 0, -1)]);
        assert!(matches!(flat_norm(&t, FlatMethod::Exhaustive), Err(Error::SizeCap(_))));
    }

    fn walk(cx: &CubicalComplex, laps: usize) -> Vec<Chain> {
        let m = cx.grid().m();
        let mut seq = vec![Chain::zero(cx, 0)];
        for step in 1..=laps * m {
            let j = step % m;
            if step == laps * m {
                seq.push(Chain::zero(cx, 0));
            } else {
                seq.push(point_chain(cx, &[(0, 0, -1), (0, j, 1)]));
            }
        }
        seq
    }

    #[test]
    fn almgren_class_of_vortex_walks() {
        let cx = t2(8);
        assert_eq!(almgren_class(&[Chain::zero(&cx, 0), Chain::zero(&cx, 0)], 0.2, DEFAULT_EPS0).unwrap().class, vec![0, 0]);
        assert_eq!(almgren_class(&walk(&cx, 1), 0.2, DEFAULT_EPS0).unwrap().class, vec![0, 1]);
    }

    #[test]
    fn almgren_class_of_double_walk() {
        let cx = t2(8);
        let mut seq = walk(&cx, 1);
        seq.extend(walk(&cx, 1).into_iter().skip(1));
        assert_eq!(almgren_class(&seq, 0.2, DEFAULT_EPS0).unwrap().class, vec![0, 2]);
    }

    #[test]
    fn almgren_errors() {
        let cx = t2(8);
        let seq = vec![Chain::zero(&cx, 0), point_chain(&cx, &[(0, 0, -1), (0, 3, 1)]), Chain::zero(&cx, 0)];
        assert!(matches!(almgren_class(&seq, 0.2, DEFAULT_EPS0), Err(Error::Fineness { step: 1, .. })));
        assert!(matches!(almgren_class(&seq, 1.0, 0.5), Err(Error::FillTooBig { step: 1, .. })));
        let open = vec![point_chain(&cx, &[(0, 0, -1), (0, 1, 1)]), Chain::zero(&cx, 0)];
        assert_eq!(almgren_class(&open, 0.2, DEFAULT_EPS0), Err(Error::NotClosed));
    }

    #[test]
    fn almgren_class_ignores_filling_choice() {
        // swap a unit-edge filling for the other three sides of an adjacent square
        let m = 16;
        let cx = t2(m);
        let g = cx.grid().clone();
        let seq = walk(&cx, 1);
        let base = almgren_class(&seq, 0.1, DEFAULT_EPS0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let mut fills = base.fillings.clone();
            let i = rng.gen_range(0..fills.len());
            let (edge, _) = fills[i].terms().next().unwrap();
            let v = cx.cell(1, edge).base;
            let (sq, sign) = if rng.gen() { (v, 1) } else { (g.shift(v, 0, -1), -1) };
            let sq = Chain::from_terms(&cx, 2, [(sq, sign)]).unwrap();
            fills[i] = fills[i].combine(&sq.boundary().unwrap(), 1).unwrap();
            assert_relative_eq!(fills[i].mass(), 3.0 / m as f64);
            let r = almgren_class_with(&seq, fills, DEFAULT_EPS0).unwrap();
            assert_eq!(r.class, base.class);
        }
    }

    #[test]
    fn width_examples() {
        let cx = t2(4);
        let zero = minmax_width(&cx, &WidthQuery { xi: vec![0, 0], delta: 0.3, mass_cap: 4.0 }).unwrap();
        assert_eq!(zero.value, 0.0);
        let w = minmax_width(&cx, &WidthQuery { xi: vec![0, 1], delta: 0.3, mass_cap: 4.0 }).unwrap();
        assert!(w.found());
        assert_eq!(w.value, 2.0);
        let seq = &w.sequence;
        assert!(seq.iter().all(|c| c.mass() <= w.value));
        let none = minmax_width(&cx, &WidthQuery { xi: vec![0, 1], delta: 0.3, mass_cap: 1.0 }).unwrap();
        assert!(!none.found());
        assert_eq!(none.value, f64::INFINITY);
    }

    #[test]
    fn real_width_matches_integer_width() {
        let cx = t2(4);
        let r = real_width(&cx, &[1.0, 0.0], 0.3, 4.0).unwrap();
        assert_eq!(r.value, 2.0);
    }

    #[test]
    fn mass_bound_for_constant_maps_is_trivial() {
        let g = TorusGrid::unit(2, 8).unwrap();
        let fam = vec![(1.9, GridMap::constant_circle(g.clone(), 0.3)), (1.95, GridMap::constant_circle(g, 0.3))];
        let r = mass_bound_check(&fam, 2, 0.1).unwrap();
        assert!(r.satisfied);
        assert_eq!(r.tightest, 0.0);
    }

    #[test]
    fn mass_bound_for_vortex_pairs() {
        let g = TorusGrid::unit(2, 32).unwrap();
        let fam: Vec<(f64, GridMap)> = [1.9, 1.95, 1.99]
            .iter()
            .map(|&p| (p, vortex_pair(g.clone(), [0.26, 0.51], [0.76, 0.51]).unwrap()))
            .collect();
        let r = mass_bound_check(&fam, 2, 0.1).unwrap();
        assert!(r.satisfied, "{r:?}");
        assert!(r.tightest > 0.0 && r.tightest < 1.0);
    }
}
