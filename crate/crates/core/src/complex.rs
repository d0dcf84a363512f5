//! Periodic cubical complexes on the flat unit torus `T^n` (n = 2, 3).
//!
//! Vertices carry integer multi-indices `(i_0, .., i_{n-1})` reduced mod `m`
//! and are stored with axis 0 varying fastest: `index = i_0 + m*(i_1 + m*i_2)`.
//! A `j`-cell is a base vertex plus a set of `j` axes; it is oriented by
//! increasing axis order. Cells of one dimension are indexed by
//! `axis_rank * m^n + base`, with axis sets ordered lexicographically.
//!
//! Internally most geometry is done in *grid units* `xi = (x - offset) * m`,
//! where vertices sit at integer points and every cell has side one.

use crate::error::{Error, Result};

/// Relative tolerance below which a radial retraction is considered singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Uniform periodic grid on the unit torus, translated by `offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    n: usize,
    m: usize,
    offset: Vec<f64>,
}

impl TorusGrid {
    pub fn new(n: usize, m: usize, offset: &[f64]) -> Result<Self> {
        if !(n == 2 || n == 3) {
            return Err(Error::InvalidGrid(format!("dimension {n} not in {{2,3}}")));
        }
        if m < 3 {
            return Err(Error::InvalidGrid(format!("m = {m} < 3")));
        }
        if offset.len() != n {
            return Err(Error::InvalidGrid(format!(
                "offset has {} components, expected {n}",
                offset.len()
            )));
        }
        let h = 1.0 / m as f64;
        if offset.iter().any(|&a| !(0.0..h).contains(&a)) {
            return Err(Error::InvalidGrid(format!("offset {offset:?} outside [0, 1/m)")));
        }
        Ok(Self { n, m, offset: offset.to_vec() })
    }

    /// Grid with zero offset.
    pub fn unit(n: usize, m: usize) -> Result<Self> {
        Self::new(n, m, &vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// Cell side length `1/m`.
    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn num_vertices(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    pub fn vertex_index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .rev()
            .fold(0, |acc, &c| acc * self.m + (c % self.m))
    }

    pub fn vertex_coords(&self, mut idx: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            out.push(idx % self.m);
            idx /= self.m;
        }
        out
    }

    /// Vertex reached from `idx` by `steps` unit moves along `axis` (periodic).
    pub fn shift(&self, idx: usize, axis: usize, steps: isize) -> usize {
        let mut c = self.vertex_coords(idx);
        let m = self.m as isize;
        c[axis] = (((c[axis] as isize + steps) % m + m) % m) as usize;
        self.vertex_index(&c)
    }

    pub fn vertex_position(&self, idx: usize) -> Vec<f64> {
        let h = self.h();
        self.vertex_coords(idx)
            .iter()
            .zip(&self.offset)
            .map(|(&c, &a)| a + c as f64 * h)
            .collect()
    }

    /// Physical point to grid units, wrapped into `[0, m)^n`.
    pub fn to_grid_units(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m as f64;
        x.iter()
            .zip(&self.offset)
            .map(|(&xi, &a)| ((xi - a) * m).rem_euclid(m))
            .collect()
    }

    pub fn from_grid_units(&self, xi: &[f64]) -> Vec<f64> {
        let h = self.h();
        xi.iter()
            .zip(&self.offset)
            .map(|(&g, &a)| (a + g * h).rem_euclid(1.0))
            .collect()
    }

    /// The dual grid, whose vertices are the centers of the top cells.
    pub fn dual(&self) -> TorusGrid {
        let h = self.h();
        let offset = self
            .offset
            .iter()
            .map(|&a| {
                let b = a + 0.5 * h;
                if b >= h {
                    b - h
                } else {
                    b
                }
            })
            .collect();
        TorusGrid { n: self.n, m: self.m, offset }
    }

    /// Index shift between "vertex at `offset + (w + 1/2) h`" and the dual grid's own labels.
    fn dual_shift(&self, axis: usize) -> usize {
        usize::from(self.offset[axis] + 0.5 * self.h() >= self.h())
    }
}

/// Axis sets of size `j` in `n` dimensions, as bitmasks, in lexicographic order.
pub fn axis_sets(n: usize, j: usize) -> Vec<u8> {
    fn rec(start: usize, n: usize, left: usize, mask: u8, out: &mut Vec<u8>) {
        if left == 0 {
            out.push(mask);
            return;
        }
        for a in start..n {
            rec(a + 1, n, left - 1, mask | (1 << a), out);
        }
    }
    let mut out = Vec::new();
    rec(0, n, j, 0, &mut out);
    out
}

/// Sorted axes of a bitmask.
pub fn axes_of(mask: u8) -> Vec<usize> {
    (0..8).filter(|a| mask & (1 << a) != 0).collect()
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// An (unoriented) cell: base vertex and the axes it spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub base: usize,
    pub axes: u8,
}

impl Cell {
    pub fn dim(&self) -> usize {
        self.axes.count_ones() as usize
    }
}

/// A cell together with an orientation sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrientedCell {
    pub cell: Cell,
    pub orientation: i8,
}

/// The periodic cubical complex of a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct CubicalComplex {
    grid: TorusGrid,
    axis_sets: Vec<Vec<u8>>,
}

/// Result of the composite retraction onto a skeleton.
#[derive(Debug, Clone, PartialEq)]
pub enum Retraction {
    Point(Vec<f64>),
    Singular,
}

impl CubicalComplex {
    pub fn new(grid: TorusGrid) -> Self {
        let axis_sets = (0..=grid.n).map(|j| axis_sets(grid.n, j)).collect();
        Self { grid, axis_sets }
    }

    pub fn build(n: usize, m: usize, offset: &[f64]) -> Result<Self> {
        Ok(Self::new(TorusGrid::new(n, m, offset)?))
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn num_cells(&self, j: usize) -> usize {
        binomial(self.grid.n, j) * self.grid.num_vertices()
    }

    pub fn cell_index(&self, cell: &Cell) -> usize {
        let j = cell.dim();
        let rank = self.axis_sets[j]
            .iter()
            .position(|&s| s == cell.axes)
            .expect("axes belong to this complex");
        rank * self.grid.num_vertices() + cell.base
    }

    pub fn cell(&self, j: usize, index: usize) -> Cell {
        let nv = self.grid.num_vertices();
        Cell { base: index % nv, axes: self.axis_sets[j][index / nv] }
    }

    pub fn cells(&self, j: usize) -> impl Iterator<Item = Cell> + '_ {
        (0..self.num_cells(j)).map(move |i| self.cell(j, i))
    }

    /// Oriented facets of a cell: `sum_i (-1)^i (upper_i - lower_i)`.
    pub fn boundary(&self, cell: &Cell) -> Vec<(Cell, i8)> {
        let axes = axes_of(cell.axes);
        let mut out = Vec::with_capacity(2 * axes.len());
        for (i, &a) in axes.iter().enumerate() {
            let sign: i8 = if i % 2 == 0 { 1 } else { -1 };
            let face_axes = cell.axes & !(1 << a);
            let upper = self.grid.shift(cell.base, a, 1);
            out.push((Cell { base: upper, axes: face_axes }, sign));
            out.push((Cell { base: cell.base, axes: face_axes }, -sign));
        }
        out
    }

    /// Cells of dimension `dim + 1` having `cell` as a facet, with incidence signs.
    pub fn cofaces(&self, cell: &Cell) -> Vec<(Cell, i8)> {
        let mut out = Vec::new();
        for a in 0..self.grid.n {
            if cell.axes & (1 << a) != 0 {
                continue;
            }
            let axes = cell.axes | (1 << a);
            for base in [cell.base, self.grid.shift(cell.base, a, -1)] {
                let c = Cell { base, axes };
                if let Some(&(_, s)) = self.boundary(&c).iter().find(|(f, _)| f == cell) {
                    out.push((c, s));
                }
            }
        }
        out
    }

    /// Center of a cell in physical coordinates.
    pub fn center(&self, cell: &Cell) -> Vec<f64> {
        let xi: Vec<f64> = self
            .grid
            .vertex_coords(cell.base)
            .iter()
            .enumerate()
            .map(|(a, &c)| c as f64 + if cell.axes & (1 << a) != 0 { 0.5 } else { 0.0 })
            .collect();
        self.grid.from_grid_units(&xi)
    }

    /// The dual cell `P(sigma)`: the `(n-k)`-cube of the dual grid through the
    /// center of `sigma`, spanning the complementary axes. The orientation is
    /// the sign of the permutation `(axes, complement)`.
    pub fn dual_cell(&self, sigma: &Cell) -> Result<OrientedCell> {
        if sigma.dim() > self.grid.n {
            return Err(Error::DimensionMismatch(format!(
                "cell of dimension {} in T^{}",
                sigma.dim(),
                self.grid.n
            )));
        }
        let n = self.grid.n;
        let full: u8 = (1 << n) - 1;
        let comp = full & !sigma.axes;
        let coords = self.grid.vertex_coords(sigma.base);
        let m = self.grid.m;
        let dual_coords: Vec<usize> = (0..n)
            .map(|a| {
                let w = if comp & (1 << a) != 0 { coords[a] + m - 1 } else { coords[a] };
                (w + self.grid.dual_shift(a)) % m
            })
            .collect();
        let dual = self.grid.dual();
        let mut order = axes_of(sigma.axes);
        order.extend(axes_of(comp));
        Ok(OrientedCell {
            cell: Cell { base: dual.vertex_index(&dual_coords), axes: comp },
            orientation: permutation_sign(&order),
        })
    }

    /// `(n-k)`-dimensional measure of a dual cell (every dual cell is a unit cube).
    pub fn dual_cell_measure(&self, sigma: &Cell) -> f64 {
        self.grid.h().powi((self.grid.n - sigma.dim()) as i32)
    }

    /// Composite retraction `phi_{j,0} o ... o phi_{n,0}` onto the `(j-1)`-skeleton.
    pub fn retract(&self, j: usize, x: &[f64]) -> Retraction {
        let mut xi = self.grid.to_grid_units(x);
        let n = self.grid.n;
        let mut free: Vec<usize> = (0..n).collect();
        for d in (j.max(1)..=n).rev() {
            if free.len() < d {
                continue;
            }
            let centers: Vec<f64> = free.iter().map(|&a| xi[a].floor() + 0.5).collect();
            let y: Vec<f64> = free.iter().zip(&centers).map(|(&a, c)| xi[a] - c).collect();
            let r = y.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if r < SINGULAR_TOL {
                return Retraction::Singular;
            }
            let mut still_free = Vec::with_capacity(free.len());
            for ((&a, &c), &ya) in free.iter().zip(&centers).zip(&y) {
                if ya.abs() >= r * (1.0 - 1e-14) {
                    xi[a] = c + 0.5 * ya.signum();
                } else {
                    xi[a] = c + 0.5 * ya / r;
                    still_free.push(a);
                }
            }
            free = still_free;
        }
        Retraction::Point(self.grid.from_grid_units(&xi))
    }

    /// Euclidean distance from `x` to the `j`-skeleton.
    pub fn distance_to_skeleton(&self, x: &[f64], j: usize) -> f64 {
        let xi = self.grid.to_grid_units(x);
        let mut d: Vec<f64> = xi.iter().map(|g| (g - g.round()).abs()).collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = self.grid.n.saturating_sub(j);
        d[..k].iter().map(|v| v * v).sum::<f64>().sqrt() * self.grid.h()
    }
}

fn permutation_sign(order: &[usize]) -> i8 {
    let mut inv = 0;
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if order[i] > order[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Single radial retraction `x -> half_width * x / max(s, |x|_inf)` on a cell
/// identified with `[-half_width, half_width]^j`.
pub fn phi_retraction(x: &[f64], s: f64, half_width: f64) -> Result<Vec<f64>> {
    if !(0.0..=half_width).contains(&s) {
        return Err(Error::OutOfRange(format!("s = {s} not in [0, {half_width}]")));
    }
    let r = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let denom = s.max(r);
    if denom < SINGULAR_TOL * half_width {
        return Err(Error::OutOfRange("retraction is singular at the cell center".into()));
    }
    Ok(x.iter().map(|v| half_width * v / denom).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_on_small_tori() {
        let c = CubicalComplex::build(2, 4, &[0.0, 0.0]).unwrap();
        assert_eq!((c.num_cells(0), c.num_cells(1), c.num_cells(2)), (16, 32, 16));
        let c = CubicalComplex::build(3, 3, &[0.0; 3]).unwrap();
        let counts: Vec<_> = (0..=3).map(|j| c.num_cells(j)).collect();
        assert_eq!(counts, vec![27, 81, 81, 27]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(CubicalComplex::build(4, 4, &[0.0; 4]).is_err());
        assert!(CubicalComplex::build(2, 2, &[0.0; 2]).is_err());
        assert!(CubicalComplex::build(2, 4, &[0.25, 0.0]).is_err());
    }

    #[test]
    fn boundary_of_boundary_vanishes_exhaustively() {
        for n in [2, 3] {
            for m in 3..=6 {
                let c = CubicalComplex::build(n, m, &vec![0.0; n]).unwrap();
                for j in 2..=n {
                    for cell in c.cells(j) {
                        let mut acc = std::collections::HashMap::<Cell, i32>::new();
                        for (f, s) in c.boundary(&cell) {
                            for (g, t) in c.boundary(&f) {
                                *acc.entry(g).or_default() += (s * t) as i32;
                            }
                        }
                        assert!(acc.values().all(|&v| v == 0), "n={n} m={m} {cell:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn every_cell_has_two_codim_cofaces_per_free_axis() {
        let c = CubicalComplex::build(3, 4, &[0.0; 3]).unwrap();
        for j in 0..3 {
            for cell in c.cells(j) {
                assert_eq!(c.cofaces(&cell).len(), 2 * (3 - j));
            }
        }
    }

    #[test]
    fn phi_examples() {
        let d = 0.5;
        let x = [0.1, -0.2];
        assert_eq!(phi_retraction(&x, d, d).unwrap(), vec![0.1, -0.2]);
        let y = phi_retraction(&[0.25, -0.1], 0.0, d).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-15 && (y[1] + 0.2).abs() < 1e-15);
        for s in [0.0, 0.2, 0.5] {
            assert_eq!(phi_retraction(&[0.5, 0.3], s, d).unwrap(), vec![0.5, 0.3]);
        }
        assert!(phi_retraction(&x, 0.7, d).is_err());
    }

    #[test]
    fn composite_retraction_examples() {
        let c = CubicalComplex::build(2, 4, &[0.0, 0.0]).unwrap();
        // on the 1-skeleton already
        let x = [0.25, 0.1];
        assert_eq!(c.retract(2, &x), Retraction::Point(vec![0.25, 0.1]));
        // square center
        assert_eq!(c.retract(2, &[0.125, 0.125]), Retraction::Singular);
        // diagonal point at |y|_inf = half/3 from the center goes to 3y
        let half = 0.125;
        let p = [0.125 + half / 3.0, 0.125 + half / 3.0];
        match c.retract(2, &p) {
            Retraction::Point(q) => {
                assert!((q[0] - 0.25).abs() < 1e-14 && (q[1] - 0.25).abs() < 1e-14);
            }
            Retraction::Singular => panic!("unexpected singular"),
        }
    }

    #[test]
    fn dual_of_square_in_three_dims_is_edge_between_cube_centers() {
        let c = CubicalComplex::build(3, 4, &[0.0; 3]).unwrap();
        let sigma = Cell { base: c.grid().vertex_index(&[1, 2, 3]), axes: 0b011 };
        let d = c.dual_cell(&sigma).unwrap();
        assert_eq!(d.cell.axes, 0b100);
        let dual = c.grid().dual();
        let from = dual.vertex_position(d.cell.base);
        let to = dual.vertex_position(dual.shift(d.cell.base, 2, 1));
        // centers of the cubes below and above sigma
        assert_eq!(from, vec![0.375, 0.625, 0.625]);
        assert_eq!(to, vec![0.375, 0.625, 0.875]);
        assert_eq!(d.orientation, 1);
        assert!((c.dual_cell_measure(&sigma) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn dual_of_top_cell_is_its_center() {
        let c = CubicalComplex::build(2, 4, &[0.1, 0.05]).unwrap();
        let sigma = Cell { base: 5, axes: 0b11 };
        let d = c.dual_cell(&sigma).unwrap();
        assert_eq!(d.cell.axes, 0);
        let p = c.grid().dual().vertex_position(d.cell.base);
        let q = c.center(&sigma);
        assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn distinct_dual_cells_are_distinct() {
        let c = CubicalComplex::build(3, 3, &[0.0; 3]).unwrap();
        let mut seen = std::collections::HashSet::new();
        for s in c.cells(2) {
            assert!(seen.insert(c.dual_cell(&s).unwrap().cell));
        }
    }
}
