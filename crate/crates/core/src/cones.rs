//! Exact p-energies of circle maps on `T^2` that are radial cones over the
//! 1-skeleton.
//!
//! A [`SkeletonMap`] stores vertex angles and, per edge, the lifted angle
//! increment along the edge; the edge map is linear in the lifted angle. Its
//! cone extension `f(h/2 * y / |y|_inf)` on every square is exactly the map
//! `u o Phi_2` produced by the skeleton retraction.
//!
//! For a cone with apex `O` over a straight segment `P -> P + D` (relative to
//! `O`) whose data increases linearly by `delta`, restricted to radial
//! parameters `rho in [rho0, 1]`,
//!
//! ```text
//! E = |delta|^p |P x D|^(1-p) * int_0^1 |P + tD|^p dt * (1 - rho0^(2-p)) / (2-p).
//! ```
//!
//! Every energy below is assembled from this formula.

use crate::complex::TorusGrid;
use crate::error::{Error, Result};
use crate::maps::{wrap_angle, GridMap, Target, TWO_PI};

// 8-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// `int_0^1 |P + tD|^p dt`, composite Gauss-Legendre on 4 panels.
fn segment_moment(pt: [f64; 2], d: [f64; 2], p: f64) -> f64 {
    let panels = 4;
    let mut acc = 0.0;
    for k in 0..panels {
        let (a, b) = (k as f64 / panels as f64, (k + 1) as f64 / panels as f64);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let t = mid + half * x;
            let r = ((pt[0] + t * d[0]).powi(2) + (pt[1] + t * d[1]).powi(2)).sqrt();
            acc += w * half * r.powf(p);
        }
    }
    acc
}

/// Angular coefficient of a cone over a segment: the energy per unit of the
/// radial factor `int rho^(1-p) d rho`.
pub fn segment_coefficient(p: f64, from: [f64; 2], to: [f64; 2], delta: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    let d = [to[0] - from[0], to[1] - from[1]];
    let cross = (from[0] * d[1] - from[1] * d[0]).abs();
    delta.abs().powf(p) * cross.powf(1.0 - p) * segment_moment(from, d, p)
}

/// `int_{rho0}^1 rho^(1-p) d rho` for `p < 2`.
pub fn radial_factor(p: f64, rho0: f64) -> f64 {
    (1.0 - rho0.powf(2.0 - p)) / (2.0 - p)
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p < 2.0) {
        return Err(Error::OutOfRange(format!("cone energies need 1 <= p < 2, got {p}")));
    }
    Ok(())
}

/// Edge `(axis, base)` of the square grid; index `axis * m^2 + base`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub axis: usize,
    pub base: usize,
}

/// A circle-valued map on the 1-skeleton of a `T^2` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonMap {
    grid: TorusGrid,
    angles: Vec<f64>,
    increments: Vec<f64>,
}

/// One boundary segment of a square, relative to the square's center.
#[derive(Debug, Clone, Copy)]
struct Side {
    edge: usize,
    from: [f64; 2],
    to: [f64; 2],
}

impl SkeletonMap {
    /// Restriction of a grid map to the 1-skeleton with wrapped increments.
    pub fn from_map(u: &GridMap) -> Result<Self> {
        if u.target() != Target::Circle || u.grid().n() != 2 {
            return Err(Error::TargetMismatch("skeleton maps need a circle map on T^2".into()));
        }
        let grid = u.grid().clone();
        let nv = grid.num_vertices();
        let mut increments = vec![0.0; 2 * nv];
        for axis in 0..2 {
            for v in 0..nv {
                let w = grid.shift(v, axis, 1);
                increments[axis * nv + v] = wrap_angle(u.angle(w) - u.angle(v));
            }
        }
        Ok(Self { angles: u.values().to_vec(), grid, increments })
    }

    pub fn new(grid: TorusGrid, angles: Vec<f64>, increments: Vec<f64>) -> Result<Self> {
        let nv = grid.num_vertices();
        if grid.n() != 2 || angles.len() != nv || increments.len() != 2 * nv {
            return Err(Error::DimensionMismatch("skeleton map sizes".into()));
        }
        Ok(Self { grid, angles, increments })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn edge_index(&self, e: Edge) -> usize {
        e.axis * self.grid.num_vertices() + e.base
    }

    pub fn edge(&self, index: usize) -> Edge {
        let nv = self.grid.num_vertices();
        Edge { axis: index / nv, base: index % nv }
    }

    pub fn num_edges(&self) -> usize {
        self.increments.len()
    }

    pub fn set_increment(&mut self, index: usize, value: f64) {
        self.increments[index] = value;
    }

    pub fn set_angles(&mut self, angles: Vec<f64>) {
        self.angles = angles;
    }

    /// Endpoints of an edge.
    pub fn edge_vertices(&self, index: usize) -> (usize, usize) {
        let e = self.edge(index);
        (e.base, self.grid.shift(e.base, e.axis, 1))
    }

    fn sides(&self, square: usize) -> [Side; 4] {
        let nv = self.grid.num_vertices();
        let hh = 0.5 * self.grid.h();
        let right = self.grid.shift(square, 0, 1);
        let up = self.grid.shift(square, 1, 1);
        [
            Side { edge: square, from: [-hh, -hh], to: [hh, -hh] },
            Side { edge: nv + right, from: [hh, -hh], to: [hh, hh] },
            Side { edge: up, from: [hh, hh], to: [-hh, hh] },
            Side { edge: nv + square, from: [-hh, hh], to: [-hh, -hh] },
        ]
    }

    /// Winding of the square with base vertex `square`.
    pub fn winding(&self, square: usize) -> i64 {
        let s = self.sides(square);
        let total = self.increments[s[0].edge] + self.increments[s[1].edge]
            - self.increments[s[2].edge]
            - self.increments[s[3].edge];
        (total / TWO_PI).round() as i64
    }

    pub fn windings(&self) -> Vec<i64> {
        (0..self.grid.num_vertices()).map(|v| self.winding(v)).collect()
    }

    /// Sum of the angular coefficients of the square's cone (energy times `2 - p`).
    pub fn square_coefficient(&self, square: usize, p: f64) -> f64 {
        self.sides(square)
            .iter()
            .map(|s| segment_coefficient(p, s.from, s.to, self.increments[s.edge]))
            .sum()
    }

    /// Exact energy of the cone extension on one square.
    pub fn square_energy(&self, square: usize, p: f64) -> Result<f64> {
        check_p(p)?;
        Ok(self.square_coefficient(square, p) * radial_factor(p, 0.0))
    }

    /// Exact energy of the cone extension over all of `T^2`.
    pub fn cone_energy(&self, p: f64) -> Result<f64> {
        check_p(p)?;
        let c: f64 = (0..self.grid.num_vertices()).map(|v| self.square_coefficient(v, p)).sum();
        Ok(c * radial_factor(p, 0.0))
    }

    /// Angle at parameter `t in [0, 1]` along an edge.
    pub fn edge_value(&self, index: usize, t: f64) -> f64 {
        let (a, _) = self.edge_vertices(index);
        self.angles[a] + t * self.increments[index]
    }

    /// Value of the cone extension at a physical point, `None` at square centers.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        let m = self.grid.m();
        let xi = self.grid.to_grid_units(x);
        let (i, j) = (xi[0].floor() as usize % m, xi[1].floor() as usize % m);
        let (ya, yb) = (xi[0] - xi[0].floor() - 0.5, xi[1] - xi[1].floor() - 0.5);
        let r = ya.abs().max(yb.abs());
        if r < crate::complex::SINGULAR_TOL {
            return None;
        }
        let (ba, bb) = (0.5 * ya / r, 0.5 * yb / r);
        let square = self.grid.vertex_index(&[i, j]);
        let nv = self.grid.num_vertices();
        let value = if bb <= -0.5 + 1e-15 {
            self.edge_value(square, ba + 0.5)
        } else if bb >= 0.5 - 1e-15 {
            self.edge_value(self.grid.shift(square, 1, 1), ba + 0.5)
        } else if ba >= 0.5 - 1e-15 {
            self.edge_value(nv + self.grid.shift(square, 0, 1), bb + 0.5)
        } else {
            self.edge_value(nv + square, bb + 0.5)
        };
        Some(value.rem_euclid(TWO_PI))
    }
}

/// Energy of `u o Phi_2`, computed exactly from the cone formula.
pub fn retracted_energy(u: &GridMap, p: f64) -> Result<f64> {
    SkeletonMap::from_map(u)?.cone_energy(p)
}

/// Energy of `u o Phi_2` over the squares whose centers satisfy `inside`.
pub fn retracted_energy_region(u: &GridMap, p: f64, inside: impl Fn(&[f64]) -> bool) -> Result<f64> {
    check_p(p)?;
    let s = SkeletonMap::from_map(u)?;
    let h = u.grid().h();
    let c: f64 = (0..u.grid().num_vertices())
        .filter(|&v| {
            let c: Vec<f64> = u.grid().vertex_position(v).iter().map(|x| x + 0.5 * h).collect();
            inside(&c)
        })
        .map(|v| s.square_coefficient(v, p))
        .sum();
    Ok(c * radial_factor(p, 0.0))
}

/// Energy of `u o phi_{2,s}` with `s = frac * h/2`: on each square a copy of
/// the cell scaled by `frac` (forward-stencil energy times `frac^(2-p)`)
/// surrounded by the cone over the square boundary.
pub fn shrink_energy(u: &GridMap, skeleton: &SkeletonMap, frac: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    let inner = frac.powf(2.0 - p);
    let outer = radial_factor(p, frac);
    Ok((0..u.grid().num_vertices())
        .map(|v| inner * u.cell_energy(v, p) + outer * skeleton.square_coefficient(v, p))
        .sum())
}
