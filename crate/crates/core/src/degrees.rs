//! Topological degrees on cell boundaries and degree-energy estimates.

use std::f64::consts::PI;

use crate::complex::{axes_of, Cell};
use crate::error::{Error, Result};
use crate::maps::{p_energy_region, wrap_angle, GridMap, Target, TWO_PI};

/// Edge gaps closer than this to a half turn make the winding ill-defined.
pub const HALF_TURN_TOL: f64 = 1e-9;

/// `lambda = (k-1)^((1-k)/2)` for the normalized volume form of `S^{k-1}`.
pub fn lambda_const(k: usize) -> Result<f64> {
    match k {
        2 | 3 => {
            let km1 = (k - 1) as f64;
            Ok(km1.powf((1.0 - k as f64) / 2.0))
        }
        _ => Err(Error::OutOfRange(format!("k = {k} not in {{2,3}}"))),
    }
}

/// Volume of the unit `(k-1)`-sphere.
pub fn sphere_volume(k: usize) -> Result<f64> {
    match k {
        2 => Ok(TWO_PI),
        3 => Ok(4.0 * PI),
        _ => Err(Error::OutOfRange(format!("k = {k} not in {{2,3}}"))),
    }
}

/// Constants of the degree-energy profile for a sphere target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeConstants {
    pub k: usize,
    pub lambda: f64,
    pub sigma_km1: f64,
}

impl DegreeConstants {
    pub fn new(k: usize) -> Result<Self> {
        Ok(Self { k, lambda: lambda_const(k)?, sigma_km1: sphere_volume(k)? })
    }

    /// `c(p) = sigma_{k-1} / lambda^(p/(k-1))`.
    pub fn c_p(&self, p: f64) -> f64 {
        self.sigma_km1 / self.lambda.powf(p / (self.k - 1) as f64)
    }

    /// `F_p(s) = c(p)/(k-p) s^(k-p)`.
    pub fn f_p(&self, s: f64, p: f64) -> Result<f64> {
        let k = self.k as f64;
        if !(p > k - 1.0 && p < k) {
            return Err(Error::OutOfRange(format!("p = {p} not in ({}, {k})", k - 1.0)));
        }
        if s < 0.0 {
            return Err(Error::OutOfRange(format!("s = {s} < 0")));
        }
        Ok(self.c_p(p) / (k - p) * s.powf(k - p))
    }
}

pub fn f_p_eval(s: f64, k: usize, p: f64) -> Result<f64> {
    DegreeConstants::new(k)?.f_p(s, p)
}

fn loop_winding(u: &GridMap, loop_vertices: &[usize], cell: usize) -> Result<i64> {
    let mut total = 0.0;
    for (i, &a) in loop_vertices.iter().enumerate() {
        let b = loop_vertices[(i + 1) % loop_vertices.len()];
        let d = wrap_angle(u.angle(b) - u.angle(a));
        if (d.abs() - PI).abs() < HALF_TURN_TOL {
            return Err(Error::NonInteger { cell, reason: format!("half-turn edge {a}->{b}") });
        }
        total += d;
    }
    Ok((total / TWO_PI).round() as i64)
}

/// Signed solid angle of the spherical triangle `(a, b, c)`.
pub fn solid_angle(a: &[f64], b: &[f64], c: &[f64]) -> Option<f64> {
    let bxc = [b[1] * c[2] - b[2] * c[1], b[2] * c[0] - b[0] * c[2], b[0] * c[1] - b[1] * c[0]];
    let num = a[0] * bxc[0] + a[1] * bxc[1] + a[2] * bxc[2];
    let dot = |x: &[f64], y: &[f64]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
    let den = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
    if num.abs() < 1e-14 && den.abs() < 1e-14 {
        return None;
    }
    Some(2.0 * num.atan2(den))
}

/// Degree of `u` on the boundary of the box of `size` cells per side with
/// lower corner `lo` (vertex coordinates). `CIRCLE` maps use the square loop
/// in the plane of the first two axes; `SPHERE` maps use the full cube surface.
pub fn box_degree(u: &GridMap, lo: &[usize], size: &[usize], tag: usize) -> Result<i64> {
    let grid = u.grid();
    match u.target() {
        Target::Circle => {
            let (sx, sy) = (size[0], size[1]);
            let mut lp = Vec::with_capacity(2 * (sx + sy));
            let at = |i: usize, j: usize| {
                let mut c = lo.to_vec();
                c[0] += i;
                c[1] += j;
                grid.vertex_index(&c)
            };
            for i in 0..sx {
                lp.push(at(i, 0));
            }
            for j in 0..sy {
                lp.push(at(sx, j));
            }
            for i in (1..=sx).rev() {
                lp.push(at(i, sy));
            }
            for j in (1..=sy).rev() {
                lp.push(at(0, j));
            }
            loop_winding(u, &lp, tag)
        }
        Target::Sphere => {
            if grid.n() != 3 {
                return Err(Error::DimensionMismatch("sphere degree needs n = 3".into()));
            }
            let mut total = 0.0;
            for tri in box_surface_triangles(size) {
                let vals: Vec<&[f64]> = tri
                    .iter()
                    .map(|c| {
                        let idx = grid.vertex_index(&[lo[0] + c[0], lo[1] + c[1], lo[2] + c[2]]);
                        u.value(idx)
                    })
                    .collect();
                total += solid_angle(vals[0], vals[1], vals[2]).ok_or_else(|| Error::NonInteger {
                    cell: tag,
                    reason: "degenerate image triangle".into(),
                })?;
            }
            let d = total / (4.0 * PI);
            if (d - d.round()).abs() > 1e-6 {
                return Err(Error::NonInteger { cell: tag, reason: format!("solid-angle sum {d}") });
            }
            Ok(d.round() as i64)
        }
        Target::Ambient(_) => Err(Error::TargetMismatch("ambient map".into())),
    }
}

/// Outward-oriented triangles (in box-local vertex offsets) covering the surface
/// of a box, two per boundary unit square.
pub fn box_surface_triangles(size: &[usize]) -> Vec<[[usize; 3]; 3]> {
    let mut out = Vec::new();
    for axis in 0..3 {
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            let fixed = side * size[axis];
            for i in 0..size[a] {
                for j in 0..size[b] {
                    let pt = |di: usize, dj: usize| {
                        let mut c = [0usize; 3];
                        c[axis] = fixed;
                        c[a] = i + di;
                        c[b] = j + dj;
                        c
                    };
                    let (p00, p10, p11, p01) = (pt(0, 0), pt(1, 0), pt(1, 1), pt(0, 1));
                    // (e_a, e_b, e_axis) is a cyclic, hence positive, frame:
                    // counterclockwise in (a, b) faces +axis.
                    if side == 1 {
                        out.push([p00, p10, p11]);
                        out.push([p00, p11, p01]);
                    } else {
                        out.push([p00, p11, p10]);
                        out.push([p00, p01, p11]);
                    }
                }
            }
        }
    }
    out
}

/// Degree of `u` on the boundary of a `k`-cell (`k = 2` for circle maps,
/// `k = 3` for sphere maps), as an exact integer.
pub fn boundary_degree(u: &GridMap, sigma: &Cell) -> Result<i64> {
    let k = u.target().k().ok_or_else(|| Error::TargetMismatch("ambient map".into()))?;
    if sigma.dim() != k {
        return Err(Error::DimensionMismatch(format!("cell of dim {} for k = {k}", sigma.dim())));
    }
    let grid = u.grid();
    let axes = axes_of(sigma.axes);
    match k {
        2 => {
            let (a, b) = (axes[0], axes[1]);
            let v = sigma.base;
            let va = grid.shift(v, a, 1);
            let vab = grid.shift(va, b, 1);
            let vb = grid.shift(v, b, 1);
            loop_winding(u, &[v, va, vab, vb], sigma.base)
        }
        _ => box_degree(u, &grid.vertex_coords(sigma.base), &[1, 1, 1], sigma.base),
    }
}

/// Windings of every square of an `n = 2` circle map, indexed by base vertex.
pub fn plaquette_windings(u: &GridMap) -> Result<Vec<i64>> {
    if u.target() != Target::Circle || u.grid().n() != 2 {
        return Err(Error::TargetMismatch("plaquette windings need a circle map on T^2".into()));
    }
    (0..u.grid().num_vertices())
        .map(|v| boundary_degree(u, &Cell { base: v, axes: 0b11 }))
        .collect()
}

/// Outcome of a degree-energy comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeBoundReport {
    pub d: i64,
    /// Measured energy (for the cube check: the extended energy `E(I) + C r E(dI)`).
    pub energy: f64,
    /// Lower bound for `energy` implied by the degree.
    pub bound: f64,
    pub satisfied: bool,
    /// `energy / bound` (infinite when the bound vanishes).
    pub slack: f64,
    /// Relative tolerance applied to `satisfied`.
    pub tolerance: f64,
    /// For the cube check: the constant `C` that would make the bound an equality.
    pub implied_constant: Option<f64>,
}

fn report(d: i64, energy: f64, bound: f64, tolerance: f64, implied_constant: Option<f64>) -> DegreeBoundReport {
    DegreeBoundReport {
        d,
        energy,
        bound,
        satisfied: energy >= (1.0 - tolerance) * bound,
        slack: if bound > 0.0 { energy / bound } else { f64::INFINITY },
        tolerance,
        implied_constant,
    }
}

/// Degree of a circle map along the circle of radius `r` about `center`,
/// measured on the interpolated map.
pub fn circle_degree(u: &GridMap, center: &[f64], r: f64, samples: usize) -> i64 {
    let pts: Vec<f64> = (0..samples)
        .map(|i| {
            let t = TWO_PI * i as f64 / samples as f64;
            u.sample(&[center[0] + r * t.cos(), center[1] + r * t.sin()])[0]
        })
        .collect();
    let total: f64 = (0..samples).map(|i| wrap_angle(pts[(i + 1) % samples] - pts[i])).sum();
    (total / TWO_PI).round() as i64
}

/// Annulus lower bound `E_p(u, B_r2 \ B_r1) >= d [F_p(r2/d) - F_p(r1/d)]` for a
/// circle map on `T^2`; energy summed over squares whose centers lie in the annulus.
pub fn verify_annulus_bound(u: &GridMap, center: &[f64], r1: f64, r2: f64, p: f64) -> Result<DegreeBoundReport> {
    if u.target() != Target::Circle || u.grid().n() != 2 {
        return Err(Error::TargetMismatch("annulus check needs a circle map on T^2".into()));
    }
    let consts = DegreeConstants::new(2)?;
    let d = circle_degree(u, center, 0.5 * (r1 + r2), 4096).abs();
    let energy = p_energy_region(u, p, |c| {
        let r = ((c[0] - center[0]).powi(2) + (c[1] - center[1]).powi(2)).sqrt();
        r >= r1 && r <= r2
    })?;
    let bound = if d == 0 {
        0.0
    } else {
        let df = d as f64;
        df * (consts.f_p(r2 / df, p)? - consts.f_p(r1 / df, p)?)
    };
    Ok(report(d, energy, bound, 0.03, None))
}

/// Cube estimate: `E(I) + C r E(dI) >= c(p)/(k-p) (r/2)^(k-p) d^(1+p-k)` with `C = 1`,
/// for the box of `size` cells per side at vertex `lo`.
pub fn verify_cube_bound(u: &GridMap, lo: &[usize], size: usize, p: f64, r: f64) -> Result<DegreeBoundReport> {
    let k = u.target().k().ok_or_else(|| Error::TargetMismatch("ambient map".into()))?;
    let grid = u.grid();
    if grid.n() != k {
        return Err(Error::DimensionMismatch(format!("cube check needs n = k = {k}")));
    }
    let consts = DegreeConstants::new(k)?;
    let h = grid.h();
    let d = box_degree(u, lo, &vec![size; k], 0)?.abs();
    // interior energy
    let mut e_int = 0.0;
    let mut e_bdry = 0.0;
    let idx = |off: &[usize]| {
        let c: Vec<usize> = lo.iter().zip(off).map(|(a, b)| a + b).collect();
        grid.vertex_index(&c)
    };
    let mut off = vec![0usize; k];
    loop {
        e_int += u.cell_energy(idx(&off), p);
        let mut a = 0;
        while a < k {
            off[a] += 1;
            if off[a] < size {
                break;
            }
            off[a] = 0;
            a += 1;
        }
        if a == k {
            break;
        }
    }
    // boundary energy: tangential forward differences on boundary (k-1)-cells
    for axis in 0..k {
        let others: Vec<usize> = (0..k).filter(|&b| b != axis).collect();
        for side in [0, size] {
            let count = size.pow(others.len() as u32);
            for t in 0..count {
                let mut o = vec![0usize; k];
                o[axis] = side;
                let mut rem = t;
                for &b in &others {
                    o[b] = rem % size;
                    rem /= size;
                }
                let v = idx(&o);
                let g2: f64 = others
                    .iter()
                    .map(|&b| (u.target_distance(u.value(v), u.value(grid.shift(v, b, 1))) / h).powi(2))
                    .sum();
                e_bdry += g2.powf(0.5 * p) * h.powi(k as i32 - 1);
            }
        }
    }
    let energy = e_int + r * e_bdry;
    let kf = k as f64;
    let bound = if d == 0 {
        0.0
    } else {
        consts.c_p(p) / (kf - p) * (0.5 * r).powf(kf - p) * (d as f64).powf(1.0 + p - kf)
    };
    let implied = if e_bdry > 0.0 { Some((bound - e_int) / (r * e_bdry)) } else { None };
    Ok(report(d, energy, bound, 0.0, implied))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::TorusGrid;
    use approx::assert_relative_eq;

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_const(2).unwrap(), 1.0);
        assert_relative_eq!(lambda_const(3).unwrap(), 0.5, max_relative = 1e-15);
        assert!(lambda_const(4).is_err());
        assert_relative_eq!(DegreeConstants::new(2).unwrap().c_p(1.5), TWO_PI);
    }

    #[test]
    fn f_p_values() {
        assert_eq!(f_p_eval(0.0, 2, 1.5).unwrap(), 0.0);
        assert_relative_eq!(f_p_eval(1.0, 2, 1.5).unwrap(), 4.0 * PI, max_relative = 1e-14);
        let f = |s| f_p_eval(s, 2, 1.9).unwrap();
        assert!(f(0.3) + f(0.7) >= f(1.0));
        assert!(f_p_eval(1.0, 2, 2.0).is_err());
        assert!(f_p_eval(1.0, 3, 1.5).is_err());
    }

    #[test]
    fn f_p_over_s_strictly_decreasing() {
        for (k, p) in [(2, 1.5), (2, 1.99), (3, 2.5)] {
            let c = DegreeConstants::new(k).unwrap();
            let mut prev = f64::INFINITY;
            for i in 0..=120 {
                let s = 10f64.powf(-3.0 + 6.0 * i as f64 / 120.0);
                let r = c.f_p(s, p).unwrap() / s;
                assert!(r < prev);
                prev = r;
            }
        }
    }

    #[test]
    fn plaquette_degrees_for_simple_maps() {
        let g = TorusGrid::unit(2, 8).unwrap();
        let u = GridMap::constant_circle(g.clone(), 0.3);
        assert!(plaquette_windings(&u).unwrap().iter().all(|&w| w == 0));
        let u = GridMap::circle_from_fn(g.clone(), |x| 2.0 * TWO_PI * x[0]);
        assert!(plaquette_windings(&u).unwrap().iter().all(|&w| w == 0));
        // vortex centered inside square (2,3)
        let c = [2.5 / 8.0, 3.5 / 8.0];
        let u = GridMap::circle_from_fn(g.clone(), |x| (x[1] - c[1]).atan2(x[0] - c[0]));
        let w = plaquette_windings(&u).unwrap();
        assert_eq!(w[g.vertex_index(&[2, 3])], 1);
    }

    #[test]
    fn half_turn_edges_are_flagged() {
        let g = TorusGrid::unit(2, 4).unwrap();
        let mut a = vec![0.0; 16];
        a[1] = PI;
        let u = GridMap::circle(g, a).unwrap();
        assert!(matches!(
            boundary_degree(&u, &Cell { base: 0, axes: 0b11 }),
            Err(Error::NonInteger { .. })
        ));
    }

    #[test]
    fn hedgehog_has_degree_one() {
        let g = TorusGrid::unit(3, 4).unwrap();
        let c = [0.375, 0.375, 0.375];
        let u = GridMap::sphere_from_fn(g.clone(), |x| [x[0] - c[0], x[1] - c[1], x[2] - c[2]]);
        let cell = Cell { base: g.vertex_index(&[1, 1, 1]), axes: 0b111 };
        assert_eq!(boundary_degree(&u, &cell).unwrap(), 1);
        let anti = GridMap::sphere_from_fn(g.clone(), |x| [-(x[0] - c[0]), x[1] - c[1], x[2] - c[2]]);
        assert_eq!(boundary_degree(&anti, &cell).unwrap(), -1);
        let far = Cell { base: g.vertex_index(&[0, 0, 0]), axes: 0b111 };
        assert_eq!(boundary_degree(&u, &far).unwrap(), 0);
    }

    #[test]
    fn degree_zero_cube_bound_is_trivial() {
        let g = TorusGrid::unit(2, 16).unwrap();
        let u = GridMap::circle_from_fn(g, |x| TWO_PI * x[0]);
        let rep = verify_cube_bound(&u, &[4, 4], 6, 1.5, 0.1).unwrap();
        assert_eq!(rep.d, 0);
        assert_eq!(rep.bound, 0.0);
        assert!(rep.satisfied);
    }
}
