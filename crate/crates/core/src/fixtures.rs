//! Analytic test maps: periodic vortex configurations on `T^2`, vortex lines
//! on `T^3`, winding maps and the hedgehog.

use crate::complex::TorusGrid;
use crate::error::{Error, Result};
use crate::maps::{GridMap, TWO_PI};
use num_complex::Complex64;

/// A point vortex on `T^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vortex {
    pub position: [f64; 2],
    pub degree: i64,
}

impl Vortex {
    pub fn new(x: f64, y: f64, degree: i64) -> Self {
        Self { position: [x, y], degree }
    }
}

/// Jacobi `theta_1(pi z | i)`, whose zeros are the lattice points `Z + iZ`.
fn theta1(z: Complex64) -> Complex64 {
    let q = (-std::f64::consts::PI).exp();
    let w = z * std::f64::consts::PI;
    (0..8)
        .map(|n| {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            2.0 * sign * q.powf((n as f64 + 0.5).powi(2)) * (w * (2 * n + 1) as f64).sin()
        })
        .sum()
}

/// Phase of a periodic vortex configuration with net degree zero, plus a
/// background winding `(q1, q2)` along the coordinate circles.
pub fn vortex_phase(vortices: &[Vortex], q: [i64; 2], x: &[f64]) -> f64 {
    let mut phase = 0.0;
    let mut shift = 0.0;
    for v in vortices {
        let t = theta1(Complex64::new(x[0] - v.position[0], x[1] - v.position[1]));
        phase += v.degree as f64 * t.arg();
        shift += v.degree as f64 * v.position[0];
    }
    // theta_1 picks up the factor exp(-2 pi i (z - a)) along the imaginary period
    phase - TWO_PI * shift * x[1] + TWO_PI * (q[0] as f64 * x[0] + q[1] as f64 * x[1])
}

fn check_net_zero(vortices: &[Vortex]) -> Result<()> {
    let net: i64 = vortices.iter().map(|v| v.degree).sum();
    if net != 0 {
        return Err(Error::OutOfRange(format!("net vortex degree {net} != 0 on a torus")));
    }
    Ok(())
}

/// Circle map on a `T^2` grid with the given vortices and background windings.
pub fn vortex_map(grid: TorusGrid, vortices: &[Vortex], q: [i64; 2]) -> Result<GridMap> {
    if grid.n() != 2 {
        return Err(Error::DimensionMismatch("vortex maps live on T^2".into()));
    }
    check_net_zero(vortices)?;
    Ok(GridMap::circle_from_fn(grid, |x| vortex_phase(vortices, q, x)))
}

/// Vortex-antivortex pair at `a` (+1) and `b` (-1).
pub fn vortex_pair(grid: TorusGrid, a: [f64; 2], b: [f64; 2]) -> Result<GridMap> {
    vortex_map(grid, &[Vortex::new(a[0], a[1], 1), Vortex::new(b[0], b[1], -1)], [0, 0])
}

/// Circle map on `T^3` whose vortex lines run parallel to the `z` axis.
pub fn vortex_lines(grid: TorusGrid, vortices: &[Vortex]) -> Result<GridMap> {
    if grid.n() != 3 {
        return Err(Error::DimensionMismatch("vortex lines live on T^3".into()));
    }
    check_net_zero(vortices)?;
    Ok(GridMap::circle_from_fn(grid, |x| vortex_phase(vortices, [0, 0], x)))
}

/// `x -> 2 pi (q . x)` on `T^n`.
pub fn winding_map(grid: TorusGrid, q: &[i64]) -> Result<GridMap> {
    if q.len() != grid.n() {
        return Err(Error::DimensionMismatch("one winding per axis".into()));
    }
    Ok(GridMap::circle_from_fn(grid, |x| {
        TWO_PI * x.iter().zip(q).map(|(a, &b)| a * b as f64).sum::<f64>()
    }))
}

/// Hedgehog `x -> (x - c)/|x - c|` on `T^3`, degree +1 around `c`.
pub fn hedgehog(grid: TorusGrid, c: [f64; 3]) -> Result<GridMap> {
    if grid.n() != 3 {
        return Err(Error::DimensionMismatch("hedgehog lives on T^3".into()));
    }
    Ok(GridMap::sphere_from_fn(grid, |x| {
        let d = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
        if d.iter().all(|v| v.abs() < 1e-12) {
            [0.0, 0.0, 1.0]
        } else {
            d
        }
    }))
}
