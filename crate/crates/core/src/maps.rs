//! Discrete maps from torus grid vertices into `S^1`, `S^2` or Euclidean space.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::complex::{axes_of, CubicalComplex, Retraction, TorusGrid};
use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

/// What a [`GridMap`] stores per vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// One angle in `[0, 2pi)`.
    Circle,
    /// One unit vector in `R^3`.
    Sphere,
    /// An unconstrained vector of the given dimension (2 or 3).
    Ambient(usize),
}

impl Target {
    pub fn width(&self) -> usize {
        match self {
            Target::Circle => 1,
            Target::Sphere => 3,
            Target::Ambient(d) => *d,
        }
    }

    /// Dimension `k` of the domain cells that detect degree (`S^{k-1}`).
    pub fn k(&self) -> Option<usize> {
        match self {
            Target::Circle => Some(2),
            Target::Sphere => Some(3),
            Target::Ambient(_) => None,
        }
    }
}

/// Wrap an angle difference into `(-pi, pi]`.
pub fn wrap_angle(d: f64) -> f64 {
    let r = d.rem_euclid(TWO_PI);
    if r > PI {
        r - TWO_PI
    } else {
        r
    }
}

fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TWO_PI);
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

/// Great-circle distance between unit vectors.
pub fn sphere_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cx = a[1] * b[2] - a[2] * b[1];
    let cy = a[2] * b[0] - a[0] * b[2];
    let cz = a[0] * b[1] - a[1] * b[0];
    (cx * cx + cy * cy + cz * cz).sqrt().atan2(dot)
}

/// A map sampled at the vertices of a torus grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    grid: TorusGrid,
    target: Target,
    values: Vec<f64>,
}

impl GridMap {
    pub fn circle(grid: TorusGrid, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != grid.num_vertices() {
            return Err(Error::DimensionMismatch(format!(
                "{} angles for {} vertices",
                angles.len(),
                grid.num_vertices()
            )));
        }
        let values = angles.into_iter().map(normalize_angle).collect();
        Ok(Self { grid, target: Target::Circle, values })
    }

    pub fn sphere(grid: TorusGrid, vectors: Vec<[f64; 3]>) -> Result<Self> {
        if vectors.len() != grid.num_vertices() {
            return Err(Error::DimensionMismatch(format!(
                "{} vectors for {} vertices",
                vectors.len(),
                grid.num_vertices()
            )));
        }
        let mut values = Vec::with_capacity(3 * vectors.len());
        for (i, v) in vectors.iter().enumerate() {
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::TargetMismatch(format!(
                    "vertex {i} has norm {norm}, not a unit vector"
                )));
            }
            values.extend(v.iter().map(|c| c / norm));
        }
        Ok(Self { grid, target: Target::Sphere, values })
    }

    /// Sphere map from unit vectors already validated to 1e-9, kept bit for bit.
    pub(crate) fn sphere_unchecked(grid: TorusGrid, values: Vec<f64>) -> Self {
        Self { grid, target: Target::Sphere, values }
    }

    pub fn ambient(grid: TorusGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(dim == 2 || dim == 3) || values.len() != dim * grid.num_vertices() {
            return Err(Error::DimensionMismatch(format!(
                "{} ambient values of width {dim} for {} vertices",
                values.len(),
                grid.num_vertices()
            )));
        }
        Ok(Self { grid, target: Target::Ambient(dim), values })
    }

    pub fn circle_from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let angles = (0..grid.num_vertices())
            .map(|v| f(&grid.vertex_position(v)))
            .collect();
        Self::circle(grid, angles).expect("length matches")
    }

    pub fn sphere_from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> [f64; 3]) -> Self {
        let vecs = (0..grid.num_vertices())
            .map(|v| {
                let w = f(&grid.vertex_position(v));
                let n = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
                [w[0] / n, w[1] / n, w[2] / n]
            })
            .collect();
        Self::sphere(grid, vecs).expect("length matches")
    }

    pub fn constant_circle(grid: TorusGrid, angle: f64) -> Self {
        let n = grid.num_vertices();
        Self::circle(grid, vec![angle; n]).expect("length matches")
    }

    /// Random smooth-ish circle map: independent uniform angles per vertex.
    pub fn random_circle(grid: TorusGrid, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = grid.num_vertices();
        let angles = (0..n).map(|_| rng.gen_range(0.0..TWO_PI)).collect();
        Self::circle(grid, angles).expect("length matches")
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, v: usize) -> &[f64] {
        let w = self.target.width();
        &self.values[v * w..(v + 1) * w]
    }

    pub fn angle(&self, v: usize) -> f64 {
        self.values[v]
    }

    /// Embed into ambient space (`S^1 -> R^2`, `S^2 -> R^3`).
    pub fn to_ambient(&self) -> GridMap {
        match self.target {
            Target::Circle => {
                let values = self.values.iter().flat_map(|a| [a.cos(), a.sin()]).collect();
                GridMap { grid: self.grid.clone(), target: Target::Ambient(2), values }
            }
            Target::Sphere => GridMap {
                grid: self.grid.clone(),
                target: Target::Ambient(3),
                values: self.values.clone(),
            },
            Target::Ambient(_) => self.clone(),
        }
    }

    /// Distance in the target between two stored vertex values.
    pub fn target_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.target {
            Target::Circle => wrap_angle(b[0] - a[0]).abs(),
            Target::Sphere => sphere_distance(a, b),
            Target::Ambient(_) => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
        }
    }

    fn vertex_distance(&self, v: usize, w: usize) -> f64 {
        self.target_distance(self.value(v), self.value(w))
    }

    /// Multilinear interpolation at a physical point. Circle values are lifted
    /// relative to the cell's base vertex; sphere values are renormalized.
    pub fn sample(&self, x: &[f64]) -> Vec<f64> {
        let n = self.grid.n();
        let xi = self.grid.to_grid_units(x);
        let base: Vec<usize> = xi.iter().map(|g| g.floor() as usize % self.grid.m()).collect();
        let frac: Vec<f64> = xi.iter().map(|g| g - g.floor()).collect();
        let base_idx = self.grid.vertex_index(&base);
        let w = self.target.width();
        let mut acc = vec![0.0; w];
        for corner in 0..(1usize << n) {
            let mut weight = 1.0;
            let mut c = base.clone();
            for a in 0..n {
                if corner & (1 << a) != 0 {
                    weight *= frac[a];
                    c[a] += 1;
                } else {
                    weight *= 1.0 - frac[a];
                }
            }
            if weight == 0.0 {
                continue;
            }
            let v = self.grid.vertex_index(&c);
            match self.target {
                Target::Circle => {
                    acc[0] += weight * wrap_angle(self.values[v] - self.values[base_idx]);
                }
                _ => {
                    for (s, val) in acc.iter_mut().zip(self.value(v)) {
                        *s += weight * val;
                    }
                }
            }
        }
        match self.target {
            Target::Circle => vec![normalize_angle(self.values[base_idx] + acc[0])],
            Target::Sphere => {
                let nrm = acc.iter().map(|c| c * c).sum::<f64>().sqrt();
                if nrm < 1e-300 {
                    self.value(base_idx).to_vec()
                } else {
                    acc.iter().map(|c| c / nrm).collect()
                }
            }
            Target::Ambient(_) => acc,
        }
    }

    /// Resample onto another grid by interpolation.
    pub fn resample(&self, grid: TorusGrid) -> GridMap {
        let w = self.target.width();
        let mut values = Vec::with_capacity(w * grid.num_vertices());
        for v in 0..grid.num_vertices() {
            values.extend(self.sample(&grid.vertex_position(v)));
        }
        GridMap { grid, target: self.target, values }
    }

    /// Same map with values circularly shifted by whole grid steps.
    pub fn translated(&self, steps: &[isize]) -> GridMap {
        let w = self.target.width();
        let mut values = vec![0.0; self.values.len()];
        for v in 0..self.grid.num_vertices() {
            let mut t = v;
            for (a, &s) in steps.iter().enumerate() {
                t = self.grid.shift(t, a, s);
            }
            values[t * w..(t + 1) * w].copy_from_slice(self.value(v));
        }
        GridMap { grid: self.grid.clone(), target: self.target, values }
    }

    fn require_target_valued(&self) -> Result<()> {
        if let Target::Ambient(_) = self.target {
            return Err(Error::TargetMismatch("ambient map; use the Ginzburg-Landau energy".into()));
        }
        Ok(())
    }

    /// Forward-difference squared gradient at the base vertex of top cell `v`.
    fn cell_grad_sq(&self, v: usize) -> f64 {
        let h = self.grid.h();
        (0..self.grid.n())
            .map(|a| {
                let d = self.vertex_distance(v, self.grid.shift(v, a, 1)) / h;
                d * d
            })
            .sum()
    }

    /// p-energy of a single top cell (indexed by its base vertex).
    pub fn cell_energy(&self, v: usize, p: f64) -> f64 {
        self.cell_grad_sq(v).powf(0.5 * p) * self.grid.h().powi(self.grid.n() as i32)
    }
}

/// Discrete p-energy: one forward stencil per top cell at its base vertex,
/// with geodesic differences.
pub fn p_energy(u: &GridMap, p: f64) -> Result<f64> {
    u.require_target_valued()?;
    if p < 1.0 {
        return Err(Error::OutOfRange(format!("p = {p} < 1")));
    }
    Ok((0..u.grid.num_vertices()).map(|v| u.cell_energy(v, p)).sum())
}

/// p-energy restricted to the top cells whose centers satisfy `inside`.
pub fn p_energy_region(u: &GridMap, p: f64, inside: impl Fn(&[f64]) -> bool) -> Result<f64> {
    u.require_target_valued()?;
    let h = u.grid.h();
    Ok((0..u.grid.num_vertices())
        .filter(|&v| {
            let c: Vec<f64> = u.grid.vertex_position(v).iter().map(|x| x + 0.5 * h).collect();
            inside(&c)
        })
        .map(|v| u.cell_energy(v, p))
        .sum())
}

/// p-energy over top cells none of whose corners is masked.
pub fn p_energy_masked(u: &GridMap, mask: &[bool], p: f64) -> Result<f64> {
    u.require_target_valued()?;
    let n = u.grid.n();
    Ok((0..u.grid.num_vertices())
        .filter(|&v| {
            (0..(1usize << n)).all(|corner| {
                let mut w = v;
                for a in 0..n {
                    if corner & (1 << a) != 0 {
                        w = u.grid.shift(w, a, 1);
                    }
                }
                !mask[w]
            })
        })
        .map(|v| u.cell_energy(v, p))
        .sum())
}

fn check_compatible(u: &GridMap, v: &GridMap) -> Result<()> {
    if u.grid != v.grid {
        return Err(Error::DimensionMismatch("maps live on different grids".into()));
    }
    if u.target != v.target {
        return Err(Error::TargetMismatch("maps have different targets".into()));
    }
    Ok(())
}

/// `(sum_v d_N(u, v)^p h^n)^(1/p)`.
pub fn lp_distance(u: &GridMap, v: &GridMap, p: f64) -> Result<f64> {
    check_compatible(u, v)?;
    let vol = u.grid.h().powi(u.grid.n() as i32);
    let s: f64 = (0..u.grid.num_vertices())
        .map(|i| u.target_distance(u.value(i), v.value(i)).powf(p))
        .sum();
    Ok((s * vol).powf(1.0 / p))
}

/// p-energy of `u` on the `j`-skeleton of the grid translated by `offset`,
/// using tangential forward differences of the interpolated map and weight
/// `h^j` per `j`-cell.
pub fn skeleton_energy(u: &GridMap, j: usize, offset: &[f64], p: f64) -> Result<f64> {
    u.require_target_valued()?;
    let n = u.grid.n();
    if j > n {
        return Err(Error::DimensionMismatch(format!("j = {j} > n = {n}")));
    }
    if j == 0 {
        return Ok(0.0);
    }
    let grid = TorusGrid::new(n, u.grid.m(), offset)?;
    let complex = CubicalComplex::new(grid.clone());
    let h = grid.h();
    let samples: Vec<Vec<f64>> =
        (0..grid.num_vertices()).map(|v| u.sample(&grid.vertex_position(v))).collect();
    let mut total = 0.0;
    for cell in complex.cells(j) {
        let g2: f64 = axes_of(cell.axes)
            .iter()
            .map(|&a| {
                let d = u.target_distance(&samples[cell.base], &samples[grid.shift(cell.base, a, 1)]) / h;
                d * d
            })
            .sum();
        total += g2.powf(0.5 * p) * h.powi(j as i32);
    }
    Ok(total)
}

/// p-energy on the top-dimensional cells spanning the last `k` axes of the
/// translated grid, i.e. the component of the `k`-skeleton parallel to
/// `{0} x R^k`.
pub fn parallel_skeleton_energy(u: &GridMap, k: usize, offset: &[f64], p: f64) -> Result<f64> {
    u.require_target_valued()?;
    let n = u.grid.n();
    let grid = TorusGrid::new(n, u.grid.m(), offset)?;
    let h = grid.h();
    let axes: Vec<usize> = (n - k..n).collect();
    let samples: Vec<Vec<f64>> =
        (0..grid.num_vertices()).map(|v| u.sample(&grid.vertex_position(v))).collect();
    Ok((0..grid.num_vertices())
        .map(|v| {
            let g2: f64 = axes
                .iter()
                .map(|&a| {
                    let d = u.target_distance(&samples[v], &samples[grid.shift(v, a, 1)]) / h;
                    d * d
                })
                .sum();
            g2.powf(0.5 * p) * h.powi(k as i32)
        })
        .sum())
}

/// An energy value together with its skeleton decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySample {
    pub p: f64,
    pub value: f64,
    pub skeleton_values: Vec<f64>,
}

pub fn energy_sample(u: &GridMap, p: f64, offset: &[f64]) -> Result<EnergySample> {
    let value = p_energy(u, p)?;
    let skeleton_values = (0..=u.grid.n())
        .map(|j| skeleton_energy(u, j, offset, p))
        .collect::<Result<_>>()?;
    Ok(EnergySample { p, value, skeleton_values })
}

/// Offset with its measured slicing ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetCertificate {
    pub offset: Vec<f64>,
    /// `skeleton_energy_j / (h^(j-n) E_p)` for `j = 0..=n`.
    pub coarse_ratios: Vec<f64>,
    /// Same ratio for the distinguished parallel `k`-skeleton component.
    pub sharp_ratio: f64,
    /// Bound used for the coarse ratios, `C / eta` with `C = n`.
    pub coarse_bound: f64,
    pub trial: usize,
}

/// Search translated grids for one whose skeleton energies obey the slicing
/// bounds: coarse ratios at most `n / eta`, parallel `k`-component ratio at
/// most `1 + eta`. Trial 0 is the untranslated grid; later trials are drawn
/// from `seed`.
pub fn select_offset(u: &GridMap, p: f64, eta: f64, trials: usize, seed: u64) -> Result<OffsetCertificate> {
    if eta <= 0.0 || trials == 0 {
        return Err(Error::OutOfRange(format!("eta = {eta}, trials = {trials}")));
    }
    let k = u.target.k().ok_or_else(|| Error::TargetMismatch("ambient map".into()))?;
    let n = u.grid.n();
    let h = u.grid.h();
    let e = p_energy(u, p)?;
    let coarse_bound = n as f64 / eta;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for trial in 0..trials {
        let offset: Vec<f64> = if trial == 0 {
            vec![0.0; n]
        } else {
            (0..n).map(|_| rng.gen_range(0.0..h)).collect()
        };
        let ratio = |val: f64, j: usize| if e > 0.0 { val / (h.powi(j as i32 - n as i32) * e) } else { 0.0 };
        let coarse: Vec<f64> = (0..=n)
            .map(|j| skeleton_energy(u, j, &offset, p).map(|s| ratio(s, j)))
            .collect::<Result<_>>()?;
        let sharp = ratio(parallel_skeleton_energy(u, k.min(n), &offset, p)?, k.min(n));
        let ok = coarse.iter().all(|&r| r <= coarse_bound) && sharp <= 1.0 + eta;
        if ok {
            return Ok(OffsetCertificate { offset, coarse_ratios: coarse, sharp_ratio: sharp, coarse_bound, trial });
        }
        let mut all = coarse.clone();
        all.push(sharp);
        let score = sharp.max(coarse.iter().cloned().fold(0.0, f64::max) / coarse_bound);
        if best.as_ref().map_or(true, |(s, _)| score < *s) {
            best = Some((score, all));
        }
    }
    Err(Error::OffsetSearch { best: best.map(|b| b.1).unwrap_or_default() })
}

/// A map pulled back through the skeleton retraction and sampled on a refined grid.
#[derive(Debug, Clone)]
pub struct RetractedMap {
    pub map: GridMap,
    /// Refined vertices lying on the dual skeleton, where the retraction is singular.
    pub mask: Vec<bool>,
    pub refine: usize,
}

/// Sample `u o Phi_k` on the `refine * m` grid.
pub fn retract_to_skeleton(u: &GridMap, k: usize, refine: usize) -> Result<RetractedMap> {
    u.require_target_valued()?;
    if refine < 2 {
        return Err(Error::OutOfRange(format!("refine = {refine} < 2")));
    }
    if k == 0 || k > u.grid.n() {
        return Err(Error::DimensionMismatch(format!("k = {k}")));
    }
    let complex = CubicalComplex::new(u.grid.clone());
    let fine = TorusGrid::new(u.grid.n(), refine * u.grid.m(), &fine_offset(&u.grid, refine))?;
    let w = u.target.width();
    let mut values = Vec::with_capacity(w * fine.num_vertices());
    let mut mask = Vec::with_capacity(fine.num_vertices());
    for v in 0..fine.num_vertices() {
        let x = fine.vertex_position(v);
        match complex.retract(k, &x) {
            Retraction::Point(y) => {
                values.extend(u.sample(&y));
                mask.push(false);
            }
            Retraction::Singular => {
                values.extend(u.sample(&x));
                mask.push(true);
            }
        }
    }
    Ok(RetractedMap { map: GridMap { grid: fine, target: u.target, values }, mask, refine })
}

/// Offset of the refined grid whose vertices include every coarse vertex.
pub fn fine_offset(grid: &TorusGrid, refine: usize) -> Vec<f64> {
    let hf = grid.h() / refine as f64;
    grid.offset().iter().map(|&a| a.rem_euclid(hf)).collect()
}
